//! Pathwise solvers for `dX = b(X) dt + σ(X) dB^H` and the ensemble moment
//! studies built on them.
//!
//! The explicit Euler scheme is the workhorse; a Young–Picard fixed-point
//! iteration (trapezoid-compensated Riemann–Stieltjes integrals) serves as a
//! higher-accuracy reference on smooth diffusion coefficients. Measurable
//! drifts are evaluated pointwise at grid states, without mollification.

use crate::ensemble::{map_replicas, SeedRecord};
use crate::error::{Error, Result};
use crate::fbm::{self, FbmPath, Generator};
use crate::fraccalc;
use crate::grid::GridFunction;
use crate::report::{FailureRecord, MonteCarloReport};
use crate::stats;
use crate::volterra::{HurstParam, KernelGrid};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type VecField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Drift, diffusion and their declared regularity metadata.
///
/// The declared constants are certified empirically on sampled point pairs
/// (see [`CoefficientSpec::certify`]); they cannot be proved mechanically for
/// arbitrary closures.
#[derive(Clone)]
pub struct CoefficientSpec {
    pub name: String,
    pub dim: usize,
    drift: VecField,
    /// writes the d x d diffusion matrix row-major
    diffusion: VecField,
    /// `K_b` with `|b(x)| <= K_b (1 + |x|)`
    pub growth_const: f64,
    /// Hölder order `gamma` of the diffusion
    pub holder_order: f64,
    /// Hölder constant of the diffusion in operator norm
    pub holder_const: f64,
    /// declared `sup |σ|`, when the diffusion is bounded
    pub sigma_sup_bound: Option<f64>,
    /// declared `λ > 0` with `σσ* >= λ I`, when nondegenerate
    pub nondegeneracy: Option<f64>,
}

impl std::fmt::Debug for CoefficientSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("growth_const", &self.growth_const)
            .field("holder_order", &self.holder_order)
            .field("holder_const", &self.holder_const)
            .field("sigma_sup_bound", &self.sigma_sup_bound)
            .field("nondegeneracy", &self.nondegeneracy)
            .finish()
    }
}

impl CoefficientSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        drift: VecField,
        diffusion: VecField,
        growth_const: f64,
        holder_order: f64,
        holder_const: f64,
        sigma_sup_bound: Option<f64>,
        nondegeneracy: Option<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(holder_order > 0.0 && holder_order <= 1.0) {
            return Err(Error::invalid(format!(
                "diffusion Hölder order {holder_order} not in (0, 1]"
            )));
        }
        Ok(CoefficientSpec {
            name: name.into(),
            dim,
            drift,
            diffusion,
            growth_const,
            holder_order,
            holder_const,
            sigma_sup_bound,
            nondegeneracy,
        })
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out);
    }

    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out);
    }

    pub fn diffusion_matrix(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let d = self.dim;
        let mut buf = vec![0.0; d * d];
        self.diffusion_into(x, &mut buf);
        nalgebra::DMatrix::from_row_slice(d, d, &buf)
    }

    /// Hypothesis check for a given Hurst parameter: `gamma > 1/H - 1`.
    pub fn validate_for(&self, h: HurstParam) -> Result<()> {
        let bound = 1.0 / h.value() - 1.0;
        if self.holder_order <= bound {
            return Err(Error::invalid(format!(
                "'{}': diffusion Hölder order {} must exceed 1/H - 1 = {bound}",
                self.name, self.holder_order
            )));
        }
        Ok(())
    }

    /// Empirical certification of the declared growth and Hölder constants on
    /// randomized point pairs inside a ball. Violations are reported, not
    /// fatal: the declarations are semantic properties of the closures.
    pub fn certify(&self, seed: u64, n_pairs: usize, radius: f64) -> Certification {
        let mut rng = SeedRecord::new(seed, 0).rng();
        let d = self.dim;
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut bx = vec![0.0; d];
        let mut sx = vec![0.0; d * d];
        let mut sy = vec![0.0; d * d];
        let mut max_growth: f64 = 0.0;
        let mut max_holder: f64 = 0.0;
        for _ in 0..n_pairs {
            for v in x.iter_mut().chain(y.iter_mut()) {
                *v = rng.random_range(-radius..radius);
            }
            self.drift_into(&x, &mut bx);
            let bn = norm(&bx);
            let xn = norm(&x);
            max_growth = max_growth.max(bn / (1.0 + xn));

            self.diffusion_into(&x, &mut sx);
            self.diffusion_into(&y, &mut sy);
            for (a, b) in sx.iter_mut().zip(&sy) {
                *a -= b;
            }
            let diff = nalgebra::DMatrix::from_row_slice(d, d, &sx);
            let op_norm = diff.singular_values().max();
            let dist = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > 1e-12 {
                max_holder = max_holder.max(op_norm / dist.powf(self.holder_order));
            }
        }
        let growth_ok = max_growth <= self.growth_const * (1.0 + 1e-9)
            || (self.growth_const == 0.0 && max_growth == 0.0);
        let holder_ok = max_holder <= self.holder_const * (1.0 + 1e-9)
            || (self.holder_const == 0.0 && max_holder == 0.0);
        Certification {
            pairs: n_pairs,
            max_growth_ratio: max_growth,
            growth_ok,
            max_holder_ratio: max_holder,
            holder_ok,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Outcome of randomized constant certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub pairs: usize,
    pub max_growth_ratio: f64,
    pub growth_ok: bool,
    pub max_holder_ratio: f64,
    pub holder_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    YoungPicard,
}

#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub path: GridFunction,
    pub driver: FbmPath,
    pub scheme: Scheme,
    pub x0: Vec<f64>,
}

/// Explicit Euler step `X_{i+1} = X_i + b(X_i) h + σ(X_i) ΔB_i`; exact for
/// constant coefficients up to floating rounding.
pub fn euler_solve(c: &CoefficientSpec, x0: &[f64], driver: &FbmPath) -> Result<SolutionPath> {
    let d = c.dim;
    if x0.len() != d || driver.path.dim() != d {
        return Err(Error::GridMismatch(format!(
            "dimension mismatch: coefficients {d}, x0 {}, driver {}",
            x0.len(),
            driver.path.dim()
        )));
    }
    let n = driver.path.n_intervals();
    let h = driver.path.step();
    let mut values = vec![0.0; (n + 1) * d];
    values[..d].copy_from_slice(x0);
    let mut bx = vec![0.0; d];
    let mut sx = vec![0.0; d * d];
    let mut state = x0.to_vec();
    for i in 0..n {
        c.drift_into(&state, &mut bx);
        c.diffusion_into(&state, &mut sx);
        let b_now = driver.path.value(i);
        let b_next = driver.path.value(i + 1);
        for r in 0..d {
            let mut noise = 0.0;
            for q in 0..d {
                noise += sx[r * d + q] * (b_next[q] - b_now[q]);
            }
            state[r] += bx[r] * h + noise;
            if !state[r].is_finite() {
                return Err(Error::BlowUp {
                    replica: driver.seed.replica,
                    step: i,
                });
            }
        }
        values[(i + 1) * d..(i + 2) * d].copy_from_slice(&state);
    }
    Ok(SolutionPath {
        path: GridFunction::new(0.0, driver.path.t_end(), d, values)?,
        driver: driver.clone(),
        scheme: Scheme::Euler,
        x0: x0.to_vec(),
    })
}

/// Picard iteration `X ← x0 + ∫ b(X) dt + ∫ σ(X) dB` with both running
/// integrals evaluated as trapezoid-compensated Riemann–Stieltjes sums (the
/// Young-integral cross-check route). Returns after `iters` sweeps;
/// consecutive sweeps moving apart twice in a row is diagnosed as
/// non-contraction.
pub fn young_picard_solve(
    c: &CoefficientSpec,
    x0: &[f64],
    driver: &FbmPath,
    iters: usize,
) -> Result<SolutionPath> {
    let d = c.dim;
    if x0.len() != d || driver.path.dim() != d {
        return Err(Error::GridMismatch("dimension mismatch".into()));
    }
    let n = driver.path.n_intervals();
    let h = driver.path.step();
    let mut current = vec![0.0; (n + 1) * d];
    for i in 0..=n {
        current[i * d..(i + 1) * d].copy_from_slice(x0);
    }
    let mut prev_dist = f64::INFINITY;
    let mut worse_streak = 0usize;
    let mut bv = vec![0.0; (n + 1) * d];
    let mut sv = vec![0.0; (n + 1) * d * d];
    for sweep in 0..iters {
        for i in 0..=n {
            let xi = current[i * d..(i + 1) * d].to_vec();
            c.drift_into(&xi, &mut bv[i * d..(i + 1) * d]);
            c.diffusion_into(&xi, &mut sv[i * d * d..(i + 1) * d * d]);
        }
        let mut next = vec![0.0; (n + 1) * d];
        next[..d].copy_from_slice(x0);
        for i in 0..n {
            let b_now = driver.path.value(i);
            let b_next = driver.path.value(i + 1);
            for r in 0..d {
                let drift_term = 0.5 * (bv[i * d + r] + bv[(i + 1) * d + r]) * h;
                let mut noise = 0.0;
                for q in 0..d {
                    let s_avg =
                        0.5 * (sv[i * d * d + r * d + q] + sv[(i + 1) * d * d + r * d + q]);
                    noise += s_avg * (b_next[q] - b_now[q]);
                }
                let v = next[i * d + r] + drift_term + noise;
                if !v.is_finite() {
                    return Err(Error::BlowUp {
                        replica: driver.seed.replica,
                        step: i,
                    });
                }
                next[(i + 1) * d + r] = v;
            }
        }
        let dist = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if dist > prev_dist {
            worse_streak += 1;
            if worse_streak >= 2 {
                return Err(Error::NonContraction { sweep });
            }
        } else {
            worse_streak = 0;
        }
        prev_dist = dist;
        current = next;
    }
    Ok(SolutionPath {
        path: GridFunction::new(0.0, driver.path.t_end(), d, current)?,
        driver: driver.clone(),
        scheme: Scheme::YoungPicard,
        x0: x0.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub sup_norm: f64,
    pub holder_seminorm: f64,
}

/// Sup norm and `beta`-Hölder seminorm of the solution path, `beta < H`.
pub fn path_statistics(x: &SolutionPath, beta: f64) -> Result<PathStats> {
    if !(beta > 0.0 && beta < x.driver.hurst.value()) {
        return Err(Error::invalid(format!(
            "beta {beta} not in (0, H = {})",
            x.driver.hurst.value()
        )));
    }
    Ok(PathStats {
        sup_norm: fraccalc::sup_norm(&x.path, None)?,
        holder_seminorm: fraccalc::holder_seminorm(&x.path, beta, None)?,
    })
}

/// Ratio `||X||_beta / (1 + |x0| + ||B||_beta^{1/beta})`; the bound shape is
/// proved for bounded diffusion, so the declaration is required.
pub fn pathwise_bound_check(c: &CoefficientSpec, x: &SolutionPath, beta: f64) -> Result<f64> {
    if c.sigma_sup_bound.is_none() {
        return Err(Error::invalid(
            "pathwise bound check needs a declared diffusion sup bound",
        ));
    }
    let xh = fraccalc::holder_seminorm(&x.path, beta, None)?;
    let bh = fraccalc::holder_seminorm(&x.driver.path, beta, None)?;
    Ok(xh / (1.0 + norm(&x.x0) + bh.powf(1.0 / beta)))
}

/// Configuration of an ensemble moment study.
#[derive(Clone)]
pub struct MomentStudyConfig {
    pub coefficients: CoefficientSpec,
    pub x0: Vec<f64>,
    pub hurst: HurstParam,
    pub beta: f64,
    pub p_list: Vec<f64>,
    /// `(c_exp, delta)` for `E exp(c ||X||_beta^delta)`; requires a declared
    /// diffusion sup bound.
    pub exp_params: Option<(f64, f64)>,
    pub n_replicas: usize,
    pub n_steps: usize,
    pub t_end: f64,
    pub seed: u64,
    pub generator: Generator,
}

struct ReplicaStats {
    holder: f64,
    terminal: f64,
    ratio: Option<f64>,
}

/// Monte Carlo estimates of `E ||X||_beta^p`, terminal moments `E |X(T)|^p`,
/// the optional exponential moment, and the pathwise bound ratio. Blown-up
/// replicas are counted and surfaced, never dropped silently.
pub fn moment_study(cfg: &MomentStudyConfig) -> Result<MonteCarloReport> {
    let c = &cfg.coefficients;
    c.validate_for(cfg.hurst)?;
    if !(cfg.beta > 0.0 && cfg.beta < cfg.hurst.value()) {
        return Err(Error::invalid(format!(
            "beta {} not in (0, H = {})",
            cfg.beta,
            cfg.hurst.value()
        )));
    }
    if let Some((_, delta)) = cfg.exp_params {
        if !(delta > 0.0 && delta < 2.0 * cfg.hurst.value()) {
            return Err(Error::invalid(format!(
                "exponential-moment exponent {delta} not in (0, 2H)"
            )));
        }
        if c.sigma_sup_bound.is_none() {
            return Err(Error::invalid(
                "exponential moment requires a bounded diffusion declaration",
            ));
        }
    }
    let kg = match cfg.generator {
        Generator::Kernel => Some(Arc::new(KernelGrid::build(
            cfg.n_steps,
            cfg.t_end,
            cfg.hurst,
        )?)),
        _ => None,
    };
    let chol = match cfg.generator {
        Generator::Cholesky => Some(Arc::new(fbm::CholeskyFbm::new(
            cfg.n_steps,
            cfg.t_end,
            cfg.hurst,
        )?)),
        _ => None,
    };
    let run_one = |r: u64| -> Result<ReplicaStats> {
        let seed = SeedRecord::new(cfg.seed, r);
        let driver = match cfg.generator {
            Generator::Cholesky => chol.as_ref().unwrap().sample(c.dim, seed)?,
            _ => fbm::sample_fbm(
                cfg.generator,
                cfg.n_steps,
                cfg.t_end,
                c.dim,
                cfg.hurst,
                seed,
                kg.as_ref(),
            )?,
        };
        let x = euler_solve(c, &cfg.x0, &driver)?;
        let holder = fraccalc::holder_seminorm(&x.path, cfg.beta, None)?;
        let terminal = x.path.value_norm(x.path.n_intervals());
        let ratio = if c.sigma_sup_bound.is_some() {
            Some(pathwise_bound_check(c, &x, cfg.beta)?)
        } else {
            None
        };
        Ok(ReplicaStats {
            holder,
            terminal,
            ratio,
        })
    };
    let results = map_replicas(cfg.n_replicas, run_one);

    let mut failures = FailureRecord::default();
    let mut ok = Vec::with_capacity(cfg.n_replicas);
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => ok.push(s),
            Err(_) => failures.record(r as u64),
        }
    }
    if ok.is_empty() {
        return Err(Error::numerical("every replica failed"));
    }

    let mut report = MonteCarloReport::new("moments", cfg.n_replicas, cfg.seed);
    report.failures = failures;
    for &p in &cfg.p_list {
        let hp: Vec<f64> = ok.iter().map(|s| s.holder.powf(p)).collect();
        let tp: Vec<f64> = ok.iter().map(|s| s.terminal.powf(p)).collect();
        report.insert_samples(format!("holder_norm_moment_p{p}"), &hp);
        report.insert_samples(format!("terminal_moment_p{p}"), &tp);
        report.diagnostics.insert(
            format!("half_sample_rel_change_p{p}"),
            stats::half_sample_rel_change(&hp, stats::mean),
        );
    }
    if let Some((c_exp, delta)) = cfg.exp_params {
        let ev: Vec<f64> = ok
            .iter()
            .map(|s| (c_exp * s.holder.powf(delta)).exp())
            .collect();
        report.insert_samples("exp_moment", &ev);
        report.diagnostics.insert(
            "exp_moment_half_sample_rel_change".into(),
            stats::half_sample_rel_change(&ev, stats::mean),
        );
    }
    if ok.iter().all(|s| s.ratio.is_some()) {
        let ratios: Vec<f64> = ok.iter().map(|s| s.ratio.unwrap()).collect();
        report.insert_samples("pathwise_ratio", &ratios);
        let max_full = ratios.iter().cloned().fold(0.0f64, f64::max);
        let max_half = ratios[..ratios.len() / 2]
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        report
            .diagnostics
            .insert("pathwise_ratio_max".into(), max_full);
        report
            .diagnostics
            .insert("pathwise_ratio_max_first_half".into(), max_half);
    }
    Ok(report)
}
