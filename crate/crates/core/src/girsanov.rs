//! Change-of-measure machinery: the inverse-kernel integrand of a
//! time-integrated drift functional, the Radon–Nikodym weight process, and
//! the martingale / measure-change / exponential-energy diagnostics.
//!
//! All weight arithmetic happens in log space; the weight path is
//! exponentiated at readout, so it is positive by construction.

use crate::ensemble::{map_replicas, SeedRecord};
use crate::error::{Error, Result};
use crate::fbm::{self, Generator};
use crate::grid::GridFunction;
use crate::library::DriftFunctional;
use crate::report::{FailureRecord, MonteCarloReport};
use crate::sde::{euler_solve, CoefficientSpec, SolutionPath};
use crate::stats;
use crate::volterra::{self, HurstParam, KernelGrid};
use statrs::function::gamma::{gamma, ln_gamma};
use std::sync::Arc;

/// Radon–Nikodym weight path together with the integrand that generated it.
///
/// `integrand` holds `u(s) = K_H^{-1}(∫_0^· h(X_r) dr)(s)` with the origin
/// slot flagged 0; `energy` is the discrete `∫_0^T |u|^2 ds` actually used in
/// the exponent (first cell modeled by its adapted power average).
#[derive(Debug, Clone)]
pub struct WeightPath {
    pub r: GridFunction,
    pub log_r: GridFunction,
    pub integrand: GridFunction,
    pub energy: f64,
}

/// `K_H^{-1}(∫_0^· f(X_r) dr)(s)` assembled from its three-part split: the
/// local term `s^{-κ} f(X_s)/κ`, the constant tail term `-C_0 s^{-κ} f(X_s)`
/// from the power-weight integral, and the increment integral
/// `s^{κ} ∫_0^s (f(X_s) - f(X_r)) (s-r)^{-1/2-H} r^{1/2-H} dr`.
///
/// The increment integral is evaluated per cell with the `(s-r)` power
/// integrated exactly against linear-in-`r` data; the `r^{-κ}` weight is
/// frozen at cell midpoints away from the origin and integrated exactly on
/// the origin cell. The output's origin slot is flagged 0.
pub fn kh_inverse_decomposed(
    x_path: &GridFunction,
    h: &DriftFunctional,
    hurst: HurstParam,
) -> Result<GridFunction> {
    let (u, _) = decomposed_with_increment_term(x_path, h, hurst)?;
    Ok(u)
}

/// The increment-integral part alone (the `I_3` shape probe needs it).
pub fn increment_term(
    x_path: &GridFunction,
    h: &DriftFunctional,
    hurst: HurstParam,
) -> Result<GridFunction> {
    let (_, i3) = decomposed_with_increment_term(x_path, h, hurst)?;
    Ok(i3)
}

fn decomposed_with_increment_term(
    x_path: &GridFunction,
    h: &DriftFunctional,
    hurst: HurstParam,
) -> Result<(GridFunction, GridFunction)> {
    let d = x_path.dim();
    if h.dim != d {
        return Err(Error::GridMismatch(format!(
            "functional dimension {} vs path dimension {d}",
            h.dim
        )));
    }
    let n = x_path.n_intervals();
    if n < 2 {
        return Err(Error::invalid("need at least 2 intervals"));
    }
    let step = x_path.step();
    let k = hurst.kappa();

    // f_i = h(X(t_i))
    let mut f = vec![0.0; (n + 1) * d];
    let mut buf = vec![0.0; d];
    for i in 0..=n {
        h.eval_into(x_path.value(i), &mut buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "drift functional non-finite at grid state {i}"
            )));
        }
        f[i * d..(i + 1) * d].copy_from_slice(&buf);
    }

    let c0 = volterra::c0_constant(hurst)?;
    let pref = (1.0 / volterra::rho(hurst)) * k / gamma(1.0 - k);
    let local_coef = 1.0 / k - c0;
    // Beta(1-κ, 1-κ) for the single-cell increment integral at i = 1.
    let beta_kk = (2.0 * ln_gamma(1.0 - k) - ln_gamma(2.0 - 2.0 * k)).exp();

    // power tables on lag multiples of the grid step
    let pm: Vec<f64> = (0..=n)
        .map(|q| if q == 0 { 0.0 } else { (q as f64 * step).powf(-k) })
        .collect();
    let pq: Vec<f64> = (0..=n).map(|q| (q as f64 * step).powf(1.0 - k)).collect();
    let mid: Vec<f64> = (0..n)
        .map(|j| ((j as f64 + 0.5) * step).powf(-k))
        .collect();

    let mut u = GridFunction::zeros(x_path.t_start(), x_path.t_end(), d, n)?;
    let mut i3_out = GridFunction::zeros(x_path.t_start(), x_path.t_end(), d, n)?;
    for c in 0..d {
        let fv: Vec<f64> = (0..=n).map(|i| f[i * d + c]).collect();
        let slopes: Vec<f64> = (0..n).map(|j| (fv[j + 1] - fv[j]) / step).collect();
        for i in 1..=n {
            let s = i as f64 * step;
            let fi = fv[i];
            // increment integral J(s_i)
            let j_val = if i == 1 {
                slopes[0] * step.powf(1.0 - 2.0 * k) * beta_kk
            } else {
                let mut acc = 0.0;
                // origin cell: freeze the (s-r) factor at the cell midpoint,
                // integrate r^{-κ} exactly
                {
                    let w_mid = s - 0.5 * step;
                    let f_mid = 0.5 * (fv[0] + fv[1]);
                    acc += (fi - f_mid) * w_mid.powf(-1.0 - k) * pq[1] / (1.0 - k);
                }
                for j in 1..i {
                    let m = slopes[j];
                    let a = fi - fv[j] - m * ((i - j) as f64 * step);
                    let (l1, l2) = (i - j - 1, i - j);
                    if l1 == 0 {
                        // diagonal cell: the coefficient of the divergent
                        // piece vanishes identically for linear data
                        acc += m * pq[1] / (1.0 - k) * mid[j];
                    } else {
                        acc += (a * (pm[l1] - pm[l2]) / k
                            + m * (pq[l2] - pq[l1]) / (1.0 - k))
                            * mid[j];
                    }
                }
                acc
            };
            let i3 = s.powf(k) * j_val;
            i3_out.value_mut(i)[c] = i3;
            u.value_mut(i)[c] = pref * (local_coef * s.powf(-k) * fi + i3);
        }
    }
    Ok((u, i3_out))
}

/// Adapted first-cell average of the integrand: the local terms with the
/// functional frozen at the (deterministic) initial state, averaged over the
/// cell in the `s^{-κ}` model.
fn origin_cell_integrand(
    x0_state: &[f64],
    h: &DriftFunctional,
    hurst: HurstParam,
    step: f64,
) -> Result<Vec<f64>> {
    let k = hurst.kappa();
    let c0 = volterra::c0_constant(hurst)?;
    let pref = (1.0 / volterra::rho(hurst)) * k / gamma(1.0 - k);
    let mut f0 = vec![0.0; h.dim];
    h.eval_into(x0_state, &mut f0);
    let coef = pref * (1.0 / k - c0) * step.powf(-k) / (1.0 - k);
    Ok(f0.into_iter().map(|v| coef * v).collect())
}

/// Radon–Nikodym weight of the drift-functional change of measure along one
/// solution path. Requires the kernel generator (the driving Wiener path
/// must be available).
pub fn radon_nikodym(x: &SolutionPath, h: &DriftFunctional) -> Result<WeightPath> {
    let wiener = match (&x.driver.generator, &x.driver.wiener) {
        (Generator::Kernel, Some(w)) => w,
        _ => {
            return Err(Error::invalid(
                "change of measure needs a kernel-generated driver (Wiener path unavailable)",
            ))
        }
    };
    let hurst = x.driver.hurst;
    let d = x.path.dim();
    let n = x.path.n_intervals();
    let step = x.path.step();
    let u = kh_inverse_decomposed(&x.path, h, hurst)?;

    let u0 = origin_cell_integrand(&x.x0, h, hurst, step)?;
    let mut log_r = vec![0.0; n + 1];
    let mut energy = 0.0;
    for i in 0..n {
        let u_cell: &[f64] = if i == 0 { &u0 } else { u.value(i) };
        let mut dot = 0.0;
        let mut sq = 0.0;
        for c in 0..d {
            let dw = wiener.value(i + 1)[c] - wiener.value(i)[c];
            dot += u_cell[c] * dw;
            sq += u_cell[c] * u_cell[c];
        }
        log_r[i + 1] = log_r[i] + dot - 0.5 * sq * step;
        energy += sq * step;
    }
    let r_vals: Vec<f64> = log_r.iter().map(|l| l.exp()).collect();
    if r_vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("weight overflow at readout"));
    }
    Ok(WeightPath {
        r: GridFunction::from_scalar(0.0, x.path.t_end(), r_vals)?,
        log_r: GridFunction::from_scalar(0.0, x.path.t_end(), log_r)?,
        integrand: u,
        energy,
    })
}

/// Discrete counterpart of the closed-form integrand energy for a constant
/// functional `h ≡ mu` (per component): what `radon_nikodym` accumulates when
/// `f` is constant along the path.
pub fn constant_functional_energy(
    mu: &[f64],
    hurst: HurstParam,
    n: usize,
    t_end: f64,
) -> Result<f64> {
    let k = hurst.kappa();
    let c0 = volterra::c0_constant(hurst)?;
    let pref = (1.0 / volterra::rho(hurst)) * k / gamma(1.0 - k);
    let coef = pref * (1.0 / k - c0);
    let step = t_end / n as f64;
    let mu_sq: f64 = mu.iter().map(|v| v * v).sum();
    let mut energy = (coef * step.powf(-k) / (1.0 - k)).powi(2) * mu_sq * step;
    for i in 1..n {
        let s = i as f64 * step;
        energy += (coef * s.powf(-k)).powi(2) * mu_sq * step;
    }
    Ok(energy)
}

/// Continuum closed form of the same energy:
/// `|mu|^2 (ρ^{-1} Γ(3/2-H)/Γ(2-2H))^2 T^{2-2H} / (2-2H)`.
pub fn constant_functional_energy_limit(mu: &[f64], hurst: HurstParam, t_end: f64) -> f64 {
    let hv = hurst.value();
    let c = gamma(1.5 - hv) / gamma(2.0 - 2.0 * hv) / volterra::rho(hurst);
    let mu_sq: f64 = mu.iter().map(|v| v * v).sum();
    mu_sq * c * c * t_end.powf(2.0 - 2.0 * hv) / (2.0 - 2.0 * hv)
}

/// Shared configuration of the Girsanov ensemble checks.
#[derive(Clone)]
pub struct GirsanovConfig {
    pub coefficients: CoefficientSpec,
    pub h: DriftFunctional,
    pub hurst: HurstParam,
    pub x0: Vec<f64>,
    pub n_replicas: usize,
    pub n_steps: usize,
    pub t_end: f64,
    pub seed: u64,
}

impl GirsanovConfig {
    fn validate(&self) -> Result<()> {
        self.coefficients.validate_for(self.hurst)?;
        if !self.h.lambda_admissible(self.hurst) {
            return Err(Error::invalid(format!(
                "functional increment order {} outside (1 - 1/(2H), 1]",
                self.h.lambda
            )));
        }
        if self.h.dim != self.coefficients.dim || self.x0.len() != self.coefficients.dim {
            return Err(Error::GridMismatch("dimension mismatch in config".into()));
        }
        Ok(())
    }

    fn kernel_grid(&self) -> Result<Arc<KernelGrid>> {
        Ok(Arc::new(KernelGrid::build(
            self.n_steps,
            self.t_end,
            self.hurst,
        )?))
    }

    fn solve_replica(&self, kg: &Arc<KernelGrid>, r: u64) -> Result<(SolutionPath, WeightPath)> {
        let seed = SeedRecord::new(self.seed, r);
        let w = fbm::sample_bm(self.n_steps, self.t_end, self.coefficients.dim, seed)?;
        let b = fbm::fbm_from_kernel(&w, kg)?;
        let x = euler_solve(&self.coefficients, &self.x0, &b)?;
        let wt = radon_nikodym(&x, &self.h)?;
        Ok((x, wt))
    }
}

/// Estimates `E R_T` and `E R_T log R_T`; flags a martingale-property
/// violation when `E R_T` sits more than three standard errors from 1.
pub fn martingale_check(cfg: &GirsanovConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let kg = cfg.kernel_grid()?;
    let results = map_replicas(cfg.n_replicas, |r| {
        cfg.solve_replica(&kg, r).map(|(_, wt)| {
            let n = wt.r.n_intervals();
            let r_t = wt.r.scalar(n);
            (r_t, r_t * wt.log_r.scalar(n))
        })
    });
    let mut failures = FailureRecord::default();
    let mut r_samples = Vec::new();
    let mut rlogr = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok((a, b)) => {
                r_samples.push(a);
                rlogr.push(b);
            }
            Err(_) => failures.record(i as u64),
        }
    }
    if r_samples.is_empty() {
        return Err(Error::numerical("every replica failed"));
    }
    let mut report = MonteCarloReport::new("martingale_check", cfg.n_replicas, cfg.seed);
    report.failures = failures;
    report.insert_samples("E_R_T", &r_samples);
    report.insert_samples("E_RlogR_T", &rlogr);
    let dev = report.estimates["E_R_T"].sigmas_from(1.0);
    report
        .diagnostics
        .insert("martingale_deviation_sigmas".into(), dev);
    let (worst, _) = cfg.h.certify(cfg.seed, 500, 2.0);
    report
        .diagnostics
        .insert("h_shape_worst_ratio".into(), worst);
    Ok(report)
}

/// Reweighted law check: under the weighted measure the compensated path
/// `B̃ = B^H - ∫ h(X) ds` should again be a fractional Brownian motion.
/// Reports weighted means at a four-point time grid and the weighted second
/// moment at `(T/2, T)`, with deviations from `0` and `R_H` in SE units.
pub fn measure_change_check(cfg: &GirsanovConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let kg = cfg.kernel_grid()?;
    let n = cfg.n_steps;
    let d = cfg.coefficients.dim;
    let quarters = [n / 4, n / 2, 3 * n / 4, n];
    let results = map_replicas(cfg.n_replicas, |r| {
        cfg.solve_replica(&kg, r).map(|(x, wt)| {
            let r_t = wt.r.scalar(n);
            // B̃ at the probe times: trapezoid for ∫_0^t h(X) ds
            let step = x.path.step();
            let mut hv = vec![0.0; (n + 1) * d];
            let mut buf = vec![0.0; d];
            for i in 0..=n {
                cfg.h.eval_into(x.path.value(i), &mut buf);
                hv[i * d..(i + 1) * d].copy_from_slice(&buf);
            }
            let mut btilde = vec![0.0; quarters.len() * d];
            for (q, &iq) in quarters.iter().enumerate() {
                for c in 0..d {
                    let mut integral = 0.0;
                    for i in 0..iq {
                        integral += 0.5 * (hv[i * d + c] + hv[(i + 1) * d + c]) * step;
                    }
                    btilde[q * d + c] = x.driver.path.value(iq)[c] - integral;
                }
            }
            (r_t, btilde)
        })
    });
    let mut failures = FailureRecord::default();
    let mut ok = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(_) => failures.record(i as u64),
        }
    }
    if ok.is_empty() {
        return Err(Error::numerical("every replica failed"));
    }
    let mut report = MonteCarloReport::new("measure_change_check", cfg.n_replicas, cfg.seed);
    report.failures = failures;
    let times: Vec<f64> = quarters
        .iter()
        .map(|&iq| iq as f64 * cfg.t_end / n as f64)
        .collect();
    for (q, &t) in times.iter().enumerate() {
        for c in 0..d {
            let samples: Vec<f64> = ok.iter().map(|(r, b)| r * b[q * d + c]).collect();
            let key = format!("weighted_mean_t{t}_c{c}");
            report.insert_samples(&key, &samples);
            let dev = report.estimates[&key].sigmas_from(0.0);
            report
                .diagnostics
                .insert(format!("mean_dev_sigmas_t{t}_c{c}"), dev);
        }
    }
    // weighted second moment at (T/2, T) per component vs R_H
    let exact = volterra::fbm_covariance(times[1], times[3], cfg.hurst)?;
    for c in 0..d {
        let samples: Vec<f64> = ok
            .iter()
            .map(|(r, b)| r * b[d + c] * b[3 * d + c])
            .collect();
        let key = format!("weighted_cov_halfT_T_c{c}");
        report.insert_samples(&key, &samples);
        let dev = report.estimates[&key].sigmas_from(exact);
        report
            .diagnostics
            .insert(format!("cov_dev_sigmas_c{c}"), dev);
    }
    report
        .diagnostics
        .insert("cov_target".into(), exact);
    Ok(report)
}

/// Estimates `E exp(c_exp ∫ |u|^2 ds)` with a half-sample stability
/// diagnostic; the finiteness proxy for the exponential-energy claim.
pub fn exp_energy_check(cfg: &GirsanovConfig, c_exp: f64) -> Result<MonteCarloReport> {
    cfg.validate()?;
    if cfg.coefficients.sigma_sup_bound.is_none() {
        return Err(Error::invalid(
            "exponential-energy check requires bounded diffusion",
        ));
    }
    let q_cap = cfg.hurst.value() + 0.5 / cfg.hurst.value() - 1.0;
    if cfg.h.growth_p >= q_cap {
        return Err(Error::invalid(format!(
            "functional growth exponent {} must be below H + 1/(2H) - 1 = {q_cap}",
            cfg.h.growth_p
        )));
    }
    let kg = cfg.kernel_grid()?;
    let results = map_replicas(cfg.n_replicas, |r| {
        cfg.solve_replica(&kg, r)
            .map(|(_, wt)| (c_exp * wt.energy).exp())
    });
    let mut failures = FailureRecord::default();
    let mut ok = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(_) => failures.record(i as u64),
        }
    }
    if ok.is_empty() {
        return Err(Error::numerical("every replica failed"));
    }
    let mut report = MonteCarloReport::new("exp_energy_check", cfg.n_replicas, cfg.seed);
    report.failures = failures;
    report.insert_samples("exp_energy", &ok);
    report.diagnostics.insert(
        "half_sample_rel_change".into(),
        stats::half_sample_rel_change(&ok, stats::mean),
    );
    Ok(report)
}
