//! Seeded sampling of Brownian and fractional Brownian paths.
//!
//! Three fBm generators share one finite-dimensional law:
//!
//! * `kernel` — discretized Volterra representation `B_t = ∫ K(t,s) dW_s`
//!   against a prebuilt [`KernelGrid`]; keeps the driving Wiener path, which
//!   the Girsanov and one-step-Gaussian machinery require.
//! * `cholesky` — exact factorization of the covariance matrix; `O(n^3)`
//!   setup, for moderate grids and as the distributional reference.
//! * `circulant` — Davies–Harte circulant embedding of the stationary
//!   increment covariance; `O(n log n)`, the bulk-ensemble path.
//!
//! Vector-valued paths are `d` independent scalar paths drawn sequentially
//! from the replica's stream.

use crate::ensemble::SeedRecord;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::volterra::{HurstParam, KernelGrid};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub path: GridFunction,
    pub seed: SeedRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Kernel,
    Cholesky,
    Circulant,
}

#[derive(Debug, Clone)]
pub struct FbmPath {
    pub path: GridFunction,
    pub hurst: HurstParam,
    pub generator: Generator,
    pub seed: SeedRecord,
    /// Driving Wiener path (kernel generator only).
    pub wiener: Option<GridFunction>,
    /// Kernel grid the path was synthesized from (kernel generator only).
    pub kernel: Option<Arc<KernelGrid>>,
}

/// Standard Wiener path: i.i.d. `N(0, T/n)` increments per component.
pub fn sample_bm(n: usize, t_end: f64, dim: usize, seed: SeedRecord) -> Result<BrownianPath> {
    if n == 0 {
        return Err(Error::invalid("need at least one increment"));
    }
    if !(t_end > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let mut rng = seed.rng();
    let sqrt_h = (t_end / n as f64).sqrt();
    let mut values = vec![0.0; (n + 1) * dim];
    for c in 0..dim {
        let mut acc = 0.0;
        for i in 1..=n {
            let z: f64 = rng.sample(StandardNormal);
            acc += sqrt_h * z;
            values[i * dim + c] = acc;
        }
    }
    Ok(BrownianPath {
        path: GridFunction::new(0.0, t_end, dim, values)?,
        seed,
    })
}

/// Volterra synthesis `B(t_i) = Σ_j w[i][j] ΔW_j / h`, the exact
/// discretization of the kernel representation on the grid.
pub fn fbm_from_kernel(w: &BrownianPath, kg: &Arc<KernelGrid>) -> Result<FbmPath> {
    if !kg.grid_matches(&w.path) {
        return Err(Error::GridMismatch("wiener path vs kernel grid".into()));
    }
    let n = kg.n_intervals();
    let h = kg.step();
    let dim = w.path.dim();
    let mut values = vec![0.0; (n + 1) * dim];
    for c in 0..dim {
        let dw: Vec<f64> = (0..n)
            .map(|j| (w.path.value(j + 1)[c] - w.path.value(j)[c]) / h)
            .collect();
        for i in 1..=n {
            let row = kg.row_cells(i);
            let mut acc = 0.0;
            for (j, wt) in row.iter().enumerate() {
                acc += wt * dw[j];
            }
            values[i * dim + c] = acc;
        }
    }
    Ok(FbmPath {
        path: GridFunction::new(0.0, kg.t_end(), dim, values)?,
        hurst: kg.hurst(),
        generator: Generator::Kernel,
        seed: w.seed,
        wiener: Some(w.path.clone()),
        kernel: Some(kg.clone()),
    })
}

/// Prefactorized covariance for repeated Cholesky sampling: the `O(n^3)`
/// factorization runs once, each replica costs one `O(n^2)` multiply.
#[derive(Debug, Clone)]
pub struct CholeskyFbm {
    n: usize,
    t_end: f64,
    hurst: HurstParam,
    factor: nalgebra::DMatrix<f64>,
}

impl CholeskyFbm {
    pub fn new(n: usize, t_end: f64, hurst: HurstParam) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("need at least one interval"));
        }
        let h = t_end / n as f64;
        let two_h = 2.0 * hurst.value();
        let cov = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let (t, s) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
            0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
        });
        let chol = cov.cholesky().ok_or_else(|| {
            Error::numerical(format!(
                "fBm covariance matrix not numerically positive definite (n={n}, H={})",
                hurst.value()
            ))
        })?;
        Ok(CholeskyFbm {
            n,
            t_end,
            hurst,
            factor: chol.unpack(),
        })
    }

    pub fn sample(&self, dim: usize, seed: SeedRecord) -> Result<FbmPath> {
        let n = self.n;
        let mut rng = seed.rng();
        let mut values = vec![0.0; (n + 1) * dim];
        for c in 0..dim {
            let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.factor * z;
            for i in 1..=n {
                values[i * dim + c] = x[i - 1];
            }
        }
        Ok(FbmPath {
            path: GridFunction::new(0.0, self.t_end, dim, values)?,
            hurst: self.hurst,
            generator: Generator::Cholesky,
            seed,
            wiener: None,
            kernel: None,
        })
    }
}

/// Exact finite-dimensional sampling through the Cholesky factor of the
/// covariance matrix. Dense `n x n`; meant for moderate grids. Ensembles
/// should build one [`CholeskyFbm`] and sample from it.
pub fn fbm_cholesky(
    n: usize,
    t_end: f64,
    dim: usize,
    hurst: HurstParam,
    seed: SeedRecord,
) -> Result<FbmPath> {
    CholeskyFbm::new(n, t_end, hurst)?.sample(dim, seed)
}

/// Unit-spacing fractional Gaussian noise autocovariance at lag `k`.
fn fgn_autocov(k: usize, two_h: f64) -> f64 {
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Davies–Harte circulant-embedding sampler.
///
/// Grids whose size is not a power of two are padded up internally and the
/// stationary increments truncated, which leaves the law unchanged.
pub fn fbm_circulant(
    n: usize,
    t_end: f64,
    dim: usize,
    hurst: HurstParam,
    seed: SeedRecord,
) -> Result<FbmPath> {
    if n < 1 {
        return Err(Error::invalid("need at least one interval"));
    }
    let m = n.next_power_of_two();
    let two_h = 2.0 * hurst.value();
    let dt = t_end / n as f64;
    let scale = dt.powf(hurst.value());

    // First row of the 2m circulant embedding of the increment covariance.
    let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); 2 * m];
    for k in 0..=m {
        row[k].re = fgn_autocov(k, two_h);
    }
    for k in 1..m {
        row[2 * m - k].re = row[k].re;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(2 * m);
    fft.process(&mut row);
    let eigs: Vec<f64> = row.iter().map(|z| z.re).collect();
    let max_eig = eigs.iter().cloned().fold(0.0f64, f64::max);
    if eigs.iter().any(|&e| e < -1e-8 * max_eig) {
        return Err(Error::numerical(format!(
            "circulant embedding not nonnegative definite (n={n}, H={})",
            hurst.value()
        )));
    }

    let mut rng = seed.rng();
    let mut values = vec![0.0; (n + 1) * dim];
    for c in 0..dim {
        let mut w: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); 2 * m];
        let v0: f64 = rng.sample(StandardNormal);
        w[0] = Complex::new((eigs[0].max(0.0) / (2.0 * m as f64)).sqrt() * v0, 0.0);
        for k in 1..m {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let r = (eigs[k].max(0.0) / (4.0 * m as f64)).sqrt();
            w[k] = Complex::new(r * a, r * b);
            w[2 * m - k] = w[k].conj();
        }
        let vm: f64 = rng.sample(StandardNormal);
        w[m] = Complex::new((eigs[m].max(0.0) / (2.0 * m as f64)).sqrt() * vm, 0.0);

        let fft2 = planner.plan_fft_forward(2 * m);
        fft2.process(&mut w);
        let mut acc = 0.0;
        for i in 1..=n {
            acc += scale * w[i - 1].re;
            values[i * dim + c] = acc;
        }
    }
    Ok(FbmPath {
        path: GridFunction::new(0.0, t_end, dim, values)?,
        hurst,
        generator: Generator::Circulant,
        seed,
        wiener: None,
        kernel: None,
    })
}

/// Unified entry point used by the studies and the CLI. The kernel generator
/// needs a prebuilt grid.
pub fn sample_fbm(
    generator: Generator,
    n: usize,
    t_end: f64,
    dim: usize,
    hurst: HurstParam,
    seed: SeedRecord,
    kg: Option<&Arc<KernelGrid>>,
) -> Result<FbmPath> {
    match generator {
        Generator::Kernel => {
            let kg = kg.ok_or_else(|| {
                Error::invalid("kernel generator requires a prebuilt kernel grid")
            })?;
            let w = sample_bm(n, t_end, dim, seed)?;
            fbm_from_kernel(&w, kg)
        }
        Generator::Cholesky => fbm_cholesky(n, t_end, dim, hurst, seed),
        Generator::Circulant => fbm_circulant(n, t_end, dim, hurst, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::map_replicas;
    use crate::fraccalc;
    use crate::stats;
    use crate::volterra::fbm_covariance;

    fn h75() -> HurstParam {
        HurstParam::new(0.75).unwrap()
    }

    #[test]
    fn same_seed_reproduces_paths_bitwise() {
        let seed = SeedRecord::new(11, 3);
        let a = sample_bm(64, 1.0, 2, seed).unwrap();
        let b = sample_bm(64, 1.0, 2, seed).unwrap();
        assert_eq!(a.path, b.path);
        let c1 = fbm_circulant(100, 1.0, 1, h75(), seed).unwrap();
        let c2 = fbm_circulant(100, 1.0, 1, h75(), seed).unwrap();
        assert_eq!(c1.path, c2.path);
        let ch1 = fbm_cholesky(32, 1.0, 1, h75(), seed).unwrap();
        let ch2 = fbm_cholesky(32, 1.0, 1, h75(), seed).unwrap();
        assert_eq!(ch1.path, ch2.path);
    }

    #[test]
    fn single_increment_is_plain_gaussian() {
        let w = sample_bm(1, 2.0, 1, SeedRecord::new(5, 0)).unwrap();
        assert_eq!(w.path.scalar(0), 0.0);
        assert!(w.path.scalar(1).is_finite());
        assert_eq!(w.path.len(), 2);
    }

    #[test]
    fn wiener_terminal_variance() {
        let n_rep = 4000;
        let t = 2.0;
        let ends: Vec<f64> = map_replicas(n_rep, |r| {
            sample_bm(16, t, 1, SeedRecord::new(99, r))
                .unwrap()
                .path
                .scalar(16)
        });
        let v = stats::variance(&ends);
        // sampling error of a variance estimate: SE ≈ var * sqrt(2/(N-1))
        let se = t * (2.0 / (n_rep as f64 - 1.0)).sqrt();
        assert!((v - t).abs() <= 3.0 * se, "var {v} vs {t} (se {se})");
    }

    #[test]
    fn kernel_generator_zero_in_zero_out() {
        let kg = Arc::new(KernelGrid::build(32, 1.0, h75()).unwrap());
        let w = BrownianPath {
            path: GridFunction::zeros(0.0, 1.0, 1, 32).unwrap(),
            seed: SeedRecord::new(0, 0),
        };
        let b = fbm_from_kernel(&w, &kg).unwrap();
        assert!(b.path.values().iter().all(|v| *v == 0.0));
        assert!(b.wiener.is_some());
    }

    #[test]
    fn kernel_generator_matches_covariance() {
        let n = 128;
        let n_rep = 4000usize;
        let h = h75();
        let kg = Arc::new(KernelGrid::build(n, 1.0, h).unwrap());
        let idx = [n / 4, n / 2, n];
        let samples: Vec<Vec<f64>> = map_replicas(n_rep, |r| {
            let w = sample_bm(n, 1.0, 1, SeedRecord::new(2024, r)).unwrap();
            let b = fbm_from_kernel(&w, &kg).unwrap();
            idx.iter().map(|&i| b.path.scalar(i)).collect()
        });
        for (a, &ia) in idx.iter().enumerate() {
            for (b_, &ib) in idx.iter().enumerate().skip(a) {
                let prods: Vec<f64> =
                    samples.iter().map(|s| s[a] * s[b_]).collect();
                let est = stats::mean(&prods);
                let se = stats::standard_error(&prods);
                let t = (ia as f64) / n as f64;
                let s = (ib as f64) / n as f64;
                let exact = fbm_covariance(t, s, h).unwrap();
                assert!(
                    (est - exact).abs() <= 3.0 * se,
                    "cov({t},{s}): {est} vs {exact} (se {se})"
                );
            }
        }
    }

    #[test]
    fn increment_second_moment_scales_like_power_law() {
        // E|B_t - B_s|^2 = |t-s|^{2H}
        let n = 64;
        let h = h75();
        let n_rep = 4000;
        let diffs: Vec<f64> = map_replicas(n_rep, |r| {
            let b = fbm_circulant(n, 1.0, 1, h, SeedRecord::new(7, r)).unwrap();
            let d = b.path.scalar(48) - b.path.scalar(16);
            d * d
        });
        let est = stats::mean(&diffs);
        let se = stats::standard_error(&diffs);
        let exact = 0.5f64.powf(1.5);
        assert!((est - exact).abs() <= 3.0 * se, "{est} vs {exact}");
    }

    #[test]
    fn cholesky_marginal_variance_is_one() {
        let n_rep = 4000;
        let chol = CholeskyFbm::new(32, 1.0, h75()).unwrap();
        let ends: Vec<f64> = map_replicas(n_rep, |r| {
            chol.sample(1, SeedRecord::new(31, r)).unwrap().path.scalar(32)
        });
        let v = stats::variance(&ends);
        let se = (2.0 / (n_rep as f64 - 1.0)).sqrt();
        assert!((v - 1.0).abs() <= 3.0 * se, "{v}");
    }

    #[test]
    fn cholesky_and_kernel_terminal_laws_agree() {
        let n = 128;
        let h = h75();
        let n_rep = 4000usize;
        let kg = Arc::new(KernelGrid::build(n, 1.0, h).unwrap());
        let a: Vec<f64> = map_replicas(n_rep, |r| {
            let w = sample_bm(n, 1.0, 1, SeedRecord::new(555, r)).unwrap();
            fbm_from_kernel(&w, &kg).unwrap().path.scalar(n)
        });
        let chol = CholeskyFbm::new(n, 1.0, h).unwrap();
        let b: Vec<f64> = map_replicas(n_rep, |r| {
            chol.sample(1, SeedRecord::new(556, r)).unwrap().path.scalar(n)
        });
        let d = stats::ks_distance(&a, &b).unwrap();
        let crit = stats::ks_critical(0.01, n_rep, n_rep);
        assert!(d < crit, "KS {d} >= {crit}");
    }

    #[test]
    fn circulant_increment_autocovariance() {
        let n = 256;
        let h = HurstParam::new(0.7).unwrap();
        let dt = 1.0 / n as f64;
        let n_rep = 4000;
        let lag_samples: Vec<Vec<f64>> = map_replicas(n_rep, |r| {
            let b = fbm_circulant(n, 1.0, 1, h, SeedRecord::new(17, r)).unwrap();
            let inc = |i: usize| b.path.scalar(i + 1) - b.path.scalar(i);
            (0..3).map(|k| inc(10) * inc(10 + k)).collect()
        });
        for k in 0..3usize {
            let prods: Vec<f64> = lag_samples.iter().map(|s| s[k]).collect();
            let est = stats::mean(&prods);
            let se = stats::standard_error(&prods);
            let exact = fgn_autocov(k, 1.4) * dt.powf(1.4);
            assert!(
                (est - exact).abs() <= 3.0 * se,
                "lag {k}: {est} vs {exact} (se {se})"
            );
        }
    }

    #[test]
    fn circulant_pads_awkward_sizes() {
        let b = fbm_circulant(100, 2.0, 3, h75(), SeedRecord::new(1, 0)).unwrap();
        assert_eq!(b.path.len(), 101);
        assert_eq!(b.path.dim(), 3);
        assert_eq!(b.path.value(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn holder_regularity_tracks_hurst_exponent() {
        // beta < H: seminorm distribution stable under refinement;
        // beta > H: it grows without bound.
        let h = h75();
        let stat = |n: usize, beta: f64| -> f64 {
            let vals: Vec<f64> = map_replicas(300, |r| {
                let b = fbm_circulant(n, 1.0, 1, h, SeedRecord::new(404, r)).unwrap();
                fraccalc::holder_seminorm(&b.path, beta, None).unwrap()
            });
            stats::median(&vals)
        };
        let below_a = stat(128, 0.6);
        let below_b = stat(256, 0.6);
        assert!(
            (below_b / below_a - 1.0).abs() < 0.10,
            "beta<H medians {below_a} vs {below_b}"
        );
        let above_a = stat(128, 0.9);
        let above_b = stat(256, 0.9);
        assert!(
            above_b > above_a * 1.05,
            "beta>H medians should grow: {above_a} vs {above_b}"
        );
    }

    #[test]
    fn exponential_moment_of_squared_seminorm_is_stable() {
        let h = h75();
        let vals: Vec<f64> = map_replicas(400, |r| {
            let b = fbm_circulant(128, 1.0, 1, h, SeedRecord::new(808, r)).unwrap();
            fraccalc::holder_seminorm(&b.path, 0.6, None).unwrap()
        });
        let med = stats::median(&vals);
        let eta = 0.1 / (med * med);
        let exps: Vec<f64> = vals.iter().map(|v| (eta * v * v).exp()).collect();
        let full = stats::mean(&exps);
        let rel = stats::half_sample_rel_change(&exps, stats::mean);
        assert!(full.is_finite());
        assert!(rel < 0.10, "exp moment unstable: {rel}");
    }
}
