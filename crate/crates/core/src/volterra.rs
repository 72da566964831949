//! The square-integrable Volterra kernel of fractional Brownian motion with
//! `H > 1/2`, the operators built from it, and the fBm covariance.
//!
//! The kernel is normalized so that `∫_0^{t∧s} K(t,r) K(s,r) dr = R_H(t,s)`
//! holds exactly for the standard covariance `R_H`; the normalizing constant
//! is `c_H = sqrt(H(2H-1) / B(2-2H, H-1/2))`.
//!
//! Every integral with a power endpoint singularity is computed through the
//! substitution transforms in [`crate::quad`], which realize a graded mesh
//! around the singular endpoint analytically.

use crate::error::{Error, Result};
use crate::fraccalc;
use crate::grid::GridFunction;
use crate::quad;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Hurst parameter restricted to the long-memory regime `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(Error::invalid(format!("Hurst parameter {h} not in (1/2, 1)")));
        }
        Ok(HurstParam(h))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `kappa = H - 1/2`, the kernel's power exponent.
    pub fn kappa(&self) -> f64 {
        self.0 - 0.5
    }
}

/// fBm covariance `R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(t: f64, s: f64, h: HurstParam) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::invalid("times must be nonnegative"));
    }
    let two_h = 2.0 * h.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Normalizing constant `c_H` of the kernel.
pub fn kernel_norm_const(h: HurstParam) -> f64 {
    let hv = h.value();
    let k = h.kappa();
    let ln_beta = ln_gamma(2.0 - 2.0 * hv) + ln_gamma(k) - ln_gamma(1.5 - hv);
    (2.0 * hv * k).sqrt() * (-0.5 * ln_beta).exp()
}

/// `c_H * Γ(H - 1/2)`; the factor relating the kernel operator to the
/// composition of Riemann–Liouville maps, needed by the inverse operator.
pub(crate) fn rho(h: HurstParam) -> f64 {
    kernel_norm_const(h) * gamma(h.kappa())
}

/// Gauss hypergeometric function for nonpositive argument.
///
/// The Pfaff transform maps `z <= 0` to `w = z/(z-1) ∈ [0, 1)` where the
/// series converges geometrically. Terminating cases are summed directly.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if c <= 0.0 && c == c.floor() {
        return Err(Error::invalid(format!("c = {c} is a nonpositive integer")));
    }
    if z > 0.0 {
        return Err(Error::invalid(format!("argument {z} > 0 unsupported")));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    // Negative-integer a or b terminates the defining series; sum it exactly.
    for (p, q) in [(a, b), (b, a)] {
        if p < 0.0 && p == p.floor() {
            let m = (-p) as usize;
            let mut term = 1.0;
            let mut sum = 1.0;
            for n in 0..m {
                let nf = n as f64;
                term *= (p + nf) * (q + nf) / ((c + nf) * (nf + 1.0)) * z;
                sum += term;
            }
            return Ok(sum);
        }
    }
    let w = z / (z - 1.0);
    let b2 = c - b;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut small_streak = 0;
    const CAP: usize = 100_000;
    for n in 0..CAP {
        let nf = n as f64;
        term *= (a + nf) * (b2 + nf) / ((c + nf) * (nf + 1.0)) * w;
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok((1.0 - z).powf(-a) * sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::numerical(format!(
        "hypergeometric series did not converge (a={a}, b={b}, c={c}, z={z})"
    )))
}

/// Which of the two equivalent kernel formulas to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelForm {
    Integral,
    Hypergeometric,
}

struct KernelParams {
    kappa: f64,
    c_h: f64,
    hyp_pref: f64, // c_H Γ(κ) / Γ(H + 1/2)
    c_hyp: f64,    // H + 1/2
}

impl KernelParams {
    fn new(h: HurstParam) -> Self {
        let k = h.kappa();
        let c_h = kernel_norm_const(h);
        KernelParams {
            kappa: k,
            c_h,
            hyp_pref: c_h * gamma(k) / gamma(h.value() + 0.5),
            c_hyp: h.value() + 0.5,
        }
    }

    fn integral_form(&self, t: f64, s: f64) -> Result<f64> {
        // s^{-κ} ∫_s^t r^κ (r-s)^{κ-1} dr with the (r-s) power absorbed:
        // (1/κ) ∫_0^{(t-s)^κ} (s + v^{1/κ})^κ dv.
        let k = self.kappa;
        let upper = (t - s).powf(k);
        let inv_k = 1.0 / k;
        let inner = quad::adaptive(|v| (s + v.powf(inv_k)).powf(k), 0.0, upper, 1e-12)?;
        Ok(self.c_h * s.powf(-k) * inner * inv_k)
    }

    fn hypergeometric_form(&self, t: f64, s: f64) -> Result<f64> {
        let k = self.kappa;
        let f = gauss_2f1(k, -k, self.c_hyp, 1.0 - t / s)?;
        Ok(self.hyp_pref * (t - s).powf(k) * f)
    }

    /// Route by series cost: the Pfaff variable is `1 - s/t`, so small `s/t`
    /// converges slowly and the integral form wins there.
    fn value(&self, t: f64, s: f64) -> Result<f64> {
        if s >= t {
            return Ok(0.0);
        }
        if s < 0.05 * t {
            self.integral_form(t, s)
        } else {
            self.hypergeometric_form(t, s)
        }
    }

    /// `K(t,s) / (t-s)^κ`, bounded near the diagonal.
    fn diagonal_factor(&self, t: f64, s: f64) -> Result<f64> {
        if s < 0.05 * t {
            Ok(self.integral_form(t, s)? * (t - s).powf(-self.kappa))
        } else {
            let f = gauss_2f1(self.kappa, -self.kappa, self.c_hyp, 1.0 - t / s)?;
            Ok(self.hyp_pref * f)
        }
    }
}

/// Volterra kernel `K_H(t, s)`; zero for `s >= t`, rejected for `s <= 0`
/// (the `s^{1/2-H}` prefactor is singular there — quadrature callers absorb
/// that endpoint instead of sampling it).
pub fn kernel_kh(t: f64, s: f64, h: HurstParam, form: KernelForm) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("kernel needs s > 0, got {s}")));
    }
    if s >= t {
        return Ok(0.0);
    }
    let p = KernelParams::new(h);
    match form {
        KernelForm::Integral => p.integral_form(t, s),
        KernelForm::Hypergeometric => p.hypergeometric_form(t, s),
    }
}

/// Auto-dispatching kernel evaluation (integral form near `s = 0`).
pub fn kernel_value(t: f64, s: f64, h: HurstParam) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("kernel needs s > 0, got {s}")));
    }
    KernelParams::new(h).value(t, s)
}

/// `∫_0^{t∧s} K(t,r) K(s,r) dr`, the factorization side of the covariance
/// identity, with the `r^{1-2H}` origin singularity absorbed.
pub fn covariance_factorization(t: f64, s: f64, h: HurstParam) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::invalid("factorization needs positive times"));
    }
    let p = KernelParams::new(h);
    let k = p.kappa;
    let m = t.min(s);
    let phi = |r: f64| -> f64 {
        let a = p.value(t, r).unwrap_or(f64::NAN);
        let b = if r >= m {
            0.0
        } else {
            p.value(s, r).unwrap_or(f64::NAN)
        };
        r.powf(2.0 * k) * a * b
    };
    quad::power_lower(-2.0 * k, 0.0, m, phi, 1e-10)
}

/// Tail energy `v_eps = ∫_{T-eps}^T K(T,s)^2 ds`.
pub fn kernel_tail_energy(t_end: f64, eps: f64, h: HurstParam) -> Result<f64> {
    if !(eps > 0.0 && eps <= t_end && t_end.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < eps <= T, got eps={eps}, T={t_end}"
        )));
    }
    let p = KernelParams::new(h);
    let k = p.kappa;
    let t = t_end;
    // x = T - s; near x = 0 the integrand is x^{2κ} * (bounded)^2.
    let near_diag = |x: f64| {
        let g = p.diagonal_factor(t, t - x).unwrap_or(f64::NAN);
        g * g
    };
    let lo = t - eps;
    if lo >= 0.5 * t {
        return quad::power_lower(2.0 * k, 0.0, eps, near_diag, 1e-11);
    }
    let mut total = quad::power_lower(2.0 * k, 0.0, 0.5 * t, near_diag, 1e-11)?;
    if lo > 0.0 {
        total += quad::adaptive(
            |s| {
                let v = p.value(t, s).unwrap_or(f64::NAN);
                v * v
            },
            lo,
            0.5 * t,
            1e-11,
        )?;
    } else {
        // eps = T: absorb the s^{-2κ} origin singularity of K^2.
        total += quad::power_lower(
            -2.0 * k,
            0.0,
            0.5 * t,
            |s| {
                let v = p.value(t, s).unwrap_or(f64::NAN);
                let w = s.powf(k) * v;
                w * w
            },
            1e-11,
        )?;
    }
    Ok(total)
}

/// Constant of the tail-energy lower bound `v_eps >= C ε^{2H}` for the
/// normalized kernel: `C = 1 / ((H-1/2) B(2-2H, H-1/2))`.
pub fn kernel_tail_lower_constant(h: HurstParam) -> f64 {
    let hv = h.value();
    let k = h.kappa();
    let ln_beta = ln_gamma(2.0 - 2.0 * hv) + ln_gamma(k) - ln_gamma(1.5 - hv);
    (-ln_beta).exp() / k
}

/// `C_0 = ∫_0^1 (u^{1/2-H} - 1) (1-u)^{-1/2-H} du` (positive; both endpoint
/// singularities absorbed analytically).
pub fn c0_constant(h: HurstParam) -> Result<f64> {
    let k = h.kappa();
    let lower = quad::power_lower(
        -k,
        0.0,
        0.5,
        |u| (1.0 - u.powf(k)) * (1.0 - u).powf(-1.0 - k),
        1e-12,
    )?;
    // reflected piece: x = 1-u, integrand ((1-x)^{-κ} - 1) x^{-1-κ}
    let upper = quad::power_lower(
        -k,
        0.0,
        0.5,
        |x| (-k * (-x).ln_1p()).exp_m1() / x,
        1e-12,
    )?;
    Ok(lower + upper)
}

// ---------------------------------------------------------------------------
// KernelGrid
// ---------------------------------------------------------------------------

/// Precomputed kernel data on a uniform grid: pointwise values
/// `K(t_i, t_j)` and per-cell quadrature weights
/// `w[i][j] = ∫_{t_j}^{t_{j+1}} K(t_i, s) ds`.
///
/// The cell weights account for the `s^{1/2-H}` origin singularity and the
/// `(t-s)^{H-1/2}` diagonal cusp; the `j = 0` pointwise slot holds 0 (the
/// kernel is singular at `s = 0`). Rows are independent, so construction is
/// data-parallel, and a built grid is immutable and freely shared.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    n: usize,
    t_end: f64,
    hurst: HurstParam,
    /// row i (1-based): K(t_i, t_j) for j = 0..i, with slot j = 0 flagged 0.
    point: Vec<Vec<f64>>,
    /// row i: cell integrals for j = 0..i-1.
    cells: Vec<Vec<f64>>,
}

impl KernelGrid {
    pub fn build(n: usize, t_end: f64, hurst: HurstParam) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("kernel grid needs at least 2 intervals"));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::invalid("horizon must be positive and finite"));
        }
        let h = t_end / n as f64;
        let build_row = |i: usize| -> Result<(Vec<f64>, Vec<f64>)> {
            let p = KernelParams::new(hurst);
            let k = p.kappa;
            let t = i as f64 * h;
            let mut point = vec![0.0; i];
            for (j, slot) in point.iter_mut().enumerate().skip(1) {
                *slot = p.value(t, j as f64 * h)?;
            }
            let mut cells = vec![0.0; i];
            for (j, slot) in cells.iter_mut().enumerate() {
                let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
                *slot = if j == 0 {
                    // origin cell: absorb s^{-κ}
                    quad::power_lower(
                        -k,
                        0.0,
                        b,
                        |s| s.powf(k) * p.value(t, s).unwrap_or(f64::NAN),
                        1e-10,
                    )?
                } else if j + 1 == i {
                    // diagonal cell: absorb (t-s)^{κ}
                    quad::power_upper(
                        k,
                        a,
                        b,
                        |s| p.diagonal_factor(t, s).unwrap_or(f64::NAN),
                        1e-10,
                    )?
                } else if j <= 2 || j + 4 >= i {
                    // near-singular neighbours: steep derivatives, refine
                    quad::adaptive(|s| p.value(t, s).unwrap_or(f64::NAN), a, b, 1e-9)?
                } else {
                    quad::gl2(|s| p.value(t, s).unwrap_or(f64::NAN), a, b)
                };
                if !slot.is_finite() {
                    return Err(Error::numerical(format!(
                        "kernel cell ({i}, {j}) is not finite"
                    )));
                }
            }
            Ok((point, cells))
        };

        #[cfg(feature = "parallel")]
        let rows: Result<Vec<_>> = (1..=n).into_par_iter().map(build_row).collect();
        #[cfg(not(feature = "parallel"))]
        let rows: Result<Vec<_>> = (1..=n).map(build_row).collect();
        let rows = rows?;

        let mut point = Vec::with_capacity(n + 1);
        let mut cells = Vec::with_capacity(n + 1);
        point.push(Vec::new());
        cells.push(Vec::new());
        for (pv, cv) in rows {
            point.push(pv);
            cells.push(cv);
        }
        Ok(KernelGrid {
            n,
            t_end,
            hurst,
            point,
            cells,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n as f64
    }

    /// `K(t_i, t_j)`; zero for `j >= i` and for the flagged origin `j = 0`.
    pub fn point_value(&self, i: usize, j: usize) -> f64 {
        if i > self.n || j >= i || j == 0 {
            0.0
        } else {
            self.point[i][j]
        }
    }

    /// `∫_{t_j}^{t_{j+1}} K(t_i, s) ds`; zero for `j >= i`.
    pub fn cell_weight(&self, i: usize, j: usize) -> f64 {
        if i > self.n || j >= i {
            0.0
        } else {
            self.cells[i][j]
        }
    }

    pub fn row_cells(&self, i: usize) -> &[f64] {
        &self.cells[i]
    }

    pub fn grid_matches(&self, f: &GridFunction) -> bool {
        f.n_intervals() == self.n
            && f.t_start().abs() <= 1e-12
            && (f.t_end() - self.t_end).abs() <= 1e-12 * (1.0 + self.t_end.abs())
    }

    /// Long-form CSV: header block, then one `i,j,point,cell` row per cell.
    /// Floats use the shortest round-trip representation, so export/import
    /// is bit-exact.
    pub fn export_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,t_end,hurst")?;
        writeln!(w, "{},{},{}", self.n, self.t_end, self.hurst.value())?;
        writeln!(w, "i,j,point,cell")?;
        for i in 1..=self.n {
            for j in 0..i {
                let pv = if j == 0 {
                    String::new()
                } else {
                    format!("{}", self.point[i][j])
                };
                writeln!(w, "{i},{j},{pv},{}", self.cells[i][j])?;
            }
        }
        Ok(())
    }

    pub fn import_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let hdr = lines
            .next()
            .ok_or_else(|| Error::Io("empty kernel grid file".into()))??;
        if hdr.trim() != "n,t_end,hurst" {
            return Err(Error::Io(format!("unexpected header: {hdr}")));
        }
        let meta = lines
            .next()
            .ok_or_else(|| Error::Io("missing metadata line".into()))??;
        let parts: Vec<&str> = meta.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Io("metadata line needs n,t_end,hurst".into()));
        }
        let n: usize = parts[0].parse().map_err(|e| Error::Io(format!("{e}")))?;
        let t_end: f64 = parts[1].parse().map_err(|e| Error::Io(format!("{e}")))?;
        let hurst =
            HurstParam::new(parts[2].parse().map_err(|e| Error::Io(format!("{e}")))?)?;
        let _cols = lines
            .next()
            .ok_or_else(|| Error::Io("missing column header".into()))??;

        let mut point: Vec<Vec<f64>> = (0..=n).map(|i| vec![0.0; i]).collect();
        let mut cells: Vec<Vec<f64>> = (0..=n).map(|i| vec![0.0; i]).collect();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(Error::Io(format!("bad row: {line}")));
            }
            let i: usize = f[0].parse().map_err(|e| Error::Io(format!("{e}")))?;
            let j: usize = f[1].parse().map_err(|e| Error::Io(format!("{e}")))?;
            if i == 0 || i > n || j >= i {
                return Err(Error::Io(format!("indices out of range: {line}")));
            }
            if !f[2].is_empty() {
                point[i][j] = f[2].parse().map_err(|e| Error::Io(format!("{e}")))?;
            }
            cells[i][j] = f[3].parse().map_err(|e| Error::Io(format!("{e}")))?;
        }
        Ok(KernelGrid {
            n,
            t_end,
            hurst,
            point,
            cells,
        })
    }
}

/// `(K_H f)(t_i) = ∫_0^{t_i} K(t_i, s) f(s) ds` against the grid's exact
/// per-cell kernel measure, with `f` interpolated linearly.
pub fn operator_kh(f: &GridFunction, kg: &KernelGrid) -> Result<GridFunction> {
    if !kg.grid_matches(f) {
        return Err(Error::GridMismatch("operator_kh input".into()));
    }
    let n = kg.n_intervals();
    let mut out = GridFunction::zeros(0.0, kg.t_end(), f.dim(), n)?;
    for c in 0..f.dim() {
        for i in 1..=n {
            let row = kg.row_cells(i);
            let mut acc = 0.0;
            for (j, w) in row.iter().enumerate() {
                acc += w * 0.5 * (f.value(j)[c] + f.value(j + 1)[c]);
            }
            out.value_mut(i)[c] = acc;
        }
    }
    Ok(out)
}

/// `(K_H^* φ)(s_i) = ∫_{s_i}^T φ(r) ∂_r K(r, s_i) dr` via the integrated
/// form `c_H s^{-κ} ∫_s^T φ(r) r^κ (r-s)^{κ-1} dr`, with the diagonal power
/// absorbed by substitution. The flagged origin slot holds 0.
pub fn operator_kh_star(phi: &GridFunction, kg: &KernelGrid) -> Result<GridFunction> {
    if !kg.grid_matches(phi) {
        return Err(Error::GridMismatch("operator_kh_star input".into()));
    }
    let n = kg.n_intervals();
    let h = kg.step();
    let hurst = kg.hurst();
    let k = hurst.kappa();
    let c_h = kernel_norm_const(hurst);
    let inv_k = 1.0 / k;
    let mut out = GridFunction::zeros(0.0, kg.t_end(), phi.dim(), n)?;
    for c in 0..phi.dim() {
        let vals: Vec<f64> = (0..=n).map(|i| phi.value(i)[c]).collect();
        for i in 1..n {
            let s = i as f64 * h;
            // v = (r - s)^κ; piecewise GL2 between mapped cell boundaries.
            let mut acc = 0.0;
            for j in i..n {
                let v_lo = ((j - i) as f64 * h).powf(k);
                let v_hi = ((j + 1 - i) as f64 * h).powf(k);
                let t_j = j as f64 * h;
                let slope = (vals[j + 1] - vals[j]) / h;
                acc += quad::gl2(
                    |v| {
                        let r = s + v.powf(inv_k);
                        let phi_r = vals[j] + slope * (r - t_j);
                        phi_r * r.powf(k)
                    },
                    v_lo,
                    v_hi,
                );
            }
            out.value_mut(i)[c] = c_h * s.powf(-k) * acc * inv_k;
        }
    }
    Ok(out)
}

/// Inverse kernel operator
/// `(K_H^{-1} h)(s) = ρ^{-1} s^{H-1/2} D^{H-1/2}_{0+}(·^{1/2-H} h')(s)`,
/// with `h'` from centered differences (one-sided second order at the ends)
/// and the integrand's origin blow-up handled by a power model. The origin
/// slot of the output is flagged 0 and excluded downstream.
pub fn operator_kh_inverse(path: &GridFunction, hurst: HurstParam) -> Result<GridFunction> {
    let n = path.n_intervals();
    if n < 8 {
        return Err(Error::invalid("inverse operator needs at least 8 intervals"));
    }
    let scale = (0..path.len())
        .map(|i| path.value_norm(i))
        .fold(0.0f64, f64::max);
    if path.value_norm(0) > 1e-9 * (1.0 + scale) {
        return Err(Error::invalid("inverse operator requires h(0) = 0"));
    }
    let h = path.step();
    let k = hurst.kappa();
    let inv_rho = 1.0 / rho(hurst);
    let mut out = GridFunction::zeros(path.t_start(), path.t_end(), path.dim(), n)?;
    for c in 0..path.dim() {
        let vals: Vec<f64> = (0..=n).map(|i| path.value(i)[c]).collect();
        let mut deriv = vec![0.0; n + 1];
        deriv[0] = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * h);
        deriv[n] = (3.0 * vals[n] - 4.0 * vals[n - 1] + vals[n - 2]) / (2.0 * h);
        for i in 1..n {
            deriv[i] = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
        }
        let mut g = vec![0.0; n + 1];
        for i in 1..=n {
            g[i] = (i as f64 * h).powf(-k) * deriv[i];
        }
        let d = fraccalc::weyl_left_scalar(&g, h, k, Some(k));
        for i in 1..=n {
            out.value_mut(i)[c] = inv_rho * (i as f64 * h).powf(k) * d[i];
        }
    }
    Ok(out)
}

/// L2 inner product of two grid functions whose first cell behaves like
/// `s^{-q}` at the flagged origin: the `[0, t_1]` contribution is modeled as
/// `u(t_1)·v(t_1) (s/t_1)^{-2q}` and integrated exactly, the rest by the
/// trapezoid rule. Requires `q < 1/2`.
pub fn l2_inner_origin_power(u: &GridFunction, v: &GridFunction, q: f64) -> Result<f64> {
    if !u.same_grid(v) || u.dim() != v.dim() {
        return Err(Error::GridMismatch("inner product operands".into()));
    }
    if !(q < 0.5) {
        return Err(Error::invalid("origin exponent must be < 1/2"));
    }
    let n = u.n_intervals();
    let h = u.step();
    let dot = |i: usize| -> f64 {
        u.value(i)
            .iter()
            .zip(v.value(i))
            .map(|(a, b)| a * b)
            .sum()
    };
    let mut acc = dot(1) * h / (1.0 - 2.0 * q);
    for i in 1..n {
        acc += 0.5 * (dot(i) + dot(i + 1)) * h;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h75() -> HurstParam {
        HurstParam::new(0.75).unwrap()
    }

    #[test]
    fn hurst_domain_enforced() {
        assert!(HurstParam::new(0.5).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(0.75).is_ok());
    }

    #[test]
    fn covariance_closed_form_values() {
        let h = HurstParam::new(0.7).unwrap();
        // diagonal: R(t,t) = t^{2H}
        let v = fbm_covariance(2.0, 2.0, h).unwrap();
        assert!((v - 2.0f64.powf(1.4)).abs() < 1e-14);
        // symmetry cancellation at (1, 1/2) for any H: R = 1/2
        let v = fbm_covariance(1.0, 0.5, h75()).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        assert_eq!(fbm_covariance(3.0, 0.0, h).unwrap(), 0.0);
        assert!(fbm_covariance(-1.0, 1.0, h).is_err());
    }

    #[test]
    fn hypergeometric_classical_identities() {
        // 2F1(1,1;2;z) = -ln(1-z)/z at z = -1 gives ln 2.
        let v = gauss_2f1(1.0, 1.0, 2.0, -1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-14, "{v}");
        assert_eq!(gauss_2f1(0.3, 0.0, 1.2, -5.0).unwrap(), 1.0);
        assert_eq!(gauss_2f1(0.3, -0.7, 1.2, 0.0).unwrap(), 1.0);
        // terminating case: 2F1(-2, b; c; z) is a quadratic polynomial
        let (b, c, z) = (0.7, 1.3, -2.0);
        let exact = 1.0 + (-2.0) * b / c * z
            + ((-2.0) * (-1.0) / 2.0) * (b * (b + 1.0)) / (c * (c + 1.0)) * z * z;
        let v = gauss_2f1(-2.0, b, c, z).unwrap();
        assert!((v - exact).abs() < 1e-14);
        assert!(gauss_2f1(1.0, 1.0, -2.0, -1.0).is_err());
        assert!(gauss_2f1(1.0, 1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn kernel_methods_agree() {
        for (hv, t, s) in [
            (0.7, 1.0, 0.5),
            (0.55, 1.0, 0.5),
            (0.9, 1.0, 0.5),
            (0.75, 2.0, 0.3),
            (0.75, 1.0, 0.03),
        ] {
            let h = HurstParam::new(hv).unwrap();
            let a = kernel_kh(t, s, h, KernelForm::Integral).unwrap();
            let b = kernel_kh(t, s, h, KernelForm::Hypergeometric).unwrap();
            assert!(
                ((a - b) / a).abs() <= 1e-8,
                "H={hv} t={t} s={s}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn kernel_indicator_and_domain() {
        assert_eq!(
            kernel_kh(1.0, 1.5, h75(), KernelForm::Integral).unwrap(),
            0.0
        );
        assert!(kernel_kh(1.0, 0.0, h75(), KernelForm::Integral).is_err());
        assert!(kernel_kh(1.0, -0.2, h75(), KernelForm::Hypergeometric).is_err());
    }

    #[test]
    fn factorization_reproduces_covariance() {
        // (t,s) = (1, 1/2), H = 3/4: R_H = 1/2 exactly.
        let v = covariance_factorization(1.0, 0.5, h75()).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "{v}");
        // full-interval energy: ∫_0^1 K(1,s)^2 ds = 1
        let v = covariance_factorization(1.0, 1.0, h75()).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn tail_energy_full_interval_is_covariance_diagonal() {
        for (hv, t) in [(0.75, 1.0), (0.6, 2.0)] {
            let h = HurstParam::new(hv).unwrap();
            let v = kernel_tail_energy(t, t, h).unwrap();
            let exact = t.powf(2.0 * hv);
            assert!(
                (v / exact - 1.0).abs() < 1e-6,
                "H={hv} T={t}: {v} vs {exact}"
            );
        }
        assert!(kernel_tail_energy(1.0, 0.0, h75()).is_err());
        assert!(kernel_tail_energy(1.0, 1.5, h75()).is_err());
    }

    #[test]
    fn tail_energy_lower_bound_and_scaling() {
        // frozen independent value: C*(0.75) = 0.7627597635018132
        let c = kernel_tail_lower_constant(h75());
        assert!((c - 0.762759763501813).abs() < 1e-12, "{c}");
        let h = h75();
        let mut logs = Vec::new();
        for j in 3..=8 {
            let eps = 2.0f64.powi(-j);
            let v = kernel_tail_energy(1.0, eps, h).unwrap();
            assert!(v >= c * eps.powf(1.5), "bound fails at eps={eps}: {v}");
            logs.push((eps.ln(), v.ln()));
        }
        let xs: Vec<f64> = logs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = logs.iter().map(|p| p.1).collect();
        let (slope, _) = crate::stats::regression(&xs, &ys);
        assert!((slope - 1.5).abs() <= 0.05, "slope {slope}");
    }

    #[test]
    fn c0_matches_closed_form() {
        // C0 = (1 - Γ(1-κ)^2 / Γ(1-2κ)) / κ; frozen reference at H = 0.75:
        // 0.6111476608240837 (quadrature crosschecked at 1e-8 and 1e-12).
        let v = c0_constant(h75()).unwrap();
        assert!((v - 0.6111476608240837).abs() < 1e-9, "{v}");
        for hv in [0.55, 0.6, 0.9] {
            let h = HurstParam::new(hv).unwrap();
            let k = h.kappa();
            let closed = (1.0 - gamma(1.0 - k).powi(2) / gamma(1.0 - 2.0 * k)) / k;
            let v = c0_constant(h).unwrap();
            assert!(
                (v - closed).abs() < 1e-9 * (1.0 + closed),
                "H={hv}: {v} vs {closed}"
            );
            assert!(v > 0.0);
        }
        // H -> 1/2 limit: C0 -> 0
        let v = c0_constant(HurstParam::new(0.501).unwrap()).unwrap();
        assert!(v.abs() < 2e-3, "{v}");
    }

    #[test]
    fn kernel_grid_weights_sum_to_operator_on_constants() {
        // Σ_j w[i][j] = ∫_0^{t_i} K(t_i, s) ds, against the composition
        // closed form ρ Γ(3/2-H) t^{H+1/2} / (H+1/2).
        let h = h75();
        let kg = KernelGrid::build(64, 1.0, h).unwrap();
        let closed = |t: f64| rho(h) * gamma(0.75) * t.powf(1.25) / 1.25;
        for i in [16usize, 32, 64] {
            let t = kg.step() * i as f64;
            let sum: f64 = kg.row_cells(i).iter().sum();
            assert!(
                (sum / closed(t) - 1.0).abs() < 1e-6,
                "row {i}: {sum} vs {}",
                closed(t)
            );
        }
    }

    #[test]
    fn operator_kh_examples() {
        let h = h75();
        let kg = KernelGrid::build(128, 1.0, h).unwrap();
        let zero = GridFunction::zeros(0.0, 1.0, 1, 128).unwrap();
        let out = operator_kh(&zero, &kg).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));

        let one = GridFunction::sample_scalar(0.0, 1.0, 128, |_| 1.0).unwrap();
        let two = GridFunction::sample_scalar(0.0, 1.0, 128, |_| 2.0).unwrap();
        let k1 = operator_kh(&one, &kg).unwrap();
        let k2 = operator_kh(&two, &kg).unwrap();
        for i in 0..=128 {
            assert!((k2.scalar(i) - 2.0 * k1.scalar(i)).abs() < 1e-14);
        }
        // independent adaptive quadrature of the kernel itself at t = 1
        let direct = quad::power_lower(
            -0.25,
            0.0,
            1.0,
            |s| s.powf(0.25) * kernel_value(1.0, s, h).unwrap(),
            1e-10,
        )
        .unwrap();
        assert!(
            (k1.scalar(128) / direct - 1.0).abs() <= 1e-4,
            "{} vs {direct}",
            k1.scalar(128)
        );
        assert!(k1.scalar(0) == 0.0);

        let coarse = GridFunction::sample_scalar(0.0, 1.0, 64, |_| 1.0).unwrap();
        assert!(operator_kh(&coarse, &kg).is_err());
    }

    #[test]
    fn operator_kh_star_indicator_recovers_kernel() {
        // φ = 1 on the whole grid: (K* 1_{[0,T]})(s) = K(T, s).
        let h = h75();
        let n = 256;
        let kg = KernelGrid::build(n, 1.0, h).unwrap();
        let one = GridFunction::sample_scalar(0.0, 1.0, n, |_| 1.0).unwrap();
        let star = operator_kh_star(&one, &kg).unwrap();
        for i in [32usize, 128, 200] {
            let s = i as f64 / n as f64;
            let exact = kernel_value(1.0, s, h).unwrap();
            assert!(
                (star.scalar(i) / exact - 1.0).abs() < 1e-4,
                "i={i}: {} vs {exact}",
                star.scalar(i)
            );
        }
        // zero input stays zero
        let zero = GridFunction::zeros(0.0, 1.0, 1, n).unwrap();
        assert!(operator_kh_star(&zero, &kg)
            .unwrap()
            .values()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn isometry_on_indicators() {
        // <K* 1_{[0,t]}, K* 1_{[0,s]}>_{L2} = R_H(t,s) at (1, 1/2), H = 3/4.
        let h = h75();
        let n = 512;
        let kg = KernelGrid::build(n, 1.0, h).unwrap();
        let ind_t = GridFunction::sample_scalar(0.0, 1.0, n, |_| 1.0).unwrap();
        let ind_s =
            GridFunction::sample_scalar(0.0, 1.0, n, |r| if r <= 0.5 { 1.0 } else { 0.0 })
                .unwrap();
        let a = operator_kh_star(&ind_t, &kg).unwrap();
        let b = operator_kh_star(&ind_s, &kg).unwrap();
        let ip = l2_inner_origin_power(&a, &b, h.kappa()).unwrap();
        assert!((ip - 0.5).abs() < 5e-3, "{ip}");
    }

    #[test]
    fn inverse_round_trip_converges() {
        let h = h75();
        let mut errs = Vec::new();
        for n in [64usize, 128, 256, 512] {
            let kg = KernelGrid::build(n, 1.0, h).unwrap();
            let f = GridFunction::sample_scalar(0.0, 1.0, n, |s| s).unwrap();
            let kf = operator_kh(&f, &kg).unwrap();
            let back = operator_kh_inverse(&kf, h).unwrap();
            // origin flagged; measure from a fixed interior point
            let err = (n / 8..=n)
                .map(|i| (back.scalar(i) - f.scalar(i)).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
        let order = (errs[0] / errs[3]).log2() / 3.0;
        assert!(order >= 0.5, "order {order}, {errs:?}");
    }

    #[test]
    fn inverse_of_linear_path_matches_power_identity() {
        // h(t) = t has constant unit integrand; the output is
        // ρ^{-1} Γ(3/4)/Γ(1/2) s^{-1/4}; frozen value 0.713096423354660 at s=1.
        let h = h75();
        let n = 256;
        let f = GridFunction::sample_scalar(0.0, 1.0, n, |s| s).unwrap();
        let u = operator_kh_inverse(&f, h).unwrap();
        let expect = 0.713096423354660;
        assert!((u.scalar(n) - expect).abs() < 2e-3, "{}", u.scalar(n));
        // and the s-profile follows s^{-1/4}
        let mid = u.scalar(n / 2) / 0.5f64.powf(-0.25);
        assert!((mid - expect).abs() < 2e-3, "{mid}");
        assert_eq!(u.scalar(0), 0.0);
        assert_eq!(u.len(), n + 1);
    }

    #[test]
    fn inverse_rejects_nonzero_start() {
        let f = GridFunction::sample_scalar(0.0, 1.0, 64, |s| s + 1.0).unwrap();
        assert!(operator_kh_inverse(&f, h75()).is_err());
    }

    #[test]
    fn kernel_grid_csv_roundtrip_is_bit_exact() {
        let kg = KernelGrid::build(24, 1.5, HurstParam::new(0.62).unwrap()).unwrap();
        let mut buf = Vec::new();
        kg.export_csv(&mut buf).unwrap();
        let back = KernelGrid::import_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(kg, back);
    }
}
