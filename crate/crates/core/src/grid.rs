//! Uniform-grid path representation shared by every module.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A scalar or vector function sampled on a uniform time grid.
///
/// Values are stored time-major: sample `i` occupies
/// `values[i * dim .. (i + 1) * dim]`. The grid has `n_intervals + 1` samples
/// covering `[t_start, t_end]` with spacing `(t_end - t_start) / n_intervals`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    t_start: f64,
    t_end: f64,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(t_start: f64, t_end: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(t_end.is_finite() && t_start.is_finite() && t_end > t_start) {
            return Err(Error::invalid(format!(
                "time window [{t_start}, {t_end}] is not increasing and finite"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if values.len() < 2 * dim || values.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "value buffer of length {} does not hold >= 2 samples of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(GridFunction {
            t_start,
            t_end,
            dim,
            values,
        })
    }

    /// Scalar samples on `[t_start, t_end]`.
    pub fn from_scalar(t_start: f64, t_end: f64, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(t_start, t_end, 1, values)
    }

    /// Sample a scalar closure on a uniform grid with `n` intervals.
    pub fn sample_scalar(
        t_start: f64,
        t_end: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one interval"));
        }
        let h = (t_end - t_start) / n as f64;
        let values: Vec<f64> = (0..=n).map(|i| f(t_start + i as f64 * h)).collect();
        GridFunction::from_scalar(t_start, t_end, values)
    }

    pub fn zeros(t_start: f64, t_end: f64, dim: usize, n: usize) -> Result<Self> {
        GridFunction::new(t_start, t_end, dim, vec![0.0; (n + 1) * dim])
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid intervals (samples minus one).
    pub fn n_intervals(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing.
    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_intervals() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.step()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar sample; panics if `dim != 1`.
    pub fn scalar(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1, "scalar access on vector-valued grid");
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean norm of sample `i`.
    pub fn value_norm(&self, i: usize) -> f64 {
        self.value(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// One component as a scalar grid function.
    pub fn component(&self, c: usize) -> Result<GridFunction> {
        if c >= self.dim {
            return Err(Error::invalid(format!(
                "component {c} out of range for dim {}",
                self.dim
            )));
        }
        let vals = (0..self.len()).map(|i| self.value(i)[c]).collect();
        GridFunction::from_scalar(self.t_start, self.t_end, vals)
    }

    /// Restriction to every `factor`-th grid point (grids must nest).
    pub fn coarsen(&self, factor: usize) -> Result<GridFunction> {
        let n = self.n_intervals();
        if factor == 0 || n % factor != 0 {
            return Err(Error::invalid(format!(
                "coarsening factor {factor} does not divide {n} intervals"
            )));
        }
        let mut vals = Vec::with_capacity((n / factor + 1) * self.dim);
        for i in (0..=n).step_by(factor) {
            vals.extend_from_slice(self.value(i));
        }
        GridFunction::new(self.t_start, self.t_end, self.dim, vals)
    }

    /// True when both functions live on the same grid (same window, same `n`).
    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.len() == other.len()
            && (self.t_start - other.t_start).abs() <= 1e-12 * (1.0 + self.t_start.abs())
            && (self.t_end - other.t_end).abs() <= 1e-12 * (1.0 + self.t_end.abs())
    }

    /// Index range `[i_lo, i_hi]` of grid points inside the closed window.
    ///
    /// Fails when the window is empty or contains fewer than two grid points.
    pub fn window_indices(&self, window: Option<(f64, f64)>) -> Result<(usize, usize)> {
        let (a, b) = window.unwrap_or((self.t_start, self.t_end));
        if !(a < b) {
            return Err(Error::invalid(format!("window [{a}, {b}] is empty")));
        }
        let h = self.step();
        let slack = 1e-9 * h;
        let lo = ((a - self.t_start - slack) / h).ceil().max(0.0) as usize;
        let hi_f = ((b - self.t_start + slack) / h).floor();
        let hi = (hi_f as usize).min(self.n_intervals());
        if lo >= hi {
            return Err(Error::invalid(format!(
                "window [{a}, {b}] covers fewer than two grid points"
            )));
        }
        Ok((lo, hi))
    }

    /// Write as CSV with header `t,x_1,...,x_d`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for c in 1..=self.dim {
            header.push_str(&format!(",x_{c}"));
        }
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            let mut line = format!("{}", self.time(i));
            for v in self.value(i) {
                line.push_str(&format!(",{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
