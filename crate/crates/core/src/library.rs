//! Built-in coefficient sets and drift functionals used by the studies and
//! the CLI. Every entry carries the declared regularity metadata the study
//! preconditions check against.

use crate::ensemble::SeedRecord;
use crate::error::Result;
use crate::sde::CoefficientSpec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Catalog row: the coefficients plus the Hurst parameter the entry is
/// typically run with and a one-line description.
#[derive(Clone)]
pub struct LibraryEntry {
    pub spec: CoefficientSpec,
    pub default_h: f64,
    pub description: &'static str,
}

/// Serializable metadata view of a catalog row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryMetadata {
    pub name: String,
    pub dim: usize,
    pub growth_const: f64,
    pub holder_order: f64,
    pub holder_const: f64,
    pub sigma_sup_bound: Option<f64>,
    pub nondegeneracy: Option<f64>,
    pub default_h: f64,
    pub description: String,
}

impl LibraryEntry {
    pub fn metadata(&self) -> EntryMetadata {
        EntryMetadata {
            name: self.spec.name.clone(),
            dim: self.spec.dim,
            growth_const: self.spec.growth_const,
            holder_order: self.spec.holder_order,
            holder_const: self.spec.holder_const,
            sigma_sup_bound: self.spec.sigma_sup_bound,
            nondegeneracy: self.spec.nondegeneracy,
            default_h: self.default_h,
            description: self.description.to_string(),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The built-in coefficient catalog.
pub fn catalog() -> Vec<LibraryEntry> {
    let mut entries = Vec::new();

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "additive-unit",
            1,
            Arc::new(|_x, out| out[0] = 0.0),
            Arc::new(|_x, out| out[0] = 1.0),
            0.0,
            1.0,
            0.0,
            Some(1.0),
            Some(1.0),
        )
        .unwrap(),
        default_h: 0.75,
        description: "zero drift, unit additive noise: X = x0 + B^H",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "linear-drift",
            1,
            Arc::new(|x, out| out[0] = -x[0]),
            Arc::new(|_x, out| out[0] = 1.0),
            1.0,
            1.0,
            0.0,
            Some(1.0),
            Some(1.0),
        )
        .unwrap(),
        default_h: 0.75,
        description: "mean-reverting linear drift with unit additive noise",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "sign-drift",
            1,
            Arc::new(|x, out| out[0] = -sign(x[0])),
            Arc::new(|_x, out| out[0] = 1.0),
            1.0,
            1.0,
            0.0,
            Some(1.0),
            Some(1.0),
        )
        .unwrap(),
        default_h: 0.75,
        description: "bounded measurable (discontinuous) drift, unit noise",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "oscillatory-drift",
            1,
            Arc::new(|x, out| out[0] = (1.0 + x[0].abs()) * (1.0 / (x[0].abs() + 0.01)).cos()),
            Arc::new(|_x, out| out[0] = 1.0),
            1.0,
            1.0,
            0.0,
            Some(1.0),
            Some(1.0),
        )
        .unwrap(),
        default_h: 0.75,
        description: "wildly oscillating measurable drift of linear growth",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "bounded-holder-sigma",
            1,
            Arc::new(|x, out| out[0] = -sign(x[0])),
            Arc::new(|x, out| out[0] = 0.5 + 0.5 * x[0].abs().powf(0.75).min(1.5)),
            1.0,
            0.75,
            0.5,
            Some(1.25),
            Some(0.25),
        )
        .unwrap(),
        default_h: 0.75,
        description: "bounded Hölder-3/4 diffusion with discontinuous drift",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "nondegenerate-sine",
            1,
            Arc::new(|x, out| out[0] = -sign(x[0])),
            Arc::new(|x, out| out[0] = 1.0 + 0.3 * x[0].sin()),
            1.0,
            1.0,
            0.3,
            Some(1.3),
            Some(0.49),
        )
        .unwrap(),
        default_h: 0.6,
        description: "uniformly elliptic Lipschitz diffusion, measurable drift",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "nondegenerate-2d",
            2,
            Arc::new(|x, out| {
                out[0] = -x[0];
                out[1] = -x[1];
            }),
            Arc::new(|x, out| {
                out[0] = 1.0 + 0.3 * x[1].sin();
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = 1.0 + 0.3 * x[0].cos();
            }),
            1.0,
            1.0,
            0.3,
            Some(1.3),
            Some(0.49),
        )
        .unwrap(),
        default_h: 0.75,
        description: "planar uniformly elliptic diagonal diffusion",
    });

    entries.push(LibraryEntry {
        spec: CoefficientSpec::new(
            "degenerate-halfspace",
            2,
            Arc::new(|_x, out| {
                out[0] = 0.0;
                out[1] = 0.0;
            }),
            Arc::new(|x, out| {
                let g = x[0].clamp(0.0, 1.0);
                out[0] = g;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = g;
            }),
            0.0,
            1.0,
            1.0,
            Some(1.0),
            None,
        )
        .unwrap(),
        default_h: 0.75,
        description: "diffusion vanishing on the half-space {x_1 <= 0}",
    });

    entries
}

pub fn coefficient(name: &str) -> Option<CoefficientSpec> {
    catalog()
        .into_iter()
        .find(|e| e.spec.name == name)
        .map(|e| e.spec)
}

pub fn entry(name: &str) -> Option<LibraryEntry> {
    catalog().into_iter().find(|e| e.spec.name == name)
}

// ---------------------------------------------------------------------------
// Drift functionals for the change-of-measure studies
// ---------------------------------------------------------------------------

type VecFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A drift functional `h: R^d -> R^d` with its declared increment shape
/// `|h(x) - h(y)| <= K |x-y|^lambda (1 + |x|^p + |y|^p)`.
#[derive(Clone)]
pub struct DriftFunctional {
    pub name: String,
    pub dim: usize,
    f: VecFn,
    pub lambda: f64,
    pub growth_p: f64,
    pub k_const: f64,
    pub bounded: bool,
    pub description: &'static str,
}

impl DriftFunctional {
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out);
    }

    /// Randomized certification of the declared increment shape; violations
    /// warn through the returned ratio, they do not abort.
    pub fn certify(&self, seed: u64, n_pairs: usize, radius: f64) -> (f64, bool) {
        let mut rng = SeedRecord::new(seed, 1).rng();
        let d = self.dim;
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        let (mut hx, mut hy) = (vec![0.0; d], vec![0.0; d]);
        let mut worst: f64 = 0.0;
        for _ in 0..n_pairs {
            for v in x.iter_mut().chain(y.iter_mut()) {
                *v = rng.random_range(-radius..radius);
            }
            self.eval_into(&x, &mut hx);
            self.eval_into(&y, &mut hy);
            let dh = hx
                .iter()
                .zip(&hy)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let dx = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dx < 1e-12 {
                continue;
            }
            let xn = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let yn = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            let bound = dx.powf(self.lambda) * (1.0 + xn.powf(self.growth_p) + yn.powf(self.growth_p));
            worst = worst.max(dh / bound);
        }
        (worst, worst <= self.k_const * (1.0 + 1e-9) || self.k_const == 0.0 && worst == 0.0)
    }

    /// Admissibility of the increment order for a given `H`:
    /// `lambda ∈ (1 - 1/(2H), 1]`.
    pub fn lambda_admissible(&self, h: crate::volterra::HurstParam) -> bool {
        self.lambda > 1.0 - 1.0 / (2.0 * h.value()) && self.lambda <= 1.0
    }
}

pub fn drift_catalog(dim: usize) -> Vec<DriftFunctional> {
    vec![
        DriftFunctional {
            name: "zero".into(),
            dim,
            f: Arc::new(|_x, out| out.fill(0.0)),
            lambda: 1.0,
            growth_p: 0.0,
            k_const: 0.0,
            bounded: true,
            description: "identically zero functional",
        },
        DriftFunctional {
            name: "constant-half".into(),
            dim,
            f: Arc::new(|_x, out| out.fill(0.5)),
            lambda: 1.0,
            growth_p: 0.0,
            k_const: 0.0,
            bounded: true,
            description: "constant shift of 1/2 per component",
        },
        DriftFunctional {
            name: "tanh".into(),
            dim,
            f: Arc::new(|x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.tanh();
                }
            }),
            lambda: 1.0,
            growth_p: 0.0,
            k_const: 1.0,
            bounded: true,
            description: "bounded Lipschitz functional tanh(x)",
        },
        DriftFunctional {
            name: "holder-root".into(),
            dim,
            f: Arc::new(|x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = sign(*v) * v.abs().powf(0.6).min(1.5);
                }
            }),
            lambda: 0.6,
            growth_p: 0.0,
            k_const: 2.0,
            bounded: true,
            description: "bounded Hölder-0.6 functional",
        },
    ]
}

pub fn drift_functional(name: &str, dim: usize) -> Option<DriftFunctional> {
    drift_catalog(dim).into_iter().find(|e| e.name == name)
}

/// Check every catalog entry against its own default Hurst parameter.
pub fn validate_catalog() -> Result<()> {
    for e in catalog() {
        let h = crate::volterra::HurstParam::new(e.default_h)?;
        e.spec.validate_for(h)?;
    }
    Ok(())
}
