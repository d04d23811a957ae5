//! O(n) closed-form gradient and diagonal-Hessian estimates.
//!
//! Each formula solves `y = h U^T g` and `z = h^2/2 W^T d` (least squares for
//! the minimal positive bases) using only sums and scalar shifts, so no
//! `n x n` matrix is ever formed.

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::bases::{apply_regular_inverse, BasisConstants, BasisKind};
use crate::error::{Error, Result};
use crate::sampling::{difference_vectors, sample_points, DifferenceVectors, ModelOrder, SampleSet, SamplingScheme};

/// How the diagonal is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiagMethod {
    /// The least-squares solution for the scheme.
    #[default]
    LeastSquares,
    /// `2 z / h^2` on the coordinate directions. Only valid for CB and CMPB,
    /// where it is the central second difference.
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub g: Vec<f64>,
    /// Present iff the scheme uses the quadratic model.
    pub d: Option<Vec<f64>>,
    pub scheme: SamplingScheme,
    /// Sampled values consumed, excluding `f(x)`.
    pub evals_used: usize,
    /// Whether `f(x)` was evaluated by [`estimate`] rather than supplied.
    pub center_evaluated: bool,
    /// A primed block was passed to a linear-model estimate and ignored.
    pub ignored_primed_block: bool,
}

impl DerivativeEstimate {
    /// Evaluations charged to the objective, counting a fresh `f(x)`.
    pub fn total_evals(&self) -> usize {
        self.evals_used + usize::from(self.center_evaluated)
    }
}

fn require_extra(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Contract(format!("{what} missing for a minimal positive basis")))
}

fn check_diffs(diffs: &DifferenceVectors, consts: &BasisConstants, scheme: &SamplingScheme) -> Result<()> {
    if scheme.model != ModelOrder::Quadratic {
        return Err(Error::Contract(
            "quadratic estimate requested for a linear scheme".into(),
        ));
    }
    if consts.n != scheme.n {
        return Err(Error::Length {
            expected: scheme.n,
            actual: consts.n,
        });
    }
    for v in [&diffs.y, &diffs.z] {
        if v.len() != scheme.n {
            return Err(Error::Length {
                expected: scheme.n,
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// Gradient from the quadratic model.
pub fn grad_quadratic(diffs: &DifferenceVectors, consts: &BasisConstants, scheme: &SamplingScheme) -> Result<Vec<f64>> {
    check_diffs(diffs, consts, scheme)?;
    let h = scheme.h;
    let y = &diffs.y;
    let sum_y: f64 = y.iter().sum();
    let g = match scheme.kind {
        BasisKind::Coordinate => y.iter().map(|&yi| yi / h).collect(),
        BasisKind::Regular => apply_regular_inverse(consts, y)?.into_iter().map(|v| v / h).collect(),
        BasisKind::CoordinateMinimal => {
            let extra = require_extra(diffs.y_extra, "y_{n+1}")?;
            let shift = (sum_y + extra) / (consts.n as f64 + 1.0);
            y.iter().map(|&yi| (yi - shift) / h).collect()
        }
        BasisKind::RegularMinimal => {
            let extra = require_extra(diffs.y_extra, "y_{n+1}")?;
            let shift = consts.gamma * sum_y + extra / (consts.n as f64 + 1.0).sqrt();
            let scale = consts.alpha * h;
            y.iter().map(|&yi| (yi - shift) / scale).collect()
        }
    };
    Ok(g)
}

/// Diagonal of the Hessian from the quadratic model.
pub fn diag_quadratic(diffs: &DifferenceVectors, consts: &BasisConstants, scheme: &SamplingScheme) -> Result<Vec<f64>> {
    check_diffs(diffs, consts, scheme)?;
    let h2 = scheme.h * scheme.h;
    let z = &diffs.z;
    let nf = consts.n as f64;
    let sum_z: f64 = z.iter().sum();
    let d = match scheme.kind {
        BasisKind::Coordinate => z.iter().map(|&zi| 2.0 * zi / h2).collect(),
        BasisKind::Regular => {
            let shift = (1.0 - consts.mu) * sum_z / nf;
            let scale = 2.0 / (consts.mu * h2);
            z.iter().map(|&zi| scale * (zi - shift)).collect()
        }
        BasisKind::CoordinateMinimal => {
            let extra = require_extra(diffs.z_extra, "z_{n+1}")?;
            let shift = (extra - sum_z) / (nf + 1.0);
            z.iter().map(|&zi| 2.0 * (zi + shift) / h2).collect()
        }
        BasisKind::RegularMinimal => {
            let extra = require_extra(diffs.z_extra, "z_{n+1}")?;
            let (mu, omega, sigma) = (consts.mu, consts.omega, consts.sigma);
            let shift = ((omega - sigma) * sum_z + extra / (mu * nf)) / (1.0 + sigma * nf);
            let scale = 2.0 / (mu * h2);
            z.iter().map(|&zi| scale * (zi + shift)).collect()
        }
    };
    Ok(d)
}

/// Central second differences `2 z / h^2` on the coordinate directions.
pub fn diag_central(diffs: &DifferenceVectors, scheme: &SamplingScheme) -> Result<Vec<f64>> {
    match scheme.kind {
        BasisKind::Coordinate | BasisKind::CoordinateMinimal => {}
        other => {
            return Err(Error::Config(format!(
                "central diagonal needs coordinate directions, scheme is {other}"
            )))
        }
    }
    let h2 = scheme.h * scheme.h;
    Ok(diffs.z.iter().map(|&zi| 2.0 * zi / h2).collect())
}

/// Gradient from the linear model `f(x + h u_j) = f(x) + h u_j^T g`.
///
/// Any primed block in `samples` is ignored.
pub fn grad_linear(samples: &SampleSet, consts: &BasisConstants, scheme: &SamplingScheme) -> Result<Vec<f64>> {
    scheme.validate()?;
    if scheme.model != ModelOrder::Linear {
        return Err(Error::Contract(
            "linear estimate requested for a quadratic scheme".into(),
        ));
    }
    samples.check_lengths(scheme)?;
    let n = scheme.n;
    let nf = n as f64;
    let h = scheme.h;
    let f = &samples.f;

    let centered = || -> Result<Vec<f64>> {
        let f0 = samples
            .f0
            .ok_or_else(|| Error::Contract(format!("{} linear gradient needs f(x)", scheme.kind)))?;
        Ok(f.iter().map(|&fj| fj - f0).collect())
    };

    let g = match scheme.kind {
        BasisKind::Coordinate => centered()?.into_iter().map(|v| v / h).collect(),
        BasisKind::Regular => apply_regular_inverse(consts, &centered()?)?
            .into_iter()
            .map(|v| v / h)
            .collect(),
        BasisKind::CoordinateMinimal => {
            let mean = f.iter().sum::<f64>() / (nf + 1.0);
            f[..n].iter().map(|&fj| (fj - mean) / h).collect()
        }
        BasisKind::RegularMinimal => {
            let sum: f64 = f[..n].iter().sum();
            let shift = consts.gamma * sum + f[n] / (nf + 1.0).sqrt();
            let scale = consts.alpha * h;
            f[..n].iter().map(|&fj| (fj - shift) / scale).collect()
        }
    };
    Ok(g)
}

/// Closed-form estimate from values the caller already has.
pub fn estimate_from_samples(
    samples: &SampleSet,
    scheme: &SamplingScheme,
    diag: DiagMethod,
) -> Result<DerivativeEstimate> {
    scheme.validate()?;
    let consts = BasisConstants::new(scheme.n)?;
    let (g, d, ignored) = match scheme.model {
        ModelOrder::Quadratic => {
            let diffs = difference_vectors(samples, scheme)?;
            let g = grad_quadratic(&diffs, &consts, scheme)?;
            let d = match diag {
                DiagMethod::LeastSquares => diag_quadratic(&diffs, &consts, scheme)?,
                DiagMethod::Central => diag_central(&diffs, scheme)?,
            };
            (g, Some(d), false)
        }
        ModelOrder::Linear => (grad_linear(samples, &consts, scheme)?, None, samples.fprime.is_some()),
    };
    Ok(DerivativeEstimate {
        g,
        d,
        scheme: *scheme,
        evals_used: scheme.num_samples(),
        center_evaluated: false,
        ignored_primed_block: ignored,
    })
}

/// Options for [`estimate_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    pub diag: DiagMethod,
    /// Known `f(x)`; when absent and the scheme needs it, it is evaluated.
    pub f0: Option<f64>,
}

/// Samples `f` around `x` and returns the closed-form estimate.
pub fn estimate<F, E>(f: F, x: &[f64], scheme: &SamplingScheme) -> Result<DerivativeEstimate>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    estimate_with(f, x, scheme, EstimateOptions::default())
}

pub fn estimate_with<F, E>(
    mut f: F,
    x: &[f64],
    scheme: &SamplingScheme,
    opts: EstimateOptions,
) -> Result<DerivativeEstimate>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    let mut call = |p: &[f64]| {
        f(p).map_err(|e| Error::Evaluation {
            point: p.to_vec(),
            message: e.to_string(),
        })
    };
    let points = sample_points(x, scheme)?;

    let mut center_evaluated = false;
    let f0 = match opts.f0 {
        Some(v) => Some(v),
        None if scheme.needs_center() => {
            center_evaluated = true;
            Some(call(x)?)
        }
        None => None,
    };
    let values = points.iter().map(|p| call(p)).collect::<Result<Vec<_>>>()?;
    let samples = SampleSet::from_ordered(f0, &values, scheme)?;
    let mut est = estimate_from_samples(&samples, scheme, opts.diag)?;
    est.center_evaluated = center_evaluated;
    Ok(est)
}
