//! Interpolation point sets and the eliminated right-hand sides `y`, `z`.
//!
//! Points are returned in a fixed order: the `h` block `x + h u_j` for every
//! direction, then (quadratic model only) the `eta h` block `x + eta h u_j`.
//! A [`SampleSet`] is addressed by the same positions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bases::{direction_into, BasisConstants, BasisKind};
use crate::error::{Error, Result};

/// Radii below this are rejected; `1/h^2` would overflow.
pub const MIN_ABS_RADIUS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelOrder {
    Linear,
    Quadratic,
}

impl ModelOrder {
    pub fn name(self) -> &'static str {
        match self {
            ModelOrder::Linear => "linear",
            ModelOrder::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for ModelOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(ModelOrder::Linear),
            "quadratic" | "quad" => Ok(ModelOrder::Quadratic),
            other => Err(Error::Config(format!("unknown model order '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub kind: BasisKind,
    pub n: usize,
    /// Sampling radius.
    pub h: f64,
    /// Ratio of the second radius to the first, `h' = eta h`.
    pub eta: f64,
    pub model: ModelOrder,
}

impl SamplingScheme {
    pub const DEFAULT_ETA: f64 = -1.0;

    /// Quadratic-model scheme with `eta = -1`.
    pub fn new(kind: BasisKind, n: usize, h: f64) -> Result<Self> {
        Self::with_options(kind, n, h, Self::DEFAULT_ETA, ModelOrder::Quadratic)
    }

    pub fn linear(kind: BasisKind, n: usize, h: f64) -> Result<Self> {
        Self::with_options(kind, n, h, Self::DEFAULT_ETA, ModelOrder::Linear)
    }

    pub fn with_options(kind: BasisKind, n: usize, h: f64, eta: f64, model: ModelOrder) -> Result<Self> {
        let scheme = Self { kind, n, h, eta, model };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Dimension(self.n));
        }
        if !self.h.is_finite() || self.h.abs() < MIN_ABS_RADIUS {
            return Err(Error::Config(format!(
                "sampling radius must be nonzero and finite, got {}",
                self.h
            )));
        }
        if self.model == ModelOrder::Quadratic {
            if !self.eta.is_finite() || self.eta == 0.0 || self.eta == 1.0 {
                return Err(Error::Config(format!(
                    "eta must be finite and not 0 or 1, got {}",
                    self.eta
                )));
            }
            if (self.eta * self.h).abs() < MIN_ABS_RADIUS {
                return Err(Error::Config("eta * h underflows".into()));
            }
        }
        Ok(())
    }

    /// Directions per block: n for CB/RB, n+1 for CMPB/RMPB.
    pub fn num_directions(&self) -> usize {
        self.kind.num_directions(self.n)
    }

    /// Function values needed beyond `f(x)`: the "# Samples" count.
    pub fn num_samples(&self) -> usize {
        match self.model {
            ModelOrder::Linear => self.num_directions(),
            ModelOrder::Quadratic => 2 * self.num_directions(),
        }
    }

    /// Whether the closed forms for this scheme read `f(x)`.
    ///
    /// The linear minimal-basis formulas cancel `f(x)` exactly.
    pub fn needs_center(&self) -> bool {
        !(self.model == ModelOrder::Linear && self.kind.is_minimal())
    }

    pub fn with_radius(&self, h: f64) -> Result<Self> {
        Self::with_options(self.kind, self.n, h, self.eta, self.model)
    }
}

/// Function values at the points produced by [`sample_points`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    /// `f(x)`; may be omitted when the scheme does not use it.
    pub f0: Option<f64>,
    /// Values at `x + h u_j`.
    pub f: Vec<f64>,
    /// Values at `x + eta h u_j`; absent for the linear model.
    pub fprime: Option<Vec<f64>>,
}

impl SampleSet {
    /// Splits values laid out in [`sample_points`] order.
    pub fn from_ordered(f0: Option<f64>, values: &[f64], scheme: &SamplingScheme) -> Result<Self> {
        let m = scheme.num_directions();
        if values.len() != scheme.num_samples() {
            return Err(Error::Length {
                expected: scheme.num_samples(),
                actual: values.len(),
            });
        }
        let (f, rest) = values.split_at(m);
        Ok(Self {
            f0,
            f: f.to_vec(),
            fprime: (!rest.is_empty()).then(|| rest.to_vec()),
        })
    }

    pub(crate) fn check_lengths(&self, scheme: &SamplingScheme) -> Result<()> {
        let m = scheme.num_directions();
        if self.f.len() != m {
            return Err(Error::Length {
                expected: m,
                actual: self.f.len(),
            });
        }
        if let Some(fp) = &self.fprime {
            if fp.len() != m {
                return Err(Error::Length {
                    expected: m,
                    actual: fp.len(),
                });
            }
        }
        Ok(())
    }
}

/// Eliminated right-hand sides: `y = h U^T g`, `z = h^2/2 W^T d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceVectors {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `y_{n+1}` for the minimal positive bases.
    pub y_extra: Option<f64>,
    /// `z_{n+1}` for the minimal positive bases.
    pub z_extra: Option<f64>,
}

/// Every interpolation point for `scheme` around `x`.
pub fn sample_points(x: &[f64], scheme: &SamplingScheme) -> Result<Vec<Vec<f64>>> {
    scheme.validate()?;
    if x.len() != scheme.n {
        return Err(Error::Length {
            expected: scheme.n,
            actual: x.len(),
        });
    }
    let consts = BasisConstants::new(scheme.n)?;
    let m = scheme.num_directions();
    let mut radii = vec![scheme.h];
    if scheme.model == ModelOrder::Quadratic {
        radii.push(scheme.eta * scheme.h);
    }

    let mut u = vec![0.0; scheme.n];
    let mut points = Vec::with_capacity(m * radii.len());
    for &r in &radii {
        for j in 0..m {
            direction_into(scheme.kind, &consts, j, &mut u)?;
            points.push(x.iter().zip(&u).map(|(&xi, &ui)| xi + r * ui).collect());
        }
    }
    Ok(points)
}

/// Forms `y` and `z` from the sampled values.
///
/// `y = (eta^2 df - df') / (eta (eta - 1))`, `z = (eta df - df') / (eta (1 - eta))`
/// with `df = f - f(x) e`, `df' = f' - f(x) e`.
pub fn difference_vectors(samples: &SampleSet, scheme: &SamplingScheme) -> Result<DifferenceVectors> {
    scheme.validate()?;
    if scheme.model != ModelOrder::Quadratic {
        return Err(Error::Contract("difference vectors need the quadratic model".into()));
    }
    samples.check_lengths(scheme)?;
    let fprime = samples
        .fprime
        .as_ref()
        .ok_or_else(|| Error::Contract("quadratic model needs the eta h sample block".into()))?;
    let f0 = samples
        .f0
        .ok_or_else(|| Error::Contract("quadratic model needs f(x)".into()))?;

    let eta = scheme.eta;
    let cy = 1.0 / (eta * (eta - 1.0));
    let cz = 1.0 / (eta * (1.0 - eta));
    let eta2 = eta * eta;

    // Combine the raw values before subtracting f(x): at eta = -1 this is
    // (f - f') / 2 and (f + f' - 2 f(x)) / 2, and f(x) drops out of y.
    let mut y = Vec::with_capacity(samples.f.len());
    let mut z = Vec::with_capacity(samples.f.len());
    for (&fj, &fpj) in samples.f.iter().zip(fprime) {
        y.push(cy * ((eta2 * fj - fpj) - (eta2 - 1.0) * f0));
        z.push(cz * ((eta * fj - fpj) + (1.0 - eta) * f0));
    }

    let (y_extra, z_extra) = if scheme.kind.is_minimal() {
        (y.pop(), z.pop())
    } else {
        (None, None)
    };
    Ok(DifferenceVectors { y, z, y_extra, z_extra })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn eval_all(f: impl Fn(&[f64]) -> f64, x: &[f64], scheme: &SamplingScheme) -> SampleSet {
        let pts = sample_points(x, scheme).unwrap();
        let vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        SampleSet::from_ordered(Some(f(x)), &vals, scheme).unwrap()
    }

    #[test]
    fn coordinate_points_at_origin() {
        let s = SamplingScheme::with_options(BasisKind::Coordinate, 2, 1.0, -1.0, ModelOrder::Quadratic).unwrap();
        let pts = sample_points(&[0.0, 0.0], &s).unwrap();
        assert_eq!(
            pts,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]
        );
    }

    #[test]
    fn regular_minimal_third_point() {
        let x = [1.1, 1.21001];
        let s = SamplingScheme::new(BasisKind::RegularMinimal, 2, 1e-3).unwrap();
        let pts = sample_points(&x, &s).unwrap();
        assert_eq!(pts.len(), 6);
        for i in 0..2 {
            assert!((pts[2][i] - (x[i] - 1e-3 * FRAC_1_SQRT_2)).abs() < 1e-7);
            assert!((pts[5][i] - (x[i] + 1e-3 * FRAC_1_SQRT_2)).abs() < 1e-7);
        }
    }

    #[test]
    fn unit_radius_for_regular_minimal() {
        let s = SamplingScheme::new(BasisKind::RegularMinimal, 2, 1.0).unwrap();
        for p in sample_points(&[0.0, 0.0], &s).unwrap() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_model_omits_primed_block() {
        let s = SamplingScheme::linear(BasisKind::CoordinateMinimal, 3, 0.5).unwrap();
        assert_eq!(sample_points(&[0.0; 3], &s).unwrap().len(), 4);
    }

    #[test]
    fn invalid_configurations() {
        assert!(SamplingScheme::new(BasisKind::Coordinate, 2, 0.0).is_err());
        assert!(SamplingScheme::new(BasisKind::Coordinate, 2, f64::NAN).is_err());
        assert!(SamplingScheme::new(BasisKind::Coordinate, 2, 1e-301).is_err());
        assert!(SamplingScheme::new(BasisKind::Coordinate, 1, 1.0).is_err());
        for eta in [0.0, 1.0] {
            assert!(SamplingScheme::with_options(BasisKind::Regular, 3, 1.0, eta, ModelOrder::Quadratic).is_err());
        }
        // eta is irrelevant for the linear model
        assert!(SamplingScheme::with_options(BasisKind::Regular, 3, 1.0, 1.0, ModelOrder::Linear).is_ok());
        let s = SamplingScheme::new(BasisKind::Coordinate, 2, 1.0).unwrap();
        assert!(sample_points(&[0.0; 3], &s).is_err());
    }

    #[test]
    fn constant_function_gives_zero_differences() {
        for kind in BasisKind::ALL {
            let s = SamplingScheme::with_options(kind, 4, 0.3, 2.0, ModelOrder::Quadratic).unwrap();
            let dv = difference_vectors(&eval_all(|_| 7.5, &[1.0, 2.0, 3.0, 4.0], &s), &s).unwrap();
            assert!(dv.y.iter().chain(&dv.z).all(|&v| v == 0.0));
            assert_eq!(dv.y_extra.is_some(), kind.is_minimal());
            assert_eq!(dv.z_extra.is_some(), kind.is_minimal());
        }
    }

    #[test]
    fn linear_function_has_zero_z_at_eta_minus_one() {
        let f = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2];
        for kind in BasisKind::ALL {
            let s = SamplingScheme::new(kind, 3, 0.25).unwrap();
            let dv = difference_vectors(&eval_all(f, &[0.0; 3], &s), &s).unwrap();
            for &zi in dv.z.iter().chain(dv.z_extra.iter()) {
                assert!(zi.abs() < 1e-15, "{kind}: {zi}");
            }
        }
    }

    #[test]
    fn eta_minus_one_matches_half_sum_and_difference() {
        let f = |x: &[f64]| x[0].sin() * x[1].exp() + x[1] * x[1] * x[1];
        let x = [0.3, -0.7];
        for kind in BasisKind::ALL {
            let s = SamplingScheme::new(kind, 2, 1e-2).unwrap();
            let samples = eval_all(f, &x, &s);
            let dv = difference_vectors(&samples, &s).unwrap();
            let f0 = samples.f0.unwrap();
            let fp = samples.fprime.as_ref().unwrap();
            let mut y = dv.y.clone();
            y.extend(dv.y_extra);
            let mut z = dv.z.clone();
            z.extend(dv.z_extra);
            for j in 0..samples.f.len() {
                let yh = 0.5 * (samples.f[j] - fp[j]);
                let zh = 0.5 * (samples.f[j] + fp[j] - 2.0 * f0);
                assert_eq!(y[j], yh);
                assert_eq!(z[j], zh);
            }
        }
    }

    #[test]
    fn missing_blocks_are_contract_errors() {
        let s = SamplingScheme::new(BasisKind::Coordinate, 2, 0.1).unwrap();
        let no_prime = SampleSet {
            f0: Some(0.0),
            f: vec![1.0, 2.0],
            fprime: None,
        };
        assert!(matches!(difference_vectors(&no_prime, &s), Err(Error::Contract(_))));
        let no_center = SampleSet {
            f0: None,
            f: vec![1.0, 2.0],
            fprime: Some(vec![1.0, 2.0]),
        };
        assert!(matches!(difference_vectors(&no_center, &s), Err(Error::Contract(_))));
        let wrong_len = SampleSet {
            f0: Some(0.0),
            f: vec![1.0, 2.0, 3.0],
            fprime: Some(vec![1.0, 2.0, 3.0]),
        };
        assert!(matches!(difference_vectors(&wrong_len, &s), Err(Error::Length { .. })));
    }
}
