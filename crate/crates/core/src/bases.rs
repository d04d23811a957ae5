//! Scheme constants and on-the-fly direction generation.
//!
//! None of the four bases is ever stored as a matrix. A direction is a
//! multiple of the all-ones vector with at most one adjusted component, so
//! it can be written into a caller-owned buffer in O(n).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which set of interpolation directions is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisKind {
    /// `e_1, ..., e_n`.
    Coordinate,
    /// `v_j = alpha (e_j - gamma e)`, the arms of a regular simplex.
    Regular,
    /// `e_1, ..., e_n, -e`.
    CoordinateMinimal,
    /// Regular basis plus `v_{n+1} = -e / sqrt(n)`.
    RegularMinimal,
}

impl BasisKind {
    pub const ALL: [BasisKind; 4] = [
        BasisKind::Coordinate,
        BasisKind::Regular,
        BasisKind::CoordinateMinimal,
        BasisKind::RegularMinimal,
    ];

    /// True for the two minimal positive bases (n+1 directions).
    pub fn is_minimal(self) -> bool {
        matches!(self, BasisKind::CoordinateMinimal | BasisKind::RegularMinimal)
    }

    pub fn num_directions(self, n: usize) -> usize {
        if self.is_minimal() {
            n + 1
        } else {
            n
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BasisKind::Coordinate => "cb",
            BasisKind::Regular => "rb",
            BasisKind::CoordinateMinimal => "cmpb",
            BasisKind::RegularMinimal => "rmpb",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cb" | "coordinate" => Ok(BasisKind::Coordinate),
            "rb" | "regular" => Ok(BasisKind::Regular),
            "cmpb" | "coordinate-minimal" => Ok(BasisKind::CoordinateMinimal),
            "rmpb" | "regular-minimal" => Ok(BasisKind::RegularMinimal),
            other => Err(Error::Config(format!("unknown basis '{other}'"))),
        }
    }
}

/// Dimension-dependent scalars shared by the regular schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConstants {
    pub n: usize,
    /// `sqrt((n+1)/n)`
    pub alpha: f64,
    /// `(1 - 1/sqrt(n+1)) / n`
    pub gamma: f64,
    /// `alpha^2 (1 - 2 gamma)`
    pub mu: f64,
    /// `gamma^2 / (1 - 2 gamma)`
    pub omega: f64,
    /// `2 omega + omega^2 n + 1/(mu^2 n^2)`
    pub sigma: f64,
}

impl BasisConstants {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        let nf = n as f64;
        let alpha = ((nf + 1.0) / nf).sqrt();
        let gamma = (1.0 - 1.0 / (nf + 1.0).sqrt()) / nf;
        let one_minus_two_gamma = 1.0 - 2.0 * gamma;
        let mu = alpha * alpha * one_minus_two_gamma;
        let omega = gamma * gamma / one_minus_two_gamma;
        let sigma = 2.0 * omega + omega * omega * nf + 1.0 / (mu * mu * nf * nf);
        Ok(Self {
            n,
            alpha,
            gamma,
            mu,
            omega,
            sigma,
        })
    }

    /// `(sqrt(n+1) - 1) / n`, the rank-one coefficient of `V^{-1}`.
    pub fn inverse_shift(&self) -> f64 {
        let nf = self.n as f64;
        ((nf + 1.0).sqrt() - 1.0) / nf
    }
}

/// Writes direction `j` (0-based) of `kind` into `out`.
///
/// `out.len()` fixes the dimension and must equal `consts.n`.
pub fn direction_into(kind: BasisKind, consts: &BasisConstants, j: usize, out: &mut [f64]) -> Result<()> {
    let n = consts.n;
    if out.len() != n {
        return Err(Error::Length {
            expected: n,
            actual: out.len(),
        });
    }
    let count = kind.num_directions(n);
    if j >= count {
        return Err(Error::Index { index: j, count });
    }
    match kind {
        BasisKind::Coordinate | BasisKind::CoordinateMinimal => {
            if j == n {
                out.fill(-1.0);
            } else {
                out.fill(0.0);
                out[j] = 1.0;
            }
        }
        BasisKind::Regular | BasisKind::RegularMinimal => {
            if j == n {
                out.fill(-1.0 / (n as f64).sqrt());
            } else {
                let off = -consts.alpha * consts.gamma;
                out.fill(off);
                out[j] = consts.alpha * (1.0 - consts.gamma);
            }
        }
    }
    Ok(())
}

/// Allocating form of [`direction_into`].
pub fn direction(kind: BasisKind, consts: &BasisConstants, j: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; consts.n];
    direction_into(kind, consts, j, &mut out)?;
    Ok(out)
}

/// Applies `V^{-1} = (I + (sqrt(n+1)-1)/n * e e^T) / alpha` to `y` in O(n).
pub fn apply_regular_inverse(consts: &BasisConstants, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != consts.n {
        return Err(Error::Length {
            expected: consts.n,
            actual: y.len(),
        });
    }
    let shift = consts.inverse_shift() * y.iter().sum::<f64>();
    Ok(y.iter().map(|&yi| (yi + shift) / consts.alpha).collect())
}

/// Evaluates both sides of every closed-form identity between the constants
/// and returns the largest relative disagreement.
pub fn verify_appendix_identities(n: usize) -> Result<f64> {
    let c = BasisConstants::new(n)?;
    let nf = n as f64;
    let r = (nf + 1.0).sqrt();
    let (alpha, gamma, mu, omega) = (c.alpha, c.gamma, c.mu, c.omega);

    let rel = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    };

    let denom = (nf - 2.0) * (nf + 1.0) + 2.0 * r;
    let pairs = [
        // gamma / (1 - n gamma) = gamma sqrt(n+1) = (sqrt(n+1) - 1) / n
        (gamma / (1.0 - nf * gamma), gamma * r),
        (gamma * r, (r - 1.0) / nf),
        (1.0 - nf * gamma, 1.0 / r),
        // gamma^2
        (gamma * gamma, (1.0 - 1.0 / r).powi(2) / (nf * nf)),
        (gamma * gamma, ((nf + 2.0) / (nf + 1.0) - 2.0 / r) / (nf * nf)),
        // alpha^2 gamma^2, both forms
        (alpha * alpha * gamma * gamma, (nf + 2.0 - 2.0 * r) / nf.powi(3)),
        (alpha * alpha * gamma * gamma, (r - 1.0).powi(2) / nf.powi(3)),
        // 1 - 2 gamma
        (1.0 - 2.0 * gamma, ((nf - 2.0) * r + 2.0) / (nf * r)),
        (1.0 - 2.0 * gamma, 1.0 - 2.0 / nf + 2.0 / (nf * r)),
        // mu
        (mu, denom / (nf * nf)),
        // omega n
        (omega * nf, (nf + 2.0 - 2.0 * r) / denom),
        // 1 + omega n
        (1.0 + omega * nf, nf * nf / denom),
        // omega n / (1 + omega n)
        (omega * nf / (1.0 + omega * nf), (nf + 2.0 - 2.0 * r) / (nf * nf)),
        // 1 - mu = omega n / (1 + omega n)
        (1.0 - mu, omega * nf / (1.0 + omega * nf)),
    ];
    Ok(pairs.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max))
}
