//! Gradient error bounds and empirical convergence order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bases::BasisKind;
use crate::error::{Error, Result};
use crate::sampling::ModelOrder;

/// Scheme constant in `||g - grad f|| <= M h^2 kappa / 6` (quadratic) or
/// `<= L h kappa / 2` (linear).
///
/// Both models share the same table: CB `sqrt(n)`, RB `n`, CMPB `sqrt(n+1)`,
/// RMPB `sqrt(n)`.
pub fn kappa(kind: BasisKind, _model: ModelOrder, n: usize) -> f64 {
    let nf = n as f64;
    match kind {
        BasisKind::Coordinate | BasisKind::RegularMinimal => nf.sqrt(),
        BasisKind::Regular => nf,
        BasisKind::CoordinateMinimal => (nf + 1.0).sqrt(),
    }
}

/// `sqrt(n)`: the regular-basis constant when the bound is quoted without the
/// `||V^{-1}||_2 = sqrt(n)` factor that makes up the tabulated `n`.
pub fn kappa_regular_sqrt_n(n: usize) -> f64 {
    (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundInput {
    /// `M` (Hessian Lipschitz constant) for the quadratic model, `L`
    /// (gradient Lipschitz constant) for the linear one.
    pub lipschitz: f64,
    pub h: f64,
    pub n: usize,
    pub kind: BasisKind,
    pub model: ModelOrder,
}

/// `M h^2 kappa / 6` or `L |h| kappa / 2`.
pub fn gradient_bound(inp: &ErrorBoundInput) -> f64 {
    gradient_bound_with_kappa(inp.lipschitz, inp.h, inp.model, kappa(inp.kind, inp.model, inp.n))
}

pub fn gradient_bound_with_kappa(lipschitz: f64, h: f64, model: ModelOrder, kappa: f64) -> f64 {
    match model {
        ModelOrder::Quadratic => lipschitz * h * h * kappa / 6.0,
        ModelOrder::Linear => 0.5 * lipschitz * h.abs() * kappa,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Least-squares slope of `log(error)` against `log(h)`.
    pub slope: f64,
    pub intercept: f64,
    /// Pairs dropped because their error was not positive.
    pub excluded: Vec<(f64, f64)>,
}

/// Fits `log(err) = slope log(h) + c` over the pairs with positive error.
pub fn observed_order(pairs: &[(f64, f64)]) -> Result<OrderFit> {
    if pairs.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 (h, error) pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(h, _)| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::Config("step sizes must be positive".into()));
    }
    if pairs.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::Config("step sizes must be strictly decreasing".into()));
    }
    let (kept, excluded): (Vec<_>, Vec<_>) = pairs.iter().partition(|&&(_, e)| e > 0.0 && e.is_finite());
    if kept.len() < 2 {
        return Err(Error::Config("fewer than two pairs with positive error".into()));
    }
    let pts: Vec<(f64, f64)> = kept.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(OrderFit {
        slope,
        intercept: my - slope * mx,
        excluded,
    })
}

/// Spectral norm of a symmetric matrix by power iteration on `A^2`.
fn symmetric_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut est = 0.0;
    for _ in 0..200 {
        let av: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        let norm = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / vnorm;
        v = av.iter().map(|x| x / norm).collect();
        if (next - est).abs() <= 1e-13 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Sampled lower estimate of the Hessian Lipschitz constant near `x`.
///
/// Draws `trials` pairs uniformly from the ball of radius `radius` around `x`
/// and returns the largest `||H(a) - H(b)||_2 / ||a - b||_2`.
pub fn estimate_lipschitz<H>(hessian: H, x: &[f64], radius: f64, trials: usize, seed: u64) -> Result<f64>
where
    H: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    if !(radius > 0.0) {
        return Err(Error::Config("radius must be positive".into()));
    }
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball_point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                return x.iter().zip(&p).map(|(xi, pi)| xi + radius * pi).collect();
            }
        }
    };
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let a = ball_point(&mut rng);
        let b = ball_point(&mut rng);
        let dist = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let (ha, hb) = (hessian(&a), hessian(&b));
        let diff: Vec<Vec<f64>> = ha
            .iter()
            .zip(&hb)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(u, v)| u - v).collect())
            .collect();
        best = best.max(symmetric_norm(&diff) / dist);
    }
    Ok(best)
}
