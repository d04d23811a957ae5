//! Frame-based preconditioned conjugate gradients.
//!
//! Every iteration evaluates a frame (the interpolation points of the chosen
//! scheme at radius `h_k`) around the current iterate, forms `g` from it, and
//! takes a preconditioned CG step with `H = diag(1 / max(D_i, clamp))`.
//! Every `n + 3` iterations (the first time after `n`) the diagonal `D` is
//! refreshed, the iterate jumps to the best point seen, and CG restarts. The
//! radius shrinks by `lambda` whenever the frame is quasi-minimal.

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::bases::BasisKind;
use crate::error::{Error, Result};
use crate::estimators::{estimate_from_samples, DiagMethod};
use crate::problems::Objective;
use crate::sampling::{sample_points, ModelOrder, SampleSet, SamplingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub basis: BasisKind,
    /// Maximum objective evaluations, including the starting point.
    pub budget: usize,
    /// Initial frame radius.
    pub h0: f64,
    /// Stop once the radius falls below this.
    pub h_min: f64,
    /// Radius shrink factor on quasi-minimal frames.
    pub lambda: f64,
    /// Quasi-minimality tolerance is `h_k^qmf_epsilon_power`.
    pub qmf_epsilon_power: f64,
    pub line_search_budget: usize,
    /// Floor on `D_i` when forming `H_ii = 1 / max(D_i, clamp)`.
    pub diag_clamp: f64,
    /// Use central second differences for the CMPB diagonal.
    pub cmpb_central_diag: bool,
    pub beta: BetaFormula,
    /// Accepted for completeness; the iteration never reads them.
    pub reserved: ReservedParams,
}

/// Numerator of the CG coefficient; both divide by `g_k^T H g_k` and clamp
/// at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BetaFormula {
    /// `g_{k+1}^T H (g_{k+1} - g_k)`, preconditioned Polak-Ribiere.
    #[default]
    PolakRibiere,
    /// `g_k^T H (g_{k+1} - g_k)`. After a reasonable line search this is
    /// close to `-g_k^T H g_k`, so beta is almost always clamped to zero.
    PreviousGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservedParams {
    pub big_n: f64,
    pub tau_min: f64,
    pub nu: f64,
}

impl Default for ReservedParams {
    fn default() -> Self {
        Self {
            big_n: 1.0,
            tau_min: 1e-10,
            nu: 2.0,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            basis: BasisKind::Coordinate,
            budget: 1300,
            h0: 1.0,
            h_min: 1e-10,
            lambda: 4.0,
            qmf_epsilon_power: 2.0,
            line_search_budget: 10,
            diag_clamp: 1e-4,
            cmpb_central_diag: true,
            beta: BetaFormula::PolakRibiere,
            reserved: ReservedParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_basis(basis: BasisKind) -> Self {
        Self {
            basis,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 1.0) {
            return Err(Error::Config(format!("lambda must exceed 1, got {}", self.lambda)));
        }
        if !(self.h_min > 0.0) || !(self.h0 > 0.0) || !self.h0.is_finite() {
            return Err(Error::Config("h0 and h_min must be positive".into()));
        }
        if !(self.diag_clamp > 0.0) {
            return Err(Error::Config("diag_clamp must be positive".into()));
        }
        Ok(())
    }

    fn diag_method(&self) -> DiagMethod {
        if self.cmpb_central_diag && self.basis == BasisKind::CoordinateMinimal {
            DiagMethod::Central
        } else {
            DiagMethod::LeastSquares
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `f` at the frame centre `x_k`.
    pub f_center: f64,
    /// Incumbent after the iteration.
    pub f_best: f64,
    /// Frame radius used in this iteration.
    pub h: f64,
    /// Reset counter at the start of the iteration.
    pub j: usize,
    pub beta: f64,
    pub theta: f64,
    pub gnorm: f64,
    pub nf: usize,
    /// `H` was refreshed before `beta` was computed.
    pub h_refreshed: bool,
    pub quasi_minimal: bool,
    pub precond_min: f64,
    pub precond_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    RadiusBelowMinimum,
    BudgetExhausted,
    EvaluationFailed { point: Vec<f64>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub fmin: f64,
    pub x_min: Vec<f64>,
    /// Norm of the last gradient estimate.
    pub gnorm: f64,
    /// Frame radius at exit.
    pub h: f64,
    pub iterations: usize,
    pub qmf_count: usize,
    pub nf: usize,
    pub stop: StopReason,
    pub trace: Vec<IterationRecord>,
}

/// True iff no frame value improves on the centre by more than `epsilon`.
pub fn is_quasi_minimal(frame_values: &[f64], center_value: f64, epsilon: f64) -> Result<bool> {
    if frame_values.is_empty() {
        return Err(Error::EmptyFrame);
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Config("epsilon must be non-negative".into()));
    }
    Ok(frame_values.iter().all(|&v| v >= center_value - epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub theta: f64,
    pub f: f64,
    pub evals: usize,
}

/// Approximately minimises `phi(theta) = f(x + theta h p / ||p||)` over
/// `theta >= 0`.
///
/// Starts from `theta = 1`, doubles while the value keeps decreasing or
/// halves until it decreases below `f_x`, then takes one quadratic
/// interpolation step through the bracketing triple. Uses at most
/// `max_evals` evaluations; `theta = 0` means no improvement was found.
pub fn line_search<F>(mut f: F, x: &[f64], p: &[f64], h: f64, f_x: f64, max_evals: usize) -> Result<LineSearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let none = LineSearchResult {
        theta: 0.0,
        f: f_x,
        evals: 0,
    };
    if norm == 0.0 || !norm.is_finite() || max_evals == 0 {
        return Ok(none);
    }
    let step: Vec<f64> = p.iter().map(|v| h * v / norm).collect();
    let mut evals = 0;
    let mut phi = |t: f64| -> Result<f64> {
        evals += 1;
        let pt: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi + t * si).collect();
        f(&pt)
    };

    let f1 = phi(1.0)?;
    let mut used = 1;
    // (a, b, c) with phi(b) below both ends once a bracket is found.
    let bracket;
    if f1 < f_x {
        let (mut a, mut fa, mut b, mut fb) = (0.0, f_x, 1.0, f1);
        let mut found = None;
        while used < max_evals {
            let t = 2.0 * b;
            let ft = phi(t)?;
            used += 1;
            if ft < fb {
                (a, fa, b, fb) = (b, fb, t, ft);
            } else {
                found = Some((a, fa, b, fb, t, ft));
                break;
            }
        }
        match found {
            Some(br) => bracket = br,
            None => {
                return Ok(LineSearchResult {
                    theta: b,
                    f: fb,
                    evals: used,
                })
            }
        }
    } else {
        let (mut c, mut fc) = (1.0, f1);
        let mut found = None;
        while used < max_evals {
            let t = 0.5 * c;
            let ft = phi(t)?;
            used += 1;
            if ft < f_x {
                found = Some((0.0, f_x, t, ft, c, fc));
                break;
            }
            (c, fc) = (t, ft);
        }
        match found {
            Some(br) => bracket = br,
            None => return Ok(LineSearchResult { evals: used, ..none }),
        }
    }

    let (a, fa, b, fb, c, fc) = bracket;
    let mut best = LineSearchResult {
        theta: b,
        f: fb,
        evals: used,
    };
    if used < max_evals {
        let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
        let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
        if den != 0.0 {
            let t = b - 0.5 * num / den;
            if t.is_finite() && t > a && t < c && t != b {
                let ft = phi(t)?;
                best.evals += 1;
                if ft < fb {
                    best.theta = t;
                    best.f = ft;
                }
            }
        }
    }
    Ok(best)
}

struct Tracker<F> {
    f: F,
    nf: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F, E> Tracker<F>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.nf += 1;
        let v = (self.f)(x).map_err(|e| Error::Evaluation {
            point: x.to_vec(),
            message: e.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::Evaluation {
                point: x.to_vec(),
                message: format!("non-finite value {v}"),
            });
        }
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        Ok(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs the solver on a registered objective from its standard start.
pub fn solve(objective: &Objective, config: &SolverConfig) -> Result<SolverResult> {
    solve_from(objective, &objective.standard_start, config)
}

pub fn solve_from(objective: &Objective, x0: &[f64], config: &SolverConfig) -> Result<SolverResult> {
    if x0.len() != objective.n {
        return Err(Error::Length {
            expected: objective.n,
            actual: x0.len(),
        });
    }
    solve_with(
        |x: &[f64]| Ok::<f64, std::convert::Infallible>(objective.evaluate(x)),
        x0,
        config,
    )
}

/// Runs the solver on an arbitrary fallible evaluator.
///
/// An evaluation failure stops the run; the partial result carries
/// [`StopReason::EvaluationFailed`].
pub fn solve_with<F, E>(f: F, x0: &[f64], config: &SolverConfig) -> Result<SolverResult>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    config.validate()?;
    let n = x0.len();
    // Validates n >= 2 as well.
    SamplingScheme::new(config.basis, n, config.h0)?;

    let mut tr = Tracker {
        f,
        nf: 0,
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
    };
    let mut result = SolverResult {
        fmin: f64::NAN,
        x_min: x0.to_vec(),
        gnorm: f64::NAN,
        h: config.h0,
        iterations: 0,
        qmf_count: 0,
        nf: 0,
        stop: StopReason::BudgetExhausted,
        trace: Vec::new(),
    };
    if config.budget == 0 {
        return Ok(result);
    }

    let stop = match run(&mut tr, x0, config, &mut result) {
        Ok(reason) => reason,
        Err(Error::Evaluation { point, message }) => StopReason::EvaluationFailed { point, message },
        Err(e) => return Err(e),
    };
    result.stop = stop;
    result.nf = tr.nf;
    if tr.best_f.is_finite() {
        result.fmin = tr.best_f;
        result.x_min = tr.best_x;
    }
    Ok(result)
}

fn run<F, E>(tr: &mut Tracker<F>, x0: &[f64], config: &SolverConfig, out: &mut SolverResult) -> Result<StopReason>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    let n = x0.len();
    let diag_method = config.diag_method();
    let mut x = x0.to_vec();
    let mut fx = tr.eval(&x)?;
    let mut h = config.h0;
    let mut j = n;
    let mut precond = vec![1.0; n];
    let mut g_prev: Option<Vec<f64>> = None;
    let mut p_prev: Vec<f64> = vec![0.0; n];
    let mut restart = true;

    loop {
        out.h = h;
        if h < config.h_min {
            return Ok(StopReason::RadiusBelowMinimum);
        }
        let scheme = SamplingScheme::with_options(config.basis, n, h, -1.0, ModelOrder::Quadratic)?;
        if tr.nf + scheme.num_samples() > config.budget {
            return Ok(StopReason::BudgetExhausted);
        }

        // Frame and derivative estimates.
        let points = sample_points(&x, &scheme)?;
        let mut values = Vec::with_capacity(points.len());
        for p in &points {
            values.push(tr.eval(p)?);
        }
        let samples = SampleSet::from_ordered(Some(fx), &values, &scheme)?;
        let est = estimate_from_samples(&samples, &scheme, diag_method)?;
        let g = est.g;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        out.gnorm = gnorm;

        let reset = j == 1;
        if reset {
            let d = est.d.expect("quadratic scheme yields a diagonal");
            for (hi, di) in precond.iter_mut().zip(&d) {
                *hi = 1.0 / di.max(config.diag_clamp);
            }
        }

        // Preconditioned direction.
        let hg: Vec<f64> = precond.iter().zip(&g).map(|(hi, gi)| hi * gi).collect();
        let mut beta = 0.0;
        if !restart {
            if let Some(gp) = &g_prev {
                let den: f64 = gp.iter().zip(&precond).map(|(gi, hi)| gi * hi * gi).sum();
                let lead = match config.beta {
                    BetaFormula::PolakRibiere => &g,
                    BetaFormula::PreviousGradient => gp,
                };
                let num: f64 = lead
                    .iter()
                    .zip(&precond)
                    .zip(gp.iter().zip(&g))
                    .map(|((li, hi), (gpi, gi))| li * hi * (gi - gpi))
                    .sum();
                if den > 0.0 && num.is_finite() {
                    beta = (num / den).max(0.0);
                }
            }
        }
        let mut p: Vec<f64> = hg.iter().zip(&p_prev).map(|(hgi, pi)| -hgi + beta * pi).collect();
        if dot(&p, &g) >= 0.0 {
            beta = 0.0;
            p = hg.iter().map(|v| -v).collect();
        }

        // Line search along p, scaled by the frame radius.
        let remaining = config.budget - tr.nf;
        let ls = line_search(
            |pt| tr.eval(pt),
            &x,
            &p,
            h,
            fx,
            config.line_search_budget.min(remaining),
        )?;

        let frame_eps = h.powf(config.qmf_epsilon_power);
        let quasi_minimal = is_quasi_minimal(&values, fx, frame_eps)?;

        let record = IterationRecord {
            k: out.iterations + 1,
            f_center: fx,
            f_best: tr.best_f,
            h,
            j,
            beta,
            theta: ls.theta,
            gnorm,
            nf: tr.nf,
            h_refreshed: reset,
            quasi_minimal,
            precond_min: precond.iter().copied().fold(f64::INFINITY, f64::min),
            precond_max: precond.iter().copied().fold(0.0, f64::max),
        };
        out.trace.push(record);
        out.iterations += 1;

        if reset {
            x = tr.best_x.clone();
            fx = tr.best_f;
            j = n + 3;
            restart = true;
        } else {
            j -= 1;
            restart = false;
            if ls.theta > 0.0 {
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (xi, pi) in x.iter_mut().zip(&p) {
                    *xi += ls.theta * h * pi / norm;
                }
                fx = ls.f;
            }
        }
        g_prev = Some(g);
        p_prev = p;

        if quasi_minimal {
            h /= config.lambda;
            out.qmf_count += 1;
        }
        if tr.nf >= config.budget {
            out.h = h;
            return Ok(StopReason::BudgetExhausted);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{diagonal_quadratic, rosenbrock};

    fn wrap(f: impl Fn(&[f64]) -> f64) -> impl FnMut(&[f64]) -> Result<f64> {
        move |x| Ok(f(x))
    }

    #[test]
    fn quasi_minimal_predicate() {
        assert!(is_quasi_minimal(&[2.0, 3.0], 1.0, 0.1).unwrap());
        assert!(!is_quasi_minimal(&[2.0, 0.5], 1.0, 0.1).unwrap());
        assert!(is_quasi_minimal(&[0.75, 2.0], 1.0, 0.25).unwrap());
        assert_eq!(is_quasi_minimal(&[], 1.0, 0.1), Err(Error::EmptyFrame));
    }

    #[test]
    fn line_search_on_quadratic_finds_vertex() {
        // phi(t) = (t - 2.7)^2 along the first axis with h = 1.
        let f = |x: &[f64]| (x[0] - 2.7).powi(2) + x[1] * x[1];
        let r = line_search(wrap(f), &[0.0, 0.0], &[3.0, 0.0], 1.0, f(&[0.0, 0.0]), 10).unwrap();
        assert!((r.theta - 2.7).abs() < 1e-6, "{r:?}");
        assert!(r.evals <= 10);

        // Minimiser inside (0, 1): found by halving.
        let f = |x: &[f64]| (x[0] - 0.3).powi(2);
        let r = line_search(wrap(f), &[0.0, 0.0], &[1.0, 0.0], 1.0, f(&[0.0, 0.0]), 10).unwrap();
        assert!((r.theta - 0.3).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn line_search_no_improvement() {
        let f = |x: &[f64]| x[0].abs();
        let r = line_search(wrap(f), &[0.0, 0.0], &[1.0, 0.0], 1.0, 0.0, 10).unwrap();
        assert_eq!(r.theta, 0.0);
        assert_eq!(r.evals, 10);
        let r = line_search(wrap(f), &[0.0, 0.0], &[0.0, 0.0], 1.0, 0.0, 10).unwrap();
        assert_eq!((r.theta, r.evals), (0.0, 0));
    }

    #[test]
    fn line_search_unbounded_ray_hits_budget() {
        let f = |x: &[f64]| -x[0];
        let r = line_search(wrap(f), &[0.0, 0.0], &[1.0, 0.0], 1.0, 0.0, 10).unwrap();
        assert_eq!(r.theta, 512.0);
        assert_eq!(r.evals, 10);
    }

    #[test]
    fn zero_budget_returns_start() {
        let cfg = SolverConfig {
            budget: 0,
            ..SolverConfig::default()
        };
        let r = solve(&rosenbrock(), &cfg).unwrap();
        assert_eq!(r.nf, 0);
        assert_eq!(r.x_min, vec![-1.2, 1.0]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            lambda: 1.0,
            ..SolverConfig::default()
        };
        assert!(solve(&rosenbrock(), &bad).is_err());
        let bad = SolverConfig {
            h_min: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve(&rosenbrock(), &bad).is_err());
    }

    #[test]
    fn evaluation_failure_stops_with_partial_trace() {
        let mut calls = 0;
        let f = |x: &[f64]| {
            calls += 1;
            if calls > 20 {
                Err("sensor offline")
            } else {
                Ok(x[0] * x[0] + x[1] * x[1])
            }
        };
        let r = solve_with(f, &[1.0, 1.0], &SolverConfig::default()).unwrap();
        assert!(matches!(r.stop, StopReason::EvaluationFailed { .. }));
        assert!(!r.trace.is_empty());
        assert!(r.fmin.is_finite());
    }

    #[test]
    fn diagonal_quadratic_converges() {
        let q = diagonal_quadratic((1..=5).map(f64::from).collect());
        for basis in BasisKind::ALL {
            let r = solve(&q, &SolverConfig::with_basis(basis)).unwrap();
            assert!(r.fmin <= 1e-10, "{basis}: {}", r.fmin);
            assert!(r.nf <= 1300);
        }
    }
}
