use dfderiv::bases::direction as basis_direction;
use dfderiv::fbpcg::{BetaFormula, StopReason};
use dfderiv::{
    BasisConstants, BasisKind, DerivativeEstimate, DiagMethod, ErrorBoundInput, EstimateOptions, ModelOrder, SampleSet,
    SamplingScheme, SolverConfig,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: dfderiv::Error) -> PyErr {
    match e {
        dfderiv::Error::Evaluation { .. } | dfderiv::Error::Singular { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn kind(s: &str) -> PyResult<BasisKind> {
    s.parse().map_err(err)
}

fn diag_method(central: bool) -> DiagMethod {
    if central {
        DiagMethod::Central
    } else {
        DiagMethod::LeastSquares
    }
}

fn scheme(basis: &str, n: usize, h: f64, eta: f64, model: &str) -> PyResult<SamplingScheme> {
    let model: ModelOrder = model.parse().map_err(err)?;
    SamplingScheme::with_options(kind(basis)?, n, h, eta, model).map_err(err)
}

fn estimate_dict<'py>(py: Python<'py>, e: &DerivativeEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("g", e.g.clone())?;
    d.set_item("d", e.d.clone())?;
    d.set_item("nf", e.total_evals())?;
    d.set_item("evals_used", e.evals_used)?;
    Ok(d)
}

/// `alpha, gamma, mu, omega, sigma` for dimension `n`.
#[pyfunction]
fn basis_constants(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyDict>> {
    let c = BasisConstants::new(n).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("alpha", c.alpha)?;
    d.set_item("gamma", c.gamma)?;
    d.set_item("mu", c.mu)?;
    d.set_item("omega", c.omega)?;
    d.set_item("sigma", c.sigma)?;
    Ok(d)
}

#[pyfunction]
fn direction(basis: &str, n: usize, j: usize) -> PyResult<Vec<f64>> {
    let c = BasisConstants::new(n).map_err(err)?;
    basis_direction(kind(basis)?, &c, j).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (x, basis, h, eta=-1.0, model="quadratic"))]
fn sample_points(x: Vec<f64>, basis: &str, h: f64, eta: f64, model: &str) -> PyResult<Vec<Vec<f64>>> {
    let s = scheme(basis, x.len(), h, eta, model)?;
    dfderiv::sample_points(&x, &s).map_err(err)
}

/// Estimates the gradient and Hessian diagonal of the callable `f` at `x`.
#[pyfunction]
#[pyo3(signature = (f, x, basis, h, eta=-1.0, model="quadratic", central_diag=false))]
#[allow(clippy::too_many_arguments)]
fn estimate<'py>(
    py: Python<'py>,
    f: &Bound<'py, PyAny>,
    x: Vec<f64>,
    basis: &str,
    h: f64,
    eta: f64,
    model: &str,
    central_diag: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scheme(basis, x.len(), h, eta, model)?;
    let mut raised: Option<PyErr> = None;
    let call = |p: &[f64]| -> Result<f64, String> {
        match f.call1((p.to_vec(),)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => Ok(v),
            Err(e) => {
                let msg = e.to_string();
                raised.get_or_insert(e);
                Err(msg)
            }
        }
    };
    let opts = EstimateOptions {
        diag: diag_method(central_diag),
        f0: None,
    };
    let result = dfderiv::estimate_with(call, &x, &s, opts);
    if let Some(e) = raised {
        return Err(e);
    }
    estimate_dict(py, &result.map_err(err)?)
}

/// `values` are laid out as returned by `sample_points`.
#[pyfunction]
#[pyo3(signature = (values, basis, h, f0=None, eta=-1.0, model="quadratic", central_diag=false))]
#[allow(clippy::too_many_arguments)]
fn estimate_from_samples<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    basis: &str,
    h: f64,
    f0: Option<f64>,
    eta: f64,
    model: &str,
    central_diag: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let k = kind(basis)?;
    let model_order: ModelOrder = model.parse().map_err(err)?;
    let per_dir = if model_order == ModelOrder::Quadratic { 2 } else { 1 };
    let extra = usize::from(k.is_minimal());
    if !values.len().is_multiple_of(per_dir) || values.len() / per_dir <= extra {
        return Err(PyValueError::new_err(format!(
            "{} values do not fit basis {basis}",
            values.len()
        )));
    }
    let n = values.len() / per_dir - extra;
    let s = scheme(basis, n, h, eta, model)?;
    let samples = SampleSet::from_ordered(f0, &values, &s).map_err(err)?;
    let e = dfderiv::estimate_from_samples(&samples, &s, diag_method(central_diag)).map_err(err)?;
    estimate_dict(py, &e)
}

#[pyfunction]
#[pyo3(signature = (basis, n, model="quadratic"))]
fn kappa(basis: &str, n: usize, model: &str) -> PyResult<f64> {
    let model: ModelOrder = model.parse().map_err(err)?;
    Ok(dfderiv::kappa(kind(basis)?, model, n))
}

#[pyfunction]
#[pyo3(signature = (lipschitz, h, n, basis, model="quadratic"))]
fn gradient_bound(lipschitz: f64, h: f64, n: usize, basis: &str, model: &str) -> PyResult<f64> {
    Ok(dfderiv::gradient_bound(&ErrorBoundInput {
        lipschitz,
        h,
        n,
        kind: kind(basis)?,
        model: model.parse().map_err(err)?,
    }))
}

/// Slope of `log(error)` against `log(h)`.
#[pyfunction]
fn observed_order(pairs: Vec<(f64, f64)>) -> PyResult<f64> {
    Ok(dfderiv::observed_order(&pairs).map_err(err)?.slope)
}

/// Runs the solver on a registered test problem.
#[pyfunction]
#[pyo3(signature = (problem, basis="cb", x0=None, budget=1300, beta="polak-ribiere"))]
fn solve<'py>(
    py: Python<'py>,
    problem: &str,
    basis: &str,
    x0: Option<Vec<f64>>,
    budget: usize,
    beta: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let obj = dfderiv::lookup(problem).map_err(err)?;
    let mut cfg = SolverConfig::with_basis(kind(basis)?);
    cfg.budget = budget;
    cfg.beta = match beta {
        "polak-ribiere" => BetaFormula::PolakRibiere,
        "previous-gradient" => BetaFormula::PreviousGradient,
        other => return Err(PyValueError::new_err(format!("unknown beta formula '{other}'"))),
    };
    let x0 = x0.unwrap_or_else(|| obj.standard_start.clone());
    let r = py.detach(|| dfderiv::solve_from(&obj, &x0, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("fmin", r.fmin)?;
    d.set_item("x_min", r.x_min)?;
    d.set_item("gnorm", r.gnorm)?;
    d.set_item("h", r.h)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("qmf_count", r.qmf_count)?;
    d.set_item("nf", r.nf)?;
    let stop = match r.stop {
        StopReason::RadiusBelowMinimum => "radius".to_string(),
        StopReason::BudgetExhausted => "budget".to_string(),
        StopReason::EvaluationFailed { message, .. } => format!("evaluation failed: {message}"),
    };
    d.set_item("stop", stop)?;
    Ok(d)
}

#[pymodule]
fn dfderiv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(basis_constants, m)?)?;
    m.add_function(wrap_pyfunction!(direction, m)?)?;
    m.add_function(wrap_pyfunction!(sample_points, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_from_samples, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_bound, m)?)?;
    m.add_function(wrap_pyfunction!(observed_order, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
