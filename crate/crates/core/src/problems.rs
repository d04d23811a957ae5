//! Test objectives with analytic derivatives.
//!
//! The least-squares problems are written as residual vectors `r(x)` with
//! Jacobian `J(x)`; then `f = r^T r` and `grad f = 2 J^T r`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
pub struct Objective {
    pub name: &'static str,
    pub n: usize,
    evaluate: ScalarFn,
    gradient: Option<VectorFn>,
    hessian: Option<MatrixFn>,
    pub standard_start: Vec<f64>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("has_gradient", &self.gradient.is_some())
            .field("has_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl Objective {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradient
            .as_ref()
            .map(|g| g(x))
            .ok_or_else(|| Error::Unsupported(format!("{} has no analytic gradient", self.name)))
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.hessian
            .as_ref()
            .map(|h| h(x))
            .ok_or_else(|| Error::Unsupported(format!("{} has no analytic Hessian", self.name)))
    }

    pub fn diag_hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.hessian(x)?;
        Ok((0..self.n).map(|i| h[i][i]).collect())
    }

    /// Wraps the objective with an evaluation counter.
    pub fn counted(&self) -> Counted<'_> {
        Counted {
            objective: self,
            count: 0,
        }
    }
}

/// Evaluation counter owned by a single run.
#[derive(Debug)]
pub struct Counted<'a> {
    pub objective: &'a Objective,
    count: usize,
}

impl Counted<'_> {
    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.count += 1;
        self.objective.evaluate(x)
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

fn sum_of_squares<R, J>(name: &'static str, n: usize, start: Vec<f64>, residuals: R, jacobian: J) -> Objective
where
    R: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    J: Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
{
    let residuals = Arc::new(residuals);
    let r2 = Arc::clone(&residuals);
    Objective {
        name,
        n,
        evaluate: Arc::new(move |x| residuals(x).iter().map(|r| r * r).sum()),
        gradient: Some(Arc::new(move |x| {
            let r = r2(x);
            let jac = jacobian(x);
            (0..x.len())
                .map(|j| 2.0 * r.iter().zip(&jac).map(|(ri, row)| ri * row[j]).sum::<f64>())
                .collect()
        })),
        hessian: None,
        standard_start: start,
    }
}

/// `(1 - x1)^2 + 100 (x2 - x1^2)^2`.
pub fn rosenbrock() -> Objective {
    Objective {
        name: "rosenbrock",
        n: 2,
        evaluate: Arc::new(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)),
        gradient: Some(Arc::new(|x| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        })),
        hessian: Some(Arc::new(|x| {
            vec![
                vec![2.0 - 400.0 * x[1] + 1200.0 * x[0] * x[0], -400.0 * x[0]],
                vec![-400.0 * x[0], 200.0],
            ]
        })),
        standard_start: vec![-1.2, 1.0],
    }
}

pub fn freudenstein_roth() -> Objective {
    sum_of_squares(
        "freudenstein_roth",
        2,
        vec![0.5, -2.0],
        |x| {
            vec![
                -13.0 + x[0] + ((5.0 - x[1]) * x[1] - 2.0) * x[1],
                -29.0 + x[0] + ((x[1] + 1.0) * x[1] - 14.0) * x[1],
            ]
        },
        |x| {
            vec![
                vec![1.0, 10.0 * x[1] - 3.0 * x[1] * x[1] - 2.0],
                vec![1.0, 3.0 * x[1] * x[1] + 2.0 * x[1] - 14.0],
            ]
        },
    )
}

pub fn beale() -> Objective {
    const Y: [f64; 3] = [1.5, 2.25, 2.625];
    sum_of_squares(
        "beale",
        2,
        vec![1.0, 1.0],
        |x| (1..=3).map(|i| Y[i - 1] - x[0] * (1.0 - x[1].powi(i as i32))).collect(),
        |x| {
            (1..=3)
                .map(|i| {
                    let fi = i as f64;
                    vec![-(1.0 - x[1].powi(i)), x[0] * fi * x[1].powi(i - 1)]
                })
                .collect()
        },
    )
}

/// Angle term of the helical valley function, with the usual branch on the
/// sign of `x1` (discontinuous across the half-plane `x1 < 0, x2 = 0`).
fn helix_theta(x1: f64, x2: f64) -> f64 {
    if x1 > 0.0 {
        (x2 / x1).atan() / (2.0 * PI)
    } else if x1 < 0.0 {
        (x2 / x1).atan() / (2.0 * PI) + 0.5
    } else {
        0.25f64.copysign(x2)
    }
}

pub fn helical_valley() -> Objective {
    sum_of_squares(
        "helical_valley",
        3,
        vec![-1.0, 0.0, 0.0],
        |x| {
            vec![
                10.0 * (x[2] - 10.0 * helix_theta(x[0], x[1])),
                10.0 * ((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0),
                x[2],
            ]
        },
        |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let rho = r2.sqrt();
            let dt1 = -x[1] / (2.0 * PI * r2);
            let dt2 = x[0] / (2.0 * PI * r2);
            vec![
                vec![-100.0 * dt1, -100.0 * dt2, 10.0],
                vec![10.0 * x[0] / rho, 10.0 * x[1] / rho, 0.0],
                vec![0.0, 0.0, 1.0],
            ]
        },
    )
}

pub fn powell_singular() -> Objective {
    let s5 = 5f64.sqrt();
    let s10 = 10f64.sqrt();
    sum_of_squares(
        "powell_singular",
        4,
        vec![3.0, -1.0, 0.0, 1.0],
        move |x| {
            vec![
                x[0] + 10.0 * x[1],
                s5 * (x[2] - x[3]),
                (x[1] - 2.0 * x[2]).powi(2),
                s10 * (x[0] - x[3]).powi(2),
            ]
        },
        move |x| {
            let a = x[1] - 2.0 * x[2];
            let b = x[0] - x[3];
            vec![
                vec![1.0, 10.0, 0.0, 0.0],
                vec![0.0, 0.0, s5, -s5],
                vec![0.0, 2.0 * a, -4.0 * a, 0.0],
                vec![2.0 * s10 * b, 0.0, 0.0, -2.0 * s10 * b],
            ]
        },
    )
}

pub fn wood() -> Objective {
    let s90 = 90f64.sqrt();
    let s10 = 10f64.sqrt();
    sum_of_squares(
        "wood",
        4,
        vec![-3.0, -1.0, -3.0, -1.0],
        move |x| {
            vec![
                10.0 * (x[1] - x[0] * x[0]),
                1.0 - x[0],
                s90 * (x[3] - x[2] * x[2]),
                1.0 - x[2],
                s10 * (x[1] + x[3] - 2.0),
                (x[1] - x[3]) / s10,
            ]
        },
        move |x| {
            vec![
                vec![-20.0 * x[0], 10.0, 0.0, 0.0],
                vec![-1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, -2.0 * s90 * x[2], s90],
                vec![0.0, 0.0, -1.0, 0.0],
                vec![0.0, s10, 0.0, s10],
                vec![0.0, 1.0 / s10, 0.0, -1.0 / s10],
            ]
        },
    )
}

pub fn trigonometric(n: usize) -> Objective {
    sum_of_squares(
        "trigonometric",
        n,
        vec![1.0 / n as f64; n],
        move |x| {
            let cos_sum: f64 = x.iter().map(|v| v.cos()).sum();
            (0..n)
                .map(|i| n as f64 - cos_sum + (i + 1) as f64 * (1.0 - x[i].cos()) - x[i].sin())
                .collect()
        },
        move |x| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let mut v = x[j].sin();
                            if i == j {
                                v += (i + 1) as f64 * x[i].sin() - x[i].cos();
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        },
    )
}

pub fn brown_almost_linear(n: usize) -> Objective {
    sum_of_squares(
        "brown_almost_linear",
        n,
        vec![0.5; n],
        move |x| {
            let sum: f64 = x.iter().sum();
            let mut r: Vec<f64> = (0..n - 1).map(|i| x[i] + sum - (n as f64 + 1.0)).collect();
            r.push(x.iter().product::<f64>() - 1.0);
            r
        },
        move |x| {
            let mut jac: Vec<Vec<f64>> = (0..n - 1)
                .map(|i| (0..n).map(|j| if i == j { 2.0 } else { 1.0 }).collect())
                .collect();
            jac.push(
                (0..n)
                    .map(|j| x.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, v)| v).product())
                    .collect(),
            );
            jac
        },
    )
}

pub fn broyden_tridiagonal(n: usize) -> Objective {
    sum_of_squares(
        "broyden_tridiagonal",
        n,
        vec![-1.0; n],
        move |x| {
            (0..n)
                .map(|i| {
                    let prev = if i > 0 { x[i - 1] } else { 0.0 };
                    let next = if i + 1 < n { x[i + 1] } else { 0.0 };
                    (3.0 - 2.0 * x[i]) * x[i] - prev - 2.0 * next + 1.0
                })
                .collect()
        },
        move |x| {
            (0..n)
                .map(|i| {
                    let mut row = vec![0.0; n];
                    row[i] = 3.0 - 4.0 * x[i];
                    if i > 0 {
                        row[i - 1] = -1.0;
                    }
                    if i + 1 < n {
                        row[i + 1] = -2.0;
                    }
                    row
                })
                .collect()
        },
    )
}

/// `0.5 sum_i a_i x_i^2`, minimised at the origin.
pub fn diagonal_quadratic(a: Vec<f64>) -> Objective {
    let n = a.len();
    let a = Arc::new(a);
    let (a1, a2, a3) = (Arc::clone(&a), Arc::clone(&a), Arc::clone(&a));
    Objective {
        name: "diagonal_quadratic",
        n,
        evaluate: Arc::new(move |x| 0.5 * x.iter().zip(a1.iter()).map(|(xi, ai)| ai * xi * xi).sum::<f64>()),
        gradient: Some(Arc::new(move |x| {
            x.iter().zip(a2.iter()).map(|(xi, ai)| ai * xi).collect()
        })),
        hessian: Some(Arc::new(move |_| {
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { a3[i] } else { 0.0 }).collect())
                .collect()
        })),
        standard_start: vec![1.0; n],
    }
}

/// The shipped problems, in the order of the benchmark table.
pub fn registry() -> Vec<Objective> {
    vec![
        rosenbrock(),
        freudenstein_roth(),
        beale(),
        helical_valley(),
        powell_singular(),
        wood(),
        trigonometric(2),
        brown_almost_linear(2),
        broyden_tridiagonal(20),
    ]
}

pub fn lookup(name: &str) -> Result<Objective> {
    let key = name.to_ascii_lowercase().replace('-', "_");
    registry()
        .into_iter()
        .find(|o| o.name == key)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_reference_values() {
        let r = rosenbrock();
        assert_eq!(r.evaluate(&[1.0, 1.0]), 0.0);
        assert_eq!(r.gradient(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);

        let x = [1.1, 1.1 * 1.1 + 1e-5];
        let g = r.gradient(&x).unwrap();
        assert!((g[0] - 0.19559999).abs() < 1e-8 && (g[1] - 0.002).abs() < 1e-10);
        let d = r.diag_hessian(&x).unwrap();
        assert!((d[0] - 969.996).abs() < 1e-9 && d[1] == 200.0);

        let x = [0.9, 0.81];
        let g = r.gradient(&x).unwrap();
        assert!((g[0] + 0.2).abs() < 1e-12 && g[1].abs() < 1e-12);
        let d = r.diag_hessian(&x).unwrap();
        assert!((d[0] - 650.0).abs() < 1e-9);
    }

    #[test]
    fn registry_dimensions() {
        let reg = registry();
        assert_eq!(reg.len(), 9);
        assert_eq!(lookup("rosenbrock").unwrap().n, 2);
        assert_eq!(lookup("broyden_tridiagonal").unwrap().n, 20);
        assert_eq!(lookup("helical-valley").unwrap().n, 3);
        assert_eq!(lookup("trigonometric").unwrap().n, 2);
        assert!(matches!(lookup("bard"), Err(Error::UnknownProblem(_))));
        for o in &reg {
            assert_eq!(o.standard_start.len(), o.n, "{}", o.name);
        }
    }

    #[test]
    fn known_minima() {
        assert!(beale().evaluate(&[3.0, 0.5]).abs() < 1e-30);
        assert!(freudenstein_roth().evaluate(&[5.0, 4.0]).abs() < 1e-30);
        assert!(helical_valley().evaluate(&[1.0, 0.0, 0.0]).abs() < 1e-30);
        assert!(powell_singular().evaluate(&[0.0; 4]).abs() < 1e-30);
        assert!(wood().evaluate(&[1.0; 4]).abs() < 1e-30);
        assert!(brown_almost_linear(2).evaluate(&[1.0, 1.0]).abs() < 1e-30);
        assert!(trigonometric(2).evaluate(&[0.0, 0.0]).abs() < 1e-30);
    }

    #[test]
    fn wood_matches_expanded_form() {
        let x: [f64; 4] = [0.3, -1.2, 2.0, 0.7];
        let direct = 100.0 * (x[1] - x[0] * x[0]).powi(2)
            + (1.0 - x[0]).powi(2)
            + 90.0 * (x[3] - x[2] * x[2]).powi(2)
            + (1.0 - x[2]).powi(2)
            + 10.1 * ((x[1] - 1.0).powi(2) + (x[3] - 1.0).powi(2))
            + 19.8 * (x[1] - 1.0) * (x[3] - 1.0);
        assert!((wood().evaluate(&x) - direct).abs() < 1e-10 * direct.abs());
    }

    #[test]
    fn counter_counts_each_call() {
        let r = rosenbrock();
        let mut c = r.counted();
        c.eval(&[0.0, 0.0]);
        c.eval(&[0.0, 0.0]);
        assert_eq!(c.count(), 2);
    }

    #[test]
    fn missing_derivatives_are_unsupported() {
        let b = beale();
        assert!(b.has_gradient());
        assert!(matches!(b.hessian(&[0.0, 0.0]), Err(Error::Unsupported(_))));
    }
}
