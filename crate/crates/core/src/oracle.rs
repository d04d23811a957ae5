//! Dense O(n^3) reference solver.
//!
//! Builds `U`, `W` (and their `+` forms) explicitly and solves the
//! interpolation systems with generic Gaussian elimination. It shares no code
//! with the closed forms in `estimators` apart from direction generation.

use crate::bases::{direction_into, BasisConstants};
use crate::error::{Error, Result};
use crate::sampling::{ModelOrder, SampleSet, SamplingScheme};

/// Condition estimates above this are reported as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting.
///
/// The condition estimate is the ratio of the largest to the smallest pivot
/// magnitude, which is a cheap lower bound on the true condition number.
pub fn solve_square(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    assert_eq!(a.cols, n, "solve_square needs a square matrix");
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;

    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))
            .unwrap();
        let piv = m[(p, k)].abs();
        max_pivot = max_pivot.max(piv);
        min_pivot = min_pivot.min(piv);
        if piv == 0.0 || max_pivot / min_pivot > CONDITION_LIMIT {
            return Err(Error::Singular {
                condition: if piv == 0.0 {
                    f64::INFINITY
                } else {
                    max_pivot / min_pivot
                },
            });
        }
        if p != k {
            for j in 0..n {
                m.data.swap(k * n + j, p * n + j);
            }
            rhs.swap(k, p);
        }
        for i in k + 1..n {
            let factor = m[(i, k)] / m[(k, k)];
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                let v = m[(k, j)];
                m[(i, j)] -= factor * v;
            }
            rhs[i] -= factor * rhs[k];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[(i, i)];
    }
    Ok(x)
}

/// Minimum-residual solution of `a x = b` with `a` of full column rank.
///
/// Square systems are solved directly; tall ones via normal equations.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.rows, b.len());
    if a.rows == a.cols {
        return solve_square(a, b);
    }
    let at = a.transpose();
    solve_square(&at.matmul(a), &at.matvec(b))
}

/// Explicit interpolation matrices for one scheme.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub scheme: SamplingScheme,
    /// `n x m` matrix of directions (`U`, `V`, `U_+` or `V_+`).
    pub u: Matrix,
    /// `n x m` matrix of Hadamard squares of the columns of `u`.
    pub w: Matrix,
}

pub fn assemble(scheme: &SamplingScheme) -> Result<AssembledSystem> {
    scheme.validate()?;
    let n = scheme.n;
    let m = scheme.num_directions();
    let consts = BasisConstants::new(n)?;
    let mut u = Matrix::zeros(n, m);
    let mut w = Matrix::zeros(n, m);
    let mut col = vec![0.0; n];
    for j in 0..m {
        direction_into(scheme.kind, &consts, j, &mut col)?;
        for i in 0..n {
            u[(i, j)] = col[i];
            w[(i, j)] = col[i] * col[i];
        }
    }
    Ok(AssembledSystem { scheme: *scheme, u, w })
}

impl AssembledSystem {
    fn centered(&self, values: &[f64], f0: f64) -> Vec<f64> {
        values.iter().map(|&v| v - f0).collect()
    }

    /// Solves the block system for `(g, d)`.
    ///
    /// The stacked rows `[h U^T, h^2/2 W^T; eta h U^T, eta^2 h^2/2 W^T]` are
    /// decoupled by the block row operations (first block row times `eta^2`
    /// minus the second, and times `eta` minus the second); each decoupled
    /// block is then solved in the least-squares sense.
    pub fn solve_quadratic(&self, samples: &SampleSet) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = &self.scheme;
        if s.model != ModelOrder::Quadratic {
            return Err(Error::Contract("quadratic solve on a linear scheme".into()));
        }
        samples.check_lengths(s)?;
        let f0 = samples.f0.ok_or_else(|| Error::Contract("f(x) required".into()))?;
        let fp = samples
            .fprime
            .as_ref()
            .ok_or_else(|| Error::Contract("eta h block required".into()))?;
        let df = self.centered(&samples.f, f0);
        let dfp = self.centered(fp, f0);
        let (h, eta) = (s.h, s.eta);
        let m = self.u.cols;

        // Row-operated right-hand sides and coefficient blocks.
        let rhs_g: Vec<f64> = (0..m).map(|j| eta * eta * df[j] - dfp[j]).collect();
        let rhs_d: Vec<f64> = (0..m).map(|j| eta * df[j] - dfp[j]).collect();
        let mut a_g = self.u.transpose();
        a_g.data.iter_mut().for_each(|v| *v *= (eta * eta - eta) * h);
        let mut a_d = self.w.transpose();
        a_d.data.iter_mut().for_each(|v| *v *= 0.5 * h * h * (eta - eta * eta));

        Ok((least_squares(&a_g, &rhs_g)?, least_squares(&a_d, &rhs_d)?))
    }

    /// Least-squares solution of `df = h U^T g`.
    pub fn solve_linear(&self, samples: &SampleSet) -> Result<Vec<f64>> {
        samples.check_lengths(&self.scheme)?;
        // The columns of a minimal positive basis sum to zero, so the
        // solution does not depend on f(x).
        let f0 = match samples.f0 {
            Some(v) => v,
            None if !self.scheme.needs_center() => 0.0,
            None => return Err(Error::Contract("f(x) required".into())),
        };
        let df = self.centered(&samples.f, f0);
        let mut a = self.u.transpose();
        a.data.iter_mut().for_each(|v| *v *= self.scheme.h);
        least_squares(&a, &df)
    }

    /// Interpolation residual `||A x - b||` of the quadratic model over both
    /// blocks, undecoupled.
    pub fn quadratic_residual(&self, samples: &SampleSet, g: &[f64], d: &[f64]) -> Result<f64> {
        let s = &self.scheme;
        let f0 = samples.f0.ok_or_else(|| Error::Contract("f(x) required".into()))?;
        let fp = samples
            .fprime
            .as_ref()
            .ok_or_else(|| Error::Contract("eta h block required".into()))?;
        let ug = self.u.transpose().matvec(g);
        let wd = self.w.transpose().matvec(d);
        let mut sq = 0.0;
        for (r, vals) in [(s.h, &samples.f), (s.eta * s.h, fp)] {
            for j in 0..self.u.cols {
                let model = r * ug[j] + 0.5 * r * r * wd[j];
                sq += (model - (vals[j] - f0)).powi(2);
            }
        }
        Ok(sq.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::BasisKind;

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn coordinate_matrices_are_identity() {
        let sys = assemble(&SamplingScheme::new(BasisKind::Coordinate, 3, 1.0).unwrap()).unwrap();
        assert_eq!(sys.u, Matrix::identity(3));
        assert_eq!(sys.w, Matrix::identity(3));
    }

    #[test]
    fn regular_minimal_last_w_column() {
        let sys = assemble(&SamplingScheme::new(BasisKind::RegularMinimal, 2, 1.0).unwrap()).unwrap();
        let last = sys.w.column(2);
        assert!((last[0] - 0.5).abs() < 1e-15 && (last[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regular_w_has_rank_one_structure() {
        for n in [2, 3, 7, 40] {
            let c = BasisConstants::new(n).unwrap();
            let sys = assemble(&SamplingScheme::new(BasisKind::Regular, n, 1.0).unwrap()).unwrap();
            let mut want = Matrix::identity(n);
            want.data.iter_mut().for_each(|v| *v = c.mu * (*v + c.omega));
            assert!(max_abs_diff(&sys.w, &want) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn coordinate_minimal_gram_and_inverse() {
        for n in [2, 5, 100] {
            let sys = assemble(&SamplingScheme::new(BasisKind::CoordinateMinimal, n, 1.0).unwrap()).unwrap();
            let gram = sys.u.matmul(&sys.u.transpose());
            let mut want = Matrix::identity(n);
            want.data.iter_mut().for_each(|v| *v += 1.0);
            assert!(max_abs_diff(&gram, &want) < 1e-12);
            let mut inv = Matrix::identity(n);
            inv.data.iter_mut().for_each(|v| *v -= 1.0 / (n as f64 + 1.0));
            assert!(max_abs_diff(&gram.matmul(&inv), &Matrix::identity(n)) < 1e-12);
        }
    }

    #[test]
    fn regular_minimal_grams() {
        for n in [2, 3, 10, 60] {
            let c = BasisConstants::new(n).unwrap();
            let sys = assemble(&SamplingScheme::new(BasisKind::RegularMinimal, n, 1.0).unwrap()).unwrap();
            let uu = sys.u.matmul(&sys.u.transpose());
            let mut want = Matrix::identity(n);
            want.data.iter_mut().for_each(|v| *v *= c.alpha * c.alpha);
            assert!(max_abs_diff(&uu, &want) < 1e-12);
            let ww = sys.w.matmul(&sys.w.transpose());
            let mut want = Matrix::identity(n);
            want.data.iter_mut().for_each(|v| *v = c.mu * c.mu * (*v + c.sigma));
            assert!(max_abs_diff(&ww, &want) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn square_solver_and_singularity() {
        let mut a = Matrix::zeros(2, 2);
        a.data = vec![0.0, 2.0, 3.0, 1.0];
        let x = solve_square(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let mut s = Matrix::zeros(2, 2);
        s.data = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(solve_square(&s, &[1.0, 1.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn diagonal_quadratic_is_recovered() {
        let a = [3.0, 0.5, -2.0];
        let f = |x: &[f64]| 0.5 * x.iter().zip(&a).map(|(xi, ai)| ai * xi * xi).sum::<f64>();
        let x = [0.5, -1.0, 2.0];
        let s = SamplingScheme::new(BasisKind::Coordinate, 3, 0.1).unwrap();
        let sys = assemble(&s).unwrap();
        let pts = crate::sampling::sample_points(&x, &s).unwrap();
        let vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        let samples = SampleSet::from_ordered(Some(f(&x)), &vals, &s).unwrap();
        let (g, d) = sys.solve_quadratic(&samples).unwrap();
        for i in 0..3 {
            assert!((g[i] - a[i] * x[i]).abs() < 1e-12);
            assert!((d[i] - a[i]).abs() < 1e-10);
        }
        assert!(sys.quadratic_residual(&samples, &g, &d).unwrap() < 1e-14);
    }
}
