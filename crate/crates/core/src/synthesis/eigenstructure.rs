use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use super::place::{assemble, check_data};
use super::{GainResult, PoleSpec};
use crate::error::{Error, Result};
use crate::numerics::{lit, pseudoinverse, to_complex, to_f64, CMatrix, Real, Tolerance};
use crate::signals::DataMatrices;

/// Least-squares solution of `[X1 - lambda X0; X0] m = [0; x]` and its residual.
fn solve_column<T: ComplexField>(
    x0: &DMatrix<T>,
    x1: &DMatrix<T>,
    lambda: T,
    target: &DVector<T>,
    tol: &Tolerance,
) -> Result<(DVector<T>, T::RealField)> {
    let n = x0.nrows();
    let mut lhs = DMatrix::zeros(2 * n, x0.ncols());
    lhs.rows_mut(0, n).copy_from(&(x1 - x0 * lambda));
    lhs.rows_mut(n, n).copy_from(x0);
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(n, n).copy_from(target);
    let col = pseudoinverse(&lhs, tol)? * &rhs;
    let residual = (&lhs * &col - rhs).norm();
    Ok((col, residual))
}

/// Eigenstructure assignment from data: finds `M` with
/// `(X1 - lambda_i X0) m_i = 0` and `X0 M = X`, then `K = -U0 M (X0 M)^+`.
///
/// A column is accepted only if its residual is at most
/// `residual_tol * (1 + ||x_i||)`; otherwise `x_i` is not reachable by any
/// static feedback on this plant.
pub fn assign_eigenstructure<S: Real>(
    dm: &DataMatrices<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<GainResult<S>> {
    let x = spec.eigenvectors().ok_or_else(|| {
        Error::InvalidArgument("eigenstructure assignment needs an eigenvector matrix".into())
    })?;
    check_data(dm, spec, tol)?;
    let partners = spec.conjugate_column_pairs()?;
    let (n, samples) = (dm.state_dim(), dm.samples());
    let x0c = to_complex(&dm.x0);
    let x1c = to_complex(&dm.x1);
    let bound = |xi: S| lit::<S>(tol.residual_tol) * (S::one() + xi);

    let mut m_real = DMatrix::<S>::zeros(samples, n);
    let mut m_complex = CMatrix::<S>::zeros(samples, n);
    for (i, pole) in spec.poles().iter().enumerate() {
        let xi = x.column(i).into_owned();
        if pole.im == S::zero() {
            let target = xi.map(|z| z.re);
            let (col, residual) = solve_column(&dm.x0, &dm.x1, pole.re, &target, tol)?;
            if residual > bound(target.norm()) {
                return Err(Error::InfeasibleEigenvector {
                    index: i,
                    residual: to_f64(residual),
                });
            }
            m_complex.set_column(i, &col.map(|v| Complex::new(v, S::zero())));
            m_real.set_column(i, &col);
        } else if pole.im > S::zero() {
            let (col, residual) = solve_column(&x0c, &x1c, *pole, &xi, tol)?;
            if residual > bound(xi.norm()) {
                return Err(Error::InfeasibleEigenvector {
                    index: i,
                    residual: to_f64(residual),
                });
            }
            let j = partners[i].expect("validated conjugate pairing");
            m_real.set_column(i, &col.map(|z| z.re));
            m_real.set_column(j, &col.map(|z| z.im));
            m_complex.set_column(j, &col.map(|z| z.conj()));
            m_complex.set_column(i, &col);
        }
    }
    assemble(dm, spec, m_real, Some(&m_complex), tol)
}
