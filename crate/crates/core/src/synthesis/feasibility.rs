use nalgebra::DMatrix;

use super::PoleSpec;
use crate::error::{Error, Result};
use crate::numerics::{pseudoinverse, range_basis, real_part, to_f64, Real, Tolerance};
use crate::signals::DataMatrices;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Orthonormal basis (n x m) of `range(X1 [X0; U0]^+ [0; I_m])`.
    pub range_basis: DMatrix<f64>,
    /// Frobenius norm of the component of `A - X Lambda X^-1` outside the range.
    pub residual: f64,
    /// Frobenius norm of `A - X Lambda X^-1`.
    pub delta_norm: f64,
}

/// Orthonormal basis of `range(X1 [X0; U0]^+ [0; I_m])`, which equals `range(B)`
/// for exciting data from a controllable plant.
pub fn input_range_basis<S: Real>(dm: &DataMatrices<S>, tol: &Tolerance) -> Result<DMatrix<S>> {
    let (n, m) = (dm.state_dim(), dm.input_dim());
    let pinv = pseudoinverse(&dm.stacked(), tol)?;
    let response = &dm.x1 * pinv.columns(n, m);
    range_basis(&response, tol)
}

/// Checks whether `A - X Lambda X^-1` lies in the input range estimated from data.
///
/// Feasible when the out-of-range residual is at most
/// `residual_tol * (||A||_F + ||X Lambda X^-1||_F)`; the scale includes both
/// terms so that round-off in forming the difference does not count as infeasibility.
pub fn feasibility_report<S: Real>(
    dm: &DataMatrices<S>,
    a: &DMatrix<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<FeasibilityReport> {
    let n = dm.state_dim();
    if a.shape() != (n, n) {
        return Err(Error::InvalidArgument(format!(
            "A must be {n}x{n}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if spec.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} poles for a {n}-state system",
            spec.len()
        )));
    }
    let (target, imag) = real_part(&spec.target_matrix()?);
    let target_norm = to_f64(target.norm());
    if to_f64(imag) > tol.residual_tol * (1.0 + target_norm) {
        return Err(Error::InvalidArgument(
            "X Lambda X^-1 is not real; eigenvectors are not conjugate-consistent".into(),
        ));
    }
    let delta = a - target;
    let basis = input_range_basis(dm, tol)?;
    let outside = &delta - &basis * (basis.transpose() * &delta);
    let residual = to_f64(outside.norm());
    let scale = to_f64(a.norm()) + target_norm;
    Ok(FeasibilityReport {
        feasible: residual <= tol.residual_tol * scale,
        range_basis: basis.map(to_f64),
        residual,
        delta_norm: to_f64(delta.norm()),
    })
}
