use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    c64, condition_number, eigendecomposition, numerical_rank, pseudoinverse, to_complex, to_f64,
    Real, Tolerance,
};
use crate::plant::{closed_loop, LtiSystem};
use crate::signals::DataMatrices;

/// Sensitivity of a closed-loop spectrum to perturbations of the closed-loop matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub eigenvalues: Vec<Complex64>,
    /// 2-norm condition number of the unit-column eigenvector matrix.
    pub eigvec_condition: f64,
    /// Wilkinson condition number of each eigenvalue, in `eigenvalues` order.
    pub per_pole_condition: Vec<f64>,
}

pub fn closed_loop_diagnostics<S: Real>(a_cl: &DMatrix<S>, tol: &Tolerance) -> Result<Diagnostics> {
    let n = a_cl.nrows();
    let eig = eigendecomposition(&to_complex(a_cl), tol)?;
    let v = &eig.vectors;
    if numerical_rank(v, tol)? < n {
        return Err(Error::Unsupported(
            "closed loop is defective; eigenvector matrix is singular".into(),
        ));
    }
    let v_inv = v.clone().try_inverse().ok_or_else(|| {
        Error::Unsupported("closed loop is defective; eigenvector matrix is singular".into())
    })?;
    // Rows of V^-1 are left eigenvectors normalized so that y_i^* x_i = 1.
    let per_pole_condition = (0..n)
        .map(|i| (to_f64(v.column(i).norm()) * to_f64(v_inv.row(i).norm())).max(1.0))
        .collect();
    Ok(Diagnostics {
        eigenvalues: eig.values.iter().map(|z| c64(*z)).collect(),
        eigvec_condition: condition_number(v)?,
        per_pole_condition,
    })
}

pub fn diagnostics_from_system<S: Real>(
    sys: &LtiSystem<S>,
    gain: &DMatrix<S>,
    tol: &Tolerance,
) -> Result<Diagnostics> {
    closed_loop_diagnostics(closed_loop(sys, gain)?.a(), tol)
}

pub fn diagnostics_from_data<S: Real>(
    dm: &DataMatrices<S>,
    gain: &DMatrix<S>,
    tol: &Tolerance,
) -> Result<Diagnostics> {
    closed_loop_diagnostics(&data_closed_loop(dm, gain, tol)?, tol)
}

/// Closed loop implied by the data: `X1 [X0; U0]^+ [I; -K]`.
pub fn data_closed_loop<S: Real>(
    dm: &DataMatrices<S>,
    gain: &DMatrix<S>,
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    data_closed_loop_with(dm, &pseudoinverse(&dm.stacked(), tol)?, gain)
}

pub(crate) fn data_closed_loop_with<S: Real>(
    dm: &DataMatrices<S>,
    stacked_pinv: &DMatrix<S>,
    gain: &DMatrix<S>,
) -> Result<DMatrix<S>> {
    let (n, m) = (dm.state_dim(), dm.input_dim());
    if gain.shape() != (m, n) {
        return Err(Error::InvalidArgument(format!(
            "gain must be {m}x{n}, got {}x{}",
            gain.nrows(),
            gain.ncols()
        )));
    }
    let mut feedback = DMatrix::zeros(n + m, n);
    feedback.rows_mut(0, n).fill_with_identity();
    feedback.rows_mut(n, m).copy_from(&(-gain));
    Ok(&dm.x1 * stacked_pinv * feedback)
}
