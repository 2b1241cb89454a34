//! Input/state trajectories and the data matrices built from them.

use nalgebra::{DMatrix, Scalar};
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{check_finite, numerical_rank, Real, Tolerance};

/// Recorded input/state pair `u(0..T-1)`, `x(0..T-1)`, stored column-per-sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S: Real> {
    inputs: DMatrix<S>,
    states: DMatrix<S>,
}

impl<S: Real> Trajectory<S> {
    /// `inputs` is m x T, `states` is n x T.
    pub fn new(inputs: DMatrix<S>, states: DMatrix<S>) -> Result<Self> {
        if inputs.ncols() != states.ncols() {
            return Err(Error::InvalidInput(format!(
                "input length {} differs from state length {}",
                inputs.ncols(),
                states.ncols()
            )));
        }
        if inputs.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectory needs at least 2 samples, got {}",
                inputs.ncols()
            )));
        }
        if inputs.nrows() == 0 || states.nrows() == 0 {
            return Err(Error::InvalidInput("empty input or state dimension".into()));
        }
        check_finite(&inputs, "input signal")?;
        check_finite(&states, "state signal")?;
        Ok(Trajectory { inputs, states })
    }

    pub fn inputs(&self) -> &DMatrix<S> {
        &self.inputs
    }

    pub fn states(&self) -> &DMatrix<S> {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }
}

/// Shifted data blocks `U0`, `X0`, `X1` (each with T-1 columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices<S: Real> {
    pub u0: DMatrix<S>,
    pub x0: DMatrix<S>,
    pub x1: DMatrix<S>,
}

impl<S: Real> DataMatrices<S> {
    pub fn input_dim(&self) -> usize {
        self.u0.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.x0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x0.ncols()
    }

    /// `[X0; U0]`.
    pub fn stacked(&self) -> DMatrix<S> {
        let (n, m, cols) = (self.state_dim(), self.input_dim(), self.samples());
        let mut d = DMatrix::zeros(n + m, cols);
        d.rows_mut(0, n).copy_from(&self.x0);
        d.rows_mut(n, m).copy_from(&self.u0);
        d
    }
}

/// Block-Hankel matrix with `depth` block rows of a signal stored column-per-sample.
/// Block (i, j) holds sample i + j.
pub fn hankel<T: Scalar + Zero>(signal: &DMatrix<T>, depth: usize) -> Result<DMatrix<T>> {
    let (sigma, len) = signal.shape();
    if depth == 0 || depth > len {
        return Err(Error::InvalidArgument(format!(
            "Hankel depth must satisfy 1 <= L <= T, got L={depth}, T={len}"
        )));
    }
    let cols = len - depth + 1;
    let mut h = DMatrix::zeros(depth * sigma, cols);
    for i in 0..depth {
        for j in 0..cols {
            h.view_mut((i * sigma, j), (sigma, 1))
                .copy_from(&signal.column(i + j));
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExcitationReport {
    pub persistently_exciting: bool,
    pub order: usize,
    pub rank: usize,
    pub required_rank: usize,
    pub columns: usize,
    /// False when the Hankel matrix has fewer columns than rows, which rules
    /// out persistency of excitation before any rank computation.
    pub enough_columns: bool,
}

/// Checks whether a signal is persistently exciting of order `order`.
pub fn is_persistently_exciting<S: Real>(
    signal: &DMatrix<S>,
    order: usize,
    tol: &Tolerance,
) -> Result<ExcitationReport> {
    let (sigma, len) = signal.shape();
    if sigma == 0 || len == 0 {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    let required_rank = sigma * order;
    if order == 0 || order > len {
        return Ok(ExcitationReport {
            persistently_exciting: false,
            order,
            rank: 0,
            required_rank,
            columns: (len + 1).saturating_sub(order),
            enough_columns: false,
        });
    }
    let h = hankel(signal, order)?;
    let columns = h.ncols();
    let rank = numerical_rank(&h, tol)?;
    let enough_columns = columns >= required_rank;
    Ok(ExcitationReport {
        persistently_exciting: enough_columns && rank == required_rank,
        order,
        rank,
        required_rank,
        columns,
        enough_columns,
    })
}

/// Splits a trajectory into consecutive-sample blocks:
/// `U0 = u(0..T-2)`, `X0 = x(0..T-2)`, `X1 = x(1..T-1)`.
pub fn extract_data_matrices<S: Real>(traj: &Trajectory<S>) -> Result<DataMatrices<S>> {
    let t = traj.len();
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "need T >= 2 samples, got {t}"
        )));
    }
    Ok(DataMatrices {
        u0: traj.inputs.columns(0, t - 1).into_owned(),
        x0: traj.states.columns(0, t - 1).into_owned(),
        x1: traj.states.columns(1, t - 1).into_owned(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub holds: bool,
    pub rank: usize,
    pub required_rank: usize,
}

/// Rank condition of the fundamental lemma: `rank [H1(x); Hd(u)] = n + d m`.
/// For `d = 1` this is `rank [X0; U0] = n + m` on the data blocks.
pub fn fundamental_lemma_check<S: Real>(
    dm: &DataMatrices<S>,
    depth: usize,
    traj: &Trajectory<S>,
    tol: &Tolerance,
) -> Result<LemmaReport> {
    if depth == 0 {
        return Err(Error::InvalidArgument("lemma depth must be >= 1".into()));
    }
    let (n, m) = (dm.state_dim(), dm.input_dim());
    let required_rank = n + depth * m;
    let stack = if depth == 1 {
        dm.stacked()
    } else {
        let t = traj.len();
        if depth > t {
            return Ok(LemmaReport {
                holds: false,
                rank: 0,
                required_rank,
            });
        }
        let cols = t - depth + 1;
        let hu = hankel(traj.inputs(), depth)?;
        let mut s = DMatrix::zeros(n + depth * m, cols);
        s.rows_mut(0, n)
            .copy_from(&traj.states().columns(0, cols));
        s.rows_mut(n, depth * m).copy_from(&hu);
        s
    };
    let rank = numerical_rank(&stack, tol)?;
    Ok(LemmaReport {
        holds: rank == required_rank,
        rank,
        required_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn hankel_scalar() {
        let h = hankel(&row(&[1., 2., 3., 4.]), 2).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 3, &[1., 2., 3., 2., 3., 4.]));
        assert_eq!(hankel(&row(&[5.]), 1).unwrap(), DMatrix::from_element(1, 1, 5.));
    }

    #[test]
    fn hankel_vector_signal() {
        let s = DMatrix::from_row_slice(2, 3, &[1., 2., 3., 10., 20., 30.]);
        let h = hankel(&s, 2).unwrap();
        let want = DMatrix::from_row_slice(4, 2, &[1., 2., 10., 20., 2., 3., 20., 30.]);
        assert_eq!(h, want);
    }

    #[test]
    fn hankel_depth_too_large() {
        assert!(matches!(
            hankel(&row(&[1., 2.]), 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pe_examples() {
        let tol = Tolerance::default();
        let c = is_persistently_exciting(&row(&[1., 1., 1., 1.]), 2, &tol).unwrap();
        assert!(!c.persistently_exciting);
        assert_eq!(c.rank, 1);
        let imp = is_persistently_exciting(&row(&[1., 0., 0., 0.]), 2, &tol).unwrap();
        assert!(!imp.persistently_exciting);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..9).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = is_persistently_exciting(&row(&v), 4, &tol).unwrap();
        assert!(r.persistently_exciting);
        assert_eq!((r.rank, r.required_rank, r.columns), (4, 4, 6));
    }

    #[test]
    fn pe_reports_too_few_columns() {
        let r = is_persistently_exciting(&row(&[1., -2., 0.5, 3.]), 3, &Tolerance::default()).unwrap();
        assert!(!r.enough_columns);
        assert!(!r.persistently_exciting);
    }

    #[test]
    fn data_blocks_are_consecutive() {
        let u = row(&[10., 11., 12.]);
        let x = DMatrix::from_row_slice(2, 3, &[0., 1., 2., 5., 6., 7.]);
        let traj = Trajectory::new(u, x).unwrap();
        let dm = extract_data_matrices(&traj).unwrap();
        assert_eq!(dm.u0, row(&[10., 11.]));
        assert_eq!(dm.x0, DMatrix::from_row_slice(2, 2, &[0., 1., 5., 6.]));
        assert_eq!(dm.x1, DMatrix::from_row_slice(2, 2, &[1., 2., 6., 7.]));

        let short = Trajectory::new(row(&[1., 2.]), row(&[3., 4.])).unwrap();
        assert_eq!(extract_data_matrices(&short).unwrap().samples(), 1);
    }

    #[test]
    fn trajectory_validation() {
        assert!(Trajectory::new(row(&[1.]), row(&[1.])).is_err());
        assert!(Trajectory::new(row(&[1., 2.]), row(&[1., 2., 3.])).is_err());
        assert!(Trajectory::new(row(&[1., f64::INFINITY]), row(&[1., 2.])).is_err());
    }

    #[test]
    fn lemma_fails_with_zero_input() {
        // x(t+1) = 0.5 x(t) + u(t), u = 0
        let x = row(&[1., 0.5, 0.25, 0.125, 0.0625]);
        let traj = Trajectory::new(row(&[0.; 5]), x).unwrap();
        let dm = extract_data_matrices(&traj).unwrap();
        let r = fundamental_lemma_check(&dm, 1, &traj, &Tolerance::default()).unwrap();
        assert!(!r.holds);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn lemma_fails_with_too_few_columns() {
        let traj = Trajectory::new(row(&[1., -1.]), row(&[0.3, 1.2])).unwrap();
        let dm = extract_data_matrices(&traj).unwrap();
        assert!(!fundamental_lemma_check(&dm, 1, &traj, &Tolerance::default()).unwrap().holds);
    }
}
