//! State-feedback synthesis computed directly from input/state data.
//!
//! With data blocks `U0`, `X0`, `X1` from a controllable plant and a
//! sufficiently exciting input, every column `m_i` of `M` chosen in the
//! nullspace of `X1 - lambda_i X0` satisfies
//! `(A - B K - lambda_i I) X0 m_i = 0` for `K = -U0 M (X0 M)^+`, provided
//! `X0 M` is invertible. [`place_poles`] picks such columns; [`assign_eigenstructure`]
//! additionally pins `X0 M` to a prescribed eigenvector matrix.

mod diagnostics;
mod eigenstructure;
mod feasibility;
mod matching;
mod place;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::{check_finite, lit, numerical_rank, CMatrix, Real, Tolerance};

pub use diagnostics::{
    closed_loop_diagnostics, data_closed_loop, diagnostics_from_data, diagnostics_from_system,
    Diagnostics,
};
pub use eigenstructure::assign_eigenstructure;
pub use feasibility::{feasibility_report, input_range_basis, FeasibilityReport};
pub use matching::{pole_error, PoleError};
pub use place::{place_poles, place_poles_with, PlaceOptions};

/// Relative tolerance for deciding that two requested poles coincide.
const POLE_EQ_RTOL: f64 = 1e-9;

pub(crate) fn same_pole<S: Real>(a: Complex<S>, b: Complex<S>) -> bool {
    let scale = a.modulus().max(b.modulus()).max(S::one());
    (a - b).modulus() <= lit::<S>(POLE_EQ_RTOL) * scale
}

/// Desired closed-loop poles, optionally with the eigenvector matrix `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSpec<S: Real> {
    poles: Vec<Complex<S>>,
    eigenvectors: Option<CMatrix<S>>,
}

/// A distinct pole with nonnegative imaginary part and its multiplicity.
/// Complex entries stand for the conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PoleGroup<S: Real> {
    pub value: Complex<S>,
    pub multiplicity: usize,
}

impl<S: Real> PoleGroup<S> {
    pub fn is_real(&self) -> bool {
        self.value.im == S::zero()
    }
}

impl<S: Real> PoleSpec<S> {
    /// Validates closure under complex conjugation with equal multiplicities.
    pub fn new(poles: Vec<Complex<S>>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::InvalidArgument("pole list is empty".into()));
        }
        let poles: Vec<Complex<S>> = poles
            .into_iter()
            .map(|z| {
                let scale = z.modulus().max(S::one());
                if z.im.abs() <= lit::<S>(1e-12) * scale {
                    Complex::new(z.re, S::zero())
                } else {
                    z
                }
            })
            .collect();
        for z in &poles {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidInput("non-finite pole".into()));
            }
        }
        conjugate_partners(&poles)?;
        Ok(PoleSpec {
            poles,
            eigenvectors: None,
        })
    }

    pub fn real(poles: &[S]) -> Result<Self> {
        Self::new(poles.iter().map(|&p| Complex::new(p, S::zero())).collect())
    }

    /// Attaches an eigenvector matrix; column `i` belongs to pole `i`.
    ///
    /// Columns of real poles may carry an arbitrary complex phase, which is
    /// removed. Conjugate poles must carry conjugate columns.
    pub fn with_eigenvectors(poles: Vec<Complex<S>>, x: CMatrix<S>) -> Result<Self> {
        let mut spec = Self::new(poles)?;
        let n = spec.poles.len();
        if x.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "eigenvector matrix must be {n}x{n}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        check_finite(&x, "eigenvector matrix")?;
        if numerical_rank(&x, &Tolerance::default())? < n {
            return Err(Error::InvalidArgument("eigenvector matrix is singular".into()));
        }
        let mut x = x;
        let tight = lit::<S>(1e-9);
        for (i, p) in spec.poles.iter().enumerate() {
            if p.im != S::zero() {
                continue;
            }
            let col = x.column(i).into_owned();
            let pivot = col
                .iter()
                .copied()
                .max_by(|a, b| a.modulus().partial_cmp(&b.modulus()).unwrap())
                .unwrap();
            let phase = pivot.conj() / Complex::new(pivot.modulus(), S::zero());
            let rotated = col * phase;
            let imag = rotated.iter().fold(S::zero(), |acc, z| acc.max(z.im.abs()));
            if imag > tight * rotated.norm() {
                return Err(Error::InvalidArgument(format!(
                    "eigenvector {i} of a real pole is not real up to a phase"
                )));
            }
            x.set_column(i, &rotated.map(|z| Complex::new(z.re, S::zero())));
        }
        spec.eigenvectors = Some(x);
        // Conjugate columns may differ from the exact conjugate by a complex
        // factor; make them exact so the realified targets are consistent.
        let partners = spec.conjugate_column_pairs()?;
        let x = spec.eigenvectors.as_mut().expect("just set");
        for (i, j) in partners.iter().enumerate() {
            if let Some(j) = *j {
                let conj = x.column(i).map(|z| z.conj());
                x.set_column(j, &conj);
                spec.poles[j] = spec.poles[i].conj();
            }
        }
        Ok(spec)
    }

    pub fn poles(&self) -> &[Complex<S>] {
        &self.poles
    }

    pub fn eigenvectors(&self) -> Option<&CMatrix<S>> {
        self.eigenvectors.as_ref()
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Distinct poles with `im >= 0`, in order of first appearance.
    pub(crate) fn groups(&self) -> Vec<PoleGroup<S>> {
        let mut out: Vec<PoleGroup<S>> = Vec::new();
        for p in &self.poles {
            if p.im < S::zero() {
                continue;
            }
            match out.iter_mut().find(|g| same_pole(g.value, *p)) {
                Some(g) => g.multiplicity += 1,
                None => out.push(PoleGroup {
                    value: *p,
                    multiplicity: 1,
                }),
            }
        }
        out
    }

    /// Fails when some pole is repeated more than `inputs` times.
    pub fn check_multiplicity(&self, inputs: usize) -> Result<()> {
        for g in self.groups() {
            if g.multiplicity > inputs {
                return Err(Error::Multiplicity {
                    pole: crate::numerics::c64(g.value),
                    multiplicity: g.multiplicity,
                    inputs,
                });
            }
        }
        Ok(())
    }

    /// For each column with `im > 0`, the index of the column holding its
    /// conjugate (up to a nonzero complex factor).
    pub(crate) fn conjugate_column_pairs(&self) -> Result<Vec<Option<usize>>> {
        let n = self.poles.len();
        let mut partner = vec![None; n];
        let Some(x) = &self.eigenvectors else {
            return Ok(partner);
        };
        let mut taken = vec![false; n];
        for i in 0..n {
            if self.poles[i].im <= S::zero() {
                continue;
            }
            let xi = x.column(i).map(|z| z.conj());
            let scale = xi.norm();
            let j = (0..n).find(|&j| {
                if taken[j]
                    || self.poles[j].im >= S::zero()
                    || !same_pole(self.poles[j], self.poles[i].conj())
                {
                    return false;
                }
                let xj = x.column(j);
                let alpha = xi.dotc(&xj) / Complex::new(scale * scale, S::zero());
                (xj - &xi * alpha).norm() <= lit::<S>(1e-9) * xj.norm()
            });
            match j {
                Some(j) => {
                    taken[j] = true;
                    partner[i] = Some(j);
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "eigenvector {i} of complex pole has no conjugate column; a real gain cannot exist"
                    )))
                }
            }
        }
        Ok(partner)
    }

    /// `X Lambda X^-1` for a spec with eigenvectors.
    pub(crate) fn target_matrix(&self) -> Result<CMatrix<S>> {
        let x = self
            .eigenvectors
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("pole spec has no eigenvector matrix".into()))?;
        let inv = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("eigenvector matrix is singular".into()))?;
        let xl = CMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * self.poles[c]);
        Ok(xl * inv)
    }
}

/// Pairs every pole with `im > 0` to a distinct conjugate with `im < 0`.
fn conjugate_partners<S: Real>(poles: &[Complex<S>]) -> Result<()> {
    let mut used = vec![false; poles.len()];
    for (i, p) in poles.iter().enumerate() {
        if p.im <= S::zero() {
            continue;
        }
        let j = (0..poles.len())
            .find(|&j| !used[j] && poles[j].im < S::zero() && same_pole(poles[j], p.conj()));
        match j {
            Some(j) => used[j] = true,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "pole {i} = {} has no conjugate partner",
                    crate::numerics::c64(*p)
                )))
            }
        }
    }
    let lower = poles.iter().filter(|p| p.im < S::zero()).count();
    if lower != used.iter().filter(|u| **u).count() {
        return Err(Error::InvalidArgument(
            "pole set is not closed under complex conjugation".into(),
        ));
    }
    Ok(())
}

/// Gain and the evidence produced while computing it.
#[derive(Debug, Clone)]
pub struct GainResult<S: Real> {
    /// Feedback gain for `u = -K x + v` (m x n).
    pub gain: DMatrix<S>,
    /// Real (T-1) x n matrix with `K = -U0 M (X0 M)^+`.
    pub m_matrix: DMatrix<S>,
    /// Spectrum of the data-implied closed loop `X1 [X0; U0]^+ [I; -K]`.
    pub achieved_spectrum: Vec<Complex<S>>,
    pub placement_error: PoleError,
    pub rank_m: usize,
    pub rank_x0m: usize,
    /// Largest imaginary entry of the gain computed from the complex columns
    /// before realification; zero when all poles are real.
    pub imag_residual: f64,
    /// `||X1 - X1 [X0;U0]^+ [X0;U0]||_F / ||X1||_F`; nonzero only for data not
    /// generated exactly by a linear model.
    pub consistency_residual: f64,
    /// `max |X0 M_c - X|` for eigenstructure assignment.
    pub eigenvector_residual: Option<f64>,
    /// Conditioning of the data-implied closed loop; `None` if it is defective.
    pub diagnostics: Option<Diagnostics>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn conjugate_closure() {
        assert!(PoleSpec::new(vec![c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.)]).is_ok());
        assert!(PoleSpec::new(vec![c(0.1, 0.2), c(0.3, 0.)]).is_err());
        assert!(PoleSpec::new(vec![c(0.1, 0.2), c(0.1, 0.2), c(0.1, -0.2)]).is_err());
        assert!(PoleSpec::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn groups_and_multiplicity() {
        let s = PoleSpec::new(vec![c(0., 0.), c(0., 0.), c(0.5, 0.1), c(0.5, -0.1)]).unwrap();
        let g = s.groups();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].multiplicity, 2);
        assert_eq!(g[1].multiplicity, 1);
        assert!(s.check_multiplicity(2).is_ok());
        assert!(matches!(s.check_multiplicity(1), Err(Error::Multiplicity { multiplicity: 2, .. })));
    }

    #[test]
    fn eigenvector_phase_is_removed_for_real_poles() {
        let i = c(0., 1.);
        let x = CMatrix::from_row_slice(2, 2, &[i, c(0., 0.), c(0., 0.), c(1., 0.)]);
        let s = PoleSpec::with_eigenvectors(vec![c(0.2, 0.), c(0.4, 0.)], x).unwrap();
        let x = s.eigenvectors().unwrap();
        assert_eq!(x[(0, 0)], c(1., 0.));
    }

    #[test]
    fn complex_eigenvectors_must_be_conjugate() {
        let p = vec![c(0.1, 0.2), c(0.1, -0.2)];
        let good = CMatrix::from_row_slice(2, 2, &[c(1., 1.), c(1., -1.), c(0., 2.), c(0., -2.)]);
        assert!(PoleSpec::with_eigenvectors(p.clone(), good).is_ok());
        let bad = CMatrix::from_row_slice(2, 2, &[c(1., 1.), c(1., 0.), c(0., 2.), c(0., -2.)]);
        assert!(PoleSpec::with_eigenvectors(p.clone(), bad).is_err());
        // A rescaled conjugate is accepted and replaced by the exact conjugate.
        let scaled = CMatrix::from_row_slice(2, 2, &[c(1., 1.), c(2., 2.), c(0., 2.), c(4., 0.)]);
        let s = PoleSpec::with_eigenvectors(p, scaled).unwrap();
        let x = s.eigenvectors().unwrap();
        assert_eq!(x[(0, 1)], c(1., -1.));
        assert_eq!(x[(1, 1)], c(0., -2.));
    }

    #[test]
    fn singular_eigenvectors_rejected() {
        let x = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(1., 0.), c(1., 0.)]);
        assert!(PoleSpec::with_eigenvectors(vec![c(0.1, 0.), c(0.2, 0.)], x).is_err());
    }
}
