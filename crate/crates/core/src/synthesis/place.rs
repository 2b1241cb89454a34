use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use super::diagnostics::{closed_loop_diagnostics, data_closed_loop_with};
use super::{pole_error, GainResult, PoleSpec};
use crate::error::{Error, Result};
use crate::numerics::{
    c64, eigenvalues_real, lit, norm2, nullspace_basis, numerical_rank, pseudoinverse, real_part,
    svd_sorted, to_complex, to_f64, CMatrix, Real, Tolerance,
};
use crate::plant::seeded_rng;
use crate::signals::DataMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaceOptions {
    /// Seed for the random combination coefficients inside each nullspace.
    pub seed: u64,
    /// Redraws allowed per column before giving up on rank growth.
    pub max_redraws: usize,
}

impl Default for PlaceOptions {
    fn default() -> Self {
        PlaceOptions {
            seed: 0,
            max_redraws: 50,
        }
    }
}

/// Pole placement from data with default options.
pub fn place_poles<S: Real>(
    dm: &DataMatrices<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<GainResult<S>> {
    place_poles_with(dm, spec, tol, &PlaceOptions::default())
}

pub(crate) fn check_data<S: Real>(dm: &DataMatrices<S>, spec: &PoleSpec<S>, tol: &Tolerance) -> Result<()> {
    let (n, m) = (dm.state_dim(), dm.input_dim());
    if spec.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} poles requested for a {n}-state system",
            spec.len()
        )));
    }
    spec.check_multiplicity(m)?;
    let rank = numerical_rank(&dm.stacked(), tol)?;
    if rank < n + m {
        return Err(Error::DataRank {
            rank,
            required: n + m,
        });
    }
    Ok(())
}

/// Directions `m` with `(X1 - lambda X0) m = 0`, ordered by how strongly
/// they excite the state (`||X0 m|| / ||m||`).
///
/// Directions that `X0` maps to (numerically) zero carry no information and
/// are dropped. Columns are scaled so their images under `X0` are orthonormal.
fn informative_nullspace<T: ComplexField>(
    x0: &DMatrix<T>,
    x1: &DMatrix<T>,
    lambda: T,
    x0_norm: T::RealField,
    tol: &Tolerance,
) -> Result<DMatrix<T>> {
    let pencil = x1 - x0 * lambda;
    let null = nullspace_basis(&pencil, tol)?;
    if null.ncols() == 0 {
        return Ok(null);
    }
    let images = x0 * &null;
    let svd = svd_sorted(&images)?;
    let cut = x0_norm * nalgebra::convert::<f64, T::RealField>(tol.rel_rank_tol);
    let keep = svd
        .singular_values
        .iter()
        .take_while(|s| **s > cut)
        .count();
    let mut dirs = &null * svd.v.columns(0, keep);
    for (j, mut col) in dirs.column_iter_mut().enumerate() {
        col /= T::from_real(svd.singular_values[j].clone());
    }
    Ok(dirs)
}

fn draw_real<S: Real, R: Rng>(len: usize, rng: &mut R) -> DVector<S> {
    DVector::from_fn(len, |_, _| lit(rng.sample::<f64, _>(StandardNormal)))
}

fn draw_complex<S: Real, R: Rng>(len: usize, rng: &mut R) -> DVector<Complex<S>> {
    DVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(lit(re), lit(im))
    })
}

/// Pole placement from data.
///
/// For each distinct pole the informative part of the nullspace of
/// `X1 - lambda X0` is computed; as many random combinations as the pole's
/// multiplicity are drawn from it, each accepted only if it raises the rank of
/// `X0 M`. A complex pole contributes the real and imaginary parts of its
/// column, which span the same invariant subspace as the conjugate pair and
/// keep `M` real.
pub fn place_poles_with<S: Real>(
    dm: &DataMatrices<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
    opts: &PlaceOptions,
) -> Result<GainResult<S>> {
    if spec.eigenvectors().is_some() {
        return Err(Error::InvalidArgument(
            "pole spec carries eigenvectors; use eigenstructure assignment".into(),
        ));
    }
    check_data(dm, spec, tol)?;
    let n = dm.state_dim();
    let x0_norm = norm2(&dm.x0)?;
    let x0c = to_complex(&dm.x0);
    let x1c = to_complex(&dm.x1);
    let mut rng = seeded_rng(opts.seed, 0x70_6c_61_63_65);

    let mut columns: Vec<DVector<S>> = Vec::with_capacity(n);
    let mut images: Vec<DVector<S>> = Vec::with_capacity(n);
    let mut complex_cols: Vec<DVector<Complex<S>>> = Vec::new();
    let mut has_complex = false;

    let accepts = |images: &Vec<DVector<S>>, extra: &[DVector<S>]| -> Result<bool> {
        let all: Vec<DVector<S>> = images.iter().chain(extra.iter()).cloned().collect();
        let mat = DMatrix::from_columns(&all);
        Ok(numerical_rank(&mat, tol)? == all.len())
    };

    for group in spec.groups() {
        let pole = c64(group.value);
        if group.is_real() {
            let dirs = informative_nullspace(&dm.x0, &dm.x1, group.value.re, x0_norm, tol)?;
            if dirs.ncols() == 0 {
                return Err(Error::NullspaceEmpty { pole });
            }
            for _ in 0..group.multiplicity {
                let mut placed = false;
                for _ in 0..opts.max_redraws.max(1) {
                    let mut col = &dirs * draw_real::<S, _>(dirs.ncols(), &mut rng);
                    let img = &dm.x0 * &col;
                    let scale = img.norm();
                    if scale <= S::zero() {
                        continue;
                    }
                    col /= scale;
                    let img = img / scale;
                    if accepts(&images, std::slice::from_ref(&img))? {
                        complex_cols.push(col.map(|v| Complex::new(v, S::zero())));
                        columns.push(col);
                        images.push(img);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::RankSelection {
                        achieved: images.len(),
                        required: n,
                    });
                }
            }
        } else {
            has_complex = true;
            let dirs = informative_nullspace(&x0c, &x1c, group.value, x0_norm, tol)?;
            if dirs.ncols() == 0 {
                return Err(Error::NullspaceEmpty { pole });
            }
            for _ in 0..group.multiplicity {
                let mut placed = false;
                for _ in 0..opts.max_redraws.max(1) {
                    let mut col = &dirs * draw_complex::<S, _>(dirs.ncols(), &mut rng);
                    let scale = (&x0c * &col).norm();
                    if scale <= S::zero() {
                        continue;
                    }
                    col /= Complex::new(scale, S::zero());
                    let re = col.map(|z| z.re);
                    let im = col.map(|z| z.im);
                    let pair = [&dm.x0 * &re, &dm.x0 * &im];
                    if accepts(&images, &pair)? {
                        let [ire, iim] = pair;
                        images.push(ire);
                        images.push(iim);
                        columns.push(re);
                        columns.push(im);
                        complex_cols.push(col.clone());
                        complex_cols.push(col.map(|z| z.conj()));
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::RankSelection {
                        achieved: images.len(),
                        required: n,
                    });
                }
            }
        }
    }

    let m_real = DMatrix::from_columns(&columns);
    let m_complex = has_complex.then(|| CMatrix::from_columns(&complex_cols));
    assemble(dm, spec, m_real, m_complex.as_ref(), tol)
}

/// `K = -U0 M (X0 M)^+` plus verification of the result against the data.
pub(crate) fn assemble<S: Real>(
    dm: &DataMatrices<S>,
    spec: &PoleSpec<S>,
    m_real: DMatrix<S>,
    m_complex: Option<&CMatrix<S>>,
    tol: &Tolerance,
) -> Result<GainResult<S>> {
    let n = dm.state_dim();
    let x0m = &dm.x0 * &m_real;
    let rank_m = numerical_rank(&m_real, tol)?;
    let rank_x0m = numerical_rank(&x0m, tol)?;
    if rank_x0m < n {
        return Err(Error::RankSelection {
            achieved: rank_x0m,
            required: n,
        });
    }
    let gain = -(&dm.u0 * &m_real) * pseudoinverse(&x0m, tol)?;

    let imag_residual = match m_complex {
        Some(mc) => {
            let x0c = to_complex(&dm.x0);
            let kc = -(to_complex(&dm.u0) * mc) * pseudoinverse(&(x0c * mc), tol)?;
            to_f64(real_part(&kc).1)
        }
        None => 0.0,
    };

    let stacked = dm.stacked();
    let stacked_pinv = pseudoinverse(&stacked, tol)?;
    let x1_norm = dm.x1.norm();
    let consistency_residual = if x1_norm > S::zero() {
        to_f64((&dm.x1 - &dm.x1 * &stacked_pinv * &stacked).norm() / x1_norm)
    } else {
        0.0
    };
    let a_cl = data_closed_loop_with(dm, &stacked_pinv, &gain)?;
    let achieved_spectrum = eigenvalues_real(&a_cl)?;
    let placement_error =
        pole_error(spec.poles(), &achieved_spectrum).expect("spectra have equal length");
    let diagnostics = closed_loop_diagnostics(&a_cl, tol).ok();

    let eigenvector_residual = match (spec.eigenvectors(), m_complex) {
        (Some(x), Some(mc)) => Some(to_f64((to_complex(&dm.x0) * mc - x).camax())),
        (Some(x), None) => Some(to_f64((to_complex(&x0m) - x).camax())),
        _ => None,
    };

    Ok(GainResult {
        gain,
        m_matrix: m_real,
        achieved_spectrum,
        placement_error,
        rank_m,
        rank_x0m,
        imag_residual,
        consistency_residual,
        eigenvector_residual,
        diagnostics,
    })
}
