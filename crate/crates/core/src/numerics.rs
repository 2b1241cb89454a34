//! Dense linear algebra with a single tolerance policy.
//!
//! Every rank decision in the crate goes through [`numerical_rank`] (SVD with a
//! threshold relative to the largest singular value), so that changing
//! [`Tolerance`] changes behaviour consistently everywhere.

use approx::AbsDiffEq;
use nalgebra::{ComplexField, DMatrix, DVector, RealField, Schur};
use num_complex::Complex;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real scalar the library is generic over (`f32`, `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {}

impl Real for f32 {}
impl Real for f64 {}

pub type CMatrix<S> = DMatrix<Complex<S>>;

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<S: Real>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn c64<S: Real>(z: Complex<S>) -> num_complex::Complex64 {
    num_complex::Complex64::new(to_f64(z.re), to_f64(z.im))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Singular values at or below `rel_rank_tol * sigma_max` count as zero.
    pub rel_rank_tol: f64,
    /// Threshold for post-hoc residual checks.
    pub residual_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_rank_tol: 1e-10,
            residual_tol: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(rel_rank_tol: f64, residual_tol: f64) -> Result<Self> {
        if !(rel_rank_tol > 0.0 && rel_rank_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rel_rank_tol must be positive, got {rel_rank_tol}"
            )));
        }
        if !(residual_tol > 0.0 && residual_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "residual_tol must be positive, got {residual_tol}"
            )));
        }
        Ok(Tolerance {
            rel_rank_tol,
            residual_tol,
        })
    }
}

pub fn to_complex<S: Real>(m: &DMatrix<S>) -> CMatrix<S> {
    m.map(|x| Complex::new(x, S::zero()))
}

/// Real part, together with the largest absolute imaginary part that was dropped.
pub fn real_part<S: Real>(m: &CMatrix<S>) -> (DMatrix<S>, S) {
    let imag = m.iter().fold(S::zero(), |acc, z| acc.max(z.im.abs()));
    (m.map(|z| z.re), imag)
}

pub(crate) fn check_finite<T: ComplexField>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.clone().is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// SVD with singular values sorted in decreasing order. `v` is always square
/// (cols x cols), so its trailing columns span the full right nullspace.
pub struct SortedSvd<T: ComplexField> {
    pub u: DMatrix<T>,
    pub singular_values: Vec<T::RealField>,
    pub v: DMatrix<T>,
}

impl<T: ComplexField> SortedSvd<T> {
    pub fn sigma_max(&self) -> T::RealField {
        self.singular_values
            .first()
            .cloned()
            .unwrap_or_else(T::RealField::zero)
    }

    pub fn rank(&self, tol: &Tolerance) -> usize {
        let smax = self.sigma_max();
        if smax <= T::RealField::zero() {
            return 0;
        }
        let cut = smax * nalgebra::convert::<f64, T::RealField>(tol.rel_rank_tol);
        self.singular_values.iter().filter(|s| **s > cut).count()
    }
}

/// Convergence thresholds tried in turn, as multiples of machine epsilon.
const EPS_FACTORS: [f64; 3] = [5.0, 50.0, 500.0];

fn real_lit<R: RealField>(x: f64) -> R {
    nalgebra::convert::<f64, R>(x)
}

/// Largest entry of `|M - I|`.
fn orthogonality_defect<T: ComplexField>(q: &DMatrix<T>) -> T::RealField {
    let g = q.adjoint() * q;
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).camax()
}

/// SVD with the factors verified against the input.
///
/// The implicit-shift iteration can deflate prematurely and report wrong
/// singular values without signalling failure, so every result is checked by
/// reconstruction and orthogonality; a failed check retries with a looser
/// convergence threshold.
#[allow(clippy::type_complexity)]
fn checked_svd<T: ComplexField>(
    work: DMatrix<T>,
) -> Result<(nalgebra::SVD<T, nalgebra::Dyn, nalgebra::Dyn>, DMatrix<T>, DMatrix<T>)> {
    let unit = T::RealField::default_epsilon();
    let dim = work.nrows().max(work.ncols());
    let scale = work.camax();
    let bound = unit.clone() * real_lit::<T::RealField>(100.0 * dim as f64);
    for factor in EPS_FACTORS {
        let eps = unit.clone() * real_lit::<T::RealField>(factor);
        let Some(svd) = work.clone().try_svd(true, true, eps, 10_000) else {
            continue;
        };
        let u = svd.u.clone().expect("u requested");
        let v = svd.v_t.clone().expect("v requested").adjoint();
        let sigma = DMatrix::from_diagonal(&svd.singular_values.map(T::from_real));
        let recon = (&u * sigma * v.adjoint() - &work).camax();
        if recon <= bound.clone() * scale.clone()
            && orthogonality_defect(&u) <= bound.clone()
            && orthogonality_defect(&v) <= bound.clone()
        {
            return Ok((svd, u, v));
        }
    }
    jacobi_svd(&work).ok_or_else(|| Error::NumericFailure {
        context: "SVD did not converge".into(),
        condition: f64::INFINITY,
    })
}

/// One-sided Jacobi SVD for `rows >= cols`, used when the bidiagonal
/// iteration fails its checks. Returns singular values unsorted, `U` with
/// orthonormal columns (completed where singular values vanish) and square `V`.
#[allow(clippy::type_complexity)]
fn jacobi_svd<T: ComplexField>(
    m: &DMatrix<T>,
) -> Option<(nalgebra::SVD<T, nalgebra::Dyn, nalgebra::Dyn>, DMatrix<T>, DMatrix<T>)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return None;
    }
    let unit = T::RealField::default_epsilon();
    let threshold = unit.clone() * real_lit::<T::RealField>(rows as f64);
    // Columns below this squared norm are round-off and are left alone.
    let floor = {
        let f = unit.clone() * m.norm();
        f.clone() * f
    };
    let mut a = m.clone();
    let mut v = DMatrix::<T>::identity(cols, cols);
    let mut converged = false;
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.clone().modulus();
                if g <= threshold.clone() * (alpha.clone() * beta.clone()).sqrt()
                    || alpha <= floor
                    || beta <= floor
                {
                    continue;
                }
                rotated = true;
                // Unit phase making a_p^H (a_q * phase) real and positive.
                let phase = T::from_real(g.clone()) / gamma;
                let zeta = (beta - alpha) / (real_lit::<T::RealField>(2.0) * g);
                let one = T::RealField::one();
                let t = zeta.clone().signum()
                    / (zeta.clone().abs() + (one.clone() + zeta.clone() * zeta).sqrt());
                let c = one.clone() / (one + t.clone() * t.clone()).sqrt();
                let s = c.clone() * t;
                let (c, s) = (T::from_real(c), T::from_real(s));
                for mat in [&mut a, &mut v] {
                    let cp = mat.column(p).into_owned();
                    let cq = mat.column(q) * phase.clone();
                    mat.set_column(p, &(&cp * c.clone() - &cq * s.clone()));
                    mat.set_column(q, &(cp * s.clone() + cq * c.clone()));
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let sigma: Vec<T::RealField> = (0..cols).map(|j| a.column(j).norm()).collect();
    let smax = sigma
        .iter()
        .cloned()
        .fold(T::RealField::zero(), |x, y| if y > x { y } else { x });
    let tiny = smax * unit * real_lit::<T::RealField>(rows as f64);
    let mut u = DMatrix::<T>::zeros(rows, cols);
    let mut missing = Vec::new();
    for j in 0..cols {
        if sigma[j] > tiny {
            u.set_column(j, &(a.column(j) / T::from_real(sigma[j].clone())));
        } else {
            missing.push(j);
        }
    }
    // Complete U with Gram-Schmidt over the standard basis.
    let mut e = 0;
    for j in missing {
        while e < rows {
            let mut cand = DVector::<T>::zeros(rows);
            cand[e] = T::one();
            e += 1;
            for k in 0..cols {
                let uk = u.column(k).into_owned();
                let proj = uk.dotc(&cand);
                cand -= uk * proj;
            }
            let nc = cand.norm();
            if nc > real_lit::<T::RealField>(0.5) {
                u.set_column(j, &(cand / T::from_real(nc)));
                break;
            }
        }
    }
    let svd = nalgebra::SVD {
        u: Some(u.clone()),
        v_t: Some(v.adjoint()),
        singular_values: DVector::from_vec(sigma),
    };
    Some((svd, u, v))
}

pub fn svd_sorted<T: ComplexField>(m: &DMatrix<T>) -> Result<SortedSvd<T>> {
    check_finite(m, "matrix")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SortedSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: vec![],
            v: DMatrix::identity(cols, cols),
        });
    }
    // Zero rows leave the right singular structure unchanged and make V square.
    let work = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (svd, u_all, v_all) = checked_svd(work)?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let singular_values: Vec<T::RealField> =
        order.iter().map(|&i| svd.singular_values[i].clone()).collect();
    let u_rows = rows.min(u_all.nrows());
    let u = DMatrix::from_fn(u_rows, k, |r, c| u_all[(r, order[c])].clone());
    let v = DMatrix::from_fn(cols, k, |r, c| v_all[(r, order[c])].clone());
    Ok(SortedSvd {
        u,
        singular_values,
        v,
    })
}

/// Number of singular values above `rel_rank_tol * sigma_max`.
pub fn numerical_rank<T: ComplexField>(m: &DMatrix<T>, tol: &Tolerance) -> Result<usize> {
    Ok(svd_sorted(m)?.rank(tol))
}

/// Orthonormal basis of the right nullspace; `cols - rank` columns.
pub fn nullspace_basis<T: ComplexField>(m: &DMatrix<T>, tol: &Tolerance) -> Result<DMatrix<T>> {
    let svd = svd_sorted(m)?;
    let r = svd.rank(tol);
    let cols = m.ncols();
    Ok(svd.v.columns(r, cols - r).into_owned())
}

/// Orthonormal basis of the column space.
pub fn range_basis<T: ComplexField>(m: &DMatrix<T>, tol: &Tolerance) -> Result<DMatrix<T>> {
    let svd = svd_sorted(m)?;
    let r = svd.rank(tol);
    Ok(svd.u.columns(0, r).into_owned())
}

/// Moore-Penrose inverse, truncating singular values at the rank tolerance.
pub fn pseudoinverse<T: ComplexField>(m: &DMatrix<T>, tol: &Tolerance) -> Result<DMatrix<T>> {
    let svd = svd_sorted(m)?;
    let r = svd.rank(tol);
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(cols, rows);
    for k in 0..r {
        let inv = T::from_real(T::RealField::one() / svd.singular_values[k].clone());
        let vk = svd.v.column(k);
        let uk = svd.u.column(k);
        out += (vk * uk.adjoint()) * inv;
    }
    Ok(out)
}

/// 2-norm condition number sigma_max / sigma_min (infinite when singular).
pub fn condition_number<T: ComplexField>(m: &DMatrix<T>) -> Result<f64> {
    let svd = svd_sorted(m)?;
    let smax = svd.sigma_max();
    let smin = svd
        .singular_values
        .last()
        .cloned()
        .unwrap_or_else(T::RealField::zero);
    if m.nrows() != m.ncols() || smin <= T::RealField::zero() {
        return Ok(f64::INFINITY);
    }
    Ok(nalgebra::try_convert::<T::RealField, f64>(smax / smin).unwrap_or(f64::INFINITY))
}

/// Spectral 2-norm.
pub fn norm2<T: ComplexField>(m: &DMatrix<T>) -> Result<T::RealField> {
    Ok(svd_sorted(m)?.sigma_max())
}

#[derive(Debug, Clone)]
pub struct Eigen<S: Real> {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<Complex<S>>,
    /// Unit-norm right eigenvectors, column i paired with `values[i]`.
    pub vectors: CMatrix<S>,
}

fn sort_key_cmp<S: Real>(a: &Complex<S>, b: &Complex<S>) -> std::cmp::Ordering {
    to_f64(a.re)
        .total_cmp(&to_f64(b.re))
        .then(to_f64(a.im).total_cmp(&to_f64(b.im)))
}

/// Sorts a spectrum by (real, imaginary).
pub fn sort_spectrum<S: Real>(values: &mut [Complex<S>]) {
    values.sort_by(sort_key_cmp);
}

fn schur_form<S: Real>(m: &CMatrix<S>) -> Result<(CMatrix<S>, CMatrix<S>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m, "matrix")?;
    // Same policy as the SVD: verify the factorization and loosen the
    // convergence threshold if the iteration stalls or goes wrong.
    let scale = m.camax();
    let bound = S::default_epsilon() * lit::<S>(100.0 * n.max(1) as f64);
    for factor in EPS_FACTORS {
        let eps = S::default_epsilon() * lit::<S>(factor);
        let Some(schur) = Schur::try_new(m.clone(), eps, 1000 * n.max(10)) else {
            continue;
        };
        let (q, t) = schur.unpack();
        let recon = (&q * &t * q.adjoint() - m).camax();
        if recon <= bound * scale && orthogonality_defect(&q) <= bound {
            return Ok((q, t));
        }
    }
    Err(Error::NumericFailure {
        context: "Schur iteration did not converge".into(),
        condition: condition_number(m).unwrap_or(f64::INFINITY),
    })
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues<S: Real>(m: &CMatrix<S>) -> Result<Vec<Complex<S>>> {
    let (_, t) = schur_form(m)?;
    let mut vals: Vec<Complex<S>> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    sort_spectrum(&mut vals);
    Ok(vals)
}

/// Eigenvalues of a real matrix.
pub fn eigenvalues_real<S: Real>(m: &DMatrix<S>) -> Result<Vec<Complex<S>>> {
    eigenvalues(&to_complex(m))
}

pub fn spectral_radius<S: Real>(m: &DMatrix<S>) -> Result<S> {
    Ok(eigenvalues_real(m)?
        .iter()
        .fold(S::zero(), |acc, z| acc.max(z.modulus())))
}

/// Full eigendecomposition from the complex Schur form, with eigenvectors
/// recovered by back substitution on the triangular factor.
pub fn eigendecomposition<S: Real>(m: &CMatrix<S>, tol: &Tolerance) -> Result<Eigen<S>> {
    let (q, t) = schur_form(m)?;
    let n = t.nrows();
    let scale = t.iter().fold(S::zero(), |acc, z| acc.max(z.modulus()));
    let tiny = if scale > S::zero() {
        scale * S::default_epsilon()
    } else {
        S::min_value().unwrap_or_else(S::default_epsilon)
    };
    let mut vecs = CMatrix::<S>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = DVector::<Complex<S>>::zeros(n);
        y[k] = Complex::new(S::one(), S::zero());
        for i in (0..k).rev() {
            let mut acc = Complex::new(S::zero(), S::zero());
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.modulus() < tiny {
                d = Complex::new(tiny, S::zero());
            }
            y[i] = -acc / d;
        }
        let v = &q * y;
        let nv = v.norm();
        vecs.set_column(k, &(v / Complex::new(nv, S::zero())));
    }
    let mut values: Vec<Complex<S>> = (0..n).map(|i| t[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sort_key_cmp(&values[a], &values[b]));
    let vectors = CMatrix::<S>::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    values = order.iter().map(|&i| values[i]).collect();

    let mnorm = m.norm().max(tiny);
    let bound = lit::<S>(tol.residual_tol) * mnorm;
    for (i, lambda) in values.iter().enumerate() {
        let v = vectors.column(i);
        let res = (m * v - v * *lambda).norm();
        if res > bound {
            return Err(Error::NumericFailure {
                context: format!(
                    "eigenpair {i} residual {:.3e} exceeds tolerance",
                    to_f64(res / mnorm)
                ),
                condition: condition_number(m).unwrap_or(f64::INFINITY),
            });
        }
    }
    Ok(Eigen { values, vectors })
}

/// Wilkinson condition number ||x|| ||y|| / |y* x| of the eigenvalue at
/// `index` (in the sorted order of [`eigenvalues`]).
pub fn eigenvalue_condition_number<S: Real>(
    m: &CMatrix<S>,
    index: usize,
    tol: &Tolerance,
) -> Result<S> {
    let values = eigenvalues(m)?;
    let lambda = *values.get(index).ok_or_else(|| {
        Error::InvalidArgument(format!("eigenvalue index {index} out of range {}", values.len()))
    })?;
    let scale = m.norm().max(S::one());
    let sep = lit::<S>(tol.residual_tol).sqrt() * scale;
    if values
        .iter()
        .enumerate()
        .any(|(j, mu)| j != index && (*mu - lambda).modulus() <= sep)
    {
        return Err(Error::Unsupported(format!(
            "eigenvalue {} is repeated; condition number defined for simple eigenvalues only",
            c64(lambda)
        )));
    }
    // The smallest singular triplet of M - lambda I carries both eigenvectors.
    let shifted = m - CMatrix::<S>::identity(m.nrows(), m.ncols()) * lambda;
    let svd = svd_sorted(&shifted)?;
    let last = m.nrows() - 1;
    let y = svd.u.column(last);
    let x = svd.v.column(last);
    let overlap = y.dotc(&x).modulus();
    if overlap <= S::zero() {
        return Ok(S::max_value().unwrap_or_else(S::one));
    }
    Ok((S::one() / overlap).max(S::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn real(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn rank_examples() {
        let tol = Tolerance::default();
        assert_eq!(numerical_rank(&DMatrix::<f64>::identity(3, 3), &tol).unwrap(), 3);
        assert_eq!(numerical_rank(&DMatrix::<f64>::zeros(2, 4), &tol).unwrap(), 0);
        assert_eq!(numerical_rank(&real(2, 2, &[1., 1., 1., 1.]), &tol).unwrap(), 1);
    }

    #[test]
    fn rank_rejects_non_finite() {
        let m = real(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(
            numerical_rank(&m, &Tolerance::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn nullspace_examples() {
        let tol = Tolerance::default();
        assert_eq!(nullspace_basis(&DMatrix::<f64>::identity(2, 2), &tol).unwrap().ncols(), 0);

        let n = nullspace_basis(&real(1, 2, &[1., 1.]), &tol).unwrap();
        assert_eq!(n.ncols(), 1);
        let s = 0.5f64.sqrt();
        let sign = n[(0, 0)].signum();
        assert_relative_eq!(n[(0, 0)] * sign, s, epsilon = 1e-12);
        assert_relative_eq!(n[(1, 0)] * sign, -s, epsilon = 1e-12);

        let z = nullspace_basis(&DMatrix::<f64>::zeros(2, 3), &tol).unwrap();
        assert_eq!(z.ncols(), 3);
        assert_relative_eq!(z.transpose() * &z, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn pseudoinverse_examples() {
        let tol = Tolerance::default();
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(pseudoinverse(&i3, &tol).unwrap(), i3, epsilon = 1e-14);
        let d = real(2, 2, &[2., 0., 0., 0.]);
        assert_relative_eq!(
            pseudoinverse(&d, &tol).unwrap(),
            real(2, 2, &[0.5, 0., 0., 0.]),
            epsilon = 1e-14
        );
        let tall = real(4, 2, &[1., 2., -0.5, 0.3, 0.7, 1.1, 2.0, -1.0]);
        let p = pseudoinverse(&tall, &tol).unwrap();
        assert_relative_eq!(p * tall, DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn eigen_examples() {
        let tol = Tolerance::default();
        let d = to_complex(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])));
        let e = eigendecomposition(&d, &tol).unwrap();
        let re: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        assert_relative_eq!(re.as_slice(), [1.0, 2.0, 3.0].as_slice(), epsilon = 1e-12);

        let comp = real(2, 2, &[0., 1., -0.08, 0.6]);
        let v = eigenvalues_real(&comp).unwrap();
        assert_relative_eq!(v[0].re, 0.2, epsilon = 1e-12);
        assert_relative_eq!(v[1].re, 0.4, epsilon = 1e-12);

        let rot = to_complex(&real(2, 2, &[0., 1., -1., 0.]));
        let e = eigendecomposition(&rot, &tol).unwrap();
        assert_relative_eq!(e.values[0].im, -1.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[1].im, 1.0, epsilon = 1e-12);
        for i in 0..2 {
            let v = e.vectors.column(i);
            assert!((&rot * v - v * e.values[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn eigen_rejects_non_square() {
        let m = to_complex(&DMatrix::<f64>::zeros(2, 3));
        assert!(matches!(eigenvalues(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn condition_number_normal_and_triangular() {
        let tol = Tolerance::default();
        let sym = to_complex(&real(3, 3, &[2., 1., 0., 1., 3., 0.5, 0., 0.5, -1.]));
        for i in 0..3 {
            assert_relative_eq!(eigenvalue_condition_number(&sym, i, &tol).unwrap(), 1.0, epsilon = 1e-10);
        }
        let d = to_complex(&real(2, 2, &[1., 0., 0., 2.]));
        assert_relative_eq!(eigenvalue_condition_number(&d, 0, &tol).unwrap(), 1.0, epsilon = 1e-12);

        // Oracle for [[1, 1e3], [0, 2]]: perturb along y x^T / (|y||x|) and
        // difference the closed-form 2x2 eigenvalue.
        let a = real(2, 2, &[1., 1e3, 0., 2.]);
        let y = DVector::from_vec(vec![1.0, -1e3]).normalize();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let e = 1e-9;
        let p = &a + (&y * x.transpose()) * e;
        let (tr, det) = (p.trace(), p.determinant());
        let disc = (tr * tr - 4.0 * det).sqrt();
        let lam = (tr - disc) / 2.0;
        let fd = (lam - 1.0).abs() / e;
        let cond = eigenvalue_condition_number(&to_complex(&a), 0, &tol).unwrap();
        assert_relative_eq!(cond, fd, max_relative = 1e-3);
        assert_relative_eq!(cond, (1.0f64 + 1e6).sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn condition_number_repeated_is_unsupported() {
        let m = to_complex(&DMatrix::<f64>::identity(2, 2));
        assert!(matches!(
            eigenvalue_condition_number(&m, 0, &Tolerance::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(0.0, 1e-8).is_err());
        assert!(Tolerance::new(1e-10, -1.0).is_err());
        assert!(Tolerance::new(1e-10, 1e-8).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let tol = Tolerance::new(1e-5, 1e-4).unwrap();
        let m = DMatrix::<f32>::from_row_slice(2, 2, &[1., 1., 1., 1.]);
        assert_eq!(numerical_rank(&m, &tol).unwrap(), 1);
        let v = eigenvalues_real(&DMatrix::<f32>::from_row_slice(2, 2, &[0., 1., -0.08, 0.6])).unwrap();
        assert!((v[0].re - 0.2).abs() < 1e-5 && (v[1].re - 0.4).abs() < 1e-5);
    }

    #[test]
    fn svd_is_verified_against_input() {
        // Three orthonormal columns interleaved with zero columns; a tight
        // convergence threshold makes the bidiagonal iteration return a wrong
        // leading singular value here.
        #[rustfmt::skip]
        let m = real(6, 6, &[
            0.6964357892068604, -0.0, -0.4115960348285469, 0.0, 0.2210695341381071, -0.0,
            -0.4149275717228973, -0.0, 0.08317075397793501, 0.0, 0.11180717317929273, -0.0,
            -0.22840209793969374, -0.0, -0.8119230067292812, 0.0, 0.15713164772226731, -0.0,
            -0.29653637899212837, -0.0, -0.015742052705767277, 0.0, -0.04669070546139494, -0.0,
            0.3794357244658183, -0.0, 0.3970600235142534, 0.0, 0.3436431412463504, -0.0,
            -0.24236231209913917, -0.0, 0.08091901163084306, 0.0, 0.8908795832678846, -0.0,
        ]);
        let svd = svd_sorted(&m).unwrap();
        for k in 0..3 {
            assert_relative_eq!(svd.singular_values[k], 1.0, epsilon = 1e-12);
        }
        assert_eq!(svd.rank(&Tolerance::default()), 3);
    }

    #[test]
    fn jacobi_fallback_factorizes_complex_matrices() {
        let m = CMatrix::<f64>::from_fn(5, 3, |r, c| {
            Complex::new((r * 3 + c) as f64 * 0.37 - 1.0, ((r + 2 * c) % 4) as f64 * 0.5)
        });
        // Rank-deficient: third column is a combination of the first two.
        let mut m = m;
        let dep = m.column(0) * Complex::new(0.5, -1.0) + m.column(1) * Complex::new(2.0, 0.0);
        m.set_column(2, &dep);
        let (svd, u, v) = jacobi_svd(&m).unwrap();
        let sigma = DMatrix::from_diagonal(&svd.singular_values.map(|x| Complex::new(x, 0.0)));
        assert!((&u * sigma * v.adjoint() - &m).camax() < 1e-12);
        assert!(orthogonality_defect(&u) < 1e-12);
        assert!(orthogonality_defect(&v) < 1e-12);
        let zeros = svd.singular_values.iter().filter(|x| **x < 1e-10).count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn jacobi_handles_columns_that_collapse_to_round_off() {
        // 3 nonzero rows, 4 columns: one column must become numerically zero.
        #[rustfmt::skip]
        let m = real(4, 4, &[
            0.42464262114829215, -0.4012192380026283, 0.7438353749704769, -0.32467014384360704,
            0.4270039836656428, -0.24316612447327768, -0.7636454296398519, -0.41878812260197185,
            0.42518809877758923, 0.004069442742719864, -0.05317328785385628, 0.9035325792424278,
            0.0, 0.0, 0.0, 0.0,
        ]);
        let (svd, u, v) = jacobi_svd(&to_complex(&m)).unwrap();
        let sigma = DMatrix::from_diagonal(&svd.singular_values.map(|x| Complex::new(x, 0.0)));
        assert!((&u * sigma * v.adjoint() - to_complex(&m)).camax() < 1e-12);
        assert_eq!(svd_sorted(&m).unwrap().rank(&Tolerance::default()), 3);
    }
}
