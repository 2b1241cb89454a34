//! Model-based gain formulas and least-squares identification.
//!
//! All gains follow `u = -K x`. The eigenstructure formulas are the classical
//! ones written for that sign:
//!
//! * [`kautsky_gain`]: `K = Z^-1 Q1^T (A - X Lambda X^-1)` with `B = Q1 Z`.
//! * [`sylvester_gain`]: `B G = X Lambda - A X`, `K = -G X^-1`.
//! * [`projector_gain`]: `K = B^+ (A - X Lambda X^-1)`, valid when
//!   `(I - B B^+)(X Lambda - A X) = 0`.
//!
//! The often-quoted form `K = B + (X Lambda X^-1 - A)` is dimensionally
//! inconsistent; the projector variant above is the consistent reading.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{
    eigenvalues_real, lit, nullspace_basis, numerical_rank, pseudoinverse, range_basis, real_part,
    svd_sorted, to_complex, to_f64, CMatrix, Real, Tolerance,
};
use crate::plant::{controllability_matrix, LtiSystem};
use crate::signals::DataMatrices;
use crate::synthesis::PoleSpec;

/// Least-squares model `[A_hat B_hat] = X1 [X0; U0]^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel<S: Real> {
    pub a_hat: DMatrix<S>,
    pub b_hat: DMatrix<S>,
    /// `||X1 - [A_hat B_hat] [X0; U0]||_F`.
    pub residual: S,
}

impl<S: Real> IdentifiedModel<S> {
    pub fn system(&self) -> Result<LtiSystem<S>> {
        LtiSystem::new(self.a_hat.clone(), self.b_hat.clone())
    }
}

pub fn identify_least_squares<S: Real>(
    dm: &DataMatrices<S>,
    tol: &Tolerance,
) -> Result<IdentifiedModel<S>> {
    let (n, m) = (dm.state_dim(), dm.input_dim());
    let d = dm.stacked();
    let rank = numerical_rank(&d, tol)?;
    if rank < n + m {
        return Err(Error::Unidentifiable {
            rank,
            required: n + m,
        });
    }
    let theta = &dm.x1 * pseudoinverse(&d, tol)?;
    let residual = (&dm.x1 - &theta * &d).norm();
    Ok(IdentifiedModel {
        a_hat: theta.columns(0, n).into_owned(),
        b_hat: theta.columns(n, m).into_owned(),
        residual,
    })
}

fn check_square_spec<S: Real>(sys: &LtiSystem<S>, spec: &PoleSpec<S>) -> Result<()> {
    if spec.len() != sys.state_dim() {
        return Err(Error::InvalidArgument(format!(
            "{} poles for a {}-state system",
            spec.len(),
            sys.state_dim()
        )));
    }
    Ok(())
}

/// Real part of a complex gain, rejecting a non-negligible imaginary part.
fn realify<S: Real>(k: &CMatrix<S>, scale: S, tol: &Tolerance) -> Result<DMatrix<S>> {
    let (re, imag) = real_part(k);
    if imag > lit::<S>(tol.residual_tol) * (S::one() + scale) {
        return Err(Error::Infeasible(format!(
            "gain has imaginary part {:.3e}; eigenvectors are not conjugate-consistent",
            to_f64(imag)
        )));
    }
    Ok(re)
}

/// Relative residual `||(A - B K) X - X Lambda||_F / (||A||_F ||X||_F + ||X Lambda||_F)`.
pub fn eigenstructure_residual<S: Real>(
    sys: &LtiSystem<S>,
    gain: &DMatrix<S>,
    spec: &PoleSpec<S>,
) -> Result<f64> {
    let x = spec
        .eigenvectors()
        .ok_or_else(|| Error::InvalidArgument("pole spec has no eigenvector matrix".into()))?;
    let a_cl = to_complex(&(sys.a() - sys.b() * gain));
    let xl = CMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * spec.poles()[c]);
    let res = to_f64((&a_cl * x - &xl).norm());
    let scale = to_f64(sys.a().norm()) * to_f64(x.norm()) + to_f64(xl.norm());
    Ok(res / scale.max(f64::MIN_POSITIVE))
}

fn verify<S: Real>(
    sys: &LtiSystem<S>,
    gain: DMatrix<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    let r = eigenstructure_residual(sys, &gain, spec)?;
    if !(r <= tol.residual_tol) {
        return Err(Error::Infeasible(format!(
            "(A - B K) X = X Lambda fails with relative residual {r:.3e}"
        )));
    }
    Ok(gain)
}

/// `K = Z^-1 Q1^T (A - X Lambda X^-1)` where `B = Q1 Z` is a thin QR factorization.
pub fn kautsky_gain<S: Real>(
    sys: &LtiSystem<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    check_square_spec(sys, spec)?;
    let target = spec.target_matrix()?;
    let qr = sys.b().clone().qr();
    let (q1, z) = (qr.q(), qr.r());
    let z_inv = z
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("B is rank deficient".into()))?;
    let k = to_complex(&(z_inv * q1.transpose())) * (to_complex(sys.a()) - &target);
    let gain = realify(&k, lit(to_f64(target.norm())), tol)?;
    verify(sys, gain, spec, tol)
}

/// Solves `A X - X Lambda + B G = 0` for `G` in least squares and returns `K = -G X^-1`.
///
/// Requires the spectra of `A` and `Lambda` to be disjoint.
pub fn sylvester_gain<S: Real>(
    sys: &LtiSystem<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    check_square_spec(sys, spec)?;
    let x = spec
        .eigenvectors()
        .ok_or_else(|| Error::InvalidArgument("pole spec has no eigenvector matrix".into()))?;
    let open = eigenvalues_real(sys.a())?;
    let scale = to_f64(sys.a().norm()).max(1.0);
    for p in spec.poles() {
        for q in &open {
            let gap = to_f64((*p - *q).modulus());
            if gap <= tol.residual_tol * scale {
                return Err(Error::Precondition(format!(
                    "requested pole {} is an eigenvalue of A",
                    crate::numerics::c64(*p)
                )));
            }
        }
    }
    let a = to_complex(sys.a());
    let xl = CMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * spec.poles()[c]);
    let g = pseudoinverse(&to_complex(sys.b()), tol)? * (xl - &a * x);
    let x_inv = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("eigenvector matrix is singular".into()))?;
    let k = -(g * x_inv);
    let gain = realify(&k, lit(scale), tol)?;
    verify(sys, gain, spec, tol)
}

/// `K = B^+ (A - X Lambda X^-1)` after checking `(I - B B^+)(X Lambda - A X) = 0`.
pub fn projector_gain<S: Real>(
    sys: &LtiSystem<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    check_square_spec(sys, spec)?;
    let x = spec
        .eigenvectors()
        .ok_or_else(|| Error::InvalidArgument("pole spec has no eigenvector matrix".into()))?;
    let a = to_complex(sys.a());
    let b = to_complex(sys.b());
    let b_pinv = pseudoinverse(&b, tol)?;
    let n = sys.state_dim();
    let xl = CMatrix::from_fn(n, n, |r, c| x[(r, c)] * spec.poles()[c]);
    let defect = &xl - &a * x;
    let outside = &defect - &b * (&b_pinv * &defect);
    let scale = to_f64(a.norm()) * to_f64(x.norm()) + to_f64(xl.norm());
    let r = to_f64(outside.norm()) / scale.max(f64::MIN_POSITIVE);
    if r > tol.residual_tol {
        return Err(Error::Infeasible(format!(
            "projector condition violated with relative residual {r:.3e}"
        )));
    }
    let target = spec.target_matrix()?;
    let k = b_pinv * (a - &target);
    let gain = realify(&k, lit(to_f64(target.norm())), tol)?;
    verify(sys, gain, spec, tol)
}

/// Ackermann's formula `K = e_n^T C^-1 p(A)` for a single-input system.
pub fn ackermann_gain<S: Real>(
    sys: &LtiSystem<S>,
    poles: &[Complex<S>],
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    let n = sys.state_dim();
    if sys.input_dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "Ackermann's formula needs a single input, got {}",
            sys.input_dim()
        )));
    }
    let spec = PoleSpec::new(poles.to_vec())?;
    check_square_spec(sys, &spec)?;
    let c = controllability_matrix(sys);
    let rank = numerical_rank(&c, tol)?;
    if rank < n {
        return Err(Error::Uncontrollable { rank, n });
    }
    // Monic characteristic polynomial, coefficients in ascending order.
    let mut coeffs = vec![Complex::new(S::one(), S::zero())];
    for p in spec.poles() {
        let mut next = vec![Complex::new(S::zero(), S::zero()); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += *c;
            next[k] -= *c * *p;
        }
        coeffs = next;
    }
    // Horner evaluation of p(A).
    let a = sys.a();
    let mut p_a = DMatrix::<S>::identity(n, n);
    for c in coeffs.iter().rev().skip(1) {
        p_a = a * p_a + DMatrix::identity(n, n) * c.re;
    }
    let mut e_n = DMatrix::<S>::zeros(1, n);
    e_n[(0, n - 1)] = S::one();
    // e_n^T C^-1 solved as C^T y = e_n.
    let y = c.transpose().lu().solve(&e_n.transpose()).ok_or_else(|| {
        Error::NumericFailure {
            context: "controllability matrix is singular".into(),
            condition: crate::numerics::condition_number(&c).unwrap_or(f64::INFINITY),
        }
    })?;
    Ok(y.transpose() * p_a)
}

/// Orthonormal basis (n x m) of the closed-loop eigenvectors reachable at `lambda`:
/// the state part of `null([A - lambda I, B])`.
pub fn eigenvector_subspace<S: Real>(
    sys: &LtiSystem<S>,
    lambda: Complex<S>,
    tol: &Tolerance,
) -> Result<CMatrix<S>> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    if lambda.im == S::zero() {
        let mut pencil = DMatrix::zeros(n, n + m);
        pencil
            .columns_mut(0, n)
            .copy_from(&(sys.a() - DMatrix::identity(n, n) * lambda.re));
        pencil.columns_mut(n, m).copy_from(sys.b());
        let null = nullspace_basis(&pencil, tol)?;
        let basis = range_basis(&null.rows(0, n).into_owned(), tol)?;
        return subspace_of_size(to_complex(&basis), n, m);
    }
    let mut pencil = CMatrix::zeros(n, n + m);
    pencil
        .columns_mut(0, n)
        .copy_from(&(to_complex(sys.a()) - CMatrix::identity(n, n) * lambda));
    pencil.columns_mut(n, m).copy_from(&to_complex(sys.b()));
    let null = nullspace_basis(&pencil, tol)?;
    let basis = range_basis(&null.rows(0, n).into_owned(), tol)?;
    subspace_of_size(basis, n, m)
}

fn subspace_of_size<S: Real>(basis: CMatrix<S>, n: usize, m: usize) -> Result<CMatrix<S>> {
    if basis.ncols() != m {
        return Err(Error::Uncontrollable {
            rank: n + m - basis.ncols(),
            n,
        });
    }
    Ok(basis)
}

/// Random eigenvector matrix with each column drawn from the subspace of its
/// pole and conjugate poles carrying conjugate columns, so that a real gain
/// assigning it exists.
pub fn feasible_eigenvectors<S: Real, R: Rng + ?Sized>(
    sys: &LtiSystem<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
    rng: &mut R,
) -> Result<CMatrix<S>> {
    check_square_spec(sys, spec)?;
    let n = sys.state_dim();
    let mut x = CMatrix::zeros(n, n);
    let mut filled = vec![false; n];
    for i in 0..n {
        if filled[i] {
            continue;
        }
        let p = spec.poles()[i];
        let basis = eigenvector_subspace(sys, p, tol)?;
        let coef = DVector::from_fn(basis.ncols(), |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if p.im == S::zero() { 0.0 } else { StandardNormal.sample(rng) };
            Complex::new(lit::<S>(re), lit::<S>(im))
        });
        let mut col = basis * coef;
        col.unscale_mut(col.norm());
        if p.im == S::zero() {
            col = col.map(|z| Complex::new(z.re, S::zero()));
            let nrm = col.norm();
            col.unscale_mut(nrm);
        }
        x.set_column(i, &col);
        filled[i] = true;
        if p.im != S::zero() {
            let j = (i + 1..n)
                .find(|&j| !filled[j] && crate::synthesis::same_pole(spec.poles()[j], p.conj()))
                .ok_or_else(|| Error::InvalidArgument("pole set is not conjugate-closed".into()))?;
            x.set_column(j, &col.map(|z| z.conj()));
            filled[j] = true;
        }
    }
    Ok(x)
}

/// Number of conditioning sweeps in [`model_based_place`].
const SWEEPS: usize = 8;

/// Robust pole placement from a model.
///
/// Chooses each eigenvector in the subspace of its pole and then sweeps over
/// the columns, replacing each by the unit vector in its subspace closest to
/// the orthogonal complement of the others (Kautsky-Nichols-Van Dooren style).
/// The gain is `K = B^+ (A - X Lambda X^-1)`.
pub fn model_based_place<S: Real>(
    sys: &LtiSystem<S>,
    spec: &PoleSpec<S>,
    tol: &Tolerance,
) -> Result<DMatrix<S>> {
    check_square_spec(sys, spec)?;
    spec.check_multiplicity(sys.input_dim())?;
    let n = sys.state_dim();
    let poles = spec.poles();

    // Partner index for complex poles; columns with im < 0 follow their partner.
    let mut partner = vec![None; n];
    let mut used = vec![false; n];
    for i in 0..n {
        if poles[i].im > S::zero() {
            let j = (0..n)
                .find(|&j| {
                    !used[j] && poles[j].im < S::zero()
                        && crate::synthesis::same_pole(poles[j], poles[i].conj())
                })
                .ok_or_else(|| Error::InvalidArgument("pole set is not conjugate-closed".into()))?;
            used[j] = true;
            partner[i] = Some(j);
        }
    }
    let leaders: Vec<usize> = (0..n).filter(|&i| poles[i].im >= S::zero()).collect();

    // Subspaces are shared between repeated poles; the k-th copy starts from
    // the k-th basis vector so the copies are independent.
    let mut subspaces: Vec<CMatrix<S>> = Vec::with_capacity(n);
    let mut x = CMatrix::<S>::zeros(n, n);
    for i in 0..n {
        let basis = match (0..i).find(|&k| crate::synthesis::same_pole(poles[k], poles[i])) {
            Some(k) => subspaces[k].clone(),
            None => eigenvector_subspace(sys, poles[i], tol)?,
        };
        let copy = (0..i)
            .filter(|&k| crate::synthesis::same_pole(poles[k], poles[i]))
            .count();
        x.set_column(i, &basis.column(copy % basis.ncols()));
        subspaces.push(basis);
    }
    for &i in &leaders {
        if let Some(j) = partner[i] {
            x.set_column(j, &x.column(i).map(|z| z.conj()));
        }
    }

    for _ in 0..SWEEPS {
        for &i in &leaders {
            let others: Vec<usize> = (0..n).filter(|&k| k != i && Some(k) != partner[i]).collect();
            let rest = CMatrix::from_fn(n, others.len(), |r, c| x[(r, others[c])]);
            let q = orthogonal_complement_vector(&rest)?;
            let s = &subspaces[i];
            let mut v = s * (s.adjoint() * q);
            let nv = v.norm();
            if nv <= lit::<S>(1e-12) {
                continue;
            }
            v.unscale_mut(nv);
            if poles[i].im == S::zero() {
                // Subspaces of real poles are real; drop round-off.
                v = v.map(|z| Complex::new(z.re, S::zero()));
                let nr = v.norm();
                v.unscale_mut(nr);
            }
            x.set_column(i, &v);
            if let Some(j) = partner[i] {
                x.set_column(j, &v.map(|z| z.conj()));
            }
        }
    }

    let structured = PoleSpec::with_eigenvectors(poles.to_vec(), x)?;
    let target = structured.target_matrix()?;
    let b_pinv = pseudoinverse(&to_complex(sys.b()), tol)?;
    let k = b_pinv * (to_complex(sys.a()) - &target);
    let (gain, _) = real_part(&k);
    Ok(gain)
}

/// Unit vector orthogonal to the columns of `m` (n x (n-1)).
fn orthogonal_complement_vector<T: ComplexField>(m: &DMatrix<T>) -> Result<DVector<T>> {
    let svd = svd_sorted(&m.adjoint())?;
    Ok(svd.v.column(svd.v.ncols() - 1).into_owned())
}
