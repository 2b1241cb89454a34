//! Randomized invariant checks shared by the property suite and the
//! acceptance run. Each check draws one case from `seed` and returns a
//! description of the violation, if any.

use ddplace::numerics::{numerical_rank, pseudoinverse};
use ddplace::plant::{gaussian_matrix, random_controllable, seeded_rng, simulate};
use ddplace::signals::{extract_data_matrices, hankel, is_persistently_exciting};
use ddplace::{place_poles_with, LtiSystem, PlaceOptions, PoleSpec, SimulationConfig, Tolerance};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A random matrix of random shape, rank deficient in about half the cases.
fn random_matrix(seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed, 1);
    let rows = rng.random_range(1..=8);
    let cols = rng.random_range(1..=8);
    if rng.random_bool(0.5) {
        let rank = rng.random_range(1..=rows.min(cols));
        let left: DMatrix<f64> = gaussian_matrix(rows, rank, 1.0, &mut rng);
        let right: DMatrix<f64> = gaussian_matrix(rank, cols, 1.0, &mut rng);
        left * right
    } else {
        gaussian_matrix(rows, cols, 1.0, &mut rng)
    }
}

/// The four Penrose identities for the computed pseudoinverse.
pub fn penrose(seed: u64) -> Check {
    let a = random_matrix(seed);
    let p = pseudoinverse(&a, &Tolerance::default()).map_err(|e| e.to_string())?;
    ensure(p.shape() == (a.ncols(), a.nrows()), || format!("pinv shape {:?}", p.shape()))?;
    let scale = 1.0 + a.norm() * p.norm();
    let bound = 1e-10 * scale * scale;
    let ap = &a * &p;
    let pa = &p * &a;
    let checks = [
        ("A P A = A", (&ap * &a - &a).amax() / a.amax().max(1e-300)),
        ("P A P = P", (&pa * &p - &p).amax() / p.amax().max(1e-300)),
        ("(A P)^T = A P", (ap.transpose() - &ap).amax()),
        ("(P A)^T = P A", (pa.transpose() - &pa).amax()),
    ];
    for (name, err) in checks {
        ensure(err <= bound, || format!("{name} violated by {err:e} (bound {bound:e})"))?;
    }
    Ok(())
}

/// `hankel(signal, L)` is `L sigma x (T - L + 1)` with block (i, j) = sample i + j.
pub fn hankel_dimensions(seed: u64) -> Check {
    let mut rng = seeded_rng(seed, 2);
    let sigma = rng.random_range(1..=4);
    let len = rng.random_range(1..=30);
    let depth = rng.random_range(1..=len);
    let signal: DMatrix<f64> = gaussian_matrix(sigma, len, 1.0, &mut rng);
    let h = hankel(&signal, depth).map_err(|e| e.to_string())?;
    ensure(h.shape() == (depth * sigma, len - depth + 1), || {
        format!("shape {:?} for sigma={sigma} T={len} L={depth}", h.shape())
    })?;
    for i in 0..depth {
        for j in 0..h.ncols() {
            ensure(h.view((i * sigma, j), (sigma, 1)) == signal.column(i + j), || {
                format!("block ({i}, {j}) is not sample {}", i + j)
            })?;
        }
    }
    ensure(hankel(&signal, len + 1).is_err(), || "depth T + 1 accepted".into())
}

/// Persistent excitation of order L implies order L - 1.
pub fn pe_monotonicity(seed: u64) -> Check {
    let mut rng = seeded_rng(seed, 3);
    let sigma = rng.random_range(1..=3);
    let len = rng.random_range(2..=40);
    // Mix generic signals with low-rank ones (a few sinusoids) so that the
    // order at which excitation is lost varies.
    let signal: DMatrix<f64> = if rng.random_bool(0.5) {
        gaussian_matrix(sigma, len, 1.0, &mut rng)
    } else {
        let freqs: Vec<f64> = (0..rng.random_range(1..=3))
            .map(|_| rng.random_range(0.1..3.0))
            .collect();
        let mix: DMatrix<f64> = gaussian_matrix(sigma, freqs.len(), 1.0, &mut rng);
        DMatrix::from_fn(sigma, len, |r, t| {
            freqs
                .iter()
                .enumerate()
                .map(|(k, w)| mix[(r, k)] * (w * t as f64).sin())
                .sum()
        })
    };
    let tol = Tolerance::default();
    let mut previous = true;
    for order in 1..=len {
        let report = is_persistently_exciting(&signal, order, &tol).map_err(|e| e.to_string())?;
        ensure(previous || !report.persistently_exciting, || {
            format!("PE of order {order} but not of order {}", order - 1)
        })?;
        ensure(report.rank <= report.required_rank, || {
            format!("rank {} above required {}", report.rank, report.required_rank)
        })?;
        previous = report.persistently_exciting;
    }
    Ok(())
}

/// Noiseless data satisfy `X1 = A X0 + B U0`.
pub fn noiseless_data_identity(seed: u64) -> Check {
    let mut rng = seeded_rng(seed, 4);
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=n.min(4));
    let len = rng.random_range(2..=30);
    let a: DMatrix<f64> = gaussian_matrix(n, n, 0.5, &mut rng);
    let b: DMatrix<f64> = gaussian_matrix(n, m, 1.0, &mut rng);
    let sys = LtiSystem::new(a, b).map_err(|e| e.to_string())?;
    let x0: DMatrix<f64> = gaussian_matrix(n, 1, 1.0, &mut rng);
    let mut cfg = SimulationConfig::gaussian(n, len, seed);
    cfg.x0 = DVector::from_column_slice(x0.as_slice());
    let traj = simulate(&sys, &cfg).map_err(|e| e.to_string())?;
    let dm = extract_data_matrices(&traj).map_err(|e| e.to_string())?;
    ensure(dm.samples() == len - 1, || format!("{} samples from T={len}", dm.samples()))?;
    let predicted = sys.a() * &dm.x0 + sys.b() * &dm.u0;
    let scale = 1.0 + dm.x1.amax();
    let err = (&dm.x1 - predicted).amax();
    ensure(err <= 1e-12 * scale, || format!("||X1 - A X0 - B U0|| = {err:e}"))
}

/// `M` from pole placement has rank n, as do `X0 M` and the reported ranks.
pub fn rank_bookkeeping(seed: u64) -> Check {
    let mut rng = seeded_rng(seed, 5);
    let n = rng.random_range(2..=6);
    let m = (n / 2).max(1);
    let sys = random_controllable::<f64>(n, seed).map_err(|e| e.to_string())?;
    let poles: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(-0.9 + 1.8 * (k as f64 + rng.random::<f64>()) / n as f64, 0.0))
        .collect();
    let spec = PoleSpec::new(poles).map_err(|e| e.to_string())?;
    let len = n + m + 2 + rng.random_range(0..=6);
    let mut cfg = SimulationConfig::gaussian(n, len, seed);
    let x0: DMatrix<f64> = gaussian_matrix(n, 1, 1.0, &mut rng);
    cfg.x0 = DVector::from_column_slice(x0.as_slice());
    let dm = extract_data_matrices(&simulate(&sys, &cfg).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let tol = Tolerance::default();
    let opts = PlaceOptions {
        seed,
        ..PlaceOptions::default()
    };
    let r = place_poles_with(&dm, &spec, &tol, &opts).map_err(|e| e.to_string())?;
    ensure(r.m_matrix.shape() == (len - 1, n), || format!("M is {:?}", r.m_matrix.shape()))?;
    ensure(r.rank_m == n && r.rank_x0m == n, || {
        format!("rank M = {}, rank X0 M = {}, n = {n}", r.rank_m, r.rank_x0m)
    })?;
    let x0m = &dm.x0 * &r.m_matrix;
    let recomputed = numerical_rank(&x0m, &tol).map_err(|e| e.to_string())?;
    ensure(recomputed == n, || format!("recomputed rank X0 M = {recomputed}"))?;
    ensure(r.gain.shape() == (m, n), || format!("K is {:?}", r.gain.shape()))
}
