//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest deviation of `m` from its own adjoint.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let adj = m.adjoint();
    max_abs_diff(m, &adj)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending. The input is symmetrized
/// first so that roundoff-level defects do not poison the decomposition.
pub fn hermitian_eigenvalues(m: &CMat) -> RVec {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    RVec::from_vec(ev)
}

pub fn min_eigenvalue_hermitian(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)[0]
}

fn one_norm(m: &CMat) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

fn one_norm_real(m: &RMat) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant. Suitable for the moderate-dimension generators used here.
pub fn expm(a: &CMat) -> CMat {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    const THETA_13: f64 = 5.371920351148152;
    #[allow(clippy::excessive_precision)]
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scale = c(0.5f64.powi(s));
    let a1 = a.map(|z| z * scale);

    let id = CMat::identity(n, n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (a6.map(|z| z * c(B[13])) + a4.map(|z| z * c(B[11])) + a2.map(|z| z * c(B[9])))
        + a6.map(|z| z * c(B[7]))
        + a4.map(|z| z * c(B[5]))
        + a2.map(|z| z * c(B[3]))
        + id.map(|z| z * c(B[1]));
    let u = &a1 * u_inner;
    let v = &a6 * (a6.map(|z| z * c(B[12])) + a4.map(|z| z * c(B[10])) + a2.map(|z| z * c(B[8])))
        + a6.map(|z| z * c(B[6]))
        + a4.map(|z| z * c(B[4]))
        + a2.map(|z| z * c(B[2]))
        + id.map(|z| z * c(B[0]));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Pade denominator is singular; input norm out of range");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Principal matrix logarithm of a real matrix by inverse scaling and
/// squaring with Denman-Beavers square roots.
///
/// Errors if the matrix is singular or has an eigenvalue on the closed
/// negative real axis, where the principal branch is not defined.
pub fn logm_real(m: &RMat) -> Result<RMat> {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    if n == 0 {
        return Ok(RMat::zeros(0, 0));
    }

    let eigs = m.complex_eigenvalues();
    for ev in eigs.iter() {
        let mag = ev.norm();
        if mag < 1e-300 {
            return Err(Error::Singular(
                "matrix logarithm of a singular matrix".into(),
            ));
        }
        if ev.re < 0.0 && ev.im.abs() <= 1e-12 * mag {
            return Err(Error::LogBranch {
                re: ev.re,
                im: ev.im,
            });
        }
    }

    let id = RMat::identity(n, n);
    let mut a = m.clone();
    let mut k = 0u32;
    while one_norm_real(&(&a - &id)) > 0.05 {
        if k >= 60 {
            return Err(Error::Numerical(
                "matrix logarithm square-root stage did not converge".into(),
            ));
        }
        a = sqrtm_real(&a)?;
        k += 1;
    }

    // log(I + X) by its power series; the norm of X is at most 0.05 here.
    let x = &a - &id;
    let mut term = x.clone();
    let mut acc = RMat::zeros(n, n);
    for j in 1..=18 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        acc += term.map(|v| v * sign / j as f64);
        term = &term * &x;
    }
    Ok(acc.map(|v| v * 2f64.powi(k as i32)))
}

/// Principal square root of a real matrix with no eigenvalues on the closed
/// negative real axis, by the Denman-Beavers iteration.
fn sqrtm_real(m: &RMat) -> Result<RMat> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = RMat::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().ok_or_else(|| {
            Error::Singular("square-root iteration hit a singular iterate".into())
        })?;
        let z_inv = z.clone().try_inverse().ok_or_else(|| {
            Error::Singular("square-root iteration hit a singular iterate".into())
        })?;
        let y_next = (&y + &z_inv).map(|v| v * 0.5);
        let z_next = (&z + &y_inv).map(|v| v * 0.5);
        let delta = one_norm_real(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta <= 1e-14 * one_norm_real(&y).max(1.0) {
            return Ok(y);
        }
    }
    Err(Error::Numerical(
        "matrix square root did not converge".into(),
    ))
}
