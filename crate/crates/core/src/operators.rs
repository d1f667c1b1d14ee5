//! Density matrices, vectorization, and the superoperator calculus used by
//! every generator: dissipators, commutators, and the real-coordinate view
//! of ρ used for observation and error metrics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, hermitian_part, min_eigenvalue_hermitian, CMat, CVec, RMat, RVec, I};

/// Density matrices are plain complex matrices; validity is checked, not
/// encoded in the type, because intermediate algebra routinely leaves the
/// manifold (basis matrices, differences, generator outputs).
pub type DensityMatrix = CMat;

/// Deviations of a candidate density matrix from the defining properties.
#[derive(Debug, Clone, Copy)]
pub struct DensityDefects {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

pub fn density_defects(rho: &CMat) -> DensityDefects {
    DensityDefects {
        hermiticity: hermiticity_defect(rho),
        trace: (rho.trace() - c(1.0)).norm(),
        min_eigenvalue: min_eigenvalue_hermitian(rho),
    }
}

/// |ψ⟩⟨ψ| for a normalized state vector.
pub fn pure_density(psi: &CVec) -> CMat {
    let n2 = psi.norm();
    let psi = psi.map(|z| z / c(n2));
    let d = psi.len();
    CMat::from_fn(d, d, |i, j| psi[i] * psi[j].conj())
}

/// Column-stacking vectorization: vec(ρ)[i + j·d] = ρ[i, j].
pub fn vectorize(rho: &CMat) -> CVec {
    CVec::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVec, dim: usize) -> CMat {
    assert_eq!(v.len(), dim * dim, "vector length must be dim²");
    CMat::from_column_slice(dim, dim, v.as_slice())
}

/// A d²×d² matrix acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    pub mat: CMat,
}

impl Superoperator {
    pub fn new(dim: usize, mat: CMat) -> Self {
        assert_eq!(mat.nrows(), dim * dim);
        assert_eq!(mat.ncols(), dim * dim);
        Superoperator { dim, mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Superoperator {
            dim,
            mat: CMat::zeros(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        assert_eq!(rho.nrows(), self.dim);
        unvectorize(&(&self.mat * vectorize(rho)), self.dim)
    }

    pub fn add_assign(&mut self, other: &Superoperator) {
        assert_eq!(self.dim, other.dim);
        self.mat += &other.mat;
    }

    pub fn scaled(&self, factor: Complex64) -> Superoperator {
        Superoperator {
            dim: self.dim,
            mat: self.mat.map(|z| z * factor),
        }
    }

    /// Largest |entry| of the difference with another superoperator.
    pub fn max_abs_diff(&self, other: &Superoperator) -> f64 {
        crate::linalg::max_abs_diff(&self.mat, &other.mat)
    }

    /// Largest entry of ⟨vec(1)| L, which must vanish for any
    /// trace-preserving generator.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let id_vec = vectorize(&CMat::identity(self.dim, self.dim));
        let row = self.mat.ad_mul(&id_vec);
        row.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest Hermiticity defect of L(E) over the Hermitian coordinate
    /// basis matrices E; zero for any physical generator.
    pub fn hermiticity_preservation_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for element in coordinate_elements(self.dim) {
            let image = self.apply(&element.basis_matrix(self.dim));
            worst = worst.max(hermiticity_defect(&image));
        }
        worst
    }
}

/// Superoperator of ρ ↦ A ρ B (column-stacking convention: Bᵀ ⊗ A).
pub fn sandwich_superop(a: &CMat, b: &CMat) -> Superoperator {
    let d = a.nrows();
    assert_eq!(b.nrows(), d);
    Superoperator::new(d, b.transpose().kronecker(a))
}

/// Superoperator of ρ ↦ c ρ c† − ½{c†c, ρ}.
pub fn dissipator_superop(op: &CMat) -> Result<Superoperator> {
    if op.nrows() != op.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "dissipator operator must be square, got {}×{}",
            op.nrows(),
            op.ncols()
        )));
    }
    let d = op.nrows();
    let id = CMat::identity(d, d);
    let cdc = op.adjoint() * op;
    let mat = op.map(|z| z.conj()).kronecker(op)
        - (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)).map(|z| z * c(0.5));
    Ok(Superoperator::new(d, mat))
}

/// Superoperator of ρ ↦ −i[H, ρ]. Rejects non-Hermitian H.
pub fn commutator_superop(h: &CMat) -> Result<Superoperator> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian must be square, got {}×{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let defect = hermiticity_defect(h);
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian { defect });
    }
    let d = h.nrows();
    let id = CMat::identity(d, d);
    let mat = (id.kronecker(h) - h.transpose().kronecker(&id)).map(|z| z * (-I));
    Ok(Superoperator::new(d, mat))
}

/// One real coordinate of a Hermitian matrix: a population or the real or
/// imaginary part of an upper-triangle coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Pop(usize),
    ReCoh(usize, usize),
    ImCoh(usize, usize),
}

impl Element {
    pub fn extract(&self, rho: &CMat) -> f64 {
        match *self {
            Element::Pop(i) => rho[(i, i)].re,
            Element::ReCoh(i, j) => rho[(i, j)].re,
            Element::ImCoh(i, j) => rho[(i, j)].im,
        }
    }

    /// Hermitian matrix with this coordinate set to 1 and all others 0.
    pub fn basis_matrix(&self, dim: usize) -> CMat {
        let mut m = CMat::zeros(dim, dim);
        match *self {
            Element::Pop(i) => m[(i, i)] = c(1.0),
            Element::ReCoh(i, j) => {
                m[(i, j)] = c(1.0);
                m[(j, i)] = c(1.0);
            }
            Element::ImCoh(i, j) => {
                m[(i, j)] = I;
                m[(j, i)] = -I;
            }
        }
        m
    }

    pub fn label(&self) -> String {
        match *self {
            Element::Pop(i) => format!("p{i}"),
            Element::ReCoh(i, j) => format!("re{i}{j}"),
            Element::ImCoh(i, j) => format!("im{i}{j}"),
        }
    }
}

/// Canonical coordinate order: populations, then (Re, Im) of each
/// upper-triangle coherence in row-major order. Length d².
pub fn coordinate_elements(dim: usize) -> Vec<Element> {
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        out.push(Element::Pop(i));
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            out.push(Element::ReCoh(i, j));
            out.push(Element::ImCoh(i, j));
        }
    }
    out
}

/// Real coordinates of a Hermitian matrix in the canonical order.
pub fn real_coordinates(rho: &CMat) -> RVec {
    let elements = coordinate_elements(rho.nrows());
    RVec::from_iterator(elements.len(), elements.iter().map(|e| e.extract(rho)))
}

/// Inverse of real_coordinates.
pub fn matrix_from_real_coordinates(coords: &RVec, dim: usize) -> CMat {
    assert_eq!(coords.len(), dim * dim);
    let mut m = CMat::zeros(dim, dim);
    for (k, element) in coordinate_elements(dim).iter().enumerate() {
        m += element.basis_matrix(dim).map(|z| z * c(coords[k]));
    }
    m
}

/// The generator expressed on the real coordinates: the unique real d²×d²
/// matrix G with real_coordinates(L(ρ)) = G · real_coordinates(ρ) for
/// Hermitian ρ. Errors if L does not preserve Hermiticity.
pub fn generator_in_real_coords(l: &Superoperator) -> Result<RMat> {
    let d = l.dim();
    let n = d * d;
    let elements = coordinate_elements(d);
    let mut g = RMat::zeros(n, n);
    let scale = l.mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for (k, element) in elements.iter().enumerate() {
        let image = l.apply(&element.basis_matrix(d));
        if hermiticity_defect(&image) > 1e-11 * scale {
            return Err(Error::Numerical(
                "superoperator does not preserve Hermiticity; no real form exists".into(),
            ));
        }
        let column = real_coordinates(&hermitian_part(&image));
        for i in 0..n {
            g[(i, k)] = column[i];
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ket(entries: &[Complex64]) -> CVec {
        CVec::from_column_slice(entries)
    }

    #[test]
    fn vectorize_identity_over_two() {
        let rho = CMat::identity(2, 2).map(|z| z * c(0.5));
        let v = vectorize(&rho);
        assert_eq!(v.len(), 4);
        assert_relative_eq!(v[0].re, 0.5);
        assert_relative_eq!(v[1].re, 0.0);
        assert_relative_eq!(v[2].re, 0.0);
        assert_relative_eq!(v[3].re, 0.5);
    }

    #[test]
    fn vectorize_slot_convention() {
        // |0⟩⟨1| lands at index 0 + 1·2 = 2 under column stacking.
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        let v = vectorize(&m);
        for k in 0..4 {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert_relative_eq!(v[k].re, want);
        }
    }

    #[test]
    fn vectorize_round_trip() {
        let m = CMat::from_fn(3, 3, |i, j| Complex64::new((i + 3 * j) as f64, (i * j) as f64));
        let h = hermitian_part(&m);
        assert_eq!(unvectorize(&vectorize(&h), 3), h);
    }

    #[test]
    fn dissipator_two_level_decay() {
        // c = √γ |g⟩⟨e| with level 0 = excited, level 1 = ground.
        let gamma: f64 = 0.37;
        let mut op = CMat::zeros(2, 2);
        op[(1, 0)] = c(gamma.sqrt());
        let diss = dissipator_superop(&op).unwrap();

        let excited = pure_density(&ket(&[c(1.0), c(0.0)]));
        let rate = diss.apply(&excited);
        assert_relative_eq!(rate[(0, 0)].re, -gamma, epsilon = 1e-14);
        assert_relative_eq!(rate[(1, 1)].re, gamma, epsilon = 1e-14);

        let plus = pure_density(&ket(&[c(1.0), c(1.0)]));
        let rate = diss.apply(&plus);
        // Coherence decays at γ/2.
        assert_relative_eq!(rate[(0, 1)].re, -gamma / 2.0 * plus[(0, 1)].re, epsilon = 1e-14);
    }

    #[test]
    fn dissipator_zero_operator() {
        let diss = dissipator_superop(&CMat::zeros(3, 3)).unwrap();
        assert_eq!(diss.mat, CMat::zeros(9, 9));
    }

    #[test]
    fn dissipator_scales_quadratically() {
        let op = CMat::from_fn(2, 2, |i, j| Complex64::new(i as f64 + 0.3, j as f64 - 0.7));
        let alpha = Complex64::new(0.6, -1.1);
        let scaled = dissipator_superop(&op.map(|z| z * alpha)).unwrap();
        let base = dissipator_superop(&op).unwrap();
        let diff = scaled.max_abs_diff(&base.scaled(c(alpha.norm_sqr())));
        assert!(diff < 1e-12, "quadratic scaling violated: {diff}");
    }

    #[test]
    fn commutator_rotates_coherence() {
        let omega = 2.2;
        let h = CMat::from_diagonal(&ket(&[c(omega / 2.0), c(-omega / 2.0)]));
        let comm = commutator_superop(&h).unwrap();
        let plus = pure_density(&ket(&[c(1.0), c(1.0)]));
        let rate = comm.apply(&plus);
        // dρ01/dt = −iω ρ01: pure rotation at frequency ω.
        let expect = -I * c(omega) * plus[(0, 1)];
        assert_relative_eq!(rate[(0, 1)].re, expect.re, epsilon = 1e-14);
        assert_relative_eq!(rate[(0, 1)].im, expect.im, epsilon = 1e-14);
        assert_relative_eq!(rate.trace().norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_rejects_non_hermitian() {
        let mut h = CMat::zeros(2, 2);
        h[(0, 1)] = c(1.0);
        assert!(matches!(
            commutator_superop(&h),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn trace_annihilation_of_lindblad_pieces() {
        let mut op = CMat::zeros(3, 3);
        op[(2, 0)] = Complex64::new(0.4, 0.1);
        op[(1, 0)] = c(0.9);
        let mut l = dissipator_superop(&op).unwrap();
        let h = hermitian_part(&CMat::from_fn(3, 3, |i, j| {
            Complex64::new((i * j) as f64, i as f64 - j as f64)
        }));
        l.add_assign(&commutator_superop(&h).unwrap());
        assert!(l.trace_annihilation_defect() < 1e-10);
        assert!(l.hermiticity_preservation_defect() < 1e-12);
    }

    #[test]
    fn real_coordinates_round_trip() {
        let m = hermitian_part(&CMat::from_fn(3, 3, |i, j| {
            Complex64::new(0.3 * (i as f64) - 0.1, 0.2 * (j as f64) + 0.05)
        }));
        let coords = real_coordinates(&m);
        assert_eq!(coords.len(), 9);
        let back = matrix_from_real_coordinates(&coords, 3);
        assert!(crate::linalg::max_abs_diff(&m, &back) < 1e-14);
    }

    #[test]
    fn real_form_of_two_level_decay() {
        // Basis (p0, p1, re01, im01) with level 0 excited: decay γ moves
        // population down and damps the coherence at γ/2.
        let gamma: f64 = 0.8;
        let mut op = CMat::zeros(2, 2);
        op[(1, 0)] = c(gamma.sqrt());
        let l = dissipator_superop(&op).unwrap();
        let g = generator_in_real_coords(&l).unwrap();
        let want = RMat::from_row_slice(
            4,
            4,
            &[
                -gamma, 0.0, 0.0, 0.0, //
                gamma, 0.0, 0.0, 0.0, //
                0.0, 0.0, -gamma / 2.0, 0.0, //
                0.0, 0.0, 0.0, -gamma / 2.0,
            ],
        );
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(g[(i, j)], want[(i, j)], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = CMat::from_fn(2, 2, |i, j| Complex64::new(i as f64, j as f64 + 0.5));
        let b = CMat::from_fn(2, 2, |i, j| Complex64::new(j as f64 - 0.2, i as f64));
        let rho = hermitian_part(&CMat::from_fn(2, 2, |i, j| {
            Complex64::new(0.4 + i as f64, 0.1 * j as f64)
        }));
        let s = sandwich_superop(&a, &b);
        assert!(crate::linalg::max_abs_diff(&s.apply(&rho), &(&a * &rho * &b)) < 1e-13);
    }
}
