//! Symmetric eigendecompositions and the floored inverse-square-root preconditioner.
//!
//! The preconditioner for a coarse gradient block `G` (rows `n`, columns `d`) is
//! built from the top `r + 1` eigenpairs of `Q = G Gᵀ`. Eigenvalues are floored at
//! `m`, the leading `r` directions keep their own inverse square roots, and every
//! other direction shares the `(r+1)`-th one (the "fill" value). Only the compact
//! form is stored, so applying it costs `O(r n d)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_input, invalid_param, Result};

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

const SYMMETRY_TOL: f64 = 1e-12;
const SIGN_TOL: f64 = 1e-12;

/// Dense symmetric matrix with validated entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid_input(format!(
                "symmetric matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("matrix has non-finite entries"));
        }
        let scale = matrix.amax().max(1.0);
        let n = matrix.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(invalid_input(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(matrix))
    }

    /// `G Gᵀ`, symmetrized to remove round-off asymmetry from the product.
    pub fn gram(g: &DMatrix<f64>) -> Result<Self> {
        ensure_finite(g)?;
        Ok(Self::gram_of_finite(g))
    }

    fn gram_of_finite(g: &DMatrix<f64>) -> Self {
        let mut q = g * g.transpose();
        symmetrize(&mut q);
        Self(q)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Leading eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct TruncatedSpectrum {
    pub eigvals: Vec<f64>,
    /// `n × k`, orthonormal columns; column `i` pairs with `eigvals[i]`.
    pub eigvecs: DMatrix<f64>,
}

impl TruncatedSpectrum {
    pub fn len(&self) -> usize {
        self.eigvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigvals.is_empty()
    }

    pub fn source_dim(&self) -> usize {
        self.eigvecs.nrows()
    }

    /// Keep the first `k` pairs.
    pub fn truncate(mut self, k: usize) -> Self {
        let k = k.min(self.len());
        self.eigvals.truncate(k);
        self.eigvecs = self.eigvecs.columns(0, k).into_owned();
        self
    }
}

/// Full eigendecomposition, eigenvalues descending.
pub fn sym_eig_dense(a: &SymMatrix) -> Result<TruncatedSpectrum> {
    ensure_finite(a.as_matrix())?;
    Ok(sorted_eigen(a.as_matrix().clone()))
}

fn sorted_eigen(matrix: DMatrix<f64>) -> TruncatedSpectrum {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigvals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigvecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigvecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    normalize_signs(&mut eigvecs);
    TruncatedSpectrum { eigvals, eigvecs }
}

/// Flip each column so that its first non-negligible entry is positive.
fn normalize_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        if let Some(&lead) = col.iter().find(|v| v.abs() > SIGN_TOL) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.as_slice().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid_input("matrix has non-finite entries"))
    }
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Top-`k` eigenpairs of `Q = G Gᵀ` by randomized subspace iteration.
///
/// When `d < n` the sketch runs on `G` itself and the eigenvalues come out as
/// squared singular values; otherwise `Q` is formed and sketched. Sketch width is
/// `k + oversample`; if that reaches `n` the dense solver is used instead.
/// Negative round-off eigenvalues are clamped to zero.
pub fn randomized_truncated_eig<R: Rng + ?Sized>(
    g: &DMatrix<f64>,
    k: usize,
    oversample: usize,
    power_iters: usize,
    rng: &mut R,
) -> Result<TruncatedSpectrum> {
    let (n, d) = g.shape();
    if n == 0 {
        return Err(invalid_input("gradient block has no rows"));
    }
    if k == 0 || k > n {
        return Err(invalid_param(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    ensure_finite(g)?;

    if g.as_slice().iter().all(|&v| v == 0.0) {
        let eigvecs = DMatrix::identity(n, k);
        return Ok(TruncatedSpectrum { eigvals: vec![0.0; k], eigvecs });
    }

    let width = k + oversample;
    let mut spectrum = if width >= n {
        sorted_eigen(SymMatrix::gram_of_finite(g).into_inner())
    } else if d < n {
        sketch_factor(g, width, power_iters, rng)
    } else {
        let q = SymMatrix::gram_of_finite(g);
        sketch_gram(q.as_matrix(), width, power_iters, rng)
    }
    .truncate(k);

    for v in &mut spectrum.eigvals {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    normalize_signs(&mut spectrum.eigvecs);
    Ok(spectrum)
}

fn sketch_factor<R: Rng + ?Sized>(
    g: &DMatrix<f64>,
    width: usize,
    power_iters: usize,
    rng: &mut R,
) -> TruncatedSpectrum {
    let d = g.ncols();
    let omega = gaussian(d, width, rng);
    let mut basis = orthonormal_basis(g * omega);
    // With d <= width the first sketch already spans range(G) exactly.
    if d > width {
        for _ in 0..power_iters {
            let z = orthonormal_basis(g.transpose() * &basis);
            basis = orthonormal_basis(g * z);
        }
    }
    let b = basis.transpose() * g;
    let mut small = &b * b.transpose();
    symmetrize(&mut small);
    let inner = sorted_eigen(small);
    TruncatedSpectrum { eigvals: inner.eigvals, eigvecs: basis * inner.eigvecs }
}

fn sketch_gram<R: Rng + ?Sized>(q: &DMatrix<f64>, width: usize, power_iters: usize, rng: &mut R) -> TruncatedSpectrum {
    let n = q.nrows();
    let omega = gaussian(n, width, rng);
    let mut basis = orthonormal_basis(q * omega);
    for _ in 0..power_iters {
        basis = orthonormal_basis(q * &basis);
    }
    let mut small = basis.transpose() * q * &basis;
    symmetrize(&mut small);
    let inner = sorted_eigen(small);
    TruncatedSpectrum { eigvals: inner.eigvals, eigvecs: basis * inner.eigvecs }
}

/// `max(λ_i, m)` elementwise.
pub fn floor_eigenvalues(eigvals: &[f64], m: f64) -> Result<Vec<f64>> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid_param(format!("eigenvalue floor must be positive, got {m}")));
    }
    Ok(eigvals.iter().map(|&v| v.max(m)).collect())
}

/// Compact form of the floored inverse square root:
/// `fill · I + basis · diag(correction) · basisᵀ`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    fill: f64,
    basis: DMatrix<f64>,
    correction: Vec<f64>,
    floor: f64,
    floored: Vec<f64>,
    floored_count: usize,
}

pub fn build_inverse_sqrt(spectrum: &TruncatedSpectrum, m: f64) -> Result<Preconditioner> {
    if spectrum.is_empty() {
        return Err(invalid_param("need at least one eigenpair (r + 1 >= 1)"));
    }
    let floored = floor_eigenvalues(&spectrum.eigvals, m)?;
    let floored_count = spectrum.eigvals.iter().filter(|&&v| v < m).count();
    let r = floored.len() - 1;
    let fill = floored[r].powf(-0.5);
    let correction = floored[..r].iter().map(|&v| v.powf(-0.5) - fill).collect();
    Ok(Preconditioner {
        fill,
        basis: spectrum.eigvecs.columns(0, r).into_owned(),
        correction,
        floor: m,
        floored,
        floored_count,
    })
}

impl Preconditioner {
    /// `fill · I` on `n` rows; what an all-zero gradient produces.
    pub fn scaled_identity(n: usize, m: f64) -> Result<Self> {
        let spectrum = TruncatedSpectrum { eigvals: vec![0.0], eigvecs: DMatrix::identity(n, 1) };
        build_inverse_sqrt(&spectrum, m)
    }

    pub fn fill(&self) -> f64 {
        self.fill
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn correction(&self) -> &[f64] {
        &self.correction
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn rank(&self) -> usize {
        self.correction.len()
    }

    pub fn source_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Floored eigenvalues `Λ^m` the operator was built from (length `r + 1`).
    pub fn floored_eigenvalues(&self) -> &[f64] {
        &self.floored
    }

    /// Largest eigenvalue of the floored `Q`; the per-step `M`.
    pub fn max_floored_eigenvalue(&self) -> f64 {
        self.floored[0]
    }

    /// How many of the `r + 1` computed eigenvalues were raised to the floor.
    pub fn floored_count(&self) -> usize {
        self.floored_count
    }

    /// Eigenvalues of the operator itself: `fill + correction[i]` for the kept
    /// directions, then `fill` (with multiplicity `n - r`).
    pub fn operator_eigenvalues(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.correction.iter().map(|c| self.fill + c).collect();
        if self.source_dim() > self.rank() {
            out.push(self.fill);
        }
        out
    }

    pub fn apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if v.nrows() != self.source_dim() {
            return Err(invalid_input(format!("preconditioner acts on {} rows, got {}", self.source_dim(), v.nrows())));
        }
        let mut out = v * self.fill;
        if self.rank() > 0 {
            let mut coeffs = self.basis.transpose() * v;
            for (mut row, &c) in coeffs.row_iter_mut().zip(&self.correction) {
                row *= c;
            }
            out.gemm(1.0, &self.basis, &coeffs, 1.0);
        }
        Ok(out)
    }

    /// Materialize the `n × n` operator. Test and diagnostics use only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.source_dim();
        let mut scaled = self.basis.clone();
        for (mut col, &c) in scaled.column_iter_mut().zip(&self.correction) {
            col *= c;
        }
        DMatrix::identity(n, n) * self.fill + scaled * self.basis.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{low_rank, rel_err, rng};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> SymMatrix {
        SymMatrix::new(DMatrix::from_diagonal(&DVector::from_row_slice(values))).unwrap()
    }

    /// Literal dense construction: full spectrum, every eigenvalue floored,
    /// everything past the r-th replaced by the floored (r+1)-th.
    fn dense_oracle(q: &DMatrix<f64>, r: usize, m: f64) -> DMatrix<f64> {
        let n = q.nrows();
        let eig = SymmetricEigen::new(q.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let tail = eig.eigenvalues[order[r]].max(m).powf(-0.5);
        let mut out = DMatrix::zeros(n, n);
        for (pos, &i) in order.iter().enumerate() {
            let u = eig.eigenvectors.column(i);
            let w = if pos < r { eig.eigenvalues[i].max(m).powf(-0.5) } else { tail };
            out += u * u.transpose() * w;
        }
        out
    }

    #[test]
    fn dense_eig_of_diagonal_is_sorted_permutation() {
        let spec = sym_eig_dense(&diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(spec.eigvals, vec![3.0, 2.0, 1.0]);
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(spec.eigvecs, expected);
    }

    #[test]
    fn dense_eig_of_zero_matrix() {
        let spec = sym_eig_dense(&SymMatrix::new(DMatrix::zeros(4, 4)).unwrap()).unwrap();
        assert!(spec.eigvals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_eig_reconstructs_gram_matrix() {
        let mut rng = rng(3);
        let g = crate::testutil::gaussian(8, 8, &mut rng);
        let a = SymMatrix::gram(&g).unwrap();
        let spec = sym_eig_dense(&a).unwrap();
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(spec.eigvals.clone()));
        let rebuilt = &spec.eigvecs * lambda * spec.eigvecs.transpose();
        assert!(rel_err(&rebuilt, a.as_matrix()) <= 1e-10);
        assert!(spec.eigvals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_non_finite_and_asymmetric() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(SymMatrix::new(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(SymMatrix::new(m).is_err());
        let mut g = DMatrix::zeros(4, 1);
        g[(2, 0)] = f64::INFINITY;
        assert!(randomized_truncated_eig(&g, 2, 10, 2, &mut rng(0)).is_err());
    }

    #[test]
    fn randomized_rank_one_unit_vector() {
        let mut g = DMatrix::zeros(4, 1);
        g[(0, 0)] = 1.0;
        let spec = randomized_truncated_eig(&g, 2, 10, 2, &mut rng(1)).unwrap();
        assert!((spec.eigvals[0] - 1.0).abs() < 1e-14);
        assert!(spec.eigvals[1].abs() < 1e-14);
        assert!((spec.eigvecs[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn randomized_orthogonal_columns() {
        let mut g = DMatrix::zeros(40, 2);
        g[(3, 0)] = 2.0;
        g[(17, 1)] = 1.0;
        // 40 rows with k + p = 12 takes the sketching path
        let spec = randomized_truncated_eig(&g, 2, 10, 2, &mut rng(2)).unwrap();
        assert!((spec.eigvals[0] - 4.0).abs() < 1e-12);
        assert!((spec.eigvals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn randomized_matches_dense_on_tall_factor() {
        let mut rng = rng(4);
        let g = crate::testutil::gaussian(32, 5, &mut rng);
        let spec = randomized_truncated_eig(&g, 6, 10, 2, &mut rng).unwrap();
        let dense = sym_eig_dense(&SymMatrix::gram(&g).unwrap()).unwrap();
        for i in 0..5 {
            let rel = (spec.eigvals[i] - dense.eigvals[i]).abs() / dense.eigvals[i];
            assert!(rel <= 1e-6, "eigenvalue {i}: {rel}");
        }
        assert!(spec.eigvals[5].abs() <= 1e-10 * dense.eigvals[0]);
        let ortho = spec.eigvecs.transpose() * &spec.eigvecs - DMatrix::identity(6, 6);
        assert!(ortho.amax() <= 1e-8);
    }

    #[test]
    fn randomized_matches_dense_on_wide_factor() {
        // d >= n forms Q explicitly; low rank so the sketch is exact
        let mut rng = rng(5);
        let g = low_rank(60, 80, 4, &mut rng);
        let spec = randomized_truncated_eig(&g, 5, 10, 2, &mut rng).unwrap();
        let dense = sym_eig_dense(&SymMatrix::gram(&g).unwrap()).unwrap();
        for i in 0..4 {
            let rel = (spec.eigvals[i] - dense.eigvals[i]).abs() / dense.eigvals[i];
            assert!(rel <= 1e-6, "eigenvalue {i}: {rel}");
        }
    }

    #[test]
    fn randomized_zero_block_is_fully_floored() {
        let g = DMatrix::zeros(30, 3);
        let spec = randomized_truncated_eig(&g, 4, 10, 2, &mut rng(0)).unwrap();
        let p = build_inverse_sqrt(&spec, 1e-8).unwrap();
        assert_eq!(p.fill(), 1e4);
        assert!(p.correction().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn randomized_is_deterministic_per_seed() {
        let g = crate::testutil::gaussian(50, 30, &mut rng(6));
        let a = randomized_truncated_eig(&g, 5, 10, 2, &mut rng(9)).unwrap();
        let b = randomized_truncated_eig(&g, 5, 10, 2, &mut rng(9)).unwrap();
        assert_eq!(a.eigvals, b.eigvals);
        assert_eq!(a.eigvecs, b.eigvecs);
    }

    #[test]
    fn flooring_examples() {
        assert_eq!(floor_eigenvalues(&[4.0, 1.0, 1e-12], 1e-8).unwrap(), vec![4.0, 1.0, 1e-8]);
        assert_eq!(floor_eigenvalues(&[0.0, 0.0, 0.0], 1e-8).unwrap(), vec![1e-8; 3]);
        assert_eq!(floor_eigenvalues(&[5e-9, 2e-9], 1e-8).unwrap(), vec![1e-8, 1e-8]);
        assert!(floor_eigenvalues(&[1.0], 0.0).is_err());
        assert!(floor_eigenvalues(&[1.0], -1.0).is_err());
    }

    #[test]
    fn inverse_sqrt_diagonal_case() {
        let spec = TruncatedSpectrum { eigvals: vec![4.0, 1.0], eigvecs: DMatrix::identity(3, 2) };
        let p = build_inverse_sqrt(&spec, 1e-8).unwrap();
        assert_eq!(p.fill(), 1.0);
        assert_eq!(p.correction(), &[-0.5]);
        let expected = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.5, 1.0, 1.0]));
        assert!((p.to_dense() - &expected).amax() < 1e-15);
        let out = p.apply(&DMatrix::from_element(3, 1, 1.0)).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 1.0, 1.0]);
    }

    #[test]
    fn inverse_sqrt_rank_one_floors_tail() {
        let spec = TruncatedSpectrum { eigvals: vec![9.0, 0.0], eigvecs: DMatrix::identity(4, 2) };
        let p = build_inverse_sqrt(&spec, 1e-4).unwrap();
        assert!((p.fill() - 100.0).abs() < 1e-12);
        assert!((p.correction()[0] - (1.0 / 3.0 - 100.0)).abs() < 1e-12);
        assert_eq!(p.floored_count(), 1);
        assert_eq!(p.max_floored_eigenvalue(), 9.0);
    }

    #[test]
    fn inverse_sqrt_requires_an_eigenpair() {
        let spec = TruncatedSpectrum { eigvals: vec![], eigvecs: DMatrix::zeros(3, 0) };
        assert!(build_inverse_sqrt(&spec, 1e-8).is_err());
    }

    #[test]
    fn inverse_sqrt_matches_full_spectrum_oracle() {
        let mut rng = rng(7);
        let g = crate::testutil::gaussian(16, 16, &mut rng);
        let q = SymMatrix::gram(&g).unwrap();
        let spec = sym_eig_dense(&q).unwrap().truncate(6);
        let p = build_inverse_sqrt(&spec, 1e-8).unwrap();
        let oracle = dense_oracle(q.as_matrix(), 5, 1e-8);
        assert!(rel_err(&p.to_dense(), &oracle) <= 1e-10);
    }

    #[test]
    fn apply_identity_when_rank_zero() {
        let spec = TruncatedSpectrum { eigvals: vec![1.0], eigvecs: DMatrix::identity(5, 1) };
        let p = build_inverse_sqrt(&spec, 1e-8).unwrap();
        let v = crate::testutil::gaussian(5, 3, &mut rng(1));
        assert_eq!(p.apply(&v).unwrap(), v);
    }

    #[test]
    fn apply_matches_dense_operator() {
        let mut rng = rng(8);
        let g = crate::testutil::gaussian(20, 7, &mut rng);
        let spec = randomized_truncated_eig(&g, 4, 10, 2, &mut rng).unwrap();
        let p = build_inverse_sqrt(&spec, 1e-3).unwrap();
        let v = crate::testutil::gaussian(20, 6, &mut rng);
        let fast = p.apply(&v).unwrap();
        let dense = p.to_dense() * &v;
        assert!((fast - &dense).amax() <= 1e-12 * dense.amax().max(1.0));
        assert!(p.apply(&crate::testutil::gaussian(19, 1, &mut rng)).is_err());
    }

    #[test]
    fn scaled_identity_fill() {
        let p = Preconditioner::scaled_identity(3, 0.25).unwrap();
        assert_eq!(p.fill(), 2.0);
        assert_eq!(p.rank(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn floor_is_lower_bound(values in prop::collection::vec(-1.0f64..10.0, 1..20), m in 1e-10f64..1.0) {
            let out = floor_eigenvalues(&values, m).unwrap();
            prop_assert!(out.iter().all(|&v| v >= m));
        }

        #[test]
        fn operator_spectrum_in_bounds(n in 4usize..40, d in 1usize..12, k in 1usize..6, seed in 0u64..1000, m in 1e-8f64..1e-1) {
            let k = k.min(n);
            let mut rng = rng(seed);
            let g = crate::testutil::gaussian(n, d, &mut rng);
            let spec = randomized_truncated_eig(&g, k, 10, 2, &mut rng).unwrap();
            let p = build_inverse_sqrt(&spec, m).unwrap();
            let cap = m.powf(-0.5);
            prop_assert!(p.fill() <= cap * (1.0 + 1e-12));
            prop_assert!(p.correction().iter().all(|&c| c <= 1e-12 * cap));
            for ev in p.operator_eigenvalues() {
                prop_assert!(ev > 0.0 && ev <= cap * (1.0 + 1e-12));
            }
        }

        #[test]
        fn apply_is_symmetric(n in 3usize..30, d in 1usize..8, seed in 0u64..1000) {
            let mut rng = rng(seed);
            let g = crate::testutil::gaussian(n, d, &mut rng);
            let spec = randomized_truncated_eig(&g, 3.min(n), 10, 2, &mut rng).unwrap();
            let p = build_inverse_sqrt(&spec, 1e-4).unwrap();
            let u = crate::testutil::gaussian(n, 1, &mut rng);
            let v = crate::testutil::gaussian(n, 1, &mut rng);
            let lhs = u.dot(&p.apply(&v).unwrap());
            let rhs = p.apply(&u).unwrap().dot(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        }

        #[test]
        fn scaling_block_scales_spectrum(n in 12usize..30, seed in 0u64..1000, s in 0.1f64..10.0) {
            let mut rng_a = rng(seed);
            let g = crate::testutil::gaussian(n, 2, &mut rng_a);
            let base = randomized_truncated_eig(&g, 2, 10, 2, &mut rng(seed + 1)).unwrap();
            let scaled = randomized_truncated_eig(&(&g * s), 2, 10, 2, &mut rng(seed + 1)).unwrap();
            for (a, b) in base.eigvals.iter().zip(&scaled.eigvals) {
                prop_assert!((b - s * s * a).abs() <= 1e-9 * s * s * a.abs().max(1e-300));
            }
            let m = 1e-12;
            let pa = build_inverse_sqrt(&base, m).unwrap();
            let pb = build_inverse_sqrt(&scaled, m).unwrap();
            let c0 = pa.fill() + pa.correction()[0];
            let c1 = pb.fill() + pb.correction()[0];
            prop_assert!((c1 - c0 / s).abs() <= 1e-8 * c0 / s);
        }
    }
}
