//! Dense complex linear algebra and tolerance-aware subspace calculus.
//!
//! Eigen- and singular-value decompositions are delegated to `nalgebra`; this
//! module adds deterministic ordering, phase normalization, spectral
//! clustering and the subspace operations (span, sum, intersection,
//! complement) everything else is written against.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const MAX_SOLVER_ITERATIONS: usize = 100_000;
/// Components below this magnitude are skipped when choosing the phase anchor.
const PHASE_ANCHOR_EPS: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Relative tolerances used throughout the library. Missing fields take
/// their defaults when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub herm: f64,
    pub orth: f64,
    pub rank: f64,
    pub eig_cluster: f64,
    pub residual: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            orth: 1e-10,
            rank: 1e-9,
            eig_cluster: 1e-8,
            residual: 1e-9,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("herm", self.herm),
            ("orth", self.orth),
            ("rank", self.rank),
            ("eig_cluster", self.eig_cluster),
            ("residual", self.residual),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation(format!(
                    "tolerance `{name}` must be finite and strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Largest entry magnitude.
pub fn norm_max(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn ensure_finite(m: &CMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} contains non-finite entries")))
    }
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c64(x, 0.0))
}

/// `‖M − M†‖_max`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A complex square matrix certified Hermitian.
///
/// The stored matrix is the exact Hermitian part `(M + M†)/2` of the input,
/// which differs from it by at most the admitted tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix, tol: &ToleranceConfig) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Validation(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        ensure_finite(&matrix, "operator")?;
        let defect = hermiticity_defect(&matrix);
        let allowed = tol.herm * (1.0 + norm_max(&matrix));
        if defect > allowed {
            return Err(Error::Validation(format!(
                "operator is not Hermitian: ‖M − M†‖_max = {defect:e} > {allowed:e}"
            )));
        }
        Ok(Self::from_hermitian_part(matrix))
    }

    /// Takes the Hermitian part of `matrix` without any tolerance check.
    pub fn from_hermitian_part(matrix: CMatrix) -> Self {
        let sym = (&matrix + matrix.adjoint()) * c64(0.5, 0.0);
        Self { matrix: sym }
    }

    pub fn from_real(matrix: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<Self> {
        Self::new(real_to_complex(matrix), tol)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&x| c64(x, 0.0)));
        Self {
            matrix: CMatrix::from_diagonal(&d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `frame† · H · frame`. Callers are responsible for checking invariance
    /// first when the result is meant to be a restriction.
    pub fn compress(&self, frame: &CMatrix) -> HermitianOperator {
        Self::from_hermitian_part(frame.adjoint() * &self.matrix * frame)
    }

    /// Residual `‖(I − P)·H·F‖` of a subspace with orthonormal frame `F`.
    pub fn invariance_residual(&self, subspace: &Subspace) -> f64 {
        let hf = &self.matrix * subspace.frame();
        let proj = subspace.frame() * (subspace.frame().adjoint() * &hf);
        (hf - proj).norm()
    }
}

/// Result of a Hermitian eigendecomposition: ascending eigenvalues with
/// phase-normalized unitary eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// `V · diag(f(λ)) · V†`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let factor = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= factor;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Magnitude of the largest eigenvalue, or 1 when the spectrum is all zero.
    pub fn scale(&self) -> f64 {
        let s = self.values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn clusters(&self, rel_tol: f64) -> Vec<Cluster> {
        cluster_spectrum(&self.values, self.scale(), rel_tol)
    }

    /// Columns of `vectors` belonging to `cluster`.
    pub fn cluster_frame(&self, cluster: &Cluster) -> CMatrix {
        let cols: Vec<CVector> = cluster
            .indices
            .iter()
            .map(|&j| self.vectors.column(j).clone_owned())
            .collect();
        columns_to_matrix(self.vectors.nrows(), &cols)
    }
}

pub fn eigh(h: &HermitianOperator) -> Result<Eigh> {
    let n = h.dim();
    if n == 0 {
        return Ok(Eigh {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let decomposition = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, MAX_SOLVER_ITERATIONS)
        .ok_or_else(|| Error::Numeric {
            routine: "eigh",
            detail: format!("no convergence within {MAX_SOLVER_ITERATIONS} iterations (dim {n})"),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[a]
            .partial_cmp(&decomposition.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&j| decomposition.eigenvalues[j]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = decomposition.eigenvectors.column(src).clone_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(Eigh { values, vectors })
}

/// Rotates `v` so that its first non-negligible component is real positive.
fn fix_phase(v: &mut CVector) {
    if let Some(anchor) = v.iter().find(|z| z.norm() > PHASE_ANCHOR_EPS).copied() {
        let rot = anchor.conj() / anchor.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// A group of numerically equal eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub representative: f64,
    pub indices: Vec<usize>,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.indices.len()
    }
}

/// Groups ascending eigenvalues: consecutive values whose gap is at most
/// `rel_tol · scale` share a cluster. The representative is the cluster mean.
pub fn cluster_spectrum(values: &[f64], scale: f64, rel_tol: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    let threshold = rel_tol * scale;
    for (i, &value) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(last) if value - values[i - 1] <= threshold => last.indices.push(i),
            _ => clusters.push(Cluster {
                representative: value,
                indices: vec![i],
            }),
        }
    }
    for cluster in &mut clusters {
        let sum: f64 = cluster.indices.iter().map(|&i| values[i]).sum();
        cluster.representative = sum / cluster.indices.len() as f64;
    }
    clusters
}

/// Smallest gap between adjacent cluster representatives.
pub fn min_cluster_gap(clusters: &[Cluster]) -> Option<f64> {
    clusters
        .windows(2)
        .map(|w| w[1].representative - w[0].representative)
        .min_by(|a, b| a.partial_cmp(b).expect("finite gaps"))
}

/// Thin singular value decomposition `A = L · diag(σ) · R†` with σ descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: CMatrix,
    pub singular_values: Vec<f64>,
    pub right: CMatrix,
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values strictly above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.largest();
        self.singular_values.iter().filter(|&&s| s > cut && s > 0.0).count()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let k = self.singular_values.len();
        let mut scaled = self.left.clone();
        for j in 0..k {
            let s = c64(self.singular_values[j], 0.0);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.right.adjoint()
    }
}

/// Computed from the Hermitian dilation `[[0, A], [A†, 0]]`, whose top `k`
/// eigenpairs are `σ_i` with eigenvectors `(l_i, r_i)/√2`. Directions with
/// `σ` at roundoff level are completed from the orthogonal complements.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    ensure_finite(a, "svd input")?;
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd {
            left: CMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            right: CMatrix::zeros(n, 0),
        });
    }
    let mut dilation = CMatrix::zeros(m + n, m + n);
    dilation.view_mut((0, m), (m, n)).copy_from(a);
    dilation.view_mut((m, 0), (n, m)).copy_from(&a.adjoint());
    let decomposition = eigh(&HermitianOperator { matrix: dilation })?;
    let top: Vec<usize> = (0..k).map(|j| m + n - 1 - j).collect();
    let largest = decomposition.values[top[0]].max(0.0);
    let floor = 64.0 * f64::EPSILON * (m + n) as f64 * largest;
    let mut left = CMatrix::zeros(m, k);
    let mut right = CMatrix::zeros(n, k);
    let mut singular_values = Vec::with_capacity(k);
    let mut reliable = 0;
    for &idx in &top {
        let sigma = decomposition.values[idx].max(0.0);
        singular_values.push(sigma);
        if sigma <= floor || sigma == 0.0 {
            continue;
        }
        let x = decomposition.vectors.column(idx);
        let mut l = x.rows(0, m).clone_owned();
        let mut r = x.rows(m, n).clone_owned();
        let (ln, rn) = (l.norm(), r.norm());
        l /= c64(ln, 0.0);
        r /= c64(rn, 0.0);
        left.set_column(reliable, &l);
        right.set_column(reliable, &r);
        reliable += 1;
    }
    if reliable < k {
        let l_fill = complement_columns(&left.columns(0, reliable).clone_owned(), k - reliable)?;
        let r_fill = complement_columns(&right.columns(0, reliable).clone_owned(), k - reliable)?;
        left.columns_mut(reliable, k - reliable).copy_from(&l_fill);
        right.columns_mut(reliable, k - reliable).copy_from(&r_fill);
    }
    for j in 0..k {
        // Same phase on both sides keeps L·diag(σ)·R† unchanged.
        if let Some(anchor) = left.column(j).iter().find(|z| z.norm() > PHASE_ANCHOR_EPS).copied() {
            let rot = anchor.conj() / anchor.norm();
            let l = left.column(j) * rot;
            let r = right.column(j) * rot;
            left.set_column(j, &l);
            right.set_column(j, &r);
        }
    }
    Ok(Svd {
        left,
        singular_values,
        right,
    })
}

/// `count` orthonormal vectors orthogonal to the columns of `frame`.
fn complement_columns(frame: &CMatrix, count: usize) -> Result<CMatrix> {
    let dim = frame.nrows();
    let residual = CMatrix::identity(dim, dim) - frame * frame.adjoint();
    let decomposition = eigh(&HermitianOperator::from_hermitian_part(residual))?;
    let mut out = CMatrix::zeros(dim, count);
    for j in 0..count {
        out.set_column(j, &decomposition.vectors.column(dim - 1 - j));
    }
    Ok(out)
}

pub fn columns_to_matrix(rows: usize, cols: &[CVector]) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// A subspace of `C^ambient_dim` carried by an orthonormal column frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    frame: CMatrix,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            frame: CMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            frame: CMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Wraps a frame after checking its columns are orthonormal within `tol.orth`.
    pub fn from_frame(frame: CMatrix, tol: &ToleranceConfig) -> Result<Self> {
        ensure_finite(&frame, "subspace frame")?;
        let k = frame.ncols();
        if k > frame.nrows() {
            return Err(Error::Validation(format!(
                "frame has {k} columns in ambient dimension {}",
                frame.nrows()
            )));
        }
        let gram = frame.adjoint() * &frame - CMatrix::identity(k, k);
        let defect = norm_max(&gram);
        if defect > tol.orth {
            return Err(Error::Validation(format!(
                "frame is not orthonormal: ‖F†F − I‖_max = {defect:e}"
            )));
        }
        Ok(Self {
            ambient_dim: frame.nrows(),
            frame,
        })
    }

    pub(crate) fn from_frame_unchecked(frame: CMatrix) -> Self {
        Self {
            ambient_dim: frame.nrows(),
            frame,
        }
    }

    /// Span of the coordinate vectors `e_i` for the given indices.
    pub fn coordinate(ambient_dim: usize, indices: &[usize]) -> Self {
        let mut frame = CMatrix::zeros(ambient_dim, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            frame[(i, j)] = c64(1.0, 0.0);
        }
        Self { ambient_dim, frame }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn is_trivial(&self) -> bool {
        self.dim() == 0
    }

    pub fn frame(&self) -> &CMatrix {
        &self.frame
    }

    pub fn projector(&self) -> CMatrix {
        &self.frame * self.frame.adjoint()
    }

    pub fn project(&self, v: &CVector) -> CVector {
        &self.frame * (self.frame.adjoint() * v)
    }

    fn check_ambient(&self, other_dim: usize) -> Result<()> {
        if self.ambient_dim != other_dim {
            return Err(Error::Validation(format!(
                "ambient dimension mismatch: {} vs {other_dim}",
                self.ambient_dim
            )));
        }
        Ok(())
    }

    /// Distance from `v` to the subspace relative to `‖v‖`.
    pub fn relative_residual(&self, v: &CVector) -> Result<f64> {
        self.check_ambient(v.len())?;
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok((v - self.project(v)).norm() / norm)
    }

    pub fn contains(&self, v: &CVector, tol: &ToleranceConfig) -> Result<bool> {
        Ok(self.relative_residual(v)? <= tol.residual)
    }

    /// True when every frame column of `other` lies in `self`.
    pub fn contains_subspace(&self, other: &Subspace, tol: &ToleranceConfig) -> Result<bool> {
        self.check_ambient(other.ambient_dim)?;
        let residual = other.frame() - self.frame() * (self.frame().adjoint() * other.frame());
        Ok(residual.norm() <= tol.residual * (1.0 + other.dim() as f64).sqrt())
    }

    pub fn sum(&self, other: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
        self.check_ambient(other.ambient_dim)?;
        let mut stacked = CMatrix::zeros(self.ambient_dim, self.dim() + other.dim());
        stacked.columns_mut(0, self.dim()).copy_from(&self.frame);
        stacked
            .columns_mut(self.dim(), other.dim())
            .copy_from(&other.frame);
        Ok(orthonormal_basis(&stacked, tol))
    }

    /// `self ∩ other`: directions of `self` whose distance to `other` is at
    /// most `tol.rank` (sines of principal angles).
    pub fn intersect(&self, other: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
        self.check_ambient(other.ambient_dim)?;
        if self.is_trivial() || other.is_trivial() {
            return Ok(Subspace::zero(self.ambient_dim));
        }
        let residual = &self.frame - &other.frame * (other.frame.adjoint() * &self.frame);
        let decomposition = svd(&residual)?;
        let k = self.dim();
        // Thin SVD of an n×k matrix with k ≤ n returns all k right vectors.
        let cols: Vec<CVector> = (0..k)
            .filter(|&j| decomposition.singular_values[j] <= tol.rank)
            .map(|j| &self.frame * decomposition.right.column(j))
            .collect();
        Ok(orthonormal_basis(&columns_to_matrix(self.ambient_dim, &cols), tol))
    }

    /// Orthogonal complement of `inner` inside `self`. `inner` must be
    /// contained in `self`.
    pub fn complement_within(&self, inner: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
        self.check_ambient(inner.ambient_dim)?;
        if !self.contains_subspace(inner, tol)? {
            return Err(Error::Precondition(
                "complement_within: inner subspace is not contained in the ambient subspace".into(),
            ));
        }
        let residual = &self.frame - &inner.frame * (inner.frame.adjoint() * &self.frame);
        let decomposition = svd(&residual)?;
        // For nested subspaces the singular values are 0 or 1 exactly.
        let cols: Vec<CVector> = (0..decomposition.singular_values.len())
            .filter(|&j| decomposition.singular_values[j] > 0.5)
            .map(|j| decomposition.left.column(j).clone_owned())
            .collect();
        let mut frame = columns_to_matrix(self.ambient_dim, &cols);
        // Polish orthogonality against `inner`.
        frame -= &inner.frame * (inner.frame.adjoint() * &frame);
        Ok(orthonormal_basis(&frame, tol))
    }

    /// Complement in the whole ambient space.
    pub fn complement(&self, tol: &ToleranceConfig) -> Result<Subspace> {
        Subspace::full(self.ambient_dim).complement_within(self, tol)
    }

    /// `‖F_self† · F_other‖`; zero for orthogonal subspaces.
    pub fn overlap(&self, other: &Subspace) -> f64 {
        (self.frame.adjoint() * &other.frame).norm()
    }

    /// Places this subspace into a larger space at coordinate `offset`.
    pub fn embed(&self, offset: usize, total_dim: usize) -> Subspace {
        let mut frame = CMatrix::zeros(total_dim, self.dim());
        frame
            .view_mut((offset, 0), (self.ambient_dim, self.dim()))
            .copy_from(&self.frame);
        Subspace {
            ambient_dim: total_dim,
            frame,
        }
    }

    /// Rows `offset..offset+len` of the frame, as a subspace of `C^len`.
    /// Valid only when the subspace lies inside that coordinate block.
    pub fn restrict_rows(&self, offset: usize, len: usize) -> Subspace {
        Subspace {
            ambient_dim: len,
            frame: self.frame.rows(offset, len).clone_owned(),
        }
    }

    /// Orthonormality defect `‖F†F − I‖_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.dim();
        norm_max(&(self.frame.adjoint() * &self.frame - CMatrix::identity(k, k)))
    }
}

/// Rank-revealing orthonormalization by pivoted modified Gram–Schmidt with
/// one reorthogonalization pass. Columns whose residual falls to
/// `tol.rank · (largest column norm)` are discarded.
pub fn orthonormal_basis(vectors: &CMatrix, tol: &ToleranceConfig) -> Subspace {
    let n = vectors.nrows();
    let scale = (0..vectors.ncols())
        .map(|j| vectors.column(j).norm())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Subspace::zero(n);
    }
    let threshold = tol.rank * scale;
    let mut work = vectors.clone();
    let mut remaining: Vec<usize> = (0..vectors.ncols()).collect();
    let mut basis: Vec<CVector> = Vec::new();
    while basis.len() < n && !remaining.is_empty() {
        // Ties go to the earliest column, so well-conditioned input keeps its order.
        let mut pos = 0;
        let mut best_norm = f64::NEG_INFINITY;
        for (p, &j) in remaining.iter().enumerate() {
            let norm = work.column(j).norm();
            if norm > best_norm * (1.0 + 1e-12) {
                pos = p;
                best_norm = norm;
            }
        }
        if best_norm <= threshold {
            break;
        }
        let j = remaining.remove(pos);
        let mut v = work.column(j).clone_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let norm = v.norm();
        if norm <= threshold {
            continue;
        }
        v /= c64(norm, 0.0);
        for &k in &remaining {
            let c = v.dotc(&work.column(k));
            let update = &v * c;
            let mut col = work.column_mut(k);
            col -= update;
        }
        basis.push(v);
    }
    Subspace::from_frame_unchecked(columns_to_matrix(n, &basis))
}

/// Minimum eigenvalue of a Hermitian operator (`+∞` for dimension 0).
pub fn min_eigenvalue(h: &HermitianOperator) -> Result<f64> {
    Ok(eigh(h)?.values.first().copied().unwrap_or(f64::INFINITY))
}

/// Principal square root of a positive semidefinite operator. Eigenvalues
/// down to `−tol.residual · ‖K‖` are clamped to zero; anything more negative
/// is rejected.
pub fn principal_sqrt_psd(k: &HermitianOperator, tol: &ToleranceConfig) -> Result<HermitianOperator> {
    let decomposition = eigh(k)?;
    let allowed = tol.residual * decomposition.scale();
    if let Some(&min) = decomposition.values.first() {
        if min < -allowed {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance: allowed,
            });
        }
    }
    let root = decomposition.apply(|lambda| c64(lambda.max(0.0).sqrt(), 0.0));
    Ok(HermitianOperator::from_hermitian_part(root))
}

/// Nearest (Frobenius) positive semidefinite operator: negative eigenvalues
/// clamped to zero.
pub fn psd_projection(h: &HermitianOperator) -> Result<HermitianOperator> {
    let decomposition = eigh(h)?;
    Ok(HermitianOperator::from_hermitian_part(
        decomposition.apply(|lambda| c64(lambda.max(0.0), 0.0)),
    ))
}
