//! Orbits, the coupled/decoupled split of a conservative system, minimal and
//! reconstructible subsystems, spectral multiplicities, strings and the
//! eigenmode reconstructibility test.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ConservativeSystem;
use crate::numerics::{
    eigh, min_cluster_gap, norm_max, orthonormal_basis, svd, CMatrix, CVector, HermitianOperator, Subspace,
    ToleranceConfig,
};

/// Smallest `Ω`-invariant subspace containing `seed`: the span of the
/// eigen-cluster projections `π_α(seed)`.
pub fn orbit(op: &HermitianOperator, seed: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if seed.ambient_dim() != op.dim() {
        return Err(Error::Validation(format!(
            "seed lives in dimension {}, operator in {}",
            seed.ambient_dim(),
            op.dim()
        )));
    }
    if seed.is_trivial() {
        return Ok(Subspace::zero(op.dim()));
    }
    let decomposition = eigh(op)?;
    let clusters = decomposition.clusters(tol.eig_cluster);
    let mut columns = CMatrix::zeros(op.dim(), clusters.len() * seed.dim());
    for (c, cluster) in clusters.iter().enumerate() {
        let frame = decomposition.cluster_frame(cluster);
        let projected = &frame * (frame.adjoint() * seed.frame());
        columns.columns_mut(c * seed.dim(), seed.dim()).copy_from(&projected);
    }
    Ok(orthonormal_basis(&columns, tol))
}

/// Smallest gap between distinct eigen-clusters of `op`; small values flag
/// results that are sensitive to the clustering tolerance.
pub fn cluster_gap(op: &HermitianOperator, tol: &ToleranceConfig) -> Result<Option<f64>> {
    let decomposition = eigh(op)?;
    Ok(min_cluster_gap(&decomposition.clusters(tol.eig_cluster)))
}

/// `H₁ = H₁c ⊕ H₁d`, `H₂ = H₂c ⊕ H₂d`, all as subspaces of the full space.
#[derive(Debug, Clone)]
pub struct CoupledParts {
    pub h1c: Subspace,
    pub h1d: Subspace,
    pub h2c: Subspace,
    pub h2d: Subspace,
    n1: usize,
    n2: usize,
}

impl CoupledParts {
    pub fn dims(&self) -> [usize; 4] {
        [self.h1c.dim(), self.h1d.dim(), self.h2c.dim(), self.h2d.dim()]
    }

    /// `H₁c` in the coordinates of `H₁`.
    pub fn h1c_local(&self) -> Subspace {
        self.h1c.restrict_rows(0, self.n1)
    }

    pub fn h1d_local(&self) -> Subspace {
        self.h1d.restrict_rows(0, self.n1)
    }

    /// `H₂c` in the coordinates of `H₂`.
    pub fn h2c_local(&self) -> Subspace {
        self.h2c.restrict_rows(self.n1, self.n2)
    }

    pub fn h2d_local(&self) -> Subspace {
        self.h2d.restrict_rows(self.n1, self.n2)
    }

    /// Swaps the observable coupled and decoupled parts. Only useful for
    /// checking that the four-block residual detects a wrong split.
    pub fn with_observable_parts_swapped(&self) -> CoupledParts {
        CoupledParts {
            h1c: self.h1d.clone(),
            h1d: self.h1c.clone(),
            ..self.clone()
        }
    }
}

/// `H₁c = O_{Ω₁}(Ran Γ)`, `H₂c = O_{Ω₂}(Ran Γ†)` and their complements.
pub fn coupled_parts(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<CoupledParts> {
    let (n1, n2) = (system.n1(), system.n2());
    let gamma = system.gamma();
    let range1 = orthonormal_basis(&gamma, tol);
    let range2 = orthonormal_basis(&gamma.adjoint(), tol);
    let h1c = orbit(&system.omega1(), &range1, tol)?;
    let h2c = orbit(&system.omega2(), &range2, tol)?;
    let h1d = h1c.complement(tol)?;
    let h2d = h2c.complement(tol)?;
    let total = n1 + n2;
    Ok(CoupledParts {
        h1c: h1c.embed(0, total),
        h1d: h1d.embed(0, total),
        h2c: h2c.embed(n1, total),
        h2d: h2d.embed(n1, total),
        n1,
        n2,
    })
}

/// Largest entry of the ten blocks of `Ω` that must vanish in the basis
/// `(h1d, h1c, h2c, h2d)`.
pub fn four_block_residual(system: &ConservativeSystem, parts: &CoupledParts) -> f64 {
    let blocks = [&parts.h1d, &parts.h1c, &parts.h2c, &parts.h2d];
    let allowed = [(0, 0), (1, 1), (1, 2), (2, 1), (2, 2), (3, 3)];
    let mut worst = 0.0_f64;
    for (i, bi) in blocks.iter().enumerate() {
        for (j, bj) in blocks.iter().enumerate() {
            if allowed.contains(&(i, j)) || bi.is_trivial() || bj.is_trivial() {
                continue;
            }
            let block = bi.frame().adjoint() * system.omega().matrix() * bj.frame();
            worst = worst.max(norm_max(&block));
        }
    }
    worst
}

fn invariance_allowance(op: &HermitianOperator, tol: &ToleranceConfig) -> f64 {
    tol.residual * op.norm().max(f64::MIN_POSITIVE)
}

fn ensure_invariant(op: &HermitianOperator, subspace: &Subspace, tol: &ToleranceConfig) -> Result<()> {
    let residual = op.invariance_residual(subspace);
    let allowed = invariance_allowance(op, tol);
    if residual > allowed {
        return Err(Error::Precondition(format!(
            "subspace is not invariant: ‖(I − P)ΩP‖ = {residual:e} > {allowed:e}"
        )));
    }
    Ok(())
}

/// Restriction of a system to `F₁ ⊕ F₂`, where `F₁` (resp. `F₂`) is an
/// orthonormal frame in `H₁` (resp. `H₂`) coordinates. The sum must be
/// invariant under `Ω`.
pub fn restrict(
    system: &ConservativeSystem,
    frame1: &CMatrix,
    frame2: &CMatrix,
    tol: &ToleranceConfig,
) -> Result<ConservativeSystem> {
    let (n1, n2) = (system.n1(), system.n2());
    if frame1.nrows() != n1 || frame2.nrows() != n2 {
        return Err(Error::Validation("restriction frames have the wrong ambient dimension".into()));
    }
    let k1 = frame1.ncols();
    let k2 = frame2.ncols();
    let mut frame = CMatrix::zeros(n1 + n2, k1 + k2);
    frame.view_mut((0, 0), (n1, k1)).copy_from(frame1);
    frame.view_mut((n1, k1), (n2, k2)).copy_from(frame2);
    let subspace = Subspace::from_frame(frame, tol)?;
    ensure_invariant(system.omega(), &subspace, tol)?;
    let compressed = system.omega().compress(subspace.frame());
    ConservativeSystem::from_omega(k1, compressed.into_matrix(), tol)
}

/// Restriction to `H₁ ⊕ H₂c`: the minimal conservative extension of `H₁`
/// inside the given system.
pub fn minimal_subsystem(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<ConservativeSystem> {
    let parts = coupled_parts(system, tol)?;
    let n1 = system.n1();
    restrict(system, &CMatrix::identity(n1, n1), parts.h2c_local().frame(), tol)
}

/// Restriction to `H₁c ⊕ H₂c`.
pub fn reconstructible_core(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<ConservativeSystem> {
    let parts = coupled_parts(system, tol)?;
    restrict(system, parts.h1c_local().frame(), parts.h2c_local().frame(), tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterMultiplicity {
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub max_mult: usize,
    pub per_cluster: Vec<ClusterMultiplicity>,
    /// Smallest gap between adjacent clusters, if there are at least two.
    pub min_gap: Option<f64>,
}

/// Eigen-cluster multiplicities of `op` restricted to an invariant subspace.
pub fn multiplicity(op: &HermitianOperator, subspace: &Subspace, tol: &ToleranceConfig) -> Result<MultiplicityReport> {
    if subspace.ambient_dim() != op.dim() {
        return Err(Error::Validation("subspace and operator dimensions differ".into()));
    }
    ensure_invariant(op, subspace, tol)?;
    let compressed = op.compress(subspace.frame());
    let decomposition = eigh(&compressed)?;
    let clusters = decomposition.clusters(tol.eig_cluster);
    let per_cluster: Vec<ClusterMultiplicity> = clusters
        .iter()
        .map(|c| ClusterMultiplicity {
            eigenvalue: c.representative,
            multiplicity: c.multiplicity(),
        })
        .collect();
    Ok(MultiplicityReport {
        max_mult: per_cluster.iter().map(|c| c.multiplicity).max().unwrap_or(0),
        min_gap: min_cluster_gap(&clusters),
        per_cluster,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub bound: usize,
    pub observed: usize,
    pub slack_per_cluster: Vec<i64>,
    pub holds: bool,
}

impl BoundCheck {
    fn new(name: &str, bound: usize, report: &MultiplicityReport) -> Self {
        Self {
            name: name.to_string(),
            bound,
            observed: report.max_mult,
            slack_per_cluster: report
                .per_cluster
                .iter()
                .map(|c| bound as i64 - c.multiplicity as i64)
                .collect(),
            holds: report.max_mult <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub rank_gamma: usize,
    pub h1c_dim: usize,
    pub h2c_dim: usize,
    pub h_min_dim: usize,
    pub mult_omega1_h1c: MultiplicityReport,
    pub mult_omega2_h2c: MultiplicityReport,
    pub mult_omega_h_min: MultiplicityReport,
    pub checks: Vec<BoundCheck>,
    pub violations: Vec<String>,
}

impl BoundReport {
    pub fn satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Numerical rank of `Γ` with the `τ_rank` cut.
pub fn rank_gamma(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<usize> {
    Ok(svd(&system.gamma())?.rank(tol.rank))
}

/// Checks `mult(Ωᵢ↾H_ic) ≤ rank Γ` and, when `H₁c = H₁`,
/// `mult(Ω↾H_min) ≤ min(n1, 2·rank Γ)`.
pub fn check_multiplicity_bounds(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<BoundReport> {
    let parts = coupled_parts(system, tol)?;
    let rank = rank_gamma(system, tol)?;
    let mult1 = multiplicity(&system.omega1(), &parts.h1c_local(), tol)?;
    let mult2 = multiplicity(&system.omega2(), &parts.h2c_local(), tol)?;
    let h_min = system.h1().sum(&parts.h2c, tol)?;
    let mult_min = multiplicity(system.omega(), &h_min, tol)?;

    let mut checks = vec![
        BoundCheck::new("mult(Ω₁↾H₁c) ≤ rank Γ", rank, &mult1),
        BoundCheck::new("mult(Ω₂↾H₂c) ≤ rank Γ", rank, &mult2),
    ];
    if parts.h1c.dim() == system.n1() {
        checks.push(BoundCheck::new(
            "mult(Ω↾H_min) ≤ min(n1, 2 rank Γ)",
            system.n1().min(2 * rank),
            &mult_min,
        ));
    }
    let violations = checks
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{}: observed {} > bound {}", c.name, c.observed, c.bound))
        .collect();
    Ok(BoundReport {
        rank_gamma: rank,
        h1c_dim: parts.h1c.dim(),
        h2c_dim: parts.h2c.dim(),
        h_min_dim: h_min.dim(),
        mult_omega1_h1c: mult1,
        mult_omega2_h2c: mult2,
        mult_omega_h_min: mult_min,
        checks,
        violations,
    })
}

/// One string: an `Ω₂c`-invariant subspace of simple spectrum and its
/// scalar spectral content `(eigenvalue, weight)`.
#[derive(Debug, Clone)]
pub struct StringPart {
    pub subspace: Subspace,
    pub spectrum: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct StringDecomposition {
    pub strings: Vec<StringPart>,
}

impl StringDecomposition {
    pub fn count(&self) -> usize {
        self.strings.len()
    }
}

/// Splits `H₂c` into strings: string `j` is spanned by the `j`-th
/// eigenvector of every eigen-cluster of `Ω₂c` of multiplicity at least `j`.
/// Each string carries uniform weights over its eigenvalues.
pub fn string_decomposition(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<StringDecomposition> {
    let parts = coupled_parts(system, tol)?;
    let h2c = parts.h2c_local();
    if h2c.is_trivial() {
        return Ok(StringDecomposition { strings: Vec::new() });
    }
    let compressed = system.omega2().compress(h2c.frame());
    let decomposition = eigh(&compressed)?;
    let clusters = decomposition.clusters(tol.eig_cluster);
    let longest = clusters.iter().map(|c| c.multiplicity()).max().unwrap_or(0);
    let total = system.dim();
    let mut strings = Vec::with_capacity(longest);
    for j in 0..longest {
        let members: Vec<_> = clusters.iter().filter(|c| c.multiplicity() > j).collect();
        let columns: Vec<CVector> = members
            .iter()
            .map(|c| h2c.frame() * decomposition.vectors.column(c.indices[j]))
            .collect();
        let frame = crate::numerics::columns_to_matrix(system.n2(), &columns);
        let subspace = orthonormal_basis(&frame, tol).embed(system.n1(), total);
        let weight = 1.0 / members.len() as f64;
        strings.push(StringPart {
            subspace,
            spectrum: members.iter().map(|c| (c.representative, weight)).collect(),
        });
    }
    Ok(StringDecomposition { strings })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructibilityWitness {
    pub eigenvalue: f64,
    /// Unit eigenvector of `Ω` annihilated by `Γ̊`, as `[re, im]` pairs.
    pub vector: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructibilityReport {
    pub verdict: bool,
    pub witness: Option<ReconstructibilityWitness>,
    pub h1d_dim: usize,
    pub h2d_dim: usize,
    /// Whether the eigenmode verdict agrees with `dim h1d = dim h2d = 0`.
    pub consistent: bool,
}

/// The system is reconstructible iff no eigenmode of `Ω` is annihilated by
/// `Γ̊`, i.e. `rank(Γ̊·E_λ) = dim E_λ` for every eigen-cluster.
pub fn is_reconstructible(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<ReconstructibilityReport> {
    let gamma_ring = system.gamma_ring();
    let threshold = tol.rank * system.gamma().norm();
    let decomposition = eigh(system.omega())?;
    let mut witness = None;
    for cluster in decomposition.clusters(tol.eig_cluster) {
        let frame = decomposition.cluster_frame(&cluster);
        let image = &gamma_ring * &frame;
        let s = svd(&image)?;
        let rank = s.singular_values.iter().filter(|&&x| x > threshold).count();
        if rank < cluster.multiplicity() {
            let null_direction = s.right.column(cluster.multiplicity() - 1).clone_owned();
            let mut v = &frame * null_direction;
            v /= crate::numerics::c64(v.norm(), 0.0);
            witness = Some(ReconstructibilityWitness {
                eigenvalue: cluster.representative,
                vector: v.iter().map(|z| [z.re, z.im]).collect(),
            });
            break;
        }
    }
    let parts = coupled_parts(system, tol)?;
    let verdict = witness.is_none();
    let structural = parts.h1d.is_trivial() && parts.h2d.is_trivial();
    Ok(ReconstructibilityReport {
        verdict,
        witness,
        h1d_dim: parts.h1d.dim(),
        h2d_dim: parts.h2d.dim(),
        consistent: verdict == structural,
    })
}
