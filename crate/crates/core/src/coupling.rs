//! Coupling channels, coupling matrices, s-invariance and the canonical
//! (finest) s-invariant decomposition.

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::decomposition::{coupled_parts, orbit};
use crate::error::{Error, Result};
use crate::extension::kernel_eval;
use crate::model::{BlockPartition, ConservativeSystem, Side};
use crate::numerics::{
    cluster_spectrum, eigh, min_cluster_gap, norm_max, orthonormal_basis, svd, CMatrix, CVector, Subspace,
    ToleranceConfig,
};

/// Singular triples of `Γ`: `Γ = Σ_q √γ_q |g_q⟩⟨g′_q|`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub rank: usize,
    /// `γ_q = σ_q²`, descending.
    pub gammas: Vec<f64>,
    /// Unit vectors in `H₁`.
    pub g: Vec<CVector>,
    /// Unit vectors in `H₂`.
    pub g_prime: Vec<CVector>,
    /// Groups of channel indices whose `γ_q` coincide within `τ_eig_cluster`.
    pub degenerate_groups: Vec<Vec<usize>>,
}

impl ChannelSet {
    /// `Σ_q √γ_q g_q g′_q†`.
    pub fn reconstruct(&self, n1: usize, n2: usize) -> CMatrix {
        let mut gamma = CMatrix::zeros(n1, n2);
        for q in 0..self.rank {
            gamma += &self.g[q] * self.g_prime[q].adjoint() * crate::numerics::c64(self.gammas[q].sqrt(), 0.0);
        }
        gamma
    }
}

pub fn channels(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<ChannelSet> {
    let s = svd(&system.gamma())?;
    let rank = s.rank(tol.rank);
    let gammas: Vec<f64> = s.singular_values[..rank].iter().map(|x| x * x).collect();
    let g = (0..rank).map(|q| s.left.column(q).clone_owned()).collect();
    let g_prime = (0..rank).map(|q| s.right.column(q).clone_owned()).collect();
    // Clustering expects ascending values.
    let ascending: Vec<f64> = gammas.iter().rev().copied().collect();
    let scale = gammas.first().copied().unwrap_or(1.0);
    let degenerate_groups = cluster_spectrum(&ascending, scale, tol.eig_cluster)
        .into_iter()
        .filter(|c| c.multiplicity() > 1)
        .map(|c| {
            let mut idx: Vec<usize> = c.indices.iter().map(|&i| rank - 1 - i).collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    Ok(ChannelSet {
        rank,
        gammas,
        g,
        g_prime,
        degenerate_groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMatrix {
    /// `[M_Γ]_{αβ} = rank(π_{1α} Γ π_{2β})`.
    pub entries: Vec<Vec<usize>>,
    /// Observable parts not coupled to anything.
    pub zero_rows: Vec<usize>,
    /// Hidden parts not coupled to anything.
    pub zero_cols: Vec<usize>,
}

impl CouplingMatrix {
    pub fn total(&self) -> usize {
        self.entries.iter().flatten().sum()
    }
}

pub fn coupling_matrix(
    system: &ConservativeSystem,
    partition1: &BlockPartition,
    partition2: &BlockPartition,
    tol: &ToleranceConfig,
) -> Result<CouplingMatrix> {
    if partition1.side() != Side::Observable || partition2.side() != Side::Hidden {
        return Err(Error::Validation("partitions must be (observable, hidden)".into()));
    }
    for p in partition1.parts() {
        if p.ambient_dim() != system.n1() {
            return Err(Error::Validation("observable partition has the wrong ambient dimension".into()));
        }
    }
    for p in partition2.parts() {
        if p.ambient_dim() != system.n2() {
            return Err(Error::Validation("hidden partition has the wrong ambient dimension".into()));
        }
    }
    let gamma = system.gamma();
    let threshold = tol.rank * svd(&gamma)?.largest();
    let mut entries = Vec::with_capacity(partition1.parts().len());
    for a in partition1.parts() {
        let mut row = Vec::with_capacity(partition2.parts().len());
        for b in partition2.parts() {
            let block = a.frame().adjoint() * &gamma * b.frame();
            let rank = svd(&block)?
                .singular_values
                .iter()
                .filter(|&&x| x > threshold && x > 0.0)
                .count();
            row.push(rank);
        }
        entries.push(row);
    }
    let zero_rows = (0..entries.len())
        .filter(|&i| entries[i].iter().all(|&x| x == 0))
        .collect();
    let zero_cols = (0..partition2.parts().len())
        .filter(|&j| entries.iter().all(|row| row[j] == 0))
        .collect();
    Ok(CouplingMatrix {
        entries,
        zero_rows,
        zero_cols,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SInvariance {
    pub verdict: bool,
    /// `‖[π′, Ω]‖_F`.
    pub commutator_omega: f64,
    /// `‖[π′, P₁]‖_F`.
    pub commutator_p1: f64,
}

/// Whether the projector onto `h_sub` commutes with both `Ω` and `P₁`.
pub fn is_s_invariant(system: &ConservativeSystem, h_sub: &Subspace, tol: &ToleranceConfig) -> Result<SInvariance> {
    if h_sub.ambient_dim() != system.dim() {
        return Err(Error::Validation("subspace must live in the full space".into()));
    }
    let p = h_sub.projector();
    let omega = system.omega().matrix();
    let commutator_omega = (&p * omega - omega * &p).norm();
    let p1 = system.h1().projector();
    let commutator_p1 = (&p * &p1 - &p1 * &p).norm();
    let scale = system.omega().norm().max(f64::MIN_POSITIVE);
    Ok(SInvariance {
        verdict: commutator_omega <= tol.residual * scale && commutator_p1 <= tol.residual,
        commutator_omega,
        commutator_p1,
    })
}

/// One block `H₁α ⊕ H₂α` of an s-invariant splitting.
#[derive(Debug, Clone)]
pub struct Component {
    /// Subspace of `H₁`, in full-space coordinates.
    pub h1: Subspace,
    /// Subspace of `H₂`, in full-space coordinates.
    pub h2: Subspace,
    pub channels: Vec<usize>,
    /// True for the remainder `H₁d ⊕ H₂d`.
    pub decoupled: bool,
    pub s_invariance: SInvariance,
}

impl Component {
    pub fn dim(&self) -> usize {
        self.h1.dim() + self.h2.dim()
    }

    pub fn frame(&self) -> CMatrix {
        let n = self.h1.ambient_dim();
        let mut f = CMatrix::zeros(n, self.dim());
        f.columns_mut(0, self.h1.dim()).copy_from(self.h1.frame());
        f.columns_mut(self.h1.dim(), self.h2.dim()).copy_from(self.h2.frame());
        f
    }
}

#[derive(Debug, Clone)]
pub struct SInvariantDecomposition {
    pub components: Vec<Component>,
    /// Channel index → component index.
    pub assignment: Vec<usize>,
    pub channel_set: ChannelSet,
}

impl SInvariantDecomposition {
    /// Components that carry channels (the decoupled remainder excluded).
    pub fn coupled_count(&self) -> usize {
        self.components.iter().filter(|c| !c.decoupled).count()
    }

    /// Largest entry of `Ω` between different components.
    pub fn inter_block_residual(&self, system: &ConservativeSystem) -> f64 {
        let frames: Vec<CMatrix> = self.components.iter().map(Component::frame).collect();
        let omega = system.omega().matrix();
        let mut worst = 0.0_f64;
        for (a, fa) in frames.iter().enumerate() {
            for (b, fb) in frames.iter().enumerate() {
                if a != b && fa.ncols() > 0 && fb.ncols() > 0 {
                    worst = worst.max(norm_max(&(fa.adjoint() * omega * fb)));
                }
            }
        }
        worst
    }
}

fn span_of(vectors: &[&CVector], dim: usize, tol: &ToleranceConfig) -> Subspace {
    let owned: Vec<CVector> = vectors.iter().map(|v| (*v).clone()).collect();
    orthonormal_basis(&crate::numerics::columns_to_matrix(dim, &owned), tol)
}

/// Finest s-invariant splitting. Channels `p`, `q` are joined when the orbit
/// of `g_p` under `Ω₁` is not orthogonal to `g_q`, or the orbit of `g′_p`
/// under `Ω₂` is not orthogonal to `g′_q`; each connected component `V_α`
/// yields `H₁α = O_{Ω₁}(span g_V)` and `H₂α = O_{Ω₂}(span g′_V)`. The
/// decoupled remainder is attached as a last component when nontrivial.
pub fn canonical_decomposition(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<SInvariantDecomposition> {
    let (n1, n2) = (system.n1(), system.n2());
    let total = system.dim();
    let channel_set = channels(system, tol)?;
    let r = channel_set.rank;
    let omega1 = system.omega1();
    let omega2 = system.omega2();

    let mut orbits1 = Vec::with_capacity(r);
    let mut orbits2 = Vec::with_capacity(r);
    for q in 0..r {
        orbits1.push(orbit(&omega1, &span_of(&[&channel_set.g[q]], n1, tol), tol)?);
        orbits2.push(orbit(&omega2, &span_of(&[&channel_set.g_prime[q]], n2, tol), tol)?);
    }
    let mut forest = UnionFind::<usize>::new(r);
    for p in 0..r {
        for q in 0..r {
            if p == q {
                continue;
            }
            let leak1 = orbits1[p].project(&channel_set.g[q]).norm();
            let leak2 = orbits2[p].project(&channel_set.g_prime[q]).norm();
            if leak1 > tol.residual || leak2 > tol.residual {
                forest.union(p, q);
            }
        }
    }
    let labels = forest.into_labeling();
    let mut roots: Vec<usize> = Vec::new();
    let mut assignment = vec![0; r];
    for q in 0..r {
        let pos = match roots.iter().position(|&x| x == labels[q]) {
            Some(pos) => pos,
            None => {
                roots.push(labels[q]);
                roots.len() - 1
            }
        };
        assignment[q] = pos;
    }

    let mut components = Vec::with_capacity(roots.len() + 1);
    for alpha in 0..roots.len() {
        let members: Vec<usize> = (0..r).filter(|&q| assignment[q] == alpha).collect();
        let g_vectors: Vec<&CVector> = members.iter().map(|&q| &channel_set.g[q]).collect();
        let gp_vectors: Vec<&CVector> = members.iter().map(|&q| &channel_set.g_prime[q]).collect();
        let h1 = orbit(&omega1, &span_of(&g_vectors, n1, tol), tol)?.embed(0, total);
        let h2 = orbit(&omega2, &span_of(&gp_vectors, n2, tol), tol)?.embed(n1, total);
        let s_invariance = is_s_invariant(system, &h1.sum(&h2, tol)?, tol)?;
        components.push(Component {
            h1,
            h2,
            channels: members,
            decoupled: false,
            s_invariance,
        });
    }
    let parts = coupled_parts(system, tol)?;
    if !(parts.h1d.is_trivial() && parts.h2d.is_trivial()) {
        let s_invariance = is_s_invariant(system, &parts.h1d.sum(&parts.h2d, tol)?, tol)?;
        components.push(Component {
            h1: parts.h1d.clone(),
            h2: parts.h2d.clone(),
            channels: Vec::new(),
            decoupled: true,
            s_invariance,
        });
    }
    Ok(SInvariantDecomposition {
        components,
        assignment,
        channel_set,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecouplingReport {
    pub decoupled: bool,
    /// `max|π′Ω₁π″|`.
    pub omega1_block: f64,
    /// `max_t max|π′a₁(t)π″|`.
    pub kernel_block: f64,
    pub reverse_omega1_block: f64,
    pub reverse_kernel_block: f64,
    /// Reverse blocks also vanish.
    pub mutual: bool,
    pub times: Vec<f64>,
    /// Dimensions of `h1_sub` and of `O_{Ω₂}(Γ† h1_sub)` when decoupled.
    pub splitting_dims: Option<(usize, usize)>,
    pub splitting_s_invariant: Option<bool>,
    #[serde(skip)]
    pub splitting: Option<(Subspace, Subspace)>,
}

/// Sample times for kernel block checks: 25 points on `[0, 2π/gap]`, where
/// `gap` is the smallest gap between distinct eigenvalues of `Ω₂` (or `2π`
/// when `Ω₂` has a single eigenvalue).
pub fn decoupling_times(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<Vec<f64>> {
    let decomposition = eigh(&system.omega2())?;
    let gap = min_cluster_gap(&decomposition.clusters(tol.eig_cluster)).filter(|&g| g > 0.0);
    let horizon = match gap {
        Some(g) => 2.0 * std::f64::consts::PI / g,
        None => 2.0 * std::f64::consts::PI,
    };
    Ok((0..25).map(|j| horizon * j as f64 / 24.0).collect())
}

/// Tests whether `h1_sub ⊆ H₁` (in `H₁` coordinates) splits off:
/// `π′Ω₁π″ = 0` and `π′a₁(t)π″ = 0` on the sample grid. Reports the reverse
/// blocks and, when decoupled, the s-invariant splitting
/// `h1_sub ⊕ O_{Ω₂}(Γ† h1_sub)`.
pub fn decoupling_report(
    system: &ConservativeSystem,
    h1_sub: &Subspace,
    tol: &ToleranceConfig,
) -> Result<DecouplingReport> {
    let n1 = system.n1();
    if h1_sub.ambient_dim() != n1 {
        return Err(Error::Validation(format!(
            "candidate subspace lives in dimension {}, expected {n1}",
            h1_sub.ambient_dim()
        )));
    }
    let p_in = h1_sub.projector();
    let p_out = CMatrix::identity(n1, n1) - &p_in;
    let omega1 = system.omega1();
    let omega1_block = norm_max(&(&p_in * omega1.matrix() * &p_out));
    let reverse_omega1_block = norm_max(&(&p_out * omega1.matrix() * &p_in));
    let times = decoupling_times(system, tol)?;
    let kernel = kernel_eval(system, &times)?;
    let mut kernel_block = 0.0_f64;
    let mut reverse_kernel_block = 0.0_f64;
    for a in kernel.values() {
        kernel_block = kernel_block.max(norm_max(&(&p_in * a * &p_out)));
        reverse_kernel_block = reverse_kernel_block.max(norm_max(&(&p_out * a * &p_in)));
    }
    let omega_scale = system.omega().norm().max(1.0);
    let gamma = system.gamma();
    let kernel_scale = (&gamma * gamma.adjoint()).norm().max(1.0);
    let decoupled = omega1_block <= tol.residual * omega_scale && kernel_block <= tol.residual * kernel_scale;
    let mutual = reverse_omega1_block <= tol.residual * omega_scale
        && reverse_kernel_block <= tol.residual * kernel_scale;

    let (splitting, splitting_dims, splitting_s_invariant) = if decoupled {
        let hidden_seed = orthonormal_basis(&(gamma.adjoint() * h1_sub.frame()), tol);
        let h2_part = orbit(&system.omega2(), &hidden_seed, tol)?;
        let total = system.dim();
        let h1_full = h1_sub.embed(0, total);
        let h2_full = h2_part.embed(n1, total);
        let verdict = is_s_invariant(system, &h1_full.sum(&h2_full, tol)?, tol)?.verdict;
        let dims = (h1_full.dim(), h2_full.dim());
        (Some((h1_full, h2_full)), Some(dims), Some(verdict))
    } else {
        (None, None, None)
    };
    Ok(DecouplingReport {
        decoupled,
        omega1_block,
        kernel_block,
        reverse_omega1_block,
        reverse_kernel_block,
        mutual,
        times,
        splitting_dims,
        splitting_s_invariant,
        splitting,
    })
}
