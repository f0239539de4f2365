//! Frequency operators of quadratic Hamiltonians, the oscillator and lattice
//! models, and frozen-subspace reports.
//!
//! A Hamiltonian `½ Q̇ᵀMQ̇ + ½ QᵀKQ` is encoded by `Ω = (M^{−1/2}KM^{−1/2})^{1/2}`
//! acting on `z = Q̃′ − iΩQ̃` with `Q̃ = M^{1/2}Q`, so that `ż = −iΩz`.
//! Interaction terms written without the ½ enter `K` with a factor 2.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decomposition::{multiplicity, MultiplicityReport};
use crate::error::{Error, Result};
use crate::model::ConservativeSystem;
use crate::numerics::{
    c64, eigh, min_eigenvalue, orthonormal_basis, principal_sqrt_psd, real_to_complex, CMatrix, CVector,
    HermitianOperator, Subspace, ToleranceConfig,
};

/// Largest lattice dimension (`N·|Λ|`) accepted.
pub const SIZE_BUDGET: usize = 1500;

/// Label of one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DofLabel {
    pub site: usize,
    pub component: usize,
}

#[derive(Debug, Clone)]
pub struct QuadraticHamiltonian {
    labels: Vec<DofLabel>,
    mass: Vec<f64>,
    stiffness: DMatrix<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(labels: Vec<DofLabel>, mass: Vec<f64>, stiffness: DMatrix<f64>, tol: &ToleranceConfig) -> Result<Self> {
        let n = mass.len();
        if labels.len() != n || stiffness.shape() != (n, n) {
            return Err(Error::Validation(format!(
                "{} labels, {n} masses and a {:?} stiffness do not agree",
                labels.len(),
                stiffness.shape()
            )));
        }
        if mass.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(Error::Validation("masses must be finite and positive".into()));
        }
        if stiffness.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("stiffness contains non-finite entries".into()));
        }
        let asym = (&stiffness - stiffness.transpose()).amax();
        if asym > tol.herm * (1.0 + stiffness.amax()) {
            return Err(Error::Validation(format!("stiffness is not symmetric (defect {asym:e})")));
        }
        let sym = (&stiffness + stiffness.transpose()) * 0.5;
        let min = min_eigenvalue(&HermitianOperator::from_hermitian_part(real_to_complex(&sym)))?;
        let allowed = tol.residual * sym.norm().max(f64::MIN_POSITIVE);
        if min < -allowed {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance: allowed,
            });
        }
        Ok(Self {
            labels,
            mass,
            stiffness: sym,
        })
    }

    /// Single-site labels `0..n`.
    pub fn with_default_labels(mass: Vec<f64>, stiffness: DMatrix<f64>, tol: &ToleranceConfig) -> Result<Self> {
        let labels = (0..mass.len()).map(|c| DofLabel { site: 0, component: c }).collect();
        Self::new(labels, mass, stiffness, tol)
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn labels(&self) -> &[DofLabel] {
        &self.labels
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// `M^{−1/2} K M^{−1/2}`.
    pub fn mass_weighted_stiffness(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.stiffness[(i, j)] / (self.mass[i] * self.mass[j]).sqrt()
        })
    }

    /// Warning text when `K` is singular: the state map `(Q, Q̇) → z` is then
    /// not injective on the zero modes.
    pub fn encoding_warning(&self, tol: &ToleranceConfig) -> Result<Option<String>> {
        let k = HermitianOperator::from_hermitian_part(real_to_complex(&self.stiffness));
        let min = min_eigenvalue(&k)?;
        if min <= tol.residual * k.norm() {
            Ok(Some(format!(
                "stiffness is singular (min eigenvalue {min:e}); zero modes map to frequency 0"
            )))
        } else {
            Ok(None)
        }
    }
}

/// `Ω = (M^{−1/2}KM^{−1/2})^{1/2}`.
pub fn frequency_operator(h: &QuadraticHamiltonian, tol: &ToleranceConfig) -> Result<HermitianOperator> {
    let weighted = HermitianOperator::from_hermitian_part(real_to_complex(&h.mass_weighted_stiffness()));
    principal_sqrt_psd(&weighted, tol)
}

/// `z = M^{1/2}Q̇ − iΩM^{1/2}Q`.
pub fn encode_state(h: &QuadraticHamiltonian, omega: &HermitianOperator, q: &DVector<f64>, q_dot: &DVector<f64>) -> CVector {
    let root = DVector::from_iterator(h.dim(), h.mass.iter().map(|m| m.sqrt()));
    let qt = real_to_complex(&DMatrix::from_column_slice(h.dim(), 1, q.component_mul(&root).as_slice()));
    let pt = q_dot.component_mul(&root);
    let mut z = CVector::from_iterator(h.dim(), pt.iter().map(|&x| c64(x, 0.0)));
    z -= (omega.matrix() * qt).column(0) * c64(0.0, 1.0);
    z
}

/// Couples `N` observable oscillators (`h₁ = p²/2m + ξq²/2`) to a hidden
/// quadratic system through `Σ_j [(q, γ₁ⱼ) − (φ, γ₂ⱼ)]²`. Observable
/// coordinates come first.
pub fn oscillator_system(
    n: usize,
    m: f64,
    xi: f64,
    gamma1: &[DVector<f64>],
    hidden: &QuadraticHamiltonian,
    gamma2: &[DVector<f64>],
    tol: &ToleranceConfig,
) -> Result<ConservativeSystem> {
    if gamma1.len() != gamma2.len() {
        return Err(Error::Validation("γ₁ and γ₂ must list the same number of couplings".into()));
    }
    let n2 = hidden.dim();
    if gamma1.iter().any(|g| g.len() != n) || gamma2.iter().any(|g| g.len() != n2) {
        return Err(Error::Validation("coupling vectors have the wrong length".into()));
    }
    if !(m.is_finite() && m > 0.0 && xi.is_finite() && xi >= 0.0) {
        return Err(Error::Validation("need m > 0 and ξ ≥ 0".into()));
    }
    let total = n + n2;
    let mut k = DMatrix::<f64>::zeros(total, total);
    for i in 0..n {
        k[(i, i)] = xi;
    }
    k.view_mut((n, n), (n2, n2)).copy_from(hidden.stiffness());
    for (g1, g2) in gamma1.iter().zip(gamma2) {
        let qq = g1 * g1.transpose() * 2.0;
        let qf = g1 * g2.transpose() * -2.0;
        let ff = g2 * g2.transpose() * 2.0;
        let mut v = k.view_mut((0, 0), (n, n));
        v += qq;
        let mut v = k.view_mut((0, n), (n, n2));
        v += &qf;
        let mut v = k.view_mut((n, 0), (n2, n));
        v += qf.transpose();
        let mut v = k.view_mut((n, n), (n2, n2));
        v += ff;
    }
    let mut mass = vec![m; n];
    mass.extend_from_slice(hidden.mass());
    let mut labels: Vec<DofLabel> = (0..n).map(|c| DofLabel { site: 0, component: c }).collect();
    labels.extend((0..n2).map(|c| DofLabel { site: 1, component: c }));
    let h = QuadraticHamiltonian::new(labels, mass, k, tol)?;
    let omega = frequency_operator(&h, tol)?;
    ConservativeSystem::from_omega(n, omega.into_matrix(), tol)
}

/// Cube `Λ_L = {n ∈ Z^d : |n|_∞ ≤ L}` with `N` components per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: f64,
    pub xi: f64,
    pub gammas: Vec<Vec<f64>>,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.gammas.is_empty() {
            return Err(Error::Validation("need d ≥ 1, N ≥ 1 and at least one γ".into()));
        }
        if !(self.m.is_finite() && self.m > 0.0 && self.xi.is_finite() && self.xi >= 0.0) {
            return Err(Error::Validation("need m > 0 and ξ ≥ 0".into()));
        }
        for (j, g) in self.gammas.iter().enumerate() {
            if g.len() != self.n {
                return Err(Error::Validation(format!("γ_{j} has length {}, expected {}", g.len(), self.n)));
            }
            if g.iter().any(|x| !x.is_finite()) || g.iter().all(|&x| x == 0.0) {
                return Err(Error::Validation(format!("γ_{j} must be finite and nonzero")));
            }
        }
        Ok(())
    }

    pub fn j(&self) -> usize {
        self.gammas.len()
    }

    /// `|Λ| = (2L+1)^d`, or `None` on overflow.
    pub fn volume(&self) -> Option<usize> {
        (2 * self.l + 1).checked_pow(u32::try_from(self.d).ok()?)
    }

    pub fn total_dim(&self) -> Option<usize> {
        self.volume()?.checked_mul(self.n)
    }

    fn check_budget(&self) -> Result<usize> {
        let requested = self.total_dim().unwrap_or(usize::MAX);
        if requested > SIZE_BUDGET {
            return Err(Error::Size {
                requested,
                budget: SIZE_BUDGET,
            });
        }
        Ok(requested)
    }
}

#[derive(Debug, Clone)]
pub struct Lattice {
    /// Site coordinates in lexicographic order; DOF index = site·N + component.
    pub sites: Vec<Vec<i64>>,
    pub stiffness: DMatrix<f64>,
    pub hamiltonian: QuadraticHamiltonian,
    pub omega: HermitianOperator,
}

fn lattice_sites(d: usize, l: usize) -> Vec<Vec<i64>> {
    let side = 2 * l as i64 + 1;
    let count = (side as usize).pow(d as u32);
    (0..count)
        .map(|mut idx| {
            let mut site = vec![0_i64; d];
            for axis in (0..d).rev() {
                site[axis] = (idx as i64 % side) - l as i64;
                idx /= side as usize;
            }
            site
        })
        .collect()
}

fn site_index(site: &[i64], l: usize) -> Option<usize> {
    let side = 2 * l as i64 + 1;
    let mut idx = 0_usize;
    for &c in site {
        if c.abs() > l as i64 {
            return None;
        }
        idx = idx * side as usize + (c + l as i64) as usize;
    }
    Some(idx)
}

/// The Dirichlet form `B` of `Σ_{n∈Λ} Σ_i (x_n − x_{n+e_i})²` with `x = 0`
/// outside `Λ`.
fn dirichlet_form(sites: &[Vec<i64>], d: usize, l: usize) -> DMatrix<f64> {
    let s = sites.len();
    let mut b = DMatrix::<f64>::zeros(s, s);
    for (a, site) in sites.iter().enumerate() {
        b[(a, a)] += d as f64;
        for axis in 0..d {
            let mut back = site.clone();
            back[axis] -= 1;
            if site_index(&back, l).is_some() {
                b[(a, a)] += 1.0;
            }
            let mut forward = site.clone();
            forward[axis] += 1;
            if let Some(f) = site_index(&forward, l) {
                b[(a, f)] -= 1.0;
                b[(f, a)] -= 1.0;
            }
        }
    }
    b
}

/// `K = ξI + 2Σ_j B ⊗ γ_jγ_jᵀ` and `Ω_Λ`.
pub fn lattice_system(spec: &LatticeSpec, tol: &ToleranceConfig) -> Result<Lattice> {
    spec.validate()?;
    let dim = spec.check_budget()?;
    let sites = lattice_sites(spec.d, spec.l);
    let b = dirichlet_form(&sites, spec.d, spec.l);
    let n = spec.n;
    let mut local = DMatrix::<f64>::zeros(n, n);
    for g in &spec.gammas {
        let g = DVector::from_column_slice(g);
        local += &g * g.transpose() * 2.0;
    }
    let mut stiffness = b.kronecker(&local);
    for i in 0..dim {
        stiffness[(i, i)] += spec.xi;
    }
    let labels = (0..dim)
        .map(|i| DofLabel {
            site: i / n,
            component: i % n,
        })
        .collect();
    let hamiltonian = QuadraticHamiltonian::new(labels, vec![spec.m; dim], stiffness.clone(), tol)?;
    let omega = frequency_operator(&hamiltonian, tol)?;
    Ok(Lattice {
        sites,
        stiffness,
        hamiltonian,
        omega,
    })
}

#[derive(Debug, Clone)]
pub struct FrozenReport {
    pub frozen_subspace: Subspace,
    pub frozen_dim_complex: usize,
    /// Real phase-space dimension, twice the complex one.
    pub frozen_dim_real: usize,
    pub frozen_frequency: f64,
    /// `max ‖Ω(e_n⊗g) − √(ξ/m)(e_n⊗g)‖` over the frozen frame.
    pub frozen_eigen_residual: f64,
    /// Multiplicity of `√(ξ/m)` in the full spectrum of `Ω_Λ`.
    pub frequency_multiplicity: usize,
    pub coupled_mult: MultiplicityReport,
    /// `(N − dim E_γ)·|Λ|`.
    pub dim_lower: usize,
    /// `J·|Λ|`.
    pub mult_upper: usize,
    pub eigenvectors_exact: bool,
    pub dim_bound_holds: bool,
    pub mult_bound_holds: bool,
    pub volume: usize,
}

impl FrozenReport {
    pub fn satisfied(&self) -> bool {
        self.eigenvectors_exact && self.dim_bound_holds && self.mult_bound_holds
    }
}

/// Frozen directions `e_n ⊗ g` with `g ⊥ span{γ_j}`, checked to be exact
/// eigenvectors of `Ω_Λ`, and the multiplicities on their complement.
pub fn frozen_report(spec: &LatticeSpec, tol: &ToleranceConfig) -> Result<FrozenReport> {
    let lattice = lattice_system(spec, tol)?;
    let n = spec.n;
    let volume = lattice.sites.len();
    let dim = n * volume;
    let gammas = DMatrix::from_fn(n, spec.j(), |i, j| spec.gammas[j][i]);
    let e_gamma = orthonormal_basis(&real_to_complex(&gammas), tol);
    let orth = e_gamma.complement(tol)?;
    let mut frame = CMatrix::zeros(dim, volume * orth.dim());
    for site in 0..volume {
        for k in 0..orth.dim() {
            frame
                .view_mut((site * n, site * orth.dim() + k), (n, 1))
                .copy_from(&orth.frame().column(k));
        }
    }
    let frozen = Subspace::from_frame(frame, tol)?;
    let frequency = (spec.xi / spec.m).sqrt();
    let omega = lattice.omega.matrix();
    let mut residual = 0.0_f64;
    for k in 0..frozen.dim() {
        let v = frozen.frame().column(k);
        residual = residual.max((omega * v - v * c64(frequency, 0.0)).norm());
    }
    let eigenvectors_exact = residual <= tol.residual * lattice.omega.norm().max(f64::MIN_POSITIVE);

    let full = eigh(&lattice.omega)?;
    let clusters = full.clusters(tol.eig_cluster);
    let freq_tol = tol.eig_cluster * full.scale();
    let frequency_multiplicity = clusters
        .iter()
        .find(|c| (c.representative - frequency).abs() <= freq_tol.max(1e-12))
        .map(|c| c.multiplicity())
        .unwrap_or(0);

    let coupled = frozen.complement(tol)?;
    let coupled_mult = multiplicity(&lattice.omega, &coupled, tol)?;
    let dim_lower = (n - e_gamma.dim()) * volume;
    let mult_upper = spec.j() * volume;
    Ok(FrozenReport {
        frozen_dim_complex: frozen.dim(),
        frozen_dim_real: 2 * frozen.dim(),
        frozen_subspace: frozen,
        frozen_frequency: frequency,
        frozen_eigen_residual: residual,
        frequency_multiplicity,
        dim_bound_holds: frozen_dim_at_least(dim_lower, &coupled_mult, volume, n),
        mult_bound_holds: coupled_mult.max_mult <= mult_upper,
        coupled_mult,
        dim_lower,
        mult_upper,
        eigenvectors_exact,
        volume,
    })
}

fn frozen_dim_at_least(dim_lower: usize, coupled: &MultiplicityReport, volume: usize, n: usize) -> bool {
    let coupled_dim: usize = coupled.per_cluster.iter().map(|c| c.multiplicity).sum();
    volume * n - coupled_dim >= dim_lower
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub volume: usize,
    pub max_mult: usize,
    pub ratio: f64,
}

/// Maximal multiplicity of `Ω_Λ` for each half-width in `ls`.
pub fn multiplicity_scan(spec: &LatticeSpec, ls: &[usize], tol: &ToleranceConfig) -> Result<Vec<ScanRow>> {
    let sized: Vec<LatticeSpec> = ls.iter().map(|&l| LatticeSpec { l, ..spec.clone() }).collect();
    for s in &sized {
        s.validate()?;
        s.check_budget()?;
    }
    sized
        .iter()
        .map(|s| {
            let lattice = lattice_system(s, tol)?;
            let decomposition = eigh(&lattice.omega)?;
            let max_mult = decomposition
                .clusters(tol.eig_cluster)
                .iter()
                .map(|c| c.multiplicity())
                .max()
                .unwrap_or(0);
            let volume = lattice.sites.len();
            Ok(ScanRow {
                l: s.l,
                volume,
                max_mult,
                ratio: max_mult as f64 / volume as f64,
            })
        })
        .collect()
}
