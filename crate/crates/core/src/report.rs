//! Serializable analysis reports shared by the command-line tool and the
//! Python bindings. Field order is fixed, so equal inputs give equal JSON.

use serde::Serialize;

use crate::coupling::{
    canonical_decomposition, channels, coupling_matrix, CouplingMatrix, SInvariance,
};
use crate::decomposition::{
    check_multiplicity_bounds, coupled_parts, four_block_residual, is_reconstructible, reconstructible_core,
    string_decomposition, BoundReport, MultiplicityReport, ReconstructibilityReport,
};
use crate::error::Result;
use crate::extension::{check_dissipation, measure_of, DissipationReport};
use crate::hamiltonian::{FrozenReport, LatticeSpec};
use crate::model::{BlockPartition, ConservativeSystem, Side};
use crate::numerics::{eigh, HermitianOperator, Subspace, ToleranceConfig};
use crate::schema::{subspace_to_json, vector_to_json, Scalar, SubspaceJson, SCHEMA};

/// Common wrapper: schema, library version, tolerances and input digest.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub tolerances: ToleranceConfig,
    /// `sha256:<hex>` of the raw input bytes, when there is an input file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub result: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &str, tolerances: ToleranceConfig, input_digest: Option<String>, result: T) -> Self {
        Self {
            schema: SCHEMA,
            version: crate::VERSION,
            command: command.to_string(),
            tolerances,
            input_digest,
            seed: None,
            result,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartDims {
    pub h1c: usize,
    pub h1d: usize,
    pub h2c: usize,
    pub h2d: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StringJson {
    pub dim: usize,
    /// `(eigenvalue, weight)` pairs.
    pub spectrum: Vec<(f64, f64)>,
    pub subspace: SubspaceJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeReport {
    pub n1: usize,
    pub n2: usize,
    pub dims: PartDims,
    pub h1c: SubspaceJson,
    pub h1d: SubspaceJson,
    pub h2c: SubspaceJson,
    pub h2d: SubspaceJson,
    /// Largest entry of `Ω` linking the coupled and decoupled parts.
    pub four_block_residual: f64,
    pub reconstructible_core_dim: usize,
    pub string_count: usize,
    pub strings: Vec<StringJson>,
    pub bounds: BoundReport,
    pub bounds_satisfied: bool,
}

pub fn decompose_report(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<DecomposeReport> {
    let parts = coupled_parts(system, tol)?;
    let [h1c, h1d, h2c, h2d] = parts.dims();
    let strings = string_decomposition(system, tol)?;
    let bounds = check_multiplicity_bounds(system, tol)?;
    Ok(DecomposeReport {
        n1: system.n1(),
        n2: system.n2(),
        dims: PartDims { h1c, h1d, h2c, h2d },
        h1c: subspace_to_json(&parts.h1c),
        h1d: subspace_to_json(&parts.h1d),
        h2c: subspace_to_json(&parts.h2c),
        h2d: subspace_to_json(&parts.h2d),
        four_block_residual: four_block_residual(system, &parts),
        reconstructible_core_dim: reconstructible_core(system, tol)?.dim(),
        string_count: strings.count(),
        strings: strings
            .strings
            .iter()
            .map(|s| StringJson {
                dim: s.subspace.dim(),
                spectrum: s.spectrum.clone(),
                subspace: subspace_to_json(&s.subspace),
            })
            .collect(),
        bounds_satisfied: bounds.satisfied(),
        bounds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelJson {
    pub gamma: f64,
    pub g: Vec<Scalar>,
    pub g_prime: Vec<Scalar>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelsReport {
    pub rank: usize,
    pub channels: Vec<ChannelJson>,
    pub degenerate_groups: Vec<Vec<usize>>,
    /// Eigenvalues labelling the rows (eigenspaces of `Ω₁`).
    pub omega1_levels: Vec<f64>,
    /// Eigenvalues labelling the columns (eigenspaces of `Ω₂`).
    pub omega2_levels: Vec<f64>,
    pub coupling_matrix: CouplingMatrix,
}

fn eigenspace_partition(op: &HermitianOperator, side: Side, tol: &ToleranceConfig) -> Result<(BlockPartition, Vec<f64>)> {
    let decomposition = eigh(op)?;
    let clusters = decomposition.clusters(tol.eig_cluster);
    let levels = clusters.iter().map(|c| c.representative).collect();
    let parts = clusters
        .iter()
        .map(|c| Subspace::from_frame(decomposition.cluster_frame(c), tol))
        .collect::<Result<Vec<_>>>()?;
    Ok((BlockPartition::new(side, op.dim(), parts, tol)?, levels))
}

/// Channels of `Γ` and its coupling matrix between the eigenspaces of `Ω₁`
/// and those of `Ω₂`.
pub fn channels_report(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<ChannelsReport> {
    let set = channels(system, tol)?;
    let (p1, omega1_levels) = eigenspace_partition(&system.omega1(), Side::Observable, tol)?;
    let (p2, omega2_levels) = eigenspace_partition(&system.omega2(), Side::Hidden, tol)?;
    Ok(ChannelsReport {
        rank: set.rank,
        channels: (0..set.rank)
            .map(|q| ChannelJson {
                gamma: set.gammas[q],
                g: vector_to_json(&set.g[q]),
                g_prime: vector_to_json(&set.g_prime[q]),
            })
            .collect(),
        degenerate_groups: set.degenerate_groups.clone(),
        omega1_levels,
        omega2_levels,
        coupling_matrix: coupling_matrix(system, &p1, &p2, tol)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentJson {
    pub h1_dim: usize,
    pub h2_dim: usize,
    pub channels: Vec<usize>,
    pub decoupled: bool,
    pub s_invariance: SInvariance,
    pub h1: SubspaceJson,
    pub h2: SubspaceJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalReport {
    pub component_count: usize,
    pub coupled_count: usize,
    /// Channel index → component index.
    pub assignment: Vec<usize>,
    pub inter_block_residual: f64,
    pub components: Vec<ComponentJson>,
}

pub fn canonical_report(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<CanonicalReport> {
    let decomposition = canonical_decomposition(system, tol)?;
    Ok(CanonicalReport {
        component_count: decomposition.components.len(),
        coupled_count: decomposition.coupled_count(),
        assignment: decomposition.assignment.clone(),
        inter_block_residual: decomposition.inter_block_residual(system),
        components: decomposition
            .components
            .iter()
            .map(|c| ComponentJson {
                h1_dim: c.h1.dim(),
                h2_dim: c.h2.dim(),
                channels: c.channels.clone(),
                decoupled: c.decoupled,
                s_invariance: c.s_invariance,
                h1: subspace_to_json(&c.h1),
                h2: subspace_to_json(&c.h2),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub dissipation: DissipationReport,
    pub reconstructibility: ReconstructibilityReport,
}

/// Dissipation of the induced kernel and reconstructibility of the system.
pub fn check_report(system: &ConservativeSystem, trials: usize, seed: u64, tol: &ToleranceConfig) -> Result<CheckReport> {
    let measure = measure_of(system, tol)?;
    Ok(CheckReport {
        dissipation: check_dissipation(&measure, trials, seed, tol)?,
        reconstructibility: is_reconstructible(system, tol)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeReport {
    pub spec: LatticeSpec,
    pub volume: usize,
    pub frozen_dim_complex: usize,
    pub frozen_dim_real: usize,
    pub frozen_frequency: f64,
    pub frozen_eigen_residual: f64,
    pub frequency_multiplicity: usize,
    pub coupled_mult: MultiplicityReport,
    pub dim_lower: usize,
    pub mult_upper: usize,
    pub eigenvectors_exact: bool,
    pub dim_bound_holds: bool,
    pub mult_bound_holds: bool,
    pub satisfied: bool,
}

impl LatticeReport {
    pub fn new(spec: &LatticeSpec, frozen: &FrozenReport) -> Self {
        Self {
            spec: spec.clone(),
            volume: frozen.volume,
            frozen_dim_complex: frozen.frozen_dim_complex,
            frozen_dim_real: frozen.frozen_dim_real,
            frozen_frequency: frozen.frozen_frequency,
            frozen_eigen_residual: frozen.frozen_eigen_residual,
            frequency_multiplicity: frozen.frequency_multiplicity,
            coupled_mult: frozen.coupled_mult.clone(),
            dim_lower: frozen.dim_lower,
            mult_upper: frozen.mult_upper,
            eigenvectors_exact: frozen.eigenvectors_exact,
            dim_bound_holds: frozen.dim_bound_holds,
            mult_bound_holds: frozen.mult_bound_holds,
            satisfied: frozen.satisfied(),
        }
    }
}
