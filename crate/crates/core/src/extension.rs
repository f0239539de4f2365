//! Friction kernels, the minimal conservative extension of a point measure
//! and its inverse, dissipation checks and exact-recovery kernel fitting.

use nalgebra::Schur;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ConservativeSystem, OpenSystem, PointMeasure};
use crate::numerics::{
    c64, cluster_spectrum, eigh, norm_max, psd_projection, svd, CMatrix, CVector, HermitianOperator, ToleranceConfig,
    C64,
};

/// Kernel values `a(t_j)` on an ascending grid of non-negative times.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSamples {
    times: Vec<f64>,
    values: Vec<CMatrix>,
}

impl KernelSamples {
    pub fn new(times: Vec<f64>, values: Vec<CMatrix>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} times but {} kernel values",
                times.len(),
                values.len()
            )));
        }
        check_times(&times)?;
        if let Some(first) = values.first() {
            let shape = first.shape();
            if shape.0 != shape.1 || values.iter().any(|v| v.shape() != shape) {
                return Err(Error::Validation("kernel values must be square and share one shape".into()));
            }
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.first().map(|v| v.nrows()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest entrywise deviation from another sample set on the same grid.
    pub fn max_deviation(&self, other: &KernelSamples) -> Result<f64> {
        if self.times != other.times || self.dim() != other.dim() {
            return Err(Error::Validation("sample sets live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| norm_max(&(a - b)))
            .fold(0.0, f64::max))
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation("times must be finite".into()));
    }
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Precondition(
            "kernel is only defined for t ≥ 0 (rest condition)".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("times must be strictly ascending".into()));
    }
    Ok(())
}

/// `G · diag(e^{−iλ_k t}) · G†` for every `t`, where `G = Γ·V` and `V`
/// diagonalizes the internal operator.
fn spectral_kernel(coupling: &CMatrix, internal: &HermitianOperator, times: &[f64]) -> Result<KernelSamples> {
    check_times(times)?;
    let decomposition = eigh(internal)?;
    let g = coupling * &decomposition.vectors;
    let exact_zero = coupling * coupling.adjoint();
    let values = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return exact_zero.clone();
            }
            let mut scaled = g.clone();
            for (k, &lambda) in decomposition.values.iter().enumerate() {
                let phase = C64::from_polar(1.0, -lambda * t);
                for i in 0..scaled.nrows() {
                    scaled[(i, k)] *= phase;
                }
            }
            scaled * g.adjoint()
        })
        .collect();
    KernelSamples::new(times.to_vec(), values)
}

/// Friction kernel of the observable half, `a₁(t) = Γe^{−iΩ₂t}Γ†`.
pub fn kernel_eval(system: &ConservativeSystem, times: &[f64]) -> Result<KernelSamples> {
    spectral_kernel(&system.gamma(), &system.omega2(), times)
}

/// Friction kernel of the hidden half, `a₂(t) = Γ†e^{−iΩ₁t}Γ`.
pub fn kernel_eval_hidden(system: &ConservativeSystem, times: &[f64]) -> Result<KernelSamples> {
    spectral_kernel(&system.gamma().adjoint(), &system.omega1(), times)
}

/// `Σ_k e^{−iω_k t}N_k` on a time grid.
pub fn kernel_of_measure(measure: &PointMeasure, times: &[f64]) -> Result<KernelSamples> {
    check_times(times)?;
    KernelSamples::new(times.to_vec(), times.iter().map(|&t| measure.kernel_at(t)).collect())
}

/// Minimal conservative extension of a point measure with `Ω₁ = 0`.
pub fn minimal_extension(measure: &PointMeasure, tol: &ToleranceConfig) -> Result<ConservativeSystem> {
    minimal_extension_with(&HermitianOperator::zeros(measure.dim()), measure, tol)
}

/// Minimal conservative extension of an open system.
pub fn minimal_extension_of(open: &OpenSystem, tol: &ToleranceConfig) -> Result<ConservativeSystem> {
    minimal_extension_with(open.omega1(), open.kernel(), tol)
}

/// Factors every atom as `N_k = C_k C_k†` and assembles
/// `Ω₂ = ⊕ ω_k I_{r_k}`, `Γ = [C₁ … C_K]`.
pub fn minimal_extension_with(
    omega1: &HermitianOperator,
    measure: &PointMeasure,
    tol: &ToleranceConfig,
) -> Result<ConservativeSystem> {
    if omega1.dim() != measure.dim() {
        return Err(Error::Validation("Ω₁ and measure dimensions differ".into()));
    }
    let decompositions = measure
        .atoms()
        .iter()
        .map(|a| eigh(&a.mass))
        .collect::<Result<Vec<_>>>()?;
    let largest = decompositions
        .iter()
        .flat_map(|d| d.values.iter().map(|x| x.abs()))
        .fold(0.0_f64, f64::max);
    for (k, (atom, d)) in measure.atoms().iter().zip(&decompositions).enumerate() {
        let min = d.values.first().copied().unwrap_or(0.0);
        if min < -tol.residual * atom.mass.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Dissipation {
                atom: k,
                min_eigenvalue: min,
            });
        }
    }
    let cut = tol.rank * largest;
    let n1 = measure.dim();
    let mut columns: Vec<CVector> = Vec::new();
    let mut frequencies: Vec<f64> = Vec::new();
    for (atom, d) in measure.atoms().iter().zip(&decompositions) {
        // Largest eigenvalues first, so each block is ordered by weight.
        for j in (0..d.values.len()).rev() {
            if d.values[j] > cut {
                columns.push(d.vectors.column(j) * c64(d.values[j].sqrt(), 0.0));
                frequencies.push(atom.omega);
            }
        }
    }
    let gamma = crate::numerics::columns_to_matrix(n1, &columns);
    let omega2 = HermitianOperator::from_diagonal(&frequencies);
    ConservativeSystem::assemble(omega1.matrix(), omega2.matrix(), &gamma, tol)
}

/// Point measure `N_k = Γ E_k Γ†` over the eigen-clusters of `Ω₂`.
pub fn measure_of(system: &ConservativeSystem, tol: &ToleranceConfig) -> Result<PointMeasure> {
    let gamma = system.gamma();
    let n1 = system.n1();
    let total = (&gamma * gamma.adjoint()).norm();
    if total == 0.0 {
        return Ok(PointMeasure::empty(n1));
    }
    let decomposition = eigh(&system.omega2())?;
    let clusters = cluster_spectrum(&decomposition.values, decomposition.scale(), tol.eig_cluster);
    let mut atoms = Vec::new();
    for cluster in &clusters {
        let g = &gamma * decomposition.cluster_frame(cluster);
        let mass = &g * g.adjoint();
        if mass.norm() > tol.rank * total {
            atoms.push((cluster.representative, mass));
        }
    }
    PointMeasure::from_atoms(n1, atoms, tol)
}

pub const DEFAULT_DISSIPATION_TRIALS: usize = 32;
pub const DEFAULT_DISSIPATION_SEED: u64 = 0x5EED;
const DISSIPATION_GRID_POINTS: usize = 200;
const DISSIPATION_HORIZON: f64 = 5.0;
const TOEPLITZ_MAX_DIM: usize = 600;

/// Outcome of a dissipation check.
#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    /// Authoritative verdict: equals `algebraic_pass`.
    pub verdict: bool,
    pub algebraic_pass: bool,
    /// Index of the first atom with a negative eigenvalue.
    pub witness_atom: Option<usize>,
    /// Minimum eigenvalue per atom, or of the block-Toeplitz matrix for samples.
    pub min_eigenvalues: Vec<f64>,
    pub monte_carlo_pass: bool,
    pub trials: usize,
    pub seed: u64,
    /// Discretized quadratic form of every trial divided by its scale.
    pub normalized_forms: Vec<f64>,
    pub first_negative_trial: Option<usize>,
}

/// Discretized time-domain quadratic form
/// `Re Σ_i Σ_{j≤i} w_ij h² v_i† a(t_i − t_j) v_j` (w = ½ on the diagonal).
struct QuadraticForm<'a> {
    lags: &'a [CMatrix],
    h: f64,
}

impl QuadraticForm<'_> {
    fn grid_len(&self) -> usize {
        self.lags.len()
    }

    fn dim(&self) -> usize {
        self.lags.first().map(|a| a.nrows()).unwrap_or(0)
    }

    fn evaluate(&self, v: &[CVector]) -> f64 {
        let mut total = 0.0;
        for i in 0..v.len() {
            for j in 0..=i {
                let w = if i == j { 0.5 } else { 1.0 };
                total += w * v[i].dotc(&(&self.lags[i - j] * &v[j])).re;
            }
        }
        total * self.h * self.h
    }

    /// Upper bound `‖a(0)‖ (h Σ‖v_i‖)²` on the magnitude of the form.
    fn scale(&self, v: &[CVector]) -> f64 {
        let mass: f64 = v.iter().map(|x| x.norm()).sum::<f64>() * self.h;
        self.lags[0].norm().max(f64::MIN_POSITIVE) * mass * mass
    }

    /// Gram-type matrix of the form on the family `{e_m ⊗ φ_ℓ}` (index ℓ·n + m).
    fn ritz_matrix(&self, family: &[Vec<C64>]) -> CMatrix {
        let n = self.dim();
        let g = self.grid_len();
        let k = family.len();
        let mut s = CMatrix::zeros(n * k, n * k);
        for lag in 0..g {
            for l in 0..k {
                for lp in 0..k {
                    let mut c = c64(0.0, 0.0);
                    for j in 0..g - lag {
                        c += family[l][j + lag].conj() * family[lp][j];
                    }
                    if lag == 0 {
                        c *= 0.5;
                    }
                    if c == c64(0.0, 0.0) {
                        continue;
                    }
                    let block = &self.lags[lag] * c;
                    let mut view = s.view_mut((l * n, lp * n), (n, n));
                    view += block;
                }
            }
        }
        let s = s * c64(self.h * self.h, 0.0);
        (&s + s.adjoint()) * c64(0.5, 0.0)
    }
}

fn tent(t: f64, start: f64, end: f64) -> f64 {
    if t <= start || t >= end {
        return 0.0;
    }
    let mid = 0.5 * (start + end);
    if t <= mid {
        (t - start) / (mid - start)
    } else {
        (end - t) / (end - mid)
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Runs the trial family shared by measures and samples. Even trials are
/// random piecewise-linear vector functions vanishing at both ends of the
/// window. Odd trials take a tent of random support modulated by each probe
/// frequency and minimize the form over that family (a Ritz step), then
/// evaluate the minimizer.
fn monte_carlo(form: &QuadraticForm, probes: &[f64], trials: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = form.dim();
    let g = form.grid_len();
    let times: Vec<f64> = (0..g).map(|i| i as f64 * form.h).collect();
    let horizon = times.last().copied().unwrap_or(0.0);
    let mut forms = Vec::with_capacity(trials);
    for trial in 0..trials {
        let v: Vec<CVector> = if trial % 2 == 0 || probes.is_empty() {
            let nodes = rng.gen_range(3..=10);
            let mut values: Vec<CVector> = (0..=nodes).map(|_| random_vector(rng, n)).collect();
            values[0].fill(c64(0.0, 0.0));
            values[nodes].fill(c64(0.0, 0.0));
            times
                .iter()
                .map(|&t| {
                    let x = if horizon > 0.0 { t / horizon * nodes as f64 } else { 0.0 };
                    let i = (x.floor() as usize).min(nodes - 1);
                    let frac = x - i as f64;
                    &values[i] * c64(1.0 - frac, 0.0) + &values[i + 1] * c64(frac, 0.0)
                })
                .collect()
        } else {
            let width = rng.gen_range(0.5..=1.0) * horizon;
            let start = rng.gen_range(0.0..=(horizon - width).max(0.0));
            let family: Vec<Vec<C64>> = probes
                .iter()
                .map(|&nu| {
                    times
                        .iter()
                        .map(|&t| C64::from_polar(tent(t, start, start + width), -nu * t))
                        .collect()
                })
                .collect();
            let ritz = HermitianOperator::from_hermitian_part(form.ritz_matrix(&family));
            let decomposition = eigh(&ritz)?;
            let x = decomposition.vectors.column(0).clone_owned();
            (0..g)
                .map(|i| {
                    let mut vi = CVector::zeros(n);
                    for (l, phi) in family.iter().enumerate() {
                        vi += x.rows(l * n, n) * phi[i];
                    }
                    vi
                })
                .collect()
        };
        let scale = form.scale(&v);
        let q = form.evaluate(&v);
        forms.push(if scale > 0.0 { q / scale } else { 0.0 });
    }
    Ok(forms)
}

fn summarize_monte_carlo(forms: &[f64], tol: &ToleranceConfig) -> (bool, Option<usize>) {
    let first_negative = forms.iter().position(|&q| q < -tol.residual);
    (first_negative.is_none(), first_negative)
}

/// Dissipation check of a point measure: per-atom positivity (authoritative)
/// plus a seeded time-domain Monte-Carlo probe of the quadratic form.
pub fn check_dissipation(
    measure: &PointMeasure,
    trials: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<DissipationReport> {
    let mut min_eigenvalues = Vec::with_capacity(measure.atoms().len());
    let mut witness_atom = None;
    for (k, atom) in measure.atoms().iter().enumerate() {
        let min = eigh(&atom.mass)?.values.first().copied().unwrap_or(0.0);
        min_eigenvalues.push(min);
        if witness_atom.is_none() && min < -tol.residual * atom.mass.norm().max(f64::MIN_POSITIVE) {
            witness_atom = Some(k);
        }
    }
    let algebraic_pass = witness_atom.is_none();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = DISSIPATION_HORIZON / (DISSIPATION_GRID_POINTS - 1) as f64;
    let normalized_forms = if measure.is_empty() || measure.dim() == 0 {
        vec![0.0; trials]
    } else {
        let lags: Vec<CMatrix> = (0..DISSIPATION_GRID_POINTS)
            .map(|m| measure.kernel_at(m as f64 * h))
            .collect();
        let form = QuadraticForm { lags: &lags, h };
        monte_carlo(&form, &measure.frequencies(), trials, &mut rng)?
    };
    let (monte_carlo_pass, first_negative_trial) = summarize_monte_carlo(&normalized_forms, tol);
    Ok(DissipationReport {
        verdict: algebraic_pass,
        algebraic_pass,
        witness_atom,
        min_eigenvalues,
        monte_carlo_pass,
        trials,
        seed,
        normalized_forms,
        first_negative_trial,
    })
}

/// Dissipation check of kernel samples on a uniform grid starting at `t = 0`.
/// The algebraic test is positivity of the block-Toeplitz matrix
/// `[a(t_i − t_j)]` (with `a(−t) = a(t)†`); Monte-Carlo probes use random
/// frequencies below the Nyquist limit.
pub fn check_dissipation_samples(
    samples: &KernelSamples,
    trials: usize,
    seed: u64,
    tol: &ToleranceConfig,
) -> Result<DissipationReport> {
    let h = uniform_step(samples.times())?;
    if samples.times()[0] != 0.0 {
        return Err(Error::Precondition("sampled dissipation check needs a grid starting at t = 0".into()));
    }
    let n = samples.dim();
    let g = samples.len().min(DISSIPATION_GRID_POINTS);
    let lags = &samples.values()[..g];

    let blocks = TOEPLITZ_MAX_DIM.checked_div(n).map_or(0, |per| g.min(per).max(1));
    let mut toeplitz = CMatrix::zeros(n * blocks, n * blocks);
    for i in 0..blocks {
        for j in 0..blocks {
            let block = if i >= j { lags[i - j].clone() } else { lags[j - i].adjoint() };
            toeplitz.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    let toeplitz = HermitianOperator::from_hermitian_part(toeplitz);
    let min = eigh(&toeplitz)?.values.first().copied().unwrap_or(0.0);
    let algebraic_pass = min >= -tol.residual * toeplitz.norm().max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nyquist = std::f64::consts::PI / h;
    let probes: Vec<f64> = (0..8).map(|_| rng.gen_range(-nyquist..nyquist)).collect();
    let form = QuadraticForm { lags, h };
    let normalized_forms = if n == 0 {
        vec![0.0; trials]
    } else {
        monte_carlo(&form, &probes, trials, &mut rng)?
    };
    let (monte_carlo_pass, first_negative_trial) = summarize_monte_carlo(&normalized_forms, tol);
    Ok(DissipationReport {
        verdict: algebraic_pass,
        algebraic_pass,
        witness_atom: None,
        min_eigenvalues: vec![min],
        monte_carlo_pass,
        trials,
        seed,
        normalized_forms,
        first_negative_trial,
    })
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let h = times[1] - times[0];
    let span = times[times.len() - 1] - times[0];
    for (j, &t) in times.iter().enumerate() {
        let expected = times[0] + j as f64 * h;
        if (t - expected).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::Precondition(format!("time grid is not uniform at index {j}")));
        }
    }
    Ok(h)
}

const PENCIL_SV_CUT: f64 = 1e-8;
const FIT_RESIDUAL: f64 = 1e-6;
const NYQUIST_MARGIN: f64 = 0.95;
const UNIT_CIRCLE_TOL: f64 = 1e-6;
const VANDERMONDE_MAX_CONDITION: f64 = 1e10;

/// Recovers a point measure from noise-free samples on a uniform grid.
///
/// Frequencies come from a matrix pencil on the scalar sequence
/// `tr a(t_j)` (pencil length half the sample count, singular values cut at
/// `1e−8·σ_max`); masses from least squares against the Vandermonde matrix,
/// Hermitized and projected to the nearest PSD matrix.
pub fn fit_point_measure(samples: &KernelSamples, max_atoms: usize, tol: &ToleranceConfig) -> Result<PointMeasure> {
    let n1 = samples.dim();
    let dt = uniform_step(samples.times())?;
    let count = samples.len();
    let reference = samples.values().iter().map(norm_max).fold(0.0, f64::max);
    if reference == 0.0 {
        return Ok(PointMeasure::empty(n1));
    }
    let y: Vec<C64> = samples.values().iter().map(|a| a.trace()).collect();

    let pencil = count / 2;
    let rows = count - pencil;
    let hankel = CMatrix::from_fn(rows, pencil + 1, |i, j| y[i + j]);
    let decomposition = svd(&hankel)?;
    let order = decomposition.rank(PENCIL_SV_CUT);
    if order == 0 {
        return Err(Error::Fit("trace sequence vanishes although samples do not".into()));
    }
    if order > max_atoms {
        return Err(Error::Fit(format!(
            "signal needs {order} atoms, more than the allowed {max_atoms}"
        )));
    }
    if order >= pencil {
        return Err(Error::Fit(format!(
            "pencil of length {pencil} cannot resolve {order} atoms; provide more samples"
        )));
    }
    let w = decomposition.right.columns(0, order).map(|z| z.conj());
    let w1 = w.rows(0, pencil).clone_owned();
    let w2 = w.rows(1, pencil).clone_owned();
    let w1_pinv = w1
        .clone()
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Fit(format!("pencil pseudo-inverse failed: {e}")))?;
    let z = w1_pinv * w2;
    let schur = Schur::try_new(z, f64::EPSILON, 10_000).ok_or_else(|| Error::Numeric {
        routine: "fit_point_measure",
        detail: "Schur iteration for pencil eigenvalues did not converge".into(),
    })?;
    let (_, t) = schur.unpack();
    let mut frequencies = Vec::with_capacity(order);
    for k in 0..order {
        let zk = t[(k, k)];
        if (zk.norm() - 1.0).abs() > UNIT_CIRCLE_TOL {
            return Err(Error::Fit(format!(
                "pencil eigenvalue {zk} is off the unit circle (|z| = {}); data is not a pure point measure",
                zk.norm()
            )));
        }
        let omega = -zk.arg() / dt;
        if omega.abs() > NYQUIST_MARGIN * std::f64::consts::PI / dt {
            return Err(Error::Precondition(format!(
                "recovered frequency {omega} is at the Nyquist limit π/Δt = {}; refine the grid",
                std::f64::consts::PI / dt
            )));
        }
        frequencies.push(omega);
    }
    frequencies.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let vandermonde = CMatrix::from_fn(count, order, |j, k| C64::from_polar(1.0, -frequencies[k] * samples.times()[j]));
    let vsvd = svd(&vandermonde)?;
    let smallest = vsvd.singular_values.last().copied().unwrap_or(0.0);
    let condition = if smallest > 0.0 { vsvd.largest() / smallest } else { f64::INFINITY };
    if condition > VANDERMONDE_MAX_CONDITION {
        return Err(Error::Fit(format!(
            "Vandermonde system is ill-conditioned (condition estimate {condition:e})"
        )));
    }
    let mut rhs = CMatrix::zeros(count, n1 * n1);
    for (j, a) in samples.values().iter().enumerate() {
        for r in 0..n1 {
            for c in 0..n1 {
                rhs[(j, r * n1 + c)] = a[(r, c)];
            }
        }
    }
    let mut inv_sigma = CMatrix::zeros(order, order);
    for k in 0..order {
        inv_sigma[(k, k)] = c64(1.0 / vsvd.singular_values[k], 0.0);
    }
    let coefficients = &vsvd.right * inv_sigma * vsvd.left.adjoint() * rhs;
    let mut atoms = Vec::with_capacity(order);
    for (k, &omega) in frequencies.iter().enumerate() {
        let raw = CMatrix::from_fn(n1, n1, |r, c| coefficients[(k, r * n1 + c)]);
        let mass = psd_projection(&HermitianOperator::from_hermitian_part(raw))?;
        atoms.push((omega, mass.into_matrix()));
    }
    let measure = PointMeasure::from_atoms(n1, atoms, tol)?;

    let refit = kernel_of_measure(&measure, samples.times())?;
    let residual = refit.max_deviation(samples)?;
    if residual > FIT_RESIDUAL * reference {
        return Err(Error::Fit(format!(
            "fitted measure misses the samples by {residual:e} (> {:e})",
            FIT_RESIDUAL * reference
        )));
    }
    Ok(measure)
}
