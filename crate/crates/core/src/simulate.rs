//! Time propagation of conservative systems and of open systems with memory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::measure_of;
use crate::model::{ConservativeSystem, OpenSystem};
use crate::numerics::{c64, eigh, CVector, ToleranceConfig, C64};

/// Sampled states on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub scheme: &'static str,
    /// Step size for uniform grids.
    pub dt: Option<f64>,
    /// `max_t |‖V(t)‖ − ‖V(0)‖| / ‖V(0)‖` (absolute when `V(0) = 0`).
    pub norm_drift: f64,
}

impl Trajectory {
    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Built-in forcing profiles `f(t) = vector · profile(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Forcing {
    /// Constant for `t ≥ 0`.
    Step { vector: Vec<[f64; 2]> },
    /// Constant on `[start, end]`, zero elsewhere.
    Pulse {
        vector: Vec<[f64; 2]>,
        start: f64,
        end: f64,
    },
    /// `sin(frequency · t)` for `t ≥ 0`.
    Sine { vector: Vec<[f64; 2]>, frequency: f64 },
}

impl Forcing {
    fn vector(&self) -> CVector {
        let raw = match self {
            Forcing::Step { vector } | Forcing::Pulse { vector, .. } | Forcing::Sine { vector, .. } => vector,
        };
        CVector::from_iterator(raw.len(), raw.iter().map(|p| c64(p[0], p[1])))
    }

    pub fn dim(&self) -> usize {
        self.vector().len()
    }

    fn profile(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Forcing::Step { .. } => 1.0,
            Forcing::Pulse { start, end, .. } => {
                if t >= *start && t <= *end {
                    1.0
                } else {
                    0.0
                }
            }
            Forcing::Sine { frequency, .. } => (frequency * t).sin(),
        }
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<CVector> {
        let v = self.vector();
        grid.iter().map(|&t| &v * c64(self.profile(t), 0.0)).collect()
    }
}

/// Uniform grid `t_j = j·dt`, `j = 0..=round(T/dt)`.
pub fn uniform_grid(dt: f64, t_end: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0 && t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Validation("need dt > 0 and T ≥ 0".into()));
    }
    let steps = (t_end / dt).round() as usize;
    Ok((0..=steps).map(|j| j as f64 * dt).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("time grid must be finite and strictly ascending".into()));
    }
    Ok(())
}

fn check_uniform(grid: &[f64]) -> Result<f64> {
    check_grid(grid)?;
    if grid.len() < 2 {
        return Err(Error::Validation("uniform grid needs at least two points".into()));
    }
    let h = grid[1] - grid[0];
    let span = grid[grid.len() - 1] - grid[0];
    for (j, &t) in grid.iter().enumerate() {
        if (t - (grid[0] + j as f64 * h)).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::Validation(format!("time grid is not uniform at index {j}")));
        }
    }
    Ok(h)
}

fn check_forcing(forcing: &[CVector], grid: &[f64], dim: usize) -> Result<()> {
    if forcing.len() != grid.len() {
        return Err(Error::Validation(format!(
            "{} forcing samples for {} grid points",
            forcing.len(),
            grid.len()
        )));
    }
    if forcing.iter().any(|f| f.len() != dim) {
        return Err(Error::Validation(format!("forcing samples must have dimension {dim}")));
    }
    Ok(())
}

/// `φ₁(z) = (e^z − 1)/z` and `φ₂(z) = (e^z − 1 − z)/z²`.
fn phi(z: C64) -> (C64, C64) {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        let z3 = z2 * z;
        let z4 = z3 * z;
        let phi1 = c64(1.0, 0.0) + z / 2.0 + z2 / 6.0 + z3 / 24.0 + z4 / 120.0;
        let phi2 = c64(0.5, 0.0) + z / 6.0 + z2 / 24.0 + z3 / 120.0 + z4 / 720.0;
        (phi1, phi2)
    } else {
        let ez = z.exp();
        ((ez - 1.0) / z, (ez - 1.0 - z) / (z * z))
    }
}

fn norm_drift(states: &[CVector]) -> f64 {
    let n0 = states.first().map(|v| v.norm()).unwrap_or(0.0);
    let worst = states.iter().map(|v| (v.norm() - n0).abs()).fold(0.0, f64::max);
    if n0 > 0.0 {
        worst / n0
    } else {
        worst
    }
}

/// Solves `∂ₜV = −iΩV + F(t)` in the eigenbasis of `Ω`, with `F` the
/// piecewise-linear interpolant of the samples. Exact up to rounding.
pub fn propagate_conservative(
    system: &ConservativeSystem,
    v0: &CVector,
    forcing: &[CVector],
    grid: &[f64],
) -> Result<Trajectory> {
    let n = system.dim();
    if v0.len() != n {
        return Err(Error::Validation(format!("initial state has dimension {}, expected {n}", v0.len())));
    }
    check_grid(grid)?;
    check_forcing(forcing, grid, n)?;
    let decomposition = eigh(system.omega())?;
    let basis = &decomposition.vectors;
    let to_eigen = |v: &CVector| basis.adjoint() * v;
    let mut c = to_eigen(v0);
    let mut states = Vec::with_capacity(grid.len());
    states.push(v0.clone());
    let mut f_prev = to_eigen(&forcing[0]);
    for k in 0..grid.len() - 1 {
        let h = grid[k + 1] - grid[k];
        let f_next = to_eigen(&forcing[k + 1]);
        for (i, &lambda) in decomposition.values.iter().enumerate() {
            let z = c64(0.0, -lambda * h);
            let (phi1, phi2) = phi(z);
            c[i] = z.exp() * c[i] + (phi1 * f_prev[i] + phi2 * (f_next[i] - f_prev[i])) * h;
        }
        states.push(basis * &c);
        f_prev = f_next;
    }
    let uniform = check_uniform(grid).ok();
    Ok(Trajectory {
        norm_drift: norm_drift(&states),
        times: grid.to_vec(),
        states,
        scheme: "eigenbasis-exact-piecewise-linear",
        dt: uniform,
    })
}

/// Per-atom running sums `Σ_j e^{iω_k t_j} v_j` that turn the trapezoidal
/// memory integral into `O(atoms)` work per evaluation.
struct Memory<'a> {
    open: &'a OpenSystem,
    sums: Vec<CVector>,
    first: Option<CVector>,
}

impl<'a> Memory<'a> {
    fn new(open: &'a OpenSystem) -> Self {
        let n = open.dim();
        Self {
            open,
            sums: vec![CVector::zeros(n); open.kernel().atoms().len()],
            first: None,
        }
    }

    fn push(&mut self, t: f64, v: &CVector) {
        if self.first.is_none() {
            self.first = Some(v.clone());
        }
        for (sum, atom) in self.sums.iter_mut().zip(self.open.kernel().atoms()) {
            *sum += v * C64::from_polar(1.0, atom.omega * t);
        }
    }

    /// Trapezoid rule for `∫_{t₀}^{t_n} a(t − s) v(s) ds` over the stored
    /// nodes `t₀..t_n`, evaluated at time `t ≥ t_n`.
    fn trapezoid(&self, t: f64, t0: f64, tn: f64, vn: &CVector, h: f64) -> CVector {
        let n = self.open.dim();
        let mut acc = CVector::zeros(n);
        let Some(v0) = &self.first else {
            return acc;
        };
        for (sum, atom) in self.sums.iter().zip(self.open.kernel().atoms()) {
            let ends = v0 * C64::from_polar(0.5, atom.omega * t0) + vn * C64::from_polar(0.5, atom.omega * tn);
            let weighted = sum - ends;
            acc += atom.mass.matrix() * (weighted * C64::from_polar(h, -atom.omega * t));
        }
        acc
    }
}

/// Solves `∂ₜv = −iΩ₁v − ∫₀ᵗ a(τ)v(t−τ)dτ + f(t)` from rest (`v(t₀) = 0`)
/// by explicit midpoint with trapezoidal memory quadrature. The forcing is
/// the piecewise-linear interpolant of the samples.
pub fn propagate_open(open: &OpenSystem, forcing: &[CVector], grid: &[f64]) -> Result<Trajectory> {
    propagate_open_with_progress(open, forcing, grid, &mut |_, _| {})
}

/// As [`propagate_open`], calling `progress(step, total_steps)` after each step.
pub fn propagate_open_with_progress(
    open: &OpenSystem,
    forcing: &[CVector],
    grid: &[f64],
    progress: &mut dyn FnMut(usize, usize),
) -> Result<Trajectory> {
    let n = open.dim();
    let h = check_uniform(grid)?;
    check_forcing(forcing, grid, n)?;
    let omega1 = open.omega1().matrix();
    let kernel = open.kernel();
    let a_half = kernel.kernel_at(0.5 * h);
    let a_zero = kernel.kernel_at(0.0);
    let minus_i = c64(0.0, -1.0);
    let t0 = grid[0];
    let steps = grid.len() - 1;

    let mut v = CVector::zeros(n);
    let mut states = Vec::with_capacity(grid.len());
    states.push(v.clone());
    let mut memory = Memory::new(open);
    memory.push(t0, &v);
    for k in 0..steps {
        let tn = grid[k];
        let mem_n = memory.trapezoid(tn, t0, tn, &v, h);
        let rate_n = omega1 * &v * minus_i - mem_n + &forcing[k];
        let v_mid = &v + rate_n * c64(0.5 * h, 0.0);

        let t_mid = tn + 0.5 * h;
        let tail = (&a_half * &v + &a_zero * &v_mid) * c64(0.25 * h, 0.0);
        let mem_mid = memory.trapezoid(t_mid, t0, tn, &v, h) + tail;
        let f_mid = (&forcing[k] + &forcing[k + 1]) * c64(0.5, 0.0);
        let rate_mid = omega1 * &v_mid * minus_i - mem_mid + f_mid;
        v += rate_mid * c64(h, 0.0);

        memory.push(grid[k + 1], &v);
        states.push(v.clone());
        progress(k + 1, steps);
    }
    Ok(Trajectory {
        norm_drift: norm_drift(&states),
        times: grid.to_vec(),
        states,
        scheme: "explicit-midpoint+trapezoid-memory",
        dt: Some(h),
    })
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// `max_t ‖P₁V(t) − v₁(t)‖`.
    pub residual: f64,
    /// `max_t ‖v₁(t)‖`.
    pub max_open_norm: f64,
    pub conservative: Trajectory,
    pub open: Trajectory,
}

impl EquivalenceReport {
    pub fn relative(&self) -> f64 {
        if self.max_open_norm > 0.0 {
            self.residual / self.max_open_norm
        } else {
            self.residual
        }
    }
}

/// Drives the full system with `(f₁, 0)` from rest and the open system with
/// kernel `measure_of(system)`, and compares the observable halves.
pub fn equivalence_residual(
    system: &ConservativeSystem,
    f1: &[CVector],
    grid: &[f64],
    tol: &ToleranceConfig,
) -> Result<EquivalenceReport> {
    let n1 = system.n1();
    check_forcing(f1, grid, n1)?;
    let full_forcing: Vec<CVector> = f1
        .iter()
        .map(|f| {
            let mut x = CVector::zeros(system.dim());
            x.rows_mut(0, n1).copy_from(f);
            x
        })
        .collect();
    let conservative = propagate_conservative(system, &CVector::zeros(system.dim()), &full_forcing, grid)?;
    let open_system = OpenSystem::new(system.omega1(), measure_of(system, tol)?)?;
    let open = propagate_open(&open_system, f1, grid)?;
    let residual = conservative
        .states
        .iter()
        .zip(&open.states)
        .map(|(big, small)| (big.rows(0, n1) - small).norm())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        residual,
        max_open_norm: open.max_norm(),
        conservative,
        open,
    })
}
