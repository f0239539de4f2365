//! Conservative systems in two-block form, point spectral measures and open
//! systems, with validation reports.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    c64, eigh, ensure_finite, hermiticity_defect, norm_max, principal_sqrt_psd, CMatrix, HermitianOperator, Subspace,
    ToleranceConfig, C64,
};

/// A unit-mass conservative system `Ω = [[Ω₁, Γ], [Γ†, Ω₂]]` on `C^{n1} ⊕ C^{n2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeSystem {
    n1: usize,
    n2: usize,
    omega: HermitianOperator,
}

impl ConservativeSystem {
    pub fn assemble(
        omega1: &CMatrix,
        omega2: &CMatrix,
        gamma: &CMatrix,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        let n1 = omega1.nrows();
        let n2 = omega2.nrows();
        if !omega1.is_square() || !omega2.is_square() {
            return Err(Error::Validation("diagonal blocks must be square".into()));
        }
        if gamma.shape() != (n1, n2) {
            return Err(Error::Validation(format!(
                "coupling has shape {:?}, expected ({n1}, {n2})",
                gamma.shape()
            )));
        }
        let omega1 = HermitianOperator::new(omega1.clone(), tol)
            .map_err(|e| Error::Validation(format!("Ω₁: {e}")))?;
        let omega2 = HermitianOperator::new(omega2.clone(), tol)
            .map_err(|e| Error::Validation(format!("Ω₂: {e}")))?;
        ensure_finite(gamma, "coupling")?;
        let mut full = CMatrix::zeros(n1 + n2, n1 + n2);
        full.view_mut((0, 0), (n1, n1)).copy_from(omega1.matrix());
        full.view_mut((n1, n1), (n2, n2)).copy_from(omega2.matrix());
        full.view_mut((0, n1), (n1, n2)).copy_from(gamma);
        full.view_mut((n1, 0), (n2, n1)).copy_from(&gamma.adjoint());
        Ok(Self {
            n1,
            n2,
            omega: HermitianOperator::from_hermitian_part(full),
        })
    }

    pub fn from_real_blocks(
        omega1: &nalgebra::DMatrix<f64>,
        omega2: &nalgebra::DMatrix<f64>,
        gamma: &nalgebra::DMatrix<f64>,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        use crate::numerics::real_to_complex;
        Self::assemble(
            &real_to_complex(omega1),
            &real_to_complex(omega2),
            &real_to_complex(gamma),
            tol,
        )
    }

    /// Wraps a full frequency operator with observable dimension `n1`.
    pub fn from_omega(n1: usize, omega: CMatrix, tol: &ToleranceConfig) -> Result<Self> {
        let omega = HermitianOperator::new(omega, tol)?;
        let dim = omega.dim();
        if n1 > dim {
            return Err(Error::Validation(format!(
                "observable dimension {n1} exceeds total dimension {dim}"
            )));
        }
        Ok(Self {
            n1,
            n2: dim - n1,
            omega,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn omega(&self) -> &HermitianOperator {
        &self.omega
    }

    pub fn omega1(&self) -> HermitianOperator {
        HermitianOperator::from_hermitian_part(self.omega.matrix().view((0, 0), (self.n1, self.n1)).clone_owned())
    }

    pub fn omega2(&self) -> HermitianOperator {
        HermitianOperator::from_hermitian_part(
            self.omega
                .matrix()
                .view((self.n1, self.n1), (self.n2, self.n2))
                .clone_owned(),
        )
    }

    /// Top-right block `Γ : H₂ → H₁`.
    pub fn gamma(&self) -> CMatrix {
        self.omega.matrix().view((0, self.n1), (self.n1, self.n2)).clone_owned()
    }

    /// Off-diagonal part `Γ̊` of `Ω`.
    pub fn gamma_ring(&self) -> CMatrix {
        let mut m = self.omega.matrix().clone();
        m.view_mut((0, 0), (self.n1, self.n1)).fill(c64(0.0, 0.0));
        m.view_mut((self.n1, self.n1), (self.n2, self.n2)).fill(c64(0.0, 0.0));
        m
    }

    /// Block-diagonal part `Ω̊ = Ω₁ ⊕ Ω₂`.
    pub fn omega_ring(&self) -> CMatrix {
        self.omega.matrix() - self.gamma_ring()
    }

    /// `H₁` as a coordinate subspace of the full space.
    pub fn h1(&self) -> Subspace {
        Subspace::coordinate(self.dim(), &(0..self.n1).collect::<Vec<_>>())
    }

    pub fn h2(&self) -> Subspace {
        Subspace::coordinate(self.dim(), &(self.n1..self.dim()).collect::<Vec<_>>())
    }

    /// Block direct sum of two systems (observable parts first, then hidden).
    pub fn direct_sum(&self, other: &ConservativeSystem, tol: &ToleranceConfig) -> Result<Self> {
        let o1 = block_diag(self.omega1().matrix(), other.omega1().matrix());
        let o2 = block_diag(self.omega2().matrix(), other.omega2().matrix());
        let g = block_diag(&self.gamma(), &other.gamma());
        Self::assemble(&o1, &o2, &g, tol)
    }

    /// Conjugates by the block unitary `W₁ ⊕ W₂`.
    pub fn conjugate(&self, w1: &CMatrix, w2: &CMatrix, tol: &ToleranceConfig) -> Result<Self> {
        if w1.shape() != (self.n1, self.n1) || w2.shape() != (self.n2, self.n2) {
            return Err(Error::Validation("conjugating unitaries have the wrong shape".into()));
        }
        let w = block_diag(w1, w2);
        Self::from_omega(self.n1, &w * self.omega.matrix() * w.adjoint(), tol)
    }
}

pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut m = CMatrix::zeros(ra + rb, ca + cb);
    m.view_mut((0, 0), (ra, ca)).copy_from(a);
    m.view_mut((ra, ca), (rb, cb)).copy_from(b);
    m
}

/// One point mass `(ω_k, N_k)` of a spectral measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub omega: f64,
    pub mass: HermitianOperator,
}

/// A finite sum of point masses `N(dω) = Σ_k N_k δ(ω − ω_k)`.
///
/// Construction sorts the atoms, merges frequencies that coincide within
/// tolerance and checks shapes and Hermiticity. Positivity of the masses is
/// the dissipation condition and is checked separately (see
/// [`PointMeasure::new`] and [`validate_measure`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl PointMeasure {
    pub fn empty(dim: usize) -> Self {
        Self { dim, atoms: Vec::new() }
    }

    /// Builds a measure and requires every mass to be PSD.
    pub fn new(dim: usize, atoms: Vec<(f64, CMatrix)>, tol: &ToleranceConfig) -> Result<Self> {
        let measure = Self::from_atoms(dim, atoms, tol)?;
        for (k, atom) in measure.atoms.iter().enumerate() {
            let min = atom_min_eigenvalue(&atom.mass)?;
            if min < -psd_allowance(&atom.mass, tol) {
                return Err(Error::Dissipation {
                    atom: k,
                    min_eigenvalue: min,
                });
            }
        }
        Ok(measure)
    }

    /// Builds a measure without the positivity check.
    pub fn from_atoms(dim: usize, atoms: Vec<(f64, CMatrix)>, tol: &ToleranceConfig) -> Result<Self> {
        let mut parsed: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (k, (omega, mass)) in atoms.into_iter().enumerate() {
            if !omega.is_finite() {
                return Err(Error::Validation(format!("atom {k}: frequency is not finite")));
            }
            if mass.shape() != (dim, dim) {
                return Err(Error::Validation(format!(
                    "atom {k}: mass has shape {:?}, expected ({dim}, {dim})",
                    mass.shape()
                )));
            }
            let mass = HermitianOperator::new(mass, tol).map_err(|e| Error::Validation(format!("atom {k}: {e}")))?;
            parsed.push(Atom { omega, mass });
        }
        parsed.sort_by(|a, b| a.omega.partial_cmp(&b.omega).expect("finite frequencies"));
        Ok(Self {
            dim,
            atoms: merge_close_atoms(parsed, tol),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.omega).collect()
    }

    /// `Σ_k N_k = a(0)`.
    pub fn total_mass(&self) -> CMatrix {
        self.atoms
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, a| acc + a.mass.matrix())
    }

    /// `a(t) = Σ_k e^{−iω_k t} N_k`.
    pub fn kernel_at(&self, t: f64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for atom in &self.atoms {
            let phase = C64::from_polar(1.0, -atom.omega * t);
            acc += atom.mass.matrix() * phase;
        }
        acc
    }
}

fn merge_close_atoms(sorted: Vec<Atom>, tol: &ToleranceConfig) -> Vec<Atom> {
    if sorted.is_empty() {
        return sorted;
    }
    let span = sorted.last().map(|a| a.omega).unwrap_or(0.0) - sorted[0].omega;
    let threshold = tol.eig_cluster * span;
    let mut groups: Vec<Vec<Atom>> = Vec::new();
    let mut last_omega = f64::NEG_INFINITY;
    for atom in sorted {
        let joins = groups.last().is_some() && atom.omega - last_omega <= threshold;
        last_omega = atom.omega;
        if joins {
            groups.last_mut().expect("non-empty").push(atom);
        } else {
            groups.push(vec![atom]);
        }
    }
    groups
        .into_iter()
        .map(|group| {
            let omega = group.iter().map(|a| a.omega).sum::<f64>() / group.len() as f64;
            let dim = group[0].mass.dim();
            let mass = group.iter().fold(CMatrix::zeros(dim, dim), |acc, a| acc + a.mass.matrix());
            Atom {
                omega,
                mass: HermitianOperator::from_hermitian_part(mass),
            }
        })
        .collect()
}

fn atom_min_eigenvalue(mass: &HermitianOperator) -> Result<f64> {
    Ok(eigh(mass)?.values.first().copied().unwrap_or(0.0))
}

fn psd_allowance(mass: &HermitianOperator, tol: &ToleranceConfig) -> f64 {
    tol.residual * mass.norm().max(f64::MIN_POSITIVE)
}

/// An open system `∂ₜv = −iΩ₁v − ∫₀^t a(τ)v(t−τ)dτ + f` in unit-mass form.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSystem {
    omega1: HermitianOperator,
    kernel: PointMeasure,
}

impl OpenSystem {
    pub fn new(omega1: HermitianOperator, kernel: PointMeasure) -> Result<Self> {
        if omega1.dim() != kernel.dim() {
            return Err(Error::Validation(format!(
                "kernel dimension {} does not match Ω₁ dimension {}",
                kernel.dim(),
                omega1.dim()
            )));
        }
        Ok(Self { omega1, kernel })
    }

    /// Ingests `m ∂ₜv = −iAv − ∫a(τ)v(t−τ)dτ − a_∞ v + f` by the rescaling
    /// `v → m^{1/2}v`, `A → m^{−1/2}Am^{−1/2}`, `N_k → m^{−1/2}N_k m^{−1/2}`.
    /// A nonzero instantaneous term `a_∞` is rejected.
    pub fn from_mass_form(
        mass: &HermitianOperator,
        a: &HermitianOperator,
        kernel: &PointMeasure,
        a_infinity: Option<&CMatrix>,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        if let Some(inst) = a_infinity {
            let norm = norm_max(inst);
            if norm > 0.0 {
                return Err(Error::UnboundedCoupling { norm });
            }
        }
        if mass.dim() != a.dim() || kernel.dim() != a.dim() {
            return Err(Error::Validation("mass, operator and kernel dimensions differ".into()));
        }
        let decomposition = eigh(mass)?;
        if decomposition.values.first().is_some_and(|&m| m <= 0.0) {
            return Err(Error::Validation("mass operator must be positive definite".into()));
        }
        let inv_sqrt = decomposition.apply(|m| c64(1.0 / m.sqrt(), 0.0));
        let rescale = |m: &CMatrix| HermitianOperator::from_hermitian_part(&inv_sqrt * m * &inv_sqrt);
        let omega1 = rescale(a.matrix());
        let atoms = kernel
            .atoms()
            .iter()
            .map(|atom| (atom.omega, rescale(atom.mass.matrix()).into_matrix()))
            .collect();
        Self::new(omega1, PointMeasure::from_atoms(kernel.dim(), atoms, tol)?)
    }

    pub fn dim(&self) -> usize {
        self.omega1.dim()
    }

    pub fn omega1(&self) -> &HermitianOperator {
        &self.omega1
    }

    pub fn kernel(&self) -> &PointMeasure {
        &self.kernel
    }
}

/// Which half of `H = H₁ ⊕ H₂` a partition lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Observable,
    Hidden,
}

/// An orthogonal family of subspaces of `H₁` (or `H₂`), each given in the
/// coordinates of that half.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    side: Side,
    parts: Vec<Subspace>,
    complete: bool,
}

impl BlockPartition {
    pub fn new(side: Side, side_dim: usize, parts: Vec<Subspace>, tol: &ToleranceConfig) -> Result<Self> {
        for (i, p) in parts.iter().enumerate() {
            if p.ambient_dim() != side_dim {
                return Err(Error::Validation(format!(
                    "part {i} has ambient dimension {}, expected {side_dim}",
                    p.ambient_dim()
                )));
            }
        }
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                let overlap = norm_max(&(parts[i].frame().adjoint() * parts[j].frame()));
                if overlap > tol.orth {
                    return Err(Error::Validation(format!(
                        "parts {i} and {j} are not orthogonal (overlap {overlap:e})"
                    )));
                }
            }
        }
        let total: usize = parts.iter().map(Subspace::dim).sum();
        Ok(Self {
            side,
            parts,
            complete: total == side_dim,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn parts(&self) -> &[Subspace] {
        &self.parts
    }

    /// True when the part dimensions add up to the side dimension.
    pub fn is_complete(&self) -> bool {
        self.complete
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: String,
    pub detail: String,
    pub magnitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Minimum eigenvalue of each atom, for measure inputs.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub atom_min_eigenvalues: Vec<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: &str, detail: String, magnitude: f64, atom: Option<usize>) {
        self.violations.push(Violation {
            kind: kind.to_string(),
            detail,
            magnitude,
            atom,
        });
    }
}

/// Checks raw system data: square shape, finiteness, Hermiticity (which
/// includes the bottom-left block equalling `Γ†`) and `n1 + n2 = dim`.
pub fn validate_system_raw(n1: usize, n2: usize, omega: &CMatrix, tol: &ToleranceConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !omega.is_square() {
        report.push(
            "shape",
            format!("Ω is {}x{}, not square", omega.nrows(), omega.ncols()),
            f64::NAN,
            None,
        );
        return report;
    }
    if omega.nrows() != n1 + n2 {
        report.push(
            "shape",
            format!("n1 + n2 = {} but Ω has dimension {}", n1 + n2, omega.nrows()),
            (omega.nrows() as f64 - (n1 + n2) as f64).abs(),
            None,
        );
        return report;
    }
    if ensure_finite(omega, "Ω").is_err() {
        report.push("finite", "Ω contains non-finite entries".into(), f64::NAN, None);
        return report;
    }
    let allowed = tol.herm * (1.0 + norm_max(omega));
    let diag1 = omega.view((0, 0), (n1, n1)).clone_owned();
    let diag2 = omega.view((n1, n1), (n2, n2)).clone_owned();
    for (name, block) in [("Ω₁", &diag1), ("Ω₂", &diag2)] {
        let defect = hermiticity_defect(block);
        if defect > allowed {
            report.push("hermitian", format!("{name} is not Hermitian"), defect, None);
        }
    }
    let gamma = omega.view((0, n1), (n1, n2)).clone_owned();
    let bottom_left = omega.view((n1, 0), (n2, n1)).clone_owned();
    let defect = norm_max(&(bottom_left - gamma.adjoint()));
    if defect > allowed {
        report.push("hermitian", "bottom-left block differs from Γ†".into(), defect, None);
    }
    report
}

/// Checks raw measure data; the positivity check of each atom is the
/// dissipation condition.
pub fn validate_measure_raw(dim: usize, atoms: &[(f64, CMatrix)], tol: &ToleranceConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut previous = f64::NEG_INFINITY;
    for (k, (omega, mass)) in atoms.iter().enumerate() {
        if !omega.is_finite() {
            report.push("finite", format!("atom {k}: frequency not finite"), f64::NAN, Some(k));
            continue;
        }
        if *omega <= previous {
            report.push(
                "ordering",
                format!("atom {k}: frequency {omega} not strictly increasing"),
                previous - omega,
                Some(k),
            );
        }
        previous = *omega;
        if mass.shape() != (dim, dim) {
            report.push("shape", format!("atom {k}: mass shape {:?}", mass.shape()), f64::NAN, Some(k));
            continue;
        }
        if ensure_finite(mass, "mass").is_err() {
            report.push("finite", format!("atom {k}: mass has non-finite entries"), f64::NAN, Some(k));
            continue;
        }
        let defect = hermiticity_defect(mass);
        if defect > tol.herm * (1.0 + norm_max(mass)) {
            report.push("hermitian", format!("atom {k}: mass is not Hermitian"), defect, Some(k));
            continue;
        }
        let h = HermitianOperator::from_hermitian_part(mass.clone());
        match atom_min_eigenvalue(&h) {
            Ok(min) => {
                report.atom_min_eigenvalues.push(min);
                if min < -psd_allowance(&h, tol) {
                    report.push(
                        "dissipation",
                        format!("atom {k} is not positive semidefinite: min eigenvalue {min:e}"),
                        min,
                        Some(k),
                    );
                }
            }
            Err(e) => report.push("numeric", format!("atom {k}: {e}"), f64::NAN, Some(k)),
        }
    }
    report
}

pub fn validate_system(system: &ConservativeSystem, tol: &ToleranceConfig) -> ValidationReport {
    validate_system_raw(system.n1(), system.n2(), system.omega().matrix(), tol)
}

pub fn validate_measure(measure: &PointMeasure, tol: &ToleranceConfig) -> ValidationReport {
    let raw: Vec<(f64, CMatrix)> = measure
        .atoms()
        .iter()
        .map(|a| (a.omega, a.mass.matrix().clone()))
        .collect();
    validate_measure_raw(measure.dim(), &raw, tol)
}

pub fn validate_open(open: &OpenSystem, tol: &ToleranceConfig) -> ValidationReport {
    let mut report = validate_measure(open.kernel(), tol);
    let defect = hermiticity_defect(open.omega1().matrix());
    if defect > tol.herm * (1.0 + norm_max(open.omega1().matrix())) {
        report.push("hermitian", "Ω₁ is not Hermitian".into(), defect, None);
    }
    report
}

/// Raw open-system data: the kernel measure checks plus a square, Hermitian
/// `Ω₁` matching the kernel dimension.
pub fn validate_open_raw(omega1: &CMatrix, dim: usize, atoms: &[(f64, CMatrix)], tol: &ToleranceConfig) -> ValidationReport {
    let mut report = validate_measure_raw(dim, atoms, tol);
    if omega1.nrows() != dim || omega1.ncols() != dim {
        let detail = format!("Ω₁ is {}x{}, kernel dimension is {dim}", omega1.nrows(), omega1.ncols());
        report.push("shape", detail, f64::NAN, None);
        return report;
    }
    let defect = hermiticity_defect(omega1);
    if defect > tol.herm * (1.0 + norm_max(omega1)) {
        report.push("hermitian", "Ω₁ is not Hermitian".into(), defect, None);
    }
    report
}

/// Unit-mass rescaling of a positive-definite mass and a Hermitian operator:
/// returns `m^{−1/2} A m^{−1/2}`.
pub fn rescale_to_unit_mass(
    mass: &HermitianOperator,
    a: &HermitianOperator,
    tol: &ToleranceConfig,
) -> Result<HermitianOperator> {
    let root = principal_sqrt_psd(mass, tol)?;
    let decomposition = eigh(&root)?;
    if decomposition.values.first().is_some_and(|&r| r <= 0.0) {
        return Err(Error::Validation("mass operator must be positive definite".into()));
    }
    let inv = decomposition.apply(|r| c64(1.0 / r, 0.0));
    Ok(HermitianOperator::from_hermitian_part(&inv * a.matrix() * &inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn one_channel() -> ConservativeSystem {
        ConservativeSystem::from_real_blocks(
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 3.0]),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn assemble_round_trip() {
        let s = one_channel();
        assert_eq!(s.dim(), 4);
        assert_eq!(s.omega1().matrix()[(1, 1)], c64(3.0, 0.0));
        assert_eq!(s.omega2().matrix()[(1, 1)], c64(2.0, 0.0));
        assert_eq!(s.gamma()[(0, 1)], c64(1.0, 0.0));
        assert_eq!(s.omega().matrix()[(3, 0)], c64(1.0, 0.0));
        let again = ConservativeSystem::assemble(s.omega1().matrix(), s.omega2().matrix(), &s.gamma(), &tol()).unwrap();
        assert_eq!(again, s);
        assert!(validate_system(&s, &tol()).is_valid());
    }

    #[test]
    fn scalar_decoupled() {
        let z = CMatrix::zeros(1, 1);
        let s = ConservativeSystem::assemble(&z, &z, &z, &tol()).unwrap();
        assert_eq!((s.n1(), s.n2()), (1, 1));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let z2 = CMatrix::zeros(2, 2);
        assert!(ConservativeSystem::assemble(&z2, &z2, &CMatrix::zeros(2, 3), &tol()).is_err());
    }

    #[test]
    fn broken_off_diagonal_flagged() {
        let mut m = one_channel().omega().matrix().clone();
        m[(3, 0)] = c64(5.0, 0.0);
        let report = validate_system_raw(2, 2, &m, &tol());
        assert!(!report.is_valid());
        assert_eq!(report.violations[0].kind, "hermitian");
        assert!((report.violations[0].magnitude - 4.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_atom_reported() {
        let mass = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0, 0.0), c64(-0.5, 0.0)]));
        let report = validate_measure_raw(2, &[(1.0, mass.clone())], &tol());
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].atom, Some(0));
        assert!((report.violations[0].magnitude + 0.5).abs() < 1e-12);
        assert!(matches!(
            PointMeasure::new(2, vec![(1.0, mass)], &tol()),
            Err(Error::Dissipation { atom: 0, .. })
        ));
    }

    #[test]
    fn close_atoms_merge() {
        let one = CMatrix::identity(1, 1);
        let m = PointMeasure::new(1, vec![(2.0, one.clone()), (1.0, one.clone()), (2.0 + 1e-12, one)], &tol()).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.atoms()[1].mass.matrix()[(0, 0)], c64(2.0, 0.0));
        assert!((m.kernel_at(0.0)[(0, 0)] - c64(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unbounded_coupling_rejected() {
        let id = HermitianOperator::from_diagonal(&[1.0]);
        let err = OpenSystem::from_mass_form(&id, &id, &PointMeasure::empty(1), Some(&CMatrix::identity(1, 1)), &tol());
        assert!(matches!(err, Err(Error::UnboundedCoupling { .. })));
    }

    #[test]
    fn mass_rescaling() {
        let m = HermitianOperator::from_diagonal(&[4.0]);
        let a = HermitianOperator::from_diagonal(&[8.0]);
        let mu = PointMeasure::new(1, vec![(1.0, CMatrix::from_element(1, 1, c64(4.0, 0.0)))], &tol()).unwrap();
        let open = OpenSystem::from_mass_form(&m, &a, &mu, None, &tol()).unwrap();
        assert!((open.omega1().matrix()[(0, 0)] - c64(2.0, 0.0)).norm() < 1e-14);
        assert!((open.kernel().atoms()[0].mass.matrix()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
        let r = rescale_to_unit_mass(&m, &a, &tol()).unwrap();
        assert!((r.matrix()[(0, 0)] - c64(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn partition_checks_orthogonality() {
        let a = Subspace::coordinate(2, &[0]);
        let b = Subspace::coordinate(2, &[1]);
        let p = BlockPartition::new(Side::Observable, 2, vec![a.clone(), b], &tol()).unwrap();
        assert!(p.is_complete());
        assert!(BlockPartition::new(Side::Observable, 2, vec![a.clone(), a], &tol()).is_err());
    }
}
