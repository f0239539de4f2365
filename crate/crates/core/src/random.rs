//! Seeded random instances: operators, measures and systems with planted
//! structure, for tests and benchmarks.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{block_diag, ConservativeSystem, PointMeasure};
use crate::numerics::{c64, eigh, CMatrix, HermitianOperator, ToleranceConfig};

pub fn gaussian_like(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    gaussian_like(rng, n, n).qr().q()
}

/// Hermitian with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn hermitian(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> CMatrix {
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    with_spectrum(rng, &values)
}

/// `U·diag(values)·U†` for a random unitary `U`.
pub fn with_spectrum(rng: &mut ChaCha8Rng, values: &[f64]) -> CMatrix {
    let u = unitary(rng, values.len());
    let d = HermitianOperator::from_diagonal(values);
    let m = &u * d.matrix() * u.adjoint();
    (&m + m.adjoint()) * c64(0.5, 0.0)
}

/// PSD matrix of the given rank with eigenvalues in `[0.2, 1]`.
pub fn psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMatrix {
    let mut values = vec![0.0; n];
    for v in values.iter_mut().take(rank.min(n)) {
        *v = rng.gen_range(0.2..=1.0);
    }
    with_spectrum(rng, &values)
}

/// Distinct frequencies in `[lo, hi]` separated by at least `gap`.
pub fn separated_frequencies(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    let slack = (hi - lo) - gap * count.saturating_sub(1) as f64;
    assert!(slack >= 0.0, "range too small for {count} frequencies with gap {gap}");
    let mut offsets: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..=slack)).collect();
    offsets.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    offsets
        .iter()
        .enumerate()
        .map(|(k, o)| lo + o + gap * k as f64)
        .collect()
}

/// Valid measure with `atoms` PSD masses of random rank.
pub fn point_measure(rng: &mut ChaCha8Rng, dim: usize, atoms: usize, tol: &ToleranceConfig) -> PointMeasure {
    let freqs = separated_frequencies(rng, atoms, -5.0, 5.0, 0.05);
    let list = freqs
        .into_iter()
        .map(|w| {
            let rank = rng.gen_range(1..=dim);
            (w, psd(rng, dim, rank))
        })
        .collect();
    PointMeasure::new(dim, list, tol).expect("PSD atoms")
}

/// Measure in which atom `witness` has minimum eigenvalue
/// `−depth·‖N_witness‖₂` with `depth ∈ [0.1, 0.6]`.
pub fn indefinite_measure(
    rng: &mut ChaCha8Rng,
    dim: usize,
    atoms: usize,
    tol: &ToleranceConfig,
) -> (PointMeasure, usize) {
    let freqs = separated_frequencies(rng, atoms, -5.0, 5.0, 0.5);
    let witness = rng.gen_range(0..atoms);
    let list = freqs
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            if k == witness {
                let mut values: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..=1.0)).collect();
                let top = values.iter().copied().fold(0.0, f64::max);
                values[0] = -rng.gen_range(0.1..=0.6) * top;
                (w, with_spectrum(rng, &values))
            } else {
                let rank = rng.gen_range(1..=dim);
                (w, psd(rng, dim, rank))
            }
        })
        .collect();
    (PointMeasure::from_atoms(dim, list, tol).expect("Hermitian atoms"), witness)
}

/// Generic system with random spectra in `[−1, 1]` and a full-rank coupling:
/// reconstructible with probability one.
pub fn reconstructible_system(rng: &mut ChaCha8Rng, n1: usize, n2: usize, tol: &ToleranceConfig) -> ConservativeSystem {
    let o1 = hermitian(rng, n1, -1.0, 1.0);
    let o2 = hermitian(rng, n2, -1.0, 1.0);
    let g = gaussian_like(rng, n1, n2) * c64(0.5, 0.0);
    ConservativeSystem::assemble(&o1, &o2, &g, tol).expect("valid blocks")
}

/// System with repeated eigenvalues in `Ω₁` and `Ω₂` and a coupling of
/// random rank, including rank 0. Dimensions are at most `max_dim` in total.
pub fn degenerate_system(rng: &mut ChaCha8Rng, max_dim: usize, tol: &ToleranceConfig) -> ConservativeSystem {
    let n1 = rng.gen_range(1..=max_dim / 2);
    let n2 = rng.gen_range(1..=max_dim - n1);
    let levels1 = rng.gen_range(1..=n1);
    let levels2 = rng.gen_range(1..=n2);
    let pool1: Vec<f64> = (0..levels1).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let pool2: Vec<f64> = (0..levels2).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let spec1: Vec<f64> = (0..n1).map(|_| pool1[rng.gen_range(0..levels1)]).collect();
    let spec2: Vec<f64> = (0..n2).map(|_| pool2[rng.gen_range(0..levels2)]).collect();
    let o1 = with_spectrum(rng, &spec1);
    let o2 = with_spectrum(rng, &spec2);
    let rank = rng.gen_range(0..=n1.min(n2));
    let g = gaussian_like(rng, n1, rank) * gaussian_like(rng, rank, n2) * c64(0.5, 0.0);
    ConservativeSystem::assemble(&o1, &o2, &g, tol).expect("valid blocks")
}

/// System with Hermitian `Ω` of operator norm at most `bound`.
pub fn bounded_system(rng: &mut ChaCha8Rng, n1: usize, n2: usize, bound: f64, tol: &ToleranceConfig) -> ConservativeSystem {
    let full = hermitian(rng, n1 + n2, -bound, bound);
    ConservativeSystem::from_omega(n1, full, tol).expect("Hermitian")
}

/// A block-diagonal system of `blocks` generic reconstructible pieces,
/// conjugated by a random block unitary `W₁ ⊕ W₂`. Each piece is one
/// component of the finest s-invariant splitting.
pub fn planted_components(rng: &mut ChaCha8Rng, blocks: usize, tol: &ToleranceConfig) -> ConservativeSystem {
    let mut o1 = CMatrix::zeros(0, 0);
    let mut o2 = CMatrix::zeros(0, 0);
    let mut g = CMatrix::zeros(0, 0);
    for _ in 0..blocks {
        let n1 = rng.gen_range(1..=3);
        let n2 = rng.gen_range(1..=3);
        let piece = reconstructible_system(rng, n1, n2, tol);
        o1 = block_diag(&o1, piece.omega1().matrix());
        o2 = block_diag(&o2, piece.omega2().matrix());
        g = block_diag(&g, &piece.gamma());
    }
    let planted = ConservativeSystem::assemble(&o1, &o2, &g, tol).expect("valid blocks");
    let w1 = unitary(rng, planted.n1());
    let w2 = unitary(rng, planted.n2());
    planted.conjugate(&w1, &w2, tol).expect("unitary conjugation")
}

pub fn real_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Largest eigenvalue magnitude of `Ω`.
pub fn spectral_radius(system: &ConservativeSystem) -> f64 {
    eigh(system.omega())
        .map(|e| e.values.iter().fold(0.0_f64, |a, x| a.max(x.abs())))
        .unwrap_or(f64::NAN)
}
