use nalgebra::DMatrix;
use openext::extension::{
    check_dissipation, check_dissipation_samples, fit_point_measure, kernel_eval, kernel_of_measure,
    measure_of, minimal_extension, minimal_extension_with, KernelSamples,
};
use openext::model::{validate_measure_raw, OpenSystem};
use openext::numerics::{c64, eigh, norm_max, svd, HermitianOperator};
use openext::random;
use openext::{CMatrix, ConservativeSystem, Error, PointMeasure, ToleranceConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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
fn one_channel_kernel_matches_closed_form() {
    let times: Vec<f64> = (0..40).map(|k| 0.25 * k as f64).collect();
    let samples = kernel_eval(&one_channel(), &times).unwrap();
    for (t, a) in times.iter().zip(samples.values()) {
        let expected = c64(0.0, -t).exp() + c64(0.0, -2.0 * t).exp();
        assert!((a[(0, 0)] - expected).norm() < 1e-13);
        assert!(a[(0, 1)].norm() < 1e-14 && a[(1, 0)].norm() < 1e-14 && a[(1, 1)].norm() < 1e-14);
    }
    // a(0) is exactly ΓΓ†.
    assert_eq!(samples.values()[0][(0, 0)], c64(2.0, 0.0));
}

#[test]
fn measure_of_ex_a_has_two_unit_atoms() {
    let m = measure_of(&one_channel(), &tol()).unwrap();
    assert_eq!(m.frequencies(), vec![1.0, 2.0]);
    for atom in m.atoms() {
        assert!((atom.mass.matrix()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
    }
}

fn rank_of(m: &CMatrix) -> usize {
    svd(m).unwrap().rank(1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extension_round_trip(seed in any::<u64>(), dim in 1usize..5, atoms in 1usize..6) {
        let t = tol();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mu = random::point_measure(&mut r, dim, atoms, &t);
        let system = minimal_extension(&mu, &t).unwrap();
        // Hidden dimension is the total rank of the masses.
        let total_rank: usize = mu.atoms().iter().map(|a| rank_of(a.mass.matrix())).sum();
        prop_assert_eq!(system.n2(), total_rank);
        // Ω₂ has the atom frequencies with multiplicity rank N_k.
        let values = eigh(&system.omega2()).unwrap().values;
        for a in mu.atoms() {
            let count = values.iter().filter(|&&v| (v - a.omega).abs() < 1e-9).count();
            prop_assert_eq!(count, rank_of(a.mass.matrix()));
        }
        let back = measure_of(&system, &t).unwrap();
        prop_assert_eq!(back.atoms().len(), mu.atoms().len());
        for (x, y) in back.atoms().iter().zip(mu.atoms()) {
            prop_assert!((x.omega - y.omega).abs() < 1e-9);
            prop_assert!(norm_max(&(x.mass.matrix() - y.mass.matrix())) < 1e-10);
        }
    }

    #[test]
    fn kernel_at_zero_is_total_mass(seed in any::<u64>(), dim in 1usize..5, atoms in 1usize..6) {
        let t = tol();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mu = random::point_measure(&mut r, dim, atoms, &t);
        let k = kernel_of_measure(&mu, &[0.0, 1.0]).unwrap();
        prop_assert!(norm_max(&(&k.values()[0] - mu.total_mass())) < 1e-13);
        // a(0) is PSD and |a(t)| is dominated by a(0) entrywise on the diagonal.
        let a0 = HermitianOperator::from_hermitian_part(k.values()[0].clone());
        prop_assert!(eigh(&a0).unwrap().values[0] > -1e-12);
        for i in 0..dim {
            prop_assert!(k.values()[1][(i, i)].norm() <= k.values()[0][(i, i)].re + 1e-12);
        }
    }
}

#[test]
fn extension_with_observable_operator_keeps_it() {
    let t = tol();
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mu = random::point_measure(&mut r, 3, 4, &t);
    let omega1 = HermitianOperator::from_hermitian_part(random::hermitian(&mut r, 3, -1.0, 1.0));
    let s = minimal_extension_with(&omega1, &mu, &t).unwrap();
    assert!((s.omega1().matrix() - omega1.matrix()).norm() < 1e-14);
    let times: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
    let dev = kernel_eval(&s, &times)
        .unwrap()
        .max_deviation(&kernel_of_measure(&mu, &times).unwrap())
        .unwrap();
    assert!(dev < 1e-12);
    let open = OpenSystem::new(omega1, mu).unwrap();
    assert_eq!(open.dim(), 3);
}

#[test]
fn indefinite_atom_is_named() {
    let t = tol();
    let good = CMatrix::identity(2, 2);
    let bad = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0, 0.0), c64(-0.5, 0.0)]));
    let report = validate_measure_raw(2, &[(0.0, good.clone()), (1.0, bad.clone())], &t);
    assert!(!report.is_valid());
    assert!(report.violations.iter().any(|v| v.atom == Some(1)));
    match PointMeasure::new(2, vec![(0.0, good), (1.0, bad)], &t) {
        Err(Error::Dissipation { atom, min_eigenvalue }) => {
            assert_eq!(atom, 1);
            assert!((min_eigenvalue + 0.5).abs() < 1e-12);
        }
        other => panic!("expected a dissipation error, got {other:?}"),
    }
}

#[test]
fn dissipation_from_samples() {
    let t = tol();
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let times: Vec<f64> = (0..64).map(|k| 0.1 * k as f64).collect();
    let mu = random::point_measure(&mut r, 2, 3, &t);
    let good = kernel_of_measure(&mu, &times).unwrap();
    assert!(check_dissipation_samples(&good, 16, 1, &t).unwrap().verdict);
    let (bad_mu, _) = random::indefinite_measure(&mut r, 2, 3, &t);
    let bad = kernel_of_measure(&bad_mu, &times).unwrap();
    assert!(!check_dissipation_samples(&bad, 16, 1, &t).unwrap().verdict);
}

#[test]
fn dissipation_report_is_deterministic() {
    let t = tol();
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let (mu, witness) = random::indefinite_measure(&mut r, 3, 4, &t);
    let a = check_dissipation(&mu, 32, 99, &t).unwrap();
    let b = check_dissipation(&mu, 32, 99, &t).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.witness_atom, Some(witness));
    assert!(!a.verdict);
}

#[test]
fn fit_recovers_planted_atoms() {
    let t = tol();
    let mut r = ChaCha8Rng::seed_from_u64(31);
    let times: Vec<f64> = (0..128).map(|k| 0.1 * k as f64).collect();
    for _ in 0..10 {
        let dim = r.gen_range(1..=3);
        let count = r.gen_range(1..=5);
        let freqs = random::separated_frequencies(&mut r, count, -4.0, 4.0, 0.5);
        let list = freqs
            .into_iter()
            .map(|w| {
                let rank = r.gen_range(1..=dim);
                (w, random::psd(&mut r, dim, rank))
            })
            .collect();
        let mu = PointMeasure::new(dim, list, &t).unwrap();
        let fitted = fit_point_measure(&kernel_of_measure(&mu, &times).unwrap(), 5, &t).unwrap();
        assert_eq!(fitted.frequencies().len(), count);
        for (a, b) in fitted.atoms().iter().zip(mu.atoms()) {
            assert!((a.omega - b.omega).abs() < 1e-8);
            assert!(norm_max(&(a.mass.matrix() - b.mass.matrix())) < 1e-8);
        }
    }
}

#[test]
fn fit_rejects_frequencies_near_nyquist() {
    let t = tol();
    let times: Vec<f64> = (0..64).map(|k| 0.1 * k as f64).collect();
    // 0.99·π/Δt is above the 0.95 guard band.
    let mu = PointMeasure::new(1, vec![(0.99 * std::f64::consts::PI / 0.1, CMatrix::identity(1, 1))], &t).unwrap();
    let samples = kernel_of_measure(&mu, &times).unwrap();
    assert!(matches!(fit_point_measure(&samples, 3, &t), Err(Error::Precondition(_))));
}

#[test]
fn kernel_samples_reject_mismatched_grids() {
    let a = KernelSamples::new(vec![0.0, 1.0], vec![CMatrix::identity(1, 1); 2]).unwrap();
    let b = KernelSamples::new(vec![0.0, 2.0], vec![CMatrix::identity(1, 1); 2]).unwrap();
    assert!(a.max_deviation(&b).is_err());
    assert!(KernelSamples::new(vec![0.0], vec![]).is_err());
}
