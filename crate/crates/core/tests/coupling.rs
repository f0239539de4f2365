use nalgebra::DMatrix;
use openext::coupling::{
    canonical_decomposition, channels, coupling_matrix, decoupling_report, decoupling_times, is_s_invariant,
};
use openext::decomposition::rank_gamma;
use openext::model::{BlockPartition, Side};
use openext::numerics::{eigh, norm_max, Subspace};
use openext::random;
use openext::{ConservativeSystem, ToleranceConfig};
use proptest::prelude::*;
use rand::SeedableRng;
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
fn one_channel_has_one_channel_and_a_frozen_remainder() {
    let t = tol();
    let s = one_channel();
    let set = channels(&s, &t).unwrap();
    assert_eq!(set.rank, 1);
    assert!((set.gammas[0] - 2.0).abs() < 1e-14);
    let d = canonical_decomposition(&s, &t).unwrap();
    assert_eq!(d.components.len(), 2);
    assert_eq!(d.coupled_count(), 1);
    let frozen = d.components.iter().find(|c| c.decoupled).unwrap();
    assert_eq!((frozen.h1.dim(), frozen.h2.dim()), (1, 0));
    assert!(d.components.iter().all(|c| c.s_invariance.verdict));
}

#[test]
fn coupling_matrix_on_coordinate_blocks() {
    let t = tol();
    let s = one_channel();
    let p1 = BlockPartition::new(
        Side::Observable,
        2,
        vec![Subspace::coordinate(2, &[0]), Subspace::coordinate(2, &[1])],
        &t,
    )
    .unwrap();
    let p2 = BlockPartition::new(
        Side::Hidden,
        2,
        vec![Subspace::coordinate(2, &[0]), Subspace::coordinate(2, &[1])],
        &t,
    )
    .unwrap();
    let m = coupling_matrix(&s, &p1, &p2, &t).unwrap();
    assert_eq!(m.entries, vec![vec![1, 1], vec![0, 0]]);
    assert_eq!(m.zero_rows, vec![1]);
    assert!(m.zero_cols.is_empty());
    assert!(coupling_matrix(&s, &p2, &p1, &t).is_err());
}

#[test]
fn overlapping_partition_is_rejected() {
    let t = tol();
    let parts = vec![Subspace::coordinate(2, &[0]), Subspace::full(2)];
    assert!(BlockPartition::new(Side::Observable, 2, parts, &t).is_err());
}

#[test]
fn decoupling_times_follow_the_smallest_gap() {
    let times = decoupling_times(&one_channel(), &tol()).unwrap();
    assert_eq!(times.len(), 25);
    // Ω₂ = diag(1, 2): gap 1, horizon 2π.
    assert!((times[24] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn frozen_direction_decouples_mutually() {
    let t = tol();
    let s = one_channel();
    let r = decoupling_report(&s, &Subspace::coordinate(2, &[1]), &t).unwrap();
    assert!(r.decoupled && r.mutual);
    assert_eq!(r.splitting_dims, Some((1, 0)));
    assert_eq!(r.splitting_s_invariant, Some(true));
    let coupled = decoupling_report(&s, &Subspace::coordinate(2, &[0]), &t).unwrap();
    assert!(coupled.decoupled && coupled.mutual);
    assert_eq!(coupled.splitting_dims, Some((1, 2)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn channels_reconstruct_gamma(seed in any::<u64>()) {
        let t = tol();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = random::degenerate_system(&mut r, 10, &t);
        let set = channels(&s, &t).unwrap();
        let g = s.gamma();
        prop_assert!(norm_max(&(set.reconstruct(s.n1(), s.n2()) - &g)) < 1e-10 * g.norm().max(1.0));
        prop_assert_eq!(set.rank, rank_gamma(&s, &t).unwrap());
        prop_assert!(set.gammas.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn canonical_components_are_s_invariant_and_orthogonal(seed in any::<u64>()) {
        let t = tol();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = random::degenerate_system(&mut r, 10, &t);
        let d = canonical_decomposition(&s, &t).unwrap();
        let total: usize = d.components.iter().map(|c| c.dim()).sum();
        prop_assert_eq!(total, s.dim());
        prop_assert!(d.inter_block_residual(&s) <= 1e-9 * s.omega().norm().max(1.0));
        for (i, a) in d.components.iter().enumerate() {
            let sub = a.h1.sum(&a.h2, &t).unwrap();
            prop_assert!(is_s_invariant(&s, &sub, &t).unwrap().verdict);
            for b in &d.components[i + 1..] {
                prop_assert!(a.h1.overlap(&b.h1) < 1e-9 && a.h2.overlap(&b.h2) < 1e-9);
            }
        }
        // Each channel lands in exactly one component.
        let mut seen = vec![0; d.channel_set.rank];
        for c in &d.components {
            for &q in &c.channels {
                seen[q] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn planted_blocks_are_found(seed in any::<u64>(), blocks in 1usize..4) {
        let t = tol();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = random::planted_components(&mut r, blocks, &t);
        let d = canonical_decomposition(&s, &t).unwrap();
        prop_assert_eq!(d.components.len(), blocks);
        // Each block's Ω₁ part is invariant under Ω₁.
        for c in &d.components {
            let local = c.h1.restrict_rows(0, s.n1());
            prop_assert!(s.omega1().invariance_residual(&local) < 1e-9 * s.omega().norm().max(1.0));
        }
        // Spectra of the blocks add up to the full spectrum.
        let mut parts: Vec<f64> = d
            .components
            .iter()
            .flat_map(|c| eigh(&s.omega().compress(&c.frame())).unwrap().values)
            .collect();
        parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let full = eigh(s.omega()).unwrap().values;
        for (a, b) in parts.iter().zip(&full) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
