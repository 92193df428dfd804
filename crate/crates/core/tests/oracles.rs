mod common;

use eprlab::channel::{collective_channel, scan_random_states, simulate, ChannelConfig, ScanOptions};
use eprlab::graph::OutcomePermutation;
use eprlab::invariance::{
    basis_defect, falsify, invariance_defect, random_basis, shares_exactly_one_vector, single_shared_vector_basis,
    structural_check, FalsifyOptions, FalsifyOutcome, ProbeOptions,
};
use eprlab::io::to_json;
use eprlab::linalg::{c, CMatrix};
use eprlab::parallel::Workers;
use eprlab::qudit::{haar_unitary, random_state, DensityMatrix, OrthonormalBasis, PureState, StateKind};
use eprlab::rng::stream;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Leakage of `Σ_i |ii⟩/√3` in Haar basis 0 of seed 42, from the brute-force oracle.
const GOLDEN_QUTRIT_LEAKAGE: f64 = 0.411968343601533;
/// Minimum scan defect for d = 3, 1000 states, 100 probes each, seed 0.
const GOLDEN_QUTRIT_SCAN_FLOOR: f64 = 0.5321689049738315;

fn to_rows(m: &CMatrix) -> common::Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn max_entangled_amplitudes(d: usize) -> Vec<Complex64> {
    let mut psi = vec![c(0.0, 0.0); d * d];
    for i in 0..d {
        psi[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
    }
    psi
}

#[test]
fn qutrit_basis_defect_matches_brute_force_fixture() {
    let basis = random_basis(3, 42, 0);
    let lib = basis_defect(&PureState::max_entangled(3).density(), &basis).unwrap();
    let oracle = common::brute_force_leakage(&common::pure_joint(&max_entangled_amplitudes(3), &to_rows(basis.as_matrix())));
    assert!(lib > 0.0);
    assert!((lib - oracle).abs() < 1e-12, "{lib} vs {oracle}");
    assert!((lib - GOLDEN_QUTRIT_LEAKAGE).abs() < 1e-12, "{lib}");
}

#[test]
fn basis_defect_matches_brute_force_on_random_pure_states() {
    for k in 0..50 {
        let d = 2 + k % 3;
        let mut rng = stream(77, k as u64);
        let psi = random_state(d, StateKind::Pure, &mut rng).unwrap();
        // Recover the amplitudes from the rank-one density matrix.
        let m = psi.matrix();
        let col = (0..d * d).max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re)).unwrap();
        let scale = m[(col, col)].re.sqrt();
        let amps: Vec<Complex64> = (0..d * d).map(|r| m[(r, col)] / scale).collect();
        let basis = random_basis(d, 78, k as u64);
        let lib = basis_defect(&psi, &basis).unwrap();
        let oracle = common::brute_force_leakage(&common::pure_joint(&amps, &to_rows(basis.as_matrix())));
        assert!((lib - oracle).abs() < 1e-10, "k={k}: {lib} vs {oracle}");
    }
}

#[test]
fn qutrit_channel_mean_agrees_with_independent_sampler() {
    let (ref_mean, ref_se) = common::qutrit_channel_reference(1_000, 2024);
    let config = ChannelConfig::new(PureState::max_entangled(3).density(), 10_000, 0).unwrap();
    assert_eq!(config.declared_map(), &OutcomePermutation::identity(3));
    let stats = simulate(&config, Workers::default()).unwrap();
    let combined = (ref_se.powi(2) + stats.std_error.powi(2)).sqrt();
    assert!((stats.mean - ref_mean).abs() <= 3.0 * combined, "{} vs {ref_mean} ± {combined}", stats.mean);
    assert!(stats.mean < 0.9);
    // E|(UUᵀ)_ii|² = 2/(d+1) for Haar U.
    assert!((stats.mean - 0.5).abs() <= 5.0 * stats.std_error);
}

#[test]
fn per_trial_success_matches_closed_form() {
    let config = ChannelConfig::new(PureState::max_entangled(3).density(), 1, 0).unwrap();
    let mut rng = stream(13, 0);
    for _ in 0..50 {
        let u = haar_unitary(3, &mut rng).unwrap();
        let lib = eprlab::channel::trial_success(&config, &u).unwrap();
        let oracle = common::max_entangled_identity_success(&to_rows(&u));
        assert!((lib - oracle).abs() < 1e-12);
    }
}

#[test]
fn mixed_state_sampler_purity_matches_independent_sampler() {
    // Induced measure with N = M = 4: mean purity (N + M)/(NM + 1) = 8/17.
    let n = 4_000;
    let lib: Vec<f64> = (0..n)
        .map(|k| random_state(2, StateKind::Mixed, &mut stream(55, k)).unwrap().purity())
        .collect();
    let mut rng = StdRng::seed_from_u64(55);
    let oracle: Vec<f64> = (0..n).map(|_| common::induced_purity(4, &mut rng)).collect();
    let (lm, ls) = common::mean_se(&lib);
    let (om, os) = common::mean_se(&oracle);
    let combined = (ls * ls + os * os).sqrt();
    assert!((lm - om).abs() <= 4.0 * combined, "{lm} vs {om}");
    assert!((lm - 8.0 / 17.0).abs() <= 4.0 * ls, "{lm}");
}

#[test]
fn haar_sampler_matches_independent_sampler_moments() {
    // |U_00|² is Beta(1, d−1): mean 1/d, second moment 2/(d(d+1)).
    let d = 3;
    let n = 20_000;
    let lib: Vec<f64> = (0..n)
        .map(|k| haar_unitary(d, &mut stream(8, k)).unwrap()[(0, 0)].norm_sqr())
        .collect();
    let mut rng = StdRng::seed_from_u64(8);
    let oracle: Vec<f64> = (0..n).map(|_| common::haar(d, &mut rng)[0][0].norm_sqr()).collect();
    for xs in [&lib, &oracle] {
        let (m, se) = common::mean_se(xs);
        assert!((m - 1.0 / d as f64).abs() < 5.0 * se);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, se2) = common::mean_se(&sq);
        assert!((m2 - 2.0 / (d * (d + 1)) as f64).abs() < 5.0 * se2);
    }
}

#[test]
fn singlet_is_fixed_under_collective_noise() {
    let singlet = PureState::singlet().density();
    let mixed = DensityMatrix::maximally_mixed(2);
    for k in 0..10_000 {
        let u = haar_unitary(2, &mut stream(31, k)).unwrap();
        assert!(collective_channel(&singlet, &u).unwrap().max_abs_diff(&singlet) <= 1e-9);
        if k % 10 == 0 {
            assert!(collective_channel(&mixed, &u).unwrap().max_abs_diff(&mixed) <= 1e-10);
        }
    }
}

#[test]
fn non_singlet_qubit_states_degrade() {
    for k in 0..5 {
        let rho = random_state(2, StateKind::Pure, &mut stream(90, k)).unwrap();
        let config = ChannelConfig::new(rho, 1_000, k).unwrap();
        let stats = simulate(&config, Workers::default()).unwrap();
        assert!(stats.mean < 1.0 - 1e-3, "{}", stats.mean);
    }
    let config = ChannelConfig::new(PureState::singlet().density(), 1_000, 0).unwrap();
    assert!((simulate(&config, Workers::default()).unwrap().mean - 1.0).abs() < 1e-10);
}

#[test]
fn falsify_is_sound_and_complete_on_random_states() {
    for d in [2usize, 3, 4] {
        for k in 0..1_000u64 {
            let kind = if k % 2 == 0 { StateKind::Pure } else { StateKind::Mixed };
            let rho = random_state(d, kind, &mut stream(1_000 + d as u64, k)).unwrap();
            match falsify(&rho, &FalsifyOptions { search_bases: 1_000, seed: k }).unwrap() {
                FalsifyOutcome::Falsified(w) => {
                    assert!(w.is_incompatible());
                    assert!(w.bases_examined <= 50, "d={d} k={k}: {} bases", w.bases_examined);
                }
                other => panic!("d={d} k={k}: {other:?}"),
            }
        }
    }
}

#[test]
fn near_singlet_states_are_not_certified() {
    let singlet = PureState::singlet().density();
    let noise = DensityMatrix::maximally_mixed(2);
    for eps in [1e-3, 1e-6] {
        let m = singlet.matrix().scale(1.0 - eps) + noise.matrix().scale(eps);
        let rho = DensityMatrix::new(m, 2, true).unwrap();
        assert!(!matches!(falsify(&rho, &FalsifyOptions::default()).unwrap(), FalsifyOutcome::CertifiedInvariant(_)));
    }
}

#[test]
fn shared_vector_basis_shares_exactly_one_vector() {
    for k in 0..200u64 {
        let d = 3 + (k % 4) as usize;
        let b1 = random_basis(d, 400, k);
        let s = (k as usize * 7) % d;
        let b2 = single_shared_vector_basis(&b1, s, k).unwrap();
        assert!(shares_exactly_one_vector(&b1, &b2), "d={d} k={k}");
    }
}

#[test]
fn pairwise_probes_detect_non_constant_coefficients() {
    for k in 0..1_000u64 {
        let d = 3 + (k % 2) as usize;
        // α = G G†/Tr with G Ginibre: Hermitian PSD, generically non-constant.
        let g = haar_unitary(d, &mut stream(600, k)).unwrap();
        let w: Vec<f64> = (0..d).map(|i| 0.2 + i as f64 * 0.37 + (k % 7) as f64 * 0.05).collect();
        let mut alpha = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                alpha[(i, j)] = (0..d).map(|r| g[(i, r)] * g[(j, r)].conj() * w[r]).sum();
            }
        }
        let tr: f64 = (0..d).map(|i| alpha[(i, i)].re).sum();
        let mut rho = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                rho[(i * d + i, j * d + j)] = alpha[(i, j)] / tr;
            }
        }
        let rho = DensityMatrix::new(rho, d, true).unwrap();
        let report = structural_check(&rho, &OrthonormalBasis::computational(d)).unwrap();
        assert!(report.stages_passed >= 2, "k={k}: {report:?}");
        let spread = report.alpha_spread.unwrap();
        let violation = report.max_probe_violation.unwrap();
        assert!(violation >= spread / 4.0, "k={k}: {violation} < {spread}/4");
    }
}

#[test]
fn singlet_defect_is_reproducible() {
    let singlet = PureState::singlet().density();
    let opts = ProbeOptions { n_random_bases: 2_000, seed: 17, ..Default::default() };
    let a = invariance_defect(&singlet, &opts).unwrap();
    let b = invariance_defect(&singlet, &ProbeOptions { workers: Workers(3), ..opts }).unwrap();
    assert_eq!(to_json(&a), to_json(&b));
    assert!(a.value <= 1e-9 && !a.signature_mismatch);
}

#[test]
fn qutrit_pure_states_are_never_invariant() {
    for k in 0..20u64 {
        let rho = random_state(3, StateKind::Pure, &mut stream(700, k)).unwrap();
        let report = invariance_defect(&rho, &ProbeOptions { n_random_bases: 1_000, seed: k, ..Default::default() }).unwrap();
        assert!(report.value > 1e-6 || report.signature_mismatch);
    }
}

#[test]
fn qutrit_scan_floor_is_stable() {
    let opts = |seed| ScanOptions { probes_per_state: 100, refine: false, seed, workers: Workers::default() };
    let floor = scan_random_states(3, 1_000, &opts(0)).unwrap().min_defect;
    assert!((floor - GOLDEN_QUTRIT_SCAN_FLOOR).abs() < 1e-9, "{floor}");
    assert!(floor > 1e-3);
    for seed in [1, 2] {
        let other = scan_random_states(3, 1_000, &opts(seed)).unwrap().min_defect;
        assert!(other > floor / 2.0 && other < floor * 2.0, "seed {seed}: {other}");
    }
}

#[test]
fn refined_qubit_scan_lands_near_a_snappable_singlet() {
    let opts = ScanOptions { probes_per_state: 50, refine: true, seed: 0, workers: Workers::default() };
    let report = scan_random_states(2, 300, &opts).unwrap();
    assert!(report.min_defect < 0.25, "{}", report.min_defect);
    assert_eq!(report.snapped_certified, Some(true));
    // Oracle: the singlet itself, forced into the scan, has zero defect.
    let singlet = PureState::singlet().density();
    let forced = eprlab::channel::scan_states(vec![("forced", singlet)], &opts).unwrap();
    assert!(forced.min_defect <= 1e-9);
    assert_eq!(forced.near_singlet, vec![0]);
}
