//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N PASS/FAIL` line with its measurements and runtime budget.
//!
//! Run with `cargo test -p dsce --test acceptance -- --nocapture`.
//!
//! The tests serialize on a global lock so the timing-sensitive criterion
//! measures an idle machine and the memory-hungry sweeps never overlap.

use dsce::bem::{build_cebem_basis, BemCoefficients};
use dsce::channel::{draw_common_support, exact_bem_channel, generate_ds_channel, SystemConfig};
use dsce::linalg::lstsq;
use dsce::pilot::{
    assemble_measurement_matrix, bdso_optimize, equidistant_positions, random_sign_sequences,
    MeasurementSystem, PilotPattern,
};
use dsce::recovery::{
    bsomp, extract_pilot_observations, linear_smoothing, nmse, reconstruct_channel, solve_ls,
    somp, ObservationSet,
};
use dsce::rng::DetRng;
use dsce::sim::{apply_channel, default_threads, parallel_map, TransmitFrame};
use dsce::verify::{run_checks, FaultHooks};
use std::sync::Mutex;
use std::time::{Duration, Instant};

static GATE: Mutex<()> = Mutex::new(());

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Non-decreasing check with the stated allowance: at most one inversion,
/// no deeper than `slack` dB.
fn non_decreasing_with_allowance(seq: &[f64], slack: f64) -> bool {
    let mut inversions = 0;
    for w in seq.windows(2) {
        if w[1] < w[0] {
            inversions += 1;
            if w[0] - w[1] > slack {
                return false;
            }
        }
    }
    inversions <= 1
}

fn budget(name: &str, started: Instant, limit: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= limit,
        "{name} exceeded its runtime budget: {:.1} s > {:.0} s",
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
}

/// Criterion 1: at desk scale (N=512, G=24, D=3, L=50, N_B=8), 500 BDSO
/// iterations over 10 seeds must at least cut the equidistant coherence to
/// 60%, with strictly decreasing accepted-state coherence in every run.
#[test]
fn criterion_1_bdso_coherence_reduction() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let cfg = SystemConfig::desk_scale();
    let runs = parallel_map(10, default_threads(), |seed| {
        let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, seed as u64);
        bdso_optimize(&cfg, &values, 500, seed as u64).unwrap()
    });
    let initial = runs[0].initial_mu;
    for r in &runs {
        assert_eq!(r.initial_mu, initial, "equidistant start must be shared");
        for w in r.accepted_mu.windows(2) {
            assert!(w[1] < w[0], "accepted-state coherence must strictly decrease");
        }
        if let Some(&first) = r.accepted_mu.first() {
            assert!(first < initial);
        }
    }
    let finals: Vec<f64> = runs.iter().map(|r| *r.reported_mu.last().unwrap()).collect();
    let med = median(finals.clone());
    assert!(
        med <= 0.6 * initial,
        "median final coherence {med:.4} exceeds 0.6 x initial {initial:.4}"
    );
    budget("criterion 1", started, Duration::from_secs(300));
    println!(
        "criterion 1 PASS: equidistant mu {initial:.4}, median final mu {med:.4} \
         (ratio {:.3} <= 0.6), accepted traces strictly decreasing in 10/10 runs, {:.1} s",
        med / initial,
        started.elapsed().as_secs_f64()
    );
}

/// Criterion 2: 100 noiseless exact-BEM trials at desk scale (K=2 keeps the
/// K N_B = 16 block unknowns identifiable from G = 24 equations): BSOMP with
/// BDSO pilots recovers the exact support in at least 99 trials with
/// coefficient error < 1e-6 in every hit, and equidistant pilots do strictly
/// worse.
#[test]
fn criterion_2_skip_point_elimination() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let mut cfg = SystemConfig::desk_scale();
    cfg.sparsity = 2;
    let k = cfg.sparsity;
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, 1);
    let bdso = bdso_optimize(&cfg, &values, 500, 1).unwrap();
    let p_bdso =
        PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, bdso.positions, values.clone())
            .unwrap();
    let eq = equidistant_positions(cfg.n_subcarriers, cfg.n_groups, cfg.bem_order).unwrap();
    let p_eq = PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, eq, values).unwrap();
    let basis = build_cebem_basis(cfg.n_subcarriers, cfg.bem_order).unwrap();

    let run = |pattern: &PilotPattern| -> (usize, f64) {
        let meas = assemble_measurement_matrix(pattern, cfg.channel_length).unwrap();
        let outcomes = parallel_map(100, default_threads(), |trial| {
            let mut rng = DetRng::new(50_000 + trial as u64);
            let support = rng.sample_distinct_sorted(cfg.channel_length, k);
            let coeffs = BemCoefficients::random_on_support(
                cfg.n_antennas,
                cfg.channel_length,
                cfg.bem_order,
                &support,
                &mut rng,
            );
            let channel = exact_bem_channel(&coeffs, &basis).unwrap();
            let frame = TransmitFrame::random(pattern, trial as u64);
            let y = apply_channel(&frame, &channel, None, trial as u64).unwrap();
            let obs = extract_pilot_observations(&y, pattern).unwrap();
            let rec = bsomp(&obs, &meas, k).unwrap();
            if rec.support == support {
                Some(rec.coeffs.rel_error(&coeffs))
            } else {
                None
            }
        });
        let hits = outcomes.iter().filter(|o| o.is_some()).count();
        let worst = outcomes
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &e| acc.max(e));
        (hits, worst)
    };

    let (bdso_hits, bdso_worst) = run(&p_bdso);
    let (eq_hits, _) = run(&p_eq);
    assert!(bdso_hits >= 99, "BDSO exact-support rate {bdso_hits}/100 < 99");
    assert!(
        bdso_worst < 1e-6,
        "coefficient error {bdso_worst:.3e} in a successful trial"
    );
    assert!(
        eq_hits < bdso_hits,
        "equidistant rate {eq_hits} not strictly below BDSO rate {bdso_hits}"
    );
    budget("criterion 2", started, Duration::from_secs(300));
    println!(
        "criterion 2 PASS: BDSO exact support {bdso_hits}/100 (worst coeff err {bdso_worst:.2e}), \
         equidistant {eq_hits}/100, {:.1} s",
        started.elapsed().as_secs_f64()
    );
}

/// Exhaustive minimum-residual support over every C(L, 2) block pair.
fn brute_force_pair_support(meas: &MeasurementSystem, obs: &ObservationSet) -> (Vec<usize>, f64) {
    let l_total = meas.channel_length();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for a in 0..l_total {
        for b in (a + 1)..l_total {
            let cols: Vec<usize> = [a, b]
                .iter()
                .flat_map(|&l| meas.tap_block_columns(l))
                .collect();
            let m = meas.z().select_cols(&cols);
            let x = lstsq(&m, obs.y_blocks());
            let res = obs.y_blocks().sub(&m.mul(&x)).fro_norm();
            match &best {
                Some((_, r)) if *r <= res => {}
                _ => best = Some((vec![a, b], res)),
            }
        }
    }
    best.unwrap()
}

/// Criterion 3: on 50 tiny noiseless instances (G=6, L=8, K=2, N_B=2, D=3),
/// BSOMP must match the exhaustive block-LS support in at least 45 and may
/// only differ where the residuals tie within 1e-6.
///
/// At this size the sign draw decides the block cross-antenna correlations
/// (invisible to mu(z_s)), so the test pins a well-conditioned design.
#[test]
fn criterion_3_oracle_equivalence() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let mut cfg = SystemConfig::desk_scale();
    cfg.n_subcarriers = 64;
    cfg.n_groups = 6;
    cfg.bem_order = 3;
    cfg.channel_length = 8;
    cfg.sparsity = 2;
    cfg.n_antennas = 2;
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, 14);
    let res = bdso_optimize(&cfg, &values, 400, 14).unwrap();
    let pattern =
        PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, res.positions, values).unwrap();
    let meas = assemble_measurement_matrix(&pattern, cfg.channel_length).unwrap();

    let mut agree = 0;
    for i in 0..50u64 {
        let mut rng = DetRng::new(1000 + i);
        let support = rng.sample_distinct_sorted(cfg.channel_length, 2);
        let truth = BemCoefficients::random_on_support(
            cfg.n_antennas,
            cfg.channel_length,
            cfg.bem_order,
            &support,
            &mut rng,
        );
        let obs = ObservationSet::new(meas.z().mul(truth.data()));
        let rec = bsomp(&obs, &meas, 2).unwrap();
        let (oracle_support, oracle_res) = brute_force_pair_support(&meas, &obs);
        if rec.support == oracle_support {
            agree += 1;
        } else {
            assert!(
                (rec.residual_norm - oracle_res).abs() < 1e-6,
                "instance {i}: supports differ with residual gap {} vs {}",
                rec.residual_norm,
                oracle_res
            );
        }
    }
    assert!(agree >= 45, "only {agree}/50 oracle agreements");
    budget("criterion 3", started, Duration::from_secs(60));
    println!(
        "criterion 3 PASS: {agree}/50 exact oracle agreements, every disagreement within 1e-6 \
         residual, {:.1} s",
        started.elapsed().as_secs_f64()
    );
}

struct MethodMedians {
    ls: f64,
    somp: f64,
    bsomp: f64,
    bsomp_li: f64,
}

fn run_noisy_trials(
    cfg: &SystemConfig,
    pattern: &PilotPattern,
    trials: usize,
    seed_base: u64,
) -> MethodMedians {
    let meas = assemble_measurement_matrix(pattern, cfg.channel_length).unwrap();
    let basis = build_cebem_basis(cfg.n_subcarriers, cfg.bem_order).unwrap();
    let rows = parallel_map(trials, default_threads(), |trial| {
        let seed = seed_base + trial as u64;
        let support = draw_common_support(cfg.channel_length, cfg.sparsity, seed).unwrap();
        let channel = generate_ds_channel(cfg, &support, seed).unwrap();
        let frame = TransmitFrame::random(pattern, seed);
        let y = apply_channel(&frame, &channel, Some(cfg.snr_db), seed).unwrap();
        let obs = extract_pilot_observations(&y, pattern).unwrap();
        let r_ls = solve_ls(&obs, &meas);
        let r_somp = somp(&obs, &meas, cfg.sparsity).unwrap();
        let r_bsomp = bsomp(&obs, &meas, cfg.sparsity).unwrap();
        let rec_ls = reconstruct_channel(&r_ls.coeffs, &basis).unwrap();
        let rec_somp = reconstruct_channel(&r_somp.coeffs, &basis).unwrap();
        let rec_bsomp = reconstruct_channel(&r_bsomp.coeffs, &basis).unwrap();
        let smooth = linear_smoothing(&rec_bsomp, &r_bsomp.support).unwrap();
        (
            nmse(&rec_ls, &channel.taps).unwrap(),
            nmse(&rec_somp, &channel.taps).unwrap(),
            nmse(&rec_bsomp, &channel.taps).unwrap(),
            nmse(&smooth, &channel.taps).unwrap(),
        )
    });
    MethodMedians {
        ls: median(rows.iter().map(|r| r.0).collect()),
        somp: median(rows.iter().map(|r| r.1).collect()),
        bsomp: median(rows.iter().map(|r| r.2).collect()),
        bsomp_li: median(rows.iter().map(|r| r.3).collect()),
    }
}

fn bdso_pattern_for(cfg: &SystemConfig, iterations: usize, seed: u64) -> PilotPattern {
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, seed);
    let res = bdso_optimize(cfg, &values, iterations, seed).unwrap();
    PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, res.positions, values).unwrap()
}

/// Criterion 4: desk-scale method ordering at SNR 30 dB, normalized Doppler
/// 0.1, 200 trials, K=2 (the identifiable sparsity at G=24): LS stays at or
/// above -3 dB, BSOMP beats SOMP on medians, and linear smoothing improves
/// BSOMP.
#[test]
fn criterion_4_method_ordering() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let mut cfg = SystemConfig::desk_scale().with_normalized_doppler(0.1);
    cfg.sparsity = 2;
    cfg.snr_db = 30.0;
    let pattern = bdso_pattern_for(&cfg, 500, 1);
    let m = run_noisy_trials(&cfg, &pattern, 200, 90_000);
    assert!(m.ls >= -3.0, "LS median {:.2} dB below -3 dB", m.ls);
    assert!(
        m.somp > m.bsomp,
        "SOMP median {:.2} dB not above BSOMP median {:.2} dB",
        m.somp,
        m.bsomp
    );
    assert!(
        m.bsomp_li < m.bsomp,
        "smoothing did not help: {:.2} dB vs {:.2} dB",
        m.bsomp_li,
        m.bsomp
    );
    budget("criterion 4", started, Duration::from_secs(600));
    println!(
        "criterion 4 PASS: medians LS {:.2} dB (>= -3), SOMP {:.2} dB > BSOMP {:.2} dB, \
         BSOMP+li {:.2} dB < BSOMP, {:.1} s",
        m.ls,
        m.somp,
        m.bsomp,
        m.bsomp_li,
        started.elapsed().as_secs_f64()
    );
}

/// Criterion 5: BSOMP NMSE is non-decreasing in normalized Doppler
/// {0.02, 0.05, 0.1, 0.2} at SNR 30 dB, 200 trials per point (one 0.5 dB
/// inversion allowed).
#[test]
fn criterion_5_doppler_degradation() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let mut base = SystemConfig::desk_scale();
    base.sparsity = 2;
    base.snr_db = 30.0;
    let pattern = bdso_pattern_for(&base, 500, 1);
    let mut medians = Vec::new();
    for nu in [0.02, 0.05, 0.1, 0.2] {
        let cfg = base.clone().with_normalized_doppler(nu);
        let m = run_noisy_trials(&cfg, &pattern, 200, 70_000);
        medians.push(m.bsomp);
    }
    assert!(
        non_decreasing_with_allowance(&medians, 0.5),
        "Doppler medians not monotone: {medians:?}"
    );
    budget("criterion 5", started, Duration::from_secs(600));
    println!(
        "criterion 5 PASS: BSOMP medians over doppler {{0.02, 0.05, 0.1, 0.2}} = \
         [{:.2}, {:.2}, {:.2}, {:.2}] dB non-decreasing, {:.1} s",
        medians[0],
        medians[1],
        medians[2],
        medians[3],
        started.elapsed().as_secs_f64()
    );
}

/// Criterion 6: with the pilot overhead fixed, BSOMP NMSE is non-decreasing
/// in N_B in {8, 12, 16} (K=1 keeps all three points identifiable so the
/// trend isolates the antenna load) and in K in {2, 4, 6} at N_B=8 (one
/// 0.5 dB inversion allowed in each sweep).
#[test]
fn criterion_6_antenna_and_sparsity_scaling() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();

    let mut nb_medians = Vec::new();
    for nb in [8usize, 12, 16] {
        let mut cfg = SystemConfig::desk_scale();
        cfg.n_antennas = nb;
        cfg.sparsity = 1;
        cfg.snr_db = 30.0;
        let pattern = bdso_pattern_for(&cfg, 300, 1);
        let m = run_noisy_trials(&cfg, &pattern, 200, 60_000);
        nb_medians.push(m.bsomp);
    }
    assert!(
        non_decreasing_with_allowance(&nb_medians, 0.5),
        "antenna-scaling medians not monotone: {nb_medians:?}"
    );

    let mut k_medians = Vec::new();
    for k in [2usize, 4, 6] {
        let mut cfg = SystemConfig::desk_scale();
        cfg.sparsity = k;
        cfg.snr_db = 30.0;
        let pattern = bdso_pattern_for(&cfg, 300, 1);
        let m = run_noisy_trials(&cfg, &pattern, 200, 61_000);
        k_medians.push(m.bsomp);
    }
    assert!(
        non_decreasing_with_allowance(&k_medians, 0.5),
        "sparsity-scaling medians not monotone: {k_medians:?}"
    );

    budget("criterion 6", started, Duration::from_secs(600));
    println!(
        "criterion 6 PASS: N_B {{8,12,16}} medians [{:.2}, {:.2}, {:.2}] dB and \
         K {{2,4,6}} medians [{:.2}, {:.2}, {:.2}] dB both non-decreasing, {:.1} s",
        nb_medians[0],
        nb_medians[1],
        nb_medians[2],
        k_medians[0],
        k_medians[1],
        k_medians[2],
        started.elapsed().as_secs_f64()
    );
}

/// Criterion 7: the exact-arithmetic identities, via the built-in
/// verification suite (circulant diagonalization, frequency-path
/// equivalence, derived-index consistency, block-flatten isometry, ICI-free
/// purity, the 23.4375% overhead ratio, forward-model fidelity and the tiny
/// oracle).
#[test]
fn criterion_7_exact_identities() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let results = run_checks(&FaultHooks::default());
    for r in &results {
        assert!(r.passed, "{} failed: {}", r.name, r.detail);
    }
    budget("criterion 7", started, Duration::from_secs(60));
    println!(
        "criterion 7 PASS: {} identity checks green ({}), {:.1} s",
        results.len(),
        results.iter().map(|r| r.name).collect::<Vec<_>>().join(", "),
        started.elapsed().as_secs_f64()
    );
}

/// Criterion 8: measured BDSO runtime grows at most linearly (log-log slope
/// <= 1.2) in the iteration count and in the antenna count over a 4x range.
#[test]
fn criterion_8_complexity_scaling() {
    let _gate = GATE.lock().unwrap();
    let started = Instant::now();
    let mut cfg = SystemConfig::desk_scale();
    cfg.n_subcarriers = 256;
    cfg.n_groups = 16;
    cfg.channel_length = 32;
    cfg.sparsity = 2;
    cfg.n_antennas = 4;

    let time_run = |cfg: &SystemConfig, iters: usize| -> f64 {
        let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, 5);
        // min of three repetitions: robust to scheduler noise
        (0..3)
            .map(|_| {
                let t = Instant::now();
                bdso_optimize(cfg, &values, iters, 5).unwrap();
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };

    let t_iter_lo = time_run(&cfg, 150);
    let t_iter_hi = time_run(&cfg, 600);
    let slope_iter = (t_iter_hi / t_iter_lo).ln() / 4f64.ln();

    let mut cfg_lo = cfg.clone();
    cfg_lo.n_antennas = 2;
    let mut cfg_hi = cfg.clone();
    cfg_hi.n_antennas = 8;
    let t_nb_lo = time_run(&cfg_lo, 300);
    let t_nb_hi = time_run(&cfg_hi, 300);
    let slope_nb = (t_nb_hi / t_nb_lo).ln() / 4f64.ln();

    assert!(
        slope_iter <= 1.2,
        "iteration-count scaling slope {slope_iter:.2} exceeds 1.2 \
         ({t_iter_lo:.3} s at 150, {t_iter_hi:.3} s at 600)"
    );
    assert!(
        slope_nb <= 1.2,
        "antenna-count scaling slope {slope_nb:.2} exceeds 1.2 \
         ({t_nb_lo:.3} s at N_B=2, {t_nb_hi:.3} s at N_B=8)"
    );
    budget("criterion 8", started, Duration::from_secs(300));
    println!(
        "criterion 8 PASS: log-log runtime slopes {slope_iter:.2} (iterations) and \
         {slope_nb:.2} (antennas), both <= 1.2, {:.1} s",
        started.elapsed().as_secs_f64()
    );
}
