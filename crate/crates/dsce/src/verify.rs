//! Built-in verification suite backing `dsce verify`.
//!
//! Fast self-contained checks of the exact-arithmetic identities the whole
//! pipeline rests on: the circulant diagonalization, the equivalence of the
//! two frequency-channel constructions, the derived-index bookkeeping, the
//! block-flatten isometry, the ICI-free pilot purity, the pilot overhead
//! ratio, and a tiny exhaustive-search cross-check of the block solver.
//!
//! `FaultHooks` exists for mutation testing: flipping the derived-offset sign
//! must make the suite fail.

use crate::bem::{bem_freq_channel, bem_to_time_channel, build_cebem_basis, time_to_freq_channel,
    BemCoefficients};
use crate::channel::{exact_bem_channel, SystemConfig};
use crate::linalg::{dft_matrix, dft_padded, lstsq, CMat, ZERO};
use crate::pilot::{assemble_measurement_matrix, equidistant_positions, random_sign_sequences, PilotPattern};
use crate::recovery::bsomp;
use crate::rng::DetRng;
use crate::sim::{apply_channel, TransmitFrame};

/// Deliberate fault injection points for mutation tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultHooks {
    /// Compute the derived pilot sets with the offset sign flipped,
    /// S_d = S_cen - (d - (D-1)/2) instead of S_cen + (d - (D-1)/2).
    pub flip_derived_offset_sign: bool,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Derived sets as the verification suite computes them, honoring the hooks.
fn derived_set(hooks: &FaultHooks, centers: &[usize], n: usize, order: usize, d: usize) -> Vec<usize> {
    let half = (order as i64 - 1) / 2;
    let offset = d as i64 - half;
    let offset = if hooks.flip_derived_offset_sign { -offset } else { offset };
    centers
        .iter()
        .map(|&s| ((s as i64 + offset).rem_euclid(n as i64)) as usize)
        .collect()
}

fn check_circulant_diagonalization() -> CheckOutcome {
    let n = 16;
    let l_len = 5;
    let w = dft_matrix(n);
    let mut rng = DetRng::new(101);
    let theta: Vec<_> = (0..l_len).map(|_| rng.next_complex_gaussian(1.0)).collect();
    let fl_theta = dft_padded(&theta, n);
    let diag = CMat::from_fn(n, n, |r, c| if r == c { fl_theta[r] } else { ZERO });
    let circ = w.adjoint().mul(&diag).mul(&w);
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            let lag = (p + n - q) % n;
            let expect = if lag < l_len { theta[lag] } else { ZERO };
            worst = worst.max((circ[(p, q)] - expect).norm());
        }
    }
    outcome(
        "circulant_diagonalization",
        worst < 1e-10,
        format!("max entry error {worst:.3e} (tolerance 1e-10)"),
    )
}

fn check_freq_path_equivalence() -> CheckOutcome {
    let basis = build_cebem_basis(16, 3).unwrap();
    let mut rng = DetRng::new(102);
    let coeffs = CMat::from_fn(4, 3, |_, _| rng.next_complex_gaussian(1.0));
    let direct = bem_freq_channel(&coeffs, &basis).unwrap();
    let via_time = time_to_freq_channel(&bem_to_time_channel(&coeffs, &basis).unwrap()).unwrap();
    let err = direct.sub(&via_time).max_abs();
    outcome(
        "freq_path_equivalence",
        err < 1e-10,
        format!("max entry gap between the two constructions {err:.3e}"),
    )
}

fn check_derived_set_consistency(hooks: &FaultHooks) -> CheckOutcome {
    let cfg = verify_config();
    let pattern = PilotPattern::equidistant(&cfg, 7).unwrap();
    let n = cfg.n_subcarriers;
    let base = derived_set(hooks, pattern.center_indices(), n, cfg.bem_order, 0);
    let mut ok = true;
    for d in 0..cfg.bem_order {
        let lib = pattern.derived_set(d).unwrap();
        let own = derived_set(hooks, pattern.center_indices(), n, cfg.bem_order, d);
        if lib != own {
            ok = false;
        }
        for (a, b) in own.iter().zip(&base) {
            if (*b + d) % n != *a {
                ok = false;
            }
        }
    }
    outcome(
        "derived_set_consistency",
        ok,
        "S_d - S_0 = d (mod N) for every order".into(),
    )
}

fn check_block_flatten_isometry() -> CheckOutcome {
    let cfg = verify_config();
    let pattern = PilotPattern::equidistant(&cfg, 9).unwrap();
    let meas = assemble_measurement_matrix(&pattern, cfg.channel_length).unwrap();
    let gap = (meas.z().fro_norm() - meas.z_s().fro_norm()).abs() / meas.z().fro_norm();
    outcome(
        "block_flatten_isometry",
        gap < 1e-12,
        format!("relative Frobenius gap {gap:.3e} (tolerance 1e-12)"),
    )
}

fn check_ici_free_purity(hooks: &FaultHooks) -> CheckOutcome {
    let cfg = verify_config();
    let pattern = PilotPattern::equidistant(&cfg, 13).unwrap();
    let basis = build_cebem_basis(cfg.n_subcarriers, cfg.bem_order).unwrap();
    let mut rng = DetRng::new(103);
    let coeffs = BemCoefficients::random_on_support(
        cfg.n_antennas,
        cfg.channel_length,
        cfg.bem_order,
        &[2, 9],
        &mut rng,
    );
    let channel = exact_bem_channel(&coeffs, &basis).unwrap();
    let frame = TransmitFrame::random(&pattern, 41);
    let received = apply_channel(&frame, &channel, None, 41).unwrap();
    // gather observations at the hook-controlled positions
    let g = pattern.n_groups();
    let y = CMat::from_fn(g, cfg.bem_order, |gi, d| {
        let set = derived_set(
            hooks,
            pattern.center_indices(),
            cfg.n_subcarriers,
            cfg.bem_order,
            d,
        );
        received[set[gi]]
    });
    let meas = assemble_measurement_matrix(&pattern, cfg.channel_length).unwrap();
    let predicted = meas.z().mul(coeffs.data());
    let resid = y.sub(&predicted).fro_norm() / y.fro_norm();
    outcome(
        "ici_free_pilot_purity",
        resid < 1e-9,
        format!("relative observation residual {resid:.3e} (tolerance 1e-9)"),
    )
}

fn check_pilot_overhead_ratio() -> CheckOutcome {
    let centers = match equidistant_positions(4096, 192, 3) {
        Ok(c) => c,
        Err(e) => return outcome("pilot_overhead_ratio", false, format!("packing failed: {e}")),
    };
    let spacing_ok = centers.windows(2).all(|w| w[1] - w[0] == 21);
    let overhead = (192.0 * 5.0) / 4096.0;
    let passed = spacing_ok && overhead == 0.234375;
    outcome(
        "pilot_overhead_ratio",
        passed,
        format!("spacing 21: {spacing_ok}, G(2D-1)/N = {overhead}"),
    )
}

fn check_forward_model_fidelity() -> CheckOutcome {
    let cfg = verify_config();
    let pattern = PilotPattern::equidistant(&cfg, 29).unwrap();
    let basis = build_cebem_basis(cfg.n_subcarriers, cfg.bem_order).unwrap();
    let mut rng = DetRng::new(104);
    let coeffs = BemCoefficients::random_on_support(
        cfg.n_antennas,
        cfg.channel_length,
        cfg.bem_order,
        &[0, 6],
        &mut rng,
    );
    let channel = exact_bem_channel(&coeffs, &basis).unwrap();
    let frame = TransmitFrame::random(&pattern, 5);
    let received = apply_channel(&frame, &channel, None, 5).unwrap();
    let obs = crate::recovery::extract_pilot_observations(&received, &pattern).unwrap();
    let meas = assemble_measurement_matrix(&pattern, cfg.channel_length).unwrap();
    let resid = obs.y_blocks().sub(&meas.z().mul(coeffs.data())).fro_norm()
        / obs.y_blocks().fro_norm();
    outcome(
        "forward_model_fidelity",
        resid < 1e-9,
        format!("relative residual of Y_blocks vs Z Lambda: {resid:.3e}"),
    )
}

fn check_tiny_bsomp_oracle() -> CheckOutcome {
    let mut cfg = SystemConfig::desk_scale();
    cfg.n_subcarriers = 64;
    cfg.n_groups = 6;
    cfg.bem_order = 3;
    cfg.channel_length = 8;
    cfg.sparsity = 2;
    cfg.n_antennas = 2;
    // well-conditioned pilots: at G = 6 the sign draw decides the block
    // cross-antenna correlations, which mu(z_s) cannot see
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, 14);
    let positions = match crate::pilot::bdso_optimize(&cfg, &values, 400, 14) {
        Ok(r) => r.positions,
        Err(e) => return outcome("tiny_bsomp_oracle", false, format!("pilot design failed: {e}")),
    };
    let pattern =
        PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, positions, values).unwrap();
    let meas = assemble_measurement_matrix(&pattern, 8).unwrap();
    let mut failures = 0;
    for seed in 0..5u64 {
        let mut rng = DetRng::new(1000 + seed);
        let support = rng.sample_distinct_sorted(8, 2);
        let truth =
            BemCoefficients::random_on_support(2, 8, 3, &support, &mut rng);
        let obs = crate::recovery::ObservationSet::new(meas.z().mul(truth.data()));
        let rec = match bsomp(&obs, &meas, 2) {
            Ok(r) => r,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        // exhaustive minimum-residual support over all C(8,2) pairs
        let mut best_support = Vec::new();
        let mut best_res = f64::INFINITY;
        for a in 0..8usize {
            for b in (a + 1)..8 {
                let cols: Vec<usize> = [a, b]
                    .iter()
                    .flat_map(|&l| meas.tap_block_columns(l))
                    .collect();
                let m = meas.z().select_cols(&cols);
                let x = lstsq(&m, obs.y_blocks());
                let res = obs.y_blocks().sub(&m.mul(&x)).fro_norm();
                if res < best_res {
                    best_res = res;
                    best_support = vec![a, b];
                }
            }
        }
        if rec.support != best_support && (rec.residual_norm - best_res).abs() > 1e-6 {
            failures += 1;
        }
    }
    outcome(
        "tiny_bsomp_oracle",
        failures == 0,
        format!("{failures}/5 instances disagreed with exhaustive search"),
    )
}

fn verify_config() -> SystemConfig {
    let mut cfg = SystemConfig::desk_scale();
    cfg.n_subcarriers = 64;
    cfg.n_groups = 6;
    cfg.bem_order = 3;
    cfg.channel_length = 12;
    cfg.sparsity = 2;
    cfg.n_antennas = 2;
    cfg
}

/// Run every check; hooks default to no injected faults.
pub fn run_checks(hooks: &FaultHooks) -> Vec<CheckOutcome> {
    vec![
        check_circulant_diagonalization(),
        check_freq_path_equivalence(),
        check_derived_set_consistency(hooks),
        check_block_flatten_isometry(),
        check_ici_free_purity(hooks),
        check_pilot_overhead_ratio(),
        check_forward_model_fidelity(),
        check_tiny_bsomp_oracle(),
    ]
}
