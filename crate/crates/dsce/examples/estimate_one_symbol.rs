//! End-to-end estimation of one OFDM symbol: design pilots, build the frame,
//! push it through a doubly-selective channel and recover the taps with
//! LS, SOMP and block SOMP.
//!
//! ```bash
//! cargo run --release --example estimate_one_symbol
//! ```

use dsce::bem::build_cebem_basis;
use dsce::channel::{draw_common_support, generate_ds_channel, SystemConfig};
use dsce::pilot::{assemble_measurement_matrix, bdso_optimize, random_sign_sequences, PilotPattern};
use dsce::recovery::{bsomp, extract_pilot_observations, linear_smoothing, nmse,
    reconstruct_channel, solve_ls, somp};
use dsce::sim::{apply_channel, TransmitFrame};

fn main() {
    let seed = 7;
    let mut cfg = SystemConfig::desk_scale();
    cfg.sparsity = 2;
    println!(
        "system: N={} G={} D={} L={} K={} N_B={}, {:.0} km/h -> normalized Doppler {:.3}",
        cfg.n_subcarriers,
        cfg.n_groups,
        cfg.bem_order,
        cfg.channel_length,
        cfg.sparsity,
        cfg.n_antennas,
        cfg.speed_mps * 3.6,
        cfg.normalized_doppler()
    );
    println!("pilot overhead G(2D-1)/N = {:.2}%", 100.0 * cfg.pilot_overhead());

    // pilot design: random +-1 values, positions optimized for low block coherence
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, seed);
    let design = bdso_optimize(&cfg, &values, 300, seed).expect("pilot design");
    println!(
        "BDSO: coherence {:.3} -> {:.3} after 300 iterations ({} accepted moves)",
        design.initial_mu,
        design.reported_mu.last().unwrap(),
        design.accepted_mu.len()
    );
    let pattern = PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, design.positions, values)
        .expect("pattern");

    // one channel realization and one received symbol at 30 dB
    let support = draw_common_support(cfg.channel_length, cfg.sparsity, seed).unwrap();
    let channel = generate_ds_channel(&cfg, &support, seed).unwrap();
    println!("true support: {support:?}");
    let frame = TransmitFrame::random(&pattern, seed);
    let received = apply_channel(&frame, &channel, Some(cfg.snr_db), seed).unwrap();

    // recover
    let obs = extract_pilot_observations(&received, &pattern).unwrap();
    let meas = assemble_measurement_matrix(&pattern, cfg.channel_length).unwrap();
    let basis = build_cebem_basis(cfg.n_subcarriers, cfg.bem_order).unwrap();

    let r_ls = solve_ls(&obs, &meas);
    let r_somp = somp(&obs, &meas, cfg.sparsity).unwrap();
    let r_bsomp = bsomp(&obs, &meas, cfg.sparsity).unwrap();
    println!("SOMP support estimate:  {:?}", r_somp.support);
    println!("BSOMP support estimate: {:?}", r_bsomp.support);

    for (name, result) in [("LS", &r_ls), ("SOMP", &r_somp), ("BSOMP", &r_bsomp)] {
        let recon = reconstruct_channel(&result.coeffs, &basis).unwrap();
        let raw = nmse(&recon, &channel.taps).unwrap();
        let smoothed = linear_smoothing(&recon, &result.support).unwrap();
        let li = nmse(&smoothed, &channel.taps).unwrap();
        println!("{name:>6}: NMSE {raw:8.2} dB, with linear smoothing {li:8.2} dB");
    }
}
