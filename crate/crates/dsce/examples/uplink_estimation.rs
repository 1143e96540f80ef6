//! Uplink estimation: one terminal transmits a single pilot sequence and
//! every base-station antenna receives it through its own channel; the
//! joint solver recovers one common support for all of them.
//!
//! ```bash
//! cargo run --release --example uplink_estimation
//! ```

use dsce::bem::build_cebem_basis;
use dsce::channel::{draw_common_support, generate_ds_channel, ChannelRealization, SystemConfig,
    TapSeries};
use dsce::pilot::{bdso_optimize, random_sign_sequences, PilotPattern};
use dsce::recovery::{extract_pilot_observations, nmse, reconstruct_channel, uplink_dcs_estimate};
use dsce::sim::{apply_channel, TransmitFrame};

fn main() {
    let seed = 5;
    let mut cfg = SystemConfig::desk_scale();
    cfg.sparsity = 3;
    cfg.n_antennas = 8; // receive antennas at the base station

    // the terminal transmits one sequence; design it once
    let mut design_cfg = cfg.clone();
    design_cfg.n_antennas = 1;
    let values = random_sign_sequences(1, cfg.n_groups, seed);
    let design = bdso_optimize(&design_cfg, &values, 300, seed).unwrap();
    let pattern =
        PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, design.positions, values).unwrap();

    let support = draw_common_support(cfg.channel_length, cfg.sparsity, seed).unwrap();
    let channel = generate_ds_channel(&cfg, &support, seed).unwrap();
    println!("true support {support:?}, {} receive antennas", cfg.n_antennas);

    // every receive antenna sees the same frame through its own taps
    let frame = TransmitFrame::random(&pattern, seed);
    let mut observations = Vec::new();
    for b in 0..cfg.n_antennas {
        let mut taps = TapSeries::zeros(1, cfg.n_subcarriers, cfg.channel_length);
        for t in 0..cfg.n_subcarriers {
            for &l in &support {
                *taps.at_mut(0, t, l) = channel.taps.at(b, t, l);
            }
        }
        let single = ChannelRealization {
            taps,
            support: support.clone(),
            tap_powers: channel.tap_powers.clone(),
        };
        let received = apply_channel(&frame, &single, Some(cfg.snr_db), seed + b as u64).unwrap();
        observations.push(extract_pilot_observations(&received, &pattern).unwrap());
    }

    let results =
        uplink_dcs_estimate(&observations, &pattern, cfg.channel_length, cfg.sparsity).unwrap();
    println!("joint support estimate {:?}", results[0].support);

    let basis = build_cebem_basis(cfg.n_subcarriers, cfg.bem_order).unwrap();
    let mut est = TapSeries::zeros(cfg.n_antennas, cfg.n_subcarriers, cfg.channel_length);
    for (b, res) in results.iter().enumerate() {
        let recon = reconstruct_channel(&res.coeffs, &basis).unwrap();
        for t in 0..cfg.n_subcarriers {
            for l in 0..cfg.channel_length {
                *est.at_mut(b, t, l) = recon.at(0, t, l);
            }
        }
    }
    println!(
        "joint NMSE across all receive antennas: {:.2} dB at SNR {:.0} dB",
        nmse(&est, &channel.taps).unwrap(),
        cfg.snr_db
    );
}
