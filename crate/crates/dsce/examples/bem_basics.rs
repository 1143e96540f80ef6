//! CE-BEM fundamentals: basis structure, coefficient fitting, modeling error
//! versus Doppler, and the two equivalent frequency-channel constructions.
//!
//! ```bash
//! cargo run --release --example bem_basics
//! ```

use dsce::bem::{bem_freq_channel, bem_to_time_channel, build_cebem_basis, fit_bem_coefficients,
    time_to_freq_channel};
use dsce::linalg::{cis, CMat};
use dsce::rng::DetRng;
use std::f64::consts::PI;

fn main() {
    let n = 64;
    let basis = build_cebem_basis(n, 3).unwrap();
    println!(
        "CE-BEM with N={n}, D=3: column frequencies {:?} cycles/symbol",
        (0..3).map(|d| basis.column_frequency(d)).collect::<Vec<_>>()
    );

    // how well does a D=3 fit track a tap oscillating at nu cycles/symbol?
    println!("\nmodeling error of the best D=3 fit vs normalized Doppler:");
    for nu in [0.05, 0.2, 0.5, 1.0, 2.0] {
        let tap: Vec<_> = (0..n)
            .map(|t| cis(2.0 * PI * nu * t as f64 / n as f64))
            .collect();
        let theta = fit_bem_coefficients(&tap, &basis).unwrap();
        let resid: f64 = (0..n)
            .map(|t| {
                let model: dsce::C64 = (0..3).map(|d| basis.value(t, d) * theta[d]).sum();
                (tap[t] - model).norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        println!("  nu = {nu:4}: residual energy {:9.2e} per sample", resid);
    }

    // the two routes to the frequency-domain channel matrix agree
    let mut rng = DetRng::new(3);
    let coeffs = CMat::from_fn(6, 3, |_, _| rng.next_complex_gaussian(1.0));
    let via_time = time_to_freq_channel(&bem_to_time_channel(&coeffs, &basis).unwrap()).unwrap();
    let direct = bem_freq_channel(&coeffs, &basis).unwrap();
    println!(
        "\nfrequency-channel construction gap (direct vs via time domain): {:.2e}",
        direct.sub(&via_time).max_abs()
    );
    println!(
        "off-diagonal energy share (the ICI a D=3 channel produces): {:.1}%",
        100.0 * (1.0
            - (0..n).map(|k| direct[(k, k)].norm_sqr()).sum::<f64>()
                / direct.fro_norm().powi(2))
    );
}
