//! Pilot position optimization: equidistant baseline vs the genetic search
//! vs block discrete stochastic optimization, traced over iterations.
//!
//! Writes `pilot_traces.csv` (scheme, iteration, mu) next to the working
//! directory, or to the path given as the first argument.
//!
//! ```bash
//! cargo run --release --example design_pilots [out.csv]
//! ```

use dsce::channel::SystemConfig;
use dsce::pilot::{assemble_measurement_matrix, bdso_optimize, equidistant_positions, ga_optimize,
    mutual_coherence, random_sign_sequences, PilotPattern};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "pilot_traces.csv".into());
    let cfg = SystemConfig::desk_scale();
    let seed = 1;
    let iterations = 500;
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, seed);

    let eq = equidistant_positions(cfg.n_subcarriers, cfg.n_groups, cfg.bem_order).unwrap();
    let p_eq = PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, eq, values.clone()).unwrap();
    let mu_eq = mutual_coherence(
        assemble_measurement_matrix(&p_eq, cfg.channel_length).unwrap().z_s(),
    )
    .unwrap();
    println!("equidistant: mu(Z_s) = {mu_eq:.4}");

    let ga = ga_optimize(&cfg, &values, iterations, seed).unwrap();
    println!(
        "genetic search, {iterations} generations: best mu {:.4} (population best at start {:.4})",
        ga.best_mu.last().unwrap(),
        ga.initial_mu
    );

    let bdso = bdso_optimize(&cfg, &values, iterations, seed).unwrap();
    println!(
        "BDSO, {iterations} iterations: reported mu {:.4} ({} accepted moves, start {:.4})",
        bdso.reported_mu.last().unwrap(),
        bdso.accepted_mu.len(),
        bdso.initial_mu
    );

    let mut csv = String::from("scheme,iteration,mu\n");
    csv.push_str(&format!("equidistant,0,{mu_eq}\n"));
    for (i, mu) in ga.best_mu.iter().enumerate() {
        csv.push_str(&format!("ga,{i},{mu}\n"));
    }
    csv.push_str(&format!("bdso,0,{}\n", bdso.initial_mu));
    for (i, mu) in bdso.reported_mu.iter().enumerate() {
        csv.push_str(&format!("bdso,{},{mu}\n", i + 1));
    }
    std::fs::write(&out, csv).unwrap();
    println!("traces written to {out}");
}
