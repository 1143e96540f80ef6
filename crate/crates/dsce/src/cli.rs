//! Command-line front end.
//!
//! Three subcommands wrap the library:
//!
//! - `design-pilots` - optimize (or just lay out) pilot positions and write
//!   the pattern file plus its coherence trace.
//! - `sweep` - run a Monte-Carlo experiment from a config file and write the
//!   result CSV plus a run manifest.
//! - `verify` - run the built-in identity/oracle checks.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config/usage error,
//! 3 infeasible parameters.

use crate::config::RunConfig;
use crate::pilot::{bdso_optimize, equidistant_positions, ga_optimize, random_sign_sequences,
    assemble_measurement_matrix, mutual_coherence, PilotPattern};
use crate::sim::{default_threads, run_experiment, PilotScheme};
use crate::verify::{run_checks, FaultHooks};
use crate::Error;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

const USAGE: &str = "\
dsce - doubly-selective channel estimation toolkit

USAGE:
    dsce design-pilots --config <path> [--scheme equidistant|ga|bdso]
                       [--iterations <n>] [--seed <n>] --out <path>
    dsce sweep --config <path> --out <path> [--threads <n>] [--seed <n>]
    dsce verify
    dsce --verify
    dsce --help

design-pilots writes the pilot pattern text file to <out> and the coherence
trace CSV to <out>.mu.csv. sweep writes the result CSV to <out> and the run
manifest to <out>.manifest.txt. The runtime_ms CSV column is the only
non-deterministic output field.

Exit codes: 0 ok, 1 verification failure, 2 config error, 3 infeasible
parameters.";

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG_ERROR,
    }
}

struct Flags {
    config: Option<PathBuf>,
    scheme: Option<String>,
    iterations: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        config: None,
        scheme: None,
        iterations: None,
        seed: None,
        out: None,
        threads: None,
    };
    let mut i = 0;
    while i < args.len() {
        let flag = args[i].as_str();
        let mut take = |name: &str| -> Result<String, String> {
            i += 1;
            args.get(i).cloned().ok_or_else(|| format!("flag {name} needs a value"))
        };
        match flag {
            "--config" => flags.config = Some(PathBuf::from(take("--config")?)),
            "--scheme" => flags.scheme = Some(take("--scheme")?),
            "--iterations" => {
                let v = take("--iterations")?;
                flags.iterations =
                    Some(v.parse().map_err(|_| format!("bad --iterations value '{v}'"))?);
            }
            "--seed" => {
                let v = take("--seed")?;
                flags.seed = Some(v.parse().map_err(|_| format!("bad --seed value '{v}'"))?);
            }
            "--out" => flags.out = Some(PathBuf::from(take("--out")?)),
            "--threads" => {
                let v = take("--threads")?;
                flags.threads =
                    Some(v.parse().map_err(|_| format!("bad --threads value '{v}'"))?);
            }
            other => return Err(format!("unknown flag '{other}'")),
        }
        i += 1;
    }
    Ok(flags)
}

/// `design-pilots`: write the pattern text file and its coherence trace.
pub fn cmd_design_pilots(
    config_path: &Path,
    scheme: PilotScheme,
    iterations: usize,
    seed: u64,
    out: &Path,
) -> i32 {
    let run = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dsce: {e}");
            return if matches!(e, Error::Io(_)) { EXIT_CONFIG_ERROR } else { error_code(&e) };
        }
    };
    let cfg = run.spec.base_config;
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, seed);
    let built = (|| -> crate::Result<(Vec<usize>, Vec<f64>)> {
        match scheme {
            PilotScheme::Equidistant => {
                let centers =
                    equidistant_positions(cfg.n_subcarriers, cfg.n_groups, cfg.bem_order)?;
                let pattern = PilotPattern::new(
                    cfg.n_subcarriers,
                    cfg.bem_order,
                    centers.clone(),
                    values.clone(),
                )?;
                let meas = assemble_measurement_matrix(&pattern, cfg.channel_length)?;
                let mu = mutual_coherence(meas.z_s())?;
                Ok((centers, vec![mu]))
            }
            PilotScheme::Bdso => {
                let res = bdso_optimize(&cfg, &values, iterations.max(1), seed)?;
                let mut trace = vec![res.initial_mu];
                trace.extend(res.reported_mu);
                Ok((res.positions, trace))
            }
            PilotScheme::Ga => {
                let res = ga_optimize(&cfg, &values, iterations, seed)?;
                Ok((res.positions, res.best_mu))
            }
        }
    })();
    let (centers, trace) = match built {
        Ok(x) => x,
        Err(e) => {
            eprintln!("dsce: {e}");
            return error_code(&e);
        }
    };
    let pattern = match PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, centers, values) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("dsce: {e}");
            return error_code(&e);
        }
    };
    if let Err(e) = std::fs::write(out, pattern.to_text()) {
        eprintln!("dsce: cannot write {}: {e}", out.display());
        return EXIT_CONFIG_ERROR;
    }
    let trace_path = mu_trace_path(out);
    let mut text = String::from("iteration,mu\n");
    for (i, mu) in trace.iter().enumerate() {
        text.push_str(&format!("{i},{mu}\n"));
    }
    if let Err(e) = std::fs::write(&trace_path, text) {
        eprintln!("dsce: cannot write {}: {e}", trace_path.display());
        return EXIT_CONFIG_ERROR;
    }
    println!(
        "wrote {} ({} groups, scheme {}) and {} ({} trace points, final mu {:.4})",
        out.display(),
        pattern.n_groups(),
        scheme.as_str(),
        trace_path.display(),
        trace.len(),
        trace.last().copied().unwrap_or(f64::NAN)
    );
    EXIT_OK
}

/// Path of the coherence trace written next to a pattern file.
pub fn mu_trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".mu.csv");
    PathBuf::from(s)
}

/// Path of the manifest written next to a sweep CSV.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

/// `sweep`: run the configured experiment and write CSV + manifest.
pub fn cmd_sweep(config_path: &Path, out: &Path, threads: usize, seed: Option<u64>) -> i32 {
    let mut run = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dsce: {e}");
            return if matches!(e, Error::Io(_)) { EXIT_CONFIG_ERROR } else { error_code(&e) };
        }
    };
    if let Some(s) = seed {
        run.spec.seed = s;
    }
    let table = match run_experiment(&run.spec, threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("dsce: {e}");
            return error_code(&e);
        }
    };
    let write_all = || -> crate::Result<()> {
        let mut csv = Vec::new();
        table.write_csv(&mut csv)?;
        std::fs::write(out, &csv)?;
        std::fs::write(manifest_path(out), run.spec.manifest())?;
        Ok(())
    };
    if let Err(e) = write_all() {
        eprintln!("dsce: {e}");
        return EXIT_CONFIG_ERROR;
    }
    println!(
        "wrote {} ({} rows) and {}",
        out.display(),
        table.len(),
        manifest_path(out).display()
    );
    EXIT_OK
}

/// `verify`: run the built-in identity and oracle checks.
pub fn cmd_verify() -> i32 {
    let results = run_checks(&FaultHooks::default());
    let mut first_failure: Option<&str> = None;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {} - {}", r.name, r.detail);
        if !r.passed && first_failure.is_none() {
            first_failure = Some(r.name);
        }
    }
    match first_failure {
        None => {
            println!("all {} checks passed", results.len());
            EXIT_OK
        }
        Some(name) => {
            println!("verification failed: {name}");
            EXIT_VERIFY_FAILED
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    if args.is_empty() {
        eprintln!("{USAGE}");
        return EXIT_CONFIG_ERROR;
    }
    match args[0].as_str() {
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            EXIT_OK
        }
        "verify" | "--verify" => cmd_verify(),
        "design-pilots" => {
            let flags = match parse_flags(&args[1..]) {
                Ok(f) => f,
                Err(m) => {
                    eprintln!("dsce: {m}");
                    return EXIT_CONFIG_ERROR;
                }
            };
            let (config, out) = match (&flags.config, &flags.out) {
                (Some(c), Some(o)) => (c.clone(), o.clone()),
                _ => {
                    eprintln!("dsce: design-pilots needs --config and --out");
                    return EXIT_CONFIG_ERROR;
                }
            };
            let scheme = match flags.scheme.as_deref() {
                None => PilotScheme::Bdso,
                Some(s) => match PilotScheme::parse(s) {
                    Some(s) => s,
                    None => {
                        eprintln!("dsce: unknown scheme '{s}' (equidistant|ga|bdso)");
                        return EXIT_CONFIG_ERROR;
                    }
                },
            };
            cmd_design_pilots(
                &config,
                scheme,
                flags.iterations.unwrap_or(500),
                flags.seed.unwrap_or(1),
                &out,
            )
        }
        "sweep" => {
            let flags = match parse_flags(&args[1..]) {
                Ok(f) => f,
                Err(m) => {
                    eprintln!("dsce: {m}");
                    return EXIT_CONFIG_ERROR;
                }
            };
            let (config, out) = match (&flags.config, &flags.out) {
                (Some(c), Some(o)) => (c.clone(), o.clone()),
                _ => {
                    eprintln!("dsce: sweep needs --config and --out");
                    return EXIT_CONFIG_ERROR;
                }
            };
            cmd_sweep(
                &config,
                &out,
                flags.threads.unwrap_or_else(default_threads),
                flags.seed,
            )
        }
        other => {
            eprintln!("dsce: unknown command '{other}'\n{USAGE}");
            EXIT_CONFIG_ERROR
        }
    }
}
