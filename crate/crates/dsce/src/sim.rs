//! End-to-end OFDM symbol simulation and the Monte-Carlo experiment driver.
//!
//! One trial builds a QPSK frame around the pilot pattern, pushes it through
//! a doubly-selective channel (exact circular convolution on the true taps,
//! noise calibrated to the requested receiver SNR), extracts the pilot
//! observations and runs the configured estimators. The driver sweeps SNR,
//! Doppler, sparsity or optimizer iterations and emits deterministic CSV
//! rows; trials run on independent worker threads and rows are merged in
//! (sweep, trial) order regardless of completion order.

use crate::channel::{draw_common_support, generate_ds_channel, ChannelRealization, SystemConfig};
use crate::linalg::{fft_forward, fft_inverse, CMat, C64, ZERO};
use crate::pilot::{
    assemble_measurement_matrix, bdso_optimize, ga_optimize, random_sign_sequences,
    equidistant_positions, PilotPattern,
};
use crate::recovery::{
    bsomp, extract_pilot_observations, linear_smoothing, nmse, reconstruct_channel, solve_ls,
    somp, uplink_dcs_estimate, RecoveryMethod, RecoveryResult, ResultRow,
};
use crate::rng::{stream, DetRng};
use crate::{Error, Result};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Unit-energy Gray-mapped QPSK: 00, 01, 11, 10 walk the quadrants.
pub fn qpsk_map(b0: bool, b1: bool) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match (b0, b1) {
        (false, false) => C64::new(s, s),
        (false, true) => C64::new(-s, s),
        (true, true) => C64::new(-s, -s),
        (true, false) => C64::new(s, -s),
    }
}

/// One OFDM symbol across all transmit antennas.
///
/// At the pilot centers every antenna sends its ±1 value; the guard
/// subcarriers (D-1 on each side of every center) are zero for every antenna;
/// every remaining subcarrier carries a QPSK data symbol.
#[derive(Debug, Clone)]
pub struct TransmitFrame {
    /// N_B x N frequency-domain symbols.
    pub symbols: CMat,
    /// True at pilot and guard subcarriers.
    pub pilot_mask: Vec<bool>,
    /// Bits consumed building the data subcarriers.
    pub bits_used: usize,
}

impl TransmitFrame {
    /// Data subcarrier count per antenna: N - G(2D-1).
    pub fn data_positions(pattern: &PilotPattern) -> Vec<usize> {
        let mask = pattern.group_mask();
        (0..pattern.n_subcarriers()).filter(|&i| !mask[i]).collect()
    }

    /// Build a frame from explicit data bits (2 bits per data subcarrier per
    /// antenna, antenna-major).
    pub fn from_bits(pattern: &PilotPattern, data_bits: &[bool]) -> Result<Self> {
        let n = pattern.n_subcarriers();
        let n_b = pattern.n_antennas();
        let data_pos = Self::data_positions(pattern);
        let needed = 2 * data_pos.len() * n_b;
        if data_bits.len() < needed {
            return Err(Error::Parameter(format!(
                "need {needed} data bits, got {}",
                data_bits.len()
            )));
        }
        let mut symbols = CMat::zeros(n_b, n);
        let mut bit = 0;
        for b in 0..n_b {
            for (g, &s) in pattern.center_indices().iter().enumerate() {
                symbols[(b, s)] = C64::new(pattern.pilot_value(b, g) as f64, 0.0);
            }
            for &pos in &data_pos {
                symbols[(b, pos)] = qpsk_map(data_bits[bit], data_bits[bit + 1]);
                bit += 2;
            }
        }
        Ok(TransmitFrame { symbols, pilot_mask: pattern.group_mask(), bits_used: bit })
    }

    /// Build a frame with seeded random data bits.
    pub fn random(pattern: &PilotPattern, rng_seed: u64) -> Self {
        let mut rng = DetRng::derive(rng_seed, &[stream::DATA_BITS]);
        let n_bits = 2 * Self::data_positions(pattern).len() * pattern.n_antennas();
        let bits: Vec<bool> = (0..n_bits).map(|_| rng.next_bool()).collect();
        Self::from_bits(pattern, &bits).expect("generated exactly the required bits")
    }
}

/// Push a frame through the channel: `Y = sum_b H_f^{(b)} S^{(b)} + noise`.
///
/// The channel acts on the true taps as a time-varying circular convolution
/// (per-antenna IDFT, tap filtering, DFT), not through any BEM fit. When
/// `snr_db` is given, white complex Gaussian noise is added with variance set
/// against this realization's received signal power.
pub fn apply_channel(
    frame: &TransmitFrame,
    channel: &ChannelRealization,
    snr_db: Option<f64>,
    rng_seed: u64,
) -> Result<Vec<C64>> {
    let n_b = frame.symbols.rows();
    let n = frame.symbols.cols();
    if channel.taps.n_antennas() != n_b {
        return Err(Error::Dimension(format!(
            "frame has {n_b} antennas, channel has {}",
            channel.taps.n_antennas()
        )));
    }
    if channel.taps.n_time() != n {
        return Err(Error::Dimension(format!(
            "frame has {n} subcarriers, channel has {} samples",
            channel.taps.n_time()
        )));
    }
    let l_len = channel.taps.n_taps();
    let scale_down = 1.0 / (n as f64).sqrt();
    let mut sum_time = vec![ZERO; n];
    for b in 0..n_b {
        // time-domain transmit signal: W^H S
        let mut s_t: Vec<C64> = frame.symbols.row(b).to_vec();
        fft_inverse(&mut s_t);
        for v in s_t.iter_mut() {
            *v *= scale_down;
        }
        // time-varying circular convolution over the active taps only
        for t in 0..n {
            let mut acc = ZERO;
            for &l in &channel.support {
                if l < l_len {
                    acc += channel.taps.at(b, t, l) * s_t[(t + n - l) % n];
                }
            }
            sum_time[t] += acc;
        }
    }
    // back to frequency: W y_t
    fft_forward(&mut sum_time);
    for v in sum_time.iter_mut() {
        *v *= scale_down;
    }
    if let Some(snr) = snr_db {
        let signal_power: f64 =
            sum_time.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        let noise_var = signal_power / 10f64.powf(snr / 10.0);
        let mut rng = DetRng::derive(rng_seed, &[stream::NOISE]);
        for v in sum_time.iter_mut() {
            *v += rng.next_complex_gaussian(noise_var);
        }
    }
    Ok(sum_time)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Snr,
    Doppler,
    Sparsity,
    Iterations,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::Snr => "snr",
            SweepVariable::Doppler => "doppler",
            SweepVariable::Sparsity => "sparsity",
            SweepVariable::Iterations => "iterations",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "snr" => Some(SweepVariable::Snr),
            "doppler" => Some(SweepVariable::Doppler),
            "sparsity" => Some(SweepVariable::Sparsity),
            "iterations" => Some(SweepVariable::Iterations),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotScheme {
    Equidistant,
    Ga,
    Bdso,
}

impl PilotScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            PilotScheme::Equidistant => "equidistant",
            PilotScheme::Ga => "ga",
            PilotScheme::Bdso => "bdso",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "equidistant" => Some(PilotScheme::Equidistant),
            "ga" => Some(PilotScheme::Ga),
            "bdso" => Some(PilotScheme::Bdso),
            _ => None,
        }
    }
}

/// A full experiment description. Everything an output row depends on lives
/// here, so a spec plus its seed reproduces the table exactly.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<RecoveryMethod>,
    pub pilot_scheme: PilotScheme,
    /// Optimizer budget used when `pilot_scheme` is GA or BDSO.
    pub pilot_iterations: usize,
    pub base_config: SystemConfig,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base_config.validate()?;
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be >= 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::Parameter("sweep_values must be nonempty".into()));
        }
        if self.sweep_variable != SweepVariable::Iterations && self.methods.is_empty() {
            return Err(Error::Parameter("methods must be nonempty".into()));
        }
        Ok(())
    }

    /// Text manifest echoing every resolved field.
    pub fn manifest(&self) -> String {
        let cfg = &self.base_config;
        let values: Vec<String> = self.sweep_values.iter().map(|v| v.to_string()).collect();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        format!(
            "[system]\n\
             n_subcarriers = {}\n\
             n_groups = {}\n\
             bem_order = {}\n\
             channel_length = {}\n\
             sparsity = {}\n\
             n_antennas = {}\n\
             carrier_hz = {}\n\
             bandwidth_hz = {}\n\
             speed_mps = {}\n\
             snr_db = {}\n\
             max_antenna_spacing_m = {}\n\
             \n\
             [experiment]\n\
             sweep_variable = {}\n\
             sweep_values = {}\n\
             trials = {}\n\
             methods = {}\n\
             pilot_scheme = {}\n\
             pilot_iterations = {}\n\
             seed = {}\n",
            cfg.n_subcarriers,
            cfg.n_groups,
            cfg.bem_order,
            cfg.channel_length,
            cfg.sparsity,
            cfg.n_antennas,
            cfg.carrier_hz,
            cfg.bandwidth_hz,
            cfg.speed_mps,
            cfg.snr_db,
            cfg.max_antenna_spacing_m,
            self.sweep_variable.as_str(),
            values.join(","),
            self.trials,
            methods.join(","),
            self.pilot_scheme.as_str(),
            self.pilot_iterations,
            self.seed
        )
    }
}

/// One row of an optimizer-trace experiment.
#[derive(Debug, Clone)]
pub struct MuTraceRow {
    pub scheme: String,
    pub budget: usize,
    pub trial: usize,
    pub iteration: usize,
    pub mu: f64,
}

pub const MU_TRACE_HEADER: &str = "scheme,budget,trial,iteration,mu";

impl MuTraceRow {
    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{}", self.scheme, self.budget, self.trial, self.iteration, self.mu)
    }
}

/// Experiment output: recovery rows or optimizer traces, depending on the
/// sweep variable.
#[derive(Debug, Clone)]
pub enum ResultTable {
    Recovery(Vec<ResultRow>),
    MuTrace(Vec<MuTraceRow>),
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        match self {
            ResultTable::Recovery(rows) => {
                writeln!(w, "{}", crate::recovery::CSV_HEADER)?;
                for row in rows {
                    writeln!(w, "{}", row.to_csv())?;
                }
            }
            ResultTable::MuTrace(rows) => {
                writeln!(w, "{MU_TRACE_HEADER}")?;
                for row in rows {
                    writeln!(w, "{}", row.to_csv())?;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match self {
            ResultTable::Recovery(r) => r.len(),
            ResultTable::MuTrace(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Map `f` over `0..n` on up to `threads` workers, preserving index order in
/// the output.
pub fn parallel_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1).min(n.max(1));
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// Default worker count.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn config_for_value(base: &SystemConfig, var: SweepVariable, value: f64) -> SystemConfig {
    let mut cfg = base.clone();
    match var {
        SweepVariable::Snr => cfg.snr_db = value,
        SweepVariable::Doppler => cfg = cfg.with_normalized_doppler(value),
        SweepVariable::Sparsity => cfg.sparsity = value.round().max(0.0) as usize,
        SweepVariable::Iterations => {}
    }
    cfg
}

/// Build the pilot pattern the experiment runs with.
pub fn build_pilot_pattern(spec: &ExperimentSpec) -> Result<PilotPattern> {
    let cfg = &spec.base_config;
    let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, spec.seed);
    let centers = match spec.pilot_scheme {
        PilotScheme::Equidistant => {
            equidistant_positions(cfg.n_subcarriers, cfg.n_groups, cfg.bem_order)?
        }
        PilotScheme::Bdso => {
            bdso_optimize(cfg, &values, spec.pilot_iterations.max(1), spec.seed)?.positions
        }
        PilotScheme::Ga => ga_optimize(cfg, &values, spec.pilot_iterations, spec.seed)?.positions,
    };
    PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, centers, values)
}

struct TrialOutput {
    rows: Vec<ResultRow>,
}

fn failed_row(
    method: &str,
    seed: u64,
    cfg: &SystemConfig,
) -> ResultRow {
    ResultRow {
        method: method.into(),
        seed,
        snr_db: cfg.snr_db,
        doppler_norm: cfg.normalized_doppler(),
        n_antennas: cfg.n_antennas,
        sparsity: cfg.sparsity,
        nmse_db: f64::NAN,
        support_hit: false,
        runtime_ms: 0.0,
    }
}

fn run_downlink_method(
    method: RecoveryMethod,
    cfg: &SystemConfig,
    pattern: &PilotPattern,
    channel: &ChannelRealization,
    trial_seed: u64,
    rows: &mut Vec<ResultRow>,
) -> Result<()> {
    let basis = crate::bem::build_cebem_basis(cfg.n_subcarriers, cfg.bem_order)?;
    let started = Instant::now();
    let result: RecoveryResult = match method {
        RecoveryMethod::Ls | RecoveryMethod::Somp | RecoveryMethod::Bsomp => {
            let frame = TransmitFrame::random(pattern, trial_seed);
            let received = apply_channel(&frame, channel, Some(cfg.snr_db), trial_seed)?;
            let obs = extract_pilot_observations(&received, pattern)?;
            let meas = assemble_measurement_matrix(pattern, cfg.channel_length)?;
            match method {
                RecoveryMethod::Ls => solve_ls(&obs, &meas),
                RecoveryMethod::Somp => somp(&obs, &meas, cfg.sparsity)?,
                RecoveryMethod::Bsomp => bsomp(&obs, &meas, cfg.sparsity)?,
                RecoveryMethod::UplinkDcs => unreachable!(),
            }
        }
        RecoveryMethod::UplinkDcs => {
            return run_uplink_method(cfg, pattern, channel, trial_seed, rows);
        }
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let recon = reconstruct_channel(&result.coeffs, &basis)?;
    let support_hit = result.support == channel.support;
    let nmse_raw = nmse(&recon, &channel.taps)?;
    rows.push(ResultRow {
        method: method.as_str().into(),
        seed: trial_seed,
        snr_db: cfg.snr_db,
        doppler_norm: cfg.normalized_doppler(),
        n_antennas: cfg.n_antennas,
        sparsity: cfg.sparsity,
        nmse_db: nmse_raw,
        support_hit,
        runtime_ms: elapsed_ms,
    });
    // smoothed variant
    let smoothed = linear_smoothing(&recon, &result.support)?;
    let nmse_li = nmse(&smoothed, &channel.taps)?;
    rows.push(ResultRow {
        method: format!("{}_li", method.as_str()),
        seed: trial_seed,
        snr_db: cfg.snr_db,
        doppler_norm: cfg.normalized_doppler(),
        n_antennas: cfg.n_antennas,
        sparsity: cfg.sparsity,
        nmse_db: nmse_li,
        support_hit,
        runtime_ms: elapsed_ms,
    });
    Ok(())
}

/// Uplink trial: the terminal transmits one SISO frame with the shared pilot
/// sequence; every base-station antenna receives it through its own channel
/// and the estimator solves all of them jointly.
fn run_uplink_method(
    cfg: &SystemConfig,
    pattern: &PilotPattern,
    channel: &ChannelRealization,
    trial_seed: u64,
    rows: &mut Vec<ResultRow>,
) -> Result<()> {
    let basis = crate::bem::build_cebem_basis(cfg.n_subcarriers, cfg.bem_order)?;
    let shared = PilotPattern::new(
        cfg.n_subcarriers,
        cfg.bem_order,
        pattern.center_indices().to_vec(),
        vec![pattern.value_rows()[0].clone()],
    )?;
    let started = Instant::now();
    let frame = TransmitFrame::random(&shared, trial_seed);
    let mut obs_list = Vec::with_capacity(cfg.n_antennas);
    for b in 0..cfg.n_antennas {
        // single-antenna view of this receive antenna's channel
        let mut taps = crate::channel::TapSeries::zeros(1, cfg.n_subcarriers, cfg.channel_length);
        for t in 0..cfg.n_subcarriers {
            for &l in &channel.support {
                *taps.at_mut(0, t, l) = channel.taps.at(b, t, l);
            }
        }
        let single = ChannelRealization {
            taps,
            support: channel.support.clone(),
            tap_powers: channel.tap_powers.clone(),
        };
        let received = apply_channel(
            &frame,
            &single,
            Some(cfg.snr_db),
            DetRng::derive(trial_seed, &[stream::NOISE, b as u64]).reseed(),
        )?;
        obs_list.push(extract_pilot_observations(&received, &shared)?);
    }
    let results = uplink_dcs_estimate(&obs_list, &shared, cfg.channel_length, cfg.sparsity)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    // reassemble the joint estimate into one tap grid for the NMSE
    let mut est = crate::channel::TapSeries::zeros(
        cfg.n_antennas,
        cfg.n_subcarriers,
        cfg.channel_length,
    );
    for (b, res) in results.iter().enumerate() {
        let recon = reconstruct_channel(&res.coeffs, &basis)?;
        for t in 0..cfg.n_subcarriers {
            for l in 0..cfg.channel_length {
                *est.at_mut(b, t, l) = recon.at(0, t, l);
            }
        }
    }
    let support_hit = results[0].support == channel.support;
    let nmse_raw = nmse(&est, &channel.taps)?;
    rows.push(ResultRow {
        method: RecoveryMethod::UplinkDcs.as_str().into(),
        seed: trial_seed,
        snr_db: cfg.snr_db,
        doppler_norm: cfg.normalized_doppler(),
        n_antennas: cfg.n_antennas,
        sparsity: cfg.sparsity,
        nmse_db: nmse_raw,
        support_hit,
        runtime_ms: elapsed_ms,
    });
    let smoothed = linear_smoothing(&est, &results[0].support)?;
    rows.push(ResultRow {
        method: format!("{}_li", RecoveryMethod::UplinkDcs.as_str()),
        seed: trial_seed,
        snr_db: cfg.snr_db,
        doppler_norm: cfg.normalized_doppler(),
        n_antennas: cfg.n_antennas,
        sparsity: cfg.sparsity,
        nmse_db: nmse(&smoothed, &channel.taps)?,
        support_hit,
        runtime_ms: elapsed_ms,
    });
    Ok(())
}

fn run_recovery_trial(
    spec: &ExperimentSpec,
    pattern: &PilotPattern,
    value_index: usize,
    trial: usize,
) -> TrialOutput {
    let cfg = config_for_value(
        &spec.base_config,
        spec.sweep_variable,
        spec.sweep_values[value_index],
    );
    let trial_seed = DetRng::derive(
        spec.seed,
        &[stream::TRIAL, value_index as u64, trial as u64],
    )
    .reseed();
    let mut rows = Vec::new();
    let setup = (|| -> Result<ChannelRealization> {
        let support = draw_common_support(cfg.channel_length, cfg.sparsity, trial_seed)?;
        generate_ds_channel(&cfg, &support, trial_seed)
    })();
    match setup {
        Ok(channel) => {
            for &method in &spec.methods {
                if run_downlink_method(method, &cfg, pattern, &channel, trial_seed, &mut rows)
                    .is_err()
                {
                    rows.push(failed_row(method.as_str(), trial_seed, &cfg));
                }
            }
        }
        Err(_) => {
            for &method in &spec.methods {
                rows.push(failed_row(method.as_str(), trial_seed, &cfg));
            }
        }
    }
    TrialOutput { rows }
}

fn run_mu_trace(spec: &ExperimentSpec, threads: usize) -> Result<ResultTable> {
    let cfg = spec.base_config.clone();
    let jobs: Vec<(usize, usize)> = (0..spec.sweep_values.len())
        .flat_map(|vi| (0..spec.trials).map(move |t| (vi, t)))
        .collect();
    let results: Vec<Result<Vec<MuTraceRow>>> = parallel_map(jobs.len(), threads, |ji| {
        let (vi, trial) = jobs[ji];
        let budget = spec.sweep_values[vi].round().max(1.0) as usize;
        let seed = DetRng::derive(spec.seed, &[stream::TRIAL, vi as u64, trial as u64]).reseed();
        let values = random_sign_sequences(cfg.n_antennas, cfg.n_groups, seed);
        let scheme = spec.pilot_scheme;
        let mut rows = Vec::new();
        match scheme {
            PilotScheme::Bdso => {
                let res = bdso_optimize(&cfg, &values, budget, seed)?;
                rows.push(MuTraceRow {
                    scheme: scheme.as_str().into(),
                    budget,
                    trial,
                    iteration: 0,
                    mu: res.initial_mu,
                });
                for (i, &mu) in res.reported_mu.iter().enumerate() {
                    rows.push(MuTraceRow {
                        scheme: scheme.as_str().into(),
                        budget,
                        trial,
                        iteration: i + 1,
                        mu,
                    });
                }
            }
            PilotScheme::Ga => {
                let res = ga_optimize(&cfg, &values, budget, seed)?;
                for (i, &mu) in res.best_mu.iter().enumerate() {
                    rows.push(MuTraceRow {
                        scheme: scheme.as_str().into(),
                        budget,
                        trial,
                        iteration: i,
                        mu,
                    });
                }
            }
            PilotScheme::Equidistant => {
                let centers =
                    equidistant_positions(cfg.n_subcarriers, cfg.n_groups, cfg.bem_order)?;
                let pattern =
                    PilotPattern::new(cfg.n_subcarriers, cfg.bem_order, centers, values)?;
                let meas = assemble_measurement_matrix(&pattern, cfg.channel_length)?;
                let mu = crate::pilot::mutual_coherence(meas.z_s())?;
                rows.push(MuTraceRow {
                    scheme: scheme.as_str().into(),
                    budget,
                    trial,
                    iteration: 0,
                    mu,
                });
            }
        }
        Ok(rows)
    });
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    Ok(ResultTable::MuTrace(all))
}

/// Run the experiment on `threads` workers. Deterministic for a fixed spec
/// apart from the documented `runtime_ms` column.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<ResultTable> {
    spec.validate()?;
    if spec.sweep_variable == SweepVariable::Iterations {
        return run_mu_trace(spec, threads);
    }
    let pattern = build_pilot_pattern(spec)?;
    let jobs: Vec<(usize, usize)> = (0..spec.sweep_values.len())
        .flat_map(|vi| (0..spec.trials).map(move |t| (vi, t)))
        .collect();
    let outputs = parallel_map(jobs.len(), threads, |ji| {
        let (vi, trial) = jobs[ji];
        run_recovery_trial(spec, &pattern, vi, trial)
    });
    let mut rows = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
    }
    Ok(ResultTable::Recovery(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::{build_cebem_basis, BemCoefficients};
    use crate::channel::exact_bem_channel;
    use crate::rng::DetRng;

    fn small_config() -> SystemConfig {
        let mut cfg = SystemConfig::desk_scale();
        cfg.n_subcarriers = 64;
        cfg.n_groups = 6;
        cfg.bem_order = 3;
        cfg.channel_length = 12;
        cfg.sparsity = 2;
        cfg.n_antennas = 2;
        cfg
    }

    #[test]
    fn frame_respects_pilot_guard_and_data_structure() {
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 4).unwrap();
        let frame = TransmitFrame::random(&pattern, 9);
        let mask = pattern.group_mask();
        let n = cfg.n_subcarriers;
        for b in 0..cfg.n_antennas {
            for (g, &s) in pattern.center_indices().iter().enumerate() {
                let expect = pattern.pilot_value(b, g) as f64;
                assert_eq!(frame.symbols[(b, s)], C64::new(expect, 0.0));
                // D-1 = 2 guards on each side are zero for every antenna
                for off in 1..=2usize {
                    assert_eq!(frame.symbols[(b, (s + off) % n)], ZERO);
                    assert_eq!(frame.symbols[(b, (s + n - off) % n)], ZERO);
                }
            }
            // data positions carry unit-energy symbols
            let mut count = 0;
            let mut energy = 0.0;
            for i in 0..n {
                if !mask[i] {
                    count += 1;
                    energy += frame.symbols[(b, i)].norm_sqr();
                }
            }
            assert_eq!(count, n - cfg.n_groups * 5);
            assert!((energy / count as f64 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_with_no_data_positions_is_fully_determined() {
        // G(2D-1) = N: every subcarrier is pilot or guard
        let pattern = PilotPattern::new(
            15,
            3,
            vec![2, 7, 12],
            vec![vec![1, -1, 1]],
        )
        .unwrap();
        let frame = TransmitFrame::from_bits(&pattern, &[]).unwrap();
        assert_eq!(frame.bits_used, 0);
        let nonzero: Vec<usize> =
            (0..15).filter(|&i| frame.symbols[(0, i)] != ZERO).collect();
        assert_eq!(nonzero, vec![2, 7, 12]);
    }

    #[test]
    fn frame_rejects_bit_shortfall() {
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 4).unwrap();
        assert!(TransmitFrame::from_bits(&pattern, &[true; 3]).is_err());
    }

    #[test]
    fn qpsk_constellation_is_gray_mapped() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(qpsk_map(false, false), C64::new(s, s));
        assert_eq!(qpsk_map(false, true), C64::new(-s, s));
        assert_eq!(qpsk_map(true, true), C64::new(-s, -s));
        assert_eq!(qpsk_map(true, false), C64::new(s, -s));
    }

    #[test]
    fn zero_channel_yields_noise_only() {
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 4).unwrap();
        let frame = TransmitFrame::random(&pattern, 1);
        let channel = ChannelRealization {
            taps: crate::channel::TapSeries::zeros(2, 64, 12),
            support: vec![],
            tap_powers: vec![],
        };
        let y = apply_channel(&frame, &channel, None, 1).unwrap();
        assert!(y.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn flat_unit_channel_superposes_antennas() {
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 4).unwrap();
        let frame = TransmitFrame::random(&pattern, 2);
        let mut taps = crate::channel::TapSeries::zeros(2, 64, 12);
        for b in 0..2 {
            for t in 0..64 {
                *taps.at_mut(b, t, 0) = crate::linalg::ONE;
            }
        }
        let channel = ChannelRealization {
            taps,
            support: vec![0],
            tap_powers: vec![1.0],
        };
        let y = apply_channel(&frame, &channel, None, 3).unwrap();
        for k in 0..64 {
            let expect = frame.symbols[(0, k)] + frame.symbols[(1, k)];
            assert!((y[k] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn exact_bem_channel_satisfies_the_block_model() {
        // noiseless observation must equal Z Lambda to near machine precision
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 11).unwrap();
        let basis = build_cebem_basis(64, 3).unwrap();
        let mut rng = DetRng::new(21);
        let coeffs = BemCoefficients::random_on_support(2, 12, 3, &[1, 7], &mut rng);
        let channel = exact_bem_channel(&coeffs, &basis).unwrap();
        let frame = TransmitFrame::random(&pattern, 5);
        let y = apply_channel(&frame, &channel, None, 5).unwrap();
        let obs = extract_pilot_observations(&y, &pattern).unwrap();
        let meas = assemble_measurement_matrix(&pattern, 12).unwrap();
        let predicted = meas.z().mul(coeffs.data());
        let resid = obs.y_blocks().sub(&predicted).fro_norm() / obs.y_blocks().fro_norm();
        assert!(resid < 1e-9, "pilot purity violated: relative residual {resid}");
    }

    #[test]
    fn slow_channels_shrink_the_model_residual() {
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 11).unwrap();
        let meas = assemble_measurement_matrix(&pattern, 12).unwrap();
        let basis = build_cebem_basis(64, 3).unwrap();
        let mut residuals = Vec::new();
        for nu in [0.0, 2.0] {
            let cfg_nu = cfg.clone().with_normalized_doppler(nu);
            let support = vec![0, 5];
            let channel = generate_ds_channel(&cfg_nu, &support, 17).unwrap();
            let frame = TransmitFrame::random(&pattern, 6);
            let y = apply_channel(&frame, &channel, None, 6).unwrap();
            let obs = extract_pilot_observations(&y, &pattern).unwrap();
            // best-fit BEM coefficients of the true channel
            let mut data = CMat::zeros(2 * 12, 3);
            for b in 0..2 {
                for &l in &support {
                    let theta = crate::bem::fit_bem_coefficients(
                        &channel.taps.tap_trajectory(b, l),
                        &basis,
                    )
                    .unwrap();
                    for d in 0..3 {
                        data[(b * 12 + l, d)] = theta[d];
                    }
                }
            }
            let resid = obs.y_blocks().sub(&meas.z().mul(&data)).fro_norm()
                / obs.y_blocks().fro_norm();
            residuals.push(resid);
        }
        assert!(residuals[0] < 1e-9, "static channel should be ICI-free: {}", residuals[0]);
        assert!(residuals[1] > residuals[0]);
    }

    #[test]
    fn snr_calibration_is_tight() {
        let cfg = small_config();
        let pattern = PilotPattern::equidistant(&cfg, 4).unwrap();
        let support = vec![0, 3];
        let mut signal = 0.0;
        let mut noise = 0.0;
        for seed in 0..1000u64 {
            let channel = generate_ds_channel(&cfg, &support, seed).unwrap();
            let frame = TransmitFrame::random(&pattern, seed);
            let clean = apply_channel(&frame, &channel, None, seed).unwrap();
            let noisy = apply_channel(&frame, &channel, Some(20.0), seed).unwrap();
            signal += clean.iter().map(|c| c.norm_sqr()).sum::<f64>();
            noise += clean
                .iter()
                .zip(&noisy)
                .map(|(c, n)| (n - c).norm_sqr())
                .sum::<f64>();
        }
        let measured = 10.0 * (signal / noise).log10();
        assert!((measured - 20.0).abs() < 0.2, "measured SNR {measured} dB");
    }

    #[test]
    fn trivial_sweep_produces_expected_rows() {
        let spec = ExperimentSpec {
            sweep_variable: SweepVariable::Snr,
            sweep_values: vec![20.0],
            trials: 1,
            methods: vec![RecoveryMethod::Bsomp],
            pilot_scheme: PilotScheme::Equidistant,
            pilot_iterations: 0,
            base_config: small_config(),
            seed: 5,
        };
        let table = run_experiment(&spec, 1).unwrap();
        match table {
            ResultTable::Recovery(rows) => {
                // one raw row plus one smoothed row
                assert_eq!(rows.len(), 2);
                assert_eq!(rows[0].method, "bsomp");
                assert_eq!(rows[1].method, "bsomp_li");
                assert!(rows[0].nmse_db.is_finite());
            }
            _ => panic!("expected recovery rows"),
        }
    }

    #[test]
    fn sweep_rows_are_deterministic_apart_from_runtime() {
        let spec = ExperimentSpec {
            sweep_variable: SweepVariable::Snr,
            sweep_values: vec![10.0, 30.0],
            trials: 3,
            methods: vec![RecoveryMethod::Ls, RecoveryMethod::Bsomp],
            pilot_scheme: PilotScheme::Bdso,
            pilot_iterations: 40,
            base_config: small_config(),
            seed: 11,
        };
        let strip = |t: &ResultTable| -> Vec<String> {
            match t {
                ResultTable::Recovery(rows) => rows
                    .iter()
                    .map(|r| {
                        let line = r.to_csv();
                        line.rsplit_once(',').unwrap().0.to_string()
                    })
                    .collect(),
                _ => panic!(),
            }
        };
        let a = run_experiment(&spec, 2).unwrap();
        let b = run_experiment(&spec, 1).unwrap();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.len(), 2 * 3 * 2 * 2);
    }

    #[test]
    fn iteration_sweep_produces_traces() {
        let spec = ExperimentSpec {
            sweep_variable: SweepVariable::Iterations,
            sweep_values: vec![10.0],
            trials: 2,
            methods: vec![],
            pilot_scheme: PilotScheme::Bdso,
            pilot_iterations: 0,
            base_config: small_config(),
            seed: 3,
        };
        let table = run_experiment(&spec, 2).unwrap();
        match table {
            ResultTable::MuTrace(rows) => {
                // 2 trials x (1 initial + 10 iterations)
                assert_eq!(rows.len(), 2 * 11);
                assert!(rows.iter().all(|r| r.mu > 0.0 && r.mu <= 1.0));
            }
            _ => panic!("expected mu traces"),
        }
    }

    #[test]
    fn uplink_method_runs_in_the_harness() {
        let spec = ExperimentSpec {
            sweep_variable: SweepVariable::Snr,
            sweep_values: vec![40.0],
            trials: 1,
            methods: vec![RecoveryMethod::UplinkDcs],
            pilot_scheme: PilotScheme::Equidistant,
            pilot_iterations: 0,
            base_config: small_config(),
            seed: 8,
        };
        let table = run_experiment(&spec, 1).unwrap();
        match table {
            ResultTable::Recovery(rows) => {
                assert_eq!(rows.len(), 2);
                assert_eq!(rows[0].method, "uplink_dcs");
                assert!(rows[0].nmse_db < -10.0, "uplink NMSE {}", rows[0].nmse_db);
            }
            _ => panic!("expected recovery rows"),
        }
    }

    #[test]
    fn parallel_map_preserves_order() {
        let out = parallel_map(100, 4, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn bsomp_nmse_improves_with_snr_down_to_a_floor() {
        let mut cfg = small_config();
        cfg.sparsity = 2;
        cfg = cfg.with_normalized_doppler(0.05);
        let spec = ExperimentSpec {
            sweep_variable: SweepVariable::Snr,
            sweep_values: vec![0.0, 20.0, 40.0],
            trials: 30,
            methods: vec![RecoveryMethod::Bsomp],
            pilot_scheme: PilotScheme::Bdso,
            pilot_iterations: 150,
            base_config: cfg,
            seed: 6,
        };
        let table = run_experiment(&spec, 2).unwrap();
        let rows = match table {
            ResultTable::Recovery(rows) => rows,
            _ => panic!(),
        };
        let median_at = |snr: f64| -> f64 {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == "bsomp" && (r.snr_db - snr).abs() < 1e-9)
                .map(|r| r.nmse_db)
                .collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let m0 = median_at(0.0);
        let m20 = median_at(20.0);
        let m40 = median_at(40.0);
        // improves with SNR; allow the high-SNR pair to sit on the
        // modeling-error floor together
        assert!(m20 < m0, "no SNR gain: {m0:.2} -> {m20:.2} dB");
        assert!(m40 <= m20 + 1.0, "degraded past the floor: {m20:.2} -> {m40:.2} dB");
    }

    #[test]
    fn failed_trials_become_rows_instead_of_aborting() {
        // K = 0 makes the channel identically zero; every method errors out
        // (zero NMSE reference) and the sweep must still produce its rows.
        let mut cfg = small_config();
        cfg.sparsity = 0;
        let spec = ExperimentSpec {
            sweep_variable: SweepVariable::Snr,
            sweep_values: vec![20.0],
            trials: 2,
            methods: vec![RecoveryMethod::Bsomp],
            pilot_scheme: PilotScheme::Equidistant,
            pilot_iterations: 0,
            base_config: cfg,
            seed: 1,
        };
        let table = run_experiment(&spec, 1).unwrap();
        let rows = match table {
            ResultTable::Recovery(rows) => rows,
            _ => panic!(),
        };
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.method, "bsomp");
            assert!(row.nmse_db.is_nan(), "failed trial must record a NaN row");
            assert!(!row.support_hit);
        }
    }
}
