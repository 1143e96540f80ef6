//! Sparse doubly-selective channel generation.
//!
//! Channels are FIR filters of length `L` whose `K` active taps are shared by
//! every transmit antenna (common support). Each active tap of each antenna
//! evolves over the OFDM symbol as an independent Jakes-type sum-of-sinusoids
//! process whose Doppler spread follows from the configured vehicle speed and
//! carrier. Tap powers follow the ITU Vehicular B profile, strongest first.

use crate::bem::{BemBasis, BemCoefficients};
use crate::linalg::{cis, C64, ZERO};
use crate::rng::{stream, DetRng};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Number of sinusoids in the Jakes-type fading generator.
const JAKES_SINUSOIDS: usize = 16;

/// All scalar system parameters.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    /// Subcarriers per OFDM symbol (N).
    pub n_subcarriers: usize,
    /// Pilot groups (G).
    pub n_groups: usize,
    /// BEM order (D, odd).
    pub bem_order: usize,
    /// Channel length in taps (L).
    pub channel_length: usize,
    /// Active taps (K).
    pub sparsity: usize,
    /// Transmit antennas (N_B).
    pub n_antennas: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub speed_mps: f64,
    pub snr_db: f64,
    pub max_antenna_spacing_m: f64,
}

impl SystemConfig {
    /// Desk-scale defaults: N=512, G=24, D=3, L=50, K=4, N_B=8 at 2.35 GHz /
    /// 20 MHz and 300 km/h. Pilot overhead G(2D-1)/N matches the 23.4%
    /// operating point of the full-size system.
    pub fn desk_scale() -> Self {
        SystemConfig {
            n_subcarriers: 512,
            n_groups: 24,
            bem_order: 3,
            channel_length: 50,
            sparsity: 4,
            n_antennas: 8,
            carrier_hz: 2.35e9,
            bandwidth_hz: 20e6,
            speed_mps: 300.0 / 3.6,
            snr_db: 30.0,
            max_antenna_spacing_m: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0
            || self.n_groups == 0
            || self.channel_length == 0
            || self.n_antennas == 0
        {
            return Err(Error::Parameter("N, G, L and N_B must be positive".into()));
        }
        if self.bem_order == 0 || self.bem_order % 2 == 0 {
            return Err(Error::Parameter(format!(
                "BEM order must be a positive odd integer, got {}",
                self.bem_order
            )));
        }
        if self.sparsity > self.channel_length {
            return Err(Error::Parameter(format!(
                "sparsity K={} exceeds channel length L={}",
                self.sparsity, self.channel_length
            )));
        }
        if self.n_groups * (2 * self.bem_order - 1) > self.n_subcarriers {
            return Err(Error::Parameter(format!(
                "pilot groups do not fit: G(2D-1) = {} > N = {}",
                self.n_groups * (2 * self.bem_order - 1),
                self.n_subcarriers
            )));
        }
        if self.channel_length > self.n_subcarriers {
            return Err(Error::Parameter(format!(
                "channel length L={} exceeds N={}",
                self.channel_length, self.n_subcarriers
            )));
        }
        if self.carrier_hz <= 0.0 || self.bandwidth_hz <= 0.0 {
            return Err(Error::Parameter("carrier and bandwidth must be positive".into()));
        }
        if self.speed_mps < 0.0 {
            return Err(Error::Parameter("speed must be non-negative".into()));
        }
        if self.max_antenna_spacing_m <= 0.0 {
            return Err(Error::Parameter("antenna spacing must be positive".into()));
        }
        Ok(())
    }

    /// Common-support condition: the array aperture must be small against the
    /// inverse bandwidth, s_max / c <= 1 / (10 BW).
    pub fn common_support_condition_ok(&self) -> bool {
        self.max_antenna_spacing_m / SPEED_OF_LIGHT <= 1.0 / (10.0 * self.bandwidth_hz)
    }

    /// Maximum Doppler shift f_d = v f_c / c in Hz.
    pub fn max_doppler_hz(&self) -> f64 {
        self.speed_mps * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Normalized Doppler: cycles of fading per OFDM symbol, f_d N / BW.
    pub fn normalized_doppler(&self) -> f64 {
        self.max_doppler_hz() * self.n_subcarriers as f64 / self.bandwidth_hz
    }

    /// Set the speed that produces the requested normalized Doppler.
    pub fn with_normalized_doppler(mut self, nu: f64) -> Self {
        let f_d = nu * self.bandwidth_hz / self.n_subcarriers as f64;
        self.speed_mps = f_d * SPEED_OF_LIGHT / self.carrier_hz;
        self
    }

    /// Pilot overhead ratio G(2D-1)/N.
    pub fn pilot_overhead(&self) -> f64 {
        (self.n_groups * (2 * self.bem_order - 1)) as f64 / self.n_subcarriers as f64
    }
}

/// Per-antenna, per-sample, per-tap channel gains, indexed [antenna][time][tap].
#[derive(Debug, Clone, PartialEq)]
pub struct TapSeries {
    n_antennas: usize,
    n_time: usize,
    n_taps: usize,
    data: Vec<C64>,
}

impl TapSeries {
    pub fn zeros(n_antennas: usize, n_time: usize, n_taps: usize) -> Self {
        TapSeries { n_antennas, n_time, n_taps, data: vec![ZERO; n_antennas * n_time * n_taps] }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_taps(&self) -> usize {
        self.n_taps
    }

    #[inline]
    pub fn at(&self, n_b: usize, n: usize, l: usize) -> C64 {
        self.data[(n_b * self.n_time + n) * self.n_taps + l]
    }

    #[inline]
    pub fn at_mut(&mut self, n_b: usize, n: usize, l: usize) -> &mut C64 {
        &mut self.data[(n_b * self.n_time + n) * self.n_taps + l]
    }

    /// One tap's trajectory over the symbol, h^{(n_b)}[., l].
    pub fn tap_trajectory(&self, n_b: usize, l: usize) -> Vec<C64> {
        (0..self.n_time).map(|n| self.at(n_b, n, l)).collect()
    }

    /// Energy of one tap across the symbol.
    pub fn tap_energy(&self, n_b: usize, l: usize) -> f64 {
        (0..self.n_time).map(|n| self.at(n_b, n, l).norm_sqr()).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn same_shape(&self, other: &TapSeries) -> bool {
        self.n_antennas == other.n_antennas
            && self.n_time == other.n_time
            && self.n_taps == other.n_taps
    }
}

/// A generated channel: tap gains plus the common support and its tap powers.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub taps: TapSeries,
    pub support: Vec<usize>,
    pub tap_powers: Vec<f64>,
}

/// Draw `sparsity` distinct tap positions uniformly from [0, channel_length).
pub fn draw_common_support(
    channel_length: usize,
    sparsity: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    if sparsity > channel_length {
        return Err(Error::Parameter(format!(
            "sparsity K={sparsity} exceeds channel length L={channel_length}"
        )));
    }
    let mut rng = DetRng::derive(rng_seed, &[stream::SUPPORT]);
    Ok(rng.sample_distinct_sorted(channel_length, sparsity))
}

/// ITU Vehicular B relative tap powers in dB, strongest channel first after
/// sorting: the profile is (-2.5, 0, -12.8, -10.0, -25.2, -16.0) dB.
const ITU_VB_POWERS_DB: [f64; 6] = [-2.5, 0.0, -12.8, -10.0, -25.2, -16.0];

/// Normalized tap powers for `k` active taps.
///
/// For k <= 6 the k strongest ITU Vehicular B taps are used; beyond 6, the
/// extra taps share the mean profile power. The result sums to 1.
pub fn itu_vehicular_b_tap_powers(k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let mut linear: Vec<f64> = ITU_VB_POWERS_DB.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    linear.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mean = linear.iter().sum::<f64>() / linear.len() as f64;
    let mut powers: Vec<f64> = (0..k).map(|i| if i < 6 { linear[i] } else { mean }).collect();
    let total: f64 = powers.iter().sum();
    for p in powers.iter_mut() {
        *p /= total;
    }
    powers
}

/// Generate one doubly-selective channel realization on the given support.
///
/// Every active tap of every antenna is an independent complex sum of
/// [`JAKES_SINUSOIDS`] sinusoids with uniformly random arrival angles and
/// phases, giving variance `tap_powers[k]` and Doppler-limited time variation
/// up to `f_d = v f_c / c`. Inactive taps are exactly zero.
///
/// Violating the common-support spacing condition is reported on stderr but
/// does not abort, so the assumption itself can be probed in experiments.
pub fn generate_ds_channel(
    config: &SystemConfig,
    support: &[usize],
    rng_seed: u64,
) -> Result<ChannelRealization> {
    config.validate()?;
    if support.iter().any(|&l| l >= config.channel_length) {
        return Err(Error::Parameter("support index outside [0, L)".into()));
    }
    if !config.common_support_condition_ok() {
        eprintln!(
            "warning: antenna spacing {} m violates the common-support condition s_max/c <= 1/(10 BW)",
            config.max_antenna_spacing_m
        );
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();

    let n = config.n_subcarriers;
    let f_d = config.max_doppler_hz();
    let ts = 1.0 / config.bandwidth_hz;
    let tap_powers = itu_vehicular_b_tap_powers(support.len());
    let mut taps = TapSeries::zeros(config.n_antennas, n, config.channel_length);

    for n_b in 0..config.n_antennas {
        for (k_idx, &l) in support.iter().enumerate() {
            let mut rng = DetRng::derive(rng_seed, &[stream::CHANNEL, n_b as u64, l as u64]);
            let amp = (tap_powers[k_idx] / JAKES_SINUSOIDS as f64).sqrt();
            let osc: Vec<(f64, f64)> = (0..JAKES_SINUSOIDS)
                .map(|_| {
                    let arrival = 2.0 * PI * rng.next_f64();
                    let phase = 2.0 * PI * rng.next_f64();
                    (2.0 * PI * f_d * arrival.cos(), phase)
                })
                .collect();
            for time in 0..n {
                let t = time as f64 * ts;
                let mut acc = ZERO;
                for &(omega, phase) in &osc {
                    acc += cis(omega * t + phase);
                }
                *taps.at_mut(n_b, time, l) = acc * amp;
            }
        }
    }

    Ok(ChannelRealization { taps, support, tap_powers })
}

/// Channel with zero BEM modeling error: h^{(n_b)}[n, l] = sum_d v_d[n] theta^{(n_b)}[d, l].
///
/// Tap powers are the empirical per-tap energies, normalized.
pub fn exact_bem_channel(coeffs: &BemCoefficients, basis: &BemBasis) -> Result<ChannelRealization> {
    if coeffs.channel_length() > basis.n_subcarriers() {
        return Err(Error::Dimension(format!(
            "channel length {} exceeds basis size {}",
            coeffs.channel_length(),
            basis.n_subcarriers()
        )));
    }
    if coeffs.order() != basis.order() {
        return Err(Error::Dimension(format!(
            "coefficient order {} does not match basis order {}",
            coeffs.order(),
            basis.order()
        )));
    }
    let n = basis.n_subcarriers();
    let mut taps = TapSeries::zeros(coeffs.n_antennas(), n, coeffs.channel_length());
    for n_b in 0..coeffs.n_antennas() {
        for &l in coeffs.support() {
            for time in 0..n {
                let mut acc = ZERO;
                for d in 0..coeffs.order() {
                    acc += basis.value(time, d) * coeffs.theta(n_b, d, l);
                }
                *taps.at_mut(n_b, time, l) = acc;
            }
        }
    }
    let support = coeffs.support().to_vec();
    let mut tap_powers: Vec<f64> = support
        .iter()
        .map(|&l| (0..coeffs.n_antennas()).map(|b| taps.tap_energy(b, l)).sum::<f64>())
        .collect();
    let total: f64 = tap_powers.iter().sum();
    if total > 0.0 {
        for p in tap_powers.iter_mut() {
            *p /= total;
        }
    } else if !tap_powers.is_empty() {
        let uniform = 1.0 / tap_powers.len() as f64;
        for p in tap_powers.iter_mut() {
            *p = uniform;
        }
    }
    Ok(ChannelRealization { taps, support, tap_powers })
}

impl ChannelRealization {
    /// Write the realization as CSV: a dimension header, the support and tap
    /// powers, then one `re,im` line per gain in antenna-major, time-major,
    /// tap-minor order. Floats use the shortest round-trippable form, so a
    /// read-back is bit exact.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "antennas,{},time,{},taps,{}",
            self.taps.n_antennas, self.taps.n_time, self.taps.n_taps
        )?;
        let support: Vec<String> = self.support.iter().map(|l| l.to_string()).collect();
        writeln!(w, "support,{}", support.join(","))?;
        let powers: Vec<String> = self.tap_powers.iter().map(|p| p.to_string()).collect();
        writeln!(w, "tap_powers,{}", powers.join(","))?;
        for n_b in 0..self.taps.n_antennas {
            for n in 0..self.taps.n_time {
                for l in 0..self.taps.n_taps {
                    let c = self.taps.at(n_b, n, l);
                    writeln!(w, "{},{}", c.re, c.im)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parameter("empty channel dump".into()))??;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 6 || parts[0] != "antennas" || parts[2] != "time" || parts[4] != "taps" {
            return Err(Error::Parameter("bad channel dump header".into()));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parameter(format!("bad integer '{s}' in channel dump")))
        };
        let n_antennas = parse_usize(parts[1])?;
        let n_time = parse_usize(parts[3])?;
        let n_taps = parse_usize(parts[5])?;

        let support_line = lines
            .next()
            .ok_or_else(|| Error::Parameter("missing support line".into()))??;
        let mut support = Vec::new();
        for tok in support_line.split(',').skip(1).filter(|t| !t.is_empty()) {
            support.push(parse_usize(tok)?);
        }
        let powers_line = lines
            .next()
            .ok_or_else(|| Error::Parameter("missing tap_powers line".into()))??;
        let mut tap_powers = Vec::new();
        for tok in powers_line.split(',').skip(1).filter(|t| !t.is_empty()) {
            tap_powers.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("bad float '{tok}'")))?,
            );
        }

        let mut taps = TapSeries::zeros(n_antennas, n_time, n_taps);
        for n_b in 0..n_antennas {
            for n in 0..n_time {
                for l in 0..n_taps {
                    let line = lines
                        .next()
                        .ok_or_else(|| Error::Parameter("truncated channel dump".into()))??;
                    let mut it = line.split(',');
                    let re: f64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parameter("bad gain line".into()))?;
                    let im: f64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parameter("bad gain line".into()))?;
                    *taps.at_mut(n_b, n, l) = C64::new(re, im);
                }
            }
        }
        Ok(ChannelRealization { taps, support, tap_powers })
    }
}
