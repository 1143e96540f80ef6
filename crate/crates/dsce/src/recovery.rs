//! Estimators for the block-distributed sparse pilot system.
//!
//! The received pilots form a G x D observation matrix `Y_blocks` related to
//! the stacked BEM coefficients by `Y_blocks = Z Lambda + noise`, where
//! `Lambda` is block sparse (whole antenna blocks per active tap) with a
//! support common to every BEM order. Solvers here range from plain least
//! squares (ignores sparsity) through SOMP (common support only) to block
//! SOMP (block + common support), plus the uplink joint estimator where all
//! receive antennas share one pilot sequence.

use crate::bem::{BemBasis, BemCoefficients};
use crate::channel::TapSeries;
use crate::linalg::{lstsq, pinv, CMat, C64, ZERO};
use crate::pilot::{MeasurementSystem, PilotPattern};
use crate::{Error, Result};

/// Residual-threshold secondary exit for the greedy solvers, relative to the
/// observation norm.
const GREEDY_RESIDUAL_TOL: f64 = 1e-8;

/// NMSE floor in dB so logs stay finite when the error is exactly zero.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Received pilot observations: column `d` holds the entries of the received
/// symbol at the derived index set `S_d`, in `S_cen` order.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    y_blocks: CMat,
    pub noise_variance: f64,
}

impl ObservationSet {
    pub fn new(y_blocks: CMat) -> Self {
        ObservationSet { y_blocks, noise_variance: 0.0 }
    }

    pub fn with_noise_variance(mut self, v: f64) -> Self {
        self.noise_variance = v;
        self
    }

    pub fn y_blocks(&self) -> &CMat {
        &self.y_blocks
    }

    pub fn n_groups(&self) -> usize {
        self.y_blocks.rows()
    }

    pub fn order(&self) -> usize {
        self.y_blocks.cols()
    }
}

/// Gather the G x D pilot observation matrix from one received symbol.
pub fn extract_pilot_observations(
    received: &[C64],
    pattern: &PilotPattern,
) -> Result<ObservationSet> {
    if received.len() != pattern.n_subcarriers() {
        return Err(Error::Dimension(format!(
            "received symbol has {} entries, pattern expects {}",
            received.len(),
            pattern.n_subcarriers()
        )));
    }
    let g = pattern.n_groups();
    let d_len = pattern.bem_order();
    let mut y = CMat::zeros(g, d_len);
    for d in 0..d_len {
        let set = pattern.derived_set(d)?;
        for (gi, &idx) in set.iter().enumerate() {
            y[(gi, d)] = received[idx];
        }
    }
    Ok(ObservationSet::new(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMethod {
    Ls,
    Somp,
    Bsomp,
    UplinkDcs,
}

impl RecoveryMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryMethod::Ls => "ls",
            RecoveryMethod::Somp => "somp",
            RecoveryMethod::Bsomp => "bsomp",
            RecoveryMethod::UplinkDcs => "uplink_dcs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ls" => Some(RecoveryMethod::Ls),
            "somp" => Some(RecoveryMethod::Somp),
            "bsomp" => Some(RecoveryMethod::Bsomp),
            "uplink_dcs" => Some(RecoveryMethod::UplinkDcs),
            _ => None,
        }
    }
}

impl std::fmt::Display for RecoveryMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output of one estimator run.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub coeffs: BemCoefficients,
    /// Estimated tap support, ascending.
    pub support: Vec<usize>,
    /// Final Frobenius residual of the fitted system.
    pub residual_norm: f64,
    pub method: RecoveryMethod,
    /// Frobenius residual after each greedy refit (starts at the observation
    /// norm). Length 1 for non-iterative methods.
    pub residual_trace: Vec<f64>,
}

/// Greedy simultaneous column pursuit over the columns of `a`.
///
/// Per iteration the column maximizing the summed normalized residual
/// correlation is selected (ties break toward the lowest index), followed by
/// a joint least-squares refit over all selected columns against every
/// observation column. Stops at `max_select` columns, at the relative
/// residual tolerance, or when the dictionary is exhausted.
fn somp_core(
    a: &CMat,
    y: &CMat,
    max_select: usize,
) -> (Vec<usize>, CMat, f64, Vec<f64>) {
    let total = a.cols();
    let norms: Vec<f64> = (0..total).map(|c| a.col_norm(c)).collect();
    let y_norm = y.fro_norm();
    let mut residual = y.clone();
    let mut selected: Vec<usize> = Vec::new();
    let mut in_set = vec![false; total];
    let mut coeffs_sel = CMat::zeros(0, y.cols());
    let mut trace = vec![y_norm];
    let mut res_norm = y_norm;

    while selected.len() < max_select.min(total) && res_norm > GREEDY_RESIDUAL_TOL * y_norm {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..total {
            if in_set[c] || norms[c] <= 1e-300 {
                continue;
            }
            let mut score = 0.0;
            for j in 0..residual.cols() {
                let mut ip = ZERO;
                for r in 0..a.rows() {
                    ip += a[(r, c)].conj() * residual[(r, j)];
                }
                score += ip.norm();
            }
            score /= norms[c];
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((c, score)),
            }
        }
        let (col, score) = match best {
            Some(b) => b,
            None => break,
        };
        if score <= 1e-300 {
            break; // residual orthogonal to every remaining column
        }
        selected.push(col);
        in_set[col] = true;
        let a_sel = a.select_cols(&selected);
        coeffs_sel = lstsq(&a_sel, y);
        residual = y.sub(&a_sel.mul(&coeffs_sel));
        res_norm = residual.fro_norm();
        trace.push(res_norm);
    }

    let mut full = CMat::zeros(total, y.cols());
    for (si, &c) in selected.iter().enumerate() {
        for j in 0..y.cols() {
            full[(c, j)] = coeffs_sel[(si, j)];
        }
    }
    (selected, full, res_norm, trace)
}

fn coeffs_from_full(
    full: &CMat,
    n_antennas: usize,
    channel_length: usize,
    order: usize,
    support: Vec<usize>,
) -> Result<BemCoefficients> {
    BemCoefficients::new(n_antennas, channel_length, order, full.clone(), support)
}

/// Plain least squares: `Lambda = pinv(Z) Y_blocks`, minimum-norm when the
/// system is underdetermined. Ignores sparsity; the support is every tap.
pub fn solve_ls(obs: &ObservationSet, meas: &MeasurementSystem) -> RecoveryResult {
    let z = meas.z();
    let lambda = pinv(z, 1e-10).mul(obs.y_blocks());
    let residual = obs.y_blocks().sub(&z.mul(&lambda)).fro_norm();
    let support: Vec<usize> = (0..meas.channel_length()).collect();
    let coeffs = BemCoefficients::new(
        meas.n_antennas(),
        meas.channel_length(),
        obs.order(),
        lambda,
        support.clone(),
    )
    .expect("full-support coefficients are always consistent");
    RecoveryResult {
        coeffs,
        support,
        residual_norm: residual,
        method: RecoveryMethod::Ls,
        residual_trace: vec![residual],
    }
}

/// Simultaneous OMP over the individual columns of `Z`.
///
/// Exploits the common support across the D observation columns but not the
/// block structure: columns of distinct antennas are selected independently,
/// with a budget of `sparsity_cols * N_B` selections.
pub fn somp(
    obs: &ObservationSet,
    meas: &MeasurementSystem,
    sparsity_cols: usize,
) -> Result<RecoveryResult> {
    let total = meas.z().cols();
    if sparsity_cols == 0 || sparsity_cols > total {
        return Err(Error::Parameter(format!(
            "sparsity {sparsity_cols} outside [1, {total}]"
        )));
    }
    if obs.n_groups() != meas.n_groups() {
        return Err(Error::Dimension("observation/measurement group mismatch".into()));
    }
    let budget = (sparsity_cols * meas.n_antennas()).min(total);
    let (cols, full, residual, trace) = somp_core(meas.z(), obs.y_blocks(), budget);
    let l = meas.channel_length();
    let mut support: Vec<usize> = cols.iter().map(|c| c % l).collect();
    support.sort_unstable();
    support.dedup();
    let coeffs = coeffs_from_full(&full, meas.n_antennas(), l, obs.order(), support.clone())?;
    Ok(RecoveryResult {
        coeffs,
        support,
        residual_norm: residual,
        method: RecoveryMethod::Somp,
        residual_trace: trace,
    })
}

/// Block SOMP over whole tap blocks of `Z`.
///
/// Per iteration the tap block `l` maximizing `|Z_{A_l}^H R|_F` is selected,
/// all `N_B` columns of that tap enter the joint least-squares refit at once,
/// and the residual is updated; `sparsity_blocks` iterations enforce the block
/// and common sparsity simultaneously.
pub fn bsomp(
    obs: &ObservationSet,
    meas: &MeasurementSystem,
    sparsity_blocks: usize,
) -> Result<RecoveryResult> {
    let l_total = meas.channel_length();
    if sparsity_blocks == 0 || sparsity_blocks > l_total {
        return Err(Error::Parameter(format!(
            "block sparsity {sparsity_blocks} outside [1, {l_total}]"
        )));
    }
    if obs.n_groups() != meas.n_groups() {
        return Err(Error::Dimension("observation/measurement group mismatch".into()));
    }
    let z = meas.z();
    let y = obs.y_blocks();
    let y_norm = y.fro_norm();
    let mut residual = y.clone();
    let mut support: Vec<usize> = Vec::new();
    let mut in_set = vec![false; l_total];
    let mut cols_sel: Vec<usize> = Vec::new();
    let mut coeffs_sel = CMat::zeros(0, y.cols());
    let mut trace = vec![y_norm];
    let mut res_norm = y_norm;

    for _ in 0..sparsity_blocks {
        if res_norm <= GREEDY_RESIDUAL_TOL * y_norm {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for l in 0..l_total {
            if in_set[l] {
                continue;
            }
            let mut score = 0.0;
            for &c in &meas.tap_block_columns(l) {
                for j in 0..residual.cols() {
                    let mut ip = ZERO;
                    for r in 0..z.rows() {
                        ip += z[(r, c)].conj() * residual[(r, j)];
                    }
                    score += ip.norm_sqr();
                }
            }
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((l, score)),
            }
        }
        let (l_pick, score) = match best {
            Some(b) => b,
            None => break,
        };
        if score <= 1e-300 {
            break;
        }
        support.push(l_pick);
        in_set[l_pick] = true;
        cols_sel.extend(meas.tap_block_columns(l_pick));
        let a_sel = z.select_cols(&cols_sel);
        coeffs_sel = lstsq(&a_sel, y);
        residual = y.sub(&a_sel.mul(&coeffs_sel));
        res_norm = residual.fro_norm();
        trace.push(res_norm);
    }

    let mut full = CMat::zeros(z.cols(), y.cols());
    for (si, &c) in cols_sel.iter().enumerate() {
        for j in 0..y.cols() {
            full[(c, j)] = coeffs_sel[(si, j)];
        }
    }
    support.sort_unstable();
    let coeffs = coeffs_from_full(
        &full,
        meas.n_antennas(),
        l_total,
        obs.order(),
        support.clone(),
    )?;
    Ok(RecoveryResult {
        coeffs,
        support,
        residual_norm: res_norm,
        method: RecoveryMethod::Bsomp,
        residual_trace: trace,
    })
}

/// Uplink joint estimator: all receive antennas share one pilot sequence, so
/// their D observation columns stack against the single SISO-style matrix
/// `P~' [W_L]_{S_cen}` and SOMP recovers one common support for everyone.
///
/// Returns one single-antenna result per receive antenna, split from the
/// joint solution.
pub fn uplink_dcs_estimate(
    per_antenna_obs: &[ObservationSet],
    pattern: &PilotPattern,
    channel_length: usize,
    sparsity: usize,
) -> Result<Vec<RecoveryResult>> {
    if per_antenna_obs.is_empty() {
        return Err(Error::Parameter("need at least one antenna observation".into()));
    }
    if pattern.n_antennas() != 1 {
        return Err(Error::Parameter(
            "uplink estimation expects a single shared pilot sequence".into(),
        ));
    }
    if sparsity == 0 || sparsity > channel_length {
        return Err(Error::Parameter(format!(
            "sparsity {sparsity} outside [1, {channel_length}]"
        )));
    }
    let g = pattern.n_groups();
    let d_len = pattern.bem_order();
    for obs in per_antenna_obs {
        if obs.n_groups() != g || obs.order() != d_len {
            return Err(Error::Dimension("observation shape mismatch across antennas".into()));
        }
    }
    let meas = crate::pilot::assemble_measurement_matrix(pattern, channel_length)?;
    let a = meas.z(); // G x L (single antenna)
    let n_rx = per_antenna_obs.len();
    // stack all antennas' observation columns side by side
    let y = CMat::from_fn(g, n_rx * d_len, |r, c| {
        per_antenna_obs[c / d_len].y_blocks()[(r, c % d_len)]
    });
    let (cols, full, _residual, trace) = somp_core(a, &y, sparsity);
    let mut support = cols;
    support.sort_unstable();

    let mut results = Vec::with_capacity(n_rx);
    for b in 0..n_rx {
        let block = CMat::from_fn(channel_length, d_len, |l, d| full[(l, b * d_len + d)]);
        let coeffs = BemCoefficients::new(1, channel_length, d_len, block, support.clone())?;
        // per-antenna residual over its own D columns
        let yb = per_antenna_obs[b].y_blocks();
        let fitted = a.mul(coeffs.data());
        let res = yb.sub(&fitted).fro_norm();
        results.push(RecoveryResult {
            coeffs,
            support: support.clone(),
            residual_norm: res,
            method: RecoveryMethod::UplinkDcs,
            residual_trace: trace.clone(),
        });
    }
    Ok(results)
}

/// Replace each active tap's time evolution with the straight line through
/// its first- and second-half means.
///
/// The half means `m1 = (2/N) sum_{n < N/2} h[n]` and
/// `m2 = (2/N) sum_{n >= N/2} h[n]` sit at the half-sample centroids
/// `(N-2)/4` and `(3N-2)/4`, so the fitted line has slope
/// `(m2 - m1) / (N/2)`. Exactly linear trajectories are fixed points and the
/// operation is idempotent. Taps outside the support pass through untouched.
pub fn linear_smoothing(taps: &TapSeries, support: &[usize]) -> Result<TapSeries> {
    let n = taps.n_time();
    if n % 4 != 0 {
        return Err(Error::Parameter(format!(
            "linear smoothing needs N divisible by 4, got {n}"
        )));
    }
    if support.iter().any(|&l| l >= taps.n_taps()) {
        return Err(Error::Parameter("support index outside [0, L)".into()));
    }
    let mut out = taps.clone();
    let half = n / 2;
    let centroid = (n as f64 - 2.0) / 4.0;
    for n_b in 0..taps.n_antennas() {
        for &l in support {
            let mut m1 = ZERO;
            let mut m2 = ZERO;
            for t in 0..half {
                m1 += taps.at(n_b, t, l);
            }
            for t in half..n {
                m2 += taps.at(n_b, t, l);
            }
            m1 *= 2.0 / n as f64;
            m2 *= 2.0 / n as f64;
            let slope = (m2 - m1) / (half as f64);
            for t in 0..n {
                *out.at_mut(n_b, t, l) = m1 + slope * (t as f64 - centroid);
            }
        }
    }
    Ok(out)
}

/// Rebuild the per-tap time series from estimated BEM coefficients:
/// `h^{(n_b)}[n, l] = sum_d v_d[n] theta^{(n_b)}[d, l]`.
pub fn reconstruct_channel(coeffs: &BemCoefficients, basis: &BemBasis) -> Result<TapSeries> {
    if coeffs.order() != basis.order() {
        return Err(Error::Dimension(format!(
            "coefficient order {} does not match basis order {}",
            coeffs.order(),
            basis.order()
        )));
    }
    if coeffs.channel_length() > basis.n_subcarriers() {
        return Err(Error::Dimension("channel length exceeds basis size".into()));
    }
    let n = basis.n_subcarriers();
    let mut taps = TapSeries::zeros(coeffs.n_antennas(), n, coeffs.channel_length());
    for n_b in 0..coeffs.n_antennas() {
        for &l in coeffs.support() {
            for t in 0..n {
                let mut acc = ZERO;
                for d in 0..coeffs.order() {
                    acc += basis.value(t, d) * coeffs.theta(n_b, d, l);
                }
                *taps.at_mut(n_b, t, l) = acc;
            }
        }
    }
    Ok(taps)
}

/// Normalized mean square error in dB: `10 log10(|est - truth|^2 / |truth|^2)`,
/// floored at [`NMSE_FLOOR_DB`].
pub fn nmse(estimate: &TapSeries, truth: &TapSeries) -> Result<f64> {
    if !estimate.same_shape(truth) {
        return Err(Error::Dimension("NMSE operands have different shapes".into()));
    }
    let denom = truth.total_energy();
    if denom == 0.0 {
        return Err(Error::DegenerateInput("NMSE reference is identically zero".into()));
    }
    let mut num = 0.0;
    for n_b in 0..truth.n_antennas() {
        for t in 0..truth.n_time() {
            for l in 0..truth.n_taps() {
                num += (estimate.at(n_b, t, l) - truth.at(n_b, t, l)).norm_sqr();
            }
        }
    }
    if num == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * (num / denom).log10()).max(NMSE_FLOOR_DB))
}

/// One Monte-Carlo result record.
#[derive(Debug, Clone)]
pub struct ResultRow {
    /// Method label; smoothed variants carry an `_li` suffix.
    pub method: String,
    pub seed: u64,
    pub snr_db: f64,
    pub doppler_norm: f64,
    pub n_antennas: usize,
    pub sparsity: usize,
    pub nmse_db: f64,
    pub support_hit: bool,
    pub runtime_ms: f64,
}

pub const CSV_HEADER: &str =
    "method,seed,snr_db,doppler_norm,n_antennas,k,nmse_db,support_hit,runtime_ms";

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.seed,
            self.snr_db,
            self.doppler_norm,
            self.n_antennas,
            self.sparsity,
            self.nmse_db,
            self.support_hit as u8,
            self.runtime_ms
        )
    }
}
