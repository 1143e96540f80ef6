//! Superimposed guard-pilot patterns and pilot position optimization.
//!
//! Every transmit antenna places its nonzero pilots on the same `G`
//! subcarriers `S_cen` and is distinguished only by its random ±1 value
//! sequence. Each nonzero pilot is flanked by `D-1` zero guard subcarriers on
//! both sides, so the central `D` received positions of each group are free
//! of data ICI. The derived index sets are
//!
//! ```text
//! S_d = S_cen + d - (D-1)/2  (mod N),   d in [0, D)
//! ```
//!
//! The measurement matrix `Z` stacks `P~^(n_b) [W_L]_{S_cen}` blocks side by
//! side; rearranged by channel tap and flattened (`Z_s`), its mutual
//! coherence is the objective the position optimizers minimize.

use crate::channel::SystemConfig;
use crate::linalg::{cis, CMat, C64};
use crate::rng::{stream, DetRng};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Pilot positions and per-antenna ±1 value sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    n_subcarriers: usize,
    bem_order: usize,
    center_indices: Vec<usize>,
    /// N_B x G, row-major.
    pilot_values: Vec<i8>,
    n_antennas: usize,
}

impl PilotPattern {
    pub fn new(
        n_subcarriers: usize,
        bem_order: usize,
        center_indices: Vec<usize>,
        pilot_values: Vec<Vec<i8>>,
    ) -> Result<Self> {
        if bem_order == 0 || bem_order % 2 == 0 {
            return Err(Error::Parameter("BEM order must be a positive odd integer".into()));
        }
        let mut centers = center_indices;
        centers.sort_unstable();
        let g = centers.len();
        if g == 0 {
            return Err(Error::Parameter("pattern needs at least one pilot group".into()));
        }
        if centers.iter().any(|&s| s >= n_subcarriers) {
            return Err(Error::Parameter("pilot index outside [0, N)".into()));
        }
        let min_dist = min_circular_distance(&centers, n_subcarriers);
        if g > 1 && min_dist < 2 * bem_order - 1 {
            return Err(Error::Parameter(format!(
                "pilot groups overlap: min circular distance {min_dist} < 2D-1 = {}",
                2 * bem_order - 1
            )));
        }
        if pilot_values.is_empty() {
            return Err(Error::Parameter("need at least one pilot value sequence".into()));
        }
        let n_antennas = pilot_values.len();
        let mut flat = Vec::with_capacity(n_antennas * g);
        for row in &pilot_values {
            if row.len() != g {
                return Err(Error::Dimension(format!(
                    "pilot value sequence length {} does not match G={g}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::Parameter("pilot values must be +1 or -1".into()));
            }
            flat.extend_from_slice(row);
        }
        Ok(PilotPattern {
            n_subcarriers,
            bem_order,
            center_indices: centers,
            pilot_values: flat,
            n_antennas,
        })
    }

    /// Equidistant centers plus seeded random signs for `config.n_antennas`.
    pub fn equidistant(config: &SystemConfig, rng_seed: u64) -> Result<Self> {
        let centers = equidistant_positions(
            config.n_subcarriers,
            config.n_groups,
            config.bem_order,
        )?;
        let values = random_sign_sequences(config.n_antennas, config.n_groups, rng_seed);
        PilotPattern::new(config.n_subcarriers, config.bem_order, centers, values)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn bem_order(&self) -> usize {
        self.bem_order
    }

    pub fn n_groups(&self) -> usize {
        self.center_indices.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn center_indices(&self) -> &[usize] {
        &self.center_indices
    }

    #[inline]
    pub fn pilot_value(&self, n_b: usize, g: usize) -> i8 {
        self.pilot_values[n_b * self.n_groups() + g]
    }

    pub fn value_rows(&self) -> Vec<Vec<i8>> {
        (0..self.n_antennas)
            .map(|b| {
                (0..self.n_groups()).map(|g| self.pilot_value(b, g)).collect()
            })
            .collect()
    }

    /// Derived index set S_d = S_cen + d - (D-1)/2 (mod N), in S_cen order.
    pub fn derived_set(&self, d: usize) -> Result<Vec<usize>> {
        if d >= self.bem_order {
            return Err(Error::Parameter(format!(
                "order index {d} outside [0, {})",
                self.bem_order
            )));
        }
        let n = self.n_subcarriers;
        let half = (self.bem_order - 1) / 2;
        Ok(self
            .center_indices
            .iter()
            .map(|&s| (s + d + n - half) % n)
            .collect())
    }

    /// True at every subcarrier inside a pilot group (the nonzero pilot and
    /// its D-1 guards on each side).
    pub fn group_mask(&self) -> Vec<bool> {
        let n = self.n_subcarriers;
        let half = self.bem_order - 1;
        let mut mask = vec![false; n];
        for &s in &self.center_indices {
            for off in 0..=2 * half {
                mask[(s + off + n - half) % n] = true;
            }
        }
        mask
    }

    pub fn min_circular_distance(&self) -> usize {
        min_circular_distance(&self.center_indices, self.n_subcarriers)
    }

    /// Plain-text form: header `N G D N_B`, one line of sorted centers, then
    /// N_B lines of ±1 values. Round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {}\n",
            self.n_subcarriers,
            self.n_groups(),
            self.bem_order,
            self.n_antennas
        );
        let centers: Vec<String> = self.center_indices.iter().map(|s| s.to_string()).collect();
        out.push_str(&centers.join(" "));
        out.push('\n');
        for b in 0..self.n_antennas {
            let row: Vec<String> = (0..self.n_groups())
                .map(|g| {
                    if self.pilot_value(b, g) > 0 {
                        "+1".to_string()
                    } else {
                        "-1".to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parameter("empty pilot pattern".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Parameter(format!("bad header token '{t}'")))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 4 {
            return Err(Error::Parameter("pattern header must be 'N G D N_B'".into()));
        }
        let (n, g, d, n_b) = (nums[0], nums[1], nums[2], nums[3]);
        let centers_line = lines
            .next()
            .ok_or_else(|| Error::Parameter("missing center index line".into()))?;
        let centers: Vec<usize> = centers_line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Parameter(format!("bad center index '{t}'")))
            })
            .collect::<Result<_>>()?;
        if centers.len() != g {
            return Err(Error::Parameter(format!(
                "expected {g} center indices, found {}",
                centers.len()
            )));
        }
        let mut values = Vec::with_capacity(n_b);
        for _ in 0..n_b {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parameter("missing pilot value line".into()))?;
            let row: Vec<i8> = line
                .split_whitespace()
                .map(|t| match t {
                    "+1" | "1" => Ok(1i8),
                    "-1" => Ok(-1i8),
                    _ => Err(Error::Parameter(format!("bad pilot value '{t}'"))),
                })
                .collect::<Result<_>>()?;
            values.push(row);
        }
        PilotPattern::new(n, d, centers, values)
    }
}

fn min_circular_distance(sorted: &[usize], n: usize) -> usize {
    if sorted.len() < 2 {
        return n;
    }
    let mut best = usize::MAX;
    for w in sorted.windows(2) {
        best = best.min(w[1] - w[0]);
    }
    let wrap = sorted[0] + n - sorted[sorted.len() - 1];
    best.min(wrap)
}

/// Equidistant pilot centers: spacing floor(N/G) starting at offset D-1.
pub fn equidistant_positions(n: usize, g: usize, d: usize) -> Result<Vec<usize>> {
    if g == 0 || d == 0 {
        return Err(Error::Parameter("G and D must be positive".into()));
    }
    if g * (2 * d - 1) > n {
        return Err(Error::Parameter(format!(
            "cannot pack {g} groups of width {} into {n} subcarriers",
            2 * d - 1
        )));
    }
    let spacing = n / g;
    Ok((0..g).map(|i| (d - 1) + i * spacing).collect())
}

/// I.i.d. uniform ±1 sequences, one row per antenna.
pub fn random_sign_sequences(n_antennas: usize, g: usize, rng_seed: u64) -> Vec<Vec<i8>> {
    let mut rng = DetRng::derive(rng_seed, &[stream::PILOT_VALUES]);
    (0..n_antennas)
        .map(|_| (0..g).map(|_| rng.next_sign()).collect())
        .collect()
}

/// The block measurement system: `z` (G x N_B L) and its tap-ordered
/// flattened form `z_s` (G N_B x L).
#[derive(Debug, Clone)]
pub struct MeasurementSystem {
    z: CMat,
    z_s: CMat,
    n_antennas: usize,
    channel_length: usize,
}

impl MeasurementSystem {
    pub fn z(&self) -> &CMat {
        &self.z
    }

    pub fn z_s(&self) -> &CMat {
        &self.z_s
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn channel_length(&self) -> usize {
        self.channel_length
    }

    pub fn n_groups(&self) -> usize {
        self.z.rows()
    }

    /// Column indices of `z` belonging to tap `l`: {l, l+L, ..., l+(N_B-1)L}.
    pub fn tap_block_columns(&self, l: usize) -> Vec<usize> {
        (0..self.n_antennas).map(|b| b * self.channel_length + l).collect()
    }

    /// The G x N_B column block of tap `l`.
    pub fn tap_block(&self, l: usize) -> CMat {
        self.z.select_cols(&self.tap_block_columns(l))
    }
}

/// Build the measurement system for a pattern and channel length.
///
/// Column `n_b * L + l` of `z` is the antenna's ±1 sequence times the
/// `S_cen` rows of Fourier column `l` (unnormalized, `exp(-j 2 pi s l / N)`,
/// the scaling consistent with the coefficient definition `h_l = V theta_l`);
/// column `l` of `z_s` stacks that tap's G x N_B block column by column.
pub fn assemble_measurement_matrix(
    pattern: &PilotPattern,
    channel_length: usize,
) -> Result<MeasurementSystem> {
    let n = pattern.n_subcarriers();
    if channel_length == 0 || channel_length > n {
        return Err(Error::Dimension(format!(
            "channel length {channel_length} outside [1, N={n}]"
        )));
    }
    let g = pattern.n_groups();
    let n_b = pattern.n_antennas();
    // rows of F_L at the pilot centers
    let wl = CMat::from_fn(g, channel_length, |gi, l| {
        let s = pattern.center_indices()[gi];
        cis(-2.0 * PI * (s * l) as f64 / n as f64)
    });
    let mut z = CMat::zeros(g, n_b * channel_length);
    for b in 0..n_b {
        for l in 0..channel_length {
            for gi in 0..g {
                z[(gi, b * channel_length + l)] =
                    wl[(gi, l)] * pattern.pilot_value(b, gi) as f64;
            }
        }
    }
    let mut z_s = CMat::zeros(g * n_b, channel_length);
    for l in 0..channel_length {
        for b in 0..n_b {
            for gi in 0..g {
                z_s[(b * g + gi, l)] = z[(gi, b * channel_length + l)];
            }
        }
    }
    Ok(MeasurementSystem { z, z_s, n_antennas: n_b, channel_length })
}

/// Mutual coherence: max over distinct column pairs of
/// `|<a_i, a_j>| / (|a_i| |a_j|)`.
pub fn mutual_coherence(m: &CMat) -> Result<f64> {
    if m.cols() < 2 {
        return Err(Error::DegenerateInput("coherence needs at least two columns".into()));
    }
    let cols = m.cols();
    let norms: Vec<f64> = (0..cols).map(|c| m.col_norm(c)).collect();
    if norms.iter().any(|&x| x == 0.0) {
        return Err(Error::DegenerateInput("zero column in coherence computation".into()));
    }
    let mut best = 0.0f64;
    for i in 0..cols {
        for j in (i + 1)..cols {
            let mut ip = C64::new(0.0, 0.0);
            for r in 0..m.rows() {
                ip += m[(r, i)].conj() * m[(r, j)];
            }
            best = best.max(ip.norm() / (norms[i] * norms[j]));
        }
    }
    Ok(best.min(1.0))
}

fn coherence_for_centers(
    config: &SystemConfig,
    centers: &[usize],
    values: &[Vec<i8>],
) -> Result<f64> {
    let pattern = PilotPattern::new(
        config.n_subcarriers,
        config.bem_order,
        centers.to_vec(),
        values.to_vec(),
    )?;
    let meas = assemble_measurement_matrix(&pattern, config.channel_length)?;
    mutual_coherence(meas.z_s())
}

/// Replace one uniformly-chosen center with a uniform feasible position.
/// Returns None when the bounded retries never find a feasible move.
fn propose_move(
    centers: &[usize],
    n: usize,
    min_dist: usize,
    rng: &mut DetRng,
) -> Option<Vec<usize>> {
    const RETRIES: usize = 64;
    let g = centers.len();
    for _ in 0..RETRIES {
        let pick = rng.next_range(g);
        let candidate = rng.next_range(n);
        let ok = centers.iter().enumerate().all(|(i, &s)| {
            if i == pick {
                return true;
            }
            let diff = candidate.abs_diff(s);
            diff.min(n - diff) >= min_dist
        });
        if ok {
            let mut next = centers.to_vec();
            next[pick] = candidate;
            next.sort_unstable();
            return Some(next);
        }
    }
    None
}

/// One run of the block discrete stochastic pilot search.
#[derive(Debug, Clone)]
pub struct BdsoResult {
    /// Final reported pilot centers.
    pub positions: Vec<usize>,
    /// Coherence of the reported state after each iteration.
    pub reported_mu: Vec<f64>,
    /// Coherence at each accepted search move (strictly decreasing).
    pub accepted_mu: Vec<f64>,
    /// Coherence of the equidistant initialization.
    pub initial_mu: f64,
}

/// Block discrete stochastic optimization of the pilot centers.
///
/// Starting from the equidistant pattern, each iteration proposes a
/// single-element move, accepts it when the candidate's block coherence
/// `mu(Z_s)` is strictly smaller than the current search state's, and tracks
/// state occupation probabilities; the reported pattern switches to the
/// accepted state only once that state's occupation probability overtakes the
/// previously reported one.
pub fn bdso_optimize(
    config: &SystemConfig,
    pilot_values: &[Vec<i8>],
    iterations: usize,
    rng_seed: u64,
) -> Result<BdsoResult> {
    if iterations == 0 {
        return Err(Error::Parameter("iterations must be >= 1".into()));
    }
    config.validate()?;
    if pilot_values.len() != config.n_antennas {
        return Err(Error::Dimension(format!(
            "expected {} pilot value rows, got {}",
            config.n_antennas,
            pilot_values.len()
        )));
    }
    let n = config.n_subcarriers;
    let min_dist = 2 * config.bem_order - 1;
    let mut rng = DetRng::derive(rng_seed, &[stream::BDSO]);

    // search state ~S, its coherence, and the reported state S
    let mut search = equidistant_positions(n, config.n_groups, config.bem_order)?;
    let mut search_mu = coherence_for_centers(config, &search, pilot_values)?;
    let initial_mu = search_mu;
    let mut reported = search.clone();
    let mut reported_mu_now = search_mu;

    // occupation probabilities rho, stored lazily: between reinforcements at
    // iterations a < b the update rho_m = rho_{m-1} (1 - 1/m) scales a state's
    // value by exactly a/b.
    let mut rho: std::collections::HashMap<u64, (f64, u64)> = std::collections::HashMap::new();
    rho.insert(0, (1.0, 0));
    let mut state_i: u64 = 0; // last accepted state
    let mut state_j: u64 = 0; // currently reported state
    let current =
        |rho: &std::collections::HashMap<u64, (f64, u64)>, s: u64, m: u64| -> f64 {
            match rho.get(&s) {
                Some(&(v, last)) => v * last as f64 / m as f64,
                None => 0.0,
            }
        };

    let mut reported_mu = Vec::with_capacity(iterations);
    let mut accepted_mu = Vec::new();

    for m in 1..=iterations as u64 {
        // Reformulation: candidate from a single-element change
        if let Some(candidate) = propose_move(&search, n, min_dist, &mut rng) {
            // Conversion + Calculation: compare candidate vs current coherence
            let cand_mu = coherence_for_centers(config, &candidate, pilot_values)?;
            let cur_mu = coherence_for_centers(config, &search, pilot_values)?;
            if cand_mu < cur_mu {
                search = candidate;
                search_mu = cand_mu;
                state_i = m + 1;
                accepted_mu.push(cand_mu);
            }
        }
        // Probability: rho_m = rho_{m-1} + (1/m)(T_i - rho_{m-1})
        let reinforced = current(&rho, state_i, m) + 1.0 / m as f64;
        rho.insert(state_i, (reinforced, m));
        // Update: report the state with the larger occupation probability
        if state_i != state_j && current(&rho, state_i, m) > current(&rho, state_j, m) {
            reported = search.clone();
            reported_mu_now = search_mu;
            state_j = state_i;
        }
        reported_mu.push(reported_mu_now);
    }

    Ok(BdsoResult { positions: reported, reported_mu, accepted_mu, initial_mu })
}

/// Genetic-search baseline configuration (fixed plumbing constants).
const GA_POPULATION: usize = 20;
const GA_TOURNAMENT: usize = 2;
const GA_MUTATION_PROB: f64 = 0.05;

/// One run of the genetic pilot search baseline.
#[derive(Debug, Clone)]
pub struct GaResult {
    pub positions: Vec<usize>,
    /// Best coherence after initialization and after each generation.
    pub best_mu: Vec<f64>,
    pub initial_mu: f64,
}

fn random_feasible_centers(n: usize, g: usize, min_dist: usize, rng: &mut DetRng) -> Vec<usize> {
    const RETRIES: usize = 200;
    for _ in 0..RETRIES {
        let cand = rng.sample_distinct_sorted(n, g);
        if min_circular_distance(&cand, n) >= min_dist {
            return cand;
        }
    }
    // dense fallback: jitter the equidistant layout inside its slack
    let spacing = n / g;
    let slack = spacing.saturating_sub(min_dist);
    (0..g)
        .map(|i| (i * spacing + if slack > 0 { rng.next_range(slack + 1) } else { 0 }) % n)
        .collect::<Vec<_>>()
}

fn repair_spacing(child: &mut Vec<usize>, n: usize, min_dist: usize, rng: &mut DetRng) -> bool {
    const RETRIES: usize = 80;
    child.sort_unstable();
    child.dedup();
    'outer: for _ in 0..RETRIES {
        if child.len() < 2 {
            return false;
        }
        for i in 0..child.len() {
            let next = (i + 1) % child.len();
            let diff = if next == 0 {
                child[0] + n - child[i]
            } else {
                child[next] - child[i]
            };
            if diff < min_dist {
                // re-draw the offender and restart the scan
                let replacement = rng.next_range(n);
                child.remove(i);
                let ok = child.iter().all(|&s| {
                    let d = replacement.abs_diff(s);
                    d.min(n - d) >= min_dist
                });
                if ok {
                    child.push(replacement);
                }
                child.sort_unstable();
                child.dedup();
                continue 'outer;
            }
        }
        return true;
    }
    false
}

/// Genetic-algorithm pilot search: tournament selection, single-point
/// crossover on the sorted index lists with spacing repair, per-index
/// mutation, one elite survivor. Minimizes `mu(Z_s)`.
pub fn ga_optimize(
    config: &SystemConfig,
    pilot_values: &[Vec<i8>],
    generations: usize,
    rng_seed: u64,
) -> Result<GaResult> {
    config.validate()?;
    if pilot_values.len() != config.n_antennas {
        return Err(Error::Dimension(format!(
            "expected {} pilot value rows, got {}",
            config.n_antennas,
            pilot_values.len()
        )));
    }
    let n = config.n_subcarriers;
    let g = config.n_groups;
    let min_dist = 2 * config.bem_order - 1;
    let mut rng = DetRng::derive(rng_seed, &[stream::GA]);

    let mut population: Vec<Vec<usize>> = (0..GA_POPULATION)
        .map(|_| random_feasible_centers(n, g, min_dist, &mut rng))
        .collect();
    let mut scores: Vec<f64> = population
        .iter()
        .map(|c| coherence_for_centers(config, c, pilot_values))
        .collect::<Result<_>>()?;

    let best_index = |scores: &[f64]| {
        scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    };
    let mut best = best_index(&scores);
    let initial_mu = scores[best];
    let mut best_centers = population[best].clone();
    let mut best_score = scores[best];
    let mut best_mu = vec![best_score];

    for _gen in 0..generations {
        let mut next_pop = vec![best_centers.clone()];
        while next_pop.len() < GA_POPULATION {
            let tournament = |rng: &mut DetRng| -> usize {
                let mut winner = rng.next_range(GA_POPULATION);
                for _ in 1..GA_TOURNAMENT {
                    let rival = rng.next_range(GA_POPULATION);
                    if scores[rival] < scores[winner] {
                        winner = rival;
                    }
                }
                winner
            };
            let p1 = &population[tournament(&mut rng)];
            let p2 = &population[tournament(&mut rng)];
            let cut = 1 + rng.next_range(g - 1);
            let mut child: Vec<usize> = p1[..cut].to_vec();
            child.extend_from_slice(&p2[cut..]);
            // top up if crossover produced duplicates
            child.sort_unstable();
            child.dedup();
            while child.len() < g {
                child.push(rng.next_range(n));
                child.sort_unstable();
                child.dedup();
            }
            for i in 0..child.len() {
                if rng.next_f64() < GA_MUTATION_PROB {
                    child[i] = rng.next_range(n);
                }
            }
            if !repair_spacing(&mut child, n, min_dist, &mut rng) || child.len() != g {
                child = p1.clone();
            }
            next_pop.push(child);
        }
        population = next_pop;
        scores = population
            .iter()
            .map(|c| coherence_for_centers(config, c, pilot_values))
            .collect::<Result<_>>()?;
        best = best_index(&scores);
        if scores[best] < best_score {
            best_score = scores[best];
            best_centers = population[best].clone();
        }
        best_mu.push(best_score);
    }

    Ok(GaResult { positions: best_centers, best_mu, initial_mu })
}
