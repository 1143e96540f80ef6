//! Complex-exponential basis expansion model (CE-BEM).
//!
//! A doubly-selective channel tap varies over the `N` samples of one OFDM
//! symbol. The CE-BEM compresses that variation into `D` coefficients per tap
//! using the basis columns
//!
//! ```text
//! v_d[n] = exp(j 2 pi n (d - (D-1)/2) / N),   d in [0, D), n in [0, N)
//! ```
//!
//! so a length-`N` tap trajectory `h_l` becomes `h_l ~= V theta_l`. This
//! module builds the basis, fits coefficients by least squares, and converts
//! coefficient matrices to time- and frequency-domain channel matrices.

use crate::linalg::{cis, dft_matrix, dft_padded, unitary_dft, CMat, C64, ZERO};
use crate::{Error, Result};
use std::f64::consts::PI;

/// The N x D CE-BEM basis matrix `V` with columns `v_d`.
#[derive(Debug, Clone)]
pub struct BemBasis {
    n_subcarriers: usize,
    order: usize,
    matrix: CMat,
}

impl BemBasis {
    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Basis entry v_d[n].
    #[inline]
    pub fn value(&self, n: usize, d: usize) -> C64 {
        self.matrix[(n, d)]
    }

    /// Basis column v_d.
    pub fn column(&self, d: usize) -> Vec<C64> {
        self.matrix.col(d)
    }

    /// Integer frequency offset of column d: d - (D-1)/2.
    pub fn column_frequency(&self, d: usize) -> i64 {
        d as i64 - (self.order as i64 - 1) / 2
    }
}

/// Build the CE-BEM basis for `n_subcarriers` samples and odd `order`.
pub fn build_cebem_basis(n_subcarriers: usize, order: usize) -> Result<BemBasis> {
    if n_subcarriers == 0 {
        return Err(Error::Parameter("n_subcarriers must be positive".into()));
    }
    if order == 0 || order % 2 == 0 {
        return Err(Error::Parameter(format!(
            "BEM order must be a positive odd integer, got {order}"
        )));
    }
    if order > n_subcarriers {
        return Err(Error::Parameter(format!(
            "BEM order {order} exceeds the number of subcarriers {n_subcarriers}"
        )));
    }
    let half = (order as i64 - 1) / 2;
    let n = n_subcarriers as f64;
    let matrix = CMat::from_fn(n_subcarriers, order, |row, d| {
        let k = d as i64 - half;
        cis(2.0 * PI * row as f64 * k as f64 / n)
    });
    Ok(BemBasis { n_subcarriers, order, matrix })
}

/// Least-squares fit of BEM coefficients for one tap trajectory.
///
/// Because the CE-BEM columns are orthogonal with squared norm `N`, the
/// minimizer of `|h - V theta|` is `theta = V^H h / N`.
pub fn fit_bem_coefficients(tap_series: &[C64], basis: &BemBasis) -> Result<Vec<C64>> {
    let n = basis.n_subcarriers;
    if tap_series.len() != n {
        return Err(Error::Dimension(format!(
            "tap series length {} does not match basis size {}",
            tap_series.len(),
            n
        )));
    }
    let scale = 1.0 / n as f64;
    Ok((0..basis.order)
        .map(|d| {
            tap_series
                .iter()
                .enumerate()
                .map(|(row, &h)| basis.value(row, d).conj() * h)
                .sum::<C64>()
                * scale
        })
        .collect())
}

/// Block-sparse BEM coefficient matrix for all antennas.
///
/// `data` is (N_B * L) x D; row `n_b * L + l` column `d` holds the order-`d`
/// coefficient of tap `l` at transmit antenna `n_b`. All rows whose tap index
/// is outside `support` are zero.
#[derive(Debug, Clone)]
pub struct BemCoefficients {
    n_antennas: usize,
    channel_length: usize,
    order: usize,
    data: CMat,
    support: Vec<usize>,
}

impl BemCoefficients {
    pub fn new(
        n_antennas: usize,
        channel_length: usize,
        order: usize,
        data: CMat,
        support: Vec<usize>,
    ) -> Result<Self> {
        if data.rows() != n_antennas * channel_length || data.cols() != order {
            return Err(Error::Dimension(format!(
                "coefficient matrix is {}x{}, expected {}x{}",
                data.rows(),
                data.cols(),
                n_antennas * channel_length,
                order
            )));
        }
        if support.iter().any(|&l| l >= channel_length) {
            return Err(Error::Parameter("support index outside [0, L)".into()));
        }
        let mut support = support;
        support.sort_unstable();
        support.dedup();
        let c = BemCoefficients { n_antennas, channel_length, order, data, support };
        for row in 0..c.data.rows() {
            let tap = row % channel_length;
            if !c.support.contains(&tap) {
                for d in 0..order {
                    if c.data[(row, d)] != ZERO {
                        return Err(Error::Parameter(format!(
                            "nonzero coefficient at tap {tap} outside the support"
                        )));
                    }
                }
            }
        }
        Ok(c)
    }

    pub fn zeros(n_antennas: usize, channel_length: usize, order: usize) -> Self {
        BemCoefficients {
            n_antennas,
            channel_length,
            order,
            data: CMat::zeros(n_antennas * channel_length, order),
            support: Vec::new(),
        }
    }

    /// Random block-sparse coefficients on the given support, unit-variance
    /// complex Gaussian entries. Test and demo helper.
    pub fn random_on_support(
        n_antennas: usize,
        channel_length: usize,
        order: usize,
        support: &[usize],
        rng: &mut crate::rng::DetRng,
    ) -> Self {
        let mut data = CMat::zeros(n_antennas * channel_length, order);
        for n_b in 0..n_antennas {
            for &l in support {
                for d in 0..order {
                    data[(n_b * channel_length + l, d)] = rng.next_complex_gaussian(1.0);
                }
            }
        }
        let mut support = support.to_vec();
        support.sort_unstable();
        BemCoefficients { n_antennas, channel_length, order, data, support }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn channel_length(&self) -> usize {
        self.channel_length
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn data(&self) -> &CMat {
        &self.data
    }

    /// theta^{(n_b)}[d, l]
    #[inline]
    pub fn theta(&self, n_b: usize, d: usize, l: usize) -> C64 {
        self.data[(n_b * self.channel_length + l, d)]
    }

    /// The L x D coefficient block of one antenna.
    pub fn antenna_block(&self, n_b: usize) -> CMat {
        CMat::from_fn(self.channel_length, self.order, |l, d| self.theta(n_b, d, l))
    }

    /// Relative Frobenius error against another coefficient matrix.
    pub fn rel_error(&self, truth: &BemCoefficients) -> f64 {
        let diff = self.data.sub(&truth.data).fro_norm();
        let scale = truth.data.fro_norm();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// Time-domain channel matrix from one antenna's L x D coefficient block.
///
/// `H_t[p, q] = h[p, (p - q) mod N]` with `h[n, l] = sum_d v_d[n] theta[d, l]`
/// and zero modeling error.
pub fn bem_to_time_channel(coeffs: &CMat, basis: &BemBasis) -> Result<CMat> {
    let n = basis.n_subcarriers;
    let l_len = coeffs.rows();
    let d_len = coeffs.cols();
    if l_len > n {
        return Err(Error::Dimension(format!(
            "channel length {l_len} exceeds the number of subcarriers {n}"
        )));
    }
    if d_len != basis.order {
        return Err(Error::Dimension(format!(
            "coefficient block has {d_len} orders, basis has {}",
            basis.order
        )));
    }
    // h[n][l]
    let mut h = CMat::zeros(n, l_len);
    for row in 0..n {
        for l in 0..l_len {
            let mut acc = ZERO;
            for d in 0..d_len {
                acc += basis.value(row, d) * coeffs[(l, d)];
            }
            h[(row, l)] = acc;
        }
    }
    let mut ht = CMat::zeros(n, n);
    for p in 0..n {
        for l in 0..l_len {
            let q = (p + n - l) % n;
            ht[(p, q)] = h[(p, l)];
        }
    }
    Ok(ht)
}

/// Frequency-domain channel matrix: `H_f = W H_t W^H` with the unitary DFT.
pub fn time_to_freq_channel(h_time: &CMat) -> Result<CMat> {
    let n = h_time.rows();
    if h_time.cols() != n {
        return Err(Error::Dimension(format!(
            "channel matrix must be square, got {}x{}",
            h_time.rows(),
            h_time.cols()
        )));
    }
    // W H: forward transform of each column; (W H) W^H: inverse transform of
    // each row, both with unitary scaling.
    let mut out = h_time.clone();
    for c in 0..n {
        let col = unitary_dft(&out.col(c));
        out.set_col(c, &col);
    }
    let scale = 1.0 / (n as f64).sqrt();
    for r in 0..n {
        let row = out.row_mut(r);
        crate::linalg::fft_inverse(row);
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

/// Frequency-domain channel matrix built directly from BEM coefficients:
/// `H_f = sum_d V_d Theta_d` with `V_d = W diag(v_d) W^H` and
/// `Theta_d = diag(F_L theta_d)`, where `F_L` holds the unnormalized Fourier
/// columns `exp(-j 2 pi m l / N)`. That scaling is the one consistent with
/// the coefficient definition `h_l = V theta_l`; the unitary factors stay
/// with the outer symbol transforms.
///
/// This reference construction multiplies the DFT matrices out explicitly;
/// it exists as an independent route for consistency checks against
/// [`bem_to_time_channel`] + [`time_to_freq_channel`].
pub fn bem_freq_channel(coeffs: &CMat, basis: &BemBasis) -> Result<CMat> {
    let n = basis.n_subcarriers;
    let l_len = coeffs.rows();
    if l_len > n {
        return Err(Error::Dimension(format!(
            "channel length {l_len} exceeds the number of subcarriers {n}"
        )));
    }
    if coeffs.cols() != basis.order {
        return Err(Error::Dimension(format!(
            "coefficient block has {} orders, basis has {}",
            coeffs.cols(),
            basis.order
        )));
    }
    let w = dft_matrix(n);
    let wh = w.adjoint();
    let mut hf = CMat::zeros(n, n);
    for d in 0..basis.order {
        let fl_theta = dft_padded(&coeffs.col(d), n);
        // V_d = W diag(v_d) W^H
        let diag_v = CMat::from_fn(n, n, |r, c| if r == c { basis.value(r, d) } else { ZERO });
        let v_d = w.mul(&diag_v).mul(&wh);
        // V_d * diag(fl_theta): scale columns
        let term = CMat::from_fn(n, n, |r, c| v_d[(r, c)] * fl_theta[c]);
        hf = hf.add(&term);
    }
    Ok(hf)
}
