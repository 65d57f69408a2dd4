//! Cosine-modulated pseudo-QMF analysis bank design.
//!
//! An M-band bank is built from one linear-phase lowpass prototype p of
//! length N by cosine modulation:
//!
//! ```text
//! h_i[k] = 2·p[k]·cos( (2i−1)·(π/(2M))·(k − (N−1)/2) + (−1)^i·π/4 ),  i = 1..M
//! ```
//!
//! followed by scaling every column to unit Euclidean norm. The prototype
//! is a Kaiser-windowed sinc fixed by a deterministic two-stage search:
//! for each Kaiser β on a coarse grid the sinc cutoff is bisected until
//! the band-edge power ratio |P(π/2M)|²/|P(0)|² sits a hair above one
//! half (so the edge response stays within 3 dB of DC), and the β kept is
//! the smallest whose stopband shoulder |P(π/M)|² clears a safety
//! threshold while the bank's power-complementarity residual stays under
//! a cap.
//!
//! The shoulder threshold is what keeps band peaks in place. Each band
//! response is the sum of two images of the prototype centered at
//! ±(2i−1)π/2M, and for the outermost bands those images meet at ω = 0
//! (or π) where the ±π/4 modulation phases make them add exactly in
//! phase. With edge ratio r the endpoint response is 2r·|P(0)|², already
//! above the main image alone, while the in-band maximum is lifted to
//! about (1+s)·|P(0)|² by the neighboring image's shoulder s =
//! |P(π/M)|²/|P(0)|². Requiring s ≥ 2r−1 plus margin keeps every band's
//! maximum at its modulation frequency instead of letting it migrate to
//! the spectrum edge; the smallest such β also has the deepest stopband
//! the constraint admits. Banks designed at (M, N) = (2,16), (4,30),
//! (8,60) come out with residuals near 6e-3, shoulders near −22 dB, and
//! band peaks within a third of their nominal slot width.
//!
//! M = 1 is the fullband identity bank [1].

use crate::linalg::Mat;
use std::f64::consts::PI;
use std::fmt;

/// Grid size for the residual objective during the β search.
const SEARCH_GRID: usize = 1024;
/// Grid size used by [`validate_bank`].
const VALIDATE_GRID: usize = 4096;
/// Target for |P(π/2M)|²/|P(0)|² during cutoff calibration: just above
/// half power, so the band-edge response sits within 3 dB of DC.
const EDGE_POWER_RATIO: f64 = 0.5012;
/// Slack added to the endpoint-safety bound s ≥ 2r−1 on the stopband
/// shoulder (see the module docs); without it the edge bands' peaks sit
/// exactly at the tipping point between the band center and ω = 0/π.
const SHOULDER_MARGIN: f64 = 0.003;
/// Feasibility bound on the power-complementarity residual during the β
/// search.
const RESIDUAL_CAP: f64 = 0.045;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterbankError {
    /// (num_bands, filter_len) outside {(1,1)} ∪ {M ≥ 2, N ≥ 4M}: the
    /// prototype would be too short to realize the π/(2M) cutoff.
    InvalidBankGeometry { num_bands: usize, filter_len: usize },
}

impl fmt::Display for FilterbankError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterbankError::InvalidBankGeometry { num_bands, filter_len } => write!(
                f,
                "invalid bank geometry: {num_bands} bands with filter length {filter_len} \
                 (need length 1 for 1 band, or at least 4x the band count)"
            ),
        }
    }
}

impl std::error::Error for FilterbankError {}

/// M-channel analysis filter bank. Column i of `h` is the i-th band's
/// FIR filter; columns have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBank {
    num_bands: usize,
    filter_len: usize,
    h: Mat,
}

impl AnalysisBank {
    /// Designs the bank for `num_bands` bands with `filter_len`-tap filters:
    /// prototype design followed by cosine modulation.
    pub fn design(num_bands: usize, filter_len: usize) -> Result<Self, FilterbankError> {
        let p = design_prototype(num_bands, filter_len)?;
        Ok(modulate(&p, num_bands))
    }

    /// H = I_M: each band filter is a unit impulse. This is the bank that
    /// turns the subband update into an affine-projection (PtAPA) update.
    pub fn identity_embedding(m: usize) -> Self {
        let mut h = Mat::zeros(m, m);
        for i in 0..m {
            h.set(i, i, 1.0);
        }
        AnalysisBank { num_bands: m, filter_len: m, h }
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// N×M bank matrix.
    pub fn h(&self) -> &Mat {
        &self.h
    }

    /// Band i's filter taps.
    pub fn filter(&self, band: usize) -> &[f64] {
        self.h.col(band)
    }

    /// True when the bank matrix is an identity embedding (PtAPA form).
    pub fn is_identity_embedding(&self) -> bool {
        if self.filter_len != self.num_bands {
            return false;
        }
        for i in 0..self.num_bands {
            for k in 0..self.filter_len {
                let want = if i == k { 1.0 } else { 0.0 };
                if self.h.get(k, i) != want {
                    return false;
                }
            }
        }
        true
    }
}

/// Zeroth-order modified Bessel function of the first kind, by its power
/// series. Converges fast for the argument range of Kaiser windows.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc prototype with cutoff ω_c = alpha·π/(2M).
/// Computed on the left half and mirrored, so p[k] == p[N−1−k] exactly.
fn windowed_sinc(num_bands: usize, filter_len: usize, beta: f64, alpha: f64) -> Vec<f64> {
    let n = filter_len;
    let center = (n - 1) as f64 / 2.0;
    let cutoff = alpha * PI / (2.0 * num_bands as f64);
    let i0_beta = bessel_i0(beta);
    let mut p = vec![0.0; n];
    for k in 0..(n + 1) / 2 {
        let x = k as f64 - center;
        let sinc = if x == 0.0 { cutoff / PI } else { (cutoff * x).sin() / (PI * x) };
        let r = x / center;
        let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
        let v = sinc * window;
        p[k] = v;
        p[n - 1 - k] = v;
    }
    p
}

/// |Σ_k v[k]·e^{−jωk}|².
fn power_at(v: &[f64], omega: f64) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (k, &vk) in v.iter().enumerate() {
        let phase = omega * k as f64;
        re += vk * phase.cos();
        im -= vk * phase.sin();
    }
    re * re + im * im
}

/// Bisects the cutoff scale so the prototype's band-edge power ratio hits
/// [`EDGE_POWER_RATIO`].
fn calibrate_cutoff(num_bands: usize, filter_len: usize, beta: f64) -> f64 {
    let edge = PI / (2.0 * num_bands as f64);
    let mut lo = 0.5;
    let mut hi = 3.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let p = windowed_sinc(num_bands, filter_len, beta, mid);
        let ratio = power_at(&p, edge) / power_at(&p, 0.0);
        if ratio < EDGE_POWER_RATIO {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stopband shoulder s = |P(π/M)|²/|P(0)|²: the prototype's leakage at
/// the point where the two images of an edge band meet its in-band peak.
fn shoulder_ratio(p: &[f64], num_bands: usize) -> f64 {
    power_at(p, PI / num_bands as f64) / power_at(p, 0.0)
}

/// Power-complementarity residual of a bank on a `grid`-point frequency
/// grid over [0, π]: max |total(ω) − mean| / mean for
/// total(ω) = Σ_i |H_i(e^{jω})|².
fn residual_on_grid(bank: &AnalysisBank, grid: usize) -> f64 {
    let m = bank.num_bands;
    let mut totals = vec![0.0; grid];
    for i in 0..m {
        let col = bank.h.col(i);
        for (j, t) in totals.iter_mut().enumerate() {
            let omega = PI * j as f64 / (grid - 1) as f64;
            *t += power_at(col, omega);
        }
    }
    let mean = totals.iter().sum::<f64>() / grid as f64;
    let max_dev = totals.iter().map(|t| (t - mean).abs()).fold(0.0, f64::max);
    max_dev / mean
}

/// Designs the lowpass prototype for an M-band bank.
///
/// For M = 1 returns [1]. Otherwise runs the β grid search described in the
/// module docs and returns the best windowed sinc. Deterministic: identical
/// arguments give identical coefficients.
pub fn design_prototype(num_bands: usize, filter_len: usize) -> Result<Vec<f64>, FilterbankError> {
    if num_bands == 1 && filter_len == 1 {
        return Ok(vec![1.0]);
    }
    if num_bands < 2 || filter_len < 4 * num_bands {
        return Err(FilterbankError::InvalidBankGeometry { num_bands, filter_len });
    }
    // The shoulder grows with β once the widening mainlobe reaches π/M, so
    // the first β clearing the endpoint-safety bound is also the deepest
    // stopband the bound admits. The minimum-residual design is kept as a
    // fallback so pathological (M, N) combinations still return their best
    // effort for `validate_bank` to judge.
    let safe = 2.0 * EDGE_POWER_RATIO - 1.0 + SHOULDER_MARGIN;
    let mut flattest: Option<(f64, Vec<f64>)> = None;
    for step in 0..=36 {
        let beta = 3.0 + 0.25 * step as f64;
        let alpha = calibrate_cutoff(num_bands, filter_len, beta);
        let p = windowed_sinc(num_bands, filter_len, beta, alpha);
        let r = residual_on_grid(&modulate(&p, num_bands), SEARCH_GRID);
        if r <= RESIDUAL_CAP && shoulder_ratio(&p, num_bands) >= safe {
            return Ok(p);
        }
        if flattest.as_ref().is_none_or(|(best, _)| r < *best) {
            flattest = Some((r, p));
        }
    }
    Ok(flattest.unwrap().1)
}

/// Cosine-modulates a prototype into an M-band analysis bank and scales
/// each column to unit norm. For M = 1 returns the identity bank
/// regardless of the prototype.
pub fn modulate(prototype: &[f64], num_bands: usize) -> AnalysisBank {
    if num_bands == 1 {
        return AnalysisBank {
            num_bands: 1,
            filter_len: 1,
            h: Mat::from_col_major(1, 1, &[1.0]).unwrap(),
        };
    }
    let n = prototype.len();
    let m = num_bands;
    let center = (n - 1) as f64 / 2.0;
    let mut h = Mat::zeros(n, m);
    for i in 1..=m {
        let freq = (2 * i - 1) as f64 * PI / (2.0 * m as f64);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let col = h.col_mut(i - 1);
        for (k, hk) in col.iter_mut().enumerate() {
            let phase = freq * (k as f64 - center) + sign * PI / 4.0;
            *hk = 2.0 * prototype[k] * phase.cos();
        }
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for hk in col.iter_mut() {
            *hk /= norm;
        }
    }
    AnalysisBank { num_bands: m, filter_len: n, h }
}

/// Frequency-domain health check of a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankReport {
    /// max_ω |Σ_i |H_i(e^{jω})|² − mean| / mean on a 4096-point grid.
    pub power_complementarity_residual: f64,
    /// Per-band magnitude-response peak locations in [0, π], band order.
    pub band_peak_frequencies: Vec<f64>,
}

/// Measures power complementarity and band-peak placement on a 4096-point
/// frequency grid.
pub fn validate_bank(bank: &AnalysisBank) -> BankReport {
    let grid = VALIDATE_GRID;
    let m = bank.num_bands;
    let mut totals = vec![0.0; grid];
    let mut peaks = vec![0.0; m];
    for i in 0..m {
        let col = bank.h.col(i);
        let mut best = (0usize, f64::NEG_INFINITY);
        for (j, t) in totals.iter_mut().enumerate() {
            let omega = PI * j as f64 / (grid - 1) as f64;
            let p = power_at(col, omega);
            *t += p;
            if p > best.1 {
                best = (j, p);
            }
        }
        peaks[i] = PI * best.0 as f64 / (grid - 1) as f64;
    }
    let mean = totals.iter().sum::<f64>() / grid as f64;
    let max_dev = totals.iter().map(|t| (t - mean).abs()).fold(0.0, f64::max);
    BankReport {
        power_complementarity_residual: if mean == 0.0 { 0.0 } else { max_dev / mean },
        band_peak_frequencies: peaks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fullband_prototype_is_unit_impulse() {
        assert_eq!(design_prototype(1, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn short_filters_are_rejected() {
        let err = design_prototype(8, 31).unwrap_err();
        assert_eq!(err, FilterbankError::InvalidBankGeometry { num_bands: 8, filter_len: 31 });
        assert!(design_prototype(1, 5).is_err());
        assert!(design_prototype(0, 1).is_err());
    }

    #[test]
    fn prototype_is_exactly_symmetric() {
        let p = design_prototype(2, 16).unwrap();
        for k in 0..16 {
            assert_eq!(p[k], p[15 - k], "asymmetry at tap {k}");
        }
    }

    #[test]
    fn prototype_band_edge_and_stopband_levels() {
        // Calibration puts the band edge within 3 dB of DC, and the β
        // search still buys a real stopband with it: the shoulder at π/M
        // has to clear the endpoint-safety bound, which lands it around
        // −22 dB rather than arbitrarily deep.
        let p = design_prototype(8, 60).unwrap();
        let dc = power_at(&p, 0.0);
        let edge_db = 10.0 * (power_at(&p, PI / 16.0) / dc).log10();
        let stop_db = 10.0 * (power_at(&p, PI / 8.0) / dc).log10();
        assert!(
            edge_db > -3.0 && edge_db < 0.0,
            "band edge {edge_db} dB not within 3 dB of DC"
        );
        assert!(stop_db < -20.0, "stopband only {stop_db} dB down at pi/8");
    }

    #[test]
    fn fullband_bank_is_identity() {
        let bank = modulate(&[0.3, 0.3], 1);
        assert_eq!(bank.num_bands(), 1);
        assert_eq!(bank.filter_len(), 1);
        assert_eq!(bank.filter(0), &[1.0]);
    }

    #[test]
    fn columns_are_unit_norm() {
        for (m, n) in [(2usize, 16usize), (4, 30), (8, 60)] {
            let bank = AnalysisBank::design(m, n).unwrap();
            for i in 0..m {
                let norm2: f64 = bank.filter(i).iter().map(|x| x * x).sum();
                assert!((norm2 - 1.0).abs() < 1e-12, "band {i} of M={m} has norm² {norm2}");
            }
        }
    }

    #[test]
    fn two_band_peaks_fall_in_their_half_bands() {
        let bank = AnalysisBank::design(2, 16).unwrap();
        let report = validate_bank(&bank);
        let [low, high] = report.band_peak_frequencies[..] else { panic!() };
        assert!(low > 0.0 && low < PI / 2.0, "low band peaks at {low}");
        assert!(high > PI / 2.0 && high < PI, "high band peaks at {high}");
    }

    #[test]
    fn fullband_bank_validates_flat() {
        let report = validate_bank(&AnalysisBank::identity_embedding(1));
        assert_eq!(report.power_complementarity_residual, 0.0);
        assert_eq!(report.band_peak_frequencies, vec![0.0]);
    }

    #[test]
    fn identity_embedding_is_power_complementary() {
        let report = validate_bank(&AnalysisBank::identity_embedding(4));
        assert!(report.power_complementarity_residual < 1e-12);
    }

    #[test]
    fn designed_banks_are_power_complementary_with_ordered_peaks() {
        for (m, n) in [(2usize, 16usize), (4, 30), (8, 60)] {
            let bank = AnalysisBank::design(m, n).unwrap();
            let report = validate_bank(&bank);
            assert!(
                report.power_complementarity_residual <= 0.05,
                "M={m}: residual {}",
                report.power_complementarity_residual
            );
            let tol = PI / (4.0 * m as f64);
            for (i, &peak) in report.band_peak_frequencies.iter().enumerate() {
                let nominal = (2 * i + 1) as f64 * PI / (2.0 * m as f64);
                assert!(
                    (peak - nominal).abs() <= tol,
                    "M={m} band {i}: peak {peak} vs nominal {nominal}"
                );
                if i > 0 {
                    assert!(peak > report.band_peak_frequencies[i - 1], "peaks not increasing");
                }
            }
        }
    }

    #[test]
    fn design_is_deterministic() {
        let a = AnalysisBank::design(4, 30).unwrap();
        let b = AnalysisBank::design(4, 30).unwrap();
        assert_eq!(a, b);
    }
}


