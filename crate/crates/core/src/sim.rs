//! System-identification experiment runner.
//!
//! A run drives an unknown target system with an AR(1) excitation,
//! observes `d(n) = u(n)ᵀ s₀ + v(n)`, and feeds the same input/desired
//! pair to an adaptive filter. Ensembles average the squared a priori
//! error over independently seeded runs and report the curve in dB,
//! normalized so the first sample sits at exactly 0 dB.
//!
//! Seeding is arranged for common random numbers across configurations:
//! the input and noise of run `i` depend only on `(master_seed, i)`, so
//! two algorithms compared under one master seed see identical signals.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::adaptive::{AdaptiveError, AdaptiveFilter, FilterConfig};
use crate::signals::{
    self, Ar1Config, NoiseConfig, SignalError, TargetKind, TargetOptions, TargetSystem,
    STREAM_INPUT, STREAM_NOISE, STREAM_TARGET,
};

/// Trailing-window length (samples) for threshold-crossing detection.
pub const THRESHOLD_WINDOW: usize = 200;

#[derive(Debug)]
pub enum SimError {
    /// An `ExperimentConfig` invariant does not hold.
    InvalidExperiment { reason: &'static str },
    /// The ensemble average is non-positive or non-finite somewhere, so
    /// the dB curve would not be finite.
    DegenerateCurve { sample: usize },
    Signal(SignalError),
    Adaptive(AdaptiveError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidExperiment { reason } => {
                write!(f, "invalid experiment config: {reason}")
            }
            SimError::DegenerateCurve { sample } => {
                write!(f, "ensemble mean at sample {sample} has no finite dB value")
            }
            SimError::Signal(e) => write!(f, "signal generation failed: {e}"),
            SimError::Adaptive(e) => write!(f, "adaptive engine failed: {e}"),
        }
    }
}

impl std::error::Error for SimError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SimError::Signal(e) => Some(e),
            SimError::Adaptive(e) => Some(e),
            _ => None,
        }
    }
}

impl From<SignalError> for SimError {
    fn from(e: SignalError) -> Self {
        SimError::Signal(e)
    }
}

impl From<AdaptiveError> for SimError {
    fn from(e: AdaptiveError) -> Self {
        SimError::Adaptive(e)
    }
}

/// What to identify: a generated target class with its seed policy, or a
/// fixed externally supplied impulse response.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Generate from `kind` with `gen_target_custom`. With
    /// `ExperimentConfig::new_target_per_run` the seed is derived per run
    /// from the master seed; otherwise `seed` is used as-is, giving one
    /// fixed system across the whole ensemble.
    Generated { kind: TargetKind, seed: u64, options: TargetOptions },
    /// Use these taps verbatim in every run (e.g. a measured IR).
    Fixed(TargetSystem),
}

impl TargetSpec {
    pub fn generated(kind: TargetKind, seed: u64) -> Self {
        TargetSpec::Generated { kind, seed, options: TargetOptions::default() }
    }

    fn realize(&self, num_taps: usize, master_seed: u64, run_index: u64, per_run: bool) -> TargetSystem {
        match self {
            TargetSpec::Generated { kind, seed, options } => {
                let seed = if per_run {
                    signals::derive_stream_seed(master_seed, STREAM_TARGET, run_index)
                } else {
                    *seed
                };
                signals::gen_target_custom(*kind, num_taps, seed, *options)
            }
            TargetSpec::Fixed(sys) => sys.clone(),
        }
    }
}

/// Full description of a Monte-Carlo experiment.
///
/// `input` and `noise` act as templates: their `seed` fields are ignored
/// and replaced by per-run seeds derived from `master_seed`, and the
/// input `length` is ignored in favor of `num_samples` (plus the
/// pre-history described at [`run_single`]). A noise variance of exactly
/// zero is accepted and yields noiseless runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub filter: FilterConfig,
    pub input: Ar1Config,
    pub noise: NoiseConfig,
    pub num_runs: usize,
    pub num_samples: usize,
    pub master_seed: u64,
    pub new_target_per_run: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.filter.validate()?;
        if self.num_runs == 0 {
            return Err(SimError::InvalidExperiment { reason: "num_runs must be at least 1" });
        }
        let min = self.filter.num_taps + self.filter.bank.filter_len();
        if self.num_samples < min {
            return Err(SimError::InvalidExperiment {
                reason: "num_samples must be at least L + N",
            });
        }
        if !(self.input.rho >= 0.0 && self.input.rho < 1.0) {
            return Err(SignalError::InvalidRho { rho: self.input.rho }.into());
        }
        if !(self.noise.variance >= 0.0) {
            return Err(SignalError::InvalidVariance { variance: self.noise.variance }.into());
        }
        if let TargetSpec::Fixed(sys) = &self.target {
            if sys.len() != self.filter.num_taps {
                return Err(SimError::InvalidExperiment {
                    reason: "fixed target length must equal the filter length",
                });
            }
        }
        Ok(())
    }
}

/// Ensemble-averaged squared a priori error in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct MseCurve {
    /// One value per sample; `values_db[0] == 0.0` exactly.
    pub values_db: Vec<f64>,
    /// `10·log₁₀ σ_v²` under the same normalization, i.e. where a fully
    /// converged filter would settle on this plot.
    pub floor_db: f64,
}

/// One run's squared a priori error sequence, deterministic in
/// `(cfg.master_seed, run_index)`.
///
/// The target system is driven by the input's full past: the last L−1
/// burn-in samples (fewer if `burn_in` is smaller) are kept as
/// pre-history for the desired-signal convolution, so `d(0)` already
/// carries full signal power. The adaptive filter itself starts from
/// zeroed taps and histories; it never sees the pre-history.
///
/// The AR(1) process is scaled by sqrt(1−rho²) to unit power so the 0 dB
/// normalization point is comparable across rho values.
pub fn run_single(cfg: &ExperimentConfig, run_index: u64) -> Result<Vec<f64>, SimError> {
    cfg.validate()?;
    let num_taps = cfg.filter.num_taps;
    let target = cfg.target.realize(num_taps, cfg.master_seed, run_index, cfg.new_target_per_run);

    // Split the configured burn-in: the tail doubles as pre-history.
    let pre = cfg.input.burn_in.min(num_taps - 1);
    let input_cfg = Ar1Config {
        rho: cfg.input.rho,
        length: cfg.num_samples + pre,
        burn_in: cfg.input.burn_in - pre,
        seed: signals::derive_stream_seed(cfg.master_seed, STREAM_INPUT, run_index),
    };
    let raw = signals::gen_ar1(&input_cfg)?;
    let scale = (1.0 - cfg.input.rho * cfg.input.rho).sqrt();

    // drive[num_taps-1 + n] = u(n); earlier entries are the pre-history,
    // zero-padded when burn_in < L−1.
    let mut drive = vec![0.0; num_taps - 1 + cfg.num_samples];
    for (k, &x) in raw.iter().enumerate() {
        drive[num_taps - 1 - pre + k] = x * scale;
    }

    let noise = if cfg.noise.variance == 0.0 {
        vec![0.0; cfg.num_samples]
    } else {
        let noise_cfg = NoiseConfig {
            variance: cfg.noise.variance,
            seed: signals::derive_stream_seed(cfg.master_seed, STREAM_NOISE, run_index),
        };
        signals::gen_noise(&noise_cfg, cfg.num_samples)?
    };

    let mut filter = AdaptiveFilter::new(cfg.filter.clone())?;
    let mut out = vec![0.0; cfg.num_samples];
    for n in 0..cfg.num_samples {
        let u_n = drive[num_taps - 1 + n];
        let mut d_n = noise[n];
        for (k, &s_k) in target.taps.iter().enumerate() {
            d_n += s_k * drive[num_taps - 1 + n - k];
        }
        let e = filter.step(u_n, d_n)?;
        out[n] = e * e;
    }
    Ok(out)
}

// Pairwise-tree elementwise sum over the run dimension. The reduction
// shape depends only on the run count, so the ensemble average is
// bitwise identical for any thread count or scheduling order.
fn tree_sum(runs: &[Vec<f64>]) -> Vec<f64> {
    match runs.len() {
        1 => runs[0].clone(),
        2 => runs[0].iter().zip(&runs[1]).map(|(a, b)| a + b).collect(),
        n => {
            let (lo, hi) = runs.split_at(n / 2);
            let mut acc = tree_sum(lo);
            for (a, b) in acc.iter_mut().zip(tree_sum(hi)) {
                *a += b;
            }
            acc
        }
    }
}

/// Runs `cfg.num_runs` independent runs (in parallel when a rayon pool
/// with more than one thread is active) and reduces them to an
/// [`MseCurve`].
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<MseCurve, SimError> {
    cfg.validate()?;
    let runs: Vec<Vec<f64>> = (0..cfg.num_runs as u64)
        .into_par_iter()
        .map(|i| run_single(cfg, i))
        .collect::<Result<_, _>>()?;
    let sum = tree_sum(&runs);
    let inv = 1.0 / cfg.num_runs as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s * inv).collect();

    let reference = mean[0];
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(SimError::DegenerateCurve { sample: 0 });
    }
    let ref_db = 10.0 * reference.log10();
    let mut values_db = Vec::with_capacity(mean.len());
    for (n, &m) in mean.iter().enumerate() {
        let v = 10.0 * m.log10() - ref_db;
        if !v.is_finite() {
            return Err(SimError::DegenerateCurve { sample: n });
        }
        values_db.push(v);
    }
    // log10(reference) − log10(reference) is exactly zero, but keep the
    // contract independent of that identity.
    values_db[0] = 0.0;
    let floor_db = if cfg.noise.variance > 0.0 {
        10.0 * cfg.noise.variance.log10() - ref_db
    } else {
        f64::NEG_INFINITY
    };
    Ok(MseCurve { values_db, floor_db })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceMetrics {
    /// First index whose 200-sample trailing mean of the dB curve is at
    /// or below the threshold; `None` if never reached.
    pub samples_to_threshold: Option<usize>,
    /// Mean of the final 10% of the dB curve.
    pub terminal_db: f64,
}

/// Summary statistics of one curve against `threshold_db` (< 0).
pub fn convergence_metrics(curve: &MseCurve, threshold_db: f64) -> ConvergenceMetrics {
    debug_assert!(threshold_db < 0.0, "threshold must be below the 0 dB start");
    ConvergenceMetrics {
        samples_to_threshold: samples_to_threshold(&curve.values_db, threshold_db),
        terminal_db: terminal_db(&curve.values_db),
    }
}

fn samples_to_threshold(values_db: &[f64], threshold_db: f64) -> Option<usize> {
    let w = THRESHOLD_WINDOW;
    if values_db.len() < w {
        return None;
    }
    let mut acc: f64 = values_db[..w].iter().sum();
    if acc <= threshold_db * w as f64 {
        return Some(w - 1);
    }
    for n in w..values_db.len() {
        acc += values_db[n] - values_db[n - w];
        if acc <= threshold_db * w as f64 {
            return Some(n);
        }
    }
    None
}

fn terminal_db(values_db: &[f64]) -> f64 {
    let tail = (values_db.len() / 10).max(1);
    let start = values_db.len() - tail;
    values_db[start..].iter().sum::<f64>() / tail as f64
}

/// Renders a curve as CSV: header `sample,mse_db`, LF line endings, and
/// shortest round-trip decimal for each value.
pub fn curve_to_csv(curve: &MseCurve) -> String {
    let mut out = String::with_capacity(16 * curve.values_db.len() + 16);
    out.push_str("sample,mse_db\n");
    for (n, v) in curve.values_db.iter().enumerate() {
        out.push_str(&format!("{n},{v:?}\n"));
    }
    out
}

pub fn write_curve_csv(path: &Path, curve: &MseCurve) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(curve_to_csv(curve).as_bytes())
}
