//! The adaptive filter engine: proportionate weighting, subband
//! decomposition, and the damped regularized Newton tap update.
//!
//! One step of the filter at time n, given the new input/desired pair:
//!
//! 1. Fullband a priori errors e(n), entry k = d(n−k) − u(n−k)ᵀs(n).
//! 2. Subband frame: U_b(n) = U(n)·H and e_b(n) = Hᵀ·e(n).
//! 3. Proportionate weights w_i(n) = (|s_i(n)| + c)^(2−p) from the current
//!    taps, frozen for the rest of the step.
//! 4. Tap update with Φ(n) = [(δ+τ)·I_M + U_bᵀWU_b]⁻¹:
//!
//!    ```text
//!    s(n+1) = (I − α·[I − W·U_bΦU_bᵀ])·s(n) + μ·W·U_bΦ·e_b(n),
//!    α = μτ/(δ+τ)
//!    ```
//!
//!    which is the damped Newton step on the regularized criterion after
//!    reduction of the L×L inverse to an M×M solve. For τ = 0 the
//!    shrinkage term vanishes and the update is the plain proportionate
//!    subband direction s(n+1) = s(n) + μ·W·U_b[δI + U_bᵀWU_b]⁻¹e_b(n).
//!
//! NLMS, PtNLMS, NSAF, PtNSAF, and PtAPA are all reachable by choice of
//! bank, weighting, and dimensions; see [`configure_special_case`].
//!
//! The engine keeps one filtered-input ring per band so U_b(n) is
//! maintained incrementally: column i at age j holds
//! x_i(n−j) = Σ_k h_i[k]·u(n−j−k), computed once when sample n−j arrived.
//! The values are bit-identical to recomputing U(n)·H from scratch, which
//! [`subband_decompose`] does and the tests cross-check.

use crate::filterbank::AnalysisBank;
use crate::linalg::{
    weighted_gram_into, CholeskyWorkspace, LinalgError, Mat, SpdMatrix,
};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum AdaptiveError {
    /// Sparsity exponent outside [1, 2].
    InvalidSparsityParam { p: f64 },
    /// FilterConfig invariants violated (dimension or variant constraints).
    InvalidConfig { reason: &'static str },
    /// Numerical failure in the update's linear solve.
    Linalg(LinalgError),
}

impl fmt::Display for AdaptiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdaptiveError::InvalidSparsityParam { p } => {
                write!(f, "sparsity exponent p must lie in [1, 2], got {p}")
            }
            AdaptiveError::InvalidConfig { reason } => write!(f, "invalid config: {reason}"),
            AdaptiveError::Linalg(e) => write!(f, "linear algebra failure: {e}"),
        }
    }
}

impl std::error::Error for AdaptiveError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            AdaptiveError::Linalg(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LinalgError> for AdaptiveError {
    fn from(e: LinalgError) -> Self {
        AdaptiveError::Linalg(e)
    }
}

/// Diagonal of the proportionate matrix W(n) together with the parameters
/// that produced it. All entries are positive; p = 2 gives exact ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionateWeights {
    w: Vec<f64>,
    p: f64,
    c: f64,
}

impl ProportionateWeights {
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// w_i = (|s_i| + c)^(2−p), elementwise over the current taps.
///
/// p = 2 short-circuits to exact ones (identity weighting); p outside
/// [1, 2] is rejected.
pub fn proportionate_weights(
    s: &[f64],
    p: f64,
    c: f64,
) -> Result<ProportionateWeights, AdaptiveError> {
    if !(1.0..=2.0).contains(&p) {
        return Err(AdaptiveError::InvalidSparsityParam { p });
    }
    let mut w = vec![1.0; s.len()];
    weights_into(s, p, c, &mut w);
    Ok(ProportionateWeights { w, p, c })
}

fn weights_into(s: &[f64], p: f64, c: f64, out: &mut [f64]) {
    if p == 2.0 {
        out.fill(1.0);
        return;
    }
    let exponent = 2.0 - p;
    for (o, si) in out.iter_mut().zip(s) {
        *o = (si.abs() + c).powf(exponent);
    }
}

/// Step-size, regularization, and tap-norm penalty of the update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub mu: f64,
    pub delta: f64,
    pub tau: f64,
}

impl UpdateParams {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if !(self.mu > 0.0) {
            return Err(AdaptiveError::InvalidConfig { reason: "step size mu must be positive" });
        }
        if !(self.delta > 0.0) {
            return Err(AdaptiveError::InvalidConfig {
                reason: "regularization delta must be positive",
            });
        }
        if !(self.tau >= 0.0) {
            return Err(AdaptiveError::InvalidConfig { reason: "tau must be non-negative" });
        }
        Ok(())
    }
}

/// How the proportionate matrix is formed each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    /// W(n) = I every step.
    Identity,
    /// W(n) from the sparsity-promoting rule with exponent p and
    /// activation constant c.
    PNorm { p: f64, c: f64 },
}

/// Algorithm labels; each constrains bank and weighting (see
/// [`FilterConfig::validate`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    GptNsaf,
    PtApa,
    Nsaf,
    PtNlms,
    Nlms,
}

/// Full description of an adaptive filter instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub num_taps: usize,
    pub bank: AnalysisBank,
    pub params: UpdateParams,
    pub weighting: Weighting,
    pub variant: Variant,
}

impl FilterConfig {
    /// Checks dimension and variant constraints:
    /// num_taps ≥ M; PtAPA requires the identity-embedding bank; NSAF and
    /// NLMS require identity weighting; PtNLMS and NLMS require M = N = 1.
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        self.params.validate()?;
        if let Weighting::PNorm { p, c } = self.weighting {
            if !(1.0..=2.0).contains(&p) {
                return Err(AdaptiveError::InvalidSparsityParam { p });
            }
            if !(c > 0.0) {
                return Err(AdaptiveError::InvalidConfig {
                    reason: "activation constant c must be positive",
                });
            }
        }
        if self.num_taps < self.bank.num_bands() {
            return Err(AdaptiveError::InvalidConfig {
                reason: "filter length must be at least the band count",
            });
        }
        let fullband = self.bank.num_bands() == 1 && self.bank.filter_len() == 1;
        match self.variant {
            Variant::GptNsaf => {
                if !matches!(self.weighting, Weighting::PNorm { .. }) {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "GPtNSAF requires proportionate weighting",
                    });
                }
            }
            Variant::PtApa => {
                if !self.bank.is_identity_embedding() {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "PtAPA requires the identity-embedding bank",
                    });
                }
            }
            Variant::Nsaf => {
                if self.weighting != Weighting::Identity {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "NSAF requires identity weighting",
                    });
                }
            }
            Variant::PtNlms => {
                if !fullband {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "PtNLMS requires the fullband configuration M = N = 1",
                    });
                }
                if !matches!(self.weighting, Weighting::PNorm { .. }) {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "PtNLMS requires proportionate weighting",
                    });
                }
            }
            Variant::Nlms => {
                if !fullband {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "NLMS requires the fullband configuration M = N = 1",
                    });
                }
                if self.weighting != Weighting::Identity {
                    return Err(AdaptiveError::InvalidConfig {
                        reason: "NLMS requires identity weighting",
                    });
                }
            }
        }
        Ok(())
    }
}

/// Default activation constant c for configurations built through
/// [`configure_special_case`].
pub const DEFAULT_ACTIVATION: f64 = 1e-3;

/// Builds a validated [`FilterConfig`] for one of the named special cases.
///
/// `bank`: required for GPtNSAF, NSAF (the designed analysis bank) and
/// PtAPA (an identity embedding); must be omitted or fullband for
/// PtNLMS/NLMS. `p`: required for GPtNSAF and PtNLMS, optional for PtAPA,
/// rejected for NSAF/NLMS. The activation constant is fixed at
/// [`DEFAULT_ACTIVATION`]; build the config directly for a custom c.
pub fn configure_special_case(
    variant: Variant,
    num_taps: usize,
    bank: Option<AnalysisBank>,
    p: Option<f64>,
    params: UpdateParams,
) -> Result<FilterConfig, AdaptiveError> {
    let fullband = || AnalysisBank::identity_embedding(1);
    let (bank, weighting) = match variant {
        Variant::GptNsaf => {
            let bank = bank.ok_or(AdaptiveError::InvalidConfig {
                reason: "GPtNSAF requires an analysis bank",
            })?;
            let p = p.ok_or(AdaptiveError::InvalidConfig {
                reason: "GPtNSAF requires a sparsity exponent",
            })?;
            (bank, Weighting::PNorm { p, c: DEFAULT_ACTIVATION })
        }
        Variant::PtApa => {
            let bank = bank.ok_or(AdaptiveError::InvalidConfig {
                reason: "PtAPA requires an identity-embedding bank",
            })?;
            let weighting = match p {
                Some(p) => Weighting::PNorm { p, c: DEFAULT_ACTIVATION },
                None => Weighting::Identity,
            };
            (bank, weighting)
        }
        Variant::Nsaf => {
            let bank = bank.ok_or(AdaptiveError::InvalidConfig {
                reason: "NSAF requires an analysis bank",
            })?;
            if p.is_some() {
                return Err(AdaptiveError::InvalidConfig {
                    reason: "NSAF takes no sparsity exponent",
                });
            }
            (bank, Weighting::Identity)
        }
        Variant::PtNlms => {
            let bank = bank.unwrap_or_else(fullband);
            let p = p.ok_or(AdaptiveError::InvalidConfig {
                reason: "PtNLMS requires a sparsity exponent",
            })?;
            (bank, Weighting::PNorm { p, c: DEFAULT_ACTIVATION })
        }
        Variant::Nlms => {
            let bank = bank.unwrap_or_else(fullband);
            if p.is_some() {
                return Err(AdaptiveError::InvalidConfig {
                    reason: "NLMS takes no sparsity exponent",
                });
            }
            (bank, Weighting::Identity)
        }
    };
    let config = FilterConfig { num_taps, bank, params, weighting, variant };
    config.validate()?;
    Ok(config)
}

/// Per-sample signal state of the filter: the taps and just enough input
/// and desired history to form U(n) and d(n).
///
/// Histories are zero at construction, so the first L+N−1 steps see
/// partially zero data; there is no special warmup casing.
#[derive(Debug, Clone)]
pub struct FilterState {
    taps: Vec<f64>,
    // Newest-first rings; head points at the most recent sample.
    input_history: Vec<f64>,
    desired_history: Vec<f64>,
    head_input: usize,
    head_desired: usize,
    num_subband_taps: usize,
    sample_index: u64,
}

impl FilterState {
    /// L-tap filter driven through an N-tap analysis bank: keeps L+N−1
    /// input samples and N desired samples.
    pub fn new(num_taps: usize, bank_len: usize) -> Self {
        FilterState {
            taps: vec![0.0; num_taps],
            input_history: vec![0.0; num_taps + bank_len - 1],
            desired_history: vec![0.0; bank_len],
            head_input: 0,
            head_desired: 0,
            num_subband_taps: bank_len,
            sample_index: 0,
        }
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    /// N, the analysis filter length this state was sized for.
    pub fn bank_len(&self) -> usize {
        self.num_subband_taps
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    /// u(n − age): input sample `age` steps back.
    pub fn input(&self, age: usize) -> f64 {
        debug_assert!(age < self.input_history.len());
        self.input_history[(self.head_input + age) % self.input_history.len()]
    }

    /// d(n − age): desired sample `age` steps back.
    pub fn desired(&self, age: usize) -> f64 {
        debug_assert!(age < self.desired_history.len());
        self.desired_history[(self.head_desired + age) % self.desired_history.len()]
    }

    /// Pushes one input/desired pair and advances time.
    pub fn push(&mut self, input: f64, desired: f64) {
        let li = self.input_history.len();
        self.head_input = (self.head_input + li - 1) % li;
        self.input_history[self.head_input] = input;
        let ld = self.desired_history.len();
        self.head_desired = (self.head_desired + ld - 1) % ld;
        self.desired_history[self.head_desired] = desired;
        self.sample_index += 1;
    }

    /// Copies the last `out.len()` inputs, newest first, into `out`.
    fn linearize_input(&self, out: &mut [f64]) {
        let len = self.input_history.len();
        debug_assert!(out.len() <= len);
        for (age, o) in out.iter_mut().enumerate() {
            *o = self.input_history[(self.head_input + age) % len];
        }
    }
}

/// e(n): N fullband a priori errors, entry k = d(n−k) − u(n−k)ᵀ·s(n),
/// all evaluated with the current taps.
pub fn compute_fullband_error(state: &FilterState) -> Vec<f64> {
    let n = state.bank_len();
    let l = state.num_taps();
    let mut lin = vec![0.0; l + n - 1];
    state.linearize_input(&mut lin);
    let mut e = vec![0.0; n];
    fullband_error_into(&lin, &state.taps, state.desired_ref(), &mut e);
    e
}

impl FilterState {
    fn desired_ref(&self) -> DesiredRing<'_> {
        DesiredRing { buf: &self.desired_history, head: self.head_desired }
    }
}

struct DesiredRing<'a> {
    buf: &'a [f64],
    head: usize,
}

impl DesiredRing<'_> {
    fn get(&self, age: usize) -> f64 {
        self.buf[(self.head + age) % self.buf.len()]
    }
}

/// `lin` holds inputs newest-first: lin[j] = u(n−j).
fn fullband_error_into(lin: &[f64], taps: &[f64], desired: DesiredRing<'_>, out: &mut [f64]) {
    let l = taps.len();
    for (k, o) in out.iter_mut().enumerate() {
        let window = &lin[k..k + l];
        let pred: f64 = window.iter().zip(taps).map(|(u, s)| u * s).sum();
        *o = desired.get(k) - pred;
    }
}

/// Subband view of one sample instant: U_b(n) = U(n)·H and e_b = Hᵀ·e(n).
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFrame {
    /// L×M subband input data matrix; column i at row j holds
    /// Σ_k u(n−j−k)·h_i[k].
    pub u_b: Mat,
    /// M subband errors.
    pub e_b: Vec<f64>,
}

/// Forms the subband frame from scratch by the defining products.
pub fn subband_decompose(state: &FilterState, e: &[f64], bank: &AnalysisBank) -> SubbandFrame {
    let l = state.num_taps();
    let n = bank.filter_len();
    let m = bank.num_bands();
    assert_eq!(e.len(), n, "error vector length must match bank filter length");
    let mut lin = vec![0.0; l + n - 1];
    state.linearize_input(&mut lin);
    let mut u_b = Mat::zeros(l, m);
    for i in 0..m {
        let h_i = bank.filter(i);
        let col = u_b.col_mut(i);
        for (j, cj) in col.iter_mut().enumerate() {
            let window = &lin[j..j + n];
            *cj = h_i.iter().zip(window).map(|(h, u)| h * u).sum();
        }
    }
    let e_b = (0..m)
        .map(|i| bank.filter(i).iter().zip(e).map(|(h, ek)| h * ek).sum())
        .collect();
    SubbandFrame { u_b, e_b }
}

/// Shared inner direction: out = W·U_b·Φ·e_b with Φ = [ridge·I + U_bᵀWU_b]⁻¹.
/// `y` receives Φ·e_b. All slices must be pre-sized; no allocation.
#[allow(clippy::too_many_arguments)]
fn direction_into(
    u_b: &Mat,
    e_b: &[f64],
    w: &[f64],
    ridge: f64,
    gram: &mut SpdMatrix,
    chol: &mut CholeskyWorkspace,
    y: &mut [f64],
    out: &mut [f64],
) -> Result<(), LinalgError> {
    weighted_gram_into(u_b, w, ridge, gram)?;
    chol.factorize(gram)?;
    chol.solve_into(e_b, y)?;
    out.fill(0.0);
    for i in 0..u_b.cols() {
        let col = u_b.col(i);
        let yi = y[i];
        for (o, u) in out.iter_mut().zip(col) {
            *o += u * yi;
        }
    }
    for (o, wi) in out.iter_mut().zip(w) {
        *o *= wi;
    }
    Ok(())
}

/// g(n) = W·U_b·[δI_M + U_bᵀWU_b]⁻¹·e_b, the τ → 0 update direction.
///
/// Computed via the weighted Gram matrix and a Cholesky solve; no inverse
/// is formed. For M = 1 this collapses to the (Pt)NLMS formula
/// e·W·u / (uᵀWu + δ).
pub fn gptnsaf_direction(
    frame: &SubbandFrame,
    weights: &ProportionateWeights,
    delta: f64,
) -> Result<Vec<f64>, AdaptiveError> {
    let m = frame.u_b.cols();
    let l = frame.u_b.rows();
    let mut gram = SpdMatrix::scaled_identity(m, 0.0);
    let mut chol = CholeskyWorkspace::new(m);
    let mut y = vec![0.0; m];
    let mut g = vec![0.0; l];
    direction_into(&frame.u_b, &frame.e_b, &weights.w, delta, &mut gram, &mut chol, &mut y, &mut g)?;
    Ok(g)
}

/// Shared inner update; mutates `taps` in place. Scratch slices: `y`, `z`,
/// `t` are M-length, `acc` is L-length.
#[allow(clippy::too_many_arguments)]
fn update_inner(
    taps: &mut [f64],
    u_b: &Mat,
    e_b: &[f64],
    w: &[f64],
    params: &UpdateParams,
    gram: &mut SpdMatrix,
    chol: &mut CholeskyWorkspace,
    y: &mut [f64],
    z: &mut [f64],
    t: &mut [f64],
    acc: &mut [f64],
) -> Result<(), LinalgError> {
    let ridge = params.delta + params.tau;
    direction_into(u_b, e_b, w, ridge, gram, chol, y, acc)?;
    if params.tau == 0.0 {
        for (s, g) in taps.iter_mut().zip(acc.iter()) {
            *s += params.mu * g;
        }
        return Ok(());
    }
    // Shrinkage toward the weighted subspace component: t = U_bᵀ·s,
    // z = Φ·t, then s ← s − α·(s − W·U_b·z) + μ·g.
    let m = u_b.cols();
    for i in 0..m {
        t[i] = u_b.col(i).iter().zip(taps.iter()).map(|(u, s)| u * s).sum();
    }
    chol.solve_into(t, z)?;
    let alpha = params.mu * params.tau / (params.delta + params.tau);
    for (j, s) in taps.iter_mut().enumerate() {
        let mut proj = 0.0;
        for i in 0..m {
            proj += u_b.get(j, i) * z[i];
        }
        let shrink = *s - w[j] * proj;
        *s = *s - alpha * shrink + params.mu * acc[j];
    }
    Ok(())
}

/// One damped regularized Newton tap update, returning s(n+1) without
/// mutating the state. The Φ ridge is δ+τ; at τ = 0 the result equals
/// s(n) + μ·[`gptnsaf_direction`] exactly (the shrinkage coefficient
/// μτ/(δ+τ) vanishes and the same code path runs).
pub fn regularized_update(
    state: &FilterState,
    frame: &SubbandFrame,
    weights: &ProportionateWeights,
    params: &UpdateParams,
) -> Result<Vec<f64>, AdaptiveError> {
    params.validate()?;
    let m = frame.u_b.cols();
    let l = frame.u_b.rows();
    let mut taps = state.taps().to_vec();
    let mut gram = SpdMatrix::scaled_identity(m, 0.0);
    let mut chol = CholeskyWorkspace::new(m);
    let (mut y, mut z, mut t) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut acc = vec![0.0; l];
    update_inner(
        &mut taps, &frame.u_b, &frame.e_b, &weights.w, params, &mut gram, &mut chol, &mut y,
        &mut z, &mut t, &mut acc,
    )?;
    Ok(taps)
}

/// A running adaptive filter: configuration, signal state, per-band
/// filtered-input rings, and preallocated scratch for the update. One
/// instance per thread; instances are independent.
#[derive(Debug, Clone)]
pub struct AdaptiveFilter {
    config: FilterConfig,
    state: FilterState,
    // Band rings, newest-first, one of length L per band: ring i at age j
    // holds x_i(n−j), the i-th column of U_b(n).
    band_rings: Vec<f64>,
    band_head: usize,
    // Scratch reused every step.
    lin: Vec<f64>,
    e: Vec<f64>,
    e_b: Vec<f64>,
    w: Vec<f64>,
    u_b: Mat,
    gram: SpdMatrix,
    chol: CholeskyWorkspace,
    y: Vec<f64>,
    z: Vec<f64>,
    t: Vec<f64>,
    acc: Vec<f64>,
}

impl AdaptiveFilter {
    pub fn new(config: FilterConfig) -> Result<Self, AdaptiveError> {
        config.validate()?;
        let l = config.num_taps;
        let n = config.bank.filter_len();
        let m = config.bank.num_bands();
        Ok(AdaptiveFilter {
            state: FilterState::new(l, n),
            band_rings: vec![0.0; l * m],
            band_head: 0,
            lin: vec![0.0; l + n - 1],
            e: vec![0.0; n],
            e_b: vec![0.0; m],
            w: vec![1.0; l],
            u_b: Mat::zeros(l, m),
            gram: SpdMatrix::scaled_identity(m, 0.0),
            chol: CholeskyWorkspace::new(m),
            y: vec![0.0; m],
            z: vec![0.0; m],
            t: vec![0.0; m],
            acc: vec![0.0; l],
            config,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn taps(&self) -> &[f64] {
        self.state.taps()
    }

    /// Processes one input/desired pair: pushes the sample, computes the
    /// a priori errors with the current taps, updates the taps, and
    /// returns the fullband a priori error e(n).
    pub fn step(&mut self, input: f64, desired: f64) -> Result<f64, AdaptiveError> {
        let l = self.config.num_taps;
        let n = self.config.bank.filter_len();
        let m = self.config.bank.num_bands();
        self.state.push(input, desired);
        self.state.linearize_input(&mut self.lin);
        // Filtered-input rings: x_i(n) from the newest N inputs.
        self.band_head = (self.band_head + l - 1) % l;
        for i in 0..m {
            let h_i = self.config.bank.filter(i);
            let x: f64 = h_i.iter().zip(&self.lin[..n]).map(|(h, u)| h * u).sum();
            self.band_rings[i * l + self.band_head] = x;
        }
        // Fullband errors with the current taps.
        fullband_error_into(&self.lin, &self.state.taps, self.state.desired_ref(), &mut self.e);
        let a_priori = self.e[0];
        // Subband frame: copy ring windows into U_b columns, project e.
        for i in 0..m {
            let ring = &self.band_rings[i * l..(i + 1) * l];
            let col = self.u_b.col_mut(i);
            for (j, cj) in col.iter_mut().enumerate() {
                *cj = ring[(self.band_head + j) % l];
            }
            self.e_b[i] = self.config.bank.filter(i).iter().zip(&self.e).map(|(h, e)| h * e).sum();
        }
        // Weights from s(n), frozen before the update.
        match self.config.weighting {
            Weighting::Identity => self.w.fill(1.0),
            Weighting::PNorm { p, c } => weights_into(&self.state.taps, p, c, &mut self.w),
        }
        update_inner(
            &mut self.state.taps,
            &self.u_b,
            &self.e_b,
            &self.w,
            &self.config.params,
            &mut self.gram,
            &mut self.chol,
            &mut self.y,
            &mut self.z,
            &mut self.t,
            &mut self.acc,
        )?;
        Ok(a_priori)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> UpdateParams {
        UpdateParams { mu: 0.2, delta: 1e-6, tau: 0.0 }
    }

    #[test]
    fn weights_p2_is_exact_identity() {
        let w = proportionate_weights(&[0.3, -2.0, 0.0], 2.0, 1e-3).unwrap();
        assert_eq!(w.w(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn weights_p1_of_zero_taps_is_uniform_c() {
        let w = proportionate_weights(&[0.0; 4], 1.0, 1e-3).unwrap();
        assert_eq!(w.w(), &[1e-3; 4]);
    }

    #[test]
    fn weights_p1_matches_direct_evaluation() {
        let w = proportionate_weights(&[1.0, 0.0], 1.0, 1e-3).unwrap();
        assert_eq!(w.w(), &[1.001, 0.001]);
    }

    #[test]
    fn weights_reject_exponent_outside_range() {
        let err = proportionate_weights(&[0.0], 2.5, 1e-3).unwrap_err();
        assert_eq!(err, AdaptiveError::InvalidSparsityParam { p: 2.5 });
        assert!(proportionate_weights(&[0.0], 0.9, 1e-3).is_err());
    }

    #[test]
    fn zero_taps_error_equals_desired_history() {
        let mut state = FilterState::new(4, 2);
        state.push(1.0, 5.0);
        state.push(-2.0, 7.0);
        let e = compute_fullband_error(&state);
        assert_eq!(e, vec![7.0, 5.0]);
    }

    #[test]
    fn matched_taps_give_zero_error_after_warmup() {
        let s0 = [0.5, -0.25, 0.125];
        let mut state = FilterState::new(3, 2);
        state.taps = s0.to_vec();
        let inputs = [0.3, -1.1, 0.9, 2.0, -0.4, 0.7];
        let mut history = vec![0.0; 3];
        for (n, &u) in inputs.iter().enumerate() {
            history.rotate_right(1);
            history[0] = u;
            let d: f64 = history.iter().zip(&s0).map(|(a, b)| a * b).sum();
            state.push(u, d);
            if n >= 3 {
                let e = compute_fullband_error(&state);
                for ek in e {
                    assert!(ek.abs() < 1e-15, "residual error {ek} at sample {n}");
                }
            }
        }
    }

    #[test]
    fn fullband_frame_is_the_input_vector() {
        let bank = AnalysisBank::identity_embedding(1);
        let mut state = FilterState::new(3, 1);
        for (u, d) in [(1.0, 0.5), (2.0, 0.25), (3.0, 0.125)] {
            state.push(u, d);
        }
        let e = compute_fullband_error(&state);
        let frame = subband_decompose(&state, &e, &bank);
        assert_eq!(frame.u_b.col(0), &[3.0, 2.0, 1.0]);
        assert_eq!(frame.e_b.len(), 1);
        assert_eq!(frame.e_b[0], e[0]);
    }

    #[test]
    fn identity_bank_frame_reproduces_fullband_data() {
        // H = I_N makes e_b == e and U_b == U(n).
        let bank = AnalysisBank::identity_embedding(3);
        let mut state = FilterState::new(4, 3);
        let inputs = [0.5, -1.0, 2.0, 0.25, -0.75, 1.5];
        for (n, &u) in inputs.iter().enumerate() {
            state.push(u, 0.1 * n as f64);
        }
        let e = compute_fullband_error(&state);
        let frame = subband_decompose(&state, &e, &bank);
        assert_eq!(frame.e_b, e);
        for k in 0..3 {
            for j in 0..4 {
                assert_eq!(frame.u_b.get(j, k), state.input(k + j));
            }
        }
    }

    #[test]
    fn direction_collapses_to_nlms_for_single_band() {
        let bank = AnalysisBank::identity_embedding(1);
        let mut state = FilterState::new(3, 1);
        for (u, d) in [(0.4, 1.0), (-0.3, 0.2), (0.9, -0.5)] {
            state.push(u, d);
        }
        let e = compute_fullband_error(&state);
        let frame = subband_decompose(&state, &e, &bank);
        let w = proportionate_weights(state.taps(), 2.0, 1e-3).unwrap();
        let delta = 1e-6;
        let g = gptnsaf_direction(&frame, &w, delta).unwrap();
        let u: Vec<f64> = (0..3).map(|j| state.input(j)).collect();
        let norm2: f64 = u.iter().map(|x| x * x).sum();
        for j in 0..3 {
            let want = e[0] * u[j] / (norm2 + delta);
            assert!((g[j] - want).abs() <= 1e-12, "tap {j}: {} vs {want}", g[j]);
        }
    }

    #[test]
    fn direction_collapses_to_ptnlms_for_single_band_with_weights() {
        let bank = AnalysisBank::identity_embedding(1);
        let mut state = FilterState::new(3, 1);
        state.taps = vec![0.8, 0.0, -0.1];
        for (u, d) in [(0.4, 1.0), (-0.3, 0.2), (0.9, -0.5)] {
            state.push(u, d);
        }
        let e = compute_fullband_error(&state);
        let frame = subband_decompose(&state, &e, &bank);
        let w = proportionate_weights(state.taps(), 1.2, 1e-3).unwrap();
        let delta = 1e-6;
        let g = gptnsaf_direction(&frame, &w, delta).unwrap();
        let u: Vec<f64> = (0..3).map(|j| state.input(j)).collect();
        let wnorm: f64 = u.iter().zip(w.w()).map(|(x, wi)| x * wi * x).sum();
        for j in 0..3 {
            let want = e[0] * w.w()[j] * u[j] / (wnorm + delta);
            assert!((g[j] - want).abs() <= 1e-12, "tap {j}: {} vs {want}", g[j]);
        }
    }

    #[test]
    fn tau_zero_update_equals_direction_step_exactly() {
        let bank = AnalysisBank::design(2, 16).unwrap();
        let mut filter = AdaptiveFilter::new(FilterConfig {
            num_taps: 8,
            bank: bank.clone(),
            params: small_params(),
            weighting: Weighting::PNorm { p: 1.5, c: 1e-3 },
            variant: Variant::GptNsaf,
        })
        .unwrap();
        // Drive a few samples, then compare one manual step.
        let mut x = 0.7;
        for k in 0..40 {
            x = 0.9 * x + (k as f64 * 0.37).sin();
            filter.step(x, x * 0.5).unwrap();
        }
        let state_before = filter.state.clone();
        let e = compute_fullband_error(&state_before);
        // Manual push of the next pair onto a copy.
        let mut manual = state_before.clone();
        manual.push(1.25, -0.4);
        let e_next = compute_fullband_error(&manual);
        let frame = subband_decompose(&manual, &e_next, &bank);
        let w = proportionate_weights(manual.taps(), 1.5, 1e-3).unwrap();
        let g = gptnsaf_direction(&frame, &w, small_params().delta).unwrap();
        let expected: Vec<f64> =
            manual.taps().iter().zip(&g).map(|(s, gi)| s + small_params().mu * gi).collect();
        let updated = regularized_update(&manual, &frame, &w, &small_params()).unwrap();
        assert_eq!(updated, expected);
        // The engine's own step must agree bitwise with the manual path.
        filter.step(1.25, -0.4).unwrap();
        assert_eq!(filter.taps(), expected.as_slice());
        drop(e);
    }

    #[test]
    fn engine_frame_matches_subband_decompose_bitwise() {
        let bank = AnalysisBank::design(4, 30).unwrap();
        let mut filter = AdaptiveFilter::new(FilterConfig {
            num_taps: 16,
            bank: bank.clone(),
            params: small_params(),
            weighting: Weighting::Identity,
            variant: Variant::Nsaf,
        })
        .unwrap();
        // Mirror state carrying the taps the engine used for this step's
        // a priori quantities (step() mutates them before returning).
        let mut mirror = FilterState::new(16, 30);
        let mut x = -0.3;
        for k in 0..100 {
            x = 0.5 * x + (k as f64).cos();
            let taps_before = filter.taps().to_vec();
            filter.step(x, 0.2 * x).unwrap();
            mirror.push(x, 0.2 * x);
            mirror.taps.copy_from_slice(&taps_before);
            let e = compute_fullband_error(&mirror);
            let frame = subband_decompose(&mirror, &e, &bank);
            // u_b/e_b scratch still hold this step's frame.
            for i in 0..4 {
                assert_eq!(frame.u_b.col(i), filter.u_b.col(i), "band {i} differs at step {k}");
            }
            assert_eq!(frame.e_b, filter.e_b, "e_b differs at step {k}");
        }
    }

    #[test]
    fn zero_input_stream_keeps_taps_at_zero() {
        let bank = AnalysisBank::design(2, 16).unwrap();
        let mut filter = AdaptiveFilter::new(FilterConfig {
            num_taps: 8,
            bank,
            params: small_params(),
            weighting: Weighting::PNorm { p: 1.2, c: 1e-3 },
            variant: Variant::GptNsaf,
        })
        .unwrap();
        for k in 0..50 {
            let d = (k as f64 * 0.1).sin();
            let e = filter.step(0.0, d).unwrap();
            assert_eq!(e, d, "a priori error must equal desired at step {k}");
            assert!(filter.taps().iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn special_case_constructor_enforces_constraints() {
        let params = small_params();
        let nlms = configure_special_case(Variant::Nlms, 16, None, None, params).unwrap();
        assert_eq!(nlms.bank.num_bands(), 1);
        assert_eq!(nlms.weighting, Weighting::Identity);

        let ptnlms =
            configure_special_case(Variant::PtNlms, 16, None, Some(1.2), params).unwrap();
        assert_eq!(ptnlms.bank.num_bands(), 1);
        assert!(matches!(ptnlms.weighting, Weighting::PNorm { p, .. } if p == 1.2));

        let bank = AnalysisBank::design(4, 30).unwrap();
        let nsaf =
            configure_special_case(Variant::Nsaf, 16, Some(bank.clone()), None, params).unwrap();
        assert_eq!(nsaf.weighting, Weighting::Identity);

        // Conflicts are rejected.
        assert!(configure_special_case(Variant::Nlms, 16, Some(bank.clone()), None, params)
            .is_err());
        assert!(configure_special_case(Variant::Nsaf, 16, Some(bank.clone()), Some(1.2), params)
            .is_err());
        assert!(configure_special_case(Variant::GptNsaf, 16, Some(bank), None, params).is_err());
        assert!(configure_special_case(Variant::GptNsaf, 2, None, Some(1.2), params).is_err());
    }

    #[test]
    fn config_rejects_more_bands_than_taps() {
        let bank = AnalysisBank::design(8, 60).unwrap();
        let config = FilterConfig {
            num_taps: 4,
            bank,
            params: small_params(),
            weighting: Weighting::Identity,
            variant: Variant::Nsaf,
        };
        let err = config.validate().unwrap_err();
        assert_eq!(
            err,
            AdaptiveError::InvalidConfig {
                reason: "filter length must be at least the band count"
            }
        );
    }

    #[test]
    fn ptapa_requires_identity_embedding() {
        let designed = AnalysisBank::design(4, 30).unwrap();
        let config = FilterConfig {
            num_taps: 16,
            bank: designed,
            params: small_params(),
            weighting: Weighting::Identity,
            variant: Variant::PtApa,
        };
        assert!(config.validate().is_err());
        let ok = FilterConfig {
            num_taps: 16,
            bank: AnalysisBank::identity_embedding(4),
            params: small_params(),
            weighting: Weighting::PNorm { p: 1.2, c: 1e-3 },
            variant: Variant::PtApa,
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn nlms_step_matches_textbook_update() {
        let mut filter = AdaptiveFilter::new(
            configure_special_case(
                Variant::Nlms,
                4,
                None,
                None,
                UpdateParams { mu: 0.5, delta: 1e-9, tau: 0.0 },
            )
            .unwrap(),
        )
        .unwrap();
        let mut taps = vec![0.0; 4];
        let mut window = vec![0.0; 4];
        let mut x = 0.2;
        for k in 0..200 {
            x = 0.7 * x + ((3 * k) as f64 * 0.11).sin();
            let d = 0.3 * x + (k as f64 * 0.05).cos();
            window.rotate_right(1);
            window[0] = x;
            let e_ref = d - window.iter().zip(&taps).map(|(a, b)| a * b).sum::<f64>();
            let norm2: f64 = window.iter().map(|v| v * v).sum();
            let gain = 0.5 * e_ref / (norm2 + 1e-9);
            for (t, u) in taps.iter_mut().zip(&window) {
                *t += gain * u;
            }
            let e = filter.step(x, d).unwrap();
            assert!((e - e_ref).abs() <= 1e-12 * e_ref.abs().max(1.0));
            for (a, b) in filter.taps().iter().zip(&taps) {
                assert!((a - b).abs() <= 1e-12, "tap drift at step {k}: {a} vs {b}");
            }
        }
    }
}
