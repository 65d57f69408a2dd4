//! Proportionate-type subband adaptive filtering.
//!
//! The crate implements a family of adaptive FIR identification algorithms
//! built around a damped Newton update of a regularized least-squares
//! criterion. A proportionate weighting matrix reallocates adaptation gain
//! toward large coefficients, and an analysis filter bank decorrelates the
//! input across subbands; both are degrees of freedom of a single update
//! rule, so the classical NLMS, PtNLMS, NSAF, and PtNSAF algorithms fall
//! out as parameter choices.
//!
//! Layout:
//!
//! * [`linalg`]: the small dense kernels (weighted Gram matrices, Cholesky
//!   solves) used in the per-sample update.
//! * [`filterbank`]: cosine-modulated analysis bank design and validation.
//! * [`signals`]: seeded generators for inputs, noise, and target systems.
//! * [`adaptive`]: the filter state and the update engine.
//! * [`sim`]: ensemble simulation and learning-curve assembly.
//! * [`config`]: the text experiment-description format.
//! * [`presets`]: canned experiment grids writing CSV outputs.

pub mod adaptive;
pub mod config;
pub mod filterbank;
pub mod linalg;
pub mod presets;
pub mod signals;
pub mod sim;
