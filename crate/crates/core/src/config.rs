//! Sectioned `key = value` experiment configs.
//!
//! ```text
//! [target]
//! kind = sparse
//!
//! [filter]
//! variant = gptnsaf
//! M = 8
//! p = 1.2
//! mu = auto
//!
//! [run]
//! runs = 100
//! ```
//!
//! Sections and keys: `[target] kind seed new_per_run file`,
//! `[filter] variant M N L p mu delta c tau`, `[input] rho burn_in`,
//! `[noise] variance`, `[run] runs samples seed`. Unknown sections or
//! keys are parse errors, as are duplicate keys. `#` starts a full-line
//! comment. Command-line overrides use `section.key=value` and take
//! precedence over file values; defaults fill whatever remains.
//!
//! Defaults: L=256, M=8 for subband variants and 1 for fullband ones, N
//! from the bank table {1→1, 2→16, 4→30, 8→60, else 8M}, `mu=auto`
//! (0.2/M), delta=1e-6, c=1e-3, tau=0, rho=0.9, burn_in=2000,
//! variance=1e-3, runs=100, samples=20000, seed=42. The sparsity
//! exponent defaults per target kind: sparse 1.2, quasi-sparse 1.5,
//! dispersive 1.8.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::adaptive::{FilterConfig, UpdateParams, Variant, Weighting};
use crate::filterbank::AnalysisBank;
use crate::signals::{Ar1Config, NoiseConfig, TargetKind, TargetSystem};
use crate::sim::{ExperimentConfig, TargetSpec};

#[derive(Debug)]
pub enum ConfigError {
    /// Syntactic or lexical problem in the config file.
    Parse { line: usize, message: String },
    /// A malformed or unknown `section.key=value` override.
    Override { entry: String, message: String },
    /// A structurally valid config that violates a documented invariant.
    /// `invariant` names it (e.g. `InvalidSparsityParam`).
    Validation { invariant: String, message: String },
    Io { path: String, source: std::io::Error },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Override { entry, message } => {
                write!(f, "override '{entry}': {message}")
            }
            ConfigError::Validation { invariant, message } => {
                write!(f, "{invariant}: {message}")
            }
            ConfigError::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for ConfigError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ConfigError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Leading identifier of an error's Debug form, used to name the
/// violated invariant in [`ConfigError::Validation`].
fn error_name(e: &dyn fmt::Debug) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| c == ' ' || c == '(' || c == '{').next().unwrap_or("Error").to_string()
}

fn validation<E: std::error::Error + fmt::Debug>(e: &E) -> ConfigError {
    ConfigError::Validation { invariant: error_name(e), message: e.to_string() }
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("target", &["kind", "seed", "new_per_run", "file"]),
    ("filter", &["variant", "M", "N", "L", "p", "mu", "delta", "c", "tau"]),
    ("input", &["rho", "burn_in"]),
    ("noise", &["variance"]),
    ("run", &["runs", "samples", "seed"]),
];

fn known_key(section: &str, key: &str) -> bool {
    SECTIONS.iter().any(|(s, keys)| *s == section && keys.contains(&key))
}

/// Key-value pairs with provenance, before semantic resolution.
#[derive(Debug, Default)]
struct RawConfig {
    // (section, key) -> (value, source description)
    entries: HashMap<(String, String), (String, String)>,
}

impl RawConfig {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        debug_assert!(known_key(section, key));
        self.entries.get(&(section.to_string(), key.to_string())).map(|(v, _)| v.as_str())
    }

    fn source(&self, section: &str, key: &str) -> &str {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|(_, s)| s.as_str())
            .unwrap_or("default")
    }
}

fn parse_lines(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut section: Option<String> = None;
    for (idx, line_raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line_raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: format!("unterminated section header '{line}'"),
            })?;
            let name = name.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("unknown section '[{name}]'"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let Some(section) = section.as_deref() else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("key '{key}' appears before any [section] header"),
            });
        };
        if !known_key(section, key) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("unknown key '{key}' in section [{section}]"),
            });
        }
        let prev = raw.entries.insert(
            (section.to_string(), key.to_string()),
            (value.to_string(), format!("line {line_no}")),
        );
        if let Some((_, first)) = prev {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key '{key}' in section [{section}] (first at {first})"),
            });
        }
    }
    Ok(raw)
}

fn apply_overrides(raw: &mut RawConfig, overrides: &[String]) -> Result<(), ConfigError> {
    for entry in overrides {
        let err = |message: String| ConfigError::Override { entry: entry.clone(), message };
        let Some((path, value)) = entry.split_once('=') else {
            return Err(err("expected section.key=value".to_string()));
        };
        let Some((section, key)) = path.trim().split_once('.') else {
            return Err(err("expected section.key=value".to_string()));
        };
        let (section, key, value) = (section.trim(), key.trim(), value.trim());
        if !known_key(section, key) {
            return Err(err(format!("unknown key '{key}' in section [{section}]")));
        }
        // Overrides may repeat and replace file values; last one wins.
        raw.entries.insert(
            (section.to_string(), key.to_string()),
            (value.to_string(), "override".to_string()),
        );
    }
    Ok(())
}

struct Resolver<'a> {
    raw: &'a RawConfig,
}

impl<'a> Resolver<'a> {
    fn parse<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        kind: &str,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::Validation {
                invariant: "InvalidValue".to_string(),
                message: format!(
                    "{section}.{key} ({}) must be {kind}, got '{v}'",
                    self.raw.source(section, key)
                ),
            }),
        }
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parse::<f64>(section, key, "a number")?.unwrap_or(default))
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parse::<usize>(section, key, "a non-negative integer")?.unwrap_or(default))
    }

    fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.parse::<u64>(section, key, "an unsigned integer")?.unwrap_or(default))
    }

    fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw.get(section, key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::Validation {
                invariant: "InvalidValue".to_string(),
                message: format!("{section}.{key} must be true or false, got '{v}'"),
            }),
        }
    }
}

/// Accepts `sparse`, `quasi-sparse` (or `quasi_sparse`), `dispersive`.
pub fn parse_target_kind(v: &str) -> Option<TargetKind> {
    match v.to_ascii_lowercase().as_str() {
        "sparse" => Some(TargetKind::Sparse),
        "quasi-sparse" | "quasi_sparse" | "quasisparse" => Some(TargetKind::QuasiSparse),
        "dispersive" => Some(TargetKind::Dispersive),
        _ => None,
    }
}

fn parse_variant(v: &str) -> Option<Variant> {
    match v.to_ascii_lowercase().as_str() {
        "gptnsaf" => Some(Variant::GptNsaf),
        "ptapa" => Some(Variant::PtApa),
        "nsaf" => Some(Variant::Nsaf),
        "ptnlms" => Some(Variant::PtNlms),
        "nlms" => Some(Variant::Nlms),
        _ => None,
    }
}

/// Default sparsity exponent per target class.
pub fn suggested_p(kind: TargetKind) -> f64 {
    match kind {
        TargetKind::Sparse => 1.2,
        TargetKind::QuasiSparse => 1.5,
        TargetKind::Dispersive => 1.8,
    }
}

/// Bank length for a band count: the validated design points, then 8M.
pub fn default_bank_len(num_bands: usize) -> usize {
    match num_bands {
        1 => 1,
        2 => 16,
        4 => 30,
        8 => 60,
        m => 8 * m,
    }
}

/// Reads a single-column CSV (optionally with a non-numeric header line)
/// into an impulse response.
pub fn read_target_csv(path: &Path, kind: TargetKind) -> Result<TargetSystem, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut taps = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => taps.push(v),
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(ConfigError::Parse {
                    line: idx + 1,
                    message: format!("{}: expected one number per line, got '{line}'", path.display()),
                });
            }
        }
    }
    if taps.is_empty() {
        return Err(ConfigError::Validation {
            invariant: "EmptyTarget".to_string(),
            message: format!("{}: no taps found", path.display()),
        });
    }
    Ok(TargetSystem::from_taps(kind, taps))
}

fn resolve(raw: &RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let r = Resolver { raw };
    let missing = |what: &str| ConfigError::Validation {
        invariant: "MissingKey".to_string(),
        message: format!("{what} is required"),
    };

    let kind_str = raw.get("target", "kind").ok_or_else(|| missing("target.kind"))?;
    let kind = parse_target_kind(kind_str).ok_or_else(|| ConfigError::Validation {
        invariant: "InvalidValue".to_string(),
        message: format!(
            "target.kind must be sparse, quasi-sparse, or dispersive, got '{kind_str}'"
        ),
    })?;
    let target_seed = r.u64_or("target", "seed", 1)?;
    let new_target_per_run = r.bool_or("target", "new_per_run", false)?;

    let variant_str = raw.get("filter", "variant").ok_or_else(|| missing("filter.variant"))?;
    let variant = parse_variant(variant_str).ok_or_else(|| ConfigError::Validation {
        invariant: "InvalidValue".to_string(),
        message: format!(
            "filter.variant must be one of gptnsaf, ptapa, nsaf, ptnlms, nlms, got '{variant_str}'"
        ),
    })?;

    let fullband = matches!(variant, Variant::PtNlms | Variant::Nlms);
    let num_bands = r.usize_or("filter", "M", if fullband { 1 } else { 8 })?;
    if fullband && num_bands != 1 {
        return Err(ConfigError::Validation {
            invariant: "InvalidConfig".to_string(),
            message: format!("{variant_str} is a fullband algorithm; M must be 1"),
        });
    }
    let designed_bank = matches!(variant, Variant::GptNsaf | Variant::Nsaf);
    if raw.get("filter", "N").is_some() && !designed_bank {
        return Err(ConfigError::Validation {
            invariant: "InvalidConfig".to_string(),
            message: format!("filter.N applies only to designed banks, not {variant_str}"),
        });
    }
    let bank = if designed_bank {
        let bank_len = r.usize_or("filter", "N", default_bank_len(num_bands))?;
        AnalysisBank::design(num_bands, bank_len).map_err(|e| validation(&e))?
    } else {
        AnalysisBank::identity_embedding(num_bands)
    };

    let num_taps = r.usize_or("filter", "L", 256)?;

    let pnorm = matches!(variant, Variant::GptNsaf | Variant::PtNlms | Variant::PtApa);
    let p_value = r.parse::<f64>("filter", "p", "a number")?;
    if p_value.is_some() && !pnorm {
        return Err(ConfigError::Validation {
            invariant: "InvalidConfig".to_string(),
            message: format!("{variant_str} uses no sparsity exponent; remove filter.p"),
        });
    }
    let weighting = if pnorm {
        let p = p_value.unwrap_or_else(|| suggested_p(kind));
        let c = r.f64_or("filter", "c", 1e-3)?;
        Weighting::PNorm { p, c }
    } else {
        if raw.get("filter", "c").is_some() {
            return Err(ConfigError::Validation {
                invariant: "InvalidConfig".to_string(),
                message: format!("{variant_str} uses no activation constant; remove filter.c"),
            });
        }
        Weighting::Identity
    };

    let mu = match raw.get("filter", "mu") {
        None | Some("auto") => 0.2 / num_bands as f64,
        Some(v) => v.parse::<f64>().map_err(|_| ConfigError::Validation {
            invariant: "InvalidValue".to_string(),
            message: format!("filter.mu must be a number or 'auto', got '{v}'"),
        })?,
    };
    let params = UpdateParams {
        mu,
        delta: r.f64_or("filter", "delta", 1e-6)?,
        tau: r.f64_or("filter", "tau", 0.0)?,
    };

    let filter = FilterConfig { num_taps, bank, params, weighting, variant };
    filter.validate().map_err(|e| validation(&e))?;

    let target = match raw.get("target", "file") {
        Some(path) => TargetSpec::Fixed(read_target_csv(Path::new(path), kind)?),
        None => TargetSpec::Generated {
            kind,
            seed: target_seed,
            options: Default::default(),
        },
    };

    let cfg = ExperimentConfig {
        target,
        filter,
        input: Ar1Config {
            rho: r.f64_or("input", "rho", 0.9)?,
            length: 0,
            burn_in: r.usize_or("input", "burn_in", 2000)?,
            seed: 0,
        },
        noise: NoiseConfig { variance: r.f64_or("noise", "variance", 1e-3)?, seed: 0 },
        num_runs: r.usize_or("run", "runs", 100)?,
        num_samples: r.usize_or("run", "samples", 20000)?,
        master_seed: r.u64_or("run", "seed", 42)?,
        new_target_per_run,
    };
    cfg.validate().map_err(|e| validation(&e))?;
    Ok(cfg)
}

/// Parses config text plus `section.key=value` overrides into a
/// validated experiment.
pub fn parse_config_str(
    text: &str,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = parse_lines(text)?;
    apply_overrides(&mut raw, overrides)?;
    resolve(&raw)
}

/// Loads a config file; `path` may be `None` to run from overrides and
/// defaults alone.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[target]\nkind = sparse\n\n[filter]\nvariant = gptnsaf\nM = 8\n";

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let cfg = parse_config_str(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.filter.num_taps, 256);
        assert_eq!(cfg.filter.bank.num_bands(), 8);
        assert_eq!(cfg.filter.bank.filter_len(), 60);
        assert!((cfg.filter.params.mu - 0.2 / 8.0).abs() < 1e-15);
        assert_eq!(cfg.filter.params.delta, 1e-6);
        match cfg.filter.weighting {
            Weighting::PNorm { p, c } => {
                assert_eq!(p, 1.2);
                assert_eq!(c, 1e-3);
            }
            Weighting::Identity => panic!("expected PNorm weighting"),
        }
        assert_eq!(cfg.num_runs, 100);
        assert_eq!(cfg.num_samples, 20000);
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.input.rho, 0.9);
        assert_eq!(cfg.input.burn_in, 2000);
        assert_eq!(cfg.noise.variance, 1e-3);
    }

    #[test]
    fn override_takes_precedence_over_file() {
        let text = format!("{MINIMAL}p = 1.8\n");
        let cfg = parse_config_str(&text, &["filter.p=1.2".to_string()]).unwrap();
        match cfg.filter.weighting {
            Weighting::PNorm { p, .. } => assert_eq!(p, 1.2),
            Weighting::Identity => panic!("expected PNorm weighting"),
        }
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let text = "[target]\nkind = sparse\nbogus = 3\n";
        match parse_config_str(text, &[]) {
            Err(ConfigError::Parse { line: 3, message }) => {
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("expected line-3 parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let text = "[target]\nkind = sparse\nkind = dispersive\n";
        match parse_config_str(text, &[]) {
            Err(ConfigError::Parse { line: 3, .. }) => {}
            other => panic!("expected line-3 duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn validation_error_names_the_invariant() {
        let text = format!("{MINIMAL}p = 2.5\n");
        match parse_config_str(&text, &[]) {
            Err(ConfigError::Validation { invariant, .. }) => {
                assert_eq!(invariant, "InvalidSparsityParam");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn short_filter_violates_length_invariant() {
        let cfg = parse_config_str(MINIMAL, &["filter.L=2".to_string(), "filter.M=4".to_string()]);
        match cfg {
            Err(ConfigError::Validation { invariant, message }) => {
                assert_eq!(invariant, "InvalidConfig");
                assert!(message.contains("at least the band count"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn fullband_variant_rejects_subband_count() {
        let text = "[target]\nkind = sparse\n[filter]\nvariant = nlms\nM = 8\n";
        match parse_config_str(text, &[]) {
            Err(ConfigError::Validation { message, .. }) => {
                assert!(message.contains("M must be 1"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn nlms_rejects_sparsity_exponent() {
        let text = "[target]\nkind = sparse\n[filter]\nvariant = nsaf\np = 1.2\n";
        assert!(matches!(
            parse_config_str(text, &[]),
            Err(ConfigError::Validation { .. })
        ));
    }

    #[test]
    fn explicit_mu_and_auto_mu() {
        let auto = parse_config_str(MINIMAL, &[]).unwrap();
        assert!((auto.filter.params.mu - 0.025).abs() < 1e-15);
        let sized = parse_config_str(MINIMAL, &["filter.mu=0.5".to_string()]).unwrap();
        assert_eq!(sized.filter.params.mu, 0.5);
    }

    #[test]
    fn dispersive_kind_defaults_p() {
        let text = "[target]\nkind = dispersive\n[filter]\nvariant = gptnsaf\n";
        let cfg = parse_config_str(text, &[]).unwrap();
        match cfg.filter.weighting {
            Weighting::PNorm { p, .. } => assert_eq!(p, 1.8),
            Weighting::Identity => panic!("expected PNorm weighting"),
        }
    }

    #[test]
    fn unknown_override_is_rejected() {
        match parse_config_str(MINIMAL, &["filter.bogus=3".to_string()]) {
            Err(ConfigError::Override { message, .. }) => {
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("expected override error, got {other:?}"),
        }
    }

    #[test]
    fn missing_variant_is_reported() {
        match parse_config_str("[target]\nkind = sparse\n", &[]) {
            Err(ConfigError::Validation { invariant, message }) => {
                assert_eq!(invariant, "MissingKey");
                assert!(message.contains("filter.variant"), "{message}");
            }
            other => panic!("expected missing-key error, got {other:?}"),
        }
    }

    #[test]
    fn target_file_roundtrip() {
        let dir = std::env::temp_dir().join("subband_adapt_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ir.csv");
        std::fs::write(&path, "taps\n0.5\n0.25\n").unwrap();
        let sys = read_target_csv(&path, TargetKind::Sparse).unwrap();
        assert_eq!(sys.taps, vec![0.5, 0.25]);
        let text = format!(
            "[target]\nkind = sparse\nfile = {}\n[filter]\nvariant = nlms\nL = 2\n[run]\nsamples = 16\n",
            path.display()
        );
        let cfg = parse_config_str(&text, &[]).unwrap();
        match cfg.target {
            TargetSpec::Fixed(sys) => assert_eq!(sys.taps.len(), 2),
            other => panic!("expected fixed target, got {other:?}"),
        }
    }
}
