//! Experiment configuration: a small TOML file with a top-level `seed` and
//! `trials` plus `[scheme]`, `[channel]`, `[search]`, `[rates]` and
//! `[audit]` sections. Indices in the file (servers `J`, file index,
//! colluding sets) are 1-based.
//!
//! ```toml
//! seed = 7
//! trials = 100
//!
//! [scheme]
//! variant = "block"
//! field = "2^4"
//! n = 6
//! k = 2
//! t = 1
//! m = 3
//! ell = 4
//! N = 3
//! epsilon = 1
//! J = [4, 5, 6]
//! desired = 2
//!
//! [channel]
//! erasures = "exhaustive"
//! ```

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::channel::{BurstMode, ErrorMode};
use crate::field::{Fe, Field, FieldSpec};
use crate::grs::GrsCode;
use crate::pir::{PirScheme, Variant};
use crate::recovering::LocatorPool;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, key: String, message: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    trials: usize,
    scheme: Option<RawScheme>,
    #[serde(default)]
    channel: RawChannel,
    search: Option<RawSearch>,
    rates: Option<RawRates>,
    audit: Option<RawAudit>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    variant: String,
    field: Option<String>,
    q: Option<u32>,
    n: usize,
    k: usize,
    t: usize,
    m: usize,
    ell: usize,
    #[serde(rename = "M", alias = "memory")]
    memory: Option<usize>,
    #[serde(rename = "N", alias = "window")]
    window: Option<usize>,
    #[serde(alias = "eps")]
    epsilon: Option<usize>,
    #[serde(rename = "J", alias = "support")]
    support: Option<Vec<usize>>,
    #[serde(default = "one")]
    desired: usize,
    locators: Option<Vec<u32>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    erasures: Option<String>,
    erasure_count: Option<usize>,
    errors: Option<String>,
    error_weight: Option<usize>,
    byzantine_servers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    rows: Vec<RawSearchRow>,
    pool: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearchRow {
    k: usize,
    #[serde(rename = "M", alias = "memory")]
    memory: usize,
    q: u32,
    gamma: Option<usize>,
    min: Option<f64>,
    max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    n: usize,
    k: usize,
    t: usize,
    ell: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAudit {
    colluding: Vec<Vec<usize>>,
    #[serde(default)]
    broken: bool,
    #[serde(default = "pass")]
    expect: String,
}

fn pass() -> String {
    "pass".into()
}

/// Validated scheme parameters, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub field: FieldSpec,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub m: usize,
    pub ell: usize,
    pub memory: usize,
    pub window: usize,
    pub eps: usize,
    pub support: Vec<usize>,
    pub desired: usize,
    pub locators: Vec<u32>,
}

impl SchemeConfig {
    /// Builds the field, storage code and retrieval plan.
    pub fn build(&self) -> Result<(Arc<Field>, PirScheme), ConfigError> {
        let invalid = |message: String| ConfigError::Invalid { line: None, key: "scheme".into(), message };
        let field = Arc::new(self.field.build().map_err(|e| invalid(e.to_string()))?);
        let locs = self.locators.iter().map(|&a| Fe(a)).collect();
        let code = GrsCode::reed_solomon(field.clone(), self.k, locs).map_err(|e| invalid(e.to_string()))?;
        let (t, m, ell, d) = (self.t, self.m, self.ell, self.desired);
        let scheme = match self.variant {
            Variant::PlainConv => PirScheme::plain(code, t, m, ell, self.memory, self.support.clone(), d),
            Variant::BlockErasure => {
                PirScheme::block_erasure(code, t, m, ell, self.window, self.eps, self.support.clone(), d)
            }
            Variant::ByzantineUm => PirScheme::byzantine(code, t, m, ell, d),
        }
        .map_err(|e| invalid(e.to_string()))?;
        Ok((field, scheme))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub erasures: Option<BurstMode>,
    pub errors: ErrorMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    pub k: usize,
    pub memory: usize,
    pub q: u32,
    pub gamma: Option<usize>,
    /// Accepted range for `p_full`; a miss is a tolerance failure.
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub rows: Vec<SearchRow>,
    pub pool: LocatorPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatesConfig {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub ell: usize,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { n: 100, k: 75, t: 1, ell: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditConfig {
    /// 0-based colluding server sets.
    pub colluding: Vec<Vec<usize>>,
    /// Replace the retrieval code by the zero code (negative control).
    pub broken: bool,
    pub expect_pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub scheme: Option<SchemeConfig>,
    pub channel: ChannelConfig,
    pub search: Option<SearchConfig>,
    pub rates: RatesConfig,
    pub audit: Option<AuditConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        text.parse()
    }

    pub fn scheme(&self) -> Result<&SchemeConfig, ConfigError> {
        self.scheme.as_ref().ok_or(ConfigError::MissingSection("scheme"))
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        Validator { text }.validate(raw)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Validator<'a> {
    text: &'a str,
}

impl Validator<'_> {
    /// First line assigning `key` inside `[section]` (or at top level).
    fn line(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, raw) in self.text.lines().enumerate() {
            let l = raw.trim();
            if let Some(name) = l.strip_prefix('[').and_then(|s| s.split(']').next()) {
                current = name.trim().trim_start_matches('[').to_string();
                continue;
            }
            let Some((k, _)) = l.split_once('=') else { continue };
            if current == section && k.trim() == key {
                return Some(i + 1);
            }
        }
        None
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.line(section, key).or_else(|| self.line("", section)).or_else(|| {
            self.text.lines().position(|l| l.trim() == format!("[{section}]")).map(|i| i + 1)
        });
        let key = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        ConfigError::Invalid { line, key, message: message.into() }
    }

    fn validate(&self, raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
        if raw.trials == 0 {
            return Err(self.err("", "trials", "must be at least 1"));
        }
        let scheme = raw.scheme.map(|s| self.scheme(s)).transpose()?;
        let channel = self.channel(&raw.channel, scheme.as_ref())?;
        let search = raw.search.map(|s| self.search(s)).transpose()?;
        let rates = match raw.rates {
            Some(r) => {
                if r.n == 0 || r.k == 0 || r.t == 0 || r.k + r.t > r.n {
                    return Err(self.err("rates", "n", "need 0 < k, 0 < t and k + t <= n"));
                }
                RatesConfig { n: r.n, k: r.k, t: r.t, ell: r.ell }
            }
            None => RatesConfig::default(),
        };
        let audit = match raw.audit {
            Some(a) => Some(self.audit(a, scheme.as_ref())?),
            None => None,
        };
        Ok(ExperimentConfig { seed: raw.seed, trials: raw.trials, scheme, channel, search, rates, audit })
    }

    fn scheme(&self, s: RawScheme) -> Result<SchemeConfig, ConfigError> {
        let variant: Variant = s.variant.parse().map_err(|e: String| self.err("scheme", "variant", e))?;
        let field = match (&s.field, s.q) {
            (Some(spec), None) => spec.parse::<FieldSpec>().map_err(|e| self.err("scheme", "field", e.to_string()))?,
            (None, Some(q)) => q.to_string().parse::<FieldSpec>().map_err(|e| self.err("scheme", "q", e.to_string()))?,
            (Some(_), Some(_)) => return Err(self.err("scheme", "q", "give either `field` or `q`, not both")),
            (None, None) => return Err(self.err("scheme", "field", "missing field: set `field` or `q`")),
        };
        let q = field.build().map_err(|e| self.err("scheme", "field", e.to_string()))?.order();
        let (n, k, t) = (s.n, s.k, s.t);
        if k == 0 || t == 0 {
            return Err(self.err("scheme", if k == 0 { "k" } else { "t" }, "must be at least 1"));
        }
        if k + t > n {
            return Err(self.err("scheme", "n", format!("need k + t <= n (n={n}, k={k}, t={t})")));
        }
        if n as u64 > q as u64 {
            return Err(self.err("scheme", "n", format!("GF({q}) has fewer than n={n} locators")));
        }
        if s.m == 0 || s.ell == 0 {
            return Err(self.err("scheme", if s.m == 0 { "m" } else { "ell" }, "must be at least 1"));
        }
        if s.desired == 0 || s.desired > s.m {
            return Err(self.err("scheme", "desired", format!("file index must lie in 1..={}", s.m)));
        }
        let locators = match s.locators {
            Some(l) => {
                if l.len() != n {
                    return Err(self.err("scheme", "locators", format!("expected {n} locators, got {}", l.len())));
                }
                if let Some(a) = l.iter().find(|&&a| a as u64 >= q as u64) {
                    return Err(self.err("scheme", "locators", format!("{a} is not an element of GF({q})")));
                }
                let mut sorted = l.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(self.err("scheme", "locators", "locators must be distinct"));
                }
                l
            }
            None if (n as u64) < q as u64 => (1..=n as u32).collect(),
            None => (0..n as u32).collect(),
        };
        let support: Vec<usize> = match s.support {
            Some(j) => {
                if let Some(&bad) = j.iter().find(|&&x| x == 0 || x > n) {
                    return Err(self.err("scheme", "J", format!("server {bad} outside 1..={n}")));
                }
                j.into_iter().map(|x| x - 1).collect()
            }
            // default: the last d* - 1 servers, or every server when sub-rounds are allowed
            None => match variant {
                Variant::PlainConv => ((n - (n + 1 - k - t))..n).collect(),
                _ => (0..n).collect(),
            },
        };
        let (mut memory, mut window, mut eps) = (s.memory.unwrap_or(0), 1, 0);
        match variant {
            Variant::PlainConv => {
                if s.window.is_some() || s.epsilon.is_some() {
                    return Err(self.err("scheme", "N", "N and epsilon only apply to the block variant"));
                }
            }
            Variant::BlockErasure => {
                window = s.window.ok_or_else(|| self.err("scheme", "N", "block variant needs N"))?;
                eps = s.epsilon.ok_or_else(|| self.err("scheme", "epsilon", "block variant needs epsilon"))?;
                if window <= eps {
                    return Err(self.err("scheme", "N", format!("need N > epsilon (N={window}, epsilon={eps})")));
                }
                if s.memory.is_some_and(|m| m != eps) {
                    return Err(self.err("scheme", "M", format!("block variant uses memory M = epsilon = {eps}")));
                }
                memory = eps;
                let min = (window * k).div_ceil(window - eps);
                if support.len() < min {
                    return Err(self.err("scheme", "J", format!("|J| = {} below ceil(Nk/(N-eps)) = {min}", support.len())));
                }
            }
            Variant::ByzantineUm => {
                if n <= 3 * k + t - 1 {
                    return Err(self.err("scheme", "n", format!("byzantine variant needs n > 3k+t-1 = {}", 3 * k + t - 1)));
                }
                if s.memory.is_some_and(|m| m != 1) {
                    return Err(self.err("scheme", "M", "byzantine variant has unit memory"));
                }
                if locators.contains(&0) {
                    return Err(self.err("scheme", "locators", "byzantine variant needs nonzero locators"));
                }
                memory = 1;
            }
        }
        Ok(SchemeConfig {
            variant,
            field,
            n,
            k,
            t,
            m: s.m,
            ell: s.ell,
            memory,
            window,
            eps,
            support,
            desired: s.desired - 1,
            locators,
        })
    }

    fn channel(&self, c: &RawChannel, scheme: Option<&SchemeConfig>) -> Result<ChannelConfig, ConfigError> {
        let erasures = match c.erasures.as_deref() {
            None | Some("none") => None,
            Some(mode) => {
                if scheme.is_some_and(|s| s.variant == Variant::PlainConv) {
                    return Err(self.err("channel", "erasures", "the plain variant does not tolerate erasures"));
                }
                Some(match mode {
                    "exhaustive" => BurstMode::Exhaustive,
                    "all" | "admissible" => BurstMode::AllAdmissible,
                    "shifted" | "shifted-family" => BurstMode::ShiftedFamily,
                    "random" => BurstMode::Random { seed: 0, count: c.erasure_count.unwrap_or(1) },
                    other => {
                        return Err(self.err(
                            "channel",
                            "erasures",
                            format!("unknown mode {other:?} (none, exhaustive, all, shifted, random)"),
                        ))
                    }
                })
            }
        };
        let errors = match c.errors.as_deref() {
            None | Some("none") => ErrorMode::Empty,
            Some(mode) => {
                if scheme.is_some_and(|s| s.variant != Variant::ByzantineUm) {
                    return Err(self.err("channel", "errors", "symbol errors need the byzantine variant"));
                }
                match mode {
                    "budget" => ErrorMode::Budget,
                    "adversarial" => ErrorMode::Adversarial {
                        weight: c.error_weight.ok_or_else(|| self.err("channel", "error_weight", "required"))?,
                    },
                    "byzantine" => ErrorMode::ByzantineFixed { b: c.byzantine_servers.unwrap_or(1) },
                    other => {
                        return Err(self.err(
                            "channel",
                            "errors",
                            format!("unknown mode {other:?} (none, budget, adversarial, byzantine)"),
                        ))
                    }
                }
            }
        };
        if erasures.is_some() && errors != ErrorMode::Empty {
            return Err(self.err("channel", "errors", "erasures and errors cannot be combined"));
        }
        Ok(ChannelConfig { erasures, errors })
    }

    fn search(&self, s: RawSearch) -> Result<SearchConfig, ConfigError> {
        let pool = match s.pool.as_deref() {
            None => LocatorPool::default(),
            Some(p) => p.parse().map_err(|e: String| self.err("search", "pool", e))?,
        };
        if s.rows.is_empty() {
            return Err(self.err("search", "rows", "at least one row is required"));
        }
        let rows = s
            .rows
            .into_iter()
            .map(|r| {
                if r.k == 0 {
                    return Err(self.err("search", "rows", "k must be at least 1"));
                }
                FieldSpec::from_str(&r.q.to_string()).map_err(|e| self.err("search", "rows", e.to_string()))?;
                Ok(SearchRow { k: r.k, memory: r.memory, q: r.q, gamma: r.gamma, min: r.min, max: r.max })
            })
            .collect::<Result<_, _>>()?;
        Ok(SearchConfig { rows, pool })
    }

    fn audit(&self, a: RawAudit, scheme: Option<&SchemeConfig>) -> Result<AuditConfig, ConfigError> {
        let scheme = scheme.ok_or(ConfigError::MissingSection("scheme"))?;
        let expect_pass = match a.expect.as_str() {
            "pass" => true,
            "fail" => false,
            other => return Err(self.err("audit", "expect", format!("expected \"pass\" or \"fail\", got {other:?}"))),
        };
        let mut colluding = Vec::new();
        for set in a.colluding {
            if set.is_empty() || set.len() > scheme.t {
                return Err(self.err("audit", "colluding", format!("sets must have 1..={} servers", scheme.t)));
            }
            if let Some(&bad) = set.iter().find(|&&x| x == 0 || x > scheme.n) {
                return Err(self.err("audit", "colluding", format!("server {bad} outside 1..={}", scheme.n)));
            }
            colluding.push(set.into_iter().map(|x| x - 1).collect());
        }
        Ok(AuditConfig { colluding, broken: a.broken, expect_pass })
    }
}
