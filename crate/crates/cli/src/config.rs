//! Flat configuration shared by flags and config files.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Catalan,
    Geometric,
    Stable,
    Pmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Every key is optional; flags override file values key by key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FlatConfig {
    /// Offspring law
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyArg>,
    /// Stable index γ in (1, 2] (stable family)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Coefficient c of φ(s) = s + c(1-s)^γ (stable family)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Finite pmf as `k:p,k:p,...` (pmf family)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<String>,
    /// Stable constant matching --bn-scale
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Normalisation b_n = scale · n^{1/γ}; needs --kappa
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bn_scale: Option<f64>,
    /// Tree sizes (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    /// Excursion grid sizes (comma separated)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u64>>,
    /// Replicates per size
    #[arg(long = "R")]
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    /// Mass exponents α' (comma separated, paired with --beta)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub alpha_prime: Option<Vec<f64>>,
    /// Height exponents β (comma separated, paired with --alpha-prime)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Height moment orders (comma separated)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    /// Levels of the continuum sweep
    #[arg(long = "K")]
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Master seed (auto-generated when absent)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads (default: BGWF_WORKERS, else 1)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Rejection attempts per tree
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Output file (default stdout)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $(if $top.$f.is_some() { $base.$f = $top.$f; })*
    };
}

impl FlatConfig {
    /// Read a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// Keys set in `top` replace those in `self`.
    pub fn overlay(mut self, top: FlatConfig) -> Self {
        overlay!(self, top; family, gamma, c, pmf, kappa, bn_scale, n, m, r, alpha_prime, beta, powers, levels,
            seed, workers, budget, out, format);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("flat config serializes")
    }
}

/// Parse `k:p,k:p,...`.
pub fn parse_pmf(text: &str) -> Result<std::collections::BTreeMap<u64, f64>, UsageError> {
    let mut pmf = std::collections::BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, p) = item.split_once(':').ok_or_else(|| usage(format!("pmf entry {item:?} is not k:p")))?;
        let k: u64 = k.trim().parse().map_err(|_| usage(format!("pmf key {k:?} is not an integer")))?;
        let p: f64 = p.trim().parse().map_err(|_| usage(format!("pmf weight {p:?} is not a number")))?;
        if pmf.insert(k, p).is_some() {
            return Err(usage(format!("pmf key {k} repeated")));
        }
    }
    Ok(pmf)
}
