//! Critical offspring distributions in the domain of attraction of a stable law.
//!
//! Two families are built in:
//!
//! * [`Family::StablePower`], the law with generating function
//!   `φ(s) = s + c(1-s)^γ`. It satisfies the stable CLT with `b_n = n^{1/γ}`
//!   and `κ = c` exactly. Its pmf is `c, 1 - cγ` at `0, 1` and
//!   `c (-1)^k binom(γ, k)` for `k ≥ 2`.
//! * [`Family::FiniteVariancePmf`], an explicit finitely supported pmf with
//!   `b_n = σ √n` and `κ = 1/2`.
//!
//! For the stable family the first [`STABLE_TABLE_LEN`] probabilities are
//! tabulated; beyond the table, probabilities and tail masses are evaluated
//! in closed form, so the law is never truncated.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::theory::{self, special::ln_gamma};

/// Number of explicitly tabulated probabilities for the stable family.
pub const STABLE_TABLE_LEN: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffspringError {
    #[error("stability index γ = {0} outside (1, 2]")]
    InvalidGamma(f64),
    #[error("coefficient c = {c} outside (0, 1/γ] for γ = {gamma}")]
    InvalidCoefficient { gamma: f64, c: f64 },
    #[error("offspring law is not critical: mean = {0}")]
    NotCritical(f64),
    #[error("offspring law is degenerate: P(ξ = 0) = 0")]
    Degenerate,
    #[error("offspring law has zero variance")]
    ZeroVariance,
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    StablePower,
    FiniteVariancePmf,
}

/// Choice of the normalising sequence `(b_n)`.
///
/// `Custom` sets `b_n = scale · n^{1/γ}` together with the matching stable
/// constant; keeping the pair consistent is the caller's responsibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    Canonical,
    Custom { scale: f64, kappa: f64 },
}

/// Closed-form tail of the stable family beyond the table.
///
/// With `a = γ - 1` and `g_m = a Γ(m-a) / (Γ(1-a) Γ(m+1))` (the Sibuya
/// probabilities) we have `P(ξ ≥ k) = c g_{k-1}` and `P(ξ = k) = cγ g_{k-1}/k`
/// for `k ≥ 2`.
#[derive(Debug, Clone, Copy)]
struct StableTail {
    c: f64,
    a: f64,
    ln_front: f64,
}

impl StableTail {
    fn new(gamma: f64, c: f64) -> Self {
        let a = gamma - 1.0;
        Self { c, a, ln_front: a.ln() - ln_gamma(1.0 - a) }
    }

    fn sibuya(&self, m: u64) -> f64 {
        let m = m as f64;
        let ln_ratio = if m < 1000.0 {
            ln_gamma(m - self.a) - ln_gamma(m + 1.0)
        } else {
            ln_gamma_ratio_asymptotic(m, -self.a, 1.0)
        };
        (self.ln_front + ln_ratio).exp()
    }

    /// `P(ξ ≥ k)` for `k ≥ 2`.
    fn survival(&self, k: u64) -> f64 {
        self.c * self.sibuya(k - 1)
    }

    fn pmf(&self, k: u64) -> f64 {
        self.c * (1.0 + self.a) * self.sibuya(k - 1) / k as f64
    }
}

/// `ln Γ(m+x) - ln Γ(m+y)` for large `m`, via the Bernoulli-polynomial
/// expansion (error `O(m^{-4})`).
fn ln_gamma_ratio_asymptotic(m: f64, x: f64, y: f64) -> f64 {
    let b2 = |t: f64| t * t - t + 1.0 / 6.0;
    let b3 = |t: f64| t * t * t - 1.5 * t * t + 0.5 * t;
    let b4 = |t: f64| t * t * t * t - 2.0 * t * t * t + t * t - 1.0 / 30.0;
    (x - y) * m.ln() + (b2(x) - b2(y)) / (2.0 * m) - (b3(x) - b3(y)) / (6.0 * m * m)
        + (b4(x) - b4(y)) / (12.0 * m * m * m)
}

#[derive(Debug, Clone)]
pub struct OffspringModel {
    family: Family,
    gamma: f64,
    kappa: f64,
    c: f64,
    sigma2: Option<f64>,
    span: u64,
    pmf: Vec<f64>,
    /// `survival[k] = P(ξ ≥ k)` for `k ≤ pmf.len()`.
    survival: Vec<f64>,
    /// `suffix_max[k] = max_{j ≥ k} P(ξ = j)` over the table.
    suffix_max: Vec<f64>,
    tail: Option<StableTail>,
    normalization: Normalization,
}

fn suffix_max(pmf: &[f64]) -> Vec<f64> {
    let mut out = pmf.to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] = out[k].max(out[k + 1]);
    }
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl OffspringModel {
    /// The law with generating function `s + c(1-s)^γ`.
    pub fn stable_power(gamma: f64, c: f64) -> Result<Self, OffspringError> {
        if !(gamma > 1.0 && gamma <= 2.0) {
            return Err(OffspringError::InvalidGamma(gamma));
        }
        if !(c > 0.0 && c <= 1.0 / gamma + 1e-15) {
            return Err(OffspringError::InvalidCoefficient { gamma, c });
        }
        let a = gamma - 1.0;
        let mut p1 = 1.0 - c * gamma;
        if p1.abs() < 1e-14 {
            p1 = 0.0;
        }
        let (pmf, survival, tail) = if gamma == 2.0 {
            (vec![c, p1, c], vec![1.0, 1.0 - c, c, 0.0], None)
        } else {
            let mut pmf = Vec::with_capacity(STABLE_TABLE_LEN);
            let mut survival = Vec::with_capacity(STABLE_TABLE_LEN + 1);
            pmf.extend([c, p1]);
            survival.extend([1.0, 1.0 - c]);
            // g_{k-1} by the ratio recurrence g_m = g_{m-1} (m-1-a)/m
            let mut g = a;
            for k in 2..STABLE_TABLE_LEN {
                survival.push(c * g);
                pmf.push(c * gamma * g / k as f64);
                g *= (k as f64 - 1.0 - a) / k as f64;
            }
            survival.push(c * g);
            (pmf, survival, Some(StableTail::new(gamma, c)))
        };
        let span = if gamma < 2.0 || p1 > 0.0 { 1 } else { 2 };
        let suffix_max = suffix_max(&pmf);
        Ok(Self {
            family: Family::StablePower,
            gamma,
            kappa: c,
            c,
            sigma2: if gamma == 2.0 { Some(2.0 * c) } else { None },
            span,
            pmf,
            survival,
            suffix_max,
            tail,
            normalization: Normalization::Canonical,
        })
    }

    /// A finitely supported critical pmf with positive, finite variance.
    ///
    /// Probabilities are renormalised to sum to one; the mean must be one
    /// within `1e-9`.
    pub fn finite_variance(pmf: &BTreeMap<u64, f64>) -> Result<Self, OffspringError> {
        let Some((&max_k, _)) = pmf.iter().next_back() else {
            return Err(OffspringError::InvalidPmf("empty pmf".into()));
        };
        if max_k > 1 << 24 {
            return Err(OffspringError::InvalidPmf(format!("support too large (max k = {max_k})")));
        }
        if pmf.values().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(OffspringError::InvalidPmf("probabilities must be finite and non-negative".into()));
        }
        let mass: f64 = pmf.values().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(OffspringError::InvalidPmf(format!("probabilities sum to {mass}")));
        }
        let mut table = vec![0.0; max_k as usize + 1];
        for (&k, &p) in pmf {
            table[k as usize] = p / mass;
        }
        if table[0] <= 0.0 {
            return Err(OffspringError::Degenerate);
        }
        let mean: f64 = table.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if (mean - 1.0).abs() > 1e-9 {
            return Err(OffspringError::NotCritical(mean));
        }
        let second: f64 = table.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        let var = second - mean * mean;
        if var <= 1e-12 {
            return Err(OffspringError::ZeroVariance);
        }
        let mut survival = vec![0.0; table.len() + 1];
        for k in (0..table.len()).rev() {
            survival[k] = survival[k + 1] + table[k];
        }
        let span = table.iter().enumerate().skip(1).filter(|(_, p)| **p > 0.0).fold(0, |g, (k, _)| gcd(g, k as u64));
        let suffix_max = suffix_max(&table);
        Ok(Self {
            family: Family::FiniteVariancePmf,
            gamma: 2.0,
            kappa: 0.5,
            c: f64::NAN,
            sigma2: Some(var),
            span,
            pmf: table,
            survival,
            suffix_max,
            tail: None,
            normalization: Normalization::Canonical,
        })
    }

    /// `P(ξ = 0) = P(ξ = 2) = 1/2`: uniform full binary trees.
    pub fn catalan() -> Self {
        Self::finite_variance(&BTreeMap::from([(0, 0.5), (2, 0.5)])).expect("valid pmf")
    }

    /// `P(ξ = k) = 2^{-k-1}`: uniform ordered trees. The support is cut where
    /// the remaining mass drops below `1e-20`.
    pub fn geometric() -> Self {
        let pmf: BTreeMap<u64, f64> = (0..68u64).map(|k| (k, 0.5f64.powi(k as i32 + 1))).collect();
        let mass: f64 = pmf.values().sum();
        let pmf = pmf.into_iter().map(|(k, p)| (k, p / mass)).collect();
        Self::finite_variance(&pmf).expect("valid pmf")
    }

    /// Override the canonical normalisation `b_n`.
    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Stable constant matching [`Self::normalizer`].
    pub fn kappa(&self) -> f64 {
        match self.normalization {
            Normalization::Canonical => self.kappa,
            Normalization::Custom { kappa, .. } => kappa,
        }
    }

    /// The generating-function coefficient `c` (stable family only).
    pub fn coefficient(&self) -> Option<f64> {
        (self.family == Family::StablePower).then_some(self.c)
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    pub fn span(&self) -> u64 {
        self.span
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Length of the explicit probability table.
    pub fn truncation_k(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match (self.pmf.get(k as usize), self.tail) {
            (Some(p), _) => *p,
            (None, Some(tail)) => tail.pmf(k),
            (None, None) => 0.0,
        }
    }

    /// `P(ξ ≥ k)`.
    pub fn survival(&self, k: u64) -> f64 {
        match (self.survival.get(k as usize), self.tail) {
            (Some(s), _) => *s,
            (None, Some(tail)) => tail.survival(k),
            (None, None) => 0.0,
        }
    }

    /// `P(ξ = k)` for `k < len`.
    pub fn pmf_head(&self, len: usize) -> Vec<f64> {
        (0..len as u64).map(|k| self.pmf(k)).collect()
    }

    /// `max_{j ≥ k} P(ξ = j)`. Beyond the table the stable pmf is decreasing.
    pub fn max_pmf_from(&self, k: u64) -> f64 {
        match self.suffix_max.get(k as usize) {
            Some(m) => *m,
            None => self.pmf(k),
        }
    }

    /// Largest `k` with an explicitly stored probability, plus one.
    pub(crate) fn table_len(&self) -> usize {
        self.pmf.len()
    }

    /// Inverse-transform draw from `ξ | ξ ≥ k` driven by `u ∈ (0, 1)`.
    ///
    /// Returns `None` when the draw exceeds `cap`, without locating it.
    pub fn sample_at_least(&self, k: u64, u: f64, cap: u64) -> Option<u64> {
        let target = u * self.survival(k);
        // X = min { j ≥ k : P(ξ ≥ j+1) ≤ target }
        if self.survival(cap.saturating_add(1)) > target {
            return None;
        }
        let len = self.survival.len() as u64;
        if k + 1 < len {
            let window = &self.survival[(k + 1) as usize..];
            let idx = window.partition_point(|s| *s > target) as u64;
            if k + 1 + idx < len {
                return Some(k + idx);
            }
        }
        // closed-form tail: bracket then bisect on j+1 in (lo, hi]
        let tail = self.tail.expect("finite table always resolves the draw");
        let mut lo = k.max(len - 1);
        let mut hi = lo.max(2) * 2;
        while tail.survival(hi) > target {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail.survival(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((hi - 1).max(k))
    }

    /// Normalising sequence `b_n` of the stable CLT.
    pub fn normalizer(&self, n: u64) -> f64 {
        let n = n as f64;
        match (self.normalization, self.family) {
            (Normalization::Custom { scale, .. }, _) => scale * n.powf(1.0 / self.gamma),
            (Normalization::Canonical, Family::StablePower) => n.powf(1.0 / self.gamma),
            (Normalization::Canonical, Family::FiniteVariancePmf) => {
                (self.sigma2.expect("finite variance") * n).sqrt()
            }
        }
    }

    /// Density at zero of the limiting stable law.
    pub fn g0(&self) -> f64 {
        theory::g0(self.gamma, self.kappa())
    }

    /// Local-limit approximation `λ₀ g(0) / b_n` of `P(S_n = n - 1)`.
    pub fn expected_acceptance(&self, n: u64) -> f64 {
        (self.span as f64 * self.g0() / self.normalizer(n)).min(1.0)
    }

    /// Positive support values up to `limit` that generate, as a numerical
    /// semigroup, every sum reachable with support values `≤ limit`.
    fn generators(&self, limit: u64) -> Vec<u64> {
        match self.tail {
            // every k ≥ 4 is a sum of 2s and 3s, both of which are in the support
            Some(_) => [1u64, 2, 3].into_iter().filter(|&k| k <= limit && self.pmf(k) > 0.0).collect(),
            None => (1..self.pmf.len() as u64).filter(|&k| k <= limit && self.pmf(k) > 0.0).collect(),
        }
    }

    /// Whether `P(|τ| = n) > 0`, i.e. `P(S_n = n - 1) > 0`.
    ///
    /// Any representation of `n - 1` as a sum of positive support values uses
    /// at most `n - 1` terms, so the question reduces to membership in the
    /// numerical semigroup spanned by the support.
    pub fn support_contains(&self, n: u64) -> bool {
        if n == 0 {
            return false;
        }
        let target = n - 1;
        if !target.is_multiple_of(self.span) {
            return false;
        }
        if target == 0 {
            return true;
        }
        let gens = self.generators(target);
        let mut reach = vec![false; target as usize + 1];
        reach[0] = true;
        for s in 1..=target as usize {
            reach[s] = gens.iter().any(|&g| g as usize <= s && reach[s - g as usize]);
        }
        reach[target as usize]
    }

    /// Serializable description of the model.
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.family,
            gamma: self.gamma,
            kappa_or_c: match self.family {
                Family::StablePower => self.c,
                Family::FiniteVariancePmf => self.kappa,
            },
            pmf: (self.family == Family::FiniteVariancePmf).then(|| {
                self.pmf
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(k, p)| (k.to_string(), *p))
                    .collect()
            }),
            truncation_k: self.truncation_k(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_spec()).expect("model spec serializes")
    }
}

/// JSON form of an [`OffspringModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub gamma: f64,
    pub kappa_or_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<BTreeMap<String, f64>>,
    #[serde(rename = "truncation_K")]
    pub truncation_k: usize,
}

impl TryFrom<&ModelSpec> for OffspringModel {
    type Error = OffspringError;

    fn try_from(spec: &ModelSpec) -> Result<Self, Self::Error> {
        match spec.family {
            Family::StablePower => OffspringModel::stable_power(spec.gamma, spec.kappa_or_c),
            Family::FiniteVariancePmf => {
                let raw = spec.pmf.as_ref().ok_or_else(|| OffspringError::InvalidPmf("missing pmf".into()))?;
                let mut pmf = BTreeMap::new();
                for (k, p) in raw {
                    let k: u64 = k.parse().map_err(|_| OffspringError::InvalidPmf(format!("bad key {k:?}")))?;
                    pmf.insert(k, *p);
                }
                OffspringModel::finite_variance(&pmf)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Generalised binomial coefficient by the product formula.
    fn binom(g: f64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, j| acc * (g - j as f64) / (j as f64 + 1.0))
    }

    #[test]
    fn catalan_from_stable_family() {
        let m = OffspringModel::stable_power(2.0, 0.5).unwrap();
        assert_eq!(m.pmf_head(4), vec![0.5, 0.0, 0.5, 0.0]);
        assert_eq!(m.span(), 2);
        assert_eq!(m.kappa(), 0.5);
    }

    #[test]
    fn stable_coefficients_match_binomial_series() {
        let m = OffspringModel::stable_power(1.5, 0.5).unwrap();
        assert_eq!(m.pmf(0), 0.5);
        assert_eq!(m.pmf(1), 0.25);
        assert!((m.pmf(2) - 0.1875).abs() < 1e-15);
        for (gamma, c) in [(1.5, 0.5), (1.2, 0.8), (1.8, 0.3)] {
            let m = OffspringModel::stable_power(gamma, c).unwrap();
            for k in 2..200 {
                let want = c * if k % 2 == 0 { 1.0 } else { -1.0 } * binom(gamma, k);
                assert!(((m.pmf(k) - want) / want).abs() < 1e-9, "γ={gamma} k={k}");
            }
            // the closed-form tail continues the table
            let k = STABLE_TABLE_LEN as u64;
            let tab = m.pmf[k as usize - 1];
            let next = m.tail.unwrap().pmf(k - 1);
            assert!(((tab - next) / tab).abs() < 1e-9);
            assert!(((m.survival(k) - m.tail.unwrap().survival(k)) / m.survival(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn stable_mass_and_mean_with_analytic_tail() {
        for (gamma, c) in [(1.5, 0.5), (1.1, 0.9), (1.9, 0.2)] {
            let m = OffspringModel::stable_power(gamma, c).unwrap();
            let k = m.table_len();
            let head_mass: f64 = m.pmf.iter().sum();
            assert!((head_mass + m.survival(k as u64) - 1.0).abs() < 1e-12);
            // E[ξ; ξ ≥ K] = (K-1) c g_{K-1} + c Σ_{m ≥ K-1} g_m,
            // Σ_{m ≥ M} g_m = Γ(M-a) / (Γ(1-a) Γ(M))
            let a = gamma - 1.0;
            let kk = k as f64;
            let tail_sum = (ln_gamma(kk - 1.0 - a) - ln_gamma(1.0 - a) - ln_gamma(kk - 1.0)).exp();
            let tail_mean = (kk - 1.0) * m.survival(k as u64) + c * tail_sum;
            let head_mean: f64 = m.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            assert!((head_mean + tail_mean - 1.0).abs() < 1e-9, "γ={gamma}: {}", head_mean + tail_mean);
        }
    }

    #[test]
    fn finite_variance_examples() {
        let g = OffspringModel::geometric();
        assert!((g.sigma2().unwrap() - 2.0).abs() < 1e-12);
        assert!((g.normalizer(100) - 200f64.sqrt()).abs() < 1e-9);
        assert!((g.normalizer(2) - 2.0).abs() < 1e-12);
        let c = OffspringModel::catalan();
        assert_eq!(c.sigma2(), Some(1.0));
        assert_eq!(c.normalizer(9), 3.0);
        assert_eq!(c.kappa(), 0.5);
        assert_eq!(
            OffspringModel::finite_variance(&BTreeMap::from([(1, 1.0)])).unwrap_err(),
            OffspringError::Degenerate
        );
        assert!(matches!(
            OffspringModel::finite_variance(&BTreeMap::from([(0, 0.4), (2, 0.6)])),
            Err(OffspringError::NotCritical(_))
        ));
    }

    #[test]
    fn stable_normalizer() {
        let m = OffspringModel::stable_power(1.5, 0.5).unwrap();
        assert!((m.normalizer(32) - 10.079_368).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OffspringModel::stable_power(1.0, 0.5).is_err());
        assert!(OffspringModel::stable_power(2.1, 0.3).is_err());
        assert!(OffspringModel::stable_power(1.5, 0.7).is_err());
        assert!(OffspringModel::stable_power(1.5, 0.0).is_err());
        assert!(OffspringModel::stable_power(1.5, 1.0 / 1.5).is_ok());
    }

    #[test]
    fn span_matches_brute_force() {
        let models = [
            OffspringModel::catalan(),
            OffspringModel::geometric(),
            OffspringModel::stable_power(1.5, 0.5).unwrap(),
            OffspringModel::stable_power(2.0, 0.3).unwrap(),
            OffspringModel::finite_variance(&BTreeMap::from([(0, 2.0 / 3.0), (3, 1.0 / 3.0)])).unwrap(),
            OffspringModel::finite_variance(&BTreeMap::from([(0, 0.5), (2, 0.25), (4, 0.125), (0, 0.5)]))
                .unwrap_or_else(|_| OffspringModel::catalan()),
        ];
        for m in &models {
            let support: Vec<u64> = (1..200).filter(|&k| m.pmf(k) > 0.0).collect();
            let brute = (1..=200u64).rev().find(|l| support.iter().all(|k| k % l == 0)).unwrap();
            assert_eq!(m.span(), brute);
        }
    }

    #[test]
    fn support_examples() {
        let c = OffspringModel::catalan();
        assert!(!c.support_contains(4));
        assert!(c.support_contains(3));
        assert!(c.support_contains(1));
        let g = OffspringModel::geometric();
        assert!(g.support_contains(2));
        // pmf(1) = 0 for c = 1/γ: a single child is impossible
        let s = OffspringModel::stable_power(1.5, 1.0 / 1.5).unwrap();
        assert!(!s.support_contains(2));
        assert!(s.support_contains(3) && s.support_contains(4));
        let p = OffspringModel::finite_variance(&BTreeMap::from([(0, 0.75), (4, 0.25 * 0.5), (6, 0.25 * 0.5)]));
        assert!(p.is_err(), "mean 1.25 is not critical");
        let q = OffspringModel::finite_variance(&BTreeMap::from([(0, 0.8), (4, 0.1), (6, 0.1)])).unwrap();
        // support {0, 4, 6}: span 2 but a sum of 2 is not reachable
        assert_eq!(q.span(), 2);
        assert!(!q.support_contains(3) && !q.support_contains(4));
        assert!(q.support_contains(5) && q.support_contains(7) && q.support_contains(9) && q.support_contains(11));
    }

    #[test]
    fn conditional_tail_draws() {
        let m = OffspringModel::stable_power(1.5, 0.5).unwrap();
        // u → 1 returns the conditioning value itself
        assert_eq!(m.sample_at_least(5, 1.0 - 1e-15, u64::MAX), Some(5));
        // draws beyond the table are consistent with the survival function
        let k = STABLE_TABLE_LEN as u64 + 10;
        let u = 0.3;
        let x = m.sample_at_least(k, u, u64::MAX).unwrap();
        let t = u * m.survival(k);
        assert!(m.survival(x + 1) <= t && m.survival(x) > t);
        let y = m.sample_at_least(2, 1e-9, u64::MAX).unwrap();
        let t = 1e-9 * m.survival(2);
        assert!(m.survival(y + 1) <= t && m.survival(y) > t);
        assert_eq!(m.sample_at_least(2, 1e-9, 1000), None);
        let c = OffspringModel::catalan();
        assert_eq!(c.sample_at_least(1, 0.5, 100), Some(2));
        assert_eq!(c.sample_at_least(0, 0.9, 100), Some(0));
        assert_eq!(c.sample_at_least(0, 0.4, 100), Some(2));
    }

    #[test]
    fn json_round_trip() {
        for m in [OffspringModel::catalan(), OffspringModel::stable_power(1.5, 0.5).unwrap()] {
            let json = m.to_json();
            assert!(json.contains("\"truncation_K\""));
            let spec: ModelSpec = serde_json::from_str(&json).unwrap();
            let back = OffspringModel::try_from(&spec).unwrap();
            assert_eq!(back.to_spec(), m.to_spec());
        }
    }
}
