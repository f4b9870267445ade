//! Additive functionals and rescaled mass/height measures on annotated trees.
//!
//! Heights count edges: a leaf has `H(t_w) = 0`, and internal vertices have
//! `H(t_w) ≥ 1`. Power tolls use the convention `0^0 = 1`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::offspring::OffspringModel;
use crate::sampler::AnnotatedTree;
use crate::stats::KahanSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("toll is not finite at vertex {vertex} (value {value})")]
    NonFinite { vertex: usize, value: f64 },
}

/// `v^e` with `0^0 = 1` and fast paths for small integer exponents.
#[inline]
pub fn pow0(v: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        v
    } else if e == e.trunc() && e.abs() <= 16.0 {
        v.powi(e as i32)
    } else {
        v.powf(e)
    }
}

/// Toll `f(x, u)` of relative mass `x ∈ (0, 1]` and rescaled height `u ≥ 0`.
#[derive(Clone)]
pub enum TollFunction {
    /// `x^α u^β`
    PowerMassHeight { alpha: f64, beta: f64 },
    /// `|log x| x^α`
    PowerLogMass { alpha: f64 },
    /// `1/u`
    InverseHeight,
    /// `1` on subtrees with more than one vertex (`u > 0`), else `0`.
    Internal,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TollFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerMassHeight { alpha, beta } => write!(f, "PowerMassHeight({alpha}, {beta})"),
            Self::PowerLogMass { alpha } => write!(f, "PowerLogMass({alpha})"),
            Self::InverseHeight => write!(f, "InverseHeight"),
            Self::Internal => write!(f, "Internal"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TollFunction {
    pub fn power(alpha: f64, beta: f64) -> Self {
        Self::PowerMassHeight { alpha, beta }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match self {
            Self::PowerMassHeight { alpha, beta } => pow0(x, *alpha) * pow0(u, *beta),
            Self::PowerLogMass { alpha } => x.ln().abs() * pow0(x, *alpha),
            Self::InverseHeight => 1.0 / u,
            Self::Internal => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Custom(f) => f(x, u),
        }
    }
}

/// Exponents `p, q` of a prefactor `b_n^p n^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub b_power: f64,
    pub n_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValue {
    pub value: f64,
    pub n: usize,
    pub scaling_applied: Scaling,
    pub internal_only: bool,
}

/// Statistics of the fringe subtree at one vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtreeStats {
    pub vertex: usize,
    pub size: u32,
    pub height: u32,
    pub depth: u32,
    pub degree: u32,
}

fn stats(tree: &AnnotatedTree, v: usize) -> SubtreeStats {
    SubtreeStats {
        vertex: v,
        size: tree.subtree_size()[v],
        height: tree.subtree_height()[v],
        depth: tree.depth()[v],
        degree: tree.degree()[v],
    }
}

/// `Σ_{w ∈ t} toll(t_w)`.
pub fn additive_functional(
    tree: &AnnotatedTree,
    toll: impl Fn(SubtreeStats) -> f64,
) -> Result<f64, FunctionalError> {
    let mut sum = KahanSum::new();
    for v in 0..tree.n() {
        let value = toll(stats(tree, v));
        if !value.is_finite() {
            return Err(FunctionalError::NonFinite { vertex: v, value });
        }
        sum.add(value);
    }
    Ok(sum.value())
}

/// `(b_n/n²) Σ_w |t_w| f(|t_w|/n, (b_n/n) H(t_w))` over internal vertices
/// (`internal_only`) or over all vertices.
pub fn a_measure(
    tree: &AnnotatedTree,
    model: &OffspringModel,
    toll: &TollFunction,
    internal_only: bool,
) -> Result<FunctionalValue, FunctionalError> {
    let n = tree.n();
    let nf = n as f64;
    let b = model.normalizer(n as u64);
    let a = b / nf;
    let mut sum = KahanSum::new();
    let sizes = tree.subtree_size();
    let heights = tree.subtree_height();
    for v in 0..n {
        if internal_only && tree.degree()[v] == 0 {
            continue;
        }
        let s = sizes[v] as f64;
        let value = s * toll.eval(s / nf, a * heights[v] as f64);
        if !value.is_finite() {
            return Err(FunctionalError::NonFinite { vertex: v, value });
        }
        sum.add(value);
    }
    Ok(FunctionalValue {
        value: b / (nf * nf) * sum.value(),
        n,
        scaling_applied: Scaling { b_power: 1.0, n_power: -2.0 },
        internal_only,
    })
}

/// `(b_n^{1+β} / n^{1+α′+β}) Σ_{w internal} |t_w|^{α′} H(t_w)^β`.
pub fn rescaled_power_sum(tree: &AnnotatedTree, model: &OffspringModel, alpha_prime: f64, beta: f64) -> FunctionalValue {
    let n = tree.n();
    let nf = n as f64;
    let b = model.normalizer(n as u64);
    let mut sum = KahanSum::new();
    let sizes = tree.subtree_size();
    let heights = tree.subtree_height();
    for v in 0..n {
        if tree.degree()[v] > 0 {
            sum.add(pow0(sizes[v] as f64, alpha_prime) * pow0(heights[v] as f64, beta));
        }
    }
    let log_prefactor = (1.0 + beta) * b.ln() - (1.0 + alpha_prime + beta) * nf.ln();
    FunctionalValue {
        value: log_prefactor.exp() * sum.value(),
        n,
        scaling_applied: Scaling { b_power: 1.0 + beta, n_power: -(1.0 + alpha_prime + beta) },
        internal_only: true,
    }
}

/// `(b_n/n^{2+α}) Σ_w |t_w|^{1+α} log|t_w|`, the remainder in
/// `A(|log x| x^α) = log(n) A(x^α) - remainder`.
pub fn power_log_remainder(tree: &AnnotatedTree, model: &OffspringModel, alpha: f64, internal_only: bool) -> f64 {
    let n = tree.n();
    let nf = n as f64;
    let b = model.normalizer(n as u64);
    let mut sum = KahanSum::new();
    for v in 0..n {
        if internal_only && tree.degree()[v] == 0 {
            continue;
        }
        let s = tree.subtree_size()[v] as f64;
        sum.add(pow0(s, 1.0 + alpha) * s.ln());
    }
    b / nf.powf(2.0 + alpha) * sum.value()
}

/// `Σ_{w internal, w ≠ root} 1/H(t_w)`.
pub fn b1_index(tree: &AnnotatedTree) -> f64 {
    let mut sum = KahanSum::new();
    for v in 1..tree.n() {
        if tree.degree()[v] > 0 {
            sum.add(1.0 / tree.subtree_height()[v] as f64);
        }
    }
    sum.value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvCheck {
    pub gap: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Total-variation distance between the all-vertex and internal-vertex
/// measures, which differ by one atom of weight `a/n` per leaf, against the
/// bound `a/2` with `a = b_n/n`.
pub fn tv_gap_bound_check(tree: &AnnotatedTree, model: &OffspringModel) -> TvCheck {
    let n = tree.n() as f64;
    let a = model.normalizer(tree.n() as u64) / n;
    let gap = 0.5 * (a / n) * tree.leaves() as f64;
    let bound = 0.5 * a;
    TvCheck { gap, bound, ok: gap <= bound }
}

/// Total masses of the internal-vertex and all-vertex measures together with
/// their height bounds `(b_n/n) H(t)` and `(b_n/n)(H(t) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBounds {
    pub internal_mass: f64,
    pub internal_bound: f64,
    pub total_mass: f64,
    pub total_bound: f64,
    pub ok: bool,
}

/// Check `A°_n(1) ≤ (b_n/n) H(t)` and `A_n(1) ≤ (b_n/n)(H(t)+1)`.
///
/// Both sides share the factor `b_n/n²`, so the verdict is decided exactly on
/// integers: `Σ_{w internal} |t_w| ≤ n H(t)` and `Σ_w |t_w| ≤ n (H(t)+1)`.
pub fn mass_bounds(tree: &AnnotatedTree, model: &OffspringModel) -> MassBounds {
    let n = tree.n() as u64;
    let h = tree.height() as u64;
    let mut internal = 0u64;
    let mut total = 0u64;
    for v in 0..tree.n() {
        let s = tree.subtree_size()[v] as u64;
        total += s;
        if tree.degree()[v] > 0 {
            internal += s;
        }
    }
    let nf = n as f64;
    let b = model.normalizer(n);
    let scale = b / (nf * nf);
    MassBounds {
        internal_mass: scale * internal as f64,
        internal_bound: b / nf * h as f64,
        total_mass: scale * total as f64,
        total_bound: b / nf * (h + 1) as f64,
        ok: internal <= n * h && total <= n * (h + 1),
    }
}

pub fn mass_bound_check(tree: &AnnotatedTree, model: &OffspringModel) -> bool {
    mass_bounds(tree, model).ok
}
