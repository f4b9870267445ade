//! Exact samplers for BGW trees conditioned on their size.
//!
//! A conditioned tree is produced in three steps:
//!
//! 1. draw `n` i.i.d. offspring counts conditioned on summing to `n - 1`
//!    (rejection on the sum);
//! 2. rotate the sequence cyclically so that its Łukasiewicz path stays
//!    non-negative until the last step (cycle lemma);
//! 3. read the rotated sequence as a depth-first degree list and annotate.
//!
//! Vertices are stored in depth-first (Ulam–Harris) order; every downstream
//! module relies on children having larger indices than their parent.
//! Heights count edges, so a leaf has height 0.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::offspring::OffspringModel;

/// Parent entry of the root.
pub const NO_PARENT: u32 = u32::MAX;

/// Expected number of values left when the sampler switches to direct draws.
const DIRECT_DRAWS: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("size {n} is outside the support of the conditioned tree")]
    NotInSupport { n: u64 },
    #[error(
        "no degree sequence with sum {target} after {attempts} attempts \
         (expected acceptance rate {acceptance:.3e} per attempt)",
        target = n - 1
    )]
    BudgetExhausted { n: u64, attempts: u64, acceptance: f64 },
    #[error("malformed degree sequence: {0}")]
    Malformed(String),
}

/// Degree multiset accepted by the rejection step.
#[derive(Debug, Clone)]
pub struct DegreeSequence {
    pub degrees: Vec<u32>,
    pub attempts: u64,
}

/// Default number of rejection attempts: ten times the inverse of the
/// local-limit acceptance rate `λ₀ g(0) / b_n`.
pub fn default_budget(model: &OffspringModel, n: u64) -> u64 {
    let per = model.normalizer(n) / (model.span() as f64 * model.g0());
    10 * per.ceil().max(1.0) as u64
}

/// Draw `n` offspring counts, i.i.d. from `model` and conditioned on
/// summing to `n - 1`, in exchangeable (uniformly shuffled) order.
///
/// Counts of each value are drawn by sequential conditional binomials
/// (`N_k ~ Bin(remaining, P(ξ = k | ξ ≥ k))`) up to a level fixed by `n`;
/// the values left at that level are drawn directly from `ξ | ξ ≥ k`, except
/// the very last one, which is forced to the missing amount `d` and accepted
/// with probability `P(ξ = d) / max_{j ≥ k} P(ξ = j)`. Attempts are
/// abandoned as soon as the sum can no longer equal `n - 1`. Every accepted multiset has exactly the
/// conditional law, and the final shuffle makes the order exchangeable.
pub fn sample_degree_sequence<R: Rng + ?Sized>(
    model: &OffspringModel,
    n: u64,
    rng: &mut R,
    budget: Option<u64>,
) -> Result<DegreeSequence, SamplerError> {
    if n == 0 || !model.support_contains(n) {
        return Err(SamplerError::NotInSupport { n });
    }
    if n > u32::MAX as u64 / 2 {
        return Err(SamplerError::Malformed(format!("size {n} too large")));
    }
    let budget = budget.unwrap_or_else(|| default_budget(model, n));
    let target = n - 1;
    let table = model.table_len() as u64;
    let finite_table = model.survival(table) == 0.0;
    let start = direct_level(model, n, table);
    let mut counts: Vec<(u64, u64)> = Vec::new();
    let mut singles: Vec<u64> = Vec::new();

    for attempt in 1..=budget {
        counts.clear();
        singles.clear();
        let mut remaining = n;
        let mut total = 0u64;
        let mut k = 0u64;
        let mut ok = true;
        while remaining > 0 && k < start {
            let p = (model.pmf(k) / model.survival(k)).clamp(0.0, 1.0);
            let c = if p == 0.0 {
                0
            } else if p == 1.0 {
                remaining
            } else {
                Binomial::new(remaining, p).expect("valid binomial").sample(rng)
            };
            if c > 0 {
                counts.push((k, c));
                total += k * c;
                remaining -= c;
            }
            k += 1;
            if total + remaining * k > target {
                ok = false;
                break;
            }
        }
        if ok && remaining > 0 {
            if finite_table && k + 1 == table {
                // ξ | ξ ≥ k is deterministic here
                counts.push((k, remaining));
                total += k * remaining;
            } else {
                ok = direct_draws(model, k, remaining, target, &mut total, &mut singles, rng);
            }
        }
        if ok && total == target {
            let mut degrees = Vec::with_capacity(n as usize);
            for &(value, count) in &counts {
                degrees.extend(std::iter::repeat_n(value as u32, count as usize));
            }
            degrees.extend(singles.iter().map(|&x| x as u32));
            degrees.shuffle(rng);
            return Ok(DegreeSequence { degrees, attempts: attempt });
        }
    }
    Err(SamplerError::BudgetExhausted { n, attempts: budget, acceptance: model.expected_acceptance(n) })
}

/// Level at which the sampler switches from binomial counts to direct draws:
/// the first `k` with `n P(ξ ≥ k) ≤ DIRECT_DRAWS`, capped at the last table
/// index. It depends on `n` only, which keeps the forced-last acceptance
/// factor `P(ξ ≥ k) / max_{j ≥ k} P(ξ = j)` the same for every multiset.
fn direct_level(model: &OffspringModel, n: u64, table: u64) -> u64 {
    let last = table.saturating_sub(1);
    (0..last).find(|&k| n as f64 * model.survival(k) <= DIRECT_DRAWS as f64).unwrap_or(last)
}

/// Draw `remaining` values from `ξ | ξ ≥ k`, the last one forced to the
/// missing amount `d` and kept with probability `P(ξ = d) / max_{j ≥ k} P(ξ = j)`.
fn direct_draws<R: Rng + ?Sized>(
    model: &OffspringModel,
    k: u64,
    mut remaining: u64,
    target: u64,
    total: &mut u64,
    singles: &mut Vec<u64>,
    rng: &mut R,
) -> bool {
    while remaining > 1 {
        remaining -= 1;
        let Some(cap) = target.checked_sub(*total + remaining * k) else {
            return false;
        };
        let u = 1.0 - rng.random::<f64>();
        match model.sample_at_least(k, u, cap) {
            Some(x) => {
                *total += x;
                singles.push(x);
            }
            None => return false,
        }
    }
    let Some(d) = target.checked_sub(*total) else {
        return false;
    };
    if d < k || rng.random::<f64>() * model.max_pmf_from(k) >= model.pmf(d) {
        return false;
    }
    *total = target;
    singles.push(d);
    true
}

/// The unique rotation `r` such that `(d_r, d_{r+1}, …)` is a Łukasiewicz
/// word: partial sums of `d_i - 1` stay `≥ 0` and first reach `-1` at step n.
///
/// It is the first index (counted from 1) at which the partial sums attain
/// their minimum, reduced mod `n`.
pub fn cycle_rotate(degrees: &[u32]) -> usize {
    let n = degrees.len();
    let mut sum = 0i64;
    let mut min = i64::MAX;
    let mut arg = 0;
    for (j, &d) in degrees.iter().enumerate() {
        sum += d as i64 - 1;
        if sum < min {
            min = sum;
            arg = j + 1;
        }
    }
    arg % n.max(1)
}

/// Size-`n` ordered tree in depth-first order with per-vertex annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTree {
    parent: Vec<u32>,
    degree: Vec<u32>,
    subtree_size: Vec<u32>,
    subtree_height: Vec<u32>,
    depth: Vec<u32>,
    height: u32,
}

impl AnnotatedTree {
    pub fn n(&self) -> usize {
        self.degree.len()
    }

    /// Parent index; [`NO_PARENT`] for the root.
    pub fn parent(&self) -> &[u32] {
        &self.parent
    }

    pub fn degree(&self) -> &[u32] {
        &self.degree
    }

    /// `|t_w|`, vertices in the fringe subtree at `w`.
    pub fn subtree_size(&self) -> &[u32] {
        &self.subtree_size
    }

    /// `H(t_w)` in edges.
    pub fn subtree_height(&self) -> &[u32] {
        &self.subtree_height
    }

    pub fn depth(&self) -> &[u32] {
        &self.depth
    }

    /// `H(t)`, the maximal depth.
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn leaves(&self) -> usize {
        self.degree.iter().filter(|&&d| d == 0).count()
    }

    pub fn internal(&self) -> usize {
        self.n() - self.leaves()
    }

    /// Verify every structural invariant.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.n();
        let edges: u64 = self.degree.iter().map(|&d| d as u64).sum();
        if edges != n as u64 - 1 {
            return Err(format!("degrees sum to {edges}, expected {}", n - 1));
        }
        if self.parent[0] != NO_PARENT || self.depth[0] != 0 || self.subtree_size[0] as usize != n {
            return Err("bad root annotations".into());
        }
        let mut size = vec![1u32; n];
        let mut height = vec![0u32; n];
        let mut children = vec![0u32; n];
        for v in (1..n).rev() {
            let p = self.parent[v] as usize;
            if p >= v {
                return Err(format!("parent {p} of {v} is not earlier in depth-first order"));
            }
            if self.depth[v] != self.depth[p] + 1 {
                return Err(format!("depth of {v}"));
            }
            size[p] += size[v];
            height[p] = height[p].max(height[v] + 1);
            children[p] += 1;
        }
        for v in 0..n {
            if size[v] != self.subtree_size[v] || height[v] != self.subtree_height[v] || children[v] != self.degree[v] {
                return Err(format!("annotation mismatch at vertex {v}"));
            }
            if (self.degree[v] > 0) != (self.subtree_size[v] > 1) {
                return Err(format!("internal/size mismatch at vertex {v}"));
            }
        }
        if self.height != self.depth.iter().copied().max().unwrap_or(0) || self.height != self.subtree_height[0] {
            return Err("tree height".into());
        }
        Ok(())
    }

    /// CSV dump `index,parent,degree,depth,subtree_size,subtree_height`,
    /// with parent `-1` for the root.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,parent,degree,depth,subtree_size,subtree_height")?;
        for v in 0..self.n() {
            let parent = if self.parent[v] == NO_PARENT { -1 } else { self.parent[v] as i64 };
            writeln!(
                out,
                "{v},{parent},{},{},{},{}",
                self.degree[v], self.depth[v], self.subtree_size[v], self.subtree_height[v]
            )?;
        }
        Ok(())
    }
}

/// Build the depth-first tree coded by a Łukasiewicz word and fill in all
/// annotations: one forward pass (parents, depths) with an explicit stack and
/// one reverse pass (sizes, heights).
pub fn build_and_annotate(degrees: &[u32]) -> Result<AnnotatedTree, SamplerError> {
    let n = degrees.len();
    if n == 0 {
        return Err(SamplerError::Malformed("empty sequence".into()));
    }
    if n >= u32::MAX as usize {
        return Err(SamplerError::Malformed("sequence too long".into()));
    }
    let mut parent = vec![NO_PARENT; n];
    let mut depth = vec![0u32; n];
    // (vertex, children still to attach)
    let mut stack: Vec<(u32, u32)> = Vec::new();
    if degrees[0] > 0 {
        stack.push((0, degrees[0]));
    }
    for v in 1..n {
        let Some(top) = stack.last_mut() else {
            return Err(SamplerError::Malformed(format!("path reaches -1 at step {v} < {n}")));
        };
        let p = top.0;
        top.1 -= 1;
        if top.1 == 0 {
            stack.pop();
        }
        parent[v] = p;
        depth[v] = depth[p as usize] + 1;
        if degrees[v] > 0 {
            stack.push((v as u32, degrees[v]));
        }
    }
    if !stack.is_empty() {
        return Err(SamplerError::Malformed("path does not reach -1 at the last step".into()));
    }
    let mut subtree_size = vec![1u32; n];
    let mut subtree_height = vec![0u32; n];
    for v in (1..n).rev() {
        let p = parent[v] as usize;
        subtree_size[p] += subtree_size[v];
        subtree_height[p] = subtree_height[p].max(subtree_height[v] + 1);
    }
    let height = subtree_height[0];
    let tree = AnnotatedTree { parent, degree: degrees.to_vec(), subtree_size, subtree_height, depth, height };
    debug_assert_eq!(tree.check_invariants(), Ok(()));
    Ok(tree)
}

/// Exact sample of `τⁿ`. Returns the tree and the number of rejection
/// attempts used.
pub fn sample_conditioned_counted<R: Rng + ?Sized>(
    model: &OffspringModel,
    n: u64,
    rng: &mut R,
    budget: Option<u64>,
) -> Result<(AnnotatedTree, u64), SamplerError> {
    let DegreeSequence { mut degrees, attempts } = sample_degree_sequence(model, n, rng, budget)?;
    let r = cycle_rotate(&degrees);
    degrees.rotate_left(r);
    Ok((build_and_annotate(&degrees)?, attempts))
}

/// Exact sample of `τⁿ`, the BGW tree conditioned to have `n` vertices.
pub fn sample_conditioned<R: Rng + ?Sized>(
    model: &OffspringModel,
    n: u64,
    rng: &mut R,
) -> Result<AnnotatedTree, SamplerError> {
    sample_conditioned_counted(model, n, rng, None).map(|(t, _)| t)
}

/// All Łukasiewicz words of length `n`, i.e. all ordered trees with `n`
/// vertices, in lexicographic order. There are `Catalan(n - 1)` of them.
pub fn lukasiewicz_words(n: usize) -> Vec<Vec<u32>> {
    fn rec(word: &mut Vec<u32>, open: i64, n: usize, out: &mut Vec<Vec<u32>>) {
        let left = n - word.len();
        if left == 0 {
            if open == 0 {
                out.push(word.clone());
            }
            return;
        }
        // `open` slots are pending; the remaining `left` vertices must fill them
        for d in 0..left as u32 {
            let next = open - 1 + d as i64;
            if (next == 0 && left > 1) || next < 0 || next > left as i64 - 1 {
                continue;
            }
            word.push(d);
            rec(word, next, n, out);
            word.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(&mut Vec::with_capacity(n), 1, n, &mut out);
    }
    out
}

/// `Π pmf(k_v)`, the BGW probability of an ordered tree.
pub fn tree_weight(model: &OffspringModel, degrees: &[u32]) -> f64 {
    degrees.iter().map(|&d| model.pmf(d as u64)).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rotation_examples() {
        assert_eq!(cycle_rotate(&[0, 2, 0]), 1);
        assert_eq!(cycle_rotate(&[2, 0, 0]), 0);
        assert_eq!(cycle_rotate(&[0, 0, 2]), 2);
        assert_eq!(cycle_rotate(&[0]), 0);
    }

    #[test]
    fn annotation_examples() {
        let cherry = build_and_annotate(&[2, 0, 0]).unwrap();
        assert_eq!(cherry.subtree_size(), &[3, 1, 1]);
        assert_eq!(cherry.subtree_height(), &[1, 0, 0]);
        assert_eq!(cherry.depth(), &[0, 1, 1]);
        let path = build_and_annotate(&[1, 1, 0]).unwrap();
        assert_eq!(path.subtree_size(), &[3, 2, 1]);
        assert_eq!(path.subtree_height(), &[2, 1, 0]);
        assert_eq!(path.depth(), &[0, 1, 2]);
        assert_eq!(path.height(), 2);
        let root = build_and_annotate(&[0]).unwrap();
        assert_eq!(root.subtree_size(), &[1]);
        assert_eq!(root.subtree_height(), &[0]);
    }

    #[test]
    fn malformed_sequences_rejected() {
        assert!(build_and_annotate(&[0, 2, 0]).is_err());
        assert!(build_and_annotate(&[2, 0]).is_err());
        assert!(build_and_annotate(&[1, 0, 0]).is_err());
        assert!(build_and_annotate(&[]).is_err());
    }

    #[test]
    fn word_counts_are_catalan() {
        let catalan = [1, 1, 2, 5, 14, 42, 132, 429, 1430];
        for n in 1..=9 {
            let words = lukasiewicz_words(n);
            assert_eq!(words.len(), catalan[n - 1], "n={n}");
            assert!(words.iter().all(|w| build_and_annotate(w).is_ok()));
        }
    }

    #[test]
    fn small_degree_sequences() {
        let catalan = OffspringModel::catalan();
        let geometric = OffspringModel::geometric();
        let mut r = rng::stream(1, 0, 0);
        for _ in 0..100 {
            let mut d = sample_degree_sequence(&catalan, 3, &mut r, None).unwrap().degrees;
            d.sort();
            assert_eq!(d, vec![0, 0, 2]);
            let mut d = sample_degree_sequence(&geometric, 2, &mut r, None).unwrap().degrees;
            d.sort();
            assert_eq!(d, vec![0, 1]);
            let mut d = sample_degree_sequence(&catalan, 5, &mut r, None).unwrap().degrees;
            d.sort();
            assert_eq!(d, vec![0, 0, 0, 2, 2]);
        }
        assert_eq!(
            sample_degree_sequence(&catalan, 4, &mut r, None).unwrap_err(),
            SamplerError::NotInSupport { n: 4 }
        );
    }

    #[test]
    fn single_vertex_and_budget_failure() {
        let m = OffspringModel::stable_power(1.5, 0.5).unwrap();
        let mut r = rng::stream(2, 0, 0);
        let t = sample_conditioned(&m, 1, &mut r).unwrap();
        assert_eq!(t.n(), 1);
        let err = sample_degree_sequence(&m, 10_000, &mut r, Some(1));
        assert!(err.is_err() || err.unwrap().attempts == 1);
        let mut failures = 0;
        for _ in 0..20 {
            if let Err(SamplerError::BudgetExhausted { attempts, .. }) =
                sample_degree_sequence(&m, 10_000, &mut r, Some(1))
            {
                assert_eq!(attempts, 1);
                failures += 1;
            }
        }
        assert!(failures > 10);
    }

    #[test]
    fn large_heavy_tailed_trees() {
        for (gamma, c) in [(1.5, 0.5), (1.2, 0.5), (1.8, 0.5)] {
            let m = OffspringModel::stable_power(gamma, c).unwrap();
            let mut r = rng::stream(3, 0, 0);
            for _ in 0..5 {
                let t = sample_conditioned(&m, 5_000, &mut r).unwrap();
                assert_eq!(t.check_invariants(), Ok(()));
            }
        }
    }

    #[test]
    fn csv_dump() {
        let t = build_and_annotate(&[2, 0, 0]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "index,parent,degree,depth,subtree_size,subtree_height\n0,-1,2,0,3,1\n1,0,0,1,1,0\n2,0,0,1,1,0\n"
        );
    }
}
