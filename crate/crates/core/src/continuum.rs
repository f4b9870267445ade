//! Brownian excursions and the continuum mass/height functional.
//!
//! For an excursion `e` of duration `σ` the functional is
//! `Z_f = ∫₀^σ ds ∫₀^{e(s)} f(σ_{r,s}, H_{r,s}) dr`, where `σ_{r,s}` and
//! `H_{r,s}` are the duration and the height above `r` of the excursion of `e`
//! above `r` straddling `s`. Integrating out `s` gives
//! `Z_f = ∫ dr Σ_{components c above r} dur(c) f(dur(c), height(c))`,
//! which is what the level sweep evaluates.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::functionals::TollFunction;
use crate::stats::KahanSum;

pub const DEFAULT_LEVELS: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuumError {
    #[error("toll is not finite at level {level} on component [{start}, {end}] (duration {duration}, height {height})")]
    NonFinite { level: f64, start: usize, end: usize, duration: f64, height: f64 },
    #[error("invalid excursion: {0}")]
    Invalid(String),
}

/// Positive excursion sampled on a uniform grid of `m` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    values: Vec<f64>,
    duration: f64,
    max: f64,
}

impl Excursion {
    /// Wrap grid values `e(0), …, e(σ)`; endpoints must be 0 and interior
    /// values positive.
    pub fn new(values: Vec<f64>, duration: f64) -> Result<Self, ContinuumError> {
        if values.len() < 3 {
            return Err(ContinuumError::Invalid("need at least two steps".into()));
        }
        let m = values.len() - 1;
        if values[0] != 0.0 || values[m] != 0.0 {
            return Err(ContinuumError::Invalid("endpoints must be zero".into()));
        }
        if values[1..m].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ContinuumError::Invalid("interior values must be positive".into()));
        }
        if !(duration > 0.0) {
            return Err(ContinuumError::Invalid("duration must be positive".into()));
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        Ok(Self { values, duration, max })
    }

    /// `e(t) = min(t, σ - t)` on `m` steps.
    pub fn triangular(m: usize, duration: f64) -> Self {
        let dt = duration / m as f64;
        let values = (0..=m).map(|i| (i as f64 * dt).min(duration - i as f64 * dt)).collect::<Vec<_>>();
        let mut values = values;
        values[0] = 0.0;
        values[m] = 0.0;
        Self::new(values, duration).expect("triangle is an excursion")
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.m() as f64
    }

    /// Maximum `𝔥` of the excursion.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// Trapezoid integral `∫ e(t) dt` of the piecewise linear path.
    pub fn area(&self) -> f64 {
        let mut s = KahanSum::new();
        for v in &self.values {
            s.add(*v);
        }
        s.value() * self.dt()
    }

    /// CSV dump `t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,value")?;
        let dt = self.dt();
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", i as f64 * dt, v)?;
        }
        Ok(())
    }
}

/// Normalised Brownian excursion on `m` steps: a Gaussian random-walk bridge
/// rotated cyclically at its minimum (Vervaat).
pub fn sample_excursion<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Excursion {
    assert!(m >= 2, "an excursion needs at least two steps");
    let sd = (1.0 / m as f64).sqrt();
    let mut walk = vec![0.0; m + 1];
    loop {
        for i in 1..=m {
            let z: f64 = rng.sample(StandardNormal);
            walk[i] = walk[i - 1] + sd * z;
        }
        let end = walk[m];
        let mut argmin = 0;
        let mut min = f64::INFINITY;
        for i in 0..m {
            let b = walk[i] - end * i as f64 / m as f64;
            walk[i] = b;
            if b < min {
                min = b;
                argmin = i;
            }
        }
        walk[m] = 0.0;
        let mut values = Vec::with_capacity(m + 1);
        for j in 0..m {
            values.push(walk[(argmin + j) % m] - min);
        }
        values.push(0.0);
        if let Ok(e) = Excursion::new(values, 1.0) {
            return e;
        }
    }
}

/// Maximal interval on which `e > r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelComponent {
    pub level: f64,
    /// First and last grid index inside the component.
    pub start: usize,
    pub end: usize,
    /// Length of the interval between the interpolated crossings.
    pub duration: f64,
    /// `max e - r` over the component's grid points.
    pub height: f64,
}

/// Crossing time of level `r` on segment `i` (linear interpolation).
#[inline]
fn crossing(values: &[f64], i: usize, r: f64, dt: f64) -> f64 {
    let (a, b) = (values[i], values[i + 1]);
    (i as f64 + (r - a) / (b - a)) * dt
}

/// Components of `{t : e(t) > r}`; empty when `r ≥ max e`.
pub fn components_above(e: &Excursion, r: f64) -> Vec<LevelComponent> {
    let v = &e.values;
    let dt = e.dt();
    let mut out = Vec::new();
    let mut open: Option<(usize, f64, f64)> = None;
    for i in 0..e.m() {
        let (a, b) = (v[i], v[i + 1]);
        if a <= r && b > r {
            open = Some((i + 1, crossing(v, i, r, dt), b));
        } else if a > r && b <= r {
            let (start, t0, h) = open.take().expect("down-crossing follows an up-crossing");
            out.push(LevelComponent {
                level: r,
                start,
                end: i,
                duration: crossing(v, i, r, dt) - t0,
                height: h.max(a) - r,
            });
        } else if a > r {
            if let Some((_, _, h)) = open.as_mut() {
                *h = h.max(b);
            }
        }
    }
    out
}

/// Midpoint levels `r_k = (k + 1/2) max/K`.
#[inline]
fn level(k: usize, dr: f64) -> f64 {
    (k as f64 + 0.5) * dr
}

/// Sparse table for range-maximum queries.
struct RangeMax {
    rows: Vec<Vec<f64>>,
}

impl RangeMax {
    fn new(values: &[f64]) -> Self {
        let mut rows = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = rows.last().unwrap();
            let row = (0..=values.len() - 2 * width).map(|i| prev[i].max(prev[i + width])).collect();
            rows.push(row);
            width *= 2;
        }
        Self { rows }
    }

    /// Maximum over `lo..=hi`.
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let j = (usize::BITS - 1 - len.leading_zeros()) as usize;
        self.rows[j][lo].max(self.rows[j][hi + 1 - (1 << j)])
    }
}

/// First level index `k` with `r_k ≥ x` (strict if `strict`).
#[inline]
fn first_level_at_least(x: f64, dr: f64, strict: bool) -> usize {
    let mut k = ((x / dr - 0.5).floor().max(0.0)) as usize;
    while k > 0 && (level(k - 1, dr) > x || (!strict && level(k - 1, dr) == x)) {
        k -= 1;
    }
    while level(k, dr) < x || (strict && level(k, dr) == x) {
        k += 1;
    }
    k
}

/// Sweep `Σ_k dr Σ_{c above r_k} dur(c) f(dur(c), height(c))` over `K`
/// midpoint levels in `(0, max e)`.
///
/// Crossings of all levels are collected in a single pass over the path, so
/// the cost is `O(m log m)` plus the number of crossings rather than `O(mK)`.
pub fn psi_level_sweep(e: &Excursion, toll: &TollFunction, levels: usize) -> Result<f64, ContinuumError> {
    psi_level_sweep_scaled(e, toll, levels, 1.0)
}

/// [`psi_level_sweep`] with heights passed to the toll multiplied by
/// `height_scale`.
pub fn psi_level_sweep_scaled(
    e: &Excursion,
    toll: &TollFunction,
    levels: usize,
    height_scale: f64,
) -> Result<f64, ContinuumError> {
    Ok(psi_level_sweep_multi(e, std::slice::from_ref(toll), levels, height_scale)?[0])
}

/// Evaluate several tolls in one sweep (the crossings are shared).
pub fn psi_level_sweep_multi(
    e: &Excursion,
    tolls: &[TollFunction],
    levels: usize,
    height_scale: f64,
) -> Result<Vec<f64>, ContinuumError> {
    let v = &e.values;
    let m = e.m();
    let dt = e.dt();
    let dr = e.max / levels as f64;
    // level range crossed upward on segment i: r_k ∈ [a, b); downward: r_k ∈ [b, a)
    let range = |i: usize| {
        let (a, b) = (v[i], v[i + 1]);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let k0 = first_level_at_least(lo, dr, false);
        let k1 = first_level_at_least(hi, dr, false).min(levels);
        (k0, k1.max(k0))
    };
    let mut offsets = vec![0usize; levels + 1];
    for i in 0..m {
        let (k0, k1) = range(i);
        for k in k0..k1 {
            offsets[k + 1] += 1;
        }
    }
    for k in 0..levels {
        offsets[k + 1] += offsets[k];
    }
    let mut fill = offsets.clone();
    let mut segs = vec![0u32; offsets[levels]];
    for i in 0..m {
        let (k0, k1) = range(i);
        for k in k0..k1 {
            segs[fill[k]] = i as u32;
            fill[k] += 1;
        }
    }
    let rmq = RangeMax::new(v);
    let mut totals = vec![KahanSum::new(); tolls.len()];
    let mut at_level = vec![KahanSum::new(); tolls.len()];
    for k in 0..levels {
        let r = level(k, dr);
        at_level.iter_mut().for_each(|s| *s = KahanSum::new());
        let crossings = &segs[offsets[k]..offsets[k + 1]];
        debug_assert!(crossings.len().is_multiple_of(2));
        for pair in crossings.chunks_exact(2) {
            let (up, down) = (pair[0] as usize, pair[1] as usize);
            let duration = crossing(v, down, r, dt) - crossing(v, up, r, dt);
            let height = rmq.query(up + 1, down) - r;
            for (toll, sum) in tolls.iter().zip(at_level.iter_mut()) {
                let value = duration * toll.eval(duration, height_scale * height);
                if !value.is_finite() {
                    return Err(ContinuumError::NonFinite { level: r, start: up + 1, end: down, duration, height });
                }
                sum.add(value);
            }
        }
        for (t, s) in totals.iter_mut().zip(&at_level) {
            t.add(s.value());
        }
    }
    Ok(totals.iter().map(|t| t.value() * dr).collect())
}

/// Reference sweep that rebuilds the components at every level, `O(mK)`.
pub fn psi_level_sweep_naive(e: &Excursion, toll: &TollFunction, levels: usize) -> Result<f64, ContinuumError> {
    let dr = e.max / levels as f64;
    let mut total = KahanSum::new();
    for k in 0..levels {
        let r = level(k, dr);
        for c in components_above(e, r) {
            let value = c.duration * toll.eval(c.duration, c.height);
            if !value.is_finite() {
                return Err(ContinuumError::NonFinite {
                    level: r,
                    start: c.start,
                    end: c.end,
                    duration: c.duration,
                    height: c.height,
                });
            }
            total.add(value);
        }
    }
    Ok(total.value() * dr)
}

/// Continuum functional of the Brownian tree with branching mechanism
/// `κλ²` coded by the normalised excursion `e`: heights are `√(2/κ) e`.
pub fn psi_brownian(e: &Excursion, toll: &TollFunction, levels: usize, kappa: f64) -> Result<f64, ContinuumError> {
    Ok(psi_brownian_multi(e, std::slice::from_ref(toll), levels, kappa)?[0])
}

pub fn psi_brownian_multi(
    e: &Excursion,
    tolls: &[TollFunction],
    levels: usize,
    kappa: f64,
) -> Result<Vec<f64>, ContinuumError> {
    let scale = (2.0 / kappa).sqrt();
    let mut values = psi_level_sweep_multi(e, tolls, levels, scale)?;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn triangle_components() {
        let e = Excursion::triangular(1000, 1.0);
        let c = components_above(&e, 0.25);
        assert_eq!(c.len(), 1);
        assert!((c[0].duration - 0.5).abs() < 1e-12);
        assert!((c[0].height - 0.25).abs() < 1e-12);
        assert!(components_above(&e, 0.5).is_empty());
        let c = components_above(&e, 0.0);
        assert_eq!(c.len(), 1);
        assert!((c[0].duration - 1.0).abs() < 1e-12 && (c[0].height - 0.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_sweeps() {
        let e = Excursion::triangular(1000, 1.0);
        let one = TollFunction::power(0.0, 0.0);
        let x = TollFunction::power(1.0, 0.0);
        assert!((psi_level_sweep(&e, &one, 1000).unwrap() - 0.25).abs() < 1e-3);
        assert!((psi_level_sweep(&e, &x, 1000).unwrap() - 1.0 / 6.0).abs() < 1e-3);
        assert_eq!(psi_level_sweep(&e, &TollFunction::custom(|_, _| 0.0), 1000).unwrap(), 0.0);
    }

    #[test]
    fn fast_sweep_matches_naive() {
        let tolls =
            [TollFunction::power(0.0, 0.0), TollFunction::power(1.0, 0.0), TollFunction::power(0.5, 1.0), TollFunction::power(-0.3, 2.0)];
        for rep in 0..20 {
            let mut r = rng::stream(5, 0, rep);
            let e = sample_excursion(500, &mut r);
            for toll in &tolls {
                let fast = psi_level_sweep(&e, toll, 257).unwrap();
                let slow = psi_level_sweep_naive(&e, toll, 257).unwrap();
                assert!((fast - slow).abs() <= 1e-11 * slow.abs(), "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn excursion_shape() {
        let mut r = rng::stream(6, 0, 0);
        let e = sample_excursion(1000, &mut r);
        assert_eq!(e.values()[0], 0.0);
        assert_eq!(e.values()[1000], 0.0);
        assert!(e.values()[1..1000].iter().all(|v| *v > 0.0));
        assert_eq!(e.duration(), 1.0);
    }

    #[test]
    fn csv_dump() {
        let e = Excursion::triangular(2, 1.0);
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value\n0,0\n0.5,0.5\n1,0\n");
    }
}
