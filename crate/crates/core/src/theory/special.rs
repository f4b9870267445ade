//! Gamma, beta, zeta and the completed (Riemann) xi function on the real line.

use std::f64::consts::{E, LN_2, PI};

// Lanczos approximation with r = 10.900511 (Pugh's coefficients)
const LANCZOS_R: f64 = 10.900511;
const LANCZOS: [f64; 11] = [
    2.485_740_891_387_535_655_46e-5,
    1.051_423_785_817_219_742_10,
    -3.456_870_972_220_162_354_69,
    4.512_277_094_668_948_237_00,
    -2.982_852_253_235_766_557_21,
    1.056_397_115_771_267_130_77,
    -1.954_287_731_916_458_695_83e-1,
    1.709_705_434_044_412_243_07e-2,
    -5.719_261_174_043_057_812_83e-4,
    4.633_994_733_599_056_367_08e-6,
    -2.719_949_084_886_077_039_10e-9,
];

fn lanczos_sum(z: f64) -> f64 {
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64 - 1.0);
    }
    acc
}

/// `2 √(e/π)`
const LANCZOS_FRONT: f64 = 1.860_382_734_205_265_7;

/// Euler's gamma function. Poles at non-positive integers return `NaN`.
pub fn gamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.floor() {
        return f64::NAN;
    }
    if z < 0.5 {
        return PI / ((PI * z).sin() * gamma(1.0 - z));
    }
    if z > 171.7 {
        return f64::INFINITY;
    }
    if z == z.floor() && z <= 30.0 {
        return (1..z as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    lanczos_sum(z) * LANCZOS_FRONT * ((z - 0.5 + LANCZOS_R) / E).powf(z - 0.5)
}

/// `ln |Γ(z)|`.
pub fn ln_gamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.floor() {
        return f64::INFINITY;
    }
    if z < 0.5 {
        return (PI / (PI * z).sin().abs()).ln() - ln_gamma(1.0 - z);
    }
    lanczos_sum(z).ln() + LANCZOS_FRONT.ln() + (z - 0.5) * ((z - 0.5 + LANCZOS_R) / E).ln()
}

/// Beta function for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    if a + b < 170.0 {
        gamma(a) * gamma(b) / gamma(a + b)
    } else {
        (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
    }
}

const BORWEIN_N: usize = 32;

/// Borwein's `d_k` weights for accelerating the alternating zeta series.
fn borwein_weights() -> [f64; BORWEIN_N + 1] {
    let n = BORWEIN_N as f64;
    let mut d = [0.0; BORWEIN_N + 1];
    let mut term = 1.0 / n;
    let mut acc = term;
    d[0] = n * acc;
    for i in 1..=BORWEIN_N {
        let fi = i as f64;
        term *= 4.0 * (n + fi - 1.0) * (n - fi + 1.0) / ((2.0 * fi) * (2.0 * fi - 1.0));
        acc += term;
        d[i] = n * acc;
    }
    d
}

/// Dirichlet eta function `Σ (-1)^(k-1) k^(-s)` for `s > 0`.
pub fn dirichlet_eta(s: f64) -> f64 {
    let d = borwein_weights();
    let dn = d[BORWEIN_N];
    let mut acc = 0.0;
    for k in 0..BORWEIN_N {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * (d[k] - dn) / ((k + 1) as f64).powf(s);
    }
    -acc / dn
}

/// `(s - 1) ζ(s)` for `s > 0`, continuous through the pole at `s = 1`.
pub fn zeta_times_s_minus_one(s: f64) -> f64 {
    debug_assert!(s > 0.0);
    let eta = dirichlet_eta(s);
    if s == 1.0 {
        return eta / LN_2;
    }
    // 1 - 2^(1-s) = -expm1((1-s) ln 2)
    eta * (s - 1.0) / -((1.0 - s) * LN_2).exp_m1()
}

/// Riemann zeta function on the real line (`NaN` at the pole).
pub fn zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::NAN;
    }
    if s > 0.0 {
        return zeta_times_s_minus_one(s) / (s - 1.0);
    }
    if s == 0.0 {
        return -0.5;
    }
    // functional equation
    let t = 1.0 - s;
    2f64.powf(s) * PI.powf(s - 1.0) * (0.5 * PI * s).sin() * gamma(t) * zeta(t)
}

/// Completed zeta `ξ(s) = ½ s(s-1) π^{-s/2} Γ(s/2) ζ(s)`, an entire function.
///
/// Arguments below `1/2` are reflected through `ξ(s) = ξ(1-s)`.
pub fn riemann_xi(s: f64) -> f64 {
    let s = if s < 0.5 { 1.0 - s } else { s };
    let pole_free = zeta_times_s_minus_one(s);
    if s > 100.0 {
        let log = (0.5 * s).ln() - 0.5 * s * PI.ln() + ln_gamma(0.5 * s) + pole_free.ln();
        return log.exp();
    }
    0.5 * s * PI.powf(-0.5 * s) * gamma(0.5 * s) * pole_free
}
