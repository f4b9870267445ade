//! Golden values reproducible without simulation.
//!
//! Every check compares a library value against a closed form or a hand
//! computation. [`run`] returns one [`Check`] per value; the CLI prints them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::continuum::{self, Excursion};
use crate::functionals::{self, TollFunction};
use crate::harness::{self, ExperimentConfig, Mode, PowerToll};
use crate::offspring::OffspringModel;
use crate::sampler::{self, build_and_annotate};
use crate::theory::{self, Finiteness, MassToll, MomentSpec, Regime};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Default)]
struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn flag(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), pass, detail });
    }

    /// Relative agreement (absolute when `want == 0`).
    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let err = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        self.flag(name, err <= tol, format!("got {got:.12e}, want {want:.12e} (error {err:.2e}, tol {tol:.0e})"));
    }

    fn holds(&mut self, name: &str, pass: bool) {
        self.flag(name, pass, String::new());
    }
}

/// Run the whole golden suite.
pub fn run() -> Vec<Check> {
    let mut s = Suite::default();
    offspring(&mut s);
    sampler(&mut s);
    functionals(&mut s);
    theory_values(&mut s);
    continuum(&mut s);
    harness(&mut s);
    s.checks
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

fn offspring(s: &mut Suite) {
    let cat = OffspringModel::catalan();
    let st2 = OffspringModel::stable_power(2.0, 0.5).expect("valid");
    s.holds(
        "stable(2, 1/2) is the Catalan law",
        (0..4).all(|k| (st2.pmf(k) - cat.pmf(k)).abs() < 1e-15) && st2.pmf(1) == 0.0,
    );
    let st = OffspringModel::stable_power(1.5, 0.5).expect("valid");
    s.close("stable(1.5, 1/2) pmf(0)", st.pmf(0), 0.5, 1e-15);
    s.close("stable(1.5, 1/2) pmf(1)", st.pmf(1), 0.25, 1e-15);
    s.close("stable(1.5, 1/2) pmf(2)", st.pmf(2), 0.1875, 1e-15);
    let k = 64u64;
    let head: f64 = (0..k).map(|j| st.pmf(j)).sum();
    s.close("stable(1.5, 1/2) head mass + survival", head + st.survival(k), 1.0, 1e-13);

    let geo = OffspringModel::geometric();
    s.close("geometric σ²", geo.sigma2().unwrap_or(f64::NAN), 2.0, 1e-12);
    s.close("geometric b_100", geo.normalizer(100), 200f64.sqrt(), 1e-12);
    s.close("geometric b_2", geo.normalizer(2), 2.0, 1e-12);
    s.close("Catalan σ²", cat.sigma2().unwrap_or(f64::NAN), 1.0, 1e-15);
    s.close("Catalan b_9", cat.normalizer(9), 3.0, 1e-15);
    s.close("stable(1.5) b_32", st.normalizer(32), 32f64.powf(2.0 / 3.0), 1e-12);
    s.close("stable(1.5) b_32 printed", st.normalizer(32), 10.0794, 5e-6);
    let degenerate: BTreeMap<u64, f64> = [(1, 1.0)].into_iter().collect();
    s.holds("pmf {1:1} rejected", OffspringModel::finite_variance(&degenerate).is_err());
    s.holds("Catalan support excludes 4", !cat.support_contains(4));
    s.holds("Catalan support contains 3", cat.support_contains(3));
    s.holds("geometric support contains 2", geo.support_contains(2));
}

fn sampler(s: &mut Suite) {
    s.holds("rotate (0,2,0) by 1", sampler::cycle_rotate(&[0, 2, 0]) == 1);
    s.holds("rotate (2,0,0) by 0", sampler::cycle_rotate(&[2, 0, 0]) == 0);
    s.holds("rotate (0,0,2) by 2", sampler::cycle_rotate(&[0, 0, 2]) == 2);

    let cherry = build_and_annotate(&[2, 0, 0]).expect("valid");
    s.holds(
        "cherry annotation",
        cherry.subtree_size() == [3, 1, 1] && cherry.subtree_height() == [1, 0, 0] && cherry.depth() == [0, 1, 1],
    );
    let path = build_and_annotate(&[1, 1, 0]).expect("valid");
    s.holds(
        "path annotation",
        path.subtree_size() == [3, 2, 1] && path.subtree_height() == [2, 1, 0] && path.depth() == [0, 1, 2],
    );
    let root = build_and_annotate(&[0]).expect("valid");
    s.holds("single vertex annotation", root.subtree_size() == [1] && root.subtree_height() == [0]);

    let cat = OffspringModel::catalan();
    let mut r = rng::stream(0, 0, 0);
    let all_cherries = (0..64).all(|_| {
        sampler::sample_conditioned(&cat, 3, &mut r).map(|t| t.degree() == [2, 0, 0]).unwrap_or(false)
    });
    s.holds("Catalan n=3 is always the cherry", all_cherries);
    let mut r = rng::stream(0, 1, 0);
    let five = (0..64).all(|_| {
        sampler::sample_degree_sequence(&cat, 5, &mut r, None)
            .map(|d| {
                let mut k = d.degrees.clone();
                k.sort_unstable();
                k == [0, 0, 0, 2, 2]
            })
            .unwrap_or(false)
    });
    s.holds("Catalan n=5 multiset is {2,2,0,0,0}", five);
    let geo = OffspringModel::geometric();
    let mut r = rng::stream(0, 2, 0);
    let two = (0..64).all(|_| {
        sampler::sample_degree_sequence(&geo, 2, &mut r, None)
            .map(|d| {
                let mut k = d.degrees.clone();
                k.sort_unstable();
                k == [0, 1]
            })
            .unwrap_or(false)
    });
    s.holds("geometric n=2 multiset is {1,0}", two);
    s.close("Catalan n=5 acceptance 5/16", harness::local_probability(&cat, 5), 5.0 / 16.0, 1e-13);

    // conditioned law from enumeration
    let words = sampler::lukasiewicz_words(3);
    let z: f64 = words.iter().map(|w| sampler::tree_weight(&geo, w)).sum();
    let p_path = sampler::tree_weight(&geo, &[1, 1, 0]) / z;
    s.close("geometric n=3 path probability", p_path, 0.5, 1e-12);
    let w5 = sampler::lukasiewicz_words(5);
    let catalan5: Vec<f64> = w5.iter().map(|w| sampler::tree_weight(&cat, w)).filter(|&w| w > 0.0).collect();
    s.holds("Catalan n=5 is uniform on 2 trees", catalan5.len() == 2 && catalan5[0] == catalan5[1]);
}

fn functionals(s: &mut Suite) {
    let cat = OffspringModel::catalan();
    let cherry = build_and_annotate(&[2, 0, 0]).expect("valid");
    let path = build_and_annotate(&[1, 1, 0]).expect("valid");
    let r3 = 3f64.sqrt();

    let count = functionals::additive_functional(&cherry, |_| 1.0).unwrap_or(f64::NAN);
    s.close("cherry Σ 1", count, 3.0, 0.0);
    let mass = functionals::additive_functional(&cherry, |w| w.size as f64).unwrap_or(f64::NAN);
    s.close("cherry Σ |t_w|", mass, 5.0, 0.0);
    let mass = functionals::additive_functional(&path, |w| w.size as f64).unwrap_or(f64::NAN);
    s.close("path Σ |t_w|", mass, 6.0, 0.0);

    let one = TollFunction::power(0.0, 0.0);
    let a_int = functionals::a_measure(&cherry, &cat, &one, true).map(|v| v.value).unwrap_or(f64::NAN);
    s.close("cherry A°(1)", a_int, r3 / 3.0, 1e-15);
    let a_all = functionals::a_measure(&cherry, &cat, &one, false).map(|v| v.value).unwrap_or(f64::NAN);
    s.close("cherry A(1)", a_all, 5.0 * r3 / 9.0, 1e-15);
    let zero = TollFunction::custom(|_, _| 0.0);
    let a_zero = functionals::a_measure(&path, &cat, &zero, false).map(|v| v.value).unwrap_or(f64::NAN);
    s.close("A(0)", a_zero, 0.0, 0.0);

    s.close("cherry rescaled (1,0)", functionals::rescaled_power_sum(&cherry, &cat, 1.0, 0.0).value, r3 / 3.0, 1e-15);
    s.close("path rescaled (1,1)", functionals::rescaled_power_sum(&path, &cat, 1.0, 1.0).value, 8.0 / 9.0, 1e-15);

    s.close("cherry B₁", functionals::b1_index(&cherry), 0.0, 0.0);
    let path4 = build_and_annotate(&[1, 1, 1, 0]).expect("valid");
    s.close("path4 B₁", functionals::b1_index(&path4), 1.5, 1e-15);
    let path2 = build_and_annotate(&[1, 0]).expect("valid");
    s.close("path2 B₁", functionals::b1_index(&path2), 0.0, 0.0);

    let tv = functionals::tv_gap_bound_check(&cherry, &cat);
    s.close("cherry d_TV gap", tv.gap, r3 / 9.0, 1e-15);
    s.close("cherry d_TV bound", tv.bound, r3 / 6.0, 1e-15);
    s.holds("cherry d_TV ok", tv.ok);
    let single = build_and_annotate(&[0]).expect("valid");
    let tv = functionals::tv_gap_bound_check(&single, &cat);
    s.holds("single vertex d_TV at the bound", tv.ok && tv.gap == tv.bound);
    let tv = functionals::tv_gap_bound_check(&path, &cat);
    s.holds("path d_TV a/6", tv.ok && (tv.gap - tv.bound / 3.0).abs() < 1e-15);

    let mb = functionals::mass_bounds(&cherry, &cat);
    s.holds("cherry mass bound (equality)", mb.ok && (mb.internal_mass - mb.internal_bound).abs() < 1e-15);
    let mb = functionals::mass_bounds(&path, &cat);
    s.holds(
        "path mass bound",
        mb.ok && (mb.internal_mass - 5.0 * r3 / 9.0).abs() < 1e-15 && (mb.internal_bound - 2.0 * r3 / 3.0).abs() < 1e-15,
    );
}

fn theory_values(s: &mut Suite) {
    let sqrt_half_pi = (PI / 2.0).sqrt();
    s.close("g0(2, 1/2)", theory::g0(2.0, 0.5), 1.0 / (2.0 * PI).sqrt(), 1e-13);
    s.close("g0(2, 1/2) printed", theory::g0(2.0, 0.5), 0.398942, 2e-6);
    s.close("g0(2, 1)", theory::g0(2.0, 1.0), 1.0 / (2.0 * PI.sqrt()), 1e-13);
    for kappa in [0.25, 0.5, 1.0, 3.0] {
        s.close(&format!("g0 general = Brownian at κ={kappa}"), theory::g0(2.0, kappa), theory::g0_brownian(kappa), 1e-13);
    }

    s.close("ξ(2)", theory::riemann_xi(2.0), PI / 6.0, 1e-13);
    s.close("ξ(1)", theory::riemann_xi(1.0), 0.5, 1e-13);
    s.close("ξ(0)", theory::riemann_xi(0.0), 0.5, 1e-13);

    s.close("E[max^0]", theory::max_excursion_moment(0.0), 1.0, 1e-13);
    s.close("E[max^1]", theory::max_excursion_moment(1.0), sqrt_half_pi, 1e-13);
    s.close("E[max^2]", theory::max_excursion_moment(2.0), PI * PI / 6.0, 1e-13);

    let bm = |a, b| theory::brownian_moment(0.5, a, b).unwrap_or(f64::NAN);
    s.close("brownian (1/2, 0, 0)", bm(0.0, 0.0), sqrt_half_pi, 1e-12);
    s.close("brownian (1/2, 1, 0)", bm(1.0, 0.0), sqrt_half_pi / 2.0, 1e-12);
    s.close("brownian (1/2, 1, 0) printed", bm(1.0, 0.0), 0.626657, 2e-6);
    let b2 = (2.0 / PI).sqrt() * 2.0 * PI * (PI / 6.0) * (PI / 2.0);
    s.close("brownian (1/2, 0, 2)", bm(0.0, 2.0), b2, 1e-12);
    s.close("brownian (1/2, 0, 2) printed", bm(0.0, 2.0), 4.12322, 1e-5);

    let spec = |alpha, beta| MomentSpec { gamma: 2.0, kappa: 0.5, alpha, beta };
    let hm2 = 4.0 * theory::max_excursion_moment(2.0);
    s.close("height moment 4 E[max²]", hm2, 6.57974, 1e-6);
    let sm = theory::stable_moment(spec(0.0, 2.0), hm2).unwrap_or(f64::NAN);
    s.close("stable = brownian at γ=2, β=2", sm, bm(0.0, 2.0), 1e-10);
    let sm = theory::stable_moment(spec(0.0, 0.0), 1.0).unwrap_or(f64::NAN);
    s.close("stable (2, 1/2, 0, 0)", sm, sqrt_half_pi, 1e-12);
    let st = MomentSpec { gamma: 1.5, kappa: 0.7, alpha: 0.3, beta: 0.0 };
    let want = theory::g0(1.5, 0.7) * theory::beta(0.3 + 1.0 - 1.0 / 1.5, 1.0 - 1.0 / 1.5);
    s.close("stable β=0 is g0·B", theory::stable_moment(st, 1.0).unwrap_or(f64::NAN), want, 1e-12);

    let mo = |g: MassToll| theory::mass_only_moment(2.0, 0.5, &g);
    s.close("mass-only g≡1", mo(MassToll::Power(0.0)).unwrap_or(f64::NAN), sqrt_half_pi, 1e-9);
    s.close("mass-only g=x", mo(MassToll::Power(1.0)).unwrap_or(f64::NAN), sqrt_half_pi / 2.0, 1e-9);
    s.holds("mass-only x^{-1/2} diverges", mo(MassToll::Power(-0.5)).is_err());

    let pv = theory::phase_regime(2.0, 1.0, 0.0);
    s.holds("phase (2,1,0) Global margin 1", pv.regime == Regime::Global && (pv.margin - 1.0).abs() < 1e-15);
    let pv = theory::phase_regime(2.0, 0.5, 0.0);
    s.holds("phase (2,1/2,0) NonGlobal margin 0", pv.regime == Regime::NonGlobal && pv.margin == 0.0);
    let b1 = [1.1, 1.5, 1.9, 2.0].iter().all(|&g| theory::phase_regime(g, 0.0, -1.0).regime == Regime::NonGlobal);
    s.holds("phase B₁ NonGlobal", b1);

    s.holds("finiteness (2,0,0)", theory::finiteness(2.0, 0.0, 0.0) == Finiteness::ASFinite);
    s.holds("finiteness (2,-1/2,0)", theory::finiteness(2.0, -0.5, 0.0) == Finiteness::ASInfinite);
    s.holds("finiteness (1.5,0,-1)", theory::finiteness(1.5, 0.0, -1.0) == Finiteness::ASInfinite);

    s.close("height tail (2,1/2,1)", theory::height_tail(2.0, 0.5, 1.0), 2.0, 1e-13);
    s.close("height tail (2,1/2,2)", theory::height_tail(2.0, 0.5, 2.0), 1.0, 1e-13);
    let x = 3.0;
    s.close("height tail (1.5,1,x)", theory::height_tail(1.5, 1.0, x), (x / 2.0f64).powi(-2), 1e-13);
    s.close("duration density (2,1/2,1)", theory::duration_density(2.0, 0.5, 1.0), theory::g0(2.0, 0.5), 1e-13);
    s.close("duration density (2,1/2,4)", theory::duration_density(2.0, 0.5, 4.0), theory::g0(2.0, 0.5) / 8.0, 1e-13);
    s.holds("duration density → 0", theory::duration_density(2.0, 0.5, 1e12) < 1e-18);
}

fn continuum(s: &mut Suite) {
    let tri = Excursion::triangular(1000, 1.0);
    let c = continuum::components_above(&tri, 0.25);
    s.holds(
        "triangle above 1/4",
        c.len() == 1 && (c[0].duration - 0.5).abs() < 1e-12 && (c[0].height - 0.25).abs() < 1e-12,
    );
    s.holds("triangle above its max", continuum::components_above(&tri, 0.5).is_empty());
    let c = continuum::components_above(&tri, 0.0);
    s.holds(
        "triangle above 0",
        c.len() == 1 && (c[0].duration - 1.0).abs() < 1e-12 && (c[0].height - 0.5).abs() < 1e-12,
    );
    let one = continuum::psi_level_sweep(&tri, &TollFunction::power(0.0, 0.0), 1000).unwrap_or(f64::NAN);
    s.close("triangle Ψ(1)", one, 0.25, 1e-3);
    let x = continuum::psi_level_sweep(&tri, &TollFunction::power(1.0, 0.0), 1000).unwrap_or(f64::NAN);
    s.close("triangle Ψ(x)", x, 1.0 / 6.0, 1e-3);
    let z = continuum::psi_level_sweep(&tri, &TollFunction::custom(|_, _| 0.0), 1000).unwrap_or(f64::NAN);
    s.close("triangle Ψ(0)", z, 0.0, 0.0);
}

fn harness(s: &mut Suite) {
    let cat = OffspringModel::catalan();
    // C(101, 50) 2^{-101} via log-binomial
    let ln_binom = theory::ln_gamma(102.0) - theory::ln_gamma(51.0) - theory::ln_gamma(52.0);
    let exact = (ln_binom - 101.0 * std::f64::consts::LN_2).exp();
    let p = harness::local_probability(&cat, 101);
    s.close("P(S_101 = 100) Catalan", p, exact, 1e-11);
    let scaled = cat.normalizer(101) * p / cat.span() as f64;
    s.close("LLT n=101 within 2%", scaled, theory::g0(2.0, 0.5), 0.02);
    s.close("P(S_2 = 1) geometric", harness::local_probability(&OffspringModel::geometric(), 2), 0.25, 1e-13);
    s.close("P(S_4 = 3) Catalan", harness::local_probability(&cat, 4), 0.0, 0.0);

    let mut cfg = ExperimentConfig::new(cat, Mode::Moment);
    cfg.sizes = vec![11];
    cfg.replicates = 2;
    cfg.tolls = vec![PowerToll::zero()];
    let ok = harness::run_moment(&cfg)
        .map(|r| r.rows.len() == 1 && r.rows[0].estimate == 0.0 && r.rows[0].stderr == 0.0)
        .unwrap_or(false);
    s.holds("zero toll, R=2", ok);
    let pv = theory::phase_regime(2.0, 0.5, 0.0);
    s.holds("α′ = 1/γ predicted NonGlobal", pv.regime == Regime::NonGlobal);
}

#[cfg(test)]
mod tests {
    #[test]
    fn golden_suite_passes() {
        let checks = super::run();
        let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(checks.len() > 60);
    }
}
