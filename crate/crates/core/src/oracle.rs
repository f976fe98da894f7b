//! Brute-force certifiers on small discrete instances.
//!
//! Everything here enumerates outcomes directly and deliberately avoids the
//! closed forms in [`crate::revenue`] and the order-statistic machinery in
//! [`crate::orderstat`], so the two can be checked against each other.

use crate::dist::{geometric_average, Dist};
use crate::error::{Error, Result};
use crate::mech::{Mechanism, Profile, TieBreak};
use crate::orderstat::{averaging_schedule, ProductDist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const MAX_BIDDERS: usize = 8;
pub const OUTCOME_GUARD: u128 = 1_000_000;

/// Finite per-bidder supports `(value, probability)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteInstance {
    supports: Vec<Vec<(f64, f64)>>,
}

impl DiscreteInstance {
    pub fn new(supports: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if supports.is_empty() || supports.len() > MAX_BIDDERS {
            return Err(Error::Domain(format!("need 1..={MAX_BIDDERS} bidders, got {}", supports.len())));
        }
        for s in &supports {
            let total: f64 = s.iter().map(|p| p.1).sum();
            if s.is_empty() || (total - 1.0).abs() > 1e-12 || s.iter().any(|p| p.1 < 0.0 || p.0 < 0.0) {
                return Err(Error::InvalidDist("each support must carry probability 1 on non-negative values".into()));
            }
        }
        let outcomes: u128 = supports.iter().map(|s| s.len() as u128).product();
        if outcomes > OUTCOME_GUARD {
            return Err(Error::GuardExceeded { outcomes, limit: OUTCOME_GUARD });
        }
        Ok(DiscreteInstance { supports })
    }

    /// Instance from discrete distributions (all mass on atoms).
    pub fn from_dists(dists: &[Dist]) -> Result<Self> {
        let supports = dists
            .iter()
            .map(|d| {
                if d.is_discrete() {
                    Ok(d.atoms())
                } else {
                    Err(Error::InvalidDist("oracle instances need purely atomic distributions".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteInstance::new(supports)
    }

    pub fn n(&self) -> usize {
        self.supports.len()
    }

    pub fn supports(&self) -> &[Vec<(f64, f64)>] {
        &self.supports
    }

    fn outcome_count(&self) -> usize {
        self.supports.iter().map(Vec::len).product()
    }

    /// The `idx`-th profile in mixed-radix order with its probability.
    fn profile(&self, mut idx: usize) -> (Vec<f64>, f64) {
        let mut values = Vec::with_capacity(self.n());
        let mut prob = 1.0;
        for s in &self.supports {
            let (v, p) = s[idx % s.len()];
            idx /= s.len();
            values.push(v);
            prob *= p;
        }
        (values, prob)
    }

    /// `E[f(profile)]` by enumeration, summed in index order.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        const CHUNK: usize = 1024;
        let total = self.outcome_count();
        let parts: Vec<f64> = (0..total.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(total))
                    .map(|i| {
                        let (v, p) = self.profile(i);
                        if p == 0.0 { 0.0 } else { p * f(&v) }
                    })
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum()
    }
}

/// All permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// Exact expected revenue by enumerating every profile and, for uniform
/// tie-breaking, every priority order.
pub fn exhaustive_revenue(mech: &Mechanism, inst: &DiscreteInstance) -> Result<f64> {
    let n = inst.n();
    if let Mechanism::MultiUnit { units, .. } = mech {
        if *units >= n {
            return Err(Error::Domain(format!("{units} units need more than {units} bidders")));
        }
    }
    let uniform_orders = match mech {
        Mechanism::MyersonIid(m) if m.tiebreak() == TieBreak::Uniform => Some(permutations(n)),
        _ => None,
    };
    Ok(inst.expect(|values| {
        let prof = Profile::new(values.to_vec()).expect("instance values are valid");
        match (&uniform_orders, mech) {
            (Some(orders), Mechanism::MyersonIid(m)) => {
                orders.iter().map(|o| m.outcome_with_priority(&prof, o).total_payment).sum::<f64>()
                    / orders.len() as f64
            }
            _ => mech.outcome(&prof, 0.0).expect("validated above").total_payment,
        }
    }))
}

/// `Pr(#{j : bidder j survives} <= m)` by enumerating all `2^n` subsets.
fn at_most_by_subsets(x: &[f64], m: usize) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > m {
            continue;
        }
        let mut p = 1.0;
        for (j, xj) in x.iter().enumerate() {
            p *= if mask >> j & 1 == 1 { *xj } else { 1.0 - xj };
        }
        total += p;
    }
    total
}

/// Solves for the last survival probability so that
/// `Pr(#survivors <= k - 1) = g`; `None` if no value in `[0, 1]` works.
fn solve_last(prefix: &[f64], k: usize, g: f64) -> Option<f64> {
    let mut x: Vec<f64> = prefix.to_vec();
    x.push(0.0);
    let last = x.len() - 1;
    let mut eval = |t: f64| {
        x[last] = t;
        at_most_by_subsets(&x, k - 1)
    };
    // The constraint is non-increasing in the last survival probability.
    let (hi_val, lo_val) = (eval(0.0), eval(1.0));
    if g > hi_val + 1e-12 || g < lo_val - 1e-12 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) > g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Random survival vectors `x_j = Pr(v_j > v₀)` of product distributions on
/// `{v₀, V}` whose `k`-th highest value has `Pr(v_(k) <= v₀) = G(v₀)`.
pub fn feasible_sampler_pi_k(n: usize, k: usize, g: &Dist, trials: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let atoms = g.atoms();
    if atoms.len() != 2 || !g.is_discrete() {
        return Err(Error::InvalidDist("sampler needs a two-point G".into()));
    }
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    let g0 = atoms[0].1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..trials {
        let prefix: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
        if let Some(last) = solve_last(&prefix, k, g0) {
            let mut x = prefix;
            x.push(last);
            if (at_most_by_subsets(&x, k - 1) - g0).abs() <= 1e-10 {
                out.push(x);
            }
        }
    }
    Ok(out)
}

/// Two-point product distribution for a survival vector.
pub fn two_point_product(x: &[f64], v0: f64, v1: f64) -> Result<ProductDist> {
    ProductDist::new(x.iter().map(|&xj| Dist::two_point(v0, 1.0 - xj, v1)).collect::<Result<Vec<_>>>()?)
}

/// Symmetric solution `x` of `Pr(Bin(n, x) <= k - 1) = g`, by bisection.
fn symmetric_survival(n: usize, k: usize, g: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at_most_by_subsets(&vec![mid; n], k - 1) > g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grid search for `max Pr(ΣX < i)` over survival vectors with
/// `Pr(ΣX < k) = g`. Returns `(grid maximum, symmetric value)`.
pub fn lemma51_grid_check(n: usize, k: usize, i: usize, g: f64, grid_step: f64) -> Result<(f64, f64)> {
    if !(i < k && k <= n && n <= 5) {
        return Err(Error::Domain(format!("need i < k <= n <= 5, got ({n},{k},{i})")));
    }
    if grid_step < 1e-2 || !(0.0..=1.0).contains(&g) {
        return Err(Error::Domain("grid step must be at least 0.01 and g a probability".into()));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let levels: Vec<f64> = (0..=steps).map(|j| (j as f64 * grid_step).min(1.0)).collect();
    let free = n - 1;
    let total = levels.len().pow(free as u32);
    let grid_max = (0..total)
        .into_par_iter()
        .filter_map(|mut idx| {
            let mut prefix = Vec::with_capacity(n);
            for _ in 0..free {
                prefix.push(levels[idx % levels.len()]);
                idx /= levels.len();
            }
            let last = solve_last(&prefix, k, g)?;
            prefix.push(last);
            Some(at_most_by_subsets(&prefix, i - 1))
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let x = symmetric_survival(n, k, g);
    let symmetric = at_most_by_subsets(&vec![x; n], i - 1);
    Ok((grid_max, symmetric))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleReport {
    pub q: f64,
    /// Enumerated optimal revenue on three i.i.d. two-point bidders.
    pub opt_disc: f64,
    pub opt_disc_formula: f64,
    /// Enumerated optimal revenue on the two-active-bidder construction.
    pub opt_construction: f64,
    pub opt_construction_formula: f64,
    /// Largest gap between the two second-highest-value CDFs.
    pub second_stat_max_diff: f64,
    pub gap: f64,
    pub strict: bool,
    /// Whether `3q² - 2q³ >= 3/4`, where the construction's ironed virtual
    /// value stays non-negative.
    pub in_regime: bool,
    pub regime_threshold: f64,
}

/// `Pr(v_(2) <= t)` by enumeration.
fn second_highest_cdf(inst: &DiscreteInstance, t: f64) -> f64 {
    inst.expect(|v| {
        let above = v.iter().filter(|&&x| x > t).count();
        if above <= 1 { 1.0 } else { 0.0 }
    })
}

/// Three i.i.d. bidders on `{1 w.p. q, 2}` against two bidders on
/// `{1, 2 w.p. sqrt(1 - 3q² + 2q³)}` plus a dummy at zero: same
/// distribution of the second-highest value, different optimal revenue.
pub fn counterexample_certificate(q: f64) -> Result<CounterexampleReport> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("q = {q} outside (0,1)")));
    }
    let fd = Dist::two_point(1.0, q, 2.0)?;
    let g1 = 3.0 * q * q - 2.0 * q.powi(3);
    let s = (1.0 - g1).sqrt();
    let f1 = Dist::two_point(1.0, 1.0 - s, 2.0)?;

    let disc = DiscreteInstance::from_dists(&[fd.clone(), fd.clone(), fd.clone()])?;
    let cons = DiscreteInstance::from_dists(&[f1.clone(), f1.clone(), Dist::zero()])?;
    let opt_disc = exhaustive_revenue(&Mechanism::myerson(fd, TieBreak::Lexicographic), &disc)?;
    let opt_construction = exhaustive_revenue(&Mechanism::myerson(f1, TieBreak::Lexicographic), &cons)?;

    let second_stat_max_diff = [0.0, 1.0, 2.0]
        .iter()
        .map(|&t| (second_highest_cdf(&disc, t) - second_highest_cdf(&cons, t)).abs())
        .fold(0.0, f64::max);

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if 3.0 * mid * mid - 2.0 * mid.powi(3) < 0.75 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gap = opt_disc - opt_construction;
    Ok(CounterexampleReport {
        q,
        opt_disc,
        opt_disc_formula: 2.0 - q * q,
        opt_construction,
        opt_construction_formula: 1.0 + s,
        second_stat_max_diff,
        gap,
        strict: gap > 0.0,
        in_regime: g1 >= 0.75,
        regime_threshold: 0.5 * (lo + hi),
    })
}

/// Checks `P(max >= h, min >= l)` under `d1 × d2` against `d × d` for every
/// merged-grid pair `h >= l`, with both weak and strict thresholds.
pub fn dominance_bivariate_check(d1: &Dist, d2: &Dist, d: &Dist) -> bool {
    dominance_bivariate_slack(d1, d2, d) >= -1e-12
}

/// Smallest `LHS - RHS` over the grid pairs of [`dominance_bivariate_check`].
pub fn dominance_bivariate_slack(d1: &Dist, d2: &Dist, d: &Dist) -> f64 {
    let grid = Dist::merged_grid(&[d1, d2, d]);
    let mut worst = f64::INFINITY;
    let weak = |x: &Dist, v: f64| 1.0 - x.cdf_left(v);
    let strict = |x: &Dist, v: f64| 1.0 - x.cdf(v);
    for surv in [&weak as &dyn Fn(&Dist, f64) -> f64, &strict] {
        for (a, &h) in grid.iter().enumerate() {
            for &l in &grid[..=a] {
                let (s1h, s1l, s2h, s2l) = (surv(d1, h), surv(d1, l), surv(d2, h), surv(d2, l));
                let (sh, sl) = (surv(d, h), surv(d, l));
                let lhs = s1h * s2l + s2h * s1l - s1h * s2h;
                let rhs = 2.0 * sh * sl - sh * sh;
                worst = worst.min(lhs - rhs);
            }
        }
    }
    worst
}

/// Runs round-robin geometric averaging and returns the sup-norm distance
/// (over the merged grid, both sides of each knot) of every component from
/// `1 - Π (1 - F_k)^(1/n)`.
pub fn averaging_convergence_check(pd: &ProductDist, sweeps: usize) -> f64 {
    let n = pd.n();
    let grid = pd.grid();
    let limit = |v: f64, left: bool| {
        let prod: f64 = pd
            .components()
            .iter()
            .map(|d| (1.0 - if left { d.cdf_left(v) } else { d.cdf(v) }).powf(1.0 / n as f64))
            .product();
        1.0 - prod
    };
    let target: Vec<(f64, f64)> = grid.iter().map(|&v| (limit(v, true), limit(v, false))).collect();
    let error = |comps: &[Dist]| {
        comps
            .iter()
            .flat_map(|d| {
                grid.iter().zip(&target).map(move |(&v, t)| (d.cdf_left(v) - t.0).abs().max((d.cdf(v) - t.1).abs()))
            })
            .fold(0.0, f64::max)
    };
    let mut comps = pd.components().to_vec();
    let schedule = averaging_schedule(n);
    for _ in 0..sweeps {
        if error(&comps) == 0.0 {
            break;
        }
        for &(i, j) in &schedule {
            let avg = geometric_average(&comps[i], &comps[j]);
            comps[i] = avg.clone();
            comps[j] = avg;
        }
    }
    error(&comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn myerson_f_disc_is_two_minus_q_squared() {
        let q = 0.8;
        let fd = Dist::two_point(1.0, q, 2.0).unwrap();
        let inst = DiscreteInstance::from_dists(&[fd.clone(), fd.clone(), fd.clone()]).unwrap();
        for tb in [TieBreak::Lexicographic, TieBreak::Uniform] {
            let r = exhaustive_revenue(&Mechanism::myerson(fd.clone(), tb), &inst).unwrap();
            assert!((r - 1.36).abs() < 1e-12, "{tb:?}: {r}");
        }
    }

    #[test]
    fn spa_two_point_pair_by_hand() {
        let d = Dist::two_point(1.0, 0.3, 4.0).unwrap();
        let inst = DiscreteInstance::from_dists(&[d.clone(), d]).unwrap();
        let r = exhaustive_revenue(&Mechanism::spa(0.0).unwrap(), &inst).unwrap();
        // Second price is 4 only when both are high.
        let hand = 0.09 * 1.0 + 0.21 * 1.0 + 0.21 * 1.0 + 0.49 * 4.0;
        assert!((r - hand).abs() < 1e-15);
    }

    #[test]
    fn guard_and_validation() {
        let big = vec![vec![(0.0, 0.5), (1.0, 0.5)]; 9];
        assert!(DiscreteInstance::new(big).is_err());
        let wide: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 0.01)).collect();
        assert!(matches!(DiscreteInstance::new(vec![wide; 4]), Err(Error::GuardExceeded { .. })));
        assert!(DiscreteInstance::from_dists(&[Dist::uniform(0.0, 1.0).unwrap()]).is_err());
    }

    #[test]
    fn sampler_satisfies_constraint() {
        let g = Dist::two_point(0.0, 0.5, 1.0).unwrap();
        let xs = feasible_sampler_pi_k(3, 2, &g, 200, 11).unwrap();
        assert!(xs.len() > 20);
        for x in &xs {
            assert!((at_most_by_subsets(x, 1) - 0.5).abs() <= 1e-10);
        }
        let sym = symmetric_survival(3, 2, 0.5);
        assert!((sym - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_k_bidder_construction_is_feasible() {
        // Two active bidders and one that never survives.
        let g0: f64 = 0.75;
        let x = (1.0 - g0).sqrt();
        assert!((at_most_by_subsets(&[x, x, 0.0], 1) - g0).abs() < 1e-12);
        assert!(solve_last(&[x, x], 2, g0).unwrap() < 1e-12);
    }

    #[test]
    fn symmetric_grid_check_small_cases() {
        let (grid, sym) = lemma51_grid_check(3, 2, 1, 0.5, 0.05).unwrap();
        assert!((sym - 0.125).abs() < 1e-12);
        assert!(grid <= sym + 10.0 * 0.05);
        let (_, sym1) = lemma51_grid_check(3, 2, 1, 1.0, 0.1).unwrap();
        assert!((sym1 - 1.0).abs() < 1e-12);
        assert!(lemma51_grid_check(6, 2, 1, 0.5, 0.1).is_err());
    }

    #[test]
    fn counterexample_values() {
        let r = counterexample_certificate(0.8).unwrap();
        assert!((r.opt_disc - 1.36).abs() < 1e-9);
        assert!((r.opt_construction - r.opt_construction_formula).abs() < 1e-9);
        assert!(r.second_stat_max_diff < 1e-12);
        assert!(r.strict && r.in_regime);
        assert!((r.regime_threshold - 0.6736481777).abs() < 1e-9);
        let r7 = counterexample_certificate(0.7).unwrap();
        assert!(r7.in_regime && r7.strict);
        assert!(counterexample_certificate(1.0).is_err());
    }

    #[test]
    fn dominance_examples() {
        let u = Dist::uniform(0.0, 1.0).unwrap();
        assert!(dominance_bivariate_slack(&u, &u, &u).abs() < 1e-12);
        let a = Dist::two_point(0.0, 0.8, 1.0).unwrap();
        let b = Dist::two_point(0.0, 0.2, 1.0).unwrap();
        assert!(dominance_bivariate_check(&a, &b, &geometric_average(&a, &b)));
        let u2 = Dist::uniform(0.0, 2.0).unwrap();
        assert!(dominance_bivariate_check(&u, &u2, &geometric_average(&u, &u2)));
    }

    #[test]
    fn averaging_examples() {
        let u = Dist::uniform(0.0, 1.0).unwrap();
        let iid = ProductDist::iid(u.clone(), 3).unwrap();
        assert_eq!(averaging_convergence_check(&iid, 0), 0.0);
        let pair = ProductDist::new(vec![u, Dist::two_point(0.2, 0.4, 0.9).unwrap()]).unwrap();
        assert!(averaging_convergence_check(&pair, 1) < 1e-15);
    }
}
