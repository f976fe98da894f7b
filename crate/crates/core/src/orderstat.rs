//! Order statistics of independent bidders.
//!
//! `H_{n,k}(u)` maps a common marginal CDF value `u` to the CDF value of the
//! `k`-th highest of `n` i.i.d. draws. It is a strictly increasing bijection
//! of `[0, 1]`, so every observed `G` has exactly one consistent i.i.d.
//! marginal, obtained by inverting `H` pointwise.

use crate::dist::{Dist, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::quad;

/// `Σ_{t<k} C(n,t) (1-u)^t u^(n-t)`, the probability that at most `k - 1`
/// of `n` i.i.d. draws with CDF value `u` exceed the threshold.
pub fn h_poly(n: usize, k: usize, u: f64) -> Result<f64> {
    check_index(k, n)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u = {u} outside [0,1]")));
    }
    Ok(h_unchecked(n, k, u))
}

pub(crate) fn h_unchecked(n: usize, k: usize, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let w = 1.0 - u;
    let mut binom = 1.0;
    let (mut below, mut above) = (0.0, 0.0);
    for t in 0..=n {
        if t > 0 {
            binom = binom * (n - t + 1) as f64 / t as f64;
        }
        let term = binom * w.powi(t as i32) * u.powi((n - t) as i32);
        if t < k { below += term } else { above += term }
    }
    // Sum whichever side is small, so values near 1 keep their resolution.
    let h = if below <= 0.5 { below } else { 1.0 - above };
    h.clamp(0.0, 1.0)
}

/// Inverse of [`h_poly`] in `u`, by bisection down to adjacent floats.
pub fn h_inverse(n: usize, k: usize, g: f64) -> Result<f64> {
    check_index(k, n)?;
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::Domain(format!("g = {g} outside [0,1]")));
    }
    Ok(h_inverse_unchecked(n, k, g))
}

pub(crate) fn h_inverse_unchecked(n: usize, k: usize, g: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    if g >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h_unchecked(n, k, mid) < g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (h_unchecked(n, k, lo) - g).abs() < (h_unchecked(n, k, hi) - g).abs() {
        lo
    } else {
        hi
    }
}

fn check_index(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    Ok(())
}

/// The ambiguity set: `n` independent bidders whose `k`-th highest value is
/// distributed as `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguitySpec {
    pub n: usize,
    pub k: usize,
    pub g: Dist,
}

impl AmbiguitySpec {
    pub fn new(n: usize, k: usize, g: Dist) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("need at least one bidder".into()));
        }
        check_index(k, n)?;
        Ok(AmbiguitySpec { n, k, g })
    }
}

/// Independent bidders, one distribution each.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductDist {
    components: Vec<Dist>,
    iid: bool,
}

impl ProductDist {
    pub fn new(components: Vec<Dist>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain("product distribution needs at least one component".into()));
        }
        let iid = components.windows(2).all(|w| w[0] == w[1]);
        Ok(ProductDist { components, iid })
    }

    pub fn iid(d: Dist, n: usize) -> Result<Self> {
        ProductDist::new(vec![d; n])
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Dist] {
        &self.components
    }

    /// Union of all component knots.
    pub fn grid(&self) -> Vec<f64> {
        let refs: Vec<&Dist> = self.components.iter().collect();
        Dist::merged_grid(&refs)
    }

    /// `Pr(v_(i) <= v)`.
    pub fn order_stat_cdf(&self, i: usize, v: f64) -> Result<f64> {
        check_index(i, self.n())?;
        Ok(self.os_cdf(i, v))
    }

    /// `Pr(v_(i) < v)`.
    pub fn order_stat_cdf_left(&self, i: usize, v: f64) -> Result<f64> {
        check_index(i, self.n())?;
        Ok(self.os_cdf_left(i, v))
    }

    pub fn is_iid(&self) -> bool {
        self.iid
    }

    pub(crate) fn os_cdf(&self, i: usize, v: f64) -> f64 {
        if self.iid {
            return h_unchecked(self.n(), i, self.components[0].cdf(v));
        }
        let x: Vec<f64> = self.components.iter().map(|d| 1.0 - d.cdf(v)).collect();
        at_most(&x, i - 1)
    }

    pub(crate) fn os_cdf_left(&self, i: usize, v: f64) -> f64 {
        if self.iid {
            return h_unchecked(self.n(), i, self.components[0].cdf_left(v));
        }
        let x: Vec<f64> = self.components.iter().map(|d| 1.0 - d.cdf_left(v)).collect();
        at_most(&x, i - 1)
    }

    /// Marginal of `v_(i)` on the merged knot grid.
    pub fn order_stat_dist(&self, i: usize) -> Result<Dist> {
        check_index(i, self.n())?;
        Dist::from_grid(&self.grid(), |v| (self.os_cdf_left(i, v), self.os_cdf(i, v)))
    }

    /// `∫_p^∞ Pr(v_(i) > v) dv`. Between merged knots the integrand is a
    /// polynomial of degree at most `n`, so Gauss-Legendre with
    /// `⌈(n+1)/2⌉` points per segment is exact.
    pub fn order_stat_tail_integral(&self, i: usize, p: f64) -> Result<f64> {
        check_index(i, self.n())?;
        Ok(self.os_tail(i, p))
    }

    pub(crate) fn os_tail(&self, i: usize, p: f64) -> f64 {
        let grid = self.grid();
        let points = (self.n() + 2) / 2;
        let mut total = 0.0;
        if p < grid[0] {
            // Below every support point all bidders exceed v.
            total += grid[0] - p;
        }
        for w in grid.windows(2) {
            if w[1] <= p {
                continue;
            }
            let a = p.max(w[0]);
            total += quad::integrate(a, w[1], points, |v| 1.0 - self.os_cdf(i, v));
        }
        total
    }

    /// A profile drawn by inverse transform from one uniform per bidder.
    pub fn sample_with(&self, uniforms: &[f64]) -> Vec<f64> {
        self.components.iter().zip(uniforms).map(|(d, &u)| d.sample(u)).collect()
    }
}

/// `Pr(Σ X_j <= m)` for independent Bernoulli(`x_j`).
fn at_most(x: &[f64], m: usize) -> f64 {
    let pmf = poisson_binomial_pmf(x);
    pmf.iter().take(m + 1).sum::<f64>().clamp(0.0, 1.0)
}

/// Exact pmf of a sum of independent Bernoulli variables, by convolution.
pub fn poisson_binomial_pmf(x: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; x.len() + 1];
    pmf[0] = 1.0;
    for (j, &p) in x.iter().enumerate() {
        let p = p.clamp(0.0, 1.0);
        for l in (0..=j + 1).rev() {
            let stay = pmf[l] * (1.0 - p);
            let up = if l > 0 { pmf[l - 1] * p } else { 0.0 };
            pmf[l] = stay + up;
        }
    }
    pmf
}

/// First-order stochastic dominance: `F1 <= F2` everywhere (both sides of
/// every merged knot), i.e. `d1` dominates `d2`.
pub fn fosd_check(d1: &Dist, d2: &Dist) -> bool {
    const TOL: f64 = 1e-12;
    Dist::merged_grid(&[d1, d2])
        .into_iter()
        .all(|v| d1.cdf(v) <= d2.cdf(v) + TOL && d1.cdf_left(v) <= d2.cdf_left(v) + TOL)
}

/// The consistent i.i.d. marginal `F̄` with `Φ_k(F̄ⁿ) = G`, on a grid of
/// about [`DEFAULT_GRID`] knots.
pub fn consistent_iid(spec: &AmbiguitySpec) -> Dist {
    consistent_iid_with_grid(spec, DEFAULT_GRID)
}

/// As [`consistent_iid`]. A coarse `G` is subdivided to `grid` segments
/// first, since `H⁻¹` is not linear between its knots.
pub fn consistent_iid_with_grid(spec: &AmbiguitySpec, grid: usize) -> Dist {
    let (n, k) = (spec.n, spec.k);
    spec.g
        .refined_if_coarse(grid)
        .map_cdf(|g| h_inverse_unchecked(n, k, g))
        .expect("H inverse is monotone onto [0,1]")
}

/// The stochastically smallest marginal of `v_(i)` over the ambiguity set:
/// the i.i.d. marginal for `i <= k`, and `δ₀` for `i > k`.
pub fn minimal_orderstat_cdf(spec: &AmbiguitySpec, i: usize) -> Result<Dist> {
    check_index(i, spec.n)?;
    if i > spec.k {
        return Ok(Dist::zero());
    }
    if i == spec.k {
        return Ok(spec.g.clone());
    }
    let fbar = consistent_iid(spec);
    let n = spec.n;
    fbar.map_cdf(|u| h_unchecked(n, i, u))
}

/// Round-robin pair schedule `(0,1), (0,2), …, (n-2,n-1)`.
pub fn averaging_schedule(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_poly_examples() {
        for n in 1..6 {
            for k in 1..=n {
                assert_eq!(h_poly(n, k, 0.0).unwrap(), 0.0);
                assert_eq!(h_poly(n, k, 1.0).unwrap(), 1.0);
            }
        }
        assert!((h_poly(3, 2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((h_poly(2, 1, 0.3).unwrap() - 0.09).abs() < 1e-15);
        assert!(matches!(h_poly(3, 4, 0.5), Err(Error::IndexOutOfRange { .. })));
        assert!(h_poly(3, 0, 0.5).is_err());
    }

    #[test]
    fn h_inverse_examples() {
        for n in 1..8 {
            for g in [0.1f64, 0.5, 0.9] {
                let want = 1.0 - (1.0 - g).powf(1.0 / n as f64);
                assert!((h_inverse(n, n, g).unwrap() - want).abs() < 1e-12);
            }
        }
        assert!((h_inverse(3, 2, 0.5).unwrap() - 0.5).abs() < 1e-12);
        // Independent scan of 3u² - 2u³ on a 1e-7 grid.
        let target = 0.75;
        let scan = (0..=10_000_000)
            .map(|i| i as f64 * 1e-7)
            .min_by(|a, b| {
                let fa = (3.0 * a * a - 2.0 * a * a * a - target).abs();
                let fb = (3.0 * b * b - 2.0 * b * b * b - target).abs();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert!((h_inverse(3, 2, 0.75).unwrap() - scan).abs() < 2e-7);
        assert_eq!(h_inverse(4, 2, 0.0).unwrap(), 0.0);
        assert_eq!(h_inverse(4, 2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(poisson_binomial_pmf(&[0.5, 0.5]), vec![0.25, 0.5, 0.25]);
        assert_eq!(poisson_binomial_pmf(&[1.0, 0.0]), vec![0.0, 1.0, 0.0]);
        let x = [0.2, 0.3, 0.4];
        let pmf = poisson_binomial_pmf(&x);
        let mut brute = [0.0; 4];
        for mask in 0..8u32 {
            let mut p = 1.0;
            for (j, xj) in x.iter().enumerate() {
                p *= if mask >> j & 1 == 1 { *xj } else { 1.0 - xj };
            }
            brute[mask.count_ones() as usize] += p;
        }
        for l in 0..4 {
            assert!((pmf[l] - brute[l]).abs() < 1e-15);
        }
    }

    #[test]
    fn order_stat_cdf_examples() {
        let half = Dist::two_point(0.0, 0.5, 1.0).unwrap();
        let pd = ProductDist::iid(half, 2).unwrap();
        assert!((pd.order_stat_cdf(1, 0.0).unwrap() - 0.25).abs() < 1e-15);
        let with_zero = ProductDist::new(vec![Dist::zero(), Dist::zero()]).unwrap();
        assert_eq!(with_zero.order_stat_cdf(2, 0.0).unwrap(), 1.0);
        let bern = Dist::two_point(0.0, 0.8, 1.0).unwrap();
        let pd = ProductDist::iid(bern, 3).unwrap();
        assert!((pd.order_stat_cdf(2, 0.0).unwrap() - 0.896).abs() < 1e-15);
        assert!(pd.order_stat_cdf(4, 0.0).is_err());
    }

    #[test]
    fn consistent_iid_examples() {
        let u = Dist::uniform(0.0, 1.0).unwrap();
        let fbar = consistent_iid(&AmbiguitySpec::new(3, 3, u.clone()).unwrap());
        for v in [0.1, 0.5, 0.9] {
            assert!((fbar.cdf(v) - (1.0 - (1.0 - v).powf(1.0 / 3.0))).abs() < 1e-6);
        }
        let fbar1 = consistent_iid(&AmbiguitySpec::new(4, 1, u).unwrap());
        for k in fbar1.knots() {
            assert!((k.cdf - k.value.powf(0.25)).abs() < 1e-12);
        }
        let bern = Dist::two_point(0.0, 0.5, 1.0).unwrap();
        let fb = consistent_iid(&AmbiguitySpec::new(3, 2, bern).unwrap());
        assert!((fb.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!(fb.is_discrete());
    }

    #[test]
    fn fosd_examples() {
        let u = Dist::uniform(0.0, 1.0).unwrap();
        assert!(fosd_check(&u, &u));
        assert!(fosd_check(&Dist::point_mass(1.0).unwrap(), &Dist::zero()));
        assert!(!fosd_check(&Dist::zero(), &Dist::point_mass(1.0).unwrap()));
    }

    #[test]
    fn minimal_orderstat_examples() {
        let g = Dist::two_point(0.0, 0.5, 1.0).unwrap();
        let spec = AmbiguitySpec::new(3, 2, g.clone()).unwrap();
        assert_eq!(minimal_orderstat_cdf(&spec, 2).unwrap(), g);
        assert_eq!(minimal_orderstat_cdf(&spec, 3).unwrap(), Dist::zero());
        let first = minimal_orderstat_cdf(&spec, 1).unwrap();
        let u = h_inverse(3, 2, 0.5).unwrap();
        assert!((first.cdf(0.0) - u.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn tail_integral_matches_closed_form() {
        // Two uniforms: E[max] = 2/3, E[min] = 1/3.
        let pd = ProductDist::iid(Dist::uniform(0.0, 1.0).unwrap(), 2).unwrap();
        assert!((pd.order_stat_tail_integral(1, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!((pd.order_stat_tail_integral(2, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn schedule_covers_all_pairs() {
        assert_eq!(averaging_schedule(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(averaging_schedule(6).len(), 15);
    }
}
