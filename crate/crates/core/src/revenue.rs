//! Expected revenue: closed forms on product distributions, a deterministic
//! parallel Monte Carlo estimator, worst-case revenue over the ambiguity set
//! for top-k mechanisms, reserve optimization and the unknown-n guarantee.

use crate::dist::{is_regular_above_reserve, Dist, RegularityReport, RevenueCurve};
use crate::error::{Error, Result};
use crate::mech::{Mechanism, Profile, TopKClass};
use crate::dist::DEFAULT_GRID;
use crate::orderstat::{consistent_iid, h_inverse_unchecked, h_unchecked, AmbiguitySpec, ProductDist};
use crate::quad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RevenueReport {
    pub mechanism: Mechanism,
    pub distribution: String,
    pub expected_revenue: f64,
    pub method: Method,
    pub mc_stderr: Option<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

/// Order-statistic marginals of some product distribution.
trait OrderStats: Sync {
    fn n(&self) -> usize;
    /// Knots between which the CDFs are smooth.
    fn grid(&self) -> Vec<f64>;
    /// Gauss-Legendre points per grid segment.
    fn quad_points(&self) -> usize;
    /// `Pr(v_(j) <= v)`.
    fn cdf(&self, j: usize, v: f64) -> f64;
    /// `Pr(v_(j) < v)`.
    fn cdf_left(&self, j: usize, v: f64) -> f64;
}

impl OrderStats for ProductDist {
    fn n(&self) -> usize {
        ProductDist::n(self)
    }
    fn grid(&self) -> Vec<f64> {
        ProductDist::grid(self)
    }
    fn quad_points(&self) -> usize {
        // Between merged knots the CDFs are polynomials of degree <= n.
        (ProductDist::n(self) + 2) / 2
    }
    fn cdf(&self, j: usize, v: f64) -> f64 {
        self.os_cdf(j, v)
    }
    fn cdf_left(&self, j: usize, v: f64) -> f64 {
        self.os_cdf_left(j, v)
    }
}

/// The consistent i.i.d. distribution evaluated through `G` itself:
/// `Pr(v_(j) <= v) = H_{n,j}(H_{n,k}⁻¹(G(v)))`, with no interpolation of the
/// marginal between knots.
struct ConsistentIid<'a> {
    n: usize,
    k: usize,
    g: &'a Dist,
}

impl ConsistentIid<'_> {
    fn map(&self, j: usize, g: f64) -> f64 {
        if j == self.k {
            g
        } else {
            h_unchecked(self.n, j, h_inverse_unchecked(self.n, self.k, g))
        }
    }
}

impl OrderStats for ConsistentIid<'_> {
    fn n(&self) -> usize {
        self.n
    }
    fn grid(&self) -> Vec<f64> {
        self.g.refined(DEFAULT_GRID).knots().iter().map(|k| k.value).collect()
    }
    fn quad_points(&self) -> usize {
        16
    }
    fn cdf(&self, j: usize, v: f64) -> f64 {
        self.map(j, self.g.cdf(v))
    }
    fn cdf_left(&self, j: usize, v: f64) -> f64 {
        self.map(j, self.g.cdf_left(v))
    }
}

/// Tail integrals `∫_x^∞ Pr(v_(j) > v) dv` precomputed on the grid so that
/// each reserve evaluation costs one segment of quadrature.
struct TailTable<'a> {
    os: &'a dyn OrderStats,
    grid: Vec<f64>,
    points: usize,
    suffix: BTreeMap<usize, Vec<f64>>,
}

impl<'a> TailTable<'a> {
    fn new(os: &'a dyn OrderStats, stats: impl IntoIterator<Item = usize>) -> Self {
        let grid = os.grid();
        let points = os.quad_points();
        let mut suffix = BTreeMap::new();
        for j in stats {
            if j == 0 || j > os.n() || suffix.contains_key(&j) {
                continue;
            }
            let segs: Vec<f64> = (0..grid.len().saturating_sub(1))
                .into_par_iter()
                .map(|s| quad::integrate(grid[s], grid[s + 1], points, |v| 1.0 - os.cdf(j, v)))
                .collect();
            let mut acc = vec![0.0; grid.len()];
            for s in (0..segs.len()).rev() {
                acc[s] = acc[s + 1] + segs[s];
            }
            suffix.insert(j, acc);
        }
        TailTable { os, grid, points, suffix }
    }

    fn tail(&self, j: usize, x: f64) -> f64 {
        let Some(acc) = self.suffix.get(&j) else {
            // Order statistics beyond n are dummy zeros.
            return 0.0;
        };
        let g = &self.grid;
        if x < g[0] {
            return g[0] - x + acc[0];
        }
        let s = g.partition_point(|&v| v <= x);
        if s == g.len() {
            return 0.0;
        }
        quad::integrate(x, g[s], self.points, |v| 1.0 - self.os.cdf(j, v)) + acc[s]
    }

    /// `Pr(v_(j) >= r)`.
    fn at_least(&self, j: usize, r: f64) -> f64 {
        if j > self.os.n() {
            return if r <= 0.0 { 1.0 } else { 0.0 };
        }
        1.0 - self.os.cdf_left(j, r)
    }

    fn multiunit(&self, m: usize, r: f64) -> f64 {
        let sold: f64 = (1..=m).map(|j| self.at_least(j, r)).sum();
        r * sold + m as f64 * self.tail(m + 1, r)
    }

    fn laddered(&self, rates: &[f64], r: f64) -> f64 {
        let k = rates.len();
        (1..=k)
            .map(|j| {
                let next = if j < k { rates[j] } else { 0.0 };
                (rates[j - 1] - next) * self.multiunit(j, r)
            })
            .sum()
    }

    fn posted(&self, p: f64) -> f64 {
        p * self.at_least(1, p)
    }
}

/// `p · (1 - Π F_i(p-))`: the first bidder with value at least `p` buys.
pub fn pp_expected_revenue(p: f64, pd: &ProductDist) -> f64 {
    let none: f64 = pd.components().iter().map(|d| d.cdf_left(p)).product();
    p * (1.0 - none)
}

/// `r · Pr(v_(1) >= r) + ∫_r^∞ Pr(v_(2) > v) dv`.
pub fn spa_expected_revenue(r: f64, pd: &ProductDist) -> f64 {
    TailTable::new(pd, [2]).multiunit(1, r)
}

/// `r · Σ_{j<=m} Pr(v_(j) >= r) + m ∫_r^∞ Pr(v_(m+1) > v) dv`.
pub fn multiunit_expected_revenue(m: usize, r: f64, pd: &ProductDist) -> f64 {
    TailTable::new(pd, [m + 1]).multiunit(m, r)
}

/// A laddered auction is a click-rate-weighted sum of multi-unit auctions.
pub fn laddered_expected_revenue(rates: &[f64], r: f64, pd: &ProductDist) -> f64 {
    TailTable::new(pd, 2..=rates.len() + 1).laddered(rates, r)
}

/// Revenue of Myerson's auction for `n` i.i.d. bidders from `base`: the
/// expected maximum positive ironed virtual value, summed edge by edge over
/// the ironed revenue curve.
pub fn myerson_iid_expected_revenue(base: &Dist, n: usize) -> f64 {
    let curve = RevenueCurve::from_dist(base);
    curve
        .ironed_knots()
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let p_lowest_quantile_here = (1.0 - w[0].0).powi(n as i32) - (1.0 - w[1].0).powi(n as i32);
            slope.max(0.0) * p_lowest_quantile_here
        })
        .sum()
}

/// Closed-form expected revenue where one exists. Myerson has one only when
/// every bidder is drawn from its base distribution.
pub fn closed_form_revenue(mech: &Mechanism, pd: &ProductDist) -> Result<f64> {
    Ok(match mech {
        Mechanism::PostedPrice { price } => pp_expected_revenue(*price, pd),
        Mechanism::SpaReserve { reserve } => spa_expected_revenue(*reserve, pd),
        Mechanism::MultiUnit { units, reserve } => {
            if *units >= pd.n() {
                return Err(Error::Domain(format!("{units} units need more than {units} bidders")));
            }
            multiunit_expected_revenue(*units, *reserve, pd)
        }
        Mechanism::Laddered { rates, reserve } => laddered_expected_revenue(rates, *reserve, pd),
        Mechanism::MyersonIid(m) => {
            if !pd.components().iter().all(|d| d == m.base()) {
                return Err(Error::Domain("Myerson closed form needs bidders drawn from its base".into()));
            }
            myerson_iid_expected_revenue(m.base(), pd.n())
        }
    })
}

const MC_CHUNK: u64 = 4096;

/// Monte Carlo revenue. Sample `s` draws its uniforms from a ChaCha stream
/// keyed by `(seed, s)`, chunks are evaluated in parallel and summed in
/// index order, so the estimate is bit-identical for any thread count.
pub fn mc_expected_revenue(mech: &Mechanism, pd: &ProductDist, samples: u64, seed: u64) -> Result<RevenueReport> {
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let n = pd.n();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut sum, mut sumsq) = (0.0, 0.0);
            let mut u = vec![0.0; n];
            for s in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(samples) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s);
                for x in u.iter_mut() {
                    *x = rng.random::<f64>();
                }
                let tie: f64 = rng.random();
                let prof = Profile::new(pd.sample_with(&u))?;
                let pay = mech.outcome(&prof, tie)?.total_payment;
                sum += pay;
                sumsq += pay * pay;
            }
            Ok((sum, sumsq))
        })
        .collect();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for p in partial {
        let (a, b) = p?;
        sum += a;
        sumsq += b;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = if samples > 1 { ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(RevenueReport {
        mechanism: mech.clone(),
        distribution: format!("{n} independent bidders"),
        expected_revenue: mean,
        method: Method::MonteCarlo,
        mc_stderr: Some((var / nf).sqrt()),
        samples: Some(samples),
        seed: Some(seed),
    })
}

fn check_class(mech: &Mechanism, spec: &AmbiguitySpec) -> Result<()> {
    match mech.topk_class() {
        TopKClass::NotSeparable => Err(Error::NotSeparable(mech.to_string())),
        TopKClass::Separable(c) if c > spec.k => Err(Error::ClassExceedsInformation { class: c, k: spec.k }),
        TopKClass::Separable(_) => Ok(()),
    }
}

/// Worst-case revenue over the ambiguity set for a top-k mechanism, which is
/// attained at the consistent i.i.d. distribution.
pub fn worst_case_revenue_topk(mech: &Mechanism, spec: &AmbiguitySpec) -> Result<f64> {
    check_class(mech, spec)?;
    let os = ConsistentIid { n: spec.n, k: spec.k, g: &spec.g };
    Ok(match mech {
        Mechanism::PostedPrice { price } => TailTable::new(&os, []).posted(*price),
        Mechanism::SpaReserve { reserve } => TailTable::new(&os, [2]).multiunit(1, *reserve),
        Mechanism::MultiUnit { units, reserve } => TailTable::new(&os, [units + 1]).multiunit(*units, *reserve),
        Mechanism::Laddered { rates, reserve } => {
            TailTable::new(&os, 2..=rates.len() + 1).laddered(rates, *reserve)
        }
        Mechanism::MyersonIid(_) => unreachable!("rejected by the class check"),
    })
}

/// Mechanism families searched by [`optimal_robust_reserve`].
#[derive(Clone, Debug, PartialEq)]
pub enum ReserveFamily {
    Spa,
    PostedPrice,
    MultiUnit(usize),
    Laddered(Vec<f64>),
}

impl ReserveFamily {
    pub fn mechanism(&self, reserve: f64) -> Result<Mechanism> {
        match self {
            ReserveFamily::Spa => Mechanism::spa(reserve),
            ReserveFamily::PostedPrice => Mechanism::posted_price(reserve),
            ReserveFamily::MultiUnit(m) => Mechanism::multi_unit(*m, reserve),
            ReserveFamily::Laddered(rates) => Mechanism::laddered(rates.clone(), reserve),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReserveChoice {
    pub reserve: f64,
    pub worst_case_revenue: f64,
    /// Regularity of the consistent i.i.d. marginal; when it is regular
    /// above the reserve, SPA with this reserve is robustly optimal.
    pub regularity: RegularityReport,
}

/// Best reserve for a family against the worst case in the ambiguity set.
pub fn optimal_robust_reserve(spec: &AmbiguitySpec, family: &ReserveFamily) -> Result<ReserveChoice> {
    check_class(&family.mechanism(0.0)?, spec)?;
    if let ReserveFamily::MultiUnit(m) = family {
        if *m >= spec.n {
            return Err(Error::Domain(format!("{m} units need more than {m} bidders")));
        }
    }
    let os = ConsistentIid { n: spec.n, k: spec.k, g: &spec.g };
    let table = match family {
        ReserveFamily::Spa => TailTable::new(&os, [2]),
        ReserveFamily::PostedPrice => TailTable::new(&os, []),
        ReserveFamily::MultiUnit(m) => TailTable::new(&os, [m + 1]),
        ReserveFamily::Laddered(rates) => TailTable::new(&os, 2..=rates.len() + 1),
    };
    let eval = |r: f64| match family {
        ReserveFamily::Spa => table.multiunit(1, r),
        ReserveFamily::PostedPrice => table.posted(r),
        ReserveFamily::MultiUnit(m) => table.multiunit(*m, r),
        ReserveFamily::Laddered(rates) => table.laddered(rates, r),
    };
    let mut knots: Vec<f64> = spec.g.knots().iter().map(|k| k.value).collect();
    if knots[0] > 0.0 {
        knots.insert(0, 0.0);
    }
    let (reserve, worst_case_revenue) = maximize_piecewise(&knots, eval);
    let regularity = is_regular_above_reserve(&consistent_iid(spec));
    Ok(ReserveChoice { reserve, worst_case_revenue, regularity })
}

/// Number of best knots whose neighbouring segments are searched.
const REFINE_CANDIDATES: usize = 4;
const SCAN_POINTS: usize = 64;
const PRICE_RESOLUTION: f64 = 1e-8;

/// Maximizes `f`, smooth between consecutive `knots`, by evaluating every
/// knot and then scanning and golden-section searching the segments next to
/// the best ones. Ties go to the smaller argument.
pub(crate) fn maximize_piecewise(knots: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    let vals: Vec<f64> = knots.iter().map(|&x| f(x)).collect();
    let mut order: Vec<usize> = (0..knots.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut best = (knots[order[0]], vals[order[0]]);
    // Interior points must beat the knots by more than rounding noise.
    let improve = |best: &mut (f64, f64), x: f64, y: f64| {
        if y > best.1 + 1e-13 * best.1.abs().max(1.0) {
            *best = (x, y);
        }
    };
    let mut segments: Vec<usize> = Vec::new();
    for &i in order.iter().take(REFINE_CANDIDATES) {
        if i > 0 {
            segments.push(i - 1);
        }
        if i + 1 < knots.len() {
            segments.push(i);
        }
    }
    segments.sort_unstable();
    segments.dedup();
    for s in segments {
        let (a, b) = (knots[s], knots[s + 1]);
        let h = (b - a) / (SCAN_POINTS + 1) as f64;
        let mut top = (a + h, f(a + h));
        for j in 2..=SCAN_POINTS {
            let x = a + j as f64 * h;
            let y = f(x);
            if y > top.1 {
                top = (x, y);
            }
        }
        let (x, y) = golden_section((top.0 - h).max(a), (top.0 + h).min(b), &f);
        let cand = if y > top.1 { (x, y) } else { top };
        improve(&mut best, cand.0, cand.1);
    }
    best
}

fn golden_section(mut a: f64, mut b: f64, f: &impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > PRICE_RESOLUTION {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Root of `z (1 - ln z) = g` on `[0, 1]`; the map is increasing there.
pub fn z_star(g: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    if g >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid * (1.0 - mid.ln()) < g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Revenue guarantee of SPA with reserve `p` when only the second-highest
/// value distribution `g` is known and the number of bidders is not:
/// `p (1 - z*) + ∫_p^∞ (1 - G)`, with `z*` solving `z (1 - ln z) = G(p-)`.
pub fn unknown_n_bound(p: f64, g: &Dist) -> f64 {
    p * (1.0 - z_star(g.cdf_left(p))) + g.tail_integral(p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnknownNReserve {
    pub reserve: f64,
    pub z_star: f64,
    pub guarantee: f64,
}

/// Reserve maximizing [`unknown_n_bound`].
pub fn optimal_unknown_n_reserve(g: &Dist) -> UnknownNReserve {
    let mut knots: Vec<f64> = g.knots().iter().map(|k| k.value).collect();
    if knots[0] > 0.0 {
        knots.insert(0, 0.0);
    }
    let (reserve, guarantee) = maximize_piecewise(&knots, |p| unknown_n_bound(p, g));
    UnknownNReserve { reserve, z_star: z_star(g.cdf_left(reserve)), guarantee }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sandwich {
    /// Worst-case revenue of SPA with the best robust reserve.
    pub lower: f64,
    /// Myerson's revenue on the consistent i.i.d. distribution.
    pub upper: f64,
    pub reserve: f64,
    pub regular_above_reserve: bool,
}

/// Bounds on the robust optimum for `k >= 2`: the robust SPA value below and
/// the i.i.d. Myerson value above.
pub fn robust_sandwich(spec: &AmbiguitySpec) -> Result<Sandwich> {
    if spec.k < 2 {
        return Err(Error::Domain("the sandwich bounds need k >= 2".into()));
    }
    let choice = optimal_robust_reserve(spec, &ReserveFamily::Spa)?;
    let upper = myerson_iid_expected_revenue(&consistent_iid(spec), spec.n);
    Ok(Sandwich {
        lower: choice.worst_case_revenue,
        upper,
        reserve: choice.reserve,
        regular_above_reserve: choice.regularity.regular_above_reserve,
    })
}
