//! Per-profile outcomes of the mechanisms studied here. All of them are
//! dominant-strategy truthful, so outcomes are computed on true values.

use crate::dist::{Dist, VirtualValueFn};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A value profile with its order statistics cached. Ties in value are
/// ordered by smaller bidder index first.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    values: Vec<f64>,
    sorted_desc: Vec<usize>,
}

impl Profile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empty profile".into()));
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NegativeSupport(v));
        }
        let mut sorted_desc: Vec<usize> = (0..values.len()).collect();
        sorted_desc.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        Ok(Profile { values, sorted_desc })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Bidder indices from highest to lowest value.
    pub fn sorted_desc(&self) -> &[usize] {
        &self.sorted_desc
    }

    /// `v_(i)` for `i` in `1..=n`; zero beyond `n`, as if padded with
    /// dummy bidders.
    pub fn order_stat(&self, i: usize) -> f64 {
        match i {
            0 => f64::INFINITY,
            i if i <= self.n() => self.values[self.sorted_desc[i - 1]],
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Outcome {
    /// `(bidder index, payment)` for each bidder who is served.
    pub winners: Vec<(usize, f64)>,
    pub total_payment: f64,
}

impl Outcome {
    fn from_winners(winners: Vec<(usize, f64)>) -> Self {
        let total_payment = winners.iter().map(|w| w.1).sum();
        Outcome { winners, total_payment }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Smaller bidder index wins ties.
    Lexicographic,
    /// A uniformly random priority order, realized from a supplied uniform.
    Uniform,
}

/// Myerson's optimal auction for i.i.d. bidders drawn from `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct MyersonIid {
    base: Dist,
    vv: VirtualValueFn,
    tiebreak: TieBreak,
}

impl MyersonIid {
    pub fn base(&self) -> &Dist {
        &self.base
    }

    pub fn virtual_values(&self) -> &VirtualValueFn {
        &self.vv
    }

    pub fn tiebreak(&self) -> TieBreak {
        self.tiebreak
    }

    /// Outcome under an explicit priority order (`priority[0]` is favoured
    /// most). The winner has the largest non-negative `φ̄`; it pays the
    /// smallest value that would still have won against the others.
    pub fn outcome_with_priority(&self, prof: &Profile, priority: &[usize]) -> Outcome {
        let n = prof.n();
        let phis: Vec<f64> = prof.values().iter().map(|&v| self.vv.ironed(v)).collect();
        let mut rank = vec![0; n];
        for (r, &i) in priority.iter().enumerate() {
            rank[i] = r;
        }
        let mut winner: Option<usize> = None;
        for &i in priority {
            if phis[i] >= 0.0 && winner.is_none_or(|w| phis[i] > phis[w]) {
                winner = Some(i);
            }
        }
        let Some(w) = winner else {
            return Outcome::default();
        };
        let mut below = 0.0f64;
        let mut above = f64::NEG_INFINITY;
        for l in (0..n).filter(|&l| l != w) {
            if rank[l] > rank[w] {
                below = below.max(phis[l]);
            } else {
                above = above.max(phis[l]);
            }
        }
        let v = prof.values()[w];
        let t1 = self.vv.inf_at_least(below).unwrap_or(v);
        let t2 = self.vv.inf_greater(above).unwrap_or(v);
        Outcome::from_winners(vec![(w, t1.max(t2).min(v))])
    }
}

/// Priority order realized from a uniform draw: `⌊u · n!⌋` decoded as a
/// permutation for `n <= 12`, otherwise a shuffle seeded by the bits of `u`.
pub fn priority_from_uniform(u: f64, n: usize) -> Vec<usize> {
    let u = u.clamp(0.0, 1.0);
    if n <= 12 {
        let fact: u64 = (1..=n as u64).product();
        let mut code = ((u * fact as f64) as u64).min(fact - 1);
        let mut pool: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(n);
        let mut block = fact;
        for m in (1..=n as u64).rev() {
            block /= m;
            let idx = (code / block) as usize;
            code %= block;
            out.push(pool.remove(idx));
        }
        out
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(u.to_bits()));
        order
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    PostedPrice { price: f64 },
    SpaReserve { reserve: f64 },
    MyersonIid(Box<MyersonIid>),
    /// `units` identical items, uniform price `max(v_(units+1), reserve)`.
    MultiUnit { units: usize, reserve: f64 },
    /// Position auction with click rates `rates[0] >= rates[1] >= … > 0`.
    Laddered { rates: Vec<f64>, reserve: f64 },
}

/// Membership in the top-k order-statistic class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopKClass {
    /// Revenue is a sum of functions of the top `k` order statistics.
    Separable(usize),
    NotSeparable,
}

fn check_price(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::Domain(format!("prices and reserves must be finite and non-negative, got {p}")));
    }
    Ok(())
}

impl Mechanism {
    pub fn posted_price(price: f64) -> Result<Self> {
        check_price(price)?;
        Ok(Mechanism::PostedPrice { price })
    }

    pub fn spa(reserve: f64) -> Result<Self> {
        check_price(reserve)?;
        Ok(Mechanism::SpaReserve { reserve })
    }

    pub fn myerson(base: Dist, tiebreak: TieBreak) -> Self {
        let vv = VirtualValueFn::new(&base);
        Mechanism::MyersonIid(Box::new(MyersonIid { base, vv, tiebreak }))
    }

    pub fn multi_unit(units: usize, reserve: f64) -> Result<Self> {
        check_price(reserve)?;
        if units == 0 {
            return Err(Error::Domain("need at least one unit".into()));
        }
        Ok(Mechanism::MultiUnit { units, reserve })
    }

    pub fn laddered(rates: Vec<f64>, reserve: f64) -> Result<Self> {
        check_price(reserve)?;
        if rates.is_empty() || rates.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Domain("click rates must be positive".into()));
        }
        if rates.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Domain("click rates must be non-increasing".into()));
        }
        Ok(Mechanism::Laddered { rates, reserve })
    }

    pub fn topk_class(&self) -> TopKClass {
        match self {
            Mechanism::PostedPrice { .. } => TopKClass::Separable(1),
            Mechanism::SpaReserve { .. } => TopKClass::Separable(2),
            Mechanism::MultiUnit { units, .. } => TopKClass::Separable(units + 1),
            Mechanism::Laddered { rates, .. } => TopKClass::Separable(rates.len() + 1),
            Mechanism::MyersonIid(_) => TopKClass::NotSeparable,
        }
    }

    /// Number of items or slots, an upper bound on winners.
    pub fn capacity(&self) -> usize {
        match self {
            Mechanism::MultiUnit { units, .. } => *units,
            Mechanism::Laddered { rates, .. } => rates.len(),
            _ => 1,
        }
    }

    /// Outcome on `prof`; `u` realizes uniform tie-breaking and is ignored
    /// otherwise.
    pub fn outcome(&self, prof: &Profile, u: f64) -> Result<Outcome> {
        match self {
            Mechanism::PostedPrice { price } => Ok(pp_outcome(*price, prof)),
            Mechanism::SpaReserve { reserve } => Ok(spa_outcome(*reserve, prof)),
            Mechanism::MyersonIid(m) => Ok(match m.tiebreak {
                TieBreak::Lexicographic => {
                    let order: Vec<usize> = (0..prof.n()).collect();
                    m.outcome_with_priority(prof, &order)
                }
                TieBreak::Uniform => m.outcome_with_priority(prof, &priority_from_uniform(u, prof.n())),
            }),
            Mechanism::MultiUnit { units, reserve } => multiunit_outcome(*units, *reserve, prof),
            Mechanism::Laddered { rates, reserve } => Ok(laddered_outcome(rates, *reserve, prof)),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::PostedPrice { price } => write!(f, "posted_price(p={price})"),
            Mechanism::SpaReserve { reserve } => write!(f, "spa(r={reserve})"),
            Mechanism::MyersonIid(m) => write!(f, "myerson_iid({:?})", m.tiebreak),
            Mechanism::MultiUnit { units, reserve } => write!(f, "multi_unit(m={units},r={reserve})"),
            Mechanism::Laddered { rates, reserve } => write!(f, "laddered(slots={},r={reserve})", rates.len()),
        }
    }
}

/// Sells to the first bidder (by index) whose value is at least `p`.
pub fn pp_outcome(p: f64, prof: &Profile) -> Outcome {
    match prof.values().iter().position(|&v| v >= p) {
        Some(i) => Outcome::from_winners(vec![(i, p)]),
        None => Outcome::default(),
    }
}

pub fn spa_outcome(r: f64, prof: &Profile) -> Outcome {
    let top = prof.sorted_desc()[0];
    if prof.values()[top] < r {
        return Outcome::default();
    }
    Outcome::from_winners(vec![(top, r.max(prof.order_stat(2)))])
}

pub fn multiunit_outcome(m: usize, r: f64, prof: &Profile) -> Result<Outcome> {
    if m == 0 || m >= prof.n() {
        return Err(Error::Domain(format!("{m} units need more than {m} bidders, got {}", prof.n())));
    }
    let price = r.max(prof.order_stat(m + 1));
    let winners = prof.sorted_desc()[..m]
        .iter()
        .filter(|&&i| prof.values()[i] >= price)
        .map(|&i| (i, price))
        .collect();
    Ok(Outcome::from_winners(winners))
}

/// Slot `i` goes to the `i`-th highest bidder if `v_(i) >= r`, who pays
/// `Σ_{j>=i} (α_j - α_{j+1}) · max(v_(j+1), r)`.
pub fn laddered_outcome(rates: &[f64], r: f64, prof: &Profile) -> Outcome {
    let k = rates.len();
    let alpha = |j: usize| if j <= k { rates[j - 1] } else { 0.0 };
    let mut winners = Vec::new();
    for i in 1..=k.min(prof.n()) {
        if prof.order_stat(i) < r {
            break;
        }
        let pay: f64 = (i..=k).map(|j| (alpha(j) - alpha(j + 1)) * prof.order_stat(j + 1).max(r)).sum();
        winners.push((prof.sorted_desc()[i - 1], pay));
    }
    Outcome::from_winners(winners)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof(v: &[f64]) -> Profile {
        Profile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn posted_price_examples() {
        let o = pp_outcome(0.5, &prof(&[0.3, 0.7, 0.7]));
        assert_eq!(o.winners, vec![(1, 0.5)]);
        assert_eq!(pp_outcome(2.0, &prof(&[1.0, 1.0, 1.0])).total_payment, 0.0);
        assert_eq!(pp_outcome(1.0, &prof(&[1.0, 0.0, 0.0])).winners, vec![(0, 1.0)]);
    }

    #[test]
    fn spa_examples() {
        assert_eq!(spa_outcome(0.5, &prof(&[0.9, 0.3])).winners, vec![(0, 0.5)]);
        assert_eq!(spa_outcome(0.5, &prof(&[0.9, 0.7])).winners, vec![(0, 0.7)]);
        assert_eq!(spa_outcome(0.0, &prof(&[3.0, 2.0, 1.0])).total_payment, 2.0);
        assert_eq!(spa_outcome(0.0, &prof(&[1.0, 1.0])).winners, vec![(0, 1.0)]);
    }

    #[test]
    fn myerson_examples() {
        let fd = Dist::two_point(1.0, 0.8, 2.0).unwrap();
        let m = Mechanism::myerson(fd, TieBreak::Lexicographic);
        let o = m.outcome(&prof(&[1.0, 2.0, 1.0]), 0.0).unwrap();
        assert_eq!(o.winners, vec![(1, 2.0)]);
        let o = m.outcome(&prof(&[2.0, 1.0, 1.0]), 0.0).unwrap();
        assert_eq!(o.winners, vec![(0, 1.0)]);
        let o = m.outcome(&prof(&[1.0, 1.0, 1.0]), 0.0).unwrap();
        assert_eq!(o.winners, vec![(0, 1.0)]);

        let u = Mechanism::myerson(Dist::uniform(0.0, 1.0).unwrap(), TieBreak::Lexicographic);
        assert_eq!(u.outcome(&prof(&[0.3, 0.2]), 0.0).unwrap().total_payment, 0.0);
        let o = u.outcome(&prof(&[0.8, 0.2]), 0.0).unwrap();
        assert_eq!(o.winners.len(), 1);
        assert!((o.total_payment - 0.5).abs() < 1e-3);
        let o = u.outcome(&prof(&[0.8, 0.7]), 0.0).unwrap();
        assert!((o.total_payment - 0.7).abs() < 1e-3);
    }

    #[test]
    fn uniform_priority_covers_all_orders() {
        let mut seen = std::collections::HashSet::new();
        for j in 0..6 {
            seen.insert(priority_from_uniform((j as f64 + 0.5) / 6.0, 3));
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(priority_from_uniform(0.0, 3), vec![0, 1, 2]);
        assert_eq!(priority_from_uniform(1.0, 3), vec![2, 1, 0]);
        let big = priority_from_uniform(0.3, 20);
        let mut sorted = big.clone();
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn multiunit_examples() {
        let o = multiunit_outcome(2, 0.0, &prof(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(o.winners, vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(multiunit_outcome(2, 1.5, &prof(&[3.0, 2.0, 1.0])).unwrap().total_payment, 3.0);
        let p = prof(&[0.4, 0.9, 0.6]);
        assert_eq!(multiunit_outcome(1, 0.5, &p).unwrap(), spa_outcome(0.5, &p));
        assert!(multiunit_outcome(3, 0.0, &p).is_err());
    }

    #[test]
    fn laddered_examples() {
        let o = laddered_outcome(&[1.0, 0.5], 0.0, &prof(&[3.0, 2.0, 1.0]));
        assert_eq!(o.winners, vec![(0, 1.5), (1, 0.5)]);
        assert_eq!(o.total_payment, 2.0);
        let p = prof(&[0.4, 0.9, 0.6]);
        assert_eq!(laddered_outcome(&[1.0], 0.3, &p).total_payment, spa_outcome(0.3, &p).total_payment);
        assert_eq!(laddered_outcome(&[1.0, 0.5], 5.0, &p).total_payment, 0.0);
    }

    #[test]
    fn topk_classes() {
        assert_eq!(Mechanism::spa(0.3).unwrap().topk_class(), TopKClass::Separable(2));
        assert_eq!(Mechanism::posted_price(0.3).unwrap().topk_class(), TopKClass::Separable(1));
        assert_eq!(Mechanism::multi_unit(2, 0.0).unwrap().topk_class(), TopKClass::Separable(3));
        assert_eq!(Mechanism::laddered(vec![1.0, 0.5], 0.0).unwrap().topk_class(), TopKClass::Separable(3));
        let m = Mechanism::myerson(Dist::zero(), TieBreak::Uniform);
        assert_eq!(m.topk_class(), TopKClass::NotSeparable);
    }

    #[test]
    fn constructors_validate() {
        assert!(Mechanism::spa(-1.0).is_err());
        assert!(Mechanism::laddered(vec![0.5, 1.0], 0.0).is_err());
        assert!(Mechanism::laddered(vec![], 0.0).is_err());
        assert!(Profile::new(vec![1.0, -0.5]).is_err());
    }
}
