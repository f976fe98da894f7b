use crate::output::{num, opt_num, Table};
use crate::scenario::{Choice, Scenario};
use crate::CliError;
use robust_auction::dist::is_regular_above_reserve;
use robust_auction::oracle::counterexample_certificate;
use robust_auction::orderstat::consistent_iid_with_grid;
use robust_auction::revenue::{
    mc_expected_revenue, optimal_robust_reserve, optimal_unknown_n_reserve, robust_sandwich, worst_case_revenue_topk,
    ReserveChoice,
};
use robust_auction::{AmbiguitySpec, Dist, Mechanism, ProductDist, ReserveFamily, RevenueCurve, RevenueReport};

const REPORT_HEADER: [&str; 7] = ["mechanism", "distribution", "expected_revenue", "method", "mc_stderr", "samples", "seed"];

fn report_row(r: &RevenueReport) -> Vec<String> {
    let method = match r.method {
        robust_auction::Method::ClosedForm => "closed-form",
        robust_auction::Method::MonteCarlo => "monte-carlo",
    };
    vec![
        r.mechanism.to_string(),
        r.distribution.clone(),
        num(r.expected_revenue),
        method.into(),
        opt_num(r.mc_stderr),
        r.samples.map(|s| s.to_string()).unwrap_or_default(),
        r.seed.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

pub fn invert(sc: &Scenario) -> Result<Table, CliError> {
    let spec = sc.spec()?;
    let fbar = consistent_iid_with_grid(&spec, sc.grid());
    let pd = ProductDist::iid(fbar.clone(), spec.n)?;
    let mut t = Table::new(&["value", "cdf_left", "cdf", "residual"]);
    for k in fbar.knots() {
        let right = (pd.order_stat_cdf(spec.k, k.value)? - spec.g.cdf(k.value)).abs();
        let left = (pd.order_stat_cdf_left(spec.k, k.value)? - spec.g.cdf_left(k.value)).abs();
        t.push(vec![num(k.value), num(k.cdf_left), num(k.cdf), num(right.max(left))]);
    }
    Ok(t)
}

fn family_of(mech: &Mechanism) -> Result<ReserveFamily, CliError> {
    Ok(match mech {
        Mechanism::PostedPrice { .. } => ReserveFamily::PostedPrice,
        Mechanism::SpaReserve { .. } => ReserveFamily::Spa,
        Mechanism::MultiUnit { units, .. } => ReserveFamily::MultiUnit(*units),
        Mechanism::Laddered { rates, .. } => ReserveFamily::Laddered(rates.clone()),
        Mechanism::MyersonIid(_) => return Err(robust_auction::Error::NotSeparable(mech.to_string()).into()),
    })
}

fn family_name(f: &ReserveFamily) -> &'static str {
    match f {
        ReserveFamily::Spa => "spa",
        ReserveFamily::PostedPrice => "posted_price",
        ReserveFamily::MultiUnit(_) => "multi_unit",
        ReserveFamily::Laddered(_) => "laddered",
    }
}

/// Whether the robust reserve is also the robust optimum over all mechanisms.
fn certified_optimal(spec: &AmbiguitySpec, family: &ReserveFamily, choice: &ReserveChoice) -> bool {
    match family {
        ReserveFamily::PostedPrice => spec.k == 1,
        ReserveFamily::Spa => spec.k >= 2 && choice.regularity.regular_above_reserve,
        _ => false,
    }
}

pub fn reserve(sc: &Scenario) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "mode",
        "family",
        "n",
        "k",
        "reserve",
        "guarantee",
        "z_star",
        "regular_above_reserve",
        "certificate",
    ]);
    if sc.unknown_n {
        let g = sc.g()?;
        let r = optimal_unknown_n_reserve(&g);
        eprintln!("certificate: robust guarantee for every number of bidders; optimality is not certified");
        t.push(vec![
            "unknown-n".into(),
            "spa".into(),
            String::new(),
            "2".into(),
            num(r.reserve),
            num(r.guarantee),
            num(r.z_star),
            String::new(),
            "robust".into(),
        ]);
        return Ok(t);
    }
    let spec = sc.spec()?;
    let family = match sc.mechanism {
        None => ReserveFamily::Spa,
        Some(_) => match sc.choice(|| Err(CliError::Config("reserve search needs a family".into())))? {
            Choice::Optimize(f) => f,
            Choice::Fixed(m) => family_of(&m)?,
        },
    };
    let choice = optimal_robust_reserve(&spec, &family)?;
    let optimal = certified_optimal(&spec, &family, &choice);
    if optimal {
        eprintln!("certificate: this reserve is robustly optimal over all mechanisms");
    } else {
        eprintln!("certificate: robust guarantee only; optimality over all mechanisms is not certified");
    }
    t.push(vec![
        "known-n".into(),
        family_name(&family).into(),
        spec.n.to_string(),
        spec.k.to_string(),
        num(choice.reserve),
        num(choice.worst_case_revenue),
        String::new(),
        choice.regularity.regular_above_reserve.to_string(),
        if optimal { "optimal" } else { "robust" }.into(),
    ]);
    Ok(t)
}

pub fn worstcase(sc: &Scenario) -> Result<Table, CliError> {
    let spec = sc.spec()?;
    let mech = match sc.choice(|| Ok(consistent_iid_with_grid(&spec, sc.grid())))? {
        Choice::Fixed(m) => m,
        Choice::Optimize(f) => f.mechanism(optimal_robust_reserve(&spec, &f)?.reserve)?,
    };
    let value = worst_case_revenue_topk(&mech, &spec)?;
    let report = RevenueReport {
        mechanism: mech,
        distribution: format!("worst case n={} k={} g={}", spec.n, spec.k, sc.g_literal()?.describe()),
        expected_revenue: value,
        method: robust_auction::Method::ClosedForm,
        mc_stderr: None,
        samples: None,
        seed: None,
    };
    let mut t = Table::new(&REPORT_HEADER);
    t.push(report_row(&report));
    Ok(t)
}

pub fn curve(sc: &Scenario) -> Result<Table, CliError> {
    let n = sc.n()?;
    let spec = AmbiguitySpec::new(n, sc.k.unwrap_or(2), sc.g()?)?;
    let fbar = consistent_iid_with_grid(&spec, sc.grid());
    let curve = RevenueCurve::from_dist(&fbar);
    let reg = is_regular_above_reserve(&fbar);
    let mut t = Table::new(&["quantile", "revenue", "ironed_revenue", "above_reserve"]);
    for &(q, r) in curve.knots() {
        let marker = if q <= reg.reserve_quantile { "1" } else { "0" };
        t.push(vec![num(q), num(r), num(curve.ironed_value_at(q)), marker.into()]);
    }
    Ok(t)
}

pub fn simulate(sc: &Scenario, seed: Option<u64>, samples: Option<u64>) -> Result<Table, CliError> {
    let pd = sc.bidders()?;
    let seed = seed
        .or(sc.seed)
        .ok_or_else(|| CliError::Config("simulation needs an explicit seed (--seed or `seed`)".into()))?;
    let samples = samples.or(sc.samples).unwrap_or(100_000);
    let mech = match sc.choice(|| {
        if pd.is_iid() {
            Ok(pd.components()[0].clone())
        } else {
            Err(CliError::Config("myerson needs a `base` when bidders differ".into()))
        }
    })? {
        Choice::Fixed(m) => m,
        Choice::Optimize(_) => return Err(CliError::Config("simulation needs a concrete mechanism".into())),
    };
    let mut report = mc_expected_revenue(&mech, &pd, samples, seed)?;
    report.distribution = sc.bidders.iter().map(|b| b.describe()).collect::<Vec<_>>().join(" x ");
    let mut t = Table::new(&REPORT_HEADER);
    t.push(report_row(&report));
    Ok(t)
}

struct Reproduction {
    table: Table,
    failed: usize,
}

impl Reproduction {
    fn new() -> Self {
        Reproduction { table: Table::new(&["quantity", "reference", "computed", "tolerance", "status"]), failed: 0 }
    }

    fn check(&mut self, quantity: &str, reference: f64, computed: f64, tol: f64) {
        self.record(quantity, num(reference), computed, tol, (computed - reference).abs() <= tol);
    }

    fn record(&mut self, quantity: &str, reference: String, computed: f64, tol: f64, ok: bool) {
        if !ok {
            self.failed += 1;
        }
        self.table.push(vec![quantity.into(), reference, num(computed), num(tol), if ok { "PASS" } else { "FAIL" }.into()]);
    }
}

pub const REPRODUCTIONS: [&str; 4] = ["bernoulli-example", "uniform-example", "counterexample", "sandwich"];

pub fn reproduce(name: &str) -> Result<Table, CliError> {
    let mut r = Reproduction::new();
    match name {
        "bernoulli-example" => {
            let g = Dist::two_point(0.0, 0.5, 1.0)?;
            r.check("guarantee at p=1", 0.813, robust_auction::revenue::unknown_n_bound(1.0, &g), 1e-3);
        }
        "uniform-example" => {
            let u = optimal_unknown_n_reserve(&Dist::uniform(0.0, 1.0)?);
            r.check("z_star", 0.198, u.z_star, 2e-3);
            r.check("reserve", 0.519, u.reserve, 2e-3);
            r.check("guarantee", 0.531, u.guarantee, 2e-3);
        }
        "counterexample" => {
            let c = counterexample_certificate(0.8)?;
            r.check("opt three i.i.d. bidders", 1.36, c.opt_disc, 1e-9);
            r.check("opt two bidders plus dummy", 1.0 + 0.104f64.sqrt(), c.opt_construction, 1e-9);
            r.check("second-highest CDF gap", 0.0, c.second_stat_max_diff, 1e-12);
            r.record("revenue gap", "> 0.03".into(), c.gap, 0.0, c.gap > 0.03);
            r.check("regime threshold", 0.673, c.regime_threshold, 1e-3);
        }
        "sandwich" => {
            // Second-highest of three bidders on {1 w.p. 0.8, 2}; the
            // consistent marginal is that two-point distribution itself.
            let q: f64 = 0.8;
            let g = Dist::two_point(1.0, 3.0 * q * q - 2.0 * q.powi(3), 2.0)?;
            let s = robust_sandwich(&AmbiguitySpec::new(3, 2, g)?)?;
            r.check("upper (Myerson on consistent marginal)", 1.36, s.upper, 1e-9);
            r.check("lower (robust SPA)", 2.0 - (3.0 * q * q - 2.0 * q.powi(3)), s.lower, 1e-9);
            r.record("lower / upper", ">= 0.5".into(), s.lower / s.upper, 0.0, s.lower / s.upper >= 0.5);
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown reproduction `{other}`; choose one of {}",
                REPRODUCTIONS.join(", ")
            )))
        }
    }
    if r.failed > 0 {
        return Err(CliError::Check { table: r.table, failed: r.failed });
    }
    Ok(r.table)
}
