//! JSON scenario files.

use crate::CliError;
use robust_auction::dist::DEFAULT_GRID;
use robust_auction::{AmbiguitySpec, Dist, DistLiteral, Mechanism, ProductDist, ReserveFamily, TieBreak};
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub g: Option<DistLiteral>,
    pub mechanism: Option<MechanismEntry>,
    /// Explicit independent bidders, for simulation.
    #[serde(default)]
    pub bidders: Vec<DistLiteral>,
    #[serde(default)]
    pub unknown_n: bool,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MechanismEntry {
    Keyword(Keyword),
    Spec(MechanismSpec),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyword {
    Optimize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    PostedPrice { price: f64 },
    Spa { reserve: f64 },
    Myerson {
        base: Option<DistLiteral>,
        #[serde(default = "lexicographic")]
        tiebreak: TieBreak,
    },
    MultiUnit { units: usize, reserve: f64 },
    Laddered { rates: Vec<f64>, reserve: f64 },
    /// Search the reserve of a family against the worst case.
    Optimize {
        #[serde(default)]
        family: FamilyName,
        units: Option<usize>,
        rates: Option<Vec<f64>>,
    },
}

fn lexicographic() -> TieBreak {
    TieBreak::Lexicographic
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    Spa,
    PostedPrice,
    MultiUnit,
    Laddered,
}

/// What the scenario asks to evaluate.
pub enum Choice {
    Fixed(Mechanism),
    Optimize(ReserveFamily),
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(DEFAULT_GRID)
    }

    pub fn g_literal(&self) -> Result<&DistLiteral, CliError> {
        self.g.as_ref().ok_or_else(|| CliError::Config("scenario needs a distribution `g`".into()))
    }

    pub fn g(&self) -> Result<Dist, CliError> {
        Ok(self.g_literal()?.to_dist(self.grid())?)
    }

    pub fn n(&self) -> Result<usize, CliError> {
        self.n.ok_or_else(|| CliError::Config("scenario needs `n`".into()))
    }

    pub fn spec(&self) -> Result<AmbiguitySpec, CliError> {
        let k = self.k.ok_or_else(|| CliError::Config("scenario needs `k`".into()))?;
        Ok(AmbiguitySpec::new(self.n()?, k, self.g()?)?)
    }

    pub fn bidders(&self) -> Result<ProductDist, CliError> {
        if self.bidders.is_empty() {
            return Err(CliError::Config("simulation needs an explicit `bidders` list".into()));
        }
        if let Some(n) = self.n {
            if n != self.bidders.len() {
                return Err(CliError::Config(format!("n = {n} but {} bidders listed", self.bidders.len())));
            }
        }
        let grid = self.grid();
        let comps = self.bidders.iter().map(|b| b.to_dist(grid)).collect::<Result<Vec<_>, _>>()?;
        Ok(ProductDist::new(comps)?)
    }

    /// Mechanism choice; a Myerson spec without a base uses `default_base`.
    pub fn choice(&self, default_base: impl FnOnce() -> Result<Dist, CliError>) -> Result<Choice, CliError> {
        let entry = self.mechanism.as_ref().ok_or_else(|| CliError::Config("scenario needs `mechanism`".into()))?;
        let spec = match entry {
            MechanismEntry::Keyword(Keyword::Optimize) => return Ok(Choice::Optimize(ReserveFamily::Spa)),
            MechanismEntry::Spec(s) => s,
        };
        Ok(match spec {
            MechanismSpec::PostedPrice { price } => Choice::Fixed(Mechanism::posted_price(*price)?),
            MechanismSpec::Spa { reserve } => Choice::Fixed(Mechanism::spa(*reserve)?),
            MechanismSpec::MultiUnit { units, reserve } => Choice::Fixed(Mechanism::multi_unit(*units, *reserve)?),
            MechanismSpec::Laddered { rates, reserve } => Choice::Fixed(Mechanism::laddered(rates.clone(), *reserve)?),
            MechanismSpec::Myerson { base, tiebreak } => {
                let base = match base {
                    Some(lit) => lit.to_dist(self.grid())?,
                    None => default_base()?,
                };
                Choice::Fixed(Mechanism::myerson(base, *tiebreak))
            }
            MechanismSpec::Optimize { family, units, rates } => Choice::Optimize(match family {
                FamilyName::Spa => ReserveFamily::Spa,
                FamilyName::PostedPrice => ReserveFamily::PostedPrice,
                FamilyName::MultiUnit => ReserveFamily::MultiUnit(
                    units.ok_or_else(|| CliError::Config("multi_unit family needs `units`".into()))?,
                ),
                FamilyName::Laddered => ReserveFamily::Laddered(
                    rates.clone().ok_or_else(|| CliError::Config("laddered family needs `rates`".into()))?,
                ),
            }),
        })
    }
}
