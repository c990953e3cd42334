use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::DistanceSpace;
use crate::dataset::{Dataset, Group};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchLevel {
    Random,
    Demographics,
    Pt,
    PtHp,
}

impl MatchLevel {
    pub const LADDER: [MatchLevel; 4] = [
        MatchLevel::Random,
        MatchLevel::Demographics,
        MatchLevel::Pt,
        MatchLevel::PtHp,
    ];

    /// Short cohort label, e.g. `cc-dem`.
    pub fn cohort_label(self) -> &'static str {
        match self {
            MatchLevel::Random => "cc-rnd",
            MatchLevel::Demographics => "cc-dem",
            MatchLevel::Pt => "cc-pt",
            MatchLevel::PtHp => "cc-pthp",
        }
    }
}

impl fmt::Display for MatchLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchLevel::Random => "random",
            MatchLevel::Demographics => "dem",
            MatchLevel::Pt => "pt",
            MatchLevel::PtHp => "pthp",
        })
    }
}

impl FromStr for MatchLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['+', '_', '-'], "").as_str() {
            "random" | "rnd" => Ok(MatchLevel::Random),
            "dem" | "demographics" => Ok(MatchLevel::Demographics),
            "pt" => Ok(MatchLevel::Pt),
            "pthp" => Ok(MatchLevel::PtHp),
            other => Err(Error::InvalidArgument(format!("unknown match level `{other}`"))),
        }
    }
}

pub fn default_demographics() -> Vec<String> {
    vec!["age".to_string(), "gender".to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub variables: Vec<String>,
    pub level: MatchLevel,
    pub seed: u64,
    /// Distances above this are flagged; the case is still matched.
    #[serde(default)]
    pub caliper: Option<f64>,
}

impl MatchSpec {
    /// Expands a ladder level to its variable list: demographics are the
    /// given names, PT and PT+HP take every variable of those groups.
    pub fn for_level(ds: &Dataset, level: MatchLevel, demographics: &[String], seed: u64) -> Result<Self> {
        let variables = match level {
            MatchLevel::Random => Vec::new(),
            MatchLevel::Demographics => {
                for v in demographics {
                    ds.column(v)?;
                }
                demographics.to_vec()
            }
            MatchLevel::Pt => ds.names_in(&[Group::Pt]),
            MatchLevel::PtHp => ds.names_in(&[Group::Pt, Group::Hp]),
        };
        Ok(Self {
            variables,
            level,
            seed,
            caliper: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedCohort {
    /// `(case row, control row)`, in matching order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_cases: Vec<usize>,
    /// Cases whose partner lies beyond the caliper.
    pub caliper_exceeded: Vec<usize>,
    /// Matching variables that had no spread.
    pub zero_range: Vec<String>,
    pub spec: MatchSpec,
}

impl MatchedCohort {
    /// All cohort rows, ascending.
    pub fn rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        rows.sort_unstable();
        rows
    }

    pub fn cases(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        c.sort_unstable();
        c
    }

    pub fn controls(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        c.sort_unstable();
        c
    }

    pub fn len(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn split_by_outcome(ds: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let y = ds.outcome();
    let cases = (0..ds.n_rows()).filter(|&r| y[r] == Some(true)).collect();
    let controls = (0..ds.n_rows()).filter(|&r| y[r] == Some(false)).collect();
    (cases, controls)
}

/// Pairs every case with a distinct, uniformly drawn control.
pub fn random_case_control(ds: &Dataset, seed: u64) -> Result<MatchedCohort> {
    let (cases, mut controls) = split_by_outcome(ds);
    if cases.is_empty() {
        return Err(Error::SingleClass);
    }
    if controls.len() < cases.len() {
        return Err(Error::InsufficientControls {
            cases: cases.len(),
            controls: controls.len(),
        });
    }
    controls.shuffle(&mut seed::rng(seed));
    Ok(MatchedCohort {
        pairs: cases.into_iter().zip(controls).collect(),
        unmatched_cases: Vec::new(),
        caliper_exceeded: Vec::new(),
        zero_range: Vec::new(),
        spec: MatchSpec {
            variables: Vec::new(),
            level: MatchLevel::Random,
            seed,
            caliper: None,
        },
    })
}

/// Greedy nearest-neighbour matching without replacement.
///
/// Cases are visited in a seeded random order; each takes the unused control
/// at minimum [`DistanceSpace`] distance. Distance ties go to a seeded random
/// priority over controls, so an empty variable list reproduces random
/// pairing. Cases left once controls run out are reported as unmatched.
pub fn matched_case_control(ds: &Dataset, spec: &MatchSpec) -> Result<MatchedCohort> {
    if spec.level == MatchLevel::Random && spec.variables.is_empty() && spec.caliper.is_none() {
        return random_case_control(ds, spec.seed);
    }
    let (mut cases, controls) = split_by_outcome(ds);
    if cases.is_empty() {
        return Err(Error::SingleClass);
    }
    let space = DistanceSpace::new(ds, &spec.variables)?;
    let mut rng = seed::rng(spec.seed);
    cases.shuffle(&mut rng);
    let mut priority: Vec<usize> = (0..controls.len()).collect();
    priority.shuffle(&mut rng);

    let mut used = vec![false; controls.len()];
    let mut pairs = Vec::with_capacity(cases.len());
    let mut unmatched_cases = Vec::new();
    let mut caliper_exceeded = Vec::new();
    for &case in &cases {
        let best = (0..controls.len())
            .into_par_iter()
            .filter(|&k| !used[k])
            .map(|k| (space.distance(case, controls[k]), priority[k], k))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match best {
            Some((d, _, k)) => {
                used[k] = true;
                pairs.push((case, controls[k]));
                if spec.caliper.is_some_and(|c| d > c) {
                    caliper_exceeded.push(case);
                }
            }
            None => unmatched_cases.push(case),
        }
    }
    unmatched_cases.sort_unstable();
    if !unmatched_cases.is_empty() {
        log::warn!("{} cases left unmatched: controls exhausted", unmatched_cases.len());
    }
    Ok(MatchedCohort {
        pairs,
        unmatched_cases,
        caliper_exceeded,
        zero_range: space.zero_range().to_vec(),
        spec: spec.clone(),
    })
}
