use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Column, ColumnData, Dataset, Group, Kind};
use crate::error::{Error, Result};
use crate::stats::median;

/// Feasibility range for a numeric variable. Values outside `[min, max]`
/// are set missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub variable: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl FilterRule {
    pub fn new(variable: impl Into<String>, min: Option<f64>, max: Option<f64>) -> Self {
        Self {
            variable: variable.into(),
            min,
            max,
        }
    }

    fn admits(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

/// Returns the filtered dataset and the number of cells set missing.
pub fn apply_filters(ds: &Dataset, rules: &[FilterRule]) -> Result<(Dataset, usize)> {
    let mut out = ds.clone();
    let mut altered = 0;
    for rule in rules {
        if let (Some(lo), Some(hi)) = (rule.min, rule.max) {
            if lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "filter on `{}` has min {lo} >= max {hi}",
                    rule.variable
                )));
            }
        }
        let idx = out.column_index(&rule.variable)?;
        let col = &out.columns[idx];
        let values = col.numeric()?;
        let filtered: Vec<Option<f64>> = values
            .iter()
            .map(|v| match v {
                Some(x) if !rule.admits(*x) => {
                    altered += 1;
                    None
                }
                other => *other,
            })
            .collect();
        let column = Column {
            spec: col.spec.clone(),
            data: ColumnData::Numeric(filtered),
        };
        out = out.with_column(idx, column);
    }
    Ok((out, altered))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinarizationMethod {
    /// 1 when strictly greater than the median of observed values.
    MedianSplit,
    /// Most frequent level → 0, second → 1, all others missing.
    TopTwoLevels,
    /// Explicit mapping; unmapped levels become missing.
    LevelMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarizationRule {
    pub variable: String,
    pub method: BinarizationMethod,
    /// Level → `"0"`, `"1"` or `"NA"`.
    #[serde(default)]
    pub level_map: Option<BTreeMap<String, String>>,
}

impl BinarizationRule {
    pub fn new(variable: impl Into<String>, method: BinarizationMethod) -> Self {
        Self {
            variable: variable.into(),
            method,
            level_map: None,
        }
    }

    pub fn level_map<I, K>(variable: impl Into<String>, map: I) -> Self
    where
        I: IntoIterator<Item = (K, Option<u8>)>,
        K: Into<String>,
    {
        let map = map
            .into_iter()
            .map(|(k, v)| {
                let target = match v {
                    Some(0) => "0".to_string(),
                    Some(_) => "1".to_string(),
                    None => "NA".to_string(),
                };
                (k.into(), target)
            })
            .collect();
        Self {
            variable: variable.into(),
            method: BinarizationMethod::LevelMap,
            level_map: Some(map),
        }
    }
}

/// One rule per covariate that is not binary yet: median split for
/// continuous variables and top-two-levels for categorical ones. Explicit
/// rules in `overrides` take precedence.
pub fn default_binarization_rules(ds: &Dataset, overrides: &[BinarizationRule]) -> Vec<BinarizationRule> {
    ds.columns()
        .iter()
        .filter(|c| c.spec.group.is_covariate() || c.spec.group == Group::Meta)
        .filter_map(|c| {
            if let Some(r) = overrides.iter().find(|r| r.variable == c.spec.name) {
                return Some(r.clone());
            }
            match c.spec.kind {
                Kind::Continuous => Some(BinarizationRule::new(&c.spec.name, BinarizationMethod::MedianSplit)),
                Kind::Categorical => Some(BinarizationRule::new(&c.spec.name, BinarizationMethod::TopTwoLevels)),
                Kind::Binary => None,
            }
        })
        .collect()
}

fn distinct_observed(col: &Column) -> usize {
    match &col.data {
        ColumnData::Numeric(v) => {
            let mut xs: Vec<f64> = v.iter().flatten().copied().collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs.len()
        }
        ColumnData::Levels(v) => {
            let mut xs: Vec<&String> = v.iter().flatten().collect();
            xs.sort();
            xs.dedup();
            xs.len()
        }
    }
}

fn binarize_column(col: &Column, rule: &BinarizationRule) -> Result<Vec<Option<f64>>> {
    let name = &col.spec.name;
    if distinct_observed(col) < 2 {
        return Err(Error::DegenerateVariable(name.clone()));
    }
    match rule.method {
        BinarizationMethod::MedianSplit => {
            let values = col.numeric()?;
            let observed: Vec<f64> = values.iter().flatten().copied().collect();
            let m = median(&observed);
            Ok(values
                .iter()
                .map(|v| v.map(|x| if x > m { 1.0 } else { 0.0 }))
                .collect())
        }
        BinarizationMethod::TopTwoLevels => {
            let values = col.levels()?;
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for v in values.iter().flatten() {
                *counts.entry(v.as_str()).or_default() += 1;
            }
            let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let (first, second) = (ranked[0].0, ranked[1].0);
            Ok(values
                .iter()
                .map(|v| match v.as_deref() {
                    Some(l) if l == first => Some(0.0),
                    Some(l) if l == second => Some(1.0),
                    _ => None,
                })
                .collect())
        }
        BinarizationMethod::LevelMap => {
            let map = rule
                .level_map
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("level-map rule for `{name}` has no map")))?;
            let mut parsed = HashMap::new();
            for (k, v) in map {
                let target = match v.trim() {
                    "0" => Some(0.0),
                    "1" => Some(1.0),
                    "NA" | "missing" | "" => None,
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "level map for `{name}` sends `{k}` to `{other}`; expected 0, 1 or NA"
                        )))
                    }
                };
                parsed.insert(k.as_str(), target);
            }
            let values = col.levels()?;
            Ok(values
                .iter()
                .map(|v| v.as_deref().and_then(|l| parsed.get(l).copied().flatten()))
                .collect())
        }
    }
}

/// Recodes each rule's variable as binary {0, 1}. Missing cells stay
/// missing; top-two-levels and level maps may introduce new missing cells.
pub fn binarize(ds: &Dataset, rules: &[BinarizationRule]) -> Result<Dataset> {
    let mut out = ds.clone();
    for rule in rules {
        let idx = out.column_index(&rule.variable)?;
        let col = &out.columns[idx];
        let coded = binarize_column(col, rule)?;
        let has0 = coded.contains(&Some(0.0));
        let has1 = coded.contains(&Some(1.0));
        if !(has0 && has1) {
            return Err(Error::DegenerateVariable(rule.variable.clone()));
        }
        let mut spec = col.spec.clone();
        spec.kind = Kind::Binary;
        out = out.with_column(
            idx,
            Column {
                spec,
                data: ColumnData::Numeric(coded),
            },
        );
    }
    Ok(out)
}
