use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Continuous,
    Categorical,
    Binary,
}

/// Variable role: outcome, patient trait, hospital process, image, or
/// bookkeeping metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Group {
    Outcome,
    Pt,
    Hp,
    Img,
    Meta,
}

impl Group {
    pub fn is_covariate(self) -> bool {
        matches!(self, Group::Pt | Group::Hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: Kind,
    pub group: Group,
    #[serde(default)]
    pub unit: String,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: Kind, group: Group) -> Self {
        Self {
            name: name.into(),
            kind,
            group,
            unit: String::new(),
        }
    }
}

fn default_id_column() -> String {
    "id".into()
}

fn default_patient_column() -> String {
    "patient_id".into()
}

fn default_feature_prefix() -> String {
    "f".into()
}

/// Column layout of a table: which column holds the row identifier, which
/// holds the patient identifier, and how each variable is typed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default = "default_patient_column")]
    pub patient_column: String,
    /// Feature columns are named `{prefix}0 .. {prefix}{D-1}`.
    #[serde(default = "default_feature_prefix")]
    pub feature_prefix: String,
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema {
            id_column: default_id_column(),
            patient_column: default_patient_column(),
            feature_prefix: default_feature_prefix(),
            variables,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.variables {
            if v.name.is_empty() {
                return Err(Error::Schema("empty variable name".into()));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
            if v.name == self.id_column || v.name == self.patient_column {
                return Err(Error::Schema(format!(
                    "variable `{}` collides with an identifier column",
                    v.name
                )));
            }
        }
        let outcomes: Vec<_> = self.variables.iter().filter(|v| v.group == Group::Outcome).collect();
        match outcomes.as_slice() {
            [one] if one.kind == Kind::Binary => Ok(()),
            [one] => Err(Error::Schema(format!("outcome `{}` must be binary", one.name))),
            _ => Err(Error::Schema(format!(
                "expected exactly one OUTCOME variable, found {}",
                outcomes.len()
            ))),
        }
    }

    pub fn outcome(&self) -> &VariableSpec {
        self.variables
            .iter()
            .find(|v| v.group == Group::Outcome)
            .expect("validated schema has an outcome")
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml() {
        let s = Schema::from_toml_str(
            r#"
            id_column = "row"
            [[variables]]
            name = "fracture"
            kind = "binary"
            group = "OUTCOME"
            [[variables]]
            name = "bmi"
            kind = "continuous"
            group = "PT"
            unit = "kg/m2"
            "#,
        )
        .unwrap();
        assert_eq!(s.id_column, "row");
        assert_eq!(s.patient_column, "patient_id");
        assert_eq!(s.outcome().name, "fracture");
        assert_eq!(s.get("bmi").unwrap().unit, "kg/m2");
    }

    #[test]
    fn rejects_two_outcomes_and_duplicates() {
        let two = Schema::new(vec![
            VariableSpec::new("y", Kind::Binary, Group::Outcome),
            VariableSpec::new("z", Kind::Binary, Group::Outcome),
        ]);
        assert!(two.is_err());
        let dup = Schema::new(vec![
            VariableSpec::new("y", Kind::Binary, Group::Outcome),
            VariableSpec::new("a", Kind::Continuous, Group::Pt),
            VariableSpec::new("a", Kind::Continuous, Group::Hp),
        ]);
        assert!(dup.is_err());
        let nonbinary = Schema::new(vec![VariableSpec::new("y", Kind::Continuous, Group::Outcome)]);
        assert!(nonbinary.is_err());
    }
}
