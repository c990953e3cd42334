//! Tabular data with typed columns, optional feature embeddings, and the
//! cleaning steps applied before modeling: value filters, binarization,
//! imputation and patient-level partitioning.

mod encode;
mod impute;
mod io;
mod partition;
mod schema;
mod transform;

use std::collections::BTreeSet;

use nalgebra::DMatrix;

pub use encode::CovariateEncoder;
pub use impute::{impute, Imputed, MISSING_LEVEL};
pub use io::{load_table, write_table, IngestWarning, LoadOptions, Loaded};
pub use partition::{partition_by_patient, Partition};
pub use schema::{Group, Kind, Schema, VariableSpec};
pub use transform::{
    apply_filters, binarize, default_binarization_rules, BinarizationMethod, BinarizationRule, FilterRule,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    /// Continuous and binary (0/1) variables.
    Numeric(Vec<Option<f64>>),
    /// Categorical levels.
    Levels(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Levels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Levels(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    fn subset(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Levels(v) => ColumnData::Levels(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub spec: VariableSpec,
    pub data: ColumnData,
}

impl Column {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn numeric(&self) -> Result<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Levels(_) => Err(Error::InvalidArgument(format!(
                "variable `{}` is categorical, expected numeric",
                self.spec.name
            ))),
        }
    }

    pub fn levels(&self) -> Result<&[Option<String>]> {
        match &self.data {
            ColumnData::Levels(v) => Ok(v),
            ColumnData::Numeric(_) => Err(Error::InvalidArgument(format!(
                "variable `{}` is numeric, expected categorical",
                self.spec.name
            ))),
        }
    }

    /// Binary column as booleans; `None` where missing.
    pub fn flags(&self) -> Result<Vec<Option<bool>>> {
        let values = self.numeric()?;
        values
            .iter()
            .map(|v| match v {
                None => Ok(None),
                Some(x) if *x == 0.0 => Ok(Some(false)),
                Some(x) if *x == 1.0 => Ok(Some(true)),
                Some(x) => Err(Error::Data(format!(
                    "variable `{}` holds non-binary value {x}",
                    self.spec.name
                ))),
            })
            .collect()
    }
}

/// An immutable table of samples. Every operation returns a new dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id_column: String,
    patient_column: String,
    columns: Vec<Column>,
    row_ids: Vec<String>,
    patient_ids: Vec<String>,
    features: Option<DMatrix<f64>>,
}

impl Dataset {
    pub fn new(
        schema: &Schema,
        columns: Vec<ColumnData>,
        row_ids: Vec<String>,
        patient_ids: Vec<String>,
        features: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        schema.validate()?;
        if columns.len() != schema.variables.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.variables.len(),
                found: columns.len(),
            });
        }
        let n = row_ids.len();
        if patient_ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: patient_ids.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate row identifier `{id}`")));
            }
        }
        let columns: Vec<Column> = schema
            .variables
            .iter()
            .cloned()
            .zip(columns)
            .map(|(spec, data)| Column { spec, data })
            .collect();
        for c in &columns {
            if c.data.len() != n {
                return Err(Error::Data(format!(
                    "column `{}` has {} values for {} rows",
                    c.name(),
                    c.data.len(),
                    n
                )));
            }
            let numeric = matches!(c.data, ColumnData::Numeric(_));
            let expect_numeric = c.spec.kind != Kind::Categorical;
            if numeric != expect_numeric {
                return Err(Error::Data(format!(
                    "column `{}` storage does not match its kind",
                    c.name()
                )));
            }
        }
        if let Some(f) = &features {
            if f.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.nrows(),
                });
            }
        }
        Ok(Dataset {
            id_column: schema.id_column.clone(),
            patient_column: schema.patient_column.clone(),
            columns,
            row_ids,
            patient_ids,
            features,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    /// Current schema; kinds reflect any binarization or imputation applied.
    pub fn schema(&self) -> Schema {
        Schema {
            id_column: self.id_column.clone(),
            patient_column: self.patient_column.clone(),
            feature_prefix: "f".into(),
            variables: self.columns.iter().map(|c| c.spec.clone()).collect(),
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.spec.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub(crate) fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.spec.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn features(&self) -> Option<&DMatrix<f64>> {
        self.features.as_ref()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.ncols())
    }

    pub fn outcome_column(&self) -> &Column {
        self.columns
            .iter()
            .find(|c| c.spec.group == Group::Outcome)
            .expect("dataset has an outcome")
    }

    /// Outcome per row; `None` where missing.
    pub fn outcome(&self) -> Vec<Option<bool>> {
        self.outcome_column().flags().expect("outcome column is binary")
    }

    pub fn is_missing(&self, row: usize, column: usize) -> bool {
        self.columns[column].data.is_missing(row)
    }

    /// Per-row, per-column missingness, in schema column order.
    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        (0..self.n_rows())
            .map(|r| self.columns.iter().map(|c| c.data.is_missing(r)).collect())
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.columns.iter().map(|c| c.data.missing_count()).sum()
    }

    /// Names of variables in the given groups, in schema order.
    pub fn names_in(&self, groups: &[Group]) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| groups.contains(&c.spec.group))
            .map(|c| c.spec.name.clone())
            .collect()
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            id_column: self.id_column.clone(),
            patient_column: self.patient_column.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    spec: c.spec.clone(),
                    data: c.data.subset(rows),
                })
                .collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            patient_ids: rows.iter().map(|&r| self.patient_ids[r].clone()).collect(),
            features: self
                .features
                .as_ref()
                .map(|f| DMatrix::from_fn(rows.len(), f.ncols(), |i, j| f[(rows[i], j)])),
        }
    }

    /// Copy with one column replaced.
    pub(crate) fn with_column(&self, index: usize, column: Column) -> Dataset {
        let mut out = self.clone();
        out.columns[index] = column;
        out
    }

    pub fn with_features(&self, features: Option<DMatrix<f64>>) -> Result<Dataset> {
        if let Some(f) = &features {
            if f.nrows() != self.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_rows(),
                    found: f.nrows(),
                });
            }
        }
        let mut out = self.clone();
        out.features = features;
        Ok(out)
    }
}
