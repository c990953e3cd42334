use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{ColumnData, Dataset, Kind, Schema};
use crate::error::{Error, Result};
use crate::serde_float;

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Companion feature file keyed by row identifier. When absent, feature
    /// columns are read from the main table if present.
    pub features_path: Option<PathBuf>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            features_path: None,
        }
    }
}

/// A cell that could not be parsed for its column's kind and was set missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub row: usize,
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub warnings: Vec<IngestWarning>,
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

fn reader(path: &Path, delimiter: u8) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

/// Feature column positions named `{prefix}0..{prefix}{D-1}`, in index order.
fn feature_columns(headers: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut found: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, h)| {
            let rest = h.strip_prefix(prefix)?;
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            rest.parse::<usize>().ok().map(|idx| (idx, pos))
        })
        .collect();
    found.sort_unstable();
    // Only a contiguous run starting at 0 counts as an embedding.
    let contiguous = found.iter().enumerate().take_while(|(i, (idx, _))| i == idx).count();
    found.truncate(contiguous);
    found.into_iter().map(|(_, pos)| pos).collect()
}

fn parse_feature(path: &Path, row: usize, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
        Error::Data(format!(
            "{}: feature value `{raw}` on data row {} is not a finite number",
            path.display(),
            row + 1
        ))
    })
}

/// Reads a delimited table with a header row.
///
/// Empty cells and the literal `NA` are missing. Cells that cannot be parsed
/// for their variable's kind are set missing and reported as warnings.
pub fn load_table(path: &Path, schema: &Schema, options: &LoadOptions) -> Result<Loaded> {
    schema.validate()?;
    let mut rdr = reader(path, options.delimiter)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);

    let mut missing_headers = Vec::new();
    let id_pos = position(&schema.id_column);
    let patient_pos = position(&schema.patient_column);
    if id_pos.is_none() {
        missing_headers.push(schema.id_column.clone());
    }
    if patient_pos.is_none() {
        missing_headers.push(schema.patient_column.clone());
    }
    let var_pos: Vec<Option<usize>> = schema.variables.iter().map(|v| position(&v.name)).collect();
    for (v, p) in schema.variables.iter().zip(&var_pos) {
        if p.is_none() {
            missing_headers.push(v.name.clone());
        }
    }
    if !missing_headers.is_empty() {
        return Err(Error::Data(format!(
            "{}: header lacks columns {:?}",
            path.display(),
            missing_headers
        )));
    }
    let (id_pos, patient_pos) = (id_pos.unwrap(), patient_pos.unwrap());
    let var_pos: Vec<usize> = var_pos.into_iter().map(Option::unwrap).collect();
    let inline_features = if options.features_path.is_none() {
        feature_columns(&headers, &schema.feature_prefix)
    } else {
        Vec::new()
    };

    let mut columns: Vec<ColumnData> = schema
        .variables
        .iter()
        .map(|v| match v.kind {
            Kind::Categorical => ColumnData::Levels(Vec::new()),
            _ => ColumnData::Numeric(Vec::new()),
        })
        .collect();
    let mut row_ids = Vec::new();
    let mut patient_ids = Vec::new();
    let mut feature_values = Vec::new();
    let mut warnings = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        row_ids.push(record[id_pos].trim().to_string());
        patient_ids.push(record[patient_pos].trim().to_string());
        for ((spec, &pos), column) in schema.variables.iter().zip(&var_pos).zip(columns.iter_mut()) {
            let raw = record[pos].trim();
            let mut warn = || {
                warnings.push(IngestWarning {
                    row,
                    column: spec.name.clone(),
                    value: raw.to_string(),
                })
            };
            match column {
                ColumnData::Levels(values) => {
                    values.push((!is_missing_token(raw)).then(|| raw.to_string()));
                }
                ColumnData::Numeric(values) => {
                    if is_missing_token(raw) {
                        values.push(None);
                        continue;
                    }
                    let parsed = raw.parse::<f64>().ok().filter(|v| v.is_finite());
                    let parsed = match (spec.kind, parsed) {
                        (Kind::Binary, Some(v)) if v == 0.0 || v == 1.0 => Some(v),
                        (Kind::Binary, _) => None,
                        (_, p) => p,
                    };
                    if parsed.is_none() {
                        warn();
                    }
                    values.push(parsed);
                }
            }
        }
        for &pos in &inline_features {
            feature_values.push(parse_feature(path, row, &record[pos])?);
        }
    }

    let n = row_ids.len();
    let features = if let Some(fpath) = &options.features_path {
        Some(load_companion_features(fpath, schema, options.delimiter, &row_ids)?)
    } else if !inline_features.is_empty() {
        Some(DMatrix::from_row_slice(n, inline_features.len(), &feature_values))
    } else {
        None
    };

    let dataset = Dataset::new(schema, columns, row_ids, patient_ids, features)?;
    if !warnings.is_empty() {
        log::warn!("{}: {} unparseable cells set missing", path.display(), warnings.len());
    }
    Ok(Loaded { dataset, warnings })
}

fn load_companion_features(path: &Path, schema: &Schema, delimiter: u8, row_ids: &[String]) -> Result<DMatrix<f64>> {
    let mut rdr = reader(path, delimiter)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let id_pos = headers
        .iter()
        .position(|h| h == schema.id_column)
        .ok_or_else(|| Error::Data(format!("{}: no `{}` column", path.display(), schema.id_column)))?;
    let cols = feature_columns(&headers, &schema.feature_prefix);
    if cols.is_empty() {
        return Err(Error::Data(format!("{}: no feature columns", path.display())));
    }
    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let values = cols
            .iter()
            .map(|&p| parse_feature(path, row, &record[p]))
            .collect::<Result<Vec<f64>>>()?;
        let id = record[id_pos].trim().to_string();
        if by_id.insert(id.clone(), values).is_some() {
            return Err(Error::Data(format!(
                "{}: duplicate row identifier `{id}`",
                path.display()
            )));
        }
    }
    let d = cols.len();
    let mut flat = Vec::with_capacity(row_ids.len() * d);
    for id in row_ids {
        let v = by_id
            .get(id)
            .ok_or_else(|| Error::Data(format!("{}: no features for row `{id}`", path.display())))?;
        flat.extend_from_slice(v);
    }
    Ok(DMatrix::from_row_slice(row_ids.len(), d, &flat))
}

/// Writes the dataset in the format [`load_table`] reads, with features
/// inline as `f0..f{D-1}`.
pub fn write_table(ds: &Dataset, path: &Path, delimiter: u8) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let schema = ds.schema();
    let mut header = vec![schema.id_column.clone(), schema.patient_column.clone()];
    header.extend(schema.variables.iter().map(|v| v.name.clone()));
    let d = ds.feature_dim().unwrap_or(0);
    header.extend((0..d).map(|j| format!("f{j}")));
    wtr.write_record(&header).map_err(|e| csv_err(path, e))?;

    for r in 0..ds.n_rows() {
        let mut rec = vec![ds.row_ids()[r].clone(), ds.patient_ids()[r].clone()];
        for c in ds.columns() {
            rec.push(match &c.data {
                ColumnData::Numeric(v) => v[r].map_or_else(|| "NA".to_string(), serde_float::format),
                ColumnData::Levels(v) => v[r].clone().unwrap_or_else(|| "NA".to_string()),
            });
        }
        if let Some(f) = ds.features() {
            rec.extend((0..d).map(|j| serde_float::format(f[(r, j)])));
        }
        wtr.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}
