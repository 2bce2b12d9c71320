//! Model and dataset loading.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use treequad::model::{import_xgboost_dump_groups, parse_canonical, TreeEnsemble, XgboostImportOptions};

use crate::failure::Failure;

pub type FeatureMap = HashMap<String, usize>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn load_feature_map(path: &Path) -> Result<FeatureMap, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::input(format!("{}: expected a JSON object of name -> index: {e}", path.display())))
}

pub struct ModelSource<'a> {
    pub path: &'a Path,
    pub xgboost_dump: bool,
    pub base_score: Option<f64>,
    pub num_features: Option<usize>,
    pub num_groups: usize,
    pub group: usize,
    pub feature_map: Option<&'a FeatureMap>,
}

pub fn load_model(source: &ModelSource<'_>) -> Result<TreeEnsemble, Failure> {
    let text = read(source.path)?;
    if source.xgboost_dump {
        let options = XgboostImportOptions {
            num_features: source.num_features,
            base_score: source.base_score.unwrap_or(0.0),
            feature_names: source.feature_map.cloned(),
        };
        if source.group >= source.num_groups {
            return Err(Failure::precondition(format!(
                "group {} is out of range for {} output groups",
                source.group, source.num_groups
            )));
        }
        Ok(import_xgboost_dump_groups(&text, &options, source.num_groups)?.swap_remove(source.group))
    } else {
        Ok(parse_canonical(&text)?)
    }
}

/// Reads a headered CSV. Without a feature map the header must list exactly
/// `num_features` columns, in feature order; with one, every column name
/// must be mapped and unmapped features are missing. Empty cells are missing.
pub fn load_samples(path: &Path, num_features: usize, map: Option<&FeatureMap>) -> Result<Vec<Vec<f64>>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let columns: Vec<usize> = match map {
        None => {
            if header.len() != num_features {
                return Err(Failure::input(format!(
                    "{}: header has {} columns, model expects {num_features}",
                    path.display(),
                    header.len()
                )));
            }
            (0..num_features).collect()
        }
        Some(map) => {
            let mut seen = vec![false; num_features];
            let mut columns = Vec::with_capacity(header.len());
            for name in &header {
                let &idx = map
                    .get(name)
                    .ok_or_else(|| Failure::input(format!("column `{name}` is not in the feature map")))?;
                if idx >= num_features {
                    return Err(Failure::input(format!(
                        "column `{name}` maps to feature {idx}, model has {num_features}"
                    )));
                }
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(Failure::input(format!("feature {idx} is mapped by more than one column")));
                }
                columns.push(idx);
            }
            columns
        }
    };

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row = row + 1;
        if record.len() != header.len() {
            return Err(Failure::input(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let mut sample = vec![f64::NAN; num_features];
        for ((cell, &feature), name) in record.iter().zip(&columns).zip(&header) {
            let cell = cell.trim();
            if !cell.is_empty() {
                sample[feature] = cell
                    .parse()
                    .map_err(|_| Failure::input(format!("row {row}, column `{name}`: invalid number `{cell}`")))?;
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}
