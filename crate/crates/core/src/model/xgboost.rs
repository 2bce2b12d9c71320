//! Importer for XGBoost JSON tree dumps (`dump_model(..., dump_format="json",
//! with_stats=True)`).
//!
//! XGBoost routes `value < split_condition` to `yes`, so `yes` becomes the left
//! child and `missing` selects the default side.

use std::collections::HashMap;

use serde_json::{Map, Value};

use super::{ModelError, NodeSpec, Side, Tree, TreeEnsemble};

#[derive(Debug, Clone, Default)]
pub struct XgboostImportOptions {
    /// Overrides the feature count; defaults to the largest split index + 1.
    pub num_features: Option<usize>,
    pub base_score: f64,
    /// Explicit split-name → feature-index map. Without one, names of the form
    /// `f<index>` or bare integers are accepted.
    pub feature_names: Option<HashMap<String, usize>>,
}

pub fn import_xgboost_dump(
    dump: &str,
    options: &XgboostImportOptions,
) -> Result<TreeEnsemble, ModelError> {
    Ok(import_xgboost_dump_groups(dump, options, 1)?.remove(0))
}

/// Splits a multi-output dump into one ensemble per output group. XGBoost
/// interleaves groups, so tree `t` belongs to group `t % num_groups`; every
/// group receives the base score.
pub fn import_xgboost_dump_groups(
    dump: &str,
    options: &XgboostImportOptions,
    num_groups: usize,
) -> Result<Vec<TreeEnsemble>, ModelError> {
    if num_groups == 0 {
        return Err(ModelError::Syntax("number of output groups must be at least 1".into()));
    }
    let root: Value = serde_json::from_str(dump).map_err(|e| ModelError::Syntax(e.to_string()))?;
    let entries = root
        .as_array()
        .ok_or_else(|| ModelError::Syntax("expected a JSON array of trees".into()))?;

    let mut tree_specs = Vec::with_capacity(entries.len());
    for (t, entry) in entries.iter().enumerate() {
        // `Booster.get_dump` yields one JSON string per tree.
        let parsed;
        let tree_value = match entry {
            Value::String(text) => {
                parsed = serde_json::from_str::<Value>(text)
                    .map_err(|e| ModelError::Syntax(format!("tree {t}: {e}")))?;
                &parsed
            }
            other => other,
        };
        tree_specs.push(flatten_tree(t, tree_value, options)?);
    }

    let num_features = options.num_features.unwrap_or_else(|| {
        tree_specs
            .iter()
            .flatten()
            .filter_map(|n| n.feature)
            .max()
            .map_or(1, |m| m + 1)
    });
    if tree_specs.len() % num_groups != 0 {
        return Err(ModelError::Syntax(format!(
            "{} trees cannot be split evenly into {num_groups} output groups",
            tree_specs.len()
        )));
    }
    let mut groups: Vec<Vec<Tree>> = vec![Vec::new(); num_groups];
    for (t, specs) in tree_specs.iter().enumerate() {
        groups[t % num_groups].push(Tree::from_specs(t, specs, num_features)?);
    }
    groups
        .into_iter()
        .map(|trees| TreeEnsemble::new(trees, num_features, options.base_score))
        .collect()
}

fn flatten_tree(
    tree: usize,
    root: &Value,
    options: &XgboostImportOptions,
) -> Result<Vec<NodeSpec>, ModelError> {
    let mut specs = Vec::new();
    let mut stack = vec![root];
    while let Some(value) = stack.pop() {
        let obj = value
            .as_object()
            .ok_or_else(|| ModelError::Syntax(format!("tree {tree}: node is not an object")))?;
        let id = get_usize(obj, "nodeid").ok_or_else(|| ModelError::Schema {
            tree,
            node: 0,
            message: "node without integer `nodeid`".into(),
        })?;
        let schema = |message: String| ModelError::Schema { tree, node: id, message };
        let cover = obj.get("cover").and_then(Value::as_f64).ok_or_else(|| {
            schema("missing `cover`; re-dump the model with with_stats=True".into())
        })?;

        if let Some(leaf) = obj.get("leaf") {
            let value = leaf.as_f64().ok_or_else(|| schema("`leaf` is not a number".into()))?;
            specs.push(NodeSpec::leaf(id, cover, value));
            continue;
        }

        let categorical = obj.contains_key("categories")
            || obj.get("split_type").and_then(Value::as_str) == Some("categorical")
            || obj.get("split_condition").is_some_and(Value::is_array);
        if categorical {
            return Err(ModelError::CategoricalSplit { tree, node: id });
        }

        let feature = match obj.get("split") {
            Some(Value::String(name)) => resolve_feature(name, options)
                .ok_or_else(|| schema(format!("unknown feature name `{name}`")))?,
            Some(Value::Number(n)) => n
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| schema("`split` is not a feature index".into()))?,
            _ => return Err(schema("missing `split`".into())),
        };
        let threshold = obj
            .get("split_condition")
            .and_then(Value::as_f64)
            .ok_or_else(|| schema("missing numeric `split_condition`".into()))?;
        let yes = get_usize(obj, "yes").ok_or_else(|| schema("missing `yes`".into()))?;
        let no = get_usize(obj, "no").ok_or_else(|| schema("missing `no`".into()))?;
        let missing = get_usize(obj, "missing").ok_or_else(|| schema("missing `missing`".into()))?;
        let default_side = if missing == yes {
            Side::Left
        } else if missing == no {
            Side::Right
        } else {
            return Err(schema(format!("`missing` = {missing} matches neither child")));
        };
        specs.push(NodeSpec::split(id, feature, threshold, default_side, yes, no, cover));

        if let Some(children) = obj.get("children").and_then(Value::as_array) {
            stack.extend(children.iter().rev());
        } else {
            return Err(schema("internal node without `children`".into()));
        }
    }
    Ok(specs)
}

fn get_usize(obj: &Map<String, Value>, key: &str) -> Option<usize> {
    obj.get(key).and_then(Value::as_u64).map(|v| v as usize)
}

fn resolve_feature(name: &str, options: &XgboostImportOptions) -> Option<usize> {
    if let Some(map) = &options.feature_names {
        return map.get(name).copied();
    }
    name.strip_prefix('f').unwrap_or(name).parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{emit_canonical, parse_canonical};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DUMP: &str = r#"[
      { "nodeid": 0, "depth": 0, "split": "f1", "split_condition": 0.5, "yes": 1, "no": 2, "missing": 2,
        "gain": 3.2, "cover": 100,
        "children": [
          { "nodeid": 1, "depth": 1, "split": "f0", "split_condition": -1.25, "yes": 3, "no": 4, "missing": 3,
            "gain": 1.0, "cover": 70,
            "children": [
              { "nodeid": 3, "leaf": 0.25, "cover": 30 },
              { "nodeid": 4, "leaf": -0.5, "cover": 40 }
            ]},
          { "nodeid": 2, "leaf": 1.5, "cover": 30 }
        ]},
      { "nodeid": 0, "leaf": 0.5, "cover": 100 }
    ]"#;

    #[test]
    fn imports_nested_dump() {
        let opts = XgboostImportOptions { base_score: 0.1, ..Default::default() };
        let ens = import_xgboost_dump(DUMP, &opts).unwrap();
        assert_eq!(ens.num_features(), 2);
        assert_eq!(ens.trees().len(), 2);
        assert!((ens.predict(&[-2.0, 0.0]) - (0.1 + 0.25 + 0.5)).abs() < 1e-15);
        assert!((ens.predict(&[0.0, 0.0]) - (0.1 - 0.5 + 0.5)).abs() < 1e-15);
        assert!((ens.predict(&[0.0, f64::NAN]) - (0.1 + 1.5 + 0.5)).abs() < 1e-15);
        assert!((ens.predict(&[f64::NAN, 0.0]) - (0.1 + 0.25 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn output_groups_are_interleaved() {
        let leaf = |v: f64| format!(r#"{{"nodeid": 0, "leaf": {v}, "cover": 1.0}}"#);
        let dump = format!("[{}, {}, {}, {}]", leaf(1.0), leaf(2.0), leaf(10.0), leaf(20.0));
        let options = XgboostImportOptions { num_features: Some(2), base_score: 0.5, ..Default::default() };
        let groups = import_xgboost_dump_groups(&dump, &options, 2).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].predict(&[0.0, 0.0]), 11.5);
        assert_eq!(groups[1].predict(&[0.0, 0.0]), 22.5);
        assert!(import_xgboost_dump_groups(&dump, &options, 3).is_err());
        assert!(import_xgboost_dump_groups(&dump, &options, 0).is_err());
    }

    #[test]
    fn single_leaf_dump() {
        let ens = import_xgboost_dump(r#"[{"nodeid": 0, "leaf": 0.5, "cover": 12}]"#, &Default::default()).unwrap();
        assert_eq!(ens.predict(&[3.0]), 0.5);
    }

    #[test]
    fn get_dump_string_form() {
        let dump = r#"["{\"nodeid\": 0, \"leaf\": 0.5, \"cover\": 12}"]"#;
        let ens = import_xgboost_dump(dump, &Default::default()).unwrap();
        assert_eq!(ens.predict(&[0.0]), 0.5);
    }

    #[test]
    fn categorical_split_rejected() {
        let dump = r#"[{ "nodeid": 0, "split": "f0", "split_condition": [1, 3], "yes": 1, "no": 2,
            "missing": 1, "cover": 10, "children": [
              {"nodeid": 1, "leaf": 1, "cover": 5}, {"nodeid": 2, "leaf": 2, "cover": 5}]}]"#;
        let err = import_xgboost_dump(dump, &Default::default()).unwrap_err();
        assert!(err.to_string().contains("categorical splits unsupported"));
        let dump = dump.replace("[1, 3]", "0.5, \"categories\": [1, 3]");
        assert!(matches!(
            import_xgboost_dump(&dump, &Default::default()),
            Err(ModelError::CategoricalSplit { .. })
        ));
    }

    #[test]
    fn named_features() {
        let dump = DUMP.replace("\"f1\"", "\"age\"").replace("\"f0\"", "\"income\"");
        assert!(import_xgboost_dump(&dump, &Default::default()).is_err());
        let names = HashMap::from([("income".to_string(), 0), ("age".to_string(), 1)]);
        let opts = XgboostImportOptions { feature_names: Some(names), ..Default::default() };
        let ens = import_xgboost_dump(&dump, &opts).unwrap();
        assert_eq!(ens.predict(&[-2.0, 0.0]), 0.75);
    }

    #[test]
    fn missing_cover_is_reported() {
        let err = import_xgboost_dump(r#"[{"nodeid": 0, "leaf": 0.5}]"#, &Default::default()).unwrap_err();
        assert!(err.to_string().contains("with_stats"));
    }

    #[test]
    fn canonical_round_trip_preserves_predictions() {
        let ens = import_xgboost_dump(DUMP, &XgboostImportOptions { base_score: -0.3, ..Default::default() }).unwrap();
        let reparsed = parse_canonical(&emit_canonical(&ens)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let sample: Vec<f64> = (0..2)
                .map(|_| if rng.gen_bool(0.1) { f64::NAN } else { rng.gen_range(-3.0..3.0) })
                .collect();
            assert_eq!(ens.predict(&sample), reparsed.predict(&sample));
        }
    }
}
