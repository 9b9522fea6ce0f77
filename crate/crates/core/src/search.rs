//! Hyperparameter grids and their exhaustive enumeration.
//!
//! Grids can be loaded from TOML with one array per hyperparameter:
//!
//! ```toml
//! conv_layers    = [1, 2, 3]
//! learning_rates = [0.01, 0.001]
//! filters        = [18]
//! filter_sizes   = [3]
//! hidden_layers  = [1, 2, 3]
//! hidden_units   = [50, 250, 500]
//! batch_sizes    = [10, 20, 30, 40]
//! # optional: explicit width tuples instead of hidden_layers x hidden_units
//! # hidden_tuples = [[250], [500, 250]]
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkConfig;

/// Printed alongside the SMALL grid so its counts are not mistaken for the
/// two-learning-rate table it is usually quoted with.
pub const SMALL_GRID_NOTE: &str = "note: the SMALL grid is usually tabulated with learning rates {1e-2, 1e-3}, \
which yields only 168 configurations; the stated totals of 252 configurations, 168 of them multi-layer, \
require three learning rates, so this preset uses {1e-2, 1e-3, 1e-4}.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "conv_layers")]
    pub conv_layer_counts: Vec<usize>,
    pub learning_rates: Vec<f64>,
    #[serde(rename = "filters")]
    pub filter_counts: Vec<usize>,
    pub filter_sizes: Vec<usize>,
    #[serde(rename = "hidden_layers", default)]
    pub hidden_layer_counts: Vec<usize>,
    #[serde(rename = "hidden_units", default)]
    pub hidden_unit_values: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    /// Explicit hidden-width tuples, used instead of the strictly decreasing
    /// combinations of `hidden_unit_values` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_tuples: Option<Vec<Vec<usize>>>,
}

pub fn preset_small() -> GridSpec {
    GridSpec {
        conv_layer_counts: vec![1, 2, 3],
        learning_rates: vec![1e-2, 1e-3, 1e-4],
        filter_counts: vec![18],
        filter_sizes: vec![3],
        hidden_layer_counts: vec![1, 2, 3],
        hidden_unit_values: vec![50, 250, 500],
        batch_sizes: vec![10, 20, 30, 40],
        hidden_tuples: None,
    }
}

pub fn preset_large() -> GridSpec {
    GridSpec {
        conv_layer_counts: vec![1, 2, 3],
        learning_rates: vec![1e-2, 1e-3, 1e-4],
        filter_counts: vec![18, 32, 48, 64],
        filter_sizes: vec![3],
        hidden_layer_counts: vec![1, 2, 3],
        hidden_unit_values: vec![50, 250, 500],
        batch_sizes: vec![20, 30, 40],
        hidden_tuples: None,
    }
}

/// All strictly decreasing tuples over `values` with lengths `1..=max_len`,
/// shorter tuples first, each length in lexicographic order of the
/// descending value list.
pub fn hidden_unit_tuples(values: &[usize], max_len: usize) -> Result<Vec<Vec<usize>>> {
    let lengths: Vec<usize> = (1..=max_len).collect();
    tuples_of_lengths(values, &lengths)
}

fn tuples_of_lengths(values: &[usize], lengths: &[usize]) -> Result<Vec<Vec<usize>>> {
    if values.is_empty() {
        return Err(Error::invalid("hidden_unit_tuples", "no unit values"));
    }
    let mut desc = values.to_vec();
    desc.sort_unstable_by(|a, b| b.cmp(a));
    if desc.windows(2).any(|w| w[0] == w[1]) || desc.contains(&0) {
        return Err(Error::invalid(
            "hidden_unit_tuples",
            "unit values must be distinct and positive",
        ));
    }
    let mut out = Vec::new();
    for &len in lengths {
        combinations(&desc, len, 0, &mut Vec::new(), &mut out);
    }
    Ok(out)
}

fn combinations(desc: &[usize], len: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == len {
        out.push(cur.clone());
        return;
    }
    for i in start..desc.len() {
        cur.push(desc[i]);
        combinations(desc, len, i + 1, cur, out);
        cur.pop();
    }
}

impl GridSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let grid: GridSpec = toml::from_str(text).map_err(|e| Error::GridFile(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::GridFile(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("grid specs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        fn distinct<T: PartialEq>(name: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::GridFile(format!("{name} is empty")));
            }
            for (i, a) in v.iter().enumerate() {
                if v[..i].contains(a) {
                    return Err(Error::GridFile(format!("{name} has duplicate values")));
                }
            }
            Ok(())
        }
        distinct("conv_layers", &self.conv_layer_counts)?;
        distinct("learning_rates", &self.learning_rates)?;
        distinct("filters", &self.filter_counts)?;
        distinct("filter_sizes", &self.filter_sizes)?;
        distinct("batch_sizes", &self.batch_sizes)?;
        match &self.hidden_tuples {
            Some(t) => distinct("hidden_tuples", t)?,
            None => {
                distinct("hidden_layers", &self.hidden_layer_counts)?;
                distinct("hidden_units", &self.hidden_unit_values)?;
            }
        }
        self.hidden_tuples()?;
        for c in self.enumerate() {
            c.validate().map_err(|e| Error::GridFile(e.to_string()))?;
        }
        Ok(())
    }

    /// Hidden-width tuples this grid ranges over.
    pub fn hidden_tuples(&self) -> Result<Vec<Vec<usize>>> {
        match &self.hidden_tuples {
            Some(t) => Ok(t.clone()),
            None => {
                let mut lengths = self.hidden_layer_counts.clone();
                lengths.sort_unstable();
                tuples_of_lengths(&self.hidden_unit_values, &lengths)
            }
        }
    }

    /// Product of the value-set sizes; always equals `enumerate().len()`.
    pub fn cardinality(&self) -> usize {
        let tuples = self.hidden_tuples().map(|t| t.len()).unwrap_or(0);
        self.conv_layer_counts.len()
            * self.learning_rates.len()
            * self.filter_counts.len()
            * self.filter_sizes.len()
            * tuples
            * self.batch_sizes.len()
    }

    /// Cartesian product in nomenclature order: conv layers, learning rate,
    /// filters, filter size, hidden tuple, batch size (last varies fastest).
    pub fn enumerate(&self) -> Vec<NetworkConfig> {
        let tuples = self.hidden_tuples().unwrap_or_default();
        let mut out = Vec::with_capacity(self.cardinality());
        for &conv_layers in &self.conv_layer_counts {
            for &learning_rate in &self.learning_rates {
                for &filters in &self.filter_counts {
                    for &filter_size in &self.filter_sizes {
                        for hidden in &tuples {
                            for &batch_size in &self.batch_sizes {
                                out.push(NetworkConfig {
                                    conv_layers,
                                    learning_rate,
                                    filters,
                                    filter_size,
                                    hidden_units: hidden.clone(),
                                    batch_size,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn contains(&self, c: &NetworkConfig) -> bool {
        self.conv_layer_counts.contains(&c.conv_layers)
            && self.learning_rates.contains(&c.learning_rate)
            && self.filter_counts.contains(&c.filters)
            && self.filter_sizes.contains(&c.filter_size)
            && self.batch_sizes.contains(&c.batch_size)
            && self
                .hidden_tuples()
                .map(|t| t.contains(&c.hidden_units))
                .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::shape_plan;
    use std::collections::HashSet;

    #[test]
    fn seven_decreasing_tuples() {
        let t = hidden_unit_tuples(&[50, 250, 500], 3).unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![500],
            vec![250],
            vec![50],
            vec![500, 250],
            vec![500, 50],
            vec![250, 50],
            vec![500, 250, 50],
        ];
        assert_eq!(t, expected);
        assert_eq!(hidden_unit_tuples(&[7], 3).unwrap().len(), 1);
        assert_eq!(hidden_unit_tuples(&[7, 9], 1).unwrap().len(), 2);
        assert!(hidden_unit_tuples(&[], 3).is_err());
    }

    #[test]
    fn tuple_count_matches_brute_force() {
        // every subset of the values, sorted descending, is one tuple
        let values = [3usize, 11, 5, 40, 2];
        for max_len in 1..=5 {
            let mut brute = HashSet::new();
            for mask in 1u32..(1 << values.len()) {
                let mut t: Vec<usize> = (0..values.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| values[i])
                    .collect();
                if t.len() <= max_len {
                    t.sort_unstable_by(|a, b| b.cmp(a));
                    brute.insert(t);
                }
            }
            let t = hidden_unit_tuples(&values, max_len).unwrap();
            assert_eq!(t.len(), brute.len());
            assert_eq!(t.iter().cloned().collect::<HashSet<_>>(), brute);
        }
    }

    #[test]
    fn large_grid_counts() {
        let g = preset_large();
        let all = g.enumerate();
        assert_eq!(all.len(), 756);
        assert_eq!(g.cardinality(), 756);
        assert_eq!(all.iter().filter(|c| c.conv_layers > 1).count(), 504);
        assert_eq!(g.filter_counts, vec![18, 32, 48, 64]);
        assert_eq!(g.batch_sizes, vec![20, 30, 40]);
    }

    #[test]
    fn small_grid_counts() {
        let g = preset_small();
        let all = g.enumerate();
        assert_eq!(all.len(), 252);
        assert_eq!(all.iter().filter(|c| c.conv_layers > 1).count(), 168);
        assert_eq!(g.batch_sizes, vec![10, 20, 30, 40]);
    }

    #[test]
    fn presets_are_feasible_and_ids_unique() {
        for g in [preset_small(), preset_large()] {
            let all = g.enumerate();
            let ids: HashSet<_> = all.iter().map(|c| c.id()).collect();
            assert_eq!(ids.len(), all.len());
            for c in &all {
                assert!(shape_plan(c).is_ok(), "{}", c.id());
                assert_eq!(&c.id().parse_config().unwrap(), c);
                assert!(g.contains(c));
            }
        }
    }

    #[test]
    fn enumeration_order_is_stable() {
        let a = preset_small().enumerate();
        let b = preset_small().enumerate();
        assert_eq!(a, b);
        assert_eq!(a[0].id().as_str(), "c1_lr0.01_f18_k3_h1_u500_b10");
        assert_eq!(a[1].batch_size, 20);
    }

    #[test]
    fn toml_round_trip_and_rejections() {
        let g = preset_large();
        let back = GridSpec::from_toml_str(&g.to_toml_string()).unwrap();
        assert_eq!(back, g);

        let text = r#"
            conv_layers = [2, 3]
            learning_rates = [0.01, 0.001]
            filters = [18]
            filter_sizes = [3]
            batch_sizes = [30]
            hidden_tuples = [[250], [500, 250], [500, 250, 50]]
        "#;
        let mini = GridSpec::from_toml_str(text).unwrap();
        assert_eq!(mini.enumerate().len(), 12);

        let unknown = format!("{text}\nmomentum = [0.9]\n");
        assert!(GridSpec::from_toml_str(&unknown).is_err());
        let empty = text.replace("filters = [18]", "filters = []");
        assert!(GridSpec::from_toml_str(&empty).is_err());
        let bad_tuple = text.replace("[500, 250, 50]", "[50, 250]");
        assert!(GridSpec::from_toml_str(&bad_tuple).is_err());
    }
}
