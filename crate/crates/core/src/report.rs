//! Whole-dataset analyses producing the long-format result tables.
//!
//! Each `*_table` function runs one analysis over every configured dataset
//! and returns a [`Table`]; [`Table::to_csv`] renders it with a provenance
//! comment line. Rows come out in configuration order (dataset, then probe
//! type or pair, then layer) regardless of how work was scheduled.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::aggregation::{pooled_for_kind, SamplingConfig};
use crate::dataset::{Dataset, DatasetError, LabelFilter, LabelKind, SyllableRole};
use crate::geometry::{class_centroids_present, crv_sweep, CrvPair, SubspaceSizes, ALL_PAIRS};
use crate::infostats::{adjusted_mi, build_contingency, magnitude_stats, InfoError};
use crate::probing::{layer_sweep, ProbeConfig};
use crate::{Error, Result, VERSION};

pub const TOOL_NAME: &str = "phonospace";

/// Everything that determines the contents of the result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Manifest paths (or dataset directories).
    pub datasets: Vec<PathBuf>,
    pub probe_types: Vec<LabelKind>,
    /// All dataset layers when absent.
    pub layers: Option<Vec<u32>>,
    pub pairs: Vec<CrvPair>,
    pub subspace: SubspaceSizes,
    pub sampling: SamplingConfig,
    pub probe: ProbeConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            probe_types: vec![LabelKind::Phone, LabelKind::Tone, LabelKind::Speaker],
            layers: None,
            pairs: ALL_PAIRS.to_vec(),
            subspace: SubspaceSizes::default(),
            sampling: SamplingConfig::default(),
            probe: ProbeConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn provenance(&self) -> String {
        format!("# {TOOL_NAME} {VERSION} config={} seed={}", self.hash(), self.seed)
    }
}

/// Opens a dataset from a manifest path or a directory holding `manifest.json`.
pub fn open_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    if path.is_dir() {
        Dataset::open(&path.join(crate::dataset::MANIFEST_FILE))
    } else {
        Dataset::open(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Self {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = format!("{provenance}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub const PROBE_COLUMNS: &[&str] = &[
    "model_id", "test_set", "probe_type", "layer", "accuracy", "ci95", "n_test", "train_acc_final",
];
pub const GEOMETRY_COLUMNS: &[&str] = &["model_id", "test_set", "pair_x", "pair_y", "layer", "crv", "k_x", "k_y"];
pub const AMI_COLUMNS: &[&str] = &["language", "syllable_role", "mi", "emi", "h_row", "h_col", "ami"];
pub const MAGNITUDE_COLUMNS: &[&str] = &[
    "model_id", "test_set", "aggregate_kind", "layer", "mu_mag", "sigma_mag", "mag_mean",
];

fn load_all(config: &RunConfig) -> Result<Vec<Dataset>> {
    config.datasets.iter().map(|p| Ok(open_dataset(p)?)).collect()
}

fn layers_for(config: &RunConfig, dataset: &Dataset) -> Result<Vec<u32>> {
    match &config.layers {
        None => Ok(dataset.layers().to_vec()),
        Some(layers) => {
            if let Some(&l) = layers.iter().find(|l| !dataset.layers().contains(l)) {
                return Err(DatasetError::UnknownLayer(l).into());
            }
            Ok(layers.clone())
        }
    }
}

pub fn probe_table(config: &RunConfig) -> Result<Table> {
    let mut table = Table::new("probe", PROBE_COLUMNS);
    for dataset in load_all(config)? {
        let filter = LabelFilter::from_dataset(&dataset)?;
        let layers = layers_for(config, &dataset)?;
        for &kind in &config.probe_types {
            if kind == LabelKind::Tone && !dataset.has_tones() {
                warn!("{}: no tone labels, skipping tone probes", dataset.dataset_id());
                continue;
            }
            let sampling = SamplingConfig {
                seed: config.seed,
                ..config.sampling.clone()
            };
            let probe = ProbeConfig {
                seed: config.seed,
                ..config.probe.clone()
            };
            for r in layer_sweep(&dataset, &filter, kind, &layers, &sampling, &probe)? {
                table.rows.push(vec![
                    dataset.model_id().to_string(),
                    dataset.dataset_id().to_string(),
                    kind.to_string(),
                    r.layer.to_string(),
                    r.report.accuracy.to_string(),
                    r.report.ci95_halfwidth.to_string(),
                    r.report.n_test.to_string(),
                    r.train_accuracy.to_string(),
                ]);
            }
        }
    }
    Ok(table)
}

pub fn geometry_table(config: &RunConfig) -> Result<Table> {
    let mut table = Table::new("geometry", GEOMETRY_COLUMNS);
    for dataset in load_all(config)? {
        let filter = LabelFilter::from_dataset(&dataset)?;
        let layers = layers_for(config, &dataset)?;
        let pairs: Vec<CrvPair> = config
            .pairs
            .iter()
            .copied()
            .filter(|p| {
                let keep = dataset.has_tones() || !p.needs_tones();
                if !keep {
                    warn!("{}: no tone labels, skipping CRV({}|{})", dataset.dataset_id(), p.x, p.y);
                }
                keep
            })
            .collect();
        if pairs.is_empty() {
            continue;
        }
        // crv_sweep orders by layer first; the table groups by pair
        let mut by_pair: BTreeMap<usize, Vec<Vec<String>>> = BTreeMap::new();
        for r in crv_sweep(&dataset, &filter, &layers, &pairs, &config.subspace)? {
            let idx = pairs.iter().position(|p| *p == r.pair).expect("requested pair");
            by_pair.entry(idx).or_default().push(vec![
                r.model_id,
                r.test_set,
                r.pair.x.to_string(),
                r.pair.y.to_string(),
                r.layer.to_string(),
                r.value.to_string(),
                r.k_x.to_string(),
                r.k_y.to_string(),
            ]);
        }
        table.rows.extend(by_pair.into_values().flatten());
    }
    Ok(table)
}

pub fn ami_table(config: &RunConfig) -> Result<Table> {
    let mut table = Table::new("ami", AMI_COLUMNS);
    for dataset in load_all(config)? {
        if !dataset.has_tones() {
            warn!("{}: no tone labels, skipping AMI", dataset.dataset_id());
            continue;
        }
        let filter = LabelFilter::from_dataset(&dataset)?;
        for role in SyllableRole::POSITIONS {
            let contingency = match build_contingency(dataset.segments(), role, &filter) {
                Ok(t) => t,
                Err(InfoError::NoQualifyingSegments(_)) => {
                    warn!("{}: no tone-bearing {role} segments, skipping", dataset.dataset_id());
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let r = adjusted_mi(&contingency)?;
            table.rows.push(vec![
                dataset.dataset_id().to_string(),
                role.to_string(),
                r.mi.to_string(),
                r.emi.to_string(),
                r.h_row.to_string(),
                r.h_col.to_string(),
                r.ami.to_string(),
            ]);
        }
    }
    Ok(table)
}

pub fn magnitude_table(config: &RunConfig) -> Result<Table> {
    let mut table = Table::new("magnitudes", MAGNITUDE_COLUMNS);
    for dataset in load_all(config)? {
        let filter = LabelFilter::from_dataset(&dataset)?;
        let layers = layers_for(config, &dataset)?;
        for kind in [LabelKind::Phone, LabelKind::Speaker] {
            let classes = filter.retained(kind).expect("phone and speaker labels always retained");
            for &layer in &layers {
                let pooled = pooled_for_kind(&dataset, &filter, layer, kind)?;
                let centroids = class_centroids_present(&pooled, classes).map_err(Error::from)?;
                let s = magnitude_stats(&centroids.centroids)?;
                table.rows.push(vec![
                    dataset.model_id().to_string(),
                    dataset.dataset_id().to_string(),
                    kind.to_string(),
                    layer.to_string(),
                    s.mu_mag.to_string(),
                    s.sigma_mag.map(|v| v.to_string()).unwrap_or_default(),
                    s.mag_mean.to_string(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Parses a table written by [`Table::to_csv`] into its provenance line and
/// one JSON object per row; numeric cells become numbers, empty cells null.
pub fn parse_table(text: &str) -> Option<(String, Vec<Value>)> {
    let mut lines = text.lines();
    let provenance = lines.next()?.strip_prefix("# ")?.to_string();
    let columns: Vec<&str> = lines.next()?.split(',').collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let mut obj = Map::new();
            for (c, cell) in columns.iter().zip(line.split(',')) {
                obj.insert(c.to_string(), cell_value(cell));
            }
            Value::Object(obj)
        })
        .collect();
    Some((provenance, rows))
}

fn cell_value(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = cell.parse::<i64>() {
        return Value::from(i);
    }
    match cell.parse::<f64>() {
        Ok(f) if f.is_finite() => Value::from(f),
        _ => Value::from(cell),
    }
}

/// Joins the named CSV tables found in `dir` into one JSON document.
/// Missing tables are left out.
pub fn join_tables(dir: &Path, names: &[&str]) -> Result<Value> {
    let mut tables = Map::new();
    for name in names {
        let path = dir.join(format!("{name}.csv"));
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let Some((provenance, rows)) = parse_table(&text) else {
            warn!("{}: not a result table, skipping", path.display());
            continue;
        };
        let mut entry = Map::new();
        entry.insert("provenance".into(), Value::from(provenance));
        entry.insert("rows".into(), Value::Array(rows));
        tables.insert(name.to_string(), Value::Object(entry));
    }
    let mut doc = Map::new();
    doc.insert("tool".into(), Value::from(TOOL_NAME));
    doc.insert("version".into(), Value::from(VERSION));
    doc.insert("tables".into(), Value::Object(tables));
    Ok(Value::Object(doc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config_changes() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert!(b.provenance().ends_with("seed=1"));
    }

    #[test]
    fn csv_roundtrips_through_parse() {
        let mut t = Table::new("magnitudes", MAGNITUDE_COLUMNS);
        t.rows.push(vec![
            "m".into(),
            "d".into(),
            "phone".into(),
            "3".into(),
            "1.5".into(),
            String::new(),
            "0.25".into(),
        ]);
        let csv = t.to_csv("# phonospace 0 config=x seed=0");
        let (prov, rows) = parse_table(&csv).unwrap();
        assert_eq!(prov, "phonospace 0 config=x seed=0");
        assert_eq!(rows[0]["layer"], Value::from(3));
        assert_eq!(rows[0]["sigma_mag"], Value::Null);
        assert_eq!(rows[0]["mu_mag"], Value::from(1.5));
        assert_eq!(rows[0]["model_id"], Value::from("m"));
    }
}
