use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use phonospace::dataset::LabelKind;
use phonospace::geometry::CrvPair;
use phonospace::report::RunConfig;
use serde::Deserialize;

use crate::AnalysisArgs;

/// Flat key/value settings file; every key mirrors a command-line flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub datasets: Option<Vec<PathBuf>>,
    pub probe_types: Option<Vec<String>>,
    pub layers: Option<Vec<u32>>,
    pub pairs: Option<Vec<String>>,
    pub k_phone: Option<usize>,
    pub k_speaker: Option<usize>,
    pub k_tone: Option<usize>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub replacement: Option<bool>,
    pub speaker_disjoint: Option<bool>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub planted: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn parse_kind(s: &str) -> anyhow::Result<LabelKind> {
    s.trim().parse().map_err(anyhow::Error::msg)
}

/// `x:y` for CRV(x | y).
pub fn parse_pair(s: &str) -> anyhow::Result<CrvPair> {
    let Some((x, y)) = s.split_once(':') else {
        bail!("pair `{s}` should look like phone:speaker");
    };
    let pair = CrvPair::new(parse_kind(x)?, parse_kind(y)?);
    if pair.x == pair.y {
        bail!("pair `{s}` compares a factor with itself");
    }
    Ok(pair)
}

fn split_list(values: &[String]) -> Vec<String> {
    values
        .iter()
        .flat_map(|v| v.split(','))
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect()
}

/// Merges file settings with flags; flags win.
pub fn run_config(file: &FileConfig, args: &AnalysisArgs, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.datasets = if args.datasets.is_empty() {
        file.datasets.clone().unwrap_or_default()
    } else {
        args.datasets.clone()
    };
    if cfg.datasets.is_empty() {
        bail!("no datasets given (pass paths or set `datasets` in the config file)");
    }
    if let Some(types) = args.probe_types.as_ref().or(file.probe_types.as_ref()) {
        cfg.probe_types = split_list(types).iter().map(|s| parse_kind(s)).collect::<Result<_, _>>()?;
    }
    cfg.layers = args.layers.clone().or_else(|| file.layers.clone());
    if let Some(pairs) = args.pairs.as_ref().or(file.pairs.as_ref()) {
        cfg.pairs = split_list(pairs).iter().map(|s| parse_pair(s)).collect::<Result<_, _>>()?;
    }
    let pick = |flag: Option<usize>, key: Option<usize>, default: usize| flag.or(key).unwrap_or(default);
    cfg.subspace.phone = pick(args.k_phone, file.k_phone, cfg.subspace.phone);
    cfg.subspace.speaker = pick(args.k_speaker, file.k_speaker, cfg.subspace.speaker);
    cfg.subspace.tone = pick(args.k_tone, file.k_tone, cfg.subspace.tone);
    cfg.sampling.train_size = pick(args.train_size, file.train_size, cfg.sampling.train_size);
    cfg.sampling.test_size = pick(args.test_size, file.test_size, cfg.sampling.test_size);
    cfg.sampling.replacement = args.replacement || file.replacement.unwrap_or(false);
    cfg.sampling.speaker_disjoint = args.speaker_disjoint || file.speaker_disjoint.unwrap_or(false);
    cfg.probe.learning_rate = args.learning_rate.or(file.learning_rate).unwrap_or(cfg.probe.learning_rate);
    cfg.probe.epochs = pick(args.epochs, file.epochs, cfg.probe.epochs);
    cfg.probe.batch_size = pick(args.batch_size, file.batch_size, cfg.probe.batch_size);
    cfg.seed = seed.or(file.seed).unwrap_or(0);
    Ok(cfg)
}
