//! Synthetic datasets with planted phone/tone/speaker structure.
//!
//! A frame of layer `ℓ` with labels (phone p, tone t, speaker s) is
//!
//! ```text
//! x = snr[ℓ] · (A_p g_p + A_t g_t) + speaker_scale · A_s g_s + offset + ε
//! ```
//!
//! where the loading matrices `A_*` have orthonormal columns, the class
//! coordinates `g_*` are drawn once from a unit Gaussian, and `ε` is
//! isotropic Gaussian noise. Loadings start as disjoint blocks of a random
//! orthonormal basis; a configured overlap between two factors is produced
//! by rotating columns of one toward columns of the other within their
//! shared plane, so the recorded overlaps are exact.

mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    self, matrix_file_name, DatasetManifest, LabelFiles, LabelKind, LabelVocabulary,
    SegmentRecord, SyllableRole, UtteranceEntry, VocabEntry,
};
use crate::infostats::ContingencyTable;
use crate::matrix::{self, FrameMatrix};
use crate::seed;

pub use oracle::{oracle_report, OracleCrv, OracleReport};

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid planted config: {0}")]
    Config(String),
    #[error("infeasible alignment targets: {0}")]
    InfeasibleAlignment(String),
    #[error("target MI {target} nats exceeds the reachable maximum {max}")]
    UnreachableMi { target: f64, max: f64 },
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Target squared-cosine overlap between factor loading spans, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Alignment {
    pub phone_tone: f64,
    pub phone_speaker: f64,
    pub tone_speaker: f64,
}

/// How tones co-occur with phones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelDependence {
    /// Every (speaker, phone, tone) cell gets the same number of segments.
    Independent,
    /// Mixture of the independent joint and the mapping `tone = phone mod T`,
    /// weighted to reach the requested mutual information.
    TargetMi { nats: f64 },
    /// `tone = phone mod T`.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub dataset_id: String,
    pub model_id: String,
    pub dim: usize,
    pub layer_count: usize,
    pub frame_ms: u32,
    pub phones: usize,
    /// Zero for a corpus without tone labels.
    pub tones: usize,
    pub speakers: usize,
    pub phone_rank: usize,
    pub tone_rank: usize,
    pub speaker_rank: usize,
    pub alignment: Alignment,
    pub label_dependence: LabelDependence,
    /// Multiplier on the phone and tone components, one per layer.
    pub snr_profile: Vec<f64>,
    pub speaker_scale: f64,
    /// Norm of a constant vector added to every frame.
    pub common_offset: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Segments per (speaker, phone, tone) cell; per (speaker, phone) times
    /// the tone count when tones are drawn from a dependent distribution.
    pub segments_per_cell: usize,
    pub frames_per_segment: usize,
    pub segments_per_utterance: usize,
    /// The last `rare_phones` phones never occur with speaker 0.
    pub rare_phones: usize,
    /// Adds a non-speech phone with this many segments per speaker.
    pub silence_segments_per_speaker: usize,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            dataset_id: "planted".into(),
            model_id: "planted-model".into(),
            dim: 64,
            layer_count: 13,
            frame_ms: 20,
            phones: 12,
            tones: 4,
            speakers: 6,
            phone_rank: 11,
            tone_rank: 3,
            speaker_rank: 5,
            alignment: Alignment::default(),
            label_dependence: LabelDependence::Independent,
            snr_profile: vec![1.0; 13],
            speaker_scale: 1.0,
            common_offset: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            segments_per_cell: 2,
            frames_per_segment: 3,
            segments_per_utterance: 40,
            rare_phones: 0,
            silence_segments_per_speaker: 0,
        }
    }
}

impl PlantedConfig {
    pub fn has_tones(&self) -> bool {
        self.tones > 0
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if self.dim == 0 || self.layer_count == 0 || self.frame_ms == 0 {
            return fail("dim, layer_count and frame_ms must be positive".into());
        }
        if self.phones < 2 || self.speakers < 2 {
            return fail("need at least two phones and two speakers".into());
        }
        if self.tones == 1 {
            return fail("tones must be 0 (no tones) or at least 2".into());
        }
        if self.phone_rank == 0 || self.speaker_rank == 0 || (self.has_tones() && self.tone_rank == 0) {
            return fail("factor ranks must be positive".into());
        }
        if self.snr_profile.len() != self.layer_count {
            return fail(format!(
                "snr_profile has {} entries for {} layers",
                self.snr_profile.len(),
                self.layer_count
            ));
        }
        if self.snr_profile.iter().any(|s| !s.is_finite()) {
            return fail("snr_profile must be finite".into());
        }
        if !(self.noise_sigma >= 0.0) || !self.speaker_scale.is_finite() || !self.common_offset.is_finite() {
            return fail("noise_sigma, speaker_scale and common_offset must be finite, sigma >= 0".into());
        }
        let a = self.alignment;
        for (name, v) in [
            ("phone_tone", a.phone_tone),
            ("phone_speaker", a.phone_speaker),
            ("tone_speaker", a.tone_speaker),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("alignment {name} = {v} outside [0, 1]"));
            }
        }
        if self.segments_per_cell == 0 || self.frames_per_segment == 0 || self.segments_per_utterance == 0 {
            return fail("segment and frame counts must be positive".into());
        }
        if self.rare_phones >= self.phones {
            return fail("rare_phones must leave at least one common phone".into());
        }
        Ok(())
    }
}

/// Ground truth recorded during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub config: PlantedConfig,
    /// `d × r` loading matrices, stored as rows of length `r`.
    pub phone_loadings: Vec<Vec<f64>>,
    pub tone_loadings: Vec<Vec<f64>>,
    pub speaker_loadings: Vec<Vec<f64>>,
    /// Class coordinates in factor space, one row per class.
    pub phone_offsets: Vec<Vec<f64>>,
    pub tone_offsets: Vec<Vec<f64>>,
    pub speaker_offsets: Vec<Vec<f64>>,
    /// Realized span overlaps `‖A_xᵀ A_y‖²_F / min(r_x, r_y)`.
    pub overlaps: Alignment,
    /// `joint[t][p]`: probability of tone t with phone p (no tones: empty).
    pub joint_distribution: Vec<Vec<f64>>,
    pub rare_phones: Vec<u32>,
    pub non_speech_phone: Option<u32>,
    pub snr_profile: Vec<f64>,
    /// Segments emitted per speaker, indexed by speaker id.
    pub segments_per_speaker: Vec<usize>,
}

/// Labels and layout of a planted corpus, before any vectors are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPlan {
    pub manifest: DatasetManifest,
    pub phones: LabelVocabulary,
    pub speakers: LabelVocabulary,
    pub tones: Option<LabelVocabulary>,
    pub segments: Vec<SegmentRecord>,
    pub truth: PlantedTruth,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn random_orthonormal(d: usize, rng: &mut seed::StreamRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

fn span_overlap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0.0;
    }
    (a.transpose() * b).norm_squared() / a.ncols().min(b.ncols()) as f64
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Factor {
    Phone,
    Tone,
    Speaker,
}

/// Builds the three loading matrices with the requested overlaps.
fn build_loadings(
    config: &PlantedConfig,
    rng: &mut seed::StreamRng,
) -> Result<[DMatrix<f64>; 3], SynthError> {
    let ranks = [
        config.phone_rank,
        if config.has_tones() { config.tone_rank } else { 0 },
        config.speaker_rank,
    ];
    let needed: usize = ranks.iter().sum();
    if needed > config.dim {
        return Err(SynthError::InfeasibleAlignment(format!(
            "factor ranks {ranks:?} need {needed} orthonormal seed directions but dim is {}",
            config.dim
        )));
    }
    let q = random_orthonormal(config.dim, rng);
    let mut start = 0;
    let mut loads: Vec<DMatrix<f64>> = ranks
        .iter()
        .map(|&r| {
            let block = q.columns(start, r).into_owned();
            start += r;
            block
        })
        .collect();

    let a = config.alignment;
    let pairs = [
        (Factor::Phone, Factor::Tone, a.phone_tone),
        (Factor::Phone, Factor::Speaker, a.phone_speaker),
        (Factor::Tone, Factor::Speaker, a.tone_speaker),
    ];
    let active: Vec<_> = pairs
        .iter()
        .filter(|(x, y, c)| *c > 0.0 && ranks[*x as usize] > 0 && ranks[*y as usize] > 0)
        .copied()
        .collect();

    let mut rotated: BTreeMap<Factor, Factor> = BTreeMap::new();
    let mut used: BTreeMap<Factor, usize> = BTreeMap::new();
    for &(target, moved, _) in &active {
        if let Some(prev) = rotated.insert(moved, target) {
            return Err(SynthError::InfeasibleAlignment(format!(
                "{moved:?} would be rotated toward both {prev:?} and {target:?}"
            )));
        }
        let m = ranks[target as usize].min(ranks[moved as usize]);
        let u = used.entry(target).or_default();
        *u += m;
        if *u > ranks[target as usize] {
            return Err(SynthError::InfeasibleAlignment(format!(
                "{target:?} has rank {} but overlaps need {} of its directions",
                ranks[target as usize], u
            )));
        }
    }
    if let Some(f) = rotated.keys().find(|f| used.contains_key(f)) {
        return Err(SynthError::InfeasibleAlignment(format!(
            "{f:?} cannot both be rotated and serve as a rotation target"
        )));
    }

    let mut offset: BTreeMap<Factor, usize> = BTreeMap::new();
    for &(target, moved, c) in &active {
        let m = ranks[target as usize].min(ranks[moved as usize]);
        let base = *offset.get(&target).unwrap_or(&0);
        let (cos, sin) = (c.sqrt(), (1.0 - c).sqrt());
        for k in 0..m {
            let pivot = loads[target as usize].column(base + k).into_owned();
            let own = loads[moved as usize].column(k).into_owned();
            loads[moved as usize].set_column(k, &(pivot * cos + own * sin));
        }
        offset.insert(target, base + m);
    }
    let [p, t, s]: [DMatrix<f64>; 3] = loads.try_into().expect("three factors");
    Ok([p, t, s])
}

fn gaussian_rows(n: usize, r: usize, rng: &mut seed::StreamRng) -> DMatrix<f64> {
    DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(rng))
}

fn mixture_joint(phones: usize, tones: usize, w: f64) -> Vec<Vec<f64>> {
    let mut joint = vec![vec![0.0; phones]; tones];
    for p in 0..phones {
        for (t, row) in joint.iter_mut().enumerate() {
            let det = if t == p % tones { 1.0 } else { 0.0 };
            row[p] = ((1.0 - w) / tones as f64 + w * det) / phones as f64;
        }
    }
    joint
}

fn joint_mi(joint: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..joint[0].len()).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, r) in joint.iter().enumerate() {
        for (j, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi
}

/// Mutual information (nats) and arithmetic-mean-normalized MI of a joint
/// distribution; the latter is the large-sample limit of AMI.
pub fn joint_information(joint: &[Vec<f64>]) -> (f64, f64) {
    if joint.is_empty() {
        return (0.0, 0.0);
    }
    let mi = joint_mi(joint);
    let h = |m: Vec<f64>| -> f64 { -m.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>() };
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..joint[0].len()).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mean_h = 0.5 * (h(rows) + h(cols));
    (mi, if mean_h > 0.0 { mi / mean_h } else { 0.0 })
}

fn joint_for(config: &PlantedConfig) -> Result<Vec<Vec<f64>>, SynthError> {
    let (p, t) = (config.phones, config.tones);
    match config.label_dependence {
        LabelDependence::Independent => Ok(mixture_joint(p, t, 0.0)),
        LabelDependence::Deterministic => Ok(mixture_joint(p, t, 1.0)),
        LabelDependence::TargetMi { nats } => {
            let max = joint_mi(&mixture_joint(p, t, 1.0));
            if !(0.0..=max).contains(&nats) {
                return Err(SynthError::UnreachableMi { target: nats, max });
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if joint_mi(&mixture_joint(p, t, mid)) < nats {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(mixture_joint(p, t, 0.5 * (lo + hi)))
        }
    }
}

/// Draws labels, loadings and class offsets without writing anything.
pub fn plan_planted(config: &PlantedConfig) -> Result<PlantedPlan, SynthError> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive_seed(config.seed, &[0]));
    let [a_p, a_t, a_s] = build_loadings(config, &mut rng)?;
    let g_p = gaussian_rows(config.phones, config.phone_rank, &mut rng);
    let g_t = gaussian_rows(config.tones, if config.has_tones() { config.tone_rank } else { 0 }, &mut rng);
    let g_s = gaussian_rows(config.speakers, config.speaker_rank, &mut rng);

    let joint = if config.has_tones() { joint_for(config)? } else { Vec::new() };
    let rare: Vec<u32> = ((config.phones - config.rare_phones)..config.phones)
        .map(|p| p as u32)
        .collect();
    let silence = (config.silence_segments_per_speaker > 0).then_some(config.phones as u32);

    // (phone, tone) labels per speaker
    let mut per_speaker: Vec<Vec<(u32, Option<u32>)>> = Vec::with_capacity(config.speakers);
    for s in 0..config.speakers {
        let mut labels = Vec::new();
        for p in 0..config.phones {
            if s == 0 && rare.contains(&(p as u32)) {
                continue;
            }
            if !config.has_tones() {
                labels.extend((0..config.segments_per_cell).map(|_| (p as u32, None)));
                continue;
            }
            match config.label_dependence {
                LabelDependence::Independent => {
                    for t in 0..config.tones {
                        labels.extend((0..config.segments_per_cell).map(|_| (p as u32, Some(t as u32))));
                    }
                }
                _ => {
                    let conditional: Vec<f64> = joint.iter().map(|row| row[p] * config.phones as f64).collect();
                    for _ in 0..config.segments_per_cell * config.tones {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut tone = config.tones - 1;
                        for (t, &q) in conditional.iter().enumerate() {
                            acc += q;
                            if u < acc {
                                tone = t;
                                break;
                            }
                        }
                        labels.push((p as u32, Some(tone as u32)));
                    }
                }
            }
        }
        if let Some(sil) = silence {
            labels.extend((0..config.silence_segments_per_speaker).map(|_| (sil, None)));
        }
        seed::shuffle(&mut rng, &mut labels);
        per_speaker.push(labels);
    }

    let mut utterances = Vec::new();
    let mut segments = Vec::new();
    let fps = config.frames_per_segment;
    for (s, labels) in per_speaker.iter().enumerate() {
        for (u, chunk) in labels.chunks(config.segments_per_utterance).enumerate() {
            let utterance_id = format!("spk{s:03}_utt{u:04}");
            for (k, &(phone, tone)) in chunk.iter().enumerate() {
                let role = if Some(phone) == silence {
                    SyllableRole::None
                } else {
                    SyllableRole::POSITIONS[seed::index(&mut rng, 3)]
                };
                segments.push(SegmentRecord {
                    utterance_id: utterance_id.clone(),
                    start_frame: k * fps,
                    end_frame: (k + 1) * fps,
                    phone,
                    tone,
                    speaker: s as u32,
                    syllable_role: role,
                });
            }
            utterances.push(UtteranceEntry {
                utterance_id,
                n_frames: chunk.len() * fps,
            });
        }
    }

    let mut phone_entries: Vec<VocabEntry> = (0..config.phones)
        .map(|p| VocabEntry {
            id: p as u32,
            name: format!("ph{p:02}"),
            non_speech: false,
        })
        .collect();
    if let Some(sil) = silence {
        phone_entries.push(VocabEntry {
            id: sil,
            name: "sil".into(),
            non_speech: true,
        });
    }
    let phones = LabelVocabulary {
        kind: LabelKind::Phone,
        entries: phone_entries,
    };
    let speaker_names: Vec<String> = (0..config.speakers).map(|s| format!("spk{s:03}")).collect();
    let speakers = LabelVocabulary::from_names(LabelKind::Speaker, &speaker_names);
    let tones = config.has_tones().then(|| {
        let names: Vec<String> = (1..=config.tones).map(|t| format!("T{t}")).collect();
        LabelVocabulary::from_names(LabelKind::Tone, &names)
    });

    let manifest = DatasetManifest {
        dataset_id: config.dataset_id.clone(),
        model_id: config.model_id.clone(),
        dim: config.dim,
        frame_ms: config.frame_ms,
        layers: (0..config.layer_count as u32).collect(),
        utterances,
        label_files: LabelFiles {
            segments: "segments.tsv".into(),
            phones: "phones.json".into(),
            speakers: "speakers.json".into(),
            tones: config.has_tones().then(|| "tones.json".to_string()),
        },
    };

    let truth = PlantedTruth {
        config: config.clone(),
        overlaps: Alignment {
            phone_tone: span_overlap(&a_p, &a_t),
            phone_speaker: span_overlap(&a_p, &a_s),
            tone_speaker: span_overlap(&a_t, &a_s),
        },
        phone_loadings: to_rows(&a_p),
        tone_loadings: to_rows(&a_t),
        speaker_loadings: to_rows(&a_s),
        phone_offsets: to_rows(&g_p),
        tone_offsets: to_rows(&g_t),
        speaker_offsets: to_rows(&g_s),
        joint_distribution: joint,
        rare_phones: rare,
        non_speech_phone: silence,
        snr_profile: config.snr_profile.clone(),
        segments_per_speaker: per_speaker.iter().map(Vec::len).collect(),
    };

    Ok(PlantedPlan {
        manifest,
        phones,
        speakers,
        tones,
        segments,
        truth,
    })
}

impl PlantedPlan {
    /// Empirical tone × phone table over all segments with tones.
    pub fn tone_phone_table(&self) -> Option<ContingencyTable> {
        let t = self.tones.as_ref()?.len();
        let mut counts = vec![vec![0u64; self.phones.len()]; t];
        for s in &self.segments {
            if let Some(tone) = s.tone {
                counts[tone as usize][s.phone as usize] += 1;
            }
        }
        ContingencyTable::from_counts(counts).ok()
    }
}

/// Writes a planted dataset (manifest, sidecars, matrices, `truth.json`)
/// into `dir` and returns the truth.
pub fn generate_planted(config: &PlantedConfig, dir: &Path) -> Result<PlantedTruth, SynthError> {
    let plan = plan_planted(config)?;
    fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    dataset::write_dataset_sidecars(
        dir,
        &plan.manifest,
        &plan.phones,
        &plan.speakers,
        plan.tones.as_ref(),
        &plan.segments,
    )?;

    let truth = &plan.truth;
    let d = config.dim;
    let class_vectors = |load: &[Vec<f64>], offsets: &[Vec<f64>]| -> Vec<Vec<f64>> {
        if load.is_empty() || offsets.is_empty() {
            return Vec::new();
        }
        let a = from_rows(load);
        offsets
            .iter()
            .map(|g| (&a * nalgebra::DVector::from_column_slice(g)).iter().copied().collect())
            .collect()
    };
    let phone_vecs = class_vectors(&truth.phone_loadings, &truth.phone_offsets);
    let tone_vecs = class_vectors(&truth.tone_loadings, &truth.tone_offsets);
    let speaker_vecs = class_vectors(&truth.speaker_loadings, &truth.speaker_offsets);
    let zero = vec![0.0; d];
    let offset: Vec<f64> = if config.common_offset != 0.0 {
        let mut rng = seed::rng(seed::derive_seed(config.seed, &[2]));
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter().map(|v| v / norm * config.common_offset).collect()
    } else {
        zero.clone()
    };

    let mut by_utt: BTreeMap<&str, Vec<&SegmentRecord>> = BTreeMap::new();
    for s in &plan.segments {
        by_utt.entry(&s.utterance_id).or_default().push(s);
    }
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| SynthError::Config(e.to_string()))?;

    plan.manifest
        .utterances
        .par_iter()
        .enumerate()
        .try_for_each(|(ui, utt)| -> Result<(), SynthError> {
            let segs = &by_utt[utt.utterance_id.as_str()];
            for (layer, &snr) in config.snr_profile.iter().enumerate() {
                let mut rng = seed::rng(seed::derive_seed(config.seed, &[1, ui as u64, layer as u64]));
                let mut values = vec![0f32; utt.n_frames * d];
                for s in segs {
                    let phone = phone_vecs.get(s.phone as usize).unwrap_or(&zero);
                    let tone = s.tone.map_or(&zero, |t| &tone_vecs[t as usize]);
                    let speaker = &speaker_vecs[s.speaker as usize];
                    for f in s.start_frame..s.end_frame {
                        let row = &mut values[f * d..(f + 1) * d];
                        for j in 0..d {
                            let mut x = snr * (phone[j] + tone[j]) + config.speaker_scale * speaker[j] + offset[j];
                            if config.noise_sigma > 0.0 {
                                x += noise.sample(&mut rng);
                            }
                            row[j] = x as f32;
                        }
                    }
                }
                let m = FrameMatrix::new(utt.n_frames, d, values)?;
                matrix::write_matrix_file(&m, &dir.join(matrix_file_name(&utt.utterance_id, layer as u32)))?;
            }
            Ok(())
        })?;

    let truth_path = dir.join(TRUTH_FILE);
    let json = serde_json::to_string_pretty(truth).expect("truth serializes");
    fs::write(&truth_path, json + "\n").map_err(|source| SynthError::Io {
        path: truth_path.display().to_string(),
        source,
    })?;
    Ok(plan.truth)
}

pub fn read_truth(path: &Path) -> Result<PlantedTruth, SynthError> {
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))
}
