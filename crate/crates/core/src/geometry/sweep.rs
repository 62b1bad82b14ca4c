use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_centroids_present, crv, fit_subspace, GeometryError, Subspace};
use crate::aggregation::pooled_for_kind;
use crate::dataset::{Dataset, LabelFilter, LabelKind};
use crate::Error;

/// Directed pair: CRV of `x` after removing `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrvPair {
    pub x: LabelKind,
    pub y: LabelKind,
}

impl CrvPair {
    pub const fn new(x: LabelKind, y: LabelKind) -> Self {
        Self { x, y }
    }

    pub fn needs_tones(&self) -> bool {
        self.x == LabelKind::Tone || self.y == LabelKind::Tone
    }
}

pub const ALL_PAIRS: [CrvPair; 6] = [
    CrvPair::new(LabelKind::Phone, LabelKind::Speaker),
    CrvPair::new(LabelKind::Speaker, LabelKind::Phone),
    CrvPair::new(LabelKind::Tone, LabelKind::Speaker),
    CrvPair::new(LabelKind::Speaker, LabelKind::Tone),
    CrvPair::new(LabelKind::Tone, LabelKind::Phone),
    CrvPair::new(LabelKind::Phone, LabelKind::Tone),
];

/// Requested principal-component counts per factor. Counts above the
/// centroid matrix's rank bound are capped by `fit_subspace`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSizes {
    pub phone: usize,
    pub speaker: usize,
    pub tone: usize,
}

impl Default for SubspaceSizes {
    fn default() -> Self {
        Self {
            phone: 35,
            speaker: 35,
            tone: 35,
        }
    }
}

impl SubspaceSizes {
    pub fn get(&self, kind: LabelKind) -> usize {
        match kind {
            LabelKind::Phone => self.phone,
            LabelKind::Speaker => self.speaker,
            LabelKind::Tone => self.tone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrvReport {
    pub model_id: String,
    pub test_set: String,
    pub layer: u32,
    pub pair: CrvPair,
    pub value: f64,
    pub k_x: usize,
    pub k_y: usize,
}

/// Factor subspace of one layer.
pub fn layer_subspace(
    dataset: &Dataset,
    filter: &LabelFilter,
    layer: u32,
    kind: LabelKind,
    k: usize,
) -> Result<Subspace, Error> {
    let classes = filter
        .retained(kind)
        .ok_or_else(|| Error::MissingTones {
            dataset: dataset.dataset_id().to_string(),
            what: "a tone subspace".into(),
        })?;
    let pooled = pooled_for_kind(dataset, filter, layer, kind)?;
    let centroids = class_centroids_present(&pooled, classes)?;
    Ok(fit_subspace(&centroids, k)?)
}

/// CRV for every requested directed pair at every layer, ordered by layer
/// (as given) and then by the order of `pairs`.
pub fn crv_sweep(
    dataset: &Dataset,
    filter: &LabelFilter,
    layers: &[u32],
    pairs: &[CrvPair],
    sizes: &SubspaceSizes,
) -> Result<Vec<CrvReport>, Error> {
    if let Some(p) = pairs.iter().find(|p| p.needs_tones() && !dataset.has_tones()) {
        return Err(GeometryError::UnsupportedPair {
            x: p.x,
            y: p.y,
            dataset: dataset.dataset_id().to_string(),
        }
        .into());
    }
    let mut kinds: Vec<LabelKind> = pairs.iter().flat_map(|p| [p.x, p.y]).collect();
    kinds.sort();
    kinds.dedup();

    let per_layer: Vec<Vec<CrvReport>> = layers
        .par_iter()
        .map(|&layer| {
            let mut spaces = BTreeMap::new();
            for &kind in &kinds {
                spaces.insert(
                    kind,
                    layer_subspace(dataset, filter, layer, kind, sizes.get(kind))?,
                );
            }
            pairs
                .iter()
                .map(|&pair| {
                    let (x, y) = (&spaces[&pair.x], &spaces[&pair.y]);
                    Ok(CrvReport {
                        model_id: dataset.model_id().to_string(),
                        test_set: dataset.dataset_id().to_string(),
                        layer,
                        pair,
                        value: crv(x, y)?,
                        k_x: x.k(),
                        k_y: y.k(),
                    })
                })
                .collect::<Result<Vec<_>, Error>>()
        })
        .collect::<Result<_, Error>>()?;
    Ok(per_layer.into_iter().flatten().collect())
}
