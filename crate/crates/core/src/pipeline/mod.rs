//! Post-processing of detected field polygons: dagger removal, temporal
//! de-duplication, plus-code ids and sharding into quadtree cells.

pub mod dagger;
pub mod olc;
pub mod shard;

pub use dagger::{dagger_removal, DaggerOptions, DaggerOutcome};
pub use shard::{cell_token, parse_token, shard_by_cells, write_shards, CellShard, CellToken};

use crate::error::{Error, Result};
use crate::geom::index::GridIndex;
use crate::geom::{intersection_area, Polygon};
use crate::model::geojson::{collection_bytes, feature, polygon_to_geojson};
use crate::model::{Loaded, ProjectionSpec, RawCollection};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub feature_id: String,
    pub class: String,
    pub shape: Polygon,
    pub observed_at: DateTime<Utc>,
    pub source_image_id: String,
}

/// Detections in a shared local projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub items: Vec<Detection>,
    pub crs: ProjectionSpec,
}

impl DetectionSet {
    /// Reads detections. `observed_at` is required; ids follow the survey-map rules
    /// (`feature_id` property, feature id, then `feature-{index}`), and multi-part
    /// features are split into `{id}-{k}`.
    pub fn from_raw(raw: &RawCollection, crs: ProjectionSpec) -> Result<Loaded<Self>> {
        let mut items = Vec::new();
        let mut warnings = Vec::new();
        for f in &raw.features {
            let id = match f.prop_str("feature_id").or_else(|| f.feature_id.clone()) {
                Some(id) => id,
                None => {
                    let id = format!("feature-{}", f.index);
                    warnings.push(format!("feature {} has no feature_id; using {id}", f.index));
                    id
                }
            };
            let observed_at = f
                .prop_time("observed_at")?
                .ok_or_else(|| Error::Parse(format!("feature {} ({id}) has no observed_at", f.index)))?;
            let class = ["class", "label", "category"].iter().find_map(|k| f.prop_str(k)).unwrap_or_else(|| "default".into());
            let source_image_id = f.prop_str("source_image_id").unwrap_or_default();
            let parts = f.project_parts(&crs, true)?;
            let single = parts.len() == 1;
            for (k, shape) in parts.into_iter().enumerate() {
                items.push(Detection {
                    feature_id: if single { id.clone() } else { format!("{id}-{k}") },
                    class: class.clone(),
                    shape,
                    observed_at,
                    source_image_id: source_image_id.clone(),
                });
            }
        }
        Ok(Loaded { value: Self { items, crs }, warnings })
    }

    pub fn parse(bytes: &[u8]) -> Result<Loaded<Self>> {
        let raw = RawCollection::parse(bytes)?;
        let crs = RawCollection::shared_projection(&[&raw])?;
        Self::from_raw(&raw, crs)
    }

    pub fn to_geojson(&self, extra: impl Fn(&Detection) -> Map<String, Value>) -> Vec<u8> {
        collection_bytes(self.items.iter().map(|d| detection_feature(d, &self.crs, extra(d))).collect())
    }
}

pub(crate) fn detection_feature(d: &Detection, crs: &ProjectionSpec, extra: Map<String, Value>) -> Value {
    let mut props = Map::new();
    props.insert("feature_id".into(), json!(d.feature_id));
    props.insert("class".into(), json!(d.class));
    props.insert("observed_at".into(), json!(d.observed_at.to_rfc3339_opts(SecondsFormat::Secs, true)));
    props.insert("source_image_id".into(), json!(d.source_image_id));
    props.extend(extra);
    feature(props, polygon_to_geojson(&d.shape, crs))
}

pub fn iou(a: &Polygon, b: &Polygon) -> Result<f64> {
    if !a.bbox().intersects(&b.bbox()) {
        return Ok(0.0);
    }
    let i = intersection_area(a, b)?;
    let u = a.area() + b.area() - i;
    Ok(if u > 0.0 { (i / u).clamp(0.0, 1.0) } else { 0.0 })
}

/// Keeps one detection per connected group of same-class detections linked by
/// IoU ≥ `iou_thresh`: the most recent, then the largest, then the smallest id.
/// Survivors keep their input order.
pub fn dedup(dets: &[Detection], iou_thresh: f64) -> Result<Vec<Detection>> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::Config(format!("iou_thresh {iou_thresh} outside (0, 1]")));
    }
    let n = dets.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let boxes: Vec<_> = dets.iter().map(|d| d.shape.bbox()).collect();
    let cell = (boxes.iter().map(|b| b.width().max(b.height())).sum::<f64>() / n.max(1) as f64).max(1.0);
    let index = GridIndex::new(boxes.clone(), cell);
    for i in 0..n {
        for j in index.query(&boxes[i]) {
            if j <= i || dets[i].class != dets[j].class {
                continue;
            }
            if iou(&dets[i].shape, &dets[j].shape)? >= iou_thresh {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let better = |a: &Detection, b: &Detection| {
        a.observed_at
            .cmp(&b.observed_at)
            .then(a.shape.area().total_cmp(&b.shape.area()))
            .then(b.feature_id.cmp(&a.feature_id))
            .is_gt()
    };
    let mut best: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let e = best.entry(r).or_insert(i);
        if better(&dets[i], &dets[*e]) {
            *e = i;
        }
    }
    let keep: BTreeSet<usize> = best.into_values().collect();
    Ok(keep.into_iter().map(|i| dets[i].clone()).collect())
}

/// Replaces feature ids with the plus code of each centroid, suffixing repeats.
pub fn assign_plus_code_ids(dets: &mut [Detection], crs: &ProjectionSpec) {
    let codes: Vec<String> = dets
        .iter()
        .map(|d| {
            let (lng, lat) = crs.unproject(d.shape.centroid());
            olc::plus_code_id(lat, lng)
        })
        .collect();
    for (d, id) in dets.iter_mut().zip(olc::disambiguate(codes)) {
        d.feature_id = id;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub iou_thresh: f64,
    #[serde(flatten)]
    pub dagger: DaggerOptions,
    pub cell_level: u8,
    /// Cell tokens whose features are dropped (non-agricultural areas).
    pub deny_cells: Vec<String>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { iou_thresh: 0.5, dagger: DaggerOptions::default(), cell_level: shard::DEFAULT_LEVEL, deny_cells: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub input: usize,
    pub despiked: usize,
    pub after_dedup: usize,
    pub denied: usize,
    pub shards: usize,
    pub output: usize,
    pub warnings: Vec<String>,
}

/// Dagger removal, then de-duplication, then plus-code ids, then sharding.
pub fn run_pipeline(set: &DetectionSet, opts: &PipelineOptions) -> Result<(Vec<CellShard>, PipelineReport)> {
    for t in &opts.deny_cells {
        parse_token(t)?;
    }
    let mut warnings = Vec::new();
    let mut despiked = 0;
    let cleaned: Vec<Detection> = set
        .items
        .iter()
        .map(|d| {
            let out = dagger_removal(&d.shape, &opts.dagger);
            if let Some(w) = out.warning {
                warnings.push(format!("{}: {w}", d.feature_id));
            }
            despiked += (out.removed_vertices > 0) as usize;
            Detection { shape: out.shape, ..d.clone() }
        })
        .collect();
    let mut kept = dedup(&cleaned, opts.iou_thresh)?;
    let after_dedup = kept.len();
    assign_plus_code_ids(&mut kept, &set.crs);
    let deny: BTreeSet<&str> = opts.deny_cells.iter().map(String::as_str).collect();
    let all = shard_by_cells(&kept, &set.crs, opts.cell_level)?;
    let (shards, dropped): (Vec<CellShard>, Vec<CellShard>) = all.into_iter().partition(|s| !deny.contains(s.cell_token.as_str()));
    let denied = dropped.iter().map(|s| s.features.len()).sum();
    let output = shards.iter().map(|s| s.features.len()).sum();
    let report = PipelineReport { input: set.items.len(), despiked, after_dedup, denied, shards: shards.len(), output, warnings };
    Ok((shards, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn det(id: &str, class: &str, p: Polygon, day: u32) -> Detection {
        Detection {
            feature_id: id.into(),
            class: class.into(),
            shape: p,
            observed_at: Utc.with_ymd_and_hms(2024, 1, day, 0, 0, 0).unwrap(),
            source_image_id: format!("img{day}"),
        }
    }

    fn sq(x: f64, y: f64, s: f64) -> Polygon {
        Polygon::rect(x, y, x + s, y + s).unwrap()
    }

    #[test]
    fn recent_copy_wins() {
        let out = dedup(&[det("a", "field", sq(0.0, 0.0, 10.0), 1), det("b", "field", sq(0.5, 0.0, 10.0), 2)], 0.5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].feature_id, "b");
    }

    #[test]
    fn ties_fall_to_area_then_id() {
        let out = dedup(&[det("a", "field", sq(0.0, 0.0, 10.0), 1), det("b", "field", sq(0.0, 0.0, 10.5), 1)], 0.5).unwrap();
        assert_eq!(out[0].feature_id, "b");
        let out = dedup(&[det("z", "field", sq(0.0, 0.0, 10.0), 1), det("y", "field", sq(0.0, 0.0, 10.0), 1)], 0.5).unwrap();
        assert_eq!(out[0].feature_id, "y");
    }

    #[test]
    fn disjoint_and_cross_class_are_kept() {
        let d = [det("a", "field", sq(0.0, 0.0, 10.0), 1), det("b", "field", sq(20.0, 0.0, 10.0), 2), det("c", "pond", sq(0.0, 0.0, 10.0), 3)];
        assert_eq!(dedup(&d, 0.5).unwrap().len(), 3);
    }

    #[test]
    fn chains_collapse_to_one_survivor() {
        // A~B and B~C at IoU 0.5, A and C only touch
        let d = [
            det("a", "field", Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap(), 3),
            det("b", "field", Polygon::rect(0.0, 0.0, 20.0, 10.0).unwrap(), 1),
            det("c", "field", Polygon::rect(10.0, 0.0, 20.0, 10.0).unwrap(), 2),
        ];
        assert_eq!(iou(&d[0].shape, &d[2].shape).unwrap(), 0.0);
        assert!((iou(&d[0].shape, &d[1].shape).unwrap() - 0.5).abs() < 1e-12);
        let out = dedup(&d, 0.45).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].feature_id, "a");
    }

    #[test]
    fn identical_centroids_get_suffixes() {
        let crs = ProjectionSpec::new(18.5, 73.8).unwrap();
        let mut d = vec![det("a", "field", sq(0.0, 0.0, 10.0), 1), det("b", "pond", sq(0.0, 0.0, 10.0), 1)];
        assign_plus_code_ids(&mut d, &crs);
        assert_eq!(d[1].feature_id, format!("{}-1", d[0].feature_id));
        assert_eq!(d[0].feature_id.len(), 11);
    }
}
