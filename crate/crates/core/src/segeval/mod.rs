//! Instance segmentation evaluation with overlap matching and merged predictions.
//!
//! A prediction matches a ground-truth instance of the same class when their
//! intersection covers at least `overlap_frac` of the ground-truth area. All
//! predictions matching one ground-truth instance are merged before its IoU
//! is taken.

pub mod raster;

use crate::error::{Error, Result};
use crate::geom::{intersection_area, overlay_areas, union, MultiPolygon};
use crate::model::{ProjectionSpec, RawCollection};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};

pub const DEFAULT_OVERLAP_FRAC: f64 = 0.10;
/// Relative slack on the overlap test so an exact boundary case is not lost to rounding.
const MATCH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub class: String,
    pub shape: MultiPolygon,
}

impl Instance {
    pub fn new(id: impl Into<String>, class: impl Into<String>, shape: impl Into<MultiPolygon>) -> Self {
        Self { id: id.into(), class: class.into(), shape: shape.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for i in &instances {
            if !seen.insert(i.id.as_str()) {
                return Err(Error::DuplicateId(i.id.clone()));
            }
            if i.shape.is_empty() {
                return Err(Error::DegenerateGeometry(format!("instance {} is empty", i.id)));
            }
        }
        Ok(Self { instances })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn classes(&self) -> BTreeSet<&str> {
        self.instances.iter().map(|i| i.class.as_str()).collect()
    }

    /// Reads instances from a parsed collection. The id comes from `id`, `instance_id`
    /// or the feature id; the class from `class`, `label` or `category` (else `default`).
    pub fn from_raw(raw: &RawCollection, proj: &ProjectionSpec) -> Result<Self> {
        let mut out = Vec::with_capacity(raw.features.len());
        for f in &raw.features {
            let id = f
                .prop_str("id")
                .or_else(|| f.prop_str("instance_id"))
                .or_else(|| f.feature_id.clone())
                .unwrap_or_else(|| format!("feature-{}", f.index));
            let class = ["class", "label", "category"]
                .iter()
                .find_map(|k| f.prop_str(k))
                .unwrap_or_else(|| "default".to_string());
            out.push(Instance::new(id, class, MultiPolygon::new(f.project_parts(proj, true)?)));
        }
        Self::new(out)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchTable {
    pub gt_to_preds: BTreeMap<String, BTreeSet<String>>,
    pub pred_to_gts: BTreeMap<String, BTreeSet<String>>,
}

impl MatchTable {
    pub fn is_symmetric(&self) -> bool {
        let fwd = self.gt_to_preds.iter().flat_map(|(g, ps)| ps.iter().map(move |p| (g, p)));
        let n_fwd = fwd.clone().count();
        let n_bwd: usize = self.pred_to_gts.values().map(BTreeSet::len).sum();
        n_fwd == n_bwd && fwd.into_iter().all(|(g, p)| self.pred_to_gts.get(p).is_some_and(|s| s.contains(g)))
    }
}

fn mp_intersection_area(a: &MultiPolygon, b: &MultiPolygon) -> Result<f64> {
    if !a.bbox().intersects(&b.bbox()) {
        return Ok(0.0);
    }
    if a.parts.len() == 1 && b.parts.len() == 1 {
        return intersection_area(&a.parts[0], &b.parts[0]);
    }
    Ok(overlay_areas(a, b)?.intersection)
}

/// Every gt and pred id appears as a key, matched or not.
pub fn match_instances(gt: &InstanceSet, pred: &InstanceSet, overlap_frac: f64) -> Result<MatchTable> {
    if !(0.0..=1.0).contains(&overlap_frac) {
        return Err(Error::Config(format!("overlap_frac {overlap_frac} outside [0, 1]")));
    }
    let mut t = MatchTable::default();
    for g in &gt.instances {
        t.gt_to_preds.insert(g.id.clone(), BTreeSet::new());
    }
    for p in &pred.instances {
        t.pred_to_gts.insert(p.id.clone(), BTreeSet::new());
    }
    let pairs: Vec<Vec<(usize, f64)>> = gt
        .instances
        .par_iter()
        .map(|g| {
            let need = overlap_frac * g.shape.area() * (1.0 - MATCH_SLACK);
            let mut hits = Vec::new();
            for (pi, p) in pred.instances.iter().enumerate() {
                if p.class != g.class {
                    continue;
                }
                let i = mp_intersection_area(&g.shape, &p.shape)?;
                if i > 0.0 && i >= need {
                    hits.push((pi, i));
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    for (g, hits) in gt.instances.iter().zip(pairs) {
        for (pi, _) in hits {
            let p = &pred.instances[pi];
            t.gt_to_preds.get_mut(&g.id).expect("gt key").insert(p.id.clone());
            t.pred_to_gts.get_mut(&p.id).expect("pred key").insert(g.id.clone());
        }
    }
    Ok(t)
}

/// A ratio that may have an empty denominator; `value` is then a placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flagged {
    pub value: f64,
    pub defined: bool,
}

impl Flagged {
    fn ratio(num: f64, den: f64, placeholder: f64) -> Self {
        if den > 0.0 {
            Self { value: num / den, defined: true }
        } else {
            Self { value: placeholder, defined: false }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouStats {
    /// IoU of each gt instance, by id.
    pub per_gt: BTreeMap<String, f64>,
    pub mean: Flagged,
    pub median: Flagged,
}

/// Lower median of a non-empty list.
fn lower_median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Merged IoU per gt instance of `class`; gt instances with no match score 0.
pub fn miou_modified(gt: &InstanceSet, pred: &InstanceSet, table: &MatchTable, class: &str) -> Result<IouStats> {
    let by_id: BTreeMap<&str, &Instance> = pred.instances.iter().map(|p| (p.id.as_str(), p)).collect();
    let gts: Vec<&Instance> = gt.instances.iter().filter(|g| g.class == class).collect();
    let ious: Vec<(String, f64)> = gts
        .par_iter()
        .map(|g| {
            let preds = table.gt_to_preds.get(&g.id).map(|s| s.iter().collect::<Vec<_>>()).unwrap_or_default();
            if preds.is_empty() {
                return Ok((g.id.clone(), 0.0));
            }
            let mut merged = by_id[preds[0].as_str()].shape.clone();
            for p in &preds[1..] {
                merged = union(&merged, &by_id[p.as_str()].shape)?;
            }
            let a = overlay_areas(&merged, &g.shape)?;
            let u = a.union();
            Ok((g.id.clone(), if u > 0.0 { (a.intersection / u).clamp(0.0, 1.0) } else { 0.0 }))
        })
        .collect::<Result<_>>()?;
    let mut vals: Vec<f64> = ious.iter().map(|x| x.1).collect();
    let n = vals.len() as f64;
    let mean = Flagged::ratio(vals.iter().sum(), n, 0.0);
    let median = if vals.is_empty() { Flagged { value: 0.0, defined: false } } else { Flagged { value: lower_median(&mut vals), defined: true } };
    Ok(IouStats { per_gt: ious.into_iter().collect(), mean, median })
}

/// Mean number of matched preds over gt instances with at least one match.
pub fn over_seg(table: &MatchTable, gt_ids: &[&str]) -> Flagged {
    count_ratio(gt_ids.iter().map(|g| table.gt_to_preds.get(*g).map_or(0, BTreeSet::len)))
}

/// Mean number of matched gt instances over preds with at least one match.
pub fn under_seg(table: &MatchTable, pred_ids: &[&str]) -> Flagged {
    count_ratio(pred_ids.iter().map(|p| table.pred_to_gts.get(*p).map_or(0, BTreeSet::len)))
}

fn count_ratio(counts: impl Iterator<Item = usize>) -> Flagged {
    let (mut sum, mut nonzero) = (0usize, 0usize);
    for c in counts {
        sum += c;
        nonzero += (c > 0) as usize;
    }
    Flagged::ratio(sum as f64, nonzero as f64, 1.0)
}

/// Percent of gt instances with no match.
pub fn fnr(table: &MatchTable, gt_ids: &[&str]) -> Flagged {
    let miss = gt_ids.iter().filter(|g| table.gt_to_preds.get(**g).is_none_or(BTreeSet::is_empty)).count();
    Flagged::ratio(100.0 * miss as f64, gt_ids.len() as f64, 0.0)
}

/// Percent of preds with no match.
pub fn fpr(table: &MatchTable, pred_ids: &[&str]) -> Flagged {
    let miss = pred_ids.iter().filter(|p| table.pred_to_gts.get(**p).is_none_or(BTreeSet::is_empty)).count();
    Flagged::ratio(100.0 * miss as f64, pred_ids.len() as f64, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub mean_iou: Flagged,
    pub median_iou: Flagged,
    pub over_seg: Flagged,
    pub total_gt: usize,
    pub fnr_percent: Flagged,
    pub under_seg: Flagged,
    pub total_pred: usize,
    pub fpr_percent: Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegEvalReport {
    pub overlap_frac: f64,
    pub classes: BTreeMap<String, ClassMetrics>,
    #[serde(skip)]
    pub table: MatchTable,
}

pub fn evaluate(gt: &InstanceSet, pred: &InstanceSet, overlap_frac: f64) -> Result<SegEvalReport> {
    let table = match_instances(gt, pred, overlap_frac)?;
    let classes: BTreeSet<&str> = gt.classes().union(&pred.classes()).copied().collect();
    let rows: Vec<(String, ClassMetrics)> = classes
        .into_par_iter()
        .map(|c| {
            let g: Vec<&str> = gt.instances.iter().filter(|i| i.class == c).map(|i| i.id.as_str()).collect();
            let p: Vec<&str> = pred.instances.iter().filter(|i| i.class == c).map(|i| i.id.as_str()).collect();
            let iou = miou_modified(gt, pred, &table, c)?;
            Ok((
                c.to_string(),
                ClassMetrics {
                    mean_iou: iou.mean,
                    median_iou: iou.median,
                    over_seg: over_seg(&table, &g),
                    total_gt: g.len(),
                    fnr_percent: fnr(&table, &g),
                    under_seg: under_seg(&table, &p),
                    total_pred: p.len(),
                    fpr_percent: fpr(&table, &p),
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(SegEvalReport { overlap_frac, classes: rows.into_iter().collect(), table })
}
