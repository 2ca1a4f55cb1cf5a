//! Stage orchestration for map reconciliation: rigid fit, anchored warp and
//! corner snapping, run in a configured order, with a versioned report.

use crate::error::{Error, Result};
use crate::facefit::{build_farm_partition, facefit_map, FaceFitOptions, FarmPartition, SnapResult};
use crate::jitterfit::{jitterfit_map, JitterOptions, SimilarityTransform};
use crate::metrics::{dtb_map, DtbReport, FarmIndex};
use crate::model::{FarmSet, SurveyMap};
use crate::splinefit::{splinefit_guarded, SplineOptions};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageName {
    Jitterfit,
    Splinefit,
    Facefit,
}

impl std::str::FromStr for StageName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jitterfit" => Ok(Self::Jitterfit),
            "splinefit" => Ok(Self::Splinefit),
            "facefit" => Ok(Self::Facefit),
            other => Err(Error::Config(format!("unknown stage {other:?}; expected jitterfit, splinefit or facefit"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchFitConfig {
    pub stages: Vec<StageName>,
    /// Seeds every search; replaces the seeds inside the stage options.
    pub seed: u64,
    pub jitterfit: JitterOptions,
    pub splinefit: SplineOptions,
    pub facefit: FaceFitOptions,
}

impl Default for MatchFitConfig {
    fn default() -> Self {
        Self {
            stages: vec![StageName::Jitterfit, StageName::Splinefit],
            seed: 0,
            jitterfit: JitterOptions::map_defaults(),
            splinefit: SplineOptions::default(),
            facefit: FaceFitOptions::default(),
        }
    }
}

impl MatchFitConfig {
    pub fn validate(&self) -> Result<()> {
        self.jitterfit.validate()?;
        self.splinefit.validate()?;
        self.facefit.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum StageDetail {
    Jitterfit { transform: SimilarityTransform, evaluations: usize },
    Splinefit {
        anchors: Vec<String>,
        damping_rounds: usize,
        factor: f64,
        max_area_change_frac: f64,
        max_shape_deviation: f64,
        anchor_residual_m: f64,
        warnings: Vec<String>,
    },
    Facefit { graph_nodes: usize, snapped: usize, unchanged: usize, plots: Vec<SnapResult> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub ea_before: f64,
    pub ea_after: f64,
    pub pct_dtb_lt_5m: f64,
    pub detail: StageDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtbSummary {
    pub per_plot: BTreeMap<String, f64>,
    /// Plot counts for green (< 2.5 m), yellow (< 5 m) and red.
    pub bins: BinCounts,
    pub pct_dtb_lt_5m: f64,
    pub ea_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinCounts {
    pub green: usize,
    pub yellow: usize,
    pub red: usize,
}

impl DtbSummary {
    fn from_report(r: &DtbReport) -> Self {
        let [green, yellow, red] = r.bin_counts();
        Self {
            per_plot: r.per_plot.clone(),
            bins: BinCounts { green, yellow, red },
            pct_dtb_lt_5m: r.pct_below(5.0),
            ea_total: r.total_excess_area(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchFitReport {
    pub schema: u32,
    pub plots: usize,
    pub farms: usize,
    pub seed: u64,
    pub stages: Vec<StageSummary>,
    pub input: DtbSummary,
    pub output: DtbSummary,
    /// Largest area change of any plot relative to its input area.
    pub max_area_change_frac: f64,
}

#[derive(Debug, Clone)]
pub struct MatchFitOutput {
    /// Map after the rigid fit, or the input when that stage is not run.
    pub m1: SurveyMap,
    /// Map after every stage.
    pub m2: SurveyMap,
    pub dtb_input: DtbReport,
    pub dtb_output: DtbReport,
    pub report: MatchFitReport,
}

/// The farm partition used for snapping: farms and map together, grown by the snap radius.
pub fn facefit_partition(m: &SurveyMap, farms: &FarmSet, opts: &FaceFitOptions) -> Result<FarmPartition> {
    let bbox = farms.bbox().union(&m.bbox()).expand(opts.snap_radius_m);
    build_farm_partition(farms, &bbox, &opts.partition)
}

pub fn run_matchfit(m0: &SurveyMap, farms: &FarmSet, cfg: &MatchFitConfig) -> Result<MatchFitOutput> {
    cfg.validate()?;
    let index = FarmIndex::new(farms);
    let dtb_input = dtb_map(m0, &index)?;
    let mut cur = m0.clone();
    let mut m1 = m0.clone();
    let mut stages = Vec::with_capacity(cfg.stages.len());
    let mut ea_cur = dtb_input.total_excess_area();
    let input_areas: Vec<f64> = m0.plots.iter().map(|p| p.shape.area()).collect();
    for stage in &cfg.stages {
        let ea_before = ea_cur;
        let detail = match stage {
            StageName::Jitterfit => {
                let mut opts = cfg.jitterfit.clone();
                opts.search.seed = cfg.seed;
                let (fit, out) = jitterfit_map(&cur, &index, &opts)?;
                cur = out;
                m1 = cur.clone();
                StageDetail::Jitterfit { transform: fit.transform, evaluations: fit.evaluations }
            }
            // the warp also keeps areas near the matchfit input, not only near its own input
            StageName::Splinefit => {
                let mut opts = cfg.splinefit.clone();
                opts.refit.search.seed = cfg.seed;
                let r = splinefit_guarded(&cur, &index, &opts, Some(&input_areas))?;
                cur = r.m2.clone();
                StageDetail::Splinefit {
                    anchors: r.anchors.ids.clone(),
                    damping_rounds: r.outcome.damping_rounds,
                    factor: r.outcome.factor,
                    max_area_change_frac: r.outcome.max_area_change_frac,
                    max_shape_deviation: r.outcome.max_shape_deviation,
                    anchor_residual_m: r.anchor_residual_m,
                    warnings: r.anchors.warnings.clone(),
                }
            }
            StageName::Facefit => {
                let part = facefit_partition(&cur, farms, &cfg.facefit)?;
                let (out, plots) = facefit_map(&cur, &part, &index, &cfg.facefit)?;
                cur = out;
                let snapped = plots.iter().filter(|r| !r.mapping.is_empty()).count();
                StageDetail::Facefit { graph_nodes: part.graph_nodes.len(), snapped, unchanged: plots.len() - snapped, plots }
            }
        };
        let d = dtb_map(&cur, &index)?;
        ea_cur = d.total_excess_area();
        stages.push(StageSummary { ea_before, ea_after: ea_cur, pct_dtb_lt_5m: d.pct_below(5.0), detail });
    }
    let dtb_output = dtb_map(&cur, &index)?;
    let max_area_change_frac = m0
        .plots
        .iter()
        .zip(&cur.plots)
        .map(|(a, b)| (b.shape.area() - a.shape.area()).abs() / a.shape.area())
        .fold(0.0, f64::max);
    let report = MatchFitReport {
        schema: REPORT_SCHEMA,
        plots: m0.len(),
        farms: farms.len(),
        seed: cfg.seed,
        stages,
        input: DtbSummary::from_report(&dtb_input),
        output: DtbSummary::from_report(&dtb_output),
        max_area_change_frac,
    };
    Ok(MatchFitOutput { m1, m2: cur, dtb_input, dtb_output, report })
}
