//! Subcommand bodies. Each reads its inputs, runs the library and writes files.

use crate::Failure;
use parcelfit::facefit::{facefit_map, FaceFitOptions, NodeKind, SnapResult};
use parcelfit::fixture::{generate, FixtureConfig};
use parcelfit::matchfit::{facefit_partition, run_matchfit, MatchFitConfig, REPORT_SCHEMA};
use parcelfit::metrics::{dtb_map, FarmIndex};
use parcelfit::model::{emit_farm_set, emit_survey_map, FarmSet, RawCollection, SurveyMap};
use parcelfit::pipeline::{run_pipeline, write_shards, DetectionSet, PipelineOptions, PipelineReport};
use parcelfit::segeval::{evaluate, InstanceSet, DEFAULT_OVERLAP_FRAC};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub fn read_input(path: &Path) -> Result<RawCollection, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    RawCollection::parse(&bytes).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("reports serialize");
    bytes.push(b'\n');
    write(path, &bytes)
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

/// Survey map and farm set in one shared projection.
fn load_pair(survey: &Path, farms: &Path) -> Result<(SurveyMap, FarmSet), Failure> {
    let s = read_input(survey)?;
    let f = read_input(farms)?;
    let proj = RawCollection::shared_projection(&[&s, &f])?;
    let m = s.to_survey_map(proj).map_err(|e| Failure::input(survey, e))?;
    let fs = f.to_farm_set(proj).map_err(|e| Failure::input(farms, e))?;
    warn_all(&m.warnings);
    warn_all(&fs.warnings);
    Ok((m.value, fs.value))
}

pub fn matchfit(survey: &Path, farms: &Path, cfg: &MatchFitConfig, out: &Path) -> Result<(), Failure> {
    let (m0, fs) = load_pair(survey, farms)?;
    let res = run_matchfit(&m0, &fs, cfg)?;
    out_dir(out)?;
    let index = FarmIndex::new(&fs);
    let d1 = dtb_map(&res.m1, &index)?;
    write(&out.join("m1.geojson"), &emit_survey_map(&res.m1, Some(&d1.per_plot), Some(&d1.excess_area)))?;
    let d2 = &res.dtb_output;
    write(&out.join("m2.geojson"), &emit_survey_map(&res.m2, Some(&d2.per_plot), Some(&d2.excess_area)))?;
    write_json(&out.join("report.json"), &res.report)?;
    log::info!(
        "{} plots; dtb < 5 m: {:.1}% -> {:.1}%",
        res.report.plots,
        res.report.input.pct_dtb_lt_5m,
        res.report.output.pct_dtb_lt_5m
    );
    Ok(())
}

#[derive(Serialize)]
struct FaceFitReport {
    schema: u32,
    ea_before: f64,
    ea_after: f64,
    graph_nodes: usize,
    junctions: usize,
    snapped: usize,
    plots: Vec<SnapResult>,
}

pub fn facefit(survey: &Path, farms: &Path, opts: &FaceFitOptions, out: &Path) -> Result<(), Failure> {
    opts.validate()?;
    let (m, fs) = load_pair(survey, farms)?;
    let index = FarmIndex::new(&fs);
    let part = facefit_partition(&m, &fs, opts)?;
    let before = dtb_map(&m, &index)?;
    let (m2, plots) = facefit_map(&m, &part, &index, opts)?;
    let after = dtb_map(&m2, &index)?;
    out_dir(out)?;
    write(&out.join("m2.geojson"), &emit_survey_map(&m2, Some(&after.per_plot), Some(&after.excess_area)))?;
    let nodes: Vec<Value> = part
        .graph_nodes
        .iter()
        .zip(&part.node_kinds)
        .enumerate()
        .map(|(i, (p, k))| {
            let (lng, lat) = m.crs.unproject(*p);
            let kind = match k {
                NodeKind::Junction => "junction",
                NodeKind::CornerProjection => "corner-projection",
            };
            json!({
                "type": "Feature",
                "properties": { "node": i, "kind": kind },
                "geometry": { "type": "Point", "coordinates": [lng, lat] },
            })
        })
        .collect();
    let mut graph = serde_json::to_vec(&json!({ "type": "FeatureCollection", "features": nodes })).expect("json");
    graph.push(b'\n');
    write(&out.join("graph.geojson"), &graph)?;
    let report = FaceFitReport {
        schema: REPORT_SCHEMA,
        ea_before: before.total_excess_area(),
        ea_after: after.total_excess_area(),
        graph_nodes: part.graph_nodes.len(),
        junctions: part.junction_count(),
        snapped: plots.iter().filter(|r| !r.mapping.is_empty()).count(),
        plots,
    };
    write_json(&out.join("report.json"), &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegEvalConfig {
    pub overlap_frac: f64,
}

impl Default for SegEvalConfig {
    fn default() -> Self {
        Self { overlap_frac: DEFAULT_OVERLAP_FRAC }
    }
}

pub fn segeval(gt: &Path, pred: &Path, cfg: &SegEvalConfig, out: Option<&Path>) -> Result<(), Failure> {
    let g = read_input(gt)?;
    let p = read_input(pred)?;
    let proj = RawCollection::shared_projection(&[&g, &p])?;
    let gi = InstanceSet::from_raw(&g, &proj).map_err(|e| Failure::input(gt, e))?;
    let pi = InstanceSet::from_raw(&p, &proj).map_err(|e| Failure::input(pred, e))?;
    let report = evaluate(&gi, &pi, cfg.overlap_frac)?;
    let body = json!({ "schema": REPORT_SCHEMA, "gt_instances": gi.len(), "pred_instances": pi.len(), "report": report });
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                out_dir(dir)?;
            }
            write_json(path, &body)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&body).expect("json"));
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub options: PipelineOptions,
    /// File of cell tokens to drop, one per line; `#` starts a comment.
    pub deny_cells_path: Option<PathBuf>,
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    schema: u32,
    cell_level: u8,
    #[serde(flatten)]
    counts: &'a PipelineReport,
    files: Vec<String>,
}

fn read_deny_cells(path: &Path) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn pipeline(detections: &Path, cfg: &PipelineConfig, out: &Path) -> Result<(), Failure> {
    let raw = read_input(detections)?;
    let crs = RawCollection::shared_projection(&[&raw])?;
    let set = DetectionSet::from_raw(&raw, crs).map_err(|e| Failure::input(detections, e))?;
    warn_all(&set.warnings);
    let mut opts = cfg.options.clone();
    if let Some(p) = &cfg.deny_cells_path {
        opts.deny_cells.extend(read_deny_cells(p)?);
    }
    let (shards, report) = run_pipeline(&set.value, &opts)?;
    warn_all(&report.warnings);
    out_dir(out)?;
    let paths = write_shards(&shards, &set.value.crs, out)?;
    let files = paths.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    write_json(&out.join("report.json"), &PipelineSummary { schema: REPORT_SCHEMA, cell_level: opts.cell_level, counts: &report, files })
}

pub fn gen_fixture(cfg: &FixtureConfig, out: &Path) -> Result<(), Failure> {
    let fx = generate(cfg)?;
    out_dir(out)?;
    write(&out.join("survey.geojson"), &emit_survey_map(&fx.survey, None, None))?;
    write(&out.join("farms.geojson"), &emit_farm_set(&fx.farms))?;
    write(&out.join("truth.geojson"), &emit_survey_map(&fx.truth, None, None))?;
    let (lng, lat) = fx.survey.crs.unproject(fx.pivot);
    write_json(&out.join("fixture.json"), &json!({ "schema": REPORT_SCHEMA, "config": cfg, "pivot_lnglat": [lng, lat] }))
}
