//! Anchor-constrained warp of a survey map: refit plots one by one, keep the
//! best-fitting dispersed ones as anchors, and interpolate their displacements
//! across the map with a thin-plate spline held within ε of the identity.

pub mod tps;

use crate::error::{Error, Result};
use crate::geom::{centroid_aligned_hausdorff, Bbox, Point, Polygon};
use crate::jitterfit::{jitterfit_plots, FitResult, JitterOptions};
use crate::metrics::FarmIndex;
use crate::model::{Stage, SurveyMap};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use tps::ThinPlateSpline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplineOptions {
    pub anchor_dtb_max: f64,
    pub k_anchors: usize,
    pub epsilon_m: f64,
    pub tps_lambda: f64,
    pub shape_bound_coeff: f64,
    pub area_tol_frac: f64,
    pub damping: f64,
    pub max_damping_rounds: usize,
    pub refit: JitterOptions,
}

impl Default for SplineOptions {
    fn default() -> Self {
        Self {
            anchor_dtb_max: 2.5,
            k_anchors: 12,
            epsilon_m: 15.0,
            tps_lambda: 1e-6,
            shape_bound_coeff: 0.03,
            area_tol_frac: 0.03,
            damping: 0.8,
            max_damping_rounds: 10,
            refit: JitterOptions::plot_defaults(),
        }
    }
}

impl SplineOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.k_anchors < 3 {
            return bad("k_anchors must be at least 3");
        }
        if !(self.epsilon_m >= 0.0) || !(self.tps_lambda >= 0.0) || !(self.anchor_dtb_max >= 0.0) {
            return bad("epsilon_m, tps_lambda and anchor_dtb_max must be non-negative");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if !(self.area_tol_frac > 0.0) || !(self.shape_bound_coeff > 0.0) {
            return bad("area_tol_frac and shape_bound_coeff must be positive");
        }
        self.refit.validate()
    }
}

/// A refitted plot and its dtb after the refit.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub shape: Polygon,
    pub dtb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSet {
    /// Anchor plot ids in selection order.
    pub ids: Vec<String>,
    pub candidate_scores: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Anchors closer than this at any vertex count as touching.
const ANCHOR_TOUCH_M: f64 = 1e-3;

fn touching(a: &Polygon, b: &Polygon) -> bool {
    a.bbox().expand(ANCHOR_TOUCH_M).intersects(&b.bbox())
        && a.exterior().iter().any(|p| b.exterior().iter().any(|q| p.dist(*q) <= ANCHOR_TOUCH_M))
}

/// Farthest-point selection over plot centroids among plots whose refit dtb
/// is at most `max_dtb`, seeded by the lowest-dtb candidate. A candidate that
/// shares a vertex with a chosen anchor is skipped: the two refits generally
/// disagree on where that vertex goes, and the warp could meet neither.
pub fn select_anchors(m1: &SurveyMap, refit: &BTreeMap<String, Refit>, k: usize, max_dtb: f64) -> Result<AnchorSet> {
    if k < 3 {
        return Err(Error::Config("at least 3 anchors must be requested".into()));
    }
    let mut cands: Vec<(usize, f64, Point)> = Vec::new();
    let mut candidate_scores = BTreeMap::new();
    for (i, p) in m1.plots.iter().enumerate() {
        if let Some(r) = refit.get(&p.id) {
            if r.dtb <= max_dtb {
                cands.push((i, r.dtb, p.shape.centroid()));
                candidate_scores.insert(p.id.clone(), r.dtb);
            }
        }
    }
    if cands.is_empty() {
        return Err(Error::NoAnchors { max_dtb });
    }
    let mut warnings = Vec::new();
    if cands.len() < k {
        warnings.push(format!("only {} anchor candidates for {k} requested anchors", cands.len()));
    }
    let seed = (0..cands.len()).min_by(|&a, &b| cands[a].1.total_cmp(&cands[b].1).then(a.cmp(&b))).unwrap();
    let shape = |c: usize| &m1.plots[cands[c].0].shape;
    let mut chosen = vec![seed];
    let mut open: Vec<bool> = (0..cands.len()).map(|i| i != seed && !touching(shape(i), shape(seed))).collect();
    let mut near: Vec<f64> = cands.iter().map(|c| c.2.dist(cands[seed].2)).collect();
    while chosen.len() < k {
        let Some(next) = (0..cands.len()).filter(|&i| open[i]).max_by(|&a, &b| near[a].total_cmp(&near[b]).then(b.cmp(&a))) else {
            break;
        };
        chosen.push(next);
        for (i, c) in cands.iter().enumerate() {
            near[i] = near[i].min(c.2.dist(cands[next].2));
            open[i] = open[i] && i != next && !touching(shape(i), shape(next));
        }
    }
    if chosen.len() < k.min(cands.len()) {
        warnings.push(format!("only {} non-touching anchors among {} candidates", chosen.len(), cands.len()));
    }
    let ids = chosen.into_iter().map(|c| m1.plots[cands[c].0].id.clone()).collect();
    Ok(AnchorSet { ids, candidate_scores, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    ThinPlate,
}

/// Displacement field `w(x) − x`, clamped in norm to `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    pub control_points: Vec<(Point, Point)>,
    pub kernel: Kernel,
    pub epsilon: f64,
    pub regularization: f64,
    spline: ThinPlateSpline,
}

fn clamp_norm(v: Point, eps: f64) -> Point {
    let n = v.norm();
    if n > eps {
        v.scale(eps / n)
    } else {
        v
    }
}

impl WarpField {
    pub fn fit(points: &[Point], displacements: &[Point], epsilon: f64, lambda: f64) -> Result<Self> {
        let clamped: Vec<Point> = displacements.iter().map(|&d| clamp_norm(d, epsilon)).collect();
        let spline = ThinPlateSpline::fit(points, &clamped, lambda)?;
        Ok(Self { control_points: spline.controls().to_vec(), kernel: Kernel::ThinPlate, epsilon, regularization: lambda, spline })
    }

    /// Displacement at `p` with the spline scaled by `factor` before clamping.
    pub fn displacement(&self, p: Point, factor: f64) -> Point {
        clamp_norm(self.spline.eval(p).scale(factor), self.epsilon)
    }

    pub fn apply_point(&self, p: Point, factor: f64) -> Point {
        p.add(self.displacement(p, factor))
    }

    /// Largest displacement norm on a square lattice of spacing `step` over `b`.
    pub fn max_displacement_on_grid(&self, b: &Bbox, step: f64) -> f64 {
        let nx = (b.width() / step).ceil() as usize;
        let ny = (b.height() / step).ceil() as usize;
        let mut worst: f64 = 0.0;
        for i in 0..=nx {
            for j in 0..=ny {
                let p = Point::new(b.min_x + i as f64 * step, b.min_y + j as f64 * step);
                worst = worst.max(self.displacement(p, 1.0).norm());
            }
        }
        worst
    }
}

/// Control points are the anchors' M¹ vertices, displaced to their refitted positions.
pub fn fit_warp(anchors: &AnchorSet, m1: &SurveyMap, refit: &BTreeMap<String, Refit>, epsilon: f64, lambda: f64) -> Result<WarpField> {
    if anchors.ids.is_empty() {
        return Err(Error::EmptyInput("anchor set is empty".into()));
    }
    let (mut pts, mut disp) = (Vec::new(), Vec::new());
    for id in &anchors.ids {
        let p = m1.get(id).ok_or_else(|| Error::Config(format!("anchor {id} is not in the map")))?;
        let r = refit.get(id).ok_or_else(|| Error::Config(format!("anchor {id} has no refit")))?;
        if r.shape.exterior().len() != p.shape.exterior().len() {
            return Err(Error::InvalidGeometry(format!("anchor {id}: refit changed the vertex count")));
        }
        for (a, b) in p.shape.exterior().iter().zip(r.shape.exterior()) {
            pts.push(*a);
            disp.push(b.sub(*a));
        }
    }
    WarpField::fit(&pts, &disp, epsilon, lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpOutcome {
    pub map: SurveyMap,
    pub damping_rounds: usize,
    pub factor: f64,
    pub max_area_change_frac: f64,
    pub max_shape_deviation: f64,
}

/// Warps every vertex, then enforces the area and shape guards; see `apply_warp_guarded`.
pub fn apply_warp(m1: &SurveyMap, w: &WarpField, opts: &SplineOptions) -> Result<WarpOutcome> {
    apply_warp_guarded(m1, w, opts, None)
}

struct GuardPass {
    shapes: Vec<Polygon>,
    violators: Vec<usize>,
    worst_id: String,
    max_area: f64,
    max_shape: f64,
}

impl GuardPass {
    fn into_outcome(self, m1: &SurveyMap, damping_rounds: usize, factor: f64) -> WarpOutcome {
        let mut map = m1.with_shapes(self.shapes, Stage::M2);
        map.stage = Stage::M2;
        WarpOutcome { map, damping_rounds, factor, max_area_change_frac: self.max_area, max_shape_deviation: self.max_shape }
    }
}

fn guard_pass(m1: &SurveyMap, w: &WarpField, factor: f64, opts: &SplineOptions, input_areas: Option<&[f64]>) -> GuardPass {
    let mut out = GuardPass { shapes: Vec::with_capacity(m1.len()), violators: Vec::new(), worst_id: String::new(), max_area: 0.0, max_shape: 0.0 };
    let mut worst = 0.0f64;
    for (i, p) in m1.plots.iter().enumerate() {
        let Ok(warped) = p.shape.map_checked(|q| w.apply_point(q, factor)) else {
            out.violators.push(i);
            if worst < f64::INFINITY {
                worst = f64::INFINITY;
                out.worst_id = p.id.clone();
            }
            out.shapes.push(p.shape.clone());
            continue;
        };
        let a0 = p.shape.area();
        let da = (warped.area() - a0).abs() / a0;
        let bound = opts.shape_bound_coeff * a0.sqrt();
        let ds = centroid_aligned_hausdorff(&p.shape, &warped);
        out.max_area = out.max_area.max(da);
        out.max_shape = out.max_shape.max(ds / a0.sqrt());
        let mut excess = (da / opts.area_tol_frac).max(ds / bound);
        let mut bad = da > opts.area_tol_frac || ds > bound;
        if let Some(ai) = input_areas.map(|a| a[i]) {
            let (d1, d2) = ((a0 - ai).abs() / ai, (warped.area() - ai).abs() / ai);
            let allowed = opts.area_tol_frac.max(d1);
            excess = excess.max(d2 / allowed);
            bad |= d2 > allowed;
        }
        if bad {
            out.violators.push(i);
        }
        if excess > worst {
            worst = excess;
            out.worst_id = p.id.clone();
        }
        out.shapes.push(warped);
    }
    out
}

/// Applies `w`; if a plot's area moves more than `area_tol_frac` or its shape
/// more than `shape_bound_coeff·sqrt(area)`, the field is damped globally by
/// `damping` per round.
///
/// With `input_areas` (one per plot, in map order) a warped plot must also stay
/// within `area_tol_frac` of its input area or, if its M¹ shape is already
/// outside that band, get no further from it.
pub fn apply_warp_guarded(m1: &SurveyMap, w: &WarpField, opts: &SplineOptions, input_areas: Option<&[f64]>) -> Result<WarpOutcome> {
    if input_areas.is_some_and(|a| a.len() != m1.len()) {
        return Err(Error::Config("input_areas must have one entry per plot".into()));
    }
    let mut worst_id = String::new();
    for round in 0..=opts.max_damping_rounds {
        let factor = opts.damping.powi(round as i32);
        let pass = guard_pass(m1, w, factor, opts, input_areas);
        if pass.violators.is_empty() {
            return Ok(pass.into_outcome(m1, round, factor));
        }
        worst_id = pass.worst_id;
    }
    Err(Error::DistortionBound { plot_id: worst_id, rounds: opts.max_damping_rounds })
}

#[derive(Debug, Clone)]
pub struct SplineResult {
    pub m2: SurveyMap,
    pub anchors: AnchorSet,
    pub warp: WarpField,
    pub refits: Vec<FitResult>,
    pub outcome: WarpOutcome,
    /// Largest vertex distance between an anchor in M² and its refitted shape.
    pub anchor_residual_m: f64,
}

/// Fits and applies the warp. While some plot fails the guards at full
/// strength, the anchor nearest the worst plot is dropped and the warp refit,
/// so the anchors that remain are met exactly. If the guards still fail after
/// `max_damping_rounds` drops (or one anchor is left), the warp through the
/// full anchor set is damped globally instead.
fn warp_with_pruning(
    m1: &SurveyMap,
    refit: &BTreeMap<String, Refit>,
    selected: AnchorSet,
    opts: &SplineOptions,
    input_areas: Option<&[f64]>,
) -> Result<(AnchorSet, WarpField, WarpOutcome)> {
    let centroid = |id: &str| m1.get(id).expect("ids come from the map").shape.centroid();
    let mut anchors = selected.clone();
    for _ in 0..=opts.max_damping_rounds {
        let warp = fit_warp(&anchors, m1, refit, opts.epsilon_m, opts.tps_lambda)?;
        let pass = guard_pass(m1, &warp, 1.0, opts, input_areas);
        if pass.violators.is_empty() {
            return Ok((anchors, warp, pass.into_outcome(m1, 0, 1.0)));
        }
        if anchors.ids.len() <= 1 {
            break;
        }
        let worst = centroid(&pass.worst_id);
        let k = (0..anchors.ids.len())
            .min_by(|&a, &b| centroid(&anchors.ids[a]).dist(worst).total_cmp(&centroid(&anchors.ids[b]).dist(worst)))
            .expect("anchors are nonempty");
        let dropped = anchors.ids.remove(k);
        anchors.warnings.push(format!("anchor {dropped} dropped: the warp through it distorts plot {}", pass.worst_id));
    }
    let warp = fit_warp(&selected, m1, refit, opts.epsilon_m, opts.tps_lambda)?;
    let outcome = apply_warp_guarded(m1, &warp, opts, input_areas)?;
    let mut anchors = selected;
    anchors.warnings.push(format!("anchor pruning did not satisfy the guards; warp damped by {}", outcome.factor));
    Ok((anchors, warp, outcome))
}

pub fn splinefit(m1: &SurveyMap, farms: &FarmIndex, opts: &SplineOptions) -> Result<SplineResult> {
    splinefit_guarded(m1, farms, opts, None)
}

/// `splinefit` whose warp also keeps plot areas near `input_areas`; see `apply_warp_guarded`.
pub fn splinefit_guarded(m1: &SurveyMap, farms: &FarmIndex, opts: &SplineOptions, input_areas: Option<&[f64]>) -> Result<SplineResult> {
    opts.validate()?;
    if m1.is_empty() {
        return Err(Error::EmptyInput("survey map has no plots".into()));
    }
    let fits = jitterfit_plots(m1, farms, &opts.refit)?;
    let mut refit = BTreeMap::new();
    let mut refits = Vec::with_capacity(fits.len());
    for (p, (r, shape)) in m1.plots.iter().zip(fits) {
        refit.insert(p.id.clone(), Refit { shape, dtb: r.objective_after });
        refits.push(r);
    }
    let selected = select_anchors(m1, &refit, opts.k_anchors, opts.anchor_dtb_max)?;
    let (anchors, warp, outcome) = warp_with_pruning(m1, &refit, selected, opts, input_areas)?;
    let mut residual: f64 = 0.0;
    for id in &anchors.ids {
        let out = outcome.map.get(id).expect("anchor ids come from the map");
        for (a, b) in out.shape.exterior().iter().zip(refit[id].shape.exterior()) {
            residual = residual.max(a.dist(*b));
        }
    }
    Ok(SplineResult { m2: outcome.map.clone(), anchors, warp, refits, outcome, anchor_residual_m: residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProjectionSpec, SurveyPlot};

    fn line_map(xs: &[f64]) -> SurveyMap {
        let plots = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| SurveyPlot::new(format!("p{i}"), Polygon::rect(x, 0.0, x + 0.5, 0.5).unwrap()))
            .collect();
        SurveyMap::new(plots, Stage::M1, ProjectionSpec::new(0.0, 0.0).unwrap()).unwrap()
    }

    fn refits(m: &SurveyMap, dtb: &[f64]) -> BTreeMap<String, Refit> {
        m.plots.iter().zip(dtb).map(|(p, &d)| (p.id.clone(), Refit { shape: p.shape.clone(), dtb: d })).collect()
    }

    /// Exhaustive dispersion oracle: the k-subset maximizing the minimum pairwise distance.
    fn best_subset(xs: &[f64], k: usize) -> f64 {
        let n = xs.len();
        let mut best: f64 = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let sel: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| xs[i]).collect();
            let mut mn = f64::INFINITY;
            for a in 0..k {
                for b in a + 1..k {
                    mn = mn.min((sel[a] - sel[b]).abs());
                }
            }
            best = best.max(mn);
        }
        best
    }

    #[test]
    fn anchors_on_a_line_match_dispersion_oracle() {
        let xs = [0.0, 1.0, 2.6, 3.0, 10.0];
        let m = line_map(&xs);
        let a = select_anchors(&m, &refits(&m, &[1.0; 5]), 3, 2.5).unwrap();
        assert_eq!(a.ids, ["p0", "p4", "p3"]);
        let chosen: Vec<f64> = a.ids.iter().map(|id| xs[id[1..].parse::<usize>().unwrap()]).collect();
        let mut mn = f64::INFINITY;
        for i in 0..3 {
            for j in i + 1..3 {
                mn = mn.min((chosen[i] - chosen[j]).abs());
            }
        }
        assert_eq!(mn, best_subset(&xs, 3));
    }

    #[test]
    fn anchor_edge_cases() {
        let m = line_map(&[0.0, 5.0]);
        let a = select_anchors(&m, &refits(&m, &[1.0, 9.0]), 3, 2.5).unwrap();
        assert_eq!(a.ids, ["p0"]);
        assert_eq!(a.warnings.len(), 1);
        assert!(matches!(select_anchors(&m, &refits(&m, &[3.0, 9.0]), 3, 2.5), Err(Error::NoAnchors { .. })));
        assert!(matches!(select_anchors(&m, &refits(&m, &[1.0, 1.0]), 2, 2.5), Err(Error::Config(_))));
    }

    #[test]
    fn touching_candidates_are_skipped() {
        let m = line_map(&[0.0, 0.5, 5.0, 10.0, 10.5]);
        let a = select_anchors(&m, &refits(&m, &[1.0; 5]), 5, 2.5).unwrap();
        assert_eq!(a.ids, ["p0", "p4", "p2"]);
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn warp_basics() {
        let pts = [Point::new(0.0, 0.0), Point::new(100.0, 0.0), Point::new(0.0, 100.0)];
        let zero = WarpField::fit(&pts, &[Point::new(0.0, 0.0); 3], 15.0, 1e-6).unwrap();
        assert_eq!(zero.displacement(Point::new(37.0, 11.0), 1.0), Point::new(0.0, 0.0));
        let one = WarpField::fit(&pts[..1], &[Point::new(1.0, 0.0)], 15.0, 1e-6).unwrap();
        assert!(one.displacement(pts[0], 1.0).dist(Point::new(1.0, 0.0)) < 1e-6);
        let big = WarpField::fit(&pts[..1], &[Point::new(6.0, 8.0)], 5.0, 1e-6).unwrap();
        let d = big.displacement(pts[0], 1.0);
        assert!(d.dist(Point::new(3.0, 4.0)) < 1e-9);
    }

    #[test]
    fn identity_and_translation_warps() {
        let m = line_map(&[0.0, 3.0, 7.0]);
        let opts = SplineOptions::default();
        let pts: Vec<Point> = m.plots.iter().flat_map(|p| p.shape.exterior().to_vec()).collect();
        let id = WarpField::fit(&pts, &vec![Point::new(0.0, 0.0); pts.len()], 15.0, 1e-6).unwrap();
        let out = apply_warp(&m, &id, &opts).unwrap();
        for (a, b) in m.plots.iter().zip(&out.map.plots) {
            assert_eq!(a.shape, b.shape);
        }
        assert_eq!(out.map.stage, Stage::M2);
        let tr = WarpField::fit(&pts, &vec![Point::new(2.0, -1.0); pts.len()], 15.0, 1e-6).unwrap();
        let out = apply_warp(&m, &tr, &opts).unwrap();
        for (a, b) in m.plots.iter().zip(&out.map.plots) {
            assert!((a.shape.area() - b.shape.area()).abs() < 1e-9);
        }
    }

    #[test]
    fn guard_damps_or_fails() {
        // a strongly shearing field on small plots cannot pass the 3% guard undamped
        let m = line_map(&[0.0, 1.0, 2.0]);
        let pts = [Point::new(0.0, 0.0), Point::new(0.0, 0.5), Point::new(2.5, 0.0), Point::new(2.5, 0.5)];
        let disp = [Point::new(0.0, 0.0), Point::new(0.2, 0.0), Point::new(0.0, 0.0), Point::new(0.2, 0.0)];
        let w = WarpField::fit(&pts, &disp, 15.0, 0.0).unwrap();
        let out = apply_warp(&m, &w, &SplineOptions::default()).unwrap();
        assert!(out.damping_rounds > 0);
        assert!(out.max_area_change_frac <= 0.03);
        let strict = SplineOptions { max_damping_rounds: 0, ..Default::default() };
        assert!(matches!(apply_warp(&m, &w, &strict), Err(Error::DistortionBound { .. })));
    }

    #[test]
    fn input_area_guard() {
        // a 2% stretch in x passes the M1 guard alone
        let m = line_map(&[0.0, 1.0, 2.0]);
        let pts: Vec<Point> = m.plots.iter().flat_map(|p| p.shape.exterior().to_vec()).collect();
        let disp: Vec<Point> = pts.iter().map(|p| Point::new(0.02 * p.x, 0.0)).collect();
        let w = WarpField::fit(&pts, &disp, 15.0, 0.0).unwrap();
        let opts = SplineOptions::default();
        assert_eq!(apply_warp(&m, &w, &opts).unwrap().damping_rounds, 0);
        let areas: Vec<f64> = m.plots.iter().map(|p| p.shape.area()).collect();
        // inputs 1% smaller: 1.02 / 0.99 is past 3%, so the field is damped
        let smaller: Vec<f64> = areas.iter().map(|a| a * 0.99).collect();
        let out = apply_warp_guarded(&m, &w, &opts, Some(&smaller)).unwrap();
        assert!(out.damping_rounds > 0);
        for (p, a) in out.map.plots.iter().zip(&smaller) {
            assert!((p.shape.area() - a).abs() / a <= 0.03);
        }
        // inputs 5% larger: already outside the band, and the stretch moves toward them
        let larger: Vec<f64> = areas.iter().map(|a| a * 1.05).collect();
        assert_eq!(apply_warp_guarded(&m, &w, &opts, Some(&larger)).unwrap().damping_rounds, 0);
        assert!(apply_warp_guarded(&m, &w, &opts, Some(&areas[..2])).is_err());
    }

    #[test]
    fn inconsistent_anchor_is_dropped_and_the_rest_stay_exact() {
        // six 10 m squares in a row; anchors p0, p3, p5 with p3 and p5 refitted 2 m east
        let plots = (0..6).map(|i| SurveyPlot::new(format!("p{i}"), Polygon::rect(10.0 * i as f64, 0.0, 10.0 * (i + 1) as f64, 10.0).unwrap())).collect();
        let m = SurveyMap::new(plots, Stage::M1, ProjectionSpec::new(0.0, 0.0).unwrap()).unwrap();
        let mut refit = refits(&m, &[0.1; 6]);
        for id in ["p3", "p5"] {
            let r = refit.get_mut(id).unwrap();
            r.shape = r.shape.map_points(|q| q.add(Point::new(2.0, 0.0)));
        }
        let selected = AnchorSet { ids: vec!["p0".into(), "p3".into(), "p5".into()], candidate_scores: BTreeMap::new(), warnings: vec![] };
        let opts = SplineOptions::default();
        let full = fit_warp(&selected, &m, &refit, opts.epsilon_m, opts.tps_lambda).unwrap();
        assert!(!guard_pass(&m, &full, 1.0, &opts, None).violators.is_empty());
        let (kept, w, out) = warp_with_pruning(&m, &refit, selected, &opts, None).unwrap();
        assert!(kept.ids.len() < 3);
        assert!(kept.warnings.iter().any(|s| s.contains("dropped")));
        assert_eq!(out.damping_rounds, 0);
        assert!(out.max_area_change_frac <= opts.area_tol_frac);
        for id in &kept.ids {
            for (a, b) in out.map.get(id).unwrap().shape.exterior().iter().zip(refit[id].shape.exterior()) {
                assert!(a.dist(*b) < 1e-6);
            }
        }
        assert!(w.max_displacement_on_grid(&m.bbox(), 1.0) <= opts.epsilon_m + 1e-6);
    }
}
