//! Similarity-transform fitting of a whole map (minimizing ea) or of single
//! plots (minimizing dtb).

pub mod search;

use crate::error::{Error, Result};
use crate::geom::{Bbox, Point, Polygon};
use crate::metrics::{excess_area_plot, excess_area_total, FarmIndex};
use crate::model::{Stage, SurveyMap};
use rayon::prelude::*;
use search::{minimize, Params, SearchOptions, SearchSpace};
use serde::{Deserialize, Serialize};

pub const MAX_ROTATION_RAD: f64 = 0.35;
pub const MIN_SCALE: f64 = 0.8;
pub const MAX_SCALE: f64 = 1.25;

/// `x' = s·R(theta)·(x − c) + c + (tx, ty)` for a pivot `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub tx: f64,
    pub ty: f64,
    pub theta: f64,
    pub s: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self { tx: 0.0, ty: 0.0, theta: 0.0, s: 1.0 };

    pub fn new(tx: f64, ty: f64, theta: f64, s: f64) -> Self {
        Self { tx, ty, theta, s }
    }

    fn params(&self) -> Params {
        [self.tx, self.ty, self.theta, self.s]
    }

    fn from_params(x: Params) -> Self {
        Self { tx: x[0], ty: x[1], theta: x[2], s: x[3] }
    }

    pub fn apply(&self, p: Point, pivot: Point) -> Point {
        let (sn, cs) = self.theta.sin_cos();
        let d = p.sub(pivot);
        Point::new(
            self.s * (cs * d.x - sn * d.y) + pivot.x + self.tx,
            self.s * (sn * d.x + cs * d.y) + pivot.y + self.ty,
        )
    }

    pub fn apply_polygon(&self, p: &Polygon, pivot: Point) -> Polygon {
        p.map_points(|q| self.apply(q, pivot))
    }

    /// The transform about `pivot` that undoes `self` about the same pivot.
    pub fn inverse(&self) -> Self {
        let (sn, cs) = (-self.theta).sin_cos();
        let s = 1.0 / self.s;
        let (x, y) = (-self.tx, -self.ty);
        Self { tx: s * (cs * x - sn * y), ty: s * (sn * x + cs * y), theta: -self.theta, s }
    }
}

/// Applies `t` about the map's bbox center; ids, stage and attributes are kept.
pub fn apply_transform(m: &SurveyMap, t: &SimilarityTransform) -> SurveyMap {
    let pivot = m.bbox().center();
    m.with_shapes(m.plots.iter().map(|p| t.apply_polygon(&p.shape, pivot)).collect(), m.stage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterOptions {
    pub max_translation_m: f64,
    pub max_rotation_rad: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    /// Coarse lattice points for (tx, ty, theta, s).
    pub grid_steps: [usize; 4],
    #[serde(flatten)]
    pub search: SearchOptions,
}

impl JitterOptions {
    pub fn map_defaults() -> Self {
        Self {
            max_translation_m: 2000.0,
            max_rotation_rad: MAX_ROTATION_RAD,
            min_scale: MIN_SCALE,
            max_scale: MAX_SCALE,
            grid_steps: [9, 9, 7, 5],
            search: SearchOptions::default(),
        }
    }

    pub fn plot_defaults() -> Self {
        Self {
            max_translation_m: 30.0,
            max_rotation_rad: 5f64.to_radians(),
            min_scale: 0.97,
            max_scale: 1.03,
            grid_steps: [13, 13, 5, 3],
            search: SearchOptions { refine_levels: 4, random_probes: 16, nm_max_iters: 150, max_evaluations: 6_000, ..Default::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.max_translation_m >= 0.0 && self.max_translation_m.is_finite()) {
            return bad("max_translation_m must be a non-negative number");
        }
        if !(0.0..=MAX_ROTATION_RAD).contains(&self.max_rotation_rad) {
            return bad("max_rotation_rad must lie in [0, 0.35]");
        }
        if !(MIN_SCALE <= self.min_scale && self.min_scale <= 1.0 && 1.0 <= self.max_scale && self.max_scale <= MAX_SCALE) {
            return bad("scale bounds must satisfy 0.8 <= min_scale <= 1 <= max_scale <= 1.25");
        }
        if self.grid_steps.contains(&0) {
            return bad("grid_steps entries must be positive");
        }
        if self.search.top_k == 0 {
            return bad("top_k must be positive");
        }
        Ok(())
    }

    fn space(&self) -> SearchSpace {
        let (t, r) = (self.max_translation_m, self.max_rotation_rad);
        SearchSpace {
            lo: [-t, -t, -r, self.min_scale],
            hi: [t, t, r, self.max_scale],
            steps: self.grid_steps,
            quantum: [1e-3, 1e-3, 1e-4, 1e-5],
        }
    }
}

impl Default for JitterOptions {
    fn default() -> Self {
        Self::map_defaults()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub transform: SimilarityTransform,
    pub objective_before: f64,
    pub objective_after: f64,
    pub evaluations: usize,
}

/// Map-level fit minimizing ea(Mᵗ, F) about the bbox center; returns the M¹ map.
pub fn jitterfit_map(m0: &SurveyMap, farms: &FarmIndex, opts: &JitterOptions) -> Result<(FitResult, SurveyMap)> {
    opts.validate()?;
    if m0.is_empty() {
        return Err(Error::EmptyInput("survey map has no plots".into()));
    }
    if farms.is_empty() {
        return Err(Error::EmptyInput("farm set has no plots".into()));
    }
    let pivot = m0.bbox().center();
    let shapes: Vec<&Polygon> = m0.plots.iter().map(|p| &p.shape).collect();
    let objective = |x: Params| -> Result<f64> {
        let t = SimilarityTransform::from_params(x);
        let moved: Vec<Polygon> = shapes.iter().map(|p| t.apply_polygon(p, pivot)).collect();
        excess_area_total(&moved, farms)
    };
    let space = landing_space(opts.space(), &m0.bbox(), &farm_bbox(farms));
    let out = minimize(&objective, SimilarityTransform::IDENTITY.params(), &space, &opts.search)?;
    let t = SimilarityTransform::from_params(out.x);
    let mut m1 = apply_transform(m0, &t);
    m1.stage = Stage::M1;
    let shapes1: Vec<Polygon> = m1.plots.iter().map(|p| p.shape.clone()).collect();
    let after = excess_area_total(&shapes1, farms)?;
    Ok((FitResult { transform: t, objective_before: out.f_identity, objective_after: after, evaluations: out.evaluations }, m1))
}

fn farm_bbox(farms: &FarmIndex) -> Bbox {
    farms.shapes().iter().map(Polygon::bbox).reduce(|a, b| a.union(&b)).expect("farm set is nonempty")
}

/// Narrows the translation range to shifts that keep one bbox inside the other
/// (plus the identity). ea is zero for a map moved off every farm, so the
/// unrestricted box has a trivial minimum wherever the farms end.
fn landing_space(mut space: SearchSpace, map: &Bbox, farms: &Bbox) -> SearchSpace {
    let axes = [(farms.min_x - map.min_x, farms.max_x - map.max_x), (farms.min_y - map.min_y, farms.max_y - map.max_y)];
    for (k, (a, b)) in axes.into_iter().enumerate() {
        space.lo[k] = space.lo[k].max(a.min(b).min(0.0));
        space.hi[k] = space.hi[k].min(a.max(b).max(0.0));
    }
    space
}

fn plot_dtb(q: &Polygon, farms: &FarmIndex) -> Result<f64> {
    Ok(excess_area_plot(q, farms)? / q.perimeter())
}

/// Per-plot fit minimizing dtb about the plot centroid.
pub fn jitterfit_plot(q: &Polygon, farms: &FarmIndex, opts: &JitterOptions) -> Result<(FitResult, Polygon)> {
    opts.validate()?;
    let pivot = q.centroid();
    let objective = |x: Params| plot_dtb(&SimilarityTransform::from_params(x).apply_polygon(q, pivot), farms);
    let out = minimize(&objective, SimilarityTransform::IDENTITY.params(), &opts.space(), &opts.search)?;
    let t = SimilarityTransform::from_params(out.x);
    let moved = if out.x == SimilarityTransform::IDENTITY.params() { q.clone() } else { t.apply_polygon(q, pivot) };
    let after = plot_dtb(&moved, farms)?;
    Ok((FitResult { transform: t, objective_before: out.f_identity, objective_after: after, evaluations: out.evaluations }, moved))
}

/// Independent per-plot fits, in plot order.
pub fn jitterfit_plots(m: &SurveyMap, farms: &FarmIndex, opts: &JitterOptions) -> Result<Vec<(FitResult, Polygon)>> {
    m.plots.par_iter().map(|p| jitterfit_plot(&p.shape, farms, opts)).collect()
}
