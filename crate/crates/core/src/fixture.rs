//! Synthetic villages with known ground truth.
//!
//! A jittered lattice of convex quads is the true cadastre. Farms are the
//! lattice cells (optionally inset), extended by `margin_rings` cells on every
//! side so a shifted map still lands on farms. The survey map is the village
//! part of the lattice after a smooth warp, a similarity transform about the
//! village center and independent noise per lattice point, in that order.
//! Lattice points are shared between neighboring quads, so the survey map
//! stays a partition.

use crate::error::{Error, Result};
use crate::geom::{Bbox, Point, Polygon};
use crate::jitterfit::SimilarityTransform;
use crate::model::{FarmPlot, FarmSet, ProjectionSpec, Stage, SurveyMap, SurveyPlot};
use crate::splinefit::tps::ThinPlateSpline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub n_plots: usize,
    pub spacing_m: f64,
    pub jitter_frac: f64,
    pub margin_rings: usize,
    pub farm_inset_m: f64,
    pub noise_m: f64,
    pub warp_amplitude_m: f64,
    pub transform: SimilarityTransform,
    pub seed: u64,
    pub origin_lat: f64,
    pub origin_lng: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            n_plots: 100,
            spacing_m: 100.0,
            jitter_frac: 0.2,
            margin_rings: 2,
            farm_inset_m: 0.0,
            noise_m: 0.5,
            warp_amplitude_m: 0.0,
            transform: SimilarityTransform::IDENTITY,
            seed: 1,
            origin_lat: 18.52,
            origin_lng: 73.85,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub survey: SurveyMap,
    pub farms: FarmSet,
    /// The undistorted cadastre with the survey's plot ids.
    pub truth: SurveyMap,
    /// Pivot used for `transform` (center of the true village).
    pub pivot: Point,
}

/// Shifts every edge of a counter-clockwise convex ring inward by `d`.
fn inset_convex(ring: &[Point], d: f64) -> Vec<Point> {
    if d == 0.0 {
        return ring.to_vec();
    }
    let n = ring.len();
    let line = |i: usize| {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let e = b.sub(a).scale(1.0 / b.dist(a));
        let nrm = Point::new(-e.y, e.x);
        (a.add(nrm.scale(d)), e)
    };
    (0..n)
        .map(|i| {
            let (p1, e1) = line((i + n - 1) % n);
            let (p2, e2) = line(i);
            let t = p2.sub(p1).cross(e2) / e1.cross(e2);
            p1.add(e1.scale(t))
        })
        .collect()
}

pub fn generate(cfg: &FixtureConfig) -> Result<Fixture> {
    if cfg.n_plots == 0 {
        return Err(Error::Config("n_plots must be positive".into()));
    }
    if !(cfg.spacing_m > 0.0) || !(0.0..0.35).contains(&cfg.jitter_frac) {
        return Err(Error::Config("spacing_m must be positive and jitter_frac in [0, 0.35)".into()));
    }
    let crs = ProjectionSpec::new(cfg.origin_lat, cfg.origin_lng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nx = (cfg.n_plots as f64).sqrt().ceil() as i64;
    let ny = (cfg.n_plots as i64 + nx - 1) / nx;
    let m = cfg.margin_rings as i64;
    let (w, h) = ((nx + 2 * m + 1) as usize, (ny + 2 * m + 1) as usize);
    let s = cfg.spacing_m;
    let j = cfg.jitter_frac * s;
    // lattice point (i, k) for i in -m..=nx+m, k in -m..=ny+m, centered on the village
    let mut lattice = vec![Point::new(0.0, 0.0); w * h];
    for k in 0..h {
        for i in 0..w {
            let (gi, gk) = (i as i64 - m, k as i64 - m);
            lattice[k * w + i] = Point::new(
                (gi as f64 - 0.5 * nx as f64) * s + rng.gen_range(-j..=j),
                (gk as f64 - 0.5 * ny as f64) * s + rng.gen_range(-j..=j),
            );
        }
    }
    let at = |pts: &[Point], gi: i64, gk: i64| pts[((gk + m) as usize) * w + (gi + m) as usize];
    let quad = |pts: &[Point], gi: i64, gk: i64| {
        vec![at(pts, gi, gk), at(pts, gi + 1, gk), at(pts, gi + 1, gk + 1), at(pts, gi, gk + 1)]
    };
    let cells: Vec<(i64, i64)> = (0..ny).flat_map(|gk| (0..nx).map(move |gi| (gi, gk))).take(cfg.n_plots).collect();
    let ids: Vec<String> = (0..cells.len()).map(|c| format!("P{c:04}")).collect();

    let mut farms = Vec::new();
    for gk in -m..ny + m {
        for gi in -m..nx + m {
            let ring = inset_convex(&quad(&lattice, gi, gk), cfg.farm_inset_m);
            let shape = Polygon::from_exterior(ring)?;
            farms.push(FarmPlot::new(format!("F{:+03}{:+03}", gi, gk), shape));
        }
    }

    let village: Vec<Point> = cells.iter().flat_map(|&(gi, gk)| quad(&lattice, gi, gk)).collect();
    let vb = Bbox::of_points(&village);
    let pivot = vb.center();
    let truth_plots: Vec<SurveyPlot> = cells
        .iter()
        .zip(&ids)
        .map(|(&(gi, gk), id)| Ok(SurveyPlot::new(id.clone(), Polygon::from_exterior(quad(&lattice, gi, gk))?)))
        .collect::<Result<_>>()?;

    // smooth warp: thin-plate spline through random displacements on a 3x3 grid, scaled to the amplitude
    let mut moved = lattice.clone();
    if cfg.warp_amplitude_m > 0.0 {
        let mut ctrl = Vec::new();
        let mut disp = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                ctrl.push(Point::new(vb.min_x + 0.5 * a as f64 * vb.width(), vb.min_y + 0.5 * b as f64 * vb.height()));
                let (r, t) = (rng.gen_range(0.2..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
                disp.push(Point::new(r * t.cos(), r * t.sin()));
            }
        }
        let tps = ThinPlateSpline::fit(&ctrl, &disp, 0.0)?;
        let peak = village.iter().map(|&p| tps.eval(p).norm()).fold(0.0, f64::max).max(1e-12);
        let k = cfg.warp_amplitude_m / peak;
        for p in moved.iter_mut() {
            *p = p.add(tps.eval(*p).scale(k));
        }
    }
    for p in moved.iter_mut() {
        *p = cfg.transform.apply(*p, pivot);
    }
    if cfg.noise_m > 0.0 {
        for p in moved.iter_mut() {
            let (r, t) = (cfg.noise_m * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
            *p = p.add(Point::new(r * t.cos(), r * t.sin()));
        }
    }
    let survey_plots: Vec<SurveyPlot> = cells
        .iter()
        .zip(&ids)
        .map(|(&(gi, gk), id)| Ok(SurveyPlot::new(id.clone(), Polygon::from_exterior(quad(&moved, gi, gk))?)))
        .collect::<Result<_>>()?;

    Ok(Fixture {
        survey: SurveyMap::new(survey_plots, Stage::M0, crs)?,
        farms: FarmSet::new(farms, crs)?,
        truth: SurveyMap::new(truth_plots, Stage::M0, crs)?,
        pivot,
    })
}
