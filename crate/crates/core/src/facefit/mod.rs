//! Face-Fit: snap survey-plot corners onto the nodes of a farm-space
//! partition, one plot at a time in decreasing order of excess area.

pub mod partition;

pub use partition::{build_farm_partition, turning_angles_deg, FarmPartition, NodeKind, PartitionOptions};

use crate::error::{Error, Result};
use crate::geom::{centroid_aligned_hausdorff, Point, Polygon};
use crate::metrics::{excess_area_plot, FarmIndex};
use crate::model::{Stage, SurveyMap, SurveyPlot};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Vertices of different plots closer than this are treated as one.
pub const WELD_TOL_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceFitOptions {
    pub corner_angle_min_deg: f64,
    pub snap_radius_m: f64,
    pub beam_width: usize,
    pub candidates_per_corner: usize,
    pub area_tol_frac: f64,
    pub shape_bound_coeff: f64,
    #[serde(flatten)]
    pub partition: PartitionOptions,
}

impl Default for FaceFitOptions {
    fn default() -> Self {
        Self {
            corner_angle_min_deg: 30.0,
            snap_radius_m: 20.0,
            beam_width: 64,
            candidates_per_corner: 6,
            area_tol_frac: 0.03,
            shape_bound_coeff: 0.03,
            partition: PartitionOptions::default(),
        }
    }
}

impl FaceFitOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..180.0).contains(&self.corner_angle_min_deg)
            && self.snap_radius_m >= 0.0
            && self.beam_width > 0
            && self.candidates_per_corner > 0
            && self.area_tol_frac >= 0.0
            && self.shape_bound_coeff >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("facefit options out of range".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerVertex {
    pub plot_id: String,
    pub vertex_index: usize,
    pub position: Point,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapResult {
    pub plot_id: String,
    /// Exterior vertex index to graph node index, for snapped corners only.
    pub mapping: BTreeMap<usize, usize>,
    pub ea_before: f64,
    pub ea_after: f64,
    /// Area change of the output plot relative to its input area.
    pub area_change_frac: f64,
    /// Why the plot was left unchanged, if it was.
    pub note: Option<String>,
}

/// Corners of `q` whose turning angle is at least `corner_angle_min_deg`; none are fixed.
pub fn detect_corners(q: &SurveyPlot, corner_angle_min_deg: f64) -> Vec<CornerVertex> {
    detect_corners_with(q, corner_angle_min_deg, |_| false)
}

/// As [`detect_corners`], with `is_fixed(vertex_index)` marking vertices owned by processed plots.
pub fn detect_corners_with(q: &SurveyPlot, corner_angle_min_deg: f64, is_fixed: impl Fn(usize) -> bool) -> Vec<CornerVertex> {
    ring_corners(&q.id, q.shape.exterior(), corner_angle_min_deg, is_fixed)
}

fn ring_corners(id: &str, ring: &[Point], corner_angle_min_deg: f64, is_fixed: impl Fn(usize) -> bool) -> Vec<CornerVertex> {
    turning_angles_deg(ring)
        .into_iter()
        .enumerate()
        .filter(|(_, a)| *a >= corner_angle_min_deg)
        .map(|(i, _)| CornerVertex { plot_id: id.to_string(), vertex_index: i, position: ring[i], fixed: is_fixed(i) })
        .collect()
}

/// Welded vertex table: shared coordinates plus each plot's exterior as vertex ids.
struct Welded {
    pos: Vec<Point>,
    rings: Vec<Vec<usize>>,
    users: Vec<Vec<usize>>,
}

fn weld(m: &SurveyMap, tol: f64) -> Welded {
    let mut pos: Vec<Point> = Vec::new();
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Point| ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64);
    let mut rings = Vec::with_capacity(m.len());
    for plot in &m.plots {
        let mut ids: Vec<usize> = Vec::new();
        for &p in plot.shape.exterior() {
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(v) = grid.get(&(kx + dx, ky + dy)) {
                        if let Some(&id) = v.iter().find(|&&id| pos[id].dist(p) <= tol) {
                            found = Some(id);
                            break 'search;
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                pos.push(p);
                grid.entry((kx, ky)).or_default().push(pos.len() - 1);
                pos.len() - 1
            });
            if ids.last() != Some(&id) {
                ids.push(id);
            }
        }
        while ids.len() > 1 && ids[0] == ids[ids.len() - 1] {
            ids.pop();
        }
        rings.push(ids);
    }
    let mut users = vec![Vec::new(); pos.len()];
    for (pi, r) in rings.iter().enumerate() {
        for &v in r {
            if users[v].last() != Some(&pi) {
                users[v].push(pi);
            }
        }
    }
    Welded { pos, rings, users }
}

fn shape_from(ids: &[usize], pos: &[Point], holes: &[Vec<Point>]) -> Result<Polygon> {
    Polygon::new(ids.iter().map(|&v| pos[v]).collect(), holes.to_vec())
}

#[derive(Clone)]
struct BeamState {
    /// Node chosen for each corner processed so far.
    choice: Vec<Option<usize>>,
    ea: f64,
    displacement: f64,
}

fn state_order(a: &BeamState, b: &BeamState) -> Ordering {
    a.ea.total_cmp(&b.ea)
        .then(a.displacement.total_cmp(&b.displacement))
        .then_with(|| {
            // unmapped sorts after every node index
            let k = |c: &Option<usize>| c.map_or(usize::MAX, |n| n);
            a.choice.iter().map(k).cmp(b.choice.iter().map(k))
        })
}

/// Snaps plots of `m` onto the partition's graph nodes. Excess area is measured against `farms`.
pub fn facefit_map(
    m: &SurveyMap,
    part: &FarmPartition,
    farms: &FarmIndex,
    opts: &FaceFitOptions,
) -> Result<(SurveyMap, Vec<SnapResult>)> {
    opts.validate()?;
    let w = weld(m, WELD_TOL_M);
    let mut pos = w.pos.clone();
    let input_area: Vec<f64> = m.plots.iter().map(|p| p.shape.area()).collect();
    let holes: Vec<&[Vec<Point>]> = m.plots.iter().map(|p| p.shape.holes()).collect();
    let mut fixed = vec![false; pos.len()];

    let initial: Vec<f64> = m.plots.iter().map(|p| excess_area_plot(&p.shape, farms)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| initial[b].total_cmp(&initial[a]).then_with(|| m.plots[a].id.cmp(&m.plots[b].id)));

    let mut results: Vec<Option<SnapResult>> = vec![None; m.len()];
    for &pi in &order {
        let ids = &w.rings[pi];
        let current = shape_from(ids, &pos, holes[pi])?;
        let ea_before = excess_area_plot(&current, farms)?;
        let raw: Vec<Point> = ids.iter().map(|&v| pos[v]).collect();
        let mut corners = ring_corners(&m.plots[pi].id, &raw, opts.corner_angle_min_deg, |i| fixed[ids[i]]);
        corners.retain(|c| !c.fixed);
        // clockwise from the lowest index
        corners.sort_by_key(|c| c.vertex_index);
        if corners.len() > 1 {
            corners[1..].reverse();
        }
        let options: Vec<Vec<(usize, f64)>> = corners.iter().map(|c| candidate_nodes(c.position, part, opts)).collect();

        let outcome = if corners.is_empty() {
            Err("every corner is already fixed")
        } else if options.iter().all(|o| o.is_empty()) {
            Err("no graph node within snap radius")
        } else {
            let beam = beam_search(&corners, &options, ids, &pos, holes[pi], &part.graph_nodes, farms, opts)?;
            let ctx = Context { m, w: &w, holes: &holes, input_area: &input_area, nodes: &part.graph_nodes, opts };
            choose(&ctx, &beam, &corners, pi, &pos, ea_before).ok_or("no improving mapping passed the area and shape constraints")
        };

        let mut mapping = BTreeMap::new();
        let mut ea_after = ea_before;
        let mut note = None;
        match outcome {
            Ok((state, ea)) => {
                for (c, n) in corners.iter().zip(&state.choice) {
                    if let Some(n) = n {
                        pos[ids[c.vertex_index]] = part.graph_nodes[*n];
                        mapping.insert(c.vertex_index, *n);
                    }
                }
                ea_after = ea;
            }
            Err(why) => note = Some(why.to_string()),
        }
        for &v in ids {
            fixed[v] = true;
        }
        results[pi] = Some(SnapResult {
            plot_id: m.plots[pi].id.clone(),
            mapping,
            ea_before,
            ea_after,
            area_change_frac: 0.0,
            note,
        });
    }

    let shapes: Vec<Polygon> =
        w.rings.iter().zip(&holes).map(|(ids, h)| shape_from(ids, &pos, h)).collect::<Result<_>>()?;
    let mut out: Vec<SnapResult> = results.into_iter().map(|r| r.expect("every plot is processed")).collect();
    for ((r, s), a0) in out.iter_mut().zip(&shapes).zip(&input_area) {
        r.area_change_frac = (s.area() - a0).abs() / a0;
    }
    Ok((m.with_shapes(shapes, Stage::M2), out))
}

/// Up to `candidates_per_corner` nodes within the snap radius, nearest first.
fn candidate_nodes(p: Point, part: &FarmPartition, opts: &FaceFitOptions) -> Vec<(usize, f64)> {
    let mut c: Vec<(usize, f64)> = part
        .graph_nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (i, n.dist(p)))
        .filter(|(_, d)| *d <= opts.snap_radius_m)
        .collect();
    c.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    c.truncate(opts.candidates_per_corner);
    c
}

#[allow(clippy::too_many_arguments)]
fn beam_search(
    corners: &[CornerVertex],
    options: &[Vec<(usize, f64)>],
    ids: &[usize],
    pos: &[Point],
    holes: &[Vec<Point>],
    nodes: &[Point],
    farms: &FarmIndex,
    opts: &FaceFitOptions,
) -> Result<Vec<BeamState>> {
    let base_ea = excess_area_plot(&shape_from(ids, pos, holes)?, farms)?;
    let mut beam = vec![BeamState { choice: Vec::new(), ea: base_ea, displacement: 0.0 }];
    for (ci, _) in corners.iter().enumerate() {
        let mut next = Vec::new();
        for st in &beam {
            let mut stay = st.clone();
            stay.choice.push(None);
            next.push(stay);
            for &(n, d) in &options[ci] {
                if st.choice.contains(&Some(n)) {
                    continue;
                }
                let mut choice = st.choice.clone();
                choice.push(Some(n));
                let ring = moved_ring(corners, &choice, ids, pos, nodes);
                let Ok(shape) = Polygon::new(ring, holes.to_vec()) else { continue };
                let ea = excess_area_plot(&shape, farms)?;
                next.push(BeamState { choice, ea, displacement: st.displacement + d });
            }
        }
        next.sort_by(state_order);
        next.truncate(opts.beam_width);
        beam = next;
    }
    Ok(beam)
}

/// Exterior of a plot with the chosen corners moved onto their nodes.
fn moved_ring(corners: &[CornerVertex], choice: &[Option<usize>], ids: &[usize], pos: &[Point], nodes: &[Point]) -> Vec<Point> {
    let mut ring: Vec<Point> = ids.iter().map(|&v| pos[v]).collect();
    for (c, n) in corners.iter().zip(choice) {
        if let Some(n) = n {
            ring[c.vertex_index] = nodes[*n];
        }
    }
    ring
}

struct Context<'a> {
    m: &'a SurveyMap,
    w: &'a Welded,
    holes: &'a [&'a [Vec<Point>]],
    input_area: &'a [f64],
    nodes: &'a [Point],
    opts: &'a FaceFitOptions,
}

/// First state in beam order that improves on `ea_before` and keeps every affected plot
/// valid, within the area tolerance and within the shape bound.
fn choose(ctx: &Context, beam: &[BeamState], corners: &[CornerVertex], pi: usize, pos: &[Point], ea_before: f64) -> Option<(BeamState, f64)> {
    let ids = &ctx.w.rings[pi];
    for st in beam {
        if st.ea >= ea_before {
            break;
        }
        if st.choice.iter().all(|c| c.is_none()) {
            continue;
        }
        let mut trial = pos.to_vec();
        let mut affected = BTreeSet::new();
        for (c, n) in corners.iter().zip(&st.choice) {
            if let Some(n) = n {
                let v = ids[c.vertex_index];
                trial[v] = ctx.nodes[*n];
                affected.extend(ctx.w.users[v].iter().copied());
            }
        }
        let ok = affected.iter().all(|&j| {
            let Ok(s) = shape_from(&ctx.w.rings[j], &trial, ctx.holes[j]) else { return false };
            let a0 = ctx.input_area[j];
            (s.area() - a0).abs() <= ctx.opts.area_tol_frac * a0
                && centroid_aligned_hausdorff(&s, &ctx.m.plots[j].shape) <= ctx.opts.shape_bound_coeff * a0.sqrt()
        });
        if ok {
            return Some((st.clone(), st.ea));
        }
    }
    None
}
