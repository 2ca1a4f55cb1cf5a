//! Farm-space partition: a generalized Voronoi diagram of farm polygons,
//! approximated by densely sampling farm boundaries and merging the point
//! Voronoi cells of each farm's samples.

use crate::error::{Error, Result};
use crate::geom::delaunay::{circumcenter, triangulate};
use crate::geom::{closest_point_on_segment, intersection, Bbox, MultiPolygon, Point, Polygon};
use crate::model::FarmSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

const FRAME: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionOptions {
    pub sample_spacing_m: f64,
    pub node_merge_m: f64,
    pub corner_angle_min_deg: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self { sample_spacing_m: 1.0, node_merge_m: 1.0, corner_angle_min_deg: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    /// Three or more farm cells meet here.
    Junction,
    /// A farm corner projected onto its own cell boundary.
    CornerProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarmPartition {
    pub bbox: Bbox,
    /// Cell of each farm clipped to `bbox`, in farm order; farms outside the box get an empty cell.
    pub cells: Vec<(String, MultiPolygon)>,
    pub graph_nodes: Vec<Point>,
    pub node_kinds: Vec<NodeKind>,
    pub graph_edges: Vec<(usize, usize)>,
}

impl FarmPartition {
    pub fn junction_count(&self) -> usize {
        self.node_kinds.iter().filter(|k| **k == NodeKind::Junction).count()
    }
}

/// Turning angle at each vertex of a ring, degrees in [0, 180].
pub fn turning_angles_deg(ring: &[Point]) -> Vec<f64> {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let a = ring[i].sub(ring[(i + n - 1) % n]);
            let b = ring[(i + 1) % n].sub(ring[i]);
            a.cross(b).atan2(a.dot(b)).abs().to_degrees()
        })
        .collect()
}

fn left_normal(a: Point, b: Point) -> Point {
    let d = b.sub(a);
    let l = d.norm();
    Point::new(-d.y / l, d.x / l)
}

/// Boundary samples of a counter-clockwise ring, pushed inward by `delta`.
fn sample_ring(ring: &[Point], spacing: f64, delta: f64, out: &mut Vec<Point>) {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let prev = ring[(i + n - 1) % n];
        let ne = left_normal(a, b);
        let nv = ne.add(left_normal(prev, a));
        let nv = if nv.norm() > 1e-12 { nv.scale(1.0 / nv.norm()) } else { ne };
        out.push(a.add(nv.scale(delta)));
        let k = (a.dist(b) / spacing).ceil().max(1.0) as usize;
        for t in 1..k {
            out.push(a.lerp(b, t as f64 / k as f64).add(ne.scale(delta)));
        }
    }
}

/// Drops near-duplicate consecutive points and zero-width spikes.
fn tidy_ring(mut pts: Vec<Point>, tol: f64) -> Vec<Point> {
    loop {
        let before = pts.len();
        let mut out: Vec<Point> = Vec::with_capacity(pts.len());
        for p in pts {
            if out.last().is_none_or(|q: &Point| q.dist(p) > tol) {
                out.push(p);
            }
        }
        while out.len() > 1 && out[0].dist(out[out.len() - 1]) <= tol {
            out.pop();
        }
        let n = out.len();
        if n >= 3 {
            let mut keep = vec![true; n];
            let mut i = 0;
            while i < n {
                let (a, c) = (out[(i + n - 1) % n], out[(i + 1) % n]);
                if a.dist(c) <= tol && keep[(i + n - 1) % n] {
                    keep[i] = false;
                    keep[(i + 1) % n] = false;
                    i += 2;
                    continue;
                }
                i += 1;
            }
            out = out.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
        }
        pts = out;
        if pts.len() == before || pts.len() < 3 {
            return pts;
        }
    }
}

pub fn build_farm_partition(farms: &FarmSet, bbox: &Bbox, opts: &PartitionOptions) -> Result<FarmPartition> {
    if farms.len() < 2 {
        return Err(Error::TooFewSites(farms.len()));
    }
    if bbox.is_empty() || !(opts.sample_spacing_m > 0.0) {
        return Err(Error::Config("partition needs a non-empty box and a positive sample spacing".into()));
    }
    let spacing = opts.sample_spacing_m;
    let delta = 1e-3 * spacing;
    let mut pts = Vec::new();
    let mut owner: Vec<u32> = Vec::new();
    for (fi, f) in farms.plots.iter().enumerate() {
        let start = pts.len();
        sample_ring(f.shape.exterior(), spacing, delta, &mut pts);
        owner.resize(pts.len(), fi as u32);
        debug_assert!(pts.len() > start);
    }
    // a frame of dummy sites far enough out that no point of the box is closer to it than to a farm
    let reach = bbox.union(&farms.bbox());
    let d = 2.0 * reach.diagonal() + 10.0;
    let outer = reach.expand(d);
    let per_side = 8;
    for k in 0..per_side {
        let t = k as f64 / per_side as f64;
        pts.push(Point::new(outer.min_x + t * outer.width(), outer.min_y));
        pts.push(Point::new(outer.max_x, outer.min_y + t * outer.height()));
        pts.push(Point::new(outer.max_x - t * outer.width(), outer.max_y));
        pts.push(Point::new(outer.min_x, outer.max_y - t * outer.height()));
    }
    owner.resize(pts.len(), FRAME);

    let tri = triangulate(&pts);
    let own = |v: usize| owner[tri.canonical[v]];
    let cc: Vec<Point> = tri.triangles.iter().map(|t| circumcenter(pts[t[0]], pts[t[1]], pts[t[2]])).collect();

    // directed Voronoi edges per farm, keyed by their starting triangle
    let mut next: Vec<HashMap<usize, usize>> = vec![HashMap::new(); farms.len()];
    let mut starts: Vec<Vec<usize>> = vec![Vec::new(); farms.len()];
    for (ti, t) in tri.triangles.iter().enumerate() {
        for e in 0..3 {
            let (u, w) = (own(t[e]), own(t[(e + 1) % 3]));
            if u == w || u == FRAME {
                continue;
            }
            let from = tri.neighbors[ti][e]
                .ok_or_else(|| Error::InvalidGeometry("farm samples reach the triangulation hull".into()))?;
            if next[u as usize].insert(from, ti).is_none() {
                starts[u as usize].push(from);
            }
        }
    }
    let bbox_poly = bbox.to_polygon();
    let per_farm: Vec<((String, MultiPolygon), Vec<Vec<usize>>)> = farms
        .plots
        .par_iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut seen = BTreeSet::new();
            let mut rings: Vec<Vec<Point>> = Vec::new();
            let mut chains = Vec::new();
            for &s in &starts[fi] {
                if seen.contains(&s) {
                    continue;
                }
                let mut chain = vec![s];
                seen.insert(s);
                let mut cur = s;
                while let Some(&n) = next[fi].get(&cur) {
                    if n == s {
                        break;
                    }
                    if !seen.insert(n) {
                        return Err(Error::InvalidGeometry(format!("farm {}: broken cell boundary", f.id)));
                    }
                    chain.push(n);
                    cur = n;
                }
                let ring = tidy_ring(chain.iter().map(|&t| cc[t]).collect(), 1e-7);
                chains.push(chain);
                if ring.len() >= 3 {
                    rings.push(ring);
                }
            }
            let cell = cell_polygon(rings).map_err(|e| Error::InvalidGeometry(format!("farm {} cell: {e}", f.id)))?;
            Ok(((f.id.clone(), intersection(&cell, &bbox_poly)?), chains))
        })
        .collect::<Result<_>>()?;
    let (cells, chains): (Vec<_>, Vec<_>) = per_farm.into_iter().unzip();
    let chains: Vec<Vec<usize>> = chains.into_iter().flatten().collect();

    // junctions: triangles whose corners belong to three different farms
    let mut cand: Vec<(Point, usize)> = Vec::new();
    for (ti, t) in tri.triangles.iter().enumerate() {
        let o = [own(t[0]), own(t[1]), own(t[2])];
        if o.contains(&FRAME) || o[0] == o[1] || o[1] == o[2] || o[0] == o[2] {
            continue;
        }
        if bbox.contains(cc[ti]) {
            cand.push((cc[ti], ti));
        }
    }
    cand.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)).then(a.1.cmp(&b.1)));
    let mut nodes: Vec<Point> = Vec::new();
    let mut node_kinds = Vec::new();
    let mut members: Vec<(Point, usize)> = Vec::new();
    let mut tri_node: HashMap<usize, usize> = HashMap::new();
    let mut cluster_of = vec![usize::MAX; cand.len()];
    for i in 0..cand.len() {
        if cluster_of[i] != usize::MAX {
            continue;
        }
        let id = nodes.len();
        let mut stack = vec![i];
        cluster_of[i] = id;
        let (mut sum, mut count) = (Point::new(0.0, 0.0), 0usize);
        while let Some(k) = stack.pop() {
            sum = sum.add(cand[k].0);
            count += 1;
            tri_node.insert(cand[k].1, id);
            // candidates are sorted by x, so scan both directions until x leaves the merge radius
            for j in (0..k).rev().take_while(|&j| cand[k].0.x - cand[j].0.x <= opts.node_merge_m).chain(
                (k + 1..cand.len()).take_while(|&j| cand[j].0.x - cand[k].0.x <= opts.node_merge_m),
            ) {
                if cluster_of[j] == usize::MAX && cand[j].0.dist(cand[k].0) <= opts.node_merge_m {
                    cluster_of[j] = id;
                    stack.push(j);
                }
            }
        }
        nodes.push(sum.scale(1.0 / count as f64));
        node_kinds.push(NodeKind::Junction);
        members.push((cand[i].0, count));
    }

    // farm corners projected onto their own cell boundary
    for (fi, f) in farms.plots.iter().enumerate() {
        let ring = f.shape.exterior();
        let angles = turning_angles_deg(ring);
        for (v, &a) in ring.iter().zip(&angles) {
            if a < opts.corner_angle_min_deg {
                continue;
            }
            let mut best: Option<(f64, Point)> = None;
            for part in &cells[fi].1.parts {
                for r in part.rings() {
                    for k in 0..r.len() {
                        let c = closest_point_on_segment(*v, r[k], r[(k + 1) % r.len()]);
                        let dd = c.dist(*v);
                        if best.is_none_or(|b| dd < b.0) {
                            best = Some((dd, c));
                        }
                    }
                }
            }
            if let Some((_, c)) = best {
                if nodes.iter().all(|n| n.dist(c) > opts.node_merge_m) {
                    nodes.push(c);
                    node_kinds.push(NodeKind::CornerProjection);
                }
            }
        }
    }

    // edges: consecutive junctions along each cell boundary chain
    let mut edges = BTreeSet::new();
    for chain in &chains {
        let hits: Vec<usize> = chain.iter().filter_map(|t| tri_node.get(t).copied()).collect();
        for k in 0..hits.len() {
            let (a, b) = (hits[k], hits[(k + 1) % hits.len()]);
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    Ok(FarmPartition { bbox: *bbox, cells, graph_nodes: nodes, node_kinds, graph_edges: edges.into_iter().collect() })
}

/// The largest counter-clockwise ring becomes the exterior; clockwise rings inside it become holes.
fn cell_polygon(rings: Vec<Vec<Point>>) -> Result<Polygon> {
    let mut shells: Vec<(f64, Vec<Point>)> = Vec::new();
    let mut holes: Vec<Vec<Point>> = Vec::new();
    for r in rings {
        let a = crate::geom::ring_signed_area(&r);
        if a > 0.0 {
            shells.push((a, r));
        } else if a < 0.0 {
            holes.push(r);
        }
    }
    let (_, ext) = shells
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::DegenerateGeometry("cell has no outer boundary".into()))?;
    Polygon::new(ext, holes)
}
