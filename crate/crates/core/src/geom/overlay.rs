//! Boolean overlay of two regions.
//!
//! Both operands are split at every mutual intersection (endpoints closer than
//! [`SNAP_TOL`] to the other boundary become shared nodes), each resulting
//! sub-edge is classified against the other operand, and the result boundary
//! is the set of sub-edges selected by the operation. Because every operand
//! keeps its interior on the left, result areas and first moments follow from
//! Green's theorem over the selected directed edges; rings are only assembled
//! when geometry is requested.

use super::{
    orient, point_in_rings, point_segment_distance, ring_perimeter, ring_signed_area, Bbox, MultiPolygon, Point,
    Polygon, Region, SNAP_TOL,
};
use crate::error::{Error, Result};
use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Intersection,
    /// a − b
    Difference,
    /// b − a
    ReverseDifference,
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayAreas {
    pub intersection: f64,
    pub a_minus_b: f64,
    pub b_minus_a: f64,
}

impl OverlayAreas {
    pub fn union(&self) -> f64 {
        self.intersection + self.a_minus_b + self.b_minus_a
    }

    pub fn iou(&self) -> f64 {
        let u = self.union();
        if u > 0.0 {
            self.intersection / u
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Inside,
    Outside,
    SharedSame,
    SharedOpposite,
}

#[derive(Debug, Clone, Copy)]
struct SubEdge {
    u: u32,
    v: u32,
    loc: Loc,
}

struct NodeTable {
    nodes: Vec<Point>,
    grid: HashMap<(i64, i64), Vec<u32>>,
    cell: f64,
}

impl NodeTable {
    fn new(cap: usize) -> Self {
        Self { nodes: Vec::with_capacity(cap), grid: HashMap::with_capacity(cap), cell: SNAP_TOL * 2.0 }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn find(&self, p: Point) -> Option<u32> {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if self.nodes[id as usize].dist(p) <= SNAP_TOL {
                            return Some(id);
                        }
                    }
                }
            }
        }
        None
    }

    fn node(&mut self, p: Point) -> u32 {
        if let Some(id) = self.find(p) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(p);
        let k = self.key(p);
        self.grid.entry(k).or_default().push(id);
        id
    }
}

struct Seg {
    u: u32,
    v: u32,
    p: Point,
    q: Point,
    bbox: Bbox,
    splits: Vec<(f64, u32)>,
}

impl Seg {
    fn param(&self, x: Point) -> f64 {
        let d = self.q.sub(self.p);
        x.sub(self.p).dot(d) / d.dot(d)
    }
}

fn segments_of(rings: &[&[Point]], nt: &mut NodeTable) -> Vec<Seg> {
    let mut segs = Vec::new();
    for ring in rings {
        let ids: Vec<u32> = ring.iter().map(|&p| nt.node(p)).collect();
        let n = ids.len();
        for i in 0..n {
            let (u, v) = (ids[i], ids[(i + 1) % n]);
            if u == v {
                continue;
            }
            let (p, q) = (nt.nodes[u as usize], nt.nodes[v as usize]);
            segs.push(Seg { u, v, p, q, bbox: Bbox::of_points([&p, &q]).expand(SNAP_TOL), splits: Vec::new() });
        }
    }
    segs
}

fn intersect_pair(a: &mut Seg, b: &mut Seg, nt: &mut NodeTable) {
    let mut touched = false;
    for (node, pt) in [(b.u, b.p), (b.v, b.q)] {
        if node == a.u || node == a.v {
            touched = true;
        } else if point_segment_distance(pt, a.p, a.q) <= SNAP_TOL {
            a.splits.push((a.param(pt), node));
            touched = true;
        }
    }
    for (node, pt) in [(a.u, a.p), (a.v, a.q)] {
        if node == b.u || node == b.v {
            touched = true;
        } else if point_segment_distance(pt, b.p, b.q) <= SNAP_TOL {
            b.splits.push((b.param(pt), node));
            touched = true;
        }
    }
    if touched {
        return;
    }
    let o1 = orient(a.p, a.q, b.p);
    let o2 = orient(a.p, a.q, b.q);
    if !(o1 > 0.0 && o2 < 0.0 || o1 < 0.0 && o2 > 0.0) {
        return;
    }
    let o3 = orient(b.p, b.q, a.p);
    let o4 = orient(b.p, b.q, a.q);
    if !(o3 > 0.0 && o4 < 0.0 || o3 < 0.0 && o4 > 0.0) {
        return;
    }
    let t = o1 / (o1 - o2);
    let x = b.p.lerp(b.q, t);
    let node = nt.node(x);
    let xp = nt.nodes[node as usize];
    if node != a.u && node != a.v {
        a.splits.push((a.param(xp), node));
    }
    if node != b.u && node != b.v {
        b.splits.push((b.param(xp), node));
    }
}

fn sub_edges(segs: &mut [Seg]) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(segs.len() * 2);
    for s in segs.iter_mut() {
        if s.splits.is_empty() {
            out.push((s.u, s.v));
            continue;
        }
        s.splits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut prev = s.u;
        for &(_, n) in &s.splits {
            if n != prev && n != s.v {
                out.push((prev, n));
                prev = n;
            }
        }
        if prev != s.v {
            out.push((prev, s.v));
        }
    }
    out
}

/// Removes edge pairs (u,v)/(v,u) that occur inside one operand, e.g. where
/// two parts of a multipolygon touch along an edge. Returns the kept edges and
/// the set of removed internal edges.
fn cancel_internal(edges: Vec<(u32, u32)>) -> (Vec<(u32, u32)>, HashSet<(u32, u32)>) {
    let mut count: HashMap<(u32, u32), i32> = HashMap::with_capacity(edges.len());
    for &e in &edges {
        *count.entry(e).or_insert(0) += 1;
    }
    let mut internal = HashSet::new();
    for &(u, v) in &edges {
        if count.contains_key(&(v, u)) {
            internal.insert((u, v));
        }
    }
    if internal.is_empty() {
        return (edges, internal);
    }
    let kept = edges.into_iter().filter(|e| !internal.contains(e)).collect();
    (kept, internal)
}

struct Arrangement {
    nodes: Vec<Point>,
    origin: Point,
    a: Vec<SubEdge>,
    b: Vec<SubEdge>,
}

fn classify(
    edges: &[(u32, u32)],
    other: &HashSet<(u32, u32)>,
    other_internal: &HashSet<(u32, u32)>,
    other_rings: &[&[Point]],
    nodes: &[Point],
) -> Vec<SubEdge> {
    edges
        .iter()
        .map(|&(u, v)| {
            let loc = if other.contains(&(u, v)) {
                Loc::SharedSame
            } else if other.contains(&(v, u)) {
                Loc::SharedOpposite
            } else if other_internal.contains(&(u, v)) || other_internal.contains(&(v, u)) {
                Loc::Inside
            } else {
                let m = nodes[u as usize].lerp(nodes[v as usize], 0.5);
                if point_in_rings(m, other_rings.iter().copied()) {
                    Loc::Inside
                } else {
                    Loc::Outside
                }
            };
            SubEdge { u, v, loc }
        })
        .collect()
}

impl Arrangement {
    fn build(ra: &[&[Point]], rb: &[&[Point]]) -> Self {
        let cap = ra.iter().chain(rb).map(|r| r.len()).sum::<usize>() * 2;
        let mut nt = NodeTable::new(cap);
        let mut sa = segments_of(ra, &mut nt);
        let mut sb = segments_of(rb, &mut nt);
        for x in sa.iter_mut() {
            for y in sb.iter_mut() {
                if x.bbox.intersects(&y.bbox) {
                    intersect_pair(x, y, &mut nt);
                }
            }
        }
        let (ea, ia) = cancel_internal(sub_edges(&mut sa));
        let (eb, ib) = cancel_internal(sub_edges(&mut sb));
        let set_a: HashSet<(u32, u32)> = ea.iter().copied().collect();
        let set_b: HashSet<(u32, u32)> = eb.iter().copied().collect();
        let a = classify(&ea, &set_b, &ib, rb, &nt.nodes);
        let b = classify(&eb, &set_a, &ia, ra, &nt.nodes);
        let origin = nt.nodes.first().copied().unwrap_or_default();
        Self { nodes: nt.nodes, origin, a, b }
    }

    fn select(&self, op: Op) -> Vec<(u32, u32)> {
        use Loc::*;
        let mut out = Vec::new();
        let keep_a = |l: Loc| match op {
            Op::Intersection => matches!(l, Inside | SharedSame),
            Op::Difference => matches!(l, Outside | SharedOpposite),
            Op::ReverseDifference => false,
            Op::Union => matches!(l, Outside | SharedSame),
        };
        let keep_b = |l: Loc| match op {
            Op::Intersection => l == Inside,
            Op::Difference => false,
            Op::ReverseDifference => matches!(l, Outside | SharedOpposite),
            Op::Union => l == Outside,
        };
        for e in &self.a {
            if keep_a(e.loc) {
                out.push((e.u, e.v));
            } else if op == Op::ReverseDifference && e.loc == Inside {
                out.push((e.v, e.u));
            }
        }
        for e in &self.b {
            if keep_b(e.loc) {
                out.push((e.u, e.v));
            } else if op == Op::Difference && e.loc == Inside {
                out.push((e.v, e.u));
            }
        }
        out
    }

    fn area_of(&self, edges: &[(u32, u32)]) -> f64 {
        let o = self.origin;
        0.5 * edges
            .iter()
            .map(|&(u, v)| self.nodes[u as usize].sub(o).cross(self.nodes[v as usize].sub(o)))
            .sum::<f64>()
    }

    /// (area, centroid) of the region bounded by `edges`.
    fn moments_of(&self, edges: &[(u32, u32)]) -> (f64, Option<Point>) {
        let o = self.origin;
        let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
        for &(u, v) in edges {
            let p = self.nodes[u as usize].sub(o);
            let q = self.nodes[v as usize].sub(o);
            let c = p.cross(q);
            a += c;
            mx += (p.x + q.x) * c;
            my += (p.y + q.y) * c;
        }
        let a = 0.5 * a;
        if a <= 0.0 {
            return (a, None);
        }
        (a, Some(Point::new(o.x + mx / (6.0 * a), o.y + my / (6.0 * a))))
    }
}

fn rings_area(rings: &[&[Point]]) -> f64 {
    rings.iter().map(|r| ring_signed_area(r)).sum()
}

fn rings_perimeter(rings: &[&[Point]]) -> f64 {
    rings.iter().map(|r| ring_perimeter(r)).sum()
}

fn build_checked(a: &dyn RegionDyn, b: &dyn RegionDyn) -> Result<(Arrangement, OverlayAreas)> {
    let ra = a.rings();
    let rb = b.rings();
    let arr = Arrangement::build(&ra, &rb);
    let i = arr.area_of(&arr.select(Op::Intersection));
    let amb = arr.area_of(&arr.select(Op::Difference));
    let bma = arr.area_of(&arr.select(Op::ReverseDifference));
    let (area_a, area_b) = (rings_area(&ra), rings_area(&rb));
    let tol = 1e-9 * area_a.max(area_b) + SNAP_TOL * (rings_perimeter(&ra) + rings_perimeter(&rb)) + 1e-12;
    let bad = |x: f64| x < -tol || !x.is_finite();
    if bad(i) || bad(amb) || bad(bma) || (i + amb - area_a).abs() > tol || (i + bma - area_b).abs() > tol {
        return Err(Error::OverlayFailure(format!(
            "area not conserved: |a|={area_a}, |b|={area_b}, a∩b={i}, a−b={amb}, b−a={bma}"
        )));
    }
    let areas = OverlayAreas { intersection: i.max(0.0), a_minus_b: amb.max(0.0), b_minus_a: bma.max(0.0) };
    Ok((arr, areas))
}

// object-safe view over `Region` so the heavy lifting is not monomorphized per operand pair
trait RegionDyn {
    fn rings(&self) -> Vec<&[Point]>;
}

impl<T: Region> RegionDyn for T {
    fn rings(&self) -> Vec<&[Point]> {
        self.ring_slices()
    }
}

/// Areas of a∩b, a−b and b−a from a single arrangement.
pub fn overlay_areas(a: &impl Region, b: &impl Region) -> Result<OverlayAreas> {
    if !a.region_bbox().intersects(&b.region_bbox()) {
        return Ok(OverlayAreas { intersection: 0.0, a_minus_b: a.region_area(), b_minus_a: b.region_area() });
    }
    build_checked(a, b).map(|(_, areas)| areas)
}

/// Area and centroid of `op(a, b)`; the centroid is `None` for an empty result.
pub fn overlay_moments(a: &impl Region, b: &impl Region, op: Op) -> Result<(f64, Option<Point>)> {
    let (arr, _) = build_checked(a, b)?;
    let (area, c) = arr.moments_of(&arr.select(op));
    Ok((area.max(0.0), c))
}

pub fn overlay(a: &impl Region, b: &impl Region, op: Op) -> Result<MultiPolygon> {
    if !a.region_bbox().intersects(&b.region_bbox()) {
        let parts = |r: &dyn RegionDyn| -> Result<MultiPolygon> { rebuild(r.rings()) };
        return match op {
            Op::Intersection => Ok(MultiPolygon::empty()),
            Op::Difference => parts(a),
            Op::ReverseDifference => parts(b),
            Op::Union => {
                let mut m = parts(a)?;
                m.parts.extend(parts(b)?.parts);
                Ok(m)
            }
        };
    }
    let (arr, _) = build_checked(a, b)?;
    let edges = arr.select(op);
    let expected = arr.area_of(&edges);
    let mp = assemble(&arr.nodes, edges)?;
    let got = mp.area();
    if (got - expected).abs() > 1e-9 * expected.abs().max(1.0) {
        return Err(Error::OverlayFailure(format!("ring assembly lost area: {got} vs {expected}")));
    }
    Ok(mp)
}

fn rebuild(rings: Vec<&[Point]>) -> Result<MultiPolygon> {
    let mut nt = NodeTable::new(64);
    let mut edges = Vec::new();
    for r in rings {
        let ids: Vec<u32> = r.iter().map(|&p| nt.node(p)).collect();
        for i in 0..ids.len() {
            let (u, v) = (ids[i], ids[(i + 1) % ids.len()]);
            if u != v {
                edges.push((u, v));
            }
        }
    }
    assemble(&nt.nodes, edges)
}

pub fn intersection(a: &impl Region, b: &impl Region) -> Result<MultiPolygon> {
    overlay(a, b, Op::Intersection)
}

/// a − b
pub fn difference(a: &impl Region, b: &impl Region) -> Result<MultiPolygon> {
    overlay(a, b, Op::Difference)
}

pub fn union(a: &impl Region, b: &impl Region) -> Result<MultiPolygon> {
    overlay(a, b, Op::Union)
}

/// Links directed boundary edges into rings and groups them into polygons.
/// Removes vertices lying exactly on the straight segment between their neighbors.
fn drop_straight_vertices(mut pts: Vec<Point>) -> Vec<Point> {
    let mut changed = true;
    while changed && pts.len() > 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            if orient(a, b, c) == 0.0 && b.sub(a).dot(c.sub(b)) > 0.0 {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

pub(crate) fn assemble(nodes: &[Point], edges: Vec<(u32, u32)>) -> Result<MultiPolygon> {
    let (edges, _) = cancel_internal(edges);
    let mut out: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, &(u, _)) in edges.iter().enumerate() {
        out.entry(u).or_default().push(i);
    }
    let angle = |from: u32, to: u32| {
        let d = nodes[to as usize].sub(nodes[from as usize]);
        d.y.atan2(d.x)
    };
    let mut used = vec![false; edges.len()];
    let mut walks: Vec<Vec<u32>> = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut walk = vec![edges[start].0];
        let (u0, _) = edges[start];
        let mut cur = start;
        loop {
            let (u, v) = edges[cur];
            if v == u0 {
                break;
            }
            walk.push(v);
            let back = angle(v, u);
            let next = out.get(&v).and_then(|cands| {
                cands
                    .iter()
                    .copied()
                    .filter(|&c| !used[c])
                    .map(|c| {
                        let mut cw = (back - angle(v, edges[c].1)).rem_euclid(TAU);
                        if cw <= 0.0 {
                            cw = TAU;
                        }
                        (cw, c)
                    })
                    .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                    .map(|(_, c)| c)
            });
            match next {
                Some(c) => {
                    used[c] = true;
                    cur = c;
                }
                None => {
                    return Err(Error::OverlayFailure("open boundary chain during ring assembly".into()));
                }
            }
        }
        walks.push(walk);
    }

    let mut rings: Vec<Vec<Point>> = Vec::new();
    for w in walks {
        for r in split_at_repeats(w) {
            if r.len() < 3 {
                continue;
            }
            let pts = drop_straight_vertices(r.iter().map(|&i| nodes[i as usize]).collect());
            if pts.len() < 3 {
                continue;
            }
            let scale = Bbox::of_points(&pts).diagonal();
            if ring_signed_area(&pts).abs() <= 1e-14 * scale * scale {
                continue;
            }
            rings.push(pts);
        }
    }

    let (mut shells, mut holes): (Vec<(Vec<Point>, f64)>, Vec<Vec<Point>>) = (Vec::new(), Vec::new());
    for r in rings {
        let a = ring_signed_area(&r);
        if a > 0.0 {
            shells.push((r, a));
        } else {
            holes.push(r);
        }
    }
    let mut shell_holes: Vec<Vec<Vec<Point>>> = vec![Vec::new(); shells.len()];
    for h in holes {
        let hb = Bbox::of_points(&h);
        let mut best: Option<(usize, f64)> = None;
        for (si, (s, sa)) in shells.iter().enumerate() {
            if !Bbox::of_points(s).expand(SNAP_TOL).intersects(&hb) {
                continue;
            }
            if hole_inside(&h, s) && best.is_none_or(|(_, ba)| *sa < ba) {
                best = Some((si, *sa));
            }
        }
        match best {
            Some((si, _)) => shell_holes[si].push(h),
            None => return Err(Error::OverlayFailure("hole ring without an enclosing shell".into())),
        }
    }
    let mut parts: Vec<Polygon> = shells
        .into_iter()
        .zip(shell_holes)
        .map(|((s, _), hs)| Polygon::from_rings_unchecked(s, hs))
        .collect();
    // deterministic part order
    parts.sort_by(|p, q| {
        let (a, b) = (p.bbox(), q.bbox());
        a.min_x.total_cmp(&b.min_x).then(a.min_y.total_cmp(&b.min_y))
    });
    Ok(MultiPolygon::new(parts))
}

fn hole_inside(hole: &[Point], shell: &[Point]) -> bool {
    let on_boundary =
        |p: Point| super::ring_edges(shell).any(|(a, b)| point_segment_distance(p, a, b) <= SNAP_TOL);
    for &p in hole {
        if !on_boundary(p) {
            return point_in_rings(p, [shell]);
        }
    }
    for (a, b) in super::ring_edges(hole) {
        let m = a.lerp(b, 0.5);
        if !on_boundary(m) {
            return point_in_rings(m, [shell]);
        }
    }
    false
}

/// Splits a closed walk that revisits a node into simple closed walks.
fn split_at_repeats(walk: Vec<u32>) -> Vec<Vec<u32>> {
    let mut done = Vec::new();
    let mut stack: Vec<u32> = Vec::with_capacity(walk.len());
    let mut pos: HashMap<u32, usize> = HashMap::new();
    for n in walk {
        if let Some(&i) = pos.get(&n) {
            let cycle: Vec<u32> = stack.drain(i..).collect();
            for c in &cycle {
                pos.remove(c);
            }
            done.push(cycle);
        }
        pos.insert(n, stack.len());
        stack.push(n);
    }
    if !stack.is_empty() {
        done.push(stack);
    }
    done
}
