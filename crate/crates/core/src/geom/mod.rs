//! Planar geometry kernel.
//!
//! Coordinates are meters in a village-local projection. Polygons are stored
//! with implicitly closed rings (first vertex not repeated), exterior
//! counter-clockwise and holes clockwise, so that the interior always lies to
//! the left of every directed edge. The boolean operations in [`overlay`]
//! depend on that orientation convention.

pub mod clip;
pub mod delaunay;
pub mod index;
pub mod overlay;
pub mod simplify;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub use clip::intersection_area;
pub use overlay::{difference, intersection, overlay_areas, union, OverlayAreas};

/// Distance below which two vertices are considered the same node.
pub const SNAP_TOL: f64 = 1e-9;

/// Coordinates beyond this magnitude are rejected.
pub const MAX_COORD: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bbox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn empty() -> Self {
        Self::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY)
    }

    pub fn of_points<'a>(pts: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.include(*p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x || self.min_y > self.max_y
    }

    pub fn include(&mut self, p: Point) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn union(&self, o: &Bbox) -> Bbox {
        Bbox::new(
            self.min_x.min(o.min_x),
            self.min_y.min(o.min_y),
            self.max_x.max(o.max_x),
            self.max_y.max(o.max_y),
        )
    }

    pub fn intersects(&self, o: &Bbox) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn expand(&self, d: f64) -> Bbox {
        Bbox::new(self.min_x - d, self.min_y - d, self.max_x + d, self.max_y + d)
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Counter-clockwise rectangle polygon.
    pub fn to_polygon(&self) -> Polygon {
        Polygon::from_rings_unchecked(
            vec![
                Point::new(self.min_x, self.min_y),
                Point::new(self.max_x, self.min_y),
                Point::new(self.max_x, self.max_y),
                Point::new(self.min_x, self.max_y),
            ],
            Vec::new(),
        )
    }
}

/// Twice the signed area of a closed ring (positive when counter-clockwise).
pub fn ring_signed_area2(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    // Shift to the first vertex to limit cancellation on large coordinates.
    let o = ring[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += ring[i].sub(o).cross(ring[i + 1].sub(o));
    }
    s
}

pub fn ring_signed_area(ring: &[Point]) -> f64 {
    0.5 * ring_signed_area2(ring)
}

pub fn ring_perimeter(ring: &[Point]) -> f64 {
    ring_edges(ring).map(|(a, b)| a.dist(b)).sum()
}

pub fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

/// Area-weighted centroid moments of a ring: (signed area, Σx·A, Σy·A).
pub fn ring_moments(ring: &[Point], origin: Point) -> (f64, f64, f64) {
    let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
    for (p, q) in ring_edges(ring) {
        let (p, q) = (p.sub(origin), q.sub(origin));
        let c = p.cross(q);
        a += c;
        mx += (p.x + q.x) * c;
        my += (p.y + q.y) * c;
    }
    (0.5 * a, mx / 6.0, my / 6.0)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    p.dist(closest_point_on_segment(p, a, b))
}

pub fn closest_point_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    a.lerp(b, t)
}

/// Even-odd point-in-rings test. Points exactly on the boundary may go either way.
pub fn point_in_rings<'a>(p: Point, rings: impl IntoIterator<Item = &'a [Point]>) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (ring[i], ring[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
    }
    inside
}

pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    )
}

/// Whether closed segments `ab` and `cd` share at least one point.
pub fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0 && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

fn clean_ring(ring: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(ring.len());
    for &p in ring {
        if out.last().is_none_or(|q| q.dist(p) > SNAP_TOL) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].dist(out[out.len() - 1]) <= SNAP_TOL {
        out.pop();
    }
    out
}

/// Checks that the given rings have no touching non-adjacent edges and no
/// collinear backtracking at a vertex.
pub fn rings_are_simple(rings: &[&[Point]]) -> bool {
    let mut segs: Vec<(usize, usize, Point, Point)> = Vec::new();
    for (r, ring) in rings.iter().enumerate() {
        let n = ring.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let (a, b, c) = (ring[i], ring[(i + 1) % n], ring[(i + 2) % n]);
            if orient(a, b, c) == 0.0 && b.sub(a).dot(c.sub(b)) < 0.0 {
                return false;
            }
            segs.push((r, i, a, b));
        }
    }
    let boxes: Vec<Bbox> = segs.iter().map(|s| Bbox::of_points([&s.2, &s.3])).collect();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (ri, ii, a, b) = segs[i];
            let (rj, jj, c, d) = segs[j];
            if !boxes[i].intersects(&boxes[j]) {
                continue;
            }
            if ri == rj {
                let n = rings[ri].len();
                if (ii + 1) % n == jj || (jj + 1) % n == ii {
                    continue;
                }
            }
            if segments_touch(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// A simple polygon with optional holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
}

impl Polygon {
    /// Builds a polygon after removing duplicate vertices and fixing ring
    /// orientation, then validates it.
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        for p in exterior.iter().chain(holes.iter().flatten()) {
            if !p.is_finite() || p.x.abs() >= MAX_COORD || p.y.abs() >= MAX_COORD {
                return Err(Error::InvalidGeometry(format!("coordinate out of range: ({}, {})", p.x, p.y)));
            }
        }
        let mut ext = clean_ring(&exterior);
        if ext.len() < 3 {
            return Err(Error::DegenerateGeometry(format!("exterior ring has {} distinct vertices", ext.len())));
        }
        let scale = Bbox::of_points(&ext).diagonal();
        let min_area = 1e-15 * scale * scale;
        let a = ring_signed_area(&ext);
        if a.abs() <= min_area {
            return Err(Error::DegenerateGeometry("exterior ring has zero area".into()));
        }
        if a < 0.0 {
            ext.reverse();
        }
        let mut hs = Vec::with_capacity(holes.len());
        for h in &holes {
            let mut h = clean_ring(h);
            if h.len() < 3 {
                return Err(Error::DegenerateGeometry("hole ring has fewer than 3 vertices".into()));
            }
            let ha = ring_signed_area(&h);
            if ha.abs() <= min_area {
                return Err(Error::DegenerateGeometry("hole ring has zero area".into()));
            }
            if ha > 0.0 {
                h.reverse();
            }
            hs.push(h);
        }
        let poly = Self { exterior: ext, holes: hs };
        let rings: Vec<&[Point]> = poly.rings().collect();
        if !rings_are_simple(&rings) {
            return Err(Error::InvalidGeometry("ring is self-intersecting".into()));
        }
        for h in &poly.holes {
            if !h.iter().any(|&p| point_in_rings(p, [poly.exterior.as_slice()])) {
                return Err(Error::InvalidGeometry("hole lies outside the exterior ring".into()));
            }
        }
        if poly.area() <= min_area {
            return Err(Error::DegenerateGeometry("polygon has zero area".into()));
        }
        Ok(poly)
    }

    pub fn from_exterior(exterior: Vec<Point>) -> Result<Self> {
        Self::new(exterior, Vec::new())
    }

    /// Axis-aligned rectangle.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        Self::from_exterior(vec![
            Point::new(min_x, min_y),
            Point::new(max_x, min_y),
            Point::new(max_x, max_y),
            Point::new(min_x, max_y),
        ])
    }

    /// Trusted constructor: rings must already be clean and correctly oriented.
    pub(crate) fn from_rings_unchecked(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Self {
        debug_assert!(exterior.len() >= 3);
        Self { exterior, holes }
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn area(&self) -> f64 {
        ring_signed_area(&self.exterior) + self.holes.iter().map(|h| ring_signed_area(h)).sum::<f64>()
    }

    /// Length of the exterior ring only.
    pub fn perimeter(&self) -> f64 {
        ring_perimeter(&self.exterior)
    }

    pub fn centroid(&self) -> Point {
        let o = self.exterior[0];
        let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
        for r in self.rings() {
            let (ra, rx, ry) = ring_moments(r, o);
            a += ra;
            mx += rx;
            my += ry;
        }
        Point::new(o.x + mx / a, o.y + my / a)
    }

    pub fn bbox(&self) -> Bbox {
        Bbox::of_points(&self.exterior)
    }

    pub fn num_vertices(&self) -> usize {
        self.rings().map(<[Point]>::len).sum()
    }

    pub fn contains_point(&self, p: Point) -> bool {
        point_in_rings(p, self.rings())
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.rings()
            .flat_map(ring_edges)
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_simple(&self) -> bool {
        let rings: Vec<&[Point]> = self.rings().collect();
        rings_are_simple(&rings)
    }

    /// Maps every vertex through `f`. The result keeps ring orientation only
    /// if `f` is orientation-preserving; use [`Polygon::map_checked`] otherwise.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Polygon {
        Polygon {
            exterior: self.exterior.iter().map(|&p| f(p)).collect(),
            holes: self.holes.iter().map(|h| h.iter().map(|&p| f(p)).collect()).collect(),
        }
    }

    /// Maps every vertex through `f` and re-validates the result.
    pub fn map_checked(&self, f: impl Fn(Point) -> Point) -> Result<Polygon> {
        let m = self.map_points(f);
        Polygon::new(m.exterior, m.holes)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        self.map_points(|p| Point::new(p.x + dx, p.y + dy))
    }
}

/// A set of interior-disjoint polygons.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiPolygon {
    pub parts: Vec<Polygon>,
}

impl MultiPolygon {
    pub fn new(parts: Vec<Polygon>) -> Self {
        Self { parts }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(Polygon::area).sum()
    }

    pub fn centroid(&self) -> Option<Point> {
        let a = self.area();
        if a <= 0.0 {
            return None;
        }
        let (mut x, mut y) = (0.0, 0.0);
        for p in &self.parts {
            let c = p.centroid();
            let pa = p.area();
            x += c.x * pa;
            y += c.y * pa;
        }
        Some(Point::new(x / a, y / a))
    }

    pub fn bbox(&self) -> Bbox {
        self.parts.iter().fold(Bbox::empty(), |b, p| b.union(&p.bbox()))
    }
}

impl From<Polygon> for MultiPolygon {
    fn from(p: Polygon) -> Self {
        MultiPolygon { parts: vec![p] }
    }
}

/// Anything that can act as an overlay operand: a set of oriented rings
/// bounding a region whose interior lies to the left of every edge.
pub trait Region {
    fn ring_slices(&self) -> Vec<&[Point]>;
    fn region_bbox(&self) -> Bbox;
    fn region_area(&self) -> f64;
}

impl Region for Polygon {
    fn ring_slices(&self) -> Vec<&[Point]> {
        self.rings().collect()
    }
    fn region_bbox(&self) -> Bbox {
        self.bbox()
    }
    fn region_area(&self) -> f64 {
        self.area()
    }
}

impl Region for MultiPolygon {
    fn ring_slices(&self) -> Vec<&[Point]> {
        self.parts.iter().flat_map(|p| p.rings()).collect()
    }
    fn region_bbox(&self) -> Bbox {
        self.bbox()
    }
    fn region_area(&self) -> f64 {
        self.area()
    }
}

/// Symmetric Hausdorff distance between two polygon boundaries, sampled at
/// every vertex plus `per_edge` interior points of each edge.
pub fn boundary_hausdorff(a: &Polygon, b: &Polygon, per_edge: usize) -> f64 {
    fn directed(a: &Polygon, b: &Polygon, per_edge: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for ring in a.rings() {
            for (p, q) in ring_edges(ring) {
                for k in 0..=per_edge {
                    let t = k as f64 / (per_edge + 1) as f64;
                    worst = worst.max(b.boundary_distance(p.lerp(q, t)));
                }
            }
        }
        worst
    }
    directed(a, b, per_edge).max(directed(b, a, per_edge))
}

/// Hausdorff distance after translating `b` so its centroid matches `a`'s.
pub fn centroid_aligned_hausdorff(a: &Polygon, b: &Polygon) -> f64 {
    let shift = a.centroid().sub(b.centroid());
    let b2 = b.translate(shift.x, shift.y);
    boundary_hausdorff(a, &b2, 4)
}
