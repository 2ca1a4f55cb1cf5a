//! Excess area (ea) and distance to boundary (dtb) of survey plots against farms.
//!
//! `ea(q, p) = min(area(q ∩ p), area(p − q))`: a farm mostly inside `q`
//! contributes the part sticking out, a farm mostly outside contributes the
//! part sticking in. Since `area(p − q) = area(p) − area(q ∩ p)`, only the
//! intersection area is needed.

use crate::error::{Error, Result};
use crate::geom::clip::clip_ring_to_convex;
use crate::geom::index::GridIndex;
use crate::geom::{difference, intersection, intersection_area, point_segment_distance, ring_moments, Bbox, Point, Polygon};
use crate::model::{DtbBin, FarmSet, SurveyMap};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Farm intersections below this area are treated as overlay noise.
pub const MIN_INTERSECTION_SQM: f64 = 1e-6;
pub const INDEX_CELL_M: f64 = 50.0;
/// Lattice cells per sqrt(area) used when attributing excess area to edges.
const ATTRIBUTION_DIVISIONS: f64 = 16.0;

pub fn excess_area_pair(q: &Polygon, p: &Polygon) -> Result<f64> {
    if !q.bbox().intersects(&p.bbox()) {
        return Ok(0.0);
    }
    let i = intersection_area(q, p)?;
    Ok(pair_from_intersection(i, p.area()))
}

fn pair_from_intersection(i: f64, area_p: f64) -> f64 {
    if i < MIN_INTERSECTION_SQM {
        return 0.0;
    }
    i.min((area_p - i).max(0.0))
}

/// Farm shapes behind a uniform grid; candidate lists come back in farm order.
#[derive(Debug, Clone)]
pub struct FarmIndex {
    shapes: Vec<Polygon>,
    areas: Vec<f64>,
    grid: GridIndex,
}

impl FarmIndex {
    pub fn new(farms: &FarmSet) -> Self {
        Self::from_shapes(farms.plots.iter().map(|p| p.shape.clone()).collect())
    }

    pub fn from_shapes(shapes: Vec<Polygon>) -> Self {
        let areas = shapes.iter().map(Polygon::area).collect();
        let grid = GridIndex::new(shapes.iter().map(Polygon::bbox).collect(), INDEX_CELL_M);
        Self { shapes, areas, grid }
    }

    pub fn shapes(&self) -> &[Polygon] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn candidates(&self, b: &Bbox) -> Vec<usize> {
        self.grid.query(b)
    }
}

/// ea(q, F): sum over intersecting farms, in farm order.
pub fn excess_area_plot(q: &Polygon, farms: &FarmIndex) -> Result<f64> {
    let mut total = 0.0;
    for j in farms.candidates(&q.bbox()) {
        let i = intersection_area(q, &farms.shapes[j])?;
        total += pair_from_intersection(i, farms.areas[j]);
    }
    Ok(total)
}

/// ea of every shape, in input order.
pub fn excess_area_each(shapes: &[Polygon], farms: &FarmIndex) -> Result<Vec<f64>> {
    shapes.par_iter().map(|q| excess_area_plot(q, farms)).collect()
}

/// Σ ea over shapes, reduced sequentially in input order.
pub fn excess_area_total(shapes: &[Polygon], farms: &FarmIndex) -> Result<f64> {
    Ok(excess_area_each(shapes, farms)?.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessAreaReport {
    pub per_plot: BTreeMap<String, f64>,
    pub total: f64,
}

pub fn excess_area_map(m: &SurveyMap, farms: &FarmIndex) -> Result<ExcessAreaReport> {
    let shapes: Vec<Polygon> = m.plots.iter().map(|p| p.shape.clone()).collect();
    let each = excess_area_each(&shapes, farms)?;
    let total = each.iter().sum();
    let per_plot = m.plots.iter().zip(each).map(|(p, e)| (p.id.clone(), e)).collect();
    Ok(ExcessAreaReport { per_plot, total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotDtb {
    pub excess_area: f64,
    pub dtb: f64,
    /// Per exterior edge `i` (from vertex `i` to `i+1`), meters.
    pub per_edge: Vec<f64>,
}

/// dtb of one plot with its excess area split across exterior edges. Each
/// excess fragment is cut on a square lattice and every piece's area goes to
/// the edge nearest the piece centroid; an edge's dtb is its area over its length.
pub fn dtb_plot(q: &Polygon, farms: &FarmIndex) -> Result<PlotDtb> {
    let perim = q.perimeter();
    if !(perim > 0.0) {
        return Err(Error::DegenerateGeometry("plot has zero perimeter".into()));
    }
    let ext = q.exterior();
    let n = ext.len();
    let mut assigned = vec![0.0; n];
    let mut ea = 0.0;
    let cell = q.area().sqrt() / ATTRIBUTION_DIVISIONS;
    let origin = Point::new(q.bbox().min_x, q.bbox().min_y);
    for j in farms.candidates(&q.bbox()) {
        let p = &farms.shapes[j];
        let i = intersection_area(q, p)?;
        let e = pair_from_intersection(i, farms.areas[j]);
        if e <= 0.0 {
            continue;
        }
        ea += e;
        let fragment = if i <= farms.areas[j] - i { intersection(q, p)? } else { difference(p, q)? };
        let mut pieces = Vec::new();
        for part in &fragment.parts {
            lattice_pieces(part, origin, cell, &mut pieces);
        }
        let sum: f64 = pieces.iter().map(|(a, _)| a).sum();
        if sum <= 0.0 {
            continue;
        }
        // rescale so each farm's attribution conserves its ea exactly
        let k = e / sum;
        for (a, c) in pieces {
            assigned[nearest_edge(ext, c)] += a * k;
        }
    }
    let per_edge = (0..n).map(|i| assigned[i] / ext[i].dist(ext[(i + 1) % n])).collect();
    Ok(PlotDtb { excess_area: ea, dtb: ea / perim, per_edge })
}

fn lattice_pieces(part: &Polygon, origin: Point, cell: f64, out: &mut Vec<(f64, Point)>) {
    let b = part.bbox();
    let i0 = ((b.min_x - origin.x) / cell).floor() as i64;
    let i1 = ((b.max_x - origin.x) / cell).ceil() as i64;
    let j0 = ((b.min_y - origin.y) / cell).floor() as i64;
    let j1 = ((b.max_y - origin.y) / cell).ceil() as i64;
    let o = part.exterior()[0];
    for i in i0..i1 {
        for j in j0..j1 {
            let (x0, y0) = (origin.x + i as f64 * cell, origin.y + j as f64 * cell);
            let (x1, y1) = (x0 + cell, y0 + cell);
            let rect = [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)];
            let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
            for r in part.rings() {
                let clipped = clip_ring_to_convex(r, &rect);
                if clipped.len() >= 3 {
                    let (ra, rx, ry) = ring_moments(&clipped, o);
                    a += ra;
                    mx += rx;
                    my += ry;
                }
            }
            if a > 0.0 {
                out.push((a, Point::new(o.x + mx / a, o.y + my / a)));
            }
        }
    }
}

/// Index of the exterior edge closest to `c`; ties go to the lower index.
fn nearest_edge(ring: &[Point], c: Point) -> usize {
    let n = ring.len();
    let mut best = (f64::INFINITY, 0);
    for i in 0..n {
        let d = point_segment_distance(c, ring[i], ring[(i + 1) % n]);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtbReport {
    pub per_plot: BTreeMap<String, f64>,
    pub per_edge: BTreeMap<String, Vec<f64>>,
    pub excess_area: BTreeMap<String, f64>,
}

impl DtbReport {
    /// Plot counts in the green, yellow and red bins.
    pub fn bin_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for &d in self.per_plot.values() {
            c[DtbBin::from_meters(d) as usize] += 1;
        }
        c
    }

    /// Percentage of plots with dtb strictly below `threshold_m`; 0 for an empty map.
    pub fn pct_below(&self, threshold_m: f64) -> f64 {
        if self.per_plot.is_empty() {
            return 0.0;
        }
        let k = self.per_plot.values().filter(|&&d| d < threshold_m).count();
        100.0 * k as f64 / self.per_plot.len() as f64
    }

    pub fn total_excess_area(&self) -> f64 {
        self.excess_area.values().sum()
    }
}

pub fn dtb_map(m: &SurveyMap, farms: &FarmIndex) -> Result<DtbReport> {
    let each: Vec<PlotDtb> = m.plots.par_iter().map(|p| dtb_plot(&p.shape, farms)).collect::<Result<_>>()?;
    let mut r = DtbReport { per_plot: BTreeMap::new(), per_edge: BTreeMap::new(), excess_area: BTreeMap::new() };
    for (p, d) in m.plots.iter().zip(each) {
        r.per_plot.insert(p.id.clone(), d.dtb);
        r.excess_area.insert(p.id.clone(), d.excess_area);
        r.per_edge.insert(p.id.clone(), d.per_edge);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::rect(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn pair_examples() {
        let q = rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(excess_area_pair(&q, &q).unwrap(), 0.0);
        assert!((excess_area_pair(&q, &rect(0.5, 0.0, 1.5, 1.0)).unwrap() - 0.5).abs() < 1e-12);
        // 0.5x0.5 farm with a 0.1x0.5 sliver inside q
        let p = rect(0.9, 0.2, 1.4, 0.7);
        assert!((excess_area_pair(&q, &p).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(excess_area_pair(&q, &rect(3.0, 3.0, 4.0, 4.0)).unwrap(), 0.0);
    }

    #[test]
    fn quadrant_farms_give_zero() {
        let q = rect(0.0, 0.0, 10.0, 10.0);
        let farms = FarmIndex::from_shapes(vec![
            rect(0.0, 0.0, 5.0, 5.0),
            rect(5.0, 0.0, 10.0, 5.0),
            rect(0.0, 5.0, 5.0, 10.0),
            rect(5.0, 5.0, 10.0, 10.0),
        ]);
        assert_eq!(excess_area_plot(&q, &farms).unwrap(), 0.0);
        let d = dtb_plot(&q, &farms).unwrap();
        assert_eq!(d.dtb, 0.0);
        assert!(d.per_edge.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn shifted_copy_plus_disjoint_farms() {
        let q = rect(0.0, 0.0, 1.0, 1.0);
        let farms = FarmIndex::from_shapes(vec![rect(0.5, 0.0, 1.5, 1.0), rect(5.0, 5.0, 6.0, 6.0), rect(-3.0, 0.0, -2.0, 1.0)]);
        assert!((excess_area_plot(&q, &farms).unwrap() - 0.5).abs() < 1e-12);
        let d = dtb_plot(&q, &farms).unwrap();
        assert!((d.dtb - 0.125).abs() < 1e-12);
    }

    #[test]
    fn east_mismatch_loads_east_edge() {
        let q = rect(0.0, 0.0, 10.0, 10.0);
        let farms = FarmIndex::from_shapes(vec![rect(0.5, 0.0, 10.8, 10.0)]);
        let d = dtb_plot(&q, &farms).unwrap();
        // rect exterior starts at (0,0): edges south, east, north, west
        let east = d.per_edge[1];
        for (i, &e) in d.per_edge.iter().enumerate() {
            if i != 1 {
                assert!(east > e);
            }
        }
        let total: f64 = d.per_edge.iter().map(|e| e * 10.0).sum();
        assert!((total - d.excess_area).abs() <= 1e-9 * d.excess_area);
        assert!((d.excess_area - 8.0).abs() < 1e-9);
    }

    #[test]
    fn bins_and_percentages() {
        let mut r = DtbReport { per_plot: BTreeMap::new(), per_edge: BTreeMap::new(), excess_area: BTreeMap::new() };
        for (i, d) in [0.0, 2.5, 4.9, 5.0, 7.0].iter().enumerate() {
            r.per_plot.insert(format!("p{i}"), *d);
        }
        assert_eq!(r.bin_counts(), [1, 2, 2]);
        assert!((r.pct_below(5.0) - 60.0).abs() < 1e-12);
    }
}
