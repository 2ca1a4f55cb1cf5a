//! Removal of needle-like "dagger" vertices from detected polygons.

use crate::geom::simplify::simplify_ring;
use crate::geom::{Point, Polygon};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaggerOptions {
    pub spike_angle_max_deg: f64,
    pub area_tol_frac: f64,
    pub simplify_tol_m: f64,
}

impl Default for DaggerOptions {
    fn default() -> Self {
        Self { spike_angle_max_deg: 15.0, area_tol_frac: 0.01, simplify_tol_m: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaggerOutcome {
    pub shape: Polygon,
    pub removed_vertices: usize,
    pub area_change_frac: f64,
    pub warning: Option<String>,
}

/// Interior angle in degrees at each vertex of a counter-clockwise ring, in (0, 360).
pub fn interior_angles_deg(ring: &[Point]) -> Vec<f64> {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let a = ring[i].sub(ring[(i + n - 1) % n]);
            let b = ring[(i + 1) % n].sub(ring[i]);
            180.0 - a.cross(b).atan2(a.dot(b)).to_degrees()
        })
        .collect()
}

/// Deletes the sharpest vertex below `spike_angle_max_deg` one at a time, stopping
/// before the cumulative area change would exceed `area_tol_frac`, then simplifies
/// the exterior. Holes are kept as they are.
pub fn dagger_removal(p: &Polygon, opts: &DaggerOptions) -> DaggerOutcome {
    let a0 = p.area();
    let holes = p.holes().to_vec();
    let within = |q: &Polygon| (q.area() - a0).abs() <= opts.area_tol_frac * a0;
    let mut cur = p.clone();
    let mut removed = 0;
    loop {
        let ring = cur.exterior();
        if ring.len() <= 3 {
            break;
        }
        let angles = interior_angles_deg(ring);
        let mut order: Vec<usize> = (0..ring.len()).filter(|&i| angles[i] < opts.spike_angle_max_deg).collect();
        order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));
        let next = order.into_iter().find_map(|i| {
            let mut r = ring.to_vec();
            r.remove(i);
            Polygon::new(r, holes.clone()).ok().filter(|q| within(q))
        });
        match next {
            Some(q) => {
                removed += ring.len() - q.exterior().len();
                cur = q;
            }
            None => break,
        }
    }
    if opts.simplify_tol_m > 0.0 {
        let r = simplify_ring(cur.exterior(), opts.simplify_tol_m);
        if r.len() < cur.exterior().len() {
            if let Ok(q) = Polygon::new(r, holes.clone()) {
                if within(&q) {
                    removed += cur.exterior().len() - q.exterior().len();
                    cur = q;
                }
            }
        }
    }
    let area_change_frac = (cur.area() - a0).abs() / a0;
    if !(cur.area() > 0.0) || !area_change_frac.is_finite() {
        return DaggerOutcome {
            shape: p.clone(),
            removed_vertices: 0,
            area_change_frac: 0.0,
            warning: Some("dagger removal produced a degenerate polygon; input kept".into()),
        };
    }
    DaggerOutcome { shape: cur, removed_vertices: removed, area_change_frac, warning: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(pts: &[(f64, f64)]) -> Polygon {
        Polygon::from_exterior(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn needle_on_a_square_is_removed() {
        let p = poly(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (5.025, 10.0), (5.0, 11.0), (4.975, 10.0), (0.0, 10.0)]);
        let out = dagger_removal(&p, &DaggerOptions::default());
        assert_eq!(out.shape.exterior().len(), 4);
        assert!((out.shape.area() - 100.0).abs() / 100.0 < 1e-3);
        assert!(out.warning.is_none());
    }

    #[test]
    fn convex_polygon_is_untouched() {
        let hex: Vec<(f64, f64)> = (0..6).map(|k| (k as f64 * std::f64::consts::PI / 3.0).sin_cos()).map(|(s, c)| (10.0 * c, 10.0 * s)).collect();
        let p = poly(&hex);
        let out = dagger_removal(&p, &DaggerOptions::default());
        assert_eq!(out.shape, p);
        assert_eq!(out.removed_vertices, 0);
    }

    #[test]
    fn large_spike_stays_when_tolerance_is_exceeded() {
        // the spike is 5% of the area, above the 1% tolerance
        let p = poly(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (5.5, 10.0), (5.0, 20.0), (4.5, 10.0), (0.0, 10.0)]);
        let out = dagger_removal(&p, &DaggerOptions::default());
        assert_eq!(out.shape.exterior().len(), 7);
        assert!(out.area_change_frac <= 0.01);
    }

    #[test]
    fn angles_of_a_square() {
        let sq = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        assert!(interior_angles_deg(&sq).iter().all(|a| (a - 90.0).abs() < 1e-12));
    }
}
