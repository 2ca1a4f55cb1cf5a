//! Clipping against convex regions.
//!
//! Sutherland–Hodgman output may contain zero-width spurs when the subject is
//! concave, so it is only used for area and moment sums, never as geometry.

use super::{overlay_areas, ring_signed_area, Point, Polygon};
use crate::error::Result;

/// Whether the polygon has no holes and no reflex exterior vertex.
pub fn is_convex(p: &Polygon) -> bool {
    if !p.holes().is_empty() {
        return false;
    }
    let r = p.exterior();
    let n = r.len();
    (0..n).all(|i| {
        let (a, b, c) = (r[(i + n - 1) % n], r[i], r[(i + 1) % n]);
        b.sub(a).cross(c.sub(b)) >= 0.0
    })
}

/// Clips any ring against a counter-clockwise convex ring. The result keeps
/// the subject's orientation, so signed areas of clipped rings add up.
pub fn clip_ring_to_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = subject.to_vec();
    let m = clip.len();
    let mut input = Vec::with_capacity(subject.len() + m);
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let e = b.sub(a);
        let side = |p: Point| e.cross(p.sub(a));
        std::mem::swap(&mut input, &mut out);
        out.clear();
        let n = input.len();
        for k in 0..n {
            let (p, q) = (input[k], input[(k + 1) % n]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push(p.lerp(q, t));
            }
        }
    }
    out
}

/// Area of `a ∩ b`, using convex clipping when either side is convex.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> Result<f64> {
    if !a.bbox().intersects(&b.bbox()) {
        return Ok(0.0);
    }
    let (subject, convex) = if is_convex(b) {
        (a, b)
    } else if is_convex(a) {
        (b, a)
    } else {
        return Ok(overlay_areas(a, b)?.intersection);
    };
    let area: f64 = subject.rings().map(|r| ring_signed_area(&clip_ring_to_convex(r, convex.exterior()))).sum();
    Ok(area.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convexity() {
        assert!(is_convex(&Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap()));
        let l = Polygon::from_exterior(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(!is_convex(&l));
    }

    #[test]
    fn concave_subject_against_square() {
        let l = Polygon::from_exterior(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        let sq = Polygon::rect(0.5, 0.5, 2.5, 2.5).unwrap();
        // L ∩ square = [0.5,2]x[0.5,1] ∪ [0.5,1]x[1,2]
        assert!((intersection_area(&l, &sq).unwrap() - 1.25).abs() < 1e-12);
        assert!((intersection_area(&sq, &l).unwrap() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn holes_are_subtracted() {
        let outer = vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(4.0, 4.0), Point::new(0.0, 4.0)];
        let hole = vec![Point::new(1.0, 1.0), Point::new(1.0, 3.0), Point::new(3.0, 3.0), Point::new(3.0, 1.0)];
        let p = Polygon::new(outer, vec![hole]).unwrap();
        let half = Polygon::rect(0.0, 0.0, 2.0, 4.0).unwrap();
        assert!((intersection_area(&p, &half).unwrap() - 6.0).abs() < 1e-12);
    }
}
