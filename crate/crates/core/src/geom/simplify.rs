use super::{point_segment_distance, Point};

/// Douglas–Peucker simplification of a closed ring. The ring is anchored at
/// vertex 0 and at the vertex farthest from it, and both halves are simplified
/// independently. Never returns fewer than 3 vertices when given at least 3.
pub fn simplify_ring(ring: &[Point], tolerance: f64) -> Vec<Point> {
    let n = ring.len();
    if n <= 3 || tolerance <= 0.0 {
        return ring.to_vec();
    }
    let far = (1..n)
        .max_by(|&i, &j| ring[0].dist(ring[i]).total_cmp(&ring[0].dist(ring[j])))
        .unwrap_or(n / 2);
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    let mut path: Vec<usize> = (0..=far).collect();
    dp(ring, &path, tolerance, &mut keep);
    path = (far..n).chain(std::iter::once(0)).collect();
    dp(ring, &path, tolerance, &mut keep);
    let out: Vec<Point> = (0..n).filter(|&i| keep[i]).map(|i| ring[i]).collect();
    if out.len() < 3 {
        // keep the vertex farthest from the chord so the ring stays a polygon
        let extra = (1..n)
            .filter(|&i| i != far)
            .max_by(|&i, &j| {
                let di = point_segment_distance(ring[i], ring[0], ring[far]);
                let dj = point_segment_distance(ring[j], ring[0], ring[far]);
                di.total_cmp(&dj)
            })
            .unwrap_or(1);
        keep[extra] = true;
        return (0..n).filter(|&i| keep[i]).map(|i| ring[i]).collect();
    }
    out
}

fn dp(ring: &[Point], path: &[usize], tol: f64, keep: &mut [bool]) {
    if path.len() < 3 {
        return;
    }
    let (a, b) = (ring[path[0]], ring[path[path.len() - 1]]);
    let (mut worst, mut at) = (-1.0, 0);
    for (k, &i) in path.iter().enumerate().take(path.len() - 1).skip(1) {
        let d = point_segment_distance(ring[i], a, b);
        if d > worst {
            worst = d;
            at = k;
        }
    }
    if worst > tol {
        keep[path[at]] = true;
        dp(ring, &path[..=at], tol, keep);
        dp(ring, &path[at..], tol, keep);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removes_collinear_and_small_wiggles() {
        let ring = vec![
            Point::new(0.0, 0.0),
            Point::new(5.0, 0.1),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(5.0, 10.0),
            Point::new(0.0, 10.0),
        ];
        let s = simplify_ring(&ring, 0.3);
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn keeps_significant_vertices() {
        let ring = vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(5.0, 3.0)];
        assert_eq!(simplify_ring(&ring, 0.3), ring);
        let l = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert_eq!(simplify_ring(&l, 0.3).len(), 6);
    }
}
