use crate::error::{Error, Result};
use crate::geom::{orient, Bbox, Point};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Control points closer than this are merged (values averaged).
const MERGE_TOL_M: f64 = 1e-9;

/// Vector-valued thin-plate spline `R² → R²`.
///
/// Inputs are normalized to the unit box around the control points so that
/// the regularization weight does not depend on the coordinate scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinPlateSpline {
    center: Point,
    scale: f64,
    ctrl: Vec<Point>,
    weights: Vec<[f64; 2]>,
    /// Rows: constant, x, y. Only the constant row is used when the
    /// controls do not span the plane.
    affine: [[f64; 2]; 3],
    controls: Vec<(Point, Point)>,
}

fn kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Merges control points that coincide, averaging their values. Output is
/// sorted by position so the fit does not depend on input order.
pub fn merge_coincident(points: &[Point], values: &[Point]) -> Vec<(Point, Point)> {
    let mut groups: BTreeMap<(i64, i64), (Point, Point, usize)> = BTreeMap::new();
    for (&p, &v) in points.iter().zip(values) {
        let key = ((p.x / MERGE_TOL_M).round() as i64, (p.y / MERGE_TOL_M).round() as i64);
        let e = groups.entry(key).or_insert((p, Point::new(0.0, 0.0), 0));
        e.1 = e.1.add(v);
        e.2 += 1;
    }
    groups.into_values().map(|(p, s, n)| (p, s.scale(1.0 / n as f64))).collect()
}

impl ThinPlateSpline {
    pub fn fit(points: &[Point], values: &[Point], lambda: f64) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidGeometry("control point and value counts differ".into()));
        }
        let controls = merge_coincident(points, values);
        if controls.is_empty() {
            return Err(Error::EmptyInput("thin-plate spline needs at least one control point".into()));
        }
        let bb = Bbox::of_points(controls.iter().map(|(p, _)| p));
        let center = bb.center();
        let scale = 0.5 * bb.width().max(bb.height()).max(1.0);
        let ctrl: Vec<Point> = controls.iter().map(|(p, _)| p.sub(center).scale(1.0 / scale)).collect();
        let n = ctrl.len();
        let planar = n >= 3 && (2..n).any(|k| (1..k).any(|j| orient(ctrl[0], ctrl[j], ctrl[k]) != 0.0));
        let m = if planar { 3 } else { 1 };
        let mut a = DMatrix::<f64>::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                let d = ctrl[i].sub(ctrl[j]);
                a[(i, j)] = kernel(d.dot(d));
            }
            a[(i, i)] += lambda;
            let row = [1.0, ctrl[i].x, ctrl[i].y];
            for k in 0..m {
                a[(i, n + k)] = row[k];
                a[(n + k, i)] = row[k];
            }
        }
        let lu = a.lu();
        let mut weights = vec![[0.0; 2]; n];
        let mut affine = [[0.0; 2]; 3];
        for dim in 0..2 {
            let mut b = DVector::<f64>::zeros(n + m);
            for (i, (_, v)) in controls.iter().enumerate() {
                b[i] = if dim == 0 { v.x } else { v.y };
            }
            let x = lu
                .solve(&b)
                .ok_or_else(|| Error::DegenerateGeometry("thin-plate spline system is singular".into()))?;
            for i in 0..n {
                weights[i][dim] = x[i];
            }
            for k in 0..m {
                affine[k][dim] = x[n + k];
            }
        }
        Ok(Self { center, scale, ctrl, weights, affine, controls })
    }

    /// Merged control points and their values.
    pub fn controls(&self) -> &[(Point, Point)] {
        &self.controls
    }

    pub fn eval(&self, p: Point) -> Point {
        let q = p.sub(self.center).scale(1.0 / self.scale);
        let mut out = [
            self.affine[0][0] + self.affine[1][0] * q.x + self.affine[2][0] * q.y,
            self.affine[0][1] + self.affine[1][1] * q.x + self.affine[2][1] * q.y,
        ];
        for (c, w) in self.ctrl.iter().zip(&self.weights) {
            let d = q.sub(*c);
            let u = kernel(d.dot(d));
            out[0] += w[0] * u;
            out[1] += w[1] * u;
        }
        Point::new(out[0], out[1])
    }
}
