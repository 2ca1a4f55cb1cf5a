use crate::error::{Error, Result};
use crate::geom::Point;
use serde::{Deserialize, Serialize};

/// Sphere radius used for the local projection (WGS84 semi-major axis).
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionKind {
    #[default]
    LocalTransverseMercator,
}

/// Spherical transverse Mercator centered on an origin; x east, y north, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub origin_lat: f64,
    pub origin_lng: f64,
    #[serde(default)]
    pub kind: ProjectionKind,
}

impl ProjectionSpec {
    pub fn new(origin_lat: f64, origin_lng: f64) -> Result<Self> {
        if !(origin_lat.abs() <= 90.0 && origin_lng.abs() <= 180.0) {
            return Err(Error::Config(format!("projection origin out of range: ({origin_lat}, {origin_lng})")));
        }
        Ok(Self { origin_lat, origin_lng, kind: ProjectionKind::LocalTransverseMercator })
    }

    /// (lng, lat) degrees → planar meters.
    pub fn project(&self, lng: f64, lat: f64) -> Point {
        let phi = lat.to_radians();
        let lam = (lng - self.origin_lng).to_radians();
        let b = phi.cos() * lam.sin();
        let x = EARTH_RADIUS_M * b.atanh();
        let y = EARTH_RADIUS_M * (phi.tan().atan2(lam.cos()) - self.origin_lat.to_radians());
        Point::new(x, y)
    }

    /// Planar meters → (lng, lat) degrees.
    pub fn unproject(&self, p: Point) -> (f64, f64) {
        let d = p.y / EARTH_RADIUS_M + self.origin_lat.to_radians();
        let xr = p.x / EARTH_RADIUS_M;
        let phi = (d.sin() / xr.cosh()).asin();
        let lam = xr.sinh().atan2(d.cos());
        (self.origin_lng + lam.to_degrees(), phi.to_degrees())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_zero() {
        let p = ProjectionSpec::new(18.5, 73.8).unwrap();
        let o = p.project(73.8, 18.5);
        assert!(o.x.abs() < 1e-9 && o.y.abs() < 1e-9);
    }

    #[test]
    fn round_trip_within_50km() {
        let p = ProjectionSpec::new(18.5, 73.8).unwrap();
        for &(dlng, dlat) in &[(0.3, 0.3), (-0.4, 0.2), (0.01, -0.45), (0.0, 0.0)] {
            let (lng, lat) = (73.8 + dlng, 18.5 + dlat);
            let (l2, a2) = p.unproject(p.project(lng, lat));
            assert!((l2 - lng).abs() < 1e-9 && (a2 - lat).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_origin() {
        assert!(ProjectionSpec::new(91.0, 0.0).is_err());
        assert!(ProjectionSpec::new(0.0, 181.0).is_err());
    }
}
