//! Sharding by Web-Mercator quadtree cells.
//!
//! A cell of level `L` is the zoom `L + 2` tile, so level 13 tiles are about
//! 1.2 km on a side at the equator. Tokens read `Z{L}-X{ix}-Y{iy}` with tile
//! indices counted from the north-west corner of the world at that zoom.

use super::{detection_feature, Detection};
use crate::error::{Error, Result};
use crate::model::geojson::collection_bytes;
use crate::model::ProjectionSpec;
use rayon::prelude::*;
use serde_json::{json, Map};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULT_LEVEL: u8 = 13;
/// Levels map to zoom `level + ZOOM_OFFSET`.
pub const ZOOM_OFFSET: u8 = 2;
pub const MAX_LEVEL: u8 = 27;
const MAX_MERCATOR_LAT: f64 = 85.051_128_779_806_59;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellToken {
    pub level: u8,
    pub x: u32,
    pub y: u32,
}

impl std::fmt::Display for CellToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Z{}-X{}-Y{}", self.level, self.x, self.y)
    }
}

fn check_level(level: u8) -> Result<u32> {
    if level > MAX_LEVEL {
        return Err(Error::Config(format!("cell level {level} above {MAX_LEVEL}")));
    }
    Ok(1u32 << (level + ZOOM_OFFSET))
}

/// The cell containing a WGS84 point; latitude is clamped to the Mercator range.
pub fn cell_token(lat: f64, lng: f64, level: u8) -> Result<CellToken> {
    let n = check_level(level)? as f64;
    let lng = (lng + 180.0).rem_euclid(360.0) - 180.0;
    let phi = lat.clamp(-MAX_MERCATOR_LAT, MAX_MERCATOR_LAT).to_radians();
    let fx = (lng + 180.0) / 360.0;
    let fy = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / std::f64::consts::PI) / 2.0;
    let clamp = |v: f64| (v * n).floor().clamp(0.0, n - 1.0) as u32;
    Ok(CellToken { level, x: clamp(fx), y: clamp(fy) })
}

pub fn parse_token(s: &str) -> Result<CellToken> {
    let bad = || Error::Config(format!("malformed cell token {s:?}; expected Z<level>-X<ix>-Y<iy>"));
    let mut it = s.split('-');
    let mut field = |prefix: char| -> Result<u32> {
        let part = it.next().ok_or_else(bad)?;
        let digits = part.strip_prefix(prefix).ok_or_else(bad)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) {
            return Err(bad());
        }
        digits.parse().map_err(|_| bad())
    };
    let (level, x, y) = (field('Z')?, field('X')?, field('Y')?);
    if it.next().is_some() || level > MAX_LEVEL as u32 {
        return Err(bad());
    }
    let n = check_level(level as u8)?;
    if x >= n || y >= n {
        return Err(bad());
    }
    Ok(CellToken { level: level as u8, x, y })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellShard {
    pub cell_token: String,
    pub features: Vec<Detection>,
}

/// Groups detections by the cell of their centroid; shards come out in token order.
pub fn shard_by_cells(dets: &[Detection], crs: &ProjectionSpec, level: u8) -> Result<Vec<CellShard>> {
    let mut groups: BTreeMap<CellToken, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        let (lng, lat) = crs.unproject(d.shape.centroid());
        groups.entry(cell_token(lat, lng, level)?).or_default().push(d.clone());
    }
    Ok(groups.into_iter().map(|(t, features)| CellShard { cell_token: t.to_string(), features }).collect())
}

pub fn shard_bytes(s: &CellShard, crs: &ProjectionSpec) -> Vec<u8> {
    collection_bytes(
        s.features
            .iter()
            .map(|d| {
                let mut extra = Map::new();
                extra.insert("cell_token".into(), json!(s.cell_token));
                detection_feature(d, crs, extra)
            })
            .collect(),
    )
}

/// Writes `<token>.geojson` per shard through a temporary file and a rename.
pub fn write_shards(shards: &[CellShard], crs: &ProjectionSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    shards
        .par_iter()
        .map(|s| {
            let path = dir.join(format!("{}.geojson", s.cell_token));
            let tmp = dir.join(format!(".{}.geojson.tmp", s.cell_token));
            std::fs::write(&tmp, shard_bytes(s, crs))?;
            std::fs::rename(&tmp, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_thirteen_cells_are_about_a_kilometer() {
        let edge = 2.0 * std::f64::consts::PI * crate::model::EARTH_RADIUS_M / f64::from(1u32 << 15);
        assert!((edge - 1223.0).abs() < 1.0);
        let a = cell_token(0.0, 0.0, 13).unwrap();
        assert_eq!(a, CellToken { level: 13, x: 16384, y: 16384 });
        let b = cell_token(0.0, 360.0 / 32768.0 * 0.999, 13).unwrap();
        assert_eq!(b, a);
        let c = cell_token(0.0, 360.0 / 32768.0, 13).unwrap();
        assert_eq!(c.x, 16385);
    }

    #[test]
    fn tokens_round_trip() {
        for t in [cell_token(18.52, 73.85, 13).unwrap(), cell_token(-89.0, -180.0, 0).unwrap(), cell_token(89.0, 179.999, 20).unwrap()] {
            assert_eq!(parse_token(&t.to_string()).unwrap(), t);
        }
        assert_eq!(cell_token(-89.0, -180.0, 0).unwrap().to_string(), "Z0-X0-Y3");
        for bad in ["Z13-X1", "Z13-X01-Y2", "z13-X1-Y2", "Z13-X1-Y2-", "Z0-X4-Y0", "Z28-X0-Y0", "Z13-X-1-Y2"] {
            assert!(parse_token(bad).is_err(), "{bad}");
        }
    }
}
