use super::{FarmPlot, FarmSet, ProjectionSpec, Stage, SurveyMap, SurveyPlot};
use crate::error::{Error, Result};
use crate::geom::{Point, Polygon};
use chrono::{DateTime, NaiveDate, Utc};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

/// Distance-to-boundary color bin; half-open intervals [0,2.5), [2.5,5), [5,∞).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DtbBin {
    Green,
    Yellow,
    Red,
}

impl DtbBin {
    pub const GREEN_MAX_M: f64 = 2.5;
    pub const YELLOW_MAX_M: f64 = 5.0;

    pub fn from_meters(dtb: f64) -> Self {
        if dtb < Self::GREEN_MAX_M {
            DtbBin::Green
        } else if dtb < Self::YELLOW_MAX_M {
            DtbBin::Yellow
        } else {
            DtbBin::Red
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DtbBin::Green => "green",
            DtbBin::Yellow => "yellow",
            DtbBin::Red => "red",
        }
    }
}

/// A value plus the non-fatal issues met while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// One polygonal feature as read, still in lon/lat.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeature {
    pub index: usize,
    pub properties: Map<String, Value>,
    /// Feature-level `id` member, if any.
    pub feature_id: Option<String>,
    /// Polygons, each a list of rings of (lng, lat); the first ring is the exterior.
    pub polygons: Vec<Vec<Vec<(f64, f64)>>>,
}

impl RawFeature {
    /// String or numeric property rendered as text.
    pub fn prop_str(&self, key: &str) -> Option<String> {
        match self.properties.get(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    pub fn prop_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.properties.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(Value::String(s)) => s
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Parse(format!("feature {}: property {key} is not a number", self.index))),
            Some(_) => Err(Error::Parse(format!("feature {}: property {key} is not a number", self.index))),
        }
    }

    pub fn prop_time(&self, key: &str) -> Result<Option<DateTime<Utc>>> {
        match self.properties.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => parse_time(s)
                .map(Some)
                .ok_or_else(|| Error::Parse(format!("feature {}: {key} is not an ISO-8601 time: {s:?}", self.index))),
            Some(_) => Err(Error::Parse(format!("feature {}: {key} must be a string", self.index))),
        }
    }

    /// Projected polygons of this feature. Holes are kept only when asked.
    pub fn project_parts(&self, proj: &ProjectionSpec, keep_holes: bool) -> Result<Vec<Polygon>> {
        self.polygons
            .iter()
            .map(|rings| {
                let mut rs = rings.iter().map(|r| r.iter().map(|&(lng, lat)| proj.project(lng, lat)).collect::<Vec<Point>>());
                let ext = rs.next().unwrap_or_default();
                let holes = if keep_holes { rs.collect() } else { Vec::new() };
                Polygon::new(ext, holes).map_err(|e| match e {
                    Error::DegenerateGeometry(m) => Error::DegenerateGeometry(format!("feature {}: {m}", self.index)),
                    Error::InvalidGeometry(m) => Error::InvalidGeometry(format!("feature {}: {m}", self.index)),
                    other => other,
                })
            })
            .collect()
    }

    fn has_holes(&self) -> bool {
        self.polygons.iter().any(|p| p.len() > 1)
    }
}

pub fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(t.and_utc());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|t| t.and_utc())
}

/// A parsed FeatureCollection of polygonal features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawCollection {
    pub features: Vec<RawFeature>,
}

impl RawCollection {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| Error::Parse("top level is not an object".into()))?;
        if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(Error::Parse("expected a FeatureCollection".into()));
        }
        let feats = match obj.get("features") {
            Some(Value::Array(a)) => a,
            _ => return Err(Error::Parse("FeatureCollection without a features array".into())),
        };
        let mut features = Vec::with_capacity(feats.len());
        for (index, f) in feats.iter().enumerate() {
            features.push(parse_feature(index, f)?);
        }
        Ok(Self { features })
    }

    /// (min_lng, min_lat, max_lng, max_lat) over all coordinates.
    pub fn lnglat_bbox(&self) -> Option<(f64, f64, f64, f64)> {
        let mut b: Option<(f64, f64, f64, f64)> = None;
        for f in &self.features {
            for &(x, y) in f.polygons.iter().flatten().flatten() {
                b = Some(match b {
                    None => (x, y, x, y),
                    Some((a, c, d, e)) => (a.min(x), c.min(y), d.max(x), e.max(y)),
                });
            }
        }
        b
    }

    /// Projection about the center of the combined bounding box of `cols`.
    pub fn shared_projection(cols: &[&RawCollection]) -> Result<ProjectionSpec> {
        let mut b: Option<(f64, f64, f64, f64)> = None;
        for c in cols {
            if let Some((a, s, d, e)) = c.lnglat_bbox() {
                b = Some(match b {
                    None => (a, s, d, e),
                    Some((x0, y0, x1, y1)) => (x0.min(a), y0.min(s), x1.max(d), y1.max(e)),
                });
            }
        }
        match b {
            Some((x0, y0, x1, y1)) => ProjectionSpec::new(0.5 * (y0 + y1), 0.5 * (x0 + x1)),
            None => ProjectionSpec::new(0.0, 0.0),
        }
    }

    pub fn to_survey_map(&self, proj: ProjectionSpec) -> Result<Loaded<SurveyMap>> {
        let mut warnings = Vec::new();
        let mut plots = Vec::new();
        let mut stage = Stage::M0;
        for f in &self.features {
            if let Some(s) = f.prop_str("stage") {
                stage = s.parse()?;
            }
            let legal_area = f.prop_f64("legal_area_sqm")?;
            for (id, shape) in split_parts(f, &proj, "plot_id", &mut warnings)? {
                plots.push(SurveyPlot { id, shape, legal_area });
            }
        }
        let map = SurveyMap::new(plots, stage, proj)?;
        for (a, b, frac) in map.overlap_violations(super::OVERLAP_SLOP_FRAC)? {
            warnings.push(format!("plots {a} and {b} overlap by {:.2}% of the smaller plot", 100.0 * frac));
        }
        Ok(Loaded { value: map, warnings })
    }

    pub fn to_farm_set(&self, proj: ProjectionSpec) -> Result<Loaded<FarmSet>> {
        let mut warnings = Vec::new();
        let mut plots = Vec::new();
        for f in &self.features {
            let observed_at = f.prop_time("observed_at")?;
            for (id, shape) in split_parts(f, &proj, "plot_id", &mut warnings)? {
                plots.push(FarmPlot { id, shape, observed_at });
            }
        }
        Ok(Loaded { value: FarmSet::new(plots, proj)?, warnings })
    }
}

/// Feature id from `id_key`, then the feature `id`, then `feature-{index}`.
fn feature_id(f: &RawFeature, id_key: &str, warnings: &mut Vec<String>) -> String {
    if let Some(id) = f.prop_str(id_key).or_else(|| f.feature_id.clone()) {
        return id;
    }
    let id = format!("feature-{}", f.index);
    warnings.push(format!("feature {} has no {id_key}; using {id}", f.index));
    id
}

fn split_parts(
    f: &RawFeature,
    proj: &ProjectionSpec,
    id_key: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<(String, Polygon)>> {
    let id = feature_id(f, id_key, warnings);
    if f.has_holes() {
        warnings.push(format!("feature {} ({id}): interior rings dropped", f.index));
    }
    let parts = f.project_parts(proj, false)?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().map(|p| (id.clone(), p)).collect());
    }
    Ok(parts.into_iter().enumerate().map(|(k, p)| (format!("{id}-{k}"), p)).collect())
}

fn parse_feature(index: usize, f: &Value) -> Result<RawFeature> {
    let obj = f.as_object().ok_or_else(|| Error::Parse(format!("feature {index} is not an object")))?;
    let properties = match obj.get("properties") {
        Some(Value::Object(m)) => m.clone(),
        _ => Map::new(),
    };
    let feature_id = match obj.get("id") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        _ => None,
    };
    let geom = match obj.get("geometry") {
        Some(Value::Object(g)) => g,
        _ => return Err(Error::UnsupportedGeometry { index, kind: "null".into() }),
    };
    let kind = geom.get("type").and_then(Value::as_str).unwrap_or("missing");
    let coords = geom.get("coordinates").unwrap_or(&Value::Null);
    let polygons = match kind {
        "Polygon" => vec![parse_rings(index, coords)?],
        "MultiPolygon" => coords
            .as_array()
            .ok_or_else(|| bad_coords(index))?
            .iter()
            .map(|p| parse_rings(index, p))
            .collect::<Result<_>>()?,
        other => return Err(Error::UnsupportedGeometry { index, kind: other.to_string() }),
    };
    Ok(RawFeature { index, properties, feature_id, polygons })
}

fn bad_coords(index: usize) -> Error {
    Error::Parse(format!("feature {index}: malformed coordinates"))
}

fn parse_rings(index: usize, v: &Value) -> Result<Vec<Vec<(f64, f64)>>> {
    let rings = v.as_array().ok_or_else(|| bad_coords(index))?;
    if rings.is_empty() {
        return Err(bad_coords(index));
    }
    rings
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| bad_coords(index))?
                .iter()
                .map(|pos| {
                    let a = pos.as_array().filter(|a| a.len() >= 2).ok_or_else(|| bad_coords(index))?;
                    match (a[0].as_f64(), a[1].as_f64()) {
                        (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Ok((x, y)),
                        _ => Err(bad_coords(index)),
                    }
                })
                .collect()
        })
        .collect()
}

/// Loads a survey map projected about its own bounding-box center.
pub fn load_survey_map(bytes: &[u8]) -> Result<Loaded<SurveyMap>> {
    let raw = RawCollection::parse(bytes)?;
    let proj = RawCollection::shared_projection(&[&raw])?;
    raw.to_survey_map(proj)
}

/// Loads a farm set projected about its own bounding-box center.
pub fn load_farm_set(bytes: &[u8]) -> Result<Loaded<FarmSet>> {
    let raw = RawCollection::parse(bytes)?;
    let proj = RawCollection::shared_projection(&[&raw])?;
    raw.to_farm_set(proj)
}

/// GeoJSON geometry of a polygon, unprojected, with explicitly closed rings.
pub fn polygon_to_geojson(p: &Polygon, proj: &ProjectionSpec) -> Value {
    let rings: Vec<Value> = p
        .rings()
        .map(|r| {
            let mut pts: Vec<Value> = r
                .iter()
                .map(|&q| {
                    let (lng, lat) = proj.unproject(q);
                    json!([lng, lat])
                })
                .collect();
            pts.push(pts[0].clone());
            Value::Array(pts)
        })
        .collect();
    json!({ "type": "Polygon", "coordinates": rings })
}

pub(crate) fn feature(properties: Map<String, Value>, geometry: Value) -> Value {
    json!({ "type": "Feature", "properties": properties, "geometry": geometry })
}

pub(crate) fn collection_bytes(features: Vec<Value>) -> Vec<u8> {
    let mut out = serde_json::to_vec(&json!({ "type": "FeatureCollection", "features": features }))
        .expect("JSON values always serialize");
    out.push(b'\n');
    out
}

/// Serializes a survey map. `dtb` adds `dtb_m`/`dtb_bin`; `excess` adds
/// `excess_area_sqm`. Both are keyed by plot id.
pub fn emit_survey_map(
    m: &SurveyMap,
    dtb: Option<&BTreeMap<String, f64>>,
    excess: Option<&BTreeMap<String, f64>>,
) -> Vec<u8> {
    let features = m
        .plots
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("plot_id".into(), json!(p.id));
            props.insert("stage".into(), json!(m.stage.to_string()));
            if let Some(a) = p.legal_area {
                props.insert("legal_area_sqm".into(), json!(a));
            }
            if let Some(d) = dtb.and_then(|d| d.get(&p.id)) {
                props.insert("dtb_m".into(), json!(d));
                props.insert("dtb_bin".into(), json!(DtbBin::from_meters(*d).as_str()));
            }
            if let Some(e) = excess.and_then(|e| e.get(&p.id)) {
                props.insert("excess_area_sqm".into(), json!(e));
            }
            feature(props, polygon_to_geojson(&p.shape, &m.crs))
        })
        .collect();
    collection_bytes(features)
}

pub fn emit_farm_set(f: &FarmSet) -> Vec<u8> {
    let features = f
        .plots
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("plot_id".into(), json!(p.id));
            if let Some(t) = p.observed_at {
                props.insert("observed_at".into(), json!(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)));
            }
            feature(props, polygon_to_geojson(&p.shape, &f.crs))
        })
        .collect();
    collection_bytes(features)
}
