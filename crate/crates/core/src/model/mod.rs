//! Survey maps, farm sets and their GeoJSON representation.

pub(crate) mod geojson;
mod projection;

pub use geojson::{
    emit_farm_set, emit_survey_map, load_farm_set, load_survey_map, polygon_to_geojson, DtbBin, Loaded, RawCollection,
    RawFeature,
};
pub use projection::{ProjectionKind, ProjectionSpec, EARTH_RADIUS_M};

use crate::error::{Error, Result};
use crate::geom::{index::GridIndex, overlay_areas, Bbox, Polygon};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

/// Overlap between two survey plots tolerated as digitization slop, as a
/// fraction of the smaller plot.
pub const OVERLAP_SLOP_FRAC: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Stage {
    #[default]
    M0,
    M1,
    M2,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::M0 => "M0",
            Stage::M1 => "M1",
            Stage::M2 => "M2",
        })
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M0" | "m0" => Ok(Stage::M0),
            "M1" | "m1" => Ok(Stage::M1),
            "M2" | "m2" => Ok(Stage::M2),
            _ => Err(Error::Parse(format!("unknown stage {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyPlot {
    pub id: String,
    pub shape: Polygon,
    pub legal_area: Option<f64>,
}

impl SurveyPlot {
    pub fn new(id: impl Into<String>, shape: Polygon) -> Self {
        Self { id: id.into(), shape, legal_area: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyMap {
    pub plots: Vec<SurveyPlot>,
    pub stage: Stage,
    pub crs: ProjectionSpec,
}

impl SurveyMap {
    pub fn new(plots: Vec<SurveyPlot>, stage: Stage, crs: ProjectionSpec) -> Result<Self> {
        check_unique(plots.iter().map(|p| p.id.as_str()))?;
        for p in &plots {
            if let Some(a) = p.legal_area {
                if !(a > 0.0) {
                    return Err(Error::InvalidGeometry(format!("plot {}: legal area must be positive", p.id)));
                }
            }
        }
        Ok(Self { plots, stage, crs })
    }

    pub fn len(&self) -> usize {
        self.plots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plots.is_empty()
    }

    pub fn bbox(&self) -> Bbox {
        self.plots.iter().fold(Bbox::empty(), |b, p| b.union(&p.shape.bbox()))
    }

    pub fn get(&self, id: &str) -> Option<&SurveyPlot> {
        self.plots.iter().find(|p| p.id == id)
    }

    /// Same plots and ids with new shapes, in order.
    pub fn with_shapes(&self, shapes: Vec<Polygon>, stage: Stage) -> SurveyMap {
        debug_assert_eq!(shapes.len(), self.plots.len());
        let plots = self
            .plots
            .iter()
            .zip(shapes)
            .map(|(p, shape)| SurveyPlot { id: p.id.clone(), shape, legal_area: p.legal_area })
            .collect();
        SurveyMap { plots, stage, crs: self.crs }
    }

    /// Plot pairs overlapping by more than `max_frac` of the smaller plot.
    pub fn overlap_violations(&self, max_frac: f64) -> Result<Vec<(String, String, f64)>> {
        let boxes: Vec<Bbox> = self.plots.iter().map(|p| p.shape.bbox()).collect();
        let idx = GridIndex::new(boxes, 50.0);
        let mut out = Vec::new();
        for (i, p) in self.plots.iter().enumerate() {
            for j in idx.query(&p.shape.bbox()) {
                if j <= i {
                    continue;
                }
                let q = &self.plots[j];
                let ov = overlay_areas(&p.shape, &q.shape)?.intersection;
                let frac = ov / p.shape.area().min(q.shape.area());
                if frac > max_frac {
                    out.push((p.id.clone(), q.id.clone(), frac));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarmPlot {
    pub id: String,
    pub shape: Polygon,
    pub observed_at: Option<DateTime<Utc>>,
}

impl FarmPlot {
    pub fn new(id: impl Into<String>, shape: Polygon) -> Self {
        Self { id: id.into(), shape, observed_at: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarmSet {
    pub plots: Vec<FarmPlot>,
    pub crs: ProjectionSpec,
}

impl FarmSet {
    pub fn new(plots: Vec<FarmPlot>, crs: ProjectionSpec) -> Result<Self> {
        check_unique(plots.iter().map(|p| p.id.as_str()))?;
        Ok(Self { plots, crs })
    }

    pub fn len(&self) -> usize {
        self.plots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plots.is_empty()
    }

    pub fn bbox(&self) -> Bbox {
        self.plots.iter().fold(Bbox::empty(), |b, p| b.union(&p.shape.bbox()))
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}
