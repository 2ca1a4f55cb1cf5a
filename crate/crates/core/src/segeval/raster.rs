//! Label rasters to instance polygons: 4-connected components, each traced
//! with marching squares through pixel centers at the 0.5 level.

use super::{Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::geom::{point_in_rings, ring_signed_area, MultiPolygon, Point, Polygon};
use std::collections::{BTreeMap, HashMap};

/// Row-major label image; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Config(format!("label image is {width}x{height} but has {} pixels", labels.len())));
        }
        Ok(Self { width, height, labels })
    }

    fn at(&self, r: usize, c: usize) -> u32 {
        self.labels[r * self.width + c]
    }
}

/// Georeferencing: `origin` is the top-left image corner, rows run south.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    pub origin: Point,
    pub pixel_size: f64,
}

/// 4-connected components of equal nonzero labels, in raster order of their first pixel.
pub fn components(img: &LabelImage) -> Vec<(u32, Vec<(usize, usize)>)> {
    let mut seen = vec![false; img.labels.len()];
    let mut out = Vec::new();
    for r in 0..img.height {
        for c in 0..img.width {
            let l = img.at(r, c);
            if l == 0 || seen[r * img.width + c] {
                continue;
            }
            let mut pix = Vec::new();
            let mut stack = vec![(r, c)];
            seen[r * img.width + c] = true;
            while let Some((y, x)) = stack.pop() {
                pix.push((y, x));
                let nb = [(y.wrapping_sub(1), x), (y + 1, x), (y, x.wrapping_sub(1)), (y, x + 1)];
                for (ny, nx) in nb {
                    if ny < img.height && nx < img.width && !seen[ny * img.width + nx] && img.at(ny, nx) == l {
                        seen[ny * img.width + nx] = true;
                        stack.push((ny, nx));
                    }
                }
            }
            pix.sort_unstable();
            out.push((l, pix));
        }
    }
    out
}

/// Contour rings of a binary mask (padded by one empty pixel on every side), with
/// the mask on the left of every ring. Coordinates are in pixel-center units with
/// y pointing up: pixel (r, c) sits at (c, -r).
fn contour_rings(mask: &[bool], w: usize, h: usize) -> Vec<Vec<Point>> {
    let get = |r: i64, c: i64| r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && mask[r as usize * w + c as usize];
    // crossing points keyed by doubled coordinates so they are exact integers
    let mut next: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    for r in -1..h as i64 {
        for c in -1..w as i64 {
            // cell corners counter-clockwise (y up): BL, BR, TR, TL
            let corners = [(r + 1, c), (r + 1, c + 1), (r, c + 1), (r, c)];
            let v: Vec<bool> = corners.iter().map(|&(y, x)| get(y, x)).collect();
            if v.iter().all(|&b| b) || v.iter().all(|&b| !b) {
                continue;
            }
            let mid = |k: usize| {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                (a.1 + b.1, -(a.0 + b.0))
            };
            // walking the cell boundary counter-clockwise: entries go 0 -> 1, exits 1 -> 0
            let mut events: Vec<(usize, bool)> = Vec::new();
            for k in 0..4 {
                if v[k] != v[(k + 1) % 4] {
                    events.push((k, v[k]));
                }
            }
            // each exit joins the entry just before it, which cuts off single corners at saddles
            for (i, &(k, is_exit)) in events.iter().enumerate() {
                if is_exit {
                    let (ke, _) = events[(i + events.len() - 1) % events.len()];
                    next.insert(mid(k), mid(ke));
                }
            }
        }
    }
    let mut keys: Vec<(i64, i64)> = next.keys().copied().collect();
    keys.sort_unstable();
    let mut used = std::collections::HashSet::new();
    let mut rings = Vec::new();
    for start in keys {
        if used.contains(&start) {
            continue;
        }
        let mut ring = Vec::new();
        let mut cur = start;
        while used.insert(cur) {
            ring.push(Point::new(cur.0 as f64 / 2.0, cur.1 as f64 / 2.0));
            cur = next[&cur];
        }
        rings.push(ring);
    }
    rings
}

/// Polygons of one mask: counter-clockwise rings are shells, the rest holes of the shell containing them.
fn mask_polygons(mask: &[bool], w: usize, h: usize, map: impl Fn(Point) -> Point) -> Result<Vec<Polygon>> {
    let rings = contour_rings(mask, w, h);
    let (shells, holes): (Vec<_>, Vec<_>) = rings.into_iter().partition(|r| ring_signed_area(r) > 0.0);
    let mut hole_sets: Vec<Vec<Vec<Point>>> = vec![Vec::new(); shells.len()];
    for hring in holes {
        let probe = hring[0];
        let owner = shells
            .iter()
            .enumerate()
            .filter(|(_, s)| point_in_rings(probe, [s.as_slice()]))
            .min_by(|a, b| ring_signed_area(a.1).total_cmp(&ring_signed_area(b.1)))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidGeometry("contour hole outside every shell".into()))?;
        hole_sets[owner].push(hring);
    }
    shells
        .into_iter()
        .zip(hole_sets)
        .map(|(s, hs)| Polygon::new(s.into_iter().map(&map).collect(), hs.into_iter().map(|h| h.into_iter().map(&map).collect()).collect()))
        .collect()
}

/// One instance per connected component. Ids are `{label}` or `{label}-{k}` when a label
/// has several components; classes come from `classes` or default to the label number.
pub fn instances_from_labels(img: &LabelImage, grid: &PixelGrid, classes: &BTreeMap<u32, String>) -> Result<InstanceSet> {
    if !(grid.pixel_size > 0.0) {
        return Err(Error::Config("pixel_size must be positive".into()));
    }
    let comps = components(img);
    let mut per_label: BTreeMap<u32, usize> = BTreeMap::new();
    for (l, _) in &comps {
        *per_label.entry(*l).or_default() += 1;
    }
    let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(comps.len());
    for (l, pix) in comps {
        let r0 = pix.iter().map(|p| p.0).min().expect("component has pixels");
        let r1 = pix.iter().map(|p| p.0).max().expect("component has pixels");
        let c0 = pix.iter().map(|p| p.1).min().expect("component has pixels");
        let c1 = pix.iter().map(|p| p.1).max().expect("component has pixels");
        let (w, h) = (c1 - c0 + 1, r1 - r0 + 1);
        let mut mask = vec![false; w * h];
        for (r, c) in &pix {
            mask[(r - r0) * w + (c - c0)] = true;
        }
        let map = |p: Point| {
            let (col, row) = (p.x + c0 as f64, -p.y + r0 as f64);
            Point::new(grid.origin.x + (col + 0.5) * grid.pixel_size, grid.origin.y - (row + 0.5) * grid.pixel_size)
        };
        let parts = mask_polygons(&mask, w, h, map)?;
        let k = seen.entry(l).or_default();
        let id = if per_label[&l] > 1 { format!("{l}-{k}") } else { l.to_string() };
        *k += 1;
        let class = classes.get(&l).cloned().unwrap_or_else(|| l.to_string());
        out.push(Instance::new(id, class, MultiPolygon::new(parts)));
    }
    InstanceSet::new(out)
}
