use super::Bbox;
use std::collections::HashMap;

/// Uniform grid over item bounding boxes. Queries return candidate item
/// indices in ascending order, so callers iterating the result visit items in
/// the same order as a brute-force scan.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    boxes: Vec<Bbox>,
}

impl GridIndex {
    pub fn new(boxes: Vec<Bbox>, cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, b) in boxes.iter().enumerate() {
            if b.is_empty() {
                continue;
            }
            let (x0, y0) = key(b.min_x, b.min_y, cell);
            let (x1, y1) = key(b.max_x, b.max_y, cell);
            for x in x0..=x1 {
                for y in y0..=y1 {
                    cells.entry((x, y)).or_default().push(i);
                }
            }
        }
        Self { cell, cells, boxes }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn bbox(&self, i: usize) -> &Bbox {
        &self.boxes[i]
    }

    /// Items whose bbox intersects `q`, ascending and deduplicated.
    pub fn query(&self, q: &Bbox) -> Vec<usize> {
        let mut out = Vec::new();
        if q.is_empty() {
            return out;
        }
        let (x0, y0) = key(q.min_x, q.min_y, self.cell);
        let (x1, y1) = key(q.max_x, q.max_y, self.cell);
        // very large queries: scanning is cheaper than walking empty cells
        if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) > 4 * self.boxes.len() as i64 + 16 {
            return (0..self.boxes.len()).filter(|&i| self.boxes[i].intersects(q)).collect();
        }
        for x in x0..=x1 {
            for y in y0..=y1 {
                if let Some(v) = self.cells.get(&(x, y)) {
                    out.extend(v.iter().copied().filter(|&i| self.boxes[i].intersects(q)));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn key(x: f64, y: f64, cell: f64) -> (i64, i64) {
    ((x / cell).floor() as i64, (y / cell).floor() as i64)
}
