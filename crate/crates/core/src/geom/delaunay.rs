//! Incremental Delaunay triangulation (Bowyer–Watson) on exact predicates.

use super::{orient, Bbox, Point};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Triangulation {
    pub points: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// `neighbors[t][i]` is the triangle across edge `(v[i], v[i+1])`.
    pub neighbors: Vec<[Option<usize>; 3]>,
    /// For every input point, the index of the vertex that represents it
    /// (duplicates map to their first occurrence).
    pub canonical: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Tri {
    v: [u32; 3],
    n: [u32; 3],
    alive: bool,
}

fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let k = |p: Point| robust::Coord { x: p.x, y: p.y };
    robust::incircle(k(a), k(b), k(c), k(d))
}

pub fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (b, c) = (b.sub(a), c.sub(a));
    let d = 2.0 * b.cross(c);
    let (bb, cc) = (b.dot(b), c.dot(c));
    let ux = (c.y * bb - b.y * cc) / d;
    let uy = (b.x * cc - c.x * bb) / d;
    Point::new(a.x + ux, a.y + uy)
}

fn hilbert_index(x: u32, y: u32, order: u32) -> u64 {
    let side = 1u64 << order;
    let (mut x, mut y) = (u64::from(x), u64::from(y));
    let mut d: u64 = 0;
    let mut s = side / 2;
    while s > 0 {
        let rx = u64::from(x & s > 0);
        let ry = u64::from(y & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = side - 1 - x;
                y = side - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

pub fn triangulate(input: &[Point]) -> Triangulation {
    let n = input.len();
    let bb = Bbox::of_points(input);
    let mut canonical: Vec<usize> = (0..n).collect();
    if n < 3 || bb.is_empty() {
        return Triangulation { points: input.to_vec(), triangles: Vec::new(), neighbors: Vec::new(), canonical };
    }
    let c = bb.center();
    let span = bb.width().max(bb.height()).max(1e-9);
    // points are shifted to the bbox center for better circumcenter precision
    let mut pts: Vec<Point> = input.iter().map(|p| p.sub(c)).collect();
    let big = span * 1e4;
    pts.push(Point::new(-3.0 * big, -3.0 * big));
    pts.push(Point::new(3.0 * big, -3.0 * big));
    pts.push(Point::new(0.0, 3.0 * big));
    let mut tris: Vec<Tri> = vec![Tri { v: [n as u32, n as u32 + 1, n as u32 + 2], n: [NONE; 3], alive: true }];
    let mut free: Vec<u32> = Vec::new();
    let mut stamp: Vec<u32> = vec![0];
    let mut gen = 0u32;

    let mut order: Vec<(u64, usize)> = (0..n)
        .map(|i| {
            let q = |v: f64, lo: f64, w: f64| (((v - lo) / w.max(1e-12)) * 65535.0).clamp(0.0, 65535.0) as u32;
            (hilbert_index(q(input[i].x, bb.min_x, bb.width()), q(input[i].y, bb.min_y, bb.height()), 16), i)
        })
        .collect();
    order.sort_unstable();

    let mut last: u32 = 0;
    let mut first_at: std::collections::HashMap<(u64, u64), usize> = std::collections::HashMap::new();
    let mut cavity: Vec<u32> = Vec::new();
    let mut boundary: Vec<(u32, u32, u32)> = Vec::new();
    let mut rot = 0usize;
    for &(_, pi) in &order {
        let key = (input[pi].x.to_bits(), input[pi].y.to_bits());
        if let Some(&f) = first_at.get(&key) {
            canonical[pi] = f;
            continue;
        }
        let p = pts[pi];
        // locate by walking
        let mut t = last;
        if !tris[t as usize].alive {
            t = tris.iter().position(|t| t.alive).unwrap() as u32;
        }
        let mut steps = 0usize;
        'walk: loop {
            let tri = tris[t as usize];
            rot = rot.wrapping_add(1);
            for k in 0..3 {
                let e = (rot + k) % 3;
                let a = pts[tri.v[e] as usize];
                let b = pts[tri.v[(e + 1) % 3] as usize];
                if orient(a, b, p) < 0.0 {
                    t = tri.n[e];
                    steps += 1;
                    debug_assert!(t != NONE && steps < 10 * (n + 10));
                    continue 'walk;
                }
            }
            break;
        }
        let tri = tris[t as usize];
        if let Some(&dup) = tri.v.iter().find(|&&v| (v as usize) < n && pts[v as usize] == p) {
            canonical[pi] = dup as usize;
            continue;
        }
        first_at.insert(key, pi);

        gen += 1;
        cavity.clear();
        boundary.clear();
        cavity.push(t);
        stamp[t as usize] = gen;
        let mut k = 0;
        while k < cavity.len() {
            let ct = cavity[k];
            k += 1;
            for nb in tris[ct as usize].n {
                if nb == NONE || stamp[nb as usize] == gen {
                    continue;
                }
                let v = tris[nb as usize].v;
                if incircle(pts[v[0] as usize], pts[v[1] as usize], pts[v[2] as usize], p) > 0.0 {
                    stamp[nb as usize] = gen;
                    cavity.push(nb);
                }
            }
        }
        for &ct in &cavity {
            let tri = tris[ct as usize];
            for e in 0..3 {
                let nb = tri.n[e];
                if nb == NONE || stamp[nb as usize] != gen {
                    boundary.push((tri.v[e], tri.v[(e + 1) % 3], nb));
                }
            }
        }
        for &ct in &cavity {
            tris[ct as usize].alive = false;
            free.push(ct);
        }
        let mut new_ids: Vec<u32> = Vec::with_capacity(boundary.len());
        for &(a, b, nb) in &boundary {
            let id = if let Some(id) = free.pop() {
                tris[id as usize] = Tri { v: [a, b, pi as u32], n: [nb, NONE, NONE], alive: true };
                stamp[id as usize] = 0;
                id
            } else {
                tris.push(Tri { v: [a, b, pi as u32], n: [nb, NONE, NONE], alive: true });
                stamp.push(0);
                (tris.len() - 1) as u32
            };
            if nb != NONE {
                let nt = &mut tris[nb as usize];
                for e in 0..3 {
                    if nt.v[e] == b && nt.v[(e + 1) % 3] == a {
                        nt.n[e] = id;
                    }
                }
            }
            new_ids.push(id);
        }
        for (i, &(a, b, _)) in boundary.iter().enumerate() {
            let id = new_ids[i];
            // edge (b, p) borders the new triangle starting at b; edge (p, a) the one ending at a
            let next = boundary.iter().position(|&(a2, _, _)| a2 == b).map(|j| new_ids[j]).unwrap_or(NONE);
            let prev = boundary.iter().position(|&(_, b2, _)| b2 == a).map(|j| new_ids[j]).unwrap_or(NONE);
            tris[id as usize].n[1] = next;
            tris[id as usize].n[2] = prev;
        }
        last = new_ids[0];
    }

    let mut remap = vec![usize::MAX; tris.len()];
    let mut triangles = Vec::new();
    for (i, t) in tris.iter().enumerate() {
        if t.alive && t.v.iter().all(|&v| (v as usize) < n) {
            remap[i] = triangles.len();
            triangles.push([t.v[0] as usize, t.v[1] as usize, t.v[2] as usize]);
        }
    }
    let mut neighbors = Vec::with_capacity(triangles.len());
    for t in tris.iter() {
        if t.alive && t.v.iter().all(|&v| (v as usize) < n) {
            neighbors.push(t.n.map(|nb| if nb == NONE || remap[nb as usize] == usize::MAX { None } else { Some(remap[nb as usize]) }));
        }
    }
    Triangulation { points: input.to_vec(), triangles, neighbors, canonical }
}
