//! Bounded derivative-free minimization over four parameters.
//!
//! Phase 1 evaluates a coarse lattice plus seeded random probes, then refines
//! around the best `top_k` points on successively halved lattices. Phase 2
//! runs Nelder–Mead from each of the `top_k` survivors in coordinates
//! normalized to the unit box and clamped to it.

use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub type Params = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lo: Params,
    pub hi: Params,
    /// Lattice points per axis in the coarse phase (1 pins the axis at its identity value).
    pub steps: [usize; 4],
    /// Memoization quanta per axis.
    pub quantum: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub top_k: usize,
    pub refine_levels: usize,
    pub random_probes: usize,
    pub nm_max_iters: usize,
    pub max_evaluations: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { top_k: 5, refine_levels: 4, random_probes: 64, nm_max_iters: 250, max_evaluations: 20_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub x: Params,
    pub f: f64,
    pub f_identity: f64,
    pub evaluations: usize,
}

struct Memo<'a> {
    f: &'a (dyn Fn(Params) -> Result<f64> + Sync),
    space: &'a SearchSpace,
    cache: HashMap<[i64; 4], usize>,
    /// Evaluated points in evaluation order.
    seen: Vec<(Params, f64)>,
    budget: usize,
}

impl<'a> Memo<'a> {
    fn key(&self, x: &Params) -> [i64; 4] {
        std::array::from_fn(|k| (x[k] / self.space.quantum[k]).round() as i64)
    }

    fn clamp(&self, x: Params) -> Params {
        std::array::from_fn(|k| x[k].clamp(self.space.lo[k], self.space.hi[k]))
    }

    fn exhausted(&self) -> bool {
        self.seen.len() >= self.budget
    }

    /// Evaluates a batch in parallel, skipping cached points; returns values in input order.
    fn batch(&mut self, xs: &[Params]) -> Result<Vec<f64>> {
        let mut todo: Vec<(Params, [i64; 4])> = Vec::new();
        let mut pending: HashMap<[i64; 4], ()> = HashMap::new();
        for x in xs {
            let x = self.clamp(*x);
            let k = self.key(&x);
            if !self.cache.contains_key(&k) && pending.insert(k, ()).is_none() {
                todo.push((x, k));
            }
        }
        let room = self.budget.saturating_sub(self.seen.len());
        todo.truncate(room);
        let f = self.f;
        let vals: Vec<f64> = todo.par_iter().map(|(x, _)| f(*x)).collect::<Result<_>>()?;
        for ((x, k), v) in todo.into_iter().zip(vals) {
            self.cache.insert(k, self.seen.len());
            self.seen.push((x, v));
        }
        Ok(xs
            .iter()
            .map(|x| {
                let k = self.key(&self.clamp(*x));
                self.cache.get(&k).map_or(f64::INFINITY, |&i| self.seen[i].1)
            })
            .collect())
    }

    fn one(&mut self, x: Params) -> Result<f64> {
        Ok(self.batch(&[x])?[0])
    }

    /// Best `k` distinct evaluated points; ties resolved by evaluation order.
    fn best(&self, k: usize) -> Vec<(Params, f64)> {
        let mut idx: Vec<usize> = (0..self.seen.len()).collect();
        idx.sort_by(|&a, &b| self.seen[a].1.total_cmp(&self.seen[b].1).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|i| self.seen[i]).collect()
    }
}

fn axis_values(lo: f64, hi: f64, n: usize, identity: f64) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![identity.clamp(lo, hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn minimize(
    f: &(dyn Fn(Params) -> Result<f64> + Sync),
    identity: Params,
    space: &SearchSpace,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let mut memo = Memo { f, space, cache: HashMap::new(), seen: Vec::new(), budget: opts.max_evaluations.max(1) };
    let f_identity = memo.one(identity)?;

    // coarse lattice
    let axes: Vec<Vec<f64>> = (0..4).map(|k| axis_values(space.lo[k], space.hi[k], space.steps[k], identity[k])).collect();
    let mut grid = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                for &d in &axes[3] {
                    grid.push([a, b, c, d]);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_probes {
        grid.push(std::array::from_fn(|k| {
            if space.hi[k] > space.lo[k] && space.steps[k] > 1 {
                rng.gen_range(space.lo[k]..=space.hi[k])
            } else {
                identity[k].clamp(space.lo[k], space.hi[k])
            }
        }));
    }
    memo.batch(&grid)?;

    // multi-resolution refinement
    let mut h: Params = std::array::from_fn(|k| {
        if space.steps[k] > 1 {
            (space.hi[k] - space.lo[k]) / (space.steps[k] - 1) as f64
        } else {
            0.0
        }
    });
    for _ in 0..opts.refine_levels {
        if memo.exhausted() {
            break;
        }
        h = h.map(|v| 0.5 * v);
        let mut cand = Vec::new();
        for (c, _) in memo.best(opts.top_k) {
            for code in 0..81usize {
                let mut x = c;
                let mut r = code;
                for k in 0..4 {
                    x[k] += (r % 3) as f64 * h[k] - h[k];
                    r /= 3;
                }
                cand.push(x);
            }
        }
        memo.batch(&cand)?;
    }

    // Nelder–Mead polish
    let span: Params = std::array::from_fn(|k| (space.hi[k] - space.lo[k]).max(0.0));
    let active: Vec<usize> = (0..4).filter(|&k| span[k] > 0.0 && space.steps[k] > 1).collect();
    if !active.is_empty() {
        for (start, _) in memo.best(opts.top_k) {
            if memo.exhausted() {
                break;
            }
            nelder_mead(&mut memo, start, &active, &span, &h, opts.nm_max_iters)?;
        }
    }

    let (x, fx) = memo.best(1)[0];
    let (x, fx) = if fx < f_identity { (x, fx) } else { (identity, f_identity) };
    Ok(SearchOutcome { x, f: fx, f_identity, evaluations: memo.seen.len() })
}

fn nelder_mead(memo: &mut Memo, start: Params, active: &[usize], span: &Params, h: &Params, max_iters: usize) -> Result<()> {
    let d = active.len();
    let lo = memo.space.lo;
    let to_x = |u: &[f64]| -> Params {
        let mut x = start;
        for (i, &k) in active.iter().enumerate() {
            x[k] = lo[k] + u[i].clamp(0.0, 1.0) * span[k];
        }
        x
    };
    let u0: Vec<f64> = active.iter().map(|&k| (start[k] - lo[k]) / span[k]).collect();
    let mut simplex: Vec<Vec<f64>> = vec![u0.clone()];
    for (i, &k) in active.iter().enumerate() {
        let mut u = u0.clone();
        let step = (2.0 * h[k] / span[k]).max(1e-3);
        u[i] = if u[i] + step <= 1.0 { u[i] + step } else { u[i] - step };
        simplex.push(u);
    }
    let mut fs: Vec<f64> = Vec::with_capacity(d + 1);
    for u in &simplex {
        fs.push(memo.one(to_x(u))?);
    }
    for _ in 0..max_iters {
        if memo.exhausted() {
            break;
        }
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fs = order.iter().map(|&i| fs[i]).collect();
        let size = simplex[1..].iter().flat_map(|u| u.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if size < 1e-7 || (fs[d] - fs[0]).abs() <= 1e-12 * fs[0].abs().max(1e-12) && size < 1e-4 {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|i| simplex[..d].iter().map(|u| u[i]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            (0..d).map(|i| (centroid[i] + t * (simplex[d][i] - centroid[i])).clamp(0.0, 1.0)).collect()
        };
        let xr = along(-1.0);
        let fr = memo.one(to_x(&xr))?;
        if fr < fs[0] {
            let xe = along(-2.0);
            let fe = memo.one(to_x(&xe))?;
            if fe < fr {
                simplex[d] = xe;
                fs[d] = fe;
            } else {
                simplex[d] = xr;
                fs[d] = fr;
            }
        } else if fr < fs[d - 1] {
            simplex[d] = xr;
            fs[d] = fr;
        } else {
            let (xc, fc) = if fr < fs[d] {
                let xc = along(-0.5);
                let fc = memo.one(to_x(&xc))?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = memo.one(to_x(&xc))?;
                (xc, fc)
            };
            if fc < fs[d].min(fr) {
                simplex[d] = xc;
                fs[d] = fc;
            } else {
                for j in 1..=d {
                    simplex[j] = (0..d).map(|i| simplex[0][i] + 0.5 * (simplex[j][i] - simplex[0][i])).collect();
                    fs[j] = memo.one(to_x(&simplex[j]))?;
                }
            }
        }
    }
    Ok(())
}
