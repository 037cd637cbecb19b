//! Uniform hash grid over a flat coordinate buffer.

use std::collections::HashMap;

use crate::geometry::{dist, MAX_DIM};

pub(crate) type CellKey = [i64; MAX_DIM];

pub(crate) struct Grid {
    dim: usize,
    cell: f64,
    cells: HashMap<CellKey, (u32, u32)>,
    order: Vec<u32>,
    lo: CellKey,
    hi: CellKey,
}

impl Grid {
    /// Buckets `coords` (flat, `dim` values per point) into cubes of side `cell`.
    pub(crate) fn build(coords: &[f64], dim: usize, cell: f64) -> Grid {
        assert!(dim >= 1 && dim <= MAX_DIM);
        assert!(cell > 0.0 && cell.is_finite());
        let n = coords.len() / dim;
        let mut keyed: Vec<(CellKey, u32)> = (0..n)
            .map(|i| (cell_key(&coords[i * dim..(i + 1) * dim], cell), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut cells = HashMap::with_capacity(keyed.len() / 2 + 1);
        let mut lo = [i64::MAX; MAX_DIM];
        let mut hi = [i64::MIN; MAX_DIM];
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            for d in 0..dim {
                lo[d] = lo[d].min(key[d]);
                hi[d] = hi[d].max(key[d]);
            }
            start = end;
        }
        for d in dim..MAX_DIM {
            lo[d] = 0;
            hi[d] = 0;
        }
        let order = keyed.into_iter().map(|(_, i)| i).collect();
        Grid { dim, cell, cells, order, lo, hi }
    }

    /// Cell side chosen so a cloud of `n` points spread over its bounding box
    /// puts a handful of points in each occupied cell.
    pub(crate) fn auto_cell(coords: &[f64], dim: usize) -> f64 {
        let n = (coords.len() / dim).max(1);
        let mut extent = Vec::with_capacity(dim);
        for d in 0..dim {
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in coords.chunks_exact(dim) {
                a = a.min(p[d]);
                b = b.max(p[d]);
            }
            extent.push(b - a);
        }
        let diam = extent.iter().map(|e| e * e).sum::<f64>().sqrt();
        if diam == 0.0 {
            return 1.0;
        }
        let live: Vec<f64> = extent.iter().copied().filter(|e| *e > diam * 1e-9).collect();
        let vol: f64 = live.iter().product();
        let side = (vol * 2.0 / n as f64).powf(1.0 / live.len() as f64);
        side.max(diam * 1e-7)
    }

    fn bucket(&self, key: &CellKey) -> &[u32] {
        match self.cells.get(key) {
            Some(&(a, b)) => &self.order[a as usize..b as usize],
            None => &[],
        }
    }

    /// Calls `visit(j, d)` for every point `j` with `d(q, x_j) < radius`
    /// (or `<=` when `inclusive`).
    pub(crate) fn for_each_within<F: FnMut(usize, f64)>(
        &self,
        coords: &[f64],
        q: &[f64],
        radius: f64,
        inclusive: bool,
        mut visit: F,
    ) {
        let dim = self.dim;
        let reach = (radius / self.cell).ceil() as i64;
        let c = cell_key(q, self.cell);
        let mut from = [0i64; MAX_DIM];
        let mut to = [0i64; MAX_DIM];
        for d in 0..dim {
            from[d] = (c[d] - reach).max(self.lo[d]);
            to[d] = (c[d] + reach).min(self.hi[d]);
            if from[d] > to[d] {
                return;
            }
        }
        let mut cur = from;
        loop {
            for &j in self.bucket(&cur) {
                let j = j as usize;
                let dj = dist(q, &coords[j * dim..(j + 1) * dim]);
                if dj < radius || (inclusive && dj == radius) {
                    visit(j, dj);
                }
            }
            if !advance(&mut cur, &from, &to, dim) {
                break;
            }
        }
    }

    /// Exact nearest neighbor of `q` (ties broken by lowest index).
    pub(crate) fn nearest(&self, coords: &[f64], q: &[f64]) -> (usize, f64) {
        let dim = self.dim;
        let c = cell_key(q, self.cell);
        // Rings closer than the occupied box are empty; start at the box.
        let mut k0 = 0i64;
        for d in 0..dim {
            let gap = (self.lo[d] - c[d]).max(c[d] - self.hi[d]).max(0);
            k0 = k0.max(gap);
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut k = k0;
        loop {
            // Any point in ring k is at least (k - 1) * cell away.
            if best.0 != usize::MAX && ((k - 1) as f64) * self.cell > best.1 {
                break;
            }
            let mut from = [0i64; MAX_DIM];
            let mut to = [0i64; MAX_DIM];
            let mut empty = false;
            for d in 0..dim {
                from[d] = (c[d] - k).max(self.lo[d]);
                to[d] = (c[d] + k).min(self.hi[d]);
                if from[d] > to[d] {
                    empty = true;
                }
            }
            if !empty {
                let mut cur = from;
                loop {
                    let cheb = (0..dim).map(|d| (cur[d] - c[d]).abs()).max().unwrap_or(0);
                    if cheb == k {
                        for &j in self.bucket(&cur) {
                            let j = j as usize;
                            let dj = dist(q, &coords[j * dim..(j + 1) * dim]);
                            if dj < best.1 || (dj == best.1 && j < best.0) {
                                best = (j, dj);
                            }
                        }
                    }
                    if !advance(&mut cur, &from, &to, dim) {
                        break;
                    }
                }
            }
            // Past the occupied box in every direction: nothing left to scan.
            let covered = (0..dim).all(|d| c[d] - k <= self.lo[d] && c[d] + k >= self.hi[d]);
            if covered {
                break;
            }
            k += 1;
        }
        best
    }
}

fn advance(cur: &mut CellKey, from: &CellKey, to: &CellKey, dim: usize) -> bool {
    for d in 0..dim {
        if cur[d] < to[d] {
            cur[d] += 1;
            return true;
        }
        cur[d] = from[d];
    }
    false
}

pub(crate) fn cell_key(p: &[f64], cell: f64) -> CellKey {
    let mut k = [0i64; MAX_DIM];
    for (d, x) in p.iter().enumerate() {
        k[d] = (x / cell).floor() as i64;
    }
    k
}
