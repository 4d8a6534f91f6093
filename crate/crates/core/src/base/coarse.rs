//! `poly(d)`-approximate near neighbor in lp via randomly shifted grids.
//!
//! With cell side `s = 4 d r`, a query and an r-near neighbor land in
//! different cells of one grid with probability at most
//! `d^(1-1/p) r / s <= 1/4`. When they share a cell, the cell's stored
//! representative is within the cell's lp diameter `s d^(1/p) = c0 r`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{LpError, Result};
use crate::geometry::{lp_dist, Dataset, NormParam};
use crate::seed;

/// Approximation certified by the shifted-grid scheme: `4 d^(1 + 1/p)`.
pub fn coarse_approx(d: usize, p: f64) -> f64 {
    4.0 * (d as f64).powf(1.0 + 1.0 / p)
}

/// Number of independent grids, `ceil(8 ln n)`, at least one.
pub fn grid_count(n: usize) -> usize {
    ((8.0 * (n as f64).ln()).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub(crate) struct ShiftedGrid {
    pub shift: Vec<f64>,
    /// Occupied cell -> first (lowest id) point hashed there.
    pub cells: HashMap<Box<[i64]>, u32>,
}

impl ShiftedGrid {
    fn cell(&self, v: &[f64], side: f64) -> Box<[i64]> {
        v.iter()
            .zip(&self.shift)
            .map(|(x, s)| ((x + s) / side).floor() as i64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoarseScheme {
    pub(crate) points: Arc<Dataset>,
    pub(crate) p: NormParam,
    pub(crate) radius: f64,
    pub(crate) cell_side: f64,
    pub(crate) approx: f64,
    pub(crate) seed: u64,
    pub(crate) grids: Vec<ShiftedGrid>,
}

pub fn build_coarse_ann(points: Arc<Dataset>, p: NormParam, r: f64, seed: u64) -> Result<CoarseScheme> {
    if points.is_empty() {
        return Err(LpError::usage("cannot build a grid scheme over no points"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(LpError::usage(format!("radius must be positive, got {r}")));
    }
    if p.get() < 2.0 {
        return Err(LpError::usage(format!("grid scheme expects p >= 2, got {}", p.get())));
    }
    let d = points.dim();
    let cell_side = 4.0 * d as f64 * r;
    let grids = (0..grid_count(points.len()))
        .map(|g| {
            let mut rng = seed::rng(seed::derive(seed, seed::tag::GRID, g as u64));
            let shift: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..cell_side)).collect();
            let mut grid = ShiftedGrid {
                shift,
                cells: HashMap::new(),
            };
            for (id, v) in points.iter().enumerate() {
                let cell = grid.cell(v, cell_side);
                grid.cells.entry(cell).or_insert(id as u32);
            }
            grid
        })
        .collect();
    Ok(CoarseScheme {
        points,
        p,
        radius: r,
        cell_side,
        approx: coarse_approx(d, p.get()),
        seed,
        grids,
    })
}

impl CoarseScheme {
    pub fn approx(&self) -> f64 {
        self.approx
    }

    pub fn grid_count(&self) -> usize {
        self.grids.len()
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn query(&self, q: &[f64]) -> Result<Option<usize>> {
        self.points.check_query(q)?;
        Ok(self.query_unchecked(q).map(|(id, _)| id))
    }

    /// Closest representative over all grids, with its distance.
    pub(crate) fn query_unchecked(&self, q: &[f64]) -> Option<(usize, f64)> {
        let p = self.p.get();
        let limit = self.approx * self.radius;
        let mut best: Option<(usize, f64)> = None;
        for grid in &self.grids {
            let Some(&id) = grid.cells.get(&grid.cell(q, self.cell_side)) else {
                continue;
            };
            let id = id as usize;
            let dist = lp_dist(self.points.point(id), q, p);
            if dist <= limit && best.is_none_or(|(_, b)| dist < b) {
                best = Some((id, dist));
            }
        }
        best
    }

    /// Whether `a` and `b` fall in the same cell of grid `g`.
    pub fn colocated(&self, g: usize, a: &[f64], b: &[f64]) -> bool {
        let grid = &self.grids[g];
        grid.cell(a, self.cell_side) == grid.cell(b, self.cell_side)
    }
}

pub fn query_coarse_ann(scheme: &CoarseScheme, q: &[f64]) -> Result<Option<usize>> {
    scheme.query(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(p: f64) -> NormParam {
        NormParam::new(p).unwrap()
    }

    #[test]
    fn parameters() {
        assert_eq!(coarse_approx(16, 4.0), 128.0);
        assert!(coarse_approx(32, 4.0) <= 4.0 * 32.0 * 32.0);
        assert_eq!(grid_count(1), 1);
        assert_eq!(grid_count(1000), (8.0 * 1000f64.ln()).ceil() as usize);
    }

    #[test]
    fn singleton() {
        let ds = Arc::new(Dataset::from_rows(&[[0.5, -0.5]]).unwrap());
        let s = build_coarse_ann(ds, norm(4.0), 1.0, 3).unwrap();
        assert_eq!(query_coarse_ann(&s, &[0.9, -0.2]).unwrap(), Some(0));
    }

    #[test]
    fn far_pair_returns_the_near_one() {
        let d = 4;
        let r = 1.0;
        let p = norm(4.0);
        let c0 = coarse_approx(d, 4.0);
        // separated by more than 2 c0 r, so they never share a cell
        let gap = 2.5 * c0 * r;
        let ds = Arc::new(Dataset::from_rows(&[[0.0; 4], [gap, 0.0, 0.0, 0.0]]).unwrap());
        let s = build_coarse_ann(ds, p, r, 17).unwrap();
        for g in 0..s.grid_count() {
            assert!(!s.colocated(g, &[0.0; 4], &[gap, 0.0, 0.0, 0.0]));
        }
        let q = [gap + 0.3, 0.2, 0.0, -0.1];
        assert_eq!(s.query(&q).unwrap(), Some(1));
    }

    #[test]
    fn empty_cells_return_none() {
        let ds = Arc::new(Dataset::from_rows(&[[0.0, 0.0]]).unwrap());
        let s = build_coarse_ann(ds, norm(2.0), 1.0, 0).unwrap();
        assert_eq!(s.query(&[1e6, 1e6]).unwrap(), None);
    }

    #[test]
    fn errors() {
        let ds = Arc::new(Dataset::from_rows(&[[0.0, 0.0]]).unwrap());
        assert!(build_coarse_ann(ds.clone(), norm(1.5), 1.0, 0).is_err());
        assert!(build_coarse_ann(ds.clone(), norm(4.0), -1.0, 0).is_err());
        let s = build_coarse_ann(ds, norm(4.0), 1.0, 0).unwrap();
        assert!(matches!(s.query(&[0.0, 0.0, 0.0]), Err(LpError::DimensionMismatch { .. })));
    }

    #[test]
    fn every_point_hashed_in_every_grid() {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [i as f64 * 3.0, 0.0]).collect();
        let ds = Arc::new(Dataset::from_rows(&rows).unwrap());
        let s = build_coarse_ann(ds.clone(), norm(4.0), 0.5, 2).unwrap();
        for grid in &s.grids {
            for v in ds.iter() {
                assert!(grid.cells.contains_key(&grid.cell(v, s.cell_side)));
            }
        }
    }
}
