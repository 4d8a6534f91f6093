//! Vectors, lp distances and the scaled Mazur map.

use serde::{Deserialize, Serialize};

use crate::error::{LpError, Result};

/// Norm exponent `p >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormParam(f64);

impl NormParam {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(LpError::usage(format!("norm exponent must be finite and >= 1, got {p}")));
        }
        Ok(NormParam(p))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for NormParam {
    type Error = LpError;

    fn try_from(p: f64) -> Result<Self> {
        NormParam::new(p)
    }
}

impl From<NormParam> for f64 {
    fn from(p: NormParam) -> f64 {
        p.0
    }
}

/// Dense row-major collection of `len()` points in `dim` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(LpError::usage("dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(LpError::usage(format!(
                "coordinate buffer of length {} is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(LpError::numeric(format!(
                "non-finite coordinate {} in point {}",
                pos % dim,
                pos / dim
            )));
        }
        Ok(Dataset { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| LpError::usage("cannot infer dimension of an empty row list"))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(LpError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Dataset::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Subset of the given rows, in the given order.
    pub fn select(&self, ids: &[usize]) -> Dataset {
        let mut coords = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            coords.extend_from_slice(self.point(id));
        }
        Dataset {
            dim: self.dim,
            coords,
        }
    }

    pub(crate) fn check_query(&self, q: &[f64]) -> Result<()> {
        check_vector(q, self.dim)
    }
}

pub(crate) fn check_vector(q: &[f64], dim: usize) -> Result<()> {
    if q.len() != dim {
        return Err(LpError::DimensionMismatch {
            expected: dim,
            actual: q.len(),
        });
    }
    if q.iter().any(|c| !c.is_finite()) {
        return Err(LpError::numeric("query has a non-finite coordinate"));
    }
    Ok(())
}

/// `(sum |x_i - y_i|^p)^(1/p)`, checked.
pub fn lp_distance(x: &[f64], y: &[f64], p: NormParam) -> Result<f64> {
    if x.len() != y.len() {
        return Err(LpError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let d = lp_dist(x, y, p.get());
    if !d.is_finite() {
        return Err(LpError::numeric("lp distance is not finite"));
    }
    Ok(d)
}

/// Unchecked lp distance for hot loops. Lengths must match.
#[inline]
pub fn lp_dist(x: &[f64], y: &[f64], p: f64) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let d = if p == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    } else if p == 4.0 {
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                let s = (a - b) * (a - b);
                s * s
            })
            .sum::<f64>()
            .sqrt()
            .sqrt()
    } else if p == 1.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>()
    } else {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    };
    if d.is_finite() && (d > 0.0 || x == y) {
        d
    } else {
        // Overflow or underflow in the power sum; rescale by the largest gap.
        scaled_lp_dist(x, y, p)
    }
}

fn scaled_lp_dist(x: &[f64], y: &[f64], p: f64) -> f64 {
    let m = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = x.iter().zip(y).map(|(a, b)| ((a - b).abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// lp norm of a single vector, computed with rescaling so it never overflows
/// for finite input.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    let m = v.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|c| (c.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// `(p/q) * c0^(p/q - 1)`.
pub fn mazur_scale_factor(p: f64, q: f64, c0: f64) -> Result<f64> {
    if !(q >= 1.0 && q < p && p.is_finite()) {
        return Err(LpError::usage(format!("Mazur map needs 1 <= q < p < inf, got p={p}, q={q}")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(LpError::usage(format!("Mazur diameter bound must be positive, got {c0}")));
    }
    let e = p / q;
    let pow = if e == 2.0 { c0 } else { c0.powf(e - 1.0) };
    Ok(e * pow)
}

/// Scaled Mazur map `lp -> lq` on the ball of radius `c0` around the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MazurMapSpec {
    p: f64,
    q: f64,
    c0: f64,
    scale: f64,
}

impl MazurMapSpec {
    pub fn new(p: f64, q: f64, c0: f64) -> Result<Self> {
        let scale = mazur_scale_factor(p, q, c0)?;
        Ok(MazurMapSpec { p, q, c0, scale })
    }

    pub fn source(&self) -> f64 {
        self.p
    }

    pub fn target(&self) -> f64 {
        self.q
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Coordinate-wise `sign(v_i) |v_i|^(p/q) / scale`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(v.len());
        self.apply_offset_into(v, None, &mut out)?;
        Ok(out)
    }

    /// Maps `v - center` and appends the image to `out`.
    pub fn apply_offset_into(&self, v: &[f64], center: Option<&[f64]>, out: &mut Vec<f64>) -> Result<()> {
        let e = self.p / self.q;
        let inv = 1.0 / self.scale;
        let start = out.len();
        for (i, &x) in v.iter().enumerate() {
            let x = match center {
                Some(c) => x - c[i],
                None => x,
            };
            let y = if e == 2.0 {
                x * x.abs()
            } else {
                x.signum() * x.abs().powf(e)
            };
            out.push(y * inv);
        }
        if let Some(i) = out[start..].iter().position(|c| !c.is_finite()) {
            out.truncate(start);
            return Err(LpError::numeric(format!(
                "Mazur image coordinate {i} is not finite (p={}, q={}, c0={})",
                self.p, self.q, self.c0
            )));
        }
        Ok(())
    }
}

/// Maximum pairwise lp distance, by exhaustive scan.
pub fn subset_diameter<P: AsRef<[f64]>>(points: &[P], p: NormParam) -> Result<f64> {
    if points.is_empty() {
        return Err(LpError::usage("diameter of an empty point set"));
    }
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(lp_distance(a.as_ref(), b.as_ref(), p)?);
        }
    }
    Ok(best)
}
