//! Values sampled on a uniform box grid in up to three dimensions.

use crate::error::{input, Error, Result};
use crate::ext::{fmt_ext, is_inf, parse_ext, INF};
use std::fmt::Write as _;

/// Uniform grid `lo[d] + i * h[d]`, `i < n[d]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub n: Vec<usize>,
    pub lo: Vec<f64>,
    pub h: Vec<f64>,
}

impl BoxGrid {
    pub fn new(n: Vec<usize>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if n.is_empty() || n.len() > 3 || lo.len() != n.len() || hi.len() != n.len() {
            return input("box grid needs 1 to 3 axes with matching bounds");
        }
        let mut h = Vec::with_capacity(n.len());
        for d in 0..n.len() {
            if n[d] < 2 || !(hi[d] > lo[d]) {
                return input("box grid axes need n >= 2 and hi > lo");
            }
            h.push((hi[d] - lo[d]) / (n[d] - 1) as f64);
        }
        Ok(BoxGrid { n, lo, h })
    }

    /// Symmetric grid `[-a, a]^dims` with `n` nodes per axis.
    pub fn symmetric(dims: usize, n: usize, a: f64) -> Result<Self> {
        Self::new(vec![n; dims], vec![-a; dims], vec![a; dims])
    }

    pub fn dims(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hi(&self) -> Vec<f64> {
        (0..self.dims()).map(|d| self.axis(d, self.n[d] - 1)).collect()
    }

    #[inline]
    pub fn axis(&self, d: usize, i: usize) -> f64 {
        self.lo[d] + i as f64 * self.h[d]
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            out[d] = idx % self.n[d];
            idx /= self.n[d];
        }
        out
    }

    pub fn flat(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.n).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi(idx).iter().enumerate().map(|(d, &i)| self.axis(d, i)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let hi = self.hi();
        p.iter().enumerate().all(|(d, &x)| x >= self.lo[d] - 1e-12 && x <= hi[d] + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
}

impl SampledTable {
    pub fn tabulate(grid: BoxGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.point(k))).collect();
        SampledTable { grid, values }
    }

    /// Multilinear interpolation; `INF` outside the box or when a corner is `INF`.
    pub fn interpolate(&self, p: &[f64]) -> f64 {
        let g = &self.grid;
        let dims = g.dims();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..dims {
            let s = (p[d] - g.lo[d]) / g.h[d];
            let last = (g.n[d] - 1) as f64;
            if !(s >= -1e-9 && s <= last + 1e-9) {
                return INF;
            }
            let s = s.clamp(0.0, last);
            let i = (s.floor() as usize).min(g.n[d] - 2);
            base[d] = i;
            frac[d] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dims) {
            let mut w = 1.0;
            let mut m = [0usize; 3];
            for d in 0..dims {
                let bit = (corner >> d) & 1;
                m[d] = base[d] + bit;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.values[g.flat(&m[..dims])];
            if is_inf(v) {
                return INF;
            }
            acc += w * v;
        }
        acc
    }

    /// `dims,n1[,n2..],h1[,h2..],lo1[,lo2..]` then one value per line.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = format!("{}", g.dims());
        for v in &g.n {
            let _ = write!(s, ",{v}");
        }
        for v in &g.h {
            let _ = write!(s, ",{v}");
        }
        for v in &g.lo {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
        for v in &self.values {
            let _ = writeln!(s, "{}", fmt_ext(*v));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))?;
        let parts: Vec<&str> = header.split(',').map(str::trim).collect();
        let dims: usize = parts
            .first()
            .and_then(|s| s.parse().ok())
            .filter(|d| (1..=3).contains(d))
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        if parts.len() != 1 + 3 * dims {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")));
        let n = parts[1..1 + dims]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad count {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let h = parts[1 + dims..1 + 2 * dims].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let lo = parts[1 + 2 * dims..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        let grid = BoxGrid { n, lo, h };
        let values = lines
            .map(|l| parse_ext(l).ok_or_else(|| Error::Parse(format!("bad value {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != grid.len() {
            return Err(Error::Parse(format!("expected {} values, found {}", grid.len(), values.len())));
        }
        Ok(SampledTable { grid, values })
    }
}
