//! Rectangular grids and grid functions.
//!
//! Nodes are stored row-major: in 2D the node `(i, j)` sits at
//! `i * n[1] + j` and has coordinates `origin + (i h[0], j h[1])`.
//! A 1D grid uses `n[1] == 1`.

use crate::error::{input, Error, Result};
use crate::ext::{fmt_ext, is_inf, parse_ext};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: usize,
    pub n: [usize; 2],
    pub h: [f64; 2],
    pub origin: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return input("1D grid needs n >= 2 and hi > lo");
        }
        Ok(Grid { dims: 1, n: [n, 1], h: [(hi - lo) / (n - 1) as f64, 1.0], origin: [lo, 0.0] })
    }

    /// Square-cell 2D grid on `[lo0, hi0] x [lo1, hi1]`.
    pub fn new_2d(n0: usize, n1: usize, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if n0 < 2 || n1 < 2 || !(hi[0] > lo[0]) || !(hi[1] > lo[1]) {
            return input("2D grid needs n >= 2 per axis and a nonempty box");
        }
        Ok(Grid {
            dims: 2,
            n: [n0, n1],
            h: [(hi[0] - lo[0]) / (n0 - 1) as f64, (hi[1] - lo[1]) / (n1 - 1) as f64],
            origin: lo,
        })
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n[1] + j
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx / self.n[1], idx % self.n[1])
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        if self.dims == 1 {
            [self.origin[0] + i as f64 * self.h[0], 0.0]
        } else {
            [self.origin[0] + i as f64 * self.h[0], self.origin[1] + j as f64 * self.h[1]]
        }
    }

    pub fn coord_vec(&self, idx: usize) -> Vec<f64> {
        let c = self.coord(idx);
        c[..self.dims].to_vec()
    }

    /// Coarsest spacing.
    pub fn spacing(&self) -> f64 {
        if self.dims == 1 {
            self.h[0]
        } else {
            self.h[0].max(self.h[1])
        }
    }

    pub fn upper(&self) -> [f64; 2] {
        [
            self.origin[0] + (self.n[0] - 1) as f64 * self.h[0],
            self.origin[1] + (self.n[1] - 1) as f64 * self.h[1],
        ]
    }

    pub fn diameter(&self) -> f64 {
        let u = self.upper();
        let a = u[0] - self.origin[0];
        if self.dims == 1 {
            a
        } else {
            a.hypot(u[1] - self.origin[1])
        }
    }

    /// Euclidean distance from node `idx` to the edge of the grid box.
    pub fn edge_distance(&self, idx: usize) -> f64 {
        let (i, j) = self.ij(idx);
        let d0 = (i.min(self.n[0] - 1 - i)) as f64 * self.h[0];
        if self.dims == 1 {
            d0
        } else {
            d0.min((j.min(self.n[1] - 1 - j)) as f64 * self.h[1])
        }
    }

    /// Indices of the 8-neighbours (2D) or 2-neighbours (1D), ascending.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let (i, j) = self.ij(idx);
        let mut out = Vec::with_capacity(8);
        let (ri, rj): (isize, isize) = if self.dims == 1 { (1, 0) } else { (1, 1) };
        for di in -ri..=ri {
            for dj in -rj..=rj {
                if di == 0 && dj == 0 {
                    continue;
                }
                let a = i as isize + di;
                let b = j as isize + dj;
                if a >= 0 && b >= 0 && (a as usize) < self.n[0] && (b as usize) < self.n[1] {
                    out.push(self.index(a as usize, b as usize));
                }
            }
        }
        out
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && self.n == other.n
            && (self.h[0] - other.h[0]).abs() <= 1e-12 * self.h[0].abs()
            && (self.h[1] - other.h[1]).abs() <= 1e-12 * self.h[1].abs().max(1.0)
            && (self.origin[0] - other.origin[0]).abs() <= 1e-12
            && (self.origin[1] - other.origin[1]).abs() <= 1e-12
    }

    fn header(&self) -> String {
        if self.dims == 1 {
            format!("1,{},{},{}", self.n[0], self.h[0], self.origin[0])
        } else {
            format!(
                "2,{},{},{},{},{},{}",
                self.n[0], self.n[1], self.h[0], self.h[1], self.origin[0], self.origin[1]
            )
        }
    }

    fn parse_header(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad header number {s:?}")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad node count {s:?}")));
        match parts.first().copied() {
            Some("1") if parts.len() == 4 => Ok(Grid {
                dims: 1,
                n: [int(parts[1])?, 1],
                h: [num(parts[2])?, 1.0],
                origin: [num(parts[3])?, 0.0],
            }),
            Some("2") if parts.len() == 7 => Ok(Grid {
                dims: 2,
                n: [int(parts[1])?, int(parts[2])?],
                h: [num(parts[3])?, num(parts[4])?],
                origin: [num(parts[5])?, num(parts[6])?],
            }),
            _ => Err(Error::Parse(format!("unrecognized header {line:?}"))),
        }
    }
}

/// A grid function with an explicit boundary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ScalarField {
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let c = grid.coord(k);
                f(&c[..grid.dims])
            })
            .collect();
        let mut out = ScalarField { grid: grid.clone(), values, mask: vec![false; grid.len()] };
        out.mask_edges();
        out
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Marks the outermost ring of nodes as boundary.
    pub fn mask_edges(&mut self) {
        let g = &self.grid;
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            let edge0 = i == 0 || i + 1 == g.n[0];
            let edge1 = g.dims == 2 && (j == 0 || j + 1 == g.n[1]);
            self.mask[k] = edge0 || edge1;
        }
    }

    /// Marks every node outside the closed box `[lo, hi]` (plus the nodes on
    /// its faces) as boundary, leaving the open box as interior.
    pub fn mask_outside_box(&mut self, lo: [f64; 2], hi: [f64; 2]) {
        let eps = 1e-9 * self.grid.spacing();
        for k in 0..self.grid.len() {
            let c = self.grid.coord(k);
            let mut inside = c[0] > lo[0] + eps && c[0] < hi[0] - eps;
            if self.grid.dims == 2 {
                inside &= c[1] > lo[1] + eps && c[1] < hi[1] - eps;
            }
            self.mask[k] = !inside;
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        ScalarField { grid: self.grid.clone(), values, mask: self.mask.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn osc(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.mask[k]).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite() || is_inf(v.abs())) {
            Some(k) => Err(Error::Input(format!("non-finite value at node {k}"))),
            None => Ok(()),
        }
    }

    /// Distance from each node to the nearest boundary-mask node.
    pub fn mask_distance(&self) -> Vec<f64> {
        let g = &self.grid;
        let bnd: Vec<[f64; 2]> = (0..g.len()).filter(|&k| self.mask[k]).map(|k| g.coord(k)).collect();
        crate::par::map_range(g.len(), |k| {
            if self.mask[k] {
                return 0.0;
            }
            let c = g.coord(k);
            bnd.iter()
                .map(|b| (b[0] - c[0]).hypot(b[1] - c[1]))
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.len() * 12 + 64);
        s.push_str(&self.grid.header());
        s.push('\n');
        for v in &self.values {
            let _ = writeln!(s, "{}", fmt_ext(*v));
        }
        s
    }

    /// The boundary mask in field format with values in {0, 1}.
    pub fn mask_csv(&self) -> String {
        indicator_csv(&self.grid, &self.mask)
    }

    /// Parses the field format. The mask of the result is the grid edge.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let grid = Grid::parse_header(header)?;
        let values: Vec<f64> = lines
            .map(|l| parse_ext(l).ok_or_else(|| Error::Parse(format!("bad value {l:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != grid.len() {
            return Err(Error::Parse(format!("expected {} values, found {}", grid.len(), values.len())));
        }
        let mut out = ScalarField { mask: vec![false; grid.len()], grid, values };
        out.mask_edges();
        Ok(out)
    }
}

pub fn indicator_csv(grid: &Grid, flags: &[bool]) -> String {
    let f = ScalarField {
        grid: grid.clone(),
        values: flags.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        mask: vec![false; grid.len()],
    };
    f.to_csv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::INF;

    #[test]
    fn indexing_is_row_major() {
        let g = Grid::new_2d(3, 4, [0.0, 0.0], [1.0, 1.5]).unwrap();
        assert_eq!(g.index(1, 2), 6);
        assert_eq!(g.ij(6), (1, 2));
        assert_eq!(g.coord(6), [0.5, 1.0]);
    }

    #[test]
    fn csv_round_trip_with_sentinel() {
        let g = Grid::new_2d(3, 2, [-1.0, 0.0], [1.0, 1.0]).unwrap();
        let mut f = ScalarField::from_fn(&g, |x| x[0] + 2.0 * x[1]);
        f.values[3] = INF;
        let text = f.to_csv();
        assert!(text.starts_with("2,3,2,1,1,-1,0\n"));
        assert!(text.contains("\ninf\n"));
        let back = ScalarField::from_csv(&text).unwrap();
        assert_eq!(back.values, f.values);
        assert!(back.grid.same_shape(&g));
    }

    #[test]
    fn neighbours_and_edges() {
        let g = Grid::new_2d(3, 3, [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert_eq!(g.neighbors(4).len(), 8);
        assert_eq!(g.neighbors(0), vec![1, 3, 4]);
        let f = ScalarField::constant(&g, 0.0);
        assert_eq!(f.interior(), vec![4]);
        let g1 = Grid::new_1d(5, 0.0, 1.0).unwrap();
        assert_eq!(g1.neighbors(2), vec![1, 3]);
        assert_eq!(ScalarField::constant(&g1, 1.0).interior(), vec![1, 2, 3]);
    }

    #[test]
    fn box_mask() {
        let g = Grid::new_2d(9, 9, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let mut f = ScalarField::constant(&g, 0.0);
        f.mask_outside_box([0.25, 0.25], [0.75, 0.75]);
        assert_eq!(f.interior().len(), 9);
        let d = f.mask_distance();
        assert!((d[g.index(4, 4)] - 0.25).abs() < 1e-12);
    }
}
