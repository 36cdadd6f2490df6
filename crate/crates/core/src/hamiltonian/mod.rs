//! Convex Hamiltonians `H(p)` with `H(0) = 0 = min H`: analytic families,
//! sampled tables, their Lagrangians and coercivity data.

mod legendre;
mod profile;
mod table;
mod validate;

pub use legendre::{legendre_transform, legendre_transform_with, Mode};
pub use profile::{coercivity_profile, CoercivityProfile};
pub use table::{BoxGrid, SampledTable};
pub use validate::{validate_hamiltonian, Check, ValidationReport, Witness};

use crate::error::{input, Error, Result};
use crate::ext::INF;
use nalgebra::DMatrix;
use std::sync::OnceLock;

/// Slack used when deciding membership in a closed unit ball.
const BALL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `½|Ap|²` with `A` square and invertible, rows listed first.
    Quadratic { a: Vec<Vec<f64>> },
    /// `|p|^m / m`, `m >= 1`, Euclidean norm.
    Power { m: f64 },
    /// Gauge of the convex hull of `ball` (points on the unit sphere of the norm).
    Norm { ball: Vec<Vec<f64>> },
    Table(SampledTable),
}

#[derive(Debug, Clone)]
enum Derived {
    Quadratic { b: DMatrix<f64>, b_inv: DMatrix<f64> },
    Power { m: f64 },
    Norm { vertices: Vec<Vec<f64>>, normals: Vec<Vec<f64>> },
    Table { r0: f64, c: f64 },
}

#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub family: Family,
    pub dims: usize,
    /// Sampling box for validation, level sets and subdifferentials.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    derived: Derived,
    profile: OnceLock<std::result::Result<CoercivityProfile, Error>>,
}

pub const DEFAULT_HALF_WIDTH: f64 = 4.0;

impl HamiltonianModel {
    pub fn quadratic(a: Vec<Vec<f64>>) -> Result<Self> {
        let dims = a.len();
        if dims == 0 || dims > 3 || a.iter().any(|r| r.len() != dims) {
            return input("quadratic family needs a square matrix of size 1 to 3");
        }
        let am = DMatrix::from_fn(dims, dims, |i, j| a[i][j]);
        let b = am.transpose() * &am;
        let b_inv = b
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Input("quadratic family needs an invertible matrix".into()))?;
        Ok(Self::assemble(Family::Quadratic { a }, dims, Derived::Quadratic { b, b_inv }))
    }

    /// `½|p|²`.
    pub fn half_square(dims: usize) -> Result<Self> {
        Self::quadratic((0..dims).map(|i| (0..dims).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }

    /// `½ Σ w_i p_i²`.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let d = weights.len();
        if weights.iter().any(|w| !(*w > 0.0)) {
            return input("diagonal weights must be positive");
        }
        Self::quadratic(
            (0..d).map(|i| (0..d).map(|j| if i == j { weights[i].sqrt() } else { 0.0 }).collect()).collect(),
        )
    }

    pub fn power(dims: usize, m: f64) -> Result<Self> {
        if !(1..=3).contains(&dims) || !(m >= 1.0) || !m.is_finite() {
            return input("power family needs dims in 1..=3 and finite m >= 1");
        }
        Ok(Self::assemble(Family::Power { m }, dims, Derived::Power { m }))
    }

    /// Euclidean norm `|p|`.
    pub fn euclidean(dims: usize) -> Result<Self> {
        Self::power(dims, 1.0)
    }

    pub fn norm(ball: Vec<Vec<f64>>) -> Result<Self> {
        let dims = ball.first().map_or(0, Vec::len);
        if !(dims == 1 || dims == 2) || ball.iter().any(|b| b.len() != dims) {
            return input("norm family supports 1 or 2 dimensions");
        }
        let (vertices, normals) = if dims == 1 {
            let lo = ball.iter().map(|b| b[0]).fold(f64::INFINITY, f64::min);
            let hi = ball.iter().map(|b| b[0]).fold(f64::NEG_INFINITY, f64::max);
            if !(lo < 0.0 && hi > 0.0) {
                return input("unit ball must contain the origin in its interior");
            }
            (vec![vec![lo], vec![hi]], vec![vec![1.0 / lo], vec![1.0 / hi]])
        } else {
            hull_facets(&ball)?
        };
        Ok(Self::assemble(Family::Norm { ball }, dims, Derived::Norm { vertices, normals }))
    }

    pub fn table(t: SampledTable) -> Result<Self> {
        let dims = t.grid.dims();
        if t.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Eval("table holds NaN".into()));
        }
        if !t.grid.contains(&vec![0.0; dims]) {
            return input("table box must contain the origin");
        }
        let zero_tol = 1e-12;
        let mut r0: f64 = 0.0;
        for (k, &v) in t.values.iter().enumerate() {
            if v <= zero_tol {
                r0 = r0.max(norm(&t.grid.point(k)));
            }
        }
        let mut c = INF;
        for (k, &v) in t.values.iter().enumerate() {
            let r = norm(&t.grid.point(k));
            if r > r0 {
                c = c.min(v / r);
            }
        }
        let (lo, hi) = (t.grid.lo.clone(), t.grid.hi());
        let mut out = Self::assemble(Family::Table(t), dims, Derived::Table { r0, c });
        out.lo = lo;
        out.hi = hi;
        Ok(out)
    }

    /// Samples `f` on `[-a, a]^dims` with `n` nodes per axis.
    pub fn tabulated(dims: usize, n: usize, a: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::table(SampledTable::tabulate(BoxGrid::symmetric(dims, n, a)?, f))
    }

    fn assemble(family: Family, dims: usize, derived: Derived) -> Self {
        HamiltonianModel {
            family,
            dims,
            lo: vec![-DEFAULT_HALF_WIDTH; dims],
            hi: vec![DEFAULT_HALF_WIDTH; dims],
            derived,
            profile: OnceLock::new(),
        }
    }

    /// Replaces the sampling box. Tables keep their own box.
    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != self.dims || hi.len() != self.dims {
            return input("box dimension mismatch");
        }
        if matches!(self.family, Family::Table(_)) {
            return input("table boxes are fixed by the table grid");
        }
        self.lo = lo;
        self.hi = hi;
        self.profile = OnceLock::new();
        Ok(self)
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match (&self.family, &self.derived) {
            (_, Derived::Quadratic { b, .. }) => 0.5 * quad_form(b, p),
            (_, Derived::Power { m }) => norm(p).powf(*m) / m,
            (_, Derived::Norm { normals, .. }) => {
                normals.iter().map(|w| dot(w, p)).fold(f64::NEG_INFINITY, f64::max)
            }
            (Family::Table(t), _) => t.interpolate(p),
            _ => unreachable!(),
        }
    }

    /// Gradient where `H` is differentiable; `None` at kinks and for tables.
    pub fn gradient(&self, p: &[f64]) -> Option<Vec<f64>> {
        match &self.derived {
            Derived::Quadratic { b, .. } => {
                Some((0..self.dims).map(|i| (0..self.dims).map(|j| b[(i, j)] * p[j]).sum()).collect())
            }
            Derived::Power { m } => {
                let r = norm(p);
                if r == 0.0 {
                    (*m > 1.0).then(|| vec![0.0; self.dims])
                } else {
                    let s = r.powf(m - 2.0);
                    Some(p.iter().map(|x| s * x).collect())
                }
            }
            Derived::Norm { normals, .. } => {
                let r = norm(p);
                if r == 0.0 {
                    return None;
                }
                let vals: Vec<f64> = normals.iter().map(|w| dot(w, p)).collect();
                let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut active = vals.iter().enumerate().filter(|(_, v)| best - **v <= 1e-12 * r);
                let first = active.next()?.0;
                active.next().is_none().then(|| normals[first].clone())
            }
            Derived::Table { .. } => None,
        }
    }

    /// `L(q) = sup_p (p·q - H(p))`, `INF` when unbounded.
    pub fn lagrangian(&self, q: &[f64]) -> f64 {
        match (&self.family, &self.derived) {
            (_, Derived::Quadratic { b_inv, .. }) => 0.5 * quad_form(b_inv, q),
            (_, Derived::Power { m }) => {
                let r = norm(q);
                if *m == 1.0 {
                    if r <= 1.0 + BALL_SLACK {
                        0.0
                    } else {
                        INF
                    }
                } else {
                    let mc = m / (m - 1.0);
                    (r.powf(mc) / mc).min(INF)
                }
            }
            (_, Derived::Norm { vertices, .. }) => {
                let s = vertices.iter().map(|b| dot(b, q)).fold(f64::NEG_INFINITY, f64::max);
                if s <= 1.0 + BALL_SLACK {
                    0.0
                } else {
                    INF
                }
            }
            (Family::Table(t), Derived::Table { r0, c }) => {
                // Nodes with |p| > r0 give p·q - H(p) <= |p|(|q| - c) < 0 when |q| < c.
                let restrict = norm(q) < *c;
                let mut best = f64::NEG_INFINITY;
                for (k, &v) in t.values.iter().enumerate() {
                    if crate::ext::is_inf(v) {
                        continue;
                    }
                    let p = t.grid.point(k);
                    if restrict && norm(&p) > r0 + 1e-12 {
                        continue;
                    }
                    best = best.max(dot(&p, q) - v);
                }
                best.min(INF)
            }
            _ => unreachable!(),
        }
    }

    /// Coercivity data, computed once after validation.
    pub fn profile(&self) -> Result<&CoercivityProfile> {
        self.profile.get_or_init(|| coercivity_profile(self)).as_ref().map_err(Clone::clone)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.derived, Derived::Quadratic { .. })
    }

    /// Analytic families vanish only at the origin.
    pub fn zero_set_is_origin(&self) -> bool {
        !matches!(self.derived, Derived::Table { .. })
    }

    /// True when `L` is the indicator of a dual ball.
    pub fn is_norm_like(&self) -> bool {
        match self.derived {
            Derived::Norm { .. } => true,
            Derived::Power { m } => m == 1.0,
            _ => false,
        }
    }

    /// Bound on the largest eigenvalue of `D²L` over `|q| <= r`, where a
    /// closed form exists.
    pub fn lagrangian_curvature(&self, r: f64) -> Option<f64> {
        match &self.derived {
            Derived::Quadratic { b_inv, .. } => {
                Some(b_inv.clone().symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max))
            }
            Derived::Power { m } if *m > 1.0 => {
                let mc = m / (m - 1.0);
                (mc >= 2.0).then(|| (mc - 1.0).max(1.0) * r.max(0.0).powf(mc - 2.0))
            }
            _ => None,
        }
    }

    /// `C_k` in closed form where available.
    pub fn cone_closed_form(&self, k: f64, x: &[f64]) -> Option<f64> {
        match &self.derived {
            Derived::Quadratic { b_inv, .. } => Some((2.0 * k).sqrt() * quad_form(b_inv, x).max(0.0).sqrt()),
            Derived::Power { m } => Some((m * k).powf(1.0 / m) * norm(x)),
            Derived::Norm { vertices, .. } => {
                Some(k * vertices.iter().map(|b| dot(b, x)).fold(f64::NEG_INFINITY, f64::max))
            }
            Derived::Table { .. } => None,
        }
    }

    /// Short human-readable tag.
    pub fn describe(&self) -> String {
        match &self.family {
            Family::Quadratic { a } => format!("quadratic a={a:?}"),
            Family::Power { m } => format!("power m={m} dims={}", self.dims),
            Family::Norm { ball } => format!("norm with {} ball points", ball.len()),
            Family::Table(t) => format!("table n={:?}", t.grid.n),
        }
    }
}

fn hull_facets(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return input("unit ball needs at least three points");
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return input("unit ball is degenerate");
    }
    let mut normals = Vec::with_capacity(hull.len());
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let n = [b[1] - a[1], a[0] - b[0]];
        let c = n[0] * a[0] + n[1] * a[1];
        if !(c > 1e-12) {
            return input("unit ball must contain the origin in its interior");
        }
        normals.push(vec![n[0] / c, n[1] / c]);
    }
    Ok((hull.iter().map(|p| p.to_vec()).collect(), normals))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += x[i] * m[(i, j)] * x[j];
        }
    }
    s
}

/// Unit directions: 2 in 1D, 64 in 2D, a 96-point Fibonacci sphere in 3D.
pub fn directions(dims: usize) -> Vec<Vec<f64>> {
    match dims {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let n = 96;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

/// Dense unit directions for geometry sampling: `n` in 2D, about `n` in 3D.
pub fn dense_directions(dims: usize, n: usize) -> Vec<Vec<f64>> {
    match dims {
        1 => directions(1),
        2 => (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_square_is_self_conjugate() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let q = [0.3, -1.7];
        assert!((h.lagrangian(&q) - 0.5 * (0.09 + 2.89)).abs() < 1e-14);
        assert_eq!(h.lagrangian(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn euclidean_lagrangian_is_ball_indicator() {
        let h = HamiltonianModel::euclidean(2).unwrap();
        assert_eq!(h.lagrangian(&[0.5, 0.0]), 0.0);
        assert_eq!(h.lagrangian(&[2.0, 0.0]), INF);
        assert_eq!(h.lagrangian(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn power_family_conjugate_exponent() {
        let h = HamiltonianModel::power(1, 3.0).unwrap();
        // L(q) = |q|^{3/2} / (3/2)
        assert!((h.lagrangian(&[4.0]) - 8.0 / 1.5).abs() < 1e-12);
        assert!((h.eval(&[2.0]) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn square_norm_gauge_and_dual() {
        let ball = vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]];
        let h = HamiltonianModel::norm(ball).unwrap();
        assert!((h.eval(&[0.5, -2.0]) - 2.0).abs() < 1e-14);
        // dual ball of the max-norm is the l1 ball
        assert_eq!(h.lagrangian(&[0.5, 0.5]), 0.0);
        assert_eq!(h.lagrangian(&[0.8, 0.5]), INF);
        assert_eq!(h.gradient(&[0.5, -2.0]), Some(vec![0.0, -1.0]));
        assert_eq!(h.gradient(&[1.0, 1.0]), None);
    }

    #[test]
    fn asymmetric_norm_in_one_dimension() {
        let h = HamiltonianModel::norm(vec![vec![-1.0], vec![2.0]]).unwrap();
        assert!((h.eval(&[4.0]) - 2.0).abs() < 1e-15);
        assert!((h.eval(&[-3.0]) - 3.0).abs() < 1e-15);
        assert_eq!(h.lagrangian(&[0.5]), 0.0);
        assert_eq!(h.lagrangian(&[0.6]), INF);
        assert_eq!(h.lagrangian(&[-1.0]), 0.0);
    }

    #[test]
    fn table_lagrangian_matches_unrestricted_max() {
        let h = HamiltonianModel::tabulated(2, 21, 2.0, |p| 0.5 * (p[0] * p[0] + p[1] * p[1])).unwrap();
        let Family::Table(t) = &h.family else { unreachable!() };
        for q in [[0.0, 0.0], [0.1, -0.05], [1.0, 0.5], [1.9, -1.9]] {
            let full = (0..t.values.len())
                .map(|k| dot(&t.grid.point(k), &q) - t.values[k])
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(h.lagrangian(&q), full);
        }
    }

    #[test]
    fn singular_quadratic_is_rejected() {
        assert!(HamiltonianModel::quadratic(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn closed_form_cones() {
        let h = HamiltonianModel::diagonal(&[1.0, 4.0]).unwrap();
        // level set p1² + 4 p2² = 2k; support in direction e2 is sqrt(2k)/2
        let c = h.cone_closed_form(0.5, &[0.0, 1.0]).unwrap();
        assert!((c - 0.5).abs() < 1e-14);
    }

    #[test]
    fn curvature_of_quadratic_lagrangian() {
        // L(q) = ½ (q1² + q2²/4)
        let h = HamiltonianModel::diagonal(&[1.0, 4.0]).unwrap();
        assert!((h.lagrangian_curvature(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(HamiltonianModel::euclidean(2).unwrap().lagrangian_curvature(1.0), None);
        // m = 3/2 gives L = |q|³/3, curvature 2|q| at the rim
        let p = HamiltonianModel::power(1, 1.5).unwrap();
        assert!((p.lagrangian_curvature(2.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn direction_sets_are_unit() {
        for d in 1..=3 {
            for v in directions(d) {
                assert!((norm(&v) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(directions(3).len(), 96);
    }
}
