//! Level sets of `H`, the cone functions `C_k(x) = max { p·x : H(p) = k }`,
//! subdifferentials and the dual-space sets `Γ_k`, `W_k`, `N_k`.
//!
//! Subdifferential membership uses the Fenchel-Young gap: `q ∈ ∂H(p)` over
//! a sampled `p`-box exactly when `H(p) + L_P(q) - p·q <= tol`, where `L_P`
//! is the discrete conjugate over the box samples. One fast transform
//! therefore answers every supporting-hyperplane test on a dual grid.

use crate::error::{input, Error, Result};
use crate::ext::{fmt_ext, is_inf, INF};
use crate::hamiltonian::{dense_directions, legendre_transform, BoxGrid, HamiltonianModel, Mode, SampledTable};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(d: &[f64], r: f64) -> Vec<f64> {
    d.iter().map(|x| r * x).collect()
}

/// Ray directions used for level sets: 720 in 2D, 2000 in 3D.
fn level_directions(dims: usize) -> Vec<Vec<f64>> {
    match dims {
        1 => dense_directions(1, 2),
        2 => dense_directions(2, 720),
        _ => dense_directions(3, 2000),
    }
}

/// Points of `H⁻¹(k)`, one per ray, found by bisection. For `k = 0` each ray
/// gives the outermost point of the zero set (the origin when it is `{0}`).
pub fn level_set(h: &HamiltonianModel, k: f64, dirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if !(k >= 0.0) {
        return input("level must be nonnegative");
    }
    if k == 0.0 && h.zero_set_is_origin() {
        return Ok(vec![vec![0.0; h.dims]]);
    }
    let zero_tol = 1e-12;
    let pts = crate::par::map_slice(dirs, |d| {
        let above = |r: f64| {
            let v = h.eval(&scale(d, r));
            if k == 0.0 {
                v > zero_tol
            } else {
                v >= k
            }
        };
        let mut hi = if k == 0.0 { 1e-9 } else { 1.0 };
        let mut tries = 0;
        while !above(hi) {
            hi *= 2.0;
            tries += 1;
            if tries > 80 {
                return None;
            }
        }
        let mut lo = 0.0;
        if k == 0.0 && hi == 1e-9 {
            // zero set is {0} along this ray to within 1e-9
            return Some(vec![0.0; d.len()]);
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if above(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(scale(d, if k == 0.0 { lo } else { hi }))
    });
    let level_tol = level_tolerance(k);
    let out: Vec<Vec<f64>> = pts
        .into_iter()
        .flatten()
        .filter(|p| k == 0.0 || (h.eval(p) - k).abs() <= level_tol)
        .collect();
    if out.is_empty() {
        return Err(Error::Level(format!("no sampled point of H^-1({k})")));
    }
    Ok(out)
}

fn level_tolerance(k: f64) -> f64 {
    1e-9 * (1.0 + k)
}

#[derive(Debug, Clone)]
pub struct ConeData {
    pub k: f64,
    pub level_set: Vec<Vec<f64>>,
    pub level_tol: f64,
    pub m_k: f64,
    pub k_k: f64,
    /// Whether [`ConeData::value`] uses the family's closed form.
    pub closed_form: bool,
    model: Option<HamiltonianModel>,
}

impl ConeData {
    pub fn new(h: &HamiltonianModel, k: f64) -> Result<Self> {
        let level = level_set(h, k, &level_directions(h.dims))?;
        let closed = h.cone_closed_form(k, &vec![0.0; h.dims]).is_some();
        let mut cd = ConeData {
            k,
            level_set: level,
            level_tol: level_tolerance(k),
            m_k: 0.0,
            k_k: 0.0,
            closed_form: closed,
            model: closed.then(|| h.clone()),
        };
        let dirs = match h.dims {
            1 => dense_directions(1, 2),
            2 => dense_directions(2, 3600),
            _ => dense_directions(3, 4000),
        };
        let vals: Vec<f64> = dirs.iter().map(|d| cd.value(d)).collect();
        cd.m_k = vals.iter().copied().fold(f64::INFINITY, f64::min);
        cd.k_k = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(cd)
    }

    /// Same as [`ConeData::new`] but always evaluating the sampled level set.
    pub fn sampled(h: &HamiltonianModel, k: f64) -> Result<Self> {
        let mut cd = Self::new(h, k)?;
        cd.closed_form = false;
        cd.model = None;
        Ok(cd)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if let Some(h) = &self.model {
            if let Some(v) = h.cone_closed_form(self.k, x) {
                return v;
            }
        }
        self.sampled_value(x)
    }

    /// `max p·x` over the level-set sample.
    pub fn sampled_value(&self, x: &[f64]) -> f64 {
        self.level_set.iter().map(|p| dot(p, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn points_csv(&self) -> String {
        points_csv(&self.level_set)
    }
}

pub fn points_csv(points: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for p in points {
        s.push_str(&p.iter().map(|x| fmt_ext(*x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// `C_k(x)`: closed form for analytic families, sampled level set otherwise.
pub fn cone_value(h: &HamiltonianModel, k: f64, x: &[f64]) -> Result<f64> {
    if !(k >= 0.0) {
        return input("level must be nonnegative");
    }
    if let Some(v) = h.cone_closed_form(k, x) {
        return Ok(v);
    }
    Ok(ConeData::new(h, k)?.value(x))
}

/// `(M_k, K_k)`: min and max of `C_k` over sampled unit directions.
pub fn cone_constants(h: &HamiltonianModel, k: f64) -> Result<(f64, f64)> {
    let cd = ConeData::new(h, k)?;
    Ok((cd.m_k, cd.k_k))
}

/// Tabulated levels `2^(j/8)` for `j` in `-80..=48`, about `1e-3` to `64`.
pub fn cone_levels() -> Vec<f64> {
    (-80..=48).map(|j| (j as f64 / 8.0).exp2()).collect()
}

/// Cone data on a ladder of levels, used by table lookups.
#[derive(Debug, Clone)]
pub struct ConeTable {
    pub cones: Vec<ConeData>,
}

impl ConeTable {
    /// Levels from [`cone_levels`].
    pub fn new(h: &HamiltonianModel) -> Result<Self> {
        Self::with_levels(h, &cone_levels())
    }

    pub fn with_levels(h: &HamiltonianModel, ks: &[f64]) -> Result<Self> {
        let cones = crate::par::map_slice(ks, |&k| ConeData::new(h, k));
        Ok(ConeTable { cones: cones.into_iter().collect::<Result<Vec<_>>>()? })
    }
}

/// Dual grid `[-a, a]^d` with an odd node count so the origin is a node.
fn dual_box(dims: usize, a: f64, nodes: usize) -> Result<BoxGrid> {
    let n = nodes | 1;
    BoxGrid::symmetric(dims, n, a)
}

/// Sup over a sphere of radius `r` around `p`, minus `H(p)`, over `r`:
/// a bound on `|q|` for `q ∈ ∂H(p)`.
fn subgradient_bound(h: &HamiltonianModel, p: &[f64], r: f64) -> f64 {
    let hp = h.eval(p);
    let sup = dense_directions(h.dims, 720)
        .iter()
        .map(|d| h.eval(&p.iter().zip(d).map(|(a, b)| a + r * b).collect::<Vec<_>>()))
        .fold(f64::NEG_INFINITY, f64::max);
    if is_inf(sup) {
        return INF;
    }
    (sup - hp) / r
}

/// The discrete conjugate of `H` over a `p`-box, tabulated on `dual`.
struct DualConjugate {
    dual: BoxGrid,
    lp: Vec<f64>,
}

impl DualConjugate {
    fn new(h: &HamiltonianModel, half_width: f64, p_nodes: usize, dual: BoxGrid) -> Result<Self> {
        let pbox = BoxGrid::symmetric(h.dims, p_nodes | 1, half_width)?;
        let t = SampledTable::tabulate(pbox, |p| h.eval(p));
        let lp = legendre_transform(&t, &dual, Mode::Fast)?.values;
        Ok(DualConjugate { dual, lp })
    }

    fn gap(&self, j: usize, p: &[f64], hp: f64) -> f64 {
        hp + self.lp[j] - dot(&self.dual.point(j), p)
    }
}

fn grid_sizes(dims: usize) -> (usize, usize) {
    match dims {
        1 => (801, 801),
        2 => (121, 121),
        _ => (31, 31),
    }
}

/// Dual-grid points `q` with `H(p') >= H(p) + q·(p' - p) - tol` for every
/// sampled `p'`.
pub fn subdifferential(h: &HamiltonianModel, p: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
    let (pn, qn) = grid_sizes(h.dims);
    subdifferential_with(h, p, tol, pn, qn)
}

pub fn subdifferential_with(
    h: &HamiltonianModel,
    p: &[f64],
    tol: f64,
    p_nodes: usize,
    q_nodes: usize,
) -> Result<Vec<Vec<f64>>> {
    if p.len() != h.dims {
        return input("point dimension differs from H");
    }
    let r = norm(p).max(0.5);
    let bound = subgradient_bound(h, p, r);
    if is_inf(bound) {
        return Err(Error::Eval("H is infinite near p".into()));
    }
    let qa = 1.1 * bound + 1e-3;
    let half = (norm(p) + 2.0 * r).max(h.hi.iter().chain(&h.lo).map(|x| x.abs()).fold(0.0, f64::max));
    let dc = DualConjugate::new(h, half, p_nodes, dual_box(h.dims, qa, q_nodes)?)?;
    let hp = h.eval(p);
    Ok((0..dc.dual.len()).filter(|&j| dc.gap(j, p, hp) <= tol).map(|j| dc.dual.point(j)).collect())
}

#[derive(Debug, Clone)]
pub struct SubdiffSets {
    pub k: f64,
    pub dual: BoxGrid,
    /// Dual-grid points of `Γ_k`.
    pub gamma_k: Vec<Vec<f64>>,
    pub gamma_mask: Vec<bool>,
    pub w_k: Vec<bool>,
    pub n_k: Vec<bool>,
    pub tol: f64,
    /// Dual grid step: membership is resolved only to this scale.
    pub resolution: f64,
    pub warnings: Vec<String>,
}

impl SubdiffSets {
    pub fn contains_origin(&self) -> bool {
        let mid: Vec<usize> = self.dual.n.iter().map(|n| n / 2).collect();
        self.n_k[self.dual.flat(&mid)]
    }

    pub fn indicator(&self, flags: &[bool]) -> SampledTable {
        SampledTable { grid: self.dual.clone(), values: flags.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() }
    }
}

pub fn gamma_w_n(h: &HamiltonianModel, k: f64) -> Result<SubdiffSets> {
    let (pn, qn) = grid_sizes(h.dims);
    gamma_w_n_with(h, k, pn, qn, None)
}

/// As [`gamma_w_n`] with explicit grid sizes and membership tolerance.
pub fn gamma_w_n_with(
    h: &HamiltonianModel,
    k: f64,
    p_nodes: usize,
    q_nodes: usize,
    tol: Option<f64>,
) -> Result<SubdiffSets> {
    if !(k > 0.0) {
        return input("gamma_w_n needs k > 0");
    }
    let level = level_set(h, k, &level_directions(h.dims))?;
    let rk = level.iter().map(|p| norm(p)).fold(0.0, f64::max);
    let sup = dense_directions(h.dims, 720)
        .iter()
        .map(|d| h.eval(&scale(d, 2.0 * rk)))
        .fold(f64::NEG_INFINITY, f64::max);
    if is_inf(sup) {
        return Err(Error::Eval("H is infinite on the sphere of radius 2 R_k".into()));
    }
    let qa = 1.1 * sup / rk;
    let dual = dual_box(h.dims, qa, q_nodes)?;
    let dq = dual.h[0];
    let dc = DualConjugate::new(h, 2.0 * rk, p_nodes, dual.clone())?;
    let tol = tol.unwrap_or(rk * dq * (h.dims as f64).sqrt());

    // restricted conjugate over the sampled sublevel set
    let pbox = BoxGrid::symmetric(h.dims, p_nodes | 1, 2.0 * rk)?;
    let sub = SampledTable::tabulate(pbox, |p| {
        let v = h.eval(p);
        if v <= k {
            v
        } else {
            INF
        }
    });
    let lk_grid = legendre_transform(&sub, &dual, Mode::Fast)?.values;
    let q_len = dual.len();
    let rows = crate::par::map_range(q_len, |j| {
        let q = dual.point(j);
        let level_best = level.iter().map(|p| dot(&q, p) - k).fold(f64::NEG_INFINITY, f64::max);
        let in_gamma = dc.lp[j] - level_best <= tol;
        let in_w = dc.lp[j] - lk_grid[j].max(level_best) <= tol;
        (in_gamma, in_w)
    });
    let gamma_mask: Vec<bool> = rows.iter().map(|r| r.0).collect();
    let w_k: Vec<bool> = rows.iter().map(|r| r.1).collect();
    let n_k: Vec<bool> = (0..q_len).map(|j| w_k[j] && !gamma_mask[j]).collect();
    let gamma_k: Vec<Vec<f64>> = (0..q_len).filter(|&j| gamma_mask[j]).map(|j| dual.point(j)).collect();

    let mut sets =
        SubdiffSets { k, dual, gamma_k, gamma_mask, w_k, n_k, tol, resolution: dq, warnings: Vec::new() };
    if !sets.contains_origin() {
        sets.warnings.push("origin is not in N_k".into());
    }
    // boundary nodes of N_k must touch Γ_k within one dual cell
    let g = &sets.dual;
    for j in 0..q_len {
        if !sets.n_k[j] {
            continue;
        }
        let m = g.multi(j);
        let mut boundary = false;
        let mut touches_gamma = false;
        for d in 0..g.dims() {
            for step in [-1isize, 1] {
                let i = m[d] as isize + step;
                if i < 0 || i >= g.n[d] as isize {
                    boundary = true;
                    continue;
                }
                let mut m2 = m.clone();
                m2[d] = i as usize;
                let nb = g.flat(&m2);
                if !sets.n_k[nb] {
                    boundary = true;
                }
                if sets.gamma_mask[nb] {
                    touches_gamma = true;
                }
            }
        }
        if boundary && !touches_gamma {
            sets.warnings.push(format!("boundary node {:?} of N_k is not adjacent to Gamma_k", g.point(j)));
            break;
        }
    }
    Ok(sets)
}

/// A unit vector orthogonal to every sampled point of `H⁻¹(0)`.
pub fn zero_set_normal(h: &HamiltonianModel) -> Result<Vec<f64>> {
    let zeros = level_set(h, 0.0, &level_directions(h.dims))?;
    let scale_r = zeros.iter().map(|p| norm(p)).fold(0.0, f64::max);
    if scale_r <= 1e-9 {
        let mut e = vec![0.0; h.dims];
        e[0] = 1.0;
        return Ok(e);
    }
    let tol = 1e-6 * scale_r;
    let cands = match h.dims {
        1 => dense_directions(1, 2),
        2 => dense_directions(2, 3600),
        _ => dense_directions(3, 4000),
    };
    cands
        .into_iter()
        .find(|q| zeros.iter().all(|p| dot(p, q).abs() <= tol))
        .ok_or_else(|| Error::Invalid("zero set spans every direction".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_square_cones() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let cd = ConeData::sampled(&h, 0.5).unwrap();
        let x = [0.3, -0.4];
        assert!((cd.value(&x) - 0.5).abs() < 1e-5);
        assert!((cd.m_k - 1.0).abs() < 1e-5 && (cd.k_k - 1.0).abs() < 1e-9);
        assert_eq!(cone_value(&h, 2.0, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_cone_is_k_times_norm() {
        let h = HamiltonianModel::euclidean(2).unwrap();
        for k in [0.5, 1.0, 2.0] {
            let cd = ConeData::sampled(&h, k).unwrap();
            assert!((cd.value(&[1.0, 1.0]) - k * 2f64.sqrt()).abs() < 1e-4);
            assert!((cone_value(&h, k, &[3.0, 4.0]).unwrap() - 5.0 * k).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_constants_match_brute_force() {
        let h = HamiltonianModel::diagonal(&[1.0, 4.0]).unwrap();
        let k = 0.7;
        // level set p1² + 4 p2² = 2k: dense parametrization
        let a = (2.0f64 * k).sqrt();
        let ell: Vec<[f64; 2]> = (0..20000)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 20000.0;
                [a * t.cos(), 0.5 * a * t.sin()]
            })
            .collect();
        let mut mn = f64::INFINITY;
        let mut mx: f64 = 0.0;
        for i in 0..10000 {
            let t = std::f64::consts::TAU * i as f64 / 10000.0;
            let x = [t.cos(), t.sin()];
            let c = ell.iter().map(|p| p[0] * x[0] + p[1] * x[1]).fold(f64::NEG_INFINITY, f64::max);
            mn = mn.min(c);
            mx = mx.max(c);
        }
        for cd in [ConeData::new(&h, k).unwrap(), ConeData::sampled(&h, k).unwrap()] {
            assert!((cd.m_k - mn).abs() < 1e-4, "{} {}", cd.m_k, mn);
            assert!((cd.k_k - mx).abs() < 1e-4, "{} {}", cd.k_k, mx);
            assert!(cd.m_k <= cd.k_k);
        }
    }

    #[test]
    fn level_points_lie_on_the_level() {
        let h = HamiltonianModel::tabulated(2, 41, 3.0, |p| 0.5 * (p[0] * p[0] + 2.0 * p[1] * p[1])).unwrap();
        let cd = ConeData::new(&h, 1.0).unwrap();
        assert!(!cd.closed_form);
        for p in &cd.level_set {
            assert!((h.eval(p) - 1.0).abs() <= cd.level_tol);
        }
    }

    #[test]
    fn level_beyond_table_is_a_level_error() {
        let h = HamiltonianModel::tabulated(1, 11, 1.0, |p| 0.5 * p[0] * p[0]).unwrap();
        assert!(matches!(ConeData::new(&h, 5.0), Err(Error::Level(_))));
    }

    #[test]
    fn subdifferential_of_smooth_point_is_the_gradient() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let p = [0.6, -0.3];
        let pts = subdifferential(&h, &p, 1e-3).unwrap();
        assert!(!pts.is_empty());
        for q in pts {
            assert!(((q[0] - 0.6).powi(2) + (q[1] + 0.3).powi(2)).sqrt() < 0.05);
        }
    }

    #[test]
    fn subdifferential_of_norm() {
        let h = HamiltonianModel::euclidean(2).unwrap();
        let ball = subdifferential(&h, &[0.0, 0.0], 1e-9).unwrap();
        let rmax = ball.iter().map(|q| norm(q)).fold(0.0, f64::max);
        assert!(rmax <= 1.0 + 1e-9 && rmax > 0.97);
        assert!(ball.iter().any(|q| norm(q) < 1e-12));
        let p = [0.0, 2.0];
        for q in subdifferential(&h, &p, 0.02).unwrap() {
            assert!(q[0].abs() < 0.15 && (q[1] - 1.0).abs() < 0.02, "{q:?}");
        }
    }

    #[test]
    fn gamma_w_n_for_half_square() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let k = 0.5;
        let s = gamma_w_n(&h, k).unwrap();
        assert!(s.contains_origin());
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        let r = (2.0f64 * k).sqrt();
        let band = (2.0 * s.tol).sqrt() + s.resolution;
        for q in &s.gamma_k {
            assert!((norm(q) - r).abs() <= band, "{q:?}");
        }
        for j in 0..s.dual.len() {
            let q = s.dual.point(j);
            if norm(&q) < r - band {
                assert!(s.n_k[j]);
            }
            if norm(&q) > r + band {
                assert!(!s.n_k[j] && !s.w_k[j]);
            }
        }
    }

    #[test]
    fn gamma_w_n_for_norm() {
        let h = HamiltonianModel::euclidean(2).unwrap();
        let s = gamma_w_n(&h, 1.5).unwrap();
        assert!(s.contains_origin());
        let band = 2.0 * s.resolution;
        for q in &s.gamma_k {
            assert!((norm(q) - 1.0).abs() <= band, "{q:?}");
        }
        for j in 0..s.dual.len() {
            let q = s.dual.point(j);
            if norm(&q) > 1.0 + band {
                assert!(!s.w_k[j]);
            }
            if norm(&q) < 1.0 - band {
                assert!(s.n_k[j]);
            }
        }
    }

    #[test]
    fn zero_set_normal_is_orthogonal() {
        let h = HamiltonianModel::half_square(2).unwrap();
        assert_eq!(zero_set_normal(&h).unwrap(), vec![1.0, 0.0]);
        let seg = HamiltonianModel::tabulated(2, 41, 4.0, |p| (p[0].abs() - 1.0).max(0.0) + p[1].abs()).unwrap();
        let q = zero_set_normal(&seg).unwrap();
        assert!(q[0].abs() < 1e-6 && (q[1].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cones_increase_with_level() {
        let h = HamiltonianModel::tabulated(2, 41, 4.0, |p| 0.5 * (p[0] * p[0] + 3.0 * p[1] * p[1])).unwrap();
        let x = [0.3, 0.7];
        let ks = [0.25, 0.5, 1.0, 2.0];
        let vals: Vec<f64> = ks.iter().map(|&k| cone_value(&h, k, &x).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }
}
