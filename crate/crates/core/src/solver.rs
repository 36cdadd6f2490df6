//! Dirichlet solver built from the flows: Jacobi sweeps of
//! `u <- (1-λ) u + λ (T^t u + T_t u) / 2` with the boundary mask held fixed.
//! Also the comparison gap and the stationary-point search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::field::ScalarField;
use crate::hamiltonian::HamiltonianModel;
use crate::hopflax::{flow_down, flow_up, FlowParams};

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    BoundaryMin,
    BoundaryMax,
    /// Uniform in `[min g, max g]`.
    Random(u64),
    /// Interior values taken from this field.
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Flow time; `None` is `t_zero(osc g, r) / 4`.
    pub t: Option<f64>,
    /// Locality radius `r`; `None` is half the shortest grid side.
    pub radius: Option<f64>,
    /// Stop once the residual and the estimated distance to the fixed
    /// point are both below this.
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitMode,
    pub damping: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { t: None, radius: None, tol: 1e-8, max_iter: 200_000, init: InitMode::BoundaryMin, damping: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// `max |(T^t u + T_t u)/2 - u|` over the interior at the last sweep.
    pub residual: f64,
    pub history: Vec<f64>,
    pub converged: bool,
    pub t: f64,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    pub fn verdict(&self) -> &'static str {
        if self.converged {
            "converged"
        } else {
            "not converged"
        }
    }
}

fn half_side(u: &ScalarField) -> f64 {
    let g = &u.grid;
    let a = (g.n[0] - 1) as f64 * g.h[0];
    if g.dims == 1 {
        0.5 * a
    } else {
        0.5 * a.min((g.n[1] - 1) as f64 * g.h[1])
    }
}

/// Flow time used by [`solve_dirichlet`] for boundary data `g`.
pub fn solver_time(h: &HamiltonianModel, g: &ScalarField, cfg: &SolveConfig) -> Result<f64> {
    let r = cfg.radius.unwrap_or_else(|| half_side(g));
    let osc = boundary_range(g).map(|(a, b)| b - a)?;
    let t0 = h.profile()?.t_zero(osc, r)?;
    match cfg.t {
        None => Ok(t0 / 4.0),
        Some(t) if t > 0.0 && t < t0 => Ok(t),
        Some(t) => Err(Error::Locality(format!("t = {t} is not in (0, t_zero = {t0})"))),
    }
}

fn boundary_range(g: &ScalarField) -> Result<(f64, f64)> {
    let mut it = (0..g.len()).filter(|&x| g.mask[x]).map(|x| g.values[x]).peekable();
    if it.peek().is_none() {
        return input("boundary mask is empty");
    }
    Ok(it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v))))
}

/// Flow parameters for boundary data `g`: `alpha = osc g` on the mask.
pub fn solver_params(h: &HamiltonianModel, g: &ScalarField, cfg: &SolveConfig) -> Result<FlowParams> {
    let t = solver_time(h, g, cfg)?;
    let (lo, hi) = boundary_range(g)?;
    FlowParams::new(h, &g.grid, t, hi - lo)
}

/// One sweep; returns the new field and the residual of the input.
pub fn sweep(fp: &FlowParams, u: &ScalarField, damping: f64) -> (ScalarField, f64) {
    let up = fp.apply_interior(&u.values, &u.mask, true);
    let down = fp.apply_interior(&u.values, &u.mask, false);
    let mut res: f64 = 0.0;
    let vals = (0..u.len())
        .map(|x| {
            if u.mask[x] {
                return u.values[x];
            }
            let mid = 0.5 * (up[x] + down[x]);
            res = res.max((mid - u.values[x]).abs());
            if damping == 1.0 {
                mid
            } else {
                (1.0 - damping) * u.values[x] + damping * mid
            }
        })
        .collect();
    (u.with_values(vals), res)
}

/// Solves on the interior of `g.mask` with `g` fixed on the mask. The field
/// is returned even when the iteration did not converge.
pub fn solve_dirichlet(
    h: &HamiltonianModel,
    g: &ScalarField,
    cfg: &SolveConfig,
) -> Result<(ScalarField, ConvergenceReport)> {
    g.check_finite()?;
    if !(cfg.tol > 0.0) {
        return input("tolerance must be positive");
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return input("damping must lie in (0, 1]");
    }
    let (lo, hi) = boundary_range(g)?;
    let fp = solver_params(h, g, cfg)?;
    let mut vals = g.values.clone();
    match &cfg.init {
        InitMode::BoundaryMin => fill(g, &mut vals, |_| lo),
        InitMode::BoundaryMax => fill(g, &mut vals, |_| hi),
        InitMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            fill(g, &mut vals, |_| lo + (hi - lo) * rng.random::<f64>())
        }
        InitMode::Field(f) => {
            if f.len() != g.len() {
                return input("initial field has the wrong length");
            }
            fill(g, &mut vals, |x| f[x].clamp(lo, hi))
        }
    }
    let mut u = g.with_values(vals);
    let mut history = Vec::new();
    let mut converged = false;
    while history.len() < cfg.max_iter {
        let (next, res) = sweep(&fp, &u, cfg.damping);
        history.push(res);
        if res < cfg.tol && error_bound(&history) < cfg.tol {
            converged = true;
            break;
        }
        u = next;
    }
    let mut warnings = Vec::new();
    let burn = history.len() / 10;
    if let Some(k) = (burn + 1..history.len()).find(|&k| history[k] > history[k - 1] * (1.0 + 1e-9) + 1e-15) {
        warnings.push(format!("residual rose at sweep {k} after burn-in"));
    }
    let report = ConvergenceReport {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(0.0),
        history,
        converged,
        t: fp.t,
        warnings,
    };
    Ok((u, report))
}

/// `res * ρ / (1 - ρ)` with `ρ` the largest residual ratio over the last
/// [`RATE_WINDOW`] sweeps: the distance to the fixed point of a contraction
/// with that rate.
fn error_bound(history: &[f64]) -> f64 {
    let n = history.len();
    let res = history[n - 1];
    if res == 0.0 {
        return 0.0;
    }
    if n <= RATE_WINDOW {
        return f64::INFINITY;
    }
    let rho = (n - RATE_WINDOW..n).map(|k| history[k] / history[k - 1]).fold(0.0, f64::max);
    if rho >= 1.0 {
        f64::INFINITY
    } else {
        res * rho / (1.0 - rho)
    }
}

const RATE_WINDOW: usize = 10;

fn fill(g: &ScalarField, vals: &mut [f64], mut f: impl FnMut(usize) -> f64) {
    for (x, v) in vals.iter_mut().enumerate() {
        if !g.mask[x] {
            *v = f(x);
        }
    }
}

/// `max_interior (u - v) - max_boundary (u - v)`; at most 0 when `u - v`
/// peaks on the boundary.
pub fn comparison_gap(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    if !u.grid.same_shape(&v.grid) || u.mask != v.mask {
        return input("fields differ in grid or boundary mask");
    }
    let (mut inner, mut outer) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for x in 0..u.len() {
        let d = u.values[x] - v.values[x];
        if u.mask[x] {
            outer = outer.max(d);
        } else {
            inner = inner.max(d);
        }
    }
    if outer == f64::NEG_INFINITY {
        return input("boundary mask is empty");
    }
    Ok(if inner == f64::NEG_INFINITY { 0.0 } else { inner - outer })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StationaryOutcome {
    /// `max (f-g)` over the `r`-interior is attained on the annulus
    /// between the `r`- and `2r`-interiors.
    Certificate { max: f64, node: usize },
    /// `x0` in the `2r`-interior where both fields are fixed by both flows.
    Stationary { node: usize, defect: f64 },
    /// The maximum sits inside but no maximizer is stationary within `tol`.
    Unresolved { node: usize, defect: f64 },
}

/// Search for the boundary certificate or a stationary point, following
/// the maximizer sets `E = argmax (f-g)` and `F = argmax_E f`. Ties and
/// identities are decided within `tol`.
pub fn stationary_point_search(
    h: &HamiltonianModel,
    f: &ScalarField,
    g: &ScalarField,
    t: f64,
    r: f64,
    tol: f64,
) -> Result<StationaryOutcome> {
    if !f.grid.same_shape(&g.grid) || f.mask != g.mask {
        return input("f and g differ in grid or boundary mask");
    }
    if !(t > 0.0 && r > 0.0 && tol >= 0.0) {
        return input("needs t > 0, r > 0 and tol >= 0");
    }
    f.check_finite()?;
    g.check_finite()?;
    let alpha = f.osc().max(g.osc());
    let t0 = h.profile()?.t_zero(alpha, r)?;
    if t >= t0 {
        return Err(Error::Locality(format!("t = {t} is not below t_zero = {t0}")));
    }
    let dist = f.mask_distance();
    let fp = FlowParams::new(h, &f.grid, t, alpha)?;
    let (fu, fd) = (flow_up(f, &fp)?, flow_down(f, &fp)?);
    let (gu, gd) = (flow_up(g, &fp)?, flow_down(g, &fp)?);
    let eps = 1e-12 * r;
    let inner = |x: usize| !f.mask[x] && dist[x] > 2.0 * r + eps;
    let ring: Vec<usize> = (0..f.len()).filter(|&x| !f.mask[x] && dist[x] >= r - eps).collect();
    if ring.is_empty() {
        return input("no node lies at distance r from the boundary");
    }

    let mut worst = (0.0, 0usize, "");
    for x in (0..f.len()).filter(|&x| inner(x)) {
        let df = -(fu.field.values[x] + fd.field.values[x] - 2.0 * f.values[x]);
        let dg = gu.field.values[x] + gd.field.values[x] - 2.0 * g.values[x];
        if df > worst.0 {
            worst = (df, x, "T^t f + T_t f - 2f < 0");
        }
        if dg > worst.0 {
            worst = (dg, x, "T^t g + T_t g - 2g > 0");
        }
    }
    if worst.0 > tol {
        return Err(Error::Precondition { node: worst.1, detail: format!("{} by {}", worst.2, worst.0) });
    }

    let d = |x: usize| f.values[x] - g.values[x];
    let top = ring.iter().map(|&x| d(x)).fold(f64::NEG_INFINITY, f64::max);
    if let Some(&x) = ring.iter().find(|&&x| !inner(x) && d(x) >= top - tol) {
        return Ok(StationaryOutcome::Certificate { max: top, node: x });
    }
    let e: Vec<usize> = ring.iter().copied().filter(|&x| d(x) >= top - tol).collect();
    let fmax = e.iter().map(|&x| f.values[x]).fold(f64::NEG_INFINITY, f64::max);
    let defect = |x: usize| {
        [
            fu.field.values[x] - f.values[x],
            f.values[x] - fd.field.values[x],
            gu.field.values[x] - g.values[x],
            g.values[x] - gd.field.values[x],
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let mut best = (f64::INFINITY, e[0]);
    for &x in e.iter().filter(|&&x| f.values[x] >= fmax - tol) {
        let dx = defect(x);
        if dx <= tol {
            return Ok(StationaryOutcome::Stationary { node: x, defect: dx });
        }
        if dx < best.0 {
            best = (dx, x);
        }
    }
    Ok(StationaryOutcome::Unresolved { node: best.1, defect: best.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn affine_is_recovered_in_one_dimension() {
        let h = HamiltonianModel::half_square(1).unwrap();
        let g = ScalarField::from_fn(&Grid::new_1d(33, 0.0, 1.0).unwrap(), |x| x[0]);
        let (u, rep) = solve_dirichlet(&h, &g, &SolveConfig::default()).unwrap();
        assert!(rep.converged, "{}", rep.residual);
        let err = u.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn affine_is_a_fixed_point() {
        let h = HamiltonianModel::euclidean(2).unwrap();
        let g = ScalarField::from_fn(&Grid::new_2d(17, 17, [0.0, 0.0], [1.0, 1.0]).unwrap(), |x| 0.3 * x[0] - 0.5 * x[1]);
        let fp = solver_params(&h, &g, &SolveConfig::default()).unwrap();
        let (next, res) = sweep(&fp, &g, 1.0);
        assert!(res < 1e-12, "{res}");
        assert!(next.values.iter().zip(&g.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn maximum_principle_and_not_converged_report() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let grid = Grid::new_2d(9, 9, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let g = ScalarField::from_fn(&grid, |x| (3.0 * x[0]).sin() * x[1]);
        let cfg = SolveConfig { max_iter: 3, init: InitMode::Random(7), ..SolveConfig::default() };
        let (u, rep) = solve_dirichlet(&h, &g, &cfg).unwrap();
        assert!(!rep.converged && rep.iterations == 3);
        assert_eq!(rep.verdict(), "not converged");
        let (lo, hi) = boundary_range(&g).unwrap();
        assert!(u.values.iter().all(|v| *v >= lo && *v <= hi));
    }

    #[test]
    fn comparison_gap_examples() {
        let grid = Grid::new_2d(9, 9, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let u = ScalarField::from_fn(&grid, |x| x[0] * x[1]);
        assert_eq!(comparison_gap(&u, &u).unwrap(), 0.0);
        let v = u.with_values(u.values.iter().map(|a| a + 2.5).collect());
        assert!(comparison_gap(&u, &v).unwrap().abs() < 1e-12);
        let other = ScalarField::from_fn(&Grid::new_2d(5, 5, [0.0, 0.0], [1.0, 1.0]).unwrap(), |_| 0.0);
        assert!(matches!(comparison_gap(&u, &other), Err(Error::Input(_))));
    }

    #[test]
    fn stationary_search_certifies_affine_pairs() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let grid = Grid::new_2d(33, 33, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let zero = ScalarField::constant(&grid, 0.0);
        let out = stationary_point_search(&h, &zero, &zero, 0.005, 0.1, 1e-12).unwrap();
        assert!(matches!(out, StationaryOutcome::Certificate { .. }));
        let f = ScalarField::from_fn(&grid, |x| 0.4 * x[0] + 0.1 * x[1]);
        let g = ScalarField::from_fn(&grid, |x| -0.2 * x[0] + 0.3 * x[1]);
        match stationary_point_search(&h, &f, &g, 0.005, 0.1, 1e-12).unwrap() {
            StationaryOutcome::Certificate { max, node } => {
                // brute force: f - g = 0.6x - 0.2y peaks at the largest x, smallest y of the ring
                let dist = f.mask_distance();
                let best = (0..grid.len())
                    .filter(|&x| !f.mask[x] && dist[x] >= 0.1 - 1e-12)
                    .map(|x| f.values[x] - g.values[x])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(max, best);
                assert!((f.values[node] - g.values[node] - best).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn bump_violates_the_flow_precondition() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let grid = Grid::new_2d(33, 33, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let bump = ScalarField::from_fn(&grid, |x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            0.3 * (-r2 / 0.003).exp()
        });
        let zero = ScalarField::constant(&grid, 0.0);
        let r = stationary_point_search(&h, &bump, &zero, 0.01, 0.1, 1e-9);
        assert!(matches!(r, Err(Error::Precondition { .. })), "{r:?}");
    }
}
