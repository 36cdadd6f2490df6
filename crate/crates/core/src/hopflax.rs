//! Discrete Hopf-Lax flows
//! `T^t u(x) = max_y (u(y) - t L((y - x)/t))` and
//! `T_t u(x) = min_y (u(y) + t L((x - y)/t))` over grid nodes `y`.
//!
//! Offsets whose cost exceeds `alpha >= osc u` can never beat `y = x`, so the
//! stencil keeps only offsets with cost `<= alpha`; this truncation is exact.
//! The stencil is also cut at the grid edge, which makes the flow the exact
//! discrete sup over the closed grid. A node is flagged valid when no node
//! that ties or beats `u(x)` lies on the outer ring of the grid, i.e. the
//! edge of the box does not constrain the max.

use crate::error::{Error, Result};
use crate::ext::{is_inf, sat_scale, INF};
use crate::field::{Grid, ScalarField};
use crate::hamiltonian::{CoercivityProfile, HamiltonianModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One row `di` of a stencil: offsets `(di, dj0 + m)` with `costs[m]`.
#[derive(Debug, Clone)]
struct Row {
    di: isize,
    dj0: isize,
    costs: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Stencil {
    rows: Vec<Row>,
}

impl Stencil {
    /// Number of offsets with finite cost.
    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.costs.iter().filter(|c| !is_inf(**c)).count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(di, dj, cost)` in lexicographic order.
    pub fn offsets(&self) -> Vec<(isize, isize, f64)> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (m, &c) in r.costs.iter().enumerate() {
                if !is_inf(c) {
                    out.push((r.di, r.dj0 + m as isize, c));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FlowParams {
    pub t: f64,
    /// Locality radius: the smallest `r` with `t < t0(alpha, r)`, capped at
    /// the grid diameter.
    pub radius: f64,
    pub alpha: f64,
    up: Stencil,
    down: Stencil,
    profile: Option<CoercivityProfile>,
    grid: Grid,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub field: ScalarField,
    pub valid: Vec<bool>,
    /// Node realizing the max (up) or min (down); lowest index on ties.
    pub argmax: Vec<usize>,
}

impl FlowParams {
    pub fn new(h: &HamiltonianModel, grid: &Grid, t: f64, alpha: f64) -> Result<Self> {
        Self::build(h, grid, t, alpha, None)
    }

    pub fn for_field(h: &HamiltonianModel, u: &ScalarField, t: f64) -> Result<Self> {
        Self::new(h, &u.grid, t, u.osc())
    }

    /// Stencil truncated at radius `r`; needs `t < t0(alpha, r)`.
    pub fn truncated(h: &HamiltonianModel, grid: &Grid, t: f64, alpha: f64, r: f64) -> Result<Self> {
        let t0 = h.profile()?.t_zero(alpha, r)?;
        if !(t < t0) {
            return Err(Error::Locality(format!("t = {t} is not below t0 = {t0} for r = {r}")));
        }
        Self::build(h, grid, t, alpha, Some(r))
    }

    fn build(h: &HamiltonianModel, grid: &Grid, t: f64, alpha: f64, cap: Option<f64>) -> Result<Self> {
        if h.dims != grid.dims {
            return Err(Error::Input("H and grid dimensions differ".into()));
        }
        if !(t >= 0.0) || !(alpha >= 0.0) {
            return Err(Error::Input("flow needs t >= 0 and alpha >= 0".into()));
        }
        let diam = grid.diameter();
        if t == 0.0 {
            let id = Stencil { rows: vec![Row { di: 0, dj0: 0, costs: vec![0.0] }] };
            return Ok(FlowParams {
                t,
                radius: 0.0,
                alpha,
                up: id.clone(),
                down: id,
                profile: None,
                grid: grid.clone(),
            });
        }
        let prof = h.profile()?.clone();
        let radius = prof.locality_radius(t, alpha).unwrap_or(diam).min(diam);
        // past r_enum every offset costs more than alpha
        let r_enum = prof
            .radii
            .iter()
            .zip(&prof.m)
            .find(|(&s, &m)| is_inf(m) || m * t * s > alpha)
            .map_or(diam, |(&s, _)| t * s)
            .max(1.5 * grid.spacing())
            .min(diam);
        let r_enum = cap.map_or(r_enum, |c| c.min(r_enum));
        let (up, down, nonzero_finite) = stencils(h, grid, t, alpha, r_enum);
        if !nonzero_finite {
            return Err(Error::DegenerateStencil(format!(
                "no nonzero offset has finite cost at t = {t} (grid step {})",
                grid.spacing()
            )));
        }
        Ok(FlowParams { t, radius, alpha, up, down, profile: Some(prof), grid: grid.clone() })
    }

    /// Coercivity data of `H`; `None` at `t = 0`.
    pub fn profile(&self) -> Option<&CoercivityProfile> {
        self.profile.as_ref()
    }

    pub fn up_stencil(&self) -> &Stencil {
        &self.up
    }

    pub fn down_stencil(&self) -> &Stencil {
        &self.down
    }

    /// Up or down reduction at node `x`: `(value, argmax, edge)`, where
    /// `edge` records whether a node tying or beating `u(x)` lies on the
    /// outer ring of the grid. With `sym` only offsets `d` with `x - d` also
    /// on the grid are used.
    #[inline]
    fn reduce(&self, vals: &[f64], x: usize, up: bool, sym: bool) -> (f64, usize, bool) {
        let g = &self.grid;
        let (i, j) = g.ij(x);
        let (n0, n1) = (g.n[0] as isize, g.n[1] as isize);
        let (i, j) = (i as isize, j as isize);
        let two_d = g.dims == 2;
        let ux = vals[x];
        let st = if up { &self.up } else { &self.down };
        let mut best = if up { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut arg = x;
        let mut edge = false;
        for r in &st.rows {
            let ii = i + r.di;
            if ii < 0 || ii >= n0 || (sym && (i - r.di < 0 || i - r.di >= n0)) {
                continue;
            }
            let row_edge = ii == 0 || ii == n0 - 1;
            let len = r.costs.len() as isize;
            let (mut lo, mut hi) = (r.dj0.max(-j), (r.dj0 + len - 1).min(n1 - 1 - j));
            if sym {
                lo = lo.max(j - (n1 - 1));
                hi = hi.min(j);
            }
            if lo > hi {
                continue;
            }
            let base = ii * n1 + j;
            for dj in lo..=hi {
                let c = r.costs[(dj - r.dj0) as usize];
                let y = (base + dj) as usize;
                let uy = vals[y];
                let (v, beats) = if up { (uy - c, uy - c >= ux) } else { (uy + c, uy + c <= ux) };
                if (up && v > best) || (!up && v < best) {
                    best = v;
                    arg = y;
                }
                if beats && !edge {
                    let jj = j + dj;
                    edge = row_edge || (two_d && (jj == 0 || jj == n1 - 1));
                }
            }
        }
        (best, arg, edge)
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if !u.grid.same_shape(&self.grid) {
            return Err(Error::Input("field grid differs from the flow grid".into()));
        }
        u.check_finite()?;
        let osc = u.osc();
        if osc > self.alpha * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Locality(format!(
                "osc u = {osc} exceeds the flow bound alpha = {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn apply(&self, u: &ScalarField, up: bool) -> Result<FlowResult> {
        self.check(u)?;
        let rows = crate::par::map_range(u.len(), |x| self.reduce(&u.values, x, up, false));
        let mut values = Vec::with_capacity(rows.len());
        let mut argmax = Vec::with_capacity(rows.len());
        let mut valid = Vec::with_capacity(rows.len());
        for (v, a, edge) in rows {
            values.push(v);
            argmax.push(a);
            valid.push(!edge);
        }
        Ok(FlowResult { field: u.with_values(values), valid, argmax })
    }

    /// Flow values at non-mask nodes over the point-symmetric part of the
    /// stencil, mask nodes copied. Symmetric stencils make affine fields
    /// exact fixed points of the midpoint sweep near the grid edge.
    pub(crate) fn apply_interior(&self, vals: &[f64], mask: &[bool], up: bool) -> Vec<f64> {
        crate::par::map_range(vals.len(), |x| if mask[x] { vals[x] } else { self.reduce(vals, x, up, true).0 })
    }
}

fn stencils(
    h: &HamiltonianModel,
    grid: &Grid,
    t: f64,
    alpha: f64,
    r: f64,
) -> (Stencil, Stencil, bool) {
    let h0 = grid.h[0];
    let h1 = if grid.dims == 2 { grid.h[1] } else { 1.0 };
    let ri = ((r / h0) + 1e-9).floor().min((grid.n[0] - 1) as f64) as isize;
    let rj = if grid.dims == 2 { ((r / h1) + 1e-9).floor().min((grid.n[1] - 1) as f64) as isize } else { 0 };
    let keep = alpha * (1.0 + 1e-12);
    let mut any_finite = false;
    let mut up_rows = Vec::new();
    let mut down_rows = Vec::new();
    for di in -ri..=ri {
        let mut up_row: Vec<(isize, f64)> = Vec::new();
        let mut down_row: Vec<(isize, f64)> = Vec::new();
        for dj in -rj..=rj {
            let d = [di as f64 * h0, dj as f64 * h1];
            let dist = if grid.dims == 2 { d[0].hypot(d[1]) } else { d[0].abs() };
            if dist > r * (1.0 + 1e-12) {
                continue;
            }
            let q: Vec<f64> = d[..grid.dims].iter().map(|x| x / t).collect();
            let qm: Vec<f64> = q.iter().map(|x| -x).collect();
            let cu = sat_scale(t, h.lagrangian(&q));
            let cd = sat_scale(t, h.lagrangian(&qm));
            if dist > 0.0 && (!is_inf(cu) || !is_inf(cd)) {
                any_finite = true;
            }
            if cu <= keep {
                up_row.push((dj, cu));
            }
            if cd <= keep {
                down_row.push((dj, cd));
            }
        }
        for (row, out) in [(up_row, &mut up_rows), (down_row, &mut down_rows)] {
            if let (Some(first), Some(last)) = (row.first(), row.last()) {
                let dj0 = first.0;
                let len = (last.0 - dj0 + 1) as usize;
                let mut costs = vec![INF; len];
                for (dj, c) in &row {
                    costs[(dj - dj0) as usize] = *c;
                }
                out.push(Row { di, dj0, costs });
            }
        }
    }
    (Stencil { rows: up_rows }, Stencil { rows: down_rows }, any_finite)
}

pub fn flow_up(u: &ScalarField, fp: &FlowParams) -> Result<FlowResult> {
    fp.apply(u, true)
}

pub fn flow_down(u: &ScalarField, fp: &FlowParams) -> Result<FlowResult> {
    fp.apply(u, false)
}

/// Flow value, argmax and validity at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub value: f64,
    pub argmax: usize,
    pub valid: bool,
}

/// `T^t u` (up) or `T_t u` at the listed nodes only.
pub fn flow_at(u: &ScalarField, fp: &FlowParams, nodes: &[usize], up: bool) -> Result<Vec<FlowSample>> {
    fp.check(u)?;
    if let Some(&x) = nodes.iter().find(|&&x| x >= u.len()) {
        return Err(Error::Input(format!("node {x} is outside the grid")));
    }
    Ok(crate::par::map_slice(nodes, |&x| {
        let (value, argmax, edge) = fp.reduce(&u.values, x, up, false);
        FlowSample { value, argmax, valid: !edge }
    }))
}

#[derive(Debug, Clone)]
pub struct SemigroupDefect {
    /// `|T^{t+s} u - T^t T^s u|`, zero off the margin interior.
    pub defect: ScalarField,
    pub valid: Vec<bool>,
    pub max: f64,
}

/// Compares `T^{t+s} u` with `T^t (T^s u)` on nodes that are valid for
/// `T^{t+s}` and whose `T^t` stencil stays inside nodes valid for `T^s`.
pub fn semigroup_defect(h: &HamiltonianModel, u: &ScalarField, t: f64, s: f64) -> Result<SemigroupDefect> {
    let alpha = u.osc();
    let fp_ts = FlowParams::new(h, &u.grid, t + s, alpha)?;
    let fp_s = FlowParams::new(h, &u.grid, s, alpha)?;
    let fp_t = FlowParams::new(h, &u.grid, t, alpha)?;
    let a = flow_up(u, &fp_ts)?;
    let bs = flow_up(u, &fp_s)?;
    let b = flow_up(&bs.field, &fp_t)?;
    let g = &u.grid;
    let offsets = fp_t.up.offsets();
    let valid: Vec<bool> = (0..u.len())
        .map(|x| {
            if !a.valid[x] {
                return false;
            }
            let (i, j) = g.ij(x);
            offsets.iter().all(|&(di, dj, _)| {
                let ii = i as isize + di;
                let jj = j as isize + dj;
                if ii < 0 || jj < 0 || ii >= g.n[0] as isize || jj >= g.n[1] as isize {
                    return true;
                }
                bs.valid[g.index(ii as usize, jj as usize)]
            })
        })
        .collect();
    if !valid.iter().any(|&v| v) {
        return Err(Error::Locality("no node keeps its stencils inside the grid".into()));
    }
    let values: Vec<f64> = (0..u.len())
        .map(|x| if valid[x] { (a.field.values[x] - b.field.values[x]).abs() } else { 0.0 })
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(SemigroupDefect { defect: u.with_values(values), valid, max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawViolation {
    pub law: &'static str,
    pub node: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FlowLawReport {
    pub violations: Vec<LawViolation>,
    pub checked_nodes: usize,
}

impl FlowLawReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const LAW_CHAIN: &str = "order chain";
pub const LAW_MONOTONE: &str = "monotonicity";
pub const LAW_CONSTANTS: &str = "constant commutation";
pub const LAW_SANDWICH: &str = "sandwich";

/// Rounding slack for identities that hold exactly in real arithmetic but
/// pass through one extra addition in floating point.
fn ulps(x: f64) -> f64 {
    8.0 * f64::EPSILON * (1.0 + x.abs())
}

/// Checks the order chain `inf u <= T_t u <= u <= T^t u`, monotonicity,
/// commutation with a constant shift and the sandwich
/// `T^t T_t u <= u <= T_t T^t u` at every node.
pub fn verify_flow_laws(u: &ScalarField, fp: &FlowParams, seed: u64) -> Result<FlowLawReport> {
    let mut rep = FlowLawReport { violations: Vec::new(), checked_nodes: u.len() };
    let up = flow_up(u, fp)?;
    let down = flow_down(u, fp)?;
    let inf_u = u.min();
    let mut push = |law, node, amount: f64| rep.violations.push(LawViolation { law, node, amount });
    for x in 0..u.len() {
        let (d, v, w) = (down.field.values[x], u.values[x], up.field.values[x]);
        if inf_u > d {
            push(LAW_CHAIN, x, inf_u - d);
        }
        if d > v {
            push(LAW_CHAIN, x, d - v);
        }
        if v > w {
            push(LAW_CHAIN, x, v - w);
        }
    }
    // monotonicity against v in [u, max u], which keeps osc v <= osc u
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = u.max();
    let bumped: Vec<f64> = u.values.iter().map(|&x| x + rng.random::<f64>() * (top - x)).collect();
    let vf = u.with_values(bumped);
    let vup = flow_up(&vf, fp)?;
    let vdown = flow_down(&vf, fp)?;
    for x in 0..u.len() {
        if up.field.values[x] > vup.field.values[x] {
            push(LAW_MONOTONE, x, up.field.values[x] - vup.field.values[x]);
        }
        if down.field.values[x] > vdown.field.values[x] {
            push(LAW_MONOTONE, x, down.field.values[x] - vdown.field.values[x]);
        }
    }
    let c = 5.0;
    let shifted = u.with_values(u.values.iter().map(|x| x + c).collect());
    let sup = flow_up(&shifted, fp)?;
    let sdown = flow_down(&shifted, fp)?;
    for x in 0..u.len() {
        for (a, b) in [(sup.field.values[x], up.field.values[x]), (sdown.field.values[x], down.field.values[x])] {
            let gap = (a - (b + c)).abs();
            if gap > ulps(a) {
                push(LAW_CONSTANTS, x, gap);
            }
        }
    }
    let up_down = flow_up(&down.field, fp)?;
    let down_up = flow_down(&up.field, fp)?;
    for x in 0..u.len() {
        let v = u.values[x];
        if up_down.field.values[x] > v + ulps(v) {
            push(LAW_SANDWICH, x, up_down.field.values[x] - v);
        }
        if down_up.field.values[x] < v - ulps(v) {
            push(LAW_SANDWICH, x, v - down_up.field.values[x]);
        }
    }
    Ok(rep)
}
