//! Grid checks for the convexity criterion, its pointwise variant,
//! comparison with cones, `S⁺u`, Lipschitz bounds from cones and the
//! gradient/cone equivalence. These are falsifiers, not certificates.
//!
//! A grid flow undershoots the continuum sup by at most the lattice loss
//! `E(t)`, and `E(0) = 0`. Every flow tolerance below is built from `E`.

use crate::error::{input, Error, Result};
use crate::ext::{fmt_ext, INF};
use crate::field::{Grid, ScalarField};
use crate::geometry::{cone_constants, cone_levels, ConeData};
use crate::hamiltonian::{dense_directions, directions, HamiltonianModel};
use crate::hopflax::{flow_at, FlowParams, FlowSample};

pub const CONVEXITY: &str = "convexity";
pub const POINTWISE: &str = "pointwise";
pub const CONES_ABOVE: &str = "cones_above";
pub const CONES_BELOW: &str = "cones_below";

pub const SUMMARY_HEADER: &str = "criterion,verdict,worst_violation,witness";

/// Lattice-loss model for flow values.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    /// Multiplies the quadratic lattice loss to cover the curvature of `u`.
    pub safety: f64,
    /// Ladder times with `E(t)/t` above this do not enter `S⁺`.
    pub s_tol: f64,
    pub abs_tol: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { safety: 1.5, s_tol: 0.25, abs_tol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct CriteriaConfig {
    pub ladder: Vec<f64>,
    pub resolution: Resolution,
    /// Additive slack of the usc surrogate.
    pub usc_tol: f64,
    /// `R` of the bound `A_R` that sets the usc modulus `A_R h`; `None` is
    /// half the shortest grid side.
    pub lip_radius: Option<f64>,
    pub ks: Vec<f64>,
    /// Subdomain sides, in grid steps.
    pub sides: Vec<usize>,
    pub vertex_stride: usize,
    /// Cone tolerance is `cone_coef * h * (Lip u|V + K_k)`.
    pub cone_coef: f64,
    /// Test nodes; `None` is every node off the boundary mask.
    pub nodes: Option<Vec<usize>>,
}

impl CriteriaConfig {
    pub fn new(ladder: Vec<f64>) -> Self {
        CriteriaConfig {
            ladder,
            resolution: Resolution::default(),
            usc_tol: 0.05,
            lip_radius: None,
            ks: vec![1.0 / 4096.0, 1.0 / 256.0, 1.0 / 16.0, 0.25, 1.0, 4.0],
            sides: vec![4, 8, 16],
            vertex_stride: 8,
            cone_coef: 1.0,
            nodes: None,
        }
    }
}

fn half_side(g: &Grid) -> f64 {
    let a = (g.n[0] - 1) as f64 * g.h[0];
    if g.dims == 1 {
        0.5 * a
    } else {
        0.5 * a.min((g.n[1] - 1) as f64 * g.h[1])
    }
}

/// Geometric ladder of 8 times from `t0/64` to `t0/2`, where
/// `t0 = t_zero(osc u, r)` and `r` is half the shortest grid side.
pub fn default_ladder(h: &HamiltonianModel, u: &ScalarField) -> Result<Vec<f64>> {
    let t0 = h.profile()?.t_zero(u.osc(), half_side(&u.grid))?;
    Ok((0..8).map(|i| t0 / 64.0 * (32f64).powf(i as f64 / 7.0)).collect())
}

fn check_ladder(h: &HamiltonianModel, u: &ScalarField, nodes: &[usize], ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return input("ladder is empty");
    }
    if ladder.iter().any(|t| !(t.is_finite() && *t > 0.0)) || ladder.windows(2).any(|w| !(w[0] < w[1])) {
        return input("ladder times must be positive and strictly increasing");
    }
    let r = nodes.iter().map(|&x| u.grid.edge_distance(x)).fold(0.0, f64::max);
    if !(r > 0.0) {
        return Err(Error::Margin("no test node lies off the grid edge".into()));
    }
    let t0 = h.profile()?.t_zero(u.osc(), r)?;
    let top = ladder[ladder.len() - 1];
    if top >= t0 {
        return Err(Error::Locality(format!("ladder reaches {top}, t_zero is {t0}")));
    }
    Ok(())
}

/// Largest difference quotient of `u` between 8-neighbours.
pub fn grid_lipschitz(u: &ScalarField) -> f64 {
    let g = &u.grid;
    (0..u.len())
        .map(|x| {
            let cx = g.coord(x);
            g.neighbors(x)
                .into_iter()
                .filter(|&y| y > x)
                .map(|y| {
                    let cy = g.coord(y);
                    let d = if g.dims == 1 { (cy[0] - cx[0]).abs() } else { (cy[0] - cx[0]).hypot(cy[1] - cx[1]) };
                    (u.values[y] - u.values[x]).abs() / d
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Radius of the zero set of `L` (the dual ball) along `dir`.
fn dual_radius(h: &HamiltonianModel, dir: &[f64]) -> f64 {
    let at = |r: f64| h.lagrangian(&dir.iter().map(|x| r * x).collect::<Vec<_>>());
    let mut hi = 1.0;
    while at(hi) < INF && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < INF {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Upper bound on `sup - max over grid nodes` for one flow evaluation.
///
/// Norm-like `H`: `lip` times the distance from the scaled dual ball to the
/// stencil. Smooth `L`: `safety * λ Σh_i² / (8t)` with `λ` bounding `D²L`.
pub fn lattice_loss(
    h: &HamiltonianModel,
    grid: &Grid,
    lip: f64,
    t: f64,
    offsets: &[(isize, isize)],
    safety: f64,
) -> f64 {
    if t == 0.0 || lip == 0.0 {
        return 0.0;
    }
    if h.is_norm_like() {
        let pts: Vec<[f64; 2]> = offsets
            .iter()
            .map(|&(di, dj)| [di as f64 * grid.h[0], if grid.dims == 2 { dj as f64 * grid.h[1] } else { 0.0 }])
            .collect();
        let dirs = dense_directions(grid.dims, 360);
        let defect = dirs
            .iter()
            .map(|d| {
                let r = t * dual_radius(h, d);
                let b = [r * d[0], if grid.dims == 2 { r * d[1] } else { 0.0 }];
                pts.iter().map(|p| (p[0] - b[0]).hypot(p[1] - b[1])).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        return lip * defect;
    }
    let q_max = directions(grid.dims)
        .iter()
        .map(|d| h.eval(&d.iter().map(|x| 2.0 * lip * x).collect::<Vec<_>>()) / lip)
        .fold(0.0, f64::max);
    let lambda = h.lagrangian_curvature(q_max).unwrap_or_else(|| numeric_curvature(h, q_max));
    let hs: f64 = grid.h[..grid.dims].iter().map(|x| x * x).sum();
    safety * lambda * hs / (8.0 * t)
}

/// Largest second difference of `L` along sampled lines inside `|q| <= r`.
fn numeric_curvature(h: &HamiltonianModel, r: f64) -> f64 {
    let d = h.dims;
    let step = r / 64.0;
    let mut lines = directions(d);
    for i in 0..d {
        lines.push((0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect());
    }
    let mut best: f64 = 0.0;
    for base in directions(d) {
        for j in 1..=32 {
            let q: Vec<f64> = base.iter().map(|x| x * r * j as f64 / 32.0).collect();
            let l0 = h.lagrangian(&q);
            for e in &lines {
                let plus: Vec<f64> = q.iter().zip(e).map(|(a, b)| a + step * b).collect();
                let minus: Vec<f64> = q.iter().zip(e).map(|(a, b)| a - step * b).collect();
                let s = (h.lagrangian(&plus) - 2.0 * l0 + h.lagrangian(&minus)) / (step * step);
                best = best.max(if s.is_finite() { s } else { INF });
            }
        }
    }
    best
}

/// `T^t u` on the test nodes for every ladder time, with `t = 0` first.
struct LadderFlows {
    times: Vec<f64>,
    loss: Vec<f64>,
    values: Vec<Vec<f64>>,
    /// Number of leading times (including 0) at which the flow is valid.
    valid_len: Vec<usize>,
}

/// Up flow at `nodes`; a stencil with no admissible nonzero offset is the
/// identity, which is what the grid sup is in that case.
fn sample_up(
    h: &HamiltonianModel,
    u: &ScalarField,
    nodes: &[usize],
    t: f64,
) -> Result<(Vec<FlowSample>, Vec<(isize, isize)>)> {
    match FlowParams::new(h, &u.grid, t, u.osc()) {
        Ok(fp) => {
            let offs = fp.up_stencil().offsets().into_iter().map(|(a, b, _)| (a, b)).collect();
            Ok((flow_at(u, &fp, nodes, true)?, offs))
        }
        Err(Error::DegenerateStencil(_)) => Ok((
            nodes.iter().map(|&x| FlowSample { value: u.values[x], argmax: x, valid: true }).collect(),
            vec![(0, 0)],
        )),
        Err(e) => Err(e),
    }
}

fn ladder_flows(
    h: &HamiltonianModel,
    u: &ScalarField,
    nodes: &[usize],
    ladder: &[f64],
    res: &Resolution,
) -> Result<LadderFlows> {
    check_ladder(h, u, nodes, ladder)?;
    u.check_finite()?;
    let lip = grid_lipschitz(u);
    let mut times = vec![0.0];
    let mut loss = vec![0.0];
    let mut values: Vec<Vec<f64>> = nodes.iter().map(|&x| vec![u.values[x]]).collect();
    let mut valid_len = vec![1usize; nodes.len()];
    for &t in ladder {
        let (samples, offs) = sample_up(h, u, nodes, t)?;
        let step = times.len();
        times.push(t);
        loss.push(lattice_loss(h, &u.grid, lip, t, &offs, res.safety));
        for (k, s) in samples.iter().enumerate() {
            values[k].push(s.value);
            if s.valid && valid_len[k] == step {
                valid_len[k] += 1;
            }
        }
    }
    Ok(LadderFlows { times, loss, values, valid_len })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SPlusMode {
    /// Minimum chord slope over resolved ladder times; the whole valid
    /// ladder passed the convexity check.
    Inf,
    /// Richardson extrapolation of the two smallest resolved chord slopes
    /// inside the convex prefix, or the single one available.
    Extrapolated,
    /// No ladder time meets the resolution bound; the smallest chord is used.
    Unresolved,
    /// No valid flow at the node.
    Unavailable,
}

impl SPlusMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SPlusMode::Inf => "inf",
            SPlusMode::Extrapolated => "extrapolated",
            SPlusMode::Unresolved => "unresolved",
            SPlusMode::Unavailable => "unavailable",
        }
    }

    /// True when the estimate did not come from a verified convex ladder.
    pub fn approximate(&self) -> bool {
        *self != SPlusMode::Inf
    }
}

#[derive(Debug, Clone)]
pub struct SPlusField {
    /// Estimates; `NaN` off the test nodes and where unavailable.
    pub field: ScalarField,
    pub ladder: Vec<f64>,
    pub mode: Vec<SPlusMode>,
    /// Bound on how far the estimate may sit below `S⁺u` from lattice loss.
    pub err: Vec<f64>,
}

impl SPlusField {
    pub fn value(&self, x: usize) -> f64 {
        self.field.values[x]
    }

    pub fn to_csv(&self) -> String {
        let g = &self.field.grid;
        let mut s = String::from("node,x,y,splus,mode,err\n");
        for x in 0..self.field.len() {
            if self.mode[x] == SPlusMode::Unavailable {
                continue;
            }
            let c = g.coord(x);
            s.push_str(&format!(
                "{x},{},{},{},{},{}\n",
                fmt_ext(c[0]),
                fmt_ext(c[1]),
                fmt_ext(self.field.values[x]),
                self.mode[x].as_str(),
                fmt_ext(self.err[x])
            ));
        }
        s
    }
}

/// Per-node outcome of the ladder analysis.
#[derive(Debug, Clone, Copy)]
struct NodeAnalysis {
    /// Valid time points including 0.
    n: usize,
    /// Slopes in the longest convex prefix.
    prefix: usize,
    /// Largest second-difference violation and the middle time index.
    second: (f64, usize),
    /// Largest chord-monotonicity violation and the later time index.
    chord: (f64, usize),
    splus: f64,
    mode: SPlusMode,
    err: f64,
}

fn analyse_node(vals: &[f64], times: &[f64], loss: &[f64], n: usize, res: &Resolution) -> NodeAnalysis {
    let slopes: Vec<f64> = (1..n).map(|i| (vals[i] - vals[i - 1]) / (times[i] - times[i - 1])).collect();
    let chord = |i: usize| (vals[i] - vals[0]) / times[i];
    let mut prefix = slopes.len().min(1);
    let mut broken = false;
    let mut second = (f64::NEG_INFINITY, 0);
    for i in 1..n.saturating_sub(1) {
        let tol = loss[i + 1] / (times[i + 1] - times[i]) + loss[i - 1] / (times[i] - times[i - 1]) + res.abs_tol;
        let v = slopes[i - 1] - slopes[i] - tol;
        if v > second.0 {
            second = (v, i);
        }
        if v > 0.0 {
            broken = true;
        } else if !broken {
            prefix += 1;
        }
    }
    let mut chord_w = (f64::NEG_INFINITY, 0);
    for i in 1..n.saturating_sub(1) {
        let v = chord(i) - chord(i + 1) - loss[i + 1] / times[i + 1] - res.abs_tol;
        if v > chord_w.0 {
            chord_w = (v, i + 1);
        }
    }
    let resolved = |i: &usize| loss[*i] / times[*i] <= res.s_tol;
    let e = |i: usize| loss[i] / times[i];
    let (splus, mode, err) = if n < 2 {
        (f64::NAN, SPlusMode::Unavailable, INF)
    } else if second.0 <= 0.0 && chord_w.0 <= 0.0 {
        let rs: Vec<usize> = (1..n).filter(resolved).collect();
        if rs.is_empty() {
            let i = (1..n).min_by(|a, b| chord(*a).total_cmp(&chord(*b))).unwrap_or(1);
            (chord(i), SPlusMode::Unresolved, e(i))
        } else {
            let best = rs.iter().map(|&i| chord(i)).fold(f64::INFINITY, f64::min);
            (best, SPlusMode::Inf, rs.iter().map(|&i| e(i)).fold(0.0, f64::max))
        }
    } else {
        let rs: Vec<usize> = (1..=prefix).filter(resolved).collect();
        match rs.as_slice() {
            [] => (chord(1), SPlusMode::Unresolved, e(1)),
            [i] => (chord(*i), SPlusMode::Extrapolated, e(*i)),
            [i, j, ..] => {
                let (t1, t2) = (times[*i], times[*j]);
                let s = (t2 * chord(*i) - t1 * chord(*j)) / (t2 - t1);
                (s, SPlusMode::Extrapolated, (t2 * e(*i) + t1 * e(*j)) / (t2 - t1))
            }
        }
    };
    NodeAnalysis { n, prefix, second, chord: chord_w, splus, mode, err }
}

/// Ladder flows, per-node analysis and `S⁺` for one field.
struct Analysis {
    nodes: Vec<usize>,
    flows: LadderFlows,
    per: Vec<NodeAnalysis>,
    splus: SPlusField,
}

fn test_nodes(u: &ScalarField, cfg: &CriteriaConfig) -> Result<Vec<usize>> {
    match &cfg.nodes {
        Some(v) => {
            if let Some(&x) = v.iter().find(|&&x| x >= u.len()) {
                return input(format!("test node {x} is outside the grid"));
            }
            Ok(v.clone())
        }
        None => Ok(u.interior()),
    }
}

fn analyse(h: &HamiltonianModel, u: &ScalarField, cfg: &CriteriaConfig) -> Result<Analysis> {
    let nodes = test_nodes(u, cfg)?;
    let flows = ladder_flows(h, u, &nodes, &cfg.ladder, &cfg.resolution)?;
    let per: Vec<NodeAnalysis> = crate::par::map_range(nodes.len(), |k| {
        analyse_node(&flows.values[k], &flows.times, &flows.loss, flows.valid_len[k], &cfg.resolution)
    });
    let mut vals = vec![f64::NAN; u.len()];
    let mut mode = vec![SPlusMode::Unavailable; u.len()];
    let mut err = vec![INF; u.len()];
    for (k, &x) in nodes.iter().enumerate() {
        vals[x] = per[k].splus;
        mode[x] = per[k].mode;
        err[x] = per[k].err;
    }
    let splus = SPlusField { field: u.with_values(vals), ladder: cfg.ladder.clone(), mode, err };
    Ok(Analysis { nodes, flows, per, splus })
}

/// `S⁺u` from a ladder of flow times at every node off the boundary mask.
pub fn s_plus(h: &HamiltonianModel, u: &ScalarField, ladder: &[f64]) -> Result<SPlusField> {
    s_plus_with(h, u, &CriteriaConfig::new(ladder.to_vec()))
}

pub fn s_plus_with(h: &HamiltonianModel, u: &ScalarField, cfg: &CriteriaConfig) -> Result<SPlusField> {
    Ok(analyse(h, u, cfg)?.splus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaWitness {
    pub node: usize,
    pub context: String,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct CriteriaReport {
    pub criterion: &'static str,
    pub pass: bool,
    pub checked: usize,
    pub skipped: usize,
    /// Per grid node; `None` where the node was not checked.
    pub verdicts: Vec<Option<bool>>,
    /// Per grid node; positive on failure, `NaN` where not checked.
    pub violation: Vec<f64>,
    /// One entry per failing node or cone triple.
    pub witnesses: Vec<CriteriaWitness>,
    pub worst: f64,
    /// Named per-node sub-verdicts (the pointwise check splits convexity
    /// and usc).
    pub parts: Vec<(&'static str, Vec<Option<bool>>)>,
    pub splus: Option<SPlusField>,
}

impl CriteriaReport {
    fn new(criterion: &'static str, len: usize) -> Self {
        CriteriaReport {
            criterion,
            pass: true,
            checked: 0,
            skipped: 0,
            verdicts: vec![None; len],
            violation: vec![f64::NAN; len],
            witnesses: Vec::new(),
            worst: f64::NEG_INFINITY,
            parts: Vec::new(),
            splus: None,
        }
    }

    fn record(&mut self, x: usize, violation: f64) {
        self.checked += 1;
        self.verdicts[x] = Some(violation <= 0.0);
        self.violation[x] = violation;
        self.worst = self.worst.max(violation);
    }

    fn finish(mut self) -> Result<Self> {
        if self.checked == 0 {
            return Err(Error::Margin(format!("{}: no node could be checked", self.criterion)));
        }
        self.pass = self.witnesses.is_empty();
        Ok(self)
    }

    pub fn part(&self, name: &str) -> Option<&[Option<bool>]> {
        self.parts.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_slice())
    }

    /// First witness with the largest violation.
    pub fn worst_witness(&self) -> Option<&CriteriaWitness> {
        self.witnesses.iter().fold(None, |b: Option<&CriteriaWitness>, w| match b {
            Some(b) if b.violation >= w.violation => Some(b),
            _ => Some(w),
        })
    }

    /// `criterion,verdict,worst_violation,witness`.
    pub fn summary_line(&self) -> String {
        let w = self
            .worst_witness()
            .map_or_else(|| "-".to_string(), |w| format!("node {} {}", w.node, w.context.replace(',', ";")));
        format!("{},{},{},{}", self.criterion, if self.pass { "pass" } else { "fail" }, fmt_ext(self.worst), w)
    }

    pub fn to_csv(&self, grid: &Grid) -> String {
        let mut s = String::from("node,x,y,verdict,violation\n");
        for (x, v) in self.verdicts.iter().enumerate() {
            if let Some(ok) = v {
                let c = grid.coord(x);
                s.push_str(&format!(
                    "{x},{},{},{},{}\n",
                    fmt_ext(c[0]),
                    fmt_ext(c[1]),
                    if *ok { "pass" } else { "fail" },
                    fmt_ext(self.violation[x])
                ));
            }
        }
        s
    }
}

fn convexity_report(a: &Analysis, len: usize) -> Result<CriteriaReport> {
    let mut rep = CriteriaReport::new(CONVEXITY, len);
    let full = a.flows.times.len();
    for (k, &x) in a.nodes.iter().enumerate() {
        let na = &a.per[k];
        if na.n < full || full < 3 {
            rep.skipped += 1;
            continue;
        }
        let v = na.second.0.max(na.chord.0);
        rep.record(x, v);
        if v > 0.0 {
            let t = &a.flows.times;
            let context = if na.second.0 >= na.chord.0 {
                let i = na.second.1;
                format!("second difference at t=({},{},{})", t[i - 1], t[i], t[i + 1])
            } else {
                let i = na.chord.1;
                format!("chord slope drops between t={} and t={}", t[i - 1], t[i])
            };
            rep.witnesses.push(CriteriaWitness { node: x, context, violation: v });
        }
    }
    rep.splus = Some(a.splus.clone());
    rep.finish()
}

/// Second differences of `t -> T^t u(x)` and chord slopes `(T^t u - u)/t`
/// over the whole ladder, at test nodes valid for every ladder time.
pub fn check_convexity_criterion(
    h: &HamiltonianModel,
    u: &ScalarField,
    cfg: &CriteriaConfig,
) -> Result<CriteriaReport> {
    convexity_report(&analyse(h, u, cfg)?, u.len())
}

fn pointwise_report(h: &HamiltonianModel, u: &ScalarField, a: &Analysis, cfg: &CriteriaConfig) -> Result<CriteriaReport> {
    let g = &u.grid;
    let r = cfg.lip_radius.unwrap_or_else(|| half_side(g));
    let modulus = lipschitz_from_cones(h, u, r)? * g.spacing();
    let mut rep = CriteriaReport::new(POINTWISE, u.len());
    let mut convex_part = vec![None; u.len()];
    let mut usc_part = vec![None; u.len()];
    let sp = &a.splus;
    for (k, &x) in a.nodes.iter().enumerate() {
        let na = &a.per[k];
        if na.n < 3 {
            rep.skipped += 1;
            continue;
        }
        let convex_v = if na.prefix >= 2 { f64::NEG_INFINITY } else { na.second.0 };
        convex_part[x] = Some(convex_v <= 0.0);
        let mut usc = (f64::NEG_INFINITY, x);
        if sp.value(x).is_finite() {
            let tol = cfg.usc_tol + modulus + sp.err[x];
            for y in g.neighbors(x) {
                if sp.value(y).is_finite() {
                    let v = sp.value(y) - sp.value(x) - tol;
                    if v > usc.0 {
                        usc = (v, y);
                    }
                }
            }
            usc_part[x] = Some(usc.0 <= 0.0);
        }
        let v = convex_v.max(usc.0);
        rep.record(x, v);
        if convex_v > 0.0 {
            rep.witnesses.push(CriteriaWitness {
                node: x,
                context: format!("convex prefix has {} slope(s)", na.prefix),
                violation: convex_v,
            });
        }
        if usc.0 > 0.0 {
            rep.witnesses.push(CriteriaWitness {
                node: x,
                context: format!("usc: neighbour {} has S+ {} vs {}", usc.1, sp.value(usc.1), sp.value(x)),
                violation: usc.0,
            });
        }
    }
    rep.parts = vec![("convexity", convex_part), ("usc", usc_part)];
    rep.splus = Some(a.splus.clone());
    rep.finish()
}

/// Per-node convexity on a node-dependent initial stretch of the ladder
/// (at least two slopes) plus the usc surrogate
/// `S⁺(x) >= max_{y~x} S⁺(y) - usc_tol - A_R h - err(x)`.
pub fn check_pointwise_criterion(
    h: &HamiltonianModel,
    u: &ScalarField,
    cfg: &CriteriaConfig,
) -> Result<CriteriaReport> {
    let a = analyse(h, u, cfg)?;
    pointwise_report(h, u, &a, cfg)
}

/// Grid-aligned box of nodes `lo..=hi` per axis (`j` is 0 in 1D).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subdomain {
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl Subdomain {
    fn open_contains(&self, dims: usize, i: usize, j: usize) -> bool {
        self.lo[0] < i && i < self.hi[0] && (dims == 1 || (self.lo[1] < j && j < self.hi[1]))
    }

    /// `(interior nodes, boundary nodes)`.
    pub fn split(&self, g: &Grid) -> (Vec<usize>, Vec<usize>) {
        let mut int = Vec::new();
        let mut bd = Vec::new();
        for i in self.lo[0]..=self.hi[0] {
            for j in self.lo[1]..=self.hi[1] {
                if self.open_contains(g.dims, i, j) {
                    int.push(g.index(i, j));
                } else {
                    bd.push(g.index(i, j));
                }
            }
        }
        (int, bd)
    }
}

/// Boxes with side `s` grid steps for each `s` in `sides`, at stride
/// `max(s/2, 1)`, keeping those that avoid the boundary mask.
pub fn subdomain_family(u: &ScalarField, sides: &[usize]) -> Vec<Subdomain> {
    let g = &u.grid;
    let mut out = Vec::new();
    for &s in sides {
        if s < 2 || s >= g.n[0] || (g.dims == 2 && s >= g.n[1]) {
            continue;
        }
        let stride = (s / 2).max(1);
        let jr: Vec<usize> = if g.dims == 1 { vec![0] } else { (0..g.n[1] - s).step_by(stride).collect() };
        for i0 in (0..g.n[0] - s).step_by(stride) {
            for &j0 in &jr {
                let hi = [i0 + s, if g.dims == 1 { 0 } else { j0 + s }];
                let v = Subdomain { lo: [i0, j0], hi };
                let (a, b) = v.split(g);
                if a.iter().chain(&b).all(|&x| !u.mask[x]) {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// `C_k` at every lattice offset, `(2 n0 - 1) x (2 n1 - 1)` entries.
struct OffsetCone {
    k_k: f64,
    values: Vec<f64>,
    n: [usize; 2],
}

impl OffsetCone {
    fn new(h: &HamiltonianModel, g: &Grid, k: f64) -> Result<Self> {
        let cd = ConeData::new(h, k)?;
        let (w0, w1) = (2 * g.n[0] - 1, 2 * g.n[1] - 1);
        let values = crate::par::map_range(w0 * w1, |m| {
            let di = (m / w1) as f64 - (g.n[0] - 1) as f64;
            let dj = (m % w1) as f64 - (g.n[1] - 1) as f64;
            let d = [di * g.h[0], dj * g.h[1]];
            cd.value(&d[..g.dims])
        });
        Ok(OffsetCone { k_k: cd.k_k, values, n: g.n })
    }

    /// `C_k(node a - node b)`.
    #[inline]
    fn at(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let w1 = 2 * self.n[1] - 1;
        let di = a.0 + self.n[0] - 1 - b.0;
        let dj = a.1 + self.n[1] - 1 - b.1;
        self.values[di * w1 + dj]
    }
}

pub fn check_cone_comparison_above(
    h: &HamiltonianModel,
    u: &ScalarField,
    cfg: &CriteriaConfig,
) -> Result<CriteriaReport> {
    let fam = subdomain_family(u, &cfg.sides);
    check_cone_comparison_on(h, u, &cfg.ks, &fam, cfg.vertex_stride, cfg.cone_coef, true)
}

pub fn check_cone_comparison_below(
    h: &HamiltonianModel,
    u: &ScalarField,
    cfg: &CriteriaConfig,
) -> Result<CriteriaReport> {
    let fam = subdomain_family(u, &cfg.sides);
    check_cone_comparison_on(h, u, &cfg.ks, &fam, cfg.vertex_stride, cfg.cone_coef, false)
}

/// For every `(k, V, x0)` with `x0` a lattice node outside `V`: from above,
/// `max_V (u - C_k(. - x0)) <= max_dV + tol`; from below,
/// `min_V (u + C_k(x0 - .)) >= min_dV - tol`.
/// `tol = coef * h * (Lip u|V + K_k)` covers boundary sampling.
pub fn check_cone_comparison_on(
    h: &HamiltonianModel,
    u: &ScalarField,
    ks: &[f64],
    family: &[Subdomain],
    vertex_stride: usize,
    coef: f64,
    above: bool,
) -> Result<CriteriaReport> {
    let g = &u.grid;
    if h.dims != g.dims {
        return input("H and grid dimensions differ");
    }
    if family.is_empty() || ks.is_empty() || vertex_stride == 0 {
        return input("cone comparison needs subdomains, levels and a positive vertex stride");
    }
    if ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return input("cone levels must be positive");
    }
    u.check_finite()?;
    for v in family {
        let ok_box = v.lo[0] < v.hi[0]
            && v.hi[0] < g.n[0]
            && (g.dims == 1 && v.lo[1] == 0 && v.hi[1] == 0 || g.dims == 2 && v.lo[1] < v.hi[1] && v.hi[1] < g.n[1]);
        if !ok_box {
            return input(format!("subdomain {v:?} is not a proper box inside the grid"));
        }
        let (a, b) = v.split(g);
        if a.iter().chain(&b).any(|&x| u.mask[x]) {
            return input(format!("subdomain {v:?} touches the boundary mask"));
        }
    }
    let cones = ks.iter().map(|&k| OffsetCone::new(h, g, k)).collect::<Result<Vec<_>>>()?;
    let axis = |n: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).step_by(vertex_stride).collect();
        if v.last() != Some(&(n - 1)) {
            v.push(n - 1);
        }
        v
    };
    let vi = axis(g.n[0]);
    let vj = if g.dims == 1 { vec![0] } else { axis(g.n[1]) };
    let lattice: Vec<(usize, usize)> = vi.iter().flat_map(|&i| vj.iter().map(move |&j| (i, j))).collect();
    let step = g.spacing();
    let sign = if above { 1.0 } else { -1.0 };

    let per_box: Vec<(usize, Vec<CriteriaWitness>, Vec<usize>)> = crate::par::map_slice(family, |v| {
        let (int, bd) = v.split(g);
        let mut lip: f64 = 0.0;
        for &x in int.iter().chain(&bd) {
            let cx = g.coord(x);
            for y in g.neighbors(x) {
                let (i, j) = g.ij(y);
                if (v.lo[0]..=v.hi[0]).contains(&i) && (v.lo[1]..=v.hi[1]).contains(&j) {
                    let cy = g.coord(y);
                    let d = (cy[0] - cx[0]).hypot(cy[1] - cx[1]);
                    lip = lip.max((u.values[y] - u.values[x]).abs() / d);
                }
            }
        }
        let int_ij: Vec<(usize, (usize, usize))> = int.iter().map(|&x| (x, g.ij(x))).collect();
        let bd_ij: Vec<(usize, (usize, usize))> = bd.iter().map(|&x| (x, g.ij(x))).collect();
        let mut count = 0;
        let mut fails = Vec::new();
        for (kk, cone) in cones.iter().enumerate() {
            let tol = coef * step * (lip + cone.k_k) + 1e-9 * (1.0 + u.values[int[0]].abs());
            for &x0 in &lattice {
                if v.open_contains(g.dims, x0.0, x0.1) {
                    continue;
                }
                count += 1;
                // above: f = u - C_k(x - x0); below: -(u + C_k(x0 - x)), so both are maxima
                let f = |&(x, ij): &(usize, (usize, usize))| {
                    let c = if above { cone.at(ij, x0) } else { cone.at(x0, ij) };
                    sign * u.values[x] - c
                };
                let bmax = bd_ij.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
                let (mut imax, mut arg) = (f64::NEG_INFINITY, int[0]);
                for p in &int_ij {
                    let val = f(p);
                    if val > imax {
                        imax = val;
                        arg = p.0;
                    }
                }
                let viol = imax - bmax - tol;
                if viol > 0.0 {
                    fails.push(CriteriaWitness {
                        node: arg,
                        context: format!(
                            "k={} V=[{}..{}]x[{}..{}] x0=({},{})",
                            ks[kk], v.lo[0], v.hi[0], v.lo[1], v.hi[1], x0.0, x0.1
                        ),
                        violation: viol,
                    });
                }
            }
        }
        (count, fails, int)
    });

    let mut rep = CriteriaReport::new(if above { CONES_ABOVE } else { CONES_BELOW }, u.len());
    let mut node_v = vec![f64::NAN; u.len()];
    for (_, fails, int) in &per_box {
        for &x in int {
            if node_v[x].is_nan() {
                node_v[x] = f64::NEG_INFINITY;
            }
        }
        for w in fails {
            node_v[w.node] = node_v[w.node].max(w.violation);
        }
    }
    for (x, &v) in node_v.iter().enumerate() {
        if !v.is_nan() {
            rep.record(x, v);
        }
    }
    rep.checked = per_box.iter().map(|p| p.0).sum();
    rep.witnesses = per_box.into_iter().flat_map(|p| p.1).collect();
    rep.finish()
}

/// `A_R = K_k` for the smallest tabulated `k` with `osc u / R <= M_k`.
pub fn lipschitz_from_cones(h: &HamiltonianModel, u: &ScalarField, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return input("radius must be positive");
    }
    let osc = u.osc();
    if !osc.is_finite() {
        return input("oscillation must be finite");
    }
    let target = osc / r;
    let ks = cone_levels();
    let ok = |k: f64| -> Result<bool> { Ok(target <= cone_constants(h, k)?.0 * (1.0 + 1e-9)) };
    if !ok(ks[ks.len() - 1])? {
        return Err(Error::Resolution(format!("no tabulated level has M_k >= {target}")));
    }
    // M_k is nondecreasing in k
    let (mut lo, mut hi) = (0usize, ks.len() - 1);
    if ok(ks[0])? {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(ks[mid])? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(cone_constants(h, ks[hi])?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientConeReport {
    pub k: f64,
    /// `max u(x) - u(y) - C_k(x - y)` over chords and its pair.
    pub chord_worst: f64,
    pub chord_pair: (usize, usize),
    pub chord_ok: bool,
    /// `max H(Du) - k` over interior nodes, upwind surrogate.
    pub gradient_worst: f64,
    pub gradient_node: usize,
    pub gradient_ok: bool,
    pub gradient_tol: f64,
    pub agree: bool,
}

/// Lattice chord directions: primitive vectors with entries up to 2.
fn chord_directions(dims: usize) -> Vec<(isize, isize)> {
    if dims == 1 {
        return vec![(1, 0), (-1, 0)];
    }
    let mut v = Vec::new();
    for a in -2isize..=2 {
        for b in -2isize..=2 {
            let g = gcd(a.unsigned_abs(), b.unsigned_abs());
            if g == 1 {
                v.push((a, b));
            }
        }
    }
    v
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Upwind `H(Du)` at node `x`: per axis the one-sided quotients, or `0`
/// at a local minimum along that axis; the smallest `H` over the choices.
fn upwind_h(h: &HamiltonianModel, u: &ScalarField, x: usize) -> f64 {
    let g = &u.grid;
    let (i, j) = g.ij(x);
    let mut cands: Vec<Vec<f64>> = Vec::new();
    for ax in 0..g.dims {
        let (prev, next) = if ax == 0 { (g.index(i - 1, j), g.index(i + 1, j)) } else { (g.index(i, j - 1), g.index(i, j + 1)) };
        let dm = (u.values[x] - u.values[prev]) / g.h[ax];
        let dp = (u.values[next] - u.values[x]) / g.h[ax];
        cands.push(if dm < 0.0 && dp > 0.0 { vec![0.0] } else { vec![dm, dp] });
    }
    let mut best = f64::INFINITY;
    let mut p = vec![0.0; g.dims];
    let combos = cands.iter().map(Vec::len).product::<usize>();
    for c in 0..combos {
        let mut r = c;
        for (ax, cs) in cands.iter().enumerate() {
            p[ax] = cs[r % cs.len()];
            r /= cs.len();
        }
        best = best.min(h.eval(&p));
    }
    best
}

/// Chord bound `u(x) - u(y) <= C_k(x - y)` along lattice directions up to
/// `cap` steps, against the upwind bound `H(Du) <= k + tol` at interior
/// nodes. `tol` defaults to `2 h (1 + k)`.
pub fn gradient_cone_equivalence(
    h: &HamiltonianModel,
    u: &ScalarField,
    k: f64,
    cap: usize,
    tol: Option<f64>,
) -> Result<GradientConeReport> {
    let g = &u.grid;
    if h.dims != g.dims {
        return input("H and grid dimensions differ");
    }
    if !(k > 0.0) || cap == 0 {
        return input("needs k > 0 and a positive chord cap");
    }
    let cd = ConeData::new(h, k)?;
    let dirs = chord_directions(g.dims);
    let rows = crate::par::map_range(u.len(), |x| {
        let (i, j) = g.ij(x);
        let mut best = (f64::NEG_INFINITY, (x, x));
        for &(a, b) in &dirs {
            for m in 1..=cap as isize {
                let (ii, jj) = (i as isize + m * a, j as isize + m * b);
                if ii < 0 || jj < 0 || ii >= g.n[0] as isize || jj >= g.n[1] as isize {
                    break;
                }
                let y = g.index(ii as usize, jj as usize);
                let d = [-(m * a) as f64 * g.h[0], -(m * b) as f64 * g.h[1]];
                let v = u.values[x] - u.values[y] - cd.value(&d[..g.dims]);
                if v > best.0 {
                    best = (v, (x, y));
                }
            }
        }
        best
    });
    let (chord_worst, chord_pair) =
        rows.into_iter().fold((f64::NEG_INFINITY, (0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    let scale = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chord_ok = chord_worst <= 1e-9 * (1.0 + scale);

    let inner: Vec<usize> = (0..u.len())
        .filter(|&x| {
            let (i, j) = g.ij(x);
            i > 0 && i + 1 < g.n[0] && (g.dims == 1 || (j > 0 && j + 1 < g.n[1]))
        })
        .collect();
    if inner.is_empty() {
        return input("grid has no interior node");
    }
    let hv = crate::par::map_slice(&inner, |&x| upwind_h(h, u, x));
    let (mut gradient_worst, mut gradient_node) = (f64::NEG_INFINITY, inner[0]);
    for (n, &v) in inner.iter().zip(&hv) {
        if v - k > gradient_worst {
            gradient_worst = v - k;
            gradient_node = *n;
        }
    }
    let gradient_tol = tol.unwrap_or(2.0 * g.spacing() * (1.0 + k));
    let gradient_ok = gradient_worst <= gradient_tol;
    Ok(GradientConeReport {
        k,
        chord_worst,
        chord_pair,
        chord_ok,
        gradient_worst,
        gradient_node,
        gradient_ok,
        gradient_tol,
        agree: chord_ok == gradient_ok,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCheck {
    pub node: usize,
    pub t: f64,
    pub slope: f64,
    pub argmax: usize,
    pub splus_at_argmax: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `(T^t u(x) - u(x))/t <= S⁺u(y) + tol` at the flow argmax `y`.
pub fn increasing_slope_check(
    h: &HamiltonianModel,
    u: &ScalarField,
    splus: &SPlusField,
    x: usize,
    t: f64,
    cfg: &CriteriaConfig,
) -> Result<SlopeCheck> {
    if x >= u.len() || !(t > 0.0) {
        return input("needs a grid node and t > 0");
    }
    let (s, _) = sample_up(h, u, &[x], t)?;
    let s = s[0];
    if !s.valid {
        return Err(Error::Margin(format!("flow at node {x} is not valid for t = {t}")));
    }
    let sp = splus.value(s.argmax);
    if !sp.is_finite() {
        return Err(Error::Margin(format!("argmax node {} has no S+ estimate", s.argmax)));
    }
    let slope = (s.value - u.values[x]) / t;
    let tol = splus.err[s.argmax] + cfg.usc_tol + cfg.resolution.abs_tol;
    Ok(SlopeCheck { node: x, t, slope, argmax: s.argmax, splus_at_argmax: sp, tol, pass: slope <= sp + tol })
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub above: CriteriaReport,
    pub convexity: CriteriaReport,
    pub pointwise: CriteriaReport,
    pub agree: bool,
}

impl EquivalenceReport {
    pub fn summary(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in [&self.above, &self.convexity, &self.pointwise] {
            s.push_str(&r.summary_line());
            s.push('\n');
        }
        s.push_str(&format!("equivalence,{},-,-\n", if self.agree { "pass" } else { "fail" }));
        s
    }
}

/// Cone comparison from above, convexity criterion and pointwise criterion
/// on one field; `agree` when all three verdicts coincide.
pub fn check_equivalences(h: &HamiltonianModel, u: &ScalarField, cfg: &CriteriaConfig) -> Result<EquivalenceReport> {
    let above = check_cone_comparison_above(h, u, cfg)?;
    let a = analyse(h, u, cfg)?;
    let convexity = convexity_report(&a, u.len())?;
    let pointwise = pointwise_report(h, u, &a, cfg)?;
    let agree = above.pass == convexity.pass && convexity.pass == pointwise.pass;
    Ok(EquivalenceReport { above, convexity, pointwise, agree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Grid {
        Grid::new_2d(n, n, [-1.0, -1.0], [1.0, 1.0]).unwrap()
    }

    #[test]
    fn affine_splus_is_h_of_p() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = square(65);
        let p = [0.3, -0.4];
        let u = ScalarField::from_fn(&g, |x| p[0] * x[0] + p[1] * x[1]);
        let sp = s_plus(&h, &u, &[0.1, 0.15, 0.2]).unwrap();
        let mut seen = 0;
        for x in u.interior() {
            if sp.mode[x] == SPlusMode::Inf {
                seen += 1;
                // grid flows undershoot by at most the lattice loss
                let d = h.eval(&p) - sp.value(x);
                assert!(d >= -1e-9 && d <= sp.err[x] + 1e-9, "{} {}", sp.value(x), sp.err[x]);
            }
        }
        assert!(seen > 100);
    }

    #[test]
    fn minus_abs_signature_in_one_dimension() {
        let h = HamiltonianModel::euclidean(1).unwrap();
        let g = Grid::new_1d(129, -1.0, 1.0).unwrap();
        let step = g.h[0];
        let u = ScalarField::from_fn(&g, |x| -x[0].abs());
        let cfg = CriteriaConfig::new(vec![step / 2.0, step, 2.0 * step, 4.0 * step]);
        let rep = check_pointwise_criterion(&h, &u, &cfg).unwrap();
        let origin = 64;
        let sp = rep.splus.as_ref().unwrap();
        assert!(sp.value(origin).abs() < 0.05);
        for x in u.interior() {
            assert_eq!(rep.part("convexity").unwrap()[x], Some(true), "node {x}");
            if x != origin {
                assert!((sp.value(x) - 1.0).abs() < 0.05, "node {x}: {}", sp.value(x));
                assert_eq!(rep.part("usc").unwrap()[x], Some(true));
            }
        }
        assert_eq!(rep.part("usc").unwrap()[origin], Some(false));
        assert!(!rep.pass);
        assert!(rep.witnesses.iter().all(|w| w.node == origin));
    }

    #[test]
    fn concave_square_fails_convexity() {
        let h = HamiltonianModel::half_square(1).unwrap();
        let g = Grid::new_1d(33, -1.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |x| -x[0] * x[0]);
        let rep = check_convexity_criterion(&h, &u, &CriteriaConfig::new(vec![0.05, 0.1, 0.15])).unwrap();
        assert!(!rep.pass);
        let w = rep.worst_witness().unwrap();
        assert!(!u.mask[w.node]);
    }

    #[test]
    fn cone_field_passes_all_three() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = square(33);
        let u = ScalarField::from_fn(&g, |x| (x[0] * x[0] + x[1] * x[1]).sqrt());
        let mut cfg = CriteriaConfig::new(vec![0.05, 0.1, 0.15]);
        cfg.sides = vec![4, 8];
        let rep = check_equivalences(&h, &u, &cfg).unwrap();
        assert!(rep.agree && rep.above.pass && rep.convexity.pass && rep.pointwise.pass, "{}", rep.summary());
        // C_k with k = 1/2 is |x|
        let sp = rep.convexity.splus.unwrap();
        for x in u.interior() {
            if sp.mode[x] == SPlusMode::Inf {
                assert!((sp.value(x) - 0.5).abs() < 0.1, "{}", sp.value(x));
            }
        }
    }

    #[test]
    fn affine_cone_comparison_passes_and_bump_fails() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = square(17);
        let mut cfg = CriteriaConfig::new(vec![0.1]);
        cfg.vertex_stride = 2;
        let u = ScalarField::from_fn(&g, |x| 0.7 * x[0] - 0.2 * x[1]);
        assert!(check_cone_comparison_above(&h, &u, &cfg).unwrap().pass);
        assert!(check_cone_comparison_below(&h, &u, &cfg).unwrap().pass);
        let bump = ScalarField::from_fn(&g, |x| -(x[0] * x[0] + x[1] * x[1]));
        let rep = check_cone_comparison_above(&h, &bump, &cfg).unwrap();
        assert!(!rep.pass);
        assert!(rep.witnesses.iter().all(|w| w.violation > 0.0));
        // concave fields satisfy comparison from below
        assert!(check_cone_comparison_below(&h, &bump, &cfg).unwrap().pass);
    }

    #[test]
    fn subdomain_touching_mask_is_rejected() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let u = ScalarField::from_fn(&square(9), |x| x[0]);
        let v = Subdomain { lo: [0, 0], hi: [4, 4] };
        assert!(matches!(check_cone_comparison_on(&h, &u, &[1.0], &[v], 2, 1.0, true), Err(Error::Input(_))));
    }

    #[test]
    fn lipschitz_from_cones_half_square() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let u = ScalarField::from_fn(&square(9), |x| 0.25 * (x[0] + 1.0));
        // osc 0.5, R = 0.5: sqrt(2k) >= 1 first at k = 1/2
        assert!((lipschitz_from_cones(&h, &u, 0.5).unwrap() - 1.0).abs() < 1e-9);
        let c = ScalarField::constant(&square(9), 2.0);
        assert!(lipschitz_from_cones(&h, &c, 1.0).unwrap() < 0.05);
        assert!(matches!(lipschitz_from_cones(&h, &u, 1e-6), Err(Error::Resolution(_))));
    }

    #[test]
    fn gradient_and_cone_bounds_agree() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = square(33);
        let k = 0.5;
        // |p| = 1 gives H = k
        let p = [1.0, 0.0];
        let aff = ScalarField::from_fn(&g, |x| p[0] * x[0] + p[1] * x[1]);
        let r = gradient_cone_equivalence(&h, &aff, k, 8, None).unwrap();
        assert!(r.chord_ok && r.gradient_ok && r.agree, "{r:?}");
        assert!(r.chord_worst > -1e-9);
        let cone = ScalarField::from_fn(&g, |x| (x[0] * x[0] + x[1] * x[1]).sqrt());
        let r = gradient_cone_equivalence(&h, &cone, k, 8, None).unwrap();
        assert!(r.chord_ok && r.gradient_ok, "{r:?}");
        let steep = ScalarField::from_fn(&g, |x| 1.5 * x[0]);
        let r = gradient_cone_equivalence(&h, &steep, k, 8, None).unwrap();
        assert!(!r.chord_ok && !r.gradient_ok && r.agree);
    }

    #[test]
    fn increasing_slope_at_cone_and_origin() {
        let h = HamiltonianModel::euclidean(1).unwrap();
        let g = Grid::new_1d(129, -1.0, 1.0).unwrap();
        let step = g.h[0];
        let u = ScalarField::from_fn(&g, |x| -x[0].abs());
        let cfg = CriteriaConfig::new(vec![step / 2.0, step, 2.0 * step, 4.0 * step]);
        let sp = s_plus_with(&h, &u, &cfg).unwrap();
        let c = increasing_slope_check(&h, &u, &sp, 64, 2.0 * step, &cfg).unwrap();
        assert_eq!(c.argmax, 64);
        assert_eq!(c.slope, 0.0);
        assert!(c.pass);
        let c = increasing_slope_check(&h, &u, &sp, 90, 2.0 * step, &cfg).unwrap();
        assert!(c.pass && (c.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_errors() {
        let h = HamiltonianModel::half_square(1).unwrap();
        let g = Grid::new_1d(33, -1.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0]);
        assert!(matches!(s_plus(&h, &u, &[]), Err(Error::Input(_))));
        assert!(matches!(s_plus(&h, &u, &[0.2, 0.1]), Err(Error::Input(_))));
        assert!(matches!(s_plus(&h, &u, &[0.1, 5.0]), Err(Error::Locality(_))));
        let lad = default_ladder(&h, &u).unwrap();
        assert_eq!(lad.len(), 8);
        assert!((lad[7] / lad[0] - 32.0).abs() < 1e-9);
        assert!(s_plus(&h, &u, &lad).is_ok());
    }

    #[test]
    fn summary_line_shape() {
        let h = HamiltonianModel::half_square(1).unwrap();
        let g = Grid::new_1d(33, -1.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |x| -x[0] * x[0]);
        let rep = check_convexity_criterion(&h, &u, &CriteriaConfig::new(vec![0.05, 0.1, 0.15])).unwrap();
        let line = rep.summary_line();
        assert_eq!(line.split(',').count(), 4);
        assert!(line.starts_with("convexity,fail,"));
    }
}
