//! Patched approximations `u_γ`: on `V_γ = {S⁺u < γ}` the field is
//! replaced by the largest function reachable from `∂V_γ` along grid
//! chains priced by the cone `C_γ`, which raises `S⁺` to at least `γ`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::criteria::{lattice_loss, grid_lipschitz, s_plus_with, CriteriaConfig, SPlusField, SPlusMode};
use crate::error::{input, Error, Result};
use crate::ext::{fmt_ext, INF};
use crate::field::{indicator_csv, Grid, ScalarField};
use crate::geometry::{cone_levels, cone_value, ConeData};
use crate::hamiltonian::HamiltonianModel;
use crate::hopflax::{flow_at, FlowParams};

#[derive(Debug, Clone)]
pub struct PatchConfig {
    /// Ladder and resolution used for every `S⁺` estimate.
    pub criteria: CriteriaConfig,
    /// Flow time for the flow claims; `None` is the first ladder time.
    pub flow_t: Option<f64>,
    /// Slope tolerance of the flow and `S⁺` claims; `None` is `5h`.
    pub slope_tol: Option<f64>,
}

impl PatchConfig {
    pub fn new(ladder: Vec<f64>) -> Self {
        PatchConfig { criteria: CriteriaConfig::new(ladder), flow_t: None, slope_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimCheck {
    pub id: u8,
    pub name: &'static str,
    /// Largest violation measured (`<= tol` passes); `-inf` when no node
    /// was eligible.
    pub worst: f64,
    pub node: Option<usize>,
    pub tol: f64,
    pub checked: usize,
    pub pass: bool,
}

impl ClaimCheck {
    fn new(id: u8, name: &'static str, tol: f64) -> Self {
        ClaimCheck { id, name, worst: f64::NEG_INFINITY, node: None, tol, checked: 0, pass: true }
    }

    fn see(&mut self, x: usize, v: f64) {
        self.checked += 1;
        if v > self.worst {
            self.worst = v;
            self.node = Some(x);
        }
    }

    fn close(mut self) -> Self {
        self.pass = self.worst <= self.tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct PatchResult {
    pub gamma: f64,
    pub u_gamma: ScalarField,
    /// Nodes of `V_γ`.
    pub in_v: Vec<bool>,
    /// Nodes of `∂V_γ`: outside `V_γ` with an 8-neighbour in it.
    pub on_boundary: Vec<bool>,
    /// `v_γ` on `V̄_γ`, `NaN` elsewhere.
    pub v_gamma: Vec<f64>,
    pub splus_u: SPlusField,
    pub splus_patched: SPlusField,
    pub claims: Vec<ClaimCheck>,
}

impl PatchResult {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn claim(&self, id: u8) -> &ClaimCheck {
        &self.claims[(id - 1) as usize]
    }

    /// `max |u - u_γ|`.
    pub fn max_change(&self, u: &ScalarField) -> f64 {
        u.values.iter().zip(&self.u_gamma.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn v_gamma_csv(&self) -> String {
        self.u_gamma.with_values(self.v_gamma.clone()).to_csv()
    }

    pub fn v_mask_csv(&self) -> String {
        indicator_csv(&self.u_gamma.grid, &self.in_v)
    }

    /// `gamma,claim1,...,claim5` with `pass`/`fail` entries.
    pub fn claims_line(&self) -> String {
        let mut s = fmt_ext(self.gamma);
        for c in &self.claims {
            s.push(',');
            s.push_str(if c.pass { "pass" } else { "fail" });
        }
        s
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    // reversed: BinaryHeap pops the smallest label, lowest index on ties
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// `C_γ` on the 8 (2D) or 2 (1D) unit offsets, indexed `(di+1)*3 + (dj+1)`.
fn step_costs(cone: &ConeData, g: &Grid) -> [f64; 9] {
    let mut c = [INF; 9];
    for di in -1isize..=1 {
        for dj in -1isize..=1 {
            let d = [di as f64 * g.h[0], dj as f64 * g.h[1]];
            c[((di + 1) * 3 + dj + 1) as usize] = cone.value(&d[..g.dims]);
        }
    }
    c
}

#[inline]
fn step_index(g: &Grid, from: usize, to: usize) -> usize {
    let (a, b) = g.ij(from);
    let (c, d) = g.ij(to);
    ((c as isize - a as isize + 1) * 3 + (d as isize - b as isize + 1)) as usize
}

/// 8-connected components of `V`.
fn components(g: &Grid, in_v: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.len()];
    let mut out = Vec::new();
    for s in 0..g.len() {
        if !in_v[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            for y in g.neighbors(comp[k]) {
                if in_v[y] && !seen[y] {
                    seen[y] = true;
                    comp.push(y);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `v(x) = max_b u(b) - d(x -> b)` on one component, as the shortest-path
/// label `w = -v` grown backwards from the boundary.
fn component_values(g: &Grid, u: &[f64], in_v: &[bool], comp: &[usize], cost: &[f64; 9]) -> Result<Vec<(usize, f64)>> {
    let mut w: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut bd: Vec<usize> = comp.iter().flat_map(|&x| g.neighbors(x)).filter(|&y| !in_v[y]).collect();
    bd.sort_unstable();
    bd.dedup();
    if bd.is_empty() {
        return Err(Error::Topology(format!("component at node {} has no boundary", comp[0])));
    }
    for &b in &bd {
        w.insert(b, -u[b]);
        heap.push(Key(-u[b], b));
    }
    let mut done = std::collections::HashSet::new();
    while let Some(Key(wy, y)) = heap.pop() {
        if !done.insert(y) {
            continue;
        }
        for x in g.neighbors(y) {
            if !in_v[x] || done.contains(&x) {
                continue;
            }
            let cand = wy + cost[step_index(g, x, y)];
            if cand < *w.get(&x).unwrap_or(&f64::INFINITY) {
                w.insert(x, cand);
                heap.push(Key(cand, x));
            }
        }
    }
    comp.iter()
        .map(|&x| match w.get(&x) {
            Some(&v) if v < INF => Ok((x, -v)),
            _ => Err(Error::Topology(format!("node {x} cannot reach the boundary of V"))),
        })
        .collect()
}

/// `u_γ` with `V_γ` taken from an `S⁺u` estimate. A node joins `V_γ` only
/// when the estimate plus its error bar is below `γ`; nodes whose estimate
/// is unavailable or unresolved stay out.
pub fn patch_with(
    h: &HamiltonianModel,
    u: &ScalarField,
    splus: &SPlusField,
    gamma: f64,
    cfg: &PatchConfig,
) -> Result<PatchResult> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return input("gamma must be positive");
    }
    if !splus.field.grid.same_shape(&u.grid) {
        return input("S+ field grid differs from u");
    }
    u.check_finite()?;
    let g = &u.grid;
    let in_v: Vec<bool> = (0..u.len())
        .map(|x| !u.mask[x]
                && !matches!(splus.mode[x], SPlusMode::Unavailable | SPlusMode::Unresolved)
                && splus.value(x) + splus.err[x] < gamma)
        .collect();
    let mut on_boundary = vec![false; u.len()];
    for x in 0..u.len() {
        if in_v[x] {
            for y in g.neighbors(x) {
                if !in_v[y] {
                    on_boundary[y] = true;
                }
            }
        }
    }
    let cone = ConeData::new(h, gamma)?;
    let cost = step_costs(&cone, g);
    let comps = components(g, &in_v);
    let parts = crate::par::map_slice(&comps, |c| component_values(g, &u.values, &in_v, c, &cost));
    let mut v_gamma = vec![f64::NAN; u.len()];
    let mut vals = u.values.clone();
    for part in parts {
        for (x, v) in part? {
            v_gamma[x] = v;
            vals[x] = v;
        }
    }
    for x in 0..u.len() {
        if on_boundary[x] {
            v_gamma[x] = u.values[x];
        }
    }
    let u_gamma = u.with_values(vals);
    let splus_patched = s_plus_with(h, &u_gamma, &cfg.criteria)?;
    let mut res = PatchResult {
        gamma,
        u_gamma,
        in_v,
        on_boundary,
        v_gamma,
        splus_u: splus.clone(),
        splus_patched,
        claims: Vec::new(),
    };
    res.claims = check_claims(h, u, &res, &cone, cfg)?;
    Ok(res)
}

/// `u_γ` for `V_γ = {S⁺u < γ}` with `S⁺u` from the configured ladder.
pub fn patch(h: &HamiltonianModel, u: &ScalarField, gamma: f64, cfg: &PatchConfig) -> Result<PatchResult> {
    let sp = s_plus_with(h, u, &cfg.criteria)?;
    patch_with(h, u, &sp, gamma, cfg)
}

const CHORD_CAP: isize = 8;

fn check_claims(
    h: &HamiltonianModel,
    u: &ScalarField,
    r: &PatchResult,
    cone: &ConeData,
    cfg: &PatchConfig,
) -> Result<Vec<ClaimCheck>> {
    let g = &u.grid;
    let ug = &r.u_gamma;
    let gamma = r.gamma;
    let slope_tol = cfg.slope_tol.unwrap_or(5.0 * g.spacing());
    let scale = 1e-12 * (1.0 + u.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    let mut c1 = ClaimCheck::new(1, "below_u_equal_on_boundary", scale);
    for x in 0..u.len() {
        let d = ug.values[x] - u.values[x];
        c1.see(x, if u.mask[x] { d.abs() } else { d });
    }

    // straight chords inside V̄ with every interior node in V
    let in_bar = |x: usize| r.in_v[x] || r.on_boundary[x];
    let mut c2 = ClaimCheck::new(2, "cone_bound_on_segments", scale);
    let dirs: &[(isize, isize)] =
        if g.dims == 1 { &[(1, 0), (-1, 0)] } else { &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] };
    for x in (0..u.len()).filter(|&x| in_bar(x)) {
        let (i, j) = g.ij(x);
        for &(a, b) in dirs {
            for m in 1..=CHORD_CAP {
                let (ii, jj) = (i as isize + m * a, j as isize + m * b);
                if ii < 0 || jj < 0 || ii >= g.n[0] as isize || jj >= g.n[1] as isize {
                    break;
                }
                let y = g.index(ii as usize, jj as usize);
                if !in_bar(y) || (m > 1 && !r.in_v[g.index((ii - a) as usize, (jj - b) as usize)]) {
                    break;
                }
                if !r.in_v[x] && !r.in_v[y] {
                    continue;
                }
                let d = [(m * a) as f64 * g.h[0], (m * b) as f64 * g.h[1]];
                // v(x) - v(y) <= C_γ(x - y)
                c2.see(x, r.v_gamma[x] - r.v_gamma[y] - cone.value(&[-d[0], -d[1]][..g.dims]));
            }
        }
    }

    let t = cfg.flow_t.unwrap_or(cfg.criteria.ladder[0]);
    let interior = u.interior();
    let flow = |f: &ScalarField| -> Result<(Vec<crate::hopflax::FlowSample>, f64)> {
        let fp = FlowParams::new(h, g, t, f.osc())?;
        let offs: Vec<(isize, isize)> = fp.up_stencil().offsets().into_iter().map(|(a, b, _)| (a, b)).collect();
        let e = lattice_loss(h, g, grid_lipschitz(f), t, &offs, cfg.criteria.resolution.safety);
        Ok((flow_at(f, &fp, &interior, true)?, e))
    };
    let (fg, eg) = flow(ug)?;
    let (fu, eu) = flow(u)?;
    let mut c3 = ClaimCheck::new(3, "flow_identity_on_v", slope_tol + eg / t);
    let mut c4 = ClaimCheck::new(4, "flow_unchanged_off_v", slope_tol + (eg + eu) / t);
    for (k, &x) in interior.iter().enumerate() {
        if r.in_v[x] && fg[k].valid && r.in_v[fg[k].argmax] {
            c3.see(x, ((fg[k].value - ug.values[x]) / t - gamma).abs());
        }
        if !in_bar(x) && fg[k].valid && fu[k].valid {
            c4.see(x, (fu[k].value - fg[k].value).abs() / t);
        }
    }

    let mut c5 = ClaimCheck::new(5, "splus_at_least_gamma", slope_tol);
    let sp = &r.splus_patched;
    for &x in &interior {
        if sp.value(x).is_finite() {
            c5.see(x, gamma - sp.value(x));
        }
    }
    Ok(vec![c1.close(), c2.close(), c3.close(), c4.close(), c5.close()])
}

/// Largest `k` with `C_k(±q) <= eps / (2 diam)`, `q` orthogonal to `H⁻¹(0)`.
/// Fields agreeing on the boundary whose `S⁺` values sum to at most `k`
/// differ by at most `eps`.
pub fn prepatch_bound(h: &HamiltonianModel, diam: f64, eps: f64) -> Result<f64> {
    if !(diam > 0.0 && eps > 0.0) {
        return input("diam and eps must be positive");
    }
    let q = crate::geometry::zero_set_normal(h)?;
    let qm: Vec<f64> = q.iter().map(|x| -x).collect();
    let target = eps / (2.0 * diam);
    let fits = |k: f64| -> Result<bool> {
        Ok(cone_value(h, k, &q)?.max(cone_value(h, k, &qm)?) <= target)
    };
    let top = *cone_levels().last().unwrap_or(&1.0);
    if fits(top)? {
        return Ok(top);
    }
    let mut lo = top;
    while !fits(lo)? {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Resolution(format!("no positive k keeps C_k(q) below {target}")));
        }
    }
    let mut hi = 2.0 * lo;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if fits(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest `eps` whose [`prepatch_bound`] reaches `k`.
pub fn prepatch_eps(h: &HamiltonianModel, diam: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return input("k must be positive");
    }
    let mut hi = 1.0;
    while prepatch_bound(h, diam, hi)? < k {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Resolution(format!("no eps reaches k = {k}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if prepatch_bound(h, diam, mid)? >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Relax every directed edge until nothing changes.
    fn relax_oracle(g: &Grid, u: &[f64], in_v: &[bool], cost: &[f64; 9]) -> Vec<f64> {
        let mut v: Vec<f64> = (0..g.len()).map(|x| if in_v[x] { f64::NEG_INFINITY } else { u[x] }).collect();
        loop {
            let mut changed = false;
            for x in (0..g.len()).filter(|&x| in_v[x]) {
                for y in g.neighbors(x) {
                    let c = v[y] - cost[step_index(g, x, y)];
                    if c > v[x] + 1e-15 {
                        v[x] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                return v;
            }
        }
    }

    #[test]
    fn zero_field_in_one_dimension() {
        let h = HamiltonianModel::half_square(1).unwrap();
        let g = Grid::new_1d(33, 0.0, 1.0).unwrap();
        let u = ScalarField::constant(&g, 0.0);
        let gamma = 0.1;
        let r = patch(&h, &u, gamma, &PatchConfig::new(vec![0.02, 0.04, 0.06])).unwrap();
        assert!(r.in_v.iter().zip(&u.mask).all(|(a, m)| *a != *m));
        let s = (2.0 * gamma).sqrt();
        for x in 0..g.len() {
            let c = g.coord(x)[0];
            assert!((r.u_gamma.values[x] + s * c.min(1.0 - c)).abs() < 1e-12);
        }
        assert!(r.claim(1).pass && r.claim(2).pass, "{:?}", r.claims);
    }

    #[test]
    fn dijkstra_matches_relaxation() {
        let h = HamiltonianModel::diagonal(&[1.0, 3.0]).unwrap();
        let g = Grid::new_2d(13, 11, [0.0, 0.0], [1.0, 0.8]).unwrap();
        let u = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() * x[1]);
        let in_v: Vec<bool> = (0..g.len()).map(|x| !u.mask[x] && (x * 7919) % 5 != 0).collect();
        let cost = step_costs(&ConeData::new(&h, 0.3).unwrap(), &g);
        let oracle = relax_oracle(&g, &u.values, &in_v, &cost);
        for comp in components(&g, &in_v) {
            for (x, v) in component_values(&g, &u.values, &in_v, &comp, &cost).unwrap() {
                assert!((v - oracle[x]).abs() < 1e-12, "node {x}: {v} vs {}", oracle[x]);
            }
        }
    }

    #[test]
    fn steep_affine_is_untouched() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = Grid::new_2d(33, 33, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let u = ScalarField::from_fn(&g, |x| 0.8 * x[0] + 0.6 * x[1]);
        let r = patch(&h, &u, 0.2, &PatchConfig::new(vec![0.03, 0.05])).unwrap();
        assert!(r.in_v.iter().all(|b| !b));
        assert_eq!(r.u_gamma.values, u.values);
    }

    #[test]
    fn prepatch_examples() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let k = prepatch_bound(&h, 1.0, 0.4).unwrap();
        assert!((k - 0.02).abs() < 1e-9, "{k}");
        let k2 = prepatch_bound(&h, 1.0, 0.8).unwrap();
        assert!((k2 / k - 4.0).abs() < 1e-6);
        let e = prepatch_bound(&HamiltonianModel::euclidean(2).unwrap(), 2.0, 0.4).unwrap();
        assert!((e - 0.1).abs() < 1e-9, "{e}");
        assert!((prepatch_eps(&h, 1.0, 0.02).unwrap() - 0.4).abs() < 1e-6);
    }

    #[test]
    fn bad_gamma_is_rejected() {
        let h = HamiltonianModel::half_square(1).unwrap();
        let u = ScalarField::constant(&Grid::new_1d(9, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(patch(&h, &u, 0.0, &PatchConfig::new(vec![0.1])), Err(Error::Input(_))));
    }
}
