use std::fmt::Write as _;

use anyhow::{bail, Result};
use clap::ValueEnum;
use hlx_core::acceptance;
use hlx_core::aronsson::residual_csv;
use hlx_core::criteria::{check_equivalences, default_ladder, s_plus_with, CriteriaConfig};
use hlx_core::ext::fmt_ext;
use hlx_core::field::indicator_csv;
use hlx_core::hamiltonian::{legendre_transform, validate_hamiltonian, BoxGrid, Mode, SampledTable};
use hlx_core::hopflax::{flow_down, flow_up, verify_flow_laws, FlowParams};
use hlx_core::patching::{patch, PatchConfig};
use hlx_core::solver::{comparison_gap, solve_dirichlet, stationary_point_search, InitMode, SolveConfig, StationaryOutcome};
use hlx_core::{HamiltonianModel, ScalarField};

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Validate,
    Legendre,
    Flow,
    Criteria,
    Patch,
    Solve,
    Compare,
    Aronsson,
    Acceptance,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::Legendre => "legendre",
            Task::Flow => "flow",
            Task::Criteria => "criteria",
            Task::Patch => "patch",
            Task::Solve => "solve",
            Task::Compare => "compare",
            Task::Aronsson => "aronsson",
            Task::Acceptance => "acceptance",
        }
    }
}

/// Tolerances shared by the tasks, from `[tolerances]`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub solve: f64,
    pub validate: f64,
    pub stationary: f64,
}

impl Tolerances {
    pub fn from_config(c: &Config) -> Result<Self> {
        Ok(Tolerances {
            solve: c.f64_or("tolerances", "solve", 1e-8)?,
            validate: c.f64_or("tolerances", "validate", 1e-9)?,
            stationary: c.f64_or("tolerances", "stationary", 1e-7)?,
        })
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![("solve", self.solve), ("validate", self.validate), ("stationary", self.stationary)]
    }
}

/// What a task produced: named artifact files, named verdicts and lines
/// for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, String)>,
    pub verdicts: Vec<(String, bool)>,
    pub lines: Vec<String>,
}

impl Outcome {
    fn file(&mut self, name: &str, body: String) {
        self.artifacts.push((name.to_string(), body));
    }

    fn verdict(&mut self, name: &str, pass: bool) {
        self.verdicts.push((name.to_string(), pass));
    }

    fn say(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.1)
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub tol: Tolerances,
}

impl Ctx<'_> {
    fn model(&self) -> Result<HamiltonianModel> {
        self.cfg.hamiltonian()
    }

    fn data(&self, h: &HamiltonianModel) -> Result<ScalarField> {
        let grid = self.cfg.grid()?;
        self.cfg.data(h, &grid, self.seed)
    }

    fn solve_config(&self) -> Result<SolveConfig> {
        let c = self.cfg;
        let init = match c.str_or("solve", "init", "min") {
            "min" => InitMode::BoundaryMin,
            "max" => InitMode::BoundaryMax,
            "random" => InitMode::Random(self.seed),
            other => bail!("unknown [solve] init {other:?}"),
        };
        Ok(SolveConfig {
            t: c.opt_f64("solve", "t")?,
            radius: c.opt_f64("solve", "radius")?,
            tol: self.tol.solve,
            max_iter: c.usize_or("solve", "max_iter", 200_000)?,
            init,
            damping: c.f64_or("solve", "damping", 1.0)?,
        })
    }

    fn ladder(&self, section: &str, h: &HamiltonianModel, u: &ScalarField) -> Result<Vec<f64>> {
        Ok(match self.cfg.list(section, "ladder")? {
            Some(l) => l,
            None => default_ladder(h, u)?,
        })
    }

    /// The field a task works on: the data itself, or the solver output
    /// when `[section] source = solve`.
    fn source(&self, section: &str, h: &HamiltonianModel, out: &mut Outcome) -> Result<ScalarField> {
        let g = self.data(h)?;
        match self.cfg.str_or(section, "source", "data") {
            "data" => Ok(g),
            "solve" => {
                let (u, rep) = solve_dirichlet(h, &g, &self.solve_config()?)?;
                out.say(format!("solver: {} after {} sweeps, residual {:.3e}", rep.verdict(), rep.iterations, rep.residual));
                out.verdict("solver converged", rep.converged);
                Ok(u)
            }
            other => bail!("unknown [{section}] source {other:?}"),
        }
    }
}

fn xy(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = format!("# {header}\n");
    for r in rows {
        let cols: Vec<String> = r.iter().map(|v| fmt_ext(*v)).collect();
        s.push_str(&cols.join(" "));
        s.push('\n');
    }
    s
}

pub fn run(task: Task, ctx: &Ctx) -> Result<Outcome> {
    let mut out = Outcome::default();
    match task {
        Task::Validate => validate(ctx, &mut out)?,
        Task::Legendre => legendre(ctx, &mut out)?,
        Task::Flow => flow(ctx, &mut out)?,
        Task::Criteria => criteria(ctx, &mut out)?,
        Task::Patch => patch_task(ctx, &mut out)?,
        Task::Solve => solve(ctx, &mut out)?,
        Task::Compare => compare(ctx, &mut out)?,
        Task::Aronsson => aronsson(ctx, &mut out)?,
        Task::Acceptance => acceptance_task(&mut out),
    }
    Ok(out)
}

fn validate(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let rep = validate_hamiltonian(&h, ctx.tol.validate)?;
    out.file("validation.csv", rep.to_csv());
    for c in &rep.checks {
        out.verdict(c.name, c.pass);
        out.say(format!("{}: {}", c.name, if c.pass { "pass" } else { "fail" }));
    }
    Ok(())
}

fn legendre(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let c = ctx.cfg;
    let h = ctx.model()?;
    let n = c.usize_or("legendre", "n", 1025)?;
    let a = c.f64_or("legendre", "half_width", 1.0)?;
    let mut e = c.list("legendre", "direction")?.unwrap_or_else(|| {
        let mut e = vec![0.0; h.dims];
        e[0] = 1.0;
        e
    });
    if e.len() != h.dims {
        bail!("[legendre] direction needs {} entries", h.dims);
    }
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        bail!("[legendre] direction must be nonzero");
    }
    e.iter_mut().for_each(|x| *x /= norm);
    let f = |s: f64| h.eval(&e.iter().map(|x| s * x).collect::<Vec<_>>());
    let primal = BoxGrid::new(vec![n], vec![-a], vec![a])?;
    let step = 2.0 * a / (n - 1) as f64;
    let table = SampledTable::tabulate(primal.clone(), |p| f(p[0]));
    // one-sided slopes at the ends bound the dual range
    let d = 1e-6 * a;
    let smax = ((f(a + d) - f(a)) / d).max((f(-a) - f(-a - d)).abs() / d).max(1.0);
    let dual = BoxGrid::new(vec![n], vec![-smax], vec![smax])?;
    let conj = legendre_transform(&table, &dual, Mode::Fast)?;
    let bi = legendre_transform(&conj, &primal, Mode::Fast)?;
    let err = bi.values.iter().zip(&table.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    out.file("conjugate.csv", conj.to_csv());
    out.file("conjugate.xy", xy("q L(q)", (0..n).map(|i| vec![dual.axis(0, i), conj.values[i]])));
    out.file("biconjugate.xy", xy("s H(s) H**(s)", (0..n).map(|i| vec![primal.axis(0, i), table.values[i], bi.values[i]])));
    out.say(format!("max_error {} (h = {}, bound 3h)", fmt_ext(err), fmt_ext(step)));
    out.verdict("round trip within 3h", err <= 3.0 * step);
    Ok(())
}

fn flow(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let u = ctx.data(&h)?;
    let t = ctx.cfg.f64_or("flow", "t", 0.1)?;
    let fp = FlowParams::for_field(&h, &u, t)?;
    let up = flow_up(&u, &fp)?;
    let down = flow_down(&u, &fp)?;
    let laws = verify_flow_laws(&u, &fp, ctx.seed)?;
    out.file("data.csv", u.to_csv());
    out.file("flow_up.csv", up.field.to_csv());
    out.file("flow_down.csv", down.field.to_csv());
    out.file("valid_up.csv", indicator_csv(&u.grid, &up.valid));
    let mut v = String::from("law,node,amount\n");
    for w in &laws.violations {
        let _ = writeln!(v, "{},{},{}", w.law, w.node, fmt_ext(w.amount));
    }
    out.file("violations.csv", v);
    let valid = up.valid.iter().filter(|&&b| b).count();
    out.say(format!("t = {}, radius {}, {valid}/{} nodes valid", fmt_ext(t), fmt_ext(fp.radius), u.len()));
    out.say(format!("flow laws: {} violations over {} nodes", laws.violations.len(), laws.checked_nodes));
    out.verdict("flow laws", laws.ok());
    Ok(())
}

fn criteria(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let u = ctx.source("criteria", &h, out)?;
    let mut cfg = CriteriaConfig::new(ctx.ladder("criteria", &h, &u)?);
    if let Some(ks) = ctx.cfg.list("criteria", "ks")? {
        cfg.ks = ks;
    }
    let rep = check_equivalences(&h, &u, &cfg)?;
    let sp = s_plus_with(&h, &u, &cfg)?;
    out.file("equivalence.csv", rep.summary());
    out.file("splus.csv", sp.to_csv());
    for r in [&rep.above, &rep.convexity, &rep.pointwise] {
        out.say(r.summary_line());
    }
    out.say(format!("verdicts agree: {}", rep.agree));
    out.verdict("verdicts agree", rep.agree);
    Ok(())
}

fn patch_task(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let u = ctx.source("patch", &h, out)?;
    let gamma = ctx.cfg.f64_or("patch", "gamma", 0.05)?;
    let r = patch(&h, &u, gamma, &PatchConfig::new(ctx.ladder("patch", &h, &u)?))?;
    out.file("u_gamma.csv", r.u_gamma.to_csv());
    out.file("v_mask.csv", r.v_mask_csv());
    let mut claims = String::from("claim,name,verdict,worst,tol,checked\n");
    for c in &r.claims {
        let verdict = if c.pass { "pass" } else { "fail" };
        let _ = writeln!(claims, "{},{},{verdict},{},{},{}", c.id, c.name, fmt_ext(c.worst), fmt_ext(c.tol), c.checked);
        out.verdict(&format!("claim {}", c.id), c.pass);
    }
    out.file("claims.csv", claims);
    let size = r.in_v.iter().filter(|&&b| b).count();
    out.say(format!("gamma {}: |V| = {size}, max change {}", fmt_ext(gamma), fmt_ext(r.max_change(&u))));
    out.say(format!("claims {}", r.claims_line()));
    Ok(())
}

fn solve(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let g = ctx.data(&h)?;
    let (u, rep) = solve_dirichlet(&h, &g, &ctx.solve_config()?)?;
    out.file("solution.csv", u.to_csv());
    out.file("residual.xy", xy("sweep residual", rep.history.iter().enumerate().map(|(i, r)| vec![(i + 1) as f64, *r])));
    out.say(format!("{} after {} sweeps at t = {}, residual {:.3e}", rep.verdict(), rep.iterations, fmt_ext(rep.t), rep.residual));
    for w in &rep.warnings {
        out.say(format!("warning: {w}"));
    }
    out.verdict("converged", rep.converged);
    if ctx.cfg.data_is_exact() {
        let err = u.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.say(format!("max error against the exact field {:.3e}", err));
    }
    Ok(())
}

fn compare(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let g = ctx.data(&h)?;
    let base = ctx.solve_config()?;
    let inits = [("min", InitMode::BoundaryMin), ("max", InitMode::BoundaryMax), ("random", InitMode::Random(ctx.seed))];
    let mut sols = Vec::new();
    for (name, init) in inits {
        let (u, rep) = solve_dirichlet(&h, &g, &SolveConfig { init, ..base.clone() })?;
        out.verdict(&format!("{name} converged"), rep.converged);
        sols.push((name, u));
    }
    let mut csv = String::from("f,g,gap\n");
    let mut worst: f64 = 0.0;
    for (a, fa) in &sols {
        for (b, fb) in &sols {
            if a != b {
                let gap = comparison_gap(fa, fb)?;
                worst = worst.max(gap.abs());
                let _ = writeln!(csv, "{a},{b},{}", fmt_ext(gap));
            }
        }
    }
    out.file("gaps.csv", csv);
    out.say(format!("largest comparison gap {:.3e} (bound {:.1e})", worst, 10.0 * ctx.tol.solve));
    out.verdict("comparison gap within 10 tol", worst <= 10.0 * ctx.tol.solve);
    if let (Some(t), Some(r)) = (ctx.cfg.opt_f64("compare", "t")?, ctx.cfg.opt_f64("compare", "r")?) {
        let res = stationary_point_search(&h, &sols[0].1, &sols[1].1, t, r, ctx.tol.stationary)?;
        let line = match res {
            StationaryOutcome::Certificate { max, node } => format!("certificate,{node},{}", fmt_ext(max)),
            StationaryOutcome::Stationary { node, defect } => format!("stationary,{node},{}", fmt_ext(defect)),
            StationaryOutcome::Unresolved { node, defect } => format!("unresolved,{node},{}", fmt_ext(defect)),
        };
        out.say(format!("stationary search: {line}"));
        out.file("stationary.csv", format!("outcome,node,value\n{line}\n"));
    }
    Ok(())
}

fn aronsson(ctx: &Ctx, out: &mut Outcome) -> Result<()> {
    let h = ctx.model()?;
    let u = ctx.source("aronsson", &h, out)?;
    let step = u.grid.spacing();
    let rho = ctx.cfg.f64_or("aronsson", "rho", 4.0 * step)?;
    let samples = ctx.cfg.usize_or("aronsson", "samples", 100)?;
    let dist = u.mask_distance();
    let eligible: Vec<usize> =
        (0..u.len()).filter(|&x| !u.mask[x] && dist[x] > rho + 1e-9 && u.grid.edge_distance(x) > rho + 1e-9).collect();
    if eligible.is_empty() {
        bail!("no node has a fit ball of radius {rho} inside the domain");
    }
    // evenly spaced picks, shifted by the seed
    let m = samples.min(eligible.len());
    let shift = (ctx.seed as usize) % eligible.len();
    let mut nodes: Vec<usize> = (0..m).map(|i| eligible[(shift + i * eligible.len() / m) % eligible.len()]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let csv = residual_csv(&h, &u, &nodes, rho)?;
    let min = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1).and_then(hlx_core::ext::parse_ext))
        .fold(f64::INFINITY, f64::min);
    out.file("residuals.csv", csv);
    let floor = -10.0 * (rho + step * step / (rho * rho));
    out.say(format!("{} nodes at rho = {}: min residual {}, floor {}", nodes.len(), fmt_ext(rho), fmt_ext(min), fmt_ext(floor)));
    out.verdict("residual above floor", min >= floor);
    Ok(())
}

fn acceptance_task(out: &mut Outcome) {
    let mut csv = String::from("id,name,verdict\n");
    for o in acceptance::run_all() {
        out.say(o.line());
        out.verdict(&format!("C{}", o.id), o.pass);
        let _ = writeln!(csv, "{},{},{}", o.id, o.name, if o.pass { "pass" } else { "fail" });
    }
    out.file("acceptance.csv", csv);
}
