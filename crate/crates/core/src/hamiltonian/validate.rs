//! Sample-based checks of the structural conditions on `H`: convexity,
//! `H(0) = 0 = min H`, bounded zero set with empty interior, and
//! monotonicity along rays past the last zero.

use super::{directions, norm, HamiltonianModel};
use crate::error::{input, Error, Result};
use crate::ext::is_inf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: Vec<f64>,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub tol: f64,
    /// Sample spacing (largest axis step).
    pub step: f64,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,verdict,witness,violation,note\n");
        for c in &self.checks {
            let (w, v) = match &c.witness {
                Some(w) => (
                    w.point.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" "),
                    format!("{}", w.violation),
                ),
                None => (String::new(), String::new()),
            };
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name,
                if c.pass { "pass" } else { "fail" },
                w,
                v,
                c.note.as_deref().unwrap_or("")
            ));
        }
        s
    }
}

pub const CONVEXITY: &str = "convexity";
pub const MINIMUM: &str = "minimum at origin";
pub const BOUNDED: &str = "zero set bounded";
pub const EMPTY_INTERIOR: &str = "empty interior";
pub const RAYS: &str = "ray monotonicity";

struct Samples {
    n: Vec<usize>,
    lo: Vec<f64>,
    h: Vec<f64>,
    values: Vec<f64>,
}

impl Samples {
    fn multi(&self, mut k: usize) -> Vec<usize> {
        let mut m = vec![0; self.n.len()];
        for d in (0..self.n.len()).rev() {
            m[d] = k % self.n[d];
            k /= self.n[d];
        }
        m
    }

    fn flat(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.n).fold(0, |a, (&i, &n)| a * n + i)
    }

    fn point(&self, k: usize) -> Vec<f64> {
        self.multi(k).iter().enumerate().map(|(d, &i)| self.lo[d] + i as f64 * self.h[d]).collect()
    }
}

pub fn validate_hamiltonian(h: &HamiltonianModel, tol: f64) -> Result<ValidationReport> {
    if !(tol > 0.0) {
        return input("tolerance must be positive");
    }
    let dims = h.dims;
    if (0..dims).any(|d| !(h.lo[d] <= 0.0 && h.hi[d] >= 0.0)) {
        return input("domain box does not contain the origin");
    }
    let per_axis = match dims {
        1 => 401,
        2 => 61,
        _ => 21,
    };
    let n = vec![per_axis; dims];
    let hs: Vec<f64> = (0..dims).map(|d| (h.hi[d] - h.lo[d]) / (per_axis - 1) as f64).collect();
    let total: usize = n.iter().product();
    let mut s = Samples { n, lo: h.lo.clone(), h: hs, values: Vec::new() };
    s.values = crate::par::map_range(total, |k| h.eval(&s.point(k)));
    if let Some(k) = s.values.iter().position(|&v| !v.is_finite() || is_inf(v.abs())) {
        return Err(Error::Eval(format!("H is not finite at {:?}", s.point(k))));
    }
    let h0 = h.eval(&vec![0.0; dims]);
    if !h0.is_finite() || is_inf(h0.abs()) {
        return Err(Error::Eval("H(0) is not finite".into()));
    }
    let step = s.h.iter().copied().fold(0.0, f64::max);
    let checks = vec![
        convexity(h, &s, tol),
        minimum(&s, h0, tol, dims),
        bounded(&s, tol),
        empty_interior(&s, tol, step),
        rays(h, tol, step),
    ];
    Ok(ValidationReport { checks, tol, step })
}

fn convexity(h: &HamiltonianModel, s: &Samples, tol: f64) -> Check {
    let dims = h.dims;
    let mut worst: Option<Witness> = None;
    let mut record = |p: Vec<f64>, q: Vec<f64>| {
        let a = h.eval(&p);
        let b = h.eval(&q);
        if is_inf(a) || is_inf(b) {
            return;
        }
        let mid: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
        let avg = 0.5 * (a + b);
        let excess = h.eval(&mid) - avg - tol * (1.0 + avg.abs());
        if excess > 0.0 && worst.as_ref().is_none_or(|w| excess > w.violation) {
            worst = Some(Witness { point: mid, violation: excess });
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..4000 {
        let p: Vec<f64> = (0..dims).map(|d| rng.random_range(h.lo[d]..=h.hi[d])).collect();
        let q: Vec<f64> = (0..dims).map(|d| rng.random_range(h.lo[d]..=h.hi[d])).collect();
        record(p, q);
    }
    // axis triples on the sample grid
    for k in 0..s.values.len() {
        let m = s.multi(k);
        for d in 0..dims {
            if m[d] + 2 < s.n[d] {
                let mut m2 = m.clone();
                m2[d] += 2;
                record(s.point(k), s.point(s.flat(&m2)));
            }
        }
    }
    Check { name: CONVEXITY, pass: worst.is_none(), witness: worst, note: Some("midpoint test on sampled pairs".into()) }
}

fn minimum(s: &Samples, h0: f64, tol: f64, dims: usize) -> Check {
    if h0.abs() > tol {
        return Check {
            name: MINIMUM,
            pass: false,
            witness: Some(Witness { point: vec![0.0; dims], violation: h0.abs() }),
            note: Some("H(0) != 0".into()),
        };
    }
    let (k, v) = s
        .values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    if v < -tol {
        Check {
            name: MINIMUM,
            pass: false,
            witness: Some(Witness { point: s.point(k), violation: -v }),
            note: Some("negative value".into()),
        }
    } else {
        Check { name: MINIMUM, pass: true, witness: None, note: None }
    }
}

fn bounded(s: &Samples, tol: f64) -> Check {
    let mut worst: Option<(usize, f64)> = None;
    for (k, &v) in s.values.iter().enumerate() {
        if v > tol {
            continue;
        }
        let m = s.multi(k);
        if m.iter().zip(&s.n).any(|(&i, &n)| i == 0 || i + 1 == n) {
            let r = norm(&s.point(k));
            if worst.is_none_or(|w| r > w.1) {
                worst = Some((k, r));
            }
        }
    }
    match worst {
        Some((k, r)) => Check {
            name: BOUNDED,
            pass: false,
            witness: Some(Witness { point: s.point(k), violation: r }),
            note: Some("zero sample on the edge of the sampling box".into()),
        },
        None => Check { name: BOUNDED, pass: true, witness: None, note: None },
    }
}

fn empty_interior(s: &Samples, tol: f64, step: f64) -> Check {
    let dims = s.n.len();
    let radius = 2.0 * step;
    let reach: Vec<isize> = s.h.iter().map(|h| (radius / h + 1e-9).floor() as isize).collect();
    let note = Some(format!("sampled surrogate: no ball of radius {radius} (2 steps) with H <= tol"));
    for k in 0..s.values.len() {
        if s.values[k] > tol {
            continue;
        }
        let m = s.multi(k);
        let mut full = true;
        let mut off = vec![0isize; dims];
        let mut start = true;
        'walk: loop {
            if !start {
                // odometer increment
                let mut d = dims;
                loop {
                    if d == 0 {
                        break 'walk;
                    }
                    d -= 1;
                    if off[d] < reach[d] {
                        off[d] += 1;
                        for e in d + 1..dims {
                            off[e] = -reach[e];
                        }
                        break;
                    }
                }
            } else {
                for d in 0..dims {
                    off[d] = -reach[d];
                }
                start = false;
            }
            let dist2: f64 = (0..dims).map(|d| (off[d] as f64 * s.h[d]).powi(2)).sum();
            if dist2 > radius * radius * (1.0 + 1e-12) {
                continue;
            }
            let mut m2 = m.clone();
            for d in 0..dims {
                let i = m[d] as isize + off[d];
                if i < 0 || i >= s.n[d] as isize {
                    full = false;
                    break 'walk;
                }
                m2[d] = i as usize;
            }
            if s.values[s.flat(&m2)] > tol {
                full = false;
                break;
            }
        }
        if full {
            return Check {
                name: EMPTY_INTERIOR,
                pass: false,
                witness: Some(Witness { point: s.point(k), violation: radius }),
                note,
            };
        }
    }
    Check { name: EMPTY_INTERIOR, pass: true, witness: None, note }
}

fn rays(h: &HamiltonianModel, tol: f64, step: f64) -> Check {
    let mut worst: Option<Witness> = None;
    for dir in directions(h.dims) {
        // exit radius of the box along dir
        let mut exit = f64::INFINITY;
        for d in 0..h.dims {
            if dir[d] > 1e-15 {
                exit = exit.min(h.hi[d] / dir[d]);
            } else if dir[d] < -1e-15 {
                exit = exit.min(h.lo[d] / dir[d]);
            }
        }
        let steps = (exit / step).floor() as usize;
        let vals: Vec<f64> = (0..=steps)
            .map(|i| {
                let r = i as f64 * step;
                h.eval(&dir.iter().map(|x| r * x).collect::<Vec<_>>())
            })
            .collect();
        let last_zero = vals.iter().rposition(|&v| v <= tol).unwrap_or(0);
        for i in last_zero + 1..vals.len().saturating_sub(1) {
            let drop = vals[i] - vals[i + 1] - tol * (1.0 + vals[i].abs());
            if drop > 0.0 && worst.as_ref().is_none_or(|w| drop > w.violation) {
                let r = (i + 1) as f64 * step;
                worst = Some(Witness { point: dir.iter().map(|x| r * x).collect(), violation: drop });
            }
        }
    }
    Check { name: RAYS, pass: worst.is_none(), witness: worst, note: None }
}
