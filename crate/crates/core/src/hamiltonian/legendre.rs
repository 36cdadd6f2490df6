//! Discrete Legendre-Fenchel transform `f*(s) = max_i (s·x_i - f(x_i))`.
//!
//! The fast 1D path walks the lower convex hull of the finite samples with
//! a monotone pointer over ascending slopes, so the cost is `O(N + M)`.
//! In several dimensions the sup is split into one 1D pass per axis,
//! `max_x (s·x - f) = max_{x_1} (s_1 x_1 + max_{x_2} (s_2 x_2 + ... - f))`,
//! which is exact for any data because each pass is a discrete max.

use super::table::{BoxGrid, SampledTable};
use crate::error::{input, Result};
use crate::ext::{is_inf, INF};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fast,
    /// `O(N M)` double loop, used as an oracle.
    Brute,
}

/// Conjugate of `f` sampled on `dual`. `INF` entries of `f` are outside the
/// effective domain.
pub fn legendre_transform(f: &SampledTable, dual: &BoxGrid, mode: Mode) -> Result<SampledTable> {
    legendre_transform_with(f, dual, mode, false)
}

/// As [`legendre_transform`]. With `edge_sentinel` (1D only) a slope whose
/// max sits on the first or last finite node and strictly beats its inner
/// neighbour is reported as `INF`: the sup would keep growing past the box.
pub fn legendre_transform_with(
    f: &SampledTable,
    dual: &BoxGrid,
    mode: Mode,
    edge_sentinel: bool,
) -> Result<SampledTable> {
    let dims = f.grid.dims();
    if dual.dims() != dims {
        return input("dual grid dimension differs from the table");
    }
    if f.values.len() != f.grid.len() {
        return input("table size does not match its grid");
    }
    if f.values.iter().all(|&v| is_inf(v)) {
        return input("empty effective domain");
    }
    if edge_sentinel && dims != 1 {
        return input("edge sentinel policy is 1D only");
    }
    if dims == 1 {
        let line = Line { lo: f.grid.lo[0], h: f.grid.h[0] };
        let slopes = Line { lo: dual.lo[0], h: dual.h[0] };
        let values = conj_1d(line, &f.values, slopes, dual.n[0], mode, edge_sentinel);
        return Ok(SampledTable { grid: dual.clone(), values });
    }
    let values = match mode {
        Mode::Brute => brute_nd(f, dual),
        Mode::Fast => separable_nd(f, dual),
    };
    Ok(SampledTable { grid: dual.clone(), values })
}

#[derive(Clone, Copy)]
struct Line {
    lo: f64,
    h: f64,
}

impl Line {
    #[inline]
    fn at(self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }
}

/// Conjugate of one line of samples. Returns `-INF` everywhere when the
/// line holds no finite value.
fn conj_1d(x: Line, f: &[f64], s: Line, m: usize, mode: Mode, edge: bool) -> Vec<f64> {
    let finite: Vec<usize> = (0..f.len()).filter(|&i| !is_inf(f[i])).collect();
    if finite.is_empty() {
        return vec![-INF; m];
    }
    let value = |sj: f64, i: usize| sj * x.at(i) - f[i];
    let mut out = match mode {
        Mode::Brute => (0..m)
            .map(|j| {
                let sj = s.at(j);
                finite.iter().map(|&i| value(sj, i)).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect::<Vec<_>>(),
        Mode::Fast => {
            let hull = lower_hull(x, f, &finite);
            let slope = |a: usize, b: usize| (f[hull[b]] - f[hull[a]]) / (x.at(hull[b]) - x.at(hull[a]));
            let mut ptr = 0usize;
            let mut out = Vec::with_capacity(m);
            for j in 0..m {
                let sj = s.at(j);
                while ptr + 1 < hull.len() && value(sj, hull[ptr + 1]) >= value(sj, hull[ptr]) {
                    ptr += 1;
                }
                // plateau: samples on a hull edge of slope ~ sj tie in exact
                // arithmetic, so rounding may favour any of them, including
                // near-collinear samples the hull dropped
                let near = |a: f64| (a - sj).abs() <= 1e-9 * (1.0 + sj.abs());
                let (mut lo, mut hi) = (ptr, ptr);
                while hi + 1 < hull.len() && near(slope(hi, hi + 1)) {
                    hi += 1;
                }
                while lo > 0 && near(slope(lo - 1, lo)) {
                    lo -= 1;
                }
                let best = if lo == hi {
                    value(sj, hull[ptr])
                } else {
                    let a = finite.partition_point(|&i| i < hull[lo]);
                    let b = finite.partition_point(|&i| i <= hull[hi]);
                    finite[a..b].iter().map(|&i| value(sj, i)).fold(f64::NEG_INFINITY, f64::max)
                };
                out.push(best);
            }
            out
        }
    };
    if edge && finite.len() >= 2 {
        let (a, a2) = (finite[0], finite[1]);
        let (b, b2) = (finite[finite.len() - 1], finite[finite.len() - 2]);
        for (j, o) in out.iter_mut().enumerate() {
            let sj = s.at(j);
            let at_first = value(sj, a) == *o && value(sj, a) > value(sj, a2);
            let at_last = value(sj, b) == *o && value(sj, b) > value(sj, b2);
            if at_first || at_last {
                *o = INF;
            }
        }
    }
    for o in &mut out {
        *o = o.min(INF);
    }
    out
}

/// Lower hull of `(x_i, f_i)` over `idx`; collinear points are kept.
fn lower_hull(x: Line, f: &[f64], idx: &[usize]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(idx.len());
    for &i in idx {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (x.at(b) - x.at(a)) * (f[i] - f[a]) - (f[b] - f[a]) * (x.at(i) - x.at(a));
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn brute_nd(f: &SampledTable, dual: &BoxGrid) -> Vec<f64> {
    let g = &f.grid;
    let finite: Vec<(Vec<f64>, f64)> =
        (0..g.len()).filter(|&k| !is_inf(f.values[k])).map(|k| (g.point(k), f.values[k])).collect();
    crate::par::map_range(dual.len(), |j| {
        let s = dual.point(j);
        finite
            .iter()
            .map(|(x, v)| super::dot(&s, x) - v)
            .fold(f64::NEG_INFINITY, f64::max)
            .min(INF)
    })
}

/// Axis passes over a working array `w` holding `max (s·x - f)` for the
/// axes already transformed; `-INF` marks empty lines.
fn separable_nd(f: &SampledTable, dual: &BoxGrid) -> Vec<f64> {
    let dims = f.grid.dims();
    let mut shape = f.grid.n.clone();
    let mut w: Vec<f64> = f.values.iter().map(|&v| if is_inf(v) { -INF } else { -v }).collect();
    for d in (0..dims).rev() {
        let x = Line { lo: f.grid.lo[d], h: f.grid.h[d] };
        let s = Line { lo: dual.lo[d], h: dual.h[d] };
        let m = dual.n[d];
        let n = shape[d];
        let stride: usize = shape[d + 1..].iter().product();
        let outer: usize = shape[..d].iter().product();
        let lines: Vec<(usize, usize)> = (0..outer).flat_map(|o| (0..stride).map(move |r| (o, r))).collect();
        let results = crate::par::map_slice(&lines, |&(o, r)| {
            let g: Vec<f64> = (0..n)
                .map(|i| {
                    let v = w[o * n * stride + i * stride + r];
                    if v <= -INF {
                        INF
                    } else {
                        -v
                    }
                })
                .collect();
            conj_1d(x, &g, s, m, Mode::Fast, false)
        });
        let mut next = vec![-INF; outer * m * stride];
        for (&(o, r), line) in lines.iter().zip(&results) {
            for (j, &v) in line.iter().enumerate() {
                next[o * m * stride + j * stride + r] = v;
            }
        }
        shape[d] = m;
        w = next;
    }
    w.into_iter().map(|v| v.min(INF)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square_line(n: usize) -> SampledTable {
        SampledTable::tabulate(BoxGrid::symmetric(1, n, 2.0).unwrap(), |p| 0.5 * p[0] * p[0])
    }

    #[test]
    fn conjugate_of_half_square() {
        let f = half_square_line(257);
        let dual = BoxGrid::symmetric(1, 381, 1.9).unwrap();
        let c = legendre_transform(&f, &dual, Mode::Fast).unwrap();
        let h = f.grid.h[0];
        for (j, v) in c.values.iter().enumerate() {
            let s = dual.axis(0, j);
            // discrete sup misses the exact maximizer by at most h/2
            assert!((v - 0.5 * s * s).abs() <= h * h / 8.0 + 1e-14);
        }
    }

    #[test]
    fn fast_equals_brute_bitwise() {
        let f = SampledTable::tabulate(BoxGrid::new(vec![257], vec![-2.0], vec![3.0]).unwrap(), |p| {
            (p[0] - 0.3).abs().powf(1.7) + 0.2 * p[0]
        });
        let dual = BoxGrid::symmetric(1, 601, 6.0).unwrap();
        let a = legendre_transform(&f, &dual, Mode::Fast).unwrap();
        let b = legendre_transform(&f, &dual, Mode::Brute).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn affine_conjugate_is_a_point_mass() {
        let a = 0.5;
        let f = SampledTable::tabulate(BoxGrid::symmetric(1, 65, 2.0).unwrap(), |p| a * p[0]);
        let dual = BoxGrid::symmetric(1, 41, 1.0).unwrap();
        for mode in [Mode::Fast, Mode::Brute] {
            let c = legendre_transform_with(&f, &dual, mode, true).unwrap();
            for (j, v) in c.values.iter().enumerate() {
                if dual.axis(0, j) == a {
                    assert_eq!(*v, 0.0);
                } else {
                    assert_eq!(*v, INF);
                }
            }
        }
    }

    #[test]
    fn empty_domain_is_an_input_error() {
        let f = SampledTable::tabulate(BoxGrid::symmetric(1, 5, 1.0).unwrap(), |_| INF);
        let dual = BoxGrid::symmetric(1, 5, 1.0).unwrap();
        assert!(legendre_transform(&f, &dual, Mode::Fast).is_err());
    }

    #[test]
    fn sentinels_are_skipped() {
        let f = SampledTable::tabulate(BoxGrid::symmetric(1, 41, 2.0).unwrap(), |p| {
            if p[0].abs() > 1.0 {
                INF
            } else {
                p[0] * p[0]
            }
        });
        let dual = BoxGrid::symmetric(1, 21, 4.0).unwrap();
        let a = legendre_transform(&f, &dual, Mode::Fast).unwrap();
        let b = legendre_transform(&f, &dual, Mode::Brute).unwrap();
        assert_eq!(a.values, b.values);
        // slope 4 is attained at x = 1 with value 4 - 1
        assert!((a.values[20] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn separable_passes_match_the_double_loop() {
        let f = SampledTable::tabulate(BoxGrid::symmetric(2, 17, 1.5).unwrap(), |p| {
            let (x, y) = (p[0], p[1]);
            0.5 * x * x + x * y + 2.0 * y * y + (x - y).abs()
        });
        let dual = BoxGrid::new(vec![13, 11], vec![-3.0, -2.0], vec![3.0, 4.0]).unwrap();
        let a = legendre_transform(&f, &dual, Mode::Fast).unwrap();
        let b = legendre_transform(&f, &dual, Mode::Brute).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{x} {y}");
        }
    }

    #[test]
    fn biconjugate_reproduces_convex_samples() {
        let f = half_square_line(129);
        let h = f.grid.h[0];
        let dual = BoxGrid::symmetric(1, 257, 2.0).unwrap();
        let c = legendre_transform(&f, &dual, Mode::Fast).unwrap();
        let cc = legendre_transform(&c, &f.grid, Mode::Fast).unwrap();
        let oracle = legendre_transform(&legendre_transform(&f, &dual, Mode::Brute).unwrap(), &f.grid, Mode::Brute)
            .unwrap();
        assert_eq!(cc.values, oracle.values);
        for (a, b) in cc.values.iter().zip(&f.values) {
            assert!((a - b).abs() <= 3.0 * h);
        }
    }
}
