//! Aronsson subsolution residual: fit a quadratic `φ` to `u` near `x0` and
//! evaluate `max_{ω ∈ ∂H(Dφ)} ω·D²φ ω`. Negative values flag points where
//! `u` fails to be a subsolution.

use nalgebra::{DMatrix, DVector};

use crate::error::{input, Error, Result};
use crate::ext::fmt_ext;
use crate::field::ScalarField;
use crate::geometry::subdifferential;
use crate::hamiltonian::HamiltonianModel;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    pub x0: usize,
    pub grad: Vec<f64>,
    /// Row-major `d x d`, symmetric.
    pub hess: Vec<f64>,
    pub rho: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
    pub nodes: usize,
}

impl QuadraticFit {
    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.grad.len() + j]
    }

    fn quad(&self, w: &[f64]) -> f64 {
        let d = w.len();
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| w[i] * self.hess_at(i, j) * w[j]).sum()
    }
}

/// Least-squares quadratic through the nodes within `rho` of `x0`.
pub fn fit_quadratic(u: &ScalarField, x0: usize, rho: f64) -> Result<QuadraticFit> {
    let g = &u.grid;
    if x0 >= u.len() || !(rho > 0.0) {
        return input("needs a grid node and rho > 0");
    }
    if g.edge_distance(x0) < rho {
        return input(format!("ball of radius {rho} around node {x0} leaves the grid"));
    }
    let c0 = g.coord(x0);
    let (ri, rj) = ((rho / g.h[0]).floor() as usize, if g.dims == 2 { (rho / g.h[1]).floor() as usize } else { 0 });
    let (i0, j0) = g.ij(x0);
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in i0 - ri..=i0 + ri {
        for j in j0 - rj..=j0 + rj {
            let x = g.index(i, j);
            let c = g.coord(x);
            let s = [(c[0] - c0[0]) / rho, (c[1] - c0[1]) / rho];
            if s[0].hypot(s[1]) > 1.0 + 1e-12 {
                continue;
            }
            if u.mask[x] {
                return input(format!("fit ball around node {x0} meets the boundary mask"));
            }
            let cols = if g.dims == 1 {
                vec![1.0, s[0], 0.5 * s[0] * s[0]]
            } else {
                vec![1.0, s[0], s[1], 0.5 * s[0] * s[0], s[0] * s[1], 0.5 * s[1] * s[1]]
            };
            rows.push((cols, u.values[x]));
        }
    }
    let m = if g.dims == 1 { 3 } else { 6 };
    if rows.len() < m {
        return Err(Error::Fit(format!("{} nodes for {m} coefficients", rows.len())));
    }
    let a = DMatrix::from_fn(rows.len(), m, |r, c| rows[r].0[c]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-10 * smax) {
        return Err(Error::Fit(format!("design matrix at node {x0} is rank deficient")));
    }
    let coef = svd.solve(&b, 1e-12 * smax).map_err(|e| Error::Fit(e.to_string()))?;
    let rms = ((&a * &coef - &b).norm_squared() / rows.len() as f64).sqrt();
    let (grad, hess) = if g.dims == 1 {
        (vec![coef[1] / rho], vec![coef[2] / (rho * rho)])
    } else {
        let r2 = rho * rho;
        (vec![coef[1] / rho, coef[2] / rho], vec![coef[3] / r2, coef[4] / r2, coef[4] / r2, coef[5] / r2])
    };
    Ok(QuadraticFit { x0, grad, hess, rho, residual: rms, nodes: rows.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AronssonSample {
    pub fit: QuadraticFit,
    /// `max ω·D²φ ω` over `ω ∈ ∂H(Dφ)`.
    pub residual: f64,
    pub grad_norm: f64,
    /// `Dφ·D²φ Dφ` for the quadratic family.
    pub delta_inf: Option<f64>,
    /// Number of `ω` the max ran over.
    pub omegas: usize,
}

/// `∂H(p)`: the gradient where it exists, the sampled subdifferential
/// otherwise (tolerance doubled until nonempty).
fn subgradients(h: &HamiltonianModel, p: &[f64]) -> Result<Vec<Vec<f64>>> {
    if let Some(w) = h.gradient(p) {
        return Ok(vec![w]);
    }
    let mut tol = 1e-3 * (1.0 + h.eval(p).abs());
    for _ in 0..12 {
        let s = subdifferential(h, p, tol)?;
        if !s.is_empty() {
            return Ok(s);
        }
        tol *= 2.0;
    }
    Err(Error::Eval(format!("empty sampled subdifferential at {p:?}")))
}

pub fn subsolution_residual(h: &HamiltonianModel, u: &ScalarField, x0: usize, rho: f64) -> Result<AronssonSample> {
    if h.dims != u.grid.dims {
        return input("H and grid dimensions differ");
    }
    let fit = fit_quadratic(u, x0, rho)?;
    let omegas = subgradients(h, &fit.grad)?;
    let residual = omegas.iter().map(|w| fit.quad(w)).fold(f64::NEG_INFINITY, f64::max);
    let grad_norm = fit.grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    let delta_inf = h.is_quadratic().then(|| fit.quad(&fit.grad));
    Ok(AronssonSample { residual, grad_norm, delta_inf, omegas: omegas.len(), fit })
}

/// Residuals at many nodes; one CSV row `node,residual,grad_norm,fit_residual`.
pub fn residual_csv(h: &HamiltonianModel, u: &ScalarField, nodes: &[usize], rho: f64) -> Result<String> {
    let rows = crate::par::map_slice(nodes, |&x| subsolution_residual(h, u, x, rho));
    let mut s = String::from("node,residual,grad_norm,fit_residual\n");
    for (x, r) in nodes.iter().zip(rows) {
        let r = r?;
        s.push_str(&format!("{x},{},{},{}\n", fmt_ext(r.residual), fmt_ext(r.grad_norm), fmt_ext(r.fit.residual)));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn grid() -> Grid {
        Grid::new_2d(65, 65, [-1.0, -1.0], [1.0, 1.0]).unwrap()
    }

    #[test]
    fn affine_has_zero_residual() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let u = ScalarField::from_fn(&grid(), |x| 0.4 * x[0] - 0.7 * x[1] + 2.0);
        let s = subsolution_residual(&h, &u, 32 * 65 + 32, 0.1).unwrap();
        assert!(s.residual.abs() < 1e-9);
        assert!((s.fit.grad[0] - 0.4).abs() < 1e-9 && (s.fit.grad[1] + 0.7).abs() < 1e-9);
    }

    #[test]
    fn concave_square_is_flagged() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = grid();
        let u = ScalarField::from_fn(&g, |x| -(x[0] * x[0] + x[1] * x[1]));
        let x0 = g.index(48, 40);
        let c = g.coord(x0);
        let s = subsolution_residual(&h, &u, x0, 0.1).unwrap();
        // Du = -2x, D²u = -2I, ω = Du
        let exact = -8.0 * (c[0] * c[0] + c[1] * c[1]);
        assert!((s.residual - exact).abs() < 1e-9, "{} vs {exact}", s.residual);
        assert!(s.residual < -0.5);
        assert_eq!(s.delta_inf, Some(s.residual));
    }

    #[test]
    fn exemplar_residual_shrinks_with_rho() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let g = Grid::new_2d(129, 129, [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let a = |x: f64, y: f64| x.abs().powf(4.0 / 3.0) - y.abs().powf(4.0 / 3.0);
        let u = ScalarField::from_fn(&g, |x| a(x[0], x[1]));
        let x0 = g.index(96, 88);
        let c = g.coord(x0);
        // symbolic derivatives: Δ∞A vanishes off the axes
        let (ax, ay) = (4.0 / 3.0 * c[0].abs().powf(1.0 / 3.0) * c[0].signum(), -4.0 / 3.0 * c[1].abs().powf(1.0 / 3.0) * c[1].signum());
        let (axx, ayy) = (4.0 / 9.0 * c[0].abs().powf(-2.0 / 3.0), -4.0 / 9.0 * c[1].abs().powf(-2.0 / 3.0));
        assert!((ax * ax * axx + ay * ay * ayy).abs() < 1e-12);
        let big = subsolution_residual(&h, &u, x0, 0.2).unwrap().residual.abs();
        let small = subsolution_residual(&h, &u, x0, 0.05).unwrap().residual.abs();
        assert!(small < big && small < 0.05, "{small} {big}");
    }

    #[test]
    fn kink_of_norm_uses_the_whole_subdifferential() {
        let h = HamiltonianModel::norm(vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]]).unwrap();
        let g = grid();
        let u = ScalarField::from_fn(&g, |x| 0.5 * (x[0] + x[1]) + 0.5 * x[0] * x[0]);
        let s = subsolution_residual(&h, &u, g.index(32, 32), 0.2).unwrap();
        assert!(s.omegas > 1);
        assert!(s.delta_inf.is_none());
    }

    #[test]
    fn ball_must_stay_inside() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let u = ScalarField::from_fn(&grid(), |x| x[0]);
        assert!(matches!(subsolution_residual(&h, &u, 65 + 1, 0.2), Err(Error::Input(_))));
        assert!(matches!(subsolution_residual(&h, &u, 32 * 65 + 32, 0.01), Err(Error::Fit(_))));
    }
}
