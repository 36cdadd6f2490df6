//! Coercivity data of `L`: the nondecreasing lower bound `M(r)` with
//! `L(q) >= M(|q|)|q|`, the zero-set radius `R0`, `k0 = min_{|p|=R0} H`,
//! locality times and the radii `a_K`.

use super::{directions, validate_hamiltonian, HamiltonianModel};
use crate::error::{Error, Result};
use crate::ext::{is_inf, INF};

/// Radii are `2^(j/32)` for `j` in `J_MIN..=J_MAX`.
const J_MIN: i32 = -256;
const J_MAX: i32 = 416;
const PER_OCTAVE: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityProfile {
    pub r0: f64,
    pub k0: f64,
    /// Table radii, ascending.
    pub radii: Vec<f64>,
    /// `M` at each table radius; `M(r) = m[j]` for `radii[j] <= r < radii[j+1]`
    /// and `0` below `radii[0]`.
    pub m: Vec<f64>,
    /// `(K, a_K)` for `K = 2^(j/4)`; `a_K = INF` when the table never exceeds `K`.
    pub a_table: Vec<(f64, f64)>,
}

fn radius(j: i32) -> f64 {
    (j as f64 / PER_OCTAVE).exp2()
}

pub fn coercivity_profile(h: &HamiltonianModel) -> Result<CoercivityProfile> {
    let report = validate_hamiltonian(h, 1e-9)?;
    if !report.pass() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name).collect();
        return Err(Error::Invalid(names.join(", ")));
    }
    let dirs = directions(h.dims);
    let radii: Vec<f64> = (J_MIN..=J_MAX).map(radius).collect();

    let raw: Vec<f64> = crate::par::map_slice(&radii, |&r| {
        dirs.iter()
            .map(|d| {
                let q: Vec<f64> = d.iter().map(|x| r * x).collect();
                let l = h.lagrangian(&q);
                if is_inf(l) {
                    INF
                } else {
                    l / r
                }
            })
            .fold(INF, f64::min)
    });
    let mut m = raw;
    for j in (0..m.len().saturating_sub(1)).rev() {
        m[j] = m[j].min(m[j + 1]);
    }

    // zero set radius from ray samples of H on the same radii
    let zero_tol = 1e-12;
    let mut last_zero: Option<usize> = None;
    for d in &dirs {
        for (j, &r) in radii.iter().enumerate() {
            let p: Vec<f64> = d.iter().map(|x| r * x).collect();
            if h.eval(&p) <= zero_tol && last_zero.is_none_or(|z| j > z) {
                last_zero = Some(j);
            }
        }
    }
    let r0_idx = last_zero.map_or(0, |z| z + 1);
    if r0_idx >= radii.len() {
        return Err(Error::Invalid("zero set reaches the end of the radius table".into()));
    }
    let r0 = radii[r0_idx];
    let k0 = dirs
        .iter()
        .map(|d| h.eval(&d.iter().map(|x| r0 * x).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    if !(k0 > 0.0) {
        return Err(Error::Invalid(format!("H vanishes on the sphere of radius {r0}")));
    }

    let mut a_table = Vec::new();
    for j in -32..=64 {
        let k = (j as f64 / 4.0).exp2();
        let a = m.iter().position(|&v| v > k).map_or(INF, |i| radii[i]);
        a_table.push((k, a));
    }
    Ok(CoercivityProfile { r0, k0, radii, m, a_table })
}

impl CoercivityProfile {
    /// Piecewise-constant lower bound `M(r)`.
    pub fn m_at(&self, r: f64) -> f64 {
        match self.radii.partition_point(|&x| x <= r) {
            0 => 0.0,
            i => self.m[i - 1],
        }
    }

    /// Smallest table radius `a` with `M(a) > k`, so `L(z) > k|z|` for `|z| >= a`.
    pub fn a_k(&self, k: f64) -> Result<f64> {
        self.m
            .iter()
            .position(|&v| v > k)
            .map(|i| self.radii[i])
            .ok_or_else(|| Error::Resolution(format!("M never exceeds {k}")))
    }

    /// Largest table-resolved `t0` with `M(r / t0) > alpha / r + 1`.
    pub fn t_zero(&self, alpha: f64, r: f64) -> Result<f64> {
        if !(alpha >= 0.0) || !(r > 0.0) {
            return Err(Error::Input("t_zero needs alpha >= 0 and r > 0".into()));
        }
        let thr = alpha / r + 1.0;
        let j = self
            .m
            .iter()
            .position(|&v| v > thr)
            .ok_or_else(|| Error::Resolution(format!("M never exceeds {thr}; extend the table")))?;
        let mut t0 = r / self.radii[j];
        while !(self.m_at(r / t0) > thr) {
            t0 = t0.next_down();
        }
        Ok(t0)
    }

    /// Smallest radius `r = t * radii[j]` whose locality time covers `t`.
    pub fn locality_radius(&self, t: f64, alpha: f64) -> Option<f64> {
        self.radii.iter().zip(&self.m).find_map(|(&s, &mv)| {
            let r = t * s;
            (mv > alpha / r + 1.0).then_some(r)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_square_profile_is_half_radius() {
        let h = HamiltonianModel::half_square(2).unwrap();
        let p = h.profile().unwrap();
        for (r, m) in p.radii.iter().zip(&p.m).step_by(37) {
            // L(q)/|q| = |q|/2 sampled on 64 directions
            assert!((m - r / 2.0).abs() <= 1e-12 * r, "{r} {m}");
        }
        assert_eq!(p.m_at(1e-4), 0.0);
        assert!(p.k0 > 0.0);
        assert_eq!(p.r0, p.radii[0]);
    }

    #[test]
    fn euclidean_profile_jumps_past_one() {
        let h = HamiltonianModel::euclidean(2).unwrap();
        let p = h.profile().unwrap();
        assert_eq!(p.m_at(1.0), 0.0);
        assert_eq!(p.m_at(1.05), INF);
        assert_eq!(p.a_k(5.0).unwrap(), radius(1));
    }

    #[test]
    fn t_zero_inverts_the_half_square_profile() {
        let p = HamiltonianModel::half_square(1).unwrap().profile().unwrap().clone();
        for (alpha, r) in [(1.0, 0.5), (0.0, 0.1), (3.0, 1.0)] {
            let t0 = p.t_zero(alpha, r).unwrap();
            let analytic = r * r / (2.0 * (alpha + r));
            assert!(t0 <= analytic * 1.0000001, "{t0} {analytic}");
            assert!(t0 >= analytic / radius(2), "{t0} {analytic}");
            assert!(p.m_at(r / t0) > alpha / r + 1.0);
        }
    }

    #[test]
    fn t_zero_for_norm_is_just_below_r() {
        let p = HamiltonianModel::euclidean(1).unwrap().profile().unwrap().clone();
        let t0 = p.t_zero(2.0, 0.3).unwrap();
        assert!(t0 < 0.3 && t0 > 0.29);
    }

    #[test]
    fn zero_oscillation_threshold_is_one() {
        let p = HamiltonianModel::half_square(1).unwrap().profile().unwrap().clone();
        let t0 = p.t_zero(0.0, 1.0).unwrap();
        assert!(p.m_at(1.0 / t0) > 1.0);
    }

    #[test]
    fn invalid_hamiltonian_is_refused() {
        let h = HamiltonianModel::tabulated(2, 41, 4.0, |p| p[0].abs()).unwrap();
        assert!(matches!(h.profile(), Err(Error::Invalid(_))));
    }

    #[test]
    fn lagrangian_dominates_profile() {
        let h = HamiltonianModel::diagonal(&[1.0, 4.0]).unwrap();
        let p = h.profile().unwrap();
        for i in 0..200 {
            let a = i as f64 * 0.0731;
            let r = 0.01 * (1.0 + i as f64);
            let q = [r * a.cos(), r * a.sin()];
            assert!(h.lagrangian(&q) >= p.m_at(r) * r - 1e-12);
        }
    }
}
