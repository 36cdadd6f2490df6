use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hlx_core::acceptance::aronsson_exemplar;
use hlx_core::geometry::cone_value;
use hlx_core::{Grid, HamiltonianModel, ScalarField};
use ini::Ini;

/// Parsed INI config with typed lookups. Missing keys fall back to the
/// defaults of each task.
pub struct Config {
    ini: Ini,
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| anyhow!("not a number: {s:?}"))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_f64).collect()
}

/// Rows separated by `;`, entries by commas or spaces.
fn parse_rows(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| r.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).map(parse_f64).collect())
        .collect()
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        Ok(Config { ini })
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self> {
        Ok(Config { ini: Ini::load_from_str(text)? })
    }

    pub fn empty() -> Self {
        Config { ini: Ini::new() }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.section(Some(section)).and_then(|p| p.get(key)).map(str::trim)
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        self.get(section, key).map_or(Ok(default), |v| parse_f64(v).with_context(|| format!("[{section}] {key}")))
    }

    pub fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key).map(|v| parse_f64(v).with_context(|| format!("[{section}] {key}"))).transpose()
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| anyhow!("[{section}] {key}: not a count: {v:?}")),
        }
    }

    pub fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(section, key).map(|v| parse_list(v).with_context(|| format!("[{section}] {key}"))).transpose()
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("run", "seed").map_or(Ok(0), |v| v.parse().map_err(|_| anyhow!("[run] seed: not a u64: {v:?}")))
    }

    /// Every `section.key = value` pair in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (sec, props) in self.ini.iter() {
            for (k, v) in props.iter() {
                out.push((format!("{}.{k}", sec.unwrap_or("general")), v.trim().to_string()));
            }
        }
        out
    }

    pub fn dims(&self) -> Result<usize> {
        let d = self.usize_or("grid", "dims", 2)?;
        if d != 1 && d != 2 {
            bail!("[grid] dims must be 1 or 2");
        }
        Ok(d)
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = self.dims()?;
        let n = self.list("grid", "n")?.unwrap_or(vec![33.0]);
        let lo = self.list("grid", "lo")?.unwrap_or(vec![-1.0]);
        let hi = self.list("grid", "hi")?.unwrap_or(vec![1.0]);
        let pick = |v: &[f64], i: usize| v.get(i).or(v.first()).copied().unwrap_or(0.0);
        let count = |i: usize| -> Result<usize> {
            let c = pick(&n, i);
            if c.fract() != 0.0 || c < 3.0 {
                bail!("[grid] n must be integers >= 3");
            }
            Ok(c as usize)
        };
        let g = if d == 1 {
            Grid::new_1d(count(0)?, pick(&lo, 0), pick(&hi, 0))?
        } else {
            Grid::new_2d(count(0)?, count(1)?, [pick(&lo, 0), pick(&lo, 1)], [pick(&hi, 0), pick(&hi, 1)])?
        };
        Ok(g)
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianModel> {
        let d = self.dims()?;
        let family = self.str_or("hamiltonian", "family", "half_square");
        let h = match family {
            "half_square" => HamiltonianModel::half_square(d)?,
            "euclidean" => HamiltonianModel::euclidean(d)?,
            "diagonal" => {
                let w = self.list("hamiltonian", "weights")?.ok_or_else(|| anyhow!("diagonal needs [hamiltonian] weights"))?;
                HamiltonianModel::diagonal(&w)?
            }
            "quadratic" => {
                let a = self.get("hamiltonian", "matrix").ok_or_else(|| anyhow!("quadratic needs [hamiltonian] matrix"))?;
                HamiltonianModel::quadratic(parse_rows(a)?)?
            }
            "power" => HamiltonianModel::power(d, self.f64_or("hamiltonian", "m", 2.0)?)?,
            "norm" => {
                let b = self.get("hamiltonian", "ball").ok_or_else(|| anyhow!("norm needs [hamiltonian] ball"))?;
                HamiltonianModel::norm(parse_rows(b)?)?
            }
            other => bail!("unknown hamiltonian family {other:?}"),
        };
        if h.dims != d {
            bail!("hamiltonian has {} dims, grid has {d}", h.dims);
        }
        Ok(h)
    }

    /// Boundary data on `grid`; the mask is the grid edge unless `[grid]
    /// mask = box` with `mask_lo` / `mask_hi`.
    pub fn data(&self, h: &HamiltonianModel, grid: &Grid, seed: u64) -> Result<ScalarField> {
        let d = grid.dims;
        let family = self.str_or("data", "family", "affine");
        let mut u = match family {
            "affine" => {
                let p = self.list("data", "slope")?.unwrap_or(vec![0.0; d]);
                if p.len() != d {
                    bail!("[data] slope needs {d} entries");
                }
                let c = self.f64_or("data", "offset", 0.0)?;
                ScalarField::from_fn(grid, |x| c + x.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>())
            }
            "cone" => {
                let k = self.f64_or("data", "k", 1.0)?;
                let v = self.list("data", "vertex")?.unwrap_or(vec![0.0; d]);
                if v.len() != d {
                    bail!("[data] vertex needs {d} entries");
                }
                let vals = (0..grid.len())
                    .map(|i| {
                        let x: Vec<f64> = grid.coord_vec(i).iter().zip(&v).map(|(a, b)| a - b).collect();
                        cone_value(h, k, &x)
                    })
                    .collect::<hlx_core::Result<Vec<f64>>>()?;
                ScalarField::constant(grid, 0.0).with_values(vals)
            }
            "aronsson-exemplar" => {
                let c = self.list("data", "centre")?.unwrap_or(vec![0.5; d]);
                if c.len() != d {
                    bail!("[data] centre needs {d} entries");
                }
                // the exemplar is centred at (1/2, 1/2)
                ScalarField::from_fn(grid, |x| {
                    let y: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b + 0.5).collect();
                    if d == 1 {
                        (y[0] - 0.5).abs().powf(4.0 / 3.0)
                    } else {
                        aronsson_exemplar(&y)
                    }
                })
            }
            "random" => {
                let amp = self.f64_or("data", "amplitude", 1.0)?;
                let w = hlx_core::acceptance::seeded_waves(grid, seed);
                w.with_values(w.values.iter().map(|v| amp * v).collect())
            }
            other => bail!("unknown data family {other:?}"),
        };
        match self.str_or("grid", "mask", "edges") {
            "edges" => {}
            "box" if d == 2 => {
                let lo = self.list("grid", "mask_lo")?.ok_or_else(|| anyhow!("box mask needs [grid] mask_lo"))?;
                let hi = self.list("grid", "mask_hi")?.ok_or_else(|| anyhow!("box mask needs [grid] mask_hi"))?;
                if lo.len() != 2 || hi.len() != 2 {
                    bail!("[grid] mask_lo and mask_hi need 2 entries");
                }
                u.mask_outside_box([lo[0], lo[1]], [hi[0], hi[1]]);
            }
            other => bail!("unsupported [grid] mask {other:?}"),
        }
        Ok(u)
    }

    /// True when `[data]` is an exact absolutely minimizing family.
    pub fn data_is_exact(&self) -> bool {
        matches!(self.str_or("data", "family", "affine"), "affine" | "aronsson-exemplar")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_a_square_grid() {
        let c = Config::empty();
        let g = c.grid().unwrap();
        assert_eq!((g.dims, g.n[0], g.n[1]), (2, 33, 33));
        assert_eq!(c.seed().unwrap(), 0);
    }

    #[test]
    fn rows_and_lists() {
        assert_eq!(parse_list("1, 4").unwrap(), vec![1.0, 4.0]);
        assert_eq!(parse_rows("1 0; 0, 2").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(parse_list("1, x").is_err());
    }

    #[test]
    fn affine_data_and_box_mask() {
        let c = Config::parse("[grid]\nn = 9\nlo = 0, 0\nhi = 1, 1\nmask = box\nmask_lo = 0.25, 0.25\nmask_hi = 0.75, 0.75\n[data]\nslope = 1, 2\noffset = 3\n").unwrap();
        let g = c.grid().unwrap();
        let h = c.hamiltonian().unwrap();
        let u = c.data(&h, &g, 0).unwrap();
        let x = g.index(4, 4);
        assert!((u.values[x] - 4.5).abs() < 1e-12);
        assert!(!u.mask[x] && u.mask[g.index(1, 4)]);
    }

    #[test]
    fn bad_values_are_rejected() {
        let c = Config::parse("[hamiltonian]\nfamily = cubic\n").unwrap();
        assert!(c.hamiltonian().is_err());
        let c = Config::parse("[grid]\ndims = 3\n").unwrap();
        assert!(c.grid().is_err());
    }
}
