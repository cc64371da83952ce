//! Cell-centred grid on the meridian half-plane `rho >= 0`.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horizon_design::Surface;

/// Ghost layers on every side of the padded arrays.
pub const PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rho_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_rho: usize,
    pub n_z: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_max > 0.0) || !(self.z_max > self.z_min) || !self.z_min.is_finite() || !self.z_max.is_finite() {
            return Err(Error::InvalidParams(format!("bad grid window {self:?}")));
        }
        if self.n_rho < 4 || self.n_z < 4 {
            return Err(Error::InvalidParams("grid needs at least 4 cells per direction".into()));
        }
        Ok(())
    }

    /// Cell sizes `(h_rho, h_z)`.
    pub fn h(&self) -> (f64, f64) {
        (self.rho_max / self.n_rho as f64, (self.z_max - self.z_min) / self.n_z as f64)
    }

    /// Node (cell centre) coordinates; ghost indices are allowed.
    pub fn node(&self, i: isize, j: isize) -> [f64; 2] {
        let (hr, hz) = self.h();
        [(i as f64 + 0.5) * hr, self.z_min + (j as f64 + 0.5) * hz]
    }

    pub fn stride(&self) -> usize {
        self.n_rho + 2 * PAD
    }

    pub fn padded_len(&self) -> usize {
        self.stride() * (self.n_z + 2 * PAD)
    }

    /// Flat index of `(i, j)`, `-PAD <= i < n_rho + PAD`.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> usize {
        (j + PAD as isize) as usize * self.stride() + (i + PAD as isize) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Interior,
    Excised,
    OuterBoundary,
    Axis,
}

#[derive(Debug, Clone)]
pub struct Grid2D {
    pub spec: GridSpec,
    /// Kind of each real cell, row-major in `z`.
    pub mask: Vec<CellKind>,
    pub excision: Option<Arc<dyn Surface>>,
    /// Signed distance to the excision surface at nodes (`+inf` without one).
    pub distance: Vec<f64>,
    /// Area fraction of each cell lying outside the excision surface.
    pub exterior_fraction: Vec<f64>,
}

impl Grid2D {
    /// Builds the mask. Nodes deeper than `depth_cells` cell widths inside the
    /// surface are excised.
    pub fn new(spec: GridSpec, excision: Option<Arc<dyn Surface>>, depth_cells: f64) -> Result<Self> {
        spec.validate()?;
        let (nr, nz) = (spec.n_rho, spec.n_z);
        let (hr, hz) = spec.h();
        let mut distance = vec![f64::INFINITY; nr * nz];
        let mut mask = vec![CellKind::Interior; nr * nz];
        let mut exterior_fraction = vec![1.0; nr * nz];
        if let Some(s) = &excision {
            if s.dim() != 2 {
                return Err(Error::InvalidParams("excision surface must be a meridian curve".into()));
            }
            let depth = depth_cells * hr.max(hz);
            let diag = hr.hypot(hz);
            let sd = |p: [f64; 2]| match s.signed_distance(&p) {
                Ok((d, _)) => d,
                Err(_) if s.contains(&p) => f64::NEG_INFINITY,
                Err(_) => f64::INFINITY,
            };
            for j in 0..nz {
                for i in 0..nr {
                    let k = j * nr + i;
                    let p = spec.node(i as isize, j as isize);
                    let d = sd(p);
                    distance[k] = d;
                    if d < -depth {
                        mask[k] = CellKind::Excised;
                    }
                    exterior_fraction[k] = if d > diag {
                        1.0
                    } else if d < -diag {
                        0.0
                    } else {
                        let c = |a: f64, b: f64| sd([p[0] + a * hr, p[1] + b * hz]);
                        cell_fraction([c(-0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5), c(-0.5, 0.5)])
                    };
                }
            }
        }
        for j in 0..nz {
            for i in 0..nr {
                let k = j * nr + i;
                if mask[k] == CellKind::Excised {
                    continue;
                }
                mask[k] = if i == 0 {
                    CellKind::Axis
                } else if i == nr - 1 || j == 0 || j == nz - 1 {
                    CellKind::OuterBoundary
                } else {
                    CellKind::Interior
                };
            }
        }
        let grid = Self { spec, mask, excision, distance, exterior_fraction };
        grid.check_connected()?;
        Ok(grid)
    }

    pub fn is_active(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.spec.n_rho
            && (j as usize) < self.spec.n_z
            && self.mask[j as usize * self.spec.n_rho + i as usize] != CellKind::Excised
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|k| **k != CellKind::Excised).count()
    }

    fn check_connected(&self) -> Result<()> {
        let (nr, nz) = (self.spec.n_rho, self.spec.n_z);
        let total = self.active_count();
        let Some(start) = self.mask.iter().position(|k| *k != CellKind::Excised) else {
            return Err(Error::Geometry("every cell is excised".into()));
        };
        let mut seen = vec![false; nr * nz];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 0;
        while let Some(k) = queue.pop_front() {
            count += 1;
            let (i, j) = ((k % nr) as isize, (k / nr) as isize);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (a, b) = (i + di, j + dj);
                if self.is_active(a, b) {
                    let q = b as usize * nr + a as usize;
                    if !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        if count != total {
            return Err(Error::Geometry(format!(
                "active region splits: {count} of {total} cells reachable"
            )));
        }
        Ok(())
    }
}

/// Area fraction of a unit cell where a bilinear-ish field is positive,
/// from linear interpolation on the two triangles of the diagonal split.
/// Corners are counter-clockwise from the lower left.
pub fn cell_fraction(c: [f64; 4]) -> f64 {
    0.5 * (triangle_fraction([c[0], c[1], c[2]]) + triangle_fraction([c[0], c[2], c[3]]))
}

fn triangle_fraction(d: [f64; 3]) -> f64 {
    let pos = d.iter().filter(|x| **x > 0.0).count();
    match pos {
        0 => 0.0,
        3 => 1.0,
        _ => {
            // the odd vertex out is the lone positive (pos = 1) or lone non-positive one
            let lone = if pos == 1 {
                d.iter().position(|x| *x > 0.0).unwrap()
            } else {
                d.iter().position(|x| *x <= 0.0).unwrap()
            };
            let a = d[lone];
            let (b, c) = (d[(lone + 1) % 3], d[(lone + 2) % 3]);
            let corner = if a == 0.0 { 0.0 } else { a * a / ((a - b) * (a - c)) };
            if pos == 1 {
                corner
            } else {
                1.0 - corner
            }
        }
    }
}
