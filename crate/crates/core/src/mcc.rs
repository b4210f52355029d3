//! Real-valued Minutia Cylinder Code descriptors.
//!
//! Each minutia gets a cylinder whose base is an `N_grid × N_grid` grid of
//! cells laid out in the minutia's own frame (so the code is rotation and
//! translation invariant) and whose height is split into `N_D` directional
//! sections covering `[-π, π)`. A cell accumulates a Gaussian spatial
//! contribution from every neighbouring minutia, weighted by a Gaussian on
//! how far the neighbour's direction difference sits from the section
//! centre.

use std::f64::consts::{PI, TAU};

use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};
use crate::geometry::{angular_difference, wrap_signed};
use crate::par::{map_range, Execution};
use crate::template::MinutiaeTemplate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderConfig {
    /// Cylinder radius in pixels.
    pub radius: f64,
    /// Cells per side of the base grid.
    pub grid: usize,
    /// Number of directional sections.
    pub sections: usize,
    pub sigma_s: f64,
    pub sigma_d: f64,
    /// Minimum neighbours within `radius + 3 sigma_s` for a valid cylinder.
    pub min_neighbors: usize,
}

impl Default for CylinderConfig {
    fn default() -> Self {
        Self {
            radius: 70.0,
            grid: 16,
            sections: 6,
            sigma_s: 9.33,
            sigma_d: 0.698,
            min_neighbors: 2,
        }
    }
}

impl CylinderConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.grid >= 2
            && self.sections >= 1
            && self.sigma_s > 0.0
            && self.sigma_d > 0.0
            && self.min_neighbors >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad cylinder config {self:?}")))
        }
    }

    /// Length of a linearized cylinder, `N_grid² · N_D`.
    pub fn dim(&self) -> usize {
        self.grid * self.grid * self.sections
    }

    /// Neighbour cutoff distance, `R + 3 sigma_s`.
    pub fn cutoff(&self) -> f64 {
        self.radius + 3.0 * self.sigma_s
    }

    fn cell_width(&self) -> f64 {
        2.0 * self.radius / self.grid as f64
    }

    fn section_center(&self, k: usize) -> f64 {
        -PI + (k as f64 + 0.5) * TAU / self.sections as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    /// Cell values, index `(row * grid + col) * sections + k`.
    pub values: Vec<f64>,
    pub valid: bool,
    pub minutia_index: usize,
}

#[inline]
fn gaussian(t: f64, sigma: f64) -> f64 {
    (-(t * t) / (2.0 * sigma * sigma)).exp() / (sigma * (TAU).sqrt())
}

pub fn build_cylinder(t: &MinutiaeTemplate, i: usize, cfg: &CylinderConfig) -> Result<Cylinder> {
    let center = *t.minutiae.get(i).ok_or(Error::IndexOutOfRange { index: i, len: t.len() })?;
    let cutoff = cfg.cutoff();
    let cutoff_sq = cutoff * cutoff;
    // every cell centre lies within R of the minutia
    let reach = cfg.radius + cutoff;

    struct Neighbor {
        x: f64,
        y: f64,
        directional: Vec<f64>,
    }

    let mut contributing = 0usize;
    let mut neighbors = Vec::new();
    for (j, m) in t.minutiae.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = (m.x - center.x).hypot(m.y - center.y);
        if d > reach {
            continue;
        }
        if d <= cutoff {
            contributing += 1;
        }
        let delta = wrap_signed(center.theta - m.theta);
        let directional = (0..cfg.sections)
            .map(|k| gaussian(angular_difference(cfg.section_center(k), delta), cfg.sigma_d))
            .collect();
        neighbors.push(Neighbor {
            x: m.x,
            y: m.y,
            directional,
        });
    }

    let mut values = vec![0.0; cfg.dim()];
    let (sin, cos) = center.theta.sin_cos();
    let width = cfg.cell_width();
    let half = cfg.grid as f64 / 2.0;
    let r_sq = cfg.radius * cfg.radius;

    for row in 0..cfg.grid {
        let v = (row as f64 + 0.5 - half) * width;
        for col in 0..cfg.grid {
            let u = (col as f64 + 0.5 - half) * width;
            if u * u + v * v > r_sq {
                continue;
            }
            // local (u along the minutia direction, v to its left) to image coordinates
            let cx = center.x + u * cos - v * sin;
            let cy = center.y - (u * sin + v * cos);
            let base = (row * cfg.grid + col) * cfg.sections;
            let cell = &mut values[base..base + cfg.sections];
            for n in &neighbors {
                let (dx, dy) = (n.x - cx, n.y - cy);
                let d_sq = dx * dx + dy * dy;
                if d_sq > cutoff_sq {
                    continue;
                }
                let spatial = gaussian(d_sq.sqrt(), cfg.sigma_s);
                for (slot, w) in cell.iter_mut().zip(&n.directional) {
                    *slot += spatial * w;
                }
            }
        }
    }

    let valid = contributing >= cfg.min_neighbors && values.iter().any(|&v| v > 0.0);
    Ok(Cylinder {
        values,
        valid,
        minutia_index: i,
    })
}

pub fn build_mcc_set(t: &MinutiaeTemplate, cfg: &CylinderConfig) -> DescriptorSet {
    build_mcc_set_with(t, cfg, Execution::default())
}

pub fn build_mcc_set_with(t: &MinutiaeTemplate, cfg: &CylinderConfig, exec: Execution) -> DescriptorSet {
    if t.is_empty() {
        return DescriptorSet::empty(t.id.clone(), cfg.dim());
    }
    let cylinders = map_range(t.len(), exec, |i| build_cylinder(t, i, cfg).expect("index is in range"));
    let valid = cylinders.iter().map(|c| c.valid).collect();
    let data = cylinders.into_iter().flat_map(|c| c.values).collect();
    DescriptorSet::from_flat(t.id.clone(), cfg.dim(), data, valid).expect("cylinder values are finite")
}
