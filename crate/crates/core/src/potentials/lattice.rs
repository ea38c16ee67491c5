//! FCC(111) slab with a compact adatom island on top.
//!
//! Layers are stacked ABC with an open (non-periodic) boundary. Each layer is
//! a rectangular patch of the triangular lattice, `cols × rows` atoms with the
//! aspect ratio closest to square. The island is a compact hexagonal cluster
//! centred on the fcc hollow site nearest the middle of the top layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SaddleError};
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseClusterSpec {
    /// Well depth (eV).
    pub a_depth: f64,
    /// Range parameter (1/Å).
    pub a_range: f64,
    /// Pair equilibrium distance (Å).
    pub r0: f64,
    /// Cutoff (Å); the pair energy is shifted to vanish here.
    pub rc: f64,
    /// Nearest-neighbour distance of the slab (Å).
    pub lattice_constant: f64,
    pub slab_layers: usize,
    pub atoms_per_layer: usize,
    pub frozen_layers: usize,
    pub island_atoms: usize,
}

impl Default for MorseClusterSpec {
    fn default() -> Self {
        MorseClusterSpec {
            a_depth: 0.7102,
            a_range: 1.6047,
            r0: 2.8970,
            rc: 9.5,
            lattice_constant: 2.74412,
            slab_layers: 6,
            atoms_per_layer: 56,
            frozen_layers: 3,
            island_atoms: 7,
        }
    }
}

impl MorseClusterSpec {
    pub(crate) fn apply_params(&mut self, params: &BTreeMap<String, f64>) -> Result<()> {
        let count = |k: &str, v: f64| -> Result<usize> {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(SaddleError::InvalidParameter(format!(
                    "`{k}` must be a non-negative integer, got {v}"
                )));
            }
            Ok(v as usize)
        };
        for (k, &v) in params {
            match k.as_str() {
                "A" => self.a_depth = v,
                "a" => self.a_range = v,
                "r0" => self.r0 = v,
                "rc" => self.rc = v,
                "lattice_constant" => self.lattice_constant = v,
                "slab_layers" => self.slab_layers = count(k, v)?,
                "atoms_per_layer" => self.atoms_per_layer = count(k, v)?,
                "frozen_layers" => self.frozen_layers = count(k, v)?,
                "island_atoms" => self.island_atoms = count(k, v)?,
                other => {
                    return Err(SaddleError::InvalidParameter(format!(
                        "unknown Morse parameter `{other}`"
                    )))
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("A", self.a_depth),
            ("a", self.a_range),
            ("r0", self.r0),
            ("rc", self.rc),
            ("lattice_constant", self.lattice_constant),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SaddleError::InvalidParameter(format!("`{k}` must be positive")));
            }
        }
        if self.slab_layers == 0 || self.atoms_per_layer == 0 {
            return Err(SaddleError::InvalidParameter(
                "slab needs at least one layer and one atom per layer".into(),
            ));
        }
        if self.frozen_layers > self.slab_layers {
            return Err(SaddleError::InvalidParameter(
                "more frozen layers than slab layers".into(),
            ));
        }
        if self.island_atoms > 7 {
            return Err(SaddleError::InvalidParameter(
                "island supports at most 7 atoms (centre plus first shell)".into(),
            ));
        }
        Ok(())
    }

    pub fn total_atoms(&self) -> usize {
        self.slab_layers * self.atoms_per_layer + self.island_atoms
    }

    pub fn free_atoms(&self) -> usize {
        (self.slab_layers - self.frozen_layers) * self.atoms_per_layer + self.island_atoms
    }

    /// Length of the optimization vector.
    pub fn free_dof(&self) -> usize {
        3 * self.free_atoms()
    }
}

/// Cartesian positions of every atom plus the frozen mask.
#[derive(Debug, Clone)]
pub struct MorseLattice {
    pub positions: Vec<[f64; 3]>,
    pub frozen: Vec<bool>,
}

impl MorseLattice {
    /// All coordinates flattened `x0 y0 z0 x1 ...`.
    pub fn coordinates(&self) -> Vector {
        Vector::from_iterator(
            3 * self.positions.len(),
            self.positions.iter().flat_map(|p| p.iter().copied()),
        )
    }

    /// Coordinates of the unmasked atoms only.
    pub fn free_coordinates(&self) -> Vector {
        let free: Vec<f64> = self
            .positions
            .iter()
            .zip(&self.frozen)
            .filter(|(_, &f)| !f)
            .flat_map(|(p, _)| p.iter().copied())
            .collect();
        Vector::from_vec(free)
    }

    pub fn free_count(&self) -> usize {
        self.frozen.iter().filter(|f| !**f).count()
    }
}

fn layer_shape(n: usize) -> (usize, usize) {
    let row_height = 3f64.sqrt() / 2.0;
    (1..=n)
        .filter(|r| n % r == 0)
        .map(|rows| (n / rows, rows))
        .min_by(|a, b| {
            let ka = (a.0 as f64 - a.1 as f64 * row_height).abs();
            let kb = (b.0 as f64 - b.1 as f64 * row_height).abs();
            ka.partial_cmp(&kb).unwrap()
        })
        .unwrap_or((n, 1))
}

/// Builds the slab + island geometry.
pub fn build_morse_lattice(spec: &MorseClusterSpec) -> Result<(Vector, Vec<bool>)> {
    let lat = build_lattice(spec)?;
    let mask = lat.frozen.clone();
    Ok((lat.coordinates(), mask))
}

pub(crate) fn build_lattice(spec: &MorseClusterSpec) -> Result<MorseLattice> {
    spec.validate()?;
    let a = spec.lattice_constant;
    let row_dy = a * 3f64.sqrt() / 2.0;
    let dz = a * (2.0f64 / 3.0).sqrt();
    // In-plane shift between successive ABC layers.
    let shift = [a / 2.0, a / (2.0 * 3f64.sqrt())];
    let (cols, rows) = layer_shape(spec.atoms_per_layer);

    let site = |layer: usize, i: i64, j: i64| -> [f64; 3] {
        let k = (layer % 3) as f64;
        let odd = j.rem_euclid(2) as f64;
        [
            i as f64 * a + odd * a / 2.0 + k * shift[0],
            j as f64 * row_dy + k * shift[1],
            layer as f64 * dz,
        ]
    };

    let mut positions = Vec::with_capacity(spec.total_atoms());
    let mut frozen = Vec::with_capacity(spec.total_atoms());
    for layer in 0..spec.slab_layers {
        for j in 0..rows as i64 {
            for i in 0..cols as i64 {
                positions.push(site(layer, i, j));
                frozen.push(layer < spec.frozen_layers);
            }
        }
    }

    if spec.island_atoms > 0 {
        let top = spec.slab_layers;
        let cx = (cols as f64 - 1.0) * a / 2.0;
        let cy = (rows as f64 - 1.0) * row_dy / 2.0;
        let mut best = site(top, 0, 0);
        let mut best_d = f64::INFINITY;
        for j in 0..rows as i64 {
            for i in 0..cols as i64 {
                let p = site(top, i, j);
                let d = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
        }
        let shell = [
            (0.0, 0.0),
            (a, 0.0),
            (a / 2.0, row_dy),
            (-a / 2.0, row_dy),
            (-a, 0.0),
            (-a / 2.0, -row_dy),
            (a / 2.0, -row_dy),
        ];
        for &(ox, oy) in shell.iter().take(spec.island_atoms) {
            positions.push([best[0] + ox, best[1] + oy, best[2]]);
            frozen.push(false);
        }
    }
    Ok(MorseLattice { positions, frozen })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_distance(p: &[[f64; 3]]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d = ((p[i][0] - p[j][0]).powi(2)
                    + (p[i][1] - p[j][1]).powi(2)
                    + (p[i][2] - p[j][2]).powi(2))
                .sqrt();
                m = m.min(d);
            }
        }
        m
    }

    #[test]
    fn default_counts() {
        let spec = MorseClusterSpec::default();
        let lat = build_lattice(&spec).unwrap();
        assert_eq!(lat.positions.len(), 343);
        assert_eq!(lat.free_count(), 175);
        assert_eq!(spec.free_dof(), 525);
        let (coords, mask) = build_morse_lattice(&spec).unwrap();
        assert_eq!(coords.len(), 3 * 343);
        assert_eq!(mask.iter().filter(|f| **f).count(), 168);
    }

    #[test]
    fn nearest_neighbour_distance_is_the_lattice_constant() {
        let lat = build_lattice(&MorseClusterSpec::default()).unwrap();
        assert!((min_distance(&lat.positions) - 2.74412).abs() < 1e-9);
    }

    #[test]
    fn single_free_layer() {
        let spec = MorseClusterSpec {
            slab_layers: 1,
            frozen_layers: 0,
            island_atoms: 0,
            atoms_per_layer: 12,
            ..MorseClusterSpec::default()
        };
        let lat = build_lattice(&spec).unwrap();
        assert_eq!(lat.free_count(), 12);
    }

    #[test]
    fn layer_patch_is_roughly_square() {
        assert_eq!(layer_shape(56), (7, 8));
        assert_eq!(layer_shape(7), (1, 7));
    }

    #[test]
    fn island_sits_in_fcc_hollows() {
        let spec = MorseClusterSpec::default();
        let lat = build_lattice(&spec).unwrap();
        let n_slab = spec.slab_layers * spec.atoms_per_layer;
        let top: Vec<_> = lat.positions[(n_slab - spec.atoms_per_layer)..n_slab].to_vec();
        let second: Vec<_> =
            lat.positions[(n_slab - 2 * spec.atoms_per_layer)..(n_slab - spec.atoms_per_layer)].to_vec();
        for ad in &lat.positions[n_slab..] {
            // Every adatom has three top-layer neighbours at the lattice constant
            // and no second-layer atom directly below it (fcc, not hcp).
            let nn = top
                .iter()
                .filter(|p| {
                    let d = ((p[0] - ad[0]).powi(2) + (p[1] - ad[1]).powi(2) + (p[2] - ad[2]).powi(2)).sqrt();
                    (d - spec.lattice_constant).abs() < 1e-9
                })
                .count();
            assert_eq!(nn, 3);
            let below = second
                .iter()
                .any(|p| (p[0] - ad[0]).abs() < 1e-9 && (p[1] - ad[1]).abs() < 1e-9);
            assert!(!below);
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = MorseClusterSpec { frozen_layers: 9, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MorseClusterSpec { island_atoms: 8, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MorseClusterSpec { rc: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
