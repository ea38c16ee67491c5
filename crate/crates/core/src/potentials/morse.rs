use std::any::Any;

use crate::error::Result;
use crate::linalg::Vector;
use crate::par::{self, Execution};

use super::lattice::{build_lattice, MorseClusterSpec, MorseLattice};
use super::{PotentialModel, Surface};

/// Cut-and-shifted Morse pair function. Only the value is shifted, so the
/// force jumps at the cutoff.
#[derive(Debug, Clone, Copy)]
pub struct MorsePair {
    pub depth: f64,
    pub range: f64,
    pub r0: f64,
    pub rc: f64,
    shift: f64,
}

impl MorsePair {
    pub fn new(depth: f64, range: f64, r0: f64, rc: f64) -> Self {
        let mut p = MorsePair { depth, range, r0, rc, shift: 0.0 };
        p.shift = p.raw(rc);
        p
    }

    fn raw(&self, r: f64) -> f64 {
        let e = (-self.range * (r - self.r0)).exp();
        self.depth * (e * e - 2.0 * e)
    }

    pub fn value(&self, r: f64) -> f64 {
        if r >= self.rc {
            0.0
        } else {
            self.raw(r) - self.shift
        }
    }

    /// `(φ(r), φ'(r), φ''(r))`, all zero beyond the cutoff.
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        if r >= self.rc {
            return (0.0, 0.0, 0.0);
        }
        let e = (-self.range * (r - self.r0)).exp();
        let a = self.range;
        let v = self.depth * (e * e - 2.0 * e) - self.shift;
        let d1 = self.depth * 2.0 * a * (e - e * e);
        let d2 = self.depth * 2.0 * a * a * (2.0 * e * e - e);
        (v, d1, d2)
    }
}

/// Slab + island cluster; the optimization vector holds only free atoms.
#[derive(Debug, Clone)]
pub struct MorseIsland {
    pair: MorsePair,
    spec: MorseClusterSpec,
    lattice: MorseLattice,
    free_atoms: Vec<usize>,
    frozen_atoms: Vec<usize>,
    frozen_energy: f64,
    exec: Execution,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> ([f64; 3], f64) {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d, (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
}

impl MorseIsland {
    pub fn new(spec: &MorseClusterSpec) -> Result<Self> {
        let lattice = build_lattice(spec)?;
        let pair = MorsePair::new(spec.a_depth, spec.a_range, spec.r0, spec.rc);
        let free_atoms: Vec<usize> = (0..lattice.positions.len()).filter(|&i| !lattice.frozen[i]).collect();
        let frozen_atoms: Vec<usize> = (0..lattice.positions.len()).filter(|&i| lattice.frozen[i]).collect();
        let mut frozen_energy = 0.0;
        for (k, &i) in frozen_atoms.iter().enumerate() {
            for &j in &frozen_atoms[k + 1..] {
                frozen_energy += pair.value(dist(&lattice.positions[i], &lattice.positions[j]).1);
            }
        }
        Ok(MorseIsland {
            pair,
            spec: spec.clone(),
            lattice,
            free_atoms,
            frozen_atoms,
            frozen_energy,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn spec(&self) -> &MorseClusterSpec {
        &self.spec
    }

    pub fn pair(&self) -> &MorsePair {
        &self.pair
    }

    pub fn lattice(&self) -> &MorseLattice {
        &self.lattice
    }

    /// Free coordinates of the unrelaxed lattice.
    pub fn initial_free_coordinates(&self) -> Vector {
        self.lattice.free_coordinates()
    }

    /// Full positions with the free atoms taken from `x`.
    pub fn full_positions(&self, x: &Vector) -> Vec<[f64; 3]> {
        let mut pos = self.lattice.positions.clone();
        for (k, &i) in self.free_atoms.iter().enumerate() {
            pos[i] = [x[3 * k], x[3 * k + 1], x[3 * k + 2]];
        }
        pos
    }

    /// Indices (into the full atom list) of the island atoms.
    pub fn island_atoms(&self) -> std::ops::Range<usize> {
        let n_slab = self.spec.slab_layers * self.spec.atoms_per_layer;
        n_slab..n_slab + self.spec.island_atoms
    }

    pub fn into_model(self) -> PotentialModel {
        let x0 = self.initial_free_coordinates();
        PotentialModel::new("morse_island", self).with_initial_point(x0)
    }

    fn position(&self, x: &Vector, atom: usize, slot: Option<usize>) -> [f64; 3] {
        match slot {
            Some(k) => [x[3 * k], x[3 * k + 1], x[3 * k + 2]],
            None => self.lattice.positions[atom],
        }
    }

    fn slots(&self) -> Vec<Option<usize>> {
        let mut slot = vec![None; self.lattice.positions.len()];
        for (k, &i) in self.free_atoms.iter().enumerate() {
            slot[i] = Some(k);
        }
        slot
    }
}

impl Surface for MorseIsland {
    fn dim(&self) -> usize {
        3 * self.free_atoms.len()
    }

    fn energy(&self, x: &Vector) -> f64 {
        let n_free = self.free_atoms.len();
        let rows = par::map_range(self.exec, n_free, |k| {
            let pk = [x[3 * k], x[3 * k + 1], x[3 * k + 2]];
            let mut e = 0.0;
            for l in k + 1..n_free {
                let pl = [x[3 * l], x[3 * l + 1], x[3 * l + 2]];
                e += self.pair.value(dist(&pk, &pl).1);
            }
            for &j in &self.frozen_atoms {
                e += self.pair.value(dist(&pk, &self.lattice.positions[j]).1);
            }
            e
        });
        self.frozen_energy + rows.iter().sum::<f64>()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let slot = self.slots();
        let n = self.lattice.positions.len();
        let rows = par::map_range(self.exec, self.free_atoms.len(), |k| {
            let i = self.free_atoms[k];
            let pi = [x[3 * k], x[3 * k + 1], x[3 * k + 2]];
            let mut g = [0.0; 3];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (d, r) = dist(&pi, &self.position(x, j, slot[j]));
                if r >= self.pair.rc {
                    continue;
                }
                let (_, d1, _) = self.pair.derivatives(r);
                let s = d1 / r;
                for c in 0..3 {
                    g[c] += s * d[c];
                }
            }
            g
        });
        Vector::from_iterator(self.dim(), rows.iter().flat_map(|g| g.iter().copied()))
    }

    fn hessian_vec(&self, x: &Vector, u: &Vector) -> Vector {
        let slot = self.slots();
        let n = self.lattice.positions.len();
        let rows = par::map_range(self.exec, self.free_atoms.len(), |k| {
            let i = self.free_atoms[k];
            let pi = [x[3 * k], x[3 * k + 1], x[3 * k + 2]];
            let ui = [u[3 * k], u[3 * k + 1], u[3 * k + 2]];
            let mut out = [0.0; 3];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (d, r) = dist(&pi, &self.position(x, j, slot[j]));
                if r >= self.pair.rc {
                    continue;
                }
                let (_, d1, d2) = self.pair.derivatives(r);
                let du = match slot[j] {
                    Some(l) => [ui[0] - u[3 * l], ui[1] - u[3 * l + 1], ui[2] - u[3 * l + 2]],
                    None => ui,
                };
                let n_hat = [d[0] / r, d[1] / r, d[2] / r];
                let along = n_hat[0] * du[0] + n_hat[1] * du[1] + n_hat[2] * du[2];
                let t = d1 / r;
                for c in 0..3 {
                    out[c] += d2 * along * n_hat[c] + t * (du[c] - along * n_hat[c]);
                }
            }
            out
        });
        Vector::from_iterator(self.dim(), rows.iter().flat_map(|g| g.iter().copied()))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_value_at_r0_matches_hand_formula() {
        let p = MorsePair::new(0.7102, 1.6047, 2.8970, 9.5);
        // Independent evaluation of A(e^{-2a(R-R0)} - 2e^{-a(R-R0)}) at R0 and Rc.
        let raw = |r: f64| 0.7102 * ((-2.0 * 1.6047 * (r - 2.8970)).exp() - 2.0 * (-1.6047 * (r - 2.8970)).exp());
        let expected = -0.7102 - raw(9.5);
        assert!((p.value(2.8970) - expected).abs() < 1e-15);
        assert_eq!(p.value(9.5), 0.0);
        assert_eq!(p.value(12.0), 0.0);
        assert!(p.value(9.5 - 1e-12).abs() < 1e-15);
    }

    #[test]
    fn pair_derivatives_match_finite_differences() {
        let p = MorsePair::new(0.7102, 1.6047, 2.8970, 9.5);
        for &r in &[2.3, 2.74412, 3.5, 6.0, 9.0] {
            let h = 1e-5;
            let (_, d1, d2) = p.derivatives(r);
            let fd1 = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
            let fd2 = (p.derivatives(r + h).1 - p.derivatives(r - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-7 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let spec = MorseClusterSpec::default();
        let seq = MorseIsland::new(&spec).unwrap().with_execution(Execution::Sequential);
        let par = MorseIsland::new(&spec).unwrap().with_execution(Execution::Parallel);
        let x = seq.initial_free_coordinates();
        let u = Vector::from_fn(x.len(), |i, _| ((i * 7919) % 13) as f64 - 6.0);
        assert_eq!(seq.energy(&x), par.energy(&x));
        assert_eq!(seq.gradient(&x), par.gradient(&x));
        assert_eq!(seq.hessian_vec(&x, &u), par.hessian_vec(&x, &u));
    }
}
