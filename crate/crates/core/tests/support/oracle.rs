//! Brute-force potential-energy oracle for short planar chains.
//!
//! The joint law is the stationarity condition of
//! `V = Σ m g z + Σ [M_f (|s| − δ)⁺ + k/2 ((|s| − δ)⁺)²]`, so a grid search of
//! `V` over the joint sags gives an independent equilibrium.

#![allow(dead_code)]

#[derive(Debug, Clone)]
pub struct ToyChain {
    pub spacing: f64,
    pub link_masses: Vec<f64>,
    pub load: Option<(f64, f64)>,
    pub stiffness: f64,
    pub backlash: f64,
    pub holding: f64,
    pub gravity: f64,
}

impl ToyChain {
    pub fn joints(&self) -> usize {
        self.link_masses.len()
    }

    /// Planar nodes `(x, z)` for the given sags (positive downward).
    pub fn nodes(&self, sags: &[f64]) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0)];
        let mut heading = 0.0;
        for s in sags {
            heading -= s;
            let (x, z) = *out.last().unwrap();
            out.push((x + self.spacing * heading.cos(), z + self.spacing * heading.sin()));
        }
        out
    }

    fn point_at(&self, nodes: &[(f64, f64)], arc: f64) -> (f64, f64) {
        let k = ((arc / self.spacing).floor() as usize).min(nodes.len() - 2);
        let t = (arc - k as f64 * self.spacing) / self.spacing;
        let (a, b) = (nodes[k], nodes[k + 1]);
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }

    pub fn energy(&self, sags: &[f64]) -> f64 {
        let nodes = self.nodes(sags);
        let mut v = 0.0;
        for (i, m) in self.link_masses.iter().enumerate() {
            v += m * self.gravity * 0.5 * (nodes[i].1 + nodes[i + 1].1);
        }
        if let Some((arc, m)) = self.load {
            v += m * self.gravity * self.point_at(&nodes, arc).1;
        }
        for s in sags {
            let excess = (s.abs() - self.backlash).max(0.0);
            v += self.holding * excess + 0.5 * self.stiffness * excess * excess;
        }
        v
    }

    pub fn tip(&self, sags: &[f64]) -> (f64, f64) {
        *self.nodes(sags).last().unwrap()
    }
}

fn search(chain: &ToyChain, center: &[f64], half_width: f64, step: f64) -> Vec<f64> {
    let n = chain.joints();
    let per_axis = (2.0 * half_width / step).round() as usize + 1;
    let mut best = (f64::INFINITY, center.to_vec());
    let mut idx = vec![0usize; n];
    let mut sags = vec![0.0; n];
    loop {
        for j in 0..n {
            sags[j] = center[j] - half_width + idx[j] as f64 * step;
        }
        let e = chain.energy(&sags);
        if e < best.0 {
            best = (e, sags.clone());
        }
        let mut j = 0;
        loop {
            if j == n {
                return best.1;
            }
            idx[j] += 1;
            if idx[j] < per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Energy minimum on a 0.02° grid, found coarse to fine.
pub fn grid_minimum(chain: &ToyChain) -> Vec<f64> {
    let deg = std::f64::consts::PI / 180.0;
    let n = chain.joints();
    let coarse = search(chain, &vec![20.0 * deg; n], 22.0 * deg, 0.5 * deg);
    let medium = search(chain, &coarse, 1.0 * deg, 0.1 * deg);
    search(chain, &medium, 0.2 * deg, 0.02 * deg)
}
