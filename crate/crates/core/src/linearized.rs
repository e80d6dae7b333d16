//! Linearization `-Δ + 1 - mu e^(mu (u - 1))` with Neumann conditions, discretized by P1
//! elements with weight `r^(N-1)` and a blended (consistent + lumped) mass.

use crate::error::{Error, Result};
use crate::linalg::TridiagPencil;
use crate::params::Domain;
use crate::radial::{uniform_grid, Profile};

const GAUSS3: [(f64, f64); 3] = [(0.112_701_665_379_258_3, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.887_298_334_620_741_7, 5.0 / 18.0)];

/// Generalized eigenproblem `K v = sigma M v` of the linearized operator.
#[derive(Debug, Clone)]
pub struct Linearized {
    pub grid: Vec<f64>,
    pub pencil: TridiagPencil<f64>,
}

/// Blended mass of one element with density `q` (sampled at the Gauss points).
fn element(r0: f64, r1: f64, n: i32, q: impl Fn(f64) -> f64) -> (f64, [f64; 3], [f64; 3]) {
    let h = r1 - r0;
    let (mut stiff, mut cons, mut lump) = (0.0, [0.0; 3], [0.0; 3]);
    for &(t, w) in &GAUSS3 {
        let r = r0 + t * h;
        let wr = r.powi(n - 1) * w * h;
        let m = wr * q(r);
        stiff += wr / (h * h);
        cons[0] += m * (1.0 - t) * (1.0 - t);
        cons[1] += m * (1.0 - t) * t;
        cons[2] += m * t * t;
        lump[0] += m * (1.0 - t);
        lump[2] += m * t;
    }
    let blend = [0.5 * (cons[0] + lump[0]), 0.5 * cons[1], 0.5 * (cons[2] + lump[2])];
    (stiff, blend, cons)
}

impl Linearized {
    /// Pencil for a potential `q(r)` (the operator `-Δ + q`).
    pub fn with_potential(domain: &Domain<f64>, grid: Vec<f64>, q: impl Fn(f64) -> f64) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::EigSolverFailure("need at least 3 nodes".into()));
        }
        let n = domain.dim as i32;
        let len = grid.len();
        let mut p = TridiagPencil { k_diag: vec![0.0; len], k_off: vec![0.0; len - 1], m_diag: vec![0.0; len], m_off: vec![0.0; len - 1] };
        for e in 0..len - 1 {
            let (r0, r1) = (grid[e], grid[e + 1]);
            let (s, mq, _) = element(r0, r1, n, &q);
            let (_, m1, _) = element(r0, r1, n, |_| 1.0);
            p.k_diag[e] += s + mq[0];
            p.k_diag[e + 1] += s + mq[2];
            p.k_off[e] += -s + mq[1];
            p.m_diag[e] += m1[0];
            p.m_diag[e + 1] += m1[2];
            p.m_off[e] += m1[1];
        }
        Ok(Linearized { grid, pencil: p })
    }

    /// Linearization at a profile on its own grid.
    pub fn at(profile: &Profile<f64>, mu: f64) -> Result<Self> {
        Self::on_grid(profile, mu, profile.grid.clone())
    }

    /// Linearization at a profile interpolated onto `nodes` uniform nodes.
    pub fn uniform(profile: &Profile<f64>, mu: f64, nodes: usize) -> Result<Self> {
        Self::on_grid(profile, mu, uniform_grid(profile.start(), profile.end(), nodes))
    }

    pub fn on_grid(profile: &Profile<f64>, mu: f64, grid: Vec<f64>) -> Result<Self> {
        Self::with_potential(&profile.domain, grid, |r| 1.0 - mu * (mu * (profile.value(r) - 1.0)).exp())
    }

    /// Linearization at the constant solution `u = 1` (potential `1 - mu`).
    pub fn at_one(domain: &Domain<f64>, mu: f64, nodes: usize) -> Result<Self> {
        Self::with_potential(domain, uniform_grid(domain.a, domain.b, nodes), |_| 1.0 - mu)
    }

    /// Number of negative eigenvalues.
    pub fn morse_index(&self) -> usize {
        self.pencil.count_below(0.0)
    }

    /// `j`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let bound = self.pencil.spectral_bound();
        self.pencil.eigenvalue(j, -bound, bound, 1e-15)
    }

    /// Eigenvalue of smallest magnitude: located by inertia, polished by inverse iteration.
    pub fn sigma_min(&self) -> Result<f64> {
        let m = self.morse_index();
        let above = self.eigenvalue(m);
        let guess = if m > 0 {
            let below = self.eigenvalue(m - 1);
            if below.abs() < above.abs() {
                below
            } else {
                above
            }
        } else {
            above
        };
        if !guess.is_finite() {
            return Err(Error::EigSolverFailure("Sturm bisection returned a non-finite value".into()));
        }
        let (rq, _) = self.pencil.inverse_iteration(guess, 50)?;
        if (rq - guess).abs() > 1e-6 * guess.abs().max(1.0) {
            return Err(Error::EigSolverFailure(format!("inverse iteration drifted: {rq} vs bisection {guess}")));
        }
        Ok(rq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_one_has_unit_ground_state() {
        // -Δ + 1 with Neumann: lowest eigenvalue 1 (constants) exactly
        let d = Domain::ball(3).unwrap();
        let l = Linearized::with_potential(&d, uniform_grid(0.0, 1.0, 101), |_| 1.0).unwrap();
        assert!((l.eigenvalue(0) - 1.0).abs() < 1e-12);
        assert_eq!(l.morse_index(), 0);
    }

    #[test]
    fn constant_state_inertia_counts_eigenvalues_below_mu() {
        let d = Domain::ball(3).unwrap();
        // lambda_2 = 21.19, lambda_3 = 62.0 on the unit ball
        let l = Linearized::at_one(&d, 30.0, 801).unwrap();
        assert_eq!(l.morse_index(), 2);
        let s = l.sigma_min().unwrap();
        assert!((s - (21.190_6 - 30.0)).abs() < 1e-2, "{s}");
    }
}
