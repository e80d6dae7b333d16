//! Fourth-order Hermite collocation of the radial Neumann problem
//! `(r^(N-1) u')' = r^(N-1) (u - e^(mu (u - 1)))`, `u'(a) = u'(b) = 0`.
//!
//! Unknowns are interleaved `(u_0, p_0, u_1, p_1, ...)` with `p = u'`. Each cell carries the
//! corrected trapezoid rule for the flux `r^(N-1) p` and for `u` itself, so the discrete mass
//! balance telescopes exactly.

use crate::error::{Error, Result};
use crate::linalg::{Banded, BandedLu};
use crate::params::Domain;
use crate::radial::Profile;

/// Discretization of the problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct Collocation {
    pub domain: Domain<f64>,
    pub grid: Vec<f64>,
    w: Vec<f64>,
    dw: Vec<f64>,
    inv_r: Vec<f64>,
    vol: Vec<f64>,
}

/// Pointwise nonlinearity data at one node.
#[derive(Clone, Copy)]
struct Src {
    s: f64,
    ds: f64,
    dds: f64,
    s_mu: f64,
    ds_mu: f64,
}

fn src(u: f64, mu: f64) -> Src {
    let e = (mu * (u - 1.0)).exp();
    Src { s: u - e, ds: 1.0 - mu * e, dds: -mu * mu * e, s_mu: -(u - 1.0) * e, ds_mu: -(1.0 + mu * (u - 1.0)) * e }
}

/// Newton tolerances.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-9, max_iter: 60 }
    }
}

/// Converged discrete solution.
#[derive(Debug, Clone)]
pub struct Solved {
    pub x: Vec<f64>,
    /// Max over cells of the flux residual per unit weighted volume.
    pub residual: f64,
    pub iterations: usize,
}

impl Collocation {
    pub fn new(domain: Domain<f64>, grid: Vec<f64>) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::InvalidParams("collocation needs at least 3 nodes".into()));
        }
        let n = domain.dim as i32;
        let nm1 = (n - 1) as f64;
        let w = grid.iter().map(|&r| r.powi(n - 1)).collect();
        let dw = grid
            .iter()
            .map(|&r| if r == 0.0 { if n == 2 { 1.0 } else { 0.0 } } else { nm1 * r.powi(n - 2) })
            .collect();
        let inv_r = grid.iter().map(|&r| if r == 0.0 { 0.0 } else { 1.0 / r }).collect();
        let vol = grid.windows(2).map(|c| (c[1].powi(n) - c[0].powi(n)) / n as f64).collect();
        Ok(Collocation { domain, grid, w, dw, inv_r, vol })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        2 * self.grid.len()
    }

    fn q(&self, i: usize, p: f64, s: &Src) -> f64 {
        if self.grid[i] == 0.0 {
            s.s / self.domain.dim as f64
        } else {
            s.s - self.domain.nm1() * p * self.inv_r[i]
        }
    }

    /// Scaled residual vector: rows `0` and `2n - 1` are the Neumann conditions, cell `i`
    /// contributes the flux row `2i + 1` (divided by the cell volume) and the value row
    /// `2i + 2` (divided by the cell width).
    pub fn residual(&self, x: &[f64], mu: f64) -> Vec<f64> {
        let n = self.len();
        let mut r = vec![0.0; 2 * n];
        let srcs: Vec<Src> = (0..n).map(|i| src(x[2 * i], mu)).collect();
        r[0] = x[1];
        for i in 0..n - 1 {
            let h = self.grid[i + 1] - self.grid[i];
            let (u0, p0, u1, p1) = (x[2 * i], x[2 * i + 1], x[2 * i + 2], x[2 * i + 3]);
            let (s0, s1) = (&srcs[i], &srcs[i + 1]);
            let g0 = s0.s * self.w[i];
            let g1 = s1.s * self.w[i + 1];
            let dg0 = s0.ds * p0 * self.w[i] + s0.s * self.dw[i];
            let dg1 = s1.ds * p1 * self.w[i + 1] + s1.s * self.dw[i + 1];
            let e1 = self.w[i + 1] * p1 - self.w[i] * p0 - h / 2.0 * (g0 + g1) - h * h / 12.0 * (dg0 - dg1);
            let q0 = self.q(i, p0, s0);
            let q1 = self.q(i + 1, p1, s1);
            let e2 = u1 - u0 - h / 2.0 * (p0 + p1) - h * h / 12.0 * (q0 - q1);
            r[2 * i + 1] = e1 / self.vol[i];
            r[2 * i + 2] = e2 / h;
        }
        r[2 * n - 1] = x[2 * n - 1];
        r
    }

    /// Scaled Jacobian (band 2/2) and the derivative of the residual with respect to `mu`.
    pub fn jacobian(&self, x: &[f64], mu: f64) -> (Banded<f64>, Vec<f64>) {
        let n = self.len();
        let nm1 = self.domain.nm1();
        let mut j = Banded::zeros(2 * n, 2, 2);
        let mut dmu = vec![0.0; 2 * n];
        let srcs: Vec<Src> = (0..n).map(|i| src(x[2 * i], mu)).collect();
        j.set(0, 1, 1.0);
        for i in 0..n - 1 {
            let h = self.grid[i + 1] - self.grid[i];
            let h12 = h * h / 12.0;
            let (p0, p1) = (x[2 * i + 1], x[2 * i + 3]);
            let (s0, s1) = (&srcs[i], &srcs[i + 1]);
            let (w0, w1, dw0, dw1) = (self.w[i], self.w[i + 1], self.dw[i], self.dw[i + 1]);
            let row = 2 * i + 1;
            let sc = 1.0 / self.vol[i];
            let cu0 = 2 * i;
            j.set(row, cu0, sc * (-h / 2.0 * s0.ds * w0 - h12 * (s0.dds * p0 * w0 + s0.ds * dw0)));
            j.set(row, cu0 + 1, sc * (-w0 - h12 * s0.ds * w0));
            j.set(row, cu0 + 2, sc * (-h / 2.0 * s1.ds * w1 + h12 * (s1.dds * p1 * w1 + s1.ds * dw1)));
            j.set(row, cu0 + 3, sc * (w1 + h12 * s1.ds * w1));
            let gm0 = s0.s_mu * w0;
            let gm1 = s1.s_mu * w1;
            let dgm0 = s0.ds_mu * p0 * w0 + s0.s_mu * dw0;
            let dgm1 = s1.ds_mu * p1 * w1 + s1.s_mu * dw1;
            dmu[row] = sc * (-h / 2.0 * (gm0 + gm1) - h12 * (dgm0 - dgm1));

            let row = 2 * i + 2;
            let sc = 1.0 / h;
            let (dq0u, dq0p) = if self.grid[i] == 0.0 { (s0.ds / self.domain.dim as f64, 0.0) } else { (s0.ds, -nm1 * self.inv_r[i]) };
            let (dq1u, dq1p) = (s1.ds, -nm1 * self.inv_r[i + 1]);
            j.set(row, cu0, sc * (-1.0 - h12 * dq0u));
            j.set(row, cu0 + 1, sc * (-h / 2.0 - h12 * dq0p));
            j.set(row, cu0 + 2, sc * (1.0 + h12 * dq1u));
            j.set(row, cu0 + 3, sc * (-h / 2.0 + h12 * dq1p));
            let qm0 = if self.grid[i] == 0.0 { s0.s_mu / self.domain.dim as f64 } else { s0.s_mu };
            dmu[row] = sc * (-h12 * (qm0 - s1.s_mu));
        }
        j.set(2 * n - 1, 2 * n - 1, 1.0);
        (j, dmu)
    }

    /// Residual of the flux rows only (the PDE residual per unit volume).
    pub fn pde_residual(&self, x: &[f64], mu: f64) -> f64 {
        let r = self.residual(x, mu);
        (0..self.len() - 1).map(|i| r[2 * i + 1].abs()).fold(0.0, f64::max)
    }

    /// Damped Newton at fixed `mu`.
    pub fn solve(&self, x0: Vec<f64>, mu: f64, opts: &NewtonOptions) -> Result<Solved> {
        let mut x = x0;
        let mut r = self.residual(&x, mu);
        let mut norm = l2(&r);
        let target = opts.tol * 1e-3;
        for it in 0..opts.max_iter {
            let linf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if linf <= target {
                return Ok(Solved { residual: self.pde_residual(&x, mu), x, iterations: it });
            }
            let (j, _) = self.jacobian(&x, mu);
            let lu = j.factor()?;
            let mut dx = r.clone();
            lu.solve(&mut dx);
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-6 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - step * d).collect();
                let rt = self.residual(&trial, mu);
                let nt = l2(&rt);
                if nt.is_finite() && nt <= (1.0 - 1e-4 * step) * norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // no descent left: accept if already within tolerance
                let res = self.pde_residual(&x, mu);
                if linf <= opts.tol {
                    return Ok(Solved { residual: res, x, iterations: it });
                }
                return Err(Error::NewtonStall { residual: linf });
            }
        }
        let linf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if linf <= opts.tol {
            Ok(Solved { residual: self.pde_residual(&x, mu), x, iterations: opts.max_iter })
        } else {
            Err(Error::NewtonStall { residual: linf })
        }
    }

    /// Factors the Jacobian (for bordered solves).
    pub fn factor(&self, x: &[f64], mu: f64) -> Result<(BandedLu<f64>, Vec<f64>)> {
        let (j, dmu) = self.jacobian(x, mu);
        Ok((j.factor()?, dmu))
    }

    /// Interleaves a profile's values at the grid nodes.
    pub fn pack(&self, p: &Profile<f64>) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim());
        for &r in &self.grid {
            let (u, du) = p.eval(r)?;
            x.push(u);
            x.push(du);
        }
        let n = x.len();
        x[1] = 0.0;
        x[n - 1] = 0.0;
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> Profile<f64> {
        let u = x.iter().step_by(2).copied().collect();
        let du = x.iter().skip(1).step_by(2).copied().collect();
        Profile { grid: self.grid.clone(), u, du, domain: self.domain }
    }

    /// `omega`-weighted inner product of the `u` components (Hermite-free trapezoid on cells).
    pub fn weighted_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len() - 1 {
            let a = x[2 * i] * y[2 * i];
            let b = x[2 * i + 2] * y[2 * i + 2];
            s += self.vol[i] * 0.5 * (a + b);
        }
        s * self.domain.omega()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Uniform base grid refined where `e^(mu (u - 1)) > 1` so that
/// `h <= 0.02 / sqrt(mu e^(mu (u - 1)))` (at most 64-fold refinement).
pub fn fitted_grid(domain: &Domain<f64>, mu: f64, guess: &Profile<f64>, base_nodes: usize) -> Vec<f64> {
    let (a, b) = (domain.a, domain.b);
    let h0 = (b - a) / (base_nodes - 1) as f64;
    let target = |r: f64| {
        let u = guess.value(r);
        let e = (mu * (u - 1.0)).exp();
        if e > 1.0 {
            h0.min(0.02 / (mu * e).sqrt()).max(h0 / 64.0)
        } else {
            h0
        }
    };
    let mut grid = Vec::with_capacity(base_nodes + base_nodes / 4);
    for c in 0..base_nodes - 1 {
        let lo = a + c as f64 * h0;
        let hi = if c == base_nodes - 2 { b } else { a + (c + 1) as f64 * h0 };
        let h = target(lo).min(target(hi)).min(target(0.5 * (lo + hi)));
        let m = ((hi - lo) / h).ceil().max(1.0) as usize;
        for k in 0..m {
            grid.push(lo + (hi - lo) * k as f64 / m as f64);
        }
    }
    grid.push(b);
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::uniform_grid;

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = Domain::new(3, 0.0, 1.0).unwrap();
        let c = Collocation::new(d, uniform_grid(0.0, 1.0, 7)).unwrap();
        let mu = 5.0;
        let x: Vec<f64> = (0..14).map(|k| 0.8 + 0.05 * ((k * 5 % 7) as f64) - 0.1 * (k % 2) as f64).collect();
        let (j, dmu) = c.jacobian(&x, mu);
        let eps = 1e-7;
        for col in 0..14 {
            let mut xp = x.clone();
            xp[col] += eps;
            let mut xm = x.clone();
            xm[col] -= eps;
            let (rp, rm) = (c.residual(&xp, mu), c.residual(&xm, mu));
            for row in 0..14 {
                let fd = (rp[row] - rm[row]) / (2.0 * eps);
                assert!((fd - j.get(row, col)).abs() < 1e-5 * (1.0 + fd.abs()), "({row},{col}) {fd} {}", j.get(row, col));
            }
        }
        let (rp, rm) = (c.residual(&x, mu + eps), c.residual(&x, mu - eps));
        for row in 0..14 {
            let fd = (rp[row] - rm[row]) / (2.0 * eps);
            assert!((fd - dmu[row]).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn constant_states_are_exact_solutions() {
        let d = Domain::new(2, 0.2, 1.0).unwrap();
        let c = Collocation::new(d, uniform_grid(0.2, 1.0, 11)).unwrap();
        let x: Vec<f64> = (0..22).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert!(c.residual(&x, 7.0).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn fitted_grid_refines_the_layer() {
        let d = Domain::new(3, 0.0, 1.0).unwrap();
        let g = Profile::from_fn(uniform_grid(0.0, 1.0, 101), d, |r| (0.5 + 0.51 * r * r, 1.02 * r)).unwrap();
        let grid = fitted_grid(&d, 400.0, &g, 101);
        assert!(grid.len() > 101);
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), 1.0);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }
}
