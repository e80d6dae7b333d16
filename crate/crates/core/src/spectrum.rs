//! Radial Neumann eigenpairs of `-Δ + 1`.

use crate::error::{Error, Result};
use crate::params::Domain;
use crate::radial::{dopri5, gauss_legendre, hermite, hermite5, integrate_with, series_start, uniform_grid, Control, OdeOptions, Profile, State};
use crate::scalar::Real;

/// Nodes of the stored eigenfunctions.
pub const EIG_NODES: usize = 2001;

/// Radial eigenpair, normalized by `omega int phi^2 r^(N-1) dr = 1` and `phi(a) > 0`.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub index: usize,
    pub lam: T,
    pub phi: Profile<T>,
    pub domain: Domain<T>,
    /// Cell-averaged residual of the eigenvalue equation.
    pub residual: T,
}

fn opts<T: Real>() -> OdeOptions<T> {
    let mut o = OdeOptions::with_tol(T::lit(1e-12));
    o.u_cap = T::infinity();
    o
}

/// Shoots `phi(a) = 1, phi'(a) = 0` to `b`; returns `(phi'(b), interior zero count)`.
pub fn shoot<T: Real>(domain: &Domain<T>, lam: T) -> Result<(T, usize)> {
    let nm1 = domain.nm1();
    let g = move |u: T| lam * u;
    let (r0, y0) = if domain.a == T::zero() {
        let h = T::lit(1e-4).min(domain.b / T::lit(4.0));
        (h, series_start(domain.dim, &g, T::one(), h))
    } else {
        (domain.a, [T::one(), T::zero()])
    };
    let mut zeros = 0usize;
    let (_, y) = dopri5(
        |r, y: &[T; 2]| [y[1], y[0] - lam * y[0] - nm1 * y[1] / r],
        r0,
        y0,
        domain.b,
        &[],
        &opts(),
        |s| {
            if s.y0[0] != T::zero() && s.y1[0].signum() != s.y0[0].signum() && s.r1 < domain.b {
                zeros += 1;
            }
            if s.y1[0] == T::zero() && s.r1 < domain.b {
                zeros += 1;
            }
            Ok(Control::Continue)
        },
    )?;
    Ok((y[1], zeros))
}

struct Scan<T> {
    table: Vec<(T, T, usize)>,
}

impl<T: Real> Scan<T> {
    fn describe(&self) -> String {
        let rows: Vec<String> =
            self.table.iter().map(|(l, f, z)| format!("{:.4}:{:+.3e}:{}", l.as_f64(), f.as_f64(), z)).collect();
        rows.join(" ")
    }
}

/// Eigenvalues `lambda_2 .. lambda_count` (radial, Neumann) by scanning `phi'(b; lambda)`.
pub fn eigenvalues<T: Real>(domain: &Domain<T>, count: usize) -> Result<Vec<T>> {
    let mut out = vec![T::one()];
    if count <= 1 {
        return Ok(out);
    }
    let len = domain.b - domain.a;
    // radial Neumann gaps exceed a quarter of the 1-D value, so the scan may start there
    let start = T::lit(1.5).max(T::one() + T::lit(0.25) * (T::PI() / len).powi(2));
    let step = T::one();
    let mut scan = Scan { table: Vec::new() };
    let mut lam = start;
    let (mut f_prev, mut z_prev) = shoot(domain, lam)?;
    scan.table.push((lam, f_prev, z_prev));
    let max_iter = 2_000_000usize;
    let mut iter = 0;
    while out.len() < count {
        iter += 1;
        if iter > max_iter {
            return Err(Error::BracketFailure(scan.describe()));
        }
        let next = lam + step;
        let (f, z) = shoot(domain, next)?;
        scan.table.push((next, f, z));
        if scan.table.len() > 64 {
            scan.table.remove(0);
        }
        if f == T::zero() || f.signum() != f_prev.signum() {
            let (mut lo, mut hi) = (lam, next);
            let f_lo = f_prev;
            for _ in 0..200 {
                let mid = (lo + hi) / T::lit(2.0);
                let (fm, _) = shoot(domain, mid)?;
                if fm.signum() == f_lo.signum() && fm != T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= T::lit(1e-13).max(T::epsilon() * T::lit(4.0)) * hi {
                    break;
                }
            }
            let root = (lo + hi) / T::lit(2.0);
            let (_, zeros) = shoot(domain, root)?;
            let expected = out.len();
            if zeros != expected {
                return Err(Error::BracketFailure(format!(
                    "root {} has {} zeros, expected {}; scan {}",
                    root.as_f64(),
                    zeros,
                    expected,
                    scan.describe()
                )));
            }
            out.push(root);
        }
        if z > z_prev + 1 {
            return Err(Error::BracketFailure(format!("zero count jumped by {}; scan {}", z - z_prev, scan.describe())));
        }
        lam = next;
        f_prev = f;
        z_prev = z;
    }
    Ok(out)
}

/// Second radial Neumann eigenvalue, the existence threshold of monotone solutions.
pub fn lambda2<T: Real>(domain: &Domain<T>) -> Result<T> {
    Ok(eigenvalues(domain, 2)?[1])
}

fn eigenfunction<T: Real>(domain: &Domain<T>, index: usize, lam: T) -> Result<EigenPair<T>> {
    let grid = uniform_grid(domain.a, domain.b, EIG_NODES);
    let raw = if index == 1 {
        Profile::from_fn(grid.clone(), *domain, |_| (T::one(), T::zero()))?
    } else {
        let p = integrate_with(domain, move |u: T| lam * u, State::new(domain.a, T::one(), T::zero()), domain.b, &grid, &opts())?;
        // keep the checkpoint nodes only
        let (mut u, mut du) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
        let mut j = 0;
        for &r in &grid {
            while p.grid[j] < r {
                j += 1;
            }
            u.push(p.u[j]);
            du.push(p.du[j]);
        }
        Profile::new(grid.clone(), u, du, *domain)?
    };
    let norm = weighted_product(&raw, &raw).sqrt();
    let phi = Profile::new(
        raw.grid.clone(),
        raw.u.iter().map(|&v| v / norm).collect(),
        raw.du.iter().map(|&v| v / norm).collect(),
        *domain,
    )?;
    let residual = cell_residual(&phi, lam);
    Ok(EigenPair { index, lam, phi, domain: *domain, residual })
}

/// `omega int f g r^(N-1) dr` for two profiles on the same grid.
pub fn weighted_product<T: Real>(f: &Profile<T>, g: &Profile<T>) -> T {
    let d = f.domain;
    let n = d.dim as i32;
    let nm1 = d.nm1();
    let mut h = Vec::with_capacity(f.len());
    let mut dh = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        let r = f.grid[i];
        let w = r.powi(n - 1);
        let dw = if r == T::zero() && n == 2 { T::one() } else { nm1 * r.powi(n - 2) };
        h.push(f.u[i] * g.u[i] * w);
        dh.push((f.du[i] * g.u[i] + f.u[i] * g.du[i]) * w + f.u[i] * g.u[i] * dw);
    }
    d.omega() * hermite(&f.grid, &h, &dh)
}

/// Max over cells of the flux-balance residual of `-(r^(N-1) phi')' + (1 - lam) r^(N-1) phi`,
/// divided by the cell's weighted volume. The source is integrated on the quintic Hermite
/// interpolant (second derivatives from the equation) so quadrature error stays below the
/// data error even in the tiny cells at the origin.
pub fn cell_residual<T: Real>(phi: &Profile<T>, lam: T) -> T {
    let d = phi.domain;
    let n = d.dim as i32;
    let nm1 = d.nm1();
    let k = T::one() - lam;
    let second = |r: T, u: T, du: T| if r == T::zero() { k * u / T::from_i32(n).unwrap() } else { k * u - nm1 * du / r };
    let mut worst = T::zero();
    for i in 0..phi.len() - 1 {
        let (r0, r1) = (phi.grid[i], phi.grid[i + 1]);
        let (u0, u1, d0, d1) = (phi.u[i], phi.u[i + 1], phi.du[i], phi.du[i + 1]);
        let flux = r1.powi(n - 1) * d1 - r0.powi(n - 1) * d0;
        let (s0, s1) = (second(r0, u0, d0), second(r1, u1, d1));
        let integral = gauss_legendre(r0, r1, 1, |r| k * hermite5(r0, u0, d0, s0, r1, u1, d1, s1, r).0 * r.powi(n - 1));
        let vol = (r1.powi(n) - r0.powi(n)) / T::from_i32(n).unwrap();
        worst = worst.max((integral - flux).abs() / vol);
    }
    worst
}

/// The first `count` radial Neumann eigenpairs.
pub fn radial_neumann_eigs<T: Real>(domain: &Domain<T>, count: usize) -> Result<Vec<EigenPair<T>>> {
    if count == 0 {
        return Err(Error::InvalidParams("count must be at least 1".into()));
    }
    let lams = eigenvalues(domain, count)?;
    lams.iter().enumerate().map(|(i, &l)| eigenfunction(domain, i + 1, l)).collect()
}

/// `omega int phi^3 r^(N-1) dr`.
pub fn cubic_integral<T: Real>(e: &EigenPair<T>) -> T {
    let sq = Profile {
        grid: e.phi.grid.clone(),
        u: e.phi.u.iter().map(|&v| v * v).collect(),
        du: e.phi.u.iter().zip(&e.phi.du).map(|(&v, &d)| T::lit(2.0) * v * d).collect(),
        domain: e.domain,
    };
    weighted_product(&sq, &e.phi)
}

/// Transcriticality coefficient `-(1/2) lam^2 omega int phi^3 r^(N-1) dr`.
pub fn transcritical_coefficient<T: Real>(e: &EigenPair<T>) -> T {
    -T::lit(0.5) * e.lam * e.lam * cubic_integral(e)
}

/// Interior sign changes of a sampled function.
pub fn count_sign_changes<T: Real>(v: &[T]) -> usize {
    let mut last = T::zero();
    let mut count = 0;
    for &x in v {
        if x == T::zero() {
            continue;
        }
        if last != T::zero() && x.signum() != last.signum() {
            count += 1;
        }
        last = x;
    }
    count
}
