//! Homogeneous solutions, the Neumann Green function of `-u'' - (N-1)/r u' + u`,
//! and the quantities built from it.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dense_solve;
use crate::params::Domain;
use crate::radial::{hermite, hermite5, integrate_with, OdeOptions, Profile, State};
use crate::scalar::Real;

/// Smallest radius at which the right solution is resolved on a ball.
pub const S_MIN: f64 = 1e-3;

/// Left/right homogeneous solutions with `r^(N-1) (xi' zeta - xi zeta') = 1`.
#[derive(Debug, Clone)]
pub struct GreenPair<T> {
    pub domain: Domain<T>,
    /// Left solution: `xi(a) = 1`, `xi'(a) = 0` (bounded at the origin on a ball).
    pub xi: Profile<T>,
    /// Right solution: `zeta'(b) = 0`, scaled so that the wronskian is one.
    pub zeta: Profile<T>,
    /// Wronskian constant before rescaling (with `zeta(b) = 1`).
    pub wronskian: T,
    /// Largest relative deviation of the normalized wronskian from one over the grid.
    pub wronskian_drift: T,
}

fn node_grid<T: Real>(lo: T, hi: T) -> Vec<T> {
    let l = |x: f64| T::lit(x);
    let hmax = l(2e-3).min((hi - lo) / l(50.0));
    let mut g = vec![lo];
    let mut r = lo;
    loop {
        let h = hmax.min(l(0.02) * r).max(hmax * l(1e-3));
        r = r + h;
        if r >= hi - hmax * l(0.25) {
            break;
        }
        g.push(r);
    }
    g.push(hi);
    g
}

fn ode_opts<T: Real>() -> OdeOptions<T> {
    let mut o = OdeOptions::with_tol(T::lit(1e-12));
    o.u_cap = T::infinity();
    o
}

impl<T: Real> GreenPair<T> {
    /// Integrates both homogeneous solutions and normalizes the wronskian.
    pub fn new(domain: Domain<T>) -> Result<Self> {
        let (a, b) = (domain.a, domain.b);
        if b - a < T::lit(1e-6) {
            return Err(Error::DegenerateInterval { a: a.as_f64(), b: b.as_f64() });
        }
        let s_min = T::lit(S_MIN);
        let zero = |_: T| T::zero();
        let opts = ode_opts::<T>();
        let xi_nodes = if a == T::zero() {
            let mut g = vec![T::zero()];
            g.extend(node_grid(s_min.min(b / T::lit(10.0)), b));
            g
        } else {
            node_grid(a, b)
        };
        let xi = integrate_with(&domain, zero, State::new(a, T::one(), T::zero()), b, &xi_nodes, &opts)?;
        let lo = if a == T::zero() { s_min.min(b / T::lit(10.0)) } else { a };
        let zeta_nodes = node_grid(lo, b);
        let zeta = integrate_with(&domain, zero, State::new(b, T::one(), T::zero()), lo, &zeta_nodes, &opts)?;
        let bw = domain.weight(b);
        let w = bw * xi.last().du * zeta.last().u;
        if !(w.abs() > T::epsilon()) || !w.is_finite() {
            return Err(Error::NormalizationFailure { w: w.as_f64() });
        }
        let zeta = Profile::new(
            zeta.grid.clone(),
            zeta.u.iter().map(|&v| v / w).collect(),
            zeta.du.iter().map(|&v| v / w).collect(),
            domain,
        )?;
        let mut pair = GreenPair { domain, xi, zeta, wronskian: w, wronskian_drift: T::zero() };
        let mut drift = T::zero();
        for i in 0..pair.zeta.len() {
            let r = pair.zeta.grid[i];
            let (x, dx) = pair.xi_eval(r);
            let wr = domain.weight(r) * (dx * pair.zeta.u[i] - x * pair.zeta.du[i]);
            drift = drift.max((wr - T::one()).abs());
        }
        pair.wronskian_drift = drift;
        if !(drift < T::lit(1e-6).max(T::epsilon().sqrt())) {
            return Err(Error::NormalizationFailure { w: w.as_f64() });
        }
        Ok(pair)
    }

    pub fn a(&self) -> T {
        self.domain.a
    }

    pub fn b(&self) -> T {
        self.domain.b
    }

    /// Smallest radius where `zeta` is available.
    pub fn zeta_start(&self) -> T {
        self.zeta.start()
    }

    fn second(&self, r: T, u: T, du: T) -> T {
        if r == T::zero() {
            u / T::from_usize(self.domain.dim).unwrap()
        } else {
            u - self.domain.nm1() * du / r
        }
    }

    fn eval5(&self, p: &Profile<T>, r: T) -> (T, T) {
        let n = p.len();
        let r = r.max(p.start()).min(p.end());
        let i = match p.grid.binary_search_by(|g| g.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let (r0, r1) = (p.grid[i], p.grid[i + 1]);
        hermite5(
            r0,
            p.u[i],
            p.du[i],
            self.second(r0, p.u[i], p.du[i]),
            r1,
            p.u[i + 1],
            p.du[i + 1],
            self.second(r1, p.u[i + 1], p.du[i + 1]),
            r,
        )
    }

    /// `(xi, xi')` at `r` (clamped to `[a, b]`).
    pub fn xi_eval(&self, r: T) -> (T, T) {
        self.eval5(&self.xi, r)
    }

    /// `(zeta, zeta')` at `r` (clamped to the resolved range).
    pub fn zeta_eval(&self, r: T) -> (T, T) {
        self.eval5(&self.zeta, r)
    }

    fn check(&self, x: T) -> Result<()> {
        let tol = (self.b() - self.a()) * T::lit(1e-12);
        if !(x >= self.a() - tol && x <= self.b() + tol) {
            return Err(Error::OutOfDomain { x: x.as_f64(), a: self.a().as_f64(), b: self.b().as_f64() });
        }
        Ok(())
    }

    /// `G(r, s) = s^(N-1) xi(min) zeta(max)`.
    pub fn eval(&self, r: T, s: T) -> Result<T> {
        self.check(r)?;
        self.check(s)?;
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        if hi < self.zeta_start() * (T::one() - T::lit(1e-12)) {
            return Err(Error::OutOfDomain { x: hi.as_f64(), a: self.zeta_start().as_f64(), b: self.b().as_f64() });
        }
        Ok(self.domain.weight(s) * self.xi_eval(lo).0 * self.zeta_eval(hi).0)
    }

    /// `d/dr G(r, s)`; at `r = s` the left derivative is returned when `left` is set.
    pub fn eval_dr(&self, r: T, s: T, left: bool) -> Result<T> {
        self.check(r)?;
        self.check(s)?;
        let ws = self.domain.weight(s);
        if r < s || (r == s && left) {
            Ok(ws * self.xi_eval(r).1 * self.zeta_eval(s).0)
        } else {
            Ok(ws * self.xi_eval(s).0 * self.zeta_eval(r).1)
        }
    }

    /// `(xi zeta)'(r)`, whose sign change is the diagonal critical point.
    pub fn diag_slope(&self, r: T) -> T {
        let (x, dx) = self.xi_eval(r);
        let (z, dz) = self.zeta_eval(r);
        dx * z + x * dz
    }

    /// The unique interior critical point of `G(r, r) / r^(N-1) = xi(r) zeta(r)`.
    pub fn diag_critical_point(&self) -> Result<T> {
        let g = &self.zeta.grid;
        let mut prev = (g[0], self.diag_slope(g[0]));
        let first = prev.1;
        for &r in &g[1..] {
            let v = self.diag_slope(r);
            if prev.1 < T::zero() && v >= T::zero() {
                let (mut lo, mut hi) = (prev.0, r);
                for _ in 0..200 {
                    let mid = (lo + hi) / T::lit(2.0);
                    if self.diag_slope(mid) < T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < T::epsilon() * T::lit(4.0) * hi {
                        break;
                    }
                }
                return Ok((lo + hi) / T::lit(2.0));
            }
            prev = (r, v);
        }
        Err(Error::NoInteriorZero { left: first.as_f64(), right: prev.1.as_f64() })
    }

    /// Amplitudes of the limit profile `sum_j A_j G(., alpha_j)` pinned to one at every `alpha_i`.
    pub fn solve_amplitudes(&self, alphas: &[T]) -> Result<LayerLimit<T>> {
        let k = alphas.len();
        if k == 0 {
            return Err(Error::InvalidParams("no layer radii".into()));
        }
        for w in alphas.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParams("layer radii must increase".into()));
            }
        }
        // a layer may sit on the inner boundary of an annulus, never at the origin
        if !(alphas[0] > self.a() || (alphas[0] == self.a() && self.a() > T::zero())) {
            return Err(Error::OutOfDomain { x: alphas[0].as_f64(), a: self.a().as_f64(), b: self.b().as_f64() });
        }
        let mut m = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                m[i * k + j] = self.eval(alphas[i], alphas[j])?;
            }
        }
        let amps = dense_solve(k, &m, &vec![T::one(); k], T::lit(1e12))?;
        let mut residual = T::zero();
        for i in 0..k {
            let s = (0..k).fold(T::zero(), |s, j| s + m[i * k + j] * amps[j]);
            residual = residual.max((s - T::one()).abs());
        }
        Ok(LayerLimit { alphas: alphas.to_vec(), amps, residual, pair: self.clone() })
    }

    /// Optimal-partition functional `omega sum_i A_i s_i^(N-1)` and its finite-difference gradient.
    pub fn phi_functional(&self, s: &[T]) -> Result<(T, Vec<T>)> {
        let value = self.phi_value(s)?;
        let h = T::lit(1e-5);
        let mut grad = Vec::with_capacity(s.len());
        for i in 0..s.len() {
            let mut p = s.to_vec();
            let mut m = s.to_vec();
            if s[i] + h > self.b() {
                m[i] = s[i] - h;
                grad.push((value - self.phi_value(&m)?) / h);
            } else if s[i] - h < self.a() {
                p[i] = s[i] + h;
                grad.push((self.phi_value(&p)? - value) / h);
            } else {
                p[i] = s[i] + h;
                m[i] = s[i] - h;
                grad.push((self.phi_value(&p)? - self.phi_value(&m)?) / (h + h));
            }
        }
        Ok((value, grad))
    }

    pub fn phi_value(&self, s: &[T]) -> Result<T> {
        let lim = self.solve_amplitudes(s)?;
        Ok(self.domain.omega() * s.iter().zip(&lim.amps).fold(T::zero(), |acc, (&si, &a)| acc + a * self.domain.weight(si)))
    }

    /// Limit profile `u_inf,+ = G(., b) / G(b, b) = xi / xi(b)` on the stored grid.
    pub fn u_inf_plus(&self) -> Profile<T> {
        let xb = self.xi.last().u;
        Profile {
            grid: self.xi.grid.clone(),
            u: self.xi.u.iter().map(|&v| v / xb).collect(),
            du: self.xi.du.iter().map(|&v| v / xb).collect(),
            domain: self.domain,
        }
    }

    /// `u_inf,+'(b) = 1 / G(b, b)`.
    pub fn u_inf_plus_slope(&self) -> T {
        let l = self.xi.last();
        l.du / l.u
    }

    /// `u_inf,+''(b)`.
    pub fn u_inf_plus_second(&self) -> T {
        let b = self.b();
        T::one() - self.domain.nm1() * self.u_inf_plus_slope() / b
    }

    /// Limit profile `u_inf,- = G(., a) / G(a, a) = zeta / zeta(a)` (annulus only).
    pub fn u_inf_minus(&self) -> Result<Profile<T>> {
        if self.a() == T::zero() {
            return Err(Error::InvalidParams("decreasing limit needs a > 0".into()));
        }
        let za = self.zeta.first().u;
        Ok(Profile {
            grid: self.zeta.grid.clone(),
            u: self.zeta.u.iter().map(|&v| v / za).collect(),
            du: self.zeta.du.iter().map(|&v| v / za).collect(),
            domain: self.domain,
        })
    }

    /// `u_inf,-'(a) = -1 / G(a, a)`.
    pub fn u_inf_minus_slope(&self) -> T {
        let f = self.zeta.first();
        f.du / f.u
    }

    /// Normalized peak profile `G(r, s) / G(s, s)` and its derivative.
    pub fn peak_profile(&self, s: T, r: T) -> (T, T) {
        if r <= s {
            let (x, dx) = self.xi_eval(r);
            let xs = self.xi_eval(s).0;
            (x / xs, dx / xs)
        } else {
            let (z, dz) = self.zeta_eval(r);
            let zs = self.zeta_eval(s).0;
            (z / zs, dz / zs)
        }
    }

    /// Limit matching function `L_inf(s) = (u_inf,+'(s; a, s)^2 - u_inf,-'(s; s, b)^2) / 2`.
    pub fn l_inf(&self, s: T) -> T {
        let (x, dx) = self.xi_eval(s);
        let (z, dz) = self.zeta_eval(s);
        let p = dx / x;
        let m = dz / z;
        (p * p - m * m) / T::lit(2.0)
    }

    /// Both integral identities for `u_inf,+`; returns `(lhs1, rhs1, lhs2, rhs2)`.
    /// For `N = 2` on a ball the integrand `u' u / r` is extended by its limit at the origin.
    pub fn integral_identities(&self) -> (T, T, T, T) {
        let d = &self.domain;
        let n = d.dim as i32;
        let nm1 = d.nm1();
        let p = self.u_inf_plus();
        let (a, b) = (self.a(), self.b());
        let mut f1 = Vec::with_capacity(p.len());
        let mut df1 = Vec::with_capacity(p.len());
        let mut f2 = Vec::with_capacity(p.len());
        let mut df2 = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let (r, u, du) = (p.grid[i], p.u[i], p.du[i]);
            let ddu = self.second(r, u, du);
            if r == T::zero() {
                if n == 2 {
                    f1.push(u * ddu);
                    df1.push(T::zero());
                } else if n == 3 {
                    f1.push(T::zero());
                    df1.push(ddu * u);
                } else {
                    f1.push(T::zero());
                    df1.push(T::zero());
                }
                f2.push(T::zero());
                df2.push(T::zero());
            } else {
                let w3 = r.powi(n - 3);
                f1.push(du * u * w3);
                df1.push((ddu * u + du * du) * w3 + T::from_i32(n - 3).unwrap() * du * u * r.powi(n - 4));
                let w1 = r.powi(n - 1);
                f2.push(u * u * w1);
                df2.push(T::lit(2.0) * u * du * w1 + nm1 * u * u * r.powi(n - 2));
            }
        }
        let lhs1 = nm1 * hermite(&p.grid, &f1, &df1);
        let lhs2 = T::lit(2.0) * hermite(&p.grid, &f2, &df2);
        let up = self.u_inf_plus_slope();
        let upp = self.u_inf_plus_second();
        let ua = p.u[0];
        let rhs1 = d.weight(b) * (upp - up * up) - d.weight(a) * ua * ua;
        let rhs2 = d.weight(b) * (up + b * upp) - b.powi(n) * up * up - a.powi(n) * ua * ua;
        (lhs1, rhs1, lhs2, rhs2)
    }

    /// Left side of the reproducing identity `int (G_r f' + G f) r^(N-1) dr` at pole `s`
    /// for a test function `f -> (f, f')`.
    pub fn reproduce(&self, s: T, f: impl Fn(T) -> (T, T)) -> Result<T> {
        self.check(s)?;
        let d = self.domain;
        let integrand = |r: T| {
            let (v, dv) = f(r);
            let g = self.eval(r, s).unwrap_or(T::zero());
            let gr = self.eval_dr(r, s, r <= s).unwrap_or(T::zero());
            (gr * dv + g * v) * d.weight(r)
        };
        let cells = |len: T| (len / T::lit(2e-3)).ceil().to_usize().unwrap_or(1).max(8);
        let left = crate::radial::gauss_legendre(self.a(), s, cells(s - self.a()), &integrand);
        let right = if s < self.b() { crate::radial::gauss_legendre(s, self.b(), cells(self.b() - s), &integrand) } else { T::zero() };
        Ok(left + right)
    }

    /// Writes `<stem>_xi.csv`, `<stem>_zeta.csv` and `<stem>.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        let xi_path = dir.join(format!("{stem}_xi.csv"));
        let zeta_path = dir.join(format!("{stem}_zeta.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.xi.save_csv(&xi_path)?;
        self.zeta.save_csv(&zeta_path)?;
        let m = PairManifest {
            n: self.domain.dim,
            a: self.a().as_f64(),
            b: self.b().as_f64(),
            wronskian: self.wronskian.as_f64(),
            xi_nodes: self.xi.len(),
            zeta_nodes: self.zeta.len(),
        };
        std::fs::write(&json_path, serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?)?;
        Ok(vec![json_path, xi_path, zeta_path])
    }
}

#[derive(Serialize)]
struct PairManifest {
    #[serde(rename = "N")]
    n: usize,
    a: f64,
    b: f64,
    wronskian: f64,
    xi_nodes: usize,
    zeta_nodes: usize,
}

/// Limit configuration of a k-layer solution.
#[derive(Debug, Clone)]
pub struct LayerLimit<T> {
    pub alphas: Vec<T>,
    pub amps: Vec<T>,
    /// `max_i |sum_j A_j G(alpha_i, alpha_j) - 1|`.
    pub residual: T,
    pub pair: GreenPair<T>,
}

impl<T: Real> LayerLimit<T> {
    /// `sum_j A_j G(r, alpha_j)`.
    pub fn profile_at(&self, r: T) -> Result<T> {
        self.alphas.iter().zip(&self.amps).try_fold(T::zero(), |s, (&al, &am)| Ok(s + am * self.pair.eval(r, al)?))
    }

    pub fn all_positive(&self) -> bool {
        self.amps.iter().all(|&a| a > T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ball(n: usize) -> GreenPair<f64> {
        GreenPair::new(Domain::new(n, 0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn wronskian_is_constant() {
        for &(n, a) in &[(2, 0.0), (3, 0.0), (3, 0.3), (4, 0.2)] {
            let p = GreenPair::new(Domain::new(n, a, 1.0).unwrap()).unwrap();
            assert!(p.wronskian_drift < 1e-9, "{n} {a}: {}", p.wronskian_drift);
        }
    }

    #[test]
    fn monotone_and_positive() {
        let p = ball(3);
        assert!(p.xi.du.iter().all(|&d| d >= 0.0));
        assert!(p.zeta.du.iter().all(|&d| d <= 1e-15));
        assert!(p.zeta.u.iter().all(|&z| z > 0.0));
        let mut last = 0.0;
        for i in 0..=100 {
            let r = i as f64 / 100.0;
            let g = p.eval(r, 1.0).unwrap();
            assert!(g > 0.0 && g >= last);
            last = g;
        }
    }

    #[test]
    fn symmetry_of_weighted_kernel() {
        let p = ball(3);
        let lhs = 0.3f64.powi(2) * p.eval(0.3, 0.7).unwrap();
        let rhs = 0.7f64.powi(2) * p.eval(0.7, 0.3).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn out_of_domain() {
        let p = ball(3);
        assert!(p.eval(1.2, 0.5).is_err());
        assert!(p.eval(0.0, 1e-5).is_err());
        assert!(GreenPair::new(Domain::new(3, 0.5, 0.5 + 1e-7).unwrap()).is_err());
    }

    #[test]
    fn single_amplitude() {
        let p = ball(3);
        let lim = p.solve_amplitudes(&[1.0]).unwrap();
        assert_relative_eq!(lim.amps[0], 1.0 / p.eval(1.0, 1.0).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(lim.amps[0], p.u_inf_plus_slope(), max_relative = 1e-9);
    }

    #[test]
    fn critical_point_scaling_invariant() {
        let p = ball(3);
        let s = p.diag_critical_point().unwrap();
        let mut q = p.clone();
        q.xi.u.iter_mut().for_each(|v| *v *= 3.0);
        q.xi.du.iter_mut().for_each(|v| *v *= 3.0);
        q.zeta.u.iter_mut().for_each(|v| *v /= 3.0);
        q.zeta.du.iter_mut().for_each(|v| *v /= 3.0);
        assert_relative_eq!(q.diag_critical_point().unwrap(), s, epsilon = 1e-12);
        assert!(p.diag_slope(s).abs() < 1e-10);
        assert!(s > 1e-6 && s < 1.0 - 1e-6);
    }

    #[test]
    fn l_inf_vanishes_at_critical_point() {
        let p = ball(3);
        let s = p.diag_critical_point().unwrap();
        assert!(p.l_inf(s).abs() < 1e-9);
        assert!(p.l_inf(0.3) < 0.0 && p.l_inf(0.95) > 0.0);
    }

    #[test]
    fn f32_pair_builds() {
        let p = GreenPair::<f32>::new(Domain::new(3, 0.0, 1.0).unwrap()).unwrap();
        assert!((p.xi.last().u - 1f32.sinh()).abs() < 1e-4);
    }
}
