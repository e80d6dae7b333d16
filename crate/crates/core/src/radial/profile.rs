use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::Domain;
use crate::scalar::Real;

/// Point of a radial trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State<T> {
    pub r: T,
    pub u: T,
    pub du: T,
}

impl<T: Real> State<T> {
    pub fn new(r: T, u: T, du: T) -> Self {
        State { r, u, du }
    }
}

/// Radial function sampled on a strictly increasing grid, with first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<T> {
    pub grid: Vec<T>,
    pub u: Vec<T>,
    pub du: Vec<T>,
    pub domain: Domain<T>,
}

impl<T: Real> Profile<T> {
    pub fn new(grid: Vec<T>, u: Vec<T>, du: Vec<T>, domain: Domain<T>) -> Result<Self> {
        if grid.len() < 2 || u.len() != grid.len() || du.len() != grid.len() {
            return Err(Error::MalformedProfile(format!(
                "lengths grid={}, u={}, du={}",
                grid.len(),
                u.len(),
                du.len()
            )));
        }
        if let Some(i) = (1..grid.len()).find(|&i| !(grid[i] > grid[i - 1])) {
            return Err(Error::MalformedProfile(format!("grid not increasing at index {i}")));
        }
        if grid[0] < T::zero() {
            return Err(Error::MalformedProfile("negative radius".into()));
        }
        Ok(Profile { grid, u, du, domain })
    }

    /// Samples `f(r) -> (u, du)` on `grid`.
    pub fn from_fn(grid: Vec<T>, domain: Domain<T>, f: impl Fn(T) -> (T, T)) -> Result<Self> {
        let (u, du) = grid.iter().map(|&r| f(r)).unzip();
        Self::new(grid, u, du, domain)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn start(&self) -> T {
        self.grid[0]
    }

    pub fn end(&self) -> T {
        self.grid[self.grid.len() - 1]
    }

    pub fn first(&self) -> State<T> {
        State::new(self.grid[0], self.u[0], self.du[0])
    }

    pub fn last(&self) -> State<T> {
        let n = self.len() - 1;
        State::new(self.grid[n], self.u[n], self.du[n])
    }

    pub fn state(&self, i: usize) -> State<T> {
        State::new(self.grid[i], self.u[i], self.du[i])
    }

    /// Index `i` with `grid[i] <= r <= grid[i + 1]`.
    fn cell(&self, r: T) -> usize {
        let n = self.grid.len();
        match self.grid.binary_search_by(|g| g.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation of `(u, du)` at `r`.
    pub fn eval(&self, r: T) -> Result<(T, T)> {
        let slack = (self.end() - self.start()) * T::lit(1e-12);
        if !(r >= self.start() - slack && r <= self.end() + slack) {
            return Err(Error::OutOfDomain { x: r.as_f64(), a: self.start().as_f64(), b: self.end().as_f64() });
        }
        let i = self.cell(r);
        Ok(hermite3(
            self.grid[i],
            self.u[i],
            self.du[i],
            self.grid[i + 1],
            self.u[i + 1],
            self.du[i + 1],
            r,
        ))
    }

    /// Value only, clamped to the stored range.
    pub fn value(&self, r: T) -> T {
        let r = r.max(self.start()).min(self.end());
        self.eval(r).map(|v| v.0).unwrap_or_else(|_| T::nan())
    }

    /// Resamples onto `n >= 2` uniform nodes over the stored range.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams("resample needs at least 2 nodes".into()));
        }
        let (a, b) = (self.start(), self.end());
        let h = (b - a) / T::from_usize(n - 1).unwrap();
        let grid: Vec<T> = (0..n)
            .map(|i| if i == n - 1 { b } else { a + h * T::from_usize(i).unwrap() })
            .collect();
        let mut u = Vec::with_capacity(n);
        let mut du = Vec::with_capacity(n);
        for &r in &grid {
            let (v, d) = self.eval(r)?;
            u.push(v);
            du.push(d);
        }
        Self::new(grid, u, du, self.domain)
    }

    /// Restriction to the nodes inside `[lo, hi]`, with interpolated endpoints added.
    pub fn restrict(&self, lo: T, hi: T) -> Result<Self> {
        let (lo, hi) = (lo.max(self.start()), hi.min(self.end()));
        let mut grid = vec![lo];
        let mut u = Vec::new();
        let mut du = Vec::new();
        let (v, d) = self.eval(lo)?;
        u.push(v);
        du.push(d);
        let tol = (hi - lo) * T::lit(1e-12);
        for i in 0..self.len() {
            let r = self.grid[i];
            if r > lo + tol && r < hi - tol {
                grid.push(r);
                u.push(self.u[i]);
                du.push(self.du[i]);
            }
        }
        let (v, d) = self.eval(hi)?;
        grid.push(hi);
        u.push(v);
        du.push(d);
        Self::new(grid, u, du, self.domain)
    }

    /// Converts the scalar type.
    pub fn cast<S: Real>(&self) -> Profile<S> {
        let c = |v: &Vec<T>| v.iter().map(|x| S::lit(x.as_f64())).collect::<Vec<S>>();
        Profile {
            grid: c(&self.grid),
            u: c(&self.u),
            du: c(&self.du),
            domain: Domain { dim: self.domain.dim, a: S::lit(self.domain.a.as_f64()), b: S::lit(self.domain.b.as_f64()) },
        }
    }

    pub fn sup_norm(&self) -> T {
        self.u.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,u,du")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                self.grid[i].as_f64(),
                self.u[i].as_f64(),
                self.du[i].as_f64()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses `r,u,du` CSV. The domain is supplied by the caller.
    pub fn read_csv<R: BufRead>(r: R, domain: Domain<T>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::MalformedProfile("empty file".into()))??;
        if header.trim() != "r,u,du" {
            return Err(Error::MalformedProfile(format!("unexpected header {header:?}")));
        }
        let (mut grid, mut u, mut du) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedProfile(format!("line {}: {e}", n + 2)))?;
            if vals.len() != 3 {
                return Err(Error::MalformedProfile(format!("line {}: expected 3 fields", n + 2)));
            }
            grid.push(T::lit(vals[0]));
            u.push(T::lit(vals[1]));
            du.push(T::lit(vals[2]));
        }
        Self::new(grid, u, du, domain)
    }

    pub fn load_csv(path: impl AsRef<Path>, domain: Domain<T>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), domain)
    }
}

/// Cubic Hermite interpolant on `[r0, r1]`; returns value and derivative at `r`.
pub fn hermite3<T: Real>(r0: T, u0: T, d0: T, r1: T, u1: T, d1: T, r: T) -> (T, T) {
    let h = r1 - r0;
    let t = (r - r0) / h;
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let six = T::lit(6.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    let v = h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1;
    let dh00 = six * t2 - six * t;
    let dh10 = three * t2 - T::lit(4.0) * t + one;
    let dh01 = -dh00;
    let dh11 = three * t2 - two * t;
    let dv = (dh00 * u0 + dh01 * u1) / h + dh10 * d0 + dh11 * d1;
    (v, dv)
}

/// Quintic Hermite interpolant using values, first and second derivatives.
#[allow(clippy::too_many_arguments)]
pub fn hermite5<T: Real>(r0: T, u0: T, d0: T, s0: T, r1: T, u1: T, d1: T, s1: T, r: T) -> (T, T) {
    let h = r1 - r0;
    let t = (r - r0) / h;
    let l = |x: f64| T::lit(x);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = l(1.0) - l(10.0) * t3 + l(15.0) * t4 - l(6.0) * t5;
    let h1 = t - l(6.0) * t3 + l(8.0) * t4 - l(3.0) * t5;
    let h2 = (t2 - l(3.0) * t3 + l(3.0) * t4 - t5) / l(2.0);
    let h5 = l(10.0) * t3 - l(15.0) * t4 + l(6.0) * t5;
    let h4 = -l(4.0) * t3 + l(7.0) * t4 - l(3.0) * t5;
    let h3 = (t3 - l(2.0) * t4 + t5) / l(2.0);
    let v = h0 * u0 + h1 * h * d0 + h2 * h * h * s0 + h5 * u1 + h4 * h * d1 + h3 * h * h * s1;
    let dh0 = -l(30.0) * t2 + l(60.0) * t3 - l(30.0) * t4;
    let dh1 = l(1.0) - l(18.0) * t2 + l(32.0) * t3 - l(15.0) * t4;
    let dh2 = (l(2.0) * t - l(9.0) * t2 + l(12.0) * t3 - l(5.0) * t4) / l(2.0);
    let dh5 = -dh0;
    let dh4 = -l(12.0) * t2 + l(28.0) * t3 - l(15.0) * t4;
    let dh3 = (l(3.0) * t2 - l(8.0) * t3 + l(5.0) * t4) / l(2.0);
    let dv = (dh0 * u0 + dh5 * u1) / h + dh1 * d0 + dh4 * d1 + (dh2 * s0 + dh3 * s1) * h;
    (v, dv)
}

/// `n` uniform nodes on `[a, b]` with exact endpoints.
pub fn uniform_grid<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    let h = (b - a) / T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + h * T::from_usize(i).unwrap() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dom() -> Domain<f64> {
        Domain::new(3, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_malformed() {
        assert!(Profile::new(vec![0.0], vec![1.0], vec![0.0], dom()).is_err());
        assert!(Profile::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0], dom()).is_err());
        assert!(Profile::new(vec![0.0, 1.0], vec![1.0], vec![0.0, 0.0], dom()).is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |r: f64| (r * r * r - 2.0 * r + 1.0, 3.0 * r * r - 2.0);
        let p = Profile::from_fn(vec![0.0, 0.4, 1.0], dom(), f).unwrap();
        for &r in &[0.1, 0.33, 0.7, 0.99] {
            let (v, d) = p.eval(r).unwrap();
            assert_relative_eq!(v, f(r).0, epsilon = 1e-13);
            assert_relative_eq!(d, f(r).1, epsilon = 1e-12);
        }
        assert!(p.eval(1.5).is_err());
    }

    #[test]
    fn quintic_reproduces_quintics() {
        let f = |r: f64| r.powi(5) - r.powi(3);
        let df = |r: f64| 5.0 * r.powi(4) - 3.0 * r * r;
        let d2 = |r: f64| 20.0 * r.powi(3) - 6.0 * r;
        let (v, d) = hermite5(0.2, f(0.2), df(0.2), d2(0.2), 0.9, f(0.9), df(0.9), d2(0.9), 0.55);
        assert_relative_eq!(v, f(0.55), epsilon = 1e-13);
        assert_relative_eq!(d, df(0.55), epsilon = 1e-12);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let p = Profile::from_fn(uniform_grid(0.0, 1.0, 7), dom(), |r: f64| (r.exp() / 3.0, r.sin())).unwrap();
        let s = p.to_csv_string();
        assert!(s.starts_with("r,u,du\n"));
        let q = Profile::read_csv(s.as_bytes(), dom()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(Profile::<f64>::read_csv("x,y\n1,2\n".as_bytes(), dom()).is_err());
        assert!(Profile::<f64>::read_csv("r,u,du\n1,2\n".as_bytes(), dom()).is_err());
    }

    #[test]
    fn resample_keeps_endpoints() {
        let p = Profile::from_fn(vec![0.0, 0.1, 0.5, 1.0], dom(), |r: f64| (r * r, 2.0 * r)).unwrap();
        let q = p.resample(11).unwrap();
        assert_eq!(q.len(), 11);
        assert_eq!(q.start(), 0.0);
        assert_eq!(q.end(), 1.0);
        assert_relative_eq!(q.u[5], 0.25, epsilon = 1e-14);
    }
}
