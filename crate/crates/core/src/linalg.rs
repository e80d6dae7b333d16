//! Small dense, banded and tridiagonal solvers.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square band matrix with `kl` sub- and `ku` super-diagonals, room reserved for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct Banded<T> {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Real> Banded<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Banded { n, kl, ku, w, data: vec![T::zero(); n * w] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i},{j}) outside band");
        i * self.w + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.ku + self.kl {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + 1).min(self.n);
                (lo..hi).fold(T::zero(), |s, j| s + self.get(i, j) * x[j])
            })
            .collect()
    }

    /// LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu<T>> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::lit(1e-3);
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularSystem { cond: f64::INFINITY });
            }
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let m = self.data[ik] / d;
                self.data[ik] = m;
                if m != T::zero() {
                    for j in k + 1..=jmax {
                        let ij = self.idx(i, j);
                        let kj = self.idx(k, j);
                        self.data[ij] = self.data[ij] - m * self.data[kj];
                    }
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    m: Banded<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    pub fn solve(&self, b: &mut [T]) {
        let a = &self.m;
        let n = a.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + a.kl).min(n - 1) {
                b[i] = b[i] - a.data[a.idx(i, k)] * bk;
            }
        }
        let reach = a.kl + a.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s = s - a.data[a.idx(i, j)] * b[j];
            }
            b[i] = s / a.data[a.idx(i, i)];
        }
    }

    /// Sign and log-magnitude of the determinant.
    pub fn log_det(&self) -> (T, T) {
        let mut sign = T::one();
        let mut log = T::zero();
        for k in 0..self.m.n {
            if self.piv[k] != k {
                sign = -sign;
            }
            let d = self.m.data[self.m.idx(k, k)];
            if d < T::zero() {
                sign = -sign;
            }
            log = log + d.abs().ln();
        }
        (sign, log)
    }

    /// Ratio of largest to smallest pivot magnitude (cheap conditioning indicator).
    pub fn pivot_ratio(&self) -> T {
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for k in 0..self.m.n {
            let d = self.m.data[self.m.idx(k, k)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi / lo
    }
}

/// Dense LU with partial pivoting, row-major.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
    norm1: T,
}

impl<T: Real> DenseLu<T> {
    /// Factors the `n x n` row-major matrix `a`.
    pub fn new(n: usize, a: &[T]) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let norm1 = (0..n).map(|j| (0..n).fold(T::zero(), |s, i| s + a[i * n + j].abs())).fold(T::zero(), T::max);
        let mut lu = a.to_vec();
        let mut piv = vec![0; n];
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| lu[x * n + k].abs().partial_cmp(&lu[y * n + k].abs()).unwrap()).unwrap();
            if lu[p * n + k] == T::zero() {
                return Err(Error::SingularSystem { cond: f64::INFINITY });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            for i in k + 1..n {
                let m = lu[i * n + k] / lu[k * n + k];
                lu[i * n + k] = m;
                for j in k + 1..n {
                    lu[i * n + j] = lu[i * n + j] - m * lu[k * n + j];
                }
            }
        }
        Ok(DenseLu { n, lu, piv, norm1 })
    }

    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            for j in 0..i {
                b[i] = b[i] - self.lu[i * n + j] * b[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                b[i] = b[i] - self.lu[i * n + j] * b[j];
            }
            b[i] = b[i] / self.lu[i * n + i];
        }
    }

    /// 1-norm condition number from the explicit inverse (fine for the small systems used here).
    pub fn cond1(&self) -> T {
        let n = self.n;
        let mut inv_norm = T::zero();
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            self.solve(&mut e);
            inv_norm = inv_norm.max(e.iter().fold(T::zero(), |s, v| s + v.abs()));
        }
        self.norm1 * inv_norm
    }

    pub fn det(&self) -> T {
        let n = self.n;
        let mut d = T::one();
        for k in 0..n {
            if self.piv[k] != k {
                d = -d;
            }
            d = d * self.lu[k * n + k];
        }
        d
    }
}

/// Solves the dense system, failing when the condition number exceeds `max_cond`.
pub fn dense_solve<T: Real>(n: usize, a: &[T], b: &[T], max_cond: T) -> Result<Vec<T>> {
    let lu = DenseLu::new(n, a)?;
    let cond = lu.cond1();
    if !(cond <= max_cond) {
        return Err(Error::SingularSystem { cond: cond.as_f64() });
    }
    let mut x = b.to_vec();
    lu.solve(&mut x);
    Ok(x)
}

/// Number of negative pivots in the LDL^T factorization of the symmetric tridiagonal
/// matrix (`diag`, `off`), i.e. its count of negative eigenvalues.
pub fn tridiag_negative_count<T: Real>(diag: &[T], off: &[T]) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut d = diag[0];
    for i in 0..diag.len() {
        if i > 0 {
            d = diag[i] - off[i - 1] * off[i - 1] / d;
        }
        if d == T::zero() {
            d = -tiny;
        }
        if d < T::zero() {
            count += 1;
        }
    }
    count
}

/// Symmetric tridiagonal pencil `K - sigma M` with `K`, `M` given by diagonals and off-diagonals.
#[derive(Debug, Clone)]
pub struct TridiagPencil<T> {
    pub k_diag: Vec<T>,
    pub k_off: Vec<T>,
    pub m_diag: Vec<T>,
    pub m_off: Vec<T>,
}

impl<T: Real> TridiagPencil<T> {
    pub fn len(&self) -> usize {
        self.k_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_diag.is_empty()
    }

    /// Number of generalized eigenvalues below `sigma` (M positive definite).
    pub fn count_below(&self, sigma: T) -> usize {
        let d: Vec<T> = self.k_diag.iter().zip(&self.m_diag).map(|(&k, &m)| k - sigma * m).collect();
        let o: Vec<T> = self.k_off.iter().zip(&self.m_off).map(|(&k, &m)| k - sigma * m).collect();
        tridiag_negative_count(&d, &o)
    }

    /// `j`-th smallest eigenvalue (0-based) by Sturm bisection inside `[lo, hi]`.
    pub fn eigenvalue(&self, j: usize, mut lo: T, mut hi: T, rtol: T) -> T {
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= rtol * lo.abs().max(hi.abs()).max(T::epsilon()) {
                break;
            }
        }
        (lo + hi) / T::lit(2.0)
    }

    /// Gershgorin-style bound on the spectrum magnitude.
    pub fn spectral_bound(&self) -> T {
        let n = self.len();
        let mut kmax = T::zero();
        let mut mmin = T::infinity();
        for i in 0..n {
            let ko = if i > 0 { self.k_off[i - 1].abs() } else { T::zero() } + if i + 1 < n { self.k_off[i].abs() } else { T::zero() };
            let mo = if i > 0 { self.m_off[i - 1].abs() } else { T::zero() } + if i + 1 < n { self.m_off[i].abs() } else { T::zero() };
            kmax = kmax.max(self.k_diag[i].abs() + ko);
            mmin = mmin.min(self.m_diag[i] - mo);
        }
        kmax / mmin.max(T::min_positive_value()) * T::lit(1.01) + T::one()
    }

    fn apply_m(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.m_diag[i] * x[i];
                if i > 0 {
                    s = s + self.m_off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s = s + self.m_off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    fn apply_k(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.k_diag[i] * x[i];
                if i > 0 {
                    s = s + self.k_off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s = s + self.k_off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Inverse iteration with shift `sigma`; returns the Rayleigh quotient and the M-normalized vector.
    pub fn inverse_iteration(&self, sigma: T, iters: usize) -> Result<(T, Vec<T>)> {
        let n = self.len();
        let mut a = Banded::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, self.k_diag[i] - sigma * self.m_diag[i]);
            if i + 1 < n {
                let o = self.k_off[i] - sigma * self.m_off[i];
                a.set(i, i + 1, o);
                a.set(i + 1, i, o);
            }
        }
        let lu = match a.factor() {
            Ok(lu) => lu,
            // shift sits on an eigenvalue to machine precision
            Err(_) => return self.inverse_iteration(sigma + sigma.abs().max(T::one()) * T::lit(1e-12), iters),
        };
        let mut x: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.01) * T::from_usize(i % 7).unwrap()).collect();
        let mut rq = sigma;
        for _ in 0..iters {
            let mut y = self.apply_m(&x);
            lu.solve(&mut y);
            let my = self.apply_m(&y);
            let nrm = y.iter().zip(&my).fold(T::zero(), |s, (a, b)| s + *a * *b).sqrt();
            if !(nrm > T::zero()) || !nrm.is_finite() {
                return Err(Error::EigSolverFailure("inverse iteration lost the vector".into()));
            }
            x = y.iter().map(|v| *v / nrm).collect();
            let kx = self.apply_k(&x);
            let new_rq = x.iter().zip(&kx).fold(T::zero(), |s, (a, b)| s + *a * *b);
            let done = (new_rq - rq).abs() <= T::epsilon() * T::lit(100.0) * new_rq.abs().max(T::one());
            rq = new_rq;
            if done {
                break;
            }
        }
        Ok((rq, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let mut b = Banded::<f64>::zeros(n, 2, 2);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                // weak diagonal forces pivoting
                let v = if i == j { 0.01 * (i as f64 + 1.0) } else { ((i * 7 + j * 3) % 5) as f64 - 2.0 };
                b.set(i, j, v);
                dense[i * n + j] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x1 = dense_solve(n, &dense, &rhs, 1e14).unwrap();
        let lu = b.clone().factor().unwrap();
        let mut x2 = rhs.clone();
        lu.solve(&mut x2);
        for i in 0..n {
            assert_relative_eq!(x1[i], x2[i], epsilon = 1e-10);
        }
        let d = DenseLu::new(n, &dense).unwrap().det();
        let (s, l) = lu.log_det();
        assert_relative_eq!(s * l.exp(), d, max_relative = 1e-10);
    }

    #[test]
    fn singular_detected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(dense_solve(2, &a, &[1.0, 1.0], 1e12).is_err());
        let mut b = Banded::<f64>::zeros(2, 1, 1);
        b.set(0, 0, 1.0);
        b.set(0, 1, 2.0);
        b.set(1, 0, 2.0);
        b.set(1, 1, 4.0);
        assert!(b.factor().is_err());
    }

    #[test]
    fn sturm_count_and_bisection() {
        // 1-D Dirichlet Laplacian, eigenvalues 2 - 2 cos(k pi / (n + 1))
        let n = 20;
        let p = TridiagPencil {
            k_diag: vec![2.0; n],
            k_off: vec![-1.0; n - 1],
            m_diag: vec![1.0; n],
            m_off: vec![0.0; n - 1],
        };
        let exact = |k: usize| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert_eq!(p.count_below(exact(3) + 1e-9), 3);
        let l2 = p.eigenvalue(1, 0.0, 4.0, 1e-14);
        assert_relative_eq!(l2, exact(2), epsilon = 1e-12);
        let (rq, _) = p.inverse_iteration(exact(2) + 1e-3, 50).unwrap();
        assert_relative_eq!(rq, exact(2), epsilon = 1e-12);
    }
}
