use crate::radial::profile::Profile;
use crate::scalar::Real;

/// Corrected trapezoid rule using endpoint derivatives (fourth order on any grid).
pub fn hermite<T: Real>(grid: &[T], f: &[T], df: &[T]) -> T {
    let twelve = T::lit(12.0);
    let two = T::lit(2.0);
    let mut s = T::zero();
    for i in 0..grid.len().saturating_sub(1) {
        let h = grid[i + 1] - grid[i];
        s = s + h / two * (f[i] + f[i + 1]) + h * h / twelve * (df[i] - df[i + 1]);
    }
    s
}

/// Composite Simpson rule on a nonuniform grid (pairs of cells; a trailing cell uses
/// the three-point formula on the last three nodes).
pub fn simpson<T: Real>(grid: &[T], f: &[T]) -> T {
    let n = grid.len();
    if n < 2 {
        return T::zero();
    }
    if n == 2 {
        return (grid[1] - grid[0]) * (f[0] + f[1]) / T::lit(2.0);
    }
    let six = T::lit(6.0);
    let mut s = T::zero();
    let mut i = 0;
    while i + 2 < n {
        s = s + simpson_pair(grid[i], grid[i + 1], grid[i + 2], f[i], f[i + 1], f[i + 2], six);
        i += 2;
    }
    if i + 1 < n {
        // last single cell: integrate the parabola through the final three nodes over it
        let (x0, x1, x2) = (grid[n - 3], grid[n - 2], grid[n - 1]);
        let (f0, f1, f2) = (f[n - 3], f[n - 2], f[n - 1]);
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let w2 = h2 * (two * h2 + three * h1) / (six * (h1 + h2));
        let w1 = h2 * (h2 + three * h1) / (six * h1);
        let w0 = -(h2 * h2 * h2) / (six * h1 * (h1 + h2));
        s = s + w0 * f0 + w1 * f1 + w2 * f2;
    }
    s
}

fn simpson_pair<T: Real>(x0: T, x1: T, x2: T, f0: T, f1: T, f2: T, six: T) -> T {
    let h0 = x1 - x0;
    let h1 = x2 - x1;
    let hs = h0 + h1;
    let two = T::lit(2.0);
    hs / six * ((two - h1 / h0) * f0 + hs * hs / (h0 * h1) * f1 + (two - h0 / h1) * f2)
}

/// `int u(r) r^m dr` over the profile's grid.
pub fn quadrature<T: Real>(p: &Profile<T>, m: u32) -> T {
    let mt = T::from_u32(m).unwrap();
    let f: Vec<T> = p.grid.iter().zip(&p.u).map(|(&r, &u)| u * r.powi(m as i32)).collect();
    let df: Vec<T> = p
        .grid
        .iter()
        .zip(p.u.iter().zip(&p.du))
        .map(|(&r, (&u, &d))| {
            let dw = if m == 0 { T::zero() } else { mt * r.powi(m as i32 - 1) };
            d * r.powi(m as i32) + u * dw
        })
        .collect();
    hermite(&p.grid, &f, &df)
}

/// `omega int f(r) r^(N-1) dr` with `f` known only by values (Simpson).
pub fn weighted_simpson<T: Real>(p_grid: &[T], dim: usize, f: &[T]) -> T {
    let w: Vec<T> = p_grid.iter().zip(f).map(|(&r, &v)| v * r.powi(dim as i32 - 1)).collect();
    crate::params::omega::<T>(dim) * simpson(p_grid, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Domain;
    use crate::radial::profile::uniform_grid;
    use approx::assert_relative_eq;

    #[test]
    fn constants_and_powers() {
        let d = Domain::new(3, 0.0, 1.0).unwrap();
        let one = Profile::from_fn(uniform_grid(0.0, 1.0, 11), d, |_| (1.0, 0.0)).unwrap();
        assert_relative_eq!(quadrature(&one, 2), 1.0 / 3.0, epsilon = 1e-14);
        let lin = Profile::from_fn(uniform_grid(0.0, 1.0, 11), d, |r| (r, 1.0)).unwrap();
        assert_relative_eq!(quadrature(&lin, 1), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn fourth_order() {
        let d = Domain::new(2, 0.0, 1.0).unwrap();
        let err = |n| {
            let p = Profile::from_fn(uniform_grid(0.0, 1.0, n), d, |r: f64| (r.exp(), r.exp())).unwrap();
            (quadrature(&p, 1) - 1.0).abs()
        };
        let ratio = err(11) / err(21);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn simpson_nonuniform() {
        let g = vec![0.0, 0.1, 0.15, 0.4, 0.7, 0.75, 1.0];
        let f: Vec<f64> = g.iter().map(|x| x * x).collect();
        assert_relative_eq!(simpson(&g, &f), 1.0 / 3.0, epsilon = 1e-14);
        let g2 = vec![0.0, 0.3, 0.5, 1.0];
        let f2: Vec<f64> = g2.iter().map(|x| 3.0 * x * x + 1.0).collect();
        assert_relative_eq!(simpson(&g2, &f2), 2.0, epsilon = 1e-13);
    }
}

/// Composite 5-point Gauss-Legendre rule on `cells` equal cells of `[a, b]`.
pub fn gauss_legendre<T: Real>(a: T, b: T, cells: usize, f: impl Fn(T) -> T) -> T {
    const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / T::from_usize(cells).unwrap();
    let half = h / T::lit(2.0);
    let mut s = T::zero();
    for c in 0..cells {
        let mid = a + h * (T::from_usize(c).unwrap() + T::lit(0.5));
        for k in 0..5 {
            s = s + T::lit(W[k]) * f(mid + half * T::lit(X[k]));
        }
    }
    s * half
}

#[cfg(test)]
mod gl_tests {
    use super::gauss_legendre;

    #[test]
    fn gauss_legendre_is_exact_for_degree_nine() {
        let v = gauss_legendre(0.0f64, 2.0, 1, |x| x.powi(9));
        assert!((v - 102.4).abs() < 1e-12);
        let e = gauss_legendre(0.0f64, 1.0, 20, f64::exp);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
