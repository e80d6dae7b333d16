//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// `I_0` and its derivative by power series.
pub fn i0_series(r: f64) -> (f64, f64) {
    let (mut t, mut s, mut ds) = (1.0, 1.0, 0.0);
    for k in 1..30 {
        t *= (r / 2.0).powi(2) / (k * k) as f64;
        s += t;
        ds += 2.0 * k as f64 * t / r.max(1e-300);
    }
    (s, ds)
}

/// First positive zero of J_1 by bisection on its power series.
pub fn j11() -> f64 {
    let j1 = |x: f64| {
        let mut t = x / 2.0;
        let mut s = t;
        for k in 1..60 {
            t *= -(x / 2.0).powi(2) / (k as f64 * (k + 1) as f64);
            s += t;
        }
        s
    };
    let (mut lo, mut hi) = (3.0, 4.5);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if j1(lo).signum() == j1(m).signum() {
            lo = m
        } else {
            hi = m
        }
    }
    0.5 * (lo + hi)
}

/// First positive root of tan k = k.
pub fn tan_root() -> f64 {
    let f = |k: f64| k.sin() - k * k.cos();
    let (mut lo, mut hi) = (4.0, 4.7);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if f(lo).signum() == f(m).signum() {
            lo = m
        } else {
            hi = m
        }
    }
    0.5 * (lo + hi)
}


/// Minimizes omega * int (u'^2 + u^2) r^(N-1) over piecewise-linear u with u = 1 at the pins.
pub fn fem_phi(n: usize, nodes: usize, pins: &[f64]) -> f64 {
    let h = 1.0 / (nodes - 1) as f64;
    let x: Vec<f64> = (0..nodes).map(|i| i as f64 * h).collect();
    let mut diag = vec![0.0; nodes];
    let mut off = vec![0.0; nodes - 1];
    let gauss3 = [(0.112_701_665_379_258_3, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.887_298_334_620_741_7, 5.0 / 18.0)];
    for e in 0..nodes - 1 {
        let (mut kk, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
        for &(t, w) in &gauss3 {
            let r: f64 = x[e] + t * h;
            let wr = r.powi(n as i32 - 1) * w * h;
            kk += wr / (h * h);
            m00 += wr * (1.0 - t) * (1.0 - t);
            m01 += wr * (1.0 - t) * t;
            m11 += wr * t * t;
        }
        diag[e] += kk + m00;
        diag[e + 1] += kk + m11;
        off[e] += -kk + m01;
    }
    let pinned: Vec<usize> = pins.iter().map(|&s| (s / h).round() as usize).collect();
    let mut u = vec![0.0; nodes];
    for &p in &pinned {
        u[p] = 1.0;
    }
    // eliminate pinned nodes and solve the remaining tridiagonal system
    let free: Vec<bool> = (0..nodes).map(|i| !pinned.contains(&i)).collect();
    let mut a = vec![0.0; nodes];
    let mut b = vec![0.0; nodes];
    let mut c = vec![0.0; nodes];
    let mut d = vec![0.0; nodes];
    for i in 0..nodes {
        if !free[i] {
            b[i] = 1.0;
            d[i] = 1.0;
            continue;
        }
        b[i] = diag[i];
        if i > 0 {
            if free[i - 1] {
                a[i] = off[i - 1];
            } else {
                d[i] -= off[i - 1];
            }
        }
        if i + 1 < nodes {
            if free[i + 1] {
                c[i] = off[i];
            } else {
                d[i] -= off[i];
            }
        }
    }
    for i in 1..nodes {
        let m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    u[nodes - 1] = d[nodes - 1] / b[nodes - 1];
    for i in (0..nodes - 1).rev() {
        u[i] = (d[i] - c[i] * u[i + 1]) / b[i];
    }
    let mut e = 0.0;
    for i in 0..nodes {
        e += diag[i] * u[i] * u[i];
        if i + 1 < nodes {
            e += 2.0 * off[i] * u[i] * u[i + 1];
        }
    }
    kellerpath::params::omega::<f64>(n) * e
}

