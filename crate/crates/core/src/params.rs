use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Radial domain: the ball (`a = 0`) or the annulus `a < r < b` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    pub dim: usize,
    pub a: T,
    pub b: T,
}

impl<T: Real> Domain<T> {
    pub fn new(dim: usize, a: T, b: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParams(format!("dimension {dim} < 2")));
        }
        if !(a >= T::zero()) || !(b > a) || !b.is_finite() {
            return Err(Error::InvalidParams(format!("need 0 <= a < b, got a={a}, b={b}")));
        }
        Ok(Domain { dim, a, b })
    }

    pub fn ball(dim: usize) -> Result<Self> {
        Self::new(dim, T::zero(), T::one())
    }

    pub fn is_ball(&self) -> bool {
        self.a == T::zero()
    }

    /// Same dimension, new interval.
    pub fn with_interval(&self, a: T, b: T) -> Result<Self> {
        Self::new(self.dim, a, b)
    }

    /// Surface measure of the unit sphere in R^N.
    pub fn omega(&self) -> T {
        omega(self.dim)
    }

    /// `N - 1` as a scalar.
    pub fn nm1(&self) -> T {
        T::from_usize(self.dim - 1).unwrap()
    }

    /// Radial weight `r^(N-1)`.
    pub fn weight(&self, r: T) -> T {
        r.powi(self.dim as i32 - 1)
    }

    /// Volume `omega (b^N - a^N) / N`.
    pub fn volume(&self) -> T {
        let n = self.dim as i32;
        self.omega() * (self.b.powi(n) - self.a.powi(n)) / T::from_usize(self.dim).unwrap()
    }
}

/// `2 pi^(N/2) / Gamma(N/2)`.
pub fn omega<T: Real>(dim: usize) -> T {
    // Gamma(N/2) by the half-integer recurrence
    let mut gamma = if dim % 2 == 0 { T::one() } else { T::PI().sqrt() };
    let mut x = if dim % 2 == 0 { T::one() } else { T::lit(0.5) };
    let target = T::lit(dim as f64 / 2.0);
    while x < target {
        gamma = gamma * x;
        x = x + T::one();
    }
    T::lit(2.0) * T::PI().powf(target) / gamma
}

/// Problem descriptor: domain plus the parameter `mu > 1` (with `lambda e^mu = mu`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub domain: Domain<T>,
    pub mu: T,
}

impl<T: Real> Params<T> {
    pub fn new(dim: usize, mu: T, a: T, b: T) -> Result<Self> {
        let domain = Domain::new(dim, a, b)?;
        Self::on(domain, mu)
    }

    pub fn on(domain: Domain<T>, mu: T) -> Result<Self> {
        if !(mu > T::one()) || !mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must exceed 1, got {mu}")));
        }
        Ok(Params { domain, mu })
    }

    pub fn ball(dim: usize, mu: T) -> Result<Self> {
        Self::new(dim, mu, T::zero(), T::one())
    }

    /// Builds the descriptor from `lambda in (0, 1/e)`, picking the root `mu > 1`.
    pub fn from_lambda(dim: usize, lambda: T, a: T, b: T) -> Result<Self> {
        let mu = mu_from_lambda(lambda)?;
        Self::new(dim, mu, a, b)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn a(&self) -> T {
        self.domain.a
    }

    pub fn b(&self) -> T {
        self.domain.b
    }

    pub fn omega(&self) -> T {
        self.domain.omega()
    }

    pub fn lambda(&self) -> T {
        self.mu * (-self.mu).exp()
    }

    pub fn with_interval(&self, a: T, b: T) -> Result<Self> {
        Ok(Params { domain: self.domain.with_interval(a, b)?, mu: self.mu })
    }

    pub fn with_mu(&self, mu: T) -> Result<Self> {
        Self::on(self.domain, mu)
    }

    /// Nonlinearity `e^(mu (u - 1))`.
    pub fn source(&self, u: T) -> T {
        (self.mu * (u - T::one())).exp()
    }
}

/// Solves `lambda e^mu = mu` for the root `mu > 1`.
pub fn mu_from_lambda<T: Real>(lambda: T) -> Result<T> {
    let inv_e = (-T::one()).exp();
    if !(lambda > T::zero()) || !(lambda < inv_e) {
        return Err(Error::InvalidParams(format!("lambda must lie in (0, 1/e), got {lambda}")));
    }
    // f(mu) = mu - ln mu + ln lambda is convex and increasing on (1, inf)
    let l = lambda.ln();
    let mut mu = (T::lit(2.0) - l).max(T::lit(1.5));
    for _ in 0..100 {
        let f = mu - mu.ln() + l;
        let step = f / (T::one() - T::one() / mu);
        let next = (mu - step).max((mu + T::one()) / T::lit(2.0));
        if (next - mu).abs() <= T::epsilon() * T::lit(4.0) * mu {
            return Ok(next);
        }
        mu = next;
    }
    Ok(mu)
}
