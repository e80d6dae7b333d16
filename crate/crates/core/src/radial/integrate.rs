use crate::error::{Error, Result};
use crate::params::Domain;
use crate::radial::profile::{Profile, State};
use crate::scalar::Real;

/// Step-size control and safety limits for the embedded Runge-Kutta 4(5) pair.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Below this radius the origin is bridged by the Taylor series.
    pub series_radius: T,
    /// Blow-up cap on `|u|`.
    pub u_cap: T,
    pub max_steps: usize,
    /// Upper bound on the step length (`None` = whole interval).
    pub h_max: Option<T>,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        OdeOptions {
            rtol: T::lit(1e-10).max(T::tol_floor()),
            atol: T::lit(1e-12).max(T::tol_floor() * T::lit(1e-2)),
            series_radius: T::lit(1e-4),
            u_cap: T::lit(50.0),
            max_steps: 2_000_000,
            h_max: None,
        }
    }
}

impl<T: Real> OdeOptions<T> {
    /// Relative tolerance `tol`, absolute tolerance `tol / 100`.
    pub fn with_tol(tol: T) -> Self {
        let tol = tol.max(T::tol_floor());
        OdeOptions { rtol: tol, atol: tol * T::lit(1e-2), ..Self::default() }
    }
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Accepted step handed to the observer. `f0`, `f1` are the right-hand sides at both ends.
#[derive(Debug, Clone, Copy)]
pub struct Step<T, const D: usize> {
    pub r0: T,
    pub y0: [T; D],
    pub f0: [T; D],
    pub r1: T,
    pub y1: [T; D],
    pub f1: [T; D],
    /// Index into the stop list when `r1` landed on a stop.
    pub stop: Option<usize>,
}

impl<T: Real, const D: usize> Step<T, D> {
    /// Cubic Hermite dense output of component `k` at `r`, with its derivative.
    pub fn dense(&self, k: usize, r: T) -> (T, T) {
        crate::radial::profile::hermite3(self.r0, self.y0[k], self.f0[k], self.r1, self.y1[k], self.f1[k], r)
    }

    /// Root of component `k` inside the step, by bisection on the dense output.
    pub fn locate_zero(&self, k: usize) -> T {
        let (mut lo, mut hi) = (self.r0, self.r1);
        let s_lo = self.y0[k].signum();
        for _ in 0..80 {
            let mid = (lo + hi) / T::lit(2.0);
            if self.dense(k, mid).0.signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / T::lit(2.0)
    }
}

fn axpy<T: Real, const D: usize>(y: &[T; D], h: T, terms: &[(T, &[T; D])]) -> [T; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] = out[i] + h * *c * k[i];
        }
    }
    out
}

/// Adaptive Dormand-Prince 4(5) integration of `y' = f(r, y)` from `r0` to `r_end`
/// (either direction). Steps are clipped to land exactly on each entry of `stops`
/// (which must be ordered in the direction of integration). Returns the final point.
pub fn dopri5<T, const D: usize, F, O>(
    f: F,
    r0: T,
    y0: [T; D],
    r_end: T,
    stops: &[T],
    opts: &OdeOptions<T>,
    mut observer: O,
) -> Result<(T, [T; D])>
where
    T: Real,
    F: Fn(T, &[T; D]) -> [T; D],
    O: FnMut(&Step<T, D>) -> Result<Control>,
{
    let l = |x: f64| T::lit(x);
    let c = [l(0.2), l(0.3), l(0.8), l(8.0 / 9.0)];
    let a21 = l(0.2);
    let (a31, a32) = (l(3.0 / 40.0), l(9.0 / 40.0));
    let (a41, a42, a43) = (l(44.0 / 45.0), l(-56.0 / 15.0), l(32.0 / 9.0));
    let (a51, a52, a53, a54) = (l(19372.0 / 6561.0), l(-25360.0 / 2187.0), l(64448.0 / 6561.0), l(-212.0 / 729.0));
    let (a61, a62, a63, a64, a65) =
        (l(9017.0 / 3168.0), l(-355.0 / 33.0), l(46732.0 / 5247.0), l(49.0 / 176.0), l(-5103.0 / 18656.0));
    let (b1, b3, b4, b5, b6) = (l(35.0 / 384.0), l(500.0 / 1113.0), l(125.0 / 192.0), l(-2187.0 / 6784.0), l(11.0 / 84.0));
    let (e1, e3, e4, e5, e6, e7) = (
        l(71.0 / 57600.0),
        l(-71.0 / 16695.0),
        l(71.0 / 1920.0),
        l(-17253.0 / 339200.0),
        l(22.0 / 525.0),
        l(-1.0 / 40.0),
    );

    let span = r_end - r0;
    if span == T::zero() {
        return Ok((r0, y0));
    }
    let dir = span.signum();
    let h_max = opts.h_max.unwrap_or(span.abs()).min(span.abs());
    let scale = |y: &[T; D], z: &[T; D], i: usize| opts.atol + opts.rtol * y[i].abs().max(z[i].abs());

    let mut r = r0;
    let mut y = y0;
    let mut k1 = f(r, &y);

    // initial step guess
    let mut h = {
        let (mut d0, mut d1) = (T::zero(), T::zero());
        for i in 0..D {
            let sc = scale(&y, &y, i);
            d0 = d0 + (y[i] / sc).powi(2);
            d1 = d1 + (k1[i] / sc).powi(2);
        }
        let (d0, d1) = (d0.sqrt(), d1.sqrt());
        let h0 = if d0 < l(1e-5) || d1 < l(1e-5) { l(1e-6) } else { l(0.01) * d0 / d1 };
        h0.min(h_max).max(span.abs() * l(1e-12))
    };

    let mut next_stop = 0usize;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { r: r.as_f64() });
        }
        steps += 1;
        let target = if next_stop < stops.len() { stops[next_stop] } else { r_end };
        let remaining = (target - r) * dir;
        let mut clipped = false;
        let mut hs = h.min(h_max);
        if hs >= remaining {
            hs = remaining;
            clipped = true;
        }
        let floor = T::epsilon() * l(16.0) * r.abs().max(T::one());
        if hs < floor {
            if clipped {
                // already at the target within rounding
                hs = remaining;
            } else {
                return Err(Error::StepUnderflow { r: r.as_f64() });
            }
        }
        let hd = hs * dir;
        let k2 = f(r + c[0] * hd, &axpy(&y, hd, &[(a21, &k1)]));
        let k3 = f(r + c[1] * hd, &axpy(&y, hd, &[(a31, &k1), (a32, &k2)]));
        let k4 = f(r + c[2] * hd, &axpy(&y, hd, &[(a41, &k1), (a42, &k2), (a43, &k3)]));
        let k5 = f(r + c[3] * hd, &axpy(&y, hd, &[(a51, &k1), (a52, &k2), (a53, &k3), (a54, &k4)]));
        let r_new = if clipped { target } else { r + hd };
        let k6 = f(r + hd, &axpy(&y, hd, &[(a61, &k1), (a62, &k2), (a63, &k3), (a64, &k4), (a65, &k5)]));
        let y_new = axpy(&y, hd, &[(b1, &k1), (b3, &k3), (b4, &k4), (b5, &k5), (b6, &k6)]);
        let k7 = f(r_new, &y_new);
        let mut err = T::zero();
        let mut finite = true;
        for i in 0..D {
            let ei = hd * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            let q = ei / scale(&y, &y_new, i);
            err = err + q * q;
            finite &= y_new[i].is_finite();
        }
        err = (err / T::from_usize(D).unwrap()).sqrt();
        if !finite || !err.is_finite() {
            h = hs * l(0.2);
            if h < floor {
                return Err(Error::StepUnderflow { r: r.as_f64() });
            }
            continue;
        }
        if err <= T::one() {
            let step = Step {
                r0: r,
                y0: y,
                f0: k1,
                r1: r_new,
                y1: y_new,
                f1: k7,
                stop: if clipped && next_stop < stops.len() { Some(next_stop) } else { None },
            };
            r = r_new;
            y = y_new;
            k1 = k7;
            if clipped {
                if next_stop < stops.len() {
                    next_stop += 1;
                } else {
                    observer(&step)?;
                    return Ok((r, y));
                }
            }
            if observer(&step)? == Control::Stop {
                return Ok((r, y));
            }
            let fac = if err == T::zero() { l(5.0) } else { (l(0.9) * err.powf(l(-0.2))).min(l(5.0)).max(l(0.2)) };
            // a clipped step says nothing about the natural step length
            h = if clipped { h.max(hs * fac) } else { hs * fac };
        } else {
            let fac = (l(0.9) * err.powf(l(-0.2))).max(l(0.1));
            h = hs * fac;
        }
    }
}

/// Right-hand side of the radial equation `-u'' - (N-1)/r u' + u = g(u)` as a first-order system.
pub fn radial_rhs<T: Real>(nm1: T, g: &impl Fn(T) -> T, r: T, y: &[T; 2]) -> [T; 2] {
    [y[1], y[0] - g(y[0]) - nm1 * y[1] / r]
}

/// Taylor start at `h` for a trajectory leaving the origin with value `u0`:
/// `u = u0 + c2 h^2 + c4 h^4` with `c2 = F(u0) / 2N`, `c4 = F'(u0) c2 / 4(N + 2)`, `F = u - g(u)`.
/// The quartic term keeps the spurious singular component out of the derivative.
pub fn series_start<T: Real>(dim: usize, g: &impl Fn(T) -> T, u0: T, h: T) -> [T; 2] {
    let n = T::from_usize(dim).unwrap();
    let c2 = (u0 - g(u0)) / (T::lit(2.0) * n);
    let d = T::epsilon().cbrt() * u0.abs().max(T::one());
    let dg = (g(u0 + d) - g(u0 - d)) / (d + d);
    let c4 = (T::one() - dg) * c2 / (T::lit(4.0) * (n + T::lit(2.0)));
    let h2 = h * h;
    [u0 + c2 * h2 + c4 * h2 * h2, T::lit(2.0) * c2 * h + T::lit(4.0) * c4 * h2 * h]
}

/// Integrates the radial equation from `from` to `to` with relative tolerance `tol`.
/// The returned profile is stored on the integrator's own (increasing) grid.
pub fn integrate<T: Real>(domain: &Domain<T>, g: impl Fn(T) -> T, from: State<T>, to: T, tol: T) -> Result<Profile<T>> {
    integrate_with(domain, g, from, to, &[], &OdeOptions::with_tol(tol))
}

/// As [`integrate`], with explicit options and radii that must appear in the output grid.
pub fn integrate_with<T: Real>(
    domain: &Domain<T>,
    g: impl Fn(T) -> T,
    from: State<T>,
    to: T,
    checkpoints: &[T],
    opts: &OdeOptions<T>,
) -> Result<Profile<T>> {
    if !(from.r >= T::zero()) {
        return Err(Error::InvalidParams(format!("start radius {} < 0", from.r)));
    }
    if to == from.r || !(to >= T::zero()) {
        return Err(Error::InvalidParams(format!("bad end radius {to}")));
    }
    if !(opts.rtol > T::zero()) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let nm1 = domain.nm1();
    let forward = to > from.r;
    let mut grid = vec![from.r];
    let mut u = vec![from.u];
    let mut du = vec![from.du];
    let (r0, y0) = if from.r == T::zero() {
        if !forward {
            return Err(Error::InvalidParams("cannot integrate below r = 0".into()));
        }
        if from.du != T::zero() {
            return Err(Error::InvalidParams("trajectory through the origin needs du = 0".into()));
        }
        let h = opts.series_radius.min(to / T::lit(4.0));
        let y = series_start(domain.dim, &g, from.u, h);
        grid.push(h);
        u.push(y[0]);
        du.push(y[1]);
        (h, y)
    } else {
        (from.r, [from.u, from.du])
    };
    let mut stops: Vec<T> = checkpoints
        .iter()
        .copied()
        .filter(|&c| if forward { c > r0 && c < to } else { c < r0 && c > to })
        .collect();
    if forward {
        stops.sort_by(|x, y| x.partial_cmp(y).unwrap());
    } else {
        stops.sort_by(|x, y| y.partial_cmp(x).unwrap());
    }
    stops.dedup();
    let cap = opts.u_cap;
    let rhs = |r: T, y: &[T; 2]| radial_rhs(nm1, &g, r, y);
    dopri5(rhs, r0, y0, to, &stops, opts, |s| {
        if s.y1[0].abs() > cap {
            return Err(Error::BlowUp { r: s.r0.as_f64() });
        }
        grid.push(s.r1);
        u.push(s.y1[0]);
        du.push(s.y1[1]);
        Ok(Control::Continue)
    })?;
    if !forward {
        grid.reverse();
        u.reverse();
        du.reverse();
    }
    Profile::new(grid, u, du, *domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bessel_i0(r: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            term *= (r / 2.0) * (r / 2.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn harmonic_oscillator() {
        // y'' = -y through the generic stepper
        let opts = OdeOptions::<f64>::default();
        let (r, y) = dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 3.0, &[1.0, 2.0], &opts, |_| Ok(Control::Continue))
            .unwrap();
        assert_eq!(r, 3.0);
        assert_relative_eq!(y[0], 3f64.sin(), epsilon = 1e-9);
        assert_relative_eq!(y[1], 3f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn stops_are_hit_exactly() {
        let opts = OdeOptions::<f64>::default();
        let mut hit = vec![];
        dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, &[0.25, 0.5], &opts, |s| {
            if s.stop.is_some() {
                hit.push(s.r1);
            }
            Ok(Control::Continue)
        })
        .unwrap();
        assert_eq!(hit, vec![0.25, 0.5]);
    }

    #[test]
    fn sinh_over_r_in_three_dimensions() {
        let d = Domain::new(3, 0.0, 1.0).unwrap();
        let p = integrate(&d, |u| u * 0.0, State::new(0.0, 1.0, 0.0), 1.0, 1e-11).unwrap();
        // g = 0 means -u'' - 2u'/r + u = 0
        assert_relative_eq!(p.last().u, 1f64.sinh(), epsilon = 1e-8);
        for i in 0..p.len() {
            let r = p.grid[i];
            if r > 1e-3 {
                assert!((p.u[i] - r.sinh() / r).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bessel_in_two_dimensions() {
        let d = Domain::new(2, 0.0, 1.0).unwrap();
        let p = integrate(&d, |_| 0.0, State::new(0.0, 1.0, 0.0), 1.0, 1e-12).unwrap();
        let worst = p.grid.iter().zip(&p.u).map(|(r, u)| (u - bessel_i0(*r)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn fixed_point_stays_fixed() {
        let d = Domain::new(3, 0.0, 1.0).unwrap();
        let p = integrate(&d, |u| u, State::new(0.0, 0.7, 0.0), 1.0, 1e-10).unwrap();
        assert!(p.u.iter().all(|&u| u == 0.7));
        assert!(p.du.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn backward_is_stored_increasing() {
        let d = Domain::new(3, 0.2, 1.0).unwrap();
        let p = integrate(&d, |_| 0.0, State::new(1.0, 1.0, 0.0), 0.2, 1e-10).unwrap();
        assert_eq!(p.start(), 0.2);
        assert_eq!(p.end(), 1.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let d = Domain::new(3, 0.0, 1.0).unwrap();
        let e = integrate(&d, |u: f64| -u * u, State::new(0.0, 10.0, 0.0), 5.0, 1e-8).unwrap_err();
        assert!(matches!(e, Error::BlowUp { .. } | Error::StepUnderflow { .. }), "{e:?}");
    }

    #[test]
    fn single_precision_runs() {
        let d = Domain::<f32>::new(3, 0.0, 1.0).unwrap();
        let p = integrate(&d, |_| 0.0f32, State::new(0.0, 1.0, 0.0), 1.0, 1e-6).unwrap();
        assert!((p.last().u - 1f32.sinh()).abs() < 1e-4);
    }
}
