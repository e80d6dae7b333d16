//! Layered solutions assembled from monotone pieces: the matching maps `L_mu`, `M_mu` and their
//! limits `L_inf`, `M_inf`.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{GreenPair, LayerLimit};
use crate::linalg::dense_solve;
use crate::monotone::{self, mass_balance, Direction, MonotoneSolution};
use crate::params::{Domain, Params};
use crate::radial::Profile;

/// Margin keeping interfaces off the boundary.
pub const DELTA: f64 = 0.02;
/// Finite-difference step of the `M_mu` Jacobian.
pub const FD_STEP: f64 = 1e-5;
/// Target of the matching Newton iteration.
pub const MATCH_TOL: f64 = 1e-8;

/// Shape of one piece between consecutive interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PieceKind {
    /// Interior maximum (increasing then decreasing).
    Peak,
    /// Increasing with the maximum at the right end.
    Rising,
    /// Decreasing with the maximum at the left end.
    Falling,
}

/// End values and maximum location of one piece.
#[derive(Debug, Clone, Copy)]
pub struct PieceEnds {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
    pub alpha: f64,
    pub left: f64,
    pub right: f64,
    /// `|L_mu(alpha)|` for peaks, zero otherwise.
    pub l_residual: f64,
}

fn sub(dim: usize, mu: f64, lo: f64, hi: f64) -> Result<Params<f64>> {
    Params::new(dim, mu, lo, hi)
}

fn side(name: &str, e: Error) -> Error {
    Error::SubSolveFailure { side: name.into(), source: Box::new(e) }
}

/// `(L, u(lo), u(hi))` for a peak at `s` on `[lo, hi]`.
fn l_parts(dim: usize, mu: f64, lo: f64, hi: f64, s: f64) -> Result<(f64, f64, f64)> {
    let left = sub(dim, mu, lo, s).and_then(|p| monotone::shoot(&p, Direction::Increasing, None)).map_err(|e| side("left", e))?;
    let right = sub(dim, mu, s, hi).and_then(|p| monotone::shoot(&p, Direction::Decreasing, None)).map_err(|e| side("right", e))?;
    let l = ((mu * (left.end_value - 1.0)).exp() - (mu * (right.end_value - 1.0)).exp()) / mu;
    Ok((l, left.c, right.c))
}

/// `L_mu(s; a, b) = (e^(mu (u_+(s; a, s) - 1)) - e^(mu (u_-(s; s, b) - 1))) / mu`.
pub fn l_mu(params: &Params<f64>, s: f64) -> Result<f64> {
    let (a, b) = (params.a(), params.b());
    if !(s > a && s < b) {
        return Err(Error::OutOfDomain { x: s, a, b });
    }
    Ok(l_parts(params.dim(), params.mu, a, b, s)?.0)
}

/// `L_inf(s; a, b) = (u_inf,+'(s; a, s)^2 - u_inf,-'(s; s, b)^2) / 2`.
pub fn l_inf(domain: &Domain<f64>, s: f64) -> Result<f64> {
    let left = GreenPair::new(domain.with_interval(domain.a, s)?)?;
    let right = GreenPair::new(domain.with_interval(s, domain.b)?)?;
    let p = left.u_inf_plus_slope();
    let m = right.u_inf_minus_slope();
    Ok((p * p - m * m) / 2.0)
}

/// Brent's method on a bracket with `f(lo) f(hi) <= 0`.
pub fn brent(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, flo: f64, fhi: f64, xtol: f64, ftol: f64) -> Result<(f64, f64)> {
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, flo, fhi);
    if fa == 0.0 {
        return Ok((a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket { left: fa, right: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Ok((b, fb));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b)?;
    }
    Ok((b, fb))
}

/// Bisects from a feasible point `(s, v)` toward an infeasible `t` for a feasible point of the
/// opposite sign. On failure returns the last feasible point found next to the edge.
fn edge_bracket(eval: &impl Fn(f64) -> Result<(f64, f64, f64)>, s: f64, v: f64, t: f64) -> std::result::Result<(f64, f64, f64, f64), (f64, f64)> {
    let (mut good, mut bad, mut last) = (s, t, v);
    for _ in 0..40 {
        let mid = 0.5 * (good + bad);
        match eval(mid) {
            Ok((w, _, _)) if w.signum() != v.signum() || w == 0.0 => {
                return Ok(if mid > s { (s, mid, v, w) } else { (mid, s, w, v) });
            }
            Ok((w, _, _)) => {
                good = mid;
                last = w;
            }
            Err(_) => bad = mid,
        }
        if (bad - good).abs() < 1e-12 {
            break;
        }
    }
    Err((good, last))
}

/// Root next to a fold of the shrinking half, where `L` jumps between the large- and
/// small-amplitude branches. Parametrized by that half's start value `c` at the outer end, the
/// peak position `s(c)` (first turn) and `L` are smooth through the fold.
fn fold_root(dim: usize, mu: f64, lo: f64, hi: f64, e: f64, t: f64) -> Result<PieceEnds> {
    let domain = Domain::new(dim, lo, hi)?;
    // the half that shrinks toward t
    let (dir, half) = if t > e { (Direction::Decreasing, sub(dim, mu, e, hi)?) } else { (Direction::Increasing, sub(dim, mu, lo, e)?) };
    let c_large = monotone::shoot(&half, dir, None)?.c;
    let c_small = monotone::shoot_upper(&half, dir)?.c;
    let eval = |c: f64| -> Result<(f64, f64, f64)> {
        let (s, u_turn) = monotone::first_turn(&domain, mu, dir, c)?.ok_or_else(|| Error::ShootingCollapse(format!("no turn from c = {c}")))?;
        let (other, od) = match dir {
            Direction::Decreasing => (sub(dim, mu, lo, s)?, Direction::Increasing),
            Direction::Increasing => (sub(dim, mu, s, hi)?, Direction::Decreasing),
        };
        let o = monotone::shoot(&other, od, None).map_err(|e| side(od.name(), e))?;
        let ex = |u: f64| (mu * (u - 1.0)).exp();
        Ok(match dir {
            Direction::Decreasing => ((ex(o.end_value) - ex(u_turn)) / mu, s, o.c),
            Direction::Increasing => ((ex(u_turn) - ex(o.end_value)) / mu, s, o.c),
        })
    };
    let f0 = eval(c_large)?.0;
    let f1 = eval(c_small)?.0;
    let (c, _) = brent(|c| eval(c).map(|v| v.0), c_large, c_small, f0, f1, 1e-15, 1e-15)?;
    let (l, s, oc) = eval(c)?;
    let (left, right) = match dir {
        Direction::Decreasing => (oc, c),
        Direction::Increasing => (c, oc),
    };
    Ok(PieceEnds { lo, hi, kind: PieceKind::Peak, alpha: s, left, right, l_residual: l.abs() })
}

/// Root of `L_mu` on `[lo, hi]`: local bracket search from `guess`, then a scan, then Brent.
fn peak_root(dim: usize, mu: f64, lo: f64, hi: f64, guess: f64) -> Result<PieceEnds> {
    let margin = DELTA.min((hi - lo) / 10.0);
    let (left_end, right_end) = (lo + margin, hi - margin);
    let eval = |s: f64| l_parts(dim, mu, lo, hi, s);
    let near_edge = |s: f64, v: f64, t: f64| match edge_bracket(&eval, s, v, t) {
        Ok(br) => Some(Ok(br)),
        Err((e, _)) => fold_root(dim, mu, lo, hi, e, t).ok().map(Err),
    };
    let mut bracket = None;
    let s0 = guess.max(left_end).min(right_end);
    if let Ok((v0, _, _)) = eval(s0) {
        let dir = if v0 < 0.0 { 1.0 } else { -1.0 };
        let mut step = (hi - lo) / 50.0;
        let (mut s, mut v) = (s0, v0);
        for _ in 0..8 {
            let t = (s + dir * step).max(left_end).min(right_end);
            if t == s {
                break;
            }
            let Ok((w, _, _)) = eval(t) else {
                bracket = near_edge(s, v, t);
                break;
            };
            if w.signum() != v.signum() || w == 0.0 {
                bracket = Some(Ok(if t > s { (s, t, v, w) } else { (t, s, w, v) }));
                break;
            }
            s = t;
            v = w;
            step *= 1.5;
        }
    }
    if bracket.is_none() {
        let pts: Vec<f64> = (0..=24).map(|i| left_end + (right_end - left_end) * i as f64 / 24.0).collect();
        let vals: Vec<Option<f64>> = pts.par_iter().map(|&s| eval(s).ok().map(|v| v.0)).collect();
        let mut best: Option<(f64, (f64, f64, f64, f64))> = None;
        for i in 0..pts.len() - 1 {
            if let (Some(v), Some(w)) = (vals[i], vals[i + 1]) {
                if v < 0.0 && w >= 0.0 {
                    let dist = (0.5 * (pts[i] + pts[i + 1]) - guess).abs();
                    if best.map_or(true, |(d, _)| dist < d) {
                        best = Some((dist, (pts[i], pts[i + 1], v, w)));
                    }
                }
            }
        }
        bracket = best.map(|(_, br)| Ok(br));
        // the root may sit next to a feasibility edge of one half
        for i in 0..pts.len() - 1 {
            if bracket.is_some() {
                break;
            }
            bracket = match (vals[i], vals[i + 1]) {
                (Some(v), None) if v < 0.0 => near_edge(pts[i], v, pts[i + 1]),
                (None, Some(w)) if w > 0.0 => near_edge(pts[i + 1], w, pts[i]),
                _ => None,
            };
        }
        if bracket.is_none() {
            let feas: Vec<f64> = vals.iter().flatten().copied().collect();
            return Err(Error::NoBracket {
                left: feas.first().copied().unwrap_or(f64::NAN),
                right: feas.last().copied().unwrap_or(f64::NAN),
            });
        }
    }
    let (x0, x1, f0, f1) = match bracket.unwrap() {
        Ok(br) => br,
        Err(piece) => return Ok(piece),
    };
    let (s, _) = brent(|s| eval(s).map(|v| v.0), x0, x1, f0, f1, 1e-13, 1e-15)?;
    let (l, left, right) = eval(s)?;
    Ok(PieceEnds { lo, hi, kind: PieceKind::Peak, alpha: s, left, right, l_residual: l.abs() })
}

fn piece_ends(dim: usize, mu: f64, lo: f64, hi: f64, kind: PieceKind, guess: f64) -> Result<PieceEnds> {
    match kind {
        PieceKind::Peak => peak_root(dim, mu, lo, hi, guess),
        PieceKind::Rising => {
            let s = monotone::shoot(&sub(dim, mu, lo, hi)?, Direction::Increasing, None).map_err(|e| side("rising", e))?;
            Ok(PieceEnds { lo, hi, kind, alpha: hi, left: s.c, right: s.end_value, l_residual: 0.0 })
        }
        PieceKind::Falling => {
            let s = monotone::shoot(&sub(dim, mu, lo, hi)?, Direction::Decreasing, None).map_err(|e| side("falling", e))?;
            Ok(PieceEnds { lo, hi, kind, alpha: lo, left: s.end_value, right: s.c, l_residual: 0.0 })
        }
    }
}

/// Limit end values: peaks are `G(., s) / G(s, s)` with `s` the diagonal critical point.
fn limit_piece(dim: usize, lo: f64, hi: f64, kind: PieceKind) -> Result<PieceEnds> {
    let pair = GreenPair::new(Domain::new(dim, lo, hi)?)?;
    let (alpha, left, right) = match kind {
        PieceKind::Peak => {
            let s = pair.diag_critical_point()?;
            (s, pair.peak_profile(s, lo).0, pair.peak_profile(s, hi).0)
        }
        PieceKind::Rising => (hi, pair.xi_eval(lo).0 / pair.xi_eval(hi).0, 1.0),
        PieceKind::Falling => (lo, 1.0, pair.zeta_eval(hi).0 / pair.zeta_eval(lo).0),
    };
    Ok(PieceEnds { lo, hi, kind, alpha, left, right, l_residual: 0.0 })
}

/// Piece kinds for a `k`-layer configuration.
pub fn layout(k: usize, boundary_layer: bool, annulus_left: bool, domain: &Domain<f64>) -> Result<Vec<PieceKind>> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if annulus_left && domain.a == 0.0 {
        return Err(Error::InvalidParams("a layer at the inner boundary needs an annulus".into()));
    }
    if k == 1 && boundary_layer && annulus_left {
        return Err(Error::InvalidParams("one monotone piece cannot peak at both ends".into()));
    }
    let mut kinds = vec![PieceKind::Peak; k];
    if annulus_left {
        kinds[0] = PieceKind::Falling;
    }
    if boundary_layer {
        kinds[k - 1] = PieceKind::Rising;
    }
    Ok(kinds)
}

fn full_betas(domain: &Domain<f64>, interior: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(interior.len() + 2);
    v.push(domain.a);
    v.extend_from_slice(interior);
    v.push(domain.b);
    v
}

/// Interfaces must increase with gaps of at least `DELTA`.
fn ordered(domain: &Domain<f64>, interior: &[f64]) -> bool {
    full_betas(domain, interior).windows(2).all(|w| w[1] - w[0] >= DELTA)
}

type Key = (u64, u64, PieceKind);

/// Evaluator of `M_mu` with a per-interval cache.
struct Matcher {
    dim: usize,
    mu: f64,
    domain: Domain<f64>,
    kinds: Vec<PieceKind>,
    /// Relative peak positions used as warm starts (fixed, so evaluations are reproducible).
    rel: Vec<f64>,
    cache: Mutex<HashMap<Key, PieceEnds>>,
}

impl Matcher {
    fn pieces(&self, interior: &[f64]) -> Result<Vec<PieceEnds>> {
        if !ordered(&self.domain, interior) {
            return Err(Error::InfeasibleOrder(format!("{interior:?}")));
        }
        let betas = full_betas(&self.domain, interior);
        let rel = &self.rel;
        let out: Vec<Result<PieceEnds>> = (0..self.kinds.len())
            .into_par_iter()
            .map(|j| {
                let (lo, hi, kind) = (betas[j], betas[j + 1], self.kinds[j]);
                let key = (lo.to_bits(), hi.to_bits(), kind);
                if let Some(p) = self.cache.lock().unwrap().get(&key) {
                    return Ok(*p);
                }
                let p = piece_ends(self.dim, self.mu, lo, hi, kind, lo + rel[j] * (hi - lo))?;
                self.cache.lock().unwrap().insert(key, p);
                Ok(p)
            })
            .collect();
        out.into_iter().collect()
    }

    fn m(&self, interior: &[f64]) -> Result<Vec<f64>> {
        Ok(mismatch(&self.pieces(interior)?))
    }
}

fn mismatch(pieces: &[PieceEnds]) -> Vec<f64> {
    pieces.windows(2).map(|w| w[1].left - w[0].right).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `M_mu` at interior interfaces `beta_1 .. beta_{k-1}`.
pub fn m_mu(params: &Params<f64>, kinds: &[PieceKind], interior: &[f64]) -> Result<Vec<f64>> {
    let m = Matcher {
        dim: params.dim(),
        mu: params.mu,
        domain: params.domain,
        kinds: kinds.to_vec(),
        rel: vec![0.5; kinds.len()],
        cache: Mutex::new(HashMap::new()),
    };
    m.m(interior)
}

/// `M_inf` at interior interfaces, together with the limit pieces.
pub fn m_inf(domain: &Domain<f64>, kinds: &[PieceKind], interior: &[f64]) -> Result<(Vec<f64>, Vec<PieceEnds>)> {
    if !ordered(domain, interior) {
        return Err(Error::InfeasibleOrder(format!("{interior:?}")));
    }
    let betas = full_betas(domain, interior);
    let pieces = (0..kinds.len())
        .into_par_iter()
        .map(|j| limit_piece(domain.dim, betas[j], betas[j + 1], kinds[j]))
        .collect::<Result<Vec<_>>>()?;
    Ok((mismatch(&pieces), pieces))
}

/// Ordered interface tuples on a uniform lattice of the admissible region.
fn simplex_lattice(domain: &Domain<f64>, dims: usize, per_axis: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = (domain.a + DELTA, domain.b - DELTA);
    let pts: Vec<f64> = (0..per_axis).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(dims);
    fn rec(pts: &[f64], start: usize, dims: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>, domain: &Domain<f64>) {
        if cur.len() == dims {
            if ordered(domain, cur) {
                out.push(cur.clone());
            }
            return;
        }
        for i in start..pts.len() {
            cur.push(pts[i]);
            rec(pts, i + 1, dims, cur, out, domain);
            cur.pop();
        }
    }
    rec(&pts, 0, dims, &mut cur, &mut out, domain);
    out
}

fn lattice_size(dims: usize) -> usize {
    match dims {
        1 => 48,
        2 => 24,
        3 => 14,
        _ => 10,
    }
}

/// Outcome of a damped Newton iteration with a finite-difference Jacobian.
struct NewtonRun {
    x: Vec<f64>,
    f: Vec<f64>,
    iterations: usize,
}

fn fd_newton(
    eval: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
    x0: Vec<f64>,
    f0: Vec<f64>,
    step: f64,
    target: f64,
    max_iter: usize,
) -> NewtonRun {
    let n = x0.len();
    let (mut x, mut f) = (x0, f0);
    let mut iterations = 0;
    while iterations < max_iter && sup(&f) > target {
        iterations += 1;
        let cols: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut xp = x.clone();
                xp[j] += step;
                eval(&xp).map(|fp| fp.iter().zip(&f).map(|(a, b)| (a - b) / step).collect())
            })
            .collect();
        let Ok(cols) = cols.into_iter().collect::<Result<Vec<_>>>() else { break };
        let mut jac = vec![0.0; n * n];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..n {
                jac[i * n + j] = col[i];
            }
        }
        let Ok(dx) = dense_solve(n, &jac, &f, 1e14) else { break };
        let norm = sup(&f);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-4 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - t * d).collect();
            if let Ok(ft) = eval(&trial) {
                if sup(&ft) < norm {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            // infeasible or no decrease: damp toward the current iterate
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonRun { x, f, iterations }
}

/// Root of `M_inf` by lattice scan plus damped Newton.
pub fn limit_configuration(domain: &Domain<f64>, kinds: &[PieceKind]) -> Result<(Vec<f64>, Vec<PieceEnds>)> {
    let dims = kinds.len() - 1;
    if dims == 0 {
        let (_, pieces) = m_inf(domain, kinds, &[])?;
        return Ok((Vec::new(), pieces));
    }
    let lattice = simplex_lattice(domain, dims, lattice_size(dims));
    let scored: Vec<(f64, Vec<f64>, Vec<f64>)> = lattice
        .par_iter()
        .filter_map(|x| m_inf(domain, kinds, x).ok().map(|(f, _)| (sup(&f), x.clone(), f)))
        .collect();
    let best = scored
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .ok_or_else(|| Error::InfeasibleOrder("no admissible interface configuration for the limit system".into()))?;
    let eval = |x: &[f64]| m_inf(domain, kinds, x).map(|v| v.0);
    let run = fd_newton(&eval, best.1, best.2, 1e-7, 1e-12, 60);
    if sup(&run.f) > 1e-9 {
        return Err(Error::NewtonStall { residual: sup(&run.f) });
    }
    let (_, pieces) = m_inf(domain, kinds, &run.x)?;
    Ok((run.x, pieces))
}

/// Glued `k`-layer solution.
#[derive(Debug, Clone)]
pub struct LayerSolution {
    pub k: usize,
    pub params: Params<f64>,
    pub kinds: Vec<PieceKind>,
    /// `a = beta_0 < ... < beta_k = b`.
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub boundary_layer: bool,
    pub annulus_left: bool,
    pub profile: Profile<f64>,
    pub mu: f64,
    /// `sup |M_mu(beta)|` from the shooting end values.
    pub match_residual: f64,
    /// Largest `|L_mu|` at the peak positions.
    pub root_residual: f64,
    /// Limit interfaces and maxima from `M_inf = 0`.
    pub limit_betas: Vec<f64>,
    pub limit_alphas: Vec<f64>,
    pub limit: LayerLimit<f64>,
    /// Diagonal critical point of the full domain (one interior layer only).
    pub s_bar_infty: Option<f64>,
    /// Value jumps of the glued profile at its junctions.
    pub value_jumps: Vec<f64>,
    /// Largest one-sided slope at the junctions.
    pub junction_slope: f64,
    pub mass_balance: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Invariants that failed on construction (empty on success).
    pub violations: Vec<String>,
}

/// Collocation-refined halves of every piece.
fn assemble(params: &Params<f64>, pieces: &[PieceEnds]) -> Result<Vec<MonotoneSolution>> {
    let (dim, mu) = (params.dim(), params.mu);
    let jobs: Vec<(f64, f64, Direction, f64)> = pieces
        .iter()
        .flat_map(|p| match p.kind {
            PieceKind::Peak => vec![(p.lo, p.alpha, Direction::Increasing, p.left), (p.alpha, p.hi, Direction::Decreasing, p.right)],
            PieceKind::Rising => vec![(p.lo, p.hi, Direction::Increasing, p.left)],
            PieceKind::Falling => vec![(p.lo, p.hi, Direction::Decreasing, p.right)],
        })
        .collect();
    jobs.par_iter()
        .map(|&(lo, hi, dir, c)| monotone::solve_from(&sub(dim, mu, lo, hi)?, dir, c).map_err(|e| side(dir.name(), e)))
        .collect()
}

fn glue(domain: Domain<f64>, parts: &[MonotoneSolution]) -> Result<(Profile<f64>, Vec<f64>, f64)> {
    let (mut grid, mut u, mut du): (Vec<f64>, Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new(), Vec::new());
    let mut jumps = Vec::new();
    let mut slope = 0.0f64;
    for (i, part) in parts.iter().enumerate() {
        let p = &part.profile;
        let skip = if i == 0 {
            0
        } else {
            let last = u.len() - 1;
            jumps.push((u[last] - p.u[0]).abs());
            slope = slope.max(du[last].abs()).max(p.du[0].abs());
            u[last] = 0.5 * (u[last] + p.u[0]);
            du[last] = 0.5 * (du[last] + p.du[0]);
            1
        };
        grid.extend_from_slice(&p.grid[skip..]);
        u.extend_from_slice(&p.u[skip..]);
        du.extend_from_slice(&p.du[skip..]);
    }
    Ok((Profile::new(grid, u, du, domain)?, jumps, slope))
}

/// Strict local maxima of the sampled values, endpoints included.
pub fn local_maxima(p: &Profile<f64>) -> Vec<f64> {
    let n = p.len();
    let mut out = Vec::new();
    if p.u[0] > p.u[1] {
        out.push(p.grid[0]);
    }
    for i in 1..n - 1 {
        if p.u[i] > p.u[i - 1] && p.u[i] >= p.u[i + 1] {
            out.push(p.grid[i]);
        }
    }
    if p.u[n - 1] > p.u[n - 2] {
        out.push(p.grid[n - 1]);
    }
    out
}

impl LayerSolution {
    /// Checks the structural invariants; returns the list of violations.
    pub fn check(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(j) = self.value_jumps.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x)))) {
            if j > 1e-7 {
                v.push(format!("value jump {j:e} > 1e-7"));
            }
        }
        if self.junction_slope > 1e-8 {
            v.push(format!("junction slope {:e} > 1e-8", self.junction_slope));
        }
        let maxima = local_maxima(&self.profile);
        if maxima.len() != self.k {
            v.push(format!("{} local maxima, expected {}", maxima.len(), self.k));
        }
        for (j, &al) in self.alphas.iter().enumerate() {
            let (lo, hi) = (self.betas[j], self.betas[j + 1]);
            let interior = self.kinds[j] == PieceKind::Peak;
            if interior && !(al > lo && al < hi) {
                v.push(format!("alpha {al} outside ({lo}, {hi})"));
            }
            if !(self.profile.value(al) > 1.0) {
                v.push(format!("u(alpha = {al}) = {} not above 1", self.profile.value(al)));
            }
        }
        for &b in &self.betas[1..self.k] {
            if !(self.profile.value(b) < 1.0) {
                v.push(format!("u(beta = {b}) = {} not below 1", self.profile.value(b)));
            }
        }
        if self.match_residual > MATCH_TOL {
            v.push(format!("match residual {:e} > {MATCH_TOL:e}", self.match_residual));
        }
        if self.mass_balance.abs() > 1e-7 {
            v.push(format!("mass balance {:e} > 1e-7", self.mass_balance));
        }
        v
    }

    /// `sup` of `|u - sum A_j G(., alpha_j)|` over grid points at distance `>= gap` from every
    /// limit maximum.
    pub fn limit_gap(&self, gap: f64) -> Result<f64> {
        let lim = &self.limit;
        let mut worst = 0.0f64;
        for (i, &r) in self.profile.grid.iter().enumerate() {
            if lim.alphas.iter().any(|&a| (r - a).abs() < gap) || r < crate::green::S_MIN {
                continue;
            }
            worst = worst.max((self.profile.u[i] - lim.profile_at(r)?).abs());
        }
        Ok(worst)
    }
}

/// `k`-layer solution: Newton on `M_mu` from the root of `M_inf`.
pub fn k_layer(params: &Params<f64>, k: usize, boundary_layer: bool, annulus_left: bool) -> Result<LayerSolution> {
    let domain = params.domain;
    let kinds = layout(k, boundary_layer, annulus_left, &domain)?;
    let (limit_betas, limit_pieces) = limit_configuration(&domain, &kinds)?;
    let limit_alphas: Vec<f64> = limit_pieces.iter().map(|p| p.alpha).collect();
    let full_pair = GreenPair::new(domain)?;
    let limit = full_pair.solve_amplitudes(&limit_alphas)?;
    let rel: Vec<f64> = limit_pieces.iter().map(|p| (p.alpha - p.lo) / (p.hi - p.lo)).collect();
    let matcher = Matcher {
        dim: params.dim(),
        mu: params.mu,
        domain,
        kinds: kinds.clone(),
        rel,
        cache: Mutex::new(HashMap::new()),
    };
    let eval = |x: &[f64]| matcher.m(x);
    let dims = k - 1;
    let start = match eval(&limit_betas) {
        Ok(f) => Some((limit_betas.clone(), f)),
        Err(_) if dims > 0 => {
            // the limit guess is not admissible at this mu: restart from the best lattice point
            let lattice = simplex_lattice(&domain, dims, lattice_size(dims));
            let scored: Vec<(f64, Vec<f64>, Vec<f64>)> =
                lattice.par_iter().filter_map(|x| eval(x).ok().map(|f| (sup(&f), x.clone(), f))).collect();
            scored.into_iter().min_by(|a, b| a.0.partial_cmp(&b.0).unwrap()).map(|(_, x, f)| (x, f))
        }
        Err(e) => return Err(e),
    };
    let Some((x0, f0)) = start else {
        return Err(Error::InfeasibleOrder(format!("no interface configuration admits all sub-solves at mu = {}", params.mu)));
    };
    let run = fd_newton(&eval, x0, f0, FD_STEP, MATCH_TOL * 1e-3, 40);
    let pieces = matcher.pieces(&run.x)?;
    let match_residual = sup(&mismatch(&pieces));
    let parts = assemble(params, &pieces)?;
    let (profile, value_jumps, junction_slope) = glue(domain, &parts)?;
    let betas = full_betas(&domain, &run.x);
    let alphas: Vec<f64> = pieces.iter().map(|p| p.alpha).collect();
    let root_residual = pieces.iter().map(|p| p.l_residual).fold(0.0, f64::max);
    let s_bar_infty = if k == 1 && kinds[0] == PieceKind::Peak { Some(full_pair.diag_critical_point()?) } else { None };
    let mass = mass_balance(&profile, params.mu);
    let mut sol = LayerSolution {
        k,
        params: *params,
        kinds,
        betas,
        alphas,
        boundary_layer,
        annulus_left,
        profile,
        mu: params.mu,
        match_residual,
        root_residual,
        limit_betas: full_betas(&domain, &limit_betas),
        limit_alphas,
        limit,
        s_bar_infty,
        value_jumps,
        junction_slope,
        mass_balance: mass,
        converged: match_residual <= MATCH_TOL,
        iterations: run.iterations,
        violations: Vec::new(),
    };
    sol.violations = sol.check();
    Ok(sol)
}

/// Single interior layer at the root `s_mu` of `L_mu`.
pub fn one_layer(params: &Params<f64>) -> Result<LayerSolution> {
    k_layer(params, 1, false, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let (r, _) = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 0.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
        assert!(matches!(brent(f, 2.0, 3.0, 6.0, 25.0, 1e-14, 0.0), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn layouts() {
        let ball = Domain::ball(3).unwrap();
        assert_eq!(layout(2, true, false, &ball).unwrap(), vec![PieceKind::Peak, PieceKind::Rising]);
        assert!(layout(2, false, true, &ball).is_err());
        let ann = Domain::new(3, 0.3, 1.0).unwrap();
        assert!(layout(1, true, true, &ann).is_err());
        assert_eq!(layout(1, false, true, &ann).unwrap(), vec![PieceKind::Falling]);
    }

    #[test]
    fn lattice_is_ordered() {
        let d = Domain::ball(3).unwrap();
        let l = simplex_lattice(&d, 2, 10);
        assert!(!l.is_empty());
        assert!(l.iter().all(|x| ordered(&d, x)));
    }
}
