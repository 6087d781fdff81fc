//! Scalar thresholding functions `S_p^mu(xi) = argmin_t mu W(t) + (t - xi)^2`.
//!
//! [`threshold_s2`] is the three-branch closed form for `p = 2`. It is the
//! exact minimizer whenever the scalar problem is convex, i.e.
//! `2 + mu min W'' >= 0`. [`threshold_sp`] handles every `p` in `[1, 2]`
//! and every `mu` by comparing the stationary points of each branch of `W`;
//! in the convex `p = 2` case it returns the closed form.

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

use super::potential::Potential;

/// Closed-form `S_2^mu`, extended as an odd function.
pub fn threshold_s2<T: Scalar>(xi: T, mu: T, r: T, eps: T) -> Result<T> {
    if !(mu > T::zero()) {
        return Err(Error::Parameter(format!("mu must be > 0, got {mu}")));
    }
    if !(eps > T::zero() && eps < r) {
        return Err(Error::Domain(format!("need 0 < eps < r, got eps={eps}, r={r}")));
    }
    let a = xi.abs();
    let one = T::one();
    let t = if a < (r - eps) * (one + mu) {
        a / (one + mu)
    } else if a <= r + eps {
        let q = mu / (c::<T>(4.0) * eps);
        let two_r_eps = c::<T>(2.0) * r + eps;
        let two_eps_r = c::<T>(2.0) * eps + r;
        let gamma = c::<T>(4.0)
            * (one + q * q * two_r_eps * two_r_eps + mu / (c::<T>(2.0) * eps) * two_eps_r
                - c::<T>(3.0) * mu / (c::<T>(2.0) * eps) * a);
        if gamma < T::zero() {
            return Err(Error::Numeric(format!(
                "negative discriminant {gamma} in S_2 at xi={xi}, mu={mu}"
            )));
        }
        c::<T>(4.0) * eps / (c::<T>(3.0) * mu) * (one + q * two_eps_r - (gamma / c::<T>(4.0)).sqrt())
    } else {
        a
    };
    Ok(if xi < T::zero() { -t } else { t })
}

/// Minimizer of `mu W(t) + (t - xi)^2` and whether it is unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxPoint<T> {
    pub value: T,
    /// `false` when another candidate attains the same objective (a jump
    /// point of a discontinuous thresholder).
    pub unique: bool,
}

/// Precomputed thresholder for fixed `(mu, r, eps, p)`.
#[derive(Debug, Clone, Copy)]
pub struct Thresholder<T> {
    pot: Potential<T>,
    mu: T,
    convex: bool,
}

impl<T: Scalar> Thresholder<T> {
    pub fn new(mu: T, r: T, eps: T, p: T) -> Result<Self> {
        if !(mu > T::zero()) {
            return Err(Error::Parameter(format!("mu must be > 0, got {mu}")));
        }
        let pot = Potential::new(r, eps, p)?;
        let convex = c::<T>(2.0) + mu * pot.min_curvature() >= T::zero();
        Ok(Self { pot, mu, convex })
    }

    /// Whether the scalar problem is convex, so the thresholder is continuous.
    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.pot
    }

    fn objective(&self, t: T, xi: T) -> T {
        self.mu * self.pot.value(t) + (t - xi) * (t - xi)
    }

    /// Root of `mu p t^(p-1) + 2 (t - xi) = 0` on `(0, xi)` for `1 < p < 2`.
    fn power_branch_root(&self, xi: T) -> T {
        let p = self.pot.p;
        let mu = self.mu;
        let two = c::<T>(2.0);
        let g = |t: T| mu * p * t.powf(p - T::one()) + two * (t - xi);
        let (mut lo, mut hi) = (T::zero(), xi);
        let mut t = xi / (T::one() + mu);
        for _ in 0..100 {
            let gt = g(t);
            if gt > T::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let dg = mu * p * (p - T::one()) * t.powf(p - two) + two;
            let newton = t - gt / dg;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) / two
            };
            if (next - t).abs() <= T::eps() * c::<T>(4.0) * (T::one() + t) {
                return next;
            }
            t = next;
        }
        t
    }

    /// Exact minimizer for `xi >= 0` by comparing branch candidates.
    fn prox_nonneg(&self, xi: T) -> ProxPoint<T> {
        let cub = &self.pot.cubic;
        let (s1, s2) = (cub.s1, cub.s2);
        let p = self.pot.p;
        let mu = self.mu;
        let two = c::<T>(2.0);
        let mut cands: [T; 8] = [T::zero(); 8];
        let mut n = 1;
        let mut push = |t: T| {
            cands[n] = t;
            n += 1;
        };

        let t1 = if p == T::one() {
            xi - mu / two
        } else if p == two {
            xi / (T::one() + mu)
        } else if xi > T::zero() {
            self.power_branch_root(xi)
        } else {
            T::zero()
        };
        if t1 > T::zero() && t1 < s1 {
            push(t1);
        }
        push(s1);
        // mu pi'(s2 + u) + 2 (s2 + u - xi) = 0, quadratic in u on [s1 - s2, 0].
        let qa = c::<T>(3.0) * mu * cub.a3;
        let qb = two * mu * cub.b2 + two;
        let qc = two * (s2 - xi);
        let in_range = |u: T| u >= s1 - s2 && u <= T::zero();
        if qa.abs() <= T::eps() * (qb.abs() + qc.abs()) {
            if qb != T::zero() {
                let u = -qc / qb;
                if in_range(u) {
                    push(s2 + u);
                }
            }
        } else {
            let disc = qb * qb - c::<T>(4.0) * qa * qc;
            if disc >= T::zero() {
                let sq = disc.sqrt();
                let q = -(qb + if qb >= T::zero() { sq } else { -sq }) / two;
                for u in [q / qa, if q != T::zero() { qc / q } else { T::zero() }] {
                    if in_range(u) {
                        push(s2 + u);
                    }
                }
            }
        }
        push(s2);
        if xi > s2 {
            push(xi);
        }

        let mut best = cands[0];
        let mut best_val = self.objective(best, xi);
        for &t in &cands[1..n] {
            let v = self.objective(t, xi);
            if v < best_val {
                best = t;
                best_val = v;
            }
        }
        let tie_tol = c::<T>(1e-12) * (T::one() + best_val.abs());
        let sep = c::<T>(1e-9) * (T::one() + best.abs());
        let unique = cands[..n]
            .iter()
            .all(|&t| (t - best).abs() <= sep || self.objective(t, xi) - best_val > tie_tol);
        ProxPoint {
            value: best,
            unique,
        }
    }

    /// `S_p^mu(xi)` with a uniqueness flag.
    pub fn prox(&self, xi: T) -> ProxPoint<T> {
        let pp = self.prox_nonneg(xi.abs());
        if xi < T::zero() {
            ProxPoint {
                value: -pp.value,
                unique: pp.unique,
            }
        } else {
            pp
        }
    }

    /// `S_p^mu(xi)`.
    pub fn apply(&self, xi: T) -> T {
        if self.convex && self.pot.p == c::<T>(2.0) {
            if let Ok(t) = threshold_s2(xi, self.mu, self.pot.r, self.pot.eps) {
                return t;
            }
        }
        self.prox(xi).value
    }
}

/// `S_p^mu(xi)` for `p` in `[1, 2]`.
pub fn threshold_sp<T: Scalar>(xi: T, mu: T, r: T, eps: T, p: T) -> Result<T> {
    Ok(Thresholder::new(mu, r, eps, p)?.apply(xi))
}

/// Numeric minimization of `mu W(t) + (t - xi)^2` on a uniform grid over
/// `[0, |xi|]` followed by golden-section refinement around the best grid
/// point. Slow; meant as a reference.
pub fn threshold_numeric<T: Scalar>(xi: T, mu: T, r: T, eps: T, p: T, grid: usize) -> Result<T> {
    let pot = Potential::new(r, eps, p)?;
    if !(mu > T::zero()) {
        return Err(Error::Parameter(format!("mu must be > 0, got {mu}")));
    }
    let a = xi.abs();
    if a == T::zero() {
        return Ok(T::zero());
    }
    let f = |t: T| mu * pot.value(t) + (t - a) * (t - a);
    let grid = grid.max(2);
    let h = a / T::from_usize_(grid);
    let mut best_i = 0;
    let mut best_v = f(T::zero());
    for i in 1..=grid {
        let v = f(h * T::from_usize_(i));
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut lo = (h * T::from_usize_(best_i) - h).max(T::zero());
    let mut hi = (h * T::from_usize_(best_i) + h).min(a);
    let g = c::<T>((5f64.sqrt() - 1.0) / 2.0);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut t = (lo + hi) / c::<T>(2.0);
    // The endpoints of the search interval can beat the interior.
    for cand in [T::zero(), a] {
        if f(cand) < f(t) {
            t = cand;
        }
    }
    Ok(if xi < T::zero() { -t } else { t })
}
