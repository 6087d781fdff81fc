//! The regularized truncated `p`-power `W` and the selective `p`-potential
//! `SP(x) = sum_j W(x_j)`.
//!
//! For `t >= 0`, `W(t)` is `t^p` below `r - eps`, the constant `r^p` above
//! `r + eps`, and a cubic blend `pi(t) = A (t-s2)^3 + B (t-s2)^2 + C` in
//! between, chosen so that `W` is `C^1`. `W` is even.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Margin added to the computed convexification weight.
pub const OMEGA_MARGIN: f64 = 1e-6;

/// Coefficients of the cubic blend and the interpolation data behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoeffs<T> {
    pub a3: T,
    pub b2: T,
    pub c0: T,
    /// `r - eps`
    pub s1: T,
    /// `r + eps`
    pub s2: T,
    /// `W'(s1) = p (r-eps)^(p-1)`
    pub mu1: T,
    /// `W(s1) = (r-eps)^p`
    pub mu2: T,
    /// `W(s2) = r^p`
    pub mu3: T,
}

impl<T: Scalar> CubicCoeffs<T> {
    pub fn eval(&self, t: T) -> T {
        let u = t - self.s2;
        (self.a3 * u + self.b2) * u * u + self.c0
    }

    pub fn deriv(&self, t: T) -> T {
        let u = t - self.s2;
        (c::<T>(3.0) * self.a3 * u + c::<T>(2.0) * self.b2) * u
    }

    pub fn second_deriv(&self, t: T) -> T {
        c::<T>(6.0) * self.a3 * (t - self.s2) + c::<T>(2.0) * self.b2
    }
}

fn check_domain<T: Scalar>(r: T, eps: T, p: T) -> Result<()> {
    if !(eps > T::zero() && eps < r) {
        return Err(Error::Domain(format!("need 0 < eps < r, got eps={eps}, r={r}")));
    }
    if !(p >= T::one() && p <= c(2.0)) {
        return Err(Error::Domain(format!("p must lie in [1, 2], got {p}")));
    }
    Ok(())
}

/// Coefficients of the cubic `pi_p` on `[r-eps, r+eps]`.
pub fn pi_coeffs<T: Scalar>(r: T, eps: T, p: T) -> Result<CubicCoeffs<T>> {
    check_domain(r, eps, p)?;
    let s1 = r - eps;
    let s2 = r + eps;
    let mu1 = p * s1.powf(p - T::one());
    let mu2 = s1.powf(p);
    let mu3 = r.powf(p);
    let d = s2 - s1;
    let three = c::<T>(3.0);
    let b2 = mu1 / d - three * (mu3 - mu2) / (d * d);
    let a3 = mu1 / (three * d * d) + c::<T>(2.0) * b2 / (three * d);
    Ok(CubicCoeffs {
        a3,
        b2,
        c0: mu3,
        s1,
        s2,
        mu1,
        mu2,
        mu3,
    })
}

/// `W` together with its cubic, for repeated evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential<T> {
    pub r: T,
    pub eps: T,
    pub p: T,
    pub cubic: CubicCoeffs<T>,
}

impl<T: Scalar> Potential<T> {
    pub fn new(r: T, eps: T, p: T) -> Result<Self> {
        Ok(Self {
            r,
            eps,
            p,
            cubic: pi_coeffs(r, eps, p)?,
        })
    }

    pub fn value(&self, t: T) -> T {
        let a = t.abs();
        if a < self.cubic.s1 {
            a.powf(self.p)
        } else if a <= self.cubic.s2 {
            self.cubic.eval(a)
        } else {
            self.cubic.mu3
        }
    }

    /// `W'(t)`; at `t = 0` with `p = 1` this returns `0`, the midpoint of the
    /// subdifferential.
    pub fn derivative(&self, t: T) -> T {
        let a = t.abs();
        let d = if a == T::zero() {
            T::zero()
        } else if a < self.cubic.s1 {
            self.p * a.powf(self.p - T::one())
        } else if a <= self.cubic.s2 {
            self.cubic.deriv(a)
        } else {
            T::zero()
        };
        if t < T::zero() {
            -d
        } else {
            d
        }
    }

    /// Smallest second derivative of `W` away from the origin. Only the cubic
    /// can be concave and its second derivative is linear, so the endpoints
    /// decide.
    pub fn min_curvature(&self) -> T {
        let at_s1 = self.cubic.second_deriv(self.cubic.s1);
        let at_s2 = self.cubic.second_deriv(self.cubic.s2);
        at_s1.min(at_s2).min(T::zero())
    }

    /// Smallest `omega` making `W(t) + omega t^2` convex, plus [`OMEGA_MARGIN`].
    pub fn omega_star(&self) -> T {
        -self.min_curvature() / c::<T>(2.0) + c::<T>(OMEGA_MARGIN)
    }

    pub fn functional(&self, x: &DVector<T>) -> T {
        x.iter().fold(T::zero(), |acc, &v| acc + self.value(v))
    }
}

/// `W(t)` for the given parameters; `NaN` outside `0 < eps < r`, `1 <= p <= 2`.
pub fn w_trunc<T: Scalar>(t: T, r: T, eps: T, p: T) -> T {
    match Potential::new(r, eps, p) {
        Ok(pot) => pot.value(t),
        Err(_) => T::nan(),
    }
}

/// `SP(x) = sum_j W(x_j)` with the potential parameters of `params`.
pub fn sp_functional<T: Scalar>(x: &DVector<T>, params: &super::SPParams<T>) -> T {
    match Potential::new(params.r, params.eps, params.p) {
        Ok(pot) => pot.functional(x),
        Err(_) => T::nan(),
    }
}

/// Convexification weight: the smallest `omega` with `t -> W(t) + omega t^2`
/// convex, plus a margin of `1e-6`. `NaN` outside the parameter domain.
pub fn omega_for_nu_convexity<T: Scalar>(r: T, eps: T, p: T) -> T {
    match Potential::new(r, eps, p) {
        Ok(pot) => pot.omega_star(),
        Err(_) => T::nan(),
    }
}
