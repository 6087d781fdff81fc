//! Selective least `p`-powers: local minimization of the regularized
//! selective `p`-potential over `{z : Az = y}`.
//!
//! The potential flattens beyond `r + eps`, so entries above that level are
//! not shrunk, while entries below `r - eps` pay a `p`-power cost that spreads
//! small values instead of sparsifying them. Started from the basis pursuit
//! solution this separates the relevant entries from folded noise.

mod decoder;
mod potential;
mod threshold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

pub use decoder::{
    bregman_update, inner_fixed_point, slp_decode, slp_decode_traced, write_slp_trace, InnerOutcome, SlpTraceRow,
    SLP_TRACE_HEADER,
};
pub use potential::{
    omega_for_nu_convexity, pi_coeffs, sp_functional, w_trunc, CubicCoeffs, Potential, OMEGA_MARGIN,
};
pub use threshold::{threshold_numeric, threshold_s2, threshold_sp, ProxPoint, Thresholder};

/// Parameters of [`slp_decode`].
///
/// `lambda` weighs the data term, `omega` the convexification around the
/// previous outer iterate, `alpha` sets the decay `l^-alpha` of the
/// Bregman stopping rule, and `mu` is the weight of `W` in the thresholder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SPParams<T> {
    pub r: T,
    pub eps: T,
    pub p: T,
    pub lambda: T,
    pub omega: T,
    pub alpha: T,
    pub tol_outer: T,
    pub inner_tol: T,
    pub mu: T,
    pub max_outer: usize,
    pub max_bregman: usize,
    pub max_inner: usize,
}

impl<T: Scalar> SPParams<T> {
    /// Defaults for the potential `(r, eps, p)`: `lambda = 1/2`,
    /// `alpha = 1.1`, the smallest admissible `omega`, and
    /// `mu = 1 / (omega + lambda)`, the largest step allowed once
    /// `||A|| <= 1`.
    pub fn new(r: T, eps: T, p: T) -> Result<Self> {
        let omega = Potential::new(r, eps, p)?.omega_star();
        let lambda = c::<T>(0.5);
        let params = Self {
            r,
            eps,
            p,
            lambda,
            omega,
            alpha: c(1.1),
            tol_outer: c(1e-6),
            inner_tol: c(1e-8),
            mu: T::one() / (omega + lambda),
            max_outer: 100,
            max_bregman: 200,
            max_inner: 2000,
        };
        params.validate()?;
        Ok(params)
    }

    /// Replaces `omega` and resets `mu` to `1 / (omega + lambda)`.
    pub fn with_omega(mut self, omega: T) -> Self {
        self.omega = omega;
        self.mu = T::one() / (omega + self.lambda);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pot = Potential::new(self.r, self.eps, self.p)?;
        if !(self.omega >= pot.omega_star() - c::<T>(OMEGA_MARGIN)) {
            return Err(Error::Parameter(format!(
                "omega = {} is below the convexity bound {}",
                self.omega,
                pot.omega_star()
            )));
        }
        if !(self.lambda > T::zero()) {
            return Err(Error::Parameter("lambda must be > 0".into()));
        }
        if !(self.alpha > T::one()) {
            return Err(Error::Parameter("alpha must exceed 1".into()));
        }
        if !(self.mu > T::zero()) {
            return Err(Error::Parameter("mu must be > 0".into()));
        }
        if !(self.tol_outer > T::zero() && self.inner_tol > T::zero()) {
            return Err(Error::Parameter("SLP tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_bregman == 0 || self.max_inner == 0 {
            return Err(Error::Parameter("SLP iteration budgets must be positive".into()));
        }
        Ok(())
    }
}
