//! Convex decoders: basis pursuit with equality or ball constraints,
//! weighted basis pursuit, and iteratively reweighted `l1`.
//!
//! All of them run on one ADMM engine. A returned vector flagged
//! `converged` has passed a restricted re-solve on its support together
//! with a dual check `|A_i^T lambda| <= (1 + dual_tol) w_i` for every column,
//! so it is optimal up to the stated tolerances.

mod admm;
mod result;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use result::{DecodeRecord, DecodeResult, DECODE_RESULT_HEADER};

use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};
use admm::{Admm, AdmmState};

/// Shift `a` in the reweighting rule `w_i = 1 / (|z_i| + a)`.
pub const IRW_DEFAULT_A: f64 = 0.1;
/// Number of weighted solves in [`irw_l1`], the first one unweighted.
pub const IRW_DEFAULT_ITERS: usize = 8;

/// Controls for the ADMM engine.
///
/// The engine runs up to `max_outer` rounds of `max_inner` iterations. After
/// each round it rebalances the penalty and tries to certify the current
/// support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvexSolveOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub penalty: f64,
    pub verbose: bool,
}

impl Default for ConvexSolveOptions {
    fn default() -> Self {
        Self {
            max_outer: 1000,
            max_inner: 20,
            primal_tol: 1e-9,
            dual_tol: 1e-7,
            penalty: 1.0,
            verbose: false,
        }
    }
}

impl ConvexSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.primal_tol > 0.0 && self.dual_tol > 0.0) {
            return Err(Error::Parameter("solver tolerances must be positive".into()));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Parameter("penalty must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Parameter("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

fn weighted_l1<T: Scalar>(x: &DVector<T>, w: &DVector<T>) -> T {
    x.iter().zip(w.iter()).fold(T::zero(), |acc, (xi, wi)| acc + *wi * xi.abs())
}

fn finish<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    x: DVector<T>,
    weights: &DVector<T>,
    iterations: usize,
    converged: bool,
    start: Instant,
    tag: &str,
) -> DecodeResult<T> {
    let residual = (a.apply(&x) - y).norm();
    DecodeResult {
        objective: weighted_l1(&x, weights),
        xstar: x,
        iterations,
        residual,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        converged,
        method_tag: tag.to_string(),
    }
}

fn weighted_solve<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    w: &DVector<T>,
    delta: T,
    opts: &ConvexSolveOptions,
    tag: &str,
) -> Result<DecodeResult<T>> {
    opts.validate()?;
    let start = Instant::now();
    let engine = Admm::new(a.matrix(), y, delta)?;
    let out = engine.solve(w, opts, None)?;
    Ok(finish(a, y, out.x, w, out.iterations, out.converged, start, tag))
}

/// `argmin ||z||_1` subject to `Az = y`.
pub fn solve_bp_equality<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    opts: &ConvexSolveOptions,
) -> Result<DecodeResult<T>> {
    let w = DVector::from_element(a.cols(), T::one());
    weighted_solve(a, y, &w, T::zero(), opts, "l1_eq")
}

/// `argmin ||z||_1` subject to `||Az - y||_2 <= delta`.
pub fn solve_bp_inequality<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    delta: T,
    opts: &ConvexSolveOptions,
) -> Result<DecodeResult<T>> {
    let w = DVector::from_element(a.cols(), T::one());
    weighted_solve(a, y, &w, delta, opts, "l1_ineq")
}

/// `argmin sum_i w_i |z_i|` subject to `||Az - y||_2 <= delta`
/// (`delta = 0` gives the equality constraint).
pub fn solve_weighted_bp<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    w: &DVector<T>,
    delta: T,
    opts: &ConvexSolveOptions,
) -> Result<DecodeResult<T>> {
    weighted_solve(a, y, w, delta, opts, "l1_weighted")
}

/// Weights `1 / (|z_i| + a)` for the next reweighted solve.
pub fn irw_weights<T: Scalar>(z: &DVector<T>, a: T) -> DVector<T> {
    z.map(|v| T::one() / (v.abs() + a))
}

/// Iteratively reweighted `l1`: `n_iters` weighted solves, starting from unit
/// weights and updating them by [`irw_weights`] after each solve. Each solve
/// is warm-started from the previous one.
///
/// `iterations` counts ADMM iterations over all solves; the result is
/// `converged` only if every solve was.
pub fn irw_l1<T: Scalar>(
    enc: &Encoder<T>,
    y: &DVector<T>,
    a: T,
    n_iters: usize,
    delta: T,
    opts: &ConvexSolveOptions,
) -> Result<DecodeResult<T>> {
    opts.validate()?;
    if !(a > T::zero()) {
        return Err(Error::Parameter(format!("reweighting shift must be > 0, got {a}")));
    }
    if n_iters == 0 {
        return Err(Error::Parameter("irw_l1 needs at least one iteration".into()));
    }
    let start = Instant::now();
    let engine = Admm::new(enc.matrix(), y, delta)?;
    let mut w = DVector::from_element(enc.cols(), T::one());
    let mut warm: Option<AdmmState<T>> = None;
    let mut iterations = 0;
    let mut converged = true;
    let mut x = DVector::zeros(enc.cols());
    for pass in 0..n_iters {
        if pass > 0 {
            w = irw_weights(&x, a);
        }
        let out = engine.solve(&w, opts, warm.take())?;
        iterations += out.iterations;
        converged &= out.converged;
        x = out.x;
        warm = Some(out.state);
    }
    // Report the plain l1 norm so objectives compare across decoders.
    let ones = DVector::from_element(enc.cols(), T::one());
    Ok(finish(enc, y, x, &ones, iterations, converged, start, "irw_l1"))
}

/// `sqrt(sigma^2 (m + 2 sqrt(2m)))`, a high-probability bound on the norm of
/// `m` i.i.d. `N(0, sigma^2)` measurement errors.
pub fn delta_param<T: Scalar>(sigma: T, m: usize) -> T {
    let mf = T::from_usize_(m);
    (sigma * sigma * (mf + c::<T>(2.0) * (c::<T>(2.0) * mf).sqrt())).sqrt()
}
