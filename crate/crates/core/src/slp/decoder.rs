//! Linearly constrained local minimization of `SP` (the SLP decoder).
//!
//! Three nested loops:
//! * the outer loop recenters the convexification `omega ||x - x'||^2` at the
//!   previous outer iterate and stops once consecutive outer iterates are
//!   within `tol_outer`;
//! * the middle (Bregman) loop minimizes
//!   `SP(x) + omega ||x - x'||^2 + lambda ||Ax - (y + q / (2 lambda))||^2` and
//!   then updates `q <- q + 2 lambda (y - Ax)`, until
//!   `(1 + ||q_start||) ||Ax - y|| <= l^-alpha` for outer index `l`;
//! * the inner loop is the componentwise fixed-point iteration
//!   `x <- S(x - mu (omega (x - x') + lambda A^T (Ax - b)))`, a proximal
//!   gradient step with `S = S_p^mu`.
//!
//! The inner step is a descent step as long as `mu (omega + lambda ||A||^2) <= 1`.
//! The decoder rescales `A` and `y` by `1 / max(1, ||A||)`, which leaves the
//! feasible set `{Ax = y}` unchanged.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::threshold::Thresholder;
use super::SPParams;
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::l1::DecodeResult;
use crate::scalar::{c, Scalar};

/// Growth factor of `||x||` treated as divergence in the inner loop.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Result of [`inner_fixed_point`].
#[derive(Debug, Clone)]
pub struct InnerOutcome<T: Scalar> {
    pub x: DVector<T>,
    pub iterations: usize,
    /// `||x^{n+1} - x^n||` at the last step.
    pub last_step: T,
    pub converged: bool,
}

/// One row per outer iteration of [`slp_decode_traced`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlpTraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub sp_value: f64,
    pub step: f64,
    pub bregman_steps: usize,
    pub inner_steps: usize,
}

pub const SLP_TRACE_HEADER: [&str; 6] = [
    "iteration",
    "residual",
    "sp_value",
    "step",
    "bregman_steps",
    "inner_steps",
];

/// Runs the inner fixed-point iteration from `x0` on
/// `SP(x) + omega ||x - x'||^2 + lambda ||Ax - target||^2`.
pub fn inner_fixed_point<T: Scalar>(
    a: &Encoder<T>,
    target: &DVector<T>,
    xprime: &DVector<T>,
    x0: &DVector<T>,
    params: &SPParams<T>,
) -> Result<InnerOutcome<T>> {
    let th = Thresholder::new(params.mu, params.r, params.eps, params.p)?;
    inner_with(a, target, xprime, x0, params, &th)
}

fn inner_with<T: Scalar>(
    a: &Encoder<T>,
    target: &DVector<T>,
    xprime: &DVector<T>,
    x0: &DVector<T>,
    params: &SPParams<T>,
    th: &Thresholder<T>,
) -> Result<InnerOutcome<T>> {
    let n = a.cols();
    if target.len() != a.rows() || xprime.len() != n || x0.len() != n {
        return Err(Error::Dimension("inner iteration operands have inconsistent lengths".into()));
    }
    let mat = a.matrix();
    let mu = params.mu;
    let w = params.omega;
    let lam = params.lambda;
    let tol: T = params.inner_tol;
    let blowup = c::<T>(DIVERGENCE_FACTOR) * (T::one() + x0.norm() + xprime.norm() + target.norm());
    let mut x = x0.clone();
    let mut last_step = T::zero();
    for it in 1..=params.max_inner {
        let resid = mat * &x - target;
        let grad = (&x - xprime) * w + mat.tr_mul(&resid) * lam;
        let xi = &x - grad * mu;
        let next = xi.map(|v| th.apply(v));
        last_step = (&next - &x).norm();
        x = next;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > blowup {
            return Err(Error::Numeric(format!(
                "inner iteration diverged at step {it}: ||x|| = {}",
                x.norm()
            )));
        }
        if last_step <= tol {
            return Ok(InnerOutcome {
                x,
                iterations: it,
                last_step,
                converged: true,
            });
        }
    }
    Ok(InnerOutcome {
        x,
        iterations: params.max_inner,
        last_step,
        converged: false,
    })
}

/// Multiplier update `q <- q + 2 lambda (y - Ax)` given `gap = y - Ax`.
pub fn bregman_update<T: Scalar>(q: &mut DVector<T>, gap: &DVector<T>, lambda: T) {
    let two_lam = c::<T>(2.0) * lambda;
    q.zip_apply(gap, |qi, gi| *qi += gi * two_lam);
}

/// SLP decoding of `y` starting from `x0`.
pub fn slp_decode<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    x0: &DVector<T>,
    params: &SPParams<T>,
) -> Result<DecodeResult<T>> {
    slp_decode_traced(a, y, x0, params).map(|(r, _)| r)
}

/// [`slp_decode`] that also returns one [`SlpTraceRow`] per outer iteration.
///
/// `iterations` in the result counts outer iterations; the trace carries the
/// Bregman and inner step counts.
pub fn slp_decode_traced<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    x0: &DVector<T>,
    params: &SPParams<T>,
) -> Result<(DecodeResult<T>, Vec<SlpTraceRow>)> {
    params.validate()?;
    if y.len() != a.rows() || x0.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "SLP expects y of length {} and x0 of length {}, got {} and {}",
            a.rows(),
            a.cols(),
            y.len(),
            x0.len()
        )));
    }
    let start = Instant::now();
    let norm = a.operator_norm();
    let scale = T::one() / norm.max(T::one());
    let a_s = a.scaled(scale);
    let y_s = y * scale;
    let a2 = (norm * scale) * (norm * scale);
    if params.mu * (params.omega + params.lambda * a2) > T::one() + c::<T>(1e-12) {
        return Err(Error::Parameter(format!(
            "mu = {} too large: need mu (omega + lambda ||A||^2) <= 1",
            params.mu
        )));
    }
    let th = Thresholder::new(params.mu, params.r, params.eps, params.p)?;
    let pot = *th.potential();
    let two_lam = c::<T>(2.0) * params.lambda;

    let mut x_prev = x0.clone();
    let mut q = DVector::<T>::zeros(a.rows());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut outer = 0;
    for l in 1..=params.max_outer {
        outer = l;
        let xprime = x_prev.clone();
        let q_start_norm = q.norm();
        let bound = T::one() / T::from_usize_(l).powf(params.alpha);
        let mut x = x_prev.clone();
        let mut bregman_steps = 0;
        let mut inner_steps = 0;
        for _ in 0..params.max_bregman {
            bregman_steps += 1;
            let target = &y_s + &q / two_lam;
            let inner = inner_with(&a_s, &target, &xprime, &x, params, &th)?;
            inner_steps += inner.iterations;
            x = inner.x;
            let gap = &y_s - a_s.apply(&x);
            bregman_update(&mut q, &gap, params.lambda);
            if (T::one() + q_start_norm) * gap.norm() <= bound {
                break;
            }
        }
        let step = (&x - &x_prev).norm();
        trace.push(SlpTraceRow {
            iteration: l,
            residual: (a.apply(&x) - y).norm().as_f64(),
            sp_value: pot.functional(&x).as_f64(),
            step: step.as_f64(),
            bregman_steps,
            inner_steps,
        });
        x_prev = x;
        if step <= params.tol_outer {
            converged = true;
            break;
        }
    }
    let residual = (a.apply(&x_prev) - y).norm();
    let result = DecodeResult {
        objective: pot.functional(&x_prev),
        residual,
        iterations: outer,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        converged,
        method_tag: "slp".into(),
        xstar: x_prev,
    };
    Ok((result, trace))
}

/// Writes trace rows as CSV with [`SLP_TRACE_HEADER`].
pub fn write_slp_trace<W: Write>(w: W, rows: &[SlpTraceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
