//! Iterative hard thresholding warm-started by basis pursuit, followed by a
//! convex QCQP that restores consistency with the data and the signal class.

mod pipeline;
mod qcqp;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::l1::DecodeResult;
use crate::scalar::{c, Scalar};

pub use pipeline::{
    fnv1a_hash, l1_iht_pipeline, write_stage_trace, IhtPipelineOptions, PipelineOutput, StageTrace, TauCertificate,
};
pub use qcqp::{qcqp_correct, qcqp_solve, QcqpControls, QcqpProblem, QcqpSolution};

/// Parameters of [`iht_decode`]. The threshold applied to each iterate is
/// `sqrt(tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IHTParams {
    pub tau: f64,
    pub max_iters: usize,
    pub fp_tol: f64,
    /// Divide `A` and `y` by `||A||` when it exceeds one.
    pub rescale: bool,
}

impl IHTParams {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            max_iters: 10_000,
            fp_tol: 1e-10,
            rescale: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Parameter(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::Parameter("fp_tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Keeps the entries with `|z_i| > thresh`, zeroing the rest.
pub fn hard_threshold<T: Scalar>(z: &DVector<T>, thresh: T) -> DVector<T> {
    z.map(|v| if v.abs() > thresh { v } else { T::zero() })
}

/// Admissible interval for `tau` given the tail level `eta`, the threshold
/// `r`, the restricted isometry constant `delta_2k` and `beta`.
///
/// The interval for `sqrt(tau)` is `(eta, (r - eta/(1-d)) / (1 + 1/((1-d) beta)))`
/// and is returned squared. It is nonempty exactly when
/// `r > eta (1 + (1 + 1/beta) / (1 - d))`.
pub fn tau_range(eta: f64, r: f64, delta_2k: f64, beta: f64) -> Result<(f64, f64)> {
    if !(eta >= 0.0 && r > 0.0) {
        return Err(Error::Parameter(format!("need eta >= 0 and r > 0, got eta={eta}, r={r}")));
    }
    if !(0.0..1.0).contains(&delta_2k) {
        return Err(Error::Parameter(format!("delta_2k must lie in [0, 1), got {delta_2k}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta must be > 0, got {beta}")));
    }
    let gap = 1.0 - delta_2k;
    let needed = eta * (1.0 + (1.0 + 1.0 / beta) / gap);
    if !(r > needed) {
        return Err(Error::Precondition(format!(
            "hard thresholding needs r > eta (1 + (1 + 1/beta)/(1 - delta_2k)) = {needed}, got r = {r}"
        )));
    }
    let hi = (r - eta / gap) / (1.0 + 1.0 / (gap * beta));
    Ok((eta * eta, hi * hi))
}

/// `tau` whose square root is the midpoint of the admissible `sqrt(tau)`
/// interval.
pub fn tau_midpoint(range: (f64, f64)) -> f64 {
    let mid = 0.5 * (range.0.sqrt() + range.1.sqrt());
    mid * mid
}

/// How `tau` is chosen when no admissible range is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauFallback {
    /// `sqrt(tau) = 5r / 8`.
    #[default]
    FiveEighthsR,
    /// `sqrt(tau) = r / 2`.
    HalfR,
    /// `sqrt(tau) = (eta + r) / 2`.
    EtaRMidpoint,
}

/// Fallback `tau` for the tail level `eta` and threshold `r`.
pub fn tau_fallback(rule: TauFallback, eta: f64, r: f64) -> f64 {
    let root = match rule {
        TauFallback::FiveEighthsR => 0.625 * r,
        TauFallback::HalfR => 0.5 * r,
        TauFallback::EtaRMidpoint => 0.5 * (eta + r),
    };
    root * root
}

/// `||Ax - y||^2 + tau * #supp(x)`.
pub fn j0<T: Scalar>(a: &Encoder<T>, y: &DVector<T>, x: &DVector<T>, tau: T) -> T {
    let res = (a.apply(x) - y).norm_squared();
    let nnz = x.iter().filter(|v| **v != T::zero()).count();
    res + tau * T::from_usize_(nnz)
}

/// Result of [`iht_decode`] with the `J0` value of every iterate, starting
/// with `x0`. Both are measured with the rescaled operator.
#[derive(Debug, Clone)]
pub struct IhtOutcome<T: Scalar> {
    pub result: DecodeResult<T>,
    pub j0_trace: Vec<T>,
    /// Factor `A` and `y` were divided by.
    pub scale: T,
}

/// Runs `x <- H_sqrt(tau)(x + A^T (y - A x))` from `x0` until successive
/// iterates differ by at most `fp_tol` in `l2`.
///
/// Without convergence the iterate of smallest `J0` is returned and
/// `converged` is false.
pub fn iht_decode<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    x0: &DVector<T>,
    params: &IHTParams,
) -> Result<IhtOutcome<T>> {
    params.validate()?;
    if y.len() != a.rows() || x0.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, y has {} entries and x0 has {}",
            a.rows(),
            a.cols(),
            y.len(),
            x0.len()
        )));
    }
    let start = Instant::now();
    let norm = a.operator_norm();
    let scale = if norm > T::one() + c::<T>(1e-12) {
        if !params.rescale {
            return Err(Error::Precondition(format!(
                "iterative hard thresholding needs ||A|| <= 1, got {norm}"
            )));
        }
        // Power iteration approaches the norm from below.
        norm * c::<T>(1.0 + 1e-9)
    } else {
        T::one()
    };
    let (op, data) = if scale > T::one() {
        (a.scaled(T::one() / scale), y / scale)
    } else {
        (a.clone(), y.clone())
    };
    let tau = c::<T>(params.tau);
    let thresh = tau.sqrt();
    let tol = c::<T>(params.fp_tol);

    let mut x = x0.clone();
    let mut trace = vec![j0(&op, &data, &x, tau)];
    let mut best = (trace[0], x.clone());
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iters {
        let grad_step = &x + op.apply_transpose(&(&data - op.apply(&x)));
        let next = hard_threshold(&grad_step, thresh);
        let step = (&next - &x).norm();
        x = next;
        iterations = it;
        let value = j0(&op, &data, &x, tau);
        trace.push(value);
        if value < best.0 {
            best = (value, x.clone());
        }
        if !step.is_finite() {
            return Err(Error::Numeric("hard thresholding iterates diverged".into()));
        }
        if step <= tol {
            converged = true;
            break;
        }
    }
    let xstar = if converged { x } else { best.1 };
    let objective = j0(&op, &data, &xstar, tau);
    let residual = (a.apply(&xstar) - y).norm();
    Ok(IhtOutcome {
        result: DecodeResult {
            xstar,
            iterations,
            residual,
            objective,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            converged,
            method_tag: "iht".into(),
        },
        j0_trace: trace,
        scale,
    })
}
