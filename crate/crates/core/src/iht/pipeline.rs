use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::qcqp::{qcqp_solve, QcqpControls, QcqpProblem};
use super::{hard_threshold, iht_decode, tau_fallback, tau_midpoint, tau_range, IHTParams, TauFallback};
use crate::encoders::{Encoder, MatrixCertificate};
use crate::error::{Error, Result};
use crate::l1::{solve_bp_equality, ConvexSolveOptions, DecodeResult};
use crate::scalar::Scalar;
use crate::signals::ClassParams;

/// Constants that select `tau`: the restricted isometry constant of order
/// `2k` and `beta`, both for the encoder after rescaling to `||A|| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauCertificate {
    pub delta_2k: f64,
    pub beta: f64,
}

impl TauCertificate {
    /// Reads the constants from a certificate of order `2k`. A certificate
    /// without a RIP bound yields `None`.
    pub fn from_certificate(cert: &MatrixCertificate) -> Option<Self> {
        cert.rip_delta.map(|delta_2k| Self {
            delta_2k,
            beta: cert.beta_lower,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IhtPipelineOptions {
    pub convex: ConvexSolveOptions,
    pub max_iters: usize,
    pub fp_tol: f64,
    pub rescale: bool,
    /// Fixed `tau`, bypassing the certificate-based choice.
    pub tau: Option<f64>,
    pub fallback: TauFallback,
    pub qcqp: QcqpControls,
}

impl Default for IhtPipelineOptions {
    fn default() -> Self {
        let iht = IHTParams::new(1.0);
        Self {
            convex: ConvexSolveOptions::default(),
            max_iters: iht.max_iters,
            fp_tol: iht.fp_tol,
            rescale: iht.rescale,
            tau: None,
            fallback: TauFallback::default(),
            qcqp: QcqpControls::default(),
        }
    }
}

/// Per-stage diagnostics of [`l1_iht_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    /// FNV-1a hash of the basis pursuit solution, as hex.
    pub warm_start_hash: String,
    pub tau: f64,
    /// True when the certificate was missing or its `tau` range empty and
    /// the fallback rule was used instead.
    pub tau_fallback: bool,
    pub l1_iterations: usize,
    pub iht_iterations: usize,
    pub iht_converged: bool,
    pub qcqp_newton_steps: usize,
    pub qcqp_duality_gap: f64,
    pub support: Vec<usize>,
    pub j0_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Scalar> {
    pub result: DecodeResult<T>,
    pub trace: StageTrace,
}

/// 64-bit FNV-1a over the little-endian `f64` bytes of `v`.
pub fn fnv1a_hash<T: Scalar>(v: &DVector<T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in v.iter() {
        for b in x.as_f64().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn write_stage_trace(path: &Path, trace: &StageTrace) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), trace)?;
    Ok(())
}

/// Basis pursuit, then hard thresholding from its solution, then the QCQP
/// correction on the support and signs hard thresholding settled on.
///
/// `tau` is `opts.tau` if set, else the midpoint of the admissible range
/// for `cert`, else (no certificate or empty range) `opts.fallback`.
/// Errors are tagged with the stage (`l1`, `iht`, `qcqp`) that raised them.
pub fn l1_iht_pipeline<T: Scalar>(
    a: &Encoder<T>,
    y: &DVector<T>,
    class: &ClassParams<T>,
    cert: Option<TauCertificate>,
    opts: &IhtPipelineOptions,
) -> Result<PipelineOutput<T>> {
    class.validate()?;
    let start = Instant::now();
    let eta = class.eta.as_f64();
    let r = class.r.as_f64();

    let warm = solve_bp_equality(a, y, &opts.convex).map_err(|e| e.in_stage("l1"))?;

    let (tau, fallback) = match (opts.tau, cert) {
        (Some(t), _) => (t, false),
        (None, Some(cert)) => match tau_range(eta, r, cert.delta_2k, cert.beta) {
            Ok(range) => (tau_midpoint(range), false),
            Err(Error::Precondition(_)) => (tau_fallback(opts.fallback, eta, r), true),
            Err(e) => return Err(e.in_stage("tau")),
        },
        (None, None) => (tau_fallback(opts.fallback, eta, r), true),
    };
    let params = IHTParams {
        tau,
        max_iters: opts.max_iters,
        fp_tol: opts.fp_tol,
        rescale: opts.rescale,
    };
    let x0 = hard_threshold(&warm.xstar, T::lit(tau.sqrt()));
    let iht = iht_decode(a, y, &x0, &params).map_err(|e| e.in_stage("iht"))?;

    let support: Vec<usize> = (0..a.cols()).filter(|&i| iht.result.xstar[i] != T::zero()).collect();
    let scaled = a.scaled(T::one() / iht.scale);
    let data = y / iht.scale;
    let mut prob = QcqpProblem::new(&scaled, &data, &support, &iht.result.xstar, eta, r, class.p.as_f64())
        .map_err(|e| e.in_stage("qcqp"))?;
    prob.controls = opts.qcqp;
    let sol = qcqp_solve(&prob).map_err(|e| e.in_stage("qcqp"))?;

    let xstar: DVector<T> = sol.z.map(T::lit);
    let residual = (a.apply(&xstar) - y).norm();
    let half = T::lit(0.5);
    let result = DecodeResult {
        objective: half * residual * residual,
        residual,
        xstar,
        iterations: iht.result.iterations,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        converged: warm.converged && iht.result.converged,
        method_tag: "l1_iht".into(),
    };
    let trace = StageTrace {
        warm_start_hash: format!("{:016x}", fnv1a_hash(&warm.xstar)),
        tau,
        tau_fallback: fallback,
        l1_iterations: warm.iterations,
        iht_iterations: iht.result.iterations,
        iht_converged: iht.result.converged,
        qcqp_newton_steps: sol.newton_steps,
        qcqp_duality_gap: sol.duality_gap,
        support,
        j0_trace: iht.j0_trace.iter().map(|v| v.as_f64()).collect(),
    };
    Ok(PipelineOutput { result, trace })
}
