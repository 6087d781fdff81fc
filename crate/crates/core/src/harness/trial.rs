use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::DVector;

use super::config::{Ensemble, Method, TrialConfig};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::iht::{l1_iht_pipeline, PipelineOutput};
use crate::l1::{irw_l1, solve_bp_equality, solve_bp_inequality, DecodeResult};
use crate::signals::{generate_signal, support_metrics, ClassParams, NoisySignal, SupportMetrics, SUPPORT_METRICS_HEADER};
use crate::slp::{slp_decode, SPParams};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the trial `(m, k, trial)` under `seed_base`.
///
/// `m` and `k` are packed into 20 bits each and `trial` into 24, and the
/// packed word is xored with a scrambled base before a final bijective mix.
/// For a fixed base distinct in-range triples therefore map to distinct
/// seeds.
pub fn child_seed(seed_base: u64, m: usize, k: usize, trial: usize) -> u64 {
    let packed = ((m as u64 & 0xF_FFFF) << 44) | ((k as u64 & 0xF_FFFF) << 24) | (trial as u64 & 0xFF_FFFF);
    splitmix64(splitmix64(seed_base) ^ packed)
}

/// Seeds of the encoder and of the signal drawn from one child seed.
fn stream_seeds(child: u64) -> (u64, u64) {
    (splitmix64(child ^ 0x656e_636f_6465_72), splitmix64(child ^ 0x7369_676e_616c))
}

/// Outcome of one decoder on one trial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowStatus {
    Ok,
    Error(String),
    Timeout,
}

impl RowStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Error(_) => "error",
            RowStatus::Timeout => "timeout",
        }
    }
}

/// One row of `rows.csv`, plus the wall time kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub metrics: Option<SupportMetrics>,
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
    pub converged: bool,
    pub wall_time_ms: f64,
}

impl TrialRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    /// Success in the sense `S_r(x*) = S_r(x)`; failed rows count as misses.
    pub fn exact_by_r(&self) -> bool {
        self.is_ok() && self.metrics.is_some_and(|m| m.exact_by_r)
    }
}

/// The generated instance of a trial.
pub struct Instance {
    pub encoder: Encoder<f64>,
    pub signal: NoisySignal<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
}

pub fn build_instance(cfg: &TrialConfig, n: usize, m: usize, k: usize, trial: usize) -> Result<Instance> {
    let seed = child_seed(cfg.seed_base, m, k, trial);
    let (enc_seed, sig_seed) = stream_seeds(seed);
    let encoder = match cfg.ensemble {
        Ensemble::Gaussian => Encoder::gaussian(m, n, enc_seed)?,
        Ensemble::SubsampledCosine => Encoder::subsampled_cosine(m, n, enc_seed)?,
    };
    let class = ClassParams::new(cfg.eta, k, cfg.r, cfg.p)?;
    let (lo, hi) = cfg.amplitudes();
    let signal = generate_signal(n, &class, k, lo, hi, sig_seed)?;
    let y = encoder.apply(&signal.x);
    Ok(Instance {
        encoder,
        signal,
        y,
        seed,
    })
}

/// SLP parameters for a configuration.
pub fn slp_params(cfg: &TrialConfig) -> Result<SPParams<f64>> {
    let o = &cfg.options.slp;
    let r_sp = o.r_sp.unwrap_or(0.375 * cfg.r);
    let eps = o.eps.unwrap_or(cfg.r / 4.0);
    let mut params = SPParams::new(r_sp, eps, cfg.p)?;
    params.lambda = o.lambda;
    params.alpha = o.alpha;
    params.tol_outer = o.tol_outer;
    params.inner_tol = o.inner_tol;
    params.max_outer = o.max_outer;
    params.max_bregman = o.max_bregman;
    params.max_inner = o.max_inner;
    let omega = o.omega.unwrap_or(params.omega);
    let params = params.with_omega(omega);
    params.validate()?;
    Ok(params)
}

/// Runs one decoder, reusing the basis pursuit solution across methods
/// started from it. Returns the decoded result and the time it took,
/// including any warm start it depends on.
fn decode(
    cfg: &TrialConfig,
    method: Method,
    inst: &Instance,
    warm: &mut Option<(DecodeResult<f64>, f64)>,
) -> Result<(DecodeResult<f64>, f64)> {
    let a = &inst.encoder;
    let y = &inst.y;
    let opts = &cfg.options;
    let timed = |f: &dyn Fn() -> Result<DecodeResult<f64>>| -> Result<(DecodeResult<f64>, f64)> {
        let start = Instant::now();
        let out = f()?;
        Ok((out, start.elapsed().as_secs_f64() * 1e3))
    };
    let l1_warm = |warm: &mut Option<(DecodeResult<f64>, f64)>| -> Result<(DecodeResult<f64>, f64)> {
        if warm.is_none() {
            *warm = Some(timed(&|| solve_bp_equality(a, y, &opts.convex))?);
        }
        Ok(warm.clone().expect("warm start computed"))
    };
    match method {
        Method::L1Eq => l1_warm(warm),
        Method::L1Ineq => timed(&|| solve_bp_inequality(a, y, cfg.delta(), &opts.convex)),
        Method::IrwL1 => timed(&|| irw_l1(a, y, opts.irw.a, opts.irw.iters, cfg.delta(), &opts.convex)),
        Method::SlpCold => {
            let params = slp_params(cfg)?;
            timed(&|| {
                let mut out = slp_decode(a, y, &DVector::zeros(a.cols()), &params)?;
                out.method_tag = "slp_cold".into();
                Ok(out)
            })
        }
        Method::L1Slp => {
            let params = slp_params(cfg)?;
            let (start, warm_ms) = l1_warm(warm)?;
            let (mut out, ms) = timed(&|| slp_decode(a, y, &start.xstar, &params))?;
            out.method_tag = "l1_slp".into();
            Ok((out, ms + warm_ms))
        }
        Method::L1Iht => {
            let class = ClassParams::new(cfg.eta, inst.signal.params.k, cfg.r, cfg.p)?;
            timed(&|| {
                l1_iht_pipeline(a, y, &class, None, &opts.iht).map(|PipelineOutput { result, .. }| result)
            })
        }
    }
}

/// Runs every configured method on trial `(m, k, trial)` of a signal of
/// length `n`. Decoder failures become rows with an error status.
pub fn run_cell(cfg: &TrialConfig, n: usize, m: usize, k: usize, trial: usize) -> Result<Vec<TrialRow>> {
    let inst = build_instance(cfg, n, m, k, trial)?;
    let mut warm = None;
    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut row = TrialRow {
            method,
            n,
            m,
            k,
            trial,
            seed: inst.seed,
            status: RowStatus::Ok,
            metrics: None,
            iterations: 0,
            residual: f64::NAN,
            objective: f64::NAN,
            converged: false,
            wall_time_ms: 0.0,
        };
        match decode(cfg, method, &inst, &mut warm) {
            Ok((out, ms)) => {
                row.metrics = Some(support_metrics(&inst.signal, &out.xstar)?);
                row.iterations = out.iterations;
                row.residual = out.residual;
                row.objective = out.objective;
                row.converged = out.converged;
                row.wall_time_ms = ms;
                if ms > cfg.timeout_s * 1e3 {
                    row.status = RowStatus::Timeout;
                }
            }
            Err(e) => row.status = RowStatus::Error(e.to_string()),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// `run_cell` on the battery geometry `(cfg.n, cfg.m)`.
pub fn run_trial(cfg: &TrialConfig, k: usize, trial: usize) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    run_cell(cfg, cfg.n, cfg.m, k, trial)
}

pub const ROWS_HEADER_PREFIX: [&str; 7] = ["method", "N", "m", "k", "trial", "seed", "status"];
pub const ROWS_HEADER_SUFFIX: [&str; 5] = ["iterations", "residual", "objective", "converged", "message"];

fn rows_header() -> Vec<&'static str> {
    ROWS_HEADER_PREFIX
        .iter()
        .chain(SUPPORT_METRICS_HEADER.iter())
        .chain(ROWS_HEADER_SUFFIX.iter())
        .copied()
        .collect()
}

/// Writes `rows.csv`. Wall times are left out so that reruns produce
/// identical files; see [`write_timings`].
pub fn write_rows<W: Write>(out: W, rows: &[TrialRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(rows_header())?;
    for r in rows {
        let mut rec: Vec<String> = vec![
            r.method.tag().into(),
            r.n.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.status.label().into(),
        ];
        match &r.metrics {
            Some(mt) => rec.extend([
                mt.symdiff_count.to_string(),
                mt.exact_by_r.to_string(),
                mt.exact_by_topk.to_string(),
                mt.separation_gap.to_string(),
                mt.err_full.to_string(),
                mt.err_restricted_truth.to_string(),
                mt.err_restricted_decoded.to_string(),
                mt.residual_noise.to_string(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), SUPPORT_METRICS_HEADER.len())),
        }
        let message = match &r.status {
            RowStatus::Error(msg) => msg.clone(),
            _ => String::new(),
        };
        rec.extend([
            r.iterations.to_string(),
            r.residual.to_string(),
            r.objective.to_string(),
            r.converged.to_string(),
            message,
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timings.csv`: one wall time per row, keyed like `rows.csv`.
pub fn write_timings<W: Write>(out: W, rows: &[TrialRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "m", "k", "trial", "wall_time_ms"])?;
    for r in rows {
        w.write_record([
            r.method.tag().to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.trial.to_string(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, name: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {name} from `{field}`")))
}

/// Reads rows written by [`write_rows`], optionally joined with the wall
/// times of [`write_timings`] (rows must be in the same order).
pub fn read_rows<R: Read, S: Read>(rows: R, timings: Option<S>) -> Result<Vec<TrialRow>> {
    let mut rdr = csv::Reader::from_reader(rows);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != rows_header() {
        return Err(Error::Format("unexpected rows.csv header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let status = match &rec[6] {
            "ok" => RowStatus::Ok,
            "timeout" => RowStatus::Timeout,
            "error" => RowStatus::Error(rec[19].to_string()),
            other => return Err(Error::Format(format!("unknown status `{other}`"))),
        };
        let metrics = if rec[7].is_empty() {
            None
        } else {
            Some(SupportMetrics {
                symdiff_count: parse(&rec[7], "symdiff_count")?,
                exact_by_r: parse(&rec[8], "exact_by_r")?,
                exact_by_topk: parse(&rec[9], "exact_by_topk")?,
                separation_gap: parse(&rec[10], "separation_gap")?,
                err_full: parse(&rec[11], "err_full")?,
                err_restricted_truth: parse(&rec[12], "err_restricted_truth")?,
                err_restricted_decoded: parse(&rec[13], "err_restricted_decoded")?,
                residual_noise: parse(&rec[14], "residual_noise")?,
            })
        };
        out.push(TrialRow {
            method: rec[0].parse()?,
            n: parse(&rec[1], "N")?,
            m: parse(&rec[2], "m")?,
            k: parse(&rec[3], "k")?,
            trial: parse(&rec[4], "trial")?,
            seed: parse(&rec[5], "seed")?,
            status,
            metrics,
            iterations: parse(&rec[15], "iterations")?,
            residual: parse(&rec[16], "residual")?,
            objective: parse(&rec[17], "objective")?,
            converged: parse(&rec[18], "converged")?,
            wall_time_ms: 0.0,
        });
    }
    if let Some(t) = timings {
        let mut rdr = csv::Reader::from_reader(t);
        let mut count = 0;
        for (row, rec) in out.iter_mut().zip(rdr.records()) {
            let rec = rec?;
            if rec[0] != *row.method.tag() || parse::<usize>(&rec[3], "trial")? != row.trial {
                return Err(Error::Format("timings.csv does not match rows.csv".into()));
            }
            row.wall_time_ms = parse(&rec[4], "wall_time_ms")?;
            count += 1;
        }
        if count != out.len() {
            return Err(Error::Format("timings.csv has a different number of rows".into()));
        }
    }
    Ok(out)
}
