use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use noisefold::encoders::{certify, Encoder};
use noisefold::harness::{
    build_instance, massive_stats, noise_folding_check, overrun_fraction, phase_transition, run_battery, run_trial,
    slp_params, write_aggregate, write_rows, write_timings, Ensemble, Method, TrialConfig,
};
use noisefold::iht::{l1_iht_pipeline, write_stage_trace};
use noisefold::l1::solve_bp_equality;
use noisefold::signals::ClassParams;
use noisefold::slp::{slp_decode_traced, write_slp_trace};
use noisefold::{Error, Result};

/// Runs share of overrun rows above which the exit code is 3.
const OVERRUN_LIMIT: f64 = 0.5;

#[derive(Parser)]
#[command(name = "noisefold", version, about = "Sparse recovery benchmarks under signal-domain noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method on one (k, trial) cell, with decoder traces.
    Trial {
        #[command(flatten)]
        common: Common,
        /// Trial index within the cell.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Run a full battery and aggregate it.
    Battery {
        #[command(flatten)]
        common: Common,
    },
    /// Success-rate grid over (m, k); `--N` sets the grid size.
    Phase {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical variance amplification of signal noise through A.
    Folding {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Exact RIP/NSP constants and a sampled beta for a generated encoder.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Random directions tried for beta.
        #[arg(long, default_value_t = 200)]
        beta_samples: usize,
    },
}

#[derive(Args)]
struct Common {
    /// JSON or TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Comma-separated sparsities.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Comma-separated method tags.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long = "timeout-s")]
    timeout_s: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<TrialConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrialConfig::load(path)?,
            None => TrialConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.n = n;
            cfg.phase_n = n;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(r) = self.r {
            cfg.r = r;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(k) = &self.k {
            cfg.k_list = k.clone();
        }
        if let Some(methods) = &self.methods {
            cfg.methods = methods.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(seed) = self.seed {
            cfg.seed_base = seed;
        }
        if let Some(t) = self.trials {
            cfg.trials_per_cell = t;
        }
        if let Some(t) = self.timeout_s {
            cfg.timeout_s = t;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

fn create(dir: &Path, name: &str) -> Result<std::fs::File> {
    Ok(std::fs::File::create(dir.join(name))?)
}

fn status(overrun: f64) -> ExitCode {
    if overrun > OVERRUN_LIMIT {
        eprintln!("{:.0}% of runs hit a timeout or budget limit", overrun * 100.0);
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn trial(common: &Common, index: usize) -> Result<ExitCode> {
    let cfg = common.config()?;
    cfg.validate()?;
    let out = common.out_dir()?;
    let mut rows = Vec::new();
    for &k in &cfg.k_list {
        rows.extend(run_trial(&cfg, k, index)?);
        let inst = build_instance(&cfg, cfg.n, cfg.m, k, index)?;
        for &method in &cfg.methods {
            match method {
                Method::SlpCold | Method::L1Slp => {
                    let x0 = if method == Method::SlpCold {
                        DVector::zeros(cfg.n)
                    } else {
                        solve_bp_equality(&inst.encoder, &inst.y, &cfg.options.convex)?.xstar
                    };
                    if let Ok((_, trace)) = slp_decode_traced(&inst.encoder, &inst.y, &x0, &slp_params(&cfg)?) {
                        write_slp_trace(create(out, &format!("slp_trace_{method}_k{k}.csv"))?, &trace)?;
                    }
                }
                Method::L1Iht => {
                    let class = ClassParams::new(cfg.eta, k, cfg.r, cfg.p)?;
                    if let Ok(res) = l1_iht_pipeline(&inst.encoder, &inst.y, &class, None, &cfg.options.iht) {
                        write_stage_trace(&out.join(format!("iht_trace_k{k}.json")), &res.trace)?;
                    }
                }
                _ => {}
            }
        }
    }
    write_rows(create(out, "rows.csv")?, &rows)?;
    write_timings(create(out, "timings.csv")?, &rows)?;
    for r in &rows {
        println!(
            "{:<9} k={} status={} exact_by_r={}",
            r.method.tag(),
            r.k,
            r.status.label(),
            r.exact_by_r()
        );
    }
    Ok(status(overrun_fraction(&rows)))
}

fn battery(common: &Common) -> Result<ExitCode> {
    let cfg = common.config()?;
    let out = common.out_dir()?;
    let rows = run_battery(&cfg)?;
    let table = massive_stats(&rows);
    write_rows(create(out, "rows.csv")?, &rows)?;
    write_timings(create(out, "timings.csv")?, &rows)?;
    write_aggregate(create(out, "aggregate.csv")?, &table)?;
    write_aggregate(std::io::stdout(), &table)?;
    Ok(status(overrun_fraction(&rows)))
}

fn phase(common: &Common) -> Result<ExitCode> {
    let cfg = common.config()?;
    if cfg.phase_n == 0 || !(cfg.eta >= 0.0 && cfg.eta < cfg.r) {
        return Err(Error::Config("phase grid needs N >= 1 and 0 <= eta < r".into()));
    }
    let out = common.out_dir()?;
    let trials = common.trials.unwrap_or(20);
    let grids = phase_transition(&cfg, &cfg.methods, trials)?;
    let cells = trials * cfg.phase_n * (cfg.phase_n + 1) / 2;
    let mut worst: f64 = 0.0;
    for g in &grids {
        g.write_files(out)?;
        println!(
            "{}: mean rate {:.4}, timeouts {}, errors {}",
            g.method,
            g.success.iter().flatten().sum::<f64>() / (cells / trials) as f64,
            g.timeouts,
            g.errors
        );
        worst = worst.max(g.timeouts as f64 / cells as f64);
    }
    Ok(status(worst))
}

fn folding(common: &Common, sigma: f64) -> Result<ExitCode> {
    let n = common.n.unwrap_or(100);
    let m = common.m.unwrap_or(40);
    let trials = common.trials.unwrap_or(10_000);
    let seed = common.seed.unwrap_or(TrialConfig::default().seed_base);
    if m == 0 || n == 0 || trials == 0 || !(sigma > 0.0) {
        return Err(Error::Config("folding needs N, m, trials >= 1 and sigma > 0".into()));
    }
    let ratio = noise_folding_check(n, m, sigma, trials, seed)?;
    println!("N={n} m={m} sigma={sigma} trials={trials}");
    println!("ratio {ratio:.6} (expected N/m = {:.6})", n as f64 / m as f64);
    Ok(ExitCode::SUCCESS)
}

fn certify_cmd(common: &Common, beta_samples: usize) -> Result<ExitCode> {
    let cfg = common.config()?;
    if cfg.m == 0 || cfg.m > cfg.n {
        return Err(Error::Config(format!("need 1 <= m <= N, got m={}, N={}", cfg.m, cfg.n)));
    }
    let order = common.k.as_ref().and_then(|k| k.first().copied()).unwrap_or(2);
    let enc = match cfg.ensemble {
        Ensemble::Gaussian => Encoder::<f64>::gaussian(cfg.m, cfg.n, cfg.seed_base)?,
        Ensemble::SubsampledCosine => Encoder::<f64>::subsampled_cosine(cfg.m, cfg.n, cfg.seed_base)?,
    };
    match certify(&enc, order, beta_samples, 200, cfg.seed_base) {
        Ok(cert) => {
            let out = common.out_dir()?;
            serde_json::to_writer_pretty(create(out, "certificate.json")?, &cert)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ Error::Budget { .. }) => {
            eprintln!("{e}");
            Ok(ExitCode::from(3))
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Trial { common, index } => trial(common, *index),
        Command::Battery { common } => battery(common),
        Command::Phase { common } => phase(common),
        Command::Folding { common, sigma } => folding(common, *sigma),
        Command::Certify { common, beta_samples } => certify_cmd(common, *beta_samples),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
