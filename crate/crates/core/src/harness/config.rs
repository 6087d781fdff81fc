use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iht::IhtPipelineOptions;
use crate::l1::{delta_param, ConvexSolveOptions, IRW_DEFAULT_A, IRW_DEFAULT_ITERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    #[serde(alias = "Gaussian")]
    Gaussian,
    #[serde(alias = "SubsampledCosine")]
    SubsampledCosine,
}

/// Decoders the harness can run, identified by their method tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    L1Eq,
    L1Ineq,
    IrwL1,
    SlpCold,
    L1Slp,
    L1Iht,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::L1Eq,
        Method::L1Ineq,
        Method::IrwL1,
        Method::SlpCold,
        Method::L1Slp,
        Method::L1Iht,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::L1Eq => "l1_eq",
            Method::L1Ineq => "l1_ineq",
            Method::IrwL1 => "irw_l1",
            Method::SlpCold => "slp_cold",
            Method::L1Slp => "l1_slp",
            Method::L1Iht => "l1_iht",
        }
    }

    pub fn uses_slp(self) -> bool {
        matches!(self, Method::SlpCold | Method::L1Slp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Options of the reweighted solver and of `l1_ineq`, which share `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrwOptions {
    pub a: f64,
    pub iters: usize,
    /// Residual tolerance; `None` means [`TrialConfig::delta`]'s default.
    pub delta: Option<f64>,
}

impl Default for IrwOptions {
    fn default() -> Self {
        Self {
            a: IRW_DEFAULT_A,
            iters: IRW_DEFAULT_ITERS,
            delta: None,
        }
    }
}

/// Potential and iteration settings for the SLP decoders.
///
/// `r_sp` and `eps` default to `3r/8` and `r/4`, so the potential is flat
/// beyond `5r/8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlpOptions {
    pub r_sp: Option<f64>,
    pub eps: Option<f64>,
    pub lambda: f64,
    pub alpha: f64,
    /// `None` means the smallest admissible value.
    pub omega: Option<f64>,
    pub tol_outer: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_bregman: usize,
    pub max_inner: usize,
}

impl Default for SlpOptions {
    fn default() -> Self {
        Self {
            r_sp: None,
            eps: None,
            lambda: 0.5,
            alpha: 1.1,
            omega: None,
            tol_outer: 1e-6,
            inner_tol: 1e-8,
            max_outer: 2000,
            max_bregman: 200,
            max_inner: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MethodOptions {
    pub convex: ConvexSolveOptions,
    pub irw: IrwOptions,
    pub slp: SlpOptions,
    pub iht: IhtPipelineOptions,
}

/// A battery: every method on `trials_per_cell` seeded trials for each `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub m: usize,
    pub k_list: Vec<usize>,
    pub r: f64,
    pub eta: f64,
    pub p: f64,
    pub ensemble: Ensemble,
    pub trials_per_cell: usize,
    pub methods: Vec<Method>,
    pub seed_base: u64,
    /// Magnitude range of the relevant entries; `None` means
    /// `[r + 0.05, 2 r]`, i.e. `[0.85, 1.6]` for `r = 0.8`.
    pub amp_lo: Option<f64>,
    pub amp_hi: Option<f64>,
    /// Signal dimension for phase-transition grids.
    pub phase_n: usize,
    /// Wall-clock limit per decoder run, in seconds.
    pub timeout_s: f64,
    pub options: MethodOptions,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            n: 100,
            m: 40,
            k_list: (1..=7).collect(),
            r: 0.8,
            eta: 0.75,
            p: 2.0,
            ensemble: Ensemble::Gaussian,
            trials_per_cell: 30,
            methods: Method::ALL.to_vec(),
            seed_base: 20_140_101,
            amp_lo: None,
            amp_hi: None,
            phase_n: 40,
            timeout_s: 60.0,
            options: MethodOptions::default(),
        }
    }
}

impl TrialConfig {
    /// Reads a JSON or TOML file, picking the format by extension and
    /// trying both otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let cfg: Self = match ext {
            "json" => serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            "toml" => toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            _ => serde_json::from_str(&text)
                .or_else(|_| toml::from_str(&text))
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        };
        Ok(cfg)
    }

    pub fn amplitudes(&self) -> (f64, f64) {
        (
            self.amp_lo.unwrap_or(self.r + 0.05),
            self.amp_hi.unwrap_or(2.0 * self.r),
        )
    }

    /// `delta` for `l1_ineq` and `irw_l1`: by default a quarter of
    /// [`delta_param`] at the folded noise level `sigma = eta / sqrt(m)`.
    pub fn delta(&self) -> f64 {
        self.options
            .irw
            .delta
            .unwrap_or_else(|| delta_param(self.eta / (self.m as f64).sqrt(), self.m) / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 || self.m > self.n {
            return bad(format!("need 1 <= m <= N, got m={}, N={}", self.m, self.n));
        }
        if self.k_list.is_empty() {
            return bad("k_list is empty".into());
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0 || k >= self.m) {
            return bad(format!("every k must satisfy 1 <= k < m, got k={k} with m={}", self.m));
        }
        if !(self.r > 0.0 && self.eta >= 0.0 && self.eta < self.r) {
            return bad(format!("need 0 <= eta < r, got eta={}, r={}", self.eta, self.r));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return bad(format!("p must lie in [1, 2], got {}", self.p));
        }
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let (lo, hi) = self.amplitudes();
        if !(lo > self.r && hi >= lo) {
            return bad(format!("amplitude range [{lo}, {hi}] must lie above r={}", self.r));
        }
        if self.phase_n == 0 {
            return bad("phase_n must be positive".into());
        }
        if !(self.timeout_s > 0.0) {
            return bad("timeout_s must be positive".into());
        }
        if !(self.delta() >= 0.0) {
            return bad("delta must be >= 0".into());
        }
        self.options.convex.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
