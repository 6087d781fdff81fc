//! The bounded-noise signal class and the support/gap quantities around it.
//!
//! A vector belongs to the class `(eta, k, r, p)` when at most `k` entries
//! exceed `r` in magnitude and the remaining entries have `l_p` norm at most
//! `eta`. The relevant support `S_r(x)` uses a strict inequality.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Absolute slack on the tail-norm comparison in [`class_membership`].
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams<T> {
    pub eta: T,
    pub k: usize,
    pub r: T,
    pub p: T,
}

impl<T: Scalar> ClassParams<T> {
    pub fn new(eta: T, k: usize, r: T, p: T) -> Result<Self> {
        let params = Self { eta, k, r, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= T::zero()) {
            return Err(Error::Parameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.r > self.eta) {
            return Err(Error::Parameter(format!(
                "relevance threshold r={} must exceed eta={}",
                self.r, self.eta
            )));
        }
        check_p(self.p)?;
        Ok(())
    }
}

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if !(p >= T::one() && p <= c(2.0)) {
        return Err(Error::Domain(format!("p must lie in [1, 2], got {p}")));
    }
    Ok(())
}

/// A generated member of the class together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySignal<T: Scalar> {
    pub x: DVector<T>,
    pub params: ClassParams<T>,
    pub relevant_support: Vec<usize>,
    /// Achieved `l_p` norm of the entries outside the relevant support.
    pub noise_norm: T,
}

/// JSON record for a signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub x: Vec<f64>,
    pub params: ClassParams<f64>,
    pub support: Vec<usize>,
    pub noise_norm: f64,
}

impl<T: Scalar> NoisySignal<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn to_record(&self) -> SignalRecord {
        SignalRecord {
            x: self.x.iter().map(|v| v.as_f64()).collect(),
            params: ClassParams {
                eta: self.params.eta.as_f64(),
                k: self.params.k,
                r: self.params.r.as_f64(),
                p: self.params.p.as_f64(),
            },
            support: self.relevant_support.clone(),
            noise_norm: self.noise_norm.as_f64(),
        }
    }

    pub fn from_record(rec: &SignalRecord) -> Result<Self> {
        let x = DVector::from_iterator(rec.x.len(), rec.x.iter().map(|&v| T::lit(v)));
        let params = ClassParams {
            eta: T::lit(rec.params.eta),
            k: rec.params.k,
            r: T::lit(rec.params.r),
            p: T::lit(rec.params.p),
        };
        let support = support_above(&x, params.r);
        if support != rec.support {
            return Err(Error::Format(
                "stored support disagrees with entries above r".into(),
            ));
        }
        let noise_norm = lp_norm_outside(&x, &support, params.p);
        Ok(Self {
            x,
            params,
            relevant_support: support,
            noise_norm,
        })
    }
}

/// `kappa_p(N, k)`: `1` for `p = 1`, else `(N-k)^(1/q)` with `1/p + 1/q = 1`.
pub fn kappa_p<T: Scalar>(n: usize, k: usize, p: T) -> Result<T> {
    check_p(p)?;
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("kappa_p needs 1 <= k < N, got k={k}, N={n}")));
    }
    if p == T::one() {
        return Ok(T::one());
    }
    let inv_q = T::one() - T::one() / p;
    Ok(T::from_usize_(n - k).powf(inv_q))
}

/// `l_p` norm of a slice of values.
pub fn lp_norm<T: Scalar>(values: impl IntoIterator<Item = T>, p: T) -> T {
    if p == T::one() {
        return values.into_iter().map(|v| v.abs()).fold(T::zero(), |a, b| a + b);
    }
    if p == c(2.0) {
        return values
            .into_iter()
            .map(|v| v * v)
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
    }
    values
        .into_iter()
        .map(|v| v.abs().powf(p))
        .fold(T::zero(), |a, b| a + b)
        .powf(T::one() / p)
}

fn lp_norm_outside<T: Scalar>(x: &DVector<T>, support: &[usize], p: T) -> T {
    let mut inside = vec![false; x.len()];
    for &i in support {
        inside[i] = true;
    }
    lp_norm(
        x.iter().zip(&inside).filter(|(_, &s)| !s).map(|(v, _)| *v),
        p,
    )
}

/// `S_r(x) = { i : |x_i| > r }`, ascending.
pub fn support_above<T: Scalar>(x: &DVector<T>, r: T) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > r)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the `k` largest magnitudes; ties go to the lower index.
/// Zero entries are never selected.
pub fn top_k_indices<T: Scalar>(x: &DVector<T>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).filter(|&i| x[i] != T::zero()).collect();
    order.sort_by(|&i, &j| {
        x[j].abs()
            .partial_cmp(&x[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Best `k`-term approximation `x_[k]` and the error `sigma_k(x)_p`.
pub fn best_k_term<T: Scalar>(x: &DVector<T>, k: usize, p: T) -> (DVector<T>, T) {
    let keep = top_k_indices(x, k);
    let mut approx = DVector::zeros(x.len());
    for &i in &keep {
        approx[i] = x[i];
    }
    let sigma = lp_norm_outside(x, &keep, p);
    (approx, sigma)
}

/// Membership in the class described by `params`.
pub fn class_membership<T: Scalar>(x: &DVector<T>, params: &ClassParams<T>) -> bool {
    let support = support_above(x, params.r);
    if support.len() > params.k {
        return false;
    }
    let tail = lp_norm_outside(x, &support, params.p);
    let tol = c::<T>(MEMBERSHIP_TOL) * (T::one() + params.eta);
    tail <= params.eta + tol
}

/// Draws a class member with `kk` relevant entries.
///
/// Relevant positions are uniform without replacement, magnitudes uniform on
/// `[amp_lo, amp_hi]` with random signs. The other entries are i.i.d. standard
/// normal, rescaled so their `l_p` norm is exactly `eta`.
pub fn generate_signal<T: Scalar>(
    n: usize,
    params: &ClassParams<T>,
    kk: usize,
    amp_lo: T,
    amp_hi: T,
    seed: u64,
) -> Result<NoisySignal<T>> {
    params.validate()?;
    if kk > params.k || kk > n {
        return Err(Error::Parameter(format!(
            "requested {kk} relevant entries with k={} and N={n}",
            params.k
        )));
    }
    if !(amp_lo > params.r) {
        return Err(Error::Parameter(format!(
            "amp_lo={amp_lo} must exceed r={}",
            params.r
        )));
    }
    if !(amp_hi >= amp_lo) {
        return Err(Error::Parameter("amp_hi must be >= amp_lo".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..kk {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    let mut support = perm[..kk].to_vec();
    support.sort_unstable();

    let (lo, hi) = (amp_lo.as_f64(), amp_hi.as_f64());
    let mut x = DVector::<T>::zeros(n);
    for &i in &support {
        let mag = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        x[i] = T::lit(sign * mag);
    }
    let mut is_support = vec![false; n];
    for &i in &support {
        is_support[i] = true;
    }
    let noise: Vec<f64> = (0..n)
        .filter(|&i| !is_support[i])
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let p = params.p.as_f64();
    let raw_norm = lp_norm(noise.iter().copied(), p);
    let scale = if raw_norm > 0.0 { params.eta.as_f64() / raw_norm } else { 0.0 };
    for (slot, v) in (0..n).filter(|&i| !is_support[i]).zip(noise) {
        x[slot] = T::lit(v * scale);
    }
    let noise_norm = lp_norm_outside(&x, &support, params.p);
    debug_assert_eq!(support_above(&x, params.r), support);
    Ok(NoisySignal {
        x,
        params: *params,
        relevant_support: support,
        noise_norm,
    })
}

/// Sufficient gap thresholds; `None` where the formula's hypotheses fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapThresholds<T> {
    /// `2(1+gamma_k)/(1-gamma_k) * kappa * eta`, needs `gamma_k < 1`.
    pub r1: Option<T>,
    /// Reweighted-l1 threshold, needs `delta_2k < sqrt(2) - 1`.
    pub r1rew: Option<T>,
    /// `eta (1 + 2 gamma_2k kappa)`, needs `gamma_2k < 1`.
    pub rs: Option<T>,
}

pub fn gap_thresholds<T: Scalar>(
    gamma_k: T,
    gamma_2k: T,
    delta_2k: T,
    kappa: T,
    k: usize,
    eta: T,
) -> GapThresholds<T> {
    let one = T::one();
    let two = c::<T>(2.0);
    let r1 = (gamma_k >= T::zero() && gamma_k < one)
        .then(|| two * (one + gamma_k) / (one - gamma_k) * kappa * eta);
    let sqrt2 = two.sqrt();
    let r1rew = (delta_2k >= T::zero() && delta_2k < sqrt2 - one && k > 0).then(|| {
        c::<T>(9.6) * (one + delta_2k).sqrt() / (one - (sqrt2 + one) * delta_2k)
            * (one + kappa / T::from_usize_(k).sqrt())
            * eta
    });
    let rs = (gamma_2k >= T::zero() && gamma_2k < one).then(|| eta * (one + two * gamma_2k * kappa));
    GapThresholds { r1, r1rew, rs }
}

/// Upper bound on `#(S_r(x) Δ S_r(x'))` for two class members with equal
/// measurements.
pub fn symdiff_bound<T: Scalar>(gamma_2k: T, kappa: T, eta: T, r: T, p: T) -> T {
    (c::<T>(2.0) * gamma_2k * kappa * eta).powf(p) / (r - eta).powf(p)
}

/// Support recovery diagnostics of a decoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub symdiff_count: usize,
    pub exact_by_r: bool,
    pub exact_by_topk: bool,
    pub separation_gap: f64,
    pub err_full: f64,
    pub err_restricted_truth: f64,
    pub err_restricted_decoded: f64,
    pub residual_noise: f64,
}

/// Column order of [`SupportMetrics`] in CSV output.
pub const SUPPORT_METRICS_HEADER: [&str; 8] = [
    "symdiff_count",
    "exact_by_r",
    "exact_by_topk",
    "separation_gap",
    "err_full",
    "err_restricted_truth",
    "err_restricted_decoded",
    "residual_noise",
];

/// Compares a decoded vector with the ground truth.
///
/// The separation gap is `min_{i in S_r(x)} |x*_i| - max_{i notin S_r(x)} |x*_i|`;
/// an empty side contributes `0`.
pub fn support_metrics<T: Scalar>(truth: &NoisySignal<T>, xstar: &DVector<T>) -> Result<SupportMetrics> {
    let x = &truth.x;
    if x.len() != xstar.len() {
        return Err(Error::Dimension(format!(
            "decoded length {} differs from signal length {}",
            xstar.len(),
            x.len()
        )));
    }
    let r = truth.params.r;
    let s_true = &truth.relevant_support;
    let s_dec = support_above(xstar, r);
    let n = x.len();
    let mut in_true = vec![false; n];
    let mut in_dec = vec![false; n];
    s_true.iter().for_each(|&i| in_true[i] = true);
    s_dec.iter().for_each(|&i| in_dec[i] = true);
    let symdiff_count = (0..n).filter(|&i| in_true[i] != in_dec[i]).count();

    let topk = top_k_indices(xstar, s_true.len());
    let min_in = s_true
        .iter()
        .map(|&i| xstar[i].abs().as_f64())
        .fold(f64::INFINITY, f64::min);
    let max_out = (0..n)
        .filter(|&i| !in_true[i])
        .map(|i| xstar[i].abs().as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let min_in = if min_in.is_finite() { min_in } else { 0.0 };
    let max_out = if max_out.is_finite() { max_out } else { 0.0 };

    let diff = x - xstar;
    let norm_over = |mask: &dyn Fn(usize) -> bool, v: &DVector<T>| -> f64 {
        (0..n)
            .filter(|&i| mask(i))
            .map(|i| {
                let d = v[i].as_f64();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    Ok(SupportMetrics {
        symdiff_count,
        exact_by_r: symdiff_count == 0,
        exact_by_topk: topk == *s_true,
        separation_gap: min_in - max_out,
        err_full: norm_over(&|_| true, &diff),
        err_restricted_truth: norm_over(&|i| in_true[i], &diff),
        err_restricted_decoded: norm_over(&|i| in_dec[i], &diff),
        residual_noise: norm_over(&|i| !in_dec[i], xstar),
    })
}
