//! Log-barrier interior point method for the support-restricted QCQP
//!
//! ```text
//! min  1/2 z^T A^T A z - y^T A z
//! s.t. |z off L|_2^2 <= (N - |L|)^(1 - 2/p) eta^2
//!      s_i z_i >= r          for i in L
//! ```
//!
//! Computations run in `f64` regardless of the caller's scalar type.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Barrier schedule and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcqpControls {
    /// Initial barrier weight.
    pub t0: f64,
    /// Factor the barrier weight grows by after each centering.
    pub growth: f64,
    /// Stop once the duality measure `#constraints / t` is below this.
    pub duality_tol: f64,
    /// Allowed constraint violation of the returned point.
    pub feas_tol: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    /// Newton steps allowed over the whole run.
    pub max_newton: usize,
}

impl Default for QcqpControls {
    fn default() -> Self {
        Self {
            t0: 1.0,
            growth: 20.0,
            duality_tol: 1e-8,
            feas_tol: 1e-8,
            newton_tol: 1e-10,
            max_newton: 2000,
        }
    }
}

/// Correction problem on a fixed support `L` with prescribed signs.
#[derive(Debug, Clone)]
pub struct QcqpProblem {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub support: Vec<usize>,
    /// `+1` or `-1` for each entry of `support`.
    pub signs: Vec<f64>,
    pub eta: f64,
    pub r: f64,
    pub p: f64,
    pub controls: QcqpControls,
}

/// Minimizer of a [`QcqpProblem`] with its certificate data.
#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub z: DVector<f64>,
    /// `1/2 ||Az - y||^2`.
    pub objective: f64,
    /// Final `#constraints / t`.
    pub duality_gap: f64,
    pub newton_steps: usize,
    /// Multiplier of the tail constraint (zero when it was eliminated).
    pub tail_multiplier: f64,
    /// Multipliers of the sign constraints, in support order.
    pub sign_multipliers: Vec<f64>,
    /// Sup norm of the Lagrangian gradient over the free coordinates.
    pub kkt_residual: f64,
}

impl QcqpProblem {
    /// Builds the problem from an encoder of any scalar type. `signs` are
    /// taken from `sign_source` on `support`.
    pub fn new<T: Scalar>(
        a: &Encoder<T>,
        y: &DVector<T>,
        support: &[usize],
        sign_source: &DVector<T>,
        eta: f64,
        r: f64,
        p: f64,
    ) -> Result<Self> {
        let signs = support
            .iter()
            .map(|&i| if sign_source[i] >= T::zero() { 1.0 } else { -1.0 })
            .collect();
        let prob = Self {
            a: a.matrix().map(|v| v.as_f64()),
            y: y.map(|v| v.as_f64()),
            support: support.to_vec(),
            signs,
            eta,
            r,
            p,
            controls: QcqpControls::default(),
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.ncols();
        if self.y.len() != self.a.nrows() {
            return Err(Error::Dimension(format!(
                "A has {} rows but y has {} entries",
                self.a.nrows(),
                self.y.len()
            )));
        }
        if self.support.is_empty() {
            return Err(Error::Precondition("correction needs a nonempty support".into()));
        }
        if self.support.len() != self.signs.len() {
            return Err(Error::Dimension("one sign per support index is required".into()));
        }
        let mut seen = vec![false; n];
        for &i in &self.support {
            if i >= n || seen[i] {
                return Err(Error::Parameter(format!("invalid or repeated support index {i}")));
            }
            seen[i] = true;
        }
        if self.signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Parameter("signs must be +1 or -1".into()));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Parameter(format!("r must be > 0, got {}", self.r)));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(Error::Parameter(format!("p must lie in [1, 2], got {}", self.p)));
        }
        let c = &self.controls;
        if !(c.t0 > 0.0 && c.growth > 1.0 && c.duality_tol > 0.0 && c.feas_tol >= 0.0 && c.newton_tol > 0.0) {
            return Err(Error::Parameter("invalid barrier controls".into()));
        }
        Ok(())
    }

    /// Squared radius of the tail ball, `(N - |L|)^(1 - 2/p) eta^2`.
    pub fn tail_radius_sq(&self) -> f64 {
        let rest = (self.a.ncols() - self.support.len()) as f64;
        if rest == 0.0 {
            return 0.0;
        }
        rest.powf(1.0 - 2.0 / self.p) * self.eta * self.eta
    }

    /// Largest violation of the constraints at `z`.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let on: Vec<bool> = self.on_support();
        let tail: f64 = (0..z.len()).filter(|&i| !on[i]).map(|i| z[i] * z[i]).sum();
        let mut worst = (tail - self.tail_radius_sq()).max(0.0);
        for (&i, &s) in self.support.iter().zip(&self.signs) {
            worst = worst.max(self.r - s * z[i]);
        }
        worst
    }

    fn on_support(&self) -> Vec<bool> {
        let mut on = vec![false; self.a.ncols()];
        for &i in &self.support {
            on[i] = true;
        }
        on
    }
}

/// Squared Newton decrement below which full steps are taken.
const QUADRATIC_REGION: f64 = 0.25;
const MAX_CENTERING_STEPS: usize = 100;

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let n = g.len();
    let ridge = 1e-12 * h.diagonal().amax().max(1.0);
    if let Some(ch) = h.clone().cholesky() {
        return Ok(-ch.solve(g));
    }
    (h + DMatrix::identity(n, n) * ridge)
        .cholesky()
        .map(|ch| -ch.solve(g))
        .ok_or_else(|| Error::Numeric("barrier Hessian is not positive definite".into()))
}

/// Barrier objective in the reduced coordinates `free`.
struct Barrier {
    h0: DMatrix<f64>,
    g0: DVector<f64>,
    /// Positions in the reduced vector of the support entries, with signs.
    sign_pos: Vec<(usize, f64)>,
    /// Positions of the tail entries, empty when the tail is pinned to zero.
    tail_pos: Vec<usize>,
    radius_sq: f64,
    r: f64,
}

impl Barrier {
    fn n_constraints(&self) -> usize {
        self.sign_pos.len() + usize::from(!self.tail_pos.is_empty())
    }

    fn tail_slack(&self, z: &DVector<f64>) -> f64 {
        self.radius_sq - self.tail_pos.iter().map(|&j| z[j] * z[j]).sum::<f64>()
    }

    fn slacks_ok(&self, z: &DVector<f64>) -> bool {
        (self.tail_pos.is_empty() || self.tail_slack(z) > 0.0)
            && self.sign_pos.iter().all(|&(j, s)| s * z[j] - self.r > 0.0)
    }

    fn f0(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h0 * z)) - self.g0.dot(z)
    }

    fn value(&self, z: &DVector<f64>, t: f64) -> f64 {
        let mut v = t * self.f0(z);
        if !self.tail_pos.is_empty() {
            v -= self.tail_slack(z).ln();
        }
        for &(j, s) in &self.sign_pos {
            v -= (s * z[j] - self.r).ln();
        }
        v
    }

    fn grad_hess(&self, z: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let mut g = (&self.h0 * z - &self.g0) * t;
        let mut h = &self.h0 * t;
        if !self.tail_pos.is_empty() {
            let s0 = self.tail_slack(z);
            for &j in &self.tail_pos {
                g[j] += 2.0 * z[j] / s0;
                h[(j, j)] += 2.0 / s0;
            }
            for &j in &self.tail_pos {
                for &l in &self.tail_pos {
                    h[(j, l)] += 4.0 * z[j] * z[l] / (s0 * s0);
                }
            }
        }
        for &(j, s) in &self.sign_pos {
            let sj = s * z[j] - self.r;
            g[j] -= s / sj;
            h[(j, j)] += 1.0 / (sj * sj);
        }
        (g, h)
    }

    /// Multipliers implied by the central path at weight `t`, and the
    /// Lagrangian stationarity residual.
    fn certificate(&self, z: &DVector<f64>, t: f64) -> (f64, Vec<f64>, f64) {
        let mut grad = &self.h0 * z - &self.g0;
        let mut tail_mult = 0.0;
        if !self.tail_pos.is_empty() {
            tail_mult = 1.0 / (t * self.tail_slack(z));
            for &j in &self.tail_pos {
                grad[j] += tail_mult * 2.0 * z[j];
            }
        }
        let mut mults = Vec::with_capacity(self.sign_pos.len());
        for &(j, s) in &self.sign_pos {
            let lam = 1.0 / (t * (s * z[j] - self.r));
            grad[j] -= lam * s;
            mults.push(lam);
        }
        (tail_mult, mults, grad.amax())
    }
}

/// Solves `prob` and returns the minimizer with multipliers and the
/// duality measure reached.
///
/// A strictly feasible start is built directly (zero tail, support entries at
/// `1.5 r` with the prescribed signs). When the tail radius is zero the tail
/// entries are fixed at zero and removed from the problem.
pub fn qcqp_solve(prob: &QcqpProblem) -> Result<QcqpSolution> {
    prob.validate()?;
    let n = prob.a.ncols();
    let on = prob.on_support();
    let radius_sq = prob.tail_radius_sq();
    let mut free: Vec<usize> = prob.support.clone();
    let tail_start = free.len();
    if radius_sq > 0.0 {
        free.extend((0..n).filter(|&i| !on[i]));
    }
    let cols = prob.a.select_columns(&free);
    let barrier = Barrier {
        h0: cols.tr_mul(&cols),
        g0: cols.tr_mul(&prob.y),
        sign_pos: prob.signs.iter().enumerate().map(|(j, &s)| (j, s)).collect(),
        tail_pos: (tail_start..free.len()).collect(),
        radius_sq,
        r: prob.r,
    };

    let mut z = DVector::zeros(free.len());
    for &(j, s) in &barrier.sign_pos {
        z[j] = 1.5 * s * prob.r;
    }
    if !barrier.slacks_ok(&z) {
        return Err(Error::Infeasible(
            "no strictly feasible point for the correction problem; the support or signs are wrong".into(),
        ));
    }

    let ctl = prob.controls;
    let m_c = barrier.n_constraints() as f64;
    let mut t = ctl.t0;
    let mut steps = 0usize;
    loop {
        // Centering: damped Newton far from the center, pure Newton steps
        // once the decrement is small, stopping when it stalls at rounding.
        let mut prev_dec = f64::INFINITY;
        for _ in 0..MAX_CENTERING_STEPS {
            if steps >= ctl.max_newton {
                return Err(Error::Numeric(format!(
                    "barrier method exceeded {} Newton steps",
                    ctl.max_newton
                )));
            }
            let (g, h) = barrier.grad_hess(&z, t);
            let dz = newton_direction(h, &g)?;
            let dec = -g.dot(&dz);
            steps += 1;
            if dec / 2.0 <= ctl.newton_tol || (dec < QUADRATIC_REGION && dec >= prev_dec) {
                break;
            }
            prev_dec = dec;
            if dec < QUADRATIC_REGION {
                let cand = &z + &dz;
                if barrier.slacks_ok(&cand) {
                    z = cand;
                    continue;
                }
            }
            let f_cur = barrier.value(&z, t);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &z + &dz * step;
                if barrier.slacks_ok(&cand) && barrier.value(&cand, t) <= f_cur - 0.25 * step * dec {
                    z = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if m_c / t <= ctl.duality_tol {
            break;
        }
        t *= ctl.growth;
    }

    let (tail_multiplier, sign_multipliers, kkt_residual) = barrier.certificate(&z, t);
    let mut full = DVector::zeros(n);
    for (j, &i) in free.iter().enumerate() {
        full[i] = z[j];
    }
    let violation = prob.max_violation(&full);
    if violation > ctl.feas_tol {
        return Err(Error::Numeric(format!("correction violates its constraints by {violation}")));
    }
    let objective = 0.5 * (&prob.a * &full - &prob.y).norm_squared();
    Ok(QcqpSolution {
        z: full,
        objective,
        duality_gap: m_c / t,
        newton_steps: steps,
        tail_multiplier,
        sign_multipliers,
        kkt_residual,
    })
}

/// The minimizer of `prob`.
pub fn qcqp_correct(prob: &QcqpProblem) -> Result<DVector<f64>> {
    qcqp_solve(prob).map(|s| s.z)
}
