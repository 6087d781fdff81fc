//! ADMM engine for weighted basis pursuit.
//!
//! The problem `min sum_i w_i |x_i|  s.t. ||Ax - y||_2 <= delta` is split as
//! `min f(z) + g(v)  s.t. x = z, Ax = v`, where `f` is the weighted `l1` norm
//! and `g` the indicator of the ball `B(y, delta)`. The `x` step solves
//! `(I + A^T A) x = b`, which does not depend on the penalty, so the penalty can
//! be rebalanced freely. Every few rounds the current support is polished by
//! a restricted solve and accepted only with a dual certificate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::ConvexSolveOptions;
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Scaled ADMM iterate, reusable as a warm start.
#[derive(Debug, Clone)]
pub(crate) struct AdmmState<T: Scalar> {
    x: DVector<T>,
    z: DVector<T>,
    w: DVector<T>,
    u: DVector<T>,
    v: DVector<T>,
    rho: T,
}

pub(crate) struct Outcome<T: Scalar> {
    pub x: DVector<T>,
    pub iterations: usize,
    pub converged: bool,
    pub state: AdmmState<T>,
}

pub(crate) struct Admm<'a, T: Scalar> {
    a: &'a DMatrix<T>,
    y: &'a DVector<T>,
    delta: T,
    /// Factor of `I + A A^T`.
    chol: Cholesky<T, Dyn>,
}

#[inline]
fn soft<T: Scalar>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

impl<'a, T: Scalar> Admm<'a, T> {
    pub fn new(a: &'a DMatrix<T>, y: &'a DVector<T>, delta: T) -> Result<Self> {
        if y.len() != a.nrows() {
            return Err(Error::Dimension(format!(
                "measurement length {} does not match {} rows",
                y.len(),
                a.nrows()
            )));
        }
        if !(delta >= T::zero()) {
            return Err(Error::Parameter(format!("delta must be >= 0, got {delta}")));
        }
        let m = a.nrows();
        let gram = DMatrix::<T>::identity(m, m) + a * a.transpose();
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Numeric("I + A A^T is not positive definite".into()))?;
        Ok(Self { a, y, delta, chol })
    }

    fn project_ball(&self, q: &DVector<T>) -> DVector<T> {
        if self.delta == T::zero() {
            return self.y.clone();
        }
        let d = q - self.y;
        let n = d.norm();
        if n <= self.delta {
            q.clone()
        } else {
            self.y + d * (self.delta / n)
        }
    }

    fn cold_state(&self, rho: T) -> AdmmState<T> {
        let (m, n) = self.a.shape();
        AdmmState {
            x: DVector::zeros(n),
            z: DVector::zeros(n),
            w: self.project_ball(&DVector::zeros(m)),
            u: DVector::zeros(n),
            v: DVector::zeros(m),
            rho,
        }
    }

    pub fn solve(
        &self,
        weights: &DVector<T>,
        opts: &ConvexSolveOptions,
        warm: Option<AdmmState<T>>,
    ) -> Result<Outcome<T>> {
        let n = self.a.ncols();
        if weights.len() != n {
            return Err(Error::Dimension(format!(
                "{} weights for {} unknowns",
                weights.len(),
                n
            )));
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::Parameter("weights must be finite and positive".into()));
        }
        let a = self.a;
        let ynorm = self.y.norm();
        if ynorm <= self.delta {
            let state = self.cold_state(c(opts.penalty));
            return Ok(Outcome {
                x: DVector::zeros(n),
                iterations: 0,
                converged: true,
                state,
            });
        }
        let mut st = warm.unwrap_or_else(|| self.cold_state(c(opts.penalty)));
        let pri_tol: T = c(opts.primal_tol);
        let dual_tol: T = c(opts.dual_tol);
        let mut iterations = 0;
        let mut last_support: Vec<usize> = Vec::new();

        for round in 0..opts.max_outer {
            let mut r_norm = T::zero();
            let mut s_norm = T::zero();
            for _ in 0..opts.max_inner {
                iterations += 1;
                let b = (&st.z - &st.u) + a.tr_mul(&(&st.w - &st.v));
                let corr = self.chol.solve(&(a * &b));
                st.x = &b - a.tr_mul(&corr);
                let ax = a * &st.x;
                let z_old = std::mem::replace(
                    &mut st.z,
                    DVector::from_fn(n, |i, _| soft(st.x[i] + st.u[i], weights[i] / st.rho)),
                );
                let w_old = std::mem::replace(&mut st.w, self.project_ball(&(&ax + &st.v)));
                let rx = &st.x - &st.z;
                let rw = &ax - &st.w;
                st.u += &rx;
                st.v += &rw;
                r_norm = (rx.norm_squared() + rw.norm_squared()).sqrt();
                s_norm = st.rho * ((&st.z - &z_old) + a.tr_mul(&(&st.w - &w_old))).norm();
            }
            let support: Vec<usize> = (0..n).filter(|&i| st.z[i] != T::zero()).collect();
            if support == last_support || r_norm <= pri_tol {
                if let Some(x) = self.polish(&st, weights, &support, opts) {
                    if opts.verbose {
                        eprintln!("admm: certified after {iterations} iterations, |S| = {}", support.len());
                    }
                    return Ok(Outcome {
                        x,
                        iterations,
                        converged: true,
                        state: st,
                    });
                }
            }
            last_support = support;
            if opts.verbose && round % 50 == 0 {
                eprintln!("admm: it {iterations} r={r_norm} s={s_norm} rho={}", st.rho);
            }
            let ten: T = c(10.0);
            let two: T = c(2.0);
            if r_norm > ten * s_norm {
                st.rho *= two;
                st.u /= two;
                st.v /= two;
            } else if s_norm > ten * r_norm {
                st.rho /= two;
                st.u *= two;
                st.v *= two;
            }
            if r_norm <= pri_tol && s_norm <= dual_tol {
                break;
            }
        }
        let residual = (a * &st.z - self.y).norm();
        let converged = residual <= self.delta + pri_tol;
        Ok(Outcome {
            x: st.z.clone(),
            iterations,
            converged,
            state: st,
        })
    }

    /// Solves the problem restricted to `support` with the signs of the
    /// current `z`, and returns it if a dual certificate confirms optimality.
    fn polish(
        &self,
        st: &AdmmState<T>,
        weights: &DVector<T>,
        support: &[usize],
        opts: &ConvexSolveOptions,
    ) -> Option<DVector<T>> {
        let a = self.a;
        let (m, n) = a.shape();
        let k = support.len();
        if k == 0 || k > m {
            return None;
        }
        let a_s = a.select_columns(support);
        let g = DVector::from_fn(k, |j, _| weights[support[j]] * st.z[support[j]].signum());
        let gram = a_s.tr_mul(&a_s).cholesky()?;
        let x_ls = gram.solve(&a_s.tr_mul(self.y));
        let r_ls = &a_s * &x_ls - self.y;
        let pri_tol: T = c(opts.primal_tol);

        let (x_s, lambda) = if self.delta == T::zero() {
            if r_ls.norm() > pri_tol {
                return None;
            }
            // Closest multiplier to the ADMM estimate that is exact on the support.
            let lambda0 = -&st.v * st.rho;
            let gap = &g - a_s.tr_mul(&lambda0);
            (x_ls, lambda0 + &a_s * gram.solve(&gap))
        } else {
            let slack = self.delta * self.delta - r_ls.norm_squared();
            if !(slack > T::zero()) {
                return None;
            }
            let gg = gram.solve(&g);
            let h = (&a_s * &gg).norm();
            if h == T::zero() {
                return None;
            }
            let t = slack.sqrt() / h;
            let x_s = x_ls - gg * t;
            let resid = self.y - &a_s * &x_s;
            (x_s, resid / t)
        };
        if (0..k).any(|j| !(x_s[j] * g[j] > T::zero())) {
            return None;
        }
        let corr = a.tr_mul(&lambda);
        let dual_bound = T::one() + c::<T>(opts.dual_tol);
        if (0..n).any(|i| !(corr[i].abs() <= dual_bound * weights[i])) {
            return None;
        }
        let mut x = DVector::zeros(n);
        for (j, &i) in support.iter().enumerate() {
            x[i] = x_s[j];
        }
        Some(x)
    }
}
