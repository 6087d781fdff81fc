//! Brute-force certification of small encoders.
//!
//! RIP and NSP constants are computed exactly by enumerating supports (and,
//! for the NSP, sign patterns with one LP each), under explicit budgets.
//! `beta(A)` is estimated by a seeded multistart search and is therefore only
//! an upper bound on the true value.

use itertools::Itertools;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Encoder;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum number of supports `C(N, K)` enumerated by [`rip_constant`].
pub const RIP_SUPPORT_BUDGET: u128 = 1_000_000;
/// Maximum `C(N, k) * 2^k` for [`nsp_constant`].
pub const NSP_LP_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMethod {
    Exact,
    Sampled,
}

/// Constants of an encoder at a given order.
///
/// `rip_delta` is `None` when the restricted isometry inequality cannot hold
/// for any `delta < 1`. The RIP bound uses singular values of column
/// submatrices directly (not their squares).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCertificate {
    pub order: usize,
    pub rip_delta: Option<f64>,
    pub nsp_gamma: f64,
    pub beta_lower: f64,
    /// How `rip_delta` and `nsp_gamma` were obtained.
    pub method: CertMethod,
    /// `beta_lower` always comes from search.
    pub beta_method: CertMethod,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn to_f64_matrix<T: Scalar>(a: &Encoder<T>) -> DMatrix<f64> {
    a.matrix().map(|v| v.as_f64())
}

/// Smallest `delta` with `(1-delta)|z| <= |Az| <= (1+delta)|z|` on all
/// `K`-sparse `z`. Values `>= 1` mean the property fails at this order.
pub fn rip_constant<T: Scalar>(a: &Encoder<T>, order: usize) -> Result<T> {
    let (m, n) = (a.rows(), a.cols());
    if order == 0 || order > m || order > n {
        return Err(Error::Dimension(format!(
            "RIP order must satisfy 1 <= K <= m, got K={order}, m={m}"
        )));
    }
    let needed = binomial(n, order);
    if needed > RIP_SUPPORT_BUDGET {
        return Err(Error::Budget {
            needed,
            limit: RIP_SUPPORT_BUDGET,
        });
    }
    let mat = to_f64_matrix(a);
    let mut delta = 0.0f64;
    for support in (0..n).combinations(order) {
        let sub = mat.select_columns(support.iter());
        let gram = sub.tr_mul(&sub);
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let smax = eig.max().max(0.0).sqrt();
        let smin = eig.min().max(0.0).sqrt();
        delta = delta.max(smax - 1.0).max(1.0 - smin);
    }
    Ok(T::lit(delta))
}

/// Orthonormal basis of `ker A` as columns, in `f64`.
fn kernel_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = smax * 1e-10 * (a.nrows().max(n) as f64);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let dim = n - rank;
    if dim == 0 {
        return DMatrix::zeros(n, 0);
    }
    let eig = SymmetricEigen::new(a.tr_mul(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    eig.eigenvectors.select_columns(order[..dim].iter())
}

/// Exact null space constant
/// `gamma_k = max_{z in ker A, |L| <= k} |z_L|_1 / |z_{L^c}|_1`.
///
/// For each support `L` of size `k` and each sign pattern `s` on it (up to a
/// global flip), an LP maximizes `s^T z_L` over kernel vectors with
/// `|z_{L^c}|_1 <= 1`. Returns `+inf` when some kernel vector lives entirely
/// on `k` coordinates.
pub fn nsp_constant<T: Scalar>(a: &Encoder<T>, k: usize) -> Result<T> {
    let n = a.cols();
    if k == 0 || k >= n {
        return Err(Error::Dimension(format!(
            "NSP order must satisfy 1 <= k < N, got k={k}, N={n}"
        )));
    }
    let mat = to_f64_matrix(a);
    let basis = kernel_basis(&mat);
    let d = basis.ncols();
    if d == 0 {
        return Ok(T::zero());
    }
    let needed = binomial(n, k).saturating_mul(1u128 << k.min(100));
    if needed > NSP_LP_BUDGET {
        return Err(Error::Budget {
            needed,
            limit: NSP_LP_BUDGET,
        });
    }
    let mut gamma = 0.0f64;
    for support in (0..n).combinations(k) {
        let outside: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
        for pattern in 0..(1usize << (k - 1)) {
            let signs: Vec<f64> = (0..k)
                .map(|j| if j > 0 && pattern & (1 << (j - 1)) != 0 { -1.0 } else { 1.0 })
                .collect();
            match nsp_lp(&basis, &support, &signs, &outside)? {
                Some(v) => gamma = gamma.max(v),
                None => return Ok(T::lit(f64::INFINITY)),
            }
        }
    }
    Ok(T::lit(gamma))
}

/// `None` means unbounded.
fn nsp_lp(
    basis: &DMatrix<f64>,
    support: &[usize],
    signs: &[f64],
    outside: &[usize],
) -> Result<Option<f64>> {
    let d = basis.ncols();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let coeffs: Vec<_> = (0..d)
        .map(|j| {
            let obj: f64 = support
                .iter()
                .zip(signs)
                .map(|(&i, &s)| s * basis[(i, j)])
                .sum();
            lp.add_var(obj, (f64::NEG_INFINITY, f64::INFINITY))
        })
        .collect();
    let slacks: Vec<_> = outside
        .iter()
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    for (&i, &t) in outside.iter().zip(&slacks) {
        let mut upper: Vec<_> = coeffs.iter().map(|&c| (c, basis[(i, c.idx())])).collect();
        upper.push((t, -1.0));
        lp.add_constraint(upper.as_slice(), ComparisonOp::Le, 0.0);
        let mut lower: Vec<_> = coeffs.iter().map(|&c| (c, -basis[(i, c.idx())])).collect();
        lower.push((t, -1.0));
        lp.add_constraint(lower.as_slice(), ComparisonOp::Le, 0.0);
    }
    let budget: Vec<_> = slacks.iter().map(|&t| (t, 1.0)).collect();
    lp.add_constraint(budget.as_slice(), ComparisonOp::Le, 1.0);
    match lp.solve() {
        Ok(outcome) => {
            let sol = outcome
                .into_solution()
                .map_err(|_| Error::Numeric("NSP LP interrupted".into()))?;
            Ok(Some(sol.objective().max(0.0)))
        }
        Err(microlp::Error::Unbounded) => Ok(None),
        Err(e) => Err(Error::Numeric(format!("NSP LP failed: {e}"))),
    }
}

/// Search estimate of `beta(A) = min_{|z|=1} max_i |A_i^T z|`.
///
/// Each of `samples` random unit starts (drawn from one seeded stream) is
/// improved by `descent_steps` projected subgradient steps on the sphere; the
/// smallest value seen is returned. Since every value seen is attained, the
/// result is an upper bound on `beta(A)`, and it can only decrease as
/// `samples` grows.
pub fn beta_lower_bound<T: Scalar>(
    a: &Encoder<T>,
    samples: usize,
    descent_steps: usize,
    seed: u64,
) -> Result<T> {
    let mat = to_f64_matrix(a);
    let m = mat.nrows();
    if mat.iter().all(|v| *v == 0.0) {
        return Err(Error::Parameter("beta is undefined for the zero matrix".into()));
    }
    if samples == 0 {
        return Err(Error::Parameter("beta search needs at least one sample".into()));
    }
    let objective = |z: &DVector<f64>| -> (f64, usize, f64) {
        let corr = mat.tr_mul(z);
        let (idx, val) = corr
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        (val, idx, corr[idx].signum())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut z = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let norm = z.norm();
        if norm == 0.0 {
            continue;
        }
        z /= norm;
        let (mut val, mut idx, mut sign) = objective(&z);
        best = best.min(val);
        let step0 = 0.5 * val.max(1e-12);
        for t in 0..descent_steps {
            let mut g = mat.column(idx) * sign;
            let radial = g.dot(&z);
            g -= &z * radial;
            let gn = g.norm();
            if gn < 1e-15 {
                break;
            }
            let step = step0 / ((t + 1) as f64).sqrt();
            z -= g * (step / gn);
            z /= z.norm();
            (val, idx, sign) = objective(&z);
            best = best.min(val);
        }
    }
    Ok(T::lit(best))
}

/// Exact RIP and NSP constants at `order`, plus a sampled `beta`.
pub fn certify<T: Scalar>(
    a: &Encoder<T>,
    order: usize,
    beta_samples: usize,
    beta_steps: usize,
    seed: u64,
) -> Result<MatrixCertificate> {
    let delta = rip_constant(a, order)?.as_f64();
    let gamma = nsp_constant(a, order)?.as_f64();
    let beta = beta_lower_bound(a, beta_samples, beta_steps, seed)?.as_f64();
    Ok(MatrixCertificate {
        order,
        rip_delta: (delta < 1.0).then_some(delta),
        nsp_gamma: gamma,
        beta_lower: beta,
        method: CertMethod::Exact,
        beta_method: CertMethod::Sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn enc(m: usize, n: usize, v: &[f64]) -> Encoder<f64> {
        Encoder::from_row_slice(m, n, v).unwrap()
    }

    #[test]
    fn rip_of_identity_is_zero() {
        let a = Encoder::<f64>::explicit(DMatrix::identity(4, 4)).unwrap();
        assert_relative_eq!(rip_constant(&a, 1).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(rip_constant(&a, 3).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rip_violated_for_stretching_column() {
        let a = enc(1, 1, &[2.0]);
        let d = rip_constant(&a, 1).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-14);
        let cert = certify(&a, 1, 4, 10, 0);
        // N - m = 0, NSP order must be < N: certification reports the order error.
        assert!(cert.is_err());
    }

    #[test]
    fn rip_unit_columns() {
        let s = 1.0 / 2f64.sqrt();
        let a = enc(2, 3, &[1.0, 0.0, s, 0.0, 1.0, s]);
        assert_relative_eq!(rip_constant(&a, 1).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rip_budget_and_order_errors() {
        let a = Encoder::<f64>::gaussian(3, 5, 1).unwrap();
        assert!(matches!(rip_constant(&a, 4), Err(Error::Dimension(_))));
        let big = Encoder::<f64>::gaussian(10, 60, 1).unwrap();
        assert!(matches!(rip_constant(&big, 8), Err(Error::Budget { .. })));
    }

    #[test]
    fn nsp_one_dimensional_kernels() {
        assert_relative_eq!(nsp_constant(&enc(1, 2, &[1.0, 1.0]), 1).unwrap(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(nsp_constant(&enc(1, 2, &[1.0, 2.0]), 1).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn nsp_trivial_kernel() {
        let a = enc(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert_eq!(nsp_constant(&a, 1).unwrap(), 0.0);
    }

    #[test]
    fn nsp_unbounded_when_kernel_is_sparse() {
        // Columns 0 and 1 coincide: (1,-1,0) is in the kernel.
        let a = enc(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(nsp_constant(&a, 2).unwrap().is_infinite());
    }

    #[test]
    fn nsp_matches_kernel_sampling() {
        // Sampled ratios from the kernel can never exceed the exact constant,
        // and the best of many samples gets close to it.
        let a = Encoder::<f64>::gaussian(3, 6, 4).unwrap();
        let gamma = nsp_constant(&a, 1).unwrap();
        let basis = kernel_basis(a.matrix());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut best: f64 = 0.0;
        for _ in 0..20000 {
            let c = DVector::<f64>::from_fn(basis.ncols(), |_, _| StandardNormal.sample(&mut rng));
            let z = &basis * c;
            let l1 = z.abs().sum();
            let top = z.amax();
            best = best.max(top / (l1 - top));
        }
        assert!(best <= gamma + 1e-9);
        assert!(best >= 0.9 * gamma, "best {best} gamma {gamma}");
    }

    #[test]
    fn nsp_scale_invariant() {
        let a = Encoder::<f64>::gaussian(3, 6, 9).unwrap();
        let g1 = nsp_constant(&a, 2).unwrap();
        let g2 = nsp_constant(&a.scaled(-3.5), 2).unwrap();
        assert_relative_eq!(g1, g2, max_relative = 1e-7);
    }

    #[test]
    fn nsp_budget() {
        let a = Encoder::<f64>::gaussian(20, 60, 1).unwrap();
        assert!(matches!(nsp_constant(&a, 6), Err(Error::Budget { .. })));
    }

    #[test]
    fn beta_identity_and_scalar() {
        let id = Encoder::<f64>::explicit(DMatrix::identity(4, 4)).unwrap();
        let b = beta_lower_bound(&id, 50, 2000, 3).unwrap();
        assert!(b >= 0.5 - 1e-12);
        assert!(b <= 0.5 + 2e-3, "{b}");
        let s = enc(1, 1, &[3.0]);
        assert_relative_eq!(beta_lower_bound(&s, 3, 10, 0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_monotone_in_samples() {
        let a = Encoder::<f64>::gaussian(4, 10, 2).unwrap();
        let mut prev = f64::INFINITY;
        for s in [1, 2, 5, 10, 40] {
            let b = beta_lower_bound(&a, s, 100, 77).unwrap();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn rip_monotone_in_order() {
        let a = Encoder::<f64>::gaussian(5, 9, 12).unwrap();
        let mut prev = 0.0;
        for k in 1..=5 {
            let d = rip_constant(&a, k).unwrap();
            assert!(d >= prev - 1e-12);
            prev = d;
        }
    }
}
