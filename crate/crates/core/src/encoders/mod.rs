//! Measurement matrices.
//!
//! Two random ensembles are provided: i.i.d. Gaussian with entry variance
//! `1/m`, and `m` rows of the orthonormal `N`-point DCT-II chosen without
//! replacement and scaled by `sqrt(N/m)`. Both are reproducible from
//! `(m, N, seed)`. Arbitrary matrices enter as [`EncoderKind::Explicit`].

mod certify;
mod io;

pub use certify::{
    beta_lower_bound, certify, nsp_constant, rip_constant, CertMethod, MatrixCertificate,
    NSP_LP_BUDGET, RIP_SUPPORT_BUDGET,
};
pub use io::{read_encoder, write_encoder, EncoderHeader};

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Gaussian,
    SubsampledCosine,
    Explicit,
}

/// An `m x N` measurement matrix together with how it was made.
#[derive(Debug, Clone)]
pub struct Encoder<T: Scalar> {
    matrix: DMatrix<T>,
    kind: EncoderKind,
    seed: u64,
    col_scale: f64,
    row_indices: Option<Vec<usize>>,
    op_norm: OnceLock<T>,
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 || m > n {
        return Err(Error::Dimension(format!(
            "encoder needs 1 <= m <= N, got m={m}, N={n}"
        )));
    }
    Ok(())
}

impl<T: Scalar> Encoder<T> {
    /// Gaussian encoder with entries `N(0, 1/m)`.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        Self::gaussian_scaled(m, n, seed, 1.0 / (m as f64).sqrt())
    }

    pub(crate) fn gaussian_scaled(m: usize, n: usize, seed: u64, col_scale: f64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Row-major draw order so the stream does not depend on storage layout.
        let mut entries = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let v: f64 = rng.sample(StandardNormal);
            entries.push(T::lit(v * col_scale));
        }
        Ok(Self {
            matrix: DMatrix::from_row_slice(m, n, &entries),
            kind: EncoderKind::Gaussian,
            seed,
            col_scale,
            row_indices: None,
            op_norm: OnceLock::new(),
        })
    }

    /// `m` distinct rows of the orthonormal DCT-II, scaled by `sqrt(N/m)`.
    pub fn subsampled_cosine(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        Self::subsampled_cosine_scaled(m, n, seed, (n as f64 / m as f64).sqrt())
    }

    pub(crate) fn subsampled_cosine_scaled(
        m: usize,
        n: usize,
        seed: u64,
        col_scale: f64,
    ) -> Result<Self> {
        check_dims(m, n)?;
        let rows = fisher_yates_prefix(n, m, seed);
        let nf = n as f64;
        let mut matrix = DMatrix::<T>::zeros(m, n);
        for (r, &freq) in rows.iter().enumerate() {
            let alpha = if freq == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for j in 0..n {
                let phase = std::f64::consts::PI * (2.0 * j as f64 + 1.0) * freq as f64 / (2.0 * nf);
                matrix[(r, j)] = T::lit(alpha * phase.cos() * col_scale);
            }
        }
        Ok(Self {
            matrix,
            kind: EncoderKind::SubsampledCosine,
            seed,
            col_scale,
            row_indices: Some(rows),
            op_norm: OnceLock::new(),
        })
    }

    /// Wraps an arbitrary matrix. Any shape with at least one row and column
    /// is accepted; certification routines impose their own limits.
    pub fn explicit(matrix: DMatrix<T>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Dimension("explicit encoder is empty".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("encoder entries must be finite".into()));
        }
        Ok(Self {
            matrix,
            kind: EncoderKind::Explicit,
            seed: 0,
            col_scale: 1.0,
            row_indices: None,
            op_norm: OnceLock::new(),
        })
    }

    pub fn from_row_slice(m: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {m}x{n} matrix, got {}",
                m * n,
                data.len()
            )));
        }
        let data: Vec<T> = data.iter().map(|&v| T::lit(v)).collect();
        Self::explicit(DMatrix::from_row_slice(m, n, &data))
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn col_scale(&self) -> f64 {
        self.col_scale
    }

    /// Selected DCT frequencies, for subsampled cosine encoders.
    pub fn row_indices(&self) -> Option<&[usize]> {
        self.row_indices.as_deref()
    }

    /// Returns `c * A` with the same provenance and an updated scale.
    pub fn scaled(&self, factor: T) -> Self {
        let op_norm = OnceLock::new();
        if let Some(norm) = self.op_norm.get() {
            let _ = op_norm.set(*norm * factor.abs());
        }
        Self {
            matrix: &self.matrix * factor,
            kind: self.kind,
            seed: self.seed,
            col_scale: self.col_scale * factor.as_f64(),
            row_indices: self.row_indices.clone(),
            op_norm,
        }
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        &self.matrix * x
    }

    pub fn apply_transpose(&self, y: &DVector<T>) -> DVector<T> {
        self.matrix.tr_mul(y)
    }

    /// Largest singular value, computed once and cached.
    pub fn operator_norm(&self) -> T {
        *self.op_norm.get_or_init(|| power_iteration_norm(&self.matrix))
    }

    /// The cached operator norm, if it has been computed.
    pub fn cached_operator_norm(&self) -> Option<T> {
        self.op_norm.get().copied()
    }
}

/// Free-function form of [`Encoder::operator_norm`].
pub fn operator_norm<T: Scalar>(a: &Encoder<T>) -> T {
    a.operator_norm()
}

/// Free-function form of [`Encoder::gaussian`].
pub fn gaussian_encoder<T: Scalar>(m: usize, n: usize, seed: u64) -> Result<Encoder<T>> {
    Encoder::gaussian(m, n, seed)
}

/// Free-function form of [`Encoder::subsampled_cosine`].
pub fn subsampled_cosine_encoder<T: Scalar>(m: usize, n: usize, seed: u64) -> Result<Encoder<T>> {
    Encoder::subsampled_cosine(m, n, seed)
}

fn fisher_yates_prefix(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    let mut rows = perm[..m].to_vec();
    rows.sort_unstable();
    rows
}

/// Power iteration on the smaller Gram matrix; the Rayleigh quotient is
/// stopped at a relative change of `1e-14`, which leaves the singular value
/// well inside `1e-10`.
fn power_iteration_norm<T: Scalar>(a: &DMatrix<T>) -> T {
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.tr_mul(a)
    };
    let n = gram.nrows();
    if gram.iter().all(|v| *v == T::zero()) {
        return T::zero();
    }
    // Deterministic, generically non-orthogonal start.
    let mut v = DVector::<T>::from_fn(n, |i, _| T::one() + T::lit(0.01 * (i as f64 + 1.0).sin()));
    v /= v.norm();
    let mut lambda = T::zero();
    let tol = T::lit(1e-14).max(T::eps() * T::lit(4.0));
    for _ in 0..100_000 {
        let w = &gram * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == T::zero() {
            break;
        }
        v = w / wn;
        if (next - lambda).abs() <= tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(T::zero()).sqrt()
}
