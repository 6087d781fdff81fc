use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Output of any decoder in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult<T: Scalar> {
    pub xstar: DVector<T>,
    pub iterations: usize,
    /// `||A x* - y||_2` in the caller's (unscaled) coordinates.
    pub residual: T,
    pub objective: T,
    pub wall_time_ms: f64,
    pub converged: bool,
    pub method_tag: String,
}

/// Column order of [`DecodeRecord`] rows in CSV output. The decoded vector
/// is only part of the JSON form.
pub const DECODE_RESULT_HEADER: [&str; 6] = [
    "method_tag",
    "iterations",
    "residual",
    "objective",
    "wall_time_ms",
    "converged",
];

/// Serializable form of a [`DecodeResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub method_tag: String,
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
    pub wall_time_ms: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub xstar: Vec<f64>,
}

impl<T: Scalar> DecodeResult<T> {
    pub fn to_record(&self) -> DecodeRecord {
        DecodeRecord {
            method_tag: self.method_tag.clone(),
            iterations: self.iterations,
            residual: self.residual.as_f64(),
            objective: self.objective.as_f64(),
            wall_time_ms: self.wall_time_ms,
            converged: self.converged,
            xstar: self.xstar.iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// The CSV cells in [`DECODE_RESULT_HEADER`] order.
    pub fn csv_fields(&self) -> [String; 6] {
        [
            self.method_tag.clone(),
            self.iterations.to_string(),
            format!("{:e}", self.residual.as_f64()),
            format!("{:e}", self.objective.as_f64()),
            format!("{:.3}", self.wall_time_ms),
            self.converged.to_string(),
        ]
    }
}

impl DecodeRecord {
    pub fn into_result<T: Scalar>(self) -> DecodeResult<T> {
        DecodeResult {
            xstar: DVector::from_iterator(self.xstar.len(), self.xstar.iter().map(|&v| T::lit(v))),
            iterations: self.iterations,
            residual: T::lit(self.residual),
            objective: T::lit(self.objective),
            wall_time_ms: self.wall_time_ms,
            converged: self.converged,
            method_tag: self.method_tag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_keeps_vector() {
        let r = DecodeResult::<f64> {
            xstar: DVector::from_row_slice(&[1.0, -0.25, 0.0]),
            iterations: 7,
            residual: 1e-12,
            objective: 1.25,
            wall_time_ms: 0.5,
            converged: true,
            method_tag: "l1_eq".into(),
        };
        let s = serde_json::to_string(&r.to_record()).unwrap();
        assert!(s.contains("\"method_tag\":\"l1_eq\""));
        let back: DecodeRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back.into_result::<f64>(), r);
        assert_eq!(r.csv_fields().len(), DECODE_RESULT_HEADER.len());
    }
}
