//! `.enc` files: one line of JSON header, then for explicit matrices the
//! `m*N` entries as little-endian `f64`, row-major.
//!
//! Gaussian and subsampled-cosine encoders carry no payload; they are
//! regenerated from `(kind, m, N, seed, col_scale)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ENC_FORMAT: &str = "noisefold-encoder";
pub const ENC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderHeader {
    pub format: String,
    pub version: u32,
    pub kind: EncoderKind,
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub col_scale: f64,
}

impl<T: Scalar> Encoder<T> {
    pub fn header(&self) -> EncoderHeader {
        EncoderHeader {
            format: ENC_FORMAT.to_string(),
            version: ENC_VERSION,
            kind: self.kind,
            m: self.rows(),
            n: self.cols(),
            seed: self.seed,
            col_scale: self.col_scale,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        if self.kind == EncoderKind::Explicit {
            for i in 0..self.rows() {
                for j in 0..self.cols() {
                    w.write_all(&self.matrix[(i, j)].as_f64().to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: EncoderHeader = serde_json::from_str(line.trim_end())?;
        if header.format != ENC_FORMAT || header.version != ENC_VERSION {
            return Err(Error::Format(format!(
                "unsupported encoder file {} v{}",
                header.format, header.version
            )));
        }
        match header.kind {
            EncoderKind::Gaussian => {
                Encoder::gaussian_scaled(header.m, header.n, header.seed, header.col_scale)
            }
            EncoderKind::SubsampledCosine => Encoder::subsampled_cosine_scaled(
                header.m,
                header.n,
                header.seed,
                header.col_scale,
            ),
            EncoderKind::Explicit => {
                let count = header.m * header.n;
                let mut bytes = vec![0u8; count * 8];
                reader.read_exact(&mut bytes).map_err(|e| {
                    Error::Format(format!("payload shorter than {count} f64 values: {e}"))
                })?;
                let mut rest = Vec::new();
                reader.read_to_end(&mut rest)?;
                if !rest.is_empty() {
                    return Err(Error::Format(format!(
                        "{} trailing bytes after payload",
                        rest.len()
                    )));
                }
                let data: Vec<T> = bytes
                    .chunks_exact(8)
                    .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
                    .collect();
                let mut enc = Encoder::explicit(DMatrix::from_row_slice(header.m, header.n, &data))?;
                enc.seed = header.seed;
                enc.col_scale = header.col_scale;
                Ok(enc)
            }
        }
    }
}

pub fn write_encoder<T: Scalar>(enc: &Encoder<T>, path: impl AsRef<Path>) -> Result<()> {
    enc.write_to(BufWriter::new(File::create(path)?))
}

pub fn read_encoder<T: Scalar>(path: impl AsRef<Path>) -> Result<Encoder<T>> {
    Encoder::read_from(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn generated_kinds_have_header_only() {
        let a = Encoder::<f64>::gaussian(3, 7, 99).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"kind\":\"gaussian\""));
        assert!(text.contains("\"N\":7"));
        let b = Encoder::<f64>::read_from(&buf[..]).unwrap();
        assert_eq!(a.matrix(), b.matrix());

        let c = Encoder::<f64>::subsampled_cosine(4, 9, 5).unwrap().scaled(0.5);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let d = Encoder::<f64>::read_from(&buf[..]).unwrap();
        assert_eq!(c.matrix(), d.matrix());
    }

    #[test]
    fn explicit_payload_layout() {
        let a = Encoder::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        let payload = &buf[nl + 1..];
        assert_eq!(payload.len(), 32);
        assert_eq!(&payload[8..16], &2.0f64.to_le_bytes());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let a = Encoder::<f64>::from_row_slice(1, 3, &[1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(Encoder::<f64>::read_from(&buf[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn explicit_roundtrip_is_bit_exact(
            m in 1usize..5, n in 1usize..6,
            vals in proptest::collection::vec(-1e6f64..1e6, 30)
        ) {
            let a = Encoder::<f64>::from_row_slice(m, n, &vals[..m * n]).unwrap();
            let mut buf = Vec::new();
            a.write_to(&mut buf).unwrap();
            let b = Encoder::<f64>::read_from(&buf[..]).unwrap();
            prop_assert_eq!(a.matrix(), b.matrix());
        }
    }
}
