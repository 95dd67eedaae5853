use std::fmt;
use std::str::FromStr;

use half::f16;

use crate::error::{Error, Result};

/// Storage precision for each embedding dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantScheme {
    F32,
    F16,
    /// Per-vector affine 8-bit codes with an f32 scale/offset pair.
    U8,
}

impl QuantScheme {
    pub fn bytes_per_dim(self) -> usize {
        match self {
            QuantScheme::F32 => 4,
            QuantScheme::F16 => 2,
            QuantScheme::U8 => 1,
        }
    }

    /// Extra bytes per stored vector (the U8 scale/offset pair).
    pub fn side_bytes(self) -> usize {
        match self {
            QuantScheme::U8 => 8,
            _ => 0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            QuantScheme::F32 => 0,
            QuantScheme::F16 => 1,
            QuantScheme::U8 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(QuantScheme::F32),
            1 => Ok(QuantScheme::F16),
            2 => Ok(QuantScheme::U8),
            _ => Err(Error::Format(format!("unknown quantization scheme {code}"))),
        }
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantScheme::F32 => "f32",
            QuantScheme::F16 => "f16",
            QuantScheme::U8 => "u8",
        })
    }
}

impl FromStr for QuantScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(QuantScheme::F32),
            "f16" => Ok(QuantScheme::F16),
            "u8" => Ok(QuantScheme::U8),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub scale: f32,
    pub offset: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub codes: Vec<u8>,
    pub affine: Option<Affine>,
}

pub fn quantize(v: &[f32], scheme: QuantScheme) -> Result<Quantized> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("embedding".into()));
    }
    Ok(match scheme {
        QuantScheme::F32 => Quantized {
            codes: v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            affine: None,
        },
        QuantScheme::F16 => Quantized {
            codes: v.iter().flat_map(|&x| f16::from_f32(x).to_le_bytes()).collect(),
            affine: None,
        },
        QuantScheme::U8 => {
            let min = v.iter().copied().fold(f32::INFINITY, f32::min);
            let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let (lo, hi) = if v.is_empty() { (0.0, 0.0) } else { (min, max) };
            let range = hi as f64 - lo as f64;
            let scale = if range > 0.0 { (range / 255.0) as f32 } else { 1.0 };
            let codes = v
                .iter()
                .map(|&x| {
                    if range > 0.0 {
                        // (x - offset) / scale with the exact scale; f64::round is half-away-from-zero
                        (255.0 * (x as f64 - lo as f64) / range).round().clamp(0.0, 255.0) as u8
                    } else {
                        0
                    }
                })
                .collect();
            Quantized {
                codes,
                affine: Some(Affine { scale, offset: lo }),
            }
        }
    })
}

pub fn dequantize(q: &Quantized, scheme: QuantScheme) -> Result<Vec<f32>> {
    match scheme {
        QuantScheme::F32 => Ok(q
            .codes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()),
        QuantScheme::F16 => Ok(q
            .codes
            .chunks_exact(2)
            .map(|c| f16::from_le_bytes(c.try_into().expect("2 bytes")).to_f32())
            .collect()),
        QuantScheme::U8 => {
            let a = q
                .affine
                .ok_or_else(|| Error::Format("u8 vector without scale/offset".into()))?;
            Ok(q
                .codes
                .iter()
                .map(|&c| (a.offset as f64 + c as f64 * a.scale as f64) as f32)
                .collect())
        }
    }
}
