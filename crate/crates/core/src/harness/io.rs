//! Line-delimited JSON transform files.
//!
//! The first line is a header `{"n", "family", "global_scale_log2", "factors"}`
//! with the scale written as an exact rational `"a/b"`. Each following line
//! is one factor in application order. Working-precision coefficients are
//! hex floats so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{Coeff, Factor, Family, Scale, ShearSide, TransformChain};
use crate::scalar::Real;
use crate::sopot::SopotValue;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n: usize,
    family: String,
    global_scale_log2: String,
    factors: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum CoeffRecord {
    Raw(String),
    Sopot(SopotValue),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum ScaleRecord {
    Raw(String),
    Pow2 { negative: bool, exp: i32 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum FactorRecord {
    B { i: usize, j: usize, variant: u8 },
    O { i: usize, j: usize, variant: u8 },
    Hadamard4 { idx: [usize; 4], variant: u16 },
    MStage { pairs: Vec<(usize, usize)>, variants: Vec<u8> },
    Shear { i: usize, j: usize, side: String, coeff: CoeffRecord },
    Scaling { i: usize, scale: ScaleRecord },
}

/// `f64` as a C99-style hex float, e.g. `0x1.8p+1` for `3`.
pub fn format_hex_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let mut out = format!("{sign}0x{lead}");
    if !digits.is_empty() {
        let _ = write!(out, ".{digits}");
    }
    let _ = write!(out, "p{exp:+}");
    out
}

/// Inverse of [`format_hex_f64`]; also accepts fewer mantissa digits.
pub fn parse_hex_f64(s: &str) -> Option<f64> {
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x")?;
    let (mant_str, exp_str) = rest.split_once('p')?;
    let exp: i64 = exp_str.parse().ok()?;
    let (lead, frac) = match mant_str.split_once('.') {
        Some((l, f)) => (l, f),
        None => (mant_str, ""),
    };
    if frac.len() > 13 {
        return None;
    }
    let lead = match lead {
        "0" => 0u64,
        "1" => 1u64,
        _ => return None,
    };
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).ok()? << (4 * (13 - frac.len()))
    };
    let bits = match lead {
        0 if frac_bits == 0 => 0,
        0 if exp == -1022 => frac_bits,
        1 if (-1022..=1023).contains(&exp) => ((exp + 1023) as u64) << 52 | frac_bits,
        _ => return None,
    };
    let v = f64::from_bits(bits);
    Some(if neg { -v } else { v })
}

fn hex<T: Real>(v: T) -> String {
    format_hex_f64(v.to_f64_lossy())
}

fn unhex<T: Real>(s: &str, line: usize) -> Result<T> {
    parse_hex_f64(s).map(T::lit).ok_or_else(|| Error::Parse {
        line,
        message: format!("invalid hex float `{s}`"),
    })
}

fn to_record<T: Real>(f: &Factor<T>) -> FactorRecord {
    match f.clone() {
        Factor::B { i, j, variant } => FactorRecord::B { i, j, variant },
        Factor::O { i, j, variant } => FactorRecord::O { i, j, variant },
        Factor::Hadamard4 { idx, variant } => FactorRecord::Hadamard4 { idx, variant },
        Factor::MStage { pairs, variants } => FactorRecord::MStage { pairs, variants },
        Factor::Shear { i, j, side, coeff } => FactorRecord::Shear {
            i,
            j,
            side: side.as_str().to_string(),
            coeff: match coeff {
                Coeff::Raw(v) => CoeffRecord::Raw(hex(v)),
                Coeff::Sopot(s) => CoeffRecord::Sopot(s),
            },
        },
        Factor::Scaling { i, scale } => FactorRecord::Scaling {
            i,
            scale: match scale {
                Scale::Raw(v) => ScaleRecord::Raw(hex(v)),
                Scale::Pow2 { negative, exp } => ScaleRecord::Pow2 { negative, exp },
            },
        },
    }
}

fn from_record<T: Real>(r: FactorRecord, line: usize) -> Result<Factor<T>> {
    Ok(match r {
        FactorRecord::B { i, j, variant } => Factor::B { i, j, variant },
        FactorRecord::O { i, j, variant } => Factor::O { i, j, variant },
        FactorRecord::Hadamard4 { idx, variant } => Factor::Hadamard4 { idx, variant },
        FactorRecord::MStage { pairs, variants } => Factor::MStage { pairs, variants },
        FactorRecord::Shear { i, j, side, coeff } => Factor::Shear {
            i,
            j,
            side: side.parse::<ShearSide>().map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?,
            coeff: match coeff {
                CoeffRecord::Raw(s) => Coeff::Raw(unhex(&s, line)?),
                CoeffRecord::Sopot(s) => Coeff::Sopot(s),
            },
        },
        FactorRecord::Scaling { i, scale } => Factor::Scaling {
            i,
            scale: match scale {
                ScaleRecord::Raw(s) => Scale::Raw(unhex(&s, line)?),
                ScaleRecord::Pow2 { negative, exp } => Scale::Pow2 { negative, exp },
            },
        },
    })
}

pub fn write_chain<T: Real, W: Write>(chain: &TransformChain<T>, mut w: W) -> Result<()> {
    let g = chain.global_scale_log2();
    let header = Header {
        n: chain.n(),
        family: chain.family().as_str().to_string(),
        global_scale_log2: format!("{}/{}", g.numer(), g.denom()),
        factors: chain.len(),
    };
    let json = |e: serde_json::Error| Error::Io(e.into());
    writeln!(w, "{}", serde_json::to_string(&header).map_err(json)?)?;
    for f in chain.factors() {
        writeln!(w, "{}", serde_json::to_string(&to_record(f)).map_err(json)?)?;
    }
    Ok(())
}

fn parse_rational(s: &str, line: usize) -> Result<Rational64> {
    let bad = || Error::Parse {
        line,
        message: format!("invalid rational `{s}`"),
    };
    let (a, b) = s.split_once('/').unwrap_or((s, "1"));
    let a: i64 = a.trim().parse().map_err(|_| bad())?;
    let b: i64 = b.trim().parse().map_err(|_| bad())?;
    if b == 0 {
        return Err(bad());
    }
    Ok(Rational64::new(a, b))
}

pub fn read_chain<T: Real, R: BufRead>(r: R) -> Result<TransformChain<T>> {
    let mut lines = r.lines().enumerate().map(|(k, l)| (k + 1, l));
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let (line, text) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header record".into()))?;
    let header: Header = serde_json::from_str(&text?).map_err(|e| parse_err(line, e.to_string()))?;
    let family: Family = header.family.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
    let g = parse_rational(&header.global_scale_log2, line)?;
    let mut factors = Vec::with_capacity(header.factors);
    let mut last = line;
    for (line, text) in lines {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        if factors.len() == header.factors {
            return Err(parse_err(line, format!("more than the {} declared factors", header.factors)));
        }
        let rec: FactorRecord = serde_json::from_str(&text).map_err(|e| parse_err(line, e.to_string()))?;
        factors.push(from_record(rec, line)?);
        last = line;
    }
    if factors.len() < header.factors {
        return Err(parse_err(
            last + 1,
            format!("expected {} factors, file ends after {}", header.factors, factors.len()),
        ));
    }
    TransformChain::new(header.n, family, factors, g).map_err(|e| parse_err(last, e.to_string()))
}

pub fn save_chain<T: Real>(chain: &TransformChain<T>, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_chain(chain, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_chain<T: Real>(path: &Path) -> Result<TransformChain<T>> {
    read_chain(std::io::BufReader::new(std::fs::File::open(path)?))
}
