//! Binary mode-bank files.
//!
//! Layout (little endian):
//!
//! | offset | type     | field                       |
//! |--------|----------|-----------------------------|
//! | 0      | [u8; 4]  | magic `QMB1`                |
//! | 4      | u32      | format version              |
//! | 8      | u32 × 3  | grid dims                   |
//! | 20     | f64      | grid spacing                |
//! | 28     | u32      | mode count                  |
//! | 32     | u8       | operator variant            |
//! | 33     | …        | per mode: f64 frequency, then `3N` f64 `g` samples (x, y, z blocks, x fastest) |
//!
//! A JSON sidecar (`<file>.json`) carries the medium and the invariant metadata.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dielq_core::lattice::Grid;
use dielq_core::medium::{build_profile, Descriptor, MediumProfile};
use dielq_core::modes::{BankExtent, ModeBank, Variant};
use serde::{Deserialize, Serialize};

use crate::output::{write_atomic, write_json};

pub const MAGIC: [u8; 4] = *b"QMB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 33;

const OFF_VERSION: usize = 4;
const OFF_DIMS: usize = 8;
const OFF_SPACING: usize = 20;
const OFF_COUNT: usize = 28;
const OFF_VARIANT: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum BankFileError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },

    #[error("byte offset {offset}: {msg}")]
    Header { offset: usize, msg: String },

    #[error("truncated at byte offset {offset}: header promises {expected} bytes, file has {found}")]
    Truncated { offset: usize, expected: usize, found: usize },

    #[error("sidecar {path}: {msg}")]
    Sidecar { path: PathBuf, msg: String },

    #[error("bank content rejected: {0}")]
    Content(String),
}

/// Metadata stored next to the binary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub count: usize,
    pub variant: Variant,
    pub medium: Option<Descriptor>,
    pub eps_samples: Option<Vec<f64>>,
    pub mu_medium: Option<Descriptor>,
    pub mu_samples: Option<Vec<f64>>,
    pub complete: bool,
    pub band_top: f64,
    pub gram_defect: f64,
    pub max_residual: f64,
    pub max_divergence: f64,
    pub residuals: Vec<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn u32_of(v: usize, what: &str) -> std::io::Result<u32> {
    u32::try_from(v).map_err(|_| std::io::Error::other(format!("{what} = {v} does not fit the u32 header field")))
}

/// Serializes the binary part of `bank`.
pub fn encode(bank: &ModeBank) -> std::io::Result<Vec<u8>> {
    let grid = bank.grid();
    let n = grid.vector_len();
    let m = bank.len();
    let mut out = Vec::with_capacity(HEADER_LEN + m * (n + 1) * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in grid.dims() {
        out.extend_from_slice(&u32_of(d, "grid dim")?.to_le_bytes());
    }
    out.extend_from_slice(&grid.spacing().to_le_bytes());
    out.extend_from_slice(&u32_of(m, "mode count")?.to_le_bytes());
    out.push(bank.variant().code());
    for (i, w) in bank.frequencies().iter().enumerate() {
        out.extend_from_slice(&w.to_le_bytes());
        for v in bank.mode_g(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn sidecar(bank: &ModeBank) -> Sidecar {
    let medium = bank.medium();
    let grid = bank.grid();
    let report = bank.report();
    let descriptor = medium.descriptor().cloned();
    let mu_descriptor = medium.mu_descriptor().cloned();
    Sidecar {
        format: String::from_utf8_lossy(&MAGIC).into_owned(),
        version: VERSION,
        dims: grid.dims(),
        spacing: grid.spacing(),
        count: bank.len(),
        variant: bank.variant(),
        eps_samples: if descriptor.is_none() { Some(medium.eps().to_vec()) } else { None },
        medium: descriptor,
        mu_samples: if mu_descriptor.is_none() { medium.mu().map(|m| m.to_vec()) } else { None },
        mu_medium: mu_descriptor,
        complete: bank.is_complete(),
        band_top: bank.band_top(),
        gram_defect: report.gram_defect,
        max_residual: report.max_residual(),
        max_divergence: report.max_divergence(),
        residuals: report.residuals.clone(),
    }
}

/// Writes the binary file and its sidecar, each atomically.
pub fn save_bank(bank: &ModeBank, path: &Path) -> std::io::Result<()> {
    write_atomic(path, &encode(bank)?)?;
    write_json(&sidecar_path(path), &sidecar(bank))
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn read_f64(bytes: &[u8], offset: usize) -> f64 {
    f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap())
}

/// Parsed fixed-size header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub count: usize,
    pub variant: Variant,
}

/// Parses and checks the header, including that the body length matches it.
pub fn decode_header(bytes: &[u8]) -> Result<Header, BankFileError> {
    let h = decode_fields(bytes)?;
    check_length(bytes, &h)?;
    Ok(h)
}

fn decode_fields(bytes: &[u8]) -> Result<Header, BankFileError> {
    if bytes.len() < HEADER_LEN {
        return Err(BankFileError::Truncated { offset: bytes.len(), expected: HEADER_LEN, found: bytes.len() });
    }
    if let Some(i) = (0..4).find(|&i| bytes[i] != MAGIC[i]) {
        return Err(BankFileError::Header { offset: i, msg: format!("bad magic {:?}, expected \"QMB1\"", &bytes[..4]) });
    }
    let version = read_u32(bytes, OFF_VERSION);
    if version != VERSION {
        return Err(BankFileError::Header { offset: OFF_VERSION, msg: format!("unsupported version {version}") });
    }
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        *d = read_u32(bytes, OFF_DIMS + 4 * a) as usize;
        if *d == 0 {
            return Err(BankFileError::Header { offset: OFF_DIMS + 4 * a, msg: "zero grid dimension".into() });
        }
    }
    let spacing = read_f64(bytes, OFF_SPACING);
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(BankFileError::Header { offset: OFF_SPACING, msg: format!("invalid spacing {spacing}") });
    }
    let count = read_u32(bytes, OFF_COUNT) as usize;
    let code = bytes[OFF_VARIANT];
    let variant = Variant::from_code(code)
        .ok_or_else(|| BankFileError::Header { offset: OFF_VARIANT, msg: format!("unknown variant code {code}") })?;
    Ok(Header { dims, spacing, count, variant })
}

fn check_length(bytes: &[u8], h: &Header) -> Result<(), BankFileError> {
    let count = h.count;
    let cells = h.dims.iter().product::<usize>();
    let expected = count
        .checked_mul(3 * cells + 1)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| BankFileError::Header { offset: OFF_COUNT, msg: "mode count overflows the file size".into() })?;
    if bytes.len() < expected {
        return Err(BankFileError::Truncated { offset: bytes.len(), expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(BankFileError::Header {
            offset: OFF_COUNT,
            msg: format!("mode count {count} implies {expected} bytes but the file has {}", bytes.len()),
        });
    }
    Ok(())
}

fn sidecar_mismatch(h: &Header, s: &Sidecar) -> Option<(usize, String)> {
    for a in 0..3 {
        if h.dims[a] != s.dims[a] {
            return Some((OFF_DIMS + 4 * a, format!("dims[{a}] = {} but sidecar says {}", h.dims[a], s.dims[a])));
        }
    }
    if h.spacing.to_bits() != s.spacing.to_bits() {
        return Some((OFF_SPACING, format!("spacing {} but sidecar says {}", h.spacing, s.spacing)));
    }
    if h.count != s.count {
        return Some((OFF_COUNT, format!("mode count {} but sidecar says {}", h.count, s.count)));
    }
    if h.variant != s.variant {
        return Some((OFF_VARIANT, format!("variant {:?} but sidecar says {:?}", h.variant, s.variant)));
    }
    None
}

fn rebuild_medium(s: &Sidecar, grid: Grid) -> Result<MediumProfile, String> {
    let mut m = match (&s.medium, &s.eps_samples) {
        (Some(d), _) => build_profile(d, grid).map_err(|e| e.to_string())?,
        (None, Some(eps)) => MediumProfile::from_samples(grid, eps.clone()).map_err(|e| e.to_string())?,
        (None, None) => return Err("neither medium nor eps_samples present".into()),
    };
    if let Some(d) = &s.mu_medium {
        m = m.with_mu(d).map_err(|e| e.to_string())?;
    } else if let Some(mu) = &s.mu_samples {
        m = m.with_mu_samples(mu.clone()).map_err(|e| e.to_string())?;
    }
    Ok(m)
}

/// Reads a bank written by [`save_bank`]; frequencies and fields come back bit-exact.
pub fn load_bank(path: &Path) -> Result<ModeBank, BankFileError> {
    let io = |e: std::io::Error, p: &Path| BankFileError::Io { path: p.to_path_buf(), msg: e.to_string() };
    let bytes = std::fs::read(path).map_err(|e| io(e, path))?;
    let header = decode_fields(&bytes)?;
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| io(e, &side_path))?;
    let side: Sidecar = serde_json::from_str(&text)
        .map_err(|e| BankFileError::Sidecar { path: side_path.clone(), msg: e.to_string() })?;
    if let Some((offset, msg)) = sidecar_mismatch(&header, &side) {
        return Err(BankFileError::Header { offset, msg });
    }
    check_length(&bytes, &header)?;
    let grid = Grid::new(header.dims, header.spacing).map_err(|e| BankFileError::Content(e.to_string()))?;
    let medium = rebuild_medium(&side, grid).map_err(|msg| BankFileError::Sidecar { path: side_path, msg })?;

    let n = grid.vector_len();
    let mut freqs = Vec::with_capacity(header.count);
    let mut g = Vec::with_capacity(header.count * n);
    let mut at = HEADER_LEN;
    for _ in 0..header.count {
        freqs.push(read_f64(&bytes, at));
        at += 8;
        g.extend(bytes[at..at + 8 * n].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
        at += 8 * n;
    }
    let extent = BankExtent { complete: side.complete, band_top: side.band_top };
    ModeBank::from_parts(Arc::new(medium), header.variant, freqs, g, extent).map_err(|e| BankFileError::Content(e.to_string()))
}
