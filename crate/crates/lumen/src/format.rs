//! On-disk formats.
//!
//! Decompositions are plain text: a `shape qi qj qk` header, then one line
//! per rank-1 term holding the `X`, `Y` and `Z` coefficient lists separated
//! by semicolons. Blank lines and `#` comments are ignored.
//!
//! Instances use a small little-endian binary container (magic `LBv1`).
//! The planted indices go to a separate sidecar file so a solver reading
//! the instance cannot see them.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use lumen_core::hashing::JointDistribution;
use lumen_core::instances::{Instance, PlantedLaw, PlantedSidecar, PmVector, Rows};
use lumen_core::{Decomposition, Matrix, Rank1Term, TensorShape};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error("not an LBv1 file (magic {0:?})")]
    Magic([u8; 4]),
    #[error("corrupt instance: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Core(#[from] lumen_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn text_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Text { line, msg: msg.into() }
}

fn write_list(out: &mut String, v: &[f64]) {
    let parts: Vec<String> = v.iter().map(|c| format!("{c}")).collect();
    out.push_str(&parts.join(" "));
}

/// Renders a decomposition. Coefficients use the shortest representation
/// that parses back to the same `f64`, so a round trip is exact.
pub fn decomposition_to_text(d: &Decomposition) -> String {
    let s = d.shape();
    let mut out = format!("shape {} {} {}\n", s.qi, s.qj, s.qk);
    for t in d.terms() {
        write_list(&mut out, &t.alpha);
        out.push_str(" ; ");
        write_list(&mut out, &t.beta);
        out.push_str(" ; ");
        write_list(&mut out, &t.gamma);
        out.push('\n');
    }
    out
}

fn parse_list(line: usize, s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| text_err(line, format!("bad coefficient {t:?}: {e}"))))
        .collect()
}

pub fn decomposition_from_text(text: &str) -> Result<Decomposition> {
    let mut shape = None;
    let mut terms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some(s) = shape else {
            let f: Vec<&str> = body.split_whitespace().collect();
            if f.len() != 4 || f[0] != "shape" {
                return Err(text_err(line, "expected header `shape qi qj qk`"));
            }
            let dims: Vec<usize> = f[1..]
                .iter()
                .map(|v| v.parse().map_err(|_| text_err(line, format!("bad dimension {v:?}"))))
                .collect::<Result<_>>()?;
            shape = Some(TensorShape::new(dims[0], dims[1], dims[2])?);
            continue;
        };
        let parts: Vec<&str> = body.split(';').collect();
        if parts.len() != 3 {
            return Err(text_err(line, format!("expected 3 semicolon-separated lists, found {}", parts.len())));
        }
        let (a, b, g) = (parse_list(line, parts[0])?, parse_list(line, parts[1])?, parse_list(line, parts[2])?);
        let want = (s.x_len(), s.y_len(), s.z_len());
        if (a.len(), b.len(), g.len()) != want {
            return Err(text_err(
                line,
                format!("term has lengths ({}, {}, {}), shape needs {want:?}", a.len(), b.len(), g.len()),
            ));
        }
        terms.push(Rank1Term::new(a, b, g));
    }
    let shape = shape.ok_or_else(|| text_err(0, "missing `shape` header"))?;
    Ok(Decomposition::new(shape, terms)?)
}

pub const MAGIC: [u8; 4] = *b"LBv1";
const LAW_RHO: u8 = 0;
const LAW_JOINT: u8 = 1;

/// Header fields, in file order after the magic:
/// `n: u64, d: u64, q: u32, seed: u64, law: u8`, then `rho: f64` or
/// `q*q` entries of `P` as `f64`, row-major.
pub fn write_instance<W: Write>(w: &mut W, inst: &Instance) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&(inst.n as u64).to_le_bytes())?;
    w.write_all(&(inst.d as u64).to_le_bytes())?;
    w.write_all(&(inst.q as u32).to_le_bytes())?;
    w.write_all(&inst.seed.to_le_bytes())?;
    match &inst.law {
        PlantedLaw::Rho(r) => {
            w.write_all(&[LAW_RHO])?;
            w.write_all(&r.to_le_bytes())?;
        }
        PlantedLaw::Joint(p) => {
            w.write_all(&[LAW_JOINT])?;
            for v in p.matrix().data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    for rows in [&inst.x, &inst.y] {
        match rows {
            Rows::Bits(v) => {
                for row in v {
                    for word in row.words() {
                        w.write_all(&word.to_le_bytes())?;
                    }
                }
            }
            Rows::Symbols(v) => {
                for row in v {
                    w.write_all(row)?;
                }
            }
        }
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Corrupt("truncated file".into()),
        _ => FormatError::Io(e),
    })?;
    Ok(buf)
}

fn read_rows<R: Read>(r: &mut R, n: usize, d: usize, q: usize) -> Result<Rows> {
    if q == 2 {
        let words = d.div_ceil(64);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let row = (0..words).map(|_| take::<8, _>(r).map(u64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
            out.push(PmVector::from_words(row, d)?);
        }
        Ok(Rows::Bits(out))
    } else {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = vec![0u8; d];
            r.read_exact(&mut row).map_err(|_| FormatError::Corrupt("truncated payload".into()))?;
            if let Some(bad) = row.iter().find(|&&s| s as usize >= q) {
                return Err(FormatError::Corrupt(format!("symbol {bad} outside [0, {q})")));
            }
            out.push(row);
        }
        Ok(Rows::Symbols(out))
    }
}

pub fn read_instance<R: Read>(r: &mut R) -> Result<Instance> {
    let magic = take::<4, _>(r)?;
    if magic != MAGIC {
        return Err(FormatError::Magic(magic));
    }
    let n = u64::from_le_bytes(take(r)?) as usize;
    let d = u64::from_le_bytes(take(r)?) as usize;
    let q = u32::from_le_bytes(take(r)?) as usize;
    let seed = u64::from_le_bytes(take(r)?);
    if !(2..=256).contains(&q) {
        return Err(FormatError::Corrupt(format!("alphabet size {q}")));
    }
    // sanity cap so a corrupt header cannot ask for terabytes
    let row_bytes = if q == 2 { d.div_ceil(64) * 8 } else { d };
    if n.checked_mul(row_bytes).is_none_or(|b| b > 1 << 36) {
        return Err(FormatError::Corrupt(format!("implausible size n={n}, d={d}")));
    }
    let law = match take::<1, _>(r)?[0] {
        LAW_RHO => PlantedLaw::Rho(f64::from_le_bytes(take(r)?)),
        LAW_JOINT => {
            let v = (0..q * q).map(|_| take::<8, _>(r).map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
            PlantedLaw::Joint(JointDistribution::new(Matrix::from_vec(q, q, v)?)?)
        }
        other => return Err(FormatError::Corrupt(format!("law flag {other}"))),
    };
    let x = read_rows(r, n, d, q)?;
    let y = read_rows(r, n, d, q)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(FormatError::Corrupt("trailing bytes".into()));
    }
    Ok(Instance { n, d, q, x, y, law, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarFile {
    pub i: usize,
    pub j: usize,
}

impl From<PlantedSidecar> for SidecarFile {
    fn from(s: PlantedSidecar) -> Self {
        SidecarFile { i: s.i, j: s.j }
    }
}

/// `instance.lb` -> `instance.lb.planted.json`.
pub fn sidecar_path(instance: &Path) -> PathBuf {
    let mut s = instance.as_os_str().to_owned();
    s.push(".planted.json");
    PathBuf::from(s)
}

pub fn save_instance(path: &Path, inst: &Instance, planted: Option<PlantedSidecar>) -> Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    write_instance(&mut w, inst)?;
    w.flush()?;
    let side = sidecar_path(path);
    match planted {
        Some(p) => fs::write(&side, serde_json::to_string(&SidecarFile::from(p))? + "\n")?,
        None if side.exists() => fs::remove_file(&side)?,
        None => {}
    }
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    read_instance(&mut io::BufReader::new(fs::File::open(path)?))
}

/// The sidecar next to `instance`, if there is one.
pub fn load_sidecar(instance: &Path) -> Result<Option<SidecarFile>> {
    let side = sidecar_path(instance);
    if !side.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(side)?)?))
}
