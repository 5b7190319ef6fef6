//! Self-describing text format for descriptor and port-Hamiltonian systems.
//!
//! Layout: a header with format version, system kind and dimensions,
//! followed by named dense matrices, one row per line. Scalars are written
//! with the shortest decimal representation that round-trips in double
//! precision, so reading a written file reproduces the matrices exactly.
//!
//! ```text
//! phlqg-system v1
//! kind ph
//! n 3
//! m 1
//! p 1
//! matrix E 3 3
//! 1 0 0
//! 0 1 0
//! 0 0 0
//! ...
//! ```
//!
//! Kind `ph` stores `E J R Q B`; kind `descriptor` stores `E A B C`.

use std::fmt::Write as _;
use std::path::Path;

use crate::model::{assemble, DescriptorSystem, PortHamiltonianDAE};
use crate::{tol, Error, Mat, Result};

/// A system as stored on disk.
#[derive(Debug, Clone)]
pub enum SystemFile {
    PortHamiltonian(PortHamiltonianDAE),
    Descriptor(DescriptorSystem),
}

impl SystemFile {
    /// Dimensions `(n, m, p)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            SystemFile::PortHamiltonian(ph) => (ph.n(), ph.m(), ph.m()),
            SystemFile::Descriptor(d) => (d.n(), d.m(), d.p()),
        }
    }

    /// The underlying descriptor realization (derived for pH systems).
    pub fn descriptor(&self) -> DescriptorSystem {
        match self {
            SystemFile::PortHamiltonian(ph) => ph.descriptor(),
            SystemFile::Descriptor(d) => d.clone(),
        }
    }
}

fn push_matrix(out: &mut String, name: &str, m: &Mat) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Serializes a system to the text format.
pub fn to_string(sys: &SystemFile) -> String {
    let (n, m, p) = sys.dims();
    let mut out = String::new();
    let _ = writeln!(out, "phlqg-system v1");
    match sys {
        SystemFile::PortHamiltonian(ph) => {
            let _ = writeln!(out, "kind ph");
            let _ = writeln!(out, "n {n}");
            let _ = writeln!(out, "m {m}");
            let _ = writeln!(out, "p {p}");
            push_matrix(&mut out, "E", &ph.e);
            push_matrix(&mut out, "J", &ph.j);
            push_matrix(&mut out, "R", &ph.r);
            push_matrix(&mut out, "Q", &ph.q);
            push_matrix(&mut out, "B", &ph.b);
        }
        SystemFile::Descriptor(d) => {
            let _ = writeln!(out, "kind descriptor");
            let _ = writeln!(out, "n {n}");
            let _ = writeln!(out, "m {m}");
            let _ = writeln!(out, "p {p}");
            push_matrix(&mut out, "E", &d.e);
            push_matrix(&mut out, "A", &d.a);
            push_matrix(&mut out, "B", &d.b);
            push_matrix(&mut out, "C", &d.c);
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
        }
    }

    fn next_content(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((no, line)) => {
                    let trimmed = line.trim();
                    if trimmed.is_empty() || trimmed.starts_with('#') {
                        continue;
                    }
                    return Ok((no + 1, trimmed));
                }
                None => return Err(Error::FileFormat("unexpected end of file".into())),
            }
        }
    }
}

fn expect_kv<'a>(lines: &mut Lines<'a>, key: &str) -> Result<&'a str> {
    let (no, line) = lines.next_content()?;
    let mut parts = line.splitn(2, char::is_whitespace);
    let k = parts.next().unwrap_or("");
    if k != key {
        return Err(Error::FileFormat(format!(
            "line {no}: expected `{key} ...`, found `{line}`"
        )));
    }
    parts
        .next()
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::FileFormat(format!("line {no}: `{key}` is missing a value")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::FileFormat(format!("invalid {what}: `{s}`")))
}

fn parse_matrix(lines: &mut Lines<'_>, name: &str, rows: usize, cols: usize) -> Result<Mat> {
    let (no, header) = lines.next_content()?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "matrix" || fields[1] != name {
        return Err(Error::FileFormat(format!(
            "line {no}: expected `matrix {name} {rows} {cols}`, found `{header}`"
        )));
    }
    let got_rows = parse_usize(fields[2], "row count")?;
    let got_cols = parse_usize(fields[3], "column count")?;
    if got_rows != rows || got_cols != cols {
        return Err(Error::FileFormat(format!(
            "line {no}: matrix {name} declared {got_rows}x{got_cols}, expected {rows}x{cols}"
        )));
    }
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        let (no, line) = lines.next_content()?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != cols {
            return Err(Error::FileFormat(format!(
                "line {no}: matrix {name} row {i} has {} entries, expected {cols}",
                vals.len()
            )));
        }
        for (j, v) in vals.iter().enumerate() {
            m[(i, j)] = v
                .parse()
                .map_err(|_| Error::FileFormat(format!("line {no}: invalid scalar `{v}`")))?;
        }
    }
    Ok(m)
}

/// Parses a system from the text format. Port-Hamiltonian systems are
/// re-validated on read.
pub fn from_str(text: &str) -> Result<SystemFile> {
    let mut lines = Lines::new(text);
    let (no, magic) = lines.next_content()?;
    if magic != "phlqg-system v1" {
        return Err(Error::FileFormat(format!(
            "line {no}: unsupported header `{magic}`"
        )));
    }
    let kind = expect_kv(&mut lines, "kind")?.to_string();
    let n = parse_usize(expect_kv(&mut lines, "n")?, "n")?;
    let m = parse_usize(expect_kv(&mut lines, "m")?, "m")?;
    let p = parse_usize(expect_kv(&mut lines, "p")?, "p")?;
    match kind.as_str() {
        "ph" => {
            if p != m {
                return Err(Error::FileFormat(format!(
                    "port-Hamiltonian systems have p = m, got p = {p}, m = {m}"
                )));
            }
            let e = parse_matrix(&mut lines, "E", n, n)?;
            let j = parse_matrix(&mut lines, "J", n, n)?;
            let r = parse_matrix(&mut lines, "R", n, n)?;
            let q = parse_matrix(&mut lines, "Q", n, n)?;
            let b = parse_matrix(&mut lines, "B", n, m)?;
            Ok(SystemFile::PortHamiltonian(assemble(
                e,
                j,
                r,
                q,
                b,
                tol::STRUCTURE,
            )?))
        }
        "descriptor" => {
            let e = parse_matrix(&mut lines, "E", n, n)?;
            let a = parse_matrix(&mut lines, "A", n, n)?;
            let b = parse_matrix(&mut lines, "B", n, m)?;
            let c = parse_matrix(&mut lines, "C", p, n)?;
            Ok(SystemFile::Descriptor(DescriptorSystem::new(e, a, b, c)?))
        }
        other => Err(Error::FileFormat(format!("unknown kind `{other}`"))),
    }
}

/// Writes a system file to disk.
pub fn write_system(path: &Path, sys: &SystemFile) -> Result<()> {
    std::fs::write(path, to_string(sys))?;
    Ok(())
}

/// Reads a system file from disk.
pub fn read_system(path: &Path) -> Result<SystemFile> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ph_round_trip_is_exact() {
        let e = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let j = Mat::from_row_slice(2, 2, &[0.0, 0.1 + 0.2, -(0.1 + 0.2), 0.0]);
        let r = Mat::from_row_slice(2, 2, &[2.0 / 3.0, 0.0, 0.0, 1e-17]);
        let q = Mat::identity(2, 2);
        let b = Mat::from_column_slice(2, 1, &[std::f64::consts::PI, -1.25e-8]);
        let ph = assemble(e, j, r, q, b, tol::STRUCTURE).unwrap();
        let text = to_string(&SystemFile::PortHamiltonian(ph.clone()));
        let back = from_str(&text).unwrap();
        match back {
            SystemFile::PortHamiltonian(ph2) => {
                assert_eq!(ph.e, ph2.e);
                assert_eq!(ph.j, ph2.j);
                assert_eq!(ph.r, ph2.r);
                assert_eq!(ph.q, ph2.q);
                assert_eq!(ph.b, ph2.b);
            }
            _ => panic!("expected ph kind"),
        }
    }

    #[test]
    fn descriptor_round_trip_is_exact() {
        let d = DescriptorSystem::new(
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[-1.0, 1.0 / 3.0, 0.0, -2.0]),
            Mat::from_column_slice(2, 1, &[1.0, 0.0]),
            Mat::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        let text = to_string(&SystemFile::Descriptor(d.clone()));
        match from_str(&text).unwrap() {
            SystemFile::Descriptor(d2) => {
                assert_eq!(d.e, d2.e);
                assert_eq!(d.a, d2.a);
                assert_eq!(d.b, d2.b);
                assert_eq!(d.c, d2.c);
            }
            _ => panic!("expected descriptor kind"),
        }
    }

    #[test]
    fn rejects_malformed_header() {
        assert!(matches!(from_str("bogus"), Err(Error::FileFormat(_))));
    }
}
