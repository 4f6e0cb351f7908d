//! Group spec files: a flat key-value text format that pins down one marked
//! group per file. Repeated `generator =` rows hold whitespace-separated
//! integers whose meaning depends on the backend kind, so the files stay
//! diffable and trivially parseable from any language.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fgromov_core::backend::GroupBackend;
use fgromov_core::intlin::IntMatrix;
use fgromov_core::marked::MarkedGroup;
use fgromov_core::{Element, Error, Result};
use num_bigint::BigInt;

/// Parsed spec file, kept close to the text: generator rows stay as the
/// integer lists that appeared in the file so that render/parse round-trips
/// byte for byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpecFile {
    pub name: String,
    pub kind: String,
    pub dimension: Option<usize>,
    pub modulus: Option<u64>,
    pub rank: Option<usize>,
    pub twist_rows: Vec<Vec<i64>>,
    pub generators: Vec<Vec<i64>>,
    pub auto_close: bool,
}

fn malformed(line_no: usize, msg: &str) -> Error {
    Error::Spec(format!("spec file line {line_no}: {msg}"))
}

fn parse_ints(line_no: usize, value: &str) -> Result<Vec<i64>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<i64>()
                .map_err(|_| malformed(line_no, &format!("'{tok}' is not an integer")))
        })
        .collect()
}

impl GroupSpecFile {
    pub fn parse(text: &str) -> Result<GroupSpecFile> {
        let mut name = None;
        let mut kind = None;
        let mut dimension = None;
        let mut modulus = None;
        let mut rank = None;
        let mut twist_rows = Vec::new();
        let mut generators = Vec::new();
        let mut auto_close = false;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| malformed(line_no, "expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "name" => name = Some(value.to_string()),
                "kind" => kind = Some(value.to_string()),
                "dimension" => {
                    dimension = Some(value.parse().map_err(|_| {
                        malformed(line_no, "dimension must be a positive integer")
                    })?)
                }
                "modulus" => {
                    modulus = Some(
                        value
                            .parse()
                            .map_err(|_| malformed(line_no, "modulus must be a positive integer"))?,
                    )
                }
                "rank" => {
                    rank = Some(
                        value
                            .parse()
                            .map_err(|_| malformed(line_no, "rank must be a positive integer"))?,
                    )
                }
                "twist_row" => twist_rows.push(parse_ints(line_no, value)?),
                "generator" => generators.push(parse_ints(line_no, value)?),
                "auto_close" => {
                    auto_close = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(malformed(line_no, "auto_close must be true or false")),
                    }
                }
                other => return Err(malformed(line_no, &format!("unknown key '{other}'"))),
            }
        }

        Ok(GroupSpecFile {
            name: name.ok_or_else(|| Error::Spec("spec file needs a name".into()))?,
            kind: kind.ok_or_else(|| Error::Spec("spec file needs a kind".into()))?,
            dimension,
            modulus,
            rank,
            twist_rows,
            generators,
            auto_close,
        })
    }

    /// Canonical text form; `parse(render(spec)) == spec` exactly.
    pub fn render(&self) -> String {
        let row = |r: &[i64]| r.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        writeln!(out, "name = {}", self.name).unwrap();
        writeln!(out, "kind = {}", self.kind).unwrap();
        if let Some(d) = self.dimension {
            writeln!(out, "dimension = {d}").unwrap();
        }
        if let Some(m) = self.modulus {
            writeln!(out, "modulus = {m}").unwrap();
        }
        if let Some(r) = self.rank {
            writeln!(out, "rank = {r}").unwrap();
        }
        for t in &self.twist_rows {
            writeln!(out, "twist_row = {}", row(t)).unwrap();
        }
        if self.auto_close {
            writeln!(out, "auto_close = true").unwrap();
        }
        for g in &self.generators {
            writeln!(out, "generator = {}", row(g)).unwrap();
        }
        out
    }

    fn backend(&self) -> Result<GroupBackend> {
        let need_dim = || {
            self.dimension
                .ok_or_else(|| Error::Spec(format!("kind {} needs a dimension", self.kind)))
        };
        match self.kind.as_str() {
            "integer_matrix" => Ok(GroupBackend::IntegerMatrix { dim: need_dim()? }),
            "cyclic" => {
                let modulus = self
                    .modulus
                    .ok_or_else(|| Error::Spec("kind cyclic needs a modulus".into()))?;
                Ok(GroupBackend::Cyclic { modulus })
            }
            "free_abelian" => Ok(GroupBackend::FreeAbelian { dim: need_dim()? }),
            "semidirect" => {
                let dim = need_dim()?;
                if self.twist_rows.len() != dim
                    || self.twist_rows.iter().any(|r| r.len() != dim)
                {
                    return Err(Error::Spec(format!(
                        "semidirect twist needs {dim} rows of {dim} integers"
                    )));
                }
                GroupBackend::semidirect(IntMatrix::from_i64_rows(&self.twist_rows))
            }
            "lamplighter" => Ok(GroupBackend::Lamplighter),
            "free_group" => {
                let rank = self
                    .rank
                    .ok_or_else(|| Error::Spec("kind free_group needs a rank".into()))?;
                Ok(GroupBackend::FreeGroup { rank })
            }
            other => Err(Error::Spec(format!("unknown group kind '{other}'"))),
        }
    }

    fn generator_element(&self, backend: &GroupBackend, row: &[i64]) -> Result<Element> {
        let wrong = |want: &str| {
            Error::Spec(format!(
                "generator row [{}] does not fit kind {}: expected {want}",
                row.iter().map(i64::to_string).collect::<Vec<_>>().join(" "),
                self.kind
            ))
        };
        match backend {
            GroupBackend::IntegerMatrix { dim } => {
                if row.len() != dim * dim {
                    return Err(wrong(&format!("{} row-major entries", dim * dim)));
                }
                Ok(Element::Matrix(IntMatrix::from_flat_i64(*dim, row)))
            }
            GroupBackend::Cyclic { modulus } => {
                if row.len() != 1 {
                    return Err(wrong("a single residue"));
                }
                Ok(Element::Cyclic(row[0].rem_euclid(*modulus as i64) as u64))
            }
            GroupBackend::FreeAbelian { dim } => {
                if row.len() != *dim {
                    return Err(wrong(&format!("{dim} coordinates")));
                }
                Ok(Element::Vector(row.to_vec()))
            }
            GroupBackend::SemidirectZByLattice { dim, .. } => {
                if row.len() != dim + 1 {
                    return Err(wrong(&format!("a shift plus {dim} coordinates")));
                }
                Ok(Element::Semidirect {
                    shift: row[0],
                    coords: row[1..].iter().map(|&c| BigInt::from(c)).collect(),
                })
            }
            GroupBackend::Lamplighter => {
                if row.is_empty() {
                    return Err(wrong("a cursor plus strictly increasing lamp positions"));
                }
                let lamps = &row[1..];
                if lamps.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(wrong("strictly increasing lamp positions"));
                }
                Ok(Element::Lamp { cursor: row[0], lamps: lamps.to_vec() })
            }
            GroupBackend::FreeGroup { rank } => {
                if row.iter().any(|&l| l == 0 || l.unsigned_abs() > *rank as u64) {
                    return Err(wrong(&format!("nonzero letters with absolute value <= {rank}")));
                }
                let letters: Vec<i32> = row.iter().map(|&l| l as i32).collect();
                if letters.windows(2).any(|w| w[0] == -w[1]) {
                    return Err(wrong("a freely reduced word"));
                }
                Ok(Element::Word(letters))
            }
        }
    }

    /// Build the marked group. Asymmetric generator lists are rejected
    /// unless `auto_close = true`, in which case the set is closed under
    /// inversion and a warning is returned.
    pub fn to_group(&self) -> Result<(MarkedGroup, Vec<String>)> {
        let backend = self.backend()?;
        if self.generators.is_empty() {
            return Err(Error::EmptyGenerators);
        }
        let gens: Vec<Element> = self
            .generators
            .iter()
            .map(|row| self.generator_element(&backend, row))
            .collect::<Result<_>>()?;
        let mut warnings = Vec::new();
        let group = if self.auto_close {
            let (group, closed) = MarkedGroup::symmetrized(backend, gens)?;
            if closed {
                warnings.push(format!(
                    "generator list of '{}' was not symmetric; closed it under inversion",
                    self.name
                ));
            }
            group
        } else {
            MarkedGroup::new(backend, gens)?
        };
        Ok((group, warnings))
    }
}

/// Load a spec file and build its group.
pub fn parse_group_spec(path: &Path) -> Result<(GroupSpecFile, MarkedGroup, Vec<String>)> {
    let text = fs::read_to_string(path)?;
    let spec = GroupSpecFile::parse(&text)?;
    let (group, warnings) = spec.to_group()?;
    Ok((spec, group, warnings))
}

/// Render an element in the same integer-row encoding the spec files use,
/// so report entries can be parsed back and re-verified.
pub fn render_element(e: &Element) -> String {
    let join_i64 = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    match e {
        Element::Matrix(m) => m
            .entries
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        Element::Cyclic(v) => v.to_string(),
        Element::Vector(v) => join_i64(v),
        Element::Semidirect { shift, coords } => {
            let mut parts = vec![shift.to_string()];
            parts.extend(coords.iter().map(|c| c.to_string()));
            parts.join(" ")
        }
        Element::Lamp { cursor, lamps } => {
            let mut parts = vec![cursor.to_string()];
            parts.extend(lamps.iter().map(i64::to_string));
            parts.join(" ")
        }
        Element::Word(w) => w.iter().map(i32::to_string).collect::<Vec<_>>().join(" "),
    }
}

/// Inverse of [`render_element`] for a given backend. Matrix entries may
/// exceed i64 in deep traces, so those parse through big integers.
pub fn parse_element(backend: &GroupBackend, text: &str) -> Result<Element> {
    let bad = |msg: &str| Error::Spec(format!("element '{text}': {msg}"));
    if let GroupBackend::IntegerMatrix { dim } = backend {
        let entries: Vec<BigInt> = text
            .split_whitespace()
            .map(|t| t.parse::<BigInt>().map_err(|_| bad("non-integer entry")))
            .collect::<Result<_>>()?;
        if entries.len() != dim * dim {
            return Err(bad(&format!("expected {} entries", dim * dim)));
        }
        let mut m = IntMatrix::zero(*dim);
        for (k, v) in entries.into_iter().enumerate() {
            *m.at_mut(k / dim, k % dim) = v;
        }
        return Ok(Element::Matrix(m));
    }
    if let GroupBackend::SemidirectZByLattice { dim, .. } = backend {
        let mut toks = text.split_whitespace();
        let shift = toks
            .next()
            .ok_or_else(|| bad("missing shift"))?
            .parse::<i64>()
            .map_err(|_| bad("non-integer shift"))?;
        let coords: Vec<BigInt> = toks
            .map(|t| t.parse::<BigInt>().map_err(|_| bad("non-integer coordinate")))
            .collect::<Result<_>>()?;
        if coords.len() != *dim {
            return Err(bad(&format!("expected {dim} coordinates")));
        }
        return Ok(Element::Semidirect { shift, coords });
    }
    let ints: Vec<i64> = text
        .split_whitespace()
        .map(|t| t.parse::<i64>().map_err(|_| bad("non-integer entry")))
        .collect::<Result<_>>()?;
    match backend {
        GroupBackend::Cyclic { modulus } => {
            if ints.len() != 1 {
                return Err(bad("expected a single residue"));
            }
            Ok(Element::Cyclic(ints[0].rem_euclid(*modulus as i64) as u64))
        }
        GroupBackend::FreeAbelian { dim } => {
            if ints.len() != *dim {
                return Err(bad(&format!("expected {dim} coordinates")));
            }
            Ok(Element::Vector(ints))
        }
        GroupBackend::Lamplighter => {
            if ints.is_empty() {
                return Err(bad("expected a cursor"));
            }
            Ok(Element::Lamp { cursor: ints[0], lamps: ints[1..].to_vec() })
        }
        GroupBackend::FreeGroup { .. } => {
            Ok(Element::Word(ints.iter().map(|&l| l as i32).collect()))
        }
        _ => unreachable!("matrix and semidirect handled above"),
    }
}

/// Parse a plain integer matrix file: one row per line, `#` comments.
pub fn parse_matrix_file(path: &Path) -> Result<IntMatrix> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows.push(parse_ints(i + 1, line)?);
    }
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Spec("matrix file must hold a nonempty square matrix".into()));
    }
    Ok(IntMatrix::from_i64_rows(&rows))
}
