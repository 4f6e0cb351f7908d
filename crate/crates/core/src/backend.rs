//! Group element representations and the backends that multiply them.
//!
//! A backend is a pure value: it owns the presentation parameters (matrix
//! dimension, modulus, twist matrix, ...) and knows how to multiply, invert
//! and serialize elements. Elements of different backends never mix; every
//! operation checks shape and reports a mismatch instead of panicking.

use crate::error::{Error, Result};
use crate::intlin::IntMatrix;
use crate::key::{self, KeyReader};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Element {
    Matrix(IntMatrix),
    /// Residue in `0..modulus`.
    Cyclic(u64),
    Vector(Vec<i64>),
    /// Pair (shift, lattice coordinates) in Z x_T Z^d.
    Semidirect { shift: i64, coords: Vec<BigInt> },
    /// Wreath element: cursor position plus the sorted set of lit lamps.
    Lamp { cursor: i64, lamps: Vec<i64> },
    /// Freely reduced word; letter k+1 is generator k, negative for inverses.
    Word(Vec<i32>),
}

impl Element {
    /// Unique byte key within one backend; all deterministic orderings use
    /// `(word norm, key)` with keys compared as byte strings.
    pub fn canonical_key(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16);
        match self {
            Element::Matrix(m) => return m.key_bytes(),
            Element::Cyclic(v) => key::push_i64(&mut buf, *v as i64),
            Element::Vector(v) => {
                for &x in v {
                    key::push_i64(&mut buf, x);
                }
            }
            Element::Semidirect { shift, coords } => {
                key::push_i64(&mut buf, *shift);
                for c in coords {
                    key::push_bigint(&mut buf, c);
                }
            }
            Element::Lamp { cursor, lamps } => {
                key::push_i64(&mut buf, *cursor);
                key::push_count(&mut buf, lamps.len());
                for &p in lamps {
                    key::push_i64(&mut buf, p);
                }
            }
            Element::Word(w) => {
                key::push_count(&mut buf, w.len());
                for &l in w {
                    key::push_i64(&mut buf, l as i64);
                }
            }
        }
        buf
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum GroupBackend {
    IntegerMatrix { dim: usize },
    Cyclic { modulus: u64 },
    FreeAbelian { dim: usize },
    SemidirectZByLattice { dim: usize, twist: IntMatrix },
    Lamplighter,
    FreeGroup { rank: usize },
}

impl GroupBackend {
    pub fn semidirect(twist: IntMatrix) -> Result<Self> {
        let det = twist.det();
        if !(det.clone().abs().is_one()) {
            return Err(Error::Spec(format!(
                "semidirect twist must have determinant +-1, got {det}"
            )));
        }
        Ok(GroupBackend::SemidirectZByLattice { dim: twist.dim, twist })
    }

    /// Short human-readable descriptor; feeds the group fingerprint.
    pub fn describe(&self) -> String {
        match self {
            GroupBackend::IntegerMatrix { dim } => format!("integer_matrix({dim})"),
            GroupBackend::Cyclic { modulus } => format!("cyclic({modulus})"),
            GroupBackend::FreeAbelian { dim } => format!("free_abelian({dim})"),
            GroupBackend::SemidirectZByLattice { dim, twist } => {
                let entries: Vec<String> = twist.entries.iter().map(|e| e.to_string()).collect();
                format!("semidirect({dim};{})", entries.join(","))
            }
            GroupBackend::Lamplighter => "lamplighter".to_string(),
            GroupBackend::FreeGroup { rank } => format!("free_group({rank})"),
        }
    }

    pub fn identity(&self) -> Element {
        match self {
            GroupBackend::IntegerMatrix { dim } => Element::Matrix(IntMatrix::identity(*dim)),
            GroupBackend::Cyclic { .. } => Element::Cyclic(0),
            GroupBackend::FreeAbelian { dim } => Element::Vector(vec![0; *dim]),
            GroupBackend::SemidirectZByLattice { dim, .. } => Element::Semidirect {
                shift: 0,
                coords: vec![BigInt::zero(); *dim],
            },
            GroupBackend::Lamplighter => Element::Lamp { cursor: 0, lamps: Vec::new() },
            GroupBackend::FreeGroup { .. } => Element::Word(Vec::new()),
        }
    }

    pub fn check(&self, e: &Element) -> Result<()> {
        let ok = match (self, e) {
            (GroupBackend::IntegerMatrix { dim }, Element::Matrix(m)) => m.dim == *dim,
            (GroupBackend::Cyclic { modulus }, Element::Cyclic(v)) => v < modulus,
            (GroupBackend::FreeAbelian { dim }, Element::Vector(v)) => v.len() == *dim,
            (GroupBackend::SemidirectZByLattice { dim, .. }, Element::Semidirect { coords, .. }) => {
                coords.len() == *dim
            }
            (GroupBackend::Lamplighter, Element::Lamp { lamps, .. }) => {
                lamps.windows(2).all(|w| w[0] < w[1])
            }
            (GroupBackend::FreeGroup { rank }, Element::Word(w)) => {
                w.iter().all(|&l| l != 0 && (l.unsigned_abs() as usize) <= *rank)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BackendMismatch { expected: self.describe(), got: format!("{e:?}") })
        }
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Result<Element> {
        match (self, a, b) {
            (GroupBackend::IntegerMatrix { .. }, Element::Matrix(x), Element::Matrix(y)) => {
                Ok(Element::Matrix(x.mul(y)))
            }
            (GroupBackend::Cyclic { modulus }, Element::Cyclic(x), Element::Cyclic(y)) => {
                Ok(Element::Cyclic((x + y) % modulus))
            }
            (GroupBackend::FreeAbelian { .. }, Element::Vector(x), Element::Vector(y)) => {
                let mut out = Vec::with_capacity(x.len());
                for (p, q) in x.iter().zip(y) {
                    out.push(p.checked_add(*q).ok_or(Error::Overflow { context: "free_abelian add" })?);
                }
                Ok(Element::Vector(out))
            }
            (
                GroupBackend::SemidirectZByLattice { twist, .. },
                Element::Semidirect { shift: n1, coords: v1 },
                Element::Semidirect { shift: n2, coords: v2 },
            ) => {
                let twisted = twist.pow_signed(*n1)?.apply(v2);
                let coords = v1.iter().zip(&twisted).map(|(a, b)| a + b).collect();
                let shift = n1.checked_add(*n2).ok_or(Error::Overflow { context: "semidirect shift" })?;
                Ok(Element::Semidirect { shift, coords })
            }
            (
                GroupBackend::Lamplighter,
                Element::Lamp { cursor: c1, lamps: l1 },
                Element::Lamp { cursor: c2, lamps: l2 },
            ) => {
                let cursor = c1.checked_add(*c2).ok_or(Error::Overflow { context: "lamp cursor" })?;
                let shifted: Vec<i64> = l2
                    .iter()
                    .map(|p| p.checked_add(*c1).ok_or(Error::Overflow { context: "lamp shift" }))
                    .collect::<Result<_>>()?;
                Ok(Element::Lamp { cursor, lamps: symmetric_difference(l1, &shifted) })
            }
            (GroupBackend::FreeGroup { .. }, Element::Word(x), Element::Word(y)) => {
                let mut out = x.clone();
                for &l in y {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Ok(Element::Word(out))
            }
            _ => Err(Error::BackendMismatch { expected: self.describe(), got: format!("{a:?} * {b:?}") }),
        }
    }

    pub fn inverse(&self, a: &Element) -> Result<Element> {
        match (self, a) {
            (GroupBackend::IntegerMatrix { .. }, Element::Matrix(m)) => {
                Ok(Element::Matrix(m.inverse_unimodular()?))
            }
            (GroupBackend::Cyclic { modulus }, Element::Cyclic(v)) => {
                Ok(Element::Cyclic(if *v == 0 { 0 } else { modulus - v }))
            }
            (GroupBackend::FreeAbelian { .. }, Element::Vector(v)) => {
                let mut out = Vec::with_capacity(v.len());
                for &x in v {
                    out.push(x.checked_neg().ok_or(Error::Overflow { context: "free_abelian neg" })?);
                }
                Ok(Element::Vector(out))
            }
            (GroupBackend::SemidirectZByLattice { twist, .. }, Element::Semidirect { shift, coords }) => {
                let back = twist.pow_signed(-shift)?;
                let coords = back.apply(coords).into_iter().map(|c| -c).collect();
                Ok(Element::Semidirect { shift: -shift, coords })
            }
            (GroupBackend::Lamplighter, Element::Lamp { cursor, lamps }) => {
                let shifted: Vec<i64> = lamps
                    .iter()
                    .map(|p| p.checked_sub(*cursor).ok_or(Error::Overflow { context: "lamp shift" }))
                    .collect::<Result<_>>()?;
                Ok(Element::Lamp { cursor: -cursor, lamps: shifted })
            }
            (GroupBackend::FreeGroup { .. }, Element::Word(w)) => {
                Ok(Element::Word(w.iter().rev().map(|&l| -l).collect()))
            }
            _ => Err(Error::BackendMismatch { expected: self.describe(), got: format!("{a:?}") }),
        }
    }

    /// Reconstructs an element from its canonical key (cache loading).
    pub fn element_from_key(&self, bytes: &[u8]) -> Result<Element> {
        let corrupt = |what: &str| Error::CacheCorrupt(format!("bad element key: {what}"));
        let mut r = KeyReader::new(bytes);
        let e = match self {
            GroupBackend::IntegerMatrix { dim } => {
                let mut entries = Vec::with_capacity(dim * dim);
                for _ in 0..dim * dim {
                    entries.push(r.read_bigint().ok_or_else(|| corrupt("matrix entry"))?);
                }
                Element::Matrix(IntMatrix { dim: *dim, entries })
            }
            GroupBackend::Cyclic { .. } => {
                let v = r.read_i64().ok_or_else(|| corrupt("residue"))?;
                Element::Cyclic(u64::try_from(v).map_err(|_| corrupt("negative residue"))?)
            }
            GroupBackend::FreeAbelian { dim } => {
                let mut v = Vec::with_capacity(*dim);
                for _ in 0..*dim {
                    v.push(r.read_i64().ok_or_else(|| corrupt("coordinate"))?);
                }
                Element::Vector(v)
            }
            GroupBackend::SemidirectZByLattice { dim, .. } => {
                let shift = r.read_i64().ok_or_else(|| corrupt("shift"))?;
                let mut coords = Vec::with_capacity(*dim);
                for _ in 0..*dim {
                    coords.push(r.read_bigint().ok_or_else(|| corrupt("coordinate"))?);
                }
                Element::Semidirect { shift, coords }
            }
            GroupBackend::Lamplighter => {
                let cursor = r.read_i64().ok_or_else(|| corrupt("cursor"))?;
                let n = r.read_count().ok_or_else(|| corrupt("lamp count"))?;
                let mut lamps = Vec::with_capacity(n);
                for _ in 0..n {
                    lamps.push(r.read_i64().ok_or_else(|| corrupt("lamp"))?);
                }
                Element::Lamp { cursor, lamps }
            }
            GroupBackend::FreeGroup { .. } => {
                let n = r.read_count().ok_or_else(|| corrupt("word length"))?;
                let mut w = Vec::with_capacity(n);
                for _ in 0..n {
                    let l = r.read_i64().ok_or_else(|| corrupt("letter"))?;
                    w.push(i32::try_from(l).map_err(|_| corrupt("letter range"))?);
                }
                Element::Word(w)
            }
        };
        if !r.finished() {
            return Err(corrupt("trailing bytes"));
        }
        self.check(&e)?;
        Ok(e)
    }
}

fn symmetric_difference(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_word_reduction() {
        let g = GroupBackend::FreeGroup { rank: 2 };
        let a = Element::Word(vec![1, 2]);
        let b = Element::Word(vec![-2, -1, 1]);
        // (ab)(b^-1 a^-1 a) = a
        assert_eq!(g.multiply(&a, &b).unwrap(), Element::Word(vec![1]));
    }

    #[test]
    fn lamplighter_relations() {
        let g = GroupBackend::Lamplighter;
        let t = Element::Lamp { cursor: 1, lamps: vec![] };
        let a = Element::Lamp { cursor: 0, lamps: vec![0] };
        // a is an involution
        assert_eq!(g.multiply(&a, &a).unwrap(), g.identity());
        // t a t^-1 toggles the lamp at position 1
        let tinv = g.inverse(&t).unwrap();
        let conj = g.multiply(&g.multiply(&t, &a).unwrap(), &tinv).unwrap();
        assert_eq!(conj, Element::Lamp { cursor: 0, lamps: vec![1] });
    }

    #[test]
    fn semidirect_shear_relation() {
        // Z x_T Z^2 with the shear twist is the discrete Heisenberg group:
        // conjugating a lattice vector by the shift applies the shear.
        let t = IntMatrix::from_i64_rows(&[vec![1, 1], vec![0, 1]]);
        let g = GroupBackend::semidirect(t).unwrap();
        let e = Element::Semidirect { shift: 1, coords: vec![BigInt::zero(), BigInt::zero()] };
        let h = Element::Semidirect { shift: 0, coords: vec![BigInt::zero(), BigInt::one()] };
        let einv = g.inverse(&e).unwrap();
        let conj = g.multiply(&g.multiply(&e, &h).unwrap(), &einv).unwrap();
        assert_eq!(
            conj,
            Element::Semidirect { shift: 0, coords: vec![BigInt::one(), BigInt::one()] }
        );
    }

    #[test]
    fn keys_roundtrip_through_backend() {
        let t = IntMatrix::from_i64_rows(&[vec![2, 1], vec![1, 1]]);
        let g = GroupBackend::semidirect(t).unwrap();
        let e = Element::Semidirect { shift: -3, coords: vec![BigInt::from(700), BigInt::from(-4)] };
        let key = e.canonical_key();
        assert_eq!(g.element_from_key(&key).unwrap(), e);
    }
}
