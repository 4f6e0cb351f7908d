//! A group together with a finite symmetric generating set.

use crate::backend::{Element, GroupBackend};
use crate::error::{Error, Result};
use num_traits::One;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub struct MarkedGroup {
    backend: GroupBackend,
    generators: Vec<Element>,
    contains_identity: bool,
    fingerprint: String,
}

impl MarkedGroup {
    /// Validates generators (shape, invertibility, symmetry) and fingerprints
    /// the presentation. The generating set must already be symmetric; use
    /// [`MarkedGroup::symmetrized`] to close it.
    pub fn new(backend: GroupBackend, generators: Vec<Element>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::EmptyGenerators);
        }
        let mut seen = BTreeSet::new();
        let mut gens = Vec::with_capacity(generators.len());
        for (i, g) in generators.into_iter().enumerate() {
            backend.check(&g)?;
            if let Element::Matrix(m) = &g {
                let det = m.det();
                if !num_traits::Signed::abs(&det).is_one() {
                    return Err(Error::NonInvertibleGenerator { index: i, det: det.to_string() });
                }
            }
            if seen.insert(g.canonical_key()) {
                gens.push(g);
            }
        }
        let keys: BTreeSet<Vec<u8>> = gens.iter().map(|g| g.canonical_key()).collect();
        for (i, g) in gens.iter().enumerate() {
            let inv = backend.inverse(g)?;
            if !keys.contains(&inv.canonical_key()) {
                return Err(Error::AsymmetricGenerators { index: i });
            }
        }
        let id_key = backend.identity().canonical_key();
        let contains_identity = keys.contains(&id_key);
        let fingerprint = fingerprint_of(&backend, &keys);
        Ok(MarkedGroup { backend, generators: gens, contains_identity, fingerprint })
    }

    /// Like [`MarkedGroup::new`] but adds missing inverses; the bool reports
    /// whether the set had to be closed.
    pub fn symmetrized(backend: GroupBackend, generators: Vec<Element>) -> Result<(Self, bool)> {
        let mut keys: BTreeSet<Vec<u8>> = generators.iter().map(|g| g.canonical_key()).collect();
        let mut gens = generators.clone();
        let mut closed = false;
        for g in &generators {
            let inv = backend.inverse(g)?;
            if keys.insert(inv.canonical_key()) {
                gens.push(inv);
                closed = true;
            }
        }
        Ok((MarkedGroup::new(backend, gens)?, closed))
    }

    pub fn backend(&self) -> &GroupBackend {
        &self.backend
    }

    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn contains_identity(&self) -> bool {
        self.contains_identity
    }

    /// Hex digest over the backend descriptor and the sorted generator keys;
    /// two marked groups agree iff their fingerprints do.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn identity(&self) -> Element {
        self.backend.identity()
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Result<Element> {
        self.backend.multiply(a, b)
    }

    pub fn inverse(&self, a: &Element) -> Result<Element> {
        self.backend.inverse(a)
    }

    pub fn commutator(&self, a: &Element, b: &Element) -> Result<Element> {
        let ab = self.multiply(a, b)?;
        let ba = self.multiply(b, a)?;
        self.multiply(&ab, &self.inverse(&ba)?)
    }

    pub fn conjugate(&self, g: &Element, x: &Element) -> Result<Element> {
        let gx = self.multiply(g, x)?;
        self.multiply(&gx, &self.inverse(g)?)
    }

    /// Same backend, different generating set (marked subgroups, reductions).
    pub fn remark(&self, generators: Vec<Element>) -> Result<MarkedGroup> {
        MarkedGroup::new(self.backend.clone(), generators)
    }
}

fn fingerprint_of(backend: &GroupBackend, keys: &BTreeSet<Vec<u8>>) -> String {
    let mut h = Sha256::new();
    h.update(backend.describe().as_bytes());
    h.update([0u8]);
    for k in keys {
        h.update((k.len() as u32).to_be_bytes());
        h.update(k);
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Standard marked groups used throughout the test suites.
pub mod standard {
    use super::*;
    use crate::intlin::IntMatrix;

    /// Z^d with the unit coordinate vectors and their inverses.
    pub fn free_abelian(dim: usize) -> MarkedGroup {
        let backend = GroupBackend::FreeAbelian { dim };
        let mut gens = Vec::new();
        for i in 0..dim {
            for sign in [1i64, -1] {
                let mut v = vec![0i64; dim];
                v[i] = sign;
                gens.push(Element::Vector(v));
            }
        }
        MarkedGroup::new(backend, gens).expect("valid")
    }

    /// Z/n with generators {+1, -1}.
    pub fn cyclic(n: u64) -> MarkedGroup {
        let backend = GroupBackend::Cyclic { modulus: n };
        let gens = vec![Element::Cyclic(1 % n), Element::Cyclic((n - 1) % n)];
        MarkedGroup::new(backend, gens).expect("valid")
    }

    /// Discrete Heisenberg group as upper unitriangular 3x3 matrices with the
    /// two elementary generators x, z and their inverses.
    pub fn heisenberg() -> MarkedGroup {
        let backend = GroupBackend::IntegerMatrix { dim: 3 };
        let x = IntMatrix::from_i64_rows(&[vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let z = IntMatrix::from_i64_rows(&[vec![1, 0, 0], vec![0, 1, 1], vec![0, 0, 1]]);
        let gens = vec![
            Element::Matrix(x.clone()),
            Element::Matrix(x.inverse_unimodular().expect("unimodular")),
            Element::Matrix(z.clone()),
            Element::Matrix(z.inverse_unimodular().expect("unimodular")),
        ];
        MarkedGroup::new(backend, gens).expect("valid")
    }

    /// Free group of the given rank with the standard free basis.
    pub fn free_group(rank: usize) -> MarkedGroup {
        let backend = GroupBackend::FreeGroup { rank };
        let mut gens = Vec::new();
        for i in 1..=rank as i32 {
            gens.push(Element::Word(vec![i]));
            gens.push(Element::Word(vec![-i]));
        }
        MarkedGroup::new(backend, gens).expect("valid")
    }

    /// Wreath product (Z/2 wr Z) with the walk generators t, t^-1 and the
    /// head toggle a.
    pub fn lamplighter() -> MarkedGroup {
        let backend = GroupBackend::Lamplighter;
        let gens = vec![
            Element::Lamp { cursor: 1, lamps: vec![] },
            Element::Lamp { cursor: -1, lamps: vec![] },
            Element::Lamp { cursor: 0, lamps: vec![0] },
        ];
        MarkedGroup::new(backend, gens).expect("valid")
    }

    /// Z x_T Z^dim with generators {e, e^-1} and the lattice unit vectors.
    pub fn semidirect(twist: IntMatrix) -> Result<MarkedGroup> {
        use num_bigint::BigInt;
        use num_traits::Zero;
        let dim = twist.dim;
        let backend = GroupBackend::semidirect(twist)?;
        let mut gens = vec![
            Element::Semidirect { shift: 1, coords: vec![BigInt::zero(); dim] },
            Element::Semidirect { shift: -1, coords: vec![BigInt::zero(); dim] },
        ];
        for i in 0..dim {
            for sign in [1i64, -1] {
                let mut coords = vec![BigInt::zero(); dim];
                coords[i] = BigInt::from(sign);
                gens.push(Element::Semidirect { shift: 0, coords });
            }
        }
        MarkedGroup::new(backend, gens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymmetric_set_is_rejected() {
        let backend = GroupBackend::FreeAbelian { dim: 1 };
        let err = MarkedGroup::new(backend, vec![Element::Vector(vec![1])]);
        assert!(matches!(err, Err(Error::AsymmetricGenerators { .. })));
    }

    #[test]
    fn symmetrize_closes_the_set() {
        let backend = GroupBackend::FreeAbelian { dim: 1 };
        let (g, closed) = MarkedGroup::symmetrized(backend, vec![Element::Vector(vec![1])]).unwrap();
        assert!(closed);
        assert_eq!(g.generator_count(), 2);
    }

    #[test]
    fn fingerprint_ignores_generator_order() {
        let a = standard::free_abelian(2);
        let backend = GroupBackend::FreeAbelian { dim: 2 };
        let mut gens: Vec<Element> = a.generators().to_vec();
        gens.reverse();
        let b = MarkedGroup::new(backend, gens).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn identity_flag() {
        let backend = GroupBackend::Cyclic { modulus: 5 };
        let g =
            MarkedGroup::new(backend, vec![Element::Cyclic(0), Element::Cyclic(1), Element::Cyclic(4)])
                .unwrap();
        assert!(g.contains_identity());
    }
}
