//! Exact integer linear algebra on small square matrices.
//!
//! Everything here is `BigInt`-exact: matrix products, characteristic
//! polynomials, kernels, lattice images. Floating point never enters; the
//! analysis modules that need numerics convert at their own boundary.

use crate::error::{Error, Result};
use crate::key;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::fmt;

/// Dense square integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    pub dim: usize,
    pub entries: Vec<BigInt>,
}

impl Serialize for IntMatrix {
    // decimal strings keep reports readable and arbitrary precision safe
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("IntMatrix", 2)?;
        st.serialize_field("dim", &self.dim)?;
        let entries: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        st.serialize_field("entries", &entries)?;
        st.end()
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix{:?}", self.rows_i64_lossy())
    }
}

impl IntMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = BigInt::one();
        }
        IntMatrix { dim, entries }
    }

    pub fn zero(dim: usize) -> Self {
        IntMatrix { dim, entries: vec![BigInt::zero(); dim * dim] }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            entries.extend(row.iter().map(|&v| BigInt::from(v)));
        }
        IntMatrix { dim, entries }
    }

    pub fn from_flat_i64(dim: usize, flat: &[i64]) -> Self {
        assert_eq!(flat.len(), dim * dim);
        IntMatrix { dim, entries: flat.iter().map(|&v| BigInt::from(v)).collect() }
    }

    fn rows_i64_lossy(&self) -> Vec<Vec<String>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.at(i, j).to_string()).collect())
            .collect()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut BigInt {
        &mut self.entries[i * self.dim + j]
    }

    pub fn is_identity(&self) -> bool {
        *self == IntMatrix::identity(self.dim)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = IntMatrix::zero(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let b = other.at(k, j);
                    if !b.is_zero() {
                        *out.at_mut(i, j) += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, other.dim);
        IntMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, other.dim);
        IntMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, c: &BigInt) -> IntMatrix {
        IntMatrix { dim: self.dim, entries: self.entries.iter().map(|e| e * c).collect() }
    }

    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.at(i, j) * &v[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let d = self.dim;
        let mut out = IntMatrix::zero(d);
        for i in 0..d {
            for j in 0..d {
                *out.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        out
    }

    /// Characteristic polynomial, ascending coefficients, leading coeff 1.
    /// Faddeev-LeVerrier; the division by k is exact at every step.
    pub fn char_poly(&self) -> Vec<BigInt> {
        let d = self.dim;
        let mut coeffs = vec![BigInt::zero(); d + 1];
        coeffs[d] = BigInt::one();
        let mut m = IntMatrix::identity(d);
        for k in 1..=d {
            let am = self.mul(&m);
            let trace: BigInt = (0..d).map(|i| am.at(i, i).clone()).sum();
            let c = -trace / BigInt::from(k as i64);
            coeffs[d - k] = c.clone();
            m = am;
            for i in 0..d {
                *m.at_mut(i, i) += &c;
            }
        }
        coeffs
    }

    pub fn det(&self) -> BigInt {
        let c0 = self.char_poly()[0].clone();
        if self.dim % 2 == 0 {
            c0
        } else {
            -c0
        }
    }

    /// Exact inverse; errors unless the inverse is again integral.
    pub fn inverse_unimodular(&self) -> Result<IntMatrix> {
        let d = self.dim;
        let rat = self.to_rational();
        let inv = rational_inverse(&rat, d).ok_or(Error::Singular { context: "inverse_unimodular" })?;
        let mut out = IntMatrix::zero(d);
        for (idx, q) in inv.into_iter().enumerate() {
            if !q.denom().is_one() {
                return Err(Error::NonInvertibleGenerator { index: 0, det: self.det().to_string() });
            }
            out.entries[idx] = q.numer().clone();
        }
        Ok(out)
    }

    pub fn pow(&self, n: u64) -> IntMatrix {
        let mut result = IntMatrix::identity(self.dim);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }

    pub fn pow_signed(&self, n: i64) -> Result<IntMatrix> {
        if n >= 0 {
            Ok(self.pow(n as u64))
        } else {
            Ok(self.inverse_unimodular()?.pow((-n) as u64))
        }
    }

    pub fn to_rational(&self) -> Vec<BigRational> {
        self.entries.iter().map(|e| BigRational::from(e.clone())).collect()
    }

    pub fn key_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.dim * self.dim * 3);
        for e in &self.entries {
            key::push_bigint(&mut buf, e);
        }
        buf
    }
}

/// Row-reduces a rational matrix in place (rows x cols, row-major), returning
/// the pivot column per pivot row. Partial pivoting picks the first nonzero
/// entry so the result is deterministic.
pub fn rational_rref(m: &mut [BigRational], rows: usize, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i * cols + c].is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..cols {
                m.swap(r * cols + j, p * cols + j);
            }
        }
        let inv = m[r * cols + c].recip();
        for j in c..cols {
            let v = &m[r * cols + j] * &inv;
            m[r * cols + j] = v;
        }
        for i in 0..rows {
            if i != r && !m[i * cols + c].is_zero() {
                let factor = m[i * cols + c].clone();
                for j in c..cols {
                    let v = &m[i * cols + j] - &factor * &m[r * cols + j];
                    m[i * cols + j] = v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn rational_inverse(entries: &[BigRational], d: usize) -> Option<Vec<BigRational>> {
    // [A | I] augmented elimination
    let cols = 2 * d;
    let mut aug = vec![BigRational::zero(); d * cols];
    for i in 0..d {
        for j in 0..d {
            aug[i * cols + j] = entries[i * d + j].clone();
        }
        aug[i * cols + d + i] = BigRational::one();
    }
    let pivots = rational_rref(&mut aug, d, cols);
    if pivots.len() < d || pivots[d - 1] >= d {
        return None;
    }
    let mut out = vec![BigRational::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = aug[i * cols + d + j].clone();
        }
    }
    Some(out)
}

/// Primitive integer kernel vector of an integer matrix, or `None` if the
/// kernel is trivial. Ties break to the first free column; the sign makes
/// the first nonzero coordinate positive.
pub fn integer_kernel_vector(m: &IntMatrix) -> Option<Vec<BigInt>> {
    let d = m.dim;
    let mut rat = m.to_rational();
    let pivots = rational_rref(&mut rat, d, d);
    let free: Vec<usize> = (0..d).filter(|c| !pivots.contains(c)).collect();
    let &fc = free.first()?;
    let mut v = vec![BigRational::zero(); d];
    v[fc] = BigRational::one();
    for (row, &pc) in pivots.iter().enumerate() {
        v[pc] = -rat[row * d + fc].clone();
    }
    Some(clear_denominators(&v))
}

/// Scales a rational vector to a primitive integer vector with positive
/// leading nonzero coordinate.
pub fn clear_denominators(v: &[BigRational]) -> Vec<BigInt> {
    use num_integer::Integer;
    let mut lcm = BigInt::one();
    for q in v {
        lcm = lcm.lcm(q.denom());
    }
    let mut ints: Vec<BigInt> = v.iter().map(|q| q.numer() * (&lcm / q.denom())).collect();
    let mut g = BigInt::zero();
    for x in &ints {
        g = g.gcd(x);
    }
    if !g.is_zero() && !g.is_one() {
        for x in &mut ints {
            *x = &*x / &g;
        }
    }
    if let Some(first) = ints.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in &mut ints {
                *x = -&*x;
            }
        }
    }
    ints
}

/// Echelon integer basis of the span of the given columns (each of length
/// `dim`). Euclidean column reduction; pivot signs positive; deterministic.
pub fn column_image_basis(dim: usize, cols: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut work: Vec<Vec<BigInt>> = cols
        .iter()
        .filter(|c| c.iter().any(|x| !x.is_zero()))
        .cloned()
        .collect();
    let mut basis: Vec<Vec<BigInt>> = Vec::new();
    for row in 0..dim {
        loop {
            let mut holders: Vec<usize> = (0..work.len())
                .filter(|&i| !work[i][row].is_zero())
                .collect();
            if holders.len() <= 1 {
                break;
            }
            // reduce the larger entry by the smaller, Euclid style
            holders.sort_by(|&a, &b| work[a][row].abs().cmp(&work[b][row].abs()));
            let small = holders[0];
            let big = holders[1];
            let q = floor_div(&work[big][row], &work[small][row]);
            for r in 0..dim {
                let v = &work[big][r] - &q * &work[small][r];
                work[big][r] = v;
            }
        }
        if let Some(i) = (0..work.len()).find(|&i| !work[i][row].is_zero()) {
            let mut col = work.remove(i);
            if col[row].is_negative() {
                for x in &mut col {
                    *x = -&*x;
                }
            }
            basis.push(col);
        }
        work.retain(|c| c.iter().any(|x| !x.is_zero()));
    }
    basis
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    use num_integer::Integer;
    a.div_floor(b)
}

/// Matrix of `t` restricted to the sublattice spanned by `basis` (full column
/// rank, columns length `dim`): solves `t * basis = basis * M` exactly and
/// checks integrality.
pub fn restrict_to_lattice(t: &IntMatrix, basis: &[Vec<BigInt>]) -> Result<IntMatrix> {
    let k = basis.len();
    let d = t.dim;
    let mut out = IntMatrix::zero(k);
    for (j, col) in basis.iter().enumerate() {
        let target = t.apply(col);
        // solve basis * x = target over Q
        let cols = k + 1;
        let mut aug = vec![BigRational::zero(); d * cols];
        for r in 0..d {
            for c in 0..k {
                aug[r * cols + c] = BigRational::from(basis[c][r].clone());
            }
            aug[r * cols + k] = BigRational::from(target[r].clone());
        }
        let pivots = rational_rref(&mut aug, d, cols);
        if pivots.contains(&k) {
            return Err(Error::Singular { context: "restrict_to_lattice: lattice not invariant" });
        }
        let mut x = vec![BigRational::zero(); k];
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = aug[row * cols + k].clone();
        }
        for i in 0..k {
            if !x[i].denom().is_one() {
                return Err(Error::Singular { context: "restrict_to_lattice: non-integral action" });
            }
            *out.at_mut(i, j) = x[i].numer().clone();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat_map() -> IntMatrix {
        IntMatrix::from_i64_rows(&[vec![2, 1], vec![1, 1]])
    }

    #[test]
    fn char_poly_cat_map() {
        // x^2 - 3x + 1
        let p = cat_map().char_poly();
        let want: Vec<BigInt> = [1, -3, 1].iter().map(|&v| BigInt::from(v)).collect();
        assert_eq!(p, want);
    }

    #[test]
    fn char_poly_rotation() {
        let rot = IntMatrix::from_i64_rows(&[vec![0, -1], vec![1, 0]]);
        let want: Vec<BigInt> = [1, 0, 1].iter().map(|&v| BigInt::from(v)).collect();
        assert_eq!(rot.char_poly(), want);
    }

    #[test]
    fn unimodular_inverse_roundtrip() {
        let m = cat_map();
        let inv = m.inverse_unimodular().unwrap();
        assert!(m.mul(&inv).is_identity());
        assert_eq!(m.det(), BigInt::one());
    }

    #[test]
    fn pow_signed_matches_inverse() {
        let m = cat_map();
        let a = m.pow_signed(-3).unwrap();
        let b = m.pow(3).inverse_unimodular().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_of_shear_minus_identity() {
        let shear = IntMatrix::from_i64_rows(&[vec![1, 1], vec![0, 1]]);
        let m = shear.sub(&IntMatrix::identity(2));
        let v = integer_kernel_vector(&m).unwrap();
        assert_eq!(v, vec![BigInt::one(), BigInt::zero()]);
    }

    #[test]
    fn image_basis_of_shear_minus_identity() {
        let shear = IntMatrix::from_i64_rows(&[vec![1, 1], vec![0, 1]]);
        let m = shear.sub(&IntMatrix::identity(2));
        let cols: Vec<Vec<BigInt>> = (0..2)
            .map(|j| (0..2).map(|i| m.at(i, j).clone()).collect())
            .collect();
        let basis = column_image_basis(2, &cols);
        assert_eq!(basis, vec![vec![BigInt::one(), BigInt::zero()]]);
    }

    #[test]
    fn restriction_to_invariant_line() {
        let shear = IntMatrix::from_i64_rows(&[vec![1, 1], vec![0, 1]]);
        let basis = vec![vec![BigInt::one(), BigInt::zero()]];
        let m = restrict_to_lattice(&shear, &basis).unwrap();
        assert!(m.is_identity());
    }
}
