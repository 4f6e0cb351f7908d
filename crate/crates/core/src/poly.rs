//! Integer polynomials: exact arithmetic, cyclotomic factors, Mahler measure.

use crate::config::ROOT_NEWTON_TOL;
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Ascending coefficients, no trailing zeros; the zero polynomial is empty.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntPoly {
    pub coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        IntPoly::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        IntPoly { coeffs: vec![BigInt::one()] }
    }

    /// x^n - 1
    pub fn x_pow_minus_one(n: u32) -> Self {
        let mut coeffs = vec![BigInt::zero(); n as usize + 1];
        coeffs[0] = -BigInt::one();
        coeffs[n as usize] = BigInt::one();
        IntPoly::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn leading(&self) -> Option<&BigInt> {
        self.coeffs.last()
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPoly::new(out)
    }

    /// Exact division by a monic divisor; panics if the divisor is not monic,
    /// errors if the remainder is nonzero.
    pub fn div_exact_monic(&self, divisor: &IntPoly) -> Result<IntPoly> {
        assert!(divisor.leading().map_or(false, |l| l.is_one()), "divisor must be monic");
        let d = divisor.coeffs.len() - 1;
        if self.is_zero() {
            return Ok(IntPoly::zero());
        }
        let n = self.coeffs.len() - 1;
        if n < d {
            return Err(Error::Spec("polynomial division has nonzero remainder".into()));
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![BigInt::zero(); n - d + 1];
        for k in (0..=n - d).rev() {
            let c = rem[k + d].clone();
            if c.is_zero() {
                continue;
            }
            quot[k] = c.clone();
            for (i, b) in divisor.coeffs.iter().enumerate() {
                rem[k + i] -= &c * b;
            }
        }
        if rem.iter().any(|c| !c.is_zero()) {
            return Err(Error::Spec("polynomial division has nonzero remainder".into()));
        }
        Ok(IntPoly::new(quot))
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + Complex64::new(c.to_f64().unwrap_or(f64::INFINITY), 0.0);
        }
        acc
    }

    fn eval_derivative_complex(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * z + Complex64::new(i as f64, 0.0) * c.to_f64().unwrap_or(f64::INFINITY);
        }
        acc
    }

    /// Primitive part with positive leading coefficient.
    pub fn primitive(&self) -> IntPoly {
        use num_integer::Integer;
        if self.is_zero() {
            return IntPoly::zero();
        }
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = g.gcd(c);
        }
        let mut coeffs: Vec<BigInt> = self.coeffs.iter().map(|c| c / &g).collect();
        if coeffs.last().unwrap().is_negative() {
            for c in &mut coeffs {
                *c = -&*c;
            }
        }
        IntPoly::new(coeffs)
    }
}

/// Gcd over Q, returned as a primitive integer polynomial with positive
/// leading coefficient (constant 1 when coprime).
pub fn poly_gcd(a: &IntPoly, b: &IntPoly) -> IntPoly {
    let mut f: Vec<BigRational> = a.coeffs.iter().map(|c| BigRational::from(c.clone())).collect();
    let mut g: Vec<BigRational> = b.coeffs.iter().map(|c| BigRational::from(c.clone())).collect();
    let trim = |v: &mut Vec<BigRational>| {
        while v.last().map_or(false, |c| c.is_zero()) {
            v.pop();
        }
    };
    trim(&mut f);
    trim(&mut g);
    while !g.is_empty() {
        // f mod g
        let dg = g.len() - 1;
        let lg = g.last().unwrap().clone();
        while f.len() > dg {
            let lf = f.last().unwrap().clone();
            if lf.is_zero() {
                f.pop();
                continue;
            }
            let shift = f.len() - 1 - dg;
            let q = lf / lg.clone();
            for i in 0..=dg {
                let v = &f[shift + i] - &q * &g[i];
                f[shift + i] = v;
            }
            trim(&mut f);
            if f.len() <= dg {
                break;
            }
        }
        std::mem::swap(&mut f, &mut g);
        trim(&mut g);
    }
    if f.is_empty() {
        return IntPoly::zero();
    }
    IntPoly::new(crate::intlin::clear_denominators(&f)).primitive()
}

/// Euler totient by trial-division factorization.
pub fn totient(n: u64) -> u64 {
    let mut result = n;
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// All n >= 1 with phi(n) <= d, ascending. phi(n) >= sqrt(n/2) bounds the
/// scan range at 2 d^2.
pub fn orders_with_totient_at_most(d: u64) -> Vec<u64> {
    (1..=2 * d * d + 1).filter(|&n| totient(n) <= d).collect()
}

/// n-th cyclotomic polynomial by exact division of x^n - 1.
pub fn cyclotomic(n: u32) -> IntPoly {
    let mut poly = IntPoly::x_pow_minus_one(n);
    for d in 1..n {
        if n % d == 0 {
            poly = poly.div_exact_monic(&cyclotomic(d)).expect("cyclotomic division is exact");
        }
    }
    poly
}

/// True when the polynomial is a product of cyclotomic polynomials, i.e. all
/// roots are roots of unity. Exact: divides out cyclotomic factors with
/// multiplicity and checks the remainder is constant.
pub fn is_cyclotomic_product(p: &IntPoly) -> bool {
    let Some(deg) = p.degree() else { return false };
    if deg == 0 {
        return p.coeffs[0].clone().abs().is_one();
    }
    if !p.leading().unwrap().clone().abs().is_one() {
        return false;
    }
    let mut rest = p.primitive();
    for n in orders_with_totient_at_most(deg as u64) {
        let phi = cyclotomic(n as u32);
        loop {
            match rest.div_exact_monic(&phi) {
                Ok(q) => rest = q,
                Err(_) => break,
            }
            if rest.degree() == Some(0) {
                return true;
            }
        }
    }
    rest.degree() == Some(0)
}

/// Complex roots, counted with multiplicity: companion-matrix eigenvalues
/// polished by Newton iteration on the exact coefficients.
pub fn roots(p: &IntPoly) -> Result<Vec<Complex64>> {
    let deg = p.degree().ok_or(Error::Spec("roots of the zero polynomial".into()))?;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = p.coeffs[deg].to_f64().ok_or(Error::NumericalFailure {
        context: "roots",
        detail: "leading coefficient exceeds f64".into(),
    })?;
    let mut companion = nalgebra::DMatrix::<f64>::zeros(deg, deg);
    for i in 0..deg {
        companion[(i, deg - 1)] = -p.coeffs[i].to_f64().unwrap_or(f64::INFINITY) / lead;
        if i + 1 < deg {
            companion[(i + 1, i)] = 1.0;
        }
    }
    let eigen = companion.complex_eigenvalues();
    let mut out = Vec::with_capacity(deg);
    for z0 in eigen.iter() {
        let mut z = *z0;
        for _ in 0..60 {
            let f = p.eval_complex(z);
            let df = p.eval_derivative_complex(z);
            if df.norm() < 1e-300 {
                break;
            }
            let step = f / df;
            z -= step;
            if step.norm() <= ROOT_NEWTON_TOL * z.norm().max(1.0) {
                break;
            }
        }
        // keep the polish only if it did not wander off
        if p.eval_complex(z).norm() <= p.eval_complex(*z0).norm() {
            out.push(z);
        } else {
            out.push(*z0);
        }
    }
    Ok(out)
}

/// Mahler measure |lead| * prod max(1, |root|).
pub fn mahler_measure(p: &IntPoly) -> Result<f64> {
    let deg = p.degree().ok_or(Error::Spec("mahler measure of the zero polynomial".into()))?;
    let lead = p.coeffs[deg]
        .to_f64()
        .ok_or(Error::NumericalFailure { context: "mahler", detail: "leading coefficient".into() })?
        .abs();
    if deg == 0 {
        return Ok(lead);
    }
    // Kronecker: measure exactly 1 iff the monic part is x^k times a product
    // of cyclotomics. Deciding this exactly avoids the sqrt-eps root error on
    // repeated unit-circle roots, which would otherwise leak past any slack.
    let low = p.coeffs.iter().position(|c| !c.is_zero()).unwrap_or(0);
    let shifted = IntPoly::new(p.coeffs[low..].to_vec());
    if is_cyclotomic_product(&shifted) {
        return Ok(lead);
    }
    let mut m = lead;
    for r in roots(p)? {
        m *= r.norm().max(1.0);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclotomic_tables() {
        assert_eq!(cyclotomic(1), IntPoly::from_i64(&[-1, 1]));
        assert_eq!(cyclotomic(2), IntPoly::from_i64(&[1, 1]));
        assert_eq!(cyclotomic(4), IntPoly::from_i64(&[1, 0, 1]));
        assert_eq!(cyclotomic(6), IntPoly::from_i64(&[1, -1, 1]));
        assert_eq!(cyclotomic(12), IntPoly::from_i64(&[1, 0, -1, 0, 1]));
        // phi(105) is the first with coefficient -2
        let c105 = cyclotomic(105);
        assert_eq!(c105.degree(), Some(totient(105) as usize));
        assert!(c105.coeffs.iter().any(|c| *c == BigInt::from(-2)));
    }

    #[test]
    fn totient_scan_bounds() {
        assert_eq!(totient(1), 1);
        assert_eq!(totient(12), 4);
        assert_eq!(orders_with_totient_at_most(2), vec![1, 2, 3, 4, 6]);
    }

    #[test]
    fn gcd_of_cyclotomic_multiples() {
        let a = cyclotomic(4).mul(&cyclotomic(3));
        let b = cyclotomic(4).mul(&cyclotomic(5));
        assert_eq!(poly_gcd(&a, &b), cyclotomic(4));
        let coprime = poly_gcd(&cyclotomic(3), &cyclotomic(5));
        assert_eq!(coprime.degree(), Some(0));
    }

    #[test]
    fn golden_ratio_mahler() {
        // x^2 - x - 1 has Mahler measure the golden ratio
        let p = IntPoly::from_i64(&[-1, -1, 1]);
        let m = mahler_measure(&p).unwrap();
        assert!((m - 1.618033988749895).abs() < 1e-10, "m = {m}");
    }

    #[test]
    fn cat_map_mahler() {
        let p = IntPoly::from_i64(&[1, -3, 1]);
        let m = mahler_measure(&p).unwrap();
        assert!((m - 2.618033988749895).abs() < 1e-9, "m = {m}");
    }

    #[test]
    fn cyclotomic_products_have_measure_one() {
        let p = cyclotomic(4).mul(&cyclotomic(6)).mul(&cyclotomic(1));
        let m = mahler_measure(&p).unwrap();
        assert!((m - 1.0).abs() < 1e-9, "m = {m}");
        assert!(is_cyclotomic_product(&p));
    }

    #[test]
    fn non_cyclotomic_detected() {
        let p = IntPoly::from_i64(&[1, -3, 1]);
        assert!(!is_cyclotomic_product(&p));
        let mixed = p.mul(&cyclotomic(4));
        assert!(!is_cyclotomic_product(&mixed));
    }
}
