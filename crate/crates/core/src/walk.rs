//! Random-walk measures with exact rational masses.
//!
//! The almost-harmonic construction averages powers of the lazy uniform step
//! on the generators. Everything here stays in `BigRational` so that total
//! mass 1 and the telescoping Laplacian bound are identities, not near-misses;
//! conversion to floating point happens only at the ball-function boundary.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::backend::Element;
use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::function::BallFunction;
use crate::marked::MarkedGroup;

/// Finitely supported probability measure on a marked group, keyed by the
/// canonical element encoding so iteration order is deterministic.
#[derive(Clone, Debug)]
pub struct WalkMeasure {
    masses: BTreeMap<Vec<u8>, (Element, BigRational)>,
    steps: u32,
}

impl WalkMeasure {
    /// Point mass at the identity (the zero-step walk).
    pub fn delta(group: &MarkedGroup) -> WalkMeasure {
        let id = group.identity();
        let mut masses = BTreeMap::new();
        masses.insert(id.canonical_key(), (id, BigRational::one()));
        WalkMeasure { masses, steps: 0 }
    }

    /// One uniform step: mass 1/|S| on each marked generator. Generators
    /// listed twice would double up, but `MarkedGroup` already deduplicates.
    pub fn uniform_step(group: &MarkedGroup) -> WalkMeasure {
        let n = group.generator_count();
        let share = BigRational::new(BigInt::one(), BigInt::from(n));
        let mut masses = BTreeMap::new();
        for s in group.generators() {
            masses.insert(s.canonical_key(), (s.clone(), share.clone()));
        }
        WalkMeasure { masses, steps: 1 }
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn mass_of(&self, e: &Element) -> BigRational {
        self.masses
            .get(&e.canonical_key())
            .map(|(_, q)| q.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn total_mass(&self) -> BigRational {
        self.masses.values().map(|(_, q)| q).sum()
    }

    /// Iterate the support in canonical-key order.
    pub fn iter(&self) -> impl Iterator<Item = (&Element, &BigRational)> {
        self.masses.values().map(|(e, q)| (e, q))
    }

    /// Measure convolution (self * other)(x) = sum_y self(y) other(y^{-1} x),
    /// computed as the pushforward of the product over both supports.
    pub fn convolve(&self, group: &MarkedGroup, other: &WalkMeasure, support_cap: usize) -> Result<WalkMeasure> {
        let mut masses: BTreeMap<Vec<u8>, (Element, BigRational)> = BTreeMap::new();
        for (a, qa) in self.iter() {
            for (b, qb) in other.iter() {
                let prod = group.multiply(a, b)?;
                let w = qa * qb;
                let key = prod.canonical_key();
                match masses.get_mut(&key) {
                    Some((_, q)) => *q += w,
                    None => {
                        masses.insert(key, (prod, w));
                    }
                }
                if masses.len() > support_cap {
                    return Err(Error::StepBudget {
                        context: "walk measure convolution support",
                        steps: masses.len(),
                        cap: support_cap,
                    });
                }
            }
        }
        Ok(WalkMeasure { masses, steps: self.steps + other.steps })
    }

    fn scale(&mut self, factor: &BigRational) {
        for (_, q) in self.masses.values_mut() {
            *q *= factor;
        }
    }

    fn accumulate(&mut self, other: &WalkMeasure) {
        for (e, q) in other.iter() {
            let key = e.canonical_key();
            match self.masses.get_mut(&key) {
                Some((_, acc)) => *acc += q,
                None => {
                    self.masses.insert(key, (e.clone(), q.clone()));
                }
            }
        }
    }

    /// Exact l1 norm of the measure's Laplacian, Delta mu(x) = 2|S| mu(x)
    /// - 2 sum_s mu(xs), summed over the support and its generator fringe.
    pub fn laplacian_l1(&self, group: &MarkedGroup) -> Result<BigRational> {
        let two_s = BigRational::from(BigInt::from(2 * group.generator_count() as i64));
        let two = BigRational::from(BigInt::from(2));
        // Delta mu is supported on supp(mu) union supp(mu) S^{-1}; collect it.
        let mut sites: BTreeMap<Vec<u8>, Element> = BTreeMap::new();
        for (e, _) in self.iter() {
            sites.insert(e.canonical_key(), e.clone());
            for s in group.generators() {
                let shifted = group.multiply(e, &group.inverse(s)?)?;
                sites.insert(shifted.canonical_key(), shifted);
            }
        }
        let mut total = BigRational::zero();
        for x in sites.values() {
            let mut v = &two_s * self.mass_of(x);
            for s in group.generators() {
                let xs = group.multiply(x, s)?;
                v -= &two * self.mass_of(&xs);
            }
            total += v.abs();
        }
        Ok(total)
    }

    /// Read the measure onto a ball as a float-valued function. Every support
    /// point must already lie in the ball.
    pub fn to_ball_function<'a>(&self, ball: &'a Ball) -> Result<BallFunction<'a>> {
        let mut values = vec![0.0; ball.len()];
        for (e, q) in self.iter() {
            let i = ball.index_of(e).ok_or_else(|| Error::NotInBall {
                context: format!("walk measure support point after {} steps", self.steps),
            })?;
            values[i] = rational_to_f64(q);
        }
        BallFunction::new(ball, values)
    }

    /// Support as a key-ordered map of float masses, for callers that work
    /// outside any enumerated ball.
    pub fn support_values(&self) -> BTreeMap<Vec<u8>, (Element, f64)> {
        self.masses
            .iter()
            .map(|(k, (e, q))| (k.clone(), (e.clone(), rational_to_f64(q))))
            .collect()
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// m-fold convolution power of the uniform generator step.
pub fn walk_measure(group: &MarkedGroup, m: u32, support_cap: usize) -> Result<WalkMeasure> {
    let step = WalkMeasure::uniform_step(group);
    let mut acc = WalkMeasure::delta(group);
    for _ in 0..m {
        acc = acc.convolve(group, &step, support_cap)?;
    }
    Ok(acc)
}

/// Cesaro average f = (1/(R+1)) sum_{m=0..R} sigma^(m). The 1/(R+1) keeps the
/// total mass exactly 1; the telescoping bound |Delta f|_1 <= 4|S|/(R+1)
/// survives unchanged.
pub fn cesaro_average(group: &MarkedGroup, r: u32, support_cap: usize) -> Result<WalkMeasure> {
    let step = WalkMeasure::uniform_step(group);
    let mut power = WalkMeasure::delta(group);
    let mut sum = power.clone();
    for _ in 0..r {
        power = power.convolve(group, &step, support_cap)?;
        sum.accumulate(&power);
    }
    let norm = BigRational::new(BigInt::one(), BigInt::from(r as i64 + 1));
    sum.scale(&norm);
    sum.steps = r;
    Ok(sum)
}
