//! Discrete calculus on enumerated Cayley balls.
//!
//! Functions are plain value vectors aligned with a ball's element ordering.
//! Derivative operators only mean anything where every generator neighbor is
//! inside the ball: that is the norm <= radius-1 prefix, or the whole ball
//! once enumeration saturated a finite group. Outside that region the
//! operators write zeros, and the interior length tells consumers where the
//! meaningful prefix ends.

use std::io::Write;

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::marked::MarkedGroup;

/// Real-valued function on a ball, indexed by the ball ordering.
#[derive(Clone, Debug)]
pub struct BallFunction<'a> {
    pub ball: &'a Ball,
    pub values: Vec<f64>,
}

/// One real value per (element, generator) pair, row-major in the element
/// index. Entries at indices >= `defined` are padding zeros.
#[derive(Clone, Debug)]
pub struct VectorFieldOnBall<'a> {
    pub ball: &'a Ball,
    pub values: Vec<f64>,
    pub defined: usize,
}

/// Number of leading ball indices whose full generator star lies inside the
/// ball. Saturated balls (finite group fully enumerated) are all interior.
pub fn interior_len(ball: &Ball) -> usize {
    if ball.saturated_at().is_some_and(|s| s <= ball.radius()) {
        ball.len()
    } else if ball.radius() == 0 {
        0
    } else {
        ball.prefix_len(ball.radius() - 1)
    }
}

/// For each generator index, the position of its inverse in the generator
/// list. Marked groups are symmetrized, so this is a permutation.
pub fn inverse_generator_perm(group: &MarkedGroup) -> Result<Vec<usize>> {
    let keys: Vec<Vec<u8>> = group.generators().iter().map(|g| g.canonical_key()).collect();
    let mut perm = Vec::with_capacity(keys.len());
    for (j, g) in group.generators().iter().enumerate() {
        let inv_key = group.inverse(g)?.canonical_key();
        let pos = keys
            .iter()
            .position(|k| *k == inv_key)
            .ok_or(Error::AsymmetricGenerators { index: j })?;
        perm.push(pos);
    }
    Ok(perm)
}

fn require_finite(values: &[f64], context: &'static str) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NumericalFailure {
                context,
                detail: format!("non-finite value {v} at ball index {i}"),
            });
        }
    }
    Ok(())
}

impl<'a> BallFunction<'a> {
    pub fn new(ball: &'a Ball, values: Vec<f64>) -> Result<Self> {
        if values.len() != ball.len() {
            return Err(Error::Spec(format!(
                "ball function needs {} values, got {}",
                ball.len(),
                values.len()
            )));
        }
        require_finite(&values, "ball function values")?;
        Ok(BallFunction { ball, values })
    }

    pub fn constant(ball: &'a Ball, c: f64) -> Self {
        BallFunction { ball, values: vec![c; ball.len()] }
    }

    pub fn from_fn(ball: &'a Ball, mut f: impl FnMut(&crate::backend::Element) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..ball.len()).map(|i| f(ball.element(i))).collect();
        BallFunction::new(ball, values)
    }

    pub fn interior_len(&self) -> usize {
        interior_len(self.ball)
    }

    fn neighbor_value(&self, i: usize, j: usize) -> f64 {
        let n = self.ball.neighbor(i, j).expect("interior point lost a neighbor");
        self.values[n]
    }

    /// Per-generator forward differences (u(xs) - u(x)) on the interior.
    pub fn gradient(&self) -> VectorFieldOnBall<'a> {
        let ngen = self.ball.group().generator_count();
        let interior = self.interior_len();
        let mut values = vec![0.0; self.ball.len() * ngen];
        for i in 0..interior {
            for j in 0..ngen {
                values[i * ngen + j] = self.neighbor_value(i, j) - self.values[i];
            }
        }
        VectorFieldOnBall { ball: self.ball, values, defined: interior }
    }

    /// 2|S| u(x) - 2 sum_s u(xs) on the interior, zeros beyond it.
    pub fn laplacian(&self) -> Result<BallFunction<'a>> {
        let interior = self.interior_len();
        if interior == 0 {
            return Err(Error::Spec("laplacian needs a nonempty interior".into()));
        }
        let ngen = self.ball.group().generator_count();
        let mut values = vec![0.0; self.ball.len()];
        for i in 0..interior {
            let mut acc = 2.0 * ngen as f64 * self.values[i];
            for j in 0..ngen {
                acc -= 2.0 * self.neighbor_value(i, j);
            }
            values[i] = acc;
        }
        Ok(BallFunction { ball: self.ball, values })
    }

    /// Largest generator increment |u(xs) - u(x)| over interior x.
    pub fn lipschitz_norm(&self) -> f64 {
        let ngen = self.ball.group().generator_count();
        let mut lip = 0.0f64;
        for i in 0..self.interior_len() {
            for j in 0..ngen {
                lip = lip.max((self.neighbor_value(i, j) - self.values[i]).abs());
            }
        }
        lip
    }

    /// Sup norm of the Laplacian over the interior.
    pub fn eps_harmonic(&self) -> Result<f64> {
        let lap = self.laplacian()?;
        let interior = self.interior_len();
        Ok(lap.values[..interior].iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// Euclidean norm of the gradient vector at one interior index.
    pub fn grad_norm_at(&self, i: usize) -> Option<f64> {
        if i >= self.interior_len() {
            return None;
        }
        let ngen = self.ball.group().generator_count();
        let mut acc = 0.0;
        for j in 0..ngen {
            let d = self.neighbor_value(i, j) - self.values[i];
            acc += d * d;
        }
        Some(acc.sqrt())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV rows of (canonical key in hex, word norm, value).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "key,norm,value")?;
        for i in 0..self.ball.len() {
            let key: String = self.ball.key(i).iter().map(|b| format!("{b:02x}")).collect();
            writeln!(w, "{},{},{}", key, self.ball.norm(i), self.values[i])?;
        }
        Ok(())
    }
}

impl<'a> VectorFieldOnBall<'a> {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let ngen = self.ball.group().generator_count();
        self.values[i * ngen + j]
    }

    /// Euclidean norm across generator coordinates at one element.
    pub fn norm_at(&self, i: usize) -> f64 {
        let ngen = self.ball.group().generator_count();
        (0..ngen).map(|j| self.entry(i, j).powi(2)).sum::<f64>().sqrt()
    }

    /// Sum over elements of the per-point Euclidean norm.
    pub fn l1_norm(&self) -> f64 {
        (0..self.defined).map(|i| self.norm_at(i)).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Divergence sum_s (F_s(x) - F_s(x s^{-1})), written where x and all its
    /// backward neighbors carry defined field entries. With the forward-
    /// difference gradient this makes laplacian = -divergence(gradient) exact.
    pub fn divergence(&self) -> Result<BallFunction<'a>> {
        let group = self.ball.group();
        let ngen = group.generator_count();
        let inv = inverse_generator_perm(group)?;
        let mut values = vec![0.0; self.ball.len()];
        for i in 0..interior_len(self.ball).min(self.defined) {
            let mut acc = 0.0;
            let mut ok = true;
            for j in 0..ngen {
                let back = self.ball.neighbor(i, inv[j]).expect("interior point lost a neighbor");
                if back >= self.defined {
                    ok = false;
                    break;
                }
                acc += self.entry(i, j) - self.entry(back, j);
            }
            if ok {
                values[i] = acc;
            }
        }
        Ok(BallFunction { ball: self.ball, values })
    }
}

/// Lipschitz and almost-harmonic measurement: the check passes when the
/// measured Lipschitz norm stays at most 1 and the measured Laplacian sup
/// norm stays at most `eps`.
pub fn eps_harmonic_check(u: &BallFunction, eps: f64) -> Result<(bool, f64, f64)> {
    let lip = u.lipschitz_norm();
    let measured = u.eps_harmonic()?;
    Ok((lip <= 1.0 && measured <= eps, lip, measured))
}

fn support(values: &[f64]) -> Vec<usize> {
    values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect()
}

/// Convolution (u*v)(x) = sum_y u(y) v(y^{-1} x) of two finitely supported
/// functions on the same ball. Any product landing outside the ball is a
/// typed escape, so the result is exact, never silently truncated.
pub fn convolve<'a>(u: &BallFunction<'a>, v: &BallFunction<'a>) -> Result<BallFunction<'a>> {
    let ball = same_ball(u.ball, v.ball)?;
    let group = ball.group();
    let mut out = vec![0.0; ball.len()];
    for &i in &support(&u.values) {
        for &j in &support(&v.values) {
            let prod = group.multiply(ball.element(i), ball.element(j))?;
            let idx = ball.index_of(&prod).ok_or(Error::SupportEscapes)?;
            out[idx] += u.values[i] * v.values[j];
        }
    }
    BallFunction::new(ball, out)
}

/// Convolution of a function against each generator component of a field.
pub fn convolve_field<'a>(u: &BallFunction<'a>, f: &VectorFieldOnBall<'a>) -> Result<VectorFieldOnBall<'a>> {
    let ball = same_ball(u.ball, f.ball)?;
    let group = ball.group();
    let ngen = group.generator_count();
    let mut out = vec![0.0; ball.len() * ngen];
    for &i in &support(&u.values) {
        for j in 0..f.defined {
            if (0..ngen).all(|s| f.entry(j, s) == 0.0) {
                continue;
            }
            let prod = group.multiply(ball.element(i), ball.element(j))?;
            let idx = ball.index_of(&prod).ok_or(Error::SupportEscapes)?;
            for s in 0..ngen {
                out[idx * ngen + s] += u.values[i] * f.entry(j, s);
            }
        }
    }
    Ok(VectorFieldOnBall { ball, values: out, defined: ball.len() })
}

fn same_ball<'a>(a: &'a Ball, b: &'a Ball) -> Result<&'a Ball> {
    if !std::ptr::eq(a, b) {
        return Err(Error::Spec("convolution operands must share one ball".into()));
    }
    Ok(a)
}

/// Index map x -> x^{-1} within a ball (balls are inverse-closed).
pub fn inverse_index_map(ball: &Ball) -> Result<Vec<usize>> {
    let group = ball.group();
    let mut map = Vec::with_capacity(ball.len());
    for i in 0..ball.len() {
        let inv = group.inverse(ball.element(i))?;
        let idx = ball.index_of(&inv).ok_or_else(|| Error::NotInBall {
            context: format!("inverse of ball index {i}"),
        })?;
        map.push(idx);
    }
    Ok(map)
}
