//! Growth sequences and the exact polynomial-bound predicate.

use crate::ball::{enumerate_ball, Ball};
use crate::config::EXPONENTIAL_RATIO_FLAG;
use crate::error::{Error, Result};
use crate::marked::MarkedGroup;
use num_bigint::BigUint;
use serde::Serialize;

/// Cumulative ball sizes |B(0)|, |B(1)|, ..., |B(radius)| for one marked
/// group, tagged with the group fingerprint they were measured on.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthSequence {
    pub radius: u32,
    pub sizes: Vec<u64>,
    pub fingerprint: String,
}

pub fn growth_sequence(group: &MarkedGroup, radius: u32, cap: usize) -> Result<GrowthSequence> {
    let ball = enumerate_ball(group, radius, cap)?;
    Ok(GrowthSequence::from_ball(&ball))
}

impl GrowthSequence {
    pub fn from_ball(ball: &Ball) -> Self {
        let sizes = (0..=ball.radius()).map(|r| ball.ball_size(r) as u64).collect();
        GrowthSequence {
            radius: ball.radius(),
            sizes,
            fingerprint: ball.group().fingerprint().to_string(),
        }
    }

    /// Exact test of |B(r0)| <= r0^d for rational d = num/den: compares
    /// |B(r0)|^den against r0^num in big integers, no rounding anywhere.
    pub fn is_growth_group(&self, r0: u32, d_num: u32, d_den: u32) -> Result<bool> {
        if r0 > self.radius || d_den == 0 {
            return Err(Error::RadiusOutOfRange { radius: r0, available: self.radius });
        }
        let lhs = BigUint::from(self.sizes[r0 as usize]).pow(d_den);
        let rhs = BigUint::from(r0).pow(d_num);
        Ok(lhs <= rhs)
    }

    /// First radius where the ball stops growing, with the stable size.
    pub fn detect_finite(&self) -> Option<(u32, u64)> {
        for r in 0..self.radius as usize {
            if self.sizes[r] == self.sizes[r + 1] {
                return Some((r as u32, self.sizes[r]));
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthDegreeEstimate {
    pub r1: u32,
    pub r2: u32,
    /// log-log slope of |B(r)| between the two radii.
    pub slope: f64,
    /// Last-ratio heuristic flag; see `config::EXPONENTIAL_RATIO_FLAG`.
    pub exponential: bool,
    pub last_ratio: f64,
}

/// Log-log slope of the ball sizes between r1 < r2, plus an exponential-growth
/// flag from the last successive ratio.
pub fn growth_degree_estimate(seq: &GrowthSequence, r1: u32, r2: u32) -> Result<GrowthDegreeEstimate> {
    if r1 == 0 || r1 >= r2 || r2 > seq.radius {
        return Err(Error::RadiusOutOfRange { radius: r2, available: seq.radius });
    }
    let s1 = seq.sizes[r1 as usize] as f64;
    let s2 = seq.sizes[r2 as usize] as f64;
    let slope = (s2.ln() - s1.ln()) / ((r2 as f64).ln() - (r1 as f64).ln());
    let prev = seq.sizes[(r2 - 1) as usize] as f64;
    let last_ratio = if prev > 0.0 { s2 / prev } else { 1.0 };
    Ok(GrowthDegreeEstimate {
        r1,
        r2,
        slope,
        exponential: last_ratio >= EXPONENTIAL_RATIO_FLAG,
        last_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DEFAULT_ELEMENT_CAP;
    use crate::marked::standard;

    #[test]
    fn line_growth_is_exactly_linear() {
        let g = standard::free_abelian(1);
        let seq = growth_sequence(&g, 100, DEFAULT_ELEMENT_CAP).unwrap();
        assert_eq!(seq.sizes[100], 201);
        // 201^2 = 40401 <= 100^3 = 1000000
        assert!(seq.is_growth_group(100, 3, 2).unwrap());
    }

    #[test]
    fn cyclic_detects_finiteness() {
        let g = standard::cyclic(101);
        let seq = growth_sequence(&g, 60, 10_000).unwrap();
        assert_eq!(seq.detect_finite(), Some((50, 101)));
    }

    #[test]
    fn plane_degree_estimate() {
        let g = standard::free_abelian(2);
        let seq = growth_sequence(&g, 12, 10_000).unwrap();
        let est = growth_degree_estimate(&seq, 4, 12).unwrap();
        assert!(est.slope > 1.8 && est.slope < 2.2, "slope {}", est.slope);
        assert!(!est.exponential);
    }

    #[test]
    fn free_group_flags_exponential() {
        let g = standard::free_group(2);
        let seq = growth_sequence(&g, 8, 100_000).unwrap();
        for (r, &s) in seq.sizes.iter().enumerate().skip(1) {
            let expect = 2 * 3u64.pow(r as u32) - 1;
            assert_eq!(s, expect, "free ball size at radius {r}");
        }
        let est = growth_degree_estimate(&seq, 2, 8).unwrap();
        assert!(est.exponential);
    }
}
