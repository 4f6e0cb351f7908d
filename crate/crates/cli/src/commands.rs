//! Command implementations behind the `fgromov` binary. Each command is a
//! pure function from a parsed group (or matrix) and options to a
//! serializable payload; main() only does argument plumbing and printing.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use fgromov_core::backend::GroupBackend;
use fgromov_core::ball::{enumerate_ball, Ball};
use fgromov_core::config::{
    DEFAULT_DROP_FACTOR, DEFAULT_ELEMENT_CAP, DEGREE_DROP_MIN, EPS_TARGET_EXPONENT,
};
use fgromov_core::growth::{growth_degree_estimate, GrowthSequence};
use fgromov_core::harmonic::{build_almost_harmonic, AlmostHarmonic, BuildCase, BuiltHarmonic};
use fgromov_core::kleiner::{dirichlet_candidates, greedy_dimension, GreedyStep};
use fgromov_core::milnor::{
    dichotomy, growth_witness, slow_growth_generators, DichotomyResult, SlowGrowthParams,
};
use fgromov_core::subgroup::{commutator_generators, generator_reduction, nilpotency_check, KrCert};
use fgromov_core::{Element, Error, IntMatrix, MarkedGroup, Result};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::spec::render_element;
use crate::trace::{
    CertStamp, GenRedStamp, GrowthStamp, HarmonicStamp, ReduceStep, ReductionTrace, StepOp,
    Terminal, WitnessStamp,
};

/// Shared command context: cache location and the element budget every ball
/// enumeration runs under.
pub struct Ctx {
    pub cache_dir: Option<PathBuf>,
    pub element_cap: usize,
    pub seed: u64,
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx { cache_dir: None, element_cap: DEFAULT_ELEMENT_CAP, seed: 0 }
    }
}

impl Ctx {
    /// Enumerate a ball, or reload it from the cache when one is configured.
    /// Cache files are keyed by group fingerprint and radius; a hit is
    /// validated against the requesting group on load.
    pub fn ball(&self, group: &MarkedGroup, radius: u32) -> Result<Ball> {
        let Some(dir) = &self.cache_dir else {
            return enumerate_ball(group, radius, self.element_cap);
        };
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}-r{radius}.ball", group.fingerprint()));
        if path.exists() {
            return Ball::read_cache(group, &path);
        }
        let ball = enumerate_ball(group, radius, self.element_cap)?;
        ball.write_cache(&path)?;
        Ok(ball)
    }
}

fn growth_stamp(seq: &GrowthSequence, radius: u32) -> GrowthStamp {
    let r1 = (radius / 2).max(1);
    let degree = if radius >= 2 && r1 < radius {
        growth_degree_estimate(seq, r1, radius).ok()
    } else {
        None
    };
    GrowthStamp {
        radius,
        sizes: seq.sizes.clone(),
        degree,
        stabilized: seq.detect_finite().map(|(r, _)| r),
    }
}

#[derive(Serialize)]
pub struct StabilizationStamp {
    pub radius: u32,
    pub size: u64,
}

#[derive(Serialize)]
pub struct GrowthPayload {
    pub radius: u32,
    pub sizes: Vec<u64>,
    pub degree: Option<fgromov_core::growth::GrowthDegreeEstimate>,
    pub stabilized: Option<StabilizationStamp>,
}

pub fn cmd_growth(group: &MarkedGroup, radius: u32, ctx: &Ctx) -> Result<GrowthPayload> {
    let ball = ctx.ball(group, radius)?;
    let seq = GrowthSequence::from_ball(&ball);
    let stamp = growth_stamp(&seq, radius);
    Ok(GrowthPayload {
        radius,
        sizes: stamp.sizes,
        degree: stamp.degree,
        stabilized: seq.detect_finite().map(|(r, size)| StabilizationStamp { radius: r, size }),
    })
}

/// RFC-4180 table: CRLF rows, `r,ball_size,note` with the stabilization row
/// marked in the note column.
pub fn growth_csv<W: Write>(payload: &GrowthPayload, mut w: W) -> Result<()> {
    write!(w, "r,ball_size,note\r\n")?;
    for (r, size) in payload.sizes.iter().enumerate() {
        let note = match &payload.stabilized {
            Some(s) if s.radius as usize == r => "stabilized",
            _ => "",
        };
        write!(w, "{r},{size},{note}\r\n")?;
    }
    Ok(())
}

pub struct ReduceOptions {
    /// Radius for per-step growth measurement.
    pub radius: u32,
    /// Radius budget for the commutator stabilization scan.
    pub zonk_radius: u32,
    /// Scale of the almost-harmonic probe.
    pub harmonic_scale: u32,
    /// r0 handed to the generator reduction.
    pub genred_r0: u32,
    pub genred_kappa: f64,
    pub max_steps: u32,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            radius: 8,
            zonk_radius: 6,
            harmonic_scale: 4,
            // floor(sqrt(18)) = 4 matches the largest norm the net can reach,
            // so the reduction's own certificate is satisfiable
            genred_r0: 18,
            genred_kappa: 0.5,
            max_steps: fgromov_core::config::DEFAULT_STEP_BUDGET as u32,
        }
    }
}

fn case_name(case: &BuildCase) -> &'static str {
    match case {
        BuildCase::SignKernel => "sign_kernel",
        BuildCase::SpectralProjection => "spectral_projection",
    }
}

fn harmonic_stamp(b: &BuiltHarmonic, scale: u32, ngen: usize) -> HarmonicStamp {
    HarmonicStamp {
        case: case_name(&b.case).to_string(),
        scale,
        lip: b.lip,
        eps: b.eps,
        eps_target: ngen as f64 * (scale as f64).powf(-EPS_TARGET_EXPONENT),
        grad_at_id: b.grad_at_id,
    }
}

/// The desk-scale reduction loop: measure growth, rebuild the marking from a
/// separated net, probe with an almost-harmonic function, pass to the
/// witnessed commutator subgroup, and recurse while the measured growth
/// degree keeps dropping. Every passage carries re-verified certificates.
pub fn cmd_reduce(group: &MarkedGroup, opts: &ReduceOptions, ctx: &Ctx) -> Result<ReductionTrace> {
    let mut current = group.clone();
    let mut steps: Vec<ReduceStep> = Vec::new();
    let finish = |steps: Vec<ReduceStep>, terminal: Terminal| ReductionTrace {
        step_count: steps.len(),
        steps,
        terminal,
    };

    for index in 0..opts.max_steps {
        let ball = ctx.ball(&current, opts.radius)?;
        let seq = GrowthSequence::from_ball(&ball);
        let before = growth_stamp(&seq, opts.radius);
        if let Some((r, size)) = seq.detect_finite() {
            return Ok(finish(steps, Terminal::Finite { stable_radius: r, size }));
        }

        let genred =
            generator_reduction(&current, opts.genred_r0, opts.genred_kappa, ctx.element_cap)?;
        // the producer checked the certificate once; check it again from the
        // recorded data alone so the trace vouches for itself
        genred.cert.verify(&current, ctx.element_cap)?;
        let genred_stamp = GenRedStamp {
            separation_radius: genred.r,
            tenfold_ratio: genred.tenfold_ratio,
            cert: CertStamp::from_cert(&genred.cert, true),
        };

        let window = ctx.ball(&current, opts.harmonic_scale + 1)?;
        let harmonic = match build_almost_harmonic(&window, opts.harmonic_scale, ctx.element_cap)? {
            AlmostHarmonic::FiniteAtScale { saturation_radius, size } => {
                return Ok(finish(
                    steps,
                    Terminal::Finite {
                        stable_radius: saturation_radius.saturating_sub(1),
                        size: size as u64,
                    },
                ));
            }
            AlmostHarmonic::Built(b) => {
                harmonic_stamp(&b, opts.harmonic_scale, current.generator_count())
            }
        };

        let zonk = commutator_generators(&current, opts.zonk_radius, ctx.element_cap)?;
        let id_key = current.identity().canonical_key();
        let gens = current.generators();
        let mut witnesses = Vec::new();
        let mut new_gens = Vec::new();
        for (el, w) in &zonk.s_prime {
            if el.canonical_key() == id_key {
                continue;
            }
            let c = current.commutator(&gens[w.left], &gens[w.right])?;
            let rebuilt = current.conjugate(&w.conjugator, &c)?;
            if rebuilt.canonical_key() != el.canonical_key() {
                return Err(Error::CertificateFailed {
                    context: "commutator witness does not rebuild its generator".into(),
                });
            }
            witnesses.push(WitnessStamp {
                element: render_element(el),
                conjugator: render_element(&w.conjugator),
                left: w.left,
                right: w.right,
                reverified: true,
            });
            new_gens.push(el.clone());
        }
        let op = StepOp::CyclicKernel {
            target: "abelianization of the current marking".into(),
            oracle: "commutator subgroup generated by witnessed conjugated commutators".into(),
            pigeonhole_radius: zonk.r,
            witnesses,
        };

        if new_gens.is_empty() {
            // every commutator is the identity: the kernel passage lands on
            // the trivial group
            let after =
                GrowthStamp { radius: 0, sizes: vec![1], degree: None, stabilized: Some(0) };
            let drop = before.degree.map(|d| d.slope).unwrap_or(0.0);
            steps.push(ReduceStep {
                index: index as usize,
                generator_reduction: Some(genred_stamp),
                harmonic: Some(harmonic),
                op,
                growth_before: before,
                growth_after: after,
                degree_drop: drop,
            });
            return Ok(finish(steps, Terminal::Trivial));
        }

        let subgroup = current.remark(new_gens)?;
        let sub_ball = ctx.ball(&subgroup, opts.radius)?;
        let sub_seq = GrowthSequence::from_ball(&sub_ball);
        let after = growth_stamp(&sub_seq, opts.radius);
        let drop = match (&before.degree, &after.degree) {
            (Some(b), Some(a)) => b.slope - a.slope,
            _ => 0.0,
        };
        let stalled = drop < DEGREE_DROP_MIN && after.stabilized.is_none();
        steps.push(ReduceStep {
            index: index as usize,
            generator_reduction: Some(genred_stamp),
            harmonic: Some(harmonic),
            op,
            growth_before: before,
            growth_after: after,
            degree_drop: drop,
        });
        if stalled {
            // no further descent to buy with more steps
            return Ok(finish(steps, Terminal::Budget { steps_used: index + 1 }));
        }
        current = subgroup;
    }
    let used = steps.len() as u32;
    Ok(finish(steps, Terminal::Budget { steps_used: used }))
}

#[derive(Serialize)]
pub struct NilpotencyWitnessStamp {
    pub indices: Vec<usize>,
    pub element: String,
}

#[derive(Serialize)]
pub struct CertifyPayload {
    pub s: u32,
    pub holds: bool,
    pub witness: Option<NilpotencyWitnessStamp>,
    pub k: u32,
    pub r: u32,
    pub generating_cert: CertStamp,
}

/// Nilpotency of step s checked exhaustively on the marked generators, plus
/// a (k, r) generation certificate for the marking itself.
pub fn cmd_certify_nilpotent(
    group: &MarkedGroup,
    s: u32,
    k: u32,
    r: u32,
    tuple_cap: u64,
    ctx: &Ctx,
) -> Result<CertifyPayload> {
    let outcome = nilpotency_check(group, s, tuple_cap)?;
    let cert = KrCert {
        k,
        r,
        s_prime: group.generators().to_vec(),
        checked_inclusion: false,
    };
    cert.verify(group, ctx.element_cap)?;
    let cert = KrCert { checked_inclusion: true, ..cert };
    Ok(CertifyPayload {
        s,
        holds: outcome.holds,
        witness: outcome.witness.map(|(indices, el)| NilpotencyWitnessStamp {
            indices,
            element: render_element(&el),
        }),
        k,
        r,
        generating_cert: CertStamp::from_cert(&cert, true),
    })
}

#[derive(Serialize)]
pub struct DichotomyPayload {
    pub dim: usize,
    pub n_steps: u32,
    pub result: DichotomyResult,
}

/// Periodicity-versus-growth for a unimodular integer matrix, with the
/// growth witness re-measured over the requested number of steps.
pub fn cmd_dichotomy(t: &IntMatrix, n_steps: u32) -> Result<DichotomyPayload> {
    let mut result = dichotomy(t)?;
    if let DichotomyResult::Growth { v, measured_rate, .. } = &mut result {
        if n_steps != 20 {
            let (nv, rate) = growth_witness(t, n_steps)?;
            *v = nv;
            *measured_rate = rate;
        }
    }
    Ok(DichotomyPayload { dim: t.dim, n_steps, result })
}

#[derive(Serialize)]
#[serde(tag = "outcome")]
pub enum HarmonicPayload {
    #[serde(rename = "finite")]
    Finite { saturation_radius: u32, size: u64 },
    #[serde(rename = "built")]
    Built {
        stamp: HarmonicStamp,
        grad_l1: f64,
        chosen_generator: usize,
        pigeonhole_gap: f64,
    },
}

/// Build the almost-harmonic function at one scale and report its measured
/// quantities; optionally dump the function itself as CSV.
pub fn cmd_harmonic(
    group: &MarkedGroup,
    scale: u32,
    csv: Option<&mut dyn Write>,
    ctx: &Ctx,
) -> Result<HarmonicPayload> {
    let window = ctx.ball(group, scale + 1)?;
    match build_almost_harmonic(&window, scale, ctx.element_cap)? {
        AlmostHarmonic::FiniteAtScale { saturation_radius, size } => {
            Ok(HarmonicPayload::Finite { saturation_radius, size: size as u64 })
        }
        AlmostHarmonic::Built(b) => {
            if let Some(w) = csv {
                b.u.write_csv(w)?;
            }
            Ok(HarmonicPayload::Built {
                stamp: harmonic_stamp(&b, scale, group.generator_count()),
                grad_l1: b.grad_l1,
                chosen_generator: b.chosen_generator,
                pigeonhole_gap: b.pigeonhole_gap,
            })
        }
    }
}

/// Coordinate features used to seed Dirichlet boundary data, one natural
/// set per backend.
pub fn char_features(group: &MarkedGroup) -> Vec<Box<dyn Fn(&Element) -> f64>> {
    fn big_to_f64(x: &BigInt) -> f64 {
        x.to_f64().unwrap_or(f64::INFINITY)
    }
    match group.backend() {
        GroupBackend::IntegerMatrix { dim } => (0..dim - 1)
            .map(|i| {
                let i = i;
                Box::new(move |e: &Element| match e {
                    Element::Matrix(m) => big_to_f64(m.at(i, i + 1)),
                    _ => 0.0,
                }) as Box<dyn Fn(&Element) -> f64>
            })
            .collect(),
        GroupBackend::Cyclic { modulus } => {
            let m = *modulus;
            vec![Box::new(move |e: &Element| match e {
                Element::Cyclic(v) => {
                    if *v <= m / 2 {
                        *v as f64
                    } else {
                        *v as f64 - m as f64
                    }
                }
                _ => 0.0,
            })]
        }
        GroupBackend::FreeAbelian { dim } => (0..*dim)
            .map(|i| {
                Box::new(move |e: &Element| match e {
                    Element::Vector(v) => v[i] as f64,
                    _ => 0.0,
                }) as Box<dyn Fn(&Element) -> f64>
            })
            .collect(),
        GroupBackend::SemidirectZByLattice { dim, .. } => {
            let mut out: Vec<Box<dyn Fn(&Element) -> f64>> =
                vec![Box::new(|e: &Element| match e {
                    Element::Semidirect { shift, .. } => *shift as f64,
                    _ => 0.0,
                })];
            for i in 0..*dim {
                out.push(Box::new(move |e: &Element| match e {
                    Element::Semidirect { coords, .. } => big_to_f64(&coords[i]),
                    _ => 0.0,
                }));
            }
            out
        }
        GroupBackend::Lamplighter => vec![
            Box::new(|e: &Element| match e {
                Element::Lamp { cursor, .. } => *cursor as f64,
                _ => 0.0,
            }),
            Box::new(|e: &Element| match e {
                Element::Lamp { lamps, .. } => lamps.len() as f64,
                _ => 0.0,
            }),
        ],
        GroupBackend::FreeGroup { rank } => (1..=*rank as i32)
            .map(|g| {
                Box::new(move |e: &Element| match e {
                    Element::Word(w) => {
                        w.iter().map(|&l| if l == g { 1.0 } else if l == -g { -1.0 } else { 0.0 }).sum()
                    }
                    _ => 0.0,
                }) as Box<dyn Fn(&Element) -> f64>
            })
            .collect(),
    }
}

#[derive(Serialize)]
pub struct GreedyStepStamp {
    pub k: usize,
    pub vol: f64,
    pub ratio: f64,
}

#[derive(Serialize)]
pub struct KleinerPayload {
    pub radius: u32,
    pub candidates: usize,
    pub drop_factor: f64,
    pub dimension: usize,
    pub steps: Vec<GreedyStepStamp>,
}

/// Dimension probe: Dirichlet-harmonic candidates from the backend's
/// coordinate characters, greedy Gram-volume growth, dimension at the
/// configured drop factor. Constants carry zero Gram volume, so they are
/// quotiented away by construction.
pub fn cmd_kleiner_dim(
    group: &MarkedGroup,
    radius: u32,
    count: usize,
    ctx: &Ctx,
) -> Result<KleinerPayload> {
    let ball = ctx.ball(group, radius)?;
    let features = char_features(group);
    let refs: Vec<&dyn Fn(&Element) -> f64> = features.iter().map(|b| b.as_ref()).collect();
    let candidates = dirichlet_candidates(&ball, &refs, count, ctx.seed)?;
    let (_, dimension, steps) = greedy_dimension(&candidates, radius, DEFAULT_DROP_FACTOR)?;
    Ok(KleinerPayload {
        radius,
        candidates: count,
        drop_factor: DEFAULT_DROP_FACTOR,
        dimension,
        steps: steps
            .iter()
            .map(|s: &GreedyStep| GreedyStepStamp { k: s.k, vol: s.vol, ratio: s.ratio })
            .collect(),
    })
}

#[derive(Serialize)]
pub struct SlowgPayload {
    pub radius: u32,
    pub shift_count: u32,
    pub range: u32,
    pub generator_count: usize,
    pub tenfold_ratio: Option<f64>,
    pub reverified: bool,
}

/// Slow-growth generating set for a split Z-by-lattice group, certificate
/// re-verified before reporting.
pub fn cmd_slowg(group: &MarkedGroup, range: u32, ctx: &Ctx) -> Result<SlowgPayload> {
    let shift = group
        .generators()
        .iter()
        .find(|e| matches!(e, Element::Semidirect { shift, .. } if *shift != 0))
        .cloned()
        .ok_or_else(|| Error::Spec("slow growth needs a generator with a nonzero shift".into()))?;
    let params = SlowGrowthParams { range, ..SlowGrowthParams::default() };
    let cert = slow_growth_generators(group, &shift, &params)?;
    cert.verify(group, &shift, ctx.element_cap)?;
    Ok(SlowgPayload {
        radius: cert.radius,
        shift_count: cert.shift_count,
        range: cert.range,
        generator_count: cert.s_tilde.len(),
        tenfold_ratio: cert.tenfold_ratio,
        reverified: true,
    })
}

#[derive(Serialize)]
pub struct MilnorPayload {
    pub n: u32,
    pub curvature: f64,
    pub delta_max: f64,
    pub delta_min: f64,
    pub radius: f64,
    pub lhs: f64,
    pub lhs_log: f64,
    pub rhs: f64,
    pub ball_bound: f64,
    pub ball_bound_log: f64,
    pub flag: bool,
    pub hypothesis_warning: Option<String>,
}

/// The displacement inequality 4 (Δ/δ) exp(2π Δ sqrt(K) R) < R and the
/// matching ball bound 4^n (Δ/δ)^n R^n exp(2π Δ sqrt(K) R), evaluated in
/// the log domain so large exponents flag correctly instead of overflowing.
pub fn milnor_bound_check(
    n: u32,
    curvature: f64,
    delta_max: f64,
    delta_min: f64,
    radius: f64,
    hypothesis_constant: Option<f64>,
) -> Result<MilnorPayload> {
    if n == 0 {
        return Err(Error::Spec("manifold dimension must be at least 1".into()));
    }
    if !(curvature >= 0.0) || !(delta_min > 0.0) || !(delta_max >= delta_min) || !(radius > 0.0) {
        return Err(Error::Spec(
            "need K >= 0, 0 < delta_min <= delta_max and R > 0".into(),
        ));
    }
    let ratio_log = (delta_max / delta_min).ln();
    let exp_term = 2.0 * PI * delta_max * curvature.sqrt() * radius;
    let lhs_log = 4f64.ln() + ratio_log + exp_term;
    let flag = lhs_log < radius.ln();
    let ball_log = n as f64 * (4f64.ln() + ratio_log + radius.ln()) + exp_term;
    let hypothesis_warning = hypothesis_constant.and_then(|c| {
        let needed = c * (2.0 * n as f64).powf(c);
        let have = if radius > 1.0 { radius.ln().ln() } else { f64::NEG_INFINITY };
        if have < needed {
            Some(format!(
                "R = {radius} is below exp(exp({needed:.3})); the displacement test is only \
                 conclusive above that scale"
            ))
        } else {
            None
        }
    });
    Ok(MilnorPayload {
        n,
        curvature,
        delta_max,
        delta_min,
        radius,
        lhs: lhs_log.exp(),
        lhs_log,
        rhs: radius,
        ball_bound: ball_log.exp(),
        ball_bound_log: ball_log,
        flag,
        hypothesis_warning,
    })
}
