//! Acceptance gate: one test per numbered criterion. Every test prints a
//! single summary line with its measured quantities and asserts the pinned
//! tolerance and time budget; nothing here may loosen a bound to pass.

use std::time::Instant;

use fgromov_cli::commands::{cmd_reduce, Ctx, ReduceOptions};
use fgromov_cli::report::{ConfigStamp, GroupStamp, Report};
use fgromov_cli::spec::parse_element;
use fgromov_cli::trace::{CertStamp, WitnessStamp};
use fgromov_core::approxrep::trivial_directions_check;
use fgromov_core::config::DEFAULT_ELEMENT_CAP;
use fgromov_core::function::BallFunction;
use fgromov_core::growth::GrowthSequence;
use fgromov_core::harmonic::{build_almost_harmonic, poincare_check, AlmostHarmonic};
use fgromov_core::intlin::IntMatrix;
use fgromov_core::kleiner::{dirichlet_candidates, greedy_dimension};
use fgromov_core::marked::standard;
use fgromov_core::milnor::{
    assemble_virtually_nilpotent, dichotomy, slow_growth_generators, DichotomyResult,
    SlowGrowthParams,
};
use fgromov_core::poly::{cyclotomic, mahler_measure, IntPoly};
use fgromov_core::subgroup::{commutator_generators, finite_index_generators};
use fgromov_core::{enumerate_ball, Element, Error};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(label: &str, t0: Instant, budget_s: f64) {
    let dt = t0.elapsed().as_secs_f64();
    println!("{label}: pass ({dt:.2}s, budget {budget_s:.0}s)");
    assert!(dt < budget_s, "{label} blew its time budget: {dt:.2}s >= {budget_s}s");
}

#[test]
fn a01_ball_sizes_match_the_closed_form_growth_oracles() {
    let t0 = Instant::now();

    let plane = enumerate_ball(&standard::free_abelian(2), 2, 1_000).unwrap();
    assert_eq!(plane.len(), 13, "|B(2)| on the plane");

    let cyc = enumerate_ball(&standard::cyclic(101), 55, 1_000).unwrap();
    let seq = GrowthSequence::from_ball(&cyc);
    assert_eq!(seq.detect_finite(), Some((50, 101)), "cyclic(101) stabilization");

    let free = enumerate_ball(&standard::free_group(2), 8, 50_000).unwrap();
    let seq = GrowthSequence::from_ball(&free);
    for r in 0..=8u32 {
        assert_eq!(seq.sizes[r as usize], 2 * 3u64.pow(r) - 1, "free ball at r = {r}");
    }

    pass("a01 growth oracles (plane 13, cyclic stab 50, free 2*3^r-1)", t0, 5.0);
}

#[test]
fn a02_the_discrete_sine_wave_is_almost_harmonic_and_lipschitz() {
    let t0 = Instant::now();
    let n = 128u64;
    let group = standard::cyclic(n);
    let ball = enumerate_ball(&group, 64, 1_000).unwrap();
    assert_eq!(ball.len(), n as usize, "the window must wrap all the way around");

    let omega = 2.0 * std::f64::consts::PI / n as f64;
    let amp = 1.0 / omega;
    let u = BallFunction::from_fn(&ball, |e| match e {
        Element::Cyclic(v) => amp * (omega * *v as f64).sin(),
        _ => unreachable!(),
    })
    .unwrap();

    let sup_lap = u.laplacian().unwrap().sup_norm();
    let closed_form = (2.0 * n as f64 / std::f64::consts::PI) * (1.0 - omega.cos());
    assert!((sup_lap - closed_form).abs() <= 1e-9, "sup |Δu| = {sup_lap} vs {closed_form}");
    assert!((0.09..=0.11).contains(&sup_lap), "sup |Δu| = {sup_lap}");
    let lip = u.lipschitz_norm();
    assert!(lip <= 1.5, "lipschitz seminorm {lip}");

    pass(&format!("a02 sine wave (sup lap {sup_lap:.4}, lip {lip:.4})"), t0, 1.0);
}

#[test]
fn a03_the_almost_harmonic_builder_meets_its_contract_on_a_large_cycle() {
    let t0 = Instant::now();
    let group = standard::cyclic(4096);
    let r = 1024u32;
    let window = enumerate_ball(&group, r + 1, DEFAULT_ELEMENT_CAP).unwrap();
    let built = match build_almost_harmonic(&window, r, DEFAULT_ELEMENT_CAP).unwrap() {
        AlmostHarmonic::Built(b) => b,
        AlmostHarmonic::FiniteAtScale { .. } => panic!("the scale is well below saturation"),
    };

    let ngen = group.generator_count() as f64;
    let eps_target = ngen * (r as f64).powf(-1.0 / 3.0);
    assert!(built.eps <= eps_target, "eps {} > target {eps_target}", built.eps);
    assert!(built.lip <= 1.0, "lip {}", built.lip);
    assert!(built.grad_at_id >= 1.0 / ngen, "grad at id {}", built.grad_at_id);

    pass(
        &format!(
            "a03 harmonic contract (eps {:.4} <= {:.4}, lip {:.3}, grad {:.3})",
            built.eps, eps_target, built.lip, built.grad_at_id
        ),
        t0,
        120.0,
    )
}

#[test]
fn a04_the_poincare_comparison_never_fails_on_random_functions() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0usize;

    let mut run = |ball: &fgromov_core::Ball, trials: usize, radii: &[u32]| {
        for t in 0..trials {
            let values: Vec<f64> = (0..ball.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let f = BallFunction::new(ball, values).unwrap();
            let r = radii[t % radii.len()];
            // keep the 3r gradient window inside the enumerated interior
            let saturated = ball.ball_size(ball.radius()) == ball.ball_size(ball.radius() - 1);
            let max_norm = if saturated { ball.radius() } else { ball.radius() - 3 * r - 1 };
            let center = rng.gen_range(0..ball.prefix_len(max_norm.min(ball.radius())));
            let rep = poincare_check(&f, center, r).unwrap();
            assert!(rep.holds, "violation at center {center}, r {r}: {} > {}", rep.lhs, rep.rhs);
            checked += 1;
        }
    };

    let plane = enumerate_ball(&standard::free_abelian(2), 7, 10_000).unwrap();
    run(&plane, 400, &[1, 2]);
    let heis = enumerate_ball(&standard::heisenberg(), 7, 10_000).unwrap();
    run(&heis, 300, &[1]);
    let cyc = enumerate_ball(&standard::cyclic(64), 32, 10_000).unwrap();
    run(&cyc, 300, &[1, 2, 3, 4, 5]);

    assert_eq!(checked, 1000);
    pass("a04 poincare (1000 functions, 0 violations)", t0, 60.0);
}

#[test]
fn a05_the_harmonic_dimension_of_the_heisenberg_group_is_two() {
    let t0 = Instant::now();
    let group = standard::heisenberg();
    let ball = enumerate_ball(&group, 8, DEFAULT_ELEMENT_CAP).unwrap();

    let x = |e: &Element| match e {
        Element::Matrix(m) => m.at(0, 1).to_f64().unwrap(),
        _ => unreachable!(),
    };
    let z = |e: &Element| match e {
        Element::Matrix(m) => m.at(1, 2).to_f64().unwrap(),
        _ => unreachable!(),
    };
    let chars: Vec<&dyn Fn(&Element) -> f64> = vec![&x, &z];
    let candidates = dirichlet_candidates(&ball, &chars, 40, 7).unwrap();
    assert!(candidates.len() >= 40);

    let (_, dim, steps) = greedy_dimension(&candidates, 8, 1e-3).unwrap();
    assert_eq!(dim, 2, "greedy steps: {:?}", steps.iter().map(|s| s.ratio).collect::<Vec<_>>());

    // moving along the central direction must not change any candidate
    let gens = group.generators();
    let central = group.commutator(&gens[0], &gens[2]).unwrap();
    let window = 2u32;
    let mut worst_ratio = 0.0f64;
    for u in &candidates {
        let dev = trivial_directions_check(u, &[central.clone()], window).unwrap();
        let allowed = 0.05 * u.lipschitz_norm() * window as f64;
        assert!(dev <= allowed, "central deviation {dev} > {allowed}");
        worst_ratio = worst_ratio.max(dev / allowed);
    }

    pass(
        &format!("a05 heisenberg dimension (dim 2 from 40 candidates, central dev <= {worst_ratio:.3} of allowance)"),
        t0,
        300.0,
    )
}

#[test]
fn a06_convolution_identities_and_summation_by_parts_hold_on_random_pairs() {
    let t0 = Instant::now();
    let ball = enumerate_ball(&standard::free_abelian(2), 9, 1_000).unwrap();
    let ngen = ball.group().generator_count();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;

    // integer coefficients on the prefix B(2) keep every sum exact in f64,
    // so the 1e-9 gate is measuring the identities and not roundoff
    let draw = |rng: &mut ChaCha8Rng| {
        let mut values = vec![0.0; ball.len()];
        for slot in values.iter_mut().take(13) {
            *slot = rng.gen_range(-3i32..=3) as f64;
        }
        BallFunction::new(&ball, values).unwrap()
    };

    for _ in 0..500 {
        let u = draw(&mut rng);
        let v = draw(&mut rng);
        let conv = fgromov_core::function::convolve(&u, &v).unwrap();

        let grad_of_conv = conv.gradient();
        let conv_of_grad = fgromov_core::function::convolve_field(&u, &v.gradient()).unwrap();
        for i in 0..conv.interior_len() {
            for s in 0..ngen {
                worst = worst.max((grad_of_conv.entry(i, s) - conv_of_grad.entry(i, s)).abs());
            }
        }

        let lap_of_conv = conv.laplacian().unwrap();
        let conv_of_lap = fgromov_core::function::convolve(&u, &v.laplacian().unwrap()).unwrap();
        for i in 0..ball.len() {
            worst = worst.max((lap_of_conv.values[i] - conv_of_lap.values[i]).abs());
        }

        let div_of_conv = conv_of_grad.divergence().unwrap();
        let conv_of_div =
            fgromov_core::function::convolve(&u, &v.gradient().divergence().unwrap()).unwrap();
        for i in 0..ball.len() {
            worst = worst.max((div_of_conv.values[i] - conv_of_div.values[i]).abs());
        }

        let lap_u = u.laplacian().unwrap();
        let against_values: f64 =
            lap_u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
        let (gu, gv) = (u.gradient(), v.gradient());
        let mut against_gradients = 0.0;
        for i in 0..gu.defined {
            for s in 0..ngen {
                against_gradients += gu.entry(i, s) * gv.entry(i, s);
            }
        }
        worst = worst.max((against_values - against_gradients).abs());
    }

    assert!(worst <= 1e-9, "max deviation {worst}");
    pass(&format!("a06 convolution calculus (500 pairs, max deviation {worst:.1e})"), t0, 60.0);
}

#[test]
fn a07_the_lattice_dichotomy_lands_on_the_right_branch_for_all_four_fixtures() {
    let t0 = Instant::now();

    let cat = IntMatrix::from_i64_rows(&[vec![2, 1], vec![1, 1]]);
    match dichotomy(&cat).unwrap() {
        DichotomyResult::Growth { mahler, measured_rate, .. } => {
            assert!((2.618033..=2.618035).contains(&mahler), "mahler {mahler}");
            assert!((2.60..=2.64).contains(&measured_rate), "rate {measured_rate}");
        }
        other => panic!("cat map must grow, got {}", serde_json::to_string(&other).unwrap()),
    }

    let rotation = IntMatrix::from_i64_rows(&[vec![0, -1], vec![1, 0]]);
    match dichotomy(&rotation).unwrap() {
        DichotomyResult::Periodic { n, w } => {
            assert_eq!(n, 4);
            assert_eq!(rotation.pow(4).apply(&w), w, "T^4 w = w must be exact");
        }
        _ => panic!("rotation must be periodic"),
    }

    let shear = IntMatrix::from_i64_rows(&[vec![1, 1], vec![0, 1]]);
    match dichotomy(&shear).unwrap() {
        DichotomyResult::Periodic { n, .. } => assert_eq!(n, 1),
        _ => panic!("shear must fix a vector"),
    }

    let companion = IntMatrix::from_i64_rows(&[vec![0, -1], vec![1, 1]]);
    match dichotomy(&companion).unwrap() {
        DichotomyResult::Periodic { n, .. } => {
            assert_eq!(n, 6);
            assert_eq!(companion.pow(6), IntMatrix::identity(2), "T^6 = I must be exact");
        }
        _ => panic!("the sixth root of unity must be periodic"),
    }

    pass("a07 dichotomy (growth 2.618..., periods 4/1/6)", t0, 1.0);
}

#[test]
fn a08_mahler_measures_multiply_and_normalize_cyclotomics() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let draw = |rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(1..5usize);
        let mut coeffs: Vec<i64> = (0..len).map(|_| rng.gen_range(-5..=5)).collect();
        coeffs.push(rng.gen_range(1..=5));
        IntPoly::from_i64(&coeffs)
    };

    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let product = mahler_measure(&p.mul(&q)).unwrap();
        let split = mahler_measure(&p).unwrap() * mahler_measure(&q).unwrap();
        let rel = (product - split).abs() / split;
        assert!(rel <= 1e-8, "m(pq) = {product}, m(p)m(q) = {split}");
        worst_rel = worst_rel.max(rel);
    }

    let mut worst_cyc = 0.0f64;
    for _ in 0..100 {
        let mut p = IntPoly::one();
        for _ in 0..rng.gen_range(1..=3usize) {
            p = p.mul(&cyclotomic(rng.gen_range(1..=10u32)));
        }
        let m = mahler_measure(&p).unwrap();
        assert!((m - 1.0).abs() <= 1e-9, "cyclotomic product measured {m}");
        worst_cyc = worst_cyc.max((m - 1.0).abs());
    }

    pass(
        &format!("a08 mahler (rel err {worst_rel:.1e}, cyclotomic gap {worst_cyc:.1e})"),
        t0,
        10.0,
    );
}

#[test]
fn a09_witnessed_commutators_generate_exactly_the_heisenberg_center() {
    let t0 = Instant::now();
    let group = standard::heisenberg();
    let zonk = commutator_generators(&group, 6, 1_000_000).unwrap();
    let gens = group.generators();

    let id_key = group.identity().canonical_key();
    let mut kept = Vec::new();
    for (el, wit) in &zonk.s_prime {
        let c = group.commutator(&gens[wit.left], &gens[wit.right]).unwrap();
        let rebuilt = group.conjugate(&wit.conjugator, &c).unwrap();
        assert_eq!(rebuilt.canonical_key(), el.canonical_key(), "witness must rebuild");
        if el.canonical_key() != id_key {
            kept.push(el.clone());
        }
    }
    assert!(!kept.is_empty());

    // ambient picture: the center of B(6) is cut out by two vanishing entries
    let ambient = enumerate_ball(&group, 6, 1_000_000).unwrap();
    let mut central_keys = Vec::new();
    let mut max_height = 0i64;
    for i in 0..ambient.len() {
        let Element::Matrix(m) = ambient.element(i) else { unreachable!() };
        if m.at(0, 1).is_zero() && m.at(1, 2).is_zero() {
            central_keys.push(ambient.element(i).canonical_key());
            max_height = max_height.max(m.at(0, 2).abs().to_i64().unwrap());
        }
    }

    // subgroup picture: enumerate far enough to cover every central height
    let sub = group.remark(kept).unwrap();
    let sub_ball = enumerate_ball(&sub, max_height as u32, 1_000_000).unwrap();
    let mut generated_keys = Vec::new();
    for i in 0..sub_ball.len() {
        let key = sub_ball.element(i).canonical_key();
        if ambient.index_of_key(&key).is_some() {
            generated_keys.push(key);
        }
    }

    central_keys.sort();
    generated_keys.sort();
    assert_eq!(generated_keys, central_keys, "generated set vs center inside B(6)");

    pass(
        &format!(
            "a09 zonk ({} witnessed generators, {} central elements matched)",
            zonk.s_prime.len(),
            central_keys.len()
        ),
        t0,
        60.0,
    );
}

#[test]
fn a10_finite_index_certificates_reverify_from_scratch() {
    let t0 = Instant::now();

    let line = standard::free_abelian(1);
    let even = |e: &Element| match e {
        Element::Vector(v) => v[0] % 2 == 0,
        _ => false,
    };
    let (gens, cert) = finite_index_generators(&line, even, 2, 1_000_000).unwrap();
    assert_eq!((cert.k, cert.r), (5, 5), "a (2I+1, 2I+1)-certificate");
    assert!(gens.iter().all(even), "every generator must satisfy the oracle");
    cert.verify(&line, 1_000_000).unwrap();

    let heis = standard::heisenberg();
    let x_even = |e: &Element| match e {
        Element::Matrix(m) => (m.at(0, 1) % BigInt::from(2)).is_zero(),
        _ => false,
    };
    let (gens, cert) = finite_index_generators(&heis, x_even, 2, DEFAULT_ELEMENT_CAP).unwrap();
    assert_eq!((cert.k, cert.r), (5, 5));
    assert!(gens.iter().all(x_even));
    cert.verify(&heis, DEFAULT_ELEMENT_CAP).unwrap();

    pass(&format!("a10 finite index ({} subgroup generators on heisenberg)", gens.len()), t0, 30.0);
}

#[test]
fn a11_slow_growth_certifies_the_shear_and_refuses_the_cat_map() {
    let t0 = Instant::now();

    let shear = IntMatrix::from_i64_rows(&[vec![1, 1], vec![0, 1]]);
    let group = standard::semidirect(shear).unwrap();
    let e = Element::Semidirect { shift: 1, coords: vec![BigInt::zero(), BigInt::zero()] };
    let params = SlowGrowthParams::default();
    let cert = slow_growth_generators(&group, &e, &params).unwrap();
    cert.verify(&group, &e, DEFAULT_ELEMENT_CAP).unwrap();

    let cat = IntMatrix::from_i64_rows(&[vec![2, 1], vec![1, 1]]);
    let group = standard::semidirect(cat).unwrap();
    let err = slow_growth_generators(&group, &e, &params).unwrap_err();
    match &err {
        Error::NoSlowGrowthCertificate { context } => {
            assert!(context.contains("radius"), "context must say where it gave up: {context}")
        }
        other => panic!("expected the slow-growth refusal, got {other}"),
    }

    pass(
        &format!(
            "a11 slow growth (shear certified at radius {} with {} generators; cat map refused)",
            cert.radius,
            cert.s_tilde.len()
        ),
        t0,
        120.0,
    );
}

#[test]
fn a12_the_rotation_extension_assembles_to_a_nilpotent_marking() {
    let t0 = Instant::now();
    let rotation = IntMatrix::from_i64_rows(&[vec![0, -1], vec![1, 0]]);
    let group = standard::semidirect(rotation).unwrap();
    let e = Element::Semidirect { shift: 1, coords: vec![BigInt::zero(), BigInt::zero()] };
    let h_part: Vec<Element> = group
        .generators()
        .iter()
        .filter(|el| matches!(el, Element::Semidirect { shift: 0, .. }))
        .cloned()
        .collect();

    let cert = assemble_virtually_nilpotent(&group, &e, 4, &h_part, 1, 100_000).unwrap();
    assert_eq!(cert.step, 2);
    assert!(cert.nilpotency.holds, "witness: {:?}", cert.nilpotency.witness);

    pass("a12 assembled rotation extension (nilpotency holds at step 2)", t0, 10.0);
}

#[test]
fn a13_the_reduction_trace_on_heisenberg_shows_the_degree_drop_and_reverifies() {
    let t0 = Instant::now();
    let group = standard::heisenberg();
    let cache = tempfile::tempdir().unwrap();
    let ctx = Ctx { cache_dir: Some(cache.path().to_path_buf()), ..Ctx::default() };
    let trace = cmd_reduce(&group, &ReduceOptions::default(), &ctx).unwrap();

    let report = Report::new(
        "reduce",
        Some(GroupStamp { name: "heisenberg".into(), fingerprint: group.fingerprint().to_string() }),
        None,
        ConfigStamp::current(DEFAULT_ELEMENT_CAP, 10),
        &trace,
    );
    let rendered = report.to_json().unwrap();

    // the headline shape: polynomial degree estimate drops by at least one
    // when passing to the commutator subgroup
    let json: serde_json::Value = serde_json::from_str(&rendered).unwrap();
    let steps = json["payload"]["steps"].as_array().unwrap();
    assert!(!steps.is_empty());
    let first = &steps[0];
    let before = first["growth_before"]["degree"]["slope"].as_f64().unwrap();
    let after = first["growth_after"]["degree"]["slope"].as_f64().unwrap();
    let drop = first["degree_drop"].as_f64().unwrap();
    assert!(before >= 3.2, "ambient degree estimate {before}");
    assert!(after <= 1.5, "commutator subgroup degree estimate {after}");
    assert!(drop >= 1.0, "degree drop {drop}");
    assert_eq!(json["payload"]["terminal"]["state"], "trivial");

    // every certificate in the report must re-verify from its recorded text
    // alone, each against the marking its step started from
    let mut current = group;
    for step in steps {
        let cert_value = &step["generator_reduction"]["cert"];
        let cert = CertStamp {
            k: cert_value["k"].as_u64().unwrap() as u32,
            r: cert_value["r"].as_u64().unwrap() as u32,
            generators: cert_value["generators"]
                .as_array()
                .unwrap()
                .iter()
                .map(|s| s.as_str().unwrap().to_string())
                .collect(),
            checked_inclusion: cert_value["checked_inclusion"].as_bool().unwrap(),
            reverified: cert_value["reverified"].as_bool().unwrap(),
        };
        assert!(cert.reverified, "the trace must have checked its own certificate");
        cert.reverify(&current, DEFAULT_ELEMENT_CAP).unwrap();

        let witnesses = step["op"]["witnesses"].as_array().unwrap();
        let mut next_gens = Vec::new();
        for w in witnesses {
            let stamp = WitnessStamp {
                element: w["element"].as_str().unwrap().to_string(),
                conjugator: w["conjugator"].as_str().unwrap().to_string(),
                left: w["left"].as_u64().unwrap() as usize,
                right: w["right"].as_u64().unwrap() as usize,
                reverified: w["reverified"].as_bool().unwrap(),
            };
            stamp.reverify(&current).unwrap();
            next_gens.push(parse_element(current.backend(), &stamp.element).unwrap());
        }
        if !next_gens.is_empty() {
            current = current.remark(next_gens).unwrap();
        }
    }

    pass(
        &format!(
            "a13 reduction trace (degree {before:.2} -> {after:.2}, drop {drop:.2}, all certificates reverified)"
        ),
        t0,
        600.0,
    );
}

#[test]
fn a14_identical_seeds_give_byte_identical_reports_and_caches() {
    let t0 = Instant::now();
    let fixture = |name: &str| {
        std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
    };
    let bin = env!("CARGO_BIN_EXE_fgromov");
    let dir = tempfile::tempdir().unwrap();

    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin).args(args).output().unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    };

    // a seeded command, run twice
    let heis = fixture("heisenberg.spec");
    let (k1, k2) = (dir.path().join("k1.json"), dir.path().join("k2.json"));
    for path in [&k1, &k2] {
        run(&[
            "kleiner-dim", "--group", heis.to_str().unwrap(),
            "--radius", "4", "--count", "6", "--seed", "17",
            "--report", path.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&k1).unwrap(), std::fs::read(&k2).unwrap(), "seeded reports differ");

    // cache files from two cold runs, then a warm run over the first cache
    let plane = fixture("plane.spec");
    let (c1, c2) = (dir.path().join("c1"), dir.path().join("c2"));
    let (g1, g2, g3) = (
        dir.path().join("g1.json"),
        dir.path().join("g2.json"),
        dir.path().join("g3.json"),
    );
    for (cache, report) in [(&c1, &g1), (&c2, &g2), (&c1, &g3)] {
        run(&[
            "growth", "--group", plane.to_str().unwrap(), "--radius", "6",
            "--cache-dir", cache.to_str().unwrap(),
            "--report", report.to_str().unwrap(),
        ]);
    }
    let cache_file = |dir: &std::path::Path| {
        let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        assert_eq!(files.len(), 1);
        files.pop().unwrap()
    };
    assert_eq!(
        std::fs::read(cache_file(&c1)).unwrap(),
        std::fs::read(cache_file(&c2)).unwrap(),
        "cache files differ between runs"
    );
    let bytes1 = std::fs::read(&g1).unwrap();
    assert_eq!(bytes1, std::fs::read(&g2).unwrap(), "cold reports differ");
    assert_eq!(bytes1, std::fs::read(&g3).unwrap(), "the warm report differs from the cold one");

    // the full reduction pipeline, run twice
    let (r1, r2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));
    for path in [&r1, &r2] {
        run(&["reduce", "--group", heis.to_str().unwrap(), "--report", path.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap(), "reduce reports differ");

    pass("a14 determinism (reports and caches byte-identical)", t0, 120.0);
}
