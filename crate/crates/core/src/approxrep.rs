//! Ellipsoid coordinates on a sampled space of near-harmonic functions and
//! the matrices that left translation induces on those coordinates.
//!
//! The convex hull of the sampled functions gets an approximate minimum
//! volume enclosing ellipsoid; its principal directions are a Q-orthonormal
//! frame and its radii weight every matrix comparison afterwards. Against
//! that frame, translating a direction and refitting it by least squares
//! yields one matrix per group element, and the module measures how far
//! those matrices are from a genuine representation: multiplicativity
//! defects, commutator collapse, and a pigeonhole covering that extracts
//! words whose matrices sit next to the identity.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::backend::Element;
use crate::ball::Ball;
use crate::config::{MVEE_TOL, OMEGA_SAMPLES_PER_DIM_SQ};
use crate::error::{Error, Result};
use crate::function::BallFunction;
use crate::kleiner::{dirichlet_candidates, gram_form, gram_matrix, GramSubspace};

/// Principal axes of the fitted ellipsoid, Q-orthonormal at `scale`, with
/// radii sorted descending. `alpha` is the measured enclosure slack: along
/// each axis the sample hull reaches at least `radius / alpha`, so it plays
/// the role of the sqrt-dimension factor of the exact theorem.
#[derive(Clone, Debug)]
pub struct EllipsoidFrame<'a> {
    pub directions: Vec<BallFunction<'a>>,
    pub radii: Vec<f64>,
    pub alpha: f64,
    pub scale: u32,
}

impl<'a> EllipsoidFrame<'a> {
    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    pub fn ball(&self) -> &'a Ball {
        self.directions[0].ball
    }

    /// Max entrywise gap between the directions' Q Gram matrix and identity.
    pub fn orthonormality_defect(&self) -> Result<f64> {
        let gram = gram_matrix(&self.directions, self.scale)?;
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Fit the frame to a function sample drawn from the subspace `v`.
///
/// The sample is read off in Q-orthonormal coordinates of `v` at scale `r1`
/// (so symmetrizing is free: the fit only sees outer products), reweighted
/// into an enclosing ellipsoid, and mapped back to functions. Fails typed
/// when the sample does not span or the basis Gram is degenerate.
pub fn ellipsoid_frame<'a>(
    omega_sample: &[BallFunction<'a>],
    v: &GramSubspace<'a>,
    r1: u32,
) -> Result<EllipsoidFrame<'a>> {
    let dim = v.dim();
    if dim == 0 {
        return Err(Error::Spec("ellipsoid frame needs a nonempty basis".into()));
    }
    if omega_sample.is_empty() {
        return Err(Error::Spec("ellipsoid frame needs a nonempty sample".into()));
    }
    let ball = v.basis[0].ball;

    let q = gram_matrix(&v.basis, r1)?;
    let eig = q.symmetric_eigen();
    let mu_max = eig.eigenvalues.iter().fold(0.0f64, |m, &t| m.max(t));
    for &mu in eig.eigenvalues.iter() {
        if mu <= 1e-12 * mu_max.max(1.0) {
            return Err(Error::Spec(
                "frame basis Gram is degenerate at the requested scale".into(),
            ));
        }
    }

    // Coordinates of each sample in the Q-orthonormalized basis. For a
    // sample with basis coefficients c this evaluates diag(mu^-1/2) P^T Q c,
    // which is the isometric chart for the Q inner product.
    let mut coords = Vec::with_capacity(omega_sample.len());
    for omega in omega_sample {
        let b = DVector::from_fn(dim, |j, _| {
            gram_form(omega, &v.basis[j], r1).unwrap_or(f64::NAN)
        });
        if b.iter().any(|t| !t.is_finite()) {
            return Err(Error::Spec("sample and basis must share one ball".into()));
        }
        let pt_b = eig.eigenvectors.transpose() * b;
        let y = DVector::from_fn(dim, |k, _| pt_b[k] / eig.eigenvalues[k].sqrt());
        coords.push(y);
    }

    let stacked = DMatrix::from_fn(coords.len(), dim, |i, j| coords[i][j]);
    let singular = stacked.singular_values();
    let sv_max = singular.iter().fold(0.0f64, |m, &t| m.max(t));
    let rank = singular.iter().filter(|&&t| t >= 1e-8 * sv_max.max(1.0)).count();
    if rank < dim {
        return Err(Error::RankDeficientSample { rank, dim });
    }

    let (shape, reach_sq) = central_mvee(&coords, dim, MVEE_TOL)?;
    let axes = shape.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        axes.eigenvalues[b]
            .partial_cmp(&axes.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut radii = Vec::with_capacity(dim);
    let mut directions = Vec::with_capacity(dim);
    let mut alpha = 1.0f64;
    for &k in &order {
        let nu = axes.eigenvalues[k];
        if nu <= 0.0 {
            return Err(Error::NumericalFailure {
                context: "ellipsoid axes",
                detail: format!("nonpositive shape eigenvalue {nu:.3e}"),
            });
        }
        let lambda = (reach_sq * nu).sqrt();
        let axis = axes.eigenvectors.column(k);
        let reach = coords
            .iter()
            .map(|y| y.dot(&axis.clone_owned()).abs())
            .fold(0.0f64, f64::max);
        if reach <= 1e-12 * lambda {
            return Err(Error::RankDeficientSample { rank: dim - 1, dim });
        }
        alpha = alpha.max(lambda / reach);

        // Back to basis coefficients: c = P diag(mu^-1/2) p.
        let scaled = DVector::from_fn(dim, |j, _| axis[j] / eig.eigenvalues[j].sqrt());
        let c = &eig.eigenvectors * scaled;
        let mut values = vec![0.0; ball.len()];
        for j in 0..dim {
            for (slot, t) in values.iter_mut().zip(&v.basis[j].values) {
                *slot += c[j] * t;
            }
        }
        radii.push(lambda);
        directions.push(BallFunction::new(ball, values)?);
    }

    let frame = EllipsoidFrame { directions, radii, alpha, scale: r1 };
    let defect = frame.orthonormality_defect()?;
    if defect > 1e-8 {
        return Err(Error::NumericalFailure {
            context: "ellipsoid frame orthonormality",
            detail: format!("pairwise Gram defect {defect:.3e}"),
        });
    }
    Ok(frame)
}

/// Khachiyan reweighting for the origin-centered enclosing ellipsoid of a
/// symmetric point cloud. Returns the weighted shape matrix M and the final
/// enclosure level max_i x_i^T M^-1 x_i, so the ellipsoid
/// { x : x^T M^-1 x <= level } contains every input point by construction.
fn central_mvee(points: &[DVector<f64>], dim: usize, tol: f64) -> Result<(DMatrix<f64>, f64)> {
    let m = points.len();
    let mut weights = vec![1.0 / m as f64; m];
    for _ in 0..200_000 {
        let mut shape = DMatrix::zeros(dim, dim);
        for (w, p) in weights.iter().zip(points) {
            for a in 0..dim {
                for b in a..dim {
                    shape[(a, b)] += w * p[a] * p[b];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                shape[(a, b)] = shape[(b, a)];
            }
        }
        let inv = shape.clone().try_inverse().ok_or(Error::Singular {
            context: "ellipsoid reweighting",
        })?;
        let mut level = f64::MIN;
        let mut worst = 0;
        for (i, p) in points.iter().enumerate() {
            let w = (p.transpose() * &inv * p)[(0, 0)];
            if w > level {
                level = w;
                worst = i;
            }
        }
        let d = dim as f64;
        if level <= d * (1.0 + tol) {
            return Ok((shape, level));
        }
        let beta = (level - d) / (d * (level - 1.0));
        for w in weights.iter_mut() {
            *w *= 1.0 - beta;
        }
        weights[worst] += beta;
    }
    Err(Error::NumericalFailure {
        context: "ellipsoid reweighting",
        detail: "no convergence within the iteration budget".into(),
    })
}

/// Least-squares coefficients of the translated scaled directions against
/// the frame, one column per direction, with the per-column fit residuals.
#[derive(Clone, Debug)]
pub struct TranslationMatrix {
    pub g: Element,
    pub t: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

/// Fit column i by regressing x -> radii[i] * e_i(g^-1 x) over the window
/// ball against the regressors radii[j] * e_j plus a constant; the constant
/// soaks up the quotient by constants and is then discarded.
pub fn translation_matrix(
    g: &Element,
    frame: &EllipsoidFrame,
    window: u32,
) -> Result<TranslationMatrix> {
    let ball = frame.ball();
    ball.check_radius(window)?;
    let dim = frame.dim();
    let n = ball.prefix_len(window);
    if n < dim + 2 {
        return Err(Error::Spec(
            "translation window holds fewer points than regressors".into(),
        ));
    }
    let group = ball.group();
    let ginv = group.inverse(g)?;
    let mut translated = Vec::with_capacity(n);
    for p in 0..n {
        let z = group.multiply(&ginv, ball.element(p))?;
        let idx = ball.index_of(&z).ok_or_else(|| Error::WindowEscapes {
            context: format!("translated window point leaves the radius-{} ball", ball.radius()),
        })?;
        translated.push(idx);
    }

    let a = DMatrix::from_fn(n, dim + 1, |p, j| {
        if j < dim {
            frame.radii[j] * frame.directions[j].values[p]
        } else {
            1.0
        }
    });
    let b = DMatrix::from_fn(n, dim, |p, i| {
        frame.radii[i] * frame.directions[i].values[translated[p]]
    });

    let svd = a.clone().svd(true, true);
    let sv_max = svd.singular_values.iter().fold(0.0f64, |m, &t| m.max(t));
    let sv_min = svd.singular_values.iter().fold(f64::MAX, |m, &t| m.min(t));
    if sv_min < 1e-10 * sv_max.max(1.0) {
        return Err(Error::Singular { context: "translation regressors" });
    }
    let sol = svd.solve(&b, 0.0).map_err(|msg| Error::NumericalFailure {
        context: "translation least squares",
        detail: msg.into(),
    })?;

    let fit_gap = &a * &sol - &b;
    let residuals = (0..dim).map(|i| fit_gap.column(i).norm()).collect();
    let t = DMatrix::from_fn(dim, dim, |j, i| sol[(j, i)]);
    Ok(TranslationMatrix { g: g.clone(), t, residuals })
}

/// Deviation from the identity in the two-sided radius-weighted metric:
/// entry (k, i) counts relative to min(1, radii[i] / radii[k]).
pub fn identity_deviation(t: &DMatrix<f64>, radii: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..t.nrows() {
        for i in 0..t.ncols() {
            let target = if k == i { 1.0 } else { 0.0 };
            let weight = (radii[i] / radii[k]).min(1.0);
            worst = worst.max((t[(k, i)] - target).abs() / weight);
        }
    }
    worst
}

/// One-sided weighted size of a matrix gap: max over entries of the
/// magnitude scaled back up by the row radius.
pub fn product_defect_norm(gap: &DMatrix<f64>, radii: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..gap.nrows() {
        for i in 0..gap.ncols() {
            worst = worst.max(gap[(k, i)].abs() * radii[k]);
        }
    }
    worst
}

fn widest_window(frame: &EllipsoidFrame, elements: &[&Element]) -> Result<u32> {
    let ball = frame.ball();
    let mut deepest = 0u32;
    for e in elements {
        let norm = ball.norm_of(e).ok_or_else(|| Error::NotInBall {
            context: "translation element outside the frame ball".into(),
        })?;
        deepest = deepest.max(norm);
    }
    let window = ball
        .radius()
        .checked_sub(deepest)
        .filter(|w| *w >= 1)
        .ok_or_else(|| Error::WindowEscapes {
            context: format!(
                "no translation window left after norm {deepest} inside radius {}",
                ball.radius()
            ),
        })?;
    if ball.prefix_len(window) < frame.dim() + 2 {
        return Err(Error::Spec(
            "translation window holds fewer points than regressors".into(),
        ));
    }
    Ok(window)
}

/// Row-weighted size of U_gh - U_g U_h over the widest window that keeps
/// all three translations inside the frame ball.
pub fn multiplicativity_defect(g: &Element, h: &Element, frame: &EllipsoidFrame) -> Result<f64> {
    let group = frame.ball().group();
    let gh = group.multiply(g, h)?;
    let window = widest_window(frame, &[g, h, &gh])?;
    let u_g = translation_matrix(g, frame, window)?;
    let u_h = translation_matrix(h, frame, window)?;
    let u_gh = translation_matrix(&gh, frame, window)?;
    let gap = &u_gh.t - &u_g.t * &u_h.t;
    Ok(product_defect_norm(&gap, &frame.radii))
}

#[derive(Clone, Debug)]
pub struct CommutatorDefectReport {
    pub defect_in: f64,
    pub defect_out: f64,
    pub quadratic_ratio: f64,
}

/// Deviations from identity going into and out of a conjugated commutator.
/// The interesting reading is the quadratic one: near-identity inputs should
/// collapse to a commutator whose deviation competes with the input squared.
pub fn commutator_defect_ratio(
    e: &Element,
    e_prime: &Element,
    g: &Element,
    frame: &EllipsoidFrame,
) -> Result<CommutatorDefectReport> {
    let group = frame.ball().group();
    let comm = group.commutator(e, e_prime)?;
    let word = group.conjugate(g, &comm)?;
    let window = widest_window(frame, &[e, e_prime, &word])?;
    let u_e = translation_matrix(e, frame, window)?;
    let u_ep = translation_matrix(e_prime, frame, window)?;
    let u_word = translation_matrix(&word, frame, window)?;
    let defect_in = identity_deviation(&u_e.t, &frame.radii)
        .max(identity_deviation(&u_ep.t, &frame.radii));
    let defect_out = identity_deviation(&u_word.t, &frame.radii);
    let quadratic_ratio = if defect_in > 0.0 {
        defect_out / (defect_in * defect_in)
    } else if defect_out == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CommutatorDefectReport { defect_in, defect_out, quadratic_ratio })
}

#[derive(Clone, Debug)]
pub struct BoxPrincipleReport {
    pub s_prime: Vec<Element>,
    pub index_bound: usize,
    pub deviations: Vec<f64>,
    pub pigeonhole_radius: u32,
    pub window: u32,
}

/// Cover the observed translation matrices by mesh cells in the two-sided
/// weighted metric and pigeonhole the first radius whose cell set stops
/// growing. The emitted words g g_m^-1 and g_m g^-1 pair each element of the
/// next ball with its cell representative; their matrices are re-measured
/// from scratch and reported next to the word list.
///
/// Every matrix in the scan uses one fixed window so cells compare like
/// with like; the window is sized so that even the longest emitted word
/// still translates inside the frame ball.
pub fn box_principle_subgroup(frame: &EllipsoidFrame, mesh: f64) -> Result<BoxPrincipleReport> {
    if !(mesh > 0.0) {
        return Err(Error::Spec("box principle mesh must be positive".into()));
    }
    let ball = frame.ball();
    let dim = frame.dim();
    let group = ball.group();
    let min_window = (1..=ball.radius())
        .find(|&w| ball.prefix_len(w) >= dim + 2)
        .ok_or_else(|| Error::Spec("frame ball too small for the box principle".into()))?;
    let reach = ball
        .radius()
        .checked_sub(min_window + 1)
        .ok_or_else(|| Error::Spec("frame ball too small for the box principle".into()))?;
    let scan_max = reach / 2;
    let window = ball.radius() - (2 * scan_max + 1);

    // Cells are centered on multiples of the mesh so that entries of exactly
    // 0 or 1 (the identity-like bulk) sit mid-cell instead of on an edge
    // where float dust would split equal matrices apart.
    let cell_of = |t: &DMatrix<f64>| -> Vec<i64> {
        let mut key = Vec::with_capacity(dim * dim);
        for k in 0..dim {
            for i in 0..dim {
                let weight = (frame.radii[i] / frame.radii[k]).min(1.0);
                key.push((t[(k, i)] / (mesh * weight)).round() as i64);
            }
        }
        key
    };

    // cell -> (ball index of the first representative, norm where the cell
    // first appeared); ball order makes the representative deterministic.
    let mut cells: BTreeMap<Vec<i64>, (usize, u32)> = BTreeMap::new();
    let mut cell_keys: Vec<Vec<i64>> = Vec::new();
    let mut processed = 0usize;
    for r in 0..=scan_max {
        let goal = ball.prefix_len(r + 1);
        while processed < goal {
            let u = translation_matrix(ball.element(processed), frame, window)?;
            let key = cell_of(&u.t);
            cells
                .entry(key.clone())
                .or_insert((processed, ball.norm(processed)));
            cell_keys.push(key);
            processed += 1;
        }
        let stabilized = cells.values().all(|&(_, first)| first <= r);
        if !stabilized {
            continue;
        }

        let mut seen = BTreeSet::new();
        let mut s_prime = Vec::new();
        let mut deviations = Vec::new();
        let identity_key = group.identity().canonical_key();
        for g_idx in 0..goal {
            let rep_idx = cells[&cell_keys[g_idx]].0;
            let g = ball.element(g_idx);
            let rep = ball.element(rep_idx);
            let forward = group.multiply(g, &group.inverse(rep)?)?;
            let backward = group.multiply(rep, &group.inverse(g)?)?;
            for word in [forward, backward] {
                let key = word.canonical_key();
                if key == identity_key || !seen.insert(key) {
                    continue;
                }
                let u = translation_matrix(&word, frame, window)?;
                deviations.push(identity_deviation(&u.t, &frame.radii));
                s_prime.push(word);
            }
        }
        return Ok(BoxPrincipleReport {
            s_prime,
            index_bound: cells.len(),
            deviations,
            pigeonhole_radius: r,
            window,
        });
    }
    Err(Error::PigeonholeFailed {
        context: format!("translation cells kept growing through radius {scan_max}"),
    })
}

/// Max over the derived directions e and window points x of |u(ex) - u(x)|.
pub fn trivial_directions_check(
    u: &BallFunction,
    s_derived: &[Element],
    window: u32,
) -> Result<f64> {
    let ball = u.ball;
    ball.check_radius(window)?;
    let group = ball.group();
    let mut worst = 0.0f64;
    for e in s_derived {
        for p in 0..ball.prefix_len(window) {
            let z = group.multiply(e, ball.element(p))?;
            let idx = ball.index_of(&z).ok_or_else(|| Error::WindowEscapes {
                context: "derived direction times window point leaves the ball".into(),
            })?;
            worst = worst.max((u.values[idx] - u.values[p]).abs());
        }
    }
    Ok(worst)
}

/// Sup of |u(x) - u(id)| over the radius-r ball, and that sup divided by r.
pub fn range_lower_bound_measure(u: &BallFunction, r: u32) -> Result<(f64, f64)> {
    if r == 0 {
        return Err(Error::Spec("range measurement needs a positive radius".into()));
    }
    u.ball.check_radius(r)?;
    let base = u.values[0];
    let mut sup = 0.0f64;
    for p in 0..u.ball.prefix_len(r) {
        sup = sup.max((u.values[p] - base).abs());
    }
    Ok((sup, sup / r as f64))
}

/// Sample of Lipschitz-normalized harmonic extensions used to feed the
/// ellipsoid fit: the default count scales with the square of the intended
/// frame dimension.
pub fn omega_sample<'a>(
    ball: &'a Ball,
    characters: &[&dyn Fn(&Element) -> f64],
    dim: usize,
    seed: u64,
) -> Result<Vec<BallFunction<'a>>> {
    if dim == 0 {
        return Err(Error::Spec("omega sample needs a positive dimension".into()));
    }
    dirichlet_candidates(ball, characters, OMEGA_SAMPLES_PER_DIM_SQ * dim * dim, seed)
}

/// One CSV per experiment: the frame radii and enclosure slack, then any
/// labeled defect and commutator-ratio measurements the caller collected.
pub fn write_matrix_report<W: Write>(
    frame: &EllipsoidFrame,
    defects: &[(String, f64)],
    ratios: &[(String, f64)],
    mut w: W,
) -> Result<()> {
    writeln!(w, "kind,label,value")?;
    writeln!(w, "alpha,,{}", frame.alpha)?;
    for (i, lambda) in frame.radii.iter().enumerate() {
        writeln!(w, "radius,{i},{lambda}")?;
    }
    for (label, value) in defects {
        writeln!(w, "defect,{label},{value}")?;
    }
    for (label, value) in ratios {
        writeln!(w, "commutator,{label},{value}")?;
    }
    Ok(())
}
