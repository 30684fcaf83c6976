//! Secant-variety geometry at sample scale: jet-based separation tests for
//! finite subschemes, the precise-Terracini injectivity criteria for secant
//! points, the classification of meeting secant lines, and verification of
//! the three-secant fiber structure over the image fourfold.
//!
//! The surface is a torus, so jets of embedded sections are plain partial
//! derivatives of the level-3 basis in the flat ℂ² chart; tangent-direction
//! data enters through an aligned linear change of coordinates.

use crate::embed::EmbeddingContext;
use crate::jacobian::{locate_alpha, tau, JacobianPoint, KummerTriple, LengthTwoScheme};
use crate::periods::PeriodData;
use crate::projlin::{self, ProjPoint};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, Vector2};
use rand::Rng;
use std::sync::Arc;

/// Rank gap below which a scheme counts as non-separated.
pub const SEPARATION_TOL: f64 = 1e-6;

/// One linear condition on sections: a combination of partial derivatives
/// evaluated at a support point (flat coordinates).
#[derive(Clone, Debug)]
pub struct JetCondition {
    pub point: JacobianPoint,
    pub terms: Vec<((u8, u8), C64)>,
}

/// A finite subscheme encoded by the jet conditions its structure sheaf
/// imposes on sections.
#[derive(Clone, Debug)]
pub struct JetScheme {
    pub conditions: Vec<JetCondition>,
}

impl JetScheme {
    pub fn length(&self) -> usize {
        self.conditions.len()
    }

    /// Reduced points.
    pub fn from_points(points: &[JacobianPoint]) -> Self {
        JetScheme {
            conditions: points
                .iter()
                .map(|p| JetCondition {
                    point: p.clone(),
                    terms: vec![((0, 0), C64::new(1.0, 0.0))],
                })
                .collect(),
        }
    }

    /// A tangent-vector scheme (a, v): value plus the directional derivative.
    pub fn tangent_pair(ctx: &EmbeddingContext, a: &JacobianPoint, v: &ProjPoint) -> Self {
        let t = ctx.chart_tangent_vector(v);
        JetScheme {
            conditions: vec![
                JetCondition {
                    point: a.clone(),
                    terms: vec![((0, 0), C64::new(1.0, 0.0))],
                },
                JetCondition {
                    point: a.clone(),
                    terms: directional(&[(1, 0)], &t, &normal_to(&t)),
                },
            ],
        }
    }

    /// The doubled tangent scheme ξ² of (a, v): full second-order
    /// neighborhood in the direction frame.
    pub fn doubled_tangent(ctx: &EmbeddingContext, a: &JacobianPoint, v: &ProjPoint) -> Self {
        let t = ctx.chart_tangent_vector(v);
        let n = normal_to(&t);
        let mk = |orders: &[(u8, u8)]| JetCondition {
            point: a.clone(),
            terms: directional(orders, &t, &n),
        };
        JetScheme {
            conditions: vec![
                JetCondition {
                    point: a.clone(),
                    terms: vec![((0, 0), C64::new(1.0, 0.0))],
                },
                mk(&[(1, 0)]),
                mk(&[(0, 1)]),
                mk(&[(2, 0)]),
            ],
        }
    }

    /// The length-4 curvilinear scheme `(u1⁴, u2 - α u1² - β u1³)` in
    /// coordinates aligned with the frame (t, n) at `a`.
    pub fn curvilinear_quartic(
        a: &JacobianPoint,
        t: &Vector2<C64>,
        n: &Vector2<C64>,
        alpha: C64,
        beta: C64,
    ) -> Self {
        // restriction to the curve u2 = α u1² + β u1³ gives the functionals
        //   h(0) = s
        //   h'(0) = ∂1
        //   h''(0) = ∂11 + 2α ∂2
        //   h'''(0) = ∂111 + 6α ∂12 + 6β ∂2
        let two_alpha = alpha * C64::new(2.0, 0.0);
        let six_alpha = alpha * C64::new(6.0, 0.0);
        let six_beta = beta * C64::new(6.0, 0.0);
        let rows: Vec<Vec<((u8, u8), C64)>> = vec![
            vec![((0, 0), C64::new(1.0, 0.0))],
            directional(&[(1, 0)], t, n),
            merge(
                directional(&[(2, 0)], t, n),
                scale(directional(&[(0, 1)], t, n), two_alpha),
            ),
            merge(
                merge(
                    directional(&[(3, 0)], t, n),
                    scale(directional(&[(1, 1)], t, n), six_alpha),
                ),
                scale(directional(&[(0, 1)], t, n), six_beta),
            ),
        ];
        JetScheme {
            conditions: rows
                .into_iter()
                .map(|terms| JetCondition {
                    point: a.clone(),
                    terms,
                })
                .collect(),
        }
    }

    /// The planar scheme `(u1², u2²)` in the aligned frame.
    pub fn planar(a: &JacobianPoint, t: &Vector2<C64>, n: &Vector2<C64>) -> Self {
        let rows: Vec<Vec<((u8, u8), C64)>> = vec![
            vec![((0, 0), C64::new(1.0, 0.0))],
            directional(&[(1, 0)], t, n),
            directional(&[(0, 1)], t, n),
            directional(&[(1, 1)], t, n),
        ];
        JetScheme {
            conditions: rows
                .into_iter()
                .map(|terms| JetCondition {
                    point: a.clone(),
                    terms,
                })
                .collect(),
        }
    }
}

/// Hermitian-orthogonal unit complement of a nonzero vector.
fn normal_to(t: &Vector2<C64>) -> Vector2<C64> {
    let n = Vector2::new(-t[1].conj(), t[0].conj());
    n / C64::new(n.norm(), 0.0)
}

/// Expand `∂_{u1}^{p} ∂_{u2}^{q}` into flat-coordinate partials for the
/// linear chart `z = a + u1 t + u2 n`.
fn directional(
    orders: &[(u8, u8)],
    t: &Vector2<C64>,
    n: &Vector2<C64>,
) -> Vec<((u8, u8), C64)> {
    assert_eq!(orders.len(), 1);
    let (p, q) = orders[0];
    let mut out: std::collections::HashMap<(u8, u8), C64> = std::collections::HashMap::new();
    for i in 0..=p {
        for j in 0..=q {
            let coeff = C64::new(binom(p, i) * binom(q, j), 0.0)
                * t[0].powu(i as u32)
                * t[1].powu((p - i) as u32)
                * n[0].powu(j as u32)
                * n[1].powu((q - j) as u32);
            let key = (i + j, (p - i) + (q - j));
            *out.entry(key).or_insert(C64::new(0.0, 0.0)) += coeff;
        }
    }
    out.into_iter().collect()
}

fn binom(n: u8, k: u8) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn merge(a: Vec<((u8, u8), C64)>, b: Vec<((u8, u8), C64)>) -> Vec<((u8, u8), C64)> {
    let mut out: std::collections::HashMap<(u8, u8), C64> = a.into_iter().collect();
    for (k, v) in b {
        *out.entry(k).or_insert(C64::new(0.0, 0.0)) += v;
    }
    out.into_iter().collect()
}

fn scale(a: Vec<((u8, u8), C64)>, c: C64) -> Vec<((u8, u8), C64)> {
    a.into_iter().map(|(k, v)| (k, v * c)).collect()
}

/// Whether the level-3 system separates the scheme: the jet evaluation
/// matrix has full row rank.  Returns the verdict and the rank gap
/// `σ_len / σ_1`.
pub fn separates(ctx: &EmbeddingContext, scheme: &JetScheme) -> (bool, f64) {
    let len = scheme.length();
    assert!(len <= 6, "separation tested for length at most 6");
    let mut m = DMatrix::<C64>::zeros(len, 9);
    for (r, cond) in scheme.conditions.iter().enumerate() {
        let mut row = nalgebra::DVector::<C64>::zeros(9);
        for ((j0, j1), coeff) in &cond.terms {
            let jet = ctx.level_basis_jet(3, cond.point.rep(), (*j0, *j1));
            for k in 0..9 {
                row[k] += coeff * jet[k];
            }
        }
        let norm = row.norm();
        for k in 0..9 {
            m[(r, k)] = row[k] / C64::new(norm, 0.0);
        }
    }
    let svd = m.svd(false, false);
    let s = &svd.singular_values;
    let gap = s[len - 1] / s[0];
    (gap > SEPARATION_TOL, gap)
}

// ---------------------------------------------------------------------------
// Precise Terracini

/// Differential injectivity of the secant abstraction at a two-point scheme:
/// requires `p` on the secant line, away from both points, and disjoint
/// embedded tangent planes.
pub fn terracini_two_points(
    ctx: &EmbeddingContext,
    b: &JacobianPoint,
    c: &JacobianPoint,
    p: &ProjPoint,
) -> Result<bool> {
    let line = projlin::span(&[ctx.phi3(b), ctx.phi3(c)], 1e-10);
    let d = line.point_distance(p);
    if d > 1e-6 {
        return Err(Error::PointNotOnSecant(d));
    }
    if p.fs_distance(&ctx.phi3(b)) < 1e-6 || p.fs_distance(&ctx.phi3(c)) < 1e-6 {
        return Ok(false);
    }
    // stacked tangent frames: value and both partials at each point
    let mut m = DMatrix::<C64>::zeros(6, 9);
    for (block, pt) in [b, c].iter().enumerate() {
        for (r, jet) in [(0u8, 0u8), (1, 0), (0, 1)].iter().enumerate() {
            let v = ctx.level_basis_jet(3, pt.rep(), *jet);
            let norm = v.norm();
            for k in 0..9 {
                m[(block * 3 + r, k)] = v[k] / C64::new(norm, 0.0);
            }
        }
    }
    let svd = m.svd(false, false);
    let s = &svd.singular_values;
    Ok(s[5] / s[0] > 1e-4)
}

/// Differential injectivity at a tangent-vector scheme `(a, v)`: requires
/// `p ≠ φ₃(a)` on the tangent line and separation of the curvilinear quartic
/// family plus the planar scheme.
///
/// The quartic family is probed on a fixed 5x5 grid of (α, β), and, because
/// any genuine failure lies on a theta translate through `(a, v)`, on the
/// exact osculating data of the one or two translates containing the scheme.
pub fn terracini_double_point(
    ctx: &EmbeddingContext,
    a: &JacobianPoint,
    v: &ProjPoint,
    p: &ProjPoint,
) -> Result<bool> {
    let line = ctx.tangent_line(a, v);
    let d = line.point_distance(p);
    if d > 1e-6 {
        return Err(Error::PointNotOnTangent(d));
    }
    if p.fs_distance(&ctx.phi3(a)) < 1e-6 {
        return Ok(false);
    }
    let t = ctx.chart_tangent_vector(v);
    let n = normal_to(&t);
    // the planar scheme
    let (sep, _) = separates(ctx, &JetScheme::planar(a, &t, &n));
    if !sep {
        return Ok(false);
    }
    // fixed probe grid, rotated off the real axis once
    let rot = C64::new(0.7648421872844885, 0.6442176872376911); // exp(0.7 i)
    let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
    for la in levels {
        for lb in levels {
            let alpha = rot * C64::new(la, 0.0);
            let beta = rot * C64::new(lb, 0.0);
            let scheme = JetScheme::curvilinear_quartic(a, &t, &n, alpha, beta);
            let (sep, _) = separates(ctx, &scheme);
            if !sep {
                return Ok(false);
            }
        }
    }
    // exact witnesses: the theta translates through (a, v)
    for c in tau(&LengthTwoScheme::non_reduced(a.clone(), v.clone()))?.support() {
        if let Some((alpha, beta, tt, nn)) = translate_osculation(ctx.periods(), a, c) {
            let scheme = JetScheme::curvilinear_quartic(a, &tt, &nn, alpha, beta);
            let (sep, _) = separates(ctx, &scheme);
            if !sep {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Taylor data of the translate `Θ_c` through `a`: returns (α, β) of the
/// aligned curvilinear normal form together with the frame used.  `None`
/// when the underlying curve point is too close to a Weierstrass point for
/// the x-chart.
fn translate_osculation(
    pd: &Arc<PeriodData>,
    a: &JacobianPoint,
    c: &JacobianPoint,
) -> Option<(C64, C64, Vector2<C64>, Vector2<C64>)> {
    let target = pd.reduce(&(a.rep() - c.rep()));
    let (point, _alpha) = locate_alpha(pd, &target)?;
    let (x, y) = match point {
        crate::curve::CurvePoint::Affine { x, y } => (x, y),
        crate::curve::CurvePoint::Infinity { .. } => return None,
    };
    if y.norm() < 1e-4 * pd.curve.branch_scale().sqrt() {
        return None;
    }
    let (t, q, c3) = curve_expansion(pd, x, y);
    let tn = t / C64::new(t.norm(), 0.0);
    let n = normal_to(&tn);
    // u(s) = Q⁻¹ (z(s) - z(0)) for Q = [t | n]
    let qmat = nalgebra::Matrix2::new(tn[0], n[0], tn[1], n[1]);
    let qinv = qmat.try_inverse()?;
    let qu = qinv * q;
    let cu = qinv * c3;
    // u1 = |t| s + qu1 s²/2 + cu1 s³/6, u2 = qu2 s²/2 + cu2 s³/6
    let s1 = C64::new(t.norm(), 0.0);
    let p2 = qu[0] / (s1 * s1) * C64::new(0.5, 0.0);
    let p3 = cu[0] / (s1 * s1 * s1) * C64::new(1.0 / 6.0, 0.0);
    let q2 = qu[1] / (s1 * s1) * C64::new(0.5, 0.0);
    let q3 = cu[1] / (s1 * s1 * s1) * C64::new(1.0 / 6.0, 0.0);
    let _ = p3;
    let alpha = q2;
    let beta = q3 - q2 * p2 * C64::new(2.0, 0.0);
    Some((alpha, beta, tn, n))
}

/// First three s-derivatives of the Abel-Jacobi parameterization
/// `s ↦ α(x0 + s)` in the x-chart at a non-Weierstrass point.
fn curve_expansion(
    pd: &Arc<PeriodData>,
    x: C64,
    y: C64,
) -> (Vector2<C64>, Vector2<C64>, Vector2<C64>) {
    let curve = &pd.curve;
    let f1 = curve.f_prime(x);
    let f2 = {
        // second derivative of f by Horner on the twice-differentiated poly
        let mut acc = C64::new(0.0, 0.0);
        for k in (2..=curve.degree()).rev() {
            acc = acc * x
                + C64::new((k * (k - 1)) as f64, 0.0) * curve.coeffs()[k];
        }
        acc
    };
    let yp = f1 / (y * C64::new(2.0, 0.0));
    let ypp = f2 / (y * C64::new(2.0, 0.0)) - f1 * f1 / (y * y * y * C64::new(4.0, 0.0));
    // B = (1, x)/y; B' = (0,1)/y - (1,x) y'/y²; B'' per product rule
    let inv_y = C64::new(1.0, 0.0) / y;
    let b0 = Vector2::new(inv_y, x * inv_y);
    let db = Vector2::new(
        -yp * inv_y * inv_y,
        inv_y - x * yp * inv_y * inv_y,
    );
    let d2b0 = (C64::new(2.0, 0.0) * yp * yp * inv_y - ypp) * inv_y * inv_y;
    let d2b1 = x * d2b0 - C64::new(2.0, 0.0) * yp * inv_y * inv_y;
    let d2b = Vector2::new(d2b0, d2b1);
    let norm = pd.normalize_matrix();
    (norm * b0, norm * db, norm * d2b)
}

// ---------------------------------------------------------------------------
// Meeting secants

/// Outcome of intersecting two secant lines.
#[derive(Clone, Debug, PartialEq)]
pub enum SecantMeeting {
    Disjoint,
    MeetOnSurface,
    MeetOffSurface,
}

impl std::fmt::Display for SecantMeeting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SecantMeeting::Disjoint => write!(f, "disjoint"),
            SecantMeeting::MeetOnSurface => write!(f, "meet-on-surface"),
            SecantMeeting::MeetOffSurface => write!(f, "meet-off-surface"),
        }
    }
}

/// Classification of when the secant lines of `τ(ζ)` and `τ(ζ')` meet:
/// numerically intersects the lines and independently predicts the class
/// from the group-law conditions, failing on disagreement.
pub fn classify_meeting_secants(
    ctx: &EmbeddingContext,
    zeta: &LengthTwoScheme,
    zeta2: &LengthTwoScheme,
) -> Result<(SecantMeeting, Option<ProjPoint>)> {
    let tz = tau(zeta)?;
    let tz2 = tau(zeta2)?;
    let l1 = ctx.secant_line(&tz);
    let l2 = ctx.secant_line(&tz2);
    let (q, res, _) = projlin::intersect_point(&[&l1, &l2]);
    let numeric_meet = res < 1e-4;
    // a meeting point lies on the surface iff the Coble gradient vanishes
    let numeric = if !numeric_meet {
        SecantMeeting::Disjoint
    } else {
        let (f, _) = ctx.coble_cubic()?;
        if f.gradient(q.coords()).norm() < 1e-4 {
            SecantMeeting::MeetOnSurface
        } else {
            SecantMeeting::MeetOffSurface
        }
    };

    // algebraic prediction from the four conditions
    let mut predicted = SecantMeeting::Disjoint;
    let mut common_translate = None;
    'outer: for e in tz.support() {
        for e2 in tz2.support() {
            if e.distance(e2) < 1e-6 {
                predicted = SecantMeeting::MeetOnSurface;
                common_translate = Some((*e).clone());
                break 'outer;
            }
        }
    }
    if predicted == SecantMeeting::Disjoint {
        predicted = match (zeta, zeta2) {
            (LengthTwoScheme::Reduced { a, b }, LengthTwoScheme::Reduced { a: a2, b: b2 }) => {
                // shared support point plus a + b + c ~ 0
                let shared = [(a, b, a2, b2), (a, b, b2, a2), (b, a, a2, b2), (b, a, b2, a2)]
                    .into_iter()
                    .find(|(s, _, s2, _)| s.distance(s2) < 1e-6);
                match shared {
                    Some((s, o1, _s2, o2))
                        if o1.distance(o2) > 1e-6
                            && s.add(o1)?.add(o2)?.is_zero() =>
                    {
                        SecantMeeting::MeetOffSurface
                    }
                    _ => SecantMeeting::Disjoint,
                }
            }
            (LengthTwoScheme::Reduced { a, b }, LengthTwoScheme::NonReduced { a: c, .. })
            | (LengthTwoScheme::NonReduced { a: c, .. }, LengthTwoScheme::Reduced { a, b }) => {
                let shared_other = if a.distance(c) < 1e-6 {
                    Some(b)
                } else if b.distance(c) < 1e-6 {
                    Some(a)
                } else {
                    None
                };
                match shared_other {
                    Some(other) if c.scale(2).add(other)?.is_zero() => {
                        SecantMeeting::MeetOffSurface
                    }
                    _ => SecantMeeting::Disjoint,
                }
            }
            (
                LengthTwoScheme::NonReduced { a, v },
                LengthTwoScheme::NonReduced { a: a2, v: v2 },
            ) => {
                if a.distance(a2) < 1e-6 && v.fs_distance(v2) > 1e-6 && a.scale(3).is_zero()
                {
                    SecantMeeting::MeetOffSurface
                } else {
                    SecantMeeting::Disjoint
                }
            }
        };
    }
    if numeric != predicted {
        return Err(Error::ClassificationMismatch(
            numeric.to_string(),
            predicted.to_string(),
        ));
    }
    // when the class is meet-on-surface, the point is the common translate
    if let Some(e) = common_translate {
        let img = ctx.phi3(&e);
        if q.fs_distance(&img) > 1e-5 {
            return Err(Error::UnexpectedIncidence(format!(
                "meeting point is not the translate parameter: {:e}",
                q.fs_distance(&img)
            )));
        }
    }
    Ok((numeric, numeric_meet.then_some(q)))
}

// ---------------------------------------------------------------------------
// Fibers over the image fourfold

/// The image of a generic reduced triple lies on exactly the three secant
/// lines of its length-two subschemes; checked against a pool of random
/// secants, returning the fiber count 3.
pub fn fiber_over_image(ctx: &EmbeddingContext, xi: &KummerTriple) -> Result<usize> {
    if xi.min_support_distance() < 5e-2 {
        return Err(Error::GenericityViolated(
            "triple support too close for the fiber count".to_string(),
        ));
    }
    let p = crate::maps::phi_d(ctx, xi)?;
    let expected: Vec<LengthTwoScheme> = xi.length_two_subschemes();
    let mut lines = Vec::new();
    for zeta in &expected {
        let line = ctx.secant_line(&tau(zeta)?);
        let d = line.point_distance(&p);
        if d > 1e-6 {
            return Err(Error::UnexpectedIncidence(format!(
                "expected secant misses the image by {d:e}"
            )));
        }
        lines.push(line);
    }
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            if lines[i].projector_distance(&lines[j]) < 1e-3 {
                return Err(Error::UnexpectedIncidence(
                    "expected secants collapse together".to_string(),
                ));
            }
        }
    }
    // random pool: no other secant passes through the image point
    for (scheme, line) in ctx.secant_pool()?.iter() {
        let close = expected.iter().any(|z| z.distance(scheme) < 1e-1);
        if close {
            continue;
        }
        let d = line.point_distance(&p);
        if d < 1e-3 {
            return Err(Error::UnexpectedIncidence(format!(
                "unrelated secant meets the image at distance {d:e}"
            )));
        }
    }
    Ok(3)
}

// ---------------------------------------------------------------------------
// Constructions for the negative cases

/// Solve `θ[δ](target(s)) = 0` for a complex parameter by grid scan plus
/// Newton with a numerical derivative.
fn solve_on_theta(
    pd: &Arc<PeriodData>,
    target: impl Fn(C64) -> Vector2<C64>,
) -> Option<C64> {
    let mut best = (f64::INFINITY, C64::new(0.0, 0.0));
    for i in 0..24 {
        for j in 0..24 {
            let s = C64::new(
                -1.2 + 2.4 * (i as f64 + 0.5) / 24.0,
                -1.2 + 2.4 * (j as f64 + 0.5) / 24.0,
            );
            let v = pd.theta_delta(&pd.reduce(&target(s))).norm();
            if v < best.0 {
                best = (v, s);
            }
        }
    }
    let mut s = best.1;
    // freeze the reduction shift at the seed
    let z0 = target(s);
    let shift = pd.reduce(&z0) - z0;
    let h = 1e-6;
    for _ in 0..60 {
        let g = pd.theta_delta(&(target(s) + shift));
        if g.norm() < 1e-11 * pd.theta_scale {
            return Some(s);
        }
        let gp = pd.theta_delta(&(target(s + C64::new(h, 0.0)) + shift));
        let gm = pd.theta_delta(&(target(s - C64::new(h, 0.0)) + shift));
        let dg = (gp - gm) / C64::new(2.0 * h, 0.0);
        if dg.norm() == 0.0 {
            return None;
        }
        let mut step = -g / dg;
        if step.norm() > 0.3 {
            step *= C64::new(0.3 / step.norm(), 0.0);
        }
        s += step;
    }
    None
}

/// A length-4 reduced scheme on a translate that the level-3 system does
/// not separate: four curve points with divisor sum in the prescribed class.
/// Returns the translate parameter and the four scheme points.
pub fn construct_nonseparated_quadruple(
    ctx: &EmbeddingContext,
    rng: &mut impl Rng,
) -> Option<(JacobianPoint, Vec<JacobianPoint>)> {
    let pd = ctx.periods();
    let grid = crate::jacobian::curve_grid(pd);
    let k = rng.random_range(0..grid.generic.len() / 2);
    let picks: Vec<Vector2<C64>> = (0..3)
        .map(|i| grid.generic[(2 * k + i * 7) % grid.generic.len()].alpha)
        .collect();
    let dir = Vector2::new(
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
    );
    let base = Vector2::new(
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
    );
    let sum3: Vector2<C64> = picks[0] + picks[1] + picks[2];
    // fourth point exists on the curve iff w(s) = -3a(s) - Σ α(x_i) hits Θ
    let target = |s: C64| -> Vector2<C64> { -(base + dir * s) * C64::new(3.0, 0.0) - sum3 };
    let s = solve_on_theta(pd, target)?;
    let a = ctx.point(base + dir * s);
    let w = pd.reduce(&target(s));
    let (_, alpha4) = locate_alpha(pd, &w)?;
    let mut points: Vec<JacobianPoint> = picks
        .iter()
        .map(|al| ctx.point(al + a.rep()))
        .collect();
    points.push(ctx.point(alpha4 + a.rep()));
    // require an honestly reduced scheme
    for i in 0..4 {
        for j in (i + 1)..4 {
            if points[i].distance(&points[j]) < 1e-3 {
                return None;
            }
        }
    }
    Some((a, points))
}

/// Two surface points whose embedded tangent planes meet: both tangent-lift
/// schemes sit on one translate with the divisor condition of the meeting-
/// tangents lemma.  Returns (b, c).
pub fn construct_meeting_tangents(
    ctx: &EmbeddingContext,
    rng: &mut impl Rng,
) -> Option<(JacobianPoint, JacobianPoint)> {
    let pd = ctx.periods();
    let grid = crate::jacobian::curve_grid(pd);
    let k = rng.random_range(0..grid.generic.len());
    let alpha_x = grid.generic[k].alpha;
    let dir = Vector2::new(
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
    );
    let base = Vector2::new(
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
        C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)),
    );
    // 2α(y) = -3e - 2α(x): y exists iff the halved target lies on Θ
    let target = |s: C64| -> Vector2<C64> {
        (-(base + dir * s) * C64::new(3.0, 0.0) - alpha_x * C64::new(2.0, 0.0))
            * C64::new(0.5, 0.0)
    };
    let s = solve_on_theta(pd, target)?;
    let e = ctx.point(base + dir * s);
    let alpha_y = pd.reduce(&target(s));
    // confirm the curve point exists (it must, the target is on Θ)
    locate_alpha(pd, &alpha_y)?;
    let b = ctx.point(alpha_x + e.rep());
    let c = ctx.point(alpha_y + e.rep());
    if b.distance(&c) < 1e-3 {
        return None;
    }
    Some((b, c))
}

/// A tangent-vector scheme contained in a non-separated length-4 scheme
/// supported at one point: fourth-order contact of a translate.  Returns
/// (b, v, e) with `(b, v) ⊆ Θ_e` and `Z = 4x` on the translate.
pub fn construct_quartic_contact(
    ctx: &EmbeddingContext,
    rng: &mut impl Rng,
) -> Option<(JacobianPoint, ProjPoint, JacobianPoint)> {
    let pd = ctx.periods();
    let grid = crate::jacobian::curve_grid(pd);
    for _ in 0..20 {
        let k = rng.random_range(0..grid.generic.len());
        let sample = &grid.generic[k];
        let (x, y) = match sample.point {
            crate::curve::CurvePoint::Affine { x, y } => (x, y),
            crate::curve::CurvePoint::Infinity { .. } => continue,
        };
        if y.norm() < 0.2 {
            continue;
        }
        // 3e = -4α(x); any of the 81 third roots will do, pick the plain one
        let e = ctx.point(-(sample.alpha * C64::new(4.0 / 3.0, 0.0)));
        let b = ctx.point(sample.alpha + e.rep());
        let v = pd.curve.canonical_map(&crate::curve::CurvePoint::Affine { x, y });
        // sanity: (b, v) really sits on Θ_e with the right direction
        if !crate::jacobian::on_theta(&e, &b) {
            continue;
        }
        return Some((b, v, e));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::default_curve;
    use crate::periods::{compute_periods, DEFAULT_PRECISION};
    use crate::sampling::rng_for;
    use std::sync::OnceLock;

    fn ctx() -> &'static EmbeddingContext {
        static CTX: OnceLock<EmbeddingContext> = OnceLock::new();
        CTX.get_or_init(|| {
            let pd = compute_periods(&default_curve(), DEFAULT_PRECISION).unwrap();
            EmbeddingContext::new(pd, 42)
        })
    }

    fn random_point(c: &EmbeddingContext, rng: &mut impl Rng) -> JacobianPoint {
        let t: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let z = Vector2::new(C64::new(t[0], 0.0), C64::new(t[1], 0.0))
            + c.periods().omega_col(0) * C64::new(t[2], 0.0)
            + c.periods().omega_col(1) * C64::new(t[3], 0.0);
        c.point(z)
    }

    #[test]
    fn random_triples_and_quadruples_are_separated() {
        let c = ctx();
        let mut rng = rng_for(42, "sep-random");
        for _ in 0..6 {
            let pts: Vec<JacobianPoint> = (0..3).map(|_| random_point(c, &mut rng)).collect();
            let (sep, gap) = separates(c, &JetScheme::from_points(&pts));
            assert!(sep, "three random points not separated, gap {gap:e}");
            let pts4: Vec<JacobianPoint> = (0..4).map(|_| random_point(c, &mut rng)).collect();
            let (sep4, _) = separates(c, &JetScheme::from_points(&pts4));
            assert!(sep4);
        }
    }

    #[test]
    fn separation_is_monotone_under_subschemes() {
        let c = ctx();
        let mut rng = rng_for(42, "sep-monotone");
        for _ in 0..5 {
            let pts: Vec<JacobianPoint> = (0..4).map(|_| random_point(c, &mut rng)).collect();
            let (sep, _) = separates(c, &JetScheme::from_points(&pts));
            if !sep {
                continue;
            }
            for drop in 0..4 {
                let sub: Vec<JacobianPoint> = pts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, p)| p.clone())
                    .collect();
                let (s, _) = separates(c, &JetScheme::from_points(&sub));
                assert!(s, "subscheme of a separated scheme must be separated");
            }
        }
    }

    #[test]
    fn constructed_quadruple_is_not_separated() {
        let c = ctx();
        let mut rng = rng_for(42, "sep-negative");
        let mut done = 0;
        let mut attempts = 0;
        while done < 3 && attempts < 20 {
            attempts += 1;
            let Some((a, pts)) = construct_nonseparated_quadruple(c, &mut rng) else {
                continue;
            };
            let (sep, gap) = separates(c, &JetScheme::from_points(&pts));
            assert!(!sep, "constructed scheme separated with gap {gap:e}");
            // the scheme lies on the translate Θ_a
            for p in &pts {
                assert!(crate::jacobian::on_theta(&a, p));
            }
            done += 1;
        }
        assert!(done >= 3, "constructions failed too often");
    }

    #[test]
    fn terracini_generic_two_points_is_injective() {
        let c = ctx();
        let mut rng = rng_for(42, "terr-generic");
        for _ in 0..5 {
            let b = random_point(c, &mut rng);
            let d = random_point(c, &mut rng);
            if b.distance(&d) < 5e-2 {
                continue;
            }
            let pb = c.phi3(&b);
            let pd_ = c.phi3(&d);
            let mid = ProjPoint::new(
                pb.coords() * C64::new(0.7, 0.1) + pd_.coords() * C64::new(0.4, -0.2),
            );
            assert!(terracini_two_points(c, &b, &d, &mid).unwrap());
            // at a support point the differential degenerates
            assert!(!terracini_two_points(c, &b, &d, &pb).unwrap());
        }
    }

    #[test]
    fn terracini_detects_meeting_tangents() {
        let c = ctx();
        let mut rng = rng_for(42, "terr-negative");
        let mut done = 0;
        let mut attempts = 0;
        while done < 3 && attempts < 20 {
            attempts += 1;
            let Some((b, d)) = construct_meeting_tangents(c, &mut rng) else {
                continue;
            };
            let pb = c.phi3(&b);
            let pd_ = c.phi3(&d);
            let mid = ProjPoint::new(
                pb.coords() * C64::new(0.6, 0.2) + pd_.coords() * C64::new(0.5, -0.1),
            );
            let verdict = terracini_two_points(c, &b, &d, &mid).unwrap();
            assert!(!verdict, "tangent planes should meet for the construction");
            done += 1;
        }
        assert!(done >= 3, "constructions failed too often");
    }

    #[test]
    fn terracini_generic_double_point_is_injective() {
        let c = ctx();
        let mut rng = rng_for(42, "terr-dp");
        for _ in 0..3 {
            let a = random_point(c, &mut rng);
            let v = ProjPoint::from_slice(&[
                C64::new(1.0, 0.0),
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ]);
            let line = c.tangent_line(&a, &v);
            // a generic point of the tangent line away from φ₃(a)
            let basis = line.basis();
            let p = ProjPoint::new(
                basis.column(0).into_owned() * C64::new(0.8, 0.3)
                    + basis.column(1).into_owned() * C64::new(0.55, -0.2),
            );
            if p.fs_distance(&c.phi3(&a)) < 1e-3 {
                continue;
            }
            assert!(terracini_double_point(c, &a, &v, &p).unwrap());
            assert!(!terracini_double_point(c, &a, &v, &c.phi3(&a)).unwrap());
        }
    }

    #[test]
    fn terracini_detects_quartic_contact() {
        let c = ctx();
        let mut rng = rng_for(42, "terr-dp-negative");
        let mut done = 0;
        let mut attempts = 0;
        while done < 3 && attempts < 12 {
            attempts += 1;
            let Some((b, v, _e)) = construct_quartic_contact(c, &mut rng) else {
                continue;
            };
            let line = c.tangent_line(&b, &v);
            let basis = line.basis();
            let p = ProjPoint::new(
                basis.column(0).into_owned() * C64::new(0.7, 0.25)
                    + basis.column(1).into_owned() * C64::new(0.5, -0.3),
            );
            if p.fs_distance(&c.phi3(&b)) < 1e-3 {
                continue;
            }
            let verdict = terracini_double_point(c, &b, &v, &p).unwrap();
            assert!(!verdict, "fourth-order contact must break separation");
            done += 1;
        }
        assert!(done >= 3, "constructions failed too often");
    }

    #[test]
    fn secant_classification_matches_predictions() {
        let c = ctx();
        let mut rng = rng_for(42, "classify");
        // condition (2): shared point with zero sum
        for _ in 0..3 {
            let a = random_point(c, &mut rng);
            let b = random_point(c, &mut rng);
            let third = a.add(&b).unwrap().neg();
            let z1 = LengthTwoScheme::reduced(a.clone(), b.clone());
            let z2 = LengthTwoScheme::reduced(a.clone(), third);
            let (class, q) = classify_meeting_secants(c, &z1, &z2).unwrap();
            assert_eq!(class, SecantMeeting::MeetOffSurface);
            assert!(q.is_some());
        }
        // generic disjoint
        for _ in 0..3 {
            let z1 = LengthTwoScheme::reduced(random_point(c, &mut rng), random_point(c, &mut rng));
            let z2 = LengthTwoScheme::reduced(random_point(c, &mut rng), random_point(c, &mut rng));
            let (class, _) = classify_meeting_secants(c, &z1, &z2).unwrap();
            assert_eq!(class, SecantMeeting::Disjoint);
        }
        // condition (1): both schemes inside one translate
        for _ in 0..3 {
            let e = random_point(c, &mut rng);
            let grid = crate::jacobian::curve_grid(c.periods());
            let pick = |i: usize| {
                c.point(grid.generic[(i * 13 + 5) % grid.generic.len()].alpha + e.rep())
            };
            let z1 = LengthTwoScheme::reduced(pick(1), pick(2));
            let z2 = LengthTwoScheme::reduced(pick(3), pick(4));
            let (class, q) = classify_meeting_secants(c, &z1, &z2).unwrap();
            assert_eq!(class, SecantMeeting::MeetOnSurface);
            let q = q.unwrap();
            assert!(q.fs_distance(&c.phi3(&e)) < 1e-5);
        }
        // condition (3): tangent scheme against {a, -2a}
        for _ in 0..2 {
            let a = random_point(c, &mut rng);
            let v = ProjPoint::from_slice(&[
                C64::new(1.0, 0.0),
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ]);
            let z1 = LengthTwoScheme::reduced(a.clone(), a.scale(-2));
            let z2 = LengthTwoScheme::non_reduced(a.clone(), v);
            let (class, _) = classify_meeting_secants(c, &z1, &z2).unwrap();
            assert_eq!(class, SecantMeeting::MeetOffSurface);
        }
    }

    #[test]
    fn tangent_pairs_at_three_torsion_meet() {
        // two distinct tangent directions at a 3-torsion point give meeting
        // secants away from the surface
        let c = ctx();
        let pd = c.periods();
        let third = C64::new(1.0 / 3.0, 0.0);
        let a = c.point(pd.lattice_vector(&[1, 1, 0, 1]) * third);
        let v = ProjPoint::from_slice(&[C64::new(1.0, 0.0), C64::new(0.4, 0.3)]);
        let w = ProjPoint::from_slice(&[C64::new(1.0, 0.0), C64::new(-0.8, 0.1)]);
        let z1 = LengthTwoScheme::non_reduced(a.clone(), v);
        let z2 = LengthTwoScheme::non_reduced(a, w);
        let (class, q) = classify_meeting_secants(c, &z1, &z2).unwrap();
        assert_eq!(class, SecantMeeting::MeetOffSurface);
        assert!(q.is_some());
    }

    #[test]
    fn degenerate_triples_are_rejected_by_the_fiber_guard() {
        let c = ctx();
        let mut rng = rng_for(42, "fiber-degenerate");
        let a = random_point(c, &mut rng);
        // support {a, a, -2a} collapses two points
        let xi = KummerTriple::reduced(a.clone(), a.clone(), a.scale(-2)).unwrap();
        assert!(matches!(
            fiber_over_image(c, &xi),
            Err(Error::GenericityViolated(_))
        ));
    }

    #[test]
    fn classification_is_symmetric() {
        let c = ctx();
        let mut rng = rng_for(42, "classify-sym");
        let a = random_point(c, &mut rng);
        let b = random_point(c, &mut rng);
        let third = a.add(&b).unwrap().neg();
        let z1 = LengthTwoScheme::reduced(a.clone(), b);
        let z2 = LengthTwoScheme::reduced(a, third);
        let (c1, _) = classify_meeting_secants(c, &z1, &z2).unwrap();
        let (c2, _) = classify_meeting_secants(c, &z2, &z1).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn generic_fiber_has_three_secants() {
        let c = ctx();
        let mut rng = rng_for(42, "fiber");
        let mut done = 0;
        while done < 2 {
            let a = random_point(c, &mut rng);
            let b = random_point(c, &mut rng);
            let third = a.add(&b).unwrap().neg();
            let Ok(xi) = KummerTriple::reduced(a, b, third) else { continue };
            if xi.min_support_distance() < 5e-2 {
                continue;
            }
            match fiber_over_image(c, &xi) {
                Ok(n) => {
                    assert_eq!(n, 3);
                    done += 1;
                }
                Err(Error::GenericityViolated(_)) => continue,
                Err(e) => panic!("fiber count failed: {e}"),
            }
        }
    }
}
