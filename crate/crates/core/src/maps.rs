//! The two projective models of the Kummer fourfold at desk scale: the
//! divisor-sum map through products of translated theta functions, and the
//! span-intersection map through secant lines, together with the polar
//! duality relating them, the Kummer K3 triangle, and the Weddle quartic.

use crate::embed::{fit_projective_map, EmbeddingContext};
use crate::jacobian::{tau, theta_intersection, JacobianPoint, KummerTriple, LengthTwoScheme};
use crate::projlin::{self, fit_hypersurface, FormCoefficients, ProjPoint, RANK_TOL};
use crate::sampling::Kronecker;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector, Vector2};

/// Rank tolerance for span intersections: generous enough for accumulated
/// theta noise in the span bases, far below genuine principal angles.
pub const INTERSECT_TOL: f64 = 3e-7;

/// A point of `|(n+1)Θ|`: coefficients of a product of translated theta
/// functions in the level-(n+1) basis.
#[derive(Clone, Debug)]
pub struct DivisorClassVector {
    pub level: u32,
    pub coeffs: DVector<C64>,
    /// Relative residual of the expansion on held-out sample points.
    pub residual: f64,
}

impl DivisorClassVector {
    pub fn as_point(&self) -> ProjPoint {
        ProjPoint::new(self.coeffs.clone())
    }
}

/// Expand `∏ θ[δ](z - a_i)` in the level-(n+1) basis.
///
/// The support must sum to zero modulo the lattice; representatives are
/// re-centered so they sum to zero exactly, which makes the product an honest
/// section of the level system.  The expansion is least squares over
/// `3 (n+1)²` sample points with the residual recorded on held-out points.
pub fn phi_mu_theta(
    ctx: &EmbeddingContext,
    points: &[JacobianPoint],
    n: u32,
) -> Result<DivisorClassVector> {
    assert!((1..=3).contains(&n), "level must be 1, 2 or 3");
    assert_eq!(points.len(), n as usize + 1, "need n+1 support points");
    let pd = ctx.periods();
    let mut sum = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for p in points {
        sum += p.rep();
    }
    let defect = pd.reduce(&sum).norm();
    if defect > 1e-8 {
        return Err(Error::SumNotZero(defect));
    }
    // exact re-centering: shift the last representative by the lattice part
    let mut reps: Vec<Vector2<C64>> = points.iter().map(|p| *p.rep()).collect();
    let last = reps.len() - 1;
    let mut partial = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for r in reps.iter().take(last) {
        partial += r;
    }
    reps[last] = -partial;

    let basis_len = ((n + 1) * (n + 1)) as usize;
    let n_fit = 3 * basis_len;
    let n_holdout = 20;
    let mut kron = Kronecker::<4>::new(crate::sampling::derive_seed(
        ctx.seed(),
        &format!("mu-theta-{n}"),
    ));
    let mut zs = Vec::with_capacity(n_fit + n_holdout);
    for _ in 0..(n_fit + n_holdout) {
        let t = kron.next_point();
        let z = Vector2::new(C64::new(t[0], 0.0), C64::new(t[1], 0.0))
            + pd.omega_col(0) * C64::new(t[2], 0.0)
            + pd.omega_col(1) * C64::new(t[3], 0.0);
        zs.push(pd.reduce(&z));
    }
    let product = |z: &Vector2<C64>| -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for r in &reps {
            acc *= pd.theta_delta(&(z - r));
        }
        acc
    };
    let mut v = DMatrix::<C64>::zeros(n_fit, basis_len);
    let mut g = DVector::<C64>::zeros(n_fit);
    for (i, z) in zs.iter().take(n_fit).enumerate() {
        let b = ctx.level_basis(n + 1, z);
        for j in 0..basis_len {
            v[(i, j)] = b[j];
        }
        g[i] = product(z);
    }
    let svd = v.svd(true, true);
    let c = svd
        .solve(&g, 1e-13)
        .map_err(|_| Error::ExpansionResidualTooLarge(f64::INFINITY))?;
    let c = DVector::from_iterator(basis_len, c.iter().copied());
    // held-out residual, relative to the rms of the product
    let mut num = 0.0;
    let mut den = 0.0;
    for z in zs.iter().skip(n_fit) {
        let b = ctx.level_basis(n + 1, z);
        let pred: C64 = (0..basis_len).map(|j| b[j] * c[j]).sum();
        let truth = product(z);
        num += (pred - truth).norm_sqr();
        den += truth.norm_sqr();
    }
    let residual = (num / den.max(1e-300)).sqrt();
    if residual > 1e-5 {
        return Err(Error::ExpansionResidualTooLarge(residual));
    }
    let norm = c.norm();
    Ok(DivisorClassVector {
        level: n,
        coeffs: c / C64::new(norm, 0.0),
        residual,
    })
}

/// Residual above which a near-nullvector no longer counts as a common point.
const MEET_RESIDUAL: f64 = 1e-4;

/// The span-intersection model: a triple maps to the common point of the
/// three translate spans, cross-checked against the secant-line route.
pub fn phi_d(ctx: &EmbeddingContext, xi: &KummerTriple) -> Result<ProjPoint> {
    match xi {
        KummerTriple::Reduced { a, b, c } => {
            let sa = ctx.translate_span(a)?;
            let sb = ctx.translate_span(b)?;
            let sc = ctx.translate_span(c)?;
            let (p, res, second) = projlin::intersect_point(&[&sa, &sb, &sc]);
            if res > MEET_RESIDUAL {
                return Err(Error::EmptyIntersection);
            }
            if second < MEET_RESIDUAL {
                return Err(Error::UnexpectedDimension(1, 0));
            }
            // independent route: intersect two secant lines
            let l1 = ctx.secant_line(&tau(&LengthTwoScheme::reduced(a.clone(), b.clone()))?);
            let l2 = ctx.secant_line(&tau(&LengthTwoScheme::reduced(a.clone(), c.clone()))?);
            let (q, qres, _) = projlin::intersect_point(&[&l1, &l2]);
            let gap = p.fs_distance(&q);
            if qres > MEET_RESIDUAL || gap > 1e-5 {
                return Err(Error::UnexpectedIncidence(format!(
                    "span and secant routes disagree: meet {qres:e}, gap {gap:e}"
                )));
            }
            Ok(p)
        }
        KummerTriple::WithTangent { a, v, c } => {
            let l1 = ctx.secant_line(&tau(&LengthTwoScheme::non_reduced(
                a.clone(),
                v.clone(),
            ))?);
            let l2 = ctx.secant_line(&tau(&LengthTwoScheme::reduced(a.clone(), c.clone()))?);
            let (p, res, second) = projlin::intersect_point(&[&l1, &l2]);
            if res > MEET_RESIDUAL {
                return Err(Error::EmptyIntersection);
            }
            if second < MEET_RESIDUAL {
                return Err(Error::UnexpectedDimension(1, 0));
            }
            Ok(p)
        }
    }
}

/// Fubini-Study gap of the duality square: polar image of the span model
/// against the product model.
pub fn verify_duality(ctx: &EmbeddingContext, xi: &KummerTriple) -> Result<f64> {
    if xi.min_support_distance() < 1e-2 {
        return Err(Error::GenericityViolated(
            "support points too close".to_string(),
        ));
    }
    let p = phi_d(ctx, xi)?;
    let polar = match ctx.coble_polar(&p) {
        Ok(q) => q,
        Err(Error::IndeterminacyPoint(_)) => return Err(Error::OnContractedLocus),
        Err(e) => return Err(e),
    };
    let support: Vec<JacobianPoint> = xi.support().into_iter().cloned().collect();
    let product = match xi {
        KummerTriple::Reduced { .. } => phi_mu_theta(ctx, &support, 2)?,
        KummerTriple::WithTangent { a, .. } => {
            // doubled tangent support: a, a, c
            let pts = vec![a.clone(), a.clone(), support[1].clone()];
            phi_mu_theta(ctx, &pts, 2)?
        }
    };
    Ok(polar.fs_distance(&product.as_point()))
}

/// Both K3 models of a summand pair `{a, -a}` plus the polar-triangle gap:
/// the level-2 image of the intersection scheme, and the product vector.
pub struct K3Models {
    pub quartic_point: ProjPoint,
    pub product: DivisorClassVector,
    /// `d(G · P(quartic_point), product)` with the frozen gauge `G`.
    pub gap: f64,
}

pub fn k3_models(ctx: &EmbeddingContext, a: &JacobianPoint) -> Result<K3Models> {
    if a.scale(2).is_zero() {
        return Err(Error::GenericityViolated("a is 2-torsion".to_string()));
    }
    let scheme = theta_intersection(a, &a.neg())?;
    let supports = scheme.support();
    let w = supports[0];
    let p_minus = ctx.phi2(w);
    if supports.len() == 2 {
        // the intersection is ι-stable: both supports have one φ₂ image
        let other = ctx.phi2(supports[1]);
        if p_minus.fs_distance(&other) > 1e-6 {
            return Err(Error::UnexpectedIncidence(format!(
                "intersection scheme is not ι-stable: {:e}",
                p_minus.fs_distance(&other)
            )));
        }
    }
    let product = phi_mu_theta(ctx, &[a.clone(), a.neg()], 1)?;
    let gauge = k3_gauge_matrix(ctx)?;
    let polar = ctx.kummer_polar(&p_minus)?;
    let mapped = ProjPoint::new(&gauge * polar.coords());
    let gap = mapped.fs_distance(&product.as_point());
    Ok(K3Models {
        quartic_point: p_minus,
        product,
        gap,
    })
}

/// The frozen projective change of coordinates aligning the Kummer polar
/// image with the level-2 product coordinates, fitted once per context.
fn k3_gauge_matrix(ctx: &EmbeddingContext) -> Result<DMatrix<C64>> {
    ctx.k3_gauge(|| {
        let fit = || -> Result<DMatrix<C64>> {
            let mut pairs = Vec::new();
            let samples = ctx.jacobian_samples("k3-gauge", 24);
            for a in &samples {
                if pairs.len() >= 6 {
                    break;
                }
                if a.scale(2).is_zero() || a.distance(&a.neg()) < 1e-2 {
                    continue;
                }
                let scheme = match theta_intersection(a, &a.neg()) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                let w = scheme.support()[0].clone();
                let p_minus = ctx.phi2(&w);
                let polar = match ctx.kummer_polar(&p_minus) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let product = phi_mu_theta(ctx, &[a.clone(), a.neg()], 1)?;
                pairs.push((polar, product.as_point()));
            }
            fit_projective_map(&pairs, 4)
        };
        fit().map_err(|e| e.to_string())
    })
}

/// Weddle quartic: the image of the summand-zero K3 family in the
/// anti-invariant 3-space of the zero translate.  Returns the quartic in the
/// 3-space coordinates, the uniqueness gap, and the fresh-sample residual.
pub struct WeddleFit {
    pub quartic: FormCoefficients,
    pub gap: f64,
    pub fresh_residual: f64,
    /// worst distance of a sampled image from the 3-space
    pub planarity: f64,
}

pub fn weddle_fit(ctx: &EmbeddingContext) -> Result<WeddleFit> {
    let zero = ctx.zero();
    let split = ctx.iota_splitting(&zero)?;
    let u3 = split.three_space.basis();
    let n_fit = 70;
    let n_fresh = 30;
    let samples = ctx.jacobian_samples("weddle", 4 * (n_fit + n_fresh));
    let mut pts: Vec<ProjPoint> = Vec::new();
    let mut planarity = 0.0f64;
    for b in &samples {
        if pts.len() >= n_fit + n_fresh {
            break;
        }
        if b.scale(2).is_zero() || b.distance(&zero) < 1e-2 || b.scale(3).is_zero() {
            continue;
        }
        let xi = match KummerTriple::reduced(b.clone(), b.neg(), zero.clone()) {
            Ok(xi) => xi,
            Err(_) => continue,
        };
        if xi.min_support_distance() < 1e-2 {
            continue;
        }
        let p = match phi_d(ctx, &xi) {
            Ok(p) => p,
            Err(_) => continue,
        };
        // the image lies on the secant line of τ(b, -b)
        let line = ctx.secant_line(&tau(&LengthTwoScheme::reduced(b.clone(), b.neg()))?);
        if line.point_distance(&p) > 1e-6 {
            return Err(Error::UnexpectedIncidence(format!(
                "Weddle sample off its secant line by {:e}",
                line.point_distance(&p)
            )));
        }
        planarity = planarity.max(split.distance_from_three_space(&p));
        pts.push(ProjPoint::new(u3.adjoint() * p.coords()));
    }
    if pts.len() < n_fit + n_fresh {
        return Err(Error::GenericityViolated(format!(
            "only {} usable Weddle samples",
            pts.len()
        )));
    }
    let (quartic, gap) = fit_hypersurface(&pts[..n_fit], 4, false, RANK_TOL)?;
    let mut fresh = 0.0f64;
    for p in &pts[n_fit..] {
        fresh = fresh.max(quartic.evaluate(p.coords()).norm());
    }
    Ok(WeddleFit {
        quartic,
        gap,
        fresh_residual: fresh,
        planarity,
    })
}

/// Containment law: the span-model image of a triple lies on the secant
/// line of each of its length-two subschemes.  Returns the worst distance.
pub fn containment_gap(ctx: &EmbeddingContext, xi: &KummerTriple) -> Result<f64> {
    let p = phi_d(ctx, xi)?;
    let mut worst = 0.0f64;
    for zeta in xi.length_two_subschemes() {
        let line = ctx.secant_line(&tau(&zeta)?);
        worst = worst.max(line.point_distance(&p));
    }
    Ok(worst)
}
