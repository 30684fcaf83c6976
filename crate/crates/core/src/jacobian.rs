//! Points of the Jacobian `A = ℂ²/Λ`, its group law and torsion, membership
//! in theta-divisor translates, and the length-two-scheme involution given by
//! intersecting two translates.
//!
//! The intersection `Θ_a ∩ Θ_b` is found numerically: the pullback
//! `g(p) = θ[δ](α(p) + a - b)` is a degree-2 section on the curve, so its
//! zeros are swept on a polar grid over both sheets and polished by Newton
//! steps in the curve coordinate.

use crate::curve::CurvePoint;
use crate::periods::PeriodData;
use crate::projlin::ProjPoint;
use crate::theta::JetRequest;
use crate::{theta, Error, Result, C64};
use nalgebra::Vector2;
use std::sync::Arc;

/// Relative theta tolerance deciding membership `w ∈ Θ_a`.
pub const TOL_ZERO: f64 = 1e-6;

/// Merge radius for coincident roots of the intersection sweep.
pub const EPS_MERGE: f64 = 1e-5;

/// A point of the Jacobian: a lattice-reduced representative plus the period
/// data it lives on.
#[derive(Clone)]
pub struct JacobianPoint {
    z: Vector2<C64>,
    periods: Arc<PeriodData>,
}

impl std::fmt::Debug for JacobianPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Jac({:.6}{:+.6}i, {:.6}{:+.6}i)",
            self.z[0].re, self.z[0].im, self.z[1].re, self.z[1].im
        )
    }
}

impl JacobianPoint {
    pub fn new(periods: &Arc<PeriodData>, z: Vector2<C64>) -> Self {
        JacobianPoint {
            z: periods.reduce(&z),
            periods: periods.clone(),
        }
    }

    pub fn zero(periods: &Arc<PeriodData>) -> Self {
        Self::new(periods, Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0)))
    }

    pub fn rep(&self) -> &Vector2<C64> {
        &self.z
    }

    pub fn periods(&self) -> &Arc<PeriodData> {
        &self.periods
    }

    fn check_same(&self, other: &JacobianPoint) -> Result<()> {
        if self.periods.id() != other.periods.id() {
            return Err(Error::MixedPeriodData);
        }
        Ok(())
    }

    pub fn add(&self, other: &JacobianPoint) -> Result<JacobianPoint> {
        self.check_same(other)?;
        Ok(JacobianPoint::new(&self.periods, self.z + other.z))
    }

    pub fn sub(&self, other: &JacobianPoint) -> Result<JacobianPoint> {
        self.check_same(other)?;
        Ok(JacobianPoint::new(&self.periods, self.z - other.z))
    }

    pub fn neg(&self) -> JacobianPoint {
        JacobianPoint::new(&self.periods, -self.z)
    }

    pub fn scale(&self, k: i64) -> JacobianPoint {
        JacobianPoint::new(&self.periods, self.z * C64::new(k as f64, 0.0))
    }

    /// Distance to `other` as the norm of the reduced difference.
    pub fn distance(&self, other: &JacobianPoint) -> f64 {
        self.periods.reduce(&(self.z - other.z)).norm()
    }

    pub fn is_zero(&self) -> bool {
        self.z.norm() < 1e-8
    }

    pub fn is_equal(&self, other: &JacobianPoint) -> Result<bool> {
        self.check_same(other)?;
        Ok(self.distance(other) < 1e-8)
    }

    /// Total order on reduced representatives, for canonical pair sorting.
    pub fn canonical_key(&self) -> [i64; 4] {
        let q = 1e-9;
        [
            (self.z[0].re / q).round() as i64,
            (self.z[0].im / q).round() as i64,
            (self.z[1].re / q).round() as i64,
            (self.z[1].im / q).round() as i64,
        ]
    }
}

/// All `n^4` n-torsion points, lattice vectors divided by `n`.
pub fn torsion_points(periods: &Arc<PeriodData>, n: u32) -> Vec<JacobianPoint> {
    assert!(n >= 1);
    let nf = C64::new(n as f64, 0.0);
    let mut out = Vec::with_capacity((n * n * n * n) as usize);
    for k1 in 0..n {
        for k2 in 0..n {
            for m1 in 0..n {
                for m2 in 0..n {
                    let v = periods.lattice_vector(&[k1 as i64, k2 as i64, m1 as i64, m2 as i64]);
                    out.push(JacobianPoint::new(periods, v / nf));
                }
            }
        }
    }
    out
}

/// `|θ[δ](w - a)|`, the membership residual of `w ∈ Θ_a`.
pub fn theta_residual(a: &JacobianPoint, w: &JacobianPoint) -> f64 {
    let pd = a.periods();
    let d = pd.reduce(&(w.rep() - a.rep()));
    pd.theta_delta(&d).norm()
}

/// Whether `w` lies on the translate `Θ_a`.
pub fn on_theta(a: &JacobianPoint, w: &JacobianPoint) -> bool {
    theta_residual(a, w) < TOL_ZERO * a.periods().theta_scale
}

/// The Abel-Jacobi image of a curve point as a Jacobian point.
pub fn abel_jacobi(periods: &Arc<PeriodData>, p: &CurvePoint) -> Result<JacobianPoint> {
    Ok(JacobianPoint::new(periods, periods.abel_jacobi(p)?))
}

// ---------------------------------------------------------------------------
// Length-two schemes and the involution

/// A length-two subscheme of the Jacobian: an unordered pair of distinct
/// points, or a point with a tangent direction in ℙ(T_aA) ≅ ℙ¹ (stored in
/// the hyperelliptic-cover coordinates `[1 : x]`).
#[derive(Clone, Debug)]
pub enum LengthTwoScheme {
    Reduced { a: JacobianPoint, b: JacobianPoint },
    NonReduced { a: JacobianPoint, v: ProjPoint },
}

impl LengthTwoScheme {
    /// Canonically ordered reduced pair.
    pub fn reduced(a: JacobianPoint, b: JacobianPoint) -> Self {
        if a.canonical_key() <= b.canonical_key() {
            LengthTwoScheme::Reduced { a, b }
        } else {
            LengthTwoScheme::Reduced { a: b, b: a }
        }
    }

    pub fn non_reduced(a: JacobianPoint, v: ProjPoint) -> Self {
        LengthTwoScheme::NonReduced { a, v }
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self, LengthTwoScheme::Reduced { .. })
    }

    /// Support points (one or two).
    pub fn support(&self) -> Vec<&JacobianPoint> {
        match self {
            LengthTwoScheme::Reduced { a, b } => vec![a, b],
            LengthTwoScheme::NonReduced { a, .. } => vec![a],
        }
    }

    /// Sum of the support with multiplicity.
    pub fn sum(&self) -> Result<JacobianPoint> {
        match self {
            LengthTwoScheme::Reduced { a, b } => a.add(b),
            LengthTwoScheme::NonReduced { a, .. } => Ok(a.scale(2)),
        }
    }

    /// Distance between two schemes: support distance plus direction
    /// mismatch for nonreduced ones; reduced vs nonreduced compare through
    /// the support only.
    pub fn distance(&self, other: &LengthTwoScheme) -> f64 {
        match (self, other) {
            (
                LengthTwoScheme::Reduced { a, b },
                LengthTwoScheme::Reduced { a: c, b: d },
            ) => {
                let direct = a.distance(c).max(b.distance(d));
                let crossed = a.distance(d).max(b.distance(c));
                direct.min(crossed)
            }
            (
                LengthTwoScheme::NonReduced { a, v },
                LengthTwoScheme::NonReduced { a: c, v: w },
            ) => a.distance(c).max(v.fs_distance(w)),
            (LengthTwoScheme::Reduced { a, b }, LengthTwoScheme::NonReduced { a: c, .. })
            | (LengthTwoScheme::NonReduced { a: c, .. }, LengthTwoScheme::Reduced { a, b }) => {
                a.distance(c).max(b.distance(c))
            }
        }
    }

    /// Whether the whole scheme lies on `Θ_c` (for nonreduced schemes the
    /// tangency condition is included).
    pub fn contained_in_theta(&self, c: &JacobianPoint) -> bool {
        match self {
            LengthTwoScheme::Reduced { a, b } => on_theta(c, a) && on_theta(c, b),
            LengthTwoScheme::NonReduced { a, v } => {
                if !on_theta(c, a) {
                    return false;
                }
                // tangent direction of Θ_c at a must match v
                match theta_tangent_direction(c, a) {
                    Some(dir) => dir.fs_distance(v) < 1e-4,
                    None => false,
                }
            }
        }
    }
}

/// Direction of `Θ_c` at a point `a ∈ Θ_c`, in the `[1 : x]` chart of
/// ℙ(T_aA): the theta gradient rotated to the kernel line, mapped through
/// the inverse tangent framing.
pub fn theta_tangent_direction(c: &JacobianPoint, a: &JacobianPoint) -> Option<ProjPoint> {
    let pd = a.periods();
    let arg = pd.reduce(&(a.rep() - c.rep()));
    let g0 = theta::theta_jet(&pd.delta, &arg, &pd.omega, JetRequest::new(1, 0).ok()?, 1e-12)
        .ok()?;
    let g1 = theta::theta_jet(&pd.delta, &arg, &pd.omega, JetRequest::new(0, 1).ok()?, 1e-12)
        .ok()?;
    // tangent vector t satisfies g·t = 0; chart: t ∝ norm·(1, x)
    // with norm = A⁻¹ the normalization: solve for [1 : x]
    let t = Vector2::new(-g1, g0);
    // invert the framing t = A⁻¹ (1, x)ᵀ  =>  (1, x) = A t
    let w = pd.a_periods * t;
    if w[0].norm() < 1e-12 * w[1].norm() {
        return Some(ProjPoint::from_slice(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
    }
    Some(ProjPoint::from_slice(&[C64::new(1.0, 0.0), w[1] / w[0]]))
}

// ---------------------------------------------------------------------------
// Curve grid: cached Abel-Jacobi values for sweeps and sampling

/// Precomputed `(curve point, α)` samples: a polar sweep over both sheets
/// for root finding, plus well-spread generic samples for span fitting.
#[derive(Debug)]
pub struct CurveGrid {
    pub(crate) sweep: Vec<GridSample>,
    pub(crate) generic: Vec<GridSample>,
    pub(crate) infinity: Vec<GridSample>,
    n_rays: usize,
    n_radii: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct GridSample {
    pub(crate) point: CurvePoint,
    pub(crate) alpha: Vector2<C64>,
}

const SWEEP_RAYS: usize = 64;
const SWEEP_RADII: usize = 40;

pub(crate) fn curve_grid(pd: &Arc<PeriodData>) -> &CurveGrid {
    pd.grid.get_or_init(|| build_curve_grid(pd))
}

fn build_curve_grid(pd: &Arc<PeriodData>) -> CurveGrid {
    let curve = &pd.curve;
    let scale = curve.branch_scale();
    let min_pair = {
        let bps = curve.branch_points();
        let mut m = f64::INFINITY;
        for i in 0..bps.len() {
            for j in (i + 1)..bps.len() {
                m = m.min((bps[i] - bps[j]).norm());
            }
        }
        m
    };
    let keep_away = 0.02 * min_pair;
    let mut sweep = Vec::with_capacity(SWEEP_RAYS * SWEEP_RADII * 2);
    for ri in 0..SWEEP_RADII {
        // radii dense inside 2·scale, stretching to 8·scale outside
        let t = (ri as f64 + 0.5) / SWEEP_RADII as f64;
        let r = if t < 0.75 {
            (t / 0.75) * 2.0 * scale
        } else {
            2.0 * scale * (1.0 + 6.0 * ((t - 0.75) / 0.25).powi(2))
        };
        for ki in 0..SWEEP_RAYS {
            let phi = 2.0 * std::f64::consts::PI * (ki as f64 + 0.5 * (ri % 2) as f64)
                / SWEEP_RAYS as f64;
            let mut x = C64::new(r * phi.cos(), r * phi.sin());
            // nudge off branch points
            if let Some(b) = curve
                .branch_points()
                .iter()
                .find(|b| (x - *b).norm() < keep_away)
            {
                let dir = x - b;
                let dir = if dir.norm() == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    dir / C64::new(dir.norm(), 0.0)
                };
                x = b + dir * C64::new(keep_away, 0.0);
            }
            match alpha_both_sheets(pd, x) {
                Ok((p_plus, a_plus, p_minus, a_minus)) => {
                    sweep.push(GridSample { point: p_plus, alpha: a_plus });
                    sweep.push(GridSample { point: p_minus, alpha: a_minus });
                }
                Err(_) => {
                    // unreachable targets are simply dropped from the sweep
                }
            }
        }
    }
    // generic well-spread samples, kept clear of branch points
    let mut kron = crate::sampling::Kronecker::<2>::new(2);
    let mut generic = Vec::new();
    while generic.len() < 192 {
        let t = kron.next_point();
        let r = (0.25 + 1.45 * t[0]) * scale;
        let phi = 2.0 * std::f64::consts::PI * t[1];
        let x = C64::new(r * phi.cos(), r * phi.sin());
        if curve
            .branch_points()
            .iter()
            .any(|b| (x - b).norm() < 0.1 * min_pair)
        {
            continue;
        }
        if let Ok((p_plus, a_plus, p_minus, a_minus)) = alpha_both_sheets(pd, x) {
            generic.push(GridSample { point: p_plus, alpha: a_plus });
            generic.push(GridSample { point: p_minus, alpha: a_minus });
        }
    }
    // the infinite point(s)
    let mut infinity = Vec::new();
    let n_inf = if curve.degree() == 5 { 1 } else { 2 };
    for branch in 0..n_inf {
        let p = CurvePoint::Infinity { branch };
        if let Ok(alpha) = pd.abel_jacobi(&p) {
            infinity.push(GridSample { point: p, alpha });
        }
    }
    CurveGrid {
        sweep,
        generic,
        infinity,
        n_rays: SWEEP_RAYS,
        n_radii: SWEEP_RADII,
    }
}

/// α on both sheets above x with a single path integral.
fn alpha_both_sheets(
    pd: &Arc<PeriodData>,
    x: C64,
) -> Result<(CurvePoint, Vector2<C64>, CurvePoint, Vector2<C64>)> {
    let integ = pd.integrator(pd.quadrature_order.min(96));
    let (_u, y_end) = integ.integrate_to(x)?;
    let p = CurvePoint::Affine { x, y: y_end };
    let a = pd.abel_jacobi(&p)?;
    let q = CurvePoint::Affine { x, y: -y_end };
    let na = pd.reduce(&-a);
    Ok((p, a, q, na))
}

impl CurveGrid {
    /// Generic curve samples with their Abel-Jacobi images.
    pub fn generic_samples(&self) -> impl Iterator<Item = (&CurvePoint, &Vector2<C64>)> {
        self.generic.iter().map(|s| (&s.point, &s.alpha))
    }

    pub fn generic_len(&self) -> usize {
        self.generic.len()
    }

    pub fn generic_alpha(&self, i: usize) -> Vector2<C64> {
        self.generic[i].alpha
    }

    fn neighbors(&self, idx: usize) -> Vec<usize> {
        // sweep layout: ((ri * rays) + ki) * 2 + sheet
        let sheet = idx % 2;
        let cell = idx / 2;
        let ki = cell % self.n_rays;
        let ri = cell / self.n_rays;
        let mut out = Vec::with_capacity(8);
        for dr in -1i64..=1 {
            for dk in -1i64..=1 {
                if dr == 0 && dk == 0 {
                    continue;
                }
                let r2 = ri as i64 + dr;
                if r2 < 0 || r2 >= self.n_radii as i64 {
                    continue;
                }
                let k2 = (ki as i64 + dk).rem_euclid(self.n_rays as i64);
                let n = ((r2 as usize * self.n_rays) + k2 as usize) * 2 + sheet;
                if n < self.sweep.len() {
                    out.push(n);
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Theta-translate intersection by root sweep

/// The scheme `Θ_a ∩ Θ_b` (length two).
///
/// Sweeps `g(p) = θ[δ](α(p) + a - b)` over the cached polar grid, polishes
/// local minima by Newton in the curve coordinate, and returns the two roots
/// as Jacobian points, collapsing to a nonreduced scheme at a double root.
pub fn theta_intersection(a: &JacobianPoint, b: &JacobianPoint) -> Result<LengthTwoScheme> {
    a.check_same(b)?;
    let pd = a.periods();
    if a.distance(b) < 1e-10 {
        return Err(Error::CoincidentDivisors);
    }
    let d = pd.reduce(&(a.rep() - b.rep()));
    let grid = curve_grid(pd);
    let scale = pd.theta_scale;

    let gval = |alpha: &Vector2<C64>| -> f64 { pd.theta_delta(&pd.reduce(&(alpha + d))).norm() };
    let vals: Vec<f64> = grid.sweep.iter().map(|s| gval(&s.alpha)).collect();
    let mut sorted = vals.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let median = sorted[sorted.len() / 2];
    let threshold = (median / 10.0).min(0.2 * scale);

    // local minima of |g| below the threshold seed the polish
    let mut seeds: Vec<(f64, usize)> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        if v >= threshold {
            continue;
        }
        if grid.neighbors(i).iter().all(|&n| vals[n] >= v) {
            seeds.push((v, i));
        }
    }
    if seeds.is_empty() {
        // thin basins can hide under the threshold test; fall back to the
        // best local minima outright and let the polish decide
        for (i, &v) in vals.iter().enumerate() {
            if grid.neighbors(i).iter().all(|&n| vals[n] >= v) {
                seeds.push((v, i));
            }
        }
    }
    seeds.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
    seeds.truncate(16);

    let mut roots: Vec<(CurvePoint, Vector2<C64>, f64)> = Vec::new();
    for &(_, idx) in &seeds {
        let s = &grid.sweep[idx];
        if let Some((p, alpha, res)) = polish_root(pd, s, &d) {
            roots.push((p, alpha, res));
        }
    }
    // the infinite points are outside the sweep; admit them directly
    for s in &grid.infinity {
        let v = gval(&s.alpha);
        if v < TOL_ZERO * scale {
            roots.push((s.point, s.alpha, v));
        }
    }
    roots.retain(|r| r.2 < 10.0 * TOL_ZERO * scale);
    roots.sort_by(|x, y| x.2.partial_cmp(&y.2).expect("finite"));
    if roots.is_empty() {
        return Err(Error::RootCountMismatch(0));
    }

    // The pullback section has degree two and its zeros sum to -d on the
    // Jacobian (the classical two-point intersection of translates).  Derive
    // the partner location of each found root from that relation, polish it
    // on the theta condition, and then select the pair of roots consistent
    // with the sum; this weeds out near-miss minima where the translated
    // divisor approaches the curve without crossing.
    let locate_partner = |alpha1: &Vector2<C64>| -> Option<(CurvePoint, Vector2<C64>, f64)> {
        let partner_target = pd.reduce(&(-d - alpha1));
        let (p, alpha) = locate_alpha(pd, &partner_target)?;
        match p {
            CurvePoint::Affine { x, y } => {
                let near_branch = pd
                    .curve
                    .branch_points()
                    .iter()
                    .any(|b| (x - b).norm() < 1e-4 * pd.curve.branch_scale());
                if near_branch || y.norm() < 1e-6 {
                    let res = gval(&alpha);
                    (res < TOL_ZERO * scale).then_some((p, alpha, res))
                } else {
                    let seed = GridSample { point: p, alpha };
                    polish_root(pd, &seed, &d)
                }
            }
            CurvePoint::Infinity { .. } => {
                let res = gval(&alpha);
                (res < TOL_ZERO * scale).then_some((p, alpha, res))
            }
        }
    };
    let mut candidates = roots.clone();
    for (_, alpha, _) in roots.iter().take(3) {
        if let Some(partner) = locate_partner(alpha) {
            candidates.push(partner);
        }
    }

    // cluster by curve-point distance
    let curve_scale = pd.curve.branch_scale();
    let mut clusters: Vec<(CurvePoint, Vector2<C64>, f64)> = Vec::new();
    for (p, alpha, res) in candidates {
        let mut merged = false;
        for c in clusters.iter_mut() {
            if curve_point_distance(&c.0, &p) < EPS_MERGE * curve_scale.max(1.0) * 10.0 {
                if res < c.2 {
                    *c = (p, alpha, res);
                }
                merged = true;
                break;
            }
        }
        if !merged {
            clusters.push((p, alpha, res));
        }
    }
    if clusters.is_empty() {
        return Err(Error::RootCountMismatch(0));
    }

    // best sum-consistent pair, allowing i = j for a double root
    let defect = |a1: &Vector2<C64>, a2: &Vector2<C64>| pd.reduce(&(a1 + a2 + d)).norm();
    let mut best_pair: Option<(f64, usize, usize)> = None;
    for i in 0..clusters.len() {
        for j in i..clusters.len() {
            let def = defect(&clusters[i].1, &clusters[j].1);
            if def > 1e-5 {
                continue;
            }
            let score = def + clusters[i].2 + clusters[j].2;
            if best_pair.map(|b| score < b.0).unwrap_or(true) {
                best_pair = Some((score, i, j));
            }
        }
    }
    let Some((_, i, j)) = best_pair else {
        return Err(Error::RootCountMismatch(clusters.len()));
    };
    let (p1, a1, _) = clusters[i];
    let (p2, a2, _) = clusters[j];
    if i == j || curve_point_distance(&p1, &p2) < EPS_MERGE * curve_scale.max(1.0) {
        // coincident pair: a genuine tangency carries a vanishing
        // curve-derivative of g
        if !double_root_certificate(pd, &p1, &a1, &d) {
            return Err(Error::RootCountMismatch(1));
        }
        let (p1, a1) = polish_double_root(pd, &p1, &a1, &d);
        let w = JacobianPoint::new(pd, a1 + a.rep());
        let v = pd.curve.canonical_map(&p1);
        return Ok(LengthTwoScheme::non_reduced(w, v));
    }
    // couple the two roots through the exact sum slice; near-tangent pairs
    // gain several digits this way
    let (a1, a2) = pair_polish(pd, &d, &a1, &a2).unwrap_or((a1, a2));
    let w1 = JacobianPoint::new(pd, a1 + a.rep());
    let w2 = JacobianPoint::new(pd, a2 + a.rep());
    Ok(LengthTwoScheme::reduced(w1, w2))
}

/// Joint Newton polish of a root pair on the affine slice
/// `α₁ + α₂ = const` (the lattice-snapped sum of the found roots), driving
/// both theta conditions to machine precision.  Falls back to the inputs
/// when the 2x2 Jacobian degenerates (exact tangency).
fn pair_polish(
    pd: &Arc<PeriodData>,
    d: &Vector2<C64>,
    alpha1: &Vector2<C64>,
    alpha2: &Vector2<C64>,
) -> Option<(Vector2<C64>, Vector2<C64>)> {
    // snap the sum to its exact lattice representative
    let raw_sum = alpha1 + alpha2 + d;
    let t = pd.lattice_coords(&raw_sum);
    let k = [
        t[0].round() as i64,
        t[1].round() as i64,
        t[2].round() as i64,
        t[3].round() as i64,
    ];
    if (pd.lattice_vector(&k) - raw_sum).norm() > 1e-3 {
        return None;
    }
    let m = pd.lattice_vector(&k) - d;
    let mut delta = alpha1 - alpha2;
    let arg = |delta: &Vector2<C64>, sign: f64| (m + delta * C64::new(sign, 0.0)) * C64::new(0.5, 0.0) + d;
    // freeze reduction shifts
    let shift1 = pd.reduce(&arg(&delta, 1.0)) - arg(&delta, 1.0);
    let shift2 = pd.reduce(&arg(&delta, -1.0)) - arg(&delta, -1.0);
    let j10 = JetRequest::new(1, 0).expect("order 1");
    let j01 = JetRequest::new(0, 1).expect("order 1");
    let scale = pd.theta_scale;
    for _ in 0..40 {
        let z1 = arg(&delta, 1.0) + shift1;
        let z2 = arg(&delta, -1.0) + shift2;
        let f1 = theta::theta(&pd.delta, &z1, &pd.omega, 1e-13).ok()?;
        let f2 = theta::theta(&pd.delta, &z2, &pd.omega, 1e-13).ok()?;
        if f1.norm() < 1e-13 * scale && f2.norm() < 1e-13 * scale {
            break;
        }
        let g1 = Vector2::new(
            theta::theta_jet(&pd.delta, &z1, &pd.omega, j10, 1e-13).ok()?,
            theta::theta_jet(&pd.delta, &z1, &pd.omega, j01, 1e-13).ok()?,
        );
        let g2 = Vector2::new(
            theta::theta_jet(&pd.delta, &z2, &pd.omega, j10, 1e-13).ok()?,
            theta::theta_jet(&pd.delta, &z2, &pd.omega, j01, 1e-13).ok()?,
        );
        // rows: dF_i/dδ = ±∇θ/2
        let jac = nalgebra::Matrix2::new(
            g1[0] * C64::new(0.5, 0.0),
            g1[1] * C64::new(0.5, 0.0),
            -g2[0] * C64::new(0.5, 0.0),
            -g2[1] * C64::new(0.5, 0.0),
        );
        let inv = jac.try_inverse()?;
        let step = inv * Vector2::new(-f1, -f2);
        if step.norm() > 0.2 {
            return None;
        }
        delta += step;
        if step.norm() < 1e-15 {
            break;
        }
    }
    let z1 = arg(&delta, 1.0) + shift1;
    let z2 = arg(&delta, -1.0) + shift2;
    let ok = pd.theta_delta(&z1).norm() < 1e-10 * scale
        && pd.theta_delta(&z2).norm() < 1e-10 * scale;
    if !ok {
        return None;
    }
    Some((
        pd.reduce(&(arg(&delta, 1.0) - d)),
        pd.reduce(&(arg(&delta, -1.0) - d)),
    ))
}

/// Newton refinement of a genuine double root: drives the curve derivative
/// of `g` to zero, which is quadratically convergent where plain root
/// finding is only square-root accurate.
fn polish_double_root(
    pd: &Arc<PeriodData>,
    p: &CurvePoint,
    alpha: &Vector2<C64>,
    d: &Vector2<C64>,
) -> (CurvePoint, Vector2<C64>) {
    let (mut x, mut y) = match *p {
        CurvePoint::Affine { x, y } => (x, y),
        CurvePoint::Infinity { .. } => return (*p, *alpha),
    };
    if y.norm() < 1e-6 * pd.curve.branch_scale().sqrt() {
        return (*p, *alpha);
    }
    let mut alpha = *alpha;
    let z0 = alpha + d;
    let shift = pd.reduce(&z0) - z0;
    let j10 = JetRequest::new(1, 0).expect("order 1");
    let j01 = JetRequest::new(0, 1).expect("order 1");
    let j20 = JetRequest::new(2, 0).expect("order 2");
    let j11 = JetRequest::new(1, 1).expect("order 2");
    let j02 = JetRequest::new(0, 2).expect("order 2");
    let curve = &pd.curve;
    for _ in 0..30 {
        let arg = alpha + d + shift;
        let g1 = match (
            theta::theta_jet(&pd.delta, &arg, &pd.omega, j10, 1e-13),
            theta::theta_jet(&pd.delta, &arg, &pd.omega, j01, 1e-13),
        ) {
            (Ok(a), Ok(b)) => Vector2::new(a, b),
            _ => break,
        };
        let dal = pd.curve_tangent_raw(x) / y;
        let h = g1[0] * dal[0] + g1[1] * dal[1];
        // h' = α'ᵀ Hθ α' + ∇θ · α''
        let (h20, h11, h02) = match (
            theta::theta_jet(&pd.delta, &arg, &pd.omega, j20, 1e-13),
            theta::theta_jet(&pd.delta, &arg, &pd.omega, j11, 1e-13),
            theta::theta_jet(&pd.delta, &arg, &pd.omega, j02, 1e-13),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => break,
        };
        let quad = h20 * dal[0] * dal[0]
            + h11 * dal[0] * dal[1] * C64::new(2.0, 0.0)
            + h02 * dal[1] * dal[1];
        // α'' = N d/dx[(1,x)/y]
        let yp = curve.f_prime(x) / (y * C64::new(2.0, 0.0));
        let inv_y = C64::new(1.0, 0.0) / y;
        let dal2_raw = Vector2::new(
            -yp * inv_y * inv_y,
            inv_y - x * yp * inv_y * inv_y,
        );
        let dal2 = pd.normalize_matrix() * dal2_raw;
        let hp = quad + g1[0] * dal2[0] + g1[1] * dal2[1];
        if hp.norm() == 0.0 {
            break;
        }
        let mut step = -h / hp;
        let room = curve
            .branch_points()
            .iter()
            .map(|b| (x - b).norm())
            .fold(f64::INFINITY, f64::min);
        let cap = (0.3 * room).max(1e-12);
        if step.norm() > cap {
            step *= C64::new(cap / step.norm(), 0.0);
        }
        match extend_alpha(pd, x, y, &alpha, x + step) {
            Some((alpha_new, y_new)) => {
                x += step;
                y = y_new;
                alpha = alpha_new;
            }
            None => break,
        }
        if step.norm() < 1e-14 {
            break;
        }
    }
    (CurvePoint::Affine { x, y }, pd.reduce(&alpha))
}

/// Find the curve point whose Abel-Jacobi image is `target` (assumed to lie
/// on the theta divisor): grid argmin plus Gauss-Newton on the α-residual.
/// Falls back to the local square-root chart near Weierstrass points.
pub(crate) fn locate_alpha(
    pd: &Arc<PeriodData>,
    target: &Vector2<C64>,
) -> Option<(CurvePoint, Vector2<C64>)> {
    let grid = curve_grid(pd);
    let dist = |alpha: &Vector2<C64>| pd.reduce(&(alpha - target)).norm();
    // infinite points match exactly or not at all
    for s in &grid.infinity {
        if dist(&s.alpha) < 1e-7 {
            return Some((s.point, s.alpha));
        }
    }
    let mut best: Option<(f64, &GridSample)> = None;
    for s in grid.sweep.iter().chain(grid.generic.iter()) {
        let v = dist(&s.alpha);
        if best.as_ref().map(|b| v < b.0).unwrap_or(true) {
            best = Some((v, s));
        }
    }
    let (_, seed) = best?;
    let (mut x, mut y) = match seed.point {
        CurvePoint::Affine { x, y } => (x, y),
        CurvePoint::Infinity { .. } => return None,
    };
    let mut alpha = seed.alpha;
    // freeze the lattice shift at the seed
    let z0 = alpha - target;
    let shift = pd.reduce(&z0) - z0;
    let curve = &pd.curve;
    for _ in 0..80 {
        let r = alpha - target + shift;
        if r.norm() < 1e-11 {
            break;
        }
        if y.norm() == 0.0 {
            return None;
        }
        // Gauss-Newton step for the complex least-squares α(x) = target
        let dal = pd.curve_tangent_raw(x) / y;
        let denom = dal[0].norm_sqr() + dal[1].norm_sqr();
        if denom == 0.0 {
            return None;
        }
        let mut step = -(dal[0].conj() * r[0] + dal[1].conj() * r[1]) / C64::new(denom, 0.0);
        let room = curve
            .branch_points()
            .iter()
            .map(|b| (x - b).norm())
            .fold(f64::INFINITY, f64::min);
        let cap = (0.35 * room).max(1e-12);
        if step.norm() > cap {
            step *= C64::new(cap / step.norm(), 0.0);
        }
        let x_new = x + step;
        let (alpha_new, y_new) = extend_alpha(pd, x, y, &alpha, x_new)?;
        x = x_new;
        y = y_new;
        alpha = alpha_new;
    }
    let r = (alpha - target + shift).norm();
    if r < 1e-7 {
        return Some((CurvePoint::Affine { x, y }, pd.reduce(&alpha)));
    }
    // near a Weierstrass point the x-chart stalls; snap to the branch point
    // and test it directly
    if let Some(b) = curve
        .branch_points()
        .iter()
        .find(|b| (x - *b).norm() < 1e-3 * curve.branch_scale())
    {
        let p = CurvePoint::Affine { x: *b, y: C64::new(0.0, 0.0) };
        if let Ok(ab) = pd.abel_jacobi(&p) {
            if dist(&ab) < 1e-6 {
                return Some((p, ab));
            }
        }
    }
    None
}

fn curve_point_distance(p: &CurvePoint, q: &CurvePoint) -> f64 {
    match (p, q) {
        (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => {
            // compare in the chart that stays finite
            let dx = (x1 - x2).norm();
            let dy = (y1 - y2).norm();
            (dx * dx + dy * dy).sqrt() / (1.0 + x1.norm() * x1.norm())
        }
        (CurvePoint::Infinity { branch: b1 }, CurvePoint::Infinity { branch: b2 })
            if b1 == b2 => {
                0.0
            }
        _ => 1.0,
    }
}

/// Newton polish of a sweep seed.  Returns the curve point, its α and the
/// final residual |g|.
fn polish_root(
    pd: &Arc<PeriodData>,
    seed: &GridSample,
    d: &Vector2<C64>,
) -> Option<(CurvePoint, Vector2<C64>, f64)> {
    let curve = &pd.curve;
    let (mut x, mut y) = match seed.point {
        CurvePoint::Affine { x, y } => (x, y),
        CurvePoint::Infinity { .. } => return None,
    };
    let mut alpha = seed.alpha;
    // freeze the lattice shift at the seed so the iterate is smooth
    let z0 = alpha + d;
    let shift = pd.reduce(&z0) - z0;
    let scale = pd.theta_scale;
    let j10 = JetRequest::new(1, 0).expect("order 1");
    let j01 = JetRequest::new(0, 1).expect("order 1");
    let mut res = f64::INFINITY;
    for _ in 0..60 {
        let arg = alpha + d + shift;
        let g = theta::theta(&pd.delta, &arg, &pd.omega, 1e-13).ok()?;
        res = g.norm();
        let g0 = theta::theta_jet(&pd.delta, &arg, &pd.omega, j10, 1e-13).ok()?;
        let g1 = theta::theta_jet(&pd.delta, &arg, &pd.omega, j01, 1e-13).ok()?;
        if res < 1e-11 * scale {
            break;
        }
        // dα/dx = A⁻¹ (1, x)ᵀ / y
        if y.norm() == 0.0 {
            return None;
        }
        let dal = pd.curve_tangent_raw(x) / y;
        let dg = g0 * dal[0] + g1 * dal[1];
        if dg.norm() == 0.0 {
            return None;
        }
        let mut step = -g / dg;
        // keep steps inside the tube where continuation is safe
        let room = curve
            .branch_points()
            .iter()
            .map(|b| (x - b).norm())
            .fold(f64::INFINITY, f64::min);
        let cap = (0.35 * room).max(1e-9);
        if step.norm() > cap {
            step *= C64::new(cap / step.norm(), 0.0);
        }
        let x_new = x + step;
        let (alpha_new, y_new) = extend_alpha(pd, x, y, &alpha, x_new)?;
        x = x_new;
        y = y_new;
        alpha = alpha_new;
    }
    if res > TOL_ZERO * scale {
        return None;
    }
    Some((CurvePoint::Affine { x, y }, pd.reduce(&alpha), res))
}

/// Continue α and y from (x, y) to x_new along the straight segment with a
/// small fixed-order quadrature.
fn extend_alpha(
    pd: &Arc<PeriodData>,
    x: C64,
    y: C64,
    alpha: &Vector2<C64>,
    x_new: C64,
) -> Option<(Vector2<C64>, C64)> {
    let curve = &pd.curve;
    // gauss-16 on [x, x_new] with continuation substeps
    const NODES: [(f64, f64); 8] = [
        (-0.9602898564975362, 0.10122853629037626),
        (-0.7966664774136267, 0.22238103445337448),
        (-0.525532409916329, 0.31370664587788727),
        (-0.18343464249564978, 0.3626837833783619),
        (0.18343464249564978, 0.3626837833783619),
        (0.525532409916329, 0.31370664587788727),
        (0.7966664774136267, 0.22238103445337448),
        (0.9602898564975362, 0.10122853629037626),
    ];
    let half = (x_new - x) * C64::new(0.5, 0.0);
    let mut acc = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut xc = x;
    let mut yc = y;
    for &(t, w) in NODES.iter() {
        let xi = x + half * C64::new(t + 1.0, 0.0);
        yc = continue_y_simple(curve, xc, yc, xi)?;
        xc = xi;
        let dxw = half * C64::new(w, 0.0);
        acc[0] += dxw / yc;
        acc[1] += dxw * xi / yc;
    }
    let y_end = continue_y_simple(curve, xc, yc, x_new)?;
    let delta = pd.normalize_integral(&acc);
    Some((alpha + delta, y_end))
}

fn continue_y_simple(
    curve: &crate::curve::CurveSpec,
    x_cur: C64,
    y_cur: C64,
    x_next: C64,
) -> Option<C64> {
    let dist = (x_next - x_cur).norm();
    if dist == 0.0 {
        return Some(y_cur);
    }
    let room = curve
        .branch_points()
        .iter()
        .map(|b| (x_cur - b).norm())
        .fold(f64::INFINITY, f64::min);
    if dist > 0.2 * room {
        let mid = x_cur + (x_next - x_cur) * C64::new(0.5, 0.0);
        let ym = continue_y_simple(curve, x_cur, y_cur, mid)?;
        return continue_y_simple(curve, mid, ym, x_next);
    }
    let y_plus = curve.f_eval(x_next).sqrt();
    let pred = if y_cur.norm() > 0.0 {
        y_cur + curve.f_prime(x_cur) / (y_cur * C64::new(2.0, 0.0)) * (x_next - x_cur)
    } else {
        y_plus
    };
    Some(if (y_plus - pred).norm() <= (y_plus + pred).norm() {
        y_plus
    } else {
        -y_plus
    })
}

/// Does `g` have a vanishing curve-derivative at the root (double root)?
fn double_root_certificate(
    pd: &Arc<PeriodData>,
    p: &CurvePoint,
    alpha: &Vector2<C64>,
    d: &Vector2<C64>,
) -> bool {
    let (x, y) = match *p {
        CurvePoint::Affine { x, y } => (x, y),
        CurvePoint::Infinity { .. } => return false,
    };
    let arg = pd.reduce(&(alpha + d));
    let j10 = JetRequest::new(1, 0).expect("order 1");
    let j01 = JetRequest::new(0, 1).expect("order 1");
    let g0 = match theta::theta_jet(&pd.delta, &arg, &pd.omega, j10, 1e-13) {
        Ok(v) => v,
        Err(_) => return false,
    };
    let g1 = match theta::theta_jet(&pd.delta, &arg, &pd.omega, j01, 1e-13) {
        Ok(v) => v,
        Err(_) => return false,
    };
    // derivative along the curve in the branch-free local parameter:
    // t = x away from Weierstrass points (factor 1/y), t² = x - e at them;
    // in both cases the relevant certificate is y·dg/dx -> (dg/dt)·(t-scale)
    let dal_dir = pd.curve_tangent_raw(x);
    let dg_scaled = g0 * dal_dir[0] + g1 * dal_dir[1]; // y · dg/dx
    let grad_scale = (g0.norm() + g1.norm()).max(1e-300);
    if y.norm() < 1e-6 * pd.curve.branch_scale().sqrt() {
        // Weierstrass location: the curve parameter is t with x = e + t²,
        // dg/dt = 2t·(y dg/dx)/y... certificate reduces to |y small| alone,
        // so require the scaled derivative small as well
        dg_scaled.norm() < 1e-3 * grad_scale
    } else {
        dg_scaled.norm() / y.norm() < 1e-4 * grad_scale
    }
}

// ---------------------------------------------------------------------------
// The involution on length-two schemes

/// The involution `τ` on length-two schemes: a reduced pair goes to
/// `Θ_a ∩ Θ_b`, a tangent scheme `(a, [x, ιx])` to
/// `{x + a - η, ι(x) + a - η}`.
pub fn tau(scheme: &LengthTwoScheme) -> Result<LengthTwoScheme> {
    match scheme {
        LengthTwoScheme::Reduced { a, b } => theta_intersection(a, b),
        LengthTwoScheme::NonReduced { a, v } => {
            let pd = a.periods();
            let curve = &pd.curve;
            let c = v.coords();
            if c[0].norm() < 1e-9 * c[1].norm() {
                // direction of the infinite point(s)
                if curve.degree() == 5 {
                    let w = abel_jacobi(pd, &CurvePoint::Infinity { branch: 0 })?.add(a)?;
                    Ok(LengthTwoScheme::non_reduced(w, v.clone()))
                } else {
                    let w1 =
                        abel_jacobi(pd, &CurvePoint::Infinity { branch: 0 })?.add(a)?;
                    let w2 =
                        abel_jacobi(pd, &CurvePoint::Infinity { branch: 1 })?.add(a)?;
                    Ok(LengthTwoScheme::reduced(w1, w2))
                }
            } else {
                let x = c[1] / c[0];
                let y = curve.f_eval(x).sqrt();
                if y.norm() < 1e-8 * curve.branch_scale().sqrt() {
                    // Weierstrass direction: the image stays nonreduced
                    let p = CurvePoint::Affine { x, y: C64::new(0.0, 0.0) };
                    let w = abel_jacobi(pd, &p)?.add(a)?;
                    Ok(LengthTwoScheme::non_reduced(w, v.clone()))
                } else {
                    let p = CurvePoint::Affine { x, y };
                    let q = CurvePoint::Affine { x, y: -y };
                    let w1 = abel_jacobi(pd, &p)?.add(a)?;
                    let w2 = abel_jacobi(pd, &q)?.add(a)?;
                    Ok(LengthTwoScheme::reduced(w1, w2))
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Length-three schemes (points of the Kummer fourfold)

/// A length-three scheme supported on at least two points, with support
/// summing to zero.
#[derive(Clone, Debug)]
pub enum KummerTriple {
    Reduced {
        a: JacobianPoint,
        b: JacobianPoint,
        c: JacobianPoint,
    },
    WithTangent {
        a: JacobianPoint,
        v: ProjPoint,
        c: JacobianPoint,
    },
}

impl KummerTriple {
    pub fn reduced(a: JacobianPoint, b: JacobianPoint, c: JacobianPoint) -> Result<Self> {
        let s = a.add(&b)?.add(&c)?;
        if !s.is_zero() {
            return Err(Error::SumNotZero(s.rep().norm()));
        }
        Ok(KummerTriple::Reduced { a, b, c })
    }

    /// `(a, v)` doubled at `a` plus the point `c = -2a`.
    pub fn with_tangent(a: JacobianPoint, v: ProjPoint, c: JacobianPoint) -> Result<Self> {
        let s = a.scale(2).add(&c)?;
        if !s.is_zero() {
            return Err(Error::SumNotZero(s.rep().norm()));
        }
        Ok(KummerTriple::WithTangent { a, v, c })
    }

    pub fn support(&self) -> Vec<&JacobianPoint> {
        match self {
            KummerTriple::Reduced { a, b, c } => vec![a, b, c],
            KummerTriple::WithTangent { a, c, .. } => vec![a, c],
        }
    }

    /// The three length-two subschemes (pairs of support points, with the
    /// tangent scheme first in the nonreduced case).
    pub fn length_two_subschemes(&self) -> Vec<LengthTwoScheme> {
        match self {
            KummerTriple::Reduced { a, b, c } => vec![
                LengthTwoScheme::reduced(a.clone(), b.clone()),
                LengthTwoScheme::reduced(a.clone(), c.clone()),
                LengthTwoScheme::reduced(b.clone(), c.clone()),
            ],
            KummerTriple::WithTangent { a, v, c } => vec![
                LengthTwoScheme::non_reduced(a.clone(), v.clone()),
                LengthTwoScheme::reduced(a.clone(), c.clone()),
            ],
        }
    }

    pub fn min_support_distance(&self) -> f64 {
        let s = self.support();
        let mut m = f64::INFINITY;
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                m = m.min(s[i].distance(s[j]));
            }
        }
        m
    }
}

impl PeriodData {
    /// `A⁻¹ (1, x)ᵀ`, the unnormalized Abel-Jacobi tangent frame.
    pub(crate) fn curve_tangent_raw(&self, x: C64) -> Vector2<C64> {
        self.curve_tangent_chart(C64::new(1.0, 0.0), x)
    }

    /// `A⁻¹ (v0, v1)ᵀ`: the tangent frame in homogeneous chart coordinates,
    /// so the infinite direction `[0 : 1]` is included.
    pub(crate) fn curve_tangent_chart(&self, v0: C64, v1: C64) -> Vector2<C64> {
        let norm = self
            .a_periods
            .try_inverse()
            .expect("A-periods invertible by construction");
        norm * Vector2::new(v0, v1)
    }

    /// Apply the A-period normalization to a raw (dx/y, x dx/y) integral.
    pub(crate) fn normalize_integral(&self, v: &Vector2<C64>) -> Vector2<C64> {
        self.normalize_matrix() * v
    }

    /// The normalization matrix `A⁻¹` applied to raw differentials.
    pub(crate) fn normalize_matrix(&self) -> nalgebra::Matrix2<C64> {
        self.a_periods
            .try_inverse()
            .expect("A-periods invertible by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::default_curve;
    use crate::periods::{compute_periods, DEFAULT_PRECISION};
    use crate::sampling::rng_for;
    use rand::Rng;
    use std::sync::OnceLock;

    pub(crate) fn shared_periods() -> Arc<PeriodData> {
        static PD: OnceLock<Arc<PeriodData>> = OnceLock::new();
        PD.get_or_init(|| compute_periods(&default_curve(), DEFAULT_PRECISION).unwrap())
            .clone()
    }

    fn random_point(pd: &Arc<PeriodData>, rng: &mut impl Rng) -> JacobianPoint {
        let t: [f64; 4] = [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ];
        let z = Vector2::new(C64::new(t[0], 0.0), C64::new(t[1], 0.0))
            + pd.omega_col(0) * C64::new(t[2], 0.0)
            + pd.omega_col(1) * C64::new(t[3], 0.0);
        JacobianPoint::new(pd, z)
    }

    #[test]
    fn group_law_basics() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "group-law");
        let zero = JacobianPoint::zero(&pd);
        for _ in 0..50 {
            let p = random_point(&pd, &mut rng);
            let q = random_point(&pd, &mut rng);
            let r = random_point(&pd, &mut rng);
            assert!(p.add(&zero).unwrap().is_equal(&p).unwrap());
            assert!(p.add(&p.neg()).unwrap().is_zero());
            let lhs = p.add(&q).unwrap().add(&r).unwrap();
            let rhs = p.add(&q.add(&r).unwrap()).unwrap();
            assert!(lhs.distance(&rhs) < 1e-10);
        }
    }

    #[test]
    fn torsion_counts_and_orders() {
        let pd = shared_periods();
        for n in [2u32, 3] {
            let pts = torsion_points(&pd, n);
            assert_eq!(pts.len(), (n * n * n * n) as usize);
            for p in &pts {
                assert!(p.scale(n as i64).is_zero());
            }
            // pairwise distinct
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    assert!(pts[i].distance(&pts[j]) > 1e-4);
                }
            }
        }
    }

    #[test]
    fn on_theta_symmetry_and_reflexivity() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "on-theta");
        for _ in 0..20 {
            let a = random_point(&pd, &mut rng);
            assert!(on_theta(&a, &a), "a ∈ Θ_a");
        }
        for _ in 0..50 {
            let a = random_point(&pd, &mut rng);
            let b = random_point(&pd, &mut rng);
            assert_eq!(on_theta(&a, &b), on_theta(&b, &a));
        }
        // w = α(x) + a lies on Θ_a
        let grid = curve_grid(&pd);
        let mut rng = rng_for(42, "on-theta-curve");
        for _ in 0..20 {
            let a = random_point(&pd, &mut rng);
            let k = rng.random_range(0..grid.generic.len());
            let w = JacobianPoint::new(&pd, grid.generic[k].alpha + a.rep());
            assert!(on_theta(&a, &w));
        }
    }

    #[test]
    fn intersection_points_lie_on_both_translates() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "intersection");
        let mut reduced_seen = 0;
        for _ in 0..12 {
            let a = random_point(&pd, &mut rng);
            let b = random_point(&pd, &mut rng);
            let scheme = theta_intersection(&a, &b).unwrap();
            for w in scheme.support() {
                assert!(
                    theta_residual(&a, w) < 1e-7 * pd.theta_scale * 10.0,
                    "res_a {:e}",
                    theta_residual(&a, w)
                );
                assert!(theta_residual(&b, w) < 1e-7 * pd.theta_scale * 10.0);
            }
            if scheme.is_reduced() {
                reduced_seen += 1;
            }
        }
        assert!(reduced_seen >= 10, "random pairs give reduced intersections");
    }

    #[test]
    fn intersection_is_symmetric_and_rejects_coincident() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "intersection-sym");
        for _ in 0..5 {
            let a = random_point(&pd, &mut rng);
            let b = random_point(&pd, &mut rng);
            let s1 = theta_intersection(&a, &b).unwrap();
            let s2 = theta_intersection(&b, &a).unwrap();
            assert!(s1.distance(&s2) < 1e-6, "symmetry {:e}", s1.distance(&s2));
        }
        let a = random_point(&pd, &mut rng);
        assert!(matches!(
            theta_intersection(&a, &a),
            Err(Error::CoincidentDivisors)
        ));
    }

    #[test]
    fn tangency_produces_nonreduced_intersection() {
        let pd = shared_periods();
        let grid = curve_grid(&pd);
        let mut rng = rng_for(42, "tangency");
        for _ in 0..5 {
            let a = random_point(&pd, &mut rng);
            let k = rng.random_range(0..grid.generic.len());
            let x0 = &grid.generic[k];
            // b = a + 2·α(x0): the divisors meet tangentially at α(x0) + a
            let b = JacobianPoint::new(&pd, x0.alpha * C64::new(2.0, 0.0) + a.rep());
            let scheme = theta_intersection(&a, &b).unwrap();
            match scheme {
                LengthTwoScheme::NonReduced { a: w, v } => {
                    let expect = JacobianPoint::new(&pd, x0.alpha + a.rep());
                    assert!(w.distance(&expect) < 1e-5, "w off by {:e}", w.distance(&expect));
                    let vx = pd.curve.canonical_map(&x0.point);
                    assert!(v.fs_distance(&vx) < 1e-4);
                }
                LengthTwoScheme::Reduced { a: w1, b: w2 } => {
                    panic!(
                        "expected tangency, got reduced pair {:e} apart",
                        w1.distance(&w2)
                    );
                }
            }
        }
    }

    #[test]
    fn tau_is_an_involution_on_reduced_schemes() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "tau-squared");
        for _ in 0..8 {
            let a = random_point(&pd, &mut rng);
            let b = random_point(&pd, &mut rng);
            let zeta = LengthTwoScheme::reduced(a, b);
            let image = tau(&zeta).unwrap();
            let back = tau(&image).unwrap();
            assert!(back.distance(&zeta) < 1e-6, "tau² off {:e}", back.distance(&zeta));
        }
    }

    #[test]
    fn tau_is_an_involution_on_nonreduced_schemes() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "tau-squared-nr");
        for _ in 0..6 {
            let a = random_point(&pd, &mut rng);
            let x = C64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let v = ProjPoint::from_slice(&[C64::new(1.0, 0.0), x]);
            let zeta = LengthTwoScheme::non_reduced(a, v);
            let image = tau(&zeta).unwrap();
            assert!(image.is_reduced());
            let back = tau(&image).unwrap();
            assert!(back.distance(&zeta) < 1e-5, "tau² off {:e}", back.distance(&zeta));
        }
    }

    #[test]
    fn tau_preserves_the_sum() {
        let pd = shared_periods();
        let mut rng = rng_for(42, "tau-sum");
        for _ in 0..8 {
            let a = random_point(&pd, &mut rng);
            let b = random_point(&pd, &mut rng);
            let zeta = LengthTwoScheme::reduced(a, b);
            let image = tau(&zeta).unwrap();
            let s1 = zeta.sum().unwrap();
            let s2 = image.sum().unwrap();
            assert!(s1.distance(&s2) < 1e-6, "sum moved {:e}", s1.distance(&s2));
        }
    }

    #[test]
    fn tau_symmetry_lemma() {
        // c ∈ τ(ζ) iff ζ ⊆ Θ_c
        let pd = shared_periods();
        let mut rng = rng_for(42, "tau-symmetry");
        for _ in 0..6 {
            let a = random_point(&pd, &mut rng);
            let b = random_point(&pd, &mut rng);
            let zeta = LengthTwoScheme::reduced(a, b);
            let image = tau(&zeta).unwrap();
            for c in image.support() {
                assert!(zeta.contained_in_theta(c));
            }
        }
    }

    #[test]
    fn tau_sends_exceptional_to_theta_contained() {
        // nonreduced ζ = (a, v): both points of τ(ζ) lie on Θ_a
        let pd = shared_periods();
        let mut rng = rng_for(42, "tau-E-to-F");
        for _ in 0..6 {
            let a = random_point(&pd, &mut rng);
            let x = C64::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
            let v = ProjPoint::from_slice(&[C64::new(1.0, 0.0), x]);
            let zeta = LengthTwoScheme::non_reduced(a.clone(), v);
            let image = tau(&zeta).unwrap();
            for w in image.support() {
                assert!(on_theta(&a, w), "τ(E) lands in translates through a");
            }
        }
    }
}
