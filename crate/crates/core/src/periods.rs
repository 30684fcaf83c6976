//! Periods of the genus-2 curve: symplectic homology basis, Riemann matrix,
//! Abel-Jacobi map, and the odd characteristic cutting out the theta divisor.
//!
//! All integrals are Gauss-Legendre along piecewise-straight paths from a
//! common base point, with `y` continued analytically by nearest-root
//! tracking and square-root substitutions at branch-point endpoints.  Cycle
//! periods come from the classical dumbbell construction: the period of the
//! loop around a pair of branch points is twice the line integral between
//! them.  Spokes are ordered by angle at the base point so consecutive
//! dumbbells form a chain basis of `H_1`; the chain orientation signs are
//! resolved by searching the eight sign choices for the one whose Riemann
//! matrix is symmetric with positive-definite imaginary part.

use crate::curve::{CurvePoint, CurveSpec};
use crate::theta::{self, ThetaChar, THETA_TOL};
use crate::{Error, Result, C64};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex, OnceLock};

/// Default refinement target for period integrals.  Chosen above the
/// roundoff floor of long continuation paths on awkward branch geometries
/// and far below every downstream tolerance.
pub const DEFAULT_PRECISION: f64 = 1e-10;

/// Periods, normalization and theta-divisor data of a curve's Jacobian.
#[derive(Debug)]
pub struct PeriodData {
    pub curve: CurveSpec,
    /// Normalized Riemann matrix, symmetric with Im positive definite.
    pub omega: Matrix2<C64>,
    /// Unnormalized A- and B-cycle integrals of (dx/y, x dx/y).
    pub a_periods: Matrix2<C64>,
    pub b_periods: Matrix2<C64>,
    /// The odd half characteristic with `Θ = {θ[δ] = 0}` for this basis.
    pub delta: ThetaChar,
    pub precision_target: f64,
    pub quadrature_order: usize,
    pub refinements: u32,
    /// Median `|θ[δ]|` over a fixed sample of reduced points.
    pub theta_scale: f64,
    base_point: C64,
    /// `∫_{x_b}^{e_i} (dx/y, x dx/y)` per sorted finite branch point,
    /// y continued from the principal root at the base point.
    u_branch: Vec<Vector2<C64>>,
    u_infinity: Vector2<C64>,
    /// Which infinite branch the base continuation lands on (degree 6).
    inf_branch: u8,
    u_eta: Vector2<C64>,
    /// A⁻¹, the normalization applied to raw integrals.
    norm: Matrix2<C64>,
    /// Inverse of the real 4x4 lattice matrix [Re|Im of (I, Ω)].
    lattice_inv: Matrix4<f64>,
    id: u64,
    pub(crate) grid: OnceLock<crate::jacobian::CurveGrid>,
}

impl PeriodData {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn base_point(&self) -> C64 {
        self.base_point
    }

    /// Columns of Ω as complex 2-vectors.
    pub fn omega_col(&self, j: usize) -> Vector2<C64> {
        Vector2::new(self.omega[(0, j)], self.omega[(1, j)])
    }

    /// Real lattice coordinates `(k1, k2, m1, m2)` with
    /// `z = k1 e1 + k2 e2 + m1 Ω_1 + m2 Ω_2`.
    pub fn lattice_coords(&self, z: &Vector2<C64>) -> Vector4<f64> {
        self.lattice_inv * Vector4::new(z[0].re, z[1].re, z[0].im, z[1].im)
    }

    /// The lattice vector with integer coordinates `k`.
    pub fn lattice_vector(&self, k: &[i64; 4]) -> Vector2<C64> {
        let mut v = Vector2::new(
            C64::new(k[0] as f64, 0.0),
            C64::new(k[1] as f64, 0.0),
        );
        v += self.omega_col(0) * C64::new(k[2] as f64, 0.0);
        v += self.omega_col(1) * C64::new(k[3] as f64, 0.0);
        v
    }

    /// Reduce `z` modulo the lattice: all four real coordinates into
    /// [-1/2, 1/2).
    pub fn reduce(&self, z: &Vector2<C64>) -> Vector2<C64> {
        let mut out = *z;
        // one rounding pass is exact inside the covering cell; iterate once
        // more in case of boundary rounding
        for _ in 0..2 {
            let t = self.lattice_coords(&out);
            let k = [
                t[0].round() as i64,
                t[1].round() as i64,
                t[2].round() as i64,
                t[3].round() as i64,
            ];
            if k == [0, 0, 0, 0] {
                break;
            }
            out -= self.lattice_vector(&k);
        }
        out
    }

    /// `θ[δ](z, Ω)` at the default tolerance.
    pub fn theta_delta(&self, z: &Vector2<C64>) -> C64 {
        theta::theta(&self.delta, z, &self.omega, THETA_TOL).expect("radius fits")
    }

    /// The half period `Ω δ_1 + δ_2` of the odd characteristic.
    pub fn z_delta(&self) -> Vector2<C64> {
        let a = self.delta.a_f64();
        let b = self.delta.b_f64();
        self.omega_col(0) * C64::new(a[0], 0.0)
            + self.omega_col(1) * C64::new(a[1], 0.0)
            + Vector2::new(C64::new(b[0], 0.0), C64::new(b[1], 0.0))
    }

    /// Raw (unreduced) Abel-Jacobi integral from the marked Weierstrass point
    /// to `p`, in normalized coordinates.
    pub fn abel_jacobi_unreduced(&self, p: &CurvePoint) -> Result<Vector2<C64>> {
        let integ = self.integrator(self.quadrature_order);
        let raw = match *p {
            CurvePoint::Affine { x, y } => {
                let (u, y_end) = integ.integrate_to(x)?;
                if y.norm() < 1e-9 * self.curve.branch_scale().sqrt() {
                    // Weierstrass targets: either track gives the same class
                    u
                } else if (y_end - y).norm() <= (y_end + y).norm() {
                    u
                } else {
                    // other sheet: route through the first branch point
                    self.u_branch[0] * C64::new(2.0, 0.0) - u
                }
            }
            CurvePoint::Infinity { branch } => {
                if self.curve.degree() == 5 || branch == self.inf_branch {
                    self.u_infinity
                } else {
                    self.u_branch[0] * C64::new(2.0, 0.0) - self.u_infinity
                }
            }
        };
        Ok(self.norm * (raw - self.u_eta))
    }

    /// Abel-Jacobi map `α(p) = ∫_η^p`, reduced modulo the lattice.
    pub fn abel_jacobi(&self, p: &CurvePoint) -> Result<Vector2<C64>> {
        Ok(self.reduce(&self.abel_jacobi_unreduced(p)?))
    }

    pub(crate) fn integrator(&self, order: usize) -> PathIntegrator<'_> {
        PathIntegrator::new(&self.curve, self.base_point, order)
    }

    /// Tangent direction of the Abel-Jacobi image at a curve point: the
    /// normalized-coordinate vector proportional to `A⁻¹ (1, x)ᵀ`.
    /// For infinite points the limit direction is `A⁻¹ (0, 1)ᵀ`.
    pub fn curve_tangent(&self, p: &CurvePoint) -> Vector2<C64> {
        let v = match *p {
            CurvePoint::Affine { x, .. } => Vector2::new(C64::new(1.0, 0.0), x),
            CurvePoint::Infinity { .. } => {
                Vector2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
            }
        };
        let t = self.norm * v;
        t / C64::new(t.norm(), 0.0)
    }
}

#[derive(Serialize, Deserialize)]
struct PeriodJson {
    curve: serde_json::Value,
    omega: Vec<[f64; 2]>,
    a_periods: Vec<[f64; 2]>,
    b_periods: Vec<[f64; 2]>,
    delta_a: [u8; 2],
    delta_b: [u8; 2],
    precision_target: f64,
    quadrature_order: usize,
    refinements: u32,
    theta_scale: f64,
    base_point: [f64; 2],
    u_branch: Vec<Vec<[f64; 2]>>,
    u_infinity: Vec<[f64; 2]>,
    inf_branch: u8,
    u_eta: Vec<[f64; 2]>,
}

fn mat_to_pairs(m: &Matrix2<C64>) -> Vec<[f64; 2]> {
    // row major
    vec![
        [m[(0, 0)].re, m[(0, 0)].im],
        [m[(0, 1)].re, m[(0, 1)].im],
        [m[(1, 0)].re, m[(1, 0)].im],
        [m[(1, 1)].re, m[(1, 1)].im],
    ]
}

fn pairs_to_mat(p: &[[f64; 2]]) -> Matrix2<C64> {
    Matrix2::new(
        C64::new(p[0][0], p[0][1]),
        C64::new(p[1][0], p[1][1]),
        C64::new(p[2][0], p[2][1]),
        C64::new(p[3][0], p[3][1]),
    )
}

fn vec2_to_pairs(v: &Vector2<C64>) -> Vec<[f64; 2]> {
    vec![[v[0].re, v[0].im], [v[1].re, v[1].im]]
}

fn pairs_to_vec2(p: &[[f64; 2]]) -> Vector2<C64> {
    Vector2::new(C64::new(p[0][0], p[0][1]), C64::new(p[1][0], p[1][1]))
}

impl PeriodData {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PeriodJson {
            curve: self.curve.to_json(),
            omega: mat_to_pairs(&self.omega),
            a_periods: mat_to_pairs(&self.a_periods),
            b_periods: mat_to_pairs(&self.b_periods),
            delta_a: self.delta.a,
            delta_b: self.delta.b,
            precision_target: self.precision_target,
            quadrature_order: self.quadrature_order,
            refinements: self.refinements,
            theta_scale: self.theta_scale,
            base_point: [self.base_point.re, self.base_point.im],
            u_branch: self.u_branch.iter().map(vec2_to_pairs).collect(),
            u_infinity: vec2_to_pairs(&self.u_infinity),
            inf_branch: self.inf_branch,
            u_eta: vec2_to_pairs(&self.u_eta),
        })
        .expect("period data serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Arc<PeriodData>> {
        let j: PeriodJson = serde_json::from_value(v.clone())?;
        let curve = CurveSpec::from_json(&j.curve)?;
        let a_periods = pairs_to_mat(&j.a_periods);
        let omega = pairs_to_mat(&j.omega);
        let pd = PeriodData {
            id: period_id(&curve, j.precision_target),
            lattice_inv: lattice_inverse(&omega)?,
            norm: a_periods
                .try_inverse()
                .ok_or(Error::IllConditionedPeriods(f64::INFINITY))?,
            curve,
            omega,
            a_periods,
            b_periods: pairs_to_mat(&j.b_periods),
            delta: ThetaChar { a: j.delta_a, b: j.delta_b },
            precision_target: j.precision_target,
            quadrature_order: j.quadrature_order,
            refinements: j.refinements,
            theta_scale: j.theta_scale,
            base_point: C64::new(j.base_point[0], j.base_point[1]),
            u_branch: j.u_branch.iter().map(|p| pairs_to_vec2(p)).collect(),
            u_infinity: pairs_to_vec2(&j.u_infinity),
            inf_branch: j.inf_branch,
            u_eta: pairs_to_vec2(&j.u_eta),
            grid: OnceLock::new(),
        };
        Ok(Arc::new(pd))
    }
}

fn period_id(curve: &CurveSpec, precision: f64) -> u64 {
    curve
        .content_hash()
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(precision.to_bits())
}

fn lattice_inverse(omega: &Matrix2<C64>) -> Result<Matrix4<f64>> {
    let l = Matrix4::new(
        1.0, 0.0, omega[(0, 0)].re, omega[(0, 1)].re,
        0.0, 1.0, omega[(1, 0)].re, omega[(1, 1)].re,
        0.0, 0.0, omega[(0, 0)].im, omega[(0, 1)].im,
        0.0, 0.0, omega[(1, 0)].im, omega[(1, 1)].im,
    );
    l.try_inverse()
        .ok_or(Error::IllConditionedPeriods(f64::INFINITY))
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes

fn gauss_legendre(n: usize) -> Arc<Vec<(f64, f64)>> {
    type NodeCache = Mutex<std::collections::HashMap<usize, Arc<Vec<(f64, f64)>>>>;
    static CACHE: OnceLock<NodeCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(std::collections::HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache");
    map.entry(n)
        .or_insert_with(|| {
            let mut nodes = Vec::with_capacity(n);
            for k in 0..n {
                let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
                for _ in 0..100 {
                    let (p, dp) = legendre_with_derivative(n, x);
                    let dx = p / dp;
                    x -= dx;
                    if dx.abs() < 1e-15 {
                        break;
                    }
                }
                let (_, dp) = legendre_with_derivative(n, x);
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                nodes.push((x, w));
            }
            nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
            Arc::new(nodes)
        })
        .clone()
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

// ---------------------------------------------------------------------------
// Path integration with analytic continuation of y

pub(crate) struct PathIntegrator<'c> {
    curve: &'c CurveSpec,
    base_point: C64,
    y_base: C64,
    clearance: f64,
    order: usize,
}

struct Leg {
    from: C64,
    to: C64,
    /// endpoint coincides with a branch point: apply the square-root
    /// substitution there
    sing_from: bool,
    sing_to: bool,
}

impl<'c> PathIntegrator<'c> {
    pub(crate) fn new(curve: &'c CurveSpec, base_point: C64, order: usize) -> Self {
        let bps = curve.branch_points();
        let mut min_pair = f64::INFINITY;
        for i in 0..bps.len() {
            for j in (i + 1)..bps.len() {
                min_pair = min_pair.min((bps[i] - bps[j]).norm());
            }
        }
        PathIntegrator {
            curve,
            base_point,
            y_base: curve.f_eval(base_point).sqrt(),
            clearance: 0.1 * min_pair,
            order,
        }
    }

    fn nearest_branch_distance(&self, x: C64) -> f64 {
        self.curve
            .branch_points()
            .iter()
            .map(|b| (x - b).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Continue y from (x_cur, y_cur) to x_next along the straight segment,
    /// splitting adaptively so the sheet never becomes ambiguous.
    fn continue_y(&self, x_cur: C64, y_cur: C64, x_next: C64) -> C64 {
        let dist = (x_next - x_cur).norm();
        if dist == 0.0 {
            return y_cur;
        }
        let allowed = 0.2 * self.nearest_branch_distance(x_cur).max(1e-300);
        if dist > allowed {
            let mid = x_cur + (x_next - x_cur) * C64::new(0.5, 0.0);
            let y_mid = self.continue_y(x_cur, y_cur, mid);
            return self.continue_y(mid, y_mid, x_next);
        }
        let y_plus = self.curve.f_eval(x_next).sqrt();
        // first-order prediction resolves the sign robustly
        let pred = if y_cur.norm() > 0.0 {
            y_cur + self.curve.f_prime(x_cur) / (y_cur * C64::new(2.0, 0.0)) * (x_next - x_cur)
        } else {
            y_plus
        };
        if (y_plus - pred).norm() <= (y_plus + pred).norm() {
            y_plus
        } else {
            -y_plus
        }
    }

    /// Straight-line waypoints from `from` to `to` detouring around branch
    /// points.  Endpoints themselves may be branch points.
    fn plan(&self, from: C64, to: C64) -> Result<Vec<C64>> {
        fn refine(
            curve: &CurveSpec,
            clearance: f64,
            from: C64,
            to: C64,
            depth: usize,
            out: &mut Vec<C64>,
        ) -> Result<()> {
            let dir = to - from;
            let len = dir.norm();
            let mut worst: Option<(f64, C64, f64)> = None; // (dist, bp, t)
            for b in curve.branch_points() {
                let t = if len == 0.0 {
                    0.0
                } else {
                    (((b - from) * dir.conj()).re / (len * len)).clamp(0.0, 1.0)
                };
                // ignore approaches at the very endpoints (legitimate targets)
                if !(1e-9..=1.0 - 1e-9).contains(&t) {
                    continue;
                }
                let foot = from + dir * C64::new(t, 0.0);
                let d = (foot - b).norm();
                if d < clearance && worst.map(|w| d < w.0).unwrap_or(true) {
                    worst = Some((d, *b, t));
                }
            }
            match worst {
                None => {
                    out.push(to);
                    Ok(())
                }
                Some((_, b, t)) => {
                    if depth == 0 {
                        return Err(Error::PathThroughBranchPoint(clearance));
                    }
                    let foot = from + dir * C64::new(t, 0.0);
                    let away = foot - b;
                    let offset = if away.norm() < 1e-12 * len.max(1.0) {
                        // segment passes through the point: step off sideways
                        let n = dir / C64::new(len, 0.0) * C64::new(0.0, 1.0);
                        n * C64::new(2.0 * clearance, 0.0)
                    } else {
                        away / C64::new(away.norm(), 0.0) * C64::new(2.0 * clearance, 0.0)
                    };
                    let w = b + offset;
                    refine(curve, clearance, from, w, depth - 1, out)?;
                    refine(curve, clearance, w, to, depth - 1, out)
                }
            }
        }
        let mut out = vec![from];
        refine(self.curve, self.clearance, from, to, 8, &mut out)?;
        Ok(out)
    }

    fn is_branch_point(&self, x: C64) -> bool {
        self.nearest_branch_distance(x) < 1e-12 * self.curve.branch_scale()
    }

    fn legs_for(&self, waypoints: &[C64]) -> Vec<Leg> {
        let mut legs = Vec::new();
        for w in waypoints.windows(2) {
            let sing_from = self.is_branch_point(w[0]);
            let sing_to = self.is_branch_point(w[1]);
            if sing_from || sing_to {
                legs.push(Leg { from: w[0], to: w[1], sing_from, sing_to });
                continue;
            }
            // keep each plain piece short against its branch clearance, so
            // Gauss converges at the same rate regardless of leg length
            let len = (w[1] - w[0]).norm();
            let mut rho = f64::INFINITY;
            for e in self.curve.branch_points() {
                let t = if len == 0.0 {
                    0.0
                } else {
                    (((e - w[0]) * (w[1] - w[0]).conj()).re / (len * len)).clamp(0.0, 1.0)
                };
                rho = rho.min((w[0] + (w[1] - w[0]) * C64::new(t, 0.0) - e).norm());
            }
            let pieces = ((len / (1.5 * rho.max(1e-12))).ceil() as usize).clamp(1, 64);
            for k in 0..pieces {
                let a = w[0] + (w[1] - w[0]) * C64::new(k as f64 / pieces as f64, 0.0);
                let b = w[0] + (w[1] - w[0]) * C64::new((k + 1) as f64 / pieces as f64, 0.0);
                legs.push(Leg { from: a, to: b, sing_from: false, sing_to: false });
            }
        }
        legs
    }

    /// Gauss nodes (x, dx-weight) of one leg in traversal order.
    fn leg_nodes(&self, leg: &Leg) -> Vec<(C64, C64)> {
        let nodes = gauss_legendre(self.order);
        let mut out = Vec::with_capacity(nodes.len());
        match (leg.sing_from, leg.sing_to) {
            (false, false) => {
                let half = (leg.to - leg.from) * C64::new(0.5, 0.0);
                for &(t, w) in nodes.iter() {
                    let x = leg.from + half * C64::new(t + 1.0, 0.0);
                    out.push((x, half * C64::new(w, 0.0)));
                }
            }
            (false, true) => {
                // x(u) = e + (s - e) u², u from 1 to 0 as t runs over [-1,1]
                let e = leg.to;
                let s = leg.from;
                for &(t, w) in nodes.iter() {
                    let u = (1.0 - t) / 2.0;
                    let x = e + (s - e) * C64::new(u * u, 0.0);
                    // dx = (s-e)·2u du, du = -dt/2  =>  dx/dt = -(s-e)·u
                    out.push((x, (e - s) * C64::new(u * w, 0.0)));
                }
            }
            (true, false) => {
                let e = leg.from;
                let s = leg.to;
                for &(t, w) in nodes.iter() {
                    let u = (t + 1.0) / 2.0;
                    let x = e + (s - e) * C64::new(u * u, 0.0);
                    out.push((x, (s - e) * C64::new(u * w, 0.0)));
                }
            }
            (true, true) => {
                // both endpoints singular: x = m + h sin(pi t / 2)
                let m = (leg.from + leg.to) * C64::new(0.5, 0.0);
                let h = (leg.to - leg.from) * C64::new(0.5, 0.0);
                let q = std::f64::consts::FRAC_PI_2;
                for &(t, w) in nodes.iter() {
                    let x = m + h * C64::new((q * t).sin(), 0.0);
                    out.push((x, h * C64::new(q * (q * t).cos() * w, 0.0)));
                }
            }
        }
        out
    }

    /// Integrate (dx/y, x dx/y) along the planned path from the base point
    /// to `target`; returns the integral and the continued y at the target.
    pub(crate) fn integrate_to(&self, target: C64) -> Result<(Vector2<C64>, C64)> {
        let waypoints = self.plan(self.base_point, target)?;
        self.integrate_waypoints(&waypoints)
    }

    fn integrate_waypoints(&self, waypoints: &[C64]) -> Result<(Vector2<C64>, C64)> {
        let legs = self.legs_for(waypoints);
        let mut acc = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut x_cur = self.base_point;
        let mut y_cur = self.y_base;
        let mut fresh = false; // set right after crossing a branch point
        for leg in &legs {
            for (x, dxw) in self.leg_nodes(leg) {
                if fresh {
                    y_cur = self.curve.f_eval(x).sqrt();
                    x_cur = x;
                    fresh = false;
                } else {
                    y_cur = self.continue_y(x_cur, y_cur, x);
                    x_cur = x;
                }
                let inv_y = C64::new(1.0, 0.0) / y_cur;
                acc[0] += dxw * inv_y;
                acc[1] += dxw * x * inv_y;
            }
            if leg.sing_to {
                // y -> 0 at the branch endpoint; restart tracking afterwards
                fresh = true;
                x_cur = leg.to;
                y_cur = C64::new(0.0, 0.0);
            } else {
                y_cur = self.continue_y(x_cur, y_cur, leg.to);
                x_cur = leg.to;
            }
        }
        Ok((acc, y_cur))
    }

    /// Period of the closed loop around a circle that isolates exactly two
    /// branch points: the lift closes up (even monodromy), so the integral
    /// is an honest lattice vector.  Returns `None` when no isolating circle
    /// exists for this pair or the winding check fails.
    pub(crate) fn circle_period(&self, i: usize, j: usize) -> Option<Vector2<C64>> {
        let bps = self.curve.branch_points();
        let m = (bps[i] + bps[j]) * C64::new(0.5, 0.0);
        let half = 0.5 * (bps[i] - bps[j]).norm();
        let nearest_other = bps
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, b)| (b - m).norm())
            .fold(f64::INFINITY, f64::min);
        if nearest_other < half * 1.2 + 1e-12 {
            return None;
        }
        let r = (half * 1.1).max(0.5 * (half + nearest_other.min(2.0 * half)));
        if r >= nearest_other * 0.9 {
            return None;
        }
        let nodes = gauss_legendre(self.order);
        let start = m + C64::new(r, 0.0);
        let mut y_cur = self.curve.f_eval(start).sqrt();
        let y_start = y_cur;
        let mut x_cur = start;
        let mut acc = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        // quarter arcs keep each Gauss map well conditioned
        for quarter in 0..4 {
            let t0 = std::f64::consts::FRAC_PI_2 * quarter as f64;
            let h = std::f64::consts::FRAC_PI_4;
            for &(t, w) in nodes.iter() {
                let phi = t0 + h * (t + 1.0);
                let x = m + C64::new(r * phi.cos(), r * phi.sin());
                let dx = C64::new(-r * phi.sin(), r * phi.cos()) * C64::new(h * w, 0.0);
                y_cur = self.continue_y(x_cur, y_cur, x);
                x_cur = x;
                acc[0] += dx / y_cur;
                acc[1] += dx * x / y_cur;
            }
        }
        y_cur = self.continue_y(x_cur, y_cur, start);
        if (y_cur - y_start).norm() > 1e-6 * y_start.norm() {
            return None;
        }
        Some(acc)
    }

    /// Integral along a ray to infinity: base -> far point -> ∞ on the ray
    /// through the origin.  Returns the integral and the infinite branch
    /// reached (sign of `y / x^3` against the principal leading root for
    /// degree 6; always 0 for degree 5).
    pub(crate) fn integrate_to_infinity(&self) -> Result<(Vector2<C64>, u8)> {
        // pick the ray direction with the biggest branch-point clearance
        let mut best = (f64::MIN, C64::new(1.0, 0.0));
        for k in 0..32 {
            let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / 32.0;
            let dir = C64::new(phi.cos(), phi.sin());
            let clear = self
                .curve
                .branch_points()
                .iter()
                .map(|b| {
                    let rel = b - self.base_point;
                    let t = (rel * dir.conj()).re.max(0.0);
                    (rel - dir * C64::new(t, 0.0)).norm()
                })
                .fold(f64::INFINITY, f64::min);
            if clear > best.0 {
                best = (clear, dir);
            }
        }
        let (u, branch) = self.integrate_to_infinity_full(best.1)?;
        Ok((u, branch))
    }

    fn integrate_to_infinity_full(&self, dir: C64) -> Result<(Vector2<C64>, u8)> {
        let scale = self.curve.branch_scale();
        let far = self.base_point + dir * C64::new(40.0 * scale, 0.0);
        let waypoints = self.plan(self.base_point, far)?;
        let (mut acc, mut y_cur) = self.integrate_waypoints(&waypoints)?;
        // tail: x(u) = far / u², u in (0, 1], traversed from u=1 outwards
        let nodes = gauss_legendre(self.order);
        let mut x_cur = far;
        for &(t, w) in nodes.iter().rev() {
            // u runs from 1 down to 0 as t goes from +1 to -1;
            // dx/dt = far · (-2/u³) · du/dt with du/dt = -1/2
            let u = (t + 1.0) / 2.0;
            let x = far / C64::new(u * u, 0.0);
            let dxw = far * C64::new(w / (u * u * u), 0.0);
            y_cur = self.continue_y(x_cur, y_cur, x);
            x_cur = x;
            let inv_y = C64::new(1.0, 0.0) / y_cur;
            acc[0] += dxw * inv_y;
            acc[1] += dxw * x * inv_y;
        }
        let branch = if self.curve.degree() == 5 {
            0
        } else {
            let lead = self.curve.coeffs()[6].sqrt();
            let ref_y = lead * x_cur * x_cur * x_cur;
            u8::from((y_cur - ref_y).norm() > (y_cur + ref_y).norm())
        };
        Ok((acc, branch))
    }
}

// ---------------------------------------------------------------------------
// Homology and the Riemann matrix

/// Base point with well-separated spoke angles and clear spoke segments.
fn choose_base_point(curve: &CurveSpec) -> C64 {
    let bps = curve.branch_points();
    let centroid = bps.iter().sum::<C64>() / C64::new(bps.len() as f64, 0.0);
    let spread = bps
        .iter()
        .map(|b| (b - centroid).norm())
        .fold(0.0f64, f64::max)
        .max(curve.branch_scale() * 0.1);
    let mut best = (f64::MIN, centroid + C64::new(0.0, 2.0 * spread));
    for &r in &[1.9f64, 2.6, 3.4, 4.5] {
        for k in 0..24 {
            let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.618) / 24.0;
            let cand = centroid + C64::new(phi.cos(), phi.sin()) * C64::new(r * spread, 0.0);
            let mut angles: Vec<f64> = bps.iter().map(|b| (b - cand).arg()).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let mut min_sep = f64::INFINITY;
            for i in 0..angles.len() {
                let next = if i + 1 == angles.len() {
                    angles[0] + 2.0 * std::f64::consts::PI
                } else {
                    angles[i + 1]
                };
                min_sep = min_sep.min(next - angles[i]);
            }
            let d0 = bps
                .iter()
                .map(|b| (b - cand).norm())
                .fold(f64::INFINITY, f64::min);
            let score = min_sep.min(1.0) + 0.01 * d0 / spread;
            if score > best.0 {
                best = (score, cand);
            }
        }
    }
    best.1
}


/// Integer symplectic basis for a unimodular antisymmetric form `m`.
/// Returns (A1, A2, B1, B2) as integer coordinate vectors.
fn symplectic_basis_for_form(m: &[[i64; 4]; 4]) -> Option<[[i64; 4]; 4]> {
    let form = |u: &[i64; 4], v: &[i64; 4]| -> i64 {
        let mut acc = 0;
        for i in 0..4 {
            for j in 0..4 {
                acc += u[i] * m[i][j] * v[j];
            }
        }
        acc
    };
    let e = |k: usize| -> [i64; 4] {
        let mut v = [0i64; 4];
        v[k] = 1;
        v
    };
    // candidate pool for a unit hyperbolic pivot
    let mut pool: Vec<[i64; 4]> = (0..4).map(e).collect();
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                let mut v = [0i64; 4];
                v[i] = 1;
                v[j] = 1;
                pool.push(v);
                v[j] = -1;
                pool.push(v);
            }
        }
    }
    let mut pivot = None;
    'outer: for u in &pool {
        for v in &pool {
            if form(u, v) == 1 {
                pivot = Some((*u, *v));
                break 'outer;
            }
        }
    }
    let (a1, b1) = pivot?;
    // project a full basis to the symplectic complement of (a1, b1)
    let mut rest: Vec<[i64; 4]> = Vec::new();
    for k in 0..4 {
        let v = e(k);
        let c1 = form(&v, &b1);
        let c2 = form(&v, &a1);
        let mut w = [0i64; 4];
        for i in 0..4 {
            w[i] = v[i] - c1 * a1[i] + c2 * b1[i];
        }
        if w != [0; 4] && !rest.contains(&w) {
            rest.push(w);
        }
    }
    // find a unit pair inside the complement
    for i in 0..rest.len() {
        for j in 0..rest.len() {
            let d = form(&rest[i], &rest[j]);
            if d == 1 {
                return Some([a1, rest[i], b1, rest[j]]);
            }
        }
    }
    None
}

/// Row Hermite reduction: returns an integer basis (as rows) of the row span
/// of `g` over ℤ.  Standard column-pivot elimination with euclidean steps.
fn integer_row_basis(mut g: Vec<[i64; 4]>) -> Vec<[i64; 4]> {
    let mut basis: Vec<[i64; 4]> = Vec::new();
    for col in 0..4 {
        loop {
            // find the nonzero entry of smallest magnitude in this column
            let mut min_idx = None;
            for (i, row) in g.iter().enumerate() {
                if row[col] != 0
                    && min_idx
                        .map(|m: usize| row[col].abs() < g[m][col].abs())
                        .unwrap_or(true)
                {
                    min_idx = Some(i);
                }
            }
            let Some(p) = min_idx else { break };
            let pivot_row = g[p];
            let mut changed = false;
            for (i, row) in g.iter_mut().enumerate() {
                if i == p || row[col] == 0 {
                    continue;
                }
                let q = row[col].div_euclid(pivot_row[col]);
                for k in 0..4 {
                    row[k] -= q * pivot_row[k];
                }
                if row[col] != 0 {
                    changed = true;
                }
            }
            if !changed {
                // pivot survives; retire it into the basis
                basis.push(pivot_row);
                g.remove(p);
                for row in g.iter_mut() {
                    if row[col] != 0 {
                        // cannot happen: all cleared above
                        row[col] = 0;
                    }
                }
                break;
            }
        }
    }
    basis
}

/// Saturate the lattice spanned by the dumbbell periods: pick four
/// well-conditioned generators, express all others in that frame, verify the
/// coordinates are small-denominator rationals, and return an integer-basis
/// refinement.
fn saturate_lattice(gens: &[Vector2<C64>]) -> Result<[Vector2<C64>; 4]> {
    let to_real = |v: &Vector2<C64>| Vector4::new(v[0].re, v[1].re, v[0].im, v[1].im);
    // greedy max-volume selection of an initial frame, projecting against an
    // orthonormalized copy of what is already chosen
    let mut chosen: Vec<usize> = Vec::new();
    let mut ortho: Vec<Vector4<f64>> = Vec::new();
    for _ in 0..4 {
        let mut best: Option<(f64, usize, Vector4<f64>)> = None;
        for (i, v) in gens.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut r = to_real(v);
            for f in &ortho {
                r -= f * f.dot(&r);
            }
            let score = r.norm();
            if best.as_ref().map(|b| score > b.0).unwrap_or(true) {
                best = Some((score, i, r));
            }
        }
        let (score, i, r) = best.ok_or(Error::NoSymplecticBasis(f64::NAN))?;
        if score < 1e-10 {
            return Err(Error::NoSymplecticBasis(score));
        }
        chosen.push(i);
        ortho.push(r / score);
    }
    let b0 = nalgebra::Matrix4::from_columns(&[
        to_real(&gens[chosen[0]]),
        to_real(&gens[chosen[1]]),
        to_real(&gens[chosen[2]]),
        to_real(&gens[chosen[3]]),
    ]);
    let b0_inv = b0
        .try_inverse()
        .ok_or(Error::NoSymplecticBasis(f64::NAN))?;
    // rational coordinates of every generator
    let coords: Vec<Vector4<f64>> = gens.iter().map(|v| b0_inv * to_real(v)).collect();
    let mut denom = None;
    'd: for d in 1..=24u32 {
        for c in &coords {
            for k in 0..4 {
                let s = c[k] * d as f64;
                if (s - s.round()).abs() > 1e-6 {
                    continue 'd;
                }
            }
        }
        denom = Some(d);
        break;
    }
    let d = denom.ok_or(Error::NoSymplecticBasis(f64::NAN))? as f64;
    let int_rows: Vec<[i64; 4]> = coords
        .iter()
        .map(|c| {
            [
                (c[0] * d).round() as i64,
                (c[1] * d).round() as i64,
                (c[2] * d).round() as i64,
                (c[3] * d).round() as i64,
            ]
        })
        .collect();
    let rows = integer_row_basis(int_rows);
    if rows.len() != 4 {
        return Err(Error::NoSymplecticBasis(f64::NAN));
    }
    let mk = |row: &[i64; 4]| -> Vector2<C64> {
        let mut v = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for k in 0..4 {
            v += gens[chosen[k]] * C64::new(row[k] as f64 / d, 0.0);
        }
        v
    };
    Ok([mk(&rows[0]), mk(&rows[1]), mk(&rows[2]), mk(&rows[3])])
}

/// Compute periods, homology normalization and the theta characteristic.
pub fn compute_periods(curve: &CurveSpec, precision_target: f64) -> Result<Arc<PeriodData>> {
    let base = choose_base_point(curve);
    let order_schedule = [48usize, 96, 192, 384, 768];
    type Converged = (Vec<Vector2<C64>>, Vector2<C64>, u8, usize, u32);
    let mut chosen: Option<Converged> = None;
    let mut prev: Option<Vec<Vector2<C64>>> = None;
    let mut last_delta = f64::INFINITY;
    for (round, &order) in order_schedule.iter().enumerate() {
        let integ = PathIntegrator::new(curve, base, order);
        let mut us = Vec::new();
        for b in curve.branch_points() {
            let (u, _y) = integ.integrate_to(*b)?;
            us.push(u);
        }
        let (u_inf, inf_branch) = integ.integrate_to_infinity()?;
        let mut all = us.clone();
        all.push(u_inf);
        if let Some(p) = &prev {
            let delta = p
                .iter()
                .zip(all.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            if delta < precision_target {
                chosen = Some((us, u_inf, inf_branch, order, round as u32));
                break;
            }
            if delta > last_delta {
                // roundoff floor: more nodes only add noise
                break;
            }
            last_delta = delta;
        }
        prev = Some(all);
    }
    let (u_branch, u_infinity, inf_branch, order, refinements) = match chosen {
        Some(c) => c,
        None => return Err(Error::QuadratureNotConverged(last_delta, precision_target)),
    };

    // dumbbell periods over all branch-point pairs: the loop around a pair
    // has period twice the line integral between them.  The infinite point
    // is a branch point only for the degree-5 model.
    let mut spokes = u_branch.clone();
    if curve.degree() == 5 {
        spokes.push(u_infinity);
    }
    let mut gens: Vec<Vector2<C64>> = Vec::new();
    for i in 0..spokes.len() {
        for j in (i + 1)..spokes.len() {
            gens.push((spokes[i] - spokes[j]) * C64::new(2.0, 0.0));
        }
    }
    // isolating-circle loops pin down classes the spoke geometry can miss
    let integ = PathIntegrator::new(curve, base, order);
    for i in 0..curve.branch_points().len() {
        for j in (i + 1)..curve.branch_points().len() {
            if let Some(v) = integ.circle_period(i, j) {
                gens.push(v);
            }
        }
    }
    let lattice = saturate_lattice(&gens)?;

    // raw Abel-Jacobi integrals for the characteristic search, resolved to
    // the correct sheet but not yet normalized (basis independent)
    let sample_points = curve_sample_points(curve);
    let integ = PathIntegrator::new(curve, base, order);
    let u_eta = if curve.eta_index() == curve.branch_points().len() {
        u_infinity
    } else {
        u_branch[curve.eta_index()]
    };
    let mut raw_samples: Vec<Vector2<C64>> = Vec::new();
    for p in &sample_points {
        if let CurvePoint::Affine { x, y } = *p {
            let (u, y_end) = integ.integrate_to(x)?;
            let u = if (y_end - y).norm() <= (y_end + y).norm() {
                u
            } else {
                u_branch[0] * C64::new(2.0, 0.0) - u
            };
            raw_samples.push(u - u_eta);
        }
    }

    // polarization search: find the integer inverse-intersection form N of
    // the lattice basis from the Riemann bilinear relations, then accept the
    // first symplectic basis whose Riemann matrix carries a vanishing odd
    // theta characteristic on the curve samples
    let p_scale = lattice.iter().map(|v| v.norm_squared()).sum::<f64>();
    let pnp = |n: &[[i64; 4]; 4]| -> C64 {
        // (P N Pᵀ)_{01}; the 2x2 product is antisymmetric
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                if n[i][j] != 0 {
                    acc += lattice[i][0] * lattice[j][1] * C64::new(n[i][j] as f64, 0.0);
                }
            }
        }
        acc
    };
    let mut candidates: Vec<(f64, [[i64; 4]; 4])> = Vec::new();
    let rng = -3i64..=3;
    for n01 in rng.clone() {
        for n02 in rng.clone() {
            for n03 in rng.clone() {
                for n12 in rng.clone() {
                    for n13 in rng.clone() {
                        for n23 in rng.clone() {
                            let pf = n01 * n23 - n02 * n13 + n03 * n12;
                            if pf.abs() != 1 {
                                continue;
                            }
                            let n = [
                                [0, n01, n02, n03],
                                [-n01, 0, n12, n13],
                                [-n02, -n12, 0, n23],
                                [-n03, -n13, -n23, 0],
                            ];
                            let r = pnp(&n).norm() / p_scale;
                            if r < 1e-8 {
                                candidates.push((r, n));
                            }
                        }
                    }
                }
            }
        }
    }
    candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));

    let even_scale_at = |omega: &Matrix2<C64>| -> f64 {
        let z0 = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        ThetaChar::half_characteristics()
            .iter()
            .filter(|c| !c.is_odd())
            .filter_map(|c| theta::theta(c, &z0, omega, 1e-10).ok())
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
    };

    type Accepted = (Matrix2<C64>, Matrix2<C64>, Matrix2<C64>, ThetaChar);
    let mut accepted: Option<Accepted> = None;
    'cand: for (_, n) in &candidates {
        // integer inverse of the unimodular antisymmetric form
        let nf = nalgebra::Matrix4::from_fn(|i, j| n[i][j] as f64);
        let Some(m_inv) = nf.try_inverse() else { continue };
        let mut m = [[0i64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let v = m_inv[(i, j)].round();
                if (m_inv[(i, j)] - v).abs() > 1e-9 {
                    continue 'cand;
                }
                m[i][j] = v as i64;
            }
        }
        let Some([a1, a2, b1, b2]) = symplectic_basis_for_form(&m) else {
            continue;
        };
        let comb = |k: &[i64; 4]| -> Vector2<C64> {
            let mut v = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for (i, c) in k.iter().enumerate() {
                v += lattice[i] * C64::new(*c as f64, 0.0);
            }
            v
        };
        for flip in [1i64, -1] {
            // flipping the B-cycles flips the orientation of the form
            let (ca1, ca2) = (comb(&a1), comb(&a2));
            let (cb1, cb2) = (
                comb(&b1) * C64::new(flip as f64, 0.0),
                comb(&b2) * C64::new(flip as f64, 0.0),
            );
            let a_mat = Matrix2::new(ca1[0], ca2[0], ca1[1], ca2[1]);
            let b_mat = Matrix2::new(cb1[0], cb2[0], cb1[1], cb2[1]);
            let Some(a_inv) = a_mat.try_inverse() else { continue };
            let omega_raw = a_inv * b_mat;
            let sym = (omega_raw[(0, 1)] - omega_raw[(1, 0)]).norm() / omega_raw.norm();
            if sym > 1e-9 {
                continue;
            }
            let off = (omega_raw[(0, 1)] + omega_raw[(1, 0)]) * C64::new(0.5, 0.0);
            let omega = Matrix2::new(omega_raw[(0, 0)], off, off, omega_raw[(1, 1)]);
            let (y00, y01, y11) = (omega[(0, 0)].im, omega[(0, 1)].im, omega[(1, 1)].im);
            let tr = y00 + y11;
            let det = y00 * y11 - y01 * y01;
            let lam_min = tr / 2.0 - (tr * tr / 4.0 - det).max(0.0).sqrt();
            if lam_min < 1e-6 {
                continue;
            }
            // characteristic acceptance: some odd θ must vanish on α(C)
            let Ok(lat_inv) = lattice_inverse(&omega) else { continue };
            let norm = a_inv;
            let scale = even_scale_at(&omega);
            let reduce_cand = |z: &Vector2<C64>| -> Vector2<C64> {
                let mut out = *z;
                for _ in 0..2 {
                    let t = lat_inv * Vector4::new(out[0].re, out[1].re, out[0].im, out[1].im);
                    let k = [t[0].round(), t[1].round(), t[2].round(), t[3].round()];
                    if k == [0.0, 0.0, 0.0, 0.0] {
                        break;
                    }
                    out -= Vector2::new(C64::new(k[0], 0.0), C64::new(k[1], 0.0));
                    out -= Vector2::new(omega[(0, 0)], omega[(1, 0)]) * C64::new(k[2], 0.0);
                    out -= Vector2::new(omega[(0, 1)], omega[(1, 1)]) * C64::new(k[3], 0.0);
                }
                out
            };
            let alphas: Vec<Vector2<C64>> = raw_samples
                .iter()
                .map(|u| reduce_cand(&(norm * u)))
                .collect();
            for ch in ThetaChar::half_characteristics() {
                if !ch.is_odd() {
                    continue;
                }
                let worst = alphas
                    .iter()
                    .filter_map(|a| theta::theta(&ch, a, &omega, 1e-10).ok())
                    .map(|v| v.norm())
                    .fold(0.0f64, f64::max);
                if worst < 1e-5 * scale {
                    accepted = Some((omega, a_mat, b_mat, ch));
                    break 'cand;
                }
            }
        }
    }
    let Some((omega, a_mat, b_mat, delta)) = accepted else {
        return Err(Error::NoSymplecticBasis(candidates.len() as f64));
    };
    let svd = nalgebra::DMatrix::from_fn(2, 2, |i, j| a_mat[(i, j)]).svd(false, false);
    let cond = svd.singular_values[0] / svd.singular_values[1];
    if cond > 1e8 {
        return Err(Error::IllConditionedPeriods(cond));
    }
    let norm = a_mat
        .try_inverse()
        .ok_or(Error::IllConditionedPeriods(f64::INFINITY))?;

    let mut pd = PeriodData {
        id: period_id(curve, precision_target),
        lattice_inv: lattice_inverse(&omega)?,
        curve: curve.clone(),
        omega,
        a_periods: a_mat,
        b_periods: b_mat,
        delta,
        precision_target,
        quadrature_order: order,
        refinements,
        theta_scale: 1.0,
        base_point: base,
        u_branch,
        u_infinity,
        inf_branch,
        u_eta,
        norm,
        grid: OnceLock::new(),
    };

    // scale: median |θ[δ]| over a fixed well-spread sample
    let mut kron = crate::sampling::Kronecker::<4>::new(0);
    let mut vals: Vec<f64> = (0..33)
        .map(|_| {
            let t = kron.next_point();
            let z = Vector2::new(C64::new(t[0], 0.0), C64::new(t[1], 0.0))
                + pd.omega_col(0) * C64::new(t[2], 0.0)
                + pd.omega_col(1) * C64::new(t[3], 0.0);
            pd.theta_delta(&pd.reduce(&z)).norm()
        })
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pd.theta_scale = vals[vals.len() / 2];

    Ok(Arc::new(pd))
}

/// A handful of generic points on the curve for the characteristic search.
fn curve_sample_points(curve: &CurveSpec) -> Vec<CurvePoint> {
    let scale = curve.branch_scale();
    let mut kron = crate::sampling::Kronecker::<2>::new(1);
    let mut out = Vec::new();
    while out.len() < 20 {
        let t = kron.next_point();
        let x = C64::new(
            (2.0 * t[0] - 1.0) * 1.6 * scale,
            (2.0 * t[1] - 1.0) * 1.6 * scale,
        );
        if curve
            .branch_points()
            .iter()
            .any(|b| (x - b).norm() < 0.05 * scale)
        {
            continue;
        }
        out.push(curve.lift(x, (out.len() % 2) as u8));
    }
    out
}

/// Compute periods through a small JSON file cache keyed by curve content
/// and precision.
pub fn compute_periods_cached(
    curve: &CurveSpec,
    precision_target: f64,
    cache_dir: Option<&std::path::Path>,
) -> Result<Arc<PeriodData>> {
    let key = period_id(curve, precision_target);
    if let Some(dir) = cache_dir {
        let path = dir.join(format!("periods-{key:016x}.json"));
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            if let Ok(pd) = PeriodData::from_json(&v) {
                return Ok(pd);
            }
        }
        let pd = compute_periods(curve, precision_target)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, serde_json::to_string_pretty(&pd.to_json())?)?;
        return Ok(pd);
    }
    compute_periods(curve, precision_target)
}
