//! The level-2 and level-3 theta embeddings of the Jacobian, the Kummer
//! quartic and Coble cubic with their polar maps, the Heisenberg action of
//! 3-torsion on the level-3 coordinates, and cached translate spans.
//!
//! All projective data is fitted from deterministic low-discrepancy samples
//! so repeated runs reproduce coefficients bit for bit.

use crate::curve::CurvePoint;
use crate::jacobian::{curve_grid, JacobianPoint};
use crate::periods::PeriodData;
use crate::projlin::{
    self, fit_hypersurface, polar_map, FormCoefficients, ProjPoint, Subspace, RANK_TOL,
};
use crate::sampling::Kronecker;
use crate::theta::{self, JetRequest, ThetaChar};
use crate::{Error, Result, C64, TWO_PI_I};
use nalgebra::{DMatrix, DVector, Vector2};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type FitSlot = OnceLock<std::result::Result<(FormCoefficients, f64), String>>;
type SecantPool = Arc<Vec<(crate::jacobian::LengthTwoScheme, Subspace)>>;

/// Shared context: period data plus caches for spans, hypersurface fits and
/// Heisenberg matrices.
pub struct EmbeddingContext {
    periods: Arc<PeriodData>,
    seed: u64,
    span_cache: Mutex<HashMap<[i64; 4], Arc<Subspace>>>,
    coble: FitSlot,
    kummer: FitSlot,
    heisenberg: Mutex<HashMap<[u8; 4], Arc<DMatrix<C64>>>>,
    k3_gauge: OnceLock<std::result::Result<DMatrix<C64>, String>>,
    secant_pool: OnceLock<std::result::Result<SecantPool, String>>,
}

impl EmbeddingContext {
    pub fn new(periods: Arc<PeriodData>, seed: u64) -> Self {
        EmbeddingContext {
            periods,
            seed,
            span_cache: Mutex::new(HashMap::new()),
            coble: OnceLock::new(),
            kummer: OnceLock::new(),
            heisenberg: Mutex::new(HashMap::new()),
            k3_gauge: OnceLock::new(),
            secant_pool: OnceLock::new(),
        }
    }

    pub fn periods(&self) -> &Arc<PeriodData> {
        &self.periods
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, z: Vector2<C64>) -> JacobianPoint {
        JacobianPoint::new(&self.periods, z)
    }

    pub fn zero(&self) -> JacobianPoint {
        JacobianPoint::zero(&self.periods)
    }

    /// Deterministic well-spread Jacobian points.
    pub fn jacobian_samples(&self, label: &str, count: usize) -> Vec<JacobianPoint> {
        let mut kron = Kronecker::<4>::new(crate::sampling::derive_seed(self.seed, label));
        (0..count)
            .map(|_| {
                let t = kron.next_point();
                let z = Vector2::new(C64::new(t[0], 0.0), C64::new(t[1], 0.0))
                    + self.periods.omega_col(0) * C64::new(t[2], 0.0)
                    + self.periods.omega_col(1) * C64::new(t[3], 0.0);
                self.point(z)
            })
            .collect()
    }

    /// Points of the translated curve `Θ_a`, as pairs (curve point, α + a).
    pub fn theta_translate_samples(
        &self,
        a: &JacobianPoint,
        count: usize,
    ) -> Vec<(CurvePoint, JacobianPoint)> {
        let grid = curve_grid(&self.periods);
        grid.generic_samples()
            .take(count)
            .map(|(p, alpha)| (*p, self.point(alpha + a.rep())))
            .collect()
    }

    // -- level bases ------------------------------------------------------

    /// The level-n basis sections evaluated at `z`, including the shift that
    /// makes the divisor class `n·Θ` for the symmetric theta divisor, and a
    /// linear-exponential prefactor that matches the automorphy of products
    /// `∏ θ[δ](z - a_i)` with `Σ a_i = 0` exactly.
    pub fn level_basis(&self, n: u32, z: &Vector2<C64>) -> DVector<C64> {
        self.level_basis_jet(n, z, (0, 0))
    }

    /// Partial derivative `∂^{j}` of the level-n basis at `z`.
    pub fn level_basis_jet(&self, n: u32, z: &Vector2<C64>, jet: (u8, u8)) -> DVector<C64> {
        let pd = &self.periods;
        let delta1 = pd.delta.a_f64();
        let w = (z + pd.z_delta()) * C64::new(n as f64, 0.0);
        let omega_n = pd.omega * C64::new(n as f64, 0.0);
        // prefactor exp(L·z), L = 2πi n δ₁
        let l = [
            TWO_PI_I * C64::new(n as f64 * delta1[0], 0.0),
            TWO_PI_I * C64::new(n as f64 * delta1[1], 0.0),
        ];
        let pref = (l[0] * z[0] + l[1] * z[1]).exp();
        let (j0, j1) = jet;
        let mut out = DVector::<C64>::zeros((n * n) as usize);
        for s0 in 0..n {
            for s1 in 0..n {
                let ch = ThetaChar::from_num_den([s0 as i32, s1 as i32], [0, 0], n);
                // Leibniz over the two factors exp(Lz) and θ(n(z+z_δ))
                let mut acc = C64::new(0.0, 0.0);
                for k0 in 0..=j0 {
                    for k1 in 0..=j1 {
                        let binom = binomial(j0, k0) * binomial(j1, k1);
                        let jet_req = JetRequest::new(j0 - k0, j1 - k1)
                            .expect("total order bounded by caller");
                        let th = theta::theta_jet(&ch, &w, &omega_n, jet_req, theta::THETA_TOL)
                            .expect("radius fits");
                        let chain = C64::new(n as f64, 0.0).powu((j0 - k0 + j1 - k1) as u32);
                        acc += C64::new(binom, 0.0)
                            * l[0].powu(k0 as u32)
                            * l[1].powu(k1 as u32)
                            * chain
                            * th;
                    }
                }
                out[(s0 * n + s1) as usize] = pref * acc;
            }
        }
        out
    }

    /// The `|3Θ|` embedding.
    pub fn phi3(&self, a: &JacobianPoint) -> ProjPoint {
        ProjPoint::new(self.level_basis(3, a.rep()))
    }

    /// The `|2Θ|` map onto the Kummer quartic.
    pub fn phi2(&self, a: &JacobianPoint) -> ProjPoint {
        ProjPoint::new(self.level_basis(2, a.rep()))
    }

    /// Tangent line to the embedded surface at `φ₃(a)` in the direction of
    /// the ℙ¹-chart point `v = [v0 : v1]` (the hyperelliptic-cover
    /// coordinates of ℙ(T_aA)).
    pub fn tangent_line(&self, a: &JacobianPoint, v: &ProjPoint) -> Subspace {
        let t = self.chart_tangent_vector(v);
        let value = self.level_basis(3, a.rep());
        let d0 = self.level_basis_jet(3, a.rep(), (1, 0));
        let d1 = self.level_basis_jet(3, a.rep(), (0, 1));
        let deriv = DVector::from_fn(9, |i, _| d0[i] * t[0] + d1[i] * t[1]);
        projlin::span(&[ProjPoint::new(value), ProjPoint::new(deriv)], RANK_TOL)
    }

    /// The flat tangent vector in ℂ² corresponding to a ℙ¹-chart direction.
    pub fn chart_tangent_vector(&self, v: &ProjPoint) -> Vector2<C64> {
        let c = v.coords();
        let t = self.periods.curve_tangent_chart(c[0], c[1]);
        t / C64::new(t.norm(), 0.0)
    }

    /// Secant (or tangent) line of a length-two scheme under `φ₃`.
    pub fn secant_line(&self, zeta: &crate::jacobian::LengthTwoScheme) -> Subspace {
        match zeta {
            crate::jacobian::LengthTwoScheme::Reduced { a, b } => projlin::span(
                &[self.phi3(a), self.phi3(b)],
                RANK_TOL,
            ),
            crate::jacobian::LengthTwoScheme::NonReduced { a, v } => self.tangent_line(a, v),
        }
    }

    // -- translate spans ---------------------------------------------------

    /// Linear span of `φ₃(Θ_a)`, asserted to be a projective 4-plane.
    /// Cached by the quantized representative of `a`.
    pub fn translate_span(&self, a: &JacobianPoint) -> Result<Arc<Subspace>> {
        let key = a.canonical_key();
        if let Some(s) = self.span_cache.lock().expect("span cache").get(&key) {
            return Ok(s.clone());
        }
        let pts: Vec<ProjPoint> = self
            .theta_translate_samples(a, 16)
            .iter()
            .map(|(_, w)| self.phi3(w))
            .collect();
        let span = projlin::span(&pts, RANK_TOL);
        if span.dim_proj() != 4 {
            return Err(Error::WrongSpanDimension(span.dim_proj()));
        }
        let arc = Arc::new(span);
        // first writer wins; concurrent fills compute identical data
        let mut cache = self.span_cache.lock().expect("span cache");
        let entry = cache.entry(key).or_insert_with(|| arc.clone());
        Ok(entry.clone())
    }

    // -- hypersurfaces ------------------------------------------------------

    /// The cubic in ℙ̌⁸ singular along the embedded surface, fitted from
    /// gradient conditions; returns coefficients and the uniqueness gap.
    pub fn coble_cubic(&self) -> Result<(FormCoefficients, f64)> {
        self.coble
            .get_or_init(|| {
                let samples: Vec<ProjPoint> = self
                    .jacobian_samples("coble-fit", 40)
                    .iter()
                    .map(|a| self.phi3(a))
                    .collect();
                fit_hypersurface(&samples, 3, true, RANK_TOL)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::FitFailed)
    }

    /// The Kummer quartic surface in ℙ̌³ through the `φ₂` image.
    pub fn kummer_quartic(&self) -> Result<(FormCoefficients, f64)> {
        self.kummer
            .get_or_init(|| {
                let samples: Vec<ProjPoint> = self
                    .jacobian_samples("kummer-fit", 60)
                    .iter()
                    .map(|a| self.phi2(a))
                    .collect();
                fit_hypersurface(&samples, 4, false, RANK_TOL)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::FitFailed)
    }

    /// Polar (gradient) map of the Coble cubic, ℙ̌⁸ → ℙ⁸.
    pub fn coble_polar(&self, p: &ProjPoint) -> Result<ProjPoint> {
        let (f, _) = self.coble_cubic()?;
        polar_map(&f, p)
    }

    /// Polar map of the Kummer quartic, ℙ̌³ → ℙ³.
    pub fn kummer_polar(&self, p: &ProjPoint) -> Result<ProjPoint> {
        let (f, _) = self.kummer_quartic()?;
        polar_map(&f, p)
    }

    // -- Heisenberg action ---------------------------------------------------

    /// Identify a 3-torsion point by its integer lattice numerators.
    fn three_torsion_key(&self, e: &JacobianPoint) -> Result<[u8; 4]> {
        if !e.scale(3).is_zero() {
            return Err(Error::NotThreeTorsion);
        }
        let c = self.periods.lattice_coords(e.rep());
        let mut key = [0u8; 4];
        for i in 0..4 {
            let v = (c[i] * 3.0).round() as i64;
            if (c[i] * 3.0 - v as f64).abs() > 1e-6 {
                return Err(Error::NotThreeTorsion);
            }
            key[i] = v.rem_euclid(3) as u8;
        }
        Ok(key)
    }

    /// The 9x9 matrix of the projective-linear action of translation by the
    /// 3-torsion point `e` on the level-3 coordinates, fitted from samples.
    pub fn heisenberg_matrix(&self, e: &JacobianPoint) -> Result<Arc<DMatrix<C64>>> {
        let key = self.three_torsion_key(e)?;
        if let Some(m) = self.heisenberg.lock().expect("heisenberg cache").get(&key) {
            return Ok(m.clone());
        }
        let samples = self.jacobian_samples("heisenberg-fit", 12);
        let pairs: Vec<(ProjPoint, ProjPoint)> = samples
            .iter()
            .map(|z| {
                let w = z.add(e).expect("same period data");
                (self.phi3(z), self.phi3(&w))
            })
            .collect();
        let m = fit_projective_map(&pairs, 9)?;
        let arc = Arc::new(m);
        let mut cache = self.heisenberg.lock().expect("heisenberg cache");
        let entry = cache.entry(key).or_insert_with(|| arc.clone());
        Ok(entry.clone())
    }

    // -- the hyperelliptic splitting of a tricanonical span -----------------

    /// For 3-torsion `a`, the action of `z ↦ -z` on the span of `Θ_a` splits
    /// it into a fixed point `O_a` and an invariant 3-space.  Returns
    /// `(O_a, P3_a)` and the involution matrix on span coordinates.
    pub fn iota_splitting(&self, a: &JacobianPoint) -> Result<IotaSplitting> {
        if !a.scale(3).is_zero() {
            return Err(Error::NotThreeTorsion);
        }
        let span = self.translate_span(a)?;
        let u = span.basis().clone(); // 9 x 5
        let samples = self.theta_translate_samples(a, 14);
        // pair each curve point with its hyperelliptic involute
        let pairs: Vec<(ProjPoint, ProjPoint)> = samples
            .iter()
            .map(|(p, w)| {
                let q = self.periods.curve.involute(*p);
                let alpha_q = self
                    .periods
                    .abel_jacobi(&q)
                    .expect("involute stays integrable");
                let w_q = self.point(alpha_q + a.rep());
                let v = u.adjoint() * self.phi3(w).coords();
                let v_q = u.adjoint() * self.phi3(&w_q).coords();
                (ProjPoint::new(v), ProjPoint::new(v_q))
            })
            .collect();
        let l = fit_projective_map(&pairs, 5)?;
        // normalize so L² = id
        let l2 = &l * &l;
        let tr = (0..5).map(|i| l2[(i, i)]).sum::<C64>() / C64::new(5.0, 0.0);
        let lam = tr.sqrt();
        let l = l / lam;
        let l2 = &l * &l;
        let id_err = (&l2 - DMatrix::<C64>::identity(5, 5)).norm();
        if id_err > 1e-5 {
            return Err(Error::EigensplitFailed(vec![]));
        }
        // eigenspaces of the involution: projectors (I ± L)/2
        let minus = (DMatrix::<C64>::identity(5, 5) - &l) * C64::new(0.5, 0.0);
        let plus = (DMatrix::<C64>::identity(5, 5) + &l) * C64::new(0.5, 0.0);
        let rank = |m: &DMatrix<C64>| -> (usize, DMatrix<C64>) {
            let svd = m.clone().svd(true, false);
            let s = &svd.singular_values;
            let r = (0..s.len()).take_while(|&i| s[i] > 1e-6 * s[0]).count();
            (r, svd.u.unwrap().columns(0, r).into_owned())
        };
        let (r_minus, basis_minus) = rank(&minus);
        let (r_plus, basis_plus) = rank(&plus);
        let (o_cols, p3_cols) = match (r_minus, r_plus) {
            (1, 4) => (basis_minus, basis_plus),
            (4, 1) => (basis_plus, basis_minus),
            _ => return Err(Error::EigensplitFailed(vec![r_minus, r_plus])),
        };
        // map back to the ambient ℙ⁸
        let o_amb = &u * o_cols.column(0);
        let mut p3_amb = DMatrix::<C64>::zeros(9, 4);
        for j in 0..4 {
            let col = &u * p3_cols.column(j);
            p3_amb.set_column(j, &col);
        }
        let p3 = projlin::span(
            &(0..4)
                .map(|j| ProjPoint::new(p3_amb.column(j).into_owned()))
                .collect::<Vec<_>>(),
            RANK_TOL,
        );
        Ok(IotaSplitting {
            vertex: ProjPoint::new(o_amb),
            three_space: p3,
            span: (*span).clone(),
        })
    }

    /// A fixed pool of random secant lines (with their schemes) used by the
    /// fiber-structure checks; built once per context.
    pub fn secant_pool(&self) -> Result<SecantPool> {
        self.secant_pool
            .get_or_init(|| {
                let samples = self.jacobian_samples("secant-pool", 400);
                let mut out = Vec::with_capacity(200);
                for pair in samples.chunks(2) {
                    if out.len() >= 200 {
                        break;
                    }
                    let (a, b) = (&pair[0], &pair[1]);
                    if a.distance(b) < 5e-2 {
                        continue;
                    }
                    let zeta = crate::jacobian::LengthTwoScheme::reduced(a.clone(), b.clone());
                    let image = match crate::jacobian::tau(&zeta) {
                        Ok(s) => s,
                        Err(_) => continue,
                    };
                    let line = self.secant_line(&image);
                    if line.dim_proj() != 1 {
                        continue;
                    }
                    out.push((zeta, line));
                }
                if out.len() < 150 {
                    return Err(format!("secant pool too small: {}", out.len()));
                }
                Ok(Arc::new(out))
            })
            .clone()
            .map_err(Error::FitFailed)
    }

    /// Gauge matrix aligning the Kummer polar image with the level-2 product
    /// coordinates; fitted once from six samples and frozen (see the Kummer
    /// K3 duality check).
    pub(crate) fn k3_gauge(
        &self,
        fit: impl FnOnce() -> std::result::Result<DMatrix<C64>, String>,
    ) -> Result<DMatrix<C64>> {
        self.k3_gauge
            .get_or_init(fit)
            .clone()
            .map_err(Error::FitFailed)
    }
}

/// The ι-splitting data of a tricanonical span.
pub struct IotaSplitting {
    /// The isolated fixed point `O_a` (vertex of the tricanonical cone).
    pub vertex: ProjPoint,
    /// The complementary invariant 3-space.
    pub three_space: Subspace,
    /// The ambient 4-space spanned by the translate.
    pub span: Subspace,
}

impl IotaSplitting {
    /// Projection from the vertex onto the 3-space, in ambient coordinates.
    pub fn project(&self, p: &ProjPoint) -> ProjPoint {
        let u3 = self.three_space.basis();
        let coeff = u3.adjoint() * p.coords();
        ProjPoint::new(u3 * coeff)
    }

    /// Distance of a point from the 3-space.
    pub fn distance_from_three_space(&self, p: &ProjPoint) -> f64 {
        self.three_space.point_distance(p)
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Fit the projective-linear map with `w_i ∝ M v_i` from point pairs.
///
/// Every pair contributes the 2x2 minors of `(w | M v)`, which are linear in
/// `M`; the nullspace of the stacked system is the vectorized matrix.
pub fn fit_projective_map(pairs: &[(ProjPoint, ProjPoint)], dim: usize) -> Result<DMatrix<C64>> {
    let unknowns = dim * dim;
    let rows_per = dim * (dim - 1) / 2;
    assert!(pairs.len() * rows_per >= unknowns + 4, "not enough pairs");
    let mut m = DMatrix::<C64>::zeros(pairs.len() * rows_per, unknowns);
    for (s, (v, w)) in pairs.iter().enumerate() {
        let mut r = s * rows_per;
        for alpha in 0..dim {
            for beta in (alpha + 1)..dim {
                // w_alpha (Mv)_beta - w_beta (Mv)_alpha = 0
                for k in 0..dim {
                    m[(r, beta * dim + k)] += w.coords()[alpha] * v.coords()[k];
                    m[(r, alpha * dim + k)] -= w.coords()[beta] * v.coords()[k];
                }
                r += 1;
            }
        }
    }
    let svd = m.svd(false, true);
    let s = &svd.singular_values;
    let vt = svd.v_t.unwrap();
    let last = s.len() - 1;
    let gap = s[last - 1] / s[last].max(f64::MIN_POSITIVE);
    if gap < 100.0 {
        return Err(Error::MapFitAmbiguous(gap));
    }
    let flat = vt.row(last).adjoint();
    Ok(DMatrix::from_fn(dim, dim, |i, j| flat[i * dim + j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::default_curve;
    use crate::jacobian::torsion_points;
    use crate::periods::{compute_periods, DEFAULT_PRECISION};
    use crate::sampling::rng_for;
    use rand::Rng;

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
    fn level_basis_is_projectively_periodic() {
        let c = ctx();
        let mut rng = rng_for(42, "level-periodic");
        for n in [2u32, 3] {
            for _ in 0..6 {
                let z = Vector2::new(
                    C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                    C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                );
                let k = [
                    rng.random_range(-1..=1i64),
                    rng.random_range(-1..=1i64),
                    rng.random_range(-1..=1i64),
                    rng.random_range(-1..=1i64),
                ];
                let shifted = z + c.periods().lattice_vector(&k);
                let b1 = c.level_basis(n, &z);
                let b2 = c.level_basis(n, &shifted);
                let p1 = ProjPoint::new(b1);
                let p2 = ProjPoint::new(b2);
                assert!(
                    p1.fs_distance(&p2) < 1e-8,
                    "n={n} lattice shift moved the projective point {:e}",
                    p1.fs_distance(&p2)
                );
            }
        }
    }

    #[test]
    fn level3_basis_is_base_point_free() {
        let c = ctx();
        for (i, a) in c.jacobian_samples("bpf", 40).iter().enumerate() {
            let b = c.level_basis(3, a.rep());
            let max = b.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            assert!(max > 1e-10, "all level-3 sections vanish at sample {i}");
        }
    }

    #[test]
    fn full_surface_spans_the_whole_space() {
        let c = ctx();
        let pts: Vec<ProjPoint> = c
            .jacobian_samples("nondegenerate", 40)
            .iter()
            .map(|a| c.phi3(a))
            .collect();
        let s = projlin::span(&pts, 1e-3);
        assert_eq!(s.dim_proj(), 8, "the embedded surface is nondegenerate");
    }

    #[test]
    fn phi2_is_even() {
        let c = ctx();
        let mut rng = rng_for(42, "phi2-even");
        for _ in 0..50 {
            let a = random_point(c, &mut rng);
            let p = c.phi2(&a);
            let q = c.phi2(&a.neg());
            assert!(p.fs_distance(&q) < 1e-8, "{:e}", p.fs_distance(&q));
        }
    }

    #[test]
    fn phi3_separates_sampled_points() {
        let c = ctx();
        let mut rng = rng_for(42, "phi3-injective");
        let mut checked = 0;
        while checked < 200 {
            let a = random_point(c, &mut rng);
            let b = random_point(c, &mut rng);
            if a.distance(&b) < 1e-2 {
                continue;
            }
            let d = c.phi3(&a).fs_distance(&c.phi3(&b));
            assert!(d > 1e-3, "φ₃ collision at distance {:e}", d);
            checked += 1;
        }
    }

    #[test]
    fn translate_span_has_dimension_four_and_contains_translate_only() {
        let c = ctx();
        let mut rng = rng_for(42, "span-dim");
        for _ in 0..5 {
            let a = random_point(c, &mut rng);
            let span = c.translate_span(&a).unwrap();
            assert_eq!(span.dim_proj(), 4);
            // fresh points of Θ_a lie in the span
            for (_, w) in c.theta_translate_samples(&a, 40).iter().skip(20) {
                assert!(span.point_distance(&c.phi3(w)) < 1e-6);
            }
            // generic points of the surface stay far away
            for _ in 0..20 {
                let b = random_point(c, &mut rng);
                if crate::jacobian::on_theta(&a, &b) {
                    continue;
                }
                assert!(span.point_distance(&c.phi3(&b)) > 1e-3);
            }
        }
    }

    #[test]
    fn spans_of_two_translates_meet_in_a_line() {
        let c = ctx();
        let mut rng = rng_for(42, "span-pair");
        for _ in 0..4 {
            let a = random_point(c, &mut rng);
            let b = random_point(c, &mut rng);
            let sa = c.translate_span(&a).unwrap();
            let sb = c.translate_span(&b).unwrap();
            let line = projlin::intersect(&[&sa, &sb], 1e-6);
            assert_eq!(line.dim_proj(), 1);
            // the intersection contains both points of Θ_a ∩ Θ_b
            let scheme = crate::jacobian::theta_intersection(&a, &b).unwrap();
            for w in scheme.support() {
                assert!(line.point_distance(&c.phi3(w)) < 1e-6);
            }
        }
    }

    #[test]
    fn coble_cubic_is_unique_and_singular_along_surface() {
        let c = ctx();
        let (f, gap) = c.coble_cubic().unwrap();
        assert!(gap > 1e3, "uniqueness gap {gap:e}");
        // fresh samples: gradient vanishes (the surface is the singular locus)
        for a in c.jacobian_samples("coble-fresh", 30) {
            let p = c.phi3(&a);
            let g = f.gradient(p.coords());
            assert!(g.norm() < 1e-6, "gradient {:e}", g.norm());
        }
        // polar map is undefined exactly there
        let a = c.jacobian_samples("coble-ind", 1).remove(0);
        assert!(matches!(
            c.coble_polar(&c.phi3(&a)),
            Err(Error::IndeterminacyPoint(_))
        ));
    }

    #[test]
    fn coble_cubic_reproducible_across_seeds() {
        let c = ctx();
        let (f1, _) = c.coble_cubic().unwrap();
        let pd = c.periods().clone();
        let c2 = EmbeddingContext::new(pd, 271828);
        let (f2, _) = c2.coble_cubic().unwrap();
        assert!(f1.fs_distance(&f2) < 1e-8, "{:e}", f1.fs_distance(&f2));
    }

    #[test]
    fn kummer_quartic_vanishes_on_fresh_samples() {
        let c = ctx();
        let (q, gap) = c.kummer_quartic().unwrap();
        assert!(gap > 1e3);
        for a in c.jacobian_samples("kummer-fresh", 50) {
            let p = c.phi2(&a);
            let v = q.evaluate(p.coords());
            assert!(v.norm() < 1e-7, "quartic residual {:e}", v.norm());
        }
    }

    #[test]
    fn kummer_polar_is_the_gauss_map() {
        // the polar image at a smooth quartic point annihilates the
        // tangent directions of the image surface
        let c = ctx();
        let (_q, _) = c.kummer_quartic().unwrap();
        let mut rng = rng_for(42, "gauss-map");
        let h = 1e-5;
        for _ in 0..10 {
            let a = random_point(c, &mut rng);
            if a.scale(2).is_zero() {
                continue;
            }
            let p = c.phi2(&a);
            let grad = match c.kummer_polar(&p) {
                Ok(g) => g,
                Err(_) => continue,
            };
            for dir in 0..2 {
                let mut zp = *a.rep();
                let mut zm = *a.rep();
                zp[dir] += C64::new(h, 0.0);
                zm[dir] -= C64::new(h, 0.0);
                // projective tangent direction via a finite difference of
                // normalized level-2 vectors
                let vp = c.phi2(&c.point(zp));
                let vm = c.phi2(&c.point(zm));
                let ip_p = vp.coords().dotc(p.coords());
                let ip_m = vm.coords().dotc(p.coords());
                let t = vp.coords() / ip_p - vm.coords() / ip_m;
                if t.norm() < 1e-9 {
                    continue;
                }
                let pairing: C64 = grad
                    .coords()
                    .iter()
                    .zip(t.iter())
                    .map(|(g, ti)| g * ti)
                    .sum();
                assert!(
                    pairing.norm() / t.norm() < 1e-6,
                    "polar image is not tangent-orthogonal: {:e}",
                    pairing.norm() / t.norm()
                );
            }
        }
    }

    #[test]
    fn degree3_evaluation_fit_is_not_unique() {
        // plain evaluation conditions admit many cubics through the surface
        let c = ctx();
        let samples: Vec<ProjPoint> = c
            .jacobian_samples("cubic-eval", 200)
            .iter()
            .map(|a| c.phi3(a))
            .collect();
        assert!(matches!(
            fit_hypersurface(&samples, 3, false, RANK_TOL),
            Err(Error::NullspaceNotOneDimensional(_))
        ));
    }

    #[test]
    fn heisenberg_translation_is_projective_linear() {
        let c = ctx();
        let three = torsion_points(c.periods(), 3);
        let mut rng = rng_for(42, "heis");
        for e in three.iter().filter(|e| !e.is_zero()).take(4) {
            let m = c.heisenberg_matrix(e).unwrap();
            for _ in 0..20 {
                let z = random_point(c, &mut rng);
                let lhs = c.phi3(&z.add(e).unwrap());
                let rhs = ProjPoint::new(&*m * c.phi3(&z).coords());
                assert!(lhs.fs_distance(&rhs) < 1e-7, "{:e}", lhs.fs_distance(&rhs));
            }
        }
    }

    #[test]
    fn heisenberg_matrices_compose_projectively() {
        let c = ctx();
        let three = torsion_points(c.periods(), 3);
        let mut rng = rng_for(42, "heis-compose");
        for _ in 0..6 {
            let e = &three[rng.random_range(0..three.len())];
            let f = &three[rng.random_range(0..three.len())];
            let me = c.heisenberg_matrix(e).unwrap();
            let mf = c.heisenberg_matrix(f).unwrap();
            let mef = c.heisenberg_matrix(&e.add(f).unwrap()).unwrap();
            let prod = &*me * &*mf;
            // projectively proportional: compare as points in matrix space
            let p1 = ProjPoint::from_slice(prod.as_slice());
            let p2 = ProjPoint::from_slice(mef.as_slice());
            assert!(p1.fs_distance(&p2) < 1e-6, "{:e}", p1.fs_distance(&p2));
        }
    }

    #[test]
    fn coble_cubic_is_heisenberg_invariant() {
        let c = ctx();
        let (f, _) = c.coble_cubic().unwrap();
        let three = torsion_points(c.periods(), 3);
        for e in [&three[1], &three[9], &three[40]] {
            let m = c.heisenberg_matrix(e).unwrap();
            let g = f.substitute(&m);
            assert!(f.fs_distance(&g) < 1e-6, "{:e}", f.fs_distance(&g));
        }
    }

    #[test]
    fn iota_splitting_gives_cone_structure() {
        let c = ctx();
        let zero = c.zero();
        let split = c.iota_splitting(&zero).unwrap();
        assert_eq!(split.three_space.dim_proj(), 3);
        // projection from the vertex identifies involute pairs
        for (p, w) in c.theta_translate_samples(&zero, 10) {
            let q = c.periods().curve.involute(p);
            let alpha_q = c.periods().abel_jacobi(&q).unwrap();
            let wq = c.point(alpha_q + zero.rep());
            let pr1 = split.project(&c.phi3(&w));
            let pr2 = split.project(&c.phi3(&wq));
            assert!(pr1.fs_distance(&pr2) < 1e-7, "{:e}", pr1.fs_distance(&pr2));
        }
    }

    #[test]
    fn iota_splitting_works_at_nonzero_torsion() {
        let c = ctx();
        let pd = c.periods();
        let third = C64::new(1.0 / 3.0, 0.0);
        let a = c.point(pd.lattice_vector(&[0, 1, 1, 0]) * third);
        let split = c.iota_splitting(&a).unwrap();
        assert_eq!(split.three_space.dim_proj(), 3);
        assert!(split.span.point_distance(&split.vertex) < 1e-7);
    }

    #[test]
    fn projected_translate_lies_on_twisted_cubic() {
        let c = ctx();
        let zero = c.zero();
        let split = c.iota_splitting(&zero).unwrap();
        // parameterize projected points by the canonical coordinate and fit
        // the rational normal curve gauge
        let u3 = split.three_space.basis();
        let samples: Vec<(C64, ProjPoint)> = c
            .theta_translate_samples(&zero, 12)
            .iter()
            .map(|(p, w)| {
                let x = match p {
                    CurvePoint::Affine { x, .. } => *x,
                    CurvePoint::Infinity { .. } => unreachable!("generic samples"),
                };
                (x, ProjPoint::new(u3.adjoint() * c.phi3(w).coords()))
            })
            .collect();
        let pairs: Vec<(ProjPoint, ProjPoint)> = samples
            .iter()
            .map(|(x, p)| {
                let moments =
                    ProjPoint::from_slice(&[C64::new(1.0, 0.0), *x, x * x, x * x * x]);
                (moments, p.clone())
            })
            .collect();
        let g = fit_projective_map(&pairs, 4).unwrap();
        let ginv = g.clone().try_inverse().expect("gauge invertible");
        // fresh samples: catalecticant of the normalized coordinates drops rank
        for (p, w) in c.theta_translate_samples(&zero, 40).iter().skip(20) {
            let _ = p;
            let v = &ginv * (u3.adjoint() * c.phi3(w).coords());
            let cat = DMatrix::from_fn(2, 3, |i, j| v[i + j]);
            let svd = cat.svd(false, false);
            let ratio = svd.singular_values[1] / svd.singular_values[0];
            assert!(ratio < 1e-6, "catalecticant rank-1 violation {ratio:e}");
        }
    }
}
