//! The genus-2 hyperelliptic curve `y^2 = f(x)`, its branch data and basic
//! maps.
//!
//! `f` is squarefree of degree 5 or 6.  A marked Weierstrass point (one of
//! the roots of `f`, or the point at infinity for degree 5) serves as the
//! base point of the Abel-Jacobi map downstream.

use crate::projlin::ProjPoint;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Validated curve `y^2 = f(x)`.
#[derive(Clone, Debug)]
pub struct CurveSpec {
    coeffs: [C64; 7],
    degree: usize,
    /// Finite branch points (roots of `f`), sorted by (Re, Im).
    branch_points: Vec<C64>,
    eta_index: usize,
}

/// A point of the curve.  For degree 6 there are two points at infinity
/// (labelled by the sign of `y/x^3`); for degree 5 a single one, which is a
/// Weierstrass point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurvePoint {
    Affine { x: C64, y: C64 },
    Infinity { branch: u8 },
}

#[derive(Serialize, Deserialize)]
struct CurveSpecJson {
    f: Vec<[f64; 2]>,
    eta_index: usize,
}

impl CurveSpec {
    /// Validate coefficients and locate branch points.
    ///
    /// `coeffs[k]` is the coefficient of `x^k`; the leading one may be zero
    /// down to degree 5.  `eta_index` addresses a Weierstrass point: an index
    /// into the sorted branch points, or, for degree 5, the value
    /// `branch_points.len()` meaning the point at infinity.
    pub fn new(coeffs: [C64; 7], eta_index: usize) -> Result<Self> {
        let degree = (0..7).rev().find(|&k| coeffs[k].norm() > 0.0).unwrap_or(0);
        if !(5..=6).contains(&degree) {
            return Err(Error::BadDegree(degree));
        }
        let mut roots = polynomial_roots(&coeffs[..=degree]);
        roots.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .expect("roots are finite")
        });
        let scale = roots.iter().map(|r| r.norm()).fold(0.0f64, f64::max);
        let mut min_dist = f64::INFINITY;
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                min_dist = min_dist.min((roots[i] - roots[j]).norm());
            }
        }
        if min_dist <= 1e-8 * scale.max(1e-30) {
            return Err(Error::NotSquarefree(min_dist, scale));
        }
        let n_weierstrass = if degree == 5 {
            roots.len() + 1
        } else {
            roots.len()
        };
        if eta_index >= n_weierstrass {
            return Err(Error::BadEtaIndex(eta_index, n_weierstrass));
        }
        Ok(CurveSpec {
            coeffs,
            degree,
            branch_points: roots,
            eta_index,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[C64; 7] {
        &self.coeffs
    }

    pub fn branch_points(&self) -> &[C64] {
        &self.branch_points
    }

    pub fn eta_index(&self) -> usize {
        self.eta_index
    }

    /// The marked Weierstrass point.
    pub fn eta_point(&self) -> CurvePoint {
        if self.eta_index == self.branch_points.len() {
            CurvePoint::Infinity { branch: 0 }
        } else {
            CurvePoint::Affine {
                x: self.branch_points[self.eta_index],
                y: C64::new(0.0, 0.0),
            }
        }
    }

    pub fn f_eval(&self, x: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in (0..=self.degree).rev() {
            acc = acc * x + self.coeffs[k];
        }
        acc
    }

    pub fn f_prime(&self, x: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in (1..=self.degree).rev() {
            acc = acc * x + C64::new(k as f64, 0.0) * self.coeffs[k];
        }
        acc
    }

    /// Largest branch point modulus; the natural length scale of the x-plane.
    pub fn branch_scale(&self) -> f64 {
        self.branch_points
            .iter()
            .map(|b| b.norm())
            .fold(0.0f64, f64::max)
            .max(1e-12)
    }

    /// Check the defining equation to relative tolerance `1e-10` and return
    /// the point.
    pub fn point(&self, x: C64, y: C64) -> Result<CurvePoint> {
        let f = self.f_eval(x);
        let res = (y * y - f).norm();
        if res > 1e-10 * (1.0 + f.norm()) {
            return Err(Error::PointNotOnCurve(res));
        }
        Ok(CurvePoint::Affine { x, y })
    }

    /// The point above `x` on the sheet of the principal square root.
    pub fn lift(&self, x: C64, sheet: u8) -> CurvePoint {
        let y = self.f_eval(x).sqrt();
        CurvePoint::Affine {
            x,
            y: if sheet == 0 { y } else { -y },
        }
    }

    /// Hyperelliptic involution: `(x, y) -> (x, -y)`.  The infinite point is
    /// fixed for degree 5 and the two infinite branches swap for degree 6.
    pub fn involute(&self, p: CurvePoint) -> CurvePoint {
        match p {
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x, y: -y },
            CurvePoint::Infinity { branch } => {
                if self.degree == 5 {
                    CurvePoint::Infinity { branch: 0 }
                } else {
                    CurvePoint::Infinity { branch: 1 - branch }
                }
            }
        }
    }

    /// Whether `p` is a Weierstrass point (fixed by the involution).
    pub fn is_weierstrass(&self, p: &CurvePoint) -> bool {
        match *p {
            CurvePoint::Affine { y, .. } => y.norm() < 1e-8 * self.branch_scale().sqrt(),
            CurvePoint::Infinity { .. } => self.degree == 5,
        }
    }

    /// The degree-2 canonical map to ℙ¹: `[1 : x]`, infinite points to
    /// `[0 : 1]`.
    pub fn canonical_map(&self, p: &CurvePoint) -> ProjPoint {
        match *p {
            CurvePoint::Affine { x, .. } => {
                ProjPoint::from_slice(&[C64::new(1.0, 0.0), x])
            }
            CurvePoint::Infinity { .. } => {
                ProjPoint::from_slice(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CurveSpecJson {
            f: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            eta_index: self.eta_index,
        })
        .expect("curve serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: CurveSpecJson = serde_json::from_value(v.clone())?;
        let mut coeffs = [C64::new(0.0, 0.0); 7];
        for (k, p) in j.f.iter().take(7).enumerate() {
            coeffs[k] = C64::new(p[0], p[1]);
        }
        CurveSpec::new(coeffs, j.eta_index)
    }

    /// Stable content hash of the defining data, used to key period caches.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for c in &self.coeffs {
            feed(c.re);
            feed(c.im);
        }
        feed(self.eta_index as f64);
        h
    }
}

/// Default test fixture: `y^2 = x^5 - x` with the marked Weierstrass point
/// at `x = 0`.
pub fn default_curve() -> CurveSpec {
    let mut coeffs = [C64::new(0.0, 0.0); 7];
    coeffs[5] = C64::new(1.0, 0.0);
    coeffs[1] = C64::new(-1.0, 0.0);
    // sorted branch points of x^5 - x: [-1, -i, 0, i, 1]; x = 0 sits at index 2
    CurveSpec::new(coeffs, 2).expect("fixture is valid")
}

/// Roots of a complex polynomial via companion-matrix eigenvalues, polished
/// by Newton iterations.  The Schur iteration can stall on spectra with
/// exact symmetries (roots of unity), so it runs with a bounded iteration
/// count and falls back to Durand-Kerner.
pub fn polynomial_roots(coeffs: &[C64]) -> Vec<C64> {
    let d = coeffs.len() - 1;
    assert!(d >= 1);
    let lead = coeffs[d];
    let mut comp = DMatrix::<C64>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    let mut roots: Vec<C64> = match comp.try_schur(1e-14, 2000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..d).map(|i| t[(i, i)]).collect()
        }
        None => durand_kerner(coeffs),
    };
    // Newton polish; companion eigenvalues are good seeds
    let eval = |x: C64| {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for k in (1..=d).rev() {
            dp = dp * x + C64::new(k as f64, 0.0) * coeffs[k];
        }
        for k in (0..=d).rev() {
            p = p * x + coeffs[k];
        }
        (p, dp)
    };
    for r in roots.iter_mut() {
        for _ in 0..50 {
            let (p, dp) = eval(*r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *r -= step;
            if step.norm() < 1e-14 * (1.0 + r.norm()) {
                break;
            }
        }
    }
    roots
}

/// Durand-Kerner simultaneous iteration, started from a scrambled circle.
fn durand_kerner(coeffs: &[C64]) -> Vec<C64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d];
    let monic: Vec<C64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |x: C64| -> C64 {
        let mut p = C64::new(0.0, 0.0);
        for k in (0..=d).rev() {
            p = p * x + monic[k];
        }
        p
    };
    let radius = 1.0
        + monic
            .iter()
            .take(d)
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
    let mut roots: Vec<C64> = (0..d)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.354) / d as f64 + 0.4;
            C64::new(radius * phi.cos(), radius * phi.sin())
        })
        .collect();
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for i in 0..d {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..d {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn default_curve_branch_points() {
        let curve = default_curve();
        assert_eq!(curve.degree(), 5);
        let expected = [c(-1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        for (r, e) in curve.branch_points().iter().zip(expected.iter()) {
            assert!((r - e).norm() < 1e-12, "{r} vs {e}");
        }
        // every branch point is an honest root
        for r in curve.branch_points() {
            assert!(curve.f_eval(*r).norm() < 1e-12);
        }
        assert_eq!(
            curve.eta_point(),
            CurvePoint::Affine { x: c(0.0, 0.0), y: c(0.0, 0.0) }
        );
    }

    #[test]
    fn low_degree_is_rejected() {
        let mut coeffs = [c(0.0, 0.0); 7];
        coeffs[4] = c(1.0, 0.0); // x^4
        assert!(matches!(
            CurveSpec::new(coeffs, 0),
            Err(Error::BadDegree(4))
        ));
    }

    #[test]
    fn repeated_root_is_rejected() {
        // x^5 - 2x^4 + x^3 = x^3 (x-1)^2
        let mut coeffs = [c(0.0, 0.0); 7];
        coeffs[5] = c(1.0, 0.0);
        coeffs[4] = c(-2.0, 0.0);
        coeffs[3] = c(1.0, 0.0);
        assert!(matches!(
            CurveSpec::new(coeffs, 0),
            Err(Error::NotSquarefree(..))
        ));
    }

    #[test]
    fn bad_eta_index_is_rejected() {
        let mut coeffs = [c(0.0, 0.0); 7];
        coeffs[5] = c(1.0, 0.0);
        coeffs[1] = c(-1.0, 0.0);
        assert!(CurveSpec::new(coeffs, 5).is_ok()); // infinity, valid for deg 5
        assert!(matches!(
            CurveSpec::new(coeffs, 6),
            Err(Error::BadEtaIndex(6, 6))
        ));
    }

    #[test]
    fn involution_is_an_involution_and_fixes_weierstrass() {
        let curve = default_curve();
        for k in 0..100 {
            let x = c((k as f64 * 0.37).sin() * 1.8, (k as f64 * 0.73).cos() * 1.8);
            let p = curve.lift(x, (k % 2) as u8);
            let q = curve.involute(curve.involute(p));
            assert_eq!(p, q);
            match (p, curve.involute(p)) {
                (CurvePoint::Affine { y: y1, .. }, CurvePoint::Affine { y: y2, .. }) => {
                    assert!((y1 + y2).norm() < 1e-15);
                }
                _ => unreachable!(),
            }
        }
        let w = curve.lift(c(0.0, 0.0), 0);
        assert_eq!(curve.involute(w), w);
        assert!(curve.is_weierstrass(&w));
        let inf = CurvePoint::Infinity { branch: 0 };
        assert_eq!(curve.involute(inf), inf);
    }

    #[test]
    fn canonical_map_is_involution_invariant() {
        let curve = default_curve();
        for k in 0..100 {
            let x = c((k as f64 * 1.1).cos() * 2.0, (k as f64 * 0.61).sin());
            let p = curve.lift(x, 0);
            let v1 = curve.canonical_map(&p);
            let v2 = curve.canonical_map(&curve.involute(p));
            assert!(v1.fs_distance(&v2) < 1e-12);
        }
        let p = curve.point(c(2.0, 0.0), curve.f_eval(c(2.0, 0.0)).sqrt()).unwrap();
        let v = curve.canonical_map(&p);
        let expect = ProjPoint::from_slice(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(v.fs_distance(&expect) < 1e-12);
        let vinf = curve.canonical_map(&CurvePoint::Infinity { branch: 0 });
        assert!(vinf.fs_distance(&ProjPoint::from_slice(&[c(0.0, 0.0), c(1.0, 0.0)])) < 1e-15);
    }

    #[test]
    fn curve_equation_residual_bound() {
        let curve = default_curve();
        for k in 0..50 {
            let x = c((k as f64 * 0.21).sin() * 1.5, (k as f64 * 0.43).cos());
            if let CurvePoint::Affine { x, y } = curve.lift(x, 0) {
                assert!(curve.point(x, y).is_ok());
                assert!(curve.point(x, y + c(1e-3, 0.0)).is_err());
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let curve = default_curve();
        let v = curve.to_json();
        let back = CurveSpec::from_json(&v).unwrap();
        assert_eq!(back.degree(), curve.degree());
        assert_eq!(back.eta_index(), curve.eta_index());
        assert_eq!(back.content_hash(), curve.content_hash());
    }
}
