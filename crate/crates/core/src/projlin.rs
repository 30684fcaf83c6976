//! Numerically stable projective linear algebra over ℂ.
//!
//! Points of ℙ^N are unit vectors with a phase convention, subspaces are
//! orthonormal bases of their affine cones, and hypersurfaces are dense
//! coefficient vectors over a fixed graded-lex monomial order.  All rank
//! decisions go through singular values with explicit relative tolerances.

use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Version tag of the monomial order baked into serialized coefficients.
pub const MONOMIAL_ORDER_VERSION: &str = "grlex-1";

/// Default relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// A point of ℙ^N: unit-norm homogeneous coordinates, first coordinate of
/// modulus above `1e-12` rotated to the positive real axis.
#[derive(Clone, Debug)]
pub struct ProjPoint {
    v: DVector<C64>,
}

impl ProjPoint {
    pub fn new(v: DVector<C64>) -> Self {
        let mut v = v;
        let n = v.norm();
        assert!(n > 0.0, "cannot projectivize the zero vector");
        v /= C64::new(n, 0.0);
        if let Some(k) = (0..v.len()).find(|&k| v[k].norm() > 1e-12) {
            let phase = v[k] / C64::new(v[k].norm(), 0.0);
            v /= phase;
        }
        ProjPoint { v }
    }

    pub fn from_slice(c: &[C64]) -> Self {
        Self::new(DVector::from_column_slice(c))
    }

    pub fn dim(&self) -> usize {
        self.v.len() - 1
    }

    pub fn coords(&self) -> &DVector<C64> {
        &self.v
    }

    /// Fubini-Study distance `sqrt(1 - |<p,q>|^2)`, the sine of the angle
    /// between the two lines.  Computed as the norm of the projection
    /// residual, which stays accurate near zero.
    pub fn fs_distance(&self, other: &ProjPoint) -> f64 {
        let ip = self.v.dotc(&other.v);
        (&other.v - &self.v * ip).norm().min(1.0)
    }
}

/// A projective k-plane in ℙ^N stored as an orthonormal basis (k+1 columns)
/// of its affine cone.  `dim_proj == -1` encodes the empty subspace.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: DMatrix<C64>,
}

impl Subspace {
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// Projective dimension; -1 for the empty subspace.
    pub fn dim_proj(&self) -> i64 {
        self.basis.ncols() as i64 - 1
    }

    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    /// Distance from a projective point to this subspace: the norm of the
    /// component of `p` orthogonal to the cone (sine of the principal angle).
    pub fn point_distance(&self, p: &ProjPoint) -> f64 {
        if self.basis.ncols() == 0 {
            return 1.0;
        }
        let coeff = self.basis.adjoint() * p.coords();
        let proj = &self.basis * coeff;
        (p.coords() - proj).norm()
    }

    /// Orthogonal projection of `p` into the subspace, as coefficients in the
    /// stored basis.
    pub fn project_coords(&self, p: &ProjPoint) -> DVector<C64> {
        self.basis.adjoint() * p.coords()
    }

    /// Operator-norm distance between the orthogonal projectors of two
    /// subspaces; 0 iff they agree as subspaces.
    pub fn projector_distance(&self, other: &Subspace) -> f64 {
        assert_eq!(self.ambient, other.ambient);
        let n = self.ambient + 1;
        let pa = &self.basis * self.basis.adjoint();
        let pb = &other.basis * other.basis.adjoint();
        let d = pa - pb;
        // operator norm = largest singular value
        DMatrix::from_fn(n, n, |i, j| d[(i, j)])
            .svd(false, false)
            .singular_values
            .max()
    }

    /// The single point of a zero-dimensional subspace.
    pub fn point(&self) -> ProjPoint {
        assert_eq!(self.dim_proj(), 0, "subspace is not a single point");
        ProjPoint::new(self.basis.column(0).into_owned())
    }
}

/// Linear span of a set of projective points.
///
/// Keeps the singular directions with `sigma_i > rank_tol * sigma_1`.
pub fn span(points: &[ProjPoint], rank_tol: f64) -> Subspace {
    assert!(!points.is_empty());
    let n = points[0].dim() + 1;
    let m = DMatrix::from_fn(n, points.len(), |i, j| points[j].coords()[i]);
    let svd = m.svd(true, false);
    let s = &svd.singular_values;
    let rank = (0..s.len()).take_while(|&i| s[i] > rank_tol * s[0]).count();
    let u = svd.u.unwrap();
    Subspace {
        ambient: n - 1,
        basis: u.columns(0, rank).into_owned(),
    }
}

/// Intersection of subspaces of a common ambient space.
///
/// Stacks the orthogonal-complement projectors `I - U_k U_k^H` and takes the
/// numerical nullspace: right singular vectors with
/// `sigma_j < rank_tol * sigma_1`.
pub fn intersect(subspaces: &[&Subspace], rank_tol: f64) -> Subspace {
    assert!(!subspaces.is_empty());
    let ambient = subspaces[0].ambient;
    let n = ambient + 1;
    for s in subspaces {
        assert_eq!(s.ambient, ambient, "ambient dimensions differ");
    }
    let mut stacked = DMatrix::<C64>::zeros(n * subspaces.len(), n);
    for (k, s) in subspaces.iter().enumerate() {
        let proj = DMatrix::<C64>::identity(n, n) - &s.basis * s.basis.adjoint();
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&proj);
    }
    let svd = stacked.svd(false, true);
    let s = &svd.singular_values;
    let vt = svd.v_t.unwrap();
    let smax = s.max();
    let mut cols = Vec::new();
    for j in 0..s.len() {
        if s[j] < rank_tol * smax {
            cols.push(vt.row(j).adjoint());
        }
    }
    let mut basis = DMatrix::<C64>::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        basis.set_column(j, c);
    }
    // singular vectors of distinct sigmas are already orthonormal
    Subspace { ambient, basis }
}

/// Best single-point intersection of subspaces: the direction minimizing the
/// sum of squared distances to all cones, together with its residual and the
/// residual of the second-best direction (small second residual signals an
/// intersection of positive dimension).
pub fn intersect_point(subspaces: &[&Subspace]) -> (ProjPoint, f64, f64) {
    assert!(!subspaces.is_empty());
    let ambient = subspaces[0].ambient;
    let n = ambient + 1;
    let mut stacked = DMatrix::<C64>::zeros(n * subspaces.len(), n);
    for (k, s) in subspaces.iter().enumerate() {
        let proj = DMatrix::<C64>::identity(n, n) - &s.basis * s.basis.adjoint();
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&proj);
    }
    let svd = stacked.svd(false, true);
    let s = &svd.singular_values;
    let vt = svd.v_t.unwrap();
    let last = s.len() - 1;
    let p = ProjPoint::new(vt.row(last).adjoint());
    (p, s[last], s[last - 1])
}

/// Exponent vectors of the degree-`d` monomials in `m` variables, graded-lex
/// with variable 0 most significant.  The order is part of the on-disk format
/// and must never change (see [`MONOMIAL_ORDER_VERSION`]).
pub fn monomials(m: usize, d: usize) -> Vec<Vec<u8>> {
    fn rec(m: usize, d: usize, out: &mut Vec<Vec<u8>>, prefix: &mut Vec<u8>) {
        if m == 1 {
            prefix.push(d as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e as u8);
            rec(m - 1, d - e, out, prefix);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, d, &mut out, &mut Vec::new());
    out
}

/// Dense coefficients of a degree-`d` form in `m` variables, unit norm, in
/// the graded-lex monomial order of [`monomials`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormCoefficients {
    pub degree: usize,
    pub vars: usize,
    #[serde(with = "crate::projlin::cvec_serde")]
    pub coeffs: Vec<C64>,
    pub monomial_order: String,
}

pub(crate) mod cvec_serde {
    use crate::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.iter().map(|p| C64::new(p[0], p[1])).collect())
    }
}

impl FormCoefficients {
    fn new(degree: usize, vars: usize, coeffs: Vec<C64>) -> Self {
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let coeffs = coeffs.iter().map(|c| c / norm).collect();
        FormCoefficients {
            degree,
            vars,
            coeffs,
            monomial_order: MONOMIAL_ORDER_VERSION.to_string(),
        }
    }

    pub fn evaluate(&self, x: &DVector<C64>) -> C64 {
        let mons = monomials(self.vars, self.degree);
        let pows = power_table(x, self.degree);
        let mut acc = C64::new(0.0, 0.0);
        for (c, e) in self.coeffs.iter().zip(mons.iter()) {
            acc += c * mono_eval(&pows, e);
        }
        acc
    }

    /// Gradient vector (∂F/∂X_0, ..., ∂F/∂X_{m-1}) at `x`.
    pub fn gradient(&self, x: &DVector<C64>) -> DVector<C64> {
        let mons = monomials(self.vars, self.degree);
        let pows = power_table(x, self.degree);
        let mut g = DVector::<C64>::zeros(self.vars);
        for (c, e) in self.coeffs.iter().zip(mons.iter()) {
            for j in 0..self.vars {
                if e[j] > 0 {
                    let mut e2 = e.clone();
                    e2[j] -= 1;
                    g[j] += c * C64::new(e[j] as f64, 0.0) * mono_eval(&pows, &e2);
                }
            }
        }
        g
    }

    /// Coefficients of `G(x) = F(M x)` for a linear substitution `M`.
    ///
    /// Exact multinomial expansion, so Heisenberg invariance can be tested
    /// without resampling noise.
    pub fn substitute(&self, m: &DMatrix<C64>) -> FormCoefficients {
        assert_eq!(m.nrows(), self.vars);
        assert_eq!(m.ncols(), self.vars);
        let mons = monomials(self.vars, self.degree);
        let index: std::collections::HashMap<&[u8], usize> = mons
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_slice(), i))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); mons.len()];
        // expand each source monomial prod_j (row_j . x)^{e_j}
        for (c, e) in self.coeffs.iter().zip(mons.iter()) {
            let mut terms: Vec<(Vec<u8>, C64)> = vec![(vec![0u8; self.vars], *c)];
            for (j, &ej) in e.iter().enumerate() {
                for _ in 0..ej {
                    let mut next: std::collections::HashMap<Vec<u8>, C64> =
                        std::collections::HashMap::new();
                    for (exp, coeff) in &terms {
                        for k in 0..self.vars {
                            let mk = m[(j, k)];
                            if mk.norm_sqr() == 0.0 {
                                continue;
                            }
                            let mut e2 = exp.clone();
                            e2[k] += 1;
                            *next.entry(e2).or_insert(C64::new(0.0, 0.0)) += coeff * mk;
                        }
                    }
                    terms = next.into_iter().collect();
                }
            }
            for (exp, coeff) in terms {
                out[index[exp.as_slice()]] += coeff;
            }
        }
        FormCoefficients::new(self.degree, self.vars, out)
    }

    /// Fubini-Study distance between coefficient vectors, i.e. projective
    /// distance of the two hypersurfaces in coefficient space.
    pub fn fs_distance(&self, other: &FormCoefficients) -> f64 {
        ProjPoint::from_slice(&self.coeffs).fs_distance(&ProjPoint::from_slice(&other.coeffs))
    }
}

fn power_table(x: &DVector<C64>, d: usize) -> Vec<Vec<C64>> {
    (0..x.len())
        .map(|j| {
            let mut p = Vec::with_capacity(d + 1);
            p.push(C64::new(1.0, 0.0));
            for k in 1..=d {
                let prev = p[k - 1];
                p.push(prev * x[j]);
            }
            p
        })
        .collect()
}

fn mono_eval(pows: &[Vec<C64>], e: &[u8]) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for (j, &ej) in e.iter().enumerate() {
        if ej > 0 {
            acc *= pows[j][ej as usize];
        }
    }
    acc
}

/// Fit the unique degree-`degree` hypersurface through the samples.
///
/// With `jet_conditions` set, each sample contributes its `m` gradient rows
/// instead of a plain evaluation row (Euler's relation then forces the value
/// to vanish as well).  Returns the coefficients and the uniqueness gap
/// `sigma_{last-1} / sigma_last`; fails with
/// [`Error::NullspaceNotOneDimensional`] when the gap is below 10.
pub fn fit_hypersurface(
    samples: &[ProjPoint],
    degree: usize,
    jet_conditions: bool,
    _rank_tol: f64,
) -> Result<(FormCoefficients, f64)> {
    let vars = samples[0].dim() + 1;
    let mons = monomials(vars, degree);
    let ncols = mons.len();
    let rows_per = if jet_conditions { vars } else { 1 };
    assert!(
        samples.len() * rows_per >= ncols + 5,
        "need at least {} conditions for {} monomials",
        ncols + 5,
        ncols
    );
    let mut m = DMatrix::<C64>::zeros(samples.len() * rows_per, ncols);
    for (i, p) in samples.iter().enumerate() {
        let pows = power_table(p.coords(), degree);
        if jet_conditions {
            for j in 0..vars {
                for (k, e) in mons.iter().enumerate() {
                    if e[j] > 0 {
                        let mut e2 = e.clone();
                        e2[j] -= 1;
                        m[(i * vars + j, k)] =
                            C64::new(e[j] as f64, 0.0) * mono_eval(&pows, &e2);
                    }
                }
            }
        } else {
            for (k, e) in mons.iter().enumerate() {
                m[(i, k)] = mono_eval(&pows, e);
            }
        }
    }
    let svd = m.svd(false, true);
    let s = &svd.singular_values;
    let vt = svd.v_t.unwrap();
    let last = s.len() - 1;
    let gap = s[last - 1] / s[last].max(f64::MIN_POSITIVE);
    if gap < 10.0 {
        return Err(Error::NullspaceNotOneDimensional(gap));
    }
    let coeffs: Vec<C64> = vt.row(last).adjoint().iter().copied().collect();
    Ok((FormCoefficients::new(degree, vars, coeffs), gap))
}

/// Polar (gradient) map of a form at a point.
///
/// Errors with [`Error::IndeterminacyPoint`] when the gradient norm is below
/// `1e-10` relative to the natural scale, which signals the base locus.
pub fn polar_map(f: &FormCoefficients, p: &ProjPoint) -> Result<ProjPoint> {
    assert!(f.degree >= 2);
    let g = f.gradient(p.coords());
    let n = g.norm();
    if n < 1e-10 {
        return Err(Error::IndeterminacyPoint(n));
    }
    Ok(ProjPoint::new(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(cs: &[(f64, f64)]) -> ProjPoint {
        ProjPoint::from_slice(&cs.iter().map(|&(r, i)| C64::new(r, i)).collect::<Vec<_>>())
    }

    #[test]
    fn span_of_repeated_point_is_zero_dimensional() {
        let p = pt(&[(1.0, 0.5), (0.3, -2.0), (0.0, 0.0)]);
        let s = span(&[p.clone(), p.clone(), p.clone()], RANK_TOL);
        assert_eq!(s.dim_proj(), 0);
        assert!(s.point_distance(&p) < 1e-12);
    }

    #[test]
    fn intersect_is_idempotent() {
        let pts: Vec<ProjPoint> = (0..3)
            .map(|k| {
                pt(&[
                    (k as f64 + 1.0, 0.2 * k as f64),
                    (1.0, -(k as f64)),
                    (0.5 * k as f64, 1.0),
                    (1.0, 1.0),
                    (0.0, 2.0 - k as f64),
                ])
            })
            .collect();
        let v = span(&pts, RANK_TOL);
        let w = intersect(&[&v, &v], RANK_TOL);
        assert_eq!(w.dim_proj(), v.dim_proj());
        assert!(v.projector_distance(&w) < 1e-10);
    }

    #[test]
    fn generic_four_planes_in_p8_meet_in_a_point() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let pts: Vec<ProjPoint> = (0..5)
                .map(|_| {
                    ProjPoint::from_slice(
                        &(0..9)
                            .map(|_| {
                                C64::new(
                                    rng.random_range(-1.0..1.0),
                                    rng.random_range(-1.0..1.0),
                                )
                            })
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            span(&pts, RANK_TOL)
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        assert_eq!(a.dim_proj(), 4);
        assert_eq!(b.dim_proj(), 4);
        let meet = intersect(&[&a, &b], 1e-6);
        assert_eq!(meet.dim_proj(), 0, "4 + 4 - 8 = 0");
        // and order does not matter
        let meet2 = intersect(&[&b, &a], 1e-6);
        assert!(meet.projector_distance(&meet2) < 1e-10);
    }

    #[test]
    fn generic_planes_in_p3_meet_in_a_line() {
        // two generic 2-planes in P^3 intersect in dimension 2+2-3 = 1
        let mk = |seed: u64| {
            let pts: Vec<ProjPoint> = (0..3)
                .map(|k| {
                    let s = seed as f64 + k as f64;
                    pt(&[
                        (s.sin(), s.cos()),
                        ((2.0 * s).sin(), 0.3),
                        (1.0, (3.0 * s).cos()),
                        (0.7 * s.cos(), -1.0),
                    ])
                })
                .collect();
            span(&pts, RANK_TOL)
        };
        let a = mk(1);
        let b = mk(40);
        assert_eq!(a.dim_proj(), 2);
        assert_eq!(b.dim_proj(), 2);
        assert_eq!(intersect(&[&a, &b], 1e-6).dim_proj(), 1);
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(9, 3).len(), 165);
        assert_eq!(monomials(4, 4).len(), 35);
        assert_eq!(monomials(2, 4).len(), 5);
        // graded-lex leads with the pure power of the first variable
        assert_eq!(monomials(3, 2)[0], vec![2, 0, 0]);
        assert_eq!(monomials(3, 2).last().unwrap(), &vec![0, 0, 2]);
    }

    #[test]
    fn polar_of_sum_of_cubes_fixes_coordinate_points() {
        // F = sum X_i^3: gradient at e_i is proportional to e_i
        let vars = 4;
        let mons = monomials(vars, 3);
        let coeffs: Vec<C64> = mons
            .iter()
            .map(|e| {
                if e.iter().any(|&x| x == 3) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let f = FormCoefficients::new(3, vars, coeffs);
        for i in 0..vars {
            let mut v = vec![C64::new(0.0, 0.0); vars];
            v[i] = C64::new(1.0, 0.0);
            let p = ProjPoint::from_slice(&v);
            let q = polar_map(&f, &p).unwrap();
            assert!(p.fs_distance(&q) < 1e-12);
        }
    }

    #[test]
    fn euler_identity_holds() {
        let vars = 5;
        let mons = monomials(vars, 3);
        let coeffs: Vec<C64> = (0..mons.len())
            .map(|k| C64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let f = FormCoefficients::new(3, vars, coeffs);
        for t in 0..20 {
            let x = DVector::from_fn(vars, |i, _| {
                C64::new(
                    ((t * 7 + i) as f64 * 0.31).sin(),
                    ((t * 3 + i) as f64 * 0.17).cos(),
                )
            });
            let lhs = f.gradient(&x).dot(&x); // plain bilinear sum, not hermitian
            let rhs = C64::new(3.0, 0.0) * f.evaluate(&x);
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn substitute_matches_pointwise_evaluation() {
        let vars = 3;
        let mons = monomials(vars, 3);
        let coeffs: Vec<C64> = (0..mons.len())
            .map(|k| C64::new((k as f64).cos(), 0.5 * (k as f64).sin()))
            .collect();
        let f = FormCoefficients::new(3, vars, coeffs);
        let m = DMatrix::from_fn(vars, vars, |i, j| {
            C64::new(((i * 3 + j) as f64 * 0.9).sin(), ((i + 2 * j) as f64 * 0.4).cos())
        });
        let g = f.substitute(&m);
        for t in 0..10 {
            let x = DVector::from_fn(vars, |i, _| {
                C64::new(((t + i) as f64 * 0.23).cos(), ((t * i) as f64 * 0.11).sin())
            });
            let lhs = g.evaluate(&x);
            let rhs = f.evaluate(&(&m * &x));
            // substitute() renormalizes, so compare projectively
            let ratio = lhs / rhs;
            let lhs2 = g.evaluate(&DVector::from_fn(vars, |i, _| {
                C64::new(((t + i) as f64 * 0.61).sin(), 0.2)
            }));
            let rhs2 = f.evaluate(&(&m * &DVector::from_fn(vars, |i, _| {
                C64::new(((t + i) as f64 * 0.61).sin(), 0.2)
            })));
            let ratio2 = lhs2 / rhs2;
            assert!((ratio - ratio2).norm() < 1e-9 * ratio.norm());
        }
    }

    proptest! {
        #[test]
        fn fs_distance_is_symmetric_and_faithful(
            a in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 5),
            b in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 5),
            scale_re in 0.1f64..3.0,
            scale_im in -2.0f64..2.0,
        ) {
            let va: Vec<C64> = a.iter().map(|&(r, i)| C64::new(r, i)).collect();
            let vb: Vec<C64> = b.iter().map(|&(r, i)| C64::new(r, i)).collect();
            prop_assume!(va.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3);
            prop_assume!(vb.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3);
            let pa = ProjPoint::from_slice(&va);
            let pb = ProjPoint::from_slice(&vb);
            prop_assert!((pa.fs_distance(&pb) - pb.fs_distance(&pa)).abs() < 1e-12);
            // rescaling by a nonzero complex number does not move the point
            let lambda = C64::new(scale_re, scale_im);
            let scaled: Vec<C64> = va.iter().map(|c| c * lambda).collect();
            prop_assert!(pa.fs_distance(&ProjPoint::from_slice(&scaled)) < 1e-7);
        }
    }
}
