//! Riemann theta functions with rational characteristics on a genus-2
//! period matrix, their partial derivatives, and the level-n section bases
//! behind the |2Θ| and |3Θ| embeddings.
//!
//! The lattice sum is truncated at a radius derived from the Gaussian tail
//! bound; summation order is fixed so results are bit-identical across runs.

use crate::{Error, Result, C64, PI_I, TWO_PI_I};
use nalgebra::{Matrix2, Vector2};

/// A rational characteristic: two 2-vectors with components in units of
/// 1/12, reduced to [0, 1).  Denominators 1, 2, 3, 4, 6 and 12 are exactly
/// representable, which covers the half characteristics and every level
/// basis up to four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ThetaChar {
    /// numerators of the top characteristic, in twelfths, each in 0..12
    pub a: [u8; 2],
    /// numerators of the bottom characteristic, in twelfths
    pub b: [u8; 2],
}

impl ThetaChar {
    pub const ZERO: ThetaChar = ThetaChar { a: [0, 0], b: [0, 0] };

    /// Characteristic with entries `a/den`, `b/den` reduced mod 1.
    pub fn from_num_den(a: [i32; 2], b: [i32; 2], den: u32) -> Self {
        assert!(matches!(den, 1 | 2 | 3 | 4 | 6 | 12), "denominator must divide 12");
        let f = 12 / den as i32;
        let red = |x: i32| (((x * f) % 12 + 12) % 12) as u8;
        ThetaChar {
            a: [red(a[0]), red(a[1])],
            b: [red(b[0]), red(b[1])],
        }
    }

    /// The sixteen half-integer characteristics.
    pub fn half_characteristics() -> Vec<ThetaChar> {
        let mut out = Vec::with_capacity(16);
        for a0 in 0..2 {
            for a1 in 0..2 {
                for b0 in 0..2 {
                    for b1 in 0..2 {
                        out.push(ThetaChar::from_num_den([a0, a1], [b0, b1], 2));
                    }
                }
            }
        }
        out
    }

    /// Parity of a half-integer characteristic: odd iff `4 a·b` is odd.
    pub fn is_odd(&self) -> bool {
        assert!(self.a.iter().chain(self.b.iter()).all(|&x| x % 6 == 0));
        let dot = (self.a[0] / 6) * (self.b[0] / 6) + (self.a[1] / 6) * (self.b[1] / 6);
        dot % 2 == 1
    }

    pub fn a_f64(&self) -> Vector2<f64> {
        Vector2::new(self.a[0] as f64 / 12.0, self.a[1] as f64 / 12.0)
    }

    pub fn b_f64(&self) -> Vector2<f64> {
        Vector2::new(self.b[0] as f64 / 12.0, self.b[1] as f64 / 12.0)
    }
}

/// A partial-derivative request `∂^{j0}_{z0} ∂^{j1}_{z1}`, total order ≤ 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JetRequest {
    pub orders: (u8, u8),
}

impl JetRequest {
    pub fn new(j0: u8, j1: u8) -> Result<Self> {
        if (j0 + j1) as usize > 4 {
            return Err(Error::JetOrderTooLarge((j0 + j1) as usize));
        }
        Ok(JetRequest { orders: (j0, j1) })
    }

    pub const VALUE: JetRequest = JetRequest { orders: (0, 0) };

    pub fn total(&self) -> usize {
        (self.orders.0 + self.orders.1) as usize
    }
}

/// Default truncation tolerance of the lattice sum.
pub const THETA_TOL: f64 = 1e-12;

fn smallest_eigenvalue_2x2(y: &Matrix2<f64>) -> f64 {
    let tr = y[(0, 0)] + y[(1, 1)];
    let det = y[(0, 0)] * y[(1, 1)] - y[(0, 1)] * y[(1, 0)];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 - disc
}

/// Truncation radius from `exp(-pi lambda_min r^2) < tol`, plus margin for
/// the shifted center and the polynomial factors of jets.
fn truncation_radius(y: &Matrix2<f64>, tol: f64) -> Result<usize> {
    let lam = smallest_eigenvalue_2x2(y);
    assert!(lam > 0.0, "Im(Omega) must be positive definite");
    let r = (((1.0 / tol).ln() / (std::f64::consts::PI * lam)).sqrt()).ceil() as usize + 2;
    if r > 64 {
        return Err(Error::RadiusOverflow(r));
    }
    Ok(r)
}

/// Evaluate `∂^jet θ[char](z, Ω)` by the truncated lattice sum
///
/// ```text
///   θ[a,b](z, Ω) = Σ_m exp( πi (m+a)ᵀΩ(m+a) + 2πi (m+a)ᵀ(z+b) )
/// ```
///
/// The summation box is centered at the integer point minimizing the
/// Gaussian exponent, so arguments a few cells away from the fundamental
/// domain cost nothing extra.
pub fn theta_jet(
    ch: &ThetaChar,
    z: &Vector2<C64>,
    omega: &Matrix2<C64>,
    jet: JetRequest,
    tol: f64,
) -> Result<C64> {
    let y = Matrix2::new(
        omega[(0, 0)].im,
        omega[(0, 1)].im,
        omega[(1, 0)].im,
        omega[(1, 1)].im,
    );
    let r = truncation_radius(&y, tol)? as i64;
    let a = ch.a_f64();
    let b = ch.b_f64();
    // center the box at the maximum of the Gaussian envelope:
    // minimize (m+a)ᵀ Y (m+a) + 2 (m+a)ᵀ Im z   =>   m + a = -Y⁻¹ Im z
    let yinv = y.try_inverse().expect("Im(Omega) invertible");
    let zim = Vector2::new(z[0].im, z[1].im);
    let center = -yinv * zim - a;
    let c0 = center[0].round() as i64;
    let c1 = center[1].round() as i64;
    let (j0, j1) = jet.orders;
    let mut acc = C64::new(0.0, 0.0);
    for m0 in (c0 - r)..=(c0 + r) {
        for m1 in (c1 - r)..=(c1 + r) {
            let n0 = C64::new(m0 as f64 + a[0], 0.0);
            let n1 = C64::new(m1 as f64 + a[1], 0.0);
            let q = n0 * n0 * omega[(0, 0)]
                + n0 * n1 * (omega[(0, 1)] + omega[(1, 0)])
                + n1 * n1 * omega[(1, 1)];
            let lin = n0 * (z[0] + C64::new(b[0], 0.0)) + n1 * (z[1] + C64::new(b[1], 0.0));
            let mut term = (PI_I * q + TWO_PI_I * lin).exp();
            for _ in 0..j0 {
                term *= TWO_PI_I * n0;
            }
            for _ in 0..j1 {
                term *= TWO_PI_I * n1;
            }
            acc += term;
        }
    }
    Ok(acc)
}

/// Plain theta value.
pub fn theta(ch: &ThetaChar, z: &Vector2<C64>, omega: &Matrix2<C64>, tol: f64) -> Result<C64> {
    theta_jet(ch, z, omega, JetRequest::VALUE, tol)
}

/// The quasi-periodicity factor `c` with
/// `θ[a,b](z + Ω m + n) = c · θ[a,b](z)`.
pub fn periodicity_factor(
    ch: &ThetaChar,
    z: &Vector2<C64>,
    omega: &Matrix2<C64>,
    m: &Vector2<i64>,
    n: &Vector2<i64>,
) -> C64 {
    let a = ch.a_f64();
    let b = ch.b_f64();
    let mf = Vector2::new(m[0] as f64, m[1] as f64);
    let nf = Vector2::new(n[0] as f64, n[1] as f64);
    let m_omega_m = C64::new(mf[0], 0.0) * C64::new(mf[0], 0.0) * omega[(0, 0)]
        + C64::new(mf[0], 0.0) * C64::new(mf[1], 0.0) * (omega[(0, 1)] + omega[(1, 0)])
        + C64::new(mf[1], 0.0) * C64::new(mf[1], 0.0) * omega[(1, 1)];
    let m_z = C64::new(mf[0], 0.0) * z[0] + C64::new(mf[1], 0.0) * z[1];
    let char_phase = a.dot(&nf) - b.dot(&mf);
    (TWO_PI_I * C64::new(char_phase, 0.0) - PI_I * m_omega_m - TWO_PI_I * m_z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_omega() -> Matrix2<C64> {
        // a hand-picked Riemann matrix: symmetric, Im positive definite
        Matrix2::new(
            C64::new(0.25, 1.10),
            C64::new(0.13, 0.35),
            C64::new(0.13, 0.35),
            C64::new(-0.40, 0.90),
        )
    }

    fn rand_z(rng: &mut ChaCha8Rng) -> Vector2<C64> {
        Vector2::new(
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        )
    }

    #[test]
    fn odd_characteristic_vanishes_at_origin() {
        let omega = sample_omega();
        let z0 = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut max_even = 0.0f64;
        for ch in ThetaChar::half_characteristics() {
            let v = theta(&ch, &z0, &omega, THETA_TOL).unwrap().norm();
            if !ch.is_odd() {
                max_even = max_even.max(v);
            }
        }
        assert!(max_even > 0.1);
        for ch in ThetaChar::half_characteristics() {
            if ch.is_odd() {
                let v = theta(&ch, &z0, &omega, THETA_TOL).unwrap().norm();
                assert!(v < 1e-10 * max_even, "odd theta constant {v:e}");
            }
        }
        // 6 odd / 10 even split
        let odds = ThetaChar::half_characteristics()
            .iter()
            .filter(|c| c.is_odd())
            .count();
        assert_eq!(odds, 6);
    }

    #[test]
    fn quasi_periodicity_holds() {
        let omega = sample_omega();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = ThetaChar::from_num_den([1, 0], [0, 1], 2);
        for _ in 0..20 {
            let z = rand_z(&mut rng);
            let m = Vector2::new(rng.random_range(-2..=2i64), rng.random_range(-2..=2i64));
            let n = Vector2::new(rng.random_range(-2..=2i64), rng.random_range(-2..=2i64));
            let shifted = Vector2::new(
                z[0] + omega[(0, 0)] * C64::new(m[0] as f64, 0.0)
                    + omega[(0, 1)] * C64::new(m[1] as f64, 0.0)
                    + C64::new(n[0] as f64, 0.0),
                z[1] + omega[(1, 0)] * C64::new(m[0] as f64, 0.0)
                    + omega[(1, 1)] * C64::new(m[1] as f64, 0.0)
                    + C64::new(n[1] as f64, 0.0),
            );
            let lhs = theta(&ch, &shifted, &omega, THETA_TOL).unwrap();
            let rhs =
                periodicity_factor(&ch, &z, &omega, &m, &n) * theta(&ch, &z, &omega, THETA_TOL).unwrap();
            assert!(
                (lhs - rhs).norm() < 1e-8 * lhs.norm().max(1e-8),
                "lhs {lhs} rhs {rhs}"
            );
        }
    }

    #[test]
    fn larger_radius_agrees() {
        // brute-force oracle: increasing the radius by 4 changes nothing
        let omega = sample_omega();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = ThetaChar::from_num_den([1, 2], [0, 1], 3);
        for _ in 0..5 {
            let z = rand_z(&mut rng);
            let v1 = theta(&ch, &z, &omega, THETA_TOL).unwrap();
            // tighter tolerance forces a bigger radius (+4 or more cells)
            let v2 = theta(&ch, &z, &omega, THETA_TOL * 1e-14).unwrap();
            assert!((v1 - v2).norm() < THETA_TOL * v1.norm().max(1.0) * 10.0);
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let omega = sample_omega();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ch = ThetaChar::from_num_den([1, 0], [1, 1], 2);
        let h = 1e-5;
        for _ in 0..20 {
            let z = rand_z(&mut rng);
            for dir in 0..2 {
                let jet = if dir == 0 {
                    JetRequest::new(1, 0).unwrap()
                } else {
                    JetRequest::new(0, 1).unwrap()
                };
                let d = theta_jet(&ch, &z, &omega, jet, THETA_TOL).unwrap();
                let mut zp = z;
                let mut zm = z;
                zp[dir] += C64::new(h, 0.0);
                zm[dir] -= C64::new(h, 0.0);
                let fd = (theta(&ch, &zp, &omega, THETA_TOL).unwrap()
                    - theta(&ch, &zm, &omega, THETA_TOL).unwrap())
                    / C64::new(2.0 * h, 0.0);
                assert!(
                    (d - fd).norm() < 1e-6 * d.norm().max(1.0),
                    "jet {d} fd {fd}"
                );
            }
        }
    }

    #[test]
    fn zero_jet_equals_value_and_even_odd_jets_vanish() {
        let omega = sample_omega();
        let z0 = Vector2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let even = ThetaChar::from_num_den([1, 0], [0, 1], 2);
        assert!(!even.is_odd());
        let v = theta(&even, &z0, &omega, THETA_TOL).unwrap();
        let j = theta_jet(&even, &z0, &omega, JetRequest::VALUE, THETA_TOL).unwrap();
        assert_eq!(v, j);
        for (a, b) in [(1u8, 0u8), (0, 1), (2, 1), (1, 2), (3, 0), (0, 3)] {
            let d = theta_jet(&even, &z0, &omega, JetRequest::new(a, b).unwrap(), THETA_TOL)
                .unwrap();
            assert!(d.norm() < 1e-9 * v.norm(), "odd-order jet {d}");
        }
    }

    #[test]
    fn flat_period_matrix_overflows_radius() {
        // tiny Im Omega forces an impossible truncation radius
        let omega = Matrix2::new(
            C64::new(0.1, 1e-3),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.2, 1e-3),
        );
        let z = Vector2::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.4));
        assert!(matches!(
            theta(&ThetaChar::ZERO, &z, &omega, THETA_TOL),
            Err(crate::Error::RadiusOverflow(_))
        ));
    }

    #[test]
    fn jet_order_capped() {
        assert!(JetRequest::new(3, 2).is_err());
        assert!(JetRequest::new(2, 2).is_ok());
    }
}
