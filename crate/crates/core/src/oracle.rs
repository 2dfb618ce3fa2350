//! Independent reference solutions for rotationally symmetric problems on
//! the unit sphere, used to check the surface solver from a different route.
//!
//! For a graph depending only on the polar angle, the maximality condition
//! reduces to a conserved flux: sin(t) u'(t) / sqrt(1 - u'(t)^2) = c, so
//! u'(t) = c / sqrt(sin(t)^2 + c^2) and u is recovered by quadrature. The
//! flux constant is pinned down by bisection on the total rise over the
//! interval. Nothing here touches the mesh or the variational solver.

use crate::error::{MgError, Result};

/// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; the
/// rule is symmetric).
const GL_X: [f64; 8] = [
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.755404408355003,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

fn integrand(theta: f64, c: f64) -> f64 {
    let s = theta.sin();
    c / (s * s + c * c).sqrt()
}

fn gl_panel(a: f64, b: f64, c: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in 0..8 {
        acc += GL_W[k] * (integrand(mid + half * GL_X[k], c) + integrand(mid - half * GL_X[k], c));
    }
    acc * half
}

/// Integrates the slope over [a, b] within [0, pi/2], with panels graded
/// geometrically toward 0 where the integrand varies on the scale of c.
fn integrate_lower_half(a: f64, b: f64, c: f64) -> f64 {
    debug_assert!(0.0 <= a && a <= b && b <= std::f64::consts::FRAC_PI_2 + 1e-12);
    if b - a <= 0.0 {
        return 0.0;
    }
    let floor = (1e-3 * c).max(1e-14 * b);
    let mut acc = 0.0;
    let mut hi = b;
    let mut guard = 0;
    while hi > a && guard < 200 {
        let lo = (hi * 0.5).max(a);
        let lo = if lo <= floor.max(a) { a } else { lo };
        acc += gl_panel(lo, hi, c);
        hi = lo;
        guard += 1;
    }
    acc
}

/// Integral of the slope over an arbitrary [a, b] inside [0, pi], exploiting
/// the symmetry of the integrand about pi/2.
fn integrate_slope(a: f64, b: f64, c: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut acc = 0.0;
    // lower part
    let la = a.min(FRAC_PI_2);
    let lb = b.min(FRAC_PI_2);
    if lb > la {
        acc += integrate_lower_half(la, lb, c);
    }
    // upper part, reflected
    let ua = a.max(FRAC_PI_2);
    let ub = b.max(FRAC_PI_2);
    if ub > ua {
        acc += integrate_lower_half(PI - ub, PI - ua, c);
    }
    acc
}

/// Rotationally symmetric solution profile on a polar interval.
#[derive(Clone, Debug)]
pub struct ReducedProfile {
    /// Conserved flux constant.
    pub c: f64,
    pub theta0: f64,
    pub theta1: f64,
    /// Total rise u(theta1) - u(theta0).
    pub tau: f64,
}

impl ReducedProfile {
    /// u(theta) - u(theta0).
    pub fn value(&self, theta: f64) -> f64 {
        let t = theta.clamp(self.theta0, self.theta1);
        integrate_slope(self.theta0, t, self.c)
    }

    /// u'(theta) = c / sqrt(sin^2 + c^2), in (0, 1).
    pub fn slope(&self, theta: f64) -> f64 {
        integrand(theta, self.c)
    }

    /// Recomputes the total rise; |residual| is the self-check of the
    /// bisection and quadrature.
    pub fn rise_residual(&self) -> f64 {
        integrate_slope(self.theta0, self.theta1, self.c) - self.tau
    }
}

/// Finds the flux constant so the profile rises by `tau` over
/// [theta0, theta1] (subset of [0, pi]); bisection to 1e-12 absolute on c
/// (scale-aware above 1).
pub fn shoot(tau: f64, theta0: f64, theta1: f64) -> Result<ReducedProfile> {
    use std::f64::consts::PI;
    if !(0.0 <= theta0 && theta0 < theta1 && theta1 <= PI) {
        return Err(MgError::InvalidConfig(format!(
            "bad polar interval [{theta0}, {theta1}]"
        )));
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(MgError::InvalidConfig(format!("bad rise {tau}")));
    }
    if tau == 0.0 {
        return Ok(ReducedProfile {
            c: 0.0,
            theta0,
            theta1,
            tau,
        });
    }
    if tau >= theta1 - theta0 {
        // the reduced model is spacelike: total rise must stay below the
        // interval length
        return Err(MgError::NotSpacelike {
            i: 0,
            j: 1,
            gap: tau,
            dist: theta1 - theta0,
            margin_frac: 1.0,
        });
    }

    let f = |c: f64| integrate_slope(theta0, theta1, c);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) < tau {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(MgError::NoConvergence {
                iterations: guard,
                residual: f(hi) - tau,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(ReducedProfile {
        c,
        theta0,
        theta1,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn full_interval_rise_is_reproduced() {
        let p = shoot(0.8, 0.0, PI).unwrap();
        assert!(
            p.rise_residual().abs() <= 1e-10,
            "self-check residual {}",
            p.rise_residual()
        );
        assert!(p.c > 0.0);
    }

    #[test]
    fn flux_constant_monotone_in_rise() {
        let a = shoot(0.8, 0.0, PI).unwrap();
        let b = shoot(3.0, 0.0, PI).unwrap();
        assert!(b.c > a.c, "c(3.0)={} vs c(0.8)={}", b.c, a.c);
        assert!(b.rise_residual().abs() <= 1e-10);
    }

    #[test]
    fn slope_tends_to_light_cone_at_the_pole() {
        let p = shoot(0.8, 0.0, PI).unwrap();
        assert!(p.slope(1e-6) > 1.0 - 1e-9);
        assert!(p.slope(1e-4) > p.slope(1e-3));
        assert!(p.slope(1e-3) > p.slope(1e-2));
        assert!(p.slope(PI / 2.0) < 0.5);
    }

    #[test]
    fn profile_is_monotone_and_pins_endpoints() {
        let p = shoot(0.8, 0.0, PI).unwrap();
        assert_eq!(p.value(0.0), 0.0);
        assert!((p.value(PI) - 0.8).abs() <= 1e-10);
        let mut prev = 0.0;
        for k in 1..=64 {
            let v = p.value(PI * k as f64 / 64.0);
            assert!(v >= prev - 1e-13);
            prev = v;
        }
        // symmetry of the profile about the equator
        let mid = p.value(PI / 2.0);
        assert!((mid - 0.4).abs() < 1e-10);
    }

    #[test]
    fn annulus_interval_variant() {
        let p = shoot(0.5, 0.3, PI - 0.3).unwrap();
        assert!(p.rise_residual().abs() <= 1e-10);
        assert!((p.value(PI - 0.3) - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn rejects_non_spacelike_rise() {
        assert!(matches!(
            shoot(3.3, 0.0, PI),
            Err(MgError::NotSpacelike { .. })
        ));
        assert!(shoot(0.2, 0.5, 0.6).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shooting_always_hits_the_prescribed_rise(
            // keep tau strictly under the spacelike bound 0.98 * (theta1 - theta0)
            tau in 0.05f64..2.0,
            theta0 in 1e-6f64..0.4,
        ) {
            let theta1 = PI - theta0;
            let p = shoot(tau, theta0, theta1).unwrap();
            proptest::prop_assert!(p.rise_residual().abs() <= 1e-10);
            proptest::prop_assert!(p.c > 0.0);
            // endpoint data is met and the profile never exceeds the rise
            proptest::prop_assert!(p.value(theta0).abs() <= 1e-12);
            proptest::prop_assert!((p.value(theta1) - tau).abs() <= 1e-9);
            proptest::prop_assert!(p.value(PI / 2.0) <= tau);
        }
    }
}
