//! Closed-form kernels for the level-set quotient bounds.
//!
//! In the model case (`u = 1/r`, `w = log r`) the optimal Yamabe test
//! function is `s(w) |grad w|^{1/2}` with `s(t) = (2 cosh t)^{-1/2}`; the
//! Sobolev variant uses `s2(t) = e^{-t/2}`. Everything downstream is an
//! explicit function of these two profiles.

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, integrate_to_inf};
use serde::Serialize;
use std::f64::consts::PI;

/// Exterior Yamabe quotient of the unit ball, `(3/4) pi^{4/3}`.
pub fn q_star_ball() -> f64 {
    0.75 * PI.powf(4.0 / 3.0)
}

/// Exterior Sobolev quotient of the unit ball, `2^{1/2} pi^{3/4}`.
pub fn q_sobolev_ball() -> f64 {
    2.0f64.sqrt() * PI.powf(0.75)
}

/// `s(t) = sqrt(e^t / (1 + e^{2t}))`.
pub fn s(t: f64) -> f64 {
    (t.exp() / (1.0 + (2.0 * t).exp())).sqrt()
}

/// `s'(t) = -s(t) tanh(t) / 2`.
pub fn s_prime(t: f64) -> f64 {
    -0.5 * s(t) * t.tanh()
}

/// `s'(t) + s(t)/2 = e^{t/2} / (1 + e^{2t})^{3/2}`.
pub fn s_half_combo(t: f64) -> f64 {
    (0.5 * t).exp() / (1.0 + (2.0 * t).exp()).powf(1.5)
}

/// Sobolev profile `s2(t) = e^{-t/2}`; satisfies `s2' + s2/2 = 0`.
pub fn s2(t: f64) -> f64 {
    (-0.5 * t).exp()
}

/// Majorant `M(t) = 2 pi e^t (1 + e^{4t}) / (1 + e^{2t})^3`.
///
/// On a round ball the Yamabe numerator integrand equals `M` pointwise and
/// `int_0^inf M = 3 pi^2 / 8`.
pub fn m_kernel(t: f64) -> f64 {
    let e2 = (2.0 * t).exp();
    2.0 * PI * t.exp() * (1.0 + e2 * e2) / (1.0 + e2).powi(3)
}

/// Deficit weight `b(tau)`; vanishes at 0 and is positive for `tau > 0`.
pub fn b_kernel(tau: f64) -> f64 {
    let e2 = (2.0 * tau).exp();
    (-tau).exp()
        * ((3.0 * e2 + 1.0).powi(2) / (12.0 * PI * PI * (e2 + 1.0).powi(2)) - 1.0 / (3.0 * PI * PI))
}

/// Inner integrand of the Fubini exchange defining `b`.
pub fn b_inner_integrand(t: f64) -> f64 {
    let e2 = (2.0 * t).exp();
    e2 * (1.0 + 3.0 * e2) / (12.0 * (1.0 + e2).powi(3))
}

/// Closed form of `int_0^tau` of [`b_inner_integrand`].
pub fn b_inner_closed(tau: f64) -> f64 {
    let e2 = (2.0 * tau).exp();
    (3.0 * e2 + 1.0).powi(2) / (96.0 * (e2 + 1.0).powi(2)) - 1.0 / 24.0
}

/// Sobolev deficit weight `b2(tau) = (1 - e^{-tau}) e^{-tau}`.
pub fn b2_kernel(tau: f64) -> f64 {
    let e = (-tau).exp();
    (1.0 - e) * e
}

/// One verified identity: name, computed value, reference value.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub computed: f64,
    pub reference: f64,
    pub diff: f64,
}

/// Report from [`kernel_identities`].
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub tolerance: f64,
    pub checks: Vec<IdentityCheck>,
}

/// Confirm the closed-form kernel identities by adaptive quadrature.
///
/// Checks `int M = 3 pi^2/8`, `4 pi int s^6 = pi^2/8`, the Fubini inner
/// integral against its closed form at `tau in {0.5, 1, 2}`, `b(0) = 0`,
/// `int b2 = 1/2`, and `max b2 = 1/4` at `tau = log 2`. Any identity off
/// by more than `tolerance` is an error naming the identity.
pub fn kernel_identities(tolerance: f64) -> Result<KernelReport> {
    if tolerance < 1e-12 {
        return Err(Error::Config(format!(
            "kernel identity tolerance {tolerance:e} below 1e-12"
        )));
    }
    let qtol = (0.01 * tolerance).max(1e-14);
    let mut checks = Vec::new();
    let mut push = |name: &'static str, computed: f64, reference: f64| -> Result<()> {
        let diff = computed - reference;
        checks.push(IdentityCheck {
            name,
            computed,
            reference,
            diff,
        });
        if diff.abs() > tolerance {
            return Err(Error::KernelIdentity {
                name,
                diff,
                tol: tolerance,
            });
        }
        Ok(())
    };

    push(
        "int_0^inf M dt = 3 pi^2 / 8",
        integrate_to_inf(&m_kernel, 0.0, qtol),
        3.0 * PI * PI / 8.0,
    )?;
    push(
        "4 pi int_0^inf s^6 dt = pi^2 / 8",
        4.0 * PI * integrate_to_inf(&|t| s(t).powi(6), 0.0, qtol),
        PI * PI / 8.0,
    )?;
    for &tau in &[0.5, 1.0, 2.0] {
        let name: &'static str = match tau {
            t if t == 0.5 => "b inner integral, tau = 0.5",
            t if t == 1.0 => "b inner integral, tau = 1",
            _ => "b inner integral, tau = 2",
        };
        push(
            name,
            adaptive_simpson(&b_inner_integrand, 0.0, tau, qtol),
            b_inner_closed(tau),
        )?;
    }
    push("b(0) = 0", b_kernel(0.0), 0.0)?;
    push(
        "int_0^inf b2 dtau = 1/2",
        integrate_to_inf(&b2_kernel, 0.0, qtol),
        0.5,
    )?;
    push("max b2 = 1/4 at tau = log 2", b2_kernel(2.0f64.ln()), 0.25)?;

    Ok(KernelReport {
        tolerance,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identities_pass_at_1e8() {
        let report = kernel_identities(1e-8).expect("identities hold");
        assert_eq!(report.checks.len(), 7);
        for c in &report.checks {
            assert!(c.diff.abs() <= 1e-8, "{} off by {:e}", c.name, c.diff);
        }
    }

    #[test]
    fn m_integral_value() {
        // 3 pi^2 / 8 = 3.7011...
        let v = integrate_to_inf(&m_kernel, 0.0, 1e-12);
        assert_relative_eq!(v, 3.701101650408509, epsilon = 1e-9);
    }

    #[test]
    fn s6_integral_value() {
        // pi^2 / 8 = 1.2337...
        let v = 4.0 * PI * integrate_to_inf(&|t| s(t).powi(6), 0.0, 1e-12);
        assert_relative_eq!(v, 1.233700550136170, epsilon = 1e-9);
    }

    #[test]
    fn b_positive_off_zero() {
        assert!(b_kernel(0.0).abs() < 1e-15);
        for i in 1..200 {
            let tau = 0.05 * i as f64;
            assert!(b_kernel(tau) > 0.0, "b({tau}) = {}", b_kernel(tau));
        }
    }

    #[test]
    fn s2_ode() {
        // s2' + s2/2 = 0, checked by finite differences
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            let h = 1e-6;
            let deriv = (s2(t + h) - s2(t - h)) / (2.0 * h);
            assert!((deriv + 0.5 * s2(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn s_prime_matches_combo() {
        for &t in &[0.0, 0.2, 1.0, 3.0] {
            assert_relative_eq!(s_prime(t) + 0.5 * s(t), s_half_combo(t), epsilon = 1e-13);
        }
    }

    #[test]
    fn ball_integrand_identity() {
        // pi s^2 + 4 pi s'^2 = M(t): the algebraic form the ball sweep must hit
        for &t in &[0.0, 0.1, 0.7, 1.9, 3.2] {
            let lhs = PI * s(t).powi(2) + 4.0 * PI * s_prime(t).powi(2);
            assert_relative_eq!(lhs, m_kernel(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(kernel_identities(1e-13).is_err());
    }

    #[test]
    fn reference_constants() {
        assert_relative_eq!(q_star_ball(), 3.450863335852867, epsilon = 1e-12);
        assert_relative_eq!(q_sobolev_ball(), 3.337162865918206, epsilon = 1e-12);
    }
}
