//! Closed-form solutions for the special exponents and the flows built on them.

use std::f64::consts::PI;

use crate::flow::SimilarityMap;
use crate::roots::brent;
use crate::types::{Error, MValue, Result, Solution};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Pole position of the m = 1/3 solution for a = 1.
pub const TAU_POLE_13: f64 = 2.0 * PI * SQRT3 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactKind {
    /// m = 1/2: a tanh(a(tau - shift)/2)
    Tanh { a: f64, shift: f64 },
    /// m = 1: b (tau - shift)
    Linear { b: f64, shift: f64 },
    /// m = 2: b (tau - shift)^2
    Quadratic { b: f64, shift: f64 },
    /// m = inf: a (exp(a(tau - shift)) - 1)
    Exponential { a: f64, shift: f64 },
    /// m = 1/3, given implicitly; vanishes at tau = shift.
    Implicit13 { a: f64, shift: f64 },
    /// Any m: c/(tau - pole) with c = 6m/(m+1).
    BlowupPole { m: MValue, pole: f64 },
    /// m = 1/2: a coth(a(tau - pole)/2)
    BlowupCoth { a: f64, pole: f64 },
}

impl ExactKind {
    pub fn exponent(&self) -> MValue {
        match *self {
            ExactKind::Tanh { .. } | ExactKind::BlowupCoth { .. } => MValue::Finite(0.5),
            ExactKind::Linear { .. } => MValue::Finite(1.0),
            ExactKind::Quadratic { .. } => MValue::Finite(2.0),
            ExactKind::Exponential { .. } => MValue::Infinite,
            ExactKind::Implicit13 { .. } => MValue::Finite(1.0 / 3.0),
            ExactKind::BlowupPole { m, .. } => m,
        }
    }

    fn check(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            ExactKind::Tanh { a, .. }
            | ExactKind::Exponential { a, .. }
            | ExactKind::Implicit13 { a, .. }
            | ExactKind::BlowupCoth { a, .. } => positive(a, "a"),
            ExactKind::Linear { b, .. } | ExactKind::Quadratic { b, .. } => positive(b, "b"),
            ExactKind::BlowupPole { m, .. } => MValue::new(m.as_f64()).map(|_| ()),
        }
    }
}

impl Solution for ExactKind {
    fn m(&self) -> MValue {
        self.exponent()
    }

    fn state(&self, tau: f64) -> Result<[f64; 3]> {
        eval_exact(*self, tau)
    }
}

/// (Phi, Phi', Phi'') of a closed-form solution.
pub fn eval_exact(kind: ExactKind, tau: f64) -> Result<[f64; 3]> {
    kind.check()?;
    let pole_err = |p: f64| Error::Undefined(format!("tau = {tau} is the pole {p}"));
    Ok(match kind {
        ExactKind::Tanh { a, shift } => {
            let t = (0.5 * a * (tau - shift)).tanh();
            let s2 = 1.0 - t * t;
            [a * t, 0.5 * a * a * s2, -0.5 * a * a * a * t * s2]
        }
        ExactKind::Linear { b, shift } => [b * (tau - shift), b, 0.0],
        ExactKind::Quadratic { b, shift } => {
            let s = tau - shift;
            [b * s * s, 2.0 * b * s, 2.0 * b]
        }
        ExactKind::Exponential { a, shift } => {
            let e = (a * (tau - shift)).exp();
            [a * (e - 1.0), a * a * e, a * a * a * e]
        }
        ExactKind::Implicit13 { a, shift } => implicit_13_state(a, tau - shift)?,
        ExactKind::BlowupPole { m, pole } => {
            let s = tau - pole;
            if s == 0.0 {
                return Err(pole_err(pole));
            }
            let c = m.pole_coefficient();
            [c / s, -c / (s * s), 2.0 * c / (s * s * s)]
        }
        ExactKind::BlowupCoth { a, pole } => {
            let x = 0.5 * a * (tau - pole);
            if x == 0.0 {
                return Err(pole_err(pole));
            }
            let sh = x.sinh();
            let ch = x.cosh();
            [
                a * ch / sh,
                -0.5 * a * a / (sh * sh),
                0.5 * a * a * a * ch / (sh * sh * sh),
            ]
        }
    })
}

// The m = 1/3 solution for a = 1 is parametrised by u = 1 - sigma, where
// Phi = -sigma^2 and sigma > 0 left of the origin, sigma < 0 right of it.
// Both implicit branches are then one monotone relation tau(u), u in (0, inf).

fn tau_of_u(u: f64) -> f64 {
    if u <= 1.5 {
        PI * SQRT3 / 6.0 - 0.5 * (3.0 - 3.0 * u + u * u).ln() + u.ln() - SQRT3 * ((3.0 - 2.0 * u) / SQRT3).atan()
    } else {
        // distance to the pole, written to avoid the cancellation of two O(1) terms
        let r = 1.0 / u;
        TAU_POLE_13 - 0.5 * (-3.0 * r + 3.0 * r * r).ln_1p() - SQRT3 * (SQRT3 / (2.0 * u - 3.0)).atan()
    }
}

fn state_of_u(u: f64) -> [f64; 3] {
    let sigma = 1.0 - u;
    let w = u * (3.0 - 3.0 * u + u * u); // 1 - sigma^3
    let phi = -sigma * sigma;
    let dphi = 2.0 / 3.0 * sigma * w;
    let ddphi = -2.0 / 9.0 * (1.0 - 4.0 * sigma * sigma * sigma) * w;
    [phi, dphi, ddphi]
}

fn solve_u(t: f64) -> Result<f64> {
    if t >= TAU_POLE_13 {
        return Err(Error::Domain(format!(
            "tau = {t} is at or beyond the pole {TAU_POLE_13}"
        )));
    }
    let g = |v: f64| Ok(tau_of_u(v.exp()) - t);
    // tau ~ ln u - 1.456 on the far left, and tau_p - tau ~ 3/(2 u^2) near the pole
    let mut lo = t.min(0.0) - 1.0;
    while g(lo)? > 0.0 {
        lo -= 2.0;
    }
    let mut hi = if t > 0.0 {
        0.5 * (1.5 / (TAU_POLE_13 - t)).ln() + 1.0
    } else {
        0.5
    };
    hi = hi.max(0.5);
    while g(hi)? < 0.0 {
        hi += 1.0;
    }
    let r = brent(g, lo, hi, 1e-15, 200)?;
    Ok(r.x.exp())
}

/// Phi of the m = 1/3 solution vanishing at the origin.
pub fn eval_implicit_13(a: f64, tau: f64) -> Result<f64> {
    implicit_13_state(a, tau).map(|z| z[0])
}

/// (Phi, Phi', Phi'') of the m = 1/3 solution; Phi(tau, a) = a Phi(a tau, 1).
pub fn implicit_13_state(a: f64, tau: f64) -> Result<[f64; 3]> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let z = state_of_u(solve_u(a * tau)?);
    Ok([a * z[0], a * a * z[1], a * a * a * z[2]])
}

/// The explicit direction of the implicit relation: tau at which the m = 1/3
/// solution takes the value `phi` < 0, on the left (tau <= 0) or right branch.
pub fn implicit_13_tau(a: f64, phi: f64, right_branch: bool) -> Result<f64> {
    let p = phi / a;
    if !(a > 0.0) || p > 0.0 || (!right_branch && p <= -1.0) {
        return Err(Error::Domain(format!("phi = {phi} outside the range of the branch")));
    }
    let s = (-p).sqrt();
    let u = if right_branch { 1.0 + s } else { 1.0 - s };
    Ok(tau_of_u(u) / a)
}

/// Parameter d of the exponential series for the solutions that approach -a.
pub fn lyapunov_parameter(kind: ExactKind) -> Result<f64> {
    kind.check()?;
    match kind {
        ExactKind::Tanh { a, shift } => Ok(2.0 * a * (-a * shift).exp()),
        ExactKind::Exponential { a, shift } => Ok(a * (-a * shift).exp()),
        ExactKind::Implicit13 { a, shift } => Ok(2.0 * SQRT3 * a * (PI * SQRT3 / 6.0).exp() * (-a * shift).exp()),
        ExactKind::BlowupCoth { a, pole } => Ok(-2.0 * a * (-a * pole).exp()),
        _ => Err(Error::Domain(
            "solution does not approach an equilibrium on the left".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Free plane jet, m = 1/2.
    FloodedJet,
    /// Unsteady separation model, m = inf.
    Separation,
    /// Jet along a wall at y = 0, m = 1/3 reflected.
    NearWallJet,
}

/// Profile of a preset flow in its physical orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetProfile {
    pub preset: Preset,
    pub a: f64,
}

impl Solution for PresetProfile {
    fn m(&self) -> MValue {
        match self.preset {
            Preset::FloodedJet => MValue::Finite(0.5),
            Preset::Separation => MValue::Infinite,
            Preset::NearWallJet => MValue::Finite(1.0 / 3.0),
        }
    }

    fn state(&self, tau: f64) -> Result<[f64; 3]> {
        let a = self.a;
        match self.preset {
            Preset::FloodedJet => eval_exact(ExactKind::Tanh { a, shift: 0.0 }, tau),
            Preset::Separation => eval_exact(ExactKind::Exponential { a, shift: 0.0 }, tau),
            Preset::NearWallJet => {
                // tau -> -tau, Phi -> -Phi keeps the equation and puts the wall at tau = 0
                let z = implicit_13_state(a, -tau)?;
                Ok([-z[0], z[1], -z[2]])
            }
        }
    }
}

/// Closed-form velocity and stream function of a preset flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetFlow {
    pub profile: PresetProfile,
    pub map: SimilarityMap,
}

impl PresetFlow {
    pub fn u(&self, x: f64, y: f64) -> Result<f64> {
        self.map.velocity(&self.profile, x, y).map(|p| p.u)
    }

    pub fn v(&self, x: f64, y: f64) -> Result<f64> {
        self.map.velocity(&self.profile, x, y).map(|p| p.v)
    }

    pub fn psi(&self, x: f64, y: f64) -> Result<f64> {
        self.map.velocity(&self.profile, x, y).map(|p| p.psi)
    }
}

pub fn preset_problem(preset: Preset, a: f64, nu: f64) -> Result<PresetFlow> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let profile = PresetProfile { preset, a };
    let map = SimilarityMap::new(profile.m(), nu)?;
    Ok(PresetFlow { profile, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::rhs;
    use proptest::prelude::*;

    fn residual(kind: ExactKind, tau: f64) -> f64 {
        // third derivative by central difference of the analytic second derivative
        let h = 1e-5;
        let z = eval_exact(kind, tau).unwrap();
        let p = eval_exact(kind, tau + h).unwrap()[2];
        let n = eval_exact(kind, tau - h).unwrap()[2];
        (p - n) / (2.0 * h) - rhs(kind.exponent(), &z)[2]
    }

    #[test]
    fn spec_values() {
        assert_eq!(
            eval_exact(ExactKind::Tanh { a: 1.0, shift: 0.0 }, 0.0).unwrap(),
            [0.0, 0.5, 0.0]
        );
        assert_eq!(
            eval_exact(ExactKind::Exponential { a: 1.0, shift: 0.0 }, 0.0).unwrap(),
            [0.0, 1.0, 1.0]
        );
        let z = eval_exact(
            ExactKind::BlowupPole {
                m: MValue::Finite(1.0),
                pole: 2.0,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(z, [-3.0, -3.0, -6.0]);
        assert!(matches!(
            eval_exact(ExactKind::BlowupCoth { a: 1.0, pole: 0.5 }, 0.5),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn every_kind_solves_the_equation() {
        let kinds = [
            ExactKind::Tanh { a: 1.3, shift: 0.2 },
            ExactKind::Linear { b: 0.7, shift: -1.0 },
            ExactKind::Quadratic { b: 2.0, shift: 0.5 },
            ExactKind::Exponential { a: 0.8, shift: 0.1 },
            ExactKind::Implicit13 { a: 1.0, shift: 0.0 },
            ExactKind::Implicit13 { a: 2.0, shift: -0.5 },
            ExactKind::BlowupPole {
                m: MValue::Finite(0.7),
                pole: 3.0,
            },
            ExactKind::BlowupPole {
                m: MValue::Infinite,
                pole: 3.0,
            },
            ExactKind::BlowupCoth { a: 1.0, pole: 0.0 },
        ];
        for kind in kinds {
            for k in 0..40 {
                let tau = -6.0 + 0.2 * k as f64 + 0.013;
                if tau > 1.0 {
                    continue;
                }
                let tau = if matches!(kind, ExactKind::BlowupCoth { .. }) && tau > -0.3 {
                    tau - 1.5
                } else {
                    tau
                };
                let r = residual(kind, tau);
                let scale = eval_exact(kind, tau)
                    .unwrap()
                    .iter()
                    .fold(1.0f64, |s, v| s.max(v.abs()));
                assert!(r.abs() < 1e-6 * scale * scale, "{kind:?} tau {tau} residual {r}");
            }
        }
    }

    #[test]
    fn implicit_13_derivatives_match_differences() {
        for &tau in &[-8.0, -2.0, -0.4, 0.0, 0.7, 2.0, 3.3] {
            let z = implicit_13_state(1.0, tau).unwrap();
            let h = 1e-6;
            let p = implicit_13_state(1.0, tau + h).unwrap();
            let n = implicit_13_state(1.0, tau - h).unwrap();
            for j in 0..2 {
                let fd = (p[j] - n[j]) / (2.0 * h);
                assert!((fd - z[j + 1]).abs() < 1e-6 * (1.0 + z[j + 1].abs()), "tau {tau} j {j}");
            }
        }
    }

    #[test]
    fn implicit_13_landmarks() {
        assert!(eval_implicit_13(1.0, 0.0).unwrap().abs() < 1e-15);
        let z0 = implicit_13_state(1.0, 0.0).unwrap();
        assert!(z0[1].abs() < 1e-15);
        assert!((z0[2] + 2.0 / 9.0).abs() < 1e-14);
        let far = eval_implicit_13(1.0, -10.0).unwrap();
        assert!(far > -1.0 && far < -1.0 + 1e-3);
        assert!((TAU_POLE_13 - 3.6275987).abs() < 1e-7);
        let mut prev = 0.0;
        for k in 1..8 {
            let tau = TAU_POLE_13 - 10f64.powi(-k);
            let v = eval_implicit_13(1.0, tau).unwrap();
            assert!(v < prev);
            // pole envelope 3/(2(tau - tau_p))
            assert!(
                (v * (tau - TAU_POLE_13) / 1.5 - 1.0).abs() < 2e-1 * 10f64.powi(-k / 2).max(1e-3),
                "{k}"
            );
            prev = v;
        }
        assert!(matches!(eval_implicit_13(1.0, TAU_POLE_13), Err(Error::Domain(_))));
    }

    #[test]
    fn implicit_13_second_derivative_at_origin_by_differences() {
        let h = 1e-4;
        let f = |t: f64| eval_implicit_13(2.0, t).unwrap();
        let dd = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!((dd + 2.0 * 8.0 / 9.0).abs() < 1e-5, "{dd}");
    }

    #[test]
    fn lyapunov_parameters_reproduce_left_tails() {
        use crate::series::{eval_lyapunov, lyapunov_coeffs};
        let cases = [
            (ExactKind::Tanh { a: 1.0, shift: 0.0 }, 1.0),
            (ExactKind::Tanh { a: 1.7, shift: 0.4 }, 1.7),
            (ExactKind::Exponential { a: 3.0, shift: 0.0 }, 3.0),
            (ExactKind::Implicit13 { a: 1.0, shift: 0.0 }, 1.0),
            (ExactKind::Implicit13 { a: 0.6, shift: -1.0 }, 0.6),
            (ExactKind::BlowupCoth { a: 1.0, pole: 0.0 }, 1.0),
        ];
        for (kind, a) in cases {
            let c = lyapunov_coeffs(kind.exponent(), a, 30);
            let d = lyapunov_parameter(kind).unwrap();
            for k in 0..5 {
                let tau = (-6.0 - k as f64) / a;
                let s = eval_lyapunov(&c, d, tau).unwrap();
                let z = eval_exact(kind, tau).unwrap();
                assert!((s.phi - z[0]).abs() < 1e-13 * a, "{kind:?} tau {tau}");
                assert!((s.dphi - z[1]).abs() < 1e-13 * a * a, "{kind:?} tau {tau}");
            }
        }
        let d13 = lyapunov_parameter(ExactKind::Implicit13 { a: 1.0, shift: 0.0 }).unwrap();
        assert!((d13 - 8.579306).abs() < 5e-7);
        assert!(lyapunov_parameter(ExactKind::Linear { b: 1.0, shift: 0.0 }).is_err());
    }

    #[test]
    fn coth_and_tanh_have_opposite_parameters() {
        let t = lyapunov_parameter(ExactKind::Tanh { a: 1.2, shift: 0.3 }).unwrap();
        let c = lyapunov_parameter(ExactKind::BlowupCoth { a: 1.2, pole: 0.3 }).unwrap();
        assert_eq!(t, -c);
    }

    #[test]
    fn flooded_jet_centerline_and_momentum() {
        let flow = preset_problem(Preset::FloodedJet, 1.0, 1.0).unwrap();
        for &x in &[0.5, 1.0, 2.0, 8.0] {
            assert!((flow.u(x, 0.0).unwrap() - 0.5 * x.powf(-1.0 / 3.0)).abs() < 1e-15);
        }
        // Simpson on [-40, 40] of Phi'^2
        let n = 8000;
        let h = 80.0 / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let d = eval_exact(ExactKind::Tanh { a: 1.0, shift: 0.0 }, -40.0 + h * k as f64).unwrap()[1];
            s += w * d * d;
        }
        assert!((s * h / 3.0 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn flooded_jet_matches_written_out_fields() {
        let (a, nu) = (1.3, 0.7);
        let flow = preset_problem(Preset::FloodedJet, a, nu).unwrap();
        let (x, y): (f64, f64) = (1.9, 0.8);
        let arg = a * y * x.powf(-2.0 / 3.0) / (2.0 * (3.0 * nu).sqrt());
        let psi = a * (3.0 * nu).sqrt() * x.powf(1.0 / 3.0) * arg.tanh();
        let u = 0.5 * a * a * x.powf(-1.0 / 3.0) / arg.cosh().powi(2);
        let v = a
            * (nu / 3.0).sqrt()
            * x.powf(-2.0 / 3.0)
            * ((a / (3.0 * nu).sqrt()) * y * x.powf(-2.0 / 3.0) / arg.cosh().powi(2) - arg.tanh());
        assert!((flow.psi(x, y).unwrap() - psi).abs() < 1e-14);
        assert!((flow.u(x, y).unwrap() - u).abs() < 1e-14);
        assert!((flow.v(x, y).unwrap() - v).abs() < 1e-14);
    }

    #[test]
    fn separation_point_at_origin() {
        let flow = preset_problem(Preset::Separation, 1.0, 1.0).unwrap();
        assert_eq!(flow.u(0.0, 0.0).unwrap(), 0.0);
        let h = 1e-6;
        let dudy = (flow.u(0.0, h).unwrap() - flow.u(0.0, -h).unwrap()) / (2.0 * h);
        assert_eq!(dudy, 0.0);
        // v does not depend on x
        assert!((flow.v(0.3, 0.5).unwrap() - flow.v(4.5, 0.5).unwrap()).abs() < 1e-15);
        assert!((flow.v(1.0, 0.5).unwrap() - (1.0 - 0.5f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn near_wall_jet_has_no_slip_wall() {
        let flow = preset_problem(Preset::NearWallJet, 1.0, 1.0).unwrap();
        for &x in &[0.5, 1.0, 3.0] {
            assert!(flow.u(x, 0.0).unwrap().abs() < 1e-15);
            assert!(flow.v(x, 0.0).unwrap().abs() < 1e-15);
            assert!(flow.u(x, 1.0).unwrap() > 0.0);
        }
        let z = flow.profile.state(50.0).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);
        assert!(flow.u(-1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        // further left, Phi + a carries too few digits for the inverse direction
        fn implicit_13_round_trip(t in -8.0f64..3.6) {
            let a = 1.0;
            let phi = eval_implicit_13(a, t).unwrap();
            prop_assume!(phi < -1e-12 && (t > 0.0 || phi > -1.0 + 1e-12));
            let back = implicit_13_tau(a, phi, t > 0.0).unwrap();
            prop_assert!((back - t).abs() < 1e-10 * (1.0 + t.abs()), "{t} -> {phi} -> {back}");
        }

        #[test]
        fn implicit_13_is_increasing_then_decreasing(t in -20.0f64..3.5, dt in 1e-3f64..0.1) {
            let (p, q) = (eval_implicit_13(1.0, t).unwrap(), eval_implicit_13(1.0, t + dt).unwrap());
            if t + dt <= 0.0 {
                prop_assert!(q > p);
            } else if t >= 0.0 && t + dt < TAU_POLE_13 {
                prop_assert!(q < p);
            }
        }

        #[test]
        fn implicit_13_scaling(a in 0.2f64..5.0, t in -5.0f64..0.5) {
            let lhs = eval_implicit_13(a, t / a).unwrap();
            let rhs = a * eval_implicit_13(1.0, t).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * a);
        }
    }
}
