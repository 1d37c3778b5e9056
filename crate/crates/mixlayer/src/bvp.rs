//! Shooting on the exponential-series parameter for the left boundary-value
//! problem, rightward continuation, far-field matching and rescaling.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::exact::{lyapunov_parameter, ExactKind};
use crate::integrator::{hermite_eval, integrate, Direction, Event, IntegrationSpec, OdeState, Trajectory};
use crate::roots::brent;
use crate::series::{
    eval_lyapunov, farfield_coeffs, lyapunov_coeffs, LyapunovCoeffs, DEFAULT_FARFIELD_ORDER, DEFAULT_LYAPUNOV_ORDER,
};
use crate::types::{
    boundary_snap, classify_regime, Error, MValue, Profile, Regime, Result, Solution, Termination, DEFAULT_T,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ShootConfig {
    /// Left cut: the series is matched at a tau = -t_cut.
    pub t_cut: f64,
    /// Accepted |Phi(0)| after convergence.
    pub target_tol: f64,
    pub lyapunov_order: usize,
    /// A peak within this many multiples of `a` of zero counts as touching it.
    pub tangency_tol: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Right end of the continuation; chosen per regime when absent.
    pub tau_max: Option<f64>,
    /// Far-field fit starts where b xi reaches this value.
    pub farfield_start: f64,
    pub max_iter: usize,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            t_cut: DEFAULT_T,
            target_tol: 1e-8,
            lyapunov_order: DEFAULT_LYAPUNOV_ORDER,
            tangency_tol: 1e-7,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            tau_max: None,
            farfield_start: 40.0,
            max_iter: 100,
        }
    }
}

impl ShootConfig {
    fn spec(&self, m: MValue, events: Vec<Event>) -> IntegrationSpec {
        let mut s = IntegrationSpec::new(m, events);
        s.rel_tol = self.rel_tol;
        s.abs_tol = self.abs_tol;
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootResult {
    pub m: MValue,
    pub a: f64,
    pub d: f64,
    pub phi0_prime: f64,
    pub phi0_dprime: f64,
    pub b_extracted: Option<f64>,
    pub tau_pole: Option<f64>,
    /// Phi(0) of the converged trajectory.
    pub residual: f64,
    pub t_used: f64,
    pub iterations: usize,
    /// The sign pattern of (Phi'(0) - a^2/2, Phi''(0)) expected for the regime.
    pub signs_consistent: bool,
    /// Series expansion variable at the cut exceeded the soft threshold.
    pub series_warning: bool,
    /// Trajectory on [-t_cut / a, 0].
    pub left: Profile,
}

fn d_bracket(m: MValue, a: f64, t_cut: f64) -> (f64, f64) {
    let d13 = lyapunov_parameter(ExactKind::Implicit13 { a, shift: 0.0 }).unwrap_or(8.6 * a);
    let mut hi = 1.1 * (2.0 * a).max(d13);
    if !m.is_infinite() {
        // the series at the cut must stay inside its convergence window
        hi = hi.min(0.95 * a * t_cut.exp());
    }
    (0.9 * a, hi)
}

fn is_tangent_case(m: MValue) -> bool {
    m.finite()
        .is_some_and(|v| v == 1.0 / 3.0 || boundary_snap(v) == Some(1.0 / 3.0))
}

/// Where the trajectory with parameter d first reaches zero: the crossing, or
/// for the tangent case the peak.
fn zero_event(m: MValue, a: f64, d: f64, coeffs: &LyapunovCoeffs, cfg: &ShootConfig) -> Result<(f64, bool)> {
    let t0 = -cfg.t_cut / a;
    let s = eval_lyapunov(coeffs, d, t0)?;
    let start = OdeState {
        tau: t0,
        z: [s.phi, s.dphi, s.ddphi],
    };
    let tangent = is_tangent_case(m);
    let events = if tangent {
        vec![Event::DPhiZero, Event::PoleGuard]
    } else {
        vec![Event::PhiZero, Event::DPhiZero, Event::PoleGuard]
    };
    let tr = integrate(start, Direction::Right, &cfg.spec(m, events))?;
    let hit = tr
        .hit
        .ok_or_else(|| Error::NoConvergence(format!("no zero crossing for d = {d}")))?;
    match hit.event {
        Event::PhiZero => Ok((hit.tau, s.warn)),
        Event::DPhiZero if hit.state[0].abs() <= cfg.tangency_tol * a => Ok((hit.tau, s.warn)),
        Event::DPhiZero if tangent && hit.state[0] > 0.0 => Ok((hit.tau, s.warn)),
        Event::DPhiZero => Err(Error::NoConvergence(format!(
            "trajectory for d = {d} peaks at Phi = {:e} without reaching zero",
            hit.state[0]
        ))),
        _ => Err(Error::NoConvergence(format!(
            "trajectory for d = {d} blows up before reaching zero"
        ))),
    }
}

/// Solve the left problem: the d > 0 for which the series trajectory started
/// at -T vanishes at the origin.
pub fn shoot_left_bvp(m: MValue, a: f64, cfg: &ShootConfig) -> Result<ShootResult> {
    let regime = classify_regime(m)?;
    if regime == Regime::NoBvpSolution {
        return Err(Error::Regime(format!(
            "m = {m} < 1/3: the left problem has no solution"
        )));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if !(cfg.t_cut >= 1.0) {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    let m = match m {
        MValue::Finite(v) => MValue::Finite(boundary_snap(v).unwrap_or(v)),
        inf => inf,
    };
    let coeffs = lyapunov_coeffs(m, a, cfg.lyapunov_order);
    let (lo, hi) = d_bracket(m, a, cfg.t_cut);
    // a change of d is a shift of the trajectory by -ln(d)/a, so the event
    // location is close to linear in ln d
    let root = brent(
        |s| zero_event(m, a, s.exp(), &coeffs, cfg).map(|r| r.0),
        lo.ln(),
        hi.ln(),
        1e-15,
        cfg.max_iter,
    )
    .map_err(|e| match e {
        Error::NoConvergence(msg) => Error::NoConvergence(format!("shooting on d in [{lo}, {hi}]: {msg}")),
        other => other,
    })?;
    let d = root.x.exp();
    let t0 = -cfg.t_cut / a;
    let s = eval_lyapunov(&coeffs, d, t0)?;
    let start = OdeState {
        tau: t0,
        z: [s.phi, s.dphi, s.ddphi],
    };
    let tr = integrate(
        start,
        Direction::Right,
        &cfg.spec(m, vec![Event::StopAtTau(0.0), Event::PoleGuard]),
    )?;
    if tr.profile.last_tau() != 0.0 {
        return Err(Error::NoConvergence(
            "converged trajectory does not reach the origin".into(),
        ));
    }
    let z0 = tr.profile.state(tr.profile.len() - 1);
    if z0[0].abs() > cfg.target_tol.max(cfg.tangency_tol * a) {
        return Err(Error::NoConvergence(format!(
            "|Phi(0)| = {:e} above target",
            z0[0].abs()
        )));
    }
    let slack = 1e-7 * a * a * a;
    let signs_consistent = match regime {
        Regime::GlobalIbvp | Regime::SeparationLimit => z0[1] > 0.5 * a * a && z0[2] > 0.0,
        Regime::FloodedJetBoundary => z0[2].abs() < slack,
        Regime::PoleBoundedBvp => z0[2] < 0.0 && z0[1] >= -slack,
        Regime::NoBvpSolution => false,
    };
    Ok(ShootResult {
        m,
        a,
        d,
        phi0_prime: z0[1],
        phi0_dprime: z0[2],
        b_extracted: None,
        tau_pole: None,
        residual: z0[0],
        t_used: cfg.t_cut / a,
        iterations: root.iterations,
        signs_consistent,
        series_warning: s.warn,
        left: tr.profile,
    })
}

fn default_tau_max(result: &ShootResult, regime: Regime, cfg: &ShootConfig) -> Result<f64> {
    let a = result.a;
    Ok(match regime {
        Regime::FloodedJetBoundary => 40.0 / a,
        Regime::SeparationLimit => 5.0 / a,
        Regime::PoleBoundedBvp => 500.0 / a,
        Regime::GlobalIbvp => {
            let m = result.m.as_f64();
            // crude amplitude from a short run, then room for the fit window
            let probe = 10.0 / a;
            let tr = integrate(
                OdeState {
                    tau: 0.0,
                    z: result.left.state(result.left.len() - 1),
                },
                Direction::Right,
                &cfg.spec(result.m, vec![Event::StopAtTau(probe)]),
            )?;
            let z = tr.profile.state(tr.profile.len() - 1);
            let w = m * z[0] / z[1];
            let b0 = z[0] / w.powf(m);
            let start = ((m + 1.0) * cfg.farfield_start / b0).powf(1.0 / (m + 1.0));
            (1.6 * start).max(probe)
        }
        Regime::NoBvpSolution => unreachable!(),
    })
}

/// Continue the converged trajectory to the right of the origin.
pub fn extend_right(result: &ShootResult, cfg: &ShootConfig) -> Result<Profile> {
    let regime = classify_regime(result.m)?;
    let tau_max = match cfg.tau_max {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::Domain(format!("tau_max must be positive, got {t}"))),
        None => default_tau_max(result, regime, cfg)?,
    };
    let start = OdeState {
        tau: 0.0,
        z: result.left.state(result.left.len() - 1),
    };
    let events = if regime == Regime::PoleBoundedBvp {
        vec![Event::PoleGuard, Event::StopAtTau(tau_max)]
    } else {
        vec![Event::StopAtTau(tau_max)]
    };
    let Trajectory { profile, .. } = integrate(start, Direction::Right, &cfg.spec(result.m, events))?;
    Ok(profile)
}

/// Far-field fit of Phi ~ w^m (b + v(w^{m+1}/(m+1))), w = tau + shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarFieldFit {
    pub b: f64,
    /// Spread of b over the fit samples.
    pub b_error: f64,
    pub shift: f64,
    pub window: (f64, f64),
}

fn fit_point(m: f64, tau: f64, z: [f64; 3]) -> Result<(f64, f64)> {
    let (phi, dphi) = (z[0], z[1]);
    let mut w = m * phi / dphi;
    let mut b = phi / w.powf(m);
    let model = |b: f64, w: f64| {
        let p = farfield_coeffs(m, b, DEFAULT_FARFIELD_ORDER).eval_profile(w);
        [p[0] - phi, p[1] - dphi, p[2]]
    };
    for _ in 0..50 {
        let f = model(b, w);
        let hb = 1e-7 * b;
        let fb = model(b + hb, w);
        let (j11, j21) = ((fb[0] - f[0]) / hb, (fb[1] - f[1]) / hb);
        // d/dw of (Phi, Phi') is (Phi', Phi'') of the model
        let (j12, j22) = (f[1] + dphi, f[2]);
        let det = j11 * j22 - j12 * j21;
        let db = (f[0] * j22 - j12 * f[1]) / det;
        let dw = (j11 * f[1] - j21 * f[0]) / det;
        b -= db;
        w -= dw;
        if !(b.is_finite() && w > 0.0) {
            break;
        }
        if db.abs() <= 1e-13 * b.abs() && dw.abs() <= 1e-13 * w {
            return Ok((b, w - tau));
        }
    }
    Err(Error::NoConvergence(format!(
        "far-field fit at tau = {tau} did not converge"
    )))
}

/// Estimate b from the right end of a profile of the m > 1/2 problem.
pub fn extract_b(profile: &Profile, m: f64, a: f64, cfg: &ShootConfig) -> Result<FarFieldFit> {
    if !(m > 0.5 && m.is_finite()) {
        return Err(Error::Domain(format!(
            "far-field coefficient needs finite m > 1/2, got {m}"
        )));
    }
    let mv = MValue::Finite(m);
    // first sample where the local amplitude estimate puts b xi past the threshold
    let start = (0..profile.len()).find(|&i| {
        let (phi, dphi) = (profile.phi[i], profile.dphi[i]);
        if !(phi > 0.0 && dphi > 0.0) {
            return false;
        }
        let w = m * phi / dphi;
        let b0 = phi / w.powf(m);
        b0 * w.powf(m + 1.0) / (m + 1.0) >= cfg.farfield_start
    });
    let t0 = start.map(|i| profile.tau[i]).ok_or_else(|| {
        Error::FarFieldNotReached(format!(
            "b xi stays below {} up to tau = {}",
            cfg.farfield_start,
            profile.last_tau()
        ))
    })?;
    let t1 = 1.3 * t0;
    if t1 > profile.last_tau() {
        return Err(Error::FarFieldNotReached(format!(
            "fit window [{t0}, {t1}] extends past the profile end {}",
            profile.last_tau()
        )));
    }
    let mut bs = Vec::new();
    let mut shifts = Vec::new();
    for k in 0..5 {
        let tau = t0 + (t1 - t0) * k as f64 / 4.0;
        let z = hermite_eval(mv, profile, tau).ok_or_else(|| Error::Domain(format!("tau = {tau} off the profile")))?;
        // fit in a = 1 units, where b stays of moderate size
        let (b, s) = fit_point(m, a * tau, [z[0] / a, z[1] / (a * a), z[2] / (a * a * a)])?;
        bs.push(b * a.powf(m + 1.0));
        shifts.push(s / a);
    }
    let n = bs.len() as f64;
    let b = bs.iter().sum::<f64>() / n;
    let lo = bs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = bs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FarFieldFit {
        b,
        b_error: hi - lo,
        shift: shifts.iter().sum::<f64>() / n,
        window: (t0, t1),
    })
}

/// How the numerical solution continues past the right end of its samples.
#[derive(Clone, Debug, PartialEq)]
pub enum RightTail {
    FarField(FarFieldFit),
    /// Exponential approach to the upper equilibrium (m = 1/2).
    Saturating,
    /// Exact exponential continuation (m = inf).
    Exponential,
    Pole(f64),
}

/// The a-normalised solution on the whole line: series on the left, the
/// sampled trajectory in the middle, asymptotics on the right.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericSolution {
    pub m: MValue,
    pub a: f64,
    pub d: f64,
    pub profile: Profile,
    pub coeffs: LyapunovCoeffs,
    pub tail: RightTail,
}

impl Solution for NumericSolution {
    fn m(&self) -> MValue {
        self.m
    }

    fn state(&self, tau: f64) -> Result<[f64; 3]> {
        if tau.is_nan() {
            return Err(Error::Domain("tau is NaN".into()));
        }
        let p = &self.profile;
        if tau < p.first_tau() {
            let s = eval_lyapunov(&self.coeffs, self.d, tau)?;
            return Ok([s.phi, s.dphi, s.ddphi]);
        }
        if let Some(z) = hermite_eval(self.m, p, tau) {
            return Ok(z);
        }
        let zl = p.state(p.len() - 1);
        let dt = tau - p.last_tau();
        match &self.tail {
            RightTail::FarField(fit) => {
                let m = self.m.as_f64();
                Ok(farfield_coeffs(m, fit.b, DEFAULT_FARFIELD_ORDER).eval_profile(tau + fit.shift))
            }
            RightTail::Saturating => {
                // linearisation about +a: Phi''' + a Phi'' = 0
                let e = (-self.a * dt).exp();
                Ok([zl[0] + zl[1] / self.a * (1.0 - e), zl[1] * e, -self.a * zl[1] * e])
            }
            RightTail::Exponential => {
                let e = (self.a * dt).exp();
                let c = zl[0] + self.a;
                Ok([-self.a + c * e, self.a * c * e, self.a * self.a * c * e])
            }
            RightTail::Pole(tp) => {
                if tau >= *tp {
                    return Err(Error::Undefined(format!("tau = {tau} at or past the pole {tp}")));
                }
                let c = self.m.pole_coefficient();
                let s = tau - tp;
                Ok([c / s, -c / (s * s), 2.0 * c / (s * s * s)])
            }
        }
    }
}

/// a Phi(a tau) for a base solution computed with a = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledSolution {
    pub base: Arc<NumericSolution>,
    pub a: f64,
}

impl Solution for ScaledSolution {
    fn m(&self) -> MValue {
        self.base.m
    }

    fn state(&self, tau: f64) -> Result<[f64; 3]> {
        let a = self.a;
        let z = self.base.state(a * tau)?;
        Ok([a * z[0], a * a * z[1], a * a * a * z[2]])
    }
}

/// Left solve, right continuation and far-field data for one (m, a).
#[derive(Clone, Debug, PartialEq)]
pub struct BaseSolution {
    pub shoot: ShootResult,
    pub fit: Option<FarFieldFit>,
    pub solution: Arc<NumericSolution>,
}

pub fn solve_full(m: MValue, a: f64, cfg: &ShootConfig) -> Result<BaseSolution> {
    let mut shoot = shoot_left_bvp(m, a, cfg)?;
    let m = shoot.m;
    let regime = classify_regime(m)?;
    let right = extend_right(&shoot, cfg)?;
    let mut fit = None;
    let tail = match (&right.termination, regime) {
        (Termination::PoleAt(tp), _) => {
            shoot.tau_pole = Some(*tp);
            RightTail::Pole(*tp)
        }
        (_, Regime::GlobalIbvp) => {
            let f = extract_b(&right, m.as_f64(), a, cfg)?;
            shoot.b_extracted = Some(f.b);
            fit = Some(f);
            RightTail::FarField(f)
        }
        (_, Regime::SeparationLimit) => RightTail::Exponential,
        (_, Regime::FloodedJetBoundary) => RightTail::Saturating,
        (t, r) => {
            return Err(Error::NoConvergence(format!(
                "right continuation for {r:?} ended with {t:?}"
            )))
        }
    };
    let profile = shoot.left.clone().append(right)?;
    let coeffs = lyapunov_coeffs(m, a, cfg.lyapunov_order);
    let solution = Arc::new(NumericSolution {
        m,
        a,
        d: shoot.d,
        profile,
        coeffs,
        tail,
    });
    Ok(BaseSolution { shoot, fit, solution })
}

/// Run-local cache of a = 1 solutions keyed by (m, T).
#[derive(Default, Debug)]
pub struct Memo {
    inner: Mutex<HashMap<(u64, u64), Arc<BaseSolution>>>,
}

impl Memo {
    pub fn base(&self, m: MValue, cfg: &ShootConfig) -> Result<Arc<BaseSolution>> {
        let key = (m.as_f64().to_bits(), cfg.t_cut.to_bits());
        if let Some(hit) = self.inner.lock().map_err(|_| poisoned())?.get(&key) {
            return Ok(hit.clone());
        }
        let sol = Arc::new(solve_full(m, 1.0, cfg)?);
        self.inner
            .lock()
            .map_err(|_| poisoned())?
            .entry(key)
            .or_insert_with(|| sol.clone());
        Ok(sol)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().map(|g| g.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn poisoned() -> Error {
    Error::NoConvergence("solution cache poisoned by a panicking thread".into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct IbvpSolution {
    pub m: MValue,
    pub b: f64,
    pub a: f64,
    pub d: f64,
    pub base: Arc<BaseSolution>,
    pub solution: ScaledSolution,
}

/// Solve the full problem for prescribed far-field coefficient b via the
/// a = 1 solution and the scaling Phi(tau, a) = a Phi(a tau, 1).
pub fn solve_ibvp(m: f64, b_target: f64, cfg: &ShootConfig, memo: &Memo) -> Result<IbvpSolution> {
    if !(m > 0.5 && m.is_finite()) {
        return Err(Error::Regime(format!(
            "the prescribed-b problem needs finite m > 1/2, got {m}"
        )));
    }
    if !(b_target > 0.0 && b_target.is_finite()) {
        return Err(Error::Domain(format!("b must be positive, got {b_target}")));
    }
    let mv = MValue::Finite(m);
    let base = memo.base(mv, cfg)?;
    let b1 = base
        .fit
        .map(|f| f.b)
        .ok_or_else(|| Error::FarFieldNotReached("base solution has no b".into()))?;
    let a = (b_target / b1).powf(1.0 / (m + 1.0));
    let d = a * base.shoot.d;
    let solution = ScaledSolution {
        base: base.solution.clone(),
        a,
    };
    Ok(IbvpSolution {
        m: mv,
        b: b_target,
        a,
        d,
        base,
        solution,
    })
}

/// Residuals of the two integral relations for Phi''(0) and Phi'(0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityReport {
    /// Integral of Phi'^2 over (-inf, 0].
    pub int_sq: f64,
    /// Integral of s Phi'(s)^2 over (-inf, 0].
    pub int_s_sq: f64,
    pub phi0_dprime_rhs: f64,
    pub phi0_prime_rhs: f64,
    pub dprime_abs_err: f64,
    pub prime_abs_err: f64,
    pub dprime_rel_err: f64,
    pub prime_rel_err: f64,
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189),
    (0.906_179_845_938_664, 0.236_926_885_056_189),
];

/// Integrals of Phi'^2 and s Phi'(s)^2 over (-inf, upper], upper <= 0, with the
/// part left of the profile integrated from the exponential series.
fn square_integrals(result: &ShootResult, upper: f64) -> Result<(f64, f64)> {
    let (m, a, d) = (result.m, result.a, result.d);
    let p = &result.left;
    let (mut i1, mut i2) = (0.0, 0.0);
    for k in 0..p.len() - 1 {
        let (t0, t1) = (p.tau[k], p.tau[k + 1]);
        if t0 >= upper {
            break;
        }
        let t1 = t1.min(upper);
        let (mid, half) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        for (x, w) in GAUSS5 {
            let t = mid + half * x;
            let z = hermite_eval(m, p, t).ok_or_else(|| Error::Domain(format!("tau = {t} off the profile")))?;
            i1 += w * half * z[1] * z[1];
            i2 += w * half * t * z[1] * z[1];
        }
    }
    // tail: Phi' = sum A_l e^{l a s}, A_l = h_l d^l l a
    let coeffs = lyapunov_coeffs(m, a, DEFAULT_LYAPUNOV_ORDER);
    let t = -p.first_tau();
    let amp: Vec<f64> = (1..=coeffs.order())
        .map(|l| coeffs.h[l] * d.powi(l as i32) * l as f64 * a)
        .collect();
    for (i, ai) in amp.iter().enumerate() {
        for (j, aj) in amp.iter().enumerate() {
            let lam = (i + j + 2) as f64 * a;
            let e = (-lam * t).exp();
            i1 += ai * aj * e / lam;
            i2 += ai * aj * e * (-t / lam - 1.0 / (lam * lam));
        }
    }
    Ok((i1, i2))
}

fn relative(e: f64, x: f64, y: f64) -> f64 {
    e / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// Check Phi''(0) = c I1 and Phi'(0) = a^2/2 - c I2, c = (2m-1)/m.
pub fn verify_integral_identities(result: &ShootResult) -> Result<IdentityReport> {
    let c = 2.0 - result.m.recip();
    let (i1, i2) = square_integrals(result, 0.0)?;
    let rhs2 = c * i1;
    let rhs1 = 0.5 * result.a * result.a - c * i2;
    let e2 = (result.phi0_dprime - rhs2).abs();
    let e1 = (result.phi0_prime - rhs1).abs();
    Ok(IdentityReport {
        int_sq: i1,
        int_s_sq: i2,
        phi0_dprime_rhs: rhs2,
        phi0_prime_rhs: rhs1,
        dprime_abs_err: e2,
        prime_abs_err: e1,
        dprime_rel_err: relative(e2, result.phi0_dprime, rhs2),
        prime_rel_err: relative(e1, result.phi0_prime, rhs1),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct InflectionReport {
    pub tau_in: f64,
    /// Phi Phi' at the inflection point.
    pub product: f64,
    /// Integral of Phi'^2 over (-inf, tau_in].
    pub int_sq: f64,
    /// c = (2m-1)/m; the identity reads Phi Phi' = c I at Phi'' = 0.
    pub coefficient: f64,
    pub abs_err: f64,
}

/// Locate the zero of Phi'' on the left profile and check Phi Phi' = c I there.
/// Exists for 1/3 <= m < 1/2, where Phi''(0) < 0 and Phi'' > 0 far left.
pub fn inflection_point(result: &ShootResult) -> Result<InflectionReport> {
    let (m, p) = (result.m, &result.left);
    let k = (0..p.len() - 1)
        .find(|&k| p.tau[k] < 0.0 && p.ddphi[k] > 0.0 && p.ddphi[k + 1] <= 0.0)
        .ok_or_else(|| Error::Domain(format!("no inflection point on the left profile for m = {m}")))?;
    let (lo, hi) = (p.tau[k], p.tau[k + 1].min(0.0));
    let state = |t: f64| hermite_eval(m, p, t).ok_or_else(|| Error::Domain(format!("tau = {t} off the profile")));
    let tau_in = brent(|t| Ok(state(t)?[2]), lo, hi, 1e-14, 100)?.x;
    let z = state(tau_in)?;
    let (int_sq, _) = square_integrals(result, tau_in)?;
    let coefficient = 2.0 - m.recip();
    let product = z[0] * z[1];
    Ok(InflectionReport {
        tau_in,
        product,
        int_sq,
        coefficient,
        abs_err: (product - coefficient * int_sq).abs(),
    })
}

/// d_m(1) for a list of exponents.
pub fn sweep_d(ms: &[MValue], cfg: &ShootConfig) -> Result<Vec<(MValue, f64)>> {
    ms.iter()
        .map(|&m| shoot_left_bvp(m, 1.0, cfg).map(|r| (m, r.d)))
        .collect()
}
