//! The profile equation with Phi as the independent variable.
//!
//! Along a monotone trajectory `f(Phi) = Phi'(tau)` satisfies
//! `f f'' + f'^2 + Phi f' - ((m-1)/m) f = 0`, or after one integration
//! `f f' + Phi f = ((2m-1)/m) * int_{-a}^{Phi} f`. The problem is singular at
//! `Phi = -a`, where `f` starts from the convergent series
//! `a (Phi+a) [1 + sum chi_k ((Phi+a)/a)^k]`.

use crate::bvp::NumericSolution;
use crate::integrator::{solve, Control, Step, Tolerances};
use crate::roots::brent;
use crate::series::{phase_chi_coeffs, theta_coeffs};
use crate::types::{Error, MValue, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig {
    /// Series start at `Phi = -a + delta_frac * a`.
    pub delta_frac: f64,
    pub chi_order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Once `f` falls below this multiple of `a^2` while decreasing, `f`
    /// itself becomes the independent variable.
    pub switch_frac: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            delta_frac: 1e-3,
            chi_order: 8,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 0.05,
            switch_frac: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseTermination {
    /// Reached the requested `phi_max`.
    Completed,
    /// `f` vanished with `f f'` bounded away from zero: square-root branch point.
    BranchPointAt(f64),
    /// Stopped early: regular zero of `f`, blow-up, or integrator failure.
    Truncated,
}

/// Sampled phase-plane solution. `integral` is `int_{-a}^{Phi} f`.
#[derive(Clone, Debug)]
pub struct PhaseProfile {
    pub m: f64,
    pub a: f64,
    pub phi: Vec<f64>,
    pub f: Vec<f64>,
    pub fdot: Vec<f64>,
    pub integral: Vec<f64>,
    pub termination: PhaseTermination,
    steps: Vec<Step<3>>,
}

impl PhaseProfile {
    /// Interpolated `f` on the part integrated in `Phi`.
    pub fn f_at(&self, phi: f64) -> Option<f64> {
        let first = self.steps.first()?;
        let last = self.steps.last()?;
        if phi < first.t0 || phi > last.t1 {
            return None;
        }
        let i = self.steps.partition_point(|s| s.t1 < phi);
        self.steps.get(i).map(|s| s.dense(phi)[0])
    }

    /// Range of `Phi` covered by [`PhaseProfile::f_at`].
    pub fn phi_range(&self) -> (f64, f64) {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => (a.t0, b.t1),
            _ => (f64::NAN, f64::NAN),
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Largest `|f f' + Phi f - c int f|` over the samples.
    pub fn integral_relation_residual(&self) -> f64 {
        let c = 2.0 - 1.0 / self.m;
        (0..self.len())
            .map(|i| {
                let r = self.f[i] * self.fdot[i] + self.phi[i] * self.f[i] - c * self.integral[i];
                r.abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_m(m: f64) -> Result<()> {
    if m.is_nan() || m == 0.0 || m == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("phase-plane problem needs nonzero m, got {m}")));
    }
    Ok(())
}

/// Residual of `f f'' + f'^2 + Phi f' - ((m-1)/m) f` for given derivatives.
pub fn phase_residual(m: f64, phi: f64, f: [f64; 3]) -> f64 {
    let q = 1.0 - 1.0 / m;
    f[0] * f[2] + f[1] * f[1] + phi * f[1] - q * f[0]
}

/// `(f, f', f'')` of the pole-type solution `f = -(m+1) Phi^2 / (6m)`.
pub fn pole_phase_solution(m: f64, phi: f64) -> [f64; 3] {
    let k = -(1.0 + 1.0 / m) / 6.0;
    [k * phi * phi, 2.0 * k * phi, 2.0 * k]
}

/// Integrate the phase-plane problem from the series start at `-a` to `phi_max`.
pub fn solve_phase_cp(m: f64, a: f64, phi_max: f64, cfg: &PhaseConfig) -> Result<PhaseProfile> {
    check_m(m)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if !(phi_max > -a) {
        return Err(Error::Domain(format!("phi_max = {phi_max} must exceed -a = {}", -a)));
    }
    let inv = 1.0 / m;
    let q = 1.0 - inv;
    // The series coefficients only involve 1/m.
    let chi = phase_chi_coeffs(MValue::Finite(m), cfg.chi_order);
    let phi0 = -a + cfg.delta_frac * a;
    if phi0 >= phi_max {
        return Err(Error::Domain(format!(
            "phi_max = {phi_max} lies inside the series start"
        )));
    }
    let [f0, f1, _] = chi.eval(a, phi0);
    let t = cfg.delta_frac;
    let mut int0 = 0.0;
    for (k, c) in std::iter::once(&1.0).chain(chi.chi.iter().skip(1)).enumerate() {
        int0 += c * t.powi(k as i32 + 2) / (k as f64 + 2.0);
    }
    int0 *= a * a * a;

    let tol = Tolerances {
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_step: cfg.max_step * a,
    };
    let switch = cfg.switch_frac * a * a;
    let mut out = PhaseProfile {
        m,
        a,
        phi: vec![phi0],
        f: vec![f0],
        fdot: vec![f1],
        integral: vec![int0],
        termination: PhaseTermination::Completed,
        steps: Vec::new(),
    };
    let mut blown = false;
    let mut near_zero = false;
    let run = solve(
        |phi, y: &[f64; 3]| [y[1] / y[0], q * y[0] - phi * y[1] / y[0], y[0]],
        phi0,
        [f0, f0 * f1, int0],
        phi_max,
        &tol,
        |st| {
            let [f, g, i] = st.y1;
            out.phi.push(st.t1);
            out.f.push(f);
            out.fdot.push(g / f);
            out.integral.push(i);
            out.steps.push(st.clone());
            if f.abs() > 1e12 * a * a {
                blown = true;
                return Ok(Control::Stop);
            }
            if f < switch && g < 0.0 {
                near_zero = true;
                return Ok(Control::Stop);
            }
            Ok(Control::Continue)
        },
    );
    match run {
        Ok(end) if !end.stopped => return Ok(out),
        Ok(_) if blown => {
            out.termination = PhaseTermination::Truncated;
            return Ok(out);
        }
        Ok(_) => {}
        Err(Error::StepUnderflow(_) | Error::NonFinite(_)) if out.len() > 1 => {
            out.termination = PhaseTermination::Truncated;
            return Ok(out);
        }
        Err(e) => return Err(e),
    }
    debug_assert!(near_zero);

    // Finish the approach to f = 0 with f as the independent variable:
    // dPhi/df = f/g, dg/df = q f^2/g - Phi, dI/df = f^2/g.
    let n = out.len() - 1;
    let (fs, y0) = (out.f[n], [out.phi[n], out.f[n] * out.fdot[n], out.integral[n]]);
    let ftol = Tolerances {
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_step: 0.1 * fs,
    };
    let mut tail = Vec::new();
    let end = solve(
        |f, y: &[f64; 3]| [f / y[1], q * f * f / y[1] - y[0], f * f / y[1]],
        fs,
        y0,
        0.0,
        &ftol,
        |st| {
            tail.push((st.t1, st.y1));
            if st.y1[0] > phi_max {
                return Ok(Control::Stop);
            }
            Ok(Control::Continue)
        },
    );
    let end = match end {
        Ok(e) => e,
        Err(Error::StepUnderflow(_) | Error::NonFinite(_)) => {
            out.termination = PhaseTermination::Truncated;
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    for (f, y) in tail {
        if y[0] > phi_max || y[0] <= *out.phi.last().unwrap_or(&f64::NEG_INFINITY) {
            break;
        }
        out.phi.push(y[0]);
        out.f.push(f);
        out.fdot.push(if f == 0.0 {
            f64::NEG_INFINITY.copysign(-y[1])
        } else {
            y[1] / f
        });
        out.integral.push(y[2]);
    }
    if end.stopped {
        // The zero lies beyond phi_max.
        return Ok(out);
    }
    let g_end = end.y[1];
    out.termination = if g_end.abs() > 1e-6 * a * a * a {
        PhaseTermination::BranchPointAt(end.y[0])
    } else {
        PhaseTermination::Truncated
    };
    Ok(out)
}

/// Agreement between a time-domain solution and the phase-plane curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub max_deviation: f64,
    pub samples: usize,
    pub phi_range: (f64, f64),
}

/// Compare `Phi'(tau)` with `f(Phi(tau))` at every stored sample of the
/// time-domain solution whose `Phi` lies in the phase-plane range.
pub fn phase_consistency_check(sol: &NumericSolution, phase: &PhaseProfile) -> ConsistencyReport {
    let (lo, hi) = phase.phi_range();
    let scale = sol.a / phase.a;
    let p = &sol.profile;
    let mut max_deviation: f64 = 0.0;
    let mut samples = 0;
    let (mut seen_lo, mut seen_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..p.len() {
        // Bring the time-domain sample to the phase-plane amplitude.
        let phi = p.phi[i] / scale;
        if let Some(f) = phase.f_at(phi) {
            if phi > lo && phi <= hi {
                let dev = (f - p.dphi[i] / (scale * scale)).abs();
                max_deviation = max_deviation.max(dev);
                samples += 1;
                seen_lo = seen_lo.min(phi);
                seen_hi = seen_hi.max(phi);
            }
        }
    }
    ConsistencyReport {
        max_deviation,
        samples,
        phi_range: (seen_lo, seen_hi),
    }
}

/// Far-field amplitude `B = m b^{1/m}` of `f` from the time-domain constant `b`.
pub fn phase_amplitude(m: f64, b: f64) -> f64 {
    m * b.powf(1.0 / m)
}

/// Exponent of the algebraic prefactor of the exponentially small far-field mode.
pub fn kappa1(m: f64) -> f64 {
    -(2.0 * m * m + 4.0 * m - 4.0) / (m * (m + 1.0))
}

/// Rate `m / (B (m+1))` of that mode in `x = Phi^{(m+1)/m}`.
pub fn farfield_decay_rate(m: f64, big_b: f64) -> f64 {
    m / (big_b * (m + 1.0))
}

const THETA_ORDER: usize = 8;
const FIT_TAIL_TOL: f64 = 1e-10;

fn farfield_with_amplitude(m: f64, big_b: f64, phi: f64, tail_tol: f64) -> Result<f64> {
    let x = phi.powf((m + 1.0) / m);
    let th = theta_coeffs(m, big_b, THETA_ORDER);
    let mut sum = 0.0;
    let mut last = 0.0;
    for (k, c) in th.theta.iter().enumerate().skip(1) {
        last = c * x.powi(-(k as i32));
        sum += last;
    }
    if !(last.abs() <= tail_tol) {
        return Err(Error::FarFieldNotReached(format!(
            "algebraic series tail {:e} at Phi = {phi} exceeds {tail_tol:e}",
            last.abs()
        )));
    }
    Ok(big_b * phi.powf(1.0 - 1.0 / m) * (1.0 + sum))
}

/// Algebraic large-`Phi` form of `f` for the solution with far-field constant `b`.
pub fn phase_farfield(m: f64, b: f64, phi: f64) -> Result<f64> {
    if !(m > 0.5 && m.is_finite() && b > 0.0 && phi > 0.0) {
        return Err(Error::Domain(format!(
            "far field needs m in (1/2, inf), b > 0, Phi > 0; got {m}, {b}, {phi}"
        )));
    }
    farfield_with_amplitude(m, phase_amplitude(m, b), phi, 1e-10)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseFarFieldFit {
    pub big_b: f64,
    pub spread: f64,
    /// `b` implied by `B = m b^{1/m}`.
    pub b: f64,
    pub window: (f64, f64),
}

/// Fit the far-field amplitude on a window where the exponential mode has
/// decayed below `exp(-threshold)`.
pub fn fit_phase_amplitude(phase: &PhaseProfile, threshold: f64) -> Result<PhaseFarFieldFit> {
    let m = phase.m;
    if !(m > 0.5 && m.is_finite()) {
        return Err(Error::Domain(format!("far-field fit needs finite m > 1/2, got {m}")));
    }
    let (_, hi) = phase.phi_range();
    let fh = phase
        .f_at(hi)
        .ok_or_else(|| Error::FarFieldNotReached("empty phase profile".into()))?;
    let q = 1.0 - 1.0 / m;
    let b0 = fh / hi.powf(q);
    // x = Phi^{(m+1)/m} with a1 x >= threshold
    let x0 = threshold / farfield_decay_rate(m, b0);
    let mut p0 = x0.powf(m / (m + 1.0));
    // also wait for the algebraic series to settle
    while p0 < hi && farfield_with_amplitude(m, b0, p0, FIT_TAIL_TOL).is_err() {
        p0 *= 1.05;
    }
    let p1 = 1.3 * p0;
    if p1 > hi {
        return Err(Error::FarFieldNotReached(format!(
            "fit window [{p0}, {p1}] extends past Phi = {hi}"
        )));
    }
    let mut bs = Vec::new();
    for k in 0..5 {
        let phi = p0 + (p1 - p0) * k as f64 / 4.0;
        let target = phase
            .f_at(phi)
            .ok_or_else(|| Error::Domain(format!("Phi = {phi} off the profile")))?;
        let root = brent(
            |bb| farfield_with_amplitude(m, bb, phi, f64::INFINITY).map(|f| f - target),
            0.5 * b0,
            2.0 * b0,
            1e-14 * b0,
            200,
        )?;
        bs.push(root.x);
    }
    let n = bs.len() as f64;
    let big_b = bs.iter().sum::<f64>() / n;
    let lo = bs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_b = bs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(PhaseFarFieldFit {
        big_b,
        spread: hi_b - lo,
        b: (big_b / m).powf(m),
        window: (p0, p1),
    })
}

/// Solutions of the form `Psi = A F + B` in the variables `F = f/Phi^2`,
/// `Psi = Phi dF/dPhi`; each reduces the profile equation to
/// `Phi' = Phi^2 [(C/A) |Phi|^A - B/A]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearAnsatz {
    pub m: f64,
    pub slope: f64,
    pub offset: f64,
}

impl LinearAnsatz {
    /// `Phi'` on the family with constant `c`.
    pub fn dphi(&self, c: f64, phi: f64) -> f64 {
        phi * phi * (c / self.slope * phi.abs().powf(self.slope) - self.offset / self.slope)
    }

    /// Constant `c` of the family through `(Phi, Phi')`.
    pub fn constant_through(&self, phi: f64, dphi: f64) -> f64 {
        (dphi / (phi * phi) + self.offset / self.slope) * self.slope / phi.abs().powf(self.slope)
    }

    /// Residuals of the three coefficient constraints.
    pub fn constraints(&self) -> [f64; 3] {
        ansatz_constraints(self.m, self.slope, self.offset)
    }
}

fn ansatz_constraints(m: f64, a: f64, b: f64) -> [f64; 3] {
    [
        b * b + b,
        a + 3.0 * a * b + 7.0 * b + (m + 1.0) / m,
        2.0 * a * a + 7.0 * a + 6.0,
    ]
}

/// All linear-ansatz families, found by enumerating the roots of the outer
/// constraints and solving the middle one for `m`.
pub fn linear_ansatz_families() -> Vec<LinearAnsatz> {
    let mut out = Vec::new();
    for offset in [0.0, -1.0] {
        for slope in [-2.0, -1.5] {
            // (m+1)/m = k  =>  m = 1/(k-1)
            let k = -(slope + 3.0 * slope * offset + 7.0 * offset);
            if k != 1.0 {
                let m = 1.0 / (k - 1.0);
                if m > 0.0 {
                    out.push(LinearAnsatz { m, slope, offset });
                }
            }
        }
    }
    out.sort_by(|x, y| x.m.total_cmp(&y.m));
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingReport {
    pub max_rel_deviation: f64,
    pub samples: usize,
}

/// Compare `f(Phi, a)` with `a^2 f(Phi/a, 1)` from two independent solves.
pub fn phase_scaling_check(m: f64, a: f64, phi_max: f64, cfg: &PhaseConfig) -> Result<ScalingReport> {
    let fa = solve_phase_cp(m, a, phi_max, cfg)?;
    let f1 = solve_phase_cp(m, 1.0, phi_max / a, cfg)?;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for (i, &phi) in fa.phi.iter().enumerate() {
        if let Some(v) = f1.f_at(phi / a) {
            let scaled = a * a * v;
            worst = worst.max((fa.f[i] - scaled).abs() / fa.f[i].abs().max(1e-300));
            samples += 1;
        }
    }
    Ok(ScalingReport {
        max_rel_deviation: worst,
        samples,
    })
}
