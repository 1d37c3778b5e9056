//! Dormand–Prince 5(4) integration with dense output, and the event-driven
//! driver for the third-order profile equation written as a first-order
//! system in (Phi, Phi', Phi'').

use crate::roots::brent;
use crate::types::{Error, MValue, Profile, Result, Termination};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Error control settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: 1e-10,
            abs: 1e-12,
            max_step: 0.1,
        }
    }
}

/// One accepted step with its continuous extension.
#[derive(Clone, Debug)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    r: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    /// Fourth-order interpolant on [t0, t1].
    pub fn dense(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            let r = &self.r;
            *o = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

/// Observer verdict after each accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Control {
    Continue,
    Stop,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        *o += h * s;
    }
    out
}

struct Stages<const N: usize> {
    y1: [f64; N],
    err: [f64; N],
    k: [[f64; N]; 7],
}

fn dp_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Stages<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y1);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Stages {
        y1,
        err,
        k: [*k1, k2, k3, k4, k5, k6, k7],
    }
}

/// Single fifth-order step of exactly `h`, used to land on located events.
pub fn single_step<const N: usize, F>(mut f: F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    dp_step(&mut f, t, y, &k1, h).y1
}

fn err_norm<const N: usize>(y0: &[f64; N], y1: &[f64; N], err: &[f64; N], tol: &Tolerances) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        s += (err[i] / sc).powi(2);
    }
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], k1: &[f64; N], dir: f64, tol: &Tolerances) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let scale = |i: usize| tol.abs + tol.rel * y0[i].abs();
    let norm = |v: &[f64; N]| ((0..N).map(|i| (v[i] / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(tol.max_step);
    let y1 = axpy(y0, dir * h0, &[(1.0, k1)]);
    let k2 = f(t0 + dir * h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = k2[i] - k1[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(tol.max_step)
}

/// Outcome of [`solve`]: where integration stopped and the state there.
#[derive(Clone, Debug)]
pub struct SolveEnd<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub stopped: bool,
}

/// Integrate from `t0` toward `t_end` (either direction), handing every
/// accepted step to `on_step`. Integration ends at `t_end` or when the
/// observer returns [`Control::Stop`].
pub fn solve<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    mut on_step: O,
) -> Result<SolveEnd<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(&Step<N>) -> Result<Control>,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    if t == t_end {
        return Ok(SolveEnd { t, y, stopped: false });
    }
    let mut k1 = f(t, &y);
    let mut h = initial_step(&mut f, t, &y, &k1, dir, tol);
    let mut last_nonfinite = false;
    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            return Ok(SolveEnd { t, y, stopped: false });
        }
        let min_step = 1e-14 * t.abs().max(1.0);
        if h < min_step {
            return Err(if last_nonfinite {
                Error::NonFinite(t)
            } else {
                Error::StepUnderflow(t)
            });
        }
        let landing = h >= remaining;
        let hs = if landing { remaining } else { h };
        let st = dp_step(&mut f, t, &y, &k1, dir * hs);
        let en = err_norm(&y, &st.y1, &st.err, tol);
        if !en.is_finite() || st.y1.iter().any(|v| !v.is_finite()) {
            last_nonfinite = true;
            h = hs * 0.2;
            continue;
        }
        last_nonfinite = false;
        if en <= 1.0 {
            let t1 = if landing { t_end } else { t + dir * hs };
            let hh = dir * hs;
            let k = &st.k;
            let mut r = [[0.0; N]; 5];
            for i in 0..N {
                let dy = st.y1[i] - y[i];
                let bspl = hh * k[0][i] - dy;
                r[0][i] = y[i];
                r[1][i] = dy;
                r[2][i] = bspl;
                r[3][i] = dy - hh * k[6][i] - bspl;
                r[4][i] =
                    hh * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let step = Step {
                t0: t,
                t1,
                y0: y,
                y1: st.y1,
                r,
            };
            t = t1;
            y = st.y1;
            k1 = st.k[6];
            let fac = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (hs * fac).min(tol.max_step);
            if on_step(&step)? == Control::Stop {
                return Ok(SolveEnd { t, y, stopped: true });
            }
        } else {
            h = hs * (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
}

/// Right-hand side of the profile equation as a first-order system.
pub fn rhs(m: MValue, z: &[f64; 3]) -> [f64; 3] {
    [z[1], z[2], m.q() * z[1] * z[1] - z[0] * z[2]]
}

/// Third and fourth derivatives of Phi implied by the equation.
pub fn higher_derivatives(m: MValue, z: &[f64; 3]) -> (f64, f64) {
    let q = m.q();
    let d3 = q * z[1] * z[1] - z[0] * z[2];
    let d4 = 2.0 * q * z[1] * z[2] - z[1] * z[2] - z[0] * d3;
    (d3, d4)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeState {
    pub tau: f64,
    pub z: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    PhiZero,
    DPhiZero,
    PoleGuard,
    StopAtTau(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationSpec {
    pub m: MValue,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub events: Vec<Event>,
    pub pole_threshold: f64,
    /// Longest distance travelled when no stop is requested.
    pub span_limit: f64,
    /// Accepted steps before the run is cut short.
    pub max_steps: usize,
}

impl IntegrationSpec {
    pub fn new(m: MValue, events: Vec<Event>) -> Self {
        let t = Tolerances::default();
        IntegrationSpec {
            m,
            rel_tol: t.rel,
            abs_tol: t.abs,
            max_step: t.max_step,
            events,
            pole_threshold: 1e6,
            span_limit: 500.0,
            max_steps: 2_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v <= 1e-2;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::Domain("tolerances must lie in (0, 1e-2]".into()));
        }
        if self.pole_threshold < 1e3 {
            return Err(Error::Domain("pole threshold must be at least 1e3".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventHit {
    pub event: Event,
    pub tau: f64,
    pub state: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub profile: Profile,
    pub hit: Option<EventHit>,
}

/// Whether the state matches the local pole envelope c/(tau - tau_p).
fn pole_signature(c: f64, z: &[f64; 3]) -> bool {
    let ratio = z[1] * c / (z[0] * z[0]);
    (-1.05..=-0.95).contains(&ratio)
}

/// Locate the zero of component `idx` inside an accepted step.
pub fn locate_event<const N: usize>(step: &Step<N>, idx: usize, xtol: f64) -> Result<f64> {
    let (a, b) = (step.t0.min(step.t1), step.t0.max(step.t1));
    brent(|t| Ok(step.dense(t)[idx]), a, b, xtol, 200)
        .map(|r| r.x)
        .map_err(|_| Error::BracketLost(step.t1))
}

fn crossed(prev: f64, next: f64) -> bool {
    prev != 0.0 && (next == 0.0 || prev.signum() != next.signum())
}

/// Integrate the profile equation from `start` until the first requested
/// event, the span limit, or a confirmed pole.
pub fn integrate(start: OdeState, direction: Direction, spec: &IntegrationSpec) -> Result<Trajectory> {
    spec.validate()?;
    if start.z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(start.tau));
    }
    let m = spec.m;
    let dir = match direction {
        Direction::Left => -1.0,
        Direction::Right => 1.0,
    };
    let stop = spec
        .events
        .iter()
        .filter_map(|e| match e {
            Event::StopAtTau(t) if (t - start.tau) * dir >= 0.0 => Some(*t),
            _ => None,
        })
        .min_by(|a, b| ((a - start.tau) * dir).total_cmp(&((b - start.tau) * dir)));
    let t_end = stop.unwrap_or(start.tau + dir * spec.span_limit);
    if t_end == start.tau {
        return Err(Error::Domain(format!("empty integration span at tau = {}", start.tau)));
    }
    let want = |e: Event| spec.events.contains(&e);
    let tol = Tolerances {
        rel: spec.rel_tol,
        abs: spec.abs_tol,
        max_step: spec.max_step,
    };
    let c_pole = m.pole_coefficient();
    let xtol = 1e-14 * (1.0 + start.tau.abs());

    let mut taus = vec![start.tau];
    let mut states = vec![start.z];
    let mut hit: Option<EventHit> = None;
    let mut pole: Option<f64> = None;
    let mut out_of_steps = false;
    let f = |_: f64, z: &[f64; 3]| rhs(m, z);

    let end = solve(f, start.tau, start.z, t_end, &tol, |step| {
        let mut found: Option<(Event, f64)> = None;
        let mut consider = |e: Event, idx: usize| -> Result<()> {
            if want(e) && crossed(step.y0[idx], step.y1[idx]) {
                let te = if step.y1[idx] == 0.0 {
                    step.t1
                } else {
                    locate_event(step, idx, xtol)?
                };
                if found.is_none_or(|(_, tf)| (te - tf) * dir < 0.0) {
                    found = Some((e, te));
                }
            }
            Ok(())
        };
        consider(Event::PhiZero, 0)?;
        consider(Event::DPhiZero, 1)?;
        if let Some((event, te)) = found {
            let z = if te == step.t1 {
                step.y1
            } else {
                single_step(f, step.t0, &step.y0, te - step.t0)
            };
            taus.push(te);
            states.push(z);
            hit = Some(EventHit {
                event,
                tau: te,
                state: z,
            });
            return Ok(Control::Stop);
        }
        taus.push(step.t1);
        states.push(step.y1);
        if want(Event::PoleGuard) && step.y1[0].abs() > spec.pole_threshold && pole_signature(c_pole, &step.y1) {
            // envelope fit over the last decade of |Phi|
            let last = step.y1[0].abs();
            let mut sum = 0.0;
            let mut n = 0.0;
            for (t, z) in taus.iter().zip(&states).rev() {
                if z[0].abs() < last / 10.0 {
                    break;
                }
                sum += t - c_pole / z[0];
                n += 1.0;
            }
            let tp = sum / n;
            pole = Some(tp);
            hit = Some(EventHit {
                event: Event::PoleGuard,
                tau: tp,
                state: step.y1,
            });
            return Ok(Control::Stop);
        }
        if taus.len() > spec.max_steps {
            out_of_steps = true;
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    })?;

    let termination = if let Some(tp) = pole {
        Termination::PoleAt(tp)
    } else if out_of_steps {
        Termination::Truncated(format!("step budget {} exhausted at tau = {}", spec.max_steps, end.t))
    } else if hit.is_some() || stop.is_some() && end.t == t_end {
        Termination::Completed
    } else {
        Termination::Truncated(format!("span limit {} reached", spec.span_limit))
    };
    if hit.is_none() && stop.is_some() && end.t == t_end {
        hit = Some(EventHit {
            event: Event::StopAtTau(t_end),
            tau: t_end,
            state: end.y,
        });
    }
    if dir < 0.0 {
        taus.reverse();
        states.reverse();
    }
    let profile = Profile::new(
        taus,
        states.iter().map(|z| z[0]).collect(),
        states.iter().map(|z| z[1]).collect(),
        states.iter().map(|z| z[2]).collect(),
        termination,
    )?;
    Ok(Trajectory { profile, hit })
}

/// Quintic Hermite interpolation of the profile, using the equation for
/// the third and fourth derivatives at the nodes.
pub fn hermite_eval(m: MValue, profile: &Profile, tau: f64) -> Option<[f64; 3]> {
    let n = profile.len();
    if !(tau >= profile.tau[0] && tau <= profile.tau[n - 1]) {
        return None;
    }
    let i = match profile.tau.partition_point(|&t| t <= tau) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let (t0, t1) = (profile.tau[i], profile.tau[i + 1]);
    let z0 = profile.state(i);
    let z1 = profile.state(i + 1);
    let (a3, a4) = higher_derivatives(m, &z0);
    let (b3, b4) = higher_derivatives(m, &z1);
    let h = t1 - t0;
    let s = (tau - t0) / h;
    let phi = quintic(s, h, [z0[0], z0[1], z0[2]], [z1[0], z1[1], z1[2]]);
    let dphi = quintic(s, h, [z0[1], z0[2], a3], [z1[1], z1[2], b3]);
    let ddphi = quintic(s, h, [z0[2], a3, a4], [z1[2], b3, b4]);
    Some([phi, dphi, ddphi])
}

/// Quintic Hermite basis on [0,1] with value/first/second derivative data
/// scaled by the interval length `h`.
pub fn quintic(s: f64, h: f64, p0: [f64; 3], p1: [f64; 3]) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h20 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h21 = 0.5 * (s3 - 2.0 * s4 + s5);
    h00 * p0[0] + h * h10 * p0[1] + h * h * h20 * p0[2] + h01 * p1[0] + h * h11 * p1[1] + h * h * h21 * p1[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_state(tau: f64) -> [f64; 3] {
        let t = (tau / 2.0).tanh();
        let s2 = 1.0 - t * t;
        [t, 0.5 * s2, -0.5 * t * s2]
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(rhs(MValue::Finite(1.0), &[0.0, 1.0, 0.0]), [1.0, 0.0, 0.0]);
        assert_eq!(rhs(MValue::Infinite, &[-1.0, 1.0, 1.0]), [1.0, 1.0, 2.0]);
        assert_eq!(rhs(MValue::Finite(0.7), &[-2.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn dopri_exponential_growth() {
        let tol = Tolerances {
            rel: 1e-12,
            abs: 1e-14,
            max_step: 1.0,
        };
        let end = solve(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            3.0,
            &tol,
            |_| Ok(Control::Continue),
        )
        .unwrap();
        assert!((end.y[0] - 3f64.exp()).abs() < 1e-9);
        let back = solve(
            |_, y: &[f64; 1]| [y[0]],
            3.0,
            end.y,
            0.0,
            &tol,
            |_| Ok(Control::Continue),
        )
        .unwrap();
        assert!((back.y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dense_output_tracks_sine() {
        let tol = Tolerances {
            rel: 1e-10,
            abs: 1e-12,
            max_step: 0.5,
        };
        let mut worst: f64 = 0.0;
        solve(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            6.0,
            &tol,
            |st| {
                for k in 1..10 {
                    let t = st.t0 + (st.t1 - st.t0) * k as f64 / 10.0;
                    worst = worst.max((st.dense(t)[0] - t.sin()).abs());
                }
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn tanh_trajectory_matches_closed_form() {
        let m = MValue::Finite(0.5);
        let spec = IntegrationSpec::new(m, vec![Event::StopAtTau(5.0)]);
        let tr = integrate(
            OdeState {
                tau: -5.0,
                z: tanh_state(-5.0),
            },
            Direction::Right,
            &spec,
        )
        .unwrap();
        assert_eq!(tr.profile.termination, Termination::Completed);
        for i in 0..tr.profile.len() {
            let e = tanh_state(tr.profile.tau[i]);
            assert!((tr.profile.phi[i] - e[0]).abs() < 1e-9);
        }
        for k in 0..=100 {
            let tau = -5.0 + 0.1 * k as f64;
            let v = hermite_eval(m, &tr.profile, tau).unwrap();
            let e = tanh_state(tau);
            for j in 0..3 {
                assert!((v[j] - e[j]).abs() < 1e-9, "tau {tau} comp {j}");
            }
        }
    }

    #[test]
    fn phi_zero_event_on_tanh() {
        let spec = IntegrationSpec::new(MValue::Finite(0.5), vec![Event::PhiZero, Event::StopAtTau(5.0)]);
        let tr = integrate(
            OdeState {
                tau: -5.0,
                z: tanh_state(-5.0),
            },
            Direction::Right,
            &spec,
        )
        .unwrap();
        let hit = tr.hit.unwrap();
        assert_eq!(hit.event, Event::PhiZero);
        // global error of the trajectory dominates; the locator itself is tighter
        assert!(hit.tau.abs() < 1e-8, "tau {}", hit.tau);
        assert!(hit.state[0].abs() < 1e-12, "phi {}", hit.state[0]);
        assert_eq!(tr.profile.last_tau(), hit.tau);
    }

    #[test]
    fn stop_at_tau_is_exact() {
        let spec = IntegrationSpec::new(MValue::Finite(0.5), vec![Event::StopAtTau(0.0)]);
        let tr = integrate(
            OdeState {
                tau: -5.0,
                z: tanh_state(-5.0),
            },
            Direction::Right,
            &spec,
        )
        .unwrap();
        assert_eq!(tr.profile.last_tau(), 0.0);
        assert_eq!(tr.hit.unwrap().event, Event::StopAtTau(0.0));
    }

    #[test]
    fn equilibrium_is_constant() {
        let spec = IntegrationSpec::new(MValue::Finite(2.0), vec![Event::StopAtTau(3.0)]);
        let tr = integrate(
            OdeState {
                tau: 0.0,
                z: [-1.5, 0.0, 0.0],
            },
            Direction::Right,
            &spec,
        )
        .unwrap();
        assert!(tr.profile.phi.iter().all(|&p| p == -1.5));
        assert!(tr.profile.dphi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn pole_detected_for_exact_envelope() {
        let m = MValue::Finite(1.0);
        let c = m.pole_coefficient();
        let tp = 2.0;
        let x: f64 = -1.0;
        let z = [c / x, -c / (x * x), 2.0 * c / (x * x * x)];
        let spec = IntegrationSpec::new(m, vec![Event::PoleGuard, Event::StopAtTau(10.0)]);
        let tr = integrate(OdeState { tau: tp + x, z }, Direction::Right, &spec).unwrap();
        match tr.profile.termination {
            Termination::PoleAt(p) => assert!((p - tp).abs() < 1e-8, "pole at {p}"),
            ref t => panic!("unexpected termination {t:?}"),
        }
    }

    #[test]
    fn leftward_integration_reverses_storage() {
        let spec = IntegrationSpec::new(MValue::Finite(0.5), vec![Event::StopAtTau(-4.0)]);
        let tr = integrate(
            OdeState {
                tau: 1.0,
                z: tanh_state(1.0),
            },
            Direction::Left,
            &spec,
        )
        .unwrap();
        assert_eq!(tr.profile.first_tau(), -4.0);
        assert_eq!(tr.profile.last_tau(), 1.0);
        assert!((tr.profile.phi[0] - (-2.0f64).tanh()).abs() < 1e-9);
    }

    #[test]
    fn step_budget_truncates() {
        let mut spec = IntegrationSpec::new(MValue::Finite(1.0), vec![Event::StopAtTau(5.0)]);
        spec.max_steps = 10;
        let tr = integrate(
            OdeState {
                tau: 0.0,
                z: [0.0, 1.0, 0.5],
            },
            Direction::Right,
            &spec,
        )
        .unwrap();
        assert_eq!(tr.profile.len(), 11);
        assert!(tr.hit.is_none());
        assert!(matches!(tr.profile.termination, Termination::Truncated(ref r) if r.contains("step budget")));
    }

    #[test]
    fn span_limit_truncates() {
        let mut spec = IntegrationSpec::new(MValue::Finite(2.0), vec![]);
        spec.span_limit = 2.0;
        let tr = integrate(
            OdeState {
                tau: 0.0,
                z: [-1.0, 0.0, 0.0],
            },
            Direction::Right,
            &spec,
        )
        .unwrap();
        assert!(matches!(tr.profile.termination, Termination::Truncated(_)));
    }

    #[test]
    fn rejects_bad_tolerances() {
        let mut spec = IntegrationSpec::new(MValue::Finite(2.0), vec![]);
        spec.rel_tol = 0.5;
        assert!(integrate(OdeState { tau: 0.0, z: [0.0; 3] }, Direction::Right, &spec).is_err());
    }
}
