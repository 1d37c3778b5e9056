//! Physical-plane velocity, stream function and streamlines built from a
//! self-similar profile.

use crate::integrator::{solve, Control, Tolerances};
use crate::roots::{brent, golden_max};
use crate::types::{Error, MValue, Result, Solution};

/// Similarity variables for a given exponent and viscosity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityMap {
    pub m: MValue,
    pub nu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPoint {
    pub tau: f64,
    pub u: f64,
    pub v: f64,
    pub psi: f64,
}

impl SimilarityMap {
    pub fn new(m: MValue, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("nu must be positive, got {nu}")));
        }
        if let MValue::Finite(v) = m {
            MValue::new(v)?;
        }
        Ok(SimilarityMap { m, nu })
    }

    fn check_x(&self, x: f64) -> Result<()> {
        let ok = match self.m {
            MValue::Infinite => x >= 0.0,
            MValue::Finite(_) => x > 0.0,
        };
        if ok && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("x = {x} outside the flow domain")))
        }
    }

    /// tau = sqrt(m/(nu(m+1))) y x^{-1/(m+1)}
    pub fn tau(&self, x: f64, y: f64) -> Result<f64> {
        self.check_x(x)?;
        Ok(match self.m {
            MValue::Infinite => y / self.nu.sqrt(),
            MValue::Finite(m) => (m / (self.nu * (m + 1.0))).sqrt() * y * x.powf(-1.0 / (m + 1.0)),
        })
    }

    /// Height of the level line tau = const at abscissa x.
    pub fn y_of_tau(&self, x: f64, tau: f64) -> Result<f64> {
        self.check_x(x)?;
        Ok(match self.m {
            MValue::Infinite => tau * self.nu.sqrt(),
            MValue::Finite(m) => tau * (self.nu * (m + 1.0) / m).sqrt() * x.powf(1.0 / (m + 1.0)),
        })
    }

    /// Flow quantities given the profile state at the point's tau.
    pub fn from_state(&self, x: f64, tau: f64, z: [f64; 3]) -> FlowPoint {
        let nu = self.nu;
        match self.m {
            MValue::Infinite => FlowPoint {
                tau,
                u: x * z[1],
                v: -nu.sqrt() * z[0],
                psi: nu.sqrt() * x * z[0],
            },
            MValue::Finite(m) => {
                let mp = m + 1.0;
                FlowPoint {
                    tau,
                    u: x.powf((m - 1.0) / mp) * z[1],
                    v: (nu / (m * mp)).sqrt() * x.powf(-1.0 / mp) * (tau * z[1] - m * z[0]),
                    psi: (nu * mp / m).sqrt() * x.powf(m / mp) * z[0],
                }
            }
        }
    }

    pub fn velocity<S: Solution + ?Sized>(&self, sol: &S, x: f64, y: f64) -> Result<FlowPoint> {
        let tau = self.tau(x, y)?;
        Ok(self.from_state(x, tau, sol.state(tau)?))
    }
}

/// The mirror solution -Phi(-tau), which solves the same equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reflected<S>(pub S);

impl<S: Solution> Solution for Reflected<S> {
    fn m(&self) -> MValue {
        self.0.m()
    }

    fn state(&self, tau: f64) -> Result<[f64; 3]> {
        let z = self.0.state(-tau)?;
        Ok([-z[0], z[1], -z[2]])
    }
}

/// Far-field coefficient U0 in u ~ U0 y^{m-1} for large y.
pub fn upper_velocity_coefficient(m: f64, b: f64, nu: f64) -> f64 {
    m * b * (m / ((m + 1.0) * nu)).powf(0.5 * (m - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo && count >= 2) {
            return Err(Error::Domain(format!("bad grid axis [{lo}, {hi}] with {count} points")));
        }
        Ok(Axis { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    self.lo + h * i as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowGridSpec {
    pub x: Axis,
    pub y: Axis,
    pub nu: f64,
}

/// Fields on a rectangular grid, indexed [iy][ix]. Cells where the profile
/// is undefined (past a pole) hold NaN and are counted in `masked`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub m: MValue,
    pub nu: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub masked: usize,
}

pub fn evaluate_field<S: Solution + ?Sized>(sol: &S, spec: &FlowGridSpec) -> Result<FlowField> {
    let map = SimilarityMap::new(sol.m(), spec.nu)?;
    let xs = spec.x.points();
    let ys = spec.y.points();
    for &x in &xs {
        map.check_x(x)?;
    }
    let mut masked = 0;
    let (mut u, mut v, mut psi) = (Vec::new(), Vec::new(), Vec::new());
    for &y in &ys {
        let (mut ru, mut rv, mut rp) = (Vec::new(), Vec::new(), Vec::new());
        for &x in &xs {
            match map.velocity(sol, x, y) {
                Ok(p) => {
                    ru.push(p.u);
                    rv.push(p.v);
                    rp.push(p.psi);
                }
                Err(Error::Domain(_) | Error::Undefined(_)) => {
                    masked += 1;
                    ru.push(f64::NAN);
                    rv.push(f64::NAN);
                    rp.push(f64::NAN);
                }
                Err(e) => return Err(e),
            }
        }
        u.push(ru);
        v.push(rv);
        psi.push(rp);
    }
    Ok(FlowField {
        m: sol.m(),
        nu: spec.nu,
        xs,
        ys,
        u,
        v,
        psi,
        masked,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamlineStop {
    /// Reached the requested end abscissa.
    DomainEdge,
    ArcLimit,
    /// Horizontal velocity vanished.
    Stagnation,
    /// The profile is not defined further on (pole).
    Undefined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Streamline {
    pub points: Vec<(f64, f64)>,
    pub stop: StreamlineStop,
}

/// Integrate dy/dx = v/u from `seed` towards `x_end`.
pub fn trace_streamline<S: Solution + ?Sized>(
    sol: &S,
    map: &SimilarityMap,
    seed: (f64, f64),
    x_end: f64,
    arc_limit: f64,
) -> Result<Streamline> {
    let (x0, y0) = seed;
    map.check_x(x_end)?;
    let p0 = map.velocity(sol, x0, y0)?;
    let scale = 1.0 + p0.u.abs().max(p0.v.abs());
    if p0.u.abs() < 1e-12 * scale {
        return Err(Error::Domain(format!(
            "streamline seed ({x0}, {y0}) is a stagnation point of u"
        )));
    }
    let sign0 = p0.u.signum();
    let mut points = vec![(x0, y0)];
    if x_end == x0 {
        return Ok(Streamline {
            points,
            stop: StreamlineStop::DomainEdge,
        });
    }
    let mut arc = 0.0;
    let mut stop = StreamlineStop::DomainEdge;
    let failed = std::cell::Cell::new(false);
    let slope = |x: f64, y: &[f64; 1]| -> [f64; 1] {
        match map.velocity(sol, x, y[0]) {
            Ok(p) => [p.v / p.u],
            Err(_) => {
                failed.set(true);
                [f64::NAN]
            }
        }
    };
    let tol = Tolerances {
        rel: 1e-10,
        abs: 1e-12,
        max_step: 0.05 * (x_end - x0).abs(),
    };
    let run = solve(slope, x0, [y0], x_end, &tol, |step| {
        let (x, y) = (step.t1, step.y1[0]);
        let p = match map.velocity(sol, x, y) {
            Ok(p) => p,
            Err(_) => {
                stop = StreamlineStop::Undefined;
                return Ok(Control::Stop);
            }
        };
        let (px, py) = points[points.len() - 1];
        arc += ((x - px).powi(2) + (y - py).powi(2)).sqrt();
        points.push((x, y));
        if p.u.signum() != sign0 || p.u.abs() < 1e-12 * scale {
            stop = StreamlineStop::Stagnation;
            return Ok(Control::Stop);
        }
        if arc >= arc_limit {
            stop = StreamlineStop::ArcLimit;
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    });
    match run {
        Ok(_) => {}
        Err(Error::NonFinite(_) | Error::StepUnderflow(_)) if failed.get() || points.len() > 1 => {
            if stop == StreamlineStop::DomainEdge {
                stop = if failed.get() {
                    StreamlineStop::Undefined
                } else {
                    StreamlineStop::Stagnation
                };
            }
        }
        Err(e) => return Err(e),
    }
    Ok(Streamline { points, stop })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

/// Vertical slices of (u, v) at fixed x.
pub fn velocity_profiles<S: Solution + ?Sized>(
    sol: &S,
    map: &SimilarityMap,
    xs: &[f64],
    y: &Axis,
) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::new();
    for &x in xs {
        for yy in y.points() {
            match map.velocity(sol, x, yy) {
                Ok(p) => rows.push(ProfileRow {
                    x,
                    y: yy,
                    u: p.u,
                    v: p.v,
                }),
                Err(Error::Undefined(_) | Error::Domain(_)) if x > 0.0 => rows.push(ProfileRow {
                    x,
                    y: yy,
                    u: f64::NAN,
                    v: f64::NAN,
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

/// Landmarks of the vertical velocity on y > 0 at fixed x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerticalLandmarks {
    pub x: f64,
    /// First zero of v above the axis.
    pub y0: f64,
    pub y_max: f64,
    pub v_max: f64,
    /// v evaluated at `y_far`.
    pub v_far: f64,
}

pub fn vertical_landmarks<S: Solution + ?Sized>(
    sol: &S,
    map: &SimilarityMap,
    x: f64,
    y_far: f64,
) -> Result<VerticalLandmarks> {
    let v = |y: f64| map.velocity(sol, x, y).map(|p| p.v);
    // scan for the first sign change of v above the axis
    let n = 2000;
    let h = y_far / n as f64;
    let mut lo = h;
    let mut vlo = v(lo)?;
    let mut y0 = None;
    for k in 2..=n {
        let y = h * k as f64;
        let vy = v(y)?;
        if vy.signum() != vlo.signum() {
            y0 = Some(brent(v, lo, y, 1e-14, 200)?.x);
            break;
        }
        lo = y;
        vlo = vy;
    }
    let y0 = y0.ok_or_else(|| Error::NoConvergence(format!("v has no zero on (0, {y_far}] at x = {x}")))?;
    let (y_max, v_max) = golden_max(|y| v(y).unwrap_or(f64::NEG_INFINITY), 0.0, y0, 1e-10);
    Ok(VerticalLandmarks {
        x,
        y0,
        y_max,
        v_max,
        v_far: v(y_far)?,
    })
}

/// Limit of v as y -> +inf for a profile bounded by `phi_inf` there with
/// Phi' decaying faster than 1/tau.
pub fn vertical_velocity_limit(map: &SimilarityMap, x: f64, phi_inf: f64) -> Result<f64> {
    map.check_x(x)?;
    Ok(match map.m {
        MValue::Infinite => -map.nu.sqrt() * phi_inf,
        MValue::Finite(m) => -(map.nu / (m * (m + 1.0))).sqrt() * x.powf(-1.0 / (m + 1.0)) * m * phi_inf,
    })
}

/// Polyline of the level curve tau = `tau_level` over the given abscissae.
pub fn level_line(map: &SimilarityMap, tau_level: f64, xs: &[f64]) -> Result<Vec<(f64, f64)>> {
    xs.iter().map(|&x| map.y_of_tau(x, tau_level).map(|y| (x, y))).collect()
}
