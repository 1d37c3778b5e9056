//! Coefficient recurrences for the local expansions of the profile equation
//! and the evaluators built on them.
//!
//! All coefficient vectors are stored with an unused slot at index 0 so that
//! `coeffs[k]` is the k-th coefficient.

use crate::types::{Error, MValue, Result};

pub const DEFAULT_LYAPUNOV_ORDER: usize = 12;
pub const DEFAULT_SIM_ORDER: usize = 12;
pub const DEFAULT_FARFIELD_ORDER: usize = 8;
pub const DEFAULT_CHI_ORDER: usize = 8;
pub const DEFAULT_THETA_ORDER: usize = 8;

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Truncated power series sum_{k=0}^{n-1} c_k s^k.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    pub coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        PowerSeries { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Product truncated to the shorter of the two lengths.
    pub fn mul(&self, other: &PowerSeries) -> PowerSeries {
        let n = self.len().min(other.len());
        let mut out = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate().take(n) {
            for (j, &b) in other.coeffs.iter().enumerate().take(n - i) {
                out[i + j] += a * b;
            }
        }
        PowerSeries { coeffs: out }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCoeffs {
    pub m: MValue,
    pub a: f64,
    pub h: Vec<f64>,
}

impl LyapunovCoeffs {
    pub fn order(&self) -> usize {
        self.h.len() - 1
    }
}

pub fn lyapunov_coeffs(m: MValue, a: f64, order: usize) -> LyapunovCoeffs {
    let order = order.max(1);
    let q = m.q();
    let mut h = vec![0.0; order + 1];
    h[1] = 1.0;
    for l in 2..=order {
        let mut s = CompensatedSum::default();
        for k in 1..l {
            let (kf, lf) = (k as f64, l as f64);
            s.add(kf * (q * (lf - kf) - kf) * h[k] * h[l - k]);
        }
        let lf = l as f64;
        h[l] = s.value() / (a * lf * lf * (lf - 1.0));
    }
    LyapunovCoeffs { m, a, h }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
    pub tail: f64,
    /// Expansion variable beyond the soft threshold of 0.1.
    pub warn: bool,
}

/// Partial sums of the exponential series -a + sum h_l (d e^{a tau})^l and of
/// its first two derivatives.
pub fn eval_lyapunov(c: &LyapunovCoeffs, d: f64, tau: f64) -> Result<SeriesValue> {
    let a = c.a;
    let z = d * (a * tau).exp();
    let ratio = z.abs() / a;
    if !c.m.is_infinite() && ratio >= 1.0 {
        return Err(Error::Domain(format!(
            "exponential series evaluated outside its window: |d e^(a tau)|/a = {ratio:.3}"
        )));
    }
    let (mut p0, mut p1, mut p2) = (
        CompensatedSum::default(),
        CompensatedSum::default(),
        CompensatedSum::default(),
    );
    p0.add(-a);
    let mut zl = 1.0;
    let mut last = 0.0;
    let mut prev = 0.0;
    for l in 1..=c.order() {
        zl *= z;
        let t = c.h[l] * zl;
        let la = l as f64 * a;
        p0.add(t);
        p1.add(t * la);
        p2.add(t * la * la);
        prev = last;
        last = t;
    }
    if c.order() >= 2 && last != 0.0 && last.abs() > prev.abs() {
        return Err(Error::DivergenceSuspected(format!(
            "last term {last:e} exceeds previous {prev:e} at tau = {tau}"
        )));
    }
    let rho = ratio.min(0.99);
    let tail = 2.0 * last.abs() * rho / (1.0 - rho);
    Ok(SeriesValue {
        phi: p0.value(),
        dphi: p1.value(),
        ddphi: p2.value(),
        tail,
        warn: ratio > 0.1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimCoeffs {
    pub m: MValue,
    pub a: f64,
    pub b_coef: Vec<f64>,
    pub c_coef: Vec<f64>,
}

impl SimCoeffs {
    pub fn order(&self) -> usize {
        self.b_coef.len() - 1
    }

    /// (rho_1(y), rho_2(y)) and their derivatives, truncated at `order` terms.
    pub fn eval(&self, y: f64, order: usize) -> [f64; 4] {
        let n = order.min(self.order());
        let (mut r1, mut r2, mut d1, mut d2) = (0.0, 0.0, 0.0, 0.0);
        for k in (1..=n).rev() {
            r1 = r1 * y + self.b_coef[k];
            r2 = r2 * y + self.c_coef[k];
        }
        for k in (1..=n).rev() {
            d1 = d1 * y + k as f64 * self.b_coef[k];
            d2 = d2 * y + k as f64 * self.c_coef[k];
        }
        [r1 * y, r2 * y, d1, d2]
    }
}

pub fn sim_coeffs(m: MValue, a: f64, order: usize) -> SimCoeffs {
    let order = order.max(1);
    let q = m.q();
    let mut b = vec![0.0; order + 1];
    let mut c = vec![0.0; order + 1];
    b[1] = 1.0 / (a * a);
    c[1] = 1.0 / a;
    for k in 2..=order {
        let kf = k as f64;
        let mut sc = CompensatedSum::default();
        for l in 1..k {
            let lf = l as f64;
            sc.add(lf * c[l] * b[k - l]);
            for s in 1..=(k - l) {
                sc.add(-q * lf * c[l] * c[s] * c[k - l - s + 1]);
            }
        }
        c[k] = sc.value() / (a * kf);
        let mut sb = CompensatedSum::default();
        sb.add(c[k]);
        for l in 1..k {
            let lf = l as f64;
            sb.add(lf * b[l] * b[k - l]);
            for s in 1..=(k - l) {
                sb.add(-q * lf * b[l] * c[s] * c[k - l - s + 1]);
            }
        }
        b[k] = sb.value() / (a * kf);
    }
    SimCoeffs {
        m,
        a,
        b_coef: b,
        c_coef: c,
    }
}

/// Residuals of the two defining equations of the stable manifold at `y`.
pub fn sim_residual(c: &SimCoeffs, y: f64) -> (f64, f64) {
    let [r1, r2, d1, d2] = c.eval(y, c.order());
    let bracket = c.a * y + c.m.q() * r2 * r2 - r1 * y;
    (d1 * bracket - r2, d2 * bracket - y)
}

/// Boundary values at the left cut from the stable-manifold relations:
/// (Phi(-T), Phi'(-T)) given Phi''(-T) = y.
pub fn sim_transfer_conditions(c: &SimCoeffs, y: f64, approx_order: usize, tol: f64) -> Result<(f64, f64)> {
    let order = approx_order.clamp(1, c.order());
    let [r1, r2, _, _] = c.eval(y, order);
    let tail = if order < c.order() {
        let yn = y.abs().powi(order as i32 + 1);
        (c.b_coef[order + 1].abs() + c.c_coef[order + 1].abs()) * yn
    } else {
        0.0
    };
    if tail > tol {
        return Err(Error::TailTooLarge { tail, tol });
    }
    Ok((-c.a + r1, r2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FarfieldCoeffs {
    pub m: f64,
    pub b: f64,
    pub v: Vec<f64>,
}

pub fn farfield_coeffs(m: f64, b: f64, order: usize) -> FarfieldCoeffs {
    let order = order.max(1);
    let q = (m - 1.0) / m;
    let mp = m + 1.0;
    let mut v = vec![0.0; order + 1];
    v[1] = -(m - 1.0) * (m - 2.0) / (mp * mp);
    for k in 1..order {
        let kf = k as f64;
        let lin = kf * (kf + 1.0) * (kf + 2.0) - 6.0 * m / mp * kf * (kf + 1.0) + (7.0 * m - 4.0) * m / (mp * mp) * kf
            - m * (m - 1.0) * (m - 2.0) / (mp * mp * mp);
        let mut s = CompensatedSum::default();
        s.add(lin * v[k]);
        for l in 1..=k {
            let lf = l as f64;
            s.add(-lf * (lf + 1.0 - (m + 2.0) / mp - q * (kf - lf + 1.0)) * v[l] * v[k - l + 1]);
        }
        let guard = b * (kf + 1.0) * (kf + 2.0 - (m + 2.0) / mp);
        v[k + 1] = s.value() / guard;
    }
    FarfieldCoeffs { m, b, v }
}

impl FarfieldCoeffs {
    /// v and its first three derivatives in xi.
    pub fn eval_xi(&self, xi: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, &vk) in self.v.iter().enumerate().skip(1) {
            let kf = k as f64;
            let p = xi.powi(-(k as i32));
            out[0] += vk * p;
            out[1] += -kf * vk * p / xi;
            out[2] += kf * (kf + 1.0) * vk * p / (xi * xi);
            out[3] += -kf * (kf + 1.0) * (kf + 2.0) * vk * p / (xi * xi * xi);
        }
        out
    }

    /// Phi, Phi', Phi'' of w^m (b + v(w^{m+1}/(m+1))) at shifted abscissa w.
    pub fn eval_profile(&self, w: f64) -> [f64; 3] {
        let m = self.m;
        let xi = w.powf(m + 1.0) / (m + 1.0);
        let [v, v1, v2, _] = self.eval_xi(xi);
        let wm = w.powf(m);
        let base = self.b + v;
        [
            wm * base,
            m * w.powf(m - 1.0) * base + wm * wm * v1,
            m * (m - 1.0) * w.powf(m - 2.0) * base + 3.0 * m * w.powf(2.0 * m - 1.0) * v1 + wm * wm * wm * v2,
        ]
    }

    /// Residual of the far-field equation for v(xi) with the truncated series.
    pub fn residual(&self, xi: f64) -> f64 {
        let (m, b) = (self.m, self.b);
        let mp = m + 1.0;
        let [v, v1, v2, v3] = self.eval_xi(xi);
        let lhs = v3
            + (6.0 * m / (mp * xi) + b) * v2
            + ((7.0 * m - 4.0) * m / (mp * mp * xi * xi) + (m + 2.0) * b / (mp * xi)) * v1
            + m * (m - 1.0) * (m - 2.0) / (mp * mp * mp * xi * xi * xi) * (v + b);
        let rhs = -v * v2 - (m + 2.0) / (mp * xi) * v * v1 + (m - 1.0) / m * v1 * v1;
        lhs - rhs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseChiCoeffs {
    pub m: MValue,
    pub chi: Vec<f64>,
}

pub fn phase_chi_coeffs(m: MValue, order: usize) -> PhaseChiCoeffs {
    let order = order.max(1);
    let inv = m.recip();
    let mut chi = vec![0.0; order + 1];
    chi[1] = -0.25 * inv;
    for k in 2..=order {
        let kf = k as f64;
        let mut s = CompensatedSum::default();
        // [1 + m(k-1)]/m written as 1/m + (k-1) so that the infinite limit is exact
        s.add(-chi[k - 1] * (inv + (kf - 1.0)));
        for l in 1..k {
            let lf = l as f64;
            s.add(-(lf * (kf + 3.0) + 1.0) * chi[l] * chi[k - l]);
        }
        chi[k] = s.value() / ((kf + 1.0) * (kf + 1.0));
    }
    PhaseChiCoeffs { m, chi }
}

impl PhaseChiCoeffs {
    /// (f, df/dPhi, d2f/dPhi2) of a (Phi+a) [1 + sum chi_k ((Phi+a)/a)^k].
    pub fn eval(&self, a: f64, phi: f64) -> [f64; 3] {
        let t = (phi + a) / a;
        let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for k in (1..self.chi.len()).rev() {
            let c = self.chi[k];
            let kf = k as f64;
            g = g * t + c;
            g1 = g1 * t + (kf + 1.0) * c;
            g2 = g2 * t + (kf + 1.0) * kf * c;
        }
        // f = a^2 t (1 + t g(t)) in terms of t
        let f = a * a * t * (1.0 + t * g);
        let f1 = a * (1.0 + t * g1);
        [f, f1, g2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCoeffs {
    pub m: f64,
    pub big_b: f64,
    pub theta: Vec<f64>,
}

struct ThetaConsts {
    p: f64,
    r: f64,
    s: f64,
}

fn theta_consts(m: f64, big_b: f64) -> ThetaConsts {
    let mp = m + 1.0;
    ThetaConsts {
        p: m / (big_b * mp),
        r: (4.0 * m - 3.0) / mp,
        s: (m - 1.0) * (m - 2.0) / (mp * mp),
    }
}

/// Coefficients of the algebraic far-field correction in the phase plane,
/// obtained by substituting the series into the equation multiplied through
/// by (1 + Z) and matching powers of 1/x with truncated series products.
pub fn theta_coeffs(m: f64, big_b: f64, order: usize) -> ThetaCoeffs {
    let order = order.max(1);
    let ThetaConsts { p, r, s } = theta_consts(m, big_b);
    let mut w = vec![0.0; order + 1];
    w[0] = 1.0;
    for k in 1..=order {
        let series = PowerSeries::new(w[..k].to_vec());
        let u = series.mul(&series);
        let kf = k as f64;
        let factor = 0.5 * kf * (kf - 1.0) - 0.5 * r * (kf - 1.0) + s;
        w[k] = factor * u.coeff(k - 1) / (p * kf);
    }
    w[0] = 0.0;
    ThetaCoeffs { m, big_b, theta: w }
}

impl ThetaCoeffs {
    /// Z, Z', Z'' of the truncated series at x.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, &t) in self.theta.iter().enumerate().skip(1) {
            let kf = k as f64;
            let p = x.powi(-(k as i32));
            out[0] += t * p;
            out[1] += -kf * t * p / x;
            out[2] += kf * (kf + 1.0) * t * p / (x * x);
        }
        out
    }

    /// Residual of the far-field phase-plane equation for Z(x) at x.
    pub fn residual(&self, x: f64) -> f64 {
        theta_equation_residual(self.m, self.big_b, self.eval(x), x)
    }
}

/// Left-hand side of the Z(x) equation for arbitrary (Z, Z', Z'').
pub fn theta_equation_residual(m: f64, big_b: f64, z: [f64; 3], x: f64) -> f64 {
    let ThetaConsts { p, r, s } = theta_consts(m, big_b);
    let [z0, z1, z2] = z;
    let inv = 1.0 / (1.0 + z0);
    z2 + z1 * (p + r / x) + z0 * s / (x * x) + p * z1 * (inv - 1.0) + z1 * z1 * inv + s / (x * x)
}
