//! Local structure of solutions that blow up at a finite pole, and the
//! exact Bernoulli-number series of the coth family at m = 1/2.
//!
//! Near a pole `tau_p` every blow-up solution has the form
//! `Phi = c/x * (1 + Y(|x|))` with `x = tau - tau_p` and `c = 6m/(m+1)`.
//! The linearized equation for `Y` has indicial roots `-1` and the pair
//! `lambda_{1,2}` of `lambda^2 - lambda (m+7)/(m+1) + 6 = 0`.

use num_complex::Complex64;

use crate::types::{Error, MValue, Result};

/// Threshold in `m` separating real from complex exponents.
pub fn m1_const() -> f64 {
    (-17.0 + 12.0 * 6f64.sqrt()) / 23.0
}

/// `|m - m1|` below which the exponents are treated as a double root.
pub const DOUBLE_ROOT_TOL: f64 = 1e-9;

/// Largest series order accepted by [`bernoulli_series_y12`].
pub const MAX_BERNOULLI_ORDER: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleRegime {
    /// `m > m1`: `Y ~ x^alpha (C1 cos(beta ln x) + C2 sin(beta ln x))`.
    ComplexPair,
    /// `m = m1`: `Y ~ x^alpha (C1 + C2 ln x)`.
    DoubleRoot,
    /// `0 < m < m1`: `Y ~ C1 x^lambda1 + C2 x^lambda2`.
    RealPair,
}

impl PoleRegime {
    pub fn name(self) -> &'static str {
        match self {
            PoleRegime::ComplexPair => "complex_pair",
            PoleRegime::DoubleRoot => "double_root",
            PoleRegime::RealPair => "real_pair",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleLocalForm {
    pub m: MValue,
    pub regime: PoleRegime,
    /// Real part of the exponent pair.
    pub alpha: f64,
    /// Imaginary part, complex regime only.
    pub beta: Option<f64>,
    /// Larger and smaller real exponent; equal for the double root.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// The remaining root of the cubic, always -1 (a shift of the pole).
    pub lambda3: f64,
    pub m1_const: f64,
    /// Set when `lambda1` is an integer multiple of `lambda2`, where the
    /// full series would need logarithmic terms.
    pub resonant: bool,
    /// Pole strength `6m/(m+1)`.
    pub strength: f64,
    /// Half-width of the neighbourhood where the principal term is used.
    pub local_radius: f64,
}

/// `1/(m+1)`, zero in the infinite limit.
fn recip_m1(m: MValue) -> f64 {
    match m {
        MValue::Finite(m) => 1.0 / (m + 1.0),
        MValue::Infinite => 0.0,
    }
}

/// Cubic for the exponents of the linearized pole equation.
pub fn indicial_cubic(m: MValue, lambda: f64) -> f64 {
    let r = recip_m1(m);
    lambda.powi(3) - 6.0 * r * lambda * lambda + (5.0 - 6.0 * r) * lambda + 6.0
}

/// Exponent classification near a pole.
pub fn pole_local_form(m: MValue) -> PoleLocalForm {
    let r = recip_m1(m);
    let m1 = m1_const();
    let alpha = 0.5 * (1.0 + 6.0 * r);
    // kappa / (m+1)^2 rewritten in r so the infinite limit needs no case.
    let disc = 23.0 - 12.0 * r - 36.0 * r * r;
    let regime = match m {
        MValue::Finite(mv) if (mv - m1).abs() <= DOUBLE_ROOT_TOL => PoleRegime::DoubleRoot,
        MValue::Finite(mv) if mv < m1 => PoleRegime::RealPair,
        _ => PoleRegime::ComplexPair,
    };
    let (beta, lambda1, lambda2) = match regime {
        PoleRegime::ComplexPair => (Some(0.5 * disc.max(0.0).sqrt()), None, None),
        PoleRegime::DoubleRoot => (None, Some(alpha), Some(alpha)),
        PoleRegime::RealPair => {
            let h = 0.5 * (-disc).max(0.0).sqrt();
            (None, Some(alpha + h), Some(alpha - h))
        }
    };
    let resonant = match (regime, lambda1, lambda2) {
        (PoleRegime::RealPair, Some(l1), Some(l2)) => {
            let k = l1 / l2;
            k >= 1.5 && (k - k.round()).abs() < 1e-9
        }
        _ => false,
    };
    let strength = 6.0 * (1.0 - r);
    PoleLocalForm {
        m,
        regime,
        alpha,
        beta,
        lambda1,
        lambda2,
        lambda3: -1.0,
        m1_const: m1,
        resonant,
        strength,
        local_radius: 0.3 * strength.sqrt(),
    }
}

impl PoleLocalForm {
    /// `Y(s)` and its first two derivatives in `s = |x| > 0`.
    pub fn y_derivatives(&self, c1: f64, c2: f64, s: f64) -> [f64; 3] {
        let ln = s.ln();
        match self.regime {
            PoleRegime::ComplexPair => {
                let lam = Complex64::new(self.alpha, self.beta.unwrap_or(0.0));
                let amp = Complex64::new(c1, -c2);
                let p = (lam * ln).exp();
                let y = amp * p;
                let y1 = amp * lam * p / s;
                let y2 = amp * lam * (lam - 1.0) * p / (s * s);
                [y.re, y1.re, y2.re]
            }
            PoleRegime::DoubleRoot => {
                let a = self.alpha;
                let p = s.powf(a);
                [
                    p * (c1 + c2 * ln),
                    p / s * (c1 * a + c2 * (a * ln + 1.0)),
                    p / (s * s) * (c1 * a * (a - 1.0) + c2 * (a * (a - 1.0) * ln + 2.0 * a - 1.0)),
                ]
            }
            PoleRegime::RealPair => {
                let (l1, l2) = (self.lambda1.unwrap_or(0.0), self.lambda2.unwrap_or(0.0));
                let (p1, p2) = (s.powf(l1), s.powf(l2));
                [
                    c1 * p1 + c2 * p2,
                    (c1 * l1 * p1 + c2 * l2 * p2) / s,
                    (c1 * l1 * (l1 - 1.0) * p1 + c2 * l2 * (l2 - 1.0) * p2) / (s * s),
                ]
            }
        }
    }

    fn check_local(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x == 0.0 || x.abs() > self.local_radius {
            return Err(Error::Domain(format!(
                "outside local radius: |tau - tau_p| = {} must lie in (0, {}]",
                x.abs(),
                self.local_radius
            )));
        }
        Ok(())
    }
}

/// `(Phi, Phi', Phi'')` of the principal blow-up form at `tau`.
pub fn blowup_local_state(m: MValue, tau_p: f64, c1: f64, c2: f64, tau: f64) -> Result<[f64; 3]> {
    let form = pole_local_form(m);
    let x = tau - tau_p;
    form.check_local(x)?;
    let sgn = x.signum();
    let [y, ys, yss] = form.y_derivatives(c1, c2, x.abs());
    let (p, p1, p2) = (1.0 + y, sgn * ys, yss);
    let c = form.strength;
    Ok([
        c * p / x,
        c * (p1 / x - p / (x * x)),
        c * (p2 / x - 2.0 * p1 / (x * x) + 2.0 * p / (x * x * x)),
    ])
}

/// Principal blow-up form `6m/((m+1)x) * (1 + Y(|x|))`.
pub fn blowup_local_eval(m: MValue, tau_p: f64, c1: f64, c2: f64, tau: f64) -> Result<f64> {
    blowup_local_state(m, tau_p, c1, c2, tau).map(|z| z[0])
}

/// Taylor coefficients `t_n` of `x coth x = sum t_n x^{2n}` for n = 0..=order.
///
/// From the Riccati identity `x g' = g + x^2 - g^2` for `g = x coth x`:
/// `(2n+1) t_n = [n = 1] - sum_{k=1}^{n-1} t_k t_{n-k}`.
fn coth_coefficients(order: usize) -> Vec<f64> {
    let mut t = vec![0.0; order + 1];
    t[0] = 1.0;
    for n in 1..=order {
        let mut s = if n == 1 { 1.0 } else { 0.0 };
        for k in 1..n {
            s -= t[k] * t[n - k];
        }
        t[n] = s / (2 * n + 1) as f64;
    }
    t
}

/// Even-index Bernoulli numbers `B_0, B_2, ..., B_{2n}` (standard signs).
pub fn bernoulli_even(n: usize) -> Vec<f64> {
    let t = coth_coefficients(n);
    let mut fact = 1.0;
    let mut out = Vec::with_capacity(n + 1);
    for (k, tk) in t.iter().enumerate() {
        if k > 0 {
            fact *= (2 * k - 1) as f64 * (2 * k) as f64 / 4.0;
        }
        // B_{2k} = t_k (2k)! / 4^k
        out.push(tk * fact);
    }
    out
}

/// Bernoulli numbers in the classical table convention `B_1 = 1/6,
/// B_2 = 1/30, B_3 = 1/42, ...` (magnitudes of the even-index numbers).
pub fn bernoulli_numbers(order: usize) -> Vec<f64> {
    bernoulli_even(order).into_iter().skip(1).map(f64::abs).collect()
}

/// Coefficients `D_1..D_order` of `Y = sum D_n (C2 x^2)^n`, `C2 = a^2/12`.
pub fn bernoulli_d(order: usize) -> Vec<f64> {
    let b = bernoulli_numbers(order);
    let mut out = Vec::with_capacity(order);
    let mut fact = 1.0;
    for (i, bn) in b.iter().enumerate() {
        let n = i + 1;
        fact *= ((2 * n - 1) * (2 * n)) as f64;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        out.push(sign * 12f64.powi(n as i32) * bn / fact);
    }
    out
}

/// Truncated Bernoulli series for `Y_{1/2}(x) = (ax/2) coth(ax/2) - 1`.
/// The window `(a x)^2 < pi^2` keeps the order-20 truncation below 1e-11.
pub fn bernoulli_series_y12(a: f64, x: f64, order: usize) -> Result<f64> {
    if !(a.is_finite() && x.is_finite()) {
        return Err(Error::Domain("a and x must be finite".into()));
    }
    if (a * x).powi(2) >= std::f64::consts::PI.powi(2) {
        return Err(Error::Domain(format!(
            "out of window: (a x)^2 = {} >= pi^2",
            (a * x).powi(2)
        )));
    }
    if order == 0 || order > MAX_BERNOULLI_ORDER {
        return Err(Error::Domain(format!("order must lie in 1..={MAX_BERNOULLI_ORDER}")));
    }
    let w = a * a / 12.0 * x * x;
    let d = bernoulli_d(order);
    // Horner in w.
    Ok(d.iter().rev().fold(0.0, |acc, dn| (acc + dn) * w))
}

/// Closed form `(ax/2) coth(ax/2) - 1`.
pub fn coth_y12(a: f64, x: f64) -> f64 {
    let h = 0.5 * a * x;
    if h.abs() < 1e-4 {
        let h2 = h * h;
        return h2 / 3.0 - h2 * h2 / 45.0;
    }
    h / h.tanh() - 1.0
}
