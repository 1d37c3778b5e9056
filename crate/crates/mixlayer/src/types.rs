//! Parameters, regimes and sampled profiles shared by every solver.

use std::fmt;
use std::str::FromStr;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0}")]
    Regime(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("step size underflow at tau = {0}")]
    StepUnderflow(f64),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("event bracket lost near t = {0}")]
    BracketLost(f64),
    #[error("series divergence suspected: {0}")]
    DivergenceSuspected(String),
    #[error("series tail {tail:e} exceeds tolerance {tol:e}")]
    TailTooLarge { tail: f64, tol: f64 },
    #[error("far field not reached: {0}")]
    FarFieldNotReached(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("invalid document: {0}")]
    InvalidDoc(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("golden file {0} not found; regenerate it with the matching `mixlayer` command and check it in")]
    GoldenNotFound(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Regime(_) | Error::Undefined(_) => 2,
            Error::NoConvergence(_)
            | Error::StepUnderflow(_)
            | Error::NonFinite(_)
            | Error::BracketLost(_)
            | Error::DivergenceSuspected(_)
            | Error::TailTooLarge { .. }
            | Error::FarFieldNotReached(_) => 3,
            Error::InvalidDoc(_) | Error::SchemaMismatch(_) | Error::GoldenNotFound(_) | Error::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// The self-similarity exponent, with the infinite limit as its own case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MValue {
    Finite(f64),
    Infinite,
}

impl MValue {
    pub fn new(m: f64) -> Result<Self> {
        if m.is_nan() {
            return Err(Error::Domain("m must be a number".into()));
        }
        if m == f64::INFINITY {
            return Ok(MValue::Infinite);
        }
        if m <= 0.0 {
            return Err(Error::Domain(format!("m must be positive, got {m}")));
        }
        Ok(MValue::Finite(m))
    }

    /// Coefficient (m-1)/m of the quadratic term; 1 in the infinite limit.
    pub fn q(self) -> f64 {
        match self {
            MValue::Finite(m) => (m - 1.0) / m,
            MValue::Infinite => 1.0,
        }
    }

    /// 1/m, zero in the infinite limit.
    pub fn recip(self) -> f64 {
        match self {
            MValue::Finite(m) => 1.0 / m,
            MValue::Infinite => 0.0,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            MValue::Finite(m) => Some(m),
            MValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, MValue::Infinite)
    }

    /// Ordering helper: +inf for the limit case.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// Pole coefficient 6m/(m+1) of the universal blow-up envelope.
    pub fn pole_coefficient(self) -> f64 {
        match self {
            MValue::Finite(m) => 6.0 * m / (m + 1.0),
            MValue::Infinite => 6.0,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            MValue::Finite(m) => MValue::new(m),
            MValue::Infinite => Ok(self),
        }
    }
}

impl fmt::Display for MValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MValue::Finite(m) => write!(f, "{m}"),
            MValue::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for MValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => return Ok(MValue::Infinite),
            _ => {}
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad m value '{s}'")))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad m value '{s}'")))?;
            return MValue::new(p / q);
        }
        let v: f64 = s.parse().map_err(|_| Error::Domain(format!("bad m value '{s}'")))?;
        MValue::new(v)
    }
}

/// Solvability regime of the left boundary-value problem as a function of m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// 0 < m < 1/3
    NoBvpSolution,
    /// 1/3 <= m < 1/2
    PoleBoundedBvp,
    /// m = 1/2
    FloodedJetBoundary,
    /// 1/2 < m < inf
    GlobalIbvp,
    /// m = inf
    SeparationLimit,
}

const SNAP: f64 = 1e-12;

/// If `m` lies within 1e-12 of a regime boundary, the boundary value it snaps to.
pub fn boundary_snap(m: f64) -> Option<f64> {
    [1.0 / 3.0, 0.5].into_iter().find(|&c| m != c && (m - c).abs() <= SNAP)
}

pub fn classify_regime(m: MValue) -> Result<Regime> {
    let m = match m.validate()? {
        MValue::Infinite => return Ok(Regime::SeparationLimit),
        MValue::Finite(v) => boundary_snap(v).unwrap_or(v),
    };
    Ok(if m < 1.0 / 3.0 {
        Regime::NoBvpSolution
    } else if m < 0.5 {
        Regime::PoleBoundedBvp
    } else if m == 0.5 {
        Regime::FloodedJetBoundary
    } else {
        Regime::GlobalIbvp
    })
}

/// Classification plus a note when the input was snapped onto a boundary.
pub fn classify_regime_noted(m: MValue) -> Result<(Regime, Option<String>)> {
    let regime = classify_regime(m)?;
    let note = m
        .finite()
        .and_then(boundary_snap)
        .map(|c| format!("m = {m} treated as the regime boundary {c}"));
    Ok((regime, note))
}

/// Problem parameters after validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub m: MValue,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub d: Option<f64>,
    pub nu: f64,
    pub t_cut: f64,
}

/// Raw, possibly incomplete parameter set as supplied by a caller.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawParams {
    pub m: Option<MValue>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub d: Option<f64>,
    pub nu: Option<f64>,
    pub t_cut: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    M,
    A,
    B,
    D,
}

pub const DEFAULT_T: f64 = 7.0;

pub fn validate_params(p: &RawParams, required: &[Field]) -> Result<Params> {
    let missing = |name: &str| Error::Domain(format!("missing required parameter {name}"));
    for f in required {
        let present = match f {
            Field::M => p.m.is_some(),
            Field::A => p.a.is_some(),
            Field::B => p.b.is_some(),
            Field::D => p.d.is_some(),
        };
        if !present {
            return Err(missing(match f {
                Field::M => "m",
                Field::A => "a",
                Field::B => "b",
                Field::D => "d",
            }));
        }
    }
    let m = p.m.ok_or_else(|| missing("m"))?.validate()?;
    let positive = |v: Option<f64>, name: &str| -> Result<()> {
        match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Domain(format!("{name} must be positive"))),
            _ => Ok(()),
        }
    };
    positive(p.a, "a")?;
    positive(p.b, "b")?;
    positive(p.nu, "nu")?;
    if let Some(d) = p.d {
        if !d.is_finite() {
            return Err(Error::Domain("d must be finite".into()));
        }
    }
    let t_cut = p.t_cut.unwrap_or(DEFAULT_T);
    if !(t_cut >= 1.0 && t_cut.is_finite()) {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    Ok(Params {
        m,
        a: p.a,
        b: p.b,
        d: p.d,
        nu: p.nu.unwrap_or(1.0),
        t_cut,
    })
}

/// How a sampled trajectory ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Completed,
    PoleAt(f64),
    Truncated(String),
}

/// A trajectory sampled at the accepted integration steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub ddphi: Vec<f64>,
    pub termination: Termination,
}

impl Profile {
    pub fn new(
        tau: Vec<f64>,
        phi: Vec<f64>,
        dphi: Vec<f64>,
        ddphi: Vec<f64>,
        termination: Termination,
    ) -> Result<Self> {
        let n = tau.len();
        if n < 2 || phi.len() != n || dphi.len() != n || ddphi.len() != n {
            return Err(Error::InvalidDoc(
                "profile arrays must share a length of at least 2".into(),
            ));
        }
        if tau.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidDoc("profile tau grid must be strictly increasing".into()));
        }
        let all = tau.iter().chain(&phi).chain(&dphi).chain(&ddphi);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(tau[0]));
        }
        if let Termination::PoleAt(tp) = termination {
            if !(tau[n - 1] < tp || tau[0] > tp) {
                return Err(Error::InvalidDoc("samples must lie on one side of the pole".into()));
            }
        }
        Ok(Profile {
            tau,
            phi,
            dphi,
            ddphi,
            termination,
        })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn state(&self, i: usize) -> [f64; 3] {
        [self.phi[i], self.dphi[i], self.ddphi[i]]
    }

    pub fn first_tau(&self) -> f64 {
        self.tau[0]
    }

    pub fn last_tau(&self) -> f64 {
        self.tau[self.tau.len() - 1]
    }

    /// Join `other` onto the right end; a shared endpoint is kept once.
    pub fn append(mut self, other: Profile) -> Result<Profile> {
        let skip = usize::from(other.tau[0] <= self.last_tau());
        if skip == 1 && (other.tau[0] - self.last_tau()).abs() > 1e-12 * (1.0 + other.tau[0].abs()) {
            return Err(Error::InvalidDoc("profiles overlap".into()));
        }
        self.tau.extend_from_slice(&other.tau[skip..]);
        self.phi.extend_from_slice(&other.phi[skip..]);
        self.dphi.extend_from_slice(&other.dphi[skip..]);
        self.ddphi.extend_from_slice(&other.ddphi[skip..]);
        self.termination = other.termination;
        Ok(self)
    }
}

/// Anything that can report (Phi, Phi', Phi'') at a point.
pub trait Solution {
    fn m(&self) -> MValue;
    fn state(&self, tau: f64) -> Result<[f64; 3]>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(MValue::Finite(0.25)).unwrap(), Regime::NoBvpSolution);
        assert_eq!(classify_regime(MValue::Finite(1.0)).unwrap(), Regime::GlobalIbvp);
        assert_eq!(classify_regime(MValue::Infinite).unwrap(), Regime::SeparationLimit);
        assert_eq!(
            classify_regime(MValue::Finite(1.0 / 3.0)).unwrap(),
            Regime::PoleBoundedBvp
        );
        assert_eq!(
            classify_regime(MValue::Finite(0.5)).unwrap(),
            Regime::FloodedJetBoundary
        );
        assert!(classify_regime(MValue::Finite(0.0)).is_err());
        assert!(classify_regime(MValue::Finite(-1.0)).is_err());
    }

    #[test]
    fn boundary_snapping_attaches_note() {
        let (r, note) = classify_regime_noted(MValue::Finite(0.5 + 1e-13)).unwrap();
        assert_eq!(r, Regime::FloodedJetBoundary);
        assert!(note.is_some());
        let (r, note) = classify_regime_noted(MValue::Finite(1.0 / 3.0 - 5e-13)).unwrap();
        assert_eq!(r, Regime::PoleBoundedBvp);
        assert!(note.is_some());
        assert!(classify_regime_noted(MValue::Finite(0.7)).unwrap().1.is_none());
    }

    #[test]
    fn parse_m() {
        assert_eq!("inf".parse::<MValue>().unwrap(), MValue::Infinite);
        assert_eq!("1/2".parse::<MValue>().unwrap(), MValue::Finite(0.5));
        assert_eq!("2".parse::<MValue>().unwrap(), MValue::Finite(2.0));
        assert!("0".parse::<MValue>().is_err());
        assert!("abc".parse::<MValue>().is_err());
    }

    #[test]
    fn validate_defaults_and_errors() {
        let raw = RawParams {
            m: Some(MValue::Finite(1.0)),
            a: Some(1.0),
            ..Default::default()
        };
        let p = validate_params(&raw, &[Field::M, Field::A]).unwrap();
        assert_eq!(p.nu, 1.0);
        assert_eq!(p.t_cut, 7.0);
        assert_eq!(p.a, Some(1.0));

        let bad = RawParams {
            a: Some(-1.0),
            ..raw.clone()
        };
        let e = validate_params(&bad, &[Field::M, Field::A]).unwrap_err();
        assert!(e.to_string().contains("a must be positive"));

        assert!(validate_params(&raw, &[Field::B]).is_err());
        let t = RawParams {
            t_cut: Some(0.5),
            ..raw.clone()
        };
        assert!(validate_params(&t, &[]).is_err());
        let nu = RawParams { nu: Some(0.0), ..raw };
        assert!(validate_params(&nu, &[]).is_err());
    }

    #[test]
    fn profile_invariants() {
        let ok = Profile::new(
            vec![0.0, 1.0],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.0; 2],
            Termination::Completed,
        );
        assert!(ok.is_ok());
        let dec = Profile::new(
            vec![1.0, 0.0],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.0; 2],
            Termination::Completed,
        );
        assert!(dec.is_err());
        let pole = Profile::new(
            vec![0.0, 1.0],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.0; 2],
            Termination::PoleAt(1.0),
        );
        assert!(pole.is_err());
        let nan = Profile::new(
            vec![0.0, 1.0],
            vec![f64::NAN, 0.0],
            vec![0.0; 2],
            vec![0.0; 2],
            Termination::Completed,
        );
        assert!(nan.is_err());
    }

    proptest! {
        #[test]
        fn regime_stable_inside_intervals(m in 0.01f64..10.0, frac in -0.99f64..0.99) {
            let dist = [0.0, 1.0 / 3.0, 0.5].iter().map(|c| (m - c).abs()).fold(f64::INFINITY, f64::min);
            prop_assume!(dist > 1e-9);
            let delta = frac * dist;
            prop_assert_eq!(
                classify_regime(MValue::Finite(m)).unwrap(),
                classify_regime(MValue::Finite(m + delta)).unwrap()
            );
        }

        #[test]
        fn classification_is_total(m in 1e-6f64..1e6) {
            prop_assert!(classify_regime(MValue::Finite(m)).is_ok());
        }
    }
}
