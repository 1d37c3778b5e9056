//! Command-line front end. Every command writes CSV or JSON documents into
//! the output directory and prints a short summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blowup::{bernoulli_d, bernoulli_numbers, blowup_local_state, pole_local_form};
use crate::bvp::{
    inflection_point, shoot_left_bvp, solve_full, solve_ibvp, verify_integral_identities, BaseSolution, Memo,
    ShootConfig,
};
use crate::exact::{preset_problem, Preset, PresetProfile};
use crate::flow::{
    evaluate_field, level_line, trace_streamline, velocity_profiles, vertical_landmarks, vertical_velocity_limit, Axis,
    FlowGridSpec, Reflected, SimilarityMap,
};
use crate::io::{fmt_sig9, write_csv, write_json, DocKind, OutputDoc};
use crate::phase::{
    fit_phase_amplitude, phase_amplitude, phase_consistency_check, solve_phase_cp, PhaseConfig, PhaseTermination,
};
use crate::types::{classify_regime, Error, MValue, Regime, Result, Solution, Termination};

#[derive(Parser, Debug)]
#[command(
    name = "mixlayer",
    version,
    about = "Self-similar boundary-layer profiles, tables and flow fields"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// Output directory.
    #[arg(long, env = "MIXLAYER_OUT", global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// File of key=value settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Left cut T of the exponential series.
    #[arg(long, global = true)]
    pub t_cut: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub lyapunov_order: Option<usize>,
    /// Worker threads for table sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for one exponent with given a (left amplitude) or b (far-field coefficient).
    Solve(SolveArgs),
    /// Sweep d_m(1) or b_m(1) over a list of exponents.
    Table(TableArgs),
    /// Velocity, stream function and streamlines on a grid.
    Flow(FlowArgs),
    /// Phase-plane form f(Phi) = Phi' and its far-field amplitude.
    Phase(PhaseArgs),
    /// Local exponents of blow-up solutions near a pole.
    Blowup(BlowupArgs),
}

fn parse_m(s: &str) -> std::result::Result<MValue, String> {
    MValue::from_str(s).map_err(|e| e.to_string())
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:count, got '{s}'"));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad number '{}'", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad number '{}'", parts[1]))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad count '{}'", parts[2]))?;
    Axis::new(lo, hi, n).map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got '{s}'"))?;
    let x = x.trim().parse().map_err(|_| format!("bad number '{x}'"))?;
    let y = y.trim().parse().map_err(|_| format!("bad number '{y}'"))?;
    Ok((x, y))
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long, value_parser = parse_m)]
    pub m: MValue,
    #[arg(long, conflicts_with = "b")]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = -7.0, allow_negative_numbers = true)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 7.0, allow_negative_numbers = true)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 281)]
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    D,
    B,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(value_enum)]
    pub which: TableKind,
    /// Comma-separated exponents; fractions and `inf` accepted.
    #[arg(long, value_parser = parse_m, value_delimiter = ',')]
    pub m: Vec<MValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    FloodedJet,
    Separation,
    NearWallJet,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long, value_enum, conflicts_with_all = ["m", "b"])]
    pub preset: Option<PresetArg>,
    #[arg(long, value_parser = parse_m)]
    pub m: Option<MValue>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, conflicts_with = "a")]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// x grid as lo:hi:count.
    #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
    pub x: Option<Axis>,
    /// y grid as lo:hi:count.
    #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
    pub y: Option<Axis>,
    /// Streamline seed x,y; repeatable.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub seed: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 50.0)]
    pub arc_limit: f64,
    /// Abscissae of the velocity profiles.
    #[arg(long, value_delimiter = ',')]
    pub profiles_at: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[arg(long, value_parser = parse_m)]
    pub m: MValue,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long)]
    pub phi_max: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BlowupArgs {
    #[arg(long, value_parser = parse_m)]
    pub m: MValue,
    /// Sample the principal local form with these constants.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c2: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tau_p: f64,
}

/// Settings after merging flags, config file and defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub out: PathBuf,
    pub format: Format,
    pub shoot: ShootConfig,
    pub jobs: usize,
}

const CONFIG_KEYS: [&str; 10] = [
    "out",
    "format",
    "t_cut",
    "rel_tol",
    "abs_tol",
    "lyapunov_order",
    "target_tol",
    "farfield_start",
    "max_iter",
    "jobs",
];

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Domain(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&k.as_str()) {
            return Err(Error::Domain(format!("config line {}: unknown key '{k}'", i + 1)));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

fn config_value<T: FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    cfg.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Domain(format!("config key {key}: bad value '{v}'")))
        })
        .transpose()
}

pub fn settings(g: &GlobalArgs) -> Result<Settings> {
    let file = match &g.config {
        Some(p) => parse_config(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => BTreeMap::new(),
    };
    let mut shoot = ShootConfig::default();
    if let Some(v) = g.t_cut.or(config_value(&file, "t_cut")?) {
        if !(v >= 1.0 && v.is_finite()) {
            return Err(Error::Domain(format!("T must be at least 1, got {v}")));
        }
        shoot.t_cut = v;
    }
    if let Some(v) = g.rel_tol.or(config_value(&file, "rel_tol")?) {
        shoot.rel_tol = v;
    }
    if let Some(v) = g.abs_tol.or(config_value(&file, "abs_tol")?) {
        shoot.abs_tol = v;
    }
    if let Some(v) = g.lyapunov_order.or(config_value(&file, "lyapunov_order")?) {
        shoot.lyapunov_order = v;
    }
    if let Some(v) = config_value(&file, "target_tol")? {
        shoot.target_tol = v;
    }
    if let Some(v) = config_value(&file, "farfield_start")? {
        shoot.farfield_start = v;
    }
    if let Some(v) = config_value(&file, "max_iter")? {
        shoot.max_iter = v;
    }
    for (name, v) in [
        ("rel_tol", shoot.rel_tol),
        ("abs_tol", shoot.abs_tol),
        ("target_tol", shoot.target_tol),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    let format = match (g.format, file.get("format").map(String::as_str)) {
        (Some(f), _) => f,
        (None, Some("json")) => Format::Json,
        (None, Some("csv") | None) => Format::Csv,
        (None, Some(other)) => return Err(Error::Domain(format!("config key format: bad value '{other}'"))),
    };
    let out = g
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let jobs = g.jobs.or(config_value(&file, "jobs")?).unwrap_or(1).max(1);
    Ok(Settings {
        out,
        format,
        shoot,
        jobs,
    })
}

/// Files written and summary lines printed by one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Sink<'a> {
    settings: &'a Settings,
    out: RunOutput,
}

impl Sink<'_> {
    fn write(&mut self, stem: &str, doc: &OutputDoc) -> Result<()> {
        let dir = &self.settings.out;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = match self.settings.format {
            Format::Csv => {
                let p = dir.join(format!("{stem}.csv"));
                write_csv(doc, &p)?;
                p
            }
            Format::Json => {
                let p = dir.join(format!("{stem}.json"));
                write_json(doc, &p)?;
                p
            }
        };
        self.out.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.out.summary.push(line);
    }
}

fn with_settings(doc: OutputDoc, s: &ShootConfig) -> OutputDoc {
    doc.meta("t_cut", fmt_sig9(s.t_cut))
        .meta("rel_tol", fmt_sig9(s.rel_tol))
        .meta("abs_tol", fmt_sig9(s.abs_tol))
        .meta("lyapunov_order", s.lyapunov_order)
        .meta("target_tol", fmt_sig9(s.target_tol))
}

fn m_tag(m: MValue) -> String {
    match m {
        MValue::Infinite => "inf".into(),
        MValue::Finite(v) => fmt_sig9(v),
    }
}

fn report_doc(rows: &[(&str, f64)]) -> OutputDoc {
    OutputDoc::new(DocKind::Report)
        .text("quantity", rows.iter().map(|(k, _)| k.to_string()).collect())
        .num("value", rows.iter().map(|(_, v)| *v).collect())
}

pub fn run(cli: Cli) -> Result<RunOutput> {
    let settings = settings(&cli.global)?;
    let mut sink = Sink {
        settings: &settings,
        out: RunOutput::default(),
    };
    match cli.command {
        Command::Solve(a) => cmd_solve(&mut sink, a)?,
        Command::Table(a) => cmd_table(&mut sink, a)?,
        Command::Flow(a) => cmd_flow(&mut sink, a)?,
        Command::Phase(a) => cmd_phase(&mut sink, a)?,
        Command::Blowup(a) => cmd_blowup(&mut sink, a)?,
    }
    Ok(sink.out)
}

/// Parse arguments (including the program name) and run.
pub fn run_from_args<I, T>(args: I) -> Result<RunOutput>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Domain(e.to_string()))?;
    run(cli)
}

fn sample_profile<S: Solution + ?Sized>(sol: &S, lo: f64, hi: f64, n: usize) -> [Vec<f64>; 4] {
    let n = n.max(2);
    let mut cols = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for i in 0..n {
        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let z = sol.state(t).unwrap_or([f64::NAN; 3]);
        cols[0].push(t);
        cols[1].push(z[0]);
        cols[2].push(z[1]);
        cols[3].push(z[2]);
    }
    cols
}

fn cmd_solve(sink: &mut Sink, a: SolveArgs) -> Result<()> {
    let cfg = sink.settings.shoot.clone();
    if !(a.tau_max > a.tau_min) {
        return Err(Error::Domain(format!(
            "tau range [{}, {}] is empty",
            a.tau_min, a.tau_max
        )));
    }
    let regime = classify_regime(a.m)?;
    if regime == Regime::NoBvpSolution {
        return Err(Error::Regime(format!(
            "no solution of the left boundary-value problem exists for m = {} < 1/3",
            a.m
        )));
    }
    let tag = m_tag(a.m);
    let (base, scale, b): (BaseSolution, f64, Option<f64>) = match a.b {
        Some(b) => {
            let m =
                a.m.finite()
                    .ok_or_else(|| Error::Regime("prescribed b needs finite m > 1/2".into()))?;
            let memo = Memo::default();
            let ib = solve_ibvp(m, b, &cfg, &memo)?;
            ((*ib.base).clone(), ib.a, Some(b))
        }
        None => {
            let amp = a.a.unwrap_or(1.0);
            if !(amp > 0.0 && amp.is_finite()) {
                return Err(Error::Domain(format!("a must be positive, got {amp}")));
            }
            let base = solve_full(a.m, amp, &cfg)?;
            let b = base.fit.map(|f| f.b);
            (base, 1.0, b)
        }
    };
    // The base solution carries amplitude `base.shoot.a`; the prescribed-b path rescales it.
    let amp = base.shoot.a * scale;
    let d = base.shoot.d * scale;
    let tau_pole = base.shoot.tau_pole.map(|t| t / scale);
    let sol = crate::bvp::ScaledSolution {
        base: base.solution.clone(),
        a: scale,
    };
    let [tau, phi, dphi, ddphi] = sample_profile(&sol, a.tau_min, a.tau_max, a.samples);
    let termination = match tau_pole {
        Some(tp) => Termination::PoleAt(tp),
        None => Termination::Completed,
    };
    let mut profile = OutputDoc::new(DocKind::Profile)
        .num("tau", tau)
        .num("phi", phi)
        .num("dphi", dphi)
        .num("ddphi", ddphi)
        .meta("m", a.m)
        .meta("a", fmt_sig9(amp))
        .meta("d", fmt_sig9(d))
        .with_termination(&termination);
    if let Some(b) = b {
        profile = profile.meta("b", fmt_sig9(b));
    }
    sink.write(&format!("solve_m{tag}_profile"), &with_settings(profile, &cfg))?;

    let mut rows = vec![
        ("a", amp),
        ("d", d),
        ("phi0_prime", base.shoot.phi0_prime * scale * scale),
        ("phi0_dprime", base.shoot.phi0_dprime * scale.powi(3)),
        ("residual", base.shoot.residual),
        ("iterations", base.shoot.iterations as f64),
    ];
    if let Some(b) = b {
        rows.push(("b", b));
    }
    if let Some(tp) = tau_pole {
        rows.push(("tau_pole", tp));
    }
    let mut notes = Vec::new();
    match verify_integral_identities(&base.shoot) {
        Ok(r) => {
            rows.push(("identity_dprime_rel_err", r.dprime_rel_err));
            rows.push(("identity_prime_rel_err", r.prime_rel_err));
        }
        Err(e) => notes.push(format!("identities not evaluated: {e}")),
    }
    if regime == Regime::PoleBoundedBvp {
        match inflection_point(&base.shoot) {
            Ok(r) => {
                rows.push(("tau_inflection", r.tau_in / scale));
                rows.push(("inflection_abs_err", r.abs_err * scale.powi(3)));
            }
            Err(e) => notes.push(format!("inflection point not found: {e}")),
        }
    }
    let mut report = with_settings(report_doc(&rows), &cfg)
        .meta("m", a.m)
        .meta("regime", format!("{regime:?}"));
    if base.shoot.series_warning {
        report = report.meta("series_warning", "true");
    }
    if !notes.is_empty() {
        report = report.meta("note", notes.join("; "));
    }
    sink.write(&format!("solve_m{tag}_report"), &report)?;
    let mut line = format!("m = {}: a = {}, d = {}", m_tag(a.m), fmt_sig9(amp), fmt_sig9(d));
    if let Some(b) = b {
        line.push_str(&format!(", b = {}", fmt_sig9(b)));
    }
    if let Some(tp) = tau_pole {
        line.push_str(&format!(", pole at tau = {}", fmt_sig9(tp)));
    }
    sink.say(line);
    Ok(())
}

fn default_table_ms(which: TableKind) -> Vec<MValue> {
    let v: &[f64] = match which {
        TableKind::D => &[1.0 / 3.0, 0.4, 0.5, 0.6, 1.0, 2.0, 5.0, 100.0],
        TableKind::B => &[0.55, 0.7, 1.0, 1.04, 2.0, 3.0],
    };
    v.iter().map(|&m| MValue::Finite(m)).collect()
}

fn table_row(which: TableKind, m: MValue, cfg: &ShootConfig) -> Result<(f64, f64)> {
    match which {
        TableKind::D => shoot_left_bvp(m, 1.0, cfg).map(|r| (r.d, f64::NAN)),
        TableKind::B => {
            if !matches!(classify_regime(m)?, Regime::GlobalIbvp) {
                return Err(Error::Regime(format!("b is defined only for finite m > 1/2, got {m}")));
            }
            let base = solve_full(m, 1.0, cfg)?;
            let fit = base
                .fit
                .ok_or_else(|| Error::FarFieldNotReached("no far-field fit".into()))?;
            Ok((fit.b, fit.b_error))
        }
    }
}

fn cmd_table(sink: &mut Sink, a: TableArgs) -> Result<()> {
    let cfg = sink.settings.shoot.clone();
    let ms = if a.m.is_empty() {
        default_table_ms(a.which)
    } else {
        a.m.clone()
    };
    let jobs = sink.settings.jobs.min(ms.len()).max(1);
    let mut results: Vec<Option<Result<(f64, f64)>>> = (0..ms.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (k, chunk) in results.chunks_mut(ms.len().div_ceil(jobs)).enumerate() {
            let start = k * ms.len().div_ceil(jobs);
            let (ms, cfg) = (&ms, &cfg);
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(table_row(a.which, ms[start + i], cfg));
                }
            });
        }
    });
    let (mut vals, mut spread, mut notes) = (Vec::new(), Vec::new(), Vec::new());
    let mut failures = 0;
    for r in results
        .into_iter()
        .map(|r| r.unwrap_or_else(|| Err(Error::NoConvergence("not run".into()))))
    {
        match r {
            Ok((v, e)) => {
                vals.push(v);
                spread.push(e);
                notes.push(String::new());
            }
            Err(e) => {
                failures += 1;
                vals.push(f64::NAN);
                spread.push(f64::NAN);
                notes.push(e.to_string());
            }
        }
    }
    let m_col: Vec<f64> = ms.iter().map(|m| m.as_f64()).collect();
    let (stem, name) = match a.which {
        TableKind::D => ("table2", "d"),
        TableKind::B => ("table3", "b"),
    };
    let mut doc = OutputDoc::new(DocKind::Table).num("m", m_col).num(name, vals.clone());
    if a.which == TableKind::B {
        doc = doc.num("b_spread", spread);
    }
    let doc = with_settings(doc.text("note", notes).meta("a", 1), &cfg);
    sink.write(stem, &doc)?;
    for (m, v) in ms.iter().zip(&vals) {
        sink.say(format!("m = {}: {name} = {}", m_tag(*m), fmt_sig9(*v)));
    }
    if failures > 0 {
        sink.say(format!("{failures} of {} rows failed; see the note column", ms.len()));
    }
    Ok(())
}

struct FlowDefaults {
    stem: String,
    x: Axis,
    y: Axis,
    profiles: Vec<f64>,
    seeds: Vec<(f64, f64)>,
    meta: Vec<(&'static str, String)>,
}

fn axis(lo: f64, hi: f64, n: usize) -> Axis {
    Axis { lo, hi, count: n }
}

fn preset_defaults(p: PresetArg) -> FlowDefaults {
    let xs5 = vec![0.75, 1.75, 2.75, 3.75, 4.75];
    match p {
        PresetArg::FloodedJet => FlowDefaults {
            stem: "fig1_1".into(),
            x: axis(0.25, 5.0, 39),
            y: axis(-12.0, 12.0, 97),
            profiles: xs5,
            seeds: [-1.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 1.5]
                .iter()
                .map(|&y| (0.25, y))
                .collect(),
            meta: vec![],
        },
        PresetArg::Separation => FlowDefaults {
            stem: "fig2_1".into(),
            x: axis(0.1, 5.0, 50),
            y: axis(-6.0, 2.0, 81),
            profiles: vec![0.5, 1.5, 2.5, 3.5, 4.5],
            seeds: vec![(1.0, 0.0), (1.0, -0.5), (1.0, -1.0), (1.0, 0.5)],
            meta: vec![],
        },
        PresetArg::NearWallJet => FlowDefaults {
            stem: "fig3_1".into(),
            x: axis(0.25, 5.0, 39),
            y: axis(0.0, 10.0, 81),
            profiles: xs5,
            seeds: [0.25, 0.5, 1.0, 1.5].iter().map(|&y| (0.25, y)).collect(),
            meta: vec![("scale_factor_u", "0.15".into()), ("scale_factor_v", "0.02".into())],
        },
    }
}

fn cmd_flow(sink: &mut Sink, a: FlowArgs) -> Result<()> {
    let cfg = sink.settings.shoot.clone();
    if !(a.nu > 0.0 && a.nu.is_finite()) {
        return Err(Error::Domain(format!("nu must be positive, got {}", a.nu)));
    }
    if let Some(p) = a.preset {
        let amp = a.a.unwrap_or(1.0);
        let preset = match p {
            PresetArg::FloodedJet => Preset::FloodedJet,
            PresetArg::Separation => Preset::Separation,
            PresetArg::NearWallJet => Preset::NearWallJet,
        };
        let flow = preset_problem(preset, amp, a.nu)?;
        let defaults = preset_defaults(p);
        let meta = vec![("preset", format!("{p:?}")), ("a", fmt_sig9(amp))];
        emit_flow(sink, &flow.profile, &flow.map, &a, defaults, meta, &[])?;
        if p == PresetArg::FloodedJet {
            emit_table1(sink, &flow.profile, &flow.map, amp)?;
        }
        return Ok(());
    }
    let m = a.m.ok_or_else(|| Error::Domain("flow needs --preset or --m".into()))?;
    let map = SimilarityMap::new(m, a.nu)?;
    let tag = m_tag(m);
    let defaults = FlowDefaults {
        stem: format!("flow_m{tag}"),
        x: axis(0.25, 5.0, 39),
        y: axis(-10.0, 10.0, 81),
        profiles: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        seeds: [-1.0, -0.5, 0.5, 1.0, 2.0].iter().map(|&y| (0.25, y)).collect(),
        meta: vec![],
    };
    let mut meta = vec![("m", m.to_string())];
    match a.b {
        Some(b) => {
            let mf = m
                .finite()
                .ok_or_else(|| Error::Regime("prescribed b needs finite m > 1/2".into()))?;
            let memo = Memo::default();
            let ib = solve_ibvp(mf, b, &cfg, &memo)?;
            meta.push(("b", fmt_sig9(b)));
            meta.push(("a", fmt_sig9(ib.a)));
            emit_flow(sink, &ib.solution, &map, &a, defaults, meta, &[])?;
        }
        None => {
            let amp = a.a.unwrap_or(1.0);
            let base = solve_full(m, amp, &cfg)?;
            meta.push(("a", fmt_sig9(amp)));
            if let Some(f) = base.fit {
                meta.push(("b", fmt_sig9(f.b)));
            }
            match base.shoot.tau_pole {
                Some(tp) => {
                    // Pole-bounded profiles are shown mirrored so that the
                    // singular line lies below the axis.
                    let sol = Reflected((*base.solution).clone());
                    let tau_peak = peak_tau(&base)?;
                    let lines = [("pole", -tp), ("stagnation", -tau_peak)];
                    meta.push(("frame", "reflected".into()));
                    meta.push(("tau_pole", fmt_sig9(tp)));
                    emit_flow(sink, &sol, &map, &a, defaults, meta, &lines)?;
                }
                None => emit_flow(sink, base.solution.as_ref(), &map, &a, defaults, meta, &[])?,
            }
        }
    }
    Ok(())
}

/// Where Phi' changes sign past the origin on a pole-bounded profile.
fn peak_tau(base: &BaseSolution) -> Result<f64> {
    let p = &base.solution.profile;
    let i = (1..p.len())
        .find(|&i| p.tau[i] > 0.0 && p.dphi[i - 1] > 0.0 && p.dphi[i] <= 0.0)
        .ok_or_else(|| Error::NoConvergence("profile has no maximum before the pole".into()))?;
    let sol = base.solution.clone();
    crate::roots::brent(|t| sol.state(t).map(|z| z[1]), p.tau[i - 1], p.tau[i], 1e-13, 200).map(|r| r.x)
}

fn emit_flow<S: Solution + ?Sized>(
    sink: &mut Sink,
    sol: &S,
    map: &SimilarityMap,
    a: &FlowArgs,
    defaults: FlowDefaults,
    meta: Vec<(&str, String)>,
    level_lines: &[(&str, f64)],
) -> Result<()> {
    let spec = FlowGridSpec {
        x: a.x.unwrap_or(defaults.x),
        y: a.y.unwrap_or(defaults.y),
        nu: map.nu,
    };
    let field = evaluate_field(sol, &spec)?;
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (iy, &y) in field.ys.iter().enumerate() {
        for (ix, &x) in field.xs.iter().enumerate() {
            cols[0].push(x);
            cols[1].push(y);
            cols[2].push(field.u[iy][ix]);
            cols[3].push(field.v[iy][ix]);
            cols[4].push(field.psi[iy][ix]);
        }
    }
    let [xs, ys, us, vs, ps] = cols;
    let decorate = |mut d: OutputDoc| {
        d = d.meta("nu", fmt_sig9(map.nu));
        for (k, v) in meta.iter().chain(defaults.meta.iter()) {
            d = d.meta(k, v);
        }
        d
    };
    let doc = decorate(
        OutputDoc::new(DocKind::Field)
            .num("x", xs)
            .num("y", ys)
            .num("u", us)
            .num("v", vs)
            .num("psi", ps),
    )
    .meta("masked_cells", field.masked);
    let stem = defaults.stem.clone();
    sink.write(&format!("{stem}_field"), &doc)?;

    let xs_prof = if a.profiles_at.is_empty() {
        defaults.profiles.clone()
    } else {
        a.profiles_at.clone()
    };
    let rows = velocity_profiles(sol, map, &xs_prof, &spec.y)?;
    let doc = decorate(
        OutputDoc::new(DocKind::Profile)
            .num("x", rows.iter().map(|r| r.x).collect())
            .num("y", rows.iter().map(|r| r.y).collect())
            .num("u", rows.iter().map(|r| r.u).collect())
            .num("v", rows.iter().map(|r| r.v).collect()),
    );
    sink.write(&format!("{stem}_profiles"), &doc)?;

    let seeds = if a.seed.is_empty() {
        defaults.seeds.clone()
    } else {
        a.seed.clone()
    };
    let (mut id, mut lx, mut ly, mut lpsi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut stops = Vec::new();
    for (k, &seed) in seeds.iter().enumerate() {
        match trace_streamline(sol, map, seed, spec.x.hi, a.arc_limit) {
            Ok(line) => {
                for &(x, y) in &line.points {
                    id.push(k as f64);
                    lx.push(x);
                    ly.push(y);
                    lpsi.push(map.velocity(sol, x, y).map(|p| p.psi).unwrap_or(f64::NAN));
                }
                stops.push(format!("{k}:{:?}", line.stop));
            }
            Err(e) => stops.push(format!("{k}:skipped ({e})")),
        }
    }
    if !id.is_empty() {
        let doc = decorate(
            OutputDoc::new(DocKind::Streamlines)
                .num("line", id)
                .num("x", lx)
                .num("y", ly)
                .num("psi", lpsi),
        )
        .meta("stops", stops.join(" "));
        sink.write(&format!("{stem}_streamlines"), &doc)?;
    }

    if !level_lines.is_empty() {
        let xs = spec.x.points();
        let (mut kind, mut ox, mut oy) = (Vec::new(), Vec::new(), Vec::new());
        for &(name, tau) in level_lines {
            for (x, y) in level_line(map, tau, &xs)? {
                kind.push(name.to_string());
                ox.push(x);
                oy.push(y);
            }
        }
        let doc = decorate(
            OutputDoc::new(DocKind::Streamlines)
                .text("line", kind)
                .num("x", ox)
                .num("y", oy),
        );
        sink.write(&format!("{stem}_overlays"), &doc)?;
    }
    sink.say(format!(
        "{stem}: {}x{} grid ({} masked), {} profile rows, {} streamlines",
        field.xs.len(),
        field.ys.len(),
        field.masked,
        rows.len(),
        seeds.len()
    ));
    Ok(())
}

fn emit_table1(sink: &mut Sink, profile: &PresetProfile, map: &SimilarityMap, amp: f64) -> Result<()> {
    let xs = [0.75, 1.75, 2.75, 3.75, 4.75];
    let mut cols: [Vec<f64>; 6] = Default::default();
    for &x in &xs {
        let lm = vertical_landmarks(profile, map, x, 70.0)?;
        cols[0].push(x);
        cols[1].push(lm.y0);
        cols[2].push(lm.y_max);
        cols[3].push(lm.v_max);
        cols[4].push(vertical_velocity_limit(map, x, amp)?);
        cols[5].push(lm.v_far);
    }
    let [x, y0, ymax, vmax, vlim, vfar] = cols;
    let doc = OutputDoc::new(DocKind::Table)
        .num("x", x)
        .num("y0", y0)
        .num("y_max", ymax)
        .num("v_max", vmax)
        .num("v_lim", vlim)
        .num("v_at_70", vfar)
        .meta("a", fmt_sig9(amp))
        .meta("nu", fmt_sig9(map.nu));
    sink.write("table1", &doc)?;
    sink.say("table1: vertical-velocity landmarks at x = 0.75 ... 4.75".into());
    Ok(())
}

fn cmd_phase(sink: &mut Sink, a: PhaseArgs) -> Result<()> {
    let m = a.m.as_f64();
    if !(a.a > 0.0 && a.a.is_finite()) {
        return Err(Error::Domain(format!("a must be positive, got {}", a.a)));
    }
    let regime = classify_regime(a.m)?;
    let phi_max = a.phi_max.unwrap_or(match regime {
        Regime::FloodedJetBoundary => 0.999 * a.a,
        Regime::SeparationLimit => 5.0 * a.a,
        _ => 60.0 * a.a,
    });
    let pc = PhaseConfig::default();
    let phase = solve_phase_cp(m, a.a, phi_max, &pc)?;
    let tag = m_tag(a.m);
    let term = match phase.termination {
        PhaseTermination::Completed => "termination=completed".to_string(),
        PhaseTermination::BranchPointAt(z) => format!("termination=branch_point phi_zero={}", fmt_sig9(z)),
        PhaseTermination::Truncated => "termination=truncated".to_string(),
    };
    let mut doc = OutputDoc::new(DocKind::Profile)
        .num("phi", phase.phi.clone())
        .num("f", phase.f.clone())
        .num("fdot", phase.fdot.clone())
        .num("integral", phase.integral.clone())
        .meta("m", a.m)
        .meta("a", fmt_sig9(a.a));
    doc.termination = Some(term.clone());
    sink.write(&format!("phase_m{tag}_profile"), &doc)?;

    let mut rows = vec![("integral_relation_residual", phase.integral_relation_residual())];
    let mut notes = Vec::new();
    if let PhaseTermination::BranchPointAt(z) = phase.termination {
        rows.push(("phi_zero", z));
        sink.say(format!(
            "m = {}: f vanishes at a branch point Phi = {}",
            m_tag(a.m),
            fmt_sig9(z)
        ));
    }
    if regime == Regime::NoBvpSolution || regime == Regime::PoleBoundedBvp {
        notes.push("m < 1/2: f may vanish at a square-root branch point".to_string());
    }
    if regime == Regime::FloodedJetBoundary {
        let dev = phase
            .phi
            .iter()
            .zip(&phase.f)
            .map(|(p, f)| (f - 0.5 * (a.a * a.a - p * p)).abs())
            .fold(0.0, f64::max);
        rows.push(("max_dev_from_parabola", dev));
        sink.say(format!("m = 1/2: max |f - (a^2 - Phi^2)/2| = {dev:.3e}"));
    }
    if matches!(
        regime,
        Regime::GlobalIbvp | Regime::FloodedJetBoundary | Regime::SeparationLimit
    ) {
        match solve_full(a.m, a.a, &sink.settings.shoot) {
            Ok(base) => {
                let c = phase_consistency_check(&base.solution, &phase);
                rows.push(("consistency_max_dev", c.max_deviation));
                sink.say(format!(
                    "m = {}: max |f(Phi) - Phi'| = {:.3e} over {} samples",
                    m_tag(a.m),
                    c.max_deviation,
                    c.samples
                ));
                if let (Regime::GlobalIbvp, Some(fit)) = (regime, base.fit) {
                    // compare at the a-normalised level: B scales as a^{(2m+1)/m}
                    let expected = phase_amplitude(m, fit.b);
                    rows.push(("b_time_domain", fit.b));
                    rows.push(("big_b_expected", expected));
                    match fit_phase_amplitude(&phase, 40.0) {
                        Ok(pf) => {
                            rows.push(("big_b_fit", pf.big_b));
                            rows.push(("big_b_spread", pf.spread));
                            sink.say(format!(
                                "m = {}: B = {} from the phase plane, m b^(1/m) = {}",
                                m_tag(a.m),
                                fmt_sig9(pf.big_b),
                                fmt_sig9(expected)
                            ));
                        }
                        Err(e) => notes.push(format!("far-field fit skipped: {e}")),
                    }
                }
            }
            Err(e) => notes.push(format!("time-domain comparison skipped: {e}")),
        }
    }
    let mut report = report_doc(&rows).meta("m", a.m).meta("a", fmt_sig9(a.a));
    report.termination = Some(term);
    if !notes.is_empty() {
        report = report.meta("note", notes.join("; "));
    }
    sink.write(&format!("phase_m{tag}_report"), &report)?;
    Ok(())
}

fn cmd_blowup(sink: &mut Sink, a: BlowupArgs) -> Result<()> {
    let f = pole_local_form(a.m);
    let nan = f64::NAN;
    let rows = [
        ("alpha", f.alpha),
        ("beta", f.beta.unwrap_or(nan)),
        ("lambda1", f.lambda1.unwrap_or(nan)),
        ("lambda2", f.lambda2.unwrap_or(nan)),
        ("lambda3", f.lambda3),
        ("m1", f.m1_const),
        ("strength", f.strength),
        ("local_radius", f.local_radius),
    ];
    let tag = m_tag(a.m);
    let doc = report_doc(&rows)
        .meta("m", a.m)
        .meta("regime", f.regime.name())
        .meta("resonant", f.resonant);
    sink.write(&format!("blowup_m{tag}"), &doc)?;
    let mut line = format!(
        "m = {}: {} regime, alpha = {}",
        m_tag(a.m),
        f.regime.name(),
        fmt_sig9(f.alpha)
    );
    if let Some(b) = f.beta {
        line.push_str(&format!(", beta = {}", fmt_sig9(b)));
    }
    if let (Some(l1), Some(l2)) = (f.lambda1, f.lambda2) {
        line.push_str(&format!(", lambda = {}, {}", fmt_sig9(l1), fmt_sig9(l2)));
    }
    if f.resonant {
        line.push_str(" (resonant exponents: logarithmic terms omitted)");
    }
    sink.say(line);

    let n = 41;
    let (mut tau, mut cols) = (Vec::new(), [Vec::new(), Vec::new(), Vec::new()]);
    for i in 0..n {
        let x = -f.local_radius + 2.0 * f.local_radius * i as f64 / (n - 1) as f64;
        let t = a.tau_p + x;
        let z = blowup_local_state(a.m, a.tau_p, a.c1, a.c2, t).unwrap_or([nan; 3]);
        tau.push(t);
        for k in 0..3 {
            cols[k].push(z[k]);
        }
    }
    let [p, dp, ddp] = cols;
    let doc = OutputDoc::new(DocKind::Profile)
        .num("tau", tau)
        .num("phi", p)
        .num("dphi", dp)
        .num("ddphi", ddp)
        .meta("m", a.m)
        .meta("c1", fmt_sig9(a.c1))
        .meta("c2", fmt_sig9(a.c2))
        .meta("tau_p", fmt_sig9(a.tau_p));
    sink.write(&format!("blowup_m{tag}_local"), &doc)?;

    if a.m == MValue::Finite(0.5) {
        let order = crate::blowup::MAX_BERNOULLI_ORDER;
        let doc = OutputDoc::new(DocKind::Table)
            .num("n", (1..=order).map(|n| n as f64).collect())
            .num("bernoulli", bernoulli_numbers(order))
            .num("d_n", bernoulli_d(order));
        sink.write("blowup_bernoulli", &doc)?;
    }
    Ok(())
}

/// Process exit status for a command result.
pub fn exit_code(r: &Result<RunOutput>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(e) => e.exit_code(),
    }
}

/// Print the summary lines of a run.
/// Print the summary; a closed stdout (e.g. piped into `head`) is not an error.
pub fn print_summary(out: &RunOutput) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let lines = out
        .summary
        .iter()
        .cloned()
        .chain(out.files.iter().map(|f| format!("wrote {}", display(f))));
    for l in lines {
        if writeln!(stdout, "{l}").is_err() {
            break;
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
