//! Scenario files: TOML with a flat, kind-specific schema.
//!
//! ```toml
//! name = "sweep"
//! kind = "counterexample_sweep"
//! seed = 0
//!
//! [params]
//! m = 1.0
//! delta = 0.5
//!
//! [potential]        # only for kinds that take a potential
//! kind = "kepler"
//! ```
//!
//! Parsing never stops at the first problem: every violation becomes a [`Diagnostic`].

use std::fmt;
use std::path::PathBuf;

use jmlab_core::{Convention, HomogeneousPotential, MassSystem, StepShapeParams};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// One documented key, recorded as the parser asks for it.
#[derive(Debug, Clone)]
pub struct KeyDoc {
    pub key: String,
    pub ty: &'static str,
    pub default: Option<String>,
    pub doc: &'static str,
}

/// Typed access to one TOML table that records diagnostics and the keys it was asked for.
pub struct Fields<'a> {
    table: &'a Table,
    prefix: String,
    used: Vec<String>,
    pub docs: Vec<KeyDoc>,
    pub diags: Vec<Diagnostic>,
}

impl<'a> Fields<'a> {
    pub fn new(table: &'a Table, prefix: &str) -> Self {
        Self {
            table,
            prefix: prefix.to_string(),
            used: Vec::new(),
            docs: Vec::new(),
            diags: Vec::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    pub fn error(&mut self, key: &str, message: impl Into<String>) {
        let key = self.path(key);
        self.diags.push(Diagnostic { key, message: message.into() });
    }

    pub fn check(&mut self, ok: bool, key: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.error(key, message());
        }
    }

    fn lookup(&mut self, key: &str, ty: &'static str, default: Option<String>, doc: &'static str) -> Option<&'a Value> {
        self.used.push(key.to_string());
        self.docs.push(KeyDoc { key: self.path(key), ty, default: default.clone(), doc });
        let v = self.table.get(key);
        if v.is_none() && default.is_none() {
            self.error(key, "missing required key");
        }
        v
    }

    fn number(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn float_or(&mut self, key: &str, default: Option<f64>, doc: &'static str) -> Option<f64> {
        match self.lookup(key, "float", default.map(|d| d.to_string()), doc) {
            None => default,
            Some(v) => match Self::number(v) {
                Some(x) if x.is_finite() => Some(x),
                Some(x) => {
                    self.error(key, format!("{x} is not finite"));
                    None
                }
                None => {
                    self.error(key, format!("expected a number, found {}", v.type_str()));
                    None
                }
            },
        }
    }

    /// A float with a default; on error the default stands in so later checks can proceed.
    pub fn float(&mut self, key: &str, default: f64, doc: &'static str) -> f64 {
        self.float_or(key, Some(default), doc).unwrap_or(default)
    }

    pub fn required_float(&mut self, key: &str, doc: &'static str) -> Option<f64> {
        self.float_or(key, None, doc)
    }

    pub fn optional_float(&mut self, key: &str, doc: &'static str) -> Option<f64> {
        self.used.push(key.to_string());
        self.docs.push(KeyDoc { key: self.path(key), ty: "float", default: Some("unset".into()), doc });
        let v = self.table.get(key)?;
        match Self::number(v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.error(key, format!("expected a finite number, found {v}"));
                None
            }
        }
    }

    pub fn uint(&mut self, key: &str, default: u64, doc: &'static str) -> u64 {
        match self.lookup(key, "integer", Some(default.to_string()), doc) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(v) => {
                self.error(key, format!("expected a nonnegative integer, found {v}"));
                default
            }
        }
    }

    pub fn string(&mut self, key: &str, default: Option<&str>, doc: &'static str) -> Option<String> {
        match self.lookup(key, "string", default.map(|d| format!("\"{d}\"")), doc) {
            None => default.map(str::to_string),
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.error(key, format!("expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn list(&mut self, key: &str, default: Option<Vec<f64>>, doc: &'static str) -> Option<Vec<f64>> {
        let shown = default.as_ref().map(|d| format!("{d:?}"));
        match self.lookup(key, "float list", shown, doc) {
            None => default,
            Some(Value::Array(items)) => {
                let vals: Option<Vec<f64>> = items
                    .iter()
                    .map(|v| Self::number(v).filter(|x| x.is_finite()))
                    .collect();
                if vals.is_none() {
                    self.error(key, "every entry must be a finite number");
                }
                vals
            }
            Some(v) => {
                self.error(key, format!("expected an array of numbers, found {}", v.type_str()));
                None
            }
        }
    }

    pub fn float_list(&mut self, key: &str, default: Vec<f64>, doc: &'static str) -> Vec<f64> {
        self.list(key, Some(default.clone()), doc).unwrap_or(default)
    }

    pub fn required_list(&mut self, key: &str, doc: &'static str) -> Option<Vec<f64>> {
        self.list(key, None, doc)
    }

    /// Report keys nobody asked for.
    pub fn finish(mut self) -> (Vec<KeyDoc>, Vec<Diagnostic>) {
        let mut unknown: Vec<&String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(k))
            .collect();
        unknown.sort();
        for k in unknown {
            let key = self.path(k);
            self.diags.push(Diagnostic { key, message: "unknown key".into() });
        }
        (self.docs, self.diags)
    }
}

/// Range checks shared by several kinds.
pub fn check_alpha(f: &mut Fields<'_>, key: &str, alpha: f64) {
    f.check(alpha > 0.0 && alpha < 2.0, key, || {
        format!("alpha = {alpha} is outside (0, 2); homogeneous potentials here need 0 < alpha < 2")
    });
}

pub fn convention(f: &mut Fields<'_>) -> Convention {
    let s = f
        .string("convention", Some("shape_linear"), "refraction index convention: shape_linear or jm_consistent")
        .unwrap_or_default();
    s.parse().unwrap_or_else(|_| {
        f.error("convention", format!("unknown convention `{s}` (expected shape_linear or jm_consistent)"));
        Convention::default()
    })
}

/// `m`, `M`, `delta` of a step shape, with the `M > m` and `0 < delta < 1` checks.
pub fn step_params(f: &mut Fields<'_>, default_big: f64) -> StepShapeParams {
    let m = f.float("m", 1.0, "shape value near the poles");
    let big = f.float("M", default_big, "shape value on the band |z| <= delta");
    let delta = f.float("delta", 0.5, "band half-height in z");
    f.check(m > 0.0, "m", || format!("m = {m} must be positive"));
    f.check(big > m, "M", || format!("M = {big} must exceed m = {m}"));
    f.check(delta > 0.0 && delta < 1.0, "delta", || format!("delta = {delta} must lie in (0, 1)"));
    StepShapeParams::new(m, big, delta).unwrap_or(StepShapeParams { m: 1.0, m_big: 2.0, delta: 0.5 })
}

/// The `[potential]` table.
pub fn potential(table: &Table, default_dim: usize) -> (Option<HomogeneousPotential>, Vec<KeyDoc>, Vec<Diagnostic>) {
    let mut f = Fields::new(table, "potential");
    let kind = f
        .string("kind", Some("kepler"), "kepler, power_law or step")
        .unwrap_or_default();
    let built = match kind.as_str() {
        "kepler" => {
            let dim = f.uint("dim", default_dim as u64, "configuration dimension") as usize;
            f.check(dim >= 1, "dim", || "dim must be at least 1".into());
            HomogeneousPotential::kepler(dim.max(1)).ok()
        }
        "power_law" => {
            let dim = f.uint("dim", 2, "ambient dimension of each body") as usize;
            let masses = f.required_list("masses", "body masses");
            let kappa = f.float("kappa", 1.0, "coupling constant");
            let alpha = f.float("alpha", 1.0, "homogeneity degree, 0 < alpha < 2");
            check_alpha(&mut f, "alpha", alpha);
            f.check(dim >= 1, "dim", || "dim must be at least 1".into());
            f.check(kappa > 0.0, "kappa", || format!("kappa = {kappa} must be positive"));
            if let Some(ms) = &masses {
                f.check(ms.len() >= 2, "masses", || "need at least two bodies".into());
                for (i, m) in ms.iter().enumerate() {
                    f.check(*m > 0.0, "masses", || format!("mass {i} = {m} must be positive"));
                }
            }
            masses
                .and_then(|ms| MassSystem::new(dim, ms, kappa).ok())
                .and_then(|sys| HomogeneousPotential::power_law(sys, alpha).ok())
        }
        "step" => {
            let params = step_params(&mut f, 4.0);
            let alpha = f.float("alpha", 1.0, "homogeneity degree, 0 < alpha < 2");
            check_alpha(&mut f, "alpha", alpha);
            let dim = f.uint("dim", 3, "configuration dimension (z is the last coordinate)") as usize;
            f.check(dim >= 2, "dim", || "a step shape needs at least two dimensions".into());
            HomogeneousPotential::step(dim, params, alpha).ok()
        }
        other => {
            f.error("kind", format!("unknown potential kind `{other}` (expected kepler, power_law or step)"));
            None
        }
    };
    let (docs, diags) = f.finish();
    let built = if diags.is_empty() { built } else { None };
    (built, docs, diags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    KeplerCone,
    CounterexampleSweep,
    SectorTrace,
    OracleRun,
    Minimize,
    BlowupDemo,
    BridgeCheck,
    BrakeCheck,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::KeplerCone,
        Kind::CounterexampleSweep,
        Kind::SectorTrace,
        Kind::OracleRun,
        Kind::Minimize,
        Kind::BlowupDemo,
        Kind::BridgeCheck,
        Kind::BrakeCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::KeplerCone => "kepler_cone",
            Kind::CounterexampleSweep => "counterexample_sweep",
            Kind::SectorTrace => "sector_trace",
            Kind::OracleRun => "oracle_run",
            Kind::Minimize => "minimize",
            Kind::BlowupDemo => "blowup_demo",
            Kind::BridgeCheck => "bridge_check",
            Kind::BrakeCheck => "brake_check",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn summary(self) -> &'static str {
        match self {
            Kind::KeplerCone => "cone distances, apex verdicts and a corner cut on the Kepler cone",
            Kind::CounterexampleSweep => "test-curve classification across a range of band values M",
            Kind::SectorTrace => "Snell-law geodesic through the three-sector wedge",
            Kind::OracleRun => "graph-search shortest path from N to S",
            Kind::Minimize => "fixed-time action minimizer between two configurations",
            Kind::BlowupDemo => "blow-up rescaling of an integrated orbit",
            Kind::BridgeCheck => "action versus JM length on random paths",
            Kind::BrakeCheck => "time-reversal retrace of a brake solution",
        }
    }

    /// Dimension of the default potential, `None` for kinds without one.
    pub fn potential_dim(self) -> Option<usize> {
        match self {
            Kind::Minimize | Kind::BlowupDemo => Some(2),
            Kind::BrakeCheck => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KeplerConeParams {
    pub alpha: f64,
    pub rho_max: f64,
    pub pairs: usize,
    pub angles: usize,
    pub cut_radius: f64,
    pub cut_theta: f64,
}

#[derive(Debug, Clone)]
pub struct SectorParams {
    pub step: StepShapeParams,
    pub alpha: f64,
    pub convention: Convention,
}

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub m: f64,
    pub delta: f64,
    pub alpha: f64,
    pub convention: Convention,
    pub m_big_min: f64,
    pub m_big_max: f64,
    pub points: usize,
    pub oracle_resolution: usize,
    pub neighbor_order: usize,
}

#[derive(Debug, Clone)]
pub struct TraceParams {
    pub sector: SectorParams,
    pub x: Option<f64>,
    pub max_length: f64,
}

#[derive(Debug, Clone)]
pub struct OracleParams {
    pub sector: SectorParams,
    pub resolution: usize,
    pub neighbor_order: usize,
}

#[derive(Debug, Clone)]
pub struct MinimizeParams {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub t_total: f64,
    pub n_samples: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub starts: usize,
    pub perturbation: f64,
}

#[derive(Debug, Clone)]
pub struct BlowupParams {
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
    pub duration: f64,
    pub steps: usize,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BridgeParams {
    pub paths: usize,
    pub controls: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub samples_per_leg: usize,
    pub min_slack: f64,
}

#[derive(Debug, Clone)]
pub struct BrakeParams {
    pub q_start: Vec<f64>,
    pub h0: Option<f64>,
    pub duration: f64,
    pub steps: usize,
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub enum Params {
    KeplerCone(KeplerConeParams),
    CounterexampleSweep(SweepParams),
    SectorTrace(TraceParams),
    OracleRun(OracleParams),
    Minimize(MinimizeParams),
    BlowupDemo(BlowupParams),
    BridgeCheck(BridgeParams),
    BrakeCheck(BrakeParams),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub params: Params,
    pub potential: Option<HomogeneousPotential>,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
}

fn count(f: &mut Fields<'_>, key: &str, default: u64, min: u64, doc: &'static str) -> usize {
    let n = f.uint(key, default, doc);
    f.check(n >= min, key, || format!("{key} = {n} must be at least {min}"));
    n.max(min) as usize
}

fn positive(f: &mut Fields<'_>, key: &str, default: f64, doc: &'static str) -> f64 {
    let x = f.float(key, default, doc);
    f.check(x > 0.0, key, || format!("{key} = {x} must be positive"));
    x
}

fn sector(f: &mut Fields<'_>, default_big: f64) -> SectorParams {
    let step = step_params(f, default_big);
    let alpha = f.float("alpha", 1.0, "homogeneity degree, 0 < alpha < 2");
    check_alpha(f, "alpha", alpha);
    let convention = convention(f);
    SectorParams { step, alpha, convention }
}

fn oracle_order(f: &mut Fields<'_>) -> usize {
    count(f, "neighbor_order", 8, 1, "oracle neighborhood ring size")
}

fn parse_params(kind: Kind, f: &mut Fields<'_>, ov: &Overrides) -> Params {
    match kind {
        Kind::KeplerCone => {
            let alpha = f.float("alpha", 1.0, "homogeneity degree, 0 < alpha < 2");
            check_alpha(f, "alpha", alpha);
            let rho_max = positive(f, "rho_max", 2.0, "largest cone radius of the random pairs");
            let pairs = count(f, "pairs", 20, 1, "number of random point pairs");
            let angles = count(f, "angles", 36, 1, "outgoing angles in the apex sweep");
            let cut_radius = f.float("cut_radius", 0.5, "corner cut radius in (0, 1]");
            f.check(cut_radius > 0.0 && cut_radius <= 1.0, "cut_radius", || {
                format!("cut_radius = {cut_radius} must lie in (0, 1]")
            });
            let cut_theta = f.float("cut_theta", std::f64::consts::PI, "outgoing angle of the corner cut");
            Params::KeplerCone(KeplerConeParams { alpha, rho_max, pairs, angles, cut_radius, cut_theta })
        }
        Kind::CounterexampleSweep => {
            let m = positive(f, "m", 1.0, "shape value near the poles");
            let delta = f.float("delta", 0.5, "band half-height in z");
            f.check(delta > 0.0 && delta < 1.0, "delta", || format!("delta = {delta} must lie in (0, 1)"));
            let alpha = f.float("alpha", 1.0, "homogeneity degree, 0 < alpha < 2");
            check_alpha(f, "alpha", alpha);
            let convention = convention(f);
            let lo = f.float("m_big_min", 1.25, "smallest band value M (must exceed m)");
            let hi = f.float("m_big_max", 6.0, "largest band value M");
            f.check(lo > m, "m_big_min", || format!("m_big_min = {lo} must exceed m = {m}"));
            f.check(hi >= lo, "m_big_max", || format!("m_big_max = {hi} is below m_big_min = {lo}"));
            let points = count(f, "points", 20, 2, "number of sweep points");
            let res = f.uint("oracle_resolution", 0, "graph oracle resolution, 0 to skip the oracle") as usize;
            f.check(res == 0 || res >= 100, "oracle_resolution", || {
                format!("oracle_resolution = {res} must be 0 or at least 100")
            });
            let neighbor_order = oracle_order(f);
            Params::CounterexampleSweep(SweepParams {
                m,
                delta,
                alpha,
                convention,
                m_big_min: lo,
                m_big_max: hi,
                points,
                oracle_resolution: res,
                neighbor_order,
            })
        }
        Kind::SectorTrace => {
            let sector = sector(f, 2.0);
            let x = f.optional_float("x", "crossing distance on the first boundary; unset finds the N-S geodesic");
            if let Some(x) = x {
                f.check(x > 0.0, "x", || format!("x = {x} must be positive"));
            }
            let max_length = positive(f, "max_length", 10.0, "optical length budget of the trace");
            Params::SectorTrace(TraceParams { sector, x, max_length })
        }
        Kind::OracleRun => {
            let sector = sector(f, 2.0);
            let resolution = count(f, "resolution", 1000, 100, "rings and spokes of the polar grid");
            let neighbor_order = oracle_order(f);
            Params::OracleRun(OracleParams { sector, resolution, neighbor_order })
        }
        Kind::Minimize => {
            let q0 = f.required_list("q0", "start configuration");
            let q1 = f.required_list("q1", "end configuration");
            let t_total = f.required_float("t_total", "total time");
            if let Some(t) = t_total {
                f.check(t > 0.0, "t_total", || format!("t_total = {t} must be positive"));
            }
            let n_samples = count(f, "n_samples", 101, 3, "samples of the time grid");
            let max_iter = count(f, "max_iter", 5000, 1, "iterations per start");
            let tol = positive(f, "tol", 1e-8, "Euler-Lagrange residual target");
            let tol = ov.tolerance.unwrap_or(tol);
            let starts = count(f, "starts", 5, 1, "number of starts");
            let perturbation = f.float("perturbation", 0.1, "perturbation amplitude relative to the endpoint gap");
            f.check(perturbation >= 0.0, "perturbation", || "perturbation must be nonnegative".into());
            Params::Minimize(MinimizeParams {
                q0: q0.unwrap_or_default(),
                q1: q1.unwrap_or_default(),
                t_total: t_total.unwrap_or(1.0),
                n_samples,
                max_iter,
                tol,
                starts,
                perturbation,
            })
        }
        Kind::BlowupDemo => {
            let q0 = f.float_list("q0", vec![1.0, 0.0], "initial configuration");
            let v0 = f.float_list("v0", vec![0.0, 1.0], "initial velocity");
            let duration = positive(f, "duration", 1.0, "integration time");
            let steps = count(f, "steps", 1000, 1, "integrator steps");
            let lambdas = f.float_list("lambdas", vec![0.5, 2.0, 4.0], "blow-up factors");
            for (i, l) in lambdas.iter().enumerate() {
                f.check(*l > 0.0, "lambdas", || format!("lambda {i} = {l} must be positive"));
            }
            Params::BlowupDemo(BlowupParams { q0, v0, duration, steps, lambdas })
        }
        Kind::BridgeCheck => {
            let paths = count(f, "paths", 50, 1, "number of random paths");
            let controls = count(f, "controls", 4, 2, "control points per path");
            let r_min = positive(f, "r_min", 0.5, "inner radius of the annulus");
            let r_max = f.float("r_max", 2.0, "outer radius of the annulus");
            f.check(r_max > r_min, "r_max", || format!("r_max = {r_max} must exceed r_min = {r_min}"));
            let samples_per_leg = count(f, "samples_per_leg", 100, 1, "samples per control leg");
            let min_slack = f.float("min_slack", -1e-9, "lowest acceptable slack A - l");
            let min_slack = ov.tolerance.map(|t| -t).unwrap_or(min_slack);
            Params::BridgeCheck(BridgeParams { paths, controls, r_min, r_max, samples_per_leg, min_slack })
        }
        Kind::BrakeCheck => {
            let q_start = f.float_list("q_start", vec![1.0], "rest point on the Hill boundary");
            let h0 = f.optional_float("h0", "energy; unset puts q_start on the Hill boundary");
            let duration = positive(f, "duration", 0.4, "integration time");
            let steps = count(f, "steps", 10_000, 1, "integrator steps per duration");
            let max_deviation = positive(f, "max_deviation", 1e-8, "largest acceptable retrace deviation");
            let max_deviation = ov.tolerance.unwrap_or(max_deviation);
            Params::BrakeCheck(BrakeParams { q_start, h0, duration, steps, max_deviation })
        }
    }
}

fn sub_table<'a>(f: &mut Fields<'a>, key: &str, doc: &'static str) -> Option<&'a Table> {
    f.used.push(key.to_string());
    f.docs.push(KeyDoc { key: f.path(key), ty: "table", default: Some("{}".into()), doc });
    match f.table.get(key) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(v) => {
            f.error(key, format!("expected a table, found {}", v.type_str()));
            None
        }
    }
}

/// Parse and validate a scenario; every violation is reported.
pub fn parse_scenario(text: &str, ov: &Overrides) -> Result<Scenario, Vec<Diagnostic>> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        vec![Diagnostic { key: "<file>".into(), message: e.message().to_string() }]
    })?;
    let empty = Table::new();
    let mut top = Fields::new(&table, "");
    let name = top.string("name", None, "scenario name");
    let kind_name = top.string("kind", None, "scenario kind");
    let seed = top.uint("seed", 0, "random seed");
    let output_dir = top
        .string("output_dir", Some(""), "output directory (overridden by OUTPUT_DIR and --output-dir)")
        .filter(|s| !s.is_empty())
        .map(PathBuf::from);
    let params_table = sub_table(&mut top, "params", "kind-specific parameters").unwrap_or(&empty);
    let kind = kind_name.as_deref().and_then(|k| {
        let kind = Kind::parse(k);
        if kind.is_none() {
            let names: Vec<&str> = Kind::ALL.iter().map(|k| k.as_str()).collect();
            top.error("kind", format!("unknown kind `{k}` (expected one of {})", names.join(", ")));
        }
        kind
    });
    let pot_table = match kind.and_then(Kind::potential_dim) {
        Some(_) => Some(sub_table(&mut top, "potential", "potential definition").unwrap_or(&empty)),
        None => None,
    };
    let (_, mut diags) = top.finish();
    let Some(kind) = kind else {
        return Err(diags);
    };
    let mut pf = Fields::new(params_table, "params");
    let params = parse_params(kind, &mut pf, ov);
    diags.extend(pf.finish().1);
    let potential = match (pot_table, kind.potential_dim()) {
        (Some(t), Some(dim)) => {
            let (pot, _, d) = potential(t, dim);
            diags.extend(d);
            pot
        }
        _ => None,
    };
    if let Some(pot) = &potential {
        check_dims(&params, jmlab_core::Potential::dim(pot), &mut diags);
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(Scenario {
        name: name.unwrap_or_default(),
        kind,
        seed: ov.seed.unwrap_or(seed),
        output_dir,
        params,
        potential,
    })
}

fn check_dims(params: &Params, dim: usize, diags: &mut Vec<Diagnostic>) {
    let mut want = |key: &str, v: &[f64]| {
        let path = format!("params.{key}");
        if v.len() != dim && !diags.iter().any(|d| d.key == path) {
            diags.push(Diagnostic {
                key: path,
                message: format!("has {} entries but the potential has dimension {dim}", v.len()),
            });
        }
    };
    match params {
        Params::Minimize(p) => {
            want("q0", &p.q0);
            want("q1", &p.q1);
        }
        Params::BlowupDemo(p) => {
            want("q0", &p.q0);
            want("v0", &p.v0);
        }
        Params::BrakeCheck(p) => want("q_start", &p.q_start),
        _ => {}
    }
}

/// The documented keys of a kind, gathered by parsing an empty table.
pub fn schema(kind: Kind) -> Vec<KeyDoc> {
    let empty = Table::new();
    let mut f = Fields::new(&empty, "params");
    parse_params(kind, &mut f, &Overrides::default());
    f.docs
}

/// The documented keys of each potential kind.
pub fn potential_schema() -> Vec<(&'static str, Vec<KeyDoc>)> {
    ["kepler", "power_law", "step"]
        .into_iter()
        .map(|k| {
            let mut t = Table::new();
            t.insert("kind".into(), Value::String(k.into()));
            let (_, docs, _) = potential(&t, 2);
            (k, docs.into_iter().filter(|d| d.key != "potential.kind").collect())
        })
        .collect()
}
