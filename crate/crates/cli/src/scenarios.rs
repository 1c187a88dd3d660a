//! One runner per scenario kind. Runners only compute; [`crate::write_outputs`] touches disk.

use std::f64::consts::TAU;

use jmlab_core::cone_geometry::{apex_extendibility, cone_distance, corner_cut, CirclePoint, ConeSpec};
use jmlab_core::io::{fmt_f64, numeric_csv, planar_csv, sweep_csv, timed_path_csv};
use jmlab_core::jm_metric::cone_radius;
use jmlab_core::sector_optics::{
    build_counterexample_sector, minimize_test_curve, oracle_shortest_path, poles, shoot_from_north,
    sweep_point, symmetric_north_south_geodesic, Classification, SectorTrace,
};
use jmlab_core::variational::{
    action_length_bridge, blowup_exponent, blowup_rescale, brake_retrace_check, discrete_action,
    integrate_newton, metric_dilation_check, minimize_fixed_time, newton_residual,
    zero_energy_reparameterize, FixedTimeSolution, MinimizeOptions,
};
use jmlab_core::{
    Convention, Error, HomogeneousPotential, JmMetric, ParamKind, Potential, SampledPath, StepShapeParams,
    TimedPath,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{
    BlowupParams, BrakeParams, BridgeParams, KeplerConeParams, MinimizeParams, OracleParams, Params,
    Scenario, SectorParams, SweepParams, TraceParams,
};

/// Everything a run produces, before it is written.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub results: Map<String, Value>,
    pub report: Vec<String>,
    /// Set when a check failed or a solver gave up; the artifacts are still written.
    pub failure: Option<String>,
}

impl RunOutput {
    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    fn line(&mut self, text: impl Into<String>) {
        self.report.push(text.into());
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Parameters the core rejected; exit code 2.
    Invalid(String),
    /// The computation failed; exit code 3.
    Numerical(String),
    Io(String),
}

impl RunError {
    fn from_core(op: &str, e: Error) -> Self {
        let msg = format!("{op}: {e}");
        match e {
            Error::Numerical(_) | Error::NotConverged { .. } | Error::InfiniteAction(_) => {
                RunError::Numerical(msg)
            }
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => RunError::Io(msg),
            _ => RunError::Invalid(msg),
        }
    }
}

type Run<T> = Result<T, RunError>;

fn ctx(op: &'static str) -> impl FnOnce(Error) -> RunError {
    move |e| RunError::from_core(op, e)
}

pub fn run(s: &Scenario) -> Run<RunOutput> {
    let mut out = RunOutput::default();
    match &s.params {
        Params::KeplerCone(p) => kepler_cone(p, s.seed, &mut out)?,
        Params::CounterexampleSweep(p) => sweep(p, &mut out)?,
        Params::SectorTrace(p) => trace(p, &mut out)?,
        Params::OracleRun(p) => oracle(p, &mut out)?,
        Params::Minimize(p) => minimize(p, pot(s), s.seed, &mut out)?,
        Params::BlowupDemo(p) => blowup(p, pot(s), &mut out)?,
        Params::BridgeCheck(p) => bridge(p, s.seed, &mut out)?,
        Params::BrakeCheck(p) => brake(p, pot(s), &mut out)?,
    }
    Ok(out)
}

fn pot(s: &Scenario) -> &HomogeneousPotential {
    s.potential.as_ref().expect("validated scenario carries its potential")
}

fn kepler_cone(p: &KeplerConeParams, seed: u64, out: &mut RunOutput) -> Run<()> {
    let c = cone_radius(p.alpha).map_err(ctx("cone_radius"))?;
    let cone = ConeSpec::new(c).map_err(ctx("cone"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(p.pairs);
    let mut min_gap = f64::INFINITY;
    for _ in 0..p.pairs {
        let a = CirclePoint::new(rng.random_range(0.0..p.rho_max), rng.random_range(0.0..TAU));
        let b = CirclePoint::new(rng.random_range(0.0..p.rho_max), rng.random_range(0.0..TAU));
        let d = cone_distance(a, b, cone);
        min_gap = min_gap.min(a.rho + b.rho - d);
        rows.push(vec![a.rho, a.theta, b.rho, b.theta, d, a.rho + b.rho]);
    }
    out.file(
        "cone_distance.csv",
        numeric_csv(&["rho1", "theta1", "rho2", "theta2", "distance", "apex_length"], &rows)
            .map_err(ctx("cone_distance"))?,
    );

    let mut verdicts = Vec::with_capacity(p.angles);
    let (mut min_margin, mut inextendible) = (f64::INFINITY, 0usize);
    for k in 0..p.angles {
        let theta_out = TAU * (k as f64 + 0.5) / p.angles as f64;
        let v = apex_extendibility(cone, 0.0, theta_out);
        let flat = match v {
            jmlab_core::cone_geometry::ApexVerdict::Inextendible { flat_angle, .. }
            | jmlab_core::cone_geometry::ApexVerdict::Geodesic { flat_angle } => flat_angle,
        };
        if v.is_inextendible() {
            inextendible += 1;
            min_margin = min_margin.min(v.margin());
        }
        verdicts.push(vec![0.0, theta_out, flat, v.margin(), if v.is_inextendible() { 1.0 } else { 0.0 }]);
    }
    out.file(
        "apex_verdicts.csv",
        numeric_csv(&["theta_in", "theta_out", "flat_angle", "margin", "inextendible"], &verdicts)
            .map_err(ctx("apex_extendibility"))?,
    );

    let cut = corner_cut(cone, 0.0, p.cut_theta, p.cut_radius).map_err(ctx("corner_cut"))?;
    out.file("corner_cut.csv", planar_csv(&cut.path).map_err(ctx("corner_cut"))?);
    out.file("corner_apex.csv", planar_csv(&cut.apex_path).map_err(ctx("corner_cut"))?);

    out.put("c", c);
    out.put("min_apex_gap", min_gap);
    out.put("inextendible_verdicts", inextendible);
    out.put("verdicts", p.angles);
    out.put("min_margin", if inextendible > 0 { Value::from(min_margin) } else { Value::Null });
    out.put("corner_cut_saving", cut.saving);
    out.line(format!("cone radius c = {}", fmt_f64(c)));
    out.line(format!("{} random pairs, min (rho1 + rho2 - d) = {}", p.pairs, fmt_f64(min_gap)));
    out.line(format!("{inextendible} of {} apex verdicts inextendible", p.angles));
    out.line(format!(
        "corner cut at radius {}: length {} vs {} through the apex",
        p.cut_radius,
        fmt_f64(cut.length),
        fmt_f64(cut.apex_length)
    ));
    Ok(())
}

fn sweep(p: &SweepParams, out: &mut RunOutput) -> Run<()> {
    let oracle = (p.oracle_resolution > 0).then_some((p.oracle_resolution, p.neighbor_order));
    let values: Vec<f64> = (0..p.points)
        .map(|i| p.m_big_min + (p.m_big_max - p.m_big_min) * i as f64 / (p.points - 1) as f64)
        .collect();
    // collect keeps the input order, so the table does not depend on the thread count
    let rows = values
        .par_iter()
        .map(|&big| {
            let params = StepShapeParams::new(p.m, big, p.delta)?;
            sweep_point(params, p.alpha, p.convention, oracle)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(ctx("sweep_point"))?;
    out.file("sweep.csv", sweep_csv(&rows).map_err(ctx("sweep_csv"))?);

    let flip = rows
        .windows(2)
        .find(|w| w[0].classification != w[1].classification)
        .map(|w| (w[0].m_big, w[1].m_big));
    // the band value whose index equals the critical index
    let mc_index = rows[0].mc;
    let mc = match p.convention {
        Convention::ShapeLinear => mc_index,
        Convention::JmConsistent => mc_index * mc_index,
    };
    let c = cone_radius(p.alpha).map_err(ctx("cone_radius"))?;
    let sufficient = match p.convention {
        Convention::ShapeLinear => p.m / (c * p.delta),
        Convention::JmConsistent => p.m / (c * p.delta).powi(2),
    };
    out.put("points", rows.len());
    out.put("critical_m_big", mc);
    out.put("sufficient_m_big", sufficient);
    out.put(
        "flip_bracket",
        flip.map(|(a, b)| json!([a, b])).unwrap_or(Value::Null),
    );
    out.put(
        "collision_points",
        rows.iter().filter(|r| r.classification == Classification::CollisionPath).count(),
    );
    out.line(format!("convention {}", p.convention.as_str()));
    out.line(format!("critical band value M_c = {}", fmt_f64(mc)));
    out.line(format!("smallest band value meeting the sufficient condition = {}", fmt_f64(sufficient)));
    match flip {
        Some((a, b)) => out.line(format!("classification flips between M = {} and M = {}", fmt_f64(a), fmt_f64(b))),
        None => out.line("no classification flip in the sweep range"),
    }
    Ok(())
}

fn sector_metric(p: &SectorParams) -> Run<jmlab_core::SectorMetric> {
    build_counterexample_sector(p.step, p.alpha, p.convention).map_err(ctx("build_counterexample_sector"))
}

fn trace_tables(tr: &SectorTrace, out: &mut RunOutput) -> Run<f64> {
    out.file("trace.csv", planar_csv(&tr.points).map_err(ctx("trace"))?);
    let mut worst = 0.0f64;
    let rows: Vec<Vec<f64>> = tr
        .crossings
        .iter()
        .map(|x| {
            let (a, b) = x.snell_invariants();
            if !x.reflected {
                worst = worst.max((a - b).abs());
            }
            vec![
                x.point[0],
                x.point[1],
                x.boundary,
                x.n_in,
                x.n_out,
                x.theta_in,
                x.theta_out,
                if x.reflected { 1.0 } else { 0.0 },
                a,
                b,
            ]
        })
        .collect();
    let header = [
        "x", "y", "boundary", "n_in", "n_out", "theta_in", "theta_out", "reflected", "invariant_in",
        "invariant_out",
    ];
    out.file("crossings.csv", numeric_csv(&header, &rows).map_err(ctx("trace"))?);
    Ok(worst)
}

fn trace(p: &TraceParams, out: &mut RunOutput) -> Run<()> {
    let metric = sector_metric(&p.sector)?;
    let tr = match p.x {
        Some(x) => Some(shoot_from_north(&metric, x, p.max_length).map_err(ctx("shoot_from_north"))?),
        None => symmetric_north_south_geodesic(&metric).map_err(ctx("symmetric_north_south_geodesic"))?,
    };
    match tr {
        Some(tr) => {
            let worst = trace_tables(&tr, out)?;
            out.put("found", true);
            out.put("termination", serde_json::to_value(tr.termination).unwrap_or(Value::Null));
            out.put("optical_length", tr.optical_length);
            out.put("euclidean_length", tr.euclidean_length);
            out.put("crossings", tr.crossings.len());
            out.put("max_snell_mismatch", worst);
            out.line(format!("{} crossings, optical length {}", tr.crossings.len(), fmt_f64(tr.optical_length)));
            out.line(format!("max Snell invariant mismatch {}", fmt_f64(worst)));
        }
        None => {
            let (n, s) = poles(&metric);
            out.file("trace.csv", planar_csv(&[n, [0.0, 0.0], s]).map_err(ctx("trace"))?);
            let g = metric.symmetric().map_err(ctx("symmetric"))?;
            out.put("found", false);
            out.put("optical_length", 2.0 * g.n_outer);
            out.line("no Snell geodesic lands on S; the minimizer is the collision path");
        }
    }
    Ok(())
}

fn oracle(p: &OracleParams, out: &mut RunOutput) -> Run<()> {
    let metric = sector_metric(&p.sector)?;
    let (n, s) = poles(&metric);
    let o = oracle_shortest_path(&metric, n, s, p.resolution, p.neighbor_order)
        .map_err(ctx("oracle_shortest_path"))?;
    let min = minimize_test_curve(&metric).map_err(ctx("minimize_test_curve"))?;
    out.file("oracle_path.csv", planar_csv(&o.path).map_err(ctx("oracle_path"))?);
    let rel = (o.length - min.length) / min.length;
    out.put("length", o.length);
    out.put("hits_vertex", o.hits_vertex);
    out.put("nodes", o.nodes);
    out.put("test_curve_length", min.length);
    out.put("classification", min.classification.as_str());
    out.put("relative_difference", rel);
    out.line(format!("oracle length {} over {} nodes", fmt_f64(o.length), o.nodes));
    out.line(format!(
        "test-curve minimum {} ({}), relative difference {}",
        fmt_f64(min.length),
        min.classification.as_str(),
        fmt_f64(rel)
    ));
    out.line(format!("path through the vertex: {}", o.hits_vertex));
    Ok(())
}

fn solution_summary(sol: &FixedTimeSolution, pot: &HomogeneousPotential, out: &mut RunOutput) -> Run<()> {
    out.file("path.csv", timed_path_csv(&sol.path).map_err(ctx("timed_path_csv"))?);
    out.put("action", sol.report.action);
    out.put("kinetic_integral", sol.report.kinetic_integral);
    out.put("potential_integral", sol.report.potential_integral);
    out.put("energy_std", sol.report.energy_std());
    out.put("el_residual", sol.el_residual);
    out.put("grad_residual", sol.grad_norm);
    out.put("iterations", sol.iterations);
    out.put("start", sol.start);
    out.put("converged", sol.converged);
    out.put("collision_touches", sol.collision_touch.iter().filter(|t| **t).count());
    out.put("closest_approach", sol.closest_approach(pot));
    out.line(format!("action {} after {} iterations (start {})", fmt_f64(sol.report.action), sol.iterations, sol.start));
    out.line(format!("energy std {}", fmt_f64(sol.report.energy_std())));
    out.line(format!("Euler-Lagrange residual {}", fmt_f64(sol.el_residual)));
    out.line(format!("collision touch: {}", sol.touches_collision()));
    Ok(())
}

fn minimize(p: &MinimizeParams, pot: &HomogeneousPotential, seed: u64, out: &mut RunOutput) -> Run<()> {
    let opts = MinimizeOptions {
        n_samples: p.n_samples,
        max_iter: p.max_iter,
        tol: p.tol,
        starts: p.starts,
        perturbation: p.perturbation,
        seed,
        init: None,
    };
    match minimize_fixed_time(&p.q0, &p.q1, p.t_total, pot, &opts) {
        Ok(sol) => solution_summary(&sol, pot, out),
        Err(Error::NotConverged { iterations, grad_norm, best }) => {
            solution_summary(&best, pot, out)?;
            out.failure = Some(format!(
                "minimize_fixed_time: no start converged in {iterations} iterations (residual {grad_norm:e})"
            ));
            Ok(())
        }
        Err(e) => Err(RunError::from_core("minimize_fixed_time", e)),
    }
}

fn mean_energy(path: &TimedPath, pot: &HomogeneousPotential) -> Run<(f64, f64)> {
    let rep = discrete_action(path, pot).map_err(ctx("discrete_action"))?;
    let vals: Vec<f64> = rep.energy_profile.iter().flatten().copied().collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, max))
}

fn blowup(p: &BlowupParams, pot: &HomogeneousPotential, out: &mut RunOutput) -> Run<()> {
    let alpha = pot.alpha();
    let orbit = integrate_newton(pot, &p.q0, &p.v0, p.duration, p.steps).map_err(ctx("integrate_newton"))?;
    out.file("orbit.csv", timed_path_csv(&orbit).map_err(ctx("timed_path_csv"))?);
    let (h, h_max) = mean_energy(&orbit, pot)?;
    let residual = newton_residual(&orbit, pot).map_err(ctx("newton_residual"))?;
    let nu = blowup_exponent(alpha);
    let mut rows = Vec::new();
    let mut worst_ratio = 0.0f64;
    for (i, &lambda) in p.lambdas.iter().enumerate() {
        let scaled = blowup_rescale(&orbit, lambda, alpha).map_err(ctx("blowup_rescale"))?;
        out.file(&format!("orbit_lambda_{i}.csv"), timed_path_csv(&scaled).map_err(ctx("timed_path_csv"))?);
        let (hs, _) = mean_energy(&scaled, pot)?;
        let r = newton_residual(&scaled, pot).map_err(ctx("newton_residual"))? / lambda.powf(1.0 - 2.0 * nu);
        // every sample satisfies h_max + U >= K >= 0, so the orbit lies in that Hill region
        let dilation = metric_dilation_check(pot, h_max, lambda, std::slice::from_ref(orbit.path()))
            .map_err(ctx("metric_dilation_check"))?;
        if residual > 0.0 {
            worst_ratio = worst_ratio.max(r / residual);
        }
        rows.push(vec![lambda, hs, lambda.powf(-alpha) * h, r, dilation]);
    }
    out.file(
        "blowup.csv",
        numeric_csv(&["lambda", "energy", "predicted_energy", "normalized_residual", "dilation_deviation"], &rows)
            .map_err(ctx("blowup"))?,
    );
    out.put("nu", nu);
    out.put("energy", h);
    out.put("newton_residual", residual);
    out.put("max_residual_ratio", worst_ratio);
    out.line(format!("orbit energy {}, Newton residual {}", fmt_f64(h), fmt_f64(residual)));
    for r in &rows {
        out.line(format!(
            "lambda {}: energy {} (predicted {}), dilation deviation {}",
            r[0],
            fmt_f64(r[1]),
            fmt_f64(r[2]),
            fmt_f64(r[4])
        ));
    }
    Ok(())
}

/// A random planar polyline in an annulus with gentle turns, refined per leg.
fn annulus_path(rng: &mut ChaCha8Rng, p: &BridgeParams) -> Run<SampledPath> {
    let mut theta = rng.random_range(0.0..TAU);
    let pts: Vec<Vec<f64>> = (0..p.controls)
        .map(|_| {
            let r = rng.random_range(p.r_min..p.r_max);
            let q = vec![r * theta.cos(), r * theta.sin()];
            theta += rng.random_range(-0.8..0.8);
            q
        })
        .collect();
    Ok(SampledPath::uniform(pts, ParamKind::Abstract)
        .map_err(ctx("annulus_path"))?
        .refine(p.samples_per_leg))
}

fn bridge(p: &BridgeParams, seed: u64, out: &mut RunOutput) -> Run<()> {
    let pot = HomogeneousPotential::kepler(2).map_err(ctx("kepler"))?;
    let metric = JmMetric::new(0.0, &pot);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(p.paths);
    for i in 0..p.paths {
        let path = annulus_path(&mut rng, p)?;
        let mut t = 0.0;
        let times: Vec<f64> = (0..path.len())
            .map(|k| {
                if k > 0 {
                    t += rng.random_range(0.2..2.0) / path.len() as f64;
                }
                t
            })
            .collect();
        let timed = TimedPath::from_samples(times, path.points().iter().map(|q| q.to_vec()).collect())
            .map_err(ctx("timed_path"))?;
        let b = action_length_bridge(&timed, &pot).map_err(ctx("action_length_bridge"))?;
        let geo = metric.arclength_parameterize(&path).map_err(ctx("arclength_parameterize"))?;
        let zero = zero_energy_reparameterize(&geo, &pot).map_err(ctx("zero_energy_reparameterize"))?;
        let bz = action_length_bridge(&zero, &pot).map_err(ctx("action_length_bridge"))?;
        rows.push(vec![i as f64, b.length, b.action, b.slack, bz.slack]);
    }
    out.file(
        "bridge.csv",
        numeric_csv(&["path", "length", "action", "slack", "zero_energy_slack"], &rows).map_err(ctx("bridge"))?,
    );
    let min_slack = rows.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
    let max_zero = rows.iter().map(|r| r[4].abs()).fold(0.0, f64::max);
    let pass = min_slack >= p.min_slack;
    out.put("paths", p.paths);
    out.put("min_slack", min_slack);
    out.put("max_abs_zero_energy_slack", max_zero);
    out.put("pass", pass);
    out.line(format!("{} paths, min slack {}", p.paths, fmt_f64(min_slack)));
    out.line(format!("max |slack| after zero-energy retiming {}", fmt_f64(max_zero)));
    if !pass {
        out.failure = Some(format!("bridge_check: slack {min_slack:e} is below {:e}", p.min_slack));
    }
    Ok(())
}

fn brake(p: &BrakeParams, pot: &HomogeneousPotential, out: &mut RunOutput) -> Run<()> {
    let h0 = match p.h0 {
        Some(h) => h,
        None => -pot
            .value(&p.q_start)
            .finite()
            .ok_or_else(|| RunError::Invalid("brake_check: q_start is a collision".into()))?,
    };
    let rest = vec![0.0; p.q_start.len()];
    let r = brake_retrace_check(pot, h0, &p.q_start, &rest, p.duration, p.steps)
        .map_err(ctx("brake_retrace_check"))?;
    let outgoing = integrate_newton(pot, &p.q_start, &rest, p.duration, p.steps).map_err(ctx("integrate_newton"))?;
    out.file("outgoing.csv", timed_path_csv(&outgoing).map_err(ctx("timed_path_csv"))?);
    let pass = r.max_deviation < p.max_deviation;
    out.put("h0", h0);
    out.put("max_deviation", r.max_deviation);
    out.put("energy_drift", r.energy_drift);
    out.put("pass", pass);
    out.line(format!("h0 = {}", fmt_f64(h0)));
    out.line(format!("retrace deviation {}", fmt_f64(r.max_deviation)));
    out.line(format!("energy drift {}", fmt_f64(r.energy_drift)));
    if !pass {
        out.failure = Some(format!(
            "brake_check: deviation {:e} is not below {:e}",
            r.max_deviation, p.max_deviation
        ));
    }
    Ok(())
}
