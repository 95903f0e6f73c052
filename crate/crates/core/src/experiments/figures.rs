use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{Grid, RunConfig};
use super::output::{Cell, Plot, RunWriter, Series, Table};
use crate::error::{Error, Result};
use crate::estimation::{evaluate, gaussian_prior, mse_profile, profile_grid, LinearEstimator};
use crate::hybrid::{monte_carlo_total_mse, noise_sweep, HybridConfig};
use crate::optimize::{
    default_time_bound, minimize_bmse, squeezing_scan, squeezing_trace, sweep_order, sweep_prior, FrontierCurve,
    FrontierPoint, FrontierTable, Template,
};
use crate::oqi::oqi_limit;
use crate::protocol::{dynamic_range, outcome_distribution, response_curve, DynamicRange, NoiseModel, ProtocolSpec, TwistEngine};
use crate::spin::{coherent_state, husimi_q, DickeState, SpinSpace};

fn scalar(grid: &Grid, name: &str) -> Result<f64> {
    match grid.values()?.as_slice() {
        [x] => Ok(*x),
        v => Err(Error::Config(format!("{name} must be a single value here, got {} values", v.len()))),
    }
}

fn times_cell(times: &[f64]) -> Cell {
    Cell::Text(times.iter().map(|t| format!("{t:.16e}")).collect::<Vec<_>>().join(";"))
}

fn time_or_nan(times: &[f64], i: usize) -> Cell {
    times.get(i).copied().unwrap_or(f64::NAN).into()
}

/// Optimized protocols and dynamic ranges behind `response.csv`.
#[derive(Clone, Debug)]
pub struct ResponseRun {
    pub qd: ProtocolSpec,
    pub qa: ProtocolSpec,
    /// (scheme, range) for css, qa, qd.
    pub ranges: Vec<(String, DynamicRange)>,
}

/// Response curves of CSS, QA and QD. QD is optimized against the Gaussian
/// prior of width `delta_phi` without detection noise; QA (second twist
/// reversed) against width `qa_delta_phi` with detection noise `sigma_det`.
pub fn run_response(cfg: &RunConfig, w: &mut RunWriter) -> Result<ResponseRun> {
    let (n, chi) = (cfg.particles, cfg.chi);
    let dp = scalar(&cfg.delta_phi, "delta_phi")?;
    let sigma = scalar(&cfg.sigma_det, "sigma_det")?;
    let (qd, qa) = w.timed("optimize", || {
        let tpl = Template::deamplified(n, chi);
        let prior = gaussian_prior(dp, cfg.nodes)?;
        let qd = minimize_bmse(&tpl, &prior, &NoiseModel::noiseless(), &tpl.default_space(), &cfg.optimizer, &[])?;
        let tpl = Template::amplified(n, chi);
        let prior = gaussian_prior(cfg.qa_delta_phi, cfg.nodes)?;
        let qa = minimize_bmse(&tpl, &prior, &NoiseModel::new(sigma)?, &tpl.amplifying_space(), &cfg.optimizer, &[])?;
        Ok((qd.spec, qa.spec))
    })?;
    let css = ProtocolSpec::classical(n).with_chi(chi);
    let schemes = [("css", &css), ("qa", &qa), ("qd", &qd)];
    let grid = profile_grid(cfg.phi_points);
    let curves = w.timed("response", || {
        schemes.iter().map(|(_, s)| response_curve(s, &grid)).collect::<Result<Vec<_>>>()
    })?;
    let mut table = Table::new(&["phi", "css", "qa", "qd"]);
    for (i, phi) in grid.iter().enumerate() {
        table.push(vec![(*phi).into(), curves[0][i].into(), curves[1][i].into(), curves[2][i].into()]);
    }
    w.csv("response.csv", &table)?;

    let mut ranges = Vec::new();
    let mut table = Table::new(&["scheme", "lower", "upper", "t1", "t2"]);
    for (label, spec) in schemes {
        let r = w.timed(&format!("range-{label}"), || dynamic_range(spec))?;
        table.push(vec![
            label.into(),
            r.lower.into(),
            r.upper.into(),
            time_or_nan(&spec.times, 0),
            time_or_nan(&spec.times, 1),
        ]);
        ranges.push((label.to_string(), r));
    }
    w.csv("dynamic_range.csv", &table)?;
    let mut plot = Plot::new("response.png", "phi (rad)", "<S_y>/S")
        .with(Series::lines("response.csv", 1, 2, "CSS"))
        .with(Series::lines("response.csv", 1, 3, "QA"))
        .with(Series::lines("response.csv", 1, 4, "QD"));
    for (label, r) in &ranges {
        plot.extra.push(format!("# {label} monotone on [{:.6}, {:.6}]", r.lower, r.upper));
    }
    w.plot("response.gp", &plot)?;
    Ok(ResponseRun { qd, qa, ranges })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OqiPoint {
    pub delta_phi: f64,
    pub ratio: f64,
    pub bmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
    pub history: Vec<f64>,
}

fn oqi_point(space: &SpinSpace, delta_phi: f64, cfg: &RunConfig, seeds: &[DickeState]) -> OqiPoint {
    let run = gaussian_prior(delta_phi, cfg.nodes)
        .and_then(|prior| Ok((oqi_limit(space, &prior, cfg.oqi_tolerance, cfg.oqi_max_iter, seeds)?, prior)));
    match run {
        Ok((r, prior)) => OqiPoint {
            delta_phi,
            ratio: r.ratio(&prior),
            bmse: r.bmse,
            iterations: r.iterations,
            converged: r.converged,
            error: None,
            history: r.history,
        },
        Err(e) => OqiPoint {
            delta_phi,
            ratio: f64::NAN,
            bmse: f64::NAN,
            iterations: 0,
            converged: false,
            error: Some(e.to_string()),
            history: Vec::new(),
        },
    }
}

/// Everything `frontier` computed; saved as `frontier.json` for the
/// downstream `mse-profile` and `squeezing` runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRun {
    pub particles: usize,
    pub chi: f64,
    pub sigma_det: f64,
    pub table: FrontierTable,
    pub oqi: Vec<OqiPoint>,
}

pub const FRONTIER_FILE: &str = "frontier.json";

impl FrontierRun {
    fn curve(&self, label: &str) -> Result<&FrontierCurve> {
        self.table
            .curve(label)
            .ok_or_else(|| Error::MissingUpstream(format!("frontier has no '{label}' curve")))
    }
}

fn scheme_templates(n: usize, chi: f64) -> [Template; 3] {
    [Template::classical(n, chi), Template::squeezed(n, chi), Template::deamplified(n, chi)]
}

/// Optimized CSS, SSS and QD on the prior-width grid with the OQI limit
/// alongside. OQI failures are recorded per row and do not stop the run.
pub fn run_frontier(cfg: &RunConfig, w: &mut RunWriter) -> Result<FrontierRun> {
    let (n, chi) = (cfg.particles, cfg.chi);
    let grid = cfg.delta_phi.values()?;
    let sigma = scalar(&cfg.sigma_det, "sigma_det")?;
    let noise = NoiseModel::new(sigma)?;
    let templates = scheme_templates(n, chi);
    let table = w.timed("protocols", || sweep_prior(&templates, &grid, &noise, &cfg.optimizer, cfg.nodes))?;
    let space = SpinSpace::new(n)?;
    let engine = TwistEngine::shared(n, chi)?;
    let oqi = w.timed("oqi", || {
        Ok(grid
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let seeds: Vec<DickeState> = ["sss", "qd"]
                    .iter()
                    .filter_map(|l| table.curve(l))
                    .map(|c| engine.probe(c.points[j].times[0]))
                    .collect();
                oqi_point(&space, d, cfg, &seeds)
            })
            .collect::<Vec<_>>())
    })?;
    let run = FrontierRun {
        particles: n,
        chi,
        sigma_det: sigma,
        table,
        oqi,
    };
    let (css, sss, qd) = (run.curve("css")?, run.curve("sss")?, run.curve("qd")?);
    let mut t = Table::new(&[
        "delta_phi", "css", "sss", "qd", "oqi", "sss_t1", "qd_t1", "qd_t2", "qd_gain", "oqi_converged", "status",
    ]);
    for (j, &d) in grid.iter().enumerate() {
        let o = &run.oqi[j];
        t.push(vec![
            d.into(),
            css.points[j].ratio.into(),
            sss.points[j].ratio.into(),
            qd.points[j].ratio.into(),
            o.ratio.into(),
            sss.points[j].times[0].into(),
            qd.points[j].times[0].into(),
            qd.points[j].times[1].into(),
            qd.points[j].gain.into(),
            o.converged.into(),
            o.error.clone().unwrap_or_else(|| "ok".into()).into(),
        ]);
    }
    w.csv("frontier.csv", &t)?;
    let mut t = Table::new(&["scheme", "index", "delta_phi", "ratio", "t1", "t2"]);
    for c in &run.table.curves {
        if let Some(i) = c.turning_point {
            let p = &c.points[i];
            t.push(vec![
                c.label.clone().into(),
                i.into(),
                p.delta_phi.into(),
                p.ratio.into(),
                time_or_nan(&p.times, 0),
                time_or_nan(&p.times, 1),
            ]);
        }
    }
    w.csv("turning_points.csv", &t)?;
    w.json(FRONTIER_FILE, &run)?;
    let plot = Plot::new("frontier.png", "delta phi (rad)", "Delta phi / delta phi")
        .with(Series::points("frontier.csv", 1, 2, "CSS"))
        .with(Series::points("frontier.csv", 1, 3, "SSS"))
        .with(Series::points("frontier.csv", 1, 4, "QD"))
        .with(Series::points("frontier.csv", 1, 5, "OQI"));
    w.plot("frontier.gp", &plot)?;
    Ok(run)
}

fn load_frontier(cfg: &RunConfig) -> Result<FrontierRun> {
    let mut candidates = vec![cfg.out_dir.join(FRONTIER_FILE)];
    if let Some(parent) = cfg.out_dir.parent() {
        candidates.push(parent.join("frontier").join(FRONTIER_FILE));
    }
    let path: PathBuf = candidates.iter().find(|p| p.is_file()).cloned().ok_or_else(|| {
        Error::MissingUpstream(format!(
            "no {FRONTIER_FILE} at {}; run `qdsense frontier --out {}` first",
            candidates.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" or "),
            cfg.out_dir.display()
        ))
    })?;
    let text = std::fs::read_to_string(&path)?;
    let run: FrontierRun =
        serde_json::from_str(&text).map_err(|e| Error::MissingUpstream(format!("{}: {e}", path.display())))?;
    if run.particles != cfg.particles || run.chi != cfg.chi {
        return Err(Error::Config(format!(
            "{} was computed for N = {}, chi = {} but the config asks for N = {}, chi = {}",
            path.display(),
            run.particles,
            run.chi,
            cfg.particles,
            cfg.chi
        )));
    }
    Ok(run)
}

/// The turning point of a curve, or its best point when the minimum sits at
/// a grid end.
fn focus(curve: &FrontierCurve) -> &FrontierPoint {
    curve.turning_point.map(|i| &curve.points[i]).unwrap_or_else(|| curve.best())
}

/// Conditional MSE over [-pi, pi] of CSS, SSS and QD, each at its frontier
/// turning point.
pub fn run_mse_profile(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let run = load_frontier(cfg)?;
    let noise = NoiseModel::new(run.sigma_det)?;
    let grid = profile_grid(cfg.phi_points);
    let templates = scheme_templates(run.particles, run.chi);
    let mut profiles = Vec::new();
    let mut points = Table::new(&["scheme", "delta_phi", "ratio", "gain", "t1", "t2"]);
    for tpl in &templates {
        let p = focus(run.curve(&tpl.label)?);
        let spec = tpl.base.with_times(&p.times);
        let prof = w.timed(&format!("profile-{}", tpl.label), || {
            mse_profile(&spec, LinearEstimator { gain: p.gain }, &grid, &noise)
        })?;
        profiles.push(prof);
        points.push(vec![
            tpl.label.clone().into(),
            p.delta_phi.into(),
            p.ratio.into(),
            p.gain.into(),
            time_or_nan(&p.times, 0),
            time_or_nan(&p.times, 1),
        ]);
    }
    let mut t = Table::new(&["phi", "css", "sss", "qd"]);
    for (i, phi) in grid.iter().enumerate() {
        t.push(vec![(*phi).into(), profiles[0][i].into(), profiles[1][i].into(), profiles[2][i].into()]);
    }
    w.csv("mse_profile.csv", &t)?;
    w.csv("profile_points.csv", &points)?;
    let mut plot = Plot::new("mse_profile.png", "phi (rad)", "MSE(phi)")
        .with(Series::lines("mse_profile.csv", 1, 2, "CSS"))
        .with(Series::lines("mse_profile.csv", 1, 3, "SSS"))
        .with(Series::lines("mse_profile.csv", 1, 4, "QD"));
    plot.logscale_y = true;
    w.plot("mse_profile.gp", &plot)
}

/// Wineland parameter of the probe and of the fully twisted phi = 0 state
/// for every QD frontier point, the trace at the turning point, and the
/// best value reachable by a single twist.
pub fn run_squeezing(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let run = load_frontier(cfg)?;
    let qd = run.curve("qd")?;
    let base = Template::deamplified(run.particles, run.chi).base;
    let mut t = Table::new(&["delta_phi", "t1", "t2", "probe_xi2", "final_xi2"]);
    for p in &qd.points {
        let tr = squeezing_trace(&base.with_times(&p.times), cfg.squeezing_step)?;
        t.push(vec![
            p.delta_phi.into(),
            p.times[0].into(),
            p.times[1].into(),
            tr.probe_xi2.into(),
            tr.final_xi2.into(),
        ]);
    }
    w.csv("squeezing.csv", &t)?;
    let tr = squeezing_trace(&base.with_times(&focus(qd).times), cfg.squeezing_step)?;
    let mut t = Table::new(&["t", "xi2"]);
    for (time, x) in tr.times.iter().zip(&tr.xi2) {
        t.push(vec![(*time).into(), (*x).into()]);
    }
    w.csv("squeezing_trace.csv", &t)?;
    let bound = default_time_bound(run.particles, run.chi);
    let (ts, xs) = w.timed("scan", || squeezing_scan(run.particles, run.chi, bound, cfg.squeezing_step))?;
    let mut t = Table::new(&["scan_time", "scan_xi2", "probe_time", "final_time"]);
    t.push(vec![ts.into(), xs.into(), tr.probe_time.into(), tr.final_time.into()]);
    w.csv("squeezing_scan.csv", &t)?;
    let mut plot = Plot::new("squeezing.png", "twisting time", "xi^2_W")
        .with(Series::lines("squeezing_trace.csv", 1, 2, "phi = 0 trajectory"));
    plot.logscale_y = true;
    plot.extra.push(format!("set arrow from {0},graph 0 to {0},graph 1 nohead dt 2", tr.probe_time));
    w.plot("squeezing.gp", &plot)
}

/// Sequential QD: optimized frontier per order with the OQI limit, and the
/// response, mean estimate and RMS error of the protocol given by `times`.
pub fn run_sequential(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let (n, chi) = (cfg.particles, cfg.chi);
    let grid = cfg.delta_phi.values()?;
    let noise = NoiseModel::new(scalar(&cfg.sigma_det, "sigma_det")?)?;
    let rows = w.timed("protocols", || sweep_order(n, chi, &cfg.orders, &grid, &noise, &cfg.optimizer, cfg.nodes))?;
    let space = SpinSpace::new(n)?;
    let engine = TwistEngine::shared(n, chi)?;
    let oqi: Vec<OqiPoint> = w.timed("oqi", || {
        Ok(grid
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let seeds: Vec<DickeState> = rows.iter().map(|r| engine.probe(r.curve.points[j].times[0])).collect();
                oqi_point(&space, d, cfg, &seeds)
            })
            .collect())
    })?;
    let oqi_min = oqi.iter().map(|o| o.ratio).filter(|r| r.is_finite()).fold(f64::INFINITY, f64::min);

    let mut header = vec!["delta_phi".to_string()];
    header.extend(rows.iter().map(|r| format!("seq{}", r.order)));
    header.push("oqi".into());
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for (j, &d) in grid.iter().enumerate() {
        let mut row: Vec<Cell> = vec![d.into()];
        row.extend(rows.iter().map(|r| r.curve.points[j].ratio.into()));
        row.push(oqi[j].ratio.into());
        t.push(row);
    }
    w.csv("sequential_frontier.csv", &t)?;
    let mut t = Table::new(&["order", "delta_phi", "ratio", "oqi_min", "times"]);
    for r in &rows {
        t.push(vec![
            r.order.into(),
            r.best.delta_phi.into(),
            r.best.ratio.into(),
            oqi_min.into(),
            times_cell(&r.best.times),
        ]);
    }
    w.csv("sequential_best.csv", &t)?;

    let spec = ProtocolSpec::sequential(n, cfg.times.clone()).with_chi(chi);
    spec.validate()?;
    let order = spec.slots();
    let at = rows.iter().find(|r| r.order == order).map_or(grid[0], |r| r.best.delta_phi);
    let gain = evaluate(&spec, &gaussian_prior(at, cfg.nodes)?, &noise)?.estimator.gain;
    let range = dynamic_range(&spec)?;
    let points = 2 * cfg.phi_points - 1;
    let phis: Vec<f64> = (0..points).map(|i| -2.0 * PI + 4.0 * PI * i as f64 / (points - 1) as f64).collect();
    let response = response_curve(&spec, &phis)?;
    let m = engine.space().m_grid();
    let mut t = Table::new(&["phi", "response", "estimate", "rms_error"]);
    for (phi, r) in phis.iter().zip(&response) {
        let p = outcome_distribution(&spec, *phi, &noise)?;
        let (mean, mse) = p.iter().zip(&m).fold((0.0, 0.0), |(a, b), (pk, mk)| {
            (a + pk * gain * mk, b + pk * (phi - gain * mk).powi(2))
        });
        t.push(vec![(*phi).into(), (*r).into(), mean.into(), mse.sqrt().into()]);
    }
    w.csv("sequential_response.csv", &t)?;
    let mut t = Table::new(&["order", "lower", "upper", "gain", "delta_phi", "times"]);
    t.push(vec![
        order.into(),
        range.lower.into(),
        range.upper.into(),
        gain.into(),
        at.into(),
        times_cell(&spec.times),
    ]);
    w.csv("sequential_range.csv", &t)?;
    let mut frontier = Plot::new("sequential_frontier.png", "delta phi (rad)", "Delta phi / delta phi");
    for (k, r) in rows.iter().enumerate() {
        frontier = frontier.with(Series::points("sequential_frontier.csv", 1, k + 2, &format!("n = {}", r.order)));
    }
    frontier = frontier.with(Series::points("sequential_frontier.csv", 1, rows.len() + 2, "OQI"));
    w.plot("sequential_frontier.gp", &frontier)?;
    let est = Plot::new("sequential_estimate.png", "phi (rad)", "phi_est (rad)")
        .with(Series::lines("sequential_response.csv", 1, 3, "a <m>"))
        .with(Series::lines("sequential_response.csv", 1, 2, "<S_y>/S"));
    w.plot("sequential_estimate.gp", &est)
}

/// Hybrid scheme against single-scheme pairs on the detection-noise grid,
/// for every prior width, with Monte-Carlo checks of the hybrid total MSE.
pub fn run_hybrid(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let hc = HybridConfig {
        nodes: cfg.nodes,
        optimizer: cfg.optimizer.clone(),
        ..HybridConfig::new(cfg.particles, cfg.chi)
    };
    let sigmas = cfg.sigma_det.values()?;
    let mut t = Table::new(&[
        "delta_phi", "sigma_det", "css_pair", "qd_pair", "qa_pair", "hybrid", "rel_qd", "rel_qa", "rel_hybrid", "d_t1",
        "d_t2", "a_t1", "a_t2", "gain_d", "gain_a", "mc_mse", "mc_std_error", "mc_z",
    ]);
    let mut index = 0u64;
    for d in cfg.delta_phi.values()? {
        let rows = w.timed(&format!("sweep-{d}"), || noise_sweep(&sigmas, d, &hc))?;
        for row in rows {
            let mc = if cfg.mc_samples > 0 {
                let seed = cfg.seed.wrapping_add(index);
                Some(monte_carlo_total_mse(&row.hybrid_spec, row.hybrid_bmse, cfg.mc_samples, seed)?)
            } else {
                None
            };
            index += 1;
            let rel = row.relative();
            let times = row.hybrid_times();
            let mut cells: Vec<Cell> = vec![
                d.into(),
                row.sigma_det.into(),
                row.css_pair.into(),
                row.qd_pair.into(),
                row.qa_pair.into(),
                row.hybrid.into(),
                rel[0].into(),
                rel[1].into(),
                rel[2].into(),
            ];
            cells.extend(times.iter().map(|&x| Cell::from(x)));
            cells.push(row.hybrid_spec.gain_d.into());
            cells.push(row.hybrid_spec.gain_a.into());
            let (a, b, c) = mc.map_or((f64::NAN, f64::NAN, f64::NAN), |m| (m.mse, m.std_error, m.z));
            cells.extend([a.into(), b.into(), c.into()]);
            t.push(cells);
        }
    }
    w.csv("hybrid.csv", &t)?;
    let mut times = Plot::new("hybrid_times.png", "sigma_det", "twisting time");
    for (col, label) in [(10, "D t1"), (11, "D t2"), (12, "A t1"), (13, "A t2")] {
        times = times.with(Series::points("hybrid.csv", 2, col, label));
    }
    w.plot("hybrid_times.gp", &times)?;
    let mut rel = Plot::new("hybrid_relative.png", "sigma_det", "ratio / CSS pair");
    for (col, label) in [(7, "QD pair"), (8, "QA pair"), (9, "hybrid")] {
        rel = rel.with(Series::points("hybrid.csv", 2, col, label));
    }
    w.plot("hybrid_relative.gp", &rel)
}

/// States after each stage of `spec` at phase `phi`: the coherent probe,
/// then every twisting segment and encoding in order.
pub fn husimi_stages(spec: &ProtocolSpec, phi: f64) -> Result<Vec<(String, DickeState)>> {
    let engine = TwistEngine::for_spec(spec)?;
    let twist = engine.twist();
    let mut state = coherent_state(engine.space(), PI / 2.0, 0.0);
    let mut stages = vec![("css".to_string(), state.clone())];
    // Segments apply exp(+i t H).
    state = state.evolve(twist, -spec.times[0])?;
    stages.push(("twist-1".into(), state.clone()));
    for (i, f) in spec.slot_fractions.iter().enumerate() {
        state = state.encode_phase(f * phi);
        stages.push((format!("encode-{}", i + 1), state.clone()));
        state = state.evolve(twist, -spec.times[i + 1])?;
        stages.push((format!("twist-{}", i + 2), state.clone()));
    }
    Ok(stages)
}

/// Husimi Q of every stage of the protocol given by `times` (two times: QD,
/// more: sequential) at the encoded phase `phase`.
pub fn run_husimi(cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let spec = ProtocolSpec::sequential(cfg.particles, cfg.times.clone()).with_chi(cfg.chi);
    spec.validate()?;
    let stages = husimi_stages(&spec, cfg.phase)?;
    let theta: Vec<f64> = (0..cfg.husimi_theta)
        .map(|i| PI * i as f64 / (cfg.husimi_theta - 1) as f64)
        .collect();
    let phi: Vec<f64> = (0..cfg.husimi_phi)
        .map(|j| -PI + 2.0 * PI * j as f64 / cfg.husimi_phi as f64)
        .collect();
    let mut grid = Table::new(&["stage", "theta", "phi", "q"]);
    let mut summary = Table::new(&[
        "stage", "label", "peak_theta", "peak_phi", "peak_q", "width_major", "width_minor", "anisotropy",
    ]);
    let mut script = String::from("set datafile separator ','\nset terminal pngcairo size 700,500\nset view map\n");
    script.push_str("set xlabel 'phi'\nset ylabel 'theta'\n");
    for (k, (label, state)) in stages.iter().enumerate() {
        let q = w.timed(&format!("husimi-{label}"), || husimi_q(state, &theta, &phi))?;
        for (i, th) in theta.iter().enumerate() {
            for (j, ph) in phi.iter().enumerate() {
                grid.push(vec![k.into(), (*th).into(), (*ph).into(), q.at(i, j).into()]);
            }
        }
        let (pt, pp, pq) = q.peak();
        let (a, b) = q.tangent_widths();
        summary.push(vec![
            k.into(),
            label.clone().into(),
            pt.into(),
            pp.into(),
            pq.into(),
            a.into(),
            b.into(),
            (a / b).into(),
        ]);
        script.push_str(&format!(
            "set output 'husimi_{k}.png'\nset title '{label}'\nsplot 'husimi.csv' skip 1 using 3:2:($1 == {k} ? $4 : 1/0) with points pt 5 ps 0.5 palette notitle\n"
        ));
    }
    w.csv("husimi.csv", &grid)?;
    w.csv("husimi_stages.csv", &summary)?;
    w.write("husimi.gp", script.as_bytes())
}

/// OQI limit on the prior-width grid.
pub fn run_oqi(cfg: &RunConfig, w: &mut RunWriter) -> Result<Vec<OqiPoint>> {
    let space = SpinSpace::new(cfg.particles)?;
    let grid = cfg.delta_phi.values()?;
    let points: Vec<OqiPoint> = w.timed("oqi", || Ok(grid.iter().map(|&d| oqi_point(&space, d, cfg, &[])).collect()))?;
    if let Some(bad) = points.iter().find(|p| p.error.is_some()) {
        return Err(Error::Numeric(format!(
            "OQI failed at delta_phi = {}: {}",
            bad.delta_phi,
            bad.error.as_deref().unwrap_or_default()
        )));
    }
    let mut t = Table::new(&["delta_phi", "ratio", "bmse", "iterations", "converged"]);
    let mut h = Table::new(&["delta_phi", "step", "bmse"]);
    for p in &points {
        t.push(vec![p.delta_phi.into(), p.ratio.into(), p.bmse.into(), p.iterations.into(), p.converged.into()]);
        for (k, v) in p.history.iter().enumerate() {
            h.push(vec![p.delta_phi.into(), k.into(), (*v).into()]);
        }
    }
    w.csv("oqi.csv", &t)?;
    w.csv("oqi_history.csv", &h)?;
    w.plot(
        "oqi.gp",
        &Plot::new("oqi.png", "delta phi (rad)", "Delta phi / delta phi").with(Series::points("oqi.csv", 1, 2, "OQI")),
    )?;
    Ok(points)
}
