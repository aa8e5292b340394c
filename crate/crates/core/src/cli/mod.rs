//! Config-driven experiment runner behind the `mtp` binary.
//!
//! One config file describes one experiment. A run writes `report.json`
//! (the echoed config, timings, results and named checks) and CSV files whose
//! first line is `# schema: <name> v<version>`. Exit codes: 0 when every check
//! passes, 1 when a property or gate fails (the property is named on stderr),
//! 2 for an invalid config or command line.

mod config;
mod output;

pub use config::{
    Command, DimfunSection, EngineSection, EstimatorSection, ExperimentConfig, SceneSection,
    TruncationSection,
};
pub use output::{write_csv, Check, RunReport, CSV_SCHEMA_VERSION};

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rand::Rng;
use serde_json::json;

use crate::dimfun::{classify_series, theta_transform, TransferPair, Verdict};
use crate::diophantine::approx_witnesses;
use crate::engine::{
    build_cantor, calibrate_packing, check_full_measure, matched_scene, verify_cantor_measure_bound,
    CantorTree, EngineConfig, MtpScene,
};
use crate::estimator::{
    block_rng, box_count, mc_measure, predict_dimension, verify_mdp_bound, ScaleStep, UniformInterval,
};
use crate::geometry::Ball;
use crate::{Error, Result};
use output::{floats, ints, num, write_text};

#[derive(Debug, Parser)]
#[command(name = "mtp", version, about = "Mass transference experiments")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parse arguments, run, print a summary and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return 2;
        }
    };
    if cfg.scene.phi.iter().flatten().all(|v| *v == 0.0)
        && !cfg.scene.phi.is_empty()
        && !matches!(cfg.command, Command::Measure | Command::Witnesses | Command::Classify)
    {
        eprintln!("warning: Phi = 0 is only meaningful for convergence experiments");
    }
    if cfg.threads > 0 {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    match run(&cfg) {
        Ok(report) => {
            println!("{} finished in {:.3}s", report.command, report.wall_time_s);
            for c in &report.checks {
                println!("  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.property, c.detail);
            }
            match report.first_failure() {
                None => 0,
                Some(c) => {
                    eprintln!("property failed: {}", c.property);
                    1
                }
            }
        }
        Err(e) => match e.named_property() {
            Some(p) => {
                eprintln!("property failed: {p}: {e}");
                1
            }
            None => {
                eprintln!("invalid config: {e}");
                2
            }
        },
    }
}

/// Config from file (or defaults) with the command-line overrides applied.
pub fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.command = args.command;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.display().to_string();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run one experiment and write its artifacts into `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let dir = PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
    let (checks, results) = match cfg.command {
        Command::Predict => predict(cfg, &dir)?,
        Command::Classify => classify(cfg, &dir)?,
        Command::Witnesses => witnesses(cfg, &dir)?,
        Command::Measure => measure(cfg, &dir)?,
        Command::Boxdim => boxdim(cfg, &dir)?,
        Command::TransferCheck => transfer_check(cfg, &dir)?,
        Command::MtpBuild => mtp_build(cfg, &dir)?,
        Command::MtpVerify => mtp_verify(cfg, &dir)?,
    };
    let report = RunReport {
        tool: "mtp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        config: cfg.to_toml(),
        wall_time_s: start.elapsed().as_secs_f64(),
        checks,
        results,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Invalid(e.to_string()))?;
    write_text(&dir, "report.json", &text)?;
    Ok(report)
}

type Outcome = (Vec<Check>, serde_json::Value);

fn check(property: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        property: property.into(),
        passed,
        detail: detail.into(),
    }
}

fn pair_for(cfg: &ExperimentConfig) -> Result<TransferPair> {
    let (n, m) = (cfg.scene.n, cfg.scene.m);
    TransferPair::derive(&cfg.f()?, m * (n - 1), n * m)
}

fn predict(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let psi = cfg.psi()?;
    let tail = psi
        .tail_power_law()
        .ok_or_else(|| Error::Invalid("predict needs a power-law tail in scene.psi".into()))?;
    let p = predict_dimension(cfg.scene.n, cfg.scene.m, tail.tau)?;
    let nm = (cfg.scene.n * cfg.scene.m) as f64;
    write_csv(
        dir,
        "predict",
        &["n", "m", "tau", "s0", "regime"],
        [[
            p.n.to_string(),
            p.m.to_string(),
            num(p.tau),
            num(p.s0),
            format!("{:?}", p.regime),
        ]],
    )?;
    let checks = vec![check(
        "dimension range",
        p.s0 > 0.0 && p.s0 <= nm,
        format!("s0 = {} in (0, {nm}]", p.s0),
    )];
    Ok((checks, serde_json::to_value(&p).unwrap()))
}

fn classify(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let psi = cfg.psi()?;
    let (n, m) = (cfg.scene.n, cfg.scene.m);
    let pair = pair_for(cfg)?;
    let leb = classify_series(&psi, n, m, None);
    let haus = classify_series(&psi, n, m, Some(&pair));
    write_csv(
        dir,
        "classify",
        &["form", "verdict", "evidence"],
        [
            ["lebesgue".to_string(), leb.verdict.to_string(), serde_json::to_string(&leb.evidence).unwrap()],
            ["hausdorff".to_string(), haus.verdict.to_string(), serde_json::to_string(&haus.evidence).unwrap()],
        ],
    )?;
    Ok((
        Vec::new(),
        json!({ "lebesgue": leb, "hausdorff": haus, "psi": psi.to_string(), "f": pair.f.to_string() }),
    ))
}

fn witnesses(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let sc = cfg.scene_config()?;
    let x = if cfg.estimator.x.is_empty() {
        let mut rng = block_rng(cfg.seed, 0);
        (0..sc.k()).map(|_| rng.gen::<f64>()).collect()
    } else {
        cfg.estimator.x.clone()
    };
    if x.len() != sc.k() {
        return Err(Error::Invalid(format!("estimator.x needs {} entries", sc.k())));
    }
    let ws = approx_witnesses(&x, &sc, cfg.truncation.q)?;
    let bad = ws.iter().filter(|w| !(w.error < sc.psi.value(&w.p, &w.q))).count();
    write_csv(
        dir,
        "witnesses",
        &["q", "p", "error"],
        ws.iter().map(|w| [ints(&w.q), ints(&w.p), num(w.error)]),
    )?;
    let checks = vec![check(
        "witness inequality",
        bad == 0,
        format!("{} witnesses, {bad} violate |qx + p Phi - y| < psi", ws.len()),
    )];
    Ok((checks, json!({ "x": x, "count": ws.len(), "witnesses": ws })))
}

fn measure(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let sc = cfg.scene_config()?;
    let t = &cfg.truncation;
    let est = mc_measure(&sc, t.q, t.g, cfg.estimator.samples, cfg.seed)?;
    write_csv(
        dir,
        "measure",
        &["q_max", "g_min", "samples", "hits", "fraction", "half_width", "seed"],
        [[
            est.q_max.to_string(),
            est.g_min.to_string(),
            est.samples.to_string(),
            est.hits.to_string(),
            num(est.fraction),
            num(est.half_width),
            est.seed.to_string(),
        ]],
    )?;
    let checks = vec![check(
        "fraction range",
        (0.0..=1.0).contains(&est.fraction),
        format!("fraction = {}", est.fraction),
    )];
    Ok((checks, serde_json::to_value(&est).unwrap()))
}

fn boxdim(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let sc = cfg.scene_config()?;
    let e = &cfg.estimator;
    let schedule: Vec<ScaleStep> = (e.t_lo..=e.t_hi)
        .map(|t| {
            let q = 1u64 << t;
            let delta = (q as f64).powf(-e.delta_exponent);
            if e.schedule == "shell" {
                ScaleStep::shell(q, delta)
            } else {
                ScaleStep::union(q, delta)
            }
        })
        .collect();
    let series = box_count(&sc, &schedule)?;
    write_csv(
        dir,
        "boxdim",
        &["q_lo", "q_hi", "delta", "count"],
        series.points.iter().map(|p| {
            [
                p.step.q_lo.to_string(),
                p.step.q_hi.to_string(),
                num(p.step.delta),
                p.count.to_string(),
            ]
        }),
    )?;
    let predicted = cfg
        .psi()?
        .tail_power_law()
        .and_then(|t| predict_dimension(cfg.scene.n, cfg.scene.m, t.tau).ok());
    Ok((
        Vec::new(),
        json!({ "series": series, "predicted": predicted }),
    ))
}

fn transfer_check(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let psi = cfg.psi()?;
    let (n, m) = (cfg.scene.n, cfg.scene.m);
    let pair = pair_for(cfg)?;
    let theta = theta_transform(&psi, &pair);
    let haus = classify_series(&psi, n, m, Some(&pair));
    let leb = classify_series(&theta, n, m, None);
    let q_max = cfg.truncation.q;
    write_csv(
        dir,
        "transfer",
        &["q", "psi", "theta"],
        (1..=q_max).map(|q| [q.to_string(), num(psi.eval(q)), num(theta.eval(q))]),
    )?;
    let mut checks = vec![check(
        "transfer identity",
        haus.verdict == leb.verdict || haus.verdict == Verdict::Inconclusive || leb.verdict == Verdict::Inconclusive,
        format!("H^f series {} vs Lebesgue series of theta {}", haus.verdict, leb.verdict),
    )];
    let f = &pair.f;
    if f.is_pure_power() && f.coeff == 1.0 && f.power == (n * m) as f64 {
        let worst = (1..=q_max)
            .map(|q| {
                let a = psi.eval(q).min(1.0);
                (theta.eval(q) - a).abs() / a.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        checks.push(check(
            "Lebesgue degeneration",
            worst <= 1e-12,
            format!("max relative |theta - psi| = {worst:.3e} for q <= {q_max}"),
        ));
    }
    Ok((
        checks,
        json!({ "theta": theta.to_string(), "hausdorff": haus, "lebesgue_of_theta": leb }),
    ))
}

fn engine_scene(cfg: &ExperimentConfig, pair: &TransferPair) -> Result<(MtpScene, Ball)> {
    let e = &cfg.engine;
    match cfg.synthetic_kind() {
        Some(kind) => {
            let scene = matched_scene(kind, e.radius, &e.levels, pair, e.fraction)?;
            let center = if e.center.is_empty() { vec![0.0; scene.k] } else { e.center.clone() };
            Ok((scene, Ball::new(center, e.radius)?))
        }
        None => {
            let sc = cfg.scene_config()?;
            let k = sc.k();
            let center = if e.center.is_empty() { vec![0.5; k] } else { e.center.clone() };
            let omega = Ball::new(center.clone(), 2.0 * e.radius)?;
            let scene = MtpScene::from_diophantine(&sc, pair, cfg.truncation.j_max, omega)?;
            Ok((scene, Ball::new(center, e.radius)?))
        }
    }
}

fn build_tree(cfg: &ExperimentConfig, eta: f64) -> Result<(CantorTree, MtpScene, TransferPair)> {
    let f = cfg.engine_f()?;
    let probe = match cfg.synthetic_kind() {
        Some(crate::engine::SyntheticKind::DyadicPoints) => (0, 1),
        Some(crate::engine::SyntheticKind::VerticalLines) => (1, 2),
        None => (cfg.scene.m * (cfg.scene.n - 1), cfg.scene.n * cfg.scene.m),
    };
    let pair = TransferPair::derive(&f, probe.0, probe.1)?;
    let (scene, b0) = engine_scene(cfg, &pair)?;
    let e = &cfg.engine;
    let cal = calibrate_packing(scene.l, scene.m, scene.norm, e.calibration_instances.max(1), cfg.seed)?;
    let mut ec = EngineConfig::new(eta, e.depth, cal.d1, cal.d2);
    ec.gen_window = e.gen_window;
    ec.max_sublevels = e.max_sublevels;
    let tree = build_cantor(&scene, &f, &ec, &b0)?;
    Ok((tree, scene, pair))
}

fn mtp_build(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let (tree, scene, pair) = build_tree(cfg, cfg.engine.eta)?;
    let b0 = tree.root().ball.clone();
    let thresholds: Vec<u64> = scene.planes.iter().map(|p| p.generation).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let cells = if scene.k == 1 { 1usize << cfg.engine.g_res } else { 1usize << cfg.engine.g_res.min(10) };
    let cov = check_full_measure(&scene, &b0, &pair, cells, &thresholds)?;
    write_text(dir, "tree.json", &tree.to_json()?)?;
    write_nodes(dir, &tree)?;
    write_csv(
        dir,
        "sublevels",
        &["parent", "index", "g", "hosts", "kgb", "balls", "min_radius", "max_radius", "coverage", "min_ratio", "max_ratio"],
        tree.sublevels.iter().map(|s| {
            [
                s.parent.to_string(),
                s.index.to_string(),
                s.g.to_string(),
                s.hosts.to_string(),
                s.kgb.to_string(),
                s.balls.to_string(),
                num(s.min_radius),
                num(s.max_radius),
                num(s.coverage),
                num(s.min_ratio),
                num(s.max_ratio),
            ]
        }),
    )?;
    write_csv(
        dir,
        "coverage",
        &["g", "fraction"],
        cov.per_g.iter().map(|(g, f)| [g.to_string(), num(*f)]),
    )?;
    let defects = tree.level_defects();
    let worst = defects.iter().copied().fold(0.0, f64::max);
    let mut checks: Vec<Check> = ["P0", "P1", "P2", "P3", "P4", "P5"]
        .iter()
        .map(|p| check(p, true, "asserted during construction"))
        .collect();
    checks.push(check(
        "mu additivity",
        worst <= 1e-9,
        format!("max |level sum - 1| = {worst:.3e}"),
    ));
    Ok((
        checks,
        json!({
            "hash": tree.hash(),
            "levels": tree.levels.iter().map(|l| l.len()).collect::<Vec<_>>(),
            "l_b": tree.l_b,
            "constants": tree.constants,
            "coverage": cov,
        }),
    ))
}

fn write_nodes(dir: &Path, tree: &CantorTree) -> Result<()> {
    write_csv(
        dir,
        "nodes",
        &["id", "level", "sublevel", "parent", "center", "radius", "weight", "plane"],
        tree.nodes.iter().map(|n| {
            [
                n.id.to_string(),
                n.level.to_string(),
                n.sublevel.to_string(),
                n.parent.map_or(String::new(), |p| p.to_string()),
                floats(&n.ball.center),
                num(n.ball.radius),
                num(n.weight),
                n.source.as_ref().map_or(String::new(), |s| s.j.to_string()),
            ]
        }),
    )?;
    Ok(())
}

fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn mtp_verify(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let e = &cfg.engine;
    let f = cfg.engine_f()?;
    let (tree, rebuild) = if e.tree.is_empty() {
        (build_tree(cfg, e.eta)?.0, true)
    } else {
        let text = std::fs::read_to_string(&e.tree).map_err(|err| Error::Invalid(format!("{}: {err}", e.tree)))?;
        (CantorTree::from_json(&text)?, false)
    };
    let eta = tree.constants.eta;
    let reports: Vec<_> = (0..3)
        .map(|i| verify_cantor_measure_bound(&tree, &f, eta, e.samples, cfg.seed + i))
        .collect::<Result<_>>()?;
    let base = &reports[0];
    write_csv(
        dir,
        "ratios",
        &["kind", "id", "level", "radius", "mass", "ratio"],
        base.nodes
            .iter()
            .map(|n| {
                [
                    "node".to_string(),
                    n.id.to_string(),
                    n.level.to_string(),
                    num(tree.nodes[n.id].ball.radius),
                    num(tree.nodes[n.id].weight),
                    num(n.ratio),
                ]
            })
            .chain(base.samples.iter().enumerate().map(|(i, s)| {
                ["sample".to_string(), i.to_string(), String::new(), num(s.radius), num(s.mass), num(s.ratio)]
            })),
    )?;
    let mut checks = vec![check(
        "finite ratios",
        reports.iter().all(|r| r.finite),
        format!(
            "node max {:.4e}, sample max {:.4e}",
            base.node_max_ratio, base.sample_max_ratio
        ),
    )];
    let smax: Vec<f64> = reports.iter().map(|r| r.sample_max_ratio).collect();
    let seed_ok = smax.iter().all(|v| within(*v, smax[0], 0.2));
    checks.push(check("seed stability", seed_ok, format!("sample maxima {smax:?}")));
    let eta_detail;
    let eta_ok;
    if rebuild {
        match build_tree(cfg, 2.0 * e.eta) {
            Ok((t2, ..)) => {
                let r2 = verify_cantor_measure_bound(&t2, &f, 2.0 * e.eta, e.samples, cfg.seed)?;
                eta_ok = within(r2.node_max_ratio, base.node_max_ratio, 0.2)
                    && within(r2.sample_max_ratio, base.sample_max_ratio, 0.2);
                eta_detail = format!(
                    "node max {:.4e} -> {:.4e}, sample max {:.4e} -> {:.4e}",
                    base.node_max_ratio, r2.node_max_ratio, base.sample_max_ratio, r2.sample_max_ratio
                );
            }
            Err(err) => {
                eta_ok = false;
                eta_detail = format!("rebuild at eta = {}: {err}", 2.0 * e.eta);
            }
        }
    } else {
        eta_ok = true;
        eta_detail = "skipped: tree loaded from file".into();
    }
    checks.push(check("eta stability", eta_ok, eta_detail));
    // closed-form mass distribution check on [0, 1] with f(r) = 2r
    let lin = crate::dimfun::DimensionFunction::power_law(1.0)?;
    let mut rng = block_rng(cfg.seed, 1);
    let balls: Vec<Ball> = (0..e.samples)
        .map(|_| Ball {
            center: vec![rng.gen::<f64>()],
            radius: (rng.gen::<f64>() * 0.5).max(1e-6),
        })
        .collect();
    let mdp = verify_mdp_bound(&UniformInterval, &lin, e.mdp_c, 0.5, &balls)?;
    checks.push(check(
        "mass distribution (uniform)",
        mdp.passes,
        format!("max mu(B)/r(B) = {:.4} <= {}", mdp.max_ratio, mdp.c),
    ));
    Ok((
        checks,
        json!({
            "hash": tree.hash(),
            "reports": reports.iter().map(|r| json!({
                "seed": r.seed, "eta": r.eta, "r0": r.r0,
                "node_max_ratio": r.node_max_ratio, "sample_max_ratio": r.sample_max_ratio,
                "sample_quantiles": r.sample_quantiles, "hits": r.hits,
            })).collect::<Vec<_>>(),
            "mdp": mdp,
        }),
    ))
}
