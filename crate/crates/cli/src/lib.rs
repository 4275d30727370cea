//! Batch front-end for the anisoag library.

pub mod config;

use anisoag::costs::{cost_report, cent_lp, scan_pairs, pair_grid, verify_bounds, write_scan_csv, BoundsOptions};
use anisoag::entropy::{heaviside_entropy, jump_functional};
use anisoag::field::{build_field, minimize, resample_periodic, vortex_decay_study, FieldSpec, GridSpec, JumpSpec, MinimizeOptions};
use anisoag::profile::{profile_energy, solve_profile};
use anisoag::{costs::c1d, BoundaryParam, EntropyFn, JumpPair, NormSpec, Vec2};
use clap::{Parser, Subcommand};
use config::{resolve, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(name = "anisoag", version, about = "Jump costs, profiles and field experiments for anisotropic norms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: ExperimentConfig,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Rescale factor, perimeter, inradius, power type and invariants.
    NormInfo,
    /// Samples of γ, γ', α, α' on a uniform θ grid.
    GammaTable,
    /// c1d, cent and Π for one jump.
    Cost,
    /// Costs over a grid of θ pairs.
    CostScan,
    /// Bounds check: cent ≤ Π, ratio range and small-jump limits.
    VerifyBounds,
    /// One-dimensional optimal profile.
    Profile,
    /// Minimize the ε-energy with Dirichlet data.
    Minimize,
    /// Energy decay of the exact vortex as ε → 0.
    VortexStudy,
    /// Heaviside entropy convergence and LP entropy for one jump.
    EntropyCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::NormInfo => "norm-info",
            Command::GammaTable => "gamma-table",
            Command::Cost => "cost",
            Command::CostScan => "cost-scan",
            Command::VerifyBounds => "verify-bounds",
            Command::Profile => "profile",
            Command::Minimize => "minimize",
            Command::VortexStudy => "vortex-study",
            Command::EntropyCheck => "entropy-check",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<anisoag::Error> for CliError {
    fn from(e: anisoag::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

fn need<T: Clone>(v: &Option<T>, key: &str) -> Res<T> {
    v.clone().ok_or_else(|| CliError::Input(format!("missing parameter {key}")))
}

/// Writes artifacts into the output directory, each CSV starting with a
/// comment header carrying the command, config hash and κ.
struct Sink {
    dir: Option<PathBuf>,
    header: String,
    written: Vec<String>,
}

impl Sink {
    fn new(dir: Option<PathBuf>, command: &str, hash: &str, kappa: f64) -> Res<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", d.display())))?;
        }
        Ok(Sink {
            dir,
            header: format!("# anisoag {command}\n# config_hash: {hash}\n# kappa: {kappa}\n"),
            written: Vec::new(),
        })
    }

    fn csv(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Res<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        let io = |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        w.write_all(self.header.as_bytes()).map_err(io)?;
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Res<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(v).expect("json") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.display().to_string());
        Ok(())
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Parses argv and runs the command, returning the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            0
        }
        Err(e) => {
            eprintln!("anisoag: {e}");
            e.exit_code()
        }
    }
}

/// Merges the config file with the flags and fills in defaults.
pub fn resolved_config(cli: &Cli) -> Res<ExperimentConfig> {
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(CliError::Input)?,
        None => ExperimentConfig::default(),
    };
    c.overlay(&cli.params);
    Ok(resolve(cli.command.name(), c))
}

pub fn execute(cli: &Cli) -> Res<Value> {
    let cmd = cli.command;
    let cfg = resolved_config(cli)?;
    if let Some(j) = cfg.jobs {
        if j == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        // ignore failure: the pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let norm: NormSpec = need(&cfg.norm, "norm")?.parse()?;
    let bp = Arc::new(BoundaryParam::trace(&norm, need(&cfg.resolution, "resolution")?)?);
    let kappa = bp.kappa();
    let hash = cfg.hash();
    eprintln!("anisoag {}: kappa = {kappa}", cmd.name());
    eprintln!("config: {}", cfg.to_json());
    let mut sink = Sink::new(cfg.out.clone(), cmd.name(), &hash, kappa)?;
    let result = match cmd {
        Command::NormInfo => norm_info(&bp, &mut sink)?,
        Command::GammaTable => gamma_table(&bp, &cfg, &mut sink)?,
        Command::Cost => cost(&bp, &cfg)?,
        Command::CostScan => cost_scan(&bp, &cfg, &mut sink)?,
        Command::VerifyBounds => bounds(&bp, &cfg, &mut sink)?,
        Command::Profile => profile(&bp, &cfg, &mut sink)?,
        Command::Minimize => run_minimize(&bp, &cfg, &mut sink)?,
        Command::VortexStudy => vortex_study(&bp, &cfg, &mut sink)?,
        Command::EntropyCheck => entropy_check(&bp, &cfg, &mut sink)?,
    };
    // the artifact carries only the hashed settings so that it does not
    // depend on where it was written or how many threads ran
    let mut out = json!({
        "command": cmd.name(),
        "kappa": kappa,
        "config_hash": hash,
        "config": to_value(&cfg.hashed()),
        "result": result,
    });
    sink.json(&format!("{}.json", cmd.name()), &out)?;
    out["config"] = to_value(&cfg);
    out["artifacts"] = to_value(&sink.written);
    Ok(out)
}

fn norm_info(bp: &BoundaryParam, sink: &mut Sink) -> Res<Value> {
    let inv = bp.check_invariants();
    let pt = bp.power_type_estimate(256.min(bp.resolution())).ok();
    sink.csv("boundary.csv", |w| bp.write_csv(w))?;
    Ok(json!({
        "norm": bp.norm().label(),
        "kappa": bp.kappa(),
        "input_perimeter": bp.input_perimeter(),
        "perimeter": TAU,
        "inradius": bp.inradius(),
        "flat_intervals": bp.flat_intervals(),
        "flat_warning": bp.flat_warning(),
        "power_type": pt.map(|p| json!({"exponent": p.exponent, "constant": p.constant})),
        "invariants": to_value(&inv),
        "invariants_pass": inv.passes(),
    }))
}

fn gamma_table(bp: &BoundaryParam, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let n = need(&cfg.samples, "samples")?;
    if n == 0 {
        return Err(CliError::Input("samples must be positive".into()));
    }
    let rows: Vec<[f64; 7]> = (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            let q = bp.query(t);
            [t, q.gamma.x, q.gamma.y, q.gamma_prime.x, q.gamma_prime.y, q.alpha, q.alpha_prime]
        })
        .collect();
    sink.csv("gamma_table.csv", |w| {
        writeln!(w, "theta,gx,gy,gpx,gpy,alpha,alpha_prime")?;
        for r in &rows {
            writeln!(w, "{},{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5], r[6])?;
        }
        Ok(())
    })?;
    let mut v = json!({ "rows": n });
    if sink.dir.is_none() {
        v["table"] = to_value(&rows);
    }
    Ok(v)
}

fn jump_of(bp: &BoundaryParam, cfg: &ExperimentConfig) -> Res<JumpPair> {
    Ok(JumpPair::from_thetas(bp, need(&cfg.theta_plus, "theta_plus")?, need(&cfg.theta_minus, "theta_minus")?)?)
}

fn cost(bp: &BoundaryParam, cfg: &ExperimentConfig) -> Res<Value> {
    let jp = jump_of(bp, cfg)?;
    let r = cost_report(bp, &jp, cfg.lp_resolution)?;
    let input = r.to_input_units(bp.kappa());
    Ok(json!({
        "c1d": r.c1d,
        "cent": r.cent(),
        "pi": r.pi,
        "ratio_c1d_cent": r.ratio_c1d_cent,
        "ratio_cent_pi": r.ratio_cent_pi,
        "normalized": to_value(&r),
        "input_units": to_value(&input),
    }))
}

fn bounds_options(cfg: &ExperimentConfig) -> Res<BoundsOptions> {
    Ok(BoundsOptions {
        grid: need(&cfg.grid, "grid")?,
        min_width: need(&cfg.min_width, "min_width")?,
        lp_resolution: need(&cfg.lp_resolution, "lp_resolution")?,
        ..BoundsOptions::default()
    })
}

fn cost_scan(bp: &BoundaryParam, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let o = bounds_options(cfg)?;
    if o.grid < 2 || !(o.min_width > 0.0 && o.min_width < PI) {
        return Err(CliError::Input("grid must be at least 2 and min_width in (0, pi)".into()));
    }
    let rows = scan_pairs(bp, &pair_grid(o.grid, o.min_width), o.lp_resolution)?;
    sink.csv("cost_scan.csv", |w| write_scan_csv(w, &rows))?;
    let ratios = rows.iter().map(|r| r.ratio);
    Ok(json!({
        "pairs": rows.len(),
        "lp_pairs": rows.iter().filter(|r| r.lp).count(),
        "sup_ratio": ratios.clone().fold(f64::NEG_INFINITY, f64::max),
        "inf_ratio": ratios.fold(f64::INFINITY, f64::min),
        "max_cent_minus_pi": rows.iter().map(|r| r.cent - r.pi).fold(f64::NEG_INFINITY, f64::max),
    }))
}

fn bounds(bp: &BoundaryParam, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let (report, rows) = verify_bounds(bp, &bounds_options(cfg)?)?;
    sink.csv("verify_bounds.csv", |w| write_scan_csv(w, &rows))?;
    sink.csv("small_jump.csv", |w| {
        writeln!(w, "theta,limit,candidate_4,candidate_2,rel_err_4,rel_err_2")?;
        for s in &report.small_jump {
            writeln!(w, "{},{},{},{},{},{}", s.theta, s.limit, s.candidate_4, s.candidate_2, s.rel_err_4, s.rel_err_2)?;
        }
        Ok(())
    })?;
    Ok(to_value(&report))
}

fn profile(bp: &BoundaryParam, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let jp = jump_of(bp, cfg)?;
    let p = solve_profile(bp, &jp, need(&cfg.tol, "tol")?)?;
    let e = profile_energy(&p);
    let c = c1d(bp, &jp)?;
    sink.csv("profile.csv", |w| p.write_csv(bp, w))?;
    Ok(json!({
        "energy": e,
        "c1d": c,
        "rel_diff": (e - c) / c,
        "lower": p.lower,
        "upper": p.upper,
        "half_length": p.half_length(),
        "samples": p.x.len(),
        "converged": p.converged,
        "end_errors": p.end_errors,
        "equipartition_defect": p.equipartition_defect(bp),
        "tails": to_value(&p.tails),
    }))
}

fn run_minimize(bp: &Arc<BoundaryParam>, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let cells = need(&cfg.cells, "cells")?;
    let grid = GridSpec::square(1.0, cells, need(&cfg.eps, "eps")?);
    grid.validate()?;
    let centre = Vec2::new(0.5, 0.5);
    let spec = match need(&cfg.field, "field")?.as_str() {
        "vortex" => FieldSpec::Vortex { center: centre, sign: 1.0, core: 0.0 },
        "constant" => FieldSpec::Constant(bp.gamma(need(&cfg.theta_plus, "theta_plus")?)),
        "jump" => {
            let jp = jump_of(bp, cfg)?;
            FieldSpec::Jump(JumpSpec {
                z_plus: jp.z_plus,
                z_minus: jp.z_minus,
                point: centre,
                normal: None,
                profile: true,
            })
        }
        other => return Err(CliError::Input(format!("unknown field kind {other:?} (vortex, jump, constant)"))),
    };
    let f = build_field(bp.clone(), grid, &spec)?;
    let opts = MinimizeOptions {
        max_iter: need(&cfg.max_iter, "max_iter")?,
        rel_tol: need(&cfg.rel_tol, "rel_tol")?,
        ..MinimizeOptions::default()
    };
    let (g, report) = minimize(&f, &opts)?;
    let parts = g.energy_parts()?;
    sink.csv("minimize_history.csv", |w| {
        writeln!(w, "iteration,energy")?;
        for (k, e) in report.history.iter().enumerate() {
            writeln!(w, "{k},{e}")?;
        }
        Ok(())
    })?;
    sink.csv("minimize_cells.csv", |w| g.write_cells_csv(w))?;
    Ok(json!({
        "iterations": report.iterations,
        "reason": report.reason,
        "initial_energy": report.initial_energy,
        "final_energy": report.final_energy,
        "gradient_part": parts.gradient,
        "potential_part": parts.potential,
        "h": grid.h,
    }))
}

fn vortex_study(bp: &Arc<BoundaryParam>, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let st = vortex_decay_study(bp.clone(), &need(&cfg.eps_list, "eps_list")?, need(&cfg.h_ratio, "h_ratio")?)?;
    sink.csv("vortex_study.csv", |w| {
        writeln!(w, "eps,h,cells,energy,gradient_part,potential_part")?;
        for r in &st.rows {
            writeln!(w, "{},{},{},{},{},{}", r.eps, r.h, r.cells, r.energy, r.gradient_part, r.potential_part)?;
        }
        Ok(())
    })?;
    Ok(to_value(&st))
}

fn entropy_check(bp: &BoundaryParam, cfg: &ExperimentConfig, sink: &mut Sink) -> Res<Value> {
    let jp = jump_of(bp, cfg)?;
    let deltas = need(&cfg.delta_list, "delta_list")?;
    let count = need(&cfg.samples, "samples")?;
    let xi = bp.gamma(need(&cfg.theta_plus, "theta_plus")?);
    let theta0 = heaviside_entropy(bp, xi, deltas.first().copied().unwrap_or(0.1))?.theta0;
    let mut rng = ChaCha8Rng::seed_from_u64(need(&cfg.seed, "seed")?);
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let t: f64 = rng.gen_range(0.0..TAU);
        let d = (t - theta0).rem_euclid(PI);
        if d > 0.25 && d < PI - 0.25 {
            pts.push(t);
        }
    }
    let mut rows = Vec::new();
    for &delta in &deltas {
        let he = heaviside_entropy(bp, xi, delta)?;
        let r = he.entropy.phi_eval(theta0 + 1.5 * PI)?;
        let mut err = 0.0f64;
        for &t in &pts {
            err = err.max((he.entropy.phi_eval(t)? - r - he.indicator(bp, t)).norm());
        }
        rows.push((delta, err, he.mu_l1));
    }
    let lp = cent_lp(bp, &jp, need(&cfg.lp_resolution, "lp_resolution")?)?;
    let e = EntropyFn::project_to_admissible(bp, resample_periodic(&lp.lambda, bp.resolution()))?;
    let c_lambda = jump_functional(&e, jp.theta_plus, jp.theta_minus, jp.nu);
    sink.csv("entropy_check.csv", |w| {
        writeln!(w, "delta,max_error,mu_l1")?;
        for (d, e, m) in &rows {
            writeln!(w, "{d},{e},{m}")?;
        }
        Ok(())
    })?;
    Ok(json!({
        "theta0": theta0,
        "heaviside": rows.iter().map(|(d, e, m)| json!({"delta": d, "max_error": e, "mu_l1": m})).collect::<Vec<_>>(),
        "error_decreasing": rows.windows(2).all(|w| w[1].1 < w[0].1),
        "mu_l1_decreasing": rows.windows(2).all(|w| w[1].2 < w[0].2),
        "lp_cent": lp.value,
        "lp_entropy_jump_cost": c_lambda,
        "lp_entropy_admissible": e.is_admissible(),
    }))
}
