//! `fbshift`: command-line front end.
//!
//! Exit codes: 0 success, 1 domain or precondition error, 2 numerics error,
//! 3 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fbshift::classifier::{self, References};
use fbshift::config::RunConfig;
use fbshift::criticality::{self, SearchSetup};
use fbshift::elliptic;
use fbshift::experiments::{self, ManifestOutcome, RefValues, RunManifest, SweepSpec};
use fbshift::fbsolver;
use fbshift::output;
use fbshift::semiwave;
use fbshift::Error;

#[derive(Parser, Debug)]
#[command(
    name = "fbshift",
    version,
    about = "Free-boundary logistic spreading in a shifting environment",
    after_help = "Exit codes: 0 ok, 1 domain/precondition error, 2 numerics error, 3 usage error."
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file (flat object of scalars).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for data files.
    #[arg(long, global = true, value_name = "DIR", default_value = "fbshift-out")]
    out: PathBuf,
    /// Simulation horizon (same as --set t_max=T).
    #[arg(long, global = true, value_name = "T")]
    horizon: Option<f64>,
    /// Bisection tolerance (same as --set tol=X).
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Suppress notices on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Spreading speed c0 and the semi-wave profile at c0.
    Semiwave,
    /// Stationary profile on (-l, L(l)) with the front balance.
    Profile,
    /// Borderline pair (L*, V*).
    Lstar,
    /// Run the free boundary problem.
    Simulate,
    /// Run and classify the long-time behaviour.
    Classify,
    /// Bisect for the critical amplitude sigma_0.
    SigmaCrit,
    /// Batch over the sweep_c / sweep_mu / sweep_sigma axes.
    Sweep,
    /// Cross-check the reference quantities.
    Verify,
}

const MODEL_KEYS: &[&str] = &["d", "a", "a0", "b", "l0", "c", "mu", "h0", "interpolation", "homogeneous_override"];
const RUN_KEYS: &[&str] = &[
    "n_nodes",
    "dt0",
    "dt_min",
    "dt_max",
    "output_interval",
    "snapshot_times",
    "t_max",
    "template",
    "grid_spacing",
];
const POLICY_KEYS: &[&str] = &[
    "eps_u",
    "eps_h",
    "speed_band",
    "margin",
    "window_fraction",
    "min_horizon",
    "max_doublings",
];
const SEARCH_KEYS: &[&str] = &["sigma_a", "sigma_b", "tol", "tol_kind"];

fn relevant(cmd: Command, key: &str) -> bool {
    let is = |set: &[&str]| set.contains(&key);
    match cmd {
        Command::Semiwave => is(&["d", "a", "b", "mu"]),
        Command::Profile => is(MODEL_KEYS) || is(&["grid_spacing", "l"]),
        Command::Lstar => is(MODEL_KEYS) || is(&["grid_spacing"]),
        Command::Simulate => is(MODEL_KEYS) || is(RUN_KEYS) || key == "sigma",
        Command::Classify => is(MODEL_KEYS) || is(RUN_KEYS) || is(POLICY_KEYS) || key == "sigma",
        Command::SigmaCrit => is(MODEL_KEYS) || is(RUN_KEYS) || is(POLICY_KEYS) || is(SEARCH_KEYS),
        Command::Sweep => {
            is(MODEL_KEYS)
                || is(RUN_KEYS)
                || is(POLICY_KEYS)
                || is(SEARCH_KEYS)
                || is(&["sweep_c", "sweep_mu", "sweep_sigma", "threads"])
        }
        Command::Verify => is(MODEL_KEYS) || is(&["grid_spacing", "l_check"]),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerics(_) | Error::StepRejected { .. } => 2,
        _ => 1,
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn write(&self, name: &str, contents: &str) -> fbshift::Result<PathBuf> {
        let path = self.out.join(name);
        output::write(&path, contents)?;
        self.note(&format!("wrote {}", path.display()));
        Ok(path)
    }
}

fn refs_for(env: &fbshift::EnvironmentProfile, cfg: &elliptic::EllipticConfig) -> fbshift::Result<(References, RefValues)> {
    let refs = References::compute(env, cfg)?;
    let l_of_zero = elliptic::l_of_zero(env, cfg).ok().map(|r| r.0);
    Ok((
        refs,
        RefValues {
            c0: Some(refs.c0),
            l_star: refs.l_star,
            l_of_zero,
        },
    ))
}

fn cmd_semiwave(ctx: &Ctx) -> fbshift::Result<()> {
    let p = ctx.cfg.params();
    p.validate()?;
    let c0 = semiwave::compute_c0(&p)?;
    let wave = semiwave::solve_semiwave_profile(&p, c0)?;
    println!("c0 = {c0}");
    println!("slope0 = {}", wave.slope0);
    println!("kpp_limit = {}", wave.kpp_limit);
    ctx.write("semiwave.csv", &output::pairs_csv(("xi", "q"), &wave.profile))?;
    Ok(())
}

fn cmd_profile(ctx: &Ctx) -> fbshift::Result<()> {
    let env = ctx.cfg.environment()?;
    let ecfg = ctx.cfg.elliptic(&env);
    let (big_l, prof) = elliptic::find_l_of_l(&env, ctx.cfg.l, &ecfg)?;
    println!("l = {}", ctx.cfg.l);
    println!("L = {big_l}");
    println!("slope_right = {}", prof.slope_right);
    println!("max_V = {}", prof.max_value());
    ctx.write("profile.csv", &output::pairs_csv(("x", "V"), &prof.values))?;
    Ok(())
}

fn cmd_lstar(ctx: &Ctx) -> fbshift::Result<()> {
    let env = ctx.cfg.environment()?;
    let ecfg = ctx.cfg.elliptic(&env);
    let pair = elliptic::compute_l_star(&env, &ecfg)?;
    println!("L_star = {}", pair.l_star);
    println!("x_min = {}", pair.x_min);
    println!("slope_right = {}", pair.slope_right);
    ctx.write("vstar.csv", &output::pairs_csv(("x", "V"), &pair.v_star))?;
    Ok(())
}

fn cmd_simulate(ctx: &Ctx) -> fbshift::Result<()> {
    let env = ctx.cfg.environment()?;
    let controls = ctx.cfg.controls()?;
    let template = ctx.cfg.template(&env)?;
    let u0 = fbsolver::make_initial(&env.params, template, ctx.cfg.sigma)?;
    let traj = fbsolver::simulate(&env, &u0, ctx.cfg.t_max, &controls)?;
    let last = traj.last();
    println!("t = {}", last.t);
    println!("h = {}", last.h);
    println!("hdot = {}", last.hdot);
    println!("max_u = {}", last.max_u);
    println!("gap = {}", last.gap);
    ctx.write("series.csv", &output::series_csv(&traj.series))?;
    for s in &traj.snapshots {
        ctx.write(&format!("snapshot-t{}.csv", s.t), &output::snapshot_csv(s))?;
    }
    let terminal = fbsolver::Snapshot {
        t: traj.final_state.t,
        h: traj.final_state.h,
        points: traj.final_state.physical(),
    };
    ctx.write("profile.csv", &output::snapshot_csv(&terminal))?;
    Ok(())
}

fn base_manifest(ctx: &Ctx, env: &fbshift::EnvironmentProfile, refs: RefValues) -> fbshift::Result<RunManifest> {
    Ok(RunManifest {
        tool_version: experiments::TOOL_VERSION.into(),
        index: 0,
        params: env.params,
        interpolation: env.interpolation,
        homogeneous_override: env.homogeneous_override,
        template: ctx.cfg.template.clone(),
        controls: ctx.cfg.controls()?,
        policy: ctx.cfg.policy(),
        horizon: ctx.cfg.t_max,
        sigma: None,
        refs,
        outcome: ManifestOutcome::Failed { error: String::new() },
        artifacts: Vec::new(),
        wall_time_s: 0.0,
    })
}

fn cmd_classify(ctx: &Ctx) -> fbshift::Result<()> {
    let start = std::time::Instant::now();
    let env = ctx.cfg.environment()?;
    let controls = ctx.cfg.controls()?;
    let ecfg = ctx.cfg.elliptic(&env);
    let (refs, values) = refs_for(&env, &ecfg)?;
    let template = ctx.cfg.template(&env)?;
    let u0 = fbsolver::make_initial(&env.params, template, ctx.cfg.sigma)?;
    let (class, traj) =
        classifier::run_and_classify(&env, &u0, ctx.cfg.t_max, &controls, &refs, &ctx.cfg.policy())?;
    let d = &class.diagnostics;
    println!("outcome = {}", class.outcome);
    println!("t_end = {}", d.t_end);
    println!("front_speed = {}", d.front_speed);
    println!("gap_end = {}", d.gap_end);
    println!("max_u_end = {}", d.max_u_end);
    println!("c0 = {}", refs.c0);
    if let Some(ls) = refs.l_star {
        println!("L_star = {ls}");
    }
    ctx.write("series.csv", &output::series_csv(&traj.series))?;
    let mut m = base_manifest(ctx, &env, values)?;
    m.sigma = Some(ctx.cfg.sigma);
    m.outcome = ManifestOutcome::Classification(class);
    m.artifacts = vec!["series.csv".into()];
    m.wall_time_s = start.elapsed().as_secs_f64();
    ctx.write("manifest.json", &m.to_json()?)?;
    Ok(())
}

fn cmd_sigma_crit(ctx: &Ctx) -> fbshift::Result<()> {
    let start = std::time::Instant::now();
    let env = ctx.cfg.environment()?;
    let controls = ctx.cfg.controls()?;
    let ecfg = ctx.cfg.elliptic(&env);
    let tol = ctx.cfg.tolerance()?;
    let (refs, values) = refs_for(&env, &ecfg)?;
    let template = ctx.cfg.template(&env)?;
    let policy = ctx.cfg.policy();
    let setup = SearchSetup {
        env: &env,
        template: &template,
        horizon: ctx.cfg.t_max,
        controls: &controls,
        refs: &refs,
        policy: &policy,
    };
    let mut m = base_manifest(ctx, &env, values)?;
    match criticality::find_sigma_crit(&setup, (ctx.cfg.sigma_a, ctx.cfg.sigma_b), tol) {
        Ok(res) => {
            println!("sigma_low = {}", res.sigma_low);
            println!("sigma_high = {}", res.sigma_high);
            println!("sigma_0 = {}", res.sigma_estimate);
            println!("width = {}", res.width);
            ctx.write("transcript.csv", &output::transcript_csv(&res.transcript))?;
            m.artifacts = vec!["transcript.csv".into()];
            m.outcome = ManifestOutcome::SigmaSearch(res);
        }
        Err(Error::SigmaInfinite { sigma_cap }) => {
            println!("sigma_0 = inf");
            println!("verdict = SigmaInfinite (no spreading up to sigma = {sigma_cap}; c = {}, c0 = {})", env.params.c, refs.c0);
            m.outcome = ManifestOutcome::SigmaInfinite { sigma_cap };
        }
        Err(e) => return Err(e),
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    ctx.write("manifest.json", &m.to_json()?)?;
    Ok(())
}

fn cmd_sweep(ctx: &Ctx) -> fbshift::Result<()> {
    let env = ctx.cfg.environment()?;
    let (cs, mus, sigmas) = ctx.cfg.sweep_axes()?;
    let points = experiments::build_grid(&env.params, &cs, &mus, &sigmas);
    let spec = SweepSpec {
        interpolation: env.interpolation,
        homogeneous_override: env.homogeneous_override,
        template: ctx.cfg.template.clone(),
        horizon: ctx.cfg.t_max,
        controls: ctx.cfg.controls()?,
        policy: ctx.cfg.policy(),
        bracket: (ctx.cfg.sigma_a, ctx.cfg.sigma_b),
        tol: ctx.cfg.tolerance()?,
        grid_spacing: (ctx.cfg.grid_spacing > 0.0).then_some(ctx.cfg.grid_spacing),
        threads: ctx.cfg.threads,
    };
    let manifests = experiments::sweep(&points, &spec, &ctx.out)?;
    print!("{}", experiments::aggregate_csv(&manifests));
    ctx.note(&format!("wrote {} manifests and aggregate.csv to {}", manifests.len(), ctx.out.display()));
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> fbshift::Result<bool> {
    let env = ctx.cfg.environment()?;
    let ecfg = ctx.cfg.elliptic(&env);
    let report = experiments::verify_refs(&env, &ecfg, ctx.cfg.l_check);
    print!("{}", report.render());
    ctx.write("verify.json", &serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    Ok(report.all_passed())
}

fn run(cli: Cli) -> fbshift::Result<u8> {
    let mut overrides = cli.common.set.clone();
    if let Some(t) = cli.common.horizon {
        overrides.push(format!("t_max={t}"));
    }
    if let Some(x) = cli.common.tol {
        overrides.push(format!("tol={x}"));
    }
    let (cfg, present) = RunConfig::load(cli.common.config.as_deref(), &overrides)?;
    let ctx = Ctx {
        cfg,
        out: cli.common.out.clone(),
        quiet: cli.common.quiet,
    };
    for key in present.iter().filter(|k| !relevant(cli.command, k)) {
        ctx.note(&format!("note: config key '{key}' is ignored by this subcommand"));
    }
    match cli.command {
        Command::Semiwave => cmd_semiwave(&ctx)?,
        Command::Profile => cmd_profile(&ctx)?,
        Command::Lstar => cmd_lstar(&ctx)?,
        Command::Simulate => cmd_simulate(&ctx)?,
        Command::Classify => cmd_classify(&ctx)?,
        Command::SigmaCrit => cmd_sigma_crit(&ctx)?,
        Command::Sweep => cmd_sweep(&ctx)?,
        Command::Verify => {
            if !cmd_verify(&ctx)? {
                eprintln!("error: at least one reference check failed");
                return Ok(2);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
