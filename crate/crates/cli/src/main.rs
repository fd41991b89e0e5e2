use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frontlab::barriers::{verify_case, BarrierCase};
use frontlab::fronts::{fit_log_delay, fit_speed_with_log, trace_level, Side};
use frontlab::harness::{self, ExperimentConfig, PlotKind, PlotOptions, SweepConfig};
use frontlab::phase::{self, classify, conditional_branch, predict, Agreement, Thresholds};
use frontlab::reactions::{Reaction, ReactionClass};
use frontlab::stationary::solve_blocking_profile;
use frontlab::waves::{bistable_front, kpp_front, kpp_min_speed};
use frontlab::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "front-lab",
    version,
    about = "Fronts, blocking and extinction in KPP-to-bistable media with advection"
)]
struct Cli {
    /// Directory for outputs; relative `--out` paths are resolved against it.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for parallel commands.
    #[arg(long, global = true, default_value_t = 4)]
    jobs: usize,
    /// Suppress summaries on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Traveling front of one reaction: columns s, phi, residual.
    Wave {
        /// `kpp:r=0.7`, `cubic_bistable:k=1,theta=0.3`, `modified:k=1,theta=0.3,eps=0.05`.
        #[arg(long)]
        reaction: String,
        /// Front speed for a KPP reaction (default: the minimal speed).
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs an experiment config into `--out-dir`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Level-set trace of a run directory: columns t, position.
    Fronts {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        level: f64,
        #[arg(long, default_value = "right")]
        side: Side,
        #[arg(long)]
        out: PathBuf,
        /// Append a fit record: `speed` or `logdelay`.
        #[arg(long)]
        fit: Option<String>,
        /// Fit window `t1,t2` (default: last half of the run).
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// `ln t` coefficient removed before a speed fit.
        #[arg(long, default_value_t = 0.0)]
        log_term: f64,
        /// Frozen linear coefficient for a log-delay fit.
        #[arg(long)]
        frozen_a: Option<f64>,
    },
    /// Blocking stationary profile for the config's reaction and advection.
    Stationary {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Half-length of the computational interval (enlarged when too short).
        #[arg(long, default_value_t = 80.0)]
        half_length: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Certifies a barrier construction and writes a JSON report.
    VerifyBarriers {
        /// rightward-super, rightward-sub, leftward-super, rightward-omega-tenth, bump, static.
        #[arg(long)]
        case: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.3)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
    },
    /// Classifies a run directory and compares with the predicted outcome.
    Classify {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a sweep config; one directory per cell under `--out-dir`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gnuplot-ready data from a run directory.
    PlotData {
        #[arg(long)]
        run: PathBuf,
        /// spacetime_heat, trace or profile_overlay.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        level: f64,
        #[arg(long, default_value = "right")]
        side: Side,
        #[arg(long)]
        t: Option<f64>,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t1,t2")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((a, b))
}

/// Exit status of a command that ran to completion.
enum Status {
    Ok,
    CheckFailed,
}

struct Ctx {
    out_dir: PathBuf,
    jobs: usize,
    quiet: bool,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn create(&self, p: &Path) -> Result<fs::File> {
        let path = self.path(p);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(fs::File::create(path)?)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            let _ = writeln!(std::io::stdout(), "{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
        jobs: cli.jobs,
        quiet: cli.quiet,
    };
    match dispatch(&ctx, cli.cmd) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("front-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Cmd) -> Result<Status> {
    match cmd {
        Cmd::Wave {
            reaction,
            speed,
            out,
        } => wave(ctx, &reaction, speed, &out),
        Cmd::Simulate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let m = harness::run(&cfg, &ctx.out_dir)?;
            ctx.say(format!(
                "wrote {} files to {}",
                m.files.len() + 1,
                ctx.out_dir.display()
            ));
            for w in &m.warnings {
                ctx.say(format!("warning: {w}"));
            }
            Ok(Status::Ok)
        }
        Cmd::Fronts {
            traj,
            level,
            side,
            out,
            fit,
            window,
            log_term,
            frozen_a,
        } => fronts(
            ctx,
            &traj,
            level,
            side,
            &out,
            fit.as_deref(),
            window,
            log_term,
            frozen_a,
        ),
        Cmd::Stationary {
            config,
            out,
            half_length,
            tol,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let p = solve_blocking_profile(&cfg.problem()?, half_length, tol)?;
            let field = cfg.field()?;
            let res = p.residuals(|x, s| field.eval(x, s));
            let mut f = ctx.create(&out)?;
            writeln!(
                f,
                "# eta={},zeta={},c={},residual_max={}",
                p.eta, p.zeta, p.c, p.residual_max
            )?;
            writeln!(f, "x,U,residual")?;
            for (i, (u, r)) in p.values.iter().zip(&res).enumerate() {
                writeln!(f, "{},{},{}", p.x(i), u, r)?;
            }
            ctx.say(format!(
                "X = {}, {} Newton iterations, residual {:e}",
                p.half_length, p.newton_iterations, p.residual_max
            ));
            Ok(Status::Ok)
        }
        Cmd::VerifyBarriers {
            case,
            out,
            k,
            theta,
            c,
        } => {
            let case: BarrierCase = case.parse()?;
            let rep = verify_case(case, k, theta, c)?;
            serde_json::to_writer_pretty(ctx.create(&out)?, &rep)?;
            for q in &rep.inequalities {
                ctx.say(format!(
                    "{:<32} {:>14.6e}  {}",
                    q.name,
                    q.worst_margin,
                    if q.holds { "pass" } else { "FAIL" }
                ));
            }
            ctx.say(format!(
                "{}: {}",
                case.name(),
                if rep.passed { "pass" } else { "FAIL" }
            ));
            Ok(if rep.passed {
                Status::Ok
            } else {
                Status::CheckFailed
            })
        }
        Cmd::Classify { traj, out } => classify_cmd(ctx, &traj, out.as_deref()),
        Cmd::PlotData {
            run,
            kind,
            out,
            level,
            side,
            t,
        } => {
            let kind: PlotKind = kind.parse()?;
            let f = ctx.create(&out)?;
            harness::emit_plot_data(
                &run,
                kind,
                &PlotOptions { level, side, t },
                std::io::BufWriter::new(f),
            )?;
            Ok(Status::Ok)
        }
        Cmd::Sweep { config, out } => {
            let cfg = SweepConfig::load(&config)?;
            let cells = cfg.all_cells();
            let rows = harness::run_sweep_dirs(&cells, &cfg.settings, ctx.jobs, &ctx.out_dir)?;
            if let Some(out) = out {
                phase::write_sweep_csv(&rows, ctx.create(&out)?)?;
            }
            let mut failed = false;
            for r in &rows {
                failed |= r.agreement == Agreement::Disagree || r.agreement == Agreement::Error;
                ctx.say(format!(
                    "c={:<8} theta={:<5} k={:<4} predicted {:<15} measured {:<15} {}",
                    r.c,
                    r.theta,
                    r.k,
                    r.predicted_kind,
                    r.measured_kind,
                    r.agreement.name()
                ));
            }
            Ok(if failed {
                Status::CheckFailed
            } else {
                Status::Ok
            })
        }
    }
}

fn wave(ctx: &Ctx, spec: &str, speed: Option<f64>, out: &Path) -> Result<Status> {
    let reaction = harness::parse_reaction_spec(spec)?;
    let profile = match reaction.class() {
        ReactionClass::Kpp => {
            let nu = match speed {
                Some(nu) => nu,
                None => kpp_min_speed(&reaction)?,
            };
            kpp_front(&reaction, nu, 1e-8)?
        }
        ReactionClass::Bistable => {
            if speed.is_some() {
                return Err(Error::Config(
                    "--speed applies to KPP reactions only; the bistable speed is unique".into(),
                ));
            }
            bistable_front(&reaction, 1e-8)?
        }
        other => {
            return Err(Error::WrongClass {
                expected: "kpp or bistable",
                got: other.name(),
            })
        }
    };
    let res = profile.residuals();
    let mut f = ctx.create(out)?;
    writeln!(
        f,
        "# speed={},decay_plus={},decay_minus={}",
        profile.speed, profile.decay_plus, profile.decay_minus
    )?;
    writeln!(f, "s,phi,residual")?;
    for (i, (s, phi)) in profile.abscissa().iter().zip(&profile.values).enumerate() {
        writeln!(f, "{},{},{}", s, phi, res.get(i).copied().unwrap_or(0.0))?;
    }
    ctx.say(format!("speed {}", profile.speed));
    Ok(Status::Ok)
}

#[allow(clippy::too_many_arguments)]
fn fronts(
    ctx: &Ctx,
    dir: &Path,
    level: f64,
    side: Side,
    out: &Path,
    fit: Option<&str>,
    window: Option<(f64, f64)>,
    log_term: f64,
    frozen_a: Option<f64>,
) -> Result<Status> {
    let traj = harness::load_trajectory(dir)?;
    let tr = match traj.trace(level, side) {
        Some(t) => t.clone(),
        None => trace_level(&traj, level, side)?,
    };
    let mut f = ctx.create(out)?;
    writeln!(f, "t,position")?;
    for (t, p) in tr.times.iter().zip(&tr.positions) {
        if let Some(p) = p {
            writeln!(f, "{t},{p}")?;
        }
    }
    let window = window.unwrap_or((0.5 * traj.t_end, traj.t_end));
    match fit {
        None => {}
        Some("speed") => {
            let r = fit_speed_with_log(&tr, window, log_term)?;
            writeln!(
                f,
                "# fit=speed,speed={},intercept={},stderr={},log_term={},samples={}",
                r.speed, r.intercept, r.stderr, r.log_term, r.samples
            )?;
            ctx.say(format!("speed {} (stderr {:e})", r.speed, r.stderr));
        }
        Some("logdelay") => {
            let r = fit_log_delay(&tr, window, frozen_a)?;
            writeln!(
                f,
                "# fit=logdelay,a={},b={},c0={},rms={},samples={}",
                r.a, r.b, r.c0, r.rms, r.samples
            )?;
            if let Some(z) = r.frozen {
                writeln!(
                    f,
                    "# fit=logdelay_frozen,a={},b={},c0={},rms={}",
                    z.a, z.b, z.c0, z.rms
                )?;
            }
            ctx.say(format!("a {} b {}", r.a, r.b));
        }
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown fit '{other}' (expected speed or logdelay)"
            )))
        }
    }
    Ok(Status::Ok)
}

fn classify_cmd(ctx: &Ctx, dir: &Path, out: Option<&Path>) -> Result<Status> {
    let traj = harness::load_trajectory(dir)?;
    let meta = harness::load_meta(dir)?;
    let field = &traj.problem.field;
    let mut th = Thresholds::default();
    let mut prediction = None;
    let mut expectation = None;
    if let (Reaction::Kpp { .. }, Reaction::CubicBistable { theta, .. }) =
        (&field.left, &field.right)
    {
        let c_m = kpp_min_speed(&field.left)?;
        let c_b = bistable_front(&field.right, 1e-8)?.speed;
        let p = predict(traj.problem.c, c_m, c_b)?;
        let branch = conditional_branch(&meta.config.initial, *theta, field.half_width);
        if let Some(e) = p.expectation(branch) {
            th = th.with_kpp_lags(e, c_m);
            expectation = Some(e.clone());
        }
        prediction = Some(p);
    }
    let outcome = classify(&traj, &th)?;
    let agrees = expectation.as_ref().map(|e| e.kind == outcome.kind);
    let report = serde_json::json!({
        "outcome": {
            "kind": outcome.kind.name(),
            "measured_left": outcome.measured_left(),
            "measured_right": outcome.measured_right(),
            "final_max": outcome.final_max,
            "right_variation": outcome.right_variation,
            "semi_persistent": outcome.semi_persistent,
            "right_settling": outcome.right_settling,
            "local_min": outcome.local_min,
            "left_fit": outcome.left_speed,
            "right_fit": outcome.right_speed,
        },
        "prediction": prediction,
        "kind_agrees": agrees,
    });
    match out {
        Some(p) => serde_json::to_writer_pretty(ctx.create(p)?, &report)?,
        None => ctx.say(serde_json::to_string_pretty(&report)?),
    }
    Ok(Status::Ok)
}
