#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nf_thin::config::{tunables_help, Config, ConfigError};
use nf_thin::harness::{self, default_workers, RunOptions};
use nf_thin::io::{self, fmt_f64, SwarmRecord};
use nf_thin::oracle::{run_oracle_suite, OracleOptions};
use nf_thin_core::array::{ArrayGeometry, FocusPoint, ThinningVector};
use nf_thin_core::baselines::Normalization;
use nf_thin_core::beam::{
    angle_pattern, grating_lobe_angles, range_pattern, AngleGrid, GainDivisor, RangeGrid,
};
use nf_thin_core::channel::UserLocation;
use nf_thin_core::pso::{
    optimize_gta, optimize_positions_mula, optimize_sta, MulaProblem, StaObjective,
};
use nf_thin_core::rng::derive_seed;

#[derive(Parser, Debug)]
#[command(name = "nf-thin", version, about = "Near-field array thinning experiments", after_long_help = tunables_help())]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one tunable, e.g. `--set pso.particles=20` (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory for CSV, SVG and JSON artifacts.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Master seed (overrides experiment.seed).
    #[arg(long, env = "NF_THIN_SEED", global = true)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, default_value_t = default_workers(), global = true)]
    workers: usize,
    /// Progress messages on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Angle x range pattern of the focused sparse array.
    Fig1,
    /// FULA vs SULA sum-rate with users on boresight.
    Fig2(Trials),
    /// Sum-rate CDFs of all schemes.
    Fig3(Trials),
    /// Mean sum-rate against the number of users.
    Fig4(Trials),
    /// Beam pattern of a uniform array or a mask, as CSV on stdout.
    Pattern(PatternArgs),
    /// Visible grating-lobe angles in degrees.
    Grating(GratingArgs),
    /// Grating-lobe-aware thinning of the configured array.
    ThinGta,
    /// Sum-rate thinning for one user drop.
    ThinSta(UserArgs),
    /// Movable-array positions for one user drop.
    Mula(UserArgs),
    /// Brute-force and closed-form checks; exits 2 on failure.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct Trials {
    /// Number of Monte Carlo trials (defaults to the config value).
    #[arg(long)]
    trials: Option<usize>,
    /// Reduced budget: 50 trials, 20 particles, 40 iterations.
    #[arg(long)]
    ci: bool,
}

#[derive(Args, Debug)]
struct PatternArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    d_over_lambda: f64,
    #[arg(long, default_value_t = 15e9)]
    carrier_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    focus_deg: f64,
    #[arg(long, default_value_t = 346.0)]
    focus_range_m: f64,
    /// Bit string, element 0 first; defaults to all elements.
    #[arg(long)]
    mask: Option<String>,
    /// `angle` or `range`.
    #[arg(long, default_value = "angle")]
    cut: String,
    #[arg(long, default_value_t = 2048)]
    points: usize,
}

#[derive(Args, Debug)]
struct GratingArgs {
    #[arg(long)]
    d_over_lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    focus_deg: f64,
}

#[derive(Args, Debug)]
struct UserArgs {
    /// Scenario CSV (user_id, theta_rad, range_m); otherwise users are drawn.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Number of users to draw.
    #[arg(long, default_value_t = 16)]
    users: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Seeded runs per desk-scale optimality check.
    #[arg(long, default_value_t = 50)]
    runs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(g: &Global) -> Result<Config, ConfigError> {
    let mut cfg = Config::load(g.config.as_deref(), &g.overrides)?;
    if let Some(s) = g.seed {
        cfg.experiment.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let mut cfg = match load_config(g) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    let opts = RunOptions {
        workers: g.workers,
        out_dir: Some(g.out.clone()),
        verbose: g.verbose > 0,
    };
    let trials = |t: &Trials, cfg: &mut Config, default: fn(&Config) -> usize| {
        if t.ci {
            *cfg = cfg.clone().ci_profile();
            return t.trials.unwrap_or(cfg.experiment.fig3_trials);
        }
        t.trials.unwrap_or(default(cfg))
    };
    match &cli.command {
        Command::Fig1 => {
            let r = harness::run_fig1(&cfg, &opts)?;
            for l in &r.grating_lobes {
                println!(
                    "grating lobe predicted {:.3} deg, measured {:.3} deg, {:+.3} dB",
                    l.predicted_deg, l.measured_deg, l.relative_db
                );
            }
            println!(
                "range cut: strongest sidelobe {:.2} dB at {:.4} m; short-range ripple {:.2} dB at {:.4} m",
                r.range_max_sidelobe_db, r.range_max_sidelobe_m, r.ripple_db, r.ripple_m
            );
        }
        Command::Fig2(t) => {
            let n = trials(t, &mut cfg, |c| c.experiment.fig2_trials);
            let r = harness::run_fig2(&cfg, n, &opts)?;
            println!("mean SULA / mean FULA = {:.4} over {n} trials", r.ratio());
        }
        Command::Fig3(t) => {
            let n = trials(t, &mut cfg, |c| c.experiment.fig3_trials);
            let r = harness::run_fig3(&cfg, n, &opts)?;
            for &s in &r.schemes {
                let st = r.stats(s).expect("scheme was run");
                println!(
                    "{:<5} mean {:8.3}  se {:6.3}  median {:8.3}",
                    s.name(),
                    st.mean,
                    st.stderr,
                    st.median
                );
            }
        }
        Command::Fig4(t) => {
            let n = trials(t, &mut cfg, |c| c.experiment.fig4_trials);
            let r = harness::run_fig4(&cfg, n, &opts)?;
            for p in &r.points {
                println!(
                    "K = {:>2}  {:<5} mean {:8.3}  se {:6.3}",
                    p.k, p.scheme, p.stats.mean, p.stats.stderr
                );
            }
        }
        Command::Pattern(p) => pattern(p)?,
        Command::Grating(a) => {
            if !(a.d_over_lambda > 0.0) {
                eprintln!("config error: --d-over-lambda must be positive");
                return Ok(ExitCode::from(1));
            }
            let pred = grating_lobe_angles(a.d_over_lambda, 1.0, a.focus_deg.to_radians())?;
            let deg: Vec<String> = pred
                .angles()
                .iter()
                .map(|x| format!("{:.3}", x.to_degrees()))
                .collect();
            println!("{}", deg.join(", "));
        }
        Command::ThinGta => {
            let dep = cfg.deployment()?;
            let seed = derive_seed(cfg.experiment.seed, 0);
            let r = optimize_gta(
                &dep.geometry,
                dep.n_active,
                &dep.fixed(),
                &cfg.gta_config(),
                &cfg.swarm(seed),
            )?;
            println!("{}", r.best.bit_string());
            println!("worst-case objective {:.3} dB", r.best_cost);
            write_record(
                &opts,
                "thin_gta.json",
                &SwarmRecord::for_mask("gta", &r, seed, serde_json::to_value(&cfg)?),
            )?;
        }
        Command::ThinSta(u) => {
            let users = users(&cfg, u)?;
            let dep = cfg.deployment()?;
            let seed = derive_seed(cfg.experiment.seed, 0);
            let norm = cfg.fig3_normalization()?.count(dep.n_active);
            let obj = StaObjective::new(
                &dep.geometry,
                &users,
                norm,
                cfg.power(users.len())?,
                cfg.rzf()?,
            )?;
            let r = optimize_sta(
                obj,
                dep.n_elements(),
                dep.n_active,
                &dep.fixed(),
                &cfg.swarm(seed),
            )?;
            println!("{}", r.best.bit_string());
            println!("sum-rate {:.4} bit/s/Hz", -r.best_cost);
            write_record(
                &opts,
                "thin_sta.json",
                &SwarmRecord::for_mask("sta", &r, seed, serde_json::to_value(&cfg)?),
            )?;
        }
        Command::Mula(u) => {
            let users = users(&cfg, u)?;
            let dep = cfg.deployment()?;
            let seed = derive_seed(cfg.experiment.seed, 0);
            let norm = match cfg.fig3_normalization()? {
                Normalization::Reference(n) => n,
                Normalization::OwnCount => dep.n_active,
            };
            let problem = MulaProblem::new(
                dep.wavelength(),
                users.clone(),
                dep.mula_bounds,
                dep.n_active,
                dep.mula_min_spacing,
                norm,
                cfg.power(users.len())?,
                cfg.rzf()?,
            )?;
            let r = optimize_positions_mula(&problem, &cfg.swarm(seed))?;
            let pos: Vec<String> = r.best.iter().map(|&x| fmt_f64(x)).collect();
            println!("{}", pos.join(" "));
            println!("sum-rate {:.4} bit/s/Hz", -r.best_cost);
            write_record(
                &opts,
                "mula.json",
                &SwarmRecord::for_positions("mula", &r, seed, serde_json::to_value(&cfg)?),
            )?;
        }
        Command::Oracle(a) => {
            let o = OracleOptions {
                runs: a.runs.max(1),
                ..OracleOptions::default()
            };
            let verbose = opts.verbose;
            let report = run_oracle_suite(&o, &|name| {
                if verbose {
                    eprintln!("running: {name}");
                }
            });
            println!("{report}");
            if !report.all_passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_record(opts: &RunOptions, name: &str, rec: &SwarmRecord) -> Result<()> {
    let dir = opts.out_dir.as_deref().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    io::write_json(&dir.join(name), rec)
}

fn users(cfg: &Config, u: &UserArgs) -> Result<Vec<UserLocation>> {
    match &u.scenario {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(io::read_scenario(f, cfg.experiment.seed)?.users)
        }
        None => {
            if u.users == 0 {
                bail!("--users must be positive");
            }
            Ok(harness::trial_scenario(&cfg.sampler()?, u.users, cfg.experiment.seed, 0)?.users)
        }
    }
}

fn pattern(p: &PatternArgs) -> Result<()> {
    let lam = nf_thin_core::wavelength(p.carrier_hz);
    let geom = ArrayGeometry::uniform(p.n, p.d_over_lambda * lam, lam)?;
    let mask = match &p.mask {
        Some(bits) => ThinningVector::from_bit_string(bits, vec![])?,
        None => ThinningVector::full(p.n),
    };
    let stdout = std::io::stdout();
    match p.cut.as_str() {
        "angle" => {
            let grid = AngleGrid::uniform_sine(p.points)?;
            let pat = angle_pattern(
                &geom,
                &mask,
                p.focus_deg.to_radians(),
                &grid,
                GainDivisor::Active,
            )?;
            let rows = grid
                .sines()
                .iter()
                .zip(pat.values_db())
                .map(|(u, g)| vec![fmt_f64(u.asin().to_degrees()), fmt_f64(g)]);
            io::write_table(stdout.lock(), &["angle_deg", "gain_db"], rows)
        }
        "range" => {
            let grid = RangeGrid::log(0.01, geom.rayleigh_distance(), p.points)?;
            let focus = FocusPoint::from_degrees(p.focus_deg, p.focus_range_m)?;
            let pat = range_pattern(&geom, &mask, focus, &grid, GainDivisor::Active)?;
            let rows = grid
                .ranges()
                .iter()
                .zip(pat.values_db())
                .map(|(r, g)| vec![fmt_f64(*r), fmt_f64(g)]);
            io::write_table(stdout.lock(), &["range_m", "gain_db"], rows)
        }
        other => bail!("unknown cut `{other}` (angle|range)"),
    }
}
