//! Monte Carlo experiment driver and figure artifacts.
//!
//! Trial `t` of a run with master seed `s` draws its users from
//! `derive_seed(s, t)`. Layouts computed once per run (GTA, PTA) use seeds
//! from stream offsets far above any trial index, so adding trials never
//! changes them. Results are collected in trial order, which makes every
//! CSV independent of the worker count.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use nf_thin_core::array::{ArrayGeometry, FocusPoint, ThinningVector};
use nf_thin_core::baselines::{evaluate_scheme, EvalContext, Normalization, Precomputed, Scheme};
use nf_thin_core::beam::{
    angle_pattern, grating_lobe_angles, lobe_extent, local_maxima, pattern_2d,
    range_lobe_candidates, range_pattern, to_db, AngleGrid, GainDivisor, RangeCandidateKind,
    RangeGrid,
};
use nf_thin_core::channel::{Scenario, ScenarioSampler, UserLocation};
use nf_thin_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::io::{self, fmt_f64, RateRow};
use crate::svg::{self, Axes};

/// Stream offsets for the once-per-run optimizations.
const GTA_STREAM: u64 = 1 << 40;
const PTA_ENSEMBLE_STREAM: u64 = (1 << 40) + 1;
const PTA_SWARM_STREAM: u64 = (1 << 40) + 2;
/// Per-K sub-runs of the user sweep.
const SWEEP_STREAM: u64 = 1 << 41;

/// Execution settings shared by all experiments.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: default_workers(),
            out_dir: None,
            verbose: false,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunOptions {
    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .context("building worker pool")
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.out_dir.as_ref().map(|d| d.join(name))
    }
}

/// Mean, standard error and median of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub median: f64,
}

impl Stats {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                stderr: f64::NAN,
                median: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sorted = sorted(samples);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            n,
            mean,
            stderr: (var / n as f64).sqrt(),
            median,
        }
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Right-continuous empirical CDF: `(x_i, i/n)` over the sorted samples.
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let n = samples.len() as f64;
    sorted(samples)
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Per-scheme samples from a paired Monte Carlo run.
#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub k: usize,
    pub schemes: Vec<Scheme>,
    /// `sum_rate[s][t]` for scheme `schemes[s]` in trial `t`.
    pub sum_rate: Vec<Vec<f64>>,
    pub min_sinr_db: Vec<Vec<f64>>,
    pub scenarios: Vec<Scenario>,
    pub precomputed: Precomputed,
}

impl AggregateResult {
    pub fn n_trials(&self) -> usize {
        self.scenarios.len()
    }

    pub fn samples(&self, scheme: Scheme) -> Option<&[f64]> {
        self.schemes
            .iter()
            .position(|&s| s == scheme)
            .map(|i| &self.sum_rate[i][..])
    }

    pub fn stats(&self, scheme: Scheme) -> Option<Stats> {
        self.samples(scheme).map(Stats::of)
    }

    pub fn mean(&self, scheme: Scheme) -> Option<f64> {
        self.stats(scheme).map(|s| s.mean)
    }

    /// `mean(a) / mean(b)`.
    pub fn ratio(&self, a: Scheme, b: Scheme) -> Option<f64> {
        Some(self.mean(a)? / self.mean(b)?)
    }

    pub fn rows(&self) -> Vec<RateRow> {
        let mut rows = Vec::with_capacity(self.n_trials() * self.schemes.len());
        for t in 0..self.n_trials() {
            for (i, s) in self.schemes.iter().enumerate() {
                rows.push(RateRow {
                    scheme: s.name().into(),
                    trial: t,
                    k: self.k,
                    sum_rate: self.sum_rate[i][t],
                    min_sinr_db: self.min_sinr_db[i][t],
                });
            }
        }
        rows
    }

    fn summary(&self) -> Value {
        let per: serde_json::Map<String, Value> = self
            .schemes
            .iter()
            .map(|&s| (s.name().to_string(), json!(self.stats(s))))
            .collect();
        json!({ "k": self.k, "trials": self.n_trials(), "sum_rate": per })
    }
}

/// Users of trial `t`.
pub fn trial_scenario(
    sampler: &ScenarioSampler,
    k: usize,
    master_seed: u64,
    trial: usize,
) -> Result<Scenario> {
    Ok(sampler.sample(k, derive_seed(master_seed, trial as u64))?)
}

/// GTA and PTA layouts needed by `schemes`, computed once.
pub fn precompute(
    ctx: &EvalContext,
    schemes: &[Scheme],
    sampler: &ScenarioSampler,
    k: usize,
    ensemble_size: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<Precomputed> {
    let mut pre = Precomputed::default();
    if schemes.contains(&Scheme::Gta) {
        opts.log("optimizing GTA mask");
        pre.gta = Some(ctx.gta_mask(derive_seed(master_seed, GTA_STREAM))?);
    }
    if schemes.contains(&Scheme::Pta) {
        opts.log(format!("optimizing PTA mask over {ensemble_size} drops"));
        pre.pta = Some(pta_mask(ctx, sampler, k, ensemble_size, master_seed)?);
    }
    Ok(pre)
}

fn pta_mask(
    ctx: &EvalContext,
    sampler: &ScenarioSampler,
    k: usize,
    size: usize,
    master_seed: u64,
) -> Result<ThinningVector> {
    let base = derive_seed(master_seed, PTA_ENSEMBLE_STREAM);
    let ensemble = (0..size)
        .map(|i| Ok(sampler.sample(k, derive_seed(base, i as u64))?.users))
        .collect::<Result<Vec<Vec<UserLocation>>>>()?;
    Ok(ctx.pta_mask(&ensemble, derive_seed(master_seed, PTA_SWARM_STREAM))?)
}

/// Paired Monte Carlo over `n_trials` drops of `k` users.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    ctx: &EvalContext,
    pre: Precomputed,
    schemes: &[Scheme],
    sampler: &ScenarioSampler,
    k: usize,
    n_trials: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<AggregateResult> {
    let pool = opts.pool()?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let trials: Vec<(Scenario, Vec<(f64, f64)>)> = pool.install(|| {
        (0..n_trials)
            .into_par_iter()
            .map(|t| {
                let scenario = trial_scenario(sampler, k, master_seed, t)?;
                let trial_seed = scenario.seed;
                let rates = schemes
                    .iter()
                    .map(|&s| {
                        let out = evaluate_scheme(s, ctx, &pre, &scenario.users, trial_seed)
                            .map_err(|e| anyhow!("trial {t}, {s}: {e}"))?;
                        Ok((out.report.sum_rate, out.report.min_sinr_db()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if n.is_multiple_of(10) || n == n_trials {
                    opts.log(format!("  {n}/{n_trials} trials (K = {k})"));
                }
                Ok((scenario, rates))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut sum_rate = vec![Vec::with_capacity(n_trials); schemes.len()];
    let mut min_sinr_db = vec![Vec::with_capacity(n_trials); schemes.len()];
    let mut scenarios = Vec::with_capacity(n_trials);
    for (scenario, rates) in trials {
        for (i, (r, m)) in rates.into_iter().enumerate() {
            sum_rate[i].push(r);
            min_sinr_db[i].push(m);
        }
        scenarios.push(scenario);
    }
    Ok(AggregateResult {
        k,
        schemes: schemes.to_vec(),
        sum_rate,
        min_sinr_db,
        scenarios,
        precomputed: pre,
    })
}

/// Evaluation context for `k` users under `normalization`.
pub fn context(
    cfg: &Config,
    k: usize,
    normalization: Normalization,
    seed: u64,
) -> Result<EvalContext> {
    Ok(EvalContext {
        deployment: cfg.deployment()?,
        power: cfg.power(k)?,
        rzf: cfg.rzf()?,
        normalization,
        swarm: cfg.swarm(seed),
        gta: cfg.gta_config(),
    })
}

fn meta(cfg: &Config, figure: &str, summary: Value) -> io::Meta {
    io::Meta {
        figure: figure.into(),
        seed: cfg.experiment.seed,
        version: io::version_string(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        summary,
    }
}

fn write_svg(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_out_dir(opts: &RunOptions) -> Result<()> {
    if let Some(d) = &opts.out_dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Beam patterns

/// Measured grating lobe next to its prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredLobe {
    pub predicted_deg: f64,
    pub measured_deg: f64,
    /// Gain relative to the measured mainlobe peak.
    pub relative_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Result {
    pub wavelength: f64,
    pub rayleigh_distance: f64,
    /// Angle-cut sample spacing in degrees.
    pub angle_step_deg: f64,
    pub mainlobe_deg: f64,
    pub grating_lobes: Vec<MeasuredLobe>,
    /// Strongest range-cut local maximum outside the mainlobe, dB.
    pub range_max_sidelobe_db: f64,
    pub range_max_sidelobe_m: f64,
    /// Strongest range-cut sample in the short-range window, dB.
    pub ripple_db: f64,
    pub ripple_m: f64,
    pub ripple_window_m: (f64, f64),
    /// Quadratic-phase foci `r_q` below the minimum valid range.
    pub too_close_foci_m: Vec<f64>,
    pub range_points: usize,
}

/// Upper end of the short-range ripple window, as a multiple of its start.
const RIPPLE_WINDOW: f64 = 1.25;

/// Full array of the pattern experiment.
pub fn fig1_geometry(cfg: &Config) -> Result<ArrayGeometry> {
    let f = &cfg.fig1;
    let lam = nf_thin_core::wavelength(f.carrier_hz);
    Ok(ArrayGeometry::uniform(
        f.n_elements,
        f.spacing_wl * lam,
        lam,
    )?)
}

/// Angle cut over `points` samples uniform in θ on `[-90°, 90°]`.
pub fn fig1_angle_cut(cfg: &Config, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let geom = fig1_geometry(cfg)?;
    let b = ThinningVector::full(geom.n_elements());
    let grid = AngleGrid::uniform_angle(
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        points,
    )?;
    let p = angle_pattern(
        &geom,
        &b,
        cfg.fig1.focus_angle_deg.to_radians(),
        &grid,
        GainDivisor::Total,
    )?;
    let deg = (0..points)
        .map(|i| -90.0 + 180.0 * i as f64 / (points - 1) as f64)
        .collect();
    Ok((deg, p.values_db()))
}

/// Range cut on `points` log-spaced samples over `[range_min_m, R_D]`.
pub fn fig1_range_cut(cfg: &Config, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let geom = fig1_geometry(cfg)?;
    let b = ThinningVector::full(geom.n_elements());
    let grid = RangeGrid::log(cfg.fig1.range_min_m, geom.rayleigh_distance(), points)?;
    let focus = FocusPoint::from_degrees(cfg.fig1.focus_angle_deg, cfg.fig1.focus_range_m)?;
    let p = range_pattern(&geom, &b, focus, &grid, GainDivisor::Total)?;
    Ok((grid.ranges().to_vec(), p.values_db()))
}

/// Measurements on the two cuts.
pub fn fig1_analyze(
    cfg: &Config,
    angle: (&[f64], &[f64]),
    range: (&[f64], &[f64]),
) -> Result<Fig1Result> {
    let geom = fig1_geometry(cfg)?;
    let f = &cfg.fig1;
    let (deg, gain) = angle;
    let main = gain
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (deg[a.0] - f.focus_angle_deg).abs();
            let db = (deg[b.0] - f.focus_angle_deg).abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .ok_or_else(|| anyhow!("empty angle cut"))?;
    let main = climb(gain, main);
    let step = deg[1] - deg[0];
    let peaks = local_maxima(gain);
    let pred = grating_lobe_angles(f.spacing_wl, 1.0, f.focus_angle_deg.to_radians())?;
    let grating_lobes = pred
        .angles()
        .iter()
        .map(|a| {
            let p = a.to_degrees();
            // strongest local maximum within two cells of the prediction
            let best = peaks
                .iter()
                .copied()
                .filter(|&i| (deg[i] - p).abs() <= 2.0 * step)
                .max_by(|&a, &b| gain[a].total_cmp(&gain[b]));
            match best {
                Some(i) => MeasuredLobe {
                    predicted_deg: p,
                    measured_deg: deg[i],
                    relative_db: gain[i] - gain[main],
                },
                None => MeasuredLobe {
                    predicted_deg: p,
                    measured_deg: f64::NAN,
                    relative_db: f64::NAN,
                },
            }
        })
        .collect();

    let (r, g) = range;
    let peak = g
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| anyhow!("empty range cut"))?;
    let (lo, hi) = lobe_extent(g, peak);
    let side = local_maxima(g)
        .into_iter()
        .filter(|&i| i < lo || i > hi)
        .max_by(|&a, &b| g[a].total_cmp(&g[b]));
    let window = (f.range_min_m, f.range_min_m * RIPPLE_WINDOW);
    let ripple = (0..r.len())
        .filter(|&i| r[i] >= window.0 && r[i] <= window.1)
        .max_by(|&a, &b| g[a].total_cmp(&g[b]));
    let focus = FocusPoint::from_degrees(f.focus_angle_deg, f.focus_range_m)?;
    let too_close_foci_m = range_lobe_candidates(
        geom.uniform_spacing().unwrap_or(0.0),
        geom.wavelength(),
        focus,
        &(-8..=8).collect::<Vec<_>>(),
        geom.min_valid_range(),
    )
    .into_iter()
    .filter(|c| c.kind == RangeCandidateKind::TooClose)
    .map(|c| c.range)
    .collect();
    Ok(Fig1Result {
        wavelength: geom.wavelength(),
        rayleigh_distance: geom.rayleigh_distance(),
        angle_step_deg: step,
        mainlobe_deg: deg[main],
        grating_lobes,
        range_max_sidelobe_db: side.map_or(f64::NEG_INFINITY, |i| g[i]),
        range_max_sidelobe_m: side.map_or(f64::NAN, |i| r[i]),
        ripple_db: ripple.map_or(f64::NEG_INFINITY, |i| g[i]),
        ripple_m: ripple.map_or(f64::NAN, |i| r[i]),
        ripple_window_m: window,
        too_close_foci_m,
        range_points: r.len(),
    })
}

/// Walks uphill from `i` to the nearest local maximum.
fn climb(v: &[f64], mut i: usize) -> usize {
    loop {
        if i > 0 && v[i - 1] > v[i] {
            i -= 1;
        } else if i + 1 < v.len() && v[i + 1] > v[i] {
            i += 1;
        } else {
            return i;
        }
    }
}

/// Angle × range map, angle cut and range cut of the focused sparse array.
pub fn run_fig1(cfg: &Config, opts: &RunOptions) -> Result<Fig1Result> {
    create_out_dir(opts)?;
    let f = &cfg.fig1;
    opts.log("computing pattern cuts");
    let (deg, ga) = fig1_angle_cut(cfg, f.cut_angle_points)?;
    let (ranges, gr) = fig1_range_cut(cfg, f.cut_range_points)?;
    let result = fig1_analyze(cfg, (&deg, &ga), (&ranges, &gr))?;
    if opts.out_dir.is_none() {
        return Ok(result);
    }

    opts.log("computing angle x range map");
    let geom = fig1_geometry(cfg)?;
    let b = ThinningVector::full(geom.n_elements());
    let focus = FocusPoint::from_degrees(f.focus_angle_deg, f.focus_range_m)?;
    // open interval: the map rejects endfire
    let m = f.map_angle_points;
    let map_deg: Vec<f64> = (0..m)
        .map(|i| -90.0 + 180.0 * (i as f64 + 0.5) / m as f64)
        .collect();
    let map_rad: Vec<f64> = map_deg.iter().map(|d| d.to_radians()).collect();
    let map_ranges = RangeGrid::log(
        geom.min_valid_range(),
        geom.rayleigh_distance(),
        f.map_range_points,
    )?;
    let map = pattern_2d(&geom, &b, focus, &map_rad, &map_ranges, GainDivisor::Total)?;
    let map_db: Vec<f64> = map.values.iter().map(|&g| to_db(g)).collect();

    let mut rows = Vec::with_capacity(map_db.len() + deg.len() + ranges.len());
    for (ri, &r) in map.ranges.iter().enumerate() {
        for (ai, &a) in map_deg.iter().enumerate() {
            rows.push(vec![
                "map".into(),
                fmt_f64(a),
                fmt_f64(r),
                fmt_f64(map_db[ri * m + ai]),
            ]);
        }
    }
    for (a, g) in deg.iter().zip(&ga) {
        rows.push(vec![
            "angle_cut".into(),
            fmt_f64(*a),
            fmt_f64(f.focus_range_m),
            fmt_f64(*g),
        ]);
    }
    for (r, g) in ranges.iter().zip(&gr) {
        rows.push(vec![
            "range_cut".into(),
            fmt_f64(f.focus_angle_deg),
            fmt_f64(*r),
            fmt_f64(*g),
        ]);
    }
    let path = opts.path("fig1_data.csv").expect("out dir set");
    io::write_table_file(&path, &["kind", "angle_deg", "range_m", "gain_db"], rows)?;

    let title = format!(
        "N = {}, d = {}λ, focus ({}°, {} m)",
        f.n_elements, f.spacing_wl, f.focus_angle_deg, f.focus_range_m
    );
    write_svg(
        &opts.path("fig1.svg").expect("out dir set"),
        &svg::heatmap(
            &Axes::new(&title, "angle (deg)", "log10 range (m)"),
            &map_deg,
            &map.ranges,
            &map_db,
            true,
            -40.0,
        ),
    )?;
    write_svg(
        &opts.path("fig1_angle.svg").expect("out dir set"),
        &svg::line_plot(
            &Axes::new("Angle cut", "angle (deg)", "gain (dB)"),
            &[(
                "gain",
                deg.iter().copied().zip(ga.iter().copied()).collect(),
            )],
            Some(-60.0),
        ),
    )?;
    write_svg(
        &opts.path("fig1_range.svg").expect("out dir set"),
        &svg::line_plot(
            &Axes::new("Range cut", "range (m)", "gain (dB)").log_x(),
            &[(
                "gain",
                ranges.iter().copied().zip(gr.iter().copied()).collect(),
            )],
            Some(-60.0),
        ),
    )?;
    io::write_json(
        &opts.path("fig1_meta.json").expect("out dir set"),
        &meta(cfg, "fig1", serde_json::to_value(&result)?),
    )?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// Sum-rate experiments

#[derive(Debug, Clone)]
pub struct Fig2Result {
    pub aggregate: AggregateResult,
    /// Mean user range of every trial.
    pub mean_range_m: Vec<f64>,
    /// `(bin center, trials, mean FULA, mean SULA)`.
    pub bins: Vec<(f64, usize, f64, f64)>,
}

impl Fig2Result {
    pub fn ratio(&self) -> f64 {
        self.aggregate
            .ratio(Scheme::Sula, Scheme::Fula)
            .unwrap_or(f64::NAN)
    }

    /// Fraction of trials with `SULA ≤ FULA`.
    pub fn sula_not_above_fula(&self) -> f64 {
        let a = &self.aggregate;
        let (f, s) = (
            a.samples(Scheme::Fula).unwrap_or(&[]),
            a.samples(Scheme::Sula).unwrap_or(&[]),
        );
        f.iter().zip(s).filter(|(f, s)| s <= f).count() as f64 / f.len().max(1) as f64
    }
}

/// Boresight users, FULA vs SULA, each normalized by its own element count.
pub fn run_fig2(cfg: &Config, n_trials: usize, opts: &RunOptions) -> Result<Fig2Result> {
    create_out_dir(opts)?;
    let seed = cfg.experiment.seed;
    let k = cfg.experiment.fig2_users;
    let sampler = cfg.sampler_at_angle(0.0)?;
    let ctx = context(cfg, k, Normalization::OwnCount, seed)?;
    let schemes = [Scheme::Fula, Scheme::Sula];
    let aggregate = run_trials(
        &ctx,
        Precomputed::default(),
        &schemes,
        &sampler,
        k,
        n_trials,
        seed,
        opts,
    )?;
    let mean_range_m: Vec<f64> = aggregate
        .scenarios
        .iter()
        .map(|s| s.users.iter().map(|u| u.range).sum::<f64>() / s.n_users() as f64)
        .collect();

    let nb = cfg.experiment.fig2_bins;
    let (lo, hi) = sampler.range;
    let width = (hi - lo) / nb as f64;
    let mut acc = vec![(0usize, 0.0, 0.0); nb];
    let (fr, sr) = (&aggregate.sum_rate[0], &aggregate.sum_rate[1]);
    for (t, &m) in mean_range_m.iter().enumerate() {
        let b = (((m - lo) / width) as usize).min(nb - 1);
        acc[b].0 += 1;
        acc[b].1 += fr[t];
        acc[b].2 += sr[t];
    }
    let bins = acc
        .iter()
        .enumerate()
        .map(|(i, &(n, f, s))| {
            let c = lo + width * (i as f64 + 0.5);
            let d = n.max(1) as f64;
            (
                c,
                n,
                if n > 0 { f / d } else { f64::NAN },
                if n > 0 { s / d } else { f64::NAN },
            )
        })
        .collect();
    let result = Fig2Result {
        aggregate,
        mean_range_m,
        bins,
    };

    if opts.out_dir.is_some() {
        let a = &result.aggregate;
        let rows = (0..a.n_trials()).map(|t| {
            vec![
                t.to_string(),
                k.to_string(),
                fmt_f64(result.mean_range_m[t]),
                fmt_f64(a.sum_rate[0][t]),
                fmt_f64(a.sum_rate[1][t]),
            ]
        });
        io::write_table_file(
            &opts.path("fig2_data.csv").expect("out dir set"),
            &["trial", "K", "mean_range_m", "FULA", "SULA"],
            rows,
        )?;
        let binned = |j: usize| -> Vec<(f64, f64)> {
            result
                .bins
                .iter()
                .filter(|b| b.1 > 0)
                .map(|b| (b.0, if j == 0 { b.2 } else { b.3 }))
                .collect()
        };
        write_svg(
            &opts.path("fig2.svg").expect("out dir set"),
            &svg::line_plot(
                &Axes::new(
                    &format!("Boresight users, K = {k}"),
                    "mean user range (m)",
                    "sum-rate (bit/s/Hz)",
                ),
                &[("FULA", binned(0)), ("SULA", binned(1))],
                None,
            ),
        )?;
        let summary = json!({
            "aggregate": a.summary(),
            "ratio_sula_fula": result.ratio(),
            "fraction_sula_not_above_fula": result.sula_not_above_fula(),
            "bins": result.bins.iter().map(|b| json!({"center_m": b.0, "trials": b.1, "FULA": b.2, "SULA": b.3})).collect::<Vec<_>>(),
        });
        io::write_json(
            &opts.path("fig2_meta.json").expect("out dir set"),
            &meta(cfg, "fig2", summary),
        )?;
    }
    Ok(result)
}

/// Sum-rate distribution of every configured scheme.
pub fn run_fig3(cfg: &Config, n_trials: usize, opts: &RunOptions) -> Result<AggregateResult> {
    create_out_dir(opts)?;
    let seed = cfg.experiment.seed;
    let k = cfg.experiment.fig3_users;
    let schemes = cfg.schemes()?;
    let sampler = cfg.sampler()?;
    let ctx = context(cfg, k, cfg.fig3_normalization()?, seed)?;
    let pre = precompute(
        &ctx,
        &schemes,
        &sampler,
        k,
        cfg.pta.ensemble_size,
        seed,
        opts,
    )?;
    let agg = run_trials(&ctx, pre, &schemes, &sampler, k, n_trials, seed, opts)?;

    if opts.out_dir.is_some() {
        let mut buf = Vec::new();
        io::write_rate_rows(&mut buf, &agg.rows())?;
        let path = opts.path("fig3_data.csv").expect("out dir set");
        std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        let series: Vec<(&str, Vec<f64>)> = agg
            .schemes
            .iter()
            .zip(&agg.sum_rate)
            .map(|(s, v)| (s.name(), v.clone()))
            .collect();
        write_svg(
            &opts.path("fig3.svg").expect("out dir set"),
            &svg::cdf_plot(
                &Axes::new(
                    &format!("Sum-rate CDF, K = {k}"),
                    "sum-rate (bit/s/Hz)",
                    "CDF",
                ),
                &series,
            ),
        )?;
        let mut summary = agg.summary();
        let ratios: serde_json::Map<String, Value> = [
            ("STA/FULA", Scheme::Sta, Scheme::Fula),
            ("STA/MULA", Scheme::Sta, Scheme::Mula),
            ("GTA/STA", Scheme::Gta, Scheme::Sta),
            ("PTA/STA", Scheme::Pta, Scheme::Sta),
        ]
        .iter()
        .filter_map(|(n, a, b)| agg.ratio(*a, *b).map(|r| (n.to_string(), json!(r))))
        .collect();
        summary["ratios"] = Value::Object(ratios);
        summary["gta_mask"] = json!(agg.precomputed.gta.as_ref().map(|m| m.bit_string()));
        summary["pta_mask"] = json!(agg.precomputed.pta.as_ref().map(|m| m.bit_string()));
        io::write_json(
            &opts.path("fig3_meta.json").expect("out dir set"),
            &meta(cfg, "fig3", summary),
        )?;
    }
    Ok(agg)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub k: usize,
    pub scheme: String,
    #[serde(flatten)]
    pub stats: Stats,
}

#[derive(Debug, Clone)]
pub struct Fig4Result {
    pub points: Vec<SweepPoint>,
}

impl Fig4Result {
    /// `(K, stats)` of one scheme in sweep order.
    pub fn curve(&self, scheme: Scheme) -> Vec<(usize, Stats)> {
        self.points
            .iter()
            .filter(|p| p.scheme == scheme.name())
            .map(|p| (p.k, p.stats))
            .collect()
    }
}

/// Mean sum-rate against the number of users. GTA is optimized once; PTA
/// once per user count.
pub fn run_fig4(cfg: &Config, n_trials: usize, opts: &RunOptions) -> Result<Fig4Result> {
    create_out_dir(opts)?;
    let seed = cfg.experiment.seed;
    let schemes = cfg.schemes()?;
    let sampler = cfg.sampler()?;
    let normalization = cfg.fig3_normalization()?;
    let mut gta = None;
    let mut points = Vec::new();
    for &k in &cfg.experiment.fig4_users {
        opts.log(format!("K = {k}"));
        let ctx = context(cfg, k, normalization, seed)?;
        if gta.is_none() && schemes.contains(&Scheme::Gta) {
            gta = precompute(&ctx, &[Scheme::Gta], &sampler, k, 1, seed, opts)?.gta;
        }
        let sub_seed = derive_seed(seed, SWEEP_STREAM + k as u64);
        let mut pre = if schemes.contains(&Scheme::Pta) {
            precompute(
                &ctx,
                &[Scheme::Pta],
                &sampler,
                k,
                cfg.pta.ensemble_size,
                sub_seed,
                opts,
            )?
        } else {
            Precomputed::default()
        };
        pre.gta = gta.clone();
        let agg = run_trials(&ctx, pre, &schemes, &sampler, k, n_trials, sub_seed, opts)?;
        for &s in &schemes {
            points.push(SweepPoint {
                k,
                scheme: s.name().into(),
                stats: agg.stats(s).expect("scheme was run"),
            });
        }
    }
    let result = Fig4Result { points };

    if opts.out_dir.is_some() {
        let rows = result.points.iter().map(|p| {
            vec![
                p.k.to_string(),
                p.scheme.clone(),
                fmt_f64(p.stats.mean),
                fmt_f64(p.stats.stderr),
                p.stats.n.to_string(),
            ]
        });
        io::write_table_file(
            &opts.path("fig4_data.csv").expect("out dir set"),
            &["K", "scheme", "mean_sum_rate", "stderr", "trials"],
            rows,
        )?;
        let series: Vec<(&str, Vec<(f64, f64)>)> = schemes
            .iter()
            .map(|&s| {
                (
                    s.name(),
                    result
                        .curve(s)
                        .iter()
                        .map(|(k, st)| (*k as f64, st.mean))
                        .collect(),
                )
            })
            .collect();
        write_svg(
            &opts.path("fig4.svg").expect("out dir set"),
            &svg::line_plot(
                &Axes::new(
                    "Average sum-rate",
                    "number of users K",
                    "sum-rate (bit/s/Hz)",
                ),
                &series,
                None,
            ),
        )?;
        let summary = json!({
            "points": result.points,
            "gta_mask": gta.as_ref().map(|m| m.bit_string()),
        });
        io::write_json(
            &opts.path("fig4_meta.json").expect("out dir set"),
            &meta(cfg, "fig4", summary),
        )?;
    }
    Ok(result)
}
