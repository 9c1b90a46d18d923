//! Independent reference computations and brute-force searches.
//!
//! The RZF reference below shares no code with the core precoder: it builds
//! the channel from the closed form, inverts the Gram matrix by Gauss-Jordan
//! elimination and evaluates the SINR term by term.

use std::f64::consts::PI;
use std::fmt;

use nf_thin_core::array::{
    apply_thinning, steering_entries, ArrayGeometry, FocusPoint, ThinningVector,
};
use nf_thin_core::baselines::{
    evaluate_scheme, Deployment, EvalContext, Normalization, Precomputed, Scheme,
};
use nf_thin_core::beam::{
    angle_pattern, grating_lobe_angles, lobe_extent, psll, range_lobe_candidates, range_pattern,
    AngleGrid, GainDivisor, RangeCandidateKind, RangeGrid,
};
use nf_thin_core::channel::{
    channel_vector, pathloss, ChannelMatrix, ScenarioSampler, UserLocation,
};
use nf_thin_core::linalg::CMatrix;
use nf_thin_core::precoder::{
    evaluate_rzf, sinr, PowerConfig, PowerNormalization, PrecodingMatrix, Regularization,
    RzfConfig, SnrReference,
};
use nf_thin_core::pso::{
    optimize_gta, optimize_positions_mula, optimize_sta, top_k_binarize, GtaConfig, GtaObjective,
    MaskProblem, MulaProblem, Problem, StaObjective, SwarmConfig, SwarmState,
};
use nf_thin_core::rng::{derive_seed, rng_from_seed};
use nf_thin_core::C64;
use rand::Rng as _;

/// One named pass/fail outcome.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub checks: Vec<Check>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, outcome: Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<40} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn ensure(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Textbook RZF

/// Closed-form channel `√β e^{-j2πr/λ} a(θ, r)` with `1/√norm` scaling.
pub fn textbook_channel(
    positions: &[f64],
    wavelength: f64,
    user: UserLocation,
    norm: usize,
) -> Vec<C64> {
    let beta = (wavelength / (4.0 * PI * user.range)).powi(2);
    let k = 2.0 * PI / wavelength;
    positions
        .iter()
        .map(|&x| {
            let path = x * user.angle.sin() - x * x * user.angle.cos().powi(2) / (2.0 * user.range);
            let phase = -k * user.range - k * path;
            C64::new(phase.cos(), phase.sin()) * (beta / norm as f64).sqrt()
        })
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<C64>>) -> Option<Vec<Vec<C64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for j in 0..n {
                    let (ac, ic) = (a[col][j], inv[col][j]);
                    a[r][j] -= f * ac;
                    inv[r][j] -= f * ic;
                }
            }
        }
    }
    Some(inv)
}

/// `W = H (HᴴH + αI)⁻¹` scaled to `Σ‖w_k‖² = P`, then per-user SINR.
pub fn textbook_rzf_sinr(
    h: &[Vec<C64>],
    alpha: f64,
    total_power: f64,
    noise: f64,
) -> Option<Vec<f64>> {
    let k = h.len();
    let n = h[0].len();
    let inner = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let gram: Vec<Vec<C64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| inner(&h[i], &h[j]) + if i == j { alpha } else { 0.0 })
                .collect()
        })
        .collect();
    let g = invert(gram)?;
    // column j of W is Σ_i h_i g[i][j]
    let mut w: Vec<Vec<C64>> = (0..k)
        .map(|j| {
            (0..n)
                .map(|e| (0..k).map(|i| h[i][e] * g[i][j]).sum())
                .collect()
        })
        .collect();
    let power: f64 = w.iter().flatten().map(|x| x.norm_sqr()).sum();
    let s = (total_power / power).sqrt();
    for x in w.iter_mut().flatten() {
        *x *= s;
    }
    Some(
        (0..k)
            .map(|u| {
                let signal = inner(&w[u], &h[u]).norm_sqr();
                let interf: f64 = (0..k)
                    .filter(|&j| j != u)
                    .map(|j| inner(&w[j], &h[u]).norm_sqr())
                    .sum();
                signal / (noise + interf)
            })
            .collect(),
    )
}

fn check_textbook_rzf() -> Result<String, String> {
    let lam = 0.01;
    let positions: Vec<f64> = (0..8).map(|i| i as f64 * lam / 2.0).collect();
    let users = [
        UserLocation::new(0.0, 0.5).unwrap(),
        UserLocation::new(30f64.to_radians(), 0.5).unwrap(),
    ];
    let cols: Vec<Vec<C64>> = users
        .iter()
        .map(|&u| textbook_channel(&positions, lam, u, 8))
        .collect();
    let power = PowerConfig::from_snr(
        20.0,
        1.0,
        SnrReference {
            pathloss: pathloss(lam, 0.5).unwrap(),
            beamforming_gain: 1.0,
        },
    )
    .unwrap();
    let h = CMatrix::from_columns(&cols).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for alpha in [
        Regularization::Mmse,
        Regularization::Fixed(1e-9),
        Regularization::Fixed(0.3),
    ] {
        let a = match alpha {
            Regularization::Mmse => 2.0 * power.noise_variance / power.total_power,
            Regularization::Fixed(a) => a,
        };
        let cfg = RzfConfig {
            regularization: alpha,
            normalization: PowerNormalization::SumPower,
        };
        let got = evaluate_rzf(&h, &power, &cfg)
            .map_err(|e| e.to_string())?
            .per_user_sinr;
        let want = textbook_rzf_sinr(&cols, a, power.total_power, power.noise_variance)
            .ok_or("singular Gram")?;
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max(rel(*g, *w));
        }
    }
    ensure(
        worst < 1e-9,
        format!("max relative SINR difference {worst:.2e}"),
    )
}

fn check_hand_sinr() -> Result<String, String> {
    let c = |re: f64| C64::new(re, 0.0);
    let h = ChannelMatrix {
        entries: CMatrix::from_columns(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]]).unwrap(),
        pathloss: vec![1.0, 1.0],
        validity_warnings: 0,
    };
    let w = PrecodingMatrix {
        columns: CMatrix::from_columns(&[vec![c(1.0), c(0.0)], vec![c(0.5), c(1.0)]]).unwrap(),
    };
    let p = PowerConfig::new(1.0, 2.25).unwrap();
    let g = sinr(&h, &w, &p).map_err(|e| e.to_string())?;
    ensure(
        (g[0] - 0.8).abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15,
        format!("SINR {g:?}, expected [0.8, 1.0]"),
    )
}

// ---------------------------------------------------------------------------
// Closed-form checks

fn check_phase_example() -> Result<String, String> {
    let lam = 0.01;
    let a =
        steering_entries(&[0.0, lam / 2.0], lam, PI / 2.0, 1e6, 1).map_err(|e| e.to_string())?;
    let phase = a[1].arg();
    ensure(
        (phase.abs() - PI).abs() < 1e-9,
        format!("second entry phase {phase:.12}"),
    )
}

fn check_pathloss() -> Result<String, String> {
    let b = pathloss(0.01, 10.0).map_err(|e| e.to_string())?;
    ensure(rel(b, 6.333e-9) < 1e-3, format!("β = {b:.4e}"))
}

fn check_channel_norm_and_support() -> Result<String, String> {
    let lam = 0.01;
    let g = ArrayGeometry::uniform(64, lam / 2.0, lam).unwrap();
    let mut rng = rng_from_seed(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mask: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.4)).collect();
        let b = ThinningVector::new(mask, vec![]).unwrap();
        let user = UserLocation::new(rng.gen_range(-1.0..1.0), rng.gen_range(1.0..20.0)).unwrap();
        let h = channel_vector(&g, &b, user).map_err(|e| e.to_string())?;
        let norm: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        let want = pathloss(lam, user.range).unwrap() * b.active_count() as f64 / 64.0;
        worst = worst.max(rel(norm, want));
        let v: Vec<C64> = (0..64)
            .map(|_| C64::new(rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let t = apply_thinning(&v, &b).map_err(|e| e.to_string())?;
        if t.iter()
            .zip(b.mask())
            .any(|(x, &on)| (x.norm() != 0.0) != on)
        {
            return Err("thinned support differs from the mask".into());
        }
    }
    ensure(
        worst < 1e-12,
        format!("max relative ‖h‖² error {worst:.2e}"),
    )
}

fn check_beam_closed_forms() -> Result<String, String> {
    let lam = 1.0;
    let grid = AngleGrid::uniform_sine(16384).unwrap();
    // small λ/2 array: nothing close to the mainlobe
    let g4 = ArrayGeometry::uniform(4, 0.5, lam).unwrap();
    let p4 = psll(&g4, &ThinningVector::full(4), 0.0, &grid, 1.0).map_err(|e| e.to_string())?;
    if !(p4.psll_db < -3.0) {
        return Err(format!("N=4 half-wavelength PSLL {:.2} dB", p4.psll_db));
    }
    let g = ArrayGeometry::uniform(256, 0.5, lam).unwrap();
    let p = psll(&g, &ThinningVector::full(256), 0.0, &grid, 1.0).map_err(|e| e.to_string())?;
    if (p.psll_db + 13.26).abs() > 0.5 {
        return Err(format!("uniform aperture PSLL {:.2} dB", p.psll_db));
    }
    let pred = grating_lobe_angles(5.0, 1.0, 0.0).map_err(|e| e.to_string())?;
    let sines: Vec<f64> = pred.lobes.iter().map(|l| l.sine).collect();
    let want: Vec<f64> = [-4, -3, -2, -1, 1, 2, 3, 4]
        .iter()
        .map(|&q| q as f64 / 5.0)
        .collect();
    if sines.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-12) || sines.len() != want.len() {
        return Err(format!("d = 5λ lobes at {sines:?}"));
    }
    if pred
        .nearest_invisible
        .iter()
        .any(|l| (l.sine.abs() - 1.0).abs() > 1e-12)
    {
        return Err("orders ±5 should sit exactly at endfire".into());
    }
    let d2 = grating_lobe_angles(2.0, 1.0, 0.0).map_err(|e| e.to_string())?;
    let deg: Vec<f64> = d2.angles().iter().map(|a| a.to_degrees()).collect();
    ensure(
        deg.len() == 2 && (deg[0] + 30.0).abs() < 1e-9 && (deg[1] - 30.0).abs() < 1e-9,
        format!(
            "PSLL N=4 {:.2} dB, N=256 {:.2} dB; d=2λ lobes {deg:?}",
            p4.psll_db, p.psll_db
        ),
    )
}

fn check_range_closed_forms() -> Result<String, String> {
    let lam = 0.02;
    let g = ArrayGeometry::uniform(256, 2.0 * lam, lam).unwrap();
    let focus = FocusPoint::new(0.0, 346.0).unwrap();
    let c = range_lobe_candidates(2.0 * lam, lam, focus, &[1], g.min_valid_range());
    if !(c[0].range < 0.1) || c[0].kind != RangeCandidateKind::TooClose {
        return Err(format!("q = 1 candidate {:?}", c[0]));
    }
    let far = RangeGrid::from_ranges(vec![1e3 * g.rayleigh_distance()]).unwrap();
    let v = range_pattern(
        &g,
        &ThinningVector::full(256),
        focus,
        &far,
        GainDivisor::Total,
    )
    .map_err(|e| e.to_string())?
    .values[0];
    ensure(
        v < 1.0 && v > 0.0,
        format!("r_q(1) = {:.4} m, far plateau {v:.4}", c[0].range),
    )
}

fn check_top_k_example() -> Result<String, String> {
    let b = top_k_binarize(&[0.2, 0.9, 0.9, 0.1], 6, 4, &[0, 5]).map_err(|e| e.to_string())?;
    let a: Vec<usize> = b.active_indices().collect();
    // the two 0.9 priorities belong to elements 2 and 3
    ensure(a == vec![0, 2, 3, 5], format!("active {a:?}"))
}

/// Half-power width (samples) of the boresight lobe.
fn beamwidth(dep: &Deployment, mask: &ThinningVector, grid: &AngleGrid) -> usize {
    let p = angle_pattern(&dep.geometry, mask, 0.0, grid, GainDivisor::Active).unwrap();
    // grating lobes are as high as the mainlobe, so start from boresight
    let center = grid.sines().iter().position(|&u| u >= 0.0).unwrap();
    let (lo, hi) = lobe_extent(&p.values, center);
    let top = p.values[center];
    (lo..=hi).filter(|&i| p.values[i] >= 0.5 * top).count()
}

fn check_resolution_order() -> Result<String, String> {
    let dep = Deployment::reference(0.01).unwrap();
    let grid = AngleGrid::uniform_sine(65537).unwrap();
    let (f, s, h) = (
        beamwidth(&dep, &dep.fula_mask(), &grid),
        beamwidth(&dep, &dep.sula_mask(), &grid),
        beamwidth(&dep, &dep.hula_mask(), &grid),
    );
    ensure(
        h > f && h > s,
        format!("half-power widths FULA {f}, SULA {s}, HULA {h} samples"),
    )
}

// ---------------------------------------------------------------------------
// Exhaustive searches at desk scale

pub const DESK_N: usize = 12;
pub const DESK_ACTIVE: usize = 4;
pub const DESK_WAVELENGTH: f64 = 0.01;

pub fn desk_geometry() -> ArrayGeometry {
    ArrayGeometry::uniform(DESK_N, DESK_WAVELENGTH / 2.0, DESK_WAVELENGTH).unwrap()
}

pub fn desk_fixed() -> Vec<usize> {
    vec![0, DESK_N - 1]
}

/// All masks with `DESK_ACTIVE` elements including both edges.
pub fn desk_masks() -> Vec<ThinningVector> {
    let mut out = Vec::new();
    for a in 1..DESK_N - 1 {
        for b in a + 1..DESK_N - 1 {
            out.push(
                ThinningVector::from_active(DESK_N, &[0, a, b, DESK_N - 1], desk_fixed()).unwrap(),
            );
        }
    }
    out
}

/// Drop region `[0.12, 0.6] m × ±60°`, just outside `2D` of the desk array.
pub fn desk_sampler() -> ScenarioSampler {
    ScenarioSampler::new((0.12, 0.6), (-PI / 3.0, PI / 3.0)).unwrap()
}

/// Per-element-per-user budget at the mid-cell range, `N` normalization.
pub fn desk_power(k: usize) -> PowerConfig {
    let s = desk_sampler();
    PowerConfig::from_snr(
        20.0,
        1.0,
        SnrReference {
            pathloss: pathloss(DESK_WAVELENGTH, s.reference_range()).unwrap(),
            beamforming_gain: 1.0 / (DESK_N * k) as f64,
        },
    )
    .unwrap()
}

/// Best and PSO-found value of one seeded desk-scale run.
#[derive(Debug, Clone, Copy)]
pub struct OptimalityRun {
    pub exhaustive: f64,
    pub pso: f64,
}

/// STA at desk scale for `K = 2`: scenario and swarm both seeded by `seed`.
pub fn desk_sta_run(seed: u64, swarm: &SwarmConfig) -> OptimalityRun {
    let users = desk_sampler()
        .sample(2, derive_seed(seed, 0))
        .unwrap()
        .users;
    let obj = StaObjective::new(
        &desk_geometry(),
        &users,
        DESK_N,
        desk_power(2),
        RzfConfig::default(),
    )
    .unwrap();
    let exhaustive = desk_masks()
        .iter()
        .map(|m| obj.sum_rate(m).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let r = optimize_sta(
        obj,
        DESK_N,
        DESK_ACTIVE,
        &desk_fixed(),
        &swarm.with_seed(derive_seed(seed, 1)),
    )
    .unwrap();
    OptimalityRun {
        exhaustive,
        pso: -r.best_cost,
    }
}

pub fn desk_gta_config() -> GtaConfig {
    GtaConfig {
        coverage: vec![0.0],
        grid_points: 4096,
        ..GtaConfig::default()
    }
}

/// Boresight-only GTA at desk scale; values are objective costs in dB.
pub fn desk_gta_run(seed: u64, swarm: &SwarmConfig) -> OptimalityRun {
    let g = desk_geometry();
    let cfg = desk_gta_config();
    let obj = GtaObjective::new(&g, &cfg).unwrap();
    let exhaustive = desk_masks()
        .iter()
        .map(|m| obj.evaluate(m).unwrap())
        .fold(f64::INFINITY, f64::min);
    let r = optimize_gta(&g, DESK_ACTIVE, &desk_fixed(), &cfg, &swarm.with_seed(seed)).unwrap();
    OptimalityRun {
        exhaustive,
        pso: r.best_cost,
    }
}

/// PTA over a five-drop ensemble at desk scale.
pub fn desk_pta_run(seed: u64, swarm: &SwarmConfig) -> OptimalityRun {
    let ensemble: Vec<Vec<UserLocation>> = (0..5)
        .map(|i| {
            desk_sampler()
                .sample(2, derive_seed(seed, 10 + i))
                .unwrap()
                .users
        })
        .collect();
    let obj = StaObjective::ensemble(
        &desk_geometry(),
        &ensemble,
        DESK_N,
        desk_power(2),
        RzfConfig::default(),
    )
    .unwrap();
    let exhaustive = desk_masks()
        .iter()
        .map(|m| obj.sum_rate(m).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let r = optimize_sta(
        obj,
        DESK_N,
        DESK_ACTIVE,
        &desk_fixed(),
        &swarm.with_seed(derive_seed(seed, 1)),
    )
    .unwrap();
    OptimalityRun {
        exhaustive,
        pso: -r.best_cost,
    }
}

/// Movable array with four elements in `±1.5λ`: PSO against a `λ/4` grid.
pub fn desk_mula_run(seed: u64, swarm: &SwarmConfig) -> OptimalityRun {
    let lam = DESK_WAVELENGTH;
    let users = desk_sampler()
        .sample(2, derive_seed(seed, 0))
        .unwrap()
        .users;
    let bounds = (-1.5 * lam, 1.5 * lam);
    let problem = MulaProblem::new(
        lam,
        users,
        bounds,
        4,
        lam / 2.0,
        4,
        desk_power(2),
        RzfConfig::default(),
    )
    .unwrap();
    let grid: Vec<f64> = (0..13).map(|i| bounds.0 + i as f64 * lam / 4.0).collect();
    let mut exhaustive = f64::NEG_INFINITY;
    for a in 0..13 {
        for b in a + 2..13 {
            for c in b + 2..13 {
                for d in c + 2..13 {
                    let r = problem
                        .sum_rate(&[grid[a], grid[b], grid[c], grid[d]])
                        .unwrap();
                    exhaustive = exhaustive.max(r);
                }
            }
        }
    }
    let r = optimize_positions_mula(&problem, &swarm.with_seed(derive_seed(seed, 1))).unwrap();
    OptimalityRun {
        exhaustive,
        pso: -r.best_cost,
    }
}

/// Fraction of runs where `ok(run)` holds, plus the runs.
pub fn hit_rate(runs: &[OptimalityRun], ok: impl Fn(&OptimalityRun) -> bool) -> f64 {
    runs.iter().filter(|r| ok(r)).count() as f64 / runs.len().max(1) as f64
}

pub fn within_rate(r: &OptimalityRun, tol: f64) -> bool {
    r.pso >= (1.0 - tol) * r.exhaustive
}

pub fn within_db(r: &OptimalityRun, tol: f64) -> bool {
    r.pso <= r.exhaustive + tol
}

// ---------------------------------------------------------------------------
// Swarm engine invariants

/// Randomized engine instance.
#[derive(Debug, Clone)]
pub struct EngineCase {
    pub n: usize,
    pub n_active: usize,
    pub fixed: Vec<usize>,
    pub weights: Vec<f64>,
    pub particles: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl EngineCase {
    pub fn random(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(3..40);
        let n_fixed = rng.gen_range(0..=n.min(3));
        let mut fixed: Vec<usize> = Vec::new();
        while fixed.len() < n_fixed {
            let i = rng.gen_range(0..n);
            if !fixed.contains(&i) {
                fixed.push(i);
            }
        }
        Self {
            n,
            n_active: rng.gen_range(n_fixed.max(1)..=n),
            fixed,
            weights: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            particles: rng.gen_range(2..8),
            iterations: rng.gen_range(0..8),
            seed: rng.gen(),
        }
    }
}

/// Runs the swarm step by step and checks feasibility, edge inclusion,
/// position clipping, monotone best cost and seed determinism.
pub fn check_engine_case(case: &EngineCase) -> Result<(), String> {
    let w = case.weights.clone();
    // non-separable cost with an occasional non-finite value
    let objective = move |m: &ThinningVector| -> f64 {
        let s: f64 = m.active_indices().map(|i| w[i]).sum();
        let pairs = m
            .active_indices()
            .filter(|&i| i + 1 < w.len() && m.is_active(i + 1))
            .count();
        if s > 2.5 {
            f64::NAN
        } else {
            (s * 3.0).sin() + 0.1 * pairs as f64
        }
    };
    let problem = MaskProblem::new(case.n, case.n_active, case.fixed.clone(), objective)
        .map_err(|e| e.to_string())?;
    let cfg = SwarmConfig {
        n_particles: case.particles,
        n_iterations: case.iterations,
        seed: case.seed,
        ..SwarmConfig::default()
    };
    let trace = |cfg: &SwarmConfig| -> Result<(Vec<u64>, ThinningVector), String> {
        let mut rng = rng_from_seed(cfg.seed);
        let mut st = SwarmState::init(&problem, cfg, &mut rng).map_err(|e| e.to_string())?;
        let mut bits = Vec::new();
        for it in 0..=cfg.n_iterations {
            if it > 0 {
                st.step(&problem, cfg, &mut rng);
            }
            for p in &st.particles {
                if p.position.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err("position left [0, 1]".into());
                }
                if p.velocity.iter().any(|v| v.abs() > cfg.velocity_clamp) {
                    return Err("velocity exceeds clamp".into());
                }
                let m = problem.decode(&p.position);
                if m.active_count() != case.n_active {
                    return Err(format!(
                        "{} active, expected {}",
                        m.active_count(),
                        case.n_active
                    ));
                }
                if case.fixed.iter().any(|&i| !m.is_active(i)) {
                    return Err("fixed element dropped".into());
                }
                bits.extend(p.position.iter().map(|x| x.to_bits()));
            }
            bits.push(st.global_best_cost.to_bits());
        }
        if st.cost_history.windows(2).any(|h| h[1] > h[0]) {
            return Err("best-cost history increased".into());
        }
        if st.cost_history.len() != cfg.n_iterations + 1 {
            return Err("history length".into());
        }
        Ok((bits, st.global_best))
    };
    let a = trace(&cfg)?;
    let b = trace(&cfg)?;
    if a != b {
        return Err("same seed gave different swarms".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Suite

/// Settings of [`run_oracle_suite`].
#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Seeded runs per desk-scale optimality comparison.
    pub runs: usize,
    pub engine_cases: usize,
    /// Swarm budget for the full-size GTA comparison.
    pub reference_swarm: SwarmConfig,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            runs: 50,
            engine_cases: 500,
            reference_swarm: SwarmConfig {
                n_particles: 20,
                n_iterations: 40,
                ..SwarmConfig::default()
            },
        }
    }
}

fn optimality(
    name: &str,
    runs: &[OptimalityRun],
    rate: f64,
    detail_unit: &str,
) -> Result<String, String> {
    ensure(
        rate >= 0.9,
        format!(
            "{name}: {:.0}% of {} runs within {detail_unit}",
            100.0 * rate,
            runs.len()
        ),
    )
}

pub fn run_oracle_suite(opts: &OracleOptions, log: &dyn Fn(&str)) -> OracleReport {
    let mut report = OracleReport::default();
    let mut step = |name: &str, f: &dyn Fn() -> Result<String, String>| {
        log(name);
        report.push(name, f());
    };
    step("textbook RZF, N = 8, K = 2", &check_textbook_rzf);
    step("hand-computed 2 x 2 SINR", &check_hand_sinr);
    step("response phase, N = 2 endfire", &check_phase_example);
    step("free-space pathloss", &check_pathloss);
    step(
        "channel norm and thinned support",
        &check_channel_norm_and_support,
    );
    step(
        "grating lobes and PSLL closed forms",
        &check_beam_closed_forms,
    );
    step("range foci and far plateau", &check_range_closed_forms);
    step("top-k tie rule", &check_top_k_example);
    step("angular resolution order", &check_resolution_order);

    let swarm = SwarmConfig::default();
    let seeds: Vec<u64> = (0..opts.runs as u64).collect();
    step("STA vs exhaustive, N = 12", &|| {
        let runs: Vec<_> = seeds.iter().map(|&s| desk_sta_run(s, &swarm)).collect();
        optimality(
            "STA",
            &runs,
            hit_rate(&runs, |r| within_rate(r, 0.01)),
            "1%",
        )
    });
    step("GTA vs exhaustive, N = 12", &|| {
        let runs: Vec<_> = seeds.iter().map(|&s| desk_gta_run(s, &swarm)).collect();
        optimality(
            "GTA",
            &runs,
            hit_rate(&runs, |r| within_db(r, 0.1)),
            "0.1 dB",
        )
    });
    step("PTA vs exhaustive, N = 12", &|| {
        let runs: Vec<_> = seeds
            .iter()
            .take(10)
            .map(|&s| desk_pta_run(s, &swarm))
            .collect();
        optimality(
            "PTA",
            &runs,
            hit_rate(&runs, |r| within_rate(r, 0.02)),
            "2%",
        )
    });
    step("MULA vs lambda/4 grid", &|| {
        let runs: Vec<_> = seeds
            .iter()
            .take(10)
            .map(|&s| desk_mula_run(s, &swarm))
            .collect();
        optimality(
            "MULA",
            &runs,
            hit_rate(&runs, |r| within_rate(r, 0.02)),
            "2%",
        )
    });
    step("swarm determinism", &|| {
        let a = desk_sta_run(3, &swarm);
        let b = desk_sta_run(3, &swarm);
        ensure(
            a.pso.to_bits() == b.pso.to_bits(),
            format!("best sum-rate {:.6}", a.pso),
        )
    });
    step("engine invariants", &|| {
        for i in 0..opts.engine_cases {
            let case = EngineCase::random(derive_seed(99, i as u64));
            check_engine_case(&case).map_err(|e| format!("case {i}: {e} ({case:?})"))?;
        }
        Ok(format!("{} random cases", opts.engine_cases))
    });

    let dep = Deployment::reference(0.01).unwrap();
    let reference = opts.reference_swarm;
    let gta_cfg = GtaConfig {
        coverage: [0.0f64, 30.0, -30.0, 60.0, -60.0]
            .iter()
            .map(|d| d.to_radians())
            .collect(),
        ..GtaConfig::default()
    };
    let mut gta_mask = None;
    {
        log("GTA below SULA, N = 320");
        let r = optimize_gta(
            &dep.geometry,
            dep.n_active,
            &dep.fixed(),
            &gta_cfg,
            &reference.with_seed(5),
        );
        let outcome = r.map_err(|e| e.to_string()).and_then(|r| {
            let obj = GtaObjective::new(&dep.geometry, &gta_cfg).map_err(|e| e.to_string())?;
            let g = obj.worst_psll(&r.best).map_err(|e| e.to_string())?;
            let s = obj
                .worst_psll(&dep.sula_mask())
                .map_err(|e| e.to_string())?;
            gta_mask = Some(r.best);
            ensure(g < s, format!("worst PSLL GTA {g:.2} dB, SULA {s:.2} dB"))
        });
        report.push("GTA below SULA, N = 320", outcome);
    }

    let ctx = |k: usize, normalization| EvalContext {
        deployment: dep.clone(),
        power: PowerConfig::from_snr(
            20.0,
            1.0,
            SnrReference {
                pathloss: pathloss(
                    0.01,
                    ScenarioSampler::default_for(&dep.geometry).reference_range(),
                )
                .unwrap(),
                beamforming_gain: 1.0 / (320 * k) as f64,
            },
        )
        .unwrap(),
        rzf: RzfConfig::default(),
        normalization,
        swarm: reference,
        gta: gta_cfg.clone(),
    };
    let sampler = ScenarioSampler::default_for(&dep.geometry);
    {
        log("STA masks vary with the users");
        let c = ctx(16, Normalization::Reference(320));
        let masks: Result<Vec<String>, String> = (0..10)
            .map(|t| {
                let users = sampler
                    .sample(16, derive_seed(21, t))
                    .map_err(|e| e.to_string())?
                    .users;
                c.sta_mask(&users, derive_seed(22, t))
                    .map(|m| m.bit_string())
                    .map_err(|e| e.to_string())
            })
            .collect();
        let outcome = masks.and_then(|m| {
            let distinct = m.iter().collect::<std::collections::HashSet<_>>().len();
            ensure(
                distinct > 1,
                format!("{distinct} distinct masks in 10 trials"),
            )
        });
        report.push("STA masks vary with the users", outcome);
    }
    {
        log("single user, aperture-matched schemes");
        let c = ctx(1, Normalization::OwnCount);
        let pre = Precomputed {
            gta: gta_mask.clone().or_else(|| Some(dep.sula_mask())),
            pta: None,
        };
        let schemes = [
            Scheme::Fula,
            Scheme::Sula,
            Scheme::Sta,
            Scheme::Gta,
            Scheme::Mula,
        ];
        let mut worst: f64 = 0.0;
        let outcome = (|| {
            for t in 0..5 {
                let users = sampler
                    .sample(1, derive_seed(31, t))
                    .map_err(|e| e.to_string())?
                    .users;
                let rates: Vec<f64> = schemes
                    .iter()
                    .map(|&s| {
                        evaluate_scheme(s, &c, &pre, &users, derive_seed(32, t))
                            .map(|o| o.report.sum_rate)
                    })
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
                worst = worst.max(1.0 - lo / hi);
            }
            ensure(worst <= 0.05, format!("largest spread {:.2e}", worst))
        })();
        report.push("single user, aperture-matched schemes", outcome);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_jordan_inverts() {
        let a = vec![
            vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
            vec![C64::new(0.0, -1.0), C64::new(3.0, 0.0)],
        ];
        let inv = invert(a.clone()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: C64 = (0..2).map(|k| a[i][k] * inv[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        assert!(invert(vec![vec![C64::new(0.0, 0.0)]]).is_none());
    }

    #[test]
    fn desk_mask_count() {
        assert_eq!(desk_masks().len(), 45);
    }

    #[test]
    fn closed_form_checks_pass() {
        for (name, r) in [
            ("rzf", check_textbook_rzf()),
            ("hand", check_hand_sinr()),
            ("phase", check_phase_example()),
            ("pathloss", check_pathloss()),
            ("norm", check_channel_norm_and_support()),
            ("topk", check_top_k_example()),
            ("range", check_range_closed_forms()),
        ] {
            assert!(r.is_ok(), "{name}: {r:?}");
        }
    }

    #[test]
    fn engine_cases_hold() {
        for i in 0..100 {
            check_engine_case(&EngineCase::random(i)).unwrap();
        }
    }
}
