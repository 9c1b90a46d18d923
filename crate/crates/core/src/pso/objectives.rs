use alloc::vec;
use alloc::vec::Vec;

use crate::array::{ArrayGeometry, ThinningVector};
use crate::beam::{AngleGrid, PsllEvaluator, DEFAULT_ANGLE_POINTS, DEFAULT_MAINLOBE_KAPPA};
use crate::channel::{channel_column, channel_matrix_for_positions, UserLocation};
use crate::linalg::CMatrix;
use crate::precoder::{evaluate_rzf, PowerConfig, RzfConfig};
use crate::{Error, Result};

use super::{run, MaskObjective, MaskProblem, Problem, SwarmConfig, SwarmResult};

/// Settings of the grating-lobe-aware objective.
#[derive(Debug, Clone, PartialEq)]
pub struct GtaConfig {
    /// Steering angles (radians) whose worst PSLL is minimized.
    pub coverage: Vec<f64>,
    /// PSLL target in dB.
    pub threshold_db: f64,
    /// Penalty per dB of PSLL above the target, summed over coverage angles.
    pub penalty_weight: f64,
    pub kappa: f64,
    pub grid_points: usize,
}

impl Default for GtaConfig {
    fn default() -> Self {
        Self {
            coverage: [0.0f64, 20.0, -20.0, 40.0, -40.0, 60.0, -60.0]
                .iter()
                .map(|d| d.to_radians())
                .collect(),
            threshold_db: -10.0,
            penalty_weight: 10.0,
            kappa: DEFAULT_MAINLOBE_KAPPA,
            grid_points: DEFAULT_ANGLE_POINTS,
        }
    }
}

/// `max_θ PSLL(b, θ) + μ Σ_θ max(0, PSLL(b, θ) − τ)` over the coverage set.
#[derive(Debug, Clone)]
pub struct GtaObjective {
    positions: Vec<f64>,
    evaluator: PsllEvaluator,
    coverage: Vec<f64>,
    threshold_db: f64,
    penalty_weight: f64,
}

impl GtaObjective {
    pub fn new(geom: &ArrayGeometry, cfg: &GtaConfig) -> Result<Self> {
        if cfg.coverage.is_empty() {
            return Err(Error::Empty("coverage angles"));
        }
        if cfg
            .coverage
            .iter()
            .any(|a| !(a.abs() < core::f64::consts::FRAC_PI_2))
        {
            return Err(Error::Domain("coverage angles must lie in (-π/2, π/2)"));
        }
        if !(cfg.penalty_weight >= 0.0) {
            return Err(Error::InvalidConfig("penalty weight must be non-negative"));
        }
        let grid = AngleGrid::uniform_sine(cfg.grid_points)?;
        let evaluator =
            PsllEvaluator::new(grid, geom.wavelength(), geom.aperture_length(), cfg.kappa)?;
        Ok(Self {
            positions: geom.positions().to_vec(),
            evaluator,
            coverage: cfg.coverage.clone(),
            threshold_db: cfg.threshold_db,
            penalty_weight: cfg.penalty_weight,
        })
    }

    /// PSLL in dB at every coverage angle.
    pub fn psll_per_angle(&self, mask: &ThinningVector) -> Result<Vec<f64>> {
        if mask.len() != self.positions.len() {
            return Err(Error::LengthMismatch {
                expected: self.positions.len(),
                found: mask.len(),
            });
        }
        let active: Vec<f64> = mask.active_indices().map(|i| self.positions[i]).collect();
        let mut scratch = vec![0.0; self.evaluator.grid().len()];
        self.coverage
            .iter()
            .map(|&a| {
                self.evaluator
                    .evaluate_with(&active, a, &mut scratch)
                    .map(|r| r.psll_db)
            })
            .collect()
    }

    /// Worst-case PSLL over the coverage set.
    pub fn worst_psll(&self, mask: &ThinningVector) -> Result<f64> {
        Ok(self
            .psll_per_angle(mask)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn evaluate(&self, mask: &ThinningVector) -> Result<f64> {
        let per_angle = self.psll_per_angle(mask)?;
        let worst = per_angle.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let excess: f64 = per_angle
            .iter()
            .map(|&p| (p - self.threshold_db).max(0.0))
            .sum();
        Ok(worst + self.penalty_weight * excess)
    }
}

impl MaskObjective for GtaObjective {
    fn cost(&self, mask: &ThinningVector) -> f64 {
        self.evaluate(mask).unwrap_or(f64::INFINITY)
    }
}

/// Negated RZF sum-rate averaged over one or more channel realizations.
///
/// Channels are stored for every candidate element; a mask only selects
/// rows, so each evaluation costs one `N_T × K` precoder.
#[derive(Debug, Clone)]
pub struct StaObjective {
    channels: Vec<CMatrix>,
    power: PowerConfig,
    rzf: RzfConfig,
}

impl StaObjective {
    /// Single scenario.
    pub fn new(
        geom: &ArrayGeometry,
        users: &[UserLocation],
        norm_count: usize,
        power: PowerConfig,
        rzf: RzfConfig,
    ) -> Result<Self> {
        Self::ensemble(geom, core::slice::from_ref(&users), norm_count, power, rzf)
    }

    /// Average over an ensemble of scenarios (statistical CSI).
    pub fn ensemble<U: AsRef<[UserLocation]>>(
        geom: &ArrayGeometry,
        scenarios: &[U],
        norm_count: usize,
        power: PowerConfig,
        rzf: RzfConfig,
    ) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Empty("scenario ensemble"));
        }
        let channels = scenarios
            .iter()
            .map(|s| full_channel(geom, s.as_ref(), norm_count))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            power,
            rzf,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.channels.len()
    }

    /// Mean sum-rate of the mask.
    pub fn sum_rate(&self, mask: &ThinningVector) -> Result<f64> {
        let active: Vec<usize> = mask.active_indices().collect();
        if active.is_empty() {
            return Err(Error::InvalidMask("no active antennas".into()));
        }
        let mut total = 0.0;
        for h in &self.channels {
            if mask.len() != h.rows() {
                return Err(Error::LengthMismatch {
                    expected: h.rows(),
                    found: mask.len(),
                });
            }
            total += evaluate_rzf(&h.select_rows(&active), &self.power, &self.rzf)?.sum_rate;
        }
        Ok(total / self.channels.len() as f64)
    }
}

impl MaskObjective for StaObjective {
    fn cost(&self, mask: &ThinningVector) -> f64 {
        self.sum_rate(mask).map_or(f64::INFINITY, |r| -r)
    }
}

fn full_channel(
    geom: &ArrayGeometry,
    users: &[UserLocation],
    norm_count: usize,
) -> Result<CMatrix> {
    if users.is_empty() {
        return Err(Error::Empty("user list"));
    }
    let cols = users
        .iter()
        .map(|&u| {
            channel_column(geom.positions(), geom.wavelength(), u, norm_count).map(|(h, _)| h)
        })
        .collect::<Result<Vec<_>>>()?;
    CMatrix::from_columns(&cols)
}

/// Minimizes the worst-case PSLL over the coverage set.
pub fn optimize_gta(
    geom: &ArrayGeometry,
    n_active: usize,
    fixed: &[usize],
    gta: &GtaConfig,
    swarm: &SwarmConfig,
) -> Result<SwarmResult<ThinningVector>> {
    let problem = MaskProblem::new(
        geom.n_elements(),
        n_active,
        fixed.to_vec(),
        GtaObjective::new(geom, gta)?,
    )?;
    run(&problem, swarm)
}

/// Maximizes the (mean) sum-rate of `objective`; the returned cost is the
/// negated sum-rate.
pub fn optimize_sta(
    objective: StaObjective,
    n_elements: usize,
    n_active: usize,
    fixed: &[usize],
    swarm: &SwarmConfig,
) -> Result<SwarmResult<ThinningVector>> {
    let problem = MaskProblem::new(n_elements, n_active, fixed.to_vec(), objective)?;
    run(&problem, swarm)
}

/// Movable array: `n_elements` coordinates inside `bounds` with a minimum gap.
#[derive(Debug, Clone)]
pub struct MulaProblem {
    wavelength: f64,
    users: Vec<UserLocation>,
    bounds: (f64, f64),
    n_elements: usize,
    min_spacing: f64,
    norm_count: usize,
    power: PowerConfig,
    rzf: RzfConfig,
}

impl MulaProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        wavelength: f64,
        users: Vec<UserLocation>,
        bounds: (f64, f64),
        n_elements: usize,
        min_spacing: f64,
        norm_count: usize,
        power: PowerConfig,
        rzf: RzfConfig,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Empty("user list"));
        }
        if n_elements == 0 {
            return Err(Error::Empty("element set"));
        }
        if !(bounds.1 > bounds.0) || !(min_spacing >= 0.0) {
            return Err(Error::Domain(
                "bounds must be increasing and spacing non-negative",
            ));
        }
        if (n_elements - 1) as f64 * min_spacing > bounds.1 - bounds.0 {
            return Err(Error::Infeasible(
                "elements do not fit inside the bounds at the minimum spacing",
            ));
        }
        Ok(Self {
            wavelength,
            users,
            bounds,
            n_elements,
            min_spacing,
            norm_count,
            power,
            rzf,
        })
    }

    pub fn sum_rate(&self, positions: &[f64]) -> Result<f64> {
        let h =
            channel_matrix_for_positions(positions, self.wavelength, &self.users, self.norm_count)?;
        Ok(evaluate_rzf(&h.entries, &self.power, &self.rzf)?.sum_rate)
    }
}

/// Sorts `positions` and moves them the least amount needed (one sweep each
/// way) so that neighbours are at least `gap` apart inside `[lo, hi]`.
/// Requires `(n − 1)·gap ≤ hi − lo`.
pub fn project_positions(positions: &mut [f64], lo: f64, hi: f64, gap: f64) {
    positions.sort_by(f64::total_cmp);
    let n = positions.len();
    if n == 0 {
        return;
    }
    positions[0] = positions[0].max(lo);
    for i in 1..n {
        positions[i] = positions[i].max(positions[i - 1] + gap);
    }
    if positions[n - 1] > hi {
        positions[n - 1] = hi;
        for i in (0..n - 1).rev() {
            positions[i] = positions[i].min(positions[i + 1] - gap);
        }
    }
}

impl Problem for MulaProblem {
    type Solution = Vec<f64>;

    fn dimension(&self) -> usize {
        self.n_elements
    }

    fn decode(&self, position: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds;
        let mut p: Vec<f64> = position.iter().map(|&x| lo + x * (hi - lo)).collect();
        project_positions(&mut p, lo, hi, self.min_spacing);
        p
    }

    fn cost(&self, solution: &Vec<f64>) -> f64 {
        self.sum_rate(solution).map_or(f64::INFINITY, |r| -r)
    }
}

pub fn optimize_positions_mula(
    problem: &MulaProblem,
    swarm: &SwarmConfig,
) -> Result<SwarmResult<Vec<f64>>> {
    run(problem, swarm)
}
