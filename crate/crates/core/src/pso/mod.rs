//! Particle swarm optimization with continuous relaxation.
//!
//! Particles live in `[0, 1]^d`. A [`Problem`] decodes a position into a
//! candidate solution (a thinning mask via [`top_k_binarize`], or element
//! coordinates for a movable array) and scores it; the engine minimizes.
//!
//! Updates are synchronous: velocities for iteration `t + 1` use the global
//! best of iteration `t`, all random draws are taken in particle order, and
//! personal/global bests are updated in particle order once every particle
//! has been evaluated. Bests only move on strict improvement.

mod objectives;

pub use objectives::*;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::array::ThinningVector;
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Result};

/// Inertia weight schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inertia {
    Constant(f64),
    /// Linear decay from `start` at the first update to `end` at the last.
    Linear {
        start: f64,
        end: f64,
    },
}

impl Inertia {
    pub fn at(&self, iteration: usize, n_iterations: usize) -> f64 {
        match *self {
            Inertia::Constant(w) => w,
            Inertia::Linear { start, end } => {
                if n_iterations <= 1 {
                    start
                } else {
                    let t = (iteration.min(n_iterations - 1)) as f64 / (n_iterations - 1) as f64;
                    start + (end - start) * t
                }
            }
        }
    }

    fn is_valid(&self) -> bool {
        let ok = |w: f64| (0.0..=1.0).contains(&w);
        match *self {
            Inertia::Constant(w) => ok(w),
            Inertia::Linear { start, end } => ok(start) && ok(end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub inertia: Inertia,
    pub cognitive: f64,
    pub social: f64,
    /// Per-dimension bound on `|v|`.
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 50,
            n_iterations: 100,
            inertia: Inertia::Linear {
                start: 0.9,
                end: 0.4,
            },
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.2,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidConfig("at least two particles are required"));
        }
        if !self.inertia.is_valid() {
            return Err(Error::InvalidConfig("inertia weight must lie in [0, 1]"));
        }
        // Zero coefficients are allowed so that degenerate swarms can be built.
        if !(self.cognitive >= 0.0) || !(self.social >= 0.0) {
            return Err(Error::InvalidConfig(
                "acceleration coefficients must be non-negative",
            ));
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(Error::InvalidConfig("velocity clamp must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Something the swarm can minimize.
pub trait Problem {
    type Solution: Clone;

    /// Dimension of the particle positions.
    fn dimension(&self) -> usize;

    /// Maps a position in `[0, 1]^d` to a candidate.
    fn decode(&self, position: &[f64]) -> Self::Solution;

    /// Cost of a candidate; lower is better.
    fn cost(&self, solution: &Self::Solution) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub cost: f64,
    pub best_position: Vec<f64>,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState<S> {
    pub particles: Vec<Particle>,
    pub global_best_position: Vec<f64>,
    pub global_best_cost: f64,
    pub global_best: S,
    /// Global best cost after initialization and after every iteration.
    pub cost_history: Vec<f64>,
    pub iteration: usize,
    pub evaluations: usize,
    /// Evaluations whose cost was not finite (scored as `+∞`).
    pub non_finite: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmResult<S> {
    pub best: S,
    pub best_cost: f64,
    pub best_position: Vec<f64>,
    pub cost_history: Vec<f64>,
    pub evaluations: usize,
    pub non_finite: usize,
}

fn evaluate<P: Problem>(
    problem: &P,
    position: &[f64],
    non_finite: &mut usize,
) -> (P::Solution, f64) {
    let solution = problem.decode(position);
    let cost = problem.cost(&solution);
    if cost.is_finite() {
        (solution, cost)
    } else {
        *non_finite += 1;
        (solution, f64::INFINITY)
    }
}

impl<S: Clone> SwarmState<S> {
    /// Random positions in `[0, 1]^d` and velocities in `±clamp`.
    pub fn init<P: Problem<Solution = S>>(
        problem: &P,
        cfg: &SwarmConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = problem.dimension();
        let positions: Vec<Vec<f64>> = (0..cfg.n_particles)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Self::from_positions(problem, cfg, positions, rng)
    }

    /// Swarm seeded at the given positions (clipped to `[0, 1]`).
    pub fn from_positions<P: Problem<Solution = S>>(
        problem: &P,
        cfg: &SwarmConfig,
        mut positions: Vec<Vec<f64>>,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = problem.dimension();
        if positions.len() != cfg.n_particles {
            return Err(Error::LengthMismatch {
                expected: cfg.n_particles,
                found: positions.len(),
            });
        }
        let mut non_finite = 0;
        let mut particles = Vec::with_capacity(positions.len());
        let mut best: Option<(usize, S, f64)> = None;
        for (i, x) in positions.iter_mut().enumerate() {
            if x.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
            for v in x.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let velocity = (0..d)
                .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * cfg.velocity_clamp)
                .collect();
            let (solution, cost) = evaluate(problem, x, &mut non_finite);
            if best.as_ref().is_none_or(|b| cost < b.2) {
                best = Some((i, solution, cost));
            }
            particles.push(Particle {
                position: x.clone(),
                velocity,
                cost,
                best_position: x.clone(),
                best_cost: cost,
            });
        }
        let (gi, global_best, global_best_cost) =
            best.ok_or(Error::InvalidConfig("empty swarm"))?;
        Ok(Self {
            global_best_position: particles[gi].position.clone(),
            global_best_cost,
            global_best,
            cost_history: vec![global_best_cost],
            iteration: 0,
            evaluations: particles.len(),
            non_finite,
            particles,
        })
    }

    /// One synchronous swarm iteration.
    pub fn step<P: Problem<Solution = S>>(
        &mut self,
        problem: &P,
        cfg: &SwarmConfig,
        rng: &mut Rng,
    ) {
        let w = cfg.inertia.at(self.iteration, cfg.n_iterations);
        let gbest = &self.global_best_position;
        for p in &mut self.particles {
            let u1: f64 = rng.gen();
            let u2: f64 = rng.gen();
            for j in 0..p.position.len() {
                let x = p.position[j];
                let v = w * p.velocity[j]
                    + cfg.cognitive * u1 * (p.best_position[j] - x)
                    + cfg.social * u2 * (gbest[j] - x);
                let v = v.clamp(-cfg.velocity_clamp, cfg.velocity_clamp);
                p.velocity[j] = v;
                p.position[j] = (x + v).clamp(0.0, 1.0);
            }
        }
        let evaluated: Vec<(S, f64)> = self
            .particles
            .iter()
            .map(|p| evaluate(problem, &p.position, &mut self.non_finite))
            .collect();
        self.evaluations += evaluated.len();
        for (p, (solution, cost)) in self.particles.iter_mut().zip(evaluated) {
            p.cost = cost;
            if cost < p.best_cost {
                p.best_cost = cost;
                p.best_position.clone_from(&p.position);
            }
            if cost < self.global_best_cost {
                self.global_best_cost = cost;
                self.global_best_position.clone_from(&p.position);
                self.global_best = solution;
            }
        }
        self.cost_history.push(self.global_best_cost);
        self.iteration += 1;
    }

    pub fn into_result(self) -> SwarmResult<S> {
        SwarmResult {
            best: self.global_best,
            best_cost: self.global_best_cost,
            best_position: self.global_best_position,
            cost_history: self.cost_history,
            evaluations: self.evaluations,
            non_finite: self.non_finite,
        }
    }
}

/// Free-function form of [`SwarmState::step`].
pub fn pso_step<P: Problem>(
    state: &mut SwarmState<P::Solution>,
    problem: &P,
    cfg: &SwarmConfig,
    rng: &mut Rng,
) {
    state.step(problem, cfg, rng);
}

/// Runs `cfg.n_iterations` iterations from a random start seeded by `cfg.seed`.
pub fn run<P: Problem>(problem: &P, cfg: &SwarmConfig) -> Result<SwarmResult<P::Solution>> {
    let mut rng = rng_from_seed(cfg.seed);
    let mut state = SwarmState::init(problem, cfg, &mut rng)?;
    for _ in 0..cfg.n_iterations {
        state.step(problem, cfg, &mut rng);
    }
    Ok(state.into_result())
}

/// Activates every index in `fixed` plus the `n_active − |fixed|` variable
/// indices with the largest priorities. Variable indices are the complement
/// of `fixed` in ascending order; ties go to the lower index.
pub fn top_k_binarize(
    priorities: &[f64],
    n_elements: usize,
    n_active: usize,
    fixed: &[usize],
) -> Result<ThinningVector> {
    let variable = variable_indices(n_elements, fixed)?;
    if priorities.len() != variable.len() {
        return Err(Error::LengthMismatch {
            expected: variable.len(),
            found: priorities.len(),
        });
    }
    let n_fixed = n_elements - variable.len();
    if n_active > n_elements || n_active < n_fixed {
        return Err(Error::Infeasible("active count must lie between |F| and N"));
    }
    let mut order: Vec<usize> = (0..variable.len()).collect();
    order.sort_by(|&a, &b| priorities[b].total_cmp(&priorities[a]).then(a.cmp(&b)));
    let mut mask = vec![false; n_elements];
    for &i in fixed {
        mask[i] = true;
    }
    for &slot in &order[..n_active - n_fixed] {
        mask[variable[slot]] = true;
    }
    ThinningVector::new(mask, fixed.to_vec())
}

/// Complement of `fixed` in `0..n`, ascending.
pub fn variable_indices(n_elements: usize, fixed: &[usize]) -> Result<Vec<usize>> {
    let mut is_fixed = vec![false; n_elements];
    for &i in fixed {
        if i >= n_elements {
            return Err(Error::InvalidMask(alloc::format!(
                "fixed index {i} out of range"
            )));
        }
        is_fixed[i] = true;
    }
    Ok((0..n_elements).filter(|&i| !is_fixed[i]).collect())
}

/// Cost of a binary mask.
pub trait MaskObjective {
    fn cost(&self, mask: &ThinningVector) -> f64;
}

impl<F: Fn(&ThinningVector) -> f64> MaskObjective for F {
    fn cost(&self, mask: &ThinningVector) -> f64 {
        self(mask)
    }
}

/// Thinning problem: exactly `n_active` of `n_elements` on, `fixed` always on.
#[derive(Debug, Clone)]
pub struct MaskProblem<O> {
    n_elements: usize,
    n_active: usize,
    fixed: Vec<usize>,
    n_variable: usize,
    pub objective: O,
}

impl<O: MaskObjective> MaskProblem<O> {
    pub fn new(
        n_elements: usize,
        n_active: usize,
        mut fixed: Vec<usize>,
        objective: O,
    ) -> Result<Self> {
        fixed.sort_unstable();
        fixed.dedup();
        let n_variable = variable_indices(n_elements, &fixed)?.len();
        if n_active > n_elements {
            return Err(Error::Infeasible("more active elements than elements"));
        }
        if n_active < fixed.len() {
            return Err(Error::Infeasible(
                "fewer active elements than fixed elements",
            ));
        }
        Ok(Self {
            n_elements,
            n_active,
            fixed,
            n_variable,
            objective,
        })
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }
}

impl<O: MaskObjective> Problem for MaskProblem<O> {
    type Solution = ThinningVector;

    fn dimension(&self) -> usize {
        self.n_variable
    }

    fn decode(&self, position: &[f64]) -> ThinningVector {
        top_k_binarize(position, self.n_elements, self.n_active, &self.fixed)
            .expect("validated at construction")
    }

    fn cost(&self, solution: &ThinningVector) -> f64 {
        self.objective.cost(solution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn top_k_sorted_input() {
        let x: Vec<f64> = (0..8).map(|i| 1.0 - i as f64 * 0.1).collect();
        let b = top_k_binarize(&x, 10, 5, &[0, 9]).unwrap();
        assert_eq!(b.bit_string(), "1111000001");
    }

    #[test]
    fn top_k_ties_pick_lowest_index() {
        let b = top_k_binarize(&[0.5; 8], 10, 4, &[0, 9]).unwrap();
        assert_eq!(b.bit_string(), "1110000001");
    }

    #[test]
    fn top_k_hand_example() {
        // Variable indices {1,2,3,4}; the two 0.9 priorities sit on elements 2 and 3.
        let b = top_k_binarize(&[0.2, 0.9, 0.9, 0.1], 6, 4, &[0, 5]).unwrap();
        let active: Vec<usize> = b.active_indices().collect();
        assert_eq!(active, vec![0, 2, 3, 5]);
    }

    #[test]
    fn top_k_errors() {
        assert!(top_k_binarize(&[0.1; 4], 6, 7, &[0, 5]).is_err());
        assert!(top_k_binarize(&[0.1; 4], 6, 1, &[0, 5]).is_err());
        assert!(top_k_binarize(&[0.1; 3], 6, 3, &[0, 5]).is_err());
        assert!(MaskProblem::new(6, 1, vec![0, 5], |_: &ThinningVector| 0.0).is_err());
    }

    /// Separable surrogate: prefer low indices.
    fn index_cost(b: &ThinningVector) -> f64 {
        b.active_indices().map(|i| i as f64).sum()
    }

    #[test]
    fn frozen_swarm_keeps_its_best() {
        let problem = MaskProblem::new(12, 4, vec![0, 11], index_cost).unwrap();
        let cfg = SwarmConfig {
            n_particles: 6,
            n_iterations: 20,
            inertia: Inertia::Constant(0.0),
            cognitive: 0.0,
            social: 0.0,
            ..SwarmConfig::default()
        };
        let mut rng = rng_from_seed(1);
        let mut state = SwarmState::init(&problem, &cfg, &mut rng).unwrap();
        state.step(&problem, &cfg, &mut rng);
        let frozen: Vec<Vec<f64>> = state.particles.iter().map(|p| p.position.clone()).collect();
        for _ in 0..5 {
            state.step(&problem, &cfg, &mut rng);
        }
        for (p, x) in state.particles.iter().zip(&frozen) {
            assert_eq!(&p.position, x);
            assert!(p.velocity.iter().all(|&v| v == 0.0));
        }
        let h = &state.cost_history;
        assert!(h[1..].iter().all(|&c| c == h[1]));
    }

    #[test]
    fn swarm_started_at_optimum_reports_it_immediately() {
        let problem = MaskProblem::new(12, 4, vec![0, 11], index_cost).unwrap();
        let cfg = SwarmConfig {
            n_particles: 4,
            ..SwarmConfig::default()
        };
        // Priorities favouring elements 1 and 2.
        let mut best = vec![0.0; 10];
        best[0] = 1.0;
        best[1] = 1.0;
        let mut rng = rng_from_seed(3);
        let state = SwarmState::from_positions(&problem, &cfg, vec![best; 4], &mut rng).unwrap();
        assert_eq!(state.global_best_cost, 0.0 + 1.0 + 2.0 + 11.0);
        assert_eq!(state.cost_history[0], 14.0);
    }

    #[test]
    fn non_finite_costs_are_flagged() {
        let problem = MaskProblem::new(
            6,
            3,
            vec![0],
            |b: &ThinningVector| if b.is_active(1) { f64::NAN } else { 1.0 },
        )
        .unwrap();
        let r = run(
            &problem,
            &SwarmConfig {
                n_particles: 8,
                n_iterations: 5,
                ..SwarmConfig::default()
            },
        )
        .unwrap();
        assert!(r.non_finite > 0);
        assert_eq!(r.best_cost, 1.0);
        assert!(!r.best.is_active(1));
    }

    #[test]
    fn config_validation() {
        let base = SwarmConfig::default();
        assert!(base.validate().is_ok());
        assert!(SwarmConfig {
            n_particles: 1,
            ..base
        }
        .validate()
        .is_err());
        assert!(SwarmConfig {
            inertia: Inertia::Constant(1.5),
            ..base
        }
        .validate()
        .is_err());
        assert!(SwarmConfig {
            cognitive: -1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(SwarmConfig {
            velocity_clamp: 0.0,
            ..base
        }
        .validate()
        .is_err());
        assert_eq!(
            Inertia::Linear {
                start: 0.9,
                end: 0.4
            }
            .at(0, 100),
            0.9
        );
        assert!(
            (Inertia::Linear {
                start: 0.9,
                end: 0.4
            }
            .at(99, 100)
                - 0.4)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn finds_optimum_of_separable_surrogate() {
        let problem = MaskProblem::new(20, 6, vec![0, 19], index_cost).unwrap();
        let r = run(&problem, &SwarmConfig::default()).unwrap();
        assert_eq!(r.best.bit_string(), "11111000000000000001");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn top_k_is_feasible(x in proptest::collection::vec(0.0f64..1.0, 14), k in 2usize..16) {
            let b = top_k_binarize(&x, 16, k, &[0, 15]).unwrap();
            prop_assert_eq!(b.active_count(), k);
            prop_assert!(b.is_active(0) && b.is_active(15));
        }
    }
}
