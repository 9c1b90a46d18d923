//! Beam patterns in angle and range, grating-lobe predictions and peak
//! sidelobe level.
//!
//! Angle-domain patterns are sampled in `u = sinθ`. All gains are linear
//! `|·|²` values; the divisor of the array factor is recorded with every
//! pattern.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::{check_len, ArrayGeometry, FocusPoint, ThinningVector};
use crate::{Error, Result, C64};

/// Default number of angle samples over `u ∈ [-1, 1]`.
pub const DEFAULT_ANGLE_POINTS: usize = 8192;
/// Default number of log-spaced range samples.
pub const DEFAULT_RANGE_POINTS: usize = 4096;
/// Default mainlobe exclusion half-width in units of `λ/D`.
pub const DEFAULT_MAINLOBE_KAPPA: f64 = 1.0;
/// Floor used when converting gains to dB for presentation.
pub const DB_FLOOR: f64 = -80.0;

/// Samples of `u = sinθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    sines: Vec<f64>,
    /// `(start, step)` when the samples are equally spaced.
    uniform: Option<(f64, f64)>,
}

impl AngleGrid {
    /// `n` equally spaced samples of `u` over `[-1, 1]`, endpoints included.
    pub fn uniform_sine(n: usize) -> Result<Self> {
        Self::uniform_sine_between(-1.0, 1.0, n)
    }

    pub fn uniform_sine_between(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) || lo < -1.0 || hi > 1.0 {
            return Err(Error::Empty("angle grid"));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let sines = (0..n).map(|i| lo + step * i as f64).collect();
        Ok(Self {
            sines,
            uniform: Some((lo, step)),
        })
    }

    /// `n` samples uniform in θ (radians) between `lo` and `hi`.
    pub fn uniform_angle(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) || lo < -FRAC_PI_2 || hi > FRAC_PI_2 {
            return Err(Error::Empty("angle grid"));
        }
        let step = (hi - lo) / (n - 1) as f64;
        Self::from_sines((0..n).map(|i| (lo + step * i as f64).sin()).collect())
    }

    pub fn from_sines(sines: Vec<f64>) -> Result<Self> {
        if sines.is_empty() {
            return Err(Error::Empty("angle grid"));
        }
        if sines.iter().any(|u| !(u.abs() <= 1.0)) {
            return Err(Error::Domain("grid sines must lie in [-1, 1]"));
        }
        Ok(Self {
            sines,
            uniform: None,
        })
    }

    pub fn sines(&self) -> &[f64] {
        &self.sines
    }

    pub fn angles(&self) -> Vec<f64> {
        self.sines.iter().map(|u| u.asin()).collect()
    }

    pub fn len(&self) -> usize {
        self.sines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sines.is_empty()
    }

    /// Largest spacing between neighbouring samples.
    pub fn resolution(&self) -> f64 {
        match self.uniform {
            Some((_, step)) => step,
            None => self
                .sines
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// Samples of range in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeGrid {
    ranges: Vec<f64>,
}

impl RangeGrid {
    /// `n` log-spaced ranges from `lo` to `hi` inclusive.
    pub fn log(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo > 0.0) || !(hi > lo) {
            return Err(Error::Empty("range grid"));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / (n - 1) as f64;
        let mut ranges: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
        ranges[0] = lo;
        ranges[n - 1] = hi;
        Ok(Self { ranges })
    }

    pub fn linear(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo > 0.0) || !(hi > lo) {
            return Err(Error::Empty("range grid"));
        }
        let step = (hi - lo) / (n - 1) as f64;
        Self::from_ranges((0..n).map(|i| lo + step * i as f64).collect())
    }

    pub fn from_ranges(ranges: Vec<f64>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Empty("range grid"));
        }
        if ranges.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::Domain("grid ranges must be positive and finite"));
        }
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Divisor of the array factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainDivisor {
    /// Total element count `N` (full array peaks at 1).
    #[default]
    Total,
    /// Active element count `N_T` (any mask peaks at 1).
    Active,
}

impl GainDivisor {
    fn count(self, b: &ThinningVector) -> usize {
        match self {
            GainDivisor::Total => b.len(),
            GainDivisor::Active => b.active_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternAxis {
    /// Samples of `sinθ`.
    Sine(Vec<f64>),
    /// Ranges in meters.
    Range(Vec<f64>),
}

impl PatternAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            PatternAxis::Sine(v) | PatternAxis::Range(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub axis: PatternAxis,
    /// Linear gain samples.
    pub values: Vec<f64>,
    pub focus: FocusPoint,
    /// Divisor used inside `|·|²`.
    pub divisor: usize,
}

impl BeamPattern {
    pub fn values_db(&self) -> Vec<f64> {
        self.values.iter().map(|&g| to_db(g)).collect()
    }

    /// Index and value of the largest sample.
    pub fn peak(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
    }
}

/// Gain in dB with the presentation floor applied.
pub fn to_db(gain: f64) -> f64 {
    if gain > 0.0 {
        (10.0 * gain.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

fn wavenumber(wavelength: f64) -> f64 {
    2.0 * PI / wavelength
}

fn active_positions(geom: &ArrayGeometry, b: &ThinningVector) -> Result<Vec<f64>> {
    check_len(geom.n_elements(), b.len())?;
    Ok(b.active_indices().map(|i| geom.positions()[i]).collect())
}

/// `|Σ_n exp(j·k·ρ_n·(u − u0))|²` at a single `u`.
fn af_power(positions: &[f64], k: f64, x: f64) -> f64 {
    positions
        .iter()
        .map(|&rho| C64::from_polar(1.0, k * rho * x))
        .sum::<C64>()
        .norm_sqr()
}

/// Unnormalized array factor power over a grid, written into `out`.
fn af_power_grid(positions: &[f64], k: f64, u0: f64, grid: &AngleGrid, out: &mut [f64]) {
    match grid.uniform {
        Some((start, step)) => {
            // Per-element phasor recurrence, reseeded every block to bound drift.
            const BLOCK: usize = 64;
            let n = grid.len();
            let mut acc = vec![C64::new(0.0, 0.0); n];
            for &rho in positions {
                let rot = C64::from_polar(1.0, k * rho * step);
                let mut i = 0;
                while i < n {
                    let mut z = C64::from_polar(1.0, k * rho * (start + step * i as f64 - u0));
                    let end = (i + BLOCK).min(n);
                    for a in &mut acc[i..end] {
                        *a += z;
                        z *= rot;
                    }
                    i = end;
                }
            }
            for (o, a) in out.iter_mut().zip(acc) {
                *o = a.norm_sqr();
            }
        }
        None => {
            for (o, &u) in out.iter_mut().zip(&grid.sines) {
                *o = af_power(positions, k, u - u0);
            }
        }
    }
}

/// Thinned angle-domain array factor `|1/M Σ b_n e^{jkρ_n(sinθ − sinθ̄)}|²`.
pub fn angle_pattern(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    focus_angle: f64,
    grid: &AngleGrid,
    divisor: GainDivisor,
) -> Result<BeamPattern> {
    if grid.is_empty() {
        return Err(Error::Empty("angle grid"));
    }
    let focus = FocusPoint::new(focus_angle, f64::INFINITY)?;
    let pos = active_positions(geom, b)?;
    let m = divisor.count(b).max(1);
    let mut values = vec![0.0; grid.len()];
    af_power_grid(
        &pos,
        wavenumber(geom.wavelength()),
        focus_angle.sin(),
        grid,
        &mut values,
    );
    let scale = 1.0 / (m as f64 * m as f64);
    for v in &mut values {
        *v *= scale;
    }
    Ok(BeamPattern {
        axis: PatternAxis::Sine(grid.sines.clone()),
        values,
        focus,
        divisor: m,
    })
}

/// Range-domain pattern at fixed angle,
/// `|1/M Σ b_n exp(-j·2π/λ·ρ_n²·cos²θ·r_eff)|²` with `r_eff = |(r − r_f)/(2 r r_f)|`.
pub fn range_pattern(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    focus: FocusPoint,
    grid: &RangeGrid,
    divisor: GainDivisor,
) -> Result<BeamPattern> {
    if grid.is_empty() {
        return Err(Error::Empty("range grid"));
    }
    let pos = active_positions(geom, b)?;
    let m = divisor.count(b).max(1);
    let k = wavenumber(geom.wavelength());
    let cos2 = focus.angle.cos().powi(2);
    let scale = 1.0 / (m as f64 * m as f64);
    let rf = focus.range;
    let values = grid
        .ranges
        .iter()
        .map(|&r| {
            let r_eff = ((r - rf) / (2.0 * r * rf)).abs();
            let c = -k * cos2 * r_eff;
            pos.iter()
                .map(|&rho| C64::from_polar(1.0, c * rho * rho))
                .sum::<C64>()
                .norm_sqr()
                * scale
        })
        .collect();
    Ok(BeamPattern {
        axis: PatternAxis::Range(grid.ranges.clone()),
        values,
        focus,
        divisor: m,
    })
}

/// Angle × range gain map `|a^H(θ̄, r_f) (b ⊙ a(θ, r))|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern2d {
    /// Angles in radians.
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    /// Row-major: `values[ri * angles.len() + ai]`.
    pub values: Vec<f64>,
    pub focus: FocusPoint,
    pub divisor: usize,
}

impl Pattern2d {
    pub fn at(&self, range_index: usize, angle_index: usize) -> f64 {
        self.values[range_index * self.angles.len() + angle_index]
    }

    /// Gains along one range row.
    pub fn row(&self, range_index: usize) -> &[f64] {
        let n = self.angles.len();
        &self.values[range_index * n..(range_index + 1) * n]
    }

    /// Gains along one angle column.
    pub fn column(&self, angle_index: usize) -> Vec<f64> {
        (0..self.ranges.len())
            .map(|r| self.at(r, angle_index))
            .collect()
    }
}

/// Full near-field inner-product pattern over an angle × range grid. The map
/// is evaluated one range row at a time.
pub fn pattern_2d(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    focus: FocusPoint,
    angles: &[f64],
    ranges: &RangeGrid,
    divisor: GainDivisor,
) -> Result<Pattern2d> {
    if angles.is_empty() {
        return Err(Error::Empty("angle grid"));
    }
    if angles.iter().any(|t| !(t.abs() < FRAC_PI_2)) {
        return Err(Error::Domain("pattern angles must lie in (-pi/2, pi/2)"));
    }
    let pos = active_positions(geom, b)?;
    let m = divisor.count(b).max(1);
    let k = wavenumber(geom.wavelength());
    let scale = 1.0 / (m as f64 * m as f64);
    let (sf, cf) = focus.angle.sin_cos();
    let focus_curv = cf * cf / (2.0 * focus.range);
    let mut values = Vec::with_capacity(angles.len() * ranges.len());
    let trig: Vec<(f64, f64)> = angles.iter().map(|t| t.sin_cos()).collect();
    for &r in &ranges.ranges {
        for &(s, c) in &trig {
            let curv = c * c / (2.0 * r);
            // conj(a_n(θ̄, r_f))·a_n(θ, r) phase
            let acc: C64 = pos
                .iter()
                .map(|&rho| {
                    let phase = k * (rho * (sf - s) - rho * rho * (focus_curv - curv));
                    C64::from_polar(1.0, phase)
                })
                .sum();
            values.push(acc.norm_sqr() * scale);
        }
    }
    Ok(Pattern2d {
        angles: angles.to_vec(),
        ranges: ranges.ranges.clone(),
        values,
        focus,
        divisor: m,
    })
}

/// One grating-lobe order `sinθ_q = sinθ̄ + qλ/d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingLobe {
    pub order: i32,
    pub sine: f64,
    /// Angle in radians, `None` when `|sine| >= 1`.
    pub angle: Option<f64>,
}

impl GratingLobe {
    pub fn visible(&self) -> bool {
        self.angle.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GratingLobePrediction {
    /// Visible orders sorted by angle, followed by nothing else.
    pub lobes: Vec<GratingLobe>,
    /// First invisible order on each side (negative, positive).
    pub nearest_invisible: Vec<GratingLobe>,
}

impl GratingLobePrediction {
    pub fn orders(&self) -> Vec<i32> {
        self.lobes.iter().map(|l| l.order).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.lobes.iter().filter_map(|l| l.angle).collect()
    }
}

/// All visible grating-lobe orders `q ≠ 0` for spacing `d`.
pub fn grating_lobe_angles(
    spacing: f64,
    wavelength: f64,
    focus_angle: f64,
) -> Result<GratingLobePrediction> {
    if !(spacing > 0.0) || !(wavelength > 0.0) {
        return Err(Error::Domain("spacing and wavelength must be positive"));
    }
    let u0 = focus_angle.sin();
    let step = wavelength / spacing;
    let lobe = |q: i32| {
        let sine = u0 + q as f64 * step;
        // Exact fractions such as q/2 land on ±1 up to rounding.
        // Those endfire points are not counted as visible lobes.
        let sine = if (sine.abs() - 1.0).abs() < 1e-12 {
            sine.signum()
        } else {
            sine
        };
        GratingLobe {
            order: q,
            sine,
            angle: (sine.abs() < 1.0).then(|| sine.asin()),
        }
    };
    let q_max = (2.0 / step).ceil() as i32 + 1;
    let mut lobes: Vec<GratingLobe> = (-q_max..=q_max)
        .filter(|&q| q != 0)
        .map(lobe)
        .filter(|l| l.visible())
        .collect();
    lobes.sort_by(|a, b| a.sine.total_cmp(&b.sine));
    let lowest = lobes.iter().map(|l| l.order).min().unwrap_or(0).min(0);
    let highest = lobes.iter().map(|l| l.order).max().unwrap_or(0).max(0);
    let nearest_invisible = vec![lobe(lowest - 1), lobe(highest + 1)]
        .into_iter()
        .filter(|l| !l.visible())
        .collect();
    Ok(GratingLobePrediction {
        lobes,
        nearest_invisible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeCandidateKind {
    /// `q = 0`, the focus itself.
    SelfFocus,
    /// `r_q < 0` (or undefined).
    Negative,
    /// Positive but below the minimum physical range supplied by the caller.
    TooClose,
    /// Positive range at or beyond the minimum.
    Candidate,
}

/// Range where the quadratic phase step equals `2πq`. These points are not
/// lobes: the phase grows with `n²`, so the elements do not add coherently
/// the way they do at an angular grating lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeLobeCandidate {
    pub order: i32,
    pub range: f64,
    pub kind: RangeCandidateKind,
}

/// `r_q = r_f d² cos²θ / (d² cos²θ + 2 q r_f λ)` for each order.
pub fn range_lobe_candidates(
    spacing: f64,
    wavelength: f64,
    focus: FocusPoint,
    orders: &[i32],
    min_physical_range: f64,
) -> Vec<RangeLobeCandidate> {
    let dc = spacing * spacing * focus.angle.cos().powi(2);
    orders
        .iter()
        .map(|&q| {
            let range = focus.range * dc / (dc + 2.0 * q as f64 * focus.range * wavelength);
            let kind = if q == 0 {
                RangeCandidateKind::SelfFocus
            } else if !(range > 0.0) || !range.is_finite() {
                RangeCandidateKind::Negative
            } else if range < min_physical_range {
                RangeCandidateKind::TooClose
            } else {
                RangeCandidateKind::Candidate
            };
            RangeLobeCandidate {
                order: q,
                range,
                kind,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsllResult {
    pub psll_db: f64,
    /// Angle (radians) of the strongest sample in the sidelobe region.
    pub worst_sidelobe_angle: f64,
    /// Half-width of the excluded mainlobe region in `sinθ`.
    pub mainlobe_exclusion_halfwidth: f64,
}

/// Reusable PSLL evaluation over a fixed grid.
#[derive(Debug, Clone)]
pub struct PsllEvaluator {
    grid: AngleGrid,
    halfwidth: f64,
    wavenumber: f64,
    scratch_len: usize,
}

impl PsllEvaluator {
    /// Exclusion half-width `kappa·λ/D` for the given aperture.
    pub fn new(grid: AngleGrid, wavelength: f64, aperture: f64, kappa: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Empty("angle grid"));
        }
        if !(aperture > 0.0) || !(kappa >= 0.0) {
            return Err(Error::Domain(
                "aperture must be positive and kappa non-negative",
            ));
        }
        let n = grid.len();
        Ok(Self {
            grid,
            halfwidth: kappa * wavelength / aperture,
            wavenumber: wavenumber(wavelength),
            scratch_len: n,
        })
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    /// PSLL of the elements at `positions` steered to `focus_angle`.
    pub fn evaluate(&self, positions: &[f64], focus_angle: f64) -> Result<PsllResult> {
        let mut scratch = vec![0.0; self.scratch_len];
        self.evaluate_with(positions, focus_angle, &mut scratch)
    }

    pub(crate) fn evaluate_with(
        &self,
        positions: &[f64],
        focus_angle: f64,
        scratch: &mut [f64],
    ) -> Result<PsllResult> {
        let u0 = focus_angle.sin();
        let main = af_power(positions, self.wavenumber, 0.0);
        if !(main > 0.0) {
            return Err(Error::DegenerateMainlobe);
        }
        af_power_grid(positions, self.wavenumber, u0, &self.grid, scratch);
        let mut worst: Option<(f64, f64)> = None;
        for (&u, &g) in self.grid.sines.iter().zip(scratch.iter()) {
            if (u - u0).abs() < self.halfwidth {
                continue;
            }
            if worst.is_none_or(|(_, w)| g > w) {
                worst = Some((u, g));
            }
        }
        let (u, g) = worst.ok_or(Error::Empty("sidelobe region"))?;
        Ok(PsllResult {
            psll_db: 10.0 * (g / main).log10(),
            worst_sidelobe_angle: u.asin(),
            mainlobe_exclusion_halfwidth: self.halfwidth,
        })
    }
}

/// Peak sidelobe level with the mainlobe region `|u − u0| < κλ/D` excluded.
pub fn psll(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    focus_angle: f64,
    grid: &AngleGrid,
    kappa: f64,
) -> Result<PsllResult> {
    let pos = active_positions(geom, b)?;
    if pos.is_empty() {
        return Err(Error::DegenerateMainlobe);
    }
    let eval = PsllEvaluator::new(
        grid.clone(),
        geom.wavelength(),
        geom.aperture_length(),
        kappa,
    )?;
    eval.evaluate(&pos, focus_angle)
}

/// Interior local maxima: not below either neighbour and above at least one.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| {
            let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
            c >= l && c >= r && (c > l || c > r)
        })
        .collect()
}

/// Indices `[lo, hi]` of the lobe containing `peak`, walking outward while
/// the samples keep decreasing.
pub fn lobe_extent(values: &[f64], peak: usize) -> (usize, usize) {
    let mut lo = peak;
    while lo > 0 && values[lo - 1] <= values[lo] {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < values.len() && values[hi + 1] <= values[hi] {
        hi += 1;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LAM: f64 = 0.01;

    fn ula(n: usize, d_over_lambda: f64) -> ArrayGeometry {
        ArrayGeometry::uniform(n, d_over_lambda * LAM, LAM).unwrap()
    }

    fn grid() -> AngleGrid {
        AngleGrid::uniform_sine(DEFAULT_ANGLE_POINTS).unwrap()
    }

    #[test]
    fn full_array_focus_gain_is_one() {
        let g = ula(32, 0.5);
        let p = angle_pattern(
            &g,
            &ThinningVector::full(32),
            0.3,
            &AngleGrid::from_sines(vec![0.3f64.sin()]).unwrap(),
            GainDivisor::Total,
        )
        .unwrap();
        assert_relative_eq!(p.values[0], 1.0, max_relative = 1e-12);
        assert_eq!(p.divisor, 32);
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        let g = ula(64, 2.0);
        let b = ThinningVector::full(64);
        let fast = angle_pattern(&g, &b, 0.2, &grid(), GainDivisor::Total).unwrap();
        let explicit = AngleGrid::from_sines(grid().sines().to_vec()).unwrap();
        let slow = angle_pattern(&g, &b, 0.2, &explicit, GainDivisor::Total).unwrap();
        for (a, b) in fast.values.iter().zip(&slow.values) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn sparse_ula_grating_lobes_reach_mainlobe() {
        let g = ula(256, 2.0);
        let p = angle_pattern(
            &g,
            &ThinningVector::full(256),
            0.0,
            &grid(),
            GainDivisor::Total,
        )
        .unwrap();
        for target in [-0.5, 0.5] {
            let best = p
                .axis
                .values()
                .iter()
                .zip(&p.values)
                .filter(|(u, _)| (*u - target).abs() < 2.0 * grid().resolution())
                .map(|(_, v)| *v)
                .fold(0.0, f64::max);
            assert!(to_db(best) > -0.2, "{target}: {}", to_db(best));
        }
    }

    #[test]
    fn small_half_wavelength_array_has_no_second_peak() {
        // Dense scan of the 4-element λ/2 pattern: nothing outside the
        // mainlobe comes close to the peak.
        let g = ula(4, 0.5);
        let p = angle_pattern(
            &g,
            &ThinningVector::full(4),
            0.0,
            &AngleGrid::uniform_angle(-FRAC_PI_2, FRAC_PI_2, 20_001).unwrap(),
            GainDivisor::Total,
        )
        .unwrap();
        let (peak, _) = p.peak();
        let (lo, hi) = lobe_extent(&p.values, peak);
        let outside = p
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < lo || *i > hi)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        assert!(outside < 0.99, "{outside}");
    }

    #[test]
    fn grating_lobe_predictions() {
        let p = grating_lobe_angles(2.0 * LAM, LAM, 0.0).unwrap();
        assert_eq!(p.orders(), vec![-1, 1]);
        let deg: Vec<f64> = p.angles().iter().map(|a| a.to_degrees()).collect();
        assert_relative_eq!(deg[0], -30.0, epsilon = 1e-9);
        assert_relative_eq!(deg[1], 30.0, epsilon = 1e-9);
        assert_eq!(p.nearest_invisible.len(), 2);

        for theta in [-1.2, -0.3, 0.0, 0.7, 1.4] {
            assert!(grating_lobe_angles(0.5 * LAM, LAM, theta)
                .unwrap()
                .lobes
                .is_empty());
            assert!(grating_lobe_angles(0.4 * LAM, LAM, theta)
                .unwrap()
                .lobes
                .is_empty());
        }

        let p = grating_lobe_angles(5.0 * LAM, LAM, 0.0).unwrap();
        assert_eq!(p.orders(), vec![-4, -3, -2, -1, 1, 2, 3, 4]);
        for l in &p.lobes {
            assert_relative_eq!(l.sine, l.order as f64 / 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn range_candidates() {
        let lam = crate::wavelength(15e9);
        let g = ArrayGeometry::uniform(256, 2.0 * lam, lam).unwrap();
        let focus = FocusPoint::new(0.0, 346.0).unwrap();
        let c = range_lobe_candidates(2.0 * lam, lam, focus, &[-1, 0, 1, 2], g.min_valid_range());
        assert_eq!(c[1].kind, RangeCandidateKind::SelfFocus);
        assert_relative_eq!(c[1].range, 346.0);
        assert_eq!(c[0].kind, RangeCandidateKind::Negative);
        assert!(c[0].range < 0.0);
        assert_eq!(c[2].kind, RangeCandidateKind::TooClose);
        // d²/(d²/r_f + 2λ) with d = 2λ: ≈ 2λ = 0.04 m.
        assert!(c[2].range < 0.05 && c[2].range > 0.03);
        assert!(c[3].range < c[2].range);
    }

    #[test]
    fn range_pattern_focus_and_far_plateau() {
        let lam = crate::wavelength(15e9);
        let g = ArrayGeometry::uniform(256, 2.0 * lam, lam).unwrap();
        let rd = g.rayleigh_distance();
        let focus = FocusPoint::new(0.0, rd / 30.0).unwrap();
        let grid = RangeGrid::from_ranges(vec![focus.range, 1e3 * rd]).unwrap();
        let p = range_pattern(
            &g,
            &ThinningVector::full(256),
            focus,
            &grid,
            GainDivisor::Total,
        )
        .unwrap();
        assert_relative_eq!(p.values[0], 1.0, max_relative = 1e-12);
        assert!(p.values[1] < 0.99 && p.values[1] > 0.0);
        assert!(RangeGrid::from_ranges(vec![]).is_err());
        assert!(RangeGrid::from_ranges(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn psll_examples() {
        let grid = grid();
        // Uniform λ/2 aperture: first sidelobe of the sinc pattern.
        let g = ula(128, 0.5);
        let r = psll(
            &g,
            &ThinningVector::full(128),
            0.0,
            &grid,
            DEFAULT_MAINLOBE_KAPPA,
        )
        .unwrap();
        assert!((r.psll_db + 13.26).abs() < 0.5, "{}", r.psll_db);
        // 2λ spacing: grating lobes at ±30°.
        let g = ula(64, 2.0);
        let r = psll(
            &g,
            &ThinningVector::full(64),
            0.0,
            &grid,
            DEFAULT_MAINLOBE_KAPPA,
        )
        .unwrap();
        assert!(r.psll_db.abs() < 0.2, "{}", r.psll_db);
        // Equal-height lobes at ±30° and endfire; any of them may be reported.
        let u = r.worst_sidelobe_angle.sin().abs();
        assert!((u - 0.5).abs() < 1e-3 || (u - 1.0).abs() < 1e-3, "{u}");
        // Only the two edge elements.
        let g = ula(40, 0.5);
        let b = ThinningVector::from_active(40, &[0, 39], vec![0, 39]).unwrap();
        let r = psll(&g, &b, 0.0, &grid, DEFAULT_MAINLOBE_KAPPA).unwrap();
        assert!(r.psll_db.abs() < 0.01, "{}", r.psll_db);
    }

    #[test]
    fn psll_rejects_empty_mask() {
        let g = ula(8, 0.5);
        let b = ThinningVector::new(vec![false; 8], vec![]).unwrap();
        assert_eq!(
            psll(&g, &b, 0.0, &grid(), 1.0),
            Err(Error::DegenerateMainlobe)
        );
    }

    #[test]
    fn visible_predictions_match_measured_maxima() {
        for (n, d, theta) in [
            (64, 2.0, 0.0),
            (48, 3.0, 0.2),
            (32, 5.0, -0.4),
            (40, 1.5, 0.5),
        ] {
            let g = ula(n, d);
            let grid = grid();
            let p = angle_pattern(
                &g,
                &ThinningVector::full(n),
                theta,
                &grid,
                GainDivisor::Total,
            )
            .unwrap();
            let maxima = local_maxima(&p.values);
            for lobe in grating_lobe_angles(d * LAM, LAM, theta).unwrap().lobes {
                if lobe.sine.abs() > 1.0 - grid.resolution() {
                    continue; // lobe centered on the edge of the visible region
                }
                let hit = maxima.iter().any(|&i| {
                    (grid.sines()[i] - lobe.sine).abs() <= grid.resolution() && p.values[i] >= 0.99
                });
                assert!(hit, "n={n} d={d} theta={theta} q={}", lobe.order);
            }
        }
    }

    #[test]
    fn local_maxima_and_extent() {
        let v = [0.0, 1.0, 0.5, 0.5, 2.0, 1.0, 0.2, 0.3];
        assert_eq!(local_maxima(&v), vec![1, 4]);
        assert_eq!(lobe_extent(&v, 4), (2, 6));
    }

    proptest! {
        #[test]
        fn symmetric_mask_gives_even_pattern(half in proptest::collection::vec(any::<bool>(), 8)) {
            let mut bits = half.clone();
            bits.extend(half.iter().rev());
            bits[0] = true;
            let last = bits.len() - 1;
            bits[last] = true;
            let g = ula(16, 0.5);
            let b = ThinningVector::new(bits, vec![]).unwrap();
            let grid = AngleGrid::uniform_sine(1025).unwrap();
            let p = angle_pattern(&g, &b, 0.0, &grid, GainDivisor::Total).unwrap();
            let n = p.values.len();
            for i in 0..n {
                prop_assert!((p.values[i] - p.values[n - 1 - i]).abs() < 1e-10);
            }
        }
    }
}
