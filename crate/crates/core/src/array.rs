//! Linear array geometry, binary thinning masks and near-field response
//! vectors.
//!
//! Element positions are measured along the array axis with element 0 at
//! the origin; user coordinates (angle from boresight, range) are taken
//! relative to that origin. The response uses the Fresnel (second-order)
//! approximation of the spherical wavefront:
//!
//! ```text
//! a_n(θ, r) = exp(-j·2π/λ·(ρ_n·sinθ − ρ_n²·cos²θ / (2r))) / √M
//! ```
//!
//! where `M` is an explicit normalization count.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// Positions of the elements of a linear array together with the carrier
/// wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    wavelength: f64,
    positions: Vec<f64>,
}

impl ArrayGeometry {
    /// `n` elements with uniform `spacing` (meters).
    pub fn uniform(n: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGeometry("spacing must be positive"));
        }
        Self::from_positions((0..n).map(|i| i as f64 * spacing).collect(), wavelength)
    }

    /// Arbitrary strictly increasing positions. The array is translated so
    /// that the first element sits at the origin.
    pub fn from_positions(mut positions: Vec<f64>, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidGeometry("wavelength must be positive"));
        }
        if positions.len() < 2 {
            return Err(Error::InvalidGeometry("at least two elements are required"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("positions must be finite"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry(
                "positions must be strictly increasing",
            ));
        }
        let origin = positions[0];
        for p in &mut positions {
            *p -= origin;
        }
        Ok(Self {
            wavelength,
            positions,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn n_elements(&self) -> usize {
        self.positions.len()
    }

    /// Aperture length `D`.
    pub fn aperture_length(&self) -> f64 {
        self.positions[self.positions.len() - 1] - self.positions[0]
    }

    /// Spacing if the array is uniform (to 1e-9 relative), else `None`.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let d = self.positions[1] - self.positions[0];
        let uniform = self
            .positions
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d);
        uniform.then_some(d)
    }

    /// Rayleigh distance `2D²/λ`.
    pub fn rayleigh_distance(&self) -> f64 {
        rayleigh_distance(self)
    }

    /// Smallest range for which the Fresnel response is used (`2D`).
    pub fn min_valid_range(&self) -> f64 {
        2.0 * self.aperture_length()
    }

    /// Whether `range` lies inside the validity region `r > 2D`.
    pub fn is_valid_range(&self, range: f64) -> bool {
        range > self.min_valid_range()
    }

    /// Geometry made of the active elements of `mask`.
    pub fn subarray(&self, mask: &ThinningVector) -> Result<Self> {
        check_len(self.n_elements(), mask.len())?;
        let positions: Vec<f64> = mask.active_indices().map(|i| self.positions[i]).collect();
        Self::from_positions(positions, self.wavelength)
    }
}

/// Rayleigh distance `2D²/λ` of a geometry.
pub fn rayleigh_distance(geom: &ArrayGeometry) -> f64 {
    let d = geom.aperture_length();
    2.0 * d * d / geom.wavelength
}

/// Binary activation mask with a set of indices that must stay active.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThinningVector {
    mask: Vec<bool>,
    fixed: Vec<usize>,
}

impl ThinningVector {
    pub fn new(mask: Vec<bool>, mut fixed: Vec<usize>) -> Result<Self> {
        fixed.sort_unstable();
        fixed.dedup();
        if let Some(&i) = fixed.iter().find(|&&i| i >= mask.len() || !mask[i]) {
            return Err(Error::InvalidMask(alloc::format!(
                "fixed index {i} is not an active element"
            )));
        }
        Ok(Self { mask, fixed })
    }

    /// All `n` elements active, nothing fixed.
    pub fn full(n: usize) -> Self {
        Self {
            mask: alloc::vec![true; n],
            fixed: Vec::new(),
        }
    }

    /// Mask of length `n` with the given active indices.
    pub fn from_active(n: usize, active: &[usize], fixed: Vec<usize>) -> Result<Self> {
        let mut mask = alloc::vec![false; n];
        for &i in active {
            if i >= n {
                return Err(Error::InvalidMask(alloc::format!(
                    "index {i} out of range for {n} elements"
                )));
            }
            mask[i] = true;
        }
        Self::new(mask, fixed)
    }

    /// Parses a `0`/`1` string where the first character is element 0.
    pub fn from_bit_string(bits: &str, fixed: Vec<usize>) -> Result<Self> {
        let mask = bits
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::InvalidMask(alloc::format!(
                    "unexpected character {other:?} in bit string"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mask, fixed)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn thinning_ratio(&self) -> f64 {
        self.active_count() as f64 / self.len() as f64
    }

    /// Bit string with element 0 first.
    pub fn bit_string(&self) -> alloc::string::String {
        self.mask
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect::<alloc::string::String>()
    }
}

impl core::fmt::Display for ThinningVector {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.bit_string())
    }
}

/// Beam focus (or user location) in polar coordinates relative to element 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusPoint {
    /// Angle from boresight in radians.
    pub angle: f64,
    /// Range in meters.
    pub range: f64,
}

impl FocusPoint {
    pub fn new(angle: f64, range: f64) -> Result<Self> {
        if !(angle.abs() < FRAC_PI_2) {
            return Err(Error::Domain("focus angle must lie in (-pi/2, pi/2)"));
        }
        if !(range > 0.0) {
            return Err(Error::Domain("focus range must be positive"));
        }
        Ok(Self { angle, range })
    }

    pub fn from_degrees(angle_deg: f64, range: f64) -> Result<Self> {
        Self::new(angle_deg.to_radians(), range)
    }
}

/// Phase (radians) of the near-field response at position `rho`.
#[inline]
pub(crate) fn response_phase(rho: f64, wavenumber: f64, sin_t: f64, cos2_over_2r: f64) -> f64 {
    -wavenumber * (rho * sin_t - rho * rho * cos2_over_2r)
}

/// Response entries for arbitrary positions without the origin convention.
///
/// `range` may be `f64::INFINITY` for the far-field limit.
pub fn steering_entries(
    positions: &[f64],
    wavelength: f64,
    angle: f64,
    range: f64,
    norm_count: usize,
) -> Result<Vec<C64>> {
    if !(range > 0.0) {
        return Err(Error::Domain("range must be positive"));
    }
    if norm_count == 0 {
        return Err(Error::Domain("normalization count must be at least 1"));
    }
    let k = 2.0 * PI / wavelength;
    let scale = 1.0 / (norm_count as f64).sqrt();
    let (sin_t, cos_t) = angle.sin_cos();
    let curvature = cos_t * cos_t / (2.0 * range);
    Ok(positions
        .iter()
        .map(|&rho| C64::from_polar(scale, response_phase(rho, k, sin_t, curvature)))
        .collect())
}

/// Normalized near-field array response `a(θ, r)` of length `N`.
pub fn steering_vector(
    geom: &ArrayGeometry,
    focus: FocusPoint,
    norm_count: usize,
) -> Result<Vec<C64>> {
    steering_entries(
        geom.positions(),
        geom.wavelength(),
        focus.angle,
        focus.range,
        norm_count,
    )
}

/// Hadamard product `b ⊙ v`; inactive entries are exactly zero.
pub fn apply_thinning(v: &[C64], b: &ThinningVector) -> Result<Vec<C64>> {
    check_len(v.len(), b.len())?;
    Ok(v.iter()
        .zip(b.mask())
        .map(|(&x, &on)| if on { x } else { C64::new(0.0, 0.0) })
        .collect())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lambda() -> f64 {
        0.01
    }

    fn ula(n: usize) -> ArrayGeometry {
        ArrayGeometry::uniform(n, lambda() / 2.0, lambda()).unwrap()
    }

    #[test]
    fn first_entry_has_zero_phase() {
        let g = ula(16);
        let a = steering_vector(&g, FocusPoint::new(0.3, 5.0).unwrap(), 16).unwrap();
        assert_relative_eq!(a[0].re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(a[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn far_field_limit_is_linear_phase() {
        let g = ula(64);
        let theta = 0.4;
        let a = steering_vector(&g, FocusPoint::new(theta, 1e12).unwrap(), 64).unwrap();
        let k = 2.0 * PI / lambda();
        for (n, x) in a.iter().enumerate() {
            let expected = -k * g.positions()[n] * theta.sin();
            let diff = (x.arg() - expected).rem_euclid(2.0 * PI);
            let diff = diff.min(2.0 * PI - diff);
            assert!(diff < 1e-6, "element {n}: {diff}");
        }
    }

    #[test]
    fn endfire_half_wavelength_pair() {
        // Exponent for n = 1: -(2π/λ)(λ/2·1 − (λ/2)²·0/(2r)) = −π.
        let g = ula(2);
        let a = steering_entries(g.positions(), lambda(), FRAC_PI_2, 1e6, 2).unwrap();
        let phase = a[1].arg();
        assert!((phase.abs() - PI).abs() < 1e-9, "{phase}");
    }

    #[test]
    fn zero_range_is_rejected() {
        let g = ula(4);
        assert!(steering_entries(g.positions(), lambda(), 0.0, 0.0, 4).is_err());
        assert!(FocusPoint::new(0.0, 0.0).is_err());
        assert!(FocusPoint::new(FRAC_PI_2, 1.0).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::from_positions(alloc::vec![0.0], 0.01).is_err());
        assert!(ArrayGeometry::from_positions(alloc::vec![0.0, 0.0], 0.01).is_err());
        assert!(ArrayGeometry::from_positions(alloc::vec![0.0, 1.0], 0.0).is_err());
        let g = ArrayGeometry::from_positions(alloc::vec![1.0, 1.5, 3.0], 0.01).unwrap();
        assert_eq!(g.positions(), &[0.0, 0.5, 2.0]);
        assert_eq!(g.uniform_spacing(), None);
        assert_relative_eq!(ula(10).uniform_spacing().unwrap(), 0.005);
    }

    #[test]
    fn rayleigh_distance_reference_setups() {
        // N = 256, d = 2λ at 15 GHz.
        let lam = crate::wavelength(15e9);
        let g = ArrayGeometry::uniform(256, 2.0 * lam, lam).unwrap();
        let rd = g.rayleigh_distance();
        assert!((rd - 10_300.0).abs() / 10_300.0 < 0.03, "{rd}");
        // N = 320, d = λ/2 at 30 GHz.
        let lam = crate::wavelength(30e9);
        let g = ArrayGeometry::uniform(320, lam / 2.0, lam).unwrap();
        assert!((g.min_valid_range() - 3.18).abs() < 0.02);
        assert!((g.rayleigh_distance() / 7.0 - 72.6).abs() < 0.2);
    }

    #[test]
    fn rayleigh_distance_scales_quadratically() {
        let a = ArrayGeometry::uniform(11, 0.5, 0.01).unwrap();
        let b = ArrayGeometry::uniform(11, 1.0, 0.01).unwrap();
        assert_relative_eq!(
            b.rayleigh_distance(),
            4.0 * a.rayleigh_distance(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn thinning_identity_and_fixed_only() {
        let g = ula(8);
        let v = steering_vector(&g, FocusPoint::new(0.1, 3.0).unwrap(), 8).unwrap();
        assert_eq!(apply_thinning(&v, &ThinningVector::full(8)).unwrap(), v);
        let only_edges = ThinningVector::from_active(8, &[0, 7], alloc::vec![0, 7]).unwrap();
        let out = apply_thinning(&v, &only_edges).unwrap();
        for (i, x) in out.iter().enumerate() {
            assert_eq!(*x == C64::new(0.0, 0.0), !(i == 0 || i == 7));
        }
        assert!(apply_thinning(&v[..7], &only_edges).is_err());
    }

    #[test]
    fn mask_validation_and_bit_string() {
        assert!(ThinningVector::from_active(4, &[1], alloc::vec![0]).is_err());
        assert!(ThinningVector::from_active(4, &[4], alloc::vec![]).is_err());
        let b = ThinningVector::from_active(6, &[0, 2, 5], alloc::vec![0, 5]).unwrap();
        assert_eq!(b.bit_string(), "101001");
        assert_eq!(b.active_count(), 3);
        assert_relative_eq!(b.thinning_ratio(), 0.5);
        assert_eq!(
            ThinningVector::from_bit_string("101001", alloc::vec![0, 5]).unwrap(),
            b
        );
        assert!(ThinningVector::from_bit_string("10x", alloc::vec![]).is_err());
    }

    proptest! {
        #[test]
        fn entries_have_unit_magnitude_before_normalization(
            theta in -1.5f64..1.5, r in 0.5f64..1e4, norm in 1usize..512,
        ) {
            let g = ula(32);
            let a = steering_entries(g.positions(), lambda(), theta, r, norm).unwrap();
            for x in a {
                prop_assert!((x.norm() * (norm as f64).sqrt() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn thinning_support_matches_mask(bits in proptest::collection::vec(any::<bool>(), 16), theta in -1.0f64..1.0) {
            let g = ula(16);
            let v = steering_vector(&g, FocusPoint::new(theta, 2.0).unwrap(), 16).unwrap();
            let b = ThinningVector::new(bits.clone(), alloc::vec![]).unwrap();
            let out = apply_thinning(&v, &b).unwrap();
            for (x, on) in out.iter().zip(bits) {
                prop_assert_eq!(x.norm() > 0.0, on);
            }
        }

        // Shifting the array only rotates the response by a global phase in
        // the far field, and leaves the gain between two points on a common
        // distance ring unchanged.
        #[test]
        fn translation_invariance(shift in -1.0f64..1.0, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0, r1 in 1.0f64..50.0) {
            let g = ula(24);
            let shifted: Vec<f64> = g.positions().iter().map(|p| p + shift).collect();
            let a = steering_entries(g.positions(), lambda(), t1, f64::INFINITY, 24).unwrap();
            let b = steering_entries(&shifted, lambda(), t1, f64::INFINITY, 24).unwrap();
            let rot = b[0] / a[0];
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x * rot - y).norm() < 1e-9);
            }
            let r2 = r1 * (t2.cos() / t1.cos()).powi(2);
            let gain = |pos: &[f64]| {
                let u = steering_entries(pos, lambda(), t1, r1, 24).unwrap();
                let v = steering_entries(pos, lambda(), t2, r2, 24).unwrap();
                u.iter().zip(&v).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
            };
            let g0 = gain(g.positions());
            let g1 = gain(&shifted);
            // Gains are at most 1; near nulls only an absolute bound is meaningful.
            prop_assert!((g0 - g1).abs() <= 1e-12);
        }
    }
}
