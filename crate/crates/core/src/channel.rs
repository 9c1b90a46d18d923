//! Free-space line-of-sight near-field channel and random user drops.
//!
//! The channel of user `k` is
//!
//! ```text
//! h_k = √β_k · exp(-j·2π·r_k/λ) · (b ⊙ a(θ_k, r_k)),   β_k = λ² / ((4π)²·r_k²)
//! ```

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng as _;

use crate::array::{check_len, steering_entries, ArrayGeometry, FocusPoint, ThinningVector};
use crate::linalg::CMatrix;
use crate::rng::rng_from_seed;
use crate::{Error, Result, C64};

/// Smallest allowed distance of a user angle from endfire.
pub const ENDFIRE_MARGIN: f64 = 1e-6;

/// A single-antenna user in polar coordinates relative to element 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLocation {
    pub angle: f64,
    pub range: f64,
}

impl UserLocation {
    pub fn new(angle: f64, range: f64) -> Result<Self> {
        if !(angle.abs() <= FRAC_PI_2 - ENDFIRE_MARGIN) {
            return Err(Error::Domain("user angle too close to endfire"));
        }
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::Domain("user range must be positive and finite"));
        }
        Ok(Self { angle, range })
    }
}

impl From<UserLocation> for FocusPoint {
    fn from(u: UserLocation) -> Self {
        FocusPoint {
            angle: u.angle,
            range: u.range,
        }
    }
}

/// One drop of `K` users and the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<UserLocation>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(users: Vec<UserLocation>, seed: u64) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Empty("scenario"));
        }
        Ok(Self { users, seed })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}

/// Free-space pathloss `λ² / ((4π)² r²)`.
pub fn pathloss(wavelength: f64, range: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::Domain("range must be positive"));
    }
    let four_pi = 4.0 * PI;
    Ok(wavelength * wavelength / (four_pi * four_pi * range * range))
}

/// How ranges inside `2D` are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Validity {
    /// Reject with [`Error::NearFieldValidity`].
    #[default]
    Strict,
    /// Build the channel and count the violation.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelConfig {
    /// Normalization count of the response; `None` uses the number of
    /// elements of the geometry.
    pub norm_count: Option<usize>,
    pub validity: Validity,
    /// Overrides the `2D` threshold used for the validity check.
    pub min_valid_range: Option<f64>,
}

/// `N × K` channel matrix with per-user pathloss.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: CMatrix,
    pub pathloss: Vec<f64>,
    /// Users that violated `r > 2D` in lenient mode.
    pub validity_warnings: usize,
}

impl ChannelMatrix {
    pub fn n_antennas(&self) -> usize {
        self.entries.rows()
    }

    pub fn n_users(&self) -> usize {
        self.entries.cols()
    }

    pub fn column(&self, k: usize) -> &[C64] {
        self.entries.column(k)
    }

    /// Same channel with only the listed antenna rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            entries: self.entries.select_rows(rows),
            pathloss: self.pathloss.clone(),
            validity_warnings: self.validity_warnings,
        }
    }
}

/// Unmasked channel column for elements at `positions`.
pub(crate) fn channel_column(
    positions: &[f64],
    wavelength: f64,
    user: UserLocation,
    norm_count: usize,
) -> Result<(Vec<C64>, f64)> {
    let beta = pathloss(wavelength, user.range)?;
    let phase = C64::from_polar(beta.sqrt(), -2.0 * PI * user.range / wavelength);
    let mut a = steering_entries(positions, wavelength, user.angle, user.range, norm_count)?;
    for x in &mut a {
        *x *= phase;
    }
    Ok((a, beta))
}

fn check_validity(limit: f64, user: UserLocation, cfg: &ChannelConfig) -> Result<bool> {
    if user.range > limit {
        return Ok(false);
    }
    match cfg.validity {
        Validity::Strict => Err(Error::NearFieldValidity {
            range: user.range,
            limit,
        }),
        Validity::Lenient => Ok(true),
    }
}

/// Channel vector of one user with strict validity and `N` normalization.
pub fn channel_vector(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    user: UserLocation,
) -> Result<Vec<C64>> {
    channel_vector_with(geom, b, user, &ChannelConfig::default()).map(|(h, _)| h)
}

/// Channel vector with explicit configuration. The flag reports a lenient
/// validity violation.
pub fn channel_vector_with(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    user: UserLocation,
    cfg: &ChannelConfig,
) -> Result<(Vec<C64>, bool)> {
    check_len(geom.n_elements(), b.len())?;
    let limit = cfg
        .min_valid_range
        .unwrap_or_else(|| geom.min_valid_range());
    let warned = check_validity(limit, user, cfg)?;
    let norm = cfg.norm_count.unwrap_or(geom.n_elements());
    let (mut h, _) = channel_column(geom.positions(), geom.wavelength(), user, norm)?;
    for (x, &on) in h.iter_mut().zip(b.mask()) {
        if !on {
            *x = C64::new(0.0, 0.0);
        }
    }
    Ok((h, warned))
}

/// Stacks the channel vectors of all users into `H`.
pub fn channel_matrix(
    geom: &ArrayGeometry,
    b: &ThinningVector,
    users: &[UserLocation],
    cfg: &ChannelConfig,
) -> Result<ChannelMatrix> {
    if users.is_empty() {
        return Err(Error::Empty("user list"));
    }
    let mut cols = Vec::with_capacity(users.len());
    let mut betas = Vec::with_capacity(users.len());
    let mut warnings = 0;
    for &u in users {
        let (h, warned) = channel_vector_with(geom, b, u, cfg)?;
        warnings += usize::from(warned);
        betas.push(pathloss(geom.wavelength(), u.range)?);
        cols.push(h);
    }
    Ok(ChannelMatrix {
        entries: CMatrix::from_columns(&cols)?,
        pathloss: betas,
        validity_warnings: warnings,
    })
}

/// Channel of elements at arbitrary `positions` (all active), e.g. a
/// movable array. No validity check is applied.
pub fn channel_matrix_for_positions(
    positions: &[f64],
    wavelength: f64,
    users: &[UserLocation],
    norm_count: usize,
) -> Result<ChannelMatrix> {
    if users.is_empty() {
        return Err(Error::Empty("user list"));
    }
    let mut cols = Vec::with_capacity(users.len());
    let mut betas = Vec::with_capacity(users.len());
    for &u in users {
        let (h, beta) = channel_column(positions, wavelength, u, norm_count)?;
        cols.push(h);
        betas.push(beta);
    }
    Ok(ChannelMatrix {
        entries: CMatrix::from_columns(&cols)?,
        pathloss: betas,
        validity_warnings: 0,
    })
}

/// Uniform user-drop distribution over a range × angle box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSampler {
    pub range: (f64, f64),
    pub angle: (f64, f64),
}

impl ScenarioSampler {
    pub fn new(range: (f64, f64), angle: (f64, f64)) -> Result<Self> {
        if !(range.0 > 0.0) || !(range.1 >= range.0) || !range.1.is_finite() {
            return Err(Error::Empty("range interval"));
        }
        if !(angle.1 >= angle.0)
            || angle.0 < -(FRAC_PI_2 - ENDFIRE_MARGIN)
            || angle.1 > FRAC_PI_2 - ENDFIRE_MARGIN
        {
            return Err(Error::Empty("angle interval"));
        }
        Ok(Self { range, angle })
    }

    /// `r ~ U[2D, R_D/7]`, `θ ~ U[-π/3, π/3]` for the given array.
    pub fn default_for(geom: &ArrayGeometry) -> Self {
        Self {
            range: (geom.min_valid_range(), geom.rayleigh_distance() / 7.0),
            angle: (-PI / 3.0, PI / 3.0),
        }
    }

    /// Midpoint of the range interval.
    pub fn reference_range(&self) -> f64 {
        0.5 * (self.range.0 + self.range.1)
    }

    pub fn sample(&self, k: usize, seed: u64) -> Result<Scenario> {
        if k == 0 {
            return Err(Error::Empty("scenario"));
        }
        let mut rng = rng_from_seed(seed);
        let users = (0..k)
            .map(|_| {
                let t: f64 = rng.gen();
                let s: f64 = rng.gen();
                UserLocation {
                    angle: self.angle.0 + s * (self.angle.1 - self.angle.0),
                    range: self.range.0 + t * (self.range.1 - self.range.0),
                }
            })
            .collect();
        Scenario::new(users, seed)
    }
}

/// `K` users with i.i.d. uniform range and angle.
pub fn sample_scenario(
    k: usize,
    range_interval: (f64, f64),
    angle_interval: (f64, f64),
    seed: u64,
) -> Result<Scenario> {
    ScenarioSampler::new(range_interval, angle_interval)?.sample(k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup() -> ArrayGeometry {
        let lam = crate::wavelength(30e9);
        ArrayGeometry::uniform(320, lam / 2.0, lam).unwrap()
    }

    #[test]
    fn pathloss_values() {
        // 1e-4 / (157.9137 · 100)
        assert_relative_eq!(
            pathloss(0.01, 10.0).unwrap(),
            6.332_573_977_646_111e-9,
            max_relative = 1e-12
        );
        let b = pathloss(0.01, 10.0).unwrap();
        assert_relative_eq!(pathloss(0.01, 20.0).unwrap(), b / 4.0, max_relative = 1e-12);
        assert_relative_eq!(pathloss(0.02, 10.0).unwrap(), 4.0 * b, max_relative = 1e-12);
        assert!(pathloss(0.01, 0.0).is_err());
        assert!(pathloss(0.01, -1.0).is_err());
    }

    #[test]
    fn full_mask_norm_equals_pathloss() {
        let g = setup();
        let u = UserLocation::new(0.3, 20.0).unwrap();
        let h = channel_vector(&g, &ThinningVector::full(320), u).unwrap();
        let norm: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        assert_relative_eq!(
            norm,
            pathloss(g.wavelength(), 20.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn validity_strict_and_lenient() {
        let g = setup();
        let near = UserLocation::new(0.0, 1.0).unwrap();
        let full = ThinningVector::full(320);
        assert!(matches!(
            channel_vector(&g, &full, near),
            Err(Error::NearFieldValidity { .. })
        ));
        let cfg = ChannelConfig {
            validity: Validity::Lenient,
            ..Default::default()
        };
        let (_, warned) = channel_vector_with(&g, &full, near, &cfg).unwrap();
        assert!(warned);
        let m = channel_matrix(
            &g,
            &full,
            &[near, UserLocation::new(0.1, 10.0).unwrap()],
            &cfg,
        )
        .unwrap();
        assert_eq!(m.validity_warnings, 1);
    }

    #[test]
    fn colocated_users_give_identical_columns() {
        let g = setup();
        let u = UserLocation::new(-0.2, 15.0).unwrap();
        let m = channel_matrix(
            &g,
            &ThinningVector::full(320),
            &[u, u],
            &ChannelConfig::default(),
        )
        .unwrap();
        assert_eq!(m.column(0), m.column(1));
    }

    #[test]
    fn default_sampler_matches_deployment() {
        let g = setup();
        let s = ScenarioSampler::default_for(&g);
        let sc = s.sample(16, 3).unwrap();
        assert_eq!(sc.n_users(), 16);
        for u in &sc.users {
            assert!(u.range >= 3.18 && u.range <= 72.7);
            assert!(u.angle.abs() <= PI / 3.0 + 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_handles_degenerate_interval() {
        let a = sample_scenario(5, (3.0, 70.0), (-1.0, 1.0), 42).unwrap();
        let b = sample_scenario(5, (3.0, 70.0), (-1.0, 1.0), 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_scenario(5, (3.0, 70.0), (-1.0, 1.0), 43).unwrap());
        let c = sample_scenario(1, (12.5, 12.5), (0.0, 0.0), 1).unwrap();
        assert_eq!(c.users[0].range, 12.5);
        assert!(sample_scenario(1, (5.0, 4.0), (0.0, 0.0), 1).is_err());
        assert!(sample_scenario(0, (3.0, 4.0), (0.0, 0.0), 1).is_err());
    }

    #[test]
    fn sampling_prefix_is_stable_in_k() {
        // User k is drawn from the same position of the seed stream whatever K is.
        let a = sample_scenario(3, (3.0, 70.0), (-1.0, 1.0), 9).unwrap();
        let b = sample_scenario(8, (3.0, 70.0), (-1.0, 1.0), 9).unwrap();
        assert_eq!(a.users[..], b.users[..3]);
    }

    proptest! {
        #[test]
        fn column_norm_tracks_active_count(
            bits in proptest::collection::vec(any::<bool>(), 320),
            theta in -1.0f64..1.0, r in 3.2f64..72.0,
        ) {
            let g = setup();
            let b = ThinningVector::new(bits, alloc::vec![]).unwrap();
            let h = channel_vector(&g, &b, UserLocation::new(theta, r).unwrap()).unwrap();
            let norm: f64 = h.iter().map(|x| x.norm_sqr()).sum();
            let expected = pathloss(g.wavelength(), r).unwrap() * b.active_count() as f64 / 320.0;
            prop_assert!((norm - expected).abs() <= 1e-12 * expected.max(f64::MIN_POSITIVE));
        }
    }
}
