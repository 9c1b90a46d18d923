//! Benchmark array configurations.
//!
//! Every scheme lives on the grid of the full array (element 0 at the
//! origin) except the movable array, whose elements may sit anywhere inside
//! its bounds. Users are located relative to the same origin.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::{ArrayGeometry, ThinningVector};
use crate::channel::{channel_matrix_for_positions, UserLocation};
use crate::precoder::{evaluate_rzf, PowerConfig, RateReport, RzfConfig};
use crate::pso::{
    optimize_gta, optimize_positions_mula, optimize_sta, GtaConfig, MulaProblem, StaObjective,
    SwarmConfig,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Fula,
    Mula,
    Sta,
    Gta,
    Pta,
    Sula,
    Hula,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Fula,
        Scheme::Mula,
        Scheme::Sta,
        Scheme::Gta,
        Scheme::Pta,
        Scheme::Sula,
        Scheme::Hula,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fula => "FULA",
            Scheme::Mula => "MULA",
            Scheme::Sta => "STA",
            Scheme::Gta => "GTA",
            Scheme::Pta => "PTA",
            Scheme::Sula => "SULA",
            Scheme::Hula => "HULA",
        }
    }

    /// Whether the scheme is optimized again for every channel realization.
    pub fn per_trial(self) -> bool {
        matches!(self, Scheme::Sta | Scheme::Mula)
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or(Error::InvalidConfig("unknown scheme name"))
    }
}

/// Response normalization used when comparing schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Each scheme divides by its own number of active elements.
    OwnCount,
    /// All schemes divide by the same count (per-element gain is common).
    Reference(usize),
}

impl Normalization {
    pub fn count(self, active: usize) -> usize {
        match self {
            Normalization::OwnCount => active,
            Normalization::Reference(n) => n,
        }
    }
}

/// The full array plus the parameters of the derived schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub geometry: ArrayGeometry,
    /// Active elements of every thinned, sparse, compact or movable scheme.
    pub n_active: usize,
    /// Grid stride of the sparse uniform array.
    pub sula_stride: usize,
    /// Movable-element bounds in the common frame.
    pub mula_bounds: (f64, f64),
    pub mula_min_spacing: f64,
}

impl Deployment {
    /// `n` elements at `λ/2`, `n_active` active, sparse spacing
    /// `sula_spacing`, movable bounds `±mula_half_width` about the aperture
    /// center.
    pub fn new(
        n: usize,
        n_active: usize,
        wavelength: f64,
        sula_spacing: f64,
        mula_half_width: f64,
    ) -> Result<Self> {
        let (geometry, _) = make_fula(n, wavelength / 2.0, wavelength)?;
        let stride = (sula_spacing / (wavelength / 2.0)).round() as usize;
        if stride == 0 || (sula_spacing / (wavelength / 2.0) - stride as f64).abs() > 1e-9 {
            return Err(Error::InvalidGeometry(
                "sparse spacing must be a multiple of the grid spacing",
            ));
        }
        if n_active < 2 || n_active > n || (n_active - 1) * stride >= n {
            return Err(Error::Infeasible(
                "active count does not fit the full array",
            ));
        }
        let center = geometry.aperture_length() / 2.0;
        Ok(Self {
            geometry,
            n_active,
            sula_stride: stride,
            mula_bounds: (center - mula_half_width, center + mula_half_width),
            mula_min_spacing: wavelength / 2.0,
        })
    }

    /// 320 elements, 32 active, sparse spacing `5λ`, bounds `±80λ`.
    pub fn reference(wavelength: f64) -> Result<Self> {
        Self::new(320, 32, wavelength, 5.0 * wavelength, 80.0 * wavelength)
    }

    pub fn wavelength(&self) -> f64 {
        self.geometry.wavelength()
    }

    pub fn n_elements(&self) -> usize {
        self.geometry.n_elements()
    }

    /// The two edge elements.
    pub fn fixed(&self) -> Vec<usize> {
        vec![0, self.n_elements() - 1]
    }

    pub fn fula_mask(&self) -> ThinningVector {
        ThinningVector::full(self.n_elements())
    }

    pub fn sula_mask(&self) -> ThinningVector {
        let idx: Vec<usize> = (0..self.n_active).map(|i| i * self.sula_stride).collect();
        ThinningVector::from_active(self.n_elements(), &idx, Vec::new())
            .expect("validated at construction")
    }

    pub fn hula_mask(&self) -> ThinningVector {
        let idx: Vec<usize> = (0..self.n_active).collect();
        ThinningVector::from_active(self.n_elements(), &idx, Vec::new())
            .expect("validated at construction")
    }

    pub fn active_positions(&self, mask: &ThinningVector) -> Result<Vec<f64>> {
        if mask.len() != self.n_elements() {
            return Err(Error::LengthMismatch {
                expected: self.n_elements(),
                found: mask.len(),
            });
        }
        let p = self.geometry.positions();
        Ok(mask.active_indices().map(|i| p[i]).collect())
    }
}

/// Uniform array with every element on.
pub fn make_fula(
    n: usize,
    spacing: f64,
    wavelength: f64,
) -> Result<(ArrayGeometry, ThinningVector)> {
    Ok((
        ArrayGeometry::uniform(n, spacing, wavelength)?,
        ThinningVector::full(n),
    ))
}

/// Sparse uniform array as its own geometry.
pub fn make_sula(
    n_active: usize,
    spacing: f64,
    wavelength: f64,
) -> Result<(ArrayGeometry, ThinningVector)> {
    make_fula(n_active, spacing, wavelength)
}

/// Compact half-wavelength array as its own geometry.
pub fn make_hula(n_active: usize, wavelength: f64) -> Result<(ArrayGeometry, ThinningVector)> {
    make_fula(n_active, wavelength / 2.0, wavelength)
}

/// Element layout of a scheme realization.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Mask(ThinningVector),
    Positions(Vec<f64>),
}

impl Layout {
    pub fn describe(&self) -> String {
        match self {
            Layout::Mask(m) => m.bit_string(),
            Layout::Positions(p) => {
                let mut s = String::new();
                for (i, x) in p.iter().enumerate() {
                    if i > 0 {
                        s.push(' ');
                    }
                    s.push_str(&alloc::format!("{x:.6e}"));
                }
                s
            }
        }
    }
}

/// Everything a scheme evaluation depends on besides the users.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub deployment: Deployment,
    pub power: PowerConfig,
    pub rzf: RzfConfig,
    pub normalization: Normalization,
    pub swarm: SwarmConfig,
    pub gta: GtaConfig,
}

impl EvalContext {
    pub fn norm_count(&self, active: usize) -> usize {
        self.normalization.count(active)
    }

    /// RZF rates of the elements at `positions` (all active).
    pub fn rates_for_positions(
        &self,
        positions: &[f64],
        users: &[UserLocation],
    ) -> Result<RateReport> {
        let h = channel_matrix_for_positions(
            positions,
            self.deployment.wavelength(),
            users,
            self.norm_count(positions.len()),
        )?;
        evaluate_rzf(&h.entries, &self.power, &self.rzf)
    }

    pub fn rates(&self, layout: &Layout, users: &[UserLocation]) -> Result<RateReport> {
        match layout {
            Layout::Mask(m) => {
                self.rates_for_positions(&self.deployment.active_positions(m)?, users)
            }
            Layout::Positions(p) => self.rates_for_positions(p, users),
        }
    }

    fn sta_objective<U: AsRef<[UserLocation]>>(&self, scenarios: &[U]) -> Result<StaObjective> {
        let d = &self.deployment;
        StaObjective::ensemble(
            &d.geometry,
            scenarios,
            self.norm_count(d.n_active),
            self.power,
            self.rzf,
        )
    }

    /// Sum-rate thinned mask for one set of users.
    pub fn sta_mask(&self, users: &[UserLocation], seed: u64) -> Result<ThinningVector> {
        let d = &self.deployment;
        let obj = self.sta_objective(core::slice::from_ref(&users))?;
        Ok(optimize_sta(
            obj,
            d.n_elements(),
            d.n_active,
            &d.fixed(),
            &self.swarm.with_seed(seed),
        )?
        .best)
    }

    /// Mask maximizing the mean sum-rate over an ensemble of user drops.
    pub fn pta_mask<U: AsRef<[UserLocation]>>(
        &self,
        ensemble: &[U],
        seed: u64,
    ) -> Result<ThinningVector> {
        let d = &self.deployment;
        let obj = self.sta_objective(ensemble)?;
        Ok(optimize_sta(
            obj,
            d.n_elements(),
            d.n_active,
            &d.fixed(),
            &self.swarm.with_seed(seed),
        )?
        .best)
    }

    /// Grating-lobe-aware mask; independent of the users.
    pub fn gta_mask(&self, seed: u64) -> Result<ThinningVector> {
        let d = &self.deployment;
        Ok(optimize_gta(
            &d.geometry,
            d.n_active,
            &d.fixed(),
            &self.gta,
            &self.swarm.with_seed(seed),
        )?
        .best)
    }

    /// Movable-array positions for one set of users.
    pub fn mula_positions(&self, users: &[UserLocation], seed: u64) -> Result<Vec<f64>> {
        let d = &self.deployment;
        let problem = MulaProblem::new(
            d.wavelength(),
            users.to_vec(),
            d.mula_bounds,
            d.n_active,
            d.mula_min_spacing,
            self.norm_count(d.n_active),
            self.power,
            self.rzf,
        )?;
        Ok(optimize_positions_mula(&problem, &self.swarm.with_seed(seed))?.best)
    }
}

/// Layouts computed once and shared by all trials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Precomputed {
    pub gta: Option<ThinningVector>,
    pub pta: Option<ThinningVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub layout: Layout,
    pub report: RateReport,
}

/// Layout of `scheme` for one trial. Per-trial optimizations draw their
/// swarm seed from `trial_seed` and the scheme.
pub fn scheme_layout(
    scheme: Scheme,
    ctx: &EvalContext,
    pre: &Precomputed,
    users: &[UserLocation],
    trial_seed: u64,
) -> Result<Layout> {
    let d = &ctx.deployment;
    let seed = derive_seed(trial_seed, scheme.stream());
    Ok(match scheme {
        Scheme::Fula => Layout::Mask(d.fula_mask()),
        Scheme::Sula => Layout::Mask(d.sula_mask()),
        Scheme::Hula => Layout::Mask(d.hula_mask()),
        Scheme::Sta => Layout::Mask(ctx.sta_mask(users, seed)?),
        Scheme::Mula => Layout::Positions(ctx.mula_positions(users, seed)?),
        Scheme::Gta => Layout::Mask(
            pre.gta
                .clone()
                .ok_or(Error::InvalidConfig("GTA mask was not precomputed"))?,
        ),
        Scheme::Pta => Layout::Mask(
            pre.pta
                .clone()
                .ok_or(Error::InvalidConfig("PTA mask was not precomputed"))?,
        ),
    })
}

/// Builds the layout of `scheme` for this trial and evaluates its rates.
pub fn evaluate_scheme(
    scheme: Scheme,
    ctx: &EvalContext,
    pre: &Precomputed,
    users: &[UserLocation],
    trial_seed: u64,
) -> Result<SchemeOutcome> {
    let layout = scheme_layout(scheme, ctx, pre, users, trial_seed)?;
    let report = ctx.rates(&layout, users)?;
    Ok(SchemeOutcome {
        scheme,
        layout,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::pathloss;
    use crate::precoder::SnrReference;

    const LAM: f64 = 0.01;

    fn ctx(dep: Deployment, normalization: Normalization) -> EvalContext {
        let power = PowerConfig::from_snr(
            20.0,
            1.0,
            SnrReference {
                pathloss: pathloss(LAM, 3.0).unwrap(),
                beamforming_gain: 1.0,
            },
        )
        .unwrap();
        EvalContext {
            deployment: dep,
            power,
            rzf: RzfConfig::default(),
            normalization,
            swarm: SwarmConfig {
                n_particles: 8,
                n_iterations: 10,
                ..SwarmConfig::default()
            },
            gta: GtaConfig {
                grid_points: 1024,
                ..GtaConfig::default()
            },
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(
                alloc::format!("{s}")
                    .to_lowercase()
                    .parse::<Scheme>()
                    .unwrap(),
                s
            );
        }
        assert!("ULA".parse::<Scheme>().is_err());
    }

    #[test]
    fn reference_deployment() {
        let lam = crate::wavelength(30e9);
        let d = Deployment::reference(lam).unwrap();
        assert!((d.geometry.aperture_length() - 319.0 * lam / 2.0).abs() < 1e-12);
        assert!((d.geometry.min_valid_range() - 3.18).abs() < 0.01);
        assert_eq!(d.fula_mask().active_count(), 320);
        let sula = d.sula_mask();
        assert_eq!(sula.active_count(), 32);
        let p = d.active_positions(&sula).unwrap();
        assert!((p[31] - p[0] - 155.0 * lam).abs() < 1e-12);
        assert!(p
            .windows(2)
            .all(|w| (w[1] - w[0] - 5.0 * lam).abs() < 1e-12));
        let hula = d.active_positions(&d.hula_mask()).unwrap();
        assert!((hula[31] - 15.5 * lam).abs() < 1e-12);
        // Movable bounds cover the full aperture to within one grid step.
        let (lo, hi) = d.mula_bounds;
        assert!((hi - lo - 160.0 * lam).abs() < 1e-12);
        assert!(lo <= 0.0 && hi >= d.geometry.aperture_length());
        assert!(
            (lo + lam / 2.0).abs() <= lam / 2.0 && (hi - d.geometry.aperture_length()) <= lam / 2.0
        );
    }

    #[test]
    fn standalone_constructors() {
        let (g, m) = make_sula(32, 5.0 * LAM, LAM).unwrap();
        assert!((g.aperture_length() - 155.0 * LAM).abs() < 1e-12);
        assert_eq!(m.active_count(), 32);
        let (g, _) = make_hula(32, LAM).unwrap();
        assert!((g.aperture_length() - 15.5 * LAM).abs() < 1e-12);
    }

    #[test]
    fn invalid_deployments() {
        assert!(Deployment::new(40, 8, LAM, 0.7 * LAM, 10.0 * LAM).is_err());
        assert!(Deployment::new(80, 8, LAM, 5.0 * LAM, 10.0 * LAM).is_ok());
        assert!(Deployment::new(40, 41, LAM, LAM / 2.0, 10.0 * LAM).is_err());
        assert!(Deployment::new(40, 5, LAM, 5.0 * LAM, 10.0 * LAM).is_err());
    }

    #[test]
    fn single_user_schemes_agree_under_common_normalization() {
        let dep = Deployment::new(60, 6, LAM, 5.0 * LAM, 15.0 * LAM).unwrap();
        let c = ctx(dep, Normalization::Reference(60));
        let users = [UserLocation::new(0.3, 2.0).unwrap()];
        let sula = c
            .rates(&Layout::Mask(c.deployment.sula_mask()), &users)
            .unwrap()
            .sum_rate;
        let hula = c
            .rates(&Layout::Mask(c.deployment.hula_mask()), &users)
            .unwrap()
            .sum_rate;
        assert!((sula - hula).abs() < 1e-9 * sula);
    }

    #[test]
    fn precomputed_layouts_are_required_and_reused() {
        let dep = Deployment::new(60, 6, LAM, 5.0 * LAM, 10.0 * LAM).unwrap();
        let c = ctx(dep, Normalization::OwnCount);
        let users = [
            UserLocation::new(0.3, 1.0).unwrap(),
            UserLocation::new(-0.2, 1.5).unwrap(),
        ];
        assert!(evaluate_scheme(Scheme::Gta, &c, &Precomputed::default(), &users, 1).is_err());
        let pre = Precomputed {
            gta: Some(c.gta_mask(9).unwrap()),
            pta: None,
        };
        let a = evaluate_scheme(Scheme::Gta, &c, &pre, &users, 1).unwrap();
        let b = evaluate_scheme(Scheme::Gta, &c, &pre, &users, 2).unwrap();
        assert_eq!(a.layout, b.layout);
        let mask = match &a.layout {
            Layout::Mask(m) => m,
            Layout::Positions(_) => unreachable!(),
        };
        assert!(mask.is_active(0) && mask.is_active(59));
        assert_eq!(mask.active_count(), 6);
    }

    #[test]
    fn per_trial_schemes_respect_edges_and_bounds() {
        let dep = Deployment::new(60, 6, LAM, 5.0 * LAM, 10.0 * LAM).unwrap();
        let c = ctx(dep, Normalization::Reference(60));
        let users = [
            UserLocation::new(0.3, 1.0).unwrap(),
            UserLocation::new(-0.2, 1.5).unwrap(),
        ];
        let sta = evaluate_scheme(Scheme::Sta, &c, &Precomputed::default(), &users, 4).unwrap();
        if let Layout::Mask(m) = &sta.layout {
            assert!(m.is_active(0) && m.is_active(59) && m.active_count() == 6);
        } else {
            panic!("mask expected");
        }
        let mula = evaluate_scheme(Scheme::Mula, &c, &Precomputed::default(), &users, 4).unwrap();
        if let Layout::Positions(p) = &mula.layout {
            let (lo, hi) = c.deployment.mula_bounds;
            assert_eq!(p.len(), 6);
            assert!(p.iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12));
            assert!(p.windows(2).all(|w| w[1] - w[0] >= LAM / 2.0 - 1e-12));
        } else {
            panic!("positions expected");
        }
    }
}
