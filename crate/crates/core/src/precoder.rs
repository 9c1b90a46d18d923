//! Regularized zero-forcing precoding, per-user SINR and sum-rate.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::{check_len, ThinningVector};
use crate::channel::ChannelMatrix;
use crate::linalg::{cholesky_solve, CMatrix};
use crate::{Error, Result, C64};

/// Noise variance and transmit power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub noise_variance: f64,
    pub total_power: f64,
    /// SNR the budget was derived from, if any.
    pub snr_db: Option<f64>,
}

/// Link that an SNR figure refers to.
///
/// A received SNR of `snr_db` is reached by a single user at pathloss
/// `pathloss` when the full budget is sent with beamforming gain
/// `beamforming_gain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReference {
    pub pathloss: f64,
    pub beamforming_gain: f64,
}

impl PowerConfig {
    pub fn new(noise_variance: f64, total_power: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !(total_power > 0.0) {
            return Err(Error::Domain(
                "noise variance and total power must be positive",
            ));
        }
        Ok(Self {
            noise_variance,
            total_power,
            snr_db: None,
        })
    }

    /// Budget `σ²·10^(snr/10) / (β_ref·g_ref)`.
    pub fn from_snr(snr_db: f64, noise_variance: f64, reference: SnrReference) -> Result<Self> {
        if !(reference.pathloss > 0.0) || !(reference.beamforming_gain > 0.0) {
            return Err(Error::Domain("SNR reference must have positive gain"));
        }
        let total = noise_variance * 10f64.powf(snr_db / 10.0)
            / (reference.pathloss * reference.beamforming_gain);
        let mut p = Self::new(noise_variance, total)?;
        p.snr_db = Some(snr_db);
        Ok(p)
    }

    /// Same configuration with noise and power scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            noise_variance: self.noise_variance * factor,
            total_power: self.total_power * factor,
            snr_db: self.snr_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Regularization {
    /// `α = K·σ² / P`.
    #[default]
    Mmse,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerNormalization {
    /// One common scale factor so that `Σ‖w_k‖² = P`.
    #[default]
    SumPower,
    /// Every column gets `P/K`.
    EqualPerUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RzfConfig {
    pub regularization: Regularization,
    pub normalization: PowerNormalization,
}

/// `N × K` beamforming matrix; rows of inactive antennas are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub columns: CMatrix,
}

impl PrecodingMatrix {
    pub fn column(&self, k: usize) -> &[C64] {
        self.columns.column(k)
    }

    pub fn transmit_power(&self) -> f64 {
        self.columns.frobenius_sq()
    }
}

/// Per-user SINR and rate, and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
}

impl RateReport {
    pub fn from_sinr(sinr: Vec<f64>) -> Result<Self> {
        let per_user_rate = sinr.iter().map(|&g| rate(g)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sum_rate: per_user_rate.iter().sum(),
            per_user_rate,
            per_user_sinr: sinr,
        })
    }

    pub fn min_sinr_db(&self) -> f64 {
        let min = self
            .per_user_sinr
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        10.0 * min.log10()
    }
}

fn rate(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::Domain("SINR must be non-negative"));
    }
    Ok((1.0 + sinr).log2())
}

/// `Σ log2(1 + Γ_k)`.
pub fn sum_rate(sinrs: &[f64]) -> Result<f64> {
    sinrs.iter().map(|&g| rate(g)).sum()
}

fn regularization(cfg: &RzfConfig, k: usize, p: &PowerConfig) -> f64 {
    match cfg.regularization {
        Regularization::Mmse => k as f64 * p.noise_variance / p.total_power,
        Regularization::Fixed(a) => a,
    }
}

/// RZF directions `H (Hᴴ H + α I)⁻¹` on a channel with no zero rows
/// removed, normalized to the power budget.
fn rzf_dense(h: &CMatrix, p: &PowerConfig, cfg: &RzfConfig) -> Result<CMatrix> {
    let k = h.cols();
    if k == 0 {
        return Err(Error::Empty("user list"));
    }
    let alpha = regularization(cfg, k, p);
    if !(alpha >= 0.0) {
        return Err(Error::Domain("regularization must be non-negative"));
    }
    let mut gram = h.adjoint_mul(h)?;
    for i in 0..k {
        gram[(i, i)] += alpha;
    }
    let inv = cholesky_solve(&gram, &CMatrix::identity(k))?;
    let mut w = h.mul(&inv)?;
    match cfg.normalization {
        PowerNormalization::SumPower => {
            let power = w.frobenius_sq();
            if !(power > 0.0) || !power.is_finite() {
                return Err(Error::Singular);
            }
            w.scale((p.total_power / power).sqrt());
        }
        PowerNormalization::EqualPerUser => {
            let target = p.total_power / k as f64;
            for j in 0..k {
                let col = w.column_mut(j);
                let power: f64 = col.iter().map(|x| x.norm_sqr()).sum();
                if !(power > 0.0) || !power.is_finite() {
                    return Err(Error::Singular);
                }
                let s = (target / power).sqrt();
                for x in col {
                    *x *= s;
                }
            }
        }
    }
    Ok(w)
}

/// RZF precoder with MMSE regularization and sum-power normalization.
pub fn rzf_precoder(
    h: &ChannelMatrix,
    b: &ThinningVector,
    p: &PowerConfig,
) -> Result<PrecodingMatrix> {
    rzf_precoder_with(h, b, p, &RzfConfig::default())
}

/// RZF precoder computed on the active rows of `h` and scattered back into
/// an `N × K` matrix.
pub fn rzf_precoder_with(
    h: &ChannelMatrix,
    b: &ThinningVector,
    p: &PowerConfig,
    cfg: &RzfConfig,
) -> Result<PrecodingMatrix> {
    check_len(h.n_antennas(), b.len())?;
    let active: Vec<usize> = b.active_indices().collect();
    if active.is_empty() {
        return Err(Error::InvalidMask("no active antennas".into()));
    }
    let w_active = rzf_dense(&h.entries.select_rows(&active), p, cfg)?;
    let mut w = CMatrix::zeros(h.n_antennas(), h.n_users());
    for j in 0..h.n_users() {
        let src = w_active.column(j);
        let dst = w.column_mut(j);
        for (&row, &x) in active.iter().zip(src) {
            dst[row] = x;
        }
    }
    Ok(PrecodingMatrix { columns: w })
}

fn sinr_dense(h: &CMatrix, w: &CMatrix, noise_variance: f64) -> Result<Vec<f64>> {
    if h.cols() != w.cols() {
        return Err(Error::LengthMismatch {
            expected: h.cols(),
            found: w.cols(),
        });
    }
    // m[(j, k)] = w_jᴴ h_k
    let m = w.adjoint_mul(h)?;
    let k = h.cols();
    Ok((0..k)
        .map(|user| {
            let signal = m[(user, user)].norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&j| j != user)
                .map(|j| m[(j, user)].norm_sqr())
                .sum();
            signal / (noise_variance + interference)
        })
        .collect())
}

/// `Γ_k = |w_kᴴ h_k|² / (σ² + Σ_{j≠k} |w_jᴴ h_k|²)`.
pub fn sinr(h: &ChannelMatrix, w: &PrecodingMatrix, p: &PowerConfig) -> Result<Vec<f64>> {
    sinr_dense(&h.entries, &w.columns, p.noise_variance)
}

/// RZF rates for a channel restricted to its active antennas.
///
/// Equivalent to building the masked `N × K` channel, precoding and
/// evaluating [`sinr`], since zero rows contribute nothing.
pub fn evaluate_rzf(h_active: &CMatrix, p: &PowerConfig, cfg: &RzfConfig) -> Result<RateReport> {
    let w = rzf_dense(h_active, p, cfg)?;
    RateReport::from_sinr(sinr_dense(h_active, &w, p.noise_variance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayGeometry;
    use crate::channel::{channel_matrix, ChannelConfig, UserLocation};
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn deployment(
        n: usize,
        users: &[(f64, f64)],
        mask: &ThinningVector,
    ) -> (ChannelMatrix, PowerConfig) {
        let lam = 0.01;
        let g = ArrayGeometry::uniform(n, lam / 2.0, lam).unwrap();
        let users: Vec<_> = users
            .iter()
            .map(|&(t, r)| UserLocation::new(t, r).unwrap())
            .collect();
        let cfg = ChannelConfig {
            validity: crate::channel::Validity::Lenient,
            ..Default::default()
        };
        let h = channel_matrix(&g, mask, &users, &cfg).unwrap();
        let beta = crate::channel::pathloss(lam, 10.0).unwrap();
        let p = PowerConfig::from_snr(
            20.0,
            1.0,
            SnrReference {
                pathloss: beta,
                beamforming_gain: 1.0,
            },
        )
        .unwrap();
        (h, p)
    }

    #[test]
    fn sum_rate_examples() {
        assert_relative_eq!(sum_rate(&[1.0, 1.0]).unwrap(), 2.0);
        assert_relative_eq!(sum_rate(&[3.0]).unwrap(), 2.0);
        assert_eq!(sum_rate(&[0.0; 5]).unwrap(), 0.0);
        assert!(sum_rate(&[1.0, -0.1]).is_err());
        assert!(sum_rate(&[f64::NAN]).is_err());
    }

    #[test]
    fn unit_sinr_gives_one_bit() {
        let h = ChannelMatrix {
            entries: CMatrix::from_columns(&[vec![c(1.0, 0.0)]]).unwrap(),
            pathloss: vec![1.0],
            validity_warnings: 0,
        };
        let w = PrecodingMatrix {
            columns: CMatrix::from_columns(&[vec![c(0.0, 0.5)]]).unwrap(),
        };
        let p = PowerConfig::new(0.25, 1.0).unwrap();
        let g = sinr(&h, &w, &p).unwrap();
        assert_relative_eq!(g[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(sum_rate(&g).unwrap(), 1.0);
    }

    #[test]
    fn zero_precoder_gives_zero_rate() {
        let (h, p) = deployment(8, &[(0.0, 1.0), (0.5, 2.0)], &ThinningVector::full(8));
        let w = PrecodingMatrix {
            columns: CMatrix::zeros(8, 2),
        };
        let g = sinr(&h, &w, &p).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        assert_eq!(sum_rate(&g).unwrap(), 0.0);
    }

    #[test]
    fn hand_built_two_user_case() {
        // h1 = [1, 0], h2 = [1, 1]; w1 = [1, 0], w2 = [0, 2], σ² = 0.5.
        // w1ᴴh1 = 1, w2ᴴh1 = 0, w1ᴴh2 = 1, w2ᴴh2 = 2.
        // Γ1 = 1 / (0.5 + 0) = 2, Γ2 = 4 / (0.5 + 1) = 8/3.
        let h = ChannelMatrix {
            entries: CMatrix::from_columns(&[
                vec![c(1.0, 0.0), c(0.0, 0.0)],
                vec![c(1.0, 0.0), c(1.0, 0.0)],
            ])
            .unwrap(),
            pathloss: vec![1.0, 1.0],
            validity_warnings: 0,
        };
        let w = PrecodingMatrix {
            columns: CMatrix::from_columns(&[
                vec![c(1.0, 0.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), c(2.0, 0.0)],
            ])
            .unwrap(),
        };
        let g = sinr(&h, &w, &PowerConfig::new(0.5, 5.0).unwrap()).unwrap();
        assert_relative_eq!(g[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(g[1], 8.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn single_user_is_matched_filter() {
        let (h, p) = deployment(16, &[(0.2, 3.0)], &ThinningVector::full(16));
        let w = rzf_precoder(&h, &ThinningVector::full(16), &p).unwrap();
        assert_relative_eq!(w.transmit_power(), p.total_power, max_relative = 1e-12);
        let ratio = w.column(0)[3] / h.column(0)[3];
        for (x, y) in w.column(0).iter().zip(h.column(0)) {
            assert!((x - y * ratio).norm() < 1e-9 * x.norm().max(1e-30));
        }
        assert!(ratio.im.abs() < 1e-9 * ratio.norm());
    }

    #[test]
    fn zero_forcing_limit_nulls_interference() {
        let (h, p) = deployment(
            16,
            &[(-0.6, 3.0), (0.0, 5.0), (0.5, 4.0)],
            &ThinningVector::full(16),
        );
        let cfg = RzfConfig {
            regularization: Regularization::Fixed(1e-14 * h.pathloss[0]),
            ..Default::default()
        };
        let w = rzf_precoder_with(&h, &ThinningVector::full(16), &p, &cfg).unwrap();
        let m = w.columns.adjoint_mul(&h.entries).unwrap();
        for k in 0..3 {
            for j in 0..3 {
                if j != k {
                    assert!(m[(j, k)].norm() / m[(k, k)].norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn rank_deficient_channel_is_well_posed() {
        let (h, p) = deployment(8, &[(0.1, 2.0), (0.1, 2.0)], &ThinningVector::full(8));
        let w = rzf_precoder(&h, &ThinningVector::full(8), &p).unwrap();
        let g = sinr(&h, &w, &p).unwrap();
        assert!(g.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!(matches!(
            rzf_precoder_with(
                &h,
                &ThinningVector::full(8),
                &p,
                &RzfConfig {
                    regularization: Regularization::Fixed(0.0),
                    ..Default::default()
                }
            ),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn per_user_normalization() {
        let (h, p) = deployment(8, &[(0.1, 2.0), (-0.4, 3.0)], &ThinningVector::full(8));
        let cfg = RzfConfig {
            normalization: PowerNormalization::EqualPerUser,
            ..Default::default()
        };
        let w = rzf_precoder_with(&h, &ThinningVector::full(8), &p, &cfg).unwrap();
        for k in 0..2 {
            let pk: f64 = w.column(k).iter().map(|x| x.norm_sqr()).sum();
            assert_relative_eq!(pk, p.total_power / 2.0, max_relative = 1e-12);
        }
    }

    fn arb_case() -> impl Strategy<Value = (Vec<bool>, Vec<(f64, f64)>)> {
        (
            proptest::collection::vec(any::<bool>(), 12),
            proptest::collection::vec((-1.2f64..1.2, 0.2f64..5.0), 1..4),
        )
            .prop_map(|(mut bits, users)| {
                bits[0] = true;
                (bits, users)
            })
    }

    proptest! {
        #[test]
        fn power_budget_and_support((bits, users) in arb_case()) {
            let b = ThinningVector::new(bits, vec![0]).unwrap();
            let (h, p) = deployment(12, &users, &b);
            let w = rzf_precoder(&h, &b, &p).unwrap();
            prop_assert!((w.transmit_power() - p.total_power).abs() <= 1e-10 * p.total_power);
            for n in 0..12 {
                if !b.is_active(n) {
                    for k in 0..users.len() {
                        prop_assert_eq!(w.columns[(n, k)], C64::new(0.0, 0.0));
                    }
                }
            }
            let fast = evaluate_rzf(&h.entries.select_rows(&b.active_indices().collect::<Vec<_>>()), &p, &RzfConfig::default()).unwrap();
            let slow = sum_rate(&sinr(&h, &w, &p).unwrap()).unwrap();
            prop_assert!((fast.sum_rate - slow).abs() <= 1e-9 * slow.max(1.0));
        }

        #[test]
        fn global_phase_and_scale_invariance((bits, users) in arb_case(), phi in 0.0f64..core::f64::consts::TAU, scale in 0.01f64..100.0) {
            let b = ThinningVector::new(bits, vec![0]).unwrap();
            let (h, p) = deployment(12, &users, &b);
            let base = sinr(&h, &rzf_precoder(&h, &b, &p).unwrap(), &p).unwrap();

            let mut rotated = h.clone();
            for x in rotated.entries.column_mut(0) {
                *x *= C64::from_polar(1.0, phi);
            }
            let g1 = sinr(&rotated, &rzf_precoder(&rotated, &b, &p).unwrap(), &p).unwrap();
            let ps = p.scaled(scale);
            let g2 = sinr(&h, &rzf_precoder(&h, &b, &ps).unwrap(), &ps).unwrap();
            for k in 0..base.len() {
                prop_assert!((g1[k] - base[k]).abs() <= 1e-10 * base[k].max(1e-12));
                prop_assert!((g2[k] - base[k]).abs() <= 1e-9 * base[k].max(1e-12));
            }
        }
    }
}
