use approx::assert_relative_eq;
use nf_thin_core::array::{ArrayGeometry, ThinningVector};
use nf_thin_core::beam::grating_lobe_angles;
use nf_thin_core::channel::{channel_matrix, pathloss, ChannelConfig, UserLocation, Validity};
use nf_thin_core::precoder::{rzf_precoder, sinr, sum_rate, PowerConfig, RzfConfig};
use nf_thin_core::pso::{optimize_sta, top_k_binarize, StaObjective, SwarmConfig};
use nf_thin_core::C64;
use std::f64::consts::PI;

const LAM: f64 = 0.01;

fn lenient() -> ChannelConfig {
    ChannelConfig {
        validity: Validity::Lenient,
        ..ChannelConfig::default()
    }
}

/// Channel written out from the element phase formula, one entry at a time.
fn textbook_h(pos: &[f64], mask: &[bool], u: UserLocation) -> Vec<C64> {
    let n = pos.len() as f64;
    let beta = (LAM / (4.0 * PI * u.range)).powi(2);
    let common = C64::from_polar(beta.sqrt(), -2.0 * PI * u.range / LAM);
    pos.iter()
        .zip(mask)
        .map(|(&p, &on)| {
            if !on {
                return C64::new(0.0, 0.0);
            }
            let (s, c) = u.angle.sin_cos();
            let ph = -2.0 * PI / LAM * (p * s - p * p * c * c / (2.0 * u.range));
            common * C64::from_polar(1.0 / n.sqrt(), ph)
        })
        .collect()
}

fn invert(mut a: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    let n = a.len();
    let mut inv: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| C64::new((i == j) as u8 as f64, 0.0))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in (0..n).filter(|&r| r != col) {
            let f = a[r][col];
            for j in 0..n {
                let (x, y) = (a[col][j], inv[col][j]);
                a[r][j] -= f * x;
                inv[r][j] -= f * y;
            }
        }
    }
    inv
}

/// Sum-rate from W = H (HᴴH + αI)⁻¹ scaled to the budget.
fn textbook_sum_rate(h: &[Vec<C64>], p: &PowerConfig) -> f64 {
    let k = h.len();
    let n = h[0].len();
    let alpha = k as f64 * p.noise_variance / p.total_power;
    let gram: Vec<Vec<C64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let g: C64 = (0..n).map(|m| h[i][m].conj() * h[j][m]).sum();
                    g + if i == j {
                        C64::new(alpha, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let inv = invert(gram);
    let mut w: Vec<Vec<C64>> = (0..k)
        .map(|j| {
            (0..n)
                .map(|m| (0..k).map(|i| h[i][m] * inv[i][j]).sum())
                .collect()
        })
        .collect();
    let fro: f64 = w.iter().flatten().map(|x| x.norm_sqr()).sum();
    let s = (p.total_power / fro).sqrt();
    w.iter_mut().flatten().for_each(|x| *x *= s);
    (0..k)
        .map(|kk| {
            let g = |j: usize| {
                (0..n)
                    .map(|m| w[j][m].conj() * h[kk][m])
                    .sum::<C64>()
                    .norm_sqr()
            };
            let interference: f64 = (0..k).filter(|&j| j != kk).map(g).sum();
            (1.0 + g(kk) / (interference + p.noise_variance)).log2()
        })
        .sum()
}

#[test]
fn rzf_matches_textbook_formula() {
    let g = ArrayGeometry::uniform(24, LAM / 2.0, LAM).unwrap();
    let mask: Vec<bool> = (0..24).map(|i| i % 3 != 1).collect();
    let b = ThinningVector::new(mask.clone(), vec![]).unwrap();
    let users = [
        UserLocation::new(-0.7, 0.8).unwrap(),
        UserLocation::new(0.1, 2.5).unwrap(),
        UserLocation::new(0.9, 1.2).unwrap(),
    ];
    for (noise, total) in [(1e-12, 1.0), (1.0, 1e9), (1e-3, 3e4)] {
        let p = PowerConfig::new(noise, total).unwrap();
        let h = channel_matrix(&g, &b, &users, &lenient()).unwrap();
        let w = rzf_precoder(&h, &b, &p).unwrap();
        let ours = sum_rate(&sinr(&h, &w, &p).unwrap()).unwrap();
        let hs: Vec<Vec<C64>> = users
            .iter()
            .map(|&u| textbook_h(g.positions(), &mask, u))
            .collect();
        let want = textbook_sum_rate(&hs, &p);
        assert_relative_eq!(ours, want, max_relative = 1e-9);
    }
}

#[test]
fn channel_entries_match_textbook() {
    let g = ArrayGeometry::uniform(16, LAM / 2.0, LAM).unwrap();
    let b = ThinningVector::full(16);
    let u = UserLocation::new(0.3, 0.5).unwrap();
    let h = channel_matrix(&g, &b, &[u], &lenient()).unwrap();
    let want = textbook_h(g.positions(), &[true; 16], u);
    for (x, y) in h.column(0).iter().zip(&want) {
        assert!((x - y).norm() < 1e-12 * y.norm());
    }
    assert_relative_eq!(
        pathloss(LAM, 0.5).unwrap(),
        (LAM / (4.0 * PI * 0.5)).powi(2)
    );
}

#[test]
fn grating_lobes_at_two_wavelengths() {
    let p = grating_lobe_angles(2.0 * LAM, LAM, 0.0).unwrap();
    let deg: Vec<f64> = p.angles().iter().map(|a| a.to_degrees()).collect();
    assert_eq!(deg.len(), 2);
    assert_relative_eq!(deg[0], -30.0, epsilon = 1e-9);
    assert_relative_eq!(deg[1], 30.0, epsilon = 1e-9);

    let p = grating_lobe_angles(5.0 * LAM, LAM, 0.0).unwrap();
    assert_eq!(p.orders(), vec![-4, -3, -2, -1, 1, 2, 3, 4]);
}

#[test]
fn top_k_ties_go_to_lower_index() {
    let b = top_k_binarize(&[0.9, 0.9, 0.1, 0.5], 5, 3, &[0]).unwrap();
    assert_eq!(b.active_indices().collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(b.fixed(), &[0]);
}

fn small_sta() -> (StaObjective, usize) {
    let n = 10;
    let g = ArrayGeometry::uniform(n, 2.0 * LAM, LAM).unwrap();
    let users = [
        UserLocation::new(-0.5, 0.3).unwrap(),
        UserLocation::new(0.05, 0.6).unwrap(),
        UserLocation::new(0.6, 0.2).unwrap(),
    ];
    let obj = StaObjective::new(
        &g,
        &users,
        n,
        PowerConfig::new(1e-9, 1.0).unwrap(),
        RzfConfig::default(),
    )
    .unwrap();
    (obj, n)
}

#[test]
fn sta_swarm_finds_near_exhaustive_optimum() {
    let (obj, n) = small_sta();
    let mut best = f64::NEG_INFINITY;
    for bits in 0u32..(1 << n) {
        if bits.count_ones() != 4 || bits & 1 == 0 {
            continue;
        }
        let m = ThinningVector::new((0..n).map(|i| bits >> i & 1 == 1).collect(), vec![0]).unwrap();
        best = best.max(obj.sum_rate(&m).unwrap());
    }
    let swarm = SwarmConfig {
        n_particles: 20,
        n_iterations: 40,
        ..SwarmConfig::default()
    };
    let r = optimize_sta(obj.clone(), n, 4, &[0], &swarm.with_seed(3)).unwrap();
    assert!(r.best.is_active(0));
    assert_eq!(r.best.active_count(), 4);
    assert!(-r.best_cost >= 0.98 * best, "{} vs {best}", -r.best_cost);
}

#[test]
fn swarm_is_deterministic_per_seed() {
    let (obj, n) = small_sta();
    let swarm = SwarmConfig {
        n_particles: 8,
        n_iterations: 10,
        ..SwarmConfig::default()
    };
    let a = optimize_sta(obj.clone(), n, 4, &[], &swarm.with_seed(11)).unwrap();
    let b = optimize_sta(obj.clone(), n, 4, &[], &swarm.with_seed(11)).unwrap();
    assert_eq!(a, b);
    assert!(a.cost_history.windows(2).all(|w| w[1] <= w[0]));
}
