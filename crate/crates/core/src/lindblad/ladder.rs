//! Classical birth–death balance on the Dicke ladder of a driven ensemble
//! without the resonator.

use crate::analytic::CollectiveMoments;

#[derive(Debug, Clone, PartialEq)]
pub struct LadderSteadyState {
    /// P(m) for m = −N/2, …, N/2, i.e. indexed by k = m + N/2 excitations.
    pub distribution: Vec<f64>,
    pub moments: CollectiveMoments,
}

/// Downward rate from `k` to `k−1`, per unit γ₊: (j+m)(j−m+1).
fn down(n: usize, k: usize) -> f64 {
    (k * (n - k + 1)) as f64
}

/// Upward rate from `k` to `k+1`, per unit γ₋: (j−m)(j+m+1).
fn up(n: usize, k: usize) -> f64 {
    ((n - k) * (k + 1)) as f64
}

/// Steady state for f = γ₊/γ₋ ≥ 0, including f = ∞.
pub fn dicke_rate_ladder_steady(f: f64, n_qubits: usize) -> LadderSteadyState {
    let n = n_qubits;
    let distribution = if f == 0.0 {
        let mut p = vec![0.0; n + 1];
        p[n] = 1.0;
        p
    } else {
        // Rates normalized so neither is infinite.
        let (g_plus, g_minus) = if f <= 1.0 { (f, 1.0) } else { (1.0, 1.0 / f) };
        let mut logw = Vec::with_capacity(n + 1);
        logw.push(0.0f64);
        for k in 0..n {
            let prev = logw[k];
            logw.push(prev + (g_minus * up(n, k)).ln() - (g_plus * down(n, k + 1)).ln());
        }
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    };

    let mut rz = 0.0;
    let mut pm_mp = 0.0;
    let mut mp_pm = 0.0;
    for (k, &p) in distribution.iter().enumerate() {
        rz += p * (2.0 * k as f64 - n as f64);
        pm_mp += p * down(n, k);
        mp_pm += p * up(n, k);
    }
    LadderSteadyState {
        distribution,
        moments: CollectiveMoments { rz, pm_mp, mp_pm },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn single_qubit_two_state_balance() {
        let s = dicke_rate_ladder_steady(16.0, 1);
        assert!((s.moments.rz + 15.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn unit_ratio_is_uniform() {
        for n in [1, 2, 7, 30, 100] {
            let s = dicke_rate_ladder_steady(1.0, n);
            let u = 1.0 / (n + 1) as f64;
            assert!(s.distribution.iter().all(|p| (p - u).abs() < 1e-14));
            let c = (n * (n + 2)) as f64 / 6.0;
            assert!(s.moments.rz.abs() < 1e-12 * n as f64);
            assert!((s.moments.pm_mp - c).abs() < 1e-12 * c);
            assert!((s.moments.mp_pm - c).abs() < 1e-12 * c);
        }
    }

    #[test]
    fn extreme_ratios_pin_the_ends() {
        let s = dicke_rate_ladder_steady(f64::INFINITY, 12);
        assert_eq!(s.distribution[0], 1.0);
        assert_eq!(s.moments.rz, -12.0);
        assert_eq!(s.moments.pm_mp, 0.0);
        assert_eq!(s.moments.mp_pm, 12.0);
        let s = dicke_rate_ladder_steady(0.0, 12);
        assert_eq!(s.moments.rz, 12.0);
    }

    #[test]
    fn distribution_is_stationary_under_the_rate_matrix() {
        for &(f, n) in &[(0.5, 9usize), (16.0, 30), (1e3, 4)] {
            // Direct solve of Q p = 0 with a normalization row.
            let (gp, gm) = (f, 1.0);
            let mut q = DMatrix::<f64>::zeros(n + 1, n + 1);
            for k in 0..=n {
                if k > 0 {
                    q[(k - 1, k)] += gp * down(n, k);
                    q[(k, k)] -= gp * down(n, k);
                }
                if k < n {
                    q[(k + 1, k)] += gm * up(n, k);
                    q[(k, k)] -= gm * up(n, k);
                }
            }
            q.row_mut(0).fill(1.0);
            let mut b = DVector::zeros(n + 1);
            b[0] = 1.0;
            let p = q.lu().solve(&b).unwrap();
            let s = dicke_rate_ladder_steady(f, n);
            for k in 0..=n {
                assert!((p[k] - s.distribution[k]).abs() < 1e-10 * p.max().max(1e-300) + 1e-300);
            }
        }
    }
}
