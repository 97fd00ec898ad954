//! Time evolution with an adaptive Dormand–Prince 5(4) integrator.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DensityState, LindbladModel, Observables, ZERO};
use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Autonomous linear-or-not ODE stepper over flat complex vectors.
pub(crate) struct Dopri {
    rtol: f64,
    atol: f64,
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    fsal: bool,
    pub(crate) steps: usize,
}

impl Dopri {
    pub(crate) fn new(len: usize, rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            k: std::array::from_fn(|_| vec![ZERO; len]),
            stage: vec![ZERO; len],
            y_new: vec![ZERO; len],
            fsal: false,
            steps: 0,
        }
    }

    fn combine(&mut self, y: &[Complex64], h: f64, coeffs: &[(usize, f64)]) {
        for (i, s) in self.stage.iter_mut().enumerate() {
            let mut acc = y[i];
            for &(j, c) in coeffs {
                acc += self.k[j][i] * (h * c);
            }
            *s = acc;
        }
    }

    /// Integrates `y` from `t0` to `t1`; `h` carries the step size between calls.
    pub(crate) fn advance<F>(&mut self, f: &mut F, y: &mut [Complex64], t0: f64, t1: f64, h: &mut f64) -> Result<()>
    where
        F: FnMut(&[Complex64], &mut [Complex64]),
    {
        let mut t = t0;
        if !self.fsal {
            f(y, &mut self.k[0]);
        }
        self.fsal = true;
        let span = (t1 - t0).abs().max(t1.abs());
        while t < t1 {
            let last = t + *h >= t1;
            let step = if last { t1 - t } else { *h };
            if step <= span * 1e-14 && !last {
                return Err(Error::StepSizeUnderflow { time: t, step });
            }

            self.combine(y, step, &[(0, A21)]);
            f(&self.stage, &mut self.k[1]);
            self.combine(y, step, &[(0, A31), (1, A32)]);
            f(&self.stage, &mut self.k[2]);
            self.combine(y, step, &[(0, A41), (1, A42), (2, A43)]);
            f(&self.stage, &mut self.k[3]);
            self.combine(y, step, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            f(&self.stage, &mut self.k[4]);
            self.combine(y, step, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            f(&self.stage, &mut self.k[5]);
            self.combine(y, step, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
            std::mem::swap(&mut self.stage, &mut self.y_new);
            f(&self.y_new, &mut self.k[6]);

            let mut err = 0.0;
            for i in 0..y.len() {
                let e = self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7;
                let sc = self.atol + self.rtol * y[i].norm().max(self.y_new[i].norm());
                err += (e.norm() * step / sc).powi(2);
            }
            let err = (err / y.len().max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::StepSizeUnderflow { time: t, step });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t1 } else { t + step };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.steps += 1;
                if !last || factor < 1.0 {
                    *h = step * factor;
                }
            } else {
                *h = step * factor.min(1.0);
                if *h <= span * 1e-14 {
                    return Err(Error::StepSizeUnderflow { time: t, step: *h });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Number of equal intervals; observables are reported at samples + 1 times.
    pub samples: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            rtol: 1e-8,
            atol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub observables: Observables,
    pub trace: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_state: DensityState,
    /// Largest |tr ρ(t) − tr ρ(0)| over the samples.
    pub max_trace_error: f64,
    pub steps: usize,
}

pub fn evolve(
    model: &LindbladModel,
    initial: &DensityState,
    duration: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", "must be finite and >= 0"));
    }
    let d = model.dimension();
    if initial.dimension() != d {
        return Err(Error::invalid("initial state", "dimension does not match the model"));
    }
    let mut points = vec![TrajectoryPoint {
        time: 0.0,
        observables: model.observables(initial),
        trace: initial.trace,
    }];
    if duration == 0.0 {
        return Ok(Trajectory {
            points,
            final_state: initial.clone(),
            max_trace_error: 0.0,
            steps: 0,
        });
    }

    let mut y: Vec<Complex64> = initial.matrix.as_slice().to_vec();
    let mut out = DMatrix::zeros(d, d);
    let mut work = DMatrix::zeros(d, d);
    let mut f = |y: &[Complex64], dy: &mut [Complex64]| {
        let rho = DMatrix::from_column_slice(d, d, y);
        model.apply_generator_into(&rho, &mut out, &mut work);
        dy.copy_from_slice(out.as_slice());
    };
    let mut dopri = Dopri::new(d * d, opts.rtol, opts.atol);
    let samples = opts.samples.max(1);
    let mut h = duration / samples as f64 / 10.0;
    let mut t = 0.0;
    let mut max_trace_error: f64 = 0.0;
    let mut state = initial.clone();
    for s in 1..=samples {
        let t_next = duration * s as f64 / samples as f64;
        dopri.advance(&mut f, &mut y, t, t_next, &mut h)?;
        t = t_next;
        state = DensityState::trajectory_sample(DMatrix::from_column_slice(d, d, &y));
        max_trace_error = max_trace_error.max((state.trace - initial.trace).abs());
        points.push(TrajectoryPoint {
            time: t,
            observables: model.observables(&state),
            trace: state.trace,
        });
    }
    Ok(Trajectory {
        points,
        final_state: DensityState::new(state.matrix),
        max_trace_error,
        steps: dopri.steps,
    })
}

impl DensityState {
    /// Trace and hermiticity only; the eigenvalue bound is left at NaN.
    fn trajectory_sample(matrix: DMatrix<Complex64>) -> Self {
        let trace = matrix.trace().re;
        let hermiticity_defect = super::max_abs(&(&matrix - matrix.adjoint()));
        Self {
            matrix,
            trace,
            hermiticity_defect,
            min_eigenvalue: f64::NAN,
        }
    }
}

/// Least-squares exponential rate of `values → asymptote` over the given samples.
pub fn fit_decay_rate(times: &[f64], values: &[f64], asymptote: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter_map(|(&t, &v)| {
            let dv = (v - asymptote).abs();
            (dv > 0.0).then(|| (t, dv.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + (t - mt) * (y - my), b + (t - mt).powi(2)));
    (den > 0.0).then(|| -num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_model, DensityState};
    use crate::model::{EnsembleMode, SystemConfig};

    fn thermal_model() -> LindbladModel {
        let cfg = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let mut fr = cfg.frame().unwrap();
        fr.g_tilde = 0.0;
        fr.g0 = 0.0;
        build_model(&fr, &cfg.ensemble, &cfg.oscillator, 60, true).unwrap()
    }

    #[test]
    fn dopri_integrates_an_exponential() {
        let mut d = Dopri::new(1, 1e-10, 1e-14);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut h = 0.1;
        let mut f = |y: &[Complex64], dy: &mut [Complex64]| dy[0] = y[0] * Complex64::new(-1.0, 2.0);
        d.advance(&mut f, &mut y, 0.0, 1.0, &mut h).unwrap();
        let exact = Complex64::new(-1.0, 2.0).exp();
        assert!((y[0] - exact).norm() < 1e-9);
    }

    #[test]
    fn thermalization_from_vacuum() {
        let m = thermal_model();
        let init = m.product_state(&[0.0, 1.0], &m.thermal_photons(0.0)).unwrap();
        let kappa = m.channels.iter().find(|c| c.label == "photon gain").unwrap().rate / 4.0;
        let t = 1.0 / (2.0 * kappa);
        let traj = evolve(&m, &init, t, &EvolveOptions { samples: 4, ..Default::default() }).unwrap();
        let n = traj.points.last().unwrap().observables.n_mean;
        let expect = 4.0 * (1.0 - (-2.0 * kappa * t).exp());
        assert!((n - expect).abs() < 0.01 * expect, "{n} vs {expect}");
        assert!(traj.max_trace_error < 1e-8);
        assert!(traj.final_state.hermiticity_defect < 1e-9);
        let rate = fit_decay_rate(
            &traj.points.iter().map(|p| p.time).collect::<Vec<_>>(),
            &traj.points.iter().map(|p| p.observables.n_mean).collect::<Vec<_>>(),
            4.0,
        )
        .unwrap();
        assert!((rate - 2.0 * kappa).abs() < 1e-4 * 2.0 * kappa);
    }

    #[test]
    fn zero_duration_returns_the_initial_point() {
        let m = thermal_model();
        let init = m.product_state(&m.qubit_ground(), &m.thermal_photons(1.0)).unwrap();
        let traj = evolve(&m, &init, 0.0, &EvolveOptions::default()).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.points[0].observables, m.observables(&init));
        assert!(evolve(&m, &init, -1.0, &EvolveOptions::default()).is_err());
        let _ = DensityState::new(init.matrix);
    }
}
