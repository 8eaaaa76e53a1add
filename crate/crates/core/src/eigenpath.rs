//! Instantaneous eigenframes of `H0(t)` with a parallel-transport gauge.

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, inner, StateVector, C64};
use crate::models::{RotatingFieldModel, TimeDependentHamiltonian};

/// Levels closer than this are treated as degenerate when differentiating.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Eigenpairs of `H0(t)` at one instant.
///
/// Without a predecessor the levels are ascending in energy; when chained
/// through [`frame_at`] with a previous frame, level `k` is the continuation
/// of the previous level `k` and its phase makes the overlap real positive.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFrame {
    pub t: f64,
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl EigenFrame {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, level: usize) -> Result<&StateVector> {
        self.states.get(level).ok_or(Error::LevelOutOfRange {
            level,
            dim: self.dim(),
        })
    }
}

pub fn frame_at(
    model: &TimeDependentHamiltonian,
    t: f64,
    prev: Option<&EigenFrame>,
) -> Result<EigenFrame> {
    let decomposition = eigh(&model.h0_at(t)?);
    let n = decomposition.values.len();
    let Some(prev) = prev else {
        return Ok(EigenFrame {
            t,
            energies: decomposition.values,
            states: decomposition.vectors,
        });
    };
    if prev.dim() != n {
        return Err(Error::DimensionMismatch {
            left: prev.dim(),
            right: n,
        });
    }

    let mut taken = vec![false; n];
    let mut energies = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for (k, old) in prev.states.iter().enumerate() {
        let (best, overlap) = decomposition
            .vectors
            .iter()
            .enumerate()
            .map(|(j, v)| (j, old.inner(v)))
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("non-empty frame");
        if overlap.norm() < 0.5 || taken[best] {
            return Err(Error::GaugeLost {
                t,
                level: k,
                overlap: overlap.norm(),
            });
        }
        taken[best] = true;
        let phase = overlap.conj() / overlap.norm();
        energies.push(decomposition.values[best]);
        states.push(decomposition.vectors[best].scaled(phase));
    }
    Ok(EigenFrame { t, energies, states })
}

/// `|ṅ(t)⟩ = Σ_{m≠n} |m⟩⟨m|∂H0/∂t|n⟩ / (E_n − E_m)`, the derivative in the
/// gauge with `⟨n|ṅ⟩ = 0`.
pub fn eigenstate_derivative(
    model: &TimeDependentHamiltonian,
    t: f64,
    level: usize,
    frame: &EigenFrame,
) -> Result<Vec<C64>> {
    let target = frame.state(level)?;
    let dh = model.dh0_dt(t)?;
    let dh_n = dh.matrix().matvec(target.amplitudes())?;
    let mut out = vec![c(0.0, 0.0); frame.dim()];
    for (m, other) in frame.states.iter().enumerate() {
        if m == level {
            continue;
        }
        let gap = frame.energies[level] - frame.energies[m];
        if gap.abs() < DEGENERACY_TOL {
            return Err(Error::Degenerate {
                t,
                a: level.min(m),
                b: level.max(m),
                gap: gap.abs(),
            });
        }
        let coeff = inner(other.amplitudes(), &dh_n) / gap;
        for (o, a) in out.iter_mut().zip(other.amplitudes()) {
            *o += coeff * a;
        }
    }
    Ok(out)
}

/// Closed-form eigenframe of the rotating-field model, `[|E−⟩, |E+⟩]`:
///
/// ```text
/// |E+⟩ =  cos(θ/2) e^{-iφ} |↑⟩ + sin(θ/2) |↓⟩
/// |E−⟩ = −sin(θ/2) e^{-iφ} |↑⟩ + cos(θ/2) |↓⟩
/// ```
///
/// The `e^{-iφ}` sign is what makes these eigenvectors of
/// `sinθ cosφ σx + sinθ sinφ σy + cosθ σz` with the standard `σy`.
pub fn analytic_rotating_eigs(model: &RotatingFieldModel, t: f64) -> EigenFrame {
    let (s, co) = (0.5 * model.theta).sin_cos();
    let ph = C64::from_polar(1.0, -model.phi(t));
    let minus = StateVector::from_amplitudes(vec![ph * (-s), c(co, 0.0)]);
    let plus = StateVector::from_amplitudes(vec![ph * co, c(s, 0.0)]);
    EigenFrame {
        t,
        energies: vec![-model.mu_b0, model.mu_b0],
        states: vec![minus, plus],
    }
}

/// Time derivative of [`analytic_rotating_eigs`] in its own phase convention.
pub fn analytic_rotating_derivative(model: &RotatingFieldModel, t: f64, level: usize) -> Vec<C64> {
    let (s, co) = (0.5 * model.theta).sin_cos();
    let dph = C64::from_polar(1.0, -model.phi(t)) * c(0.0, -model.omega);
    let upper = if level == 0 { -s } else { co };
    vec![dph * upper, c(0.0, 0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expectation, HermitianOperator};
    use crate::models::{InterpolatedModel, Schedule};
    use std::f64::consts::FRAC_PI_8;

    fn fig1() -> TimeDependentHamiltonian {
        RotatingFieldModel::fig1().into()
    }

    #[test]
    fn ground_state_at_t0_matches_closed_form() {
        let f = frame_at(&fig1(), 0.0, None).unwrap();
        assert!((f.energies[0] + 1.0).abs() < 1e-14);
        let g = f.states[0].amplitudes();
        // first component made real positive: (sin π/8, −cos π/8) = −(−sin π/8, cos π/8)
        assert!((g[0] - c(FRAC_PI_8.sin(), 0.0)).norm() < 1e-14);
        assert!((g[1] - c(-FRAC_PI_8.cos(), 0.0)).norm() < 1e-14);
        let analytic = analytic_rotating_eigs(&RotatingFieldModel::fig1(), 0.0);
        assert!((analytic.states[0].inner(&f.states[0]).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn analytic_frame_examples() {
        let m = RotatingFieldModel::fig1();
        let f = analytic_rotating_eigs(&m, 0.0);
        let p = f.states[1].amplitudes();
        assert!((p[0] - c(FRAC_PI_8.cos(), 0.0)).norm() < 1e-15);
        assert!((p[1] - c(FRAC_PI_8.sin(), 0.0)).norm() < 1e-15);

        let flat = RotatingFieldModel::new(1.0, 0.0, 3.0).unwrap();
        let f = analytic_rotating_eigs(&flat, 0.4);
        assert!((f.states[0].inner(&StateVector::basis(2, 1)).norm() - 1.0).abs() < 1e-15);
        assert!((f.states[1].inner(&StateVector::basis(2, 0)).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_states_are_eigenvectors() {
        let m = RotatingFieldModel::new(0.8, 1.2, 3.3).unwrap();
        for k in 0..25 {
            let t = 0.173 * k as f64;
            let f = analytic_rotating_eigs(&m, t);
            let h = m.h0(t);
            for (lvl, e) in [(0usize, -0.8), (1, 0.8)] {
                let hv = h.matrix().matvec(f.states[lvl].amplitudes()).unwrap();
                for (a, b) in hv.iter().zip(f.states[lvl].amplitudes()) {
                    assert!((a - b * e).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn idempotent_with_self_as_prev() {
        let model = fig1();
        let f = frame_at(&model, 0.71, None).unwrap();
        let g = frame_at(&model, 0.71, Some(&f)).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn chained_frames_have_real_positive_overlaps() {
        let model = fig1();
        let mut prev = frame_at(&model, 0.0, None).unwrap();
        for k in 1..=300 {
            let cur = frame_at(&model, k as f64 * 1e-2, Some(&prev)).unwrap();
            for lvl in 0..2 {
                let o = prev.states[lvl].inner(&cur.states[lvl]);
                assert!(o.im.abs() < 1e-14 && o.re >= 0.999);
            }
            assert!((cur.energies[0] + 1.0).abs() < 1e-12 && (cur.energies[1] - 1.0).abs() < 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn gauge_lost_on_coarse_step() {
        // σx → σz flips which basis vector is the ground state; a single jump loses it.
        let model: TimeDependentHamiltonian = InterpolatedModel::new(
            HermitianOperator::sigma_z().scale(-1.0),
            HermitianOperator::sigma_z(),
            Schedule::Linear,
            1.0,
        )
        .unwrap()
        .into();
        let f0 = frame_at(&model, 0.0, None).unwrap();
        let err = frame_at(&model, 1.0, Some(&f0));
        // exact crossing: eigenvectors stay put, so continuity keeps them; energies swap order
        let f1 = err.unwrap();
        assert!(f1.energies[0] > f1.energies[1]);

        let model: TimeDependentHamiltonian = InterpolatedModel::new(
            HermitianOperator::sigma_z(),
            HermitianOperator::sigma_x(),
            Schedule::Linear,
            1.0,
        )
        .unwrap()
        .into();
        let f0 = frame_at(&model, 0.0, None).unwrap();
        let mut far = f0.clone();
        far.states = vec![
            StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap(),
            StateVector::new(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap(),
        ];
        let at = frame_at(&model, 0.0, Some(&far));
        assert!(matches!(at, Err(Error::GaugeLost { .. })));
    }

    #[test]
    fn derivative_norm_parallel_transport_gauge() {
        // ⟨n|ṅ⟩ = 0 gauge: |ṅ| = (ω/2) sinθ. The analytic phase convention has ω sin(θ/2).
        let m = RotatingFieldModel::fig1();
        let model: TimeDependentHamiltonian = m.into();
        for k in 0..10 {
            let t = 0.29 * k as f64;
            let f = frame_at(&model, t, None).unwrap();
            let d = eigenstate_derivative(&model, t, 0, &f).unwrap();
            let nrm = StateVector::from_amplitudes(d.clone()).norm();
            assert!((nrm - 0.5 * m.omega * m.theta.sin()).abs() < 1e-12);
            assert!(inner(f.states[0].amplitudes(), &d).norm() < 1e-14);

            let da = analytic_rotating_derivative(&m, t, 0);
            let nrm = StateVector::from_amplitudes(da).norm();
            assert!((nrm - m.omega * (0.5 * m.theta).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_zero_without_rotation() {
        let model: TimeDependentHamiltonian = RotatingFieldModel::new(1.0, 0.7, 0.0).unwrap().into();
        let f = frame_at(&model, 2.0, None).unwrap();
        let d = eigenstate_derivative(&model, 2.0, 0, &f).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let model = fig1();
        let h = 1e-6;
        for k in 0..10 {
            let t = 0.13 + 0.31 * k as f64;
            let f = frame_at(&model, t, None).unwrap();
            let fp = frame_at(&model, t + h, Some(&f)).unwrap();
            let fm = frame_at(&model, t - h, Some(&f)).unwrap();
            let d = eigenstate_derivative(&model, t, 0, &f).unwrap();
            for (i, di) in d.iter().enumerate() {
                let fd = (fp.states[0].amplitudes()[i] - fm.states[0].amplitudes()[i]) / (2.0 * h);
                assert!((fd - di).norm() < 1e-5, "component {i} at t={t}: {fd} vs {di}");
            }
        }
    }

    #[test]
    fn degenerate_levels_are_rejected() {
        let model: TimeDependentHamiltonian = InterpolatedModel::new(
            HermitianOperator::sigma_z(),
            HermitianOperator::sigma_z().scale(-1.0),
            Schedule::Linear,
            2.0,
        )
        .unwrap()
        .into();
        let f = frame_at(&model, 1.0, None).unwrap();
        assert!(matches!(
            eigenstate_derivative(&model, 1.0, 0, &f),
            Err(Error::Degenerate { a: 0, b: 1, .. })
        ));
    }

    #[test]
    fn analytic_ground_energy_expectation() {
        let m = RotatingFieldModel::fig1();
        for k in 0..7 {
            let t = 0.5 * k as f64;
            let f = analytic_rotating_eigs(&m, t);
            assert!((expectation(&m.h0(t), &f.states[0]).unwrap() + 1.0).abs() < 1e-14);
        }
    }
}
