//! Observables along a trajectory and the closed-form uncontrolled oracle.

use crate::control::{assemble_total, ControlOperator};
use crate::eigenpath::EigenFrame;
use crate::error::{Error, Result};
use crate::linalg::{eigh, inner, HermitianOperator, StateVector};
use crate::models::{RotatingFieldModel, TimeDependentHamiltonian};
use crate::propagate::Trajectory;

/// `|⟨level|ψ⟩|²`
pub fn fidelity(frame: &EigenFrame, psi: &StateVector, level: usize) -> Result<f64> {
    let target = frame.state(level)?;
    if target.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: target.dim(),
            right: psi.dim(),
        });
    }
    Ok(target.inner(psi).norm_sqr())
}

/// Ascending eigenvalues of `H0 + Σ f_j H_cj`.
pub fn total_spectrum(
    h0: &HermitianOperator,
    controls: &[HermitianOperator],
    fields: &[f64],
) -> Result<Vec<f64>> {
    Ok(eigh(&assemble_total(h0, controls, fields)?).values)
}

/// `(|⟨n|Σ f H_c|n⟩|, max_{m≠n} |⟨m|δH|n⟩|)` with
/// `δH = ∂H0/∂t + Σ f ∂H_c/∂t`, for the frame level `level`.
pub fn nonlinearity_vs_tunneling(
    model: &TimeDependentHamiltonian,
    t: f64,
    frame: &EigenFrame,
    level: usize,
    fields: &[f64],
    controls: &[ControlOperator],
) -> Result<(f64, f64)> {
    if fields.len() != controls.len() {
        return Err(Error::DimensionMismatch {
            left: fields.len(),
            right: controls.len(),
        });
    }
    let n = frame.state(level)?;
    let h0 = model.h0_at(t)?;
    let ops: Vec<HermitianOperator> = controls.iter().map(|op| op.at(&h0)).collect();
    let control_part = assemble_total(&HermitianOperator::zeros(h0.dim()), &ops, fields)?;
    let nonlinear = inner(n.amplitudes(), &control_part.matrix().matvec(n.amplitudes())?).norm();

    let mut delta = model.dh0_dt(t)?.into_matrix();
    for (op, &f) in controls.iter().zip(fields) {
        delta.add_scaled_assign(f, op.time_derivative(model, t)?.matrix());
    }
    let delta_n = delta.matvec(n.amplitudes())?;
    let tunneling = frame
        .states
        .iter()
        .enumerate()
        .filter(|(m, _)| *m != level)
        .map(|(_, m)| inner(m.amplitudes(), &delta_n).norm())
        .fold(0.0, f64::max);
    Ok((nonlinear, tunneling))
}

/// Exact uncontrolled fidelity of the rotating-field model started in the
/// ground state, from the frame co-rotating about z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiOracle {
    /// `Ω = |B_eff|`
    pub omega_eff: f64,
    /// `cos α = n̂ · m̂`
    pub cos_alpha: f64,
}

impl RabiOracle {
    pub fn new(model: &RotatingFieldModel) -> Self {
        let (st, ct) = model.theta.sin_cos();
        let b = [model.mu_b0 * st, 0.0, model.mu_b0 * ct - 0.5 * model.omega];
        let omega_eff = (b[0] * b[0] + b[2] * b[2]).sqrt();
        // m̂ = −(sinθ, 0, cosθ) is the ground-state Bloch vector at t = 0
        let cos_alpha = -(b[0] * st + b[2] * ct) / omega_eff;
        RabiOracle { omega_eff, cos_alpha }
    }

    pub fn fidelity(&self, t: f64) -> f64 {
        let c2 = self.cos_alpha * self.cos_alpha;
        0.5 * (1.0 + c2 + (1.0 - c2) * (2.0 * self.omega_eff * t).cos())
    }

    pub fn min_fidelity(&self) -> f64 {
        self.cos_alpha * self.cos_alpha
    }

    /// Time average over a full period.
    pub fn mean_fidelity(&self) -> f64 {
        0.5 * (1.0 + self.min_fidelity())
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::PI / self.omega_eff
    }
}

pub fn rabi_oracle(model: &RotatingFieldModel, t: f64) -> f64 {
    RabiOracle::new(model).fidelity(t)
}

/// Smallest `E_1 − E_0` of `H0` over `grid` and where it occurs.
pub fn min_gap(model: &TimeDependentHamiltonian, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::Other("min_gap needs a non-empty grid".into()));
    }
    if model.dim() < 2 {
        return Err(Error::LevelOutOfRange { level: 1, dim: model.dim() });
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &t in grid {
        let e = eigh(&model.h0_at(t)?).values;
        let gap = e[1] - e[0];
        if gap < best.0 {
            best = (gap, t);
        }
    }
    Ok(best)
}

/// One row of derived observables for a recorded sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub fidelity: f64,
    pub lyapunov: f64,
    pub total_energies: Vec<f64>,
    pub gap: f64,
    /// `E_1 − E_0` of `H0` alone.
    pub drift_gap: f64,
    pub fields: Vec<f64>,
    pub nonlinear_coeff: f64,
    pub tunneling_coeff: f64,
    pub regularized: bool,
    pub clamped: bool,
}

/// Diagnostics for every recorded sample, measured against frame `level`.
pub fn diagnose(traj: &Trajectory, level: usize) -> Result<Vec<DiagnosticsRow>> {
    let controls = traj.scheme.controls();
    (0..traj.len())
        .map(|i| {
            let t = traj.times[i];
            let sample = &traj.controls[i];
            let frame = &traj.frames[i];
            let h0 = traj.model.h0_at(t)?;
            let ops: Vec<HermitianOperator> = controls.iter().map(|op| op.at(&h0)).collect();
            let fields = if controls.is_empty() { Vec::new() } else { sample.fields.clone() };
            let total_energies = total_spectrum(&h0, &ops, &fields)?;
            let gap = if total_energies.len() > 1 {
                total_energies[1] - total_energies[0]
            } else {
                0.0
            };
            let mut drift = frame.energies.clone();
            drift.sort_by(f64::total_cmp);
            let drift_gap = if drift.len() > 1 { drift[1] - drift[0] } else { 0.0 };
            let (nonlinear_coeff, tunneling_coeff) =
                nonlinearity_vs_tunneling(&traj.model, t, frame, level, &fields, controls)?;
            Ok(DiagnosticsRow {
                t,
                fidelity: fidelity(frame, &traj.states[i], level)?,
                lyapunov: sample.lyapunov,
                total_energies,
                gap,
                drift_gap,
                fields,
                nonlinear_coeff,
                tunneling_coeff,
                regularized: sample.regularized,
                clamped: sample.clamped,
            })
        })
        .collect()
}

/// Indices strictly below both neighbours.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .collect()
}

/// Fraction of rows where the total gap exceeds the gap of `H0` alone.
pub fn gap_exceed_fraction(rows: &[DiagnosticsRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.gap > r.drift_gap).count() as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenpath::{analytic_rotating_eigs, frame_at};
    use crate::linalg::C64;
    use crate::models::{InterpolatedModel, Schedule};

    #[test]
    fn fidelity_examples() {
        let f = analytic_rotating_eigs(&RotatingFieldModel::fig1(), 0.7);
        let phased = f.states[0].scaled(C64::from_polar(1.0, 1.3));
        assert!((fidelity(&f, &phased, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity(&f, &f.states[1], 0).unwrap() < 1e-30);
        assert!(fidelity(&f, &StateVector::basis(3, 0), 0).is_err());
    }

    #[test]
    fn oracle_values() {
        let o = RabiOracle::new(&RotatingFieldModel::fig1());
        assert_eq!(o.fidelity(0.0), 1.0);
        // Ω² = sin²θ + (cosθ − 2)²
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((o.omega_eff - (s * s + (s - 2.0) * (s - 2.0)).sqrt()).abs() < 1e-15);
        assert!((o.omega_eff - 1.4736).abs() < 1e-4);
        assert!((o.period() - 2.132).abs() < 1e-3);
        assert!((o.min_fidelity() - 0.0790).abs() < 1e-4);
        assert!((o.fidelity(0.5 * o.period()) - o.min_fidelity()).abs() < 1e-14);
    }

    #[test]
    fn oracle_static_field_stays_put() {
        let m = RotatingFieldModel::new(1.0, 0.6, 0.0).unwrap();
        for k in 0..10 {
            assert!((rabi_oracle(&m, k as f64 * 0.3) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn spectrum_examples() {
        let m = RotatingFieldModel::fig1();
        let h0 = m.h0(0.4);
        let e = total_spectrum(&h0, &[], &[]).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
        let e = total_spectrum(&h0, std::slice::from_ref(&h0), &[-1.0]).unwrap();
        assert!(e.iter().all(|x| x.abs() < 1e-15));
        let e = total_spectrum(&h0, &[HermitianOperator::identity(2)], &[0.25]).unwrap();
        assert!((e[0] + 0.75).abs() < 1e-12 && (e[1] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn coefficients_trivial_cases() {
        let still: TimeDependentHamiltonian = RotatingFieldModel::new(1.0, 0.8, 0.0).unwrap().into();
        let f = frame_at(&still, 0.3, None).unwrap();
        let (nl, tu) = nonlinearity_vs_tunneling(&still, 0.3, &f, 0, &[0.7], &[ControlOperator::Drift(1.0)]).unwrap();
        assert!((nl - 0.7).abs() < 1e-12);
        assert_eq!(tu, 0.0);

        let m: TimeDependentHamiltonian = RotatingFieldModel::fig1().into();
        let f = frame_at(&m, 0.3, None).unwrap();
        let (nl, tu) = nonlinearity_vs_tunneling(&m, 0.3, &f, 0, &[0.0], &[ControlOperator::Drift(1.0)]).unwrap();
        assert_eq!(nl, 0.0);
        // |⟨E+|∂H0/∂t|E−⟩| = ω sinθ
        assert!((tu - 4.0 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn min_gap_examples() {
        let rot: TimeDependentHamiltonian = RotatingFieldModel::new(1.5, 0.3, 2.0).unwrap().into();
        let (g, _) = min_gap(&rot, &[0.0, 0.4, 1.7]).unwrap();
        assert!((g - 3.0).abs() < 1e-12);

        let lz: TimeDependentHamiltonian =
            InterpolatedModel::new(HermitianOperator::sigma_x(), HermitianOperator::sigma_z(), Schedule::Linear, 1.0)
                .unwrap()
                .into();
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let (g, at) = min_gap(&lz, &grid).unwrap();
        assert!((g - 2f64.sqrt()).abs() < 1e-12);
        assert!((at - 0.5).abs() < 1e-12);

        let (g, at) = min_gap(&lz, &[0.2]).unwrap();
        assert!((g - 2.0 * (0.64f64 + 0.04).sqrt()).abs() < 1e-12);
        assert_eq!(at, 0.2);
        assert!(min_gap(&lz, &[]).is_err());
    }

    #[test]
    fn local_minima_strict() {
        assert_eq!(local_minima(&[3.0, 1.0, 2.0, 2.0, 0.5, 0.5, 1.0]), vec![1]);
        assert!(local_minima(&[1.0]).is_empty());
    }

    #[test]
    fn gap_fraction() {
        let row = |gap| DiagnosticsRow {
            t: 0.0,
            fidelity: 1.0,
            lyapunov: 0.0,
            total_energies: vec![],
            gap,
            drift_gap: 2.0,
            fields: vec![],
            nonlinear_coeff: 0.0,
            tunneling_coeff: 0.0,
            regularized: false,
            clamped: false,
        };
        assert_eq!(gap_exceed_fraction(&[row(1.0), row(2.5), row(3.0), row(2.0)]), 0.5);
        assert_eq!(gap_exceed_fraction(&[]), 0.0);
    }
}
