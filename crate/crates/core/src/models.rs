//! Time-dependent drift Hamiltonians `H0(t)` with analytic time derivatives.

use std::f64::consts::FRAC_PI_4;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{c, pauli_combo, ComplexMatrix, HermitianOperator};

/// Boundary slack for times that land just outside a finite domain through
/// `t0 + k * dt` rounding.
const DOMAIN_SLACK: f64 = 1e-9;

/// `H0(t) = mu_b0 (sin θ cos ωt σx + sin θ sin ωt σy + cos θ σz)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotatingFieldModel {
    pub mu_b0: f64,
    pub theta: f64,
    pub omega: f64,
}

impl RotatingFieldModel {
    pub fn new(mu_b0: f64, theta: f64, omega: f64) -> Result<Self> {
        if !(mu_b0 > 0.0 && mu_b0.is_finite()) {
            return Err(Error::InvalidModel(format!("mu_b0 must be positive, got {mu_b0}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidModel(format!("theta must lie in [0, pi], got {theta}")));
        }
        if !omega.is_finite() {
            return Err(Error::InvalidModel(format!("omega must be finite, got {omega}")));
        }
        Ok(RotatingFieldModel { mu_b0, theta, omega })
    }

    /// μB₀ = 1, ω = 4, θ = π/4.
    pub fn fig1() -> Self {
        RotatingFieldModel {
            mu_b0: 1.0,
            theta: FRAC_PI_4,
            omega: 4.0,
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.omega * t
    }

    /// Unit field direction `n(t)·σ`, i.e. `H0(t) / mu_b0`.
    pub fn direction(&self, t: f64) -> HermitianOperator {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi(t).sin_cos();
        pauli_combo(st * cp, st * sp, ct, 0.0)
    }

    pub fn h0(&self, t: f64) -> HermitianOperator {
        self.direction(t).scale(self.mu_b0)
    }

    pub fn dh0_dt(&self, t: f64) -> HermitianOperator {
        let (sp, cp) = self.phi(t).sin_cos();
        let a = self.mu_b0 * self.omega * self.theta.sin();
        pauli_combo(-a * sp, a * cp, 0.0, 0.0)
    }
}

/// Interpolation schedule `λ(t)` with `λ(0) = 0`, `λ(T) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Linear,
    /// `3u² - 2u³` with `u = t / T`.
    Smoothstep,
    /// Piecewise-linear through `(t, λ)` knots.
    Polyline(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatedModel {
    h_i: HermitianOperator,
    h_f: HermitianOperator,
    schedule: Schedule,
    total_time: f64,
}

impl InterpolatedModel {
    pub fn new(
        h_i: HermitianOperator,
        h_f: HermitianOperator,
        schedule: Schedule,
        total_time: f64,
    ) -> Result<Self> {
        if h_i.dim() != h_f.dim() {
            return Err(Error::DimensionMismatch {
                left: h_i.dim(),
                right: h_f.dim(),
            });
        }
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "total_time must be positive, got {total_time}"
            )));
        }
        if let Schedule::Polyline(knots) = &schedule {
            validate_polyline(knots, total_time)?;
        }
        Ok(InterpolatedModel {
            h_i,
            h_f,
            schedule,
            total_time,
        })
    }

    pub fn h_i(&self) -> &HermitianOperator {
        &self.h_i
    }

    pub fn h_f(&self) -> &HermitianOperator {
        &self.h_f
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// `(λ(t), dλ/dt)`
    pub fn schedule_eval(&self, t: f64) -> Result<(f64, f64)> {
        let big_t = self.total_time;
        let t = clamp_domain(t, 0.0, big_t)?;
        Ok(match &self.schedule {
            Schedule::Linear => (t / big_t, 1.0 / big_t),
            Schedule::Smoothstep => {
                let u = t / big_t;
                (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u) / big_t)
            }
            Schedule::Polyline(knots) => {
                // right-sided slope at interior knots, left-sided at T
                let seg = knots
                    .windows(2)
                    .position(|w| t < w[1].0)
                    .unwrap_or(knots.len() - 2);
                let (t0, l0) = knots[seg];
                let (t1, l1) = knots[seg + 1];
                let slope = (l1 - l0) / (t1 - t0);
                (l0 + slope * (t - t0), slope)
            }
        })
    }

    pub fn h0(&self, t: f64) -> Result<HermitianOperator> {
        let (lam, _) = self.schedule_eval(t)?;
        self.h_i.scale(1.0 - lam).add_scaled(lam, &self.h_f)
    }

    pub fn dh0_dt(&self, t: f64) -> Result<HermitianOperator> {
        let (_, lam_dot) = self.schedule_eval(t)?;
        self.h_f.add_scaled(-1.0, &self.h_i).map(|d| d.scale(lam_dot))
    }
}

fn validate_polyline(knots: &[(f64, f64)], total_time: f64) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidModel(format!("polyline schedule: {msg}")));
    if knots.len() < 2 {
        return bad("needs at least two knots".into());
    }
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if first != (0.0, 0.0) {
        return bad(format!("must start at (0, 0), got {first:?}"));
    }
    if last.0 != total_time || last.1 != 1.0 {
        return bad(format!("must end at (T, 1) = ({total_time}, 1), got {last:?}"));
    }
    for w in knots.windows(2) {
        if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
            return bad("knot times must be strictly increasing".into());
        }
        if w[1].1 < w[0].1 {
            return bad("lambda must be nondecreasing".into());
        }
    }
    Ok(())
}

/// Tabulated `H0(t)`: piecewise-linear interpolation between time-stamped
/// matrices, hermitized after interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedModel {
    times: Vec<f64>,
    matrices: Vec<ComplexMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDocument {
    pub times: Vec<f64>,
    pub matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

pub(crate) fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    ComplexMatrix::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|&[re, im]| c(re, im)).collect())
            .collect(),
    )
}

impl TabulatedModel {
    pub fn new(times: Vec<f64>, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        if times.len() < 2 || times.len() != matrices.len() {
            return Err(Error::InvalidModel(format!(
                "tabulated model needs >= 2 samples and one matrix per time ({} times, {} matrices)",
                times.len(),
                matrices.len()
            )));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidModel("tabulated times must be strictly increasing".into()));
        }
        let dim = matrices[0].dim();
        if let Some(m) = matrices.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: m.dim(),
            });
        }
        Ok(TabulatedModel { times, matrices })
    }

    pub fn from_document(doc: &TabulatedDocument) -> Result<Self> {
        let matrices = doc
            .matrices
            .iter()
            .map(|m| matrix_from_pairs(m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.times.clone(), matrices)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TabulatedDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("tabulated JSON: {e}")))?;
        Self::from_document(&doc)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    fn segment(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.times.len();
        let t = clamp_domain(t, self.times[0], self.times[n - 1])?;
        let seg = self
            .times
            .windows(2)
            .position(|w| t < w[1])
            .unwrap_or(n - 2);
        Ok((seg, t))
    }

    pub fn h0(&self, t: f64) -> Result<HermitianOperator> {
        let (k, t) = self.segment(t)?;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let mut m = self.matrices[k].scale_real(1.0 - w);
        m.add_scaled_assign(w, &self.matrices[k + 1]);
        Ok(HermitianOperator::new_unchecked(m.hermitized()))
    }

    pub fn dh0_dt(&self, t: f64) -> Result<HermitianOperator> {
        let (k, _) = self.segment(t)?;
        let dt = self.times[k + 1] - self.times[k];
        let d = (&self.matrices[k + 1] - &self.matrices[k]).scale_real(1.0 / dt);
        Ok(HermitianOperator::new_unchecked(d.hermitized()))
    }
}

fn clamp_domain(t: f64, lo: f64, hi: f64) -> Result<f64> {
    let slack = DOMAIN_SLACK * (hi - lo).abs().max(1.0);
    if !(t >= lo - slack && t <= hi + slack) {
        return Err(Error::OutOfRange { t, lo, hi });
    }
    Ok(t.clamp(lo, hi))
}

/// The drift Hamiltonian `H0(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeDependentHamiltonian {
    Rotating(RotatingFieldModel),
    Interpolated(InterpolatedModel),
    Tabulated(TabulatedModel),
}

impl TimeDependentHamiltonian {
    pub fn dim(&self) -> usize {
        match self {
            Self::Rotating(_) => 2,
            Self::Interpolated(m) => m.h_i.dim(),
            Self::Tabulated(m) => m.matrices[0].dim(),
        }
    }

    /// `None` for models defined at every t.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            Self::Rotating(_) => None,
            Self::Interpolated(m) => Some((0.0, m.total_time)),
            Self::Tabulated(m) => Some((m.times[0], *m.times.last().unwrap())),
        }
    }

    pub fn h0_at(&self, t: f64) -> Result<HermitianOperator> {
        match self {
            Self::Rotating(m) => Ok(m.h0(t)),
            Self::Interpolated(m) => m.h0(t),
            Self::Tabulated(m) => m.h0(t),
        }
    }

    pub fn dh0_dt(&self, t: f64) -> Result<HermitianOperator> {
        match self {
            Self::Rotating(m) => Ok(m.dh0_dt(t)),
            Self::Interpolated(m) => m.dh0_dt(t),
            Self::Tabulated(m) => m.dh0_dt(t),
        }
    }

    pub fn as_rotating(&self) -> Option<&RotatingFieldModel> {
        match self {
            Self::Rotating(m) => Some(m),
            _ => None,
        }
    }
}

impl From<RotatingFieldModel> for TimeDependentHamiltonian {
    fn from(m: RotatingFieldModel) -> Self {
        Self::Rotating(m)
    }
}

impl From<InterpolatedModel> for TimeDependentHamiltonian {
    fn from(m: InterpolatedModel) -> Self {
        Self::Interpolated(m)
    }
}

impl From<TabulatedModel> for TimeDependentHamiltonian {
    fn from(m: TabulatedModel) -> Self {
        Self::Tabulated(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn sx_sz_linear(t_total: f64) -> InterpolatedModel {
        InterpolatedModel::new(
            HermitianOperator::sigma_x(),
            HermitianOperator::sigma_z(),
            Schedule::Linear,
            t_total,
        )
        .unwrap()
    }

    #[test]
    fn rotating_h0_at_zero_and_quarter_turn() {
        let m = RotatingFieldModel::fig1();
        let h = m.h0(0.0);
        let want = pauli_combo(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0);
        assert!(h.matrix().max_abs_diff(want.matrix()) < 1e-15);

        let t = FRAC_PI_2 / m.omega;
        let want = pauli_combo(0.0, m.theta.sin(), m.theta.cos(), 0.0);
        assert!(m.h0(t).matrix().max_abs_diff(want.matrix()) < 1e-15);
    }

    #[test]
    fn rotating_derivative_examples() {
        let m = RotatingFieldModel::fig1();
        let want = HermitianOperator::sigma_y().scale(m.mu_b0 * m.omega * m.theta.sin());
        assert!(m.dh0_dt(0.0).matrix().max_abs_diff(want.matrix()) < 1e-15);
        let still = RotatingFieldModel::new(1.0, 0.3, 0.0).unwrap();
        assert!(still.dh0_dt(1.7).matrix().is_zero(0.0));
    }

    #[test]
    fn rotating_spectrum_is_pm_mu_b0() {
        let m = RotatingFieldModel::new(1.3, 1.1, 2.5).unwrap();
        for k in 0..20 {
            let e = eigh(&m.h0(0.37 * k as f64));
            assert!((e.values[0] + 1.3).abs() < 1e-12 && (e.values[1] - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn rotating_validation() {
        assert!(RotatingFieldModel::new(0.0, 0.1, 1.0).is_err());
        assert!(RotatingFieldModel::new(1.0, 4.0, 1.0).is_err());
        assert!(RotatingFieldModel::new(1.0, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn interpolated_endpoints() {
        let m = sx_sz_linear(10.0);
        assert_eq!(m.h0(0.0).unwrap(), HermitianOperator::sigma_x());
        assert!(m.h0(10.0).unwrap().matrix().max_abs_diff(HermitianOperator::sigma_z().matrix()) < 1e-15);
        assert!(matches!(m.h0(10.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(m.h0(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn schedule_examples() {
        let m = sx_sz_linear(10.0);
        assert_eq!(m.schedule_eval(5.0).unwrap(), (0.5, 0.1));
        let s = InterpolatedModel::new(
            HermitianOperator::sigma_x(),
            HermitianOperator::sigma_z(),
            Schedule::Smoothstep,
            4.0,
        )
        .unwrap();
        assert_eq!(s.schedule_eval(2.0).unwrap(), (0.5, 1.5 / 4.0));
        assert_eq!(s.schedule_eval(0.0).unwrap().0, 0.0);
        assert_eq!(s.schedule_eval(4.0).unwrap().0, 1.0);
    }

    #[test]
    fn linear_derivative_is_constant() {
        let m = sx_sz_linear(2.0);
        let want = (&HermitianOperator::sigma_z().into_matrix() - HermitianOperator::sigma_x().matrix()).scale_real(0.5);
        for t in [0.0, 0.4, 1.9, 2.0] {
            assert!(m.dh0_dt(t).unwrap().matrix().max_abs_diff(&want) < 1e-15);
        }
    }

    #[test]
    fn polyline_schedule() {
        let knots = vec![(0.0, 0.0), (1.0, 0.2), (3.0, 1.0)];
        let m = InterpolatedModel::new(
            HermitianOperator::sigma_x(),
            HermitianOperator::sigma_z(),
            Schedule::Polyline(knots),
            3.0,
        )
        .unwrap();
        let (l, d) = m.schedule_eval(0.5).unwrap();
        assert!((l - 0.1).abs() < 1e-15 && (d - 0.2).abs() < 1e-15);
        // one-sided at the interior knot
        assert!((m.schedule_eval(1.0).unwrap().1 - 0.4).abs() < 1e-15);
        assert!((m.schedule_eval(3.0).unwrap().0 - 1.0).abs() < 1e-15);

        let bad = InterpolatedModel::new(
            HermitianOperator::sigma_x(),
            HermitianOperator::sigma_z(),
            Schedule::Polyline(vec![(0.0, 0.0), (1.0, 0.6), (2.0, 0.5), (3.0, 1.0)]),
            3.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn tabulated_from_json_hermitizes() {
        let doc = r#"{"times":[0.0,1.0],
            "matrices":[[[[1,0],[0,0]],[[0,0],[-1,0]]],
                        [[[0,0],[1,0.2]],[[1,0],[0,0]]]]}"#;
        let m = TabulatedModel::from_json(doc).unwrap();
        let h = m.h0(1.0).unwrap();
        assert!(h.matrix().hermiticity_deviation() == 0.0);
        assert_eq!(h.matrix()[(0, 1)], c(1.0, 0.1));
        assert!(matches!(m.h0(1.5), Err(Error::OutOfRange { .. })));
        assert!(TabulatedModel::from_json(r#"{"times":[1.0,0.0],"matrices":[[[[1,0]]],[[[1,0]]]]}"#).is_err());
        assert!(TabulatedModel::from_json(r#"{"times":[0.0],"matrices":[[[[1,0]]]],"x":1}"#).is_err());
    }
}
