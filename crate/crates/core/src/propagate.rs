//! Fixed-step RK4 for `i d|ψ⟩/dt = H(t, ψ)|ψ⟩` with feedback fields
//! recomputed at every stage.

use crate::control::{
    assemble_total, scheme_a_fields, scheme_b_fields, ControlContext, ControlSample, Scheme,
};
use crate::eigenpath::{eigenstate_derivative, frame_at, EigenFrame};
use crate::error::{Error, Result};
use crate::linalg::{c, normalize, HermitianOperator, StateVector, C64};
use crate::models::TimeDependentHamiltonian;

const NORMALIZED_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub renormalize_every: Option<usize>,
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            t0: 0.0,
            t1: 3.0,
            dt: 1e-3,
            renormalize_every: None,
            record_stride: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidIntegrator(msg));
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return bad(format!("need t1 > t0, got t0 = {}, t1 = {}", self.t0, self.t1));
        }
        if !(self.dt > 0.0 && self.dt <= self.t1 - self.t0) {
            return bad(format!("dt must lie in (0, t1 - t0], got {}", self.dt));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be >= 1".into());
        }
        if self.renormalize_every == Some(0) {
            return bad("renormalize_every must be >= 1".into());
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t1`.
    pub fn steps(&self) -> usize {
        (((self.t1 - self.t0) / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    fn time_of(&self, k: usize, n: usize) -> f64 {
        if k >= n {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub model: TimeDependentHamiltonian,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub controls: Vec<ControlSample>,
    pub frames: Vec<EigenFrame>,
    /// Largest `|‖ψ‖ − 1|` seen after any step.
    pub max_norm_drift: f64,
    pub renormalizations: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `−i H ψ`
pub fn schrodinger_rhs(h_total: &HermitianOperator, psi: &[C64]) -> Result<Vec<C64>> {
    let h_psi = h_total.matrix().matvec(psi)?;
    Ok(h_psi.into_iter().map(|z| c(z.im, -z.re)).collect())
}

/// State carried from step to step: the hold-last regularizer and the
/// eigenframe at the current time.
#[derive(Clone, Debug)]
pub struct StepContext {
    pub control: ControlContext,
    pub frame: EigenFrame,
}

impl StepContext {
    pub fn new(model: &TimeDependentHamiltonian, t0: f64) -> Result<Self> {
        Ok(StepContext {
            control: ControlContext::default(),
            frame: frame_at(model, t0, None).map_err(|e| e.at(t0))?,
        })
    }
}

/// Total Hamiltonian and control sample for one RK4 stage.
fn stage(
    model: &TimeDependentHamiltonian,
    scheme: &Scheme,
    psi: &StateVector,
    t: f64,
    frame: Option<&EigenFrame>,
    ctx: &mut ControlContext,
) -> Result<(HermitianOperator, ControlSample)> {
    let h0 = model.h0_at(t)?;
    match scheme {
        Scheme::None => {
            let v = match frame {
                Some(f) => 1.0 - f.states[0].inner(psi).norm_sqr(),
                None => 0.0,
            };
            Ok((h0, ControlSample::uncontrolled(t, v)))
        }
        Scheme::A(cfg) => {
            let sample = scheme_a_fields(cfg, psi, &h0, ctx, t)?;
            let ops: Vec<_> = cfg.controls.iter().map(|op| op.at(&h0)).collect();
            Ok((assemble_total(&h0, &ops, &sample.fields)?, sample))
        }
        Scheme::B(cfg) => {
            let frame = frame.expect("scheme B stages always carry a frame");
            let target = frame.state(cfg.target_level)?;
            let d = eigenstate_derivative(model, t, cfg.target_level, frame)?;
            let sample = scheme_b_fields(cfg, psi, target, &d, &h0, ctx, t)?;
            let ops: Vec<_> = cfg.controls.iter().map(|op| op.at(&h0)).collect();
            Ok((assemble_total(&h0, &ops, &sample.fields)?, sample))
        }
    }
}

fn axpy(psi: &[C64], k: &[C64], h: f64) -> StateVector {
    StateVector::from_amplitudes(psi.iter().zip(k).map(|(a, b)| a + b * h).collect())
}

/// One RK4 step from `t` to `t + dt`. Returns the new state and the
/// beginning-of-step control sample; `ctx.frame` advances to `t + dt`.
pub fn rk4_step(
    model: &TimeDependentHamiltonian,
    scheme: &Scheme,
    psi: &StateVector,
    t: f64,
    dt: f64,
    ctx: &mut StepContext,
) -> Result<(StateVector, ControlSample)> {
    let run = |ctx: &mut StepContext| -> Result<(StateVector, ControlSample, EigenFrame)> {
        let t_mid = t + 0.5 * dt;
        let t_end = t + dt;
        let (mid, end) = if matches!(scheme, Scheme::B(_)) {
            let mid = frame_at(model, t_mid, Some(&ctx.frame)).map_err(|e| e.at(t_mid))?;
            let end = frame_at(model, t_end, Some(&mid)).map_err(|e| e.at(t_end))?;
            (Some(mid), end)
        } else {
            (None, frame_at(model, t_end, Some(&ctx.frame)).map_err(|e| e.at(t_end))?)
        };
        let a = psi.amplitudes();

        let (h1, sample) = stage(model, scheme, psi, t, Some(&ctx.frame), &mut ctx.control)?;
        let k1 = schrodinger_rhs(&h1, a)?;
        let s2 = axpy(a, &k1, 0.5 * dt);
        let (h2, _) = stage(model, scheme, &s2, t_mid, mid.as_ref(), &mut ctx.control).map_err(|e| e.at(t_mid))?;
        let k2 = schrodinger_rhs(&h2, s2.amplitudes())?;
        let s3 = axpy(a, &k2, 0.5 * dt);
        let (h3, _) = stage(model, scheme, &s3, t_mid, mid.as_ref(), &mut ctx.control).map_err(|e| e.at(t_mid))?;
        let k3 = schrodinger_rhs(&h3, s3.amplitudes())?;
        let s4 = axpy(a, &k3, dt);
        let (h4, _) = stage(model, scheme, &s4, t_end, Some(&end), &mut ctx.control).map_err(|e| e.at(t_end))?;
        let k4 = schrodinger_rhs(&h4, s4.amplitudes())?;

        let next = a
            .iter()
            .enumerate()
            .map(|(i, x)| x + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
            .collect();
        Ok((StateVector::from_amplitudes(next), sample, end))
    };
    let (next, sample, end) = run(ctx).map_err(|e| e.at(t))?;
    ctx.frame = end;
    Ok((next, sample))
}

/// Integrates from `cfg.t0` to `cfg.t1`, recording every `record_stride`
/// steps and always the final time.
pub fn propagate(
    model: &TimeDependentHamiltonian,
    scheme: &Scheme,
    psi0: &StateVector,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    scheme.validate(model.dim())?;
    if psi0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: psi0.dim(),
            right: model.dim(),
        });
    }
    if (psi0.norm() - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::InvalidIntegrator(format!(
            "initial state must be normalized, norm is {}",
            psi0.norm()
        )));
    }
    if let Some((lo, hi)) = model.domain() {
        let slack = 1e-9 * (hi - lo).max(1.0);
        if cfg.t0 < lo - slack || cfg.t1 > hi + slack {
            return Err(Error::InvalidIntegrator(format!(
                "integration window [{}, {}] leaves model domain [{lo}, {hi}]",
                cfg.t0, cfg.t1
            )));
        }
    }

    let n = cfg.steps();
    let capacity = n / cfg.record_stride + 2;
    let mut traj = Trajectory {
        model: model.clone(),
        scheme: scheme.clone(),
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        controls: Vec::with_capacity(capacity),
        frames: Vec::with_capacity(capacity),
        max_norm_drift: 0.0,
        renormalizations: 0,
    };
    let mut ctx = StepContext::new(model, cfg.t0)?;
    let mut psi = psi0.clone();
    for k in 0..n {
        let t = cfg.time_of(k, n);
        let dt = cfg.time_of(k + 1, n) - t;
        let frame = (k % cfg.record_stride == 0).then(|| ctx.frame.clone());
        let (next, sample) = rk4_step(model, scheme, &psi, t, dt, &mut ctx)?;
        if let Some(frame) = frame {
            traj.times.push(t);
            traj.states.push(psi);
            traj.controls.push(sample);
            traj.frames.push(frame);
        }
        psi = next;
        traj.max_norm_drift = traj.max_norm_drift.max((psi.norm() - 1.0).abs());
        if let Some(every) = cfg.renormalize_every {
            if (k + 1) % every == 0 {
                psi = normalize(&psi).map_err(|e| e.at(t + dt))?;
                traj.renormalizations += 1;
            }
        }
    }

    let t_end = cfg.t1;
    let (_, sample) = stage(model, scheme, &psi, t_end, Some(&ctx.frame), &mut ctx.control).map_err(|e| e.at(t_end))?;
    traj.times.push(t_end);
    traj.states.push(psi);
    traj.controls.push(sample);
    traj.frames.push(ctx.frame);
    Ok(traj)
}
