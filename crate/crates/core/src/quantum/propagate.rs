use alloc::vec::Vec;

use num_complex::Complex64;

use super::lindblad::rhs_into;
use super::{build_hamiltonian, superoperator, DensityMatrix, MasterEquationModel};
use crate::linalg::{expm, CMatrix};
use crate::pulses::PulseSchedule;
use crate::{Error, Result};

/// Integration scheme for one piecewise-constant control interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with this many equal substeps.
    Rk4 { substeps: usize },
    /// Exact propagation by exponentiating the vectorized Lindblad generator.
    Expm,
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk4 { substeps: 40 }
    }
}

/// Advances `rho` by `dt` with the controls held constant, then re-Hermitizes.
pub fn step(model: &MasterEquationModel, rho: &DensityMatrix, controls: &[f64], dt: f64, method: Method) -> Result<DensityMatrix> {
    step_at(model, rho, controls, dt, method, 0)
}

pub(crate) fn step_at(
    model: &MasterEquationModel,
    rho: &DensityMatrix,
    controls: &[f64],
    dt: f64,
    method: Method,
    index: usize,
) -> Result<DensityMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("time step must be positive and finite"));
    }
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho.dim() });
    }
    let h = build_hamiltonian(model, controls)?;
    let mut next = rho.clone();
    match method {
        Method::Rk4 { substeps } => {
            if substeps == 0 {
                return Err(Error::invalid("RK4 needs at least one substep"));
            }
            let mut ws = Rk4Workspace::new(model.dim());
            ws.integrate(model, &h, next.matrix_mut(), dt, substeps);
        }
        Method::Expm => {
            let generator = superoperator(model, &h)?.scale_real(dt);
            let propagator = expm(&generator).map_err(|e| match e {
                Error::NumericalInstability { reason, .. } => Error::NumericalInstability { step: index, reason },
                other => other,
            })?;
            let v = propagator.mul_vec(rho.matrix().as_slice());
            next.matrix_mut().as_mut_slice().copy_from_slice(&v);
        }
    }
    if !next.matrix().is_finite() {
        return Err(Error::NumericalInstability { step: index, reason: "non-finite density matrix".into() });
    }
    next.matrix_mut().hermitize();
    Ok(next)
}

struct Rk4Workspace {
    k: [CMatrix; 4],
    probe: CMatrix,
}

impl Rk4Workspace {
    fn new(dim: usize) -> Self {
        let z = CMatrix::zeros(dim);
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], probe: z }
    }

    fn integrate(&mut self, model: &MasterEquationModel, h: &CMatrix, rho: &mut CMatrix, dt: f64, substeps: usize) {
        let dh = dt / substeps as f64;
        for _ in 0..substeps {
            let [k1, k2, k3, k4] = &mut self.k;
            rhs_into(model, h, rho, k1);
            offset_into(&mut self.probe, rho, k1, 0.5 * dh);
            rhs_into(model, h, &self.probe, k2);
            offset_into(&mut self.probe, rho, k2, 0.5 * dh);
            rhs_into(model, h, &self.probe, k3);
            offset_into(&mut self.probe, rho, k3, dh);
            rhs_into(model, h, &self.probe, k4);
            let c = dh / 6.0;
            for (i, r) in rho.as_mut_slice().iter_mut().enumerate() {
                let incr: Complex64 = k1.as_slice()[i] + (k2.as_slice()[i] + k3.as_slice()[i]) * 2.0 + k4.as_slice()[i];
                *r += incr * c;
            }
        }
    }
}

/// `out = base + scale · slope`
fn offset_into(out: &mut CMatrix, base: &CMatrix, slope: &CMatrix, scale: f64) {
    for ((o, &b), &s) in out.as_mut_slice().iter_mut().zip(base.as_slice()).zip(slope.as_slice()) {
        *o = b + s * scale;
    }
}

/// Recorded evolution under a piecewise-constant schedule.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Interval boundaries, from 0 to `t_max` inclusive.
    pub times: Vec<f64>,
    /// State at each entry of `times`.
    pub states: Vec<DensityMatrix>,
    /// Controls applied on each interval (`times.len() − 1` entries).
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Population of the last dot at `t_max`.
    pub fn final_fidelity(&self) -> f64 {
        self.final_state().fidelity()
    }

    /// Largest recorded occupation of dot `k` (1-based).
    pub fn max_population(&self, dot: usize) -> f64 {
        self.states.iter().map(|s| s.population(dot)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First recorded time at which the fidelity reaches `threshold`.
    pub fn time_to_fidelity(&self, threshold: f64) -> Option<f64> {
        self.states.iter().zip(&self.times).find(|(s, _)| s.fidelity() >= threshold).map(|(_, &t)| t)
    }

    /// Largest `|tr ρ − 1|` over the recorded states.
    pub fn trace_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.trace() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Integrates the master equation across every interval of `schedule`,
/// holding controls constant within an interval and validating each
/// recorded state.
pub fn evolve(model: &MasterEquationModel, schedule: &PulseSchedule, rho0: &DensityMatrix, method: Method) -> Result<Trajectory> {
    if schedule.n_channels() != model.control_arity() {
        return Err(Error::DimensionMismatch { expected: model.control_arity(), found: schedule.n_channels() });
    }
    rho0.validate_at(0)?;
    let dt = schedule.dt();
    let n = schedule.n_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    times.push(0.0);
    states.push(rho0.clone());
    for k in 0..n {
        let c = schedule.controls_at(k);
        let next = step_at(model, &states[k], &c, dt, method, k)?;
        next.validate_at(k)?;
        states.push(next);
        // Last boundary pinned to t_max exactly.
        times.push(if k + 1 == n { schedule.t_max() } else { (k + 1) as f64 * dt });
        controls.push(c);
    }
    Ok(Trajectory { times, states, controls })
}
