//! Fixed-step classical Runge-Kutta integration.

use crate::error::{invalid, Error, Result};
use crate::model::{clamp_population, DynamicalSystem, StateVector};

/// Default step for SEIR scenarios.
pub const DEFAULT_DT: f64 = 0.1;

/// Time grid of a fixed-step run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    dt: f64,
    t_start: f64,
    t_end: f64,
}

impl StepConfig {
    pub fn new(dt: f64, t_start: f64, t_end: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(invalid("time bounds must be finite"));
        }
        if t_end <= t_start {
            return Err(invalid(format!("t_end ({t_end}) must exceed t_start ({t_start})")));
        }
        // allow the span to fall short of dt by rounding only
        if (t_end - t_start) / dt < 1.0 - 1e-9 {
            return Err(invalid("time span must cover at least one step"));
        }
        Ok(Self { dt, t_start, t_end })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t_start(&self) -> f64 {
        self.t_start
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of steps; the last one is shortened so that `t_end` is hit exactly.
    pub fn step_count(&self) -> usize {
        let ratio = (self.t_end - self.t_start) / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Output times, `step_count() + 1` of them.
    pub fn times(&self) -> Vec<f64> {
        let n = self.step_count();
        let mut ts: Vec<f64> = (0..n).map(|i| self.t_start + i as f64 * self.dt).collect();
        ts.push(self.t_end);
        ts
    }
}

/// Sampled solution of an initial value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    /// Values of one component over time.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[index]).collect()
    }

    /// Largest value of one component, refined by a parabola through the
    /// discrete maximum and its neighbours when it is interior.
    pub fn peak(&self, index: usize) -> Peak {
        let values = self.component(index);
        let k = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("trajectory is never empty");
        if k == 0 || k + 1 == values.len() {
            return Peak { time: self.times[k], value: values[k], interior: false };
        }
        let (t0, t1, t2) = (self.times[k - 1], self.times[k], self.times[k + 1]);
        let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
        // Lagrange parabola; vertex from its derivative
        let d01 = (y1 - y0) / (t1 - t0);
        let d12 = (y2 - y1) / (t2 - t1);
        let curvature = (d12 - d01) / (t2 - t0);
        if curvature >= 0.0 {
            return Peak { time: t1, value: y1, interior: true };
        }
        let time = 0.5 * (t0 + t1) - d01 / (2.0 * curvature);
        let value = y0 + d01 * (time - t0) + curvature * (time - t0) * (time - t1);
        Peak { time, value, interior: true }
    }
}

/// Maximum of one trajectory component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
    /// False when the maximum sits at the first or last output point.
    pub interior: bool,
}

/// One step of classical RK4.
pub fn rk4_step<S>(system: &S, t: f64, state: &[f64], dt: f64) -> Result<StateVector>
where
    S: DynamicalSystem + ?Sized,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let n = system.dimension();
    if state.len() != n {
        return Err(invalid(format!("state has length {}, expected {n}", state.len())));
    }

    let stage = |name: &str, ts: f64, x: &[f64]| -> Result<Vec<f64>> {
        let mut k = vec![0.0; n];
        system.rhs(ts, x, &mut k);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain(format!(
                "RK4 stage {name} is not finite at t = {ts}"
            )));
        }
        Ok(k)
    };
    let shifted = |k: &[f64], scale: f64| -> Vec<f64> {
        state.iter().zip(k).map(|(x, d)| x + scale * d).collect()
    };

    let half = 0.5 * dt;
    let k1 = stage("k1", t, state)?;
    let k2 = stage("k2", t + half, &shifted(&k1, half))?;
    let k3 = stage("k3", t + half, &shifted(&k2, half))?;
    let k4 = stage("k4", t + dt, &shifted(&k3, dt))?;

    let out: Vec<f64> = (0..n)
        .map(|i| state[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
        .collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalDomain(format!("RK4 update of component {i} is not finite")));
    }
    Ok(StateVector::from_vec_unchecked(out))
}

fn annotate(err: Error, step: usize, t: f64) -> Error {
    match err {
        Error::NumericalDomain(m) => Error::NumericalDomain(format!("step {step} (t = {t}): {m}")),
        other => other,
    }
}

/// Integrates `system` from `initial` over the grid of `config`, recording every step.
///
/// Population systems have the clamping rule of
/// [`clamp_population`](crate::model::clamp_population) applied after each step.
pub fn simulate<S>(system: &S, initial: &StateVector, config: &StepConfig) -> Result<Trajectory>
where
    S: DynamicalSystem + ?Sized,
{
    let n = system.dimension();
    if initial.len() != n {
        return Err(invalid(format!(
            "initial state has length {}, expected {n}",
            initial.len()
        )));
    }
    if system.is_population() && initial.iter().any(|v| *v < 0.0) {
        return Err(invalid("initial population state has a negative entry"));
    }

    let times = config.times();
    let mut states = Vec::with_capacity(times.len());
    states.push(initial.clone());
    for step in 0..times.len() - 1 {
        let t = times[step];
        let dt = times[step + 1] - t;
        let current = &states[step];
        let mut next = rk4_step(system, t, current, dt).map_err(|e| annotate(e, step, t))?;
        if system.is_population() {
            let mut values = next.into_vec();
            clamp_population(&mut values).map_err(|e| annotate(e, step, t))?;
            next = StateVector::from_vec_unchecked(values);
        }
        states.push(next);
    }
    Ok(Trajectory { times, states })
}

/// Final state after integrating from `t = 0` to `t_end` with step `dt`.
fn endpoint<S>(system: &S, initial: &StateVector, t_end: f64, dt: f64) -> Result<StateVector>
where
    S: DynamicalSystem + ?Sized,
{
    let config = StepConfig::new(dt, 0.0, t_end)?;
    let times = config.times();
    let mut state = initial.clone();
    for w in times.windows(2) {
        state = rk4_step(system, w[0], &state, w[1] - w[0])?;
    }
    Ok(state)
}

/// Observed order of accuracy.
///
/// Runs at `dt0`, `dt0/2`, `dt0/4` and `dt0/8`, takes max-norm errors of the
/// first three against the finest run, and returns the least-squares slope of
/// `log2(error)` against `log2(dt)`.
pub fn convergence_order<S>(system: &S, initial: &StateVector, t_end: f64, dt0: f64) -> Result<f64>
where
    S: DynamicalSystem + ?Sized,
{
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("t_end must be positive, got {t_end}")));
    }
    let reference = endpoint(system, initial, t_end, dt0 / 8.0)?;
    let mut errors = [0.0; 3];
    for (k, err) in errors.iter_mut().enumerate() {
        let dt = dt0 / f64::from(1u32 << k);
        let x = endpoint(system, initial, t_end, dt)?;
        *err = x.iter().zip(reference.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    }
    if errors.iter().any(|e| e.is_nan() || *e <= 0.0) {
        return Err(Error::DegenerateMeasurement(format!(
            "errors {errors:?} admit no positive ratio"
        )));
    }
    // slope through log2 e_k at log2 dt_k = log2 dt0 - k
    let order = (errors[0].log2() - errors[2].log2()) / 2.0;
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnSystem;

    fn decay() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = -x[0])
    }

    #[test]
    fn step_config_validation() {
        assert!(StepConfig::new(0.0, 0.0, 1.0).is_err());
        assert!(StepConfig::new(0.1, 1.0, 1.0).is_err());
        assert!(StepConfig::new(0.5, 0.0, 0.25).is_err());
        assert!(StepConfig::new(0.1, 0.0, 0.1).is_ok());
    }

    #[test]
    fn grid_hits_t_end_exactly() {
        let c = StepConfig::new(0.1, 0.0, 100.0).unwrap();
        assert_eq!(c.step_count(), 1000);
        let ts = c.times();
        assert_eq!(ts.len(), 1001);
        assert_eq!(*ts.last().unwrap(), 100.0);

        let c = StepConfig::new(0.3, 0.0, 1.0).unwrap();
        assert_eq!(c.step_count(), 4);
        let ts = c.times();
        assert_eq!(ts.len(), 5);
        assert!((ts[4] - ts[3] - 0.1).abs() < 1e-12);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let sys = FnSystem::new(3, |_t, _x: &[f64], dx: &mut [f64]| dx.fill(0.0));
        let s = rk4_step(&sys, 0.0, &[1.0, -2.0, 3.5], 0.7).unwrap();
        assert_eq!(s.as_slice(), &[1.0, -2.0, 3.5]);
    }

    #[test]
    fn growth_matches_degree_four_taylor() {
        let sys = FnSystem::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0]);
        let s = rk4_step(&sys, 0.0, &[1.0], 0.1).unwrap();
        let h: f64 = 0.1;
        let taylor = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((s[0] - taylor).abs() < 1e-15);
        assert!((s[0] - 1.105_170_833_333_333).abs() < 1e-14);
    }

    #[test]
    fn decay_one_step() {
        let s = rk4_step(&decay(), 0.0, &[1.0], 0.1).unwrap();
        assert!((s[0] - (-0.1f64).exp()).abs() <= 1e-7);
    }

    #[test]
    fn cubic_in_time_is_exact() {
        // x' = 1 + t + t^2 + t^3 -> x(t) = t + t^2/2 + t^3/3 + t^4/4
        let sys = FnSystem::new(1, |t, _x: &[f64], dx: &mut [f64]| dx[0] = 1.0 + t + t * t + t * t * t);
        let exact = |t: f64| t + t * t / 2.0 + t.powi(3) / 3.0 + t.powi(4) / 4.0;
        let (t0, dt) = (0.3, 0.9);
        let s = rk4_step(&sys, t0, &[exact(t0)], dt).unwrap();
        assert!((s[0] - exact(t0 + dt)).abs() < 1e-13);
    }

    #[test]
    fn nonfinite_stage_is_named() {
        let sys = FnSystem::new(1, |t, _x: &[f64], dx: &mut [f64]| {
            dx[0] = if t > 0.0 { f64::NAN } else { 1.0 }
        });
        match rk4_step(&sys, 0.0, &[0.0], 0.1) {
            Err(Error::NumericalDomain(m)) => assert!(m.contains("k2"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simulate_annotates_step() {
        let sys = FnSystem::new(1, |t, _x: &[f64], dx: &mut [f64]| {
            dx[0] = if t >= 0.45 { f64::INFINITY } else { 0.0 }
        });
        let c = StepConfig::new(0.1, 0.0, 1.0).unwrap();
        match simulate(&sys, &StateVector::new(vec![1.0]).unwrap(), &c) {
            Err(Error::NumericalDomain(m)) => assert!(m.starts_with("step 4"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simulate_records_initial_state() {
        let x0 = StateVector::new(vec![2.0]).unwrap();
        let c = StepConfig::new(0.25, 1.0, 2.0).unwrap();
        let traj = simulate(&decay(), &x0, &c).unwrap();
        assert_eq!(traj.len(), 5);
        assert_eq!(traj.states[0], x0);
        assert_eq!(traj.times[0], 1.0);
        assert!((traj.last_state()[0] - 2.0 * (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn peak_of_sampled_parabola_is_exact() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
        let states = times
            .iter()
            .map(|t| StateVector::new(vec![2.0 - (t - 1.37) * (t - 1.37)]).unwrap())
            .collect();
        let peak = Trajectory { times, states }.peak(0);
        assert!(peak.interior);
        assert!((peak.time - 1.37).abs() < 1e-12);
        assert!((peak.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decay_order_is_four() {
        let x0 = StateVector::new(vec![1.0]).unwrap();
        let p = convergence_order(&decay(), &x0, 1.0, 0.1).unwrap();
        assert!((3.7..=4.3).contains(&p), "order {p}");
    }

    #[test]
    fn zero_field_order_is_degenerate() {
        let sys = FnSystem::new(1, |_t, _x: &[f64], dx: &mut [f64]| dx[0] = 0.0);
        let x0 = StateVector::new(vec![1.0]).unwrap();
        assert!(matches!(
            convergence_order(&sys, &x0, 1.0, 0.1),
            Err(Error::DegenerateMeasurement(_))
        ));
    }
}
