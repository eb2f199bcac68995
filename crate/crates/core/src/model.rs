//! Model definitions: parameter sets, state vectors and the right-hand sides
//! of the three compartmental systems, plus the generic [`DynamicalSystem`]
//! abstraction the rest of the crate works against.
//!
//! State order for the SEIR systems is always `(S, E, I, R)`. The backward
//! bifurcation model uses `(x1, x2, x3, x4)`.

use std::fmt;
use std::ops::Deref;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// Relative tolerance below zero that integrated population states may reach
/// before they are treated as an error instead of being clamped.
pub const NONNEGATIVE_TOLERANCE: f64 = 1e-9;

/// Base step for central-difference Jacobians, scaled by `max(1, |x_j|)`.
pub const DEFAULT_JACOBIAN_STEP: f64 = 1.490_116_119_384_765_6e-8; // sqrt(f64::EPSILON)

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("parameter {name} must be positive and finite, got {value}")))
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Names of the rates of the modified SEIR model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModifiedParam {
    Tau,
    Mu,
    Beta,
    Epsilon,
    Gamma,
}

impl ModifiedParam {
    pub const ALL: [ModifiedParam; 5] = [
        ModifiedParam::Tau,
        ModifiedParam::Mu,
        ModifiedParam::Beta,
        ModifiedParam::Epsilon,
        ModifiedParam::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModifiedParam::Tau => "tau",
            ModifiedParam::Mu => "mu",
            ModifiedParam::Beta => "beta",
            ModifiedParam::Epsilon => "epsilon",
            ModifiedParam::Gamma => "gamma",
        }
    }
}

impl fmt::Display for ModifiedParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModifiedParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModifiedParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown parameter name '{s}'")))
    }
}

/// Rates of the modified SEIR model with recruitment and natural death.
///
/// * `tau` - recruitment into the susceptible class
/// * `mu` - natural death rate, applied to every class
/// * `beta` - infection rate
/// * `epsilon` - rate at which exposed individuals become infectious
/// * `gamma` - recovery rate
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedSeirParams {
    tau: f64,
    mu: f64,
    beta: f64,
    epsilon: f64,
    gamma: f64,
}

impl ModifiedSeirParams {
    pub fn new(tau: f64, mu: f64, beta: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        check_positive("tau", tau)?;
        check_positive("mu", mu)?;
        check_positive("beta", beta)?;
        check_positive("epsilon", epsilon)?;
        check_positive("gamma", gamma)?;
        Ok(Self { tau, mu, beta, epsilon, gamma })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, which: ModifiedParam) -> f64 {
        match which {
            ModifiedParam::Tau => self.tau,
            ModifiedParam::Mu => self.mu,
            ModifiedParam::Beta => self.beta,
            ModifiedParam::Epsilon => self.epsilon,
            ModifiedParam::Gamma => self.gamma,
        }
    }

    /// Copy with one rate replaced (validated).
    pub fn with(&self, which: ModifiedParam, value: f64) -> Result<Self> {
        let mut p = *self;
        match which {
            ModifiedParam::Tau => p.tau = value,
            ModifiedParam::Mu => p.mu = value,
            ModifiedParam::Beta => p.beta = value,
            ModifiedParam::Epsilon => p.epsilon = value,
            ModifiedParam::Gamma => p.gamma = value,
        }
        check_positive(which.name(), value)?;
        Ok(p)
    }

    /// Susceptible level at the disease-free equilibrium, `tau / mu`.
    pub fn dfe_susceptible(&self) -> f64 {
        self.tau / self.mu
    }
}

/// Rates of the closed-population SEIR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalSeirParams {
    beta: f64,
    epsilon: f64,
    gamma: f64,
    n: f64,
}

impl ClassicalSeirParams {
    pub fn new(beta: f64, epsilon: f64, gamma: f64, n: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("epsilon", epsilon)?;
        check_positive("gamma", gamma)?;
        check_positive("n", n)?;
        Ok(Self { beta, epsilon, gamma, n })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn n(&self) -> f64 {
        self.n
    }
}

/// Rates of the four-compartment model used for backward bifurcation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardModelParams {
    pub(crate) beta1: f64,
    pub(crate) beta2: f64,
    pub(crate) epsilon: f64,
    pub(crate) phi: f64,
    pub(crate) sigma: f64,
    pub(crate) gamma: f64,
    pub(crate) delta: f64,
    pub(crate) alpha: f64,
}

impl BackwardModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        phi: f64,
        sigma: f64,
        gamma: f64,
        delta: f64,
        alpha: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("beta1", beta1),
            ("beta2", beta2),
            ("epsilon", epsilon),
            ("phi", phi),
            ("sigma", sigma),
            ("gamma", gamma),
            ("delta", delta),
            ("alpha", alpha),
        ] {
            check_positive(name, v)?;
        }
        Ok(Self { beta1, beta2, epsilon, phi, sigma, gamma, delta, alpha })
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_beta2(&self, beta2: f64) -> Result<Self> {
        check_positive("beta2", beta2)?;
        Ok(Self { beta2, ..*self })
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// A finite real state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("state entry {i} is not finite ({v})")));
        }
        Ok(Self(values))
    }

    /// A population state: finite and nonnegative in every entry.
    pub fn population(values: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        if let Some((i, v)) = s.0.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(invalid(format!("population entry {i} is negative ({v})")));
        }
        Ok(s)
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Max-norm.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn expect_len(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(invalid(format!("state has length {}, expected {n}", self.0.len())))
        }
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        StateVector::new(values)
    }
}

/// `S + E + I + R` for a four-compartment state.
pub fn total_population(state: &StateVector) -> Result<f64> {
    state.expect_len(4)?;
    Ok(state.iter().sum())
}

/// Applies the nonnegativity rule for integrated population states.
///
/// Entries in `[-1e-9 * N, 0)` are set to zero (with a warning), where `N`
/// is the sum of absolute values of the state. Anything more negative is an
/// error. Returns whether any entry was clamped.
pub fn clamp_population(state: &mut [f64]) -> Result<bool> {
    let scale: f64 = state.iter().map(|v| v.abs()).sum();
    let floor = -NONNEGATIVE_TOLERANCE * scale;
    let mut clamped = false;
    for (i, v) in state.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= floor {
                warn!("clamping compartment {i} from {v:e} to 0");
                *v = 0.0;
                clamped = true;
            } else {
                return Err(Error::NumericalDomain(format!(
                    "compartment {i} became negative ({v:e}) beyond tolerance {floor:e}"
                )));
            }
        }
    }
    Ok(clamped)
}

// ---------------------------------------------------------------------------
// Dynamical systems
// ---------------------------------------------------------------------------

/// An autonomous or time-dependent ODE system `x' = f(t, x)`.
pub trait DynamicalSystem {
    fn dimension(&self) -> usize;

    /// Writes `f(t, state)` into `deriv`. Both slices have length `dimension()`.
    fn rhs(&self, t: f64, state: &[f64], deriv: &mut [f64]);

    fn analytic_jacobian(&self, _state: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Whether states are populations that must stay nonnegative.
    fn is_population(&self) -> bool {
        false
    }

    /// Checked evaluation of the right-hand side.
    fn evaluate(&self, t: f64, state: &[f64]) -> Result<StateVector> {
        let n = self.dimension();
        if state.len() != n {
            return Err(invalid(format!("state has length {}, expected {n}", state.len())));
        }
        let mut out = vec![0.0; n];
        self.rhs(t, state, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain(format!(
                "right-hand side is not finite at t = {t}"
            )));
        }
        Ok(StateVector::from_vec_unchecked(out))
    }
}

impl<S: DynamicalSystem + ?Sized> DynamicalSystem for &S {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn rhs(&self, t: f64, state: &[f64], deriv: &mut [f64]) {
        (**self).rhs(t, state, deriv)
    }
    fn analytic_jacobian(&self, state: &[f64]) -> Option<DMatrix<f64>> {
        (**self).analytic_jacobian(state)
    }
    fn is_population(&self) -> bool {
        (**self).is_population()
    }
}

/// A system defined by a closure.
pub struct FnSystem<F> {
    dimension: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> DynamicalSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn rhs(&self, t: f64, state: &[f64], deriv: &mut [f64]) {
        (self.f)(t, state, deriv)
    }
}

/// `S' = tau - mu S - beta S I`, `E' = beta S I - (mu + eps) E`,
/// `I' = eps E - (mu + gamma) I`, `R' = gamma I - mu R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedSeir {
    pub params: ModifiedSeirParams,
}

impl ModifiedSeir {
    pub fn new(params: ModifiedSeirParams) -> Self {
        Self { params }
    }
}

impl DynamicalSystem for ModifiedSeir {
    fn dimension(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        let p = &self.params;
        let (s, e, i, r) = (x[0], x[1], x[2], x[3]);
        let infection = p.beta * s * i;
        dx[0] = p.tau - p.mu * s - infection;
        dx[1] = infection - (p.mu + p.epsilon) * e;
        dx[2] = p.epsilon * e - (p.mu + p.gamma) * i;
        dx[3] = p.gamma * i - p.mu * r;
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.params;
        let (s, i) = (x[0], x[2]);
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(4, 4, &[
            -p.mu - p.beta * i, 0.0,                 -p.beta * s,          0.0,
            p.beta * i,         -(p.mu + p.epsilon), p.beta * s,           0.0,
            0.0,                p.epsilon,           -(p.mu + p.gamma),    0.0,
            0.0,                0.0,                 p.gamma,              -p.mu,
        ]);
        Some(j)
    }

    fn is_population(&self) -> bool {
        true
    }
}

/// Closed-population SEIR with standard incidence `beta S I / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalSeir {
    pub params: ClassicalSeirParams,
}

impl ClassicalSeir {
    pub fn new(params: ClassicalSeirParams) -> Self {
        Self { params }
    }
}

impl DynamicalSystem for ClassicalSeir {
    fn dimension(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        let p = &self.params;
        let (s, e, i) = (x[0], x[1], x[2]);
        let infection = p.beta * s * i / p.n;
        let onset = p.epsilon * e;
        let recovery = p.gamma * i;
        dx[0] = -infection;
        dx[1] = infection - onset;
        dx[2] = onset - recovery;
        dx[3] = recovery;
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.params;
        let (s, i) = (x[0], x[2]);
        let bi = p.beta * i / p.n;
        let bs = p.beta * s / p.n;
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(4, 4, &[
            -bi, 0.0,        -bs,      0.0,
            bi,  -p.epsilon, bs,       0.0,
            0.0, p.epsilon,  -p.gamma, 0.0,
            0.0, 0.0,        p.gamma,  0.0,
        ]);
        Some(j)
    }

    fn is_population(&self) -> bool {
        true
    }
}

/// The four-compartment model with two transmission routes.
///
/// ```text
/// x1' = -(b1 + b2) x1 x3 + eps x2 + alpha x4
/// x2' = b1 x1 x3 - (eps + phi + sigma) x2
/// x3' = b2 x1 x3 - (gamma + delta) x3 + phi x2
/// x4' = gamma x3 - alpha x4
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardModel {
    pub params: BackwardModelParams,
}

impl BackwardModel {
    pub fn new(params: BackwardModelParams) -> Self {
        Self { params }
    }
}

impl DynamicalSystem for BackwardModel {
    fn dimension(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        let p = &self.params;
        let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
        dx[0] = -(p.beta1 + p.beta2) * x1 * x3 + p.epsilon * x2 + p.alpha * x4;
        dx[1] = p.beta1 * x1 * x3 - p.epsilon * x2 - p.phi * x2 - p.sigma * x2;
        dx[2] = p.beta2 * x1 * x3 - p.gamma * x3 - p.delta * x3 + p.phi * x2;
        dx[3] = p.gamma * x3 - p.alpha * x4;
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.params;
        let (x1, x3) = (x[0], x[2]);
        let k = p.epsilon + p.phi + p.sigma;
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(4, 4, &[
            -(p.beta1 + p.beta2) * x3, p.epsilon, -(p.beta1 + p.beta2) * x1,      p.alpha,
            p.beta1 * x3,              -k,        p.beta1 * x1,                   0.0,
            p.beta2 * x3,              p.phi,     p.beta2 * x1 - p.gamma - p.delta, 0.0,
            0.0,                       0.0,       p.gamma,                        -p.alpha,
        ]);
        Some(j)
    }

    fn is_population(&self) -> bool {
        true
    }
}

pub fn modified_seir_rhs(params: &ModifiedSeirParams, state: &StateVector) -> Result<StateVector> {
    state.expect_len(4)?;
    ModifiedSeir::new(*params).evaluate(0.0, state)
}

pub fn classical_seir_rhs(
    params: &ClassicalSeirParams,
    state: &StateVector,
) -> Result<StateVector> {
    state.expect_len(4)?;
    ClassicalSeir::new(*params).evaluate(0.0, state)
}

pub fn backward_model_rhs(
    params: &BackwardModelParams,
    state: &StateVector,
) -> Result<StateVector> {
    state.expect_len(4)?;
    BackwardModel::new(*params).evaluate(0.0, state)
}

/// Central-difference Jacobian.
///
/// Column `j` uses the step `step * max(1, |x_j|)`; pass
/// [`DEFAULT_JACOBIAN_STEP`] for the usual choice.
pub fn numeric_jacobian<S>(system: &S, point: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    S: DynamicalSystem + ?Sized,
{
    let n = system.dimension();
    if point.len() != n {
        return Err(invalid(format!("point has length {}, expected {n}", point.len())));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("jacobian step must be positive, got {step}")));
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut x = point.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = step * point[j].abs().max(1.0);
        x[j] = point[j] + h;
        system.rhs(0.0, &x, &mut fp);
        x[j] = point[j] - h;
        system.rhs(0.0, &x, &mut fm);
        x[j] = point[j];
        // actual spacing after rounding of x_j +/- h
        let span = (point[j] + h) - (point[j] - h);
        for i in 0..n {
            if !(fp[i].is_finite() && fm[i].is_finite()) {
                return Err(Error::NumericalDomain(format!(
                    "right-hand side not finite when perturbing coordinate {j}"
                )));
            }
            jac[(i, j)] = (fp[i] - fm[i]) / span;
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3(tau: f64) -> ModifiedSeirParams {
        ModifiedSeirParams::new(tau, 0.005, 0.25, 0.06, 0.07).unwrap()
    }

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn params_reject_nonpositive() {
        assert!(ModifiedSeirParams::new(0.0, 0.005, 0.25, 0.06, 0.07).is_err());
        assert!(ModifiedSeirParams::new(0.005, -1.0, 0.25, 0.06, 0.07).is_err());
        assert!(ModifiedSeirParams::new(0.005, 0.005, f64::NAN, 0.06, 0.07).is_err());
        assert!(ClassicalSeirParams::new(0.95, 0.5, 0.09, 0.0).is_err());
        assert!(BackwardModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, f64::INFINITY).is_err());
        assert!(table3(0.005).with(ModifiedParam::Beta, -0.1).is_err());
    }

    #[test]
    fn dfe_is_fixed_point_when_tau_equals_mu() {
        let d = modified_seir_rhs(&table3(0.005), &sv(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_state_only_recruits() {
        let p = ModifiedSeirParams::new(0.3, 0.01, 0.2, 0.1, 0.05).unwrap();
        let d = modified_seir_rhs(&p, &StateVector::zeros(4)).unwrap();
        assert_eq!(d.as_slice(), &[0.3, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn modified_rhs_hand_evaluated() {
        // S=0.9 E=0.05 I=0.03 R=0.02, tau=mu=0.005, beta=0.25, eps=0.06, gamma=0.07
        // beta S I = 0.00675
        // S' = 0.005 - 0.0045 - 0.00675          = -0.00625
        // E' = 0.00675 - 0.065 * 0.05            =  0.00350
        // I' = 0.06 * 0.05 - 0.075 * 0.03        =  0.00075
        // R' = 0.07 * 0.03 - 0.005 * 0.02        =  0.00200
        let d = modified_seir_rhs(&table3(0.005), &sv(&[0.9, 0.05, 0.03, 0.02])).unwrap();
        let expected = [-0.00625, 0.0035, 0.00075, 0.002];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn classical_rhs_hand_evaluated() {
        let p = ClassicalSeirParams::new(0.95, 0.5, 0.09, 1000.0).unwrap();
        let d = classical_seir_rhs(&p, &sv(&[960.0, 10.0, 30.0, 0.0])).unwrap();
        // beta S I / N = 27.36, eps E = 5, gamma I = 2.7
        let expected = [-27.36, 22.36, 2.3, 2.7];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let zero = classical_seir_rhs(&p, &sv(&[500.0, 0.0, 0.0, 500.0])).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_rhs_hand_evaluated() {
        let p = BackwardModelParams::new(0.3, 0.2, 0.1, 0.4, 0.05, 0.15, 0.02, 0.25).unwrap();
        let m = BackwardModel::new(p);
        assert_eq!(m.evaluate(0.0, &[0.0; 4]).unwrap().as_slice(), &[0.0; 4]);
        assert_eq!(m.evaluate(0.0, &[7.0, 0.0, 0.0, 0.0]).unwrap().as_slice(), &[0.0; 4]);

        // x = (2, 0.5, 0.25, 0.1); x1 x3 = 0.5
        // f1 = -0.5*0.5 + 0.1*0.5 + 0.25*0.1  = -0.25 + 0.05 + 0.025 = -0.175
        // f2 = 0.3*0.5 - 0.55*0.5             =  0.15 - 0.275       = -0.125
        // f3 = 0.2*0.5 - 0.17*0.25 + 0.4*0.5  =  0.1 - 0.0425 + 0.2 =  0.2575
        // f4 = 0.15*0.25 - 0.25*0.1           =  0.0375 - 0.025     =  0.0125
        let d = backward_model_rhs(&p, &sv(&[2.0, 0.5, 0.25, 0.1])).unwrap();
        let expected = [-0.175, -0.125, 0.2575, 0.0125];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn rhs_rejects_wrong_dimension() {
        let s = sv(&[1.0, 2.0, 3.0]);
        assert!(matches!(modified_seir_rhs(&table3(0.005), &s), Err(Error::InvalidArgument(_))));
        let c = ClassicalSeirParams::new(0.95, 0.5, 0.09, 1000.0).unwrap();
        assert!(classical_seir_rhs(&c, &s).is_err());
        assert!(total_population(&s).is_err());
    }

    #[test]
    fn total_population_examples() {
        assert_eq!(total_population(&sv(&[960.0, 10.0, 30.0, 0.0])).unwrap(), 1000.0);
        assert_eq!(total_population(&StateVector::zeros(4)).unwrap(), 0.0);
        let p = ModifiedSeirParams::new(0.01, 0.005, 0.25, 0.06, 0.07).unwrap();
        let dfe = sv(&[p.dfe_susceptible(), 0.0, 0.0, 0.0]);
        assert_eq!(total_population(&dfe).unwrap(), 2.0);
    }

    #[test]
    fn population_state_rejects_negative() {
        assert!(StateVector::population(vec![1.0, -1e-3, 0.0, 0.0]).is_err());
        assert!(StateVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn clamp_rule() {
        let mut x = [1000.0, -1e-7, 3.0, 0.0];
        assert!(clamp_population(&mut x).unwrap());
        assert_eq!(x[1], 0.0);
        let mut y = [1000.0, -1e-3, 3.0, 0.0];
        assert!(matches!(clamp_population(&mut y), Err(Error::NumericalDomain(_))));
        let mut z = [1.0, 2.0];
        assert!(!clamp_population(&mut z).unwrap());
    }

    #[test]
    fn numeric_jacobian_of_linear_system() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 4.0, -1.0, 0.25, 2.0]);
        let mm = m.clone();
        let sys = FnSystem::new(3, move |_t, x: &[f64], dx: &mut [f64]| {
            for i in 0..3 {
                dx[i] = (0..3).map(|j| mm[(i, j)] * x[j]).sum();
            }
        });
        let j = numeric_jacobian(&sys, &[0.3, -7.0, 100.0], DEFAULT_JACOBIAN_STEP).unwrap();
        for (a, b) in j.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn numeric_jacobian_matches_printed_dfe_matrix() {
        // J at (tau/mu, 0, 0, 0) with tau = 0.01, mu = 0.005
        let p = ModifiedSeirParams::new(0.01, 0.005, 0.25, 0.06, 0.07).unwrap();
        let (mu, b, e, g, t) = (0.005, 0.25, 0.06, 0.07, 0.01);
        #[rustfmt::skip]
        let printed = DMatrix::from_row_slice(4, 4, &[
            -mu, 0.0,       -b * t / mu, 0.0,
            0.0, -(mu + e), b * t / mu,  0.0,
            0.0, e,         -(mu + g),   0.0,
            0.0, 0.0,       g,           -mu,
        ]);
        let j = numeric_jacobian(&ModifiedSeir::new(p), &[2.0, 0.0, 0.0, 0.0], DEFAULT_JACOBIAN_STEP)
            .unwrap();
        for (a, b) in j.iter().zip(printed.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn numeric_jacobian_rejects_bad_input() {
        let m = ModifiedSeir::new(table3(0.005));
        assert!(numeric_jacobian(&m, &[1.0, 0.0], 1e-6).is_err());
        assert!(numeric_jacobian(&m, &[1.0, 0.0, 0.0, 0.0], 0.0).is_err());
        let blowup = FnSystem::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = 1.0 / (x[0] - 1e-9));
        assert!(matches!(
            numeric_jacobian(&blowup, &[0.0], 1e-9),
            Err(Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn param_names_parse() {
        assert_eq!("epsilon".parse::<ModifiedParam>().unwrap(), ModifiedParam::Epsilon);
        assert!("kappa".parse::<ModifiedParam>().is_err());
    }
}
