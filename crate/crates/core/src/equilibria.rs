//! Equilibria of the modified SEIR model and its basic reproduction number.

use nalgebra::Matrix2;

use crate::error::{invalid, Result};
use crate::model::{DynamicalSystem, ModifiedSeir, ModifiedSeirParams, StateVector};

/// Next-generation construction of the reproduction number for the infected
/// subsystem `(E, I)` linearized at susceptible level `s0`.
///
/// `F` holds new infections (`beta s0` entering `E` from `I`), `V` the
/// transitions out of and between the infected classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproductionNumber {
    pub value: f64,
    pub s0: f64,
    pub f_matrix: Matrix2<f64>,
    pub v_matrix: Matrix2<f64>,
    pub ngm: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub state: StateVector,
    pub kind: EquilibriumKind,
    /// Max-norm of the right-hand side at `state`.
    pub residual: f64,
}

/// Position of a parameter set relative to `R0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Below,
    At,
    Above,
}

fn spectral_radius_2x2(m: &Matrix2<f64>) -> f64 {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    } else {
        // complex pair: |lambda|^2 = det
        det.sqrt()
    }
}

pub fn next_generation_matrix(params: &ModifiedSeirParams, s0: f64) -> Result<ReproductionNumber> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(invalid(format!("susceptible level must be positive, got {s0}")));
    }
    let (mu, beta, eps, gamma) = (params.mu(), params.beta(), params.epsilon(), params.gamma());
    let f_matrix = Matrix2::new(0.0, beta * s0, 0.0, 0.0);
    let v_matrix = Matrix2::new(mu + eps, 0.0, -eps, mu + gamma);
    let det_v = (mu + eps) * (mu + gamma);
    let v_inv = Matrix2::new(mu + gamma, 0.0, eps, mu + eps) / det_v;
    let ngm = f_matrix * v_inv;
    Ok(ReproductionNumber { value: spectral_radius_2x2(&ngm), s0, f_matrix, v_matrix, ngm })
}

/// `R0 = eps beta tau / (mu (mu + eps) (mu + gamma))`, the threshold at the
/// disease-free susceptible level `tau / mu`.
pub fn r0(params: &ModifiedSeirParams) -> f64 {
    let (tau, mu, beta, eps, gamma) =
        (params.tau(), params.mu(), params.beta(), params.epsilon(), params.gamma());
    eps * beta * tau / (mu * (mu + eps) * (mu + gamma))
}

pub fn threshold(params: &ModifiedSeirParams) -> Threshold {
    let r = r0(params);
    if r < 1.0 {
        Threshold::Below
    } else if r > 1.0 {
        Threshold::Above
    } else {
        Threshold::At
    }
}

fn residual(params: &ModifiedSeirParams, state: &[f64]) -> f64 {
    let mut d = [0.0; 4];
    ModifiedSeir::new(*params).rhs(0.0, state, &mut d);
    d.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Disease-free equilibrium `(tau / mu, 0, 0, 0)`.
pub fn dfe(params: &ModifiedSeirParams) -> EquilibriumPoint {
    let state = vec![params.dfe_susceptible(), 0.0, 0.0, 0.0];
    let residual = residual(params, &state);
    EquilibriumPoint {
        state: StateVector::from_vec_unchecked(state),
        kind: EquilibriumKind::DiseaseFree,
        residual,
    }
}

/// The endemic equilibrium, present only when `R0 > 1`.
///
/// ```text
/// S* = (mu + gamma)(mu + eps) / (beta eps)
/// I* = (tau beta eps - mu (mu + gamma)(mu + eps)) / (beta (mu + gamma)(mu + eps))
/// E* = (mu + gamma) I* / eps
/// R* = gamma I* / mu
/// ```
///
/// `I*` is evaluated as `mu (R0 - 1) / beta`, which is the same quantity and
/// is positive exactly when the computed `R0` exceeds one.
pub fn endemic_equilibrium(params: &ModifiedSeirParams) -> Option<EquilibriumPoint> {
    if threshold(params) != Threshold::Above {
        return None;
    }
    let (mu, beta, eps, gamma) = (params.mu(), params.beta(), params.epsilon(), params.gamma());
    let s = (mu + gamma) * (mu + eps) / (beta * eps);
    let i = mu * (r0(params) - 1.0) / beta;
    let e = (mu + gamma) * i / eps;
    let r = gamma * i / mu;
    let state = vec![s, e, i, r];
    let residual = residual(params, &state);
    Some(EquilibriumPoint {
        state: StateVector::from_vec_unchecked(state),
        kind: EquilibriumKind::Endemic,
        residual,
    })
}
