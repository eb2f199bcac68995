//! Normalized sensitivity indices `S_p = (dR0/dp) (p / R0)` of the basic
//! reproduction number.

use crate::error::{invalid, Result};
use crate::model::{ModifiedParam, ModifiedSeirParams};

/// Relative step used by [`sensitivity_report`] for the finite-difference column.
pub const DEFAULT_REL_STEP: f64 = 1e-5;

/// Which form of `R0` the indices refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R0Convention {
    /// `R0 = eps beta / ((mu + eps)(mu + gamma))`, the susceptible level fixed at 1.
    #[default]
    UnitSusceptible,
    /// `R0 = eps beta tau / (mu (mu + eps)(mu + gamma))`.
    TauInclusive,
}

impl R0Convention {
    /// Parameters that enter `R0`, in reporting order.
    pub fn parameters(self) -> &'static [ModifiedParam] {
        use ModifiedParam::*;
        match self {
            R0Convention::UnitSusceptible => &[Beta, Epsilon, Mu, Gamma],
            R0Convention::TauInclusive => &[Beta, Epsilon, Mu, Gamma, Tau],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityIndex {
    pub parameter: ModifiedParam,
    pub value: f64,
    pub method: Method,
}

pub fn reproduction_number(params: &ModifiedSeirParams, convention: R0Convention) -> f64 {
    let (mu, beta, eps, gamma) = (params.mu(), params.beta(), params.epsilon(), params.gamma());
    let unit = eps * beta / ((mu + eps) * (mu + gamma));
    match convention {
        R0Convention::UnitSusceptible => unit,
        R0Convention::TauInclusive => unit * params.tau() / mu,
    }
}

fn check_enters(which: ModifiedParam, convention: R0Convention) -> Result<()> {
    if convention.parameters().contains(&which) {
        Ok(())
    } else {
        Err(invalid(format!("{which} does not enter R0 under this convention")))
    }
}

pub fn sensitivity_analytic(
    params: &ModifiedSeirParams,
    which: ModifiedParam,
    convention: R0Convention,
) -> Result<SensitivityIndex> {
    check_enters(which, convention)?;
    let (mu, eps, gamma) = (params.mu(), params.epsilon(), params.gamma());
    let value = match which {
        ModifiedParam::Beta | ModifiedParam::Tau => 1.0,
        ModifiedParam::Epsilon => mu / (mu + eps),
        ModifiedParam::Gamma => -gamma / (mu + gamma),
        ModifiedParam::Mu => {
            let unit = -mu * (2.0 * mu + eps + gamma) / ((mu + eps) * (mu + gamma));
            match convention {
                R0Convention::UnitSusceptible => unit,
                R0Convention::TauInclusive => unit - 1.0,
            }
        }
    };
    Ok(SensitivityIndex { parameter: which, value, method: Method::Analytic })
}

/// Central difference of `R0` at `p (1 +- rel_step)`, normalized by `p / R0`.
pub fn sensitivity_fd(
    params: &ModifiedSeirParams,
    which: ModifiedParam,
    rel_step: f64,
    convention: R0Convention,
) -> Result<SensitivityIndex> {
    check_enters(which, convention)?;
    if !(rel_step > 0.0 && rel_step <= 0.1) {
        return Err(invalid(format!("relative step must lie in (0, 0.1], got {rel_step}")));
    }
    let r0 = reproduction_number(params, convention);
    if r0 == 0.0 {
        return Err(invalid("R0 is zero; the normalized index is undefined"));
    }
    let p = params.get(which);
    let (up, down) = (p * (1.0 + rel_step), p * (1.0 - rel_step));
    let r_up = reproduction_number(&params.with(which, up)?, convention);
    let r_down = reproduction_number(&params.with(which, down)?, convention);
    let value = (r_up - r_down) / (up - down) * p / r0;
    Ok(SensitivityIndex { parameter: which, value, method: Method::FiniteDifference })
}

/// Analytic and finite-difference index for every parameter of `R0`,
/// interleaved per parameter.
pub fn sensitivity_report(
    params: &ModifiedSeirParams,
    convention: R0Convention,
) -> Result<Vec<SensitivityIndex>> {
    let mut out = Vec::with_capacity(2 * convention.parameters().len());
    for &which in convention.parameters() {
        out.push(sensitivity_analytic(params, which, convention)?);
        out.push(sensitivity_fd(params, which, DEFAULT_REL_STEP, convention)?);
    }
    Ok(out)
}
