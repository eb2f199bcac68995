//! Local stability of the modified SEIR equilibria and a sampled Lyapunov
//! certificate for the disease-free state.

mod lyapunov;
mod poly;

pub use lyapunov::{
    lyapunov_dfe_certificate, lyapunov_dfe_certificate_seeded, LyapunovCertificate, ShiftedSeir,
    DEFAULT_LYAPUNOV_SEED, LYAPUNOV_TOLERANCE,
};
pub use poly::{characteristic_polynomial, polynomial_roots, CharPoly, MAX_ORDER};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::equilibria::{self, EquilibriumPoint, Threshold};
use crate::error::{invalid, Error, Result};
use crate::model::{DynamicalSystem, ModifiedSeir, ModifiedSeirParams};

/// Distance within which a computed eigenvalue counts as equal to `-mu`.
pub const FACTOR_ROOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    NonHyperbolic,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::NonHyperbolic => "non-hyperbolic",
        }
    }
}

pub fn classify_stability(eigenvalues: &[Complex64], tol: f64) -> Result<Verdict> {
    if eigenvalues.is_empty() {
        return Err(invalid("no eigenvalues to classify"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if eigenvalues.iter().all(|z| z.re < -tol) {
        Ok(Verdict::Stable)
    } else if eigenvalues.iter().any(|z| z.re > tol) {
        Ok(Verdict::Unstable)
    } else {
        Ok(Verdict::NonHyperbolic)
    }
}

/// `1e-9 * max(1, largest eigenvalue modulus)`.
pub fn hyperbolicity_tolerance(eigenvalues: &[Complex64]) -> f64 {
    let scale = eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
    1e-9 * scale
}

/// Sign variations among the nonzero coefficients (highest degree first),
/// an upper bound on the number of positive real roots.
pub fn descartes_positive_root_bound(coefficients: &[f64]) -> Result<usize> {
    if coefficients.iter().all(|c| *c == 0.0) {
        return Err(invalid("all coefficients are zero"));
    }
    if coefficients[0] == 0.0 {
        return Err(invalid("leading coefficient is zero"));
    }
    let mut changes = 0;
    let mut last = 0.0_f64;
    for &c in coefficients.iter().filter(|c| **c != 0.0) {
        if last != 0.0 && c.signum() != last.signum() {
            changes += 1;
        }
        last = c;
    }
    Ok(changes)
}

/// Whether `lambda^3 + A lambda^2 + B lambda + C` has all roots in the open left half-plane.
pub fn routh_hurwitz_cubic(a: f64, b: f64, c: f64) -> bool {
    a > 0.0 && c > 0.0 && a * b - c > 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: &'static str,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub equilibrium: EquilibriumPoint,
    pub r0: f64,
    pub threshold: Threshold,
    pub jacobian: DMatrix<f64>,
    pub char_poly: CharPoly,
    /// The characteristic polynomial with the `(lambda + mu)` factors divided out.
    pub factor: CharPoly,
    pub eigenvalues: Vec<Complex64>,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub criteria: Vec<Criterion>,
}

impl StabilityReport {
    pub fn criterion(&self, name: &str) -> Option<bool> {
        self.criteria.iter().find(|c| c.name == name).map(|c| c.holds)
    }
}

struct Linearization {
    jacobian: DMatrix<f64>,
    char_poly: CharPoly,
    eigenvalues: Vec<Complex64>,
    verdict: Verdict,
    tolerance: f64,
}

fn linearize(params: &ModifiedSeirParams, point: &EquilibriumPoint) -> Result<Linearization> {
    let jacobian = ModifiedSeir::new(*params)
        .analytic_jacobian(point.state.as_slice())
        .expect("modified SEIR has an analytic Jacobian");
    let char_poly = characteristic_polynomial(&jacobian)?;
    let eigenvalues = polynomial_roots(&char_poly)?;
    let tolerance = hyperbolicity_tolerance(&eigenvalues);
    let verdict = classify_stability(&eigenvalues, tolerance)?;
    Ok(Linearization { jacobian, char_poly, eigenvalues, verdict, tolerance })
}

fn count_near(eigenvalues: &[Complex64], target: f64) -> usize {
    eigenvalues
        .iter()
        .filter(|z| (*z - Complex64::new(target, 0.0)).norm() <= FACTOR_ROOT_TOLERANCE)
        .count()
}

/// Divides `(lambda + mu)^times` out of `p`, failing if the remainder is not
/// negligible relative to the coefficients.
fn divide_out(p: &CharPoly, mu: f64, times: usize) -> Result<CharPoly> {
    let mut q = p.clone();
    for _ in 0..times {
        let (next, remainder) = q.deflate(-mu);
        let scale = q.coefficients().iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if remainder.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalFailure {
                message: format!("(lambda + {mu}) does not divide the characteristic polynomial"),
                best_residual: remainder.abs(),
            });
        }
        q = next;
    }
    Ok(q)
}

/// Linear stability of the disease-free equilibrium.
///
/// The characteristic polynomial factors as `(lambda + mu)^2 (lambda^2 + a1 lambda + a2)`
/// with `a1 = 2 mu + eps + gamma` and `a2 = (mu + eps)(mu + gamma)(1 - R0)`.
pub fn dfe_stability_report(params: &ModifiedSeirParams) -> Result<StabilityReport> {
    let point = equilibria::dfe(params);
    let lin = linearize(params, &point)?;
    let factor = divide_out(&lin.char_poly, params.mu(), 2)?;
    let (a1, a2) = (factor.coefficients()[1], factor.coefficients()[2]);

    let descartes = descartes_positive_root_bound(factor.coefficients())?;
    let coefficients_positive = a1 > 0.0 && a2 > 0.0;
    let criteria = vec![
        Criterion { name: "descartes_no_positive_root", holds: descartes == 0 },
        Criterion { name: "quadratic_coefficients_positive", holds: coefficients_positive },
        Criterion {
            name: "double_root_at_minus_mu",
            holds: count_near(&lin.eigenvalues, -params.mu()) >= 2,
        },
        Criterion {
            name: "criteria_agree_with_eigenvalues",
            holds: coefficients_positive == (lin.verdict == Verdict::Stable),
        },
    ];
    Ok(StabilityReport {
        equilibrium: point,
        r0: equilibria::r0(params),
        threshold: equilibria::threshold(params),
        jacobian: lin.jacobian,
        char_poly: lin.char_poly,
        factor,
        eigenvalues: lin.eigenvalues,
        verdict: lin.verdict,
        tolerance: lin.tolerance,
        criteria,
    })
}

/// Linear stability of the endemic equilibrium; requires `R0 > 1`.
///
/// The characteristic polynomial factors as `(lambda + mu)(lambda^3 + A lambda^2 + B lambda + C)`.
pub fn ee_stability_report(params: &ModifiedSeirParams) -> Result<StabilityReport> {
    let point = equilibria::endemic_equilibrium(params).ok_or_else(|| {
        Error::Precondition(format!(
            "no endemic equilibrium: R0 = {} does not exceed 1",
            equilibria::r0(params)
        ))
    })?;
    let lin = linearize(params, &point)?;
    let factor = divide_out(&lin.char_poly, params.mu(), 1)?;
    let c = factor.coefficients();
    let routh_hurwitz = routh_hurwitz_cubic(c[1], c[2], c[3]);
    let criteria = vec![
        Criterion { name: "routh_hurwitz", holds: routh_hurwitz },
        Criterion {
            name: "root_at_minus_mu",
            holds: count_near(&lin.eigenvalues, -params.mu()) >= 1,
        },
        Criterion {
            name: "criteria_agree_with_eigenvalues",
            holds: routh_hurwitz == (lin.verdict == Verdict::Stable),
        },
    ];
    Ok(StabilityReport {
        equilibrium: point,
        r0: equilibria::r0(params),
        threshold: equilibria::threshold(params),
        jacobian: lin.jacobian,
        char_poly: lin.char_poly,
        factor,
        eigenvalues: lin.eigenvalues,
        verdict: lin.verdict,
        tolerance: lin.tolerance,
        criteria,
    })
}
