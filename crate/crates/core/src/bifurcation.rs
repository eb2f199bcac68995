//! One-dimensional normal forms, the planar Hopf normal form, and
//! center-manifold coefficients for transcritical bifurcations at `R0 = 1`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::integrate::{simulate, StepConfig};
use crate::model::{
    numeric_jacobian, BackwardModelParams, DynamicalSystem, ModifiedSeirParams, StateVector,
    DEFAULT_JACOBIAN_STEP,
};
use crate::stability::{characteristic_polynomial, polynomial_roots};

// ---------------------------------------------------------------------------
// Normal forms
// ---------------------------------------------------------------------------

/// Scalar normal forms with bifurcation parameter `a`.
///
/// * saddle-node `x' = x^2 + a`
/// * transcritical `x' = a x - b x^2`
/// * pitchfork `x' = x^3 - a x`
/// * Hopf, radial part `r' = a r - r^3` (with `theta' = 1`)
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalForm {
    SaddleNode,
    Transcritical { b: f64 },
    Pitchfork,
    HopfPolar,
}

impl NormalForm {
    pub fn name(&self) -> &'static str {
        match self {
            NormalForm::SaddleNode => "saddle-node",
            NormalForm::Transcritical { .. } => "transcritical",
            NormalForm::Pitchfork => "pitchfork",
            NormalForm::HopfPolar => "hopf",
        }
    }

    fn validate(&self) -> Result<()> {
        if let NormalForm::Transcritical { b } = self {
            if !(b.is_finite() && *b != 0.0) {
                return Err(invalid(format!("transcritical coefficient b must be nonzero, got {b}")));
            }
        }
        Ok(())
    }

    pub fn rhs(&self, a: f64, x: f64) -> f64 {
        match *self {
            NormalForm::SaddleNode => x * x + a,
            NormalForm::Transcritical { b } => a * x - b * x * x,
            NormalForm::Pitchfork => x * x * x - a * x,
            NormalForm::HopfPolar => a * x - x * x * x,
        }
    }

    /// `df/dx`.
    pub fn derivative(&self, a: f64, x: f64) -> f64 {
        match *self {
            NormalForm::SaddleNode => 2.0 * x,
            NormalForm::Transcritical { b } => a - 2.0 * b * x,
            NormalForm::Pitchfork => 3.0 * x * x - a,
            NormalForm::HopfPolar => a - 3.0 * x * x,
        }
    }
}

impl FromStr for NormalForm {
    type Err = Error;

    /// Parses a form name; the transcritical form gets `b = 1`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saddle-node" => Ok(NormalForm::SaddleNode),
            "transcritical" => Ok(NormalForm::Transcritical { b: 1.0 }),
            "pitchfork" => Ok(NormalForm::Pitchfork),
            "hopf" => Ok(NormalForm::HopfPolar),
            other => Err(invalid(format!("unknown normal form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    /// Stable iff the derivative is negative.
    pub fn from_derivative(d: f64) -> Self {
        if d < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub param: f64,
    pub x: f64,
    pub stability: Stability,
}

/// All real equilibria of `form` at parameter `a`, in increasing order of `x`.
///
/// For the Hopf form only radii `r >= 0` are returned.
pub fn normal_form_equilibria(form: NormalForm, a: f64) -> Result<Vec<BranchPoint>> {
    form.validate()?;
    if !a.is_finite() {
        return Err(invalid(format!("parameter must be finite, got {a}")));
    }
    let xs: Vec<f64> = match form {
        NormalForm::SaddleNode => {
            if a < 0.0 {
                let r = (-a).sqrt();
                vec![-r, r]
            } else if a == 0.0 {
                vec![0.0]
            } else {
                vec![]
            }
        }
        NormalForm::Transcritical { b } => {
            let other = a / b;
            if other < 0.0 {
                vec![other, 0.0]
            } else {
                vec![0.0, other]
            }
        }
        NormalForm::Pitchfork => {
            if a > 0.0 {
                let r = a.sqrt();
                vec![-r, 0.0, r]
            } else {
                vec![0.0]
            }
        }
        NormalForm::HopfPolar => {
            if a > 0.0 {
                vec![0.0, a.sqrt()]
            } else {
                vec![0.0]
            }
        }
    };
    Ok(xs
        .into_iter()
        .map(|x| BranchPoint {
            param: a,
            x,
            stability: Stability::from_derivative(form.derivative(a, x)),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramSlice {
    pub param: f64,
    pub points: Vec<BranchPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationDiagram {
    pub form: NormalForm,
    pub slices: Vec<DiagramSlice>,
}

impl BifurcationDiagram {
    pub fn points(&self) -> impl Iterator<Item = &BranchPoint> {
        self.slices.iter().flat_map(|s| s.points.iter())
    }
}

/// Equilibria at `n` evenly spaced parameter values from `param_min` to `param_max`.
pub fn sweep_diagram(
    form: NormalForm,
    param_min: f64,
    param_max: f64,
    n: usize,
) -> Result<BifurcationDiagram> {
    if n < 2 {
        return Err(invalid(format!("a sweep needs at least 2 points, got {n}")));
    }
    if !(param_min.is_finite() && param_max.is_finite() && param_min < param_max) {
        return Err(invalid(format!("invalid parameter range {param_min}:{param_max}")));
    }
    let last = (n - 1) as f64;
    let slices = (0..n)
        .map(|k| {
            let param = if k == n - 1 {
                param_max
            } else {
                param_min + (param_max - param_min) * (k as f64 / last)
            };
            normal_form_equilibria(form, param).map(|points| DiagramSlice { param, points })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BifurcationDiagram { form, slices })
}

// ---------------------------------------------------------------------------
// Hopf normal form
// ---------------------------------------------------------------------------

/// `x' = a x - y - x (x^2 + y^2)`, `y' = x + a y - y (x^2 + y^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfNormalForm {
    pub a: f64,
}

impl DynamicalSystem for HopfNormalForm {
    fn dimension(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, s: &[f64], d: &mut [f64]) {
        let (x, y) = (s[0], s[1]);
        let r2 = x * x + y * y;
        d[0] = self.a * x - y - x * r2;
        d[1] = x + self.a * y - y * r2;
    }

    fn analytic_jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let (x, y) = (s[0], s[1]);
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(2, 2, &[
            self.a - 3.0 * x * x - y * y, -1.0 - 2.0 * x * y,
            1.0 - 2.0 * x * y,            self.a - x * x - 3.0 * y * y,
        ]);
        Some(j)
    }
}

/// Tolerance on the observed radius of the limit cycle.
pub const HOPF_RADIUS_TOLERANCE: f64 = 1e-3;
/// Relative tolerance on the observed period.
pub const HOPF_PERIOD_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct HopfReport {
    pub a: f64,
    pub initial_r: f64,
    /// `sqrt(a)` for `a > 0`, otherwise 0 (the origin attracts).
    pub predicted_radius: f64,
    /// Mean radius over the last 10% of the output points.
    pub observed_radius: f64,
    /// Time per revolution over the same window; absent once the orbit has collapsed to the origin.
    pub period_observed: Option<f64>,
    pub last_radius: f64,
    pub converged: bool,
}

/// Integrates the planar Hopf normal form from `(initial_r, 0)` and compares
/// the attractor with the radial prediction.
///
/// Failure to settle is reported through `converged`, not as an error.
pub fn hopf_limit_cycle_check(a: f64, initial_r: f64, config: &StepConfig) -> Result<HopfReport> {
    if !a.is_finite() {
        return Err(invalid(format!("parameter must be finite, got {a}")));
    }
    if !(initial_r > 0.0 && initial_r.is_finite()) {
        return Err(invalid(format!("initial radius must be positive, got {initial_r}")));
    }
    let predicted_radius = if a > 0.0 { a.sqrt() } else { 0.0 };
    if a > 0.0 && initial_r == predicted_radius {
        return Err(invalid("initial radius lies on the limit cycle"));
    }

    let system = HopfNormalForm { a };
    let traj = simulate(&system, &StateVector::new(vec![initial_r, 0.0])?, config)?;
    let n = traj.len();
    let start = n - (n / 10).max(2);
    let window = &traj.states[start..];
    let radii: Vec<f64> = window.iter().map(|s| s[0].hypot(s[1])).collect();
    let observed_radius = radii.iter().sum::<f64>() / radii.len() as f64;
    let last_radius = *radii.last().expect("window is nonempty");

    let mut winding = 0.0;
    let mut prev = window[0][1].atan2(window[0][0]);
    for s in &window[1..] {
        let angle = s[1].atan2(s[0]);
        let mut step = angle - prev;
        // unwrap into (-pi, pi]
        step -= TAU * ((step + TAU / 2.0) / TAU).floor();
        winding += step;
        prev = angle;
    }
    let elapsed = traj.times[n - 1] - traj.times[start];
    let period_observed = if radii.iter().all(|r| *r > 0.0) && winding > 0.0 {
        Some(TAU * elapsed / winding)
    } else {
        None
    };

    let converged = if a > 0.0 {
        (observed_radius - predicted_radius).abs() <= HOPF_RADIUS_TOLERANCE
            && period_observed
                .is_some_and(|p| (p - TAU).abs() <= HOPF_PERIOD_TOLERANCE * TAU)
    } else {
        last_radius < 1e-6 * initial_r
    };

    Ok(HopfReport {
        a,
        initial_r,
        predicted_radius,
        observed_radius,
        period_observed,
        last_radius,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Center-manifold coefficients
// ---------------------------------------------------------------------------

/// A system `x' = f(x; p)` with a scalar parameter `p`.
pub trait ParameterizedSystem {
    fn dimension(&self) -> usize;

    fn rhs(&self, param: f64, state: &[f64], deriv: &mut [f64]);

    fn analytic_jacobian(&self, _param: f64, _state: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// A parameterized system with its parameter fixed.
pub struct Frozen<'a, P: ?Sized> {
    pub system: &'a P,
    pub param: f64,
}

impl<P: ParameterizedSystem + ?Sized> DynamicalSystem for Frozen<'_, P> {
    fn dimension(&self) -> usize {
        self.system.dimension()
    }
    fn rhs(&self, _t: f64, state: &[f64], deriv: &mut [f64]) {
        self.system.rhs(self.param, state, deriv)
    }
    fn analytic_jacobian(&self, state: &[f64]) -> Option<DMatrix<f64>> {
        self.system.analytic_jacobian(self.param, state)
    }
}

/// The modified SEIR model without its decoupled `R` equation, with `beta` as parameter.
///
/// ```text
/// x1' = tau - beta x1 x3 - mu x1
/// x2' = beta x1 x3 - (mu + eps) x2
/// x3' = eps x2 - (mu + gamma) x3
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSeir {
    pub tau: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl ReducedSeir {
    pub fn from_params(params: &ModifiedSeirParams) -> Self {
        Self {
            tau: params.tau(),
            mu: params.mu(),
            epsilon: params.epsilon(),
            gamma: params.gamma(),
        }
    }

    /// The transmission rate at which `R0 = 1`.
    pub fn critical_beta(&self) -> f64 {
        self.mu * (self.mu + self.epsilon) * (self.mu + self.gamma) / (self.epsilon * self.tau)
    }

    pub fn dfe(&self) -> [f64; 3] {
        [self.tau / self.mu, 0.0, 0.0]
    }
}

impl ParameterizedSystem for ReducedSeir {
    fn dimension(&self) -> usize {
        3
    }

    fn rhs(&self, beta: f64, x: &[f64], d: &mut [f64]) {
        let infection = beta * x[0] * x[2];
        d[0] = self.tau - infection - self.mu * x[0];
        d[1] = infection - (self.mu + self.epsilon) * x[1];
        d[2] = self.epsilon * x[1] - (self.mu + self.gamma) * x[2];
    }

    fn analytic_jacobian(&self, beta: f64, x: &[f64]) -> Option<DMatrix<f64>> {
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(3, 3, &[
            -beta * x[2] - self.mu, 0.0,                      -beta * x[0],
            beta * x[2],            -(self.mu + self.epsilon), beta * x[0],
            0.0,                    self.epsilon,              -(self.mu + self.gamma),
        ]);
        Some(j)
    }
}

/// The infected compartments `(x2, x3, x4)` of the backward-bifurcation model
/// with `x1` held at the disease-free level `s0`, and `beta2` as parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardInfected {
    pub params: BackwardModelParams,
    pub s0: f64,
}

impl BackwardInfected {
    pub fn new(params: BackwardModelParams, s0: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(invalid(format!("susceptible level must be positive, got {s0}")));
        }
        Ok(Self { params, s0 })
    }

    /// `beta2* = (gamma + delta) / s0 - phi beta1 / (eps + phi + sigma)`, where the
    /// infected block becomes singular.
    pub fn critical_beta2(&self) -> f64 {
        let p = &self.params;
        (p.gamma + p.delta) / self.s0 - p.phi * p.beta1 / (p.epsilon + p.phi + p.sigma)
    }
}

impl ParameterizedSystem for BackwardInfected {
    fn dimension(&self) -> usize {
        3
    }

    fn rhs(&self, beta2: f64, x: &[f64], d: &mut [f64]) {
        let p = &self.params;
        let (x2, x3, x4) = (x[0], x[1], x[2]);
        d[0] = p.beta1 * self.s0 * x3 - (p.epsilon + p.phi + p.sigma) * x2;
        d[1] = beta2 * self.s0 * x3 - (p.gamma + p.delta) * x3 + p.phi * x2;
        d[2] = p.gamma * x3 - p.alpha * x4;
    }
}

/// All four compartments of the backward-bifurcation model with `beta2` as parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardFull {
    pub params: BackwardModelParams,
}

impl ParameterizedSystem for BackwardFull {
    fn dimension(&self) -> usize {
        4
    }

    fn rhs(&self, beta2: f64, x: &[f64], d: &mut [f64]) {
        let p = BackwardModelParams { beta2, ..self.params };
        crate::model::BackwardModel::new(p).rhs(0.0, x, d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifurcationKind {
    Forward,
    Backward,
    Degenerate,
}

impl BifurcationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BifurcationKind::Forward => "forward",
            BifurcationKind::Backward => "backward",
            BifurcationKind::Degenerate => "degenerate",
        }
    }
}

/// Default tolerance for [`classify_bifurcation`].
pub const CLASSIFY_TOLERANCE: f64 = 1e-8;

/// Backward iff `a > tol` and `b > tol`; forward iff `a < -tol` and `b > tol`.
pub fn classify_bifurcation(a: f64, b: f64, tol: f64) -> Result<BifurcationKind> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(if b > tol && a > tol {
        BifurcationKind::Backward
    } else if b > tol && a < -tol {
        BifurcationKind::Forward
    } else {
        BifurcationKind::Degenerate
    })
}

/// How the left null vector is scaled once `w` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VNormalization {
    /// `v . w = 1`.
    UnitDot,
    /// The given component of `v` equals 1.
    Component(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterManifoldOptions {
    /// Component of `w` set to 1.
    pub w_index: usize,
    pub v_normalization: VNormalization,
    pub classify_tol: f64,
}

impl CenterManifoldOptions {
    /// `w` scaled by its last component, `v . w = 1`.
    pub fn for_dimension(n: usize) -> Self {
        Self {
            w_index: n.saturating_sub(1),
            v_normalization: VNormalization::UnitDot,
            classify_tol: CLASSIFY_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterManifoldCoefficients {
    pub a: f64,
    pub b: f64,
    pub critical_param: f64,
    /// Right null vector of the Jacobian.
    pub w: Vec<f64>,
    /// Left null vector of the Jacobian.
    pub v: Vec<f64>,
    pub v_dot_w: f64,
    pub eigenvalues: Vec<num_complex::Complex64>,
    pub classification: BifurcationKind,
}

fn second_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// `f` at the equilibrium shifted by `di` along `i` and `dj` along `j`, and
/// the parameter shifted by `dp`.
struct Probe<'a, P: ?Sized> {
    system: &'a P,
    base: Vec<f64>,
    param: f64,
}

impl<P: ParameterizedSystem + ?Sized> Probe<'_, P> {
    fn eval(&self, shifts: &[(usize, f64)], dp: f64) -> Result<Vec<f64>> {
        let mut x = self.base.clone();
        for &(i, d) in shifts {
            x[i] += d;
        }
        let mut out = vec![0.0; x.len()];
        self.system.rhs(self.param + dp, &x, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain(
                "right-hand side not finite near the equilibrium".into(),
            ));
        }
        Ok(out)
    }
}

/// `H[k][i][j] = d2 f_k / dx_i dx_j` and `P[k][i] = d2 f_k / dx_i dp` by central differences.
#[allow(clippy::type_complexity, clippy::needless_range_loop)]
fn second_partials<P: ParameterizedSystem + ?Sized>(
    probe: &Probe<'_, P>,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
    let n = probe.base.len();
    let mut hess = vec![vec![vec![0.0; n]; n]; n];
    let mut mixed = vec![vec![0.0; n]; n];
    let center = probe.eval(&[], 0.0)?;
    let hp = second_step(probe.param);
    for i in 0..n {
        let hi = second_step(probe.base[i]);
        let plus = probe.eval(&[(i, hi)], 0.0)?;
        let minus = probe.eval(&[(i, -hi)], 0.0)?;
        for k in 0..n {
            hess[k][i][i] = (plus[k] - 2.0 * center[k] + minus[k]) / (hi * hi);
        }
        for j in (i + 1)..n {
            let hj = second_step(probe.base[j]);
            let pp = probe.eval(&[(i, hi), (j, hj)], 0.0)?;
            let pm = probe.eval(&[(i, hi), (j, -hj)], 0.0)?;
            let mp = probe.eval(&[(i, -hi), (j, hj)], 0.0)?;
            let mm = probe.eval(&[(i, -hi), (j, -hj)], 0.0)?;
            for k in 0..n {
                let d = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * hi * hj);
                hess[k][i][j] = d;
                hess[k][j][i] = d;
            }
        }
        let pp = probe.eval(&[(i, hi)], hp)?;
        let pm = probe.eval(&[(i, hi)], -hp)?;
        let mp = probe.eval(&[(i, -hi)], hp)?;
        let mm = probe.eval(&[(i, -hi)], -hp)?;
        for k in 0..n {
            mixed[k][i] = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * hi * hp);
        }
    }
    Ok((hess, mixed))
}

/// Right singular vector of `m` for its smallest singular value.
fn right_null_vector(m: DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NumericalFailure {
        message: "singular value decomposition failed".into(),
        best_residual: f64::NAN,
    })?;
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("matrix is nonempty");
    Ok(v_t.row(k).iter().copied().collect())
}

/// Right and left null vectors of a singular `m`.
///
/// The left one comes from a second decomposition of `m^T`: the `U` factor
/// returned by nalgebra loses several digits in the column belonging to a
/// zero singular value, while the `V^T` rows stay accurate.
fn null_vectors(m: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((right_null_vector(m.clone())?, right_null_vector(m.transpose())?))
}

/// Castillo-Chavez and Song coefficients of `system` at `equilibrium` and
/// parameter `critical_param`:
///
/// ```text
/// a = sum_{k,i,j} v_k w_i w_j d2 f_k / dx_i dx_j
/// b = sum_{k,i}   v_k w_i     d2 f_k / dx_i dp
/// ```
///
/// The Jacobian must have a simple zero eigenvalue with every other eigenvalue
/// in the open left half-plane.
pub fn center_manifold_coefficients<P>(
    system: &P,
    equilibrium: &[f64],
    critical_param: f64,
    opts: &CenterManifoldOptions,
) -> Result<CenterManifoldCoefficients>
where
    P: ParameterizedSystem + ?Sized,
{
    let n = system.dimension();
    if equilibrium.len() != n {
        return Err(invalid(format!(
            "equilibrium has length {}, expected {n}",
            equilibrium.len()
        )));
    }
    if opts.w_index >= n {
        return Err(invalid(format!("w index {} out of range", opts.w_index)));
    }
    if let VNormalization::Component(k) = opts.v_normalization {
        if k >= n {
            return Err(invalid(format!("v index {k} out of range")));
        }
    }
    if !critical_param.is_finite() {
        return Err(invalid("critical parameter must be finite"));
    }

    let frozen = Frozen { system, param: critical_param };
    let jacobian = match frozen.analytic_jacobian(equilibrium) {
        Some(j) => j,
        None => numeric_jacobian(&frozen, equilibrium, DEFAULT_JACOBIAN_STEP)?,
    };
    let eigenvalues = polynomial_roots(&characteristic_polynomial(&jacobian)?)?;
    let scale = eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let zero_tol = 1e-8 * scale;
    let zeros = eigenvalues.iter().filter(|z| z.norm() <= zero_tol).count();
    if zeros != 1 {
        return Err(Error::Precondition(format!(
            "expected a simple zero eigenvalue, found {zeros} eigenvalues within {zero_tol:e} of 0"
        )));
    }
    if eigenvalues.iter().any(|z| z.norm() > zero_tol && z.re >= -zero_tol) {
        return Err(Error::Precondition(
            "eigenvalues other than zero must have negative real part".into(),
        ));
    }

    let (mut w, mut v) = null_vectors(&jacobian)?;
    let pivot = w[opts.w_index];
    let w_norm = w.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if pivot.abs() <= 1e-12 * w_norm {
        return Err(Error::Precondition(format!(
            "component {} of the right null vector vanishes",
            opts.w_index
        )));
    }
    w.iter_mut().for_each(|x| *x /= pivot);
    let v_scale = match opts.v_normalization {
        VNormalization::UnitDot => v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(),
        VNormalization::Component(k) => v[k],
    };
    let v_norm = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if v_scale.abs() <= 1e-12 * v_norm {
        return Err(Error::Precondition("left null vector cannot be normalized".into()));
    }
    v.iter_mut().for_each(|x| *x /= v_scale);
    let v_dot_w = v.iter().zip(&w).map(|(a, b)| a * b).sum();

    let probe = Probe { system, base: equilibrium.to_vec(), param: critical_param };
    let (hess, mixed) = second_partials(&probe)?;
    let mut a = 0.0;
    let mut b = 0.0;
    for k in 0..n {
        for i in 0..n {
            b += v[k] * w[i] * mixed[k][i];
            for j in 0..n {
                a += v[k] * w[i] * w[j] * hess[k][i][j];
            }
        }
    }
    let classification = classify_bifurcation(a, b, opts.classify_tol)?;
    Ok(CenterManifoldCoefficients {
        a,
        b,
        critical_param,
        w,
        v,
        v_dot_w,
        eigenvalues,
        classification,
    })
}

/// Coefficients of the reduced SEIR system at its disease-free state and `beta = beta*`,
/// normalized by `w3 = 1` and `v . w = 1`.
pub fn seir3_center_manifold(params: &ModifiedSeirParams) -> Result<CenterManifoldCoefficients> {
    let system = ReducedSeir::from_params(params);
    center_manifold_coefficients(
        &system,
        &system.dfe(),
        system.critical_beta(),
        &CenterManifoldOptions::for_dimension(3),
    )
}

/// Coefficients of the backward-bifurcation model's infected block at the
/// disease-free state `(s0, 0, 0, 0)` and `beta2 = beta2*`, normalized by
/// `w` at `x3` equal to 1 and `v` at `x2` equal to 1.
///
/// Vectors are indexed over `(x2, x3, x4)`. With `x1` frozen the block is
/// linear in the state, so `a` vanishes.
pub fn backward4_center_manifold(
    params: &BackwardModelParams,
    s0: f64,
) -> Result<CenterManifoldCoefficients> {
    let system = BackwardInfected::new(*params, s0)?;
    let critical = system.critical_beta2();
    if critical.is_nan() || critical <= 0.0 {
        return Err(Error::Precondition(format!(
            "threshold transmission rate beta2* = {critical} is not positive"
        )));
    }
    let opts = CenterManifoldOptions {
        w_index: 1,
        v_normalization: VNormalization::Component(0),
        classify_tol: CLASSIFY_TOLERANCE,
    };
    center_manifold_coefficients(&system, &[0.0; 3], critical, &opts)
}

/// The quadratic coefficient the susceptible direction would contribute per
/// unit of its (undetermined) right-vector component `w1`:
/// `2 (beta1 v2 + beta2* v3) w3`, for coefficients from [`backward4_center_manifold`].
pub fn backward_susceptible_coupling(
    params: &BackwardModelParams,
    coefficients: &CenterManifoldCoefficients,
) -> f64 {
    let (v, w) = (&coefficients.v, &coefficients.w);
    2.0 * (params.beta1 * v[0] + coefficients.critical_param * v[1]) * w[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_node_branches() {
        let pts = normal_form_equilibria(NormalForm::SaddleNode, -1.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].x, pts[0].stability), (-1.0, Stability::Stable));
        assert_eq!((pts[1].x, pts[1].stability), (1.0, Stability::Unstable));
        assert_eq!(normal_form_equilibria(NormalForm::SaddleNode, 0.0).unwrap().len(), 1);
        assert!(normal_form_equilibria(NormalForm::SaddleNode, 0.5).unwrap().is_empty());
    }

    #[test]
    fn transcritical_branches() {
        let form = NormalForm::Transcritical { b: 1.0 };
        let pts = normal_form_equilibria(form, 1.0).unwrap();
        assert_eq!((pts[0].x, pts[0].stability), (0.0, Stability::Unstable));
        assert_eq!((pts[1].x, pts[1].stability), (1.0, Stability::Stable));
        assert!(normal_form_equilibria(NormalForm::Transcritical { b: 0.0 }, 1.0).is_err());
    }

    #[test]
    fn pitchfork_branches() {
        let pts = normal_form_equilibria(NormalForm::Pitchfork, 1.0).unwrap();
        let summary: Vec<_> = pts.iter().map(|p| (p.x, p.stability)).collect();
        assert_eq!(
            summary,
            vec![(-1.0, Stability::Unstable), (0.0, Stability::Stable), (1.0, Stability::Unstable)]
        );
        assert_eq!(normal_form_equilibria(NormalForm::Pitchfork, -1.0).unwrap().len(), 1);
    }

    #[test]
    fn sweep_hits_endpoints() {
        let d = sweep_diagram(NormalForm::Pitchfork, -1.0, 1.0, 201).unwrap();
        assert_eq!(d.slices.len(), 201);
        assert_eq!(d.slices[0].param, -1.0);
        assert_eq!(d.slices[100].param, 0.0);
        assert_eq!(d.slices[200].param, 1.0);
        assert!(sweep_diagram(NormalForm::Pitchfork, 1.0, -1.0, 10).is_err());
        assert!(sweep_diagram(NormalForm::Pitchfork, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn form_names_round_trip() {
        for name in ["saddle-node", "transcritical", "pitchfork", "hopf"] {
            assert_eq!(name.parse::<NormalForm>().unwrap().name(), name);
        }
        assert!("fold".parse::<NormalForm>().is_err());
    }

    #[test]
    fn hopf_from_inside() {
        let cfg = StepConfig::new(0.01, 0.0, 200.0).unwrap();
        let r = hopf_limit_cycle_check(0.25, 0.01, &cfg).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.observed_radius - 0.5).abs() < 1e-3);
    }

    #[test]
    fn hopf_sink_for_negative_a() {
        let cfg = StepConfig::new(0.01, 0.0, 60.0).unwrap();
        let r = hopf_limit_cycle_check(-0.5, 1.0, &cfg).unwrap();
        assert_eq!(r.predicted_radius, 0.0);
        assert!(r.converged, "{r:?}");
    }

    #[test]
    fn hopf_rejects_start_on_cycle() {
        let cfg = StepConfig::new(0.01, 0.0, 1.0).unwrap();
        assert!(hopf_limit_cycle_check(1.0, 1.0, &cfg).is_err());
        assert!(hopf_limit_cycle_check(1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn hopf_jacobian_matches_numeric() {
        let sys = HopfNormalForm { a: 0.3 };
        let p = [0.4, -0.7];
        let exact = sys.analytic_jacobian(&p).unwrap();
        let approx = numeric_jacobian(&sys, &p, DEFAULT_JACOBIAN_STEP).unwrap();
        assert!((exact - approx).amax() < 1e-7);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_bifurcation(2.0, 1.0, 1e-8).unwrap(), BifurcationKind::Backward);
        assert_eq!(classify_bifurcation(-2.0, 1.0, 1e-8).unwrap(), BifurcationKind::Forward);
        assert_eq!(classify_bifurcation(0.0, 1.0, 1e-8).unwrap(), BifurcationKind::Degenerate);
        assert_eq!(classify_bifurcation(2.0, -1.0, 1e-8).unwrap(), BifurcationKind::Degenerate);
        assert!(classify_bifurcation(1.0, 1.0, 0.0).is_err());
    }

    struct Linear;

    impl ParameterizedSystem for Linear {
        fn dimension(&self) -> usize {
            2
        }
        fn rhs(&self, p: f64, x: &[f64], d: &mut [f64]) {
            d[0] = -x[0];
            d[1] = p * x[1];
        }
    }

    #[test]
    fn linear_system_is_degenerate() {
        let c = center_manifold_coefficients(&Linear, &[0.0, 0.0], 0.0, &CenterManifoldOptions::for_dimension(2))
            .unwrap();
        assert!(c.a.abs() < 1e-8);
        assert!((c.b - 1.0).abs() < 1e-8);
        assert_eq!(c.classification, BifurcationKind::Degenerate);
    }

    #[test]
    fn rejects_missing_or_repeated_zero() {
        let opts = CenterManifoldOptions::for_dimension(2);
        let err = center_manifold_coefficients(&Linear, &[0.0, 0.0], -1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let err = center_manifold_coefficients(&Linear, &[0.0, 0.0], 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn reduced_seir_jacobian_matches_numeric() {
        let p = ModifiedSeirParams::new(0.005, 0.005, 0.25, 0.06, 0.07).unwrap();
        let sys = ReducedSeir::from_params(&p);
        let frozen = Frozen { system: &sys, param: 0.3 };
        let x = [0.8, 0.1, 0.05];
        let exact = frozen.analytic_jacobian(&x).unwrap();
        let approx = numeric_jacobian(&frozen, &x, DEFAULT_JACOBIAN_STEP).unwrap();
        assert!((exact - approx).amax() < 1e-7);
    }

    #[test]
    fn full_backward_model_has_repeated_zero() {
        let p = BackwardModelParams::new(0.1, 0.2, 0.1, 0.4, 0.05, 0.15, 0.02, 0.25).unwrap();
        let infected = BackwardInfected::new(p, 1.0).unwrap();
        let full = BackwardFull { params: p };
        let err = center_manifold_coefficients(
            &full,
            &[1.0, 0.0, 0.0, 0.0],
            infected.critical_beta2(),
            &CenterManifoldOptions::for_dimension(4),
        )
        .unwrap_err();
        assert!(infected.critical_beta2() > 0.0);
        match err {
            Error::Precondition(msg) => assert!(msg.contains("simple zero"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn left_null_vector_is_accurate() {
        // a singular infected block on which nalgebra's U column is off in the third digit
        let j = DMatrix::from_row_slice(
            3,
            3,
            &[
                -0.81495784003138,
                0.2829547620199749,
                0.0,
                0.07663788903096648,
                -0.026608806722609457,
                0.0,
                0.0,
                0.05582595345130736,
                -0.9702905402290254,
            ],
        );
        let (w, v) = null_vectors(&j).unwrap();
        let right = &j * nalgebra::DVector::from_vec(w);
        let left = j.transpose() * nalgebra::DVector::from_vec(v.clone());
        assert!(right.amax() < 1e-14 && left.amax() < 1e-14, "{right} {left}");
        assert!(v[2].abs() < 1e-14);
    }
}
