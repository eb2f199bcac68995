//! Characteristic polynomials of small matrices and their roots.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Largest matrix order handled by [`characteristic_polynomial`].
pub const MAX_ORDER: usize = 4;

const ITERATION_BUDGET: usize = 200;
const RESTARTS: usize = 3;
const RESTART_SEED: u64 = 0x0ABE_87F1;
/// Largest separation, relative to the root scale, at which two roots may be merged.
const MERGE_CAP: f64 = 1e-4;

/// A monic real polynomial, coefficients ordered from the highest degree down.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    coefficients: Vec<f64>,
    /// Absolute error bound on each coefficient.
    uncertainty: Vec<f64>,
}

impl CharPoly {
    /// Builds a polynomial from arbitrary leading coefficient, normalizing to monic.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let lead = *coefficients
            .first()
            .ok_or_else(|| invalid("polynomial needs at least one coefficient"))?;
        if lead == 0.0 {
            return Err(invalid("leading coefficient is zero"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial coefficients must be finite"));
        }
        let coefficients: Vec<f64> = coefficients.into_iter().map(|c| c / lead).collect();
        let uncertainty = coefficients.iter().map(|c| f64::EPSILON * c.abs()).collect();
        Ok(Self { coefficients, uncertainty })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coefficients.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in &self.coefficients {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Bound on the error of `eval(z)`: Horner rounding plus the effect of
    /// the coefficient uncertainty.
    fn eval_bound(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let magnitude = self.coefficients.iter().fold(0.0, |acc, &c| acc * r + c.abs());
        let inherited = self.uncertainty.iter().fold(0.0, |acc, &u| acc * r + u);
        4.0 * f64::EPSILON * magnitude * (self.degree() as f64 + 1.0) + inherited
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coefficient_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Divides by `(lambda - root)`, returning the quotient and the remainder.
    pub fn deflate(&self, root: f64) -> (CharPoly, f64) {
        let n = self.degree();
        let mut q = Vec::with_capacity(n);
        let mut uncertainty = Vec::with_capacity(n);
        let (mut acc, mut err) = (0.0, 0.0);
        for (k, (&c, &u)) in self.coefficients.iter().zip(&self.uncertainty).enumerate() {
            acc = acc * root + c;
            err = err * root.abs() + u + f64::EPSILON * acc.abs();
            if k < n {
                q.push(acc);
                uncertainty.push(err);
            }
        }
        (CharPoly { coefficients: q, uncertainty }, acc)
    }
}

/// Characteristic polynomial `det(lambda I - A)` by the Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial(matrix: &DMatrix<f64>) -> Result<CharPoly> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(invalid(format!("matrix is {}x{}, not square", n, matrix.ncols())));
    }
    if n == 0 {
        return Err(invalid("matrix is empty"));
    }
    if n > MAX_ORDER {
        return Err(Error::UnsupportedDimension(n));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }

    let identity = DMatrix::<f64>::identity(n, n);
    let abs_matrix = matrix.abs();
    let mut coefficients = vec![1.0];
    let mut uncertainty = vec![0.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    // the same recursion on magnitudes gives a running error bound
    let mut m_abs = DMatrix::<f64>::zeros(n, n);
    let mut c_abs = 1.0;
    for k in 1..=n {
        let prev = *coefficients.last().unwrap();
        m = matrix * &m + &identity * prev;
        m_abs = &abs_matrix * &m_abs + &identity * c_abs;
        let am = matrix * &m;
        coefficients.push(-am.trace() / k as f64);
        c_abs = (&abs_matrix * &m_abs).trace() / k as f64;
        uncertainty.push(2.0 * (n + k) as f64 * f64::EPSILON * c_abs);
    }
    Ok(CharPoly { coefficients, uncertainty })
}

fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Upper bound on root moduli (Fujiwara).
fn root_radius(p: &CharPoly) -> f64 {
    let n = p.degree();
    let c = p.coefficients();
    (1..=n)
        .map(|k| {
            let v = c[k].abs();
            if k == n {
                (v / 2.0).powf(1.0 / k as f64)
            } else {
                v.powf(1.0 / k as f64)
            }
        })
        .fold(0.0, f64::max)
        * 2.0
}

/// Aberth-Ehrlich simultaneous iteration. Returns the iterates and whether all converged.
fn aberth(p: &CharPoly, start: &[Complex64]) -> (Vec<Complex64>, bool) {
    let n = start.len();
    let mut z = start.to_vec();
    let mut done = vec![false; n];
    for _ in 0..ITERATION_BUDGET {
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (pz, dpz) = p.eval_with_derivative(z[k]);
            if pz.norm() <= p.eval_bound(z[k]) {
                done[k] = true;
                continue;
            }
            let ratio = pz / dpz;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            z[k] -= step;
            if step.norm() <= 2.0 * f64::EPSILON * z[k].norm() {
                done[k] = true;
            }
        }
        if done.iter().all(|d| *d) {
            return (z, true);
        }
    }
    (z, false)
}

/// Whether `a` and `b` approximate the same multiple root: their midpoint is
/// itself a root up to rounding noise.
fn same_root(p: &CharPoly, a: Complex64, b: Complex64, scale: f64) -> bool {
    let mid = (a + b) * 0.5;
    (a - b).norm() <= MERGE_CAP * scale && p.eval(mid).norm() <= 10.0 * p.eval_bound(mid)
}

/// `p` and its successive derivatives, each carrying its coefficient uncertainty.
fn derivative_chain(p: &CharPoly) -> Vec<CharPoly> {
    let mut chain = vec![p.clone()];
    while chain.last().expect("nonempty").degree() > 0 {
        let q = chain.last().expect("nonempty");
        let n = q.degree();
        let scale = |k: usize| (n - k) as f64;
        let coefficients = q.coefficients[..n].iter().enumerate().map(|(k, c)| c * scale(k)).collect();
        let uncertainty = q.uncertainty[..n].iter().enumerate().map(|(k, u)| u * scale(k)).collect();
        chain.push(CharPoly { coefficients, uncertainty });
    }
    chain
}

/// Newton iteration on `f` (with derivative `df`) from `start`, kept within `radius`.
fn newton(f: &CharPoly, df: &CharPoly, start: Complex64, radius: f64) -> Option<Complex64> {
    let mut z = start;
    for _ in 0..50 {
        let step = f.eval(z) / df.eval(z);
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        z -= step;
        if (z - start).norm() > radius {
            return None;
        }
        if step.norm() <= 2.0 * f64::EPSILON * z.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Some(z)
}

/// How far `z` is from being a root of multiplicity `k`: the largest ratio of
/// `|p^(j)(z)|` to its noise bound for `j < k`.
fn multiplicity_defect(chain: &[CharPoly], z: Complex64, k: usize) -> f64 {
    chain[..k]
        .iter()
        .map(|q| q.eval(z).norm() / q.eval_bound(z).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Replaces a cluster of root approximations by its multiplicity structure.
///
/// Tries multiplicities from the cluster size down to 2. A `k`-fold point is a
/// zero of `p^(k-1)` at which the lower derivatives vanish up to noise; the
/// remaining members keep the cluster's sum, which is well conditioned even
/// when the individual roots are not.
fn resolve_cluster(chain: &[CharPoly], members: &[Complex64], scale: f64) -> Vec<Complex64> {
    let m = members.len();
    if m < 2 {
        return members.to_vec();
    }
    let sum: Complex64 = members.iter().sum();
    let centroid = sum / m as f64;
    let spread = members.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
    let radius = 2.0 * spread + 4.0 * f64::EPSILON * scale;
    for k in (2..=m).rev() {
        let best = std::iter::once(centroid)
            .chain(members.iter().copied())
            .filter_map(|start| newton(&chain[k - 1], &chain[k], start, radius))
            .filter(|z| (z - centroid).norm() <= radius)
            .map(|z| (z, multiplicity_defect(chain, z, k - 1)))
            .filter(|(_, defect)| *defect <= 10.0)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((z, _)) = best else { continue };

        let mut rest = members.to_vec();
        rest.sort_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()));
        let mut rest = rest.split_off(k);
        let mut out = vec![z; k];
        if !rest.is_empty() {
            let shift = (sum - z * k as f64 - rest.iter().sum::<Complex64>()) / rest.len() as f64;
            rest.iter_mut().for_each(|r| *r += shift);
            out.extend(resolve_cluster(chain, &rest, scale));
        }
        return out;
    }
    members.to_vec()
}

/// Newton steps on each root while the residual keeps shrinking.
///
/// Aberth stops once a residual drops under the noise bound, which can be far
/// looser than the actual rounding. A root never moves more than a quarter of
/// the way to its nearest neighbour, so members of a cluster stay apart.
fn polish(p: &CharPoly, roots: &mut [Complex64]) {
    for k in 0..roots.len() {
        let start = roots[k];
        let reach = roots
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, r)| (r - start).norm())
            .fold(f64::INFINITY, f64::min)
            * 0.25;
        let mut z = start;
        let mut residual = p.eval(z).norm();
        for _ in 0..8 {
            let (pz, dpz) = p.eval_with_derivative(z);
            let next = z - pz / dpz;
            let next_residual = p.eval(next).norm();
            if next_residual.is_nan() || next_residual >= residual || (next - start).norm() > reach {
                break;
            }
            z = next;
            residual = next_residual;
        }
        roots[k] = z;
    }
}

/// Groups approximations of the same multiple root and resolves each group.
fn merge_clusters(p: &CharPoly, roots: &mut [Complex64], scale: f64) {
    let chain = derivative_chain(p);
    let n = roots.len();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..n {
                if assigned[j] || members.contains(&j) {
                    continue;
                }
                if members.iter().any(|&m| same_root(p, roots[m], roots[j], scale)) {
                    members.push(j);
                    grew = true;
                }
            }
        }
        for &m in &members {
            assigned[m] = true;
        }
        if members.len() < 2 {
            continue;
        }
        let values: Vec<Complex64> = members.iter().map(|&m| roots[m]).collect();
        for (&m, z) in members.iter().zip(resolve_cluster(&chain, &values, scale)) {
            roots[m] = z;
        }
    }
}

/// Snaps near-real roots onto the axis and makes complex roots come in exact conjugate pairs.
fn enforce_conjugacy(roots: &mut [Complex64], scale: f64) {
    let snap = 1e-10 * scale;
    for r in roots.iter_mut() {
        if r.im.abs() <= snap {
            r.im = 0.0;
        }
    }
    let n = roots.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] || roots[i].im <= 0.0 {
            continue;
        }
        let partner = (0..n)
            .filter(|&j| !paired[j] && j != i && roots[j].im < 0.0)
            .min_by(|&a, &b| {
                let da = (roots[a] - roots[i].conj()).norm();
                let db = (roots[b] - roots[i].conj()).norm();
                da.total_cmp(&db)
            });
        // a partner that is not near the conjugate belongs to another real root
        let partner = partner.filter(|&j| (roots[j] - roots[i].conj()).norm() < roots[i].im);
        match partner {
            Some(j) => {
                let re = 0.5 * (roots[i].re + roots[j].re);
                let im = 0.5 * (roots[i].im - roots[j].im);
                roots[i] = Complex64::new(re, im);
                roots[j] = Complex64::new(re, -im);
                paired[i] = true;
                paired[j] = true;
            }
            None => roots[i].im = 0.0,
        }
    }
    for i in 0..n {
        if !paired[i] && roots[i].im < 0.0 {
            roots[i].im = 0.0;
        }
    }
}

/// All roots of `poly`, with multiplicity, sorted by real then imaginary part.
///
/// Degrees one and two use closed forms; higher degrees use Aberth iteration
/// with up to three randomly perturbed restarts.
pub fn polynomial_roots(poly: &CharPoly) -> Result<Vec<Complex64>> {
    let n = poly.degree();
    let c = poly.coefficients();
    let mut roots = match n {
        0 => return Err(invalid("constant polynomial has no roots")),
        1 => vec![Complex64::new(-c[1], 0.0)],
        2 => quadratic_roots(c[1], c[2]).to_vec(),
        _ => {
            let radius = root_radius(poly).max(f64::MIN_POSITIVE);
            let center = -c[1] / n as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
            let mut best: Option<(Vec<Complex64>, f64)> = None;
            let mut converged = None;
            for attempt in 0..=RESTARTS {
                let phase = if attempt == 0 { 0.4 } else { rng.gen_range(0.0..std::f64::consts::TAU) };
                let shrink = if attempt == 0 { 1.0 } else { rng.gen_range(0.5..1.0) };
                let start: Vec<Complex64> = (0..n)
                    .map(|k| {
                        let angle = phase + std::f64::consts::TAU * k as f64 / n as f64;
                        Complex64::new(center, 0.0) + Complex64::from_polar(radius * shrink, angle)
                    })
                    .collect();
                let (z, ok) = aberth(poly, &start);
                let residual = z.iter().map(|r| poly.eval(*r).norm()).fold(0.0, f64::max);
                if ok && residual.is_finite() {
                    converged = Some(z);
                    break;
                }
                if best.as_ref().is_none_or(|(_, r)| residual < *r) {
                    best = Some((z, residual));
                }
            }
            match converged {
                Some(z) => z,
                None => {
                    let (z, residual) = best.expect("at least one attempt");
                    let bound = 1e-9 * (1.0 + poly.coefficient_norm());
                    if residual <= bound {
                        z
                    } else {
                        return Err(Error::NumericalFailure {
                            message: format!(
                                "root iteration did not converge in {ITERATION_BUDGET} iterations"
                            ),
                            best_residual: residual,
                        });
                    }
                }
            }
        }
    };

    let scale = roots.iter().map(|r| r.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if n > 2 {
        polish(poly, &mut roots);
        merge_clusters(poly, &mut roots, scale);
    }
    enforce_conjugacy(&mut roots, scale);
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_polynomial() {
        let p = characteristic_polynomial(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(p.coefficients(), &[1.0, -2.0, 1.0]);
    }

    #[test]
    fn rejects_large_and_nonsquare() {
        assert!(matches!(
            characteristic_polynomial(&DMatrix::identity(5, 5)),
            Err(Error::UnsupportedDimension(5))
        ));
        assert!(characteristic_polynomial(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn companion_matrix_round_trip() {
        // companion of x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            10.0, -35.0, 50.0, -24.0,
            1.0,  0.0,   0.0,  0.0,
            0.0,  1.0,   0.0,  0.0,
            0.0,  0.0,   1.0,  0.0,
        ]);
        let p = characteristic_polynomial(&m).unwrap();
        for (a, b) in p.coefficients().iter().zip([1.0, -10.0, 35.0, -50.0, 24.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let roots = polynomial_roots(&p).unwrap();
        for (r, expected) in roots.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((r - c(expected, 0.0)).norm() < 1e-10, "{r}");
        }
    }

    #[test]
    fn closed_form_quadratics() {
        let r = polynomial_roots(&CharPoly::new(vec![1.0, 0.0, -1.0]).unwrap()).unwrap();
        assert_eq!(r, vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        let r = polynomial_roots(&CharPoly::new(vec![1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r, vec![c(0.0, -1.0), c(0.0, 1.0)]);
        let r = polynomial_roots(&CharPoly::new(vec![2.0, 4.0]).unwrap()).unwrap();
        assert_eq!(r, vec![c(-2.0, 0.0)]);
    }

    #[test]
    fn constant_polynomial_has_no_roots() {
        assert!(polynomial_roots(&CharPoly::new(vec![3.0]).unwrap()).is_err());
        assert!(CharPoly::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn complex_pairs_are_conjugate() {
        // (x^2 + 2x + 5)(x^2 - x + 3)
        let p = CharPoly::new(vec![1.0, 1.0, 6.0, 1.0, 15.0]).unwrap();
        let roots = polynomial_roots(&p).unwrap();
        let mut conj: Vec<_> = roots.iter().map(|r| r.conj()).collect();
        conj.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        assert_eq!(roots, conj);
        for r in &roots {
            assert!(p.eval(*r).norm() <= 1e-9 * (1.0 + p.coefficient_norm()));
        }
    }

    #[test]
    fn double_root_is_recovered_accurately() {
        // (x + 0.005)^2 (x + 0.1)(x - 0.02)
        let mu = 0.005;
        let base = CharPoly::new(vec![1.0, 2.0 * mu, mu * mu]).unwrap();
        let mut coeffs = vec![0.0; 5];
        let other = [1.0, 0.1 - 0.02, -0.002];
        for (i, a) in base.coefficients().iter().enumerate() {
            for (j, b) in other.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        let roots = polynomial_roots(&CharPoly::new(coeffs).unwrap()).unwrap();
        let near = roots.iter().filter(|r| (**r - c(-mu, 0.0)).norm() <= 1e-9).count();
        assert_eq!(near, 2, "{roots:?}");
    }

    fn expand(roots: &[f64]) -> Vec<f64> {
        roots.iter().fold(vec![1.0], |acc, r| {
            let mut next = acc.clone();
            next.push(0.0);
            for (k, a) in acc.iter().enumerate() {
                next[k + 1] -= a * r;
            }
            next
        })
    }

    #[test]
    fn double_root_beside_a_close_simple_root() {
        // a third root 3e-4 (relative) away must not be pulled into the double root
        let mu = 0.062_852_930_305_410_27;
        let near = -mu - 2.0e-5;
        let p = CharPoly::new(expand(&[-mu, -mu, near, -1.0474])).unwrap();
        let roots = polynomial_roots(&p).unwrap();
        let at_mu = roots.iter().filter(|r| (**r - c(-mu, 0.0)).norm() <= 1e-9).count();
        assert_eq!(at_mu, 2, "{roots:?}");
        assert!(roots.iter().any(|r| (*r - c(near, 0.0)).norm() <= 1e-7), "{roots:?}");
    }

    #[test]
    fn triple_root_is_kept_together() {
        let p = CharPoly::new(expand(&[-0.5, -0.5, -0.5, 2.0])).unwrap();
        let roots = polynomial_roots(&p).unwrap();
        let close = roots.iter().filter(|r| (**r - c(-0.5, 0.0)).norm() <= 1e-6).count();
        assert_eq!(close, 3, "{roots:?}");
    }

    #[test]
    fn deflation() {
        let p = CharPoly::new(vec![1.0, -6.0, 11.0, -6.0]).unwrap();
        let (q, rem) = p.deflate(1.0);
        assert_eq!(q.coefficients(), &[1.0, -5.0, 6.0]);
        assert_eq!(rem, 0.0);
    }

    #[test]
    fn double_root_at_zero() {
        let p = CharPoly::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let roots = polynomial_roots(&p).unwrap();
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!(roots[1..].iter().all(|r| r.norm() < 1e-7), "{roots:?}");
    }

    #[test]
    fn loose_bound_does_not_pair_real_roots() {
        // from an ill-conditioned similarity of diag(0, -1.13, -2.58, -0.28)
        let p = CharPoly {
            coefficients: vec![
                1.0,
                3.9900362353870307,
                3.957256814466973,
                0.819262677282874,
                -3.3719516068231314e-10,
            ],
            uncertainty: vec![0.0, 8.5e-13, 3.9e-10, 1.7e-7, 7.6e-5],
        };
        let roots = polynomial_roots(&p).unwrap();
        let planted = [-2.578591273435418, -1.1303718275152628, -0.2810731344361583, 0.0];
        for (r, z) in roots.iter().zip(planted) {
            assert_eq!(r.im, 0.0);
            assert!((r.re - z).abs() < 1e-8, "{roots:?}");
        }
    }
}
