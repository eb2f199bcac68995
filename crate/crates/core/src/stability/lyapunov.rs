use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::{DynamicalSystem, ModifiedSeirParams};

pub const DEFAULT_LYAPUNOV_SEED: u64 = 20_240_601;

/// Bound on `dV/dt` and on the identity residual `|dV/dt + mu (x + y + z + w)|`.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-10;

/// The modified SEIR system in coordinates centred on the disease-free state:
/// `x = S - tau/mu`, `y = E`, `z = I`, `w = R`.
///
/// ```text
/// x' = -mu x - beta x z - (beta tau / mu) z
/// y' =  beta x z + (beta tau / mu) z - (mu + eps) y
/// z' =  eps y - (mu + gamma) z
/// w' =  gamma z - mu w
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedSeir {
    pub params: ModifiedSeirParams,
}

impl DynamicalSystem for ShiftedSeir {
    fn dimension(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, s: &[f64], d: &mut [f64]) {
        let p = &self.params;
        let (x, y, z, w) = (s[0], s[1], s[2], s[3]);
        let infection = p.beta() * x * z + p.beta() * p.dfe_susceptible() * z;
        d[0] = -p.mu() * x - infection;
        d[1] = infection - (p.mu() + p.epsilon()) * y;
        d[2] = p.epsilon() * y - (p.mu() + p.gamma()) * z;
        d[3] = p.gamma() * z - p.mu() * w;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub seed: u64,
    pub sample_count: usize,
    pub region_radius: f64,
    /// Largest `-V` over samples away from the origin; negative means `V > 0` everywhere sampled.
    pub max_v_violation: f64,
    pub max_dvdt: f64,
    pub identity_residual: f64,
    pub origin_v: f64,
    pub origin_dvdt: f64,
    pub verdict: bool,
}

struct Sample {
    v: f64,
    dvdt: f64,
    residual: f64,
}

fn evaluate(system: &ShiftedSeir, point: &[f64]) -> Sample {
    let mut d = [0.0; 4];
    system.rhs(0.0, point, &mut d);
    let v: f64 = point.iter().sum();
    // grad V = (1, 1, 1, 1)
    let dvdt: f64 = d.iter().sum();
    Sample { v, dvdt, residual: (dvdt + system.params.mu() * v).abs() }
}

/// Uniform point in the part of the radius-`r` ball where every shifted coordinate is nonnegative.
fn sample_orthant_ball(rng: &mut ChaCha8Rng, r: f64) -> [f64; 4] {
    loop {
        let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..=r));
        if p.iter().map(|v| v * v).sum::<f64>() <= r * r {
            return p;
        }
    }
}

pub fn lyapunov_dfe_certificate(
    params: &ModifiedSeirParams,
    samples: usize,
    region_radius: f64,
) -> Result<LyapunovCertificate> {
    lyapunov_dfe_certificate_seeded(params, samples, region_radius, DEFAULT_LYAPUNOV_SEED)
}

/// Checks `V = x + y + z + w` against the shifted system on random samples.
pub fn lyapunov_dfe_certificate_seeded(
    params: &ModifiedSeirParams,
    samples: usize,
    region_radius: f64,
    seed: u64,
) -> Result<LyapunovCertificate> {
    if samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    if !(region_radius > 0.0 && region_radius.is_finite()) {
        return Err(invalid(format!("region radius must be positive, got {region_radius}")));
    }
    let system = ShiftedSeir { params: *params };
    let origin = evaluate(&system, &[0.0; 4]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_v_violation = f64::NEG_INFINITY;
    let mut max_dvdt = f64::NEG_INFINITY;
    let mut identity_residual = 0.0_f64;
    for _ in 0..samples {
        let point = sample_orthant_ball(&mut rng, region_radius);
        let s = evaluate(&system, &point);
        if point.iter().any(|v| *v != 0.0) {
            max_v_violation = max_v_violation.max(-s.v);
        }
        max_dvdt = max_dvdt.max(s.dvdt);
        identity_residual = identity_residual.max(s.residual);
    }

    let verdict = max_v_violation < 0.0
        && max_dvdt <= LYAPUNOV_TOLERANCE
        && identity_residual <= LYAPUNOV_TOLERANCE;
    Ok(LyapunovCertificate {
        seed,
        sample_count: samples,
        region_radius,
        max_v_violation,
        max_dvdt,
        identity_residual,
        origin_v: origin.v,
        origin_dvdt: origin.dvdt,
        verdict,
    })
}
