#![allow(dead_code)]

use proptest::prelude::*;
use seirkit::equilibria::r0;
use seirkit::{ModifiedParam, ModifiedSeirParams};

pub fn table3() -> ModifiedSeirParams {
    ModifiedSeirParams::new(0.005, 0.005, 0.25, 0.06, 0.07).unwrap()
}

/// Rates drawn log-uniformly from `[0.01, 1]`.
pub fn rate() -> impl Strategy<Value = f64> {
    (-2.0f64..=0.0).prop_map(|e| 10f64.powf(e))
}

pub fn params() -> impl Strategy<Value = ModifiedSeirParams> {
    (rate(), rate(), rate(), rate(), rate())
        .prop_map(|(t, m, b, e, g)| ModifiedSeirParams::new(t, m, b, e, g).unwrap())
}

/// Same rates as `p` with `beta` chosen so that `R0 = target`.
pub fn with_r0(p: &ModifiedSeirParams, target: f64) -> ModifiedSeirParams {
    p.with(ModifiedParam::Beta, p.beta() * target / r0(p)).unwrap()
}

/// `R0` drawn from `[0.2, 1 - 1e-6 * 1.5]` or `[1 + 1e-6 * 1.5, 5]`, log-spaced in the gap.
pub fn straddling_r0() -> impl Strategy<Value = f64> {
    (any::<bool>(), -5.8f64..=0.6).prop_map(|(above, e)| {
        let gap = 10f64.powf(e).min(0.8);
        if above {
            1.0 + gap * 5.0
        } else {
            1.0 - gap
        }
    })
}
