//! Standard normal distribution function and its inverse.

use crate::error::{domain, Result};

/// `Φ(x)`, computed as `½ erfc(−x/√2)` so both tails keep relative accuracy.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 − Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(q)` by bisection on [`normal_cdf`].
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    // Φ(±39) is 0 or 1 to double precision, which brackets every representable q.
    let (mut lo, mut hi) = (-39.0f64, 39.0f64);
    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        // compare in whichever tail is better conditioned
        let below = if q < 0.5 { normal_cdf(mid) < q } else { normal_sf(mid) > 1.0 - q };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
