//! Samplers not covered by `rand_distr`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Multivariate t with identity scale: a standard normal vector divided by
/// one shared `sqrt(w / df)`, `w ~ χ²_df`.
pub fn student_t_vector_sample<R: Rng + ?Sized>(dim: usize, df: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(df >= 1.0) {
        return Err(Error::Domain(format!("t degrees of freedom must be >= 1, got {df}")));
    }
    let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let chi = ChiSquared::new(df).map_err(|e| Error::Domain(e.to_string()))?;
    let w: f64 = chi.sample(rng);
    let scale = (w / df).sqrt();
    Ok(g.into_iter().map(|v| v / scale).collect())
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Von Mises draws by the Best–Fisher wrapped-Cauchy rejection sampler.
pub fn von_mises_sample<R: Rng + ?Sized>(theta: f64, kappa: f64, size: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("von Mises concentration must be positive, got {kappa}")));
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let accept = c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0;
        if accept {
            let step = f.clamp(-1.0, 1.0).acos();
            let angle = if u3 > 0.5 { theta + step } else { theta - step };
            out.push(wrap_angle(angle));
        }
    }
    Ok(out)
}
