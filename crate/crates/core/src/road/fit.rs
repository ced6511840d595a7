use serde::Serialize;

use super::{RoadModel, RoadObservations};
use crate::error::{Error, Result};

/// Closed-form line fit at a fixed roll angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub model: RoadModel,
    /// Residual energy `||d - T(phi) a||^2` at the optimal `a`.
    pub e0min: f64,
}

/// Least-squares `(a0, a1)` for the given roll, plus the residual energy.
///
/// Solves the 2x2 normal equations in centered form, which is algebraically
/// identical to `(T^T T)^-1 T^T d` with `T = [1, v cos(phi) - u sin(phi)]`.
/// Fails when every observation lies on one rotated row, which makes
/// `T^T T` singular.
pub fn fit_line(obs: &RoadObservations, phi: f64) -> Result<LineFit> {
    let k = obs.len();
    if k < 3 {
        return Err(Error::TooFewValid {
            found: k,
            needed: 3,
        });
    }
    let (s, c) = phi.sin_cos();
    let rotated = |i: usize| obs.v[i] * c - obs.u[i] * s;

    let kf = k as f64;
    let (mut sum_w, mut sum_d, mut sum_ww) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let w = rotated(i);
        sum_w += w;
        sum_d += obs.d[i];
        sum_ww += w * w;
    }
    let (mean_w, mean_d) = (sum_w / kf, sum_d / kf);

    let (mut sww, mut swd) = (0.0, 0.0);
    for i in 0..k {
        let dw = rotated(i) - mean_w;
        sww += dw * dw;
        swd += dw * (obs.d[i] - mean_d);
    }
    if !(sww > 1e-12 * sum_ww) || sww == 0.0 {
        return Err(Error::DegenerateFit(format!(
            "normal matrix is singular at phi = {phi}: observations share one rotated row"
        )));
    }
    let a1 = swd / sww;
    let a0 = mean_d - a1 * mean_w;
    let model = RoadModel::new(a0, a1, phi);
    Ok(LineFit {
        model,
        e0min: residual_energy(obs, &model),
    })
}

/// `sum_i (d_i - f(a, p_i, phi))^2`, evaluated directly.
pub fn residual_energy(obs: &RoadObservations, model: &RoadModel) -> f64 {
    let (s, c) = model.phi.sin_cos();
    obs.d
        .iter()
        .zip(&obs.u)
        .zip(&obs.v)
        .map(|((&d, &u), &v)| {
            let r = d - (model.a0 + model.a1 * (v * c - u * s));
            r * r
        })
        .sum()
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `tol`. Returns the best probed point.
pub fn golden_section_minimize(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        // Ties move toward `a`, so a flat plateau converges on its low end.
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes the line-fit residual energy over the roll angle with a
/// golden-section search on `bracket` (radians) to within `tol`.
pub fn estimate_roll(obs: &RoadObservations, bracket: (f64, f64), tol: f64) -> Result<LineFit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "roll tolerance {tol} must be > 0"
        )));
    }
    let mut any_ok = false;
    let energy = |phi: f64| match fit_line(obs, phi) {
        Ok(fit) => {
            any_ok = true;
            fit.e0min
        }
        Err(_) => f64::INFINITY,
    };
    let (phi, _) = golden_section_minimize(energy, bracket.0, bracket.1, tol);
    if !any_ok {
        return Err(Error::DegenerateFit(
            "line fit is singular at every probed roll angle".into(),
        ));
    }
    fit_line(obs, phi)
}

/// Outcome of the robust road fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoadFit {
    pub model: RoadModel,
    pub e0min: f64,
    /// Observations used by the final fit.
    pub inliers: usize,
    pub trimmed: usize,
}

/// Roll search followed by one trimming pass: observations whose residual
/// exceeds `trim_factor` times the residual RMS are dropped and the roll is
/// re-estimated on the rest. `trim_factor = 0` skips the trimming.
pub fn fit_road_model(
    obs: &RoadObservations,
    bracket: (f64, f64),
    tol: f64,
    trim_factor: f64,
) -> Result<RoadFit> {
    let first = estimate_roll(obs, bracket, tol)?;
    if trim_factor <= 0.0 {
        return Ok(RoadFit {
            model: first.model,
            e0min: first.e0min,
            inliers: obs.len(),
            trimmed: 0,
        });
    }
    let rms = (first.e0min / obs.len() as f64).sqrt();
    let limit = trim_factor * rms;
    let mut kept = RoadObservations::default();
    for i in 0..obs.len() {
        let r = obs.d[i] - first.model.disparity_at(obs.u[i], obs.v[i]);
        if r.abs() <= limit {
            kept.push(obs.u[i], obs.v[i], obs.d[i]);
        }
    }
    let trimmed = obs.len() - kept.len();
    if trimmed == 0 || kept.len() < 3 {
        return Ok(RoadFit {
            model: first.model,
            e0min: first.e0min,
            inliers: obs.len(),
            trimmed: 0,
        });
    }
    let second = estimate_roll(&kept, bracket, tol)?;
    Ok(RoadFit {
        model: second.model,
        e0min: second.e0min,
        inliers: kept.len(),
        trimmed,
    })
}
