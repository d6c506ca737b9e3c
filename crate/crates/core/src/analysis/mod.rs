//! Closed-form bounds and numerical oracles used by the acceptance checks:
//! the nearest-neighbor-in-cone law, the Campbell integral of the path loss,
//! the conditional Laplace lower bound and the geometric tail constant `J`,
//! and the large-deviation rate for hop-progress sums.

pub mod estimators;

use std::f64::consts::PI;

use crate::channel::path_loss;
use crate::engine::SimParams;
use crate::error::{Result, SimError};
use crate::spatial::{Point, PointSet};

/// Dimensionless combinations entering the delay bounds.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    /// `c = M / (1 - eps)`, the received-signal constant under power control.
    pub c: f64,
    /// `c1 = beta * gamma * (1 - eps)`; the bounds need `c1 < 1`.
    pub c1: f64,
    /// `a = mu * beta * gamma / c`, the Laplace argument of the interference.
    pub a: f64,
}

impl BoundInputs {
    pub fn from_params(params: &SimParams) -> Self {
        let c = params.avg_power / (1.0 - params.epsilon);
        Self {
            c,
            c1: params.beta * params.gamma * (1.0 - params.epsilon),
            a: params.mu * params.beta * params.gamma / c,
        }
    }
}

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// Density of the nearest-neighbor distance in one of `m` equal cones:
/// `f(r) = (2 lambda pi r / m) exp(-lambda pi r^2 / m)`.
pub fn nn_cone_pdf(r: f64, lambda: f64, m: usize) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    let rate = lambda * PI / m as f64;
    2.0 * rate * r * (-rate * r * r).exp()
}

/// Companion CDF `F(r) = 1 - exp(-lambda pi r^2 / m)`.
pub fn nn_cone_cdf(r: f64, lambda: f64, m: usize) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let rate = lambda * PI / m as f64;
    1.0 - (-rate * r * r).exp()
}

/// Median of the cone nearest-neighbor distance, `sqrt(m ln 2 / (lambda pi))`.
pub fn nn_cone_median(lambda: f64, m: usize) -> f64 {
    (m as f64 * std::f64::consts::LN_2 / (lambda * PI)).sqrt()
}

/// Radius beyond which the cone nearest-neighbor density is negligible.
fn nn_cone_rmax(lambda: f64, m: usize) -> f64 {
    (200.0 * m as f64 / (lambda * PI)).sqrt()
}

/// Integral of the path loss over the plane, `pi + 2 pi / (alpha - 2)`:
/// the unit disk contributes `pi`, the power-law tail the rest. Finite only
/// for `alpha > 2`.
pub fn campbell_l_integral(alpha: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(SimError::Condition(format!(
            "path-loss integral diverges for alpha = {alpha} <= 2"
        )));
    }
    Ok(PI + 2.0 * PI / (alpha - 2.0))
}

/// Expected interference neglected by restricting the window to guard radius
/// `guard`: the Campbell tail `lambda * (M / mu) * 2 pi * G^(2 - alpha) / (alpha - 2)`.
pub fn truncation_error(lambda: f64, avg_power: f64, mu: f64, alpha: f64, guard: f64) -> f64 {
    lambda * (avg_power / mu) * 2.0 * PI * guard.powf(2.0 - alpha) / (alpha - 2.0)
}

/// Conditional Laplace lower bound: the product of `1 - c1 * l(|z - receiver|)`
/// over all points other than the receiver and the tagged source. Requires
/// `c1 < 1` so every factor stays positive.
pub fn laplace_lower_bound(ps: &PointSet, receiver: Point, c1: f64, alpha: f64) -> Result<f64> {
    if !(c1 < 1.0) {
        return Err(SimError::Condition(format!(
            "laplace bound needs c1 < 1, got {c1} (is beta * gamma < 1?)"
        )));
    }
    if !(c1 > 0.0) {
        return Err(SimError::Parameter(format!("c1 must be positive, got {c1}")));
    }
    let mut product = 1.0;
    for (i, &p) in ps.points.iter().enumerate() {
        if Some(i) == ps.tagged_index || p == receiver {
            continue;
        }
        let r = p.distance(receiver);
        product *= 1.0 - c1 * path_loss(r, alpha)?;
    }
    Ok(product)
}

/// The geometric-tail constant: `P[T > k | Phi] <= (1 - J)^k` with
/// `J = p_o * eps * exp(-mu beta N / c) * E[exp(-a I*) | Phi]`, where the
/// Laplace factor is replaced by its product lower bound (making `J` smaller
/// and the tail bound still valid).
pub fn j_bound(ps: &PointSet, receiver: Point, params: &SimParams) -> Result<f64> {
    let tagged = ps
        .tagged()
        .ok_or_else(|| SimError::Parameter("j_bound needs a tagged point".into()))?;
    let inputs = BoundInputs::from_params(params);
    let d = tagged.distance(receiver);
    let p_o = (1.0 - params.epsilon) * path_loss(d, params.alpha)?;
    let noise_factor = (-params.mu * params.beta * params.noise / inputs.c).exp();
    let laplace = laplace_lower_bound(ps, receiver, inputs.c1, params.alpha)?;
    Ok(p_o * params.epsilon * noise_factor * laplace)
}

/// Reference upper bound on the mean exit delay assembled from the
/// Cauchy-Schwarz split: `exp(mu beta N / c) / eps` times the square root of
/// the interference moment bound `exp(2 lambda c1 / (1 - c1)^2 * L)` and the
/// transmit-probability moment `(c / M)^2 * E[max(d^(2 alpha), 1)]`. Loose by
/// construction; reported for orientation, not asserted by acceptance.
pub fn mean_delay_upper_bound(params: &SimParams) -> Result<f64> {
    let inputs = BoundInputs::from_params(params);
    if !(inputs.c1 < 1.0) {
        return Err(SimError::Condition(format!(
            "mean delay bound needs c1 < 1, got {}",
            inputs.c1
        )));
    }
    let l_int = campbell_l_integral(params.alpha)?;
    let interference_moment =
        (2.0 * params.intensity * inputs.c1 / ((1.0 - inputs.c1) * (1.0 - inputs.c1)) * l_int).exp();
    let rmax = nn_cone_rmax(params.intensity, params.cones);
    let dist_moment = nn_cone_cdf(1.0, params.intensity, params.cones)
        + adaptive_simpson(
            &|r: f64| r.powf(2.0 * params.alpha) * nn_cone_pdf(r, params.intensity, params.cones),
            1.0,
            rmax.max(1.0),
            1e-10,
        );
    let prob_moment = (inputs.c / params.avg_power).powi(2) * dist_moment;
    let prefactor = (params.mu * params.beta * params.noise / inputs.c).exp() / params.epsilon;
    Ok(prefactor * (interference_moment * prob_moment).sqrt())
}

/// Mean per-hop progress toward the destination, `xi = E[R cos(theta)]`,
/// evaluated by quadrature over the cone nearest-neighbor density and the
/// uniform angle on `(-phi, phi)`.
pub fn expected_hop_progress(lambda: f64, m: usize) -> f64 {
    let phi = PI / m as f64;
    let radial = adaptive_simpson(
        &|r: f64| r * nn_cone_pdf(r, lambda, m),
        0.0,
        nn_cone_rmax(lambda, m),
        1e-10,
    );
    let angular = adaptive_simpson(&|t: f64| t.cos(), -phi, phi, 1e-12) / (2.0 * phi);
    radial * angular
}

/// Moment generating function `chi(nu) = E[exp(nu R cos(theta))]` of the hop
/// progress, by nested quadrature. Finite for every `nu` because the radial
/// density has a Gaussian tail.
pub fn chernoff_chi(nu: f64, lambda: f64, m: usize) -> f64 {
    let phi = PI / m as f64;
    let rate = lambda * PI / m as f64;
    let rmax = if nu <= 0.0 {
        nn_cone_rmax(lambda, m)
    } else {
        // solve rate * r^2 - nu * r = 200 for the envelope cutoff
        (nu + (nu * nu + 4.0 * rate * 200.0).sqrt()) / (2.0 * rate)
    };
    adaptive_simpson(
        &|r: f64| {
            let angular =
                adaptive_simpson(&|t: f64| (nu * r * t.cos()).exp(), -phi, phi, 1e-11) / (2.0 * phi);
            nn_cone_pdf(r, lambda, m) * angular
        },
        0.0,
        rmax,
        1e-9,
    )
}

/// Large-deviation rate of the lower tail of hop-progress sums:
/// `zeta(delta) = sup_{nu > 0} (-nu delta - log chi(-nu))`, so that
/// `P[S_n < n delta] <= exp(-zeta(delta) n)` for `0 < delta < xi`.
pub fn chernoff_zeta(delta: f64, lambda: f64, m: usize) -> Result<f64> {
    let xi = expected_hop_progress(lambda, m);
    if !(delta > 0.0 && delta < xi) {
        return Err(SimError::Parameter(format!(
            "delta must lie in (0, xi = {xi}), got {delta}: the rate degenerates to 0"
        )));
    }
    let objective = |nu: f64| nu * delta + chernoff_chi(-nu, lambda, m).ln();
    // the objective is convex, 0 at nu = 0, decreasing there; expand until it
    // turns back up, then golden-section on the bracket
    let mut hi = 1.0;
    let mut f_hi = objective(hi);
    for _ in 0..60 {
        let f_next = objective(2.0 * hi);
        if f_next >= f_hi {
            break;
        }
        hi *= 2.0;
        f_hi = f_next;
    }
    let (mut a, mut b) = (0.0, 2.0 * hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while b - a > 1e-6 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    Ok((-f1.min(f2)).max(0.0))
}
