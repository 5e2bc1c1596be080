use std::f64::consts::PI;

use super::{setup, CheckConfig, CheckName};
use crate::error::{Error, Result};
use crate::geometry::ModelName;
use crate::lattice::{DiscreteOperator, C, ZERO};
use crate::report::{fitted_order, VerificationReport};
use crate::sections::{apply_smooth, sample, SmoothSection};

fn bump(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

fn bump_derivative(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        bump(u) / (u * u)
    }
}

/// Smooth monotone step, `0` for `t ≤ ½` and `1` for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    let (f, g) = (bump(t - 0.5), bump(1.0 - t));
    if f + g == 0.0 {
        return if t >= 1.0 { 1.0 } else { 0.0 };
    }
    f / (f + g)
}

pub fn smooth_step_derivative(t: f64) -> f64 {
    let (f, g) = (bump(t - 0.5), bump(1.0 - t));
    if f == 0.0 || g == 0.0 {
        return 0.0;
    }
    (bump_derivative(t - 0.5) * g + f * bump_derivative(1.0 - t)) / ((f + g) * (f + g))
}

/// `ψ_n(θ) = η(nθ) η(n(π − θ))`: vanishes within `1/(2n)` of both poles.
pub fn cutoff(n: f64, theta: f64) -> f64 {
    smooth_step(n * theta) * smooth_step(n * (PI - theta))
}

pub fn cutoff_derivative(n: f64, theta: f64) -> f64 {
    let (a, b) = (n * theta, n * (PI - theta));
    n * smooth_step_derivative(a) * smooth_step(b) - n * smooth_step(a) * smooth_step_derivative(b)
}

/// `ψ_n(θ) s(θ, φ) v` with `s = sin θ (1 + ½cos θ + 0.3 sin θ e^{iφ})`.
struct CutSection {
    n: Option<f64>,
    v: [C; 2],
}

impl SmoothSection for CutSection {
    fn rank(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], value: &mut [C], grad: &mut [C]) {
        let (t, p) = (x[0], x[1]);
        let e = C::from_polar(1.0, p);
        let inner = C::new(1.0 + 0.5 * t.cos(), 0.0) + e * (0.3 * t.sin());
        let s = inner * t.sin();
        let s_t = inner * t.cos() + (C::new(-0.5 * t.sin(), 0.0) + e * (0.3 * t.cos())) * t.sin();
        let s_p = C::new(0.0, 0.3) * e * t.sin() * t.sin();
        let (psi, dpsi) = match self.n {
            Some(n) => (cutoff(n, t), cutoff_derivative(n, t)),
            None => (1.0, 0.0),
        };
        for c in 0..2 {
            value[c] += s * psi * self.v[c];
            grad[c] += (s * dpsi + s_t * psi) * self.v[c];
            grad[2 + c] += s_p * psi * self.v[c];
        }
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature.
pub(crate) fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `‖dψ_n‖` on the round sphere: `(2π ∫ |ψ_n'|² sin θ dθ)^{1/2}`.
fn gradient_norm(n: f64) -> f64 {
    let f = |t: f64| cutoff_derivative(n, t).powi(2) * t.sin();
    let (a, b) = (0.5 / n, 1.0 / n);
    let v = integrate(&f, a, b, 1e-13) + integrate(&f, PI - b, PI - a, 1e-13);
    (2.0 * PI * v).sqrt()
}

/// Same for a cutoff around the equator, a codimension-one set.
fn equator_gradient_norm(n: f64) -> f64 {
    let f = |u: f64| (n * smooth_step_derivative(n * u)).powi(2) * (PI / 2.0 + u).sin();
    let g = |u: f64| (n * smooth_step_derivative(n * u)).powi(2) * (PI / 2.0 - u).sin();
    let (a, b) = (0.5 / n, 1.0 / n);
    (2.0 * PI * (integrate(&f, a, b, 1e-13) + integrate(&g, a, b, 1e-13))).sqrt()
}

pub(super) fn closure(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Closure;
    let model = cfg.geometry_for(check);
    if model != ModelName::PuncturedSphere {
        return Err(Error::Precondition(format!(
            "closure needs a codimension-two removed set; {model} has none"
        )));
    }
    let tol = cfg.tolerance_for(check);
    let n = cfg.single(128);
    let ns = [2usize, 4, 8];
    if n < 8 * ns[ns.len() - 1] {
        return Err(Error::InvalidResolution(format!("closure needs N ≥ {}, got {n}", 8 * ns[ns.len() - 1])));
    }
    let s = setup(model, n)?;
    let grid = &s.geometry.grid;
    let lat = &s.total;
    let dm = s.dirac_total();
    let v = [C::new(1.0, 0.0) / 2f64.sqrt(), C::new(0.0, 1.0) / 2f64.sqrt()];
    let full = CutSection { n: None, v };
    let sv = sample(&full, grid);
    let ds = lat.norm(&apply_smooth(&dm, &full));
    let sup = lat.pointwise_norm_sq(&sv).into_iter().fold(0.0f64, f64::max).sqrt();
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let (mut grads, mut grads_h, mut images, mut images_h, mut bound_ok) = (vec![], vec![], vec![], vec![], true);
    for &k in &ns {
        let cut = CutSection { n: Some(k as f64), v };
        let u = sample(&cut, grid);
        let dpsi: Vec<C> = (0..grid.len())
            .map(|p| C::new(cutoff_derivative(k as f64, grid.coords(p)[0]), 0.0))
            .collect();
        let dpsi_h = (0..grid.len()).map(|p| lat.measure(p) * dpsi[p].norm_sqr()).sum::<f64>().sqrt();
        let image = lat.norm(&apply_smooth(&dm, &cut));
        bound_ok &= image <= sup * dpsi_h + ds + 1e-12 * (1.0 + ds);
        let gap: Vec<C> = sv.iter().zip(&u).map(|(a, b)| a - b).collect();
        rep.resolutions.push(k);
        rep.residuals.push(lat.norm(&gap));
        grads.push(gradient_norm(k as f64));
        grads_h.push(dpsi_h);
        images.push(image);
        images_h.push(lat.norm(&dm.apply(&u)));
    }
    let ratio = |v: &[f64]| v[v.len() - 1] / v[0];
    rep.detail("cutoff_gradient_norms", &grads);
    rep.detail("cutoff_gradient_norms_lattice", &grads_h);
    rep.detail("image_norms", &images);
    rep.detail("image_norms_lattice", &images_h);
    rep.constant("sup_s", sup);
    rep.constant("norm_ds", ds);
    rep.constant("gradient_ratio", ratio(&grads));
    rep.constant("image_ratio", ratio(&images));
    rep.criterion("gradients_bounded", ratio(&grads) <= 1.2 && ratio(&grads) >= 1.0 / 1.2);
    rep.criterion("images_bounded", ratio(&images) <= 1.2);
    rep.criterion("leibniz_bound", bound_ok);
    rep.criterion("gap_decreasing", rep.residuals.windows(2).all(|w| w[1] < w[0]));

    // a codimension-one cut has ‖dψ_n‖ ~ n^{1/2}
    let ms = [2usize, 4, 8, 16, 32];
    let eq: Vec<f64> = ms.iter().map(|&m| equator_gradient_norm(m as f64)).collect();
    let exponent = -fitted_order(&ms, &eq).unwrap_or(0.0);
    rep.detail("equator_gradient_norms", &eq);
    rep.constant("codim1_exponent", exponent);
    rep.criterion("codim1_control", (0.4..=0.6).contains(&exponent));

    // s = 0 gives the zero sequence
    let zero = CutSection { n: Some(2.0), v: [ZERO, ZERO] };
    let z = lat.norm(&dm.apply(&sample(&zero, grid)));
    rep.criterion("zero_section", z == 0.0);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_derivative() {
        assert_eq!(smooth_step(0.3), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert!((smooth_step(0.75) - 0.5).abs() < 1e-15);
        for t in [0.55, 0.7, 0.9] {
            let h = 1e-6;
            let fd = (smooth_step(t + h) - smooth_step(t - h)) / (2.0 * h);
            assert!((fd - smooth_step_derivative(t)).abs() < 1e-6);
        }
        assert!((integrate(&|x| x.sin(), 0.0, PI, 1e-12) - 2.0).abs() < 1e-10);
    }
}
