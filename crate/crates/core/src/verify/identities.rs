use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{converges, diff, eval_section, max_of, random_vec, setup, CheckConfig, CheckName};
use crate::clifford::{
    build_clifford_module, factorize_spinors, grading_defect, identity, max_abs, relation_defect, Mat,
};
use crate::error::Result;
use crate::geometry::{model_geometry, ModelName};
use crate::lattice::{DiscreteOperator, OpRef, SectionLattice, C, ZERO};
use crate::operators::derivative_op;
use crate::report::{fitted_order, VerificationReport};
use crate::sections::{random_section, sample};

fn skew(gens: &[Mat]) -> f64 {
    gens.iter().map(|g| max_abs(&(g + g.adjoint()))).fold(0.0, f64::max)
}

pub(super) fn clifford(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Clifford;
    let tol = cfg.tolerance_for(check);
    let mut rep = VerificationReport::new(check.as_str(), "algebraic", cfg.seed, tol);
    let mut rng = cfg.rng(1);
    for n in [2, 4, 6, 8] {
        let m = build_clifford_module(n)?;
        // c(v)² = -|v|² on random real covectors
        let mut square: f64 = 0.0;
        for _ in 0..8 {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let cv = crate::clifford::clifford_action(&m, &v.iter().map(|x| C::new(*x, 0.0)).collect::<Vec<_>>())?;
            let len2: f64 = v.iter().map(|x| x * x).sum();
            square = square.max(max_abs(&(&cv * &cv + identity(m.rank) * C::new(len2, 0.0))) / len2.max(1.0));
        }
        let worst = m.relation_defect().max(m.skew_defect()).max(m.grading_defect()).max(square);
        rep.detail(&format!("module_{n}.rank"), m.rank);
        rep.resolutions.push(n);
        rep.residuals.push(worst);
    }
    let mut pair_worst: f64 = 0.0;
    for (v, h) in [(1, 1), (2, 2), (2, 4), (4, 2)] {
        let f = factorize_spinors(v, h)?;
        let n = f.total_rank;
        let d = relation_defect(&f.embedded())
            .max(relation_defect(&f.total_generators()))
            .max(skew(&f.embedded()))
            .max(skew(&f.total_generators()))
            .max(f.cross_defect())
            .max(grading_defect(&f.total_grading, &f.total_generators()))
            .max(grading_defect(&f.vertical_grading, &f.vertical))
            .max(max_abs(&(&f.big_gamma * &f.big_gamma - identity(n))))
            .max(max_abs(&(&f.big_gamma - f.big_gamma.adjoint())));
        // γ_X ⊗ 1 commutes with the base lift
        let lift = f
            .base_lift
            .iter()
            .map(|b| max_abs(&(&f.vertical_grading * b - b * &f.vertical_grading)))
            .fold(0.0, f64::max);
        let d = d.max(lift);
        rep.detail(&format!("pair_{v}_{h}.defect"), d);
        pair_worst = pair_worst.max(d);
    }
    rep.constant("pair_defect", pair_worst);
    let modules = max_of(&rep.residuals);
    rep.criterion("modules", modules <= tol);
    rep.criterion("factorized_pairs", pair_worst <= tol);
    rep.detail("resolutions_are", "module dimensions");
    Ok(rep)
}

pub(super) fn consistency(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Consistency;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let ladder = cfg.ladder(model, &default_ladder(model))?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let coarse = model_geometry(model, &[ladder[0]])?;
    let mut rng = cfg.rng(2);
    let sections: Vec<_> = (0..cfg.samples.clamp(1, 3)).map(|_| random_section(&coarse, 2, 4, &mut rng, None)).collect();
    let mut skew_worst: f64 = 0.0;
    let mut per_frame = Vec::new();
    for &n in &ladder {
        let lat = SectionLattice::new(Arc::new(model_geometry(model, &[n])?), 2);
        let d = lat.geometry.dim_total;
        let mut worst_n: f64 = 0.0;
        let mut frames = vec![0.0f64; d];
        for s in &sections {
            let u = sample(s, &lat.geometry.grid);
            let (value, grad) = eval_section(s, &lat.geometry.grid);
            let nu = lat.norm(&u);
            for (a, fr) in frames.iter_mut().enumerate() {
                let lu = lat.skew_derivative(a, &u);
                let exact = derivative_op(&lat, a)?.apply_smooth(&value, &grad);
                let r = lat.norm(&diff(&lu, &exact)) / nu;
                *fr = fr.max(r);
                worst_n = worst_n.max(r);
            }
        }
        let mut r2 = cfg.rng(3 + n as u64);
        let (x, y) = (random_vec(lat.len(), &mut r2), random_vec(lat.len(), &mut r2));
        for a in 0..d {
            let s = lat.inner(&lat.skew_derivative(a, &x), &y) + lat.inner(&x, &lat.skew_derivative(a, &y));
            let scale = lat.norm(&lat.skew_derivative(a, &x)) * lat.norm(&y) + 1e-300;
            skew_worst = skew_worst.max(s.norm() / scale);
        }
        per_frame.push(frames);
        rep.resolutions.push(n);
        rep.residuals.push(worst_n);
    }
    rep.order = fitted_order(&rep.resolutions, &rep.residuals);
    rep.detail("per_frame_residuals", &per_frame);
    rep.constant("skew_defect", skew_worst);
    let ok = converges(&mut rep, tol, 3.5);
    rep.criterion("converges", ok);
    rep.criterion("skew", skew_worst <= tol);
    Ok(rep)
}

pub(super) fn default_ladder(model: ModelName) -> Vec<usize> {
    match model {
        ModelName::PuncturedSphere => vec![64, 128, 256],
        _ => vec![8, 16, 32],
    }
}

pub(super) fn default_single(model: ModelName) -> usize {
    match model {
        ModelName::PuncturedSphere => 64,
        _ => 8,
    }
}

/// `|⟨Au, v⟩ - ⟨u, Av⟩| / (‖u‖‖v‖)` on seeded random vectors.
pub(crate) fn symmetry_defect(op: &dyn DiscreteOperator, rng: &mut impl Rng) -> f64 {
    let lat = op.domain();
    let (u, v) = (random_vec(lat.len(), rng), random_vec(lat.len(), rng));
    let (au, av) = (op.apply(&u), op.apply(&v));
    let lhs = lat.inner(&au, &v);
    let rhs = lat.inner(&u, &av);
    (lhs - rhs).norm() / (lat.norm(&u) * lat.norm(&v))
}

pub(super) fn symmetry(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Symmetry;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let n = cfg.single(default_single(model));
    let s = setup(model, n)?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let ops: Vec<(&str, OpRef)> = vec![
        ("total", Arc::new(s.dirac_total())),
        ("vertical", Arc::new(s.dirac_vertical())),
        ("vertical_fiber", Arc::new(s.dirac_vertical_fiber())),
        ("horizontal_lift", Arc::new(s.horizontal_lift(true))),
        ("tensor_sum", Arc::new(s.tensor_sum())),
        ("conjugated_tensor_sum", s.conjugated_tensor_sum()),
        ("curvature_term", s.curvature_term()),
        ("base", Arc::new(s.dirac_base())),
        ("localized_fiber", Arc::new(s.localize_fiber(s.geometry.base_len() / 3)?)),
    ];
    let mut rng = cfg.rng(4);
    let mut worst: f64 = 0.0;
    for (name, op) in &ops {
        let d = (0..3).map(|_| symmetry_defect(op.as_ref(), &mut rng)).fold(0.0, f64::max);
        rep.detail(&format!("defect.{name}"), d);
        worst = worst.max(d);
    }
    rep.resolutions.push(n);
    rep.residuals.push(worst);
    rep.criterion("symmetric", worst <= tol);
    Ok(rep)
}

pub(super) fn half_k_control(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::HalfKControl;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let n = cfg.single(default_single(model));
    let s = setup(model, n)?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let kmax = (0..s.geometry.grid.len())
        .flat_map(|p| s.tensors.points.at(p).k.clone())
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let mut rng = cfg.rng(5);
    let with = symmetry_defect(&s.horizontal_lift(true), &mut rng);
    let without = symmetry_defect(&s.horizontal_lift(false), &mut rng);
    rep.resolutions.push(n);
    rep.residuals.push(with);
    rep.constant("max_abs_k", kmax);
    rep.constant("defect_with_half_k", with);
    rep.constant("defect_without_half_k", without);
    rep.criterion("mean_curvature_nonzero", kmax > 1e-8);
    rep.criterion("with_half_k_symmetric", with <= tol);
    rep.criterion("without_half_k_detected", without >= 1e-3);
    Ok(rep)
}

pub(super) fn ellipticity(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Ellipticity;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let g = model_geometry(model, &[4])?;
    let f = factorize_spinors(g.dim_fiber, g.dim_base)?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let mut rng = cfg.rng(6);
    let mut worst: f64 = 0.0;
    let mut min_sv = f64::INFINITY;
    for t in [1.0, 3.0] {
        for _ in 0..50 {
            let v: Vec<f64> = (0..g.dim_fiber).map(|_| rng.sample(StandardNormal)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut sym = Mat::zeros(f.total_rank, f.total_rank);
            for (j, c) in f.vertical.iter().enumerate() {
                sym += c * C::new(t * v[j] / len, 0.0);
            }
            let sv = sym.singular_values();
            let (lo, hi) = (sv.min(), sv.max());
            min_sv = min_sv.min(lo / t);
            worst = worst.max((lo - t).abs()).max((hi - t).abs());
        }
    }
    // the vertical operator has no horizontal symbol
    let s = setup(model, 4)?;
    let vertical_only = s.dirac_vertical().terms.iter().all(|(a, _)| s.geometry.is_vertical(*a));
    rep.resolutions.push(4);
    rep.residuals.push(worst);
    rep.constant("min_singular_value_unit", min_sv);
    rep.criterion("symbol_isometric", worst <= tol);
    rep.criterion("vertical_symbol_only", vertical_only);
    Ok(rep)
}

/// `∂_μ w` of the model volume densities, in closed form.
fn weight_gradient(model: Option<ModelName>, x: &[f64]) -> Vec<f64> {
    match model {
        Some(ModelName::PuncturedSphere) => vec![x[0].cos(), 0.0],
        _ => vec![0.0; x.len()],
    }
}

pub(super) fn metric_connection(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::MetricConnection;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let n = cfg.single(default_single(model));
    let s = setup(model, n)?;
    let g = &s.geometry;
    let grid = &g.grid;
    let rf = s.fact.fiber_rank;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let mut rng = cfg.rng(7);
    let xi = random_section(g, rf, 4, &mut rng, None);
    let eta = random_section(g, rf, 4, &mut rng, None);
    let (xv, xg) = eval_section(&xi, grid);
    let (ev, eg) = eval_section(&eta, grid);
    let base = g.base_geometry.as_ref().expect("models have a base");
    let nf = g.fiber_len();
    let hf = g.fiber_cell();
    let inner = |a: &[C], b: &[C], p: usize| -> C { (0..rf).map(|c| a[p * rf + c].conj() * b[p * rf + c]).sum() };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (al, conn) in s.metric_connection().iter().enumerate() {
        let nx = conn.apply_smooth(&xv, &xg);
        let ne = conn.apply_smooth(&ev, &eg);
        for b in 0..g.base_len() {
            let (mut lhs, mut rhs) = (ZERO, ZERO);
            for f in 0..nf {
                let p = b * nf + f;
                let w = g.weight.at(p);
                lhs += (inner(&nx, &ev, p) + inner(&xv, &ne, p)) * (w * hf);
                let dw = weight_gradient(g.model, &grid.coords(p));
                let fval = inner(&xv, &ev, p);
                for (bax, coeff) in &base.frames[al].components {
                    let mu = g.base_axes[*bax];
                    let df = inner(&xg[mu], &ev, p) + inner(&xv, &eg[mu], p);
                    rhs += (fval * dw[mu] + df * w) * (coeff.at(b) * hf);
                }
            }
            worst = worst.max((lhs - rhs).norm());
            scale = scale.max(lhs.norm());
        }
    }
    let rel = worst / scale.max(1e-300);
    rep.resolutions.push(n);
    rep.residuals.push(rel);
    rep.constant("max_fiber_integral", scale);
    rep.criterion("product_rule", rel <= tol);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_identity_checks_pass() {
        let cfg = CheckConfig::default();
        for r in [clifford(&cfg).unwrap(), ellipticity(&cfg).unwrap()] {
            assert!(r.finish().verdict.passed());
        }
        let cfg = CheckConfig {
            resolutions: vec![6],
            ..CheckConfig::default()
        };
        assert!(symmetry(&cfg).unwrap().finish().verdict.passed());
    }
}
