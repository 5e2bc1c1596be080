use std::sync::Arc;

use rayon::prelude::*;

use super::identities::default_ladder;
use super::{axpy, converges, diff, eval_section, setup, CheckConfig, CheckName};
use crate::error::Result;
use crate::geometry::model_geometry;
use crate::lattice::{DiscreteOperator, OpRef, C, ZERO};
use crate::report::{fitted_order, VerificationReport};
use crate::sections::{random_section, sample};

/// Sections per resolution: all requested on small grids, three on the
/// largest ones.
fn samples_at(cfg: &CheckConfig, npts: usize) -> usize {
    if npts <= 16usize.pow(4) {
        cfg.samples.max(1)
    } else {
        cfg.samples.clamp(1, 3)
    }
}

pub(super) fn factorization(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Factorization;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let ladder = cfg.ladder(model, &default_ladder(model))?;
    let coarse = model_geometry(model, &[ladder[0]])?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let scan: Vec<f64> = (0..=8).map(|k| k as f64 / 32.0).collect();
    let mut lattice_worst: f64 = 0.0;
    let mut lattice_series = Vec::new();
    let mut scan_curve = vec![0.0f64; scan.len()];
    let mut has_curvature = false;
    for (level, &n) in ladder.iter().enumerate() {
        let s = setup(model, n)?;
        has_curvature |= s.tensors.has_curvature();
        let rank = s.fact.total_rank;
        let gtg = s.conjugated_tensor_sum();
        let dm = s.dirac_total();
        let cw = s.curvature_term();
        let count = samples_at(cfg, s.geometry.grid.len());
        let mut rng = cfg.rng(10);
        let mut analytic: f64 = 0.0;
        let mut lattice: f64 = 0.0;
        for _ in 0..count {
            let sec = random_section(&coarse, rank, 4, &mut rng, None);
            let u = sample(&sec, &s.geometry.grid);
            let nu = s.total.norm(&u);
            let (value, grad) = eval_section(&sec, &s.geometry.grid);
            let a = gtg.apply(&u);
            let c = cw.apply(&u);
            let e_lat = diff(&a, &dm.apply(&u));
            let e_an = diff(&a, &dm.apply_smooth(&value, &grad));
            lattice = lattice.max(s.total.norm(&axpy(cfg.coefficient, &c, &e_lat)) / nu);
            analytic = analytic.max(s.total.norm(&axpy(cfg.coefficient, &c, &e_an)) / nu);
            if cfg.scan && level + 1 == ladder.len() {
                for (k, &t) in scan.iter().enumerate() {
                    scan_curve[k] = scan_curve[k].max(s.total.norm(&axpy(t, &c, &e_an)) / nu);
                }
            }
        }
        lattice_worst = lattice_worst.max(lattice);
        lattice_series.push(lattice);
        rep.resolutions.push(n);
        rep.residuals.push(analytic);
        rep.detail(&format!("samples.{n}"), count);
    }
    rep.order = fitted_order(&rep.resolutions, &rep.residuals);
    rep.detail("lattice_residuals", &lattice_series);
    rep.detail("has_curvature", has_curvature);
    rep.constant("coefficient", cfg.coefficient);
    rep.constant("lattice_residual", lattice_worst);
    rep.criterion("lattice_identity", lattice_worst <= tol);
    let ok = converges(&mut rep, tol, 2.0);
    rep.criterion("converges", ok);
    if cfg.scan {
        let best = scan_curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| scan[k])
            .unwrap_or(0.0);
        let at = |t: f64| scan_curve[scan.iter().position(|&x| (x - t).abs() < 1e-15).unwrap_or(0)];
        let contrast = at(0.0) / at(0.125).max(1e-300);
        rep.detail("scan.coefficients", &scan);
        rep.detail("scan.residuals", &scan_curve);
        rep.constant("scan_argmin", best);
        rep.constant("scan_contrast", contrast);
        if has_curvature {
            rep.criterion("scan_argmin", (best - 0.125).abs() <= 1.0 / 32.0 + 1e-12);
            rep.criterion("scan_contrast", contrast >= 10.0);
        }
    }
    Ok(rep)
}

/// Closed-form right-hand side of the commutator identity on a smooth section.
fn commutator_rhs(s: &crate::operators::Setup, value: &[C], grad: &[Vec<C>]) -> Vec<C> {
    let g = &s.geometry;
    let t = &s.tensors;
    let f = &s.fact;
    let r = f.total_rank;
    let (vi, nh) = (&g.vertical_indices, g.dim_base);
    let npts = g.grid.len();
    // e_j(k_α) by the lattice derivative of the sampled mean curvature
    let dk: Vec<Vec<Vec<f64>>> = vi
        .iter()
        .map(|&ej| {
            (0..nh)
                .map(|al| {
                    let k: Vec<f64> = (0..npts).map(|p| t.k(p, al)).collect();
                    g.frame_derivative(ej, &k)
                })
                .collect()
        })
        .collect();
    let mut out = vec![ZERO; value.len()];
    out.par_chunks_mut(r).enumerate().for_each(|(p, o)| {
        let v = &value[p * r..(p + 1) * r];
        let av = s.spin.vertical.at(p);
        let om = s.spin.vertical_curvature.at(p);
        let mut acc = vec![ZERO; r];
        for (kk, &ek) in vi.iter().enumerate() {
            // ∇_{e_k} η = e_k η + A^V_k η
            let mut nab = vec![ZERO; r];
            for (axis, coeff) in &g.frames[ek].components {
                let c = coeff.at(p);
                for i in 0..r {
                    nab[i] += grad[*axis][p * r + i] * c;
                }
            }
            for i in 0..r {
                for l in 0..r {
                    nab[i] += av[ek][(i, l)] * v[l];
                }
            }
            for j in 0..vi.len() {
                for al in 0..nh {
                    let sc = t.s(p, kk, j, al);
                    if sc == 0.0 {
                        continue;
                    }
                    let m = &f.vertical[j] * &f.base_lift[al];
                    for i in 0..r {
                        for l in 0..r {
                            acc[i] += m[(i, l)] * nab[l] * sc;
                        }
                    }
                }
            }
        }
        for j in 0..vi.len() {
            for al in 0..nh {
                let inner = &om[j * nh + al] + crate::clifford::identity(r) * C::new(0.5 * dk[j][al][p], 0.0);
                let m = &f.vertical[j] * &f.base_lift[al] * inner;
                for i in 0..r {
                    for l in 0..r {
                        acc[i] += m[(i, l)] * v[l];
                    }
                }
            }
        }
        o.copy_from_slice(&acc);
    });
    out
}

pub(super) fn commutator_check(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Commutator;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let ladder = cfg.ladder(model, &default_ladder(model))?;
    let coarse = model_geometry(model, &[ladder[0]])?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let mut relative_bound: f64 = 0.0;
    let mut lhs_size: f64 = 0.0;
    for &n in &ladder {
        let s = setup(model, n)?;
        let rank = s.fact.total_rank;
        let dv: OpRef = Arc::new(s.dirac_vertical());
        let lift: OpRef = Arc::new(s.horizontal_lift(true));
        let count = samples_at(cfg, s.geometry.grid.len()).min(5);
        let mut rng = cfg.rng(20);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let sec = random_section(&coarse, rank, 4, &mut rng, None);
            let u = sample(&sec, &s.geometry.grid);
            let nu = s.total.norm(&u);
            let (value, grad) = eval_section(&sec, &s.geometry.grid);
            let lu = lift.apply(&u);
            let du = dv.apply(&u);
            let (a, b) = (dv.apply(&lu), lift.apply(&du));
            let lhs = diff(&a, &b);
            let rhs = commutator_rhs(&s, &value, &grad);
            let scale = s.total.norm(&a) + s.total.norm(&b);
            worst = worst.max(s.total.norm(&diff(&lhs, &rhs)) / scale.max(1e-300));
            let nl = s.total.norm(&lhs);
            lhs_size = lhs_size.max(nl / nu);
            relative_bound = relative_bound.max(nl / (nu + s.total.norm(&du)));
        }
        rep.resolutions.push(n);
        rep.residuals.push(worst);
    }
    rep.order = fitted_order(&rep.resolutions, &rep.residuals);
    rep.constant("relative_bound", relative_bound);
    rep.constant("max_commutator_over_section", lhs_size);
    let ok = converges(&mut rep, tol, 2.0);
    rep.criterion("converges", ok);
    Ok(rep)
}


