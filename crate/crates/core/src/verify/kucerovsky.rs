use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use super::{setup, CheckConfig, CheckName};
use crate::clifford::{identity, Mat};
use crate::error::{Error, Result};
use crate::geometry::{model_geometry, ModelName, PointField};
use crate::grid::Gluing;
use crate::lattice::{
    anticommutator, compose, dense_export, fiber_lift, pointwise, DiscreteOperator, FiberMultiplier, OpRef, C,
    ZERO,
};
use crate::operators::{LocalizedFiber, Setup};
use crate::report::VerificationReport;
use crate::sections::{apply_smooth, band_limit, random_section, sample, Constant, SmoothSection};
use crate::spectral::{eigenvalues, generalized_eigenvalues, power_norm};

const POWER_ITERATIONS: usize = 200;
const POWER_TOL: f64 = 1e-6;

/// `(1 + γ_F) / 2` on vertical spinors.
fn even_projector(s: &Setup) -> Mat {
    let n = s.fact.fiber_rank;
    (identity(n) + s.fiber_grading()) * C::new(0.5, 0.0)
}

fn pointwise_mul(m: &Mat, u: &[C], r: usize) -> Vec<C> {
    let mut out = vec![ZERO; u.len()];
    out.par_chunks_mut(r).zip(u.par_chunks(r)).for_each(|(o, x)| {
        for i in 0..r {
            for (l, xl) in x.iter().enumerate() {
                o[i] += m[(i, l)] * xl;
            }
        }
    });
    out
}

struct ConnectionNorms {
    lattice: f64,
    analytic: f64,
    iterations: (usize, usize),
}

/// Norms of `r ↦ T(ξ⊗r) − ξ⊗D_B r` on the lattice and of its closed form
/// `(D_V ξ)⊗r + Σ_α γ_F ∇^X_α ξ ⊗ c_B(f_α) r`, on base inputs with modes up to `kmax`.
/// Orthogonal projector onto base inputs with at most `kmax` modes: Fourier
/// truncation on periodic bases, `sin(mθ)`, `m ≤ kmax`, on an open interval.
fn base_projector(s: &Setup, kmax: usize) -> Box<dyn Fn(&mut [C]) + Sync + '_> {
    let base = &s.base;
    let grid = &base.geometry.grid;
    let rb = base.rank;
    if grid.axes.iter().all(|a| a.gluing == Gluing::Periodic) {
        return Box::new(move |x: &mut [C]| band_limit(grid, x, rb, kmax));
    }
    assert_eq!(grid.ndim(), 1, "open bases are intervals");
    let len = grid.axes[0].length;
    let mut basis: Vec<Vec<C>> = Vec::new();
    for m in 1..=kmax {
        for c in 0..rb {
            let mut v = vec![ZERO; base.len()];
            for p in 0..grid.len() {
                v[p * rb + c] = C::new((PI * m as f64 * grid.coords(p)[0] / len).sin(), 0.0);
            }
            for q in &basis {
                let h = base.inner(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= b * h);
            }
            let n = base.norm(&v);
            v.iter_mut().for_each(|a| *a /= n);
            basis.push(v);
        }
    }
    Box::new(move |x: &mut [C]| {
        let coeffs: Vec<C> = basis.iter().map(|q| base.inner(q, x)).collect();
        x.iter_mut().for_each(|z| *z = ZERO);
        for (q, h) in basis.iter().zip(coeffs) {
            x.iter_mut().zip(q).for_each(|(a, b)| *a += b * h);
        }
    })
}

fn connection_norms(s: &Setup, xi: &dyn SmoothSection, scale: f64, kmax: usize, seed: u64) -> ConnectionNorms {
    let rf = s.fact.fiber_rank;
    let xv: Vec<C> = sample(xi, &s.geometry.grid).into_iter().map(|z| z * scale).collect();
    let t = s.tensor_sum();
    let db = s.dirac_base();
    let lift = fiber_lift(&s.base, &s.total, xv, rf);
    let rb = s.base.rank;
    let project = base_projector(s, kmax);
    let apply = |r: &[C]| -> Vec<C> {
        let a = t.apply(&lift.apply(r));
        let b = lift.apply(&db.apply(r));
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    };
    let adjoint = |v: &[C]| -> Vec<C> {
        let a = lift.adjoint(&t.adjoint(v));
        let b = db.adjoint(&lift.adjoint(v));
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    };
    let (lat, it1) = power_norm(&s.base, apply, adjoint, &project, seed, POWER_ITERATIONS, POWER_TOL);

    let scaled = |v: Vec<C>| -> Vec<C> { v.into_iter().map(|z| z * scale).collect() };
    let mut terms = vec![(scaled(apply_smooth(&s.dirac_vertical_fiber(), xi)), identity(rb))];
    let gamma = s.fiber_grading();
    let cb = s.fact.base_generators();
    for (al, conn) in s.metric_connection().iter().enumerate() {
        let nab = scaled(apply_smooth(conn, xi));
        terms.push((pointwise_mul(&gamma, &nab, rf), cb[al].clone()));
    }
    let m = FiberMultiplier {
        base: s.base.clone(),
        total: s.total.clone(),
        fiber_rank: rf,
        terms,
    };
    let (an, it2) = power_norm(&s.base, |r| m.apply(r), |v| m.adjoint(v), &project, seed, POWER_ITERATIONS, POWER_TOL);
    ConnectionNorms {
        lattice: lat,
        analytic: an,
        iterations: (it1, it2),
    }
}

pub(super) fn connection(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Connection;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let ladder = if cfg.resolutions.is_empty() {
        match model {
            ModelName::PuncturedSphere => vec![64, 128],
            _ => vec![8, 16],
        }
    } else {
        cfg.resolutions.clone()
    };
    cfg.ladder(model, &ladder)?;
    let coarse = setup(model, ladder[0])?;
    // inputs and ξ both carry modes up to N/8, so products stay below N/4
    let kmax = (ladder[0] / 8).max(1);
    let mut rng = cfg.rng(30);
    let band = model_geometry(model, &[(ladder[0] / 2).max(4)])?;
    let xi = random_section(&band, coarse.fact.fiber_rank, 4, &mut rng, Some(&even_projector(&coarse)));
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let mut norms = Vec::new();
    let mut analytic = Vec::new();
    for &n in &ladder {
        let s = if n == ladder[0] { None } else { Some(setup(model, n)?) };
        let s = s.as_ref().unwrap_or(&coarse);
        let r = connection_norms(s, &xi, 1.0, kmax, cfg.seed);
        rep.resolutions.push(n);
        rep.residuals.push((r.lattice - r.analytic).abs() / r.analytic.max(1e-300));
        rep.detail(&format!("power_iterations.{n}"), [r.iterations.0, r.iterations.1]);
        norms.push(r.lattice);
        analytic.push(r.analytic);
    }
    rep.detail("lattice_norms", &norms);
    rep.detail("analytic_norms", &analytic);
    rep.detail("band_limit", kmax);
    let growth = norms.last().unwrap() / norms[0].max(1e-300);
    rep.constant("connection_norm", *norms.last().unwrap());
    rep.constant("growth", growth);
    rep.criterion("finite", norms.iter().all(|x| x.is_finite()));
    rep.criterion("bounded_under_refinement", growth <= 1.1);
    rep.criterion("matches_closed_form", *rep.residuals.last().unwrap() <= tol);

    // homogeneity in ξ
    let doubled = connection_norms(&coarse, &xi, 2.0, kmax, cfg.seed);
    let hom = (doubled.lattice - 2.0 * norms[0]).abs() / norms[0].max(1e-300);
    rep.constant("homogeneity_defect", hom);
    rep.criterion("homogeneous", hom <= 1e-10);

    if model == ModelName::Torus4 {
        // constant even ξ has D_V ξ = 0 and ∇^X ξ = 0
        let amp: Vec<C> = (0..coarse.fact.fiber_rank).map(|i| if i == 0 { C::new(1.0, 0.0) } else { ZERO }).collect();
        let amp = crate::sections::project_amplitude(&even_projector(&coarse), &amp);
        let c = connection_norms(&coarse, &Constant(amp), 1.0, kmax, cfg.seed);
        rep.constant("constant_section_norm", c.lattice);
        rep.criterion("constant_section_vanishes", c.lattice <= 1e-10);
    }
    Ok(rep)
}

/// Cutoffs depending on the first base coordinate, summing to one.
fn cutoffs(model: ModelName) -> [fn(f64) -> f64; 2] {
    match model {
        ModelName::PuncturedSphere => [|t| (t / 2.0).cos().powi(2), |t| (t / 2.0).sin().powi(2)],
        _ => [|x| (PI * x).cos().powi(2), |x| (PI * x).sin().powi(2)],
    }
}

/// Orthonormal basis of one fiber-translation sector: `e^{2πi k·f/n}` on every
/// fiber, one vector per base point and spinor component.
fn sector_basis(s: &Setup, k: &[usize]) -> Vec<Vec<C>> {
    let g = &s.geometry;
    let lat = &s.total;
    let r = lat.rank;
    let nf = g.fiber_len();
    let sizes: Vec<usize> = g.fiber_axes.iter().map(|&a| g.grid.axes[a].n).collect();
    let phase: Vec<C> = (0..nf)
        .map(|f| {
            let mut rem = f;
            let mut arg = 0.0;
            for (axis, &n) in sizes.iter().enumerate().rev() {
                let i = rem % n;
                rem /= n;
                arg += 2.0 * PI * (k[axis] * i) as f64 / n as f64;
            }
            C::from_polar(1.0, arg)
        })
        .collect();
    let mut basis = Vec::with_capacity(g.base_len() * r);
    for b in 0..g.base_len() {
        for c in 0..r {
            let mut v = vec![ZERO; lat.len()];
            for (f, ph) in phase.iter().enumerate() {
                let p = b * nf + f;
                v[p * r + c] = ph / (nf as f64 * lat.measure(p)).sqrt();
            }
            basis.push(v);
        }
    }
    basis
}

/// `⟨v_i, A v_j⟩` for sector vectors supported on single fibers.
fn sector_block(s: &Setup, op: &dyn DiscreteOperator, basis: &[Vec<C>]) -> Mat {
    let lat = &s.total;
    let r = lat.rank;
    let nf = s.geometry.fiber_len();
    let images: Vec<Vec<C>> = basis.par_iter().map(|v| op.apply(v)).collect();
    let k = basis.len();
    let mut out = Mat::zeros(k, k);
    for i in 0..k {
        let (b, c) = (i / r, i % r);
        for (j, img) in images.iter().enumerate() {
            let mut acc = ZERO;
            for f in 0..nf {
                let p = b * nf + f;
                acc += basis[i][p * r + c].conj() * img[p * r + c] * lat.measure(p);
            }
            out[(i, j)] = acc;
        }
    }
    (&out + out.adjoint()) * C::new(0.5, 0.0)
}

fn sectors(s: &Setup) -> Vec<Vec<usize>> {
    let g = &s.geometry;
    let mut out = vec![vec![]];
    for &a in &g.fiber_axes {
        let n = g.grid.axes[a].n;
        out = out.into_iter().flat_map(|k| (0..n).map(move |q| [k.clone(), vec![q]].concat())).collect();
    }
    out
}

fn cutoff_op(s: &Setup, chi: fn(f64) -> f64, scale: f64) -> OpRef {
    let g = &s.geometry;
    let r = s.fact.total_rank;
    let axis = g.base_axes[0];
    let field = PointField::PerPoint(
        (0..g.grid.len())
            .map(|p| identity(r) * C::new(scale * chi(g.grid.coords(p)[axis]), 0.0))
            .collect(),
    );
    pointwise(&s.total, field)
}

pub(super) fn positivity(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Positivity;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let ladder = if cfg.resolutions.is_empty() {
        match model {
            ModelName::PuncturedSphere => vec![12, 16],
            _ => vec![4, 6],
        }
    } else {
        cfg.resolutions.clone()
    };
    cfg.ladder(model, &ladder)?;
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let mut kappas = Vec::new();
    let mut lambdas = Vec::new();
    let mut cross = None;
    let mut scaling = 0.0f64;
    for (level, &n) in ladder.iter().enumerate() {
        let s = setup(model, n)?;
        let dv: OpRef = Arc::new(s.dirac_vertical());
        let t: OpRef = Arc::new(s.tensor_sum());
        let a = anticommutator(dv, t);
        let secs = sectors(&s);
        let mut kappa: f64 = 0.0;
        let mut per_chi = Vec::new();
        for chi in cutoffs(model) {
            let x = cutoff_op(&s, chi, 1.0);
            let op = compose(x.clone(), compose(a.clone(), x));
            let mut lmin = f64::INFINITY;
            for k in &secs {
                let block = sector_block(&s, op.as_ref(), &sector_basis(&s, k));
                lmin = lmin.min(eigenvalues(&block)?[0]);
            }
            if level == 0 {
                let x2 = cutoff_op(&s, chi, 2.0);
                let op2 = compose(x2.clone(), compose(a.clone(), x2));
                let basis = sector_basis(&s, &secs[0]);
                let l1 = eigenvalues(&sector_block(&s, op.as_ref(), &basis))?[0];
                let l2 = eigenvalues(&sector_block(&s, op2.as_ref(), &basis))?[0];
                scaling = scaling.max((l2 / 4.0 - l1).abs() / l1.abs().max(1.0));
                if s.total.len() <= cfg.dense_threshold.min(1024) {
                    let full = dense_export(op.as_ref(), cfg.dense_threshold)?;
                    let full = (&full + full.adjoint()) * C::new(0.5, 0.0);
                    let lfull = eigenvalues(&full)?[0];
                    let d = (lfull - lmin).abs() / lfull.abs().max(1.0);
                    cross = Some(cross.map_or(d, |c: f64| c.max(d)));
                }
            }
            per_chi.push(lmin);
            kappa = kappa.max((-lmin).max(0.0));
        }
        rep.resolutions.push(n);
        rep.residuals.push(kappa);
        rep.detail(&format!("sectors.{n}"), secs.len());
        lambdas.push(per_chi);
        kappas.push(kappa);
    }
    rep.detail("lambda_min", &lambdas);
    let (ka, kb) = (kappas[kappas.len().saturating_sub(2)], *kappas.last().unwrap());
    rep.constant("kappa", kb);
    rep.constant("scaling_defect", scaling);
    rep.detail("kappa_positive", kb > tol);
    rep.criterion("finite", kappas.iter().all(|k| k.is_finite()));
    rep.criterion("stable", (ka - kb).abs() <= 0.25 * ka.max(kb) + tol);
    rep.criterion("quadratic_in_cutoff", scaling <= 1e-10);
    if let Some(c) = cross {
        rep.constant("sector_vs_dense", c);
        rep.criterion("sectors_match_dense", c <= 1e-8);
    }
    if model == ModelName::Torus4 {
        rep.criterion("flat_exact", kb <= tol);
    }
    Ok(rep)
}

/// Columns `e_j / √m_j` through `f`, rows scaled by `√m_i`.
fn dense_of(loc: &LocalizedFiber, f: impl Fn(&[C]) -> Vec<C> + Sync) -> Mat {
    let lat = &loc.lattice;
    let n = lat.len();
    let cols: Vec<Vec<C>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = C::new(1.0 / lat.measure(j / lat.rank).sqrt(), 0.0);
            f(&e)
        })
        .collect();
    Mat::from_fn(n, n, |i, j| cols[j][i] * lat.measure(i / lat.rank).sqrt())
}

fn signed_modes(n: usize) -> impl Iterator<Item = i64> {
    let n = n as i64;
    (0..n).map(move |q| if q < (n + 1) / 2 { q } else { q - n })
}

pub(super) fn garding(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Garding;
    let model = cfg.geometry_for(check);
    let tol = cfg.tolerance_for(check);
    let n = cfg.single(match model {
        ModelName::PuncturedSphere => 32,
        _ => 8,
    });
    let s = Setup::new(model_geometry(model, &[n])?)?;
    let g = &s.geometry;
    let nb = g.base_len();
    let mut points = vec![0, nb / 3, 2 * nb / 3, nb - 1];
    points.dedup();
    let mut rep = VerificationReport::new(check.as_str(), model.as_str(), cfg.seed, tol);
    let mut forms = Vec::new();
    let mut mode_defect: f64 = 0.0;
    let mut mode_min = f64::INFINITY;
    let mut oracle_min = f64::INFINITY;
    for &b in &points {
        let loc = s.localize_fiber(b)?;
        let lat = loc.lattice.clone();
        if lat.len() > cfg.dense_threshold {
            return Err(Error::DenseThreshold {
                dim: lat.len(),
                threshold: cfg.dense_threshold,
            });
        }
        let fg = &lat.geometry;
        let nr = fg.grid.ndim();
        let d = dense_export(&loc, cfg.dense_threshold)?;
        let dim = d.nrows();
        let lhs = identity(dim) + d.adjoint() * &d;
        let mut rhs = identity(dim);
        for r in 0..nr {
            let dr = dense_of(&loc, |u| loc.coordinate_derivative(r, u));
            rhs += dr.adjoint() * &dr;
        }
        let c_form = generalized_eigenvalues(&lhs, &rhs)?[0];
        forms.push(c_form);

        // plane waves: lattice ratio against the Fourier symbol
        let sizes: Vec<usize> = fg.grid.axes.iter().map(|a| a.n).collect();
        let mut modes: Vec<Vec<i64>> = vec![vec![]];
        for &m in &sizes {
            modes = modes.into_iter().flat_map(|k| signed_modes(m).map(move |q| [k.clone(), vec![q]].concat())).collect();
        }
        for k in &modes {
            let mut psi = vec![ZERO; lat.len()];
            for p in 0..fg.grid.len() {
                let x = fg.grid.coords(p);
                let arg: f64 = (0..nr).map(|r| 2.0 * PI * k[r] as f64 * x[r] / fg.grid.axes[r].length).sum();
                psi[p * lat.rank] = C::from_polar(1.0, arg);
            }
            let np = lat.norm(&psi);
            let nd = lat.norm(&loc.apply(&psi));
            let nder: f64 = (0..nr).map(|r| lat.norm(&loc.coordinate_derivative(r, &psi))).sum();
            let ratio = ((np + nd) / (np + nder)).powi(2);
            let sym: Vec<f64> = (0..fg.dim_total)
                .map(|j| {
                    fg.frames[j]
                        .components
                        .iter()
                        .map(|(r, c)| c.at(0) * 2.0 * PI * k[*r] as f64 / fg.grid.axes[*r].length)
                        .sum()
                })
                .collect();
            let xi = sym.iter().map(|x| x * x).sum::<f64>().sqrt();
            let der: f64 = (0..nr).map(|r| 2.0 * PI * (k[r] as f64).abs() / fg.grid.axes[r].length).sum();
            let oracle = ((1.0 + xi) / (1.0 + der)).powi(2);
            mode_defect = mode_defect.max((ratio - oracle).abs());
            mode_min = mode_min.min(ratio);
            oracle_min = oracle_min.min(oracle);
        }
    }
    let cmin = forms.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = forms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    rep.resolutions.push(n);
    rep.residuals.push(mode_defect);
    rep.detail("base_points", &points);
    rep.detail("c_form", &forms);
    rep.constant("c_form_min", cmin);
    rep.constant("c_mode_min", mode_min);
    rep.constant("c_mode_oracle", oracle_min);
    rep.criterion("positive", cmin > 0.0 && mode_min > 0.0);
    rep.criterion("modes_match_symbol", mode_defect <= tol);
    if model != ModelName::PuncturedSphere {
        rep.criterion("base_invariant", cmax - cmin <= tol);
    }
    Ok(rep)
}
