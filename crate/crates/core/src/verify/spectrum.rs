use std::f64::consts::PI;

use super::{setup, CheckConfig, CheckName};
use crate::clifford::Mat;
use crate::error::Result;
use crate::geometry::ModelName;
use crate::lattice::{dense_export, C};
use crate::report::VerificationReport;
use crate::spectral::{bounded_transform, dense_eigen, eigenvalues, hermitian_defect, lanczos_smallest, spectral_norm};

/// Eigenvalues `±2π|k|` of the Dirac operator of the unit flat 2-torus on
/// the resolved modes, ascending.
pub fn flat_torus_spectrum(n: usize) -> Vec<f64> {
    let modes: Vec<i64> = (0..n as i64).map(|q| if q < (n as i64 + 1) / 2 { q } else { q - n as i64 }).collect();
    let mut out = Vec::with_capacity(2 * n * n);
    for &a in &modes {
        for &b in &modes {
            let l = 2.0 * PI * ((a * a + b * b) as f64).sqrt();
            out.push(l);
            out.push(-l);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn by_magnitude(v: &[f64], k: usize) -> Vec<f64> {
    let mut w = v.to_vec();
    w.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    w.truncate(k);
    w.sort_by(f64::total_cmp);
    w
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)).fold(0.0, f64::max)
}

pub(super) fn spectral(cfg: &CheckConfig) -> Result<VerificationReport> {
    let check = CheckName::Spectral;
    let tol = cfg.tolerance_for(check);
    let n = cfg.single(8);
    let mut rep = VerificationReport::new(check.as_str(), "torus4+kodaira_thurston", cfg.seed, tol);

    let s = setup(ModelName::Torus4, n)?;
    let db = s.dirac_base();
    let dense = dense_export(&db, cfg.dense_threshold)?;
    let spec = dense_eigen(&dense)?;
    let oracle = flat_torus_spectrum(n);
    let dense_err = max_rel_diff(&spec.values, &oracle);
    let zeros = spec.values.iter().filter(|x| x.abs() < 1e-8).count();

    let k = 10;
    let lanczos = lanczos_smallest(&db, k, cfg.seed)?;
    let lanczos_err = max_rel_diff(&lanczos.values, &by_magnitude(&oracle, k));

    let f = bounded_transform(&spec);
    let f_norm = spectral_norm(&f);
    let f_herm = hermitian_defect(&f);

    // Weyl: moving D_M by c(Ω)/8 moves each eigenvalue by at most ‖c(Ω)/8‖
    let kt = setup(ModelName::KodairaThurston, 4)?;
    let dm = dense_export(&kt.dirac_total(), cfg.dense_threshold)?;
    let w: Mat = dense_export(kt.curvature_term().as_ref(), cfg.dense_threshold)? * C::new(0.125, 0.0);
    let shift = spectral_norm(&w);
    let a = eigenvalues(&dm)?;
    let b = eigenvalues(&(&dm - &w))?;
    let moved = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    rep.resolutions.push(n);
    rep.residuals.push(dense_err.max(lanczos_err));
    rep.detail("lanczos_values", &lanczos.values);
    rep.detail("lanczos_krylov_dim", lanczos.krylov_dim);
    rep.constant("dense_error", dense_err);
    rep.constant("lanczos_error", lanczos_err);
    rep.constant("lanczos_residual", lanczos.max_residual);
    rep.constant("zero_multiplicity", zeros as f64);
    rep.constant("bounded_transform_norm", f_norm);
    rep.constant("bounded_transform_hermitian_defect", f_herm);
    rep.constant("curvature_shift_norm", shift);
    rep.constant("max_eigenvalue_shift", moved);
    rep.criterion("dense_matches_fourier", dense_err <= tol);
    rep.criterion("lanczos_matches_fourier", lanczos_err <= tol);
    rep.criterion("kernel_dimension", zeros == 2);
    rep.criterion("bounded_transform", f_norm <= 1.0 + 1e-12 && f_herm <= 1e-12);
    rep.criterion("weyl_bound", moved <= shift + 1e-10);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_spectrum_counts() {
        let v = flat_torus_spectrum(4);
        assert_eq!(v.len(), 32);
        assert_eq!(v.iter().filter(|x| **x == 0.0).count(), 2);
        assert!((by_magnitude(&v, 10)[9] - 2.0 * PI).abs() < 1e-14);
    }
}
