//! ΓTΓ against D_M and the curvature term on the nilmanifold, with the
//! coefficient scan.

use fibdirac::geometry::ModelName;
use fibdirac::verify::{run_check, CheckConfig, CheckName};

fn main() {
    let cfg = CheckConfig {
        geometry: Some(ModelName::KodairaThurston),
        resolutions: vec![8, 16, 32],
        scan: true,
        ..CheckConfig::default()
    };
    let r = run_check(CheckName::Factorization, &cfg).unwrap();
    for (n, e) in r.resolutions.iter().zip(&r.residuals) {
        println!("N = {n:>2}: residual {e:.3e}");
    }
    println!("lattice identity {:.1e}", r.constants["lattice_residual"]);
    let s = r.details["scan.coefficients"].as_array().unwrap();
    let e = r.details["scan.residuals"].as_array().unwrap();
    for (s, e) in s.iter().zip(e) {
        println!("  s = {:.5}  {:.3e}", s.as_f64().unwrap(), e.as_f64().unwrap());
    }
    println!("argmin {}, verdict {:?}", r.constants["scan_argmin"], r.verdict);
}
