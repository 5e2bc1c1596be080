//! Base Dirac spectrum on the flat torus: dense, Lanczos and the Fourier
//! eigenvalues ±2π|k|.

use fibdirac::geometry::{model_geometry, ModelName};
use fibdirac::lattice::dense_export;
use fibdirac::operators::Setup;
use fibdirac::spectral::{bounded_transform, dense_eigen, lanczos_smallest, spectral_norm};

fn main() {
    let s = Setup::new(model_geometry(ModelName::Torus4, &[8]).unwrap()).unwrap();
    let d = s.dirac_base();
    let spec = dense_eigen(&dense_export(&d, 4096).unwrap()).unwrap();
    let mut small: Vec<f64> = spec.values.clone();
    small.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let unit = 2.0 * std::f64::consts::PI;
    println!("smallest |λ| / 2π: {:.6?}", small[..10].iter().map(|x| x / unit).collect::<Vec<_>>());
    let l = lanczos_smallest(&d, 10, 1).unwrap();
    println!("lanczos: {:.6?} (residual {:.1e})", l.values, l.max_residual);
    println!("‖F_D‖ = {:.12}", spectral_norm(&bounded_transform(&spec)));
}
