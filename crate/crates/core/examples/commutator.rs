//! The commutator of the vertical operator with the horizontal lift
//! against its closed form.

use fibdirac::geometry::ModelName;
use fibdirac::verify::{run_check, CheckConfig, CheckName};

fn main() {
    for (m, res) in [(ModelName::Torus4, vec![8]), (ModelName::PuncturedSphere, vec![64, 128, 256])] {
        let cfg = CheckConfig { geometry: Some(m), resolutions: res, ..CheckConfig::default() };
        let r = run_check(CheckName::Commutator, &cfg).unwrap();
        println!("{m}: max residual {:.2e}, order {:.2?}, {:?}", r.residuals.iter().fold(0.0f64, |a, &b| a.max(b)), r.order, r.verdict);
    }
}
