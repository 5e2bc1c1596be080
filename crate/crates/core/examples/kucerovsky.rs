//! Connection norms, local positivity and the fiberwise Gårding constant.

use fibdirac::geometry::ModelName;
use fibdirac::verify::{run_check, CheckConfig, CheckName};

fn main() {
    let kt = Some(ModelName::KodairaThurston);
    let conn = run_check(CheckName::Connection, &CheckConfig { geometry: kt, ..CheckConfig::default() }).unwrap();
    println!(
        "connection: norms {}, growth {:.3}",
        conn.details["lattice_norms"], conn.constants["growth"]
    );
    for m in [ModelName::Torus4, ModelName::KodairaThurston] {
        let cfg = CheckConfig { geometry: Some(m), resolutions: vec![4], ..CheckConfig::default() };
        let pos = run_check(CheckName::Positivity, &cfg).unwrap();
        println!("positivity on {m}: kappa {:.2e}", pos.constants["kappa"]);
    }
    let g = run_check(CheckName::Garding, &CheckConfig { geometry: kt, ..CheckConfig::default() }).unwrap();
    println!(
        "garding: C_form {:.4}, C_mode {:.4} (symbol {:.4})",
        g.constants["c_form_min"], g.constants["c_mode_min"], g.constants["c_mode_oracle"]
    );
}
