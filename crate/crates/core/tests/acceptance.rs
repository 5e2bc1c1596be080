//! Acceptance suite: one line per criterion, run in order on a single
//! thread so that runtimes are comparable.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fibdirac::geometry::ModelName;
use fibdirac::report::VerificationReport;
use fibdirac::verify::{run_check, CheckConfig, CheckName};

fn run(check: CheckName, geometry: Option<ModelName>, resolutions: &[usize]) -> (VerificationReport, Duration) {
    let cfg = CheckConfig {
        geometry,
        resolutions: resolutions.to_vec(),
        ..CheckConfig::default()
    };
    run_with(check, &cfg)
}

fn run_with(check: CheckName, cfg: &CheckConfig) -> (VerificationReport, Duration) {
    let t = Instant::now();
    let rep = run_check(check, cfg).unwrap_or_else(|e| panic!("{check} failed to run: {e}"));
    (rep, t.elapsed())
}

fn constant(rep: &VerificationReport, key: &str) -> f64 {
    *rep.constants.get(key).unwrap_or_else(|| panic!("{} has no constant {key}", rep.check))
}

fn flag(rep: &VerificationReport, key: &str) -> bool {
    rep.details.get(&format!("criterion.{key}")).and_then(|v| v.as_bool()).unwrap_or(false)
}

fn worst(rep: &VerificationReport) -> f64 {
    rep.residuals.iter().cloned().fold(0.0, f64::max)
}

fn decreasing(rep: &VerificationReport) -> bool {
    rep.residuals.windows(2).all(|w| w[1] < w[0])
}

/// Passes when every residual is already at roundoff or the fitted order
/// reaches `min_order` on a decreasing sequence.
fn converges(rep: &VerificationReport, exact: f64, min_order: f64) -> bool {
    worst(rep) <= exact || (decreasing(rep) && rep.order.is_some_and(|o| o >= min_order))
}

fn order(rep: &VerificationReport) -> String {
    match rep.order {
        Some(o) if worst(rep) > 1e-12 => format!("order {o:.2}"),
        _ => format!("exact ({:.1e})", worst(rep)),
    }
}

struct Line {
    ok: bool,
    text: String,
}

fn line(n: usize, name: &str, ok: bool, detail: String, took: Duration) -> Line {
    let text = format!(
        "criterion {n} [{name}]: {} | {detail} | {:.1} s",
        if ok { "PASS" } else { "FAIL" },
        took.as_secs_f64()
    );
    println!("{text}");
    Line { ok, text }
}

fn clifford() -> Line {
    let (rep, t) = run(CheckName::Clifford, None, &[]);
    let ok = flag(&rep, "modules")
        && flag(&rep, "factorized_pairs")
        && worst(&rep) <= 1e-13
        && constant(&rep, "pair_defect") <= 1e-13
        && t < Duration::from_secs(1);
    let detail = format!("module defect {:.1e}, factorized pairs {:.1e}", worst(&rep), constant(&rep, "pair_defect"));
    line(1, "clifford", ok, detail, t)
}

fn flat_factorization() -> Line {
    let cfg = CheckConfig {
        geometry: Some(ModelName::Torus4),
        resolutions: vec![8],
        samples: 20,
        ..CheckConfig::default()
    };
    let (rep, t) = run_with(CheckName::Factorization, &cfg);
    let r = constant(&rep, "lattice_residual");
    let ok = r <= 1e-10 && rep.details["samples.8"] == 20 && t < Duration::from_secs(10);
    line(2, "flat factorization", ok, format!("torus4 N=8, 20 sections, residual {r:.1e}"), t)
}

fn curved_factorization() -> Line {
    let cfg = CheckConfig {
        geometry: Some(ModelName::KodairaThurston),
        resolutions: vec![8, 16, 32],
        scan: true,
        ..CheckConfig::default()
    };
    let (rep, t) = run_with(CheckName::Factorization, &cfg);
    let argmin = constant(&rep, "scan_argmin");
    let contrast = constant(&rep, "scan_contrast");
    let ok = decreasing(&rep)
        && rep.order.is_some_and(|o| o >= 2.0)
        && (argmin - 0.125).abs() <= 1.0 / 32.0 + 1e-12
        && contrast >= 10.0
        && t < Duration::from_secs(180);
    let detail = format!(
        "residuals {:.2e}, {:.2e}, {:.2e}; {}; argmin {argmin}; s=0 / s=1/8 = {contrast:.1}",
        rep.residuals[0],
        rep.residuals[1],
        rep.residuals[2],
        order(&rep)
    );
    line(3, "curved factorization", ok, detail, t)
}

fn commutator() -> Line {
    let start = Instant::now();
    let (flat, _) = run(CheckName::Commutator, Some(ModelName::Torus4), &[8, 16]);
    let (kt, _) = run(CheckName::Commutator, Some(ModelName::KodairaThurston), &[8, 16, 32]);
    let (sphere, _) = run(CheckName::Commutator, Some(ModelName::PuncturedSphere), &[]);
    let ok = worst(&flat) <= 1e-12 && converges(&kt, 1e-12, 2.0) && converges(&sphere, 1e-12, 2.0);
    let detail = format!(
        "torus4 {:.1e}; kodaira_thurston {}; punctured_sphere {}",
        worst(&flat),
        order(&kt),
        order(&sphere)
    );
    line(4, "commutator", ok, detail, start.elapsed())
}

fn symmetry() -> Line {
    let start = Instant::now();
    let mut defect: f64 = 0.0;
    let mut ok = true;
    for m in ModelName::ALL {
        let (rep, _) = run(CheckName::Symmetry, Some(m), &[]);
        defect = defect.max(worst(&rep));
        ok &= flag(&rep, "symmetric");
    }
    let (ell, _) = run(CheckName::Ellipticity, None, &[]);
    let sv = constant(&ell, "min_singular_value_unit");
    let (ctl, _) = run(CheckName::HalfKControl, None, &[]);
    let without = constant(&ctl, "defect_without_half_k");
    ok &= defect <= 1e-10 && (sv - 1.0).abs() <= 1e-12 && flag(&ell, "vertical_symbol_only") && without >= 1e-3;
    let detail = format!("adjoint defect {defect:.1e}; min symbol singular value {sv:.15}; without ½k {without:.2e}");
    line(5, "symmetry and ellipticity", ok, detail, start.elapsed())
}

fn kucerovsky() -> Line {
    let start = Instant::now();
    let (conn, _) = run(CheckName::Connection, Some(ModelName::KodairaThurston), &[]);
    let growth = constant(&conn, "growth");
    let (flat, _) = run(CheckName::Positivity, Some(ModelName::Torus4), &[4, 6]);
    let (kt, _) = run(CheckName::Positivity, Some(ModelName::KodairaThurston), &[4, 6]);
    let kappa_flat = constant(&flat, "kappa");
    let took = start.elapsed();
    let ok = flag(&conn, "finite")
        && growth <= 1.1
        && kappa_flat.abs() <= 1e-10
        && flag(&kt, "finite")
        && flag(&kt, "stable")
        && took < Duration::from_secs(120);
    let detail = format!(
        "connection growth {growth:.3}; κ torus4 {kappa_flat:.1e}; κ kodaira_thurston N=4,6: {:.1e}, {:.1e}",
        kt.residuals[0], kt.residuals[1]
    );
    line(6, "kucerovsky conditions", ok, detail, took)
}

fn closure() -> Line {
    let (rep, t) = run(CheckName::Closure, None, &[128]);
    let g = constant(&rep, "gradient_ratio");
    let i = constant(&rep, "image_ratio");
    let e = constant(&rep, "codim1_exponent");
    let ok = g <= 1.2 && i <= 1.2 && flag(&rep, "leibniz_bound") && (e - 0.5).abs() <= 0.1;
    let detail = format!("N=128, n=2,4,8: ‖dψ‖ ratio {g:.3}, ‖D(ψs)‖ ratio {i:.3}; codim-1 exponent {e:.3}");
    line(7, "closure", ok, detail, t)
}

fn spectral() -> Line {
    let (rep, t) = run(CheckName::Spectral, None, &[]);
    let dense = constant(&rep, "dense_error");
    let f = constant(&rep, "bounded_transform_norm");
    let zeros = constant(&rep, "zero_multiplicity");
    let ok = dense <= 1e-8
        && constant(&rep, "lanczos_error") <= 1e-8
        && flag(&rep, "kernel_dimension")
        && f <= 1.0 + 1e-12
        && flag(&rep, "weyl_bound");
    let detail = format!(
        "eigenvalue error {dense:.1e}, kernel {zeros}, ‖F_D‖ = {f:.15}, shift {:.3} ≤ {:.3}",
        constant(&rep, "max_eigenvalue_shift"),
        constant(&rep, "curvature_shift_norm")
    );
    line(8, "spectral", ok, detail, t)
}

/// Configuration for the small suite: every grid has at most 16⁴ points.
fn small(check: CheckName) -> CheckConfig {
    let mut cfg = CheckConfig::default();
    let sphere = check.default_geometry() == ModelName::PuncturedSphere;
    if !sphere && matches!(check, CheckName::Consistency | CheckName::Factorization | CheckName::Commutator) {
        cfg.resolutions = vec![8, 16];
    }
    cfg
}

fn reproducibility() -> Line {
    let start = Instant::now();
    let mut first = Vec::new();
    for c in CheckName::ALL {
        let (rep, t) = run_with(c, &small(c));
        first.push((c, rep.to_json(), t));
    }
    let suite = start.elapsed();
    let mut same = 0;
    let mut rerun = 0;
    for (c, json, t) in &first {
        if *t > Duration::from_secs(10) {
            continue;
        }
        rerun += 1;
        same += usize::from(run_with(*c, &small(*c)).0.to_json() == *json);
    }
    let ok = same == rerun && rerun > 0 && suite < Duration::from_secs(300);
    let detail = format!("{same}/{rerun} reports byte-identical on rerun; suite at N ≤ 16 took {:.1} s", suite.as_secs_f64());
    line(9, "reproducibility", ok, detail, start.elapsed())
}

fn main() -> ExitCode {
    let lines = [
        clifford(),
        flat_factorization(),
        curved_factorization(),
        commutator(),
        symmetry(),
        kucerovsky(),
        closure(),
        spectral(),
        reproducibility(),
    ];
    let failed: Vec<&str> = lines.iter().filter(|l| !l.ok).map(|l| l.text.as_str()).collect();
    println!("acceptance: {}/{} criteria pass", lines.len() - failed.len(), lines.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
