//! Cutoff sequences near the poles of the sphere, and the equatorial
//! control whose gradients grow.

use fibdirac::verify::{cutoff, cutoff_derivative, run_check, CheckConfig, CheckName};

fn main() {
    let r = run_check(CheckName::Closure, &CheckConfig::default()).unwrap();
    println!("‖dψ_n‖, n = 2,4,8: {}", r.details["cutoff_gradient_norms"]);
    println!("‖D(ψ_n s)‖:        {}", r.details["image_norms"]);
    println!("‖s − ψ_n s‖:       {:?}", r.residuals);
    println!("equator control:   {}", r.details["equator_gradient_norms"]);
    println!("codim-1 exponent {:.3}, {:?}", r.constants["codim1_exponent"], r.verdict);
    let theta = 0.1;
    println!("ψ_8({theta}) = {:.4}, ψ_8'({theta}) = {:.4}", cutoff(8.0, theta), cutoff_derivative(8.0, theta));
}
