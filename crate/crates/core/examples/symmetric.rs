//! The symmetric equilibrium: binding with two players, slack with four.

use exploration_eq::symmetric::{k_dagger, nonbinding_threshold, solve_symmetric};
use exploration_eq::ModelParams;

fn main() -> exploration_eq::Result<()> {
    for n in [2u32, 4] {
        let p = ModelParams::from_rho_theta(2.0, -1.0, n);
        let eq = solve_symmetric(&p, n as f64, 1e-12)?;
        println!(
            "N = {n}: a_tilde = {:.7}, a_dagger = {:.7}, binding = {}, U(0) = {:.7}",
            eq.a_tilde,
            eq.a_dagger,
            eq.binding,
            eq.value.value(0.0)
        );
        for i in 0..=8 {
            let a = eq.a_tilde * i as f64 / 8.0;
            println!("  a = {a:.4}  k = {:.5}  u = {:.5}", k_dagger(&eq, a), eq.value.value(a));
        }
    }
    println!("(e^2 - 1)/2 = {:.7}", (2f64.exp() - 1.0) / 2.0);
    if let Some(a) = nonbinding_threshold(2.0, -1.0, 1e-12) {
        println!("slack-regime threshold at rho = 2, theta = -1: {a:.7}");
    }
    Ok(())
}
