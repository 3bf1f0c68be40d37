//! Turn-taking equilibria: the trivial partition for two and three players,
//! then a refined partition that beats the symmetric payoff for everyone.

use exploration_eq::asymmetric::{compare_welfare, construct_equilibrium, construct_pareto, dominance_margin};
use exploration_eq::symmetric::solve_symmetric;
use exploration_eq::ModelParams;

fn main() -> exploration_eq::Result<()> {
    for n in [2u32, 3] {
        let p = ModelParams::from_rho_theta(2.0, -1.0, n);
        let eq = construct_equilibrium(&p, n as usize, &[], 1e-12)?;
        let sym = solve_symmetric(&p, n as f64, 1e-12)?;
        let avg = &eq.average;
        println!(
            "N = {n}: a_flat = {:.6}  a_sharp = {:.6}  a_ddag = {:.6}  (symmetric a_tilde = {:.6})",
            avg.a_flat, avg.a_sharp, avg.a_ddag, sym.a_tilde
        );
        for s in &eq.switch_points {
            println!(
                "  split depth {} on [{:.6}, {:.6}): player {} explores outside ({:.6}, {:.6}); mismatch {:.1e}/{:.1e}",
                s.depth, s.a_l, s.a_r, s.player, s.a_m_minus, s.a_m_plus, s.value_mismatch, s.slope_mismatch
            );
        }
        let w = compare_welfare(&eq, &sym, 2000);
        println!(
            "  average beats symmetric: {} (min gap {:.3e} at a = {:.4}); a_flat - a_tilde = {:.4}",
            w.average_dominates, w.min_average_gap, w.argmin, w.threshold_gap
        );
        let u0: Vec<String> = eq.payoffs.iter().map(|u| format!("{:.5}", u.value(0.0))).collect();
        println!("  payoffs at 0: [{}], symmetric {:.5}", u0.join(", "), sym.value.value(0.0));
    }

    let p = ModelParams::from_rho_theta(2.0, -1.0, 2);
    let sym = solve_symmetric(&p, 2.0, 1e-12)?;
    let fine = construct_pareto(&p, 2, 0.05, 1e-12, 64)?;
    println!(
        "Pareto partition: {} cells, per-player margin over symmetric on [0, a_flat - 0.05] = {:.3e}",
        fine.partition.len() - 1,
        dominance_margin(&fine, &sym, 0.05, 2000)
    );
    Ok(())
}
