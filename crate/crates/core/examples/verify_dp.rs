//! Equilibrium-condition checks and the dynamic-programming oracle.

use exploration_eq::asymmetric::construct_equilibrium;
use exploration_eq::planner::solve_cooperative;
use exploration_eq::symmetric::solve_symmetric;
use exploration_eq::verify::{check_equilibrium, dp_deviation_gain, dp_single_agent, EquilibriumView};
use exploration_eq::ModelParams;

fn show(name: &str, view: &EquilibriumView) {
    let rep = check_equilibrium(view, 2000, 1e-5);
    let failed: Vec<&str> = rep.summary().into_iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    println!(
        "{name:<12} pass = {:<5} hjb = {:.1e}  failed: {failed:?}",
        rep.all_pass(),
        rep.hjb_max_residual.value
    );
}

fn main() -> exploration_eq::Result<()> {
    let p = ModelParams::from_rho_theta(2.0, -1.0, 2);
    let sym = solve_symmetric(&p, 2.0, 1e-12)?;
    let asym = construct_equilibrium(&p, 2, &[], 1e-12)?;
    let coop = solve_cooperative(&p, 2.0)?;
    show("symmetric", &EquilibriumView::from_symmetric(&p, &sym));
    show("asymmetric", &EquilibriumView::from_asymmetric(&p, &asym));
    // The planner's rule is not self-enforcing.
    show("cooperative", &EquilibriumView::from_cooperative(&p, &coop, 2));

    for da in [4e-3, 2e-3, 1e-3] {
        let c = dp_single_agent(&p, da)?;
        println!(
            "single agent, da = {da:.0e}: sup gap {:.2e}, cutoff {:.4} (exact {:.5})",
            c.sup_gap, c.cutoff, c.cutoff_exact
        );
    }
    let dev = dp_deviation_gain(&p, &sym, 2e-3)?;
    println!(
        "best response to symmetric opponents: gain {:.2e}, sup gap {:.2e}, {} policy iterations",
        dev.gain, dev.sup_gap, dev.iterations
    );
    Ok(())
}
