//! Cooperative cutoffs by closed form and by shooting, for a few team sizes.

use exploration_eq::model::critical_limits;
use exploration_eq::planner::{complete_info_value, cooperative_cutoff_by_shooting, solve_cooperative};
use exploration_eq::ModelParams;

fn main() -> exploration_eq::Result<()> {
    let p = ModelParams::from_rho_theta(2.0, -1.0, 1);
    let limits = critical_limits(&p);
    println!("rho = 2, theta = -1 ({}), n_hat = {:?}", p.class().label(), limits.n_hat);
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "N", "a*", "shooting", "U*(0)", "U_hat(0)");
    for n in 1..=4 {
        let team = n as f64;
        let sol = solve_cooperative(&p, team)?;
        let shot = cooperative_cutoff_by_shooting(&p, team, 1e-12)?;
        println!(
            "{n:>3} {:>12.7} {:>12.7} {:>12.7} {:>12.7}",
            sol.a_star,
            shot,
            sol.value.value(0.0),
            complete_info_value(&p, team, 0.0).to_f64()
        );
    }

    // Past the finiteness boundary the planner never stops.
    let wild = ModelParams::from_rho_theta(1.0, 0.5, 1);
    match solve_cooperative(&wild, 1.0) {
        Err(e) => println!("rho = 1, theta = 0.5: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
