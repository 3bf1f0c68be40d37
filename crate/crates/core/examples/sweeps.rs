//! Comparative statics: thresholds against team size and discount rate.

use exploration_eq::model::critical_limits;
use exploration_eq::planner::{coop_sweep, SweepAxis};
use exploration_eq::symmetric::symmetric_sweep;
use exploration_eq::ModelParams;

fn main() {
    let p = ModelParams::from_rho_theta(2.0, -1.0, 2);
    let ns: Vec<f64> = (1..=12).map(f64::from).collect();
    println!("{:>4} {:>10} {:>10} {:>10} {:>8}", "N", "a*", "a_tilde", "a_dagger", "binding");
    let coop = coop_sweep(&p, &SweepAxis::Players(ns.clone()));
    let sym = symmetric_sweep(&p, &SweepAxis::Players(ns), 1e-12);
    for (c, s) in coop.iter().zip(&sym) {
        println!(
            "{:>4} {:>10.5} {:>10.5} {:>10.5} {:>8}",
            c.n_players,
            c.a_star.to_f64(),
            s.a_tilde.to_f64(),
            s.a_dagger.to_f64(),
            s.binding
        );
    }

    // Slightly negative drift, sigma = sqrt(2): where the constraint stops binding.
    let base = ModelParams::new(2.0, -0.09, std::f64::consts::SQRT_2, 2);
    println!("r_hat at theta = -0.09: {:?}", critical_limits(&base).r_hat);
    let rs: Vec<f64> = (0..8).map(|i| 1.6 + 0.2 * i as f64).collect();
    for row in symmetric_sweep(&base, &SweepAxis::Discount(rs), 1e-12) {
        println!(
            "r = {:.1}: a_tilde = {}, a_dagger = {}, binding = {}",
            row.r, row.a_tilde, row.a_dagger, row.binding
        );
    }
}
