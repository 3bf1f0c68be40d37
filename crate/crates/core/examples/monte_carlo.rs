//! Monte Carlo payoffs against the analytic values, and the law of the
//! long-run standard under a cutoff rule.

use exploration_eq::planner::solve_cooperative;
use exploration_eq::profile::{Strategy, StrategyProfile};
use exploration_eq::sim::{longrun_test, q_estimate, simulate, SimConfig};
use exploration_eq::symmetric::solve_symmetric;
use exploration_eq::ModelParams;

fn main() -> exploration_eq::Result<()> {
    // Light-tailed landscape: payoffs have a finite variance and a short horizon suffices.
    let p = ModelParams::from_rho_theta(0.5, -1.0, 2);
    let sym = solve_symmetric(&p, 2.0, 1e-12)?;
    let coop = solve_cooperative(&p, 2.0)?;
    let cfg = SimConfig::new(4000, 2e-3, 0.0, 7);
    for (name, prof, exact) in [
        ("symmetric", sym.profile(), sym.value.value(0.0)),
        ("cooperative", coop.profile(2), coop.value.value(0.0)),
    ] {
        let res = simulate(&p, &prof, &cfg)?;
        let e = res.payoffs[0];
        println!(
            "{name:<12} MC {:.5} ± {:.5}  exact {:.5}  z = {:+.2}  (T = {:.1}, absorbed {:.1}%)",
            e.mean,
            e.se,
            exact,
            (e.mean - exact) / e.se,
            res.horizon,
            100.0 * res.absorbed_fraction
        );
    }

    // Long-run standard under a cutoff at 2, zero drift.
    let flat = ModelParams::from_rho_theta(0.5, 0.0, 1);
    let prof = StrategyProfile::new(vec![Strategy::cutoff(2.0)]);
    let cfg = SimConfig {
        horizon: Some(200.0),
        ..SimConfig::new(2000, 5e-3, 0.0, 11)
    };
    let res = simulate(&flat, &prof, &cfg)?;
    let t = longrun_test(&res.s_bar, 0.0, 2.0, 0.0, 0.0, 0.01)?;
    println!(
        "long-run standard: tail mean {:.3} (expected {:.3}), KS D = {:.4} vs {:.4}, pass = {}",
        t.tail_mean,
        t.tail_mean_expected,
        t.ks_distance,
        t.ks_critical,
        t.pass()
    );
    println!(
        "P(best ever exceeds the start), cutoff 2: {:.4}",
        q_estimate(&ModelParams::from_rho_theta(2.0, -1.0, 2), 2.0, 2.0, 0.0)?
    );
    Ok(())
}
