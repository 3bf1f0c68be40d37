//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance` (add `--release` for timings
//! representative of an optimised build; the test profile is already -O3).

use std::time::{Duration, Instant};

use exploration_eq::asymmetric::{build_average, compare_welfare, construct_equilibrium, construct_pareto, dominance_margin};
use exploration_eq::model::critical_limits;
use exploration_eq::planner::{cooperative_cutoff_by_shooting, cooperative_cutoff_formula, solve_cooperative, SweepAxis};
use exploration_eq::profile::{Strategy, StrategyProfile};
use exploration_eq::sim::{longrun_test, simulate, SimConfig};
use exploration_eq::symmetric::{solve_symmetric, symmetric_sweep};
use exploration_eq::verify::{check_equilibrium, dp_deviation_gain, dp_single_agent, EquilibriumView};
use exploration_eq::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference(n: u32) -> ModelParams {
    ModelParams::from_rho_theta(2.0, -1.0, n)
}

/// Cutoff from first principles: roots by the textbook quadratic formula and
/// a bisection on `u(0) + u'(0)` for the payoff pasted at `x`.
fn cutoff_oracle(rho: f64, theta: f64, team: f64) -> f64 {
    let disc = (theta * theta + 4.0 / (team * rho)).sqrt();
    let (g1, g2) = ((theta - disc) / 2.0, (theta + disc) / 2.0);
    // u(a) = c1 e^{g1(a−x)} + c2 e^{g2(a−x)} with u(x) = 1, u'(x) = 0
    let (c1, c2) = (g2 / (g2 - g1), -g1 / (g2 - g1));
    let refl = |x: f64| c1 * (1.0 + g1) * (-g1 * x).exp() + c2 * (1.0 + g2) * (-g2 * x).exp();
    let (mut lo, mut hi) = (0.0, 1.0);
    while refl(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if refl(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1_coop() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (n, stated) in [(1u32, 1.5207), (2, 2.4930)] {
        let p = reference(n);
        let oracle = cutoff_oracle(2.0, -1.0, n as f64);
        let formula = cooperative_cutoff_formula(p.rho(), p.theta(), n as f64);
        let shot = cooperative_cutoff_by_shooting(&p, n as f64, 1e-13).map_err(|e| e.to_string())?;
        let solved = solve_cooperative(&p, n as f64).map_err(|e| e.to_string())?.a_star;
        let err = [formula, shot, solved].iter().map(|x| (x - oracle).abs()).fold(0.0, f64::max);
        // stated to four decimals
        pass &= err <= 1e-6 && (oracle - stated).abs() <= 1e-4;
        details.push(format!("a*_{n} = {oracle:.7} (stated {stated}), max path error {err:.1e}"));
    }
    check(pass, details.join("; "))
}

fn c2_symmetric() -> Outcome {
    let eq4 = solve_symmetric(&reference(4), 4.0, 1e-12).map_err(|e| e.to_string())?;
    let u0 = eq4.value.value(0.0);
    let target = (2f64.exp() - 1.0) / 2.0;
    let eq2 = solve_symmetric(&reference(2), 2.0, 1e-12).map_err(|e| e.to_string())?;
    check(
        !eq4.binding && (eq4.a_tilde - 2.0).abs() <= 1e-6 && (u0 - target).abs() <= 1e-6 && eq2.binding && eq2.a_dagger > 0.0,
        format!(
            "N=4: binding={}, a_tilde={:.9}, U(0)-(e^2-1)/2={:.1e}; N=2: binding={}, a_dagger={:.6}",
            eq4.binding,
            eq4.a_tilde,
            u0 - target,
            eq2.binding,
            eq2.a_dagger
        ),
    )
}

fn c3_random_draws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_hjb: f64 = 0.0;
    let mut drawn = 0;
    while drawn < 50 {
        let n = rng.random_range(2..=8u32);
        let rho = rng.random_range(0.5..4.0);
        let theta = rng.random_range(-2.0..1.0);
        let p = ModelParams::from_rho_theta(rho, theta, n);
        if !p.satisfies_assumption(n as f64) {
            continue;
        }
        drawn += 1;
        let tag = format!("draw {drawn} (rho={rho:.4}, theta={theta:.4}, N={n})");
        let eq = solve_symmetric(&p, n as f64, 1e-12).map_err(|e| format!("{tag}: {e}"))?;
        let rep = check_equilibrium(&EquilibriumView::from_symmetric(&p, &eq), 1000, 1e-5);
        worst_hjb = worst_hjb.max(rep.hjb_max_residual.value);
        if !rep.all_pass() {
            let failed: Vec<_> = rep.summary().into_iter().filter(|(_, ok)| !ok).map(|(s, _)| s).collect();
            return Err(format!("{tag}: failed {failed:?}"));
        }
        let a1 = solve_cooperative(&p, 1.0).map_err(|e| e.to_string())?.a_star;
        let an = solve_cooperative(&p, n as f64).map_err(|e| e.to_string())?.a_star;
        if !(a1 < eq.a_tilde && eq.a_tilde < an) {
            return Err(format!("{tag}: a_tilde {} not in ({a1}, {an})", eq.a_tilde));
        }
    }
    Ok(format!("50 draws pass all checks; worst HJB residual {worst_hjb:.1e}"))
}

fn c4_asymmetric() -> Outcome {
    let p = reference(2);
    let eq = construct_equilibrium(&p, 2, &[], 1e-12).map_err(|e| e.to_string())?;
    let sym = solve_symmetric(&p, 2.0, 1e-12).map_err(|e| e.to_string())?;
    let w = compare_welfare(&eq, &sym, 4000);
    let s = &eq.switch_points[0];
    let free_rider = 1 - s.player;
    let mut fr_err: f64 = 0.0;
    for i in 0..=1000 {
        let a = s.a_m_plus + (eq.a_flat() - s.a_m_plus) * i as f64 / 1000.0;
        if a < eq.a_flat() {
            fr_err = fr_err.max((eq.payoffs[free_rider].value(a) - 1.0).abs());
        }
    }
    let split_err = eq.switch_points.iter().map(|s| s.value_mismatch.max(s.slope_mismatch)).fold(0.0, f64::max);
    let rep = check_equilibrium(&EquilibriumView::from_asymmetric(&p, &eq), 1000, 1e-5);
    check(
        eq.a_flat() > sym.a_tilde && w.average_dominates && fr_err <= 1e-6 && split_err <= 1e-6 && rep.all_pass(),
        format!(
            "a_flat={:.6} > a_tilde={:.6}; min(u_bar-U) on [0,a_flat)={:.2e}; free-rider |u-1|={fr_err:.1e}; split mismatch {split_err:.1e}; checks pass={}",
            eq.a_flat(),
            sym.a_tilde,
            w.min_average_gap,
            rep.all_pass()
        ),
    )
}

fn c5_pareto() -> Outcome {
    let p = reference(2);
    let eq = construct_pareto(&p, 2, 0.05, 1e-12, 256).map_err(|e| e.to_string())?;
    let sym = solve_symmetric(&p, 2.0, 1e-12).map_err(|e| e.to_string())?;
    let margin = dominance_margin(&eq, &sym, 0.05, 4000);
    check(
        margin > 0.0,
        format!("{} cells; min_n min_a (u_n - U) on [0, a_flat-0.05] = {margin:.2e}", eq.partition.len() - 1),
    )
}

fn c6_encouragement() -> Outcome {
    let mut flats = Vec::new();
    for n in 2..=12usize {
        flats.push(build_average(&reference(n as u32), n, 1e-12).map_err(|e| e.to_string())?.a_flat);
    }
    let inc = flats.windows(2).all(|w| w[1] > w[0]);
    check(
        inc,
        format!("a_flat(N=2..12) from {:.4} to {:.4}, strictly increasing={inc}", flats[0], flats[10]),
    )
}

fn c7_dichotomy() -> Outcome {
    let sqrt2 = std::f64::consts::SQRT_2;
    let base = ModelParams::new(1.0, -0.09, sqrt2, 1);
    let r_hat = critical_limits(&base).r_hat.ok_or("no r_hat")?;
    let (r_low, r_high) = (1.8, 2.5);
    if !(r_low < r_hat && r_hat < r_high) {
        return Err(format!("r_hat = {r_hat} not between {r_low} and {r_high}"));
    }
    // below r_hat: binding all the way to 0.95·n_hat
    let low = base.with_r(r_low);
    let n_hat = critical_limits(&low).n_hat.ok_or("no n_hat")?;
    let ns: Vec<f64> = (0..=400).map(|i| 1.0 + (0.95 * n_hat - 1.0) * i as f64 / 400.0).collect();
    let rows = symmetric_sweep(&low, &SweepAxis::Players(ns), 1e-12);
    let min_dagger = rows.iter().map(|r| r.a_dagger.to_f64()).fold(f64::INFINITY, f64::min);
    if !(min_dagger > 0.0) {
        return Err(format!("r={r_low}: a_dagger reaches {min_dagger}"));
    }
    // above r_hat: slack from some N on, with constant thresholds and payoffs
    let high = base.with_r(r_high);
    let ns: Vec<f64> = (0..=380).map(|i| 1.0 + 0.05 * i as f64).collect();
    let rows = symmetric_sweep(&high, &SweepAxis::Players(ns), 1e-12);
    let first = rows.iter().position(|r| !r.binding).ok_or("never slack")?;
    let n0 = rows[first].n_players;
    let eq0 = solve_symmetric(&high, n0, 1e-12).map_err(|e| e.to_string())?;
    let mut drift: f64 = 0.0;
    for r in &rows[first..] {
        if r.binding || r.a_dagger.to_f64() != 0.0 {
            return Err(format!("r={r_high}: binding again at N={}", r.n_players));
        }
        let eq = solve_symmetric(&high, r.n_players, 1e-12).map_err(|e| e.to_string())?;
        drift = drift.max((eq.a_tilde - eq0.a_tilde).abs());
        for i in 0..=50 {
            let a = eq0.a_tilde * i as f64 / 50.0;
            drift = drift.max((eq.value.value(a) - eq0.value.value(a)).abs());
        }
    }
    check(
        drift <= 1e-8,
        format!(
            "r_hat={r_hat:.5}; r={r_low}: min a_dagger={min_dagger:.4} on [1, {:.3}]; r={r_high}: slack from N={n0:.2} to 19.9, drift {drift:.1e}",
            0.95 * n_hat
        ),
    )
}

fn c8_dp() -> Outcome {
    let p = reference(2);
    let da = 1e-3;
    let single = dp_single_agent(&p, da).map_err(|e| e.to_string())?;
    let sym = solve_symmetric(&p, 2.0, 1e-12).map_err(|e| e.to_string())?;
    let dev = dp_deviation_gain(&p, &sym, da).map_err(|e| e.to_string())?;
    let cut_err = (single.cutoff - single.cutoff_exact).abs();
    check(
        single.sup_gap <= 2e-3 && cut_err <= 2.0 * da && dev.gain <= 5e-3,
        format!(
            "single agent: sup gap {:.1e}, cutoff error {cut_err:.1e}; deviation gain vs symmetric {:.1e}",
            single.sup_gap, dev.gain
        ),
    )
}

fn c9_monte_carlo() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut z = |name: String, mean: f64, se: f64, exact: f64| {
        let zz = (mean - exact) / se;
        pass &= zz.abs() <= 3.0;
        lines.push(format!("{name} z={zz:+.2}"));
    };

    // cooperative rule at the reference parameters
    let p = reference(2);
    let coop = solve_cooperative(&p, 2.0).map_err(|e| e.to_string())?;
    for a0 in [0.0, 0.5 * coop.a_star] {
        let res = simulate(&p, &coop.profile(2), &SimConfig::new(100_000, 1e-3, a0, 7)).map_err(|e| e.to_string())?;
        let e = res.payoffs[0];
        z(format!("coop a0={a0:.3}"), e.mean, e.se, coop.value.value(a0));
    }

    // equilibria on a light-tailed landscape (finite payoff variance)
    let q = ModelParams::from_rho_theta(0.5, -1.0, 2);
    let sym = solve_symmetric(&q, 2.0, 1e-12).map_err(|e| e.to_string())?;
    let res = simulate(&q, &sym.profile(), &SimConfig::new(20_000, 1e-3, 0.0, 7)).map_err(|e| e.to_string())?;
    z("sym".into(), res.payoffs[0].mean, res.payoffs[0].se, sym.value.value(0.0));
    let asym = construct_equilibrium(&q, 2, &[], 1e-12).map_err(|e| e.to_string())?;
    let a_e = asym.switch_points[0].a_m_plus;
    for a0 in [0.0, 0.5 * (a_e + asym.a_flat())] {
        let res = simulate(&q, &asym.profile(), &SimConfig::new(20_000, 1e-3, a0, 7)).map_err(|e| e.to_string())?;
        for (n, e) in res.payoffs.iter().enumerate() {
            z(format!("asym a0={a0:.3} u_{n}"), e.mean, e.se, asym.payoffs[n].value(a0));
        }
    }

    // long-run standard under a cutoff at 2
    let mut ks = Vec::new();
    for theta in [0.0, -1.0] {
        let flat = ModelParams::from_rho_theta(0.5, theta, 1);
        let prof = StrategyProfile::new(vec![Strategy::cutoff(2.0)]);
        let cfg = SimConfig {
            horizon: Some(400.0),
            ..SimConfig::new(10_000, 2e-3, 0.0, 7)
        };
        let res = simulate(&flat, &prof, &cfg).map_err(|e| e.to_string())?;
        let t = longrun_test(&res.s_bar, theta, 2.0, 0.0, 0.0, 0.01).map_err(|e| e.to_string())?;
        pass &= t.ks_pass && res.absorbed_fraction == 1.0;
        ks.push(format!("KS theta={theta}: D={:.4} < {:.4}", t.ks_distance, t.ks_critical));
    }
    lines.extend(ks);
    check(pass, lines.join("; "))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("1 cooperative closed forms", Duration::from_secs(1), c1_coop),
        ("2 symmetric desk check", Duration::from_secs(1), c2_symmetric),
        ("3 equilibrium conditions, 50 draws", Duration::from_secs(30), c3_random_draws),
        ("4 asymmetric construction", Duration::from_secs(10), c4_asymmetric),
        ("5 Pareto partition", Duration::from_secs(60), c5_pareto),
        ("6 unbounded encouragement", Duration::from_secs(60), c6_encouragement),
        ("7 asymptotic dichotomy", Duration::from_secs(120), c7_dichotomy),
        ("8 DP oracle", Duration::from_secs(300), c8_dp),
        ("9 Monte Carlo", Duration::from_secs(600), c9_monte_carlo),
    ];
    let mut failures = 0;
    for (name, budget, f) in criteria {
        let t0 = Instant::now();
        let out = f();
        let dt = t0.elapsed();
        let in_time = dt <= budget;
        let (ok, detail) = match out {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failures += 1;
        }
        let timing = format!("{:.2}s/{}s", dt.as_secs_f64(), budget.as_secs());
        println!(
            "[{}] {name} ({timing}{}) {detail}",
            if ok { "PASS" } else { "FAIL" },
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
