//! Property tests for the model, the ODE kit and the three solution concepts.

use exploration_eq::asymmetric::{compare_welfare, construct_equilibrium};
use exploration_eq::model::{quadratic_roots, LandscapeClass};
use exploration_eq::odekit::{beta_form, integrate_ivp, IvpOptions, SegmentForm};
use exploration_eq::planner::{complete_info_value, cooperative_cutoff_by_shooting, solve_cooperative};
use exploration_eq::symmetric::{k_dagger, solve_symmetric};
use exploration_eq::verify::{check_equilibrium, EquilibriumView, VerificationReport};
use exploration_eq::ModelParams;
use proptest::prelude::*;

/// `(ρ, θ, N)` with `θ ∈ [−2, 1]`, `ρ ∈ [0.5, 4]` and `N·ρ·(1+θ) < 1`.
fn valid(n_lo: u32, n_hi: u32) -> impl Strategy<Value = (f64, f64, u32)> {
    (0.5f64..4.0, n_lo..=n_hi, 0.0f64..1.0).prop_map(|(rho, n, u)| {
        // keep a margin of 5% from the finiteness boundary
        let top = (0.95 / (n as f64 * rho) - 1.0).min(1.0);
        (rho, -2.0 + u * (top + 2.0), n)
    })
}

fn grid(hi: f64, m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |i| hi * i as f64 / (m - 1) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roots_satisfy_vieta((rho, theta, n) in valid(1, 8)) {
        for k in 1..=n {
            let (g1, g2) = quadratic_roots(rho, theta, k as f64);
            let prod = -1.0 / (k as f64 * rho);
            prop_assert!(g1 < 0.0 && g2 > 0.0);
            prop_assert!((g1 + g2 - theta).abs() <= 1e-12 * theta.abs().max(g2 - g1));
            prop_assert!((g1 * g2 - prod).abs() <= 1e-12 * prod.abs());
        }
    }

    #[test]
    fn class_is_scale_free(r in 0.1f64..5.0, mu in -3.0f64..3.0, sigma in 0.2f64..3.0, c in 0.1f64..10.0) {
        let p = ModelParams::new(r, mu, sigma, 1);
        let q = ModelParams::new(r, c * mu, c.sqrt() * sigma, 1);
        prop_assert!((p.theta() - q.theta()).abs() <= 1e-12 * p.theta().abs().max(1.0));
        if (p.theta() + 1.0).abs() > 1e-6 {
            prop_assert_eq!(p.class(), q.class());
        }
    }

    #[test]
    fn validation_is_monotone_in_team(rho in 0.2f64..4.0, theta in -3.0f64..2.0, n in 1u32..10) {
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let here = p.validate(n as f64).is_ok();
        let next = p.validate(n as f64 + 1.0).is_ok();
        prop_assert!(!next || here);
        if here && !next {
            prop_assert!(theta > -1.0);
        }
    }

    #[test]
    fn ivp_matches_exponential_family(
        (rho, theta, _) in valid(1, 1),
        k_idx in 0usize..3,
        explore in any::<bool>(),
        u0 in 1.0f64..3.0,
        du0 in -1.0f64..0.0,
    ) {
        let team = [1.0, 2.0, 4.0][k_idx];
        prop_assume!(team * rho * (1.0 + theta) < 1.0);
        let k = if explore { 1.0 } else { 0.0 };
        // u = 1 − k + K·ρ(u'' − θu')
        let rhs = |_a: f64, u: f64, du: f64| theta * du + (u - 1.0 + k) / (team * rho);
        let seg = integrate_ivp(rhs, 0.0, u0, du0, 3.0, &IvpOptions::with_tol(1e-11)).unwrap();
        let exact = SegmentForm::exp_through(1.0 - k, quadratic_roots(rho, theta, team), 0.0, u0, du0);
        for a in grid(3.0, 61) {
            let (u, _, _) = seg.eval(a);
            prop_assert!((u - exact.eval(a).0).abs() <= 1e-7, "a = {a}: {u} vs {}", exact.eval(a).0);
        }
    }

    #[test]
    fn ivp_dense_output_is_c1(
        (rho, theta, _) in valid(1, 1),
        u0 in 1.0f64..3.0,
        du0 in -1.0f64..0.0,
    ) {
        let rhs = |_a: f64, u: f64, du: f64| theta * du + u / rho;
        let seg = integrate_ivp(rhs, 0.0, u0, du0, 3.0, &IvpOptions::default()).unwrap();
        let SegmentForm::NumericGrid { knots, .. } = &seg.form else { panic!("expected a grid") };
        for &x in &knots[1..knots.len() - 1] {
            let e = 1e-12 * x.max(1.0);
            let (ul, dl, _) = seg.eval(x - e);
            let (ur, dr, _) = seg.eval(x + e);
            let scale = 1.0f64.max(ur.abs()).max(dr.abs());
            prop_assert!((ul - ur).abs() <= 1e-9 * scale && (dl - dr).abs() <= 1e-9 * scale, "knot {x}");
        }
    }

    #[test]
    fn beta_is_linear(
        (rho, theta, _) in valid(1, 1),
        alpha in -2.0f64..2.0,
        gamma in -2.0f64..2.0,
        a in 0.0f64..3.0,
    ) {
        let roots = quadratic_roots(rho, theta, 1.0);
        let u = SegmentForm::exp_through(0.0, roots, 0.5, 1.3, -0.4);
        let v = SegmentForm::interior_through(theta, rho, 1.0, 1.1, -0.2);
        let w = SegmentForm::NumericGrid {
            knots: vec![0.0, 3.0],
            values: vec![0.0, 0.0],
            derivatives: vec![0.0, 0.0],
            second: vec![0.0, 0.0],
        };
        let (u_a, v_a) = (u.eval(a), v.eval(a));
        let combo = (
            alpha * u_a.0 + gamma * v_a.0,
            alpha * u_a.1 + gamma * v_a.1,
            alpha * u_a.2 + gamma * v_a.2,
        );
        let b = rho * (combo.2 - theta * combo.1);
        let lin = alpha * beta_form(&u, a, rho, theta) + gamma * beta_form(&v, a, rho, theta);
        prop_assert!((b - lin).abs() <= 1e-10 * (1.0 + lin.abs()));
        prop_assert_eq!(beta_form(&w, a, rho, theta), 0.0);
    }

    #[test]
    fn coop_below_complete_information((rho, theta, n) in valid(1, 6)) {
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let sol = solve_cooperative(&p, n as f64).unwrap();
        for a in grid(sol.a_star, 200) {
            let hat = complete_info_value(&p, n as f64, a).to_f64();
            prop_assert!(sol.value.value(a) < hat, "a = {a}");
        }
        let shot = cooperative_cutoff_by_shooting(&p, n as f64, 1e-12).unwrap();
        prop_assert!((shot - sol.a_star).abs() <= 1e-8);
    }

    #[test]
    fn coop_sandwich((rho, theta, n) in valid(1, 6)) {
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let single = solve_cooperative(&p, 1.0).unwrap();
        let team = solve_cooperative(&p, n as f64).unwrap();
        prop_assert!(single.a_star <= team.a_star + 1e-12);
        for a in grid(1.2 * team.a_star, 200) {
            let (u1, un) = (single.value.value(a), team.value.value(a));
            prop_assert!(1.0 <= u1 && u1 <= un + 1e-12, "a = {a}: {u1} vs {un}");
        }
    }

    #[test]
    fn decreasing_returns_approach_complete_information(rho in 0.5f64..4.0, theta in -3.0f64..-1.05) {
        // The gap is hump-shaped in N near θ = −1, so only the tail is monotone.
        let p = ModelParams::from_rho_theta(rho, theta, 1);
        let gaps: Vec<f64> = (1..=20)
            .map(|k| {
                let n = 2f64.powi(k);
                let u = solve_cooperative(&p, n).unwrap().value.value(0.0);
                complete_info_value(&p, n, 0.0).to_f64() - u
            })
            .collect();
        prop_assert!(gaps.iter().all(|&g| g > 0.0));
        let peak = gaps.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        prop_assert!(gaps[peak..].windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        prop_assert!(gaps[19] < 1e-2 * gaps[peak], "{gaps:?}");
    }

    #[test]
    fn strongly_decreasing_returns_close_the_gap_monotonically(rho in 0.5f64..4.0, theta in -6.0f64..-3.0) {
        let p = ModelParams::from_rho_theta(rho, theta, 1);
        let gaps: Vec<f64> = [2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&n| complete_info_value(&p, n, 0.0).to_f64() - solve_cooperative(&p, n).unwrap().value.value(0.0))
            .collect();
        prop_assert!(gaps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "{gaps:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_solves_hjb((rho, theta, n) in valid(2, 8)) {
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let team = n as f64;
        let eq = solve_symmetric(&p, team, 1e-12).unwrap();
        for i in 1..=500 {
            let a = eq.a_tilde * i as f64 / 501.0;
            if (a - eq.a_dagger).abs() < 1e-9 {
                continue;
            }
            let (u, du, d2u) = eq.value.eval(a);
            let b = rho * (d2u - theta * du);
            let res = u - (1.0 + (team - 1.0) * k_dagger(&eq, a) * b + (b - 1.0).max(0.0));
            prop_assert!(res.abs() <= 1e-6, "a = {a}: residual {res}");
            if a > eq.a_dagger {
                prop_assert!((k_dagger(&eq, a) - (u - 1.0) / (team - 1.0)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn symmetric_sandwich_and_encouragement((rho, theta, n) in valid(2, 8)) {
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let eq = solve_symmetric(&p, n as f64, 1e-12).unwrap();
        let single = solve_cooperative(&p, 1.0).unwrap();
        let team = solve_cooperative(&p, n as f64).unwrap();
        prop_assert!(single.a_star < eq.a_tilde && eq.a_tilde < team.a_star);
        for a in grid(1.1 * team.a_star, 300) {
            let u = eq.value.value(a);
            prop_assert!(single.value.value(a) <= u + 1e-10 && u <= team.value.value(a) + 1e-10, "a = {a}");
        }
    }

    #[test]
    fn slack_persists_in_larger_teams(rho in 0.5f64..4.0, theta in -2.0f64..-1.0, n0 in 2u32..6) {
        let p = ModelParams::from_rho_theta(rho, theta, n0);
        let base = solve_symmetric(&p, n0 as f64, 1e-12).unwrap();
        prop_assume!(!base.binding);
        for n in n0 + 1..n0 + 5 {
            let eq = solve_symmetric(&p, n as f64, 1e-12).unwrap();
            prop_assert!(!eq.binding);
            prop_assert!((eq.a_tilde - base.a_tilde).abs() <= 1e-8);
            for a in grid(base.a_tilde, 50) {
                prop_assert!((eq.value.value(a) - base.value.value(a)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn patience_raises_thresholds((rho, theta, n) in valid(2, 6), spread in 1.05f64..1.5) {
        // r grid of five points at and above r = 1/ρ: all satisfy the assumption
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let eqs: Vec<_> = (0..5)
            .map(|i| {
                let q = p.with_r(p.r * spread.powi(i));
                solve_symmetric(&q, n as f64, 1e-12).unwrap()
            })
            .collect();
        for w in eqs.windows(2) {
            prop_assert!(w[1].a_tilde < w[0].a_tilde);
            for a in grid(w[0].a_tilde, 100) {
                prop_assert!(w[1].value.value(a) <= w[0].value.value(a) + 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn asymmetric_invariants(
        (rho, theta, n) in valid(2, 4),
        cuts in prop::collection::vec(0.05f64..0.95, 0..3),
    ) {
        let p = ModelParams::from_rho_theta(rho, theta, n);
        let n = n as usize;
        let trivial = construct_equilibrium(&p, n, &[], 1e-12).unwrap();
        let (lo, hi) = (trivial.average.a_sharp, trivial.average.a_flat);
        let mut interior: Vec<f64> = cuts.iter().map(|c| lo + c * (hi - lo)).collect();
        interior.sort_by(f64::total_cmp);
        interior.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * (hi - lo));
        let eq = construct_equilibrium(&p, n, &interior, 1e-12).unwrap();
        let prof = eq.profile();

        // C⁰ and C¹ at every breakpoint of every payoff
        for u in &eq.payoffs {
            for x in u.breakpoints() {
                if x <= 0.0 || x >= eq.a_flat() {
                    continue;
                }
                let (l, r) = (u.eval_left(x), u.eval(x));
                prop_assert!((l.0 - r.0).abs() <= 1e-6 && (l.1 - r.1).abs() <= 1e-6, "kink at {x}");
            }
        }
        for s in &eq.switch_points {
            prop_assert!(s.value_mismatch <= 1e-6 && s.slope_mismatch <= 1e-6);
        }
        // one unit of effort in the alternation region; continuous total intensity
        for a in grid(eq.a_flat(), 400) {
            if a >= lo && a < hi {
                prop_assert!((prof.intensity(a) - 1.0).abs() <= 1e-12, "a = {a}");
            }
        }
        for a in grid(eq.a_flat(), 400).skip(1).filter(|&a| a < eq.a_flat()) {
            let e = 1e-9;
            prop_assert!((prof.intensity(a - e) - prof.intensity(a)).abs() <= 1e-5, "jump at {a}");
        }
        let rep = check_equilibrium(&EquilibriumView::from_asymmetric(&p, &eq), 1000, 1e-5);
        prop_assert!(rep.all_pass(), "{:?}", rep.summary());
    }
}

#[test]
fn volunteer_is_compensated() {
    let p = ModelParams::from_rho_theta(2.0, -1.0, 2);
    let eq = construct_equilibrium(&p, 2, &[], 1e-12).unwrap();
    let s = &eq.switch_points[0];
    let (a_e, a_flat) = (s.a_m_plus, eq.a_flat());
    let free_rider = 1 - s.player;
    for a in grid(a_flat, 400).filter(|&a| a >= a_e && a < a_flat) {
        prop_assert_free(eq.payoffs[free_rider].value(a), 1.0, 1e-6);
        assert!(eq.payoffs[s.player].value(a) > 1.0, "a = {a}");
    }
    let sym = solve_symmetric(&p, 2.0, 1e-12).unwrap();
    assert!(compare_welfare(&eq, &sym, 2000).average_dominates);
}

fn prop_assert_free(x: f64, y: f64, tol: f64) {
    assert!((x - y).abs() <= tol, "{x} vs {y}");
}

#[test]
fn landscape_classes() {
    assert_eq!(ModelParams::from_rho_theta(1.0, -1.0 + 1e-10, 1).class(), LandscapeClass::classify(-1.0));
    assert_ne!(LandscapeClass::classify(-0.5), LandscapeClass::classify(-1.5));
}

#[test]
fn reports_round_trip() {
    let p = ModelParams::from_rho_theta(2.0, -1.0, 2);
    let coop = solve_cooperative(&p, 2.0).unwrap();
    let rep = check_equilibrium(&EquilibriumView::from_cooperative(&p, &coop, 2), 300, 1e-5);
    let back: VerificationReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
}
