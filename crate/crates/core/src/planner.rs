//! The complete-information benchmark and the cooperative (planner) solution.
//!
//! A team of `N` that pools its resources explores at full intensity until the
//! gap reaches a cutoff `a*`, and stops beyond it. The team payoff solves
//! `β(a,u) = u/N` below the cutoff, so it is a two-term exponential in the roots
//! of `γ(γ−θ) = 1/(Nρ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quadratic_roots, Extended, LandscapeClass, ModelParams};
use crate::odekit::{shoot_scalar, PiecewiseValue, Segment, SegmentForm};
use crate::profile::{Strategy, StrategyProfile};

/// Ex-ante average payoff when the whole landscape is known, `Û(a)`.
pub fn complete_info_value(params: &ModelParams, team: f64, a: f64) -> Extended {
    let lambda = params.lambda(team);
    if lambda > 1.0 {
        Extended::Finite(1.0 + (-lambda * a).exp() / (lambda - 1.0))
    } else {
        Extended::Infinite
    }
}

/// Cutoff in closed form, `(ln(1+1/γ2) − ln(1+1/γ1))/(γ2−γ1)`; requires `γ1 < −1`.
pub fn cooperative_cutoff_formula(rho: f64, theta: f64, team: f64) -> f64 {
    let (g1, g2) = quadratic_roots(rho, theta, team);
    ((1.0 / g2).ln_1p() - (1.0 / g1).ln_1p()) / (g2 - g1)
}

/// `U(0) + U'(0)` for the team payoff pasted smoothly at candidate cutoff `x`.
/// Vanishes exactly at `a*`.
pub fn smooth_pasting_residual(rho: f64, theta: f64, team: f64, x: f64) -> f64 {
    let (g1, g2) = quadratic_roots(rho, theta, team);
    let (c1, c2) = (g2 / (g2 - g1), -g1 / (g2 - g1));
    c1 * (1.0 + g1) * (-g1 * x).exp() + c2 * (1.0 + g2) * (-g2 * x).exp()
}

fn smooth_pasting_slope(rho: f64, theta: f64, team: f64, x: f64) -> f64 {
    let (g1, g2) = quadratic_roots(rho, theta, team);
    let (c1, c2) = (g2 / (g2 - g1), -g1 / (g2 - g1));
    -g1 * c1 * (1.0 + g1) * (-g1 * x).exp() - g2 * c2 * (1.0 + g2) * (-g2 * x).exp()
}

/// Cutoff found by shooting on the reflection condition instead of the formula.
pub fn cooperative_cutoff_by_shooting(params: &ModelParams, team: f64, tol: f64) -> Result<f64> {
    let v = params.validate(team)?;
    shoot_scalar(|x| smooth_pasting_residual(v.rho, v.theta, team, x), 0.0, 1.0, tol, 60)
}

/// The planner's cutoff rule and team payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperativeSolution {
    pub team: f64,
    pub rho: f64,
    pub theta: f64,
    pub class: LandscapeClass,
    pub a_star: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Average (per-player) normalized payoff `U*`.
    pub value: PiecewiseValue,
}

pub fn solve_cooperative(params: &ModelParams, team: f64) -> Result<CooperativeSolution> {
    let v = params.validate(team)?;
    let (g1, g2) = quadratic_roots(v.rho, v.theta, team);
    let formula = cooperative_cutoff_formula(v.rho, v.theta, team);
    // one Newton step on the pasting residual guards the formula
    let step = -smooth_pasting_residual(v.rho, v.theta, team, formula) / smooth_pasting_slope(v.rho, v.theta, team, formula);
    if !(step.abs() <= 1e-8) {
        return Err(Error::ConvergenceFailure(format!(
            "cooperative cutoff formula disagrees with smooth pasting by {step:e}"
        )));
    }
    let a_star = formula + step;
    let form = SegmentForm::ExpFamily {
        offset: 0.0,
        c1: g2 / (g2 - g1),
        c2: -g1 / (g2 - g1),
        gamma1: g1,
        gamma2: g2,
        anchor: a_star,
    };
    let value = PiecewiseValue::new(vec![Segment::new(0.0, a_star, form)], a_star)?;
    Ok(CooperativeSolution {
        team,
        rho: v.rho,
        theta: v.theta,
        class: v.class,
        a_star,
        gamma1: g1,
        gamma2: g2,
        value,
    })
}

impl CooperativeSolution {
    /// Everyone explores fully below `a*`.
    pub fn profile(&self, n_players: usize) -> StrategyProfile {
        StrategyProfile::symmetric(Strategy::cutoff(self.a_star), n_players)
    }
}

/// Law of the long-run best quality `s̄` under a cutoff-`ā` rule started at
/// `(a0, s0)`: `s̄ = max{s0, s0 + M − a0}` with `M` exponential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRunDistribution {
    pub s0: f64,
    pub a0: f64,
    /// Mean of `M`, `(e^{θā}−1)/θ` (`ā` at `θ = 0`).
    pub mean_m: f64,
    /// `P(s̄ = s0) = P(M ≤ a0)`.
    pub point_mass: f64,
}

impl LongRunDistribution {
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.s0 {
            0.0
        } else if self.mean_m == 0.0 {
            1.0
        } else {
            1.0 - (-(x - self.s0 + self.a0) / self.mean_m).exp()
        }
    }

    /// Law of `s̄ − s0` conditional on `s̄ > s0`: exponential with mean `mean_m`
    /// (memorylessness of `M` past `a0`).
    pub fn tail_cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            1.0 - (-y / self.mean_m).exp()
        }
    }
}

pub fn longrun_standard_distribution(theta: f64, a_bar: f64, a0: f64, s0: f64) -> LongRunDistribution {
    let mean_m = if a_bar == 0.0 { 0.0 } else { crate::odekit::e1(theta, a_bar) };
    let point_mass = if mean_m == 0.0 { 1.0 } else { 1.0 - (-a0 / mean_m).exp() };
    LongRunDistribution {
        s0,
        a0,
        mean_m,
        point_mass,
    }
}

/// Axis of a comparative-statics sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Team sizes (real-valued sizes are allowed).
    Players(Vec<f64>),
    /// Discount rates at the parameter set's team size.
    Discount(Vec<f64>),
}

impl SweepAxis {
    /// `(params, team)` for each cell in order.
    pub fn cells(&self, base: &ModelParams) -> Vec<(ModelParams, f64)> {
        match self {
            SweepAxis::Players(ns) => ns.iter().map(|&n| (*base, n)).collect(),
            SweepAxis::Discount(rs) => rs.iter().map(|&r| (base.with_r(r), base.n_players as f64)).collect(),
        }
    }
}

/// One row of a cooperative sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopRow {
    pub n_players: f64,
    pub r: f64,
    pub rho: f64,
    pub theta: f64,
    pub a_star: Extended,
    pub u_star_0: Extended,
    pub u_hat_0: Extended,
    pub class: LandscapeClass,
}

pub const COOP_CSV_HEADER: [&str; 8] = ["n_players", "r", "rho", "theta", "a_star", "u_star_0", "u_hat_0", "class"];

/// Cutoff and payoffs over a parameter axis; cells beyond the finiteness
/// boundary carry `Extended::Infinite`.
pub fn coop_sweep(params: &ModelParams, axis: &SweepAxis) -> Vec<CoopRow> {
    axis.cells(params)
        .into_par_iter()
        .map(|(p, n)| {
            let (a_star, u_star_0) = match solve_cooperative(&p, n) {
                Ok(sol) => (Extended::Finite(sol.a_star), Extended::Finite(sol.value.value(0.0))),
                Err(_) => (Extended::Infinite, Extended::Infinite),
            };
            CoopRow {
                n_players: n,
                r: p.r,
                rho: p.rho(),
                theta: p.theta(),
                a_star,
                u_star_0,
                u_hat_0: complete_info_value(&p, n, 0.0),
                class: p.class(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(n: u32) -> ModelParams {
        ModelParams::from_rho_theta(2.0, -1.0, n)
    }

    #[test]
    fn complete_information_value() {
        assert_eq!(complete_info_value(&ModelParams::from_rho_theta(1.0, 0.0, 1), 1.0, 0.0), Extended::Infinite);
        let u = complete_info_value(&reference(2), 2.0, 0.0).finite().unwrap();
        assert!((u - 5.0).abs() < 1e-12);
        let far = complete_info_value(&reference(2), 2.0, 80.0).finite().unwrap();
        assert!((far - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_conditions_hold() {
        for n in 1..6 {
            let sol = solve_cooperative(&reference(n), n as f64).unwrap();
            let (u, du, _) = sol.value.eval_left(sol.a_star);
            assert!((u - 1.0).abs() < 1e-12 && du.abs() < 1e-12);
            let (u0, du0, _) = sol.value.eval(0.0);
            assert!((u0 + du0).abs() < 1e-12);
            for i in 1..20 {
                let a = sol.a_star * i as f64 / 20.0;
                let b = crate::odekit::beta_right(&sol.value, a, sol.rho, sol.theta);
                assert!((b - sol.value.value(a) / n as f64).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn shooting_matches_formula() {
        let p = reference(2);
        let shot = cooperative_cutoff_by_shooting(&p, 2.0, 1e-13).unwrap();
        let sol = solve_cooperative(&p, 2.0).unwrap();
        assert!((shot - sol.a_star).abs() < 1e-10);
    }

    #[test]
    fn unit_payoff_beyond_cutoff() {
        let sol = solve_cooperative(&reference(2), 2.0).unwrap();
        assert_eq!(sol.value.value(sol.a_star), 1.0);
        assert_eq!(sol.value.value(sol.a_star + 3.0), 1.0);
    }

    #[test]
    fn assumption_failure_propagates() {
        assert!(matches!(
            solve_cooperative(&ModelParams::from_rho_theta(1.0, 0.5, 1), 1.0),
            Err(Error::AssumptionViolated { .. })
        ));
    }

    #[test]
    fn longrun_law() {
        let d = longrun_standard_distribution(0.0, 0.0, 0.3, 1.0);
        assert_eq!(d.point_mass, 1.0);
        assert_eq!(d.cdf(1.0), 1.0);
        let d = longrun_standard_distribution(0.0, 2.0, 0.0, 0.0);
        assert!((d.mean_m - 2.0).abs() < 1e-15);
        let d = longrun_standard_distribution(-1.0, 2.0, 0.0, 0.0);
        assert!((d.mean_m - (1.0 - (-2f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sweep_over_players() {
        let rows = coop_sweep(&reference(1), &SweepAxis::Players((1..=8).map(f64::from).collect()));
        assert_eq!(rows.len(), 8);
        for w in rows.windows(2) {
            assert!(w[1].a_star.to_f64() > w[0].a_star.to_f64());
        }
        let rows = coop_sweep(&ModelParams::from_rho_theta(1.0, 0.5, 1), &SweepAxis::Players(vec![1.0, 2.0]));
        assert!(rows.iter().all(|r| r.a_star.is_infinite() && r.u_star_0.is_infinite()));
    }
}
