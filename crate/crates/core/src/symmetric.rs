//! The symmetric Markov perfect equilibrium.
//!
//! All players share one action `k†(a)`. Above a threshold `ã` nobody explores.
//! Below it each player is indifferent, `β(a,U) = 1`, and the payoff pins down
//! the action through `U = 1 + (N−1)k†`. If that interior solution would need
//! `k† > 1` near zero gap, the constraint binds: every player explores fully on
//! `[0, a†)`, where the payoff solves `β = U/N`.
//!
//! Writing `Z = ã − a`, the interior payoff is `1 + Φ_θ(Z)/ρ` with
//! `Φ_θ = ∫φ_θ`, so both thresholds reduce to one-dimensional root finds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quadratic_roots, Extended, ModelParams};
use crate::odekit::{phi_theta, phi_theta_integral, shoot_scalar, PiecewiseValue, Segment, SegmentForm};
use crate::planner::{solve_cooperative, SweepAxis};
use crate::profile::{Strategy, StrategyForm, StrategyProfile};

/// Tolerance of the binding/non-binding comparison `U(0) ≤ N`.
pub const BINDING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricEquilibrium {
    pub team: f64,
    pub rho: f64,
    pub theta: f64,
    /// Stopping threshold `ã`.
    pub a_tilde: f64,
    /// Full-intensity threshold `a†` (zero when the constraint does not bind).
    pub a_dagger: f64,
    pub binding: bool,
    /// Set when the team is past the finiteness boundary; only the
    /// non-binding construction is produced there.
    pub assumption_violated: bool,
    pub value: PiecewiseValue,
    pub strategy: Strategy,
}

impl SymmetricEquilibrium {
    /// Everyone plays `k†`. The team size must be integral.
    pub fn profile(&self) -> StrategyProfile {
        StrategyProfile::symmetric(self.strategy.clone(), self.team.round() as usize)
    }
}

/// Smallest `Z > 0` with `ρ + Φ_θ(Z) − φ_θ(Z) = 0`: the stopping threshold
/// if the resource constraint does not bind. `None` when `ρ > ρ̂(θ)`.
pub fn nonbinding_threshold(rho: f64, theta: f64, tol: f64) -> Option<f64> {
    let h = |z: f64| rho + phi_theta_integral(theta, z) - phi_theta(theta, z);
    if theta <= -1.0 {
        // h is strictly decreasing without bound
        return shoot_scalar(h, 0.0, rho.max(1.0), tol, 200).ok();
    }
    // h falls until φ_θ(Z) = e^{−θZ}, then rises
    let z_min = if theta.abs() < 1e-12 { 1.0 } else { theta.ln_1p() / theta };
    if h(z_min) > 0.0 {
        return None;
    }
    shoot_scalar(h, 0.0, z_min, tol, 0).ok()
}

/// `k†(a)`: one below `a†`, `Φ_θ(ã−a)/((N−1)ρ)` on `[a†, ã)`, zero beyond.
pub fn k_dagger(eq: &SymmetricEquilibrium, a: f64) -> f64 {
    if a >= eq.a_tilde {
        0.0
    } else if a < eq.a_dagger || eq.team <= 1.0 {
        1.0
    } else {
        phi_theta_integral(eq.theta, eq.a_tilde - a) / ((eq.team - 1.0) * eq.rho)
    }
}

pub fn solve_symmetric(params: &ModelParams, team: f64, tol: f64) -> Result<SymmetricEquilibrium> {
    params.check_primitives()?;
    if !(team >= 1.0) || !team.is_finite() {
        return Err(Error::InvalidPrimitive(format!("team size must be ≥ 1, got {team}")));
    }
    let (rho, theta) = (params.rho(), params.theta());
    if team == 1.0 {
        // a lone player simply follows the single-agent cutoff rule
        let coop = solve_cooperative(params, 1.0)?;
        return Ok(SymmetricEquilibrium {
            team,
            rho,
            theta,
            a_tilde: coop.a_star,
            a_dagger: coop.a_star,
            binding: true,
            assumption_violated: false,
            strategy: Strategy::cutoff(coop.a_star),
            value: coop.value,
        });
    }
    let violated = !params.satisfies_assumption(team);

    if let Some(z) = nonbinding_threshold(rho, theta, tol) {
        let u0 = 1.0 + phi_theta_integral(theta, z) / rho;
        if u0 <= team + BINDING_TOL {
            return finish(params, team, z, 0.0, None, violated);
        }
    }

    params.validate(team)?;
    // At a†: U = N, so Φ_θ(ã − a†) = (N−1)ρ.
    let target = (team - 1.0) * rho;
    let z_dag = shoot_scalar(|z| phi_theta_integral(theta, z) - target, 0.0, 1.0, tol, 200)?;
    let du_dag = -phi_theta(theta, z_dag) / rho;
    let (g1, g2) = quadratic_roots(rho, theta, team);
    let c2 = (du_dag - g1 * team) / (g2 - g1);
    let c1 = team - c2;
    let reflect = |x: f64| c1 * (1.0 + g1) * (-g1 * x).exp() + c2 * (1.0 + g2) * (-g2 * x).exp();
    if reflect(0.0) <= 0.0 {
        return Err(Error::ConvergenceFailure(
            "binding branch selected but reflection already holds at a† = 0".into(),
        ));
    }
    let a_dag = shoot_scalar(reflect, 0.0, 1.0, tol, 200)?;
    let closed = (-c2 * (1.0 + g2) / (c1 * (1.0 + g1))).ln() / (g2 - g1);
    if (closed - a_dag).abs() > 1e-6 * a_dag.max(1.0) {
        return Err(Error::ConvergenceFailure(format!(
            "full-intensity threshold {a_dag} disagrees with closed form {closed}"
        )));
    }
    let full = SegmentForm::ExpFamily {
        offset: 0.0,
        c1,
        c2,
        gamma1: g1,
        gamma2: g2,
        anchor: a_dag,
    };
    finish(params, team, a_dag + z_dag, a_dag, Some(full), violated)
}

fn finish(
    params: &ModelParams,
    team: f64,
    a_tilde: f64,
    a_dagger: f64,
    full: Option<SegmentForm>,
    violated: bool,
) -> Result<SymmetricEquilibrium> {
    let (rho, theta) = (params.rho(), params.theta());
    let interior = SegmentForm::interior_through(theta, rho, a_tilde, 1.0, 0.0);
    let mut segments = Vec::new();
    let mut strategy = Strategy::zero();
    if let Some(f) = full {
        segments.push(Segment::new(0.0, a_dagger, f));
        strategy.push(0.0, a_dagger, StrategyForm::Constant { k: 1.0 });
    }
    segments.push(Segment::new(a_dagger, a_tilde, interior.clone()));
    strategy.push(
        a_dagger,
        a_tilde,
        StrategyForm::PayoffAffine {
            payoff: interior,
            shift: 1.0,
            scale: 1.0 / (team - 1.0),
        },
    );
    let eq = SymmetricEquilibrium {
        team,
        rho,
        theta,
        a_tilde,
        a_dagger,
        binding: a_dagger > 0.0,
        assumption_violated: violated,
        value: PiecewiseValue::new(segments, a_tilde)?,
        strategy,
    };
    check_invariants(params, &eq)?;
    Ok(eq)
}

fn check_invariants(params: &ModelParams, eq: &SymmetricEquilibrium) -> Result<()> {
    let fail = |what: String| Err(Error::ConvergenceFailure(format!("symmetric equilibrium: {what}")));
    let (u, du, _) = eq.value.eval_left(eq.a_tilde);
    if (u - 1.0).abs() > 1e-8 || du.abs() > 1e-8 {
        return fail(format!("no smooth pasting at ã: u = {u}, u' = {du}"));
    }
    let (u0, du0, _) = eq.value.eval(0.0);
    if (u0 + du0).abs() > 1e-8 {
        return fail(format!("normal reflection residual {}", u0 + du0));
    }
    let (dv, dd) = eq.value.continuity_gaps();
    if dv > 1e-8 || dd > 1e-6 {
        return fail(format!("continuity gaps value {dv:e}, slope {dd:e}"));
    }
    for i in 1..100 {
        let a = eq.a_dagger + (eq.a_tilde - eq.a_dagger) * i as f64 / 100.0;
        let k = eq.strategy.eval(a);
        if !(k > 0.0 && k < 1.0) {
            return fail(format!("interior action {k} at a = {a}"));
        }
    }
    if !eq.assumption_violated {
        let single = solve_cooperative(params, 1.0)?.a_star;
        let team = solve_cooperative(params, eq.team)?.a_star;
        if !(eq.a_tilde > single && eq.a_tilde < team) {
            return fail(format!("ã = {} outside ({single}, {team})", eq.a_tilde));
        }
    }
    Ok(())
}

/// One row of a symmetric sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymRow {
    pub n_players: f64,
    pub r: f64,
    pub rho: f64,
    pub theta: f64,
    pub a_tilde: Extended,
    pub a_dagger: Extended,
    pub binding: bool,
    pub u0: Extended,
    pub k0: f64,
    pub assumption_violated: bool,
}

pub const SYM_CSV_HEADER: [&str; 10] = [
    "n_players",
    "r",
    "rho",
    "theta",
    "a_tilde",
    "a_dagger",
    "binding",
    "u0",
    "k0",
    "assumption_violated",
];

/// Thresholds and payoffs over an axis. Cells with no equilibrium (past the
/// finiteness boundary with a binding constraint) report infinite thresholds.
pub fn symmetric_sweep(params: &ModelParams, axis: &SweepAxis, tol: f64) -> Vec<SymRow> {
    axis.cells(params)
        .into_par_iter()
        .map(|(p, n)| match solve_symmetric(&p, n, tol) {
            Ok(eq) => SymRow {
                n_players: n,
                r: p.r,
                rho: p.rho(),
                theta: p.theta(),
                a_tilde: Extended::Finite(eq.a_tilde),
                a_dagger: Extended::Finite(eq.a_dagger),
                binding: eq.binding,
                u0: Extended::Finite(eq.value.value(0.0)),
                k0: k_dagger(&eq, 0.0),
                assumption_violated: eq.assumption_violated,
            },
            Err(_) => SymRow {
                n_players: n,
                r: p.r,
                rho: p.rho(),
                theta: p.theta(),
                a_tilde: Extended::Infinite,
                a_dagger: Extended::Infinite,
                binding: true,
                u0: Extended::Infinite,
                k0: 1.0,
                assumption_violated: !p.satisfies_assumption(n),
            },
        })
        .collect()
}
