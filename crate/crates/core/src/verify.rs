//! Independent checks on constructed equilibria.
//!
//! [`check_equilibrium`] evaluates the equilibrium conditions (normal
//! reflection, smooth pasting, `C¹` payoffs, the HJB equation with mutual best
//! responses) on a grid, plus the qualitative diagnostics. [`dp_best_response`]
//! is a separate oracle that knows nothing about the closed forms: it solves a
//! discretised control problem for one player against given opponents.

use serde::{Deserialize, Serialize};

use crate::asymmetric::AsymmetricEquilibrium;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::odekit::{beta_right, integrate_ivp, IvpOptions, PiecewiseValue};
use crate::planner::{solve_cooperative, CooperativeSolution};
use crate::profile::StrategyProfile;
use crate::symmetric::SymmetricEquilibrium;

/// A measured quantity with the grid and tolerance it was checked at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub tol: f64,
    pub grid: usize,
    pub pass: bool,
}

impl Measured {
    fn at_most(value: f64, tol: f64, grid: usize) -> Self {
        Self {
            value,
            tol,
            grid,
            pass: value <= tol,
        }
    }
}

/// β is infinite at a payoff kink; JSON has no infinities, so they travel as strings.
mod signed_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad number {s}"))),
        }
    }
}

/// A gap at which a player's action is not a best response to its own payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrViolation {
    pub a: f64,
    pub player: usize,
    #[serde(with = "signed_inf")]
    pub beta: f64,
    pub action: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub grid_size: usize,
    pub tol: f64,
    pub normal_reflection: Measured,
    pub smooth_pasting: Measured,
    pub c1_continuity: Measured,
    pub hjb_max_residual: Measured,
    pub best_response_violations: Vec<BrViolation>,
    /// Largest shortfall of a player's payoff below the single-agent value.
    pub payoff_lower: Measured,
    /// Largest excess of the average payoff over the cooperative value.
    pub payoff_upper: Measured,
    /// Stopping threshold minus the single-agent cutoff; passes when positive.
    pub encouragement: Measured,
    pub everyone_explores: bool,
    pub non_cutoff: bool,
}

impl VerificationReport {
    pub fn best_response_pass(&self) -> bool {
        self.best_response_violations.is_empty()
    }

    pub fn all_pass(&self) -> bool {
        self.normal_reflection.pass
            && self.smooth_pasting.pass
            && self.c1_continuity.pass
            && self.hjb_max_residual.pass
            && self.best_response_pass()
            && self.payoff_lower.pass
            && self.payoff_upper.pass
            && self.encouragement.pass
            && self.everyone_explores
            && self.non_cutoff
    }

    /// `(condition, pass)` pairs in report order.
    pub fn summary(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("normal_reflection", self.normal_reflection.pass),
            ("smooth_pasting", self.smooth_pasting.pass),
            ("c1_continuity", self.c1_continuity.pass),
            ("hjb_residual", self.hjb_max_residual.pass),
            ("best_response", self.best_response_pass()),
            ("payoff_lower", self.payoff_lower.pass),
            ("payoff_upper", self.payoff_upper.pass),
            ("encouragement", self.encouragement.pass),
            ("everyone_explores", self.everyone_explores),
            ("non_cutoff", self.non_cutoff),
        ]
    }
}

/// Strategies and payoffs of a candidate equilibrium, whatever built it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumView {
    pub params: ModelParams,
    pub profile: StrategyProfile,
    pub payoffs: Vec<PiecewiseValue>,
    pub stop: f64,
}

impl EquilibriumView {
    pub fn from_symmetric(params: &ModelParams, eq: &SymmetricEquilibrium) -> Self {
        let n = eq.team.round() as usize;
        Self {
            params: *params,
            profile: eq.profile(),
            payoffs: vec![eq.value.clone(); n],
            stop: eq.a_tilde,
        }
    }

    pub fn from_asymmetric(params: &ModelParams, eq: &AsymmetricEquilibrium) -> Self {
        Self {
            params: *params,
            profile: eq.profile(),
            payoffs: eq.payoffs.clone(),
            stop: eq.a_flat(),
        }
    }

    /// The planner's profile, read as a noncooperative candidate; each player
    /// receives the average team payoff.
    pub fn from_cooperative(params: &ModelParams, sol: &CooperativeSolution, n: usize) -> Self {
        Self {
            params: *params,
            profile: sol.profile(n),
            payoffs: vec![sol.value.clone(); n],
            stop: sol.a_star,
        }
    }

    /// Any profile whose total intensity stays positive below its stopping
    /// point; payoffs come from [`profile_payoffs`].
    pub fn from_profile(params: &ModelParams, profile: StrategyProfile, tol: f64) -> Result<Self> {
        let payoffs = profile_payoffs(params, &profile, tol)?;
        Ok(Self {
            params: *params,
            stop: profile.stop(),
            profile,
            payoffs,
        })
    }
}

/// Each player's payoff under `profile`, from the linear equation
/// `u = 1 − k_n + K·β(a,u)` with `u = 1` from the stopping point on and normal
/// reflection at zero. The terminal slope is found by linear shooting.
pub fn profile_payoffs(params: &ModelParams, profile: &StrategyProfile, tol: f64) -> Result<Vec<PiecewiseValue>> {
    params.check_primitives()?;
    let (rho, theta) = (params.rho(), params.theta());
    let stop = profile.stop();
    if stop <= 0.0 {
        return Ok(vec![PiecewiseValue::constant_one(); profile.len()]);
    }
    let mut bps: Vec<f64> = profile.players.iter().flat_map(|s| s.breakpoints()).filter(|&b| b < stop).collect();
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bps.dedup();
    let opts = IvpOptions {
        breakpoints: bps,
        ..IvpOptions::with_tol(tol)
    };
    for i in 0..=1000 {
        let a = stop * i as f64 / 1000.0 * (1.0 - 1e-12);
        if profile.intensity(a) <= 1e-9 {
            return Err(Error::InvalidPrimitive(format!(
                "total intensity vanishes at {a} below the stopping point {stop}"
            )));
        }
    }
    (0..profile.len())
        .map(|n| {
            let rhs = |a: f64, u: f64, du: f64| {
                // the start sits on the stopping point, where K has already dropped to zero
                let a = a.min(stop - 1e-12 * stop.max(1.0));
                let k = profile.intensity(a);
                (u - 1.0 + profile.players[n].eval(a)) / (rho * k) + theta * du
            };
            let reflect = |s: f64| -> Result<f64> {
                let seg = integrate_ivp(rhs, stop, 1.0, s, 0.0, &opts)?;
                let (u, du, _) = seg.eval(0.0);
                Ok(u + du)
            };
            let (r0, r1) = (reflect(0.0)?, reflect(-1.0)?);
            let s = -r0 / (r0 - r1);
            let seg = integrate_ivp(rhs, stop, 1.0, s, 0.0, &opts)?;
            PiecewiseValue::new(vec![seg], stop)
        })
        .collect()
}

/// Evaluates the equilibrium conditions on `grid_size` uniform points in
/// `[0, stop)` plus every breakpoint `± 1e−9·max(1, a)`.
pub fn check_equilibrium(view: &EquilibriumView, grid_size: usize, tol: f64) -> VerificationReport {
    let p = &view.params;
    let (rho, theta) = (p.rho(), p.theta());
    let n_players = view.profile.len();
    let stop = view.stop;
    let mut pts: Vec<f64> = (0..grid_size).map(|i| stop * i as f64 / grid_size as f64).collect();
    let mut kinks: Vec<f64> = view.profile.players.iter().flat_map(|s| s.breakpoints()).collect();
    for u in &view.payoffs {
        kinks.extend(u.breakpoints());
    }
    kinks.retain(|&b| b > 0.0 && b <= stop);
    kinks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    kinks.dedup();
    for &b in &kinks {
        let eps = 1e-9 * b.max(1.0);
        pts.push(b - eps);
        if b + eps < stop {
            pts.push(b + eps);
        }
    }
    pts.retain(|&a| (0.0..stop).contains(&a));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let grid = pts.len();

    let mut refl = 0.0f64;
    let mut paste = 0.0f64;
    let mut c1 = 0.0f64;
    let mut hjb = 0.0f64;
    let mut violations = Vec::new();
    for (n, u) in view.payoffs.iter().enumerate() {
        let (u0, du0, _) = u.eval(0.0);
        refl = refl.max((u0 + du0).abs());
        let (us, dus, _) = u.eval_left(stop);
        paste = paste.max((us - 1.0).abs()).max(dus.abs());
        let (dv, dd) = u.continuity_gaps();
        c1 = c1.max(dv).max(dd);
        let strat = &view.profile.players[n];
        for &a in &pts {
            let b = beta_right(u, a, rho, theta);
            let k_others = view.profile.others_intensity(n, a);
            let k = strat.eval(a);
            hjb = hjb.max((u.value(a) - (1.0 + k_others * b + (b - 1.0).max(0.0))).abs());
            if (b > 1.0 + tol && k < 1.0 - 1e-9) || (b < 1.0 - tol && k > 1e-9) {
                violations.push(BrViolation {
                    a,
                    player: n,
                    beta: b,
                    action: k,
                });
            }
        }
        // a slope jump is a point mass in u'': β = ±∞ there
        for &b in kinks.iter() {
            let jump = u.eval(b).1 - u.eval_left(b).1;
            if jump.abs() <= tol {
                continue;
            }
            let eps = 1e-9 * b.max(1.0);
            let (kl, kr) = (strat.eval(b - eps), strat.eval(b + eps));
            let bad = if jump > 0.0 { kl.min(kr) < 1.0 - 1e-9 } else { kl.max(kr) > 1e-9 };
            if bad {
                violations.push(BrViolation {
                    a: b,
                    player: n,
                    beta: jump.signum() * f64::INFINITY,
                    action: kl,
                });
            }
        }
    }

    let mut lower = 0.0f64;
    let mut upper = 0.0f64;
    let single = solve_cooperative(p, 1.0).ok();
    let team = solve_cooperative(p, n_players as f64).ok();
    for &a in &pts {
        if let Some(s) = &single {
            let floor = s.value.value(a);
            for u in &view.payoffs {
                lower = lower.max(floor - u.value(a));
            }
        }
        if let Some(t) = &team {
            let mean = view.payoffs.iter().map(|u| u.value(a)).sum::<f64>() / n_players as f64;
            upper = upper.max(mean - t.value.value(a));
        }
    }
    let margin = single.as_ref().map_or(f64::INFINITY, |s| stop - s.a_star);
    let everyone_explores = view
        .profile
        .players
        .iter()
        .all(|s| s.pieces.iter().any(|pc| (0..=20).any(|i| s.eval(pc.a_lo + (pc.a_hi - pc.a_lo) * i as f64 / 21.0) > 0.0)));
    VerificationReport {
        grid_size: grid,
        tol,
        normal_reflection: Measured::at_most(refl, tol, grid),
        smooth_pasting: Measured::at_most(paste, tol, grid),
        c1_continuity: Measured::at_most(c1, tol, grid),
        hjb_max_residual: Measured::at_most(hjb, tol, grid),
        best_response_violations: violations,
        payoff_lower: Measured::at_most(lower, tol, grid),
        payoff_upper: Measured::at_most(upper, tol, grid),
        encouragement: Measured {
            value: margin,
            tol: 0.0,
            grid,
            pass: margin > 0.0,
        },
        everyone_explores,
        non_cutoff: view.profile.players.iter().any(|s| !s.is_cutoff()),
    }
}

/// Discretisation of the DP oracle. `dt = None` picks the largest stable step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpGrid {
    pub a_max: f64,
    pub da: f64,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub da: f64,
    pub dt: f64,
    pub a: Vec<f64>,
    pub u: Vec<f64>,
    /// Greedy action per grid point, `0` or `1`.
    pub policy: Vec<u8>,
    pub iterations: usize,
}

impl DpSolution {
    /// Linear interpolation of the value.
    pub fn value(&self, a: f64) -> f64 {
        let x = (a / self.da).clamp(0.0, (self.u.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.u.len() - 2);
        let t = x - i as f64;
        self.u[i] * (1.0 - t) + self.u[i + 1] * t
    }

    /// Start of the first run of zeros after the initial explore region.
    pub fn cutoff(&self) -> f64 {
        self.policy.iter().position(|&k| k == 0).map_or(f64::INFINITY, |i| self.a[i])
    }

    /// Sup-norm distance to `reference` on `[0, a_hi]`.
    pub fn sup_gap(&self, reference: impl Fn(f64) -> f64, a_hi: f64) -> f64 {
        self.a.iter().zip(&self.u).filter(|(a, _)| **a <= a_hi).map(|(a, u)| (u - reference(*a)).abs()).fold(0.0, f64::max)
    }
}

/// Best response of one player against opponents with total intensity
/// `opponents(a)`, by policy iteration on the discrete-time reflected chain.
///
/// The gap moves one cell up or down with central-difference probabilities.
/// The normalised payoff below zero is `e^{ΔS}` times the payoff at the
/// mirrored cell, which makes the scheme consistent with normal reflection.
pub fn dp_best_response<F: Fn(f64) -> f64>(params: &ModelParams, opponents: F, grid: DpGrid) -> Result<DpSolution> {
    params.check_primitives()?;
    let DpGrid { a_max, da, dt } = grid;
    let (mu, sigma, r) = (params.mu, params.sigma, params.r);
    if !(da > 0.0 && a_max > 2.0 * da) {
        return Err(Error::GridTooCoarse(format!("Δa = {da}, a_max = {a_max}")));
    }
    if let Ok(sol) = solve_cooperative(params, params.n_players as f64) {
        if a_max < 2.0 * sol.a_star {
            return Err(Error::GridTooCoarse(format!("a_max = {a_max} below twice the team cutoff {}", sol.a_star)));
        }
    }
    if mu.abs() * da > sigma * sigma {
        return Err(Error::GridTooCoarse(format!("Δa = {da} too large for drift {mu}")));
    }
    let m = (a_max / da).round() as usize;
    let a: Vec<f64> = (0..=m).map(|i| i as f64 * da).collect();
    let others: Vec<f64> = a.iter().map(|&x| opponents(x)).collect();
    let k_max = 1.0 + others.iter().cloned().fold(0.0, f64::max);
    let dt_max = (da * da / (sigma * sigma * k_max)).min(if mu == 0.0 { f64::INFINITY } else { da / (mu.abs() * k_max) });
    let dt = match dt {
        Some(t) if t <= dt_max * (1.0 + 1e-12) && t > 0.0 => t,
        Some(t) => return Err(Error::GridTooCoarse(format!("Δt = {t} exceeds the stable bound {dt_max}"))),
        None => dt_max,
    };
    let disc = (-r * dt).exp();
    let flow = -(-r * dt).exp_m1();
    let ghost = (2.0 * da).exp();
    let probs = |i: usize, k: u8| {
        let kk = k as f64 + others[i];
        let diff = sigma * sigma * kk / 2.0;
        let drift = -mu * kk;
        let up = dt * (diff + da * drift / 2.0) / (da * da);
        let dn = dt * (diff - da * drift / 2.0) / (da * da);
        (up, dn)
    };
    // E[u(next)] with reflection ghost and a reflecting top
    let expect = |u: &[f64], i: usize, k: u8| {
        let (up, dn) = probs(i, k);
        let ui = u[i];
        let upv = if i == m { u[m] } else { u[i + 1] };
        let dnv = if i == 0 { ghost * u[1] } else { u[i - 1] };
        up * upv + dn * dnv + (1.0 - up - dn) * ui
    };

    // start from full exploration: improvement then only has to carve out the stopping region
    let mut policy: Vec<u8> = vec![1; m + 1];
    let mut u = vec![1.0; m + 1];
    let mut iterations = 0;
    loop {
        iterations += 1;
        // evaluate: (1 − D·P_k) u = flow·(1 − k), tridiagonal
        let mut lower = vec![0.0; m + 1];
        let mut diag = vec![0.0; m + 1];
        let mut upper = vec![0.0; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for i in 0..=m {
            let k = policy[i];
            let (up, dn) = probs(i, k);
            diag[i] = 1.0 - disc * (1.0 - up - dn);
            rhs[i] = flow * (1.0 - k as f64);
            if i == m {
                diag[i] -= disc * up;
            } else {
                upper[i] = -disc * up;
            }
            if i == 0 {
                // ghost couples state 0 to state 1
                upper[i] -= disc * dn * ghost;
            } else {
                lower[i] = -disc * dn;
            }
        }
        let new_u = thomas(&lower, &diag, &upper, &rhs);
        let change = new_u.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        u = new_u;
        // improve, keeping the incumbent action on ties
        let mut changed = false;
        for i in 0..=m {
            let val = |k: u8| flow * (1.0 - k as f64) + disc * expect(&u, i, k);
            let (v0, v1) = (val(0), val(1));
            let best = if v1 > v0 + 1e-15 {
                1
            } else if v0 > v1 + 1e-15 {
                0
            } else {
                policy[i]
            };
            if best != policy[i] {
                policy[i] = best;
                changed = true;
            }
        }
        if (!changed && change < 1e-9) || (!changed && iterations > 1) {
            break;
        }
        if iterations > 10_000 {
            return Err(Error::MaxIterations(iterations));
        }
    }
    Ok(DpSolution {
        da,
        dt,
        a,
        u,
        policy,
        iterations,
    })
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and `upper[n−1]` unused.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let w = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / w;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / w;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Single-agent DP against the planner's closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpSingleCheck {
    pub da: f64,
    pub sup_gap: f64,
    pub cutoff: f64,
    pub cutoff_exact: f64,
}

pub fn dp_single_agent(params: &ModelParams, da: f64) -> Result<DpSingleCheck> {
    let single = params.with_players(1);
    let sol = solve_cooperative(&single, 1.0)?;
    let dp = dp_best_response(
        &single,
        |_| 0.0,
        DpGrid {
            a_max: 3.0 * sol.a_star,
            da,
            dt: None,
        },
    )?;
    Ok(DpSingleCheck {
        da,
        sup_gap: dp.sup_gap(|a| sol.value.value(a), 2.0 * sol.a_star),
        cutoff: dp.cutoff(),
        cutoff_exact: sol.a_star,
    })
}

/// DP best response against symmetric-equilibrium opponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpDeviation {
    pub da: f64,
    /// `max_a (u_DP(a) − U†(a))`: the gain from deviating.
    pub gain: f64,
    /// `max_a |u_DP(a) − U†(a)|`.
    pub sup_gap: f64,
    pub iterations: usize,
}

pub fn dp_deviation_gain(params: &ModelParams, eq: &SymmetricEquilibrium, da: f64) -> Result<DpDeviation> {
    let others = eq.team - 1.0;
    let a_star = solve_cooperative(params, eq.team)?.a_star;
    let dp = dp_best_response(
        params,
        |a| others * crate::symmetric::k_dagger(eq, a),
        DpGrid {
            a_max: 2.5 * a_star,
            da,
            dt: None,
        },
    )?;
    let diff = || dp.a.iter().zip(&dp.u).map(|(a, u)| u - eq.value.value(*a));
    Ok(DpDeviation {
        da,
        gain: diff().fold(f64::NEG_INFINITY, f64::max),
        sup_gap: diff().map(f64::abs).fold(0.0, f64::max),
        iterations: dp.iterations,
    })
}
