//! Turn-taking asymmetric equilibria.
//!
//! The construction has three layers:
//!
//! 1. An average payoff `ū` solving `max{u/N, min{1, u − 1 + 1/N}} = β(a,u)`,
//!    pasted smoothly at a stopping threshold `a♭` and reflecting at zero
//!    ([`build_average`]). Its three regimes are closed forms: full intensity
//!    (`ū ≥ N`), a common interior action, and intensity one with a lone
//!    explorer (`ū < 2 − 1/N`).
//! 2. On `[a♯, a♭)`, where intensity is one, each partition cell is handed to a
//!    recursive assignment: the lowest-indexed available player explores on
//!    the outer parts of the cell and free-rides in the middle, with the switch
//!    points chosen by [`split`] so that the player's payoff pastes `C¹` onto `ū`
//!    at both ends of the cell. The remaining players recurse on the middle
//!    part with their own average.
//! 3. Below `a♯` everyone plays the common action `min{1, (ū−1)/(N−1)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quadratic_roots, ModelParams};
use crate::odekit::{
    brent, first_crossing, integrate_until, IvpOptions, PiecewiseValue, RootOptions, Segment, SegmentForm,
};
use crate::planner::solve_cooperative;
use crate::profile::{Strategy, StrategyForm, StrategyProfile};
use crate::symmetric::{solve_symmetric, SymmetricEquilibrium};

/// Scan resolution when looking for the first regime change of `ū`.
const SCAN_STEPS: usize = 4000;

/// The average payoff `ū` and its thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageProfile {
    pub team: usize,
    pub rho: f64,
    pub theta: f64,
    /// Stopping threshold `a♭`.
    pub a_flat: f64,
    /// Upper end of the common-action region, `ū(a♯) = 2 − 1/N` (zero if not attained).
    pub a_sharp: f64,
    /// Upper end of the full-intensity region, `ū(a‡) = N` (zero if not attained).
    pub a_ddag: f64,
    pub u_bar: PiecewiseValue,
}

impl AverageProfile {
    /// The exponential form of `ū` on `[a♯, a♭)`.
    pub fn alternation_form(&self) -> &SegmentForm {
        &self.u_bar.segments.last().expect("average payoff has segments").form
    }

    /// `max{u/N, min{1, u − 1 + 1/N}} − β(a, u)` at `a`.
    pub fn ode_residual(&self, a: f64) -> f64 {
        let n = self.team as f64;
        let (u, du, d2u) = self.u_bar.eval(a);
        let target = (u / n).max((u - 1.0 + 1.0 / n).min(1.0));
        target - self.rho * (d2u - self.theta * du)
    }
}

fn check_team(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidPrimitive(format!(
            "turn-taking needs at least two players, got {n}"
        )));
    }
    Ok(())
}

/// Builds `ū` from its closed-form regimes, integrating in the direction of
/// decreasing gap from `(ū, ū') = (1, 0)` at `a♭`.
pub fn build_average(params: &ModelParams, n: usize, tol: f64) -> Result<AverageProfile> {
    check_team(n)?;
    let v = params.validate(n as f64)?;
    let (rho, theta, nf) = (v.rho, v.theta, n as f64);
    let span = 10.0 * solve_cooperative(params, nf)?.a_star;

    // Coordinates relative to a♭ = 0; each regime is (start, form), start ≤ 0.
    let alone = quadratic_roots(rho, theta, 1.0);
    let mut regimes: Vec<(f64, SegmentForm)> = vec![(0.0, SegmentForm::exp_through(1.0 - 1.0 / nf, alone, 0.0, 1.0, 0.0))];
    let levels = [2.0 - 1.0 / nf, nf];
    let reflection_point;
    loop {
        let (start, form) = regimes.last().unwrap().clone();
        let lo = -span;
        let refl = first_crossing(
            |a| {
                let (u, du, _) = form.eval(a);
                u + du
            },
            lo,
            start,
            SCAN_STEPS,
            true,
        )?;
        let stage = regimes.len() - 1;
        let level = levels.get(stage).copied();
        let cross = match level {
            Some(l) => first_crossing(|a| form.eval(a).0 - l, lo, start, SCAN_STEPS, true)?,
            None => None,
        };
        match (refl, cross) {
            (Some(r), Some(c)) if c > r => {
                let (u, du, _) = form.eval(c);
                let next = if stage == 0 {
                    SegmentForm::interior_through(theta, rho, c, u, du)
                } else {
                    SegmentForm::exp_through(0.0, quadratic_roots(rho, theta, nf), c, u, du)
                };
                regimes.push((c, next));
            }
            (Some(r), _) => {
                reflection_point = r;
                break;
            }
            (None, Some(c)) => {
                let (u, du, _) = form.eval(c);
                let next = if stage == 0 {
                    SegmentForm::interior_through(theta, rho, c, u, du)
                } else {
                    SegmentForm::exp_through(0.0, quadratic_roots(rho, theta, nf), c, u, du)
                };
                regimes.push((c, next));
            }
            (None, None) => {
                return Err(Error::ConvergenceFailure(format!(
                    "average payoff never reflects within {span} of its stopping threshold"
                )))
            }
        }
        let _ = tol;
    }

    let a_flat = -reflection_point;
    let shift = |form: &SegmentForm| -> SegmentForm {
        let mut f = form.clone();
        match &mut f {
            SegmentForm::ExpFamily { anchor, .. } | SegmentForm::InteriorFamily { anchor, .. } => *anchor += a_flat,
            _ => {}
        }
        f
    };
    let mut segments = Vec::new();
    let mut upper = a_flat;
    let mut thresholds = [0.0; 2];
    for (i, (start, form)) in regimes.iter().enumerate() {
        let lower = regimes.get(i + 1).map_or(0.0, |(s, _)| s + a_flat);
        if i > 0 {
            thresholds[i - 1] = start + a_flat;
        }
        segments.push(Segment::new(lower, upper, shift(form)));
        upper = lower;
    }
    segments.reverse();
    // rounding can leave a sliver-free tiling with a_lo = −0.0
    segments[0].a_lo = 0.0;
    let avg = AverageProfile {
        team: n,
        rho,
        theta,
        a_flat,
        a_sharp: thresholds[0],
        a_ddag: thresholds[1],
        u_bar: PiecewiseValue::new(segments, a_flat)?,
    };
    check_average(&avg, span / 10.0)?;
    Ok(avg)
}

fn check_average(avg: &AverageProfile, a_star_team: f64) -> Result<()> {
    let fail = |m: String| Err(Error::ConvergenceFailure(format!("average payoff: {m}")));
    let n = avg.team as f64;
    if !(avg.a_ddag <= avg.a_sharp && avg.a_sharp < avg.a_flat && avg.a_flat < a_star_team) {
        return fail(format!(
            "thresholds out of order: a‡ = {}, a♯ = {}, a♭ = {}, a* = {a_star_team}",
            avg.a_ddag, avg.a_sharp, avg.a_flat
        ));
    }
    let (u, du, _) = avg.u_bar.eval_left(avg.a_flat);
    if (u - 1.0).abs() > 1e-10 || du.abs() > 1e-10 {
        return fail(format!("no smooth pasting at a♭ ({u}, {du})"));
    }
    let (u0, du0, _) = avg.u_bar.eval(0.0);
    if (u0 + du0).abs() > 1e-8 {
        return fail(format!("reflection residual {}", u0 + du0));
    }
    let (dv, dd) = avg.u_bar.continuity_gaps();
    if dv > 1e-10 || dd > 1e-8 {
        return fail(format!("continuity gaps {dv:e}, {dd:e}"));
    }
    if avg.a_sharp > 0.0 && (avg.u_bar.value(avg.a_sharp) - (2.0 - 1.0 / n)).abs() > 1e-8 {
        return fail("ū(a♯) ≠ 2 − 1/N".into());
    }
    if avg.a_ddag > 0.0 && (avg.u_bar.value(avg.a_ddag) - n).abs() > 1e-8 {
        return fail("ū(a‡) ≠ N".into());
    }
    for i in 0..500 {
        let a = avg.a_flat * (i as f64 + 0.5) / 500.0;
        if avg.ode_residual(a).abs() > 1e-6 {
            return fail(format!("ODE residual {} at {a}", avg.ode_residual(a)));
        }
        if avg.u_bar.eval(a).1 >= 0.0 {
            return fail(format!("not strictly decreasing at {a}"));
        }
    }
    Ok(())
}

/// Stopping threshold and `ū` obtained by integrating the min/max ODE
/// numerically, as a cross-check on [`build_average`].
pub fn build_average_numeric(params: &ModelParams, n: usize, tol: f64) -> Result<(f64, PiecewiseValue)> {
    check_team(n)?;
    let v = params.validate(n as f64)?;
    let (rho, theta, nf) = (v.rho, v.theta, n as f64);
    let span = 10.0 * solve_cooperative(params, nf)?.a_star;
    let rhs = |_: f64, u: f64, du: f64| (u / nf).max((u - 1.0 + 1.0 / nf).min(1.0)) / rho + theta * du;
    let (seg, hit) = integrate_until(rhs, 0.0, 1.0, 0.0, -span, &IvpOptions::with_tol(tol), |_, u, du| u + du)?;
    let Some(refl) = hit else {
        return Err(Error::ConvergenceFailure("no reflection crossing within span".into()));
    };
    let a_flat = -refl;
    let SegmentForm::NumericGrid {
        knots,
        values,
        derivatives,
        second,
    } = seg.form
    else {
        unreachable!()
    };
    let mut knots: Vec<f64> = knots.iter().map(|k| k + a_flat).collect();
    knots[0] = 0.0;
    let form = SegmentForm::NumericGrid {
        knots,
        values,
        derivatives,
        second,
    };
    Ok((a_flat, PiecewiseValue::new(vec![Segment::new(0.0, a_flat, form)], a_flat)?))
}

/// Outcome of one [`split`]: the explorer's payoff on `[a_L, a_R)` as three
/// closed-form pieces, exploring / free-riding / exploring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub a_m_minus: f64,
    pub a_m_plus: f64,
    pub pieces: [Segment; 3],
    /// `|ǔ − ū|` and `|ǔ' − ū'|` at `a_L` after the root finds.
    pub value_mismatch: f64,
    pub slope_mismatch: f64,
}

/// Splits `[a_l, a_r)` for a player who explores alone on the outer parts and
/// free-rides on `(a_M−, a_M+)`, so that the payoff `ǔ` starts from `ū`'s value
/// and slope at `a_r` and lands on them again at `a_l`.
///
/// `u_bar` must solve `u = f + β(a,u)` with intensity one (so `0 < f < 1`),
/// be strictly decreasing on the cell and satisfy `ū(a_r) ≥ 1`.
pub fn split(a_l: f64, a_r: f64, u_bar: &SegmentForm, f: f64, rho: f64, theta: f64, tol: f64) -> Result<SplitResult> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidPrimitive(format!("free-rider flow {f} outside (0, 1)")));
    }
    if !(a_r > a_l) {
        return Err(Error::PartitionInvalid(format!("empty cell [{a_l}, {a_r})")));
    }
    let SegmentForm::ExpFamily { offset, .. } = u_bar else {
        return Err(Error::InvalidPrimitive("split needs an exponential average payoff".into()));
    };
    if (offset - f).abs() > 1e-12 {
        return Err(Error::InvalidPrimitive(format!("average payoff has flow {offset}, expected {f}")));
    }
    let (ur, dur, _) = u_bar.eval(a_r);
    let (ul, dul, _) = u_bar.eval(a_l);
    if ur < 1.0 - 1e-12 || dur > 1e-12 || u_bar.eval(0.5 * (a_l + a_r)).1 >= 0.0 || dul >= 0.0 {
        return Err(Error::InvalidPrimitive("average payoff must be ≥ 1 and strictly decreasing on the cell".into()));
    }
    let gs = quadratic_roots(rho, theta, 1.0);
    let right = SegmentForm::exp_through(0.0, gs, a_r, ur, dur);
    let pieces_for = |a1: f64, a2: f64| {
        let (u2, du2, _) = right.eval(a2);
        let middle = SegmentForm::exp_through(1.0, gs, a2, u2, du2);
        let (u1, du1, _) = middle.eval(a1);
        let left = SegmentForm::exp_through(0.0, gs, a1, u1, du1);
        (left, middle)
    };
    let at_left = |a1: f64, a2: f64| {
        let (left, _) = pieces_for(a1, a2);
        let (u, du, _) = left.eval(a_l);
        (u - ul, du - dul)
    };
    let opts = RootOptions::with_tol(1e-15);

    let root = |g: &dyn Fn(f64) -> f64, lo: f64, hi: f64| -> Result<f64> {
        let (glo, ghi) = (g(lo), g(hi));
        // the proof puts the root in the bracket; absorb rounding at the ends
        if glo.signum() == ghi.signum() {
            if glo.abs() <= 1e-12 {
                return Ok(lo);
            }
            if ghi.abs() <= 1e-12 {
                return Ok(hi);
            }
        }
        match brent(g, lo, hi, &opts) {
            Err(Error::MaxIterations(_)) => crate::odekit::bisect(g, lo, hi, &opts),
            r => r,
        }
    };

    let a1_hat = root(&|a1| at_left(a1, a_r).0, a_l, a_r)?;
    let a2_of = |a1: f64| -> Result<f64> { root(&|a2| at_left(a1, a2).0, a1, a_r) };
    let slope_gap = |a1: f64| -> f64 {
        match a2_of(a1) {
            Ok(a2) => at_left(a1, a2).1,
            Err(_) => f64::NAN,
        }
    };
    let a1 = match brent(slope_gap, a_l, a1_hat, &opts) {
        Ok(x) => x,
        Err(Error::MaxIterations(_)) => crate::odekit::bisect(slope_gap, a_l, a1_hat, &opts)?,
        Err(e) => return Err(e),
    };
    let a2 = a2_of(a1)?;
    let (left, middle) = pieces_for(a1, a2);
    let (dv, dd) = at_left(a1, a2);
    if dv.abs() > tol || dd.abs() > tol {
        return Err(Error::ConvergenceFailure(format!(
            "split on [{a_l}, {a_r}) leaves mismatch ({dv:e}, {dd:e})"
        )));
    }
    if !(a_l < a1 && a1 < a2 && a2 < a_r) {
        return Err(Error::ConvergenceFailure(format!(
            "degenerate switch points {a1}, {a2} in [{a_l}, {a_r})"
        )));
    }
    Ok(SplitResult {
        a_m_minus: a1,
        a_m_plus: a2,
        pieces: [
            Segment::new(a_l, a1, left),
            Segment::new(a1, a2, middle),
            Segment::new(a2, a_r, right),
        ],
        value_mismatch: dv.abs(),
        slope_mismatch: dd.abs(),
    })
}

/// One [`split`] performed during the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub cell: usize,
    pub depth: usize,
    /// The player who explores on the outer parts.
    pub player: usize,
    pub a_l: f64,
    pub a_r: f64,
    pub a_m_minus: f64,
    pub a_m_plus: f64,
    pub value_mismatch: f64,
    pub slope_mismatch: f64,
}

/// A turn-taking equilibrium: strategies and payoffs per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricEquilibrium {
    pub team: usize,
    pub rho: f64,
    pub theta: f64,
    pub average: AverageProfile,
    /// Cell boundaries of `[a♯, a♭)`, both ends included.
    pub partition: Vec<f64>,
    pub switch_points: Vec<SplitRecord>,
    pub strategies: Vec<Strategy>,
    pub payoffs: Vec<PiecewiseValue>,
}

impl AsymmetricEquilibrium {
    pub fn profile(&self) -> StrategyProfile {
        StrategyProfile::new(self.strategies.clone())
    }

    pub fn a_flat(&self) -> f64 {
        self.average.a_flat
    }
}

struct Assignment<'a> {
    gs: (f64, f64),
    rho: f64,
    theta: f64,
    tol: f64,
    cell: usize,
    payoffs: &'a mut [Vec<Segment>],
    strategies: &'a mut [Strategy],
    records: &'a mut Vec<SplitRecord>,
}

impl Assignment<'_> {
    /// Assigns actions to `players` on `[a_l, a_r)` given their average payoff
    /// `u_bar`; `explore` says whether one of them must carry the intensity.
    fn run(&mut self, players: &[usize], explore: bool, a_l: f64, a_r: f64, u_bar: SegmentForm, depth: usize) -> Result<()> {
        let keep = |me: &mut Self, p: usize, k: f64, form: SegmentForm, lo: f64, hi: f64| {
            me.payoffs[p].push(Segment::new(lo, hi, form));
            me.strategies[p].push(lo, hi, StrategyForm::Constant { k });
        };
        if !explore {
            for &p in players {
                keep(self, p, 0.0, u_bar.clone(), a_l, a_r);
            }
            return Ok(());
        }
        if players.len() == 1 {
            keep(self, players[0], 1.0, u_bar, a_l, a_r);
            return Ok(());
        }
        let size = players.len() as f64;
        let s = split(a_l, a_r, &u_bar, 1.0 - 1.0 / size, self.rho, self.theta, self.tol)?;
        let me = players[0];
        self.records.push(SplitRecord {
            cell: self.cell,
            depth,
            player: me,
            a_l,
            a_r,
            a_m_minus: s.a_m_minus,
            a_m_plus: s.a_m_plus,
            value_mismatch: s.value_mismatch,
            slope_mismatch: s.slope_mismatch,
        });
        let rest = &players[1..];
        for (i, piece) in s.pieces.iter().enumerate() {
            let explores = i != 1;
            // average of the others: (|I|·ū − ǔ)/(|I| − 1)
            let others = SegmentForm::lin_comb(size / (size - 1.0), &u_bar, -1.0 / (size - 1.0), &piece.form)?
                .reanchored(piece.a_lo);
            let own = piece.form.reanchored(piece.a_lo);
            keep(self, me, if explores { 1.0 } else { 0.0 }, own, piece.a_lo, piece.a_hi);
            self.run(rest, !explores, piece.a_lo, piece.a_hi, others, depth + 1)?;
        }
        let _ = self.gs;
        Ok(())
    }
}

/// Builds the equilibrium for a partition of `[a♯, a♭)` given by its interior
/// breakpoints (empty for the trivial partition).
pub fn construct_equilibrium(params: &ModelParams, n: usize, interior: &[f64], tol: f64) -> Result<AsymmetricEquilibrium> {
    let avg = build_average(params, n, tol)?;
    construct_from_average(avg, interior, tol)
}

pub fn construct_from_average(avg: AverageProfile, interior: &[f64], tol: f64) -> Result<AsymmetricEquilibrium> {
    let n = avg.team;
    let nf = n as f64;
    let (a_sharp, a_flat) = (avg.a_sharp, avg.a_flat);
    let mut partition = vec![a_sharp];
    for &b in interior {
        if !(b > *partition.last().unwrap() && b < a_flat) {
            return Err(Error::PartitionInvalid(format!(
                "breakpoint {b} not increasing inside ({a_sharp}, {a_flat})"
            )));
        }
        partition.push(b);
    }
    partition.push(a_flat);

    let mut payoffs: Vec<Vec<Segment>> = vec![Vec::new(); n];
    let mut strategies = vec![Strategy::zero(); n];
    // common action below a♯
    for seg in avg.u_bar.segments.iter().filter(|s| s.a_hi <= a_sharp) {
        for p in 0..n {
            payoffs[p].push(seg.clone());
            let form = if seg.a_hi <= avg.a_ddag {
                StrategyForm::Constant { k: 1.0 }
            } else {
                StrategyForm::PayoffAffine {
                    payoff: seg.form.clone(),
                    shift: 1.0,
                    scale: 1.0 / (nf - 1.0),
                }
            };
            strategies[p].push(seg.a_lo, seg.a_hi, form);
        }
    }
    let alternation = avg.alternation_form().clone();
    let players: Vec<usize> = (0..n).collect();
    let mut records = Vec::new();
    let gs = quadratic_roots(avg.rho, avg.theta, 1.0);
    for (cell, w) in partition.windows(2).enumerate() {
        let mut job = Assignment {
            gs,
            rho: avg.rho,
            theta: avg.theta,
            tol,
            cell,
            payoffs: &mut payoffs,
            strategies: &mut strategies,
            records: &mut records,
        };
        job.run(&players, true, w[0], w[1], alternation.reanchored(w[0]), 0)?;
    }
    let payoffs = payoffs
        .into_iter()
        .map(|segs| PiecewiseValue::new(segs, a_flat))
        .collect::<Result<Vec<_>>>()?;
    let eq = AsymmetricEquilibrium {
        team: n,
        rho: avg.rho,
        theta: avg.theta,
        average: avg,
        partition,
        switch_points: records,
        strategies,
        payoffs,
    };
    check_equilibrium_invariants(&eq, tol)?;
    Ok(eq)
}

fn check_equilibrium_invariants(eq: &AsymmetricEquilibrium, tol: f64) -> Result<()> {
    let fail = |m: String| Err(Error::ConvergenceFailure(format!("asymmetric equilibrium: {m}")));
    let nf = eq.team as f64;
    let avg = &eq.average;
    for i in 0..=300 {
        let a = avg.a_flat * i as f64 / 300.0;
        let mean = eq.payoffs.iter().map(|p| p.value(a)).sum::<f64>() / nf;
        if (mean - avg.u_bar.value(a)).abs() > 1e-7 {
            return fail(format!("mean payoff {mean} differs from ū at {a}"));
        }
        let k: f64 = eq.strategies.iter().map(|s| s.eval(a)).sum();
        let expected = if a >= avg.a_flat {
            0.0
        } else if a >= avg.a_sharp {
            1.0
        } else {
            nf * ((avg.u_bar.value(a) - 1.0) / (nf - 1.0)).min(1.0)
        };
        if (k - expected).abs() > 1e-9 {
            return fail(format!("intensity {k} at {a}, expected {expected}"));
        }
    }
    for (p, u) in eq.payoffs.iter().enumerate() {
        let (dv, dd) = u.continuity_gaps();
        if dv > tol || dd > tol {
            return fail(format!("player {p} payoff gaps value {dv:e}, slope {dd:e}"));
        }
        let (u0, du0, _) = u.eval(0.0);
        if (u0 + du0).abs() > tol {
            return fail(format!("player {p} reflection residual {}", u0 + du0));
        }
    }
    for r in &eq.switch_points {
        if r.value_mismatch > tol || r.slope_mismatch > tol {
            return fail(format!("split mismatch in cell {}", r.cell));
        }
    }
    Ok(())
}

/// Refines a uniform partition of `[a♯, a♭)` by halving until every player's
/// payoff exceeds the symmetric payoff on `[0, a♭ − eps]`.
pub fn construct_pareto(params: &ModelParams, n: usize, eps: f64, tol: f64, max_cells: usize) -> Result<AsymmetricEquilibrium> {
    let avg = build_average(params, n, tol)?;
    let sym = solve_symmetric(params, n as f64, 1e-13)?;
    let mut cells = 1;
    while cells <= max_cells {
        let interior: Vec<f64> = (1..cells)
            .map(|j| avg.a_sharp + (avg.a_flat - avg.a_sharp) * j as f64 / cells as f64)
            .collect();
        let eq = construct_from_average(avg.clone(), &interior, tol)?;
        if dominance_margin(&eq, &sym, eps, 2000) > 0.0 {
            return Ok(eq);
        }
        cells *= 2;
    }
    Err(Error::ConvergenceFailure(format!(
        "no partition with up to {max_cells} cells dominates the symmetric payoff"
    )))
}

/// `min over players and a ∈ [0, a♭ − eps] of u_n(a) − U†(a)`, on a uniform grid
/// plus every payoff breakpoint in range.
pub fn dominance_margin(eq: &AsymmetricEquilibrium, sym: &SymmetricEquilibrium, eps: f64, grid: usize) -> f64 {
    let top = eq.a_flat() - eps;
    if top < 0.0 {
        return f64::INFINITY;
    }
    let mut pts: Vec<f64> = (0..=grid).map(|i| top * i as f64 / grid as f64).collect();
    for p in &eq.payoffs {
        pts.extend(p.breakpoints().into_iter().filter(|&b| b <= top));
    }
    let mut margin = f64::INFINITY;
    for &a in &pts {
        let us = sym.value.value(a);
        for p in &eq.payoffs {
            margin = margin.min(p.value(a) - us).min(p.eval_left(a).0 - sym.value.eval_left(a).0);
        }
    }
    margin
}

/// Average-payoff and threshold comparison against the symmetric equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub grid_size: usize,
    /// `min over a ∈ [0, a♭) of ū(a) − U†(a)`.
    pub min_average_gap: f64,
    pub argmin: f64,
    /// `a♭ − ã`.
    pub threshold_gap: f64,
    pub average_dominates: bool,
    pub threshold_exceeds: bool,
    /// For two players, `(a, ū(a))`: the reference upper bound on average
    /// equilibrium payoffs.
    pub bound_curve: Option<Vec<(f64, f64)>>,
}

pub fn compare_welfare(asym: &AsymmetricEquilibrium, sym: &SymmetricEquilibrium, grid: usize) -> WelfareReport {
    let a_flat = asym.a_flat();
    let (mut gap, mut arg) = (f64::INFINITY, 0.0);
    for i in 0..grid {
        let a = a_flat * i as f64 / grid as f64;
        let g = asym.average.u_bar.value(a) - sym.value.value(a);
        if g < gap {
            gap = g;
            arg = a;
        }
    }
    let bound_curve = (asym.team == 2).then(|| {
        (0..=grid)
            .map(|i| {
                let a = a_flat * i as f64 / grid as f64;
                (a, asym.average.u_bar.value(a))
            })
            .collect()
    });
    WelfareReport {
        grid_size: grid,
        min_average_gap: gap,
        argmin: arg,
        threshold_gap: a_flat - sym.a_tilde,
        average_dominates: gap > 0.0,
        threshold_exceeds: a_flat > sym.a_tilde,
        bound_curve,
    }
}
