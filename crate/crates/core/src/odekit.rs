//! Piecewise value functions and the ODE machinery behind every constructor.
//!
//! Every payoff in this crate solves, segment by segment, one of two linear
//! second-order ODEs in the gap `a`:
//!
//! * `u = offset + K·β(a,u)` under a constant action profile, whose solutions are
//!   exponentials in the roots of `γ(γ−θ) = 1/(Kρ)` ([`SegmentForm::ExpFamily`]);
//! * `β(a,u) = 1` on indifference regions ([`SegmentForm::InteriorFamily`]),
//!
//! where `β(a,u) = ρ(u'' − θu')` is the benefit-cost ratio of exploring. Closed
//! forms are stored wherever they exist; [`integrate_ivp`] provides a
//! Dormand–Prince integrator with Hermite dense output for everything else and
//! for cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `φ_θ(z) = (1 − e^{−θz})/θ`, continuously extended by `φ_0(z) = z`.
pub fn phi_theta(theta: f64, z: f64) -> f64 {
    if theta.abs() <= 1e-8 {
        z - theta * z * z / 2.0 + theta * theta * z * z * z / 6.0
    } else {
        -(-theta * z).exp_m1() / theta
    }
}

/// `Φ_θ(Z) = ∫₀^Z φ_θ(z) dz = (θZ − 1 + e^{−θZ})/θ²`.
pub fn phi_theta_integral(theta: f64, z: f64) -> f64 {
    psi(-theta, z)
}

/// `(e^{θx} − 1)/θ`, equal to `x` at `θ = 0`.
pub(crate) fn e1(theta: f64, x: f64) -> f64 {
    if theta == 0.0 {
        x
    } else {
        (theta * x).exp_m1() / theta
    }
}

/// `(e^{θx} − 1 − θx)/θ²`, equal to `x²/2` at `θ = 0`.
pub(crate) fn psi(theta: f64, x: f64) -> f64 {
    let y = theta * x;
    if y.abs() < 0.1 {
        // (e^y − 1 − y)/y² = Σ_k y^k/(k+2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 1..14 {
            term *= y / (k as f64 + 2.0);
            sum += term;
        }
        x * x * sum
    } else {
        (y.exp_m1() - y) / (theta * theta)
    }
}

/// Analytic or tabulated form of a value function on one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum SegmentForm {
    /// `u ≡ 1`: nobody explores.
    ConstantOne,
    /// `u = offset + c1·e^{γ1(a−anchor)} + c2·e^{γ2(a−anchor)}`.
    ExpFamily {
        offset: f64,
        c1: f64,
        c2: f64,
        gamma1: f64,
        gamma2: f64,
        anchor: f64,
    },
    /// General solution of `β(a,u) = 1`, stored as
    /// `u = level + slope·E(x) + Ψ(x)/ρ` with `x = a − anchor`,
    /// `E(x) = (e^{θx}−1)/θ` and `Ψ(x) = (e^{θx}−1−θx)/θ²`.
    ///
    /// This is the same family as `c1 + c2·e^{θa} − a/(ρθ)` (or
    /// `c1 + c2·a + a²/(2ρ)` when `θ = 0`) but stays well conditioned as `θ → 0`;
    /// see [`SegmentForm::interior_from_general`].
    InteriorFamily {
        level: f64,
        slope: f64,
        theta: f64,
        rho: f64,
        anchor: f64,
    },
    /// Tabulated `(u, u', u'')`, interpolated by quintic Hermite polynomials.
    NumericGrid {
        knots: Vec<f64>,
        values: Vec<f64>,
        derivatives: Vec<f64>,
        second: Vec<f64>,
    },
}

impl SegmentForm {
    /// The member of the exponential family with flow `offset` and roots
    /// `(γ1, γ2)` passing through `(u, du)` at `anchor`.
    pub fn exp_through(offset: f64, gammas: (f64, f64), anchor: f64, u: f64, du: f64) -> Self {
        let (g1, g2) = gammas;
        let c2 = (du - g1 * (u - offset)) / (g2 - g1);
        let c1 = (u - offset) - c2;
        SegmentForm::ExpFamily {
            offset,
            c1,
            c2,
            gamma1: g1,
            gamma2: g2,
            anchor,
        }
    }

    /// The interior solution passing through `(u, du)` at `anchor`.
    pub fn interior_through(theta: f64, rho: f64, anchor: f64, u: f64, du: f64) -> Self {
        SegmentForm::InteriorFamily {
            level: u,
            slope: du,
            theta,
            rho,
            anchor,
        }
    }

    /// Interior solution from the textbook constants: `c1 + c2·e^{θa} − a/(ρθ)`
    /// for `θ ≠ 0`, `c1 + c2·a + a²/(2ρ)` for `θ = 0`.
    pub fn interior_from_general(c1: f64, c2: f64, theta: f64, rho: f64) -> Self {
        let (level, slope) = if theta == 0.0 {
            (c1, c2)
        } else {
            (c1 + c2, theta * c2 - 1.0 / (rho * theta))
        };
        SegmentForm::InteriorFamily {
            level,
            slope,
            theta,
            rho,
            anchor: 0.0,
        }
    }

    /// `(u, u', u'')` at `a` (analytic continuation outside the segment).
    pub fn eval(&self, a: f64) -> (f64, f64, f64) {
        match self {
            SegmentForm::ConstantOne => (1.0, 0.0, 0.0),
            SegmentForm::ExpFamily {
                offset,
                c1,
                c2,
                gamma1,
                gamma2,
                anchor,
            } => {
                let x = a - anchor;
                let e1 = c1 * (gamma1 * x).exp();
                let e2 = c2 * (gamma2 * x).exp();
                (
                    offset + e1 + e2,
                    gamma1 * e1 + gamma2 * e2,
                    gamma1 * gamma1 * e1 + gamma2 * gamma2 * e2,
                )
            }
            SegmentForm::InteriorFamily {
                level,
                slope,
                theta,
                rho,
                anchor,
            } => {
                let x = a - anchor;
                let ex = (theta * x).exp();
                let u = level + slope * e1(*theta, x) + psi(*theta, x) / rho;
                let du = slope * ex + e1(*theta, x) / rho;
                let d2u = slope * theta * ex + ex / rho;
                (u, du, d2u)
            }
            SegmentForm::NumericGrid {
                knots,
                values,
                derivatives,
                second,
            } => hermite_eval(knots, values, derivatives, second, a),
        }
    }

    /// Re-expresses an exponential form relative to a new anchor (same function).
    pub fn reanchored(&self, new_anchor: f64) -> Self {
        match *self {
            SegmentForm::ExpFamily {
                offset,
                c1,
                c2,
                gamma1,
                gamma2,
                anchor,
            } => {
                let d = new_anchor - anchor;
                SegmentForm::ExpFamily {
                    offset,
                    c1: c1 * (gamma1 * d).exp(),
                    c2: c2 * (gamma2 * d).exp(),
                    gamma1,
                    gamma2,
                    anchor: new_anchor,
                }
            }
            _ => self.clone(),
        }
    }

    /// `α·self + β·other` for two exponential forms sharing their roots, or for
    /// constant ones. Used to form averages over groups of players.
    pub fn lin_comb(alpha: f64, x: &SegmentForm, beta: f64, y: &SegmentForm) -> Result<SegmentForm> {
        use SegmentForm::*;
        let as_exp = |f: &SegmentForm| -> Option<(f64, f64, f64, f64, f64, f64)> {
            match *f {
                ExpFamily {
                    offset,
                    c1,
                    c2,
                    gamma1,
                    gamma2,
                    anchor,
                } => Some((offset, c1, c2, gamma1, gamma2, anchor)),
                _ => None,
            }
        };
        match (x, y) {
            (ConstantOne, ConstantOne) => {
                if ((alpha + beta) - 1.0).abs() < 1e-12 {
                    Ok(ConstantOne)
                } else {
                    Err(Error::ConvergenceFailure("combination of unit payoffs is not unit".into()))
                }
            }
            (ExpFamily { .. }, ConstantOne) | (ConstantOne, ExpFamily { .. }) | (ExpFamily { .. }, ExpFamily { .. }) => {
                let (ex, ey) = (as_exp(x), as_exp(y));
                let anchor = ex.or(ey).map(|e| e.5).unwrap();
                let (g1, g2) = ex.or(ey).map(|e| (e.3, e.4)).unwrap();
                let coef = |e: Option<(f64, f64, f64, f64, f64, f64)>| -> Result<(f64, f64, f64)> {
                    match e {
                        None => Ok((1.0, 0.0, 0.0)),
                        Some((off, c1, c2, h1, h2, anc)) => {
                            let scale = 1e-12 * (1.0 + g1.abs() + g2.abs());
                            if (h1 - g1).abs() > scale || (h2 - g2).abs() > scale {
                                return Err(Error::ConvergenceFailure(
                                    "cannot combine exponential forms with different roots".into(),
                                ));
                            }
                            let d = anchor - anc;
                            Ok((off, c1 * (h1 * d).exp(), c2 * (h2 * d).exp()))
                        }
                    }
                };
                let (ox, x1, x2) = coef(ex)?;
                let (oy, y1, y2) = coef(ey)?;
                Ok(ExpFamily {
                    offset: alpha * ox + beta * oy,
                    c1: alpha * x1 + beta * y1,
                    c2: alpha * x2 + beta * y2,
                    gamma1: g1,
                    gamma2: g2,
                    anchor,
                })
            }
            _ => Err(Error::ConvergenceFailure(
                "linear combinations are only supported for exponential forms".into(),
            )),
        }
    }
}

fn hermite_eval(knots: &[f64], u: &[f64], du: &[f64], d2u: &[f64], a: f64) -> (f64, f64, f64) {
    let n = knots.len();
    if n == 1 {
        return (u[0], du[0], d2u[0]);
    }
    let i = knots.partition_point(|&k| k <= a).clamp(1, n - 1) - 1;
    let h = knots[i + 1] - knots[i];
    if h == 0.0 {
        return (u[i + 1], du[i + 1], d2u[i + 1]);
    }
    let t = (a - knots[i]) / h;
    let (b, db, d2b) = quintic_basis(t);
    let coef = [u[i], h * du[i], h * h * d2u[i], u[i + 1], h * du[i + 1], h * h * d2u[i + 1]];
    let dot = |w: &[f64; 6]| w.iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>();
    (dot(&b), dot(&db) / h, dot(&d2b) / (h * h))
}

/// Quintic Hermite basis in the order (p0, m0, s0, p1, m1, s1) with its first
/// and second derivatives; matches value, slope and curvature at both ends.
fn quintic_basis(t: f64) -> ([f64; 6], [f64; 6], [f64; 6]) {
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let b = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * (t3 - 2.0 * t4 + t5),
    ];
    let db = [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
    ];
    let d2b = [
        -60.0 * t + 180.0 * t2 - 120.0 * t3,
        -36.0 * t + 96.0 * t2 - 60.0 * t3,
        0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
        60.0 * t - 180.0 * t2 + 120.0 * t3,
        -24.0 * t + 84.0 * t2 - 60.0 * t3,
        0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
    ];
    (b, db, d2b)
}

/// A form restricted to `[a_lo, a_hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a_lo: f64,
    pub a_hi: f64,
    #[serde(flatten)]
    pub form: SegmentForm,
}

impl Segment {
    pub fn new(a_lo: f64, a_hi: f64, form: SegmentForm) -> Self {
        Self { a_lo, a_hi, form }
    }

    pub fn eval(&self, a: f64) -> (f64, f64, f64) {
        self.form.eval(a)
    }
}

/// A normalized value function: segments tiling `[0, stop)`, `u ≡ 1` beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseValue {
    pub segments: Vec<Segment>,
    /// Stopping threshold `ā`.
    pub stop: f64,
}

impl PiecewiseValue {
    pub fn new(segments: Vec<Segment>, stop: f64) -> Result<Self> {
        let pv = Self { segments, stop };
        pv.check_tiling()?;
        Ok(pv)
    }

    /// `u ≡ 1`.
    pub fn constant_one() -> Self {
        Self {
            segments: Vec::new(),
            stop: 0.0,
        }
    }

    fn check_tiling(&self) -> Result<()> {
        let bad = |m: String| Err(Error::PartitionInvalid(m));
        if self.segments.is_empty() {
            return if self.stop == 0.0 {
                Ok(())
            } else {
                bad("no segments below a positive stopping threshold".into())
            };
        }
        if self.segments[0].a_lo != 0.0 {
            return bad(format!("first segment starts at {}", self.segments[0].a_lo));
        }
        for w in self.segments.windows(2) {
            if w[0].a_hi != w[1].a_lo {
                return bad(format!("gap between {} and {}", w[0].a_hi, w[1].a_lo));
            }
        }
        for s in &self.segments {
            if !(s.a_hi > s.a_lo) {
                return bad(format!("empty segment [{}, {})", s.a_lo, s.a_hi));
            }
        }
        if self.segments.last().unwrap().a_hi != self.stop {
            return bad("segments do not end at the stopping threshold".into());
        }
        Ok(())
    }

    /// Right-continuous evaluation `(u, u', u'')`.
    pub fn eval(&self, a: f64) -> (f64, f64, f64) {
        if a >= self.stop {
            return (1.0, 0.0, 0.0);
        }
        let i = self.segments.partition_point(|s| s.a_lo <= a).max(1) - 1;
        self.segments[i].eval(a)
    }

    /// Left limits `(u(a−), u'(a−), u''(a−))`, evaluated from the closed form of
    /// the segment ending at `a`. At `a = 0` this is the right limit.
    pub fn eval_left(&self, a: f64) -> (f64, f64, f64) {
        if a <= 0.0 || self.segments.is_empty() {
            return self.eval(a.max(0.0));
        }
        if a > self.stop {
            return (1.0, 0.0, 0.0);
        }
        let i = self.segments.partition_point(|s| s.a_lo < a).max(1) - 1;
        self.segments[i].eval(a)
    }

    pub fn value(&self, a: f64) -> f64 {
        self.eval(a).0
    }

    /// Internal breakpoints, ending with the stopping threshold.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.a_lo).chain(
            (self.stop > 0.0).then_some(self.stop),
        ).collect()
    }

    pub fn is_breakpoint(&self, a: f64) -> bool {
        let eps = 1e-12 * a.abs().max(1.0);
        self.breakpoints().iter().any(|&b| (b - a).abs() <= eps)
    }

    /// Largest value or slope jump across internal breakpoints and the threshold.
    pub fn continuity_gaps(&self) -> (f64, f64) {
        self.breakpoints().iter().fold((0.0f64, 0.0f64), |(dv, dd), &b| {
            let (ul, dl, _) = self.eval_left(b);
            let (ur, dr, _) = self.eval(b);
            (dv.max((ul - ur).abs()), dd.max((dl - dr).abs()))
        })
    }
}

/// `β(a,u) = ρ(u'' − θu')`, refusing to pick a side at a breakpoint.
pub fn beta(pv: &PiecewiseValue, a: f64, rho: f64, theta: f64) -> Result<f64> {
    if pv.is_breakpoint(a) {
        return Err(Error::AtBreakpoint(a));
    }
    Ok(beta_right(pv, a, rho, theta))
}

pub fn beta_right(pv: &PiecewiseValue, a: f64, rho: f64, theta: f64) -> f64 {
    let (_, du, d2u) = pv.eval(a);
    rho * (d2u - theta * du)
}

pub fn beta_left(pv: &PiecewiseValue, a: f64, rho: f64, theta: f64) -> f64 {
    let (_, du, d2u) = pv.eval_left(a);
    rho * (d2u - theta * du)
}

/// Benefit-cost ratio of a bare form.
pub fn beta_form(form: &SegmentForm, a: f64, rho: f64, theta: f64) -> f64 {
    let (_, du, d2u) = form.eval(a);
    rho * (d2u - theta * du)
}

/// Options for [`integrate_ivp`].
#[derive(Debug, Clone)]
pub struct IvpOptions {
    /// Local error tolerance, mixed absolute/relative.
    pub tol: f64,
    /// Points where the right-hand side may kink; steps end exactly on them.
    pub breakpoints: Vec<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IvpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            breakpoints: Vec::new(),
            h_min: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

impl IvpOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `u'' = g(a, u, u')` from `(a0, u0, du0)` to `a1` (either direction)
/// and returns the solution as a [`SegmentForm::NumericGrid`] segment.
pub fn integrate_ivp<G>(rhs: G, a0: f64, u0: f64, du0: f64, a1: f64, opts: &IvpOptions) -> Result<Segment>
where
    G: Fn(f64, f64, f64) -> f64,
{
    let (seg, _) = integrate_until(rhs, a0, u0, du0, a1, opts, |_, _, _| 1.0)?;
    Ok(seg)
}

/// Like [`integrate_ivp`] but stops at the first zero of `event(a, u, u')`.
///
/// Returns the grid up to the stopping point and the event location, if any.
/// Knots are duplicated at declared breakpoints so that each side keeps its
/// own curvature.
pub fn integrate_until<G, E>(
    rhs: G,
    a0: f64,
    u0: f64,
    du0: f64,
    a1: f64,
    opts: &IvpOptions,
    event: E,
) -> Result<(Segment, Option<f64>)>
where
    G: Fn(f64, f64, f64) -> f64,
    E: Fn(f64, f64, f64) -> f64,
{
    let dir = if a1 >= a0 { 1.0 } else { -1.0 };
    // side-aware evaluation point: just before (`-1`) or after (`+1`) `x` in integration order
    let nudge = |x: f64, side: f64| x + side * dir * 1e-14 * x.abs().max(1.0);
    let is_kink = |x: f64| opts.breakpoints.iter().any(|&b| b == x);
    let start = if is_kink(a0) { nudge(a0, 1.0) } else { a0 };
    if a1 == a0 {
        let form = SegmentForm::NumericGrid {
            knots: vec![a0],
            values: vec![u0],
            derivatives: vec![du0],
            second: vec![rhs(start, u0, du0)],
        };
        return Ok((Segment::new(a0, a0, form), None));
    }
    let span = (a1 - a0).abs();
    // kinks strictly inside the interval, in integration order
    let mut stops: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|&b| (b - a0) * dir > 0.0 && (a1 - b) * dir > 0.0)
        .collect();
    stops.sort_by(|x, y| (dir * x).partial_cmp(&(dir * y)).unwrap());
    stops.push(a1);
    let mut next_stop = 0;

    let mut a = a0;
    let mut y = [u0, du0];
    let mut dy = [du0, rhs(start, u0, du0)];
    let mut ks = vec![a];
    let mut us = vec![y[0]];
    let mut vs = vec![y[1]];
    let mut gs = vec![dy[1]];
    let mut h = (0.01 * span).min(0.05).max(opts.h_min * 10.0);
    let mut ev_prev = event(a, y[0], y[1]);
    let mut hit = None;

    let mut steps = 0;
    while (a1 - a) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow(a));
        }
        let target = stops[next_stop];
        let mut step = h.min((target - a).abs());
        let lands = step >= (target - a).abs() * (1.0 - 1e-14);
        if lands {
            step = (target - a).abs();
        }
        let hs = dir * step;
        let mut k = [[0.0; 2]; 7];
        k[0] = dy;
        for s in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                yi[0] += hs * A[s][j] * kj[0];
                yi[1] += hs * A[s][j] * kj[1];
            }
            let x = if C[s] == 1.0 && lands && next_stop + 1 < stops.len() {
                nudge(target, -1.0)
            } else {
                a + C[s] * hs
            };
            k[s] = [yi[1], rhs(x, yi[0], yi[1])];
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..2 {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][c];
                s4 += B4[s] * k[s][c];
            }
            y5[c] += hs * s5;
            let sc = opts.tol * y[c].abs().max(y5[c].abs()).max(1.0);
            err = err.max((hs * (s5 - s4)).abs() / sc);
        }
        if !err.is_finite() {
            h = step * 0.1;
            if h < opts.h_min {
                return Err(Error::StepUnderflow(a));
            }
            continue;
        }
        if err <= 1.0 {
            let a_new = if lands { target } else { a + hs };
            let kink = lands && next_stop + 1 < stops.len();
            // incoming-side curvature at the new knot
            let g_in = if kink { k[6][1] } else { rhs(a_new, y5[0], y5[1]) };
            let ev = event(a_new, y5[0], y5[1]);
            if ev_prev * ev <= 0.0 && ev != ev_prev {
                // locate the event on the step's quintic interpolant
                let mut kn = [a, a_new];
                let mut uu = [y[0], y5[0]];
                let mut vv = [y[1], y5[1]];
                let mut gg = [dy[1], g_in];
                if dir < 0.0 {
                    kn.reverse();
                    uu.reverse();
                    vv.reverse();
                    gg.reverse();
                }
                let interp = |x: f64| hermite_eval(&kn, &uu, &vv, &gg, x);
                let root = if ev == 0.0 {
                    a_new
                } else {
                    brent(
                        |x| {
                            let (u, v, _) = interp(x);
                            event(x, u, v)
                        },
                        kn[0],
                        kn[1],
                        &RootOptions::default(),
                    )?
                };
                let (u, v, g) = interp(root);
                ks.push(root);
                us.push(u);
                vs.push(v);
                gs.push(g);
                hit = Some(root);
                break;
            }
            ev_prev = ev;
            a = a_new;
            y = y5;
            ks.push(a);
            us.push(y[0]);
            vs.push(y[1]);
            gs.push(g_in);
            if kink {
                let g_out = rhs(nudge(a, 1.0), y[0], y[1]);
                ks.push(a);
                us.push(y[0]);
                vs.push(y[1]);
                gs.push(g_out);
                dy = [y[1], g_out];
            } else {
                dy = [y[1], g_in];
            }
            if lands {
                next_stop += 1;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * fac;
        if h < opts.h_min {
            return Err(Error::StepUnderflow(a));
        }
    }

    if dir < 0.0 {
        ks.reverse();
        us.reverse();
        vs.reverse();
        gs.reverse();
    }
    let (lo, hi) = (ks[0], *ks.last().unwrap());
    let form = SegmentForm::NumericGrid {
        knots: ks,
        values: us,
        derivatives: vs,
        second: gs,
    };
    Ok((Segment::new(lo, hi, form), hit))
}

/// Options for the bracketing root finders.
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Absolute-or-relative tolerance on the root location.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-14,
            max_iter: 200,
        }
    }
}

impl RootOptions {
    pub fn with_tol(xtol: f64) -> Self {
        Self {
            xtol,
            ..Self::default()
        }
    }
}

/// Brent's method on a sign-changing bracket.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, opts: &RootOptions) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.xtol * b.abs().max(1.0);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return bisect(f, lo, hi, opts);
        }
    }
    Err(Error::MaxIterations(opts.max_iter))
}

/// Plain bisection; the fallback when Brent stalls or meets a non-finite value.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, opts: &RootOptions) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let sa = fa.signum();
    for _ in 0..opts.max_iter.max(2000) {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= opts.xtol * m.abs().max(1.0) || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Err(Error::MaxIterations(opts.max_iter))
}

/// Root of `residual` on `[lo, hi]` to tolerance `tol`, optionally growing the
/// upper end geometrically (up to `max_expand` doublings of the width) until
/// the sign changes.
pub fn shoot_scalar<F: FnMut(f64) -> f64>(
    mut residual: F,
    lo: f64,
    mut hi: f64,
    tol: f64,
    max_expand: usize,
) -> Result<f64> {
    let f_lo = residual(lo);
    let mut f_hi = residual(hi);
    let mut n = 0;
    while f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        if n >= max_expand {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        hi = lo + 2.0 * (hi - lo);
        f_hi = residual(hi);
        n += 1;
    }
    let opts = RootOptions::with_tol(tol);
    match brent(&mut residual, lo, hi, &opts) {
        Ok(x) => Ok(x),
        Err(Error::MaxIterations(_)) => bisect(&mut residual, lo, hi, &opts),
        Err(e) => Err(e),
    }
}

/// First zero of `f` on `[lo, hi]` scanning in `n` uniform steps from `lo`
/// (or from `hi` downward when `from_hi`), refined with Brent.
pub fn first_crossing<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, from_hi: bool) -> Result<Option<f64>> {
    let x_at = |i: usize| {
        let t = i as f64 / n as f64;
        if from_hi {
            hi - t * (hi - lo)
        } else {
            lo + t * (hi - lo)
        }
    };
    let mut x_prev = x_at(0);
    let mut f_prev = f(x_prev);
    if f_prev == 0.0 {
        return Ok(Some(x_prev));
    }
    for i in 1..=n {
        let x = x_at(i);
        let fx = f(x);
        if fx == 0.0 {
            return Ok(Some(x));
        }
        if fx.signum() != f_prev.signum() {
            let (a, b) = if x_prev < x { (x_prev, x) } else { (x, x_prev) };
            return brent(&mut f, a, b, &RootOptions::default()).map(Some);
        }
        x_prev = x;
        f_prev = fx;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::quadratic_roots;

    #[test]
    fn phi_limits() {
        assert_eq!(phi_theta(0.0, 1.0), 1.0);
        assert_eq!(phi_theta(0.7, 0.0), 0.0);
        assert!((phi_theta(-1.0, 2f64.ln()) - 1.0).abs() < 1e-15);
        // continuity across the series switch
        assert!((phi_theta(1.0001e-8, 3.0) - phi_theta(0.9999e-8, 3.0)).abs() < 1e-10);
    }

    #[test]
    fn phi_integral_matches_closed_form() {
        for &th in &[-2.0f64, -1.0, -0.09, 0.3, 1.5] {
            for &z in &[0.01, 0.5, 2.0, 4.0] {
                let exact = (th * z - 1.0 + (-th * z).exp()) / (th * th);
                assert!((phi_theta_integral(th, z) - exact).abs() < 1e-12 * exact.abs().max(1.0));
            }
        }
        assert!((phi_theta_integral(0.0, 3.0) - 4.5).abs() < 1e-15);
    }

    #[test]
    fn constant_forms() {
        assert_eq!(SegmentForm::ConstantOne.eval(3.7), (1.0, 0.0, 0.0));
        let f = SegmentForm::ExpFamily {
            offset: 1.0,
            c1: 0.0,
            c2: 0.0,
            gamma1: -1.0,
            gamma2: 1.0,
            anchor: 0.0,
        };
        assert_eq!(f.eval(12.0), (1.0, 0.0, 0.0));
    }

    #[test]
    fn interior_general_form_pastes_at_threshold() {
        let at = 2.0_f64;
        let f = SegmentForm::interior_from_general(0.5 - at / 2.0, at.exp() / 2.0, -1.0, 2.0);
        let (u, du, _) = f.eval(at);
        assert!((u - 1.0).abs() < 1e-14);
        assert!(du.abs() < 1e-14);
        assert!((beta_form(&f, 0.3, 2.0, -1.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn interior_has_unit_beta_for_tiny_theta() {
        for &th in &[0.0, 1e-12, -3e-7, 0.4] {
            let f = SegmentForm::interior_through(th, 0.7, 1.0, 1.3, -0.2);
            for &a in &[0.0, 0.5, 2.5] {
                assert!((beta_form(&f, a, 0.7, th) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exp_family_solves_feynman_kac() {
        let (rho, theta, k_total, own) = (1.3, -0.4, 3.0, 1.0);
        let (g1, g2) = quadratic_roots(rho, theta, k_total);
        let f = SegmentForm::exp_through(1.0 - own, (g1, g2), 0.5, 2.0, -0.7);
        for &a in &[0.0, 0.2, 1.7] {
            let u = f.eval(a).0;
            let resid = u - (1.0 - own + k_total * beta_form(&f, a, rho, theta));
            assert!(resid.abs() < 1e-12);
        }
        let (u, du, _) = f.eval(0.5);
        assert!((u - 2.0).abs() < 1e-15 && (du + 0.7).abs() < 1e-15);
        let g = f.reanchored(3.0);
        assert!((g.eval(1.1).0 - f.eval(1.1).0).abs() < 1e-13);
    }

    #[test]
    fn lin_comb_of_exp_forms() {
        let gs = quadratic_roots(2.0, -1.0, 1.0);
        let x = SegmentForm::exp_through(0.5, gs, 0.0, 1.5, -0.3);
        let y = SegmentForm::exp_through(0.0, gs, 1.0, 1.2, 0.1);
        let z = SegmentForm::lin_comb(2.0, &x, -1.0, &y).unwrap();
        for &a in &[0.0, 0.4, 1.3] {
            assert!((z.eval(a).0 - (2.0 * x.eval(a).0 - y.eval(a).0)).abs() < 1e-13);
        }
        let other = SegmentForm::exp_through(0.0, quadratic_roots(2.0, -1.0, 2.0), 0.0, 1.0, 0.0);
        assert!(SegmentForm::lin_comb(1.0, &x, 1.0, &other).is_err());
    }

    #[test]
    fn piecewise_eval_sides() {
        let gs = quadratic_roots(2.0, -1.0, 1.0);
        let s1 = Segment::new(0.0, 1.0, SegmentForm::exp_through(0.0, gs, 1.0, 2.0, -1.0));
        let s2 = Segment::new(1.0, 2.0, SegmentForm::exp_through(0.0, gs, 1.0, 2.0, -1.0));
        let pv = PiecewiseValue::new(vec![s1, s2], 2.0).unwrap();
        assert_eq!(pv.breakpoints(), vec![1.0, 2.0]);
        assert!(beta(&pv, 1.0, 2.0, -1.0).is_err());
        assert!(beta(&pv, 0.5, 2.0, -1.0).is_ok());
        assert_eq!(pv.eval(5.0), (1.0, 0.0, 0.0));
        let (l, r) = (pv.eval_left(2.0), pv.eval(2.0));
        assert!(l.0 != 1.0 && r.0 == 1.0);
        assert!(PiecewiseValue::new(vec![Segment::new(0.5, 1.0, SegmentForm::ConstantOne)], 1.0).is_err());
    }

    #[test]
    fn ivp_constant_solution() {
        let seg = integrate_ivp(|_, _, _| 0.0, 0.0, 1.0, 0.0, 3.0, &IvpOptions::default()).unwrap();
        for &a in &[0.0, 1.1, 3.0] {
            let (u, du, _) = seg.eval(a);
            assert!((u - 1.0).abs() < 1e-15 && du.abs() < 1e-15);
        }
    }

    #[test]
    fn ivp_reproduces_interior_backward() {
        let (rho, theta) = (2.0, -1.0);
        let seg = integrate_ivp(|_, _, v| 1.0 / rho + theta * v, 2.0, 1.0, 0.0, 0.0, &IvpOptions::default()).unwrap();
        let exact = SegmentForm::interior_through(theta, rho, 2.0, 1.0, 0.0);
        for i in 0..=40 {
            let a = 2.0 * i as f64 / 40.0;
            assert!((seg.eval(a).0 - exact.eval(a).0).abs() < 1e-8, "a = {a}");
        }
        assert_eq!(seg.a_lo, 0.0);
    }

    #[test]
    fn ivp_event_locates_reflection_point() {
        // interior solution from (2, 1, 0) at θ=−1, ρ=2 hits u+u' = 0 exactly at 0
        let (seg, hit) = integrate_until(
            |_, _, v| 0.5 - v,
            2.0,
            1.0,
            0.0,
            -5.0,
            &IvpOptions::default(),
            |_, u, v| u + v,
        )
        .unwrap();
        assert!(hit.unwrap().abs() < 1e-8);
        assert!((seg.a_lo - hit.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ivp_honours_breakpoints() {
        let opts = IvpOptions {
            breakpoints: vec![0.37, 1.91],
            ..IvpOptions::default()
        };
        let seg = integrate_ivp(|a, _, _| if a < 0.37 { 1.0 } else { -1.0 }, 0.0, 0.0, 0.0, 2.5, &opts).unwrap();
        if let SegmentForm::NumericGrid { knots, .. } = &seg.form {
            assert!(knots.contains(&0.37) && knots.contains(&1.91));
        } else {
            unreachable!()
        }
        // u = a²/2 then continues with slope 0.37 and curvature −1
        let exact = |a: f64| 0.37f64.powi(2) / 2.0 + 0.37 * (a - 0.37) - (a - 0.37).powi(2) / 2.0;
        assert!((seg.eval(2.0).0 - exact(2.0)).abs() < 1e-10);
    }

    #[test]
    fn root_finders() {
        assert!((shoot_scalar(|x| x - 2.0, 0.0, 5.0, 1e-12, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((shoot_scalar(|x| x - 20.0, 0.0, 5.0, 1e-12, 4).unwrap() - 20.0).abs() < 1e-11);
        assert!(matches!(brent(|x| x * x + 1.0, -1.0, 1.0, &RootOptions::default()), Err(Error::NoSignChange { .. })));
        let r = bisect(|x| x.powi(3) - 2.0, 0.0, 2.0, &RootOptions::with_tol(1e-14)).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
        let first = first_crossing(|x| (x * 3.0).sin(), 0.5, 10.0, 100, false).unwrap().unwrap();
        assert!((first - std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normal_reflection_residual_of_interior_family() {
        // u(0)+u'(0) for the interior solution pasted at ã, θ = −1, ρ = 2, equals (2 − ã)/2
        let resid = |at: f64| {
            let f = SegmentForm::interior_through(-1.0, 2.0, at, 1.0, 0.0);
            let (u, du, _) = f.eval(0.0);
            u + du
        };
        for &at in &[0.5, 1.0, 3.0] {
            assert!((resid(at) - (2.0 - at) / 2.0).abs() < 1e-12);
        }
        assert!((shoot_scalar(resid, 0.1, 5.0, 1e-12, 0).unwrap() - 2.0).abs() < 1e-10);
    }
}
