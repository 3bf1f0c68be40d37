//! Game primitives and the composite constants derived from them.
//!
//! The landscape drifts at `mu` and diffuses at `sigma` per unit of technology;
//! players discount at `r`. Everything downstream only needs
//! `θ = 2μ/σ²` and `ρ = σ²/(2r)`, plus a team size.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance within which `θ = −1` counts as constant returns.
pub const CRC_TOL: f64 = 1e-9;

/// Primitives of the exploration game.
///
/// Deserializes from either `{r, mu, sigma, n_players}` or
/// `{rho, theta, n_players}`; the latter fixes `σ = √2`, so `r = 1/ρ` and `μ = θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsInput")]
pub struct ModelParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub n_players: u32,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsInput {
    Primitive {
        r: f64,
        mu: f64,
        sigma: f64,
        n_players: u32,
    },
    Composite {
        rho: f64,
        theta: f64,
        n_players: u32,
    },
}

impl TryFrom<ParamsInput> for ModelParams {
    type Error = Error;

    fn try_from(input: ParamsInput) -> Result<Self> {
        let p = match input {
            ParamsInput::Primitive {
                r,
                mu,
                sigma,
                n_players,
            } => ModelParams::new(r, mu, sigma, n_players),
            ParamsInput::Composite {
                rho,
                theta,
                n_players,
            } => {
                if !(rho > 0.0) || !rho.is_finite() {
                    return Err(Error::InvalidPrimitive(format!("rho must be positive, got {rho}")));
                }
                ModelParams::from_rho_theta(rho, theta, n_players)
            }
        };
        p.check_primitives()?;
        Ok(p)
    }
}

impl ModelParams {
    pub fn new(r: f64, mu: f64, sigma: f64, n_players: u32) -> Self {
        Self {
            r,
            mu,
            sigma,
            n_players,
        }
    }

    /// Parameters with `σ = √2`, which makes `r = 1/ρ` and `μ = θ`.
    pub fn from_rho_theta(rho: f64, theta: f64, n_players: u32) -> Self {
        Self::new(1.0 / rho, theta, std::f64::consts::SQRT_2, n_players)
    }

    /// Same landscape with a different discount rate.
    pub fn with_r(self, r: f64) -> Self {
        Self { r, ..self }
    }

    pub fn with_players(self, n_players: u32) -> Self {
        Self { n_players, ..self }
    }

    pub fn check_primitives(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidPrimitive(format!("r must be positive, got {}", self.r)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidPrimitive(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidPrimitive(format!("mu must be finite, got {}", self.mu)));
        }
        if self.n_players < 1 {
            return Err(Error::InvalidPrimitive("n_players must be at least 1".into()));
        }
        Ok(())
    }

    /// `θ = 2μ/σ²`.
    pub fn theta(&self) -> f64 {
        2.0 * self.mu / (self.sigma * self.sigma)
    }

    /// `ρ = σ²/(2r)`.
    pub fn rho(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.r)
    }

    /// `λ(N) = 1/(Nρ) − θ`, the rate of the exponential overall maximum.
    pub fn lambda(&self, team: f64) -> f64 {
        1.0 / (team * self.rho()) - self.theta()
    }

    /// `δ(N) = r/N`.
    pub fn delta(&self, team: f64) -> f64 {
        self.r / team
    }

    pub fn class(&self) -> LandscapeClass {
        LandscapeClass::classify(self.theta())
    }

    /// `N·ρ·(1+θ)`; the game is well posed for team size `N` iff this is below one.
    pub fn assumption_index(&self, team: f64) -> f64 {
        team * self.rho() * (1.0 + self.theta())
    }

    pub fn satisfies_assumption(&self, team: f64) -> bool {
        self.assumption_index(team) < 1.0
    }

    /// Checks the primitives and the finiteness condition for a team of size `team`.
    ///
    /// Non-integral team sizes are accepted; comparative statics in `N` treat it
    /// as a continuous parameter.
    pub fn validate(&self, team: f64) -> Result<ValidatedParams> {
        self.check_primitives()?;
        if !(team >= 1.0) || !team.is_finite() {
            return Err(Error::InvalidPrimitive(format!("team size must be ≥ 1, got {team}")));
        }
        let value = self.assumption_index(team);
        if value >= 1.0 {
            return Err(Error::AssumptionViolated { team, value });
        }
        Ok(ValidatedParams {
            params: *self,
            team,
            theta: self.theta(),
            rho: self.rho(),
            lambda: self.lambda(team),
            delta: self.delta(team),
            class: self.class(),
        })
    }
}

/// Parameters that passed [`ModelParams::validate`] for a given team size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidatedParams {
    pub params: ModelParams,
    pub team: f64,
    pub theta: f64,
    pub rho: f64,
    pub lambda: f64,
    pub delta: f64,
    pub class: LandscapeClass,
}

/// Returns to cooperation, determined by the sign of `θ + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LandscapeClass {
    /// Decreasing returns: `θ < −1`.
    #[serde(rename = "DRC")]
    Decreasing,
    /// Constant returns: `θ = −1`.
    #[serde(rename = "CRC")]
    Constant,
    /// Increasing returns: `θ > −1`.
    #[serde(rename = "IRC")]
    Increasing,
}

impl LandscapeClass {
    pub fn classify(theta: f64) -> Self {
        if (theta + 1.0).abs() <= CRC_TOL {
            LandscapeClass::Constant
        } else if theta < -1.0 {
            LandscapeClass::Decreasing
        } else {
            LandscapeClass::Increasing
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LandscapeClass::Decreasing => "DRC",
            LandscapeClass::Constant => "CRC",
            LandscapeClass::Increasing => "IRC",
        }
    }
}

impl fmt::Display for LandscapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Roots `γ1 < 0 < γ2` of `γ(γ − θ) = 1/(Kρ)`.
///
/// The smaller-magnitude root is recovered from the product `γ1γ2 = −1/(Kρ)`
/// to avoid cancellation.
pub fn quadratic_roots(rho: f64, theta: f64, intensity: f64) -> (f64, f64) {
    debug_assert!(rho > 0.0 && intensity > 0.0);
    let c = 1.0 / (intensity * rho);
    let s = (theta * theta + 4.0 * c).sqrt();
    if theta >= 0.0 {
        let g2 = 0.5 * (theta + s);
        (-c / g2, g2)
    } else {
        let g1 = 0.5 * (theta - s);
        (g1, -c / g1)
    }
}

/// Team-size limit and patience threshold (both only exist for increasing returns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalLimits {
    /// `1/(ρ(1+θ))`: the largest team for which payoffs stay finite.
    pub n_hat: Option<f64>,
    /// Discount rate above which the resource constraint stops binding in large teams.
    pub r_hat: Option<f64>,
}

pub fn critical_limits(params: &ModelParams) -> CriticalLimits {
    let theta = params.theta();
    if LandscapeClass::classify(theta) != LandscapeClass::Increasing {
        return CriticalLimits {
            n_hat: None,
            r_hat: None,
        };
    }
    let s2 = params.sigma * params.sigma;
    CriticalLimits {
        n_hat: Some(1.0 / (params.rho() * (1.0 + theta))),
        r_hat: Some(s2 / (2.0 * rho_hat(theta))),
    }
}

/// `ρ̂(θ) = (θ − ln(1+θ))/θ²`, the largest `ρ` for which the unconstrained
/// symmetric construction meets the reflection condition (`θ > −1`).
pub fn rho_hat(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        // θ − ln(1+θ) = θ²/2 − θ³/3 + θ⁴/4 − θ⁵/5 + θ⁶/6 − …
        0.5 - theta / 3.0 + theta * theta / 4.0 - theta.powi(3) / 5.0 + theta.powi(4) / 6.0
    } else {
        (theta - theta.ln_1p()) / (theta * theta)
    }
}

/// A real number or `+∞`, kept apart from overflow.
///
/// Serializes as a JSON number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// Lossy view for arithmetic: `Infinite` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(x) => x,
            Extended::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x:?}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(x) => s.serialize_f64(*x),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Extended::Finite(x)),
            Raw::Str(s) if s == "inf" => Ok(Extended::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}
