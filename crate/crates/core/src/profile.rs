//! Markov strategies: piecewise right-continuous maps from the gap to the
//! fraction of the resource spent on exploration.

use serde::{Deserialize, Serialize};

use crate::odekit::SegmentForm;

/// Exploration fraction on one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum StrategyForm {
    Constant { k: f64 },
    /// `k(a) = clamp(scale·(u(a) − shift), 0, 1)` for a payoff form `u`; this is
    /// how interior actions tied to a value function are stored.
    PayoffAffine {
        payoff: SegmentForm,
        shift: f64,
        scale: f64,
    },
}

impl StrategyForm {
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            StrategyForm::Constant { k } => *k,
            StrategyForm::PayoffAffine { payoff, shift, scale } => {
                (scale * (payoff.eval(a).0 - shift)).clamp(0.0, 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPiece {
    pub a_lo: f64,
    pub a_hi: f64,
    #[serde(flatten)]
    pub form: StrategyForm,
}

/// A single player's strategy; zero outside the listed pieces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Strategy {
    pub pieces: Vec<StrategyPiece>,
}

impl Strategy {
    /// Never explore.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Explore fully below `cutoff`, exploit above.
    pub fn cutoff(cutoff: f64) -> Self {
        let mut s = Self::default();
        if cutoff > 0.0 {
            s.push(0.0, cutoff, StrategyForm::Constant { k: 1.0 });
        }
        s
    }

    /// Appends a piece, merging it into the previous one when both are the same constant.
    pub fn push(&mut self, a_lo: f64, a_hi: f64, form: StrategyForm) {
        if a_hi <= a_lo {
            return;
        }
        if let Some(last) = self.pieces.last_mut() {
            if last.a_hi == a_lo && last.form == form && matches!(form, StrategyForm::Constant { .. }) {
                last.a_hi = a_hi;
                return;
            }
        }
        self.pieces.push(StrategyPiece { a_lo, a_hi, form });
    }

    pub fn eval(&self, a: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.a_lo <= a);
        if i == 0 {
            return 0.0;
        }
        let p = &self.pieces[i - 1];
        if a < p.a_hi {
            p.form.eval(a)
        } else {
            0.0
        }
    }

    /// Upper end of the last piece: the strategy is zero beyond it.
    pub fn support_end(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.a_hi)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pieces.iter().flat_map(|p| [p.a_lo, p.a_hi]).filter(|&a| a > 0.0).collect();
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup();
        out
    }

    /// True for `k = 1` on `[0, c)` and `k = 0` beyond, for some `c ≥ 0`.
    pub fn is_cutoff(&self) -> bool {
        let mut expect_lo = 0.0;
        let mut seen_zero = false;
        for p in &self.pieces {
            let StrategyForm::Constant { k } = p.form else {
                return false;
            };
            if k == 1.0 && !seen_zero {
                if p.a_lo != expect_lo {
                    return false;
                }
                expect_lo = p.a_hi;
            } else if k == 0.0 {
                seen_zero = true;
            } else {
                return false;
            }
        }
        true
    }
}

/// One strategy per player.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub players: Vec<Strategy>,
}

impl StrategyProfile {
    pub fn new(players: Vec<Strategy>) -> Self {
        Self { players }
    }

    /// Everyone plays the same strategy.
    pub fn symmetric(strategy: Strategy, n: usize) -> Self {
        Self::new(vec![strategy; n])
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    /// Writes each player's action at `a` into `out` and returns their sum.
    pub fn eval_into(&self, a: f64, out: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (o, s) in out.iter_mut().zip(&self.players) {
            *o = s.eval(a);
            total += *o;
        }
        total
    }

    /// Total intensity `K(a) = Σ k_n(a)`.
    pub fn intensity(&self, a: f64) -> f64 {
        self.players.iter().map(|s| s.eval(a)).sum()
    }

    /// Intensity of everybody except `player`.
    pub fn others_intensity(&self, player: usize, a: f64) -> f64 {
        self.players
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != player)
            .map(|(_, s)| s.eval(a))
            .sum()
    }

    /// Gap beyond which nobody explores.
    pub fn stop(&self) -> f64 {
        self.players.iter().map(Strategy::support_end).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_strategy() {
        let s = Strategy::cutoff(1.5);
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval(1.4999), 1.0);
        assert_eq!(s.eval(1.5), 0.0);
        assert!(s.is_cutoff());
        assert!(Strategy::zero().is_cutoff());
    }

    #[test]
    fn push_merges_equal_constants() {
        let mut s = Strategy::zero();
        s.push(0.0, 1.0, StrategyForm::Constant { k: 1.0 });
        s.push(1.0, 2.0, StrategyForm::Constant { k: 1.0 });
        s.push(2.0, 3.0, StrategyForm::Constant { k: 0.0 });
        s.push(3.0, 4.0, StrategyForm::Constant { k: 1.0 });
        assert_eq!(s.pieces.len(), 3);
        assert!(!s.is_cutoff());
        assert_eq!(s.breakpoints(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn profile_intensity_and_json() {
        let mut free = Strategy::zero();
        free.push(
            0.5,
            1.0,
            StrategyForm::PayoffAffine {
                payoff: SegmentForm::ConstantOne,
                shift: 0.0,
                scale: 0.25,
            },
        );
        let p = StrategyProfile::new(vec![Strategy::cutoff(1.0), free]);
        assert_eq!(p.intensity(0.7), 1.25);
        assert_eq!(p.others_intensity(0, 0.7), 0.25);
        assert_eq!(p.stop(), 1.0);
        let s = serde_json::to_string(&p).unwrap();
        let back: StrategyProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
