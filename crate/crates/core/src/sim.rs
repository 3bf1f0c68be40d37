//! Monte Carlo simulation of the reflected gap process under a strategy profile.
//!
//! State is the gap `A` and the gain `S − s0` of the best known quality. Each
//! step draws the landscape increment over the explored distance `K·dt`; the
//! best quality ratchets up whenever the landscape overtakes it. Payoffs are
//! normalised by `e^{s0}`.
//!
//! Paths are independent: path `i` draws from stream `i` of a ChaCha generator
//! keyed by the master seed, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::planner::solve_cooperative;
use crate::profile::StrategyProfile;

/// How a step that pushes the landscape above the best quality is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionScheme {
    /// `S` absorbs the end-of-step overshoot only.
    Overshoot,
    /// `S` takes the Brownian-bridge maximum of the step, sampled exactly, and
    /// a path is also stopped when its bridge touches the stopping point between
    /// grid times. Both remove the `O(√dt)` bias of monitoring at grid times only.
    #[default]
    BridgeMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Time horizon; `None` picks one from the truncation bound.
    pub horizon: Option<f64>,
    pub dt: f64,
    pub a0: f64,
    pub s0: f64,
    pub master_seed: u64,
    pub antithetic: bool,
    #[serde(default)]
    pub scheme: ReflectionScheme,
    /// Keep per-path payoffs in the result.
    #[serde(default)]
    pub record_paths: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, a0: f64, master_seed: u64) -> Self {
        Self {
            n_paths,
            horizon: None,
            dt,
            a0,
            s0: 0.0,
            master_seed,
            antithetic: false,
            scheme: ReflectionScheme::default(),
            record_paths: false,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_paths == 0 || !(self.dt > 0.0) || !(self.a0 >= 0.0) || !self.s0.is_finite() {
            return Err(Error::InvalidPrimitive(format!(
                "need n_paths ≥ 1, dt > 0, a0 ≥ 0 (got {}, {}, {})",
                self.n_paths, self.dt, self.a0
            )));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::InvalidPrimitive("antithetic sampling needs an even path count".into()));
        }
        if let Some(t) = self.horizon {
            if !(t >= self.dt) {
                return Err(Error::InvalidPrimitive(format!("horizon {t} shorter than dt")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub a0: f64,
    pub s0: f64,
    pub scheme: ReflectionScheme,
    /// Normalised payoff per player; standard errors over independent paths
    /// (antithetic pairs count as one).
    pub payoffs: Vec<Estimate>,
    /// Best quality at absorption or at the horizon, per path.
    pub s_bar: Vec<f64>,
    /// Explored distance `∫K dt`, per path.
    pub x_bar: Vec<f64>,
    pub absorbed_fraction: f64,
    /// Bound on the discounted payoff dropped beyond the horizon, if finite.
    pub truncation_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_path: Option<Vec<PathRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub absorbed: bool,
    pub payoffs: Vec<f64>,
}

/// Column order of the per-path CSV (player columns follow `x_bar`).
pub const PATH_CSV_PREFIX: [&str; 4] = ["path", "absorbed", "s_bar", "x_bar"];

/// Noise for one path. Normals and uniforms come from separate streams so that
/// a path at step `dt` can be driven by the summed normals of the same path at
/// `dt/2` (`merge = 2`).
struct PathNoise {
    normals: ChaCha8Rng,
    uniforms: ChaCha8Rng,
    merge: u32,
    sign: f64,
}

impl PathNoise {
    fn new(seed: u64, path: u64, merge: u32, sign: f64) -> Self {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * path + k);
            rng
        };
        Self {
            normals: stream(0),
            uniforms: stream(1),
            merge,
            sign,
        }
    }

    fn normal(&mut self) -> f64 {
        let sum: f64 = (0..self.merge).map(|_| self.normals.sample::<f64, _>(StandardNormal)).sum();
        self.sign * sum / (self.merge as f64).sqrt()
    }

    fn uniform(&mut self) -> f64 {
        self.uniforms.random()
    }
}

struct PathOutcome {
    payoffs: Vec<f64>,
    s_bar: f64,
    x_bar: f64,
    absorbed: bool,
}

fn run_path(
    params: &ModelParams,
    profile: &StrategyProfile,
    cfg: &SimConfig,
    horizon: f64,
    noise: &mut PathNoise,
) -> PathOutcome {
    let (r, mu, sigma, dt) = (params.r, params.mu, params.sigma, cfg.dt);
    let n = profile.len();
    let steps = (horizon / dt).ceil() as usize;
    let step_disc = (-r * dt).exp();
    let step_flow = -(-r * dt).exp_m1();
    let mut ks = vec![0.0; n];
    let mut pay = vec![0.0; n];
    let (mut a, mut gain, mut x, mut disc) = (cfg.a0, 0.0f64, 0.0, 1.0);
    let mut absorbed = false;
    let stop = profile.stop();
    for _ in 0..steps {
        let mut crossed = false;
        let k_tot = profile.eval_into(a, &mut ks);
        let growth = gain.exp() * disc;
        if k_tot <= 0.0 {
            // nothing moves again: the rest of the flow is e^{−rt}·e^{gain}
            for p in &mut pay {
                *p += growth;
            }
            absorbed = true;
            break;
        }
        for (p, k) in pay.iter_mut().zip(&ks) {
            *p += growth * step_flow * (1.0 - k);
        }
        let var = sigma * sigma * k_tot * dt;
        let dw = mu * k_tot * dt + var.sqrt() * noise.normal();
        match cfg.scheme {
            ReflectionScheme::Overshoot => {
                a -= dw;
                if a < 0.0 {
                    gain -= a;
                    a = 0.0;
                }
            }
            ReflectionScheme::BridgeMax => {
                let u = noise.uniform();
                let (lo, hi) = (-a, -a + dw);
                let m = 0.5 * (lo + hi + ((hi - lo).powi(2) - 2.0 * var * (1.0 - u).ln()).sqrt());
                if m > 0.0 {
                    gain += m;
                    a = m - hi;
                } else {
                    let before = a;
                    a = -hi;
                    // the bridge may have touched the stopping point between grid times
                    if a < stop {
                        let exponent = 2.0 * (stop - before) * (stop - a) / var;
                        if exponent < 40.0 && noise.uniform() < (-exponent).exp() {
                            crossed = true;
                        }
                    }
                }
            }
        }
        x += k_tot * dt;
        disc *= step_disc;
        if crossed {
            let growth = gain.exp() * disc;
            for p in &mut pay {
                *p += growth;
            }
            absorbed = true;
            break;
        }
    }
    PathOutcome {
        payoffs: pay,
        s_bar: cfg.s0 + gain,
        x_bar: x,
        absorbed,
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (l, r) = xs.split_at(xs.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

fn estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let se = if xs.len() > 1 { (pairwise_sum(&dev) / (n - 1.0) / n).sqrt() } else { f64::INFINITY };
    Estimate { mean, se }
}

pub fn simulate(params: &ModelParams, profile: &StrategyProfile, cfg: &SimConfig) -> Result<SimulationResult> {
    params.check_primitives()?;
    cfg.check()?;
    let n = profile.len();
    let horizon = match cfg.horizon {
        Some(t) => t,
        None => choose_horizon(params, profile, cfg)?,
    };
    let units = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let outcomes: Vec<Vec<PathOutcome>> = (0..units)
        .into_par_iter()
        .map(|i| {
            let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
            signs
                .iter()
                .map(|&sign| run_path(params, profile, cfg, horizon, &mut PathNoise::new(cfg.master_seed, i as u64, 1, sign)))
                .collect()
        })
        .collect();
    let payoffs = (0..n)
        .map(|p| {
            let per_unit: Vec<f64> = outcomes
                .iter()
                .map(|o| pairwise_sum(&o.iter().map(|x| x.payoffs[p]).collect::<Vec<_>>()) / o.len() as f64)
                .collect();
            estimate(&per_unit)
        })
        .collect();
    let flat: Vec<&PathOutcome> = outcomes.iter().flatten().collect();
    let absorbed = flat.iter().filter(|o| o.absorbed).count();
    Ok(SimulationResult {
        n_paths: flat.len(),
        horizon,
        dt: cfg.dt,
        a0: cfg.a0,
        s0: cfg.s0,
        scheme: cfg.scheme,
        payoffs,
        s_bar: flat.iter().map(|o| o.s_bar).collect(),
        x_bar: flat.iter().map(|o| o.x_bar).collect(),
        absorbed_fraction: absorbed as f64 / flat.len() as f64,
        truncation_bound: truncation_bound(params, n, horizon).ok(),
        per_path: cfg.record_paths.then(|| {
            flat.iter()
                .map(|o| PathRecord {
                    absorbed: o.absorbed,
                    payoffs: o.payoffs.clone(),
                })
                .collect()
        }),
    })
}

/// Coarse (`dt`) and fine (`dt/2`) estimates driven by the same Brownian
/// increments, and the per-path difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub horizon: f64,
    pub coarse: Vec<Estimate>,
    pub fine: Vec<Estimate>,
    /// Coarse minus fine.
    pub difference: Vec<Estimate>,
}

pub fn dt_refinement(params: &ModelParams, profile: &StrategyProfile, cfg: &SimConfig) -> Result<Refinement> {
    params.check_primitives()?;
    cfg.check()?;
    let horizon = match cfg.horizon {
        Some(t) => t,
        None => choose_horizon(params, profile, cfg)?,
    };
    let fine_cfg = SimConfig {
        dt: cfg.dt / 2.0,
        ..cfg.clone()
    };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let c = run_path(params, profile, cfg, horizon, &mut PathNoise::new(cfg.master_seed, i, 2, 1.0));
            let f = run_path(params, profile, &fine_cfg, horizon, &mut PathNoise::new(cfg.master_seed, i, 1, 1.0));
            (c.payoffs, f.payoffs)
        })
        .collect();
    let column = |f: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> f64| estimate(&pairs.iter().map(f).collect::<Vec<_>>());
    let n = profile.len();
    Ok(Refinement {
        horizon,
        coarse: (0..n).map(|p| column(&|x| x.0[p])).collect(),
        fine: (0..n).map(|p| column(&|x| x.1[p])).collect(),
        difference: (0..n).map(|p| column(&|x| x.0[p] - x.1[p])).collect(),
    })
}

/// Writes one row per path: index, absorbed flag, `s̄`, `x̄`, then each player's payoff.
pub fn write_paths_csv<W: std::io::Write>(res: &SimulationResult, out: W) -> Result<()> {
    let Some(per_path) = &res.per_path else {
        return Err(Error::InvalidPrimitive("simulation ran without record_paths".into()));
    };
    let mut w = csv::Writer::from_writer(out);
    let n = res.payoffs.len();
    let mut header: Vec<String> = PATH_CSV_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((0..n).map(|p| format!("payoff_{p}")));
    w.write_record(&header)?;
    for (i, rec) in per_path.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            rec.absorbed.to_string(),
            res.s_bar[i].to_string(),
            res.x_bar[i].to_string(),
        ];
        row.extend(rec.payoffs.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `E[exp(sup_{s≤τ} (μs + σB_s))]`.
pub fn running_max_expectation(mu: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 1.0;
    }
    let nd = Normal::standard();
    let s = sigma * tau.sqrt();
    let drift = mu * tau;
    let c = 1.0 + 2.0 * mu / (sigma * sigma);
    let i1 = -nd.cdf(drift / s) + (drift + s * s / 2.0).exp() * nd.cdf((drift + s * s) / s);
    let i2 = if c.abs() < 1e-6 {
        // limit c → 0: ∫_0^∞ Φ(−(m + μτ)/s) dm
        let x = drift / s;
        s * ((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() - x * nd.cdf(-x))
    } else {
        (-nd.cdf(-drift / s) + (-c * drift + c * c * s * s / 2.0).exp() * nd.cdf((c * s * s - drift) / s)) / c
    };
    1.0 + i1 + i2
}

/// Bound on each player's normalised payoff accrued after `horizon`:
/// `N·U*_N(0)·e^{−rT}·E[e^{M_{NT}}]`.
pub fn truncation_bound(params: &ModelParams, n: usize, horizon: f64) -> Result<f64> {
    let team = n as f64;
    let coop = solve_cooperative(params, team)?;
    let u0 = coop.value.value(0.0);
    Ok(team * u0 * (-params.r * horizon).exp() * running_max_expectation(params.mu, params.sigma, team * horizon))
}

/// Horizon at which the truncation bound falls below a tenth of the standard
/// error expected at `cfg.n_paths`, estimated from a pilot run.
pub fn choose_horizon(params: &ModelParams, profile: &StrategyProfile, cfg: &SimConfig) -> Result<f64> {
    let n = profile.len();
    let horizon_for = |target: f64| -> Result<f64> {
        let mut t = 1.0 / params.r;
        while truncation_bound(params, n, t)? > target {
            t *= 1.5;
            if t > 1e6 {
                return Err(Error::ConvergenceFailure("truncation bound does not decay".into()));
            }
        }
        Ok(t)
    };
    let pilot_paths = cfg.n_paths.min(1000);
    let pilot_cfg = SimConfig {
        n_paths: pilot_paths - pilot_paths % 2,
        horizon: Some(horizon_for(1e-2)?),
        antithetic: cfg.antithetic,
        record_paths: false,
        master_seed: cfg.master_seed ^ 0x9e37_79b9_7f4a_7c15,
        ..cfg.clone()
    };
    let pilot = if pilot_cfg.n_paths >= 2 { Some(simulate(params, profile, &pilot_cfg)?) } else { None };
    let se = pilot
        .map(|p| {
            let worst = p.payoffs.iter().map(|e| e.se).fold(0.0, f64::max);
            worst * (pilot_cfg.n_paths as f64 / cfg.n_paths as f64).sqrt()
        })
        .filter(|s| s.is_finite() && *s > 0.0)
        .unwrap_or(1e-3);
    horizon_for(0.1 * se)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunTest {
    pub n: usize,
    pub alpha: f64,
    pub point_mass_observed: f64,
    pub point_mass_expected: f64,
    pub binomial_z: f64,
    pub binomial_pass: bool,
    pub n_tail: usize,
    pub tail_mean: f64,
    pub tail_mean_expected: f64,
    pub ks_distance: f64,
    pub ks_critical: f64,
    pub ks_pass: bool,
}

impl LongRunTest {
    pub fn pass(&self) -> bool {
        self.binomial_pass && self.ks_pass
    }
}

/// Tests long-run standards against `max{s0, s0 + M − a0}` with `M`
/// exponential of mean `(e^{θā}−1)/θ`: a binomial test on the point mass at
/// `s0` and a Kolmogorov–Smirnov test on the excess over `s0`.
pub fn longrun_test(samples: &[f64], theta: f64, a_bar: f64, a0: f64, s0: f64, alpha: f64) -> Result<LongRunTest> {
    if samples.len() < 1000 {
        return Err(Error::InsufficientSamples {
            needed: 1000,
            got: samples.len(),
        });
    }
    let law = crate::planner::longrun_standard_distribution(theta, a_bar, a0, s0);
    let n = samples.len();
    let mut tail: Vec<f64> = samples.iter().filter(|&&s| s > s0).map(|s| s - s0).collect();
    let p_hat = (n - tail.len()) as f64 / n as f64;
    let p = law.point_mass;
    let z_crit = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let (z, binomial_pass) = if p <= 0.0 || p >= 1.0 {
        let exact = p_hat == p;
        (if exact { 0.0 } else { f64::INFINITY }, exact)
    } else {
        let z = (p_hat - p) / (p * (1.0 - p) / n as f64).sqrt();
        (z, z.abs() <= z_crit)
    };
    tail.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let m = tail.len();
    let (ks, crit, ks_pass, mean) = if m == 0 {
        (0.0, 0.0, law.mean_m == 0.0 || p >= 1.0, 0.0)
    } else {
        let mut d = 0.0f64;
        for (i, &y) in tail.iter().enumerate() {
            let f = law.tail_cdf(y);
            d = d.max((f - i as f64 / m as f64).abs()).max(((i + 1) as f64 / m as f64 - f).abs());
        }
        let crit = (-(alpha / 2.0).ln() / 2.0).sqrt() / (m as f64).sqrt();
        (d, crit, d <= crit, pairwise_sum(&tail) / m as f64)
    };
    Ok(LongRunTest {
        n,
        alpha,
        point_mass_observed: p_hat,
        point_mass_expected: p,
        binomial_z: z,
        binomial_pass,
        n_tail: m,
        tail_mean: mean,
        tail_mean_expected: law.mean_m,
        ks_distance: ks,
        ks_critical: crit,
        ks_pass,
    })
}

/// Probability that the best technology overall lies in the region explored
/// under a cutoff-`ā` rule: `1 − e^{−λ·max{a0, ā}}`.
pub fn q_estimate(params: &ModelParams, n: f64, a_bar: f64, a0: f64) -> Result<f64> {
    let v = params.validate(n)?;
    Ok(-(-v.lambda * a0.max(a_bar)).exp_m1())
}

/// Pathwise estimate of the same probability: the landscape is sampled on a
/// grid of step `dx`, explored until the gap reaches `ā`, and its
/// discounted maximum located. Only `q ≥` [`q_estimate`] is claimed.
pub fn q_pathwise(params: &ModelParams, n: f64, a_bar: f64, a0: f64, n_paths: usize, dx: f64, seed: u64) -> Result<f64> {
    let v = params.validate(n)?;
    let (mu, sigma) = (params.mu, params.sigma);
    let drift = mu - v.delta;
    let tail = 20.0 / (v.lambda * drift.abs());
    let hits: usize = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (mut w, mut best) = (0.0f64, a0);
            let (mut x, mut explored) = (0.0, None);
            // the status quo counts as explored
            let (mut top, mut arg_in) = (a0, true);
            while x < explored.unwrap_or(f64::INFINITY) + tail {
                let z: f64 = rng.sample(StandardNormal);
                w += mu * dx + sigma * dx.sqrt() * z;
                x += dx;
                if explored.is_none() {
                    best = best.max(w);
                    if best - w >= a_bar {
                        explored = Some(x);
                    }
                }
                let val = w - v.delta * x;
                if val > top {
                    top = val;
                    arg_in = explored.is_none();
                }
            }
            usize::from(arg_in)
        })
        .sum();
    Ok(hits as f64 / n_paths as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Strategy;

    fn reference(n: u32) -> ModelParams {
        ModelParams::from_rho_theta(2.0, -1.0, n)
    }

    #[test]
    fn idle_profile_pays_exactly_one() {
        let profile = StrategyProfile::symmetric(Strategy::zero(), 3);
        let cfg = SimConfig {
            horizon: Some(5.0),
            ..SimConfig::new(10, 1e-2, 0.3, 1)
        };
        let res = simulate(&reference(3), &profile, &cfg).unwrap();
        for e in &res.payoffs {
            assert!((e.mean - 1.0).abs() < 1e-15 && e.se == 0.0);
        }
        assert!(res.s_bar.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn start_beyond_cutoff_keeps_standard() {
        let profile = StrategyProfile::symmetric(Strategy::cutoff(1.0), 2);
        let cfg = SimConfig {
            s0: 0.7,
            ..SimConfig::new(50, 1e-3, 1.2, 9)
        };
        let res = simulate(&reference(2), &profile, &cfg).unwrap();
        assert!(res.s_bar.iter().all(|&s| s == 0.7));
        assert_eq!(res.absorbed_fraction, 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let profile = StrategyProfile::symmetric(Strategy::cutoff(2.0), 2);
        let cfg = SimConfig::new(64, 1e-2, 0.0, 42);
        let a = simulate(&reference(2), &profile, &cfg).unwrap();
        let b = simulate(&reference(2), &profile, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&reference(2), &profile, &SimConfig::new(64, 1e-2, 0.0, 43)).unwrap();
        assert_ne!(a.payoffs, c.payoffs);
    }

    #[test]
    fn coupled_refinement_shares_noise() {
        let p = ModelParams::from_rho_theta(0.5, -1.0, 2);
        let coop = solve_cooperative(&p, 2.0).unwrap();
        let cfg = SimConfig {
            horizon: Some(20.0),
            ..SimConfig::new(2000, 2e-3, 0.0, 5)
        };
        let r = dt_refinement(&p, &coop.profile(2), &cfg).unwrap();
        assert!(r.difference[0].se < 0.2 * r.fine[0].se);
        assert!(r.difference[0].mean.abs() < r.fine[0].se);
    }

    #[test]
    fn running_max_matches_quadrature() {
        // density of the running maximum, integrated by the trapezoid rule
        for &(mu, sigma, tau) in &[(0.0, 1.0, 1.0), (-1.0, 2f64.sqrt(), 3.0), (0.4, 1.0, 2.0), (-0.5, 1.0, 1.0)] {
            let nd = Normal::standard();
            let s = sigma * f64::sqrt(tau);
            let survival = |m: f64| {
                1.0 - nd.cdf((m - mu * tau) / s) + (2.0 * mu * m / (sigma * sigma)).exp() * nd.cdf((-m - mu * tau) / s)
            };
            let (h, top) = (1e-4, 60.0);
            let mut acc = 0.0;
            let mut m = 0.0f64;
            while m < top {
                acc += 0.5 * h * (m.exp() * survival(m) + (m + h).exp() * survival(m + h));
                m += h;
            }
            let exact = running_max_expectation(mu, sigma, tau);
            assert!((1.0 + acc - exact).abs() < 1e-6 * exact, "{mu} {sigma} {tau}: {} vs {exact}", 1.0 + acc);
        }
    }

    #[test]
    fn truncation_bound_decays() {
        let p = reference(2);
        assert!(truncation_bound(&p, 2, 40.0).unwrap() < truncation_bound(&p, 2, 20.0).unwrap());
        assert!(truncation_bound(&p, 2, 60.0).unwrap() < 1e-8);
    }

    #[test]
    fn longrun_needs_samples() {
        assert!(matches!(
            longrun_test(&[0.0; 10], 0.0, 1.0, 0.0, 0.0, 0.01),
            Err(Error::InsufficientSamples { .. })
        ));
        let t = longrun_test(&[0.0; 2000], 0.0, 0.0, 0.0, 0.0, 0.01).unwrap();
        assert!(t.pass());
    }

    #[test]
    fn q_limits() {
        let p = reference(2);
        let lambda = p.lambda(2.0);
        assert!(q_estimate(&p, 2.0, 10.0 / lambda, 0.0).unwrap() >= 1.0 - (-10f64).exp() - 1e-15);
        assert_eq!(q_estimate(&p, 2.0, 0.0, 0.0).unwrap(), 0.0);
        let qs: Vec<f64> = (0..20).map(|i| q_estimate(&p, 2.0, i as f64 * 0.2, 0.0).unwrap()).collect();
        assert!(qs.windows(2).all(|w| w[1] >= w[0]));
        assert!(matches!(
            q_estimate(&ModelParams::from_rho_theta(1.0, 0.5, 1), 1.0, 1.0, 0.0),
            Err(Error::AssumptionViolated { .. })
        ));
    }
}
