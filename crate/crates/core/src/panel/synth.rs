//! Synthetic credit panels with known default risk.
//!
//! Each consumer carries five slowly moving latent risk factors, one per
//! feature group. A two-state delinquency chain enters the 90+ state with a
//! logistic hazard of those factors and leaves it with a fixed cure rate.
//! Features are noisy, partly non-linear readings of the factors and of the
//! delinquency history. The credit score is a monotone transform of a second,
//! noisier index that leans on history length and new credit more than the
//! true hazard does, so it ranks defaults strictly worse than `true_pd`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{transition_matrix, ConsumerQuarter, Panel, Race, TransitionMatrix, LABEL_HORIZON};
use crate::features::{FeatureSemantics, FeatureVector, N_FEATURES};
use crate::rng::{domain, stream};
use crate::{Error, Result};

const N_LATENT: usize = 5;
const PILOT_CONSUMERS: usize = 4000;
/// Quarters simulated before the first emitted quarter so that lagged
/// features are fully populated.
const BURN_IN: usize = 12;

/// Generator settings. Defaults reproduce the published label frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_consumers: usize,
    pub n_quarters: usize,
    /// Target share of labeled consumer-quarters with a default.
    pub target_default_rate: f64,
    pub default_rate_tolerance: f64,
    /// Probability of leaving the 90+ state in a quarter.
    pub cure_rate: f64,
    /// Hazard weights on the five latent factors (group order).
    pub risk_weights: [f64; N_LATENT],
    /// Weight of the payment-history x amounts-owed interaction in the hazard.
    pub risk_interaction: f64,
    /// Score-index weights on the latent factors.
    pub score_weights: [f64; N_LATENT],
    /// Weight of current and past delinquency in the score index.
    pub score_delinquency_weight: f64,
    /// Persistent per-consumer score noise.
    pub score_consumer_noise: f64,
    /// Per-quarter score noise.
    pub score_quarter_noise: f64,
    /// Log-slope of the score noise scale in the noiseless score index, so the
    /// score is less precise for riskier consumers.
    pub score_noise_gradient: f64,
    pub feature_noise: f64,
    /// AR(1) coefficient of the latent factors.
    pub factor_persistence: f64,
    pub unscored_share: f64,
    pub n_states: usize,
    pub zips_per_state: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_consumers: 5_000,
            n_quarters: 20,
            target_default_rate: 0.184,
            default_rate_tolerance: 0.02,
            cure_rate: 0.146,
            risk_weights: [1.0, 0.9, 0.25, 0.2, 0.3],
            risk_interaction: 0.25,
            score_weights: [0.9, 0.75, 0.5, 0.25, 0.5],
            score_delinquency_weight: 1.6,
            score_consumer_noise: 0.45,
            score_quarter_noise: 0.35,
            score_noise_gradient: 0.7,
            feature_noise: 1.0,
            factor_persistence: 0.9,
            unscored_share: 0.05,
            n_states: 10,
            zips_per_state: 20,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_consumers == 0 {
            return bad("n_consumers must be at least 1");
        }
        if self.n_quarters < LABEL_HORIZON as usize + 1 {
            return bad("n_quarters must be at least 9 so that a quarter can be labeled");
        }
        if !(self.target_default_rate > 0.0 && self.target_default_rate < 1.0) {
            return bad("target_default_rate must lie in (0, 1)");
        }
        if !(self.cure_rate > 0.0 && self.cure_rate < 1.0) {
            return bad("cure_rate must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.factor_persistence) {
            return bad("factor_persistence must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.unscored_share) {
            return bad("unscored_share must lie in [0, 1]");
        }
        if self.n_states == 0 || self.zips_per_state == 0 || self.n_states > 89 || self.zips_per_state > 899 {
            return bad("n_states must be 1..=89 and zips_per_state 1..=899");
        }
        let noise = [
            self.feature_noise,
            self.score_consumer_noise,
            self.score_quarter_noise,
            self.default_rate_tolerance,
            self.score_noise_gradient.abs(),
        ];
        if noise.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("noise scales and tolerance must be finite and non-negative");
        }
        Ok(())
    }
}

/// Calibration facts about a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    /// Hazard intercept found by calibration on the pilot cohort.
    pub intercept: f64,
    pub pilot_default_rate: f64,
    pub realized_default_rate: f64,
    pub within_tolerance: bool,
    pub transitions: TransitionMatrix,
    /// Score-index values mapped to the score band edges.
    pub score_knots: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct Geography {
    /// Black + Hispanic population share per zip.
    minority_share: Vec<f64>,
}

impl Geography {
    fn new(cfg: &GenConfig, seed: u64) -> Self {
        let mut rng = stream(seed, domain::GEN_GEOGRAPHY, 0);
        let n = cfg.n_states * cfg.zips_per_state;
        let minority_share = (0..n).map(|_| 0.03 + 0.9 * rng.random::<f64>().powf(2.5)).collect();
        Geography { minority_share }
    }

    fn zip(&self, cfg: &GenConfig, index: usize) -> String {
        let state = index / cfg.zips_per_state;
        let local = index % cfg.zips_per_state;
        alloc::format!("{:02}{:03}", 10 + state, 100 + local)
    }
}

/// Everything about a consumer that does not depend on the hazard intercept.
struct LatentPath {
    zip_index: usize,
    race: Race,
    age0: f64,
    history_gap: f64,
    log_income: f64,
    has_mortgage: bool,
    mortgage_size: f64,
    scored: bool,
    /// Standard normal draw scaling the persistent score noise.
    score_offset: f64,
    /// Factors per simulated quarter (burn-in included); factor 2 (history
    /// length) is filled from age.
    factors: Vec<[f64; N_LATENT]>,
    /// Uniform draws driving the delinquency chain.
    chain_draws: Vec<f64>,
}

impl LatentPath {
    fn draw(rng: &mut ChaCha8Rng, cfg: &GenConfig, geo: &Geography) -> Self {
        let total = BURN_IN + cfg.n_quarters;
        let zip_index = rng.random_range(0..geo.minority_share.len());
        let m = geo.minority_share[zip_index];
        let u: f64 = rng.random();
        let race = if u < m * 0.5 {
            Race::Black
        } else if u < m {
            Race::Hispanic
        } else {
            let v = (u - m) / (1.0 - m);
            if v < 0.80 {
                Race::White
            } else if v < 0.92 {
                Race::Api
            } else if v < 0.95 {
                Race::Aian
            } else {
                Race::Multiracial
            }
        };
        let minority = if race.is_minority() { 1.0 } else { 0.0 };
        let age0 = 19.0 + 60.0 * rng.random::<f64>() - BURN_IN as f64 / 4.0;
        let history_gap = (normal(rng) * 4.0).abs() + 1.5 * minority;
        let persistent: [f64; N_LATENT] = core::array::from_fn(|_| normal(rng));
        let log_income =
            10.9 - 0.25 * persistent[1] + 0.012 * (age0 - 40.0) - 0.0004 * (age0 - 40.0).powi(2) - 0.15 * minority
                + 0.35 * normal(rng);
        let has_mortgage = rng.random::<f64>()
            < sigmoid(-1.2 + 0.06 * (age0 - 30.0) + 0.8 * (log_income - 10.9) - 0.4 * persistent[3]);
        let mortgage_size = (5.0 + 0.6 * (log_income - 10.9) + 0.3 * normal(rng)).exp();
        let scored = rng.random::<f64>() >= cfg.unscored_share;
        let score_offset = normal(rng);

        let phi = cfg.factor_persistence;
        let innov = (1.0 - phi * phi).sqrt();
        let mut state = persistent;
        let mut factors = Vec::with_capacity(total);
        for t in 0..total {
            if t > 0 {
                for (k, s) in state.iter_mut().enumerate() {
                    if k != 2 {
                        *s = phi * *s + innov * normal(rng);
                    }
                }
            }
            let age = age0 + t as f64 / 4.0;
            let history = (age - 18.0 - history_gap).max(0.0);
            state[2] = ((12.0 - history) / 8.0).clamp(-2.0, 2.0);
            factors.push(state);
        }
        let chain_draws = (0..total).map(|_| rng.random::<f64>()).collect();
        LatentPath {
            zip_index,
            race,
            age0,
            history_gap,
            log_income,
            has_mortgage,
            mortgage_size,
            scored,
            score_offset,
            factors,
            chain_draws,
        }
    }

    fn risk_index(&self, cfg: &GenConfig, t: usize) -> f64 {
        let f = &self.factors[t];
        let linear: f64 = f.iter().zip(&cfg.risk_weights).map(|(a, b)| a * b).sum();
        linear + cfg.risk_interaction * f[0] * f[1]
    }

    /// Delinquency states and hazards for a given intercept.
    fn run_chain(&self, cfg: &GenConfig, intercept: f64) -> (Vec<u8>, Vec<f64>) {
        let total = self.factors.len();
        let mut d = vec![0u8; total];
        let mut hazard = vec![0.0; total];
        for t in 0..total {
            hazard[t] = sigmoid(intercept + self.risk_index(cfg, t));
            let prev = if t > 0 { d[t - 1] } else { 0 };
            let p = if prev == 1 { 1.0 - cfg.cure_rate } else { hazard[t] };
            d[t] = u8::from(self.chain_draws[t] < p);
        }
        (d, hazard)
    }

    /// `z` is a standard normal quarter draw.
    fn score_index(&self, cfg: &GenConfig, d: &[u8], t: usize, z: f64) -> f64 {
        let f = &self.factors[t];
        let linear: f64 = f.iter().zip(&cfg.score_weights).map(|(a, b)| a * b).sum();
        let prior = f64::from(d[t - 1]);
        let recent = d[t.saturating_sub(8)..t].iter().filter(|&&x| x == 1).count() as f64;
        let signal = linear + cfg.score_delinquency_weight * (prior + 0.25 * recent);
        let scale = (cfg.score_noise_gradient * signal.clamp(-3.0, 3.0)).exp();
        signal + scale * (cfg.score_consumer_noise * self.score_offset + cfg.score_quarter_noise * z)
    }
}

fn calibrate_intercept(cfg: &GenConfig, pilot: &[LatentPath]) -> (f64, f64) {
    let rate_at = |c: f64| {
        let h = LABEL_HORIZON as usize;
        let mut positives = 0usize;
        let mut total = 0usize;
        for p in pilot {
            let (d, _) = p.run_chain(cfg, c);
            for t in BURN_IN..BURN_IN + cfg.n_quarters + 1 - h {
                total += 1;
                positives += usize::from(d[t..t + h].contains(&1));
            }
        }
        positives as f64 / total as f64
    };
    let (mut lo, mut hi) = (-15.0_f64, 5.0_f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid) < cfg.target_default_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    (c, rate_at(c))
}

/// Piecewise-linear map from the score index (higher = riskier) to the
/// 300-850 range, anchored so that band shares follow the industry table.
struct ScoreMap {
    knots: Vec<f64>,
}

impl ScoreMap {
    /// Cumulative population shares at the band edges, riskiest first.
    const EDGE_SHARES: [f64; 6] = [0.0005, 0.06, 0.261, 0.401, 0.764, 0.9995];
    const EDGE_SCORES: [f64; 6] = [300.0, 499.5, 600.5, 660.5, 780.5, 850.0];

    fn fit(mut index_values: Vec<f64>) -> Self {
        index_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let n = index_values.len();
        let knots = Self::EDGE_SHARES
            .iter()
            .map(|&q| index_values[((q * n as f64) as usize).min(n - 1)])
            .collect();
        ScoreMap { knots }
    }

    fn score(&self, index: f64) -> u16 {
        let k = &self.knots;
        let s = &Self::EDGE_SCORES;
        let value = if index >= k[0] {
            s[0]
        } else if index <= k[5] {
            s[5]
        } else {
            let i = (1..6).find(|&i| index >= k[i]).unwrap_or(5);
            let span = k[i - 1] - k[i];
            let w = if span > 0.0 { (k[i - 1] - index) / span } else { 1.0 };
            s[i - 1] + w * (s[i] - s[i - 1])
        };
        (value.round() as u16).clamp(300, 850)
    }
}

/// Generates a synthetic panel; a pure function of `(config, seed)`.
pub fn generate_synthetic(config: &GenConfig, seed: u64) -> Result<(Panel, GenSummary)> {
    config.validate()?;
    let geo = Geography::new(config, seed);

    let pilot: Vec<LatentPath> = (0..PILOT_CONSUMERS)
        .map(|i| LatentPath::draw(&mut stream(seed, domain::GEN_PILOT, i as u64), config, &geo))
        .collect();
    let (intercept, pilot_rate) = calibrate_intercept(config, &pilot);

    let mut pilot_scores = Vec::new();
    for (i, p) in pilot.iter().enumerate() {
        let (d, _) = p.run_chain(config, intercept);
        let mut rng = stream(seed, domain::GEN_PILOT, (PILOT_CONSUMERS + i) as u64);
        for t in BURN_IN..p.factors.len() {
            let z = normal(&mut rng);
            pilot_scores.push(p.score_index(config, &d, t, z));
        }
    }
    drop(pilot);
    let score_map = ScoreMap::fit(pilot_scores);

    let semantics = FeatureSemantics::default();
    let width = (config.n_consumers.max(2) - 1).ilog10() as usize + 1;
    let mut records = Vec::with_capacity(config.n_consumers * config.n_quarters);
    for i in 0..config.n_consumers {
        let mut rng = stream(seed, domain::GEN_CONSUMER, i as u64);
        let path = LatentPath::draw(&mut rng, config, &geo);
        let (d, hazard) = path.run_chain(config, intercept);
        let id = alloc::format!("C{:0width$}", i + 1, width = width);
        let zip = geo.zip(config, path.zip_index);
        for t in BURN_IN..path.factors.len() {
            let features = materialize_features(&path, &d, t, config, &semantics, &mut rng);
            let score_noise = normal(&mut rng);
            let credit_score = path
                .scored
                .then(|| score_map.score(path.score_index(config, &d, t, score_noise)));
            let h = hazard[t];
            let survive = if d[t - 1] == 1 {
                config.cure_rate * (1.0 - h).powi(LABEL_HORIZON - 1)
            } else {
                (1.0 - h).powi(LABEL_HORIZON)
            };
            let age = path.age0 + t as f64 / 4.0;
            records.push(ConsumerQuarter {
                consumer_id: id.clone(),
                quarter: (t - BURN_IN) as i32,
                d_state: d[t],
                credit_score,
                features,
                age: (age * 100.0).round() / 100.0,
                income_est: (path.log_income.exp() * 1.005.powi(t as i32)).round(),
                zip: zip.clone(),
                race: Some(path.race),
                true_pd: Some(1.0 - survive),
            });
        }
    }
    let panel = Panel::from_records(records);

    let labels = panel.labels();
    let keyed: Vec<(&str, i32, u8)> = labels
        .iter()
        .map(|&(i, y)| {
            let r = &panel.records()[i];
            (r.consumer_id.as_str(), r.quarter, y)
        })
        .collect();
    let transitions = transition_matrix(&keyed)?;
    let realized = transitions.default_freq;
    let summary = GenSummary {
        intercept,
        pilot_default_rate: pilot_rate,
        realized_default_rate: realized,
        within_tolerance: (realized - config.target_default_rate).abs() <= config.default_rate_tolerance,
        transitions,
        score_knots: score_map.knots,
    };
    Ok((panel, summary))
}

fn materialize_features(
    path: &LatentPath,
    d: &[u8],
    t: usize,
    cfg: &GenConfig,
    sem: &FeatureSemantics,
    rng: &mut ChaCha8Rng,
) -> FeatureVector {
    let f = &path.factors[t];
    let sigma = cfg.feature_noise;
    let mut x = [0.0; N_FEATURES];
    let noisy = |rng: &mut ChaCha8Rng, load: f64, factor: f64, kind: usize| {
        let v = load * factor + sigma * normal(rng);
        match kind % 3 {
            0 => v,
            1 => (0.5 * v).exp(),
            _ => v.max(0.0),
        }
    };

    // Payment history.
    let window = &d[t.saturating_sub(8)..t];
    x[sem.prior_delinquency] = f64::from(d[t - 1]);
    x[sem.delinquent_quarters] = window.iter().filter(|&&s| s == 1).count() as f64;
    let since = (0..t).rev().find(|&s| d[s] == 1).map_or(40, |s| (t - s).min(40));
    x[2] = since as f64;
    for (j, slot) in x[3..21].iter_mut().enumerate() {
        *slot = noisy(rng, 0.4 + 0.6 * (j as f64 / 17.0), f[0], j);
    }

    // Amounts owed.
    let history = (path.age0 + t as f64 / 4.0 - 18.0 - path.history_gap).max(0.0);
    let limit = (2.5 - 0.5 * f[1] + 0.01 * history + 0.3 * normal(rng)).exp();
    let utilization = 1.0 / (1.0 + (-(0.2 + 1.2 * f[1] + 0.3 * normal(rng))).exp());
    x[sem.card_limit] = limit;
    x[sem.mortgage_balance] = if path.has_mortgage {
        path.mortgage_size * (1.0 - 0.005 * (t as f64)).max(0.2)
    } else {
        0.0
    };
    x[sem.card_balance] = limit * utilization;
    for (j, slot) in x[24..64].iter_mut().enumerate() {
        *slot = noisy(rng, 0.4 + 0.6 * ((j % 10) as f64 / 9.0), f[1], j);
    }

    // Length of history (factor 2 is "short history" risk).
    x[sem.history_years] = history;
    x[65] = (0.55 * history + 1.5 * normal(rng)).max(0.0);
    for (j, slot) in x[66..70].iter_mut().enumerate() {
        *slot = noisy(rng, -0.8, f[2], j);
    }

    // Credit mix.
    let types = (3.2 - 1.0 * f[3] + 0.04 * history.min(30.0) + 0.4 * normal(rng)).round();
    x[sem.product_types] = types.clamp(1.0, 6.0);
    x[71] = if path.has_mortgage { 1.0 } else { 0.0 };
    for (j, slot) in x[72..75].iter_mut().enumerate() {
        *slot = noisy(rng, 0.8, f[3], j);
    }

    // New credit.
    let inquiries = (0.8 + 0.9 * f[4] + 0.7 * normal(rng)).round().max(0.0);
    x[sem.inquiries] = inquiries;
    x[sem.originations] = (0.5 * inquiries - 0.3 * f[0] + 0.3 * normal(rng))
        .round()
        .clamp(0.0, inquiries);
    x[77] = noisy(rng, 0.8, f[4], 0);
    x[78] = noisy(rng, 0.6, f[4], 2);

    FeatureVector::new(x).expect("generator produces finite features")
}
