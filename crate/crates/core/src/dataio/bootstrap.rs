//! Ground-truth stand-in portfolio with known structure.
//!
//! Features are drawn from fixed marginals. Claim counts follow an ordinal
//! logit on a linear risk score: `P(Y ≥ k) = σ(κ (s − τₖ))`, with thresholds
//! `τₖ` calibrated once per [`GroundTruthSpec`] on a fixed calibration sample so that the
//! population mix matches the target. Amounts are `NB_Claim` times a
//! log-linear severity with lognormal noise.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal, Poisson};
use rayon::prelude::*;

use crate::rng::{self, stream};
use crate::schema::{default_schema, territory_codes, Portfolio, Schema};
use crate::{Error, Result};

/// How a feature enters a linear score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Linear,
    Log1p,
}

/// `weight · (transform(x) − centre) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTerm {
    pub variable: String,
    pub transform: Transform,
    pub centre: f64,
    pub scale: f64,
    pub weight: f64,
}

impl LinearTerm {
    fn new(variable: &str, transform: Transform, centre: f64, scale: f64, weight: f64) -> Self {
        Self {
            variable: variable.into(),
            transform,
            centre,
            scale,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub age_mean: f64,
    pub age_sd: f64,
    pub male_share: f64,
    pub car_age_mean: f64,
    pub car_age_sd: f64,
    pub married_share: f64,
    /// Private, Commute, Farmer, Commercial.
    pub car_use: [f64; 4],
    pub credit_mean: f64,
    pub credit_sd: f64,
    pub urban_share: f64,
    pub full_year_share: f64,
    pub annual_miles_median: f64,
    pub annual_miles_log_sd: f64,
    /// Dirichlet concentration of the day-of-week shares, Monday first.
    pub weekday_concentration: [f64; 7],
    pub harsh_accel_median: f64,
    pub harsh_brake_median: f64,
    pub harsh_log_sd: f64,
    pub turn_median: f64,
    pub turn_log_sd: f64,
    /// Loadings of the harsh-event and turn log-rates on a shared driving
    /// style factor.
    pub style_loading: [f64; 2],
}

impl Default for Marginals {
    fn default() -> Self {
        Self {
            age_mean: 46.0,
            age_sd: 14.0,
            male_share: 0.54,
            car_age_mean: 5.5,
            car_age_sd: 3.5,
            married_share: 0.7,
            car_use: [0.53, 0.41, 0.01, 0.05],
            credit_mean: 800.0,
            credit_sd: 75.0,
            urban_share: 0.8,
            full_year_share: 0.55,
            annual_miles_median: 9000.0,
            annual_miles_log_sd: 0.45,
            weekday_concentration: [6.0, 6.0, 6.0, 6.0, 6.5, 3.5, 3.0],
            harsh_accel_median: 20.0,
            harsh_brake_median: 8.0,
            harsh_log_sd: 0.8,
            turn_median: 300.0,
            turn_log_sd: 0.9,
            style_loading: [0.9, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSpec {
    pub marginals: Marginals,
    /// Target shares of 0, 1, 2 and 3 claims.
    pub claim_mix: [f64; 4],
    pub risk_terms: Vec<LinearTerm>,
    /// Logit slope κ; larger values make counts closer to deterministic in
    /// the risk score.
    pub sharpness: f64,
    pub severity_log_base: f64,
    pub severity_terms: Vec<LinearTerm>,
    pub severity_noise_sd: f64,
    pub calibration_rows: usize,
    pub calibration_seed: u64,
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        use Transform::*;
        Self {
            marginals: Marginals::default(),
            claim_mix: [0.95603, 0.0419, 0.002, 0.00007],
            risk_terms: vec![
                LinearTerm::new("Insured.age", Linear, 46.0, 14.0, -0.3),
                LinearTerm::new("Credit.score", Linear, 800.0, 75.0, -0.3),
                LinearTerm::new("Brake.06miles", Log1p, 2.2, 0.8, 0.25),
                LinearTerm::new("Brake.08miles", Log1p, 1.3, 0.8, 0.25),
                LinearTerm::new("Accel.06miles", Log1p, 3.0, 0.8, 0.25),
                LinearTerm::new("Accel.08miles", Log1p, 2.0, 0.8, 0.25),
                LinearTerm::new("Left.turn.intensity08", Log1p, 5.7, 0.9, 0.15),
                LinearTerm::new("Right.turn.intensity08", Log1p, 5.7, 0.9, 0.15),
                LinearTerm::new("Total.miles.driven", Log1p, 8.4, 0.8, 0.3),
            ],
            sharpness: 25.0,
            severity_log_base: 7.9,
            severity_terms: vec![
                LinearTerm::new("Car.age", Linear, 5.5, 3.5, 0.25),
                LinearTerm::new("Credit.score", Linear, 800.0, 75.0, -0.3),
                LinearTerm::new("Insured.age", Linear, 46.0, 14.0, 0.15),
                LinearTerm::new("Annual.miles.drive", Log1p, 9.1, 0.45, 0.2),
                LinearTerm::new("Region", Linear, 0.8, 0.4, 0.1),
            ],
            severity_noise_sd: 0.1,
            calibration_rows: 100_000,
            calibration_seed: 0x5EED_CA11,
        }
    }
}

struct Resolved {
    index: Vec<usize>,
    terms: Vec<LinearTerm>,
}

impl Resolved {
    fn new(schema: &Schema, terms: &[LinearTerm]) -> Result<Self> {
        let mut index = Vec::with_capacity(terms.len());
        for t in terms {
            let j = schema.require(&t.variable)?;
            if j >= schema.n_features() {
                return Err(Error::InvalidArgument(format!(
                    "score term `{}` is not a feature",
                    t.variable
                )));
            }
            if !(t.scale > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "score term `{}` needs a positive scale",
                    t.variable
                )));
            }
            index.push(j);
        }
        Ok(Self {
            index,
            terms: terms.to_vec(),
        })
    }

    fn score(&self, row: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.index)
            .map(|(t, &j)| {
                let x = match t.transform {
                    Transform::Linear => row[j],
                    Transform::Log1p => row[j].ln_1p(),
                };
                t.weight * (x - t.centre) / t.scale
            })
            .sum()
    }
}

impl GroundTruthSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.claim_mix.iter().sum();
        if self.claim_mix.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "claim mix {:?} must be nonnegative and sum to 1 (sum is {sum})",
                self.claim_mix
            )));
        }
        let m = &self.marginals;
        let use_sum: f64 = m.car_use.iter().sum();
        if m.car_use.iter().any(|p| !(*p >= 0.0)) || (use_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "Car.use shares must sum to 1".into(),
            ));
        }
        for (name, p) in [
            ("male_share", m.male_share),
            ("married_share", m.married_share),
            ("urban_share", m.urban_share),
            ("full_year_share", m.full_year_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1]")));
            }
        }
        if m.weekday_concentration.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidArgument(
                "weekday concentrations must be positive".into(),
            ));
        }
        if !(self.sharpness > 0.0) || !(self.severity_noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(
                "sharpness and noise must be positive".into(),
            ));
        }
        if self.calibration_rows == 0 {
            return Err(Error::InvalidArgument(
                "calibration needs at least one row".into(),
            ));
        }
        Ok(())
    }

    /// Tail targets `P(Y ≥ k)`, `k = 1, 2, 3`.
    pub fn tail_targets(&self) -> [f64; 3] {
        let m = &self.claim_mix;
        [m[1] + m[2] + m[3], m[2] + m[3], m[3]]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn categorical(rng: &mut rng::Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn clamp_round(x: f64, lo: f64, hi: f64) -> f64 {
    x.round().clamp(lo, hi)
}

/// Draws one feature row in `schema` order.
fn draw_features(
    m: &Marginals,
    schema: &Schema,
    n_territories: usize,
    rng: &mut rng::Rng,
) -> Vec<f64> {
    let mut row = vec![0.0; schema.n_features()];
    let mut put = |name: &str, x: f64| row[schema.index_of(name).expect("default schema")] = x;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut z = || std_normal.sample(rng);

    let age = clamp_round(m.age_mean + m.age_sd * z(), 16.0, 103.0);
    let car_age = clamp_round(m.car_age_mean + m.car_age_sd * z(), -2.0, 20.0);
    let credit = clamp_round(m.credit_mean + m.credit_sd * z(), 300.0, 900.0);
    let miles_z = z();
    let style = z();
    let [hl, tl] = m.style_loading;
    let (he, te) = (
        (1.0 - hl * hl).max(0.0).sqrt(),
        (1.0 - tl * tl).max(0.0).sqrt(),
    );
    let accel_e = z();
    let accel_z = hl * style + he * accel_e;
    let brake_z = hl * style + he * (0.6 * accel_e + 0.8 * z());
    let left_e = z();
    let left_z = tl * style + te * left_e;
    let right_z = tl * style + te * (0.7 * left_e + 0.71 * z());

    put("Insured.age", age);
    put("Car.age", car_age);
    put("Credit.score", credit);
    put(
        "Insured.sex",
        if rng.random::<f64>() < m.male_share {
            0.0
        } else {
            1.0
        },
    );
    put(
        "Marital",
        if rng.random::<f64>() < m.married_share {
            0.0
        } else {
            1.0
        },
    );
    put("Car.use", categorical(rng, &m.car_use) as f64);
    put(
        "Region",
        if rng.random::<f64>() < m.urban_share {
            1.0
        } else {
            0.0
        },
    );
    put("Territory", rng.random_range(0..n_territories) as f64);

    let duration = if rng.random::<f64>() < m.full_year_share {
        366.0
    } else {
        rng.random_range(22..=365) as f64
    };
    put("Duration", duration);
    let max_noclaims = (age - 16.0).min(79.0) as u32;
    put("Years.noclaims", rng.random_range(0..=max_noclaims) as f64);

    let annual_miles = (m.annual_miles_median.ln() + m.annual_miles_log_sd * miles_z)
        .exp()
        .min(100_000.0);
    put("Annual.miles.drive", annual_miles);
    let pct_driven: f64 = 1.05 * Beta::new(4.0, 2.0).expect("beta").sample(rng);
    put("Annual.pct.driven", pct_driven);
    let usage = LogNormal::new(0.0, 0.35).expect("lognormal").sample(rng);
    put(
        "Total.miles.driven",
        (annual_miles * duration / 366.0 * pct_driven * usage).min(100_000.0),
    );

    let gammas: Vec<f64> = m
        .weekday_concentration
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("gamma").sample(rng))
        .collect();
    let total: f64 = gammas.iter().sum();
    let mut shares: Vec<f64> = gammas.iter().map(|g| g / total).collect();
    shares[6] = (1.0 - shares[..6].iter().sum::<f64>()).max(0.0);
    for (day, &s) in ["mon", "tue", "wed", "thr", "fri", "sat", "sun"]
        .iter()
        .zip(&shares)
    {
        put(&format!("Pct.drive.{day}"), s);
    }
    let wkday: f64 = shares[..5].iter().sum();
    put("Pct.drive.wkday", wkday);
    put("Pct.drive.wkend", 1.0 - wkday);

    let two: f64 = Beta::new(2.0, 5.0).expect("beta").sample(rng);
    let three = two * rng.random_range(0.2..0.7);
    let four = three * rng.random_range(0.2..0.7);
    put("Pct.drive.2hrs", two);
    put("Pct.drive.3hrs", three);
    put("Pct.drive.4hrs", four);
    put(
        "Pct.drive.rush.am",
        Beta::new(2.0, 8.0).expect("beta").sample(rng),
    );
    put(
        "Pct.drive.rush.pm",
        Beta::new(2.5, 8.0).expect("beta").sample(rng),
    );
    put(
        "Avgdays.week",
        (7.0 * Beta::<f64>::new(5.0, 2.0).expect("beta").sample(rng)).min(7.0),
    );

    let mut poisson = |lambda: f64| {
        if lambda <= 0.0 {
            0.0
        } else {
            Poisson::new(lambda)
                .expect("poisson")
                .sample(rng)
                .min(100_000.0)
        }
    };
    let accel = (m.harsh_accel_median.ln() + m.harsh_log_sd * accel_z).exp();
    let brake = (m.harsh_brake_median.ln() + m.harsh_log_sd * brake_z).exp();
    let left = (m.turn_median.ln() + m.turn_log_sd * left_z).exp();
    let right = (m.turn_median.ln() + m.turn_log_sd * right_z).exp();
    let harsh_decay = [1.0, 0.35, 0.18, 0.06, 0.03, 0.01];
    let turn_decay = [1.0, 0.5, 0.25, 0.12, 0.06];
    let mut counts = Vec::with_capacity(22);
    for base in [accel, brake] {
        for d in harsh_decay {
            counts.push(poisson(base * d));
        }
    }
    for base in [left, right] {
        for d in turn_decay {
            counts.push(poisson(base * d));
        }
    }
    let mut k = 0;
    for prefix in ["Accel", "Brake"] {
        for t in ["06", "08", "09", "11", "12", "14"] {
            put(&format!("{prefix}.{t}miles"), counts[k]);
            k += 1;
        }
    }
    for side in ["Left", "Right"] {
        for t in ["08", "09", "10", "11", "12"] {
            put(&format!("{side}.turn.intensity{t}"), counts[k]);
            k += 1;
        }
    }
    row
}

fn row_rng(seed: u64, i: usize) -> rng::Rng {
    rng::stream_rng(rng::derive_seed(seed, stream::GROUND_TRUTH), i as u64)
}

/// Smallest `τ` with `mean σ(κ (s − τ)) ≤ target`, by bisection.
fn calibrate_threshold(scores: &[f64], kappa: f64, target: f64) -> f64 {
    if target <= 0.0 {
        return f64::INFINITY;
    }
    if target >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let rate = |tau: f64| {
        scores
            .iter()
            .map(|&s| sigmoid(kappa * (s - tau)))
            .sum::<f64>()
            / scores.len() as f64
    };
    let lo_s = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_s = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 50.0 / kappa + 1.0;
    let (mut lo, mut hi) = (lo_s - pad, hi_s + pad);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Count thresholds `τ₁ < τ₂ < τ₃` of the ordinal logit, calibrated on the
/// calibration sample of `spec`.
pub fn calibrated_thresholds(spec: &GroundTruthSpec) -> Result<[f64; 3]> {
    spec.validate()?;
    let schema = default_schema();
    let risk = Resolved::new(&schema, &spec.risk_terms)?;
    let n_terr = territory_codes().len();
    let scores: Vec<f64> = (0..spec.calibration_rows)
        .into_par_iter()
        .map(|i| {
            let mut r = row_rng(spec.calibration_seed, i);
            risk.score(&draw_features(&spec.marginals, &schema, n_terr, &mut r))
        })
        .collect();
    let tails = spec.tail_targets();
    let mut tau = [0.0; 3];
    for k in 0..3 {
        tau[k] = calibrate_threshold(&scores, spec.sharpness, tails[k]);
    }
    for k in 1..3 {
        if tau[k] < tau[k - 1] {
            tau[k] = tau[k - 1];
        }
    }
    Ok(tau)
}

/// `n` policies under the default schema, deterministic in `(spec, n, seed)`.
pub fn bootstrap_ground_truth(spec: &GroundTruthSpec, n: usize, seed: u64) -> Result<Portfolio> {
    let schema = Arc::new(default_schema());
    let tau = calibrated_thresholds(spec)?;
    if n == 0 {
        return Ok(Portfolio::empty(schema, true));
    }
    let risk = Resolved::new(&schema, &spec.risk_terms)?;
    let severity = Resolved::new(&schema, &spec.severity_terms)?;
    let n_terr = territory_codes().len();
    let noise = Normal::new(0.0, spec.severity_noise_sd)
        .map_err(|e| Error::InvalidArgument(format!("severity noise: {e}")))?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = row_rng(seed, i);
            let mut row = draw_features(&spec.marginals, &schema, n_terr, &mut r);
            let s = risk.score(&row);
            let u: f64 = r.random();
            let count = tau
                .iter()
                .filter(|&&t| u < sigmoid(spec.sharpness * (s - t)))
                .count() as f64;
            let amount = if count > 0.0 {
                let log_sev = spec.severity_log_base + severity.score(&row) + noise.sample(&mut r);
                ((count * log_sev.exp()) * 100.0).round().max(1.0) / 100.0
            } else {
                0.0
            };
            row.push(count);
            row.push(amount);
            row
        })
        .collect();
    Portfolio::new(schema, true, rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::claim_mix;

    #[test]
    fn empty_bootstrap_has_header_schema() {
        let p = bootstrap_ground_truth(&GroundTruthSpec::default(), 0, 1).unwrap();
        assert!(p.is_empty());
        assert!(p.has_responses());
        assert_eq!(p.schema().len(), 52);
    }

    #[test]
    fn infeasible_mix_is_rejected() {
        let spec = GroundTruthSpec {
            claim_mix: [0.9560, 0.0419, 0.0020, 0.00007],
            ..Default::default()
        };
        assert!(bootstrap_ground_truth(&spec, 10, 1).is_err());
    }

    #[test]
    fn rows_are_valid_and_amounts_track_counts() {
        let p = bootstrap_ground_truth(&GroundTruthSpec::default(), 3000, 11).unwrap();
        assert!(p.is_validated());
        assert!(p.violations().unwrap().is_empty());
        let counts = p.claim_counts().unwrap();
        let amounts = p.claim_amounts().unwrap();
        for (c, a) in counts.iter().zip(&amounts) {
            assert_eq!(*c == 0.0, *a == 0.0);
        }
        let mix = claim_mix(&counts).unwrap();
        assert!(mix[1] > 0.02 && mix[1] < 0.07, "{mix:?}");
    }

    #[test]
    fn prefix_is_stable_in_n() {
        let spec = GroundTruthSpec::default();
        let a = bootstrap_ground_truth(&spec, 50, 3).unwrap();
        let b = bootstrap_ground_truth(&spec, 80, 3).unwrap();
        assert_eq!(a.data(), &b.data()[..a.data().len()]);
    }

    #[test]
    fn thresholds_are_ordered() {
        let tau = calibrated_thresholds(&GroundTruthSpec::default()).unwrap();
        assert!(tau[0] < tau[1] && tau[1] < tau[2]);
    }
}
