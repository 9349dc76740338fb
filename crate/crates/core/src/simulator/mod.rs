//! Event-driven two-endpoint trials with copula-coupled event times, and the
//! replicate study that compares the influence-based correlation estimate
//! with the empirical correlation of the log-rank statistics.

mod copula;
mod hazard;

pub use copula::{sample_copula, Copula, CopulaFamily};
pub use hazard::{inv_piecewise_exp, HazardSegment, PiecewiseHazard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TrialDataset;
use crate::error::{Error, Result};
use crate::influence::raw_column;
use crate::stats::{mean, pearson, quantile_sorted};
use crate::survival::{timeline_z, EndpointTimeline};

pub const PRIMARY: &str = "primary";
pub const SECONDARY: &str = "secondary";

/// One simulated trial world. Times are in an arbitrary unit shared by the
/// hazards and the accrual window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Total subjects, split 1:1.
    pub n_obs: usize,
    pub copula: CopulaFamily,
    pub theta: f64,
    /// Control-arm hazards for the primary and secondary endpoint.
    pub hazard: [Vec<HazardSegment>; 2],
    /// Treated hazards are the control hazards times this ratio.
    pub hr: f64,
    /// Length of the uniform accrual window.
    pub accrual_years: f64,
    /// Fraction of subjects censored on the primary endpoint at the stop.
    pub censor_target: f64,
    /// Replace the primary event time by the earlier of the two endpoints.
    pub composite: bool,
    pub n_sim: usize,
    pub seed: u64,
}

/// Validated, ready-to-sample form of a [`ScenarioConfig`].
#[derive(Debug, Clone)]
pub struct Scenario {
    n_obs: usize,
    copula: Copula,
    /// `hazards[endpoint][arm]`.
    hazards: [[PiecewiseHazard; 2]; 2],
    accrual: f64,
    events_to_stop: usize,
    composite: bool,
}

/// Round-half-up of `(1 - censor_target) * n_obs`. The small guard makes
/// decimal halves such as `(1 - 0.9995) * 1000` round up despite the binary
/// representation landing just below one half.
pub fn events_to_stop(n_obs: usize, censor_target: f64) -> usize {
    ((1.0 - censor_target) * n_obs as f64 + 0.5 + 1e-9).floor() as usize
}

impl Scenario {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.n_obs < 2 || cfg.n_obs % 2 != 0 {
            return Err(Error::InvalidScenario(format!(
                "n_obs {} must be even and at least 2",
                cfg.n_obs
            )));
        }
        if !(cfg.hr > 0.0) || !cfg.hr.is_finite() {
            return Err(Error::InvalidScenario(format!("hazard ratio {} must be positive", cfg.hr)));
        }
        if !(cfg.accrual_years > 0.0) || !cfg.accrual_years.is_finite() {
            return Err(Error::InvalidScenario("accrual must be positive".into()));
        }
        if !(cfg.censor_target > 0.0 && cfg.censor_target < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "censor_target {} not in (0, 1)",
                cfg.censor_target
            )));
        }
        let k = events_to_stop(cfg.n_obs, cfg.censor_target);
        if k == 0 {
            return Err(Error::InvalidScenario(
                "censoring target leaves no primary events".into(),
            ));
        }
        let hazard = |j: usize| -> Result<[PiecewiseHazard; 2]> {
            let control = PiecewiseHazard::new(cfg.hazard[j].clone())?;
            let treated = control.scaled(cfg.hr)?;
            Ok([control, treated])
        };
        Ok(Self {
            n_obs: cfg.n_obs,
            copula: Copula::new(cfg.copula, cfg.theta)?,
            hazards: [hazard(0)?, hazard(1)?],
            accrual: cfg.accrual_years,
            events_to_stop: k,
            composite: cfg.composite,
        })
    }

    pub fn events_to_stop(&self) -> usize {
        self.events_to_stop
    }

    /// Simulated columns: `treated`, then per endpoint `(times, events)`.
    fn simulate_columns<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SimulatedColumns> {
        let n = self.n_obs;
        let half = n / 2;
        let mut treated = Vec::with_capacity(n);
        let mut entry = Vec::with_capacity(n);
        let mut t1 = Vec::with_capacity(n);
        let mut t2 = Vec::with_capacity(n);
        for i in 0..n {
            let arm = usize::from(i >= half);
            treated.push(arm == 1);
            entry.push(self.accrual * rng.random::<f64>());
            // The copula couples the distribution functions, so lower-tail
            // dependence (Clayton) acts on early events and upper-tail
            // dependence (Gumbel) on late ones.
            let (u1, u2) = self.copula.sample(rng);
            let a = self.hazards[0][arm].quantile(u1);
            let b = self.hazards[1][arm].quantile(u2);
            t1.push(if self.composite { a.min(b) } else { a });
            t2.push(b);
        }

        let mut calendar: Vec<f64> = entry
            .iter()
            .zip(&t1)
            .map(|(u, t)| u + t)
            .filter(|c| c.is_finite())
            .collect();
        let k = self.events_to_stop;
        if calendar.len() < k {
            return Err(Error::InsufficientEvents {
                needed: k,
                found: calendar.len(),
            });
        }
        let (_, &mut stop, _) = calendar.select_nth_unstable_by(k - 1, f64::total_cmp);

        // Events are decided on the calendar scale so an event exactly at the
        // stop date counts, whatever the rounding of `stop - entry`.
        let censor = |t: &[f64]| -> (Vec<f64>, Vec<bool>) {
            entry
                .iter()
                .zip(t)
                .map(|(&u, &t)| {
                    if u + t <= stop {
                        (t, true)
                    } else {
                        ((stop - u).max(0.0), false)
                    }
                })
                .unzip()
        };
        let (time1, event1) = censor(&t1);
        let (time2, event2) = censor(&t2);
        Ok(SimulatedColumns {
            treated,
            endpoints: [(time1, event1), (time2, event2)],
        })
    }
}

struct SimulatedColumns {
    treated: Vec<bool>,
    endpoints: [(Vec<f64>, Vec<bool>); 2],
}

/// One simulated trial with endpoints named [`PRIMARY`] and [`SECONDARY`].
pub fn simulate_trial<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<TrialDataset> {
    let scenario = Scenario::new(cfg)?;
    let cols = scenario.simulate_columns(rng)?;
    let [(t1, e1), (t2, e2)] = cols.endpoints;
    TrialDataset::from_columns(
        (1..=scenario.n_obs).map(|i| i.to_string()).collect(),
        cols.treated,
        vec![PRIMARY.to_string(), SECONDARY.to_string()],
        vec![t1, t2],
        vec![e1, e2],
    )
}

/// Generator for replicate `r`: the scenario seed with stream `r`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub z_primary: f64,
    pub z_secondary: f64,
    pub rho_hat: f64,
    pub events_primary: usize,
    pub events_secondary: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    /// Pearson correlation of the replicate log-rank z-scores.
    pub rho_tilde: f64,
    /// Mean of the per-replicate estimates.
    pub rho_bar: f64,
    pub bias: f64,
    pub pct_2_5: f64,
    pub pct_97_5: f64,
    pub n_sim_effective: usize,
}

fn replicate(scenario: &Scenario, seed: u64, r: usize) -> Result<Option<ReplicateOutcome>> {
    let mut rng = replicate_rng(seed, r as u64);
    let cols = scenario.simulate_columns(&mut rng)?;
    let mut z = [0.0; 2];
    let mut raw: [Vec<f64>; 2] = Default::default();
    let mut events = [0; 2];
    for (j, (times, ev)) in cols.endpoints.iter().enumerate() {
        let Some(tl) = EndpointTimeline::from_columns(&cols.treated, times, ev) else {
            return Ok(None);
        };
        let Some(zj) = timeline_z(&tl) else {
            return Ok(None);
        };
        z[j] = zj;
        events[j] = tl.total_events;
        raw[j] = raw_column(&tl, &cols.treated, times, ev);
    }
    // Standardization is a per-column constant, so it cancels here.
    let Some(rho_hat) = pearson(&raw[0], &raw[1]) else {
        return Ok(None);
    };
    Ok(Some(ReplicateOutcome {
        replicate: r,
        z_primary: z[0],
        z_secondary: z[1],
        rho_hat,
        events_primary: events[0],
        events_secondary: events[1],
    }))
}

/// Runs every replicate and summarizes them. Replicates without events or
/// with a degenerate statistic are dropped and show up in `n_sim_effective`.
/// The result does not depend on how many threads rayon uses.
pub fn run_study(cfg: &ScenarioConfig) -> Result<StudyResult> {
    run_study_detailed(cfg).map(|(s, _)| s)
}

pub fn run_study_detailed(cfg: &ScenarioConfig) -> Result<(StudyResult, Vec<ReplicateOutcome>)> {
    let scenario = Scenario::new(cfg)?;
    let outcomes = (0..cfg.n_sim)
        .into_par_iter()
        .map(|r| replicate(&scenario, cfg.seed, r))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<ReplicateOutcome> = outcomes.into_iter().flatten().collect();
    Ok((summarize(&kept), kept))
}

pub fn summarize(kept: &[ReplicateOutcome]) -> StudyResult {
    let z1: Vec<f64> = kept.iter().map(|o| o.z_primary).collect();
    let z2: Vec<f64> = kept.iter().map(|o| o.z_secondary).collect();
    let mut rho: Vec<f64> = kept.iter().map(|o| o.rho_hat).collect();
    let rho_tilde = pearson(&z1, &z2).unwrap_or(f64::NAN);
    let rho_bar = if rho.is_empty() { f64::NAN } else { mean(&rho) };
    rho.sort_by(f64::total_cmp);
    StudyResult {
        rho_tilde,
        rho_bar,
        bias: rho_bar - rho_tilde,
        pct_2_5: quantile_sorted(&rho, 0.025),
        pct_97_5: quantile_sorted(&rho, 0.975),
        n_sim_effective: kept.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::logrank_z;

    fn constant(rate: f64) -> Vec<HazardSegment> {
        vec![HazardSegment { start: 0.0, rate }]
    }

    fn config() -> ScenarioConfig {
        ScenarioConfig {
            n_obs: 1000,
            copula: CopulaFamily::Gaussian,
            theta: 0.5,
            hazard: [constant(0.017), constant(0.009)],
            hr: 0.8,
            accrual_years: 1.5,
            censor_target: 0.93,
            composite: false,
            n_sim: 20,
            seed: 17,
        }
    }

    #[test]
    fn stops_at_the_target_event_count() {
        let cfg = config();
        assert_eq!(events_to_stop(1000, 0.93), 70);
        let ds = simulate_trial(&cfg, &mut replicate_rng(1, 0)).unwrap();
        assert_eq!(ds.n(), 1000);
        assert_eq!(ds.n_treated(), 500);
        assert_eq!(ds.event_count(0), 70);
    }

    #[test]
    fn composite_primary_contains_secondary_events() {
        let mut cfg = config();
        cfg.composite = true;
        let ds = simulate_trial(&cfg, &mut replicate_rng(2, 0)).unwrap();
        assert_eq!(ds.event_count(0), 70);
        let (tp, ep) = (ds.times(0), ds.events(0));
        let (ts, es) = (ds.times(1), ds.events(1));
        for i in 0..ds.n() {
            assert!(tp[i] <= ts[i]);
            if es[i] && ts[i] <= tp[i] {
                assert!(ep[i]);
                assert_eq!(tp[i], ts[i]);
            }
        }
    }

    #[test]
    fn late_stop_censors_unenrolled_subjects_at_zero() {
        // Very high hazard: the stop comes long before accrual ends.
        let mut cfg = config();
        cfg.hazard = [constant(50.0), constant(50.0)];
        cfg.censor_target = 0.9;
        let ds = simulate_trial(&cfg, &mut replicate_rng(3, 0)).unwrap();
        let zeros = (0..ds.n())
            .filter(|&i| ds.times(0)[i] == 0.0 && !ds.events(0)[i])
            .count();
        assert!(zeros > 500);
        assert_eq!(ds.event_count(0), 100);
    }

    #[test]
    fn replicate_matches_public_path() {
        let cfg = config();
        let scenario = Scenario::new(&cfg).unwrap();
        let o = replicate(&scenario, cfg.seed, 4).unwrap().unwrap();
        let ds = simulate_trial(&cfg, &mut replicate_rng(cfg.seed, 4)).unwrap();
        assert_eq!(o.z_primary, logrank_z(&ds, PRIMARY).unwrap());
        let cm = crate::influence::correlation_matrix(
            &ds,
            &[PRIMARY.to_string(), SECONDARY.to_string()],
        )
        .unwrap();
        assert!((cm.get(0, 1) - o.rho_hat).abs() < 1e-12);
    }

    #[test]
    fn study_is_deterministic_and_ordered() {
        let cfg = config();
        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_sim_effective, 20);
        assert_eq!(a.bias, a.rho_bar - a.rho_tilde);
        assert!(a.pct_2_5 <= a.rho_bar && a.rho_bar <= a.pct_97_5);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = config();
        cfg.n_obs = 999;
        assert!(Scenario::new(&cfg).is_err());
        let mut cfg = config();
        cfg.censor_target = 1.0;
        assert!(Scenario::new(&cfg).is_err());
        let mut cfg = config();
        cfg.censor_target = 0.9999;
        assert!(Scenario::new(&cfg).is_err());
        let mut cfg = config();
        cfg.theta = 1.5;
        assert!(matches!(Scenario::new(&cfg), Err(Error::BadTheta { .. })));
    }
}
