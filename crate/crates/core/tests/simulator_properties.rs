//! Distributional properties of the trial simulator.

use lrcorr::simulator::{
    events_to_stop, inv_piecewise_exp, replicate_rng, run_study, run_study_detailed,
    sample_copula, simulate_trial, CopulaFamily, HazardSegment, PiecewiseHazard, ScenarioConfig,
};
use lrcorr::stats::{mean, pearson};
use lrcorr::{logrank_z, Error};

fn constant(rate: f64) -> Vec<HazardSegment> {
    vec![HazardSegment { start: 0.0, rate }]
}

fn gaussian(theta: f64, censor_target: f64) -> ScenarioConfig {
    ScenarioConfig {
        n_obs: 4000,
        copula: CopulaFamily::Gaussian,
        theta,
        hazard: [constant(0.017), constant(0.009)],
        hr: 0.8,
        accrual_years: 1.5,
        censor_target,
        composite: false,
        n_sim: 200,
        seed: 11,
    }
}

/// KS statistic of a sample against a continuous cdf.
fn ks(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[test]
fn event_time_margins_follow_their_hazards() {
    let n = 100_000;
    // 1.628 / sqrt(n) is the asymptotic 1% critical value.
    let crit = 1.628 / (n as f64).sqrt();
    let piecewise = PiecewiseHazard::new(vec![
        HazardSegment { start: 0.0, rate: 0.007 },
        HazardSegment { start: 2.0, rate: 0.012 },
    ])
    .unwrap();
    let flat = PiecewiseHazard::constant(0.017).unwrap();
    for (k, (family, theta)) in [
        (CopulaFamily::Gaussian, 0.8),
        (CopulaFamily::Clayton, 1.0),
        (CopulaFamily::Frank, 4.0),
        (CopulaFamily::Gumbel, 2.0),
    ]
    .into_iter()
    .enumerate()
    {
        let pairs = sample_copula(family, theta, n, &mut replicate_rng(5, k as u64)).unwrap();
        let t1: Vec<f64> = pairs.iter().map(|p| inv_piecewise_exp(p.0, &flat)).collect();
        let t2: Vec<f64> = pairs.iter().map(|p| inv_piecewise_exp(p.1, &piecewise)).collect();
        let d1 = ks(t1, |t| flat.cdf(t));
        let d2 = ks(t2, |t| piecewise.cdf(t));
        assert!(d1 < crit && d2 < crit, "{family:?}: {d1} {d2}");
    }
}

#[test]
fn exact_event_count_at_the_stop() {
    for (n_obs, cens) in [(1000, 0.93), (4000, 0.8), (1002, 0.5)] {
        let mut cfg = gaussian(0.5, cens);
        cfg.n_obs = n_obs;
        let ds = simulate_trial(&cfg, &mut replicate_rng(3, 1)).unwrap();
        assert_eq!(ds.event_count(0), events_to_stop(n_obs, cens));
    }
    assert_eq!(events_to_stop(1000, 0.93), 70);
    // 0.0005 * 1000 = 0.5 rounds up.
    assert_eq!(events_to_stop(1000, 0.9995), 1);
}

#[test]
fn unit_hazard_ratio_balances_events() {
    let mut cfg = gaussian(0.0, 0.8);
    cfg.hr = 1.0;
    cfg.n_obs = 8000;
    let k = events_to_stop(cfg.n_obs, cfg.censor_target) as f64;
    let mut worst: f64 = 0.0;
    for r in 0..20 {
        let ds = simulate_trial(&cfg, &mut replicate_rng(21, r)).unwrap();
        let treated_events = (0..ds.n())
            .filter(|&i| ds.treated()[i] && ds.events(0)[i])
            .count() as f64;
        // Binomial(k, 1/2) standardized difference.
        worst = worst.max((2.0 * treated_events - k).abs() / k.sqrt());
    }
    assert!(worst < 4.0, "{worst}");
}

#[test]
fn null_log_rank_scores_are_standard_normal() {
    let mut cfg = gaussian(0.0, 0.8);
    cfg.hr = 1.0;
    cfg.n_sim = 400;
    let (_, reps) = run_study_detailed(&cfg).unwrap();
    let z: Vec<f64> = reps.iter().map(|o| o.z_primary).collect();
    let m = mean(&z);
    let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
    assert!(m.abs() < 4.0 / 20.0, "mean {m}");
    assert!((sd - 1.0).abs() < 0.15, "sd {sd}");
}

#[test]
fn alternative_pushes_scores_negative() {
    // Fewer treated events than expected under a protective ratio.
    let cfg = gaussian(0.0, 0.8);
    let ds = simulate_trial(&cfg, &mut replicate_rng(8, 0)).unwrap();
    assert!(logrank_z(&ds, "primary").unwrap() < 0.0);
}

#[test]
fn censoring_dilutes_the_correlation() {
    let mut light = gaussian(0.8, 0.8);
    let mut heavy = gaussian(0.8, 0.93);
    light.n_sim = 2000;
    heavy.n_sim = 2000;
    let a = run_study(&light).unwrap();
    let b = run_study(&heavy).unwrap();
    assert!(b.rho_tilde < a.rho_tilde, "{} !< {}", b.rho_tilde, a.rho_tilde);
}

#[test]
fn replicate_scores_reproduce_rho_tilde() {
    let cfg = gaussian(0.5, 0.8);
    let (res, reps) = run_study_detailed(&cfg).unwrap();
    let z1: Vec<f64> = reps.iter().map(|o| o.z_primary).collect();
    let z2: Vec<f64> = reps.iter().map(|o| o.z_secondary).collect();
    assert_eq!(pearson(&z1, &z2).unwrap(), res.rho_tilde);
    assert_eq!(res.n_sim_effective, reps.len());
    assert!(reps.windows(2).all(|w| w[0].replicate < w[1].replicate));
}

#[test]
fn studies_are_bit_reproducible_and_seed_sensitive() {
    let cfg = gaussian(0.5, 0.93);
    assert_eq!(run_study(&cfg).unwrap(), run_study(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_study(&cfg).unwrap(), run_study(&other).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = gaussian(0.5, 0.93);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(6).build().unwrap();
    let a = one.install(|| run_study(&cfg).unwrap());
    let b = many.install(|| run_study(&cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn bad_scenarios_are_reported() {
    let mut cfg = gaussian(0.5, 0.93);
    cfg.copula = CopulaFamily::Clayton;
    cfg.theta = -1.0;
    assert!(matches!(run_study(&cfg), Err(Error::BadTheta { .. })));
    let mut cfg = gaussian(0.5, 0.93);
    cfg.hazard[1] = vec![HazardSegment { start: 1.0, rate: 0.1 }];
    assert!(run_study(&cfg).is_err());
}
