//! Marginal and conjunctive power of one-sided log-rank tests, and the greedy
//! choice of a fixed-sequence testing order.
//!
//! All non-centralities are magnitudes in the beneficial direction and a
//! hypothesis is rejected when `Z > z_{1-alpha}`. `alpha` is one-sided; halve
//! a two-sided level before passing it in.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::CorrelationMatrix;
use crate::mvn::{mvn_probability, psd_repair, std_normal_cdf, std_normal_quantile, MvnProblem};

/// Candidates whose conjunctive powers differ by less than this are tied.
const TIE_TOLERANCE: f64 = 1e-12;
pub const MAX_EXHAUSTIVE_ENDPOINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EffectSource {
    Direct,
    HazardRatio { hr: f64, events: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointPlan {
    pub name: String,
    pub delta: f64,
    pub source: EffectSource,
}

impl EndpointPlan {
    pub fn direct(name: impl Into<String>, delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::Domain(format!("delta {delta} must be a finite magnitude")));
        }
        Ok(Self {
            name: name.into(),
            delta,
            source: EffectSource::Direct,
        })
    }

    pub fn from_hazard_ratio(name: impl Into<String>, hr: f64, events: u64) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            delta: delta_from_hr(hr, events)?,
            source: EffectSource::HazardRatio { hr, events },
        })
    }
}

/// `|ln(hr)| * sqrt(events / 4)`.
pub fn delta_from_hr(hr: f64, events: u64) -> Result<f64> {
    if !(hr > 0.0) || !hr.is_finite() {
        return Err(Error::Domain(format!("hazard ratio {hr} must be positive")));
    }
    if events == 0 {
        return Err(Error::Domain("event count must be at least 1".into()));
    }
    Ok(hr.ln().abs() * (events as f64 / 4.0).sqrt())
}

/// Smallest event count whose non-centrality reaches `z_{1-alpha} + z_{power}`.
pub fn events_for_power(hr: f64, power: f64, alpha: f64) -> Result<u64> {
    if !(hr > 0.0) || !hr.is_finite() || hr == 1.0 {
        return Err(Error::Domain(format!("hazard ratio {hr} must be positive and not 1")));
    }
    check_alpha(alpha)?;
    let target = std_normal_quantile(1.0 - alpha)? + std_normal_quantile(power)?;
    if target <= 0.0 {
        return Ok(1);
    }
    let log_hr = hr.ln().abs();
    let mut d = (4.0 * (target / log_hr).powi(2)).ceil().max(1.0) as u64;
    // Guard against the ceiling landing one off after rounding.
    while d > 1 && log_hr * ((d - 1) as f64 / 4.0).sqrt() >= target {
        d -= 1;
    }
    while log_hr * (d as f64 / 4.0).sqrt() < target {
        d += 1;
    }
    Ok(d)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::Domain(format!("one-sided alpha {alpha} not in (0, 0.5)")))
    }
}

fn critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    std_normal_quantile(1.0 - alpha)
}

/// `Phi(delta - z_{1-alpha})`.
pub fn marginal_power(delta: f64, alpha: f64) -> f64 {
    match critical_value(alpha) {
        Ok(z) => std_normal_cdf(delta - z),
        Err(_) => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpec {
    endpoints: Vec<EndpointPlan>,
    corr: CorrelationMatrix,
    repaired: CorrelationMatrix,
    alpha: f64,
    primary: String,
}

impl PowerSpec {
    /// The correlation matrix may list its endpoints in any order; it is
    /// re-aligned to `endpoints` by name.
    pub fn new(
        endpoints: Vec<EndpointPlan>,
        corr: CorrelationMatrix,
        alpha: f64,
        primary: impl Into<String>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let primary = primary.into();
        if endpoints.is_empty() {
            return Err(Error::InvalidProblem("no endpoints".into()));
        }
        if corr.dim() != endpoints.len() {
            return Err(Error::InvalidProblem(format!(
                "correlation matrix is {0}x{0} for {1} endpoints",
                corr.dim(),
                endpoints.len()
            )));
        }
        let mut idx = Vec::with_capacity(endpoints.len());
        for (k, e) in endpoints.iter().enumerate() {
            if endpoints[..k].iter().any(|o| o.name == e.name) {
                return Err(Error::DuplicateEndpoint(e.name.clone()));
            }
            let pos = corr
                .endpoint_names()
                .iter()
                .position(|n| *n == e.name)
                .ok_or_else(|| Error::UnknownEndpoint(e.name.clone()))?;
            idx.push(pos);
        }
        if !endpoints.iter().any(|e| e.name == primary) {
            return Err(Error::UnknownEndpoint(primary));
        }
        let corr = corr.select(&idx);
        let repaired = psd_repair(&corr);
        Ok(Self {
            endpoints,
            corr,
            repaired,
            alpha,
            primary,
        })
    }

    pub fn endpoints(&self) -> &[EndpointPlan] {
        &self.endpoints
    }

    pub fn corr(&self) -> &CorrelationMatrix {
        &self.corr
    }

    /// The matrix actually integrated against, after PSD repair.
    pub fn repaired_corr(&self) -> &CorrelationMatrix {
        &self.repaired
    }

    /// Largest absolute change PSD repair made to any entry.
    pub fn repair_max_change(&self) -> f64 {
        self.corr
            .entries()
            .iter()
            .zip(self.repaired.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn primary(&self) -> &str {
        &self.primary
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.endpoints
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| Error::UnknownEndpoint(name.to_string()))
    }

    pub fn marginal_powers(&self) -> Vec<f64> {
        self.endpoints
            .iter()
            .map(|e| marginal_power(e.delta, self.alpha))
            .collect()
    }

    fn with_corr(&self, corr: CorrelationMatrix) -> Self {
        let repaired = psd_repair(&corr);
        Self {
            endpoints: self.endpoints.clone(),
            corr,
            repaired,
            alpha: self.alpha,
            primary: self.primary.clone(),
        }
    }

    /// Primary first, the rest by name, so a set's probability does not depend
    /// on how the caller listed it.
    fn canonical(&self, mut idx: Vec<usize>) -> Vec<usize> {
        idx.sort_by(|&a, &b| {
            let pa = self.endpoints[a].name != self.primary;
            let pb = self.endpoints[b].name != self.primary;
            pa.cmp(&pb).then_with(|| self.endpoints[a].name.cmp(&self.endpoints[b].name))
        });
        idx.dedup();
        idx
    }

    fn set_power(&self, idx: &[usize], seed: u64) -> Result<f64> {
        let idx = self.canonical(idx.to_vec());
        let z = critical_value(self.alpha)?;
        let problem = MvnProblem::upper_orthant(
            idx.iter().map(|&i| self.endpoints[i].delta).collect(),
            self.repaired.select(&idx),
            vec![z; idx.len()],
            seed,
        );
        Ok(mvn_probability(&problem)?.value)
    }
}

/// Probability that every hypothesis in `subset` is rejected.
pub fn conjunctive_power(spec: &PowerSpec, subset: &[String], seed: u64) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidProblem("empty endpoint subset".into()));
    }
    let idx = subset
        .iter()
        .map(|s| spec.index(s))
        .collect::<Result<Vec<_>>>()?;
    spec.set_power(&idx, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyResult {
    pub order: Vec<String>,
    /// Entry `k` is the probability of rejecting the first `k + 1` hypotheses.
    pub stepwise_power: Vec<f64>,
}

impl HierarchyResult {
    /// Expected number of rejected hypotheses under fixed-sequence testing.
    pub fn expected_rejections(&self) -> f64 {
        self.stepwise_power.iter().sum()
    }
}

/// Set probabilities keyed by endpoint bitmask.
struct SetCache<'a> {
    spec: &'a PowerSpec,
    seed: u64,
    values: HashMap<u32, f64>,
}

impl<'a> SetCache<'a> {
    fn new(spec: &'a PowerSpec, seed: u64) -> Self {
        Self {
            spec,
            seed,
            values: HashMap::new(),
        }
    }

    fn get(&mut self, idx: &[usize]) -> Result<f64> {
        let mask = idx.iter().fold(0u32, |m, &i| m | (1 << i));
        if let Some(&v) = self.values.get(&mask) {
            return Ok(v);
        }
        let v = self.spec.set_power(idx, self.seed)?;
        self.values.insert(mask, v);
        Ok(v)
    }
}

/// Builds the order one position at a time, each time appending the endpoint
/// that maximizes the conjunctive power of the prefix. Ties go to the higher
/// marginal power, then to the lexicographically smaller name.
pub fn optimize_hierarchy(spec: &PowerSpec, seed: u64) -> Result<HierarchyResult> {
    let primary = spec.index(&spec.primary)?;
    let marginals = spec.marginal_powers();
    let mut cache = SetCache::new(spec, seed);
    let mut placed = vec![primary];
    let mut stepwise = vec![cache.get(&placed)?];
    let mut remaining: Vec<usize> = (0..spec.endpoints.len()).filter(|&i| i != primary).collect();

    while !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for &cand in &remaining {
            let mut trial = placed.clone();
            trial.push(cand);
            let v = cache.get(&trial)?;
            let better = match best {
                None => true,
                Some((b, bv)) => {
                    if (v - bv).abs() > TIE_TOLERANCE {
                        v > bv
                    } else if marginals[cand] != marginals[b] {
                        marginals[cand] > marginals[b]
                    } else {
                        spec.endpoints[cand].name < spec.endpoints[b].name
                    }
                }
            };
            if better {
                best = Some((cand, v));
            }
        }
        let (chosen, v) = best.expect("remaining is non-empty");
        placed.push(chosen);
        stepwise.push(v);
        remaining.retain(|&i| i != chosen);
    }

    Ok(HierarchyResult {
        order: placed.iter().map(|&i| spec.endpoints[i].name.clone()).collect(),
        stepwise_power: stepwise,
    })
}

/// Cross-check for the greedy order: tries every ordering of the secondaries
/// and keeps the one with the largest expected number of rejections.
pub fn optimize_hierarchy_exhaustive(spec: &PowerSpec, seed: u64) -> Result<HierarchyResult> {
    let j = spec.endpoints.len();
    if j > MAX_EXHAUSTIVE_ENDPOINTS {
        return Err(Error::Domain(format!(
            "exhaustive search supports at most {MAX_EXHAUSTIVE_ENDPOINTS} endpoints, got {j}"
        )));
    }
    let primary = spec.index(&spec.primary)?;
    let mut secondaries: Vec<usize> = (0..j).filter(|&i| i != primary).collect();
    secondaries.sort_by(|&a, &b| spec.endpoints[a].name.cmp(&spec.endpoints[b].name));

    let mut cache = SetCache::new(spec, seed);
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    let mut perm = secondaries.clone();
    loop {
        let mut order = vec![primary];
        order.extend_from_slice(&perm);
        let stepwise = (1..=order.len())
            .map(|k| cache.get(&order[..k]))
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = stepwise.iter().sum();
        // Permutations arrive in lexicographic order, so the first maximum wins ties.
        if best.as_ref().is_none_or(|(_, _, t)| total > *t + TIE_TOLERANCE) {
            best = Some((order, stepwise, total));
        }
        if !next_permutation(&mut perm, |a, b| spec.endpoints[*a].name < spec.endpoints[*b].name) {
            break;
        }
    }
    let (order, stepwise, _) = best.expect("at least one ordering");
    Ok(HierarchyResult {
        order: order.iter().map(|&i| spec.endpoints[i].name.clone()).collect(),
        stepwise_power: stepwise,
    })
}

fn next_permutation<T>(v: &mut [T], less: impl Fn(&T, &T) -> bool) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && !less(&v[i - 1], &v[i]) {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut k = v.len() - 1;
    while !less(&v[i - 1], &v[k]) {
        k -= 1;
    }
    v.swap(i - 1, k);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub shift: f64,
    pub power: f64,
    pub order: Vec<String>,
    pub stepwise_power: Vec<f64>,
}

/// Bound applied to shifted off-diagonal correlations.
pub const SHIFT_CLAMP: f64 = 0.999;

/// Adds each shift to every off-diagonal correlation (clamped to
/// `[-0.999, 0.999]`, then PSD-repaired) and recomputes the full-set power and
/// the greedy order.
pub fn sensitivity_sweep(spec: &PowerSpec, shifts: &[f64], seed: u64) -> Result<Vec<SensitivityRow>> {
    let all: Vec<String> = spec.endpoints.iter().map(|e| e.name.clone()).collect();
    shifts
        .iter()
        .map(|&shift| {
            let shifted = if shift == 0.0 {
                spec.clone()
            } else {
                spec.with_corr(shift_correlations(&spec.corr, shift))
            };
            let power = conjunctive_power(&shifted, &all, seed)?;
            let h = optimize_hierarchy(&shifted, seed)?;
            Ok(SensitivityRow {
                shift,
                power,
                order: h.order,
                stepwise_power: h.stepwise_power,
            })
        })
        .collect()
}

fn shift_correlations(corr: &CorrelationMatrix, shift: f64) -> CorrelationMatrix {
    let j = corr.dim();
    let mut entries = corr.entries().to_vec();
    for r in 0..j {
        for c in 0..j {
            if r != c {
                entries[r * j + c] = (entries[r * j + c] + shift).clamp(-SHIFT_CLAMP, SHIFT_CLAMP);
            }
        }
    }
    CorrelationMatrix::from_entries_unchecked(corr.endpoint_names().to_vec(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::DEFAULT_TARGET_ABS_ERROR;

    const ALPHA: f64 = 0.025;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn exchangeable(labels: &[&str], deltas: &[f64], rho: f64) -> PowerSpec {
        let j = labels.len();
        let mut e = vec![rho; j * j];
        for i in 0..j {
            e[i * j + i] = 1.0;
        }
        let corr = CorrelationMatrix::new(names(labels), e).unwrap();
        let plans = labels
            .iter()
            .zip(deltas)
            .map(|(n, &d)| EndpointPlan::direct(*n, d).unwrap())
            .collect();
        PowerSpec::new(plans, corr, ALPHA, labels[0]).unwrap()
    }

    #[test]
    fn delta_from_table_values() {
        assert!((delta_from_hr(0.83, 1211).unwrap() - 3.24).abs() < 0.01);
        assert!((delta_from_hr(0.85, 485).unwrap() - 1.79).abs() < 0.01);
        assert_eq!(delta_from_hr(1.0, 500).unwrap(), 0.0);
        assert!(delta_from_hr(0.0, 10).is_err());
        assert!(delta_from_hr(-1.0, 10).is_err());
    }

    #[test]
    fn events_needed() {
        let d = events_for_power(0.83, 0.90, ALPHA).unwrap();
        assert!((1209..=1213).contains(&d), "{d}");
        assert_eq!(events_for_power(0.5, 0.90, ALPHA).unwrap(), 88);
        let hr: f64 = 0.7;
        let expect = (4.0 * (1.959963984540054 / hr.ln().abs()).powi(2)).ceil() as u64;
        assert_eq!(events_for_power(hr, 0.5, ALPHA).unwrap(), expect);
        assert!(events_for_power(1.0, 0.9, ALPHA).is_err());
        assert!(events_for_power(0.8, 1.0, ALPHA).is_err());
        assert!(events_for_power(0.8, 0.9, 0.6).is_err());
    }

    #[test]
    fn marginal_power_values() {
        assert!((marginal_power(3.24, ALPHA) - 0.90).abs() < 0.005);
        assert!((marginal_power(1.79, ALPHA) - 0.43).abs() < 0.005);
        let z = std_normal_quantile(1.0 - ALPHA).unwrap();
        assert_eq!(marginal_power(z, ALPHA), 0.5);
    }

    #[test]
    fn singleton_equals_marginal() {
        let spec = exchangeable(&["a", "b"], &[2.5, 1.0], 0.3);
        let v = conjunctive_power(&spec, &names(&["b"]), 1).unwrap();
        assert!((v - marginal_power(1.0, ALPHA)).abs() <= 2.0 * DEFAULT_TARGET_ABS_ERROR);
    }

    #[test]
    fn independence_is_a_product() {
        let spec = exchangeable(&["a", "b", "c"], &[3.0, 2.0, 2.5], 0.0);
        let v = conjunctive_power(&spec, &names(&["a", "b", "c"]), 1).unwrap();
        let prod: f64 = spec.marginal_powers().iter().product();
        assert!((v - prod).abs() <= 3.0 * DEFAULT_TARGET_ABS_ERROR);
    }

    #[test]
    fn two_endpoints_force_the_order() {
        let spec = exchangeable(&["p", "s"], &[3.0, 2.0], 0.5);
        let h = optimize_hierarchy(&spec, 3).unwrap();
        assert_eq!(h.order, names(&["p", "s"]));
        assert_eq!(h.stepwise_power[0], marginal_power(3.0, ALPHA));
        let pair = conjunctive_power(&spec, &names(&["p", "s"]), 3).unwrap();
        assert_eq!(h.stepwise_power[1], pair);
    }

    #[test]
    fn symmetric_secondaries_tie_break_by_name() {
        let spec = exchangeable(&["p", "zeta", "beta", "mu"], &[3.0, 2.0, 2.0, 2.0], 0.4);
        let h = optimize_hierarchy(&spec, 5).unwrap();
        assert_eq!(h.order, names(&["p", "beta", "mu", "zeta"]));
        let e = optimize_hierarchy_exhaustive(&spec, 5).unwrap();
        assert_eq!(e.order, h.order);
        for w in h.stepwise_power.windows(2) {
            assert!(w[1] <= w[0] + 2.0 * DEFAULT_TARGET_ABS_ERROR);
        }
    }

    #[test]
    fn order_invariant_to_input_listing() {
        let a = exchangeable(&["p", "x", "y", "z"], &[3.0, 1.5, 2.5, 2.0], 0.5);
        let b = exchangeable(&["p", "z", "y", "x"], &[3.0, 2.0, 2.5, 1.5], 0.5);
        assert_eq!(optimize_hierarchy(&a, 9).unwrap(), optimize_hierarchy(&b, 9).unwrap());
    }

    #[test]
    fn spec_validation() {
        let corr = CorrelationMatrix::identity(names(&["a", "b"]));
        let plans = vec![EndpointPlan::direct("a", 1.0).unwrap(), EndpointPlan::direct("b", 1.0).unwrap()];
        assert!(PowerSpec::new(plans.clone(), corr.clone(), 0.025, "c").is_err());
        assert!(PowerSpec::new(plans.clone(), corr.clone(), 0.5, "a").is_err());
        assert!(PowerSpec::new(plans[..1].to_vec(), corr, 0.025, "a").is_err());
        assert!(EndpointPlan::direct("a", -1.0).is_err());
    }

    #[test]
    fn correlation_realigned_by_name() {
        let corr = CorrelationMatrix::new(names(&["b", "a"]), vec![1.0, 0.3, 0.3, 1.0]).unwrap();
        let plans = vec![EndpointPlan::direct("a", 1.0).unwrap(), EndpointPlan::direct("b", 2.0).unwrap()];
        let spec = PowerSpec::new(plans, corr, 0.025, "a").unwrap();
        assert_eq!(spec.corr().endpoint_names(), &names(&["a", "b"])[..]);
        assert_eq!(spec.repair_max_change(), 0.0);
    }

    #[test]
    fn permutation_helper_enumerates_all() {
        let mut v = vec![1, 2, 3, 4];
        let mut count = 1;
        while next_permutation(&mut v, |a, b| a < b) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(v, vec![4, 3, 2, 1]);
    }
}
