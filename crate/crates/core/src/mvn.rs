//! Multivariate normal rectangle probabilities.
//!
//! The integral is rewritten with the separation-of-variables transform
//! (Cholesky factor of the correlation, one conditional univariate normal
//! probability per coordinate) and integrated over the unit cube with a
//! randomly shifted Richtmyer lattice rule, periodized with the baker's
//! transform and paired with antithetic points. Variables are reordered so
//! the most constrained coordinates are integrated first. The shifts come
//! from `ChaCha8Rng` seeded with the problem seed, so a result is a pure
//! function of `(problem, seed)` for a given crate version.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::influence::CorrelationMatrix;

pub const DEFAULT_TARGET_ABS_ERROR: f64 = 5e-5;
pub const DEFAULT_SHIFTS: usize = 10;
pub const MAX_DIM: usize = 20;

/// Eigenvalue floor used by [`psd_repair`].
pub const EIGEN_FLOOR: f64 = 1e-8;

const CHOLESKY_JITTER: f64 = 1e-10;
const INITIAL_POINTS: usize = 256;
const MAX_POINTS: usize = 1 << 20;
// Two-sided 99% quantile of Student's t with DEFAULT_SHIFTS - 1 = 9 df.
const T99_9DF: f64 = 3.2498;
const PRIMES: [f64; MAX_DIM] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
    59.0, 61.0, 67.0, 71.0,
];

pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile probability {p} not in (0, 1)")));
    }
    Ok(quantile_unchecked(p))
}

fn quantile_unchecked(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Returns the matrix unchanged when its smallest eigenvalue is at least
/// [`EIGEN_FLOOR`]; otherwise clips the spectrum at the floor, rebuilds and
/// rescales to a unit diagonal.
pub fn psd_repair(corr: &CorrelationMatrix) -> CorrelationMatrix {
    let j = corr.dim();
    let m = DMatrix::from_row_slice(j, j, corr.entries());
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= EIGEN_FLOOR) {
        return corr.clone();
    }
    let clipped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let d: Vec<f64> = (0..j).map(|i| rebuilt[(i, i)].sqrt()).collect();
    let mut entries = vec![0.0; j * j];
    for r in 0..j {
        entries[r * j + r] = 1.0;
        for c in 0..r {
            let x = (0.5 * (rebuilt[(r, c)] + rebuilt[(c, r)]) / (d[r] * d[c])).clamp(-1.0, 1.0);
            entries[r * j + c] = x;
            entries[c * j + r] = x;
        }
    }
    CorrelationMatrix::from_entries_unchecked(corr.endpoint_names().to_vec(), entries)
}

pub fn min_eigenvalue(corr: &CorrelationMatrix) -> f64 {
    let j = corr.dim();
    let m = DMatrix::from_row_slice(j, j, corr.entries());
    SymmetricEigen::new(m).eigenvalues.min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvnProblem {
    pub mean: Vec<f64>,
    pub corr: CorrelationMatrix,
    /// May contain `f64::NEG_INFINITY`.
    pub lower: Vec<f64>,
    /// May contain `f64::INFINITY`.
    pub upper: Vec<f64>,
    pub rng_seed: u64,
    pub target_abs_error: f64,
}

impl MvnProblem {
    /// `P(Z_j > thresholds_j for all j)` for `Z ~ N(mean, corr)`.
    pub fn upper_orthant(mean: Vec<f64>, corr: CorrelationMatrix, thresholds: Vec<f64>, seed: u64) -> Self {
        let j = thresholds.len();
        Self {
            mean,
            corr,
            lower: thresholds,
            upper: vec![f64::INFINITY; j],
            rng_seed: seed,
            target_abs_error: DEFAULT_TARGET_ABS_ERROR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub est_error: f64,
}

/// Cholesky factor of the reordered problem, rows scaled so the diagonal is 1.
struct Prepared {
    /// Strictly lower part, row-major, `l[i][m]` for `m < i`.
    l: Vec<Vec<f64>>,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn truncated_mean(lo: f64, hi: f64) -> f64 {
    let p = std_normal_cdf(hi) - std_normal_cdf(lo);
    if p > 1e-12 {
        (std_normal_pdf(lo) - std_normal_pdf(hi)) / p
    } else if lo.is_infinite() {
        hi
    } else if hi.is_infinite() {
        lo
    } else {
        0.5 * (lo + hi)
    }
}

fn prepare(p: &MvnProblem, jitter: f64) -> Option<Prepared> {
    let j = p.mean.len();
    let mut cov: Vec<Vec<f64>> = (0..j)
        .map(|r| (0..j).map(|c| p.corr.get(r, c) + if r == c { jitter } else { 0.0 }).collect())
        .collect();
    let mut a: Vec<f64> = (0..j).map(|i| p.lower[i] - p.mean[i]).collect();
    let mut b: Vec<f64> = (0..j).map(|i| p.upper[i] - p.mean[i]).collect();
    let mut l = vec![vec![0.0; j]; j];
    let mut y = vec![0.0; j];

    for i in 0..j {
        // Pick the remaining coordinate with the smallest conditional probability.
        let mut best = i;
        let mut best_prob = f64::INFINITY;
        for k in i..j {
            let s: f64 = (0..i).map(|m| l[k][m] * y[m]).sum();
            let var = cov[k][k] - (0..i).map(|m| l[k][m] * l[k][m]).sum::<f64>();
            if var <= 0.0 {
                continue;
            }
            let sd = var.sqrt();
            let prob = std_normal_cdf((b[k] - s) / sd) - std_normal_cdf((a[k] - s) / sd);
            if prob < best_prob {
                best_prob = prob;
                best = k;
            }
        }
        if best != i {
            cov.swap(i, best);
            for row in cov.iter_mut() {
                row.swap(i, best);
            }
            l.swap(i, best);
            a.swap(i, best);
            b.swap(i, best);
        }

        let pivot = cov[i][i] - (0..i).map(|m| l[i][m] * l[i][m]).sum::<f64>();
        if !(pivot > 1e-20) {
            return None;
        }
        let lii = pivot.sqrt();
        l[i][i] = lii;
        for k in i + 1..j {
            let s: f64 = (0..i).map(|m| l[k][m] * l[i][m]).sum();
            l[k][i] = (cov[k][i] - s) / lii;
        }
        let s: f64 = (0..i).map(|m| l[i][m] * y[m]).sum();
        y[i] = truncated_mean((a[i] - s) / lii, (b[i] - s) / lii);
    }

    for i in 0..j {
        let lii = l[i][i];
        a[i] /= lii;
        b[i] /= lii;
        for m in 0..i {
            l[i][m] /= lii;
        }
        l[i].truncate(i);
    }
    Some(Prepared { l, a, b })
}

impl Prepared {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn first_factor(&self) -> (f64, f64) {
        (std_normal_cdf(self.a[0]), std_normal_cdf(self.b[0]))
    }

    /// Integrand at `w` in the unit cube of dimension `dim - 1`.
    fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let (mut d, mut e) = self.first_factor();
        let mut f = e - d;
        for i in 1..self.dim() {
            if f <= 0.0 {
                return 0.0;
            }
            let u = (d + w[i - 1] * (e - d)).clamp(1e-300, 1.0 - 1e-16);
            y[i - 1] = quantile_unchecked(u);
            let s: f64 = self.l[i].iter().zip(y.iter()).map(|(l, y)| l * y).sum();
            d = std_normal_cdf(self.a[i] - s);
            e = std_normal_cdf(self.b[i] - s);
            f *= e - d;
        }
        f.max(0.0)
    }
}

fn validate(p: &MvnProblem) -> Result<()> {
    let j = p.mean.len();
    if j == 0 || j > MAX_DIM {
        return Err(Error::InvalidProblem(format!("dimension {j} not in 1..={MAX_DIM}")));
    }
    if p.corr.dim() != j || p.lower.len() != j || p.upper.len() != j {
        return Err(Error::InvalidProblem("dimension mismatch".into()));
    }
    for i in 0..j {
        if !p.mean[i].is_finite() || p.lower[i].is_nan() || p.upper[i].is_nan() {
            return Err(Error::InvalidProblem(format!("coordinate {i} is not a number")));
        }
        if !(p.lower[i] < p.upper[i]) {
            return Err(Error::InvalidProblem(format!(
                "lower bound {} is not below upper bound {}",
                p.lower[i], p.upper[i]
            )));
        }
    }
    if !(p.target_abs_error > 0.0) {
        return Err(Error::InvalidProblem("target error must be positive".into()));
    }
    Ok(())
}

/// Estimates `P(lower <= Z <= upper)` for `Z ~ N(mean, corr)`.
///
/// The correlation must already be positive semidefinite (see [`psd_repair`]).
pub fn mvn_probability(p: &MvnProblem) -> Result<ProbabilityEstimate> {
    validate(p)?;
    if min_eigenvalue(&p.corr) < -1e-10 {
        return Err(Error::NotPsd);
    }
    let prep = prepare(p, 0.0)
        .or_else(|| prepare(p, CHOLESKY_JITTER))
        .ok_or(Error::NotPsd)?;

    let (d, e) = prep.first_factor();
    if prep.dim() == 1 {
        return Ok(ProbabilityEstimate {
            value: (e - d).clamp(0.0, 1.0),
            est_error: 0.0,
        });
    }

    let dim = prep.dim() - 1;
    let generator: Vec<f64> = PRIMES[..dim].iter().map(|p| p.sqrt().fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let shifts: Vec<Vec<f64>> = (0..DEFAULT_SHIFTS)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut points = INITIAL_POINTS;
    loop {
        let means: Vec<f64> = shifts
            .par_iter()
            .map(|shift| lattice_mean(&prep, &generator, shift, points))
            .collect();
        let m = means.len() as f64;
        let mean = means.iter().sum::<f64>() / m;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let est_error = T99_9DF * (var / m).sqrt();
        if est_error <= p.target_abs_error || points >= MAX_POINTS {
            return Ok(ProbabilityEstimate {
                value: mean.clamp(0.0, 1.0),
                est_error,
            });
        }
        points *= 2;
    }
}

fn lattice_mean(prep: &Prepared, generator: &[f64], shift: &[f64], points: usize) -> f64 {
    let dim = generator.len();
    let mut w = vec![0.0; dim];
    let mut w_anti = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut sum = 0.0;
    for i in 1..=points {
        for k in 0..dim {
            let x = (i as f64 * generator[k] + shift[k]).fract();
            let baker = (2.0 * x - 1.0).abs();
            w[k] = baker;
            w_anti[k] = 1.0 - baker;
        }
        sum += 0.5 * (prep.integrand(&w, &mut y) + prep.integrand(&w_anti, &mut y));
    }
    sum / points as f64
}
