use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvn::std_normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    /// `theta` is the normal correlation, in `(-1, 1)`.
    Gaussian,
    /// `theta > 0`; Kendall's tau is `theta / (theta + 2)`.
    Clayton,
    /// `theta != 0`.
    Frank,
    /// Standard generator parameter `theta >= 1`; 1 is independence.
    Gumbel,
    /// Gumbel with generator parameter `theta + 1`, so `theta >= 0` and
    /// 0 is independence.
    GumbelPaper,
}

impl CopulaFamily {
    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::GumbelPaper => "gumbel_paper",
        }
    }
}

/// A validated copula ready to draw pairs with uniform margins.
#[derive(Debug, Clone)]
pub enum Copula {
    Gaussian { rho: f64, cond_sd: f64 },
    Clayton { theta: f64, frailty: Gamma<f64> },
    Frank { theta: f64 },
    Gumbel { alpha: f64 },
}

impl Copula {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        let bad = || Error::BadTheta {
            copula: family.name(),
            theta,
        };
        if !theta.is_finite() {
            return Err(bad());
        }
        match family {
            CopulaFamily::Gaussian => {
                if theta <= -1.0 || theta >= 1.0 {
                    return Err(bad());
                }
                Ok(Copula::Gaussian {
                    rho: theta,
                    cond_sd: (1.0 - theta * theta).sqrt(),
                })
            }
            CopulaFamily::Clayton => {
                if theta <= 0.0 {
                    return Err(bad());
                }
                Ok(Copula::Clayton {
                    theta,
                    frailty: Gamma::new(1.0 / theta, 1.0).map_err(|_| bad())?,
                })
            }
            CopulaFamily::Frank => {
                if theta == 0.0 {
                    return Err(bad());
                }
                Ok(Copula::Frank { theta })
            }
            CopulaFamily::Gumbel => {
                if theta < 1.0 {
                    return Err(bad());
                }
                Ok(Copula::Gumbel { alpha: theta })
            }
            CopulaFamily::GumbelPaper => {
                if theta < 0.0 {
                    return Err(bad());
                }
                Ok(Copula::Gumbel { alpha: theta + 1.0 })
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match *self {
            Copula::Gaussian { rho, cond_sd } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rho * z1 + cond_sd * rng.sample::<f64, _>(StandardNormal);
                (open_unit(std_normal_cdf(z1)), open_unit(std_normal_cdf(z2)))
            }
            Copula::Clayton { theta, ref frailty } => {
                // Gamma frailty: u = (1 + E / V)^(-1/theta).
                let v = frailty.sample(rng);
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                let f = |e: f64| open_unit((-(e / v).ln_1p() / theta).exp());
                (f(e1), f(e2))
            }
            Copula::Frank { theta } => {
                // Conditional inversion of C(v | u) = w.
                let u: f64 = rng.sample(Open01);
                let w: f64 = rng.sample(Open01);
                let a = (-theta * u).exp();
                let x = w * (-theta).exp_m1() / (w + (1.0 - w) * a);
                (u, open_unit(-x.ln_1p() / theta))
            }
            Copula::Gumbel { alpha } => {
                if alpha == 1.0 {
                    return (rng.sample(Open01), rng.sample(Open01));
                }
                // Positive stable frailty with Laplace transform exp(-s^beta).
                let beta = 1.0 / alpha;
                let s = positive_stable(beta, rng);
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                let f = |e: f64| open_unit((-(e / s).powf(beta)).exp());
                (f(e1), f(e2))
            }
        }
    }
}

/// Kanter's representation of a positive stable variable with index `beta`
/// in (0, 1).
fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u: f64 = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    let zolotarev = ((beta * u).sin().powf(beta) * ((1.0 - beta) * u).sin().powf(1.0 - beta)
        / u.sin())
    .powf(1.0 / (1.0 - beta));
    (zolotarev / e).powf((1.0 - beta) / beta)
}

fn open_unit(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn sample_copula<R: Rng + ?Sized>(
    family: CopulaFamily,
    theta: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let c = Copula::new(family, theta)?;
    Ok((0..n).map(|_| c.sample(rng)).collect())
}
