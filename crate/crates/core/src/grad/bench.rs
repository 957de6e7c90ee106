//! Normalized squared gradient norms at random initializations.
//!
//! One trial draws a batch of `B` angle vectors from the family's
//! initialization, scores them with `D_Wass` against a fixed reference batch,
//! and records `‖∂L/∂θ‖² / (B·K)` over the stacked angles. `B = 1` is the
//! single-circuit protocol.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::circuit_batch_grad;
use crate::data::gen_multicluster;
use crate::netgen::{Activation, Generator, RdGenerator};
use crate::otloss::Solver;
use crate::qcore::QubitLayout;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchFamily {
    NoLatentUniform,
    Rd,
    LpqcGaussLinear,
    LpqcGaussTanh,
}

impl BenchFamily {
    pub const ALL: [BenchFamily; 4] = [
        BenchFamily::NoLatentUniform,
        BenchFamily::Rd,
        BenchFamily::LpqcGaussLinear,
        BenchFamily::LpqcGaussTanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchFamily::NoLatentUniform => "no-latent-uniform",
            BenchFamily::Rd => "rd",
            BenchFamily::LpqcGaussLinear => "lpqc-gauss-linear",
            BenchFamily::LpqcGaussTanh => "lpqc-gauss-tanh",
        }
    }

    fn code(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for BenchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub family: BenchFamily,
    pub n: usize,
    pub m: usize,
    pub layers: usize,
    pub trials: usize,
    pub seed: u64,
    /// Generated circuits per trial.
    pub batch: usize,
    /// Size of the fixed reference batch from the four-cluster dataset.
    pub reference_count: usize,
    pub latent_dim: usize,
    pub hidden: usize,
    pub depth: usize,
}

impl BenchConfig {
    pub fn new(family: BenchFamily, n: usize, layers: usize, trials: usize, seed: u64) -> Self {
        BenchConfig {
            family,
            n,
            m: 0,
            layers,
            trials,
            seed,
            batch: 128,
            reference_count: 32,
            latent_dim: 4,
            hidden: 32,
            depth: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub mean: f64,
    /// Sample standard deviation over trials.
    pub std: f64,
    pub per_trial: Vec<f64>,
}

pub const CSV_HEADER: &str = "family,n,m,L,trials,mean_sq_grad_norm,std,seed";

impl BenchResult {
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{:e},{:e},{}",
            c.family, c.n, c.m, c.layers, c.trials, self.mean, self.std, c.seed
        )
    }
}

/// Angle vectors of one trial.
fn trial_angles(cfg: &BenchConfig, layout: &QubitLayout, seed: u64) -> Result<Vec<Vec<f64>>> {
    let k = layout.param_count();
    let mut r = rng::stream(seed, 0);
    Ok(match cfg.family {
        BenchFamily::NoLatentUniform => (0..cfg.batch)
            .map(|_| (0..k).map(|_| r.gen_range(-PI..PI)).collect())
            .collect(),
        BenchFamily::Rd => {
            let mut rd = RdGenerator::new(*layout, 1, seed)?;
            for t in rd.trainable.iter_mut() {
                *t = r.gen_range(-PI..PI);
            }
            (0..cfg.batch).map(|_| rd.draw(&mut r)).collect()
        }
        BenchFamily::LpqcGaussLinear | BenchFamily::LpqcGaussTanh => {
            let act = if cfg.family == BenchFamily::LpqcGaussTanh {
                Activation::Tanh
            } else {
                Activation::Linear
            };
            let generator = Generator::new(*layout, cfg.latent_dim, cfg.hidden, cfg.depth, act, 1, &mut r)?;
            (0..cfg.batch)
                .map(|_| {
                    let z: Vec<f64> = (0..cfg.latent_dim).map(|_| r.sample(StandardNormal)).collect();
                    generator.parameters(&z)
                })
                .collect::<Result<_>>()?
        }
    })
}

pub fn grad_norm_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.trials == 0 || cfg.batch == 0 || cfg.reference_count == 0 {
        return Err(Error::Config(
            "trials, batch and reference count must be positive".into(),
        ));
    }
    let layout = QubitLayout::new(cfg.n, cfg.m, cfg.layers)?;
    let count = cfg.reference_count.div_ceil(4) * 4;
    let mut reference = gen_multicluster(cfg.n, cfg.m, count, rng::derive_seed(&[cfg.seed, cfg.n as u64]))?;
    reference.truncate(cfg.reference_count);
    let norm = (cfg.batch * layout.param_count()) as f64;
    let per_trial = (0..cfg.trials)
        .map(|t| {
            let seed = rng::derive_seed(&[cfg.seed, cfg.family.code(), cfg.n as u64, cfg.layers as u64, t as u64]);
            let thetas = trial_angles(cfg, &layout, seed)?;
            let g = circuit_batch_grad(&layout, &thetas, &reference, Solver::Exact)?;
            Ok(g.d_theta.iter().flatten().map(|x| x * x).sum::<f64>() / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = per_trial.len() as f64;
    let mean = per_trial.iter().sum::<f64>() / n;
    let std = if per_trial.len() > 1 {
        (per_trial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BenchResult {
        config: *cfg,
        mean,
        std,
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_instances_are_positive_and_reproducible() {
        for fam in BenchFamily::ALL {
            let mut cfg = BenchConfig::new(fam, 1, 0, 3, 5);
            cfg.batch = 4;
            cfg.reference_count = 4;
            if fam == BenchFamily::Rd {
                cfg.layers = 2;
            }
            let a = grad_norm_benchmark(&cfg).unwrap();
            assert!(a.mean > 0.0 && a.mean.is_finite(), "{fam}: {}", a.mean);
            let b = grad_norm_benchmark(&cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.csv_row().split(',').count(), CSV_HEADER.split(',').count());
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in BenchFamily::ALL {
            assert_eq!(f.name().parse::<BenchFamily>().unwrap(), f);
        }
        assert!("foo".parse::<BenchFamily>().is_err());
    }
}
