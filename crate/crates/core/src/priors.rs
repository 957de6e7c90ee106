//! Latent priors `r(z)`: single-mode Gaussian/Uniform and their mixtures.
//!
//! Single mode: `N(0, I_d)` or flat on `[-1/e, 1/e]^d`. Mixtures use
//! components `N(μᵢ, e⁻² I_d)` or flat on `[μᵢ − e⁻², μᵢ + e⁻²]^d`. The mode
//! index is drawn categorically from the weights, then the component is
//! sampled. Priors are frozen once built.

use std::f64::consts::E;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPriorSpec {
    pub family: PriorFamily,
    pub dim: usize,
    /// Mixing weights `cᵢ`, one per mode.
    pub weights: Vec<f64>,
    /// Mode centers `μᵢ`; ignored for a single mode.
    pub centers: Vec<Vec<f64>>,
}

impl LatentPriorSpec {
    pub fn single(family: PriorFamily, dim: usize) -> Self {
        LatentPriorSpec {
            family,
            dim,
            weights: vec![1.0],
            centers: vec![vec![0.0; dim]],
        }
    }

    /// `modes` equally weighted components with centers drawn from
    /// [`init_mode_centers`]. One mode gives [`LatentPriorSpec::single`].
    pub fn mixture(family: PriorFamily, dim: usize, modes: usize, seed: u64) -> Self {
        if modes <= 1 {
            return Self::single(family, dim);
        }
        LatentPriorSpec {
            family,
            dim,
            weights: vec![1.0 / modes as f64; modes],
            centers: init_mode_centers(dim, modes, seed),
        }
    }

    pub fn modes(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        if self.weights.is_empty() {
            return Err(Error::Config("prior needs at least one mode".into()));
        }
        if self.centers.len() != self.weights.len() {
            return Err(Error::Config(format!(
                "{} mode centers for {} weights",
                self.centers.len(),
                self.weights.len()
            )));
        }
        if self.centers.iter().any(|c| c.len() != self.dim) {
            return Err(Error::Config("mode center length differs from latent dimension".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("mixing weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixing weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Half-width (uniform) or standard deviation (Gaussian) of a component.
    pub fn component_scale(&self) -> f64 {
        match (self.family, self.modes()) {
            (PriorFamily::Gaussian, 1) => 1.0,
            (PriorFamily::Uniform, 1) => 1.0 / E,
            (PriorFamily::Gaussian, _) => 1.0 / E,
            (PriorFamily::Uniform, _) => 1.0 / (E * E),
        }
    }

    /// Draws one latent vector and reports the mode it came from.
    pub fn draw(&self, r: &mut rng::Rng) -> (usize, Vec<f64>) {
        let mode = if self.modes() == 1 {
            0
        } else {
            WeightedIndex::new(&self.weights).expect("validated weights").sample(r)
        };
        let scale = self.component_scale();
        let center: &[f64] = if self.modes() == 1 { &[] } else { &self.centers[mode] };
        let z = (0..self.dim)
            .map(|k| {
                let mu = center.get(k).copied().unwrap_or(0.0);
                let x: f64 = match self.family {
                    PriorFamily::Gaussian => r.sample(StandardNormal),
                    PriorFamily::Uniform => r.gen_range(-1.0..=1.0),
                };
                mu + scale * x
            })
            .collect();
        (mode, z)
    }
}

/// `count` i.i.d. latent draws, reproducible from `seed`.
pub fn sample_prior(spec: &LatentPriorSpec, seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    Ok(sample_prior_with_modes(spec, seed, count)?
        .into_iter()
        .map(|(_, z)| z)
        .collect())
}

pub fn sample_prior_with_modes(spec: &LatentPriorSpec, seed: u64, count: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    spec.validate()?;
    let mut r = rng::stream(seed, 0);
    Ok((0..count).map(|_| spec.draw(&mut r)).collect())
}

/// `modes` standard-normal centers in `R^dim`.
pub fn init_mode_centers(dim: usize, modes: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, 1);
    (0..modes)
        .map(|_| (0..dim).map(|_| r.sample(StandardNormal)).collect())
        .collect()
}
