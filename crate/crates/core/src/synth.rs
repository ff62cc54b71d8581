//! Seeded synthetic speaker embeddings with a controllable group skew.
//!
//! Each group `g` has a fixed direction `c_g` (unit vector scaled by
//! `group_direction_strength * sqrt(D)`, so its norm matches a standard
//! normal draw in `D` dimensions). Speaker means and utterances are
//!
//! ```text
//! mu_s = sqrt(rho_g) * c_g + sqrt(1 - rho_g) * z_s,   z_s ~ N(0, I)
//! x    = mu_s + eps,                                 eps ~ N(0, noise_sigma^2 I)
//! ```
//!
//! With `speaker_rank = k > 0`, `z_s` is instead drawn from a fixed random
//! `k`-dimensional subspace and rescaled by `sqrt(D / k)`, keeping its
//! expected squared norm at `D`. Noise stays isotropic, so a learned
//! projection has something to gain over raw cosine scoring.
//!
//! so two speakers of group `g` have mean cosine close to
//! `rho_g * strength^2 / (1 + noise_sigma^2)`: a larger `rho_g` pushes that
//! group's impostor scores up, while genuine scores stay near
//! `1 / (1 + noise_sigma^2)` for both groups.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, EmbeddingRecord, Group};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub speakers_g1: usize,
    pub speakers_g2: usize,
    pub utts_per_speaker: usize,
    pub rho_g1: f64,
    pub rho_g2: f64,
    pub noise_sigma: f64,
    pub group_direction_strength: f64,
    /// Dimension of the subspace speaker identity varies in; 0 means all of
    /// `dim`.
    #[serde(default)]
    pub speaker_rank: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            speakers_g1: 400,
            speakers_g2: 400,
            utts_per_speaker: 20,
            rho_g1: 0.3,
            rho_g2: 0.3,
            noise_sigma: 0.6,
            group_direction_strength: 1.0,
            speaker_rank: 16,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("speakers_g1", self.speakers_g1),
            ("speakers_g2", self.speakers_g2),
            ("utts_per_speaker", self.utts_per_speaker),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::param(format!("{name} must be at least 1")));
            }
        }
        for (name, rho) in [("rho_g1", self.rho_g1), ("rho_g2", self.rho_g2)] {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::param(format!("{name} = {rho} outside [0, 1)")));
            }
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param("noise_sigma must be positive"));
        }
        if self.speaker_rank > self.dim {
            return Err(Error::param(format!(
                "speaker_rank {} exceeds dim {}",
                self.speaker_rank, self.dim
            )));
        }
        if !(self.group_direction_strength >= 0.0 && self.group_direction_strength.is_finite()) {
            return Err(Error::param("group_direction_strength must be non-negative"));
        }
        Ok(())
    }

    fn rho(&self, g: Group) -> f64 {
        match g {
            Group::G1 => self.rho_g1,
            Group::G2 => self.rho_g2,
        }
    }

    fn speakers(&self, g: Group) -> usize {
        match g {
            Group::G1 => self.speakers_g1,
            Group::G2 => self.speakers_g2,
        }
    }
}

fn normal_vec(rng: &mut Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Unit group directions; the second is orthogonalized against the first
/// when `dim > 1`.
fn group_directions(config: &SynthConfig) -> [Vec<f64>; 2] {
    let mut rng = rng::seeded(config.seed, rng::stream::SYNTH_DIRECTIONS);
    let mut u1 = normal_vec(&mut rng, config.dim);
    normalize(&mut u1);
    let mut u2 = normal_vec(&mut rng, config.dim);
    if config.dim > 1 {
        let proj: f64 = u1.iter().zip(&u2).map(|(a, b)| a * b).sum();
        u2.iter_mut().zip(&u1).for_each(|(b, a)| *b -= proj * a);
    }
    normalize(&mut u2);
    [u1, u2]
}

/// Orthonormal basis (rows) of the speaker subspace, by Gram-Schmidt on
/// Gaussian draws.
fn speaker_basis(config: &SynthConfig) -> Vec<Vec<f64>> {
    let mut rng = rng::derive(config.seed, rng::stream::SYNTH_DIRECTIONS, 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(config.speaker_rank);
    while basis.len() < config.speaker_rank {
        let mut v = normal_vec(&mut rng, config.dim);
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

pub fn generate(config: &SynthConfig) -> Result<DatasetSplit> {
    config.validate()?;
    let d = config.dim;
    let scale = config.group_direction_strength * (d as f64).sqrt();
    let dirs = group_directions(config);
    let low_rank = config.speaker_rank > 0 && config.speaker_rank < d;
    let basis = if low_rank { speaker_basis(config) } else { Vec::new() };
    // keeps E|z|^2 = dim whatever the rank
    let coord_scale = if low_rank { (d as f64 / config.speaker_rank as f64).sqrt() } else { 1.0 };

    let mut records = Vec::new();
    let mut speaker_number = 0u64;
    for g in Group::ALL {
        let rho = config.rho(g);
        let shared: Vec<f64> = dirs[g.index()].iter().map(|u| rho.sqrt() * scale * u).collect();
        let own = (1.0 - rho).sqrt();
        for s in 0..config.speakers(g) {
            // per-speaker generator: independent of how many speakers precede it
            let mut rng = rng::derive(config.seed, rng::stream::SYNTH_SPEAKER, speaker_number);
            speaker_number += 1;
            let z = if low_rank {
                let coords = normal_vec(&mut rng, basis.len());
                let mut z = vec![0.0; d];
                for (c, b) in coords.iter().zip(&basis) {
                    z.iter_mut().zip(b).for_each(|(zi, bi)| *zi += coord_scale * c * bi);
                }
                z
            } else {
                normal_vec(&mut rng, d)
            };
            let mean: Vec<f64> = shared.iter().zip(&z).map(|(c, z)| c + own * z).collect();
            let speaker_id = format!("{g}_spk{s:04}");
            for u in 0..config.utts_per_speaker {
                let vector = mean
                    .iter()
                    .map(|m| m + config.noise_sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect();
                records.push(EmbeddingRecord {
                    utt_id: format!("{speaker_id}_u{u:03}"),
                    speaker_id: speaker_id.clone(),
                    group: g,
                    vector,
                });
            }
        }
    }
    DatasetSplit::new(d, records)
}

pub const PRESET_NAMES: [&str; 3] = ["balanced-unbiased", "balanced-biased", "imbalanced-biased"];

/// Named presets:
///
/// * `balanced-unbiased`: equal speaker counts, `rho_g1 = rho_g2 = 0.25`.
/// * `balanced-biased`: equal counts, `rho_g1 = 0.5`, `rho_g2 = 0`.
/// * `imbalanced-biased`: 156 G1 vs 400 G2 speakers (about 2.56:1, scaled
///   from 664 vs 1706), same skew as `balanced-biased`.
///
/// The balanced ones have 400 speakers per group. All use `D = 64`, 20
/// utterances per speaker, speaker rank 16, `noise_sigma = 0.6` and seed 7.
pub fn make_scenarios() -> Vec<(&'static str, SynthConfig)> {
    let base = SynthConfig::default();
    vec![
        (
            "balanced-unbiased",
            SynthConfig {
                rho_g1: 0.25,
                rho_g2: 0.25,
                ..base.clone()
            },
        ),
        (
            "balanced-biased",
            SynthConfig {
                rho_g1: 0.5,
                rho_g2: 0.0,
                ..base.clone()
            },
        ),
        (
            "imbalanced-biased",
            SynthConfig {
                speakers_g1: 156,
                speakers_g2: 400,
                rho_g1: 0.5,
                rho_g2: 0.0,
                ..base
            },
        ),
    ]
}

pub fn preset(name: &str) -> Option<SynthConfig> {
    make_scenarios().into_iter().find(|(n, _)| *n == name).map(|(_, c)| c)
}
