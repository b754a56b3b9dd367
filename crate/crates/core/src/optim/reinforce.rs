//! Score-function estimator for the gradient of the expected reward of a
//! categorical mesh-selection distribution.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default sample count per estimate.
pub const DEFAULT_REINFORCE_SAMPLES: usize = 8;

/// Categorical distribution over library meshes, parametrized by logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDistribution {
    pub logits: Vec<f64>,
}

impl MeshDistribution {
    pub fn uniform(n: usize) -> Self {
        Self { logits: vec![0.0; n] }
    }

    /// Softmax of the logits.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = self.logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }
}

/// Exact gradient of `Σ p_i r_i` with respect to the logits:
/// `p_k (r_k − Σ p_i r_i)`.
pub fn exact_selection_gradient(dist: &MeshDistribution, rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() != dist.logits.len() {
        return Err(Error::InvalidArgument("one reward per category expected".into()));
    }
    let p = dist.probabilities();
    let expected: f64 = p.iter().zip(rewards).map(|(p, r)| p * r).sum();
    Ok(p.iter().zip(rewards).map(|(p, r)| p * (r - expected)).collect())
}

/// Multi-sample estimate with a leave-one-out mean baseline:
/// `1/n Σ_i (r_i − mean_{j≠i} r_j) ∇ log p(k_i)`.
pub fn reinforce_gradient_with<R: Rng + ?Sized>(
    dist: &MeshDistribution,
    rewards: &[f64],
    num_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if num_samples < 2 {
        return Err(Error::InvalidArgument("the leave-one-out baseline needs at least two samples".into()));
    }
    if rewards.len() != dist.logits.len() {
        return Err(Error::InvalidArgument("one reward per category expected".into()));
    }
    let p = dist.probabilities();
    let sampler = WeightedIndex::new(&p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let samples: Vec<usize> = (0..num_samples).map(|_| sampler.sample(rng)).collect();
    // mean anchored at the first reward, so equal rewards give exact zeros
    let anchor = rewards[samples[0]];
    let n = num_samples as f64;
    let mean = anchor + samples.iter().map(|&k| rewards[k] - anchor).sum::<f64>() / n;
    let mut grad = vec![0.0; p.len()];
    for &k in &samples {
        // r − mean_{j≠i} r_j = n (r − mean) / (n − 1)
        let advantage = n * (rewards[k] - mean) / (n - 1.0);
        if advantage == 0.0 {
            continue;
        }
        // ∇_logits log p_k = e_k − p
        for (j, g) in grad.iter_mut().enumerate() {
            let score = if j == k { 1.0 } else { 0.0 } - p[j];
            *g += advantage * score / n;
        }
    }
    Ok(grad)
}

pub fn reinforce_gradient(dist: &MeshDistribution, rewards: &[f64], num_samples: usize, seed: u64) -> Result<Vec<f64>> {
    reinforce_gradient_with(dist, rewards, num_samples, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Mean and standard error of repeated independent estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub total_samples: usize,
}

/// Runs `batches` independent estimates of `samples_per_batch` draws each
/// and summarizes them per component.
pub fn reinforce_summary(
    dist: &MeshDistribution,
    rewards: &[f64],
    samples_per_batch: usize,
    batches: usize,
    seed: u64,
) -> Result<EstimatorSummary> {
    if batches < 2 {
        return Err(Error::InvalidArgument("need at least two batches".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = dist.logits.len();
    let (mut sum, mut sum_sq) = (vec![0.0; k], vec![0.0; k]);
    for _ in 0..batches {
        let g = reinforce_gradient_with(dist, rewards, samples_per_batch, &mut rng)?;
        for j in 0..k {
            sum[j] += g[j];
            sum_sq[j] += g[j] * g[j];
        }
    }
    let b = batches as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / b).collect();
    let std_error = (0..k)
        .map(|j| {
            let var = ((sum_sq[j] - b * mean[j] * mean[j]) / (b - 1.0)).max(0.0);
            (var / b).sqrt()
        })
        .collect();
    Ok(EstimatorSummary {
        mean,
        std_error,
        total_samples: batches * samples_per_batch,
    })
}
