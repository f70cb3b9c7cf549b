//! Condition-number-controlled synthetic regression data.
//!
//! Features are drawn per sample as `a ~ N(0, sigma_j * Cov)` with a
//! diagonal covariance profile `Cov_rr = r^(-tau)` (1-indexed) and
//! `tau = ln(kappa) / ln(d)`, so the ratio between the largest and smallest
//! covariance entries is exactly `kappa`. Labels follow a planted linear
//! model `y = <w*, a> + noise`. Worker shard sizes are drawn uniformly from
//! a range, which together with per-sample scale draws makes the shards
//! heterogeneous.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{split_train_validation, FederatedDataset, TaskKind, WorkerShard, DEFAULT_SPLIT_RATIO};
use crate::error::{Error, Result};
use crate::glm::Sample;
use crate::seed;
use crate::vector::ParamVector;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub workers: usize,
    pub dim: usize,
    pub kappa: f64,
    pub size_range: (usize, usize),
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.workers < 1 {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        if self.dim < 2 {
            return Err(Error::invalid(
                "dim",
                "must be >= 2 (the covariance exponent is undefined at d = 1 for kappa > 1)",
            ));
        }
        if !(self.kappa >= 1.0) {
            return Err(Error::invalid("kappa", format!("must be >= 1, got {}", self.kappa)));
        }
        if self.size_range.0 > self.size_range.1 {
            return Err(Error::invalid("size_range", "min must be <= max"));
        }
        if self.size_range.0 < 2 {
            return Err(Error::invalid("size_range", "min must be >= 2 so shards can be split"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std", "must be >= 0"));
        }
        Ok(())
    }

    /// Covariance decay exponent `ln(kappa) / ln(d)`.
    pub fn tau(&self) -> f64 {
        self.kappa.ln() / (self.dim as f64).ln()
    }

    /// Diagonal covariance profile entry for 0-based coordinate `r`.
    pub fn covariance_entry(&self, r: usize) -> f64 {
        ((r + 1) as f64).powf(-self.tau())
    }

    pub fn provenance(&self) -> String {
        format!(
            "synthetic{{n={},d={},kappa={},size_range=[{},{}],noise_std={},seed={}}}",
            self.workers, self.dim, self.kappa, self.size_range.0, self.size_range.1,
            self.noise_std, self.seed
        )
    }
}

/// Generates the federated regression dataset plus the planted ground-truth
/// parameters.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FederatedDataset, ParamVector)> {
    spec.validate()?;
    let d = spec.dim;
    let cov: Vec<f64> = (0..d).map(|r| spec.covariance_entry(r)).collect();

    let mut truth_rng = seed::stream_rng(spec.seed, seed::STREAM_SYNTH_TRUTH, 0);
    let w_star: ParamVector = (0..d)
        .map(|_| StandardNormal.sample(&mut truth_rng))
        .collect();

    let mut shards = Vec::with_capacity(spec.workers);
    for i in 0..spec.workers {
        let mut rng = seed::stream_rng(spec.seed, seed::STREAM_SYNTH_WORKER, i as u64);
        let size = rng.random_range(spec.size_range.0..=spec.size_range.1);
        let mut samples = Vec::with_capacity(size);
        for _ in 0..size {
            let sigma: f64 = rng.random_range(1.0..30.0);
            let mut features = Vec::with_capacity(d);
            for r in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(z * (sigma * cov[r]).sqrt());
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            let label = features
                .iter()
                .zip(w_star.iter())
                .map(|(a, w)| a * w)
                .sum::<f64>()
                + noise * spec.noise_std;
            samples.push(Sample::new(features, label));
        }
        let (train, validation) = split_train_validation(
            samples,
            DEFAULT_SPLIT_RATIO,
            seed::derive(spec.seed, seed::STREAM_SPLIT, i as u64),
        )?;
        shards.push(WorkerShard { train, validation });
    }

    let dataset = FederatedDataset {
        shards,
        dim: d,
        task: TaskKind::Regression,
        provenance: spec.provenance(),
    };
    dataset.validate()?;
    Ok((dataset, w_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            workers: 3,
            dim: 8,
            kappa: 100.0,
            size_range: (20, 40),
            noise_std: 1.0,
            seed: 5,
        }
    }

    #[test]
    fn covariance_endpoints() {
        let s = SyntheticSpec { dim: 40, kappa: 64.0, ..spec() };
        assert_eq!(s.covariance_entry(0), 1.0);
        assert!((s.covariance_entry(39) - 1.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn tau_matches_direct_evaluation() {
        let s = SyntheticSpec { dim: 40, kappa: 100.0, ..spec() };
        let expected = 100f64.ln() / 40f64.ln();
        assert!((s.tau() - expected).abs() < 1e-15);
        assert!((s.tau() - 1.2484).abs() < 1e-4);
    }

    #[test]
    fn kappa_one_is_isotropic() {
        let s = SyntheticSpec { kappa: 1.0, ..spec() };
        for r in 0..s.dim {
            assert_eq!(s.covariance_entry(r), 1.0);
        }
    }

    #[test]
    fn generation_is_deterministic_and_split() {
        let (a, wa) = generate_synthetic(&spec()).unwrap();
        let (b, wb) = generate_synthetic(&spec()).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa, wb);
        assert_eq!(a.n_workers(), 3);
        assert_eq!(a.task, TaskKind::Regression);
        for shard in &a.shards {
            let total = shard.train.len() + shard.validation.len();
            assert!((20..=40).contains(&total));
            assert_eq!(shard.train.len(), (0.75 * total as f64).floor() as usize);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SyntheticSpec { dim: 1, ..spec() }.validate().is_err());
        assert!(SyntheticSpec { kappa: 0.5, ..spec() }.validate().is_err());
        assert!(SyntheticSpec { size_range: (10, 5), ..spec() }.validate().is_err());
        assert!(SyntheticSpec { workers: 0, ..spec() }.validate().is_err());
    }
}
