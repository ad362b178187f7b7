use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::curve::{Diagnostic, ExceedanceCurve, Method};
use crate::elt::CompoundModel;
use crate::error::{validation, Error, Result};
use crate::severity::SeveritySampler;

use super::jeffreys::jeffreys_interval;

/// Replicates per rng substream.
const BLOCK: usize = 4096;

/// Largest mean handled by sequential-search inversion.
const INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n: usize,
    pub seed: u64,
    pub alpha_level: f64,
    /// Per-event loss cap in the model's loss units.
    pub cap: Option<f64>,
}

impl McConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, alpha_level: 0.05, cap: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(validation("number of simulations must be at least 1"));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(validation("alpha level must lie in (0, 1)"));
        }
        if let Some(u) = self.cap {
            if !(u > 0.0) {
                return Err(validation("cap must be positive"));
            }
        }
        Ok(())
    }
}

/// Poisson variates: sequential-search inversion for small means, the
/// `rand_distr` rejection sampler above that.
#[derive(Debug, Clone)]
pub enum PoissonSampler {
    Inversion { mean: f64, p0: f64 },
    Rejection(Poisson<f64>),
}

impl PoissonSampler {
    pub fn new(mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(validation(format!("Poisson mean must be positive, got {mean}")));
        }
        if mean <= INVERSION_LIMIT {
            Ok(Self::Inversion { mean, p0: (-mean).exp() })
        } else {
            Poisson::new(mean).map(Self::Rejection).map_err(|e| Error::Numeric(format!("Poisson sampler: {e}")))
        }
    }
}

impl Distribution<u64> for PoissonSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Inversion { mean, p0 } => {
                let u: f64 = rng.random();
                let mut k = 0u64;
                let mut p = *p0;
                let mut cdf = p;
                while u > cdf {
                    k += 1;
                    p *= mean / k as f64;
                    let next = cdf + p;
                    if next == cdf {
                        break;
                    }
                    cdf = next;
                }
                k
            }
            Self::Rejection(d) => d.sample(rng) as u64,
        }
    }
}

struct Simulator {
    count: PoissonSampler,
    index: Option<WeightedAliasIndex<f64>>,
    severities: Vec<SeveritySampler>,
    cap: f64,
}

impl Simulator {
    fn new(model: &CompoundModel, config: &McConfig) -> Result<Self> {
        let weights: Vec<f64> = model.components().iter().map(|(w, _)| *w).collect();
        let index = if weights.len() > 1 {
            Some(WeightedAliasIndex::new(weights).map_err(|e| Error::Numeric(format!("component sampler: {e}")))?)
        } else {
            None
        };
        Ok(Self {
            count: PoissonSampler::new(model.expected_count())?,
            index,
            severities: model.components().iter().map(|(_, s)| s.sampler()).collect(),
            cap: config.cap.unwrap_or(f64::INFINITY),
        })
    }

    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.count.sample(rng);
        let mut total = 0.0;
        for _ in 0..n {
            let i = self.index.as_ref().map_or(0, |ix| ix.sample(rng));
            total += self.severities[i].sample(rng).min(self.cap);
        }
        total
    }
}

/// Draws `config.n` independent replicates of the aggregate loss S_t.
///
/// Replicates are produced in fixed-size blocks, each from its own ChaCha
/// stream keyed by `(seed, block index)`, so the output does not depend on
/// how many threads run.
pub fn simulate_annual_losses(model: &CompoundModel, config: &McConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let sim = Simulator::new(model, config)?;
    let mut out = vec![0.0; config.n];
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(block, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(block as u64);
        for slot in chunk.iter_mut() {
            *slot = sim.replicate(&mut rng);
        }
    });
    Ok(out)
}

/// Simulates once and estimates the exceedance probability with its
/// Jeffreys interval at every threshold.
pub fn monte_carlo_curve(model: &CompoundModel, thresholds: &[f64], config: &McConfig) -> Result<ExceedanceCurve> {
    let start = Instant::now();
    let mut losses = simulate_annual_losses(model, config)?;
    // sorted once so each threshold costs one binary search
    losses.sort_unstable_by(f64::total_cmp);
    let mut values = Vec::with_capacity(thresholds.len());
    let mut lower = Vec::with_capacity(thresholds.len());
    let mut upper = Vec::with_capacity(thresholds.len());
    let n = losses.len() as u64;
    for &s in thresholds {
        let x = (losses.len() - losses.partition_point(|&l| l < s)) as u64;
        let (lo, hi) = jeffreys_interval(x, n, config.alpha_level)?;
        values.push(x as f64 / n as f64);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(ExceedanceCurve {
        method: Method::MonteCarlo,
        thresholds: thresholds.to_vec(),
        values,
        interval: Some((lower, upper)),
        diagnostics: vec![Diagnostic::None; thresholds.len()],
        elapsed: start.elapsed(),
    })
}

/// Writes simulated losses as `replicate,loss` CSV.
pub fn write_losses<W: Write>(losses: &[f64], mut sink: W) -> Result<()> {
    writeln!(sink, "replicate,loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(sink, "{},{}", i + 1, l)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::severity::SeverityDistribution;

    fn unit_poisson() -> CompoundModel {
        CompoundModel::new(1.0, 1.0, vec![(1.0, SeverityDistribution::point_mass(1.0).unwrap())]).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = McConfig::new(10_000, 42);
        let a = simulate_annual_losses(&unit_poisson(), &cfg).unwrap();
        let b = simulate_annual_losses(&unit_poisson(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_annual_losses(&unit_poisson(), &McConfig::new(10_000, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_replicate_can_be_zero() {
        // some seed draws N = 0 (probability e^-1 each)
        let zero = (0..50u64)
            .map(|seed| simulate_annual_losses(&unit_poisson(), &McConfig::new(1, seed)).unwrap()[0])
            .any(|v| v == 0.0);
        assert!(zero);
    }

    #[test]
    fn inversion_and_rejection_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &mean in &[0.5, 12.0, 29.0, 45.0, 500.0] {
            let s = PoissonSampler::new(mean).unwrap();
            let n = 200_000;
            let total: u64 = (0..n).map(|_| s.sample(&mut rng)).sum();
            let m = total as f64 / n as f64;
            assert!((m - mean).abs() < 5.0 * (mean / n as f64).sqrt(), "mean {mean}: {m}");
        }
    }

    #[test]
    fn cap_applies_to_each_loss() {
        let cfg = McConfig { cap: Some(0.5), ..McConfig::new(2000, 5) };
        let losses = simulate_annual_losses(&unit_poisson(), &cfg).unwrap();
        assert!(losses.iter().all(|l| (l / 0.5).fract() == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 1).validate().is_err());
        assert!(McConfig { alpha_level: 1.0, ..McConfig::new(1, 1) }.validate().is_err());
    }

    #[test]
    fn dump_format() {
        let mut buf = Vec::new();
        write_losses(&[0.0, 2.5], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "replicate,loss\n1,0\n2,2.5\n");
    }
}
