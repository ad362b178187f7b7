//! Synthetic Event Loss Tables for testing at realistic scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elt::{EltRow, EventLossTable};
use crate::error::{validation, Result};
use crate::severity::SeverityDistribution;

pub const RATE_RANGE: (f64, f64) = (1e-4, 1e-1);
pub const LOSS_RANGE: (f64, f64) = (1e4, 1e8);

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// A table of `rows` fixed-loss events with log-uniform rates in
/// `[1e-4, 1e-1]` per year and log-uniform losses in `[1e4, 1e8]`, rounded
/// to whole currency units. Deterministic for a given seed.
pub fn synthetic_elt(rows: usize, seed: u64) -> Result<EventLossTable> {
    if rows == 0 {
        return Err(validation("synthetic table needs at least one row"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (1..=rows)
        .map(|i| {
            let rate = log_uniform(&mut rng, RATE_RANGE);
            let loss = log_uniform(&mut rng, LOSS_RANGE).round();
            EltRow::new(i.to_string(), rate, SeverityDistribution::point_mass(loss)?)
        })
        .collect::<Result<Vec<_>>>()?;
    EventLossTable::new(rows, 1.0)
}
