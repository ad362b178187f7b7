use std::time::Instant;

use crate::curve::{Diagnostic, ExceedanceCurve, Method};
use crate::elt::{compress_elt, EltRow, EventLossTable};
use crate::error::{validation, Error, Result};
use crate::severity::SeverityDistribution;

/// Largest evaluation ceiling accepted before the recursion is declared
/// infeasible.
pub const MAX_PANJER_POINTS: usize = 50_000_000;

/// Stored values are rescaled once they pass this magnitude.
const RESCALE_ABOVE: f64 = 1e280;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanjerConfig {
    /// Quantile rows per random-loss event.
    pub n_q: usize,
    /// Evaluation ceiling in compressed loss units.
    pub s_max: usize,
    /// Compression exponent applied after quantile expansion.
    pub d: i32,
}

impl PanjerConfig {
    pub fn new(s_max: usize) -> Self {
        Self { n_q: 10, s_max, d: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_q == 0 {
            return Err(validation("n_q must be at least 1"));
        }
        if self.s_max == 0 {
            return Err(validation("s_max must be at least 1"));
        }
        if self.s_max > MAX_PANJER_POINTS {
            return Err(Error::Numeric(format!(
                "Panjer ceiling of {} points exceeds the feasible limit of {MAX_PANJER_POINTS}",
                self.s_max
            )));
        }
        Ok(())
    }
}

/// Replaces each random-loss row by `n_q` fixed-loss rows of rate
/// `λ_i / n_q` placed at the `(j - 1/2)/n_q` quantiles (capped losses clamp
/// at the cap). Fixed-loss rows pass through with any cap applied.
pub fn expand_quantiles(elt: &EventLossTable, n_q: usize) -> Result<EventLossTable> {
    if n_q == 0 {
        return Err(validation("n_q must be at least 1"));
    }
    let mut rows = Vec::with_capacity(elt.len());
    for row in elt.rows() {
        if let Some(x) = row.severity.fixed_loss() {
            rows.push(EltRow::new(row.event_id.clone(), row.rate, SeverityDistribution::point_mass(x)?)?);
            continue;
        }
        let rate = row.rate / n_q as f64;
        for j in 1..=n_q {
            let p = (j as f64 - 0.5) / n_q as f64;
            let x = row.severity.quantile(p)?;
            rows.push(EltRow::new(format!("{}.{j}", row.event_id), rate, SeverityDistribution::point_mass(x)?)?);
        }
    }
    EventLossTable::new(rows, elt.loss_unit())
}

/// Compound Poisson pmf on `0..=s_max` by Panjer's recursion.
///
/// `rates[j]` is the total rate of events with integer loss `j`; `t` is the
/// horizon. With `ρ = λt` and `q_j = rates[j]/λ`:
/// `Pr(S=0) = exp(-ρ(1 - q_0))` and
/// `Pr(S=s) = (ρ/s) Σ_{j=1..s} j q_j Pr(S=s-j)`.
///
/// The recursion is linear, so it runs on a rescaled sequence that cannot
/// underflow even when `Pr(S=0)` does. It stops early once the cumulative
/// mass reaches `1 - 1e-15`; the remaining entries are zero.
pub fn panjer_pmf(rates: &[(u64, f64)], t: f64, s_max: usize) -> Vec<f64> {
    let zero_rate: f64 = rates.iter().filter(|(j, _)| *j == 0).map(|(_, r)| r).sum();
    let total: f64 = rates.iter().map(|(_, r)| r).sum();
    let ln_p0 = -t * (total - zero_rate);

    // (loss, t λ_j j), ascending in loss
    let mut support: Vec<(usize, f64)> = rates
        .iter()
        .filter(|(j, r)| *j >= 1 && *j as usize <= s_max && *r > 0.0)
        .map(|&(j, r)| (j as usize, t * r * j as f64))
        .collect();
    support.sort_by_key(|&(j, _)| j);

    let mut f = vec![0.0f64; s_max + 1];
    f[0] = 1.0;
    let mut ln_scale = ln_p0;
    let mut cumulative = ln_p0.exp();
    let mut last = s_max;
    for s in 1..=s_max {
        let mut acc = 0.0;
        for &(j, c) in &support {
            if j > s {
                break;
            }
            acc += c * f[s - j];
        }
        let value = acc / s as f64;
        f[s] = value;
        if value > RESCALE_ABOVE {
            for x in &mut f[..=s] {
                *x /= RESCALE_ABOVE;
            }
            ln_scale += RESCALE_ABOVE.ln();
        }
        cumulative += (f[s].ln() + ln_scale).exp();
        if cumulative >= 1.0 - 1e-15 {
            last = s;
            break;
        }
    }
    f.iter().enumerate().map(|(s, &x)| if s > last || x <= 0.0 { 0.0 } else { (x.ln() + ln_scale).exp() }).collect()
}

/// Aggregate-loss pmf on integer multiples of `loss_unit`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanjerDistribution {
    pub pmf: Vec<f64>,
    pub loss_unit: f64,
}

impl PanjerDistribution {
    /// Pr(S >= s) for integer `s` in loss units; zero beyond the ceiling.
    pub fn exceedance_units(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pmf.len());
        let mut below = 0.0f64;
        for p in &self.pmf {
            out.push((1.0 - below).clamp(0.0, 1.0));
            below += p;
        }
        out
    }

    /// Pr(S >= s) for a threshold in currency units.
    pub fn exceedance_at(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(1.0);
        }
        let idx = (s / self.loss_unit).ceil() as usize;
        if idx >= self.pmf.len() {
            return Err(Error::Numeric(format!(
                "threshold {s} lies beyond the Panjer ceiling of {} units",
                self.pmf.len() - 1
            )));
        }
        let below: f64 = self.pmf[..idx].iter().sum();
        Ok((1.0 - below).clamp(0.0, 1.0))
    }
}

/// Expands random losses into quantile rows, compresses to integer keys at
/// `config.d`, and runs the recursion up to `config.s_max` compressed units.
pub fn panjer_distribution(elt: &EventLossTable, t: f64, config: &PanjerConfig) -> Result<PanjerDistribution> {
    config.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(validation(format!("horizon must be positive, got {t}")));
    }
    let expanded = expand_quantiles(elt, config.n_q)?;
    let compressed = compress_elt(&expanded, config.d)?;
    let rates = compressed
        .rows()
        .iter()
        .map(|r| {
            let x = r.severity.fixed_loss().unwrap_or(f64::NAN);
            if !(x >= 0.0 && x.fract() == 0.0) {
                return Err(validation(format!("loss {x} is not a non-negative integer")));
            }
            Ok((x as u64, r.rate))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PanjerDistribution { pmf: panjer_pmf(&rates, t, config.s_max), loss_unit: compressed.loss_unit() })
}

/// Exceedance curve over integer thresholds `0..=s_max` (reported in
/// currency units).
pub fn panjer_exceedance(elt: &EventLossTable, t: f64, config: &PanjerConfig) -> Result<ExceedanceCurve> {
    let start = Instant::now();
    let dist = panjer_distribution(elt, t, config)?;
    let values = dist.exceedance_units();
    let thresholds = (0..values.len()).map(|s| s as f64 * dist.loss_unit).collect();
    Ok(ExceedanceCurve {
        method: Method::Panjer,
        thresholds,
        diagnostics: vec![Diagnostic::None; values.len()],
        values,
        interval: None,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: u32) -> f64 {
        (1..=k).map(f64::from).product()
    }

    #[test]
    fn recovers_poisson_pmf() {
        let pmf = panjer_pmf(&[(1, 1.0)], 1.0, 5);
        for (k, p) in pmf.iter().enumerate() {
            let exact = (-1f64).exp() / factorial(k as u32);
            assert!((p - exact).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn even_support() {
        let pmf = panjer_pmf(&[(2, 1.0)], 1.0, 4);
        assert_eq!(pmf[1], 0.0);
        assert!((pmf[2] - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_loss_rows_only_shift_mass() {
        // rows with loss 0 never change S
        let with_zero = panjer_pmf(&[(0, 5.0), (1, 1.0)], 1.0, 8);
        let without = panjer_pmf(&[(1, 1.0)], 1.0, 8);
        for (a, b) in with_zero.iter().zip(&without) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn survives_underflowing_start() {
        // Pr(S = 0) = e^-1000 underflows in f64; the mode still comes out right
        let pmf = panjer_pmf(&[(1, 1000.0)], 1.0, 1400);
        let mode = (-1000.0 + 1000f64 * 1000f64.ln() - crate::special::ln_gamma(1001.0)).exp();
        assert!((pmf[1000] - mode).abs() < 1e-12 * mode);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_expansion_preserves_rate() {
        let elt = EventLossTable::new(
            vec![EltRow::new("a", 0.7, SeverityDistribution::gamma(2.0, 0.5).unwrap()).unwrap()],
            1.0,
        )
        .unwrap();
        let ex = expand_quantiles(&elt, 10).unwrap();
        assert_eq!(ex.len(), 10);
        assert!((ex.total_rate() - 0.7).abs() < 1e-15);
        let xs: Vec<f64> = ex.rows().iter().map(|r| r.severity.fixed_loss().unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn quantile_expansion_clamps_at_cap() {
        let sev = SeverityDistribution::gamma(1.0, 1.0).unwrap().with_cap(0.5).unwrap();
        let elt = EventLossTable::new(vec![EltRow::new("a", 1.0, sev).unwrap()], 1.0).unwrap();
        let ex = expand_quantiles(&elt, 10).unwrap();
        let xs: Vec<f64> = ex.rows().iter().map(|r| r.severity.fixed_loss().unwrap()).collect();
        assert!(xs.iter().all(|&x| x <= 0.5));
        // Pr(X < 0.5) ≈ 0.39: quantile levels 0.45.. hit the cap
        assert_eq!(xs.iter().filter(|&&x| x == 0.5).count(), 6);
    }

    #[test]
    fn infeasible_ceiling_rejected() {
        assert!(matches!(PanjerConfig::new(MAX_PANJER_POINTS + 1).validate(), Err(Error::Numeric(_))));
    }

    #[test]
    fn exceedance_lookup() {
        let dist = PanjerDistribution { pmf: vec![0.5, 0.25, 0.25], loss_unit: 10.0 };
        assert_eq!(dist.exceedance_units(), vec![1.0, 0.5, 0.25]);
        assert_eq!(dist.exceedance_at(0.0).unwrap(), 1.0);
        assert_eq!(dist.exceedance_at(5.0).unwrap(), 0.5);
        assert_eq!(dist.exceedance_at(20.0).unwrap(), 0.25);
        assert!(dist.exceedance_at(25.0).is_err());
    }
}
