use crate::elt::log_sum_exp;
use crate::error::{validation, Result};
use crate::special::{beta_reg, bisect_nondecreasing, ln_gamma};

/// Point estimate of an exceedance probability with its Jeffreys interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub x: u64,
    pub n: u64,
}

/// The `p`-quantile of Beta(a, b).
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    bisect_nondecreasing(|x| beta_reg(a, b, x), p, 0.0, 1.0, 1e-15, 1e-15)
}

/// Equal-tailed `(1 - alpha_level)` Jeffreys interval for `x` successes in
/// `n` trials: quantiles of Beta(x + 1/2, n - x + 1/2), with the lower end
/// set to 0 when `x = 0` and the upper end set to 1 when `x = n`.
pub fn jeffreys_interval(x: u64, n: u64, alpha_level: f64) -> Result<(f64, f64)> {
    if n == 0 || x > n {
        return Err(validation(format!("need 0 <= x <= n and n >= 1, got x = {x}, n = {n}")));
    }
    check_alpha(alpha_level)?;
    let a = x as f64 + 0.5;
    let b = (n - x) as f64 + 0.5;
    let lower = if x == 0 { 0.0 } else { beta_quantile(a, b, alpha_level / 2.0) };
    let upper = if x == n { 1.0 } else { beta_quantile(a, b, 1.0 - alpha_level / 2.0) };
    Ok((lower, upper))
}

fn check_alpha(alpha_level: f64) -> Result<()> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(validation(format!("alpha level must lie in (0, 1), got {alpha_level}")));
    }
    Ok(())
}

/// Counts losses at or above `s0` and attaches a Jeffreys interval.
pub fn estimate_exceedance(losses: &[f64], s0: f64, alpha_level: f64) -> Result<EstimateWithCI> {
    if losses.is_empty() {
        return Err(validation("no simulated losses"));
    }
    let n = losses.len() as u64;
    let x = losses.iter().filter(|&&l| l >= s0).count() as u64;
    let (lower, upper) = jeffreys_interval(x, n, alpha_level)?;
    Ok(EstimateWithCI { p_hat: x as f64 / n as f64, lower, upper, x, n })
}

/// Inputs to the a-priori sample-size calculation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    /// Regulatory threshold on the exceedance probability.
    pub kappa0: f64,
    /// Assumed true exceedance probability.
    pub p0: f64,
    /// Required probability that the interval's upper end is at most `kappa0`.
    pub beta0: f64,
    pub alpha_level: f64,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self { kappa0: 0.005, p0: 0.0025, beta0: 0.99, alpha_level: 0.05 }
    }
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < self.kappa0 && self.kappa0 < 1.0) {
            return Err(validation("need 0 < p0 < kappa0 < 1"));
        }
        if !(self.beta0 > 0.0 && self.beta0 <= 1.0) {
            return Err(validation("beta0 must lie in (0, 1]"));
        }
        check_alpha(self.alpha_level)
    }

    /// True when the upper interval end for `x` of `n` is at most `kappa0`.
    fn upper_within(&self, x: u64, n: u64) -> bool {
        if x >= n {
            return false;
        }
        let a = x as f64 + 0.5;
        let b = (n - x) as f64 + 0.5;
        // upper <= κ0  ⇔  I_κ0(a, b) >= 1 - α/2
        beta_reg(a, b, self.kappa0) >= 1.0 - self.alpha_level / 2.0
    }

    /// Largest `x` whose upper interval end stays within `kappa0`.
    fn cutoff(&self, n: u64) -> Option<u64> {
        if !self.upper_within(0, n) {
            return None;
        }
        let (mut lo, mut hi) = (0u64, n);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.upper_within(mid, n) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Pr{upper(X; n) <= kappa0} for X ~ Binomial(n, p0), summed exactly in
    /// log space. When the lower sum passes 1/2 the upper tail is summed
    /// instead, since log-factorial rounding is relative to the smaller side.
    pub fn success_probability(&self, n: u64) -> f64 {
        let Some(cut) = self.cutoff(n) else {
            return 0.0;
        };
        let nf = n as f64;
        let ln_p = self.p0.ln();
        let ln_q = (-self.p0).ln_1p();
        let ln_nfact = ln_gamma(nf + 1.0);
        let ln_pmf = |x: u64| {
            let xf = x as f64;
            ln_nfact - ln_gamma(xf + 1.0) - ln_gamma(nf - xf + 1.0) + xf * ln_p + (nf - xf) * ln_q
        };
        let lower: Vec<f64> = (0..=cut).map(ln_pmf).collect();
        let ln_lower = log_sum_exp(&lower);
        if ln_lower < -std::f64::consts::LN_2 || cut == n {
            return ln_lower.exp().min(1.0);
        }
        // terms past the mode fall geometrically; stop once negligible
        let mut upper = Vec::new();
        let mut peak = f64::NEG_INFINITY;
        for x in cut + 1..=n {
            let term = ln_pmf(x);
            peak = peak.max(term);
            upper.push(term);
            if term < peak - 80.0 {
                break;
            }
        }
        (1.0 - log_sum_exp(&upper).exp()).clamp(0.0, 1.0)
    }
}

/// Success probability for each candidate sample size.
pub fn design_sample_size(spec: &DesignSpec, candidate_ns: &[u64]) -> Result<Vec<(u64, f64)>> {
    spec.validate()?;
    if candidate_ns.contains(&0) {
        return Err(validation("sample sizes must be positive"));
    }
    Ok(candidate_ns.iter().map(|&n| (n, spec.success_probability(n))).collect())
}

/// Smallest listed `n` whose success probability reaches `beta0`.
pub fn recommend_sample_size(spec: &DesignSpec, table: &[(u64, f64)]) -> Option<u64> {
    table.iter().filter(|(_, p)| *p >= spec.beta0).map(|(n, _)| *n).min()
}
