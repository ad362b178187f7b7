//! Single-event loss distributions.
//!
//! A [`SeverityDistribution`] is a point mass, a Gamma, or a finite Gamma
//! mixture, optionally capped at a maximum insured loss `u`. Capping puts an
//! atom of mass `1 - p` at `u`, where `p` is the uncapped probability of a
//! loss below `u`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{validation, Error, Result};
use crate::special::{bisect_nondecreasing, gamma_p, gamma_q, ln_gamma, ln_growth_integral};

/// Coefficient of variation used when a fixed loss needs a Gamma stand-in.
pub const POINT_MASS_THETA: f64 = 0.1;

/// Weight tolerance for mixture components.
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaComponent {
    pub weight: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeverityShape {
    PointMass { x: f64 },
    Gamma { alpha: f64, beta: f64 },
    GammaMixture(Vec<GammaComponent>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeverityDistribution {
    shape: SeverityShape,
    cap: Option<f64>,
}

fn check_gamma(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(validation(format!("gamma shape must be positive and finite, got {alpha}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(validation(format!("gamma rate must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// E(X^k) for an uncapped Gamma.
fn gamma_moment(alpha: f64, beta: f64, k: u32) -> f64 {
    let mut m = 1.0;
    for j in 0..k {
        m *= (alpha + f64::from(j)) / beta;
    }
    m
}

fn ln_gamma_moment(alpha: f64, beta: f64, k: u32) -> f64 {
    let k = f64::from(k);
    ln_gamma(alpha + k) - ln_gamma(alpha) - k * beta.ln()
}

/// E(min(X, u)^k) for a Gamma capped at `u`.
fn capped_gamma_moment(alpha: f64, beta: f64, u: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let below = gamma_p(alpha + f64::from(k), beta * u);
    let atom = gamma_q(alpha, beta * u) * u.powi(k as i32);
    let full = gamma_moment(alpha, beta, k);
    let partial = if full.is_finite() {
        full * below
    } else if below > 0.0 {
        (ln_gamma_moment(alpha, beta, k) + below.ln()).exp()
    } else {
        0.0
    };
    partial + atom
}

fn gamma_mgf(alpha: f64, beta: f64, v: f64) -> Result<f64> {
    if v >= beta {
        return Err(Error::Domain(format!("gamma MGF needs v < beta (v = {v}, beta = {beta})")));
    }
    Ok((alpha * (beta.ln() - (beta - v).ln())).exp())
}

/// E(exp(v min(X, u))) for a Gamma capped at `u`; finite for every real `v`.
fn capped_gamma_mgf(alpha: f64, beta: f64, u: f64, v: f64) -> f64 {
    let atom = gamma_q(alpha, beta * u) * (v * u).exp();
    let c = v - beta;
    // ∫₀^u e^{vx} Gam(x; α, β) dx = β^α/Γ(α) ∫₀^u x^{α-1} e^{(v-β)x} dx
    let body = if c * u >= -1.0 {
        (alpha * beta.ln() - ln_gamma(alpha) + ln_growth_integral(alpha, c, u)).exp()
    } else {
        let rate = beta - v;
        let p = gamma_p(alpha, rate * u);
        if p > 0.0 {
            (alpha * (beta.ln() - rate.ln()) + p.ln()).exp()
        } else {
            0.0
        }
    };
    body + atom
}

impl SeverityDistribution {
    pub fn point_mass(x: f64) -> Result<Self> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(validation(format!("point-mass loss must be finite and >= 0, got {x}")));
        }
        Ok(Self { shape: SeverityShape::PointMass { x }, cap: None })
    }

    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        check_gamma(alpha, beta)?;
        Ok(Self { shape: SeverityShape::Gamma { alpha, beta }, cap: None })
    }

    /// Builds a mixture from `(weight, alpha, beta)` triples.
    pub fn gamma_mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(validation("gamma mixture needs at least one component"));
        }
        let mut total = 0.0;
        let mut out = Vec::with_capacity(components.len());
        for &(weight, alpha, beta) in components {
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(validation(format!("mixture weight must be positive, got {weight}")));
            }
            check_gamma(alpha, beta)?;
            total += weight;
            out.push(GammaComponent { weight, alpha, beta });
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(validation(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { shape: SeverityShape::GammaMixture(out), cap: None })
    }

    /// Gamma with the given mean and coefficient of variation:
    /// `alpha = 1/theta²`, `beta = alpha/mean`.
    pub fn gamma_from_mean_cov(mean: f64, theta: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(validation(format!("mean must be positive, got {mean}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(validation(format!("coefficient of variation must be positive, got {theta}")));
        }
        let alpha = 1.0 / (theta * theta);
        Self::gamma(alpha, alpha / mean)
    }

    /// Returns a copy capped at `u`. A point mass of zero stays a point mass.
    pub fn with_cap(mut self, u: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(validation(format!("cap must be positive and finite, got {u}")));
        }
        self.cap = Some(u);
        Ok(self)
    }

    pub fn shape(&self) -> &SeverityShape {
        &self.shape
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.shape, SeverityShape::PointMass { .. })
    }

    /// The loss of a point mass after capping.
    pub fn fixed_loss(&self) -> Option<f64> {
        match self.shape {
            SeverityShape::PointMass { x } => Some(self.cap.map_or(x, |u| x.min(u))),
            _ => None,
        }
    }

    /// Replaces a point mass by a concentrated Gamma with the same mean and
    /// coefficient of variation `theta`. Other shapes are returned unchanged,
    /// as is a point mass at zero.
    pub fn concentrated(&self, theta: f64) -> Result<Self> {
        match self.shape {
            SeverityShape::PointMass { x } if x > 0.0 => {
                let g = Self::gamma_from_mean_cov(x, theta)?;
                match self.cap {
                    Some(u) => g.with_cap(u),
                    None => Ok(g),
                }
            }
            _ => Ok(self.clone()),
        }
    }

    /// Splits a mixture into its components, each carrying `weight × π_k`
    /// and the mixture's cap. Other shapes yield themselves.
    pub fn flatten(&self, weight: f64) -> Vec<(f64, SeverityDistribution)> {
        match &self.shape {
            SeverityShape::GammaMixture(components) => components
                .iter()
                .map(|c| {
                    let shape = SeverityShape::Gamma { alpha: c.alpha, beta: c.beta };
                    (weight * c.weight, SeverityDistribution { shape, cap: self.cap })
                })
                .collect(),
            _ => vec![(weight, self.clone())],
        }
    }

    /// Raw moment E(X^k) of the (possibly capped) loss.
    pub fn raw_moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match (&self.shape, self.cap) {
            (SeverityShape::PointMass { .. }, _) => self.fixed_loss().unwrap_or_default().powi(k as i32),
            (&SeverityShape::Gamma { alpha, beta }, None) => gamma_moment(alpha, beta, k),
            (&SeverityShape::Gamma { alpha, beta }, Some(u)) => capped_gamma_moment(alpha, beta, u, k),
            (SeverityShape::GammaMixture(cs), cap) => cs
                .iter()
                .map(|c| {
                    c.weight
                        * match cap {
                            None => gamma_moment(c.alpha, c.beta, k),
                            Some(u) => capped_gamma_moment(c.alpha, c.beta, u, k),
                        }
                })
                .sum(),
        }
    }

    /// Moment generating function E(exp(vX)).
    ///
    /// Uncapped Gamma components need `v < beta`; capped shapes and point
    /// masses accept any `v`.
    pub fn mgf(&self, v: f64) -> Result<f64> {
        if v == 0.0 {
            return Ok(1.0);
        }
        match (&self.shape, self.cap) {
            (SeverityShape::PointMass { .. }, _) => Ok((v * self.fixed_loss().unwrap_or_default()).exp()),
            (&SeverityShape::Gamma { alpha, beta }, None) => gamma_mgf(alpha, beta, v),
            (&SeverityShape::Gamma { alpha, beta }, Some(u)) => Ok(capped_gamma_mgf(alpha, beta, u, v)),
            (SeverityShape::GammaMixture(cs), cap) => {
                let mut total = 0.0;
                for c in cs {
                    let m = match cap {
                        None => gamma_mgf(c.alpha, c.beta, v)?,
                        Some(u) => capped_gamma_mgf(c.alpha, c.beta, u, v),
                    };
                    total += c.weight * m;
                }
                Ok(total)
            }
        }
    }

    /// Largest `v` for which the Chernoff search may evaluate this MGF.
    ///
    /// Gamma shapes give their (uncapped) rate; a point mass at `x` gives
    /// `1 / (θ² x)` with `θ = 0.1`, i.e. the rate of its concentrated Gamma
    /// stand-in. A point mass at zero imposes no limit.
    pub fn mgf_abscissa(&self) -> f64 {
        match &self.shape {
            SeverityShape::PointMass { .. } => {
                let x = self.fixed_loss().unwrap_or_default();
                if x > 0.0 {
                    1.0 / (POINT_MASS_THETA * POINT_MASS_THETA * x)
                } else {
                    f64::INFINITY
                }
            }
            &SeverityShape::Gamma { beta, .. } => beta,
            SeverityShape::GammaMixture(cs) => cs.iter().map(|c| c.beta).fold(f64::INFINITY, f64::min),
        }
    }

    /// Uncapped probability of a loss strictly below the cap.
    pub fn mass_below_cap(&self) -> f64 {
        match self.cap {
            None => 1.0,
            Some(u) => match &self.shape {
                &SeverityShape::PointMass { x } => {
                    if x < u {
                        1.0
                    } else {
                        0.0
                    }
                }
                &SeverityShape::Gamma { alpha, beta } => gamma_p(alpha, beta * u),
                SeverityShape::GammaMixture(cs) => cs.iter().map(|c| c.weight * gamma_p(c.alpha, c.beta * u)).sum(),
            },
        }
    }

    /// Cumulative distribution function Pr(X <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if let Some(u) = self.cap {
            if x >= u {
                return 1.0;
            }
        }
        match &self.shape {
            &SeverityShape::PointMass { x: x0 } => {
                if x >= x0 {
                    1.0
                } else {
                    0.0
                }
            }
            &SeverityShape::Gamma { alpha, beta } => gamma_p(alpha, beta * x),
            SeverityShape::GammaMixture(cs) => cs.iter().map(|c| c.weight * gamma_p(c.alpha, c.beta * x)).sum(),
        }
    }

    fn uncapped_mean(&self) -> f64 {
        match &self.shape {
            &SeverityShape::PointMass { x } => x,
            &SeverityShape::Gamma { alpha, beta } => alpha / beta,
            SeverityShape::GammaMixture(cs) => cs.iter().map(|c| c.weight * c.alpha / c.beta).sum(),
        }
    }

    /// Smallest `x` with `cdf(x) >= p`, for `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        if let Some(x) = self.fixed_loss() {
            return Ok(x);
        }
        let uncapped = SeverityDistribution { shape: self.shape.clone(), cap: None };
        if let Some(u) = self.cap {
            if uncapped.cdf(u) < p {
                return Ok(u);
            }
        }
        let mut hi = uncapped.uncapped_mean().max(f64::MIN_POSITIVE);
        while uncapped.cdf(hi) < p {
            hi *= 2.0;
        }
        let q = bisect_nondecreasing(|x| uncapped.cdf(x), p, 0.0, hi, 1e-12, 1e-15);
        Ok(self.cap.map_or(q, |u| q.min(u)))
    }

    /// Draws one loss; capped shapes return `min(draw, u)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// A reusable sampler with the Gamma set-up precomputed.
    pub fn sampler(&self) -> SeveritySampler {
        let gamma = |alpha: f64, beta: f64| Gamma::new(alpha, 1.0 / beta).expect("validated gamma parameters");
        let kind = match &self.shape {
            SeverityShape::PointMass { .. } => SamplerKind::Fixed(self.fixed_loss().unwrap_or_default()),
            &SeverityShape::Gamma { alpha, beta } => SamplerKind::Gamma(gamma(alpha, beta)),
            SeverityShape::GammaMixture(cs) => {
                let mut cumulative = Vec::with_capacity(cs.len());
                let mut acc = 0.0;
                let mut parts = Vec::with_capacity(cs.len());
                for c in cs {
                    acc += c.weight;
                    cumulative.push(acc);
                    parts.push(gamma(c.alpha, c.beta));
                }
                SamplerKind::Mixture { cumulative, parts }
            }
        };
        SeveritySampler { kind, cap: self.cap.unwrap_or(f64::INFINITY) }
    }
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Fixed(f64),
    Gamma(Gamma<f64>),
    Mixture { cumulative: Vec<f64>, parts: Vec<Gamma<f64>> },
}

#[derive(Debug, Clone)]
pub struct SeveritySampler {
    kind: SamplerKind,
    cap: f64,
}

impl Distribution<f64> for SeveritySampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let draw = match &self.kind {
            SamplerKind::Fixed(x) => return *x,
            SamplerKind::Gamma(g) => g.sample(rng),
            SamplerKind::Mixture { cumulative, parts } => {
                let total = *cumulative.last().expect("non-empty mixture");
                let r = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= r).min(parts.len() - 1);
                parts[idx].sample(rng)
            }
        };
        draw.min(self.cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn point_mass_basics() {
        let d = SeverityDistribution::point_mass(7.0).unwrap();
        assert_eq!(d.raw_moment(2), 49.0);
        assert_eq!(d.raw_moment(0), 1.0);
        let d = SeverityDistribution::point_mass(2.0).unwrap();
        assert!(close(d.mgf(0.5).unwrap(), std::f64::consts::E, 1e-15));
        assert_eq!(SeverityDistribution::point_mass(5.0).unwrap().quantile(0.3).unwrap(), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = SeverityDistribution::point_mass(3.0).unwrap();
        assert!((0..100).all(|_| d.sample(&mut rng) == 3.0));
    }

    #[test]
    fn capped_point_mass_uses_min() {
        let d = SeverityDistribution::point_mass(10.0).unwrap().with_cap(4.0).unwrap();
        assert_eq!(d.raw_moment(2), 16.0);
        assert_eq!(d.fixed_loss(), Some(4.0));
        assert_eq!(d.mass_below_cap(), 0.0);
    }

    #[test]
    fn gamma_moments_and_mgf() {
        let d = SeverityDistribution::gamma(2.0, 1.0).unwrap();
        assert_eq!(d.raw_moment(3), 24.0);
        let d = SeverityDistribution::gamma(2.0, 3.0).unwrap();
        assert!(close(d.mgf(1.0).unwrap(), 2.25, 1e-15));
        assert!(matches!(d.mgf(3.0), Err(Error::Domain(_))));
        assert!(matches!(d.mgf(4.0), Err(Error::Domain(_))));
    }

    #[test]
    fn capped_exponential_mean_is_half() {
        let d = SeverityDistribution::gamma(1.0, 1.0).unwrap().with_cap(LN2).unwrap();
        assert!(close(d.raw_moment(1), 0.5, 1e-14));
        assert!(close(d.mass_below_cap(), 0.5, 1e-14));
    }

    #[test]
    fn capped_exponential_mgf_closed_forms() {
        // ∫₀^u e^{(v-1)x} dx + e^{-u} e^{vu}
        let u = LN2;
        let d = SeverityDistribution::gamma(1.0, 1.0).unwrap().with_cap(u).unwrap();
        for &v in &[0.25, 0.5, 1.0, 1.5, 3.0] {
            let c: f64 = v - 1.0;
            let body = if c == 0.0 { u } else { (c * u).exp_m1() / c };
            let exact = body + (-u).exp() * (v * u).exp();
            assert!(close(d.mgf(v).unwrap(), exact, 1e-13), "v={v}");
        }
    }

    #[test]
    fn quantiles() {
        let d = SeverityDistribution::gamma(1.0, 1.0).unwrap();
        assert!(close(d.quantile(0.5).unwrap(), LN2, 1e-11));
        let capped = d.clone().with_cap(0.5).unwrap();
        assert_eq!(capped.quantile(0.9).unwrap(), 0.5);
        assert!(close(capped.quantile(0.2).unwrap(), -(0.8f64).ln(), 1e-11));
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
    }

    #[test]
    fn mixture_quantile_inverts_cdf() {
        let d = SeverityDistribution::gamma_mixture(&[(0.3, 2.0, 1.0), (0.7, 5.0, 2.0)]).unwrap();
        for &p in &[0.05, 0.5, 0.95] {
            let q = d.quantile(p).unwrap();
            assert!((d.cdf(q) - p).abs() < 1e-11);
        }
    }

    #[test]
    fn from_mean_cov() {
        let d = SeverityDistribution::gamma_from_mean_cov(1e6, 0.5).unwrap();
        match *d.shape() {
            SeverityShape::Gamma { alpha, beta } => {
                assert!(close(alpha, 4.0, 1e-15));
                assert!(close(beta, 4e-6, 1e-15));
            }
            _ => panic!("expected gamma"),
        }
        let d = SeverityDistribution::gamma_from_mean_cov(10.0, 1.0).unwrap();
        assert_eq!(*d.shape(), SeverityShape::Gamma { alpha: 1.0, beta: 0.1 });
        for &(mean, theta) in &[(1e6, 0.5), (3.5, 0.1), (10.0, 2.0)] {
            let d = SeverityDistribution::gamma_from_mean_cov(mean, theta).unwrap();
            let m1 = d.raw_moment(1);
            let m2 = d.raw_moment(2);
            assert!(close(m1, mean, 1e-12));
            assert!(((m2 - m1 * m1).sqrt() / m1 - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SeverityDistribution::point_mass(-1.0).is_err());
        assert!(SeverityDistribution::gamma(0.0, 1.0).is_err());
        assert!(SeverityDistribution::gamma(1.0, f64::NAN).is_err());
        assert!(SeverityDistribution::gamma_mixture(&[(0.5, 1.0, 1.0), (0.4, 1.0, 1.0)]).is_err());
        assert!(SeverityDistribution::gamma_mixture(&[]).is_err());
        assert!(SeverityDistribution::gamma(1.0, 1.0).unwrap().with_cap(0.0).is_err());
    }

    #[test]
    fn flatten_shares_weight() {
        let d =
            SeverityDistribution::gamma_mixture(&[(0.3, 2.0, 1.0), (0.7, 5.0, 2.0)]).unwrap().with_cap(9.0).unwrap();
        let parts = d.flatten(2.0);
        assert_eq!(parts.len(), 2);
        assert!(close(parts[0].0, 0.6, 1e-15));
        assert!(close(parts[1].0, 1.4, 1e-15));
        assert_eq!(parts[1].1.cap(), Some(9.0));
    }

    #[test]
    fn mgf_at_zero_is_one() {
        let ds = [
            SeverityDistribution::point_mass(4.0).unwrap(),
            SeverityDistribution::gamma(0.3, 2.0).unwrap(),
            SeverityDistribution::gamma(2.0, 2.0).unwrap().with_cap(1.0).unwrap(),
            SeverityDistribution::gamma_mixture(&[(0.5, 1.0, 1.0), (0.5, 3.0, 0.5)]).unwrap(),
        ];
        for d in &ds {
            assert_eq!(d.mgf(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn concentrated_point_mass() {
        let d = SeverityDistribution::point_mass(50.0).unwrap();
        let g = d.concentrated(POINT_MASS_THETA).unwrap();
        assert!(close(g.raw_moment(1), 50.0, 1e-12));
        assert!(close(g.mgf_abscissa(), d.mgf_abscissa(), 1e-12));
        assert!(close(d.mgf_abscissa(), 2.0, 1e-12));
    }
}
