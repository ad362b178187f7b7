//! Upper bounds on the aggregate-loss exceedance probability Pr(S_t >= s).
//!
//! All four bounds follow from the generalised Markov inequality
//! `Pr(S >= s) <= E g(S) / g(s)` for non-negative increasing `g`:
//!
//! * Markov: `g(x) = x`, giving `μ / s`.
//! * Cantelli: the one-sided variance bound `σ² / (σ² + (s - μ)²)` for `s >= μ`.
//! * Moment: `g(x) = x^k`, minimized over integer `k`.
//! * Chernoff: `g(x) = e^(vx)`, minimized over a grid of `v`.
//!
//! Every bound is clipped to 1.

use std::time::Instant;

use rayon::prelude::*;

use crate::curve::{Diagnostic, ExceedanceCurve, Method};
use crate::elt::{aggregate_log_moments, CompoundModel};
use crate::error::{validation, Error, Result};

/// Hard ceiling on the moment order searched.
pub const MAX_MOMENT_ORDER: u32 = 200;

/// Default number of interior grid points for the Chernoff search.
pub const DEFAULT_CHERNOFF_GRID: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Markov,
    Cantelli,
    Moment,
    Chernoff,
}

impl From<BoundMethod> for Method {
    fn from(m: BoundMethod) -> Self {
        match m {
            BoundMethod::Markov => Method::Markov,
            BoundMethod::Cantelli => Method::Cantelli,
            BoundMethod::Moment => Method::Moment,
            BoundMethod::Chernoff => Method::Chernoff,
        }
    }
}

impl TryFrom<Method> for BoundMethod {
    type Error = Error;

    fn try_from(m: Method) -> Result<Self> {
        match m {
            Method::Markov => Ok(BoundMethod::Markov),
            Method::Cantelli => Ok(BoundMethod::Cantelli),
            Method::Moment => Ok(BoundMethod::Moment),
            Method::Chernoff => Ok(BoundMethod::Chernoff),
            other => Err(validation(format!("{other} is not an upper bound"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundRequest {
    pub model: CompoundModel,
    pub thresholds: Vec<f64>,
    pub method: BoundMethod,
    /// Optional truncation of the Moment search.
    pub k_cap: Option<u32>,
    /// Interior points of the Chernoff grid.
    pub grid_size: usize,
}

impl BoundRequest {
    pub fn new(model: CompoundModel, thresholds: Vec<f64>, method: BoundMethod) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(validation("at least one threshold is required"));
        }
        if thresholds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(validation("thresholds must be positive and finite"));
        }
        if thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(validation("thresholds must be strictly ascending"));
        }
        Ok(Self { model, thresholds, method, k_cap: None, grid_size: DEFAULT_CHERNOFF_GRID })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub values: Vec<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOutcome {
    pub value: f64,
    pub k: u32,
    pub max_k: u32,
    pub ceiling_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffOutcome {
    pub value: f64,
    pub v: f64,
    pub skipped: usize,
}

pub fn markov_bound(model: &CompoundModel, s: f64) -> f64 {
    markov_from(model.mean(), s)
}

pub fn cantelli_bound(model: &CompoundModel, s: f64) -> f64 {
    cantelli_from(model.mean(), model.variance(), s)
}

fn markov_from(mu: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    (mu / s).min(1.0)
}

fn cantelli_from(mu: f64, var: f64, s: f64) -> f64 {
    if s <= mu {
        return 1.0;
    }
    let gap = s - mu;
    (var / (var + gap * gap)).min(1.0)
}

/// Order ceiling from a two-moment Gamma fit to S: step `k` upward until
/// the fitted `ln E(S^k) - k ln s` rises above its previous value.
/// Returns the ceiling and whether the hard limit was reached.
pub fn gamma_heuristic_order(mean: f64, variance: f64, s: f64) -> (u32, bool) {
    if !(mean > 0.0 && variance > 0.0 && s > 0.0) {
        return (1, false);
    }
    let shape = mean * mean / variance;
    let rate = mean / variance;
    // the Gamma objective rises from k - 1 to k exactly when α + k - 1 > βs
    let k = (rate * s - shape).floor() + 2.0;
    if k < 2.0 {
        (2, false)
    } else if k > f64::from(MAX_MOMENT_ORDER) {
        (MAX_MOMENT_ORDER, true)
    } else {
        (k as u32, false)
    }
}

/// Log-moment table shared by every threshold of a Moment-bound request.
#[derive(Debug, Clone)]
struct MomentTable {
    ln_moments: Vec<f64>,
    ceiling_hit: bool,
}

impl MomentTable {
    /// Searches orders `1..=K`. `K` starts at the Gamma-fit ceiling for
    /// `s_ref`; while the true objective at `s_ref` is still falling at `K`
    /// the search steps further out, up to [`MAX_MOMENT_ORDER`].
    fn build(model: &CompoundModel, s_ref: f64, k_cap: Option<u32>) -> Result<Self> {
        let (start_k, mut ceiling_hit) = gamma_heuristic_order(model.mean(), model.variance(), s_ref);
        let limit = k_cap.map_or(MAX_MOMENT_ORDER, |c| c.clamp(1, MAX_MOMENT_ORDER));
        let ln_s = s_ref.ln();
        let objective = |ln: &[f64], j: usize| ln[j] - j as f64 * ln_s;
        let falling_at =
            |ln: &[f64], j: usize| j >= 2 && objective(ln, j).is_finite() && objective(ln, j) <= objective(ln, j - 1);

        let mut k_max = start_k.min(limit);
        let mut ln_moments = aggregate_log_moments(model, k_max)?;
        while k_max < limit && falling_at(&ln_moments, k_max as usize) {
            let old = k_max;
            k_max = (k_max * 2).min(limit);
            ln_moments = aggregate_log_moments(model, k_max)?;
            if let Some(j) = (old as usize + 1..=k_max as usize).find(|&j| !falling_at(&ln_moments, j)) {
                k_max = j as u32;
                break;
            }
        }
        if k_max == MAX_MOMENT_ORDER && falling_at(&ln_moments, k_max as usize) {
            ceiling_hit = true;
        }
        ln_moments.truncate(k_max as usize + 1);
        // stop at the first order whose moment is not finite
        if let Some(bad) = ln_moments.iter().position(|m| m.is_nan() || *m == f64::INFINITY) {
            ln_moments.truncate(bad.max(2));
        }
        Ok(Self { ln_moments, ceiling_hit })
    }

    fn evaluate(&self, model: &CompoundModel, s: f64) -> MomentOutcome {
        let max_k = (self.ln_moments.len() - 1) as u32;
        let markov = markov_bound(model, s);
        let mut best = (markov, 1u32);
        let ln_s = s.ln();
        for (k, lm) in self.ln_moments.iter().enumerate().skip(2) {
            let value = (lm - k as f64 * ln_s).exp();
            if value < best.0 {
                best = (value, k as u32);
            }
        }
        MomentOutcome { value: best.0.min(1.0), k: best.1, max_k, ceiling_hit: self.ceiling_hit }
    }
}

/// `min_k E(S^k)/s^k` over `k = 1..=K`, clipped at 1.
pub fn moment_bound(model: &CompoundModel, s: f64, k_cap: Option<u32>) -> Result<MomentOutcome> {
    if !(s > 0.0) {
        return Err(validation(format!("threshold must be positive, got {s}")));
    }
    Ok(MomentTable::build(model, s, k_cap)?.evaluate(model, s))
}

/// `λt (M_Y(v) - 1)` on the equally spaced interior grid of `(0, v_max)`.
struct ChernoffTable {
    grid: Vec<f64>,
    ln_mgf: Vec<f64>,
    skipped: usize,
}

impl ChernoffTable {
    fn build(model: &CompoundModel, grid_size: usize) -> Result<Option<Self>> {
        if grid_size == 0 {
            return Err(validation("Chernoff grid needs at least one point"));
        }
        let v_max = model.mgf_abscissa();
        if v_max.is_infinite() {
            // all losses are zero
            return Ok(None);
        }
        let step = v_max / (grid_size as f64 + 1.0);
        let rho = model.expected_count();
        let evaluated: Vec<Option<(f64, f64)>> = (1..=grid_size)
            .into_par_iter()
            .map(|j| {
                let v = step * j as f64;
                match model.severity_mgf(v) {
                    Ok(m) if m.is_finite() => Some((v, rho * (m - 1.0))),
                    _ => None,
                }
            })
            .collect();
        let skipped = evaluated.iter().filter(|e| e.is_none()).count();
        let (grid, ln_mgf): (Vec<f64>, Vec<f64>) = evaluated.into_iter().flatten().unzip();
        if grid.is_empty() {
            return Err(Error::Numeric("MGF not finite anywhere on the Chernoff grid".into()));
        }
        Ok(Some(Self { grid, ln_mgf, skipped }))
    }

    fn evaluate(&self, s: f64) -> ChernoffOutcome {
        let mut best = (f64::INFINITY, f64::NAN);
        for (&v, &lm) in self.grid.iter().zip(&self.ln_mgf) {
            let obj = lm - v * s;
            if obj < best.0 {
                best = (obj, v);
            }
        }
        ChernoffOutcome { value: best.0.exp().min(1.0), v: best.1, skipped: self.skipped }
    }
}

/// `min_v exp(λt (M_Y(v) - 1) - v s)` over `grid_size` equally spaced
/// interior points of `(0, v_max)`, clipped at 1.
pub fn chernoff_bound(model: &CompoundModel, s: f64, grid_size: usize) -> Result<ChernoffOutcome> {
    if !(s > 0.0) {
        return Err(validation(format!("threshold must be positive, got {s}")));
    }
    Ok(match ChernoffTable::build(model, grid_size)? {
        Some(t) => t.evaluate(s),
        None => ChernoffOutcome { value: 0.0, v: f64::NAN, skipped: 0 },
    })
}

/// Evaluates one bound at every threshold of the request, sharing the
/// moment table or MGF grid across thresholds.
pub fn evaluate_bounds(request: &BoundRequest) -> Result<BoundResult> {
    let model = &request.model;
    let s = &request.thresholds;
    let (values, diagnostics) = match request.method {
        BoundMethod::Markov => {
            let mu = model.mean();
            (s.iter().map(|&x| markov_from(mu, x)).collect(), vec![Diagnostic::None; s.len()])
        }
        BoundMethod::Cantelli => {
            let (mu, var) = (model.mean(), model.variance());
            (s.iter().map(|&x| cantelli_from(mu, var, x)).collect(), vec![Diagnostic::None; s.len()])
        }
        BoundMethod::Moment => {
            let s_ref = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let table = MomentTable::build(model, s_ref, request.k_cap)?;
            s.iter()
                .map(|&x| {
                    let o = table.evaluate(model, x);
                    let d = Diagnostic::MomentOrder { k: o.k, max_k: o.max_k, ceiling_hit: o.ceiling_hit };
                    (o.value, d)
                })
                .unzip()
        }
        BoundMethod::Chernoff => match ChernoffTable::build(model, request.grid_size)? {
            Some(table) => s
                .iter()
                .map(|&x| {
                    let o = table.evaluate(x);
                    (o.value, Diagnostic::ChernoffPoint { v: o.v, skipped: o.skipped })
                })
                .unzip(),
            None => (vec![0.0; s.len()], vec![Diagnostic::None; s.len()]),
        },
    };
    Ok(BoundResult { values, diagnostics })
}

/// [`evaluate_bounds`] packaged as a timed exceedance curve.
pub fn exceedance_curve(request: &BoundRequest) -> Result<ExceedanceCurve> {
    let start = Instant::now();
    let result = evaluate_bounds(request)?;
    Ok(ExceedanceCurve {
        method: request.method.into(),
        thresholds: request.thresholds.clone(),
        values: result.values,
        interval: None,
        diagnostics: result.diagnostics,
        elapsed: start.elapsed(),
    })
}
