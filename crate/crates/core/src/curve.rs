use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::error::{validation, Error};

/// Every way this crate can evaluate Pr(S_t >= s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Markov,
    Cantelli,
    Moment,
    Chernoff,
    MonteCarlo,
    Panjer,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Markov, Method::Cantelli, Method::Moment, Method::Chernoff, Method::MonteCarlo, Method::Panjer];

    pub fn name(self) -> &'static str {
        match self {
            Method::Markov => "markov",
            Method::Cantelli => "cantelli",
            Method::Moment => "moment",
            Method::Chernoff => "chernoff",
            Method::MonteCarlo => "montecarlo",
            Method::Panjer => "panjer",
        }
    }

    /// True for the four upper bounds.
    pub fn is_bound(self) -> bool {
        matches!(self, Method::Markov | Method::Cantelli | Method::Moment | Method::Chernoff)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL.into_iter().find(|m| m.name() == lower).ok_or_else(|| validation(format!("unknown method {s:?}")))
    }
}

/// Optimizer report for one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diagnostic {
    None,
    /// Moment bound: the minimizing order and the searched ceiling.
    MomentOrder {
        k: u32,
        max_k: u32,
        ceiling_hit: bool,
    },
    /// Chernoff bound: the minimizing `v` and how many grid points were
    /// skipped because the MGF was not finite there.
    ChernoffPoint {
        v: f64,
        skipped: usize,
    },
}

/// Pairs of (threshold, probability) produced by one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceCurve {
    pub method: Method,
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    /// Confidence interval endpoints, when the method reports them.
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
    pub diagnostics: Vec<Diagnostic>,
    pub elapsed: Duration,
}

impl ExceedanceCurve {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thresholds.iter().copied().zip(self.values.iter().copied())
    }
}
