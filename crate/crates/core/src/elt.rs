//! Event Loss Tables and their reduction to a single compound Poisson model.
//!
//! Each row of an ELT is an independent Poisson stream of events with its
//! own loss distribution. Superposing the rows gives one Poisson process
//! with rate `λ = Σ λ_i` whose losses follow the mixture `Σ (λ_i/λ) f_i`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};

use crate::error::{validation, Error, Result};
use crate::severity::{SeverityDistribution, SeverityShape};

#[derive(Debug, Clone, PartialEq)]
pub struct EltRow {
    pub event_id: String,
    pub rate: f64,
    pub severity: SeverityDistribution,
}

impl EltRow {
    pub fn new(event_id: impl Into<String>, rate: f64, severity: SeverityDistribution) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(validation(format!("rate must be positive and finite, got {rate}")));
        }
        Ok(Self { event_id: event_id.into(), rate, severity })
    }
}

/// An ordered, non-empty list of rows plus the currency value of one stored
/// loss unit (1 for raw tables, `10^-d` after compression at `d`).
#[derive(Debug, Clone, PartialEq)]
pub struct EventLossTable {
    rows: Vec<EltRow>,
    loss_unit: f64,
}

impl EventLossTable {
    pub fn new(rows: Vec<EltRow>, loss_unit: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(validation("event loss table has no rows"));
        }
        if !(loss_unit > 0.0 && loss_unit.is_finite()) {
            return Err(validation(format!("loss unit must be positive, got {loss_unit}")));
        }
        let elt = Self { rows, loss_unit };
        let total = elt.total_rate();
        if !(total > 0.0 && total.is_finite()) {
            return Err(validation(format!("total rate must be positive and finite, got {total}")));
        }
        Ok(elt)
    }

    pub fn rows(&self) -> &[EltRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn loss_unit(&self) -> f64 {
        self.loss_unit
    }

    pub fn total_rate(&self) -> f64 {
        self.rows.iter().map(|r| r.rate).sum()
    }

    pub fn all_point_mass(&self) -> bool {
        self.rows.iter().all(|r| r.severity.is_point_mass())
    }

    /// Removes rows whose loss is exactly zero.
    pub fn drop_zero_rows(self) -> Result<Self> {
        let unit = self.loss_unit;
        let rows: Vec<_> = self.rows.into_iter().filter(|r| r.severity.fixed_loss() != Some(0.0)).collect();
        Self::new(rows, unit)
    }

    /// Applies `f` to every row's severity.
    pub fn map_severity<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&SeverityDistribution) -> Result<SeverityDistribution>,
    {
        let rows = self
            .rows
            .iter()
            .map(|r| Ok(EltRow { severity: f(&r.severity)?, ..r.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, self.loss_unit)
    }

    /// Thickens every fixed loss into a Gamma with that mean and coefficient
    /// of variation `theta`. Zero losses stay fixed.
    pub fn thicken(&self, theta: f64) -> Result<Self> {
        self.map_severity(|s| match *s.shape() {
            SeverityShape::PointMass { x } if x > 0.0 => {
                let g = SeverityDistribution::gamma_from_mean_cov(x, theta)?;
                match s.cap() {
                    Some(u) => g.with_cap(u),
                    None => Ok(g),
                }
            }
            _ => Ok(s.clone()),
        })
    }

    /// The same fixed-loss table with losses written in currency units
    /// (loss unit 1).
    pub fn to_currency(&self) -> Result<Self> {
        let unit = self.loss_unit;
        let d = -unit.log10().round() as i32;
        let exact_power = (10f64.powi(-d) - unit).abs() <= 1e-12 * unit;
        let scale = |x: f64| -> f64 {
            if !exact_power || x.fract() != 0.0 || x.abs() > 9e15 {
                return x * unit;
            }
            let mut v = Decimal::from_i128_with_scale(x as i128, d.max(0) as u32);
            for _ in 0..(-d).max(0) {
                v *= Decimal::TEN;
            }
            v.to_f64().unwrap_or(x * unit)
        };
        let rows =
            self.rows
                .iter()
                .map(|r| {
                    let x =
                        r.severity.fixed_loss().filter(|_| r.severity.cap().is_none()).ok_or_else(|| {
                            Error::Unsupported("only uncapped fixed losses convert to currency".into())
                        })?;
                    Ok(EltRow { severity: SeverityDistribution::point_mass(scale(x))?, ..r.clone() })
                })
                .collect::<Result<Vec<_>>>()?;
        Self::new(rows, 1.0)
    }

    /// Caps every row at `u` currency units.
    pub fn with_cap(&self, u: f64) -> Result<Self> {
        let stored = u / self.loss_unit;
        self.map_severity(|s| s.clone().with_cap(stored))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CsvLayout {
    PointMass,
    Gamma { with_cap: bool },
}

fn detect_layout(header: &csv::StringRecord) -> Result<CsvLayout> {
    let names: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    match names.as_slice() {
        ["eventid", "rate", "loss"] => Ok(CsvLayout::PointMass),
        ["eventid", "rate", "alpha", "beta"] => Ok(CsvLayout::Gamma { with_cap: false }),
        ["eventid", "rate", "alpha", "beta", "cap"] => Ok(CsvLayout::Gamma { with_cap: true }),
        _ => Err(Error::Parse {
            line: 1,
            message: format!(
                "unrecognised header {:?}; expected EventID,Rate,Loss or EventID,Rate,Alpha,Beta[,Cap]",
                header.iter().collect::<Vec<_>>()
            ),
        }),
    }
}

fn parse_field(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<f64>()
        .map_err(|_| Error::Parse { line, message: format!("field {name}: cannot parse {raw:?} as a number") })
}

/// Reads an ELT from CSV text with a mandatory header row.
///
/// Two layouts are recognised: `EventID,Rate,Loss` for fixed losses and
/// `EventID,Rate,Alpha,Beta[,Cap]` for Gamma losses (an empty cap means
/// uncapped). The resulting table has `loss_unit = 1`.
pub fn parse_elt<R: Read>(source: R) -> Result<EventLossTable> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(source);
    let header = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let layout = detect_layout(&header)?;
    let width = header.len();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Parse { line, message: format!("expected {width} fields, found {}", record.len()) });
        }
        let event_id = record.get(0).unwrap_or("").to_string();
        let rate = parse_field(&record, 1, "Rate", line)?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(validation(format!("line {line}: rate must be positive, got {rate}")));
        }
        let severity = match layout {
            CsvLayout::PointMass => SeverityDistribution::point_mass(parse_field(&record, 2, "Loss", line)?),
            CsvLayout::Gamma { with_cap } => {
                let alpha = parse_field(&record, 2, "Alpha", line)?;
                let beta = parse_field(&record, 3, "Beta", line)?;
                let g = SeverityDistribution::gamma(alpha, beta);
                match (with_cap, record.get(4).map(str::trim)) {
                    (true, Some(raw)) if !raw.is_empty() => {
                        g.and_then(|g| g.with_cap(parse_field(&record, 4, "Cap", line)?))
                    }
                    _ => g,
                }
            }
        }
        .map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("line {line}: {m}")),
            other => other,
        })?;
        rows.push(EltRow { event_id, rate, severity });
    }
    EventLossTable::new(rows, 1.0)
}

/// Writes a table of fixed losses (`EventID,Rate,Loss`) or of uncapped or
/// capped Gammas (`EventID,Rate,Alpha,Beta,Cap`).
pub fn write_elt<W: Write>(elt: &EventLossTable, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if elt.all_point_mass() {
        w.write_record(["EventID", "Rate", "Loss"]).map_err(csv_err)?;
        for r in elt.rows() {
            let x = r.severity.fixed_loss().unwrap_or_default();
            w.write_record([r.event_id.clone(), r.rate.to_string(), x.to_string()]).map_err(csv_err)?;
        }
    } else {
        w.write_record(["EventID", "Rate", "Alpha", "Beta", "Cap"]).map_err(csv_err)?;
        for r in elt.rows() {
            let cap = r.severity.cap().map(|u| u.to_string()).unwrap_or_default();
            match *r.severity.shape() {
                SeverityShape::Gamma { alpha, beta } => w
                    .write_record([r.event_id.clone(), r.rate.to_string(), alpha.to_string(), beta.to_string(), cap])
                    .map_err(csv_err)?,
                _ => return Err(Error::Unsupported("CSV output covers only all-fixed or all-Gamma tables".into())),
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rounds `x` to `d` decimal places (half away from zero) and returns it as
/// an integer count of `10^-d` units.
fn rounded_key(x: f64, d: i32) -> Result<i64> {
    let value = Decimal::from_str(&x.to_string())
        .or_else(|_| Decimal::try_from(x))
        .map_err(|_| validation(format!("loss {x} cannot be represented as a decimal")))?;
    let shifted = if d >= 0 {
        value.checked_mul(Decimal::from_i128_with_scale(10i128.pow(d as u32), 0))
    } else {
        value.checked_div(Decimal::from_i128_with_scale(10i128.pow((-d) as u32), 0))
    }
    .ok_or_else(|| validation(format!("loss {x} overflows at d = {d}")))?;
    shifted
        .round_dp_with_strategy(0, RoundingStrategy::MidpointAwayFromZero)
        .to_i64()
        .ok_or_else(|| validation(format!("loss {x} overflows at d = {d}")))
}

/// Rounds every loss to `d` decimal places of currency, rescales to integer
/// keys in units of `10^-d`, and merges rows with equal keys by summing
/// their rates. Output rows are ordered by key and renumbered from 1.
///
/// Keys of zero are kept; call [`EventLossTable::drop_zero_rows`] to remove
/// them. Tables with random losses are rejected.
pub fn compress_elt(elt: &EventLossTable, d: i32) -> Result<EventLossTable> {
    if !(-28..=18).contains(&d) {
        return Err(validation(format!("compression exponent {d} out of range")));
    }
    let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
    for row in elt.rows() {
        let x = row.severity.fixed_loss().ok_or_else(|| {
            Error::Unsupported(format!("event {} has a random loss; only fixed losses can be compressed", row.event_id))
        })?;
        let key = rounded_key(x * elt.loss_unit(), d)?;
        *merged.entry(key).or_insert(0.0) += row.rate;
    }
    let rows = merged
        .into_iter()
        .enumerate()
        .map(|(i, (key, rate))| EltRow::new((i + 1).to_string(), rate, SeverityDistribution::point_mass(key as f64)?))
        .collect::<Result<Vec<_>>>()?;
    EventLossTable::new(rows, 10f64.powi(-d))
}

/// A single compound Poisson process over a horizon of `horizon` years.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundModel {
    lambda: f64,
    horizon: f64,
    components: Vec<(f64, SeverityDistribution)>,
}

impl CompoundModel {
    /// Builds a model from an arrival rate and `(weight, severity)` pairs.
    pub fn new(lambda: f64, horizon: f64, components: Vec<(f64, SeverityDistribution)>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(validation(format!("arrival rate must be positive, got {lambda}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(validation(format!("horizon must be positive, got {horizon}")));
        }
        if components.is_empty() {
            return Err(validation("model needs at least one severity component"));
        }
        if components.iter().any(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
            return Err(validation("mixture weights must be non-negative"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(validation(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { lambda, horizon, components })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Expected number of events over the horizon, `λt`.
    pub fn expected_count(&self) -> f64 {
        self.lambda * self.horizon
    }

    pub fn components(&self) -> &[(f64, SeverityDistribution)] {
        &self.components
    }

    /// E(Y^k) for the mixture severity.
    pub fn severity_moment(&self, k: u32) -> f64 {
        self.components.iter().map(|(w, s)| w * s.raw_moment(k)).sum()
    }

    /// M_Y(v) for the mixture severity.
    pub fn severity_mgf(&self, v: f64) -> Result<f64> {
        let mut total = 0.0;
        for (w, s) in &self.components {
            total += w * s.mgf(v)?;
        }
        Ok(total)
    }

    /// μ = λt E(Y).
    pub fn mean(&self) -> f64 {
        self.expected_count() * self.severity_moment(1)
    }

    /// σ² = λt E(Y²).
    pub fn variance(&self) -> f64 {
        self.expected_count() * self.severity_moment(2)
    }

    pub fn second_raw_moment(&self) -> f64 {
        let mu = self.mean();
        self.variance() + mu * mu
    }

    /// Upper end of the Chernoff search interval: the smallest component
    /// abscissa.
    pub fn mgf_abscissa(&self) -> f64 {
        self.components.iter().map(|(_, s)| s.mgf_abscissa()).fold(f64::INFINITY, f64::min)
    }

    /// Same model with every loss divided by `c`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(validation(format!("scale must be positive, got {c}")));
        }
        let components =
            self.components.iter().map(|(w, s)| Ok((*w, rescale_severity(s, c)?))).collect::<Result<Vec<_>>>()?;
        Ok(Self { components, ..self.clone() })
    }
}

fn rescale_severity(s: &SeverityDistribution, c: f64) -> Result<SeverityDistribution> {
    let base = match s.shape() {
        &SeverityShape::PointMass { x } => SeverityDistribution::point_mass(x / c)?,
        &SeverityShape::Gamma { alpha, beta } => SeverityDistribution::gamma(alpha, beta * c)?,
        SeverityShape::GammaMixture(cs) => SeverityDistribution::gamma_mixture(
            &cs.iter().map(|g| (g.weight, g.alpha, g.beta * c)).collect::<Vec<_>>(),
        )?,
    };
    match s.cap() {
        Some(u) => base.with_cap(u / c),
        None => Ok(base),
    }
}

/// Collapses an ELT into one compound Poisson model over `t` years, with
/// Gamma mixtures flattened into weighted Gamma components. Losses stay in
/// the table's stored units.
pub fn to_compound_model(elt: &EventLossTable, t: f64) -> Result<CompoundModel> {
    let lambda = elt.total_rate();
    let components = elt.rows().iter().flat_map(|r| r.severity.flatten(r.rate / lambda)).collect();
    CompoundModel::new(lambda, t, components)
}

fn checked_severity_moments(model: &CompoundModel, k_max: u32) -> Result<Vec<f64>> {
    (0..=k_max)
        .map(|k| {
            let m = model.severity_moment(k);
            if m.is_nan() || m < 0.0 {
                Err(validation(format!("severity moment of order {k} is {m}")))
            } else {
                Ok(m)
            }
        })
        .collect()
}

/// `[E(S^0), ..., E(S^k_max)]` by the compound Poisson recursion
/// `E(S^k) = λt Σ_{j<k} C(k-1, j) E(S^j) E(Y^(k-j))`.
///
/// Values may overflow to `+inf` for large orders.
pub fn aggregate_moments(model: &CompoundModel, k_max: u32) -> Result<Vec<f64>> {
    if k_max < 1 {
        return Err(validation("k_max must be at least 1"));
    }
    let ys = checked_severity_moments(model, k_max)?;
    let rho = model.expected_count();
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(1.0);
    for k in 1..=k_max as usize {
        // C(k-1, j) built incrementally
        let mut binom = 1.0;
        let mut acc = 0.0;
        for j in 0..k {
            acc += binom * out[j] * ys[k - j];
            binom = binom * (k - 1 - j) as f64 / (j + 1) as f64;
        }
        out.push(rho * acc);
    }
    Ok(out)
}

/// `[ln E(S^0), ..., ln E(S^k_max)]`, the same recursion carried out in log
/// space so that no order overflows. Zero moments map to `-inf`.
pub fn aggregate_log_moments(model: &CompoundModel, k_max: u32) -> Result<Vec<f64>> {
    let ln_y = ln_severity_moments(model, k_max)?;
    let ln_rho = model.expected_count().ln();
    let mut ln_binom_row = vec![0.0f64; k_max as usize + 1];
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(0.0);
    let mut terms = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max as usize {
        // ln C(k-1, j) for j = 0..k-1
        ln_binom_row[0] = 0.0;
        for j in 1..k {
            ln_binom_row[j] = ln_binom_row[j - 1] + ((k - j) as f64).ln() - (j as f64).ln();
        }
        terms.clear();
        terms.extend((0..k).map(|j| ln_binom_row[j] + out[j] + ln_y[k - j]));
        out.push(ln_rho + log_sum_exp(&terms));
    }
    Ok(out)
}

/// `ln E(Y^k)` for `k = 0..=k_max`. Losses are measured against the largest
/// fixed loss or mean `c`, so fixed losses contribute `(x/c)^k <= 1` by a
/// running product; other shapes go through their log moments.
fn ln_severity_moments(model: &CompoundModel, k_max: u32) -> Result<Vec<f64>> {
    let comps = model.components();
    let c = comps.iter().map(|(_, s)| s.fixed_loss().unwrap_or_else(|| s.raw_moment(1))).fold(0.0f64, f64::max);
    if !c.is_finite() {
        return Err(validation("severity mean is not finite"));
    }
    let mut out = vec![0.0];
    if c == 0.0 {
        out.resize(k_max as usize + 1, f64::NEG_INFINITY);
        return Ok(out);
    }
    let ln_c = c.ln();
    let mut fixed: Vec<(f64, f64)> = Vec::new();
    let mut random: Vec<(f64, &SeverityDistribution)> = Vec::new();
    for (w, s) in comps {
        match s.fixed_loss() {
            Some(x) => fixed.push((*w, x / c)),
            None => random.push((*w, s)),
        }
    }
    // running w (x/c)^k per fixed component
    let mut powers: Vec<f64> = fixed.iter().map(|&(w, _)| w).collect();
    for k in 1..=k_max {
        let mut acc = 0.0;
        for (p, &(_, y)) in powers.iter_mut().zip(&fixed) {
            *p *= y;
            acc += *p;
        }
        let kf = f64::from(k);
        let mut overflow = false;
        for &(w, s) in &random {
            let lm = ln_raw_moment(s, k);
            if lm.is_nan() {
                return Err(validation(format!("severity moment of order {k} is not a number")));
            }
            let term = w * (lm - kf * ln_c).exp();
            overflow |= term.is_infinite();
            acc += term;
        }
        let lm = if overflow { log_severity_moment(model, k) } else { acc.ln() + kf * ln_c };
        out.push(lm);
    }
    Ok(out)
}

/// ln E(Y^k) by a log-sum over components.
fn log_severity_moment(model: &CompoundModel, k: u32) -> f64 {
    let terms: Vec<f64> =
        model.components().iter().filter(|(w, _)| *w > 0.0).map(|(w, s)| w.ln() + ln_raw_moment(s, k)).collect();
    log_sum_exp(&terms)
}

fn ln_raw_moment(s: &SeverityDistribution, k: u32) -> f64 {
    let m = s.raw_moment(k);
    if m.is_finite() {
        return m.ln();
    }
    let kf = f64::from(k);
    let gamma_ln =
        |alpha: f64, beta: f64| crate::special::ln_gamma(alpha + kf) - crate::special::ln_gamma(alpha) - kf * beta.ln();
    match s.shape() {
        &SeverityShape::Gamma { alpha, beta } => gamma_ln(alpha, beta),
        SeverityShape::GammaMixture(cs) => {
            let terms: Vec<f64> = cs.iter().map(|c| c.weight.ln() + gamma_ln(c.alpha, c.beta)).collect();
            log_sum_exp(&terms)
        }
        SeverityShape::PointMass { .. } => kf * s.fixed_loss().unwrap_or_default().ln(),
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
