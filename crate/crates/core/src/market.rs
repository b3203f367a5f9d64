//! Pay-for-performance accounting for regulation service.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::assets::BatteryParams;

/// Minimum score for an interval to earn any payment.
pub const QUALIFICATION_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("signal needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("score undefined: {0}")]
    UndefinedScore(&'static str),
    #[error("series length mismatch: {signal} signal samples vs {delivered} delivered")]
    LengthMismatch { signal: usize, delivered: usize },
    #[error("signal is identically zero")]
    ZeroSignal,
    #[error("signal value {value} at index {index} outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("empty sample group")]
    EmptyGroup,
    #[error("invalid {name} = {value}")]
    InvalidInput { name: &'static str, value: f64 },
    #[error("unknown statistic `{0}` (expected mean, p50, p75 or p95)")]
    UnknownStatistic(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketPrices {
    pub lambda_c: f64,
    pub lambda_m: f64,
}

impl MarketPrices {
    pub fn validate(&self) -> Result<(), MarketError> {
        for (name, value) in [("lambda_c", self.lambda_c), ("lambda_m", self.lambda_m)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(MarketError::InvalidInput { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketOutcome {
    pub capacity: f64,
    /// Raw score; may be negative when tracking is worse than idling.
    pub score: f64,
    pub mileage: f64,
    pub payment: f64,
    pub qualified: bool,
}

pub fn check_signal(r: &[f64]) -> Result<(), MarketError> {
    match r.iter().position(|v| !(v.abs() <= 1.0)) {
        Some(index) => Err(MarketError::OutOfRange { index, value: r[index] }),
        None => Ok(()),
    }
}

pub fn mileage(r: &[f64]) -> Result<f64, MarketError> {
    if r.len() < 2 {
        return Err(MarketError::TooShort(r.len()));
    }
    Ok(r.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Sum of absolute tracking errors, `sum |C r[k] - delivered[k]|`, in MW·steps.
pub fn tracking_error(capacity: f64, r: &[f64], delivered: &[f64]) -> Result<f64, MarketError> {
    if r.len() != delivered.len() {
        return Err(MarketError::LengthMismatch {
            signal: r.len(),
            delivered: delivered.len(),
        });
    }
    Ok(r.iter().zip(delivered).map(|(rk, d)| (capacity * rk - d).abs()).sum())
}

pub fn performance_score(capacity: f64, r: &[f64], delivered: &[f64]) -> Result<f64, MarketError> {
    if !(capacity > 0.0) {
        return Err(MarketError::UndefinedScore("capacity must be positive"));
    }
    let effort: f64 = r.iter().map(|v| v.abs()).sum();
    if !(effort > 0.0) {
        return Err(MarketError::UndefinedScore("signal has zero L1 norm"));
    }
    let err = tracking_error(capacity, r, delivered)?;
    Ok(1.0 - err / (capacity * effort))
}

pub fn qualifies(score: f64) -> bool {
    score >= QUALIFICATION_THRESHOLD
}

pub fn payment(score: f64, capacity: f64, mileage: f64, prices: &MarketPrices) -> f64 {
    if qualifies(score) {
        score * capacity * (prices.lambda_c + mileage * prices.lambda_m)
    } else {
        0.0
    }
}

/// Score, mileage and payment for one scored interval.
pub fn settle(
    capacity: f64,
    r: &[f64],
    delivered: &[f64],
    prices: &MarketPrices,
) -> Result<MarketOutcome, MarketError> {
    let score = performance_score(capacity, r, delivered)?;
    let m = mileage(r)?;
    Ok(MarketOutcome {
        capacity,
        score,
        mileage: m,
        payment: payment(score, capacity, m, prices),
        qualified: qualifies(score),
    })
}

/// Capacity that lets the largest deviation in `dp_series` answer the
/// largest signal excursion.
pub fn max_flex_bid(dp_series: &[f64], r: &[f64]) -> Result<f64, MarketError> {
    let r_inf = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(r_inf > 0.0) {
        return Err(MarketError::ZeroSignal);
    }
    let dp_inf = dp_series.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(dp_inf / r_inf)
}

/// Battery rating plus the green-load half of a PV statistic.
pub fn decomposed_bid(batt: &BatteryParams, pv_stat: f64) -> Result<f64, MarketError> {
    if !(pv_stat >= 0.0) || !pv_stat.is_finite() {
        return Err(MarketError::InvalidInput {
            name: "pv_stat",
            value: pv_stat,
        });
    }
    Ok(batt.p_max + 0.5 * pv_stat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PvStatistic {
    Mean,
    P50,
    P75,
    P95,
}

impl PvStatistic {
    pub const ALL: [PvStatistic; 4] = [PvStatistic::Mean, PvStatistic::P50, PvStatistic::P75, PvStatistic::P95];

    pub fn label(self) -> &'static str {
        match self {
            PvStatistic::Mean => "mean",
            PvStatistic::P50 => "p50",
            PvStatistic::P75 => "p75",
            PvStatistic::P95 => "p95",
        }
    }
}

impl fmt::Display for PvStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PvStatistic {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(PvStatistic::Mean),
            "p50" | "median" => Ok(PvStatistic::P50),
            "p75" => Ok(PvStatistic::P75),
            "p95" => Ok(PvStatistic::P95),
            _ => Err(MarketError::UnknownStatistic(s.to_string())),
        }
    }
}

/// Percentile by linear interpolation between order statistics, `p` in [0, 1].
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, MarketError> {
    if samples.is_empty() {
        return Err(MarketError::EmptyGroup);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(MarketError::InvalidInput {
            name: "percentile",
            value: p,
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn pv_statistic(samples: &[f64], stat: PvStatistic) -> Result<f64, MarketError> {
    if samples.is_empty() {
        return Err(MarketError::EmptyGroup);
    }
    match stat {
        PvStatistic::Mean => Ok(samples.iter().sum::<f64>() / samples.len() as f64),
        PvStatistic::P50 => percentile(samples, 0.50),
        PvStatistic::P75 => percentile(samples, 0.75),
        PvStatistic::P95 => percentile(samples, 0.95),
    }
}
