//! Empirical convergence rates from a run history.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::History;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("need at least {needed} points in the window, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("nonpositive value in window: x = {x}, y = {y}")]
    NonPositive { x: f64, y: f64 },
    #[error("goal errors need a reference value")]
    NoReference,
}

pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XField {
    /// `#T_ℓ`, at the accepted step of every level.
    Elements,
    /// Cumulative work, at every step.
    Work,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YField {
    Xi,
    EtaZeta,
    /// `|G(u*) - G_ℓ|`.
    GoalError,
}

impl FromStr for XField {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "elements" => Ok(XField::Elements),
            "work" => Ok(XField::Work),
            other => Err(format!("unknown x field '{other}'")),
        }
    }
}

impl fmt::Display for YField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            YField::Xi => "xi",
            YField::EtaZeta => "eta*zeta",
            YField::GoalError => "goal error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    All,
    /// Points with `x ≥ x_max / 10`.
    TrailingDecade,
    /// The last `n` points.
    Last(usize),
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64, RateError> {
    if xs.len() < MIN_POINTS {
        return Err(RateError::TooFewPoints {
            needed: MIN_POINTS,
            found: xs.len(),
        });
    }
    if let Some((&x, &y)) = xs.iter().zip(ys).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(RateError::NonPositive { x, y });
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Points `(x, y)` of the requested series.
pub fn series(history: &History, x: XField, y: YField) -> Result<Vec<(f64, f64)>, RateError> {
    let recs = match x {
        XField::Elements => history.accepted(),
        XField::Work => history.records.iter().collect(),
    };
    recs.into_iter()
        .map(|r| {
            let xv = match x {
                XField::Elements => r.num_elements as f64,
                XField::Work => r.work as f64,
            };
            let yv = match y {
                YField::Xi => r.xi,
                YField::EtaZeta => r.eta * r.zeta,
                YField::GoalError => r.goal_error.ok_or(RateError::NoReference)?,
            };
            Ok((xv, yv))
        })
        .collect()
}

/// Windowed log-log slope of `y` against `x`.
pub fn rate_estimate(history: &History, x: XField, y: YField, window: Window) -> Result<f64, RateError> {
    let pts = windowed(&series(history, x, y)?, window);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_slope(&xs, &ys)
}

pub fn windowed(points: &[(f64, f64)], window: Window) -> Vec<(f64, f64)> {
    match window {
        Window::All => points.to_vec(),
        Window::TrailingDecade => {
            let xmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            points.iter().copied().filter(|p| p.0 >= xmax / 10.0).collect()
        }
        Window::Last(n) => points[points.len().saturating_sub(n)..].to_vec(),
    }
}
