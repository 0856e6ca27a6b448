//! Regression in either direction, plus model inversion.
//!
//! *Inverse* regression fits `C → E` and inverts the fit to predict `C`;
//! *reverse* regression fits `E → C` directly. Under noise on `E` the two
//! disagree, and the reverse fit is biased toward the mean of `C`.

mod linear;
mod power;
mod spline;

use serde::Serialize;

use crate::datagen::{Column, Dataset};
use crate::error::{Error, Result};

pub use linear::fit_linear;
pub use power::{fit_power, MAX_ITERATIONS as POWER_MAX_ITERATIONS};
pub use spline::{fit_smoothing_spline, lambda_grid, SmoothingSpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    CToE,
    EToC,
}

impl Direction {
    pub fn input(self) -> Column {
        match self {
            Direction::CToE => Column::C,
            Direction::EToC => Column::E,
        }
    }

    pub fn target(self) -> Column {
        self.input().other()
    }

    pub fn reversed(self) -> Direction {
        match self {
            Direction::CToE => Direction::EToC,
            Direction::EToC => Direction::CToE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitKind {
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `a · x^b`, evaluated at `max(x, 0)`.
    PowerLaw {
        a: f64,
        b: f64,
    },
    SmoothingSpline(SmoothingSpline),
    /// Pointwise inverse of a monotone spline, evaluated by bisection.
    InverseSpline(SmoothingSpline),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitModel {
    #[serde(flatten)]
    pub kind: FitKind,
    pub direction: Direction,
    /// The fit this model was obtained from by inversion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverted_from: Option<Box<FitModel>>,
    /// RMSE on the training data; absent for inverted models.
    pub training_rmse: Option<f64>,
    /// False when an iterative fit stopped at its iteration budget.
    pub converged: bool,
}

impl FitModel {
    pub(crate) fn trained(kind: FitKind, direction: Direction, data: &Dataset) -> Self {
        let mut model = FitModel {
            kind,
            direction,
            inverted_from: None,
            training_rmse: None,
            converged: true,
        };
        model.training_rmse = Some(rmse(&model, data, direction.target()));
        model
    }

    pub fn predict(&self, x: f64) -> f64 {
        match &self.kind {
            FitKind::Linear { slope, intercept } => slope * x + intercept,
            FitKind::PowerLaw { a, b } => a * x.max(0.0).powf(*b),
            FitKind::SmoothingSpline(s) => s.eval(x),
            FitKind::InverseSpline(s) => s.solve(x),
        }
    }
}

/// Inverts a fitted model so it predicts in the opposite direction.
pub fn invert_model(model: &FitModel) -> Result<FitModel> {
    let kind = match &model.kind {
        FitKind::Linear { slope, intercept } => {
            if *slope == 0.0 || !slope.is_finite() {
                return Err(Error::NotInvertible(format!("linear slope {slope}")));
            }
            FitKind::Linear {
                slope: 1.0 / slope,
                intercept: -intercept / slope,
            }
        }
        // y = a x^b  ⇔  x = a^(-1/b) y^(1/b)
        FitKind::PowerLaw { a, b } => FitKind::PowerLaw {
            a: a.powf(-1.0 / b),
            b: 1.0 / b,
        },
        FitKind::SmoothingSpline(s) => FitKind::InverseSpline(s.monotone()?),
        FitKind::InverseSpline(s) => FitKind::SmoothingSpline(s.clone()),
    };
    Ok(FitModel {
        kind,
        direction: model.direction.reversed(),
        inverted_from: Some(Box::new(model.clone())),
        training_rmse: None,
        converged: model.converged,
    })
}

/// Root mean squared error predicting `target` from the other column.
pub fn rmse(model: &FitModel, data: &Dataset, target: Column) -> f64 {
    let inputs = data.column(target.other());
    let targets = data.column(target);
    let sse: f64 = inputs
        .iter()
        .zip(targets)
        .map(|(&x, &y)| (y - model.predict(x)).powi(2))
        .sum();
    (sse / data.len() as f64).sqrt()
}

/// `(x, y)` columns for fitting in `direction`.
pub(crate) fn columns(data: &Dataset, direction: Direction) -> (&[f64], &[f64]) {
    (
        data.column(direction.input()),
        data.column(direction.target()),
    )
}
