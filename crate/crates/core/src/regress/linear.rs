use crate::datagen::Dataset;
use crate::error::{Error, Result};

use super::{columns, Direction, FitKind, FitModel};

/// Ordinary least squares line in the given direction.
pub fn fit_linear(data: &Dataset, direction: Direction) -> Result<FitModel> {
    if data.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "linear fit needs at least 3 rows, got {}",
            data.len()
        )));
    }
    let (x, y) = columns(data, direction);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateColumn {
            column: direction.input().name(),
        });
    }
    let slope = sxy / sxx;
    Ok(FitModel::trained(
        FitKind::Linear {
            slope,
            intercept: my - slope * mx,
        },
        direction,
        data,
    ))
}
