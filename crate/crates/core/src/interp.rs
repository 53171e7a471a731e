//! Local Lagrange interpolation on uniform grids.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Grid;

/// Value and first derivative at `x` of the degree `points - 1` polynomial
/// through the `points` samples nearest to `x`.
pub fn lagrange(grid: &Grid, samples: &[Complex64], x: f64, points: usize) -> Result<(Complex64, Complex64)> {
    let n = grid.n_points();
    let hw = grid.half_width();
    if !(x.abs() <= hw * (1.0 + 1e-14)) {
        return Err(Error::Extrapolation { x, half_width: hw });
    }
    if samples.len() != n {
        return Err(Error::GridMismatch(format!("{} samples for a {n}-point grid", samples.len())));
    }
    let points = points.min(n);
    let h = grid.spacing();
    let cell = (((x + hw) / h).floor() as isize).clamp(0, n as isize - 2);
    let first = (cell - (points as isize / 2 - 1)).clamp(0, (n - points) as isize) as usize;
    let xs = &grid.x()[first..first + points];
    let ys = &samples[first..first + points];

    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for j in 0..points {
        let mut denom = 1.0;
        let mut basis = 1.0;
        for m in 0..points {
            if m != j {
                denom *= xs[j] - xs[m];
                basis *= x - xs[m];
            }
        }
        // derivative of Π_{m≠j}(x - x_m), robust when x hits a node
        let mut dbasis = 0.0;
        for k in 0..points {
            if k == j {
                continue;
            }
            let mut prod = 1.0;
            for (m, &xm) in xs.iter().enumerate().take(points) {
                if m != j && m != k {
                    prod *= x - xm;
                }
            }
            dbasis += prod;
        }
        value += ys[j] * (basis / denom);
        deriv += ys[j] * (dbasis / denom);
    }
    Ok((value, deriv))
}

/// Four-point (cubic) interpolation.
pub fn cubic(grid: &Grid, samples: &[Complex64], x: f64) -> Result<Complex64> {
    Ok(lagrange(grid, samples, x, 4)?.0)
}

/// Four-point interpolation of real data.
pub fn cubic_real(grid: &Grid, samples: &[f64], x: f64) -> Result<f64> {
    let c: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(cubic(grid, &c, x)?.re)
}
