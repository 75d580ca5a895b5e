use crate::geometry::Point;

use super::FemError;

/// Conductance matrix of a linear triangle for `div(k kr grad h) = 0`.
pub fn element_conductance(p: [Point; 3], k_sat: f64, k_r: f64) -> Result<[[f64; 3]; 3], FemError> {
    let (b, c, area) = shape_gradients(p)?;
    let s = k_sat * k_r / (4.0 * area);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = s * (b[i] * b[j] + c[i] * c[j]);
        }
    }
    Ok(m)
}

/// Returns `(b, c, area)` with `grad N_i = (b_i, c_i) / (2 area)`.
pub fn shape_gradients(p: [Point; 3]) -> Result<([f64; 3], [f64; 3], f64), FemError> {
    let b = [p[1].y - p[2].y, p[2].y - p[0].y, p[0].y - p[1].y];
    let c = [p[2].x - p[1].x, p[0].x - p[2].x, p[1].x - p[0].x];
    let area = 0.5 * (b[0] * c[1] - b[1] * c[0]);
    if !(area > 0.0) {
        return Err(FemError::DegenerateElement { area });
    }
    Ok((b, c, area))
}

/// Constant gradient of the linear interpolant of `h` over the triangle.
pub fn element_gradient(p: [Point; 3], h: [f64; 3]) -> Result<[f64; 2], FemError> {
    let (b, c, area) = shape_gradients(p)?;
    let d = 2.0 * area;
    Ok([
        (b[0] * h[0] + b[1] * h[1] + b[2] * h[2]) / d,
        (c[0] * h[0] + c[1] * h[1] + c[2] * h[2]) / d,
    ])
}
