//! Log-compressed magnitude display in `[0, 1]`.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 40.0;

/// `clamp(1 + 20 log10(|g| / max|g|) / DR, 0, 1)`.
pub fn bmode_render(grid: &ImageGrid, dynamic_range_db: f64) -> Result<ImageGrid> {
    if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
        return Err(Error::invalid(format!(
            "dynamic range {dynamic_range_db} dB must be > 0"
        )));
    }
    let peak = grid.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::degenerate("cannot render an all-zero image"));
    }
    Ok(grid.map(|v| {
        let e = v.abs() / peak;
        if e == 0.0 {
            0.0
        } else {
            (1.0 + 20.0 * e.log10() / dynamic_range_db).clamp(0.0, 1.0)
        }
    }))
}
