//! Rate fitting, centripetal-velocity sampling and vector-field export.

mod cylinder;
mod field;
mod fit;

pub use cylinder::{min_centripetal_on_cylinder, CylinderMin, CylinderSampler, CylinderSpec};
pub use field::{attractor_band, field_grid, write_field_csv, Bounds, FieldPoint, Slice};
pub use fit::{
    fit_all, fit_metric, fit_rate, fit_series, Metric, RateFamily, RateFit, MIN_FIT_ROWS,
};
