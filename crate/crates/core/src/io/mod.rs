//! File formats: trajectory CSV, SVG charts and the historical-rates check.

pub mod rates;
pub mod svg;
pub mod trajectory_csv;

pub use rates::{rates_check, RatesSeries, SpreadReport};
pub use svg::render_svg;
pub use trajectory_csv::{read_trajectory_csv, write_trajectory_csv, TRAJECTORY_HEADER};
