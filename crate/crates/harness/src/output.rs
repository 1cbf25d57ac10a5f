//! CSV schemas. Floats are written in Rust's shortest round-trip form, so
//! equal values always give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::{HarnessError, Result};

pub const PARTITION_HEADER: [&str; 6] = [
    "layer_or_node",
    "channel",
    "region_count",
    "max_points_per_region",
    "max_intra_region_distance",
    "multi_member_point_count",
];
pub const LEVEL_SUM_HEADER: [&str; 4] = ["level", "sum", "frob_sum", "certified_C"];
pub const GAIN_HEADER: [&str; 2] = ["level", "max_gain"];
pub const REGIONS_HEADER: [&str; 4] = ["network", "probe", "grid_n", "region_count"];

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Creates `dir` if needed and returns `dir/name`.
pub(crate) fn target(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir.join(name))
}
