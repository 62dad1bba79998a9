use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use contactkit::bundle::Atlas;
use serde::Serialize;

use crate::commands::Failure;

/// Float with 17 significant digits, `.` decimal.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_line<I: IntoIterator<Item = String>>(cells: I) -> String {
    let mut line = cells.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Coordinate column names: the chart's own names when every chart shares
/// them, otherwise positional `x0, x1, …`.
pub fn coordinate_columns(atlas: &Atlas) -> Vec<String> {
    let first = atlas.chart(0).names();
    if atlas.charts().iter().all(|c| c.names() == first) {
        first.to_vec()
    } else {
        (0..atlas.dim()).map(|i| format!("x{i}")).collect()
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::io(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| Failure::io(format!("cannot write to stdout: {e}"))),
    }
}

/// Companion file next to `path` (`traj.csv` → `traj.<suffix>.json`), or stderr when `path` is absent.
pub fn emit_sidecar(path: Option<&Path>, suffix: &str, content: &str) -> Result<Option<PathBuf>, Failure> {
    match path {
        Some(p) => {
            let side = p.with_extension(format!("{suffix}.json"));
            fs::write(&side, content).map_err(|e| Failure::io(format!("cannot write {}: {e}", side.display())))?;
            Ok(Some(side))
        }
        None => {
            io::stderr()
                .write_all(content.as_bytes())
                .map_err(|e| Failure::io(format!("cannot write to stderr: {e}")))?;
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn sidecar_name() {
        let dir = std::env::temp_dir().join(format!("contactkit-sidecar-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let side = emit_sidecar(Some(&dir.join("traj.csv")), "switches", "{}")
            .unwrap()
            .unwrap();
        assert_eq!(side.file_name().unwrap(), "traj.switches.json");
        fs::remove_dir_all(dir).unwrap();
    }
}
