//! Report serialization helpers: fixed 17-significant-digit float
//! formatting, CSV assembly, and atomic file writes.
//!
//! Reports are meant to be byte-compared across runs, so formatting is
//! pinned: every float uses scientific notation with 16 fractional digits
//! (17 significant digits, enough to round-trip any f64), lines end with
//! `\n`, and files are written atomically via a temp file and rename.

use std::io::Write as _;
use std::path::Path;

use crate::error::Result;

/// Formats with 17 significant digits; round-trips every finite f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line from already-formatted cells.
pub fn csv_line(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

/// Writes a file atomically: content goes to a sibling temp file which is
/// then renamed over the destination.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.to_path_buf();
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    name.push_str(&format!(".tmp.{}", std::process::id()));
    tmp.set_file_name(name);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips() {
        for x in [
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            2.2250738585072014e-308,
            1.7976931348623157e308,
            0.1 + 0.2,
        ] {
            let s = fmt17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
        assert_eq!(fmt17(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_line_joins_with_newline() {
        assert_eq!(
            csv_line(&["a".into(), "b".into(), "c".into()]),
            "a,b,c\n"
        );
    }

    #[test]
    fn write_atomic_replaces_content() {
        let dir = std::env::temp_dir().join(format!("hwlab-report-{}", std::process::id()));
        let path = dir.join("out.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
