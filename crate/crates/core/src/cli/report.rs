//! Collects `summary.json` files under a directory into one table.

use std::path::{Path, PathBuf};

use super::output::{Summary, SUMMARY_FILE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: PathBuf,
    pub summary: Summary,
}

/// Every summary in `dir` or below it, ordered by path.
pub fn collect(dir: &Path) -> Result<Vec<ReportRow>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{}: not a directory", dir.display())));
    }
    let mut found = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.file_name().is_some_and(|n| n == SUMMARY_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|path| {
            let summary = Summary::read(&path)
                .map_err(|e| Error::Config(format!("{}: unreadable summary: {e}", path.display())))?;
            let experiment = path.parent().unwrap_or(dir).strip_prefix(dir).unwrap_or(Path::new("")).to_path_buf();
            Ok(ReportRow { experiment, summary })
        })
        .collect()
}

/// Fixed-width table: one row per experiment with its headline check.
pub fn render(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<24} {:<14} {:>6} {:>14} {:>14} {:>11}  {}\n",
        "experiment", "kind", "gamma", "measured", "target", "|delta|", "verdict"
    );
    for row in rows {
        let s = &row.summary;
        let name = if row.experiment.as_os_str().is_empty() { ".".into() } else { row.experiment.display().to_string() };
        let gamma = s.gamma.map_or("-".into(), |g| format!("{g}"));
        let (measured, target, delta) = match s.headline() {
            Some(c) => (number(c.measured), number(c.target), format!("{:.3e}", c.deviation())),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let verdict = if s.passed { "pass".to_string() } else { format!("FAIL ({})", failed_checks(s)) };
        out.push_str(&format!(
            "{name:<24} {:<14} {gamma:>6} {measured:>14} {target:>14} {delta:>11}  {verdict}\n",
            s.kind
        ));
    }
    out
}

fn number(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

fn failed_checks(s: &Summary) -> String {
    s.checks.iter().filter(|c| c.gating && !c.passed).map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::output::{Check, Comparison};

    fn write(dir: &Path, name: &str, passed: bool) {
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).unwrap();
        let measured = if passed { 0.34 } else { 0.5 };
        Summary::new("resolvent-q0", Some(1.0), 1, vec![Check::new("exponent", measured, 1.0 / 3.0, 0.05, Comparison::Within)])
            .write(&sub)
            .unwrap();
    }

    #[test]
    fn empty_directory_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let rows = collect(dir.path()).unwrap();
        assert!(rows.is_empty());
        assert_eq!(render(&rows).lines().count(), 1);
    }

    #[test]
    fn rows_follow_path_order_and_flag_failures() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "b", false);
        write(dir.path(), "a", true);
        let rows = collect(dir.path()).unwrap();
        assert_eq!(rows.len(), 2);
        let text = render(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].starts_with("a ") && lines[1].ends_with("pass"));
        assert!(lines[2].starts_with("b ") && lines[2].contains("FAIL (exponent)"));
    }

    #[test]
    fn small_numbers_switch_to_exponents() {
        assert_eq!(number(0.5), "0.500000");
        assert_eq!(number(1.255e-7), "1.255000e-7");
        assert_eq!(number(0.0), "0.000000");
    }

    #[test]
    fn missing_directory_is_an_error() {
        assert!(collect(Path::new("/nonexistent/dampwave")).is_err());
    }
}
