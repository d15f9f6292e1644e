use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CURVES_HEADER: &str = "iter,reward,cd_refined,cd_base,action_norm,improvement";

/// Per-iteration training log entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub iter: usize,
    pub reward: f64,
    pub cd_refined: f64,
    pub cd_base: f64,
    pub action_norm: f64,
    pub improvement: f64,
}

pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter, r.reward, r.cd_refined, r.cd_base, r.action_norm, r.improvement
        );
    }
    out
}

pub fn save_curves(rows: &[CurveRow], path: &Path) -> Result<()> {
    fs::write(path, curves_to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_curves(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        return Err(Error::parse("curves", "line 1", "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::parse("curves", format!("line {}", i + 2), format!("malformed row `{line}`"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(CurveRow {
                iter: f[0].parse().map_err(|_| bad())?,
                reward: num(f[1])?,
                cd_refined: num(f[2])?,
                cd_base: num(f[3])?,
                action_norm: num(f[4])?,
                improvement: num(f[5])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            CurveRow {
                iter: 0,
                reward: -0.1,
                cd_refined: 0.2,
                cd_base: 0.1,
                action_norm: 11.0,
                improvement: -0.1,
            },
            CurveRow {
                iter: 1,
                reward: 0.05,
                cd_refined: 0.05,
                cd_base: 0.1,
                action_norm: 3.25,
                improvement: 0.05,
            },
        ];
        let csv = curves_to_csv(&rows);
        assert!(csv.starts_with("iter,reward,cd_refined,cd_base,action_norm,improvement\n"));
        assert_eq!(parse_curves(&csv).unwrap(), rows);
        assert!(parse_curves("bad\n").is_err());
    }
}
