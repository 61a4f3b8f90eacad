//! First-order continuity analysis of embedding trajectories.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Embedding rows over a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub ts: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }

    /// CSV with header `t,dim_0,...,dim_{D-1}` at full float64 precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "t")?;
        for d in 0..self.dim() {
            write!(f, ",dim_{d}")?;
        }
        writeln!(f)?;
        for (t, row) in self.ts.iter().zip(&self.rows) {
            write!(f, "{t:.16e}")?;
            for v in row {
                write!(f, ",{v:.16e}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Difference quotients around one anchor crossing.
#[derive(Debug, Clone, Serialize)]
pub struct AnchorCrossing {
    pub t_anchor: f64,
    pub left_slope_norm: f64,
    pub right_slope_norm: f64,
    /// Norm of (right slope - left slope).
    pub mismatch: f64,
    /// Max scaled second difference within half an interval of the anchor.
    pub jitter: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub interval: f64,
    pub grid_step: f64,
    pub crossings: Vec<AnchorCrossing>,
}

impl ContinuityReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn max_mismatch(&self) -> f64 {
        self.crossings.iter().map(|c| c.mismatch).fold(0.0, f64::max)
    }
}

fn diff_norm(a: &[f64], b: &[f64], scale: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| { let d = (x - y) * scale; d * d })
        .sum::<f64>()
        .sqrt()
}

/// Scaled second difference `|x_{j+1} - 2 x_j + x_{j-1}| / h^2` at row `j`.
fn second_diff(traj: &Trajectory, j: usize, h: f64) -> f64 {
    let (a, b, c) = (&traj.rows[j - 1], &traj.rows[j], &traj.rows[j + 1]);
    a.iter()
        .zip(b.iter().zip(c))
        .map(|(&x0, (&x1, &x2))| {
            let d = (x2 - 2.0 * x1 + x0) / (h * h);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Per-anchor-crossing slopes, mismatch, and local jitter over a uniform
/// grid. The grid spacing must divide the anchor interval.
pub fn continuity_report(traj: &Trajectory, interval: f64, h: f64) -> Result<ContinuityReport> {
    if traj.ts.len() < 3 {
        return Err(Error::config("continuity report needs at least 3 grid points".to_string()));
    }
    for w in traj.ts.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::config(format!(
                "grid is not uniform with step {h}: found gap {}",
                w[1] - w[0]
            )));
        }
    }
    let ratio = interval / h;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::config(format!(
            "anchor interval {interval} is not an integer multiple of grid step {h}"
        )));
    }

    let mut crossings = Vec::new();
    let half_window = (interval / 2.0 - h * 0.5).max(h);
    for j in 1..traj.ts.len() - 1 {
        let t = traj.ts[j];
        let phase = (t / interval - (t / interval).round()).abs();
        if phase > 1e-9 {
            continue;
        }
        let left = diff_norm(&traj.rows[j], &traj.rows[j - 1], 1.0 / h);
        let right = diff_norm(&traj.rows[j + 1], &traj.rows[j], 1.0 / h);
        let mismatch = traj.rows[j + 1]
            .iter()
            .zip(traj.rows[j].iter().zip(&traj.rows[j - 1]))
            .map(|(&xr, (&xm, &xl))| {
                let d = (xr - xm) / h - (xm - xl) / h;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        let mut jitter = 0.0f64;
        for q in 1..traj.ts.len() - 1 {
            if (traj.ts[q] - t).abs() <= half_window {
                jitter = jitter.max(second_diff(traj, q, h));
            }
        }
        crossings.push(AnchorCrossing {
            t_anchor: t,
            left_slope_norm: left,
            right_slope_norm: right,
            mismatch,
            jitter,
        });
    }
    Ok(ContinuityReport { interval, grid_step: h, crossings })
}

/// Max scaled second difference within `radius` of each probe time.
/// The trajectory grid must contain each probe point.
pub fn jitter_at_points(traj: &Trajectory, points: &[f64], h: f64, radius: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(points.len());
    for &p in points {
        let mut best: Option<f64> = None;
        for j in 1..traj.ts.len() - 1 {
            if (traj.ts[j] - p).abs() <= radius {
                let s = second_diff(traj, j, h);
                best = Some(best.map_or(s, |b: f64| b.max(s)));
            }
        }
        out.push(best.ok_or_else(|| {
            Error::config(format!("probe point {p} not covered by trajectory grid"))
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_trajectory(slope: f64, n: usize, h: f64) -> Trajectory {
        let ts: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let rows = ts.iter().map(|&t| vec![slope * t]).collect();
        Trajectory { ts, rows }
    }

    #[test]
    fn linear_function_has_zero_mismatch() {
        let traj = ramp_trajectory(3.0, 65, 0.5);
        let report = continuity_report(&traj, 8.0, 0.5).unwrap();
        assert!(!report.crossings.is_empty());
        for c in &report.crossings {
            assert!(c.mismatch < 1e-9, "mismatch {}", c.mismatch);
            assert!(c.jitter < 1e-9);
        }
    }

    #[test]
    fn hat_function_mismatch_is_two() {
        // Slope +1 before the anchor at t=4, slope -1 after: mismatch 2.
        let h = 0.5;
        let ts: Vec<f64> = (0..17).map(|i| i as f64 * h).collect();
        let rows = ts.iter().map(|&t| vec![if t <= 4.0 { t } else { 8.0 - t }]).collect();
        let traj = Trajectory { ts, rows };
        let report = continuity_report(&traj, 4.0, h).unwrap();
        let at4 = report.crossings.iter().find(|c| (c.t_anchor - 4.0).abs() < 1e-12).unwrap();
        assert!((at4.mismatch - 2.0).abs() < 1e-12);
        assert!((at4.left_slope_norm - 1.0).abs() < 1e-12);
        assert!((at4.right_slope_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_uniform_grid_is_rejected() {
        let traj = Trajectory {
            ts: vec![0.0, 0.5, 1.5],
            rows: vec![vec![0.0], vec![0.0], vec![0.0]],
        };
        assert!(matches!(
            continuity_report(&traj, 4.0, 0.5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn indivisible_interval_is_rejected() {
        let traj = ramp_trajectory(1.0, 10, 0.3);
        assert!(matches!(
            continuity_report(&traj, 1.0, 0.3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_and_json_exports_have_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let traj = ramp_trajectory(1.0, 9, 0.5);
        let csv = dir.path().join("traj.csv");
        traj.write_csv(&csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,dim_0");
        assert_eq!(lines.count(), 9);

        let report = continuity_report(&traj, 2.0, 0.5).unwrap();
        let json = dir.path().join("continuity.json");
        report.write_json(&json).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
        assert!(parsed["crossings"][0]["t_anchor"].is_number());
        assert!(parsed["crossings"][0]["mismatch"].is_number());
        assert!(parsed["crossings"][0]["jitter"].is_number());
    }
}
