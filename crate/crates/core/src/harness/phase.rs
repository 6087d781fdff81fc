use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, TrialConfig};
use super::trial::{run_cell, RowStatus, TrialRow};
use crate::error::{Error, Result};

pub const CONTOUR_LEVELS: [f64; 2] = [0.5, 0.9];

/// Polylines of one level set, as `(m, k)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Success rates over `m = 1..=n`, `k = 1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub n: usize,
    pub trials: usize,
    pub method: Method,
    /// `success[m - 1][k - 1]`; row `m - 1` has `m` entries.
    pub success: Vec<Vec<f64>>,
    pub timeouts: usize,
    pub errors: usize,
    pub contours: Vec<Contour>,
}

impl PhaseGrid {
    /// Rate at `(m, k)`, `None` outside the admissible triangle.
    pub fn rate(&self, m: usize, k: usize) -> Option<f64> {
        if m == 0 || k == 0 || k > m || m > self.n {
            return None;
        }
        Some(self.success[m - 1][k - 1])
    }

    /// For each `m`, the largest `k` such that every sparsity up to `k`
    /// succeeds with rate at least `level` (0 if `k = 1` already fails).
    pub fn column_levels(&self, level: f64) -> Vec<usize> {
        self.success
            .iter()
            .map(|col| col.iter().take_while(|&&s| s >= level).count())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "k", "rate"])?;
        for (mi, col) in self.success.iter().enumerate() {
            for (ki, s) in col.iter().enumerate() {
                w.write_record([(mi + 1).to_string(), (ki + 1).to_string(), s.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `phase_<method>.csv` and `contours_<method>.json` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        let tag = self.method.tag();
        self.write_csv(std::fs::File::create(dir.join(format!("phase_{tag}.csv")))?)?;
        let file = std::fs::File::create(dir.join(format!("contours_{tag}.json")))?;
        serde_json::to_writer_pretty(file, &self.contours)?;
        Ok(())
    }
}

/// Runs `methods` on `trials` seeded instances per admissible cell of the
/// `cfg.phase_n` grid and returns one grid per method, in the order given.
/// Failed and timed-out runs count as misses.
pub fn phase_transition(cfg: &TrialConfig, methods: &[Method], trials: usize) -> Result<Vec<PhaseGrid>> {
    let n = cfg.phase_n;
    if trials == 0 || methods.is_empty() {
        return Err(Error::Config("phase grid needs trials >= 1 and a method".into()));
    }
    let mut cell_cfg = cfg.clone();
    cell_cfg.methods = methods.to_vec();
    let cells: Vec<(usize, usize, usize)> = (1..=n)
        .flat_map(|m| (1..=m).flat_map(move |k| (0..trials).map(move |t| (m, k, t))))
        .collect();
    let rows: Vec<Vec<TrialRow>> = cells
        .par_iter()
        .map(|&(m, k, t)| run_cell(&cell_cfg, n, m, k, t))
        .collect::<Result<_>>()?;

    let mut grids: Vec<PhaseGrid> = methods
        .iter()
        .map(|&method| PhaseGrid {
            n,
            trials,
            method,
            success: (1..=n).map(|m| vec![0.0; m]).collect(),
            timeouts: 0,
            errors: 0,
            contours: Vec::new(),
        })
        .collect();
    for row in rows.iter().flatten() {
        let g = &mut grids[methods.iter().position(|&m| m == row.method).expect("configured method")];
        match row.status {
            RowStatus::Timeout => g.timeouts += 1,
            RowStatus::Error(_) => g.errors += 1,
            RowStatus::Ok => {}
        }
        if row.exact_by_r() {
            g.success[row.m - 1][row.k - 1] += 1.0;
        }
    }
    for g in &mut grids {
        for s in g.success.iter_mut().flatten() {
            *s /= trials as f64;
        }
        g.contours = CONTOUR_LEVELS
            .iter()
            .map(|&level| Contour {
                level,
                polylines: marching_squares(&g.success, level),
            })
            .collect();
    }
    Ok(grids)
}

type Point = [f64; 2];

fn key(p: Point) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

/// Level-`level` polylines of the triangular grid `success[m-1][k-1]`.
/// Only unit squares whose four corners are admissible contribute; saddles
/// are resolved by the mean of the corners.
pub fn marching_squares(success: &[Vec<f64>], level: f64) -> Vec<Vec<Point>> {
    let value = |m: usize, k: usize| success.get(m - 1).and_then(|c| c.get(k - 1)).copied();
    let mut segments: Vec<(Point, Point)> = Vec::new();
    for m in 1..success.len() {
        for k in 1..m {
            // Corners counterclockwise from (m, k).
            let corners = [(m, k), (m + 1, k), (m + 1, k + 1), (m, k + 1)];
            let vals: Vec<f64> = corners.iter().map(|&(a, b)| value(a, b).expect("admissible")).collect();
            let above: Vec<bool> = vals.iter().map(|&v| v >= level).collect();
            let cross = |i: usize| -> Point {
                let j = (i + 1) % 4;
                let t = (level - vals[i]) / (vals[j] - vals[i]);
                let (a, b) = (corners[i], corners[j]);
                [
                    a.0 as f64 + t * (b.0 as f64 - a.0 as f64),
                    a.1 as f64 + t * (b.1 as f64 - a.1 as f64),
                ]
            };
            let edges: Vec<usize> = (0..4).filter(|&i| above[i] != above[(i + 1) % 4]).collect();
            match edges.len() {
                2 => segments.push((cross(edges[0]), cross(edges[1]))),
                4 => {
                    let centre_above = vals.iter().sum::<f64>() / 4.0 >= level;
                    // Pair each crossing with the neighbour that keeps the
                    // centre on the side it belongs to.
                    if centre_above == above[0] {
                        segments.push((cross(0), cross(3)));
                        segments.push((cross(1), cross(2)));
                    } else {
                        segments.push((cross(0), cross(1)));
                        segments.push((cross(2), cross(3)));
                    }
                }
                _ => {}
            }
        }
    }
    stitch(segments)
}

/// Joins segments sharing endpoints into polylines.
fn stitch(segments: Vec<(Point, Point)>) -> Vec<Vec<Point>> {
    let mut at: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        at.entry(key(*a)).or_default().push(i);
        at.entry(key(*b)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let next = |p: Point, used: &[bool]| at[&key(p)].iter().copied().find(|&j| !used[j]);
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut line = vec![segments[start].0, segments[start].1];
        for forward in [true, false] {
            loop {
                let end = if forward { *line.last().expect("nonempty") } else { line[0] };
                let Some(j) = next(end, &used) else { break };
                used[j] = true;
                let (a, b) = segments[j];
                let far = if key(a) == key(end) { b } else { a };
                if forward {
                    line.push(far);
                } else {
                    line.insert(0, far);
                }
            }
        }
        lines.push(line);
    }
    lines
}
