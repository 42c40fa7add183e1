use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::{accumulate, geodesic_error, rot_to_axis_angle, RotationEstimate};

/// One row of a trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub frame_index: usize,
    pub gt_ax: f64,
    pub gt_ay: f64,
    pub gt_az: f64,
    pub est_ax: f64,
    pub est_ay: f64,
    pub est_az: f64,
    pub geodesic_error_rad: f64,
    pub residual: f64,
}

impl TrajectoryRow {
    pub fn new(frame_index: usize, gt: &Matrix3<f64>, est: &Matrix3<f64>, residual: f64) -> Result<Self> {
        let g = rot_to_axis_angle(gt)?;
        let e = rot_to_axis_angle(est)?;
        Ok(Self {
            frame_index,
            gt_ax: g.x,
            gt_ay: g.y,
            gt_az: g.z,
            est_ax: e.x,
            est_ay: e.y,
            est_az: e.z,
            geodesic_error_rad: geodesic_error(gt, est),
            residual,
        })
    }
}

/// Relative and accumulated trajectories for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub deltas: Vec<TrajectoryRow>,
    pub absolutes: Vec<TrajectoryRow>,
}

/// Builds both trajectories. `pairs` are adjacent `(n - 1, n)` frames;
/// accumulation restarts at the identity wherever a frame has no incoming
/// pair.
pub fn build_trajectory(
    frame_count: usize,
    pairs: &[(usize, usize)],
    estimates: &[RotationEstimate],
    gt_deltas: &[Matrix3<f64>],
    gt_absolutes: &[Matrix3<f64>],
) -> Result<Trajectory> {
    if estimates.len() != pairs.len() {
        return Err(Error::LengthMismatch(estimates.len(), pairs.len()));
    }
    let mut incoming: Vec<Option<&RotationEstimate>> = vec![None; frame_count];
    for (&(_, b), e) in pairs.iter().zip(estimates) {
        incoming[b] = Some(e);
    }
    let deltas = pairs
        .iter()
        .zip(estimates)
        .map(|(&(_, b), e)| TrajectoryRow::new(b, &gt_deltas[b], &e.matrix, e.residual))
        .collect::<Result<Vec<_>>>()?;
    let mut absolutes = Vec::with_capacity(frame_count);
    let mut segment: Vec<Matrix3<f64>> = Vec::new();
    let mut start = 0;
    let flush = |segment: &mut Vec<Matrix3<f64>>, start: usize, out: &mut Vec<TrajectoryRow>| -> Result<()> {
        for (k, r) in accumulate(segment).into_iter().enumerate() {
            let n = start + k;
            let residual = incoming[n].map_or(0.0, |e| e.residual);
            out.push(TrajectoryRow::new(n, &gt_absolutes[n], &r, residual)?);
        }
        segment.clear();
        Ok(())
    };
    for (n, inc) in incoming.iter().enumerate() {
        match inc {
            Some(e) => segment.push(e.matrix),
            None => {
                flush(&mut segment, start, &mut absolutes)?;
                start = n;
                segment.push(Matrix3::identity());
            }
        }
    }
    flush(&mut segment, start, &mut absolutes)?;
    Ok(Trajectory { deltas, absolutes })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Mean, median, 95th percentile and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                mean: f64::NAN,
                median: f64::NAN,
                p95: f64::NAN,
                max: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Self {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: percentile(&v, 0.95),
            max: v[n - 1],
        }
    }
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Error summaries of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub delta_error_rad: Summary,
    pub absolute_error_rad: Summary,
}

impl MethodSummary {
    pub fn of(method: impl Into<String>, traj: &Trajectory) -> Self {
        let d: Vec<f64> = traj.deltas.iter().map(|r| r.geodesic_error_rad).collect();
        let a: Vec<f64> = traj.absolutes.iter().map(|r| r.geodesic_error_rad).collect();
        Self {
            method: method.into(),
            delta_error_rad: Summary::of(&d),
            absolute_error_rad: Summary::of(&a),
        }
    }
}

/// Per-stage timing in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: Summary,
}

/// Accuracy and timing results of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<MethodSummary>,
    pub best_analytical: String,
    pub test_pairs: usize,
    pub timings: Vec<StageTiming>,
}
