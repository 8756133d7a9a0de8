//! Continual-learning metrics from a task-accuracy matrix.
//!
//! `A[i][t]` is the accuracy on task `i` measured after learning task `t`
//! (defined for `t >= i`). From it:
//!
//! * `AA_t`   — mean accuracy over tasks `i <= t`, measured at time `t`;
//! * `FAA`    — final average accuracy, `AA_T`;
//! * `AAA`    — anytime average accuracy, the mean of all `AA_t`;
//! * `Forgetting` — mean over tasks `i < T` of `max_t A[i][t] - A[i][T]`;
//! * `Stability`  — mean over times `t >= 2` of the average accuracy on the
//!   tasks learned strictly before `t`.
//!
//! Forgetting and stability need at least two tasks and are reported as
//! `None` for a single task.

use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

/// Task-accuracy matrix; only entries with `time >= task` are meaningful.
#[derive(Debug, Clone)]
pub struct AccuracyMatrix {
    /// `values[(task, time)]`, valid for `time >= task`.
    values: Array2<f64>,
}

impl AccuracyMatrix {
    /// Build from a full T x T array in task-major orientation
    /// (`a[(i, t)]` = accuracy on task i after learning task t).
    /// Entries below the diagonal are ignored and may hold anything.
    pub fn from_task_by_time(values: Array2<f64>) -> Result<Self> {
        let t = values.nrows();
        if t == 0 || values.ncols() != t {
            return Err(Error::Structure(format!(
                "accuracy matrix must be square and non-empty, got {}x{}",
                t,
                values.ncols()
            )));
        }
        for i in 0..t {
            for j in i..t {
                let v = values[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!(
                        "accuracy A[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(AccuracyMatrix { values })
    }

    /// Parse the CSV layout: row `t` holds the accuracies measured after
    /// learning task `t`, one column per task, so the meaningful entries
    /// form the lower triangle. Entries above the diagonal are ignored
    /// (numeric or not). An optional header row is skipped when its first
    /// field is not a number.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }

    fn from_csv_str(text: &str, path: &Path) -> Result<Self> {
        let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if let Some(first) = lines.first() {
            let head = first.split(',').next().unwrap_or("").trim();
            if head.parse::<f64>().is_err() {
                lines.remove(0);
            }
        }
        let t = lines.len();
        if t == 0 {
            return Err(Error::Structure(format!(
                "{}: no accuracy rows",
                path.display()
            )));
        }
        let mut values = Array2::zeros((t, t));
        for (time, line) in lines.iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < time + 1 {
                return Err(Error::Structure(format!(
                    "{}: row {} has {} fields, needs at least {}",
                    path.display(),
                    time + 1,
                    fields.len(),
                    time + 1
                )));
            }
            for (task, field) in fields.iter().enumerate().take(time + 1) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::parse(
                        path,
                        format!("row {}, field {}", time + 1, task + 1),
                        format!("`{}` is not a number", field.trim()),
                    )
                })?;
                values[(task, time)] = v;
            }
        }
        Self::from_task_by_time(values)
    }

    /// Number of tasks.
    pub fn tasks(&self) -> usize {
        self.values.nrows()
    }

    /// Accuracy on `task` after learning `time` (0-based, `time >= task`).
    pub fn accuracy(&self, task: usize, time: usize) -> f64 {
        debug_assert!(time >= task);
        self.values[(task, time)]
    }
}

/// The computed metric set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClMetrics {
    pub faa: f64,
    pub aaa: f64,
    pub forgetting: Option<f64>,
    pub stability: Option<f64>,
}

/// Compute FAA, AAA, forgetting and stability.
pub fn compute_cl_metrics(matrix: &AccuracyMatrix) -> ClMetrics {
    let t_count = matrix.tasks();
    let average_at = |time: usize| -> f64 {
        let sum: f64 = (0..=time).map(|task| matrix.accuracy(task, time)).sum();
        sum / (time + 1) as f64
    };
    let faa = average_at(t_count - 1);
    let aaa = (0..t_count).map(average_at).sum::<f64>() / t_count as f64;

    if t_count < 2 {
        return ClMetrics {
            faa,
            aaa,
            forgetting: None,
            stability: None,
        };
    }

    let last = t_count - 1;
    let forgetting = (0..last)
        .map(|task| {
            let best = (task..t_count)
                .map(|time| matrix.accuracy(task, time))
                .fold(f64::NEG_INFINITY, f64::max);
            best - matrix.accuracy(task, last)
        })
        .sum::<f64>()
        / last as f64;

    let stability = (1..t_count)
        .map(|time| {
            let sum: f64 = (0..time).map(|task| matrix.accuracy(task, time)).sum();
            sum / time as f64
        })
        .sum::<f64>()
        / last as f64;

    ClMetrics {
        faa,
        aaa,
        forgetting: Some(forgetting),
        stability: Some(stability),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_learner_3x3() {
        let m = AccuracyMatrix::from_task_by_time(Array2::ones((3, 3))).unwrap();
        let r = compute_cl_metrics(&m);
        assert_eq!(r.faa, 1.0);
        assert_eq!(r.aaa, 1.0);
        assert_eq!(r.forgetting, Some(0.0));
        assert_eq!(r.stability, Some(1.0));
    }

    #[test]
    fn hand_example_2x2() {
        let m = AccuracyMatrix::from_task_by_time(array![[0.8, 0.6], [0.0, 0.9]]).unwrap();
        let r = compute_cl_metrics(&m);
        assert_eq!(r.faa, 0.75);
        assert_eq!(r.aaa, 0.775);
        // 0.8 - 0.6 in f64 is 0.2 only to representation precision
        assert!((r.forgetting.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(r.stability, Some(0.6));
    }

    #[test]
    fn diagonal_only_forgetting_is_mean_of_diagonal() {
        // accuracy d_i right after learning task i, zero afterwards
        let m = AccuracyMatrix::from_task_by_time(array![
            [0.9, 0.0, 0.0],
            [0.0, 0.6, 0.0],
            [0.0, 0.0, 0.3]
        ])
        .unwrap();
        let r = compute_cl_metrics(&m);
        assert_eq!(r.forgetting, Some((0.9 + 0.6) / 2.0));
    }

    #[test]
    fn single_task_has_no_forgetting() {
        let m = AccuracyMatrix::from_task_by_time(array![[0.4]]).unwrap();
        let r = compute_cl_metrics(&m);
        assert_eq!(r.faa, 0.4);
        assert_eq!(r.aaa, 0.4);
        assert_eq!(r.forgetting, None);
        assert_eq!(r.stability, None);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(AccuracyMatrix::from_task_by_time(array![[1.2]]).is_err());
        // below-diagonal junk is fine
        assert!(AccuracyMatrix::from_task_by_time(array![[0.5, 0.5], [9.9, 0.5]]).is_ok());
    }

    #[test]
    fn csv_lower_triangular_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.csv");
        // row t = after task t; the 2x2 hand example in file form:
        std::fs::write(&path, "0.8\n0.6,0.9\n").unwrap();
        let m = AccuracyMatrix::from_csv(&path).unwrap();
        assert_eq!(m.accuracy(0, 0), 0.8);
        assert_eq!(m.accuracy(0, 1), 0.6);
        assert_eq!(m.accuracy(1, 1), 0.9);
        let r = compute_cl_metrics(&m);
        assert_eq!(r.faa, 0.75);
    }

    #[test]
    fn csv_header_and_above_diagonal_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.csv");
        std::fs::write(&path, "task0,task1\n0.8,-\n0.6,0.9\n").unwrap();
        let m = AccuracyMatrix::from_csv(&path).unwrap();
        assert_eq!(m.accuracy(0, 0), 0.8);
        assert_eq!(m.accuracy(1, 1), 0.9);
    }

    #[test]
    fn csv_short_row_is_structural_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.csv");
        std::fs::write(&path, "0.8\n0.6\n").unwrap();
        assert!(AccuracyMatrix::from_csv(&path).is_err());
    }
}
