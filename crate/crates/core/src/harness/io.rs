//! CSV artifacts. Numbers are written with the shortest round-trip decimal
//! form, so identical values always produce identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QrcError, Result};
use crate::reservoir::FeatureSeries;
use crate::tasks::{Dataset, Segment};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["l", "u", "y", "segment"])?;
    for k in 0..ds.inputs.len() {
        w.write_record([
            ds.time(k).to_string(),
            ds.inputs[k].to_string(),
            ds.targets[k].to_string(),
            ds.segments[k].name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub l: i64,
    pub u: f64,
    pub y: f64,
    pub segment: String,
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// `l,z0,…,z{n−1}` with `l` starting at 1.
pub fn write_features(path: &Path, f: &FeatureSeries) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["l".to_string()];
    header.extend((0..f.width()).map(|i| format!("z{i}")));
    w.write_record(&header)?;
    for (l, row) in f.rows().iter().enumerate() {
        let mut rec = vec![(l + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Targets and predictions of one sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub l: i64,
    pub y_target: f64,
    pub y_pred: f64,
    pub segment: String,
}

pub fn write_plot(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["l", "y_target", "y_pred", "segment"])?;
    for r in rows {
        w.write_record([r.l.to_string(), r.y_target.to_string(), r.y_pred.to_string(), r.segment.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plot(path: &Path) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<PlotRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if let Some(bad) = rows.iter().find(|r| r.segment.parse::<Segment>().is_err()) {
        return Err(QrcError::Parse {
            line: 0,
            msg: format!("unknown segment `{}`", bad.segment),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub task: String,
    pub problem: String,
    pub reservoir: String,
    pub nmse_train: f64,
    pub nmse_test: f64,
}

pub fn write_nmse(path: &Path, rows: &[NmseRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["task", "problem", "reservoir", "nmse_train", "nmse_test"])?;
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.problem.clone(),
            r.reservoir.clone(),
            r.nmse_train.to_string(),
            r.nmse_test.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_nmse(path: &Path) -> Result<Vec<NmseRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::Provenance;
    use crate::tasks::{build_dataset, make_task, Problem, TaskId, WASHOUT};

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = &build_dataset(&make_task(TaskId::IV, 0, 1).unwrap(), Problem::MultiStep, 1).unwrap()[0];
        let path = dir.path().join("d.csv");
        write_dataset(&path, ds).unwrap();
        let rows = read_dataset(&path).unwrap();
        assert_eq!(rows.len(), WASHOUT + 30);
        assert_eq!(rows[0].l, -49);
        assert_eq!(rows[WASHOUT].l, 1);
        assert_eq!(rows[WASHOUT].segment, "discard");
        for (r, (&u, &y)) in rows.iter().zip(ds.inputs.iter().zip(&ds.targets)) {
            assert_eq!((r.u, r.y), (u, y));
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("l,u,y,segment\n"));
    }

    #[test]
    fn plot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            PlotRow { l: 1, y_target: 0.1, y_pred: -0.3, segment: "discard".into() },
            PlotRow { l: 2, y_target: 1.0 / 3.0, y_pred: 2.5e-17, segment: "test".into() },
        ];
        let path = dir.path().join("p.csv");
        write_plot(&path, &rows).unwrap();
        assert_eq!(read_plot(&path).unwrap(), rows);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("l,y_target,y_pred,segment\n"));
    }

    #[test]
    fn features_and_nmse_files() {
        let dir = tempfile::tempdir().unwrap();
        let f = FeatureSeries::new(vec![vec![1.0, -0.5], vec![0.25, 0.0]], Provenance::Exact).unwrap();
        let path = dir.path().join("sub/f.csv");
        write_features(&path, &f).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "l,z0,z1\n1,1,-0.5\n2,0.25,0\n");
        let rows = vec![NmseRow {
            task: "I".into(),
            problem: "multi_step".into(),
            reservoir: "vigo5".into(),
            nmse_train: 0.1,
            nmse_test: 0.2,
        }];
        let path = dir.path().join("n.csv");
        write_nmse(&path, &rows).unwrap();
        assert_eq!(read_nmse(&path).unwrap(), rows);
    }
}
