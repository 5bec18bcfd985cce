//! Reading and writing point clouds.
//!
//! CSV files carry one point per row with header `id,x1,...,xd`; JSON files
//! carry an explicit distance matrix as `{"dist": [[...], ...]}`.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metric::{PointCloud, Topology};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Coordinates from CSV; rows may come in any id order but ids must be
/// exactly `0..n`.
pub fn read_cloud_csv(path: &Path, topology: Topology) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_cloud_csv(&text, topology)
}

pub fn parse_cloud_csv(text: &str, topology: Topology) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.get(0) != Some("id") || headers.len() < 2 {
        return Err(Error::Parse("expected a header `id,x1,...,xd`".into()));
    }
    let dim = headers.len() - 1;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let bad = |what: &str| Error::Parse(format!("row {}: {what}", line + 2));
        let id: usize = record.get(0).unwrap_or("").parse().map_err(|_| bad("id is not a nonnegative integer"))?;
        let xs = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad("coordinate is not a number")))
            .collect::<Result<Vec<_>>>()?;
        if xs.len() != dim {
            return Err(bad("wrong number of coordinates"));
        }
        rows.push((id, xs));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(Error::Parse("ids must be exactly 0..n".into()));
    }
    PointCloud::from_coordinates(dim, rows.into_iter().flat_map(|r| r.1).collect(), topology)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistFile {
    dist: Vec<Vec<f64>>,
}

pub fn read_cloud_json(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: DistFile = serde_json::from_str(&text)?;
    PointCloud::from_matrix(&file.dist)
}

/// Dispatches on the extension: `.json` is a distance matrix, anything
/// else is coordinate CSV.
pub fn read_cloud(path: &Path, topology: Topology) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_cloud_json(path),
        _ => read_cloud_csv(path, topology),
    }
}

/// CSV `id,x1,...,xd`; `None` for matrix-backed clouds.
pub fn cloud_to_csv(cloud: &PointCloud) -> Option<String> {
    let dim = cloud.dim()?;
    let mut out = String::from("id");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for p in 0..cloud.len() {
        out.push_str(&p.to_string());
        for v in cloud.coordinates(p)? {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let cloud = PointCloud::euclidean(&[vec![0.0, 1.0], vec![0.5, 0.25]]).unwrap();
        let text = cloud_to_csv(&cloud).unwrap();
        assert!(text.starts_with("id,x1,x2\n"));
        let back = parse_cloud_csv(&text, Topology::General).unwrap();
        assert_eq!(back.dist(0, 1), cloud.dist(0, 1));
    }

    #[test]
    fn csv_rejects_gaps() {
        assert!(parse_cloud_csv("id,x1\n0,0.1\n2,0.3\n", Topology::Line).is_err());
        assert!(parse_cloud_csv("id,x1\n0,abc\n", Topology::Line).is_err());
        assert!(parse_cloud_csv("x,y\n0,1\n", Topology::Line).is_err());
        let c = parse_cloud_csv("id,x1\n1,0.5\n0,0.25\n", Topology::Line).unwrap();
        assert_eq!(c.dist(0, 1), 0.25);
    }
}
