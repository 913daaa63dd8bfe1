//! Dataset directories, feature CSVs and activity CSVs.
//!
//! A dataset is a directory of `.evs` files plus an optional `labels.csv`
//! with a `filename,label` header.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use snn_dlbp::event_io::{load_events, write_events, EventStream, SpikeRaster};
use snn_dlbp::power::ActivityCounts;

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub stream: EventStream,
    pub label: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    filename: String,
    label: usize,
}

/// Load a dataset directory, or a single event file as an unlabelled sample.
pub fn load_samples(path: &Path) -> anyhow::Result<Vec<Sample>> {
    if path.is_file() {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let stream = load_events(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(vec![Sample {
            name,
            stream,
            label: None,
        }]);
    }
    let mut names: Vec<String> = fs::read_dir(path)
        .with_context(|| format!("reading dataset directory {}", path.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".evs"))
        .collect();
    names.sort();
    let labels = read_labels(&path.join(LABELS_FILE))?;
    for name in labels.keys() {
        if !names.contains(name) {
            bail!("{} lists {name}, which is not in {}", LABELS_FILE, path.display());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let file = path.join(&name);
            let stream = load_events(&file).with_context(|| format!("reading {}", file.display()))?;
            Ok(Sample {
                label: labels.get(&name).copied(),
                name,
                stream,
            })
        })
        .collect()
}

fn read_labels(path: &Path) -> anyhow::Result<HashMap<String, usize>> {
    if !path.exists() {
        return Ok(HashMap::new());
    }
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for row in rdr.deserialize() {
        let row: LabelRow = row.with_context(|| format!("parsing {}", path.display()))?;
        out.insert(row.filename, row.label);
    }
    Ok(out)
}

pub fn write_dataset(dir: &Path, samples: &[Sample]) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in samples {
        let file = dir.join(&s.name);
        write_events(&file, &s.stream)?;
        written.push(file);
    }
    if samples.iter().any(|s| s.label.is_some()) {
        let file = dir.join(LABELS_FILE);
        let mut w = csv::Writer::from_path(&file)?;
        for s in samples {
            let label = s.label.with_context(|| format!("{} has no label", s.name))?;
            w.serialize(LabelRow {
                filename: s.name.clone(),
                label,
            })?;
        }
        w.flush()?;
        written.push(file);
    }
    Ok(written)
}

/// Presentation length: the explicit value, else the stream's span (at
/// least one step).
pub fn presentation(stream: &EventStream, duration: Option<f64>, dt: f64) -> f64 {
    duration.unwrap_or_else(|| stream.span_seconds().max(dt))
}

pub fn raster(sample: &Sample, duration: Option<f64>, dt: f64) -> anyhow::Result<SpikeRaster> {
    let d = presentation(&sample.stream, duration, dt);
    SpikeRaster::from_stream(&sample.stream, dt, d).with_context(|| format!("rasterizing {}", sample.name))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample: String,
    pub label: Option<usize>,
    pub values: Vec<f64>,
}

/// Header `sample,label,f0,f1,...`; the label cell is empty when unknown.
pub fn write_features(path: &Path, rows: &[FeatureRow]) -> anyhow::Result<()> {
    let width = rows.first().map_or(0, |r| r.values.len());
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["sample".to_string(), "label".to_string()];
    header.extend((0..width).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for r in rows {
        if r.values.len() != width {
            bail!("feature rows have different lengths");
        }
        let mut rec = vec![r.sample.clone(), r.label.map(|l| l.to_string()).unwrap_or_default()];
        rec.extend(r.values.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> anyhow::Result<Vec<FeatureRow>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("sample") || header.get(1) != Some("label") {
        bail!("{} does not start with sample,label columns", path.display());
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let label = match &rec[1] {
                "" => None,
                l => Some(l.parse().with_context(|| format!("row {}: bad label {l:?}", i + 1))?),
            };
            let values = rec
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("row {}: bad feature value", i + 1))?;
            Ok(FeatureRow {
                sample: rec[0].to_string(),
                label,
                values,
            })
        })
        .collect()
}

/// Features and labels; every row must be labelled.
pub fn labelled(rows: &[FeatureRow], what: &str) -> anyhow::Result<(Vec<Vec<f64>>, Vec<usize>)> {
    rows.iter()
        .map(|r| {
            let l = r.label.with_context(|| format!("{what}: sample {} has no label", r.sample))?;
            Ok((r.values.clone(), l))
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

pub fn write_activity(path: &Path, rows: &[ActivityCounts]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Sum of all rows: counts and durations add.
pub fn read_activity(path: &Path) -> anyhow::Result<ActivityCounts> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut total = ActivityCounts::default();
    let mut rows = 0;
    for row in rdr.deserialize() {
        let r: ActivityCounts = row.with_context(|| format!("parsing {}", path.display()))?;
        total.n_spikes += r.n_spikes;
        total.n_read += r.n_read;
        total.n_write += r.n_write;
        total.t_p += r.t_p;
        rows += 1;
    }
    if rows == 0 {
        bail!("{} has no activity rows", path.display());
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use snn_dlbp::event_io::Event;

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let rows = vec![
            FeatureRow {
                sample: "a.evs".into(),
                label: Some(1),
                values: vec![0.1, -2.5e-7, 3.0],
            },
            FeatureRow {
                sample: "b.evs".into(),
                label: None,
                values: vec![0.0, 1.0 / 3.0, f64::MIN_POSITIVE],
            },
        ];
        write_features(&path, &rows).unwrap();
        assert_eq!(read_features(&path).unwrap(), rows);
        assert!(labelled(&rows, "test").is_err());
        assert_eq!(labelled(&rows[..1], "test").unwrap().1, vec![1]);
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stream = EventStream::new(2, 2, vec![Event::new(10, 1, 0, 1), Event::new(30, 0, 1, -1)]).unwrap();
        let samples = vec![
            Sample {
                name: "s0.evs".into(),
                stream: stream.clone(),
                label: Some(0),
            },
            Sample {
                name: "s1.evs".into(),
                stream: EventStream::empty(2, 2),
                label: Some(1),
            },
        ];
        write_dataset(dir.path(), &samples).unwrap();
        let back = load_samples(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].stream, stream);
        assert_eq!((back[0].label, back[1].label), (Some(0), Some(1)));
        let single = load_samples(&dir.path().join("s0.evs")).unwrap();
        assert_eq!(single[0].label, None);
    }

    #[test]
    fn labels_must_name_existing_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LABELS_FILE), "filename,label\nmissing.evs,0\n").unwrap();
        assert!(load_samples(dir.path()).is_err());
    }

    #[test]
    fn activity_rows_add() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let a = ActivityCounts {
            n_spikes: 3,
            n_read: 12,
            n_write: 0,
            t_p: 1.0,
        };
        write_activity(&path, &[a, a]).unwrap();
        let sum = read_activity(&path).unwrap();
        assert_eq!((sum.n_spikes, sum.n_read, sum.t_p), (6, 24, 2.0));
    }
}
