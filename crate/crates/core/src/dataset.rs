//! Flat-CSV dataset loading and emission.
//!
//! A dataset is one CSV with the columns `class,entity,parameter,scenario,
//! time,value`. Each row assigns one parameter of one entity in one scenario
//! layer. Relationship entities join their parts with `|` (`unit|node` or
//! `unit|node1|node2`), group membership rows use `group|member`, and
//! user-constraint coefficient rows use `constraint|unit`.
//!
//! Time-varying values come in two forms: an inline series (the same
//! class/entity/parameter/scenario repeated with distinct `time` stamps) or a
//! reference `ts:<file>` to an hourly `time,value` CSV in the timeseries
//! directory. Loading resolves references; emission writes them back as
//! references, so a load → emit → load cycle reproduces the dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use crate::graph::{ClassTag, EntityGraph, ParamKey};
use crate::time::{format_timestamp, parse_timestamp};
use crate::value::{ParameterValue, TimeSeries};
use crate::CoreError;

const HEADER: [&str; 6] = ["class", "entity", "parameter", "scenario", "time", "value"];

/// Loads a dataset CSV, resolving `ts:` references against `ts_dir`.
pub fn load_dataset(model: &Path, ts_dir: &Path) -> Result<EntityGraph, CoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(model)
        .map_err(|e| CoreError::Parse(format!("cannot read {}: {e}", model.display())))?;
    {
        let got = reader
            .headers()
            .map_err(|e| CoreError::Parse(format!("{}: {e}", model.display())))?;
        if got.iter().collect::<Vec<_>>() != HEADER {
            return Err(CoreError::Dataset {
                row: 1,
                message: format!("header must be {}", HEADER.join(",")),
            });
        }
    }

    let mut graph = EntityGraph::default();
    // Scalar cells and inline series points, collected per layer and key so
    // multi-row series can be assembled after the full pass.
    let mut scalars: BTreeMap<(String, ParamKey), (usize, String)> = BTreeMap::new();
    let mut points: BTreeMap<(String, ParamKey), Vec<(usize, NaiveDateTime, f64)>> =
        BTreeMap::new();
    let mut series_cache: BTreeMap<String, TimeSeries> = BTreeMap::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record.map_err(|e| CoreError::Dataset { row, message: e.to_string() })?;
        if record.len() != 6 {
            return Err(CoreError::Dataset {
                row,
                message: format!("expected 6 columns, found {}", record.len()),
            });
        }
        let class = ClassTag::parse(&record[0])
            .map_err(|e| CoreError::Dataset { row, message: e.to_string() })?;
        let entity = record[1].trim().to_string();
        let param = record[2].trim().to_string();
        let layer = record[3].trim().to_string();
        let time = record[4].trim().to_string();
        let value = record[5].trim().to_string();
        if entity.is_empty() || param.is_empty() || layer.is_empty() || value.is_empty() {
            return Err(CoreError::Dataset {
                row,
                message: "entity, parameter, scenario, and value must be non-empty".into(),
            });
        }

        graph
            .declare(class, &entity)
            .map_err(|e| CoreError::Dataset { row, message: e.to_string() })?;

        let key = (layer, ParamKey::new(class, entity, param));
        if time.is_empty() {
            if let Some((first, _)) = scalars.get(&key) {
                return Err(CoreError::Dataset {
                    row,
                    message: format!(
                        "duplicate assignment of {}/{}/{} in scenario {} (first at row {first})",
                        key.1.class, key.1.entity, key.1.param, key.0
                    ),
                });
            }
            if points.contains_key(&key) {
                return Err(CoreError::Dataset {
                    row,
                    message: "mix of timed and untimed rows for one parameter".into(),
                });
            }
            scalars.insert(key, (row, value));
        } else {
            if scalars.contains_key(&key) {
                return Err(CoreError::Dataset {
                    row,
                    message: "mix of timed and untimed rows for one parameter".into(),
                });
            }
            let t = parse_timestamp(&time)
                .map_err(|e| CoreError::Dataset { row, message: e.to_string() })?;
            let v: f64 = value.parse().map_err(|_| CoreError::Dataset {
                row,
                message: format!("timed rows need a numeric value, found {value:?}"),
            })?;
            points.entry(key).or_default().push((row, t, v));
        }
    }

    for ((layer, key), (row, raw)) in scalars {
        let value = parse_cell(&raw, ts_dir, &mut series_cache)
            .map_err(|e| CoreError::Dataset { row, message: e.to_string() })?;
        graph.layers.entry(layer).or_default().insert(key, value);
    }
    for ((layer, key), mut pts) in points {
        pts.sort_by_key(|&(_, t, _)| t);
        for w in pts.windows(2) {
            if w[0].1 == w[1].1 {
                return Err(CoreError::Dataset {
                    row: w[1].0,
                    message: format!(
                        "duplicate timestamp {} for {}/{}/{}",
                        format_timestamp(w[1].1),
                        key.class,
                        key.entity,
                        key.param
                    ),
                });
            }
        }
        let series = TimeSeries::new(pts.into_iter().map(|(_, t, v)| (t, v)).collect())
            .map_err(|e| CoreError::Parse(e.to_string()))?;
        graph
            .layers
            .entry(layer)
            .or_default()
            .insert(key, ParameterValue::Series(series));
    }
    Ok(graph)
}

/// Parses one value cell: flag, number, `ts:` reference, or free text.
fn parse_cell(
    raw: &str,
    ts_dir: &Path,
    cache: &mut BTreeMap<String, TimeSeries>,
) -> Result<ParameterValue, CoreError> {
    if raw == "true" {
        return Ok(ParameterValue::Flag(true));
    }
    if raw == "false" {
        return Ok(ParameterValue::Flag(false));
    }
    if let Some(file) = raw.strip_prefix("ts:") {
        if file.is_empty() || file.contains("..") || Path::new(file).is_absolute() {
            return Err(CoreError::Parse(format!(
                "series reference {raw:?} must be a plain file name in the timeseries directory"
            )));
        }
        if let Some(hit) = cache.get(file) {
            return Ok(ParameterValue::Series(hit.clone()));
        }
        let mut series = load_series(&ts_dir.join(file))?;
        series.source = Some(file.to_string());
        cache.insert(file.to_string(), series.clone());
        return Ok(ParameterValue::Series(series));
    }
    if let Ok(v) = raw.parse::<f64>() {
        if v.is_finite() {
            return Ok(ParameterValue::Number(v));
        }
        return Err(CoreError::Parse(format!("non-finite number {raw:?}")));
    }
    Ok(ParameterValue::Text(raw.to_string()))
}

/// Reads an hourly series file: a `time,value` CSV with ISO timestamps.
pub fn load_series(path: &Path) -> Result<TimeSeries, CoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CoreError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CoreError::Parse(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if record.len() != 2 {
            return Err(CoreError::Parse(format!(
                "{} row {}: expected time,value",
                path.display(),
                i + 2
            )));
        }
        let t = parse_timestamp(&record[0])?;
        let v: f64 = record[1].trim().parse().map_err(|_| {
            CoreError::Parse(format!("{} row {}: bad value {:?}", path.display(), i + 2, &record[1]))
        })?;
        points.push((t, v));
    }
    TimeSeries::new(points)
        .map_err(|e| CoreError::Parse(format!("{}: {e}", path.display())))
}

/// Writes an hourly series file the way [`load_series`] reads it.
pub fn write_series(path: &Path, series: &TimeSeries) -> Result<(), CoreError> {
    let mut out = String::from("time,value\n");
    for &(t, v) in series.points() {
        out.push_str(&format!("{},{v}\n", format_timestamp(t)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Emits the dataset as CSV in canonical order (class, entity, parameter,
/// scenario, time). Series loaded from a `ts:` reference are written back as
/// the reference; emission never rewrites the series files themselves.
pub fn write_dataset(graph: &EntityGraph, model: &Path) -> Result<(), CoreError> {
    let mut rows: Vec<[String; 6]> = Vec::new();
    for (layer, entries) in &graph.layers {
        for (key, value) in entries {
            let base = |time: String, value: String| {
                [
                    key.class.as_str().to_string(),
                    key.entity.clone(),
                    key.param.clone(),
                    layer.clone(),
                    time,
                    value,
                ]
            };
            match value {
                ParameterValue::Number(v) => rows.push(base(String::new(), format!("{v}"))),
                ParameterValue::Flag(b) => rows.push(base(String::new(), b.to_string())),
                ParameterValue::Text(s) => rows.push(base(String::new(), s.clone())),
                ParameterValue::Series(s) => match &s.source {
                    Some(file) => rows.push(base(String::new(), format!("ts:{file}"))),
                    None => {
                        for &(t, v) in s.points() {
                            rows.push(base(format_timestamp(t), format!("{v}")));
                        }
                    }
                },
            }
        }
    }
    rows.sort();

    let mut writer = csv::Writer::from_path(model)
        .map_err(|e| CoreError::Parse(format!("cannot write {}: {e}", model.display())))?;
    writer
        .write_record(HEADER)
        .and_then(|_| {
            for row in &rows {
                writer.write_record(row)?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CoreError::Parse(format!("{}: {e}", model.display())))?;
    Ok(())
}

/// Returns a graph whose rows come from `path`, resolving series next to it
/// in `ts/` when no explicit directory is given. Convenience for callers that
/// keep the conventional `data/gls.csv` + `data/ts/` layout.
pub fn load_dataset_default_ts(model: &Path) -> Result<EntityGraph, CoreError> {
    let ts_dir: PathBuf = model
        .parent()
        .map(|p| p.join("ts"))
        .unwrap_or_else(|| PathBuf::from("ts"));
    load_dataset(model, &ts_dir)
}
