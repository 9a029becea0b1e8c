use std::path::Path;

use chrono::NaiveDate;

use super::{ObservationPanel, Station, StationSet};
use crate::correlation::field::csv_open_error;
use crate::error::{Error, Result};

const MISSING: &str = "NA";
const DATE_FORMAT: &str = "%Y-%m-%d";

/// Which matrix of a panel to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelColumn {
    Values,
    Scores,
}

pub(crate) fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

/// Converts a csv error into a parse error carrying its line when possible.
pub(crate) fn record_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match (line, e.into_kind()) {
        (_, csv::ErrorKind::Io(source)) => Error::io(path, source),
        (Some(line), csv::ErrorKind::UnequalLengths { expected_len, len, .. }) => {
            parse_error(path, line, format!("expected {expected_len} fields, found {len}"))
        }
        (line, kind) => parse_error(path, line.unwrap_or(0), format!("{kind:?}")),
    }
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))
}

pub(crate) fn parse_number(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(path, line, format!("{what}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("{what}: non-finite value")));
    }
    Ok(v)
}

/// Reads `id,x,y` rows.
pub fn load_stations(path: impl AsRef<Path>) -> Result<StationSet> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| record_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "x", "y"] {
        return Err(parse_error(path, 1, "expected header id,x,y"));
    }
    let mut stations: Vec<Station> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| record_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty station id"));
        }
        if stations.iter().any(|s| s.id == id) {
            return Err(parse_error(path, line, format!("duplicate station id '{id}'")));
        }
        let x = parse_number(path, line, &rec[1], "x")?;
        let y = parse_number(path, line, &rec[2], "y")?;
        stations.push(Station {
            id,
            coord: crate::geometry::Coord::new(x, y),
            records: None,
        });
    }
    if stations.is_empty() {
        return Err(Error::Data(format!("{}: no stations", path.display())));
    }
    StationSet::new(stations)
}

pub fn write_stations(path: impl AsRef<Path>, stations: &StationSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    w.write_record(["id", "x", "y"])?;
    for s in stations.iter() {
        w.write_record([s.id.clone(), s.coord.x.to_string(), s.coord.y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `time,<id1>,<id2>,...` panel whose columns must all be stations
/// of `stations`. Cells equal to `NA` are missing.
pub fn load_panel(path: impl AsRef<Path>, stations: &StationSet) -> Result<ObservationPanel> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| record_error(path, e))?.clone();
    if headers.get(0) != Some("time") || headers.len() < 2 {
        return Err(parse_error(path, 1, "expected header time,<station ids>"));
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for id in headers.iter().skip(1) {
        let k = stations
            .index_of(id)
            .ok_or_else(|| parse_error(path, 1, format!("unknown station column '{id}'")))?;
        if ids.iter().any(|i: &String| i == id) {
            return Err(parse_error(path, 1, format!("station column '{id}' repeated")));
        }
        ids.push(id.to_string());
        coords.push(stations.get(k).coord);
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut last: Option<NaiveDate> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| record_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let t = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT)
            .map_err(|_| parse_error(path, line, format!("time '{}' is not YYYY-MM-DD", &rec[0])))?;
        if last.is_some_and(|p| t <= p) {
            return Err(parse_error(path, line, "time index not strictly increasing"));
        }
        last = Some(t);
        times.push(rec[0].to_string());
        for (j, field) in rec.iter().skip(1).enumerate() {
            values.push(if field == MISSING {
                None
            } else {
                Some(parse_number(path, line, field, &ids[j])?)
            });
        }
    }
    if times.is_empty() {
        return Err(Error::Data(format!("{}: panel has no rows", path.display())));
    }
    ObservationPanel::new(times, ids, coords, values)
}

/// Writes the panel in the input format. Missing cells are written as `NA`.
pub fn write_panel(path: impl AsRef<Path>, panel: &ObservationPanel, which: PanelColumn) -> Result<()> {
    let path = path.as_ref();
    let cells = match which {
        PanelColumn::Values => panel.values(),
        PanelColumn::Scores => panel
            .scores()
            .ok_or_else(|| Error::Data("panel has no scores to write".into()))?,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    let mut header = vec!["time".to_string()];
    header.extend(panel.ids().iter().cloned());
    w.write_record(&header)?;
    let d = panel.n_cols();
    let mut row = Vec::with_capacity(d + 1);
    for (i, t) in panel.times().iter().enumerate() {
        row.clear();
        row.push(t.clone());
        row.extend(cells[i * d..(i + 1) * d].iter().map(
            |v| {
                if v.is_nan() {
                    MISSING.to_string()
                } else {
                    v.to_string()
                }
            },
        ));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Consecutive daily dates starting at 2000-01-01, for synthetic panels.
pub fn synthetic_times(n: usize) -> Vec<String> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    start
        .iter_days()
        .take(n)
        .map(|d| d.format(DATE_FORMAT).to_string())
        .collect()
}
