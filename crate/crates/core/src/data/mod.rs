//! Station metadata, observation panels, rank transform and block bootstrap.

mod bootstrap;
pub(crate) mod io;
mod rank;

pub use bootstrap::{block_bootstrap, BlockPlan};
pub use io::synthetic_times;
pub use io::{load_panel, load_stations, write_panel, write_stations, PanelColumn};
pub use rank::{rank_transform, RankReport, MIN_RECORDS};

use crate::error::{Error, Result};
use crate::geometry::Coord;

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub coord: Coord,
    /// Non-missing rows in the panel, once known.
    pub records: Option<usize>,
}

/// Stations with unique ids and finite planar coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationSet {
    stations: Vec<Station>,
}

impl StationSet {
    pub fn new(stations: Vec<Station>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &stations {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Data(format!("duplicate station id '{}'", s.id)));
            }
            if !(s.coord.x.is_finite() && s.coord.y.is_finite()) {
                return Err(Error::Data(format!("station '{}' has non-finite coordinates", s.id)));
            }
        }
        Ok(Self { stations })
    }

    /// Stations named "s0", "s1", ... at the given coordinates.
    pub fn from_coords(coords: &[Coord]) -> Self {
        let stations = coords
            .iter()
            .enumerate()
            .map(|(i, &coord)| Station {
                id: format!("s{i}"),
                coord,
                records: None,
            })
            .collect();
        Self { stations }
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn get(&self, i: usize) -> &Station {
        &self.stations[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Station> {
        self.stations.iter()
    }

    pub fn coords(&self) -> Vec<Coord> {
        self.stations.iter().map(|s| s.coord).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    /// Copies the per-station record counts of `panel` into the set.
    pub fn set_record_counts(&mut self, panel: &ObservationPanel) {
        let counts = panel.record_counts();
        for s in &mut self.stations {
            s.records = panel.ids().iter().position(|id| *id == s.id).map(|j| counts[j]);
        }
    }
}

/// N time replicates by D stations, with a missingness mask and, after
/// [`rank_transform`], pseudo-uniform scores.
#[derive(Debug, Clone)]
pub struct ObservationPanel {
    times: Vec<String>,
    ids: Vec<String>,
    coords: Vec<Coord>,
    /// Row-major N x D; NaN where missing.
    values: Vec<f64>,
    /// Row-major N x D; NaN where missing or not yet transformed.
    scores: Option<Vec<f64>>,
}

fn same_cells(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y || (x.is_nan() && y.is_nan()))
}

/// Missing cells compare equal to each other.
impl PartialEq for ObservationPanel {
    fn eq(&self, other: &Self) -> bool {
        self.times == other.times
            && self.ids == other.ids
            && self.coords == other.coords
            && same_cells(&self.values, &other.values)
            && match (&self.scores, &other.scores) {
                (Some(a), Some(b)) => same_cells(a, b),
                (None, None) => true,
                _ => false,
            }
    }
}

impl ObservationPanel {
    /// Builds a panel from row-major values where `None` marks a missing cell.
    pub fn new(times: Vec<String>, ids: Vec<String>, coords: Vec<Coord>, values: Vec<Option<f64>>) -> Result<Self> {
        let d = ids.len();
        if coords.len() != d {
            return Err(Error::Data("one coordinate per column required".into()));
        }
        if values.len() != times.len() * d {
            return Err(Error::Data(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                times.len(),
                d
            )));
        }
        let values = values
            .into_iter()
            .map(|v| match v {
                Some(x) if x.is_finite() => Ok(x),
                Some(x) => Err(Error::Data(format!("non-finite value {x}"))),
                None => Ok(f64::NAN),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times,
            ids,
            coords,
            values,
            scores: None,
        })
    }

    /// Panel whose values are already uniform scores in (0, 1).
    pub fn from_scores(ids: Vec<String>, coords: Vec<Coord>, scores: Vec<f64>) -> Result<Self> {
        let d = ids.len();
        if d == 0 || !scores.len().is_multiple_of(d) {
            return Err(Error::Data("score matrix does not match the columns".into()));
        }
        if scores.iter().any(|&u| !(u.is_nan() || (u > 0.0 && u < 1.0))) {
            return Err(Error::Data("scores must lie strictly inside (0, 1)".into()));
        }
        let n = scores.len() / d;
        Ok(Self {
            times: (0..n).map(|i| i.to_string()).collect(),
            ids,
            coords,
            values: scores.clone(),
            scores: Some(scores),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn n_cols(&self) -> usize {
        self.ids.len()
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.n_cols() + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.values[i * self.n_cols() + j].is_nan()
    }

    /// Score of cell (i, j); `None` if missing or not transformed.
    pub fn score(&self, i: usize, j: usize) -> Option<f64> {
        let s = self.scores.as_ref()?[i * self.n_cols() + j];
        (!s.is_nan()).then_some(s)
    }

    pub fn has_scores(&self) -> bool {
        self.scores.is_some()
    }

    /// Row-major scores with NaN for missing cells.
    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn record_counts(&self) -> Vec<usize> {
        (0..self.n_cols())
            .map(|j| (0..self.n_rows()).filter(|&i| !self.is_missing(i, j)).count())
            .collect()
    }

    /// Panel restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let d = self.n_cols();
        let pick = |m: &[f64]| -> Vec<f64> {
            (0..self.n_rows())
                .flat_map(|i| cols.iter().map(move |&j| m[i * d + j]))
                .collect()
        };
        Self {
            times: self.times.clone(),
            ids: cols.iter().map(|&j| self.ids[j].clone()).collect(),
            coords: cols.iter().map(|&j| self.coords[j]).collect(),
            values: pick(&self.values),
            scores: self.scores.as_deref().map(pick),
        }
    }

    /// Panel made of the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let d = self.n_cols();
        let pick = |m: &[f64]| -> Vec<f64> {
            rows.iter()
                .flat_map(|&i| m[i * d..(i + 1) * d].iter().copied())
                .collect()
        };
        Self {
            times: rows.iter().map(|&i| self.times[i].clone()).collect(),
            ids: self.ids.clone(),
            coords: self.coords.clone(),
            values: pick(&self.values),
            scores: self.scores.as_deref().map(pick),
        }
    }

    pub(crate) fn set_scores(&mut self, scores: Vec<f64>) {
        debug_assert_eq!(scores.len(), self.values.len());
        self.scores = Some(scores);
    }
}
