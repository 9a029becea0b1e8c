//! Spatially varying scalar parameters (range or rate surfaces).

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Coord;

/// A scalar surface over the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    /// a + bx·x + by·y
    Linear {
        a: f64,
        bx: f64,
        by: f64,
    },
    /// exp(a + bx·x + by·y)
    LogLinear {
        a: f64,
        bx: f64,
        by: f64,
    },
    Grid(GriddedField),
}

impl ScalarField {
    pub fn eval(&self, s: &Coord) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Linear { a, bx, by } => a + bx * s.x + by * s.y,
            ScalarField::LogLinear { a, bx, by } => (a + bx * s.x + by * s.y).exp(),
            ScalarField::Grid(g) => g.eval(s),
        }
    }

    /// Evaluates at `s` and rejects non-positive or non-finite values.
    pub fn eval_positive(&self, s: &Coord) -> Result<f64> {
        let v = self.eval(s);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!(
                "field value {v} at ({}, {}) is not positive",
                s.x, s.y
            )))
        }
    }
}

/// Values on a rectilinear grid, bilinearly interpolated and clamped to
/// the edge values outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major: values[iy * xs.len() + ix].
    values: Vec<f64>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Index i with axis[i] <= t <= axis[i+1] and the weight of axis[i+1].
fn bracket(axis: &[f64], t: f64) -> (usize, f64) {
    if axis.len() == 1 || t <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if t >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&a| a <= t) - 1;
    (i, (t - axis[i]) / (axis[i + 1] - axis[i]))
}

impl GriddedField {
    /// Builds the field from scattered (x, y, value) triples that must cover
    /// every node of the grid spanned by their distinct x and y values once.
    pub fn from_points(points: &[(f64, f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("gridded field has no points".into()));
        }
        let xs = sorted_unique(points.iter().map(|p| p.0).collect());
        let ys = sorted_unique(points.iter().map(|p| p.1).collect());
        if xs.len() * ys.len() != points.len() {
            return Err(Error::Data(format!(
                "{} points do not form a full {}x{} grid",
                points.len(),
                xs.len(),
                ys.len()
            )));
        }
        let mut values = vec![f64::NAN; points.len()];
        for &(x, y, v) in points {
            let ix = xs.partition_point(|&a| a < x);
            let iy = ys.partition_point(|&a| a < y);
            let slot = &mut values[iy * xs.len() + ix];
            if !slot.is_nan() {
                return Err(Error::Data(format!("duplicate grid node ({x}, {y})")));
            }
            *slot = v;
        }
        Ok(Self { xs, ys, values })
    }

    /// Samples `f` at every node of the xs × ys grid.
    pub fn sample(xs: &[f64], ys: &[f64], f: impl Fn(&Coord) -> f64) -> Result<Self> {
        let pts: Vec<(f64, f64, f64)> = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| (x, y, f(&Coord::new(x, y))))
            .collect();
        Self::from_points(&pts)
    }

    pub fn eval(&self, s: &Coord) -> f64 {
        let nx = self.xs.len();
        let (ix, tx) = bracket(&self.xs, s.x);
        let (iy, ty) = bracket(&self.ys, s.y);
        let at = |i: usize, j: usize| self.values[j.min(self.ys.len() - 1) * nx + i.min(nx - 1)];
        let v00 = at(ix, iy);
        let v10 = at(ix + 1, iy);
        let v01 = at(ix, iy + 1);
        let v11 = at(ix + 1, iy + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Node triples in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.ys.iter().enumerate().flat_map(move |(j, &y)| {
            self.xs
                .iter()
                .enumerate()
                .map(move |(i, &x)| (x, y, self.values[j * self.xs.len() + i]))
        })
    }

    /// Reads a `x,y,value` CSV file.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_open_error(path, e))?;
        let headers = rdr.headers()?.clone();
        let want = ["x", "y", "value"];
        if headers.len() != 3 || headers.iter().zip(want).any(|(h, w)| h != w) {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "expected header x,y,value".into(),
            });
        }
        let mut pts = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.into(),
                        line,
                        msg: format!("invalid number '{}' in column {}", &rec[i], want[i]),
                    })
            };
            pts.push((parse(0)?, parse(1)?, parse(2)?));
        }
        Self::from_points(&pts)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
        w.write_record(["x", "y", "value"])?;
        for (x, y, v) in self.nodes() {
            w.write_record([x.to_string(), y.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub(crate) fn csv_open_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Data(format!("{}: {:?}", path.display(), other)),
    }
}
