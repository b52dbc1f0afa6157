//! Finite metrics: point ingestion, distance evaluation, canonical scaling and
//! ball queries.
//!
//! A [`Metric`] is either a set of coordinate vectors under the Euclidean
//! distance or an explicit symmetric distance matrix. Construction code works
//! on normalized metrics, where the minimum pairwise distance is exactly 64.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Minimum pairwise distance after [`Metric::normalize`].
pub const MIN_DISTANCE: f64 = 64.0;

/// Index of a point in `0..n`.
pub type PointId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Row-major coordinates, `dim` values per point.
    Coords { dim: usize, data: Vec<f64> },
    /// Row-major `n x n` distance matrix.
    Matrix { data: Vec<f64> },
}

/// Input file layout accepted by [`load_points`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Coords,
    Matrix,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coords" | "coordinates" => Ok(InputFormat::Coords),
            "matrix" => Ok(InputFormat::Matrix),
            other => Err(Error::InvalidConfig(format!("unknown input format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    n: usize,
    geometry: Geometry,
    scale_factor: f64,
    /// Dimension used for packing diagnostics. Coordinate inputs use their
    /// coordinate dimension; matrix inputs carry whatever the caller set.
    doubling_dim: Option<f64>,
}

impl Metric {
    pub fn from_coords(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DegenerateMetric("zero-dimensional coordinates".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DegenerateMetric(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::DegenerateMetric(format!("non-finite coordinate {bad}")));
        }
        let n = data.len() / dim;
        Ok(Metric {
            n,
            geometry: Geometry::Coords { dim, data },
            scale_factor: 1.0,
            doubling_dim: Some(dim as f64),
        })
    }

    /// Builds a metric from 2D points.
    pub fn from_points_2d(points: &[(f64, f64)]) -> Result<Self> {
        let data = points.iter().flat_map(|&(x, y)| [x, y]).collect();
        Self::from_coords(2, data)
    }

    /// Builds a metric from points on a line.
    pub fn from_line(xs: &[f64]) -> Result<Self> {
        Self::from_coords(1, xs.to_vec())
    }

    /// Builds a metric from a full distance matrix. The matrix is checked for
    /// symmetry, non-negativity and (probabilistically for large `n`) the
    /// triangle inequality.
    pub fn from_matrix(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DegenerateMetric(format!(
                "matrix has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        for r in 0..n {
            for c in 0..n {
                let v = data[r * n + c];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeDistance {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
                let w = data[c * n + r];
                if v != w {
                    return Err(Error::Asymmetric {
                        row: r,
                        col: c,
                        a: v,
                        b: w,
                    });
                }
            }
            if data[r * n + r] != 0.0 {
                return Err(Error::DegenerateMetric(format!("nonzero diagonal at {r}")));
            }
        }
        let m = Metric {
            n,
            geometry: Geometry::Matrix { data },
            scale_factor: 1.0,
            doubling_dim: None,
        };
        m.check_triangle_inequality()?;
        Ok(m)
    }

    pub fn with_doubling_dim(mut self, d: f64) -> Self {
        self.doubling_dim = Some(d);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    pub fn doubling_dim(&self) -> Option<f64> {
        self.doubling_dim
    }

    pub fn points(&self) -> std::ops::Range<PointId> {
        0..self.n
    }

    /// Scaled distance between two points, checking ids.
    pub fn distance(&self, u: PointId, v: PointId) -> Result<f64> {
        if u >= self.n {
            return Err(Error::InvalidPoint(u));
        }
        if v >= self.n {
            return Err(Error::InvalidPoint(v));
        }
        Ok(self.dist(u, v))
    }

    /// Scaled distance without bounds checking beyond slice indexing.
    #[inline]
    pub fn dist(&self, u: PointId, v: PointId) -> f64 {
        if u == v {
            return 0.0;
        }
        self.raw(u, v) * self.scale_factor
    }

    #[inline]
    fn raw(&self, u: PointId, v: PointId) -> f64 {
        match &self.geometry {
            Geometry::Coords { dim, data } => {
                let a = &data[u * dim..(u + 1) * dim];
                let b = &data[v * dim..(v + 1) * dim];
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            Geometry::Matrix { data } => data[u * self.n + v],
        }
    }

    fn min_max_raw(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for u in 0..self.n {
            for v in u + 1..self.n {
                let d = self.raw(u, v);
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }

    /// Rescales so that the minimum pairwise distance is 64.
    pub fn normalize(mut self) -> Result<Self> {
        if self.n < 2 {
            // Nothing to scale; a single point is trivially normalized.
            if self.n == 0 {
                return Err(Error::TooFewPoints { needed: 1, got: 0 });
            }
            self.scale_factor = 1.0;
            return Ok(self);
        }
        let (lo, _) = self.min_max_raw();
        if lo <= 0.0 {
            return Err(Error::DegenerateMetric("duplicate points".into()));
        }
        self.scale_factor = if lo == MIN_DISTANCE { 1.0 } else { MIN_DISTANCE / lo };
        Ok(self)
    }

    /// Minimum and maximum scaled pairwise distance.
    pub fn extent(&self) -> Result<(f64, f64)> {
        if self.n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: self.n });
        }
        let (lo, hi) = self.min_max_raw();
        Ok((lo * self.scale_factor, hi * self.scale_factor))
    }

    /// Ratio of the maximum to the minimum pairwise distance.
    pub fn spread(&self) -> Result<f64> {
        let (lo, hi) = self.extent()?;
        Ok(hi / lo)
    }

    /// Largest pairwise distance (0 for a single point).
    pub fn diameter(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.min_max_raw().1 * self.scale_factor
        }
    }

    /// Closed ball around `center`, ascending point ids.
    pub fn ball(&self, center: PointId, radius: f64) -> Vec<PointId> {
        (0..self.n).filter(|&v| self.dist(center, v) <= radius).collect()
    }

    fn check_triangle_inequality(&self) -> Result<()> {
        let n = self.n;
        let slack = |a: f64| a * 1e-12;
        let check = |a: usize, b: usize, c: usize| -> Result<()> {
            let ab = self.raw(a, b);
            let bc = self.raw(b, c);
            let ac = self.raw(a, c);
            if ac > ab + bc + slack(ac) {
                return Err(Error::TriangleViolation(a, b, c));
            }
            Ok(())
        };
        if n <= 64 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7419_c0de);
            for _ in 0..50_000 {
                check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.geometry {
            Geometry::Coords { dim, .. } => write!(f, "{} points in R^{}", self.n, dim),
            Geometry::Matrix { .. } => write!(f, "{}-point distance matrix", self.n),
        }
    }
}

/// Reads a metric file. The result is validated but not normalized.
pub fn load_points(path: impl AsRef<Path>, format: InputFormat) -> Result<Metric> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_points(&text, format, path)
}

/// Parses metric text; `origin` is only used in error messages.
pub fn parse_points(text: &str, format: InputFormat, origin: &Path) -> Result<Metric> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let vals = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(idx + 1, format!("not a number: {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((idx + 1, vals));
    }
    if rows.is_empty() {
        return Err(parse_err(0, "empty input".into()));
    }
    match format {
        InputFormat::Coords => {
            let dim = rows[0].1.len();
            let mut data = Vec::with_capacity(dim * rows.len());
            for (line, vals) in &rows {
                if vals.len() != dim {
                    return Err(parse_err(
                        *line,
                        format!("expected {dim} coordinates, found {}", vals.len()),
                    ));
                }
                data.extend_from_slice(vals);
            }
            Metric::from_coords(dim, data)
        }
        InputFormat::Matrix => {
            let (hline, header) = &rows[0];
            if header.len() != 1 || header[0] < 0.0 || header[0].fract() != 0.0 {
                return Err(parse_err(*hline, "first line must be the point count".into()));
            }
            let n = header[0] as usize;
            if rows.len() - 1 != n {
                return Err(parse_err(
                    *hline,
                    format!("header says {n} rows, found {}", rows.len() - 1),
                ));
            }
            let mut data = Vec::with_capacity(n * n);
            for (line, vals) in &rows[1..] {
                if vals.len() != n {
                    return Err(parse_err(*line, format!("expected {n} entries, found {}", vals.len())));
                }
                data.extend_from_slice(vals);
            }
            Metric::from_matrix(n, data)
        }
    }
}

/// Writes coordinates in the text format read by [`load_points`].
pub fn format_coords(m: &Metric) -> Option<String> {
    let Geometry::Coords { dim, data } = m.geometry() else {
        return None;
    };
    let mut out = String::with_capacity(data.len() * 12);
    for row in data.chunks(*dim) {
        let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Some(out)
}
