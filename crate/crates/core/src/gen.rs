//! Seeded point-set generators.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Clustered,
    Grid,
    Line,
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "clustered" => Ok(Distribution::Clustered),
            "grid" => Ok(Distribution::Grid),
            "line" => Ok(Distribution::Line),
            other => Err(Error::InvalidConfig(format!("unknown distribution '{other}'"))),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Uniform => "uniform",
            Distribution::Clustered => "clustered",
            Distribution::Grid => "grid",
            Distribution::Line => "line",
        })
    }
}

/// Standard normal sample by Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// `n` distinct points in dimension `dim` (`line` is always 1D with strictly
/// increasing coordinates). Duplicates are rejected and redrawn.
pub fn generate(n: usize, dim: usize, dist: Distribution, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match dist {
        Distribution::Line => {
            let mut xs: Vec<f64> = Vec::with_capacity(n);
            let mut seen = HashSet::new();
            while xs.len() < n {
                let x: f64 = rng.gen();
                if seen.insert(x.to_bits()) {
                    xs.push(x);
                }
            }
            xs.sort_by(f64::total_cmp);
            xs.into_iter().map(|x| vec![x]).collect()
        }
        Distribution::Grid => {
            let side = (1..).find(|s: &usize| s.pow(dim as u32) >= n).expect("some side fits");
            (0..n)
                .map(|k| {
                    let mut rest = k;
                    (0..dim)
                        .map(|_| {
                            let c = rest % side;
                            rest /= side;
                            c as f64
                        })
                        .collect()
                })
                .collect()
        }
        Distribution::Uniform | Distribution::Clustered => {
            let clusters = ((n as f64).sqrt().ceil() as usize).max(1);
            let centers: Vec<Vec<f64>> = (0..clusters).map(|_| (0..dim).map(|_| rng.gen()).collect()).collect();
            let spread = 0.05 / (clusters as f64).sqrt();
            let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut seen = HashSet::new();
            while out.len() < n {
                let p: Vec<f64> = if dist == Distribution::Uniform {
                    (0..dim).map(|_| rng.gen()).collect()
                } else {
                    let c = &centers[rng.gen_range(0..clusters)];
                    c.iter().map(|&x| x + spread * gaussian(&mut rng)).collect()
                };
                let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
                if seen.insert(key) {
                    out.push(p);
                }
            }
            out
        }
    };
    Ok(points)
}

pub fn generate_metric(n: usize, dim: usize, dist: Distribution, seed: u64) -> Result<Metric> {
    let pts = generate(n, dim, dist, seed)?;
    let d = pts[0].len();
    Metric::from_coords(d, pts.into_iter().flatten().collect())
}

/// Coordinate text with shortest round-trip formatting, one point per line.
pub fn to_text(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for p in points {
        let line: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
