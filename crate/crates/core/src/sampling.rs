//! Space-time domain and the point sets the loss is evaluated on.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{PinnError, Result};
use crate::rng::StreamRng;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeDomain {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl SpaceTimeDomain {
    pub fn new(x_min: f64, x_max: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let d = Self {
            x_min,
            x_max,
            t_min,
            t_max,
        };
        d.validate()?;
        Ok(d)
    }

    /// `[-1.5, 1.5] × [0, 2]`.
    pub fn tutorial() -> Self {
        Self {
            x_min: -1.5,
            x_max: 1.5,
            t_min: 0.0,
            t_max: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.t_min, self.t_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PinnError::Domain("bounds must be finite".into()));
        }
        if self.x_min >= self.x_max {
            return Err(PinnError::Domain(format!(
                "x_min ({}) must be below x_max ({})",
                self.x_min, self.x_max
            )));
        }
        if self.t_min > self.t_max {
            return Err(PinnError::Domain(format!(
                "t_min ({}) must not exceed t_max ({})",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.t >= self.t_min && p.t <= self.t_max
    }

    pub fn is_wall(&self, x: f64) -> bool {
        x == self.x_min || x == self.x_max
    }

    fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    fn duration(&self) -> f64 {
        self.t_max - self.t_min
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub t: f64,
    pub u: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    UniformRandom,
    EquispacedGrid,
}

/// Residual, wall, initial and observation point sets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub boundary: Vec<Point>,
    pub initial: Vec<Point>,
    pub observations: Vec<Observation>,
}

// Stream ids keep the point sets independent under one seed.
const INTERIOR_STREAM: u64 = 1;
const BOUNDARY_STREAM: u64 = 2;
const INITIAL_STREAM: u64 = 3;

fn check_count(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        Err(PinnError::Sampling(format!("{what}: n must be at least 1")))
    } else {
        Ok(())
    }
}

/// Offset `(i + 1) / (n + 1)` of the way across `[lo, hi]`, so grid points
/// never land on the edges.
fn inner_fraction(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * ((i + 1) as f64 / (n + 1) as f64)
}

/// Interior residual points: `x` strictly inside `(x_min, x_max)`, `t` in
/// `(t_min, t_max]`.
pub fn sample_interior(
    domain: &SpaceTimeDomain,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<Point>> {
    check_count(n, "interior")?;
    domain.validate()?;
    let points = match mode {
        SamplingMode::UniformRandom => {
            let mut rng = StreamRng::with_stream(seed, INTERIOR_STREAM);
            let mut pts = Vec::with_capacity(n);
            while pts.len() < n {
                let x = domain.x_min + rng.next_open01() * domain.width();
                let t = if domain.duration() == 0.0 {
                    domain.t_max
                } else {
                    (domain.t_min + rng.next_open01() * domain.duration()).min(domain.t_max)
                };
                // Rounding can push a draw onto an edge; redraw those.
                if x > domain.x_min
                    && x < domain.x_max
                    && (t > domain.t_min || domain.duration() == 0.0)
                {
                    pts.push(Point::new(x, t));
                }
            }
            pts
        }
        SamplingMode::EquispacedGrid => {
            let n_x = (n as f64).sqrt().ceil() as usize;
            let n_t = n.div_ceil(n_x);
            (0..n_t)
                .flat_map(|j| (0..n_x).map(move |i| (i, j)))
                .take(n)
                .map(|(i, j)| {
                    Point::new(
                        inner_fraction(domain.x_min, domain.x_max, i, n_x),
                        inner_fraction(domain.t_min, domain.t_max, j, n_t),
                    )
                })
                .collect()
        }
    };
    Ok(points)
}

/// Wall points alternating between `x_min` and `x_max`.
pub fn sample_boundary(
    domain: &SpaceTimeDomain,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<Point>> {
    check_count(n, "boundary")?;
    domain.validate()?;
    let mut rng = StreamRng::with_stream(seed, BOUNDARY_STREAM);
    let per_wall = [n.div_ceil(2), n / 2];
    Ok((0..n)
        .map(|k| {
            let wall = k % 2;
            let x = if wall == 0 {
                domain.x_min
            } else {
                domain.x_max
            };
            let t = match mode {
                SamplingMode::UniformRandom => rng.uniform(domain.t_min, domain.t_max),
                SamplingMode::EquispacedGrid => {
                    inner_fraction(domain.t_min, domain.t_max, k / 2, per_wall[wall])
                }
            };
            Point::new(x, t)
        })
        .collect())
}

/// Initial-condition points at `t = t_min`.
pub fn sample_initial(
    domain: &SpaceTimeDomain,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<Point>> {
    check_count(n, "initial")?;
    domain.validate()?;
    let mut rng = StreamRng::with_stream(seed, INITIAL_STREAM);
    Ok((0..n)
        .map(|i| {
            let x = match mode {
                SamplingMode::UniformRandom => rng.uniform(domain.x_min, domain.x_max),
                SamplingMode::EquispacedGrid => inner_fraction(domain.x_min, domain.x_max, i, n),
            };
            Point::new(x, domain.t_min)
        })
        .collect())
}

/// `k`-th of `n` equispaced coordinates covering `[lo, hi]` including both
/// ends; a single coordinate sits at the midpoint.
fn closed_grid(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if n == 1 {
        0.5 * (lo + hi)
    } else if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (k as f64 / (n - 1) as f64)
    }
}

/// `n_x × n_t` equispaced observations (corners included) of `truth`.
pub fn make_observation_grid(
    domain: &SpaceTimeDomain,
    n_x: usize,
    n_t: usize,
    truth: impl Fn(f64, f64) -> f64,
) -> Result<Vec<Observation>> {
    if n_x == 0 || n_t == 0 {
        return Err(PinnError::Sampling(format!(
            "observation grid must be at least 1x1, got {n_x}x{n_t}"
        )));
    }
    domain.validate()?;
    let mut obs = Vec::with_capacity(n_x * n_t);
    for j in 0..n_t {
        let t = closed_grid(domain.t_min, domain.t_max, j, n_t);
        for i in 0..n_x {
            let x = closed_grid(domain.x_min, domain.x_max, i, n_x);
            obs.push(Observation {
                x,
                t,
                u: truth(x, t),
            });
        }
    }
    Ok(obs)
}

/// `n` equispaced points across `[x_min, x_max]` (ends included) at `t`.
pub fn line_grid(domain: &SpaceTimeDomain, n: usize, t: f64) -> Vec<Point> {
    (0..n)
        .map(|i| Point::new(closed_grid(domain.x_min, domain.x_max, i, n), t))
        .collect()
}

/// Writes points as CSV with header `x,t`.
pub fn write_points_csv<W: Write>(out: W, points: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "t"])?;
    for p in points {
        w.write_record([p.x.to_string(), p.t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes observations as CSV with header `x,t,u`.
pub fn write_observations_csv<W: Write>(out: W, obs: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "t", "u"])?;
    for o in obs {
        w.write_record([o.x.to_string(), o.t.to_string(), o.u.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
