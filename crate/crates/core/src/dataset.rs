//! Labelled point sets for binary linear classification through the origin,
//! the synthetic families used in the benchmarks, and CSV ingestion.
//!
//! Synthetic generators draw from [`ChaCha8Rng`] seeded with
//! `seed_from_u64(seed)`. ChaCha8 is a fixed, platform-independent stream
//! cipher, so a `(spec, seed)` pair produces bit-identical datasets on every
//! platform.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MarginError, Result};

/// Slack allowed on the unit-norm bound for points built from
/// trigonometric expressions.
pub const NORM_SLACK: f64 = 1e-12;

/// Labelled points `(x_i, y_i)` with `y_i = ±1` and `|x_i| <= 1`.
///
/// The label-signed points `z_i = y_i x_i` are precomputed since every loss
/// and margin evaluation works with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Vec<i8>,
    signed: Array2<f64>,
}

impl Dataset {
    /// Builds a dataset, rejecting points outside the unit ball.
    pub fn new(points: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        let ds = Self::unchecked_norms(points, labels)?;
        let offending = ds.rows_above_unit_norm();
        if !offending.is_empty() {
            return Err(MarginError::NormViolation {
                rows: offending,
                max_norm: ds.max_norm(),
            });
        }
        Ok(ds)
    }

    /// Builds a dataset and, when any point lies outside the unit ball,
    /// divides every point by the largest norm.
    pub fn new_rescaled(points: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        let ds = Self::unchecked_norms(points, labels)?;
        let max = ds.max_norm();
        if max <= 1.0 + NORM_SLACK {
            return Ok(ds);
        }
        Self::new(ds.points / max, ds.labels)
    }

    fn unchecked_norms(points: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(MarginError::Domain(format!(
                "dataset needs n >= 1 and d >= 1, got n = {n}, d = {d}"
            )));
        }
        if labels.len() != n {
            return Err(MarginError::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(MarginError::Domain(format!(
                "label {} at index {i} is not +1 or -1",
                labels[i]
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(MarginError::Domain("non-finite feature value".into()));
        }
        let mut signed = points.clone();
        for (mut row, &y) in signed.rows_mut().into_iter().zip(&labels) {
            if y < 0 {
                row.mapv_inplace(|v| -v);
            }
        }
        Ok(Self {
            points,
            labels,
            signed,
        })
    }

    fn rows_above_unit_norm(&self) -> Vec<usize> {
        self.points
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.dot(r).sqrt() > 1.0 + NORM_SLACK)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// `z_i = y_i x_i`.
    pub fn signed_point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.signed.row(i)
    }

    /// All `z_i` as rows of an `n x d` matrix.
    pub fn signed_points(&self) -> ArrayView2<'_, f64> {
        self.signed.view()
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }

    /// Mean of `z_i` over the given indices.
    pub fn signed_mean(&self, indices: &[usize]) -> Array1<f64> {
        let mut acc = Array1::zeros(self.dim());
        for &i in indices {
            acc += &self.signed.row(i);
        }
        acc / indices.len().max(1) as f64
    }

    /// Copy with a subset of rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = self.points.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(points, labels)
    }
}

/// Synthetic dataset families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Three unit points in the plane whose NGD dynamics have a closed form.
    Toy,
    /// Unit-circle points with `|x_1| >= gamma` ("Dataset I").
    SphereCap,
    /// Unit-disc points with `|x_1| >= gamma` ("Dataset II").
    BallCap,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Toy => "toy",
            Family::SphereCap => "sphere-cap",
            Family::BallCap => "ball-cap",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = MarginError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Family::Toy),
            "sphere-cap" | "dataset-1" => Ok(Family::SphereCap),
            "ball-cap" | "dataset-2" => Ok(Family::BallCap),
            other => Err(MarginError::Domain(format!("unknown family `{other}`"))),
        }
    }
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0;

/// Generator parameters. JSON keys: `family`, `gamma_star`, `n`, `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: Family,
    pub gamma_star: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn toy(gamma_star: f64) -> Self {
        Self {
            family: Family::Toy,
            gamma_star,
            n: 3,
            seed: DEFAULT_SEED,
        }
    }

    /// Dataset I defaults: `gamma = sin(pi/100)`, `n = 100`.
    pub fn sphere_cap(seed: u64) -> Self {
        Self {
            family: Family::SphereCap,
            gamma_star: (PI / 100.0).sin(),
            n: 100,
            seed,
        }
    }

    /// Dataset II defaults: `gamma = sin(pi/100)`, `n = 100`.
    pub fn ball_cap(seed: u64) -> Self {
        Self {
            family: Family::BallCap,
            ..Self::sphere_cap(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma_star)?;
        match self.family {
            Family::Toy if self.n != 3 => Err(MarginError::Domain(format!(
                "toy family has exactly 3 points, got n = {}",
                self.n
            ))),
            Family::SphereCap | Family::BallCap if self.n < 2 => Err(MarginError::Domain(
                format!("cap families need n >= 2, got n = {}", self.n),
            )),
            _ => Ok(()),
        }
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self.family {
            Family::Toy => {
                self.validate()?;
                make_toy(self.gamma_star)
            }
            Family::SphereCap => make_sphere_cap(self),
            Family::BallCap => make_ball_cap(self),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(MarginError::Domain(format!(
            "gamma_star must lie in (0, 1), got {gamma}"
        )))
    }
}

/// The three-point toy set:
/// `x1 = (g, s), y1 = +1`, `x2 = (g, -s), y2 = +1`, `x3 = (-g, -s), y3 = -1`
/// with `s = sqrt(1 - g^2)`. Note `z3 = z1`.
pub fn make_toy(gamma_star: f64) -> Result<Dataset> {
    check_gamma(gamma_star)?;
    let g = gamma_star;
    let s = (1.0 - g * g).sqrt();
    let points = ndarray::arr2(&[[g, s], [g, -s], [-g, -s]]);
    Dataset::new(points, vec![1, 1, -1])
}

fn cap_points(spec: &SyntheticSpec, family: Family) -> Result<Vec<[f64; 2]>> {
    if spec.family != family {
        return Err(MarginError::FamilyMismatch {
            family: family.name().into(),
            reason: format!("spec requests {}", spec.family.name()),
        });
    }
    spec.validate()?;
    let g = spec.gamma_star;
    let s = (1.0 - g * g).sqrt();
    let mut pts = Vec::with_capacity(spec.n);
    pts.push([g, s]);
    pts.push([-g, s]);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half_arc = g.acos();
    while pts.len() < spec.n {
        let p = match family {
            Family::SphereCap => {
                // angle uniform on the two arcs |cos(theta)| >= g
                let u = rng.gen::<f64>() * 4.0 * half_arc;
                let theta = if u < 2.0 * half_arc {
                    u - half_arc
                } else {
                    PI + (u - 3.0 * half_arc)
                };
                [theta.cos(), theta.sin()]
            }
            Family::BallCap => [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)],
            Family::Toy => unreachable!(),
        };
        let norm2 = p[0] * p[0] + p[1] * p[1];
        if p[0].abs() >= g && norm2 <= 1.0 {
            pts.push(p);
        }
    }
    Ok(pts)
}

fn cap_dataset(pts: Vec<[f64; 2]>) -> Result<Dataset> {
    let labels = pts
        .iter()
        .map(|p| if p[0] > 0.0 { 1 } else { -1 })
        .collect();
    let flat: Vec<f64> = pts.iter().flatten().copied().collect();
    let points = Array2::from_shape_vec((pts.len(), 2), flat).expect("shape is n x 2");
    Dataset::new(points, labels)
}

/// Dataset I: two pinned boundary points, the rest angle-uniform on the unit
/// circle restricted to `|x_1| >= gamma`; `y = sgn(x_1)`.
pub fn make_sphere_cap(spec: &SyntheticSpec) -> Result<Dataset> {
    cap_dataset(cap_points(spec, Family::SphereCap)?)
}

/// Dataset II: as Dataset I with the free points drawn from the unit disc
/// (rejection sampling from the enclosing square).
pub fn make_ball_cap(spec: &SyntheticSpec) -> Result<Dataset> {
    cap_dataset(cap_points(spec, Family::BallCap)?)
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Rescale all points by `1 / max |x_i|` instead of rejecting rows with
    /// norm above one.
    pub rescale: bool,
}

/// Reads a dataset with header `x0,...,x{d-1},y`. Row numbers in errors are
/// 1-based data rows (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarginError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, opts: LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = header.len();
    if cols < 2 {
        return Err(MarginError::Parse {
            row: 0,
            message: "header needs at least one feature column and a `y` column".into(),
        });
    }
    let d = cols - 1;
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x{j}") {
            return Err(MarginError::Parse {
                row: 0,
                message: format!("expected header column `x{j}`, found `{name}`"),
            });
        }
    }
    if &header[d] != "y" {
        return Err(MarginError::Parse {
            row: 0,
            message: format!("last header column must be `y`, found `{}`", &header[d]),
        });
    }

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != cols {
            return Err(MarginError::DimensionMismatch {
                expected: d,
                got: record.len().saturating_sub(1),
            });
        }
        for field in record.iter().take(d) {
            let v: f64 = field.parse().map_err(|_| MarginError::Parse {
                row,
                message: format!("`{field}` is not a number"),
            })?;
            flat.push(v);
        }
        let y: f64 = record[d].parse().map_err(|_| MarginError::Parse {
            row,
            message: format!("label `{}` is not a number", &record[d]),
        })?;
        let label = if y == 1.0 {
            1
        } else if y == -1.0 {
            -1
        } else {
            return Err(MarginError::Parse {
                row,
                message: format!("label {y} is not +1 or -1"),
            });
        };
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(MarginError::Parse {
            row: 1,
            message: "no data rows".into(),
        });
    }
    let points = Array2::from_shape_vec((labels.len(), d), flat).expect("rows have d columns");
    let ds = if opts.rescale {
        Dataset::new_rescaled(points, labels)
    } else {
        Dataset::new(points, labels)
    };
    ds.map_err(|e| match e {
        MarginError::NormViolation { rows, max_norm } => MarginError::NormViolation {
            rows: rows.into_iter().map(|i| i + 1).collect(),
            max_norm,
        },
        other => other,
    })
}

/// Writes `x0,...,x{d-1},y` with shortest round-trip float formatting.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| MarginError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_csv(ds, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_csv<W: Write>(ds: &Dataset, out: &mut W) -> std::io::Result<()> {
    let header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{},y", header.join(","))?;
    for i in 0..ds.n() {
        for v in ds.point(i) {
            write!(out, "{v:?},")?;
        }
        writeln!(out, "{}", ds.labels[i])?;
    }
    Ok(())
}
