//! Metric spaces, points and metric-axiom verification.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Policy, Scalar};

/// A point of a [`MetricSpace`].
///
/// Materialized carriers address points by index. Lazy line carriers have no
/// index; their points are identified by their (canonical) coordinate.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Id(usize),
    At(Scalar),
}

impl Point {
    pub fn at(value: Scalar) -> Point {
        Point::At(value)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Id(i) => write!(f, "#{i}"),
            Point::At(c) => write!(f, "{c}"),
        }
    }
}

pub type Membership = Arc<dyn Fn(&Scalar) -> bool + Send + Sync>;
pub type PointSampler = Arc<dyn Fn(&mut ChaCha8Rng) -> Scalar + Send + Sync>;

#[derive(Clone)]
enum Carrier {
    FiniteExplicit {
        ids: Vec<String>,
        matrix: Vec<Vec<Scalar>>,
    },
    LineEmbedded {
        ids: Vec<String>,
        coords: Vec<Scalar>,
    },
    /// Countable subset of the line given by a membership predicate.
    LineLazy {
        membership: Membership,
        sampler: PointSampler,
        note: String,
    },
}

/// A carrier of points with a distance function.
#[derive(Clone)]
pub struct MetricSpace {
    label: String,
    carrier: Carrier,
}

impl fmt::Debug for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.carrier {
            Carrier::FiniteExplicit { ids, .. } => format!("FiniteExplicit({} points)", ids.len()),
            Carrier::LineEmbedded { ids, .. } => format!("LineEmbedded({} points)", ids.len()),
            Carrier::LineLazy { note, .. } => format!("LineLazy({note})"),
        };
        f.debug_struct("MetricSpace")
            .field("label", &self.label)
            .field("carrier", &kind)
            .finish()
    }
}

impl MetricSpace {
    /// A finite space given by an explicit distance matrix. The matrix is
    /// not required to be a metric here; see [`verify_metric_axioms`].
    pub fn finite_explicit(
        label: impl Into<String>,
        ids: Vec<String>,
        matrix: Vec<Vec<Scalar>>,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Degenerate("a space needs at least one point".into()));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Parse(format!("distance matrix must be {n}x{n}")));
        }
        check_unique(&ids)?;
        Ok(MetricSpace {
            label: label.into(),
            carrier: Carrier::FiniteExplicit { ids, matrix },
        })
    }

    /// A finite subset of the line; distance is the absolute difference.
    /// Duplicate coordinates are rejected.
    pub fn line_embedded(
        label: impl Into<String>,
        ids: Vec<String>,
        coords: Vec<Scalar>,
    ) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::Parse("one coordinate per point required".into()));
        }
        if ids.is_empty() {
            return Err(Error::Degenerate("a space needs at least one point".into()));
        }
        check_unique(&ids)?;
        let mut sorted: Vec<&Scalar> = coords.iter().collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("duplicate coordinate {}", w[0])));
        }
        Ok(MetricSpace {
            label: label.into(),
            carrier: Carrier::LineEmbedded { ids, coords },
        })
    }

    /// A line carrier known only through a membership predicate, with a
    /// sampler used by sampled certification.
    pub fn line_lazy(
        label: impl Into<String>,
        note: impl Into<String>,
        membership: Membership,
        sampler: PointSampler,
    ) -> Self {
        MetricSpace {
            label: label.into(),
            carrier: Carrier::LineLazy {
                membership,
                sampler,
                note: note.into(),
            },
        }
    }

    /// A 2-point or larger discrete space (all off-diagonal distances 1).
    pub fn discrete(n: usize) -> Result<Self> {
        let ids = (0..n).map(index_label).collect();
        let matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Scalar::zero() } else { Scalar::one() })
                    .collect()
            })
            .collect();
        MetricSpace::finite_explicit(format!("discrete({n})"), ids, matrix)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_materialized(&self) -> bool {
        !matches!(self.carrier, Carrier::LineLazy { .. })
    }

    /// Number of materialized points; `None` for lazy carriers.
    pub fn len(&self) -> Option<usize> {
        match &self.carrier {
            Carrier::FiniteExplicit { ids, .. } | Carrier::LineEmbedded { ids, .. } => {
                Some(ids.len())
            }
            Carrier::LineLazy { .. } => None,
        }
    }

    /// All points of a materialized carrier.
    pub fn points(&self) -> Option<Vec<Point>> {
        self.len().map(|n| (0..n).map(Point::Id).collect())
    }

    pub fn ids(&self) -> Option<&[String]> {
        match &self.carrier {
            Carrier::FiniteExplicit { ids, .. } | Carrier::LineEmbedded { ids, .. } => Some(ids),
            Carrier::LineLazy { .. } => None,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (&self.carrier, p) {
            (Carrier::FiniteExplicit { ids, .. }, Point::Id(i))
            | (Carrier::LineEmbedded { ids, .. }, Point::Id(i)) => *i < ids.len(),
            (Carrier::LineLazy { membership, .. }, Point::At(c)) => membership(c),
            _ => false,
        }
    }

    fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point {p} is not in space {:?}", self.label)))
        }
    }

    /// Line coordinate of a point, when the space is line-embedded.
    pub fn coordinate(&self, p: &Point) -> Option<Scalar> {
        match (&self.carrier, p) {
            (Carrier::LineEmbedded { coords, .. }, Point::Id(i)) => coords.get(*i).cloned(),
            (Carrier::LineLazy { .. }, Point::At(c)) => Some(c.clone()),
            _ => None,
        }
    }

    /// Human-readable identifier of a point.
    pub fn point_label(&self, p: &Point) -> String {
        match (&self.carrier, p) {
            (Carrier::FiniteExplicit { ids, .. }, Point::Id(i))
            | (Carrier::LineEmbedded { ids, .. }, Point::Id(i)) => {
                ids.get(*i).cloned().unwrap_or_else(|| p.to_string())
            }
            _ => p.to_string(),
        }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<Scalar> {
        self.check(x)?;
        self.check(y)?;
        Ok(match (&self.carrier, x, y) {
            (Carrier::FiniteExplicit { matrix, .. }, Point::Id(i), Point::Id(j)) => {
                matrix[*i][*j].clone()
            }
            (Carrier::LineEmbedded { coords, .. }, Point::Id(i), Point::Id(j)) => {
                (&coords[*i] - &coords[*j]).abs()
            }
            (Carrier::LineLazy { .. }, Point::At(a), Point::At(b)) => (a - b).abs(),
            _ => unreachable!("membership checked above"),
        })
    }

    /// Resolves a point from its identifier, or from a coordinate string on
    /// line carriers.
    pub fn find_point(&self, text: &str) -> Result<Point> {
        let text = text.trim();
        if let Some(ids) = self.ids() {
            if let Some(i) = ids.iter().position(|id| id == text) {
                return Ok(Point::Id(i));
            }
        }
        let value: Option<Scalar> = text.parse().ok();
        match (&self.carrier, value) {
            (Carrier::LineEmbedded { coords, .. }, Some(v)) => coords
                .iter()
                .position(|c| c.approx_eq(&v))
                .map(Point::Id)
                .ok_or_else(|| Error::Domain(format!("no point at coordinate {text}"))),
            (Carrier::LineLazy { .. }, Some(v)) => {
                let p = Point::At(v);
                self.check(&p)?;
                Ok(p)
            }
            _ => Err(Error::Domain(format!("unknown point {text:?}"))),
        }
    }

    /// Draws a carrier point (lazy carriers use their sampler).
    pub fn sample_point(&self, rng: &mut ChaCha8Rng) -> Point {
        use rand::Rng;
        match &self.carrier {
            Carrier::FiniteExplicit { ids, .. } | Carrier::LineEmbedded { ids, .. } => {
                Point::Id(rng.random_range(0..ids.len()))
            }
            Carrier::LineLazy { sampler, .. } => Point::At(sampler(rng)),
        }
    }

    /// Converts the distances of a materialized space to the float backend.
    pub fn to_float_backend(&self, policy: Policy) -> MetricSpace {
        let carrier = match &self.carrier {
            Carrier::FiniteExplicit { ids, matrix } => Carrier::FiniteExplicit {
                ids: ids.clone(),
                matrix: matrix
                    .iter()
                    .map(|row| row.iter().map(|v| v.to_float(policy)).collect())
                    .collect(),
            },
            Carrier::LineEmbedded { ids, coords } => Carrier::LineEmbedded {
                ids: ids.clone(),
                coords: coords.iter().map(|v| v.to_float(policy)).collect(),
            },
            lazy @ Carrier::LineLazy { .. } => lazy.clone(),
        };
        MetricSpace {
            label: self.label.clone(),
            carrier,
        }
    }

    /// Full distance matrix of a materialized space.
    pub fn distance_matrix(&self) -> Option<Vec<Vec<Scalar>>> {
        let pts = self.points()?;
        Some(
            pts.iter()
                .map(|x| pts.iter().map(|y| self.distance(x, y).expect("materialized")).collect())
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpaceDocument = serde_json::from_str(text)?;
        MetricSpace::finite_explicit(doc.label, doc.points, doc.matrix)
    }

    pub fn load(path: &Path) -> Result<Self> {
        MetricSpace::from_json(&std::fs::read_to_string(path)?)
    }

    /// JSON document of a materialized space in the FiniteExplicit schema.
    pub fn to_json(&self) -> Option<String> {
        let doc = SpaceDocument {
            label: self.label.clone(),
            points: self.ids()?.to_vec(),
            matrix: self.distance_matrix()?,
        };
        Some(serde_json::to_string_pretty(&doc).expect("serializable"))
    }
}

/// On-disk form of a FiniteExplicit space. Matrix entries are rational
/// strings such as `"3/5"`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub label: String,
    pub points: Vec<String>,
    pub matrix: Vec<Vec<Scalar>>,
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    match sorted.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(Error::Domain(format!("duplicate point identifier {:?}", w[0]))),
        None => Ok(()),
    }
}

/// `a`, `b`, ..., `z`, `p26`, ...
pub fn index_label(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("p{i}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// d(x,x) = 0
    Identity,
    /// d(x,y) > 0 for x != y
    Positivity,
    Symmetry,
    Triangle,
}

#[derive(Clone, Debug)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub witness: Vec<Point>,
    pub lhs: Scalar,
    pub rhs: Scalar,
}

#[derive(Clone, Debug)]
pub struct AxiomReport {
    pub passed: bool,
    pub violations: Vec<AxiomViolation>,
}

pub const DEFAULT_MAX_VIOLATIONS: usize = 16;

/// Checks the metric axioms over all pairs and triples of `subset`,
/// reporting at most [`DEFAULT_MAX_VIOLATIONS`] violations.
pub fn verify_metric_axioms(space: &MetricSpace, subset: &[Point]) -> Result<AxiomReport> {
    verify_metric_axioms_limited(space, subset, DEFAULT_MAX_VIOLATIONS)
}

/// Violations are reported in a fixed order: identity over points, then
/// positivity and symmetry over pairs, then triangle over ordered triples
/// `(x, y, z)` in lexicographic order, with `lhs = d(x,z)` and
/// `rhs = d(x,y) + d(y,z)`.
pub fn verify_metric_axioms_limited(
    space: &MetricSpace,
    subset: &[Point],
    max_violations: usize,
) -> Result<AxiomReport> {
    if subset.is_empty() {
        return Err(Error::Degenerate("axiom check needs at least one point".into()));
    }
    let n = subset.len();
    let mut d = Vec::with_capacity(n);
    for x in subset {
        let mut row = Vec::with_capacity(n);
        for y in subset {
            row.push(space.distance(x, y)?);
        }
        d.push(row);
    }

    let mut violations = Vec::new();
    let full = |v: &Vec<AxiomViolation>| v.len() >= max_violations;
    let zero = Scalar::zero();

    for i in 0..n {
        if full(&violations) {
            break;
        }
        if !d[i][i].is_zero() {
            violations.push(AxiomViolation {
                axiom: Axiom::Identity,
                witness: vec![subset[i].clone()],
                lhs: d[i][i].clone(),
                rhs: zero.clone(),
            });
        }
    }
    'pairs: for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if full(&violations) {
                break 'pairs;
            }
            if !d[i][j].gt(&zero) {
                violations.push(AxiomViolation {
                    axiom: Axiom::Positivity,
                    witness: vec![subset[i].clone(), subset[j].clone()],
                    lhs: d[i][j].clone(),
                    rhs: zero.clone(),
                });
            }
            if i < j && !d[i][j].approx_eq(&d[j][i]) && !full(&violations) {
                violations.push(AxiomViolation {
                    axiom: Axiom::Symmetry,
                    witness: vec![subset[i].clone(), subset[j].clone()],
                    lhs: d[i][j].clone(),
                    rhs: d[j][i].clone(),
                });
            }
        }
    }

    let room = max_violations.saturating_sub(violations.len());
    if room > 0 {
        for (i, j, k) in triangle_violations(&d, room) {
            violations.push(AxiomViolation {
                axiom: Axiom::Triangle,
                witness: vec![subset[i].clone(), subset[j].clone(), subset[k].clone()],
                lhs: d[i][k].clone(),
                rhs: &d[i][j] + &d[j][k],
            });
        }
    }

    Ok(AxiomReport {
        passed: violations.is_empty(),
        violations,
    })
}

/// Distance table specialized for the O(n^3) triangle sweep.
enum Compiled {
    /// All entries exact: scaled to a common denominator.
    Scaled(Vec<BigInt>),
    /// All entries floats: `a <= b + eps`.
    Float(Vec<f64>, f64),
    /// Mixed representations: fall back to scalar comparisons.
    Scalars,
}

fn compile(d: &[Vec<Scalar>]) -> Compiled {
    let entries = || d.iter().flatten();
    if entries().all(|v| v.is_exact() && v.policy() == Policy::Exact) {
        let mut lcm = BigInt::one();
        for v in entries() {
            lcm = lcm.lcm(v.as_rational().expect("exact").denom());
        }
        let lcm = BigRational::from_integer(lcm);
        let scaled = entries()
            .map(|v| (v.as_rational().expect("exact") * &lcm).to_integer())
            .collect();
        Compiled::Scaled(scaled)
    } else if entries().all(|v| !v.is_exact()) {
        let eps = entries().fold(Policy::Exact, |p, v| p.combine(v.policy())).tolerance();
        Compiled::Float(entries().map(Scalar::to_f64).collect(), eps)
    } else {
        Compiled::Scalars
    }
}

fn triangle_violations(d: &[Vec<Scalar>], limit: usize) -> Vec<(usize, usize, usize)> {
    let n = d.len();
    let compiled = compile(d);
    let holds = |i: usize, j: usize, k: usize| -> bool {
        match &compiled {
            Compiled::Scaled(m) => m[i * n + k] <= &m[i * n + j] + &m[j * n + k],
            Compiled::Float(m, eps) => m[i * n + k] <= m[i * n + j] + m[j * n + k] + eps,
            Compiled::Scalars => d[i][k].le(&(&d[i][j] + &d[j][k])),
        }
    };
    // Each outer index collects its own first `limit` hits; merging in index
    // order keeps the result lexicographic regardless of scheduling.
    let per_row: Vec<Vec<(usize, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut hits = Vec::new();
            'row: for j in 0..n {
                for k in 0..n {
                    if !holds(i, j, k) {
                        hits.push((i, j, k));
                        if hits.len() >= limit {
                            break 'row;
                        }
                    }
                }
            }
            hits
        })
        .collect();
    per_row.into_iter().flatten().take(limit).collect()
}
