//! Brute force over every self-map of a small finite metric space.
//!
//! Finite metric spaces are compact and complete, so existence and
//! uniqueness claims about fixed points become exhaustively checkable here.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{certify, implication_expected, ConditionKind, Scope};
use crate::error::{Error, Result};
use crate::map::SelfMap;
use crate::scalar::Scalar;
use crate::space::{index_label, verify_metric_axioms, MetricSpace, Point};

/// Largest carrier for which all `n^n` maps are enumerated.
pub const MAX_ENUMERATION: usize = 6;
/// Largest carrier accepted by the audit and the census (`5^5 = 3125` maps).
pub const MAX_CENSUS: usize = 5;

/// All `n^n` target tables in lexicographic order.
#[derive(Clone, Debug)]
pub struct SelfMapTables {
    n: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for SelfMapTables {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // odometer increment from the last position
        let mut i = self.n;
        while i > 0 {
            i -= 1;
            if succ[i] + 1 < self.n {
                succ[i] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

pub fn enumerate_self_maps(n: usize) -> Result<SelfMapTables> {
    if !(1..=MAX_ENUMERATION).contains(&n) {
        return Err(Error::Parameter(format!(
            "self-map enumeration needs 1 <= n <= {MAX_ENUMERATION}, got {n}"
        )));
    }
    Ok(SelfMapTables {
        n,
        next: Some(vec![0; n]),
    })
}

/// Largest integer weight drawn by [`random_finite_metric`].
pub const MAX_WEIGHT: i64 = 12;
const MAX_REDRAWS: usize = 1000;

/// In-place all-pairs shortest-path closure (Floyd–Warshall).
pub fn shortest_path_closure(m: &mut [Vec<BigRational>]) {
    let n = m.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = &m[i][k] + &m[k][j];
                if via < m[i][j] {
                    m[i][j] = via;
                }
            }
        }
    }
}

/// A random metric on `n` points: symmetric integer weights in
/// `0..=MAX_WEIGHT`, redrawn while any off-diagonal weight is zero, then
/// closed under shortest paths.
pub fn random_finite_metric(n: usize, seed: u64) -> Result<MetricSpace> {
    if n < 2 {
        return Err(Error::Parameter(format!("random metric needs n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REDRAWS {
        let mut m = vec![vec![BigRational::from_integer(BigInt::from(0)); n]; n];
        let mut degenerate = false;
        for i in 0..n {
            for j in i + 1..n {
                let w: i64 = rng.random_range(0..=MAX_WEIGHT);
                degenerate |= w == 0;
                m[i][j] = BigRational::from_integer(BigInt::from(w));
                m[j][i] = m[i][j].clone();
            }
        }
        if degenerate {
            continue;
        }
        shortest_path_closure(&mut m);
        let space = MetricSpace::finite_explicit(
            format!("random(n={n},seed={seed})"),
            (0..n).map(index_label).collect(),
            m.into_iter()
                .map(|row| row.into_iter().map(Scalar::exact).collect())
                .collect(),
        )?;
        let report = verify_metric_axioms(&space, &space.points().expect("finite"))?;
        if !report.passed {
            return Err(Error::Domain(format!(
                "shortest-path closure produced a non-metric: {:?}",
                report.violations[0].axiom
            )));
        }
        return Ok(space);
    }
    Err(Error::Degenerate(format!(
        "no draw without zero off-diagonal weights in {MAX_REDRAWS} attempts"
    )))
}

fn finite_size(space: &MetricSpace, cap: usize) -> Result<usize> {
    match space.len() {
        Some(n) if (1..=cap).contains(&n) => Ok(n),
        Some(n) => Err(Error::Parameter(format!("space has {n} points; the cap is {cap}"))),
        None => Err(Error::Parameter("a materialized finite space is required".into())),
    }
}

/// The conditions checked by [`implication_audit`].
pub fn default_audit_conditions() -> Vec<ConditionKind> {
    let q = |n, d| Scalar::ratio(n, d);
    vec![
        ConditionKind::banach(q(1, 2)).expect("valid"),
        ConditionKind::Contractive,
        ConditionKind::SuzukiHalfStrict,
        ConditionKind::AbtahiWeak,
        ConditionKind::eta_strict(q(1, 8)).expect("valid"),
        ConditionKind::eta_strict(q(1, 4)).expect("valid"),
        ConditionKind::eta_strict(q(1, 2)).expect("valid"),
    ]
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChainViolation {
    pub map: Vec<usize>,
    pub antecedent: String,
    pub consequent: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub space: String,
    pub n: usize,
    pub maps_total: usize,
    pub conditions: Vec<String>,
    /// Number of maps satisfying each condition.
    pub population: BTreeMap<String, usize>,
    /// Implications `a => b` checked per map.
    pub implications_checked: usize,
    pub violations: Vec<ChainViolation>,
    /// Maps satisfying `abtahi_weak` but not `contractive` (lexicographic,
    /// capped at [`MAX_LISTED`]).
    pub weak_not_contractive: Vec<Vec<usize>>,
    pub weak_not_contractive_total: usize,
}

/// Longest map list kept in reports.
pub const MAX_LISTED: usize = 64;

/// Certifies every map against [`default_audit_conditions`] and checks
/// that certification is monotone along [`implication_expected`].
pub fn implication_audit(space: &MetricSpace) -> Result<AuditReport> {
    implication_audit_with(space, &default_audit_conditions())
}

pub fn implication_audit_with(space: &MetricSpace, conditions: &[ConditionKind]) -> Result<AuditReport> {
    let n = finite_size(space, MAX_CENSUS)?;
    let tables: Vec<Vec<usize>> = enumerate_self_maps(n)?.collect();
    let edges: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|a| (0..conditions.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && implication_expected(&conditions[a], &conditions[b]))
        .collect();
    let contractive = conditions.iter().position(|c| *c == ConditionKind::Contractive);
    let weak = conditions.iter().position(|c| *c == ConditionKind::AbtahiWeak);

    let verdicts: Vec<Vec<bool>> = tables
        .par_iter()
        .map(|t| {
            let map = SelfMap::table("audit", t.clone());
            conditions
                .iter()
                .map(|c| Ok(certify(space, &map, c, &Scope::Exhaustive)?.satisfied()))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;

    let mut population = BTreeMap::new();
    for (k, c) in conditions.iter().enumerate() {
        population.insert(c.to_string(), verdicts.iter().filter(|v| v[k]).count());
    }
    let mut violations = Vec::new();
    let mut weak_not_contractive = Vec::new();
    let mut weak_not_contractive_total = 0;
    for (t, v) in tables.iter().zip(&verdicts) {
        for &(a, b) in &edges {
            if v[a] && !v[b] {
                violations.push(ChainViolation {
                    map: t.clone(),
                    antecedent: conditions[a].to_string(),
                    consequent: conditions[b].to_string(),
                });
            }
        }
        if let (Some(c), Some(w)) = (contractive, weak) {
            if v[w] && !v[c] {
                weak_not_contractive_total += 1;
                if weak_not_contractive.len() < MAX_LISTED {
                    weak_not_contractive.push(t.clone());
                }
            }
        }
    }
    Ok(AuditReport {
        space: space.label().to_string(),
        n,
        maps_total: tables.len(),
        conditions: conditions.iter().map(|c| c.to_string()).collect(),
        population,
        implications_checked: edges.len(),
        violations,
        weak_not_contractive,
        weak_not_contractive_total,
    })
}

/// What the census expects of every satisfying map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Exactly one fixed point, reached by every Picard orbit.
    UniqueFixedPoint,
    /// Nothing is claimed; counts are reported only.
    None,
}

/// Conditions that imply the half-strict condition on any space, and so
/// force a unique fixed point on a compact one.
pub fn expectation_for(condition: &ConditionKind) -> Expectation {
    match condition {
        ConditionKind::BanachContraction { .. }
        | ConditionKind::BoydWong { .. }
        | ConditionKind::Contractive
        | ConditionKind::SuzukiHalfStrict
        | ConditionKind::EtaStrict { .. }
        | ConditionKind::GlobalPsiHalf { .. } => Expectation::UniqueFixedPoint,
        ConditionKind::SuzukiTheta { .. }
        | ConditionKind::AbtahiWeak
        | ConditionKind::HalfNonstrict
        | ConditionKind::EtaNonstrict { .. } => Expectation::None,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub space: String,
    pub n: usize,
    pub condition: String,
    pub expectation: Expectation,
    pub maps_total: usize,
    pub maps_satisfying: usize,
    pub maps_satisfying_with_unique_fixed_point: usize,
    /// Satisfying maps all of whose orbits reach a fixed point within `n` steps.
    pub maps_satisfying_with_convergent_orbits: usize,
    /// Satisfying maps keyed by their number of fixed points.
    pub fixed_point_histogram: BTreeMap<usize, usize>,
    /// Satisfying maps that break the expectation.
    pub exceptions: usize,
    /// Satisfying maps without a unique fixed point, lexicographic, capped
    /// at [`MAX_LISTED`].
    pub counterexamples: Vec<Vec<usize>>,
}

struct MapFacts {
    satisfying: bool,
    fixed_points: usize,
    orbits_converge: bool,
}

fn orbits_reach_fixed_points(table: &[usize]) -> bool {
    let n = table.len();
    (0..n).all(|start| {
        let mut x = start;
        for _ in 0..n {
            x = table[x];
        }
        table[x] == x
    })
}

/// Counts the maps satisfying `condition` and their fixed points.
pub fn fixed_point_census(space: &MetricSpace, condition: &ConditionKind) -> Result<CensusReport> {
    let n = finite_size(space, MAX_CENSUS)?;
    let tables: Vec<Vec<usize>> = enumerate_self_maps(n)?.collect();
    let facts: Vec<MapFacts> = tables
        .par_iter()
        .map(|t| {
            let map = SelfMap::table("census", t.clone());
            let satisfying = certify(space, &map, condition, &Scope::Exhaustive)?.satisfied();
            Ok(MapFacts {
                satisfying,
                fixed_points: (0..n).filter(|&i| t[i] == i).count(),
                orbits_converge: orbits_reach_fixed_points(t),
            })
        })
        .collect::<Result<_>>()?;

    let expectation = expectation_for(condition);
    let mut report = CensusReport {
        space: space.label().to_string(),
        n,
        condition: condition.to_string(),
        expectation,
        maps_total: tables.len(),
        maps_satisfying: 0,
        maps_satisfying_with_unique_fixed_point: 0,
        maps_satisfying_with_convergent_orbits: 0,
        fixed_point_histogram: BTreeMap::new(),
        exceptions: 0,
        counterexamples: Vec::new(),
    };
    for (t, f) in tables.iter().zip(&facts) {
        if !f.satisfying {
            continue;
        }
        report.maps_satisfying += 1;
        *report.fixed_point_histogram.entry(f.fixed_points).or_default() += 1;
        let unique = f.fixed_points == 1;
        if unique {
            report.maps_satisfying_with_unique_fixed_point += 1;
        }
        if f.orbits_converge {
            report.maps_satisfying_with_convergent_orbits += 1;
        }
        if expectation == Expectation::UniqueFixedPoint && !(unique && f.orbits_converge) {
            report.exceptions += 1;
        }
        if !unique && report.counterexamples.len() < MAX_LISTED {
            report.counterexamples.push(t.clone());
        }
    }
    Ok(report)
}

/// Fixed points of a table map.
pub fn fixed_points(table: &[usize]) -> Vec<Point> {
    (0..table.len()).filter(|&i| table[i] == i).map(Point::Id).collect()
}
