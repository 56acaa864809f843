//! Picard iteration with gap/ratio diagnostics.
//!
//! For a pair of indices `p, q` of an orbit `x_0, x_1, ...` write
//! `delta = d(x_p, x_q)` and `Delta = d(T x_p, T x_q) / delta`, with
//! `Delta = 0` when `delta = 0`. The sequential criterion asks that
//! `Delta -> 1` force `delta -> 0` along pairs whose premise
//! `d(x_p, T x_p) <= d(x_p, x_q)` holds. Limits are not decidable on a
//! finite trace, so [`sequential_diagnostic`] searches for pairs with
//! `Delta >= 1 - eps_ratio` and `delta >= eps_gap` up to a fixed horizon.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::SelfMap;
use crate::scalar::{Policy, Scalar};
use crate::space::{MetricSpace, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    /// `x_{k+1}` coincides with `x_k` (under the scalar policy).
    FixedPointHit(usize),
    /// `x_k` lies outside the map's certification domain.
    CarrierBoundary(usize),
}

/// Record of `x_0, ..., x_N` with `x_{n+1} = T x_n` and the consecutive
/// gaps `delta_n = d(x_n, x_{n+1})`.
#[derive(Clone, Debug)]
pub struct OrbitTrace {
    points: Vec<Point>,
    deltas: Vec<Scalar>,
    termination: Termination,
}

impl OrbitTrace {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn deltas(&self) -> &[Scalar] {
        &self.deltas
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Number of recorded points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest index whose image is recorded in the trace.
    fn last_with_image(&self) -> Option<usize> {
        self.deltas.len().checked_sub(1)
    }
}

/// Iterates `map` from `x0` for at most `max_steps` applications.
///
/// Stops early on a fixed point (gap zero under the scalar policy) or when
/// the orbit reaches a point outside the certification domain.
pub fn iterate(space: &MetricSpace, map: &SelfMap, x0: Point, max_steps: usize) -> Result<OrbitTrace> {
    if max_steps == 0 {
        return Err(Error::Parameter("max_steps must be positive".into()));
    }
    if !space.contains(&x0) {
        return Err(Error::Domain(format!("start point {x0} is not in the carrier")));
    }
    let mut points = vec![x0];
    let mut deltas = Vec::new();
    let mut termination = Termination::MaxSteps;
    for n in 0..max_steps {
        let x = &points[n];
        let y = match map.apply(x) {
            Ok(y) => y,
            Err(Error::Boundary(_)) => {
                termination = Termination::CarrierBoundary(n);
                break;
            }
            Err(e) => return Err(e),
        };
        let gap = space.distance(x, &y)?;
        let fixed = gap.is_zero();
        points.push(y);
        deltas.push(gap);
        if fixed {
            termination = Termination::FixedPointHit(n);
            break;
        }
    }
    Ok(OrbitTrace {
        points,
        deltas,
        termination,
    })
}

fn index_check(trace: &OrbitTrace, i: usize) -> Result<()> {
    if i < trace.len() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "index {i} is outside the trace of length {}",
            trace.len()
        )))
    }
}

/// `d(T x_p, T x_q) / d(x_p, x_q)`, or zero when the points coincide.
pub fn capital_delta(
    space: &MetricSpace,
    map: &SelfMap,
    trace: &OrbitTrace,
    p: usize,
    q: usize,
) -> Result<Scalar> {
    index_check(trace, p)?;
    index_check(trace, q)?;
    let (xp, xq) = (&trace.points[p], &trace.points[q]);
    let delta = space.distance(xp, xq)?;
    if delta.is_zero() {
        return Ok(Scalar::zero().with_policy(delta.policy()));
    }
    let image = |i: usize| -> Result<Point> {
        match trace.points.get(i + 1) {
            Some(next) if i < trace.deltas.len() => Ok(next.clone()),
            _ => map.apply(&trace.points[i]),
        }
    };
    let num = space.distance(&image(p)?, &image(q)?)?;
    Ok(&num / &delta)
}

/// Finite-horizon thresholds for the sequential diagnostic.
#[derive(Clone, Debug)]
pub struct DiagnosticThresholds {
    /// Closeness of `Delta` to 1.
    pub eps_ratio: Scalar,
    /// Separation of `delta` from 0.
    pub eps_gap: Scalar,
    pub horizon: usize,
    /// Witnesses kept in the report; the total match count is always exact.
    pub max_witnesses: usize,
}

pub const DEFAULT_HORIZON: usize = 5000;
pub const DEFAULT_MAX_WITNESSES: usize = 1000;

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        DiagnosticThresholds {
            eps_ratio: Scalar::ratio(1, 100),
            eps_gap: Scalar::ratio(1, 100),
            horizon: DEFAULT_HORIZON,
            max_witnesses: DEFAULT_MAX_WITNESSES,
        }
    }
}

impl DiagnosticThresholds {
    pub fn new(eps_ratio: Scalar, eps_gap: Scalar, horizon: usize) -> Result<Self> {
        let t = DiagnosticThresholds {
            eps_ratio,
            eps_gap,
            horizon,
            ..Default::default()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = Scalar::zero();
        if !(self.eps_ratio.total_cmp(&zero).is_gt() && self.eps_ratio.total_cmp(&Scalar::one()).is_lt()) {
            return Err(Error::Parameter(format!(
                "eps_ratio must lie in (0,1), got {}",
                self.eps_ratio
            )));
        }
        if !self.eps_gap.total_cmp(&zero).is_gt() {
            return Err(Error::Parameter(format!("eps_gap must be positive, got {}", self.eps_gap)));
        }
        if self.horizon == 0 {
            return Err(Error::Parameter("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// A pair of orbit indices with its gap and ratio.
#[derive(Clone, Debug, Serialize)]
pub struct SequentialWitness {
    pub p: usize,
    pub q: usize,
    pub delta: Scalar,
    #[serde(rename = "Delta")]
    pub big_delta: Scalar,
    pub premise_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequentialReport {
    /// First witnesses in lexicographic `(p, q)` order.
    pub witnesses: Vec<SequentialWitness>,
    /// Number of qualifying pairs, including those beyond `max_witnesses`.
    pub total_matches: usize,
    /// Largest index `q` scanned.
    pub horizon_used: usize,
    /// The requested horizon exceeded the trace and was clamped.
    pub clamped: bool,
}

impl SequentialReport {
    pub fn is_empty(&self) -> bool {
        self.total_matches == 0
    }
}

/// Scans index pairs `p < q <= horizon` whose premise holds, reporting those
/// with `Delta >= 1 - eps_ratio` and `delta >= eps_gap`.
///
/// An empty report means the trace carries no evidence against the
/// sequential criterion at this horizon.
pub fn sequential_diagnostic(
    space: &MetricSpace,
    _map: &SelfMap,
    trace: &OrbitTrace,
    thresholds: &DiagnosticThresholds,
) -> Result<SequentialReport> {
    thresholds.validate()?;
    if trace.len() < 2 {
        return Err(Error::Degenerate("sequential diagnostic needs at least two points".into()));
    }
    let last = trace
        .last_with_image()
        .ok_or_else(|| Error::Degenerate("trace has no recorded image".into()))?;
    let horizon = thresholds.horizon.min(last);
    let clamped = thresholds.horizon > last;
    let one_minus = &Scalar::one() - &thresholds.eps_ratio;
    let pts = &trace.points;
    let cap = thresholds.max_witnesses;
    if let Some((coords, eps)) = float_line(space, trace) {
        return Ok(float_diagnostic(&coords, eps, trace, thresholds, horizon, clamped));
    }

    let rows: Vec<(usize, Vec<SequentialWitness>)> = (0..horizon)
        .into_par_iter()
        .map(|p| -> Result<(usize, Vec<SequentialWitness>)> {
            let gap_p = &trace.deltas[p];
            let mut count = 0;
            let mut kept = Vec::new();
            for q in p + 1..=horizon {
                let delta = space.distance(&pts[p], &pts[q])?;
                if !gap_p.le(&delta) || !delta.ge(&thresholds.eps_gap) || delta.is_zero() {
                    continue;
                }
                let image_gap = space.distance(&pts[p + 1], &pts[q + 1])?;
                if !image_gap.ge(&(&one_minus * &delta)) {
                    continue;
                }
                count += 1;
                if kept.len() < cap {
                    kept.push(SequentialWitness {
                        p,
                        q,
                        big_delta: &image_gap / &delta,
                        delta,
                        premise_ok: true,
                    });
                }
            }
            Ok((count, kept))
        })
        .collect::<Result<_>>()?;

    let total_matches = rows.iter().map(|r| r.0).sum();
    let witnesses = rows.into_iter().flat_map(|r| r.1).take(cap).collect();
    Ok(SequentialReport {
        witnesses,
        total_matches,
        horizon_used: horizon,
        clamped,
    })
}

/// Float coordinates of every trace point on a line carrier, with the
/// loosest tolerance among them.
fn float_line(space: &MetricSpace, trace: &OrbitTrace) -> Option<(Vec<f64>, f64)> {
    let mut eps = Policy::Exact;
    let mut coords = Vec::with_capacity(trace.points.len());
    for p in &trace.points {
        let c = space.coordinate(p)?;
        if c.is_exact() {
            return None;
        }
        eps = eps.combine(c.policy());
        coords.push(c.to_f64());
    }
    for d in &trace.deltas {
        eps = eps.combine(d.policy());
    }
    Some((coords, eps.tolerance()))
}

/// [`sequential_diagnostic`] on plain `f64`, with the same epsilon reading
/// of every comparison.
fn float_diagnostic(
    coords: &[f64],
    eps: f64,
    trace: &OrbitTrace,
    thresholds: &DiagnosticThresholds,
    horizon: usize,
    clamped: bool,
) -> SequentialReport {
    let policy = Policy::Epsilon(eps);
    let one_minus = 1.0 - thresholds.eps_ratio.to_f64();
    let eps_gap = thresholds.eps_gap.to_f64();
    let cap = thresholds.max_witnesses;
    let rows: Vec<(usize, Vec<SequentialWitness>)> = (0..horizon)
        .into_par_iter()
        .map(|p| {
            let gap_p = trace.deltas[p].to_f64();
            let mut count = 0;
            let mut kept = Vec::new();
            for q in p + 1..=horizon {
                let delta = (coords[p] - coords[q]).abs();
                if gap_p > delta + eps || delta < eps_gap - eps || delta <= eps {
                    continue;
                }
                let image_gap = (coords[p + 1] - coords[q + 1]).abs();
                if image_gap < one_minus * delta - eps {
                    continue;
                }
                count += 1;
                if kept.len() < cap {
                    kept.push(SequentialWitness {
                        p,
                        q,
                        delta: Scalar::float(delta, policy),
                        big_delta: Scalar::float(image_gap / delta, policy),
                        premise_ok: true,
                    });
                }
            }
            (count, kept)
        })
        .collect();
    let total_matches = rows.iter().map(|r| r.0).sum();
    let witnesses = rows.into_iter().flat_map(|r| r.1).take(cap).collect();
    SequentialReport {
        witnesses,
        total_matches,
        horizon_used: horizon,
        clamped,
    }
}

/// Recomputes a witness from scratch through `distance` and `apply`.
pub fn replay_witness(
    space: &MetricSpace,
    map: &SelfMap,
    trace: &OrbitTrace,
    w: &SequentialWitness,
) -> Result<SequentialWitness> {
    index_check(trace, w.p)?;
    index_check(trace, w.q)?;
    let (xp, xq) = (&trace.points[w.p], &trace.points[w.q]);
    let (txp, txq) = (map.apply(xp)?, map.apply(xq)?);
    let delta = space.distance(xp, xq)?;
    let big_delta = if delta.is_zero() {
        Scalar::zero()
    } else {
        &space.distance(&txp, &txq)? / &delta
    };
    let premise_ok = space.distance(xp, &txp)?.le(&delta);
    Ok(SequentialWitness {
        p: w.p,
        q: w.q,
        delta,
        big_delta,
        premise_ok,
    })
}

/// Finite-horizon value of
/// `sup { d(T x_n, T x_m) / d(x_n, x_m) : d(x_n, T x_n) <= s <= d(x_n, x_m) }`
/// over `n, m <= horizon`; zero when no pair qualifies.
pub fn extract_psi(
    space: &MetricSpace,
    _map: &SelfMap,
    trace: &OrbitTrace,
    s: &Scalar,
    horizon: usize,
) -> Result<Scalar> {
    if s.total_cmp(&Scalar::zero()).is_lt() {
        return Err(Error::Domain(format!("psi is defined for s >= 0, got {s}")));
    }
    let Some(last) = trace.last_with_image() else {
        return Ok(Scalar::zero());
    };
    let h = horizon.min(last);
    let pts = &trace.points;
    let best: Vec<Option<Scalar>> = (0..=h)
        .into_par_iter()
        .map(|n| -> Result<Option<Scalar>> {
            if !trace.deltas[n].le(s) {
                return Ok(None);
            }
            let mut best: Option<Scalar> = None;
            for m in 0..=h {
                let d = space.distance(&pts[n], &pts[m])?;
                if d.is_exact_zero() || !s.le(&d) {
                    continue;
                }
                let ratio = &space.distance(&pts[n + 1], &pts[m + 1])? / &d;
                if best.as_ref().is_none_or(|b| ratio.total_cmp(b).is_gt()) {
                    best = Some(ratio);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(best
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.total_cmp(&a).is_gt() { b } else { a })
        .unwrap_or_else(Scalar::zero))
}

/// [`extract_psi`] on a grid of `s` values.
pub fn psi_curve(
    space: &MetricSpace,
    map: &SelfMap,
    trace: &OrbitTrace,
    grid: &[Scalar],
    horizon: usize,
) -> Result<Vec<(Scalar, Scalar)>> {
    grid.iter()
        .map(|s| Ok((s.clone(), extract_psi(space, map, trace, s, horizon)?)))
        .collect()
}

/// Largest pairwise distance among the last `tail_window` points.
pub fn cauchy_estimate(space: &MetricSpace, trace: &OrbitTrace, tail_window: usize) -> Result<Scalar> {
    if tail_window == 0 || tail_window > trace.len() {
        return Err(Error::Domain(format!(
            "tail window {tail_window} must lie in 1..={}",
            trace.len()
        )));
    }
    let tail = &trace.points[trace.len() - tail_window..];
    let mut best = Scalar::zero();
    for (i, x) in tail.iter().enumerate() {
        for y in &tail[i + 1..] {
            let d = space.distance(x, y)?;
            if d.total_cmp(&best).is_gt() {
                best = d;
            }
        }
    }
    Ok(best)
}

/// The fixed point and its residual `d(x, Tx)` when the orbit hit one.
pub fn fixed_point_of(trace: &OrbitTrace) -> Option<(Point, Scalar)> {
    match trace.termination {
        Termination::FixedPointHit(k) => Some((trace.points[k].clone(), trace.deltas[k].clone())),
        _ => None,
    }
}

/// Writes `n,point_id,coordinate,delta_n` rows.
pub fn write_csv<W: Write>(space: &MetricSpace, trace: &OrbitTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "point_id", "coordinate", "delta_n"])?;
    for (n, p) in trace.points.iter().enumerate() {
        let coord = space.coordinate(p).map(|c| c.to_string()).unwrap_or_default();
        let delta = trace.deltas.get(n).map(|d| d.to_string()).unwrap_or_default();
        w.write_record([n.to_string(), space.point_label(p), coord, delta])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Policy;
    use std::sync::Arc;

    fn rationals() -> MetricSpace {
        MetricSpace::line_lazy(
            "Q",
            "all rationals",
            Arc::new(|_| true),
            Arc::new(|_| Scalar::zero()),
        )
    }

    fn halving() -> SelfMap {
        SelfMap::rule(
            "x/2",
            "everywhere",
            Arc::new(|p| match p {
                Point::At(x) => Ok(Point::At(x / &Scalar::integer(2))),
                _ => Err(Error::Domain("line point expected".into())),
            }),
        )
    }

    fn identity_rule() -> SelfMap {
        SelfMap::rule("id", "everywhere", Arc::new(|p| Ok(p.clone())))
    }

    #[test]
    fn halving_gaps_are_geometric() {
        let t = iterate(&rationals(), &halving(), Point::At(Scalar::one()), 10).unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t.termination(), Termination::MaxSteps);
        assert_eq!(t.deltas()[9], Scalar::ratio(1, 1024));
    }

    #[test]
    fn deltas_recompute_from_points() {
        let s = rationals();
        let t = iterate(&s, &halving(), Point::At(Scalar::ratio(3, 7)), 12).unwrap();
        for (n, d) in t.deltas().iter().enumerate() {
            assert_eq!(*d, s.distance(&t.points()[n], &t.points()[n + 1]).unwrap());
        }
    }

    #[test]
    fn identity_trace_hits_fixed_point() {
        let x0 = Point::At(Scalar::ratio(2, 3));
        let t = iterate(&rationals(), &identity_rule(), x0.clone(), 5).unwrap();
        assert_eq!(t.termination(), Termination::FixedPointHit(0));
        assert_eq!(fixed_point_of(&t), Some((x0, Scalar::zero())));
    }

    #[test]
    fn float_fixed_point_uses_epsilon() {
        let p = Policy::epsilon(1e-9).unwrap();
        let t = iterate(&rationals(), &halving(), Point::At(Scalar::float(1.0, p)), 100).unwrap();
        match t.termination() {
            Termination::FixedPointHit(k) => assert!(t.deltas()[k].to_f64() <= 1e-9),
            other => panic!("expected a fixed point, got {other:?}"),
        }
    }

    #[test]
    fn capital_delta_conventions() {
        let s = rationals();
        let m = halving();
        let t = iterate(&s, &m, Point::At(Scalar::one()), 8).unwrap();
        assert!(capital_delta(&s, &m, &t, 3, 3).unwrap().is_exact_zero());
        assert_eq!(capital_delta(&s, &m, &t, 1, 6).unwrap(), Scalar::ratio(1, 2));
        // the last point's image comes from the map
        assert_eq!(capital_delta(&s, &m, &t, 0, 8).unwrap(), Scalar::ratio(1, 2));
        assert!(capital_delta(&s, &m, &t, 0, 9).is_err());
    }

    #[test]
    fn cauchy_estimate_of_halving_tail() {
        let s = rationals();
        let t = iterate(&s, &halving(), Point::At(Scalar::one()), 20).unwrap();
        let expected = &Scalar::ratio(1, 1 << 16) - &Scalar::ratio(1, 1 << 20);
        assert_eq!(cauchy_estimate(&s, &t, 5).unwrap(), expected);
        assert!(cauchy_estimate(&s, &t, 0).is_err());
        assert!(cauchy_estimate(&s, &t, 22).is_err());
    }

    #[test]
    fn constant_tail_has_zero_estimate() {
        let s = rationals();
        let t = iterate(&s, &identity_rule(), Point::At(Scalar::one()), 3).unwrap();
        assert!(cauchy_estimate(&s, &t, 2).unwrap().is_exact_zero());
    }

    #[test]
    fn halving_diagnostic_is_empty() {
        let s = rationals();
        let m = halving();
        let t = iterate(&s, &m, Point::At(Scalar::one()), 40).unwrap();
        let th = DiagnosticThresholds::new(Scalar::ratio(1, 100), Scalar::ratio(1, 100), 500).unwrap();
        let r = sequential_diagnostic(&s, &m, &t, &th).unwrap();
        assert!(r.is_empty());
        assert!(r.clamped);
        assert_eq!(r.horizon_used, 39);
    }

    #[test]
    fn thresholds_validated() {
        assert!(DiagnosticThresholds::new(Scalar::zero(), Scalar::one(), 5).is_err());
        assert!(DiagnosticThresholds::new(Scalar::one(), Scalar::one(), 5).is_err());
        assert!(DiagnosticThresholds::new(Scalar::ratio(1, 2), Scalar::zero(), 5).is_err());
        assert!(DiagnosticThresholds::new(Scalar::ratio(1, 2), Scalar::one(), 0).is_err());
    }

    #[test]
    fn psi_of_halving() {
        let s = rationals();
        let m = halving();
        let t = iterate(&s, &m, Point::At(Scalar::one()), 30).unwrap();
        assert_eq!(extract_psi(&s, &m, &t, &Scalar::ratio(1, 4), 30).unwrap(), Scalar::ratio(1, 2));
        assert!(extract_psi(&s, &m, &t, &Scalar::integer(2), 30).unwrap().is_exact_zero());
        assert!(extract_psi(&s, &m, &t, &Scalar::zero(), 30).unwrap().is_exact_zero());
        assert!(extract_psi(&s, &m, &t, &Scalar::integer(-1), 30).is_err());
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let s = rationals();
        let t = iterate(&s, &halving(), Point::At(Scalar::one()), 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,point_id,coordinate,delta_n");
        assert_eq!(lines[1], "0,1,1,1/2");
        assert_eq!(lines[4], "3,1/8,1/8,");
    }
}
