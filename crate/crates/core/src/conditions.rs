//! Contractive-type conditions and their certifiers.
//!
//! Each [`ConditionKind`] is an implication quantified over ordered pairs
//! `(x, y)` of the map's certification domain:
//!
//! | kind                 | premise                         | conclusion                  |
//! |----------------------|---------------------------------|-----------------------------|
//! | `BanachContraction`  | always                          | `d(Tx,Ty) <= r d(x,y)`      |
//! | `BoydWong`           | always                          | `d(Tx,Ty) <= phi(d(x,y))`   |
//! | `SuzukiTheta`        | `theta(r) d(x,Tx) <= d(x,y)`    | `d(Tx,Ty) <= r d(x,y)`      |
//! | `Contractive`        | `x != y`                        | `d(Tx,Ty) < d(x,y)`         |
//! | `SuzukiHalfStrict`   | `d(x,Tx)/2 < d(x,y)`            | `d(Tx,Ty) < d(x,y)`         |
//! | `AbtahiWeak`         | `x != y`, `d(x,Tx) <= d(x,y)`   | `d(Tx,Ty) < d(x,y)`         |
//! | `HalfNonstrict`      | `d(x,Tx)/2 <= d(x,y)`           | `d(Tx,Ty) <= d(x,y)`        |
//! | `EtaNonstrict`       | `eta d(x,Tx) <= d(x,y)`         | `d(Tx,Ty) < d(x,y)`         |
//! | `EtaStrict`          | `eta d(x,Tx) < d(x,y)`          | `d(Tx,Ty) < d(x,y)`         |
//! | `GlobalPsiHalf`      | `d(x,Tx)/2 < d(x,y)`            | `d(Tx,Ty) < psi(d(x,y)) d(x,y)` |
//!
//! Strictness of every inequality is taken literally and decided by the
//! scalars' comparison policy.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::SelfMap;
use crate::scalar::Scalar;
use crate::space::{MetricSpace, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FunctionClass {
    /// `phi(s) < s` for `s > 0`, values in `[0, inf)`.
    BoydWongPhi,
    /// Values in `[0, 1]`; the limit property is taken as declared.
    PsiClass,
    Empirical,
}

pub type Evaluator = Arc<dyn Fn(&Scalar) -> Scalar + Send + Sync>;

/// A named real function with a declared class and codomain.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    class: FunctionClass,
    lower: Option<Scalar>,
    upper: Option<Scalar>,
    eval: Evaluator,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({}, {:?})", self.name, self.class)
    }
}

impl PartialEq for TestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.class == other.class
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        class: FunctionClass,
        lower: Option<Scalar>,
        upper: Option<Scalar>,
        eval: Evaluator,
    ) -> Self {
        TestFunction {
            name: name.into(),
            class,
            lower,
            upper,
            eval,
        }
    }

    /// `phi(s) = k s` with `0 <= k < 1`.
    pub fn linear(k: Scalar) -> Result<Self> {
        if k.total_cmp(&Scalar::zero()).is_lt() || !k.total_cmp(&Scalar::one()).is_lt() {
            return Err(Error::Parameter(format!("linear slope must lie in [0,1), got {k}")));
        }
        let name = format!("linear:{k}");
        Ok(TestFunction::new(
            name,
            FunctionClass::BoydWongPhi,
            Some(Scalar::zero()),
            None,
            Arc::new(move |s| &k * s),
        ))
    }

    /// `phi(s) = s / (1 + s)`.
    pub fn saturating() -> Self {
        TestFunction::new(
            "saturating",
            FunctionClass::BoydWongPhi,
            Some(Scalar::zero()),
            None,
            Arc::new(|s| s / &(s + &Scalar::one())),
        )
    }

    /// `psi(s) = c` with `0 <= c < 1`.
    pub fn psi_constant(c: Scalar) -> Result<Self> {
        if c.total_cmp(&Scalar::zero()).is_lt() || !c.total_cmp(&Scalar::one()).is_lt() {
            return Err(Error::Parameter(format!("constant psi must lie in [0,1), got {c}")));
        }
        let name = format!("const:{c}");
        Ok(TestFunction::new(
            name,
            FunctionClass::PsiClass,
            Some(Scalar::zero()),
            Some(Scalar::one()),
            Arc::new(move |_| c.clone()),
        ))
    }

    /// `psi(s) = 1 / (1 + s)`.
    pub fn psi_inverse() -> Self {
        TestFunction::new(
            "inverse",
            FunctionClass::PsiClass,
            Some(Scalar::zero()),
            Some(Scalar::one()),
            Arc::new(|s| &Scalar::one().with_policy(s.policy()) / &(s + &Scalar::one())),
        )
    }

    /// Parses `linear:<k>`, `saturating`, `const:<c>` or `inverse`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text.split_once(':') {
            Some(("linear", k)) => TestFunction::linear(k.parse()?),
            Some(("const", c)) => TestFunction::psi_constant(c.parse()?),
            None if text == "saturating" => Ok(TestFunction::saturating()),
            None if text == "inverse" => Ok(TestFunction::psi_inverse()),
            _ => Err(Error::Parse(format!("unknown test function {text:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> FunctionClass {
        self.class
    }

    /// Evaluates the function, checking the declared codomain and, for
    /// Boyd–Wong functions, `phi(s) < s` at `s > 0`.
    pub fn evaluate(&self, s: &Scalar) -> Result<Scalar> {
        let v = (self.eval)(s);
        let below = self.lower.as_ref().is_some_and(|lo| v.lt(lo));
        let above = self.upper.as_ref().is_some_and(|hi| v.gt(hi));
        if below || above {
            return Err(Error::TestFunction(format!(
                "{}({s}) = {v} leaves the declared codomain",
                self.name
            )));
        }
        if self.class == FunctionClass::BoydWongPhi && s.gt(&Scalar::zero()) && !v.lt(s) {
            return Err(Error::TestFunction(format!(
                "{}({s}) = {v} breaks phi(s) < s",
                self.name
            )));
        }
        Ok(v)
    }
}

/// The menu of contractive-type conditions.
#[derive(Clone, Debug, PartialEq)]
pub enum ConditionKind {
    BanachContraction { r: Scalar },
    BoydWong { phi: TestFunction },
    SuzukiTheta { r: Scalar },
    Contractive,
    SuzukiHalfStrict,
    AbtahiWeak,
    HalfNonstrict,
    EtaNonstrict { eta: Scalar },
    EtaStrict { eta: Scalar },
    GlobalPsiHalf { psi: TestFunction },
}

fn in_unit_interval(r: &Scalar) -> bool {
    !r.total_cmp(&Scalar::zero()).is_lt() && r.total_cmp(&Scalar::one()).is_lt()
}

impl ConditionKind {
    pub fn banach(r: Scalar) -> Result<Self> {
        ConditionKind::BanachContraction { r }.validated()
    }

    pub fn suzuki_theta(r: Scalar) -> Result<Self> {
        ConditionKind::SuzukiTheta { r }.validated()
    }

    pub fn eta_nonstrict(eta: Scalar) -> Result<Self> {
        ConditionKind::EtaNonstrict { eta }.validated()
    }

    pub fn eta_strict(eta: Scalar) -> Result<Self> {
        ConditionKind::EtaStrict { eta }.validated()
    }

    pub fn boyd_wong(phi: TestFunction) -> Result<Self> {
        ConditionKind::BoydWong { phi }.validated()
    }

    pub fn global_psi_half(psi: TestFunction) -> Result<Self> {
        ConditionKind::GlobalPsiHalf { psi }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Rejects out-of-range parameters.
    pub fn validate(&self) -> Result<()> {
        let half = Scalar::ratio(1, 2);
        let zero = Scalar::zero();
        let bad = |msg: String| Err(Error::Parameter(msg));
        match self {
            ConditionKind::BanachContraction { r } | ConditionKind::SuzukiTheta { r } => {
                if !in_unit_interval(r) {
                    return bad(format!("{}: r must lie in [0,1), got {r}", self.name()));
                }
            }
            ConditionKind::EtaNonstrict { eta } => {
                if !eta.total_cmp(&half).is_gt() {
                    return bad(format!("eta_nonstrict: eta must exceed 1/2, got {eta}"));
                }
            }
            ConditionKind::EtaStrict { eta } => {
                if !eta.total_cmp(&zero).is_gt() || eta.total_cmp(&half).is_gt() {
                    return bad(format!("eta_strict: eta must lie in (0,1/2], got {eta}"));
                }
            }
            ConditionKind::BoydWong { phi } => {
                if phi.class() != FunctionClass::BoydWongPhi {
                    return bad(format!("boyd_wong needs a Boyd-Wong function, got {}", phi.name()));
                }
            }
            ConditionKind::GlobalPsiHalf { psi } => {
                if psi.class() != FunctionClass::PsiClass {
                    return bad(format!("global_psi_half needs a psi-class function, got {}", psi.name()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConditionKind::BanachContraction { .. } => "banach",
            ConditionKind::BoydWong { .. } => "boyd_wong",
            ConditionKind::SuzukiTheta { .. } => "suzuki_theta",
            ConditionKind::Contractive => "contractive",
            ConditionKind::SuzukiHalfStrict => "suzuki_half_strict",
            ConditionKind::AbtahiWeak => "abtahi_weak",
            ConditionKind::HalfNonstrict => "half_nonstrict",
            ConditionKind::EtaNonstrict { .. } => "eta_nonstrict",
            ConditionKind::EtaStrict { .. } => "eta_strict",
            ConditionKind::GlobalPsiHalf { .. } => "global_psi_half",
        }
    }

    pub fn params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match self {
            ConditionKind::BanachContraction { r } | ConditionKind::SuzukiTheta { r } => {
                m.insert("r".to_string(), r.to_string());
            }
            ConditionKind::EtaNonstrict { eta } | ConditionKind::EtaStrict { eta } => {
                m.insert("eta".to_string(), eta.to_string());
            }
            ConditionKind::BoydWong { phi } => {
                m.insert("phi".to_string(), phi.name().to_string());
            }
            ConditionKind::GlobalPsiHalf { psi } => {
                m.insert("psi".to_string(), psi.name().to_string());
            }
            _ => {}
        }
        m
    }

    /// Parses `name` or `name(param)`, e.g. `eta_nonstrict(3/5)`,
    /// `banach(1/2)`, `boyd_wong(linear:1/2)`, `global_psi_half(inverse)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, arg) = match text.split_once('(') {
            Some((name, rest)) => {
                let arg = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in {text:?}")))?;
                (name.trim(), Some(arg.trim()))
            }
            None => (text, None),
        };
        let need = || {
            arg.ok_or_else(|| Error::Parse(format!("condition {name} needs a parameter")))
        };
        let none = |arg: Option<&str>, kind: ConditionKind| match arg {
            None | Some("") => Ok(kind),
            Some(_) => Err(Error::Parse(format!("condition {name} takes no parameter"))),
        };
        match name {
            "banach" => ConditionKind::banach(need()?.parse()?),
            "suzuki_theta" => ConditionKind::suzuki_theta(need()?.parse()?),
            "eta_nonstrict" => ConditionKind::eta_nonstrict(need()?.parse()?),
            "eta_strict" => ConditionKind::eta_strict(need()?.parse()?),
            "boyd_wong" => ConditionKind::boyd_wong(TestFunction::parse(need()?)?),
            "global_psi_half" => ConditionKind::global_psi_half(TestFunction::parse(need()?)?),
            "contractive" => none(arg, ConditionKind::Contractive),
            "suzuki_half_strict" => none(arg, ConditionKind::SuzukiHalfStrict),
            "abtahi_weak" => none(arg, ConditionKind::AbtahiWeak),
            "half_nonstrict" => none(arg, ConditionKind::HalfNonstrict),
            _ => Err(Error::Parse(format!("unknown condition {name:?}"))),
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params();
        match params.values().next() {
            Some(v) => write!(f, "{}({v})", self.name()),
            None => write!(f, "{}", self.name()),
        }
    }
}

/// `theta: [0,1) -> (1/2, 1]`:
/// `1` up to the golden ratio conjugate, `(1-r)/r^2` up to `1/sqrt 2`,
/// `1/(1+r)` beyond.
///
/// Exact inputs never touch the irrational breakpoints: for `r >= 0`,
/// `r <= (sqrt5-1)/2` iff `r^2 + r <= 1`, and `r <= 1/sqrt2` iff `r^2 <= 1/2`.
pub fn theta(r: &Scalar) -> Result<Scalar> {
    if !in_unit_interval(r) {
        return Err(Error::Domain(format!("theta is defined on [0,1), got {r}")));
    }
    let one = Scalar::one().with_policy(r.policy());
    let (first, second) = if r.is_exact() {
        let sq = r * r;
        (
            !(&sq + r).total_cmp(&Scalar::one()).is_gt(),
            !sq.total_cmp(&Scalar::ratio(1, 2)).is_gt(),
        )
    } else {
        let v = r.to_f64();
        (
            v <= (5f64.sqrt() - 1.0) / 2.0,
            v <= std::f64::consts::FRAC_1_SQRT_2,
        )
    };
    Ok(if first {
        one
    } else if second {
        &(&one - r) / &(r * r)
    } else {
        &one / &(&one + r)
    })
}

/// Distances at one ordered pair, as consumed by [`evaluate_pair`].
#[derive(Clone, Debug)]
pub struct PairDistances {
    pub same_point: bool,
    /// `d(x, y)`
    pub d_xy: Scalar,
    /// `d(x, Tx)`
    pub d_x_tx: Scalar,
    /// `d(Tx, Ty)`
    pub d_tx_ty: Scalar,
}

#[derive(Clone, Debug)]
pub struct PairEvaluation {
    /// `None` for unconditional conditions.
    pub premise: Option<(Scalar, Scalar)>,
    pub premise_holds: bool,
    pub conclusion: (Scalar, Scalar),
    pub conclusion_holds: bool,
}

impl PairEvaluation {
    pub fn violated(&self) -> bool {
        self.premise_holds && !self.conclusion_holds
    }
}

/// Evaluates the premise and conclusion of `condition` at one pair.
pub fn evaluate_pair(condition: &ConditionKind, d: &PairDistances) -> Result<PairEvaluation> {
    let half = Scalar::ratio(1, 2);
    let zero = Scalar::zero();
    let PairDistances {
        same_point,
        d_xy,
        d_x_tx,
        d_tx_ty,
    } = d;

    let scaled_gap = |factor: &Scalar| (factor * d_x_tx, d_xy.clone());

    let (premise, premise_holds) = match condition {
        ConditionKind::BanachContraction { .. } | ConditionKind::BoydWong { .. } => (None, true),
        ConditionKind::SuzukiTheta { r } => {
            let (l, rr) = scaled_gap(&theta(r)?);
            let holds = l.le(&rr);
            (Some((l, rr)), holds)
        }
        ConditionKind::Contractive => (Some((zero.clone(), d_xy.clone())), !same_point),
        ConditionKind::SuzukiHalfStrict | ConditionKind::GlobalPsiHalf { .. } => {
            let (l, rr) = scaled_gap(&half);
            let holds = l.lt(&rr);
            (Some((l, rr)), holds)
        }
        ConditionKind::AbtahiWeak => {
            let holds = !same_point && d_x_tx.le(d_xy);
            (Some((d_x_tx.clone(), d_xy.clone())), holds)
        }
        ConditionKind::HalfNonstrict => {
            let (l, rr) = scaled_gap(&half);
            let holds = l.le(&rr);
            (Some((l, rr)), holds)
        }
        ConditionKind::EtaNonstrict { eta } => {
            let (l, rr) = scaled_gap(eta);
            let holds = l.le(&rr);
            (Some((l, rr)), holds)
        }
        ConditionKind::EtaStrict { eta } => {
            let (l, rr) = scaled_gap(eta);
            let holds = l.lt(&rr);
            (Some((l, rr)), holds)
        }
    };

    let (rhs, strict) = match condition {
        ConditionKind::BanachContraction { r } | ConditionKind::SuzukiTheta { r } => (r * d_xy, false),
        ConditionKind::BoydWong { phi } => (phi.evaluate(d_xy)?, false),
        ConditionKind::HalfNonstrict => (d_xy.clone(), false),
        ConditionKind::GlobalPsiHalf { psi } => {
            if premise_holds {
                (&psi.evaluate(d_xy)? * d_xy, true)
            } else {
                (d_xy.clone(), true)
            }
        }
        ConditionKind::Contractive
        | ConditionKind::SuzukiHalfStrict
        | ConditionKind::AbtahiWeak
        | ConditionKind::EtaNonstrict { .. }
        | ConditionKind::EtaStrict { .. } => (d_xy.clone(), true),
    };
    let conclusion_holds = if strict { d_tx_ty.lt(&rhs) } else { d_tx_ty.le(&rhs) };

    Ok(PairEvaluation {
        premise,
        premise_holds,
        conclusion: (d_tx_ty.clone(), rhs),
        conclusion_holds,
    })
}

/// How many pairs [`certify`] checks and how they are chosen.
#[derive(Clone, Debug)]
pub enum Scope {
    /// Every ordered pair of the certification domain.
    Exhaustive,
    /// `count` pairs drawn from the domain with a seeded generator.
    Sampled { seed: u64, count: usize },
    /// An explicit list of pairs (used to replay witnesses).
    Pairs(Vec<(Point, Point)>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Satisfied,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertScope {
    Exhaustive { pairs: usize },
    Sampled { seed: u64, pairs: usize },
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
    pub premise: Option<(Scalar, Scalar)>,
    pub conclusion: (Scalar, Scalar),
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub condition: ConditionKind,
    pub verdict: Verdict,
    pub scope: CertScope,
    pub witness: Option<Witness>,
}

impl Certificate {
    pub fn satisfied(&self) -> bool {
        self.verdict == Verdict::Satisfied
    }

    pub fn pairs_checked(&self) -> usize {
        match self.scope {
            CertScope::Exhaustive { pairs } | CertScope::Sampled { pairs, .. } => pairs,
        }
    }

    pub fn report(&self, space: &MetricSpace) -> CertificateReport {
        let (scope, seed) = match self.scope {
            CertScope::Exhaustive { .. } => ("exhaustive", None),
            CertScope::Sampled { seed, .. } => ("sampled", Some(seed)),
        };
        CertificateReport {
            condition: self.condition.name().to_string(),
            params: self.condition.params(),
            verdict: self.verdict,
            scope: scope.to_string(),
            seed,
            pairs_checked: self.pairs_checked(),
            witness: self.witness.as_ref().map(|w| WitnessReport {
                x: space.point_label(&w.x),
                y: space.point_label(&w.y),
                premise_lhs: w.premise.as_ref().map(|p| p.0.to_string()),
                premise_rhs: w.premise.as_ref().map(|p| p.1.to_string()),
                conclusion_lhs: w.conclusion.0.to_string(),
                conclusion_rhs: w.conclusion.1.to_string(),
            }),
        }
    }
}

/// JSON form of a [`Certificate`].
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub condition: String,
    pub params: BTreeMap<String, String>,
    pub verdict: Verdict,
    pub scope: String,
    pub seed: Option<u64>,
    pub pairs_checked: usize,
    pub witness: Option<WitnessReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub x: String,
    pub y: String,
    pub premise_lhs: Option<String>,
    pub premise_rhs: Option<String>,
    pub conclusion_lhs: String,
    pub conclusion_rhs: String,
}

/// Images and self-gaps of the domain points, computed once per certify.
struct DomainImages {
    points: Vec<Point>,
    images: Vec<Point>,
    self_gaps: Vec<Scalar>,
}

impl DomainImages {
    fn new(space: &MetricSpace, map: &SelfMap, points: Vec<Point>) -> Result<Self> {
        let mut images = Vec::with_capacity(points.len());
        let mut self_gaps = Vec::with_capacity(points.len());
        for p in &points {
            let tp = map.apply(p)?;
            self_gaps.push(space.distance(p, &tp)?);
            images.push(tp);
        }
        Ok(DomainImages {
            points,
            images,
            self_gaps,
        })
    }

    fn evaluate(
        &self,
        space: &MetricSpace,
        condition: &ConditionKind,
        i: usize,
        j: usize,
    ) -> Result<PairEvaluation> {
        let d = PairDistances {
            same_point: i == j,
            d_xy: space.distance(&self.points[i], &self.points[j])?,
            d_x_tx: self.self_gaps[i].clone(),
            d_tx_ty: space.distance(&self.images[i], &self.images[j])?,
        };
        evaluate_pair(condition, &d)
    }
}

fn evaluate_points(
    space: &MetricSpace,
    map: &SelfMap,
    condition: &ConditionKind,
    x: &Point,
    y: &Point,
) -> Result<PairEvaluation> {
    let tx = map.apply(x)?;
    let ty = map.apply(y)?;
    let d = PairDistances {
        same_point: x == y,
        d_xy: space.distance(x, y)?,
        d_x_tx: space.distance(x, &tx)?,
        d_tx_ty: space.distance(&tx, &ty)?,
    };
    evaluate_pair(condition, &d)
}

/// Maximum redraws when a sampled point falls outside the map's domain.
const MAX_REDRAWS: usize = 10_000;

/// Draws a point of the certification domain.
pub fn draw_domain_point(
    space: &MetricSpace,
    map: &SelfMap,
    domain: Option<&[Point]>,
    rng: &mut ChaCha8Rng,
) -> Result<Point> {
    if let Some(d) = domain {
        if d.is_empty() {
            return Err(Error::Degenerate("empty certification domain".into()));
        }
        return Ok(d[rng.random_range(0..d.len())].clone());
    }
    for _ in 0..MAX_REDRAWS {
        let p = space.sample_point(rng);
        match map.apply(&p) {
            Ok(_) => return Ok(p),
            Err(Error::Boundary(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Domain(format!(
        "no point of the certification domain of {:?} found in {MAX_REDRAWS} draws",
        map.label()
    )))
}

/// Checks `condition` for `map` on `space` over the pairs selected by `scope`.
///
/// Exhaustive scans run rows in parallel; the reported witness is always the
/// first violating pair in row-major order of the certification domain.
/// A test-function error aborts the certificate.
pub fn certify(
    space: &MetricSpace,
    map: &SelfMap,
    condition: &ConditionKind,
    scope: &Scope,
) -> Result<Certificate> {
    condition.validate()?;
    map.check_against(space)?;
    let violated = |witness: Witness, scope: CertScope| Certificate {
        condition: condition.clone(),
        verdict: Verdict::Violated,
        scope,
        witness: Some(witness),
    };
    let satisfied = |scope: CertScope| Certificate {
        condition: condition.clone(),
        verdict: Verdict::Satisfied,
        scope,
        witness: None,
    };

    match scope {
        Scope::Exhaustive => {
            let points = map.domain(space).ok_or_else(|| {
                Error::Domain(format!(
                    "{:?} has no finite certification domain; use a sampled scope",
                    map.label()
                ))
            })?;
            let imgs = DomainImages::new(space, map, points)?;
            let n = imgs.points.len();
            let first = (0..n).into_par_iter().find_map_first(|i| {
                for j in 0..n {
                    match imgs.evaluate(space, condition, i, j) {
                        Ok(e) if e.violated() => return Some(Ok((i, j, e))),
                        Ok(_) => {}
                        Err(err) => return Some(Err(err)),
                    }
                }
                None
            });
            match first {
                None => Ok(satisfied(CertScope::Exhaustive { pairs: n * n })),
                Some(Err(e)) => Err(e),
                Some(Ok((i, j, e))) => Ok(violated(
                    Witness {
                        x: imgs.points[i].clone(),
                        y: imgs.points[j].clone(),
                        premise: e.premise,
                        conclusion: e.conclusion,
                    },
                    CertScope::Exhaustive { pairs: i * n + j + 1 },
                )),
            }
        }
        Scope::Sampled { seed, count } => {
            if *count == 0 {
                return Err(Error::Parameter("sampled scope needs at least one pair".into()));
            }
            let domain = map.domain(space);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for k in 0..*count {
                let x = draw_domain_point(space, map, domain.as_deref(), &mut rng)?;
                let y = draw_domain_point(space, map, domain.as_deref(), &mut rng)?;
                let e = evaluate_points(space, map, condition, &x, &y)?;
                if e.violated() {
                    return Ok(violated(
                        Witness {
                            x,
                            y,
                            premise: e.premise,
                            conclusion: e.conclusion,
                        },
                        CertScope::Sampled {
                            seed: *seed,
                            pairs: k + 1,
                        },
                    ));
                }
            }
            Ok(satisfied(CertScope::Sampled {
                seed: *seed,
                pairs: *count,
            }))
        }
        Scope::Pairs(pairs) => {
            for (k, (x, y)) in pairs.iter().enumerate() {
                let e = evaluate_points(space, map, condition, x, y)?;
                if e.violated() {
                    return Ok(violated(
                        Witness {
                            x: x.clone(),
                            y: y.clone(),
                            premise: e.premise,
                            conclusion: e.conclusion,
                        },
                        CertScope::Exhaustive { pairs: k + 1 },
                    ));
                }
            }
            Ok(satisfied(CertScope::Exhaustive { pairs: pairs.len() }))
        }
    }
}

/// Smallest `r` with `d(Tx,Ty) <= r d(x,y)` over the finite certification
/// domain: the maximum of `d(Tx,Ty)/d(x,y)` over pairs with `d(x,y) > 0`.
pub fn minimal_lipschitz(space: &MetricSpace, map: &SelfMap) -> Result<Scalar> {
    map.check_against(space)?;
    let points = map
        .domain(space)
        .ok_or_else(|| Error::Degenerate("minimal_lipschitz needs a finite domain".into()))?;
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "minimal_lipschitz needs at least two domain points, got {}",
            points.len()
        )));
    }
    let imgs = DomainImages::new(space, map, points)?;
    let n = imgs.points.len();
    let row_max: Vec<Option<Scalar>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<Scalar>> {
            let mut best: Option<Scalar> = None;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d_xy = space.distance(&imgs.points[i], &imgs.points[j])?;
                let Some(ratio) = space
                    .distance(&imgs.images[i], &imgs.images[j])?
                    .checked_div(&d_xy)
                else {
                    continue;
                };
                if best.as_ref().is_none_or(|b| ratio.total_cmp(b).is_gt()) {
                    best = Some(ratio);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(row_max
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.total_cmp(&a).is_gt() { b } else { a })
        .unwrap_or_else(Scalar::zero))
}

fn chain_rank(c: &ConditionKind) -> Option<u8> {
    match c {
        ConditionKind::BanachContraction { .. } => Some(0),
        ConditionKind::Contractive => Some(1),
        ConditionKind::SuzukiHalfStrict => Some(2),
        ConditionKind::AbtahiWeak => Some(3),
        _ => None,
    }
}

/// Whether `a` provably implies `b`, per the fixed chain
/// `BanachContraction(r) => Contractive => SuzukiHalfStrict => AbtahiWeak`,
/// `EtaStrict(eta) => EtaStrict(eta')` for `eta <= eta'`, and reflexivity.
pub fn implication_expected(a: &ConditionKind, b: &ConditionKind) -> bool {
    if a == b {
        return true;
    }
    match (a, b) {
        (ConditionKind::EtaStrict { eta: e1 }, ConditionKind::EtaStrict { eta: e2 }) => {
            !e1.total_cmp(e2).is_gt()
        }
        (ConditionKind::BanachContraction { .. }, ConditionKind::BanachContraction { .. }) => false,
        _ => match (chain_rank(a), chain_rank(b)) {
            (Some(x), Some(y)) => x < y,
            _ => false,
        },
    }
}
