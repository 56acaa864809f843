//! Exact reconstructions of the extremal constructions, plus two simple
//! rule maps on the line.
//!
//! * [`suzuki_space`]: a complete space `{0, 1, u_0, u_1, ...}` with
//!   `u_n = (1-r)(-r)^n` and the fixed-point-free shift `0 -> 1 -> u_0 -> u_1 -> ...`.
//!   It satisfies the `eta`-premise condition for any `eta > 1/2`, so the
//!   constant 1/2 cannot be raised.
//! * [`dyadic_probe_space`] and [`probe_map`]: dyadic rationals of `[0,1]`,
//!   incomplete along `u_n = (1 - 4^-(n+1))/3 -> 1/3`, with the map that
//!   sends `x` to the first `u_m` with `rho(u_m) < rho(x)/7`.
//! * [`divergent_contractive_map`]: `x -> x + 1/x` on `[1, inf)`.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::map::SelfMap;
use crate::scalar::{parse_rational, Scalar};
use crate::space::{MetricSpace, Point};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Clone, Debug)]
pub struct SuzukiSpaceParams {
    pub eta: BigRational,
    pub r: BigRational,
    /// Index of the last materialized `u_n`.
    pub n: usize,
}

impl SuzukiSpaceParams {
    /// `u_n = (1 - r)(-r)^n`.
    pub fn u(&self, n: usize) -> BigRational {
        (BigRational::one() - &self.r) * num_traits::pow(-self.r.clone(), n)
    }
}

/// The shift space together with its parameters.
#[derive(Clone, Debug)]
pub struct SuzukiSpace {
    pub params: SuzukiSpaceParams,
    pub space: MetricSpace,
    pub map: SelfMap,
}

impl SuzukiSpace {
    /// Carrier index of `u_n`.
    pub fn u_index(&self, n: usize) -> Point {
        Point::Id(n + 2)
    }

    pub fn zero(&self) -> Point {
        Point::Id(0)
    }

    pub fn one(&self) -> Point {
        Point::Id(1)
    }
}

/// Smallest grid rational `r < 1` with `(1+r)^-1 < eta` and `r^2 > 1/2`.
///
/// The grid starts at 1/16 and is refined by factors of 4 until it has a
/// point in the admissible interval.
pub fn choose_r(eta: &BigRational) -> Result<BigRational> {
    let half = rat(1, 2);
    if *eta <= half {
        return Err(Error::Parameter(format!(
            "eta must exceed 1/2, got {}",
            crate::scalar::format_rational(eta)
        )));
    }
    let lower = ((BigRational::one() - eta) / eta).max(BigRational::zero());
    let mut grid = BigInt::from(16);
    for _ in 0..40 {
        let g = BigRational::from_integer(grid.clone());
        let mut k: BigInt = (&lower * &g).floor().to_integer() + BigInt::one();
        loop {
            let r = BigRational::new(k.clone(), grid.clone());
            if &r * &r > half {
                break;
            }
            k += 1;
        }
        if k < grid {
            return Ok(BigRational::new(k, grid));
        }
        grid *= 4;
    }
    Err(Error::Parameter("no admissible r found; eta is too close to 1/2".into()))
}

/// Shift space with `r` chosen by [`choose_r`].
pub fn suzuki_space(eta: &BigRational, n: usize) -> Result<SuzukiSpace> {
    let r = choose_r(eta)?;
    suzuki_space_with_r(eta, &r, n)
}

/// Shift space `{0, 1, u_0, ..., u_N}` for an explicit `r`.
///
/// The map is `0 -> 1`, `1 -> u_0`, `u_n -> u_{n+1}`; `u_N` is carried but
/// kept out of the certification domain.
pub fn suzuki_space_with_r(eta: &BigRational, r: &BigRational, n: usize) -> Result<SuzukiSpace> {
    let half = rat(1, 2);
    if *eta <= half {
        return Err(Error::Parameter(format!(
            "eta must exceed 1/2, got {}",
            crate::scalar::format_rational(eta)
        )));
    }
    if n < 2 {
        return Err(Error::Parameter(format!("truncation N must be at least 2, got {n}")));
    }
    if !(*r < BigRational::one() && r * r > half) {
        return Err(Error::Parameter(format!(
            "r must lie in (1/sqrt 2, 1), got {}",
            crate::scalar::format_rational(r)
        )));
    }
    if (BigRational::one() + r).recip() >= *eta {
        return Err(Error::Parameter(format!(
            "(1+r)^-1 must be below eta; r = {}",
            crate::scalar::format_rational(r)
        )));
    }
    let params = SuzukiSpaceParams {
        eta: eta.clone(),
        r: r.clone(),
        n,
    };
    let mut ids = vec!["0".to_string(), "1".to_string()];
    let mut coords = vec![Scalar::zero(), Scalar::one()];
    for k in 0..=n {
        ids.push(format!("u{k}"));
        coords.push(Scalar::exact(params.u(k)));
    }
    let label = format!(
        "suzuki(eta={},N={n},r={})",
        crate::scalar::format_rational(eta),
        crate::scalar::format_rational(r)
    );
    let space = MetricSpace::line_embedded(label, ids, coords)?;
    let mut targets = vec![Some(1), Some(2)];
    for k in 0..n {
        targets.push(Some(k + 3));
    }
    targets.push(None);
    let map = SelfMap::partial_table("shift", targets, format!("{{0, 1, u0..u{}}}", n - 1));
    Ok(SuzukiSpace { params, space, map })
}

/// Dyadic rationals of `[0,1]` with denominator at most `2^B`.
#[derive(Clone, Debug)]
pub struct DyadicProbeSpace {
    bound: u32,
    anchor: BigRational,
    u: Vec<BigRational>,
    u_index: HashMap<BigRational, usize>,
}

/// Builds the probe space; `u_n` is materialized while `4^(n+1) <= 2^B`.
pub fn dyadic_probe_space(bound: u32) -> Result<DyadicProbeSpace> {
    if bound < 4 {
        return Err(Error::Parameter(format!("dyadic bound B must be at least 4, got {bound}")));
    }
    let anchor = rat(1, 3);
    let count = (bound / 2) as usize;
    let u: Vec<BigRational> = (0..count)
        .map(|n| {
            let pow = BigRational::from_integer(num_traits::pow(BigInt::from(4), n + 1));
            (BigRational::one() - pow.recip()) / BigRational::from_integer(BigInt::from(3))
        })
        .collect();
    let u_index = u.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    Ok(DyadicProbeSpace {
        bound,
        anchor,
        u,
        u_index,
    })
}

impl DyadicProbeSpace {
    pub fn bound(&self) -> u32 {
        self.bound
    }

    /// The missing limit `1/3`.
    pub fn anchor(&self) -> &BigRational {
        &self.anchor
    }

    pub fn u_sequence(&self) -> &[BigRational] {
        &self.u
    }

    pub fn u(&self, n: usize) -> Option<&BigRational> {
        self.u.get(n)
    }

    /// Index `k` with `x = u_k`.
    pub fn u_position(&self, x: &BigRational) -> Option<usize> {
        self.u_index.get(x).copied()
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        dyadic_member(x, self.bound)
    }

    /// `rho(x) = |x - 1/3|`, the limit of `d(x, u_n)`.
    pub fn rho(&self, x: &BigRational) -> BigRational {
        (x - &self.anchor).abs()
    }

    pub fn metric_space(&self) -> MetricSpace {
        let bound = self.bound;
        let u = self.u.clone();
        MetricSpace::line_lazy(
            format!("dyadic_probe(B={bound})"),
            format!("dyadic rationals in [0,1] with denominator <= 2^{bound}"),
            Arc::new(move |x: &Scalar| x.as_rational().is_some_and(|r| dyadic_member(r, bound))),
            Arc::new(move |rng| {
                // a quarter of the draws land on the u-sequence
                if rng.random_range(0..4) == 0 {
                    Scalar::exact(u[rng.random_range(0..u.len())].clone())
                } else {
                    let j = rng.random_range(0..=bound.min(126));
                    let den: u128 = 1u128 << j;
                    let num: u128 = rng.random_range(0..=den);
                    Scalar::exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
                }
            }),
        )
    }
}

fn dyadic_member(x: &BigRational, bound: u32) -> bool {
    if x.is_negative() || *x > BigRational::one() {
        return false;
    }
    let den = x.denom();
    let bits = den.bits();
    // a power of two has exactly one set bit
    den.trailing_zeros() == Some(bits.saturating_sub(1)) && bits - 1 <= u64::from(bound)
}

/// The fixed-point-free map: `x -> u_m` for the least `m` with
/// `rho(u_m) < rho(x)/7`, and `m > k` when `x = u_k`.
///
/// Points needing an unmaterialized `u_m` lie outside the certification
/// domain and raise a boundary error.
pub fn probe_map(space: &DyadicProbeSpace) -> SelfMap {
    let probe = space.clone();
    SelfMap::rule(
        "probe",
        format!(
            "carrier points whose target index is below {}",
            probe.u_sequence().len()
        ),
        Arc::new(move |p: &Point| {
            let x = match p {
                Point::At(s) => s
                    .as_rational()
                    .filter(|r| probe.contains(r))
                    .ok_or_else(|| Error::Domain(format!("{s} is not a dyadic carrier point")))?,
                Point::Id(_) => return Err(Error::Domain("dyadic points are coordinates".into())),
            };
            let target = probe.rho(x) / BigRational::from_integer(BigInt::from(7));
            let start = probe.u_position(x).map_or(0, |k| k + 1);
            (start..probe.u.len())
                .find(|&m| probe.rho(&probe.u[m]) < target)
                .map(|m| Point::At(Scalar::exact(probe.u[m].clone())))
                .ok_or_else(|| {
                    Error::Boundary(format!(
                        "image of {} needs a u-term beyond u{}; raise B",
                        crate::scalar::format_rational(x),
                        probe.u.len() - 1
                    ))
                })
        }),
    )
}

/// `x -> x + 1/x` on the line carrier `[1, inf)`.
pub fn divergent_contractive_map() -> (MetricSpace, SelfMap) {
    let space = MetricSpace::line_lazy(
        "divergent",
        "[1, inf); samples drawn from rationals in [1, 100]",
        Arc::new(|x: &Scalar| x.ge(&Scalar::one()) && x.to_f64().is_finite()),
        Arc::new(|rng| {
            let den: i64 = rng.random_range(1..=1000);
            let num: i64 = rng.random_range(den..=100 * den);
            Scalar::ratio(num, den)
        }),
    );
    let map = SelfMap::rule(
        "x+1/x",
        "[1, inf)",
        Arc::new(|p: &Point| match p {
            Point::At(x) if x.ge(&Scalar::one()) => {
                let inv = x.recip().expect("x >= 1");
                Ok(Point::At(x + &inv))
            }
            _ => Err(Error::Domain(format!("{p} is not in [1, inf)"))),
        }),
    );
    (space, map)
}

/// `x -> x/2` on the rationals (floats accepted too).
pub fn halving_map() -> (MetricSpace, SelfMap) {
    let space = MetricSpace::line_lazy(
        "halving",
        "the line; samples drawn from rationals in [-1, 1]",
        Arc::new(|x: &Scalar| x.to_f64().is_finite()),
        Arc::new(|rng| {
            let den: i64 = rng.random_range(1..=1000);
            Scalar::ratio(rng.random_range(-den..=den), den)
        }),
    );
    let map = SelfMap::rule(
        "x/2",
        "the line",
        Arc::new(|p: &Point| match p {
            Point::At(x) => Ok(Point::At(x / &Scalar::integer(2))),
            _ => Err(Error::Domain("line point expected".into())),
        }),
    );
    (space, map)
}

/// A named gallery construction, as addressed from the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum GalleryName {
    Suzuki {
        eta: BigRational,
        n: usize,
        r: Option<BigRational>,
    },
    DyadicProbe {
        bound: u32,
    },
    Divergent,
    Halving,
}

/// A built gallery construction.
#[derive(Clone, Debug)]
pub struct GalleryBuild {
    pub space: MetricSpace,
    pub map: SelfMap,
    pub suzuki: Option<SuzukiSpace>,
    pub dyadic: Option<DyadicProbeSpace>,
}

impl GalleryName {
    /// Parses `suzuki(eta=3/5,N=40)`, `suzuki(eta=3/5,N=40,r=3/4)`,
    /// `dyadic_probe(B=64)`, `divergent` or `halving`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.split_once('(') {
            Some((n, rest)) => (
                n.trim(),
                rest.strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in {text:?}")))?,
            ),
            None => (text, ""),
        };
        let mut kv = HashMap::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take = |kv: &mut HashMap<String, String>, key: &str| kv.remove(key);
        let parsed = match name {
            "suzuki" => {
                let eta = take(&mut kv, "eta").ok_or_else(|| Error::Parse("suzuki needs eta=".into()))?;
                let n = take(&mut kv, "N").unwrap_or_else(|| "40".into());
                let r = take(&mut kv, "r");
                GalleryName::Suzuki {
                    eta: parse_rational(&eta)?,
                    n: n.parse().map_err(|_| Error::Parse(format!("bad N {n:?}")))?,
                    r: r.map(|r| parse_rational(&r)).transpose()?,
                }
            }
            "dyadic_probe" => {
                let b = take(&mut kv, "B").unwrap_or_else(|| "64".into());
                GalleryName::DyadicProbe {
                    bound: b.parse().map_err(|_| Error::Parse(format!("bad B {b:?}")))?,
                }
            }
            "divergent" => GalleryName::Divergent,
            "halving" => GalleryName::Halving,
            _ => return Err(Error::Parse(format!("unknown gallery construction {name:?}"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Parse(format!("unknown parameter {k:?} for {name}")));
        }
        Ok(parsed)
    }

    pub fn build(&self) -> Result<GalleryBuild> {
        Ok(match self {
            GalleryName::Suzuki { eta, n, r } => {
                let s = match r {
                    Some(r) => suzuki_space_with_r(eta, r, *n)?,
                    None => suzuki_space(eta, *n)?,
                };
                GalleryBuild {
                    space: s.space.clone(),
                    map: s.map.clone(),
                    suzuki: Some(s),
                    dyadic: None,
                }
            }
            GalleryName::DyadicProbe { bound } => {
                let d = dyadic_probe_space(*bound)?;
                GalleryBuild {
                    space: d.metric_space(),
                    map: probe_map(&d),
                    suzuki: None,
                    dyadic: Some(d),
                }
            }
            GalleryName::Divergent => {
                let (space, map) = divergent_contractive_map();
                GalleryBuild {
                    space,
                    map,
                    suzuki: None,
                    dyadic: None,
                }
            }
            GalleryName::Halving => {
                let (space, map) = halving_map();
                GalleryBuild {
                    space,
                    map,
                    suzuki: None,
                    dyadic: None,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{certify, ConditionKind, Scope};

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn eta_three_fifths_picks_three_quarters() {
        assert_eq!(choose_r(&q("3/5")).unwrap(), q("3/4"));
        // eta large: only r^2 > 1/2 binds
        assert_eq!(choose_r(&q("5")).unwrap(), q("3/4"));
        assert!(choose_r(&q("1/2")).is_err());
    }

    #[test]
    fn chosen_r_is_admissible_near_one_half() {
        for eta in ["51/100", "501/1000", "2/3", "7/10"] {
            let eta = q(eta);
            let r = choose_r(&eta).unwrap();
            assert!(r < BigRational::one());
            assert!(&r * &r > q("1/2"));
            assert!((BigRational::one() + &r).recip() < eta);
        }
    }

    #[test]
    fn u_terms_for_three_quarters() {
        let s = suzuki_space(&q("3/5"), 10).unwrap();
        assert_eq!(s.params.u(0), q("1/4"));
        assert_eq!(s.params.u(1), q("-3/16"));
        assert_eq!(s.params.u(2), q("9/64"));
    }

    #[test]
    fn shift_map_layout() {
        let s = suzuki_space(&q("3/5"), 5).unwrap();
        assert_eq!(s.map.apply(&s.zero()).unwrap(), s.one());
        assert_eq!(s.map.apply(&s.one()).unwrap(), s.u_index(0));
        assert_eq!(s.map.apply(&s.u_index(3)).unwrap(), s.u_index(4));
        assert!(matches!(s.map.apply(&s.u_index(5)), Err(Error::Boundary(_))));
        assert_eq!(s.space.len(), Some(8));
    }

    #[test]
    fn suzuki_rejects_bad_parameters() {
        assert!(suzuki_space(&q("1/2"), 10).is_err());
        assert!(suzuki_space(&q("3/5"), 1).is_err());
        assert!(suzuki_space_with_r(&q("3/5"), &q("7/10"), 10).is_err());
        assert!(suzuki_space_with_r(&q("51/100"), &q("3/4"), 10).is_err());
    }

    #[test]
    fn dyadic_u_terms_and_rho() {
        let d = dyadic_probe_space(64).unwrap();
        assert_eq!(d.u_sequence().len(), 32);
        assert_eq!(d.u(0).unwrap(), &q("1/4"));
        assert_eq!(d.u(1).unwrap(), &q("5/16"));
        assert_eq!(d.rho(d.u(1).unwrap()), q("1/48"));
        assert_eq!(d.rho(&BigRational::one()), q("2/3"));
        assert!(!d.contains(&q("1/3")));
        assert!(d.contains(&q("3/1024")));
        assert!(!d.contains(&q("3/10")));
        assert!(!d.contains(&q("5/4")));
        assert!(dyadic_probe_space(3).is_err());
    }

    #[test]
    fn probe_map_examples() {
        let d = dyadic_probe_space(64).unwrap();
        let t = probe_map(&d);
        let at = |s: &str| Point::At(Scalar::exact(q(s)));
        assert_eq!(t.apply(&at("1")).unwrap(), at("1/4"));
        assert_eq!(
            t.apply(&at("1/4")).unwrap(),
            Point::At(Scalar::exact(d.u(2).unwrap().clone()))
        );
        assert_eq!(t.apply(&at("0")).unwrap(), at("5/16"));
        // u30 and u31 need targets beyond the materialized sequence
        let last = Point::At(Scalar::exact(d.u(31).unwrap().clone()));
        assert!(matches!(t.apply(&last), Err(Error::Boundary(_))));
        assert!(t.apply(&at("1/3")).is_err());
    }

    #[test]
    fn divergent_orbit_and_contractivity_sample() {
        let (space, map) = divergent_contractive_map();
        let mut x = Point::At(Scalar::one());
        let mut seen = vec![];
        for _ in 0..3 {
            x = map.apply(&x).unwrap();
            seen.push(x.clone());
        }
        let at = |s: &str| Point::At(s.parse().unwrap());
        assert_eq!(seen, vec![at("2"), at("5/2"), at("29/10")]);
        let c = certify(&space, &map, &ConditionKind::Contractive, &Scope::Sampled { seed: 3, count: 500 })
            .unwrap();
        assert!(c.satisfied());
    }

    #[test]
    fn gallery_names_parse() {
        assert_eq!(
            GalleryName::parse("suzuki(eta=3/5,N=40)").unwrap(),
            GalleryName::Suzuki { eta: q("3/5"), n: 40, r: None }
        );
        assert_eq!(
            GalleryName::parse("dyadic_probe(B=64)").unwrap(),
            GalleryName::DyadicProbe { bound: 64 }
        );
        assert_eq!(GalleryName::parse("divergent").unwrap(), GalleryName::Divergent);
        assert!(GalleryName::parse("connell").is_err());
        assert!(GalleryName::parse("suzuki(eta=3/5,M=4)").is_err());
        assert!(GalleryName::parse("suzuki(N=4)").is_err());
    }
}
