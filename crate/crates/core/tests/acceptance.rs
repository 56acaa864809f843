//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its runtime; the test fails if any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use fixlab::conditions::{certify, implication_expected, minimal_lipschitz, theta, ConditionKind, Scope};
use fixlab::enumerator::{enumerate_self_maps, fixed_point_census, implication_audit, random_finite_metric};
use fixlab::gallery::{dyadic_probe_space, halving_map, divergent_contractive_map, probe_map, suzuki_space, suzuki_space_with_r};
use fixlab::map::SelfMap;
use fixlab::orbit::{extract_psi, iterate, replay_witness, sequential_diagnostic, DiagnosticThresholds, Termination};
use fixlab::space::verify_metric_axioms;
use fixlab::{MetricSpace, Point, Policy, Scalar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn at(p: &Point) -> BigRational {
    match p {
        Point::At(v) => v.as_rational().expect("exact point").clone(),
        Point::Id(_) => panic!("line point expected"),
    }
}

// Independent branch formulas for theta.
fn theta_branches(r: f64) -> (f64, f64, f64) {
    (1.0, (1.0 - r) / (r * r), 1.0 / (1.0 + r))
}

fn criterion_theta() -> Check {
    let zero = theta(&Scalar::zero()).map_err(|e| e.to_string())?;
    ensure(zero == Scalar::one(), || format!("theta(0) = {zero}"))?;
    let t = theta(&Scalar::ratio(3, 4)).map_err(|e| e.to_string())?;
    ensure(t == Scalar::ratio(4, 7) && t.is_exact(), || format!("theta(3/4) = {t}"))?;

    let policy = Policy::epsilon(1e-12).unwrap();
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    // oracle: r^2 = 1 - r at the golden point, so the middle branch is 1 there
    ensure((golden * golden - (1.0 - golden)).abs() < 1e-15, || "golden oracle".into())?;
    let root_half = 0.5f64.sqrt();
    let at_root_half = 2.0 - 2f64.sqrt();
    for (point, target) in [(golden, 1.0), (root_half, at_root_half)] {
        for r in [point.next_down(), point, point.next_up()] {
            let v = theta(&Scalar::float(r, policy)).map_err(|e| e.to_string())?.to_f64();
            ensure((v - target).abs() <= 1e-12, || format!("theta({r}) = {v}, want {target}"))?;
        }
    }
    let (_, b2, b3) = theta_branches(root_half);
    ensure((b2 - b3).abs() <= 1e-12, || format!("branches disagree at 1/sqrt2: {b2} vs {b3}"))?;

    let half = Scalar::ratio(1, 2);
    for k in 0..10_000i64 {
        let r = Scalar::ratio(k, 10_000);
        let v = theta(&r).map_err(|e| e.to_string())?;
        ensure(v.gt(&half) && v.le(&Scalar::one()), || format!("theta({r}) = {v} out of range"))?;
        let x = k as f64 / 10_000.0;
        let (b1, b2, b3) = theta_branches(x);
        let oracle = if x <= golden {
            b1
        } else if x <= root_half {
            b2
        } else {
            b3
        };
        ensure((v.to_f64() - oracle).abs() <= 1e-12, || format!("theta({r}) = {v}, oracle {oracle}"))?;
    }
    Ok("exact values, both breakpoints, 10^4 grid".into())
}

fn all_axioms(space: &MetricSpace, points: &[Point]) -> Result<(), String> {
    let report = verify_metric_axioms(space, points).map_err(|e| e.to_string())?;
    ensure(report.passed, || format!("{}: {:?}", space.label(), report.violations.first()))
}

fn criterion_axioms() -> Check {
    let mut spaces = 0;
    for (eta, n) in [((3, 5), 2), ((3, 5), 40), ((3, 5), 200), ((9, 10), 120), ((51, 100), 60)] {
        let s = suzuki_space(&q(eta.0, eta.1), n).map_err(|e| e.to_string())?;
        all_axioms(&s.space, &s.space.points().unwrap())?;
        spaces += 1;
    }
    let d = dyadic_probe_space(64).map_err(|e| e.to_string())?;
    let lazy = d.metric_space();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pts: Vec<Point> = d.u_sequence().iter().map(|u| Point::At(Scalar::exact(u.clone()))).collect();
    pts.push(Point::At(Scalar::zero()));
    pts.push(Point::At(Scalar::one()));
    while pts.len() < 74 {
        let p = lazy.sample_point(&mut rng);
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    all_axioms(&lazy, &pts)?;
    spaces += 1;
    for n in 2..=6 {
        for seed in 0..100 {
            let s = random_finite_metric(n, seed).map_err(|e| e.to_string())?;
            all_axioms(&s, &s.points().unwrap())?;
            spaces += 1;
        }
    }
    Ok(format!("{spaces} spaces"))
}

fn criterion_audit() -> Check {
    let etas = [
        ConditionKind::eta_strict(Scalar::ratio(1, 8)).unwrap(),
        ConditionKind::eta_strict(Scalar::ratio(1, 4)).unwrap(),
        ConditionKind::eta_strict(Scalar::ratio(1, 2)).unwrap(),
    ];
    ensure(
        implication_expected(&etas[0], &etas[1]) && implication_expected(&etas[1], &etas[2]),
        || "eta monotonicity missing from the implication table".into(),
    )?;
    let mut audits = 0;
    let mut weak_only = 0;
    for n in 2..=4 {
        for seed in 0..50 {
            let s = random_finite_metric(n, 1000 + seed).map_err(|e| e.to_string())?;
            let r = implication_audit(&s).map_err(|e| e.to_string())?;
            ensure(r.violations.is_empty(), || format!("{}: {:?}", s.label(), r.violations[0]))?;
            // populations must be monotone along the chain as well
            let pop = |c: &str| r.population[c];
            ensure(
                pop("banach(1/2)") <= pop("contractive")
                    && pop("contractive") <= pop("suzuki_half_strict")
                    && pop("suzuki_half_strict") <= pop("abtahi_weak")
                    && pop("eta_strict(1/8)") <= pop("eta_strict(1/4)")
                    && pop("eta_strict(1/4)") <= pop("eta_strict(1/2)"),
                || format!("{}: populations {:?}", s.label(), r.population),
            )?;
            weak_only += r.weak_not_contractive_total;
            audits += 1;
        }
    }
    Ok(format!("{audits} spaces, 0 violations, {weak_only} weak-but-not-contractive maps"))
}

// Direct check of the half-strict condition on a table map, from the matrix.
fn half_strict_oracle(d: &[Vec<Scalar>], t: &[usize]) -> bool {
    let n = t.len();
    (0..n).all(|x| {
        (0..n).all(|y| {
            let premise = (&d[x][t[x]] / &Scalar::integer(2)).lt(&d[x][y]);
            !premise || d[t[x]][t[y]].lt(&d[x][y])
        })
    })
}

fn criterion_census() -> Check {
    let half = ConditionKind::SuzukiHalfStrict;
    let mut satisfying = 0;
    let mut spaces = 0;
    for n in 1..=4 {
        let mut list = vec![MetricSpace::discrete(n).map_err(|e| e.to_string())?];
        if n >= 2 {
            for seed in 0..30 {
                list.push(random_finite_metric(n, 5000 + seed).map_err(|e| e.to_string())?);
            }
        }
        for s in list {
            let r = fixed_point_census(&s, &half).map_err(|e| e.to_string())?;
            ensure(r.exceptions == 0, || format!("{}: {} exceptions", s.label(), r.exceptions))?;
            ensure(
                r.maps_satisfying_with_unique_fixed_point == r.maps_satisfying
                    && r.maps_satisfying_with_convergent_orbits == r.maps_satisfying,
                || format!("{}: {r:?}", s.label()),
            )?;
            let matrix = s.distance_matrix().unwrap();
            let oracle = enumerate_self_maps(n)
                .unwrap()
                .filter(|t| half_strict_oracle(&matrix, t))
                .count();
            ensure(oracle == r.maps_satisfying, || {
                format!("{}: census {} vs oracle {oracle}", s.label(), r.maps_satisfying)
            })?;
            satisfying += r.maps_satisfying;
            spaces += 1;
        }
    }
    for n in 2..=4 {
        let s = random_finite_metric(n, 77).map_err(|e| e.to_string())?;
        let id = SelfMap::identity(n);
        let c = certify(&s, &id, &ConditionKind::HalfNonstrict, &Scope::Exhaustive).map_err(|e| e.to_string())?;
        ensure(c.satisfied(), || "identity should satisfy the nonstrict condition".into())?;
        let fixed = (0..n).filter(|&i| id.apply(&Point::Id(i)).unwrap() == Point::Id(i)).count();
        ensure(fixed == n, || format!("identity has {fixed} fixed points"))?;
    }
    Ok(format!("{spaces} spaces, {satisfying} satisfying maps, 0 exceptions"))
}

fn criterion_best_constant() -> Check {
    let (r, eta) = (q(3, 4), q(3, 5));
    let s = suzuki_space_with_r(&eta, &r, 40).map_err(|e| e.to_string())?;
    ensure(suzuki_space(&eta, 40).map(|d| d.params.r == r).unwrap_or(false), || "default r is not 3/4".into())?;
    // u_n = (1 - r)(-r)^n
    let mut u = q(1, 4);
    for k in 0..=40 {
        ensure(s.params.u(k) == u, || format!("u_{k}"))?;
        u = -&u * &r;
    }
    let domain = s.map.domain(&s.space).unwrap();
    ensure(domain.len() == 42, || format!("domain has {} points", domain.len()))?;
    for p in &domain {
        ensure(s.map.apply(p).unwrap() != *p, || format!("fixed point {p}"))?;
    }
    let cert = certify(&s.space, &s.map, &ConditionKind::eta_nonstrict(Scalar::exact(eta)).unwrap(), &Scope::Exhaustive)
        .map_err(|e| e.to_string())?;
    ensure(cert.satisfied() && cert.witness.is_none(), || format!("{:?}", cert.witness))?;
    ensure(cert.pairs_checked() == 42 * 42, || format!("{} pairs", cert.pairs_checked()))?;

    let trace = iterate(&s.space, &s.map, s.zero(), 100).map_err(|e| e.to_string())?;
    ensure(trace.termination() == Termination::CarrierBoundary(42), || format!("{:?}", trace.termination()))?;
    let (one, rr) = (q(1, 1), r.clone());
    let mut expected = (&one - &rr) * (&one + &rr);
    for (n, gap) in trace.deltas()[2..].iter().enumerate() {
        ensure(*gap == Scalar::exact(expected.clone()), || format!("delta_{} = {gap}", n + 2))?;
        expected *= &rr;
    }
    ensure(trace.deltas()[2..5] == [Scalar::ratio(7, 16), Scalar::ratio(21, 64), Scalar::ratio(63, 256)], || {
        "first gaps".into()
    })?;
    let lip = minimal_lipschitz(&s.space, &s.map).map_err(|e| e.to_string())?;
    ensure(lip.gt(&Scalar::one()), || format!("lipschitz constant {lip}"))?;
    Ok(format!("{} pairs, lipschitz {}", cert.pairs_checked(), lip.to_f64()))
}

fn criterion_probe() -> Check {
    let d = dyadic_probe_space(64).map_err(|e| e.to_string())?;
    let space = d.metric_space();
    let map = probe_map(&d);
    let t = |x: BigRational| map.apply(&Point::At(Scalar::exact(x))).map(|p| at(&p));
    ensure(t(q(1, 1)).ok() == Some(q(1, 4)), || "T(1)".into())?;
    ensure(t(q(1, 4)).ok() == Some(q(21, 64)) && d.u(2) == Some(&q(21, 64)), || "T(1/4)".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut checked, mut boundary) = (0, 0);
    while checked < 10_000 {
        let p = space.sample_point(&mut rng);
        let x = at(&p);
        match map.apply(&p) {
            Ok(tp) => {
                let tx = at(&tp);
                ensure(d.rho(&tx) * BigRational::from_integer(7.into()) < d.rho(&x), || format!("rho fails at {x}"))?;
                ensure(tx != x, || format!("fixed point {x}"))?;
                ensure(d.u_position(&tx).is_some(), || format!("T({x}) is not a u-term"))?;
                checked += 1;
            }
            Err(fixlab::Error::Boundary(_)) => boundary += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    let cert = certify(&space, &map, &ConditionKind::SuzukiHalfStrict, &Scope::Sampled { seed: 2024, count: 10_000 })
        .map_err(|e| e.to_string())?;
    ensure(cert.satisfied() && cert.pairs_checked() == 10_000, || format!("{:?}", cert.witness))?;

    let mut starts: Vec<Point> = (0..20).map(|_| space.sample_point(&mut rng)).collect();
    starts.push(Point::At(Scalar::one()));
    for x0 in starts {
        let trace = iterate(&space, &map, x0, 100).map_err(|e| e.to_string())?;
        ensure(!matches!(trace.termination(), Termination::FixedPointHit(_)), || "probe orbit hit a fixed point".into())?;
        let idx: Vec<usize> = trace.points()[1..].iter().map(|p| d.u_position(&at(p))).collect::<Option<_>>()
            .ok_or("orbit left the u-sequence")?;
        ensure(idx.windows(2).all(|w| w[0] < w[1]), || format!("indices {idx:?}"))?;
    }
    Ok(format!("{checked} points ({boundary} beyond the materialized sequence), 10^4 pairs"))
}

fn criterion_diagnostic() -> Check {
    let strict = DiagnosticThresholds::new(Scalar::ratio(1, 100), Scalar::ratio(1, 100), 500).unwrap();
    let (hs, hm) = halving_map();
    let trace = iterate(&hs, &hm, Point::At(Scalar::one()), 520).map_err(|e| e.to_string())?;
    let r = sequential_diagnostic(&hs, &hm, &trace, &strict).map_err(|e| e.to_string())?;
    ensure(r.is_empty() && r.horizon_used == 500, || format!("halving: {} matches", r.total_matches))?;

    let s = suzuki_space_with_r(&q(3, 5), &q(3, 4), 510).map_err(|e| e.to_string())?;
    let trace = iterate(&s.space, &s.map, s.zero(), 520).map_err(|e| e.to_string())?;
    let r = sequential_diagnostic(&s.space, &s.map, &trace, &strict).map_err(|e| e.to_string())?;
    ensure(r.is_empty() && r.horizon_used == 500, || format!("shift: {} matches", r.total_matches))?;

    let policy = Policy::epsilon(1e-9).unwrap();
    let (ds, dm) = divergent_contractive_map();
    let trace = iterate(&ds, &dm, Point::At(Scalar::float(1.0, policy)), 5001).map_err(|e| e.to_string())?;
    let loose = DiagnosticThresholds::new(Scalar::ratio(1, 100), Scalar::ratio(1, 2), 5000).unwrap();
    let r = sequential_diagnostic(&ds, &dm, &trace, &loose).map_err(|e| e.to_string())?;
    ensure(!r.is_empty() && !r.clamped && r.horizon_used == 5000, || "x + 1/x: no witness".into())?;
    let coord = |i: usize| trace.points()[i].clone();
    for w in &r.witnesses {
        let again = replay_witness(&ds, &dm, &trace, w).map_err(|e| e.to_string())?;
        ensure(again.premise_ok, || format!("premise fails on replay at ({}, {})", w.p, w.q))?;
        ensure(again.delta.approx_eq(&w.delta) && again.big_delta.approx_eq(&w.big_delta), || {
            format!("replay mismatch at ({}, {})", w.p, w.q)
        })?;
        ensure(again.big_delta.to_f64() >= 0.99 - 1e-9 && again.delta.to_f64() >= 0.5 - 1e-9, || {
            format!("replayed witness misses thresholds at ({}, {})", w.p, w.q)
        })?;
        // |Tx - Ty| / |x - y| = 1 - 1/(xy)
        let (xp, xq) = (ds.coordinate(&coord(w.p)).unwrap().to_f64(), ds.coordinate(&coord(w.q)).unwrap().to_f64());
        let oracle = 1.0 - 1.0 / (xp * xq);
        ensure((oracle - w.big_delta.to_f64()).abs() < 1e-9, || format!("ratio oracle at ({}, {})", w.p, w.q))?;
    }
    Ok(format!("{} matches, {} witnesses replayed", r.total_matches, r.witnesses.len()))
}

fn criterion_psi() -> Check {
    let (hs, hm) = halving_map();
    let trace = iterate(&hs, &hm, Point::At(Scalar::one()), 60).map_err(|e| e.to_string())?;
    let h = 60;
    let pts: Vec<BigRational> = trace.points().iter().map(at).collect();
    let gaps: Vec<BigRational> = trace.deltas().iter().map(|g| g.as_rational().unwrap().clone()).collect();
    // feasible iff some n, m <= h have gap_n <= s <= |x_n - x_m|
    let feasible = |s: &BigRational| {
        (0..=h.min(gaps.len() - 1)).any(|n| {
            &gaps[n] <= s && (0..=h.min(gaps.len() - 1)).any(|m| m != n && s <= &(&pts[n] - &pts[m]).abs())
        })
    };
    let mut grid: Vec<BigRational> = vec![q(0, 1), q(3, 4), q(1, 1), q(2, 1), q(1, 3), q(5, 7)];
    grid.extend((1..70).map(|k| BigRational::new(1.into(), BigInt::from(2).pow(k))));
    let (mut feas, mut infeas) = (0, 0);
    for s in &grid {
        let v = extract_psi(&hs, &hm, &trace, &Scalar::exact(s.clone()), h).map_err(|e| e.to_string())?;
        let want = if feasible(s) { feas += 1; q(1, 2) } else { infeas += 1; q(0, 1) };
        ensure(v == Scalar::exact(want.clone()), || format!("psi({s}) = {v}, want {want}"))?;
    }

    let mut orbits = 0;
    let half = ConditionKind::SuzukiHalfStrict;
    let probe_grid: Vec<Scalar> = [0, 1, 2, 4, 8, 16, 64, 256, 1024].iter().map(|&k| Scalar::ratio(k, 64)).collect();
    let d = dyadic_probe_space(64).map_err(|e| e.to_string())?;
    let mut cases: Vec<(MetricSpace, SelfMap, Point)> =
        vec![(d.metric_space(), probe_map(&d), Point::At(Scalar::one()))];
    for seed in 0..5 {
        let s = random_finite_metric(4, 300 + seed).map_err(|e| e.to_string())?;
        for t in enumerate_self_maps(4).unwrap() {
            let m = SelfMap::table("t", t);
            if certify(&s, &m, &half, &Scope::Exhaustive).map_err(|e| e.to_string())?.satisfied() {
                for x in 0..4 {
                    cases.push((s.clone(), m.clone(), Point::Id(x)));
                }
            }
        }
    }
    for (space, map, x0) in &cases {
        let trace = iterate(space, map, x0.clone(), 50).map_err(|e| e.to_string())?;
        for s in &probe_grid {
            let v = extract_psi(space, map, &trace, s, 50).map_err(|e| e.to_string())?;
            ensure(v.ge(&Scalar::zero()) && v.le(&Scalar::one()), || format!("psi({s}) = {v} on {}", space.label()))?;
        }
        orbits += 1;
    }
    Ok(format!("{feas} feasible / {infeas} infeasible s; {orbits} certified orbits in [0,1]"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Check, Duration); 8] = [
        ("1 theta", criterion_theta, Duration::from_secs(1)),
        ("2 metric axioms", criterion_axioms, Duration::from_secs(10)),
        ("3 implication audit", criterion_audit, Duration::from_secs(60)),
        ("4 fixed-point census", criterion_census, Duration::from_secs(60)),
        ("5 best-constant space", criterion_best_constant, Duration::from_secs(5)),
        ("6 probe map", criterion_probe, Duration::from_secs(10)),
        ("7 sequential diagnostic", criterion_diagnostic, Duration::from_secs(30)),
        ("8 empirical psi", criterion_psi, Duration::from_secs(5)),
    ];
    let mut failures = Vec::new();
    let mut err = std::io::stderr();
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let result = result.and_then(|msg| {
            if took <= limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {took:.2?}, limit {limit:?}"))
            }
        });
        // written straight to stderr so the lines survive output capture
        let _ = match &result {
            Ok(msg) => writeln!(err, "PASS [{name}] {took:.2?}: {msg}"),
            Err(msg) => writeln!(err, "FAIL [{name}] {took:.2?}: {msg}"),
        };
        if result.is_err() {
            failures.push(name);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
