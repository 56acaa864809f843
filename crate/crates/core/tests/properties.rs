use fixlab::conditions::{certify, implication_expected, theta, ConditionKind, Scope};
use fixlab::enumerator::{default_audit_conditions, random_finite_metric};
use fixlab::orbit::{extract_psi, iterate};
use fixlab::{verify_metric_axioms, Point, Scalar, SelfMap};
use proptest::prelude::*;

fn space_and_map() -> impl Strategy<Value = (usize, u64, Vec<usize>)> {
    (2usize..=5, any::<u64>()).prop_flat_map(|(n, seed)| (Just(n), Just(seed), prop::collection::vec(0..n, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_metrics_are_symmetric_metrics(n in 2usize..=6, seed in any::<u64>()) {
        let s = random_finite_metric(n, seed).unwrap();
        let d = s.distance_matrix().unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(&d[i][j], &d[j][i]);
            }
        }
        prop_assert!(verify_metric_axioms(&s, &s.points().unwrap()).unwrap().passed);
    }

    #[test]
    fn certification_is_monotone_along_the_chain((n, seed, table) in space_and_map()) {
        let s = random_finite_metric(n, seed).unwrap();
        let m = SelfMap::table("t", table);
        let conditions = default_audit_conditions();
        let sat: Vec<bool> = conditions
            .iter()
            .map(|c| certify(&s, &m, c, &Scope::Exhaustive).unwrap().satisfied())
            .collect();
        for (a, ca) in conditions.iter().enumerate() {
            for (b, cb) in conditions.iter().enumerate() {
                if implication_expected(ca, cb) {
                    prop_assert!(!sat[a] || sat[b], "{} holds but {} fails", ca, cb);
                }
            }
        }
    }

    #[test]
    fn witnesses_replay((n, seed, table) in space_and_map(), pick in 0usize..4) {
        let s = random_finite_metric(n, seed).unwrap();
        let m = SelfMap::table("t", table);
        let c = &[
            ConditionKind::Contractive,
            ConditionKind::SuzukiHalfStrict,
            ConditionKind::AbtahiWeak,
            ConditionKind::banach(Scalar::ratio(1, 2)).unwrap(),
        ][pick];
        let cert = certify(&s, &m, c, &Scope::Exhaustive).unwrap();
        if let Some(w) = cert.witness {
            let again = certify(&s, &m, c, &Scope::Pairs(vec![(w.x.clone(), w.y.clone())])).unwrap();
            prop_assert!(!again.satisfied());
            let w2 = again.witness.unwrap();
            prop_assert_eq!(w2.conclusion, w.conclusion);
            prop_assert_eq!(w2.premise, w.premise);
        }
    }

    #[test]
    fn psi_is_monotone_in_the_horizon((n, seed, table) in space_and_map(), start in 0usize..5, s_num in 0i64..40, h in 0usize..6) {
        let space = random_finite_metric(n, seed).unwrap();
        let m = SelfMap::table("t", table);
        let trace = iterate(&space, &m, Point::Id(start % n), 12).unwrap();
        let s = Scalar::ratio(s_num, 4);
        let short = extract_psi(&space, &m, &trace, &s, h).unwrap();
        let long = extract_psi(&space, &m, &trace, &s, h + 3).unwrap();
        prop_assert!(short.le(&long), "{} > {}", short, long);
    }

    #[test]
    fn theta_stays_in_range(num in 0i64..1_000_000) {
        let v = theta(&Scalar::ratio(num, 1_000_000)).unwrap();
        prop_assert!(v.gt(&Scalar::ratio(1, 2)) && v.le(&Scalar::one()));
    }

    #[test]
    fn rationals_round_trip_through_text(num in any::<i64>(), den in 1i64..i64::MAX) {
        let x = Scalar::ratio(num, den);
        let back: Scalar = x.to_string().parse().unwrap();
        prop_assert_eq!(back, x);
    }
}
