use ntupled::contractions::{implied_classes, ControlClass};
use ntupled::index_algebra::{from_upsilon, is_member_u, is_permuted, to_upsilon, upsilon_compatible, BinaryOp, Partition, UpsilonTuple};
use ntupled::oracle::generate;
use ntupled::product_lift::{delta_n, nabla_n, product_leq};
use ntupled::scalar::{parse_rational, render_ratio};
use ntupled::spaces::{check_commuting, check_weak_star_compat, tuples, validate_space, Elem, FiniteMultiMap, FiniteSelfMap, FiniteSpace};
use ntupled::{Exact, RealLine};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn op_strategy() -> impl Strategy<Value = BinaryOp> {
    (2usize..=5).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(1..=n, n), n).prop_map(move |rows| BinaryOp::from_rows(n, &rows).unwrap())
    })
}

fn partition_for(n: usize, mask: u32) -> Partition {
    let all: Vec<Partition> = Partition::enumerate_all(n).collect();
    all[mask as usize % all.len()].clone()
}

const CLASSES: [ControlClass; 6] = [
    ControlClass::Im,
    ControlClass::Theta,
    ControlClass::Psi,
    ControlClass::Phi,
    ControlClass::Omega,
    ControlClass::Linear,
];

proptest! {
    #[test]
    fn upsilon_round_trip(op in op_strategy()) {
        prop_assert_eq!(from_upsilon(&to_upsilon(&op)), op.clone());
        let u = UpsilonTuple::new(op.n(), &op.rows()).unwrap();
        prop_assert_eq!(to_upsilon(&from_upsilon(&u)), u);
    }

    #[test]
    fn membership_matches_upsilon_compatibility(op in op_strategy(), mask in any::<u32>()) {
        let part = partition_for(op.n(), mask);
        prop_assert_eq!(
            is_member_u(&op, &part).unwrap().member,
            upsilon_compatible(&to_upsilon(&op), &part).unwrap()
        );
    }

    #[test]
    fn permuted_rows_are_bijections(op in op_strategy()) {
        let n = op.n();
        let bijective = op.rows().iter().all(|r| {
            let mut s = r.clone();
            s.sort();
            s == (1..=n).collect::<Vec<_>>()
        });
        prop_assert_eq!(is_permuted(&op).permuted, bijective);
    }

    #[test]
    fn generated_spaces_satisfy_axioms(seed in any::<u64>(), size in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = generate::random_space(&mut rng, size);
        prop_assert!(validate_space(&space).is_valid());
    }

    #[test]
    fn broken_symmetry_is_reported(seed in any::<u64>(), size in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = generate::random_space(&mut rng, size);
        let mut dist: Vec<Vec<Exact>> = (1..=size)
            .map(|i| (1..=size).map(|j| ntupled::OrderedMetricSpace::dist(&space, &Elem::nth(i), &Elem::nth(j))).collect())
            .collect();
        dist[0][1] += Exact::new(1, 7);
        let broken = FiniteSpace::new(space.labels().to_vec(), dist, &[]).unwrap();
        prop_assert!(!validate_space(&broken).is_valid());
    }

    #[test]
    fn product_order_is_a_partial_order(seed in any::<u64>(), mask in any::<u32>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = generate::random_space(&mut rng, 3);
        let part = partition_for(2, mask);
        let all: Vec<Vec<Elem>> = tuples(&space.all(), 2).collect();
        for u in &all {
            prop_assert!(product_leq(&space, u, u, &part));
            for v in &all {
                if u != v && product_leq(&space, u, v, &part) {
                    prop_assert!(!product_leq(&space, v, u, &part));
                }
                for w in &all {
                    if product_leq(&space, u, v, &part) && product_leq(&space, v, w, &part) {
                        prop_assert!(product_leq(&space, u, w, &part));
                    }
                }
            }
        }
    }

    #[test]
    fn product_metrics_are_equivalent(u in prop::collection::vec(-1e3f64..1e3, 2..6), shift in prop::collection::vec(-1e3f64..1e3, 6)) {
        let space = RealLine::line();
        let n = u.len();
        let v: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let d = delta_n(&space, &u, &v).unwrap();
        let m = nabla_n(&space, &u, &v).unwrap();
        prop_assert!(d <= m * (1.0 + 1e-12));
        prop_assert!(m <= n as f64 * d * (1.0 + 1e-12));
    }

    #[test]
    fn commuting_implies_weak_compatibility(seed in any::<u64>(), size in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = generate::random_space(&mut rng, size);
        let op = generate::random_op(&mut rng, 2);
        let g = if rng.gen_bool(0.3) { FiniteSelfMap::identity(size) } else { generate::random_self_map(&mut rng, size) };
        let f = if rng.gen_bool(0.5) {
            let fixed: Vec<Elem> = space.all().into_iter().filter(|&x| ntupled::spaces::SelfMap::eval(&g, &x) == x).collect();
            match fixed.first() {
                Some(&c) => FiniteMultiMap::constant(size, 2, c),
                None => generate::random_table(&mut rng, size, 2),
            }
        } else {
            generate::random_table(&mut rng, size, 2)
        };
        if check_commuting(&f, &g, &space).unwrap().holds {
            prop_assert!(check_weak_star_compat(&f, &g, &op, &space).unwrap().holds);
        }
    }

    #[test]
    fn rationals_render_and_parse(p in -10_000i64..10_000, q in 1i64..10_000) {
        let r = Exact::new(p, q);
        prop_assert_eq!(parse_rational(&render_ratio(&r)), Some(r));
    }
}

#[test]
fn class_inclusions_are_closed() {
    for c in CLASSES {
        let up = implied_classes(c);
        assert!(up.contains(&c) || c == ControlClass::Linear);
        for d in &up {
            assert!(implied_classes(*d).is_subset(&up), "{c:?} -> {d:?}");
        }
    }
    assert_eq!(implied_classes(ControlClass::Linear), implied_classes(ControlClass::Im));
    assert!(implied_classes(ControlClass::Im).contains(&ControlClass::Omega));
    assert!(!implied_classes(ControlClass::Psi).contains(&ControlClass::Phi));
}
