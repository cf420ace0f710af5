use pacomm::field::{
    eval_field, find_stationary_points, psi_matrix, single_source_jacobian, stationary_sigma,
    FieldPoint, RestrictedField,
};
use pacomm::rules::TypeRule;
use pacomm::structure::CommunityStructure;
use proptest::prelude::*;

fn rule_for(kind: u8, m: usize) -> TypeRule {
    match kind % 4 {
        0 => TypeRule::majority(m),
        1 => TypeRule::minority(m),
        2 => TypeRule::random_visible(m),
        _ => TypeRule::linear(m),
    }
    .unwrap()
}

fn structure(max_n: usize) -> impl Strategy<Value = CommunityStructure> {
    (1usize..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, n), n),
            prop::collection::vec(0.1..1.0f64, n),
        )
            .prop_map(move |(mut rows, w)| {
                for (i, row) in rows.iter_mut().enumerate() {
                    row[i] += 0.1;
                }
                let total: f64 = w.iter().sum();
                let mut mu: Vec<f64> = w.iter().map(|v| v / total).collect();
                let head: f64 = mu[..n - 1].iter().sum();
                mu[n - 1] = 1.0 - head;
                CommunityStructure::from_rows(&rows, mu).unwrap()
            })
    })
}

fn simplex_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, 2 * n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn field_sums_to_zero(
        (cs, x) in structure(4).prop_flat_map(|cs| { let n = cs.n(); (Just(cs), simplex_point(n)) }),
        kind in any::<u8>(),
        m in 1usize..=6,
    ) {
        let f = eval_field(&rule_for(kind, m), &cs, &FieldPoint::new(x).unwrap()).unwrap().f;
        prop_assert!(f.iter().sum::<f64>().abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn community_marginals_are_stationary_on_the_slice(
        (cs, z) in structure(4).prop_flat_map(|cs| { let n = cs.n(); (Just(cs), prop::collection::vec(0.01..0.99f64, n)) }),
        kind in any::<u8>(),
    ) {
        let nu = cs.solve_nu().unwrap().nu;
        let f = eval_field(&rule_for(kind, 3), &cs, &FieldPoint::on_slice(&nu, &z).unwrap()).unwrap().f;
        for i in 0..cs.n() {
            prop_assert!((f[2 * i] + f[2 * i + 1]).abs() <= 1e-11, "community {}: {}", i, f[2 * i] + f[2 * i + 1]);
        }
    }

    #[test]
    fn analytic_and_difference_jacobians_agree(
        (cs, z) in structure(4).prop_flat_map(|cs| { let n = cs.n(); (Just(cs), prop::collection::vec(0.05..0.95f64, n)) }),
        kind in any::<u8>(),
        m in 1usize..=7,
    ) {
        let field = RestrictedField::new(rule_for(kind, m), cs).unwrap();
        let fd = field.jacobian(&z).unwrap();
        let an = field.analytic_jacobian(&z).unwrap();
        for (a, b) in fd.data().iter().zip(an.data()) {
            prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn generator_rows_and_stationary_law(cs in structure(5)) {
        let nu = cs.solve_nu().unwrap().nu;
        let psi = psi_matrix(&cs, &nu).unwrap();
        let n = cs.n();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| psi.get(i, j)).sum();
            prop_assert!(row.abs() <= 1e-15);
        }
        // the random structures here have all diagonal entries positive and
        // usually connected off-diagonals; skip those without a common sink
        prop_assume!(cs.gamma().common_reachability());
        let sigma = stationary_sigma(&cs, &psi).unwrap();
        prop_assert!(sigma.iter().all(|v| *v >= 0.0));
        prop_assert!((sigma.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for j in 0..n {
            let r: f64 = (0..n).map(|i| sigma[i] * psi.get(i, j)).sum();
            prop_assert!(r.abs() <= 1e-11);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn stationary_points_recheck(cs in structure(3), kind in 0u8..3, m in prop::sample::select(vec![3usize, 5])) {
        let rule = rule_for(kind, m);
        let nu = cs.solve_nu().unwrap().nu;
        let points = find_stationary_points(&rule, &cs, Some(6)).unwrap();
        for p in &points {
            let f = eval_field(&rule, &cs, &FieldPoint::on_slice(&nu, &p.z).unwrap()).unwrap().f;
            prop_assert!(sup(&f) <= 1e-9, "residual {} at {:?}", sup(&f), p.z);
        }
        // majority, minority and random-visible are all colour-symmetric
        for p in &points {
            let mirror: Vec<f64> = p.z.iter().map(|v| 1.0 - v).collect();
            prop_assert!(
                points.iter().any(|q| q.z.iter().zip(&mirror).all(|(a, b)| (a - b).abs() <= 1e-7)),
                "mirror of {:?} missing", p.z
            );
        }
    }
}

#[test]
fn single_source_closed_forms_match_differences() {
    let mut rng_z = [0.1, 0.3, 0.5, 0.7, 0.9, 0.23, 0.61].iter().cycle();
    let anti =
        CommunityStructure::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
    let cycle = CommunityStructure::uniform(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ])
    .unwrap();
    for cs in [anti, cycle] {
        let nu = cs.solve_nu().unwrap().nu;
        for m in [3, 5, 7] {
            let rule = TypeRule::minority(m).unwrap();
            let field = RestrictedField::new(rule.clone(), cs.clone()).unwrap();
            for _ in 0..5 {
                let z: Vec<f64> = (0..cs.n()).map(|_| *rng_z.next().unwrap()).collect();
                let closed = single_source_jacobian(&rule, &cs, &nu, &z).unwrap();
                let fd = field.jacobian(&z).unwrap();
                for (a, b) in closed.data().iter().zip(fd.data()) {
                    assert!((a - b).abs() <= 1e-6, "{a} vs {b} at {z:?}");
                }
            }
        }
    }
}
