use bianchi::arith;
use bianchi::classgroup::{BQForm, ClassGroup, IdealClass, DEFAULT_SEARCH_BOUND};
use bianchi::quadfield::QuadField;
use proptest::prelude::*;

fn group(d: i64) -> ClassGroup {
    ClassGroup::new(&QuadField::new(d).unwrap()).unwrap()
}

/// Kronecker symbol (disc / m) for m > 0, multiplicatively.
fn kronecker(disc: i64, m: u64) -> i64 {
    arith::factor(m).iter().map(|&(p, e)| (arith::kronecker_prime(disc, p) as i64).pow(e)).product()
}

/// Dirichlet's class number formula for disc < -4.
fn analytic_class_number(disc: i64) -> u64 {
    let n = disc.unsigned_abs();
    let s: i64 = (1..n).map(|a| kronecker(disc, a) * a as i64).sum();
    (-s / n as i64) as u64
}

#[test]
fn q17_is_cyclic_of_order_four() {
    let k = QuadField::new(17).unwrap();
    let cg = ClassGroup::new(&k).unwrap();
    assert_eq!(cg.h(), 4);
    assert_eq!(cg.elementary_divisors(), &[4]);
    assert_eq!(cg.generator_forms(), vec![BQForm { a: 3, b: -2, c: 6 }]);
    let p31 = k.ideal_from_label("3.1").unwrap();
    assert_eq!(cg.class_of(&p31), IdealClass(vec![1]));
    assert_eq!(cg.class_of(&k.ideal_from_label("3.2").unwrap()), IdealClass(vec![3]));
    assert_eq!(cg.class_of(&k.ideal_from_label("2.1").unwrap()), IdealClass(vec![2]));
    assert_eq!(cg.class_of(&k.ideal_from_label("13.1").unwrap()), IdealClass(vec![2]));
    assert!(cg.is_principal(&k.rational(3)));
    assert_eq!(cg.structure_string(), "C4");
}

#[test]
fn small_class_groups() {
    let cases: &[(i64, u64, &[u64])] = &[
        (1, 1, &[]),
        (2, 1, &[]),
        (5, 2, &[2]),
        (23, 3, &[3]),
        (31, 3, &[3]),
        (21, 4, &[2, 2]),
        (14, 4, &[4]),
        (65, 8, &[2, 4]),
        (105, 8, &[2, 2, 2]),
    ];
    for &(d, h, divs) in cases {
        let cg = group(d);
        assert_eq!(cg.h(), h, "d={d}");
        assert_eq!(cg.elementary_divisors(), divs, "d={d}");
    }
}

#[test]
fn class_numbers_match_the_analytic_formula() {
    for d in 2..200i64 {
        if !arith::is_squarefree(d as u64) {
            continue;
        }
        let k = QuadField::new(d).unwrap();
        if k.disc() == -3 {
            continue;
        }
        let cg = ClassGroup::new(&k).unwrap();
        assert_eq!(cg.h(), analytic_class_number(k.disc()), "d={d}");
        let prod: u64 = cg.elementary_divisors().iter().product();
        assert_eq!(prod, cg.h());
        for w in cg.elementary_divisors().windows(2) {
            assert_eq!(w[1] % w[0], 0);
        }
    }
}

#[test]
fn genus_data_for_q21() {
    let cg = group(21);
    let g = cg.genus_data().unwrap();
    assert_eq!(g.r2, 2);
    assert_eq!(g.genus_classes.len(), 4);
    assert_eq!(g.squares, vec![cg.identity()]);
    assert_eq!(g.two_torsion.len(), 4);
}

#[test]
fn genus_rank_matches_prime_count() {
    for d in 1..300i64 {
        if !arith::is_squarefree(d as u64) {
            continue;
        }
        let k = QuadField::new(d).unwrap();
        let cg = ClassGroup::new(&k).unwrap();
        let g = cg.genus_data().unwrap();
        assert_eq!(g.r2 as usize, arith::factor(k.disc().unsigned_abs()).len() - 1, "d={d}");
        assert_eq!(g.squares.len() as u64 * (1 << g.r2), cg.h());
    }
}

#[test]
fn pinned_generators() {
    let k = QuadField::new(17).unwrap();
    let cg = ClassGroup::with_generators(&k, &[BQForm { a: 3, b: 2, c: 6 }]).unwrap();
    assert_eq!(cg.class_of(&k.ideal_from_label("3.1").unwrap()), IdealClass(vec![3]));
    assert!(ClassGroup::with_generators(&k, &[BQForm { a: 2, b: 0, c: 0 }]).is_err());
    assert!(ClassGroup::with_generators(&k, &[BQForm { a: 2, b: 2, c: 9 }]).is_err());
    let repr = group(17).to_repr();
    assert_eq!(repr.h, 4);
    let again = ClassGroup::from_repr(&k, &repr).unwrap();
    assert_eq!(again.generator_forms(), group(17).generator_forms());
}

#[test]
fn auxiliary_ideal_search() {
    let k = QuadField::new(17).unwrap();
    let cg = ClassGroup::new(&k).unwrap();
    let p2 = k.ideal_from_label("2.1").unwrap();
    let c = IdealClass(vec![1]);
    let q = cg.find_ideal_in_class(&c, &p2, true, DEFAULT_SEARCH_BOUND).unwrap();
    assert_eq!(k.label(&q), "3.1");
    let c2 = IdealClass(vec![2]);
    let q = cg.find_ideal_in_class(&c2, &p2, true, DEFAULT_SEARCH_BOUND).unwrap();
    assert_eq!(q.norm(), 13);
    let q = cg.find_ideal_in_class(&c2, &k.unit_ideal(), true, DEFAULT_SEARCH_BOUND).unwrap();
    assert_eq!(k.label(&q), "2.1");
    assert!(cg.find_ideal_in_class(&c2, &p2, true, 5).is_err());
}

#[test]
fn reduction_is_idempotent_and_preserves_disc() {
    for d in [-20i64, -23, -68, -84, -260] {
        for f in bianchi::classgroup::reduced_forms(d) {
            assert_eq!(f.reduce(), f);
            assert_eq!(f.disc(), d);
            // an equivalent non-reduced form: (a, b + 2a, ...)
            let g = BQForm { a: f.a, b: f.b + 2 * f.a, c: (f.b + 2 * f.a).pow(2) / (4 * f.a) - d / (4 * f.a) };
            let g = BQForm { c: ((g.b * g.b) - d) / (4 * g.a), ..g };
            assert_eq!(g.reduce(), f);
        }
    }
}

fn small_fields() -> impl Strategy<Value = i64> {
    prop::sample::select(vec![5i64, 14, 17, 21, 23, 65, 105, 161])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn class_map_is_a_homomorphism(d in small_fields(), n1 in 1u64..3000, i1 in 0usize..6, n2 in 1u64..3000, i2 in 0usize..6) {
        let k = QuadField::new(d).unwrap();
        let cg = ClassGroup::new(&k).unwrap();
        let pick = |mut n: u64, idx: usize| loop {
            let l = k.ideals_of_norm(n);
            if !l.is_empty() { return l[idx % l.len()]; }
            n += 1;
        };
        let i = pick(n1, i1);
        let j = pick(n2, i2);
        let ij = k.mul(&i, &j).unwrap();
        prop_assert_eq!(cg.class_of(&ij), cg.compose(&cg.class_of(&i), &cg.class_of(&j)));
        prop_assert_eq!(cg.class_of(&k.conjugate(&i)), cg.inverse(&cg.class_of(&i)));
        prop_assert!(cg.is_principal(&k.mul(&i, &k.conjugate(&i)).unwrap()));
    }
}
