use bianchi::arith;
use bianchi::quadfield::{FieldElement, Ideal, Omega, QuadField, Splitting};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn q17() -> QuadField {
    QuadField::new(17).unwrap()
}

fn lab(k: &QuadField, s: &str) -> Ideal {
    k.ideal_from_label(s).unwrap()
}

/// Independent check that `r` equals the product of `i` and `j`: every
/// product of basis vectors lies in `r` (membership computed from the
/// element multiplication law directly), and the index of `r` is the
/// product of the norms.
fn is_product(k: &QuadField, i: &Ideal, j: &Ideal, r: &Ideal) -> bool {
    let basis = |x: &Ideal| [FieldElement::from_ints(x.a, 0), FieldElement::from_ints(x.b, x.c)];
    for u in basis(i) {
        for v in basis(j) {
            let w = k.elt_mul(&u, &v);
            assert!(w.x.is_integer() && w.y.is_integer());
            let x: i64 = w.x.to_integer().try_into().unwrap();
            let y: i64 = w.y.to_integer().try_into().unwrap();
            if y % r.c != 0 || (x - (y / r.c) * r.b) % r.a != 0 {
                return false;
            }
        }
    }
    r.norm() == i.norm() * j.norm()
}

#[test]
fn field_construction() {
    let k = q17();
    assert_eq!(k.disc(), -68);
    assert_eq!(k.omega(), Omega::SqrtMinusD);
    assert_eq!(QuadField::new(1).unwrap().disc(), -4);
    assert_eq!(QuadField::new(5).unwrap().disc(), -20);
    assert_eq!(QuadField::new(23).unwrap().disc(), -23);
    assert_eq!(QuadField::new(23).unwrap().omega(), Omega::HalfInteger);
    assert!(QuadField::new(4).is_err());
    assert!(QuadField::new(0).is_err());
    assert!(QuadField::new(-3).is_err());
    assert_eq!(QuadField::from_disc(-84).unwrap().d(), 21);
}

#[test]
fn disc_matches_brute_force_basis_discriminant() {
    // disc of the Z-basis {1, w} is (w - w')^2.
    for d in [1i64, 2, 3, 5, 7, 11, 17, 21, 23, 31] {
        let k = QuadField::new(d).unwrap();
        let (t, n) = k.omega_poly();
        assert_eq!(t * t - 4 * n, k.disc(), "d={d}");
    }
}

#[test]
fn element_norm_is_multiplicative() {
    let k = QuadField::new(23).unwrap();
    let r = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let u = FieldElement { x: r(3, 2), y: r(-5, 7) };
    let v = FieldElement { x: r(-1, 3), y: r(4, 1) };
    assert_eq!(k.elt_norm(&k.elt_mul(&u, &v)), k.elt_norm(&u) * k.elt_norm(&v));
    assert_eq!(k.elt_conj(&k.elt_conj(&u)), u);
}

#[test]
fn products_of_named_ideals() {
    let k = q17();
    let p31 = lab(&k, "3.1");
    let p32 = lab(&k, "3.2");
    let p2 = lab(&k, "2.1");
    assert_eq!(k.mul(&p31, &p32).unwrap(), k.rational(3));
    assert_eq!(k.mul(&p2, &p2).unwrap(), k.rational(2));
    assert_eq!(k.mul(&p31, &k.unit_ideal()).unwrap(), p31);
    let other = QuadField::new(5).unwrap();
    assert!(k.mul(&p31, &other.unit_ideal()).is_err());
}

#[test]
fn splitting_of_small_primes() {
    let k = q17();
    match k.factor_rational_prime(3).unwrap() {
        Splitting::Split(p, q) => {
            assert_eq!(p, k.ideal_from_gens(&[(3, 0), (4, 1)]).unwrap());
            assert_eq!(q, k.ideal_from_gens(&[(3, 0), (2, 1)]).unwrap());
        }
        s => panic!("3 should split, got {s:?}"),
    }
    match k.factor_rational_prime(5).unwrap() {
        Splitting::Inert(p) => assert_eq!(p.norm(), 25),
        s => panic!("5 should be inert, got {s:?}"),
    }
    match k.factor_rational_prime(2).unwrap() {
        Splitting::Ramified(p) => assert_eq!(p, k.ideal_from_gens(&[(2, 0), (1, 1)]).unwrap()),
        s => panic!("2 should ramify, got {s:?}"),
    }
    assert!(k.factor_rational_prime(9).is_err());
}

#[test]
fn factorization_examples() {
    let k = q17();
    let p2 = lab(&k, "2.1");
    assert_eq!(k.factor_ideal(&k.rational(8)).unwrap(), vec![(p2, 6)]);
    let p31 = lab(&k, "3.1");
    assert_eq!(k.factor_ideal(&p31).unwrap(), vec![(p31, 1)]);
    let n12 = lab(&k, "12.1");
    let f = k.factor_ideal(&n12).unwrap();
    assert_eq!(f.len(), 2);
    assert_eq!(f[0], (p2, 2));
    assert_eq!(f[1].0.norm(), 3);
    assert_eq!(f[1].1, 1);
}

#[test]
fn divisor_counts() {
    let k = q17();
    assert_eq!(k.sigma0(&k.rational(8)).unwrap(), 7);
    assert_eq!(k.sigma0(&k.unit_ideal()).unwrap(), 1);
    let n12 = lab(&k, "12.1");
    let ex = k.exact_divisors(&n12).unwrap();
    let labels: Vec<String> = ex.iter().map(|d| k.label(d)).collect();
    assert_eq!(labels.len(), 4);
    assert!(labels.contains(&"1.1".to_string()));
    assert!(labels.contains(&"4.1".to_string()));
    assert!(labels.contains(&"12.1".to_string()));
    assert_eq!(k.divisors(&n12).unwrap().len(), 6);
}

#[test]
fn conjugation_examples() {
    let k = q17();
    assert_eq!(k.conjugate(&lab(&k, "3.1")), lab(&k, "3.2"));
    assert_eq!(k.conjugate(&lab(&k, "7.1")), lab(&k, "7.2"));
    assert_eq!(k.conjugate(&k.rational(5)), k.rational(5));
}

#[test]
fn label_examples() {
    let k = q17();
    assert_eq!(k.label(&k.ideal_from_gens(&[(2, 0), (1, 1)]).unwrap()), "2.1");
    assert_eq!(k.label(&k.rational(5)), "25.1");
    assert_eq!(k.label(&k.ideal_from_gens(&[(3, 0), (4, 1)]).unwrap()), "3.1");
    assert_eq!(k.label(&k.ideal_from_gens(&[(3, 0), (2, 1)]).unwrap()), "3.2");
    assert_eq!(k.label(&k.rational(4)), "16.1");
    assert_eq!(k.label(&k.rational(2)), "4.1");
    assert_eq!(k.label(&k.rational(8)), "64.1");
}

#[test]
fn override_must_be_a_permutation() {
    let mut k = q17();
    assert!(k.set_label_override(3, vec![[3, 1, 1]]).is_err());
    k.set_label_override(3, vec![[3, 2, 1], [3, 1, 1]]).unwrap();
    assert_eq!(k.ideal_from_label("3.1").unwrap().b, 2);
}

#[test]
fn rational_primes_recombine() {
    for d in [1i64, 5, 17, 21, 23] {
        let k = QuadField::new(d).unwrap();
        for p in arith::primes_up_to(1000) {
            let prod = match k.factor_rational_prime(p).unwrap() {
                Splitting::Split(a, b) => k.mul(&a, &b).unwrap(),
                Splitting::Inert(a) => a,
                Splitting::Ramified(a) => k.mul(&a, &a).unwrap(),
            };
            assert_eq!(prod, k.rational(p as i64), "d={d} p={p}");
        }
    }
}

#[test]
fn every_ideal_of_small_norm_factors() {
    for d in [1i64, 5, 17, 23] {
        let k = QuadField::new(d).unwrap();
        for n in 1..=500u64 {
            for i in k.ideals_of_norm(n) {
                let f = k.factor_ideal(&i).unwrap();
                assert_eq!(k.product(&f), i);
                for (q, _) in &f {
                    assert!(k.is_prime_ideal(q));
                }
            }
        }
    }
}

#[test]
fn labels_are_a_bijection() {
    for d in [5i64, 17, 21] {
        let k = QuadField::new(d).unwrap();
        for n in 1..=500u64 {
            let list = k.ideals_of_norm(n);
            for (idx, i) in list.iter().enumerate() {
                let label = k.label(i);
                assert_eq!(label, format!("{n}.{}", idx + 1));
                assert_eq!(k.ideal_from_label(&label).unwrap(), *i);
                assert_eq!(i.norm(), n);
            }
        }
    }
}

#[test]
fn ideal_count_matches_dirichlet_convolution() {
    // The number of ideals of norm n is sum_{m | n} kronecker(disc, m).
    let k = q17();
    for n in 1..=300u64 {
        let mut expect = 0i64;
        for m in 1..=n {
            if n % m == 0 {
                let chi: i64 = arith::factor(m)
                    .iter()
                    .map(|&(p, e)| (arith::kronecker_prime(k.disc(), p) as i64).pow(e))
                    .product();
                expect += chi;
            }
        }
        assert_eq!(k.ideals_of_norm(n).len() as i64, expect, "n={n}");
    }
}

fn field_and_pair() -> impl Strategy<Value = (i64, u64, usize, u64, usize)> {
    (prop::sample::select(vec![1i64, 5, 17, 21, 23]), 1u64..2000, 0usize..8, 1u64..2000, 0usize..8)
}

fn pick(k: &QuadField, mut n: u64, idx: usize) -> Ideal {
    loop {
        let list = k.ideals_of_norm(n);
        if !list.is_empty() {
            return list[idx % list.len()];
        }
        n += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn product_is_correct_and_commutative((d, n1, i1, n2, i2) in field_and_pair(), n3 in 1u64..500) {
        let k = QuadField::new(d).unwrap();
        let i = pick(&k, n1, i1);
        let j = pick(&k, n2, i2);
        let l = pick(&k, n3, 0);
        let ij = k.mul(&i, &j).unwrap();
        prop_assert!(is_product(&k, &i, &j, &ij));
        prop_assert_eq!(ij, k.mul(&j, &i).unwrap());
        prop_assert_eq!(k.mul(&ij, &l).unwrap(), k.mul(&i, &k.mul(&j, &l).unwrap()).unwrap());
    }

    #[test]
    fn conjugation_is_an_involution_and_multiplicative((d, n1, i1, n2, i2) in field_and_pair()) {
        let k = QuadField::new(d).unwrap();
        let i = pick(&k, n1, i1);
        let j = pick(&k, n2, i2);
        prop_assert_eq!(k.conjugate(&k.conjugate(&i)), i);
        prop_assert_eq!(k.conjugate(&i).norm(), i.norm());
        prop_assert_eq!(
            k.conjugate(&k.mul(&i, &j).unwrap()),
            k.mul(&k.conjugate(&i), &k.conjugate(&j)).unwrap()
        );
    }

    #[test]
    fn split_prime_times_conjugate_is_rational(d in prop::sample::select(vec![1i64, 5, 17, 21, 23]), idx in 0usize..150) {
        let k = QuadField::new(d).unwrap();
        let primes = k.primes_up_to_norm(1000);
        let p = primes[idx % primes.len()];
        let prod = k.mul(&p, &k.conjugate(&p)).unwrap();
        prop_assert_eq!(prod, k.rational(p.norm() as i64));
    }
}
