#![allow(dead_code)]

use std::path::PathBuf;

use bianchi::fixtures::Bundle;

pub fn bundle_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/q17")
}

pub fn bundle() -> Bundle {
    Bundle::load(bundle_dir()).expect("shipped bundle loads")
}

use std::collections::BTreeMap;

use bianchi::algext::ValueField;
use bianchi::characters::character_group;
use bianchi::classgroup::ClassGroup;
use bianchi::eigensystem::HeckeEigensystem;
use bianchi::quadfield::QuadField;
use rand::Rng;

/// One field per class group shape: 1, C2, C3, C4, C2 x C2.
pub const FIELDS: [i64; 5] = [1, 5, 23, 17, 21];

pub fn field(d: i64) -> (QuadField, ClassGroup) {
    let k = QuadField::new(d).unwrap();
    let cg = ClassGroup::new(&k).unwrap();
    (k, cg)
}

/// A random eigensystem with values in Q or Q(sqrt2), a random character,
/// a prime level of small norm, and alpha at every good prime up to `bound`.
pub fn random_system(cg: &ClassGroup, rng: &mut impl Rng, bound: u64) -> HeckeEigensystem {
    let k = cg.field();
    let small: Vec<_> = k.primes_up_to_norm(20);
    let level = small[rng.gen_range(0..small.len())];
    let chars = character_group(cg);
    let chi = chars[rng.gen_range(0..chars.len())].clone();
    let q = ValueField::rational();
    let f = if rng.gen_bool(0.5) { q.adjoin(&q.from_int(2), Some("sqrt2")).unwrap() } else { q };
    let alpha: BTreeMap<_, _> = k
        .primes_up_to_norm(bound)
        .into_iter()
        .filter(|p| k.is_coprime(p, &level))
        .map(|p| {
            let v = if rng.gen_bool(0.125) {
                f.zero()
            } else {
                let a = f.from_int(rng.gen_range(-6..=6));
                if f.degree() > 1 {
                    f.add(&a, &f.mul(&f.from_int(rng.gen_range(-3..=3)), &f.root(0)))
                } else {
                    a
                }
            };
            (p, v)
        })
        .collect();
    let al = if chi.is_trivial() {
        BTreeMap::from([(level, if rng.gen_bool(0.5) { 1 } else { -1 })])
    } else {
        BTreeMap::new()
    };
    HeckeEigensystem::new(cg, level, chi, f, alpha, al).unwrap()
}
