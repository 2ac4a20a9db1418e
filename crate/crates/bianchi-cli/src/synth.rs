//! Seeded random eigensystems for the round-trip check.

use std::collections::BTreeMap;

use rand::Rng;

use bianchi::algext::ValueField;
use bianchi::characters::character_group;
use bianchi::classgroup::ClassGroup;
use bianchi::eigensystem::HeckeEigensystem;
use bianchi::Result;

/// One field per class group shape: 1, C2, C3, C4, C2 x C2.
pub const FIELDS: [i64; 5] = [1, 5, 23, 17, 21];

/// A random system with values in Q or Q(sqrt2), a random character and a
/// prime level of norm at most 20, with alpha at every good prime up to `bound`.
pub fn random_system(cg: &ClassGroup, rng: &mut impl Rng, bound: u64) -> Result<HeckeEigensystem> {
    let k = cg.field();
    let small = k.primes_up_to_norm(20);
    let level = small[rng.gen_range(0..small.len())];
    let chars = character_group(cg);
    let chi = chars[rng.gen_range(0..chars.len())].clone();
    let q = ValueField::rational();
    let f = if rng.gen_bool(0.5) { q.adjoin(&q.from_int(2), Some("sqrt2"))? } else { q };
    let mut alpha = BTreeMap::new();
    for p in k.primes_up_to_norm(bound) {
        if !k.is_coprime(&p, &level) {
            continue;
        }
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
        alpha.insert(p, v);
    }
    let al = if chi.is_trivial() {
        BTreeMap::from([(level, if rng.gen_bool(0.5) { 1 } else { -1 })])
    } else {
        BTreeMap::new()
    };
    HeckeEigensystem::new(cg, level, chi, f, alpha, al)
}

/// The twist of `source` that agrees with `got` at every good prime, if any.
pub fn orbit_witness(
    cg: &ClassGroup,
    source: &HeckeEigensystem,
    got: &HeckeEigensystem,
) -> Result<Option<HeckeEigensystem>> {
    for psi in character_group(cg) {
        let t = source.twist(cg, &psi)?;
        if t.same_data(cg, got, true)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}
