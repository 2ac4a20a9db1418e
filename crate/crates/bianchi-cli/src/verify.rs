//! The regression suite over a fixture bundle.

use std::collections::BTreeSet;
use std::time::Instant;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use bianchi::algext::{AlgValue, FieldMap, ValueField};
use bianchi::characters::{character_group, quadratic_characters, ClassCharacter};
use bianchi::classgroup::ClassGroup;
use bianchi::dimensions::{derive_records, oldclass_principal_multiplicity, validate_row};
use bianchi::eigensystem::HeckeEigensystem;
use bianchi::fixtures::{class_relabeling, Bundle, LoadedSystems};
use bianchi::quadfield::{Ideal, QuadField, Splitting};
use bianchi::recovery::{project_to_principal, recover, FixtureOracle, RecoveryOptions};
use bianchi::{arith, Result};

use crate::{compare, synth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Failed in exactly the way a bundle file documents.
    Known,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub millis: Option<u128>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub bundle: String,
    pub field_disc: i64,
    pub checks: Vec<CheckResult>,
}

pub enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

type CheckFn<'a> = Box<dyn Fn() -> Result<Outcome> + Send + Sync + 'a>;

/// Round-trip cases across the five class group shapes.
pub const ROUND_TRIP_CASES: usize = 100;
pub const ROUND_TRIP_SEED: u64 = 0x6a09e667;
const ROUND_TRIP_BOUND: u64 = 200;

fn verdict(fails: Vec<String>, pass: String) -> Outcome {
    if fails.is_empty() {
        Outcome::Pass(pass)
    } else {
        Outcome::Fail(fails.join("; "))
    }
}

fn labels(k: &QuadField, ps: &[Ideal]) -> String {
    ps.iter().map(|p| k.label(p)).collect::<Vec<_>>().join(", ")
}

/// The only nontrivial quadratic character, when there is exactly one.
fn unique_quadratic(cg: &ClassGroup) -> Option<ClassCharacter> {
    let mut q: Vec<_> = quadratic_characters(cg).into_iter().filter(|c| !c.is_trivial()).collect();
    (q.len() == 1).then(|| q.remove(0))
}

pub fn class_groups(b: &Bundle) -> Result<Outcome> {
    let mut fails = Vec::new();
    let mut seen = Vec::new();
    for (d, want) in [(17, "C4"), (5, "C2"), (23, "C3"), (31, "C3"), (21, "C2xC2")] {
        let k = QuadField::new(d)?;
        let cg = ClassGroup::new(&k)?;
        let got = cg.structure_string();
        if got != want {
            fails.push(format!("d={d}: {got}, expected {want}"));
        }
        if d == 17 {
            let p = k.ideal_from_label("3.1")?;
            if cg.class_order(&cg.class_of(&p)) != 4 {
                fails.push("3.1 does not generate the class group of Q(sqrt(-17))".into());
            }
        }
        seen.push(format!("d={d} {got}"));
    }
    let fresh = ClassGroup::new(&b.field)?;
    if fresh.elementary_divisors() != b.class_group.elementary_divisors() {
        fails.push(format!(
            "bundle pin {} but computed {}",
            b.class_group.structure_string(),
            fresh.structure_string()
        ));
    }
    Ok(verdict(fails, format!("{}; bundle pin {}", seen.join(", "), b.class_group.structure_string())))
}

pub fn genus_law(b: &Bundle) -> Result<Outcome> {
    if b.field.disc() != -68 {
        return Ok(Outcome::Skipped("the congruence law is stated for Q(sqrt(-17))".into()));
    }
    let (k, cg) = (&b.field, &b.class_group);
    let chi2 = unique_quadratic(cg).expect("C4 has one quadratic character");
    let nonres = [3, 5, 6, 7, 10, 11, 12, 14];
    let mut fails = Vec::new();
    let mut checked = 0;
    for p in arith::primes_up_to(499) {
        let s = k.factor_rational_prime(p)?;
        for pp in s.primes() {
            let got = chi2.eval_class(cg, &cg.class_of(&pp)).as_sign().expect("quadratic");
            let by_kind = match s {
                Splitting::Ramified(_) | Splitting::Inert(_) => 1,
                Splitting::Split(..) => {
                    if p % 4 == 1 {
                        1
                    } else {
                        -1
                    }
                }
            };
            let minus = p % 4 == 3 && nonres.contains(&(p % 17)) && !matches!(s, Splitting::Inert(_));
            if got != by_kind || (got == -1) != minus {
                fails.push(format!("{}: chi2 = {got}", k.label(&pp)));
            }
            checked += 1;
        }
    }
    Ok(verdict(fails, format!("{checked} prime ideals above p < 500")))
}

fn max_norm(ls: &LoadedSystems) -> u64 {
    ls.systems.iter().flat_map(|(_, s)| s.alpha().keys().map(|p| p.norm())).max().unwrap_or(0)
}

pub fn recovery(b: &Bundle, file: &str) -> Result<Outcome> {
    let (k, cg) = (&b.field, &b.class_group);
    let o = &b.oracles.iter().find(|(f, _)| f == file).expect("named oracle").1;
    let Some(ls) = b.systems_at(&o.level) else {
        return Ok(Outcome::Skipped(format!("no stored systems at {}", o.level)));
    };
    let oracle = FixtureOracle::from_file(cg, o)?;
    let bound = max_norm(ls);
    let res = recover(cg, &oracle, &ls.level, &RecoveryOptions::with_bound(bound))?;
    let mut fails = Vec::new();
    if !res.gaps.is_empty() {
        fails.push(format!("gaps at {}", labels(k, &res.gaps.iter().map(|g| g.0).collect::<Vec<_>>())));
    }
    let got = &res.system;
    let mut found = None;
    for (name, src) in ls.corrected(cg)? {
        for psi in character_group(cg) {
            let t = src.twist(cg, &psi)?;
            if t.same_data(cg, got, true)? {
                found = Some((format!("{name} x {}", psi.label(cg)), t));
                break;
            }
        }
        if found.is_some() {
            break;
        }
    }
    let al = got.al_signs().iter().map(|(q, e)| format!("eps({}) = {e:+}", k.label(q))).collect::<Vec<_>>().join(", ");
    match &found {
        None => fails.push("recovered system is in no stored twist orbit".into()),
        Some((_, t))
            if got.character().is_trivial()
                && t.character().is_trivial()
                && !t.al_signs().is_empty()
                && t.al_signs() != got.al_signs() =>
        {
            fails.push(format!("Atkin-Lehner signs {al} differ from the table"));
        }
        _ => {}
    }
    let witness = found.map(|f| f.0).unwrap_or_default();
    Ok(verdict(
        fails,
        format!(
            "bound {bound}: {} primes, {} = {witness}, {al}, {} queries",
            got.alpha().len(),
            got.character().label(cg),
            res.queries
        ),
    ))
}

pub fn twist_orbit(b: &Bundle, ls: &LoadedSystems) -> Result<Outcome> {
    let (k, cg) = (&b.field, &b.class_group);
    let rows = ls.corrected(cg)?;
    let mut fails = Vec::new();
    let first = &rows[0].1;
    let orbit = first.twist_orbit(cg)?;
    for (name, s) in &rows {
        if !orbit.iter().any(|t| t.same_data(cg, s, false).unwrap_or(false)) {
            fails.push(format!("{name} is not a twist of {}", rows[0].0));
        }
    }
    if orbit.len() != rows.len() {
        fails.push(format!("orbit has {} members, table has {}", orbit.len(), rows.len()));
    }
    for sys in ls.file.errata.iter().map(|e| e.system.as_str()).collect::<BTreeSet<_>>() {
        let printed = ls.get(sys).expect("validated at load");
        let corrected = &rows.iter().find(|(n, _)| n == sys).expect("same names").1;
        let bad = corrected.agrees_on_common_primes(printed)?;
        let mut want: Vec<Ideal> = ls
            .file
            .errata
            .iter()
            .filter(|e| e.system == sys)
            .map(|e| k.ideal_from_label(&e.prime))
            .collect::<Result<_>>()?;
        want.sort_by_key(|p| k.label_key(p));
        let mut bad = bad;
        bad.sort_by_key(|p| k.label_key(p));
        if bad != want {
            fails.push(format!("printed {sys} differs at {}, errata list {}", labels(k, &bad), labels(k, &want)));
        }
    }
    let relabel = match &ls.file.printed_classes {
        Some(pc) => match class_relabeling(cg, pc)? {
            Some(1) => ", printed classes agree".to_string(),
            Some(u) => format!(", printed classes relabeled c -> c^{u}"),
            None => {
                fails.push("printed classes fit no automorphism".into());
                String::new()
            }
        },
        None => String::new(),
    };
    Ok(verdict(
        fails,
        format!("{} rows = twist orbit of {}, {} errata{relabel}", rows.len(), rows[0].0, ls.file.errata.len()),
    ))
}

/// sum_k (aX - bX^2)^k up to X^n.
fn euler_series(f: &ValueField, a: &AlgValue, b: &AlgValue, n: usize) -> Vec<AlgValue> {
    let step = [f.zero(), a.clone(), f.neg(b)];
    let mut total = vec![f.zero(); n + 1];
    let mut power = vec![f.zero(); n + 1];
    power[0] = f.one();
    for _ in 0..=n {
        for (t, p) in total.iter_mut().zip(&power) {
            *t = f.add(t, p);
        }
        let mut next = vec![f.zero(); n + 1];
        for (i, p) in power.iter().enumerate() {
            for (j, s) in step.iter().enumerate() {
                if i + j <= n {
                    next[i + j] = f.add(&next[i + j], &f.mul(p, s));
                }
            }
        }
        power = next;
    }
    total
}

pub fn euler_factors(b: &Bundle) -> Result<Outcome> {
    let cg = &b.class_group;
    let mut fails = Vec::new();
    let mut n = 0;
    for (name, s) in b.all_systems()? {
        let f = s.field();
        for (p, a) in s.alpha() {
            let np = f.scale(&s.chi_value(cg, p), &BigRational::from_integer(p.norm().into()));
            for (e, want) in euler_series(f, a, &np, 4).iter().enumerate() {
                if &s.prime_power_coefficient(cg, p, e as u32)? != want {
                    fails.push(format!("{name} at {}^{e}", cg.field().label(p)));
                }
                n += 1;
            }
        }
    }
    Ok(verdict(fails, format!("{n} coefficients a(p^e), e <= 4")))
}

pub fn table1_rows(b: &Bundle) -> Result<Outcome> {
    let Some(t) = &b.dimensions else {
        return Ok(Outcome::Skipped("no dimension table in the bundle".into()));
    };
    let records = derive_records(&t.rows, b.hecke_fields.as_ref(), &b.manifest.records)?;
    let mut fails = Vec::new();
    let mut deficits = Vec::new();
    for row in &t.rows {
        let r = validate_row(Some(&b.field), row, &records);
        if !r.ok {
            fails.push(format!("{}: {}", row.level, r.failures.join(", ")));
        }
        if r.deficit > 0 {
            deficits.push(format!("deficit {} at {}", r.deficit, row.level));
        }
    }
    let levels: usize = t.rows.iter().map(|r| r.levels().len()).sum();
    let nd: u64 = t.rows.iter().map(|r| r.nd * r.levels().len() as u64).sum();
    Ok(verdict(fails, format!("{} rows, {levels} levels, total nd {nd}; {}", t.rows.len(), deficits.join(", "))))
}

pub fn hecke_fields(b: &Bundle) -> Result<Outcome> {
    let Some(t) = &b.hecke_fields else {
        return Ok(Outcome::Skipped("no Hecke field table in the bundle".into()));
    };
    let cg = &b.class_group;
    let mut fails = Vec::new();
    let mut compared = 0;
    for e in &t.entries {
        let Some(ls) = b.systems_at(&e.level) else { continue };
        let trivial: Vec<&HeckeEigensystem> =
            ls.systems.iter().map(|(_, s)| s).filter(|s| s.character().is_trivial()).collect();
        let Some(s) = trivial.get(e.index as usize - 1) else { continue };
        let r = s.hecke_field_report(cg);
        if r.principal_degree as u64 != e.kf_degree || r.hecke_degree as u64 != e.k_full_degree {
            fails.push(format!(
                "{} #{}: degrees ({}, {}), table ({}, {})",
                e.level, e.index, r.principal_degree, r.hecke_degree, e.kf_degree, e.k_full_degree
            ));
        }
        compared += 1;
    }
    for (name, s) in b.all_systems()? {
        if !s.hecke_field_report(cg).relation_ok {
            fails.push(format!("{name}: [k_F:k_f] is not 1, 2 or 4"));
        }
    }
    Ok(verdict(fails, format!("{compared} table entries against stored systems, {} entries in all", t.entries.len())))
}

/// True unless `tau` fixes every generator.
fn moves(f: &ValueField, tau: &FieldMap) -> bool {
    let mut gens: Vec<AlgValue> = (0..f.num_roots()).map(|i| f.root(i)).collect();
    gens.push(f.theta());
    gens.iter().any(|g| &f.apply(tau, f, g) != g)
}

fn named<'a>(rows: &'a [(String, HeckeEigensystem)], names: &[&str]) -> Option<Vec<&'a HeckeEigensystem>> {
    names.iter().map(|n| rows.iter().find(|(m, _)| m == n).map(|(_, s)| s)).collect()
}

pub fn structure_2_1(b: &Bundle) -> Result<Outcome> {
    let cg = &b.class_group;
    let (Some(ls), Some(chi2)) = (b.systems_at("2.1"), unique_quadratic(cg)) else {
        return Ok(Outcome::Skipped("no level 2.1 systems".into()));
    };
    let rows = ls.corrected(cg)?;
    let Some(f) = named(&rows, &["F0", "F1", "F2", "F3"]) else {
        return Ok(Outcome::Skipped("level 2.1 systems are not F0..F3".into()));
    };
    let mut fails = Vec::new();
    let field = f[0].field();
    let root = field.root(0);
    let inner: Vec<_> =
        f[0].inner_twist_pairs(cg)?.into_iter().filter(|(tau, _)| field.apply(tau, field, &root) != root).collect();
    let ok = inner.len() == 1 && field.apply(&inner[0].0, field, &root) == field.neg(&root) && inner[0].1 == chi2;
    if !ok {
        fails.push("F0 lacks the inner twist (sqrt2 -> -sqrt2, chi2)".into());
    }
    if !f[0].galois_conjugate_system(cg)?.same_data(cg, f[2], false)? {
        fails.push("F0^sigma != F2".into());
    }
    for (i, want) in [(0, false), (1, true), (3, true)] {
        if f[i].base_change_candidate(cg)? != want {
            fails.push(format!("F{i} base change candidate: {}", !want));
        }
    }
    Ok(verdict(fails, "F0 inner twist (sqrt2 -> -sqrt2, chi2), F0^sigma = F2, F1 and F3 base-change candidates".into()))
}

pub fn orbits_16_1(b: &Bundle) -> Result<Outcome> {
    let (k, cg) = (&b.field, &b.class_group);
    let (Some(ls), Some(chi2)) = (b.systems_at("16.1"), unique_quadratic(cg)) else {
        return Ok(Outcome::Skipped("no level 16.1 systems".into()));
    };
    let rows = ls.corrected(cg)?;
    let Some(f) = named(&rows, &["F1", "F2", "F3", "F4", "F5", "F6", "F7"]) else {
        return Ok(Outcome::Skipped("level 16.1 systems are not F1..F7".into()));
    };
    let mut fails = Vec::new();
    let r = f[0].hecke_field_report(cg);
    if r.hecke_degree != 4 {
        fails.push(format!("F1 Hecke field {} has degree {}", r.hecke_field, r.hecke_degree));
    }
    let field = f[0].field();
    let conj_twist = f[0].inner_twist_pairs(cg)?.iter().any(|(tau, psi)| psi == &chi2 && moves(field, tau));
    if !conj_twist {
        fails.push("F1 is not conjugate to its chi2 twist".into());
    }
    for (i, s) in f.iter().enumerate().skip(1) {
        let r = s.hecke_field_report(cg);
        if r.hecke_degree != 2 {
            fails.push(format!("F{} Hecke field {} has degree {}", i + 1, r.hecke_field, r.hecke_degree));
        }
    }
    for (a, c) in [(1, 2), (3, 4), (5, 6)] {
        let bad = f[a].twist(cg, &chi2)?.agrees_on_common_primes(f[c])?;
        if !bad.is_empty() {
            fails.push(format!("F{} != F{} x {} at {}", c + 1, a + 1, chi2.label(cg), labels(k, &bad)));
        }
    }
    Ok(verdict(fails, "F1 degree 4 and conjugate to its twist, F2..F7 degree 2 in twist pairs".into()))
}

fn sorted_set(v: &[String]) -> Vec<String> {
    let mut out: Vec<String> = v.to_vec();
    out.sort_by(|x, y| match (x.parse::<i64>(), y.parse::<i64>()) {
        (Ok(a), Ok(b)) => a.cmp(&b),
        _ => x.cmp(y),
    });
    out.dedup();
    out
}

pub fn principal(b: &Bundle, ls: &LoadedSystems) -> Result<Outcome> {
    let (k, cg) = (&b.field, &b.class_group);
    let mut fails = Vec::new();
    let mut oks = Vec::new();
    for (op, printed) in ls.principal_checks(cg)? {
        let got = sorted_set(&ls.principal_values(cg, &op)?);
        let want = sorted_set(&printed);
        let name = op.display(k);
        if got == want {
            oks.push(format!("{name}: {{{}}}", got.join(", ")));
        } else {
            fails.push(format!("{name}: computed {{{}}}, printed {{{}}}", got.join(", "), want.join(", ")));
        }
    }
    Ok(verdict(fails, oks.join("; ")))
}

pub fn compare_ap(b: &Bundle, label: &str) -> Result<Outcome> {
    let curve = b.curve(label).cloned().expect("named curve");
    let r = compare::run(compare::CompareRequest {
        bundle: Some(b),
        level: Some(curve.conductor.clone()),
        name: None,
        systems: None,
        curve: Some(curve),
        bound: None,
    })?;
    let a = &r.report;
    let bad = a
        .bad_primes
        .iter()
        .map(|x| {
            format!(
                "{} AL {:+} vs {}",
                x.prime,
                x.al_sign,
                x.reduction.map_or("none".into(), |r| format!("{r:?}").to_lowercase())
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    let mut fails: Vec<String> = a.mismatched.iter().map(|(p, v, e)| format!("{p}: alpha {v}, a_p(E) {e}")).collect();
    fails.extend(a.bad_primes.iter().filter(|x| !x.ok).map(|x| format!("bad prime {} disagrees", x.prime)));
    if a.compared() == 0 {
        fails.push("no primes compared".into());
    }
    Ok(verdict(fails, format!("{} vs {}: {} primes match; {bad}", r.system, a.curve, a.matched.len())))
}

pub fn oldforms(b: &Bundle) -> Result<Outcome> {
    let (k, cg) = (&b.field, &b.class_group);
    let ideals: Vec<Ideal> = (1..=30).flat_map(|n| k.ideals_of_norm(n)).collect();
    let psis: Vec<ClassCharacter> = quadratic_characters(cg).into_iter().filter(|c| !c.is_trivial()).collect();
    let mut fails = Vec::new();
    let mut cases = 0;
    for m in &ideals {
        for q in &ideals {
            let n = k.mul(m, q)?;
            let sigma = k.sigma0(q)?;
            if oldclass_principal_multiplicity(cg, m, None, &n)? != sigma {
                fails.push(format!("{} in {}: no self-twist but not sigma0", k.label(m), k.label(&n)));
            }
            for psi in &psis {
                let got = oldclass_principal_multiplicity(cg, m, Some(psi), &n)?;
                let twice: i64 =
                    k.divisors(q)?.iter().map(|d| 1 + psi.eval_class(cg, &cg.class_of(d)).as_sign().unwrap_or(0)).sum();
                let all_plus = k.factor_ideal(q)?.iter().all(|(p, _)| psi.eval_class(cg, &cg.class_of(p)).is_one());
                if 2 * got as i64 != twice || got > sigma || (got == sigma) != all_plus {
                    fails.push(format!("{} in {} with {}: {got}", k.label(m), k.label(&n), psi.label(cg)));
                }
                if k.is_prime_ideal(q) && !psi.eval_class(cg, &cg.class_of(q)).is_one() && got != 1 {
                    fails.push(format!("prime step {} with psi = -1 gives {got}", k.label(q)));
                }
                cases += 1;
            }
        }
    }
    Ok(verdict(fails, format!("{cases} (m, n, psi) cases over ideals of norm <= 30")))
}

pub fn round_trip(cases: usize, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<ClassGroup> =
        synth::FIELDS.iter().map(|&d| ClassGroup::new(&QuadField::new(d)?)).collect::<Result<_>>()?;
    let mut fails = Vec::new();
    for i in 0..cases {
        let cg = &groups[i % groups.len()];
        let f = synth::random_system(cg, &mut rng, ROUND_TRIP_BOUND)?;
        let res =
            recover(cg, &project_to_principal(cg, &f), f.level(), &RecoveryOptions::with_bound(ROUND_TRIP_BOUND))?;
        let tag = format!("case {i} (d={})", cg.field().d());
        if !res.gaps.is_empty() {
            fails.push(format!("{tag}: gaps"));
        }
        let Some(w) = synth::orbit_witness(cg, &f, &res.system)? else {
            fails.push(format!("{tag}: not in the twist orbit"));
            continue;
        };
        let two = cg.genus_data()?.two_torsion;
        if two.iter().all(|c| f.character().eval_class(cg, c).is_one()) && !res.system.character().is_trivial() {
            fails.push(format!("{tag}: character {} should be trivial", res.system.character().label(cg)));
        }
        if f.character().is_trivial() && w.al_signs() != res.system.al_signs() {
            fails.push(format!("{tag}: Atkin-Lehner signs differ"));
        }
    }
    Ok(verdict(fails, format!("{cases} synthesized systems over CL 1, C2, C3, C4, C2xC2 to norm {ROUND_TRIP_BOUND}")))
}

/// Every check for the bundle, in report order.
fn checks(b: &Bundle) -> Vec<(String, CheckFn<'_>)> {
    let mut out: Vec<(String, CheckFn<'_>)> = vec![
        ("class-groups".into(), Box::new(move || class_groups(b))),
        ("genus-law".into(), Box::new(move || genus_law(b))),
    ];
    for (f, o) in &b.oracles {
        out.push((format!("recovery {}", o.level), Box::new(move || recovery(b, f))));
    }
    for ls in &b.eigensystems {
        if ls.file.printed_classes.is_some() || !ls.file.errata.is_empty() {
            out.push((format!("twist-orbit {}", ls.file.level), Box::new(move || twist_orbit(b, ls))));
        }
    }
    out.push(("euler-factors".into(), Box::new(move || euler_factors(b))));
    out.push(("table1-rows".into(), Box::new(move || table1_rows(b))));
    out.push(("hecke-fields".into(), Box::new(move || hecke_fields(b))));
    out.push(("structure 2.1".into(), Box::new(move || structure_2_1(b))));
    out.push(("orbits 16.1".into(), Box::new(move || orbits_16_1(b))));
    for ls in &b.eigensystems {
        if !ls.file.principal_checks.is_empty() {
            out.push((format!("principal {}", ls.file.level), Box::new(move || principal(b, ls))));
        }
    }
    for c in &b.curves {
        out.push((format!("compare-ap {}", c.label), Box::new(move || compare_ap(b, &c.label))));
    }
    out.push(("oldforms".into(), Box::new(move || oldforms(b))));
    out.push(("round-trip".into(), Box::new(move || round_trip(ROUND_TRIP_CASES, ROUND_TRIP_SEED))));
    out
}

/// Runs every check concurrently and collects the results in order.
pub fn run(b: &Bundle, timing: bool) -> VerifyReport {
    let list = checks(b);
    let results: Vec<(Result<Outcome>, u128)> = std::thread::scope(|s| {
        let handles: Vec<_> = list
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let r = f();
                    (r, t.elapsed().as_millis())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| (Ok(Outcome::Fail("check panicked".into())), 0)))
            .collect()
    });
    let checks = list
        .iter()
        .zip(results)
        .map(|((name, _), (r, ms))| {
            let (status, detail) = match r {
                Ok(Outcome::Pass(d)) => (Status::Pass, d),
                Ok(Outcome::Fail(d)) => (Status::Fail, d),
                Ok(Outcome::Skipped(d)) => (Status::Skipped, d),
                Err(e) => (Status::Fail, e.to_string()),
            };
            let documented = b.eigensystems.iter().find_map(|ls| ls.discrepancy(name));
            let (status, note) = match documented {
                Some(d) if status == Status::Fail && d.detail == detail => (Status::Known, Some(d.note.clone())),
                _ => (status, None),
            };
            CheckResult { name: name.clone(), status, detail, note, millis: timing.then_some(ms) }
        })
        .collect();
    VerifyReport { bundle: b.manifest.name.clone(), field_disc: b.field.disc(), checks }
}

impl VerifyReport {
    pub fn count(&self, s: Status) -> usize {
        self.checks.iter().filter(|c| c.status == s).count()
    }

    pub fn ok(&self) -> bool {
        self.count(Status::Fail) == 0
    }

    pub fn render(&self) -> String {
        let mut s = format!("bundle {} (disc {})\n", self.bundle, self.field_disc);
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let st = format!("{:?}", c.status).to_lowercase();
            s.push_str(&format!("{st:<8} {:<w$}  {}", c.name, c.detail));
            if let Some(ms) = c.millis {
                s.push_str(&format!("  ({ms} ms)"));
            }
            s.push('\n');
            if let Some(n) = &c.note {
                s.push_str(&format!("{:<8} {:<w$}  note: {n}\n", "", ""));
            }
        }
        s.push_str(&format!(
            "{} pass, {} fail, {} known, {} skipped\n",
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Known),
            self.count(Status::Skipped)
        ));
        s
    }
}
