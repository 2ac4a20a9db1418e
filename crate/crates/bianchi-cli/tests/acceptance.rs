//! Acceptance criteria 1-9 against the shipped Q(sqrt-17) bundle.
//!
//! Prints one line per criterion. The binary exits nonzero when a criterion
//! passes or fails other than as recorded in `EXPECTED_FAIL`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bianchi::algext::{AlgValue, ValueField};
use bianchi::characters::{character_group, quadratic_characters, ClassCharacter};
use bianchi::classgroup::ClassGroup;
use bianchi::dimensions::{derive_records, oldclass_principal_multiplicity, validate_row, LiftShape};
use bianchi::eigensystem::HeckeEigensystem;
use bianchi::fixtures::{class_relabeling, compare_ap, Bundle, CurveFile, Reduction};
use bianchi::quadfield::{Ideal, QuadField, Splitting};
use bianchi::recovery::{
    project_to_principal, recover, FixtureOracle, Oracle, OracleEntry, OracleFile, PrincipalOperator, RecordingOracle,
    RecoveryOptions,
};
use bianchi::{Error, Result};

/// Criteria that fail on the shipped data, and the detail they must fail with.
const EXPECTED_FAIL: &[(u32, &str)] = &[(
    7,
    "T(3.1,3.1) T(9.1) on 16.1: computed {-5, -1, 1, 3}, printed {-5, -2, 2, 3}; \
     F5 != F4 x chi2 at 13.1, 13.2; F7 != F6 x chi2 at 13.1, 13.2",
)];

const ROUND_TRIPS: usize = 100;
const ROUND_TRIP_BOUND: u64 = 200;
const ROUND_TRIP_SECONDS: f64 = 60.0;
const CLASS_GROUP_SECONDS: f64 = 1.0;
const GENUS_PRIME_BOUND: u64 = 500;
const OLDFORM_CASES: usize = 600;

type Check<'a> = Box<dyn Fn() -> Result<Verdict> + 'a>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass: true, detail: detail.into() })
}

fn judge(fails: Vec<String>, ok: String) -> Result<Verdict> {
    if fails.is_empty() {
        pass(ok)
    } else {
        Ok(Verdict { pass: false, detail: fails.join("; ") })
    }
}

fn bundle() -> Bundle {
    Bundle::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/q17")).expect("shipped bundle loads")
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn powmod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

/// Legendre symbol for an odd prime p by Euler's criterion.
fn legendre(a: i64, p: u64) -> i64 {
    let a = a.rem_euclid(p as i64) as u64;
    match powmod(a, (p - 1) / 2, p) {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

fn names(k: &QuadField, ps: &[Ideal]) -> String {
    ps.iter().map(|p| k.label(p)).collect::<Vec<_>>().join(", ")
}

fn fundamental_disc(d: i64) -> i64 {
    if d % 4 == 3 {
        -d
    } else {
        -4 * d
    }
}

// ---------- 1 ----------

/// (h, number of ambiguous reduced forms) by direct enumeration.
fn reduced_form_census(disc: i64) -> (usize, usize) {
    let mut h = 0;
    let mut ambiguous = 0;
    let mut a = 1;
    while 3 * a * a <= -disc {
        for b in -a + 1..=a {
            let num = b * b - disc;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || (c == a && b < 0) {
                continue;
            }
            h += 1;
            if b == 0 || b == a || a == c {
                ambiguous += 1;
            }
        }
        a += 1;
    }
    (h, ambiguous)
}

fn criterion_1() -> Result<Verdict> {
    let want = [(17, "C4"), (5, "C2"), (23, "C3"), (31, "C3"), (21, "C2xC2")];
    let mut fails = Vec::new();
    let mut seen = Vec::new();
    let t0 = Instant::now();
    let mut groups = Vec::new();
    for (d, _) in want {
        let k = QuadField::new(d)?;
        groups.push(ClassGroup::new(&k)?);
    }
    let secs = t0.elapsed().as_secs_f64();
    for ((d, s), cg) in want.iter().zip(&groups) {
        let (h, amb) = reduced_form_census(fundamental_disc(*d));
        // h/|CL[2]| and |CL[2]| pin down every group of order at most 4
        let shape = match (h, amb) {
            (1, 1) => "C1",
            (2, 2) => "C2",
            (3, 1) => "C3",
            (4, 2) => "C4",
            (4, 4) => "C2xC2",
            _ => "?",
        };
        if shape != *s || cg.h() as usize != h || cg.structure_string() != *s {
            fails.push(format!(
                "d = {d}: library {} (h = {}), forms give {shape} (h = {h})",
                cg.structure_string(),
                cg.h()
            ));
        }
        seen.push(format!("{d}: {}", cg.structure_string()));
    }
    // 3.1 = [3, 1+w] has order 4: its square has norm 9 but is not (3), the
    // only principal ideal of norm 9, and its fourth power is (8 + w) or (8 - w)
    let k = groups[0].field();
    let p3 = k.ideal_from_label("3.1")?;
    let sq = k.pow(&p3, 2);
    let fourth = k.pow(&p3, 4);
    let order_four = sq != k.rational(3) && (fourth == k.principal(8, 1)? || fourth == k.principal(8, -1)?);
    if !order_four || groups[0].class_order(&groups[0].class_of(&p3)) != 4 {
        fails.push("3.1 does not generate the class group of Q(sqrt-17)".into());
    }
    if secs >= CLASS_GROUP_SECONDS {
        fails.push(format!("{secs:.3} s >= {CLASS_GROUP_SECONDS} s"));
    }
    judge(fails, format!("{}; 3.1 = [3, 1+w] has order 4; {secs:.3} s < {CLASS_GROUP_SECONDS} s", seen.join(", ")))
}

// ---------- 2 ----------

fn criterion_2() -> Result<Verdict> {
    let k = QuadField::new(17)?;
    let cg = ClassGroup::new(&k)?;
    let chi2: Vec<ClassCharacter> = quadratic_characters(&cg).into_iter().filter(|c| !c.is_trivial()).collect();
    let [chi2] = chi2.as_slice() else {
        return Ok(Verdict { pass: false, detail: format!("{} nontrivial quadratic characters", chi2.len()) });
    };
    let minus_residues = [3, 5, 6, 7, 10, 11, 12, 14];
    let mut fails = Vec::new();
    let (mut split, mut inert, mut ramified, mut minus) = (0, 0, 0, 0);
    for p in (2..GENUS_PRIME_BOUND).filter(|&p| is_prime(p)) {
        let kind = if p == 2 || p == 17 { 0 } else { legendre(-17, p) };
        let sp = k.factor_rational_prime(p)?;
        let shape_ok =
            matches!((&sp, kind), (Splitting::Ramified(_), 0) | (Splitting::Split(..), 1) | (Splitting::Inert(_), -1));
        if !shape_ok {
            fails.push(format!("{p}: library splitting {sp:?}, Legendre symbol {kind}"));
            continue;
        }
        let want = match kind {
            1 => {
                split += 1;
                if p % 4 == 1 {
                    1
                } else {
                    -1
                }
            }
            0 => {
                ramified += 1;
                1
            }
            _ => {
                inert += 1;
                1
            }
        };
        // the congruence description of the minus set
        let listed = p % 4 == 3 && minus_residues.contains(&(p % 17));
        if (want == -1) != listed {
            fails.push(format!("{p}: split rule and residue list disagree"));
        }
        for q in sp.primes() {
            let got = chi2.eval_class(&cg, &cg.class_of(&q)).as_sign();
            if got != Some(want) {
                fails.push(format!("chi2({}) = {got:?}, expected {want}", k.label(&q)));
            }
            if want == -1 {
                minus += 1;
            }
        }
    }
    judge(
        fails,
        format!("p < {GENUS_PRIME_BOUND}: {split} split, {inert} inert, {ramified} ramified; chi2 = -1 at {minus} prime ideals"),
    )
}

// ---------- 3 ----------

fn entry(aa: Option<&str>, t: Option<&str>, w: Option<&str>, value: &str) -> OracleEntry {
    OracleEntry { aa: aa.map(Into::into), t: t.map(Into::into), w: w.map(Into::into), value: value.into() }
}

fn criterion_3(b: &Bundle) -> Result<Verdict> {
    let (k, cg) = (&b.field, &b.class_group);
    let level = k.ideal_from_label("2.1")?;
    let quoted = OracleFile {
        field_disc: -68,
        level: "2.1".into(),
        field: None,
        values: vec![
            entry(Some("13.1"), None, None, "1"),
            entry(Some("3.1"), Some("3.1^2"), None, "5"),
            entry(None, Some("3.1*3.2"), None, "-8"),
            entry(Some("3.1"), Some("13.1"), None, "-2"),
            entry(Some("3.1"), None, Some("2.1"), "-1"),
        ],
    };
    let mut fails = Vec::new();
    let small = FixtureOracle::from_file(cg, &quoted)?;
    let primes: Vec<Ideal> = ["3.1", "3.2", "13.1"].iter().map(|l| k.ideal_from_label(l)).collect::<Result<_>>()?;
    let opts = RecoveryOptions { primes: Some(primes.clone()), ..RecoveryOptions::with_bound(13) };
    let res = recover(cg, &small, &level, &opts)?;
    let s = &res.system;
    let f = s.field();
    if !res.gaps.is_empty() {
        fails.push(format!("gaps at {}", names(k, &res.gaps.iter().map(|g| g.0).collect::<Vec<_>>())));
    }
    if !s.character().is_trivial() {
        fails.push(format!("character {}", s.character().label(cg)));
    }
    let got: Vec<String> = primes.iter().map(|p| s.alpha_at(p).map_or("-".into(), |v| f.format(v))).collect();
    if got != ["2*sqrt2", "-2*sqrt2", "-2"] {
        fails.push(format!("alpha(3.1, 3.2, 13.1) = {}", got.join(", ")));
    }
    if let Some(v) = s.alpha_at(&primes[0]) {
        if f.mul(v, v) != f.from_int(8) || !f.is_positive(v) {
            fails.push("alpha(3.1) is not the positive root of 8".into());
        }
    }
    if s.al_signs().get(&level) != Some(&-1) {
        fails.push(format!("eps(2.1) = {:?}", s.al_signs().get(&level)));
    }

    // the full oracle, twisted onto each corrected row of the printed table
    let ls = b.systems_at("2.1").expect("level 2.1 systems");
    let full = FixtureOracle::from_file(cg, b.oracle("2.1").expect("oracle for 2.1"))?;
    let r = recover(cg, &full, &level, &RecoveryOptions::with_bound(25))?.system;
    let orbit: Vec<(ClassCharacter, HeckeEigensystem)> =
        character_group(cg).into_iter().map(|psi| Ok((psi.clone(), r.twist(cg, &psi)?))).collect::<Result<_>>()?;
    let mut matched = Vec::new();
    for (name, row) in ls.corrected(cg)? {
        let hit = orbit.iter().find(|(_, t)| {
            t.character() == row.character()
                && row.alpha().keys().all(|p| t.alpha_at(p).is_some())
                && t.agrees_on_common_primes(&row).is_ok_and(|bad| bad.is_empty())
        });
        match hit {
            Some((psi, _)) => matched.push(format!("{name} = R x {}", psi.label(cg))),
            None => fails.push(format!("{name} is not a twist of the recovered system")),
        }
    }
    let relabel = ls.file.printed_classes.as_ref().map(|c| class_relabeling(cg, c)).transpose()?.flatten();
    if relabel != Some(3) {
        fails.push(format!("printed class row relabeling {relabel:?}, expected c -> c^3"));
    }
    // the printed F2 row is off the orbit exactly at the errata primes
    let printed = ls.get("F2").expect("F2");
    let f0 = ls.get("F0").expect("F0");
    let chi2 = quadratic_characters(cg).into_iter().find(|c| !c.is_trivial()).expect("chi2");
    let off = f0.twist(cg, &chi2)?.agrees_on_common_primes(printed)?;
    let errata: Vec<&str> = ls.file.errata.iter().map(|e| e.prime.as_str()).collect();
    if names(k, &off) != errata.join(", ") || names(k, &off) != "3.1, 3.2, 11.1, 11.2" {
        fails.push(format!("printed F2 differs from F0 x chi2 at {}", names(k, &off)));
    }
    if orbit.iter().any(|(_, t)| t.agrees_on_common_primes(printed).is_ok_and(|bad| bad.is_empty())) {
        fails.push("printed F2 is in the orbit, the errata are not needed".into());
    }
    judge(
        fails,
        format!(
            "quoted values give chi0, 2*sqrt2, -2*sqrt2, -2, eps(2.1) = -1 in {} queries; {} at 12 primes; classes printed as c -> c^3; printed F2 corrected at {}",
            res.queries,
            matched.join(", "),
            names(k, &off)
        ),
    )
}

// ---------- 4 ----------

/// alpha(p^e) by the Hecke recursion, written out here.
fn power_coefficient(cg: &ClassGroup, s: &HeckeEigensystem, p: &Ideal, e: u32) -> Result<AlgValue> {
    let k = cg.field();
    let f = s.field();
    let a = s.alpha_at(p).ok_or_else(|| Error::Oracle(format!("alpha({})", k.label(p))))?;
    let np = if k.is_coprime(p, s.level()) {
        f.scale(&s.chi_of_class(&cg.class_of(p)), &BigRational::from_integer(p.norm().into()))
    } else {
        f.zero()
    };
    let (mut prev, mut cur) = (f.zero(), f.one());
    for _ in 0..e {
        let next = f.sub(&f.mul(a, &cur), &f.mul(&np, &prev));
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// chi(a) alpha(b) eps(q), computed without the library projection.
struct Projection<'a> {
    cg: &'a ClassGroup,
    s: &'a HeckeEigensystem,
}

impl Oracle for Projection<'_> {
    fn field(&self) -> &ValueField {
        self.s.field()
    }

    fn query(&self, op: &PrincipalOperator) -> Result<AlgValue> {
        let (cg, s) = (self.cg, self.s);
        let k = cg.field();
        let f = s.field();
        let mut v = s.chi_of_class(&cg.class_of(op.aa()));
        for (p, e) in k.factor_ideal(op.t())? {
            v = f.mul(&v, &power_coefficient(cg, s, &p, e)?);
        }
        if let Some(q) = op.w() {
            for (p, _) in k.factor_ideal(q)? {
                let sign = s
                    .al_signs()
                    .iter()
                    .find(|(qq, _)| k.divides(&p, qq))
                    .map(|(_, e)| *e)
                    .ok_or_else(|| Error::Oracle(format!("eps({})", k.label(&p))))?;
                v = f.scale(&v, &BigRational::from_integer(sign.into()));
            }
        }
        Ok(v)
    }
}

fn random_value(f: &ValueField, rng: &mut ChaCha8Rng) -> AlgValue {
    if rng.gen_bool(0.1) {
        return f.zero();
    }
    let mut v = f.from_int(rng.gen_range(-9..=9));
    if f.degree() > 1 {
        v = f.add(&v, &f.mul(&f.from_int(rng.gen_range(-4..=4)), &f.root(0)));
    }
    v
}

fn synthesize(cg: &ClassGroup, rng: &mut ChaCha8Rng) -> Result<HeckeEigensystem> {
    let k = cg.field();
    let levels: Vec<Ideal> = (2..=30).flat_map(|n| k.ideals_of_norm(n)).collect();
    let level = levels[rng.gen_range(0..levels.len())];
    let chars = character_group(cg);
    let chi = chars[rng.gen_range(0..chars.len())].clone();
    let q = ValueField::rational();
    let f = match rng.gen_range(0..3) {
        0 => q,
        1 => q.adjoin(&q.from_int(2), Some("r"))?,
        _ => q.adjoin(&q.from_int(-3), Some("r"))?,
    };
    let alpha: BTreeMap<Ideal, AlgValue> = k
        .primes_up_to_norm(ROUND_TRIP_BOUND)
        .into_iter()
        .filter(|p| k.is_coprime(p, &level))
        .map(|p| (p, random_value(&f, rng)))
        .collect();
    let al = if chi.is_trivial() {
        k.prime_power_divisors(&level)?.into_iter().map(|q| (q, if rng.gen_bool(0.5) { 1 } else { -1 })).collect()
    } else {
        BTreeMap::new()
    };
    HeckeEigensystem::new(cg, level, chi, f, alpha, al)
}

fn in_orbit(cg: &ClassGroup, f: &HeckeEigensystem, r: &HeckeEigensystem) -> Result<bool> {
    for psi in character_group(cg) {
        if f.twist(cg, &psi)?.same_data(cg, r, true)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn criterion_4() -> Result<Verdict> {
    let t0 = Instant::now();
    let groups: Vec<ClassGroup> =
        [1, 5, 23, 17, 21].iter().map(|&d| ClassGroup::new(&QuadField::new(d)?)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5be0cd19);
    let mut fails = Vec::new();
    let mut shapes = BTreeSet::new();
    let mut trivial_checked = 0;
    let mut queries = 0;
    for i in 0..ROUND_TRIPS {
        let cg = &groups[i % groups.len()];
        shapes.insert(cg.structure_string());
        let f = synthesize(cg, &mut rng)?;
        let tag = format!("case {i} (d = {})", cg.field().d());
        let lib = project_to_principal(cg, &f);
        let rec = RecordingOracle::new(&lib);
        let res = recover(cg, &rec, f.level(), &RecoveryOptions::with_bound(ROUND_TRIP_BOUND))?;
        let mine = Projection { cg, s: &f };
        for op in rec.operators() {
            queries += 1;
            if lib.query(&op)? != mine.query(&op)? {
                fails.push(format!("{tag}: projections differ at {}", op.display(cg.field())));
            }
        }
        if !res.gaps.is_empty() || !in_orbit(cg, &f, &res.system)? {
            fails.push(format!("{tag}: recovered system is not in the twist orbit"));
        }
        let again = recover(cg, &mine, f.level(), &RecoveryOptions::with_bound(ROUND_TRIP_BOUND))?;
        if !in_orbit(cg, &f, &again.system)? {
            fails.push(format!("{tag}: recovery from the test projection left the orbit"));
        }
        let two: Vec<_> = cg.elements().into_iter().filter(|c| cg.is_identity(&cg.compose(c, c))).collect();
        if two.iter().all(|c| f.character().eval_class(cg, c).is_one()) {
            trivial_checked += 1;
            if !res.system.character().is_trivial() {
                fails.push(format!("{tag}: character {} should be trivial", res.system.character().label(cg)));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    if secs >= ROUND_TRIP_SECONDS {
        fails.push(format!("{secs:.1} s >= {ROUND_TRIP_SECONDS} s"));
    }
    let shapes: Vec<String> = shapes.into_iter().collect();
    judge(
        fails,
        format!(
            "{ROUND_TRIPS} systems over {} to norm {ROUND_TRIP_BOUND}, {queries} oracle answers cross-checked, trivial character forced in {trivial_checked}; {secs:.1} s < {ROUND_TRIP_SECONDS} s",
            shapes.join(", ")
        ),
    )
}

// ---------- 5 ----------

fn binomial(n: u64, r: u64) -> i64 {
    (0..r).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// Coefficient of X^n in sum_k (aX - bX^2)^k.
fn series_coefficient(f: &ValueField, a: &AlgValue, b: &AlgValue, n: u64) -> Result<AlgValue> {
    let mut total = f.zero();
    for j in 0..=n / 2 {
        let term = f.mul(&f.pow(a, (n - 2 * j) as i64)?, &f.pow(&f.neg(b), j as i64)?);
        total = f.add(&total, &f.scale(&term, &BigRational::from_integer(binomial(n - j, j).into())));
    }
    Ok(total)
}

fn criterion_5(b: &Bundle) -> Result<Verdict> {
    let (k, cg) = (&b.field, &b.class_group);
    let mut fails = Vec::new();
    let (mut systems, mut n) = (0, 0);
    for (name, s) in b.all_systems()? {
        systems += 1;
        let f = s.field();
        for (p, a) in s.alpha() {
            let np = if k.is_coprime(p, s.level()) {
                f.scale(&s.chi_of_class(&cg.class_of(p)), &BigRational::from_integer(p.norm().into()))
            } else {
                f.zero()
            };
            for e in 0..=4u32 {
                let want = series_coefficient(f, a, &np, e as u64)?;
                let by_power = s.prime_power_coefficient(cg, p, e)?;
                let by_ideal = s.coefficient(cg, &k.pow(p, e))?;
                if by_power != want || by_ideal != want {
                    fails.push(format!("{name} at {}^{e}", k.label(p)));
                }
                n += 1;
            }
        }
    }
    judge(fails, format!("{n} coefficients a(p^e), e <= 4, over {systems} fixture systems"))
}

// ---------- 6 ----------

fn criterion_6(b: &Bundle) -> Result<Verdict> {
    let t = b.dimensions.as_ref().expect("dimension table");
    let records = derive_records(&t.rows, b.hecke_fields.as_ref(), &b.manifest.records)?;
    let mut fails = Vec::new();
    let mut deficits = Vec::new();
    for row in &t.rows {
        let r = validate_row(Some(&b.field), row, &records);
        if !r.ok {
            fails.push(format!("{}: {}", row.level, r.failures.join(", ")));
        }
        let gap = 4 * row.homology_dim() as i64 - row.nd as i64;
        let explained: u64 = b
            .manifest
            .records
            .iter()
            .filter(|x| x.level == row.level && x.lift_shape == Some(LiftShape::SelfTwist))
            .map(|x| LiftShape::SelfTwist.deficit(x.orbit_degree))
            .sum();
        if gap != explained as i64 || r.deficit != explained {
            fails.push(format!("{}: 4 dim H - nd = {gap}, self-twist records explain {explained}", row.level));
        }
        if gap != 0 {
            deficits.push(format!("{} (4 dim H - nd = {gap})", row.level));
        }
    }
    if deficits != ["64.1 (4 dim H - nd = 4)"] {
        fails.push(format!("deficits at {}", deficits.join(", ")));
    }
    judge(
        fails,
        format!("{} rows of the printed table validate; nd = 4 dim H except {}", t.rows.len(), deficits.join(", ")),
    )
}

// ---------- 7 ----------

fn criterion_7(b: &Bundle) -> Result<Verdict> {
    let (k, cg) = (&b.field, &b.class_group);
    let chi2 = quadratic_characters(cg).into_iter().find(|c| !c.is_trivial()).expect("chi2");
    let mut fails = Vec::new();
    let mut oks = Vec::new();

    // level 2.1: inner twist, Galois conjugate, base change candidates
    let rows: BTreeMap<String, HeckeEigensystem> =
        b.systems_at("2.1").expect("2.1").corrected(cg)?.into_iter().collect();
    let f0 = &rows["F0"];
    let field = f0.field();
    let root = field.root(0);
    let inner: Vec<_> =
        f0.inner_twist_pairs(cg)?.into_iter().filter(|(tau, _)| field.apply(tau, field, &root) != root).collect();
    if inner.len() == 1 && field.apply(&inner[0].0, field, &root) == field.neg(&root) && inner[0].1 == chi2 {
        oks.push("F0 inner twist (sqrt2 -> -sqrt2, chi2)");
    } else {
        fails.push("F0 lacks the inner twist (sqrt2 -> -sqrt2, chi2)".to_string());
    }
    if f0.galois_conjugate_system(cg)?.same_data(cg, &rows["F2"], false)? {
        oks.push("F0^sigma = F2");
    } else {
        fails.push("F0^sigma != F2".into());
    }
    let bc: Vec<&str> =
        ["F0", "F1", "F2", "F3"].into_iter().filter(|n| rows[*n].base_change_candidate(cg).unwrap_or(false)).collect();
    if bc == ["F1", "F3"] {
        oks.push("F1, F3 base-change candidates");
    } else {
        fails.push(format!("base-change candidates {bc:?}"));
    }

    // level 16.1
    let ls = b.systems_at("16.1").expect("16.1");
    let s16: BTreeMap<String, HeckeEigensystem> = ls.corrected(cg)?.into_iter().collect();
    let f1 = &s16["F1"];
    let joined = f1.hecke_field_report(cg).hecke_degree == 4
        && f1.inner_twist_pairs(cg)?.iter().any(|(tau, psi)| {
            psi == &chi2
                && (0..f1.field().num_roots())
                    .any(|i| f1.field().apply(tau, f1.field(), &f1.field().root(i)) != f1.field().root(i))
        });
    if joined {
        oks.push("F1 is one joined degree-4 orbit");
    } else {
        fails.push("F1 is not a joined degree-4 orbit".into());
    }
    let mut pair_fails = Vec::new();
    for (a, c) in [("F2", "F3"), ("F4", "F5"), ("F6", "F7")] {
        let qi = s16[a].hecke_field_report(cg).hecke_degree == 2 && s16[c].hecke_field_report(cg).hecke_degree == 2;
        let bad = s16[a].twist(cg, &chi2)?.agrees_on_common_primes(&s16[c])?;
        if !qi {
            fails.push(format!("{a}, {c} are not over Q(i)"));
        }
        if !bad.is_empty() {
            pair_fails.push(format!("{c} != {a} x chi2 at {}", names(k, &bad)));
        }
    }

    // T(3.1,3.1) T(3.1^2): chi(3.1) (alpha(3.1)^2 - chi(3.1) 3), with chi(3.1) = +-i
    let level = k.ideal_from_label("16.1")?;
    let p3 = k.ideal_from_label("3.1")?;
    let op = PrincipalOperator::new(cg, &level, p3, k.pow(&p3, 2), None)?;
    let mut by_hand = BTreeSet::new();
    for s in s16.values() {
        let f = s.field();
        let a = f.embed(&s.alpha()[&p3]);
        let chi = f.embed(&s.chi_value(cg, &p3));
        let v = chi * (a * a - chi * 3.0);
        if v.im.abs() > 1e-9 || (v.re - v.re.round()).abs() > 1e-9 {
            fails.push(format!("T(3.1,3.1) T(9.1) is not an integer: {v}"));
        }
        by_hand.insert(v.re.round() as i64);
    }
    let mut library: Vec<i64> = ls.principal_values(cg, &op)?.iter().map(|v| v.parse().expect("integer")).collect();
    library.sort();
    library.dedup();
    let computed: Vec<i64> = by_hand.into_iter().collect();
    let printed = [-5, -2, 2, 3];
    if library != computed {
        fails.push(format!("library principal values {library:?} vs direct {computed:?}"));
    }
    let show = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    if computed != printed {
        fails.push(format!(
            "T(3.1,3.1) T(9.1) on 16.1: computed {{{}}}, printed {{{}}}",
            show(&computed),
            show(&printed)
        ));
    }
    fails.extend(pair_fails);
    let ok = format!("{}; 16.1 pairs twist by chi2; T(3.1,3.1) T(9.1) = {{{}}}", oks.join(", "), show(&computed));
    judge(fails, ok)
}

// ---------- 8 ----------

/// F_p, or F_{p^2} = F_p[w]/(w^2 + 17); elements x + y w.
struct Residue {
    p: i64,
    inert: bool,
}

type Elt = (i64, i64);

impl Residue {
    fn add(&self, a: Elt, b: Elt) -> Elt {
        ((a.0 + b.0).rem_euclid(self.p), (a.1 + b.1).rem_euclid(self.p))
    }

    fn mul(&self, a: Elt, b: Elt) -> Elt {
        ((a.0 * b.0 - 17 * a.1 * b.1).rem_euclid(self.p), (a.0 * b.1 + a.1 * b.0).rem_euclid(self.p))
    }

    fn elements(&self) -> Vec<Elt> {
        let ys = if self.inert { self.p } else { 1 };
        (0..self.p).flat_map(|x| (0..ys).map(move |y| (x, y))).collect()
    }

    fn int(&self, n: i64) -> Elt {
        (n.rem_euclid(self.p), 0)
    }
}

/// Projective points on y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6.
fn count_points(fq: &Residue, a: [Elt; 5]) -> i64 {
    let [a1, a2, a3, a4, a6] = a;
    let els = fq.elements();
    let mut n = 1;
    for &x in &els {
        let x2 = fq.mul(x, x);
        let rhs = fq.add(fq.add(fq.mul(x2, x), fq.mul(a2, x2)), fq.add(fq.mul(a4, x), a6));
        let lin = fq.add(fq.mul(a1, x), a3);
        for &y in &els {
            let lhs = fq.add(fq.mul(y, y), fq.mul(lin, y));
            if lhs == rhs {
                n += 1;
            }
        }
    }
    n
}

fn discriminant(fq: &Residue, a: [Elt; 5]) -> Elt {
    let [a1, a2, a3, a4, a6] = a;
    let (m, s, c) = (|x, y| fq.mul(x, y), |x, y| fq.add(x, y), |n| fq.int(n));
    let neg = |x: Elt| fq.mul(c(-1), x);
    let b2 = s(m(a1, a1), m(c(4), a2));
    let b4 = s(m(c(2), a4), m(a1, a3));
    let b6 = s(m(a3, a3), m(c(4), a6));
    let b8 = s(s(m(m(a1, a1), a6), m(m(c(4), a2), a6)), s(neg(m(m(a1, a3), a4)), s(m(a2, m(a3, a3)), neg(m(a4, a4)))));
    let t1 = neg(m(m(b2, b2), b8));
    let t2 = neg(m(c(8), m(b4, m(b4, b4))));
    let t3 = neg(m(c(27), m(b6, b6)));
    let t4 = m(c(9), m(b2, m(b4, b6)));
    s(s(t1, t2), s(t3, t4))
}

/// Coefficients x + y w reduced into the residue field of a prime ideal.
fn reduce(prime: &Ideal, ainvs: &[[i64; 2]; 5]) -> (Residue, [Elt; 5]) {
    let [a, b, c] = prime.hnf();
    // [p, b + w] when c = 1, so w = -b there; (p) itself when inert
    let fq = Residue { p: a, inert: c != 1 };
    let w = if fq.inert { (0, 1) } else { fq.int(-b) };
    let coeffs = ainvs.map(|v| fq.add(fq.int(v[0]), fq.mul(fq.int(v[1]), w)));
    (fq, coeffs)
}

/// A model at a degree-one prime over 3 scaled by u = 3 into the minimal one,
/// working 3-adically with w the root of w^2 = -17 congruent to -b mod 3.
fn minimal_at_three(prime: &Ideal, ainvs: &[[i64; 2]; 5]) -> Option<[Elt; 5]> {
    const M: i64 = 6561;
    let [p, b, _] = prime.hnf();
    assert_eq!(p, 3);
    let w = (0..M).find(|w| (w - (-b)).rem_euclid(3) == 0 && (w * w + 17).rem_euclid(M) == 0)?;
    let [a1, a2, a3, a4, a6] = ainvs.map(|v| (v[0] + v[1] * w).rem_euclid(M));
    let md = |x: i64| x.rem_euclid(M);
    for s in 0..27 {
        for r in 0..27 {
            for t in 0..27 {
                let e = [
                    md(a1 + 2 * s),
                    md(a2 - s * a1 + 3 * r - s * s),
                    md(a3 + r * a1 + 2 * t),
                    md(a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t),
                    md(a6 + r * a4 + r * r * a2 + r * r * r - t * a3 - t * t - r * t * a1),
                ];
                let pw = [3, 9, 27, 81, 729];
                if e.iter().zip(pw).all(|(x, q)| x % q == 0) {
                    return Some([0, 1, 2, 3, 4].map(|i| ((e[i] / pw[i]).rem_euclid(3), 0)));
                }
            }
        }
    }
    None
}

fn criterion_8(b: &Bundle) -> Result<Verdict> {
    let (k, cg) = (&b.field, &b.class_group);
    let curve: &CurveFile = b.curve("7.2-a-2").expect("curve 7.2-a-2");
    let ainvs = curve.ainvs;
    let mut fails = Vec::new();
    let conductor = k.ideal_from_label(&curve.conductor)?;
    let nonminimal: Vec<Ideal> =
        curve.nonminimal_primes.iter().map(|l| k.ideal_from_label(l)).collect::<Result<_>>()?;
    let mut counted = BTreeMap::new();
    for (label, want) in &curve.ap {
        let p = k.ideal_from_label(label)?;
        let (fq, red) = reduce(&p, &ainvs);
        let model = if nonminimal.contains(&p) {
            match minimal_at_three(&p, &ainvs) {
                Some(m) => m,
                None => {
                    fails.push(format!("{label}: no integral model with u = 3"));
                    continue;
                }
            }
        } else {
            red
        };
        let singular = discriminant(&fq, model) == (0, 0);
        if singular != k.divides(&p, &conductor) {
            fails.push(format!("{label}: reduction singular = {singular}"));
        }
        let a = p.norm() as i64 + 1 - count_points(&fq, model);
        if a != *want {
            fails.push(format!("{label}: points give a = {a}, curve file {want}"));
        }
        counted.insert(p, a);
    }
    let bad = &curve.bad_primes[0];
    let q = k.ideal_from_label(&bad.prime)?;
    let (fq, red) = reduce(&q, &ainvs);
    let a_q = (discriminant(&fq, red) == (0, 0)).then(|| q.norm() as i64 + 1 - count_points(&fq, red));
    // a = -1 on the singular fibre: the node has irrational tangents
    if a_q != Some(-1) || bad.reduction != Reduction::Nonsplit {
        fails.push(format!("{}: points give a = {a_q:?}, file says {:?}", bad.prime, bad.reduction));
    }

    let ls = b.systems_at("7.2").expect("7.2 systems");
    let form = ls.get("7.2-a").expect("7.2-a");
    let report = compare_ap(cg, form, curve, None)?;
    if report.matched.len() != 12 || !report.mismatched.is_empty() {
        fails.push(format!("{} matched, {} mismatched", report.matched.len(), report.mismatched.len()));
    }
    for (p, v) in form.alpha() {
        if form.field().to_integer(v) != counted.get(p).copied() {
            fails.push(format!(
                "{}: table alpha {} vs point count {:?}",
                k.label(p),
                form.field().format(v),
                counted.get(p)
            ));
        }
    }
    let sign = form.al_signs().get(&q).copied();
    let bp = report.bad_primes.first();
    if sign != Some(1) || a_q != Some(-sign.unwrap_or(0)) || !bp.is_some_and(|x| x.ok && x.al_sign == 1) {
        fails.push(format!("bad prime {}: Atkin-Lehner {sign:?}, a = {a_q:?}", bad.prime));
    }
    judge(
        fails,
        format!(
            "{} primes of the printed table match; {} curve traces agree with point counts (3.2 via a u = 3 model); bad prime {}: Atkin-Lehner +1, nonsplit",
            report.matched.len(),
            counted.len(),
            bad.prime
        ),
    )
}

// ---------- 9 ----------

/// (#divisors with psi = +1, #divisors) from the factorization.
fn divisor_counts(cg: &ClassGroup, q: &Ideal, psi: &ClassCharacter) -> Result<(u64, u64)> {
    let (mut plus, mut minus) = (1u64, 0u64);
    for (p, e) in cg.field().factor_ideal(q)? {
        let s = psi.eval_class(cg, &cg.class_of(&p)).as_sign().expect("quadratic");
        let (mut np, mut nm) = (0, 0);
        for f in 0..=e {
            if s == 1 || f % 2 == 0 {
                np += 1;
            } else {
                nm += 1;
            }
        }
        (plus, minus) = (plus * np + minus * nm, plus * nm + minus * np);
    }
    Ok((plus, plus + minus))
}

fn criterion_9() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3c6ef372);
    let mut fails = Vec::new();
    let (mut cases, mut prime_steps, mut equal) = (0, 0, 0);
    for d in [17, 5, 21, 65] {
        let k = QuadField::new(d)?;
        let cg = ClassGroup::new(&k)?;
        let ideals: Vec<Ideal> = (1..=60).flat_map(|n| k.ideals_of_norm(n)).collect();
        let psis: Vec<ClassCharacter> = quadratic_characters(&cg).into_iter().filter(|c| !c.is_trivial()).collect();
        for _ in 0..OLDFORM_CASES / 4 {
            let m = ideals[rng.gen_range(0..ideals.len())];
            let q = ideals[rng.gen_range(0..ideals.len())];
            let n = k.mul(&m, &q)?;
            let psi = &psis[rng.gen_range(0..psis.len())];
            let tag = format!("d = {d}, m = {}, n = {}, {}", k.label(&m), k.label(&n), psi.label(&cg));
            let (plus, sigma) = divisor_counts(&cg, &q, psi)?;
            let plain = oldclass_principal_multiplicity(&cg, &m, None, &n)?;
            let got = oldclass_principal_multiplicity(&cg, &m, Some(psi), &n)?;
            let all_plus = k.factor_ideal(&q)?.iter().all(|(p, _)| psi.eval_class(&cg, &cg.class_of(p)).is_one());
            if plain != sigma {
                fails.push(format!("{tag}: without self-twist {plain}, sigma0 {sigma}"));
            }
            if got != plus || got > sigma || (got == sigma) != all_plus {
                fails.push(format!("{tag}: {got}, expected {plus} of {sigma}"));
            }
            if got == sigma {
                equal += 1;
            }
            if k.is_prime_ideal(&q) && !psi.eval_class(&cg, &cg.class_of(&q)).is_one() {
                prime_steps += 1;
                if got != 1 {
                    fails.push(format!("{tag}: prime step with psi = -1 gives {got}"));
                }
            }
            cases += 1;
        }
    }
    judge(
        fails,
        format!("{cases} random (m, n, psi) over d = 17, 5, 21, 65; {equal} with equality; {prime_steps} prime steps with psi = -1 give 1"),
    )
}

fn main() -> ExitCode {
    let b = bundle();
    let criteria: Vec<(u32, &str, Check<'_>)> = vec![
        (1, "class groups", Box::new(criterion_1)),
        (2, "genus character", Box::new(criterion_2)),
        (3, "recovery at 2.1", Box::new(|| criterion_3(&b))),
        (4, "round trip", Box::new(criterion_4)),
        (5, "Euler factors", Box::new(|| criterion_5(&b))),
        (6, "dimension table", Box::new(|| criterion_6(&b))),
        (7, "structure detectors", Box::new(|| criterion_7(&b))),
        (8, "modularity evidence", Box::new(|| criterion_8(&b))),
        (9, "oldform multiplicities", Box::new(criterion_9)),
    ];
    let mut unexpected = 0;
    for (n, name, check) in &criteria {
        let v = check().unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e}") });
        let expected = EXPECTED_FAIL.iter().find(|(m, _)| m == n).map(|(_, d)| *d);
        let as_recorded = match expected {
            None => v.pass,
            Some(d) => !v.pass && v.detail == d,
        };
        let status = if v.pass { "PASS" } else { "FAIL" };
        let mark = match (expected, as_recorded) {
            (Some(_), true) => " (recorded failure)",
            (_, false) => " (UNEXPECTED)",
            _ => "",
        };
        println!("criterion {n} {name}: {status}{mark}: {}", v.detail);
        if !as_recorded {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria differ from the recorded outcome");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
