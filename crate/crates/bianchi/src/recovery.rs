//! Principal Hecke operators, eigenvalue oracles, and recovery of a full
//! eigensystem (alpha, chi) together with Atkin-Lehner signs from the
//! eigenvalues of principal operators alone.

use std::cell::RefCell;
use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::algext::{AlgValue, FieldMap, ValueField, ValueFieldRepr};
use crate::characters::character_group;
use crate::classgroup::{ClassGroup, IdealClass, DEFAULT_SEARCH_BOUND};
use crate::eigensystem::{character_values, HeckeEigensystem};
use crate::error::{invalid, Error, Result};
use crate::quadfield::{Ideal, QuadField};

/// T_{a,a} T_b W_q with [a]^2 [b] [q] trivial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrincipalOperator {
    aa: Ideal,
    t: Ideal,
    w: Option<Ideal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorRepr {
    #[serde(default)]
    pub aa: Option<String>,
    #[serde(default)]
    pub t: Option<String>,
    #[serde(default)]
    pub w: Option<String>,
}

impl PrincipalOperator {
    pub fn new(cg: &ClassGroup, level: &Ideal, aa: Ideal, t: Ideal, w: Option<Ideal>) -> Result<Self> {
        let k = cg.field();
        if !k.is_coprime(&aa, level) || !k.is_coprime(&t, level) {
            return Err(invalid(format!(
                "T_{{{0},{0}}} T_{{{1}}} must be coprime to the level {2}",
                k.label(&aa),
                k.label(&t),
                k.label(level)
            )));
        }
        let mut class = cg.compose(&cg.power(&cg.class_of(&aa), 2), &cg.class_of(&t));
        if let Some(q) = &w {
            if !k.exact_divisors(level)?.contains(q) {
                return Err(invalid(format!("{} is not an exact divisor of {}", k.label(q), k.label(level))));
            }
            class = cg.compose(&class, &cg.class_of(q));
        }
        if !cg.is_identity(&class) {
            return Err(invalid(format!(
                "operator with a = {}, b = {} is in class {}, not principal",
                k.label(&aa),
                k.label(&t),
                cg.class_label(&class)
            )));
        }
        Ok(PrincipalOperator { aa, t, w })
    }

    /// T_b for a principal b.
    pub fn hecke(cg: &ClassGroup, level: &Ideal, t: Ideal) -> Result<Self> {
        Self::new(cg, level, cg.field().unit_ideal(), t, None)
    }

    pub fn aa(&self) -> &Ideal {
        &self.aa
    }

    pub fn t(&self) -> &Ideal {
        &self.t
    }

    pub fn w(&self) -> Option<&Ideal> {
        self.w.as_ref()
    }

    pub fn to_repr(&self, k: &QuadField) -> OperatorRepr {
        let lab = |i: &Ideal| if i.is_unit() { None } else { Some(k.label(i)) };
        OperatorRepr { aa: lab(&self.aa), t: lab(&self.t), w: self.w.as_ref().map(|q| k.label(q)) }
    }

    pub fn from_repr(cg: &ClassGroup, level: &Ideal, r: &OperatorRepr) -> Result<Self> {
        let k = cg.field();
        let parse = |s: &Option<String>| match s {
            Some(e) => k.ideal_from_expr(e),
            None => Ok(k.unit_ideal()),
        };
        let w = match &r.w {
            Some(e) => Some(k.ideal_from_expr(e)?),
            None => None,
        };
        Self::new(cg, level, parse(&r.aa)?, parse(&r.t)?, w)
    }

    pub fn display(&self, k: &QuadField) -> String {
        let mut parts = Vec::new();
        if !self.aa.is_unit() {
            let a = k.label(&self.aa);
            parts.push(format!("T({a},{a})"));
        }
        if !self.t.is_unit() || parts.is_empty() && self.w.is_none() {
            parts.push(format!("T({})", k.label(&self.t)));
        }
        if let Some(q) = &self.w {
            parts.push(format!("W({})", k.label(q)));
        }
        parts.join(" ")
    }
}

/// Supplies eigenvalues of principal operators on demand.
pub trait Oracle {
    /// The field the answers live in.
    fn field(&self) -> &ValueField;
    fn query(&self, op: &PrincipalOperator) -> Result<AlgValue>;
}

/// Answers from a known eigensystem: chi(a) alpha(b) eps(q).
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    cg: ClassGroup,
    system: HeckeEigensystem,
}

pub fn project_to_principal(cg: &ClassGroup, system: &HeckeEigensystem) -> SyntheticOracle {
    SyntheticOracle { cg: cg.clone(), system: system.clone() }
}

impl SyntheticOracle {
    pub fn system(&self) -> &HeckeEigensystem {
        &self.system
    }
}

impl Oracle for SyntheticOracle {
    fn field(&self) -> &ValueField {
        self.system.field()
    }

    fn query(&self, op: &PrincipalOperator) -> Result<AlgValue> {
        let k = self.cg.field();
        let s = &self.system;
        let f = s.field();
        let b = s.coefficient(&self.cg, &op.t).map_err(|e| Error::Oracle(format!("{}: {e}", op.display(k))))?;
        let mut v = f.mul(&s.chi_value(&self.cg, &op.aa), &b);
        if let Some(q) = &op.w {
            if !s.character().is_trivial() {
                return Err(Error::Oracle(format!("{}: Atkin-Lehner signs need the trivial character", op.display(k))));
            }
            for (qq, _) in k.factor_ideal(q)? {
                let qpow = k.prime_power_divisors(s.level())?.into_iter().find(|d| k.divides(&qq, d));
                let e = qpow.and_then(|d| s.al_signs().get(&d).copied()).ok_or_else(|| {
                    Error::Oracle(format!("{}: no Atkin-Lehner sign at {}", op.display(k), k.label(&qq)))
                })?;
                v = f.scale(&v, &BigRational::from_integer(e.into()));
            }
        }
        Ok(v)
    }
}

/// Oracle file: operators by ideal label expressions and their values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    pub field_disc: i64,
    pub level: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<ValueFieldRepr>,
    pub values: Vec<OracleEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleEntry {
    #[serde(default)]
    pub aa: Option<String>,
    #[serde(default)]
    pub t: Option<String>,
    #[serde(default)]
    pub w: Option<String>,
    pub value: String,
}

/// A lookup table of principal eigenvalues.
#[derive(Debug, Clone)]
pub struct FixtureOracle {
    k: QuadField,
    level: Ideal,
    field: ValueField,
    values: BTreeMap<PrincipalOperator, AlgValue>,
}

impl FixtureOracle {
    pub fn from_file(cg: &ClassGroup, file: &OracleFile) -> Result<Self> {
        let k = cg.field();
        if file.field_disc != k.disc() {
            return Err(Error::FieldMismatch(file.field_disc, k.disc()));
        }
        let level = k.ideal_from_label(&file.level)?;
        let field = match &file.field {
            Some(r) => ValueField::from_repr(r)?,
            None => ValueField::rational(),
        };
        let mut values = BTreeMap::new();
        for e in &file.values {
            let op = PrincipalOperator::from_repr(
                cg,
                &level,
                &OperatorRepr { aa: e.aa.clone(), t: e.t.clone(), w: e.w.clone() },
            )
            .map_err(|err| Error::Schema(format!("oracle entry {e:?}: {err}")))?;
            let v = field.parse(&e.value)?;
            if let Some(old) = values.insert(op, v.clone()) {
                if old != v {
                    return Err(Error::Schema(format!("conflicting values for {}", op.display(k))));
                }
            }
        }
        Ok(FixtureOracle { k: k.clone(), level, field, values })
    }

    pub fn level(&self) -> &Ideal {
        &self.level
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_file(&self) -> OracleFile {
        entries_to_file(&self.k, &self.level, &self.field, self.values.iter())
    }
}

fn entries_to_file<'a>(
    k: &QuadField,
    level: &Ideal,
    field: &ValueField,
    entries: impl Iterator<Item = (&'a PrincipalOperator, &'a AlgValue)>,
) -> OracleFile {
    let values = entries
        .map(|(op, v)| {
            let r = op.to_repr(k);
            OracleEntry { aa: r.aa, t: r.t, w: r.w, value: field.format(v) }
        })
        .collect();
    let field = if field.degree() == 1 { None } else { Some(field.to_repr()) };
    OracleFile { field_disc: k.disc(), level: k.label(level), field, values }
}

impl Oracle for FixtureOracle {
    fn field(&self) -> &ValueField {
        &self.field
    }

    fn query(&self, op: &PrincipalOperator) -> Result<AlgValue> {
        self.values.get(op).cloned().ok_or_else(|| Error::Oracle(op.display(&self.k)))
    }
}

/// Wraps an oracle and remembers every answered query.
pub struct RecordingOracle<'a> {
    inner: &'a dyn Oracle,
    log: RefCell<BTreeMap<PrincipalOperator, AlgValue>>,
}

impl<'a> RecordingOracle<'a> {
    pub fn new(inner: &'a dyn Oracle) -> Self {
        RecordingOracle { inner, log: RefCell::new(BTreeMap::new()) }
    }

    pub fn operators(&self) -> Vec<PrincipalOperator> {
        self.log.borrow().keys().copied().collect()
    }

    pub fn to_file(&self, k: &QuadField, level: &Ideal) -> OracleFile {
        entries_to_file(k, level, self.inner.field(), self.log.borrow().iter())
    }
}

impl Oracle for RecordingOracle<'_> {
    fn field(&self) -> &ValueField {
        self.inner.field()
    }

    fn query(&self, op: &PrincipalOperator) -> Result<AlgValue> {
        let v = self.inner.query(op)?;
        self.log.borrow_mut().insert(*op, v.clone());
        Ok(v)
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryOptions {
    /// Primes of norm up to this bound are recovered.
    pub bound: u64,
    /// Explicit primes, replacing the norm bound.
    pub primes: Option<Vec<Ideal>>,
    /// Take the negative of the canonical square root whenever a sign is free.
    pub opposite_signs: bool,
    pub search_bound: u64,
}

impl RecoveryOptions {
    pub fn with_bound(bound: u64) -> Self {
        RecoveryOptions { bound, primes: None, opposite_signs: false, search_bound: DEFAULT_SEARCH_BOUND }
    }
}

#[derive(Debug, Clone)]
pub struct SignEntry {
    pub genus: Vec<u64>,
    pub ideal: Ideal,
    pub alpha: AlgValue,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub system: HeckeEigensystem,
    /// Primes skipped because the oracle could not answer.
    pub gaps: Vec<(Ideal, String)>,
    /// Exact divisors of the level whose Atkin-Lehner sign was not found.
    pub al_incomplete: Vec<Ideal>,
    pub sign_table: Vec<SignEntry>,
    pub doublings: u32,
    pub queries: usize,
}

/// Values brought into a growing working field.
struct Work<'a> {
    cg: &'a ClassGroup,
    level: Ideal,
    oracle: &'a dyn Oracle,
    field: ValueField,
    map: Option<(ValueField, FieldMap)>,
    search_bound: u64,
    queries: usize,
}

impl Work<'_> {
    fn ask(&mut self, aa: Ideal, t: Ideal, w: Option<Ideal>) -> Result<AlgValue> {
        let op = PrincipalOperator::new(self.cg, &self.level, aa, t, w)?;
        self.queries += 1;
        let v = self.oracle.query(&op)?;
        let src = self.oracle.field();
        if let Some(r) = src.to_rational(&v) {
            return Ok(self.field.from_rational(r));
        }
        let stale = match &self.map {
            Some((g, _)) => !self.field.extends(g),
            None => true,
        };
        if stale {
            let (g, m) = self.field.embedding_of(src)?;
            self.field = g.clone();
            self.map = Some((g, m));
        }
        let (g, m) = self.map.as_ref().expect("map set above");
        Ok(self.field.lift(&g.apply(m, src, &v)))
    }

    fn find(&self, pred: impl Fn(&IdealClass) -> bool) -> Result<Ideal> {
        self.cg.find_ideal_where(pred, &self.level, true, self.search_bound)
    }
}

/// Recovers one eigensystem in the twist orbit determined by the oracle.
pub fn recover(cg: &ClassGroup, oracle: &dyn Oracle, level: &Ideal, opts: &RecoveryOptions) -> Result<RecoveryResult> {
    let k = cg.field();
    let genus = cg.genus_data()?;
    let mut w = Work {
        cg,
        level: *level,
        oracle,
        field: oracle.field().base_field(),
        map: None,
        search_bound: opts.search_bound,
        queries: 0,
    };

    // Step 1: the character on CL[2] from T_{a,a}.
    let mut restriction: Vec<(IdealClass, i64)> = Vec::new();
    for c in genus.two_torsion.iter().filter(|c| !cg.is_identity(c)) {
        let a = w.find(|x| x == c)?;
        let v = w.ask(a, k.unit_ideal(), None)?;
        let s = match w.field.to_integer(&v) {
            Some(s @ (1 | -1)) => s,
            _ => {
                return Err(Error::Consistency(format!(
                    "T({0},{0}) has eigenvalue {1}, not +-1",
                    k.label(&a),
                    w.field.format(&v)
                )))
            }
        };
        restriction.push((c.clone(), s));
    }
    let chi = character_group(cg)
        .into_iter()
        .find(|x| restriction.iter().all(|(c, s)| x.eval_class(cg, c).as_sign() == Some(*s)))
        .ok_or_else(|| Error::Consistency("no character has the observed values on CL[2]".into()))?;
    let (g, mut chi_vals) = character_values(cg, &w.field, &chi)?;
    w.field = g;

    // Step 2: alpha at good primes.
    let primes: Vec<Ideal> = match &opts.primes {
        Some(list) => {
            let mut l: Vec<Ideal> = list.iter().filter(|p| k.is_coprime(p, level)).copied().collect();
            for p in &l {
                if !k.is_prime_ideal(p) {
                    return Err(invalid(format!("{} is not prime", k.label(p))));
                }
            }
            l.sort_by_key(|p| k.label_key(p));
            l.dedup();
            l
        }
        None => k.primes_up_to_norm(opts.bound).into_iter().filter(|p| k.is_coprime(p, level)).collect(),
    };
    let mut alpha: BTreeMap<Ideal, AlgValue> = BTreeMap::new();
    let trivial_genus = vec![0u64; genus.r2 as usize];
    let mut table = vec![SignEntry { genus: trivial_genus, ideal: k.unit_ideal(), alpha: w.field.one() }];
    let mut doublings = 0;
    let mut gaps = Vec::new();
    for p in &primes {
        let cp = cg.class_of(p);
        let gv = cg.genus_vector(&cp);
        let step = recover_prime(&mut w, &chi_vals, &table, p, &cp, &gv, opts.opposite_signs);
        let value = match step {
            Ok(v) => v,
            Err(e @ (Error::Oracle(_) | Error::SearchExhausted(..))) => {
                gaps.push((*p, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        // the working field may have grown
        for v in alpha.values_mut() {
            *v = w.field.lift(v);
        }
        for e in table.iter_mut() {
            e.alpha = w.field.lift(&e.alpha);
        }
        for v in chi_vals.values_mut() {
            *v = w.field.lift(v);
        }
        if !value.is_zero() && !table.iter().any(|e| e.genus == gv) {
            let mut new = Vec::new();
            for e in &table {
                new.push(SignEntry {
                    genus: e.genus.iter().zip(&gv).map(|(x, y)| (x + y) % 2).collect(),
                    ideal: k.mul(&e.ideal, p)?,
                    alpha: w.field.mul(&e.alpha, &value),
                });
            }
            table.extend(new);
            doublings += 1;
        }
        alpha.insert(*p, value);
    }

    // Step 3: Atkin-Lehner signs.
    let mut al = BTreeMap::new();
    let mut al_incomplete = Vec::new();
    if chi.is_trivial() {
        for q in k.prime_power_divisors(level)? {
            match recover_al(&mut w, &chi_vals, &alpha, &q) {
                Ok(Some(e)) => {
                    al.insert(q, e);
                }
                Ok(None) => al_incomplete.push(q),
                Err(Error::Oracle(_) | Error::SearchExhausted(..)) => al_incomplete.push(q),
                Err(e) => return Err(e),
            }
        }
    }

    let system = HeckeEigensystem::new(cg, *level, chi, w.field.clone(), alpha, al)?;
    Ok(RecoveryResult { system, gaps, al_incomplete, sign_table: table, doublings, queries: w.queries })
}

fn recover_prime(
    w: &mut Work,
    chi_vals: &BTreeMap<IdealClass, AlgValue>,
    table: &[SignEntry],
    p: &Ideal,
    cp: &IdealClass,
    gv: &[u64],
    opposite: bool,
) -> Result<AlgValue> {
    let cg = w.cg;
    let k = cg.field();
    let unit = k.unit_ideal();
    if gv.iter().all(|&x| x == 0) {
        if cg.is_identity(cp) {
            return w.ask(unit, *p, None);
        }
        let target = cg.inverse(cp);
        let a = w.find(|x| cg.compose(x, x) == target)?;
        let v = w.ask(a, *p, None)?;
        return w.field.div(&v, &w.field.lift(&chi_vals[&cg.class_of(&a)]));
    }
    if let Some(e) = table.iter().find(|e| e.genus == gv) {
        let b = k.mul(p, &e.ideal)?;
        let cb = cg.class_of(&b);
        if cg.is_identity(&cb) {
            let v = w.ask(unit, b, None)?;
            return w.field.div(&v, &w.field.lift(&e.alpha));
        }
        let target = cg.inverse(&cb);
        let d = w.find(|x| cg.compose(x, x) == target)?;
        let v = w.ask(d, b, None)?;
        // ask may have enlarged the working field
        let ae = w.field.lift(&e.alpha);
        let chi_d = w.field.lift(&chi_vals[&cg.class_of(&d)]);
        return w.field.div(&v, &w.field.mul(&ae, &chi_d));
    }
    // alpha(p)^2 = chi(a)^-1 lambda(T_{a,a} T_{p^2}) + N(p) chi(p)
    let target = cg.power(cp, -2);
    let a = w.find(|x| cg.compose(x, x) == target)?;
    let v = w.ask(a, k.pow(p, 2), None)?;
    let f = &w.field;
    let chi_a = f.lift(&chi_vals[&cg.class_of(&a)]);
    let chi_p = f.lift(&chi_vals[cp]);
    let n = BigRational::from_integer(p.norm().into());
    let sq = f.add(&f.div(&v, &chi_a)?, &f.scale(&chi_p, &n));
    if sq.is_zero() {
        return Ok(sq);
    }
    let (g, r) = f.sqrt_or_adjoin(&sq)?;
    w.field = g;
    Ok(if opposite { w.field.neg(&r) } else { r })
}

fn recover_al(
    w: &mut Work,
    chi_vals: &BTreeMap<IdealClass, AlgValue>,
    alpha: &BTreeMap<Ideal, AlgValue>,
    q: &Ideal,
) -> Result<Option<i64>> {
    let cg = w.cg;
    let k = cg.field();
    let unit = k.unit_ideal();
    let cq = cg.class_of(q);
    let v = if cg.is_identity(&cq) {
        w.ask(unit, unit, Some(*q))?
    } else if cg.is_square(&cq) {
        let target = cg.inverse(&cq);
        let a = w.find(|x| cg.compose(x, x) == target)?;
        let v = w.ask(a, unit, Some(*q))?;
        w.field.div(&v, &w.field.lift(&chi_vals[&cg.class_of(&a)]))?
    } else {
        // a prime with nonzero alpha whose class times [q] is a square,
        // preferring the inverse class of q
        let candidates: Vec<(&Ideal, &AlgValue)> =
            alpha.iter().filter(|(p, v)| !v.is_zero() && cg.is_square(&cg.compose(&cg.class_of(p), &cq))).collect();
        let pick = candidates
            .iter()
            .find(|(p, _)| cg.is_identity(&cg.compose(&cg.class_of(p), &cq)))
            .or_else(|| candidates.first());
        let Some((p, ap)) = pick else { return Ok(None) };
        let c = cg.compose(&cg.class_of(p), &cq);
        let a = if cg.is_identity(&c) {
            unit
        } else {
            let target = cg.inverse(&c);
            w.find(|x| cg.compose(x, x) == target)?
        };
        let v = w.ask(a, **p, Some(*q))?;
        let chi_a = w.field.lift(&chi_vals[&cg.class_of(&a)]);
        let den = w.field.mul(&w.field.lift(ap), &chi_a);
        w.field.div(&v, &den)?
    };
    match w.field.to_integer(&v) {
        Some(e @ (1 | -1)) => Ok(Some(e)),
        _ => Err(Error::Consistency(format!(
            "Atkin-Lehner eigenvalue at {} is {}, not +-1",
            k.label(q),
            w.field.format(&v)
        ))),
    }
}
