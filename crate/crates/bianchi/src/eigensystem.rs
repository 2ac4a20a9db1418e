//! Hecke eigensystems (alpha, chi): coefficients, twists, and structure
//! detectors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::algext::{AlgValue, FieldMap, ValueField, ValueFieldRepr};
use crate::characters::{character_group, eligible_selftwists, quadratic_characters, ClassCharacter, RootOfUnity};
use crate::classgroup::{ClassGroup, IdealClass};
use crate::error::{invalid, Error, Result};
use crate::quadfield::Ideal;

/// Norm bound below which twist orbits may fail to separate.
pub const MIN_SEPARATING_BOUND: u64 = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelfTwistStatus {
    /// No nontrivial quadratic characters exist.
    None,
    ProvenImpossible,
    /// Candidates surviving every stored prime; not a proof.
    Possible(Vec<ClassCharacter>),
}

#[derive(Debug, Clone)]
pub struct HeckeEigensystem {
    level: Ideal,
    character: ClassCharacter,
    field: ValueField,
    principal_field: ValueField,
    alpha: BTreeMap<Ideal, AlgValue>,
    al_signs: BTreeMap<Ideal, i64>,
    selftwist: Option<ClassCharacter>,
    chi_values: BTreeMap<IdealClass, AlgValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeckeFieldReport {
    pub principal_field: String,
    pub principal_degree: usize,
    pub hecke_field: String,
    pub hecke_degree: usize,
    pub relative_degree: usize,
    pub relation_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigensystemRepr {
    pub field_disc: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub level: String,
    pub character: Vec<u64>,
    pub field: ValueFieldRepr,
    pub alpha: BTreeMap<String, String>,
    #[serde(default)]
    pub al: BTreeMap<String, i64>,
    #[serde(default)]
    pub selftwist: Option<Vec<u64>>,
}

/// Extends `field` by the values of `chi` and returns them by class.
pub fn character_values(
    cg: &ClassGroup,
    field: &ValueField,
    chi: &ClassCharacter,
) -> Result<(ValueField, BTreeMap<IdealClass, AlgValue>)> {
    let order = chi.order(cg);
    let (g, zeta) = field.root_of_unity(&RootOfUnity::new(1, order))?;
    let mut out = BTreeMap::new();
    for c in cg.elements() {
        let r = chi.eval_class(cg, &c);
        let v = g.pow(&zeta, (r.exponent() * (order / r.order())) as i64)?;
        out.insert(c, v);
    }
    Ok((g, out))
}

impl HeckeEigensystem {
    pub fn new(
        cg: &ClassGroup,
        level: Ideal,
        character: ClassCharacter,
        field: ValueField,
        alpha: BTreeMap<Ideal, AlgValue>,
        al_signs: BTreeMap<Ideal, i64>,
    ) -> Result<Self> {
        let k = cg.field();
        if character.exponents.len() != cg.elementary_divisors().len() {
            return Err(invalid("character does not match the class group"));
        }
        for p in alpha.keys() {
            if !k.is_prime_ideal(p) {
                return Err(invalid(format!("alpha is keyed by the non-prime {}", k.label(p))));
            }
        }
        let exact = k.prime_power_divisors(&level)?;
        for (q, e) in &al_signs {
            if !exact.contains(q) {
                return Err(invalid(format!("{} is not an exact prime-power divisor of the level", k.label(q))));
            }
            if *e != 1 && *e != -1 {
                return Err(invalid(format!("Atkin-Lehner sign {e} is not +-1")));
            }
        }
        if !al_signs.is_empty() && !character.is_trivial() {
            return Err(invalid("Atkin-Lehner signs need the trivial character"));
        }
        let (g, chi_values) = character_values(cg, &field, &character)?;
        let alpha = alpha.into_iter().map(|(p, v)| (p, g.lift(&v))).collect();
        Ok(HeckeEigensystem {
            level,
            character,
            principal_field: field.base_field(),
            field: g,
            alpha,
            al_signs,
            selftwist: None,
            chi_values,
        })
    }

    /// Declares a self-twist character, checking alpha vanishes where it must.
    pub fn with_selftwist(mut self, cg: &ClassGroup, psi: ClassCharacter) -> Result<Self> {
        if psi.is_trivial() || !psi.is_quadratic(cg) {
            return Err(invalid("a self-twist character is nontrivial and quadratic"));
        }
        for (p, v) in &self.alpha {
            if !psi.eval_class(cg, &cg.class_of(p)).is_one() && !v.is_zero() {
                return Err(Error::Consistency(format!(
                    "self-twist by {} needs alpha({}) = 0",
                    psi.label(cg),
                    cg.field().label(p)
                )));
            }
        }
        self.selftwist = Some(psi);
        Ok(self)
    }

    pub fn with_principal_field(mut self, f: ValueField) -> Self {
        self.principal_field = f;
        self
    }

    pub fn level(&self) -> &Ideal {
        &self.level
    }

    pub fn character(&self) -> &ClassCharacter {
        &self.character
    }

    pub fn field(&self) -> &ValueField {
        &self.field
    }

    pub fn principal_field(&self) -> &ValueField {
        &self.principal_field
    }

    pub fn alpha(&self) -> &BTreeMap<Ideal, AlgValue> {
        &self.alpha
    }

    pub fn alpha_at(&self, p: &Ideal) -> Option<&AlgValue> {
        self.alpha.get(p)
    }

    pub fn al_signs(&self) -> &BTreeMap<Ideal, i64> {
        &self.al_signs
    }

    pub fn selftwist(&self) -> Option<&ClassCharacter> {
        self.selftwist.as_ref()
    }

    pub fn is_good(&self, cg: &ClassGroup, p: &Ideal) -> bool {
        cg.field().is_coprime(p, &self.level)
    }

    /// chi(a) as a field element, zero when a meets the level.
    pub fn chi_value(&self, cg: &ClassGroup, a: &Ideal) -> AlgValue {
        if !cg.field().is_coprime(a, &self.level) {
            return self.field.zero();
        }
        self.chi_of_class(&cg.class_of(a))
    }

    pub fn chi_of_class(&self, c: &IdealClass) -> AlgValue {
        self.chi_values[c].clone()
    }

    /// alpha(p^e) from the prime-power recursion.
    pub fn prime_power_coefficient(&self, cg: &ClassGroup, p: &Ideal, e: u32) -> Result<AlgValue> {
        let f = &self.field;
        let a = self.alpha.get(p).ok_or_else(|| Error::MissingPrime(cg.field().label(p)))?;
        let nchi = f.scale(&self.chi_value(cg, p), &num_rational::BigRational::from_integer(p.norm().into()));
        let mut prev = f.one();
        let mut cur = a.clone();
        if e == 0 {
            return Ok(prev);
        }
        for _ in 1..e {
            let next = f.sub(&f.mul(&cur, a), &f.mul(&nchi, &prev));
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// alpha(a), multiplicative over coprime factors.
    pub fn coefficient(&self, cg: &ClassGroup, a: &Ideal) -> Result<AlgValue> {
        let mut acc = self.field.one();
        for (p, e) in cg.field().factor_ideal(a)? {
            acc = self.field.mul(&acc, &self.prime_power_coefficient(cg, &p, e)?);
        }
        Ok(acc)
    }

    /// (lambda x psi)(T_a) = psi(a) lambda(T_a).
    pub fn twist(&self, cg: &ClassGroup, psi: &ClassCharacter) -> Result<HeckeEigensystem> {
        let (g, psi_vals) = character_values(cg, &self.field, psi)?;
        let alpha = self.alpha.iter().map(|(p, v)| (*p, g.mul(&psi_vals[&cg.class_of(p)], &g.lift(v)))).collect();
        let chi = self.character.mul(cg, &psi.mul(cg, psi));
        let al = if self.character.is_trivial() && psi.is_quadratic(cg) {
            self.al_signs
                .iter()
                .map(|(q, e)| {
                    let s = psi.eval_class(cg, &cg.class_of(q)).as_sign().expect("quadratic");
                    (*q, e * s)
                })
                .collect()
        } else {
            BTreeMap::new()
        };
        let mut out = HeckeEigensystem::new(cg, self.level, chi, g, alpha, al)?;
        out.principal_field = self.principal_field.clone();
        out.selftwist = self.selftwist.clone();
        Ok(out)
    }

    /// Same level and character and equal alpha at every stored prime
    /// (at good primes only when `good_only`).
    pub fn same_data(&self, cg: &ClassGroup, other: &HeckeEigensystem, good_only: bool) -> Result<bool> {
        if self.level != other.level || self.character != other.character {
            return Ok(false);
        }
        let keep = |p: &Ideal| !good_only || cg.field().is_coprime(p, &self.level);
        let mine: BTreeSet<&Ideal> = self.alpha.keys().filter(|p| keep(p)).collect();
        let theirs: BTreeSet<&Ideal> = other.alpha.keys().filter(|p| keep(p)).collect();
        if mine != theirs {
            return Ok(false);
        }
        let (g, map) = self.field.embedding_of(&other.field)?;
        for p in mine {
            if g.lift(&self.alpha[p]) != g.apply(&map, &other.field, &other.alpha[p]) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Compares at the primes stored in both systems only.
    pub fn agrees_on_common_primes(&self, other: &HeckeEigensystem) -> Result<Vec<Ideal>> {
        let (g, map) = self.field.embedding_of(&other.field)?;
        Ok(self
            .alpha
            .iter()
            .filter(|(p, v)| other.alpha.get(p).is_some_and(|w| g.lift(v) != g.apply(&map, &other.field, w)))
            .map(|(p, _)| *p)
            .collect())
    }

    /// {F x psi : psi}, deduplicated.
    pub fn twist_orbit(&self, cg: &ClassGroup) -> Result<Vec<HeckeEigensystem>> {
        let mut out: Vec<HeckeEigensystem> = Vec::new();
        for psi in character_group(cg) {
            let t = self.twist(cg, &psi)?;
            let mut dup = false;
            for o in &out {
                if o.same_data(cg, &t, false)? {
                    dup = true;
                    break;
                }
            }
            if !dup {
                out.push(t);
            }
        }
        Ok(out)
    }

    /// True when the stored primes reach the bound at which twists separate.
    pub fn bound_is_separating(&self) -> bool {
        self.alpha.keys().any(|p| p.norm() >= MIN_SEPARATING_BOUND)
    }

    pub fn selftwist_status(&self, cg: &ClassGroup) -> Result<SelfTwistStatus> {
        if quadratic_characters(cg).len() == 1 {
            return Ok(SelfTwistStatus::None);
        }
        let candidates: Vec<ClassCharacter> = eligible_selftwists(cg, &self.level)?
            .into_iter()
            .filter(|psi| {
                self.alpha
                    .iter()
                    .all(|(p, v)| v.is_zero() || !self.is_good(cg, p) || psi.eval_class(cg, &cg.class_of(p)).is_one())
            })
            .collect();
        if candidates.is_empty() {
            Ok(SelfTwistStatus::ProvenImpossible)
        } else {
            Ok(SelfTwistStatus::Possible(candidates))
        }
    }

    /// F^sigma at the conjugate level.
    pub fn galois_conjugate_system(&self, cg: &ClassGroup) -> Result<HeckeEigensystem> {
        let k = cg.field();
        let alpha = self.alpha.iter().map(|(p, v)| (k.conjugate(p), v.clone())).collect();
        let al = self.al_signs.iter().map(|(q, e)| (k.conjugate(q), *e)).collect();
        let mut out = HeckeEigensystem::new(
            cg,
            k.conjugate(&self.level),
            self.character.inverse(cg),
            self.field.clone(),
            alpha,
            al,
        )?;
        out.principal_field = self.principal_field.clone();
        if let Some(psi) = &self.selftwist {
            out.selftwist = Some(psi.inverse(cg));
        }
        Ok(out)
    }

    /// Pairs (tau, psi) with tau(alpha(p)) = psi(p) alpha(p) at every stored good prime.
    pub fn inner_twist_pairs(&self, cg: &ClassGroup) -> Result<Vec<(FieldMap, ClassCharacter)>> {
        let f = &self.field;
        let good: Vec<(&Ideal, &AlgValue)> = self.alpha.iter().filter(|(p, _)| self.is_good(cg, p)).collect();
        let mut out = Vec::new();
        for tau in f.automorphisms() {
            let images: Vec<AlgValue> = good.iter().map(|(_, v)| f.apply(&tau, f, v)).collect();
            for psi in character_group(cg) {
                let (g, psi_vals) = character_values(cg, f, &psi)?;
                let ok = good
                    .iter()
                    .zip(&images)
                    .all(|((p, v), t)| g.lift(t) == g.mul(&psi_vals[&cg.class_of(p)], &g.lift(v)));
                if !ok {
                    continue;
                }
                for c in cg.elements() {
                    let chi = self.chi_of_class(&c);
                    let lhs = g.lift(&f.apply(&tau, f, &chi));
                    let psi2 = g.mul(&psi_vals[&c], &psi_vals[&c]);
                    if lhs != g.mul(&psi2, &g.lift(&chi)) {
                        return Err(Error::Consistency(format!(
                            "inner twist by {} violates tau(chi) = psi^2 chi",
                            psi.label(cg)
                        )));
                    }
                }
                out.push((tau.clone(), psi));
            }
        }
        Ok(out)
    }

    /// alpha(p) = alpha(p^sigma) at every stored pair; needs a sigma-stable level.
    pub fn base_change_candidate(&self, cg: &ClassGroup) -> Result<bool> {
        let k = cg.field();
        if k.conjugate(&self.level) != self.level {
            return Err(invalid(format!("level {} is not Galois stable", k.label(&self.level))));
        }
        Ok(self.alpha.iter().all(|(p, v)| self.alpha.get(&k.conjugate(p)).is_none_or(|w| w == v)))
    }

    /// The subgroup generated by the squares and the classes of stored
    /// good primes with nonzero alpha.
    pub fn support_subgroup(&self, cg: &ClassGroup) -> Vec<IdealClass> {
        let mut h: BTreeSet<IdealClass> = cg.elements().iter().map(|x| cg.compose(x, x)).collect();
        let gens: Vec<IdealClass> = self
            .alpha
            .iter()
            .filter(|(p, v)| !v.is_zero() && self.is_good(cg, p))
            .map(|(p, _)| cg.class_of(p))
            .collect();
        loop {
            let mut next = h.clone();
            for x in &h {
                for g in &gens {
                    next.insert(cg.compose(x, g));
                }
            }
            if next.len() == h.len() {
                break;
            }
            h = next;
        }
        h.into_iter().collect()
    }

    /// Values generating the principal eigenvalue field: chi(a) alpha(p) alpha(q)
    /// for stored good primes with [p][q] a square and a^2 p q principal.
    fn principal_values(&self, cg: &ClassGroup) -> Vec<AlgValue> {
        let f = &self.field;
        let good: Vec<(&Ideal, &AlgValue)> = self.alpha.iter().filter(|(p, _)| self.is_good(cg, p)).collect();
        let mut out: Vec<AlgValue> = cg.elements().iter().map(|c| self.chi_of_class(c)).collect();
        for (i, (p, a)) in good.iter().enumerate() {
            let cp = cg.class_of(p);
            if let Some(r) = cg.square_root(&cg.inverse(&cp)) {
                out.push(f.mul(&self.chi_of_class(&r), a));
            }
            for (q, b) in good.iter().skip(i) {
                let c = cg.compose(&cp, &cg.class_of(q));
                if let Some(r) = cg.square_root(&cg.inverse(&c)) {
                    out.push(f.mul(&self.chi_of_class(&r), &f.mul(a, b)));
                }
            }
        }
        out
    }

    pub fn hecke_field_report(&self, cg: &ClassGroup) -> HeckeFieldReport {
        let f = &self.field;
        let mut all: Vec<AlgValue> =
            self.alpha.iter().filter(|(p, _)| self.is_good(cg, p)).map(|(_, v)| v.clone()).collect();
        all.extend(cg.elements().iter().map(|c| self.chi_of_class(c)));
        let (kf_name, kf_deg) = generated_subfield(f, &self.principal_values(cg));
        let (kk_name, kk_deg) = generated_subfield(f, &all);
        let rel = kk_deg.checked_div(kf_deg).unwrap_or(0);
        HeckeFieldReport {
            principal_field: kf_name,
            principal_degree: kf_deg,
            hecke_field: kk_name,
            hecke_degree: kk_deg,
            relative_degree: rel,
            relation_ok: kk_deg % kf_deg.max(1) == 0 && [1, 2, 4].contains(&rel),
        }
    }

    pub fn to_repr(&self, cg: &ClassGroup, name: Option<&str>) -> EigensystemRepr {
        let k = cg.field();
        EigensystemRepr {
            field_disc: k.disc(),
            name: name.map(String::from),
            level: k.label(&self.level),
            character: self.character.exponents.clone(),
            field: self.field.to_repr(),
            alpha: self.alpha.iter().map(|(p, v)| (k.label(p), self.field.format(v))).collect(),
            al: self.al_signs.iter().map(|(q, e)| (k.label(q), *e)).collect(),
            selftwist: self.selftwist.as_ref().map(|s| s.exponents.clone()),
        }
    }

    pub fn from_repr(cg: &ClassGroup, r: &EigensystemRepr) -> Result<Self> {
        let k = cg.field();
        if r.field_disc != k.disc() {
            return Err(Error::FieldMismatch(r.field_disc, k.disc()));
        }
        let field = ValueField::from_repr(&r.field)?;
        let level = k.ideal_from_label(&r.level)?;
        let chi = ClassCharacter::from_exponents(cg, r.character.clone())?;
        let mut alpha = BTreeMap::new();
        for (lab, v) in &r.alpha {
            alpha.insert(k.ideal_from_label(lab)?, field.parse(v)?);
        }
        let mut al = BTreeMap::new();
        for (lab, e) in &r.al {
            al.insert(k.ideal_from_label(lab)?, *e);
        }
        let mut sys = HeckeEigensystem::new(cg, level, chi, field, alpha, al)?;
        if let Some(st) = &r.selftwist {
            sys = sys.with_selftwist(cg, ClassCharacter::from_exponents(cg, st.clone())?)?;
        }
        Ok(sys)
    }
}

/// Degree and a description of the subfield generated by `values`.
fn generated_subfield(f: &ValueField, values: &[AlgValue]) -> (String, usize) {
    let autos = f.automorphisms();
    let stab: Vec<&FieldMap> = autos.iter().filter(|m| values.iter().all(|v| f.apply(m, f, v) == *v)).collect();
    let theta_fixing: Vec<&FieldMap> = stab.iter().copied().filter(|m| m.theta_image == f.theta()).collect();
    let base_fixed = stab.len() == theta_fixing.len();
    let galois = autos.len() == f.degree();
    let degree =
        if galois { f.degree() / stab.len() } else { f.base_degree() * (1 << f.num_roots()) / theta_fixing.len() };
    // the fixed field of sign changes is spanned by the fixed monomials
    let mut fixed_masks = Vec::new();
    for mask in 1usize..(1 << f.num_roots()) {
        let mut mono = f.one();
        for i in 0..f.num_roots() {
            if mask & (1 << i) != 0 {
                mono = f.mul(&mono, &f.root(i));
            }
        }
        if theta_fixing.iter().all(|m| f.apply(m, f, &mono) == mono) {
            fixed_masks.push((mask, mono));
        }
    }
    // a GF(2) basis of the fixed masks
    let mut basis: Vec<(usize, AlgValue)> = Vec::new();
    for (mask, mono) in fixed_masks {
        let mut m = mask;
        for (b, _) in &basis {
            m = m.min(m ^ b);
        }
        if m != 0 {
            basis.push((mask, mono));
        }
    }
    let base = if base_fixed && f.base_degree() > 1 { f.base_field().to_string() } else { "Q".to_string() };
    let gens: Vec<String> = basis
        .iter()
        .map(|(_, mono)| {
            let sq = f.mul(mono, mono);
            match f.to_rational(&sq) {
                Some(r) if r == num_rational::BigRational::from_integer((-1).into()) => "i".to_string(),
                Some(r) => format!("sqrt({r})"),
                None => format!("sqrt({})", f.format(&sq)),
            }
        })
        .collect();
    let name = if gens.is_empty() { base } else { format!("{base}({})", gens.join(", ")) };
    (name, degree)
}
