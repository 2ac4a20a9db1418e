//! Fixture bundles: a field pin plus the tables, oracle files and curve data
//! that accompany it, loaded and cross-checked as a unit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classgroup::{ClassGroup, ClassGroupRepr, IdealClass};
use crate::dimensions::{DimensionTable, HeckeFieldTable, NewformRecord};
use crate::eigensystem::{EigensystemRepr, HeckeEigensystem};
use crate::error::{invalid, Error, Result};
use crate::quadfield::{Ideal, LabelOrder, QuadField};
use crate::recovery::{project_to_principal, FixtureOracle, OperatorRepr, Oracle, OracleFile, PrincipalOperator};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDescriptor {
    pub d: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_order: Option<LabelOrder>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub name: String,
    pub field: FieldDescriptor,
    pub class_group: ClassGroupRepr,
    /// Norm -> HNF triples in label order.
    #[serde(default)]
    pub label_overrides: BTreeMap<String, Vec<[i64; 3]>>,
    #[serde(default)]
    pub dimensions: Option<String>,
    #[serde(default)]
    pub hecke_fields: Option<String>,
    #[serde(default)]
    pub records: Vec<NewformRecord>,
    #[serde(default)]
    pub eigensystems: Vec<String>,
    #[serde(default)]
    pub oracles: Vec<String>,
    #[serde(default)]
    pub curves: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Erratum {
    pub system: String,
    pub prime: String,
    pub printed: String,
    pub corrected: String,
}

/// Expected eigenvalues of one principal operator across a file's systems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipalCheck {
    pub operator: OperatorRepr,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigensystemFile {
    pub field_disc: i64,
    pub level: String,
    pub systems: Vec<EigensystemRepr>,
    /// Class exponents as printed, for cyclic class groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_classes: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errata: Vec<Erratum>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub principal_checks: Vec<PrincipalCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discrepancies: Vec<Discrepancy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A printed claim that the stored rows contradict, with the exact failure
/// text a check is expected to produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discrepancy {
    pub check: String,
    pub detail: String,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Split,
    Nonsplit,
    Additive,
}

impl Reduction {
    /// Trace of Frobenius on the bad fibre.
    pub fn ap(self) -> i64 {
        match self {
            Reduction::Split => 1,
            Reduction::Nonsplit => -1,
            Reduction::Additive => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BadPrime {
    pub prime: String,
    pub reduction: Reduction,
    pub ap: i64,
}

/// An elliptic curve over the field with its Frobenius traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub field_disc: i64,
    pub label: String,
    pub conductor: String,
    /// a1, a2, a3, a4, a6 as x + y*w pairs.
    pub ainvs: [[i64; 2]; 5],
    pub ap: BTreeMap<String, i64>,
    #[serde(default)]
    pub bad_primes: Vec<BadPrime>,
    /// Good primes where the stored model is not minimal.
    #[serde(default)]
    pub nonminimal_primes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedSystems {
    pub path: String,
    pub file: EigensystemFile,
    pub level: Ideal,
    pub systems: Vec<(String, HeckeEigensystem)>,
}

impl LoadedSystems {
    pub fn get(&self, name: &str) -> Option<&HeckeEigensystem> {
        self.systems.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    /// The systems with every erratum applied.
    pub fn corrected(&self, cg: &ClassGroup) -> Result<Vec<(String, HeckeEigensystem)>> {
        let mut reprs = self.file.systems.clone();
        for e in &self.file.errata {
            let r = reprs
                .iter_mut()
                .find(|r| r.name.as_deref() == Some(e.system.as_str()))
                .ok_or_else(|| Error::Schema(format!("erratum names unknown system {}", e.system)))?;
            r.alpha.insert(e.prime.clone(), e.corrected.clone());
        }
        reprs.iter().map(|r| Ok((r.name.clone().unwrap_or_default(), HeckeEigensystem::from_repr(cg, r)?))).collect()
    }

    /// The eigenvalue of `op` on each system, formatted, in file order.
    pub fn principal_values(&self, cg: &ClassGroup, op: &PrincipalOperator) -> Result<Vec<String>> {
        self.systems
            .iter()
            .map(|(_, s)| {
                let o = project_to_principal(cg, s);
                Ok(s.field().format(&o.query(op)?))
            })
            .collect()
    }

    /// The documented discrepancy for `check`, if any.
    pub fn discrepancy(&self, check: &str) -> Option<&Discrepancy> {
        self.file.discrepancies.iter().find(|d| d.check == check)
    }

    pub fn principal_checks(&self, cg: &ClassGroup) -> Result<Vec<(PrincipalOperator, Vec<String>)>> {
        self.file
            .principal_checks
            .iter()
            .map(|c| Ok((PrincipalOperator::from_repr(cg, &self.level, &c.operator)?, c.values.clone())))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: BundleManifest,
    pub field: QuadField,
    pub class_group: ClassGroup,
    pub dimensions: Option<DimensionTable>,
    pub hecke_fields: Option<HeckeFieldTable>,
    pub eigensystems: Vec<LoadedSystems>,
    pub oracles: Vec<(String, OracleFile)>,
    pub curves: Vec<CurveFile>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Builds the field with the manifest's label overrides and the pinned class group.
pub fn field_from_manifest(m: &BundleManifest) -> Result<(QuadField, ClassGroup)> {
    let mut k = QuadField::new(m.field.d)?;
    if let Some(o) = m.field.label_order {
        k.set_label_order(o);
    }
    for (norm, order) in &m.label_overrides {
        let n: u64 = norm.parse().map_err(|_| Error::Schema(format!("label override key {norm:?}")))?;
        k.set_label_override(n, order.clone())?;
    }
    let cg = ClassGroup::from_repr(&k, &m.class_group)?;
    Ok((k, cg))
}

fn check_disc(k: &QuadField, disc: i64, what: &str) -> Result<()> {
    if disc != k.disc() {
        return Err(Error::Schema(format!("{what}: field discriminant {disc}, bundle has {}", k.disc())));
    }
    Ok(())
}

fn schema<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema(_) | Error::Io(_) => e,
        other => Error::Schema(format!("{what}: {other}")),
    })
}

fn prime_label(k: &QuadField, label: &str, what: &str) -> Result<Ideal> {
    let p = schema(what, k.ideal_from_label(label))?;
    if !k.is_prime_ideal(&p) {
        return Err(Error::Schema(format!("{what}: {label} is not prime")));
    }
    Ok(p)
}

impl Bundle {
    /// Loads `dir/bundle.json` and every file it names.
    pub fn load(dir: impl AsRef<Path>) -> Result<Bundle> {
        let dir = dir.as_ref().to_path_buf();
        let manifest: BundleManifest = read_json(&dir.join("bundle.json"))?;
        Bundle::from_manifest(dir, manifest)
    }

    pub fn from_manifest(dir: PathBuf, manifest: BundleManifest) -> Result<Bundle> {
        let (k, cg) = schema("field", field_from_manifest(&manifest))?;

        let dimensions = match &manifest.dimensions {
            Some(f) => {
                let t: DimensionTable = read_json(&dir.join(f))?;
                check_disc(&k, t.field_disc, f)?;
                schema(f, t.new_dims(&k))?;
                for row in &t.rows {
                    for l in row.levels() {
                        schema(f, k.ideal_from_label(l))?;
                    }
                }
                Some(t)
            }
            None => None,
        };
        let hecke_fields = match &manifest.hecke_fields {
            Some(f) => {
                let t: HeckeFieldTable = read_json(&dir.join(f))?;
                check_disc(&k, t.field_disc, f)?;
                for e in &t.entries {
                    schema(f, k.ideal_from_label(&e.level))?;
                    if let Some(d) = &dimensions {
                        if d.row(&e.level).is_none() {
                            return Err(Error::Schema(format!("{f}: level {} is not in the dimension table", e.level)));
                        }
                    }
                }
                Some(t)
            }
            None => None,
        };
        for r in &manifest.records {
            schema("records", k.ideal_from_label(&r.level))?;
            schema("records", r.check())?;
        }

        let mut eigensystems = Vec::new();
        for f in &manifest.eigensystems {
            eigensystems.push(load_systems(&k, &cg, &dir, f)?);
        }
        let mut oracles = Vec::new();
        for f in &manifest.oracles {
            let o: OracleFile = read_json(&dir.join(f))?;
            schema(f, FixtureOracle::from_file(&cg, &o))?;
            oracles.push((f.clone(), o));
        }
        let mut curves = Vec::new();
        for f in &manifest.curves {
            let c: CurveFile = read_json(&dir.join(f))?;
            validate_curve(&k, &c, f)?;
            curves.push(c);
        }
        Ok(Bundle { dir, manifest, field: k, class_group: cg, dimensions, hecke_fields, eigensystems, oracles, curves })
    }

    pub fn systems_at(&self, level: &str) -> Option<&LoadedSystems> {
        let n = self.field.ideal_from_label(level).ok()?;
        self.eigensystems.iter().find(|s| s.level == n)
    }

    /// Every named system across all files, errata applied.
    pub fn all_systems(&self) -> Result<Vec<(String, HeckeEigensystem)>> {
        let mut out = Vec::new();
        for s in &self.eigensystems {
            for (name, sys) in s.corrected(&self.class_group)? {
                out.push((format!("{}:{}", self.field.label(&s.level), name), sys));
            }
        }
        Ok(out)
    }

    pub fn oracle(&self, level: &str) -> Option<&OracleFile> {
        self.oracles.iter().map(|(_, o)| o).find(|o| o.level == level)
    }

    pub fn curve(&self, label: &str) -> Option<&CurveFile> {
        self.curves.iter().find(|c| c.label == label)
    }
}

fn load_systems(k: &QuadField, cg: &ClassGroup, dir: &Path, f: &str) -> Result<LoadedSystems> {
    let file: EigensystemFile = read_json(&dir.join(f))?;
    check_disc(k, file.field_disc, f)?;
    let level = schema(f, k.ideal_from_label(&file.level))?;
    let mut systems = Vec::new();
    for (i, r) in file.systems.iter().enumerate() {
        let name = r.name.clone().unwrap_or_else(|| format!("#{i}"));
        let what = format!("{f} {name}");
        check_disc(k, r.field_disc, &what)?;
        let s = schema(&what, HeckeEigensystem::from_repr(cg, r))?;
        if s.level() != &level {
            return Err(Error::Schema(format!("{what}: level {} differs from the file level", r.level)));
        }
        systems.push((name, s));
    }
    for e in &file.errata {
        let r = file
            .systems
            .iter()
            .find(|r| r.name.as_deref() == Some(e.system.as_str()))
            .ok_or_else(|| Error::Schema(format!("{f}: erratum names unknown system {}", e.system)))?;
        if r.alpha.get(&e.prime) != Some(&e.printed) {
            return Err(Error::Schema(format!(
                "{f}: erratum at {} {} does not match the stored value",
                e.system, e.prime
            )));
        }
    }
    if let Some(pc) = &file.printed_classes {
        for l in pc.keys() {
            prime_label(k, l, f)?;
        }
    }
    let loaded = LoadedSystems { path: f.to_string(), file, level, systems };
    schema(f, loaded.corrected(cg))?;
    schema(f, loaded.principal_checks(cg))?;
    Ok(loaded)
}

fn validate_curve(k: &QuadField, c: &CurveFile, f: &str) -> Result<()> {
    check_disc(k, c.field_disc, f)?;
    let n = schema(f, k.ideal_from_label(&c.conductor))?;
    for l in c.ap.keys().chain(c.nonminimal_primes.iter()) {
        let p = prime_label(k, l, f)?;
        if k.divides(&p, &n) {
            return Err(Error::Schema(format!("{f}: good-prime entry {l} divides the conductor")));
        }
    }
    for b in &c.bad_primes {
        let p = prime_label(k, &b.prime, f)?;
        if !k.divides(&p, &n) {
            return Err(Error::Schema(format!("{f}: bad prime {} does not divide the conductor", b.prime)));
        }
        if b.ap != b.reduction.ap() {
            return Err(Error::Schema(format!("{f}: a_p at {} disagrees with its reduction type", b.prime)));
        }
    }
    Ok(())
}

/// The unit u mod n with printed = computed^u for every listed prime, if any.
pub fn class_relabeling(cg: &ClassGroup, printed: &BTreeMap<String, u64>) -> Result<Option<u64>> {
    let n = match cg.elementary_divisors() {
        [] => 1,
        [n] => *n,
        _ => return Err(invalid("printed classes are only supported for cyclic class groups")),
    };
    let k = cg.field();
    let mut computed = Vec::new();
    for (l, e) in printed {
        let c = cg.class_of(&k.ideal_from_label(l)?);
        computed.push((c.0.first().copied().unwrap_or(0), *e % n));
    }
    Ok((1..=n).find(|&u| num_integer::gcd(u, n) == 1 && computed.iter().all(|&(c, e)| (c * u) % n == e)))
}

pub fn class_exponent(c: &IdealClass) -> u64 {
    c.0.first().copied().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadPrimeComparison {
    pub prime: String,
    pub al_sign: i64,
    /// -epsilon, the Euler-factor coefficient of the form.
    pub form_ap: i64,
    pub reduction: Option<Reduction>,
    pub curve_ap: Option<i64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApReport {
    pub level: String,
    pub curve: String,
    pub bound: Option<u64>,
    pub matched: Vec<String>,
    pub mismatched: Vec<(String, String, i64)>,
    pub bad_primes: Vec<BadPrimeComparison>,
    pub nonminimal: Vec<String>,
}

impl ApReport {
    pub fn compared(&self) -> usize {
        self.matched.len() + self.mismatched.len()
    }

    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.bad_primes.iter().all(|b| b.ok)
    }
}

/// Compares alpha(p) with a_p(E) at every shared good prime of norm at most
/// `bound`, and the Atkin-Lehner sign with the reduction type at bad primes.
pub fn compare_ap(
    cg: &ClassGroup,
    system: &HeckeEigensystem,
    curve: &CurveFile,
    bound: Option<u64>,
) -> Result<ApReport> {
    let k = cg.field();
    if curve.field_disc != k.disc() {
        return Err(Error::FieldMismatch(curve.field_disc, k.disc()));
    }
    let n = k.ideal_from_label(&curve.conductor)?;
    if &n != system.level() {
        return Err(invalid(format!(
            "curve conductor {} is not the level {}",
            curve.conductor,
            k.label(system.level())
        )));
    }
    let mut primes: Vec<(Ideal, i64)> = Vec::new();
    for (l, a) in &curve.ap {
        primes.push((k.ideal_from_label(l)?, *a));
    }
    primes.sort_by_key(|(p, _)| k.label_key(p));
    let f = system.field();
    let mut matched = Vec::new();
    let mut mismatched = Vec::new();
    for (p, a) in primes {
        if bound.is_some_and(|b| p.norm() > b) {
            continue;
        }
        let Some(v) = system.alpha_at(&p) else { continue };
        let label = k.label(&p);
        if f.to_integer(v) == Some(a) {
            matched.push(label);
        } else {
            mismatched.push((label, f.format(v), a));
        }
    }
    let mut bad_primes = Vec::new();
    for (q, eps) in system.al_signs() {
        let label = k.label(q);
        let b = curve.bad_primes.iter().find(|b| b.prime == label);
        let form_ap = if k.is_prime_ideal(q) { -eps } else { 0 };
        bad_primes.push(BadPrimeComparison {
            prime: label,
            al_sign: *eps,
            form_ap,
            reduction: b.map(|b| b.reduction),
            curve_ap: b.map(|b| b.ap),
            ok: b.is_some_and(|b| b.ap == form_ap),
        });
    }
    Ok(ApReport {
        level: k.label(&n),
        curve: curve.label.clone(),
        bound,
        matched,
        mismatched,
        bad_primes,
        nonminimal: curve.nonminimal_primes.clone(),
    })
}
