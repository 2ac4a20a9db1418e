//! Old and new dimension bookkeeping and structural checks of newform
//! table rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::characters::ClassCharacter;
use crate::classgroup::ClassGroup;
use crate::error::{invalid, Error, Result};
use crate::quadfield::{Ideal, QuadField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeckeSign {
    /// T_{p,p} = +1 on the homology for p in the nontrivial genus.
    Plus,
    Minus,
}

/// How the full eigensystems over one homological orbit of degree d split
/// into Galois orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftShape {
    /// d,d on the plus side; 2d,2d on the minus side.
    Split,
    /// 2d; 4d.
    Joined,
    /// d; 2d.
    SelfTwist,
}

impl LiftShape {
    pub fn parts(self, sign: HeckeSign, d: u64) -> Vec<u64> {
        let m = match sign {
            HeckeSign::Plus => 1,
            HeckeSign::Minus => 2,
        };
        match self {
            LiftShape::Split => vec![m * d, m * d],
            LiftShape::Joined => vec![2 * m * d],
            LiftShape::SelfTwist => vec![m * d],
        }
    }

    /// Eigensystems missing compared with the 4d of a form without self-twist.
    pub fn deficit(self, d: u64) -> u64 {
        match self {
            LiftShape::SelfTwist => 2 * d,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewformRecord {
    pub level: String,
    pub sign: HeckeSign,
    pub orbit_degree: u64,
    #[serde(default)]
    pub selftwist: Option<Vec<u64>>,
    /// None when the shape is not pinned by the available data.
    #[serde(default)]
    pub lift_shape: Option<LiftShape>,
}

impl NewformRecord {
    pub fn check(&self) -> Result<()> {
        if self.orbit_degree == 0 {
            return Err(invalid(format!("record at {} has orbit degree 0", self.level)));
        }
        match (self.lift_shape, &self.selftwist) {
            (Some(LiftShape::SelfTwist), None) => {
                Err(invalid(format!("record at {} has a self-twist shape but no character", self.level)))
            }
            (Some(s), Some(_)) if s != LiftShape::SelfTwist => {
                Err(invalid(format!("record at {} has a self-twist character but shape {s:?}", self.level)))
            }
            _ => Ok(()),
        }
    }

    /// The shapes this record allows.
    pub fn shapes(&self) -> Vec<LiftShape> {
        match (self.lift_shape, &self.selftwist) {
            (Some(s), _) => vec![s],
            (None, Some(_)) => vec![LiftShape::SelfTwist],
            (None, None) => vec![LiftShape::Split, LiftShape::Joined],
        }
    }
}

/// One row of the newform table; conjugate levels share a row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionRow {
    pub level: String,
    #[serde(default)]
    pub conj: Option<String>,
    pub nd: u64,
    #[serde(rename = "Hplus")]
    pub hplus: Vec<u64>,
    #[serde(rename = "Hminus")]
    pub hminus: Vec<u64>,
    pub chi0: Vec<u64>,
    pub chi13: Vec<u64>,
}

impl DimensionRow {
    pub fn levels(&self) -> Vec<&str> {
        let mut v = vec![self.level.as_str()];
        if let Some(c) = &self.conj {
            v.push(c.as_str());
        }
        v
    }

    pub fn homology_dim(&self) -> u64 {
        self.hplus.iter().sum::<u64>() + self.hminus.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionTable {
    pub field_disc: i64,
    pub rows: Vec<DimensionRow>,
}

impl DimensionTable {
    pub fn row(&self, label: &str) -> Option<&DimensionRow> {
        self.rows.iter().find(|r| r.levels().contains(&label))
    }

    /// New dimensions by level, conjugate levels listed separately.
    pub fn new_dims(&self, k: &QuadField) -> Result<BTreeMap<Ideal, u64>> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            for l in r.levels() {
                out.insert(k.ideal_from_label(l)?, r.nd);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReport {
    pub level: String,
    pub ok: bool,
    pub failures: Vec<String>,
    /// A shape assignment reproducing both character columns.
    pub assignment: Vec<(HeckeSign, u64, LiftShape)>,
    /// Records whose shape was chosen by the search rather than pinned.
    pub ambiguous: usize,
    pub deficit: u64,
}

/// dim S(n)^new = dim S(n) - sum over proper divisors m of sigma0(n/m) dim S(m)^new.
pub fn newspace_dims(k: &QuadField, full: &BTreeMap<Ideal, u64>) -> Result<BTreeMap<Ideal, u64>> {
    let mut levels: Vec<Ideal> = full.keys().copied().collect();
    levels.sort_by_key(|i| k.label_key(i));
    let mut new: BTreeMap<Ideal, u64> = BTreeMap::new();
    for n in levels {
        let mut old = 0u64;
        for m in k.divisors(&n)? {
            if m == n {
                continue;
            }
            let nm = new.get(&m).ok_or_else(|| {
                invalid(format!("no dimension given for {}, a divisor of {}", k.label(&m), k.label(&n)))
            })?;
            old += k.sigma0(&k.quotient(&n, &m)?)? * nm;
        }
        let f = full[&n];
        let d = f.checked_sub(old).ok_or_else(|| {
            Error::Consistency(format!("old dimension {old} exceeds full dimension {f} at {}", k.label(&n)))
        })?;
        new.insert(n, d);
    }
    Ok(new)
}

/// dim S(n) = sum over divisors m of sigma0(n/m) dim S(m)^new, with absent m counted as 0.
pub fn full_dims(k: &QuadField, new: &BTreeMap<Ideal, u64>, levels: &[Ideal]) -> Result<BTreeMap<Ideal, u64>> {
    let mut out = BTreeMap::new();
    for n in levels {
        let mut total = 0;
        for m in k.divisors(n)? {
            if let Some(d) = new.get(&m) {
                total += k.sigma0(&k.quotient(n, &m)?)? * d;
            }
        }
        out.insert(*n, total);
    }
    Ok(out)
}

/// Principal-component multiplicity of the oldclass of a newform at level m
/// inside level n: the divisors d of n/m with psi(d) = +1.
pub fn oldclass_principal_multiplicity(
    cg: &ClassGroup,
    m: &Ideal,
    selftwist: Option<&ClassCharacter>,
    n: &Ideal,
) -> Result<u64> {
    let k = cg.field();
    if !k.divides(m, n) {
        return Err(invalid(format!("{} does not divide {}", k.label(m), k.label(n))));
    }
    let q = k.quotient(n, m)?;
    match selftwist {
        None => k.sigma0(&q),
        Some(psi) => {
            if !psi.is_quadratic(cg) || psi.is_trivial() {
                return Err(invalid("a self-twist character is nontrivial and quadratic"));
            }
            Ok(k.divisors(&q)?.iter().filter(|d| psi.eval_class(cg, &cg.class_of(d)).is_one()).count() as u64)
        }
    }
}

fn sorted(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

/// Matches the entries of one H column with records, filling gaps with
/// unpinned records.
fn entries_for(
    sign: HeckeSign,
    column: &[u64],
    records: &[&NewformRecord],
    failures: &mut Vec<String>,
) -> Vec<NewformRecord> {
    let mut pool: Vec<&NewformRecord> = records.iter().copied().filter(|r| r.sign == sign).collect();
    let mut out = Vec::new();
    for &d in column {
        match pool.iter().position(|r| r.orbit_degree == d) {
            Some(i) => out.push(pool.remove(i).clone()),
            None => out.push(NewformRecord {
                level: String::new(),
                sign,
                orbit_degree: d,
                selftwist: None,
                lift_shape: None,
            }),
        }
    }
    for r in pool {
        failures.push(format!("record of degree {} ({sign:?}) has no entry in the H column", r.orbit_degree));
    }
    out
}

/// Finds shapes for the entries whose parts make up `target`.
fn assign(sign: HeckeSign, entries: &[NewformRecord], target: &[u64]) -> Option<Vec<LiftShape>> {
    let choices: Vec<Vec<LiftShape>> = entries.iter().map(|r| r.shapes()).collect();
    let target = sorted(target.to_vec());
    let mut idx = vec![0usize; entries.len()];
    loop {
        let shapes: Vec<LiftShape> = idx.iter().zip(&choices).map(|(i, c)| c[*i]).collect();
        let parts: Vec<u64> = shapes.iter().zip(entries).flat_map(|(s, r)| s.parts(sign, r.orbit_degree)).collect();
        if sorted(parts) == target {
            return Some(shapes);
        }
        let mut j = 0;
        loop {
            if j == idx.len() {
                return None;
            }
            idx[j] += 1;
            if idx[j] < choices[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

pub fn validate_row(k: Option<&QuadField>, row: &DimensionRow, records: &[NewformRecord]) -> RowReport {
    let mut failures = Vec::new();
    let mine: Vec<&NewformRecord> = records.iter().filter(|r| row.levels().contains(&r.level.as_str())).collect();
    for r in &mine {
        if let Err(e) = r.check() {
            failures.push(e.to_string());
        }
    }
    if let Some(k) = k {
        match k.ideal_from_label(&row.level) {
            Ok(n) => {
                let c = k.conjugate(&n);
                match &row.conj {
                    Some(cl) => match k.ideal_from_label(cl) {
                        Ok(ci) if ci == c && ci != n => {}
                        Ok(_) => failures.push(format!("{cl} is not the conjugate of {}", row.level)),
                        Err(e) => failures.push(e.to_string()),
                    },
                    None if c != n => {
                        failures.push(format!("{} is not Galois stable but has no conjugate listed", row.level))
                    }
                    None => {}
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    let mut assignment = Vec::new();
    let mut ambiguous = 0;
    let mut deficit = 0;
    for (sign, column, target, name) in
        [(HeckeSign::Plus, &row.hplus, &row.chi0, "chi0"), (HeckeSign::Minus, &row.hminus, &row.chi13, "chi1,chi3")]
    {
        let entries = entries_for(sign, column, &mine, &mut failures);
        ambiguous += entries.iter().filter(|r| r.shapes().len() > 1).count();
        match assign(sign, &entries, target) {
            Some(shapes) => {
                for (s, r) in shapes.iter().zip(&entries) {
                    deficit += s.deficit(r.orbit_degree);
                    assignment.push((sign, r.orbit_degree, *s));
                }
            }
            None => failures.push(format!("{name} column {target:?} is not a union of lift shapes of {column:?}")),
        }
    }
    let expect = 4 * row.homology_dim();
    if expect < deficit || row.nd != expect - deficit {
        failures.push(format!("nd = {} but 4 * dim H = {expect} with self-twist deficit {deficit}", row.nd));
    }
    RowReport { level: row.level.clone(), ok: failures.is_empty(), failures, assignment, ambiguous, deficit }
}

/// A Hecke field table entry, for deriving lift shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeckeFieldEntry {
    pub level: String,
    pub index: u32,
    pub kf: String,
    pub kf_degree: u64,
    #[serde(rename = "kF")]
    pub k_full: String,
    #[serde(rename = "kF_degree")]
    pub k_full_degree: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeckeFieldTable {
    pub field_disc: i64,
    #[serde(default)]
    pub f8: Option<Vec<i64>>,
    pub entries: Vec<HeckeFieldEntry>,
}

/// Records for every row: the pinned records first, then plus-side shapes
/// from the Hecke field degrees, everything else unpinned.
pub fn derive_records(
    rows: &[DimensionRow],
    fields: Option<&HeckeFieldTable>,
    pinned: &[NewformRecord],
) -> Result<Vec<NewformRecord>> {
    let mut out: Vec<NewformRecord> = pinned.to_vec();
    for row in rows {
        let levels = row.levels();
        let mut pending: Vec<&HeckeFieldEntry> = fields
            .map(|t| t.entries.iter().filter(|e| levels.contains(&e.level.as_str())).collect())
            .unwrap_or_default();
        let mut claimed: Vec<&NewformRecord> = pinned.iter().filter(|r| levels.contains(&r.level.as_str())).collect();
        for &d in &row.hplus {
            if let Some(i) = claimed.iter().position(|r| r.sign == HeckeSign::Plus && r.orbit_degree == d) {
                let r = claimed.remove(i);
                let full = if r.shapes() == [LiftShape::Joined] { 2 * d } else { d };
                if let Some(j) = pending.iter().position(|e| e.kf_degree == d && e.k_full_degree == full) {
                    pending.remove(j);
                }
                continue;
            }
            let shape = match pending.iter().position(|e| e.kf_degree == d) {
                Some(j) => {
                    let e = pending.remove(j);
                    if e.k_full_degree == d {
                        Some(LiftShape::Split)
                    } else if e.k_full_degree == 2 * d {
                        Some(LiftShape::Joined)
                    } else {
                        return Err(Error::Schema(format!(
                            "Hecke field entry {}#{} has degrees {} and {}",
                            e.level, e.index, e.kf_degree, e.k_full_degree
                        )));
                    }
                }
                None => None,
            };
            out.push(NewformRecord {
                level: row.level.clone(),
                sign: HeckeSign::Plus,
                orbit_degree: d,
                selftwist: None,
                lift_shape: shape,
            });
        }
        if let Some(e) = pending.first() {
            return Err(Error::Schema(format!("Hecke field entry {}#{} matches no H+ entry", e.level, e.index)));
        }
        for &d in &row.hminus {
            if let Some(i) = claimed.iter().position(|r| r.sign == HeckeSign::Minus && r.orbit_degree == d) {
                claimed.remove(i);
                continue;
            }
            out.push(NewformRecord {
                level: row.level.clone(),
                sign: HeckeSign::Minus,
                orbit_degree: d,
                selftwist: None,
                lift_shape: None,
            });
        }
        if let Some(r) = claimed.first() {
            return Err(Error::Schema(format!(
                "pinned record of degree {} at {} matches no H entry",
                r.orbit_degree, r.level
            )));
        }
    }
    Ok(out)
}
