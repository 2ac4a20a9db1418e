use serde::{Deserialize, Serialize};

use bianchi::characters::character_group;
use bianchi::classgroup::ClassGroup;
use bianchi::eigensystem::{EigensystemRepr, HeckeEigensystem, HeckeFieldReport, SelfTwistStatus};
use bianchi::fixtures::Bundle;
use bianchi::quadfield::{Ideal, QuadField};
use bianchi::recovery::{recover, FixtureOracle, OracleFile, RecoveryOptions};
use bianchi::{Error, Result};

use crate::{field_for, transposed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitMatch {
    pub sources: usize,
    pub member: bool,
    /// `name x psi` for the first source whose twist matches.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoverReport {
    pub field_disc: i64,
    pub level: String,
    pub bound: u64,
    /// True when the newspace at the level is zero and nothing was recovered.
    pub empty: bool,
    pub system: Option<EigensystemRepr>,
    pub character: Option<String>,
    pub alpha: Vec<(String, String)>,
    pub al: Vec<(String, i64)>,
    pub al_incomplete: Vec<String>,
    pub selftwist: Option<String>,
    pub hecke_field: Option<HeckeFieldReport>,
    pub orbit: Vec<String>,
    pub gaps: Vec<(String, String)>,
    pub queries: usize,
    pub doublings: u32,
    pub source: Option<OrbitMatch>,
}

pub struct RecoverRequest<'a> {
    pub bundle: Option<&'a Bundle>,
    pub level: String,
    pub oracle: Option<OracleFile>,
    pub bound: u64,
    /// Systems the recovered one is expected to be a twist of.
    pub sources: Vec<EigensystemRepr>,
}

pub fn selftwist_text(cg: &ClassGroup, st: &SelfTwistStatus) -> String {
    match st {
        SelfTwistStatus::None => "none (no quadratic characters)".into(),
        SelfTwistStatus::ProvenImpossible => "proven impossible".into(),
        SelfTwistStatus::Possible(c) => {
            format!("possible: {}", c.iter().map(|x| x.label(cg)).collect::<Vec<_>>().join(", "))
        }
    }
}

/// Zero-newspace test from the bundle's dimension table, when it covers the level.
fn newspace_is_zero(bundle: &Bundle, level: &Ideal) -> Result<Option<bool>> {
    let Some(t) = &bundle.dimensions else { return Ok(None) };
    let new = t.new_dims(&bundle.field)?;
    let covered = new.keys().map(|l| l.norm()).max().unwrap_or(0);
    if level.norm() > covered {
        return Ok(None);
    }
    Ok(Some(new.get(level).copied().unwrap_or(0) == 0))
}

fn empty_report(k: &QuadField, level: &Ideal, bound: u64) -> RecoverReport {
    RecoverReport {
        field_disc: k.disc(),
        level: k.label(level),
        bound,
        empty: true,
        system: None,
        character: None,
        alpha: vec![],
        al: vec![],
        al_incomplete: vec![],
        selftwist: None,
        hecke_field: None,
        orbit: vec![],
        gaps: vec![],
        queries: 0,
        doublings: 0,
        source: None,
    }
}

pub fn run(req: RecoverRequest<'_>) -> Result<RecoverReport> {
    let oracle = match req.oracle {
        Some(o) => Some(o),
        None => req.bundle.and_then(|b| b.oracle(&req.level)).cloned(),
    };
    let disc = match (&oracle, req.bundle) {
        (Some(o), _) => o.field_disc,
        (None, Some(b)) => b.field.disc(),
        (None, None) => return Err(Error::Invalid("no oracle file and no bundle".into())),
    };
    let (k, cg) = field_for(req.bundle, disc)?;
    let level = k.ideal_from_label(&req.level)?;
    let Some(file) = oracle else {
        let zero = match req.bundle {
            Some(b) if b.field.disc() == disc => newspace_is_zero(b, &level)?,
            _ => None,
        };
        return match zero {
            Some(true) => Ok(empty_report(&k, &level, req.bound)),
            _ => Err(Error::Invalid(format!("no oracle file for level {}", req.level))),
        };
    };
    let fo = FixtureOracle::from_file(&cg, &file)?;
    if fo.level() != &level {
        return Err(Error::Invalid(format!("oracle file is for level {}, not {}", file.level, req.level)));
    }
    if fo.is_empty() {
        return Ok(empty_report(&k, &level, req.bound));
    }
    let res = recover(&cg, &fo, &level, &RecoveryOptions::with_bound(req.bound))?;
    let s = &res.system;
    let f = s.field();

    let mut sources: Vec<(String, HeckeEigensystem)> = Vec::new();
    if let Some(b) = req.bundle {
        if let Some(ls) = b.systems_at(&req.level).filter(|_| b.field.disc() == disc) {
            sources.extend(ls.corrected(&cg)?);
        }
    }
    for (i, r) in req.sources.iter().enumerate() {
        if r.field_disc != disc {
            return Err(Error::FieldMismatch(r.field_disc, disc));
        }
        sources.push((r.name.clone().unwrap_or_else(|| format!("#{i}")), HeckeEigensystem::from_repr(&cg, r)?));
    }
    let source = if sources.is_empty() {
        None
    } else {
        let mut witness = None;
        for (name, src) in &sources {
            if src.level() != &level {
                continue;
            }
            for psi in character_group(&cg) {
                if src.twist(&cg, &psi)?.same_data(&cg, s, true)? {
                    witness = Some(format!("{name} x {}", psi.label(&cg)));
                    break;
                }
            }
            if witness.is_some() {
                break;
            }
        }
        Some(OrbitMatch { sources: sources.len(), member: witness.is_some(), witness })
    };

    let mut primes: Vec<&Ideal> = s.alpha().keys().collect();
    primes.sort_by_key(|p| k.label_key(p));
    let orbit = s.twist_orbit(&cg)?.iter().map(|t| t.character().label(&cg)).collect();
    Ok(RecoverReport {
        field_disc: disc,
        level: k.label(&level),
        bound: req.bound,
        empty: false,
        system: Some(s.to_repr(&cg, None)),
        character: Some(s.character().label(&cg)),
        alpha: primes.iter().map(|p| (k.label(p), f.format(&s.alpha()[*p]))).collect(),
        al: s.al_signs().iter().map(|(q, e)| (k.label(q), *e)).collect(),
        al_incomplete: res.al_incomplete.iter().map(|q| k.label(q)).collect(),
        selftwist: Some(selftwist_text(&cg, &s.selftwist_status(&cg)?)),
        hecke_field: Some(s.hecke_field_report(&cg)),
        orbit,
        gaps: res.gaps.iter().map(|(p, why)| (k.label(p), why.clone())).collect(),
        queries: res.queries,
        doublings: res.doublings,
        source,
    })
}

impl RecoverReport {
    pub fn ok(&self) -> bool {
        self.gaps.is_empty() && self.source.as_ref().is_none_or(|m| m.member)
    }

    pub fn render(&self) -> String {
        let mut s = format!("level {}  disc {}  bound {}\n", self.level, self.field_disc, self.bound);
        if self.empty {
            s.push_str("newspace is zero: nothing to recover\n");
            return s;
        }
        if let Some(c) = &self.character {
            s.push_str(&format!("character: {c}\n"));
        }
        s.push_str(&transposed(("p", "alpha"), &self.alpha, 8));
        if self.al.is_empty() && self.al_incomplete.is_empty() {
            s.push_str("Atkin-Lehner: none\n");
        }
        for (q, e) in &self.al {
            s.push_str(&format!("Atkin-Lehner: eps({q}) = {e:+}\n"));
        }
        if !self.al_incomplete.is_empty() {
            s.push_str(&format!("Atkin-Lehner sign not found at {}\n", self.al_incomplete.join(", ")));
        }
        if let Some(t) = &self.selftwist {
            s.push_str(&format!("self-twist: {t}\n"));
        }
        if let Some(h) = &self.hecke_field {
            s.push_str(&format!(
                "Hecke field: k_f = {} (degree {}), k_F = {} (degree {}), [k_F:k_f] = {}\n",
                h.principal_field, h.principal_degree, h.hecke_field, h.hecke_degree, h.relative_degree
            ));
        }
        s.push_str(&format!("twist orbit: {} systems, characters {}\n", self.orbit.len(), self.orbit.join(", ")));
        s.push_str(&format!("oracle queries: {}, sign doublings: {}\n", self.queries, self.doublings));
        if self.gaps.is_empty() {
            s.push_str("gaps: none\n");
        } else {
            s.push_str(&format!("gaps: {}\n", self.gaps.len()));
            for (p, why) in &self.gaps {
                s.push_str(&format!("  {p}: {why}\n"));
            }
        }
        if let Some(m) = &self.source {
            match &m.witness {
                Some(w) => s.push_str(&format!("member of source twist orbit: yes ({w})\n")),
                None => s.push_str(&format!("member of source twist orbit: no ({} sources)\n", m.sources)),
            }
        }
        s
    }
}
