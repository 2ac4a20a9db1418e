use serde::{Deserialize, Serialize};

use bianchi::eigensystem::{EigensystemRepr, HeckeEigensystem};
use bianchi::fixtures::{compare_ap, ApReport, Bundle, CurveFile, EigensystemFile};
use bianchi::{Error, Result};

use crate::field_for;
use crate::recover::RecoverReport;

/// Anything carrying eigensystems: a table file, one system, or a recovery report.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SystemsInput {
    File(EigensystemFile),
    Report(Box<RecoverReport>),
    Single(EigensystemRepr),
}

impl SystemsInput {
    pub fn systems(self) -> Vec<EigensystemRepr> {
        match self {
            SystemsInput::File(f) => f.systems,
            SystemsInput::Report(r) => r.system.into_iter().collect(),
            SystemsInput::Single(s) => vec![s],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareReport {
    pub system: String,
    pub report: ApReport,
    pub warning: Option<String>,
}

pub struct CompareRequest<'a> {
    pub bundle: Option<&'a Bundle>,
    pub level: Option<String>,
    pub name: Option<String>,
    pub systems: Option<SystemsInput>,
    pub curve: Option<CurveFile>,
    pub bound: Option<u64>,
}

fn isogeny_class(curve_label: &str) -> &str {
    match curve_label.rfind('-') {
        Some(i) if curve_label[i + 1..].chars().all(|c| c.is_ascii_digit()) => &curve_label[..i],
        _ => curve_label,
    }
}

pub fn run(req: CompareRequest<'_>) -> Result<CompareReport> {
    let level = req.level.clone().or_else(|| req.curve.as_ref().map(|c| c.conductor.clone()));
    let curve = match (req.curve, req.bundle) {
        (Some(c), _) => c,
        (None, Some(b)) => {
            let l = level.as_deref().ok_or_else(|| Error::Invalid("give a level or a curve file".into()))?;
            b.curves
                .iter()
                .find(|c| c.conductor == l)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("the bundle has no curve of conductor {l}")))?
        }
        (None, None) => return Err(Error::Invalid("no curve file and no bundle".into())),
    };
    let (_, cg) = field_for(req.bundle, curve.field_disc)?;
    let level = level.unwrap_or_else(|| curve.conductor.clone());
    let reprs: Vec<EigensystemRepr> = match (req.systems, req.bundle) {
        (Some(s), _) => s.systems(),
        (None, Some(b)) => {
            let ls =
                b.systems_at(&level).ok_or_else(|| Error::Invalid(format!("the bundle has no systems at {level}")))?;
            ls.file.systems.clone()
        }
        (None, None) => return Err(Error::Invalid("no eigensystem file and no bundle".into())),
    };
    let wanted = req.name.as_deref().unwrap_or_else(|| isogeny_class(&curve.label));
    let repr = match reprs.as_slice() {
        [one] if req.name.is_none() => one.clone(),
        _ => reprs
            .iter()
            .find(|r| r.name.as_deref() == Some(wanted))
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("no eigensystem named {wanted}")))?,
    };
    if repr.field_disc != curve.field_disc {
        return Err(Error::FieldMismatch(repr.field_disc, curve.field_disc));
    }
    let system = HeckeEigensystem::from_repr(&cg, &repr)?;
    let report = compare_ap(&cg, &system, &curve, req.bound)?;
    let warning = (report.compared() == 0).then(|| "no primes compared".to_string());
    Ok(CompareReport { system: repr.name.unwrap_or_else(|| level.clone()), report, warning })
}

impl CompareReport {
    pub fn ok(&self) -> bool {
        self.report.ok()
    }

    pub fn render(&self) -> String {
        let r = &self.report;
        let bound = r.bound.map_or("none".to_string(), |b| b.to_string());
        let mut s = format!("{} (level {}) vs curve {}, bound {}\n", self.system, r.level, r.curve, bound);
        s.push_str(&format!("matched ({}): {}\n", r.matched.len(), r.matched.join(" ")));
        s.push_str(&format!("mismatched ({})", r.mismatched.len()));
        s.push_str(if r.mismatched.is_empty() { "\n" } else { ":\n" });
        for (p, a, e) in &r.mismatched {
            s.push_str(&format!("  {p}: alpha = {a}, a_p(E) = {e}\n"));
        }
        for b in &r.bad_primes {
            let curve = match (b.reduction, b.curve_ap) {
                (Some(red), Some(a)) => format!("curve {red:?} reduction, a = {a}").to_lowercase(),
                _ => "curve has no entry".to_string(),
            };
            let verdict = if b.ok { "agree" } else { "DISAGREE" };
            s.push_str(&format!(
                "bad prime {}: Atkin-Lehner {:+}, form a = {}; {}: {}\n",
                b.prime, b.al_sign, b.form_ap, curve, verdict
            ));
        }
        if !r.nonminimal.is_empty() {
            s.push_str(&format!("model not minimal at {}\n", r.nonminimal.join(", ")));
        }
        if let Some(w) = &self.warning {
            s.push_str(&format!("warning: {w}\n"));
        }
        s.push_str(if self.ok() { "result: match\n" } else { "result: MISMATCH\n" });
        s
    }
}
