//! Browser demo: class groups, twist tables and eigensystem recovery over
//! the bundled Q(sqrt-17) data.

use wasm_bindgen::prelude::*;

use bianchi::characters::character_group;
use bianchi::classgroup::ClassGroup;
use bianchi::eigensystem::HeckeEigensystem;
use bianchi::fixtures::{field_from_manifest, BundleManifest, EigensystemFile, LoadedSystems};
use bianchi::quadfield::{Ideal, QuadField};
use bianchi::recovery::{recover, FixtureOracle, OracleFile, RecoveryOptions};

const MANIFEST: &str = include_str!("../../../fixtures/q17/bundle.json");
const TABLE3: &str = include_str!("../../../fixtures/q17/table3.json");
const TABLE4: &str = include_str!("../../../fixtures/q17/table4.json");
pub const ORACLE_2_1: &str = include_str!("../../../fixtures/q17/oracle_2.1.json");

const PRIME_SEARCH: u64 = 10_000;
pub const MAX_BOUND: u64 = 200;

type Res<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn q17() -> Res<(QuadField, ClassGroup)> {
    let m: BundleManifest = serde_json::from_str(MANIFEST).map_err(err)?;
    field_from_manifest(&m).map_err(err)
}

fn systems(cg: &ClassGroup, text: &str) -> Res<LoadedSystems> {
    let file: EigensystemFile = serde_json::from_str(text).map_err(err)?;
    let k = cg.field();
    let level = k.ideal_from_label(&file.level).map_err(err)?;
    let systems = file
        .systems
        .iter()
        .map(|r| Ok((r.name.clone().unwrap_or_default(), HeckeEigensystem::from_repr(cg, r).map_err(err)?)))
        .collect::<Res<Vec<_>>>()?;
    Ok(LoadedSystems { path: file.level.clone(), file, level, systems })
}

fn row(cells: &[String], width: usize) -> String {
    cells.iter().map(|c| format!("{c:>width$}")).collect::<Vec<_>>().join(" ") + "\n"
}

/// Class group, a prime in each class, characters and genus rank of Q(sqrt(-d)).
pub fn field_text(d: i64) -> Res<String> {
    let k = QuadField::new(d).map_err(err)?;
    let cg = ClassGroup::new(&k).map_err(err)?;
    let genus = cg.genus_data().map_err(err)?;
    let one = k.unit_ideal();
    let mut s = format!(
        "Q(sqrt-{}): disc {}, h = {}, CL = {}, r2 = {}\n\n",
        k.d(),
        k.disc(),
        cg.h(),
        cg.structure_string(),
        genus.r2
    );
    s.push_str(&row(&["class".into(), "form".into(), "prime".into(), "genus".into()], 12));
    for c in cg.elements() {
        let f = cg.class_form(&c);
        let p = cg.find_ideal_in_class(&c, &one, true, PRIME_SEARCH).map_err(err)?;
        let g: Vec<String> = cg.genus_vector(&c).iter().map(|x| x.to_string()).collect();
        s.push_str(&row(&[cg.class_label(&c), format!("({},{},{})", f.a, f.b, f.c), k.label(&p), g.join("")], 12));
    }
    s.push('\n');
    for x in character_group(&cg) {
        let vals: Vec<String> = cg
            .elements()
            .iter()
            .map(|c| {
                let z = x.eval_class(&cg, c);
                match z.as_sign() {
                    Some(1) => "1".to_string(),
                    Some(_) => "-1".to_string(),
                    None => format!("z{}^{}", z.order(), z.exponent()),
                }
            })
            .collect();
        s.push_str(&format!("{} (order {}): {}\n", x.label(&cg), x.order(&cg), vals.join(" ")));
    }
    Ok(s)
}

/// The stored systems at 2.1 or 16.1 and which twists relate them.
pub fn twist_text(level: &str) -> Res<String> {
    let (k, cg) = q17()?;
    let ls = match level {
        "2.1" => systems(&cg, TABLE3)?,
        "16.1" => systems(&cg, TABLE4)?,
        _ => return Err(format!("no bundled systems at {level}; try 2.1 or 16.1")),
    };
    let rows = ls.corrected(&cg).map_err(err)?;
    let mut primes: Vec<Ideal> = rows.iter().flat_map(|(_, s)| s.alpha().keys().copied()).collect();
    primes.sort_by_key(|p| k.label_key(p));
    primes.dedup();
    let mut s = format!("level {level}, corrected rows\n\n");
    let mut head = vec!["".to_string(), "chi".to_string()];
    head.extend(primes.iter().map(|p| k.label(p)));
    s.push_str(&row(&head, 12));
    for (name, sys) in &rows {
        let mut cells = vec![name.clone(), sys.character().label(&cg)];
        cells.extend(primes.iter().map(|p| sys.alpha_at(p).map_or("-".into(), |v| sys.field().format(v))));
        s.push_str(&row(&cells, 12));
    }
    let chars = character_group(&cg);
    s.push_str("\nF x psi\n");
    let mut head = vec!["".to_string()];
    head.extend(chars.iter().map(|c| c.label(&cg)));
    s.push_str(&row(&head, 6));
    for (name, sys) in &rows {
        let mut cells = vec![name.clone()];
        for psi in &chars {
            let t = sys.twist(&cg, psi).map_err(err)?;
            let hit = rows.iter().find(|(_, o)| t.same_data(&cg, o, true).unwrap_or(false));
            cells.push(hit.map_or("?".into(), |(n, _)| n.clone()));
        }
        s.push_str(&row(&cells, 6));
    }
    for e in &ls.file.errata {
        s.push_str(&format!("\nerratum {} at {}: printed {}, corrected {}", e.system, e.prime, e.printed, e.corrected));
    }
    Ok(s)
}

/// Recovers an eigensystem from an oracle file and places it in the 2.1 twist orbit.
pub fn recover_text(oracle_json: &str, bound: u64) -> Res<String> {
    if bound > MAX_BOUND {
        return Err(format!("bound {bound} is above {MAX_BOUND}"));
    }
    let (k, cg) = q17()?;
    let file: OracleFile = serde_json::from_str(oracle_json).map_err(err)?;
    let fo = FixtureOracle::from_file(&cg, &file).map_err(err)?;
    let res = recover(&cg, &fo, fo.level(), &RecoveryOptions::with_bound(bound)).map_err(err)?;
    let sys = &res.system;
    let f = sys.field();
    let mut s = format!(
        "level {}, bound {bound}, {} oracle queries\ncharacter {}\n\n",
        file.level,
        res.queries,
        sys.character().label(&cg)
    );
    let mut primes: Vec<&Ideal> = sys.alpha().keys().collect();
    primes.sort_by_key(|p| k.label_key(p));
    for p in primes {
        s.push_str(&format!("  alpha({}) = {}\n", k.label(p), f.format(&sys.alpha()[p])));
    }
    for (q, e) in sys.al_signs() {
        s.push_str(&format!("  eps({}) = {e:+}\n", k.label(q)));
    }
    for (p, why) in &res.gaps {
        s.push_str(&format!("  gap at {}: {why}\n", k.label(p)));
    }
    if file.level == "2.1" {
        let rows = systems(&cg, TABLE3)?.corrected(&cg).map_err(err)?;
        s.push('\n');
        for (name, r) in &rows {
            let psi = character_group(&cg).into_iter().find(|psi| {
                sys.twist(&cg, psi).is_ok_and(|t| {
                    t.agrees_on_common_primes(r).is_ok_and(|bad| bad.is_empty()) && t.character() == r.character()
                })
            });
            match psi {
                Some(psi) => s.push_str(&format!("{name} = R x {}\n", psi.label(&cg))),
                None => s.push_str(&format!("{name}: not a twist of R\n")),
            }
        }
    }
    Ok(s)
}

#[wasm_bindgen]
pub fn field_report(d: i32) -> Result<String, JsError> {
    field_text(d as i64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn twist_table(level: &str) -> Result<String, JsError> {
    twist_text(level).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn recover_oracle(oracle_json: &str, bound: u32) -> Result<String, JsError> {
    recover_text(oracle_json, bound as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bundled_oracle() -> String {
    ORACLE_2_1.to_string()
}
