use serde::{Deserialize, Serialize};

use bianchi::characters::character_group;
use bianchi::classgroup::ClassGroup;
use bianchi::quadfield::QuadField;
use bianchi::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub class: String,
    pub form: [i64; 3],
    /// Smallest prime ideal in the class.
    pub prime: String,
    pub genus: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterInfo {
    pub label: String,
    pub order: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldReport {
    pub d: i64,
    pub disc: i64,
    pub h: u64,
    pub structure: String,
    pub generators: Vec<String>,
    pub classes: Vec<ClassInfo>,
    pub characters: Vec<CharacterInfo>,
    pub r2: u32,
    pub squares: Vec<String>,
}

const PRIME_SEARCH: u64 = 10_000;

pub fn field_report(d: i64) -> Result<FieldReport> {
    let k = QuadField::new(d)?;
    let cg = ClassGroup::new(&k)?;
    report(&k, &cg)
}

pub fn report(k: &QuadField, cg: &ClassGroup) -> Result<FieldReport> {
    let genus = cg.genus_data()?;
    let one = k.unit_ideal();
    let mut classes = Vec::new();
    for c in cg.elements() {
        let f = cg.class_form(&c);
        let p = cg.find_ideal_in_class(&c, &one, true, PRIME_SEARCH)?;
        classes.push(ClassInfo {
            class: cg.class_label(&c),
            form: [f.a, f.b, f.c],
            prime: k.label(&p),
            genus: cg.genus_vector(&c),
        });
    }
    let generators = cg
        .generator_forms()
        .iter()
        .map(|f| {
            let c = cg.class_of(&cg.form_to_ideal(f));
            let p = cg.find_ideal_in_class(&c, &one, true, PRIME_SEARCH)?;
            Ok(k.label(&p))
        })
        .collect::<Result<Vec<_>>>()?;
    let characters =
        character_group(cg).iter().map(|x| CharacterInfo { label: x.label(cg), order: x.order(cg) }).collect();
    Ok(FieldReport {
        d: k.d() as i64,
        disc: k.disc(),
        h: cg.h(),
        structure: cg.structure_string(),
        generators,
        classes,
        characters,
        r2: genus.r2,
        squares: genus.squares.iter().map(|c| cg.class_label(c)).collect(),
    })
}

impl FieldReport {
    pub fn summary(&self) -> String {
        let chars = match self.characters.as_slice() {
            [only] => only.label.clone(),
            [first, .., last] => format!("{}..{}", first.label, last.label),
            [] => String::new(),
        };
        format!("disc {}, CL = {}, characters {}, r2 = {}", self.disc, self.structure, chars, self.r2)
    }

    pub fn render(&self) -> String {
        let mut s = format!("K = Q(sqrt(-{}))\n{}\n", self.d, self.summary());
        s.push_str(&format!("class number {}\n", self.h));
        if !self.generators.is_empty() {
            s.push_str(&format!("generated by the class of {}\n", self.generators.join(", ")));
        }
        s.push_str("classes:\n");
        let w = self.classes.iter().map(|c| c.class.len()).max().unwrap_or(1);
        for c in &self.classes {
            let form = format!("[{}, {}, {}]", c.form[0], c.form[1], c.form[2]);
            s.push_str(&format!("  {:<w$}  {:<14} {:<8} genus {:?}\n", c.class, form, c.prime, c.genus));
        }
        s.push_str("characters:\n");
        for x in &self.characters {
            s.push_str(&format!("  {} order {}\n", x.label, x.order));
        }
        s.push_str(&format!("genus group rank r2 = {}, squares {{{}}}\n", self.r2, self.squares.join(", ")));
        s
    }
}
