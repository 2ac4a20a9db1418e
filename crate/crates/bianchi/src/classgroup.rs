//! The ideal class group via reduced binary quadratic forms.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{invalid, Error, Result};
use crate::quadfield::{Ideal, QuadField};

pub const DEFAULT_SEARCH_BOUND: u64 = 10_000;

/// A positive definite form a x^2 + b x y + c y^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BQForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl BQForm {
    pub fn disc(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_reduced(&self) -> bool {
        self.b.abs() <= self.a && self.a <= self.c && (self.b >= 0 || (self.b.abs() != self.a && self.a != self.c))
    }

    pub fn reduce(self) -> BQForm {
        let d = self.disc();
        let (mut a, mut b, mut c) = (self.a, self.b, self.c);
        loop {
            // bring b into (-a, a]
            let two_a = 2 * a;
            let mut nb = b.rem_euclid(two_a);
            if nb > a {
                nb -= two_a;
            }
            if nb != b {
                b = nb;
                c = (b * b - d) / (4 * a);
            }
            if a > c {
                (a, b, c) = (c, -b, a);
                continue;
            }
            break;
        }
        if b < 0 && (a == c || -b == a) {
            b = -b;
        }
        BQForm { a, b, c }
    }
}

impl fmt::Display for BQForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// Exponent vector with respect to the generators of a class group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IdealClass(pub Vec<u64>);

#[derive(Debug, Clone)]
pub struct ClassGroup {
    field: QuadField,
    forms: Vec<BQForm>,
    index: HashMap<BQForm, usize>,
    table: Vec<Vec<usize>>,
    identity: usize,
    divisors: Vec<u64>,
    generators: Vec<usize>,
    coords: Vec<IdealClass>,
    by_coords: HashMap<IdealClass, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenusData {
    pub squares: Vec<IdealClass>,
    pub two_torsion: Vec<IdealClass>,
    /// Cosets of the squares, the trivial coset first.
    pub genus_classes: Vec<Vec<IdealClass>>,
    pub r2: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGroupRepr {
    pub h: u64,
    pub elementary_divisors: Vec<u64>,
    pub generators: Vec<[i64; 3]>,
}

/// All reduced forms of discriminant d < 0, ordered by (a, b).
pub fn reduced_forms(d: i64) -> Vec<BQForm> {
    let mut out = Vec::new();
    let amax = arith::isqrt((-d) as u64 / 3) as i64;
    for a in 1..=amax {
        for b in -a + 1..=a {
            if (b - d).rem_euclid(2) != 0 {
                continue;
            }
            let num = b * b - d;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            let f = BQForm { a, b, c };
            if f.is_reduced() && arith::gcd(arith::gcd(a, b), c) == 1 {
                out.push(f);
            }
        }
    }
    out.sort_by_key(|f| (f.a, f.b));
    out
}

impl ClassGroup {
    /// The class group with generators chosen as the first forms in (a, b)
    /// order that split off a cyclic factor of the required order.
    pub fn new(field: &QuadField) -> Result<Self> {
        Self::build(field, None)
    }

    /// The class group with the given generator forms, one per elementary
    /// divisor in increasing order.
    pub fn with_generators(field: &QuadField, generators: &[BQForm]) -> Result<Self> {
        Self::build(field, Some(generators))
    }

    fn build(field: &QuadField, pinned: Option<&[BQForm]>) -> Result<Self> {
        let d = field.disc();
        let forms = reduced_forms(d);
        let h = forms.len();
        let index: HashMap<BQForm, usize> = forms.iter().enumerate().map(|(i, f)| (*f, i)).collect();
        let mut cg = ClassGroup {
            field: field.clone(),
            forms,
            index,
            table: Vec::new(),
            identity: 0,
            divisors: Vec::new(),
            generators: Vec::new(),
            coords: Vec::new(),
            by_coords: HashMap::new(),
        };
        let ideals: Vec<Ideal> = cg.forms.iter().map(|f| cg.form_to_ideal(f)).collect();
        let mut table = vec![vec![0usize; h]; h];
        for i in 0..h {
            for j in i..h {
                let prod = field.mul(&ideals[i], &ideals[j])?;
                let k = cg.index[&cg.ideal_to_form(&prod)];
                table[i][j] = k;
                table[j][i] = k;
            }
        }
        cg.table = table;
        cg.identity = cg.index[&cg.ideal_to_form(&field.unit_ideal())];

        let divisors = cg.invariant_factors();
        let generators = match pinned {
            Some(gs) => {
                let idx: Vec<usize> = gs
                    .iter()
                    .map(|g| {
                        if g.a <= 0 || g.disc() != d {
                            return Err(invalid(format!("{g} is not a positive form of discriminant {d}")));
                        }
                        cg.index.get(&g.reduce()).copied().ok_or_else(|| invalid(format!("{g} is not primitive")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != divisors.len() {
                    return Err(invalid(format!("expected {} generators, got {}", divisors.len(), idx.len())));
                }
                let mut subgroup = vec![cg.identity];
                for (g, &dv) in idx.iter().zip(&divisors) {
                    if cg.order(*g) != dv {
                        return Err(invalid(format!(
                            "generator {} has order {}, expected {dv}",
                            cg.forms[*g],
                            cg.order(*g)
                        )));
                    }
                    subgroup = cg.extend_subgroup(&subgroup, *g);
                }
                if subgroup.len() != h {
                    return Err(invalid("pinned generators do not generate the class group"));
                }
                idx
            }
            None => {
                let mut desc = divisors.clone();
                desc.reverse();
                let mut chosen = Vec::new();
                if !cg.search_generators(&desc, &mut chosen, &[cg.identity]) {
                    return Err(Error::Consistency("no generating set found".into()));
                }
                chosen.reverse();
                chosen
            }
        };
        cg.divisors = divisors;
        cg.generators = generators;

        let mut coords = vec![IdealClass(Vec::new()); h];
        let mut by_coords = HashMap::new();
        for e in cg.all_exponent_vectors() {
            let mut x = cg.identity;
            for (g, k) in cg.generators.iter().zip(&e) {
                x = cg.table[x][cg.pow_index(*g, *k)];
            }
            coords[x] = IdealClass(e.clone());
            by_coords.insert(IdealClass(e), x);
        }
        if by_coords.len() != h {
            return Err(Error::Consistency("generators do not give a bijection".into()));
        }
        cg.coords = coords;
        cg.by_coords = by_coords;
        Ok(cg)
    }

    fn search_generators(&self, desc: &[u64], chosen: &mut Vec<usize>, subgroup: &[usize]) -> bool {
        if chosen.len() == desc.len() {
            return subgroup.len() == self.h() as usize;
        }
        let target = desc[chosen.len()];
        for x in 0..self.forms.len() {
            if self.order(x) != target {
                continue;
            }
            let ext = self.extend_subgroup(subgroup, x);
            if ext.len() as u64 != subgroup.len() as u64 * target {
                continue;
            }
            chosen.push(x);
            if self.search_generators(desc, chosen, &ext) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    fn extend_subgroup(&self, subgroup: &[usize], g: usize) -> Vec<usize> {
        let mut seen = vec![false; self.forms.len()];
        let mut out = Vec::new();
        let mut power = self.identity;
        loop {
            for &s in subgroup {
                let y = self.table[s][power];
                if !seen[y] {
                    seen[y] = true;
                    out.push(y);
                }
            }
            power = self.table[power][g];
            if power == self.identity {
                break;
            }
        }
        out
    }

    fn order(&self, x: usize) -> u64 {
        let mut k = 1;
        let mut y = x;
        while y != self.identity {
            y = self.table[y][x];
            k += 1;
        }
        k
    }

    fn pow_index(&self, x: usize, e: u64) -> usize {
        let mut y = self.identity;
        for _ in 0..e {
            y = self.table[y][x];
        }
        y
    }

    fn invariant_factors(&self) -> Vec<u64> {
        let h = self.forms.len() as u64;
        let mut per_prime: Vec<(u64, Vec<u32>)> = Vec::new();
        for (p, _) in arith::factor(h) {
            // rank_k = #{i : e_i >= k} from the sizes of the p^k-torsion.
            let mut ranks = Vec::new();
            let mut prev = 0u32;
            let mut k = 1u32;
            loop {
                let pk = p.pow(k);
                let count = (0..self.forms.len()).filter(|&x| self.pow_index(x, pk) == self.identity).count() as u64;
                let mut lg = 0u32;
                let mut c = count;
                while c.is_multiple_of(p) && c > 1 {
                    c /= p;
                    lg += 1;
                }
                let delta = lg - prev;
                if delta == 0 {
                    break;
                }
                ranks.push(delta);
                prev = lg;
                k += 1;
            }
            // exponents e_1 >= e_2 >= ... read off the conjugate partition
            let r = ranks[0] as usize;
            let exps: Vec<u32> = (0..r).map(|i| ranks.iter().filter(|&&rk| rk as usize > i).count() as u32).collect();
            per_prime.push((p, exps));
        }
        let len = per_prime.iter().map(|(_, e)| e.len()).max().unwrap_or(0);
        let mut desc = vec![1u64; len];
        for (p, exps) in &per_prime {
            for (i, e) in exps.iter().enumerate() {
                desc[i] *= p.pow(*e);
            }
        }
        desc.reverse();
        desc
    }

    fn all_exponent_vectors(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new()];
        for &d in &self.divisors {
            let mut next = Vec::new();
            for v in &out {
                for k in 0..d {
                    let mut w = v.clone();
                    w.push(k);
                    next.push(w);
                }
            }
            out = next;
        }
        out
    }

    // ----- ideal / form correspondence -----

    /// The reduced form attached to the class of an ideal.
    pub fn ideal_to_form(&self, i: &Ideal) -> BQForm {
        let (t, n) = self.field.omega_poly();
        let a = i.a / i.c;
        let b = i.b / i.c;
        BQForm { a, b: -(2 * b + t), c: (b * b + t * b + n) / a }.reduce()
    }

    /// The primitive ideal [a, (-b + sqrt(disc))/2] of a form.
    pub fn form_to_ideal(&self, f: &BQForm) -> Ideal {
        let (t, _) = self.field.omega_poly();
        let bb = ((-f.b - t) / 2).rem_euclid(f.a);
        self.field.ideal_from_hnf(f.a, bb, 1).expect("form gives an ideal")
    }

    // ----- group structure -----

    pub fn field(&self) -> &QuadField {
        &self.field
    }

    pub fn h(&self) -> u64 {
        self.forms.len() as u64
    }

    pub fn forms(&self) -> &[BQForm] {
        &self.forms
    }

    pub fn elementary_divisors(&self) -> &[u64] {
        &self.divisors
    }

    pub fn generator_forms(&self) -> Vec<BQForm> {
        self.generators.iter().map(|&g| self.forms[g]).collect()
    }

    pub fn structure_string(&self) -> String {
        if self.divisors.is_empty() {
            "C1".into()
        } else {
            self.divisors.iter().map(|d| format!("C{d}")).collect::<Vec<_>>().join("x")
        }
    }

    pub fn identity(&self) -> IdealClass {
        IdealClass(vec![0; self.divisors.len()])
    }

    pub fn is_identity(&self, c: &IdealClass) -> bool {
        c.0.iter().all(|&e| e == 0)
    }

    pub fn compose(&self, x: &IdealClass, y: &IdealClass) -> IdealClass {
        IdealClass(x.0.iter().zip(&y.0).zip(&self.divisors).map(|((a, b), d)| (a + b) % d).collect())
    }

    pub fn inverse(&self, x: &IdealClass) -> IdealClass {
        IdealClass(x.0.iter().zip(&self.divisors).map(|(a, d)| (d - a) % d).collect())
    }

    pub fn power(&self, x: &IdealClass, k: i64) -> IdealClass {
        IdealClass(
            x.0.iter()
                .zip(&self.divisors)
                .map(|(a, d)| ((*a as i128 * k as i128).rem_euclid(*d as i128)) as u64)
                .collect(),
        )
    }

    pub fn class_order(&self, x: &IdealClass) -> u64 {
        self.order(self.by_coords[x])
    }

    /// All classes, in lexicographic order of exponent vectors.
    pub fn elements(&self) -> Vec<IdealClass> {
        self.all_exponent_vectors().into_iter().map(IdealClass).collect()
    }

    pub fn class_of(&self, i: &Ideal) -> IdealClass {
        let f = self.ideal_to_form(i);
        self.coords[self.index[&f]].clone()
    }

    pub fn class_form(&self, x: &IdealClass) -> BQForm {
        self.forms[self.by_coords[x]]
    }

    pub fn is_principal(&self, i: &Ideal) -> bool {
        self.is_identity(&self.class_of(i))
    }

    pub fn class_label(&self, x: &IdealClass) -> String {
        if self.is_identity(x) {
            return "1".into();
        }
        let parts: Vec<String> =
            x.0.iter()
                .enumerate()
                .filter(|(_, e)| **e != 0)
                .map(|(i, e)| {
                    let g = if self.divisors.len() == 1 { "c".to_string() } else { format!("c{}", i + 1) };
                    if *e == 1 {
                        g
                    } else {
                        format!("{g}^{e}")
                    }
                })
                .collect();
        parts.join("*")
    }

    // ----- genus theory -----

    /// Genus vector: exponents mod 2 at the even elementary divisors.
    pub fn genus_vector(&self, x: &IdealClass) -> Vec<u64> {
        x.0.iter().zip(&self.divisors).filter(|(_, d)| *d % 2 == 0).map(|(e, _)| e % 2).collect()
    }

    pub fn is_square(&self, x: &IdealClass) -> bool {
        self.genus_vector(x).iter().all(|&e| e == 0)
    }

    /// A class y with y^2 = x, when x is a square.
    pub fn square_root(&self, x: &IdealClass) -> Option<IdealClass> {
        self.elements().into_iter().find(|y| self.compose(y, y) == *x)
    }

    pub fn rank2(&self) -> u32 {
        self.divisors.iter().filter(|d| *d % 2 == 0).count() as u32
    }

    pub fn genus_data(&self) -> Result<GenusData> {
        let elements = self.elements();
        let mut squares: Vec<IdealClass> = elements.iter().map(|x| self.compose(x, x)).collect();
        squares.sort();
        squares.dedup();
        let two_torsion: Vec<IdealClass> =
            elements.iter().filter(|x| self.is_identity(&self.compose(x, x))).cloned().collect();
        let mut cosets: Vec<(Vec<u64>, Vec<IdealClass>)> = Vec::new();
        for x in &elements {
            let g = self.genus_vector(x);
            match cosets.iter_mut().find(|(v, _)| *v == g) {
                Some((_, list)) => list.push(x.clone()),
                None => cosets.push((g, vec![x.clone()])),
            }
        }
        let r2 = self.rank2();
        let expected = arith::factor(self.field.disc().unsigned_abs()).len() as u32 - 1;
        if r2 != expected {
            return Err(Error::Consistency(format!(
                "2-rank {r2} disagrees with genus theory ({expected}) for discriminant {}",
                self.field.disc()
            )));
        }
        if cosets.len() as u64 != 1u64 << r2 || two_torsion.len() != cosets.len() {
            return Err(Error::Consistency("genus group size mismatch".into()));
        }
        Ok(GenusData { squares, two_torsion, genus_classes: cosets.into_iter().map(|(_, l)| l).collect(), r2 })
    }

    // ----- auxiliary ideals -----

    /// The first ideal (by norm, then label) coprime to `coprime_to` whose
    /// class satisfies `pred`. With `prefer_prime`, prime ideals are searched
    /// first and other ideals only if no prime is found below the bound.
    pub fn find_ideal_where(
        &self,
        pred: impl Fn(&IdealClass) -> bool,
        coprime_to: &Ideal,
        prefer_prime: bool,
        bound: u64,
    ) -> Result<Ideal> {
        let k = &self.field;
        if prefer_prime {
            for n in 2..=bound {
                let f = arith::factor(n);
                if f.len() != 1 || f[0].1 > 2 {
                    continue;
                }
                let p = f[0].0;
                for q in k.factor_rational_prime(p)?.primes() {
                    if q.norm() == n && k.is_coprime(&q, coprime_to) && pred(&self.class_of(&q)) {
                        return Ok(q);
                    }
                }
            }
        }
        for n in 1..=bound {
            for i in k.ideals_of_norm(n) {
                if k.is_coprime(&i, coprime_to) && pred(&self.class_of(&i)) {
                    return Ok(i);
                }
            }
        }
        Err(Error::SearchExhausted(bound, "no ideal in the requested class".into()))
    }

    pub fn find_ideal_in_class(
        &self,
        target: &IdealClass,
        coprime_to: &Ideal,
        prefer_prime: bool,
        bound: u64,
    ) -> Result<Ideal> {
        self.find_ideal_where(|c| c == target, coprime_to, prefer_prime, bound)
    }

    pub fn to_repr(&self) -> ClassGroupRepr {
        ClassGroupRepr {
            h: self.h(),
            elementary_divisors: self.divisors.clone(),
            generators: self.generator_forms().iter().map(|f| [f.a, f.b, f.c]).collect(),
        }
    }

    /// Rebuilds the group from a pinned description and checks it matches.
    pub fn from_repr(field: &QuadField, repr: &ClassGroupRepr) -> Result<Self> {
        let gens: Vec<BQForm> = repr.generators.iter().map(|g| BQForm { a: g[0], b: g[1], c: g[2] }).collect();
        let cg = Self::with_generators(field, &gens)?;
        if cg.h() != repr.h || cg.divisors != repr.elementary_divisors {
            return Err(Error::Schema(format!(
                "class group pin h={} {:?} does not match computed h={} {:?}",
                repr.h,
                repr.elementary_divisors,
                cg.h(),
                cg.divisors
            )));
        }
        Ok(cg)
    }
}
