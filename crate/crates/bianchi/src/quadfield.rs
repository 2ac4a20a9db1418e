//! Imaginary quadratic fields K = Q(sqrt(-d)), their integral ideals in
//! Hermite normal form, factorization and LMFDB-style labels.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{invalid, Error, Result};

/// Which generator of the ring of integers is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Omega {
    /// omega = sqrt(-d), used when -d = 2, 3 mod 4.
    SqrtMinusD,
    /// omega = (1 + sqrt(-d)) / 2, used when -d = 1 mod 4.
    HalfInteger,
}

/// How ideals of equal norm are numbered when no override is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelOrder {
    /// Lexicographic on the HNF triple (a, c, b).
    #[default]
    Hnf,
    /// Primes by HNF (or override); composite ideals by their exponent
    /// vectors over those primes, largest first, so p.1^2 < p.1 p.2 < p.2^2.
    Factored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadField {
    d: u64,
    disc: i64,
    omega: Omega,
    order: LabelOrder,
    overrides: BTreeMap<u64, Vec<[i64; 3]>>,
}

/// An integral ideal with Z-basis {a, b + c*omega}, where c | a, c | b and
/// 0 <= b < a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ideal {
    pub disc: i64,
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Ideal {
    pub fn norm(&self) -> u64 {
        (self.a * self.c) as u64
    }

    pub fn is_unit(&self) -> bool {
        self.a == 1 && self.c == 1
    }

    pub fn hnf(&self) -> [i64; 3] {
        [self.a, self.b, self.c]
    }
}

impl Ord for Ideal {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.disc, self.norm(), self.a, self.c, self.b).cmp(&(other.disc, other.norm(), other.a, other.c, other.b))
    }
}

impl PartialOrd for Ideal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ideal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}+{}w]", self.a, self.b, self.c)
    }
}

/// An element x + y*omega with rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement {
    pub x: BigRational,
    pub y: BigRational,
}

impl FieldElement {
    pub fn from_ints(x: i64, y: i64) -> Self {
        FieldElement { x: BigRational::from_integer(BigInt::from(x)), y: BigRational::from_integer(BigInt::from(y)) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Splitting {
    Split(Ideal, Ideal),
    Inert(Ideal),
    Ramified(Ideal),
}

impl Splitting {
    pub fn primes(&self) -> Vec<Ideal> {
        match self {
            Splitting::Split(p, q) => vec![*p, *q],
            Splitting::Inert(p) | Splitting::Ramified(p) => vec![*p],
        }
    }
}

/// Prime-power factorization of an ideal, primes in label order.
pub type Factorization = Vec<(Ideal, u32)>;

/// Lattice reduction of integer vectors (x, y) in the basis (1, omega) to
/// the triple (a, b, c).
fn hnf_of(vectors: &[(i128, i128)]) -> Option<(i64, i64, i64)> {
    let mut pivot: (i128, i128) = (0, 0);
    let mut a: i128 = 0;
    for &(vx, vy) in vectors {
        if vy == 0 {
            a = gcd_i128(a, vx);
        } else if pivot.1 == 0 {
            pivot = (vx, vy);
        } else {
            let (g, s, t) = egcd(pivot.1, vy);
            let zero_x = (vy / g) * pivot.0 - (pivot.1 / g) * vx;
            pivot = (s * pivot.0 + t * vx, g);
            a = gcd_i128(a, zero_x);
        }
        if a != 0 {
            pivot.0 = pivot.0.rem_euclid(a);
        }
    }
    if pivot.1 < 0 {
        pivot = (-pivot.0, -pivot.1);
    }
    if a == 0 || pivot.1 == 0 {
        return None;
    }
    Some((a as i64, pivot.0.rem_euclid(a) as i64, pivot.1 as i64))
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

impl QuadField {
    /// K = Q(sqrt(-d)) for squarefree d >= 1.
    pub fn new(d: i64) -> Result<Self> {
        if d < 1 {
            return Err(invalid(format!("d must be positive, got {d}")));
        }
        if !arith::is_squarefree(d as u64) {
            return Err(invalid(format!("d must be squarefree, got {d}")));
        }
        let (disc, omega) =
            if (-d).rem_euclid(4) == 1 { (-d, Omega::HalfInteger) } else { (-4 * d, Omega::SqrtMinusD) };
        let mut field = QuadField { d: d as u64, disc, omega, order: LabelOrder::Hnf, overrides: BTreeMap::new() };
        if disc == -68 {
            field.order = LabelOrder::Factored;
        }
        for (norm, order) in default_overrides(disc) {
            field.set_label_override(norm, order)?;
        }
        Ok(field)
    }

    /// The field with the given fundamental discriminant.
    pub fn from_disc(disc: i64) -> Result<Self> {
        let d = if disc % 4 == 0 { -disc / 4 } else { -disc };
        let field = QuadField::new(d)?;
        if field.disc != disc {
            return Err(invalid(format!("{disc} is not a fundamental discriminant")));
        }
        Ok(field)
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn omega(&self) -> Omega {
        self.omega
    }

    /// omega satisfies x^2 - t x + n = 0; returns (t, n).
    pub fn omega_poly(&self) -> (i64, i64) {
        match self.omega {
            Omega::SqrtMinusD => (0, self.d as i64),
            Omega::HalfInteger => (1, (1 + self.d as i64) / 4),
        }
    }

    /// Replace the ordering of the ideals of a given norm.
    pub fn set_label_override(&mut self, norm: u64, order: Vec<[i64; 3]>) -> Result<()> {
        let mut expect: Vec<[i64; 3]> = self.ideals_of_norm_default(norm).iter().map(|i| i.hnf()).collect();
        let mut given = order.clone();
        expect.sort();
        given.sort();
        if expect != given {
            return Err(invalid(format!(
                "label override for norm {norm} is not a permutation of the ideals of that norm"
            )));
        }
        self.overrides.insert(norm, order);
        Ok(())
    }

    pub fn label_overrides(&self) -> &BTreeMap<u64, Vec<[i64; 3]>> {
        &self.overrides
    }

    pub fn set_label_order(&mut self, order: LabelOrder) {
        self.order = order;
    }

    pub fn label_order(&self) -> LabelOrder {
        self.order
    }

    // ----- elements -----

    pub fn elt_mul(&self, u: &FieldElement, v: &FieldElement) -> FieldElement {
        let (t, n) = self.omega_poly();
        let t = BigRational::from_integer(t.into());
        let n = BigRational::from_integer(n.into());
        let yy = &u.y * &v.y;
        FieldElement { x: &u.x * &v.x - &n * &yy, y: &u.x * &v.y + &v.x * &u.y + &t * &yy }
    }

    pub fn elt_norm(&self, u: &FieldElement) -> BigRational {
        let (t, n) = self.omega_poly();
        let t = BigRational::from_integer(t.into());
        let n = BigRational::from_integer(n.into());
        &u.x * &u.x + t * &u.x * &u.y + n * &u.y * &u.y
    }

    pub fn elt_conj(&self, u: &FieldElement) -> FieldElement {
        let (t, _) = self.omega_poly();
        let t = BigRational::from_integer(t.into());
        FieldElement { x: &u.x + t * &u.y, y: -u.y.clone() }
    }

    fn int_mul(&self, u: (i128, i128), v: (i128, i128)) -> (i128, i128) {
        let (t, n) = self.omega_poly();
        let (t, n) = (t as i128, n as i128);
        (u.0 * v.0 - n * u.1 * v.1, u.0 * v.1 + u.1 * v.0 + t * u.1 * v.1)
    }

    // ----- ideals -----

    pub fn unit_ideal(&self) -> Ideal {
        Ideal { disc: self.disc, a: 1, b: 0, c: 1 }
    }

    fn check(&self, i: &Ideal) -> Result<()> {
        if i.disc != self.disc {
            Err(Error::FieldMismatch(self.disc, i.disc))
        } else {
            Ok(())
        }
    }

    /// Validates an HNF triple and returns the ideal.
    pub fn ideal_from_hnf(&self, a: i64, b: i64, c: i64) -> Result<Ideal> {
        if a <= 0 || c <= 0 || b < 0 || b >= a || a % c != 0 || b % c != 0 {
            return Err(invalid(format!("[{a},{b},{c}] is not in Hermite normal form")));
        }
        let (ap, bp) = (a / c, b / c);
        let (t, n) = self.omega_poly();
        if (bp * bp + t * bp + n) % ap != 0 {
            return Err(invalid(format!("[{a},{b},{c}] is not closed under multiplication by omega")));
        }
        Ok(Ideal { disc: self.disc, a, b, c })
    }

    /// The ideal generated by the given elements x + y*omega.
    pub fn ideal_from_gens(&self, gens: &[(i64, i64)]) -> Result<Ideal> {
        let mut vecs = Vec::new();
        for &(x, y) in gens {
            let g = (x as i128, y as i128);
            vecs.push(g);
            vecs.push(self.int_mul(g, (0, 1)));
        }
        let (a, b, c) = hnf_of(&vecs).ok_or_else(|| invalid("generators span the zero ideal"))?;
        Ok(Ideal { disc: self.disc, a, b, c })
    }

    pub fn principal(&self, x: i64, y: i64) -> Result<Ideal> {
        self.ideal_from_gens(&[(x, y)])
    }

    pub fn rational(&self, n: i64) -> Ideal {
        let n = n.abs();
        Ideal { disc: self.disc, a: n, b: 0, c: n }
    }

    fn basis(i: &Ideal) -> [(i128, i128); 2] {
        [(i.a as i128, 0), (i.b as i128, i.c as i128)]
    }

    pub fn mul(&self, i: &Ideal, j: &Ideal) -> Result<Ideal> {
        self.check(i)?;
        self.check(j)?;
        let mut vecs = Vec::with_capacity(4);
        for u in Self::basis(i) {
            for v in Self::basis(j) {
                vecs.push(self.int_mul(u, v));
            }
        }
        let (a, b, c) = hnf_of(&vecs).expect("product of nonzero ideals is nonzero");
        Ok(Ideal { disc: self.disc, a, b, c })
    }

    pub fn pow(&self, i: &Ideal, e: u32) -> Ideal {
        let mut acc = self.unit_ideal();
        for _ in 0..e {
            acc = self.mul(&acc, i).expect("same field");
        }
        acc
    }

    pub fn product<'a>(&self, parts: impl IntoIterator<Item = &'a (Ideal, u32)>) -> Ideal {
        parts.into_iter().fold(self.unit_ideal(), |acc, (p, e)| self.mul(&acc, &self.pow(p, *e)).expect("same field"))
    }

    /// The sum I + J (the gcd of the two ideals).
    pub fn add(&self, i: &Ideal, j: &Ideal) -> Result<Ideal> {
        self.check(i)?;
        self.check(j)?;
        let mut vecs = Self::basis(i).to_vec();
        vecs.extend(Self::basis(j));
        let (a, b, c) = hnf_of(&vecs).expect("sum of nonzero ideals is nonzero");
        Ok(Ideal { disc: self.disc, a, b, c })
    }

    pub fn contains(&self, i: &Ideal, x: i64, y: i64) -> bool {
        y % i.c == 0 && (x - (y / i.c) * i.b) % i.a == 0
    }

    /// True when `d` divides `n`, i.e. n is contained in d.
    pub fn divides(&self, d: &Ideal, n: &Ideal) -> bool {
        self.contains(d, n.a, 0) && self.contains(d, n.b, n.c)
    }

    pub fn is_coprime(&self, i: &Ideal, j: &Ideal) -> bool {
        self.add(i, j).map(|s| s.is_unit()).unwrap_or(false)
    }

    pub fn conjugate(&self, i: &Ideal) -> Ideal {
        let (t, _) = self.omega_poly();
        let vecs = [(i.a as i128, 0), ((i.b + i.c * t) as i128, -(i.c as i128))];
        let (a, b, c) = hnf_of(&vecs).expect("conjugate of a nonzero ideal");
        Ideal { disc: self.disc, a, b, c }
    }

    // ----- enumeration and labels -----

    fn ideals_of_norm_default(&self, norm: u64) -> Vec<Ideal> {
        let (t, n) = self.omega_poly();
        let mut out = Vec::new();
        let mut c = 1u64;
        while c * c <= norm {
            if norm.is_multiple_of(c * c) {
                let ap = (norm / (c * c)) as i64;
                for bp in 0..ap {
                    if (bp * bp + t * bp + n).rem_euclid(ap) == 0 {
                        let c = c as i64;
                        out.push(Ideal { disc: self.disc, a: ap * c, b: bp * c, c });
                    }
                }
            }
            c += 1;
        }
        out.sort_by_key(|i| (i.a, i.c, i.b));
        out
    }

    /// All ideals of norm N in label order.
    pub fn ideals_of_norm(&self, norm: u64) -> Vec<Ideal> {
        match self.overrides.get(&norm) {
            Some(order) => order.iter().map(|&[a, b, c]| Ideal { disc: self.disc, a, b, c }).collect(),
            None => {
                let list = self.ideals_of_norm_default(norm);
                if self.order == LabelOrder::Hnf || list.len() < 2 || arith::is_prime(norm) {
                    return list;
                }
                let mut primes: Vec<Ideal> = arith::factor(norm)
                    .into_iter()
                    .flat_map(|(p, _)| self.factor_rational_prime(p).expect("p is prime").primes())
                    .collect();
                primes.sort_by_key(|q| self.label_key(q));
                let mut keyed: Vec<(Vec<u32>, Ideal)> = list
                    .into_iter()
                    .map(|i| {
                        let v = primes
                            .iter()
                            .map(|q| {
                                let mut e = 0;
                                let mut qe = *q;
                                while self.divides(&qe, &i) {
                                    e += 1;
                                    qe = self.mul(&qe, q).expect("same field");
                                }
                                e
                            })
                            .collect();
                        (v, i)
                    })
                    .collect();
                keyed.sort_by(|x, y| y.0.cmp(&x.0));
                keyed.into_iter().map(|(_, i)| i).collect()
            }
        }
    }

    pub fn label_index(&self, i: &Ideal) -> usize {
        self.ideals_of_norm(i.norm()).iter().position(|j| j == i).expect("ideal appears among the ideals of its norm")
            + 1
    }

    pub fn label(&self, i: &Ideal) -> String {
        format!("{}.{}", i.norm(), self.label_index(i))
    }

    pub fn ideal_from_label(&self, label: &str) -> Result<Ideal> {
        let (n, k) = label.split_once('.').ok_or_else(|| invalid(format!("bad ideal label '{label}'")))?;
        let n: u64 = n.trim().parse().map_err(|_| invalid(format!("bad ideal label '{label}'")))?;
        let k: usize = k.trim().parse().map_err(|_| invalid(format!("bad ideal label '{label}'")))?;
        let list = self.ideals_of_norm(n);
        if k == 0 || k > list.len() {
            return Err(invalid(format!("no ideal with label '{label}'")));
        }
        Ok(list[k - 1])
    }

    /// Parses products of labels such as "3.1*3.2" or "3.1^2"; "1" is the unit ideal.
    pub fn ideal_from_expr(&self, expr: &str) -> Result<Ideal> {
        let mut acc = self.unit_ideal();
        for term in expr.split('*') {
            let term = term.trim();
            if term == "1" {
                continue;
            }
            let (base, e) = match term.split_once('^') {
                Some((b, e)) => {
                    let e: u32 = e.trim().parse().map_err(|_| invalid(format!("bad exponent in '{expr}'")))?;
                    (b.trim(), e)
                }
                None => (term, 1),
            };
            acc = self.mul(&acc, &self.pow(&self.ideal_from_label(base)?, e))?;
        }
        Ok(acc)
    }

    /// Sort key placing ideals in norm order, ties broken by label index.
    pub fn label_key(&self, i: &Ideal) -> (u64, usize) {
        (i.norm(), self.label_index(i))
    }

    // ----- primes and factorization -----

    pub fn factor_rational_prime(&self, p: u64) -> Result<Splitting> {
        if !arith::is_prime(p) {
            return Err(invalid(format!("{p} is not prime")));
        }
        match arith::kronecker_prime(self.disc, p) {
            0 => {
                let ps = self.ideals_of_norm(p);
                debug_assert_eq!(ps.len(), 1);
                Ok(Splitting::Ramified(ps[0]))
            }
            1 => {
                let ps: Vec<Ideal> = self.ideals_of_norm(p).into_iter().filter(|i| i.c == 1).collect();
                debug_assert_eq!(ps.len(), 2);
                Ok(Splitting::Split(ps[0], ps[1]))
            }
            _ => Ok(Splitting::Inert(self.rational(p as i64))),
        }
    }

    pub fn is_prime_ideal(&self, i: &Ideal) -> bool {
        let n = i.norm();
        let f = arith::factor(n);
        if f.len() != 1 {
            return false;
        }
        let (p, e) = f[0];
        match self.factor_rational_prime(p) {
            Ok(Splitting::Inert(q)) => e == 2 && q == *i,
            Ok(s) => e == 1 && s.primes().contains(i),
            Err(_) => false,
        }
    }

    /// Prime ideals of norm at most `bound`, ordered by norm then label.
    pub fn primes_up_to_norm(&self, bound: u64) -> Vec<Ideal> {
        let mut out = Vec::new();
        for p in arith::primes_up_to(bound) {
            for q in self.factor_rational_prime(p).expect("p is prime").primes() {
                if q.norm() <= bound {
                    out.push(q);
                }
            }
        }
        out.sort_by_key(|q| self.label_key(q));
        out
    }

    pub fn factor_ideal(&self, n: &Ideal) -> Result<Factorization> {
        self.check(n)?;
        let mut out = Vec::new();
        for (p, _) in arith::factor(n.norm()) {
            for q in self.factor_rational_prime(p)?.primes() {
                let mut e = 0u32;
                let mut qe = q;
                while self.divides(&qe, n) {
                    e += 1;
                    qe = self.mul(&qe, &q)?;
                }
                if e > 0 {
                    out.push((q, e));
                }
            }
        }
        if self.product(&out) != *n {
            return Err(Error::Consistency(format!("factorization of {n} does not recombine")));
        }
        out.sort_by_key(|(q, _)| self.label_key(q));
        Ok(out)
    }

    /// Exact quotient n / m; fails unless m divides n.
    pub fn quotient(&self, n: &Ideal, m: &Ideal) -> Result<Ideal> {
        let fm = self.factor_ideal(m)?;
        let fnn = self.factor_ideal(n)?;
        let mut parts = Vec::new();
        for (q, e) in &fnn {
            let em = fm.iter().find(|(r, _)| r == q).map(|(_, e)| *e).unwrap_or(0);
            if em > *e {
                return Err(invalid(format!("{} does not divide {}", self.label(m), self.label(n))));
            }
            parts.push((*q, e - em));
        }
        if fm.iter().any(|(r, _)| !fnn.iter().any(|(q, _)| q == r)) {
            return Err(invalid(format!("{} does not divide {}", self.label(m), self.label(n))));
        }
        Ok(self.product(&parts))
    }

    pub fn divisors(&self, n: &Ideal) -> Result<Vec<Ideal>> {
        let f = self.factor_ideal(n)?;
        let mut out = vec![self.unit_ideal()];
        for (q, e) in &f {
            let mut next = Vec::new();
            for d in &out {
                let mut qk = self.unit_ideal();
                for _ in 0..=*e {
                    next.push(self.mul(d, &qk)?);
                    qk = self.mul(&qk, q)?;
                }
            }
            out = next;
        }
        out.sort_by_key(|d| self.label_key(d));
        Ok(out)
    }

    /// Divisors q of n with q and n/q coprime.
    pub fn exact_divisors(&self, n: &Ideal) -> Result<Vec<Ideal>> {
        let f = self.factor_ideal(n)?;
        let mut out = vec![self.unit_ideal()];
        for (q, e) in &f {
            let qe = self.pow(q, *e);
            let mut next = out.clone();
            for d in &out {
                next.push(self.mul(d, &qe)?);
            }
            out = next;
        }
        out.sort_by_key(|d| self.label_key(d));
        Ok(out)
    }

    /// The exact prime-power divisors p^e || n.
    pub fn prime_power_divisors(&self, n: &Ideal) -> Result<Vec<Ideal>> {
        Ok(self.factor_ideal(n)?.iter().map(|(q, e)| self.pow(q, *e)).collect())
    }

    pub fn sigma0(&self, n: &Ideal) -> Result<u64> {
        Ok(self.factor_ideal(n)?.iter().map(|(_, e)| *e as u64 + 1).product())
    }
}

/// Shipped label overrides. For discriminant -68 the norm-3 primes are
/// pinned so that 3.1 = <3, 4+w> and 3.2 = <3, 2+w>.
fn default_overrides(disc: i64) -> Vec<(u64, Vec<[i64; 3]>)> {
    match disc {
        -68 => vec![(3, vec![[3, 1, 1], [3, 2, 1]]), (7, vec![[7, 2, 1], [7, 5, 1]])],
        _ => Vec::new(),
    }
}

/// Serialized ideal: either an HNF triple with its norm, or two generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IdealRepr {
    Hnf { norm: u64, hnf: [i64; 3] },
    Gens { gens: Vec<[i64; 2]> },
}

impl QuadField {
    pub fn ideal_to_repr(&self, i: &Ideal) -> IdealRepr {
        IdealRepr::Hnf { norm: i.norm(), hnf: i.hnf() }
    }

    pub fn ideal_from_repr(&self, r: &IdealRepr) -> Result<Ideal> {
        match r {
            IdealRepr::Hnf { norm, hnf } => {
                let i = self.ideal_from_hnf(hnf[0], hnf[1], hnf[2])?;
                if i.norm() != *norm {
                    return Err(Error::Schema(format!("norm {norm} does not match HNF {hnf:?}")));
                }
                Ok(i)
            }
            IdealRepr::Gens { gens } => {
                let g: Vec<(i64, i64)> = gens.iter().map(|v| (v[0], v[1])).collect();
                self.ideal_from_gens(&g)
            }
        }
    }
}
