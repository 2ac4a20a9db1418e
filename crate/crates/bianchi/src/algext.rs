//! Exact arithmetic in towers k(sqrt r_1, ..., sqrt r_m) over a base field
//! k = Q(a) given by a monic integer polynomial.
//!
//! An element is a flat table of rationals indexed by `mask * deg + power`:
//! bit i of `mask` marks the factor sqrt(r_i), `power` the exponent of a.
//! Each radicand r_i lives in the tower generated by the earlier roots, so
//! the lower half of a table is the part free of the top root.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::characters::RootOfUnity;
use crate::error::{invalid, Error, Result};

type Q = BigRational;

pub const MAX_BASE_DEGREE: usize = 8;
pub const MAX_ROOTS: usize = 6;
const DENOMINATOR_BOUND: i64 = 1_000_000;

fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlgValue {
    coeffs: Vec<Q>,
}

impl AlgValue {
    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }
}

/// A field k(sqrt r_1, ..., sqrt r_m).
#[derive(Debug, Clone)]
pub struct ValueField {
    minpoly: Vec<i64>,
    radicands: Vec<Vec<Q>>,
    names: Vec<String>,
    base_name: String,
    theta_ref: Complex64,
    root_refs: Vec<Complex64>,
}

impl PartialEq for ValueField {
    fn eq(&self, other: &Self) -> bool {
        self.minpoly == other.minpoly && self.radicands == other.radicands
    }
}

impl Eq for ValueField {}

/// A homomorphism between towers, given by the images of a and of each root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMap {
    pub theta_image: AlgValue,
    pub root_images: Vec<AlgValue>,
}

// ----- numeric helpers -----

fn poly_roots(minpoly: &[i64]) -> Vec<Complex64> {
    let d = minpoly.len() - 1;
    if d == 1 {
        return vec![Complex64::new(-minpoly[0] as f64, 0.0)];
    }
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        m[(i, d - 1)] = -minpoly[i] as f64;
    }
    let mut roots: Vec<Complex64> = m.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
    for r in roots.iter_mut() {
        for _ in 0..50 {
            let (mut f, mut df) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &c in minpoly.iter().rev() {
                df = df * *r + f;
                f = f * *r + c as f64;
            }
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            *r -= step;
            if step.norm() < 1e-15 * (1.0 + r.norm()) {
                break;
            }
        }
        if r.im.abs() < 1e-10 {
            r.im = 0.0;
        }
    }
    roots
}

fn reference_root(roots: &[Complex64]) -> Complex64 {
    let mut real: Vec<f64> = roots.iter().filter(|z| z.im == 0.0).map(|z| z.re).collect();
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if let Some(x) = real.first() {
        return Complex64::new(*x, 0.0);
    }
    let mut upper: Vec<Complex64> = roots.iter().filter(|z| z.im > 0.0).copied().collect();
    upper.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    upper[0]
}

fn is_positive(z: Complex64) -> bool {
    let tol = 1e-9 * (1.0 + z.norm());
    z.re > tol || (z.re.abs() <= tol && z.im > 0.0)
}

fn canonical_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if is_positive(s) {
        s
    } else {
        -s
    }
}

/// Best rational approximation with bounded denominator, if close enough.
fn rationalize(x: f64, tol: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > DENOMINATOR_BOUND as i128 {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol {
            return Some(Q::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn rational_sqrt(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer();
    let d = x.denom();
    let sn = n.sqrt();
    let sd = d.sqrt();
    (&sn * &sn == *n && &sd * &sd == *d).then(|| Q::new(sn, sd))
}

/// Writes x = s^2 * f with f an integer free of small square factors.
fn square_part(x: &Q) -> (Q, BigInt) {
    let mut f: BigInt = x.numer() * x.denom();
    let mut s = Q::new(BigInt::one(), x.denom().clone());
    let mut p = BigInt::from(2);
    while &p * &p <= f.abs() && p < BigInt::from(10_000) {
        let pp = &p * &p;
        while (&f % &pp).is_zero() {
            f /= &pp;
            s *= Q::from_integer(p.clone());
        }
        p += 1;
    }
    let r = f.abs().sqrt();
    if &r * &r == f.abs() && !r.is_zero() {
        s *= Q::from_integer(r.clone());
        f = if f.is_negative() { -BigInt::one() } else { BigInt::one() };
    }
    (s, f)
}

fn is_irreducible(minpoly: &[i64]) -> bool {
    let d = minpoly.len() - 1;
    if d == 1 {
        return true;
    }
    let roots = poly_roots(minpoly);
    for mask in 1u32..(1 << d) - 1 {
        let k = mask.count_ones() as usize;
        if k > d / 2 {
            continue;
        }
        let mut f = vec![Complex64::new(1.0, 0.0)];
        for (i, r) in roots.iter().enumerate() {
            if mask & (1 << i) != 0 {
                let mut g = vec![Complex64::new(0.0, 0.0); f.len() + 1];
                for (j, c) in f.iter().enumerate() {
                    g[j + 1] += *c;
                    g[j] -= *c * *r;
                }
                f = g;
            }
        }
        let near_int = f.iter().all(|c| c.im.abs() < 1e-6 && (c.re - c.re.round()).abs() < 1e-6);
        if !near_int {
            continue;
        }
        let g: Vec<i64> = f.iter().map(|c| c.re.round() as i64).collect();
        if divides_exactly(&g, minpoly) {
            return false;
        }
    }
    true
}

fn divides_exactly(g: &[i64], f: &[i64]) -> bool {
    let mut rem: Vec<i128> = f.iter().map(|&c| c as i128).collect();
    let dg = g.len() - 1;
    let lead = *g.last().unwrap() as i128;
    for top in (dg..rem.len()).rev() {
        if rem[top] % lead != 0 {
            return false;
        }
        let c = rem[top] / lead;
        for (j, gj) in g.iter().enumerate() {
            rem[top - dg + j] -= c * *gj as i128;
        }
    }
    rem.iter().all(|c| *c == 0)
}

impl ValueField {
    /// The rationals.
    pub fn rational() -> Self {
        Self::new(vec![0, 1]).expect("x is irreducible")
    }

    /// Q(a) with a a root of the monic polynomial given by its coefficients,
    /// constant term first.
    pub fn new(minpoly: Vec<i64>) -> Result<Self> {
        let d = minpoly.len().saturating_sub(1);
        if d == 0 || d > MAX_BASE_DEGREE || minpoly[d] != 1 {
            return Err(invalid(format!("base polynomial {minpoly:?} must be monic of degree 1..={MAX_BASE_DEGREE}")));
        }
        if !is_irreducible(&minpoly) {
            return Err(invalid(format!("base polynomial {minpoly:?} is reducible")));
        }
        let theta_ref = reference_root(&poly_roots(&minpoly));
        Ok(ValueField {
            minpoly,
            radicands: Vec::new(),
            names: Vec::new(),
            base_name: "a".into(),
            theta_ref,
            root_refs: Vec::new(),
        })
    }

    pub fn minpoly(&self) -> &[i64] {
        &self.minpoly
    }

    pub fn base_degree(&self) -> usize {
        self.minpoly.len() - 1
    }

    pub fn num_roots(&self) -> usize {
        self.radicands.len()
    }

    pub fn degree(&self) -> usize {
        self.base_degree() << self.num_roots()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn radicand(&self, i: usize) -> AlgValue {
        self.lift(&AlgValue { coeffs: self.radicands[i].clone() })
    }

    /// The same base field without adjoined roots.
    pub fn base_field(&self) -> ValueField {
        ValueField { radicands: Vec::new(), names: Vec::new(), root_refs: Vec::new(), ..self.clone() }
    }

    /// True when `self` is `other` with zero or more further roots on top.
    pub fn extends(&self, other: &ValueField) -> bool {
        self.minpoly == other.minpoly
            && other.radicands.len() <= self.radicands.len()
            && self.radicands.iter().zip(&other.radicands).all(|(a, b)| a == b)
    }

    fn len_at(&self, level: usize) -> usize {
        self.base_degree() << level
    }

    // ----- constructors -----

    pub fn zero(&self) -> AlgValue {
        AlgValue { coeffs: vec![Q::zero(); self.degree()] }
    }

    pub fn from_rational(&self, x: Q) -> AlgValue {
        let mut v = self.zero();
        v.coeffs[0] = x;
        v
    }

    pub fn from_int(&self, n: i64) -> AlgValue {
        self.from_rational(q(n))
    }

    pub fn one(&self) -> AlgValue {
        self.from_int(1)
    }

    /// The generator a of the base field.
    pub fn theta(&self) -> AlgValue {
        let mut v = self.zero();
        if self.base_degree() == 1 {
            v.coeffs[0] = q(-self.minpoly[0]);
        } else {
            v.coeffs[1] = q(1);
        }
        v
    }

    /// The adjoined square root of r_i.
    pub fn root(&self, i: usize) -> AlgValue {
        let mut v = self.zero();
        v.coeffs[(1 << i) * self.base_degree()] = q(1);
        v
    }

    /// Pads a value from a subtower (same base, fewer roots).
    pub fn lift(&self, v: &AlgValue) -> AlgValue {
        let mut c = v.coeffs.clone();
        assert!(c.len() <= self.degree(), "value does not come from a subtower");
        c.resize(self.degree(), Q::zero());
        AlgValue { coeffs: c }
    }

    pub fn to_rational(&self, v: &AlgValue) -> Option<Q> {
        v.coeffs[1..].iter().all(|c| c.is_zero()).then(|| v.coeffs[0].clone())
    }

    pub fn to_integer(&self, v: &AlgValue) -> Option<i64> {
        self.to_rational(v).filter(|x| x.is_integer()).and_then(|x| x.to_integer().to_i64())
    }

    // ----- arithmetic -----

    pub fn add(&self, a: &AlgValue, b: &AlgValue) -> AlgValue {
        AlgValue { coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, a: &AlgValue, b: &AlgValue) -> AlgValue {
        AlgValue { coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect() }
    }

    pub fn neg(&self, a: &AlgValue) -> AlgValue {
        AlgValue { coeffs: a.coeffs.iter().map(|x| -x).collect() }
    }

    pub fn scale(&self, a: &AlgValue, s: &Q) -> AlgValue {
        AlgValue { coeffs: a.coeffs.iter().map(|x| x * s).collect() }
    }

    pub fn mul(&self, a: &AlgValue, b: &AlgValue) -> AlgValue {
        AlgValue { coeffs: self.mul_at(&a.coeffs, &b.coeffs, self.num_roots()) }
    }

    pub fn inv(&self, a: &AlgValue) -> Result<AlgValue> {
        self.inv_at(&a.coeffs, self.num_roots()).map(|coeffs| AlgValue { coeffs }).ok_or(Error::DivisionByZero)
    }

    pub fn div(&self, a: &AlgValue, b: &AlgValue) -> Result<AlgValue> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    pub fn pow(&self, a: &AlgValue, e: i64) -> Result<AlgValue> {
        let mut base = if e < 0 { self.inv(a)? } else { a.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        Ok(acc)
    }

    fn mul_base(&self, a: &[Q], b: &[Q]) -> Vec<Q> {
        let d = self.base_degree();
        if d == 1 {
            return vec![&a[0] * &b[0]];
        }
        let mut prod = vec![Q::zero(); 2 * d - 1];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                prod[i + j] += x * y;
            }
        }
        for top in (d..prod.len()).rev() {
            let c = std::mem::take(&mut prod[top]);
            if c.is_zero() {
                continue;
            }
            for (j, m) in self.minpoly[..d].iter().enumerate() {
                prod[top - d + j] -= &c * q(*m);
            }
        }
        prod.truncate(d);
        prod
    }

    fn mul_at(&self, a: &[Q], b: &[Q], level: usize) -> Vec<Q> {
        if level == 0 {
            return self.mul_base(a, b);
        }
        let h = a.len() / 2;
        let (x, y) = a.split_at(h);
        let (u, z) = b.split_at(h);
        let y_zero = y.iter().all(|c| c.is_zero());
        let z_zero = z.iter().all(|c| c.is_zero());
        let mut lo = self.mul_at(x, u, level - 1);
        let mut hi = vec![Q::zero(); h];
        if !y_zero && !z_zero {
            let yz = self.mul_at(y, z, level - 1);
            let t = self.mul_at(&yz, &self.radicands[level - 1], level - 1);
            add_into(&mut lo, &t);
        }
        if !z_zero {
            add_into(&mut hi, &self.mul_at(x, z, level - 1));
        }
        if !y_zero {
            add_into(&mut hi, &self.mul_at(y, u, level - 1));
        }
        lo.extend(hi);
        lo
    }

    fn inv_base(&self, a: &[Q]) -> Option<Vec<Q>> {
        let d = self.base_degree();
        if a.iter().all(|c| c.is_zero()) {
            return None;
        }
        if d == 1 {
            return Some(vec![a[0].recip()]);
        }
        // Solve M x = e_0 where column j of M is a * a^j.
        let mut cols = Vec::with_capacity(d);
        let mut e = vec![Q::zero(); d];
        e[0] = q(1);
        for j in 0..d {
            let mut basis = vec![Q::zero(); d];
            basis[j] = q(1);
            cols.push(self.mul_base(a, &basis));
        }
        let mut m: Vec<Vec<Q>> =
            (0..d).map(|i| (0..d).map(|j| cols[j][i].clone()).chain([e[i].clone()]).collect()).collect();
        solve_in_place(&mut m, d)
    }

    fn inv_at(&self, a: &[Q], level: usize) -> Option<Vec<Q>> {
        if level == 0 {
            return self.inv_base(a);
        }
        let h = a.len() / 2;
        let (x, y) = a.split_at(h);
        if y.iter().all(|c| c.is_zero()) {
            let mut out = self.inv_at(x, level - 1)?;
            out.extend(vec![Q::zero(); h]);
            return Some(out);
        }
        let n = self.rel_norm(x, y, level);
        let ni = self.inv_at(&n, level - 1)?;
        let mut out = self.mul_at(x, &ni, level - 1);
        out.extend(self.mul_at(y, &ni, level - 1).into_iter().map(|c| -c));
        Some(out)
    }

    /// x^2 - r y^2 at the level below.
    fn rel_norm(&self, x: &[Q], y: &[Q], level: usize) -> Vec<Q> {
        let xx = self.mul_at(x, x, level - 1);
        let yy = self.mul_at(y, y, level - 1);
        let ryy = self.mul_at(&yy, &self.radicands[level - 1], level - 1);
        xx.iter().zip(&ryy).map(|(a, b)| a - b).collect()
    }

    // ----- embeddings -----

    fn eval_at(&self, c: &[Q], theta: Complex64, roots: &[Complex64]) -> Complex64 {
        let d = self.base_degree();
        let mut total = Complex64::new(0.0, 0.0);
        for (mask, chunk) in c.chunks(d).enumerate() {
            if chunk.iter().all(|x| x.is_zero()) {
                continue;
            }
            let mut base = Complex64::new(0.0, 0.0);
            let mut pw = Complex64::new(1.0, 0.0);
            for x in chunk {
                base += pw * x.to_f64().unwrap_or(f64::NAN);
                pw *= theta;
            }
            if d == 1 {
                base = Complex64::new(chunk[0].to_f64().unwrap_or(f64::NAN), 0.0);
            }
            let mut m = base;
            for (i, r) in roots.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    m *= *r;
                }
            }
            total += m;
        }
        total
    }

    /// The value under the reference complex embedding.
    pub fn embed(&self, v: &AlgValue) -> Complex64 {
        self.eval_at(&v.coeffs, self.theta_ref, &self.root_refs)
    }

    pub fn is_positive(&self, v: &AlgValue) -> bool {
        is_positive(self.embed(v))
    }

    /// v or -v, whichever is positive in the reference embedding.
    pub fn canonical_sign(&self, v: &AlgValue) -> AlgValue {
        if v.is_zero() || self.is_positive(v) {
            v.clone()
        } else {
            self.neg(v)
        }
    }

    // ----- square roots -----

    /// A square root of v inside the tower, if one exists.
    pub fn sqrt(&self, v: &AlgValue) -> Option<AlgValue> {
        self.sqrt_at(&v.coeffs, self.num_roots()).map(|coeffs| self.canonical_sign(&AlgValue { coeffs }))
    }

    pub fn is_square(&self, v: &AlgValue) -> bool {
        self.sqrt(v).is_some()
    }

    fn sqrt_base(&self, a: &[Q]) -> Option<Vec<Q>> {
        if a.iter().all(|c| c.is_zero()) {
            return Some(a.to_vec());
        }
        let d = self.base_degree();
        if d == 1 {
            return rational_sqrt(&a[0]).map(|s| vec![s]);
        }
        let thetas = poly_roots(&self.minpoly);
        let vals: Vec<Complex64> = thetas
            .iter()
            .map(|t| {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in a.iter().rev() {
                    acc = acc * *t + c.to_f64().unwrap_or(f64::NAN);
                }
                acc.sqrt()
            })
            .collect();
        let vander = DMatrix::<Complex64>::from_fn(d, d, |i, j| thetas[i].powu(j as u32));
        let lu = vander.lu();
        for signs in 0u32..(1 << (d - 1)) {
            let rhs =
                DVector::<Complex64>::from_fn(
                    d,
                    |i, _| if i > 0 && signs & (1 << (i - 1)) != 0 { -vals[i] } else { vals[i] },
                );
            let Some(sol) = lu.solve(&rhs) else { continue };
            if sol.iter().any(|c| c.im.abs() > 1e-6 * (1.0 + c.re.abs())) {
                continue;
            }
            let cand: Option<Vec<Q>> = sol.iter().map(|c| rationalize(c.re, 1e-7 * (1.0 + c.re.abs()))).collect();
            if let Some(w) = cand {
                if self.mul_base(&w, &w) == a {
                    return Some(w);
                }
            }
        }
        None
    }

    fn sqrt_at(&self, a: &[Q], level: usize) -> Option<Vec<Q>> {
        if level == 0 {
            return self.sqrt_base(a);
        }
        let h = a.len() / 2;
        let (x, y) = a.split_at(h);
        let zeros = vec![Q::zero(); h];
        if y.iter().all(|c| c.is_zero()) {
            if let Some(mut s) = self.sqrt_at(x, level - 1) {
                s.extend(zeros);
                return Some(s);
            }
            let rinv = self.inv_at(&self.radicands[level - 1], level - 1)?;
            let t = self.sqrt_at(&self.mul_at(x, &rinv, level - 1), level - 1)?;
            let mut out = zeros;
            out.extend(t);
            return Some(out);
        }
        // (u + w rho)^2 = x + y rho gives u^2 = (x +- n)/2 with n^2 = x^2 - r y^2.
        let n = self.sqrt_at(&self.rel_norm(x, y, level), level - 1)?;
        let half = Q::new(BigInt::one(), BigInt::from(2));
        for sign in [1, -1] {
            let s: Vec<Q> = x.iter().zip(&n).map(|(xi, ni)| (xi + ni * q(sign)) * &half).collect();
            if s.iter().all(|c| c.is_zero()) {
                continue;
            }
            let Some(u) = self.sqrt_at(&s, level - 1) else { continue };
            let two_u: Vec<Q> = u.iter().map(|c| c * q(2)).collect();
            let Some(iu) = self.inv_at(&two_u, level - 1) else { continue };
            let w = self.mul_at(y, &iu, level - 1);
            let mut cand = u;
            cand.extend(w);
            if self.mul_at(&cand, &cand, level) == a {
                return Some(cand);
            }
        }
        None
    }

    /// Adjoins sqrt(r) as a new top root. Fails when r is already a square.
    pub fn adjoin(&self, r: &AlgValue, name: Option<&str>) -> Result<ValueField> {
        if r.is_zero() {
            return Err(invalid("cannot adjoin the square root of zero"));
        }
        if self.num_roots() >= MAX_ROOTS {
            return Err(invalid(format!("tower would exceed {MAX_ROOTS} square roots")));
        }
        if self.is_square(r) {
            return Err(invalid(format!("{} is already a square", self.format(r))));
        }
        let mut f = self.clone();
        f.root_refs.push(canonical_sqrt(self.embed(r)));
        f.radicands.push(r.coeffs.clone());
        let name = match name {
            Some(n) => n.to_string(),
            None => match self.to_integer(r) {
                Some(-1) => "i".into(),
                Some(n) if n > 0 => format!("sqrt{n}"),
                Some(n) => format!("sqrtm{}", -n),
                None => format!("r{}", self.num_roots() + 1),
            },
        };
        f.names.push(name);
        Ok(f)
    }

    /// A square root of v, adjoining one when v is not a square. The root
    /// returned is positive in the reference embedding when it lies in the
    /// original tower.
    pub fn sqrt_or_adjoin(&self, v: &AlgValue) -> Result<(ValueField, AlgValue)> {
        if v.is_zero() {
            return Ok((self.clone(), v.clone()));
        }
        if let Some(w) = self.sqrt(v) {
            return Ok((self.clone(), w));
        }
        // Descend: sqrt(x + y rho) = sqrt(s) (1 + y/(2s) rho) when x^2 - r y^2 is a square.
        let level = self.level_of(v);
        if level > 0 {
            let h = self.len_at(level - 1);
            let x = &v.coeffs[..h];
            let y = &v.coeffs[h..2 * h];
            if let Some(n) = self.sqrt_at(&self.rel_norm(x, y, level), level - 1) {
                let half = Q::new(BigInt::one(), BigInt::from(2));
                for sign in [1, -1] {
                    let s: Vec<Q> = x.iter().zip(&n).map(|(xi, ni)| (xi + ni * q(sign)) * &half).collect();
                    if s.iter().all(|c| c.is_zero()) {
                        continue;
                    }
                    let s_val = self.lift(&AlgValue { coeffs: s.clone() });
                    let (g, rs) = self.sqrt_or_adjoin(&s_val)?;
                    let two_s: Vec<Q> = s.iter().map(|c| c * q(2)).collect();
                    let Some(is2) = self.inv_at(&two_s, level - 1) else { continue };
                    let t = self.mul_at(y, &is2, level - 1);
                    let mut factor = vec![Q::zero(); h];
                    factor[0] = q(1);
                    factor.extend(t);
                    let factor = g.lift(&self.lift(&AlgValue { coeffs: factor }));
                    let w = g.mul(&rs, &factor);
                    if g.mul(&w, &w) == g.lift(v) {
                        return Ok((g.clone(), g.canonical_sign(&w)));
                    }
                }
            }
        }
        // Adjoin v with its rational square content removed.
        let content = self.rational_content(v);
        let (s, f) = square_part(&content);
        let radicand = self.scale(v, &(Q::from_integer(f) / &content));
        let g = self.adjoin(&radicand, None)?;
        let w = g.scale(&g.root(g.num_roots() - 1), &s);
        Ok((g.clone(), g.canonical_sign(&w)))
    }

    /// The smallest j such that v has no component on roots j, j+1, ...
    fn level_of(&self, v: &AlgValue) -> usize {
        let d = self.base_degree();
        let last = v.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0);
        let mask = last / d;
        (usize::BITS - mask.leading_zeros()) as usize
    }

    /// A positive rational c with v / c having coprime integer coefficients.
    fn rational_content(&self, v: &AlgValue) -> Q {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in v.coeffs.iter().filter(|c| !c.is_zero()) {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        let c = Q::new(num, den);
        // keep the sign of a rational value so that sqrt(-2) becomes sqrt(-1)*sqrt(2) only if needed
        if let Some(x) = self.to_rational(v) {
            if x.is_negative() {
                return -c;
            }
        }
        c
    }

    /// Adjoins roots of unity as needed and returns zeta_n^k, for n | 24.
    pub fn root_of_unity(&self, z: &RootOfUnity) -> Result<(ValueField, AlgValue)> {
        let n = z.order();
        if 24 % n != 0 {
            return Err(invalid(format!("roots of unity of order {n} are not supported")));
        }
        let e = (z.exponent() * (24 / n)) % 24;
        // zeta_24^e = zeta_8^a zeta_3^b
        let a = (3 * e) % 8;
        let b = (2 * e) % 3;
        let mut g = self.clone();
        let mut acc = g.one();
        if a != 0 {
            let (g1, z8) = if a.is_multiple_of(2) {
                let (g1, i) = g.sqrt_or_adjoin(&g.from_int(-1))?;
                (g1.clone(), g1.pow(&i, (a / 2) as i64)?)
            } else {
                let (g1, i) = g.sqrt_or_adjoin(&g.from_int(-1))?;
                let (g2, z8) = g1.sqrt_or_adjoin(&i)?;
                (g2.clone(), g2.pow(&z8, a as i64)?)
            };
            acc = g1.lift(&acc);
            acc = g1.mul(&acc, &z8);
            g = g1;
        }
        if b != 0 {
            let (g1, s3) = g.sqrt_or_adjoin(&g.from_int(-3))?;
            let half = Q::new(BigInt::one(), BigInt::from(2));
            let z3 = g1.scale(&g1.add(&g1.from_int(-1), &s3), &half);
            acc = g1.lift(&acc);
            acc = g1.mul(&acc, &g1.pow(&z3, b as i64)?);
            g = g1;
        }
        Ok((g, acc))
    }

    // ----- maps between towers -----

    pub fn identity_map(&self) -> FieldMap {
        FieldMap { theta_image: self.theta(), root_images: (0..self.num_roots()).map(|i| self.root(i)).collect() }
    }

    /// Applies a map from `src` into `self`.
    pub fn apply(&self, map: &FieldMap, src: &ValueField, v: &AlgValue) -> AlgValue {
        let d = src.base_degree();
        let theta = self.lift(&map.theta_image);
        let roots: Vec<AlgValue> = map.root_images.iter().map(|r| self.lift(r)).collect();
        let mut total = self.zero();
        let mut theta_pows = vec![self.one()];
        for _ in 1..d {
            let next = self.mul(theta_pows.last().unwrap(), &theta);
            theta_pows.push(next);
        }
        for (mask, chunk) in v.coeffs.chunks(d).enumerate() {
            if chunk.iter().all(|c| c.is_zero()) {
                continue;
            }
            let mut base = self.zero();
            for (p, c) in chunk.iter().enumerate() {
                if !c.is_zero() {
                    base = self.add(&base, &self.scale(&theta_pows[p], c));
                }
            }
            for (i, r) in roots.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    base = self.mul(&base, r);
                }
            }
            total = self.add(&total, &base);
        }
        total
    }

    /// Extends `self` until it contains an image of `src` compatible with
    /// both reference embeddings, and returns that map.
    pub fn embedding_of(&self, src: &ValueField) -> Result<(ValueField, FieldMap)> {
        let theta_image = if src.base_degree() == 1 {
            self.from_rational(q(-src.minpoly[0]))
        } else if src.minpoly == self.minpoly {
            self.theta()
        } else {
            return Err(invalid(format!(
                "cannot embed a tower over {:?} into one over {:?}",
                src.minpoly, self.minpoly
            )));
        };
        let mut g = self.clone();
        let mut map = FieldMap { theta_image, root_images: Vec::new() };
        for i in 0..src.num_roots() {
            let sub = src.truncated(i);
            let r = g.apply(&map, &sub, &AlgValue { coeffs: src.radicands[i].clone() });
            let (g2, w) = g.sqrt_or_adjoin(&r)?;
            let target = src.root_refs[i];
            let w = if (g2.embed(&w) - target).norm() <= (g2.embed(&w) + target).norm() { w } else { g2.neg(&w) };
            map.root_images.push(w);
            g = g2;
        }
        Ok((g, map))
    }

    fn truncated(&self, roots: usize) -> ValueField {
        ValueField {
            radicands: self.radicands[..roots].to_vec(),
            names: self.names[..roots].to_vec(),
            root_refs: self.root_refs[..roots].to_vec(),
            ..self.clone()
        }
    }

    /// Brings a value from another tower into (an extension of) this one.
    pub fn import(&self, src: &ValueField, v: &AlgValue) -> Result<(ValueField, AlgValue)> {
        let (g, map) = self.embedding_of(src)?;
        let w = g.apply(&map, src, v);
        Ok((g, w))
    }

    /// Equality of values living in different towers.
    pub fn equal_across(&self, a: &AlgValue, other: &ValueField, b: &AlgValue) -> Result<bool> {
        let (g, bb) = self.import(other, b)?;
        Ok(g.lift(a) == bb)
    }

    /// Field automorphisms: base automorphisms (nontrivial only for a
    /// quadratic base) combined with sign changes of the roots.
    pub fn automorphisms(&self) -> Vec<FieldMap> {
        let mut thetas = vec![self.theta()];
        if self.base_degree() == 2 {
            let trace = q(-self.minpoly[1]);
            thetas.push(self.sub(&self.from_rational(trace), &self.theta()));
        }
        let mut out = Vec::new();
        for t in thetas {
            let mut partial = vec![FieldMap { theta_image: t, root_images: Vec::new() }];
            for i in 0..self.num_roots() {
                let sub = self.truncated(i);
                let mut next = Vec::new();
                for m in partial {
                    let r = self.apply(&m, &sub, &AlgValue { coeffs: self.radicands[i].clone() });
                    if let Some(w) = self.sqrt(&r) {
                        for s in [w.clone(), self.neg(&w)] {
                            let mut m2 = m.clone();
                            m2.root_images.push(s);
                            next.push(m2);
                        }
                    }
                }
                partial = next;
            }
            out.extend(partial);
        }
        out
    }

    // ----- text -----

    fn monomial(&self, mask: usize, power: usize) -> String {
        let mut parts = Vec::new();
        if power == 1 {
            parts.push(self.base_name.clone());
        } else if power > 1 {
            parts.push(format!("{}^{power}", self.base_name));
        }
        for (i, n) in self.names.iter().enumerate() {
            if mask & (1 << i) != 0 {
                parts.push(n.clone());
            }
        }
        parts.join("*")
    }

    pub fn format(&self, v: &AlgValue) -> String {
        let d = self.base_degree();
        let mut out = String::new();
        for (idx, c) in v.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let (mask, power) = (idx / d, if d == 1 { 0 } else { idx % d });
            let mono = self.monomial(mask, power);
            let neg = c.is_negative();
            let mag = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if mono.is_empty() {
                out.push_str(&mag.to_string());
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag}*{mono}"));
            }
        }
        if out.is_empty() {
            "0".into()
        } else {
            out
        }
    }

    /// Sets the display and parse names of the adjoined roots.
    pub fn with_names(mut self, base: &str, roots: &[&str]) -> Result<Self> {
        if roots.len() != self.num_roots() {
            return Err(invalid("one name per adjoined root is required"));
        }
        self.base_name = base.into();
        self.names = roots.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    /// Parses an expression in the rationals, the base generator and the
    /// root names, e.g. `-2*sqrt2 + 3*i` or `a^2 - a - 2`.
    pub fn parse(&self, s: &str) -> Result<AlgValue> {
        let tokens = tokenize(s)?;
        let mut p = Parser { f: self, tokens, pos: 0 };
        let v = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Schema(format!("trailing input in {s:?}")));
        }
        Ok(v)
    }

    pub fn to_repr(&self) -> ValueFieldRepr {
        ValueFieldRepr {
            minpoly: self.minpoly.clone(),
            base_name: self.base_name.clone(),
            adjoined: self
                .radicands
                .iter()
                .enumerate()
                .map(|(i, r)| self.truncated(i).format(&AlgValue { coeffs: r.clone() }))
                .collect(),
            names: self.names.clone(),
        }
    }

    pub fn from_repr(repr: &ValueFieldRepr) -> Result<Self> {
        let mut f = ValueField::new(repr.minpoly.clone())?;
        f.base_name = repr.base_name.clone();
        if repr.names.len() != repr.adjoined.len() {
            return Err(Error::Schema("adjoined roots and names differ in length".into()));
        }
        for (r, n) in repr.adjoined.iter().zip(&repr.names) {
            let v = f.parse(r)?;
            f = f.adjoin(&v, Some(n))?;
        }
        Ok(f)
    }

    pub fn value_to_repr(&self, v: &AlgValue) -> AlgValueRepr {
        let d = self.base_degree();
        let coeffs = v
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (format!("{},{}", i / d, i % d), c.to_string()))
            .collect();
        AlgValueRepr { field: self.to_repr(), coeffs }
    }

    pub fn value_from_repr(&self, r: &AlgValueRepr) -> Result<AlgValue> {
        let src = ValueField::from_repr(&r.field)?;
        let d = src.base_degree();
        let mut v = src.zero();
        for (k, c) in &r.coeffs {
            let (m, p) = k.split_once(',').ok_or_else(|| Error::Schema(format!("bad coefficient key {k}")))?;
            let m: usize = m.parse().map_err(|_| Error::Schema(format!("bad coefficient key {k}")))?;
            let p: usize = p.parse().map_err(|_| Error::Schema(format!("bad coefficient key {k}")))?;
            let idx = m * d + p;
            if p >= d || idx >= v.coeffs.len() {
                return Err(Error::Schema(format!("coefficient key {k} out of range")));
            }
            v.coeffs[idx] = c.parse().map_err(|_| Error::Schema(format!("bad rational {c}")))?;
        }
        if src == *self {
            Ok(v)
        } else {
            Err(Error::Schema("value belongs to a different field".into()))
        }
    }
}

impl fmt::Display for ValueField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = if self.base_degree() == 1 {
            "Q".to_string()
        } else {
            let terms: Vec<String> = self
                .minpoly
                .iter()
                .enumerate()
                .rev()
                .filter(|(_, c)| **c != 0)
                .map(|(p, c)| match p {
                    0 => format!("{c:+}"),
                    1 => format!("{c:+}x"),
                    _ => format!("{c:+}x^{p}"),
                })
                .collect();
            format!("Q[x]/({})", terms.join("").trim_start_matches('+'))
        };
        if self.names.is_empty() {
            write!(f, "{base}")
        } else {
            write!(f, "{base}({})", self.names.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueFieldRepr {
    pub minpoly: Vec<i64>,
    #[serde(default = "default_base_name")]
    pub base_name: String,
    pub adjoined: Vec<String>,
    pub names: Vec<String>,
}

fn default_base_name() -> String {
    "a".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgValueRepr {
    pub field: ValueFieldRepr,
    pub coeffs: BTreeMap<String, String>,
}

fn add_into(acc: &mut [Q], x: &[Q]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Gaussian elimination on an augmented d x (d+1) matrix.
fn solve_in_place(m: &mut [Vec<Q>], d: usize) -> Option<Vec<Q>> {
    for col in 0..d {
        let piv = (col..d).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..d {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let row = m[col].clone();
                for (x, y) in m[r].iter_mut().zip(&row) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(m.iter().map(|row| row[d].clone()).collect())
}

// ----- expression parser -----

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let t: String = chars[start..i].iter().collect();
            out.push(Tok::Num(t.parse().expect("digits")));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Schema(format!("unexpected character {c:?} in {s:?}")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    f: &'a ValueField,
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<AlgValue> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let t = self.term()?;
            acc = if c == '+' { self.f.add(&acc, &t) } else { self.f.sub(&acc, &t) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<AlgValue> {
        let mut acc = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    let t = self.unary()?;
                    acc = self.f.mul(&acc, &t);
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    let t = self.unary()?;
                    acc = self.f.div(&acc, &t)?;
                }
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')) => {
                    let t = self.power()?;
                    acc = self.f.mul(&acc, &t);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<AlgValue> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let v = self.unary()?;
            return Ok(self.f.neg(&v));
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.pos += 1;
        }
        self.power()
    }

    fn power(&mut self) -> Result<AlgValue> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let neg = matches!(self.peek(), Some(Tok::Op('-')));
            if neg {
                self.pos += 1;
            }
            match self.peek().cloned() {
                Some(Tok::Num(n)) => {
                    self.pos += 1;
                    let e = n.to_i64().ok_or_else(|| Error::Schema("exponent too large".into()))?;
                    return self.f.pow(&base, if neg { -e } else { e });
                }
                _ => return Err(Error::Schema("expected an integer exponent".into())),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<AlgValue> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Schema("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(self.f.from_rational(Q::from_integer(n))),
            Tok::Ident(name) => {
                if name == self.f.base_name && self.f.base_degree() > 1 {
                    return Ok(self.f.theta());
                }
                match self.f.names.iter().position(|n| *n == name) {
                    Some(i) => Ok(self.f.root(i)),
                    None => Err(Error::Schema(format!("unknown symbol {name:?} in field {}", self.f))),
                }
            }
            Tok::Op('(') => {
                let v = self.expr()?;
                match self.peek() {
                    Some(Tok::Op(')')) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    _ => Err(Error::Schema("missing closing parenthesis".into())),
                }
            }
            Tok::Op(c) => Err(Error::Schema(format!("unexpected {c:?}"))),
        }
    }
}
