//! Characters of the class group with exact root-of-unity values.

use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::classgroup::{ClassGroup, IdealClass};
use crate::error::{invalid, Result};
use crate::quadfield::Ideal;

/// zeta_n^k with 0 <= k < n and gcd(k, n) = 1 (or k = 0, n = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootOfUnity {
    k: u64,
    n: u64,
}

impl RootOfUnity {
    pub fn new(k: i64, n: u64) -> Self {
        assert!(n > 0, "root of unity needs positive order");
        let k = k.rem_euclid(n as i64) as u64;
        let g = k.gcd(&n);
        if k == 0 {
            return RootOfUnity { k: 0, n: 1 };
        }
        RootOfUnity { k: k / g, n: n / g }
    }

    pub fn one() -> Self {
        RootOfUnity { k: 0, n: 1 }
    }

    pub fn minus_one() -> Self {
        RootOfUnity { k: 1, n: 2 }
    }

    pub fn exponent(&self) -> u64 {
        self.k
    }

    pub fn order(&self) -> u64 {
        self.n
    }

    pub fn is_one(&self) -> bool {
        self.n == 1
    }

    pub fn mul(&self, other: &Self) -> Self {
        let l = self.n.lcm(&other.n);
        Self::new((self.k * (l / self.n) + other.k * (l / other.n)) as i64, l)
    }

    pub fn inv(&self) -> Self {
        Self::new(-(self.k as i64), self.n)
    }

    pub fn pow(&self, e: i64) -> Self {
        Self::new((self.k as i128 * e as i128).rem_euclid(self.n as i128) as i64, self.n)
    }

    /// +1 or -1 when the value is real.
    pub fn as_sign(&self) -> Option<i64> {
        match self.n {
            1 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.k as f64 / self.n as f64)
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.k, self.n) {
            (0, 1) => write!(f, "1"),
            (1, 2) => write!(f, "-1"),
            (1, 4) => write!(f, "i"),
            (3, 4) => write!(f, "-i"),
            (k, n) => write!(f, "zeta{n}^{k}"),
        }
    }
}

/// A character value, or zero at ideals sharing a factor with the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharValue {
    Zero,
    Root(RootOfUnity),
}

impl fmt::Display for CharValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CharValue::Zero => write!(f, "0"),
            CharValue::Root(r) => r.fmt(f),
        }
    }
}

/// chi(g_i) = zeta_{d_i}^{e_i} on the i-th generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassCharacter {
    pub exponents: Vec<u64>,
}

impl ClassCharacter {
    pub fn trivial(cg: &ClassGroup) -> Self {
        ClassCharacter { exponents: vec![0; cg.elementary_divisors().len()] }
    }

    pub fn from_exponents(cg: &ClassGroup, exponents: Vec<u64>) -> Result<Self> {
        let divs = cg.elementary_divisors();
        if exponents.len() != divs.len() || exponents.iter().zip(divs).any(|(e, d)| e >= d) {
            return Err(invalid(format!("character exponents {exponents:?} do not fit {divs:?}")));
        }
        Ok(ClassCharacter { exponents })
    }

    pub fn is_trivial(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    pub fn eval_class(&self, cg: &ClassGroup, c: &IdealClass) -> RootOfUnity {
        let divs = cg.elementary_divisors();
        let mut r = RootOfUnity::one();
        for ((e, x), d) in self.exponents.iter().zip(&c.0).zip(divs) {
            r = r.mul(&RootOfUnity::new(((e * x) % d) as i64, *d));
        }
        r
    }

    pub fn eval(&self, cg: &ClassGroup, a: &Ideal, level: Option<&Ideal>) -> CharValue {
        if let Some(n) = level {
            if !cg.field().is_coprime(a, n) {
                return CharValue::Zero;
            }
        }
        CharValue::Root(self.eval_class(cg, &cg.class_of(a)))
    }

    pub fn mul(&self, cg: &ClassGroup, other: &Self) -> Self {
        let exps = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .zip(cg.elementary_divisors())
            .map(|((a, b), d)| (a + b) % d)
            .collect();
        ClassCharacter { exponents: exps }
    }

    pub fn inverse(&self, cg: &ClassGroup) -> Self {
        let exps = self.exponents.iter().zip(cg.elementary_divisors()).map(|(a, d)| (d - a) % d).collect();
        ClassCharacter { exponents: exps }
    }

    pub fn order(&self, cg: &ClassGroup) -> u64 {
        self.exponents.iter().zip(cg.elementary_divisors()).map(|(e, d)| d / e.gcd(d)).fold(1, |acc, o| acc.lcm(&o))
    }

    pub fn is_quadratic(&self, cg: &ClassGroup) -> bool {
        self.order(cg) <= 2
    }

    /// "chi<j>" for cyclic groups, the exponent vector otherwise.
    pub fn label(&self, cg: &ClassGroup) -> String {
        match cg.elementary_divisors().len() {
            0 => "chi0".into(),
            1 => format!("chi{}", self.exponents[0]),
            _ => format!("chi{:?}", self.exponents),
        }
    }
}

/// All h characters, in lexicographic order of exponent vectors.
pub fn character_group(cg: &ClassGroup) -> Vec<ClassCharacter> {
    cg.elements().into_iter().map(|c| ClassCharacter { exponents: c.0 }).collect()
}

/// The characters of order at most 2, the trivial one first.
pub fn quadratic_characters(cg: &ClassGroup) -> Vec<ClassCharacter> {
    character_group(cg).into_iter().filter(|x| x.is_quadratic(cg)).collect()
}

/// Nontrivial quadratic psi with psi(q) = +1 for every exact prime-power divisor q of n.
pub fn eligible_selftwists(cg: &ClassGroup, n: &Ideal) -> Result<Vec<ClassCharacter>> {
    let qs = cg.field().prime_power_divisors(n)?;
    Ok(quadratic_characters(cg)
        .into_iter()
        .filter(|psi| !psi.is_trivial())
        .filter(|psi| qs.iter().all(|q| psi.eval_class(cg, &cg.class_of(q)).is_one()))
        .collect())
}
