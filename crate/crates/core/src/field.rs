//! Exact arithmetic over GF(p) and GF(p^s).
//!
//! Elements are packed into a canonical integer in `[0, q)`: the coefficients
//! of the residue polynomial are read as base-`p` digits, constant term first.
//! For `q <= 2^16` multiplication goes through log/antilog tables built from
//! the smallest primitive element; larger extension fields fall back to
//! polynomial multiplication and reduction.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use thiserror::Error;

const TABLE_LIMIT: u64 = 1 << 16;
const MAX_ORDER: u64 = 1 << 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("characteristic {0} is not prime")]
    NonPrimeCharacteristic(u64),
    #[error("modulus polynomial is reducible over GF({p})")]
    ReducibleModulus { p: u32 },
    #[error("modulus has degree {got}, expected {expected}")]
    ModulusDegree { expected: u32, got: usize },
    #[error("field order {0} is too large")]
    FieldTooLarge(u64),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("zero has no multiplicative order")]
    ZeroElement,
    #[error("elements belong to different fields")]
    FieldMismatch,
    #[error("value {value} is out of range for a field of order {q}")]
    OutOfRange { value: u64, q: u32 },
    #[error("no element of order {order}: it does not divide {group}")]
    OrderNotDividing { order: u64, group: u64 },
    #[error("invalid field specification {0:?}")]
    BadSpec(String),
}

/// A field element in canonical packed form. Arithmetic goes through
/// [`Field`]; the element itself does not know which field it belongs to.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct Fe(pub u32);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element tagged with the identity of its field, for call sites that mix
/// elements from several fields and want mismatches reported instead of
/// silently computing garbage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    field_id: u64,
    value: Fe,
}

impl FieldElement {
    pub fn value(&self) -> Fe {
        self.value
    }
}

#[derive(Debug, Clone)]
enum MulStrategy {
    Tables { exp: Vec<u32>, log: Vec<u32> },
    PrimeMod,
    Polynomial,
}

/// Immutable description of GF(p^s) together with its arithmetic tables.
#[derive(Debug, Clone)]
pub struct Field {
    p: u32,
    s: u32,
    q: u32,
    /// Monic modulus, coefficients from constant term upward (length s+1).
    modulus: Vec<u32>,
    id: u64,
    generator: Fe,
    group_factors: Vec<u64>,
    mul: MulStrategy,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.p == other.p && self.s == other.s && self.modulus == other.modulus
    }
}

impl Eq for Field {}

impl Field {
    /// Builds GF(p^s). When `modulus` is `None` the monic irreducible
    /// polynomial with the smallest packed value is used.
    pub fn new(p: u64, s: u32, modulus: Option<&[u32]>) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NonPrimeCharacteristic(p));
        }
        if s == 0 {
            return Err(FieldError::ZeroDegree);
        }
        let q = p
            .checked_pow(s)
            .filter(|&q| q <= MAX_ORDER)
            .ok_or(FieldError::FieldTooLarge(p.saturating_pow(s)))?;
        let p32 = p as u32;
        let modulus = match modulus {
            Some(m) => {
                let m = trim(m.to_vec());
                if m.len() != s as usize + 1 {
                    return Err(FieldError::ModulusDegree { expected: s, got: m.len().saturating_sub(1) });
                }
                if m.iter().any(|&c| c >= p32) {
                    return Err(FieldError::ReducibleModulus { p: p32 });
                }
                let lead_inv = inv_mod(m[s as usize], p32);
                let monic: Vec<u32> = m.iter().map(|&c| mul_mod(c, lead_inv, p32)).collect();
                if s > 1 && !poly::is_irreducible(&monic, p32) {
                    return Err(FieldError::ReducibleModulus { p: p32 });
                }
                monic
            }
            None => default_modulus(p32, s),
        };

        let mut hasher = DefaultHasher::new();
        (p32, s, &modulus).hash(&mut hasher);
        let id = hasher.finish();

        let mut field = Field {
            p: p32,
            s,
            q: q as u32,
            modulus,
            id,
            generator: Fe::ONE,
            group_factors: prime_factors(q - 1),
            mul: if s == 1 { MulStrategy::PrimeMod } else { MulStrategy::Polynomial },
        };
        field.generator = field.find_generator();
        if q <= TABLE_LIMIT {
            field.mul = field.build_tables();
        }
        Ok(field)
    }

    /// Prime field GF(p).
    pub fn prime(p: u64) -> Result<Self, FieldError> {
        Self::new(p, 1, None)
    }

    /// Field of order `q` with the default modulus.
    pub fn with_order(q: u64) -> Result<Self, FieldError> {
        let (p, s) = prime_power(q).ok_or_else(|| FieldError::BadSpec(q.to_string()))?;
        Self::new(p, s, None)
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.s
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    /// Monic modulus coefficients, constant term first.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    /// Smallest primitive element (generator of the multiplicative group).
    pub fn generator(&self) -> Fe {
        self.generator
    }

    /// Canonical element for `value`, or an error if it is out of range.
    pub fn elem(&self, value: u64) -> Result<Fe, FieldError> {
        if value < self.q as u64 {
            Ok(Fe(value as u32))
        } else {
            Err(FieldError::OutOfRange { value, q: self.q })
        }
    }

    /// Image of an integer under the prime-subfield embedding.
    pub fn from_int(&self, value: i64) -> Fe {
        Fe(value.rem_euclid(self.p as i64) as u32)
    }

    pub fn tagged(&self, value: Fe) -> FieldElement {
        FieldElement { field_id: self.id, value }
    }

    pub fn untag(&self, e: FieldElement) -> Result<Fe, FieldError> {
        if e.field_id != self.id {
            return Err(FieldError::FieldMismatch);
        }
        Ok(e.value)
    }

    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        (0..self.q).map(Fe)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fe> {
        (1..self.q).map(Fe)
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        if self.p == 2 {
            return Fe(a.0 ^ b.0);
        }
        if self.s == 1 {
            let r = a.0 as u64 + b.0 as u64;
            return Fe((r % self.p as u64) as u32);
        }
        self.digitwise(a, b, |x, y, p| (x + y) % p)
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        if self.p == 2 || a.0 == 0 {
            return a;
        }
        if self.s == 1 {
            return Fe(self.p - a.0);
        }
        self.digitwise(Fe::ZERO, a, |_, y, p| (p - y) % p)
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        if self.p == 2 {
            return Fe(a.0 ^ b.0);
        }
        if self.s == 1 {
            let p = self.p as u64;
            return Fe(((a.0 as u64 + p - b.0 as u64) % p) as u32);
        }
        self.digitwise(a, b, |x, y, p| (x + p - y) % p)
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if a.0 == 0 || b.0 == 0 {
            return Fe::ZERO;
        }
        match &self.mul {
            MulStrategy::Tables { exp, log } => {
                Fe(exp[(log[a.0 as usize] + log[b.0 as usize]) as usize])
            }
            MulStrategy::PrimeMod => Fe(mul_mod(a.0, b.0, self.p)),
            MulStrategy::Polynomial => self.poly_mul(a, b),
        }
    }

    /// Multiplicative inverse; `ZeroInverse` for zero.
    pub fn inv(&self, a: Fe) -> Result<Fe, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(match &self.mul {
            MulStrategy::Tables { exp, log } => {
                let l = log[a.0 as usize];
                Fe(exp[((self.q - 1 - l) % (self.q - 1)) as usize])
            }
            MulStrategy::PrimeMod => Fe(inv_mod(a.0, self.p)),
            MulStrategy::Polynomial => self.pow(a, (self.q - 2) as u64),
        })
    }

    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^e` with the convention `0^0 = 1`.
    pub fn pow(&self, a: Fe, e: u64) -> Fe {
        if e == 0 {
            return Fe::ONE;
        }
        if a.0 == 0 {
            return Fe::ZERO;
        }
        if let MulStrategy::Tables { exp, log } = &self.mul {
            let l = (log[a.0 as usize] as u64 * (e % (self.q as u64 - 1))) % (self.q as u64 - 1);
            return Fe(exp[l as usize]);
        }
        let mut base = a;
        let mut e = e;
        let mut acc = Fe::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `a^e` for a signed exponent; negative powers need `a != 0`.
    pub fn pow_signed(&self, a: Fe, e: i64) -> Result<Fe, FieldError> {
        if e >= 0 {
            Ok(self.pow(a, e as u64))
        } else {
            Ok(self.pow(self.inv(a)?, e.unsigned_abs()))
        }
    }

    /// Smallest `e >= 1` with `a^e = 1`.
    pub fn element_order(&self, a: Fe) -> Result<u64, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::ZeroElement);
        }
        let mut e = self.q as u64 - 1;
        for &f in &self.group_factors {
            while e % f == 0 && self.pow(a, e / f) == Fe::ONE {
                e /= f;
            }
        }
        Ok(e)
    }

    /// The element of exact multiplicative order `order` with the smallest
    /// canonical value.
    pub fn find_element_of_order(&self, order: u64) -> Result<Fe, FieldError> {
        let group = self.q as u64 - 1;
        if order == 0 || group % order != 0 {
            return Err(FieldError::OrderNotDividing { order, group });
        }
        let step = self.pow(self.generator, group / order);
        let mut best: Option<Fe> = None;
        let mut x = Fe::ONE;
        for j in 1..=order {
            x = self.mul(x, step);
            if num_integer::gcd(j, order) == 1 {
                best = Some(best.map_or(x, |b| b.min(x)));
            }
        }
        Ok(best.expect("order >= 1 always has a generator"))
    }

    /// All elements `x` with `x^order = 1`, sorted.
    pub fn subgroup(&self, order: u64) -> Result<Vec<Fe>, FieldError> {
        let group = self.q as u64 - 1;
        if order == 0 || group % order != 0 {
            return Err(FieldError::OrderNotDividing { order, group });
        }
        let step = self.pow(self.generator, group / order);
        let mut out: Vec<Fe> = std::iter::successors(Some(Fe::ONE), |&x| Some(self.mul(x, step)))
            .take(order as usize)
            .collect();
        out.sort();
        Ok(out)
    }

    /// Inner product of two equal-length slices.
    #[inline]
    pub fn dot(&self, a: &[Fe], b: &[Fe]) -> Fe {
        a.iter().zip(b).fold(Fe::ZERO, |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }

    /// Evaluates a polynomial given by coefficients (constant term first).
    #[inline]
    pub fn eval_poly(&self, coeffs: &[Fe], x: Fe) -> Fe {
        coeffs.iter().rev().fold(Fe::ZERO, |acc, &c| self.add(self.mul(acc, x), c))
    }

    // checked arithmetic on tagged elements

    pub fn checked_add(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.tagged(self.add(self.untag(a)?, self.untag(b)?)))
    }

    pub fn checked_sub(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.tagged(self.sub(self.untag(a)?, self.untag(b)?)))
    }

    pub fn checked_mul(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.tagged(self.mul(self.untag(a)?, self.untag(b)?)))
    }

    pub fn checked_inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.tagged(self.inv(self.untag(a)?)?))
    }

    pub fn checked_pow(&self, a: FieldElement, e: u64) -> Result<FieldElement, FieldError> {
        Ok(self.tagged(self.pow(self.untag(a)?, e)))
    }

    fn digitwise(&self, a: Fe, b: Fe, op: impl Fn(u32, u32, u32) -> u32) -> Fe {
        let p = self.p;
        let (mut x, mut y) = (a.0, b.0);
        let mut out = 0u32;
        let mut place = 1u32;
        for _ in 0..self.s {
            out += op(x % p, y % p, p) * place;
            x /= p;
            y /= p;
            place = place.wrapping_mul(p);
        }
        Fe(out)
    }

    fn unpack(&self, a: Fe) -> Vec<u32> {
        let mut v = a.0;
        (0..self.s)
            .map(|_| {
                let d = v % self.p;
                v /= self.p;
                d
            })
            .collect()
    }

    fn pack(&self, coeffs: &[u32]) -> Fe {
        Fe(coeffs.iter().rev().fold(0u32, |acc, &c| acc * self.p + c))
    }

    fn poly_mul(&self, a: Fe, b: Fe) -> Fe {
        let prod = poly::mul(&self.unpack(a), &self.unpack(b), self.p);
        let r = poly::rem(&prod, &self.modulus, self.p);
        let mut r = r;
        r.resize(self.s as usize, 0);
        self.pack(&r)
    }

    fn slow_mul(&self, a: Fe, b: Fe) -> Fe {
        match self.s {
            1 => Fe(mul_mod(a.0, b.0, self.p)),
            _ => self.poly_mul(a, b),
        }
    }

    fn slow_pow(&self, a: Fe, mut e: u64) -> Fe {
        let mut base = a;
        let mut acc = Fe::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.slow_mul(acc, base);
            }
            base = self.slow_mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn find_generator(&self) -> Fe {
        let group = self.q as u64 - 1;
        if group == 1 {
            return Fe::ONE;
        }
        (1..self.q)
            .map(Fe)
            .find(|&g| self.group_factors.iter().all(|&f| self.slow_pow(g, group / f) != Fe::ONE))
            .expect("every finite field has a primitive element")
    }

    fn build_tables(&self) -> MulStrategy {
        let q = self.q as usize;
        let mut exp = vec![0u32; 2 * q];
        let mut log = vec![0u32; q];
        let mut x = Fe::ONE;
        for i in 0..q - 1 {
            exp[i] = x.0;
            exp[i + q - 1] = x.0;
            log[x.0 as usize] = i as u32;
            x = self.slow_mul(x, self.generator);
        }
        MulStrategy::Tables { exp, log }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.s == 1 {
            write!(f, "GF({})", self.p)
        } else {
            write!(f, "GF({}^{})", self.p, self.s)
        }
    }
}

/// Parsed form of the `p^s[:modulus-hex]` field string. A bare order such as
/// `16` is accepted as well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub p: u64,
    pub s: u32,
    pub modulus: Option<Vec<u32>>,
}

impl FieldSpec {
    pub fn build(&self) -> Result<Field, FieldError> {
        Field::new(self.p, self.s, self.modulus.as_deref())
    }
}

impl FromStr for FieldSpec {
    type Err = FieldError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || FieldError::BadSpec(text.to_string());
        let text_trim = text.trim();
        let (order_part, modulus_part) = match text_trim.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (text_trim, None),
        };
        let (p, s) = match order_part.split_once('^') {
            Some((p, s)) => (
                p.trim().parse::<u64>().map_err(|_| bad())?,
                s.trim().parse::<u32>().map_err(|_| bad())?,
            ),
            None => {
                let q = order_part.trim().parse::<u64>().map_err(|_| bad())?;
                let (p, s) = prime_power(q).ok_or_else(bad)?;
                (p, s)
            }
        };
        let modulus = match modulus_part {
            None => None,
            Some(hex) => {
                let hex = hex.trim().trim_start_matches("0x");
                let mut packed = u128::from_str_radix(hex, 16).map_err(|_| bad())?;
                if p < 2 {
                    return Err(bad());
                }
                let mut coeffs = Vec::new();
                while packed > 0 {
                    coeffs.push((packed % p as u128) as u32);
                    packed /= p as u128;
                }
                Some(coeffs)
            }
        };
        Ok(FieldSpec { p, s, modulus })
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.p, self.s)?;
        if let Some(m) = &self.modulus {
            let packed = m.iter().rev().fold(0u128, |acc, &c| acc * self.p as u128 + c as u128);
            write!(f, ":{packed:x}")?;
        }
        Ok(())
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Decomposes `q = p^s`, or `None` when `q` is not a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    let factors = prime_factors(q);
    if factors.len() != 1 {
        return None;
    }
    let p = factors[0];
    let mut s = 0;
    let mut r = q;
    while r % p == 0 {
        r /= p;
        s += 1;
    }
    (r == 1).then_some((p, s))
}

/// Distinct prime factors in increasing order.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn trim(mut v: Vec<u32>) -> Vec<u32> {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
    v
}

#[inline]
fn mul_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 * b as u64) % p as u64) as u32
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let mut e = p as u64 - 2;
    let mut base = a as u64 % p as u64;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        e >>= 1;
    }
    acc as u32
}

fn default_modulus(p: u32, s: u32) -> Vec<u32> {
    if s == 1 {
        return vec![0, 1];
    }
    // Monic polynomials of degree s, packed, lie in [p^s, 2 p^s).
    let lo = (p as u64).pow(s);
    (lo..2 * lo)
        .map(|packed| {
            let mut v = packed;
            (0..=s)
                .map(|_| {
                    let d = (v % p as u64) as u32;
                    v /= p as u64;
                    d
                })
                .collect::<Vec<u32>>()
        })
        .find(|m| poly::is_irreducible(m, p))
        .expect("irreducible polynomials exist in every degree")
}

/// Dense polynomials over GF(p), coefficients constant term first.
mod poly {
    use super::{inv_mod, mul_mod, prime_factors};

    fn norm(mut v: Vec<u32>) -> Vec<u32> {
        while v.last() == Some(&0) {
            v.pop();
        }
        v
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        norm(out.into_iter().map(|c| c as u32).collect())
    }

    pub fn rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        let m = norm(m.to_vec());
        let mut r = norm(a.to_vec());
        let dm = m.len() - 1;
        let lead_inv = inv_mod(m[dm], p);
        while r.len() > dm {
            let top = r.len() - 1;
            let c = mul_mod(r[top], lead_inv, p);
            let shift = top - dm;
            for (i, &mc) in m.iter().enumerate() {
                let sub = mul_mod(c, mc, p);
                r[shift + i] = (r[shift + i] + p - sub) % p;
            }
            r = norm(r);
        }
        r
    }

    fn sub(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let len = a.len().max(b.len());
        norm(
            (0..len)
                .map(|i| {
                    let x = a.get(i).copied().unwrap_or(0);
                    let y = b.get(i).copied().unwrap_or(0);
                    (x + p - y) % p
                })
                .collect(),
        )
    }

    fn gcd(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let mut a = norm(a.to_vec());
        let mut b = norm(b.to_vec());
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    /// `x^(p^e) mod m` by repeated p-th powering.
    fn frobenius_power(e: u32, m: &[u32], p: u32) -> Vec<u32> {
        let mut x = rem(&[0, 1], m, p);
        for _ in 0..e {
            x = pow_mod(&x, p as u64, m, p);
        }
        x
    }

    fn pow_mod(a: &[u32], mut e: u64, m: &[u32], p: u32) -> Vec<u32> {
        let mut base = rem(a, m, p);
        let mut acc = vec![1u32];
        while e > 0 {
            if e & 1 == 1 {
                acc = rem(&mul(&acc, &base, p), m, p);
            }
            base = rem(&mul(&base, &base, p), m, p);
            e >>= 1;
        }
        acc
    }

    /// Rabin's irreducibility test for a polynomial of degree >= 1.
    pub fn is_irreducible(m: &[u32], p: u32) -> bool {
        let m = norm(m.to_vec());
        let s = (m.len() - 1) as u32;
        if s == 0 {
            return false;
        }
        if s == 1 {
            return true;
        }
        let x = vec![0u32, 1];
        if sub(&frobenius_power(s, &m, p), &x, p) != Vec::<u32>::new() {
            return false;
        }
        for r in prime_factors(s as u64) {
            let h = sub(&frobenius_power(s / r as u32, &m, p), &x, p);
            let g = gcd(&m, &h, p);
            if g.len() != 1 {
                return false;
            }
        }
        true
    }
}
