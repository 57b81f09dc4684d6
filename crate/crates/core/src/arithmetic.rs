//! Exact arithmetic in cyclotomic fields, critical orbits of `a x^d + b`, and
//! constant-field conductors.
//!
//! A [`Cyclotomic`] lives in `ℚ(ζ_N) = ℚ[z] / Φ_N(z)` and is stored as its
//! reduced coefficient vector of length `φ(N)`, which is a canonical form:
//! equal numbers have equal vectors, so hashing and equality are exact.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_case, kappa, CaseTag, ModelParams};

type Poly = Vec<BigRational>;

fn trim(p: &mut Poly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(&mut out);
    out
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Poly {
    let mut out = vec![BigRational::zero(); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] -= y;
    }
    trim(&mut out);
    out
}

/// `(q, r)` with `a = q·b + r` and `deg r < deg b`; `b` must be non-zero.
fn poly_divmod(a: &[BigRational], b: &[BigRational]) -> (Poly, Poly) {
    let mut r: Poly = a.to_vec();
    trim(&mut r);
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    while r.len() > db && !r.is_empty() {
        let k = r.len() - 1 - db;
        let c = &r[r.len() - 1] / &lead;
        for (i, y) in b.iter().enumerate() {
            r[k + i] -= &c * y;
        }
        q[k] = c;
        trim(&mut r);
    }
    trim(&mut q);
    (q, r)
}

/// The cyclotomic polynomial `Φ_n` with integer coefficients.
pub fn cyclotomic_polynomial(n: usize) -> Vec<BigInt> {
    let int = |k: i64| BigRational::from_integer(BigInt::from(k));
    // x^n - 1 divided by Φ_k for the proper divisors k of n
    let mut p: Poly = vec![BigRational::zero(); n + 1];
    p[0] = int(-1);
    p[n] = int(1);
    for k in 1..n {
        if n.is_multiple_of(k) {
            let phi_k: Poly = cyclotomic_polynomial(k)
                .into_iter()
                .map(BigRational::from_integer)
                .collect();
            p = poly_divmod(&p, &phi_k).0;
        }
    }
    p.into_iter().map(|c| c.to_integer()).collect()
}

/// Euler's totient.
pub fn totient(n: usize) -> usize {
    (1..=n).filter(|k| k.gcd(&n) == 1).count()
}

/// An element of `ℚ(ζ_N)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cyclotomic {
    field: usize,
    coeffs: Vec<BigRational>,
}

impl Cyclotomic {
    fn modulus(field: usize) -> Poly {
        cyclotomic_polynomial(field)
            .into_iter()
            .map(BigRational::from_integer)
            .collect()
    }

    fn from_poly(field: usize, p: &[BigRational]) -> Cyclotomic {
        let (_, mut r) = poly_divmod(p, &Self::modulus(field));
        r.resize(totient(field), BigRational::zero());
        Cyclotomic { field, coeffs: r }
    }

    fn check_field(field: usize) -> Result<()> {
        if field == 0 || field > 1024 {
            return Err(Error::Arithmetic(format!(
                "cyclotomic field index {field} outside 1..=1024"
            )));
        }
        Ok(())
    }

    pub fn zero(field: usize) -> Cyclotomic {
        Cyclotomic {
            field,
            coeffs: vec![BigRational::zero(); totient(field)],
        }
    }

    pub fn one(field: usize) -> Cyclotomic {
        Self::from_rational(field, BigRational::one())
    }

    pub fn from_rational(field: usize, q: BigRational) -> Cyclotomic {
        Self::from_poly(field, &[q])
    }

    pub fn from_integer(field: usize, k: i64) -> Cyclotomic {
        Self::from_rational(field, BigRational::from_integer(BigInt::from(k)))
    }

    /// The generator `ζ_N`, the residue class of `z`.
    pub fn zeta(field: usize) -> Cyclotomic {
        Self::from_poly(field, &[BigRational::zero(), BigRational::one()])
    }

    /// `ζ_N^k` for any integer `k`.
    pub fn zeta_pow(field: usize, k: i64) -> Cyclotomic {
        let k = k.rem_euclid(field as i64) as usize;
        let mut p = vec![BigRational::zero(); k + 1];
        p[k] = BigRational::one();
        Self::from_poly(field, &p)
    }

    pub fn field(&self) -> usize {
        self.field
    }

    /// Coefficients of the reduced representative in powers of `ζ_N`.
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    fn same_field(&self, o: &Cyclotomic) -> Result<()> {
        if self.field != o.field {
            return Err(Error::Arithmetic(format!(
                "mixed fields Q(zeta_{}) and Q(zeta_{})",
                self.field, o.field
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &Cyclotomic) -> Result<Cyclotomic> {
        self.same_field(o)?;
        Ok(Cyclotomic {
            field: self.field,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn neg(&self) -> Cyclotomic {
        Cyclotomic {
            field: self.field,
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn sub(&self, o: &Cyclotomic) -> Result<Cyclotomic> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Cyclotomic) -> Result<Cyclotomic> {
        self.same_field(o)?;
        Ok(Self::from_poly(self.field, &poly_mul(&self.coeffs, &o.coeffs)))
    }

    pub fn pow(&self, e: u32) -> Cyclotomic {
        let mut acc = Cyclotomic::one(self.field);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same field");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same field");
            }
        }
        acc
    }

    /// Multiplicative inverse via the extended Euclidean algorithm modulo `Φ_N`.
    pub fn inv(&self) -> Result<Cyclotomic> {
        if self.is_zero() {
            return Err(Error::Arithmetic("division by zero".into()));
        }
        // invariant: s_i · self ≡ r_i mod Φ_N
        let mut r0 = Self::modulus(self.field);
        let mut r1 = self.coeffs.clone();
        trim(&mut r1);
        let mut s0: Poly = Vec::new();
        let mut s1: Poly = vec![BigRational::one()];
        while r1.len() > 1 {
            let (q, r) = poly_divmod(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
        }
        // r1 is a non-zero constant because Φ_N is irreducible
        let c = r1[0].clone();
        let scaled: Poly = s1.iter().map(|x| x / &c).collect();
        Ok(Self::from_poly(self.field, &scaled))
    }

    pub fn div(&self, o: &Cyclotomic) -> Result<Cyclotomic> {
        self.mul(&o.inv()?)
    }

    /// `ω ∈ [0, d)` with `self = ζ_d^ω`, where `ζ_d = ζ_N^{N/d}`.
    pub fn root_of_unity_log(&self, d: usize) -> Result<usize> {
        if d == 0 || !self.field.is_multiple_of(d) {
            return Err(Error::Arithmetic(format!(
                "ζ_{d} is not in Q(ζ_{})",
                self.field
            )));
        }
        let step = (self.field / d) as i64;
        (0..d)
            .find(|&w| *self == Self::zeta_pow(self.field, step * w as i64))
            .ok_or_else(|| Error::Arithmetic(format!("{self} is not a {d}-th root of unity")))
    }

    /// Absolute values under every complex embedding `ζ_N ↦ e^{2πik/N}`,
    /// `gcd(k, N) = 1`, in floating point.
    pub fn embedding_abs(&self) -> Vec<f64> {
        let n = self.field;
        let coeffs: Vec<f64> = self
            .coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::INFINITY))
            .collect();
        (1..=n)
            .filter(|k| k.gcd(&n) == 1)
            .map(|k| {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for (j, c) in coeffs.iter().enumerate() {
                    let angle = 2.0 * std::f64::consts::PI * (k * j % n) as f64 / n as f64;
                    re += c * angle.cos();
                    im += c * angle.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    /// Total bit length of numerators and denominators.
    pub fn bit_size(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| c.numer().bits() + c.denom().bits())
            .sum()
    }

    /// Parses a polynomial in `z` with rational coefficients, e.g.
    /// `1/2*z^2 - 3`, as an element of `ℚ(ζ_N)`.
    pub fn parse(text: &str, field: usize) -> Result<Cyclotomic> {
        Self::check_field(field)?;
        let poly = parse_poly(text)?;
        Ok(Self::from_poly(field, &poly))
    }
}

fn parse_poly(text: &str) -> Result<Poly> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0usize;
    let mut out: Poly = Vec::new();
    let err = |pos: usize, msg: &str| Error::parse_at(text, byte_offset(text, pos), msg.to_string());
    let skip = |pos: &mut usize| {
        while *pos < chars.len() && chars[*pos].is_whitespace() {
            *pos += 1;
        }
    };
    let number = |pos: &mut usize| -> Option<BigInt> {
        let start = *pos;
        while *pos < chars.len() && chars[*pos].is_ascii_digit() {
            *pos += 1;
        }
        (start < *pos).then(|| chars[start..*pos].iter().collect::<String>().parse().unwrap())
    };
    skip(&mut pos);
    if pos == chars.len() {
        return Err(err(pos, "empty expression"));
    }
    let mut first = true;
    while pos < chars.len() {
        let mut sign = BigRational::one();
        skip(&mut pos);
        if pos < chars.len() && (chars[pos] == '+' || chars[pos] == '-') {
            if chars[pos] == '-' {
                sign = -sign;
            }
            pos += 1;
            skip(&mut pos);
        } else if !first {
            return Err(err(pos, "expected '+' or '-'"));
        }
        first = false;
        let mut coeff = sign;
        let mut saw_coeff = false;
        if let Some(num) = number(&mut pos) {
            saw_coeff = true;
            let mut q = BigRational::from_integer(num);
            skip(&mut pos);
            if pos < chars.len() && chars[pos] == '/' {
                pos += 1;
                skip(&mut pos);
                let den = number(&mut pos).ok_or_else(|| err(pos, "expected denominator"))?;
                if den.is_zero() {
                    return Err(err(pos, "zero denominator"));
                }
                q /= BigRational::from_integer(den);
            }
            coeff *= q;
            skip(&mut pos);
            if pos < chars.len() && chars[pos] == '*' {
                pos += 1;
                skip(&mut pos);
                if pos >= chars.len() || chars[pos] != 'z' {
                    return Err(err(pos, "expected 'z' after '*'"));
                }
            }
        }
        let mut degree = 0usize;
        if pos < chars.len() && chars[pos] == 'z' {
            pos += 1;
            degree = 1;
            skip(&mut pos);
            if pos < chars.len() && chars[pos] == '^' {
                pos += 1;
                skip(&mut pos);
                let e = number(&mut pos).ok_or_else(|| err(pos, "expected exponent"))?;
                degree = e
                    .to_usize()
                    .filter(|&e| e <= 4096)
                    .ok_or_else(|| err(pos, "exponent too large"))?;
            }
        } else if !saw_coeff {
            return Err(err(pos, "expected a number or 'z'"));
        }
        if out.len() <= degree {
            out.resize(degree + 1, BigRational::zero());
        }
        out[degree] += coeff;
        skip(&mut pos);
    }
    trim(&mut out);
    Ok(out)
}

fn byte_offset(text: &str, char_pos: usize) -> usize {
    text.char_indices().nth(char_pos).map_or(text.len(), |(i, _)| i)
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let abs = c.abs();
            if wrote {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            } else if c.is_negative() {
                f.write_str("-")?;
            }
            let mono = match k {
                0 => String::new(),
                1 => "z".to_string(),
                _ => format!("z^{k}"),
            };
            if k == 0 {
                f.write_str(&fmt_rational(&abs))?;
            } else if abs.is_one() {
                f.write_str(&mono)?;
            } else {
                write!(f, "{}*{mono}", fmt_rational(&abs))?;
            }
            wrote = true;
        }
        if !wrote {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclotomic[Q(zeta_{})]({self})", self.field)
    }
}

/// Why a classification stopped without finding a repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PciEvidence {
    /// The bound on iterations was reached.
    BoundReached,
    /// Under some complex embedding the iterate at this step exceeded the
    /// escape radius; from there the absolute values at least double, so no
    /// repeat can ever occur.
    Escaped { step: usize },
    /// Coefficients grew past the size limit at this step.
    SizeLimit { step: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum OrbitClassification {
    /// No repeat among the first `bound` iterates. This is not a proof of
    /// post-critical infiniteness unless the evidence is an escape.
    #[serde(rename = "PCIUpToBound")]
    PciUpToBound { bound: usize, evidence: PciEvidence },
    Periodic { n: usize },
    Preperiodic { m: usize, n: usize, omega: usize },
}

impl fmt::Display for OrbitClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitClassification::PciUpToBound { bound, .. } => write!(f, "PCIUpToBound({bound})"),
            OrbitClassification::Periodic { n } => write!(f, "Periodic({n})"),
            OrbitClassification::Preperiodic { m, n, omega } => {
                write!(f, "Preperiodic({m},{n},{omega})")
            }
        }
    }
}

impl OrbitClassification {
    /// Model parameters matching the classification, when it is finite.
    pub fn params(&self, d: usize) -> Option<Result<ModelParams>> {
        match *self {
            OrbitClassification::PciUpToBound { .. } => None,
            OrbitClassification::Periodic { n } => Some(ModelParams::periodic(d, n)),
            OrbitClassification::Preperiodic { m, n, omega } => {
                Some(ModelParams::preperiodic(d, m, n, omega))
            }
        }
    }

    pub fn case_tag(&self, d: usize) -> Result<CaseTag> {
        match self.params(d) {
            None => Ok(CaseTag::Pci),
            Some(p) => classify_case(&p?),
        }
    }
}

/// Bit-size limit for iterates before classification gives up.
pub const ORBIT_SIZE_LIMIT: u64 = 1 << 16;

/// Classifies the orbit of 0 under `f(x) = a x^d + b`.
pub fn classify_orbit(
    d: usize,
    a: &Cyclotomic,
    b: &Cyclotomic,
    bound: usize,
) -> Result<OrbitClassification> {
    a.same_field(b)?;
    if a.is_zero() {
        return Err(Error::Arithmetic("leading coefficient a must be non-zero".into()));
    }
    if d < 2 {
        return Err(Error::InvalidParams(format!("degree d = {d} must be at least 2")));
    }
    if bound == 0 {
        return Err(Error::InvalidParams("bound must be at least 1".into()));
    }
    let field = a.field();
    let radius = escape_radius(a, b);
    let mut seen: HashMap<Cyclotomic, usize> = HashMap::new();
    let mut orbit = vec![Cyclotomic::zero(field)];
    seen.insert(orbit[0].clone(), 0);
    for i in 1..=bound {
        let prev = &orbit[i - 1];
        let next = a.mul(&prev.pow(d as u32))?.add(b)?;
        if let Some(&j) = seen.get(&next) {
            if j == 0 {
                return Ok(OrbitClassification::Periodic { n: i });
            }
            let (m, n) = (j - 1, i - 1);
            let ratio = orbit[n].div(&orbit[m])?;
            let omega = ratio.root_of_unity_log(d).map_err(|_| {
                Error::Arithmetic(format!(
                    "f^{n}(0)/f^{m}(0) = {ratio} is not a {d}-th root of unity"
                ))
            })?;
            return Ok(OrbitClassification::Preperiodic { m, n, omega });
        }
        if next.embedding_abs().iter().any(|&x| x > radius) {
            return Ok(OrbitClassification::PciUpToBound {
                bound,
                evidence: PciEvidence::Escaped { step: i },
            });
        }
        if next.bit_size() > ORBIT_SIZE_LIMIT {
            return Ok(OrbitClassification::PciUpToBound {
                bound,
                evidence: PciEvidence::SizeLimit { step: i },
            });
        }
        seen.insert(next.clone(), i);
        orbit.push(next);
    }
    Ok(OrbitClassification::PciUpToBound {
        bound,
        evidence: PciEvidence::BoundReached,
    })
}

/// A radius `R` such that, in every embedding, `|z| > R` implies
/// `|f(z)| ≥ 2|z|`. Uses `|a| t^d ≥ |a| t^2` for `t ≥ 1` and the positive
/// root of `|a| t^2 − 2t − |b|`, with a generous safety margin for rounding.
fn escape_radius(a: &Cyclotomic, b: &Cyclotomic) -> f64 {
    let amin = a.embedding_abs().into_iter().fold(f64::INFINITY, f64::min);
    let bmax = b.embedding_abs().into_iter().fold(0.0, f64::max);
    let root = (1.0 + (1.0 + amin * bmax).sqrt()) / amin;
    2.0 * root.max(1.0) + 1.0
}

/// A level of the tree, or the whole tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    Finite(usize),
    Infinite,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Level> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Level::Infinite),
            t => t
                .parse::<usize>()
                .ok()
                .filter(|&l| l >= 1)
                .map(Level::Finite)
                .ok_or_else(|| Error::InvalidParams(format!("level `{s}` is not a positive integer or inf"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Conductor {
    Finite(#[serde(serialize_with = "serialize_decimal")] BigUint),
    /// `ζ_{d^∞}`: all `d`-power roots of unity.
    Infinite,
}

fn serialize_decimal<S: serde::Serializer>(n: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(n)
}

impl fmt::Display for Conductor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conductor::Finite(n) => write!(f, "{n}"),
            Conductor::Infinite => f.write_str("inf"),
        }
    }
}

/// The constant field `K(ζ_N)`, or `K(ζ_N + ζ_N^{-1})` when `real_subfield`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstantFieldAnswer {
    pub conductor: Conductor,
    pub real_subfield: bool,
    /// Set when the classification was only "no repeat up to a bound".
    pub conditional_on_pci: bool,
}

impl fmt::Display for ConstantFieldAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.conductor, self.real_subfield) {
            (c, false) => write!(f, "K(zeta_{c})")?,
            (c, true) => write!(f, "K(zeta_{c} + zeta_{c}^-1)")?,
        }
        if self.conditional_on_pci {
            f.write_str(" (conditional on PCI)")?;
        }
        Ok(())
    }
}

/// Conductor of the constant field of the level-`level` preimage tower.
pub fn constant_field_conductor(
    cls: &OrbitClassification,
    d: usize,
    level: Level,
) -> Result<ConstantFieldAnswer> {
    let finite = |n: BigUint, real: bool| ConstantFieldAnswer {
        conductor: Conductor::Finite(n),
        real_subfield: real,
        conditional_on_pci: false,
    };
    let big_d = BigUint::from(d);
    match *cls {
        OrbitClassification::PciUpToBound { evidence, .. } => Ok(ConstantFieldAnswer {
            conductor: Conductor::Finite(big_d),
            real_subfield: false,
            conditional_on_pci: !matches!(evidence, PciEvidence::Escaped { .. }),
        }),
        OrbitClassification::Periodic { n } => match level {
            Level::Infinite => Ok(ConstantFieldAnswer {
                conductor: Conductor::Infinite,
                real_subfield: false,
                conditional_on_pci: false,
            }),
            Level::Finite(l) => Ok(finite(num_traits::pow(big_d, (l - 1) / n + 1), false)),
        },
        OrbitClassification::Preperiodic { m, n, omega } => {
            let p = ModelParams::preperiodic(d, m, n, omega)?;
            if let Level::Finite(l) = level {
                if l <= n {
                    return Ok(finite(big_d, false));
                }
            }
            if classify_case(&p)? == CaseTag::D {
                return Ok(match level {
                    Level::Finite(l) => finite(num_traits::pow(BigUint::from(2u32), l), true),
                    Level::Infinite => ConstantFieldAnswer {
                        conductor: Conductor::Infinite,
                        real_subfield: true,
                        conditional_on_pci: false,
                    },
                });
            }
            let k = BigUint::from(kappa(&p)?);
            Ok(finite(k.lcm(&big_d), false))
        }
    }
}
