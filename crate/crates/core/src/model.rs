//! Model groups `M_per(d, n)` and `M_pre(d, m, n, ω)` at finite level, with
//! their case classification, closed-form invariants, branch subgroups,
//! Heisenberg quotients and stabilizer criteria.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::permgroup::PermGroup;
use crate::recursion::{
    self, eval_word, generator_names, Env, GroupWord, NamedFamily, WordAlgebra,
};
use crate::tree::{bracket, Perm, Portrait, TreeShape, MAX_ARITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    Periodic,
    Preperiodic { m: usize, omega: usize },
}

/// Parameters of a model group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ModelParams {
    pub family: Family,
    pub d: usize,
    pub n: usize,
}

impl ModelParams {
    pub fn periodic(d: usize, n: usize) -> Result<Self> {
        let p = ModelParams {
            family: Family::Periodic,
            d,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn preperiodic(d: usize, m: usize, n: usize, omega: usize) -> Result<Self> {
        let p = ModelParams {
            family: Family::Preperiodic { m, omega },
            d,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(2..=MAX_ARITY).contains(&self.d) {
            return bad(format!("d = {} must lie in 2..={MAX_ARITY}", self.d));
        }
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if let Family::Preperiodic { m, omega } = self.family {
            if m < 1 || m >= self.n {
                return bad(format!("need 1 ≤ m < n, got m = {m}, n = {}", self.n));
            }
            if omega < 1 || omega >= self.d {
                return bad(format!("need 1 ≤ ω < d, got ω = {omega}, d = {}", self.d));
            }
        }
        Ok(())
    }

    /// `(m, ω)` for preperiodic parameters.
    pub fn preperiodic_data(&self) -> Result<(usize, usize)> {
        match self.family {
            Family::Preperiodic { m, omega } => Ok((m, omega)),
            Family::Periodic => Err(Error::InvalidParams(
                "operation needs preperiodic parameters".into(),
            )),
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.family == Family::Periodic
    }

    pub fn generator_names(&self) -> Vec<String> {
        generator_names(self)
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Periodic => write!(f, "per(d={}, n={})", self.d, self.n),
            Family::Preperiodic { m, omega } => {
                write!(f, "pre(d={}, m={m}, n={}, omega={omega})", self.d, self.n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseTag {
    #[serde(rename = "PCI")]
    Pci,
    Periodic,
    A1,
    A2,
    A3,
    B1,
    B2,
    C,
    D,
}

impl CaseTag {
    pub fn is_a(self) -> bool {
        matches!(self, CaseTag::A1 | CaseTag::A2 | CaseTag::A3)
    }

    pub fn is_b(self) -> bool {
        matches!(self, CaseTag::B1 | CaseTag::B2)
    }

    /// Cases whose branch quotient is the Heisenberg group.
    pub fn is_heisenberg(self) -> bool {
        self.is_b() || self == CaseTag::C
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::Pci => "PCI",
            CaseTag::Periodic => "Periodic",
            CaseTag::A1 => "A1",
            CaseTag::A2 => "A2",
            CaseTag::A3 => "A3",
            CaseTag::B1 => "B1",
            CaseTag::B2 => "B2",
            CaseTag::C => "C",
            CaseTag::D => "D",
        };
        f.write_str(s)
    }
}

/// Case of the parameters. A-tags take precedence in the order A1, A2, A3.
pub fn classify_case(p: &ModelParams) -> Result<CaseTag> {
    p.validate()?;
    let Family::Preperiodic { m, omega } = p.family else {
        return Ok(CaseTag::Periodic);
    };
    let (d, n) = (p.d, p.n);
    let half = d % 2 == 0 && 2 * omega == d;
    let tag = if !half {
        CaseTag::A1
    } else if m > 1 && !(d == 2 && n == m + 1) {
        CaseTag::A2
    } else if d == 2 && m > 2 && n == m + 1 {
        CaseTag::A3
    } else if d > 2 && m == 1 {
        CaseTag::B1
    } else if d == 2 && m == 1 && n > 2 {
        CaseTag::B2
    } else if d == 2 && m == 2 && n == 3 {
        CaseTag::C
    } else {
        debug_assert!(d == 2 && m == 1 && n == 2);
        CaseTag::D
    };
    Ok(tag)
}

/// A model group at a fixed level: its generator portraits and chain.
#[derive(Debug, Clone)]
pub struct ModelGroup {
    pub params: ModelParams,
    pub level: usize,
    pub generators: Env,
    pub group: PermGroup,
}

impl ModelGroup {
    pub fn shape(&self) -> TreeShape {
        TreeShape {
            d: self.params.d,
            level: self.level,
        }
    }

    pub fn generator(&self, i: usize) -> &Portrait {
        &self.generators[i - 1]
    }

    /// Evaluates a word over the generator names at this level.
    pub fn eval(&self, w: &GroupWord) -> Result<Portrait> {
        eval_word(&self.generators, w, self.params.d, self.level)
    }
}

pub fn model_group(p: &ModelParams, level: usize) -> Result<ModelGroup> {
    p.validate()?;
    let shape = TreeShape::new(p.d, level)?;
    let generators = recursion::builtin(&NamedFamily::Model(p.clone()), level)?;
    let named: Vec<(String, Portrait)> = generators
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let group = PermGroup::from_portraits(shape, &named)?;
    Ok(ModelGroup {
        params: p.clone(),
        level,
        generators,
        group,
    })
}

/// `[x, y] = x^{-1} y^{-1} x y`.
pub fn commutator(x: &Portrait, y: &Portrait) -> Portrait {
    Portrait::product(x.shape(), [&x.inverse(), &y.inverse(), x, y])
        .expect("commutator factors share a shape")
}

/// Normal generators of the branch subgroup inside the model group.
fn branch_seeds(mg: &ModelGroup, tag: CaseTag) -> Result<Vec<Portrait>> {
    let (m, _) = mg.params.preperiodic_data()?;
    let n = mg.params.n;
    let mut seeds: Vec<Portrait> = (1..=n)
        .filter(|&k| k != m && k != n)
        .map(|k| mg.generator(k).clone())
        .collect();
    let bm = mg.generator(m);
    let bn = mg.generator(n);
    let c = commutator(bm, bn);
    match tag {
        CaseTag::D => return Ok(Vec::new()),
        t if t.is_a() => seeds.push(c),
        _ => {
            seeds.push(commutator(bm, &c));
            seeds.push(commutator(bn, &c));
        }
    }
    Ok(seeds)
}

/// The branch subgroup `𝒩` at the level of `mg`, as a normal closure.
pub fn branch_subgroup_n(mg: &ModelGroup) -> Result<PermGroup> {
    let tag = classify_case(&mg.params)?;
    if tag == CaseTag::Periodic {
        return Err(Error::InvalidParams(
            "the branch subgroup is defined for preperiodic parameters".into(),
        ));
    }
    let seeds = branch_seeds(mg, tag)?;
    mg.group.normal_closure_of_portraits(&seeds)
}

/// `𝒩^d` at `level`: the coordinate embeddings of generators of `𝒩` one
/// level lower. Undefined in case D.
pub fn branch_subgroup_n_power_d(p: &ModelParams, level: usize) -> Result<PermGroup> {
    let tag = classify_case(p)?;
    if tag == CaseTag::D {
        return Err(Error::UndefinedForCase("D".into()));
    }
    if tag == CaseTag::Periodic {
        return Err(Error::InvalidParams(
            "the branch subgroup is defined for preperiodic parameters".into(),
        ));
    }
    if level == 0 {
        return Err(Error::LevelOutOfRange {
            got: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let shape = TreeShape::new(p.d, level)?;
    let below = model_group(p, level - 1)?;
    let n_below = branch_subgroup_n(&below)?;
    let gens = n_below
        .generator_portraits()
        .expect("tree layout has portraits");
    let one = Portrait::identity(shape.with_level(level - 1));
    let mut embedded = Vec::new();
    for (k, g) in gens.iter().enumerate() {
        for i in 0..p.d {
            let mut children = vec![one.clone(); p.d];
            children[i] = g.clone();
            embedded.push((format!("e{}_{}", k + 1, i + 1), Portrait::tuple(&children)?));
        }
    }
    PermGroup::from_portraits(shape, &embedded)
}

/// `(δ, ε)`: the `log_d` of `[M_pre : 𝒩]` and `[M_pre : 𝒩^d]`.
pub fn branch_quotient_logs(p: &ModelParams) -> Result<(u64, u64)> {
    let tag = classify_case(p)?;
    let d = p.d as u64;
    match tag {
        t if t.is_a() => Ok((2, d + 1)),
        t if t.is_b() || t == CaseTag::C => Ok((3, 3 * d / 2 + 1)),
        t => Err(Error::UndefinedForCase(t.to_string())),
    }
}

fn checked(v: Option<i128>) -> Result<i128> {
    v.ok_or_else(|| Error::Arithmetic("closed-form order overflows i128".into()))
}

fn bracket_i128(d: i128, k: u32) -> Result<i128> {
    let mut acc: i128 = 0;
    let mut pow: i128 = 1;
    for _ in 0..k {
        acc = checked(acc.checked_add(pow))?;
        pow = checked(pow.checked_mul(d))?;
    }
    Ok(acc)
}

/// `log_d` of the order of the model group at `level`.
pub fn closed_form_log_order(p: &ModelParams, level: usize) -> Result<i128> {
    let tag = classify_case(p)?;
    let d = p.d as i128;
    let l = level as u32;
    let n = p.n as u32;
    match tag {
        CaseTag::Periodic => {
            let (q, r) = (l / n, l % n);
            let dn = checked(d.checked_pow(n))?;
            let shift = checked(d.checked_pow(r))?;
            let inner = bracket_i128(dn, q)?;
            Ok(bracket_i128(d, l)? - checked(shift.checked_mul(inner))? + q as i128)
        }
        _ if l <= n => bracket_i128(d, l),
        CaseTag::D => Ok(level as i128 + 1),
        CaseTag::C => {
            if l == 4 {
                Ok(13)
            } else {
                Ok(11 * checked(2i128.checked_pow(l - 4))? + 2)
            }
        }
        _ => {
            let (delta, eps) = branch_quotient_logs(p)?;
            let (delta, eps) = (delta as i128, eps as i128);
            let a = bracket_i128(d, l)?;
            let b = checked((eps - 1).checked_mul(bracket_i128(d, l - n)?))?;
            let c = checked(delta.checked_mul(bracket_i128(d, l - n + 1)?))?;
            Ok(a + b - c + delta)
        }
    }
}

/// Hausdorff dimension of the closure of the model group.
pub fn hausdorff_dimension(p: &ModelParams) -> Result<BigRational> {
    let tag = classify_case(p)?;
    let d = BigInt::from(p.d);
    let one = BigRational::one();
    let dn1 = num_traits::pow(d.clone(), p.n - 1);
    let r = |a: BigInt, b: BigInt| BigRational::new(a, b);
    Ok(match tag {
        CaseTag::Periodic => {
            let dn = num_traits::pow(d.clone(), p.n);
            one - r(d - 1, dn - 1)
        }
        t if t.is_a() => one - r(BigInt::one(), dn1),
        t if t.is_b() => one - r(BigInt::from(3), dn1 * 2),
        CaseTag::C => r(BigInt::from(11), BigInt::from(16)),
        _ => BigRational::zero(),
    })
}

/// The conjugacy modulus `κ`: `b_∞` is conjugate to `b_∞^ε` in `M_pre`
/// exactly when `ε ≡ 1 mod κ`.
pub fn kappa(p: &ModelParams) -> Result<u64> {
    let tag = classify_case(p)?;
    let d = p.d as u64;
    match tag {
        CaseTag::D => Err(Error::UndefinedForCase("D".into())),
        CaseTag::Periodic | CaseTag::Pci => Err(Error::InvalidParams(
            "κ is defined for preperiodic parameters".into(),
        )),
        t if t.is_a() => {
            let (m, omega) = p.preperiodic_data()?;
            let omega = omega as u64;
            if m > 1 || d % 2 == 1 {
                Ok(d * d / d.gcd(&omega))
            } else {
                Ok(d * d / d.gcd(&(omega + d / 2)))
            }
        }
        _ => Ok(4 * d),
    }
}

/// The predicted modulus `M` with `c_ε ∈ ρ_ℓ(model) ⟺ ε ≡ 1 mod M` for
/// `ε ≡ 1 mod d`: `d^{⌊(ℓ-1)/n⌋+1}` for periodic parameters, `d` up to level
/// `n` and `κ` above it. Case D at `ℓ > 2` has no such modulus.
///
/// This is the closed-form prediction. Membership computations disagree
/// with it in case B2 (where `ε ≡ -1 mod 8` also occurs) and in case C at
/// level `n + 1` (where the modulus is still 4); see
/// [`conjugate_exponents`] for the computed answer.
pub fn predicted_conjugacy_modulus(p: &ModelParams, level: usize) -> Result<u64> {
    let d = p.d as u64;
    let tag = classify_case(p)?;
    if tag == CaseTag::Periodic {
        let e = (level.max(1) - 1) / p.n + 1;
        return Ok(d.pow(e as u32));
    }
    if level <= p.n {
        return Ok(d);
    }
    kappa(p)
}

/// The power conjugator `c_ε`, `ε = 1 + d·e`, at `level`.
pub fn power_conjugator(p: &ModelParams, e: i64, level: usize) -> Result<Portrait> {
    let env = recursion::builtin(
        &NamedFamily::PowerConjugator {
            params: p.clone(),
            e,
        },
        level,
    )?;
    Ok(env["c"].clone())
}

/// `a_∞` or `b_∞` at `level`.
pub fn infinity_element(p: &ModelParams, level: usize) -> Result<Portrait> {
    let env = recursion::builtin(&NamedFamily::Infinity(p.clone()), level)?;
    Ok(env[0].clone())
}

/// Whether `c_ε` (`ε = 1 + d·e`) lies in the model group at its level.
pub fn power_conjugator_in_group(mg: &ModelGroup, e: i64) -> Result<bool> {
    let c = power_conjugator(&mg.params, e, mg.level)?;
    Ok(mg.group.contains_portrait(&c))
}

/// The exponents `ε = 1 + d·e`, `0 ≤ e < count`, for which `c_ε` lies in the
/// model group, i.e. for which `x_∞` is conjugate to `x_∞^ε` at this level.
pub fn conjugate_exponents(mg: &ModelGroup, count: i64) -> Result<Vec<i64>> {
    let d = mg.params.d as i64;
    let mut out = Vec::new();
    for e in 0..count {
        if power_conjugator_in_group(mg, e)? {
            out.push(1 + d * e);
        }
    }
    Ok(out)
}

/// An element of the Heisenberg group `H_d = ⟨σ⟩ ⋉ (ℤ/d)^2`, written
/// `σ^r (s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Heisenberg {
    pub d: u64,
    pub r: u64,
    pub s: u64,
    pub t: u64,
}

impl Heisenberg {
    pub fn new(d: u64, r: i64, s: i64, t: i64) -> Heisenberg {
        let m = d as i64;
        Heisenberg {
            d,
            r: r.rem_euclid(m) as u64,
            s: s.rem_euclid(m) as u64,
            t: t.rem_euclid(m) as u64,
        }
    }

    pub fn identity(d: u64) -> Heisenberg {
        Heisenberg::new(d, 0, 0, 0)
    }

    /// `g_1 = σ`.
    pub fn g1(d: u64) -> Heisenberg {
        Heisenberg::new(d, 1, 0, 0)
    }

    /// `g_2 = (0, 1)`.
    pub fn g2(d: u64) -> Heisenberg {
        Heisenberg::new(d, 0, 0, 1)
    }

    pub fn mul(&self, o: &Heisenberg) -> Heisenberg {
        let d = self.d;
        Heisenberg {
            d,
            r: (self.r + o.r) % d,
            s: (self.s + o.s + o.r * self.t) % d,
            t: (self.t + o.t) % d,
        }
    }

    pub fn inverse(&self) -> Heisenberg {
        let (d, r, s, t) = (self.d, self.r as i64, self.s as i64, self.t as i64);
        Heisenberg::new(d, -r, r * t - s, -t)
    }

    pub fn pow(&self, e: i64) -> Heisenberg {
        let base = if e < 0 { self.inverse() } else { *self };
        let mut acc = Heisenberg::identity(self.d);
        for _ in 0..e.unsigned_abs() % (self.d * self.d) {
            acc = acc.mul(&base);
        }
        acc
    }

    pub fn commutator(&self, o: &Heisenberg) -> Heisenberg {
        self.inverse().mul(&o.inverse()).mul(self).mul(o)
    }

    /// The involution `τ(σ^r (s, t)) = σ^t (rt − s, r)`.
    pub fn tau(&self) -> Heisenberg {
        let (r, s, t) = (self.r as i64, self.s as i64, self.t as i64);
        Heisenberg::new(self.d, t, r * t - s, r)
    }

    pub fn is_identity(&self) -> bool {
        self.r == 0 && self.s == 0 && self.t == 0
    }

    /// All `d^3` elements.
    pub fn all(d: u64) -> Vec<Heisenberg> {
        let mut out = Vec::with_capacity((d * d * d) as usize);
        for r in 0..d {
            for s in 0..d {
                for t in 0..d {
                    out.push(Heisenberg { d, r, s, t });
                }
            }
        }
        out
    }
}

impl fmt::Display for Heisenberg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s^{}({},{})", self.r, self.s, self.t)
    }
}

/// `ψ_A(u) = (χ_m(u), χ_n(u))`.
pub fn psi_a(u: &Portrait, p: &ModelParams) -> Result<(usize, usize)> {
    let (m, _) = p.preperiodic_data()?;
    if u.level() < p.n {
        return Err(Error::LevelOutOfRange {
            got: u.level(),
            min: p.n,
            max: usize::MAX,
        });
    }
    Ok((u.chi(m)?, u.chi(p.n)?))
}

/// `ψ_B(u) = σ^{−χ_1(u)} (χ'(u), χ_n(u))`, defined when `m = 1`.
pub fn psi_b(u: &Portrait, p: &ModelParams) -> Result<Heisenberg> {
    let (m, _) = p.preperiodic_data()?;
    if m != 1 {
        return Err(Error::InvalidParams("ψ_B needs m = 1".into()));
    }
    if u.level() < p.n {
        return Err(Error::LevelOutOfRange {
            got: u.level(),
            min: p.n,
            max: usize::MAX,
        });
    }
    let d = p.d as i64;
    Ok(Heisenberg::new(
        p.d as u64,
        -(u.chi(1)? as i64),
        u.chi_prime(p.n)? as i64,
        u.chi(p.n)? as i64 % d,
    ))
}

/// Evaluates words in `H_d` with `b_m ↦ g_1`, `b_n ↦ g_2` and every other
/// generator trivial. This is the quotient map onto `M_pre / 𝒩` in cases B
/// and C.
pub struct HeisenbergQuotient {
    d: u64,
    m: usize,
    n: usize,
}

impl HeisenbergQuotient {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let tag = classify_case(p)?;
        if !tag.is_heisenberg() {
            return Err(Error::UndefinedForCase(tag.to_string()));
        }
        let (m, _) = p.preperiodic_data()?;
        Ok(HeisenbergQuotient {
            d: p.d as u64,
            m,
            n: p.n,
        })
    }

    /// Image of the `i`-th generator (1-based).
    pub fn image(&self, i: usize) -> Heisenberg {
        if i == self.m {
            Heisenberg::g1(self.d)
        } else if i == self.n {
            Heisenberg::g2(self.d)
        } else {
            Heisenberg::identity(self.d)
        }
    }
}

impl WordAlgebra for HeisenbergQuotient {
    type Elem = Heisenberg;

    fn one(&self) -> Heisenberg {
        Heisenberg::identity(self.d)
    }

    fn generator(&self, name: &str) -> Result<Heisenberg> {
        let i = parse_generator_index(name, 'b', self.n)?;
        Ok(self.image(i))
    }

    fn element(&self, p: &Portrait) -> Result<Heisenberg> {
        Err(Error::MissingWord(format!("literal {p} has no generator word")))
    }

    fn mul(&self, a: &Heisenberg, b: &Heisenberg) -> Heisenberg {
        a.mul(b)
    }

    fn inv(&self, a: &Heisenberg) -> Heisenberg {
        a.inverse()
    }

    fn reduce_exponent(&self, _base: &Heisenberg, e: i64) -> i64 {
        e.rem_euclid((self.d * self.d) as i64)
    }
}

fn parse_generator_index(name: &str, letter: char, n: usize) -> Result<usize> {
    name.strip_prefix(letter)
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|i| (1..=n).contains(i))
        .ok_or_else(|| Error::UndeclaredName(name.to_string()))
}

/// Signed exponent sums of `a_1, …, a_n` in a word over the periodic
/// generators.
pub fn eta_exponent_sums(word: &GroupWord, p: &ModelParams) -> Result<Vec<i128>> {
    if !p.is_periodic() {
        return Err(Error::InvalidParams("η is defined for periodic parameters".into()));
    }
    if contains_literal(word) {
        return Err(Error::MissingWord("word contains a literal element".into()));
    }
    let mut out = vec![0i128; p.n];
    for (name, e) in word.exponent_sums() {
        let i = parse_generator_index(&name, 'a', p.n)?;
        out[i - 1] += e;
    }
    Ok(out)
}

fn contains_literal(w: &GroupWord) -> bool {
    w.factors.iter().any(|f| match &f.atom {
        recursion::Atom::Element(_) => true,
        recursion::Atom::Group(g) => contains_literal(g),
        recursion::Atom::Name(_) => false,
    })
}

/// One coordinate of an element of the first-level stabilizer.
#[derive(Debug, Clone)]
pub struct Component {
    pub portrait: Portrait,
    pub word: Option<GroupWord>,
}

impl Component {
    pub fn with_word(portrait: Portrait, word: GroupWord) -> Self {
        Component {
            portrait,
            word: Some(word),
        }
    }

    fn word(&self) -> Result<&GroupWord> {
        self.word
            .as_ref()
            .ok_or_else(|| Error::MissingWord(format!("component {} has no word", self.portrait)))
    }
}

/// Decides whether `(g_1, …, g_d)` with every `g_i` in the model group lies
/// in the model group.
///
/// Case A compares `χ_m(g_i)` with `χ_n(g_{i+ω})`. Cases B and C compare
/// `τ(g_i)` with `g_{i+ω}` in `M_pre / 𝒩 ≅ H_d` and need generator words.
/// Case D compares exactly, applying the swap `b_1 ↔ b_2` to the word of
/// `g_i`. The periodic criterion asks for equal `η_n` values, read off the
/// words.
pub fn stabilizer_membership_predicate(p: &ModelParams, comps: &[Component]) -> Result<bool> {
    let tag = classify_case(p)?;
    let d = p.d;
    if comps.len() != d {
        return Err(Error::Arity {
            expected: d,
            found: comps.len(),
        });
    }
    let shape = comps[0].portrait.shape();
    for c in comps {
        if c.portrait.shape() != shape {
            return Err(Error::ShapeMismatch {
                left: format!("level {}", shape.level),
                right: format!("level {}", c.portrait.level()),
            });
        }
    }
    if tag == CaseTag::Periodic {
        let mut values = Vec::with_capacity(d);
        for c in comps {
            values.push(eta_exponent_sums(c.word()?, p)?[p.n - 1]);
        }
        return Ok(values.windows(2).all(|w| w[0] == w[1]));
    }
    let (m, omega) = p.preperiodic_data()?;
    let shift = |i: usize| (i + omega) % d;
    if tag.is_a() {
        for i in 0..d {
            let lhs = comps[i].portrait.chi(m)?;
            let rhs = comps[shift(i)].portrait.chi(p.n)?;
            if lhs != rhs {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    if tag == CaseTag::D {
        let env = recursion::builtin(&NamedFamily::Model(p.clone()), shape.level)?;
        for i in 0..d {
            let swapped = comps[i].word()?.rename(&|x| match x {
                "b1" => "b2".to_string(),
                "b2" => "b1".to_string(),
                other => other.to_string(),
            });
            let lhs = eval_word(&env, &swapped, d, shape.level)?;
            if lhs != comps[shift(i)].portrait {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    let q = HeisenbergQuotient::new(p)?;
    let images = comps
        .iter()
        .map(|c| c.word()?.evaluate(&q))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..d).all(|i| images[i].tau() == images[shift(i)]))
}

/// `ord_ℓ` of the `i`-th generator as `log_d`, from the closed formula.
pub fn generator_log_order(p: &ModelParams, i: usize, level: usize) -> usize {
    if level < i {
        return 0;
    }
    match p.family {
        Family::Periodic => (level - i) / p.n + 1,
        Family::Preperiodic { .. } => 1,
    }
}

/// The expected `χ_level` of the `i`-th generator.
pub fn generator_chi(p: &ModelParams, i: usize, level: usize) -> usize {
    if level < i {
        return 0;
    }
    let hit = match p.family {
        Family::Periodic => (level - i).is_multiple_of(p.n),
        Family::Preperiodic { m, .. } => {
            if i <= m {
                level == i
            } else {
                (level - i).is_multiple_of(p.n - m)
            }
        }
    };
    usize::from(hit)
}

/// `[ℓ]_d` as a convenience for callers comparing against log-orders.
pub fn full_log_order(d: usize, level: usize) -> usize {
    bracket(d, level)
}

/// Conjugates each generator independently by `conj[i]`.
pub fn conjugated_generators(mg: &ModelGroup, conj: &[Portrait]) -> Result<Vec<(String, Portrait)>> {
    if conj.len() != mg.generators.len() {
        return Err(Error::Arity {
            expected: mg.generators.len(),
            found: conj.len(),
        });
    }
    mg.generators
        .iter()
        .zip(conj)
        .map(|((k, g), u)| Ok((k.clone(), g.conjugate_by(u)?)))
        .collect()
}

/// Root label `σ` of the given arity, re-exported for callers that build
/// tuples by hand.
pub fn sigma(d: usize) -> Perm {
    Perm::sigma(d)
}
