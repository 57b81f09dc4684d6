//! Wreath recurrences `x_i = g_i(w_{i,1}, …, w_{i,d})` and their solutions.
//!
//! A system is solved to level ℓ by ℓ rounds of substitution starting from
//! the identity: the level-k value of `x_i` is `g_i` applied over the child
//! words evaluated at the level-(k-1) values. Every round fixes one more
//! level, so the result is the unique solution truncated to level ℓ.
//!
//! Child tuples are read with [`TupleIndexing::Source`] by default, which
//! matches portraits: the j-th child acts below the letter `j` of the input
//! word. Systems written with the other common convention, where the j-th
//! child acts below the letter `j` written by the root label, can be loaded
//! with [`TupleIndexing::Image`]; they are converted on construction.

use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::{Family, ModelParams};
use crate::tree::{Literal, Perm, Portrait, TreeShape};

/// Solutions and other named elements, in declaration order.
pub type Env = IndexMap<String, Portrait>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Name(String),
    /// A fixed element; below its own depth it is extended by identity.
    Element(Portrait),
    Group(GroupWord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub atom: Atom,
    pub exp: i64,
}

/// A product of named generators, literal elements and bracketed
/// sub-words, each raised to an integer power.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupWord {
    pub factors: Vec<Factor>,
}

/// Operations needed to evaluate a word in some target group.
pub trait WordAlgebra {
    type Elem: Clone;
    fn one(&self) -> Self::Elem;
    fn generator(&self, name: &str) -> Result<Self::Elem>;
    fn element(&self, p: &Portrait) -> Result<Self::Elem>;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;

    /// Exponent reduction hook; the default keeps the exponent.
    fn reduce_exponent(&self, _base: &Self::Elem, e: i64) -> i64 {
        e
    }

    fn pow(&self, a: &Self::Elem, e: i64) -> Self::Elem {
        let e = self.reduce_exponent(a, e);
        let mut base = if e < 0 { self.inv(a) } else { a.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }
}

impl GroupWord {
    pub fn identity() -> GroupWord {
        GroupWord::default()
    }

    pub fn name(name: &str) -> GroupWord {
        GroupWord::name_pow(name, 1)
    }

    pub fn name_pow(name: &str, exp: i64) -> GroupWord {
        GroupWord {
            factors: vec![Factor {
                atom: Atom::Name(name.to_string()),
                exp,
            }],
        }
    }

    pub fn element(p: Portrait) -> GroupWord {
        GroupWord {
            factors: vec![Factor {
                atom: Atom::Element(p),
                exp: 1,
            }],
        }
    }

    pub fn is_identity_word(&self) -> bool {
        self.factors.iter().all(|f| f.exp == 0)
    }

    /// `self · other`.
    pub fn then(mut self, other: &GroupWord) -> GroupWord {
        self.factors.extend(other.factors.iter().cloned());
        self
    }

    /// The whole word raised to `exp`, as one bracketed factor.
    pub fn pow(&self, exp: i64) -> GroupWord {
        if exp == 1 {
            return self.clone();
        }
        GroupWord {
            factors: vec![Factor {
                atom: Atom::Group(self.clone()),
                exp,
            }],
        }
    }

    pub fn inverse(&self) -> GroupWord {
        GroupWord {
            factors: self
                .factors
                .iter()
                .rev()
                .map(|f| Factor {
                    atom: f.atom.clone(),
                    exp: -f.exp,
                })
                .collect(),
        }
    }

    pub fn product<'a>(words: impl IntoIterator<Item = &'a GroupWord>) -> GroupWord {
        let mut out = GroupWord::identity();
        for w in words {
            out.factors.extend(w.factors.iter().cloned());
        }
        out
    }

    /// Every generator name mentioned, with repetitions.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for f in &self.factors {
            match &f.atom {
                Atom::Name(n) => out.push(n.as_str()),
                Atom::Group(g) => out.extend(g.names()),
                Atom::Element(_) => {}
            }
        }
        out
    }

    /// Parses `x1*x2^-1*(x1*x2)^3`; `1` is the empty word and `{…}` encloses
    /// an element literal over arity `d`.
    pub fn parse(text: &str, d: usize) -> Result<GroupWord> {
        let mut p = WordParser::new(text, d);
        let w = p.word()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(Error::parse_at(text, p.pos, "unexpected input after word"));
        }
        Ok(w)
    }

    pub fn evaluate<A: WordAlgebra>(&self, alg: &A) -> Result<A::Elem> {
        let mut acc = alg.one();
        for f in &self.factors {
            if f.exp == 0 {
                continue;
            }
            let base = match &f.atom {
                Atom::Name(n) => alg.generator(n)?,
                Atom::Element(p) => alg.element(p)?,
                Atom::Group(g) => g.evaluate(alg)?,
            };
            let val = if f.exp == 1 { base } else { alg.pow(&base, f.exp) };
            acc = alg.mul(&acc, &val);
        }
        Ok(acc)
    }

    /// Signed exponent sum of every generator (the abelianization image).
    pub fn exponent_sums(&self) -> IndexMap<String, i128> {
        let mut out = IndexMap::new();
        self.accumulate_sums(1, &mut out);
        out
    }

    fn accumulate_sums(&self, scale: i128, out: &mut IndexMap<String, i128>) {
        for f in &self.factors {
            let s = scale * f.exp as i128;
            match &f.atom {
                Atom::Name(n) => *out.entry(n.clone()).or_insert(0) += s,
                Atom::Group(g) => g.accumulate_sums(s, out),
                Atom::Element(_) => {}
            }
        }
    }

    /// Replaces every generator name by another name.
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> GroupWord {
        GroupWord {
            factors: self
                .factors
                .iter()
                .map(|x| Factor {
                    atom: match &x.atom {
                        Atom::Name(n) => Atom::Name(f(n)),
                        Atom::Group(g) => Atom::Group(g.rename(f)),
                        Atom::Element(p) => Atom::Element(p.clone()),
                    },
                    exp: x.exp,
                })
                .collect(),
        }
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<&Factor> = self.factors.iter().filter(|x| x.exp != 0).collect();
        if shown.is_empty() {
            return write!(f, "1");
        }
        for (k, x) in shown.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            match &x.atom {
                Atom::Name(n) => write!(f, "{n}")?,
                Atom::Element(p) => write!(f, "{{{p}}}")?,
                Atom::Group(g) => write!(f, "({g})")?,
            }
            if x.exp != 1 {
                write!(f, "^{}", x.exp)?;
            }
        }
        Ok(())
    }
}

/// Evaluates words as portraits at a fixed shape.
pub struct PortraitAlgebra<'a> {
    pub env: &'a Env,
    pub shape: TreeShape,
}

impl WordAlgebra for PortraitAlgebra<'_> {
    type Elem = Portrait;

    fn one(&self) -> Portrait {
        Portrait::identity(self.shape)
    }

    fn generator(&self, name: &str) -> Result<Portrait> {
        let p = self
            .env
            .get(name)
            .ok_or_else(|| Error::UndeclaredName(name.to_string()))?;
        fit_level(p, self.shape)
    }

    fn element(&self, p: &Portrait) -> Result<Portrait> {
        fit_level(p, self.shape)
    }

    fn mul(&self, a: &Portrait, b: &Portrait) -> Portrait {
        a.compose(b).expect("portraits share the evaluation shape")
    }

    fn inv(&self, a: &Portrait) -> Portrait {
        a.inverse()
    }

    fn reduce_exponent(&self, base: &Portrait, e: i64) -> i64 {
        // the exponent of [C_d]^ℓ divides d^ℓ
        if base.is_cyclic() {
            if let Some(m) = (self.shape.d as i64).checked_pow(self.shape.level as u32) {
                return e.rem_euclid(m);
            }
        }
        e
    }
}

fn fit_level(p: &Portrait, shape: TreeShape) -> Result<Portrait> {
    if p.d() != shape.d {
        return Err(Error::ShapeMismatch {
            left: format!("d={}", p.d()),
            right: format!("d={}", shape.d),
        });
    }
    if p.level() >= shape.level {
        p.truncate(shape.level)
    } else {
        p.extend_to(shape.level)
    }
}

/// Evaluates a word with the portraits bound in `env` at `level`.
pub fn eval_word(env: &Env, w: &GroupWord, d: usize, level: usize) -> Result<Portrait> {
    for name in w.names() {
        let p = env
            .get(name)
            .ok_or_else(|| Error::UndeclaredName(name.to_string()))?;
        if p.level() < level {
            return Err(Error::LevelOutOfRange {
                got: level,
                min: 0,
                max: p.level(),
            });
        }
    }
    let shape = TreeShape::new(d, level)?;
    w.evaluate(&PortraitAlgebra { env, shape })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TupleIndexing {
    /// The j-th child acts below input letter j: `u(jw) = g(j) h_j(w)`.
    #[default]
    Source,
    /// The j-th child acts below output letter j: `u(iw) = g(i) h_{g(i)}(w)`.
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub name: String,
    pub root: Perm,
    /// Child words in source indexing.
    pub children: Vec<GroupWord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursionSystem {
    d: usize,
    equations: Vec<Equation>,
}

/// Substitution strategy, used to cross-check uniqueness of solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveOrder {
    /// ℓ rounds, each computing all unknowns one level deeper.
    Rounds,
    /// Full-depth fixed-point iteration updating unknowns in place, last
    /// equation first.
    InPlaceReverse,
}

impl RecursionSystem {
    /// Builds and validates a system. Children given in `Image` indexing are
    /// converted to source indexing.
    pub fn new(d: usize, equations: Vec<Equation>, indexing: TupleIndexing) -> Result<Self> {
        TreeShape::new(d, 0)?;
        let mut seen = IndexMap::new();
        for (k, eq) in equations.iter().enumerate() {
            if seen.insert(eq.name.clone(), k).is_some() {
                return Err(Error::InvalidParams(format!(
                    "`{}` is defined twice",
                    eq.name
                )));
            }
        }
        let mut normalized = Vec::with_capacity(equations.len());
        for eq in equations {
            if eq.root.degree() != d {
                return Err(Error::InvalidPerm(format!(
                    "root label of `{}` does not act on 1..={d}",
                    eq.name
                )));
            }
            if eq.children.len() != d {
                return Err(Error::Arity {
                    expected: d,
                    found: eq.children.len(),
                });
            }
            for w in &eq.children {
                for n in w.names() {
                    if !seen.contains_key(n) {
                        return Err(Error::UndeclaredName(n.to_string()));
                    }
                }
            }
            let children = match indexing {
                TupleIndexing::Source => eq.children,
                TupleIndexing::Image => (0..d)
                    .map(|i| eq.children[eq.root.apply(i)].clone())
                    .collect(),
            };
            normalized.push(Equation {
                name: eq.name,
                root: eq.root,
                children,
            });
        }
        Ok(RecursionSystem {
            d,
            equations: normalized,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn names(&self) -> Vec<&str> {
        self.equations.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn equation(&self, name: &str) -> Option<&Equation> {
        self.equations.iter().find(|e| e.name == name)
    }

    /// Parses the text format: a `d=<int>` header, an optional
    /// `indexing=source|image` line, then equations such as
    /// `x2 = [1,3,2] (x1*x2, 1, 1)`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d: Option<usize> = None;
        let mut indexing = TupleIndexing::Source;
        let mut equations = Vec::new();
        let mut offset = 0usize;
        for raw_line in text.split_inclusive('\n') {
            let line_start = offset;
            offset += raw_line.len();
            let content = raw_line.split('#').next().unwrap_or("");
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let lead = content.len() - content.trim_start().len();
            let at = |k: usize| line_start + lead + k;
            let compact: String = trimmed.chars().filter(|c| !c.is_whitespace()).collect();
            if let Some(v) = compact.strip_prefix("d=") {
                if d.is_some() || !equations.is_empty() {
                    return Err(Error::parse_at(text, at(0), "duplicate or late `d=` header"));
                }
                let value: usize = v
                    .parse()
                    .map_err(|_| Error::parse_at(text, at(2), "expected an integer arity"))?;
                TreeShape::new(value, 0).map_err(|e| Error::parse_at(text, at(2), e.to_string()))?;
                d = Some(value);
                continue;
            }
            if let Some(v) = compact.strip_prefix("indexing=") {
                indexing = match v {
                    "source" => TupleIndexing::Source,
                    "image" => TupleIndexing::Image,
                    _ => {
                        return Err(Error::parse_at(
                            text,
                            at(0),
                            "indexing must be `source` or `image`",
                        ))
                    }
                };
                continue;
            }
            let Some(d) = d else {
                return Err(Error::parse_at(text, at(0), "missing `d=<int>` header"));
            };
            let eq = parse_equation(text, line_start + lead, trimmed, d)?;
            equations.push((eq, line_start + lead));
        }
        let Some(d) = d else {
            return Err(Error::parse_at(text, 0, "missing `d=<int>` header"));
        };
        // report undeclared names at their line
        let declared: Vec<String> = equations.iter().map(|(e, _)| e.name.clone()).collect();
        for (eq, pos) in &equations {
            for w in &eq.children {
                for n in w.names() {
                    if !declared.iter().any(|x| x == n) {
                        return Err(Error::parse_at(
                            text,
                            *pos,
                            format!("undeclared name `{n}`"),
                        ));
                    }
                }
            }
        }
        RecursionSystem::new(d, equations.into_iter().map(|(e, _)| e).collect(), indexing)
    }

    /// Solves to `level` with the given strategy.
    pub fn solve_with(&self, level: usize, order: SolveOrder) -> Result<Env> {
        match order {
            SolveOrder::Rounds => self.solve_rounds(level),
            SolveOrder::InPlaceReverse => self.solve_in_place(level),
        }
    }

    fn solve_rounds(&self, level: usize) -> Result<Env> {
        let mut current: Env = self
            .equations
            .iter()
            .map(|e| (e.name.clone(), Portrait::identity(TreeShape { d: self.d, level: 0 })))
            .collect();
        for k in 1..=level {
            let child_shape = TreeShape::new(self.d, k - 1)?;
            let alg = PortraitAlgebra {
                env: &current,
                shape: child_shape,
            };
            let mut next = Env::new();
            for eq in &self.equations {
                let children = eq
                    .children
                    .iter()
                    .map(|w| w.evaluate(&alg))
                    .collect::<Result<Vec<_>>>()?;
                next.insert(eq.name.clone(), Portrait::assemble(&eq.root, &children)?);
            }
            current = next;
        }
        Ok(current)
    }

    fn solve_in_place(&self, level: usize) -> Result<Env> {
        let shape = TreeShape::new(self.d, level)?;
        let mut current: Env = self
            .equations
            .iter()
            .map(|e| (e.name.clone(), Portrait::identity(shape)))
            .collect();
        if level == 0 {
            return Ok(current);
        }
        let child_shape = shape.with_level(level - 1);
        // each sweep fixes at least one more level
        for _ in 0..=level + 1 {
            let mut changed = false;
            for eq in self.equations.iter().rev() {
                let alg = PortraitAlgebra {
                    env: &current,
                    shape: child_shape,
                };
                let children = eq
                    .children
                    .iter()
                    .map(|w| w.evaluate(&alg))
                    .collect::<Result<Vec<_>>>()?;
                let value = Portrait::assemble(&eq.root, &children)?;
                if current[&eq.name] != value {
                    changed = true;
                    current.insert(eq.name.clone(), value);
                }
            }
            if !changed {
                return Ok(current);
            }
        }
        Err(Error::Arithmetic(
            "in-place substitution failed to stabilize".into(),
        ))
    }

    /// Applies the word `gen` to a leaf word by unfolding the equations
    /// letter by letter, without building portraits of the unknowns.
    pub fn act_by_recursion(&self, gen: &GroupWord, word: &[usize]) -> Result<Vec<usize>> {
        for &digit in word {
            if digit == 0 || digit > self.d {
                return Err(Error::DigitOutOfRange { digit, d: self.d });
            }
        }
        let w: Vec<usize> = word.iter().map(|x| x - 1).collect();
        let out = self.act_word(gen, false, &w)?;
        Ok(out.into_iter().map(|x| x + 1).collect())
    }

    fn act_word(&self, w: &GroupWord, inverted: bool, word: &[usize]) -> Result<Vec<usize>> {
        let mut current = word.to_vec();
        // the rightmost factor acts first; inversion reverses the order
        let factors: Box<dyn Iterator<Item = &Factor>> = if inverted {
            Box::new(w.factors.iter())
        } else {
            Box::new(w.factors.iter().rev())
        };
        for f in factors {
            let negative = (f.exp < 0) != inverted;
            for _ in 0..f.exp.unsigned_abs() {
                current = match &f.atom {
                    Atom::Name(n) => self.act_name(n, negative, &current)?,
                    Atom::Group(g) => self.act_word(g, negative, &current)?,
                    Atom::Element(p) => {
                        let shape = TreeShape::new(self.d, current.len())?;
                        let q = fit_level(p, shape)?;
                        let q = if negative { q.inverse() } else { q };
                        let one_based: Vec<usize> = current.iter().map(|x| x + 1).collect();
                        q.act(&one_based)?.into_iter().map(|x| x - 1).collect()
                    }
                };
            }
        }
        Ok(current)
    }

    fn act_name(&self, name: &str, inverted: bool, word: &[usize]) -> Result<Vec<usize>> {
        if word.is_empty() {
            return Ok(vec![]);
        }
        let eq = self
            .equation(name)
            .ok_or_else(|| Error::UndeclaredName(name.to_string()))?;
        let first = word[0];
        let (out, child) = if inverted {
            let i = eq.root.inverse().apply(first);
            (i, i)
        } else {
            (eq.root.apply(first), first)
        };
        let mut result = vec![out];
        result.extend(self.act_word(&eq.children[child], inverted, &word[1..])?);
        Ok(result)
    }

    /// Replaces the equation of `name` by its conjugate `u · x · u^{-1}`,
    /// splicing the sections of `u` into the child words as literals.
    pub fn conjugate_equation(&self, name: &str, u: &Portrait) -> Result<RecursionSystem> {
        if u.d() != self.d || u.level() == 0 {
            return Err(Error::InvalidParams(
                "conjugator must have the system's arity and level ≥ 1".into(),
            ));
        }
        let idx = self
            .equations
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| Error::UndeclaredName(name.to_string()))?;
        let eq = &self.equations[idx];
        let lit = SymbolicWreath {
            root: u.root_label(),
            children: u
                .sections()?
                .into_iter()
                .map(GroupWord::element)
                .collect(),
        };
        let body = SymbolicWreath {
            root: eq.root.clone(),
            children: eq.children.clone(),
        };
        let conj = lit.mul(&body).mul(&lit.inverse());
        let mut equations = self.equations.clone();
        equations[idx] = Equation {
            name: name.to_string(),
            root: conj.root,
            children: conj.children,
        };
        RecursionSystem::new(self.d, equations, TupleIndexing::Source)
    }
}

/// A level-one wreath element whose sections are words.
#[derive(Debug, Clone)]
struct SymbolicWreath {
    root: Perm,
    children: Vec<GroupWord>,
}

impl SymbolicWreath {
    fn mul(&self, other: &SymbolicWreath) -> SymbolicWreath {
        let root = self.root.compose(&other.root);
        let children = (0..self.root.degree())
            .map(|i| {
                self.children[other.root.apply(i)]
                    .clone()
                    .then(&other.children[i])
            })
            .collect();
        SymbolicWreath { root, children }
    }

    fn inverse(&self) -> SymbolicWreath {
        let inv = self.root.inverse();
        let children = (0..self.root.degree())
            .map(|i| self.children[inv.apply(i)].inverse())
            .collect();
        SymbolicWreath {
            root: inv,
            children,
        }
    }
}

/// Solves by ℓ rounds of substitution from the identity.
pub fn solve(sys: &RecursionSystem, level: usize) -> Result<Env> {
    sys.solve_with(level, SolveOrder::Rounds)
}

fn parse_equation(text: &str, base: usize, line: &str, d: usize) -> Result<Equation> {
    let Some(eq_pos) = line.find('=') else {
        return Err(Error::parse_at(text, base, "expected `name = label (children)`"));
    };
    let name = line[..eq_pos].trim();
    if !is_identifier(name) {
        return Err(Error::parse_at(text, base, format!("invalid name `{name}`")));
    }
    let rhs_start = eq_pos + 1;
    let mut p = WordParser::new(line, d);
    p.pos = rhs_start;
    let lift = |e: Error| match e {
        Error::Parse {
            column, message, ..
        } => Error::parse_at(text, base + column - 1, message),
        other => other,
    };
    let root = p.perm().map_err(lift)?;
    p.skip_ws();
    let children = if p.pos == line.len() {
        vec![GroupWord::identity(); d]
    } else {
        p.expect('(').map_err(lift)?;
        let mut children = Vec::new();
        loop {
            children.push(p.word().map_err(lift)?);
            p.skip_ws();
            match p.peek() {
                Some(',') => p.pos += 1,
                Some(')') => {
                    p.pos += 1;
                    break;
                }
                _ => return Err(lift(Error::parse_at(line, p.pos, "expected `,` or `)`"))),
            }
        }
        p.skip_ws();
        if p.pos != line.len() {
            return Err(lift(Error::parse_at(line, p.pos, "unexpected trailing input")));
        }
        if children.len() != d {
            return Err(Error::parse_at(
                text,
                base + rhs_start,
                format!("expected {d} children, found {}", children.len()),
            ));
        }
        children
    };
    Ok(Equation {
        name: name.to_string(),
        root,
        children,
    })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

struct WordParser<'a> {
    text: &'a str,
    pos: usize,
    d: usize,
}

impl<'a> WordParser<'a> {
    fn new(text: &'a str, d: usize) -> Self {
        WordParser { text, pos: 0, d }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::parse_at(self.text, self.pos, format!("expected `{c}`")))
        }
    }

    /// A root label: `1`, `s`, `s^k` or `[i1,…,id]`.
    fn perm(&mut self) -> Result<Perm> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        let bytes = self.text.as_bytes();
        match self.peek() {
            Some('[') => {
                while end < bytes.len() && bytes[end] != b']' {
                    end += 1;
                }
                end = (end + 1).min(bytes.len());
            }
            Some('s') => {
                end += 1;
                let mut k = end;
                while k < bytes.len() && bytes[k] == b' ' {
                    k += 1;
                }
                if k < bytes.len() && bytes[k] == b'^' {
                    k += 1;
                    while k < bytes.len() && bytes[k] == b' ' {
                        k += 1;
                    }
                    if k < bytes.len() && (bytes[k] == b'-' || bytes[k] == b'+') {
                        k += 1;
                    }
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            Some('1') => end += 1,
            _ => {
                return Err(Error::parse_at(
                    self.text,
                    start,
                    "expected a label `1`, `s`, `s^k` or `[..]`",
                ))
            }
        }
        let lit = Literal::parse(&self.text[start..end], self.d).map_err(|e| match e {
            Error::Parse {
                column, message, ..
            } => Error::parse_at(self.text, start + column - 1, message),
            other => other,
        })?;
        if lit.children.is_some() {
            return Err(Error::parse_at(self.text, start, "unexpected children"));
        }
        self.pos = end;
        Ok(lit.label)
    }

    fn word(&mut self) -> Result<GroupWord> {
        let mut factors = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let atom = match self.peek() {
                Some('(') => {
                    self.pos += 1;
                    let inner = self.word()?;
                    self.expect(')')?;
                    Some(Atom::Group(inner))
                }
                Some('{') => {
                    let close = self.text[self.pos..]
                        .find('}')
                        .map(|k| self.pos + k)
                        .ok_or_else(|| Error::parse_at(self.text, start, "unclosed `{`"))?;
                    let body = &self.text[self.pos + 1..close];
                    let lit = Literal::parse(body, self.d).map_err(|e| match e {
                        Error::Parse {
                            column, message, ..
                        } => Error::parse_at(self.text, start + column, message),
                        other => other,
                    })?;
                    let shape = TreeShape::new(self.d, lit.depth())?;
                    self.pos = close + 1;
                    Some(Atom::Element(lit.to_portrait(shape)?))
                }
                Some('1') => {
                    self.pos += 1;
                    None
                }
                Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                    let mut end = self.pos;
                    for (k, ch) in self.text[self.pos..].char_indices() {
                        if ch.is_ascii_alphanumeric() || ch == '_' || ch == '\'' {
                            end = self.pos + k + ch.len_utf8();
                        } else {
                            break;
                        }
                    }
                    let name = self.text[self.pos..end].to_string();
                    self.pos = end;
                    Some(Atom::Name(name))
                }
                _ => return Err(Error::parse_at(self.text, start, "expected a factor")),
            };
            self.skip_ws();
            let mut exp = 1i64;
            if self.peek() == Some('^') {
                self.pos += 1;
                self.skip_ws();
                let s = self.pos;
                if matches!(self.peek(), Some('-') | Some('+')) {
                    self.pos += 1;
                }
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                exp = self.text[s..self.pos]
                    .parse()
                    .map_err(|_| Error::parse_at(self.text, s, "expected an integer exponent"))?;
            }
            if let Some(atom) = atom {
                factors.push(Factor { atom, exp });
            }
            self.skip_ws();
            if self.peek() == Some('*') {
                self.pos += 1;
                continue;
            }
            break;
        }
        Ok(GroupWord { factors })
    }
}

/// The built-in families of recursively defined elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NamedFamily {
    /// `c = σ(1, …, 1, c)` at arity `d`.
    Odometer { d: usize },
    /// The generators `a_1, …, a_n` or `b_1, …, b_n` of a model group.
    Model(ModelParams),
    /// `a_∞ = a_1 ⋯ a_n` or `b_∞ = b_1 ⋯ b_n`.
    Infinity(ModelParams),
    /// The power conjugator `c_ε` with `ε = 1 + d·e`.
    PowerConjugator { params: ModelParams, e: i64 },
}

/// Generator names of a model group: `a1..an` or `b1..bn`.
pub fn generator_names(p: &ModelParams) -> Vec<String> {
    let letter = match p.family {
        Family::Periodic => 'a',
        Family::Preperiodic { .. } => 'b',
    };
    (1..=p.n).map(|i| format!("{letter}{i}")).collect()
}

/// The defining system of a model group's generators.
pub fn model_system(p: &ModelParams) -> Result<RecursionSystem> {
    p.validate()?;
    let d = p.d;
    let n = p.n;
    let names = generator_names(p);
    let one = GroupWord::identity;
    let mut equations = Vec::with_capacity(n);
    for i in 1..=n {
        let mut children = vec![one(); d];
        let root;
        match p.family {
            Family::Periodic => {
                if i == 1 {
                    root = Perm::sigma(d);
                    children[d - 1] = GroupWord::name(&names[n - 1]);
                } else {
                    root = Perm::identity(d);
                    children[d - 1] = GroupWord::name(&names[i - 2]);
                }
            }
            Family::Preperiodic { m, omega } => {
                if i == 1 {
                    root = Perm::sigma(d);
                } else if i == m + 1 {
                    root = Perm::identity(d);
                    children[omega - 1] = GroupWord::name(&names[n - 1]);
                    children[d - 1] = GroupWord::name(&names[m - 1]);
                } else {
                    root = Perm::identity(d);
                    children[d - 1] = GroupWord::name(&names[i - 2]);
                }
            }
        }
        equations.push(Equation {
            name: names[i - 1].clone(),
            root,
            children,
        });
    }
    RecursionSystem::new(d, equations, TupleIndexing::Source)
}

/// The word `x_1 x_2 ⋯ x_n` in the model generators.
pub fn infinity_word(p: &ModelParams) -> GroupWord {
    let names = generator_names(p);
    GroupWord::product(names.iter().map(|n| GroupWord::name(n)).collect::<Vec<_>>().iter())
}

/// The model system extended by the power conjugator `c`.
///
/// Periodic: `c = a_1^d (1, a_∞^e, …, a_∞^{(d-1)e}) (c, …, c) a_1^{-d}`, and
/// since `a_1^d = (a_n, …, a_n)` the i-th child is `a_n a_∞^{(i-1)e} c a_n^{-1}`.
/// Preperiodic: `c = v (1, b_∞^e, …) (c, …, c) v^{-1}` with
/// `v = (1, …, 1, b_n, …, b_n)`, the first `b_n` in component `ω + 1`.
pub fn power_conjugator_system(p: &ModelParams, e: i64) -> Result<RecursionSystem> {
    let base = model_system(p)?;
    let names = generator_names(p);
    let last = GroupWord::name(&names[p.n - 1]);
    let inf = infinity_word(p);
    let mut equations = base.equations().to_vec();
    let c = GroupWord::name("c");
    let children = (0..p.d)
        .map(|i| {
            let outer = match p.family {
                Family::Periodic => Some(&last),
                Family::Preperiodic { omega, .. } => (i >= omega).then_some(&last),
            };
            let body = inf.pow(i as i64 * e).then(&c);
            match outer {
                Some(x) => x.clone().then(&body).then(&x.inverse()),
                None => body,
            }
        })
        .collect();
    equations.push(Equation {
        name: "c".into(),
        root: Perm::identity(p.d),
        children,
    });
    RecursionSystem::new(p.d, equations, TupleIndexing::Source)
}

/// Emits the portraits of a named family at level `level`.
pub fn builtin(fam: &NamedFamily, level: usize) -> Result<Env> {
    match fam {
        NamedFamily::Odometer { d } => {
            let sys = RecursionSystem::new(
                *d,
                vec![Equation {
                    name: "c".into(),
                    root: Perm::sigma(*d),
                    children: (0..*d)
                        .map(|i| {
                            if i + 1 == *d {
                                GroupWord::name("c")
                            } else {
                                GroupWord::identity()
                            }
                        })
                        .collect(),
                }],
                TupleIndexing::Source,
            )?;
            solve(&sys, level)
        }
        NamedFamily::Model(p) => solve(&model_system(p)?, level),
        NamedFamily::Infinity(p) => {
            let gens = solve(&model_system(p)?, level)?;
            let name = match p.family {
                Family::Periodic => "a_inf",
                Family::Preperiodic { .. } => "b_inf",
            };
            let value = eval_word(&gens, &infinity_word(p), p.d, level)?;
            let mut out = Env::new();
            out.insert(name.to_string(), value);
            Ok(out)
        }
        NamedFamily::PowerConjugator { params, e } => {
            let mut all = solve(&power_conjugator_system(params, *e)?, level)?;
            let c = all.shift_remove("c").expect("c is declared");
            let mut out = Env::new();
            out.insert("c".to_string(), c);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = "# two unknowns over S_3\nd=3\nx1 = s (1, x1, x2)\nx2 = [1,3,2] (x1*x2, 1, 1)\n";

    #[test]
    fn worked_example_in_both_indexings() {
        let src = RecursionSystem::parse(WORKED).unwrap();
        let sol = solve(&src, 5).unwrap();
        assert_eq!(sol["x1"].act(&[2, 1, 1, 3, 1]).unwrap(), vec![3, 2, 1, 3, 1]);
        let img_text = WORKED.replacen("d=3\n", "d=3\nindexing=image\n", 1);
        let img = RecursionSystem::parse(&img_text).unwrap();
        let sol = solve(&img, 5).unwrap();
        assert_eq!(sol["x1"].act(&[2, 1, 1, 3, 1]).unwrap(), vec![3, 1, 2, 1, 1]);
    }

    #[test]
    fn trivial_system_is_identity() {
        let sys = RecursionSystem::parse("d=3\nx = 1(x,x,x)").unwrap();
        for l in 0..4 {
            assert!(solve(&sys, l).unwrap()["x"].is_identity());
        }
    }

    #[test]
    fn odometer_unfolds() {
        let sys = RecursionSystem::parse("d=2\nc = s(1, c)").unwrap();
        assert_eq!(solve(&sys, 3).unwrap()["c"].to_string(), "s(1,s(1,s))");
        let b = builtin(&NamedFamily::Odometer { d: 2 }, 3).unwrap();
        assert_eq!(b["c"].to_string(), "s(1,s(1,s))");
    }

    #[test]
    fn parse_errors_carry_positions() {
        match RecursionSystem::parse("d=2\nx = s(1, y)") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match RecursionSystem::parse("d=2\nx = s(1, x") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, 11);
            }
            other => panic!("{other:?}"),
        }
        assert!(RecursionSystem::parse("x = s(1,x)").is_err());
        assert!(matches!(
            RecursionSystem::parse("d=2\nx = s(1,x,x)"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn word_parse_and_display() {
        let w = GroupWord::parse("a1 * (a1*a2)^-2 * 1 * a2^3", 2).unwrap();
        assert_eq!(w.to_string(), "a1*(a1*a2)^-2*a2^3");
        let sums = w.exponent_sums();
        assert_eq!(sums["a1"], -1);
        assert_eq!(sums["a2"], 1);
        assert!(GroupWord::parse("1", 2).unwrap().is_identity_word());
        let lit = GroupWord::parse("{s(1,s)}^2", 2).unwrap();
        assert_eq!(lit.to_string(), "{s(1,s)}^2");
    }

    #[test]
    fn eval_word_reduces_cyclic_exponents() {
        let p = ModelParams::periodic(2, 2).unwrap();
        let env = solve(&model_system(&p).unwrap(), 3).unwrap();
        let a1 = &env["a1"];
        let w4 = eval_word(&env, &GroupWord::name_pow("a1", 4), 2, 3).unwrap();
        let manual = Portrait::product(a1.shape(), [a1, a1, a1, a1]).unwrap();
        assert_eq!(w4, manual);
        let w9 = eval_word(&env, &GroupWord::name_pow("a1", 9), 2, 3).unwrap();
        assert_eq!(&w9, a1);
        assert!(eval_word(&env, &GroupWord::identity(), 2, 3).unwrap().is_identity());
        assert!(matches!(
            eval_word(&env, &GroupWord::name("zz"), 2, 3),
            Err(Error::UndeclaredName(_))
        ));
    }

    #[test]
    fn model_generators_match_definitions() {
        let p = ModelParams::periodic(2, 1).unwrap();
        let env = builtin(&NamedFamily::Model(p), 2).unwrap();
        assert_eq!(env["a1"].to_string(), "s(1,s)");
        let q = ModelParams::preperiodic(2, 1, 2, 1).unwrap();
        let env = builtin(&NamedFamily::Model(q), 3).unwrap();
        assert_eq!(env["b1"].to_string(), "s");
        assert_eq!(env["b2"].truncate(2).unwrap().to_string(), "1(1,s)");
        assert_eq!(env["b2"].to_string(), "1(1(1,s),s)");
    }

    #[test]
    fn power_conjugator_with_unit_exponent_centralizes() {
        let p = ModelParams::preperiodic(2, 1, 3, 1).unwrap();
        let level = 5;
        let c = builtin(&NamedFamily::PowerConjugator { params: p.clone(), e: 0 }, level).unwrap();
        let b = builtin(&NamedFamily::Infinity(p), level).unwrap();
        let c = &c["c"];
        let binf = &b["b_inf"];
        let lhs = c.compose(binf).unwrap().compose(&c.inverse()).unwrap();
        assert_eq!(&lhs, binf);
    }

    #[test]
    fn recursion_action_matches_portraits() {
        let sys = RecursionSystem::parse(WORKED).unwrap();
        let sol = solve(&sys, 4).unwrap();
        let w = GroupWord::parse("x1*x2^-1*x1^2", 3).unwrap();
        let p = eval_word(&sol, &w, 3, 4).unwrap();
        for a in 1..=3 {
            for b in 1..=3 {
                for c in 1..=3 {
                    for e in 1..=3 {
                        let word = [a, b, c, e];
                        assert_eq!(sys.act_by_recursion(&w, &word).unwrap(), p.act(&word).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn solve_orders_agree() {
        let sys = RecursionSystem::parse(WORKED).unwrap();
        for l in 0..5 {
            assert_eq!(
                sys.solve_with(l, SolveOrder::Rounds).unwrap(),
                sys.solve_with(l, SolveOrder::InPlaceReverse).unwrap()
            );
        }
    }
}
