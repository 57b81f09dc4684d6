//! Portraits: finite-level automorphisms of the rooted d-ary tree.
//!
//! A portrait of level ℓ stores one permutation of `{1, …, d}` per internal
//! node, in breadth-first order. The node reached by the digit string
//! `i_1 … i_k` sits at index `[k]_d + Σ (i_j - 1) d^{k-j}`, so the root is
//! node 0 and leaves are enumerated lexicographically with digit 1 first.
//!
//! # Product convention
//!
//! `compose(u, v)` is the map `w ↦ u(v(w))`: the right factor acts first.
//! Writing `u = g(h_1, …, h_d)` for the root label `g` and the sections
//! `h_i`, an element acts by `u(i w') = g(i) h_i(w')`, and products obey
//! `g(h) · g'(h') = gg'(h_{g'(1)} h'_1, …, h_{g'(d)} h'_d)`.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::perm::Permutation;

/// Largest supported arity. Labels are stored as bytes.
pub const MAX_ARITY: usize = 16;

/// `[k]_d = 1 + d + … + d^{k-1}`.
pub fn bracket(d: usize, k: usize) -> usize {
    let mut total = 0usize;
    let mut p = 1usize;
    for _ in 0..k {
        total += p;
        p *= d;
    }
    total
}

/// `[k]_d` as an arbitrary-precision integer.
pub fn bracket_big(d: u64, k: u64) -> BigUint {
    let mut total = BigUint::zero();
    let mut p = BigUint::one();
    for _ in 0..k {
        total += &p;
        p *= d;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeShape {
    pub d: usize,
    pub level: usize,
}

impl TreeShape {
    pub fn new(d: usize, level: usize) -> Result<Self> {
        if !(2..=MAX_ARITY).contains(&d) {
            return Err(Error::InvalidShape(format!(
                "arity {d} outside 2..={MAX_ARITY}"
            )));
        }
        if level > 24 || (d as f64).powi(level as i32) > 1e7 {
            return Err(Error::InvalidShape(format!(
                "d={d}, level={level} is too large to store densely"
            )));
        }
        Ok(TreeShape { d, level })
    }

    /// Number of internal nodes, `[ℓ]_d`.
    pub fn node_count(&self) -> usize {
        bracket(self.d, self.level)
    }

    /// Number of leaves, `d^ℓ`.
    pub fn leaf_count(&self) -> usize {
        self.d.pow(self.level as u32)
    }

    /// Index of the first node at depth `k`.
    pub fn depth_start(&self, k: usize) -> usize {
        bracket(self.d, k)
    }

    pub fn with_level(&self, level: usize) -> TreeShape {
        TreeShape { d: self.d, level }
    }

    fn check_same(&self, other: &TreeShape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                left: format!("d={}, level={}", self.d, self.level),
                right: format!("d={}, level={}", other.d, other.level),
            });
        }
        Ok(())
    }
}

/// An element of `S_d`, stored with 0-based images.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm {
    images: Vec<u8>,
}

impl Perm {
    pub fn identity(d: usize) -> Perm {
        Perm {
            images: (0..d as u8).collect(),
        }
    }

    /// The standard d-cycle `σ = (1 2 … d)`.
    pub fn sigma(d: usize) -> Perm {
        Perm::sigma_pow(d, 1)
    }

    /// `σ^k`; any integer exponent is accepted.
    pub fn sigma_pow(d: usize, k: i64) -> Perm {
        let k = k.rem_euclid(d as i64) as usize;
        Perm {
            images: (0..d).map(|i| ((i + k) % d) as u8).collect(),
        }
    }

    /// From 1-based images, e.g. `[1, 3, 2]` for the transposition `(2 3)`.
    pub fn from_one_based(images: &[usize]) -> Result<Perm> {
        let d = images.len();
        let mut seen = vec![false; d];
        let mut out = Vec::with_capacity(d);
        for &x in images {
            if x == 0 || x > d || seen[x - 1] {
                return Err(Error::InvalidPerm(format!(
                    "{images:?} is not a permutation of 1..={d}"
                )));
            }
            seen[x - 1] = true;
            out.push((x - 1) as u8);
        }
        Ok(Perm { images: out })
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// Image of a 0-based point.
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.images.iter().map(|&x| x as usize + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Perm) -> Perm {
        Perm {
            images: other.images.iter().map(|&x| self.images[x as usize]).collect(),
        }
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u8; self.images.len()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x as usize] = i as u8;
        }
        Perm { images: inv }
    }

    /// `a^{-1} self a`.
    pub fn conjugate_by(&self, a: &Perm) -> Perm {
        a.inverse().compose(self).compose(a)
    }

    /// The exponent `j` with `self = σ^j`, if `self` lies in `C_d`.
    pub fn sigma_exponent(&self) -> Option<usize> {
        let d = self.images.len();
        let j = self.images[0] as usize;
        (0..d)
            .all(|i| self.images[i] as usize == (i + j) % d)
            .then_some(j)
    }

    pub fn is_cyclic(&self) -> bool {
        self.sigma_exponent().is_some()
    }

    /// Orbits as sorted lists of 0-based points, ordered by least element.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let d = self.degree();
        let mut seen = vec![false; d];
        let mut out = Vec::new();
        for s in 0..d {
            if seen[s] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                orbit.push(x);
                x = self.apply(x);
            }
            out.push(orbit);
        }
        out
    }

    /// All elements of `S_d` in lexicographic order of their image lists.
    pub fn all(d: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut current: Vec<u8> = (0..d as u8).collect();
        loop {
            out.push(Perm {
                images: current.clone(),
            });
            // next lexicographic permutation
            let Some(i) = (0..d.saturating_sub(1))
                .rev()
                .find(|&i| current[i] < current[i + 1])
            else {
                break;
            };
            let j = (i + 1..d).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
        }
        out
    }

    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Perm {
        let mut images: Vec<u8> = (0..d as u8).collect();
        for i in (1..d).rev() {
            let j = rng.gen_range(0..=i);
            images.swap(i, j);
        }
        Perm { images }
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sigma_exponent() {
            Some(0) => write!(f, "1"),
            Some(1) => write!(f, "s"),
            Some(j) => write!(f, "s^{j}"),
            None => {
                write!(f, "[")?;
                for (k, x) in self.one_based().iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// A level-ℓ tree automorphism with one `S_d` label per internal node.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Portrait {
    shape: TreeShape,
    /// `node_count * d` images, node-major.
    labels: Vec<u8>,
    cyclic: bool,
}

impl Portrait {
    pub fn identity(shape: TreeShape) -> Portrait {
        let d = shape.d;
        let mut labels = Vec::with_capacity(shape.node_count() * d);
        for _ in 0..shape.node_count() {
            labels.extend(0..d as u8);
        }
        Portrait {
            shape,
            labels,
            cyclic: true,
        }
    }

    /// Builds a portrait from one label per node in breadth-first order.
    pub fn from_labels(shape: TreeShape, labels: &[Perm]) -> Result<Portrait> {
        if labels.len() != shape.node_count() {
            return Err(Error::InvalidShape(format!(
                "expected {} labels, found {}",
                shape.node_count(),
                labels.len()
            )));
        }
        let mut flat = Vec::with_capacity(labels.len() * shape.d);
        for p in labels {
            if p.degree() != shape.d {
                return Err(Error::InvalidPerm(format!(
                    "label {p} does not act on 1..={}",
                    shape.d
                )));
            }
            flat.extend_from_slice(&p.images);
        }
        Ok(Portrait::from_flat(shape, flat))
    }

    fn from_flat(shape: TreeShape, labels: Vec<u8>) -> Portrait {
        let d = shape.d;
        let cyclic = labels.chunks(d).all(|c| {
            let j = c[0] as usize;
            c.iter().enumerate().all(|(i, &x)| x as usize == (i + j) % d)
        });
        Portrait {
            shape,
            labels,
            cyclic,
        }
    }

    /// `root(children[0], …, children[d-1])`; the result is one level deeper.
    pub fn assemble(root: &Perm, children: &[Portrait]) -> Result<Portrait> {
        let d = root.degree();
        if children.len() != d {
            return Err(Error::Arity {
                expected: d,
                found: children.len(),
            });
        }
        let child_shape = children[0].shape;
        for c in children {
            child_shape.check_same(&c.shape)?;
        }
        if child_shape.d != d {
            return Err(Error::InvalidPerm(format!(
                "root label acts on {d} points but children have arity {}",
                child_shape.d
            )));
        }
        let shape = TreeShape::new(d, child_shape.level + 1)?;
        let mut labels = Vec::with_capacity(shape.node_count() * d);
        labels.extend_from_slice(&root.images);
        let mut width = 1usize;
        for k in 0..child_shape.level {
            let start = child_shape.depth_start(k) * d;
            for c in children {
                labels.extend_from_slice(&c.labels[start..start + width * d]);
            }
            width *= d;
        }
        Ok(Portrait::from_flat(shape, labels))
    }

    /// The element `(h_1, …, h_d)` with identity root label.
    pub fn tuple(children: &[Portrait]) -> Result<Portrait> {
        let d = children
            .first()
            .map(|c| c.shape.d)
            .ok_or_else(|| Error::InvalidShape("empty tuple".into()))?;
        Portrait::assemble(&Perm::identity(d), children)
    }

    /// A portrait whose only non-trivial label is `p` at the root.
    pub fn rooted(shape: TreeShape, p: &Perm) -> Result<Portrait> {
        if p.degree() != shape.d {
            return Err(Error::InvalidPerm(format!("{p} has wrong degree")));
        }
        let mut u = Portrait::identity(shape);
        if shape.level > 0 {
            u.labels[..shape.d].copy_from_slice(&p.images);
            u.cyclic = p.is_cyclic();
        }
        Ok(u)
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn d(&self) -> usize {
        self.shape.d
    }

    pub fn level(&self) -> usize {
        self.shape.level
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn is_identity(&self) -> bool {
        let d = self.shape.d;
        self.labels
            .chunks(d)
            .all(|c| c.iter().enumerate().all(|(i, &x)| i == x as usize))
    }

    /// Label at a breadth-first node index.
    pub fn label(&self, node: usize) -> Perm {
        let d = self.shape.d;
        Perm {
            images: self.labels[node * d..(node + 1) * d].to_vec(),
        }
    }

    #[inline]
    fn lab(&self, node: usize, i: usize) -> usize {
        self.labels[node * self.shape.d + i] as usize
    }

    pub fn root_label(&self) -> Perm {
        if self.shape.level == 0 {
            Perm::identity(self.shape.d)
        } else {
            self.label(0)
        }
    }

    /// All labels in breadth-first order.
    pub fn labels(&self) -> Vec<Perm> {
        (0..self.shape.node_count()).map(|x| self.label(x)).collect()
    }

    /// Images of every vertex at depths `0..=ℓ` (leaves included), as
    /// breadth-first indices.
    pub fn vertex_images(&self) -> Vec<usize> {
        let d = self.shape.d;
        let total = bracket(d, self.shape.level + 1);
        let mut img = vec![0usize; total];
        let mut width = 1usize;
        for k in 0..self.shape.level {
            let s = bracket(d, k);
            let s_next = s + width;
            for o in 0..width {
                let x = s + o;
                let ix = img[x] - s;
                for i in 0..d {
                    img[s_next + o * d + i] = s_next + ix * d + self.lab(x, i);
                }
            }
            width *= d;
        }
        img
    }

    /// Images of internal nodes only.
    fn node_images(&self) -> Vec<usize> {
        let mut v = self.vertex_images();
        v.truncate(self.shape.node_count());
        v
    }

    /// `u ∘ v`: the right factor acts first.
    pub fn compose(&self, other: &Portrait) -> Result<Portrait> {
        self.shape.check_same(&other.shape)?;
        Ok(self.compose_unchecked(other))
    }

    pub(crate) fn compose_unchecked(&self, other: &Portrait) -> Portrait {
        let d = self.shape.d;
        let vimg = other.node_images();
        let mut labels = vec![0u8; self.labels.len()];
        for (x, &vx) in vimg.iter().enumerate() {
            for i in 0..d {
                labels[x * d + i] = self.labels[vx * d + other.lab(x, i)];
            }
        }
        if self.cyclic && other.cyclic {
            Portrait {
                shape: self.shape,
                labels,
                cyclic: true,
            }
        } else {
            Portrait::from_flat(self.shape, labels)
        }
    }

    /// Product of several portraits of one shape, leftmost factor outermost.
    pub fn product<'a, I>(shape: TreeShape, factors: I) -> Result<Portrait>
    where
        I: IntoIterator<Item = &'a Portrait>,
    {
        let mut acc = Portrait::identity(shape);
        for f in factors {
            acc = acc.compose(f)?;
        }
        Ok(acc)
    }

    pub fn inverse(&self) -> Portrait {
        let d = self.shape.d;
        let img = self.node_images();
        let mut labels = vec![0u8; self.labels.len()];
        for (x, &ux) in img.iter().enumerate() {
            for i in 0..d {
                labels[ux * d + self.lab(x, i)] = i as u8;
            }
        }
        Portrait {
            shape: self.shape,
            labels,
            cyclic: self.cyclic,
        }
    }

    /// `w^{-1} self w`.
    pub fn conjugate_by(&self, w: &Portrait) -> Result<Portrait> {
        w.inverse().compose(self)?.compose(w)
    }

    /// Integer power; negative exponents invert first. The exponent is
    /// reduced modulo the element order only implicitly through repeated
    /// squaring, so any `i64` is accepted.
    pub fn pow(&self, e: i64) -> Portrait {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = Portrait::identity(self.shape);
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose_unchecked(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.compose_unchecked(&b);
            }
        }
        acc
    }

    /// Image of a word of 1-based digits of length at most ℓ.
    pub fn act(&self, word: &[usize]) -> Result<Vec<usize>> {
        let d = self.shape.d;
        if word.len() > self.shape.level {
            return Err(Error::LevelOutOfRange {
                got: word.len(),
                min: 0,
                max: self.shape.level,
            });
        }
        let mut out = Vec::with_capacity(word.len());
        let mut x = 0usize;
        let mut width_start = 0usize;
        let mut offset = 0usize;
        for (k, &digit) in word.iter().enumerate() {
            if digit == 0 || digit > d {
                return Err(Error::DigitOutOfRange { digit, d });
            }
            let i = digit - 1;
            out.push(self.lab(x, i) + 1);
            // move to the source child
            width_start += d.pow(k as u32);
            offset = offset * d + i;
            x = width_start + offset;
        }
        Ok(out)
    }

    /// The action on the `d^ℓ` leaves, enumerated lexicographically.
    pub fn leaf_permutation(&self) -> Permutation {
        let img = self.vertex_images();
        let s = self.shape.node_count();
        let images = img[s..].iter().map(|&x| (x - s) as u32).collect();
        Permutation::from_images_unchecked(images)
    }

    /// The action on all non-root vertices, indexed breadth-first from 0
    /// (vertex `v` of the tree is point `v - 1`).
    pub fn vertex_permutation(&self) -> Permutation {
        let img = self.vertex_images();
        Permutation::from_images_unchecked(img[1..].iter().map(|&x| (x - 1) as u32).collect())
    }

    /// Recovers the portrait acting on leaves as `perm`, if `perm` preserves
    /// the tree structure.
    pub fn from_leaf_permutation(shape: TreeShape, perm: &Permutation) -> Option<Portrait> {
        if perm.degree() != shape.leaf_count() {
            return None;
        }
        let d = shape.d;
        let l = shape.level;
        let mut labels = Vec::with_capacity(shape.node_count() * d);
        let mut width = 1usize;
        for k in 0..l {
            let below = d.pow((l - k - 1) as u32);
            for o in 0..width {
                for i in 0..d {
                    let leaf = (o * d + i) * below;
                    let image = perm.apply(leaf);
                    labels.push(((image / below) % d) as u8);
                }
            }
            width *= d;
        }
        let u = Portrait::from_flat(shape, labels);
        let labels_ok = u.labels.chunks(d).all(|c| {
            let mut seen = vec![false; d];
            c.iter().all(|&x| !std::mem::replace(&mut seen[x as usize], true))
        });
        (labels_ok && u.leaf_permutation() == *perm).then_some(u)
    }

    /// Recovers the portrait from its action on non-root vertices.
    pub fn from_vertex_permutation(shape: TreeShape, perm: &Permutation) -> Option<Portrait> {
        let leaves = shape.leaf_count();
        let s = shape.node_count();
        if perm.degree() + 1 != s + leaves {
            return None;
        }
        let offset = s - 1;
        let images = (0..leaves)
            .map(|x| perm.apply(offset + x).checked_sub(offset).map(|v| v as u32))
            .collect::<Option<Vec<u32>>>()?;
        let leaf_perm = Permutation::from_images(images).ok()?;
        let u = Portrait::from_leaf_permutation(shape, &leaf_perm)?;
        (u.vertex_permutation() == *perm).then_some(u)
    }

    /// Order as a permutation of the leaves.
    pub fn order(&self) -> BigUint {
        if self.shape.level == 0 {
            return BigUint::one();
        }
        self.leaf_permutation()
            .cycle_lengths()
            .into_iter()
            .fold(BigUint::one(), |acc, len| acc.lcm(&BigUint::from(len)))
    }

    /// `ρ_k`: forget everything below depth `k`.
    pub fn truncate(&self, k: usize) -> Result<Portrait> {
        if k > self.shape.level {
            return Err(Error::LevelOutOfRange {
                got: k,
                min: 0,
                max: self.shape.level,
            });
        }
        let shape = self.shape.with_level(k);
        let labels = self.labels[..shape.node_count() * shape.d].to_vec();
        Ok(Portrait::from_flat(shape, labels))
    }

    /// The section `h_i` at the 1-based child `i`; one level shallower.
    pub fn section(&self, i: usize) -> Result<Portrait> {
        let d = self.shape.d;
        if i == 0 || i > d {
            return Err(Error::DigitOutOfRange { digit: i, d });
        }
        if self.shape.level == 0 {
            return Err(Error::LevelOutOfRange {
                got: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        let shape = self.shape.with_level(self.shape.level - 1);
        let mut labels = Vec::with_capacity(shape.node_count() * d);
        let mut width = 1usize;
        for k in 1..self.shape.level {
            let s = bracket(d, k);
            let lo = s + (i - 1) * width;
            labels.extend_from_slice(&self.labels[lo * d..(lo + width) * d]);
            width *= d;
        }
        Ok(Portrait::from_flat(shape, labels))
    }

    /// All `d` sections at level one.
    pub fn sections(&self) -> Result<Vec<Portrait>> {
        (1..=self.shape.d).map(|i| self.section(i)).collect()
    }

    /// Extends by identity labels down to `level`.
    pub fn extend_to(&self, level: usize) -> Result<Portrait> {
        if level < self.shape.level {
            return self.truncate(level);
        }
        let shape = TreeShape::new(self.shape.d, level)?;
        let mut out = Portrait::identity(shape);
        out.labels[..self.labels.len()].copy_from_slice(&self.labels);
        out.cyclic = self.cyclic;
        Ok(out)
    }

    /// Sum of σ-exponents over the labels at depth `k - 1`, mod d.
    pub fn chi(&self, k: usize) -> Result<usize> {
        if !self.cyclic {
            return Err(Error::NotCyclic);
        }
        if k == 0 || k > self.shape.level {
            return Err(Error::LevelOutOfRange {
                got: k,
                min: 1,
                max: self.shape.level,
            });
        }
        Ok(self.exponent_sum_at_depth(k - 1, 0, self.shape.d.pow((k - 1) as u32)))
    }

    fn exponent_sum_at_depth(&self, depth: usize, lo: usize, width: usize) -> usize {
        let d = self.shape.d;
        let s = bracket(d, depth);
        (s + lo..s + lo + width)
            .map(|x| self.lab(x, 0))
            .sum::<usize>()
            % d
    }

    /// `(χ_1(u), …, χ_ℓ(u))`.
    pub fn chi_vector(&self) -> Result<Vec<usize>> {
        (1..=self.shape.level).map(|k| self.chi(k)).collect()
    }

    /// `χ'(u) = Σ_i i·χ_{n-1}(h_i)` over the level-one sections.
    pub fn chi_prime(&self, n: usize) -> Result<usize> {
        if !self.cyclic {
            return Err(Error::NotCyclic);
        }
        if n < 2 || n > self.shape.level {
            return Err(Error::LevelOutOfRange {
                got: n,
                min: 2,
                max: self.shape.level,
            });
        }
        let d = self.shape.d;
        // χ_{n-1}(h_i) sums labels at absolute depth n-1 inside subtree i
        let width = d.pow((n - 2) as u32);
        let mut total = 0usize;
        for i in 1..=d {
            let chi_i = self.exponent_sum_at_depth(n - 1, (i - 1) * width, width);
            total += i * chi_i;
        }
        Ok(total % d)
    }

    pub fn random_cyclic<R: Rng + ?Sized>(shape: TreeShape, rng: &mut R) -> Portrait {
        let labels: Vec<Perm> = (0..shape.node_count())
            .map(|_| Perm::sigma_pow(shape.d, rng.gen_range(0..shape.d as i64)))
            .collect();
        Portrait::from_labels(shape, &labels).expect("shape-consistent labels")
    }

    pub fn random_full<R: Rng + ?Sized>(shape: TreeShape, rng: &mut R) -> Portrait {
        let labels: Vec<Perm> = (0..shape.node_count())
            .map(|_| Perm::random(shape.d, rng))
            .collect();
        Portrait::from_labels(shape, &labels).expect("shape-consistent labels")
    }

    /// Every element of `[C_d]^ℓ` (if `cyclic`) or `[S_d]^ℓ`, refusing to
    /// enumerate more than `cap` elements.
    pub fn enumerate(shape: TreeShape, cyclic: bool, cap: u64) -> Result<Vec<Portrait>> {
        let alphabet = if cyclic {
            (0..shape.d as i64)
                .map(|j| Perm::sigma_pow(shape.d, j))
                .collect()
        } else {
            Perm::all(shape.d)
        };
        let nodes = shape.node_count();
        let size = BigUint::from(alphabet.len()).pow(nodes as u32);
        if size > BigUint::from(cap) {
            return Err(Error::CapExceeded {
                size: size.to_string(),
                cap,
            });
        }
        let count: usize = size.try_into().expect("below cap");
        let mut out = Vec::with_capacity(count);
        let mut digits = vec![0usize; nodes];
        for _ in 0..count {
            let labels: Vec<Perm> = digits.iter().map(|&k| alphabet[k].clone()).collect();
            out.push(Portrait::from_labels(shape, &labels)?);
            for slot in digits.iter_mut().rev() {
                *slot += 1;
                if *slot < alphabet.len() {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(out)
    }

    /// Parses an element literal such as `s(1,s(1,s))` at the given shape.
    pub fn parse(text: &str, shape: TreeShape) -> Result<Portrait> {
        let lit = Literal::parse(text, shape.d)?;
        lit.to_portrait(shape)
    }

    /// The standard odometer `c_∞ = σ(1, …, 1, c_∞)` truncated to `shape`.
    pub fn odometer(shape: TreeShape) -> Portrait {
        let d = shape.d;
        let sigma = Perm::sigma(d);
        let mut labels = vec![Perm::identity(d); shape.node_count()];
        // the rightmost node at each depth carries σ
        for k in 0..shape.level {
            let last = bracket(d, k + 1) - 1;
            labels[last] = sigma.clone();
        }
        Portrait::from_labels(shape, &labels).expect("valid odometer labels")
    }

    /// Deterministic text key, used for memo tables.
    pub fn key(&self) -> Vec<u8> {
        let mut k = Vec::with_capacity(self.labels.len() + 2);
        k.push(self.shape.d as u8);
        k.push(self.shape.level as u8);
        k.extend_from_slice(&self.labels);
        k
    }
}

impl fmt::Debug for Portrait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Portrait[d={}, ℓ={}] {}", self.shape.d, self.shape.level, self)
    }
}

impl fmt::Display for Portrait {
    /// Canonical literal: identity subtrees collapse to `1`, and a node whose
    /// subtrees are all trivial prints as its bare label.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.shape.d;
        let l = self.shape.level;
        // trivial[x] for internal node x: its whole subtree is identity
        let n = self.shape.node_count();
        let mut trivial = vec![true; n];
        let mut width = d.pow(l.saturating_sub(1) as u32);
        for k in (0..l).rev() {
            let s = bracket(d, k);
            for o in 0..width {
                let x = s + o;
                let mut t = self.labels[x * d..(x + 1) * d]
                    .iter()
                    .enumerate()
                    .all(|(i, &y)| i == y as usize);
                if k + 1 < l {
                    let cs = bracket(d, k + 1) + o * d;
                    t = t && (cs..cs + d).all(|c| trivial[c]);
                }
                trivial[x] = t;
            }
            width /= d;
        }
        fn write_node(
            u: &Portrait,
            trivial: &[bool],
            x: usize,
            k: usize,
            o: usize,
            f: &mut fmt::Formatter<'_>,
        ) -> fmt::Result {
            let d = u.shape.d;
            if trivial[x] {
                return write!(f, "1");
            }
            write!(f, "{}", u.label(x))?;
            if k + 1 < u.shape.level {
                let cs = bracket(d, k + 1) + o * d;
                if (cs..cs + d).any(|c| !trivial[c]) {
                    write!(f, "(")?;
                    for i in 0..d {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write_node(u, trivial, cs + i, k + 1, o * d + i, f)?;
                    }
                    write!(f, ")")?;
                }
            }
            Ok(())
        }
        if l == 0 {
            return write!(f, "1");
        }
        write_node(self, &trivial, 0, 0, 0, f)
    }
}

/// A parsed element literal, independent of any level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub label: Perm,
    pub children: Option<Vec<Literal>>,
}

impl Literal {
    pub fn parse(text: &str, d: usize) -> Result<Literal> {
        let mut p = LiteralParser { text, pos: 0, d };
        p.skip_ws();
        let lit = p.node()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(Error::parse_at(text, p.pos, "trailing input"));
        }
        Ok(lit)
    }

    /// Depth of the deepest non-omitted label.
    pub fn depth(&self) -> usize {
        1 + self
            .children
            .as_ref()
            .map_or(0, |cs| cs.iter().map(Literal::depth).max().unwrap_or(0))
    }

    /// Materializes at `shape`; labels below `shape.level` are rejected
    /// unless they are all trivial.
    pub fn to_portrait(&self, shape: TreeShape) -> Result<Portrait> {
        if shape.level == 0 {
            return if self.is_trivial() {
                Ok(Portrait::identity(shape))
            } else {
                Err(Error::LevelOutOfRange {
                    got: self.depth(),
                    min: 0,
                    max: 0,
                })
            };
        }
        if self.label.degree() != shape.d {
            return Err(Error::InvalidPerm(format!(
                "label {} does not act on 1..={}",
                self.label, shape.d
            )));
        }
        let child_shape = shape.with_level(shape.level - 1);
        let children = match &self.children {
            None => vec![Portrait::identity(child_shape); shape.d],
            Some(cs) => cs
                .iter()
                .map(|c| c.to_portrait(child_shape))
                .collect::<Result<Vec<_>>>()?,
        };
        Portrait::assemble(&self.label, &children)
    }

    fn is_trivial(&self) -> bool {
        self.label.is_identity()
            && self
                .children
                .as_ref()
                .is_none_or(|cs| cs.iter().all(Literal::is_trivial))
    }
}

struct LiteralParser<'a> {
    text: &'a str,
    pos: usize,
    d: usize,
}

impl<'a> LiteralParser<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some('-') | Some('+')) {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.text[start..self.pos]
            .parse()
            .map_err(|_| Error::parse_at(self.text, start, "expected an integer"))
    }

    fn label(&mut self) -> Result<Perm> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('1') => {
                self.pos += 1;
                Ok(Perm::identity(self.d))
            }
            Some('s') => {
                self.pos += 1;
                self.skip_ws();
                if self.peek() == Some('^') {
                    self.pos += 1;
                    let k = self.integer()?;
                    Ok(Perm::sigma_pow(self.d, k))
                } else {
                    Ok(Perm::sigma(self.d))
                }
            }
            Some('[') => {
                self.pos += 1;
                let mut images = Vec::new();
                loop {
                    let k = self.integer()?;
                    if k < 1 {
                        return Err(Error::parse_at(self.text, start, "images are 1-based"));
                    }
                    images.push(k as usize);
                    self.skip_ws();
                    match self.peek() {
                        Some(',') => self.pos += 1,
                        Some(']') => {
                            self.pos += 1;
                            break;
                        }
                        _ => {
                            return Err(Error::parse_at(
                                self.text,
                                self.pos,
                                "expected `,` or `]`",
                            ))
                        }
                    }
                }
                if images.len() != self.d {
                    return Err(Error::parse_at(
                        self.text,
                        start,
                        format!("image list must have {} entries", self.d),
                    ));
                }
                Perm::from_one_based(&images)
                    .map_err(|e| Error::parse_at(self.text, start, e.to_string()))
            }
            _ => Err(Error::parse_at(
                self.text,
                start,
                "expected `1`, `s`, `s^k` or `[..]`",
            )),
        }
    }

    fn node(&mut self) -> Result<Literal> {
        let label = self.label()?;
        self.skip_ws();
        if self.peek() != Some('(') {
            return Ok(Literal {
                label,
                children: None,
            });
        }
        let open = self.pos;
        self.pos += 1;
        let mut children = Vec::with_capacity(self.d);
        loop {
            children.push(self.node()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => {
                    return Err(Error::parse_at(
                        self.text,
                        self.pos,
                        "expected `,` or `)`",
                    ))
                }
            }
        }
        if children.len() != self.d {
            return Err(Error::parse_at(
                self.text,
                open,
                format!("expected {} children, found {}", self.d, children.len()),
            ));
        }
        Ok(Literal {
            label,
            children: Some(children),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(d: usize, l: usize) -> TreeShape {
        TreeShape::new(d, l).unwrap()
    }

    fn all_words(d: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..l {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (1..=d).map(move |i| {
                        let mut w = w.clone();
                        w.push(i);
                        w
                    })
                })
                .collect();
        }
        out
    }

    /// Reference action straight from `u(iw') = g(i) h_i(w')`, using sections.
    fn act_by_sections(u: &Portrait, w: &[usize]) -> Vec<usize> {
        if w.is_empty() {
            return vec![];
        }
        let g = u.root_label();
        let mut out = vec![g.apply(w[0] - 1) + 1];
        out.extend(act_by_sections(&u.section(w[0]).unwrap(), &w[1..]));
        out
    }

    #[test]
    fn bracket_values() {
        assert_eq!(bracket(2, 3), 7);
        assert_eq!(bracket(3, 2), 4);
        assert_eq!(bracket(4, 0), 0);
        assert_eq!(shape(3, 3).node_count(), 13);
    }

    #[test]
    fn identity_acts_trivially() {
        let e = Portrait::identity(shape(2, 2));
        assert_eq!(e.act(&[2, 1]).unwrap(), vec![2, 1]);
        assert_eq!(Portrait::identity(shape(3, 3)).order(), BigUint::one());
    }

    #[test]
    fn compose_matches_pointwise_composition() {
        let s = shape(2, 2);
        let u = Portrait::parse("s(1,s)", s).unwrap();
        let v = Portrait::parse("s(s,1)", s).unwrap();
        let uv = u.compose(&v).unwrap();
        for w in all_words(2, 2) {
            let expected = u.act(&v.act(&w).unwrap()).unwrap();
            assert_eq!(uv.act(&w).unwrap(), expected);
        }
    }

    #[test]
    fn product_formula_on_children() {
        // g(h)·g'(h') = gg'(h_{g'(1)} h'_1, …)
        let s = shape(2, 2);
        let sig = Portrait::parse("s", s).unwrap();
        let sq = sig.compose(&sig).unwrap();
        assert!(sq.root_label().is_identity());
        // children of s·s are h_2 h'_1 = 1 and h_1 h'_2 = 1
        assert!(sq.is_identity());
        let u = Portrait::parse("s(1,s)", s).unwrap();
        let v = Portrait::parse("s(s,1)", s).unwrap();
        let uv = u.compose(&v).unwrap();
        // children: h_{2} h'_1 = s·s = 1 and h_1 h'_2 = 1·1
        assert_eq!(uv.to_string(), "1");
        let vu = v.compose(&u).unwrap();
        // children: h'_2 h_1 = 1 and h'_1 h_2 = s s = 1
        assert_eq!(vu.to_string(), "1");
        let w = Portrait::parse("1(s,1)", s).unwrap();
        let uw = u.compose(&w).unwrap();
        // g = s, g' = 1: children h_1 h'_1 = s, h_2 h'_2 = s
        assert_eq!(uw.to_string(), "s(s,s)");
    }

    #[test]
    fn inverse_of_sigma_at_d3() {
        let s = shape(3, 1);
        let u = Portrait::parse("s", s).unwrap();
        assert_eq!(u.inverse().to_string(), "s^2");
        assert!(Portrait::identity(s).inverse().is_identity());
    }

    #[test]
    fn leaf_permutation_small_cases() {
        let s1 = shape(2, 1);
        let t = Portrait::parse("s", s1).unwrap().leaf_permutation();
        assert_eq!(t.images(), &[1, 0]);
        assert!(Portrait::identity(shape(3, 2)).leaf_permutation().is_identity());
    }

    #[test]
    fn odometer_cycles_all_words() {
        let s = shape(2, 3);
        let c = Portrait::odometer(s);
        assert_eq!(c.to_string(), "s(1,s(1,s))");
        let mut w = vec![1, 1, 1];
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..8 {
            assert!(seen.insert(w.clone()));
            w = c.act(&w).unwrap();
        }
        assert_eq!(w, vec![1, 1, 1]);
        assert_eq!(c.order(), BigUint::from(8u32));
        for k in 1..=3 {
            assert_eq!(c.chi(k).unwrap(), 1);
        }
    }

    #[test]
    fn chi_of_identity_and_errors() {
        let s = shape(3, 3);
        assert_eq!(Portrait::identity(s).chi(2).unwrap(), 0);
        let t = Portrait::parse("[1,3,2]", s).unwrap();
        assert_eq!(t.chi(1), Err(Error::NotCyclic));
        assert!(Portrait::identity(s).chi(4).is_err());
        assert_eq!(Portrait::identity(s).chi_prime(2).unwrap(), 0);
    }

    #[test]
    fn chi_prime_weights_components() {
        // d=3: u = (s, 1, 1) at level 2; χ_1 of sections = (1,0,0); χ' = 1
        let s = shape(3, 2);
        let u = Portrait::parse("1(s,1,1)", s).unwrap();
        assert_eq!(u.chi_prime(2).unwrap(), 1);
        let v = Portrait::parse("1(1,1,s)", s).unwrap();
        assert_eq!(v.chi_prime(2).unwrap(), 0);
        let w = Portrait::parse("1(1,s^2,1)", s).unwrap();
        assert_eq!(w.chi_prime(2).unwrap(), 1);
    }

    #[test]
    fn parse_forms_and_errors() {
        let s = shape(3, 2);
        let a = Portrait::parse("[2,3,1](1, s^-1, [1,3,2])", s).unwrap();
        assert_eq!(a.to_string(), "s(1,s^2,[1,3,2])");
        assert_eq!(Portrait::parse("s^0", s).unwrap(), Portrait::identity(s));
        assert!(Portrait::parse("s(1,1)", s).is_err());
        assert!(Portrait::parse("s(1,1,s(1,1,s))", s).is_err());
        match Portrait::parse("s(1,\n q,1)", s) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!((line, column), (2, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        // trivial labels below the level are harmless
        assert!(Portrait::parse("s(1,1,1(1,1,1))", s).is_ok());
    }

    #[test]
    fn sections_and_assemble_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = shape(3, 3);
        for _ in 0..20 {
            let u = Portrait::random_full(s, &mut rng);
            let rebuilt = Portrait::assemble(&u.root_label(), &u.sections().unwrap()).unwrap();
            assert_eq!(rebuilt, u);
        }
    }

    #[test]
    fn section_based_action_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = shape(3, 3);
        for _ in 0..20 {
            let u = Portrait::random_full(s, &mut rng);
            for w in all_words(3, 3) {
                assert_eq!(u.act(&w).unwrap(), act_by_sections(&u, &w));
            }
        }
    }

    #[test]
    fn enumerate_sizes() {
        assert_eq!(Portrait::enumerate(shape(2, 3), true, 1 << 20).unwrap().len(), 128);
        assert_eq!(Portrait::enumerate(shape(3, 1), false, 1 << 20).unwrap().len(), 6);
        assert!(Portrait::enumerate(shape(3, 4), false, 1 << 20).is_err());
        assert_eq!(Perm::all(4).len(), 24);
    }

    #[test]
    fn vertex_permutation_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = shape(2, 4);
        for _ in 0..10 {
            let u = Portrait::random_full(s, &mut rng);
            let vp = u.vertex_permutation();
            assert_eq!(Portrait::from_vertex_permutation(s, &vp), Some(u.clone()));
            let lp = u.leaf_permutation();
            assert_eq!(Portrait::from_leaf_permutation(s, &lp), Some(u));
        }
        let not_tree = Permutation::from_cycles(4, &[&[0, 1, 2]]).unwrap();
        assert_eq!(Portrait::from_leaf_permutation(shape(2, 2), &not_tree), None);
    }
}
