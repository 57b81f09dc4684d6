//! Stabilizer chains for permutation groups (deterministic Schreier–Sims).
//!
//! The chain uses a fixed base listing every point in order, so most levels
//! are trivial and skipped in constant time. Groups generated by portraits
//! act internally on all non-root vertices of the tree in breadth-first
//! order. With that base every basic orbit lies inside a set of siblings and
//! has at most `d` points, which keeps transversals tiny even when the group
//! order is astronomically large.
//!
//! Construction follows the incremental form of Schreier–Sims: levels deeper
//! than the current one are kept complete, Schreier generators of the current
//! level are sifted through them, and a non-trivial residue is added to every
//! level it fixes the base of before resuming from the deepest affected level.
//!
//! Every transversal element and strong generator carries a node of a
//! straight-line program over the user generators, so membership tests can
//! return a word without expanding it.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::recursion::{Atom, Factor, GroupWord};
use crate::tree::{Portrait, TreeShape};

/// A node of a straight-line program over the group generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlpNode {
    Identity,
    Generator(usize),
    Mul(usize, usize),
    Inverse(usize),
}

/// A shared straight-line program; node ids index `nodes`.
#[derive(Debug, Clone, Default)]
pub struct Slp {
    nodes: Vec<SlpNode>,
}

impl Slp {
    fn push(&mut self, node: SlpNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Evaluates node `root`, memoizing shared sub-programs.
    pub fn evaluate<T: Clone>(
        &self,
        root: usize,
        one: &T,
        generator: &dyn Fn(usize) -> T,
        mul: &dyn Fn(&T, &T) -> T,
        inv: &dyn Fn(&T) -> T,
    ) -> T {
        let mut memo: Vec<Option<T>> = vec![None; root + 1];
        // nodes only reference earlier nodes, so a forward pass suffices
        for id in 0..=root {
            let v = match self.nodes[id] {
                SlpNode::Identity => one.clone(),
                SlpNode::Generator(g) => generator(g),
                SlpNode::Mul(a, b) => mul(
                    memo[a].as_ref().expect("earlier node"),
                    memo[b].as_ref().expect("earlier node"),
                ),
                SlpNode::Inverse(a) => inv(memo[a].as_ref().expect("earlier node")),
            };
            memo[id] = Some(v);
        }
        memo[root].take().expect("root evaluated")
    }

    /// Length of the expanded word of every node up to `root`, saturating.
    fn lengths(&self, root: usize) -> Vec<u64> {
        let mut out = vec![0u64; root + 1];
        for id in 0..=root {
            out[id] = match self.nodes[id] {
                SlpNode::Identity => 0,
                SlpNode::Generator(_) => 1,
                SlpNode::Mul(a, b) => out[a].saturating_add(out[b]),
                SlpNode::Inverse(a) => out[a],
            };
        }
        out
    }

    /// Expands node `root` into a flat word over `names` when its length is
    /// at most `cap` letters.
    pub fn expand(&self, root: usize, names: &[String], cap: u64) -> Option<GroupWord> {
        let lengths = self.lengths(root);
        if lengths[root] > cap {
            return None;
        }
        let mut letters: Vec<(usize, i64)> = Vec::with_capacity(lengths[root] as usize);
        self.expand_into(root, false, &mut letters);
        // merge adjacent powers of the same generator
        let mut merged: Vec<(usize, i64)> = Vec::new();
        for (g, e) in letters {
            match merged.last_mut() {
                Some((h, f)) if *h == g => {
                    *f += e;
                    if *f == 0 {
                        merged.pop();
                    }
                }
                _ => merged.push((g, e)),
            }
        }
        Some(GroupWord {
            factors: merged
                .into_iter()
                .map(|(g, e)| Factor {
                    atom: Atom::Name(names[g].clone()),
                    exp: e,
                })
                .collect(),
        })
    }

    fn expand_into(&self, id: usize, inverted: bool, out: &mut Vec<(usize, i64)>) {
        match self.nodes[id] {
            SlpNode::Identity => {}
            SlpNode::Generator(g) => out.push((g, if inverted { -1 } else { 1 })),
            SlpNode::Mul(a, b) => {
                if inverted {
                    self.expand_into(b, true, out);
                    self.expand_into(a, true, out);
                } else {
                    self.expand_into(a, false, out);
                    self.expand_into(b, false, out);
                }
            }
            SlpNode::Inverse(a) => self.expand_into(a, !inverted, out),
        }
    }
}

/// Group order with its exact logarithm when it is a prime power of `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupOrder {
    pub value: BigUint,
}

impl GroupOrder {
    /// `log_d(value)` when `value` is an exact power of `d`.
    pub fn log(&self, d: u64) -> Option<u64> {
        let mut v = self.value.clone();
        let d = BigUint::from(d);
        let mut k = 0u64;
        while v > BigUint::one() {
            if &v % &d != BigUint::from(0u32) {
                return None;
            }
            v /= &d;
            k += 1;
        }
        Some(k)
    }
}

#[derive(Debug, Clone)]
struct TransversalEntry {
    point: u32,
    elem: Permutation,
    inv: Permutation,
    node: usize,
    /// `(parent index, generator index)` that produced this entry.
    provenance: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default)]
struct ChainLevel {
    /// Indices into the strong generator list.
    gens: Vec<usize>,
    orbit: Vec<TransversalEntry>,
    lookup: HashMap<u32, usize>,
    /// Schreier pairs `(orbit index, position in gens)` already sifted.
    tested: std::collections::HashSet<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct StrongGen {
    perm: Permutation,
    node: usize,
}

/// How user-level permutations map onto the points the chain acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Points are used as given.
    Plain,
    /// Leaf permutations of a tree of this shape, acted on through all
    /// non-root vertices.
    Tree(TreeShape),
}

#[derive(Debug, Clone)]
pub struct PermGroup {
    degree: usize,
    layout: Layout,
    /// Internal generators (vertex permutations for tree layouts).
    gens: Vec<Permutation>,
    names: Vec<String>,
    strong: Vec<StrongGen>,
    levels: Vec<ChainLevel>,
    slp: Slp,
    gen_nodes: Vec<usize>,
}

impl PermGroup {
    /// The group generated by `perms` acting on `0..degree`.
    pub fn from_generators(perms: &[Permutation], degree: usize) -> Result<PermGroup> {
        let names = (1..=perms.len()).map(|i| format!("g{i}")).collect();
        Self::from_named(perms, names, degree)
    }

    pub fn from_named(perms: &[Permutation], names: Vec<String>, degree: usize) -> Result<PermGroup> {
        for p in perms {
            if p.degree() != degree {
                return Err(Error::DegreeMismatch {
                    expected: degree,
                    found: p.degree(),
                });
            }
        }
        let mut g = PermGroup::empty(Layout::Plain, degree, degree);
        for (p, name) in perms.iter().zip(names) {
            g.push_generator(p.clone(), name);
        }
        Ok(g)
    }

    /// The group generated by named portraits of one shape.
    pub fn from_portraits(shape: TreeShape, gens: &[(String, Portrait)]) -> Result<PermGroup> {
        let internal = vertex_degree(shape);
        let mut g = PermGroup::empty(Layout::Tree(shape), shape.leaf_count(), internal);
        for (name, p) in gens {
            if p.shape() != shape {
                return Err(Error::ShapeMismatch {
                    left: format!("d={}, level={}", shape.d, shape.level),
                    right: format!("d={}, level={}", p.d(), p.level()),
                });
            }
            g.push_generator(p.vertex_permutation(), name.clone());
        }
        Ok(g)
    }

    fn empty(layout: Layout, degree: usize, internal: usize) -> PermGroup {
        let mut slp = Slp::default();
        slp.push(SlpNode::Identity);
        PermGroup {
            degree,
            layout,
            gens: Vec::new(),
            names: Vec::new(),
            strong: Vec::new(),
            levels: vec![ChainLevel::default(); internal],
            slp,
            gen_nodes: Vec::new(),
        }
    }

    /// The trivial subgroup with the same layout.
    pub fn trivial_like(&self) -> PermGroup {
        PermGroup::empty(self.layout, self.degree, self.levels.len())
    }

    fn push_generator(&mut self, perm: Permutation, name: String) {
        let idx = self.gens.len();
        self.gens.push(perm.clone());
        self.names.push(name);
        let node = self.slp.push(SlpNode::Generator(idx));
        self.gen_nodes.push(node);
        self.absorb(perm, node);
    }

    /// Adds an internal permutation with a known program node to the chain.
    fn absorb(&mut self, perm: Permutation, node: usize) {
        let (residue, fail_level, path) = self.strip(perm, 0);
        if fail_level == self.levels.len() {
            return;
        }
        let node = self.residue_node(node, &path);
        let sg = self.new_strong(residue, node);
        for l in 0..=fail_level {
            self.attach(l, sg);
        }
        self.complete_from(fail_level);
    }

    fn new_strong(&mut self, perm: Permutation, node: usize) -> usize {
        self.strong.push(StrongGen { perm, node });
        self.strong.len() - 1
    }

    /// Node for `u_{q_k}^{-1} ⋯ u_{q_1}^{-1} · x` where `path` lists the
    /// transversal entries divided out during stripping.
    fn residue_node(&mut self, mut node: usize, path: &[(usize, usize)]) -> usize {
        for &(l, idx) in path {
            let u = self.levels[l].orbit[idx].node;
            let inv = self.slp.push(SlpNode::Inverse(u));
            node = self.slp.push(SlpNode::Mul(inv, node));
        }
        node
    }

    /// Sifts `g` from level `start`; returns the residue, the level where
    /// sifting stopped (`levels.len()` on success) and the transversal path.
    fn strip(&self, mut g: Permutation, start: usize) -> (Permutation, usize, Vec<(usize, usize)>) {
        let mut path = Vec::new();
        for l in start..self.levels.len() {
            let p = g.apply(l) as u32;
            if p as usize == l {
                continue;
            }
            match self.levels[l].lookup.get(&p) {
                None => return (g, l, path),
                Some(&idx) => {
                    g = self.levels[l].orbit[idx].inv.compose(&g);
                    path.push((l, idx));
                }
            }
        }
        (g, self.levels.len(), path)
    }

    /// Appends strong generator `sg` to level `l` and extends its orbit.
    fn attach(&mut self, l: usize, sg: usize) {
        let level = &mut self.levels[l];
        if level.orbit.is_empty() {
            let n = self.strong[sg].perm.degree();
            level.orbit.push(TransversalEntry {
                point: l as u32,
                elem: Permutation::identity(n),
                inv: Permutation::identity(n),
                node: 0,
                provenance: None,
            });
            level.lookup.insert(l as u32, 0);
        }
        level.gens.push(sg);
        // close the orbit under all generators of the level
        let mut k = 0;
        while k < self.levels[l].orbit.len() {
            let gens = self.levels[l].gens.clone();
            for (gpos, &s) in gens.iter().enumerate() {
                let p = self.levels[l].orbit[k].point;
                let q = self.strong[s].perm.apply(p as usize) as u32;
                if self.levels[l].lookup.contains_key(&q) {
                    continue;
                }
                let elem = self.strong[s].perm.compose(&self.levels[l].orbit[k].elem);
                let inv = elem.inverse();
                let parent_node = self.levels[l].orbit[k].node;
                let node = self.slp.push(SlpNode::Mul(self.strong[s].node, parent_node));
                let level = &mut self.levels[l];
                level.lookup.insert(q, level.orbit.len());
                level.orbit.push(TransversalEntry {
                    point: q,
                    elem,
                    inv,
                    node,
                    provenance: Some((k, gpos)),
                });
            }
            k += 1;
        }
    }

    /// Restores completeness of all levels `≤ top`, assuming deeper levels
    /// are complete.
    fn complete_from(&mut self, top: usize) {
        let mut i = top as isize;
        while i >= 0 {
            let l = i as usize;
            match self.next_untested(l) {
                None => i -= 1,
                Some((k, gpos)) => {
                    self.levels[l].tested.insert((k, gpos));
                    let s = self.levels[l].gens[gpos];
                    let entry = &self.levels[l].orbit[k];
                    let q = self.strong[s].perm.apply(entry.point as usize) as u32;
                    let qi = self.levels[l].lookup[&q];
                    if self.levels[l].orbit[qi].provenance == Some((k, gpos)) {
                        continue;
                    }
                    // u_q^{-1} · s · u_p fixes the base point of level l
                    let schreier = self.levels[l].orbit[qi]
                        .inv
                        .compose(&self.strong[s].perm)
                        .compose(&self.levels[l].orbit[k].elem);
                    let (residue, fail, path) = self.strip(schreier, l + 1);
                    if fail == self.levels.len() {
                        continue;
                    }
                    let up = self.levels[l].orbit[k].node;
                    let uq = self.levels[l].orbit[qi].node;
                    let sn = self.strong[s].node;
                    let uq_inv = self.slp.push(SlpNode::Inverse(uq));
                    let a = self.slp.push(SlpNode::Mul(sn, up));
                    let sch_node = self.slp.push(SlpNode::Mul(uq_inv, a));
                    let node = self.residue_node(sch_node, &path);
                    let sg = self.new_strong(residue, node);
                    for m in l + 1..=fail {
                        self.attach(m, sg);
                    }
                    i = fail as isize;
                }
            }
        }
    }

    fn next_untested(&self, l: usize) -> Option<(usize, usize)> {
        let level = &self.levels[l];
        for k in 0..level.orbit.len() {
            for gpos in 0..level.gens.len() {
                if !level.tested.contains(&(k, gpos)) {
                    return Some((k, gpos));
                }
            }
        }
        None
    }

    /// Adds a generator; a no-op on the group if it is already a member.
    pub fn add_generator(&mut self, perm: &Permutation, name: &str) -> Result<()> {
        let internal = self.to_internal(perm).ok_or(Error::DegreeMismatch {
            expected: self.degree,
            found: perm.degree(),
        })?;
        self.push_generator(internal, name.to_string());
        Ok(())
    }

    fn to_internal(&self, perm: &Permutation) -> Option<Permutation> {
        if perm.degree() != self.degree {
            return None;
        }
        match self.layout {
            Layout::Plain => Some(perm.clone()),
            Layout::Tree(shape) => {
                Portrait::from_leaf_permutation(shape, perm).map(|u| u.vertex_permutation())
            }
        }
    }

    fn to_external(&self, internal: &Permutation) -> Permutation {
        match self.layout {
            Layout::Plain => internal.clone(),
            Layout::Tree(shape) => {
                let offset = shape.node_count() - 1;
                let images = (0..shape.leaf_count())
                    .map(|x| (internal.apply(offset + x) - offset) as u32)
                    .collect();
                Permutation::from_images(images).expect("vertex action restricts to leaves")
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    /// Generators as permutations of the user-level points.
    pub fn generators(&self) -> Vec<Permutation> {
        self.gens.iter().map(|g| self.to_external(g)).collect()
    }

    /// Generators as portraits (tree layouts only).
    pub fn generator_portraits(&self) -> Option<Vec<Portrait>> {
        let Layout::Tree(shape) = self.layout else {
            return None;
        };
        self.gens
            .iter()
            .map(|g| Portrait::from_vertex_permutation(shape, g))
            .collect()
    }

    pub fn order(&self) -> GroupOrder {
        let mut value = BigUint::one();
        for level in &self.levels {
            if level.orbit.len() > 1 {
                value *= level.orbit.len() as u64;
            }
        }
        GroupOrder { value }
    }

    /// Number of strong generators and base levels with non-trivial orbits.
    pub fn chain_stats(&self) -> (usize, usize) {
        (
            self.strong.len(),
            self.levels.iter().filter(|l| l.orbit.len() > 1).count(),
        )
    }

    pub fn contains(&self, perm: &Permutation) -> bool {
        match self.to_internal(perm) {
            Some(g) => self.contains_internal(&g),
            None => false,
        }
    }

    pub fn contains_portrait(&self, u: &Portrait) -> bool {
        match self.layout {
            Layout::Tree(shape) if shape == u.shape() => {
                self.contains_internal(&u.vertex_permutation())
            }
            _ => false,
        }
    }

    fn contains_internal(&self, g: &Permutation) -> bool {
        self.strip(g.clone(), 0).1 == self.levels.len()
    }

    /// Membership together with a program for the element; `None` when the
    /// element is not in the group.
    pub fn membership_program(&self, perm: &Permutation) -> Option<MembershipProof<'_>> {
        let g = self.to_internal(perm)?;
        let (_, fail, path) = self.strip(g, 0);
        if fail != self.levels.len() {
            return None;
        }
        Some(MembershipProof {
            group: self,
            factors: path
                .into_iter()
                .map(|(l, idx)| self.levels[l].orbit[idx].node)
                .collect(),
        })
    }

    /// Membership with a flat word over the generator names, when the
    /// expanded word has at most `cap` letters.
    pub fn contains_with_word(&self, perm: &Permutation, cap: u64) -> Option<GroupWord> {
        let proof = self.membership_program(perm)?;
        proof.word(cap)
    }

    /// `[self : sub]`, checking `sub ≤ self` on generators.
    pub fn index(&self, sub: &PermGroup) -> Result<GroupOrder> {
        if sub.degree != self.degree || sub.layout != self.layout {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: sub.degree,
            });
        }
        for g in &sub.gens {
            if !self.contains_internal(g) {
                return Err(Error::NotInGroup);
            }
        }
        let big = self.order().value;
        let small = sub.order().value;
        Ok(GroupOrder { value: big / small })
    }

    /// The normal closure of `seeds` in `self`.
    pub fn normal_closure(&self, seeds: &[Permutation]) -> Result<PermGroup> {
        let mut internal = Vec::with_capacity(seeds.len());
        for s in seeds {
            let g = self.to_internal(s).ok_or(Error::NotInGroup)?;
            if !self.contains_internal(&g) {
                return Err(Error::NotInGroup);
            }
            internal.push(g);
        }
        Ok(self.normal_closure_internal(internal))
    }

    /// Normal closure of portraits (tree layouts only).
    pub fn normal_closure_of_portraits(&self, seeds: &[Portrait]) -> Result<PermGroup> {
        let mut internal = Vec::with_capacity(seeds.len());
        for s in seeds {
            if !self.contains_portrait(s) {
                return Err(Error::NotInGroup);
            }
            internal.push(s.vertex_permutation());
        }
        Ok(self.normal_closure_internal(internal))
    }

    fn normal_closure_internal(&self, seeds: Vec<Permutation>) -> PermGroup {
        let mut n = self.trivial_like();
        let mut queue: Vec<Permutation> = Vec::new();
        for s in seeds {
            if !n.contains_internal(&s) {
                let name = format!("n{}", n.gens.len() + 1);
                n.push_generator(s.clone(), name);
                queue.push(s);
            }
        }
        let conjugators: Vec<(Permutation, Permutation)> =
            self.gens.iter().map(|g| (g.inverse(), g.clone())).collect();
        let mut k = 0;
        while k < queue.len() {
            let x = queue[k].clone();
            k += 1;
            for (ginv, g) in &conjugators {
                let y = ginv.compose(&x).compose(g);
                if !n.contains_internal(&y) {
                    let name = format!("n{}", n.gens.len() + 1);
                    n.push_generator(y.clone(), name);
                    queue.push(y);
                }
            }
        }
        n
    }

    /// A uniformly random word of `length` letters over the generators and
    /// their inverses, with its value. The distribution on the group is not
    /// uniform.
    pub fn random_word_element<R: Rng + ?Sized>(
        &self,
        length: usize,
        rng: &mut R,
    ) -> (Permutation, GroupWord) {
        let mut value = Permutation::identity(self.levels.len());
        let mut word = GroupWord::identity();
        if self.gens.is_empty() {
            return (self.to_external(&value), word);
        }
        for _ in 0..length {
            let g = rng.gen_range(0..self.gens.len());
            let inverse = rng.gen_bool(0.5);
            let letter = if inverse {
                self.gens[g].inverse()
            } else {
                self.gens[g].clone()
            };
            value = value.compose(&letter);
            word.factors.push(Factor {
                atom: Atom::Name(self.names[g].clone()),
                exp: if inverse { -1 } else { 1 },
            });
        }
        (self.to_external(&value), word)
    }
}

/// A successful sift: the element equals the product of these program nodes.
pub struct MembershipProof<'a> {
    group: &'a PermGroup,
    factors: Vec<usize>,
}

impl MembershipProof<'_> {
    /// Evaluates the element in another group given generator images.
    pub fn evaluate<T: Clone>(
        &self,
        one: &T,
        generator: &dyn Fn(usize) -> T,
        mul: &dyn Fn(&T, &T) -> T,
        inv: &dyn Fn(&T) -> T,
    ) -> T {
        let mut acc = one.clone();
        for &node in &self.factors {
            let v = self.group.slp.evaluate(node, one, generator, mul, inv);
            acc = mul(&acc, &v);
        }
        acc
    }

    /// The flat word, if at most `cap` letters long.
    pub fn word(&self, cap: u64) -> Option<GroupWord> {
        let mut out = GroupWord::identity();
        let mut total = 0u64;
        for &node in &self.factors {
            let len = self.group.slp.lengths(node)[node];
            total = total.saturating_add(len);
            if total > cap {
                return None;
            }
            let w = self.group.slp.expand(node, &self.group.names, cap)?;
            out = out.then(&w);
        }
        Some(out)
    }

    /// Signed exponent sums of the generators, computed on the program.
    pub fn exponent_sums(&self) -> Vec<num_bigint::BigInt> {
        use num_bigint::BigInt;
        let n = self.group.gens.len();
        let zero = vec![BigInt::from(0); n];
        let unit = |g: usize| {
            let mut v = vec![BigInt::from(0); n];
            v[g] = BigInt::from(1);
            v
        };
        let add = |a: &Vec<BigInt>, b: &Vec<BigInt>| a.iter().zip(b).map(|(x, y)| x + y).collect();
        let neg = |a: &Vec<BigInt>| a.iter().map(|x| -x).collect();
        self.evaluate(&zero, &unit, &add, &neg)
    }
}

/// Number of non-root vertices of a tree of this shape.
pub fn vertex_degree(shape: TreeShape) -> usize {
    crate::tree::bracket(shape.d, shape.level + 1) - 1
}

/// Exhaustive closure, for cross-checking small groups.
pub fn enumerate_elements(gens: &[Permutation], degree: usize, cap: usize) -> Result<Vec<Permutation>> {
    let id = Permutation::identity(degree);
    let mut seen = std::collections::HashSet::new();
    seen.insert(id.clone());
    let mut queue = vec![id];
    let mut k = 0;
    while k < queue.len() {
        let x = queue[k].clone();
        k += 1;
        for g in gens {
            let y = g.compose(&x);
            if seen.insert(y.clone()) {
                if seen.len() > cap {
                    return Err(Error::CapExceeded {
                        size: format!(">{cap}"),
                        cap: cap as u64,
                    });
                }
                queue.push(y);
            }
        }
    }
    Ok(queue)
}

/// `value` as `u64` when it fits.
pub fn order_as_u64(o: &GroupOrder) -> Option<u64> {
    o.value.to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cyc(n: usize, cycles: &[&[u32]]) -> Permutation {
        Permutation::from_cycles(n, cycles).unwrap()
    }

    #[test]
    fn symmetric_and_trivial_orders() {
        let s5 = PermGroup::from_generators(&[cyc(5, &[&[0, 1]]), cyc(5, &[&[0, 1, 2, 3, 4]])], 5)
            .unwrap();
        assert_eq!(s5.order().value, BigUint::from(120u32));
        let triv = PermGroup::from_generators(&[], 7).unwrap();
        assert_eq!(triv.order().value, BigUint::one());
        let a5 = PermGroup::from_generators(&[cyc(5, &[&[0, 1, 2]]), cyc(5, &[&[0, 1, 2, 3, 4]])], 5)
            .unwrap();
        assert_eq!(a5.order().value, BigUint::from(60u32));
        assert!(!a5.contains(&cyc(5, &[&[0, 1]])));
        assert!(s5.contains(&cyc(5, &[&[0, 1]])));
        assert_eq!(s5.index(&a5).unwrap().value, BigUint::from(2u32));
        assert_eq!(a5.index(&s5), Err(Error::NotInGroup));
    }

    #[test]
    fn order_matches_enumeration_on_small_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let n = rng.gen_range(3..8);
            let k = rng.gen_range(1..4);
            let gens: Vec<Permutation> = (0..k)
                .map(|_| {
                    let mut v: Vec<u32> = (0..n as u32).collect();
                    for i in (1..n).rev() {
                        v.swap(i, rng.gen_range(0..=i));
                    }
                    Permutation::from_images(v).unwrap()
                })
                .collect();
            let g = PermGroup::from_generators(&gens, n).unwrap();
            let all = enumerate_elements(&gens, n, 1 << 16).unwrap();
            assert_eq!(g.order().value, BigUint::from(all.len()));
            for x in all.iter().take(50) {
                assert!(g.contains(x));
            }
        }
    }

    #[test]
    fn words_evaluate_back() {
        let gens = [cyc(6, &[&[0, 1]]), cyc(6, &[&[0, 1, 2, 3, 4, 5]])];
        let g = PermGroup::from_generators(&gens, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (p, _) = g.random_word_element(12, &mut rng);
            let proof = g.membership_program(&p).unwrap();
            let id = Permutation::identity(6);
            let val = proof.evaluate(&id, &|i| gens[i].clone(), &|a, b| a.compose(b), &|a| a.inverse());
            assert_eq!(val, p);
            let w = g.contains_with_word(&p, 1 << 20).unwrap();
            let mut acc = id.clone();
            for f in &w.factors {
                let Atom::Name(n) = &f.atom else { panic!() };
                let i = g.generator_names().iter().position(|x| x == n).unwrap();
                let base = if f.exp < 0 { gens[i].inverse() } else { gens[i].clone() };
                for _ in 0..f.exp.abs() {
                    acc = acc.compose(&base);
                }
            }
            assert_eq!(acc, p);
        }
        let (p, w) = g.random_word_element(0, &mut rng);
        assert!(p.is_identity());
        assert!(w.factors.is_empty());
        let w = g.contains_with_word(&gens[0], 100).unwrap();
        assert_eq!(w.to_string(), "g1");
    }

    #[test]
    fn normal_closure_in_s4() {
        let s4 = PermGroup::from_generators(&[cyc(4, &[&[0, 1]]), cyc(4, &[&[0, 1, 2, 3]])], 4).unwrap();
        let v4 = s4.normal_closure(&[cyc(4, &[&[0, 1], &[2, 3]])]).unwrap();
        assert_eq!(v4.order().value, BigUint::from(4u32));
        let a4 = s4.normal_closure(&[cyc(4, &[&[0, 1, 2]])]).unwrap();
        assert_eq!(a4.order().value, BigUint::from(12u32));
        let all = s4.normal_closure(&s4.generators()).unwrap();
        assert_eq!(all.order(), s4.order());
        let triv = s4.normal_closure(&[Permutation::identity(4)]).unwrap();
        assert_eq!(triv.order().value, BigUint::one());
    }

    #[test]
    fn full_cyclic_wreath_orders() {
        for (d, l) in [(2usize, 3usize), (2, 4), (3, 2), (3, 3)] {
            let shape = TreeShape::new(d, l).unwrap();
            // one σ at every internal node
            let mut gens = Vec::new();
            for node in 0..shape.node_count() {
                let mut labels = vec![crate::tree::Perm::identity(d); shape.node_count()];
                labels[node] = crate::tree::Perm::sigma(d);
                gens.push((format!("f{node}"), Portrait::from_labels(shape, &labels).unwrap()));
            }
            let g = PermGroup::from_portraits(shape, &gens).unwrap();
            assert_eq!(g.order().log(d as u64), Some(shape.node_count() as u64));
        }
    }

    #[test]
    fn group_order_log() {
        let o = GroupOrder {
            value: BigUint::from(64u32),
        };
        assert_eq!(o.log(2), Some(6));
        assert_eq!(o.log(4), Some(3));
        assert_eq!(o.log(3), None);
    }
}
