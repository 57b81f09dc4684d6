//! Conjugacy in `[S_d]^ℓ` and `[C_d]^ℓ`.
//!
//! For `u = g(h_1, …, h_d)` and `u' = g'(h'_1, …, h'_d)` the elements are
//! conjugate iff some root permutation `a` satisfies `g' = a^{-1} g a` and,
//! for every `g'`-orbit with representative `i`, the orbit products satisfy
//! `π_{u',i} ~ π_{u,a(i)}` one level down. The search recurses on these
//! orbit products and memoizes decided pairs for the duration of a query.
//!
//! Given `a` and per-orbit conjugators `b_i`, a witness is `w = a(b_1, …, b_d)`
//! where the remaining `b` along each orbit are forced by
//! `h'_i = b_{g'(i)}^{-1} h_{a(i)} b_i`.

use std::collections::HashMap;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::tree::{Perm, Portrait, TreeShape};

/// Which group conjugators are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ambient {
    /// `[S_d]^ℓ`
    Full,
    /// `[C_d]^ℓ`
    Cyclic,
}

impl std::str::FromStr for Ambient {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Ambient::Full),
            "cyclic" => Ok(Ambient::Cyclic),
            _ => Err(Error::InvalidParams(format!(
                "ambient must be `full` or `cyclic`, got `{s}`"
            ))),
        }
    }
}

/// Default cap for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

/// The orbit product `π_{u,i} = h_{g^{n-1}(i)} ⋯ h_{g(i)} h_i` for 1-based `i`.
pub fn pi_product(u: &Portrait, i: usize) -> Result<Portrait> {
    let d = u.d();
    if i == 0 || i > d {
        return Err(Error::DigitOutOfRange { digit: i, d });
    }
    let sections = u.sections()?;
    Ok(pi_from_sections(&u.root_label(), &sections, i - 1))
}

fn pi_from_sections(g: &Perm, sections: &[Portrait], i0: usize) -> Portrait {
    let mut acc = sections[i0].clone();
    let mut j = g.apply(i0);
    while j != i0 {
        acc = sections[j].compose_unchecked(&acc);
        j = g.apply(j);
    }
    acc
}

fn check_inputs(u: &Portrait, v: &Portrait, amb: Ambient) -> Result<()> {
    if u.shape() != v.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("d={}, level={}", u.d(), u.level()),
            right: format!("d={}, level={}", v.d(), v.level()),
        });
    }
    if amb == Ambient::Cyclic && !(u.is_cyclic() && v.is_cyclic()) {
        return Err(Error::NotCyclic);
    }
    Ok(())
}

/// Candidate root conjugators `a` with `a^{-1} g a = g'`, in lexicographic
/// order of image lists.
fn root_candidates(g: &Perm, g2: &Perm, amb: Ambient) -> Vec<Perm> {
    let d = g.degree();
    match amb {
        Ambient::Cyclic => {
            if g != g2 {
                return vec![];
            }
            let mut v: Vec<Perm> = (0..d as i64).map(|k| Perm::sigma_pow(d, k)).collect();
            v.sort();
            v
        }
        Ambient::Full => Perm::all(d)
            .into_iter()
            .filter(|a| &g.conjugate_by(a) == g2)
            .collect(),
    }
}

struct Search {
    amb: Ambient,
    memo: HashMap<(Vec<u8>, Vec<u8>), Option<Portrait>>,
}

impl Search {
    /// A `w` with `w^{-1} u w = v`, if any.
    fn find(&mut self, u: &Portrait, v: &Portrait) -> Option<Portrait> {
        if u.level() == 0 {
            return Some(Portrait::identity(u.shape()));
        }
        if u == v {
            return Some(Portrait::identity(u.shape()));
        }
        let key = (u.key(), v.key());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let result = self.find_uncached(u, v);
        self.memo.insert(key, result.clone());
        result
    }

    fn find_uncached(&mut self, u: &Portrait, v: &Portrait) -> Option<Portrait> {
        let g = u.root_label();
        let g2 = v.root_label();
        let hs = u.sections().ok()?;
        let hs2 = v.sections().ok()?;
        let orbits = g2.orbits();
        'candidates: for a in root_candidates(&g, &g2, self.amb) {
            let mut b: Vec<Option<Portrait>> = vec![None; u.d()];
            for orbit in &orbits {
                let i = orbit[0];
                let p2 = pi_from_sections(&g2, &hs2, i);
                let p = pi_from_sections(&g, &hs, a.apply(i));
                // need b_i with b_i^{-1} p b_i = p2
                let Some(bi) = self.find(&p, &p2) else {
                    continue 'candidates;
                };
                // propagate along the orbit: b_{g'(j)} = h_{a(j)} b_j h'_j^{-1}
                let mut j = i;
                let mut bj = bi;
                loop {
                    let next = g2.apply(j);
                    b[j] = Some(bj.clone());
                    if next == i {
                        break;
                    }
                    bj = hs[a.apply(j)]
                        .compose_unchecked(&bj)
                        .compose_unchecked(&hs2[j].inverse());
                    j = next;
                }
            }
            let children: Vec<Portrait> = b.into_iter().map(|x| x.expect("all orbits filled")).collect();
            let w = Portrait::assemble(&a, &children).ok()?;
            debug_assert_eq!(u.conjugate_by(&w).ok().as_ref(), Some(v));
            return Some(w);
        }
        None
    }
}

/// Decides conjugacy of `u` and `v` in the ambient level-ℓ group.
pub fn are_conjugate(u: &Portrait, v: &Portrait, amb: Ambient) -> Result<bool> {
    Ok(conjugator(u, v, amb)?.is_some())
}

/// A validated `w` with `w^{-1} u w = v`, or `None`.
pub fn conjugator(u: &Portrait, v: &Portrait, amb: Ambient) -> Result<Option<Portrait>> {
    check_inputs(u, v, amb)?;
    let mut s = Search {
        amb,
        memo: HashMap::new(),
    };
    let w = s.find(u, v);
    if let Some(w) = &w {
        if u.conjugate_by(w)? != *v {
            return Err(Error::Arithmetic(
                "conjugator failed validation".to_string(),
            ));
        }
        if amb == Ambient::Cyclic && !w.is_cyclic() {
            return Err(Error::Arithmetic("conjugator left the ambient group".into()));
        }
    }
    Ok(w)
}

/// For `u = σ(h_1, …, h_d)` returns `(n, w)` with `n = σ(1, …, 1, h_d ⋯ h_1)`
/// and `w^{-1} u w = n`.
pub fn sigma_normal_form(u: &Portrait) -> Result<(Portrait, Portrait)> {
    let d = u.d();
    if u.level() == 0 || u.root_label() != Perm::sigma(d) {
        return Err(Error::InvalidParams(
            "root label must be the standard d-cycle".into(),
        ));
    }
    let hs = u.sections()?;
    let child_shape = hs[0].shape();
    // b_1 = 1, b_{i+1} = h_i b_i
    let mut bs = vec![Portrait::identity(child_shape)];
    for i in 0..d - 1 {
        let next = hs[i].compose_unchecked(&bs[i]);
        bs.push(next);
    }
    let w = Portrait::tuple(&bs)?;
    let mut normal_children = vec![Portrait::identity(child_shape); d];
    normal_children[d - 1] = pi_from_sections(&Perm::sigma(d), &hs, 0);
    let n = Portrait::assemble(&Perm::sigma(d), &normal_children)?;
    debug_assert_eq!(u.conjugate_by(&w)?, n);
    Ok((n, w))
}

/// Odometer recognition. In the cyclic ambient this is the strict criterion
/// `χ_k(u) = 1` for all `k ≤ ℓ`; in the full ambient it is conjugacy to the
/// truncated standard odometer.
pub fn is_odometer(u: &Portrait, amb: Ambient) -> Result<bool> {
    match amb {
        Ambient::Cyclic => Ok(u.chi_vector()?.iter().all(|&x| x == 1)),
        Ambient::Full => are_conjugate(u, &Portrait::odometer(u.shape()), Ambient::Full),
    }
}

/// Exhaustive search over the ambient group, in enumeration order.
pub fn brute_force_conjugator(
    u: &Portrait,
    v: &Portrait,
    amb: Ambient,
    cap: u64,
) -> Result<Option<Portrait>> {
    check_inputs(u, v, amb)?;
    for w in Portrait::enumerate(u.shape(), amb == Ambient::Cyclic, cap)? {
        if u.conjugate_by(&w)? == *v {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// All elements of the ambient group commuting with `u`, by enumeration.
pub fn brute_force_centralizer(u: &Portrait, amb: Ambient, cap: u64) -> Result<Vec<Portrait>> {
    let mut out = Vec::new();
    for w in Portrait::enumerate(u.shape(), amb == Ambient::Cyclic, cap)? {
        if u.compose(&w)? == w.compose(u)? {
            out.push(w);
        }
    }
    Ok(out)
}

/// Size of the ambient group at `shape`.
pub fn ambient_order(shape: TreeShape, amb: Ambient) -> BigUint {
    let per_node = match amb {
        Ambient::Cyclic => BigUint::from(shape.d),
        Ambient::Full => (1..=shape.d).map(BigUint::from).product(),
    };
    per_node.pow(shape.node_count() as u32)
}
