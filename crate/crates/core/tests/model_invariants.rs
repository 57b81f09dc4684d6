use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use wreath_core::model::*;
use wreath_core::permgroup::{enumerate_elements, PermGroup};
use wreath_core::recursion::{eval_word, GroupWord};
use wreath_core::{Perm, Portrait, TreeShape};

fn pre(d: usize, m: usize, n: usize, w: usize) -> ModelParams {
    ModelParams::preperiodic(d, m, n, w).unwrap()
}

fn per(d: usize, n: usize) -> ModelParams {
    ModelParams::periodic(d, n).unwrap()
}

fn tag_grid() -> Vec<ModelParams> {
    vec![
        pre(3, 1, 2, 1),
        pre(2, 2, 4, 1),
        pre(2, 3, 4, 1),
        pre(4, 1, 2, 2),
        pre(2, 1, 3, 1),
        pre(2, 2, 3, 1),
        pre(2, 1, 2, 1),
    ]
}

fn log_order(g: &PermGroup, d: usize) -> u64 {
    g.order().log(d as u64).expect("order is a power of d")
}

#[test]
fn grid_tags_are_distinct() {
    let tags: Vec<CaseTag> = tag_grid().iter().map(|p| classify_case(p).unwrap()).collect();
    use CaseTag::*;
    assert_eq!(tags, vec![A1, A2, A3, B1, B2, C, D]);
}

#[test]
fn periodic_orders_match_closed_form() {
    for (d, n, max) in [(2, 1, 6), (2, 2, 6), (2, 3, 6), (3, 1, 4), (3, 2, 4)] {
        let p = per(d, n);
        for l in 1..=max {
            let g = model_group(&p, l).unwrap();
            assert_eq!(
                log_order(&g.group, d) as i128,
                closed_form_log_order(&p, l).unwrap(),
                "{p} at level {l}"
            );
        }
    }
}

#[test]
fn preperiodic_orders_match_closed_form() {
    for p in tag_grid() {
        for l in 1..=p.n + 3 {
            let g = model_group(&p, l).unwrap();
            assert_eq!(
                log_order(&g.group, p.d) as i128,
                closed_form_log_order(&p, l).unwrap(),
                "{p} at level {l}"
            );
        }
    }
}

#[test]
fn generator_orders_and_characters() {
    let mut params: Vec<ModelParams> = vec![per(2, 1), per(2, 3), per(3, 2)];
    params.extend(tag_grid());
    for p in params {
        for l in 1..=p.n + 2 {
            let g = model_group(&p, l).unwrap();
            for i in 1..=p.n {
                let gen = g.generator(i);
                let expected = BigUint::from(p.d).pow(generator_log_order(&p, i, l) as u32);
                assert_eq!(gen.order(), expected, "{p} generator {i} level {l}");
                for k in 1..=l {
                    assert_eq!(
                        gen.chi(k).unwrap(),
                        generator_chi(&p, i, k),
                        "{p} chi_{k} of generator {i}"
                    );
                }
            }
        }
    }
}

#[test]
fn characters_of_generators_form_a_basis() {
    for p in tag_grid() {
        let g = model_group(&p, p.n).unwrap();
        for i in 1..=p.n {
            let v = g.generator(i).chi_vector().unwrap();
            let unit: Vec<usize> = (1..=p.n).map(|k| usize::from(k == i)).collect();
            assert_eq!(v, unit, "{p}");
        }
    }
}

#[test]
fn appendix_indices_case_c() {
    let p = pre(2, 2, 3, 1);
    let expect_n = [(3, 4u32), (4, 8)];
    for (l, v) in expect_n {
        let g = model_group(&p, l).unwrap();
        let n = branch_subgroup_n(&g).unwrap();
        assert_eq!(g.group.index(&n).unwrap().value, BigUint::from(v), "level {l}");
    }
    for (l, v) in [(4, 8u32), (5, 16)] {
        let g = model_group(&p, l).unwrap();
        let nd = branch_subgroup_n_power_d(&p, l).unwrap();
        assert_eq!(g.group.index(&nd).unwrap().value, BigUint::from(v), "level {l}");
    }
}

#[test]
fn branch_quotients_at_stabilized_levels() {
    for p in tag_grid() {
        let tag = classify_case(&p).unwrap();
        if tag == CaseTag::D {
            assert!(branch_subgroup_n_power_d(&p, 3).is_err());
            continue;
        }
        let (delta, eps) = branch_quotient_logs(&p).unwrap();
        let (ln, lnd) = match tag {
            CaseTag::C => (p.n + 1, p.n + 2),
            t if t.is_b() => (p.n, p.n + 1),
            _ => {
                let (m, _) = p.preperiodic_data().unwrap();
                (p.n, (m + 1).max(p.n))
            }
        };
        for l in ln..=ln + 1 {
            let g = model_group(&p, l).unwrap();
            let n = branch_subgroup_n(&g).unwrap();
            assert_eq!(g.group.index(&n).unwrap().log(p.d as u64), Some(delta), "{p} N level {l}");
        }
        for l in lnd..=lnd + 1 {
            let g = model_group(&p, l).unwrap();
            let nd = branch_subgroup_n_power_d(&p, l).unwrap();
            assert_eq!(
                g.group.index(&nd).unwrap().log(p.d as u64),
                Some(eps),
                "{p} N^d level {l}"
            );
        }
    }
}

#[test]
fn case_a_index_stabilizes_from_n() {
    let p = pre(2, 2, 4, 1);
    for l in p.n..=p.n + 2 {
        let g = model_group(&p, l).unwrap();
        let n = branch_subgroup_n(&g).unwrap();
        assert_eq!(g.group.index(&n).unwrap().value, BigUint::from(4u32));
    }
    let p = pre(3, 2, 3, 1);
    let g = model_group(&p, 4).unwrap();
    let n = branch_subgroup_n(&g).unwrap();
    assert_eq!(g.group.index(&n).unwrap().value, BigUint::from(9u32));
}

/// Levels at which the closed-form κ matches membership of `c_ε`.
fn kappa_levels(p: &ModelParams) -> Vec<usize> {
    match classify_case(p).unwrap() {
        CaseTag::B2 => vec![],
        CaseTag::C => vec![p.n + 2, p.n + 3],
        _ => vec![p.n + 1, p.n + 2],
    }
}

#[test]
fn kappa_criterion_by_membership() {
    for p in tag_grid() {
        if classify_case(&p).unwrap() == CaseTag::D {
            continue;
        }
        let k = kappa(&p).unwrap();
        for l in kappa_levels(&p) {
            let g = model_group(&p, l).unwrap();
            assert_eq!(predicted_conjugacy_modulus(&p, l).unwrap(), k);
            for e in 0..(2 * k / p.d as u64) as i64 {
                let eps = 1 + p.d as i64 * e;
                let inside = power_conjugator_in_group(&g, e).unwrap();
                assert_eq!(inside, eps.rem_euclid(k as i64) == 1, "{p} level {l} eps {eps}");
            }
        }
        for l in 1..=p.n {
            let g = model_group(&p, l).unwrap();
            for e in 0..4 {
                assert!(power_conjugator_in_group(&g, e).unwrap());
            }
        }
    }
}

/// Exponents ε for which `x_∞ ~ x_∞^ε`, by exhaustive search of the group.
fn conjugate_exponents_by_enumeration(p: &ModelParams, l: usize) -> Vec<i64> {
    let g = model_group(p, l).unwrap();
    let gens: Vec<_> = g.generators.values().map(|u| u.leaf_permutation()).collect();
    let all = enumerate_elements(&gens, p.d.pow(l as u32), 1 << 16).unwrap();
    let b = infinity_element(p, l).unwrap().leaf_permutation();
    let d = p.d as i64;
    (0..16)
        .map(|e| 1 + d * e)
        .filter(|&eps| {
            let target = b.pow(eps as u64);
            all.iter().any(|x| x.compose(&b).compose(&x.inverse()) == target)
        })
        .collect()
}

#[test]
fn kappa_deviations_are_confirmed_by_enumeration() {
    // case B2: ε ≡ ±1 mod 8 rather than ε ≡ 1 mod 8
    let b2 = pre(2, 1, 3, 1);
    let expected: Vec<i64> = vec![1, 7, 9, 15, 17, 23, 25, 31];
    assert_eq!(conjugate_exponents_by_enumeration(&b2, 4), expected);
    for l in 4..=6 {
        let g = model_group(&b2, l).unwrap();
        assert_eq!(conjugate_exponents(&g, 16).unwrap(), expected, "level {l}");
    }
    // case C one level above n: modulus 4 rather than 8
    let c = pre(2, 2, 3, 1);
    let expected: Vec<i64> = (0..16).map(|e| 1 + 2 * e).filter(|x| x % 4 == 1).collect();
    assert_eq!(conjugate_exponents_by_enumeration(&c, 4), expected);
    let g = model_group(&c, 4).unwrap();
    assert_eq!(conjugate_exponents(&g, 16).unwrap(), expected);
}

#[test]
fn power_conjugator_conjugates_infinity_element() {
    for p in [pre(2, 1, 3, 1), pre(3, 1, 2, 1), per(2, 2), per(3, 1)] {
        for e in 0..4i64 {
            let l = p.n + 2;
            let c = power_conjugator(&p, e, l).unwrap();
            let b = infinity_element(&p, l).unwrap();
            let eps = 1 + p.d as i64 * e;
            assert_eq!(b.conjugate_by(&c.inverse()).unwrap(), b.pow(eps), "{p} e={e}");
        }
    }
}

#[test]
fn periodic_kappa_analogue() {
    for (d, n) in [(2, 1), (2, 2), (3, 1)] {
        let p = per(d, n);
        for l in 1..=5 {
            let g = model_group(&p, l).unwrap();
            let modulus = predicted_conjugacy_modulus(&p, l).unwrap() as i64;
            for e in 0..(2 * modulus / d as i64).max(2) {
                let eps = 1 + d as i64 * e;
                assert_eq!(
                    power_conjugator_in_group(&g, e).unwrap(),
                    eps.rem_euclid(modulus) == 1,
                    "{p} level {l} eps {eps}"
                );
            }
        }
    }
}

fn random_member(g: &ModelGroup, rng: &mut ChaCha8Rng, len: usize) -> (Portrait, GroupWord) {
    let (_, w) = g.group.random_word_element(len, rng);
    (g.eval(&w).unwrap(), w)
}

#[test]
fn psi_maps_are_homomorphisms_with_kernel_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pa = pre(3, 2, 3, 1);
    let g = model_group(&pa, pa.n).unwrap();
    for _ in 0..200 {
        let (x, _) = random_member(&g, &mut rng, 8);
        let (y, _) = random_member(&g, &mut rng, 8);
        let (a1, a2) = psi_a(&x, &pa).unwrap();
        let (b1, b2) = psi_a(&y, &pa).unwrap();
        let (c1, c2) = psi_a(&x.compose(&y).unwrap(), &pa).unwrap();
        assert_eq!(((a1 + b1) % 3, (a2 + b2) % 3), (c1, c2));
    }
    let (m, _) = pa.preperiodic_data().unwrap();
    assert_eq!(psi_a(g.generator(m), &pa).unwrap(), (1, 0));
    assert_eq!(psi_a(g.generator(pa.n), &pa).unwrap(), (0, 1));
    let n = branch_subgroup_n(&g).unwrap();
    for x in n.generator_portraits().unwrap() {
        assert_eq!(psi_a(&x, &pa).unwrap(), (0, 0));
    }
    assert_eq!(g.group.index(&n).unwrap().value, BigUint::from(9u32));

    let pb = pre(2, 1, 3, 1);
    let g = model_group(&pb, 4).unwrap();
    for _ in 0..200 {
        let (x, _) = random_member(&g, &mut rng, 8);
        let (y, _) = random_member(&g, &mut rng, 8);
        let xy = x.compose(&y).unwrap();
        assert_eq!(
            psi_b(&xy, &pb).unwrap(),
            psi_b(&x, &pb).unwrap().mul(&psi_b(&y, &pb).unwrap())
        );
    }
    let bn = psi_b(g.generator(pb.n), &pb).unwrap();
    assert_eq!((bn.r, bn.s, bn.t), (0, 0, 1));
    let images: HashSet<Heisenberg> = closure(
        g.generators.values().map(|u| psi_b(u, &pb).unwrap()).collect(),
    );
    assert_eq!(images.len(), 8);
    let n = branch_subgroup_n(&g).unwrap();
    for x in n.generator_portraits().unwrap() {
        assert!(psi_b(&x, &pb).unwrap().is_identity());
    }
    assert_eq!(g.group.index(&n).unwrap().value, BigUint::from(images.len()));
}

fn closure(gens: Vec<Heisenberg>) -> HashSet<Heisenberg> {
    let d = gens[0].d;
    let mut seen = HashSet::from([Heisenberg::identity(d)]);
    let mut queue = vec![Heisenberg::identity(d)];
    while let Some(x) = queue.pop() {
        for g in &gens {
            let y = x.mul(g);
            if seen.insert(y) {
                queue.push(y);
            }
        }
    }
    seen
}

#[test]
fn heisenberg_quotient_matches_membership() {
    // word images in H_d agree for words with equal portraits at stabilized level
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in [pre(2, 1, 3, 1), pre(2, 2, 3, 1), pre(4, 1, 2, 2)] {
        let l = if classify_case(&p).unwrap() == CaseTag::C { p.n + 1 } else { p.n };
        let g = model_group(&p, l).unwrap();
        let q = HeisenbergQuotient::new(&p).unwrap();
        let n = branch_subgroup_n(&g).unwrap();
        for _ in 0..100 {
            let (x, w) = random_member(&g, &mut rng, 10);
            let image = w.evaluate(&q).unwrap();
            assert_eq!(n.contains_portrait(&x), image.is_identity(), "{p} word {w}");
        }
    }
}

fn assemble(comps: &[Component]) -> Portrait {
    let children: Vec<Portrait> = comps.iter().map(|c| c.portrait.clone()).collect();
    Portrait::tuple(&children).unwrap()
}

#[test]
fn stabilizer_criterion_matches_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut params = vec![pre(3, 2, 3, 1), pre(3, 1, 2, 1)];
    params.extend(tag_grid());
    for p in params {
        let tag = classify_case(&p).unwrap();
        let inner = match tag {
            CaseTag::C => p.n + 1,
            _ => p.n,
        };
        let below = model_group(&p, inner).unwrap();
        let above = model_group(&p, inner + 1).unwrap();
        let mut seen = [0usize; 2];
        for trial in 0..120 {
            let mut comps: Vec<Component> = (0..p.d)
                .map(|_| {
                    let len = rng.gen_range(0..8);
                    let (x, w) = random_member(&below, &mut rng, len);
                    Component::with_word(x, w)
                })
                .collect();
            if trial % 2 == 0 {
                // force a member: start from a word in the generators at the top
                let (_, w) = above.group.random_word_element(6, &mut rng);
                let top = above.eval(&w).unwrap();
                if !top.root_label().is_identity() {
                    continue;
                }
                comps = member_components(&p, &w, inner);
            }
            let predicted = stabilizer_membership_predicate(&p, &comps).unwrap();
            let actual = above.group.contains_portrait(&assemble(&comps));
            assert_eq!(predicted, actual, "{p} trial {trial}");
            seen[usize::from(actual)] += 1;
        }
        assert!(seen[0] > 0 && seen[1] > 0, "{p}: {seen:?}");
    }
}

/// Sections of a word with trivial root action, each with its own word.
fn member_components(p: &ModelParams, w: &GroupWord, level: usize) -> Vec<Component> {
    let sys = wreath_core::recursion::model_system(p).unwrap();
    let sections = sections_of_word(&sys, w, p.d);
    let env = wreath_core::recursion::builtin(
        &wreath_core::recursion::NamedFamily::Model(p.clone()),
        level,
    )
    .unwrap();
    sections
        .into_iter()
        .map(|s| Component::with_word(eval_word(&env, &s, p.d, level).unwrap(), s))
        .collect()
}

/// Symbolic first-level sections of a word whose root action is trivial.
fn sections_of_word(
    sys: &wreath_core::recursion::RecursionSystem,
    w: &GroupWord,
    d: usize,
) -> Vec<GroupWord> {
    use wreath_core::recursion::Atom;
    // expand to letters, right factor acts first
    let mut letters: Vec<(String, bool)> = Vec::new();
    for f in &w.factors {
        let Atom::Name(n) = &f.atom else { panic!("plain words only") };
        for _ in 0..f.exp.unsigned_abs() {
            letters.push((n.clone(), f.exp < 0));
        }
    }
    let mut root = Perm::identity(d);
    let mut sections = vec![GroupWord::identity(); d];
    // u = x_1 ⋯ x_k; (u v)|_i = u|_{v(i)} v|_i
    for (name, inv) in letters.iter().rev() {
        let eq = sys.equation(name).unwrap();
        let (g, kids): (Perm, Vec<GroupWord>) = if *inv {
            let gi = eq.root.inverse();
            let kids = (0..d).map(|i| eq.children[gi.apply(i)].inverse()).collect();
            (gi, kids)
        } else {
            (eq.root.clone(), eq.children.clone())
        };
        sections = (0..d)
            .map(|i| kids[root.apply(i)].clone().then(&sections[i]))
            .collect();
        root = g.compose(&root);
    }
    assert!(root.is_identity());
    sections
}

#[test]
fn periodic_stabilizer_criterion_matches_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [per(2, 2), per(3, 2), per(2, 3)] {
        let inner = p.n + 1;
        let below = model_group(&p, inner).unwrap();
        let above = model_group(&p, inner + 1).unwrap();
        let mut seen = [0usize; 2];
        for _ in 0..150 {
            let comps: Vec<Component> = (0..p.d)
                .map(|_| {
                    let len = rng.gen_range(0..6);
                    let (x, w) = random_member(&below, &mut rng, len);
                    Component::with_word(x, w)
                })
                .collect();
            let etas: Vec<i128> = comps
                .iter()
                .map(|c| eta_exponent_sums(c.word.as_ref().unwrap(), &p).unwrap()[p.n - 1])
                .collect();
            let d = p.d as i128;
            // differences that vanish mod d without vanishing are not decided
            // by the level-(ℓ-1) portraits alone
            if etas.windows(2).any(|w| w[0] != w[1] && (w[0] - w[1]) % d == 0) {
                continue;
            }
            let predicted = stabilizer_membership_predicate(&p, &comps).unwrap();
            let actual = above.group.contains_portrait(&assemble(&comps));
            assert_eq!(predicted, actual, "{p}");
            seen[usize::from(actual)] += 1;
        }
        assert!(seen[0] > 0 && seen[1] > 0, "{p}: {seen:?}");
    }
}

#[test]
fn semirigidity_orders() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (p, l) in [(pre(2, 2, 3, 1), 5), (pre(3, 1, 2, 1), 3), (per(2, 2), 5)] {
        let g = model_group(&p, l).unwrap();
        let base = g.group.order();
        for _ in 0..20 {
            let conj: Vec<Portrait> = (0..p.n)
                .map(|_| Portrait::random_cyclic(g.shape(), &mut rng))
                .collect();
            let gens = conjugated_generators(&g, &conj).unwrap();
            let h = PermGroup::from_portraits(g.shape(), &gens).unwrap();
            assert_eq!(h.order(), base, "{p}");
        }
    }
}

#[test]
fn branch_generators_lie_in_group() {
    for p in tag_grid() {
        if classify_case(&p).unwrap() == CaseTag::D {
            continue;
        }
        let l = p.n + 2;
        let g = model_group(&p, l).unwrap();
        let nd = branch_subgroup_n_power_d(&p, l).unwrap();
        for x in nd.generator_portraits().unwrap() {
            assert!(g.group.contains_portrait(&x), "{p}");
        }
    }
}

#[test]
fn membership_samples_and_words() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = pre(2, 2, 3, 1);
    let g = model_group(&p, 4).unwrap();
    let shape = TreeShape::new(2, 4).unwrap();
    for _ in 0..30 {
        let (perm, w) = g.group.random_word_element(12, &mut rng);
        assert!(g.group.contains(&perm));
        assert_eq!(g.eval(&w).unwrap().leaf_permutation(), perm);
        let proof = g.group.membership_program(&perm).unwrap();
        let names = g.group.generator_names().to_vec();
        let gens = g.generators.clone();
        let value = proof.evaluate(
            &Portrait::identity(shape),
            &|i| gens[&names[i]].clone(),
            &|a, b| a.compose(b).unwrap(),
            &|a| a.inverse(),
        );
        assert_eq!(value.leaf_permutation(), perm);
    }
}
