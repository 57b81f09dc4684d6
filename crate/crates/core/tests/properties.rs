use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wreath_core::arithmetic::Cyclotomic;
use wreath_core::conjugacy::{are_conjugate, conjugator, Ambient};
use wreath_core::recursion::{
    eval_word, solve, Equation, GroupWord, RecursionSystem, SolveOrder, TupleIndexing,
};
use wreath_core::{Perm, Portrait, TreeShape};

fn shape_strategy(max_d: usize, max_level: usize) -> impl Strategy<Value = TreeShape> {
    (2..=max_d, 0..=max_level).prop_map(|(d, l)| TreeShape::new(d, l).unwrap())
}

/// A shape with several portraits on it, drawn from one seed.
fn portraits(
    max_d: usize,
    max_level: usize,
    count: usize,
    cyclic: bool,
) -> impl Strategy<Value = (TreeShape, Vec<Portrait>)> {
    (shape_strategy(max_d, max_level), any::<u64>()).prop_map(move |(shape, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = (0..count)
            .map(|_| {
                if cyclic {
                    Portrait::random_cyclic(shape, &mut rng)
                } else {
                    Portrait::random_full(shape, &mut rng)
                }
            })
            .collect();
        (shape, xs)
    })
}

fn leaf_words(shape: TreeShape) -> Vec<Vec<usize>> {
    let n = shape.leaf_count();
    (0..n)
        .map(|mut code| {
            let mut w = vec![0; shape.level];
            for slot in w.iter_mut().rev() {
                *slot = code % shape.d + 1;
                code /= shape.d;
            }
            w
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_a_group_law((shape, xs) in portraits(4, 4, 3, false)) {
        let (u, v, w) = (&xs[0], &xs[1], &xs[2]);
        let one = Portrait::identity(shape);
        prop_assert_eq!(u.compose(&v.compose(w).unwrap()).unwrap(), u.compose(v).unwrap().compose(w).unwrap());
        prop_assert_eq!(&u.compose(&one).unwrap(), u);
        prop_assert!(u.compose(&u.inverse()).unwrap().is_identity());
    }

    #[test]
    fn action_composes_right_to_left((shape, xs) in portraits(3, 4, 2, false)) {
        let (u, v) = (&xs[0], &xs[1]);
        let uv = u.compose(v).unwrap();
        for w in leaf_words(shape) {
            prop_assert_eq!(uv.act(&w).unwrap(), u.act(&v.act(&w).unwrap()).unwrap());
        }
    }

    #[test]
    fn literals_round_trip((shape, xs) in portraits(4, 4, 1, false)) {
        let u = &xs[0];
        prop_assert_eq!(&Portrait::parse(&u.to_string(), shape).unwrap(), u);
    }

    #[test]
    fn truncation_is_a_homomorphism((shape, xs) in portraits(3, 4, 2, false), k in 0usize..5) {
        let k = k.min(shape.level);
        let (u, v) = (&xs[0], &xs[1]);
        let lhs = u.compose(v).unwrap().truncate(k).unwrap();
        let rhs = u.truncate(k).unwrap().compose(&v.truncate(k).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn sections_follow_the_wreath_rule((shape, xs) in portraits(4, 4, 2, false)) {
        prop_assume!(shape.level >= 1);
        let (u, v) = (&xs[0], &xs[1]);
        let uv = u.compose(v).unwrap();
        let g = v.root_label();
        for i in 0..shape.d {
            // (uv)|_i = u|_{v(i)} v|_i
            let expected = u.section(g.apply(i) + 1).unwrap().compose(&v.section(i + 1).unwrap()).unwrap();
            prop_assert_eq!(uv.section(i + 1).unwrap(), expected);
        }
    }

    #[test]
    fn characters_are_homomorphisms((shape, xs) in portraits(5, 4, 2, true)) {
        let (u, v) = (&xs[0], &xs[1]);
        let uv = u.compose(v).unwrap();
        for k in 1..=shape.level {
            prop_assert_eq!(uv.chi(k).unwrap(), (u.chi(k).unwrap() + v.chi(k).unwrap()) % shape.d);
        }
    }

    #[test]
    fn order_annihilates((_shape, xs) in portraits(4, 4, 1, false)) {
        let u = &xs[0];
        let n = u.order();
        let e: i64 = n.clone().try_into().unwrap();
        prop_assert!(u.pow(e).is_identity());
        prop_assert_eq!(u.leaf_permutation().order(), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conjugates_are_recognized((_shape, xs) in portraits(3, 3, 2, false)) {
        let (u, w) = (&xs[0], &xs[1]);
        let v = u.conjugate_by(w).unwrap();
        let found = conjugator(u, &v, Ambient::Full).unwrap();
        prop_assert!(found.is_some());
        prop_assert_eq!(u.conjugate_by(&found.unwrap()).unwrap(), v);
    }

    #[test]
    fn cyclic_conjugates_are_recognized((_shape, xs) in portraits(4, 3, 2, true)) {
        let (u, w) = (&xs[0], &xs[1]);
        let v = u.conjugate_by(w).unwrap();
        let found = conjugator(u, &v, Ambient::Cyclic).unwrap().expect("conjugate by construction");
        prop_assert!(found.is_cyclic());
        prop_assert_eq!(u.conjugate_by(&found).unwrap(), v);
    }

    #[test]
    fn conjugacy_is_symmetric_and_truncates((shape, xs) in portraits(3, 3, 2, true)) {
        let (u, v) = (&xs[0], &xs[1]);
        for amb in [Ambient::Cyclic, Ambient::Full] {
            let forward = are_conjugate(u, v, amb).unwrap();
            prop_assert_eq!(forward, are_conjugate(v, u, amb).unwrap());
            if forward {
                for k in 0..shape.level {
                    prop_assert!(are_conjugate(&u.truncate(k).unwrap(), &v.truncate(k).unwrap(), amb).unwrap());
                }
            }
        }
        if are_conjugate(u, v, Ambient::Cyclic).unwrap() {
            prop_assert!(are_conjugate(u, v, Ambient::Full).unwrap());
            prop_assert_eq!(u.chi_vector().unwrap(), v.chi_vector().unwrap());
        }
    }
}

/// A random recursion system with `k` unknowns over `S_d`.
fn random_system(d: usize, k: usize, seed: u64) -> RecursionSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let equations = names
        .iter()
        .map(|name| {
            let children = (0..d)
                .map(|_| {
                    let len = rng.gen_range(0..3);
                    let factors: Vec<GroupWord> = (0..len)
                        .map(|_| {
                            let n = &names[rng.gen_range(0..k)];
                            GroupWord::name_pow(n, rng.gen_range(-2..=2))
                        })
                        .collect();
                    GroupWord::product(factors.iter())
                })
                .collect();
            Equation {
                name: name.clone(),
                root: Perm::random(d, &mut rng),
                children,
            }
        })
        .collect();
    let indexing = if rng.gen_bool(0.5) { TupleIndexing::Source } else { TupleIndexing::Image };
    RecursionSystem::new(d, equations, indexing).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solutions_satisfy_their_equations(d in 2usize..=3, k in 1usize..=3, level in 1usize..=4, seed in any::<u64>()) {
        let sys = random_system(d, k, seed);
        let sol = solve(&sys, level).unwrap();
        let below = solve(&sys, level - 1).unwrap();
        for eq in sys.equations() {
            let children: Vec<Portrait> = eq
                .children
                .iter()
                .map(|w| eval_word(&below, w, d, level - 1).unwrap())
                .collect();
            let rebuilt = Portrait::assemble(&eq.root, &children).unwrap();
            prop_assert_eq!(&sol[&eq.name], &rebuilt);
        }
    }

    #[test]
    fn solve_orders_agree_and_truncate(d in 2usize..=3, k in 1usize..=3, level in 0usize..=4, seed in any::<u64>()) {
        let sys = random_system(d, k, seed);
        let a = sys.solve_with(level, SolveOrder::Rounds).unwrap();
        let b = sys.solve_with(level, SolveOrder::InPlaceReverse).unwrap();
        prop_assert_eq!(&a, &b);
        for lower in 0..level {
            let c = solve(&sys, lower).unwrap();
            for (name, p) in &a {
                prop_assert_eq!(&p.truncate(lower).unwrap(), &c[name]);
            }
        }
    }

    #[test]
    fn symbolic_action_matches_portraits(d in 2usize..=3, k in 1usize..=2, level in 1usize..=3, seed in any::<u64>()) {
        let sys = random_system(d, k, seed);
        let sol = solve(&sys, level).unwrap();
        let shape = TreeShape::new(d, level).unwrap();
        for (name, p) in &sol {
            for w in leaf_words(shape) {
                prop_assert_eq!(p.act(&w).unwrap(), sys.act_by_recursion(&GroupWord::name(name), &w).unwrap());
            }
        }
    }
}

fn cyclotomic(field: usize, seed: u64) -> Cyclotomic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<String> = (0..4)
        .map(|k| format!("{}/{}*z^{k}", rng.gen_range(-5i32..=5), rng.gen_range(1u32..=4)))
        .collect();
    Cyclotomic::parse(&terms.join(" + ").replace("+ -", "- "), field).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cyclotomic_field_axioms(field in 1usize..=12, s in any::<[u64; 3]>()) {
        let (x, y, z) = (cyclotomic(field, s[0]), cyclotomic(field, s[1]), cyclotomic(field, s[2]));
        let lhs = x.mul(&y.add(&z).unwrap()).unwrap();
        let rhs = x.mul(&y).unwrap().add(&x.mul(&z).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(x.mul(&y).unwrap(), y.mul(&x).unwrap());
        if !x.is_zero() {
            prop_assert_eq!(x.mul(&x.inv().unwrap()).unwrap(), Cyclotomic::one(field));
        }
        prop_assert_eq!(Cyclotomic::parse(&x.to_string(), field).unwrap(), x);
    }
}
