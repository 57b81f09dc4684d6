//! Verification suites shared by the integration tests and the `verify`
//! subcommand.
//!
//! Every suite is a list of independent checks, each comparing a claimed
//! value against one computed by a different route (stabilizer chains,
//! exhaustive enumeration, symbolic unfolding). Checks run on a small thread
//! pool; the report is sorted by check id so the output is deterministic.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arithmetic::{
    classify_orbit, constant_field_conductor, Conductor, Cyclotomic, Level, OrbitClassification,
};
use crate::conjugacy::{are_conjugate, brute_force_centralizer, brute_force_conjugator, is_odometer, Ambient};
use crate::error::{Error, Result};
use crate::model::{
    branch_subgroup_n, branch_subgroup_n_power_d, classify_case, closed_form_log_order,
    conjugated_generators, hausdorff_dimension, kappa, model_group, power_conjugator_in_group,
    psi_a, psi_b, CaseTag, Heisenberg, ModelGroup, ModelParams,
};
use crate::permgroup::PermGroup;
use crate::recursion::{model_system, solve, GroupWord, RecursionSystem};
use crate::tree::{bracket_big, Portrait, TreeShape};

/// The two-generator recursion over `S_3` used as the worked example; its
/// tuples list the section below each image letter.
pub const WORKED_EXAMPLE: &str = "\
# two unknowns over S_3, sections listed by image letter
d=3
indexing=image
x1 = s (1, x1, x2)
x2 = [1,3,2] (x1*x2, 1, 1)
";

/// Default seed for randomized checks.
pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    AppendixA,
    Orders,
    Kappa,
    Conjugacy,
    WorkedExample,
    Odometer,
    Semirigidity,
    Heisenberg,
    Hausdorff,
    ConstantField,
    All,
}

impl Suite {
    /// Every concrete suite, in the order `all` runs them.
    pub const EACH: [Suite; 10] = [
        Suite::AppendixA,
        Suite::Orders,
        Suite::Kappa,
        Suite::Conjugacy,
        Suite::WorkedExample,
        Suite::Odometer,
        Suite::Semirigidity,
        Suite::Heisenberg,
        Suite::Hausdorff,
        Suite::ConstantField,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::AppendixA => "appendix-a",
            Suite::Orders => "orders",
            Suite::Kappa => "kappa",
            Suite::Conjugacy => "conjugacy",
            Suite::WorkedExample => "worked-example",
            Suite::Odometer => "odometer",
            Suite::Semirigidity => "semirigidity",
            Suite::Heisenberg => "heisenberg",
            Suite::Hausdorff => "hausdorff",
            Suite::ConstantField => "constant-field",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown suite `{s}`")))
    }
}

/// One compared claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub id: String,
    pub params: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
    pub ms: u64,
    pub paper_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One line per check and a summary line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status} {} [{}] expected {} computed {} ({} ms)\n",
                c.id, c.params, c.expected, c.computed, c.ms
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "suite {}: {} checks, {} failed\n",
            self.suite,
            self.checks.len(),
            failed
        ));
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: DEFAULT_SEED,
            threads: 0,
        }
    }
}

/// Result of one check body before timing is attached.
struct Outcome {
    params: String,
    expected: String,
    computed: String,
    pass: bool,
}

impl Outcome {
    fn compare<T: PartialEq + fmt::Display>(params: impl Into<String>, expected: T, computed: T) -> Outcome {
        Outcome {
            params: params.into(),
            pass: expected == computed,
            expected: expected.to_string(),
            computed: computed.to_string(),
        }
    }
}

type Body = Box<dyn FnOnce(&mut ChaCha8Rng) -> Result<Outcome> + Send>;

struct Job {
    id: String,
    paper_ref: &'static str,
    body: Body,
}

fn job(
    id: impl Into<String>,
    paper_ref: &'static str,
    body: impl FnOnce(&mut ChaCha8Rng) -> Result<Outcome> + Send + 'static,
) -> Job {
    Job {
        id: id.into(),
        paper_ref,
        body: Box::new(body),
    }
}

/// FNV-1a, used to derive a per-check seed that does not depend on
/// scheduling.
fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf29ce484222325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

fn run_jobs(suite: &str, jobs: Vec<Job>, opts: &VerifyOptions) -> VerifyReport {
    let threads = match opts.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    let queue = Mutex::new(jobs.into_iter().collect::<Vec<_>>());
    let results = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let Some(job) = queue.lock().unwrap().pop() else { break };
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ fnv(&job.id));
                let start = Instant::now();
                let outcome = (job.body)(&mut rng);
                let ms = start.elapsed().as_millis() as u64;
                let check = match outcome {
                    Ok(o) => Check {
                        id: job.id,
                        params: o.params,
                        expected: o.expected,
                        computed: o.computed,
                        pass: o.pass,
                        ms,
                        paper_ref: job.paper_ref.to_string(),
                    },
                    Err(e) => Check {
                        id: job.id,
                        params: String::new(),
                        expected: "no error".into(),
                        computed: format!("error: {e}"),
                        pass: false,
                        ms,
                        paper_ref: job.paper_ref.to_string(),
                    },
                };
                results.lock().unwrap().push(check);
            });
        }
    });
    let mut checks = results.into_inner().unwrap();
    checks.sort_by(|a, b| a.id.cmp(&b.id));
    VerifyReport {
        suite: suite.to_string(),
        checks,
    }
}

/// Runs a suite. `All` concatenates every suite into one report.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> VerifyReport {
    let jobs = match suite {
        Suite::All => Suite::EACH.iter().flat_map(|s| jobs_for(*s)).collect(),
        s => jobs_for(s),
    };
    run_jobs(suite.name(), jobs, opts)
}

fn jobs_for(suite: Suite) -> Vec<Job> {
    let prefix = suite.name();
    let mut jobs = match suite {
        Suite::AppendixA => appendix_a_jobs(),
        Suite::Orders => order_jobs(),
        Suite::Kappa => kappa_jobs(),
        Suite::Conjugacy => conjugacy_jobs(),
        Suite::WorkedExample => worked_example_jobs(),
        Suite::Odometer => odometer_jobs(),
        Suite::Semirigidity => semirigidity_jobs(),
        Suite::Heisenberg => heisenberg_jobs(),
        Suite::Hausdorff => hausdorff_jobs(),
        Suite::ConstantField => constant_field_jobs(),
        Suite::All => Vec::new(),
    };
    for j in &mut jobs {
        j.id = format!("{prefix}/{}", j.id);
    }
    jobs
}

fn pre(d: usize, m: usize, n: usize, w: usize) -> ModelParams {
    ModelParams::preperiodic(d, m, n, w).expect("valid grid parameters")
}

fn per(d: usize, n: usize) -> ModelParams {
    ModelParams::periodic(d, n).expect("valid grid parameters")
}

/// Periodic grid `(d, n, max level)`.
pub fn periodic_grid() -> Vec<(ModelParams, usize)> {
    [(2, 1, 6), (2, 2, 6), (2, 3, 6), (3, 1, 4), (3, 2, 4)]
        .into_iter()
        .map(|(d, n, l)| (per(d, n), l))
        .collect()
}

/// One preperiodic parameter set per case tag, in the order A1, A2, A3, B1,
/// B2, C, D.
pub fn preperiodic_grid() -> Vec<ModelParams> {
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

fn log_order(g: &PermGroup, d: usize) -> Result<u64> {
    g.order()
        .log(d as u64)
        .ok_or_else(|| Error::Arithmetic("group order is not a power of d".into()))
}

fn appendix_a_jobs() -> Vec<Job> {
    let p = pre(2, 2, 3, 1);
    let mut jobs = Vec::new();
    for (l, v) in [(3usize, 4u32), (4, 8)] {
        let p = p.clone();
        jobs.push(job(format!("index-N-level-{l}"), "branch index stabilization", move |_| {
            let g = model_group(&p, l)?;
            let n = branch_subgroup_n(&g)?;
            let idx = g.group.index(&n)?.value;
            Ok(Outcome::compare(format!("{p}, level {l}"), BigUint::from(v), idx))
        }));
    }
    for (l, v) in [(4usize, 8u32), (5, 16)] {
        let p = p.clone();
        jobs.push(job(format!("index-Nd-level-{l}"), "branch index stabilization", move |_| {
            let g = model_group(&p, l)?;
            let nd = branch_subgroup_n_power_d(&p, l)?;
            let idx = g.group.index(&nd)?.value;
            Ok(Outcome::compare(format!("{p}, level {l}"), BigUint::from(v), idx))
        }));
    }
    jobs
}

fn order_jobs() -> Vec<Job> {
    let mut cases: Vec<(ModelParams, usize)> = periodic_grid();
    cases.extend(preperiodic_grid().into_iter().map(|p| {
        let max = p.n + 3;
        (p, max)
    }));
    let mut jobs = Vec::new();
    for (p, max) in cases {
        for l in 1..=max {
            let p = p.clone();
            let id = format!("{}/level-{l}", slug(&p));
            jobs.push(job(id, "finite level order", move |_| {
                let closed = closed_form_log_order(&p, l)?;
                let g = model_group(&p, l)?;
                let bsgs = log_order(&g.group, p.d)? as i128;
                Ok(Outcome::compare(format!("{p}, level {l}, log_d order"), closed, bsgs))
            }));
        }
    }
    jobs.push(job("case-C-level-4-literal", "finite level order", |_| {
        let p = pre(2, 2, 3, 1);
        let g = model_group(&p, 4)?;
        Ok(Outcome::compare(format!("{p}, level 4"), 13u64, log_order(&g.group, 2)?))
    }));
    jobs.push(job("case-D-literal", "finite level order", |_| {
        let p = pre(2, 1, 2, 1);
        let expected: Vec<String> = (2..=6).map(|l| (l + 1).to_string()).collect();
        let mut computed = Vec::new();
        for l in 2..=6 {
            computed.push(log_order(&model_group(&p, l)?.group, 2)?.to_string());
        }
        Ok(Outcome::compare(format!("{p}, levels 2..=6"), expected.join(","), computed.join(",")))
    }));
    jobs
}

fn slug(p: &ModelParams) -> String {
    match p.preperiodic_data() {
        Ok((m, omega)) => format!("pre-{}-{}-{}-{}", p.d, m, p.n, omega),
        Err(_) => format!("per-{}-{}", p.d, p.n),
    }
}

fn list(xs: &[i64]) -> String {
    let body: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", body.join(","))
}

/// Exponents `ε = 1 + d·e`, `0 ≤ e < count`, for which the power conjugator
/// lies in the group.
fn member_exponents(g: &ModelGroup, count: i64) -> Result<Vec<i64>> {
    let d = g.params.d as i64;
    let mut out = Vec::new();
    for e in 0..count {
        if power_conjugator_in_group(g, e)? {
            out.push(1 + d * e);
        }
    }
    Ok(out)
}

fn kappa_jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for p in preperiodic_grid() {
        let tag = classify_case(&p).expect("grid parameters classify");
        for l in p.n + 1..=p.n + 2 {
            let p = p.clone();
            if tag == CaseTag::D {
                jobs.push(job(format!("{}/level-{l}", slug(&p)), "dihedral conjugacy in case D", move |_| {
                    let g = model_group(&p, l)?;
                    let modulus = 1i64 << l;
                    let count = modulus;
                    let expected: Vec<i64> = (0..count)
                        .map(|e| 1 + 2 * e)
                        .filter(|x| x.rem_euclid(modulus) == 1 || x.rem_euclid(modulus) == modulus - 1)
                        .collect();
                    let computed = member_exponents(&g, count)?;
                    Ok(Outcome::compare(
                        format!("{p}, level {l}, ε ≡ ±1 mod {modulus}"),
                        list(&expected),
                        list(&computed),
                    ))
                }));
                continue;
            }
            jobs.push(job(format!("{}/level-{l}", slug(&p)), "power conjugator membership", move |_| {
                let g = model_group(&p, l)?;
                let k = kappa(&p)? as i64;
                let d = p.d as i64;
                let count = 2 * k / d;
                let expected: Vec<i64> = (0..count)
                    .map(|e| 1 + d * e)
                    .filter(|x| x.rem_euclid(k) == 1)
                    .collect();
                let computed = member_exponents(&g, count)?;
                Ok(Outcome::compare(
                    format!("{p} [{tag}], level {l}, kappa {k}"),
                    list(&expected),
                    list(&computed),
                ))
            }));
        }
    }
    for (d, n) in [(2usize, 1usize), (2, 2), (3, 1)] {
        for l in 1..=5usize {
            let p = per(d, n);
            jobs.push(job(format!("{}/level-{l}", slug(&p)), "power conjugator membership", move |_| {
                let g = model_group(&p, l)?;
                let modulus = (d as i64).pow(((l - 1) / n + 1) as u32);
                let count = (2 * modulus / d as i64).max(2);
                let expected: Vec<i64> = (0..count)
                    .map(|e| 1 + d as i64 * e)
                    .filter(|x| x.rem_euclid(modulus) == 1)
                    .collect();
                let computed = member_exponents(&g, count)?;
                Ok(Outcome::compare(
                    format!("{p}, level {l}, modulus {modulus}"),
                    list(&expected),
                    list(&computed),
                ))
            }));
        }
    }
    jobs
}

/// Conjugacy classes of the whole ambient group by exhaustive orbit
/// computation, as a map from element to class index.
fn class_map(shape: TreeShape, amb: Ambient) -> Result<HashMap<Portrait, usize>> {
    let all = Portrait::enumerate(shape, amb == Ambient::Cyclic, 1 << 16)?;
    let mut class: HashMap<Portrait, usize> = HashMap::new();
    let mut next = 0;
    for u in &all {
        if class.contains_key(u) {
            continue;
        }
        for w in &all {
            class.insert(u.conjugate_by(w)?, next);
        }
        next += 1;
    }
    Ok(class)
}

fn random_in(shape: TreeShape, amb: Ambient, rng: &mut ChaCha8Rng) -> Portrait {
    match amb {
        Ambient::Cyclic => Portrait::random_cyclic(shape, rng),
        Ambient::Full => Portrait::random_full(shape, rng),
    }
}

fn conjugacy_jobs() -> Vec<Job> {
    let mut jobs = vec![job("C2-level-3/all-pairs", "wreath conjugacy criterion", |_| {
        let shape = TreeShape::new(2, 3)?;
        let class = class_map(shape, Ambient::Cyclic)?;
        let all = Portrait::enumerate(shape, true, 1 << 16)?;
        let mut disagreements = 0usize;
        let mut pairs = 0usize;
        for u in &all {
            for v in &all {
                pairs += 1;
                if are_conjugate(u, v, Ambient::Cyclic)? != (class[u] == class[v]) {
                    disagreements += 1;
                }
            }
        }
        Ok(Outcome::compare(
            format!("[C_2]^3, {pairs} pairs"),
            "0 disagreements".to_string(),
            format!("{disagreements} disagreements"),
        ))
    })];
    for (label, d, l, amb) in [
        ("C3-level-2", 3usize, 2usize, Ambient::Cyclic),
        ("S2-level-3", 2, 3, Ambient::Full),
        ("S3-level-2", 3, 2, Ambient::Full),
    ] {
        jobs.push(job(format!("{label}/random-pairs"), "wreath conjugacy criterion", move |rng| {
            let shape = TreeShape::new(d, l)?;
            let trials = 600usize;
            let mut disagreements = 0usize;
            let mut positives = 0usize;
            for t in 0..trials {
                let u = random_in(shape, amb, rng);
                // half the pairs are conjugate by construction
                let v = if t % 2 == 0 {
                    u.conjugate_by(&random_in(shape, amb, rng))?
                } else {
                    random_in(shape, amb, rng)
                };
                let fast = are_conjugate(&u, &v, amb)?;
                let slow = brute_force_conjugator(&u, &v, amb, 1 << 16)?.is_some();
                positives += usize::from(slow);
                if fast != slow {
                    disagreements += 1;
                }
            }
            Ok(Outcome::compare(
                format!("{label}, {trials} pairs, {positives} conjugate"),
                "0 disagreements".to_string(),
                format!("{disagreements} disagreements"),
            ))
        }));
    }
    jobs.push(job("S2-level-3/witnesses", "wreath conjugacy criterion", |rng| {
        let shape = TreeShape::new(2, 3)?;
        let mut bad = 0usize;
        for _ in 0..200 {
            let u = Portrait::random_full(shape, rng);
            let v = u.conjugate_by(&Portrait::random_full(shape, rng))?;
            match crate::conjugacy::conjugator(&u, &v, Ambient::Full)? {
                Some(w) if u.conjugate_by(&w)? == v => {}
                _ => bad += 1,
            }
        }
        Ok(Outcome::compare("200 conjugate pairs", 0usize, bad))
    }));
    jobs
}

fn worked_example_jobs() -> Vec<Job> {
    let word = [2usize, 1, 1, 3, 1];
    vec![
        job("portrait-action", "recursive solution example", move |_| {
            let sys = RecursionSystem::parse(WORKED_EXAMPLE)?;
            let sol = solve(&sys, word.len())?;
            let image = sol["x1"].act(&word)?;
            Ok(Outcome::compare("x1 on 21131", "31211".to_string(), digits(&image)))
        }),
        job("symbolic-action", "recursive solution example", move |_| {
            let sys = RecursionSystem::parse(WORKED_EXAMPLE)?;
            let image = sys.act_by_recursion(&GroupWord::name("x1"), &word)?;
            Ok(Outcome::compare("x1 on 21131", "31211".to_string(), digits(&image)))
        }),
        job("all-words-level-4", "recursive solution example", |_| {
            // the solved portrait and letter-by-letter unfolding agree everywhere
            let sys = RecursionSystem::parse(WORKED_EXAMPLE)?;
            let sol = solve(&sys, 4)?;
            let mut bad = 0usize;
            for code in 0..81usize {
                let w: Vec<usize> = (0..4).map(|k| code / 3usize.pow(k) % 3 + 1).collect();
                for name in ["x1", "x2"] {
                    if sol[name].act(&w)? != sys.act_by_recursion(&GroupWord::name(name), &w)? {
                        bad += 1;
                    }
                }
            }
            Ok(Outcome::compare("162 word actions", 0usize, bad))
        }),
    ]
}

fn digits(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect()
}

fn odometer_jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for d in [2usize, 3] {
        for l in 1..=5usize {
            jobs.push(job(format!("order-d{d}-level-{l}"), "odometer order", move |_| {
                let c = Portrait::odometer(TreeShape::new(d, l)?);
                let cycles = c.leaf_permutation().cycle_lengths();
                let n = d.pow(l as u32);
                let computed = format!("order {}, cycles {:?}", c.order(), cycles);
                Ok(Outcome::compare(
                    format!("d={d}, level {l}"),
                    format!("order {n}, cycles [{n}]"),
                    computed,
                ))
            }));
        }
    }
    for (d, l) in [(2usize, 3usize), (2, 5), (3, 2), (3, 4)] {
        jobs.push(job(format!("chi-criterion-d{d}-level-{l}"), "odometer criterion", move |rng| {
            let shape = TreeShape::new(d, l)?;
            let c = Portrait::odometer(shape);
            let mut bad = 0usize;
            let mut odometers = 0usize;
            for t in 0..200 {
                let u = if t % 3 == 0 {
                    c.conjugate_by(&Portrait::random_cyclic(shape, rng))?
                } else {
                    Portrait::random_cyclic(shape, rng)
                };
                let strict = is_odometer(&u, Ambient::Cyclic)?;
                let conj = are_conjugate(&u, &c, Ambient::Cyclic)?;
                odometers += usize::from(conj);
                if strict != conj {
                    bad += 1;
                }
            }
            Ok(Outcome::compare(
                format!("d={d}, level {l}, 200 portraits, {odometers} odometers"),
                0usize,
                bad,
            ))
        }));
    }
    jobs.push(job("centralizer-S2-level-3", "odometer self-centralizing", |_| {
        let c = Portrait::odometer(TreeShape::new(2, 3)?);
        let cent = brute_force_centralizer(&c, Ambient::Full, 1 << 16)?;
        let powers: HashSet<Portrait> = (0..8).map(|k| c.pow(k)).collect();
        let all_powers = cent.iter().all(|w| powers.contains(w));
        Ok(Outcome::compare(
            "[S_2]^3",
            "8 elements, all powers of c".to_string(),
            format!(
                "{} elements, {}",
                cent.len(),
                if all_powers { "all powers of c" } else { "not all powers of c" }
            ),
        ))
    }));
    jobs
}

/// Parameter sets and levels for the semirigidity draws.
fn semirigidity_grid() -> Vec<(ModelParams, usize)> {
    let mut out: Vec<(ModelParams, usize)> = periodic_grid()
        .into_iter()
        .map(|(p, max)| (p, max.min(5)))
        .collect();
    out.extend(preperiodic_grid().into_iter().map(|p| {
        let l = (p.n + 2).min(5);
        (p, l)
    }));
    out
}

fn semirigidity_jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for (p, l) in semirigidity_grid() {
        let q = p.clone();
        jobs.push(job(format!("{}/conjugate-generators", slug(&p)), "semirigidity", move |rng| {
            let g = model_group(&q, l)?;
            let base = g.group.order().value;
            let mut differing = 0usize;
            for _ in 0..20 {
                let conj: Vec<Portrait> = (0..q.n)
                    .map(|_| Portrait::random_cyclic(g.shape(), rng))
                    .collect();
                let gens = conjugated_generators(&g, &conj)?;
                let h = PermGroup::from_portraits(g.shape(), &gens)?;
                if h.order().value != base {
                    differing += 1;
                }
            }
            Ok(Outcome::compare(
                format!("{q}, level {l}, 20 draws, order {base}"),
                "0 draws with a different order".to_string(),
                format!("{differing} draws with a different order"),
            ))
        }));
        jobs.push(job(format!("{}/conjugate-recurrences", slug(&p)), "weak recursion", move |rng| {
            let sys = model_system(&p)?;
            let names = p.generator_names();
            let base = solve(&sys, l)?;
            let shape = TreeShape::new(p.d, l)?;
            let mut bad = 0usize;
            for trial in 0..5 {
                let mut conj = sys.clone();
                for name in &names {
                    if rng.gen_bool(0.7) || trial == 0 {
                        conj = conj.conjugate_equation(name, &Portrait::random_cyclic(shape, rng))?;
                    }
                }
                let sol = solve(&conj, l)?;
                for name in &names {
                    if !are_conjugate(&base[name], &sol[name], Ambient::Cyclic)? {
                        bad += 1;
                    }
                }
            }
            Ok(Outcome::compare(
                format!("{p}, level {l}, 5 re-solves"),
                "0 non-conjugate solutions".to_string(),
                format!("{bad} non-conjugate solutions"),
            ))
        }));
    }
    jobs
}

fn heisenberg_closure(gens: &[Heisenberg]) -> HashSet<Heisenberg> {
    let d = gens[0].d;
    let mut seen = HashSet::from([Heisenberg::identity(d)]);
    let mut stack = vec![Heisenberg::identity(d)];
    while let Some(x) = stack.pop() {
        for g in gens {
            let y = x.mul(g);
            if seen.insert(y) {
                stack.push(y);
            }
        }
    }
    seen
}

fn heisenberg_jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for d in [2u64, 3, 4, 5] {
        jobs.push(job(format!("d{d}/axioms"), "Heisenberg group", move |_| {
            let all = Heisenberg::all(d);
            let e = Heisenberg::identity(d);
            let mut bad = 0usize;
            for x in &all {
                if x.mul(&e) != *x || e.mul(x) != *x || !x.mul(&x.inverse()).is_identity() {
                    bad += 1;
                }
            }
            let step = if d > 3 { 7 } else { 1 };
            for x in all.iter().step_by(step) {
                for y in &all {
                    for z in all.iter().step_by(step) {
                        if x.mul(y).mul(z) != x.mul(&y.mul(z)) {
                            bad += 1;
                        }
                    }
                }
            }
            Ok(Outcome::compare(format!("d={d}"), 0usize, bad))
        }));
        jobs.push(job(format!("d{d}/order"), "Heisenberg group", move |_| {
            let total = Heisenberg::all(d).len();
            let generated = heisenberg_closure(&[Heisenberg::g1(d), Heisenberg::g2(d)]).len();
            let n = d.pow(3);
            Ok(Outcome::compare(
                format!("d={d}"),
                format!("{n} elements, {n} generated by g1 g2"),
                format!("{total} elements, {generated} generated by g1 g2"),
            ))
        }));
        jobs.push(job(format!("d{d}/presentation"), "Heisenberg presentation", move |_| {
            let (g1, g2) = (Heisenberg::g1(d), Heisenberg::g2(d));
            let c = g1.commutator(&g2);
            let relations = [
                g1.pow(d as i64),
                g2.pow(d as i64),
                g1.commutator(&c),
                g2.commutator(&c),
            ];
            let holds = relations.iter().filter(|r| r.is_identity()).count();
            // the commutator has order exactly d
            let c_order = (1..=d).find(|&k| c.pow(k as i64).is_identity()).unwrap_or(0);
            Ok(Outcome::compare(
                format!("d={d}"),
                format!("4 relations hold, [g1,g2] of order {d}"),
                format!("{holds} relations hold, [g1,g2] of order {c_order}"),
            ))
        }));
        jobs.push(job(format!("d{d}/involution"), "Heisenberg involution", move |_| {
            let all = Heisenberg::all(d);
            let (g1, g2) = (Heisenberg::g1(d), Heisenberg::g2(d));
            let mut bad = 0usize;
            for x in &all {
                if x.tau().tau() != *x {
                    bad += 1;
                }
                for y in all.iter().step_by(3) {
                    if x.mul(y).tau() != x.tau().mul(&y.tau()) {
                        bad += 1;
                    }
                }
            }
            let swaps = g1.tau() == g2 && g2.tau() == g1;
            Ok(Outcome::compare(
                format!("d={d}"),
                "involutive automorphism, tau(g1)=g2".to_string(),
                format!(
                    "{} violations, tau(g1){}g2",
                    bad,
                    if swaps { "=" } else { "!=" }
                ),
            )
            .and(bad == 0 && swaps))
        }));
    }
    jobs.push(job("psi-A-kernel", "Heisenberg quotient maps", |rng| {
        let p = pre(3, 2, 3, 1);
        let g = model_group(&p, p.n)?;
        let d = p.d;
        let mut hom_failures = 0usize;
        for _ in 0..200 {
            let (_, wx) = g.group.random_word_element(8, rng);
            let (_, wy) = g.group.random_word_element(8, rng);
            let (x, y) = (g.eval(&wx)?, g.eval(&wy)?);
            let (a, b) = (psi_a(&x, &p)?, psi_a(&y, &p)?);
            if psi_a(&x.compose(&y)?, &p)? != ((a.0 + b.0) % d, (a.1 + b.1) % d) {
                hom_failures += 1;
            }
        }
        let images: HashSet<(usize, usize)> = g
            .generators
            .values()
            .map(|u| psi_a(u, &p))
            .collect::<Result<_>>()?;
        let image_size = subgroup_size_zd2(&images, d);
        let n = branch_subgroup_n(&g)?;
        let n_in_kernel = n
            .generator_portraits()
            .unwrap_or_default()
            .iter()
            .all(|x| psi_a(x, &p) == Ok((0, 0)));
        let index = g.group.index(&n)?.value;
        Ok(kernel_outcome(&p, hom_failures, n_in_kernel, image_size, index))
    }));
    jobs.push(job("psi-B-kernel", "Heisenberg quotient maps", |rng| {
        let p = pre(2, 1, 3, 1);
        let g = model_group(&p, p.n + 1)?;
        let mut hom_failures = 0usize;
        for _ in 0..200 {
            let (_, wx) = g.group.random_word_element(8, rng);
            let (_, wy) = g.group.random_word_element(8, rng);
            let (x, y) = (g.eval(&wx)?, g.eval(&wy)?);
            if psi_b(&x.compose(&y)?, &p)? != psi_b(&x, &p)?.mul(&psi_b(&y, &p)?) {
                hom_failures += 1;
            }
        }
        let gens: Vec<Heisenberg> = g
            .generators
            .values()
            .map(|u| psi_b(u, &p))
            .collect::<Result<_>>()?;
        let image_size = heisenberg_closure(&gens).len();
        let n = branch_subgroup_n(&g)?;
        let n_in_kernel = n
            .generator_portraits()
            .unwrap_or_default()
            .iter()
            .all(|x| psi_b(x, &p).is_ok_and(|v| v.is_identity()));
        let index = g.group.index(&n)?.value;
        Ok(kernel_outcome(&p, hom_failures, n_in_kernel, image_size, index))
    }));
    jobs
}

impl Outcome {
    fn and(mut self, pass: bool) -> Outcome {
        self.pass = pass;
        self
    }
}

/// The kernel equals `𝒩` when `𝒩` maps trivially and `[M : 𝒩]` equals the
/// size of the image.
fn kernel_outcome(
    p: &ModelParams,
    hom_failures: usize,
    n_in_kernel: bool,
    image_size: usize,
    index: BigUint,
) -> Outcome {
    let computed = format!(
        "{hom_failures} homomorphism failures, N in kernel: {n_in_kernel}, image {image_size}, index {index}"
    );
    let pass = hom_failures == 0 && n_in_kernel && BigUint::from(image_size) == index;
    Outcome {
        params: p.to_string(),
        expected: "homomorphism with kernel N (image size = [M:N])".into(),
        computed,
        pass,
    }
}

fn subgroup_size_zd2(gens: &HashSet<(usize, usize)>, d: usize) -> usize {
    let mut seen = HashSet::from([(0usize, 0usize)]);
    let mut stack = vec![(0usize, 0usize)];
    while let Some((a, b)) = stack.pop() {
        for (x, y) in gens {
            let next = ((a + x) % d, (b + y) % d);
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    seen.len()
}

fn hausdorff_jobs() -> Vec<Job> {
    let mut cases = periodic_grid();
    cases.extend(preperiodic_grid().into_iter().map(|p| {
        let max = p.n + 3;
        (p, max)
    }));
    let mut jobs = Vec::new();
    for (p, max) in cases {
        jobs.push(job(format!("{}/trend", slug(&p)), "Hausdorff dimension", move |_| {
            let h = hausdorff_dimension(&p)?;
            let mut gaps: Vec<BigRational> = Vec::new();
            for l in 1..=max {
                let g = model_group(&p, l)?;
                let log = BigRational::from_integer(log_order(&g.group, p.d)?.into());
                let denom = BigRational::from_integer(bracket_big(p.d as u64, l as u64).into());
                gaps.push((log / denom - &h).abs());
            }
            let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
            let mut pass = monotone;
            let mut expected = "non-increasing distance".to_string();
            let mut computed = format!(
                "distances {}",
                gaps.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ")
            );
            if classify_case(&p)? == CaseTag::C {
                let eleven_sixteenths = BigRational::new(11.into(), 16.into());
                let within = gaps.iter().enumerate().all(|(i, gap)| {
                    let l = i as i32 + 1;
                    let tol = BigRational::new(1.into(), 2.into()).pow(l - 5);
                    h == eleven_sixteenths && *gap <= tol
                });
                pass &= within;
                expected.push_str(", within 2^(5-l) of 11/16");
                computed.push_str(&format!(", tolerance {}", if within { "met" } else { "violated" }));
            }
            Ok(Outcome {
                params: format!("{p}, levels 1..={max}, dimension {h}"),
                expected,
                computed,
                pass,
            })
        }));
    }
    jobs
}

fn constant_field_jobs() -> Vec<Job> {
    fn classify(d: usize, field: usize, b: &str) -> Result<OrbitClassification> {
        classify_orbit(d, &Cyclotomic::one(field), &Cyclotomic::parse(b, field)?, 50)
    }
    fn conductors(cls: &OrbitClassification, d: usize, levels: std::ops::RangeInclusive<usize>) -> Result<String> {
        let mut out = Vec::new();
        for l in levels {
            let ans = constant_field_conductor(cls, d, Level::Finite(l))?;
            out.push(format!("{}{}", ans.conductor, if ans.real_subfield { "+" } else { "" }));
        }
        Ok(out.join(","))
    }
    vec![
        job("x2-minus-1", "constant field, periodic", |_| {
            let cls = classify(2, 2, "-1")?;
            let expected = format!(
                "Periodic(2); {}",
                (1..=6u32).map(|l| (1u64 << ((l - 1) / 2 + 1)).to_string()).collect::<Vec<_>>().join(",")
            );
            let computed = format!("{cls}; {}", conductors(&cls, 2, 1..=6)?);
            Ok(Outcome::compare("x^2 - 1, levels 1..=6", expected, computed))
        }),
        job("x2-minus-2", "constant field, case D", |_| {
            let cls = classify(2, 2, "-2")?;
            let tag = cls.case_tag(2)?;
            let expected = format!(
                "Preperiodic(1,2,1) D; 2,2,{}",
                (3..=7u32).map(|l| format!("{}+", 1u64 << l)).collect::<Vec<_>>().join(",")
            );
            let computed = format!("{cls} {tag}; {}", conductors(&cls, 2, 1..=7)?);
            Ok(Outcome::compare("x^2 - 2, levels 1..=7", expected, computed))
        }),
        job("x2-plus-i", "constant field, case B", |_| {
            let cls = classify(2, 4, "z")?;
            let tag = cls.case_tag(2)?;
            let expected = "Preperiodic(1,3,1) B2; 2,2,2,8,8,8,8".to_string();
            let computed = format!("{cls} {tag}; {}", conductors(&cls, 2, 1..=7)?);
            Ok(Outcome::compare("x^2 + i over Q(zeta_4), levels 1..=7", expected, computed))
        }),
        job("x2-plus-1-pci", "constant field, post-critically infinite", |_| {
            let cls = classify(2, 2, "1")?;
            let ans = constant_field_conductor(&cls, 2, Level::Finite(5))?;
            let computed = format!("{cls}; {}", ans.conductor);
            Ok(Outcome::compare("x^2 + 1", "PCIUpToBound(50); 2".to_string(), computed))
        }),
        job("conductor-kappa-consistency", "constant field bounds", |_| {
            // every non-D conductor above level n is lcm(d, κ) and divides 2d²
            let mut bad = Vec::new();
            for p in preperiodic_grid() {
                if classify_case(&p)? == CaseTag::D {
                    continue;
                }
                let (m, omega) = p.preperiodic_data()?;
                let cls = OrbitClassification::Preperiodic { m, n: p.n, omega };
                let ans = constant_field_conductor(&cls, p.d, Level::Finite(p.n + 1))?;
                let k = BigUint::from(kappa(&p)?);
                let bound = BigUint::from(2 * p.d * p.d);
                let ok = match &ans.conductor {
                    Conductor::Finite(c) => *c == k && (&bound % c).is_zero(),
                    Conductor::Infinite => false,
                };
                if !ok {
                    bad.push(p.to_string());
                }
            }
            Ok(Outcome::compare("grid", "none".to_string(), if bad.is_empty() { "none".into() } else { bad.join("; ") }))
        }),
    ]
}
