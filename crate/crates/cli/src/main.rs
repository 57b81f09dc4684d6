//! `wreath`: command-line front end for the wreath-core library.
//!
//! Exit codes: 0 on success, 1 when a verification or consistency check
//! fails, 2 on usage, parse or parameter errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use wreath_core::arithmetic::{
    classify_orbit, constant_field_conductor, Cyclotomic, Level, PciEvidence,
    OrbitClassification,
};
use wreath_core::conjugacy::{conjugator, Ambient};
use wreath_core::model::{
    classify_case, closed_form_log_order, hausdorff_dimension, kappa, model_group, ModelParams,
};
use wreath_core::recursion::{solve, GroupWord, RecursionSystem};
use wreath_core::tree::Literal;
use wreath_core::verify::{run_suite, Suite, VerifyOptions, DEFAULT_SEED};
use wreath_core::{Portrait, TreeShape};

#[derive(Parser)]
#[command(name = "wreath", version, about = "Exact computation in iterated wreath products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a recursion system and print portraits or the action on a word.
    Solve {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        level: Option<usize>,
        /// Leaf word such as 21131; requires --gen.
        #[arg(long, requires = "gen", conflicts_with = "emit")]
        act: Option<String>,
        /// Word in the unknowns to apply, e.g. x1 or x1*x2^-1.
        #[arg(long, requires = "act")]
        gen: Option<String>,
        /// Print only this unknown.
        #[arg(long)]
        emit: Option<String>,
    },
    /// Decide conjugacy of two portrait literals.
    Conj {
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
        #[arg(long, value_enum)]
        ambient: AmbientArg,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Defaults to the depth of the deeper literal.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        witness: bool,
    },
    /// Invariants of a model group.
    Model {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, required_if_eq("family", "pre"))]
        m: Option<usize>,
        #[arg(long, required_if_eq("family", "pre"))]
        omega: Option<usize>,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(value_enum)]
        quantity: Quantity,
    },
    /// Classify the critical orbit of a x^d + b.
    Classify {
        #[arg(long)]
        d: usize,
        /// Cyclotomic literal, a polynomial in z.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long, default_value_t = 50)]
        bound: usize,
        /// Level (or `inf`) at which to report the constant-field conductor.
        #[arg(long)]
        constant_field: Option<String>,
        /// Cyclotomic field index N for Q(zeta_N); defaults to d.
        #[arg(long)]
        field: Option<usize>,
    },
    /// Run verification suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, value_enum, default_value_t = Report::Text)]
        report: Report,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AmbientArg {
    Full,
    Cyclic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Per,
    Pre,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Order,
    Hausdorff,
    Kappa,
    Case,
    Gens,
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Text,
    Json,
}

/// Outcome of a subcommand that ran to completion.
enum Status {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<Status> {
    match cmd {
        Command::Solve {
            system,
            level,
            act,
            gen,
            emit,
        } => cmd_solve(system, level, act, gen, emit),
        Command::Conj {
            u,
            v,
            ambient,
            d,
            level,
            witness,
        } => cmd_conj(&u, &v, ambient, d, level, witness),
        Command::Model {
            family,
            d,
            n,
            m,
            omega,
            level,
            quantity,
        } => {
            let p = match family {
                FamilyArg::Per => ModelParams::periodic(d, n)?,
                FamilyArg::Pre => ModelParams::preperiodic(
                    d,
                    m.ok_or_else(|| anyhow!("--m is required for --family pre"))?,
                    n,
                    omega.ok_or_else(|| anyhow!("--omega is required for --family pre"))?,
                )?,
            };
            cmd_model(&p, level, quantity)
        }
        Command::Classify {
            d,
            a,
            b,
            bound,
            constant_field,
            field,
        } => cmd_classify(d, &a, &b, bound, constant_field.as_deref(), field),
        Command::Verify {
            suite,
            report,
            seed,
            threads,
        } => {
            let suite: Suite = suite.parse()?;
            let rep = run_suite(suite, &VerifyOptions { seed, threads });
            match report {
                Report::Text => print!("{}", rep.to_text()),
                Report::Json => println!("{}", serde_json::to_string_pretty(&rep)?),
            }
            Ok(if rep.passed() { Status::Ok } else { Status::CheckFailed })
        }
    }
}

fn cmd_solve(
    system: PathBuf,
    level: Option<usize>,
    act: Option<String>,
    gen: Option<String>,
    emit: Option<String>,
) -> anyhow::Result<Status> {
    let text = std::fs::read_to_string(&system)
        .with_context(|| format!("cannot read {}", system.display()))?;
    let sys = RecursionSystem::parse(&text).with_context(|| format!("in {}", system.display()))?;
    if let (Some(word), Some(gen)) = (act, gen) {
        let letters = word
            .chars()
            .map(|c| c.to_digit(10).map(|x| x as usize).ok_or_else(|| anyhow!("`{word}` is not a leaf word")))
            .collect::<anyhow::Result<Vec<usize>>>()?;
        let w = GroupWord::parse(&gen, sys.d())?;
        let level = level.unwrap_or(letters.len());
        if level != letters.len() {
            return Err(anyhow!("--level {level} does not match word length {}", letters.len()));
        }
        let image = sys.act_by_recursion(&w, &letters)?;
        println!("{}", image.iter().map(|x| x.to_string()).collect::<String>());
        return Ok(Status::Ok);
    }
    let level = level.ok_or_else(|| anyhow!("--level is required unless --act is given"))?;
    let sol = solve(&sys, level)?;
    match emit {
        Some(name) => {
            let p = sol.get(&name).ok_or_else(|| anyhow!("`{name}` is not an unknown of the system"))?;
            println!("{p}");
        }
        None => {
            for (name, p) in &sol {
                println!("{name} = {p}");
            }
        }
    }
    Ok(Status::Ok)
}

fn cmd_conj(
    u: &str,
    v: &str,
    ambient: AmbientArg,
    d: usize,
    level: Option<usize>,
    witness: bool,
) -> anyhow::Result<Status> {
    let lu = Literal::parse(u, d).context("in --u")?;
    let lv = Literal::parse(v, d).context("in --v")?;
    let level = level.unwrap_or(lu.depth().max(lv.depth()));
    let shape = TreeShape::new(d, level)?;
    let pu = lu.to_portrait(shape).context("in --u")?;
    let pv = lv.to_portrait(shape).context("in --v")?;
    let amb = match ambient {
        AmbientArg::Full => Ambient::Full,
        AmbientArg::Cyclic => Ambient::Cyclic,
    };
    match conjugator(&pu, &pv, amb)? {
        Some(w) => {
            println!("yes");
            if witness {
                // conjugator() has validated w; check once more on the printed form
                let reparsed = Portrait::parse(&w.to_string(), shape)?;
                if pu.conjugate_by(&reparsed)? != pv {
                    println!("witness {w} failed validation");
                    return Ok(Status::CheckFailed);
                }
                println!("witness {w}");
            }
        }
        None => println!("no"),
    }
    Ok(Status::Ok)
}

fn cmd_model(p: &ModelParams, level: usize, quantity: Quantity) -> anyhow::Result<Status> {
    match quantity {
        Quantity::Order => {
            let closed = closed_form_log_order(p, level)?;
            let g = model_group(p, level)?;
            let bsgs = g
                .group
                .order()
                .log(p.d as u64)
                .ok_or_else(|| anyhow!("group order is not a power of {}", p.d))?;
            println!("log_{} order: closed-form {closed}, BSGS {bsgs}", p.d);
            if closed != bsgs as i128 {
                println!("DISAGREEMENT");
                return Ok(Status::CheckFailed);
            }
        }
        Quantity::Hausdorff => println!("{}", hausdorff_dimension(p)?),
        Quantity::Kappa => println!("{}", kappa(p)?),
        Quantity::Case => println!("{}", classify_case(p)?),
        Quantity::Gens => {
            let g = model_group(p, level)?;
            for (name, x) in &g.generators {
                println!("{name} = {x}");
            }
        }
    }
    Ok(Status::Ok)
}

fn cmd_classify(
    d: usize,
    a: &str,
    b: &str,
    bound: usize,
    constant_field: Option<&str>,
    field: Option<usize>,
) -> anyhow::Result<Status> {
    let field = field.unwrap_or(d);
    let a = Cyclotomic::parse(a, field).context("in --a")?;
    let b = Cyclotomic::parse(b, field).context("in --b")?;
    let cls = classify_orbit(d, &a, &b, bound)?;
    println!("{cls}");
    if let OrbitClassification::PciUpToBound {
        evidence: PciEvidence::Escaped { step },
        ..
    } = cls
    {
        println!("orbit escapes to infinity from step {step}");
    }
    println!("case {}", cls.case_tag(d)?);
    if let Some(level) = constant_field {
        let level: Level = level.parse()?;
        let ans = constant_field_conductor(&cls, d, level)?;
        let real = if ans.real_subfield { " (real subfield)" } else { "" };
        let cond = if ans.conditional_on_pci { " (conditional on PCI)" } else { "" };
        println!("conductor {}{real}{cond}", ans.conductor);
    }
    Ok(Status::Ok)
}
