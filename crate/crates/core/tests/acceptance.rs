//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use wreath_core::verify::{run_suite, Suite, VerifyOptions};

struct Criterion {
    number: usize,
    title: &'static str,
    suite: Suite,
    time_limit: Option<Duration>,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        number: 1,
        title: "branch subgroup indices 4, 8, 8, 16 for (2,2,3,1)",
        suite: Suite::AppendixA,
        time_limit: Some(Duration::from_secs(10)),
    },
    Criterion {
        number: 2,
        title: "closed-form orders equal stabilizer-chain orders on the grid",
        suite: Suite::Orders,
        time_limit: Some(Duration::from_secs(120)),
    },
    Criterion {
        number: 3,
        title: "power conjugator membership iff eps = 1 mod kappa, and the periodic analogue",
        suite: Suite::Kappa,
        time_limit: None,
    },
    Criterion {
        number: 4,
        title: "recursive conjugacy agrees with exhaustive search",
        suite: Suite::Conjugacy,
        time_limit: None,
    },
    Criterion {
        number: 5,
        title: "worked recursion example maps 21131 to 31211",
        suite: Suite::WorkedExample,
        time_limit: None,
    },
    Criterion {
        number: 6,
        title: "odometer orders, cycle structure, criterion and centralizer",
        suite: Suite::Odometer,
        time_limit: None,
    },
    Criterion {
        number: 7,
        title: "conjugated generators and recurrences preserve orders and solutions",
        suite: Suite::Semirigidity,
        time_limit: None,
    },
    Criterion {
        number: 8,
        title: "Heisenberg group, involution and quotient maps",
        suite: Suite::Heisenberg,
        time_limit: None,
    },
    Criterion {
        number: 9,
        title: "normalized log-orders approach the Hausdorff dimension",
        suite: Suite::Hausdorff,
        time_limit: None,
    },
    Criterion {
        number: 10,
        title: "constant-field conductors for x^2-1, x^2-2, x^2+i",
        suite: Suite::ConstantField,
        time_limit: None,
    },
];

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut failed = 0usize;
    for c in &CRITERIA {
        let start = Instant::now();
        let report = run_suite(c.suite, &opts);
        let elapsed = start.elapsed();
        let in_time = c.time_limit.is_none_or(|limit| elapsed <= limit);
        let pass = report.passed() && in_time;
        let status = if pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2}: {status} ({} checks, {:.2}s) {}",
            c.number,
            report.checks.len(),
            elapsed.as_secs_f64(),
            c.title
        );
        if !pass {
            failed += 1;
            for check in report.failures() {
                println!(
                    "    {}: [{}] expected {} computed {}",
                    check.id, check.params, check.expected, check.computed
                );
            }
            if !in_time {
                println!("    exceeded time limit {:?}", c.time_limit.unwrap());
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
