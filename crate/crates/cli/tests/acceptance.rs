//! Acceptance gate: runs the full validation plan and prints one line per
//! criterion. Exits non-zero if any criterion fails.
//!
//! `BARCODELAB_ACCEPTANCE_REPORT=path` additionally writes the full JSON
//! report.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use barcodelab_cli::validate::{
    run_criterion, summarise, ClosedForms, Status, ValidationPlan, CRITERIA,
};

const SEED: u64 = 42;

/// `P(|t_19| > 3)`: chance that a correct closed form lands outside 3 SE
/// when the SE comes from 20 batch means.
const T19_TAIL_3SE: f64 = 0.00736;

fn time_limit(criterion: u8) -> Option<Duration> {
    match criterion {
        1 => Some(Duration::from_secs(1)),
        2 => Some(Duration::from_secs(10)),
        4 => Some(Duration::from_secs(600)),
        _ => None,
    }
}

fn main() -> ExitCode {
    let plan = ValidationPlan::full(SEED);
    let forms = ClosedForms::default();
    let mut all_checks = Vec::new();
    let mut ratio = None;
    let mut failed = 0;

    for (criterion, title) in CRITERIA {
        let start = Instant::now();
        let (checks, r) = run_criterion(criterion, &plan, &forms);
        let elapsed = start.elapsed();
        ratio = ratio.or(r);
        let s = summarise(criterion, &checks);
        let slow = time_limit(criterion).is_some_and(|limit| elapsed > limit);
        let ok = s.status == Status::Pass && !slow;
        if !ok {
            failed += 1;
        }
        let limit = time_limit(criterion)
            .map(|l| format!(" (limit {:.0}s)", l.as_secs_f64()))
            .unwrap_or_default();
        println!(
            "{} criterion {criterion}: {title}: {} checks passed, {} failed, {} documented, {:.2}s{limit}",
            if ok { "PASS" } else { "FAIL" },
            s.passed,
            s.failed,
            s.documented,
            elapsed.as_secs_f64(),
        );
        for c in checks.iter().filter(|c| c.status != Status::Pass) {
            println!(
                "    {:?} {} [{}] measured={:e} {:?} target={:e} tol={:e} se={} {}",
                c.status,
                c.name,
                c.context,
                c.measured,
                c.relation,
                c.target,
                c.tolerance,
                c.std_error
                    .map(|se| format!("{se:e}"))
                    .unwrap_or_else(|| "-".into()),
                c.note.as_deref().unwrap_or("")
            );
        }
        let oracle: Vec<_> = checks
            .iter()
            .filter(|c| c.status != Status::Documented && c.std_error.is_some_and(|se| se > 0.0))
            .collect();
        if !oracle.is_empty() {
            let beyond = oracle.iter().filter(|c| c.status != Status::Pass).count();
            println!(
                "     {} oracle checks with nonzero SE, {beyond} outside tolerance; {:.1} expected from sampling noise alone",
                oracle.len(),
                oracle.len() as f64 * T19_TAIL_3SE
            );
        }
        all_checks.extend(checks);
    }

    if let Some(r) = ratio {
        println!(
            "     ratio point: a={} c={} J={} n={} p_d={} ratio={:.2}",
            r.params.a, r.params.c, r.params.j, r.params.n, r.p_d, r.ratio
        );
    }

    if let Ok(path) = std::env::var("BARCODELAB_ACCEPTANCE_REPORT") {
        let criteria = CRITERIA
            .iter()
            .map(|(c, _)| summarise(*c, &all_checks))
            .collect();
        let report = barcodelab_cli::ValidationReport {
            plan,
            criteria,
            ratio_point: ratio,
            checks: all_checks,
        };
        let text = serde_json::to_string_pretty(&report).expect("serialisable report");
        std::fs::write(&path, text + "\n").expect("writable report path");
    }

    if failed == 0 {
        println!("acceptance: all {} criteria passed", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", CRITERIA.len());
        ExitCode::FAILURE
    }
}
