use std::time::{Duration, Instant};

use socsim_core::evaluation::{score_negotiation, NegotiationOutcome, PayoffTable};

use crate::{ensure, Verdict};

/// Tolerance: exact integer equality; whole check under one second.
const MAX_RUNTIME: Duration = Duration::from_secs(1);

/// Per-option points for candidate and manager, written out independently
/// of the bundled table.
const DATE: [(&str, i64, i64); 5] = [("6.1", 2400, 0), ("6.15", 1800, 600), ("7.1", 1200, 1200), ("7.15", 600, 1800), ("8.1", 0, 2400)];
const SALARY: [(&str, i64, i64); 5] =
    [("$100k", 0, 6000), ("$105k", 1500, 4500), ("$110k", 3000, 3000), ("$115k", 4500, 1500), ("$120k", 6000, 0)];

pub async fn table_cells() -> Verdict {
    let started = Instant::now();
    let table = PayoffTable::hiring_negotiation();
    let mut cells = 0;
    for (issue, expected) in [("date", DATE), ("salary", SALARY)] {
        let found = table.issue(issue).ok_or(format!("table has no `{issue}` issue"))?;
        ensure!(found.options.len() == 5, "`{issue}` has {} options, expected 5", found.options.len());
        for (i, (option, cand, mgr)) in expected.iter().enumerate() {
            let idx = found.option_index(option).ok_or(format!("`{issue}` lacks option {option}"))?;
            ensure!(idx == i, "`{issue}` option {option} at position {idx}, expected {i}");
            let got = (found.points.candidate[idx], found.points.manager[idx]);
            ensure!(got == (*cand, *mgr), "`{issue}` {option}: got {got:?}, expected ({cand}, {mgr})");
            cells += 1;
        }
    }
    // Totals of every agreement follow from the cells.
    let mut agreements = 0;
    for (d, dc, dm) in DATE {
        for (s, sc, sm) in SALARY {
            let score = score_negotiation(&NegotiationOutcome::deal([("date", d), ("salary", s)]), &table)
                .map_err(|e| format!("({d}, {s}): {e}"))?;
            ensure!(
                (score.deal_made, score.candidate, score.manager) == (1, dc + sc, dm + sm),
                "({d}, {s}) scored {score:?}"
            );
            agreements += 1;
        }
    }
    let best = score_negotiation(&NegotiationOutcome::deal([("date", "6.1"), ("salary", "$120k")]), &table).unwrap();
    let mid = score_negotiation(&NegotiationOutcome::deal([("date", "7.1"), ("salary", "$110k")]), &table).unwrap();
    ensure!((best.candidate, best.manager) == (8400, 0), "(6.1, $120k) gave {best:?}");
    ensure!((mid.candidate, mid.manager) == (4200, 4200), "(7.1, $110k) gave {mid:?}");
    let elapsed = started.elapsed();
    ensure!(elapsed < MAX_RUNTIME, "took {elapsed:?}");
    Ok(format!("{cells}/10 cells exact, {agreements} agreements totalled, {elapsed:?}"))
}

pub async fn zero_sum() -> Verdict {
    let table = PayoffTable::hiring_negotiation();
    let mut checked = Vec::new();
    for (issue, total) in [("date", 2400), ("salary", 6000)] {
        let found = table.issue(issue).ok_or(format!("table has no `{issue}` issue"))?;
        for (i, option) in found.options.iter().enumerate() {
            let sum = found.points.candidate[i] + found.points.manager[i];
            ensure!(sum == total, "`{issue}` option {option} sums to {sum}, expected {total}");
        }
        checked.push(format!("{issue}={total} over {} options", found.options.len()));
    }
    Ok(checked.join(", "))
}
