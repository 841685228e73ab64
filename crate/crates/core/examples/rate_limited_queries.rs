//! Runs a 100-item job against the mock on a simulated clock at 25
//! queries per second, interrupts it and resumes from the journal.

use std::collections::BTreeMap;
use std::time::Duration;

use modaudit::providers::{MockLexicon, MockTransport, ProviderSpec};
use modaudit::scheduler::{max_issues_per_window, run_job, QueryJob, SimClock};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let items: Vec<(String, String)> = (0..100).map(|i| (format!("s{i}"), format!("sentence number {i}"))).collect();
    let mut job = QueryJob::new(ProviderSpec::mock(), "demo", items, dir.path());
    job.rate_override = Some(25.0);
    let creds = BTreeMap::<String, String>::new();
    let clock = SimClock::new();
    let transport = MockTransport::new(MockLexicon::new(0.2).with_weight("number", 0.1));

    // First run stops after 40 items, as if the process had been killed.
    let mut run = run_job(&job, &clock, &transport, &creds)?;
    let done = run.by_ref().take(40).count();
    let issued = run.client().issue_times();
    drop(run);
    println!("first run: {done} items, {} transport calls", transport.calls());
    println!(
        "max issues in any 1 s window: {}",
        max_issues_per_window(&issued)
    );

    job.resume = true;
    let mut run = run_job(&job, &clock, &transport, &creds)?;
    let rest: Vec<_> = run.by_ref().collect();
    let stats = run.stats();
    println!(
        "resumed run: {} outcomes, {} new transport calls, {} cache hits, {} journaled as done",
        rest.len(),
        stats.transport_calls,
        stats.cache_hits,
        stats.resumed
    );
    println!("simulated time slept: {:?}", clock.sleeps().iter().sum::<Duration>());
    Ok(())
}
