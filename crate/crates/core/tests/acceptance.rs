use gausstv::verify::{run_criterion, CRITERIA, DEFAULT_SEED};

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for id in 1..=CRITERIA.len() {
        let result = run_criterion(id, DEFAULT_SEED).expect("criterion id in range");
        let status = if result.passed { "PASS" } else { "FAIL" };
        println!("{status} {:>2} {} ({:.1}s)", id, result.name, result.seconds);
        if !result.passed {
            println!("     {}", result.details);
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn criteria_are_deterministic_for_a_seed() {
    let first = run_criterion(7, DEFAULT_SEED).unwrap();
    let second = run_criterion(7, DEFAULT_SEED).unwrap();
    assert_eq!(first.details, second.details);
    assert!(run_criterion(0, DEFAULT_SEED).is_none());
    assert!(run_criterion(CRITERIA.len() + 1, DEFAULT_SEED).is_none());
}
