use spinloss::verify::{run_oracle_check, OracleCheckConfig, SuiteStatus};

fn print(reports: &[spinloss::verify::SuiteReport]) {
    for r in reports {
        println!(
            "{:<20} max {:.3e} tol {:.0e} checks {:>6} {:.2}s {:?}",
            r.name, r.max_deviation, r.tolerance, r.checks, r.runtime_s, r.status
        );
    }
}

#[test]
fn default_suites_pass() {
    let reports = run_oracle_check(&OracleCheckConfig::default()).unwrap();
    print(&reports);
    assert!(reports.iter().all(|r| matches!(r.status, SuiteStatus::Passed)));
}

#[test]
fn sign_flip_is_caught() {
    let cfg = OracleCheckConfig {
        sizes: vec![2],
        gammas: vec![0.05],
        inject_sign_flip: true,
        ..Default::default()
    };
    let reports = run_oracle_check(&cfg).unwrap();
    print(&reports);
    let corr = reports.iter().find(|r| r.name == "correlators").unwrap();
    assert!(matches!(corr.status, SuiteStatus::Failed { .. }));
    let unitary = reports.iter().find(|r| r.name == "unitary_correlators").unwrap();
    assert!(!unitary.passed());
}

#[test]
fn lossless_config_skips_dense_suites() {
    let cfg = OracleCheckConfig {
        gammas: vec![0.0],
        ..Default::default()
    };
    let reports = run_oracle_check(&cfg).unwrap();
    for r in &reports {
        match r.name.as_str() {
            "unitary_correlators" | "cat_state" | "decay_generating" => assert!(matches!(r.status, SuiteStatus::Passed)),
            _ => assert!(matches!(r.status, SuiteStatus::Skipped { .. }), "{}", r.name),
        }
    }
}
