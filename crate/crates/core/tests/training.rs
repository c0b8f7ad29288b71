use qtopo::config::{Encoding, RunConfig};
use qtopo::fem::Benchmark;
use qtopo::optimize::{sweep_seeds, train};

fn small(encoding: Encoding, seed: u64) -> RunConfig {
    RunConfig {
        encoding,
        nx: 16,
        ny: 8,
        iterations: 30,
        seed,
        ..RunConfig::default()
    }
}

#[test]
fn histories_have_one_entry_per_iteration() {
    let run = train(&small(Encoding::Quantum, 0)).unwrap();
    assert_eq!(run.compliance_history.len(), 30);
    assert_eq!(run.volume_history.len(), 30);
    assert_eq!(run.loss_history.len(), 30);
    assert_eq!(run.final_field.len(), 16 * 8);
    assert_eq!(run.loss_history[0].c_norm, 1.0);
    assert_eq!(run.final_volume(), run.final_field.mean());
    assert!(run.final_field.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(run.final_params.len(), 3);
}

#[test]
fn identical_seeds_give_identical_histories() {
    for enc in [Encoding::Quantum, Encoding::Classical] {
        let a = train(&small(enc, 7)).unwrap();
        let b = train(&small(enc, 7)).unwrap();
        assert_eq!(a.compliance_history, b.compliance_history);
        assert_eq!(a.final_field, b.final_field);
        let c = train(&small(enc, 8)).unwrap();
        assert_ne!(a.final_field, c.final_field);
    }
}

#[test]
fn sweep_of_identical_seeds_has_no_spread() {
    let res = sweep_seeds(&small(Encoding::Classical, 0), &[3, 3, 3]).unwrap();
    assert_eq!(res.compliance.std, 0.0);
    assert_eq!(res.diversity, 0.0);
    assert_eq!(res.checkpoint, 30);

    let res = sweep_seeds(&small(Encoding::Classical, 0), &[1, 2, 3]).unwrap();
    assert!(res.diversity > 0.0);
    assert!(res.compliance.std > 0.0);
    assert!(sweep_seeds(&small(Encoding::Classical, 0), &[1]).is_err());
}

#[test]
fn every_mode_trains_without_error() {
    for problem in Benchmark::ALL {
        let mut cfg = small(Encoding::Quantum, 1);
        cfg.problem = problem;
        let run = train(&cfg).unwrap();
        assert!(run.final_compliance().is_finite());
    }
    let mut cfg = small(Encoding::Classical, 1);
    cfg.filtering = true;
    cfg.symmetry = true;
    let run = train(&cfg).unwrap();
    assert!(run.loss_history.iter().all(|l| l.bin == 0.0 && l.tv == 0.0 && l.h1 == 0.0));
    assert!(run.loss_history.last().unwrap().sym > 0.0);
}

#[test]
fn filtering_defaults_to_five_hundred_iterations() {
    let cfg = RunConfig::parse("filtering = true\n", &[]).unwrap();
    assert_eq!(cfg.iterations, 500);
    let cfg = RunConfig::parse("filtering = true\niterations = 120\n", &[]).unwrap();
    assert_eq!(cfg.iterations, 120);
    let cfg = RunConfig::parse("", &["filtering=true".into(), "iterations=500".into()]).unwrap();
    assert_eq!(cfg.iterations, 500);
}
