use sedlab::harness::{run, SimConfig, Tier};

fn tiny(tier: Tier) -> SimConfig {
    let text = "
        # small smoke configuration
        [run]
        T = 0.04
        dt = 0.01
        snapshots = 2
        seed = 7

        [particles]
        n = 120
        samples_per_particle = 2

        [grid]
        n = 16
    ";
    let mut cfg = SimConfig::parse(text).unwrap();
    cfg.tier = tier;
    cfg
}

fn summary_value(path: &std::path::Path, key: &str) -> f64 {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if &rec[0] == key {
            return rec[1].parse().unwrap();
        }
    }
    panic!("{key} not in summary");
}

#[test]
fn every_tier_runs_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for (tier, extra) in [(Tier::Micro, "assumptions.csv"), (Tier::Vlasov, "budget.csv"), (Tier::Transport, "metrics.csv")] {
        let out = dir.path().join(format!("{tier}"));
        let rec = run(&tiny(tier), &out).unwrap();
        assert!(rec.abort.is_none(), "{tier}: {:?}", rec.abort);
        for f in ["config.txt", "metrics.csv", "summary.csv", extra] {
            assert!(out.join(f).is_file(), "{tier}: missing {f}");
        }
        assert!(std::fs::read_dir(out.join("snapshots")).unwrap().count() >= 2);
        assert!((summary_value(&out.join("summary.csv"), "final_time") - 0.04).abs() < 1e-12);
    }
    assert!(dir.path().join("micro").join("checkpoint.bin").is_file());
}

#[test]
fn identical_configs_give_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Tier::Vlasov);
    let a = run(&cfg, &dir.path().join("a")).unwrap();
    let b = run(&cfg, &dir.path().join("b")).unwrap();
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.summary.len(), b.summary.len());
    for ((ka, va), (kb, vb)) in a.summary.iter().zip(&b.summary) {
        assert_eq!(ka, kb);
        assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0), "{ka}: {va} vs {vb}");
    }
    let c = run(&SimConfig { seed: 8, ..cfg }, &dir.path().join("c")).unwrap();
    assert_ne!(a.config_hash, c.config_hash);
}

#[test]
fn config_text_roundtrips() {
    let cfg = tiny(Tier::Micro);
    let back = SimConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(cfg.hash(), back.hash());
}
