//! Corpus ground truth at fuzzing scale: every exploitable entry yields an
//! exploit of its expected class, every safe entry stays clean, and the
//! prober binds exactly the honest catalog while rejecting the decoys.

use oraclefuzz::campaign::{Campaign, CampaignConfig, CampaignError, FeedbackMode};
use oraclefuzz::corpus::{decoys, list_corpus, Label};

fn campaign(file: &str, source: &str, seed: u64, iters: u64) -> Campaign {
    let cfg = CampaignConfig {
        rng_seed: seed,
        max_iters: Some(iters),
        feedback: FeedbackMode::Full,
        ..CampaignConfig::default()
    };
    Campaign::new(file, source, cfg).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn exploitable_entries_yield_matching_exploits() {
    for e in list_corpus().into_iter().filter(|e| e.label == Label::Exploitable) {
        let mut c = campaign(e.file, e.source, 1, 20_000);
        c.run();
        let expected = e.expected_class.unwrap();
        let classes: Vec<_> = c.exploits.iter().filter_map(|x| x.verdict.class).collect();
        assert!(
            classes.contains(&expected),
            "{}: wanted {} among {:?} after {} iterations ({} exploits)",
            e.file,
            expected.as_str(),
            classes,
            c.iterations,
            c.exploits.len(),
        );
        eprintln!(
            "{}: first exploit at iteration {:?}, {} total",
            e.file,
            c.first_exploit_iteration,
            c.exploits.len()
        );
    }
}

#[test]
fn safe_entries_stay_clean() {
    for e in list_corpus().into_iter().filter(|e| e.label == Label::Safe) {
        for seed in [1, 2] {
            let mut c = campaign(e.file, e.source, seed, 3_000);
            c.run();
            assert!(
                c.exploits.is_empty(),
                "{} (seed {seed}): false positive {:?}",
                e.file,
                c.exploits[0].verdict.render(),
            );
        }
    }
}

#[test]
fn every_catalog_entry_binds_and_every_decoy_is_refused() {
    for e in list_corpus() {
        let c = campaign(e.file, e.source, 0, 0);
        assert!(!c.binding.vars.is_empty(), "{} bound nothing", e.file);
    }
    for d in decoys() {
        let cfg = CampaignConfig::default();
        match Campaign::new(d.file, d.source, cfg) {
            Err(CampaignError::NoBookkeeping) => {}
            Ok(_) => panic!("{} bound a variable it should not have", d.file),
            Err(other) => panic!("{}: unexpected error {other}", d.file),
        }
    }
}
