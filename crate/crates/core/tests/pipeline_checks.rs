use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treesmith::pipeline::{
    emit_report, enumerate_factors, run_report, Config, Pipeline, Report, StageRecord, StageState, SCHEMA,
};
use treesmith::registry::MoveRegistry;
use treesmith::whitehead::is_primitive;
use treesmith::{ConjClass, Word};

/// One certified stage: the default config at depth 1 with room for larger twist powers.
fn one_stage_config() -> Config {
    Config { depth_k: 1, k_max: 1000, ..Config::default() }
}

fn one_stage() -> &'static (Report, StageState) {
    static RUN: OnceLock<(Report, StageState)> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = Pipeline::new(one_stage_config()).unwrap();
        let mut last = None;
        let report = run_report(&p, StageState::initial(&p.config).unwrap(), |s| {
            last = Some(s.clone());
            Ok(())
        });
        (report, last.expect("stage 1 completes"))
    })
}

#[test]
fn factor_enumeration_sizes() {
    let moves = MoveRegistry::default();
    assert_eq!(enumerate_factors(4, 0, &moves).len(), 14);
    let one = enumerate_factors(4, 1, &moves);
    assert_eq!(one.len(), 98);
    let two = enumerate_factors(4, 2, &moves);
    assert!(two.len() > one.len());
    // layers extend each other
    for (a, b) in one.iter().zip(&two) {
        assert_eq!(a.generators, b.generators);
    }
    let first: Vec<&Vec<Word>> = one.iter().take(3).map(|f| &f.generators).collect();
    assert_eq!(first, vec![&vec![Word::letter(0)], &vec![Word::letter(1)], &vec![Word::letter(2)]]);
}

#[test]
fn enumerated_factors_are_proper_and_distinct() {
    let fs = enumerate_factors(4, 1, &MoveRegistry::default());
    let mut sigs = std::collections::HashSet::new();
    for f in &fs {
        assert!(f.rank() >= 1 && f.rank() < 4);
        assert!(sigs.insert(f.graph.conjugacy_signature()));
        if f.generators.len() == 1 {
            assert!(is_primitive(&ConjClass::new(&f.generators[0]), 4));
        }
    }
}

#[test]
fn config_validation() {
    assert!(Config::default().validate().is_ok());
    assert!(Config::from_toml("random_u_len = 7").is_err());
    assert!(Config::from_toml("random_u_len = 8").is_ok());
    assert!(Config::from_toml("radius_ratio = 1").is_err());
    assert!(Config::from_toml("rank = 3").is_err());
    assert!(Config::from_toml("edge_word = \"t\"").is_err());
    assert!(Config::from_toml("bogus = 1").is_err());
    let c = Config::from_toml("depth_K = 2\ntol = \"1/500\"\nradius0 = 0.5\n").unwrap();
    assert_eq!(c.depth_k, 2);
    assert_eq!(c.tol, treesmith::twist::Rational::new(1, 500));
    assert_eq!(c.radius(2), treesmith::twist::Rational::new(1, 8));
}

#[test]
fn depth_zero_is_an_empty_passing_report() {
    let config = Config { depth_k: 0, ..Config::default() };
    let p = Pipeline::new(config.clone()).unwrap();
    let report = run_report(&p, StageState::initial(&config).unwrap(), |_| Ok(()));
    assert!(report.stages.is_empty());
    assert!(report.pass());
    assert_eq!(report.radius_trace, vec!["1/4"]);
}

#[test]
fn report_schema() {
    let (report, _) = one_stage();
    let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(v["schema"], SCHEMA);
    assert_eq!(v["config"]["depth_K"], 1);
    let stage = &v["stages"][0];
    for key in ["k", "factor", "freeness", "disjoint_residuals", "eta_zero", "widths", "nesting", "twist_powers"] {
        assert!(!stage[key].is_null(), "missing {key}");
    }
    assert!(stage["factor"]["generators"].is_array());
    assert!(stage["freeness"]["components"].is_u64());
    for key in ["distance", "r_new", "r_old", "pass"] {
        assert!(!stage["nesting"][key].is_null());
    }
    assert_eq!(stage["widths"][0]["scale"], 1);
    let back: Report = serde_json::from_value(v).unwrap();
    assert_eq!(&back, report);
}

#[test]
fn one_stage_certifies() {
    let (report, state) = one_stage();
    assert!(report.failure.is_none(), "{:?}", report.failure);
    assert!(report.pass(), "{}", report.to_json().unwrap());
    let cert = &report.stages[0];
    assert_eq!(cert.freeness.components, 0);
    assert!(cert.eta_zero);
    assert!(cert.disjoint_residuals.iter().all(|&r| r == 0));
    assert_eq!(cert.twist_powers.len(), 4);
    assert_eq!(state.k, 1);
    assert_eq!(state.processed_factors.len(), 1);
}

#[test]
fn processed_factors_have_no_elliptic_elements() {
    let (_, state) = one_stage();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for f in &state.processed_factors {
        for _ in 0..200 {
            let mut g = Word::identity();
            for _ in 0..rng.gen_range(1..=6) {
                let x = &f.generators[rng.gen_range(0..f.generators.len())];
                g = g.mul(&if rng.gen() { x.clone() } else { x.inverse() });
            }
            if g.is_empty() {
                continue;
            }
            assert!(state.t.translation_length_word(&g) > 0, "{g:?} elliptic in T");
            assert!(state.t2.translation_length_word(&g) > 0, "{g:?} elliptic in T′");
        }
    }
}

#[test]
fn stage_pair_lengths_add_on_random_words() {
    let (_, state) = one_stage();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let alphabet = [0, 1, 2, 3];
    for _ in 0..500 {
        let len = rng.gen_range(1..=12);
        let w = treesmith::word::random_word_with(&alphabet, len, &mut rng).unwrap();
        let c = ConjClass::new(&w);
        assert_eq!(state.y.translation_length(&c), state.t.translation_length(&c) + state.t2.translation_length(&c));
    }
}

#[test]
fn state_records_round_trip() {
    let (report, state) = one_stage();
    let config = one_stage_config();
    let record = state.to_record();
    let text = serde_json::to_string(&record).unwrap();
    let back: StageRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, record);
    let restored = StageState::from_record(&back, &config).unwrap();
    assert!(restored.marking().same_map(state.marking()));
    assert_eq!(restored.u, state.u);
    // resuming a finished run changes nothing
    let p = Pipeline::new(config.clone()).unwrap();
    let again = run_report(&p, restored, |_| Ok(()));
    assert_eq!(&again, report);
}

#[test]
fn emitted_report_is_deterministic() {
    let config = one_stage_config();
    let (report, _) = one_stage();
    let p = Pipeline::new(config.clone()).unwrap();
    let rerun = run_report(&p, StageState::initial(&config).unwrap(), |_| Ok(()));
    assert_eq!(rerun.to_json().unwrap(), report.to_json().unwrap());
    assert_eq!(emit_report(&config, &report.stages), *report);
}

#[test]
fn default_twist_budget_stops_in_stage_one() {
    let config = Config { depth_k: 1, ..Config::default() };
    let p = Pipeline::new(config.clone()).unwrap();
    let report = run_report(&p, StageState::initial(&config).unwrap(), |_| Ok(()));
    assert!(!report.pass());
    assert!(report.stages.is_empty());
    assert!(report.failure.as_deref().unwrap_or("").contains("stage 1"));
}
