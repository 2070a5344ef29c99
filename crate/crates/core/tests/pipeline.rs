use snrloss::cli::{analyze_pair, direct_draws, representation_draws, ScenarioConfig};
use snrloss::montecarlo::{ks_two_sample, run_sharded, simulate_direct_sharded, DirectSampler};
use snrloss::sampling::RngStream;

const FAMILIES: [&str; 6] = [
    r#"{}"#,
    r#"{"mismatch": {"kind": "mpdr", "gamma_db": 3}}"#,
    r#"{"mismatch": {"kind": "surprise", "power_db": 15, "enforce_ger": false}}"#,
    r#"{"mismatch": {"kind": "ger_blockdiag"}}"#,
    r#"{"mismatch": {"kind": "eigenvalue"}}"#,
    r#"{"mismatch": {"kind": "inverse_wishart", "dof": 20}}"#,
];

#[test]
fn losses_stay_in_unit_interval() {
    for (i, f) in FAMILIES.iter().enumerate() {
        let cfg = ScenarioConfig::from_json(f).unwrap();
        let a = analyze_pair(cfg.build(4, 0).unwrap(), cfg.k).unwrap();
        let d = direct_draws(&a.pair, a.k, 5000, 4, 0, 2).unwrap();
        let r = representation_draws(&a.spec, 5000, 4, 0, 2).unwrap();
        assert!(
            d.iter().chain(&r).all(|x| *x > 0.0 && *x < 1.0),
            "family {i}"
        );
    }
}

#[test]
fn shards_match_single_stream() {
    let cfg = ScenarioConfig::from_json(FAMILIES[4]).unwrap();
    let pair = cfg.build(8, 0).unwrap();
    let single = simulate_direct_sharded(&pair, 32, 40_000, 8, 1).unwrap();
    let sharded = simulate_direct_sharded(&pair, 32, 40_000, 8, 4).unwrap();
    assert_eq!(sharded.values.len(), 40_000);
    assert!(ks_two_sample(&single.values, &sharded.values).p_value > 0.001);
    // each shard is stream s of the seed, in order
    let s = DirectSampler::new(&pair, 32).unwrap();
    let third = s.draws(10_000, &mut RngStream::new(8, 2)).unwrap();
    assert_eq!(&sharded.values[20_000..30_000], third.as_slice());
}

#[test]
fn uneven_shards_cover_budget() {
    let v = run_sharded(1, 3, 10, |rng, t| Ok(vec![rng.stream_id() as f64; t])).unwrap();
    assert_eq!(v, [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
}

#[test]
fn random_scenarios_depend_only_on_seed_and_index() {
    let cfg = ScenarioConfig::from_json(FAMILIES[5]).unwrap();
    assert_eq!(cfg.build(3, 7).unwrap(), cfg.build(3, 7).unwrap());
    assert_ne!(
        cfg.build(3, 7).unwrap().digest(),
        cfg.build(3, 8).unwrap().digest()
    );
    assert!(cfg.is_random());
    assert!(!ScenarioConfig::from_json(FAMILIES[1]).unwrap().is_random());
}

#[test]
fn ger_family_is_ger_and_general_is_not() {
    let ger = ScenarioConfig::from_json(FAMILIES[3]).unwrap();
    let gen = ScenarioConfig::from_json(FAMILIES[4]).unwrap();
    for r in 0..5 {
        let a = analyze_pair(ger.build(1, r).unwrap(), 32).unwrap();
        assert!(a.is_ger && a.ger_angle < 1e-8);
        let b = analyze_pair(gen.build(1, r).unwrap(), 32).unwrap();
        assert!(!b.is_ger && b.pearson.is_none() && b.scaled_f.is_some());
    }
}

#[test]
fn schema_properties_are_accepted_by_the_parser() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../docs/scenario.schema.json"
    ))
    .unwrap();
    let schema: serde_json::Value = serde_json::from_str(&text).unwrap();
    let variants = schema["properties"]["mismatch"]["oneOf"]
        .as_array()
        .unwrap();
    assert_eq!(variants.len(), 6);
    for v in variants {
        let props = v["properties"].as_object().unwrap();
        // every documented field, at its default or a small valid value
        let mut m = serde_json::Map::new();
        for (key, p) in props {
            let value = if key == "kind" {
                p["const"].clone()
            } else if let Some(d) = p.get("default").filter(|d| !d.is_null()) {
                d.clone()
            } else if key == "alpha" {
                serde_json::json!(vec![0.8; 16])
            } else if p["type"] == "array" || p["type"][0] == "array" {
                serde_json::json!([-3, 3])
            } else if key.ends_with("dof") || key.ends_with("shape") {
                serde_json::json!(40)
            } else {
                serde_json::json!(0.5)
            };
            m.insert(key.clone(), value);
        }
        let cfg = serde_json::json!({ "mismatch": m }).to_string();
        let parsed = ScenarioConfig::from_json(&cfg).unwrap_or_else(|e| panic!("{cfg}: {e}"));
        parsed.build(1, 0).unwrap();
        let mut extra = m.clone();
        extra.insert("bogus".into(), serde_json::json!(1));
        assert!(
            ScenarioConfig::from_json(&serde_json::json!({ "mismatch": extra }).to_string())
                .is_err()
        );
    }
    let top: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    assert_eq!(top.len(), 6, "{top:?}");
}
