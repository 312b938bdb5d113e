mod common;

use std::fs;

use common::config_path;
use qframes::scenarios::{ScenarioConfig, ScenarioKind};
use qframes::Error;

fn text(name: &str) -> String {
    fs::read_to_string(config_path(name)).unwrap()
}

fn with(name: &str, key: &str, value: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(&ScenarioConfig::apply_override(&text(name), key, value).unwrap()).unwrap()
}

#[test]
fn shipped_configs_validate() {
    for (name, kind) in [("collision.toml", ScenarioKind::Collision), ("measurement.toml", ScenarioKind::Measurement)] {
        let cfg = ScenarioConfig::from_toml(&text(name)).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.scenario, kind);
        assert_eq!(cfg.total_steps() as f64 * cfg.time.dt, cfg.time.t_final);
    }
}

#[test]
fn measurement_weights_give_three_tenths() {
    let cfg = ScenarioConfig::from_toml(&text("measurement.toml")).unwrap();
    let w = &cfg.measurement.as_ref().unwrap().weights;
    assert!((w[0] * w[0] - 0.3).abs() < 1e-12);
    assert!((w.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn config_survives_a_round_trip() {
    for name in ["collision.toml", "measurement.toml"] {
        let cfg = ScenarioConfig::from_toml(&text(name)).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}

#[test]
fn hash_ignores_layout_and_key_order() {
    let a = "seed = 1\n[time]\ndt = 0.5\nt_final = 2.0\n";
    let b = "[time]\nt_final = 2.0\ndt    = 5e-1\n\n";
    let c = "seed = 1\n[time]\ndt = 0.25\nt_final = 2.0\n";
    let hb = ScenarioConfig::canonical_hash(&format!("seed = 1\n{b}")).unwrap();
    assert_eq!(ScenarioConfig::canonical_hash(a).unwrap(), hb);
    assert_ne!(ScenarioConfig::canonical_hash(c).unwrap(), hb);
    assert_eq!(hb.len(), 64);
}

#[test]
fn overrides_reach_nested_keys() {
    let cfg = with("collision.toml", "time.dt", "0.001");
    assert_eq!(cfg.time.dt, 0.001);
    let cfg = with("collision.toml", "center_of_mass.masses", "[5.0, 50.0]");
    assert_eq!(cfg.center_of_mass.masses, vec![5.0, 50.0]);
    let cfg = with("collision.toml", "coupling.profile.strength", "0.5");
    assert_eq!(cfg, {
        let mut c = ScenarioConfig::from_toml(&text("collision.toml")).unwrap();
        c.coupling = c.coupling.with_strength(0.5);
        c
    });
    assert!(matches!(
        ScenarioConfig::apply_override(&text("collision.toml"), "nowhere.dt", "1"),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = ScenarioConfig::apply_override(&text("collision.toml"), "time.dtt", "0.1").unwrap();
    assert!(ScenarioConfig::from_toml(&bad).is_err());
}

#[test]
fn validation_names_the_broken_invariant() {
    let cases: [(&str, &str, &str, &str); 6] = [
        ("collision.toml", "time.t_interaction", "0.1", "t_initial < t_interaction"),
        ("collision.toml", "internal.initial", "[[1.0, 0.0], [1.0, 0.0]]", "normalised"),
        ("collision.toml", "center_of_mass.masses", "[]", "masses"),
        ("collision.toml", "particle.label", "\"R_A\"", "twice"),
        ("measurement.toml", "measurement.weights", "[0.6, 0.6]", "|c_l|^2"),
        ("measurement.toml", "measurement.eps", "1.5", "eps"),
    ];
    for (name, key, value, needle) in cases {
        let err = with(name, key, value).validate().unwrap_err();
        match err {
            Error::InvalidConfig(msg) => assert!(msg.contains(needle), "{key}: {msg}"),
            other => panic!("{key}: {other:?}"),
        }
    }
}

#[test]
fn cm_width_follows_inverse_root_w() {
    let cfg = ScenarioConfig::from_toml(&text("collision.toml")).unwrap();
    let s1 = cfg.cm_sigma(100.0);
    let s2 = cfg.cm_sigma(10000.0);
    assert!((s1 / s2 - 10.0).abs() < 1e-12);
    let grid = cfg.cm_grid(10000.0).unwrap();
    assert!(grid.dx() * 3.0 <= s2);
}
