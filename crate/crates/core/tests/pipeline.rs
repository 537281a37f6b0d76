//! End to end through the library: lattice, fit, encode, rule, forecast,
//! and the binary formats in between.

use lcs_core::causal_states::{fit, FitOptions};
use lcs_core::dynamics::{estimate_phi, forecast, ForecastOptions};
use lcs_core::lattice::{evolve, LatticeConfig};
use lcs_core::lightcone::LightconeShape;
use lcs_core::{format, MARGIN};

fn small_run() -> (lcs_core::SpacetimeField, LightconeShape, FitOptions) {
    let lattice = LatticeConfig { size: 300, seed: 11, ..LatticeConfig::default() };
    let field = evolve(&lattice, 100, 60).unwrap();
    let shape = LightconeShape { h_minus: 3, ..LightconeShape::default() };
    let opts = FitOptions { k_past: 6, k_future: 12, seed: 2, ..FitOptions::default() };
    (field, shape, opts)
}

#[test]
fn lattice_to_forecast() {
    let (field, shape, opts) = small_run();
    let model = fit(&field, &shape, &opts).unwrap();
    assert!((1..=6).contains(&model.n_states()));

    let states = model.encode(&field).unwrap();
    for t in 0..field.rows() {
        let margin = t < 3 || t == field.rows() - 1;
        assert_eq!(states.is_margin_row(t), margin, "row {t}");
        if !margin {
            assert!(states.row(t).iter().all(|&s| s >= 0 && (s as usize) < model.n_states()));
        }
    }

    let rule = estimate_phi(&states, shape.c).unwrap();
    // rows 3..=58 are assigned, so 55 consecutive pairs per site
    assert_eq!(rule.total_count(), 55 * 300);

    let opts = ForecastOptions { steps: 25, seed: 1, decode_seed: 2, spatial_lambda: 0.1 };
    let fc = forecast(&model, &rule, &states, &opts).unwrap();
    assert_eq!(fc.start_row, field.rows() - 2);
    assert_eq!(fc.evolution.states.shape(), (25, 300));
    assert!(fc.evolution.states.data().iter().all(|&s| s != MARGIN));
    assert_eq!(fc.observable.field.shape(), (25, 300));
    assert!(fc.observable.covered.data().iter().all(|&c| c));
    assert!(fc.observable.field.data().iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn artifacts_round_trip_through_files() {
    let (field, shape, opts) = small_run();
    let model = fit(&field, &shape, &opts).unwrap();
    let states = model.encode(&field).unwrap();
    let rule = estimate_phi(&states, 1).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    format::write_grid(&p("x.lcsf"), &field).unwrap();
    format::write_grid(&p("s.lcsf"), &states).unwrap();
    format::write_model(&p("m.lcsm"), &model).unwrap();
    format::write_rule(&p("r.lcsr"), &rule).unwrap();

    let field2: lcs_core::SpacetimeField = format::read_grid(&p("x.lcsf")).unwrap();
    assert_eq!(field2.data(), field.data());
    let model2 = format::read_model(&p("m.lcsm")).unwrap();
    assert_eq!(model2.encode(&field2).unwrap(), states);
    let states2: lcs_core::StateField = format::read_grid(&p("s.lcsf")).unwrap();
    assert_eq!(states2, states);
    assert_eq!(format::read_rule(&p("r.lcsr")).unwrap(), rule);
    assert_eq!(model2.decode(&states, 3).unwrap(), model.decode(&states, 3).unwrap());
}

#[test]
fn refits_are_deterministic() {
    let (field, shape, opts) = small_run();
    let a = format::encode_model(&fit(&field, &shape, &opts).unwrap()).unwrap();
    let b = format::encode_model(&fit(&field, &shape, &opts).unwrap()).unwrap();
    assert_eq!(a, b);
}
