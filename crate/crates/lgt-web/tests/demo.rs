use lgt_web::{quench_json, ramp_json, resources_json};

#[test]
fn quench_panel_tracks_exact_evolution() {
    let v = quench_json(2, 0.5, 10).unwrap();
    assert_eq!(v["t"].as_array().unwrap().len(), 11);
    assert_eq!(v["exact"]["gauge"].as_array().unwrap().len(), 11);
    assert!(v["max_deviation"].as_f64().unwrap() < 0.1);
    assert!(quench_json(5, 0.5, 10).is_err());
    assert!(quench_json(3, f64::NAN, 10).is_err());
    assert!(quench_json(3, 0.5, 0).is_err());
}

#[test]
fn ramp_panel_ends_near_ground_state() {
    let v = ramp_json(2, 20, 0.2).unwrap();
    let f: Vec<f64> = v["fidelity"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(f.len(), 20);
    assert!(f.iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)));
    assert!(*f.last().unwrap() > v["reference_fidelity"].as_f64().unwrap());
    assert!(ramp_json(6, 20, 0.2).is_err());
    assert!(ramp_json(2, 20, 0.0).is_err());
}

#[test]
fn census_panel_counts() {
    let v = resources_json(3, 8).unwrap();
    assert_eq!(v["ahm"]["totals"]["group-multiplication"], 48);
    assert_eq!(v["chain"]["totals"]["group-multiplication"], 16);
    assert_eq!(v["pulse_estimate"], 9);
    assert!(resources_json(9, 8).is_err());
    assert!(resources_json(3, 3).is_err());
}
