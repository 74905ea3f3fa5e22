mod common;

use std::sync::Arc;

use common::{annihilator, as_col, c, random_state, value_projector, Mat};
use proptest::prelude::*;
use qudit_lgt::circuits::{ahm_trotter_step, chain_trotter_step, Circuit};
use qudit_lgt::experiments::{baryon_target, fig4_couplings, quench_setup, CHAIN_MU, CHAIN_X};
use qudit_lgt::formats::{dump_operator, read_circuit, read_state, write_circuit, write_state, CsvTable, OperatorDump};
use qudit_lgt::gates::GateClass;
use qudit_lgt::groups::{GroupKind, GroupTable};
use qudit_lgt::lattice::build_lattice;
use qudit_lgt::linalg::vdot;
use qudit_lgt::observables::{
    baryon_number, fidelity, hadronic_correlator, hadronic_ft, local_energies, ChainCurrent, CorrelatorBackend,
    CorrelatorRequest, CorrelatorTable, LinkBasis, Window,
};
use qudit_lgt::oracle::{build_ahm, build_chain, chain_full_layout, chain_gauss_law, ChainParams, LinearOperator};
use qudit_lgt::register::{expectation, RegisterLayout, StateVector};
use qudit_lgt::resources::{count_gates, fidelity_estimate, max_repetitions, project_steps, ClassFidelities};
use qudit_lgt::stateprep::{
    adiabatic_prepare, baryon_reference_state, chain_vacuum_state, flux_string_state, variational_prepare, Propagation,
    RampSchedule, VariationalPlan,
};
use qudit_lgt::C64;

fn gauge_expectation(n: usize, s: &StateVector) -> f64 {
    let p = chain_gauss_law(n).unwrap().project(s).unwrap();
    vdot(&s.amps, &p.amps).re
}

#[test]
fn local_energies_sum_to_total() {
    let lat = build_lattice(2, &[2, 2], true).unwrap();
    let h = build_ahm(&lat, 3, fig4_couplings().ahm()).unwrap();
    let psi = random_state(Arc::new(RegisterLayout::gauge(8, 3).unwrap()), 4);
    let e = local_energies(&psi.amps, &h).unwrap();
    assert_eq!(e.terms.len(), 8 + 4 + 8 + 4);
    assert!((e.total() - h.energy(&psi.amps)).abs() < 1e-12);

    let (_, flux) = quench_setup(3).unwrap();
    let e = local_energies(&flux.amps, &h).unwrap();
    let excited = e.terms.iter().filter(|(l, v)| l.starts_with("E[") && v.abs() > 1e-12).count();
    assert_eq!(excited, 2);
    assert!((flux.norm() - 1.0).abs() < 1e-12);
    assert!(local_energies(&flux.amps[..10], &h).is_err());
}

#[test]
fn flux_string_rejects_open_paths() {
    let lat = build_lattice(2, &[2, 2], true).unwrap();
    assert!(flux_string_state(&lat, 3, &[0]).is_err());
}

#[test]
fn baryon_number_examples() {
    for n in [2, 4] {
        let vac = chain_vacuum_state(n).unwrap();
        assert!(baryon_number(&vac).unwrap().abs() < 1e-14);
        let b = baryon_reference_state(n, 0).unwrap();
        assert!((baryon_number(&b).unwrap() - 1.0).abs() < 1e-14);
        assert!((b.norm() - 1.0).abs() < 1e-12);
        let empty = qudit_lgt::register::basis_state(chain_full_layout(n).unwrap(), &vec![0; 3 * n]).unwrap();
        assert!((baryon_number(&empty).unwrap() + n as f64 / 2.0).abs() < 1e-14);
        assert!((gauge_expectation(n, &vac) - 1.0).abs() < 1e-10);
        assert!((gauge_expectation(n, &b) - 1.0).abs() < 1e-10);
    }
    assert!(baryon_reference_state(4, 2).is_err());
    assert!(baryon_reference_state(3, 0).is_err());
}

/// Translation by two sites on the full chain register, with the fermionic reordering sign.
fn translate_two(s: &StateVector, n: usize) -> StateVector {
    let layout = s.layout_arc();
    let mut out = StateVector::zeros(layout.clone());
    for (i, a) in s.amps.iter().enumerate() {
        if a.norm() == 0.0 {
            continue;
        }
        let d = layout.digits(i);
        let mut nd = d.clone();
        for l in 0..n {
            nd[(l + 2) % n] = d[l];
        }
        let mut images = Vec::new();
        for site in 0..n {
            for alpha in 0..2 {
                let to = n + 2 * ((site + 2) % n) + alpha;
                nd[to] = d[n + 2 * site + alpha];
                if d[n + 2 * site + alpha] == 1 {
                    images.push(to);
                }
            }
        }
        let inversions = (0..images.len()).flat_map(|x| (x + 1..images.len()).map(move |y| (x, y))).filter(|&(x, y)| images[x] > images[y]).count();
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        out.amps[layout.flat_index(&nd).unwrap()] += a * sign;
    }
    out
}

#[test]
fn baryon_momentum_states_are_translation_eigenstates() {
    let n = 4;
    let b0 = baryon_reference_state(n, 0).unwrap();
    let b1 = baryon_reference_state(n, 1).unwrap();
    let e0 = vdot(&b0.amps, &translate_two(&b0, n).amps);
    let e1 = vdot(&b1.amps, &translate_two(&b1, n).amps);
    assert!((e0.norm() - 1.0).abs() < 1e-12);
    assert!((e1.norm() - 1.0).abs() < 1e-12);
    assert!((e1 / e0 + c(1.0, 0.0)).norm() < 1e-12);
    assert!(vdot(&b0.amps, &b1.amps).norm() < 1e-12);
}

#[test]
fn fidelity_properties() {
    let layout = chain_full_layout(2).unwrap();
    let a = random_state(layout.clone(), 1);
    assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
    let mut rotated = a.clone();
    rotated.amps.iter_mut().for_each(|z| *z *= C64::from_polar(1.0, 0.7));
    assert!((fidelity(&a, &rotated).unwrap() - 1.0).abs() < 1e-14);
    let b0 = baryon_reference_state(2, 0).unwrap();
    let vac = chain_vacuum_state(2).unwrap();
    assert!(fidelity(&b0, &vac).unwrap() < 1e-15);
}

#[test]
fn currents_are_gauge_invariant_and_real() {
    let n = 2;
    let layout = chain_full_layout(n).unwrap();
    let law = chain_gauss_law(n).unwrap();
    let j1 = ChainCurrent::new(layout.clone(), 1, 0, LinkBasis::Group).unwrap();
    let j0 = ChainCurrent::new(layout.clone(), 0, 0, LinkBasis::Group).unwrap();
    let psi = random_state(layout, 17);
    for op in [&j1, &j0] {
        let e = expectation(&psi, op).unwrap();
        assert!(e.im.abs() < 1e-12);
        for site in 0..n {
            for h in [2usize, 5, 7] {
                let mut t = psi.clone();
                law.apply_v(&mut t, site, h).unwrap();
                assert!((expectation(&t, op).unwrap() - e).norm() < 1e-12);
            }
        }
    }
    assert!(ChainCurrent::new(chain_full_layout(n).unwrap(), 2, 0, LinkBasis::Group).is_err());
}

/// `j¹_0 = Σ_{αβ} ψ†_{0α} U_{αβ} ψ_{1β} + h.c.` as a dense matrix on the N = 2 register.
fn dense_j1() -> Mat {
    let rad = [8, 8, 2, 2, 2, 2];
    let modes = [2, 3, 4, 5];
    let g = GroupTable::new(GroupKind::Quaternion).unwrap();
    let dim = 1024;
    let mut j = Mat::zeros(dim, dim);
    for a in 0..2 {
        for b in 0..2 {
            let mut u = Mat::zeros(dim, dim);
            for el in 0..8 {
                u += value_projector(&rad, 0, el) * g.rep(el)[(a, b)];
            }
            j += annihilator(&rad, &modes, a).adjoint() * u * annihilator(&rad, &modes, 2 + b);
        }
    }
    &j + j.adjoint()
}

#[test]
fn correlator_at_zero_time_matches_dense_product() {
    let target = baryon_target(2, CHAIN_MU, CHAIN_X).unwrap();
    let b = &target.ground;
    let req = CorrelatorRequest { mu: 1, nu: 1, p: 0, xs: vec![0], times: vec![0.0] };
    let chain = ChainParams { n_sites: 2, mu: CHAIN_MU, x: CHAIN_X };
    let table = hadronic_correlator(b, chain, CorrelatorBackend::Exact, &req).unwrap();
    let j = dense_j1();
    let v = as_col(b);
    let want = (v.adjoint() * &j * &j * &v)[(0, 0)].re;
    assert!((table.w[0][0] - want).abs() < 1e-10, "{} {want}", table.w[0][0]);
}

#[test]
fn hadronic_ft_parseval() {
    let (m, steps, dt) = (3usize, 16usize, 0.25);
    let w: Vec<Vec<f64>> = (0..m).map(|x| (0..steps).map(|j| ((x * 7 + j * 3) % 11) as f64 - 5.0).collect()).collect();
    let table = CorrelatorTable {
        mu: 0,
        nu: 0,
        p: 0,
        super_sites: m,
        xs: (0..m).collect(),
        times: (0..steps).map(|j| j as f64 * dt).collect(),
        w: w.clone(),
    };
    let ks: Vec<i64> = (0..m as i64).collect();
    let omegas: Vec<f64> = (0..steps).map(|k| 2.0 * std::f64::consts::PI * k as f64 / (steps as f64 * dt)).collect();
    let spec = hadronic_ft(&table, &ks, &omegas, Window::Rectangular).unwrap();
    let lhs: f64 = spec.values.iter().flatten().map(|z| z.norm_sqr()).sum();
    let rhs: f64 = dt * dt * (m * steps) as f64 * w.iter().flatten().map(|v| v * v).sum::<f64>();
    assert!((lhs - rhs).abs() < 1e-9 * rhs);
}

#[test]
fn zero_length_ramp_returns_initial() {
    let b = baryon_reference_state(2, 0).unwrap();
    let ramp = RampSchedule::linear(1.0, 0.0, 0.5, 0, 0.1);
    for mode in [Propagation::Circuit, Propagation::Subspace] {
        let run = adiabatic_prepare(&b, 2, &ramp, None, mode).unwrap();
        assert!(run.state.amps.iter().zip(&b.amps).all(|(x, y)| (x - y).norm() < 1e-12));
        assert!(run.fidelity.is_empty());
    }
}

#[test]
fn adiabatic_ramp_output_is_physical() {
    let target = baryon_target(2, CHAIN_MU, CHAIN_X).unwrap();
    let ramp = RampSchedule::linear(CHAIN_MU, 0.0, CHAIN_X, 20, 0.2);
    let run = adiabatic_prepare(&target.reference, 2, &ramp, Some(&target.ground), Propagation::Circuit).unwrap();
    assert_eq!(run.fidelity.len(), 20);
    assert!((run.state.norm() - 1.0).abs() < 1e-8);
    assert!((gauge_expectation(2, &run.state) - 1.0).abs() < 1e-8);
    assert!((baryon_number(&run.state).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn variational_examples() {
    let b = baryon_reference_state(2, 0).unwrap();
    let plan = VariationalPlan { blocks: 1, angles: vec![0.0, 0.0], max_iters: 50, restarts: 0, ..VariationalPlan::default() };
    let same = variational_prepare(&b, 2, CHAIN_MU, CHAIN_X, &plan, &b).unwrap();
    assert!(same.fidelity > 1.0 - 1e-12);

    let target = baryon_target(2, CHAIN_MU, CHAIN_X).unwrap();
    let plan = VariationalPlan { blocks: 3, max_iters: 600, restarts: 1, ..VariationalPlan::default() };
    let r = variational_prepare(&target.reference, 2, CHAIN_MU, CHAIN_X, &plan, &target.ground).unwrap();
    assert_eq!(r.nested.len(), 3);
    assert!(r.nested.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", r.nested);
    let prepared = qudit_lgt::stateprep::ansatz_state(&target.reference, 2, CHAIN_MU, CHAIN_X, &r.angles).unwrap();
    assert!((gauge_expectation(2, &prepared) - 1.0).abs() < 1e-8);
    assert!((prepared.norm() - 1.0).abs() < 1e-8);
    assert!(variational_prepare(&b, 2, 1.0, 0.5, &VariationalPlan { blocks: 0, ..VariationalPlan::default() }, &b).is_err());
}

#[test]
fn resource_examples() {
    let lat = build_lattice(2, &[2, 2], true).unwrap();
    let step = ahm_trotter_step(&lat, 3, &fig4_couplings()).unwrap();
    let report = count_gates(&step);
    assert_eq!(report.total(GateClass::GeneralSingle), 48);
    assert_eq!(report.total(GateClass::GroupMultiplication), 48);
    assert_eq!(report.total(GateClass::DiagonalSingle), 8);

    let mut one = Circuit::new("one");
    one.push(step.gates.iter().find(|g| g.class == GateClass::GroupMultiplication).unwrap().clone());
    let f = fidelity_estimate(&count_gates(&one), &ClassFidelities::uniform(0.996)).unwrap();
    assert!((f - 0.996).abs() < 1e-15);
    assert_eq!(max_repetitions(0.996, 0.9, 1000), 26);
    assert_eq!(max_repetitions(1.0, 0.9, 1000), 1000);
    assert!(ClassFidelities::uniform(1.5).0.values().all(|&v| v == 1.5));
    assert!(fidelity_estimate(&report, &ClassFidelities::uniform(1.5)).is_err());

    let chain = project_steps(&chain_trotter_step(8, 1.0, 0.5, 0.1, 1).unwrap(), ClassFidelities::uniform(0.996), 0.9).unwrap();
    assert_eq!(chain.step.total(GateClass::GroupMultiplication), 16);
    assert!(chain.max_steps_depth >= chain.max_steps_count);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fidelity_estimate_is_monotone_in_prefix(cut in 0usize..120, f in 0.9f64..1.0) {
        let lat = build_lattice(2, &[2, 2], true).unwrap();
        let step = ahm_trotter_step(&lat, 3, &fig4_couplings()).unwrap();
        let cut = cut.min(step.gates.len());
        let mut a = Circuit::new("a");
        a.gates = step.gates[..cut].to_vec();
        let fa = fidelity_estimate(&count_gates(&a), &ClassFidelities::uniform(f)).unwrap();
        let fb = fidelity_estimate(&count_gates(&step), &ClassFidelities::uniform(f)).unwrap();
        prop_assert!(fb <= fa + 1e-15);
    }

    #[test]
    fn counts_do_not_depend_on_order_within_layers(seed in 0u64..1000) {
        let step = chain_trotter_step(4, 1.0, 0.5, 0.1, 2).unwrap();
        let mut shuffled = Circuit::new("chain");
        for (k, layer) in step.layers().into_iter().enumerate() {
            let mut idx = layer.clone();
            let r = (seed as usize + k) % idx.len().max(1);
            idx.rotate_left(r);
            for i in idx {
                shuffled.push(step.gates[i].clone());
            }
        }
        let (a, b) = (count_gates(&step), count_gates(&shuffled));
        prop_assert_eq!(a.totals, b.totals);
        prop_assert_eq!(a.depth, b.depth);
        prop_assert_eq!(a.total_layers, b.total_layers);
    }

    #[test]
    fn state_files_round_trip_bit_exactly(seed in any::<u64>(), d in 2usize..5) {
        let s = random_state(Arc::new(RegisterLayout::gauge_fermion(2, d, 1, 2).unwrap()), seed);
        let back = read_state(&write_state(&s).unwrap()).unwrap();
        prop_assert_eq!(back.layout(), s.layout());
        for (x, y) in back.amps.iter().zip(&s.amps) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }
}

#[test]
fn circuit_operator_and_table_files_round_trip() {
    let lat = build_lattice(2, &[2, 2], true).unwrap();
    for step in [ahm_trotter_step(&lat, 3, &fig4_couplings()).unwrap(), chain_trotter_step(4, 1.0, 0.5, 0.1, 2).unwrap()] {
        assert_eq!(read_circuit(&write_circuit(&step).unwrap()).unwrap(), step);
    }
    let (h, _) = build_chain(ChainParams { n_sites: 2, mu: 1.0, x: 0.5 }).unwrap();
    let terms: Vec<(&str, &dyn LinearOperator)> = vec![("H", &h)];
    let dump = dump_operator(&terms, 0.0).unwrap();
    assert_eq!(OperatorDump::from_text(&dump.to_text()).unwrap(), dump);
    let mut t = CsvTable::new("demo", &["a", "b"]);
    t.push(vec!["1".into(), "0.25".into()]);
    assert_eq!(CsvTable::from_text(&t.to_text()).unwrap(), t);
    assert!(read_state("not a state").is_err());
}

#[test]
fn presets_parse_and_validate() {
    for name in qudit_lgt::config::PRESETS {
        let cfg = qudit_lgt::config::ExperimentConfig::from_preset(name).unwrap();
        cfg.validate().unwrap();
    }
    assert!(qudit_lgt::config::ExperimentConfig::from_preset("nope").is_err());
    assert!(qudit_lgt::config::ExperimentConfig::parse("lambda_e = banana\n", None).is_err());
}
