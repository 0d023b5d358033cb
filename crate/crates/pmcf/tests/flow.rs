use std::sync::Arc;

use pmcf::spacetimes::{make_hyperboloid_frame, MinkowskiRadial, RadialMap};
use pmcf::{
    flow_velocity, run_flow, step, Background, Boundary, ConstantField, DiagnosticsConfig, Flow, FlowConfig, Graph,
    Grid, Integrator, Orientation, Termination,
};
use proptest::prelude::*;

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Hyperboloid height `√(τ² + r²)` with `τ² = τ₀² + 2ns` under the flow with `ℋ = 0`.
fn expanding(n: usize, tau0: f64, s: f64, r: f64) -> f64 {
    (tau0 * tau0 + 2.0 * n as f64 * s + r * r).sqrt()
}

fn self_similar(n: usize, nodes: usize, integrator: Integrator, cfl: f64, s_end: f64) -> Graph {
    let chart = MinkowskiRadial::new(n, RadialMap::Identity);
    let grid = Grid::radial(n, 2.0, nodes).unwrap();
    let st = chart.hyperboloid(1.0, grid);
    let field = ConstantField(0.0);
    let flow = Flow::new(Background::Radial(&chart), &field);
    let cfg = FlowConfig {
        cfl,
        integrator,
        s_end,
        record_every: 1000,
        boundary: Boundary::PinProfile(Arc::new(move |s, x: &[f64]| expanding(n, 1.0, s, x[0]))),
        ..FlowConfig::default()
    };
    let run = run_flow(&flow, &st, &cfg, &DiagnosticsConfig::default()).unwrap();
    assert_eq!(run.termination, Termination::Completed);
    run.final_state
}

#[test]
fn hyperboloid_velocity_vanishes_at_second_order() {
    for orientation in [Orientation::Future, Orientation::Past] {
        let sup = |nodes| {
            let chart = MinkowskiRadial::new(2, RadialMap::Identity);
            let st = chart.hyperboloid(1.0, Grid::radial(2, 3.0, nodes).unwrap());
            let field = ConstantField(2.0 * orientation.sign::<f64>());
            let flow = Flow::new(Background::Radial(&chart), &field).with_orientation(orientation);
            max_abs(flow_velocity(&flow, &st, 0.05).unwrap())
        };
        let ratio = sup(61) / sup(121);
        assert!((3.5..=4.5).contains(&ratio), "{orientation:?}: ratio {ratio}");
    }
}

#[test]
fn zero_velocity_step_only_advances_time() {
    let chart = MinkowskiRadial::new(1, RadialMap::Identity);
    let st = Graph::from_fn(Grid::radial(1, 1.0, 21).unwrap(), |_| 0.25);
    let field = ConstantField(0.0);
    let flow = Flow::new(Background::Radial(&chart), &field);
    let next = step(&flow, &st, &FlowConfig::default()).unwrap();
    assert!(next.s > 0.0);
    assert_eq!(next.w, st.w);
}

#[test]
fn self_similar_solution_is_tracked_in_three_dimensions() {
    let err = |nodes| {
        let st = self_similar(3, nodes, Integrator::Euler, 0.2, 0.2);
        max_abs((0..st.w.len()).map(|k| st.w[k] - expanding(3, 1.0, st.s, st.grid.coords(k)[0])))
    };
    let (e1, e2) = (err(41), err(81));
    assert!(e2 < 1e-3, "{e2}");
    let ratio = e1 / e2;
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn integrators_converge_at_their_order() {
    let reference = self_similar(1, 41, Integrator::Rk4, 0.05, 0.1);
    for (integrator, expect) in [(Integrator::Euler, 2.0), (Integrator::Rk2, 4.0)] {
        let err = |cfl| {
            let st = self_similar(1, 41, integrator, cfl, 0.1);
            assert!((st.s - 0.1).abs() < 1e-14);
            max_abs(st.w.iter().zip(&reference.w).map(|(a, b)| a - b))
        };
        let ratio = err(0.4) / err(0.2);
        assert!((ratio / expect - 1.0).abs() < 0.2, "{integrator:?}: ratio {ratio}");
    }
}

#[test]
fn runs_are_deterministic() {
    let chart = MinkowskiRadial::new(2, RadialMap::Sinh { scale: 1.0 });
    let grid = Grid::radial(2, 2.5, 41).unwrap();
    let mut st = chart.hyperboloid(1.0, grid.clone());
    for k in 0..grid.len() - 1 {
        let r = grid.coords(k)[0];
        st.w[k] += 0.05 * (-r * r).exp();
    }
    let field = ConstantField(2.0);
    let flow = Flow::new(Background::Radial(&chart), &field);
    let cfg = FlowConfig {
        s_end: 0.3,
        record_every: 20,
        delta_floor: 1e-3,
        ..FlowConfig::default()
    };
    let frame = make_hyperboloid_frame().on(chart);
    let diag = DiagnosticsConfig {
        frame: Some(&frame),
        residuals: true,
        ..DiagnosticsConfig::default()
    };
    let a = run_flow(&flow, &st, &cfg, &diag).unwrap();
    let b = run_flow(&flow, &st, &cfg, &diag).unwrap();
    assert!(a.records.len() > 2);
    assert_eq!(a.steps, b.steps);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.csv_row(), y.csv_row());
    }
    let bits = |g: &Graph| g.w.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.final_state), bits(&b.final_state));
}

#[test]
fn strong_field_stops_before_losing_spacelikeness() {
    let chart = MinkowskiRadial::new(1, RadialMap::Identity);
    let st = Graph::from_fn(Grid::radial(1, 2.0, 41).unwrap(), |x| 0.3 * (-x[0] * x[0]).exp());
    let field = ConstantField(40.0);
    let flow = Flow::new(Background::Radial(&chart), &field);
    let cfg = FlowConfig {
        s_end: 2.0,
        record_every: 1,
        ..FlowConfig::default()
    };
    let run = run_flow(&flow, &st, &cfg, &DiagnosticsConfig::default()).unwrap();
    assert_eq!(run.termination.reason(), "SpacelikeViolation");
    assert!(run.records.iter().all(|r| r.q_min >= cfg.delta_floor));
}

#[test]
fn invalid_flow_configs_are_rejected() {
    let bad: [FlowConfig<f64>; 3] = [
        FlowConfig { cfl: 0.0, ..FlowConfig::default() },
        FlowConfig { record_every: 0, ..FlowConfig::default() },
        FlowConfig { delta_floor: 0.7, ..FlowConfig::default() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn static_slices_are_stationary_for_zero_field(n in 1usize..=3, height in -2.0f64..2.0) {
        let chart = MinkowskiRadial::new(n, RadialMap::Identity);
        let st = Graph::from_fn(Grid::radial(n, 1.0, 21).unwrap(), |_| height);
        let field = ConstantField(0.0);
        let flow = Flow::new(Background::Radial(&chart), &field);
        prop_assert!(max_abs(flow_velocity(&flow, &st, 0.05).unwrap()) < 1e-12);
    }

    #[test]
    fn flow_keeps_hyperboloid_above_its_initial_height(amp in 0.0f64..0.05, tau0 in 0.8f64..1.5) {
        // With ℋ = 0 the graph moves to the future, so u never decreases.
        let chart = MinkowskiRadial::new(1, RadialMap::Identity);
        let grid = Grid::radial(1, 2.0, 21).unwrap();
        let mut st = chart.hyperboloid(tau0, grid.clone());
        for k in 0..grid.len() - 1 {
            let r = grid.coords(k)[0];
            st.w[k] += amp * (-r * r).exp();
        }
        let field = ConstantField(0.0);
        let flow = Flow::new(Background::Radial(&chart), &field);
        let cfg = FlowConfig { s_end: 0.1, record_every: 10, ..FlowConfig::default() };
        let run = run_flow(&flow, &st, &cfg, &DiagnosticsConfig::default()).unwrap();
        prop_assert!(run.termination.is_completed());
        for k in 0..grid.len() {
            prop_assert!(run.final_state.w[k] >= st.w[k] - 1e-12);
        }
    }
}
