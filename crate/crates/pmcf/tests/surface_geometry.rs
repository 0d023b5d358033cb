use pmcf::diagnostics::gradient_identity_residual;
use pmcf::spacetimes::{make_hyperboloid_frame, Hyperboloidal, Minkowski, MinkowskiRadial, RadialMap};
use pmcf::surface::ParamGrid;
use pmcf::{embedding_geometry, graph_geometry, surface_laplacian, Background, Graph, GraphState, Grid, SpatialGrid};
use proptest::prelude::*;

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn hyperboloid(n: usize, tau0: f64, r_max: f64, nodes: usize) -> (MinkowskiRadial, Graph) {
    let chart = MinkowskiRadial::new(n, RadialMap::Identity);
    let st = chart.hyperboloid(tau0, Grid::radial(n, r_max, nodes).unwrap());
    (chart, st)
}

#[test]
fn static_flat_slice() {
    let chart = Minkowski { n: 2 };
    let grid = Grid::boxed(&[-1.0, -1.0], &[1.0, 1.0], 17, false).unwrap();
    let st = Graph::from_fn(grid, |_| 0.3);
    let g = graph_geometry(Background::Box(&chart), &st, None, 0.05).unwrap();
    for node in &g.nodes {
        assert!(node.h.abs() < 1e-13);
        assert!((node.kappa - 1.0).abs() < 1e-13);
        assert!((&node.gamma - pmcf::nalgebra::DMatrix::identity(2, 2)).amax() < 1e-13);
    }
}

#[test]
fn tilted_plane_is_a_boosted_slice() {
    let chart = Minkowski { n: 2 };
    let grid = Grid::boxed(&[-1.0, -1.0], &[1.0, 1.0], 17, false).unwrap();
    let st = Graph::from_fn(grid, |x| 0.6 * x[0]);
    let g = graph_geometry(Background::Box(&chart), &st, None, 0.05).unwrap();
    assert!(max_abs(g.h()) < 1e-12);
    assert!(max_abs(g.kappa().into_iter().map(|k| k - 1.25)) < 1e-12);
}

#[test]
fn hyperboloid_mean_curvature_is_n_over_tau() {
    let err = |nodes| {
        let (chart, st) = hyperboloid(3, 2.0, 4.0, nodes);
        let g = graph_geometry(Background::Radial(&chart), &st, None, 0.05).unwrap();
        max_abs(g.h().into_iter().map(|h| h - 1.5))
    };
    let (e1, e2) = (err(65), err(129));
    let h: f64 = 4.0 / 128.0;
    assert!(e2 < h * h, "{e2}");
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn hyperboloid_is_umbilic_with_positive_mean_curvature() {
    let tau0 = 1.5;
    let err = |nodes| {
        let (chart, st) = hyperboloid(2, tau0, 3.0, nodes);
        let g = graph_geometry(Background::Radial(&chart), &st, None, 0.05).unwrap();
        assert!(g.nodes.iter().all(|n| n.h > 0.0));
        g.nodes
            .iter()
            .map(|n| (&n.second_ff - &n.gamma / tau0).amax())
            .fold(0.0, f64::max)
    };
    let ratio = err(41) / err(81);
    assert!(ratio > 3.0, "ratio {ratio}");
}

#[test]
fn flat_plane_embedding_has_no_curvature() {
    let chart = Minkowski { n: 2 };
    let pg = ParamGrid {
        shape: vec![5, 5],
        h: vec![0.1, 0.1],
    };
    let samples: Vec<Vec<f64>> = (0..25).map(|k| vec![0.7, 0.1 * (k / 5) as f64, 0.1 * (k % 5) as f64]).collect();
    let e = embedding_geometry(&chart, &pg, &samples, None).unwrap();
    assert_eq!(e.interior.len(), 9);
    for node in &e.geometry.nodes {
        assert!(node.h.abs() < 1e-12);
        assert!(node.second_ff.amax() < 1e-12);
    }
}

#[test]
fn laplacian_of_linear_function_on_flat_slice() {
    let chart = Minkowski { n: 2 };
    let grid = Grid::boxed(&[-1.0, -1.0], &[1.0, 1.0], 21, false).unwrap();
    let st = Graph::from_fn(grid.clone(), |_| 0.0);
    let g = graph_geometry(Background::Box(&chart), &st, None, 0.05).unwrap();
    let f: Vec<f64> = (0..grid.len()).map(|k| {
        let x = grid.coords(k);
        2.0 * x[0] - 0.5 * x[1] + 1.0
    }).collect();
    assert!(max_abs(surface_laplacian(&g, &f).unwrap()) < 1e-10);
}

#[test]
fn laplacian_of_r_squared_is_2n() {
    for n in 1..=3 {
        let chart = MinkowskiRadial::new(n, RadialMap::Identity);
        let grid = Grid::radial(n, 2.0, 41).unwrap();
        let st = Graph::from_fn(grid.clone(), |_| 0.0);
        let g = graph_geometry(Background::Radial(&chart), &st, None, 0.05).unwrap();
        let f: Vec<f64> = (0..grid.len()).map(|k| grid.coords(k)[0].powi(2)).collect();
        let lap = surface_laplacian(&g, &f).unwrap();
        let err = max_abs(lap.iter().map(|v| v - 2.0 * n as f64));
        assert!(err < 1e-8, "n = {n}: {err}");
    }
}

#[test]
fn radial_laplacian_is_second_order_at_every_node() {
    for n in 1..=4 {
        let err = |nodes| {
            let chart = MinkowskiRadial::new(n, RadialMap::Identity);
            let grid = Grid::radial(n, 3.0, nodes).unwrap();
            let st = Graph::from_fn(grid.clone(), |_| 0.0);
            let g = graph_geometry(Background::Radial(&chart), &st, None, 0.05).unwrap();
            let r: Vec<f64> = (0..grid.len()).map(|k| grid.coords(k)[0]).collect();
            let f: Vec<f64> = r.iter().map(|x| (-x * x).exp()).collect();
            let lap = surface_laplacian(&g, &f).unwrap();
            // Δe^{−r²} = (4r² − 2n)e^{−r²}.
            max_abs((0..grid.len() - 1).map(|k| lap[k] - (4.0 * r[k] * r[k] - 2.0 * n as f64) * f[k]))
        };
        let ratio = err(61) / err(121);
        assert!((3.5..=4.5).contains(&ratio), "n = {n}: ratio {ratio}");
    }
}

#[test]
fn hyperboloid_time_is_constant_on_its_level_set() {
    let (chart, st) = hyperboloid(2, 0.8, 3.0, 61);
    let frame = make_hyperboloid_frame().on(chart);
    let g = graph_geometry(Background::Radial(&chart), &st, Some(&frame), 0.05).unwrap();
    let u = g.u();
    assert!(max_abs(u.iter().map(|v| v - 0.8)) < 1e-12);
    assert!(max_abs(surface_laplacian(&g, &u).unwrap()) < 1e-9);
    let h = st.grid.h_min();
    assert!(max_abs(g.kappa().into_iter().map(|k| k - 1.0)) < h * h);
}

#[test]
fn level_slices_of_the_hyperboloidal_chart_have_unit_tilt() {
    let chart = Hyperboloidal::new(2, 1.0);
    let frame = make_hyperboloid_frame().on(chart);
    let grid = Grid::radial(2, 3.0, 61).unwrap();
    for w in [-0.3, 0.0, 0.5] {
        let st = Graph::from_fn(grid.clone(), |_| w);
        let g = graph_geometry(Background::Radial(&chart), &st, Some(&frame), 1e-3).unwrap();
        assert!(max_abs(g.kappa().into_iter().map(|k| k - 1.0)) < 1e-10);
        assert!(max_abs(g.h().into_iter().map(|h| h - 2.0 / (1.0 + w))) < 1e-10);
    }
}

#[test]
fn gradient_identity_converges_at_second_order() {
    let res = |nodes| {
        let chart = MinkowskiRadial::new(1, RadialMap::Identity);
        let grid = Grid::radial(1, 3.0, nodes).unwrap();
        let st = Graph::from_fn(grid, |x| (1.0 + x[0] * x[0]).sqrt() + 0.1 * (-x[0] * x[0]).exp());
        let frame = make_hyperboloid_frame().on(chart);
        let g = graph_geometry(Background::Radial(&chart), &st, Some(&frame), 0.01).unwrap();
        max_abs(gradient_identity_residual(&g).unwrap())
    };
    let ratio = res(61) / res(121);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn geometry_in_f32() {
    let chart = MinkowskiRadial::new(2, RadialMap::Identity);
    let grid = SpatialGrid::<f32>::radial(2, 2.0, 41).unwrap();
    let st: GraphState<f32> = chart.hyperboloid(1.0f32, grid);
    let g = graph_geometry(Background::Radial(&chart), &st, None, 0.05f32).unwrap();
    for h in g.h() {
        assert!((h - 2.0).abs() < 2e-2, "{h}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hyperboloid_curvature_for_any_radius(n in 1usize..=3, tau0 in 0.5f64..3.0) {
        let (chart, st) = hyperboloid(n, tau0, 2.0 * tau0, 81);
        let g = graph_geometry(Background::Radial(&chart), &st, None, 0.05).unwrap();
        let h = st.grid.h_min() / tau0;
        let err = max_abs(g.h().into_iter().map(|v| v - n as f64 / tau0)) * tau0;
        prop_assert!(err <= 2.0 * h * h, "err {} h {}", err, h);
    }

    #[test]
    fn tilt_of_spacelike_graphs_is_at_least_one(a in -0.5f64..0.5, c in 0.5f64..2.0) {
        let chart = Minkowski { n: 1 };
        let grid = Grid::boxed(&[-2.0], &[2.0], 41, false).unwrap();
        let st = Graph::from_fn(grid, |x| a * (c * x[0]).sin() / c);
        let g = graph_geometry(Background::Box(&chart), &st, None, 0.05).unwrap();
        for k in g.kappa() {
            prop_assert!(k >= 1.0 - 1e-12);
        }
    }
}
