use pmcf::spacetimes::{
    hyperboloid_profile, lst_embedding, make_example_prescribed_h, make_hyperboloid_frame, make_schwarzschild_chart,
    ConstantOnSphere, CosTheta, LstSurface, MinkowskiRadial, RadialMap,
};
use pmcf::nalgebra::{DMatrix, DVector};
use pmcf::{christoffel_at, metric_at, reference_norm, Frame, Grid, PrescribedCurvatureField, Tensor};
use proptest::prelude::*;

#[test]
fn hyperboloid_profile_values() {
    let st = hyperboloid_profile(2.0, Grid::radial(2, 3.0, 9).unwrap());
    assert_eq!(st.w[0], 2.0);
    let st = hyperboloid_profile(0.5, Grid::radial(1, 2.0, 9).unwrap());
    assert!((st.w[4] - 1.25f64.sqrt()).abs() < 1e-15);
}

#[test]
fn hyperboloid_time_example() {
    let f = make_hyperboloid_frame();
    assert_eq!(f.tau(5.0f64, 3.0).unwrap(), 4.0);
    assert_eq!(f.tau(3.0f64, -2.0).unwrap(), 5f64.sqrt());
    assert_eq!(f.tau(1.0f64, 1.0).unwrap_err().reason(), "DomainError");
}

#[test]
fn example_field_at_the_origin() {
    let chart = MinkowskiRadial::new(1, RadialMap::Identity);
    let field = make_example_prescribed_h(chart);
    let v: f64 = field.value(&[0.5, 0.0]).unwrap();
    assert!((v - (2.0 - (-1f64).exp())).abs() < 1e-15);
}

#[test]
fn schwarzschild_tortoise_coordinate() {
    let s = make_schwarzschild_chart(1.0);
    assert!((s.r_star(4.0f64) - 4.0).abs() < 1e-15);
    // dr_*/dr = (1 − 2m/r)^{−1}
    for r in [2.5f64, 4.0, 10.0] {
        let h = 1e-5;
        let d = (s.r_star(r + h) - s.r_star(r - h)) / (2.0 * h);
        assert!((d - 1.0 / (1.0 - 2.0 / r)).abs() < 1e-8, "r = {r}");
    }
}

#[test]
fn schwarzschild_with_vanishing_mass_is_flat_in_null_coordinates() {
    let p: [f64; 4] = [0.2, 0.3, 1.0, 0.5];
    let g = metric_at(&make_schwarzschild_chart(1e-12), &p).unwrap();
    assert!((g[(0, 0)] + 1.0).abs() < 1e-11);
    let riem = pmcf::riemann_at(&make_schwarzschild_chart(0.0), &p).unwrap();
    assert!(riem.max_abs() < 1e-6, "{}", riem.max_abs());
}

#[test]
fn lst_coefficients_for_cos_theta() {
    let th: f64 = 0.7;
    let s = LstSurface::new(CosTheta, 1.5);
    let phi: f64 = s.phi(th, 0.3);
    let psi: f64 = s.psi(th, 0.3);
    assert!((phi + 0.5 * (2.25 + th.sin().powi(2))).abs() < 1e-14);
    let expect = 0.5 * (2.25 * (-2.0 * th.cos()) - 2.0 * th.sin().powi(2) * th.cos());
    assert!((psi - expect).abs() < 1e-14);
    let x = 0.2;
    assert!((s.p(th, 0.3, x) - (th.cos() + x * phi + 0.5 * x * x * psi)).abs() < 1e-14);
}

#[test]
fn lst_constant_function_gives_hyperboloid_coefficients() {
    let s = LstSurface::new(ConstantOnSphere(0.4), 2.0);
    let (phi, psi): (f64, f64) = (s.phi(1.0, 2.0), s.psi(1.0, 2.0));
    assert_eq!(phi, -2.0);
    assert_eq!(psi, 0.0);
}

#[test]
fn lst_embedding_rejects_bad_axes() {
    let s = LstSurface::new(CosTheta, 1.0);
    let th = [0.5f64, 0.6, 0.7];
    assert!(lst_embedding(&s, &[0.0, 0.01, 0.02], &th, &th).is_err());
    assert!(lst_embedding(&s, &[0.01, 0.02, 0.04], &th, &th).is_err());
    assert!(lst_embedding(&s, &[0.01, 0.02], &th, &th).is_err());
    let (pg, samples) = lst_embedding(&s, &[0.01, 0.02, 0.03], &th, &th).unwrap();
    assert_eq!(pg.len(), 27);
    assert_eq!(samples.len(), 27);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hyperboloid_frame_has_unit_lapse(r in 0.0f64..10.0, gap in 0.01f64..5.0) {
        let f = make_hyperboloid_frame();
        let t = r + gap;
        prop_assert!((f.lapse(t, r).unwrap() - 1.0).abs() < 1e-9);
        let [ft, fr] = f.frame(t, r).unwrap();
        prop_assert!((fr * fr - ft * ft + 1.0).abs() < 1e-9 * ft * ft);
        prop_assert!(ft > 0.0);
    }

    #[test]
    fn proper_function_gradient_is_bounded(r in 0.0f64..50.0, tau in 0.5f64..20.0) {
        let f = make_hyperboloid_frame();
        let t = (tau * tau + r * r).sqrt();
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        let frame = Frame::new(g, vec![t, r], DVector::from_row_slice(&f.frame(t, r).unwrap())).unwrap();
        // ∇ρ = (r + 2)^{-1}∂_r.
        prop_assert!((f.rho(r) - (r + 2.0).ln()).abs() < 1e-15);
        let grad = DVector::from_vec(vec![0.0, 1.0 / (r + 2.0)]);
        let norm = reference_norm(&frame, &Tensor::vector(&grad)).unwrap();
        prop_assert!(norm <= 2.0 * (1.0 + 1.0 / 0.5), "{}", norm);
    }

    #[test]
    fn example_field_gradient_matches_differences(t in 1.0f64..3.0, r in 0.0f64..0.9) {
        let chart = MinkowskiRadial::new(2, RadialMap::Identity);
        let field = make_example_prescribed_h(chart);
        let g = field.gradient(&[t, r]).unwrap();
        let h = 1e-6;
        let dt = (field.value(&[t + h, r]).unwrap() - field.value(&[t - h, r]).unwrap()) / (2.0 * h);
        prop_assert!((g[0] - dt).abs() < 1e-7 * (1.0 + dt.abs()));
        if r > 1e-3 {
            let dr = (field.value(&[t, r + h]).unwrap() - field.value(&[t, r - h]).unwrap()) / (2.0 * h);
            prop_assert!((g[1] - dr).abs() < 1e-7 * (1.0 + dr.abs()));
        }
        // Future-increasing in t.
        prop_assert!(g[0] > 0.0);
    }

    #[test]
    fn schwarzschild_christoffel_is_symmetric(x in 0.05f64..0.45, th in 0.3f64..2.8) {
        let gamma = christoffel_at(&make_schwarzschild_chart(1.0), &[0.0, x, th, 0.1]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    prop_assert_eq!(gamma.get(a, b, c), gamma.get(a, c, b));
                }
            }
        }
    }
}
