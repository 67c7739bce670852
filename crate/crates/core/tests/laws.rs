use mm_core::chart::ChartGrid;
use mm_core::geometry::{CurvatureSign, GeometryState};
use mm_core::laws::{
    boundedness_certificate, random_ensemble, solve_curvature_law, static_closure, EnsembleSpec, EnvironmentFields,
    InverseReading, LawInput, LawKind, LawSource, StaticFields,
};
use mm_core::shape::{GraphHeight, ShapeSpec};
use mm_core::Error;
use nalgebra::Vector2;
use proptest::prelude::*;

fn flat() -> GeometryState {
    let chart = ChartGrid::periodic_patch(8, 8, 1.0, 1.0).unwrap();
    GeometryState::from_shape(&chart, &ShapeSpec::Graph { height: GraphHeight::Flat }).unwrap()
}

fn torus(n: usize) -> GeometryState {
    let chart = ChartGrid::doubly_periodic(n, n).unwrap();
    GeometryState::from_shape(&chart, &ShapeSpec::Torus { major: 2.0, minor: 0.5 }).unwrap()
}

fn sphere(r: f64) -> GeometryState {
    let chart = ChartGrid::lat_long(32, 64).unwrap();
    GeometryState::from_shape(&chart, &ShapeSpec::Sphere { radius: r }).unwrap()
}

fn pressure_input(n: usize, p: f64, lambda: f64, rho: f64, v: Vector2<f64>) -> LawInput {
    LawInput {
        source: LawSource::Pressure { pressure: vec![p; n] },
        force_divergence: vec![0.0; n],
        lambda: vec![lambda; n],
        rho: vec![rho; n],
        velocity: vec![v; n],
        v_min: 1e-3,
        reading: InverseReading::Componentwise,
    }
}

/// Largest `|B_ab ρ V_a V_b − (a − Λ S^ij B_ij)|` relative to `|a − Λ S^ij B_ij|`.
fn back_substitution(input: &LawInput, g: &GeometryState) -> f64 {
    let sol = solve_curvature_law(input, g).unwrap();
    let c = input.coefficients();
    let mut worst: f64 = 0.0;
    for k in 0..g.len() {
        let b = sol.curvature[k];
        let s = g.inv_metric[k];
        let trace = s[(0, 0)] * b[(0, 0)] + s[(0, 1)] * b[(0, 1)] + s[(1, 0)] * b[(1, 0)] + s[(1, 1)] * b[(1, 1)];
        let q = c.a[k] - c.b[k] * trace;
        let v = input.velocity[k];
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((b[(i, j)] * c.d[k] * v[i] * v[j] - q).abs() / q.abs().max(1e-300));
            }
        }
    }
    worst
}

fn max_curvature(input: &LawInput, g: &GeometryState) -> f64 {
    solve_curvature_law(input, g).unwrap().curvature.iter().map(|b| b.amax()).fold(0.0, f64::max)
}

#[test]
fn tension_breaks_per_component_monotonicity() {
    // a faster V_1 lowers τ, which raises Q and with it B_22
    let g = flat();
    let slow = pressure_input(g.len(), 1.0, 1.5, 1.0, Vector2::new(2.0, 0.2));
    let fast = pressure_input(g.len(), 1.0, 1.5, 1.0, Vector2::new(6.0, 0.2));
    assert!(max_curvature(&fast, &g) > max_curvature(&slow, &g));
}

#[test]
fn tension_free_law_divides_componentwise() {
    let g = flat();
    let (q, rho, v) = (3.0, 2.0, 0.5);
    let input = pressure_input(g.len(), q / 2.0, 0.0, rho, Vector2::new(v, v));
    let sol = solve_curvature_law(&input, &g).unwrap();
    let expected = q / (rho * v * v);
    for b in &sol.curvature {
        assert!(b.iter().all(|x| (x - expected).abs() < 1e-14 * expected));
    }
    assert!(sol.residual < 1e-14);
}

#[test]
fn constant_field_closure() {
    let g = flat();
    for lambda in [0.0, 0.3, 2.0] {
        let input = pressure_input(g.len(), 0.5, lambda, 1.0, Vector2::new(1.0, 1.0));
        let sol = solve_curvature_law(&input, &g).unwrap();
        // τ = δ^ab / 1 = 2 on a flat chart
        let expected = 1.0 / (1.0 + 2.0 * lambda);
        for k in 0..g.len() {
            assert!((sol.tau[k] - 2.0).abs() < 1e-13);
            assert!((sol.curvature[k].amax() - expected).abs() < 1e-13);
            assert!(sol.curvature[k].amax() <= 1.0);
        }
    }
}

#[test]
fn slow_nodes_are_rejected() {
    let g = flat();
    let mut input = pressure_input(g.len(), 1.0, 0.1, 1.0, Vector2::new(1.0, 1.0));
    input.velocity[5] = Vector2::new(1.0, 1e-4);
    assert!(matches!(solve_curvature_law(&input, &g), Err(Error::SpeedBelowMinimum { node: 5, .. })));
    // the pseudo-inverse reading needs only |V| ≥ v_min
    input.reading = InverseReading::PseudoInverse;
    assert!(solve_curvature_law(&input, &g).is_ok());
}

#[test]
fn invalid_law_inputs() {
    let g = flat();
    let mut input = pressure_input(g.len(), 1.0, 0.1, 1.0, Vector2::new(1.0, 1.0));
    input.rho[3] = 0.0;
    assert!(matches!(solve_curvature_law(&input, &g), Err(Error::InvalidParameter(_))));
    let mut input = pressure_input(g.len(), 1.0, 0.1, 1.0, Vector2::new(1.0, 1.0));
    input.lambda.pop();
    assert!(matches!(solve_curvature_law(&input, &g), Err(Error::LengthMismatch { .. })));
}

#[test]
fn pseudo_inverse_reading_is_self_consistent() {
    let g = torus(16);
    let mut input = pressure_input(g.len(), 0.7, 0.4, 1.3, Vector2::new(0.6, -1.1));
    input.reading = InverseReading::PseudoInverse;
    let sol = solve_curvature_law(&input, &g).unwrap();
    assert!(sol.residual < 1e-12, "{}", sol.residual);
    let v = Vector2::new(0.6, -1.1);
    for k in 0..g.len() {
        // rank one along V: B V⊥ = 0
        let perp = Vector2::new(-v[1], v[0]);
        assert!((sol.curvature[k] * perp).norm() < 1e-14);
    }
}

#[test]
fn kelvin_equals_pressure_with_matching_numerator() {
    let g = torus(16);
    let n = g.len();
    let env = EnvironmentFields::uniform(n, 1.3, 1.0, 300.0, 310.0, 0.02, 6.0, 2.5);
    let numerator = env.kt / env.v_m * (1.3f64 / 1.0).ln();
    let mut kelvin = pressure_input(n, 0.0, 0.4, 1.1, Vector2::new(0.8, 1.2));
    kelvin.source = LawSource::Kelvin(env);
    let mut pressure = kelvin.clone();
    pressure.source = LawSource::Pressure { pressure: vec![numerator / 2.0; n] };
    let a = solve_curvature_law(&kelvin, &g).unwrap();
    let b = solve_curvature_law(&pressure, &g).unwrap();
    assert_eq!(a.curvature, b.curvature);
    assert_eq!(a.q, b.q);
}

#[test]
fn gibbs_thomson_scales_by_molar_volume() {
    let g = flat();
    let n = g.len();
    let env = EnvironmentFields::uniform(n, 1.0, 1.0, 270.0, 300.0, 0.5, 4.0, 1.0);
    let mut input = pressure_input(n, 0.0, 0.2, 1.0, Vector2::new(1.0, 2.0));
    input.source = LawSource::GibbsThomson(env);
    let c = input.coefficients();
    assert!((c.a[0] - 0.1 * 4.0).abs() < 1e-15);
    assert_eq!((c.b[0], c.d[0]), (0.1, 0.5));
    assert!(back_substitution(&input, &g) < 1e-12);
}

#[test]
fn static_kelvin_on_spheres() {
    let f = StaticFields { lambda: 0.07, force_divergence: 0.0, v_m: 1.8e-5, kt: 4.1e-21 * 6.0e23, h_fus: 6.0e3 };
    for r in [0.5, 1.0, 2.0] {
        let g = sphere(r);
        let ln = static_closure(LawKind::Kelvin, &f, &g, CurvatureSign::ConvexPositive).unwrap();
        let exact = 2.0 * f.lambda * f.v_m / (f.kt * r);
        for k in g.valid_nodes() {
            assert!((ln[k] - exact).abs() < 1e-4 * exact);
        }
    }
    let small = static_closure(LawKind::Kelvin, &f, &sphere(1.0), CurvatureSign::ConvexPositive).unwrap();
    let large = static_closure(LawKind::Kelvin, &f, &sphere(2.0), CurvatureSign::ConvexPositive).unwrap();
    assert_eq!(small[40], 2.0 * large[40]);
}

#[test]
fn static_branches_on_flat_sheets() {
    let g = flat();
    let f = StaticFields { lambda: 0.5, force_divergence: 0.0, v_m: 1.0, kt: 1.0, h_fus: 2.0 };
    for law in [LawKind::Kelvin, LawKind::Pressure, LawKind::GibbsThomson] {
        let out = static_closure(law, &f, &g, CurvatureSign::ConvexPositive).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1e-14));
    }
    let forced = StaticFields { force_divergence: 0.3, ..f };
    let p = static_closure(LawKind::Pressure, &forced, &g, CurvatureSign::Outward).unwrap();
    assert!(p.iter().all(|x| (x + 0.15).abs() < 1e-14));
}

#[test]
fn gibbs_thomson_at_bulk_temperature() {
    // γ_T = 0 only if Λ B_i^i = ∂_α F^α, which on a unit sphere means ∂F = 2Λ
    let g = sphere(1.0);
    let f = StaticFields { lambda: 0.25, force_divergence: 0.5, v_m: 1.0, kt: 1.0, h_fus: 3.0 };
    let gamma = static_closure(LawKind::GibbsThomson, &f, &g, CurvatureSign::ConvexPositive).unwrap();
    assert!(g.valid_nodes().all(|k| gamma[k].abs() < 1e-6));
    let none = StaticFields { h_fus: 0.0, ..f };
    assert!(matches!(
        static_closure(LawKind::GibbsThomson, &none, &g, CurvatureSign::ConvexPositive),
        Err(Error::ZeroFusionEnthalpy)
    ));
}

#[test]
fn law_names() {
    assert_eq!("kelvin".parse::<LawKind>().unwrap(), LawKind::Kelvin);
    assert_eq!("gibbs-thomson".parse::<LawKind>().unwrap(), LawKind::GibbsThomson);
    assert!("laplace".parse::<LawKind>().is_err());
}

#[test]
fn random_ensemble_certificate() {
    let chart = ChartGrid::doubly_periodic(16, 16).unwrap();
    let g = GeometryState::from_shape(&chart, &ShapeSpec::Torus { major: 2.0, minor: 0.5 }).unwrap();
    let spec = EnsembleSpec { members: 100, v_min: 0.5, rho: 1.0, q_max: 3.0, lambda_max: 1.0, modes: 3 };
    let ensemble = random_ensemble(&spec, &chart, 42).unwrap();
    let report = boundedness_certificate(&ensemble, &g).unwrap();
    assert_eq!(report.members, 100);
    assert!(report.holds);
    assert!(report.bound <= 12.0 + 1e-12, "{}", report.bound);
    assert!(report.max_curvature <= 12.0);
    assert!(report.max_residual < 1e-10);
    assert_eq!(ensemble, random_ensemble(&spec, &chart, 42).unwrap());
    assert_ne!(ensemble, random_ensemble(&spec, &chart, 43).unwrap());
}

#[test]
fn empty_ensembles() {
    let g = flat();
    assert!(matches!(boundedness_certificate(&[], &g), Err(Error::EmptyEnsemble)));
    let spec = EnsembleSpec { members: 0, v_min: 0.5, rho: 1.0, q_max: 3.0, lambda_max: 1.0, modes: 3 };
    assert!(matches!(random_ensemble(&spec, &g.chart, 1), Err(Error::EmptyEnsemble)));
}

#[test]
fn environment_tables() {
    let text = "node,p_v,p_s,T\n0,1.2,1.0,290\n1,1.1,1.0,295\n";
    let env = EnvironmentFields::read_table(text.as_bytes(), 300.0, 0.02, 6.0, 2.5).unwrap();
    assert_eq!(env.p_v, vec![1.2, 1.1]);
    assert!((env.undercooling()[0] - 1.0 / 30.0).abs() < 1e-15);
    env.validate(2).unwrap();
    let swapped = "1,1.1,1.0,295\n0,1.2,1.0,290\n";
    assert!(matches!(EnvironmentFields::read_table(swapped.as_bytes(), 300.0, 0.02, 6.0, 2.5), Err(Error::Config(_))));
    let short = "0,1.2,1.0\n";
    assert!(EnvironmentFields::read_table(short.as_bytes(), 300.0, 0.02, 6.0, 2.5).is_err());
    let negative = EnvironmentFields::uniform(2, -1.0, 1.0, 290.0, 300.0, 0.02, 6.0, 2.5);
    assert!(negative.validate(2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn back_substitution_holds(
        p in -5.0f64..5.0, lambda in 0.0f64..3.0, rho in 0.1f64..4.0,
        v1 in 0.2f64..3.0, v2 in -3.0f64..-0.2, force in -2.0f64..2.0,
    ) {
        let g = torus(12);
        let mut input = pressure_input(g.len(), p, lambda, rho, Vector2::new(v1, v2));
        input.force_divergence = vec![force; g.len()];
        let q = 2.0 * p + force;
        prop_assume!(q.abs() > 1e-6);
        prop_assert!(back_substitution(&input, &g) < 1e-10);
        prop_assert!(solve_curvature_law(&input, &g).unwrap().residual < 1e-10);
    }

    #[test]
    fn closure_stays_regular_for_valid_inputs(v1 in -3.0f64..3.0, v2 in -3.0f64..3.0, pseudo in any::<bool>()) {
        // τ = wᵀ S⁻¹ w with w_a = 1 / V_a, positive for a positive definite metric
        prop_assume!(v1.abs() > 0.1 && v2.abs() > 0.1);
        let g = torus(12);
        let mut input = pressure_input(g.len(), 1.0, 1.0, 1.0, Vector2::new(v1, v2));
        if pseudo {
            input.reading = InverseReading::PseudoInverse;
        }
        let sol = solve_curvature_law(&input, &g).unwrap();
        prop_assert!(sol.tau.iter().all(|t| *t > 0.0));
    }

    #[test]
    fn curvature_shrinks_with_each_speed_without_tension(v1 in 0.2f64..3.0, v2 in 0.2f64..3.0, grow in 1.0f64..4.0) {
        let g = torus(12);
        let slow = pressure_input(g.len(), 1.0, 0.0, 1.0, Vector2::new(v1, v2));
        let fast = pressure_input(g.len(), 1.0, 0.0, 1.0, Vector2::new(v1 * grow, v2));
        prop_assert!(max_curvature(&fast, &g) <= max_curvature(&slow, &g) * (1.0 + 1e-12));
    }

    #[test]
    fn curvature_shrinks_with_uniform_speed(v1 in 0.2f64..3.0, v2 in 0.2f64..3.0, grow in 1.0f64..4.0, lambda in 0.0f64..2.0) {
        let g = torus(12);
        let slow = pressure_input(g.len(), 1.0, lambda, 1.0, Vector2::new(v1, v2));
        let fast = pressure_input(g.len(), 1.0, lambda, 1.0, Vector2::new(v1 * grow, v2 * grow));
        prop_assert!(max_curvature(&fast, &g) <= max_curvature(&slow, &g) * (1.0 + 1e-12));
    }
}
