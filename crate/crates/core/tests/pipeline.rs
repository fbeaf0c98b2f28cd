use mucklab::counterexample::{annulus_scan, threshold, ExplicitField, Verdict};
use mucklab::fem::{energy_ratio, h1_seminorm_error, random_smooth_field, sine_product_gradient, solve, triangulate_box, weighted_field, EllipticProblem, SolverOptions};
use mucklab::geometry::io::{read_binary, write_binary};
use mucklab::geometry::{make_ball_family, Cuboid, GridScalarField, UniformGrid};
use mucklab::maximal::{weighted_maximal, RadiusLadder};
use mucklab::weights::{ap_characteristic, power_ap_bound, Weight};

fn opts() -> SolverOptions {
    SolverOptions { tol: 1e-10, max_iter: None }
}

#[test]
fn manufactured_solution_converges_at_first_order() {
    let unit = Cuboid::cube(2, 0.0, 1.0).unwrap();
    let errors: Vec<f64> = [16, 32]
        .iter()
        .map(|&m| {
            let problem = EllipticProblem::weighted_identity(triangulate_box(&unit, m).unwrap(), Weight::lebesgue(), sine_product_gradient(2));
            let sol = solve(&problem, &opts()).unwrap();
            h1_seminorm_error(&problem.mesh, &sol, &Weight::lebesgue(), &sine_product_gradient(2))
        })
        .collect();
    let order = (errors[0] / errors[1]).log2();
    assert!((0.9..=1.1).contains(&order), "order {order}");
}

#[test]
fn weighted_energy_estimate_holds() {
    let bx = Cuboid::cube(2, -1.0, 1.0).unwrap();
    for alpha in [-1.0, 0.5, 1.5] {
        let mu = Weight::power(alpha);
        let f = weighted_field(mu.clone(), random_smooth_field(2, 3, 3));
        let problem = EllipticProblem::weighted_identity(triangulate_box(&bx, 24).unwrap(), mu, f);
        let sol = solve(&problem, &opts()).unwrap();
        let r = energy_ratio(&problem, &sol).unwrap();
        assert!(r <= 1.05, "alpha {alpha}: {r}");
    }
}

#[test]
fn threshold_separates_annulus_verdicts() {
    let field = ExplicitField::new(3, 0.25).unwrap();
    let p_star = threshold(3, 0.25).unwrap();
    assert_eq!(p_star, 11.0);
    assert_eq!(annulus_scan(&field, p_star - 1.0, 0..=12).unwrap().verdict, Verdict::Finite);
    assert_eq!(annulus_scan(&field, p_star + 1.0, 0..=12).unwrap().verdict, Verdict::Infinite);
}

#[test]
fn sampled_characteristic_sits_inside_envelope() {
    let bx = Cuboid::cube(2, -1.0, 1.0).unwrap();
    let grid = UniformGrid::new(bx.clone(), 128).unwrap();
    let family = make_ball_family(&grid, &bx, 16, 4.0 * grid.max_spacing(), 2.0, 4).unwrap();
    for alpha in [-0.5, 1.0] {
        let est = ap_characteristic(&Weight::power(alpha), &family, 2.0).unwrap();
        let centered = 4.0 / (4.0 - alpha * alpha);
        assert!(est.value >= centered - 1e-3 && est.value <= power_ap_bound(2, alpha).unwrap(), "alpha {alpha}: {}", est.value);
    }
}

#[test]
fn maximal_of_saved_field_is_reproducible() {
    let grid = UniformGrid::new(Cuboid::cube(2, -1.0, 1.0).unwrap(), 24).unwrap();
    let field = GridScalarField::from_fn(grid, |x| (3.0 * x[0]).sin() * x[1]);
    let mut bytes = Vec::new();
    write_binary(&field, &mut bytes).unwrap();
    let back = read_binary(bytes.as_slice()).unwrap();
    let mu = Weight::power(0.5);
    let ladder = RadiusLadder::Geometric { q: 1.5 };
    let a = weighted_maximal(&field, &mu, &ladder, None).unwrap();
    let b = weighted_maximal(&back, &mu, &ladder, None).unwrap();
    assert_eq!(a.values, b.values);
    assert!(a.values.iter().zip(&field.values).all(|(m, f)| *m >= f.abs()));
}
