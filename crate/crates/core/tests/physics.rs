mod common;

use common::test_rng;
use pinn_core::transport::{exact_solution, initial_condition};
use rand::Rng;

#[test]
fn exact_solution_satisfies_the_pde() {
    let mut rng = test_rng(21);
    let h = 1e-5;
    for _ in 0..1000 {
        let x = rng.gen_range(-1.5..1.5);
        let t = rng.gen_range(0.0..2.0);
        let u_t = (exact_solution(x, t + h) - exact_solution(x, t - h)) / (2.0 * h);
        let u_x = (exact_solution(x + h, t) - exact_solution(x - h, t)) / (2.0 * h);
        assert!((u_t + 3.0 * u_x).abs() < 1e-6, "residual at ({x}, {t})");
    }
}

#[test]
fn exact_solution_starts_at_initial_profile() {
    let mut rng = test_rng(22);
    for _ in 0..1000 {
        let x = rng.gen_range(-1.5..1.5);
        assert!((exact_solution(x, 0.0) - initial_condition(x)).abs() <= 1e-15);
    }
}

#[test]
fn exact_solution_is_constant_along_characteristics() {
    let mut rng = test_rng(23);
    for _ in 0..200 {
        let xi = rng.gen_range(-1.5..1.5);
        let t = rng.gen_range(0.0..2.0);
        let a = exact_solution(xi + 3.0 * t, t);
        let b = initial_condition(xi);
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
}
