//! Cross-checks between the two eigensolver paths and the expected
//! second-order convergence of the finite-difference operators.

use subrumin::circle::{circle_lambda1_exact, circle_lambda1_fd};
use subrumin::eigen::{smallest_eigenpair, SolveOptions};
use subrumin::geometry::{CircleChart, TorusChart};
use subrumin::torus::{assemble_torus, torus_lambda1_exact, TorusPotential};

#[test]
fn dense_and_iterative_paths_agree() {
    let chart = TorusChart::new(1).unwrap();
    let pot = TorusPotential::Constant { a: 0.9, b: -1.3 };
    let h = assemble_torus(&chart, &pot, 16, 16).unwrap();

    let mut dense_opts = SolveOptions::default();
    dense_opts.measure_weight = 1.0 / 256.0;
    assert!(h.dim() <= dense_opts.dense_threshold);
    let dense = smallest_eigenpair(&h, &dense_opts);

    let mut iter_opts = dense_opts;
    iter_opts.dense_threshold = 1;
    let lobpcg = smallest_eigenpair(&h, &iter_opts);

    assert!(dense.converged && lobpcg.converged);
    assert!(
        (dense.value - lobpcg.value).abs() <= 1e-8 * dense.value.abs().max(1.0),
        "paths disagree: dense {} vs lobpcg {}",
        dense.value,
        lobpcg.value
    );
    // Both residuals honest.
    assert!(dense.residual <= 1e-7);
    assert!(lobpcg.residual <= 1e-7);

    // Seeds move the iteration, not the answer.
    let mut reseeded = iter_opts;
    reseeded.seed = 42;
    let again = smallest_eigenpair(&h, &reseeded);
    assert!((again.value - lobpcg.value).abs() <= 1e-8);
}

#[test]
fn torus_error_shrinks_at_second_order() {
    let chart = TorusChart::new(1).unwrap();
    let pot = TorusPotential::Constant { a: 0.9, b: 0.4 };
    let exact = torus_lambda1_exact(0.9, 0.4, 1).unwrap().value;
    let opts = SolveOptions::default();
    let errs: Vec<f64> = [32u32, 64, 128]
        .iter()
        .map(|&n| {
            let r = subrumin::torus::torus_lambda1_fd(&chart, &pot, n, n, &opts).unwrap();
            assert!(r.converged);
            (r.value - exact).abs()
        })
        .collect();
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "halving h should quarter the error: errs {errs:?}, ratio {ratio}"
        );
    }
}

#[test]
fn circle_error_shrinks_at_second_order() {
    let chart = CircleChart::new(2.0 * std::f64::consts::PI).unwrap();
    let alpha = 0.31;
    let exact = circle_lambda1_exact(&chart, alpha);
    let opts = SolveOptions::default();
    let errs: Vec<f64> = [64u32, 128, 256]
        .iter()
        .map(|&n| {
            let r = circle_lambda1_fd(&chart, alpha, n, &opts).unwrap();
            assert!(r.converged);
            (r.value - exact).abs()
        })
        .collect();
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "errs {errs:?}, ratio {ratio}"
        );
    }
}
