use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use simba_core::problems::{
    parse_libsvm, synthetic_autoencoder_data, synthetic_nlls, Activation, AutoencoderProblem, MlpSpec, NllsProblem,
    QuadraticProblem,
};
use simba_core::verify::gradient_check;
use simba_core::{ParamBlock, Problem, SimbaError};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// every block is drawn, biases included, so ReLU units sit away from their kink
fn random_params(problem: &dyn Problem, r: &mut ChaCha8Rng) -> Vec<ParamBlock> {
    problem
        .block_shapes()
        .into_iter()
        .map(|(id, rows, cols)| {
            ParamBlock::new(id, DMatrix::from_fn(rows, cols, |_, _| 0.5 * r.sample::<f64, _>(StandardNormal)))
        })
        .collect()
}

fn check_at_random_points(problem: &dyn Problem, batch: Option<&[usize]>) {
    let mut r = rng(5);
    for _ in 0..5 {
        let params = random_params(problem, &mut r);
        let err = gradient_check(problem, &params, batch, 1e-5, &mut r).unwrap();
        assert!(err < 1e-4, "{}: relative error {err:e}", problem.name());
    }
}

#[test]
fn quadratic_gradient_matches_finite_differences() {
    let p = QuadraticProblem::new(40, 0.5, 20.0, 1).unwrap();
    check_at_random_points(&p, None);
}

#[test]
fn nlls_gradient_matches_finite_differences_full_and_batched() {
    let data = synthetic_nlls(120, 60, 0.2, 2).unwrap().dataset;
    let p = NllsProblem::new(&data).unwrap();
    check_at_random_points(&p, None);
    check_at_random_points(&p, Some(&[0, 7, 7, 42, 119]));
}

#[test]
fn autoencoder_gradient_matches_finite_differences() {
    let data = synthetic_autoencoder_data(12, 8, 2, 3).unwrap();
    for activation in [Activation::Sigmoid, Activation::Relu] {
        let spec = MlpSpec { widths: vec![8, 5, 3, 5, 8], activation, init_scale: 1.0, seed: 4 };
        let p = AutoencoderProblem::new(spec, &data).unwrap();
        check_at_random_points(&p, Some(&[1, 3, 11]));
    }
}

#[test]
fn quadratic_minimizer_has_zero_loss_and_gradient() {
    let p = QuadraticProblem::new(25, 1.0, 10.0, 6).unwrap();
    let c = p.constants().unwrap();
    let params = vec![ParamBlock::new("x", p.minimizer().clone())];
    let (loss, grads) = p.loss_and_grad(&params, None).unwrap();
    assert!((loss - c.f_star).abs() < 1e-12);
    assert!(grads[0].amax() < 1e-10);
}

#[test]
fn libsvm_file_round_trip() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# two samples").unwrap();
    writeln!(file, "+1 1:0.5 3:-2").unwrap();
    writeln!(file, "-1 2:4").unwrap();
    let data = parse_libsvm(file.path()).unwrap();
    assert_eq!(data.labels, vec![1.0, 0.0]);
    assert_eq!(data.features, DMatrix::from_row_slice(2, 3, &[0.5, 0.0, -2.0, 0.0, 4.0, 0.0]));
}

#[test]
fn libsvm_reports_line_of_first_bad_record() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "1 1:1\n1 2:1\n1 3:nan\n").unwrap();
    match parse_libsvm(file.path()) {
        Err(SimbaError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn missing_libsvm_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(parse_libsvm(dir.path().join("absent.svm")), Err(SimbaError::Io(_))));
}
