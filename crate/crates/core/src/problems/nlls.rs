//! Non-linear least squares: `f(x) = (1/m) Σ (b_i − g(a_iᵀx))²` with
//! `g(ω) = 1 / (1 + e^ω)`.

use nalgebra::DMatrix;

use super::{check_batch, check_blocks, Dataset, Problem};
use crate::error::{invalid_input, Result};
use crate::simba::ParamBlock;

/// `1 / (1 + e^ω)` without overflow for large `|ω|`.
pub fn flipped_sigmoid(omega: f64) -> f64 {
    if omega >= 0.0 {
        let e = (-omega).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + omega.exp())
    }
}

#[derive(Debug, Clone)]
pub struct NllsProblem {
    /// Samples as columns (`n × m`) so a batch gathers contiguous columns.
    samples: DMatrix<f64>,
    labels: Vec<f64>,
}

impl NllsProblem {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.labels.len() != data.num_samples() {
            return Err(invalid_input("label count does not match sample count"));
        }
        Ok(Self { samples: data.features.transpose(), labels: data.labels.clone() })
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    fn accumulate(&self, x: &DMatrix<f64>, batch: Option<&[usize]>, mut grad: Option<&mut DMatrix<f64>>) -> f64 {
        let mut loss = 0.0;
        let mut visit = |i: usize| {
            let a = self.samples.column(i);
            let omega = a.dot(&x.column(0));
            let g = flipped_sigmoid(omega);
            let resid = self.labels[i] - g;
            loss += resid * resid;
            if let Some(grad) = grad.as_deref_mut() {
                // d/dx (b − g)² = −2 (b − g) g'(ω) a,  g'(ω) = −g (1 − g)
                let w = 2.0 * resid * g * (1.0 - g);
                grad.column_mut(0).axpy(w, &a, 1.0);
            }
        };
        let count = match batch {
            Some(b) => {
                b.iter().for_each(|&i| visit(i));
                b.len()
            }
            None => {
                (0..self.labels.len()).for_each(&mut visit);
                self.labels.len()
            }
        };
        if let Some(grad) = grad {
            *grad /= count as f64;
        }
        loss / count as f64
    }
}

impl Problem for NllsProblem {
    fn name(&self) -> &str {
        "nlls"
    }

    fn block_shapes(&self) -> Vec<(String, usize, usize)> {
        vec![("x".to_owned(), self.dim(), 1)]
    }

    fn num_samples(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, params: &[ParamBlock], batch: Option<&[usize]>) -> Result<f64> {
        check_blocks(params, &self.block_shapes())?;
        check_batch(batch, self.num_samples())?;
        Ok(self.accumulate(&params[0].values, batch, None))
    }

    fn loss_and_grad(&self, params: &[ParamBlock], batch: Option<&[usize]>) -> Result<(f64, Vec<DMatrix<f64>>)> {
        check_blocks(params, &self.block_shapes())?;
        check_batch(batch, self.num_samples())?;
        let mut grad = DMatrix::zeros(self.dim(), 1);
        let loss = self.accumulate(&params[0].values, batch, Some(&mut grad));
        Ok((loss, vec![grad]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{gaussian, rng};

    fn at(x: DMatrix<f64>) -> Vec<ParamBlock> {
        vec![ParamBlock::new("x", x)]
    }

    #[test]
    fn sigmoid_is_safe_and_flipped() {
        assert_eq!(flipped_sigmoid(0.0), 0.5);
        assert!(flipped_sigmoid(700.0) > 0.0 && flipped_sigmoid(700.0) < 1e-300);
        assert_eq!(flipped_sigmoid(-800.0), 1.0);
        assert_eq!(flipped_sigmoid(800.0), 0.0);
        assert!((flipped_sigmoid(2.0) + flipped_sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn origin_has_quarter_loss() {
        let mut r = rng(1);
        let features = gaussian(10, 4, &mut r);
        let labels = (0..10).map(|i| (i % 2) as f64).collect();
        let p = NllsProblem::new(&Dataset::new(features, labels).unwrap()).unwrap();
        assert_eq!(p.loss(&at(DMatrix::zeros(4, 1)), None).unwrap(), 0.25);
    }

    #[test]
    fn single_sample_chain_rule() {
        let mut features = DMatrix::zeros(1, 3);
        features[(0, 0)] = 1.0;
        let p = NllsProblem::new(&Dataset::new(features, vec![1.0]).unwrap()).unwrap();
        let (f, g) = p.loss_and_grad(&at(DMatrix::zeros(3, 1)), None).unwrap();
        assert_eq!(f, 0.25);
        // −2 (1 − ½)(−¼) = ¼ along e₁: increasing x₁ lowers g, moving away from b = 1
        assert!((g[0][(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(g[0][(1, 0)], 0.0);
        let h = 1e-6;
        let mut xp = DMatrix::zeros(3, 1);
        xp[(0, 0)] = h;
        let fd = (p.loss(&at(xp.clone()), None).unwrap() - p.loss(&at(-xp), None).unwrap()) / (2.0 * h);
        assert!((fd - 0.25).abs() < 1e-9);
    }

    #[test]
    fn batch_is_mean_over_selected_rows() {
        let mut r = rng(2);
        let features = gaussian(6, 3, &mut r);
        let labels = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let data = Dataset::new(features.clone(), labels.clone()).unwrap();
        let p = NllsProblem::new(&data).unwrap();
        let x = gaussian(3, 1, &mut r);
        let sub = Dataset::new(features.select_rows([1usize, 4].iter()), vec![0.0, 0.0]).unwrap();
        let q = NllsProblem::new(&sub).unwrap();
        let (fa, ga) = p.loss_and_grad(&at(x.clone()), Some(&[1, 4])).unwrap();
        let (fb, gb) = q.loss_and_grad(&at(x), None).unwrap();
        assert!((fa - fb).abs() < 1e-15);
        assert!((&ga[0] - &gb[0]).amax() < 1e-15);
        assert!(p.loss(&at(DMatrix::zeros(3, 1)), Some(&[9])).is_err());
        assert!(p.loss(&at(DMatrix::zeros(4, 1)), None).is_err());
    }

    #[test]
    fn loss_is_bounded_for_binary_labels() {
        let mut r = rng(3);
        let features = gaussian(30, 5, &mut r) * 5.0;
        let labels = (0..30).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let p = NllsProblem::new(&Dataset::new(features, labels).unwrap()).unwrap();
        for _ in 0..20 {
            let f = p.loss(&at(gaussian(5, 1, &mut r) * 10.0), None).unwrap();
            assert!((0.0..=1.0).contains(&f));
        }
    }
}
