//! Fully connected autoencoder with a mirrored decoder and hand-written backprop.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_batch, check_blocks, init_matrix, Dataset, InitScheme, Problem};
use crate::error::{invalid_input, invalid_param, Result};
use crate::simba::ParamBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
}

impl Activation {
    fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `h`.
    fn slope(self, h: f64) -> f64 {
        match self {
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Layer widths from input to output, e.g. `[64, 32, 16, 8, 16, 32, 64]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Weights start uniform in `±init_scale / sqrt(fan_in)`.
    #[serde(default = "default_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_scale() -> f64 {
    1.0
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        let w = &self.widths;
        if w.len() < 2 || w.contains(&0) {
            return Err(invalid_param("autoencoder needs at least two positive widths"));
        }
        if w.iter().ne(w.iter().rev()) {
            return Err(invalid_param(format!("widths {w:?} are not mirrored")));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(invalid_param("init_scale must be non-negative"));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct AutoencoderProblem {
    spec: MlpSpec,
    /// Samples as columns.
    samples: DMatrix<f64>,
}

impl AutoencoderProblem {
    pub fn new(spec: MlpSpec, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        if data.num_features() != spec.widths[0] {
            return Err(invalid_input(format!(
                "data has {} features but the input width is {}",
                data.num_features(),
                spec.widths[0]
            )));
        }
        Ok(Self { spec, samples: data.features.transpose() })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Fan-in initialization using `init_scale` and `seed` from the layout.
    pub fn default_init(&self) -> Vec<ParamBlock> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        self.init(InitScheme::FanIn { scale: self.spec.init_scale }, &mut rng)
    }

    fn inputs(&self, batch: Option<&[usize]>) -> DMatrix<f64> {
        match batch {
            Some(b) => self.samples.select_columns(b.iter()),
            None => self.samples.clone(),
        }
    }

    /// Activations `h_0 = X, h_1, ..., h_L`.
    fn forward(&self, params: &[ParamBlock], x: DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let act = self.spec.activation;
        let mut hs = vec![x];
        for layer in params.chunks(2) {
            let (w, b) = (&layer[0].values, &layer[1].values);
            let mut z = w * hs.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += b.column(0);
            }
            z.apply(|v| *v = act.eval(*v));
            hs.push(z);
        }
        hs
    }

    fn reconstruction_loss(out: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
        (out - x).norm_squared() / out.len() as f64
    }
}

impl Problem for AutoencoderProblem {
    fn name(&self) -> &str {
        "autoencoder"
    }

    fn block_shapes(&self) -> Vec<(String, usize, usize)> {
        self.spec
            .widths
            .windows(2)
            .enumerate()
            .flat_map(|(l, w)| [(format!("w{l}"), w[1], w[0]), (format!("b{l}"), w[1], 1)])
            .collect()
    }

    fn num_samples(&self) -> usize {
        self.samples.ncols()
    }

    fn loss(&self, params: &[ParamBlock], batch: Option<&[usize]>) -> Result<f64> {
        check_blocks(params, &self.block_shapes())?;
        check_batch(batch, self.num_samples())?;
        let x = self.inputs(batch);
        let hs = self.forward(params, x);
        Ok(Self::reconstruction_loss(hs.last().unwrap(), &hs[0]))
    }

    fn loss_and_grad(&self, params: &[ParamBlock], batch: Option<&[usize]>) -> Result<(f64, Vec<DMatrix<f64>>)> {
        check_blocks(params, &self.block_shapes())?;
        check_batch(batch, self.num_samples())?;
        let act = self.spec.activation;
        let x = self.inputs(batch);
        let hs = self.forward(params, x);
        let out = hs.last().unwrap();
        let loss = Self::reconstruction_loss(out, &hs[0]);

        let layers = self.spec.layers();
        let mut grads = vec![DMatrix::zeros(0, 0); 2 * layers];
        let mut delta = (out - &hs[0]) * (2.0 / out.len() as f64);
        for l in (0..layers).rev() {
            delta.zip_apply(&hs[l + 1], |d, h| *d *= act.slope(h));
            grads[2 * l] = &delta * hs[l].transpose();
            grads[2 * l + 1] = DMatrix::from_column_slice(delta.nrows(), 1, delta.column_sum().as_slice());
            if l > 0 {
                delta = params[2 * l].values.tr_mul(&delta);
            }
        }
        Ok((loss, grads))
    }

    fn init(&self, scheme: InitScheme, rng: &mut dyn RngCore) -> Vec<ParamBlock> {
        self.block_shapes()
            .into_iter()
            .map(|(id, rows, cols)| {
                let values = if id.starts_with('b') {
                    DMatrix::zeros(rows, cols)
                } else {
                    init_matrix(rows, cols, cols, scheme, rng)
                };
                ParamBlock::new(id, values)
            })
            .collect()
    }
}
