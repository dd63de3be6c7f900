use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus, Mat, Real};

/// Trunk nonlinearity. Stored in checkpoints by [`Activation::code`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Softplus,
    Relu,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Softplus => 1,
            Activation::Relu => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            1 => Ok(Activation::Softplus),
            2 => Ok(Activation::Relu),
            c => Err(Error::CorruptCheckpoint(format!(
                "unknown activation code {c}"
            ))),
        }
    }

    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Softplus => softplus(x),
            Activation::Relu => x.max(T::zero()),
        }
    }

    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Softplus => sigmoid(x),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// One hidden layer shared by a vision-language head and a semantic head.
/// Weights are stored input-major (`in x out`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeads<T: Real = f32> {
    pub activation: Activation,
    pub trunk_w: Mat<T>,
    pub trunk_b: Vec<T>,
    pub head_v_w: Mat<T>,
    pub head_v_b: Vec<T>,
    pub head_s_w: Mat<T>,
    pub head_s_b: Vec<T>,
}

fn glorot<T: Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| T::of(rng.random_range(-limit..limit)))
            .collect(),
    )
}

impl<T: Real> FieldHeads<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(
        input: usize,
        hidden: usize,
        dv: usize,
        ds: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldHeads {
            activation,
            trunk_w: glorot(input, hidden, &mut rng),
            trunk_b: vec![T::zero(); hidden],
            head_v_w: glorot(hidden, dv, &mut rng),
            head_v_b: vec![T::zero(); dv],
            head_s_w: glorot(hidden, ds, &mut rng),
            head_s_b: vec![T::zero(); ds],
        }
    }

    /// Glorot trunk with all-zero output heads.
    pub fn with_zero_heads(
        input: usize,
        hidden: usize,
        dv: usize,
        ds: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        let mut h = Self::new(input, hidden, dv, ds, activation, seed);
        h.head_v_w = Mat::zeros(hidden, dv);
        h.head_s_w = Mat::zeros(hidden, ds);
        h
    }

    pub fn input_dim(&self) -> usize {
        self.trunk_w.rows
    }

    pub fn hidden_dim(&self) -> usize {
        self.trunk_w.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.head_v_w.cols, self.head_s_w.cols)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.trunk_w.rows, self.trunk_w.cols);
        let ok = self.trunk_b.len() == h
            && self.head_v_w.rows == h
            && self.head_s_w.rows == h
            && self.head_v_b.len() == self.head_v_w.cols
            && self.head_s_b.len() == self.head_s_w.cols
            && d > 0
            && h > 0;
        if !ok {
            return Err(Error::DimMismatch("inconsistent head shapes".into()));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> FieldHeads<U> {
        let v = |x: &Vec<T>| x.iter().map(|v| U::of(v.f64())).collect();
        FieldHeads {
            activation: self.activation,
            trunk_w: self.trunk_w.cast(),
            trunk_b: v(&self.trunk_b),
            head_v_w: self.head_v_w.cast(),
            head_v_b: v(&self.head_v_b),
            head_s_w: self.head_s_w.cast(),
            head_s_b: v(&self.head_s_b),
        }
    }
}
