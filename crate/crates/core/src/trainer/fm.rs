use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::data::Interaction;
use crate::error::{Error, Result};
use crate::math::sigmoid;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Second-order factorization machine over one-hot field tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmModel {
    pub vocab: Vocabulary,
    pub k: usize,
    pub bias: f64,
    pub linear: Vec<f64>,
    /// Row-major `vocab.len() x k`.
    pub embeddings: Vec<f64>,
}

impl FmModel {
    pub fn new<R: Rng>(vocab: Vocabulary, k: usize, init_std: f64, rng: &mut R) -> Self {
        let n = vocab.len();
        let embeddings = (0..n * k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * init_std
            })
            .collect();
        FmModel {
            vocab,
            k,
            bias: 0.0,
            linear: vec![0.0; n],
            embeddings,
        }
    }

    pub fn n_params(&self) -> usize {
        1 + self.linear.len() + self.embeddings.len()
    }

    pub fn embedding(&self, token: usize) -> &[f64] {
        &self.embeddings[token * self.k..(token + 1) * self.k]
    }

    /// Logit for a list of active tokens. Pairwise interactions use
    /// `0.5 * sum_f [(sum_i v_if)^2 - sum_i v_if^2]`.
    pub fn score_tokens(&self, tokens: &[usize]) -> f64 {
        let mut out = self.bias;
        for &t in tokens {
            out += self.linear[t];
        }
        let mut pair = 0.0;
        for f in 0..self.k {
            let (mut s, mut sq) = (0.0, 0.0);
            for &t in tokens {
                let v = self.embeddings[t * self.k + f];
                s += v;
                sq += v * v;
            }
            pair += s * s - sq;
        }
        out + 0.5 * pair
    }
}

pub fn fm_score(model: &FmModel, interaction: &Interaction) -> f64 {
    model.score_tokens(&model.vocab.encode(interaction))
}

/// Binary cross-entropy of a soft label against `sigmoid(logit)`.
pub fn bce_loss(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

/// Derivative of [`bce_loss`] with respect to the logit.
pub fn bce_grad(logit: f64, label: f64) -> f64 {
    sigmoid(logit) - label
}

/// Dense gradient buffer laid out like the parameter vector
/// `[bias, linear.., embeddings..]`.
pub(crate) struct Gradient {
    pub bias: f64,
    pub linear: Vec<f64>,
    pub embeddings: Vec<f64>,
    k: usize,
    sums: Vec<f64>,
}

impl Gradient {
    pub fn new(model: &FmModel) -> Self {
        Gradient {
            bias: 0.0,
            linear: vec![0.0; model.linear.len()],
            embeddings: vec![0.0; model.embeddings.len()],
            k: model.k,
            sums: vec![0.0; model.k],
        }
    }

    pub fn clear(&mut self) {
        self.bias = 0.0;
        self.linear.iter_mut().for_each(|g| *g = 0.0);
        self.embeddings.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Adds `dloss/dlogit * dlogit/dparam` for one row.
    pub fn accumulate(&mut self, model: &FmModel, tokens: &[usize], dlogit: f64) {
        let k = self.k;
        self.bias += dlogit;
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        for &t in tokens {
            self.linear[t] += dlogit;
            for f in 0..k {
                self.sums[f] += model.embeddings[t * k + f];
            }
        }
        for &t in tokens {
            for f in 0..k {
                let v = model.embeddings[t * k + f];
                self.embeddings[t * k + f] += dlogit * (self.sums[f] - v);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: FmModel,
}

pub fn save_checkpoint<W: Write>(model: &FmModel, writer: W) -> Result<()> {
    serde_json::to_writer(
        writer,
        &Checkpoint {
            version: CHECKPOINT_VERSION,
            model: model.clone(),
        },
    )?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(reader: R) -> Result<FmModel> {
    let ckpt: Checkpoint = serde_json::from_reader(reader)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::InvalidParameter(format!(
            "checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    let mut model = ckpt.model;
    let n = model.vocab.len();
    if model.linear.len() != n || model.embeddings.len() != n * model.k || model.k == 0 {
        return Err(Error::InvalidParameter(
            "checkpoint parameter shapes do not match vocabulary".into(),
        ));
    }
    model.vocab.rebuild_index();
    Ok(model)
}
