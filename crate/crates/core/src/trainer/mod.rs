//! Factorization machine trained on soft labels with binary cross-entropy.

mod fm;
mod optim;
mod vocab;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use fm::{bce_grad, bce_loss, fm_score, load_checkpoint, save_checkpoint, FmModel, CHECKPOINT_VERSION};
pub use optim::Adam;
pub use vocab::{build_vocab, Vocabulary};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::gauc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation GAUC improvement before stopping.
    pub patience: usize,
    pub embedding_dim: usize,
    pub init_std: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Reserved for neural backbones; the FM ignores them.
    pub hidden_units: Option<usize>,
    pub dropout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 512,
            max_epochs: 50,
            patience: 3,
            embedding_dim: 10,
            init_std: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            hidden_units: None,
            dropout: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.embedding_dim == 0 {
            return Err(Error::InvalidConfig(
                "batch size, epochs and embedding dim must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::InvalidConfig("invalid Adam moments".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_gauc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation GAUC (the last epoch when no
    /// validation set is given).
    pub model: FmModel,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

/// Validation rows with binary interest labels, used for early stopping.
pub struct Validation<'a> {
    pub dataset: &'a Dataset,
    pub interest: &'a [bool],
}

/// Mini-batch trainer holding the model, the optimizer state and the token
/// encoding of the training rows.
pub struct Trainer {
    pub model: FmModel,
    optimizer: Adam,
    rows: Vec<Vec<usize>>,
    labels: Vec<f64>,
    config: TrainConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    grad: fm::Gradient,
}

impl Trainer {
    pub fn new(train: &Dataset, labels: &[f64], config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != train.len() {
            return Err(Error::LengthMismatch {
                expected: train.len(),
                actual: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidParameter(format!("label {bad} outside [0, 1]")));
        }
        let vocab = build_vocab(train);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = FmModel::new(vocab, config.embedding_dim, config.init_std, &mut rng);
        let rows = train.rows.iter().map(|r| model.vocab.encode(r)).collect();
        let optimizer = Adam::new(model.n_params(), config);
        let grad = fm::Gradient::new(&model);
        Ok(Trainer {
            model,
            optimizer,
            rows,
            labels: labels.to_vec(),
            config: config.clone(),
            rng,
            order: (0..train.len()).collect(),
            grad,
        })
    }

    /// One pass over the shuffled training rows. Returns the mean loss.
    pub fn epoch(&mut self, epoch: usize) -> Result<f64> {
        self.order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for (step, batch) in self.order.chunks(self.config.batch_size).enumerate() {
            self.grad.clear();
            let mut batch_loss = 0.0;
            for &i in batch {
                let tokens = &self.rows[i];
                let logit = self.model.score_tokens(tokens);
                batch_loss += bce_loss(logit, self.labels[i]);
                let g = bce_grad(logit, self.labels[i]) / batch.len() as f64;
                self.grad.accumulate(&self.model, tokens, g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            total += batch_loss;
            self.optimizer.step(&mut self.model, &mut self.grad);
        }
        Ok(total / self.rows.len() as f64)
    }

    /// Mean loss over all training rows at the current parameters.
    pub fn full_loss(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.labels)
            .map(|(t, &y)| bce_loss(self.model.score_tokens(t), y))
            .sum::<f64>()
            / self.rows.len() as f64
    }
}

/// Trains a fresh model; early-stops on validation GAUC when a validation set
/// is given and returns the best snapshot.
pub fn train(
    train: &Dataset,
    labels: &[f64],
    validation: Option<Validation<'_>>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(train, labels, config)?;
    let val_rows: Option<(Vec<Vec<usize>>, Vec<&str>, &[bool])> = validation
        .map(|v| {
            if v.interest.len() != v.dataset.len() {
                return Err(Error::LengthMismatch {
                    expected: v.dataset.len(),
                    actual: v.interest.len(),
                });
            }
            let encoded = v.dataset.rows.iter().map(|r| trainer.model.vocab.encode(r)).collect();
            Ok((encoded, v.dataset.user_ids(), v.interest))
        })
        .transpose()?;

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, FmModel)> = None;
    for epoch in 1..=config.max_epochs {
        let train_loss = trainer.epoch(epoch)?;
        let val_gauc = match &val_rows {
            Some((encoded, users, interest)) => {
                let scores: Vec<f64> = encoded.iter().map(|t| trainer.model.score_tokens(t)).collect();
                Some(gauc(&scores, interest, users)?.value)
            }
            None => None,
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_gauc,
        });
        match val_gauc {
            Some(v) => {
                let improved = best.as_ref().is_none_or(|(b, _, _)| v > *b);
                if improved {
                    best = Some((v, epoch, trainer.model.clone()));
                } else if epoch - best.as_ref().map(|b| b.1).unwrap_or(0) >= config.patience.max(1) {
                    break;
                }
            }
            None => best = Some((f64::NAN, epoch, trainer.model.clone())),
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        history,
    })
}
