//! Designer training: listwise minibatch descent over per-sample K-groups
//! with linear warmup, linear decay, periodic dev evaluation, and early
//! stopping on dev ranking loss.

use super::{
    loss_and_gradient, ranking_loss, DesignerError, DesignerRecord, FeatureConfig, FeatureScorer,
    PairWeightMode, ScorerGrad,
};
use crate::hash::mix_seed;
use crate::optim::AdamW;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub warmup_frac: f64,
    pub eval_every: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// Groups per minibatch; when unset it is derived so one epoch lands in
    /// the 64..=256 step range where possible: `ceil(groups / 256)`.
    pub batch_groups: Option<usize>,
    pub seed: u64,
    pub pair_weight_mode: PairWeightMode,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            warmup_frac: 0.06,
            eval_every: 50,
            patience: 10,
            max_epochs: 10,
            batch_groups: None,
            seed: 0,
            pair_weight_mode: PairWeightMode::Weighted,
        }
    }
}

/// Training trace, mostly for tests and reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps_run: usize,
    pub total_steps: usize,
    pub best_step: usize,
    pub best_dev_loss: f64,
    /// (global step, dev ranking loss) at each evaluation.
    pub evals: Vec<(usize, f64)>,
}

/// One sample's K-group with features precomputed.
struct Group {
    scores: Vec<f64>,
    features: Vec<Vec<f64>>,
}

fn build_groups(
    records: &[DesignerRecord],
    features: &FeatureConfig,
) -> Result<Vec<Group>, DesignerError> {
    if records.is_empty() {
        return Err(DesignerError::EmptyRecords);
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut current_id: Option<&str> = None;
    for record in records {
        if current_id != Some(record.sample_id.as_str()) {
            current_id = Some(record.sample_id.as_str());
            groups.push(Group {
                scores: Vec::new(),
                features: Vec::new(),
            });
        }
        let group = groups.last_mut().expect("just pushed");
        group.scores.push(record.score);
        group.features.push(features.extract(&record.query, &record.graph));
    }
    let k = groups[0].scores.len();
    if groups.iter().any(|g| g.scores.len() != k) {
        return Err(DesignerError::Validation(
            "records are not grouped into equal-size per-sample groups".into(),
        ));
    }
    Ok(groups)
}

fn mean_dev_loss(
    groups: &[Group],
    scorer: &FeatureScorer,
    mode: PairWeightMode,
) -> Result<f64, DesignerError> {
    let mut total = 0.0;
    for group in groups {
        let predictions: Vec<f64> = group
            .features
            .iter()
            .map(|f| scorer.params.forward(f))
            .collect();
        total += ranking_loss(&group.scores, &predictions, mode)?;
    }
    Ok(total / groups.len() as f64)
}

/// Linear warmup to `lr` over the first `warmup` steps, then linear decay to
/// zero at `total`.
fn lr_at(step: usize, total: usize, warmup: usize, lr: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    if warmup > 0 && step <= warmup {
        lr * step as f64 / warmup as f64
    } else {
        let rest = (total - warmup).max(1) as f64;
        lr * ((total - step) as f64 / rest).max(0.0)
    }
}

/// Trains the feature scorer on grouped records, evaluating on the dev
/// records every `eval_every` steps and stopping once `patience` evaluations
/// pass without a strictly better dev loss. Returns the best-on-dev scorer.
pub fn train_scorer(
    train_records: &[DesignerRecord],
    dev_records: &[DesignerRecord],
    features: FeatureConfig,
    hyper: &TrainHyper,
) -> Result<(FeatureScorer, TrainReport), DesignerError> {
    let groups = build_groups(train_records, &features)?;
    let dev_groups = build_groups(dev_records, &features)?;

    let batch = hyper
        .batch_groups
        .unwrap_or_else(|| groups.len().div_ceil(256))
        .max(1);
    let steps_per_epoch = groups.len().div_ceil(batch);
    let total_steps = steps_per_epoch * hyper.max_epochs;
    let warmup = ((total_steps as f64 * hyper.warmup_frac).round() as usize).min(total_steps);

    let mut scorer = FeatureScorer::new(features);
    let dim = scorer.params.weights.len();
    let mut optimizer = AdamW::new(dim + 1, Default::default());

    let mut report = TrainReport {
        steps_run: 0,
        total_steps,
        best_step: 0,
        best_dev_loss: mean_dev_loss(&dev_groups, &scorer, hyper.pair_weight_mode)?,
        evals: vec![(0, 0.0)],
    };
    report.evals[0].1 = report.best_dev_loss;
    let mut best_params = scorer.params.clone();
    let mut evals_since_best = 0usize;

    let mut step = 0usize;
    'training: for epoch in 0..hyper.max_epochs {
        let mut order: Vec<usize> = (0..groups.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(hyper.seed, epoch as u64));
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for chunk in order.chunks(batch) {
            step += 1;
            let mut grad = ScorerGrad {
                weights: vec![0.0; dim],
                bias: 0.0,
            };
            for &gi in chunk {
                let group = &groups[gi];
                let (_, g) = loss_and_gradient(
                    &group.scores,
                    &group.features,
                    &scorer.params,
                    hyper.pair_weight_mode,
                )?;
                grad.add(&g);
            }
            grad.scale(1.0 / chunk.len() as f64);

            let lr = lr_at(step, total_steps, warmup, hyper.lr);
            let mut flat: Vec<f64> = scorer.params.weights.clone();
            flat.push(scorer.params.bias);
            let mut flat_grad = grad.weights;
            flat_grad.push(grad.bias);
            optimizer.step(&mut flat, &flat_grad, lr);
            scorer.params.bias = flat.pop().expect("bias slot");
            scorer.params.weights = flat;

            report.steps_run = step;
            if step % hyper.eval_every == 0 || step == total_steps {
                let dev_loss = mean_dev_loss(&dev_groups, &scorer, hyper.pair_weight_mode)?;
                report.evals.push((step, dev_loss));
                if dev_loss < report.best_dev_loss {
                    report.best_dev_loss = dev_loss;
                    report.best_step = step;
                    best_params = scorer.params.clone();
                    evals_since_best = 0;
                } else {
                    evals_since_best += 1;
                    if evals_since_best >= hyper.patience {
                        log::info!(
                            "early stop at step {step} (epoch {epoch}): no dev improvement in {} evaluations",
                            hyper.patience
                        );
                        break 'training;
                    }
                }
            }
        }
    }

    scorer.params = best_params;
    Ok((scorer, report))
}
