//! Training objective, optimizer, metrics and the train / evaluate loops.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{QgnnError, Result};
use crate::graph::SubGraph;
use crate::model::{qgnn_forward, qgnn_gradient, Architecture, Checkpoint, ModelGradient, ModelParams};
use crate::par;
use crate::ttn::Backend;

// ---------------------------------------------------------------------------
// Loss

/// Balanced class weights `(w₊, w₋) = (E / 2E₊, E / 2E₋)`; an absent class gets weight 1.
pub fn class_weights(labels: &[u8]) -> (f64, f64) {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = n - pos;
    let w = |count: f64| if count == 0.0 { 1.0 } else { n / (2.0 * count) };
    (w(pos), w(neg))
}

fn check_loss_inputs(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(QgnnError::Dimension {
            expected: labels.len(),
            got: probs.len(),
        });
    }
    if probs.is_empty() {
        return Err(QgnnError::Domain("loss of an empty edge set".into()));
    }
    Ok(())
}

/// Class-balanced binary cross entropy, averaged over edges. Probabilities
/// are clamped to `[clamp_eps, 1 − clamp_eps]`.
pub fn weighted_bce(probs: &[f64], labels: &[u8], clamp_eps: f64) -> Result<f64> {
    weighted_bce_with_grad(probs, labels, clamp_eps).map(|(loss, _)| loss)
}

/// Loss and `∂loss/∂p` per edge (zero where the clamp is active).
pub fn weighted_bce_with_grad(probs: &[f64], labels: &[u8], clamp_eps: f64) -> Result<(f64, Vec<f64>)> {
    check_loss_inputs(probs, labels)?;
    let (w_pos, w_neg) = class_weights(labels);
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let pc = p.clamp(clamp_eps, 1.0 - clamp_eps);
        let active = pc == p;
        if y == 1 {
            loss -= w_pos * pc.ln();
            grad.push(if active { -w_pos / (n * pc) } else { 0.0 });
        } else {
            loss -= w_neg * (1.0 - pc).ln();
            grad.push(if active { w_neg / (n * (1.0 - pc)) } else { 0.0 });
        }
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(QgnnError::Numeric("weighted cross entropy".into()));
    }
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// ADAM

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One bias-corrected update of `params` in place. A non-finite gradient
    /// aborts the step and leaves both `params` and the state untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &AdamConfig) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(QgnnError::Dimension {
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grad.len()
                },
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(QgnnError::Numeric("gradient passed to adam".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}

/// Applies one ADAM update to every parameter block of the model.
pub fn adam_step(
    params: &mut ModelParams,
    grad: &ModelGradient,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let mut flat = params.to_flat();
    state.step(&mut flat, &grad.to_flat(), cfg)?;
    params.set_flat(&flat)
}

// ---------------------------------------------------------------------------
// AUC

/// Area under the ROC curve via the Mann–Whitney statistic; ties count ½.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(QgnnError::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(QgnnError::Domain("AUC needs both positive and negative labels".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(QgnnError::Numeric("NaN score in AUC".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the U statistic, kept in integers
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

// ---------------------------------------------------------------------------
// Evaluation

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    /// Mean per-subgraph loss over subgraphs with at least one edge.
    pub mean_loss: f64,
    /// Pooled AUC over subgraphs containing both classes.
    pub auc: Option<f64>,
    pub n_graphs: usize,
    pub n_empty: usize,
    pub n_single_class: usize,
    /// Output-probability histograms on `[0, 1]` for true and fake edges.
    pub hist_true: Vec<usize>,
    pub hist_fake: Vec<usize>,
}

pub fn evaluate(params: &ModelParams, graphs: &[SubGraph], arch: &Architecture, clamp_eps: f64) -> Result<EvalSummary> {
    params
        .validate(arch)
        .map_err(|e| QgnnError::Checkpoint(format!("model shape mismatch: {e}")))?;
    let outputs = par::map_slice(graphs, |g| -> Result<Option<(Vec<f64>, f64)>> {
        if g.n_edges() == 0 {
            return Ok(None);
        }
        let probs = qgnn_forward(g, params, arch)?;
        let loss = weighted_bce(&probs, g.labels(), clamp_eps)?;
        Ok(Some((probs, loss)))
    });

    let mut loss_sum = 0.0;
    let mut n_scored = 0usize;
    let mut n_empty = 0;
    let mut n_single_class = 0;
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut hist_true = vec![0; HISTOGRAM_BINS];
    let mut hist_fake = vec![0; HISTOGRAM_BINS];
    for (g, out) in graphs.iter().zip(outputs) {
        let Some((probs, loss)) = out? else {
            n_empty += 1;
            continue;
        };
        loss_sum += loss;
        n_scored += 1;
        for (&p, &y) in probs.iter().zip(g.labels()) {
            let bin = ((p * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            if y == 1 {
                hist_true[bin] += 1;
            } else {
                hist_fake[bin] += 1;
            }
        }
        let n_true = g.n_true();
        if n_true == 0 || n_true == g.n_edges() {
            n_single_class += 1;
            continue;
        }
        pooled_scores.extend_from_slice(&probs);
        pooled_labels.extend_from_slice(g.labels());
    }
    if n_scored == 0 {
        return Err(QgnnError::Domain("no subgraph with edges to evaluate".into()));
    }
    let auc = if pooled_labels.is_empty() {
        None
    } else {
        Some(roc_auc(&pooled_scores, &pooled_labels)?)
    };
    Ok(EvalSummary {
        mean_loss: loss_sum / n_scored as f64,
        auc,
        n_graphs: graphs.len(),
        n_empty,
        n_single_class,
        hist_true,
        hist_fake,
    })
}

// ---------------------------------------------------------------------------
// Training

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub n_iterations: usize,
    pub epochs: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub seed: u64,
    pub clamp_eps: f64,
    /// Validation cadence in optimizer steps.
    pub val_every: usize,
    pub backend: Backend,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            n_iterations: 1,
            epochs: 1,
            n_train: 1400,
            n_val: 200,
            seed: 0,
            clamp_eps: 1e-7,
            val_every: 25,
            backend: Backend::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) {
            return Err(QgnnError::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(QgnnError::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.n_train == 0 || self.n_val == 0 {
            return Err(QgnnError::Config(
                "train and validation split counts must be ≥ 1".into(),
            ));
        }
        if self.val_every == 0 {
            return Err(QgnnError::Config("val_every must be ≥ 1".into()));
        }
        if self.n_iterations == 0 {
            return Err(QgnnError::Config("n_iterations must be ≥ 1".into()));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(QgnnError::Config("clamp_eps must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Seeded shuffle of the whole dataset followed by a train / validation split.
pub fn split_dataset(
    graphs: &[SubGraph],
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<(Vec<SubGraph>, Vec<SubGraph>)> {
    if graphs.is_empty() {
        return Err(QgnnError::Domain("dataset is empty".into()));
    }
    if graphs.len() < 2 {
        return Err(QgnnError::Domain("dataset needs at least 2 subgraphs".into()));
    }
    if n_train + n_val > graphs.len() {
        return Err(QgnnError::Config(format!(
            "split {n_train}/{n_val} exceeds the {} available subgraphs",
            graphs.len()
        )));
    }
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| graphs[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..n_train + n_val])))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub subgraph_id: Option<String>,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_auc: Option<f64>,
}

pub const METRICS_HEADER: &str = "step,subgraph_id,train_loss,val_loss,val_auc";

impl TrainRecord {
    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{}",
            self.step,
            self.subgraph_id.as_deref().unwrap_or(""),
            opt(self.train_loss),
            opt(self.val_loss),
            opt(self.val_auc)
        )
    }
}

pub fn metrics_csv(records: &[TrainRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{METRICS_HEADER}");
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Parses a metrics CSV back into records (used for plotting).
pub fn parse_metrics_csv(text: &str, source: &Path) -> Result<Vec<TrainRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => {
            return Err(QgnnError::parse(
                source,
                1,
                format!("expected header `{METRICS_HEADER}`"),
            ))
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 5 {
                return Err(QgnnError::parse(source, line, "expected 5 columns"));
            }
            let opt = |c: &str| -> Result<Option<f64>> {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse()
                        .map(Some)
                        .map_err(|_| QgnnError::parse(source, line, format!("bad number {c:?}")))
                }
            };
            Ok(TrainRecord {
                step: cells[0]
                    .parse()
                    .map_err(|_| QgnnError::parse(source, line, "bad step"))?,
                subgraph_id: (!cells[1].is_empty()).then(|| cells[1].to_string()),
                train_loss: opt(cells[2])?,
                val_loss: opt(cells[3])?,
                val_auc: opt(cells[4])?,
            })
        })
        .collect()
}

/// Outcome of a training run. On a numeric failure mid-run the checkpoint
/// holds the last parameters that produced a finite step.
#[derive(Debug)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub records: Vec<TrainRecord>,
    pub final_eval: Option<EvalSummary>,
    pub failure: Option<QgnnError>,
}

impl TrainRun {
    pub fn baseline_auc(&self) -> Option<f64> {
        self.records.first().and_then(|r| r.val_auc)
    }

    pub fn final_auc(&self) -> Option<f64> {
        self.records
            .iter()
            .rev()
            .find(|r| r.val_loss.is_some())
            .and_then(|r| r.val_auc)
    }
}

fn validation_record(
    step: usize,
    subgraph_id: Option<String>,
    train_loss: Option<f64>,
    eval: &EvalSummary,
) -> TrainRecord {
    TrainRecord {
        step,
        subgraph_id,
        train_loss,
        val_loss: Some(eval.mean_loss),
        val_auc: eval.auc,
    }
}

/// Trains from scratch on `graphs`, one optimizer step per subgraph.
pub fn train(graphs: &[SubGraph], config: &TrainConfig) -> Result<TrainRun> {
    config.validate()?;
    let arch = Architecture::new(config.backend);
    let (train_set, val_set) = split_dataset(graphs, config.n_train, config.n_val, config.seed)?;
    let mut params = ModelParams::random(&arch, config.n_iterations, config.seed)?;
    let mut adam = AdamState::new(params.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    let baseline = evaluate(&params, &val_set, &arch, config.clamp_eps)?;
    let mut records = vec![validation_record(0, None, None, &baseline)];
    let mut last_eval = baseline;
    let total_steps: usize = config.epochs * train_set.iter().filter(|g| g.n_edges() > 0).count();

    let mut step = 0;
    let mut failure = None;
    'epochs: for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        for &i in &order {
            let graph = &train_set[i];
            if graph.n_edges() == 0 {
                continue;
            }
            let outcome = qgnn_gradient(graph, &params, &arch, config.clamp_eps).and_then(|(loss, _, grad)| {
                let mut next_params = params.clone();
                let mut next_adam = adam.clone();
                adam_step(&mut next_params, &grad, &mut next_adam, &config.adam)?;
                next_params.validate(&arch)?;
                Ok((loss, next_params, next_adam))
            });
            let (loss, next_params, next_adam) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    break 'epochs;
                }
            };
            params = next_params;
            adam = next_adam;
            step += 1;
            let id = Some(graph.provenance().id());
            if step % config.val_every == 0 || step == total_steps {
                match evaluate(&params, &val_set, &arch, config.clamp_eps) {
                    Ok(eval) => {
                        records.push(validation_record(step, id, Some(loss), &eval));
                        last_eval = eval;
                    }
                    Err(e) => {
                        failure = Some(e);
                        break 'epochs;
                    }
                }
            } else {
                records.push(TrainRecord {
                    step,
                    subgraph_id: id,
                    train_loss: Some(loss),
                    val_loss: None,
                    val_auc: None,
                });
            }
        }
    }

    Ok(TrainRun {
        checkpoint: Checkpoint {
            params,
            optimizer: Some(adam),
        },
        records,
        final_eval: failure.is_none().then_some(last_eval),
        failure,
    })
}
