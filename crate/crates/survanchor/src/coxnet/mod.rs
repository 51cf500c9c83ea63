//! Survival network training: negative partial log-likelihood over risk
//! sets, mini-batch gradient descent with Adam, and a deterministic
//! hyperparameter grid sweep selected on validation concordance.

pub mod bundle;
pub mod mlp;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{SplitPlan, SplitRole, Standardizer, SurvivalDataset};
use crate::special::log_add_exp;
use crate::survstats::{concordance_index, fit_breslow, BreslowBaseline};
pub use bundle::EmbeddingBundle;
use mlp::{Adam, FinalActivation, Mlp};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("non-finite or negative time at index {0}")]
    BadTime(usize),
    #[error("event flag at index {0} is not 0 or 1")]
    BadEventFlag(usize),
    #[error("no events in batch")]
    NoEventsInBatch,
    #[error("split {0:?} is empty")]
    EmptySplit(SplitRole),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("every grid point failed; last failure: {0}")]
    AllGridPointsFailed(String),
    #[error("validation split unusable for model selection: {0}")]
    DegenerateValidation(String),
    #[error(transparent)]
    Stats(#[from] crate::survstats::StatsError),
}

fn validate_batch(times: &[f64], events: &[u8], scores: &[f64]) -> Result<(), TrainError> {
    if times.len() != events.len() {
        return Err(TrainError::LengthMismatch(times.len(), events.len()));
    }
    if times.len() != scores.len() {
        return Err(TrainError::LengthMismatch(times.len(), scores.len()));
    }
    for (i, t) in times.iter().enumerate() {
        if !t.is_finite() || *t < 0.0 {
            return Err(TrainError::BadTime(i));
        }
    }
    if let Some(i) = events.iter().position(|e| *e > 1) {
        return Err(TrainError::BadEventFlag(i));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(TrainError::NonFiniteScore(i));
    }
    Ok(())
}

/// Negative partial log-likelihood over within-batch risk sets, together
/// with its gradient with respect to the scores.
///
/// For each event subject the loss adds `log(sum over at-risk scores'
/// exponentials) - score`; the gradient of subject `m` is
/// `-event_m + exp(score_m) * sum over events with time <= time_m of
/// 1/denominator`. Denominators and the event prefix sum are both kept in
/// log space, so arbitrarily large or small finite scores stay stable.
/// Runs in O(b log b) for a batch of size b.
pub fn cox_loss_and_gradient(
    times: &[f64],
    events: &[u8],
    scores: &[f64],
) -> Result<(f64, Vec<f64>), TrainError> {
    validate_batch(times, events, scores)?;
    let n = times.len();
    if events.iter().all(|e| *e == 0) {
        return Err(TrainError::NoEventsInBatch);
    }

    // Descending by time; ties share one risk set.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).unwrap().then(a.cmp(&b)));

    // Pass 1: log risk-set denominator per tie group, walking times downward.
    let mut log_denom = f64::NEG_INFINITY;
    let mut groups: Vec<(f64, usize, f64, f64)> = Vec::new(); // (time, d, sum event scores, log denom)
    let mut pos = 0;
    while pos < n {
        let t = times[order[pos]];
        let mut end = pos;
        while end < n && times[order[end]] == t {
            log_denom = log_add_exp(log_denom, scores[order[end]]);
            end += 1;
        }
        let mut d = 0usize;
        let mut event_score_sum = 0.0;
        for &i in &order[pos..end] {
            if events[i] == 1 {
                d += 1;
                event_score_sum += scores[i];
            }
        }
        if d > 0 {
            groups.push((t, d, event_score_sum, log_denom));
        }
        pos = end;
    }

    // Loss: sum over event groups of d * log denom - (event scores).
    let mut loss = 0.0;
    for &(_, d, event_score_sum, ld) in &groups {
        loss += d as f64 * ld - event_score_sum;
    }

    // Pass 2: ascending prefix of log(sum of d/denominator) over event
    // groups, then per-subject gradients. Because a subject only picks up
    // prefix terms from groups it was at risk for, score + prefix is
    // bounded by log(total events) and the exponential cannot overflow.
    groups.reverse(); // now ascending in time
    let mut prefix = Vec::with_capacity(groups.len());
    let mut log_c = f64::NEG_INFINITY;
    for &(t, d, _, ld) in &groups {
        log_c = log_add_exp(log_c, (d as f64).ln() - ld);
        prefix.push((t, log_c));
    }

    let grad = (0..n)
        .map(|m| {
            // Last event group with time <= times[m].
            let k = prefix.partition_point(|&(t, _)| t <= times[m]);
            let risk_term = if k == 0 {
                0.0
            } else {
                (scores[m] + prefix[k - 1].1).exp()
            };
            risk_term - f64::from(events[m])
        })
        .collect();

    Ok((loss, grad))
}

pub fn cox_loss(times: &[f64], events: &[u8], scores: &[f64]) -> Result<f64, TrainError> {
    cox_loss_and_gradient(times, events, scores).map(|(l, _)| l)
}

/// Hyperparameter grid plus optimization budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub layer_counts: Vec<usize>,
    pub embed_dims: Vec<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub final_activation: FinalActivation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_sizes: vec![64, 128],
            learning_rates: vec![0.01, 0.001],
            layer_counts: vec![1, 2, 3, 4],
            embed_dims: vec![5, 6, 7, 8, 9, 10],
            max_epochs: 100,
            patience: 10,
            final_activation: FinalActivation::UnitNorm,
            seed: 0,
        }
    }
}

/// One cell of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub layer_count: usize,
    pub embed_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum GridStatus {
    Ok,
    Diverged { message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPointReport {
    pub point: GridPoint,
    pub status: GridStatus,
    pub epochs_run: usize,
    pub best_val_concordance: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_concordance: f64,
}

/// Fitted survival model: standardizer, encoder + head, and the baseline
/// hazard fitted on the training rows of the final network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mlp: Mlp,
    pub standardizer: Standardizer,
    pub baseline: BreslowBaseline,
    pub hyper: GridPoint,
    pub seed: u64,
    pub val_concordance: f64,
    /// Earliest and latest observed time on the training rows; display
    /// grids for survival figures span exactly this window.
    pub train_time_range: (f64, f64),
}

impl TrainedModel {
    /// Risk score of one raw feature row.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut r = row.to_vec();
        self.standardizer.apply_row(&mut r);
        self.mlp.score(&r)
    }

    /// Embedding of one raw feature row.
    pub fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        let mut r = row.to_vec();
        self.standardizer.apply_row(&mut r);
        self.mlp.encode(&r)
    }

    pub fn scores(&self, dataset: &SurvivalDataset, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.score_row(dataset.row(i))).collect()
    }

    pub fn encode_rows(&self, dataset: &SurvivalDataset, rows: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&i| self.encode_row(dataset.row(i))).collect()
    }

    /// Embedding bundle for a row subset, carrying the survival labels.
    pub fn build_bundle(
        &self,
        dataset: &SurvivalDataset,
        rows: &[usize],
        source: &str,
    ) -> EmbeddingBundle {
        EmbeddingBundle {
            version: bundle::BUNDLE_VERSION,
            d: self.mlp.embed_dim,
            n: rows.len(),
            ids: rows.iter().map(|&i| dataset.ids[i].clone()).collect(),
            embeddings: self.encode_rows(dataset, rows),
            times: Some(rows.iter().map(|&i| dataset.times[i]).collect()),
            events: Some(rows.iter().map(|&i| dataset.events[i]).collect()),
            source: source.to_string(),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, json + "\n")
    }

    pub fn load(path: &std::path::Path) -> Result<TrainedModel, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        serde_json::from_str(&raw).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutput {
    pub model: TrainedModel,
    pub log: Vec<EpochRecord>,
    pub grid: Vec<GridPointReport>,
}

/// Derives an independent stream seed for grid point `index`; a fixed
/// 64-bit mix (splitmix-style) keeps the streams decorrelated while staying
/// reproducible from the run seed alone.
pub fn derive_subseed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Split {
    rows: Vec<Vec<f64>>,
    times: Vec<f64>,
    events: Vec<u8>,
}

fn standardized_split(
    dataset: &SurvivalDataset,
    standardizer: &Standardizer,
    indices: &[usize],
) -> Split {
    Split {
        rows: indices
            .iter()
            .map(|&i| {
                let mut r = dataset.row(i).to_vec();
                standardizer.apply_row(&mut r);
                r
            })
            .collect(),
        times: indices.iter().map(|&i| dataset.times[i]).collect(),
        events: indices.iter().map(|&i| dataset.events[i]).collect(),
    }
}

enum PointOutcome {
    Finished {
        mlp: Mlp,
        best_val: f64,
        epochs_run: usize,
        log: Vec<EpochRecord>,
    },
    Diverged {
        message: String,
        epochs_run: usize,
    },
}

fn run_grid_point(
    train: &Split,
    val: &Split,
    point: GridPoint,
    config: &TrainConfig,
    subseed: u64,
) -> Result<PointOutcome, TrainError> {
    let mut rng = ChaCha20Rng::seed_from_u64(subseed);
    let input_dim = train.rows[0].len();
    let mut mlp = Mlp::new(
        input_dim,
        point.embed_dim,
        point.layer_count,
        config.final_activation,
        &mut rng,
    );
    let mut adam = Adam::new(&mlp, point.learning_rate);

    let mut best_val = f64::NEG_INFINITY;
    let mut best_weights = mlp.clone();
    let mut stale_epochs = 0usize;
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train.rows.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_events = 0usize;

        for chunk in order.chunks(point.batch_size) {
            let times: Vec<f64> = chunk.iter().map(|&i| train.times[i]).collect();
            let events: Vec<u8> = chunk.iter().map(|&i| train.events[i]).collect();
            let caches: Vec<_> = chunk
                .iter()
                .map(|&i| mlp.forward(&train.rows[i]))
                .collect();
            let scores: Vec<f64> = caches.iter().map(|(s, _)| *s).collect();

            let (loss, score_grad) = match cox_loss_and_gradient(&times, &events, &scores) {
                Ok(pair) => pair,
                Err(TrainError::NoEventsInBatch) => continue,
                Err(TrainError::NonFiniteScore(_)) => {
                    return Ok(PointOutcome::Diverged {
                        message: format!("non-finite score at epoch {epoch}"),
                        epochs_run: epoch,
                    });
                }
                Err(other) => return Err(other),
            };
            if !loss.is_finite() {
                return Ok(PointOutcome::Diverged {
                    message: format!("non-finite loss at epoch {epoch}"),
                    epochs_run: epoch,
                });
            }
            epoch_loss += loss;
            epoch_events += events.iter().filter(|e| **e == 1).count();

            let mut grads = mlp.zero_grads();
            for ((_, cache), g) in caches.iter().zip(&score_grad) {
                mlp.backward(cache, *g, &mut grads);
            }
            adam.step(&mut mlp, &grads);
        }

        let val_scores: Vec<f64> = val.rows.iter().map(|r| mlp.score(r)).collect();
        if let Some(i) = val_scores.iter().position(|s| !s.is_finite()) {
            let _ = i;
            return Ok(PointOutcome::Diverged {
                message: format!("non-finite validation score at epoch {epoch}"),
                epochs_run: epoch + 1,
            });
        }
        let val_c = concordance_index(&val.times, &val.events, &val_scores)
            .map_err(|e| TrainError::DegenerateValidation(e.to_string()))?;
        let mean_loss = if epoch_events > 0 {
            epoch_loss / epoch_events as f64
        } else {
            f64::NAN
        };
        log.push(EpochRecord {
            epoch,
            loss: mean_loss,
            val_concordance: val_c,
        });

        if val_c > best_val {
            best_val = val_c;
            best_weights = mlp.clone();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    let epochs_run = log.len();
    Ok(PointOutcome::Finished {
        mlp: best_weights,
        best_val,
        epochs_run,
        log,
    })
}

/// Sweeps the whole grid sequentially with per-point derived seeds, selects
/// the point with the highest validation concordance (earlier grid order
/// wins ties), and refits the baseline hazard on the training rows with the
/// selected network.
pub fn train_model(
    dataset: &SurvivalDataset,
    plan: &SplitPlan,
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    if config.batch_sizes.is_empty()
        || config.learning_rates.is_empty()
        || config.layer_counts.is_empty()
        || config.embed_dims.is_empty()
    {
        return Err(TrainError::BadGrid("empty grid axis".into()));
    }
    if config.batch_sizes.iter().any(|b| *b == 0) {
        return Err(TrainError::BadGrid("batch size 0".into()));
    }
    if config.learning_rates.iter().any(|l| !(*l > 0.0)) {
        return Err(TrainError::BadGrid("non-positive learning rate".into()));
    }
    if config.layer_counts.iter().any(|l| *l == 0) || config.embed_dims.iter().any(|d| *d == 0) {
        return Err(TrainError::BadGrid("zero layer count or embedding dim".into()));
    }
    if config.max_epochs == 0 || config.patience == 0 {
        return Err(TrainError::BadGrid("zero epoch or patience budget".into()));
    }

    let train_idx = plan.indices(SplitRole::Train);
    let val_idx = plan.indices(SplitRole::Validation);
    if train_idx.is_empty() {
        return Err(TrainError::EmptySplit(SplitRole::Train));
    }
    if val_idx.is_empty() {
        return Err(TrainError::EmptySplit(SplitRole::Validation));
    }
    if train_idx.iter().all(|&i| dataset.events[i] == 0) {
        return Err(TrainError::NoEventsInBatch);
    }

    let standardizer = Standardizer::fit(dataset, &train_idx);
    let train = standardized_split(dataset, &standardizer, &train_idx);
    let val = standardized_split(dataset, &standardizer, &val_idx);

    let mut reports = Vec::new();
    let mut best: Option<(f64, Mlp, GridPoint, Vec<EpochRecord>)> = None;
    let mut last_failure = String::from("empty grid");
    let mut index = 0u64;

    for &batch_size in &config.batch_sizes {
        for &learning_rate in &config.learning_rates {
            for &layer_count in &config.layer_counts {
                for &embed_dim in &config.embed_dims {
                    let point = GridPoint {
                        batch_size,
                        learning_rate,
                        layer_count,
                        embed_dim,
                    };
                    let subseed = derive_subseed(config.seed, index);
                    index += 1;
                    match run_grid_point(&train, &val, point, config, subseed)? {
                        PointOutcome::Finished {
                            mlp,
                            best_val,
                            epochs_run,
                            log,
                        } => {
                            reports.push(GridPointReport {
                                point,
                                status: GridStatus::Ok,
                                epochs_run,
                                best_val_concordance: Some(best_val),
                            });
                            let better = match &best {
                                None => true,
                                Some((b, _, _, _)) => best_val > *b,
                            };
                            if better {
                                best = Some((best_val, mlp, point, log));
                            }
                        }
                        PointOutcome::Diverged {
                            message,
                            epochs_run,
                        } => {
                            last_failure = format!("{point:?}: {message}");
                            reports.push(GridPointReport {
                                point,
                                status: GridStatus::Diverged { message },
                                epochs_run,
                                best_val_concordance: None,
                            });
                        }
                    }
                }
            }
        }
    }

    let (val_concordance, mlp, hyper, log) =
        best.ok_or(TrainError::AllGridPointsFailed(last_failure))?;

    let train_scores: Vec<f64> = train.rows.iter().map(|r| mlp.score(r)).collect();
    let baseline = fit_breslow(&train.times, &train.events, &train_scores)?;
    let t_lo = train.times.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_hi = train.times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    Ok(TrainOutput {
        model: TrainedModel {
            mlp,
            standardizer,
            baseline,
            hyper,
            seed: config.seed,
            val_concordance,
            train_time_range: (t_lo, t_hi),
        },
        log,
        grid: reports,
    })
}
