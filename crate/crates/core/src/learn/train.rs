//! Batch and stochastic dictionary learning.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::layers::{build_layers, LayerSchedule};
use crate::learn::gradient::{
    dict_gradient, dict_gradient_masked, frobenius, zero_gradient, DictGradient,
};
use crate::learn::optim::{OptimizerKind, OptimizerState};
use crate::needles::NeedleField;
use crate::plane::Plane;
use crate::pursuit::{pursue_layered, pursue_masked, DescentStats, Engine, PursuitConfig};
use crate::solver::{init_needles, LocalSolver};
use crate::work::{objective, ObjectiveReport, WorkImage};

/// An optimizer used over an inclusive range of (1-based) epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerPhase {
    pub first_epoch: usize,
    /// `None` leaves the phase open-ended.
    pub last_epoch: Option<usize>,
    pub kind: OptimizerKind,
    pub eta: f64,
}

impl OptimizerPhase {
    pub fn always(kind: OptimizerKind, eta: f64) -> Self {
        Self {
            first_epoch: 1,
            last_epoch: None,
            kind,
            eta,
        }
    }

    fn contains(&self, epoch: usize) -> bool {
        epoch >= self.first_epoch && self.last_epoch.is_none_or(|l| epoch <= l)
    }
}

/// Multiply the step size by `factor` every `period` epochs of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub factor: f64,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Pursuit settings. Stochastic training uses `lambda`, `parallel`,
    /// `dual_tol` and `max_nnz`; batch training runs a full pursuit with it.
    pub pursuit: PursuitConfig,
    pub epochs: usize,
    /// Epochs not covered by any phase only run pursuit.
    pub phases: Vec<OptimizerPhase>,
    /// When set, the step size is this fraction of `‖∇‖_F`; must lie in
    /// `[0.01, 0.02]`.
    pub auto_step: Option<f64>,
    pub lr_decay: Option<LrDecay>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(lambda: f64, epochs: usize, phase: OptimizerPhase) -> Self {
        Self {
            pursuit: PursuitConfig::new(lambda),
            epochs,
            phases: vec![phase],
            auto_step: None,
            lr_decay: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pursuit.validate()?;
        for (i, p) in self.phases.iter().enumerate() {
            p.kind.validate()?;
            if p.first_epoch == 0 || p.last_epoch.is_some_and(|l| l < p.first_epoch) {
                return Err(CscError::Config(format!(
                    "phase {i} has an empty epoch range"
                )));
            }
            if !(p.eta >= 0.0) {
                return Err(CscError::Config(format!(
                    "phase {i} has a negative step size"
                )));
            }
            for q in &self.phases[..i] {
                let disjoint = p.last_epoch.is_some_and(|l| l < q.first_epoch)
                    || q.last_epoch.is_some_and(|l| l < p.first_epoch);
                if !disjoint {
                    return Err(CscError::Config("optimizer phases overlap".into()));
                }
            }
        }
        if let Some(f) = self.auto_step {
            if !(0.01..=0.02).contains(&f) {
                return Err(CscError::Config(format!(
                    "auto step fraction must lie in [0.01, 0.02], got {f}"
                )));
            }
        }
        if let Some(d) = self.lr_decay {
            if d.period == 0 || !(d.factor > 0.0) {
                return Err(CscError::Config("invalid learning-rate decay".into()));
            }
        }
        Ok(())
    }

    fn phase(&self, epoch: usize) -> Option<(usize, &OptimizerPhase)> {
        self.phases
            .iter()
            .enumerate()
            .find(|(_, p)| p.contains(epoch))
    }

    fn base_eta(&self, phase: &OptimizerPhase, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => {
                let k = (epoch - phase.first_epoch) / d.period;
                phase.eta * d.factor.powi(k as i32)
            }
            None => phase.eta,
        }
    }

    fn step_size(&self, base: f64, grad_norm: f64) -> f64 {
        match self.auto_step {
            Some(f) if base > 0.0 => f * grad_norm,
            _ => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub objective: ObjectiveReport,
    /// Mean Frobenius norm of the gradients used during the epoch.
    pub grad_norm: f64,
    /// Last step size used during the epoch.
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub dict: LocalDictionary,
    pub needles: Vec<NeedleField>,
    /// Epoch 0 is the objective after needle initialization.
    pub trace: Vec<TrainReport>,
    pub stats: DescentStats,
}

fn pad_all(images: &[Plane], side: usize) -> Result<Vec<WorkImage>> {
    if images.is_empty() {
        return Err(CscError::Config("no training images".into()));
    }
    images
        .iter()
        .map(|x| WorkImage::pad(x.view(), side))
        .collect()
}

fn init_all(
    works: &[WorkImage],
    dict: &LocalDictionary,
    cfg: &TrainConfig,
) -> Result<Vec<NeedleField>> {
    works
        .iter()
        .map(|w| init_needles(w, dict, &cfg.pursuit.lasso()))
        .collect()
}

fn layer_gradient(
    img: &WorkImage,
    needles: &NeedleField,
    layer: &[crate::layers::Position],
) -> Result<DictGradient> {
    match &img.mask {
        None => dict_gradient(&img.residual, needles, Some(layer)),
        Some(m) => dict_gradient_masked(&img.residual, m, needles, Some(layer)),
    }
}

/// Stochastic learning on raw (unpadded) images: needles are initialized,
/// then every layer's pursuit is followed by one dictionary step on that
/// layer's gradient and a column normalization.
pub fn train_stochastic(
    images: &[Plane],
    dict: LocalDictionary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut works = pad_all(images, dict.side())?;
    let needles = init_all(&works, &dict, cfg)?;
    train_stochastic_on(&mut works, needles, dict, cfg)
}

/// Stochastic learning on prepared (padded, optionally masked) images.
pub fn train_stochastic_on(
    works: &mut [WorkImage],
    needles: Vec<NeedleField>,
    mut dict: LocalDictionary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if works.is_empty() || works.len() != needles.len() {
        return Err(CscError::Config(
            "need one needle field per training image".into(),
        ));
    }
    let lasso = cfg.pursuit.lasso();
    let lambda = cfg.pursuit.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let schedules: Vec<LayerSchedule> = works
        .iter()
        .map(|w| build_layers(w.shape().0, w.shape().1, dict.side()))
        .collect::<Result<_>>()?;
    let mut engines: Vec<Engine> = works
        .iter_mut()
        .zip(needles)
        .map(|(w, f)| Engine::new(w, f, &dict, &lasso))
        .collect::<Result<_>>()?;

    let mut version = 0u64;
    let mut engine_version = vec![0u64; engines.len()];
    let mut totals: Vec<f64> = engines.iter().map(|e| e.report(lambda).total).collect();
    let initial =
        ObjectiveReport::sum(&engines.iter().map(|e| e.report(lambda)).collect::<Vec<_>>());
    let mut trace = vec![TrainReport {
        objective: initial,
        grad_norm: 0.0,
        eta: 0.0,
    }];
    let mut optimizer: Option<(usize, OptimizerState)> = None;
    let atom_count = dict.patch_len() * dict.num_filters();

    for epoch in 1..=cfg.epochs {
        let phase = cfg.phase(epoch);
        match (phase, &optimizer) {
            (Some((i, _)), Some((j, _))) if i == *j => {}
            (Some((i, p)), _) => {
                optimizer = Some((i, OptimizerState::new(p.kind, p.eta, atom_count)?))
            }
            (None, _) => optimizer = None,
        }
        let base_eta = phase.map_or(0.0, |(_, p)| cfg.base_eta(p, epoch));
        let epoch_version = version;
        let mut norm_sum = 0.0;
        let mut norm_count = 0usize;
        let mut last_eta = 0.0;

        for (k, engine) in engines.iter_mut().enumerate() {
            for layer in schedules[k].layers() {
                if engine_version[k] != version {
                    engine.refresh(&dict)?;
                    engine.mark_all_dirty();
                    engine_version[k] = version;
                }
                {
                    let solver = LocalSolver::new(&dict, lasso)?;
                    engine.update_positions(&solver, layer, cfg.pursuit.parallel)?;
                }
                let Some((_, opt)) = optimizer.as_mut() else {
                    continue;
                };
                let grad = layer_gradient(engine.img, &engine.needles, layer)?;
                let gn = frobenius(&grad);
                norm_sum += gn;
                norm_count += 1;
                let eta = cfg.step_size(base_eta, gn);
                last_eta = eta;
                if opt.step(&mut dict, &grad, eta)? {
                    dict.project_columns_or_reseed(&mut rng);
                    debug_assert!(dict.column_norms().iter().all(|n| (n - 1.0).abs() <= 1e-9));
                    version += 1;
                }
            }
        }

        let changed_dict = version != epoch_version;
        let mut reports = Vec::with_capacity(engines.len());
        for (k, engine) in engines.iter_mut().enumerate() {
            if engine_version[k] != version {
                engine.refresh(&dict)?;
                engine.mark_all_dirty();
                engine_version[k] = version;
            }
            let r = engine.finish_epoch(&dict, lambda, epoch, totals[k], !changed_dict)?;
            totals[k] = r.total;
            reports.push(r);
        }
        let objective = ObjectiveReport::sum(&reports).at(epoch, start.elapsed().as_secs_f64());
        if cfg.pursuit.log_every > 0 && epoch % cfg.pursuit.log_every == 0 {
            log::info!(
                "epoch {epoch}: objective {:.6e}, nnz {}",
                objective.total,
                objective.nnz
            );
        }
        trace.push(TrainReport {
            objective,
            grad_norm: if norm_count > 0 {
                norm_sum / norm_count as f64
            } else {
                0.0
            },
            eta: last_eta,
        });
    }

    let mut stats = DescentStats::default();
    let mut fields = Vec::with_capacity(engines.len());
    for e in engines {
        stats.merge(&e.stats);
        fields.push(e.needles);
    }
    Ok(TrainOutcome {
        dict,
        needles: fields,
        trace,
        stats,
    })
}

/// Batch learning on raw images: alternate a full pursuit per image with one
/// projected steepest-descent step on the summed gradient. The step is halved
/// until the data term does not increase.
pub fn train_batch(
    images: &[Plane],
    dict: LocalDictionary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut works = pad_all(images, dict.side())?;
    let needles = init_all(&works, &dict, cfg)?;
    train_batch_on(&mut works, needles, dict, cfg)
}

const MAX_HALVINGS: usize = 40;

pub fn train_batch_on(
    works: &mut [WorkImage],
    mut needles: Vec<NeedleField>,
    mut dict: LocalDictionary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if works.is_empty() || works.len() != needles.len() {
        return Err(CscError::Config(
            "need one needle field per training image".into(),
        ));
    }
    let lambda = cfg.pursuit.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let schedules: Vec<LayerSchedule> = works
        .iter()
        .map(|w| build_layers(w.shape().0, w.shape().1, dict.side()))
        .collect::<Result<_>>()?;
    let evaluate = |works: &[WorkImage],
                    needles: &[NeedleField],
                    d: &LocalDictionary|
     -> Result<ObjectiveReport> {
        let reports = works
            .iter()
            .zip(needles)
            .map(|(w, f)| objective(w, f, d, lambda))
            .collect::<Result<Vec<_>>>()?;
        Ok(ObjectiveReport::sum(&reports))
    };
    let mut trace = vec![TrainReport {
        objective: evaluate(works, &needles, &dict)?,
        grad_norm: 0.0,
        eta: 0.0,
    }];
    let mut stats = DescentStats::default();

    for epoch in 1..=cfg.epochs {
        for ((w, f), s) in works.iter_mut().zip(needles.iter_mut()).zip(&schedules) {
            let field = std::mem::replace(f, NeedleField::zeros(1, 1, 1, 1)?);
            let out = if w.is_masked() {
                pursue_masked(w, &dict, field, s, &cfg.pursuit)?
            } else {
                pursue_layered(w, &dict, field, s, &cfg.pursuit)?
            };
            stats.merge(&out.stats);
            *f = out.needles;
            w.refresh(f, &dict)?;
        }

        let mut grad = zero_gradient(dict.patch_len(), dict.num_filters());
        for (w, f) in works.iter().zip(&needles) {
            grad += &match &w.mask {
                None => dict_gradient(&w.residual, f, None)?,
                Some(m) => dict_gradient_masked(&w.residual, m, f, None)?,
            };
        }
        let gn = frobenius(&grad);
        let base = cfg
            .phase(epoch)
            .map_or(0.0, |(_, p)| cfg.base_eta(p, epoch));
        let mut eta = cfg.step_size(base, gn);
        let before = evaluate(works, &needles, &dict)?.data_term;
        let mut used = 0.0;
        if eta > 0.0 && gn > 0.0 {
            for _ in 0..MAX_HALVINGS {
                let mut cand = dict.clone();
                let mut sgd = OptimizerState::new(OptimizerKind::Sgd, eta, grad.len())?;
                sgd.step(&mut cand, &grad, eta)?;
                cand.project_columns_or_reseed(&mut rng);
                if evaluate(works, &needles, &cand)?.data_term <= before {
                    dict = cand;
                    used = eta;
                    break;
                }
                eta *= 0.5;
            }
        }
        for (w, f) in works.iter_mut().zip(&needles) {
            w.refresh(f, &dict)?;
        }
        let objective = evaluate(works, &needles, &dict)?.at(epoch, start.elapsed().as_secs_f64());
        if cfg.pursuit.log_every > 0 && epoch % cfg.pursuit.log_every == 0 {
            log::info!(
                "epoch {epoch}: objective {:.6e}, step {used:.3e}",
                objective.total
            );
        }
        trace.push(TrainReport {
            objective,
            grad_norm: gn,
            eta: used,
        });
    }
    Ok(TrainOutcome {
        dict,
        needles,
        trace,
        stats,
    })
}
