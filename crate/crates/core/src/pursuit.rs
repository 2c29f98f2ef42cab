//! Local block coordinate descent pursuit.
//!
//! Every needle update exactly minimizes the global objective over that
//! needle's block of coordinates, so the objective never increases. The
//! sequential variant visits needles one by one in row-major order; the
//! layered variant solves all needles of a layer against the same frozen
//! residual (their footprints are disjoint, so this is the same as visiting
//! them one after another) and then applies the updates.

use std::time::Instant;

use rayon::prelude::*;

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::layers::{LayerSchedule, Position, PositionGrid};
use crate::needles::{Needle, NeedleField};
use crate::plane::{extract_patch_into, place_scaled_patch};
use crate::solver::{local_objective, LassoConfig, LocalSolver};
use crate::work::{objective_from_residual, ObjectiveReport, WorkImage};

/// Full residual recompute period, in epochs.
pub const REFRESH_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitConfig {
    pub lambda: f64,
    pub max_epochs: usize,
    /// Stop once an epoch lowers the objective by less than this fraction.
    pub rel_obj_tol: f64,
    pub parallel: bool,
    /// Log the objective every this many epochs (0 disables).
    pub log_every: usize,
    pub dual_tol: f64,
    pub max_nnz: Option<usize>,
}

impl PursuitConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_epochs: 100,
            rel_obj_tol: 1e-6,
            parallel: true,
            log_every: 0,
            dual_tol: 1e-8,
            max_nnz: None,
        }
    }

    pub fn lasso(&self) -> LassoConfig {
        LassoConfig {
            lambda: self.lambda,
            dual_tol: self.dual_tol,
            max_nnz: self.max_nnz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lasso().validate()?;
        if self.max_epochs == 0 {
            return Err(CscError::Config("max_epochs must be at least 1".into()));
        }
        if !(self.rel_obj_tol >= 0.0) {
            return Err(CscError::Config("rel_obj_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Bookkeeping on the descent guarantee.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DescentStats {
    /// Local solves performed.
    pub solves: usize,
    /// Solves skipped because the needle's local target was unchanged.
    pub skipped: usize,
    /// Needle updates that changed a coefficient.
    pub updates: usize,
    /// Largest objective increase seen on a single needle update.
    pub max_increase: f64,
    /// Needle updates whose increase exceeded `1e-10 · (1 + |total|)`.
    pub violations: usize,
    /// Epochs whose total increased by more than the same bound.
    pub epoch_violations: usize,
}

impl DescentStats {
    pub fn merge(&mut self, other: &DescentStats) {
        self.solves += other.solves;
        self.skipped += other.skipped;
        self.updates += other.updates;
        self.max_increase = self.max_increase.max(other.max_increase);
        self.violations += other.violations;
        self.epoch_violations += other.epoch_violations;
    }
}

#[derive(Debug, Clone)]
pub struct PursuitOutcome {
    pub needles: NeedleField,
    /// Objective before the first epoch (epoch 0) and after every epoch.
    pub trace: Vec<ObjectiveReport>,
    pub stats: DescentStats,
}

impl PursuitOutcome {
    pub fn final_report(&self) -> &ObjectiveReport {
        self.trace.last().expect("trace holds the initial report")
    }
}

/// Allowed per-update increase for a given objective magnitude.
pub fn monotonicity_slack(total: f64) -> f64 {
    1e-10 * (1.0 + total.abs())
}

struct Update {
    index: usize,
    needle: Needle,
    increase: f64,
}

/// Mutable pursuit state for one image: needles, residual bookkeeping and
/// the per-needle dirty flags.
pub(crate) struct Engine<'a> {
    pub img: &'a mut WorkImage,
    pub needles: NeedleField,
    dirty: Vec<bool>,
    pub stats: DescentStats,
    reference_total: f64,
    check_descent: bool,
}

impl<'a> Engine<'a> {
    pub fn new(
        img: &'a mut WorkImage,
        needles: NeedleField,
        dict: &LocalDictionary,
        lasso: &LassoConfig,
    ) -> Result<Self> {
        if needles.shape() != img.shape() {
            return Err(CscError::Dimension(format!(
                "needle field is {:?} but image is {:?}",
                needles.shape(),
                img.shape()
            )));
        }
        needles.check_dict(dict)?;
        img.refresh(&needles, dict)?;
        let n = needles.grid().len();
        let mut e = Self {
            img,
            needles,
            dirty: vec![true; n],
            stats: DescentStats::default(),
            reference_total: 0.0,
            check_descent: lasso.max_nnz.is_none(),
        };
        e.reference_total = e.report(lasso.lambda).total;
        Ok(e)
    }

    pub fn grid(&self) -> PositionGrid {
        self.needles.grid()
    }

    pub fn report(&self, lambda: f64) -> ObjectiveReport {
        objective_from_residual(&self.img.residual, &self.needles, lambda)
    }

    /// Marks every needle for re-solving (e.g. after a dictionary change).
    pub fn mark_all_dirty(&mut self) {
        self.dirty.iter_mut().for_each(|d| *d = true);
    }

    /// Recomputes reconstruction and residual from the needles.
    pub fn refresh(&mut self, dict: &LocalDictionary) -> Result<()> {
        self.img.refresh(&self.needles, dict)
    }

    /// Solves every dirty needle in `positions` against the current residual,
    /// then applies all changes. Positions must have pairwise disjoint
    /// footprints. Returns the number of needles that changed.
    pub fn update_positions(
        &mut self,
        solver: &LocalSolver,
        positions: &[Position],
        parallel: bool,
    ) -> Result<usize> {
        let dict = solver.dict();
        let side = dict.side();
        let n = dict.patch_len();
        let grid = self.grid();
        let lambda = solver.config().lambda;

        let todo: Vec<usize> = positions
            .iter()
            .map(|&p| grid.index(p))
            .filter(|&i| self.dirty[i])
            .collect();
        self.stats.skipped += positions.len() - todo.len();
        self.stats.solves += todo.len();

        let img: &WorkImage = self.img;
        let needles = &self.needles;
        let solve_one =
            |scratch: &mut (Vec<f64>, Vec<f64>, Vec<f64>), i: usize| -> Result<Option<Update>> {
                let (target, mask, slice) = scratch;
                let p = grid.position(i);
                let old = needles.get(p);
                extract_patch_into(img.residual.view(), p, side, target)?;
                dict.synthesize(old, slice);
                let mask = match &img.mask {
                    None => {
                        target
                            .iter_mut()
                            .zip(slice.iter())
                            .for_each(|(t, s)| *t += s);
                        None
                    }
                    Some(m) => {
                        extract_patch_into(m.view(), p, side, mask)?;
                        target
                            .iter_mut()
                            .zip(slice.iter())
                            .zip(mask.iter())
                            .for_each(|((t, s), a)| *t += a * s);
                        Some(mask.as_slice())
                    }
                };
                let new = match mask {
                    None => solver.solve(target),
                    Some(m) => solver.solve_masked(target, m),
                }
                .map_err(|e| e.at(p))?;
                if &new == old {
                    return Ok(None);
                }
                let increase = local_objective(target, mask, &new, dict, lambda)
                    - local_objective(target, mask, old, dict, lambda);
                Ok(Some(Update {
                    index: i,
                    needle: new,
                    increase,
                }))
            };
        let init = || (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let results: Vec<Option<Update>> = if parallel && todo.len() > 1 {
            todo.par_iter()
                .map_init(init, |s, &i| solve_one(s, i))
                .collect::<Result<_>>()?
        } else {
            let mut s = init();
            todo.iter()
                .map(|&i| solve_one(&mut s, i))
                .collect::<Result<_>>()?
        };
        for &i in &todo {
            self.dirty[i] = false;
        }

        let slack = monotonicity_slack(self.reference_total);
        let mut changed = 0;
        let mut delta = vec![0.0; n];
        for u in results.into_iter().flatten() {
            let p = grid.position(u.index);
            if self.check_descent {
                self.stats.max_increase = self.stats.max_increase.max(u.increase);
                if u.increase > slack {
                    self.stats.violations += 1;
                }
                debug_assert!(
                    u.increase <= slack,
                    "needle update at {p:?} increased the objective by {:e}",
                    u.increase
                );
            }
            dict.synthesize(&u.needle, &mut delta);
            dict.synthesize_add(self.needles.get(p), -1.0, &mut delta);
            place_scaled_patch(&mut self.img.reconstruction, &delta, 1.0, p, side)?;
            match &self.img.mask {
                None => place_scaled_patch(&mut self.img.residual, &delta, -1.0, p, side)?,
                Some(m) => {
                    let mut masked = vec![0.0; n];
                    extract_patch_into(m.view(), p, side, &mut masked)?;
                    masked.iter_mut().zip(&delta).for_each(|(a, d)| *a *= d);
                    place_scaled_patch(&mut self.img.residual, &masked, -1.0, p, side)?;
                }
            }
            self.needles.set(p, u.needle);
            self.mark_neighbors_dirty(p, side);
            changed += 1;
        }
        self.stats.updates += changed;
        Ok(changed)
    }

    fn mark_neighbors_dirty(&mut self, p: Position, side: usize) {
        let grid = self.grid();
        let r0 = p.row.saturating_sub(side - 1);
        let r1 = (p.row + side - 1).min(grid.rows - 1);
        let c0 = p.col.saturating_sub(side - 1);
        let c1 = (p.col + side - 1).min(grid.cols - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if r != p.row || c != p.col {
                    self.dirty[grid.index(Position::new(r, c))] = true;
                }
            }
        }
    }

    /// End-of-epoch bookkeeping: periodic refresh and the epoch-level descent
    /// check. Returns the new report.
    pub fn finish_epoch(
        &mut self,
        dict: &LocalDictionary,
        lambda: f64,
        epoch: usize,
        previous_total: f64,
        check_epoch: bool,
    ) -> Result<ObjectiveReport> {
        if epoch.is_multiple_of(REFRESH_EVERY) {
            self.refresh(dict)?;
        }
        let report = self.report(lambda);
        if check_epoch
            && self.check_descent
            && report.total > previous_total + monotonicity_slack(previous_total)
        {
            self.stats.epoch_violations += 1;
        }
        self.reference_total = report.total;
        Ok(report)
    }
}

enum Order<'s> {
    Sequential,
    Layered(&'s LayerSchedule),
}

fn run(
    img: &mut WorkImage,
    dict: &LocalDictionary,
    needles: NeedleField,
    order: Order,
    cfg: &PursuitConfig,
) -> Result<PursuitOutcome> {
    cfg.validate()?;
    let solver = LocalSolver::new(dict, cfg.lasso())?;
    let start = Instant::now();
    let mut engine = Engine::new(img, needles, dict, &cfg.lasso())?;
    let grid = engine.grid();
    if let Order::Layered(schedule) = &order {
        if schedule.grid() != grid || schedule.side() != dict.side() {
            return Err(CscError::Dimension(
                "layer schedule does not match the image and dictionary".into(),
            ));
        }
    }

    let mut trace = vec![engine.report(cfg.lambda)];
    for epoch in 1..=cfg.max_epochs {
        let mut changed = 0;
        match &order {
            Order::Sequential => {
                for p in grid.iter() {
                    changed += engine.update_positions(&solver, &[p], false)?;
                }
            }
            Order::Layered(schedule) => {
                for layer in schedule.layers() {
                    changed += engine.update_positions(&solver, layer, cfg.parallel)?;
                }
            }
        }
        let previous = trace.last().unwrap().total;
        let report = engine
            .finish_epoch(dict, cfg.lambda, epoch, previous, true)?
            .at(epoch, start.elapsed().as_secs_f64());
        trace.push(report);
        if cfg.log_every > 0 && epoch % cfg.log_every == 0 {
            log::info!(
                "epoch {epoch}: objective {:.6e} (data {:.6e}, l1 {:.6e}, nnz {})",
                report.total,
                report.data_term,
                report.l1_term,
                report.nnz
            );
        }
        let decrease = (previous - report.total) / previous.abs().max(f64::MIN_POSITIVE);
        if changed == 0 || decrease < cfg.rel_obj_tol {
            break;
        }
    }
    let stats = engine.stats;
    Ok(PursuitOutcome {
        needles: engine.needles,
        trace,
        stats,
    })
}

/// Needle-by-needle pursuit in row-major position order.
pub fn pursue_sequential(
    img: &mut WorkImage,
    dict: &LocalDictionary,
    needles: NeedleField,
    cfg: &PursuitConfig,
) -> Result<PursuitOutcome> {
    if img.is_masked() {
        return Err(CscError::Config(
            "sequential pursuit expects an unmasked image; use pursue_masked".into(),
        ));
    }
    run(img, dict, needles, Order::Sequential, cfg)
}

/// Layer-by-layer pursuit; needles of a layer are solved concurrently when
/// `cfg.parallel` is set. The result does not depend on the worker count.
pub fn pursue_layered(
    img: &mut WorkImage,
    dict: &LocalDictionary,
    needles: NeedleField,
    schedule: &LayerSchedule,
    cfg: &PursuitConfig,
) -> Result<PursuitOutcome> {
    if img.is_masked() {
        return Err(CscError::Config(
            "layered pursuit expects an unmasked image; use pursue_masked".into(),
        ));
    }
    run(img, dict, needles, Order::Layered(schedule), cfg)
}

/// Layered pursuit of the masked objective `½‖Y − A Σ P_iᵀ D α_i‖² + λΣ‖α_i‖₁`.
pub fn pursue_masked(
    img: &mut WorkImage,
    dict: &LocalDictionary,
    needles: NeedleField,
    schedule: &LayerSchedule,
    cfg: &PursuitConfig,
) -> Result<PursuitOutcome> {
    if !img.is_masked() {
        return Err(CscError::Config(
            "masked pursuit needs an image mask".into(),
        ));
    }
    run(img, dict, needles, Order::Layered(schedule), cfg)
}
