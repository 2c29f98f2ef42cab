//! Multi-focus fusion through a base/edge split of every source.
//!
//! Each source is split into a smooth base (gradient-penalized) and an edge
//! part coded by convolutional sparse coding. The fused edge code takes, per
//! needle position, the whole needle of the source with the largest smoothed
//! activity; the fused base uses the same choice per pixel.

use ndarray::{Array2, ArrayView2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::layers::{build_layers, Position};
use crate::needles::{reconstruct, NeedleField};
use crate::plane::{box_filter, crop_plane, pad_width, Plane};
use crate::pursuit::{pursue_masked, DescentStats, PursuitConfig};
use crate::work::WorkImage;

/// How the fused base is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseRule {
    /// Per pixel, the base of the source with the largest activity.
    #[default]
    Argmax,
    /// Plain average of all bases.
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub pursuit: PursuitConfig,
    /// Weight of the base smoothness penalty.
    pub mu: f64,
    /// Side of the uniform kernel that smooths the activity maps.
    pub smooth: usize,
    /// Pursuit / base-update alternations per source.
    pub iters: usize,
    pub base_rule: BaseRule,
}

impl FusionConfig {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            pursuit: PursuitConfig::new(lambda),
            mu,
            smooth: 9,
            iters: 3,
            base_rule: BaseRule::Argmax,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pursuit.validate()?;
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(CscError::Config(format!(
                "mu must be finite and >= 0, got {}",
                self.mu
            )));
        }
        if self.smooth == 0 {
            return Err(CscError::Config(
                "smoothing kernel side must be at least 1".into(),
            ));
        }
        if self.iters == 0 {
            return Err(CscError::Config("need at least one alternation".into()));
        }
        Ok(())
    }
}

/// `x + μ (G_xᵀG_x + G_yᵀG_y) x`, with forward differences taken on the
/// zero-padded image (so the outermost differences see a zero neighbor).
fn apply_base_operator(x: &Plane, mu: f64, out: &mut Plane) {
    let (h, w) = x.dim();
    for r in 0..h {
        for c in 0..w {
            let v = x[[r, c]];
            let mut lap = 4.0 * v;
            if r > 0 {
                lap -= x[[r - 1, c]];
            }
            if r + 1 < h {
                lap -= x[[r + 1, c]];
            }
            if c > 0 {
                lap -= x[[r, c - 1]];
            }
            if c + 1 < w {
                lap -= x[[r, c + 1]];
            }
            out[[r, c]] = v + mu * lap;
        }
    }
}

/// `‖G_x x‖² + ‖G_y x‖²` under the same boundary convention.
pub fn gradient_energy(x: ArrayView2<f64>) -> f64 {
    let (h, w) = x.dim();
    let at = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            x[[r as usize, c as usize]]
        }
    };
    let mut e = 0.0;
    for r in -1..h as isize {
        for c in -1..w as isize {
            if r >= 0 {
                let d = at(r, c + 1) - at(r, c);
                e += d * d;
            }
            if c >= 0 {
                let d = at(r + 1, c) - at(r, c);
                e += d * d;
            }
        }
    }
    e
}

const CG_REL_TOL: f64 = 1e-12;

/// Solves `(I + μ(G_xᵀG_x + G_yᵀG_y)) Y_b = target` by conjugate gradients.
pub fn solve_base(target: ArrayView2<f64>, mu: f64) -> Result<Plane> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(CscError::Config(format!(
            "mu must be finite and >= 0, got {mu}"
        )));
    }
    let b = target.to_owned();
    if mu == 0.0 {
        return Ok(b);
    }
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok(b);
    }
    let tol = CG_REL_TOL * norm_b;
    let mut x = b.clone();
    let mut ap = Plane::zeros(b.dim());
    apply_base_operator(&x, mu, &mut ap);
    let mut r = &b - &ap;
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = 10 * b.len() + 100;
    for _ in 0..max_iter {
        if rr.sqrt() <= tol {
            return Ok(x);
        }
        apply_base_operator(&p, mu, &mut ap);
        let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
        let alpha = rr / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        Zip::from(&mut p)
            .and(&r)
            .for_each(|p, &r| *p = r + beta * *p);
    }
    // The recursive residual can drift; confirm with the true one.
    apply_base_operator(&x, mu, &mut ap);
    let true_res = (&b - &ap).iter().map(|v| v * v).sum::<f64>().sqrt();
    if true_res <= 1e-8 * norm_b {
        Ok(x)
    } else {
        Err(CscError::Convergence("base solve"))
    }
}

/// `½‖Y − crop(DΓ) − Y_b‖² + λ‖Γ‖₁ + ½μ(‖G_x Y_b‖² + ‖G_y Y_b‖²)`.
pub fn base_edge_objective(
    src: ArrayView2<f64>,
    base: ArrayView2<f64>,
    needles: &NeedleField,
    dict: &LocalDictionary,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    let edge = crop_plane(reconstruct(needles, dict)?.view(), dict.side())?;
    if edge.dim() != src.dim() || base.dim() != src.dim() {
        return Err(CscError::Dimension(
            "source, base and needles disagree".into(),
        ));
    }
    let mut data = 0.0;
    Zip::from(&src)
        .and(&base)
        .and(&edge)
        .for_each(|&y, &b, &e| {
            let r = y - b - e;
            data += r * r;
        });
    Ok(0.5 * data + lambda * needles.l1() + 0.5 * mu * gradient_energy(base))
}

#[derive(Debug, Clone)]
pub struct BaseEdge {
    pub base: Plane,
    pub needles: NeedleField,
    /// Combined objective after the initial base solve and after every
    /// alternation.
    pub trace: Vec<f64>,
    pub stats: DescentStats,
}

/// Alternates edge pursuit on `src − base` with the closed-form base update.
///
/// The edge pursuit runs on the padded image with the padding unobserved, so
/// only the source pixels enter the data term. Needles start from zero and
/// are warm-started across alternations.
pub fn decompose_base_edge(
    src: ArrayView2<f64>,
    dict: &LocalDictionary,
    cfg: &FusionConfig,
) -> Result<BaseEdge> {
    cfg.validate()?;
    let side = dict.side();
    let lambda = cfg.pursuit.lambda;
    let ones = Plane::ones(src.dim());
    let mut base = solve_base(src, cfg.mu)?;
    let padded = (
        src.nrows() + 2 * pad_width(side),
        src.ncols() + 2 * pad_width(side),
    );
    let mut needles = NeedleField::zeros_for(padded, dict)?;
    let schedule = build_layers(padded.0, padded.1, side)?;
    let mut trace = vec![base_edge_objective(
        src,
        base.view(),
        &needles,
        dict,
        lambda,
        cfg.mu,
    )?];
    let mut stats = DescentStats::default();
    for _ in 0..cfg.iters {
        let detail = &src - &base;
        let mut work = WorkImage::pad_masked(detail.view(), ones.view(), side)?;
        let out = pursue_masked(&mut work, dict, needles, &schedule, &cfg.pursuit)?;
        stats.merge(&out.stats);
        needles = out.needles;
        let edge = crop_plane(reconstruct(&needles, dict)?.view(), side)?;
        base = solve_base((&src - &edge).view(), cfg.mu)?;
        trace.push(base_edge_objective(
            src,
            base.view(),
            &needles,
            dict,
            lambda,
            cfg.mu,
        )?);
    }
    Ok(BaseEdge {
        base,
        needles,
        trace,
        stats,
    })
}

/// Per-position `Σ_l |α_l|`, smoothed by an `s × s` uniform kernel with
/// weights `1/s²` and zero padding. The map lives on the needle grid.
pub fn activity_map(needles: &NeedleField, smooth: usize) -> Result<Plane> {
    if smooth == 0 {
        return Err(CscError::Config(
            "smoothing kernel side must be at least 1".into(),
        ));
    }
    let grid = needles.grid();
    let raw = Plane::from_shape_fn((grid.rows, grid.cols), |(r, c)| {
        needles.get(Position::new(r, c)).l1()
    });
    if smooth == 1 {
        return Ok(raw);
    }
    Ok(box_filter(raw.view(), smooth))
}

/// A decomposed source.
#[derive(Debug, Clone)]
pub struct SourceState {
    pub base: Plane,
    pub needles: NeedleField,
    pub activity: Plane,
    pub trace: Vec<f64>,
    pub stats: DescentStats,
}

/// All sources decomposed against one dictionary.
#[derive(Debug, Clone)]
pub struct FusionState {
    pub sources: Vec<SourceState>,
    pub dict: LocalDictionary,
    pub lambda: f64,
    pub mu: f64,
    pub smooth: usize,
}

impl FusionState {
    /// Decomposes every source (concurrently) and builds its activity map.
    pub fn decompose(
        sources: &[Plane],
        dict: &LocalDictionary,
        cfg: &FusionConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let Some(first) = sources.first() else {
            return Err(CscError::Config("no sources to fuse".into()));
        };
        if sources.iter().any(|s| s.dim() != first.dim()) {
            return Err(CscError::Dimension("fusion sources differ in size".into()));
        }
        let states = sources
            .par_iter()
            .map(|src| {
                let be = decompose_base_edge(src.view(), dict, cfg)?;
                let activity = activity_map(&be.needles, cfg.smooth)?;
                Ok(SourceState {
                    base: be.base,
                    needles: be.needles,
                    activity,
                    trace: be.trace,
                    stats: be.stats,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sources: states,
            dict: dict.clone(),
            lambda: cfg.pursuit.lambda,
            mu: cfg.mu,
            smooth: cfg.smooth,
        })
    }

    /// Index of the most active source per needle position; ties go to the
    /// lowest index.
    pub fn choice(&self) -> Array2<usize> {
        let dim = self.sources[0].activity.dim();
        Array2::from_shape_fn(dim, |idx| {
            let mut best = 0;
            for (k, s) in self.sources.iter().enumerate().skip(1) {
                if s.activity[idx] > self.sources[best].activity[idx] {
                    best = k;
                }
            }
            best
        })
    }

    pub fn assemble(&self, rule: BaseRule) -> Result<FusedParts> {
        let choice = self.choice();
        let side = self.dict.side();
        let first = &self.sources[0];
        let mut needles = NeedleField::zeros_for(first.needles.shape(), &self.dict)?;
        for p in needles.grid().iter() {
            let k = choice[[p.row, p.col]];
            needles.set(p, self.sources[k].needles.get(p).clone());
        }
        let (h, w) = first.base.dim();
        let base = match rule {
            BaseRule::Average => {
                let mut acc = Plane::zeros((h, w));
                for s in &self.sources {
                    acc += &s.base;
                }
                acc / self.sources.len() as f64
            }
            BaseRule::Argmax => {
                // Pixel (y, x) follows the needle whose patch is centered on it.
                let shift = pad_width(side) - (side - 1) / 2;
                Plane::from_shape_fn((h, w), |(y, x)| {
                    let k = choice[[y + shift, x + shift]];
                    self.sources[k].base[[y, x]]
                })
            }
        };
        let edge = crop_plane(reconstruct(&needles, &self.dict)?.view(), side)?;
        Ok(FusedParts {
            fused: &base + &edge,
            base,
            needles,
            choice,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FusedParts {
    pub fused: Plane,
    pub base: Plane,
    pub needles: NeedleField,
    /// Winning source per needle position.
    pub choice: Array2<usize>,
}

#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub fused: Plane,
    /// `None` when a single source was passed through unchanged.
    pub parts: Option<FusedParts>,
    pub state: Option<FusionState>,
}

/// Fuses registered, equally sized sources.
pub fn fuse(
    sources: &[Plane],
    dict: &LocalDictionary,
    cfg: &FusionConfig,
) -> Result<FusionOutcome> {
    cfg.validate()?;
    match sources {
        [] => Err(CscError::Config("no sources to fuse".into())),
        [only] => {
            log::warn!("fusion called with a single source; returning it unchanged");
            Ok(FusionOutcome {
                fused: only.clone(),
                parts: None,
                state: None,
            })
        }
        _ => {
            let state = FusionState::decompose(sources, dict, cfg)?;
            let parts = state.assemble(cfg.base_rule)?;
            Ok(FusionOutcome {
                fused: parts.fused.clone(),
                parts: Some(parts),
                state: Some(state),
            })
        }
    }
}
