use ndarray::ArrayView2;

use crate::apps::metrics::mean_subtract;
use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::layers::build_layers;
use crate::learn::train::{train_stochastic_on, TrainConfig, TrainReport};
use crate::needles::{reconstruct, NeedleField};
use crate::plane::{crop_plane, Plane};
use crate::pursuit::{pursue_masked, DescentStats, PursuitConfig};
use crate::solver::init_needles;
use crate::work::{ObjectiveReport, WorkImage};

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintConfig {
    pub pursuit: PursuitConfig,
    /// Side of the uniform window used for the masked local mean.
    pub mean_kernel: usize,
    /// Adapt the dictionary to the observed pixels before the final pursuit.
    pub train: Option<TrainConfig>,
}

impl InpaintConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            pursuit: PursuitConfig::new(lambda),
            mean_kernel: 8,
            train: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InpaintOutcome {
    pub restored: Plane,
    pub mean: Plane,
    pub needles: NeedleField,
    pub dict: LocalDictionary,
    /// Masked objective of the final pursuit, epoch 0 first.
    pub trace: Vec<ObjectiveReport>,
    pub train_trace: Vec<TrainReport>,
    pub stats: DescentStats,
}

/// Restores the pixels where `mask` is 0.
///
/// The masked local mean is removed, the detail is coded by masked pursuit
/// (optionally after adapting the dictionary on the observed pixels), and the
/// output is the full reconstruction plus the mean. Observed pixels are not
/// copied back.
pub fn inpaint(
    corrupted: ArrayView2<f64>,
    mask: ArrayView2<f64>,
    dict: &LocalDictionary,
    cfg: &InpaintConfig,
) -> Result<InpaintOutcome> {
    if corrupted.dim() != mask.dim() {
        return Err(CscError::Dimension(format!(
            "image is {:?} but mask is {:?}",
            corrupted.dim(),
            mask.dim()
        )));
    }
    if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(CscError::Config("mask entries must be 0 or 1".into()));
    }
    cfg.pursuit.validate()?;
    let (detail, mean) = mean_subtract(corrupted, cfg.mean_kernel, Some(mask))?;
    let side = dict.side();
    let mut work = WorkImage::pad_masked(detail.view(), mask, side)?;
    let mut needles = init_needles(&work, dict, &cfg.pursuit.lasso())?;

    let mut dict = dict.clone();
    let mut train_trace = Vec::new();
    let mut stats = DescentStats::default();
    if let Some(tc) = &cfg.train {
        let mut works = vec![work];
        let out = train_stochastic_on(&mut works, vec![needles], dict, tc)?;
        work = works.pop().expect("one image");
        dict = out.dict;
        needles = out.needles.into_iter().next().expect("one needle field");
        train_trace = out.trace;
        stats.merge(&out.stats);
    }

    let (h, w) = work.shape();
    let schedule = build_layers(h, w, side)?;
    let out = pursue_masked(&mut work, &dict, needles, &schedule, &cfg.pursuit)?;
    stats.merge(&out.stats);
    let full = reconstruct(&out.needles, &dict)?;
    let restored = crop_plane(full.view(), side)? + &mean;
    Ok(InpaintOutcome {
        restored,
        mean,
        needles: out.needles,
        dict,
        trace: out.trace,
        train_trace,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_gives_the_mean() {
        let img = Plane::from_shape_fn((6, 6), |(i, j)| (i + 2 * j) as f64);
        let mask = Plane::zeros((6, 6));
        let d =
            LocalDictionary::from_columns(2, &[vec![0.5; 4], vec![0.5, -0.5, 0.5, -0.5]]).unwrap();
        let out = inpaint(img.view(), mask.view(), &d, &InpaintConfig::new(0.1)).unwrap();
        assert!(out.restored.iter().all(|&v| v == 0.0));
        assert!(out.needles.is_zero());
    }

    #[test]
    fn shape_mismatch() {
        let d = LocalDictionary::from_columns(1, &[vec![1.0]]).unwrap();
        let r = inpaint(
            Plane::zeros((3, 3)).view(),
            Plane::ones((3, 4)).view(),
            &d,
            &InpaintConfig::new(1.0),
        );
        assert!(matches!(r, Err(CscError::Dimension(_))));
    }
}
