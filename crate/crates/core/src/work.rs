//! Padded working images and the global objective.

use ndarray::{ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::needles::{reconstruct, NeedleField};
use crate::plane::{crop_plane, pad_plane, pad_width, Plane};

/// A padded signal together with its running reconstruction and residual.
///
/// Unmasked: `residual = original - reconstruction`.
/// Masked: `residual = original - mask ⊙ reconstruction`, where `original`
/// is zero wherever the mask is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkImage {
    pub original: Plane,
    pub reconstruction: Plane,
    pub residual: Plane,
    pub mask: Option<Plane>,
    side: usize,
}

impl WorkImage {
    /// Zero-pads a raw image for filters of the given side.
    pub fn pad(raw: ArrayView2<f64>, side: usize) -> Result<Self> {
        Self::from_padded(pad_plane(raw, side), None, side)
    }

    /// Zero-pads a raw image and its binary mask. The padded border is
    /// unobserved, and observed-pixel values outside the mask are zeroed.
    pub fn pad_masked(raw: ArrayView2<f64>, mask: ArrayView2<f64>, side: usize) -> Result<Self> {
        if raw.dim() != mask.dim() {
            return Err(CscError::Dimension(format!(
                "image is {:?} but mask is {:?}",
                raw.dim(),
                mask.dim()
            )));
        }
        Self::from_padded(pad_plane(raw, side), Some(pad_plane(mask, side)), side)
    }

    /// Wraps an already padded plane. A zero reconstruction is assumed.
    pub fn from_padded(mut original: Plane, mask: Option<Plane>, side: usize) -> Result<Self> {
        if original.iter().any(|v| !v.is_finite()) {
            return Err(CscError::Numeric("image"));
        }
        if let Some(m) = &mask {
            if m.dim() != original.dim() {
                return Err(CscError::Dimension("mask shape differs from image".into()));
            }
            if m.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(CscError::Config("mask entries must be 0 or 1".into()));
            }
            Zip::from(&mut original).and(m).for_each(|x, &a| *x *= a);
        }
        let (h, w) = original.dim();
        if h < side || w < side || side == 0 {
            return Err(CscError::Config(format!(
                "a {h}x{w} plane cannot hold a {side}x{side} patch"
            )));
        }
        let residual = original.clone();
        Ok(Self {
            reconstruction: Plane::zeros((h, w)),
            residual,
            original,
            mask,
            side,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pad_width(&self) -> usize {
        pad_width(self.side)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.original.dim()
    }

    pub fn is_masked(&self) -> bool {
        self.mask.is_some()
    }

    /// Recomputes reconstruction and residual from scratch.
    pub fn refresh(&mut self, needles: &NeedleField, dict: &LocalDictionary) -> Result<()> {
        if needles.shape() != self.shape() {
            return Err(CscError::Dimension(
                "needle field does not match image".into(),
            ));
        }
        self.reconstruction = reconstruct(needles, dict)?;
        self.refresh_residual();
        Ok(())
    }

    /// Recomputes the residual from the current reconstruction.
    pub fn refresh_residual(&mut self) {
        match &self.mask {
            None => Zip::from(&mut self.residual)
                .and(&self.original)
                .and(&self.reconstruction)
                .for_each(|r, &x, &xh| *r = x - xh),
            Some(m) => Zip::from(&mut self.residual)
                .and(&self.original)
                .and(&self.reconstruction)
                .and(m)
                .for_each(|r, &x, &xh, &a| *r = x - a * xh),
        }
    }

    /// `max |original - mask ⊙ reconstruction - residual|`.
    pub fn consistency_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((idx, &x), &xh) in self.original.indexed_iter().zip(self.reconstruction.iter()) {
            let a = self.mask.as_ref().map_or(1.0, |m| m[idx]);
            worst = worst.max((x - a * xh - self.residual[idx]).abs());
        }
        worst
    }

    /// The reconstruction with the padding removed.
    pub fn cropped_reconstruction(&self) -> Result<Plane> {
        crop_plane(self.reconstruction.view(), self.side)
    }
}

/// Value of the convolutional lasso objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub epoch: usize,
    pub data_term: f64,
    pub l1_term: f64,
    pub total: f64,
    pub nnz: usize,
    pub wall_time: f64,
}

impl ObjectiveReport {
    pub fn new(data_term: f64, l1_term: f64, nnz: usize) -> Self {
        Self {
            epoch: 0,
            data_term,
            l1_term,
            total: data_term + l1_term,
            nnz,
            wall_time: 0.0,
        }
    }

    /// Sum of several reports (e.g. one per training image).
    pub fn sum<'a>(reports: impl IntoIterator<Item = &'a ObjectiveReport>) -> Self {
        let mut out = Self::new(0.0, 0.0, 0);
        for r in reports {
            out.data_term += r.data_term;
            out.l1_term += r.l1_term;
            out.nnz += r.nnz;
        }
        out.total = out.data_term + out.l1_term;
        out
    }

    pub fn at(mut self, epoch: usize, wall_time: f64) -> Self {
        self.epoch = epoch;
        self.wall_time = wall_time;
        self
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CscError::Config(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Evaluates `½‖A(X − Σ P_iᵀ D_L α_i)‖² + λ Σ‖α_i‖₁` from scratch on the
/// padded domain (`A = I` when the image carries no mask).
pub fn objective(
    img: &WorkImage,
    needles: &NeedleField,
    dict: &LocalDictionary,
    lambda: f64,
) -> Result<ObjectiveReport> {
    check_lambda(lambda)?;
    if needles.shape() != img.shape() {
        return Err(CscError::Dimension(
            "needle field does not match image".into(),
        ));
    }
    let xh = reconstruct(needles, dict)?;
    let mut data = 0.0;
    for ((idx, &x), &v) in img.original.indexed_iter().zip(xh.iter()) {
        let a = img.mask.as_ref().map_or(1.0, |m| m[idx]);
        let r = x - a * v;
        data += r * r;
    }
    Ok(ObjectiveReport::new(
        0.5 * data,
        lambda * needles.l1(),
        needles.nnz(),
    ))
}

/// Objective from a maintained residual (cheaper than [`objective`]).
pub(crate) fn objective_from_residual(
    residual: &Plane,
    needles: &NeedleField,
    lambda: f64,
) -> ObjectiveReport {
    let data = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
    ObjectiveReport::new(data, lambda * needles.l1(), needles.nnz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Position;
    use crate::needles::Needle;

    #[test]
    fn zero_needles_give_half_energy() {
        let raw = Plane::from_shape_fn((3, 3), |(r, c)| (r + 2 * c) as f64);
        let img = WorkImage::pad(raw.view(), 2).unwrap();
        let d = LocalDictionary::from_columns(2, &[vec![0.5; 4]]).unwrap();
        let f = NeedleField::zeros_for(img.shape(), &d).unwrap();
        let rep = objective(&img, &f, &d, 3.0).unwrap();
        let energy: f64 = raw.iter().map(|v| v * v).sum();
        assert_eq!(rep.data_term, 0.5 * energy);
        assert_eq!(rep.l1_term, 0.0);
        assert_eq!(rep.total, rep.data_term + rep.l1_term);
    }

    #[test]
    fn perfect_reconstruction_with_zero_lambda() {
        let d = LocalDictionary::from_columns(2, &[vec![0.5; 4]]).unwrap();
        let mut f = NeedleField::zeros(4, 4, 2, 1).unwrap();
        f.set(Position::new(1, 1), Needle::from_dense(&[2.0]));
        let x = reconstruct(&f, &d).unwrap();
        let mut img = WorkImage::from_padded(x, None, 2).unwrap();
        assert_eq!(objective(&img, &f, &d, 0.0).unwrap().total, 0.0);
        img.refresh(&f, &d).unwrap();
        assert_eq!(img.consistency_error(), 0.0);
    }

    #[test]
    fn negative_lambda_rejected() {
        let d = LocalDictionary::from_columns(1, &[vec![1.0]]).unwrap();
        let img = WorkImage::from_padded(Plane::zeros((2, 2)), None, 1).unwrap();
        let f = NeedleField::zeros_for(img.shape(), &d).unwrap();
        assert!(matches!(
            objective(&img, &f, &d, -1.0),
            Err(CscError::Config(_))
        ));
    }

    #[test]
    fn masked_pad_marks_border_unobserved() {
        let raw = Plane::from_elem((2, 2), 5.0);
        let mask = Plane::from_shape_vec((2, 2), vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let img = WorkImage::pad_masked(raw.view(), mask.view(), 2).unwrap();
        let m = img.mask.as_ref().unwrap();
        assert_eq!(m.sum(), 3.0);
        assert_eq!(img.original[[1, 2]], 0.0);
        assert_eq!(img.original[[1, 1]], 5.0);
        assert!(WorkImage::pad_masked(raw.view(), Plane::ones((3, 2)).view(), 2).is_err());
    }
}
