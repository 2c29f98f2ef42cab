use ndarray::ArrayView2;

use crate::error::{CscError, Result};
use crate::plane::{window_extent, Plane};

/// Splits `img` into `detail + mean`, where `mean` is the local average over a
/// `kernel_side × kernel_side` window.
///
/// Only in-bounds pixels with mask 1 count towards a window; pixels whose
/// window holds none get mean 0. Without a mask every in-bounds pixel counts.
/// Masked pixels of `detail` are set to 0.
pub fn mean_subtract(
    img: ArrayView2<f64>,
    kernel_side: usize,
    mask: Option<ArrayView2<f64>>,
) -> Result<(Plane, Plane)> {
    if kernel_side == 0 {
        return Err(CscError::Config("kernel side must be at least 1".into()));
    }
    let (h, w) = img.dim();
    if let Some(m) = &mask {
        if m.dim() != (h, w) {
            return Err(CscError::Dimension(format!(
                "image is {:?} but mask is {:?}",
                (h, w),
                m.dim()
            )));
        }
    }
    let weight = |r: usize, c: usize| mask.as_ref().map_or(1.0, |m| m[[r, c]]);

    // Separable window sums of masked values and of mask counts.
    let (before, after) = window_extent(kernel_side);
    let mut row_sum = Plane::zeros((h, w));
    let mut row_cnt = Plane::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let c0 = c.saturating_sub(before);
            let c1 = (c + after).min(w - 1);
            let (mut s, mut n) = (0.0, 0.0);
            for cc in c0..=c1 {
                let a = weight(r, cc);
                s += a * img[[r, cc]];
                n += a;
            }
            row_sum[[r, c]] = s;
            row_cnt[[r, c]] = n;
        }
    }
    let mut mean = Plane::zeros((h, w));
    let mut detail = Plane::zeros((h, w));
    for r in 0..h {
        let r0 = r.saturating_sub(before);
        let r1 = (r + after).min(h - 1);
        for c in 0..w {
            let (mut s, mut n) = (0.0, 0.0);
            for rr in r0..=r1 {
                s += row_sum[[rr, c]];
                n += row_cnt[[rr, c]];
            }
            let mu = if n > 0.0 { s / n } else { 0.0 };
            mean[[r, c]] = mu;
            if weight(r, c) != 0.0 {
                detail[[r, c]] = img[[r, c]] - mu;
            }
        }
    }
    Ok((detail, mean))
}

/// `20 log10(255 √N / ‖reference − estimate‖₂)`; identical images give `+∞`.
pub fn psnr(reference: ArrayView2<f64>, estimate: ArrayView2<f64>) -> Result<f64> {
    if reference.dim() != estimate.dim() {
        return Err(CscError::Dimension(format!(
            "reference is {:?} but estimate is {:?}",
            reference.dim(),
            estimate.dim()
        )));
    }
    let err: f64 = reference
        .iter()
        .zip(estimate.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = reference.len() as f64;
    Ok(20.0 * (255.0 * n.sqrt() / err).log10())
}
