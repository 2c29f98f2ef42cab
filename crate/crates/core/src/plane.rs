//! 2-D planes and the patch operators.
//!
//! Patches are vectorized row-major: entry `r * side + c` of a patch vector is
//! the pixel at `(pos.row + r, pos.col + c)`.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{CscError, Result};
use crate::layers::Position;

pub type Plane = Array2<f64>;

fn check_position(shape: (usize, usize), pos: Position, side: usize) -> Result<()> {
    let (h, w) = shape;
    if side == 0 || pos.row + side > h || pos.col + side > w {
        return Err(CscError::Position {
            row: pos.row,
            col: pos.col,
            height: h,
            width: w,
            side,
        });
    }
    Ok(())
}

/// Returns the `side x side` window at `pos` as a vector (the operator `P_i`).
pub fn extract_patch(plane: ArrayView2<f64>, pos: Position, side: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; side * side];
    extract_patch_into(plane, pos, side, &mut out)?;
    Ok(out)
}

pub fn extract_patch_into(
    plane: ArrayView2<f64>,
    pos: Position,
    side: usize,
    out: &mut [f64],
) -> Result<()> {
    check_position(plane.dim(), pos, side)?;
    debug_assert_eq!(out.len(), side * side);
    let window = plane.slice(s![pos.row..pos.row + side, pos.col..pos.col + side]);
    for (o, v) in out.iter_mut().zip(window.iter()) {
        *o = *v;
    }
    Ok(())
}

/// `plane += P_iᵀ v`: adds the patch vector into the window at `pos`.
pub fn place_add_patch(plane: &mut Plane, v: &[f64], pos: Position, side: usize) -> Result<()> {
    place_scaled_patch(plane, v, 1.0, pos, side)
}

/// `plane += scale · P_iᵀ v`.
pub fn place_scaled_patch(
    plane: &mut Plane,
    v: &[f64],
    scale: f64,
    pos: Position,
    side: usize,
) -> Result<()> {
    check_position(plane.dim(), pos, side)?;
    if v.len() != side * side {
        return Err(CscError::Dimension(format!(
            "patch vector has {} entries, expected {}",
            v.len(),
            side * side
        )));
    }
    let mut window = plane.slice_mut(s![pos.row..pos.row + side, pos.col..pos.col + side]);
    for (p, x) in window.iter_mut().zip(v) {
        *p += scale * x;
    }
    Ok(())
}

/// Border width used on each side of an image for a given filter side.
pub fn pad_width(side: usize) -> usize {
    side.saturating_sub(1)
}

/// Zero-pads every border by `side - 1` pixels.
pub fn pad_plane(raw: ArrayView2<f64>, side: usize) -> Plane {
    let p = pad_width(side);
    let (h, w) = raw.dim();
    let mut out = Plane::zeros((h + 2 * p, w + 2 * p));
    out.slice_mut(s![p..p + h, p..p + w]).assign(&raw);
    out
}

/// Removes the border added by [`pad_plane`].
pub fn crop_plane(padded: ArrayView2<f64>, side: usize) -> Result<Plane> {
    let p = pad_width(side);
    let (h, w) = padded.dim();
    if h < 2 * p || w < 2 * p {
        return Err(CscError::Dimension(format!(
            "{h}x{w} plane is smaller than its {p}-pixel border"
        )));
    }
    Ok(padded.slice(s![p..h - p, p..w - p]).to_owned())
}

/// Offsets `(before, after)` of a uniform window of the given size around its
/// anchor pixel. Odd sizes are centered; even sizes extend one pixel further
/// after the anchor.
pub fn window_extent(size: usize) -> (usize, usize) {
    let before = (size - 1) / 2;
    (before, size - 1 - before)
}

/// Same-size box filter with a fixed `1/size²` weight and zero padding.
pub fn box_filter(plane: ArrayView2<f64>, size: usize) -> Plane {
    let (h, w) = plane.dim();
    let (before, after) = window_extent(size);
    let weight = 1.0 / (size * size) as f64;
    let mut out = Plane::zeros((h, w));
    for r in 0..h {
        let r0 = r.saturating_sub(before);
        let r1 = (r + after).min(h - 1);
        for c in 0..w {
            let c0 = c.saturating_sub(before);
            let c1 = (c + after).min(w - 1);
            let sum: f64 = plane.slice(s![r0..=r1, c0..=c1]).sum();
            out[[r, c]] = sum * weight;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_patch() {
        let img = Plane::ones((3, 3));
        let p = extract_patch(img.view(), Position::new(0, 0), 2).unwrap();
        assert_eq!(p, vec![1.0; 4]);
    }

    #[test]
    fn out_of_range_is_positional_error() {
        let img = Plane::zeros((3, 3));
        let err = extract_patch(img.view(), Position::new(2, 0), 2).unwrap_err();
        assert!(matches!(err, CscError::Position { row: 2, .. }));
        let mut img = img;
        assert!(place_add_patch(&mut img, &[0.0; 4], Position::new(0, 2), 2).is_err());
    }

    #[test]
    fn overlapping_placements_sum() {
        let mut img = Plane::zeros((2, 3));
        place_add_patch(&mut img, &[1.0; 4], Position::new(0, 0), 2).unwrap();
        place_add_patch(&mut img, &[1.0; 4], Position::new(0, 1), 2).unwrap();
        assert_eq!(img[[0, 1]], 2.0);
        assert_eq!(img[[1, 1]], 2.0);
        assert_eq!(img[[0, 0]], 1.0);
        assert_eq!(img[[1, 2]], 1.0);
    }

    #[test]
    fn place_then_extract_is_identity() {
        let v: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 2.0).collect();
        let mut img = Plane::zeros((6, 5));
        let pos = Position::new(2, 1);
        place_add_patch(&mut img, &v, pos, 3).unwrap();
        assert_eq!(extract_patch(img.view(), pos, 3).unwrap(), v);
    }

    #[test]
    fn add_then_subtract_restores() {
        let mut img = Plane::from_shape_fn((5, 5), |(r, c)| (r * 5 + c) as f64 / 7.0);
        let orig = img.clone();
        let v = [0.3, -1.25, 4.5, 0.001];
        place_add_patch(&mut img, &v, Position::new(1, 3), 2).unwrap();
        place_scaled_patch(&mut img, &v, -1.0, Position::new(1, 3), 2).unwrap();
        for (a, b) in img.iter().zip(orig.iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn disjoint_placements_commute() {
        let base = Plane::from_shape_fn((6, 6), |(r, c)| ((r * 31 + c * 17) % 11) as f64 * 0.1);
        let a = [1.1, 2.2, 3.3, 4.4];
        let b = [-0.5, 0.25, 9.0, 1e-3];
        let mut x = base.clone();
        place_add_patch(&mut x, &a, Position::new(0, 0), 2).unwrap();
        place_add_patch(&mut x, &b, Position::new(2, 2), 2).unwrap();
        let mut y = base;
        place_add_patch(&mut y, &b, Position::new(2, 2), 2).unwrap();
        place_add_patch(&mut y, &a, Position::new(0, 0), 2).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn pad_and_crop() {
        let raw = Plane::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f64);
        let padded = pad_plane(raw.view(), 8);
        assert_eq!(padded.dim(), (18, 18));
        assert_eq!(crop_plane(padded.view(), 8).unwrap(), raw);
        assert_eq!(pad_plane(raw.view(), 1), raw);
    }

    #[test]
    fn box_filter_impulse() {
        let mut img = Plane::zeros((5, 5));
        img[[2, 2]] = 9.0;
        let out = box_filter(img.view(), 3);
        for r in 0..5 {
            for c in 0..5 {
                let inside = (1..=3).contains(&r) && (1..=3).contains(&c);
                assert_eq!(out[[r, c]], if inside { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(box_filter(img.view(), 1), img);
    }
}
