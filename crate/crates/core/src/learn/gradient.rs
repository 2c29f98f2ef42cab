use ndarray::{Array2, ShapeBuilder};

use crate::error::{CscError, Result};
use crate::layers::Position;
use crate::needles::NeedleField;
use crate::plane::{extract_patch_into, Plane};

/// Gradient of the data term with respect to the local dictionary, shaped
/// `n x m` in column-major memory order (matching [`crate::LocalDictionary`]).
pub type DictGradient = Array2<f64>;

pub fn zero_gradient(n: usize, m: usize) -> DictGradient {
    Array2::zeros((n, m).f())
}

/// `−Σ_i P_i(residual) α_iᵀ` over `positions` (all positions when `None`).
///
/// `residual` must be `X − X̂` for the current needles.
pub fn dict_gradient(
    residual: &Plane,
    needles: &NeedleField,
    positions: Option<&[Position]>,
) -> Result<DictGradient> {
    accumulate(residual, None, needles, positions)
}

/// `−Σ_i P_i Aᵀ(residual) α_iᵀ` where `residual = Y − A X̂`.
pub fn dict_gradient_masked(
    residual: &Plane,
    mask: &Plane,
    needles: &NeedleField,
    positions: Option<&[Position]>,
) -> Result<DictGradient> {
    if mask.dim() != residual.dim() {
        return Err(CscError::Dimension(
            "mask shape differs from residual".into(),
        ));
    }
    accumulate(residual, Some(mask), needles, positions)
}

fn accumulate(
    residual: &Plane,
    mask: Option<&Plane>,
    needles: &NeedleField,
    positions: Option<&[Position]>,
) -> Result<DictGradient> {
    if residual.dim() != needles.shape() {
        return Err(CscError::Dimension(format!(
            "residual is {:?} but needles cover {:?}",
            residual.dim(),
            needles.shape()
        )));
    }
    let side = needles.side();
    let n = side * side;
    let mut grad = zero_gradient(n, needles.num_filters());
    let mut patch = vec![0.0; n];
    let mut patch_mask = vec![0.0; n];
    let mut visit = |p: Position| -> Result<()> {
        let needle = needles.get(p);
        if needle.is_zero() {
            return Ok(());
        }
        extract_patch_into(residual.view(), p, side, &mut patch)?;
        if let Some(m) = mask {
            extract_patch_into(m.view(), p, side, &mut patch_mask)?;
            patch.iter_mut().zip(&patch_mask).for_each(|(r, a)| *r *= a);
        }
        let g = grad
            .as_slice_memory_order_mut()
            .expect("contiguous gradient");
        for &(j, a) in needle.entries() {
            let col = &mut g[j as usize * n..(j as usize + 1) * n];
            for (gi, r) in col.iter_mut().zip(&patch) {
                *gi -= r * a;
            }
        }
        Ok(())
    };
    match positions {
        Some(ps) => {
            let grid = needles.grid();
            for &p in ps {
                if !grid.contains(p) {
                    return Err(CscError::Position {
                        row: p.row,
                        col: p.col,
                        height: needles.height(),
                        width: needles.width(),
                        side,
                    });
                }
                visit(p)?;
            }
        }
        None => {
            for p in needles.grid().iter() {
                visit(p)?;
            }
        }
    }
    Ok(grad)
}

pub fn frobenius(g: &DictGradient) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}
