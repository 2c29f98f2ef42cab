//! Needle positions and their partition into non-overlapping layers.
//!
//! A needle sits at every position where a `side x side` patch fits inside the
//! (padded) image. Two needles whose top-left corners share the same residue
//! modulo `side` in both coordinates can never touch the same pixel, so the
//! `side²` residue classes form the layers.

use serde::{Deserialize, Serialize};

use crate::error::{CscError, Result};

/// Top-left corner of a patch, in padded-image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// The grid of valid needle positions for a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositionGrid {
    pub rows: usize,
    pub cols: usize,
}

impl PositionGrid {
    pub fn new(height: usize, width: usize, side: usize) -> Result<Self> {
        if side == 0 {
            return Err(CscError::Config("filter side must be at least 1".into()));
        }
        if height < side || width < side {
            return Err(CscError::Config(format!(
                "a {height}x{width} image cannot hold a {side}x{side} patch"
            )));
        }
        Ok(Self {
            rows: height - side + 1,
            cols: width - side + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index of a position.
    #[inline]
    pub fn index(&self, p: Position) -> usize {
        p.row * self.cols + p.col
    }

    #[inline]
    pub fn position(&self, index: usize) -> Position {
        Position::new(index / self.cols, index % self.cols)
    }

    pub fn contains(&self, p: Position) -> bool {
        p.row < self.rows && p.col < self.cols
    }

    /// Every position in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Position::new(r, c)))
    }
}

/// Partition of all needle positions into `side²` layers whose patch
/// footprints are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSchedule {
    side: usize,
    grid: PositionGrid,
    layers: Vec<Vec<Position>>,
}

impl LayerSchedule {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn grid(&self) -> PositionGrid {
        self.grid
    }

    pub fn layers(&self) -> &[Vec<Position>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, j: usize) -> &[Position] {
        &self.layers[j]
    }
}

/// Builds the residue-class layers, ordered `(0,0), (0,1), …, (side-1, side-1)`.
///
/// Layers are always `side²` in number. On small images some residue classes
/// may hold no position at all; they are kept as empty layers.
pub fn build_layers(height: usize, width: usize, side: usize) -> Result<LayerSchedule> {
    let grid = PositionGrid::new(height, width, side)?;
    let mut layers = vec![Vec::new(); side * side];
    for p in grid.iter() {
        layers[(p.row % side) * side + p.col % side].push(p);
    }
    Ok(LayerSchedule { side, grid, layers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_four_side_two() {
        let s = build_layers(4, 4, 2).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(
            s.layer(0),
            &[
                Position::new(0, 0),
                Position::new(0, 2),
                Position::new(2, 0),
                Position::new(2, 2)
            ]
        );
    }

    #[test]
    fn side_one_is_single_layer() {
        let s = build_layers(5, 3, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.layer(0).len(), 15);
    }

    #[test]
    fn too_small_image_is_config_error() {
        assert!(matches!(build_layers(2, 5, 3), Err(CscError::Config(_))));
        assert!(matches!(build_layers(5, 5, 0), Err(CscError::Config(_))));
    }

    #[test]
    fn grid_index_round_trip() {
        let g = PositionGrid::new(9, 7, 3).unwrap();
        for (i, p) in g.iter().enumerate() {
            assert_eq!(g.index(p), i);
            assert_eq!(g.position(i), p);
        }
    }
}
