//! Sparse needles and the field of all needles of one image.

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::layers::{Position, PositionGrid};
use crate::plane::{place_add_patch, Plane};

/// A sparse coefficient vector of length `m`, stored as `(filter, value)`
/// pairs sorted by filter index. Zeros are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Needle {
    entries: Vec<(u32, f64)>,
}

impl Needle {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a needle from a dense vector, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j as u32, *v))
            .collect();
        Self { entries }
    }

    /// Builds a needle from arbitrary pairs; they are sorted and zeros dropped.
    /// Duplicate indices are summed.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (j, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => entries.push((j, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.entries.iter().map(|e| e.1.abs()).sum()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(j as u32), |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for &(j, v) in &self.entries {
            out[j as usize] = v;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_pairs(self.entries.iter().map(|&(j, v)| (j, v * c)).collect())
    }
}

/// One needle per valid patch position of a `height x width` (padded) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedleField {
    height: usize,
    width: usize,
    side: usize,
    num_filters: usize,
    grid: PositionGrid,
    needles: Vec<Needle>,
}

impl NeedleField {
    pub fn zeros(height: usize, width: usize, side: usize, num_filters: usize) -> Result<Self> {
        let grid = PositionGrid::new(height, width, side)?;
        Ok(Self {
            height,
            width,
            side,
            num_filters,
            grid,
            needles: vec![Needle::zero(); grid.len()],
        })
    }

    /// A zero field sized for `dict` on a plane of the given shape.
    pub fn zeros_for(shape: (usize, usize), dict: &LocalDictionary) -> Result<Self> {
        Self::zeros(shape.0, shape.1, dict.side(), dict.num_filters())
    }

    pub fn from_needles(
        height: usize,
        width: usize,
        side: usize,
        num_filters: usize,
        needles: Vec<Needle>,
    ) -> Result<Self> {
        let mut f = Self::zeros(height, width, side, num_filters)?;
        if needles.len() != f.needles.len() {
            return Err(CscError::Dimension(format!(
                "{} needles for {} positions",
                needles.len(),
                f.needles.len()
            )));
        }
        for n in &needles {
            if n.entries.iter().any(|e| e.0 as usize >= num_filters) {
                return Err(CscError::Dimension(
                    "needle filter index out of range".into(),
                ));
            }
            if n.entries.iter().any(|e| !e.1.is_finite()) {
                return Err(CscError::Numeric("needle coefficients"));
            }
        }
        f.needles = needles;
        Ok(f)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_filters(&self) -> usize {
        self.num_filters
    }

    pub fn grid(&self) -> PositionGrid {
        self.grid
    }

    pub fn needles(&self) -> &[Needle] {
        &self.needles
    }

    pub fn get(&self, p: Position) -> &Needle {
        &self.needles[self.grid.index(p)]
    }

    pub fn set(&mut self, p: Position, needle: Needle) {
        let i = self.grid.index(p);
        self.needles[i] = needle;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Position, &Needle)> + '_ {
        self.needles
            .iter()
            .enumerate()
            .map(|(i, n)| (self.grid.position(i), n))
    }

    pub fn nnz(&self) -> usize {
        self.needles.iter().map(Needle::nnz).sum()
    }

    pub fn l1(&self) -> f64 {
        self.needles.iter().map(Needle::l1).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.needles.iter().all(Needle::is_zero)
    }

    pub(crate) fn check_dict(&self, dict: &LocalDictionary) -> Result<()> {
        if dict.side() != self.side || dict.num_filters() != self.num_filters {
            return Err(CscError::Dimension(format!(
                "needle field expects {} filters of side {}, dictionary has {} of side {}",
                self.num_filters,
                self.side,
                dict.num_filters(),
                dict.side()
            )));
        }
        Ok(())
    }
}

/// `Σ_i P_iᵀ D_L α_i` over the whole field.
pub fn reconstruct(needles: &NeedleField, dict: &LocalDictionary) -> Result<Plane> {
    needles.check_dict(dict)?;
    let mut out = Plane::zeros(needles.shape());
    let mut slice = vec![0.0; dict.patch_len()];
    for (p, n) in needles.iter() {
        if n.is_zero() {
            continue;
        }
        dict.synthesize(n, &mut slice);
        place_add_patch(&mut out, &slice, p, dict.side())?;
    }
    Ok(out)
}
