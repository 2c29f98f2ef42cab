//! The local dictionary: `m` vectorized `side x side` filters.

use ndarray::{ArrayView2, ShapeBuilder};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CscError, Result};
use crate::layers::{Position, PositionGrid};
use crate::needles::Needle;
use crate::plane::{extract_patch_into, Plane};

/// Column norms below this are treated as degenerate by the projection.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// An `n x m` matrix of filters stored column-major, `n = side²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDictionary {
    side: usize,
    num_filters: usize,
    atoms: Vec<f64>,
}

impl LocalDictionary {
    /// Wraps column-major atom data. Columns are taken as given; call
    /// [`LocalDictionary::project_columns`] to normalize.
    pub fn from_column_major(side: usize, num_filters: usize, atoms: Vec<f64>) -> Result<Self> {
        if side == 0 || num_filters == 0 {
            return Err(CscError::Config(
                "dictionary needs a positive filter side and filter count".into(),
            ));
        }
        if atoms.len() != side * side * num_filters {
            return Err(CscError::Dimension(format!(
                "{} atom values for a {}x{} dictionary",
                atoms.len(),
                side * side,
                num_filters
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(CscError::Numeric("dictionary atoms"));
        }
        Ok(Self {
            side,
            num_filters,
            atoms,
        })
    }

    pub fn from_columns(side: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let atoms = columns.iter().flatten().copied().collect();
        Self::from_column_major(side, columns.len(), atoms)
    }

    /// Unit-norm atoms with i.i.d. Gaussian entries.
    pub fn random<R: Rng + ?Sized>(side: usize, num_filters: usize, rng: &mut R) -> Result<Self> {
        let n = side * side;
        let atoms = (0..n * num_filters)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut d = Self::from_column_major(side, num_filters, atoms)?;
        d.project_columns_or_reseed(rng);
        Ok(d)
    }

    /// Normalized patches sampled without replacement from the given planes.
    /// Flat patches are skipped; random atoms fill any shortfall.
    pub fn from_random_patches<R: Rng + ?Sized>(
        images: &[Plane],
        side: usize,
        num_filters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = side * side;
        let mut candidates: Vec<(usize, Position)> = Vec::new();
        for (k, img) in images.iter().enumerate() {
            let (h, w) = img.dim();
            if let Ok(grid) = PositionGrid::new(h, w, side) {
                candidates.extend(grid.iter().map(|p| (k, p)));
            }
        }
        let mut atoms = Vec::with_capacity(n * num_filters);
        let mut patch = vec![0.0; n];
        if !candidates.is_empty() {
            let take = candidates.len().min(4 * num_filters);
            for i in sample(rng, candidates.len(), take) {
                if atoms.len() == n * num_filters {
                    break;
                }
                let (k, p) = candidates[i];
                extract_patch_into(images[k].view(), p, side, &mut patch)?;
                let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    atoms.extend(patch.iter().map(|v| v / norm));
                }
            }
        }
        while atoms.len() < n * num_filters {
            atoms.push(rng.sample::<f64, _>(StandardNormal));
        }
        let mut d = Self::from_column_major(side, num_filters, atoms)?;
        d.project_columns_or_reseed(rng);
        Ok(d)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Patch dimension `n = side²`.
    pub fn patch_len(&self) -> usize {
        self.side * self.side
    }

    pub fn num_filters(&self) -> usize {
        self.num_filters
    }

    pub fn column_major(&self) -> &[f64] {
        &self.atoms
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.patch_len(), self.num_filters).f(), &self.atoms)
            .expect("atom storage matches its shape")
    }

    #[inline]
    pub fn atom(&self, j: usize) -> &[f64] {
        let n = self.patch_len();
        &self.atoms[j * n..(j + 1) * n]
    }

    #[inline]
    pub fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.patch_len();
        &mut self.atoms[j * n..(j + 1) * n]
    }

    /// `D_Lᵀ v`.
    pub fn correlate(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(self.atom(j), v);
        }
    }

    /// `out = D_L α` for a sparse needle.
    pub fn synthesize(&self, needle: &Needle, out: &mut [f64]) {
        out.fill(0.0);
        self.synthesize_add(needle, 1.0, out);
    }

    /// `out += scale · D_L α`.
    pub fn synthesize_add(&self, needle: &Needle, scale: f64, out: &mut [f64]) {
        for &(j, a) in needle.entries() {
            let s = scale * a;
            for (o, d) in out.iter_mut().zip(self.atom(j as usize)) {
                *o += s * d;
            }
        }
    }

    /// The `m x m` Gram matrix `D_Lᵀ D_L`, row-major.
    pub fn gram(&self) -> Gram {
        let m = self.num_filters;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot(self.atom(i), self.atom(j));
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        Gram { m, data: g }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.num_filters)
            .map(|j| dot(self.atom(j), self.atom(j)).sqrt())
            .collect()
    }

    /// Rescales every column to unit Euclidean norm.
    ///
    /// Fails without modifying anything if some column is degenerate.
    pub fn project_columns(&mut self) -> Result<()> {
        let norms = self.column_norms();
        if let Some((atom, &norm)) = norms
            .iter()
            .enumerate()
            .find(|(_, n)| !(**n >= DEGENERATE_NORM) || !n.is_finite())
        {
            return Err(CscError::DegenerateAtom { atom, norm });
        }
        for (j, norm) in norms.into_iter().enumerate() {
            self.atom_mut(j).iter_mut().for_each(|v| *v /= norm);
        }
        Ok(())
    }

    /// Like [`LocalDictionary::project_columns`], but degenerate atoms are
    /// replaced by random unit vectors. Returns the indices that were reseeded.
    pub fn project_columns_or_reseed<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        let mut reseeded = Vec::new();
        loop {
            match self.project_columns() {
                Ok(()) => return reseeded,
                Err(CscError::DegenerateAtom { atom, norm }) => {
                    log::warn!("reinitializing degenerate atom {atom} (norm {norm:.3e})");
                    self.atom_mut(atom)
                        .iter_mut()
                        .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
                    reseeded.push(atom);
                }
                Err(e) => unreachable!("projection only fails on degenerate atoms: {e}"),
            }
        }
    }
}

/// Symmetric Gram matrix of a dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    m: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.m..(j + 1) * self.m]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_halves_norm_two_column() {
        let mut d = LocalDictionary::from_columns(1, &[vec![2.0], vec![1.0]]).unwrap();
        d.project_columns().unwrap();
        assert_eq!(d.atom(0), &[1.0]);
        assert_eq!(d.atom(1), &[1.0]);
    }

    #[test]
    fn projection_of_unit_dictionary_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = LocalDictionary::random(3, 5, &mut rng).unwrap();
        let mut e = d.clone();
        e.project_columns().unwrap();
        for (a, b) in d.column_major().iter().zip(e.column_major()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn random_dictionary_has_unit_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let atoms = (0..16 * 7)
            .map(|i| ((i * 37 % 23) as f64 - 11.0) * 3.1)
            .collect();
        let mut d = LocalDictionary::from_column_major(4, 7, atoms).unwrap();
        d.project_columns_or_reseed(&mut rng);
        for n in d.column_norms() {
            assert!((n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_atom_reported_and_reseeded() {
        let mut d =
            LocalDictionary::from_columns(2, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0; 4]]).unwrap();
        assert!(matches!(
            d.clone().project_columns(),
            Err(CscError::DegenerateAtom { atom: 1, .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(d.project_columns_or_reseed(&mut rng), vec![1]);
        assert!((d.column_norms()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(LocalDictionary::from_column_major(2, 2, vec![0.0; 7]).is_err());
        assert!(matches!(
            LocalDictionary::from_column_major(1, 1, vec![f64::NAN]),
            Err(CscError::Numeric(_))
        ));
    }

    #[test]
    fn matrix_view_is_column_major() {
        let d = LocalDictionary::from_columns(1, &[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(d.matrix()[[0, 2]], 3.0);
    }
}
