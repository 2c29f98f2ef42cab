//! Exact solver for the per-needle lasso
//!
//! ```text
//! min_α ½‖p − D α‖² + λ‖α‖₁
//! ```
//!
//! The support and signs are found by the LARS-lasso homotopy, the
//! coefficients are then refit on that support, and the result is certified
//! against the KKT conditions. If certification fails, coordinate descent
//! polishes the iterate before giving up.

use rayon::prelude::*;

use crate::dict::{dot, Gram, LocalDictionary};
use crate::error::{CscError, Result};
use crate::needles::{Needle, NeedleField};
use crate::plane::extract_patch_into;
use crate::work::{check_lambda, WorkImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Allowed KKT violation of a returned solution. For very large inputs
    /// the bound is raised to the resolution of the correlations,
    /// `1e3 · ε · max(λ, ‖Dᵀy‖∞)`.
    pub dual_tol: f64,
    /// Optional cap on the number of nonzeros. A capped solve stops on the
    /// regularization path and carries no KKT certificate at `lambda`.
    pub max_nnz: Option<usize>,
}

impl LassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            dual_tol: 1e-8,
            max_nnz: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.dual_tol > 0.0) {
            return Err(CscError::Config("dual_tol must be positive".into()));
        }
        if self.max_nnz == Some(0) {
            return Err(CscError::Config("max_nnz must be at least 1".into()));
        }
        Ok(())
    }
}

/// Column access to a (possibly implicit) Gram matrix.
trait GramColumns {
    fn diag(&mut self, j: usize) -> f64;
    fn column(&mut self, j: usize) -> &[f64];
}

impl GramColumns for &Gram {
    fn diag(&mut self, j: usize) -> f64 {
        self.get(j, j)
    }

    fn column(&mut self, j: usize) -> &[f64] {
        Gram::column(self, j)
    }
}

/// `Dᵀ diag(a) D`, with columns built on first use.
struct MaskedGram<'a> {
    dict: &'a LocalDictionary,
    mask: &'a [f64],
    diag: Vec<f64>,
    columns: Vec<Option<Vec<f64>>>,
    scratch: Vec<f64>,
}

impl<'a> MaskedGram<'a> {
    fn new(dict: &'a LocalDictionary, mask: &'a [f64]) -> Self {
        let diag = (0..dict.num_filters())
            .map(|j| dict.atom(j).iter().zip(mask).map(|(d, a)| a * d * d).sum())
            .collect();
        Self {
            dict,
            mask,
            diag,
            columns: vec![None; dict.num_filters()],
            scratch: vec![0.0; dict.patch_len()],
        }
    }
}

impl GramColumns for MaskedGram<'_> {
    fn diag(&mut self, j: usize) -> f64 {
        self.diag[j]
    }

    fn column(&mut self, j: usize) -> &[f64] {
        if self.columns[j].is_none() {
            for ((s, d), a) in self
                .scratch
                .iter_mut()
                .zip(self.dict.atom(j))
                .zip(self.mask)
            {
                *s = a * d;
            }
            let mut col = vec![0.0; self.diag.len()];
            self.dict.correlate(&self.scratch, &mut col);
            self.columns[j] = Some(col);
        }
        self.columns[j].as_deref().unwrap()
    }
}

/// Solves needle problems against one dictionary, sharing its Gram matrix.
#[derive(Debug, Clone)]
pub struct LocalSolver<'a> {
    dict: &'a LocalDictionary,
    gram: Gram,
    cfg: LassoConfig,
}

impl<'a> LocalSolver<'a> {
    pub fn new(dict: &'a LocalDictionary, cfg: LassoConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            dict,
            gram: dict.gram(),
            cfg,
        })
    }

    pub fn dict(&self) -> &LocalDictionary {
        self.dict
    }

    pub fn config(&self) -> &LassoConfig {
        &self.cfg
    }

    pub fn solve(&self, patch: &[f64]) -> Result<Needle> {
        self.check_patch(patch)?;
        let mut b = vec![0.0; self.dict.num_filters()];
        self.dict.correlate(patch, &mut b);
        let beta = solve_gram(&b, dot(patch, patch), &mut &self.gram, &self.cfg)?;
        Ok(Needle::from_dense(&beta))
    }

    /// Solve with the effective dictionary `diag(mask) D`. Entries of `patch`
    /// at unobserved pixels are ignored.
    pub fn solve_masked(&self, patch: &[f64], mask: &[f64]) -> Result<Needle> {
        self.check_patch(patch)?;
        if mask.len() != patch.len() {
            return Err(CscError::Dimension("patch mask length".into()));
        }
        if mask.iter().all(|&a| a == 1.0) {
            return self.solve(patch);
        }
        if mask.iter().all(|&a| a == 0.0) {
            return Ok(Needle::zero());
        }
        let masked: Vec<f64> = patch.iter().zip(mask).map(|(p, a)| p * a).collect();
        let mut b = vec![0.0; self.dict.num_filters()];
        self.dict.correlate(&masked, &mut b);
        let mut gram = MaskedGram::new(self.dict, mask);
        let beta = solve_gram(&b, dot(&masked, &masked), &mut gram, &self.cfg)?;
        Ok(Needle::from_dense(&beta))
    }

    /// Plain cyclic coordinate descent from an arbitrary start, stopped on the
    /// same KKT tolerance. Independent of the homotopy path; used to
    /// cross-check uniqueness of solutions.
    pub fn solve_cd(&self, patch: &[f64], start: &[f64]) -> Result<Needle> {
        self.check_patch(patch)?;
        let m = self.dict.num_filters();
        if start.len() != m {
            return Err(CscError::Dimension("start vector length".into()));
        }
        let mut b = vec![0.0; m];
        self.dict.correlate(patch, &mut b);
        let mut beta = start.to_vec();
        let mut gram = &self.gram;
        let tol = certificate_tol(&b, self.cfg.lambda, self.cfg.dual_tol);
        let violation = coordinate_descent(&b, &mut gram, self.cfg.lambda, tol, &mut beta);
        if violation > tol {
            return Err(CscError::Solver {
                position: None,
                violation,
                best: Needle::from_dense(&beta),
            });
        }
        Ok(Needle::from_dense(&beta))
    }

    /// Largest KKT violation of `needle` for the (optionally masked) problem.
    pub fn kkt_violation(&self, patch: &[f64], mask: Option<&[f64]>, needle: &Needle) -> f64 {
        let m = self.dict.num_filters();
        let beta = needle.to_dense(m);
        let mut b = vec![0.0; m];
        match mask {
            None => {
                self.dict.correlate(patch, &mut b);
                kkt(&b, &mut &self.gram, self.cfg.lambda, &beta)
            }
            Some(mask) => {
                let masked: Vec<f64> = patch.iter().zip(mask).map(|(p, a)| p * a).collect();
                self.dict.correlate(&masked, &mut b);
                kkt(
                    &b,
                    &mut MaskedGram::new(self.dict, mask),
                    self.cfg.lambda,
                    &beta,
                )
            }
        }
    }

    fn check_patch(&self, patch: &[f64]) -> Result<()> {
        if patch.len() != self.dict.patch_len() {
            return Err(CscError::Dimension(format!(
                "patch has {} entries, dictionary expects {}",
                patch.len(),
                self.dict.patch_len()
            )));
        }
        if patch.iter().any(|v| !v.is_finite()) {
            return Err(CscError::Numeric("patch"));
        }
        Ok(())
    }
}

/// One-off solve; builds the Gram matrix on every call.
pub fn solve_local(patch: &[f64], dict: &LocalDictionary, cfg: &LassoConfig) -> Result<Needle> {
    LocalSolver::new(dict, *cfg)?.solve(patch)
}

/// One-off masked solve.
pub fn solve_local_masked(
    patch: &[f64],
    patch_mask: &[f64],
    dict: &LocalDictionary,
    cfg: &LassoConfig,
) -> Result<Needle> {
    LocalSolver::new(dict, *cfg)?.solve_masked(patch, patch_mask)
}

/// `½‖mask ⊙ (target − D α)‖² + λ‖α‖₁`.
pub fn local_objective(
    target: &[f64],
    mask: Option<&[f64]>,
    needle: &Needle,
    dict: &LocalDictionary,
    lambda: f64,
) -> f64 {
    let mut slice = vec![0.0; target.len()];
    dict.synthesize(needle, &mut slice);
    let data: f64 = match mask {
        None => target
            .iter()
            .zip(&slice)
            .map(|(t, s)| (t - s) * (t - s))
            .sum(),
        Some(m) => target
            .iter()
            .zip(&slice)
            .zip(m)
            .map(|((t, s), a)| {
                let r = a * (t - s);
                r * r
            })
            .sum(),
    };
    0.5 * data + lambda * needle.l1()
}

/// Initial needles: each is the sparse code of `(1/n) P_i X`, so that the
/// overlapping slices share the reconstruction of every pixel evenly.
pub fn init_needles(
    img: &WorkImage,
    dict: &LocalDictionary,
    cfg: &LassoConfig,
) -> Result<NeedleField> {
    let solver = LocalSolver::new(dict, *cfg)?;
    let mut field = NeedleField::zeros_for(img.shape(), dict)?;
    let grid = field.grid();
    let side = dict.side();
    let n = dict.patch_len();
    let scale = 1.0 / n as f64;
    let needles: Vec<Needle> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(patch, mask), i| {
                let p = grid.position(i);
                extract_patch_into(img.original.view(), p, side, patch)?;
                patch.iter_mut().for_each(|v| *v *= scale);
                match &img.mask {
                    None => solver.solve(patch),
                    Some(m) => {
                        extract_patch_into(m.view(), p, side, mask)?;
                        solver.solve_masked(patch, mask)
                    }
                }
                .map_err(|e| e.at(p))
            },
        )
        .collect::<Result<_>>()?;
    for (i, needle) in needles.into_iter().enumerate() {
        field.set(grid.position(i), needle);
    }
    Ok(field)
}

/// Homotopy, refit, certify, and polish if needed. Returns a dense solution.
/// `yy` is the squared norm of the (masked) target.
fn solve_gram<G: GramColumns>(
    b: &[f64],
    yy: f64,
    gram: &mut G,
    cfg: &LassoConfig,
) -> Result<Vec<f64>> {
    let lambda = cfg.lambda;
    let path = lars_path(b, gram, lambda, cfg.max_nnz);
    let mut beta = path.beta;
    if path.capped {
        return Ok(beta);
    }
    if let Some(refit) = refit_on_support(b, gram, lambda, &path.active, &path.signs) {
        beta = refit;
    }
    let tol = certificate_tol(b, lambda, cfg.dual_tol);
    let mut violation = kkt(b, gram, lambda, &beta);
    let sane = plausible(b, yy, gram, lambda, &beta);
    if violation > tol || !sane {
        if !sane {
            beta.iter_mut().for_each(|v| *v = 0.0);
        }
        violation = coordinate_descent(b, gram, lambda, tol, &mut beta);
        // Descent identifies the support long before it pins the values.
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let signs: Vec<f64> = active.iter().map(|&j| beta[j].signum()).collect();
        if let Some(refit) = refit_on_support(b, gram, lambda, &active, &signs) {
            let v = kkt(b, gram, lambda, &refit);
            let g_cd = gain_over_zero(b, gram, lambda, &beta);
            let no_worse =
                gain_over_zero(b, gram, lambda, &refit) <= g_cd + 1e-12 * (1.0 + g_cd.abs());
            if v <= violation && no_worse && plausible(b, yy, gram, lambda, &refit) {
                beta = refit;
                violation = v;
            }
        }
    }
    if violation > tol {
        return Err(CscError::Solver {
            position: None,
            violation,
            best: Needle::from_dense(&beta),
        });
    }
    Ok(beta)
}

struct Path {
    beta: Vec<f64>,
    active: Vec<usize>,
    signs: Vec<f64>,
    capped: bool,
}

/// Lower-triangular Cholesky factor of the active Gram block, grown one row
/// at a time.
struct Cholesky {
    rows: Vec<Vec<f64>>,
}

impl Cholesky {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Appends a variable given its Gram entries against the current set
    /// (`cross`) and itself (`diag`). Fails when the new column is
    /// numerically dependent on the set.
    fn push(&mut self, cross: &[f64], diag: f64) -> bool {
        let k = self.rows.len();
        let mut row = vec![0.0; k + 1];
        for i in 0..k {
            let s: f64 = (0..i).map(|t| row[t] * self.rows[i][t]).sum();
            row[i] = (cross[i] - s) / self.rows[i][i];
        }
        let d2 = diag - row[..k].iter().map(|v| v * v).sum::<f64>();
        if !(d2 > 1e-10 * diag.max(1e-300)) {
            return false;
        }
        row[k] = d2.sqrt();
        self.rows.push(row);
        true
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let k = self.rows.len();
        let mut y = vec![0.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|t| self.rows[i][t] * y[t]).sum();
            y[i] = (rhs[i] - s) / self.rows[i][i];
        }
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|t| self.rows[t][i] * y[t]).sum();
            y[i] = (y[i] - s) / self.rows[i][i];
        }
        y
    }

    fn build<G: GramColumns>(gram: &mut G, active: &[usize]) -> Option<Self> {
        let mut chol = Self::new();
        for (i, &j) in active.iter().enumerate() {
            let col = gram.column(j);
            let cross: Vec<f64> = active[..i].iter().map(|&a| col[a]).collect();
            let diag = col[j];
            if !chol.push(&cross, diag) {
                return None;
            }
        }
        Some(chol)
    }
}

enum Event {
    End,
    Add(usize),
    Drop(usize),
}

fn lars_path<G: GramColumns>(b: &[f64], gram: &mut G, lambda: f64, max_nnz: Option<usize>) -> Path {
    let m = b.len();
    let mut beta = vec![0.0; m];
    let mut c = b.to_vec();
    let mut in_active = vec![false; m];
    let mut excluded: Vec<bool> = (0..m).map(|j| !(gram.diag(j) > 0.0)).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut chol = Cholesky::new();

    let Some((first, level0)) = (0..m)
        .filter(|&j| !excluded[j])
        .map(|j| (j, c[j].abs()))
        .max_by(|x, y| x.1.total_cmp(&y.1))
    else {
        return Path {
            beta,
            active,
            signs,
            capped: false,
        };
    };
    if level0 <= lambda {
        return Path {
            beta,
            active,
            signs,
            capped: false,
        };
    }
    let mut level = level0;
    let mut pending_add = Some(first);
    let mut just_dropped: Option<usize> = None;
    let max_steps = 8 * m + 64;

    for _ in 0..max_steps {
        if let Some(j) = pending_add.take() {
            if max_nnz.is_some_and(|k| active.len() >= k) {
                return Path {
                    beta,
                    active,
                    signs,
                    capped: true,
                };
            }
            let col = gram.column(j);
            let cross: Vec<f64> = active.iter().map(|&a| col[a]).collect();
            let diag = col[j];
            if chol.push(&cross, diag) {
                active.push(j);
                signs.push(if c[j] >= 0.0 { 1.0 } else { -1.0 });
                in_active[j] = true;
            } else {
                // Dependent on the active set; it cannot enter the path.
                excluded[j] = true;
            }
        }
        if level - lambda <= 1e-15 * level0 || active.is_empty() {
            break;
        }

        let w = chol.solve(&signs);
        let mut u = vec![0.0; m];
        for (&k, &wk) in active.iter().zip(&w) {
            for (ui, g) in u.iter_mut().zip(gram.column(k)) {
                *ui += wk * g;
            }
        }

        let mut gamma = level - lambda;
        let mut event = Event::End;
        for j in 0..m {
            if in_active[j] || excluded[j] || just_dropped == Some(j) {
                continue;
            }
            for (num, den) in [(level - c[j], 1.0 - u[j]), (level + c[j], 1.0 + u[j])] {
                if den > 1e-12 {
                    let g = num / den;
                    if g > 0.0 && g < gamma {
                        gamma = g;
                        event = Event::Add(j);
                    }
                }
            }
        }
        for (pos, (&k, &wk)) in active.iter().zip(&w).enumerate() {
            if wk != 0.0 {
                let g = -beta[k] / wk;
                if g > 0.0 && g < gamma {
                    gamma = g;
                    event = Event::Drop(pos);
                }
            }
        }

        for (&k, &wk) in active.iter().zip(&w) {
            beta[k] += gamma * wk;
        }
        for (ci, ui) in c.iter_mut().zip(&u) {
            *ci -= gamma * ui;
        }
        level -= gamma;
        just_dropped = None;

        match event {
            Event::End => break,
            Event::Add(j) => pending_add = Some(j),
            Event::Drop(pos) => {
                let k = active.remove(pos);
                signs.remove(pos);
                beta[k] = 0.0;
                in_active[k] = false;
                just_dropped = Some(k);
                match Cholesky::build(gram, &active) {
                    Some(ch) => chol = ch,
                    None => break,
                }
            }
        }
    }
    Path {
        beta,
        active,
        signs,
        capped: false,
    }
}

/// Exact solution of the equicorrelation system on a fixed support and sign
/// pattern, or `None` if the pattern is inconsistent with the result.
fn refit_on_support<G: GramColumns>(
    b: &[f64],
    gram: &mut G,
    lambda: f64,
    active: &[usize],
    signs: &[f64],
) -> Option<Vec<f64>> {
    let mut beta = vec![0.0; b.len()];
    if active.is_empty() {
        return Some(beta);
    }
    let chol = Cholesky::build(gram, active)?;
    let rhs: Vec<f64> = active
        .iter()
        .zip(signs)
        .map(|(&k, s)| b[k] - lambda * s)
        .collect();
    let x = chol.solve(&rhs);
    for ((&k, &s), v) in active.iter().zip(signs).zip(x) {
        if !(v * s > 0.0) {
            return None;
        }
        beta[k] = v;
    }
    Some(beta)
}

/// The requested KKT tolerance, floored at what rounding in the
/// correlations `b − Gβ` can resolve for inputs of this magnitude.
fn certificate_tol(b: &[f64], lambda: f64, dual_tol: f64) -> f64 {
    let scale = b.iter().fold(lambda, |m, v| m.max(v.abs()));
    dual_tol.max(1e3 * f64::EPSILON * scale)
}

/// A near-singular active set can send the path off to huge coefficients
/// whose KKT certificate is only rounding noise. Such points give a negative
/// data term or do worse than `β = 0`.
fn plausible<G: GramColumns>(b: &[f64], yy: f64, gram: &mut G, lambda: f64, beta: &[f64]) -> bool {
    let gain = gain_over_zero(b, gram, lambda, beta);
    let l1: f64 = beta.iter().map(|x| x.abs()).sum();
    let data = 0.5 * yy + gain - lambda * l1;
    let slack = 1e-9 * yy.max(f64::MIN_POSITIVE);
    gain <= slack && data >= -slack
}

/// `f(β) − f(0) = ½βᵀGβ − bᵀβ + λ‖β‖₁`.
fn gain_over_zero<G: GramColumns>(b: &[f64], gram: &mut G, lambda: f64, beta: &[f64]) -> f64 {
    let c = correlations(b, gram, beta);
    // βᵀGβ = βᵀ(b − c)
    let quad: f64 = beta
        .iter()
        .zip(b.iter().zip(&c))
        .map(|(x, (bj, cj))| x * (bj - cj))
        .sum();
    let lin: f64 = beta.iter().zip(b).map(|(x, bj)| x * bj).sum();
    0.5 * quad - lin + lambda * beta.iter().map(|x| x.abs()).sum::<f64>()
}

fn correlations<G: GramColumns>(b: &[f64], gram: &mut G, beta: &[f64]) -> Vec<f64> {
    let mut c = b.to_vec();
    for (k, &bk) in beta.iter().enumerate() {
        if bk != 0.0 {
            for (ci, g) in c.iter_mut().zip(gram.column(k)) {
                *ci -= bk * g;
            }
        }
    }
    c
}

fn kkt<G: GramColumns>(b: &[f64], gram: &mut G, lambda: f64, beta: &[f64]) -> f64 {
    let c = correlations(b, gram, beta);
    c.iter()
        .zip(beta)
        .map(|(&cj, &bj)| {
            if bj != 0.0 {
                (cj - lambda * bj.signum()).abs()
            } else {
                (cj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent in place. Returns the final KKT violation.
fn coordinate_descent<G: GramColumns>(
    b: &[f64],
    gram: &mut G,
    lambda: f64,
    tol: f64,
    beta: &mut [f64],
) -> f64 {
    let m = b.len();
    let diag: Vec<f64> = (0..m).map(|j| gram.diag(j)).collect();
    for j in 0..m {
        if !(diag[j] > 0.0) {
            beta[j] = 0.0;
        }
    }
    let mut c = correlations(b, gram, beta);
    let max_sweeps = 20_000;
    let mut violation = f64::INFINITY;
    for sweep in 0..max_sweeps {
        for j in 0..m {
            if !(diag[j] > 0.0) {
                continue;
            }
            let old = beta[j];
            let z = c[j] + diag[j] * old;
            let new = soft_threshold(z, lambda) / diag[j];
            if new != old {
                let delta = new - old;
                for (ci, g) in c.iter_mut().zip(gram.column(j)) {
                    *ci -= delta * g;
                }
                beta[j] = new;
            }
        }
        if sweep % 10 == 9 {
            violation = kkt(b, gram, lambda, beta);
            if violation <= 0.1 * tol {
                break;
            }
        }
    }
    violation.min(kkt(b, gram, lambda, beta))
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;

    fn identity2() -> LocalDictionary {
        LocalDictionary::from_columns(
            2,
            &[
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_patch_gives_zero_needle() {
        let d = identity2();
        let n = solve_local(&[0.0; 4], &d, &LassoConfig::new(1.0)).unwrap();
        assert!(n.is_zero());
    }

    #[test]
    fn orthonormal_dictionary_soft_thresholds() {
        let d = identity2();
        let n = solve_local(&[3.0, 0.5, -2.0, 1.0], &d, &LassoConfig::new(1.0)).unwrap();
        assert_eq!(n.to_dense(4), vec![2.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn non_finite_patch_rejected() {
        let d = identity2();
        let err = solve_local(&[f64::NAN, 0.0, 0.0, 0.0], &d, &LassoConfig::new(1.0));
        assert!(matches!(err, Err(CscError::Numeric(_))));
    }

    #[test]
    fn bad_config_rejected() {
        let d = identity2();
        let mut cfg = LassoConfig::new(-0.5);
        assert!(LocalSolver::new(&d, cfg).is_err());
        cfg.lambda = 1.0;
        cfg.dual_tol = 0.0;
        assert!(LocalSolver::new(&d, cfg).is_err());
    }

    #[test]
    fn full_and_empty_masks() {
        let d = LocalDictionary::from_columns(
            2,
            &[
                vec![0.5, 0.5, 0.5, 0.5],
                vec![0.8, -0.6, 0.0, 0.0],
                vec![0.0, 0.6, 0.0, 0.8],
            ],
        )
        .unwrap();
        let p = [1.3, -0.2, 2.1, 0.7];
        let cfg = LassoConfig::new(0.1);
        let s = LocalSolver::new(&d, cfg).unwrap();
        assert_eq!(s.solve_masked(&p, &[1.0; 4]).unwrap(), s.solve(&p).unwrap());
        assert!(s.solve_masked(&[0.0; 4], &[0.0; 4]).unwrap().is_zero());
    }

    #[test]
    fn capped_solve_respects_nnz() {
        let d = identity2();
        let mut cfg = LassoConfig::new(0.0);
        cfg.max_nnz = Some(2);
        let n = solve_local(&[3.0, 0.5, -2.0, 1.0], &d, &cfg).unwrap();
        assert_eq!(n.nnz(), 2);
        assert!(n.get(0) > 0.0 && n.get(2) < 0.0);
    }

    #[test]
    fn init_of_zero_image_is_zero() {
        let d = identity2();
        let img = WorkImage::from_padded(Plane::zeros((5, 5)), None, 2).unwrap();
        let f = init_needles(&img, &d, &LassoConfig::new(0.1)).unwrap();
        assert!(f.is_zero());
    }
}
