//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written against explicit dense matrices or plain loops
//! so that it shares no code path with the library beyond its data types.
#![allow(dead_code)]

use std::path::PathBuf;

use lobcod::{LocalDictionary, Needle, NeedleField, Plane, Position};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn random_plane(rng: &mut impl Rng, h: usize, w: usize, scale: f64) -> Plane {
    Plane::from_shape_fn((h, w), |_| rng.random_range(-scale..scale))
}

pub fn random_dict(rng: &mut impl Rng, side: usize, m: usize) -> LocalDictionary {
    LocalDictionary::random(side, m, rng).unwrap()
}

/// Every coefficient is nonzero with probability `density`, uniform in
/// `±[0.5, 1.5]·amp`.
pub fn sparse_field(
    rng: &mut impl Rng,
    shape: (usize, usize),
    side: usize,
    m: usize,
    density: f64,
    amp: f64,
) -> NeedleField {
    let mut f = NeedleField::zeros(shape.0, shape.1, side, m).unwrap();
    for r in 0..=shape.0 - side {
        for c in 0..=shape.1 - side {
            let dense: Vec<f64> = (0..m)
                .map(|_| {
                    if rng.random_bool(density) {
                        let v = amp * rng.random_range(0.5..1.5);
                        if rng.random_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    } else {
                        0.0
                    }
                })
                .collect();
            f.set(Position::new(r, c), Needle::from_dense(&dense));
        }
    }
    f
}

pub fn max_abs_diff(a: &Plane, b: &Plane) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `Σ_i P_iᵀ D α_i` with explicit loops over positions, atoms and pixels.
pub fn naive_reconstruct(field: &NeedleField, dict: &LocalDictionary) -> Plane {
    let (h, w) = field.shape();
    let s = dict.side();
    let mut out = Plane::zeros((h, w));
    for r in 0..=h - s {
        for c in 0..=w - s {
            for &(j, v) in field.get(Position::new(r, c)).entries() {
                let atom = dict.atom(j as usize);
                for a in 0..s {
                    for b in 0..s {
                        out[[r + a, c + b]] += v * atom[a * s + b];
                    }
                }
            }
        }
    }
    out
}

/// Column `p·m + j` is atom `j` placed at position `p` (row-major positions);
/// rows index pixels row-major.
pub fn global_dictionary(shape: (usize, usize), dict: &LocalDictionary) -> DMatrix<f64> {
    let (h, w) = shape;
    let s = dict.side();
    let m = dict.num_filters();
    let (pr, pc) = (h - s + 1, w - s + 1);
    let mut a = DMatrix::zeros(h * w, pr * pc * m);
    for r in 0..pr {
        for c in 0..pc {
            let p = r * pc + c;
            for j in 0..m {
                let atom = dict.atom(j);
                for u in 0..s {
                    for v in 0..s {
                        a[((r + u) * w + c + v, p * m + j)] = atom[u * s + v];
                    }
                }
            }
        }
    }
    a
}

/// Columns of the global dictionary belonging to one position.
pub fn position_columns(
    shape: (usize, usize),
    dict: &LocalDictionary,
    pos: Position,
) -> DMatrix<f64> {
    let (_, w) = shape;
    let s = dict.side();
    let m = dict.num_filters();
    let mut a = DMatrix::zeros(shape.0 * shape.1, m);
    for j in 0..m {
        let atom = dict.atom(j);
        for u in 0..s {
            for v in 0..s {
                a[((pos.row + u) * w + pos.col + v, j)] = atom[u * s + v];
            }
        }
    }
    a
}

pub fn plane_vector(p: &Plane) -> DVector<f64> {
    DVector::from_iterator(p.len(), p.iter().copied())
}

pub fn vector_plane(v: &DVector<f64>, shape: (usize, usize)) -> Plane {
    Plane::from_shape_vec(shape, v.iter().copied().collect()).unwrap()
}

pub fn field_vector(field: &NeedleField) -> DVector<f64> {
    let m = field.num_filters();
    let mut x = DVector::zeros(field.needles().len() * m);
    for (p, n) in field.needles().iter().enumerate() {
        for &(j, v) in n.entries() {
            x[p * m + j as usize] = v;
        }
    }
    x
}

/// Multiplies rows by a 0/1 mask.
pub fn mask_rows(a: &DMatrix<f64>, y: &DVector<f64>, mask: &Plane) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = a.clone();
    let mut y = y.clone();
    for (i, &m) in mask.iter().enumerate() {
        if m == 0.0 {
            a.row_mut(i).fill(0.0);
            y[i] = 0.0;
        }
    }
    (a, y)
}

pub fn lasso_value(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    let r = y - a * x;
    0.5 * r.norm_squared() + lambda * x.lp_norm(1)
}

pub struct LassoSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub gap: f64,
    pub sweeps: usize,
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on `½‖y − A x‖² + λ‖x‖₁`, stopped once the
/// duality gap is at most `gap_tol · max(1, P)`. Panics if it never gets there.
pub fn lasso_cd(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gap_tol: f64) -> LassoSolution {
    let n = a.ncols();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    let mut x: DVector<f64> = DVector::zeros(n);
    let mut r = y.clone();
    let yy = y.norm_squared();
    for sweep in 1..=1_000_000 {
        for j in 0..n {
            if norms[j] == 0.0 {
                continue;
            }
            let col = a.column(j);
            let z = x[j] + col.dot(&r) / norms[j];
            let new = soft(z, lambda / norms[j]);
            let delta = new - x[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                x[j] = new;
            }
        }
        if sweep % 5 == 0 {
            let r_true = y - a * &x;
            let c = a.transpose() * &r_true;
            let cmax = c.amax();
            let s = if cmax > lambda { lambda / cmax } else { 1.0 };
            let theta = &r_true * s;
            let primal = 0.5 * r_true.norm_squared() + lambda * x.lp_norm(1);
            let dual = 0.5 * yy - 0.5 * (y - &theta).norm_squared();
            let gap = primal - dual;
            if gap <= gap_tol * primal.max(1.0) {
                return LassoSolution {
                    x,
                    objective: primal,
                    gap,
                    sweeps: sweep,
                };
            }
            r = r_true;
        }
    }
    panic!("reference lasso did not reach the duality gap");
}

/// Exact lasso minimizer by trying every sign pattern over the columns:
/// solve the stationarity system on the support and keep the best
/// sign-consistent candidate. Needs a handful of columns.
pub fn lasso_enumerate(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> (DVector<f64>, f64) {
    let m = a.ncols();
    assert!(m <= 10, "3^m patterns");
    let mut best = DVector::zeros(m);
    let mut best_val = lasso_value(a, y, &best, lambda);
    let mut pattern = vec![0i8; m];
    let total = 3usize.pow(m as u32);
    for code in 0..total {
        let mut k = code;
        for p in pattern.iter_mut() {
            *p = (k % 3) as i8 - 1;
            k /= 3;
        }
        let support: Vec<usize> = (0..m).filter(|&j| pattern[j] != 0).collect();
        if support.is_empty() {
            continue;
        }
        let sub = a.select_columns(&support);
        let g = sub.transpose() * &sub;
        let rhs = sub.transpose() * y
            - DVector::from_iterator(
                support.len(),
                support.iter().map(|&j| lambda * pattern[j] as f64),
            );
        let Some(chol) = g.cholesky() else {
            continue;
        };
        let xs = chol.solve(&rhs);
        if support
            .iter()
            .zip(xs.iter())
            .any(|(&j, &v)| v * pattern[j] as f64 <= 0.0)
        {
            continue;
        }
        let mut x = DVector::zeros(m);
        for (&j, &v) in support.iter().zip(xs.iter()) {
            x[j] = v;
        }
        let val = lasso_value(a, y, &x, lambda);
        if val < best_val {
            best_val = val;
            best = x;
        }
    }
    (best, best_val)
}

/// Forward differences on the zero-extended image, as explicit matrices:
/// `(h·(w+1)) × (h·w)` horizontal and `((h+1)·w) × (h·w)` vertical.
pub fn difference_operators(h: usize, w: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut gx = DMatrix::zeros(h * (w + 1), h * w);
    for r in 0..h {
        for c in 0..=w {
            let row = r * (w + 1) + c;
            if c < w {
                gx[(row, r * w + c)] += 1.0;
            }
            if c > 0 {
                gx[(row, r * w + c - 1)] -= 1.0;
            }
        }
    }
    let mut gy = DMatrix::zeros((h + 1) * w, h * w);
    for r in 0..=h {
        for c in 0..w {
            let row = r * w + c;
            if r < h {
                gy[(row, r * w + c)] += 1.0;
            }
            if r > 0 {
                gy[(row, (r - 1) * w + c)] -= 1.0;
            }
        }
    }
    (gx, gy)
}

/// `I + μ(G_xᵀG_x + G_yᵀG_y)`.
pub fn base_matrix(h: usize, w: usize, mu: f64) -> DMatrix<f64> {
    let (gx, gy) = difference_operators(h, w);
    DMatrix::identity(h * w, h * w) + (gx.transpose() * &gx + gy.transpose() * &gy) * mu
}

pub fn dense_base_solve(target: &Plane, mu: f64) -> Plane {
    let (h, w) = target.dim();
    let x = base_matrix(h, w, mu)
        .lu()
        .solve(&plane_vector(target))
        .expect("base matrix is positive definite");
    vector_plane(&x, (h, w))
}

pub fn dense_gradient_energy(x: &Plane) -> f64 {
    let (h, w) = x.dim();
    let (gx, gy) = difference_operators(h, w);
    let v = plane_vector(x);
    (&gx * &v).norm_squared() + (&gy * &v).norm_squared()
}

/// Window average over in-bounds pixels with mask 1 (all pixels without a
/// mask). The window spans `(k−1)/2` before and the rest after the pixel.
pub fn brute_local_mean(img: &Plane, k: usize, mask: Option<&Plane>) -> Plane {
    let (h, w) = img.dim();
    let before = (k - 1) / 2;
    let after = k - 1 - before;
    Plane::from_shape_fn((h, w), |(r, c)| {
        let (mut s, mut n) = (0.0, 0.0);
        for rr in r as isize - before as isize..=(r + after) as isize {
            for cc in c as isize - before as isize..=(c + after) as isize {
                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                    continue;
                }
                let a = mask.map_or(1.0, |m| m[[rr as usize, cc as usize]]);
                s += a * img[[rr as usize, cc as usize]];
                n += a;
            }
        }
        if n > 0.0 {
            s / n
        } else {
            0.0
        }
    })
}

/// Normalized `size × size` Gaussian blur with mirrored borders.
pub fn gaussian_blur(img: &Plane, size: usize, sigma: f64) -> Plane {
    let half = (size / 2) as isize;
    let mut kernel = vec![0.0; size * size];
    for u in 0..size {
        for v in 0..size {
            let dy = u as f64 - half as f64;
            let dx = v as f64 - half as f64;
            kernel[u * size + v] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let (h, w) = img.dim();
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
        }
        i as usize
    };
    Plane::from_shape_fn((h, w), |(r, c)| {
        let mut acc = 0.0;
        for u in 0..size {
            for v in 0..size {
                let rr = reflect(r as isize + u as isize - half, h);
                let cc = reflect(c as isize + v as isize - half, w);
                acc += kernel[u * size + v] * img[[rr, cc]];
            }
        }
        acc
    })
}

/// `½‖A(Y − X̂)‖²` with the reconstruction recomputed naively.
pub fn data_term(
    target: &Plane,
    mask: Option<&Plane>,
    field: &NeedleField,
    dict: &LocalDictionary,
) -> f64 {
    let xh = naive_reconstruct(field, dict);
    let mut e = 0.0;
    for (idx, &y) in target.indexed_iter() {
        let a = mask.map_or(1.0, |m| m[idx]);
        let r = a * (y - xh[idx]);
        e += r * r;
    }
    0.5 * e
}

/// Central finite differences of [`data_term`] with respect to every
/// dictionary entry, in the dictionary's column-major order.
pub fn fd_dict_gradient(
    target: &Plane,
    mask: Option<&Plane>,
    field: &NeedleField,
    dict: &LocalDictionary,
    h: f64,
) -> Vec<f64> {
    let n = dict.column_major().len();
    let (side, m) = (dict.side(), dict.num_filters());
    (0..n)
        .map(|k| {
            let mut plus = dict.column_major().to_vec();
            let mut minus = plus.clone();
            plus[k] += h;
            minus[k] -= h;
            let dp = LocalDictionary::from_column_major(side, m, plus).unwrap();
            let dm = LocalDictionary::from_column_major(side, m, minus).unwrap();
            (data_term(target, mask, field, &dp) - data_term(target, mask, field, &dm)) / (2.0 * h)
        })
        .collect()
}

/// `max_k |a_k − b_k| / max(|b_k|, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}
