//! Finite-difference Weyl–Dirac operator on a Dirichlet box, its smallest
//! singular value, and scaling sweeps `t ↦ σ_min(D[tA])`.
//!
//! The magnetic potential enters through link phases `exp(−i∫A·dl)` on the
//! difference stencil, which makes the matrix exactly Hermitian and exactly
//! covariant under lattice gauge transformations.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::PotentialSpec;
use crate::quadrature::gauss_legendre;
use crate::spin::{SpinorField, SpinorFn};
use crate::vec3::{dot, sub, V3};

/// Largest matrix dimension `assemble` accepts (two 64³ spinor grids).
pub const DEFAULT_MAX_DIM: usize = 2 * 64 * 64 * 64;
/// Largest grid that may be densified.
pub const DENSE_MAX_N: usize = 8;
const LINK_POINTS: usize = 6;
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    #[serde(rename = "2")]
    Order2,
    #[serde(rename = "4")]
    Order4,
}

impl Stencil {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            2 => Ok(Stencil::Order2),
            4 => Ok(Stencil::Order4),
            _ => Err(Error::Invalid(format!("stencil order must be 2 or 4, got {order}"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Stencil::Order2 => 2,
            Stencil::Order4 => 4,
        }
    }

    /// `(offset, weight)` pairs of the antisymmetric first difference.
    fn weights(self) -> &'static [(usize, f64)] {
        match self {
            Stencil::Order2 => &[(1, 0.5)],
            Stencil::Order4 => &[(1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        }
    }

    fn reach(self) -> usize {
        self.weights().len()
    }
}

/// The box `[−L, L]³` sampled at `n` points per axis, boundary points included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub l: f64,
    pub n: usize,
    pub stencil: Stencil,
}

impl GridSpec {
    pub fn new(l: f64, n: usize, stencil: Stencil) -> Result<Self> {
        let g = GridSpec { l, n, stencil };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Invalid(format!("grid needs n ≥ 8, got {}", self.n)));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::Invalid(format!("box half-width must be positive, got {}", self.l)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n - 1) as f64
    }

    pub fn sites(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.sites()
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n + i[1]) * self.n + i[2]
    }

    pub fn multi_index(&self, s: usize) -> [usize; 3] {
        [s / (self.n * self.n), (s / self.n) % self.n, s % self.n]
    }

    pub fn point(&self, i: [usize; 3]) -> V3<f64> {
        let h = self.h();
        [-self.l + i[0] as f64 * h, -self.l + i[1] as f64 * h, -self.l + i[2] as f64 * h]
    }

    /// Whether the stencil at site `i` stays inside the box.
    pub fn is_interior(&self, i: [usize; 3]) -> bool {
        let r = self.stencil.reach();
        i.iter().all(|&k| k >= r && k + r < self.n)
    }
}

/// Sparse Hermitian matrix in CSR form; row `2·site + spin`.
#[derive(Clone, Debug)]
pub struct GridOperator {
    pub grid: GridSpec,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    /// Unit vector `v`: the operator is replaced by `(I − vv†) M (I − vv†)`.
    deflation: Option<Vec<Complex64>>,
}

/// `∫_x^y A·dl`
fn link_angle(spec: &PotentialSpec, x: V3<f64>, y: V3<f64>, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let d = sub(y, x);
    let (nodes, weights) = rule;
    let mut s = 0.0;
    for (u, w) in nodes.iter().zip(weights) {
        let t = 0.5 * (u + 1.0);
        let p = [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]];
        s += 0.5 * w * dot(spec.potential(p), d);
    }
    s
}

/// `σ_k` as (column, value) for each row.
fn pauli_entries(k: usize, row: usize) -> (usize, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    match (k, row) {
        (0, 0) => (1, one),
        (0, _) => (0, one),
        (1, 0) => (1, -i),
        (1, _) => (0, i),
        (2, 0) => (0, one),
        _ => (1, -one),
    }
}

pub fn assemble(spec: &PotentialSpec, g: GridSpec) -> Result<GridOperator> {
    assemble_capped(spec, g, DEFAULT_MAX_DIM)
}

/// `M = σ·(−i∇_A)` with covariant central differences.
pub fn assemble_capped(spec: &PotentialSpec, g: GridSpec, max_dim: usize) -> Result<GridOperator> {
    g.validate()?;
    spec.validate()?;
    if g.dim() > max_dim {
        return Err(Error::OutOfMemory { dim: g.dim(), cap: max_dim });
    }
    let h = g.h();
    let n = g.n;
    let rule = gauss_legendre(LINK_POINTS);
    let weights = g.stencil.weights();

    // Each row: ordered (col, value) pairs.
    let rows: Vec<Vec<(usize, Complex64)>> = (0..g.sites())
        .into_par_iter()
        .flat_map_iter(|s| {
            let i = g.multi_index(s);
            let x = g.point(i);
            let mut site_entries: Vec<(usize, [usize; 2], Complex64)> = Vec::new();
            for k in 0..3 {
                for &(m, c) in weights {
                    // forward neighbour: link angle from x to y
                    if i[k] + m < n {
                        let mut j = i;
                        j[k] += m;
                        let u = Complex64::from_polar(1.0, -link_angle(spec, x, g.point(j), &rule));
                        site_entries.push((g.index(j), [k, 0], u * (c / h)));
                    }
                    // backward neighbour: conjugate of the link computed from the lower site
                    if i[k] >= m {
                        let mut j = i;
                        j[k] -= m;
                        let u = Complex64::from_polar(1.0, link_angle(spec, g.point(j), x, &rule));
                        site_entries.push((g.index(j), [k, 0], u * (-c / h)));
                    }
                }
            }
            (0..2).map(move |alpha| {
                let mut row: Vec<(usize, Complex64)> = site_entries
                    .iter()
                    .map(|&(t, [k, _], v)| {
                        let (beta, p) = pauli_entries(k, alpha);
                        (2 * t + beta, -Complex64::i() * p * v)
                    })
                    .collect();
                row.sort_by_key(|e| e.0);
                // merge duplicates (several axes may hit the same column)
                let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
                for (col, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == col => last.1 += v,
                        _ => merged.push((col, v)),
                    }
                }
                merged
            })
            .collect::<Vec<_>>()
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(g.dim() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(GridOperator { grid: g, row_ptr, cols, vals, deflation: None })
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // fixed chunking keeps the sum independent of the thread count
    let partial: Vec<Complex64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum())
        .collect();
    partial.into_iter().sum()
}

fn vnorm(a: &[Complex64]) -> f64 {
    cdot(a, a).re.sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(y, x)| {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    });
}

impl GridOperator {
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `max |M_ij − conj(M_ji)|` over the stored pattern.
    pub fn hermiticity_defect(&self) -> f64 {
        (0..self.dim())
            .into_par_iter()
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| (self.vals[k] - self.entry(self.cols[k], i).conj()).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Replaces `M` by `(I − vv†) M (I − vv†)`, which is Hermitian and annihilates `v`.
    pub fn with_planted_null(mut self, v: &[Complex64]) -> Self {
        let nv = vnorm(v);
        self.deflation = Some(v.iter().map(|z| z / nv).collect());
        self
    }

    fn apply_raw(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            for (r, yr) in out.iter_mut().enumerate() {
                let i = c * CHUNK + r;
                let mut s = Complex64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.vals[k] * x[self.cols[k]];
                }
                *yr = s;
            }
        });
    }

    /// `y = M x`
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim()];
        match &self.deflation {
            None => self.apply_raw(x, &mut y),
            Some(v) => {
                let mut px = x.to_vec();
                axpy(-cdot(v, x), v, &mut px);
                self.apply_raw(&px, &mut y);
                let c = cdot(v, &y);
                axpy(-c, v, &mut y);
            }
        }
        y
    }

    /// `M² x`
    pub fn apply_square(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.apply(&self.apply(x))
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.grid.n > DENSE_MAX_N {
            return Err(Error::Invalid(format!("refusing to densify a grid with n = {} > {DENSE_MAX_N}", self.grid.n)));
        }
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut e = vec![Complex64::new(0.0, 0.0); d];
            e[j] = Complex64::new(1.0, 0.0);
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Samples a spinor field at the grid sites.
    pub fn sample<F: SpinorFn>(&self, f: &F) -> Vec<Complex64> {
        let g = self.grid;
        (0..g.sites())
            .into_par_iter()
            .flat_map_iter(|s| f.value(g.point(g.multi_index(s))))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaMin {
    pub sigma: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub block: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Precondition residuals with the inverse of the shifted free operator.
    pub precondition: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, block: 4, max_iter: 5000, seed: 7, precondition: true }
    }
}

type Block = Vec<Vec<Complex64>>;

/// `[⟨q_i, v⟩]_i` in one pass over memory.
fn multi_dot(qs: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let partial: Vec<Vec<Complex64>> = v
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, vc)| {
            let off = c * CHUNK;
            qs.iter()
                .map(|q| q[off..off + vc.len()].iter().zip(vc).map(|(a, b)| a.conj() * b).sum())
                .collect()
        })
        .collect();
    let mut out = vec![zero; qs.len()];
    for p in partial {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

/// `v += Σ coeffs_i q_i`
fn multi_axpy(coeffs: &[Complex64], qs: &[Vec<Complex64>], v: &mut [Complex64]) {
    v.par_chunks_mut(CHUNK).enumerate().for_each(|(c, vc)| {
        let off = c * CHUNK;
        for (a, q) in coeffs.iter().zip(qs) {
            for (vi, qi) in vc.iter_mut().zip(&q[off..]) {
                *vi += a * qi;
            }
        }
    });
}

/// Orthonormalizes `v` against the orthonormal columns `basis`, applying the
/// same column operations to its image `bv` when given; `None` when `v` is
/// numerically dependent.
fn orthonormalize_into(
    basis: &[Vec<Complex64>],
    basis_b: &[Vec<Complex64>],
    mut v: Vec<Complex64>,
    mut bv: Option<Vec<Complex64>>,
) -> Option<(Vec<Complex64>, Option<Vec<Complex64>>)> {
    let n0 = vnorm(&v);
    if n0 == 0.0 {
        return None;
    }
    // a second pass only when the first one cancelled most of `v`
    let mut before = n0;
    let mut nv = n0;
    for _ in 0..2 {
        let c: Vec<Complex64> = multi_dot(basis, &v).into_iter().map(|z| -z).collect();
        multi_axpy(&c, basis, &mut v);
        if let Some(bv) = bv.as_mut() {
            multi_axpy(&c, basis_b, bv);
        }
        nv = vnorm(&v);
        if nv > 0.5 * before {
            break;
        }
        before = nv;
    }
    if nv < 1e-10 * n0 {
        return None;
    }
    let inv = Complex64::new(1.0 / nv, 0.0);
    v.iter_mut().for_each(|z| *z *= inv);
    if let Some(bv) = bv.as_mut() {
        bv.iter_mut().for_each(|z| *z *= inv);
    }
    Some((v, bv))
}

fn combine(cols: &[Vec<Complex64>], coeffs: &DMatrix<Complex64>, j: usize, rows: std::ops::Range<usize>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); cols[0].len()];
    let c: Vec<Complex64> = rows.clone().map(|r| coeffs[(r, j)]).collect();
    multi_axpy(&c, &cols[rows], &mut out);
    out
}

/// Smallest singular value of the Hermitian `M`, i.e. `√λ_min(M²)`, by
/// locally optimal block preconditioned conjugate gradients on `M²`.
///
/// Converged when the residual of the lowest Ritz pair satisfies
/// `‖r‖ ≤ tol·θ`, which bounds the relative error of `θ` by `tol`.
pub fn sigma_min(m: &GridOperator, opts: &SolverOptions) -> Result<SigmaMin> {
    lobpcg(m, opts, None).map(|r| r.0)
}

/// As `sigma_min`, starting from the columns of `init` (padded with random vectors).
fn lobpcg(m: &GridOperator, opts: &SolverOptions, init: Option<&Block>) -> Result<(SigmaMin, Block)> {
    let dim = m.dim();
    let k = opts.block.clamp(1, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pre = opts.precondition.then(|| FreePreconditioner::new(&m.grid));

    let mut x: Block = Vec::with_capacity(k);
    let mut bx: Block = Vec::with_capacity(k);
    for v in init.into_iter().flatten().filter(|v| v.len() == dim).take(k) {
        if let Some((q, _)) = orthonormalize_into(&x, &bx, v.clone(), None) {
            bx.push(m.apply_square(&q));
            x.push(q);
        }
    }
    while x.len() < k {
        let v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        if let Some((q, _)) = orthonormalize_into(&x, &bx, v, None) {
            bx.push(m.apply_square(&q));
            x.push(q);
        }
    }
    let mut p: Block = Vec::new();
    let mut bp: Block = Vec::new();
    let mut theta = vec![0.0; k];
    let mut scale: f64 = 0.0;
    let mut last_res = f64::INFINITY;

    for it in 0..=opts.max_iter {
        let mut basis = x.clone();
        let mut basis_b = bx.clone();
        if it > 0 {
            let mut w: Block = Vec::with_capacity(k);
            for j in 0..k {
                let mut r = bx[j].clone();
                axpy(Complex64::new(-theta[j], 0.0), &x[j], &mut r);
                w.push(r);
            }
            last_res = vnorm(&w[0]);
            let slack = 1e-13 * scale;
            if last_res <= opts.tol * theta[0] + slack {
                // the tracked image may have drifted: confirm with a fresh product
                let fresh = m.apply_square(&x[0]);
                let th = cdot(&x[0], &fresh).re;
                let mut r = fresh.clone();
                axpy(Complex64::new(-th, 0.0), &x[0], &mut r);
                let rf = vnorm(&r);
                if rf <= opts.tol * th.max(0.0) + slack {
                    let s = SigmaMin { sigma: th.max(0.0).sqrt(), iterations: it, residual: rf, converged: true };
                    return Ok((s, x));
                }
                bx[0] = fresh.clone();
                basis_b[0] = fresh;
            }
            if it == opts.max_iter {
                break;
            }
            for r in w {
                let r = match &pre {
                    Some(t) => t.apply(&r),
                    None => r,
                };
                if let Some((q, _)) = orthonormalize_into(&basis, &basis_b, r, None) {
                    basis_b.push(m.apply_square(&q));
                    basis.push(q);
                }
            }
            for (v, bv) in p.iter().cloned().zip(bp.iter().cloned()) {
                if let Some((q, Some(bq))) = orthonormalize_into(&basis, &basis_b, v, Some(bv)) {
                    basis.push(q);
                    basis_b.push(bq);
                }
            }
        }
        // Rayleigh–Ritz on span [X, W, P]
        let dimv = basis.len();
        let mut hm = DMatrix::<Complex64>::zeros(dimv, dimv);
        for j in 0..dimv {
            let col = multi_dot(&basis[..=j], &basis_b[j]);
            for (i, z) in col.into_iter().enumerate() {
                hm[(i, j)] = z;
                hm[(j, i)] = z.conj();
            }
            hm[(j, j)].im = 0.0;
        }
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..dimv).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        scale = scale.max(eig.eigenvalues[order[dimv - 1]]);
        let mut c = DMatrix::<Complex64>::zeros(dimv, k);
        for (j, &o) in order.iter().take(k).enumerate() {
            theta[j] = eig.eigenvalues[o];
            c.set_column(j, &eig.eigenvectors.column(o));
        }
        let nx = x.len();
        let new_x: Block = (0..k).map(|j| combine(&basis, &c, j, 0..dimv)).collect();
        let new_bx: Block = (0..k).map(|j| combine(&basis_b, &c, j, 0..dimv)).collect();
        if dimv > nx {
            p = (0..k).map(|j| combine(&basis, &c, j, nx..dimv)).collect();
            bp = (0..k).map(|j| combine(&basis_b, &c, j, nx..dimv)).collect();
        }
        x = new_x;
        bx = new_bx;
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: last_res })
}

/// Smallest singular value from a dense eigensolve (small grids only).
pub fn sigma_min_dense(m: &GridOperator) -> Result<f64> {
    let d = m.to_dense()?;
    let ev = SymmetricEigen::new(d).eigenvalues;
    Ok(ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())))
}

/// Eigenvalues of the one-dimensional Dirichlet difference operator `−i D`.
pub fn free_eigenvalues_1d(g: &GridSpec) -> Vec<f64> {
    let n = g.n;
    let h = g.h();
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for &(m, c) in g.stencil.weights() {
            if i + m < n {
                d[(i, i + m)] = Complex64::new(0.0, -c / h);
                d[(i + m, i)] = Complex64::new(0.0, c / h);
            }
        }
    }
    SymmetricEigen::new(d).eigenvalues.iter().copied().collect()
}

/// `(M₀² + s)⁻¹` for the free operator `M₀`, applied exactly through the
/// real eigenbasis of the one-dimensional `−D²` along each axis.
struct FreePreconditioner {
    n: usize,
    basis: DMatrix<f64>,
    basis_t: DMatrix<f64>,
    mu2: Vec<f64>,
    shift: f64,
}

impl FreePreconditioner {
    fn new(g: &GridSpec) -> Self {
        let n = g.n;
        let h = g.h();
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for &(m, c) in g.stencil.weights() {
                if i + m < n {
                    d[(i, i + m)] = c / h;
                    d[(i + m, i)] = -c / h;
                }
            }
        }
        let e = SymmetricEigen::new(d.transpose() * d);
        let mu2: Vec<f64> = e.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let shift = 3.0 * mu2.iter().copied().fold(f64::INFINITY, f64::min);
        FreePreconditioner { n, basis_t: e.eigenvectors.transpose(), basis: e.eigenvectors, mu2, shift }
    }

    /// Applies the `n×n` matrix `u` along `axis` of a spinor grid vector:
    /// the vector splits into blocks of `n` contiguous rows indexed by that axis.
    fn along(&self, u: &DMatrix<f64>, axis: usize, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let rowlen = 2 * n.pow(2 - axis as u32);
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        y.par_chunks_mut(n * rowlen).zip(x.par_chunks(n * rowlen)).for_each(|(yb, xb)| {
            if rowlen == 2 {
                for (i, yr) in yb.chunks_mut(2).enumerate() {
                    let (mut a0, mut a1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for (m, xr) in xb.chunks(2).enumerate() {
                        let w = u[(i, m)];
                        a0 += xr[0] * w;
                        a1 += xr[1] * w;
                    }
                    yr[0] = a0;
                    yr[1] = a1;
                }
                return;
            }
            for (i, yr) in yb.chunks_mut(rowlen).enumerate() {
                for (m, xr) in xb.chunks(rowlen).enumerate() {
                    let w = u[(i, m)];
                    for (a, b) in yr.iter_mut().zip(xr) {
                        *a += b * w;
                    }
                }
            }
        });
        y
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y = x.to_vec();
        for a in 0..3 {
            y = self.along(&self.basis_t, a, &y);
        }
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            for (r, z) in out.iter_mut().enumerate() {
                let site = (c * CHUNK + r) / 2;
                let (i, j, k) = (site / (n * n), (site / n) % n, site % n);
                *z /= self.mu2[i] + self.mu2[j] + self.mu2[k] + self.shift;
            }
        });
        for a in 0..3 {
            y = self.along(&self.basis, a, &y);
        }
        y
    }
}

/// `σ_min` of the free operator: the three axes decouple, so it is `√3` times
/// the smallest one-dimensional eigenvalue in magnitude.
pub fn free_sigma_min(g: &GridSpec) -> f64 {
    let e = free_eigenvalues_1d(g).iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    3f64.sqrt() * e
}

/// Pass bar for the negative cases: half the free `σ_min` on the same grid.
pub fn sigma_floor(g: &GridSpec) -> f64 {
    0.5 * free_sigma_min(g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub ts: Vec<f64>,
    pub sigma_mins: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub grid: GridSpec,
    pub potential: PotentialSpec,
}

impl SweepResult {
    pub fn min(&self) -> f64 {
        self.sigma_mins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `σ_min(D[tA])` for each `t`.
pub fn scaling_sweep(spec: &PotentialSpec, g: GridSpec, ts: &[f64], opts: &SolverOptions) -> Result<SweepResult> {
    if let Some(t) = ts.iter().find(|t| !t.is_finite()) {
        return Err(Error::Invalid(format!("scaling {t} is not finite")));
    }
    let mut out = SweepResult {
        ts: ts.to_vec(),
        sigma_mins: Vec::with_capacity(ts.len()),
        iterations: Vec::with_capacity(ts.len()),
        converged: Vec::with_capacity(ts.len()),
        grid: g,
        potential: spec.clone(),
    };
    // each solve starts from the previous Ritz vectors
    let mut warm: Option<Block> = None;
    for &t in ts {
        let m = assemble(&spec.clone().scaled(t), g)?;
        let (s, x) = lobpcg(&m, opts, warm.as_ref())?;
        warm = Some(x);
        out.sigma_mins.push(s.sigma);
        out.iterations.push(s.iterations);
        out.converged.push(s.converged);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridResidual {
    /// `‖Mψ‖/‖ψ‖` over the whole box.
    pub full: f64,
    /// The same, with `Mψ` restricted to sites whose stencil stays inside the box.
    pub interior: f64,
}

pub fn residual_of(m: &GridOperator, psi: &[Complex64]) -> GridResidual {
    let g = m.grid;
    let r = m.apply(psi);
    let np = vnorm(psi);
    let interior: f64 = (0..g.sites())
        .filter(|&s| g.is_interior(g.multi_index(s)))
        .map(|s| r[2 * s].norm_sqr() + r[2 * s + 1].norm_sqr())
        .sum();
    GridResidual { full: vnorm(&r) / np, interior: interior.sqrt() / np }
}

/// Relative residual of a sampled spinor field under the grid operator of `spec`.
pub fn zeromode_residual_on_grid(spec: &PotentialSpec, mode: &SpinorField, g: GridSpec) -> Result<GridResidual> {
    let m = assemble(spec, g)?;
    let psi = m.sample(mode);
    Ok(residual_of(&m, &psi))
}
