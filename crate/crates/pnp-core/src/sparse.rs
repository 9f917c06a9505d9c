//! Minimal sparse linear algebra: CSR matrices, conjugate gradient with
//! optional null-space projection, BiCGSTAB for nonsymmetric transport
//! systems, and a banded LU fallback for small systems.
//!
//! Everything here is deterministic: iteration order is fixed and no
//! parallel reductions are used inside a single solve, so reruns are
//! bit-identical.

use crate::error::{Error, Result};

/// Compressed-row sparse matrix. Column indices are sorted and unique per
/// row; explicit zeros are dropped at construction.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from (row, col, value) triplets. Duplicate
    /// entries are summed; entries that sum to exactly zero are kept out of
    /// the stored pattern.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::validation(format!(
                    "triplet ({r}, {c}) out of bounds for dimension {n}"
                )));
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c, v))
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                if c == r {
                    d[r] = v;
                }
            }
        }
        d
    }

    /// Returns `(A + A^T) / 2`. Used by the tensor Poisson assembly, where
    /// one-sided cross-derivative stencils at Neumann boundaries break exact
    /// symmetry by an O(h) local perturbation.
    pub fn symmetrized(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(2 * self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                trip.push((r, c, 0.5 * v));
                trip.push((c, r, 0.5 * v));
            }
        }
        CsrMatrix::from_triplets(self.n, &trip).expect("indices already validated")
    }

    /// Maximum |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                bw = bw.max(r.abs_diff(c));
            }
        }
        bw
    }
}

/// Null-space handling for singular (pure Neumann / periodic) systems.
#[derive(Debug, Clone)]
pub enum NullSpace {
    None,
    /// The constant vector spans the null space; `weights` are the cell
    /// volumes defining the mean-zero gauge of the returned solution.
    Constants { weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Residual reduction target: terminate once ||Ax - b|| <= rel_tol * ||b||.
    pub rel_tol: f64,
    /// Iteration cap; `None` means `20 * sqrt(n) + 200`.
    pub max_iter: Option<usize>,
    pub null_space: NullSpace,
    /// Jacobi (diagonal) preconditioning for the Krylov solvers.
    pub jacobi: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            max_iter: None,
            null_space: NullSpace::None,
            jacobi: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::validation(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if let Some(m) = self.max_iter {
            if m < 1 {
                return Err(Error::validation("max_iter must be at least 1"));
            }
        }
        Ok(())
    }

    fn iter_cap(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| 20 * (n as f64).sqrt().ceil() as usize + 200)
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual ||Ax - b|| / ||b||.
    pub residual: f64,
    /// Recorded residual norms, one per iteration (absolute).
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the weighted mean from `x` in place.
fn project_mean_zero(x: &mut [f64], weights: &[f64]) {
    let wsum: f64 = weights.iter().sum();
    let mean = dot(x, weights) / wsum;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

fn check_compatibility(b: &[f64], weights: &[f64]) -> Result<()> {
    let num: f64 = dot(b, weights).abs();
    let den: f64 = b
        .iter()
        .zip(weights)
        .map(|(bi, wi)| (bi * wi).abs())
        .sum::<f64>()
        .max(1e-300);
    let residual = num / den;
    let tol = 1e-9;
    if residual > tol && num > 1e-14 {
        return Err(Error::IncompatibleRhs { residual, tol });
    }
    Ok(())
}

/// Conjugate gradient for symmetric positive (semi-)definite systems.
///
/// With `NullSpace::Constants`, the right-hand side is checked for
/// compatibility (to 1e-9 relative) and both the iterates and the returned
/// solution are projected onto the weighted mean-zero complement.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    solve_spd_from(a, b, None, cfg)
}

/// Same as [`solve_spd`] but with a caller-provided initial guess, used to
/// warm-start the potential solves inside time stepping.
pub fn solve_spd_from(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(Error::validation("rhs length does not match matrix"));
    }
    let weights = match &cfg.null_space {
        NullSpace::Constants { weights } => {
            if weights.len() != n {
                return Err(Error::validation("null-space weight length mismatch"));
            }
            check_compatibility(b, weights)?;
            Some(weights.as_slice())
        }
        NullSpace::None => None,
    };

    let inv_diag: Option<Vec<f64>> = if cfg.jacobi {
        Some(
            a.diagonal()
                .iter()
                .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    } else {
        None
    };

    let bnorm = norm2(b);
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    if let Some(w) = weights {
        project_mean_zero(&mut x, w);
    }
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            residuals: Vec::new(),
        });
    }

    let mut r = vec![0.0; n];
    a.mul_vec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if let Some(w) = weights {
        project_mean_zero(&mut r, w);
    }

    let apply_prec = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(d) => {
            for i in 0..r.len() {
                z[i] = d[i] * r[i];
            }
        }
        None => z.copy_from_slice(r),
    };

    let mut z = vec![0.0; n];
    apply_prec(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = cfg.rel_tol * bnorm;
    let cap = cfg.iter_cap(n);
    let mut residuals = Vec::new();
    let rnorm = norm2(&r);

    if rnorm <= target {
        return Ok(SolveReport {
            x,
            iterations: 0,
            residual: rnorm / bnorm,
            residuals,
        });
    }

    // Minimal-residual smoothing: `y` carries the returned iterate whose
    // true residual `s` is non-increasing by construction (the plain CG
    // residual is not monotone in general).
    let mut y = x.clone();
    let mut s = r.clone();
    let mut snorm = rnorm;

    for it in 1..=cap {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverBreakdown(format!(
                "CG curvature p'Ap = {pap:.3e} not positive; matrix is not SPD on the search space"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(w) = weights {
            project_mean_zero(&mut x, w);
            project_mean_zero(&mut r, w);
        }
        // s <- s + theta (r - s), minimizing ||s|| along the segment
        let mut dd = 0.0;
        let mut sd = 0.0;
        for i in 0..n {
            let d = r[i] - s[i];
            dd += d * d;
            sd += s[i] * d;
        }
        if dd > 0.0 {
            let theta = -sd / dd;
            for i in 0..n {
                y[i] += theta * (x[i] - y[i]);
                s[i] += theta * (r[i] - s[i]);
            }
        }
        snorm = norm2(&s);
        residuals.push(snorm);
        if snorm <= target {
            if let Some(w) = weights {
                project_mean_zero(&mut y, w);
            }
            return Ok(SolveReport {
                x: y,
                iterations: it,
                residual: snorm / bnorm,
                residuals,
            });
        }
        apply_prec(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverNonConvergence {
        iterations: cap,
        residual: snorm / bnorm,
        target: cfg.rel_tol,
    })
}

/// BiCGSTAB for nonsingular, generally nonsymmetric systems (implicit
/// drift-diffusion steps). Callers on small systems may fall back to
/// [`BandedLu`] on breakdown.
pub fn solve_nonsym(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    solve_nonsym_from(a, b, None, cfg)
}

/// [`solve_nonsym`] with an initial guess for warm-started time stepping.
pub fn solve_nonsym_from(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(Error::validation("rhs length does not match matrix"));
    }
    let inv_diag: Option<Vec<f64>> = if cfg.jacobi {
        Some(
            a.diagonal()
                .iter()
                .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    } else {
        None
    };
    let prec = |v: &[f64], out: &mut Vec<f64>| {
        out.clear();
        match &inv_diag {
            Some(d) => out.extend(v.iter().zip(d).map(|(vi, di)| vi * di)),
            None => out.extend_from_slice(v),
        }
    };

    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            residuals: Vec::new(),
        });
    }
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.mul_vec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm2(&r) <= cfg.rel_tol * bnorm {
        return Ok(SolveReport {
            residual: norm2(&r) / bnorm,
            x,
            iterations: 0,
            residuals: Vec::new(),
        });
    }
    let mut r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = Vec::with_capacity(n);
    let mut shat = Vec::with_capacity(n);
    let mut t = vec![0.0; n];
    let target = cfg.rel_tol * bnorm;
    let cap = cfg.iter_cap(n);
    let mut residuals = Vec::new();
    let mut rnorm = norm2(&r);
    let mut restarts = 0usize;

    // Lucky/serendipitous breakdowns (r0 falling orthogonal to the Krylov
    // residual) are handled by restarting with the current residual as the
    // new shadow vector.
    let restart = |r: &[f64],
                       r0: &mut Vec<f64>,
                       p: &mut Vec<f64>,
                       v: &mut Vec<f64>,
                       rho: &mut f64,
                       alpha: &mut f64,
                       omega: &mut f64,
                       restarts: &mut usize|
     -> Result<()> {
        *restarts += 1;
        if *restarts > 100 {
            return Err(Error::SolverBreakdown(
                "BiCGSTAB stalled after repeated restarts".into(),
            ));
        }
        r0.copy_from_slice(r);
        p.iter_mut().for_each(|x| *x = 0.0);
        v.iter_mut().for_each(|x| *x = 0.0);
        *rho = 1.0;
        *alpha = 1.0;
        *omega = 1.0;
        Ok(())
    };

    for it in 1..=cap {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-280 * bnorm * bnorm {
            if rnorm <= target {
                return Ok(SolveReport {
                    x,
                    iterations: it,
                    residual: rnorm / bnorm,
                    residuals,
                });
            }
            restart(&r, &mut r0, &mut p, &mut v, &mut rho, &mut alpha, &mut omega, &mut restarts)?;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        prec(&p, &mut phat);
        a.mul_vec(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-280 {
            restart(&r, &mut r0, &mut p, &mut v, &mut rho, &mut alpha, &mut omega, &mut restarts)?;
            continue;
        }
        alpha = rho / denom;
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        let snorm = norm2(&s);
        if snorm <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            residuals.push(snorm);
            return Ok(SolveReport {
                x,
                iterations: it,
                residual: snorm / bnorm,
                residuals,
            });
        }
        prec(&s, &mut shat);
        a.mul_vec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::SolverBreakdown("BiCGSTAB t = 0 with s != 0".into()));
        }
        omega = dot(&t, &s) / tt;
        if omega.abs() < 1e-280 {
            // accept the half step, then restart
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            r = s;
            rnorm = snorm;
            residuals.push(rnorm);
            restart(&r, &mut r0, &mut p, &mut v, &mut rho, &mut alpha, &mut omega, &mut restarts)?;
            continue;
        }
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        rnorm = norm2(&r);
        residuals.push(rnorm);
        if rnorm <= target {
            return Ok(SolveReport {
                x,
                iterations: it,
                residual: rnorm / bnorm,
                residuals,
            });
        }
    }
    Err(Error::SolverNonConvergence {
        iterations: cap,
        residual: rnorm / bnorm,
        target: cfg.rel_tol,
    })
}

/// Banded LU factorization without pivoting.
///
/// This is the direct fallback for the implicit transport steps: those
/// matrices are strictly diagonally dominant by columns (M-matrices), for
/// which elimination without pivoting is stable. Direct solves keep the
/// telescoping mass balance at machine precision, which the iterative
/// tolerance cannot.
pub struct BandedLu {
    n: usize,
    bw: usize,
    /// Row-major band storage: entry (i, j) with |i-j| <= bw lives at
    /// data[i * (2*bw+1) + (j - i + bw)].
    data: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<BandedLu> {
        let n = a.dim();
        let bw = a.bandwidth();
        let width = 2 * bw + 1;
        let mut data = vec![0.0; n * width];
        for r in 0..n {
            for (c, v) in a.row(r) {
                data[r * width + (c + bw - r)] = v;
            }
        }
        // in-place LU, L unit lower
        for k in 0..n {
            let piv = data[k * width + bw];
            if piv.abs() < 1e-300 {
                return Err(Error::SolverBreakdown(format!(
                    "banded LU zero pivot at row {k}"
                )));
            }
            let imax = (k + bw).min(n - 1);
            for i in (k + 1)..=imax {
                let l = data[i * width + (k + bw - i)] / piv;
                data[i * width + (k + bw - i)] = l;
                if l != 0.0 {
                    let jmax = (k + bw).min(n - 1);
                    for j in (k + 1)..=jmax {
                        let u = data[k * width + (j + bw - k)];
                        if u != 0.0 {
                            data[i * width + (j + bw - i)] -= l * u;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { n, bw, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let jlo = i.saturating_sub(bw);
            let mut acc = x[i];
            for j in jlo..i {
                acc -= self.data[i * width + (j + bw - i)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let jhi = (i + bw).min(n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=jhi {
                acc -= self.data[i * width + (j + bw - i)] * x[j];
            }
            x[i] = acc / self.data[i * width + bw];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> CsrMatrix {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        CsrMatrix::from_triplets(n, &trip).unwrap()
    }

    /// 1D periodic Laplacian: diag 2, wrap-around -1 off-diagonals.
    fn periodic_laplacian_1d(n: usize) -> CsrMatrix {
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            trip.push((i, (i + 1) % n, -1.0));
            trip.push((i, (i + n - 1) % n, -1.0));
        }
        CsrMatrix::from_triplets(n, &trip).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = identity(5);
        let b = vec![1.0, -2.0, 3.5, 0.0, 4.0];
        let rep = solve_spd(&a, &b, &SolverConfig::default()).unwrap();
        for (xi, bi) in rep.x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_laplacian_fourier_mode() {
        // First Fourier mode is an eigenvector with eigenvalue 2 - 2 cos(2 pi / n).
        let n = 8;
        let a = periodic_laplacian_1d(n);
        let b: Vec<f64> = (0..n)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        let lambda = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        let cfg = SolverConfig {
            null_space: NullSpace::Constants {
                weights: vec![1.0; n],
            },
            ..Default::default()
        };
        let rep = solve_spd(&a, &b, &cfg).unwrap();
        for (xi, bi) in rep.x.iter().zip(&b) {
            assert!((xi - bi / lambda).abs() < 1e-9, "{xi} vs {}", bi / lambda);
        }
        let mean: f64 = rep.x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn singular_neumann_zero_rhs() {
        let a = periodic_laplacian_1d(6);
        let cfg = SolverConfig {
            null_space: NullSpace::Constants {
                weights: vec![1.0; 6],
            },
            ..Default::default()
        };
        let rep = solve_spd(&a, &vec![0.0; 6], &cfg).unwrap();
        assert!(rep.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incompatible_rhs_rejected() {
        let a = periodic_laplacian_1d(6);
        let cfg = SolverConfig {
            null_space: NullSpace::Constants {
                weights: vec![1.0; 6],
            },
            ..Default::default()
        };
        let b = vec![1.0; 6]; // constant rhs is exactly the null direction
        match solve_spd(&a, &b, &cfg) {
            Err(Error::IncompatibleRhs { .. }) => {}
            other => panic!("expected incompatibility error, got {other:?}"),
        }
    }

    #[test]
    fn nonsym_diagonal() {
        let trip: Vec<_> = (0..4).map(|i| (i, i, 2.0)).collect();
        let a = CsrMatrix::from_triplets(4, &trip).unwrap();
        let rep = solve_nonsym(&a, &vec![1.0; 4], &SolverConfig::default()).unwrap();
        for xi in rep.x {
            assert!((xi - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsym_upper_bidiagonal() {
        // {2 on diag, -1 superdiag}, b = (0, 0, 2) -> x = (0.25, 0.5, 1) by
        // back-substitution.
        let trip = vec![
            (0, 0, 2.0),
            (0, 1, -1.0),
            (1, 1, 2.0),
            (1, 2, -1.0),
            (2, 2, 2.0),
        ];
        let a = CsrMatrix::from_triplets(3, &trip).unwrap();
        let rep = solve_nonsym(&a, &[0.0, 0.0, 2.0], &SolverConfig::default()).unwrap();
        let expect = [0.25, 0.5, 1.0];
        for (xi, ei) in rep.x.iter().zip(&expect) {
            assert!((xi - ei).abs() < 1e-10, "{xi} vs {ei}");
        }
    }

    /// Dense LU with partial pivoting; test-only oracle, independent of the
    /// Krylov path it checks.
    fn dense_lu_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, piv);
            x.swap(k, piv);
            for i in (k + 1)..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= m[i][j] * x[j];
            }
            x[i] /= m[i][i];
        }
        x
    }

    /// Deterministic xorshift so the test needs no RNG dependency.
    struct XorShift(u64);
    impl XorShift {
        fn next_f64(&mut self) -> f64 {
            let mut x = self.0;
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            self.0 = x;
            (x >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn nonsym_matches_dense_lu_oracle() {
        let n = 50;
        let mut rng = XorShift(0x9e3779b97f4a7c15);
        let mut dense = vec![vec![0.0; n]; n];
        let mut trip = Vec::new();
        for i in 0..n {
            let mut offsum = 0.0;
            for j in 0..n {
                if i != j && rng.next_f64() < 0.1 {
                    let v = rng.next_f64() - 0.5;
                    dense[i][j] = v;
                    trip.push((i, j, v));
                    offsum += v.abs();
                }
            }
            let d = offsum + 1.0 + rng.next_f64();
            dense[i][i] = d;
            trip.push((i, i, d));
        }
        let a = CsrMatrix::from_triplets(n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
        let expect = dense_lu_solve(&dense, &b);
        let rep = solve_nonsym(&a, &b, &SolverConfig::default()).unwrap();
        for (xi, ei) in rep.x.iter().zip(&expect) {
            assert!((xi - ei).abs() < 1e-8, "{xi} vs {ei}");
        }
    }

    #[test]
    fn banded_lu_matches_dense_oracle() {
        let n = 40;
        let mut rng = XorShift(0x1234_5678_9abc_def0);
        let mut dense = vec![vec![0.0; n]; n];
        let mut trip = Vec::new();
        let bw = 5usize;
        for i in 0..n {
            let mut offsum = 0.0;
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                if i != j {
                    let v = rng.next_f64() - 0.5;
                    dense[i][j] = v;
                    trip.push((i, j, v));
                    offsum += v.abs();
                }
            }
            let d = offsum + 0.5;
            dense[i][i] = d;
            trip.push((i, i, d));
        }
        let a = CsrMatrix::from_triplets(n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let lu = BandedLu::factor(&a).unwrap();
        let x = lu.solve(&b);
        let expect = dense_lu_solve(&dense, &b);
        for (xi, ei) in x.iter().zip(&expect) {
            assert!((xi - ei).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_residuals_non_increasing() {
        // Recorded residual history on SPD systems of the kind this crate
        // assembles (weakly diagonally dominant Laplacians).
        for n in [16usize, 64, 256] {
            let a = periodic_laplacian_1d(n);
            let mut rng = XorShift(n as u64 * 7919 + 1);
            let mut b: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
            let mean: f64 = b.iter().sum::<f64>() / n as f64;
            for v in b.iter_mut() {
                *v -= mean;
            }
            let cfg = SolverConfig {
                null_space: NullSpace::Constants {
                    weights: vec![1.0; n],
                },
                ..Default::default()
            };
            let rep = solve_spd(&a, &b, &cfg).unwrap();
            for w in rep.residuals.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12),
                    "residual increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn mean_zero_gauge_tight() {
        let n = 64;
        let a = periodic_laplacian_1d(n);
        let mut rng = XorShift(42);
        let mut b: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
        let mean: f64 = b.iter().sum::<f64>() / n as f64;
        for v in b.iter_mut() {
            *v -= mean;
        }
        let cfg = SolverConfig {
            null_space: NullSpace::Constants {
                weights: vec![0.25; n],
            },
            ..Default::default()
        };
        let rep = solve_spd(&a, &b, &cfg).unwrap();
        let wmean: f64 = rep.x.iter().map(|v| v * 0.25).sum::<f64>() / (0.25 * n as f64);
        let xmax = rep.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(wmean.abs() <= 1e-12 * xmax.max(1e-300));
    }
}
