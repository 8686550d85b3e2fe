use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

/// Row-by-row builder; entries of a row may repeat a column and are summed.
#[derive(Debug)]
pub struct CsrBuilder<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    open: Vec<(usize, T)>,
}

impl<T: Real> CsrBuilder<T> {
    pub fn new(n: usize) -> Self {
        CsrBuilder { n, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new(), open: Vec::new() }
    }

    pub fn add(&mut self, col: usize, val: T) {
        debug_assert!(col < self.n);
        self.open.push((col, val));
    }

    pub fn finish_row(&mut self) {
        self.open.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in &self.open {
            if last == Some(c) {
                let k = self.vals.len() - 1;
                self.vals[k] = self.vals[k] + v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.open.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix<T> {
        assert_eq!(self.row_ptr.len(), self.n + 1, "every row must be finished");
        CsrMatrix { n: self.n, row_ptr: self.row_ptr, cols: self.cols, vals: self.vals }
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).find(|e| e.0 == i).map_or(T::zero(), |e| e.1)).collect()
    }

    pub fn mul_into(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).fold(T::zero(), |acc, (c, v)| acc + v * x[c]);
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        self.mul_into(x, &mut out);
        out
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// ‖b − Ax‖ / ‖b‖ at exit.
    pub residual: f64,
}

/// Jacobi-preconditioned BiCGSTAB to relative residual `tol`.
pub fn bicgstab<T: Real>(a: &CsrMatrix<T>, b: &[T], tol: f64, max_iter: usize) -> Result<SolveReport<T>> {
    let n = a.dim();
    let bnorm = to_f64(norm(b));
    if bnorm == 0.0 {
        return Ok(SolveReport { x: vec![T::zero(); n], iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d == T::zero() { T::one() } else { d.recip() })
        .collect();
    let precond = |v: &[T], out: &mut [T]| {
        for ((o, &x), &m) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = x * m;
        }
    };
    // Start from the Jacobi guess.
    let mut x = vec![T::zero(); n];
    precond(b, &mut x);
    let mut r = a.mul(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut res = to_f64(norm(&r)) / bnorm;
    for it in 1..=max_iter {
        if res <= tol {
            return Ok(SolveReport { x, iterations: it - 1, residual: res });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() || omega == T::zero() {
            // Breakdown: restart the shadow residual.
            r_hat.copy_from_slice(&r);
            rho = T::one();
            alpha = T::one();
            omega = T::one();
            v.iter_mut().for_each(|e| *e = T::zero());
            p.iter_mut().for_each(|e| *e = T::zero());
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.mul_into(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == T::zero() {
            r_hat.copy_from_slice(&r);
            rho = T::one();
            alpha = T::one();
            omega = T::one();
            v.iter_mut().for_each(|e| *e = T::zero());
            p.iter_mut().for_each(|e| *e = T::zero());
            continue;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if to_f64(norm(&s)) / bnorm <= tol {
            for i in 0..n {
                x[i] = x[i] + alpha * y[i];
            }
            let true_res = residual_of(a, &x, b, bnorm);
            if true_res <= tol {
                return Ok(SolveReport { x, iterations: it, residual: true_res });
            }
            r = s.clone();
            res = true_res;
            continue;
        }
        precond(&s, &mut z);
        a.mul_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == T::zero() { T::zero() } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] = x[i] + alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = to_f64(norm(&r)) / bnorm;
        if res <= tol {
            // Guard against drift of the recursive residual.
            res = residual_of(a, &x, b, bnorm);
            if res > tol {
                r = a.mul(&x);
                for (ri, &bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
            }
        }
    }
    if res <= tol {
        return Ok(SolveReport { x, iterations: max_iter, residual: res });
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: res })
}

fn residual_of<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T], bnorm: f64) -> f64 {
    let ax = a.mul(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &yi)| bi - yi).collect();
    to_f64(norm(&r)) / bnorm
}
