//! Small dense real matrices: products, inverses, exponentials and a
//! self-contained nonsymmetric eigenvalue solver (balancing, Householder
//! reduction to Hessenberg form, Francis double-shift QR), plus the
//! eigenprojections and cross-ratios built on top of it.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Largest dimension the eigen solver accepts.
pub const MAX_DIM: usize = 10;

/// Minimum modulus gap `|l1| / |l2|` for a matrix to count as proximal.
pub const PROXIMAL_GAP: f64 = 1.0 + 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("QR iteration did not converge")]
    NoConvergence,
    #[error("matrix is not proximal (modulus gap {gap})")]
    NotProximal { gap: f64 },
    #[error("degenerate configuration")]
    DegenerateConfiguration,
    #[error("matrix is singular")]
    Singular,
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Square matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "rows must have length {n}");
            data.extend_from_slice(r);
        }
        Matrix { n, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Row vector times matrix, i.e. the action on linear forms.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| v[i] * self[(i, j)]).sum())
            .collect()
    }

    pub fn det(&self) -> f64 {
        match Lu::factor(self) {
            Some(lu) => lu.det(),
            None => 0.0,
        }
    }

    pub fn inverse(&self) -> Result<Matrix, MatError> {
        Lu::factor(self).map(|lu| lu.inverse()).ok_or(MatError::Singular)
    }

    pub fn pow(&self, k: usize) -> Matrix {
        let mut result = Matrix::identity(self.n);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        result
    }

    /// Matrix exponential by scaling and squaring with a Taylor series.
    pub fn exp(&self) -> Matrix {
        let n = self.n;
        let norm = self.norm1();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let a = self.scale(0.5f64.powi(squarings as i32));
        let mut term = Matrix::identity(n);
        let mut sum = Matrix::identity(n);
        for k in 1..=30 {
            term = (&term * &a).scale(1.0 / k as f64);
            sum = &sum + &term;
            if term.max_abs() <= f64::EPSILON * 1e-3 * sum.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    /// Largest entrywise difference.
    pub fn max_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Matrix { n, data: out }
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// LU factorisation with partial pivoting.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn factor(a: &Matrix) -> Option<Lu> {
        let n = a.n;
        let mut lu = a.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap();
            if lu[p * n + k] == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(p * n + j, k * n + j);
                }
                piv.swap(p, k);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Some(Lu { n, lu, piv, sign })
    }

    fn det(&self) -> f64 {
        (0..self.n).fold(self.sign, |d, i| d * self.lu[i * self.n + i])
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Eigenvalues sorted by decreasing modulus (ties: decreasing real part, then
/// decreasing imaginary part), with the proximality diagnosis.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenData {
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors as columns, present when every eigenvalue is real
    /// and simple and they were requested.
    pub eigenvectors: Option<Matrix>,
    /// Top modulus attained by a unique simple real eigenvalue.
    pub proximal: bool,
    /// `|l1| / |l2|` (infinite when `l2 = 0` or `d = 1`).
    pub gap_ratio: f64,
}

impl EigenData {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues[0].norm()
    }

    pub fn all_real(&self) -> bool {
        self.eigenvalues.iter().all(|z| z.im == 0.0)
    }
}

fn check_input(a: &Matrix) -> Result<(), MatError> {
    if a.n > MAX_DIM {
        return Err(MatError::DimensionTooLarge(a.n));
    }
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    Ok(())
}

/// Eigenvalues of `a`.
pub fn eigen(a: &Matrix) -> Result<EigenData, MatError> {
    check_input(a)?;
    let n = a.n;
    let scale = a.max_abs();
    let mut values = if scale == 0.0 {
        vec![Complex64::new(0.0, 0.0); n]
    } else if n == 1 {
        vec![Complex64::new(a.data[0], 0.0)]
    } else if n == 2 {
        eig2(a)
    } else {
        let b = a.scale(1.0 / scale);
        let mut vals = hqr(hessenberg(balance(b.clone())))?;
        polish_real(&b, &mut vals);
        vals.iter_mut().for_each(|z| *z *= scale);
        vals
    };
    sort_eigenvalues(&mut values);
    let (proximal, gap_ratio) = proximality(&values);
    Ok(EigenData {
        eigenvalues: values,
        eigenvectors: None,
        proximal,
        gap_ratio,
    })
}

/// Eigenvalues together with real eigenvectors when every eigenvalue is real
/// and simple.
pub fn eigen_with_vectors(a: &Matrix) -> Result<EigenData, MatError> {
    let mut data = eigen(a)?;
    let vals = &data.eigenvalues;
    let simple = vals.windows(2).all(|p| {
        let gap = (p[0] - p[1]).norm();
        gap > 1e-10 * (p[0].norm() + p[1].norm())
    });
    if data.all_real() && simple {
        let n = a.n;
        let mut v = Matrix::zeros(n);
        for (k, z) in vals.iter().enumerate() {
            let x = inverse_iteration(a, z.re);
            for i in 0..n {
                v[(i, k)] = x[i];
            }
        }
        data.eigenvectors = Some(v);
    }
    Ok(data)
}

fn eig2(a: &Matrix) -> Vec<Complex64> {
    let (p, q, r, s) = (a.data[0], a.data[1], a.data[2], a.data[3]);
    let half_tr = 0.5 * (p + s);
    let det = p * s - q * r;
    // discriminant written to avoid cancellation in tr^2/4 - det
    let disc = 0.25 * (p - s) * (p - s) + q * r;
    if disc >= 0.0 {
        let root = disc.sqrt();
        let big = if half_tr >= 0.0 {
            half_tr + root
        } else {
            half_tr - root
        };
        let small = if big != 0.0 { det / big } else { half_tr - root };
        vec![Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let im = (-disc).sqrt();
        vec![Complex64::new(half_tr, im), Complex64::new(half_tr, -im)]
    }
}

fn sort_eigenvalues(v: &mut [Complex64]) {
    v.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
}

fn proximality(v: &[Complex64]) -> (bool, f64) {
    if v.len() == 1 {
        return (true, f64::INFINITY);
    }
    let top = v[0].norm();
    let next = v[1].norm();
    let gap = if next == 0.0 {
        f64::INFINITY
    } else {
        top / next
    };
    (v[0].im == 0.0 && top > 0.0 && gap > PROXIMAL_GAP, gap)
}

/// Parlett-Reinsch balancing by powers of two.
fn balance(mut a: Matrix) -> Matrix {
    let n = a.n;
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
    a
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(mut h: Matrix) -> Matrix {
    let n = h.n;
    let mut ort = vec![0.0; n];
    for m in 1..n.saturating_sub(1) {
        let scale: f64 = (m..n).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..n).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let g = if ort[m] > 0.0 { -hh.sqrt() } else { hh.sqrt() };
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let f = (m..n).rev().map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in m..n {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..n {
            let f = (m..n).rev().map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in m..n {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
        for i in m + 1..n {
            h[(i, m - 1)] = 0.0;
        }
    }
    h
}

/// Francis double-shift QR on a Hessenberg matrix; eigenvalues only.
fn hqr(mut h: Matrix) -> Result<Vec<Complex64>, MatError> {
    let nn = h.n;
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];
    let eps = f64::EPSILON;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0;
    let mut total_iter = 0;
    let (mut p, mut q, mut r, mut z);
    let (mut x, mut y, mut w);
    let at = |h: &Matrix, i: isize, j: isize| h[(i as usize, j as usize)];
    while n >= 0 {
        // look for a single small subdiagonal element
        let mut l = n;
        while l > 0 {
            let mut s = at(&h, l - 1, l - 1).abs() + at(&h, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at(&h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == n {
            wr[n as usize] = at(&h, n, n) + exshift;
            wi[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = at(&h, n, n - 1) * at(&h, n - 1, n);
            p = (at(&h, n - 1, n - 1) - at(&h, n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = at(&h, n, n) + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[(n - 1) as usize] = x + z;
                wr[n as usize] = if z != 0.0 { x - w / z } else { x + z };
                wi[(n - 1) as usize] = 0.0;
                wi[n as usize] = 0.0;
            } else {
                wr[(n - 1) as usize] = x + p;
                wr[n as usize] = x + p;
                wi[(n - 1) as usize] = z;
                wi[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = at(&h, n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = at(&h, n - 1, n - 1);
                w = at(&h, n, n - 1) * at(&h, n - 1, n);
            }
            if iter == 10 {
                // exceptional shift
                exshift += x;
                for i in 0..=n {
                    h[(i as usize, i as usize)] -= x;
                }
                let s = at(&h, n, n - 1).abs() + at(&h, n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                let mut s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=n {
                        h[(i as usize, i as usize)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iter += 1;
            if total_iter > 60 * nn {
                return Err(MatError::NoConvergence);
            }
            // look for two consecutive small subdiagonal elements
            let mut m = n - 2;
            loop {
                z = at(&h, m, m);
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / at(&h, m + 1, m) + at(&h, m, m + 1);
                q = at(&h, m + 1, m + 1) - z - r - s0;
                r = at(&h, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = at(&h, m, m - 1).abs() * (q.abs() + r.abs());
                let rhs = eps
                    * (p.abs()
                        * (at(&h, m - 1, m - 1).abs() + z.abs() + at(&h, m + 1, m + 1).abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=n {
                h[(i as usize, (i - 2) as usize)] = 0.0;
                if i > m + 2 {
                    h[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }
            // double QR step on rows l..=n and columns m..=n
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = at(&h, k, k - 1);
                    q = at(&h, k + 1, k - 1);
                    r = if notlast { at(&h, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k as usize, (k - 1) as usize)] = -s * x;
                    } else if l != m {
                        h[(k as usize, (k - 1) as usize)] = -at(&h, k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn as isize {
                        let mut pp = at(&h, k, j) + q * at(&h, k + 1, j);
                        if notlast {
                            pp += r * at(&h, k + 2, j);
                            h[((k + 2) as usize, j as usize)] -= pp * z;
                        }
                        h[(k as usize, j as usize)] -= pp * x;
                        h[((k + 1) as usize, j as usize)] -= pp * y;
                    }
                    let upper = n.min(k + 3);
                    for i in 0..=upper {
                        let mut pp = x * at(&h, i, k) + y * at(&h, i, k + 1);
                        if notlast {
                            pp += z * at(&h, i, k + 2);
                            h[(i as usize, (k + 2) as usize)] -= pp * r;
                        }
                        h[(i as usize, k as usize)] -= pp;
                        h[(i as usize, (k + 1) as usize)] -= pp * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

/// Newton refinement of simple real eigenvalues on `det(A - x I)`, using
/// `d/dx log det(A - x I) = -tr((A - x I)^{-1})`.
fn polish_real(a: &Matrix, vals: &mut [Complex64]) {
    let n = a.n;
    let snapshot = vals.to_vec();
    for (k, z) in vals.iter_mut().enumerate() {
        if z.im != 0.0 {
            continue;
        }
        let nearest = snapshot
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, w)| (w - *z).norm())
            .fold(f64::INFINITY, f64::min);
        let mut x = z.re;
        for _ in 0..2 {
            let mut shifted = a.clone();
            for i in 0..n {
                shifted[(i, i)] -= x;
            }
            let Some(lu) = Lu::factor(&shifted) else { break };
            let tr = lu.inverse().trace();
            if !tr.is_finite() || tr == 0.0 {
                break;
            }
            let step = 1.0 / tr;
            // only accept small corrections that stay well inside the gap
            if step.abs() > 1e-6 * (1.0 + x.abs()) || step.abs() > 0.1 * nearest {
                break;
            }
            x += step;
        }
        z.re = x;
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    // fix the sign so the largest entry is positive
    if let Some(m) = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
        if m < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Unit eigenvector for the real eigenvalue `lambda`, by inverse iteration.
fn inverse_iteration(a: &Matrix, lambda: f64) -> Vec<f64> {
    let n = a.n;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut shifted = a.scale(1.0 / scale);
    let mu = lambda / scale * (1.0 + 1e-13) + 1e-14;
    for i in 0..n {
        shifted[(i, i)] -= mu;
    }
    let lu = match Lu::factor(&shifted) {
        Some(lu) => lu,
        None => {
            for i in 0..n {
                shifted[(i, i)] -= 1e-12;
            }
            Lu::factor(&shifted).expect("perturbed shift is nonsingular")
        }
    };
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    normalize(&mut x);
    for _ in 0..4 {
        x = lu.solve(&x);
        normalize(&mut x);
    }
    x
}

/// Largest modulus of the eigenvalues.
pub fn spectral_radius(a: &Matrix) -> Result<f64, MatError> {
    Ok(eigen(a)?.spectral_radius())
}

/// The top eigenvalue with its sign; requires proximality.
pub fn top_eigenvalue(a: &Matrix) -> Result<f64, MatError> {
    let e = eigen(a)?;
    if !e.proximal {
        return Err(MatError::NotProximal { gap: e.gap_ratio });
    }
    Ok(e.eigenvalues[0].re)
}

/// Rank-one projection onto an eigenline parallel to the other eigenspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection(pub Matrix);

impl Projection {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Right and left unit eigenvectors for the top eigenvalue of a proximal
/// matrix, scaled so that `form . vector > 0`.
pub fn top_eigenpair(a: &Matrix) -> Result<(f64, Vec<f64>, Vec<f64>), MatError> {
    let lambda = top_eigenvalue(a)?;
    let v = inverse_iteration(a, lambda);
    let mut w = inverse_iteration(&a.transpose(), lambda);
    let dot: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
    if dot.abs() < 1e-14 {
        return Err(MatError::DegenerateConfiguration);
    }
    if dot < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((lambda, v, w))
}

/// `p_1(A)`: projection onto the top eigenline parallel to the sum of the
/// other generalized eigenspaces.
pub fn eigenprojection_top(a: &Matrix) -> Result<Projection, MatError> {
    let (_, v, w) = top_eigenpair(a)?;
    let dot: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
    let n = a.n;
    let mut p = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = v[i] * w[j] / dot;
        }
    }
    Ok(Projection(p))
}

/// Linear form whose kernel is the repelling hyperplane of `g`: the top left
/// eigenvector of `g^{-1}`.
pub fn repelling_form(g: &Matrix) -> Result<Vec<f64>, MatError> {
    let inv = g.inverse()?;
    let (_, _, w) = top_eigenpair(&inv)?;
    Ok(w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// `[phi, psi, v, w] = phi(v) psi(w) / (phi(w) psi(v))`.
///
/// Arguments are normalised first, so the result only depends on their
/// projective classes.
pub fn cross_ratio_forms(phi: &[f64], psi: &[f64], v: &[f64], w: &[f64]) -> Result<f64, MatError> {
    let len = phi.len();
    for x in [psi, v, w] {
        if x.len() != len {
            return Err(MatError::DimensionMismatch(len, x.len()));
        }
    }
    if [phi, psi, v, w].iter().any(|x| dot(x, x) == 0.0) {
        return Err(MatError::DegenerateConfiguration);
    }
    let (phi, psi, v, w) = (unit(phi), unit(psi), unit(v), unit(w));
    let phi_w = dot(&phi, &w);
    let psi_v = dot(&psi, &v);
    if phi_w.abs() < 1e-12 || psi_v.abs() < 1e-12 {
        return Err(MatError::DegenerateConfiguration);
    }
    Ok(dot(&phi, &v) * dot(&psi, &w) / (phi_w * psi_v))
}

/// A point of the boundary circle `R u {inf}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

impl BoundaryPoint {
    /// Image under `z -> (a z + b) / (c z + d)`.
    pub fn mobius(self, m: &Matrix) -> BoundaryPoint {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        match self {
            BoundaryPoint::Infinity if c == 0.0 => BoundaryPoint::Infinity,
            BoundaryPoint::Infinity => BoundaryPoint::Finite(a / c),
            BoundaryPoint::Finite(x) => {
                let den = c * x + d;
                if den == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite((a * x + b) / den)
                }
            }
        }
    }
}

/// Boundary cross-ratio `(a - c)(b - d) / ((a - d)(b - c))`.
///
/// Each point appears in exactly one numerator and one denominator factor,
/// so a point at infinity cancels out.
pub fn cross_ratio_boundary(
    a: BoundaryPoint,
    b: BoundaryPoint,
    c: BoundaryPoint,
    d: BoundaryPoint,
) -> Result<f64, MatError> {
    use BoundaryPoint::*;
    let diff = |x: BoundaryPoint, y: BoundaryPoint| -> Result<Option<f64>, MatError> {
        match (x, y) {
            (Finite(x), Finite(y)) => Ok(Some(x - y)),
            (Infinity, Infinity) => Err(MatError::DegenerateConfiguration),
            _ => Ok(None),
        }
    };
    let num: Vec<Option<f64>> = vec![diff(a, c)?, diff(b, d)?];
    let den: Vec<Option<f64>> = vec![diff(a, d)?, diff(b, c)?];
    let prod = |fs: &[Option<f64>]| fs.iter().flatten().product::<f64>();
    let den_value = prod(&den);
    if den_value == 0.0 {
        return Err(MatError::DegenerateConfiguration);
    }
    Ok(prod(&num) / den_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        Matrix::from_row_major(n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Coefficients of det(x I - A), highest degree first, by cofactor
    /// expansion over permutations of a symbolic polynomial matrix.
    fn charpoly_cofactor(a: &Matrix) -> Vec<f64> {
        fn det_poly(m: &[Vec<Vec<f64>>]) -> Vec<f64> {
            let n = m.len();
            if n == 1 {
                return m[0][0].clone();
            }
            let mut total = vec![0.0; n + 1];
            for j in 0..n {
                let minor: Vec<Vec<Vec<f64>>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != j)
                            .map(|(_, p)| p.clone())
                            .collect()
                    })
                    .collect();
                let sub = det_poly(&minor);
                let entry = &m[0][j];
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                for (i, e) in entry.iter().enumerate() {
                    for (k, s) in sub.iter().enumerate() {
                        if i + k <= n {
                            total[i + k] += sign * e * s;
                        }
                    }
                }
            }
            total
        }
        let n = a.dim();
        // polynomial entries stored lowest degree first
        let m: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            vec![-a[(i, j)], 1.0]
                        } else {
                            vec![-a[(i, j)]]
                        }
                    })
                    .collect()
            })
            .collect();
        let mut p = det_poly(&m);
        p.resize(n + 1, 0.0);
        p.reverse();
        p
    }

    fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, x) in c.iter().enumerate() {
                next[i] += x;
                next[i + 1] -= x * r;
            }
            c = next;
        }
        c.iter().map(|z| z.re).collect()
    }

    #[test]
    fn diagonal_and_golden() {
        let e = eigen(&Matrix::diag(&[2.0, 0.5])).unwrap();
        assert_eq!(e.eigenvalues[0].re, 2.0);
        assert_eq!(e.eigenvalues[1].re, 0.5);
        let e = eigen(&Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]])).unwrap();
        let s5 = 5f64.sqrt();
        assert!((e.eigenvalues[0].re - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((e.eigenvalues[1].re - (3.0 - s5) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_reproduce_charpoly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=5 {
            for _ in 0..20 {
                let a = random_matrix(&mut rng, n);
                let e = eigen(&a).unwrap();
                let from_roots = poly_from_roots(&e.eigenvalues);
                let oracle = charpoly_cofactor(&a);
                for (x, y) in from_roots.iter().zip(&oracle) {
                    assert!((x - y).abs() < 1e-10, "n={n}: {from_roots:?} vs {oracle:?}");
                }
            }
        }
    }

    #[test]
    fn product_of_eigenvalues_is_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=MAX_DIM {
            let a = random_matrix(&mut rng, n);
            let e = eigen(&a).unwrap();
            let prod = e
                .eigenvalues
                .iter()
                .fold(Complex64::new(1.0, 0.0), |p, z| p * z);
            let det = a.det();
            assert!((prod.re - det).abs() <= 1e-6 * det.abs().max(1e-3), "n={n}");
            assert!(prod.im.abs() <= 1e-6 * det.abs().max(1e-3));
        }
    }

    #[test]
    fn companion_and_defective_inputs_converge() {
        // shift matrix (nilpotent) and a rotation
        let mut shift = Matrix::zeros(4);
        for i in 0..3 {
            shift[(i, i + 1)] = 1.0;
        }
        let e = eigen(&shift).unwrap();
        assert!(e.spectral_radius() < 1e-3);
        let th: f64 = 0.7;
        let rot = Matrix::from_rows(&[&[th.cos(), -th.sin()], &[th.sin(), th.cos()]]);
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-15);
        assert!(!eigen(&rot).unwrap().proximal);
    }

    #[test]
    fn ordering_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 7);
        let x = eigen(&a).unwrap();
        let y = eigen(&a).unwrap();
        for (p, q) in x.eigenvalues.iter().zip(&y.eigenvalues) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
        for p in x.eigenvalues.windows(2) {
            assert!(p[0].norm() >= p[1].norm());
        }
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Matrix::diag(&[3.0, 1.0, 1.0 / 3.0])).unwrap() - 3.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 4);
        let u = random_matrix(&mut rng, 4);
        let conj = &(&u * &a) * &u.inverse().unwrap();
        let (x, y) = (spectral_radius(&a).unwrap(), spectral_radius(&conj).unwrap());
        assert!((x - y).abs() < 1e-9 * x);
    }

    #[test]
    fn spectral_radius_of_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 20 {
            let a = random_matrix(&mut rng, 4);
            if !eigen(&a).unwrap().proximal {
                continue;
            }
            let r = spectral_radius(&a).unwrap();
            for n in 1..=10 {
                let rn = spectral_radius(&a.pow(n)).unwrap();
                assert!((rn - r.powi(n as i32)).abs() <= 1e-7 * r.powi(n as i32));
            }
            checked += 1;
        }
    }

    #[test]
    fn projection_examples() {
        let p = eigenprojection_top(&Matrix::diag(&[2.0, 0.5])).unwrap();
        assert!(p.0.max_diff(&Matrix::diag(&[1.0, 0.0])) < 1e-14);
        assert!(matches!(
            eigenprojection_top(&Matrix::identity(2)),
            Err(MatError::NotProximal { .. })
        ));
    }

    #[test]
    fn projections_reconstruct_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0;
        while checked < 10 {
            let a = random_matrix(&mut rng, 4);
            let e = eigen_with_vectors(&a).unwrap();
            let Some(v) = e.eigenvectors.as_ref() else { continue };
            let winv = v.inverse().unwrap();
            // p_k = v_k (row k of V^{-1})
            let mut rebuilt = Matrix::zeros(4);
            for (k, lambda) in e.eigenvalues.iter().enumerate() {
                for i in 0..4 {
                    for j in 0..4 {
                        rebuilt[(i, j)] += lambda.re * v[(i, k)] * winv[(k, j)];
                    }
                }
            }
            assert!(rebuilt.max_diff(&a) < 1e-7);
            let p = eigenprojection_top(&a).unwrap().0;
            assert!((&p * &p).max_diff(&p) < 1e-8);
            let lambda = e.eigenvalues[0].re;
            assert!((&a * &p).max_diff(&p.scale(lambda)) < 1e-8 * lambda.abs().max(1.0));
            assert!((&p * &a).max_diff(&p.scale(lambda)) < 1e-8 * lambda.abs().max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn projection_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 10 {
            let a = random_matrix(&mut rng, 3);
            if !eigen(&a).unwrap().proximal {
                continue;
            }
            let u = random_matrix(&mut rng, 3);
            let ui = u.inverse().unwrap();
            let lhs = eigenprojection_top(&(&(&u * &a) * &ui)).unwrap().0;
            let rhs = &(&u * &eigenprojection_top(&a).unwrap().0) * &ui;
            assert!(lhs.max_diff(&rhs) < 1e-7 * rhs.max_abs().max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn exp_matches_diagonal_and_inverse() {
        let d = Matrix::diag(&[0.3, -1.2, 2.0]);
        let e = d.exp();
        for (i, x) in [0.3f64, -1.2, 2.0].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-14 * x.exp());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 4).scale(3.0);
        let prod = &x.exp() * &x.scale(-1.0).exp();
        assert!(prod.max_diff(&Matrix::identity(4)) < 1e-11);
    }

    #[test]
    fn cross_ratio_trivial_cases() {
        let phi = [1.0, 2.0, -0.5];
        let psi = [0.3, -1.0, 2.0];
        let v = [1.0, 1.0, 1.0];
        let w = [0.2, -0.7, 1.5];
        assert!((cross_ratio_forms(&phi, &phi, &v, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!((cross_ratio_forms(&phi, &psi, &v, &v).unwrap() - 1.0).abs() < 1e-15);
        let zero_pair = [2.0, -1.0, 0.0];
        assert_eq!(
            cross_ratio_forms(&phi, &psi, &v, &zero_pair),
            Err(MatError::DegenerateConfiguration)
        );
    }

    #[test]
    fn boundary_cross_ratio_examples() {
        use BoundaryPoint::*;
        let b = |x| cross_ratio_boundary(Finite(0.0), Infinity, Finite(1.0), Finite(x)).unwrap();
        assert!((b(1.0) - 1.0).abs() < 1e-15);
        assert!((b(1.0 + 1e-9) - 1.0).abs() < 2e-9);
        let v = cross_ratio_boundary(Finite(0.3), Finite(-2.0), Finite(5.0), Finite(5.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(
            cross_ratio_boundary(Finite(1.0), Finite(2.0), Finite(2.0), Finite(3.0)),
            Err(MatError::DegenerateConfiguration)
        );
    }

    #[test]
    fn boundary_cross_ratio_mobius_invariant() {
        use BoundaryPoint::*;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let pts: Vec<BoundaryPoint> = (0..4).map(|_| Finite(rng.gen_range(-5.0..5.0))).collect();
            let mut m = random_matrix(&mut rng, 2);
            let det = m.det();
            if det.abs() < 1e-2 {
                continue;
            }
            if det < 0.0 {
                m[(0, 0)] = -m[(0, 0)];
                m[(0, 1)] = -m[(0, 1)];
            }
            let before = cross_ratio_boundary(pts[0], pts[1], pts[2], pts[3]).unwrap();
            let moved: Vec<BoundaryPoint> = pts.iter().map(|p| p.mobius(&m)).collect();
            let after = cross_ratio_boundary(moved[0], moved[1], moved[2], moved[3]).unwrap();
            assert!((before - after).abs() <= 1e-10 * before.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn cross_ratio_scale_invariant(
            s in proptest::array::uniform4(0.1f64..10.0),
            flip in proptest::array::uniform4(proptest::bool::ANY),
        ) {
            let phi = [1.0, 2.0, -0.5, 0.7];
            let psi = [0.3, -1.0, 2.0, 0.1];
            let v = [1.0, 1.0, 1.0, -0.4];
            let w = [0.2, -0.7, 1.5, 0.9];
            let sgn = |b: bool| if b { -1.0 } else { 1.0 };
            let sc = |x: &[f64; 4], k: usize| x.map(|e| e * s[k] * sgn(flip[k]));
            let base = cross_ratio_forms(&phi, &psi, &v, &w).unwrap();
            let scaled = cross_ratio_forms(&sc(&phi, 0), &sc(&psi, 1), &sc(&v, 2), &sc(&w, 3)).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }
}
