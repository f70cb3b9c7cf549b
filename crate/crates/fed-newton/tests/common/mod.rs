//! Dense linear-algebra oracles for the integration tests.
//!
//! Everything here is intentionally independent of the library's solvers:
//! matrices are materialized, systems are solved by Gaussian elimination,
//! and spectra come either from explicit construction (Q diag Q^T) or a
//! cyclic Jacobi eigensolver. The library itself never forms these
//! matrices; the tests do exactly that to cross-check it.

#![allow(dead_code)]

use fed_newton::glm::Sample;
use fed_newton::ParamVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub a: Vec<f64>, // row-major
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Dense::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Dense::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.a[i * diag.len() + i] = *d;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn add_assign(&mut self, other: &Dense, scale: f64) {
        assert_eq!(self.n, other.n);
        for (x, y) in self.a.iter_mut().zip(other.a.iter()) {
            *x += scale * y;
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn apply(&self) -> impl Fn(&ParamVector) -> ParamVector + Sync + '_ {
        move |v: &ParamVector| ParamVector::new(self.matvec(v.as_slice()))
    }

    /// A * B.
    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Dense::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// Solves A x = b by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut m = self.a.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap())
                .unwrap();
            assert!(m[pivot * n + col].abs() > 1e-14, "singular oracle matrix");
            if pivot != col {
                for j in 0..n {
                    m.swap(col * n + j, pivot * n + j);
                }
                rhs.swap(col, pivot);
            }
            let diag = m[col * n + col];
            for row in col + 1..n {
                let factor = m[row * n + col] / diag;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    m[row * n + j] -= factor * m[col * n + j];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = rhs[row];
            for j in row + 1..n {
                acc -= m[row * n + j] * x[j];
            }
            x[row] = acc / m[row * n + row];
        }
        x
    }

    /// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations,
    /// ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = self.a.clone();
        for _sweep in 0..200 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = m[p * n + p];
                    let aqq = m[q * n + q];
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[k * n + p];
                        let mkq = m[k * n + q];
                        m[k * n + p] = c * mkp - s * mkq;
                        m[k * n + q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[p * n + k];
                        let mqk = m[q * n + k];
                        m[p * n + k] = c * mpk - s * mqk;
                        m[q * n + k] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eig
    }

    /// Spectral norm of a symmetric matrix: max |eigenvalue|.
    pub fn symmetric_spectral_norm(&self) -> f64 {
        self.symmetric_eigenvalues()
            .into_iter()
            .fold(0.0, |acc, e| acc.max(e.abs()))
    }
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Dense {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        for c in &cols {
            let proj: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c.iter()) {
                *vi -= proj * ci;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue; // degenerate draw, try again
        }
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    let mut q = Dense::zeros(n);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            q.set(i, j, col[i]);
        }
    }
    q
}

/// Symmetric PD matrix with exactly the given spectrum: Q diag(eigs) Q^T.
pub fn spd_with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> Dense {
    let n = eigs.len();
    let q = random_orthogonal(n, rng);
    let mut m = Dense::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += q.get(i, k) * eigs[k] * q.get(j, k);
            }
            m.set(i, j, acc);
        }
    }
    m
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
}

/// Dense ridge Hessian of one shard: (1/D) sum a a^T + lambda I.
pub fn ridge_hessian(shard: &[Sample], dim: usize, lambda: f64) -> Dense {
    let mut h = Dense::zeros(dim);
    let inv_d = 1.0 / shard.len() as f64;
    for s in shard {
        for i in 0..dim {
            for j in 0..dim {
                h.a[i * dim + j] += inv_d * s.features[i] * s.features[j];
            }
        }
    }
    for i in 0..dim {
        h.a[i * dim + i] += lambda;
    }
    h
}

/// Dense pooled ridge Hessian over worker shards: mean_i H_i.
pub fn pooled_ridge_hessian(shards: &[&[Sample]], dim: usize, lambda: f64) -> Dense {
    let mut h = Dense::zeros(dim);
    for shard in shards {
        h.add_assign(&ridge_hessian(shard, dim, lambda), 1.0 / shards.len() as f64);
    }
    h
}

/// Pooled ridge gradient at w: mean_i grad_i(w), accumulated densely.
pub fn pooled_ridge_gradient(shards: &[&[Sample]], dim: usize, lambda: f64, w: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; dim];
    for shard in shards {
        let inv = 1.0 / (shards.len() * shard.len()) as f64;
        for s in shard.iter() {
            let pred: f64 = s.features.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            let r = pred - s.label;
            for (gi, ai) in g.iter_mut().zip(s.features.iter()) {
                *gi += inv * r * ai;
            }
        }
    }
    for (gi, wi) in g.iter_mut().zip(w.iter()) {
        *gi += lambda * wi;
    }
    g
}

/// Minimizer of the pooled ridge objective from a dense solve of
/// H w* = H w0 - g(w0) evaluated at w0 = 0, i.e. H w* = -g(0).
pub fn pooled_ridge_minimizer(shards: &[&[Sample]], dim: usize, lambda: f64) -> Vec<f64> {
    let h = pooled_ridge_hessian(shards, dim, lambda);
    let g0 = pooled_ridge_gradient(shards, dim, lambda, &vec![0.0; dim]);
    let neg: Vec<f64> = g0.iter().map(|x| -x).collect();
    h.solve(&neg)
}

/// Central finite-difference gradient of `f` at `w`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, w: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    let mut probe = w.to_vec();
    for i in 0..w.len() {
        probe[i] = w[i] + step;
        let up = f(&probe);
        probe[i] = w[i] - step;
        let down = f(&probe);
        probe[i] = w[i];
        g[i] = (up - down) / (2.0 * step);
    }
    g
}

/// Central finite-difference of a vector map, contracted against v:
/// (J(w) v) with J the Jacobian of `g`. With g = gradient this is the
/// Hessian-vector product.
pub fn fd_jacobian_apply(
    g: &dyn Fn(&[f64]) -> Vec<f64>,
    w: &[f64],
    v: &[f64],
    step: f64,
) -> Vec<f64> {
    let vnorm = norm(v);
    if vnorm == 0.0 {
        return vec![0.0; w.len()];
    }
    let h = step / vnorm;
    let up: Vec<f64> = w.iter().zip(v.iter()).map(|(wi, vi)| wi + h * vi).collect();
    let down: Vec<f64> = w.iter().zip(v.iter()).map(|(wi, vi)| wi - h * vi).collect();
    let gu = g(&up);
    let gd = g(&down);
    gu.iter().zip(gd.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}
