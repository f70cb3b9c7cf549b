//! Loss, gradient, and Hessian-vector-product kernels for three GLM
//! families: ridge regression, binary logistic regression, and multinomial
//! logistic regression.
//!
//! All three losses depend on the data only through inner products
//! `<a_j, w>`, so curvature can be applied to a vector sample by sample with
//! vector-vector products alone. No routine in this module (or anywhere else
//! in the crate) ever allocates a d-by-d matrix.
//!
//! Multinomial parameters are stored as one flat vector of length `d * C`,
//! class blocks contiguous: class `c` occupies `w[c*d .. (c+1)*d]`.

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// One observation: a dense feature vector and a scalar label.
///
/// Labels are interpreted per family: any real for regression, -1/+1 for
/// binary classification, and a class index `0..C` for multinomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Sample { features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlmFamily {
    Ridge,
    BinaryLogistic,
    /// Multinomial logistic with the given class count.
    MultinomialLogistic { classes: usize },
}

/// Loss family plus regularization strength and feature dimension.
///
/// The model intentionally does not own its parameter vector; parameters
/// travel separately so solvers stay generic over [`ParamVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct GlmModel {
    family: GlmFamily,
    lambda: f64,
    dim: usize,
}

impl GlmModel {
    pub fn new(family: GlmFamily, lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
        }
        if dim < 1 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if let GlmFamily::MultinomialLogistic { classes } = family {
            if classes < 2 {
                return Err(Error::invalid("classes", "multinomial needs >= 2 classes"));
            }
        }
        Ok(GlmModel { family, lambda, dim })
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the parameter vector: `d` for ridge/logistic, `d * C` for
    /// multinomial.
    pub fn param_len(&self) -> usize {
        match self.family {
            GlmFamily::MultinomialLogistic { classes } => self.dim * classes,
            _ => self.dim,
        }
    }

    fn check_params(&self, w: &ParamVector) -> Result<()> {
        if w.len() != self.param_len() {
            return Err(Error::DimensionMismatch {
                expected: self.param_len(),
                got: w.len(),
            });
        }
        Ok(())
    }

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: sample.dim(),
            });
        }
        match self.family {
            GlmFamily::Ridge => Ok(()),
            GlmFamily::BinaryLogistic => {
                if sample.label == 1.0 || sample.label == -1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidLabel {
                        label: sample.label,
                        why: "binary labels must be -1 or +1",
                    })
                }
            }
            GlmFamily::MultinomialLogistic { classes } => {
                let c = sample.label;
                if c.fract() == 0.0 && c >= 0.0 && c < classes as f64 {
                    Ok(())
                } else {
                    Err(Error::InvalidLabel {
                        label: sample.label,
                        why: "multinomial labels must be class indices in [0, C)",
                    })
                }
            }
        }
    }

    /// Regularized empirical risk of `shard` at `w`:
    /// `(1/D) sum_j l(w, (a_j, y_j)) + (lambda/2) ||w||^2`.
    pub fn loss(&self, shard: &[Sample], w: &ParamVector) -> Result<f64> {
        self.check_params(w)?;
        if shard.is_empty() {
            return Err(Error::EmptyShard);
        }
        let mut acc = 0.0;
        for sample in shard {
            self.check_sample(sample)?;
            acc += self.sample_loss_unchecked(sample, w);
        }
        Ok(acc / shard.len() as f64 + 0.5 * self.lambda * w.norm_sq())
    }

    /// Unregularized per-sample loss, used for validation metrics.
    pub fn sample_loss(&self, sample: &Sample, w: &ParamVector) -> Result<f64> {
        self.check_params(w)?;
        self.check_sample(sample)?;
        Ok(self.sample_loss_unchecked(sample, w))
    }

    fn sample_loss_unchecked(&self, sample: &Sample, w: &ParamVector) -> f64 {
        match self.family {
            GlmFamily::Ridge => {
                let r = dot(&sample.features, w.as_slice()) - sample.label;
                0.5 * r * r
            }
            GlmFamily::BinaryLogistic => {
                let z = dot(&sample.features, w.as_slice());
                log1p_exp(-sample.label * z)
            }
            GlmFamily::MultinomialLogistic { classes } => {
                let scores = class_scores(sample, w, self.dim, classes);
                let y = sample.label as usize;
                log_sum_exp(&scores) - scores[y]
            }
        }
    }

    /// Exact gradient of [`GlmModel::loss`].
    pub fn gradient(&self, shard: &[Sample], w: &ParamVector) -> Result<ParamVector> {
        self.check_params(w)?;
        if shard.is_empty() {
            return Err(Error::EmptyShard);
        }
        let mut grad = ParamVector::zeros(self.param_len());
        let inv_d = 1.0 / shard.len() as f64;
        for sample in shard {
            self.check_sample(sample)?;
            match self.family {
                GlmFamily::Ridge => {
                    let r = dot(&sample.features, w.as_slice()) - sample.label;
                    axpy(inv_d * r, &sample.features, grad.as_mut_slice());
                }
                GlmFamily::BinaryLogistic => {
                    let z = dot(&sample.features, w.as_slice());
                    // d/dz log(1 + exp(-y z)) = -y * sigma(-y z)
                    let coef = -sample.label * sigmoid(-sample.label * z);
                    axpy(inv_d * coef, &sample.features, grad.as_mut_slice());
                }
                GlmFamily::MultinomialLogistic { classes } => {
                    let mut probs = class_scores(sample, w, self.dim, classes);
                    softmax_in_place(&mut probs);
                    let y = sample.label as usize;
                    probs[y] -= 1.0;
                    for (c, p) in probs.iter().enumerate() {
                        let block = &mut grad.as_mut_slice()[c * self.dim..(c + 1) * self.dim];
                        axpy(inv_d * p, &sample.features, block);
                    }
                }
            }
        }
        grad.add_scaled(self.lambda, w);
        Ok(grad)
    }

    /// Hessian-vector product of [`GlmModel::loss`] at `w` applied to `v`,
    /// accumulated sample by sample in O(D * d) time (O(D * d * C) for
    /// multinomial).
    pub fn hvp(&self, shard: &[Sample], w: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        self.check_params(w)?;
        self.check_params(v)?;
        if shard.is_empty() {
            return Err(Error::EmptyShard);
        }
        let mut out = ParamVector::zeros(self.param_len());
        let inv_d = 1.0 / shard.len() as f64;
        for sample in shard {
            self.check_sample(sample)?;
            match self.family {
                GlmFamily::Ridge => {
                    let av = dot(&sample.features, v.as_slice());
                    axpy(inv_d * av, &sample.features, out.as_mut_slice());
                }
                GlmFamily::BinaryLogistic => {
                    let z = sample.label * dot(&sample.features, w.as_slice());
                    let s = sigmoid(z);
                    let beta = s * (1.0 - s);
                    let av = dot(&sample.features, v.as_slice());
                    axpy(inv_d * beta * av, &sample.features, out.as_mut_slice());
                }
                GlmFamily::MultinomialLogistic { classes } => {
                    let mut probs = class_scores(sample, w, self.dim, classes);
                    softmax_in_place(&mut probs);
                    // q_c = <a, v_c>; the per-sample block Hessian acts as
                    // (diag(p) - p p^T) on q.
                    let mut q = vec![0.0; classes];
                    for (c, qc) in q.iter_mut().enumerate() {
                        *qc = dot(&sample.features, &v.as_slice()[c * self.dim..(c + 1) * self.dim]);
                    }
                    let pq: f64 = probs.iter().zip(q.iter()).map(|(p, qc)| p * qc).sum();
                    for c in 0..classes {
                        let coef = probs[c] * (q[c] - pq);
                        let block = &mut out.as_mut_slice()[c * self.dim..(c + 1) * self.dim];
                        axpy(inv_d * coef, &sample.features, block);
                    }
                }
            }
        }
        out.add_scaled(self.lambda, v);
        Ok(out)
    }

    /// Top-1 prediction correctness for classification families.
    pub fn predicts_correctly(&self, sample: &Sample, w: &ParamVector) -> Result<bool> {
        self.check_params(w)?;
        self.check_sample(sample)?;
        match self.family {
            GlmFamily::Ridge => Err(Error::invalid(
                "family",
                "accuracy is undefined for regression",
            )),
            GlmFamily::BinaryLogistic => {
                let z = dot(&sample.features, w.as_slice());
                let predicted = if z >= 0.0 { 1.0 } else { -1.0 };
                Ok(predicted == sample.label)
            }
            GlmFamily::MultinomialLogistic { classes } => {
                let scores = class_scores(sample, w, self.dim, classes);
                let mut best = 0usize;
                for (c, s) in scores.iter().enumerate() {
                    if *s > scores[best] {
                        best = c;
                    }
                }
                Ok(best as f64 == sample.label)
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn axpy(c: f64, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    for (o, xi) in out.iter_mut().zip(x.iter()) {
        *o += c * xi;
    }
}

fn class_scores(sample: &Sample, w: &ParamVector, dim: usize, classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|c| dot(&sample.features, &w.as_slice()[c * dim..(c + 1) * dim]))
        .collect()
}

/// ln(1 + exp(u)) without overflow for large |u|.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

fn softmax_in_place(scores: &mut [f64]) {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - m).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

/// Curvature and heterogeneity constants attached to a run.
///
/// `lambda_strong` and `smoothness` feed the adaptive step size;
/// `hessian_lipschitz` and `nu` are carried for reporting only.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceConstants {
    lambda_strong: f64,
    smoothness: f64,
    kappa: f64,
    hessian_lipschitz: f64,
    nu: f64,
}

impl ConvergenceConstants {
    pub fn new(
        lambda_strong: f64,
        smoothness: f64,
        hessian_lipschitz: f64,
        nu: f64,
    ) -> Result<Self> {
        if !(lambda_strong > 0.0) {
            return Err(Error::invalid("lambda_strong", "must be > 0"));
        }
        if !(smoothness >= lambda_strong) {
            return Err(Error::invalid(
                "smoothness",
                format!("must be >= lambda_strong ({lambda_strong}), got {smoothness}"),
            ));
        }
        if !(hessian_lipschitz >= 0.0) {
            return Err(Error::invalid("hessian_lipschitz", "must be >= 0"));
        }
        if !(nu >= 0.0) {
            return Err(Error::invalid("nu", "must be >= 0"));
        }
        Ok(ConvergenceConstants {
            lambda_strong,
            smoothness,
            kappa: smoothness / lambda_strong,
            hessian_lipschitz,
            nu,
        })
    }

    pub fn lambda_strong(&self) -> f64 {
        self.lambda_strong
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn hessian_lipschitz(&self) -> f64 {
        self.hessian_lipschitz
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Gradient-norm threshold below which the adaptive step size saturates
    /// at 1 (the pure Newton phase).
    pub fn newton_phase_threshold(&self) -> f64 {
        self.lambda_strong * self.lambda_strong / self.smoothness
    }

    /// Post-hoc diagnostic: predicted damped-phase length `t0` and residual
    /// coefficient `gamma` for a run started at gradient norm `grad0_norm`.
    pub fn damped_phase_diagnostics(&self, grad0_norm: f64) -> (usize, f64) {
        let l = self.smoothness;
        let lam2 = self.lambda_strong * self.lambda_strong;
        let raw = (2.0 * l / (lam2 * grad0_norm)).ceil() - 2.0;
        let t0 = raw.max(0.0) as usize;
        let gamma = l / (2.0 * lam2) * grad0_norm - t0 as f64 / 4.0;
        (t0, gamma)
    }
}
