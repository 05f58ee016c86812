//! Scalar objectives: information-theoretic quantities, regression and
//! classification losses, distillation, contrastive, adversarial, and
//! semi-supervised signals.
//!
//! Conventions: batched losses reduce by mean, so the meaning of a learning
//! rate does not depend on batch size. Training losses are in nats;
//! information-theoretic operations expose both base 2 and nats through
//! [`LogBase`]. Probabilities fed to a logarithm inside a training loss are
//! clamped to `[1e-12, 1 - 1e-12]`.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Two,
    Nats,
}

impl LogBase {
    /// Factor converting a value in nats to this base.
    fn factor_from_nats(self) -> f64 {
        match self {
            LogBase::Two => 1.0 / std::f64::consts::LN_2,
            LogBase::Nats => 1.0,
        }
    }
}

/// One or more probability distributions, one per row.
///
/// A 1-D tensor is a single distribution; a 2-D tensor is a batch of them.
/// Rows must be non-negative and sum to 1 within 1e-9.
#[derive(Debug, Clone)]
pub struct Distribution {
    probs: Tensor,
}

impl Distribution {
    pub fn new(probs: Tensor) -> Result<Self> {
        if probs.rank() == 0 || probs.rank() > 2 {
            return Err(Error::InvalidDistribution(format!(
                "expected rank 1 or 2, got shape {:?}",
                probs.shape()
            )));
        }
        let d = Self { probs };
        for r in 0..d.rows() {
            let row = d.row(r);
            if let Some(&neg) = row.iter().find(|&&p| p < 0.0) {
                return Err(Error::InvalidDistribution(format!("negative entry {neg}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!(
                    "row {r} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(d)
    }

    pub fn from_slice(probs: &[f64]) -> Result<Self> {
        Self::new(Tensor::from_slice(probs))
    }

    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn rows(&self) -> usize {
        if self.probs.rank() == 1 {
            1
        } else {
            self.probs.shape()[0]
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        if self.probs.rank() == 1 {
            self.probs.data()
        } else {
            self.probs.row(r)
        }
    }

    pub fn cols(&self) -> usize {
        *self.probs.shape().last().unwrap()
    }
}

/// Logits with one class index per row.
#[derive(Debug, Clone)]
pub struct LabeledBatch {
    pub logits: Tensor,
    pub targets: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(logits: Tensor, targets: Vec<usize>) -> Result<Self> {
        if logits.rank() != 2 || logits.shape()[0] != targets.len() {
            return Err(Error::invalid_argument(format!(
                "expected [batch x classes] logits with one target per row, got {:?} and {} targets",
                logits.shape(),
                targets.len()
            )));
        }
        let classes = logits.shape()[1];
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::invalid_argument(format!(
                "class index {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self { logits, targets })
    }

    /// Build from one-hot target rows (each row must have a single 1).
    pub fn from_one_hot(logits: Tensor, one_hot: &Tensor) -> Result<Self> {
        if one_hot.shape() != logits.shape() {
            return Err(Error::ShapeMismatch {
                context: "one-hot targets",
                lhs: logits.shape().to_vec(),
                rhs: one_hot.shape().to_vec(),
            });
        }
        let mut targets = Vec::with_capacity(one_hot.shape()[0]);
        for r in 0..one_hot.shape()[0] {
            let row = one_hot.row(r);
            let hits: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [single] if row[*single] == 1.0 => targets.push(*single),
                _ => {
                    return Err(Error::invalid_argument(format!(
                        "row {r} is not one-hot"
                    )))
                }
            }
        }
        Self::new(logits, targets)
    }
}

fn check_same_shape(a: &Var, b: &Var, context: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { context, lhs: a.shape(), rhs: b.shape() });
    }
    Ok(())
}

/// Mean squared difference.
pub fn mse(x: &Var, target: &Var) -> Result<Var> {
    check_same_shape(x, target, "mse")?;
    x.sub(target)?.powi(2).mean_all()
}

/// Mean absolute difference.
pub fn l1(x: &Var, target: &Var) -> Result<Var> {
    check_same_shape(x, target, "l1")?;
    x.sub(target)?.abs().mean_all()
}

/// Shannon entropy, averaged over rows; `0 log 0 := 0`.
pub fn entropy(p: &Distribution, base: LogBase) -> f64 {
    let mut total = 0.0;
    for r in 0..p.rows() {
        for &pi in p.row(r) {
            if pi > 0.0 {
                total -= pi * pi.ln();
            }
        }
    }
    total / p.rows() as f64 * base.factor_from_nats()
}

/// Cross-entropy `H(p, q)`, averaged over rows. Errors where `q` is zero
/// but `p` is positive (the loss would be infinite).
pub fn cross_entropy_dist(p: &Distribution, q: &Distribution, base: LogBase) -> Result<f64> {
    if p.probs().shape() != q.probs().shape() {
        return Err(Error::ShapeMismatch {
            context: "cross_entropy_dist",
            lhs: p.probs().shape().to_vec(),
            rhs: q.probs().shape().to_vec(),
        });
    }
    let mut total = 0.0;
    for r in 0..p.rows() {
        for (i, (&pi, &qi)) in p.row(r).iter().zip(q.row(r)).enumerate() {
            if pi > 0.0 {
                if qi == 0.0 {
                    return Err(Error::InfiniteLoss { index: r * p.cols() + i });
                }
                total -= pi * qi.ln();
            }
        }
    }
    Ok(total / p.rows() as f64 * base.factor_from_nats())
}

/// Kullback-Leibler divergence `D(p || q)`, averaged over rows.
pub fn kl_divergence(p: &Distribution, q: &Distribution, base: LogBase) -> Result<f64> {
    if p.probs().shape() != q.probs().shape() {
        return Err(Error::ShapeMismatch {
            context: "kl_divergence",
            lhs: p.probs().shape().to_vec(),
            rhs: q.probs().shape().to_vec(),
        });
    }
    let mut total = 0.0;
    for r in 0..p.rows() {
        for (i, (&pi, &qi)) in p.row(r).iter().zip(q.row(r)).enumerate() {
            if pi > 0.0 {
                if qi == 0.0 {
                    return Err(Error::InfiniteLoss { index: r * p.cols() + i });
                }
                total += pi * (pi / qi).ln();
            }
        }
    }
    Ok(total / p.rows() as f64 * base.factor_from_nats())
}

/// Mean negative log-likelihood of the target classes under
/// `softmax(logits)`, in the fused log-sum-exp form (natural log).
pub fn cross_entropy_loss(batch: &LabeledBatch) -> Result<f64> {
    let tape = Tape::new();
    let logits = tape.leaf(batch.logits.clone());
    cross_entropy_loss_var(&logits, &batch.targets)?.item()
}

/// Differentiable form of [`cross_entropy_loss`]; the gradient with respect
/// to the logits is `(softmax(logits) - one_hot(target)) / batch`.
pub fn cross_entropy_loss_var(logits: &Var, targets: &[usize]) -> Result<Var> {
    logits.tape().cross_entropy_logits(logits, targets)
}

/// Mean Bernoulli negative log-likelihood; predictions are clamped to
/// `[1e-12, 1 - 1e-12]` before the logarithms.
pub fn binary_cross_entropy(targets: &Var, predictions: &Var) -> Result<Var> {
    check_same_shape(targets, predictions, "binary_cross_entropy")?;
    let p = predictions.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let pos = targets.mul(&p.ln())?;
    let neg = targets.neg().add_scalar(1.0).mul(&p.neg().add_scalar(1.0).ln())?;
    Ok(pos.add(&neg)?.mean_all()?.neg())
}

/// Distillation objective: `KL(teacher || softmax(student/T)) * T^2`, in
/// nats, averaged over rows. The `T^2` factor keeps gradient magnitudes
/// comparable across temperatures.
pub fn distillation_loss(teacher: &Distribution, student_logits: &Var, temperature: f64) -> Result<Var> {
    if temperature <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let t_shape: Vec<usize> = if teacher.probs().rank() == 1 {
        vec![1, teacher.cols()]
    } else {
        teacher.probs().shape().to_vec()
    };
    if student_logits.shape() != t_shape {
        return Err(Error::ShapeMismatch {
            context: "distillation_loss",
            lhs: t_shape,
            rhs: student_logits.shape(),
        });
    }
    let rows = t_shape[0] as f64;
    // sum_i t_i ln t_i is a constant of the teacher
    let mut neg_teacher_entropy = 0.0;
    for r in 0..teacher.rows() {
        for &t in teacher.row(r) {
            if t > 0.0 {
                neg_teacher_entropy += t * t.ln();
            }
        }
    }
    let tape = student_logits.tape();
    let teacher_t = tape.constant(teacher.probs().reshape(student_logits.shape().as_slice())?);
    let lsm = student_logits.mul_scalar(1.0 / temperature).log_softmax(1)?;
    let cross = teacher_t.mul(&lsm)?.sum_all()?;
    Ok(cross
        .neg()
        .add_scalar(neg_teacher_entropy)
        .mul_scalar(temperature * temperature / rows))
}

/// Symmetric contrastive loss over an `N x N` similarity matrix: the mean of
/// row-wise and column-wise cross-entropy against the diagonal, halved.
pub fn clip_contrastive_loss(similarity: &Var) -> Result<Var> {
    let shape = similarity.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::invalid_argument(format!(
            "similarity matrix must be square, got {shape:?}"
        )));
    }
    let diagonal: Vec<usize> = (0..shape[0]).collect();
    let tape = similarity.tape();
    let rows = tape.cross_entropy_logits(similarity, &diagonal)?;
    let cols = tape.cross_entropy_logits(&similarity.transpose()?, &diagonal)?;
    Ok(rows.add(&cols)?.mul_scalar(0.5))
}

pub struct GanLosses {
    pub d_loss: Var,
    pub g_loss: Var,
}

/// Minimax discriminator loss and non-saturating generator loss over
/// discriminator probabilities for real and generated samples.
pub fn gan_losses(d_real: &Var, d_fake: &Var) -> Result<GanLosses> {
    let real = d_real.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let fake = d_fake.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let d_loss = real
        .ln()
        .mean_all()?
        .add(&fake.neg().add_scalar(1.0).ln().mean_all()?)?
        .neg();
    let g_loss = fake.ln().mean_all()?.neg();
    Ok(GanLosses { d_loss, g_loss })
}

/// Mean entropy (nats) of the softmax of each logit row; minimizing it
/// pushes predictions on unlabeled data toward confident ones.
pub fn entropy_min_loss(unlabeled_logits: &Var) -> Result<Var> {
    if unlabeled_logits.shape().len() != 2 {
        return Err(Error::invalid_argument(format!(
            "expected [batch x classes] logits, got {:?}",
            unlabeled_logits.shape()
        )));
    }
    let p = unlabeled_logits.softmax(1)?;
    let lp = unlabeled_logits.log_softmax(1)?;
    p.mul(&lp)?.sum_axis(1)?.neg().mean_all()
}

/// Accept the argmax class as a pseudo-label when its probability reaches
/// the confidence threshold (boundary inclusive); `None` otherwise.
pub fn pseudo_label(probs: &[f64], threshold: f64) -> Result<Option<usize>> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(Error::invalid_argument(format!(
            "threshold must be in (0.5, 1], got {threshold}"
        )));
    }
    let (best, arg) = probs
        .iter()
        .enumerate()
        .fold((f64::NEG_INFINITY, 0), |(b, a), (i, &p)| if p > b { (p, i) } else { (b, a) });
    Ok(if best >= threshold { Some(arg) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check;
    use approx::assert_relative_eq;

    fn scalar_of(v: Result<Var>) -> f64 {
        v.unwrap().item().unwrap()
    }

    fn on_tape(xs: &[f64], ys: &[f64], f: impl Fn(&Var, &Var) -> Result<Var>) -> f64 {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(xs));
        let y = tape.leaf(Tensor::from_slice(ys));
        scalar_of(f(&x, &y))
    }

    #[test]
    fn mse_cases() {
        assert_eq!(on_tape(&[1.0, 2.0], &[1.0, 2.0], mse), 0.0);
        assert_eq!(on_tape(&[0.0], &[2.0], mse), 4.0);
        assert_eq!(on_tape(&[1.0, 3.0], &[2.0, 5.0], mse), 2.5);
    }

    #[test]
    fn l1_cases() {
        assert_eq!(on_tape(&[1.0, -2.0], &[1.0, -2.0], l1), 0.0);
        assert_eq!(on_tape(&[0.0], &[-3.0], l1), 3.0);
        assert_eq!(on_tape(&[1.0, 2.0], &[0.0, 4.0], l1), 1.5);
    }

    #[test]
    fn losses_reject_shape_mismatch() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::from_slice(&[1.0, 2.0]));
        let b = tape.leaf(Tensor::from_slice(&[1.0]));
        assert!(mse(&a, &b).is_err());
        assert!(l1(&a, &b).is_err());
    }

    #[test]
    fn entropy_point_mass_and_uniform() {
        let point = Distribution::from_slice(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(entropy(&point, LogBase::Two), 0.0);
        let u2 = Distribution::from_slice(&[0.5, 0.5]).unwrap();
        assert_relative_eq!(entropy(&u2, LogBase::Two), 1.0, max_relative = 1e-12);
        let u4 = Distribution::from_slice(&[0.25; 4]).unwrap();
        assert_relative_eq!(entropy(&u4, LogBase::Two), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::from_slice(&[0.5, 0.6]).is_err());
        assert!(Distribution::from_slice(&[-0.1, 1.1]).is_err());
        assert!(Distribution::from_slice(&[0.3, 0.7]).is_ok());
    }

    #[test]
    fn cross_entropy_dist_cases() {
        let p = Distribution::from_slice(&[0.5, 0.5]).unwrap();
        // H(p, p) = H(p)
        assert_relative_eq!(
            cross_entropy_dist(&p, &p, LogBase::Two).unwrap(),
            entropy(&p, LogBase::Two),
            max_relative = 1e-12
        );
        // point mass on i -> -log q_i
        let point = Distribution::from_slice(&[0.0, 1.0]).unwrap();
        let q = Distribution::from_slice(&[0.75, 0.25]).unwrap();
        assert_relative_eq!(
            cross_entropy_dist(&point, &q, LogBase::Two).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        // hand value: p=[.5,.5], q=[.9,.1], base 2
        let q = Distribution::from_slice(&[0.9, 0.1]).unwrap();
        assert_relative_eq!(
            cross_entropy_dist(&p, &q, LogBase::Two).unwrap(),
            1.736965594166206,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cross_entropy_errors_on_impossible_support() {
        let p = Distribution::from_slice(&[1.0, 0.0]).unwrap();
        let q = Distribution::from_slice(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            cross_entropy_dist(&p, &q, LogBase::Nats),
            Err(Error::InfiniteLoss { index: 0 })
        ));
    }

    #[test]
    fn kl_cases() {
        let p = Distribution::from_slice(&[0.3, 0.7]).unwrap();
        assert_eq!(kl_divergence(&p, &p, LogBase::Nats).unwrap(), 0.0);
        // KL = H(p,q) - H(p)
        let q = Distribution::from_slice(&[0.6, 0.4]).unwrap();
        let kl = kl_divergence(&p, &q, LogBase::Two).unwrap();
        let gap = cross_entropy_dist(&p, &q, LogBase::Two).unwrap() - entropy(&p, LogBase::Two);
        assert!((kl - gap).abs() < 1e-12);
        // p=[1,0], q=[.5,.5], base 2 -> 1 bit
        let p = Distribution::from_slice(&[1.0, 0.0]).unwrap();
        let q = Distribution::from_slice(&[0.5, 0.5]).unwrap();
        assert_relative_eq!(kl_divergence(&p, &q, LogBase::Two).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn cross_entropy_loss_book_anchor() {
        // true-class probability 0.001 -> loss ~ 6.9
        // logits [ln(0.001), ln(0.999)] give that probability up to renormalization
        let p = 0.001f64;
        let logits = Tensor::from_rows(&[vec![p.ln(), (1.0 - p).ln()]]).unwrap();
        let batch = LabeledBatch::new(logits, vec![0]).unwrap();
        let loss = cross_entropy_loss(&batch).unwrap();
        assert!((loss - 6.908).abs() < 0.05, "loss = {loss}");
    }

    #[test]
    fn cross_entropy_loss_uniform_and_limit() {
        let logits = Tensor::from_rows(&[vec![0.0; 5]]).unwrap();
        let batch = LabeledBatch::new(logits, vec![2]).unwrap();
        assert_relative_eq!(cross_entropy_loss(&batch).unwrap(), 5.0f64.ln(), max_relative = 1e-12);

        let confident = Tensor::from_rows(&[vec![30.0, 0.0]]).unwrap();
        let batch = LabeledBatch::new(confident, vec![0]).unwrap();
        assert!(cross_entropy_loss(&batch).unwrap() < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let tape = Tape::new();
        let logits = tape.leaf(Tensor::from_rows(&[vec![0.2, -0.4, 1.1], vec![0.0, 0.5, -0.5]]).unwrap());
        let loss = cross_entropy_loss_var(&logits, &[2, 0]).unwrap();
        tape.backward(&loss).unwrap();
        let g = logits.grad().unwrap();
        let p = logits.softmax(1).unwrap().value();
        for r in 0..2 {
            for c in 0..3 {
                let onehot = if (r == 0 && c == 2) || (r == 1 && c == 0) { 1.0 } else { 0.0 };
                let expect = (p.row(r)[c] - onehot) / 2.0;
                assert_relative_eq!(g.row(r)[c], expect, max_relative = 1e-12);
            }
        }
        // and against finite differences
        let report = grad_check(
            |_, vars| cross_entropy_loss_var(&vars[0], &[2, 0]),
            &[Tensor::from_rows(&[vec![0.2, -0.4, 1.1], vec![0.0, 0.5, -0.5]]).unwrap()],
            1e-5,
        )
        .unwrap();
        assert!(report.within(1e-4), "{report:?}");
    }

    #[test]
    fn bce_cases() {
        assert_relative_eq!(
            on_tape(&[0.5], &[0.5], binary_cross_entropy),
            2.0f64.ln(),
            max_relative = 1e-12
        );
        let near_zero = on_tape(&[1.0], &[1.0 - 1e-12], binary_cross_entropy);
        assert!(near_zero.abs() < 1e-9);
        assert_relative_eq!(
            on_tape(&[1.0, 0.0], &[0.9, 0.2], binary_cross_entropy),
            0.164252033486018,
            max_relative = 1e-10
        );
    }

    #[test]
    fn distillation_cases() {
        let tape = Tape::new();
        // student softmax equals teacher at T=1 -> 0
        let teacher = Distribution::new(Tensor::from_rows(&[vec![0.8, 0.2]]).unwrap()).unwrap();
        let matching = tape.leaf(Tensor::from_rows(&[vec![0.8f64.ln(), 0.2f64.ln()]]).unwrap());
        let zero = distillation_loss(&teacher, &matching, 1.0).unwrap().item().unwrap();
        assert!(zero.abs() < 1e-12, "{zero}");

        let student = tape.leaf(Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap());
        let loss = distillation_loss(&teacher, &student, 1.0).unwrap().item().unwrap();
        assert_relative_eq!(loss, 0.19274475702175753, max_relative = 1e-10);

        // finite and non-negative for any temperature
        let loss5 = distillation_loss(&teacher, &student, 5.0).unwrap().item().unwrap();
        assert!(loss5.is_finite() && loss5 >= 0.0);
        assert!(distillation_loss(&teacher, &student, 0.0).is_err());
    }

    #[test]
    fn clip_contrastive_cases() {
        let tape = Tape::new();
        let sharp = tape.leaf(Tensor::from_rows(&[vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap());
        let loss = clip_contrastive_loss(&sharp).unwrap().item().unwrap();
        assert_relative_eq!(loss, 4.5398899216870535e-5, max_relative = 1e-9);

        let flat = tape.leaf(Tensor::from_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap());
        let loss = clip_contrastive_loss(&flat).unwrap().item().unwrap();
        assert_relative_eq!(loss, 3.0f64.ln(), max_relative = 1e-12);

        let very_sharp = tape.leaf(Tensor::from_rows(&[vec![60.0, 0.0], vec![0.0, 60.0]]).unwrap());
        assert!(clip_contrastive_loss(&very_sharp).unwrap().item().unwrap() < 1e-12);

        let rect = tape.leaf(Tensor::zeros(&[2, 3]));
        assert!(clip_contrastive_loss(&rect).is_err());
    }

    #[test]
    fn clip_contrastive_permutation_invariance() {
        // permuting rows and columns together must not change the loss
        let base = Tensor::from_rows(&[
            vec![2.0, 0.1, -1.0],
            vec![0.3, 1.5, 0.2],
            vec![-0.5, 0.8, 2.5],
        ])
        .unwrap();
        let perm = [2usize, 0, 1];
        let mut permuted = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            for j in 0..3 {
                let v = base.row(perm[i])[perm[j]];
                permuted.data_mut()[i * 3 + j] = v;
            }
        }
        let tape = Tape::new();
        let a = clip_contrastive_loss(&tape.leaf(base)).unwrap().item().unwrap();
        let b = clip_contrastive_loss(&tape.leaf(permuted)).unwrap().item().unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn gan_loss_cases() {
        let tape = Tape::new();
        let half = tape.leaf(Tensor::from_slice(&[0.5, 0.5]));
        let GanLosses { d_loss, g_loss } = gan_losses(&half, &half).unwrap();
        assert_relative_eq!(d_loss.item().unwrap(), 2.0 * 2.0f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(g_loss.item().unwrap(), 2.0f64.ln(), max_relative = 1e-12);

        let one = tape.leaf(Tensor::from_slice(&[1.0 - 1e-12]));
        let zero = tape.leaf(Tensor::from_slice(&[1e-12]));
        let fooled = gan_losses(&one, &one).unwrap();
        assert!(fooled.g_loss.item().unwrap().abs() < 1e-9);
        let perfect = gan_losses(&one, &zero).unwrap();
        assert!(perfect.d_loss.item().unwrap().abs() < 1e-9);
    }

    #[test]
    fn entropy_min_cases() {
        let tape = Tape::new();
        let sharp = tape.leaf(Tensor::from_rows(&[vec![40.0, 0.0, 0.0]]).unwrap());
        assert!(entropy_min_loss(&sharp).unwrap().item().unwrap() < 1e-12);

        let uniform = tape.leaf(Tensor::from_rows(&[vec![0.0; 4], vec![0.0; 4]]).unwrap());
        assert_relative_eq!(
            entropy_min_loss(&uniform).unwrap().item().unwrap(),
            4.0f64.ln(),
            max_relative = 1e-12
        );

        let two = tape.leaf(Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap());
        assert_relative_eq!(
            entropy_min_loss(&two).unwrap().item().unwrap(),
            0.5822031088882179,
            max_relative = 1e-10
        );
    }

    #[test]
    fn pseudo_label_cases() {
        assert_eq!(pseudo_label(&[0.97, 0.03], 0.9).unwrap(), Some(0));
        assert_eq!(pseudo_label(&[0.6, 0.4], 0.9).unwrap(), None);
        // boundary inclusive
        assert_eq!(pseudo_label(&[0.9, 0.1], 0.9).unwrap(), Some(0));
        assert!(pseudo_label(&[0.9, 0.1], 0.5).is_err());
        assert!(pseudo_label(&[0.9, 0.1], 1.01).is_err());
    }

    #[test]
    fn gibbs_inequality_on_random_pairs() {
        let mut rng = crate::rng::SplitRng::new(11);
        for _ in 0..200 {
            let n = 2 + rng.below(5);
            let raw: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            let p = Distribution::from_slice(&raw.iter().map(|v| v / sum).collect::<Vec<_>>()).unwrap();
            let raw: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            let q = Distribution::from_slice(&raw.iter().map(|v| v / sum).collect::<Vec<_>>()).unwrap();
            let ce = cross_entropy_dist(&p, &q, LogBase::Nats).unwrap();
            let h = entropy(&p, LogBase::Nats);
            assert!(ce >= h - 1e-12, "Gibbs violated: {ce} < {h}");
            let ce_self = cross_entropy_dist(&p, &p, LogBase::Nats).unwrap();
            assert!((ce_self - h).abs() < 1e-12);
        }
    }
}
