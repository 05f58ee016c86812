//! Affine coupling layers and normalizing-flow density evaluation.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{Init, LinearLayer};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Small tanh MLP mapping the masked input vector to per-dimension scale or
/// shift values.
pub struct CouplingNet {
    l1: LinearLayer,
    l2: LinearLayer,
}

impl CouplingNet {
    pub fn new(dim: usize, hidden: usize, rng: &mut SplitRng) -> Self {
        Self {
            l1: LinearLayer::new(dim, hidden, Init::Xavier, rng),
            l2: LinearLayer::new(hidden, dim, Init::Xavier, rng),
        }
    }

    /// A net that outputs exactly zero regardless of input.
    pub fn zeroed(dim: usize, hidden: usize, rng: &mut SplitRng) -> Self {
        let net = Self::new(dim, hidden, rng);
        net.l2.w.set_value(Tensor::zeros(&[dim, hidden]));
        net.l2.b.set_value(Tensor::zeros(&[dim]));
        net
    }

    pub fn forward(&self, tape: &Tape, x: &Var) -> Result<Var> {
        self.l2.forward(tape, &self.l1.forward(tape, x)?.tanh()?)
    }

    pub fn params(&self) -> Vec<Param> {
        let mut p = self.l1.params();
        p.extend(self.l2.params());
        p
    }
}

/// One affine coupling layer: dimensions where `mask` is `true` pass through
/// unchanged; the rest are transformed as `y_b = x_b * exp(s(x_a)) + t(x_a)`
/// where `s` and `t` see only the pass-through half. The log-determinant of
/// the Jacobian is the sum of `s` over transformed dimensions.
pub struct CouplingLayer {
    pub mask: Vec<bool>,
    pub scale_net: CouplingNet,
    pub shift_net: CouplingNet,
}

impl CouplingLayer {
    pub const DEFAULT_HIDDEN: usize = 16;

    pub fn new(mask: Vec<bool>, hidden: usize, rng: &mut SplitRng) -> Result<Self> {
        let pass = mask.iter().filter(|&&m| m).count();
        if pass == 0 || pass == mask.len() {
            return Err(Error::invalid_argument(
                "coupling mask must split dimensions into two non-empty sets",
            ));
        }
        let dim = mask.len();
        Ok(Self {
            mask,
            scale_net: CouplingNet::new(dim, hidden, rng),
            shift_net: CouplingNet::new(dim, hidden, rng),
        })
    }

    /// The identity coupling layer (`s = t = 0`).
    pub fn identity(mask: Vec<bool>, rng: &mut SplitRng) -> Result<Self> {
        let layer = Self::new(mask, Self::DEFAULT_HIDDEN, rng)?;
        let dim = layer.mask.len();
        Ok(Self {
            mask: layer.mask,
            scale_net: CouplingNet::zeroed(dim, Self::DEFAULT_HIDDEN, rng),
            shift_net: CouplingNet::zeroed(dim, Self::DEFAULT_HIDDEN, rng),
        })
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    fn mask_tensors(&self, tape: &Tape) -> (Var, Var) {
        let m: Vec<f64> = self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let om: Vec<f64> = self.mask.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect();
        (tape.constant(Tensor::from_slice(&m)), tape.constant(Tensor::from_slice(&om)))
    }

    pub fn params(&self) -> Vec<Param> {
        let mut p = self.scale_net.params();
        p.extend(self.shift_net.params());
        p
    }

    /// Returns `(y, log_det)`.
    pub fn forward(&self, tape: &Tape, x: &Var) -> Result<(Var, Var)> {
        if x.shape() != [self.dim()] {
            return Err(Error::ShapeMismatch {
                context: "coupling forward",
                lhs: x.shape(),
                rhs: vec![self.dim()],
            });
        }
        let (m, om) = self.mask_tensors(tape);
        let x_a = x.mul(&m)?;
        let s = self.scale_net.forward(tape, &x_a)?.mul(&om)?;
        let t = self.shift_net.forward(tape, &x_a)?.mul(&om)?;
        let transformed = x.mul(&s.exp())?.add(&t)?.mul(&om)?;
        let y = x_a.add(&transformed)?;
        let log_det = s.sum_all()?;
        Ok((y, log_det))
    }

    /// Exact algebraic inverse: `x_b = (y_b - t(y_a)) * exp(-s(y_a))`.
    /// Returns `(x, log_det_of_inverse)` (the negated forward log-det).
    pub fn inverse(&self, tape: &Tape, y: &Var) -> Result<(Var, Var)> {
        if y.shape() != [self.dim()] {
            return Err(Error::ShapeMismatch {
                context: "coupling inverse",
                lhs: y.shape(),
                rhs: vec![self.dim()],
            });
        }
        let (m, om) = self.mask_tensors(tape);
        let y_a = y.mul(&m)?;
        let s = self.scale_net.forward(tape, &y_a)?.mul(&om)?;
        let t = self.shift_net.forward(tape, &y_a)?.mul(&om)?;
        let restored = y.sub(&t)?.mul(&s.neg().exp())?.mul(&om)?;
        let x = y_a.add(&restored)?;
        let log_det_inv = s.sum_all()?.neg();
        Ok((x, log_det_inv))
    }
}

/// A stack of coupling layers applied base-to-data:
/// `x = f_K ∘ ... ∘ f_1 (z0)`.
pub struct Flow {
    pub layers: Vec<CouplingLayer>,
}

impl Flow {
    /// A flow over `dim` dimensions with `n_layers` coupling layers of
    /// alternating half masks.
    pub fn alternating(dim: usize, n_layers: usize, hidden: usize, rng: &mut SplitRng) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid_argument("flow needs at least 2 dimensions"));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let mask: Vec<bool> = (0..dim).map(|d| (d + l) % 2 == 0).collect();
            layers.push(CouplingLayer::new(mask, hidden, rng)?);
        }
        Ok(Self { layers })
    }

    pub fn params(&self) -> Vec<Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    /// Push a base sample through every layer; returns `(x, total log_det)`.
    pub fn forward(&self, tape: &Tape, z0: &Var) -> Result<(Var, Var)> {
        let mut x = z0.clone();
        let mut total = tape.constant(Tensor::scalar(0.0));
        for layer in &self.layers {
            let (next, ld) = layer.forward(tape, &x)?;
            x = next;
            total = total.add(&ld)?;
        }
        Ok((x, total))
    }

    /// Invert a data point back to the base; returns
    /// `(z0, total log_det of the inverse)`.
    pub fn inverse(&self, tape: &Tape, x: &Var) -> Result<(Var, Var)> {
        let mut z = x.clone();
        let mut total = tape.constant(Tensor::scalar(0.0));
        for layer in self.layers.iter().rev() {
            let (prev, ld) = layer.inverse(tape, &z)?;
            z = prev;
            total = total.add(&ld)?;
        }
        Ok((z, total))
    }

    pub fn sample(&self, tape: &Tape, rng: &mut SplitRng) -> Result<Var> {
        let dim = self.layers.first().map_or(0, CouplingLayer::dim).max(1);
        let z0 = tape.leaf(Tensor::randn(&[dim], rng));
        Ok(self.forward(tape, &z0)?.0)
    }
}

/// Standard-normal log-density of a vector.
fn base_log_prob(z: &Var) -> Result<Var> {
    let d = z.shape().iter().product::<usize>() as f64;
    Ok(z.powi(2)
        .sum_all()?
        .mul_scalar(-0.5)
        .add_scalar(-0.5 * d * (2.0 * std::f64::consts::PI).ln()))
}

/// Log-density of `x` under the flow with a standard-normal base:
/// invert to `z0`, take the base log-density, and add the accumulated
/// inverse log-determinants (change of variables).
pub fn flow_log_prob(tape: &Tape, flow: &Flow, x: &Var) -> Result<Var> {
    let (z0, log_det_inv) = flow.inverse(tape, x)?;
    base_log_prob(&z0)?.add(&log_det_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn half_mask(dim: usize) -> Vec<bool> {
        (0..dim).map(|d| d % 2 == 0).collect()
    }

    #[test]
    fn zero_nets_are_the_identity_with_zero_log_det() {
        let mut rng = SplitRng::new(1);
        let layer = CouplingLayer::identity(half_mask(4), &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[0.3, -1.0, 2.0, 0.5]));
        let (y, ld) = layer.forward(&tape, &x).unwrap();
        assert_eq!(y.value().data(), x.value().data());
        assert_eq!(ld.item().unwrap(), 0.0);
    }

    #[test]
    fn zero_scale_constant_shift_translates() {
        let mut rng = SplitRng::new(2);
        let layer = CouplingLayer::identity(half_mask(2), &mut rng).unwrap();
        layer.shift_net.l2.b.set_value(Tensor::from_slice(&[9.0, 7.0]));
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[1.0, 2.0]));
        let (y, ld) = layer.forward(&tape, &x).unwrap();
        // dim 0 passes through; dim 1 is shifted by 7
        assert_eq!(y.value().data(), &[1.0, 9.0]);
        assert_eq!(ld.item().unwrap(), 0.0);
    }

    #[test]
    fn inverse_round_trip_to_1e10() {
        let mut rng = SplitRng::new(3);
        for dims in [2usize, 4, 8] {
            for n_layers in [1usize, 2, 4] {
                let flow = Flow::alternating(dims, n_layers, 16, &mut rng).unwrap();
                for _ in 0..5 {
                    let tape = Tape::new();
                    let x = tape.leaf(Tensor::rand_uniform(&[dims], -2.0, 2.0, &mut rng));
                    let (z, _) = flow.inverse(&tape, &x).unwrap();
                    let (back, _) = flow.forward(&tape, &z).unwrap();
                    let diff = back.value().max_abs_diff(&x.value());
                    assert!(diff < 1e-10, "round trip diff {diff}");
                    // and the other direction
                    let (y, _) = flow.forward(&tape, &x).unwrap();
                    let (orig, _) = flow.inverse(&tape, &y).unwrap();
                    assert!(orig.value().max_abs_diff(&x.value()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn log_det_matches_numerical_jacobian_2d() {
        let mut rng = SplitRng::new(4);
        let flow = Flow::alternating(2, 3, 16, &mut rng).unwrap();
        let h = 1e-6;
        for _ in 0..10 {
            let point = Tensor::rand_uniform(&[2], -1.5, 1.5, &mut rng);
            let eval = |p: &Tensor| -> Vec<f64> {
                let tape = Tape::new();
                let x = tape.leaf(p.clone());
                flow.forward(&tape, &x).unwrap().0.value().into_data()
            };
            // finite-difference Jacobian of the forward map
            let mut jac = [[0.0f64; 2]; 2];
            #[allow(clippy::needless_range_loop)]
            for j in 0..2 {
                let mut plus = point.clone();
                plus.data_mut()[j] += h;
                let mut minus = point.clone();
                minus.data_mut()[j] -= h;
                let fp = eval(&plus);
                let fm = eval(&minus);
                for i in 0..2 {
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let tape = Tape::new();
            let x = tape.leaf(point);
            let (_, ld) = flow.forward(&tape, &x).unwrap();
            assert!(
                (ld.item().unwrap() - det.abs().ln()).abs() < 1e-4,
                "log_det {} vs numerical {}",
                ld.item().unwrap(),
                det.abs().ln()
            );
        }
    }

    #[test]
    fn stack_log_det_is_the_sum_of_layers() {
        let mut rng = SplitRng::new(5);
        let flow = Flow::alternating(4, 3, 8, &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::rand_uniform(&[4], -1.0, 1.0, &mut rng));
        let (_, total) = flow.forward(&tape, &x).unwrap();
        let mut v = x.clone();
        let mut sum = 0.0;
        for layer in &flow.layers {
            let (next, ld) = layer.forward(&tape, &v).unwrap();
            sum += ld.item().unwrap();
            v = next;
        }
        assert_relative_eq!(total.item().unwrap(), sum, max_relative = 1e-12);
    }

    #[test]
    fn empty_stack_log_prob_is_the_base_density() {
        let flow = Flow { layers: Vec::new() };
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[0.0]));
        let lp = flow_log_prob(&tape, &flow, &x).unwrap().item().unwrap();
        assert_relative_eq!(lp, -0.9189385332046727, max_relative = 1e-12);
        // 2-D at the origin: twice the constant
        let x2 = tape.leaf(Tensor::from_slice(&[0.0, 0.0]));
        let lp2 = flow_log_prob(&tape, &flow, &x2).unwrap().item().unwrap();
        assert_relative_eq!(lp2, 2.0 * -0.9189385332046727, max_relative = 1e-12);
    }

    #[test]
    fn density_integrates_to_one_on_a_grid() {
        // 2-D quadrature over [-6, 6]^2
        let mut rng = SplitRng::new(6);
        let flow = Flow::alternating(2, 2, 8, &mut rng).unwrap();
        let step = 0.06;
        let n = (12.0 / step) as usize;
        let mut integral = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -6.0 + (i as f64 + 0.5) * step;
                let y = -6.0 + (j as f64 + 0.5) * step;
                let tape = Tape::new();
                let p = tape.leaf(Tensor::from_slice(&[x, y]));
                let lp = flow_log_prob(&tape, &flow, &p).unwrap().item().unwrap();
                integral += lp.exp() * step * step;
            }
        }
        assert!((integral - 1.0).abs() < 1e-2, "integral {integral}");
    }

    #[test]
    fn coupling_gradients_pass_grad_check() {
        use crate::autograd::grad_check;
        let mut rng = SplitRng::new(7);
        let flow = Flow::alternating(2, 2, 8, &mut rng).unwrap();
        for _ in 0..5 {
            let x0 = Tensor::rand_uniform(&[2], -1.5, 1.5, &mut rng);
            let report = grad_check(
                |tape, vars| flow_log_prob(tape, &flow, &vars[0]),
                &[x0],
                1e-5,
            )
            .unwrap();
            assert!(report.within(1e-4), "{report:?}");
        }
    }

    #[test]
    fn mask_must_split_dimensions() {
        let mut rng = SplitRng::new(8);
        assert!(CouplingLayer::new(vec![true, true], 4, &mut rng).is_err());
        assert!(CouplingLayer::new(vec![false, false], 4, &mut rng).is_err());
    }
}
