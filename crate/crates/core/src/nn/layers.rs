use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::adam::Adam;
use super::matrix::Matrix;
use crate::error::{ensure_dim, Result};

/// A trainable tensor with its gradient accumulator and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Matrix,
    pub grad: Matrix,
    moment1: Matrix,
    moment2: Matrix,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = (value.rows(), value.cols());
        Param {
            value,
            grad: Matrix::zeros(r, c),
            moment1: Matrix::zeros(r, c),
            moment2: Matrix::zeros(r, c),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Param::new(Matrix::zeros(rows, cols))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn moments(&self) -> (&Matrix, &Matrix) {
        (&self.moment1, &self.moment2)
    }

    /// Applies one bias-corrected Adam update from the accumulated gradient.
    pub fn adam_update(&mut self, adam: &Adam, step: u64) -> Result<()> {
        adam.step(
            self.value.data_mut(),
            self.grad.data(),
            self.moment1.data_mut(),
            self.moment2.data_mut(),
            step,
        )
    }
}

/// Anything that owns named parameters in a stable order.
pub trait Parameters {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param));

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |_, p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, p| n += p.value.data().len());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

/// Analytic gradients of an affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGrads {
    pub input: Matrix,
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Dense layer `y = x W + b` with `W` stored as `in_dim x out_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub weight: Param,
    pub bias: Param,
}

impl AffineLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        AffineLayer {
            weight: Param::zeros(in_dim, out_dim),
            bias: Param::zeros(1, out_dim),
        }
    }

    /// Uniform initialization in `+-sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (in_dim + out_dim) as f64);
        let data: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        AffineLayer {
            weight: Param::new(Matrix::from_vec(in_dim, out_dim, data).expect("sized above")),
            bias: Param::zeros(1, out_dim),
        }
    }

    pub fn from_parts(weight: Matrix, bias: &[f64]) -> Result<Self> {
        ensure_dim("bias width", weight.cols(), bias.len())?;
        Ok(AffineLayer {
            bias: Param::new(Matrix::from_vec(1, bias.len(), bias.to_vec())?),
            weight: Param::new(weight),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        ensure_dim("affine input width", self.in_dim(), x.cols())?;
        let mut out = x.matmul(&self.weight.value)?;
        let bias = self.bias.value.row(0);
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Exact gradients for input `x` and upstream `dL/dy`, without side effects.
    pub fn gradients(&self, x: &Matrix, upstream: &Matrix) -> Result<AffineGrads> {
        ensure_dim("affine input width", self.in_dim(), x.cols())?;
        ensure_dim("affine upstream width", self.out_dim(), upstream.cols())?;
        ensure_dim("affine upstream rows", x.rows(), upstream.rows())?;
        let weight = x.t_matmul(upstream)?;
        let mut bias = Matrix::zeros(1, self.out_dim());
        for r in 0..upstream.rows() {
            for (b, g) in bias.row_mut(0).iter_mut().zip(upstream.row(r)) {
                *b += g;
            }
        }
        let input = upstream.matmul_t(&self.weight.value)?;
        Ok(AffineGrads {
            input,
            weight,
            bias,
        })
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        let g = self.gradients(x, upstream)?;
        self.weight.grad.add_assign(&g.weight)?;
        self.bias.grad.add_assign(&g.bias)?;
        Ok(g.input)
    }
}

impl Parameters for AffineLayer {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

pub fn relu_forward(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for v in out.data_mut() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Passes `upstream` where the pre-activation was positive.
pub fn relu_backward(z: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    ensure_dim("relu rows", z.rows(), upstream.rows())?;
    ensure_dim("relu cols", z.cols(), upstream.cols())?;
    let mut out = upstream.clone();
    for (g, &pre) in out.data_mut().iter_mut().zip(z.data()) {
        if pre <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(out)
}

/// Activations retained by [`Mlp::forward_cached`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    input: Matrix,
    pre: Matrix,
    act: Matrix,
}

/// Two affine layers with a ReLU between them.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: AffineLayer,
    pub output: AffineLayer,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        Mlp {
            hidden: AffineLayer::glorot(in_dim, hidden, rng),
            output: AffineLayer::glorot(hidden, out_dim, rng),
        }
    }

    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Mlp {
            hidden: AffineLayer::zeros(in_dim, hidden),
            output: AffineLayer::zeros(hidden, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        let pre = self.hidden.forward(x)?;
        let act = relu_forward(&pre);
        let out = self.output.forward(&act)?;
        Ok((
            out,
            MlpCache {
                input: x.clone(),
                pre,
                act,
            },
        ))
    }

    pub fn backward(&mut self, cache: &MlpCache, upstream: &Matrix) -> Result<Matrix> {
        let d_act = self.output.backward(&cache.act, upstream)?;
        let d_pre = relu_backward(&cache.pre, &d_act)?;
        self.hidden.backward(&cache.input, &d_pre)
    }
}

impl Parameters for Mlp {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.hidden.visit_params(&join(prefix, "hidden"), f);
        self.output.visit_params(&join(prefix, "output"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_input_gradient, check_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_layer_is_passthrough() {
        let layer = AffineLayer::from_parts(Matrix::identity(3), &[0.0; 3]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.5]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn scalar_affine() {
        let layer = AffineLayer::from_parts(Matrix::from_rows(&[[3.0]]).unwrap(), &[1.0]).unwrap();
        let y = layer.forward(&Matrix::from_rows(&[[2.0]]).unwrap()).unwrap();
        assert_eq!(y.get(0, 0), 7.0);
    }

    #[test]
    fn affine_rejects_wrong_width() {
        let layer = AffineLayer::zeros(3, 2);
        assert!(layer.forward(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut layer = AffineLayer::glorot(3, 2, &mut rng);
        layer.bias.value = random_matrix(1, 2, &mut rng);
        let x = random_matrix(4, 3, &mut rng);
        let target = random_matrix(4, 2, &mut rng);
        // L = 0.5 * ||xW + b - t||^2
        let loss = |layer: &mut AffineLayer, grads: bool| {
            let y = layer.forward(&x).unwrap();
            let mut diff = y.clone();
            for (d, t) in diff.data_mut().iter_mut().zip(target.data()) {
                *d -= t;
            }
            if grads {
                layer.backward(&x, &diff).unwrap();
            }
            0.5 * diff.frobenius_sq()
        };
        let err = check_params(&mut layer, 1e-5, loss);
        assert!(err < 1e-6, "max relative error {err}");

        let err = check_input_gradient(&x, 1e-5, |input| {
            let y = layer.forward(input).unwrap();
            let mut diff = y;
            for (d, t) in diff.data_mut().iter_mut().zip(target.data()) {
                *d -= t;
            }
            let g = layer.gradients(input, &diff).unwrap();
            (0.5 * diff.frobenius_sq(), g.input)
        });
        assert!(err < 1e-6, "input gradient error {err}");
    }

    #[test]
    fn zero_input_gives_zero_weight_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = AffineLayer::glorot(3, 2, &mut rng);
        let x = Matrix::zeros(2, 3);
        let up = random_matrix(2, 2, &mut rng);
        let g = layer.gradients(&x, &up).unwrap();
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert_eq!(g.bias.row(0)[0], up.get(0, 0) + up.get(1, 0));
    }

    #[test]
    fn relu_examples() {
        let z = Matrix::from_rows(&[[-1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(relu_forward(&z).data(), &[0.0, 0.0, 2.0]);
        let pos = Matrix::from_rows(&[[0.5, 1.0, 9.0]]).unwrap();
        assert_eq!(relu_forward(&pos), pos);
        let up = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(relu_backward(&z, &up).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_gradient_matches_finite_differences_off_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut z = random_matrix(5, 4, &mut rng);
        // keep inputs at least 1e-3 away from the kink
        for v in z.data_mut() {
            if v.abs() < 1e-3 {
                *v = if *v < 0.0 { -1e-2 } else { 1e-2 };
            }
        }
        let w = random_matrix(5, 4, &mut rng);
        let err = check_input_gradient(&z, 1e-5, |input| {
            let a = relu_forward(input);
            let loss: f64 = a.data().iter().zip(w.data()).map(|(x, y)| x * y).sum();
            (loss, relu_backward(input, &w).unwrap())
        });
        assert!(err < 1e-6, "relu gradient error {err}");
    }

    #[test]
    fn param_visiting_is_ordered_and_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::new(4, 3, 2, &mut rng);
        let mut names = Vec::new();
        mlp.visit_params("enc", &mut |n, _| names.push(String::from(n)));
        assert_eq!(
            names,
            ["enc.hidden.weight", "enc.hidden.bias", "enc.output.weight", "enc.output.bias"]
        );
        assert_eq!(mlp.param_count(), 4 * 3 + 3 + 3 * 2 + 2);
    }
}
