use super::matrix::Matrix;

/// Gradient-reversal gate: identity forward, `-lambda` times the upstream
/// gradient backward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrlGate {
    pub lambda: f64,
}

impl GrlGate {
    pub fn new(lambda: f64) -> Self {
        GrlGate { lambda }
    }

    pub fn forward(&self, z: &Matrix) -> Matrix {
        z.clone()
    }

    pub fn backward(&self, upstream: &Matrix) -> Matrix {
        let mut out = upstream.clone();
        let factor = -self.lambda;
        for v in out.data_mut() {
            *v *= factor;
        }
        out
    }
}
