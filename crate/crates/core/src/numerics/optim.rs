use crate::error::{Error, Result};

/// SGD with classic (heavy-ball) momentum:
/// `v <- momentum * v + g`, then `theta <- theta - lr * v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl SgdState {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Domain(format!("learning rate must be > 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Domain(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(SgdState {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    /// Restores a state with explicit velocity buffers (checkpoint reload).
    pub fn with_velocity(lr: f64, momentum: f64, velocity: Vec<Vec<f64>>) -> Result<Self> {
        let mut s = SgdState::new(lr, momentum)?;
        s.velocity = velocity;
        Ok(s)
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// Applies one update. Velocity buffers are allocated on the first call
    /// and their shapes are fixed from then on.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {}",
                self.velocity.len(),
                params.len()
            )));
        }
        for (k, ((p, g), v)) in params.iter().zip(grads).zip(&self.velocity).enumerate() {
            if p.len() != g.len() || p.len() != v.len() {
                return Err(Error::Shape(format!(
                    "tensor {k}: param {} / grad {} / velocity {}",
                    p.len(),
                    g.len(),
                    v.len()
                )));
            }
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(self.velocity.iter_mut()) {
            for ((theta, &grad), vel) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *vel = self.momentum * *vel + grad;
                *theta -= self.lr * *vel;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_gradient_descent() {
        let mut s = SgdState::new(0.1, 0.0).unwrap();
        let mut theta = [1.0];
        s.step(&mut [&mut theta], &[&[2.0]]).unwrap();
        assert!((theta[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = SgdState::new(0.5, 0.9).unwrap();
        let mut theta = [1.5, -2.0, 0.25];
        for _ in 0..5 {
            s.step(&mut [&mut theta], &[&[0.0; 3]]).unwrap();
        }
        assert_eq!(theta, [1.5, -2.0, 0.25]);
    }

    #[test]
    fn momentum_unrolled_by_hand() {
        // v1 = 1, theta1 = -1; v2 = 0.9 + 1 = 1.9, theta2 = -2.9
        let mut s = SgdState::new(1.0, 0.9).unwrap();
        let mut theta = [0.0];
        s.step(&mut [&mut theta], &[&[1.0]]).unwrap();
        s.step(&mut [&mut theta], &[&[1.0]]).unwrap();
        assert!((theta[0] + 2.9).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_matches_vanilla_exactly() {
        let mut s = SgdState::new(0.3, 0.0).unwrap();
        let mut a = [0.7, -1.1];
        let mut b = a;
        for g in [[0.2, -0.4], [1.5, 0.01], [-0.3, 0.3]] {
            s.step(&mut [&mut a], &[&g]).unwrap();
            for (x, gx) in b.iter_mut().zip(g) {
                *x -= 0.3 * gx;
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = SgdState::new(0.1, 0.9).unwrap();
        let mut theta = [0.0, 1.0];
        assert!(matches!(
            s.step(&mut [&mut theta], &[&[1.0]]),
            Err(Error::Shape(_))
        ));
        s.step(&mut [&mut theta], &[&[1.0, 1.0]]).unwrap();
        let mut other = [0.0; 3];
        assert!(s.step(&mut [&mut other], &[&[0.0; 3]]).is_err());
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(SgdState::new(0.0, 0.9).is_err());
        assert!(SgdState::new(0.1, 1.0).is_err());
    }
}
