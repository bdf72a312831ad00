//! Adam optimizer over flat parameter vectors.

use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First and second moment accumulators for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One descent step along `grads`. Rejects non-finite gradients before
    /// touching parameters or optimizer state, so an aborted update leaves
    /// both exactly as they were.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "optimizer built for another shape");
        assert_eq!(params.len(), grads.len());
        if let Some(pos) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NumericAbort {
                context: "adam step",
                detail: format!("non-finite gradient at parameter {pos}"),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
        Ok(())
    }
}
