//! Adam with bias correction, mirroring the layer layout of an [`Mlp`].

use super::{Mlp, MlpGradients};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m_w: Vec<DMatrix<f64>>,
    pub v_w: Vec<DMatrix<f64>>,
    pub m_b: Vec<DVector<f64>>,
    pub v_b: Vec<DVector<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        let m_w: Vec<_> =
            net.layers().iter().map(|l| DMatrix::zeros(l.w.nrows(), l.w.ncols())).collect();
        let m_b: Vec<_> = net.layers().iter().map(|l| DVector::zeros(l.b.len())).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            v_w: m_w.clone(),
            m_w,
            v_b: m_b.clone(),
            m_b,
        }
    }

    /// One Adam update in place: moments track the gradients, parameters
    /// move by −lr·m̂/(√v̂ + ε) with bias-corrected moments.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (mw, vw) = (&mut self.m_w[i], &mut self.v_w[i]);
            let gw = &grads.w[i];
            for (k, g) in gw.iter().enumerate() {
                let m = self.beta1 * mw[k] + (1.0 - self.beta1) * g;
                let v = self.beta2 * vw[k] + (1.0 - self.beta2) * g * g;
                mw[k] = m;
                vw[k] = v;
                layer.w[k] -= lr * (m / c1) / ((v / c2).sqrt() + self.epsilon);
            }
            let (mb, vb) = (&mut self.m_b[i], &mut self.v_b[i]);
            let gb = &grads.b[i];
            for (k, g) in gb.iter().enumerate() {
                let m = self.beta1 * mb[k] + (1.0 - self.beta1) * g;
                let v = self.beta2 * vb[k] + (1.0 - self.beta2) * g * g;
                mb[k] = m;
                vb[k] = v;
                layer.b[k] -= lr * (m / c1) / ((v / c2).sqrt() + self.epsilon);
            }
        }
    }
}
