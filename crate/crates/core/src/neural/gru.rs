//! Gated recurrent unit with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{add_outer, sigmoid, uniform_matrix};

/// GRU weights: `W_*` map the input (h×d), `U_*` the previous state (h×h).
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Array2<f64>,
    pub u_z: Array2<f64>,
    pub b_z: Array1<f64>,
    pub w_r: Array2<f64>,
    pub u_r: Array2<f64>,
    pub b_r: Array1<f64>,
    pub w_h: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_h: Array1<f64>,
}

pub(crate) struct StepCache {
    h_prev: Array1<f64>,
    z: Array1<f64>,
    r: Array1<f64>,
    h_tilde: Array1<f64>,
    pub(crate) h: Array1<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Array2::zeros((hidden_dim, input_dim));
        let u = || Array2::zeros((hidden_dim, hidden_dim));
        let b = || Array1::zeros(hidden_dim);
        Self {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    /// Uniform weights in `[-scale, scale]`, zero biases.
    pub fn random(rng: &mut impl Rng, input_dim: usize, hidden_dim: usize, scale: f64) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for m in [&mut p.w_z, &mut p.w_r, &mut p.w_h] {
            *m = uniform_matrix(rng, hidden_dim, input_dim, scale);
        }
        for m in [&mut p.u_z, &mut p.u_r, &mut p.u_h] {
            *m = uniform_matrix(rng, hidden_dim, hidden_dim, scale);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        let ok = [&self.w_z, &self.w_r, &self.w_h].iter().all(|m| m.dim() == (h, d))
            && [&self.u_z, &self.u_r, &self.u_h].iter().all(|m| m.dim() == (h, h))
            && [&self.b_z, &self.b_r, &self.b_h].iter().all(|b| b.len() == h);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("GRU tensors are inconsistent".into()))
        }
    }

    pub(crate) fn named_tensors<'a>(&'a self, prefix: &str) -> Vec<(String, &'a [f64])> {
        vec![
            (format!("{prefix}.w_z"), self.w_z.as_slice().unwrap()),
            (format!("{prefix}.u_z"), self.u_z.as_slice().unwrap()),
            (format!("{prefix}.b_z"), self.b_z.as_slice().unwrap()),
            (format!("{prefix}.w_r"), self.w_r.as_slice().unwrap()),
            (format!("{prefix}.u_r"), self.u_r.as_slice().unwrap()),
            (format!("{prefix}.b_r"), self.b_r.as_slice().unwrap()),
            (format!("{prefix}.w_h"), self.w_h.as_slice().unwrap()),
            (format!("{prefix}.u_h"), self.u_h.as_slice().unwrap()),
            (format!("{prefix}.b_h"), self.b_h.as_slice().unwrap()),
        ]
    }

    pub(crate) fn named_tensors_mut<'a>(&'a mut self, prefix: &str) -> Vec<(String, &'a mut [f64])> {
        vec![
            (format!("{prefix}.w_z"), self.w_z.as_slice_mut().unwrap()),
            (format!("{prefix}.u_z"), self.u_z.as_slice_mut().unwrap()),
            (format!("{prefix}.b_z"), self.b_z.as_slice_mut().unwrap()),
            (format!("{prefix}.w_r"), self.w_r.as_slice_mut().unwrap()),
            (format!("{prefix}.u_r"), self.u_r.as_slice_mut().unwrap()),
            (format!("{prefix}.b_r"), self.b_r.as_slice_mut().unwrap()),
            (format!("{prefix}.w_h"), self.w_h.as_slice_mut().unwrap()),
            (format!("{prefix}.u_h"), self.u_h.as_slice_mut().unwrap()),
            (format!("{prefix}.b_h"), self.b_h.as_slice_mut().unwrap()),
        ]
    }

    pub(crate) fn step_forward(&self, e: ArrayView1<f64>, h_prev: &Array1<f64>) -> StepCache {
        let z = (self.w_z.dot(&e) + self.u_z.dot(h_prev) + &self.b_z).mapv(sigmoid);
        let r = (self.w_r.dot(&e) + self.u_r.dot(h_prev) + &self.b_r).mapv(sigmoid);
        let rh = &r * h_prev;
        let h_tilde = (self.w_h.dot(&e) + self.u_h.dot(&rh) + &self.b_h).mapv(f64::tanh);
        let h = &z * &h_tilde + &(1.0 - &z) * h_prev;
        StepCache {
            h_prev: h_prev.clone(),
            z,
            r,
            h_tilde,
            h,
        }
    }

    /// Backpropagates `d_h` through one step, accumulating weight gradients.
    /// Returns the gradients of the input and of the previous state.
    pub(crate) fn step_backward(
        &self,
        e: ArrayView1<f64>,
        cache: &StepCache,
        d_h: &Array1<f64>,
        grads: &mut GruParams,
    ) -> (Array1<f64>, Array1<f64>) {
        let StepCache {
            h_prev,
            z,
            r,
            h_tilde,
            ..
        } = cache;
        let d_z = d_h * &(h_tilde - h_prev);
        let d_h_tilde = d_h * z;
        let mut d_h_prev = d_h * &(1.0 - z);

        let d_a_h = d_h_tilde * &h_tilde.mapv(|t| 1.0 - t * t);
        let rh = r * h_prev;
        add_outer(&mut grads.w_h, d_a_h.view(), e);
        add_outer(&mut grads.u_h, d_a_h.view(), rh.view());
        grads.b_h += &d_a_h;
        let d_rh = self.u_h.t().dot(&d_a_h);
        let d_r = &d_rh * h_prev;
        d_h_prev += &(&d_rh * r);
        let mut d_e = self.w_h.t().dot(&d_a_h);

        let d_a_z = d_z * &(z * &(1.0 - z));
        add_outer(&mut grads.w_z, d_a_z.view(), e);
        add_outer(&mut grads.u_z, d_a_z.view(), h_prev.view());
        grads.b_z += &d_a_z;
        d_e += &self.w_z.t().dot(&d_a_z);
        d_h_prev += &self.u_z.t().dot(&d_a_z);

        let d_a_r = d_r * (r * &(1.0 - r));
        add_outer(&mut grads.w_r, d_a_r.view(), e);
        add_outer(&mut grads.u_r, d_a_r.view(), h_prev.view());
        grads.b_r += &d_a_r;
        d_e += &self.w_r.t().dot(&d_a_r);
        d_h_prev += &self.u_r.t().dot(&d_a_r);

        (d_e, d_h_prev)
    }

    /// Runs the GRU over `inputs` from a zero state, returning the step caches.
    pub(crate) fn run(&self, inputs: &[ArrayView1<f64>]) -> Vec<StepCache> {
        let mut h = Array1::zeros(self.hidden_dim());
        let mut caches = Vec::with_capacity(inputs.len());
        for e in inputs {
            let c = self.step_forward(*e, &h);
            h = c.h.clone();
            caches.push(c);
        }
        caches
    }

    /// Backpropagates a gradient on the final state through a run; returns
    /// the gradient of each input, aligned with `inputs`.
    pub(crate) fn run_backward(
        &self,
        inputs: &[ArrayView1<f64>],
        caches: &[StepCache],
        d_final: Array1<f64>,
        grads: &mut GruParams,
    ) -> Vec<Array1<f64>> {
        let mut d_inputs = vec![Array1::zeros(0); inputs.len()];
        let mut d_h = d_final;
        for t in (0..inputs.len()).rev() {
            let (d_e, d_prev) = self.step_backward(inputs[t], &caches[t], &d_h, grads);
            d_inputs[t] = d_e;
            d_h = d_prev;
        }
        d_inputs
    }
}

/// One GRU update: `z = σ(W_z e + U_z h)`, `r = σ(W_r e + U_r h)`,
/// `h̃ = tanh(W_h e + U_h (r ⊙ h))`, `h' = z ⊙ h̃ + (1 - z) ⊙ h` (plus gate biases).
pub fn gru_step(params: &GruParams, e: &Array1<f64>, h_prev: &Array1<f64>) -> Result<Array1<f64>> {
    params.validate()?;
    if e.len() != params.input_dim() || h_prev.len() != params.hidden_dim() {
        return Err(Error::Shape(format!(
            "GRU expects input {} and state {}, got {} and {}",
            params.input_dim(),
            params.hidden_dim(),
            e.len(),
            h_prev.len()
        )));
    }
    Ok(params.step_forward(e.view(), h_prev).h)
}
