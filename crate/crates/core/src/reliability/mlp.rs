//! Single-hidden-layer perceptron with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::Normalization;
use super::ReliabilityError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
            Activation::Tanh => a.tanh(),
        }
    }

    pub fn derivative(self, a: f64) -> f64 {
        self.value_and_derivative(a).1
    }

    pub fn value_and_derivative(self, a: f64) -> (f64, f64) {
        match self {
            Activation::Identity => (a, 1.0),
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-a).exp());
                (s, s * (1.0 - s))
            }
            Activation::Tanh => {
                let t = a.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

/// How inputs reach a hidden unit.
///
/// `PerInput` squashes every weighted input separately and sums the results,
/// `h_j = Σ_i G(w_ij x_i + b_j)`. `Dense` squashes the weighted sum,
/// `h_j = G(Σ_i w_ij x_i + b_j)`. In both cases `N = F(b + Σ_j v_j h_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenForm {
    #[default]
    PerInput,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    XavierUniform,
    /// Every weight drawn from U(−0.5, 0.5).
    Uniform,
}

/// Weights, activations and the normalization applied around them.
///
/// Parameters are addressed through a flat vector laid out as
/// `[w (m × n, row j = hidden unit), b_j (m), v (m), b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    pub form: HiddenForm,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub w: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub v: Vec<f64>,
    pub b: f64,
    pub input_norm: Normalization,
    pub output_norm: Normalization,
}

impl MlpModel {
    pub fn zeros(inputs: usize, hidden: usize, form: HiddenForm, g: Activation, f: Activation) -> Self {
        Self {
            inputs,
            hidden,
            form,
            hidden_activation: g,
            output_activation: f,
            w: vec![0.0; inputs * hidden],
            b_hidden: vec![0.0; hidden],
            v: vec![0.0; hidden],
            b: 0.0,
            input_norm: Normalization::identity(inputs),
            output_norm: Normalization::identity(1),
        }
    }

    /// Random weights, zero biases.
    pub fn init(
        inputs: usize,
        hidden: usize,
        form: HiddenForm,
        g: Activation,
        f: Activation,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        let mut m = Self::zeros(inputs, hidden, form, g, f);
        let (lim_w, lim_v) = match init {
            Init::XavierUniform => (
                (6.0 / (inputs + hidden) as f64).sqrt(),
                (6.0 / (hidden + 1) as f64).sqrt(),
            ),
            Init::Uniform => (0.5, 0.5),
        };
        m.w.iter_mut().for_each(|x| *x = rng.random_range(-lim_w..lim_w));
        m.v.iter_mut().for_each(|x| *x = rng.random_range(-lim_v..lim_v));
        m
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.hidden + 2 * self.hidden + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend(&self.w);
        p.extend(&self.b_hidden);
        p.extend(&self.v);
        p.push(self.b);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (nw, m) = (self.w.len(), self.hidden);
        self.w.copy_from_slice(&p[..nw]);
        self.b_hidden.copy_from_slice(&p[nw..nw + m]);
        self.v.copy_from_slice(&p[nw + m..nw + 2 * m]);
        self.b = p[nw + 2 * m];
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    fn check(&self, x: &[f64]) -> Result<(), ReliabilityError> {
        if x.len() != self.inputs {
            return Err(ReliabilityError::Dimension {
                expected: self.inputs,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-output activation `z` for a normalized input.
    fn z(&self, x: &[f64]) -> f64 {
        let g = self.hidden_activation;
        let mut z = self.b;
        for j in 0..self.hidden {
            let row = &self.w[j * self.inputs..(j + 1) * self.inputs];
            let h = match self.form {
                HiddenForm::Dense => g.apply(row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b_hidden[j]),
                HiddenForm::PerInput => row.iter().zip(x).map(|(w, x)| g.apply(w * x + self.b_hidden[j])).sum(),
            };
            z += self.v[j] * h;
        }
        z
    }

    /// Output on the normalized scale for a normalized input.
    pub fn forward_normalized(&self, x: &[f64]) -> Result<f64, ReliabilityError> {
        self.check(x)?;
        Ok(self.output_activation.apply(self.z(x)))
    }

    /// Prediction on the target scale, not clamped.
    pub fn forward(&self, raw: &[f64]) -> Result<f64, ReliabilityError> {
        self.check(raw)?;
        let x = self.input_norm.apply(raw);
        Ok(self.output_norm.invert_scalar(self.output_activation.apply(self.z(&x))))
    }

    /// Prediction clamped at zero for reporting counts.
    pub fn predict_count(&self, raw: &[f64]) -> Result<f64, ReliabilityError> {
        Ok(self.forward(raw)?.max(0.0))
    }

    /// Squared error `(y − t)²` on the normalized scale and its gradient
    /// with respect to the flat parameter vector, accumulated into `grad`
    /// with weight `scale`.
    pub(crate) fn accumulate_gradient(&self, x: &[f64], target: f64, scale: f64, grad: &mut [f64]) -> f64 {
        let (n, m) = (self.inputs, self.hidden);
        let g = self.hidden_activation;
        let (ob, ov) = (n * m, n * m + m);
        // forward pass keeping G and G' per hidden unit (Dense) or per
        // unit and input (PerInput)
        let width = match self.form {
            HiddenForm::Dense => 1,
            HiddenForm::PerInput => n,
        };
        let mut dg = vec![0.0; m * width];
        let mut h = vec![0.0; m];
        let mut z = self.b;
        for j in 0..m {
            let row = &self.w[j * n..(j + 1) * n];
            let bj = self.b_hidden[j];
            match self.form {
                HiddenForm::Dense => {
                    let a = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + bj;
                    let (v, d) = g.value_and_derivative(a);
                    h[j] = v;
                    dg[j] = d;
                }
                HiddenForm::PerInput => {
                    for i in 0..n {
                        let (v, d) = g.value_and_derivative(row[i] * x[i] + bj);
                        h[j] += v;
                        dg[j * n + i] = d;
                    }
                }
            }
            z += self.v[j] * h[j];
        }
        let (y, fz) = self.output_activation.value_and_derivative(z);
        let err = y - target;
        let delta = 2.0 * err * fz * scale;
        for j in 0..m {
            let dv = delta * self.v[j];
            match self.form {
                HiddenForm::Dense => {
                    let back = dv * dg[j];
                    for i in 0..n {
                        grad[j * n + i] += back * x[i];
                    }
                    grad[ob + j] += back;
                }
                HiddenForm::PerInput => {
                    let mut bsum = 0.0;
                    for i in 0..n {
                        let back = dv * dg[j * n + i];
                        grad[j * n + i] += back * x[i];
                        bsum += back;
                    }
                    grad[ob + j] += bsum;
                }
            }
            grad[ov + j] += delta * h[j];
        }
        grad[n * m + 2 * m] += delta;
        err * err
    }

    /// Loss and gradient for one normalized sample.
    pub fn loss_gradient(&self, x: &[f64], target: f64) -> Result<(f64, Vec<f64>), ReliabilityError> {
        self.check(x)?;
        let mut grad = vec![0.0; self.param_count()];
        let loss = self.accumulate_gradient(x, target, 1.0, &mut grad);
        Ok((loss, grad))
    }

    /// `∂N/∂x_i` on the normalized input and output scales.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ReliabilityError> {
        self.check(x)?;
        let (n, m) = (self.inputs, self.hidden);
        let g = self.hidden_activation;
        let fz = self.output_activation.derivative(self.z(x));
        let mut out = vec![0.0; n];
        for j in 0..m {
            let row = &self.w[j * n..(j + 1) * n];
            match self.form {
                HiddenForm::Dense => {
                    let a = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b_hidden[j];
                    let d = self.v[j] * g.derivative(a);
                    for i in 0..n {
                        out[i] += d * row[i];
                    }
                }
                HiddenForm::PerInput => {
                    for i in 0..n {
                        out[i] += self.v[j] * g.derivative(row[i] * x[i] + self.b_hidden[j]) * row[i];
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= fz);
        Ok(out)
    }
}

/// Finite-difference step on the normalized parameter scale.
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-4;

/// Largest discrepancy between the analytic loss gradient and central
/// differences, relative to `max(|analytic|, |numeric|, floor)`.
pub fn gradient_check(model: &MlpModel, x: &[f64], target: f64) -> Result<f64, ReliabilityError> {
    let (_, analytic) = model.loss_gradient(x, target)?;
    let base = model.params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + GRADIENT_CHECK_STEP;
        probe.set_params(&p);
        let up = (probe.forward_normalized(x)? - target).powi(2);
        p[k] = base[k] - GRADIENT_CHECK_STEP;
        probe.set_params(&p);
        let down = (probe.forward_normalized(x)? - target).powi(2);
        let numeric = (up - down) / (2.0 * GRADIENT_CHECK_STEP);
        let denom = analytic[k].abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Mean `|∂N/∂x_i|` over `rows` (raw inputs), on normalized scales.
pub fn input_sensitivity(model: &MlpModel, rows: &[Vec<f64>]) -> Result<Vec<f64>, ReliabilityError> {
    let mut acc = vec![0.0; model.inputs];
    for r in rows {
        let g = model.input_gradient(&model.input_norm.apply(r))?;
        for (a, gi) in acc.iter_mut().zip(g) {
            *a += gi.abs();
        }
    }
    let n = rows.len().max(1) as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(form: HiddenForm, g: Activation, f: Activation, seed: u64) -> (MlpModel, Vec<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MlpModel::init(4, 3, form, g, f, Init::Uniform, &mut rng);
        m.b_hidden.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        m.b = rng.random_range(-0.5..0.5);
        let x = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        (m, x, rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_weights_give_denormalized_zero() {
        let mut m = MlpModel::zeros(10, 5, HiddenForm::PerInput, Activation::Tanh, Activation::Identity);
        m.output_norm = Normalization {
            mean: vec![7.5],
            sd: vec![2.0],
        };
        assert_eq!(m.forward(&[1.0; 10]).unwrap(), 7.5);
    }

    #[test]
    fn linear_single_unit() {
        for form in [HiddenForm::Dense, HiddenForm::PerInput] {
            let mut m = MlpModel::zeros(3, 1, form, Activation::Identity, Activation::Identity);
            m.w = vec![0.0, 1.0, 0.0];
            m.v = vec![1.0];
            m.b_hidden = vec![0.25];
            m.b = 0.5;
            let x = [3.0, -2.0, 7.0];
            let hidden_bias = match form {
                HiddenForm::Dense => 0.25,
                HiddenForm::PerInput => 3.0 * 0.25,
            };
            assert!((m.forward(&x).unwrap() - (-2.0 + hidden_bias + 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = MlpModel::zeros(10, 2, HiddenForm::Dense, Activation::Tanh, Activation::Identity);
        assert!(matches!(m.forward(&[0.0; 9]), Err(ReliabilityError::Dimension { .. })));
    }

    #[test]
    fn hidden_permutation_invariant() {
        let (m, x, _) = random(HiddenForm::PerInput, Activation::Tanh, Activation::Identity, 5);
        let mut p = m.clone();
        let perm = [2, 0, 1];
        for (dst, &src) in perm.iter().enumerate() {
            p.w[dst * 4..dst * 4 + 4].copy_from_slice(&m.w[src * 4..src * 4 + 4]);
            p.b_hidden[dst] = m.b_hidden[src];
            p.v[dst] = m.v[src];
        }
        assert!((p.forward(&x).unwrap() - m.forward(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        for seed in 0..20 {
            for form in [HiddenForm::Dense, HiddenForm::PerInput] {
                for g in [Activation::Tanh, Activation::Sigmoid] {
                    let (m, x, t) = random(form, g, Activation::Identity, seed);
                    assert!(gradient_check(&m, &x, t).unwrap() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn linear_gradient_is_exact() {
        let (m, x, t) = random(HiddenForm::Dense, Activation::Identity, Activation::Identity, 9);
        assert!(gradient_check(&m, &x, t).unwrap() < 1e-9);
    }

    #[test]
    fn zero_input_zeroes_weight_gradient() {
        let (m, _, t) = random(HiddenForm::PerInput, Activation::Tanh, Activation::Identity, 3);
        let (_, grad) = m.loss_gradient(&[0.0; 4], t).unwrap();
        assert!(grad[..12].iter().all(|g| *g == 0.0));
        assert!(grad[12..].iter().any(|g| *g != 0.0));
    }

    #[test]
    fn constant_model_has_no_sensitivity() {
        let mut m = MlpModel::zeros(4, 3, HiddenForm::Dense, Activation::Tanh, Activation::Identity);
        m.b = 2.0;
        let s = input_sensitivity(&m, &[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(s, vec![0.0; 4]);
    }
}
