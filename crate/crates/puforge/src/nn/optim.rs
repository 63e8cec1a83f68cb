use crate::error::{Error, Result};
use crate::nn::model::{GradientSet, ModelParams};

/// SGD with classical momentum. Velocity buffers start at zero and follow
/// `v = momentum * v + g`, `theta -= lr * v`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    pub momentum: f64,
    velocity_w: Vec<Vec<f64>>,
    velocity_b: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(model: &ModelParams, lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::config(format!("lr must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(OptimizerState {
            lr,
            momentum,
            velocity_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            velocity_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        })
    }

    pub fn step(&mut self, model: &mut ModelParams, grads: &GradientSet) -> Result<()> {
        if grads.weights.len() != model.weights.len()
            || grads.biases.len() != model.biases.len()
        {
            return Err(Error::shape(
                "gradient layers",
                model.weights.len(),
                grads.weights.len(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::Numeric(
                "non-finite gradient passed to sgd step".into(),
            ));
        }
        for l in 0..model.weights.len() {
            if grads.weights[l].len() != model.weights[l].len() {
                return Err(Error::shape(
                    format!("gradient weights layer {l}"),
                    model.weights[l].len(),
                    grads.weights[l].len(),
                ));
            }
            for (k, g) in grads.weights[l].iter().enumerate() {
                let v = &mut self.velocity_w[l][k];
                *v = self.momentum * *v + g;
                model.weights[l][k] -= self.lr * *v;
            }
            for (k, g) in grads.biases[l].iter().enumerate() {
                let v = &mut self.velocity_b[l][k];
                *v = self.momentum * *v + g;
                model.biases[l][k] -= self.lr * *v;
            }
        }
        Ok(())
    }
}

/// Exponential moving average update for a teacher copy:
/// `teacher = (1 - beta) * teacher + beta * student`, elementwise.
/// `beta = 1` makes the teacher trail the student exactly.
pub fn ema_update(teacher: &mut ModelParams, student: &ModelParams, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!(
            "ema beta must be in (0, 1], got {beta}"
        )));
    }
    if teacher.layer_dims != student.layer_dims {
        return Err(Error::shape(
            "ema layer dims",
            format!("{:?}", teacher.layer_dims),
            format!("{:?}", student.layer_dims),
        ));
    }
    for l in 0..teacher.weights.len() {
        for (t, s) in teacher.weights[l].iter_mut().zip(&student.weights[l]) {
            *t = (1.0 - beta) * *t + beta * s;
        }
        for (t, s) in teacher.biases[l].iter_mut().zip(&student.biases[l]) {
            *t = (1.0 - beta) * *t + beta * s;
        }
    }
    Ok(())
}
