use crate::encoder::{EncoderParams, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

pub(crate) struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    first: Option<Gradients>,
    second: Option<Gradients>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, lr: f64, params: &EncoderParams) -> Self {
        let (first, second) = match kind {
            Optimizer::Sgd => (None, None),
            Optimizer::Adam { .. } => (Some(params.zeros_like()), Some(params.zeros_like())),
        };
        OptimizerState {
            kind,
            lr,
            step: 0,
            first,
            second,
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grads: &Gradients) -> Result<()> {
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::Numerical(name.to_string()));
        }
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => params.add_scaled(-self.lr, grads),
            Optimizer::Adam { beta1, beta2, eps } => {
                let m = self.first.as_mut().expect("adam state");
                let v = self.second.as_mut().expect("adam state");
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let lr = self.lr;
                for (((_, p), (_, g)), ((_, m), (_, v))) in params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(m.tensors_mut().into_iter().zip(v.tensors_mut()))
                {
                    for (((p, &g), m), v) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
        params.round_to_f32();
        Ok(())
    }
}
