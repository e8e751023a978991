use crate::error::Result;
use crate::tensor::{Gradients, ParamSet, Tensor};

use super::Objective;

/// `L_t(θ) = ½(θ − t)²` on a single scalar `θ`, averaged over a batch of
/// targets `t`. Small enough to check every trainer by hand.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticToy;

impl QuadraticToy {
    pub fn params(theta: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("theta", Tensor::scalar(theta));
        p
    }

    pub fn theta(params: &ParamSet) -> f64 {
        params.get(0).data()[0]
    }
}

impl Objective for QuadraticToy {
    type Example = f64;

    fn loss(&self, params: &ParamSet, batch: &[f64]) -> Result<f64> {
        let theta = Self::theta(params);
        Ok(batch.iter().map(|t| 0.5 * (theta - t).powi(2)).sum::<f64>() / batch.len() as f64)
    }

    fn loss_and_grad(
        &self,
        params: &ParamSet,
        batch: &[f64],
        _seed: Option<u64>,
    ) -> Result<(f64, Gradients)> {
        let theta = Self::theta(params);
        let g = batch.iter().map(|t| theta - t).sum::<f64>() / batch.len() as f64;
        Ok((
            self.loss(params, batch)?,
            Gradients::from_vecs(vec![vec![g]]),
        ))
    }
}
