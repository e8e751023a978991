//! Meta-learned multi-task training on scalar quadratic tasks.
//!
//! Each task t has loss ½(θ − t)². One MAML step for a target task adapts
//! on the other tasks, scores the adapted parameters on the target, and
//! mixes that gradient with the plain supervised one using β.
//!
//! cargo run --example maml

use infergen::tensor::Sgd;
use infergen::trainer::{maml_step, MamlConfig, OptimizerKind, QuadraticToy, TrainConfig};

fn main() -> infergen::Result<()> {
    let cfg = TrainConfig {
        lr: 0.1,
        epochs: 1,
        batch_size: 1,
        seed: 0,
        optimizer: OptimizerKind::Sgd,
        dropout: false,
    };
    for beta in [0.0, 0.01, 0.5, 1.0] {
        let maml = MamlConfig {
            beta,
            ..MamlConfig::default()
        };
        let mut theta = QuadraticToy::params(1.0);
        let step = maml_step(
            &QuadraticToy,
            &mut theta,
            &mut Sgd { lr: cfg.lr },
            &[0.0],
            &[0.0],
            &[vec![2.0]],
            &maml,
            &cfg,
            0,
        )?;
        println!(
            "beta {beta:4}: theta 1 -> {:.7}  (meta loss {:.6}, supervised loss {:.6})",
            QuadraticToy::theta(&theta),
            step.meta_loss,
            step.supervised_loss
        );
    }
    Ok(())
}
