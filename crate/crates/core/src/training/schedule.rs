//! Learning-rate schedules for the two training phases.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    C3d,
    Rnn,
}

/// How the base learning rate decays over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayRule {
    /// Halve every `n` epochs.
    HalveEvery(usize),
    /// Multiply by `factor` every `every` epochs.
    ScaleEvery { factor: f64, every: usize },
    /// No decay.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub phase: Phase,
    pub base_lr: f64,
    pub decay: DecayRule,
}

impl Schedule {
    /// Trunk phase: 1e-4, halved every 5 epochs.
    pub fn c3d() -> Self {
        Schedule {
            phase: Phase::C3d,
            base_lr: 1e-4,
            decay: DecayRule::HalveEvery(5),
        }
    }

    /// Recurrent phase: 1e-3, scaled by 0.1 every 10 epochs.
    pub fn rnn() -> Self {
        Schedule {
            phase: Phase::Rnn,
            base_lr: 1e-3,
            decay: DecayRule::ScaleEvery {
                factor: 0.1,
                every: 10,
            },
        }
    }

    /// Fixed learning rate (small overfitting probes).
    pub fn constant(phase: Phase, lr: f64) -> Self {
        Schedule {
            phase,
            base_lr: lr,
            decay: DecayRule::Constant,
        }
    }

    /// Learning rate for a 1-based epoch index.
    pub fn lr(&self, epoch: usize) -> f64 {
        assert!(epoch >= 1, "epochs are 1-based");
        match self.decay {
            DecayRule::HalveEvery(n) => self.base_lr * 0.5f64.powi(((epoch - 1) / n) as i32),
            DecayRule::ScaleEvery { factor, every } => {
                self.base_lr * factor.powi(((epoch - 1) / every) as i32)
            }
            DecayRule::Constant => self.base_lr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c3d_schedule_halves_every_five_epochs() {
        let s = Schedule::c3d();
        let lrs: Vec<f64> = (1..=20).map(|e| s.lr(e)).collect();
        for (i, &lr) in lrs.iter().enumerate() {
            let expected = match i / 5 {
                0 => 1e-4,
                1 => 5e-5,
                2 => 2.5e-5,
                _ => 1.25e-5,
            };
            assert_eq!(lr, expected, "epoch {}", i + 1);
        }
    }

    #[test]
    fn rnn_schedule_drops_tenfold_at_epoch_eleven() {
        let s = Schedule::rnn();
        for e in 1..=10 {
            assert_eq!(s.lr(e), 1e-3);
        }
        for e in 11..=20 {
            assert!((s.lr(e) - 1e-4).abs() < 1e-18);
        }
    }

    #[test]
    fn constant_schedule_never_decays() {
        let s = Schedule::constant(Phase::Rnn, 3e-3);
        assert_eq!(s.lr(1), 3e-3);
        assert_eq!(s.lr(500), 3e-3);
    }
}
