use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::Metrics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean mini-batch loss with dropout on.
    pub train_loss: f64,
    /// Validation loss with dropout off.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
    /// Filled in once the model is scored on held-out data.
    pub final_metrics: Option<Metrics>,
}

impl TrainReport {
    /// `epoch,train_loss,val_loss` rows with a header.
    pub fn loss_table(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "epochs_run: {}", self.epochs.len());
        let _ = writeln!(out, "best_epoch: {}", self.best_epoch);
        let _ = writeln!(out, "best_val_loss: {}", self.best_val_loss);
        let _ = writeln!(out, "stop_reason: {}", self.stop_reason.as_str());
        if let Some(m) = &self.final_metrics {
            let _ = writeln!(out, "accuracy: {:.4}", m.accuracy);
            let _ = writeln!(out, "mcc: {:.4}", m.mcc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_table_layout() {
        let r = TrainReport {
            epochs: vec![
                EpochRecord { epoch: 1, train_loss: 0.7, val_loss: 0.69 },
                EpochRecord { epoch: 2, train_loss: 0.5, val_loss: 0.6 },
            ],
            best_epoch: 2,
            best_val_loss: 0.6,
            stop_reason: StopReason::MaxEpochs,
            final_metrics: None,
        };
        assert_eq!(r.loss_table(), "epoch,train_loss,val_loss\n1,0.7,0.69\n2,0.5,0.6\n");
        assert!(r.summary().contains("stop_reason: max_epochs"));
    }
}
