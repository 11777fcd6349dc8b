use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub window: usize,
    pub mean_loss: f64,
    pub mean_perplexity: f64,
}

/// Per-step training losses and their windowed means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    window: usize,
    rows: Vec<LogRow>,
    losses: Vec<f64>,
}

impl TrainingLog {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            rows: Vec::new(),
            losses: Vec::new(),
        }
    }

    /// Records one step; closes a row every `window` steps. Perplexity is
    /// `exp(mean_loss)`.
    pub fn record(&mut self, loss: f64) {
        self.losses.push(loss);
        if self.losses.len().is_multiple_of(self.window) {
            let tail = &self.losses[self.losses.len() - self.window..];
            let mean_loss = tail.iter().sum::<f64>() / self.window as f64;
            self.rows.push(LogRow {
                window: self.rows.len(),
                mean_loss,
                mean_perplexity: mean_loss.exp(),
            });
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// `window,mean_loss,mean_perplexity`, shortest round-trip float format.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("window,mean_loss,mean_perplexity\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:?},{:?}", r.window, r.mean_loss, r.mean_perplexity);
        }
        s
    }

    /// `step,loss` for every recorded step.
    pub fn losses_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(s, "{i},{l:?}");
        }
        s
    }

    /// Mean loss over the first `n` rows and over the last `n` rows, when
    /// there are at least `n` rows.
    pub fn trend(&self, n: usize) -> Option<(f64, f64)> {
        if n == 0 || self.rows.len() < n {
            return None;
        }
        let mean = |rs: &[LogRow]| rs.iter().map(|r| r.mean_loss).sum::<f64>() / rs.len() as f64;
        Some((
            mean(&self.rows[..n]),
            mean(&self.rows[self.rows.len() - n..]),
        ))
    }
}
