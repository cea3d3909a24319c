//! Evaluation report: per-phase accuracies and their mean.

use super::{average_incremental_accuracy, Strategy};

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseReport {
    pub phase: usize,
    pub classes_seen: usize,
    pub accuracy: f32,
}

/// Accuracy after every phase plus the run-level summary.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub phases: Vec<PhaseReport>,
    pub label: String,
}

impl EvalReport {
    pub fn new(strategy: Strategy, label: impl Into<String>) -> Self {
        EvalReport { strategy, phases: Vec::new(), label: label.into() }
    }

    pub fn push(&mut self, phase: usize, classes_seen: usize, accuracy: f32) {
        self.phases.push(PhaseReport { phase, classes_seen, accuracy });
    }

    pub fn accuracies(&self) -> Vec<f32> {
        self.phases.iter().map(|p| p.accuracy).collect()
    }

    /// Mean of the accuracies recorded after each phase.
    pub fn average_incremental_accuracy(&self) -> f32 {
        average_incremental_accuracy(&self.accuracies())
    }

    /// Fixed schema: one row per phase, then a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,classes_seen,accuracy,strategy\n");
        for p in &self.phases {
            out.push_str(&format!("{},{},{},{}\n", p.phase, p.classes_seen, p.accuracy, self.strategy.name()));
        }
        let total = self.phases.last().map_or(0, |p| p.classes_seen);
        out.push_str(&format!(
            "summary,{},{},{}\n",
            total,
            self.average_incremental_accuracy(),
            self.strategy.name()
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_phase_rows_and_summary() {
        let mut r = EvalReport::new(Strategy::Avg, "run");
        r.push(0, 4, 0.75);
        r.push(1, 6, 0.25);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "phase,classes_seen,accuracy,strategy");
        assert_eq!(lines[1], "0,4,0.75,avg");
        assert_eq!(lines[3], "summary,6,0.5,avg");
    }
}
