//! Metric rows emitted by training loops and experiment runners.
//!
//! The CSV form is long/tidy: one line per (step, metric) with the header
//! `experiment,seed,step,metric,value,wall_s`, UTF-8, LF line endings.

use std::io::Write;

use crate::error::Result;

pub const CSV_HEADER: &str = "experiment,seed,step,metric,value,wall_s";

/// Named metric values recorded at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub experiment: String,
    pub seed: u64,
    pub step: usize,
    pub values: Vec<(String, f64)>,
    pub wall_s: f64,
}

impl MetricsRecord {
    pub fn new(experiment: impl Into<String>, seed: u64, step: usize, wall_s: f64) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            step,
            values: Vec::new(),
            wall_s,
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.values.push((name.into(), value));
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Writes the header followed by every record, one line per metric value.
pub fn write_csv<W: Write>(mut out: W, records: &[MetricsRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        for (name, value) in &r.values {
            writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.experiment, r.seed, r.step, name, value, r.wall_s
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rec = MetricsRecord::new("wfm-demo", 7, 3, 0.25)
            .with("loss", 0.5)
            .with("accuracy", 1.0);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "experiment,seed,step,metric,value,wall_s\n\
             wfm-demo,7,3,loss,0.5,0.250000\n\
             wfm-demo,7,3,accuracy,1,0.250000\n"
        );
    }
}
