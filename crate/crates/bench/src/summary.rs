use std::collections::BTreeMap;

use lqdg_core::{Algorithm, SolveStatus};
use serde::{Deserialize, Serialize};

/// Convergence statistics of one algorithm over a batch of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub convergent_cases: usize,
    pub total_cases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_iterations_over_convergent: Option<f64>,
    /// Wall-clock data; kept out of the deterministic summary file.
    #[serde(skip)]
    pub average_elapsed_ns_over_convergent: Option<f64>,
}

impl AlgorithmSummary {
    pub fn convergent_fraction(&self) -> f64 {
        if self.total_cases == 0 {
            0.0
        } else {
            self.convergent_cases as f64 / self.total_cases as f64
        }
    }
}

/// Table-style summary of a random benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub n: usize,
    #[serde(rename = "N")]
    pub players: usize,
    pub m: usize,
    pub count: usize,
    pub base_seed: u64,
    pub equilibrium_tolerance: f64,
    /// Instances whose reference value iteration did not converge; they are
    /// excluded from every algorithm's denominator.
    pub skipped_instances: Vec<usize>,
    pub algorithms: BTreeMap<String, AlgorithmSummary>,
}

impl BenchSummary {
    pub fn get(&self, alg: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.get(alg.label())
    }

    /// Byte-stable JSON (no timing data).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }

    /// Average wall time per algorithm over convergent cases.
    pub fn timing_json(&self) -> String {
        let t: BTreeMap<&str, Option<f64>> = self
            .algorithms
            .iter()
            .map(|(k, v)| (k.as_str(), v.average_elapsed_ns_over_convergent))
            .collect();
        serde_json::to_string_pretty(&t).expect("timing serializes") + "\n"
    }
}

/// Outcome of one algorithm on one benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub index: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub final_e_norm: Option<f64>,
    pub elapsed_ns: u64,
    pub convergent: bool,
    pub note: String,
}

pub const OUTCOME_CSV_HEADER: &str =
    "index,seed,algorithm,status,iterations,final_e_norm,convergent,elapsed_ns,note";

impl InstanceOutcome {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.index,
            self.seed,
            self.algorithm.label(),
            self.status.map(|s| s.to_string()).unwrap_or_else(|| "Error".into()),
            self.iterations,
            self.final_e_norm.map(|e| format!("{e:e}")).unwrap_or_default(),
            u8::from(self.convergent),
            self.elapsed_ns,
            self.note.replace(',', ";")
        )
    }
}

/// Aggregates per-instance outcomes. Value-iteration rows are the reference
/// and are not summarized; instances listed in `skipped` are ignored.
pub fn summarize(
    outcomes: &[InstanceOutcome],
    algorithms: &[Algorithm],
    skipped: &[usize],
) -> BTreeMap<String, AlgorithmSummary> {
    algorithms
        .iter()
        .map(|&alg| {
            let rows: Vec<&InstanceOutcome> = outcomes
                .iter()
                .filter(|o| o.algorithm == alg && !skipped.contains(&o.index))
                .collect();
            let good: Vec<&&InstanceOutcome> = rows.iter().filter(|o| o.convergent).collect();
            let avg = |f: &dyn Fn(&InstanceOutcome) -> f64| {
                (!good.is_empty()).then(|| good.iter().map(|o| f(o)).sum::<f64>() / good.len() as f64)
            };
            let summary = AlgorithmSummary {
                convergent_cases: good.len(),
                total_cases: rows.len(),
                average_iterations_over_convergent: avg(&|o| o.iterations as f64),
                average_elapsed_ns_over_convergent: avg(&|o| o.elapsed_ns as f64),
            };
            (alg.label().to_string(), summary)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(index: usize, alg: Algorithm, convergent: bool, iterations: usize) -> InstanceOutcome {
        InstanceOutcome {
            index,
            seed: index as u64,
            algorithm: alg,
            status: Some(SolveStatus::Converged),
            iterations,
            final_e_norm: Some(if convergent { 1e-6 } else { 1.0 }),
            elapsed_ns: 10,
            convergent,
            note: String::new(),
        }
    }

    #[test]
    fn averages_only_over_convergent_and_skips() {
        let rows = vec![
            row(0, Algorithm::PolicyIteration, true, 6),
            row(1, Algorithm::PolicyIteration, true, 8),
            row(2, Algorithm::PolicyIteration, false, 500),
            row(3, Algorithm::PolicyIteration, true, 100),
            row(0, Algorithm::NaturalPg, false, 3),
        ];
        let s = summarize(&rows, &[Algorithm::PolicyIteration, Algorithm::NaturalPg], &[3]);
        let pi = &s["PI"];
        assert_eq!((pi.convergent_cases, pi.total_cases), (2, 3));
        assert_eq!(pi.average_iterations_over_convergent, Some(7.0));
        let npg = &s["NPG"];
        assert_eq!(npg.convergent_cases, 0);
        assert_eq!(npg.average_iterations_over_convergent, None);
    }
}
