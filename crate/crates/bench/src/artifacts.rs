//! Writes experiment results as CSV traces, JSON summaries and SVG charts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lqdg_core::{linalg, PolicySet, SolveResult};
use serde_json::json;

use crate::experiments::{ExpAReport, ExpBReport, RandomBenchReport, TrackedRun};
use crate::summary::OUTCOME_CSV_HEADER;
use crate::svg::LineChart;

/// Which artifact kinds to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            svg: true,
        }
    }
}

impl std::str::FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut e = Emit {
            csv: false,
            json: false,
            svg: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => e.csv = true,
                "json" => e.json = true,
                "svg" => e.svg = true,
                other => return Err(format!("unknown artifact kind '{other}'")),
            }
        }
        Ok(e)
    }
}

/// File-name-safe form of a run label, e.g. `NPG(eta=0.1)` → `npg_eta0.1`.
pub fn slug(label: &str) -> String {
    label
        .to_ascii_lowercase()
        .replace("(eta=", "_eta")
        .replace(')', "")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// `K{player}_{row}_{col}` for every gain entry, in `flat_entries` order.
pub fn gain_column_names(pol: &PolicySet) -> Vec<String> {
    let mut names = Vec::new();
    for (p, g) in pol.gains().iter().enumerate() {
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                names.push(format!("K{}_{r}_{c}", p + 1));
            }
        }
    }
    names
}

/// Header `k,K1_0_0,…` followed by one row per iterate, entries row-major.
pub fn gain_trajectory_csv(gains: &[PolicySet]) -> String {
    let mut out = String::from("k");
    for name in gains.first().map(gain_column_names).unwrap_or_default() {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for (k, pol) in gains.iter().enumerate() {
        out.push_str(&k.to_string());
        for v in pol.flat_entries() {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}

fn e_norm_points(res: &SolveResult, by_time: bool) -> Vec<(f64, f64)> {
    res.trace
        .iter()
        .filter_map(|t| {
            let x = if by_time { t.elapsed_ns as f64 / 1e6 } else { t.k as f64 };
            t.e_norm.map(|e| (x, e))
        })
        .collect()
}

fn gains_json(p: &PolicySet) -> serde_json::Value {
    json!(p.gains().iter().map(linalg::to_rows).collect::<Vec<_>>())
}

fn run_json(run: &TrackedRun) -> serde_json::Value {
    json!({
        "label": run.label,
        "status": run.result.status.to_string(),
        "iterations": run.result.iterations,
        "final_e_norm": run.result.final_e_norm(),
        "reached_reference": run.reached(),
        "K": gains_json(&run.result.final_policies),
    })
}

pub fn write_solve(dir: &Path, name: &str, res: &SolveResult, emit: Emit) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if emit.csv {
        write(dir, &format!("{name}.csv"), &res.trace_csv(), &mut written)?;
    }
    if emit.json {
        let text = res.to_json().map_err(io::Error::other)?;
        write(dir, &format!("{name}.json"), &text, &mut written)?;
    }
    if emit.svg {
        let mut chart = if res.trace.iter().any(|t| t.e_norm.is_some()) {
            let mut c = LineChart::new(name, "iteration k", "normalized error", true);
            c.push(name, e_norm_points(res, false));
            c
        } else {
            let mut c = LineChart::new(name, "iteration k", "policy change", true);
            c.push(name, res.trace.iter().map(|t| (t.k as f64, t.policy_delta)).collect());
            c
        };
        chart.title = format!("{name}: {}", res.status);
        write(dir, &format!("{name}.svg"), &chart.render(), &mut written)?;
    }
    Ok(written)
}

pub fn write_exp_a(dir: &Path, rep: &ExpAReport, emit: Emit) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for run in &rep.runs {
        if emit.csv {
            let name = format!("exp_a_{}.csv", slug(&run.label));
            write(dir, &name, &run.result.trace_csv(), &mut written)?;
        }
    }
    if emit.svg {
        for (by_time, file, x_label) in [
            (false, "exp_a_enorm_vs_iteration.svg", "iteration k"),
            (true, "exp_a_enorm_vs_time.svg", "elapsed time (ms)"),
        ] {
            let mut chart = LineChart::new("Normalized error, r = 0.1", x_label, "normalized error", true);
            for run in &rep.runs {
                chart.push(run.label.clone(), e_norm_points(&run.result, by_time));
            }
            write(dir, file, &chart.render(), &mut written)?;
        }
    }
    if emit.json {
        let summary = json!({
            "reference": gains_json(&rep.reference),
            "k0": gains_json(&rep.k0),
            "initial_e_norm": rep.initial_e_norm,
            "pi_fewer_iterations_than_gnpg": rep.pi_faster_than_gnpg(),
            "runs": rep.runs.iter().map(run_json).collect::<Vec<_>>(),
        });
        write(dir, "exp_a_summary.json", &pretty(&summary), &mut written)?;
    }
    Ok(written)
}

pub fn write_exp_b(dir: &Path, rep: &ExpBReport, emit: Emit) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for case in &rep.cases {
        for run in &case.runs {
            let stem = format!("exp_b_{}_{}", case.name, slug(&run.label));
            if emit.csv {
                write(dir, &format!("{stem}_gains.csv"), &gain_trajectory_csv(&run.gains), &mut written)?;
                write(dir, &format!("{stem}.csv"), &run.result.trace_csv(), &mut written)?;
            }
            if emit.svg {
                let mut chart = LineChart::new(
                    &format!("{} gains, {}", run.label, case.name),
                    "iteration k",
                    "gain entry",
                    false,
                );
                let names = gain_column_names(&rep.reference);
                let flat: Vec<Vec<f64>> = run.gains.iter().map(PolicySet::flat_entries).collect();
                for (col, name) in names.iter().enumerate() {
                    let pts = flat.iter().enumerate().map(|(k, row)| (k as f64, row[col])).collect();
                    chart.push(name.clone(), pts);
                }
                let last = run.gains.len().saturating_sub(1) as f64;
                for (name, v) in names.iter().zip(rep.reference.flat_entries()) {
                    chart.push(format!("{name}*"), vec![(0.0, v), (last, v)]);
                }
                write(dir, &format!("{stem}_gains.svg"), &chart.render(), &mut written)?;
            }
        }
        if emit.svg {
            let mut chart = LineChart::new(
                &format!("Normalized error, {}", case.name),
                "iteration k",
                "normalized error",
                true,
            );
            for run in &case.runs {
                chart.push(run.label.clone(), e_norm_points(&run.result, false));
            }
            write(dir, &format!("exp_b_{}_enorm.svg", case.name), &chart.render(), &mut written)?;
        }
    }
    if emit.json {
        let summary = json!({
            "reference": gains_json(&rep.reference),
            "cases": rep.cases.iter().map(|c| json!({
                "name": c.name,
                "radius": c.radius,
                "k0": gains_json(&c.k0),
                "runs": c.runs.iter().map(run_json).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        write(dir, "exp_b_summary.json", &pretty(&summary), &mut written)?;
    }
    Ok(written)
}

pub fn outcomes_csv(rep: &RandomBenchReport) -> String {
    let mut out = String::from(OUTCOME_CSV_HEADER);
    out.push('\n');
    for o in &rep.outcomes {
        out.push_str(&o.csv_row());
        out.push('\n');
    }
    out
}

pub fn write_random_bench(dir: &Path, rep: &RandomBenchReport, emit: Emit) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let tag = format!("n{}_m{}_N{}", rep.summary.n, rep.summary.m, rep.summary.players);
    if emit.csv {
        write(dir, &format!("random_bench_{tag}_instances.csv"), &outcomes_csv(rep), &mut written)?;
    }
    if emit.json {
        write(dir, &format!("random_bench_{tag}_summary.json"), &rep.summary.to_json(), &mut written)?;
        write(dir, &format!("random_bench_{tag}_timing.json"), &rep.summary.timing_json(), &mut written)?;
    }
    if emit.svg {
        let mut chart = LineChart::new(
            &format!("Iterations to reach the reference ({tag})"),
            "instance index",
            "iterations",
            true,
        );
        for alg in rep.summary.algorithms.keys() {
            let pts = rep
                .outcomes
                .iter()
                .filter(|o| o.algorithm.label() == alg && o.convergent)
                .map(|o| (o.index as f64, o.iterations as f64))
                .collect();
            chart.push(alg.clone(), pts);
        }
        write(dir, &format!("random_bench_{tag}_iterations.svg"), &chart.render(), &mut written)?;
    }
    Ok(written)
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use lqdg_core::gen;

    #[test]
    fn emit_parsing() {
        let e: Emit = "csv,svg".parse().unwrap();
        assert!(e.csv && e.svg && !e.json);
        assert!("csv,png".parse::<Emit>().is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("NPG(eta=0.1)"), "npg_eta0.1");
        assert_eq!(slug("PI"), "pi");
    }

    #[test]
    fn gain_csv_columns() {
        let csv = gain_trajectory_csv(&[gen::paper_k0_near(), gen::paper_k0_far()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k,K1_0_0,K1_0_1,K2_0_0,K2_0_1");
        assert!(lines.all(|l| l.split(',').count() == 5));
    }
}
