use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forecast::{Actuals, ForecastSet, QuantileSet};
use crate::metrics::{calibration_of, paired_ttest, quantile_losses, PairedTTest};

/// Quantile loss, calibration and paired t-tests of several runs over the
/// same forecast keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub quantiles: QuantileSet,
    pub models: Vec<String>,
    pub reference: String,
    /// `ql[model][quantile]`.
    pub ql: Vec<Vec<f64>>,
    pub cl: Vec<Vec<f64>>,
    /// Per non-reference model: tests of `reference − model` per quantile.
    pub diffs: Vec<(String, Vec<PairedTTest>)>,
}

/// Compares runs against the run named `reference`.
pub fn compare(runs: &[(String, ForecastSet)], actuals: &Actuals, reference: &str) -> Result<CompareReport> {
    let (_, first) = runs.first().ok_or_else(|| invalid("compare", "no runs"))?;
    let ref_idx = runs
        .iter()
        .position(|(n, _)| n == reference)
        .ok_or_else(|| invalid("compare", format!("reference '{reference}' is not among the runs")))?;
    for (name, set) in runs {
        if set.quantiles() != first.quantiles() || set.horizon() != first.horizon() {
            return Err(Error::KeyMismatch(format!("run '{name}' has different quantiles or horizon")));
        }
        if set.blocks().keys().ne(first.blocks().keys()) {
            return Err(Error::KeyMismatch(format!(
                "run '{name}' covers different (series, window) keys than '{}'",
                runs[0].0
            )));
        }
    }
    let nq = first.quantiles().len();
    let mut losses: Vec<Vec<Vec<f64>>> = Vec::with_capacity(runs.len());
    let mut ql = Vec::with_capacity(runs.len());
    let mut cl = Vec::with_capacity(runs.len());
    for (_, set) in runs {
        let per_q: Vec<Vec<f64>> = (0..nq).map(|qi| quantile_losses(actuals, set, qi)).collect::<Result<_>>()?;
        ql.push(per_q.iter().map(|l| l.iter().sum::<f64>() / l.len() as f64).collect());
        cl.push((0..nq).map(|qi| calibration_of(actuals, set, qi)).collect::<Result<_>>()?);
        losses.push(per_q);
    }
    let mut diffs = Vec::new();
    for (i, (name, _)) in runs.iter().enumerate() {
        if i == ref_idx {
            continue;
        }
        let tests = (0..nq)
            .map(|qi| paired_ttest(&losses[ref_idx][qi], &losses[i][qi]))
            .collect::<Result<_>>()?;
        diffs.push((name.clone(), tests));
    }
    Ok(CompareReport {
        quantiles: first.quantiles().clone(),
        models: runs.iter().map(|(n, _)| n.clone()).collect(),
        reference: reference.to_string(),
        ql,
        cl,
        diffs,
    })
}

impl CompareReport {
    fn labels(&self) -> Vec<String> {
        self.quantiles.as_slice().iter().map(|&q| QuantileSet::label(q)).collect()
    }

    /// `percentile,<model>...` table of a per-(model, quantile) metric.
    fn write_table(&self, path: &Path, values: &[Vec<f64>]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["percentile".to_string()];
        header.extend(self.models.iter().cloned());
        w.write_record(&header)?;
        for (qi, label) in self.labels().into_iter().enumerate() {
            let mut row = vec![label];
            row.extend(values.iter().map(|m| m[qi].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.csv` (long: `model,percentile,metric,value`) and the
    /// wide `ql_table.csv`, `cl_table.csv` and `diff_table.csv`. Returns the
    /// paths written.
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let labels = self.labels();
        let long = dir.join("report.csv");
        let mut w = csv::Writer::from_path(&long)?;
        w.write_record(["model", "percentile", "metric", "value"])?;
        for (mi, m) in self.models.iter().enumerate() {
            for (qi, l) in labels.iter().enumerate() {
                w.write_record([m, l, "ql", &self.ql[mi][qi].to_string()])?;
                w.write_record([m, l, "cl", &self.cl[mi][qi].to_string()])?;
            }
        }
        for (m, tests) in &self.diffs {
            for (t, l) in tests.iter().zip(&labels) {
                w.write_record([m, l, "diff_mean", &t.mean_diff.to_string()])?;
                w.write_record([m, l, "diff_sem", &t.sem.to_string()])?;
                w.write_record([m, l, "diff_p_value", &t.p_value.to_string()])?;
            }
        }
        w.flush()?;

        let ql = dir.join("ql_table.csv");
        self.write_table(&ql, &self.ql)?;
        let cl = dir.join("cl_table.csv");
        self.write_table(&cl, &self.cl)?;

        let diff = dir.join("diff_table.csv");
        let mut w = csv::Writer::from_path(&diff)?;
        let mut header = vec!["percentile".to_string()];
        for (m, _) in &self.diffs {
            header.push(format!("{} - {m}", self.reference));
            header.push(format!("{m}_sem"));
            header.push(format!("{m}_p_value"));
        }
        w.write_record(&header)?;
        for (qi, l) in labels.iter().enumerate() {
            let mut row = vec![l.clone()];
            for (_, tests) in &self.diffs {
                row.push(tests[qi].mean_diff.to_string());
                row.push(tests[qi].sem.to_string());
                row.push(tests[qi].p_value.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(vec![long, ql, cl, diff])
    }

    /// Plain-text rendering of the three tables, SEM in parentheses.
    pub fn render(&self) -> String {
        let labels = self.labels();
        let mut out = String::new();
        let table = |title: &str, values: &[Vec<f64>], out: &mut String| {
            out.push_str(&format!("{title}\npercentile\t{}\n", self.models.join("\t")));
            for (qi, l) in labels.iter().enumerate() {
                let cells: Vec<String> = values.iter().map(|m| format!("{:.4}", m[qi])).collect();
                out.push_str(&format!("{l}\t{}\n", cells.join("\t")));
            }
            out.push('\n');
        };
        table("QL", &self.ql, &mut out);
        table("CL", &self.cl, &mut out);
        let names: Vec<String> = self.diffs.iter().map(|(m, _)| format!("{} - {m}", self.reference)).collect();
        out.push_str(&format!("QL difference (SEM), p-value\npercentile\t{}\n", names.join("\t")));
        for (qi, l) in labels.iter().enumerate() {
            let cells: Vec<String> = self
                .diffs
                .iter()
                .map(|(_, t)| format!("{:.4} ({:.4}) p={:.3}", t[qi].mean_diff, t[qi].sem, t[qi].p_value))
                .collect();
            out.push_str(&format!("{l}\t{}\n", cells.join("\t")));
        }
        out
    }
}
