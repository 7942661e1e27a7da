//! Result tables and on-disk layout of an experiment run.
//!
//! ```text
//! out/
//!   config.json
//!   metrics.csv      sweep × (method: AUROC, TPR, FPR as mean and std)
//!   confusion.csv    sweep × (method: TP, TN, FP, FN as mean and std)
//!   runs.csv         one row per (sweep point, SampleSet, method)
//!   <sweep>_<value>/
//!     report.json
//!     manifests/sampleset_<i>.json
//!     logs/<method>_sampleset_<i>.csv
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::{AggregateReport, MeanStd};

use super::{ExperimentResult, Method};

fn methods_of(result: &ExperimentResult) -> Vec<Method> {
    result
        .points
        .first()
        .map(|p| p.summaries.iter().map(|s| s.method).collect())
        .unwrap_or_default()
}

fn table(
    result: &ExperimentResult,
    metrics: &[&str],
    get: fn(&AggregateReport, usize) -> MeanStd,
    precision: usize,
) -> String {
    let methods = methods_of(result);
    let mut out = format!("seed,{}", result.config.sweep_name());
    for m in &methods {
        for metric in metrics {
            write!(out, ",{m}_{metric}_mean,{m}_{metric}_std").unwrap();
        }
    }
    out.push('\n');
    for p in &result.points {
        write!(out, "{},{}", p.seed, p.point.value).unwrap();
        for &m in &methods {
            let agg = p.summary(m).expect("every point holds every method");
            for i in 0..metrics.len() {
                let v = get(agg, i);
                write!(out, ",{:.*},{:.*}", precision, v.mean, precision, v.std).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// AUROC, TPR and FPR per sweep value and method.
pub fn metrics_table_csv(result: &ExperimentResult) -> String {
    table(
        result,
        &["auroc", "tpr", "fpr"],
        |a, i| [a.auroc, a.tpr, a.fpr][i],
        4,
    )
}

/// Confusion counts per sweep value and method.
pub fn confusion_table_csv(result: &ExperimentResult) -> String {
    table(
        result,
        &["tp", "tn", "fp", "fn"],
        |a, i| [a.tp, a.tn, a.fp, a.fn_][i],
        2,
    )
}

/// Every individual run at full precision.
pub fn runs_csv(result: &ExperimentResult) -> String {
    let mut out = format!(
        "seed,{},sample_set,method,train_seed,inference_seed,threshold,auroc,tpr,fpr,tp,tn,fp,fn\n",
        result.config.sweep_name()
    );
    for p in &result.points {
        for r in &p.runs {
            let c = &r.report.confusion;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.seed,
                p.point.value,
                r.sample_set,
                r.method,
                r.seeds.train,
                r.seeds.inference,
                r.threshold,
                r.report.auroc,
                c.tpr,
                c.fpr,
                c.tp,
                c.tn,
                c.fp,
                c.fn_
            )
            .unwrap();
        }
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_outputs(result: &ExperimentResult, out_dir: &Path) -> Result<()> {
    mkdir(out_dir)?;
    write(
        &out_dir.join("config.json"),
        &serde_json::to_string_pretty(&result.config)?,
    )?;
    write(&out_dir.join("metrics.csv"), &metrics_table_csv(result))?;
    write(&out_dir.join("confusion.csv"), &confusion_table_csv(result))?;
    write(&out_dir.join("runs.csv"), &runs_csv(result))?;
    for p in &result.points {
        let dir = out_dir.join(&p.key);
        let manifests = dir.join("manifests");
        let logs = dir.join("logs");
        mkdir(&manifests)?;
        mkdir(&logs)?;
        let report = serde_json::json!({
            "seed": p.seed,
            "sweep": result.config.sweep_name(),
            "value": p.point.value,
            "spec": p.point.spec,
            "labelled": p.point.labelled,
            "summaries": p.summaries,
            "runs": p.runs.iter().map(|r| serde_json::json!({
                "sample_set": r.sample_set,
                "method": r.method,
                "seeds": r.seeds,
                "threshold": r.threshold,
                "report": r.report,
            })).collect::<Vec<_>>(),
        });
        write(&dir.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
        for m in &p.manifests {
            m.save(&manifests.join(format!("sampleset_{}.json", m.sample_set.index)))?;
        }
        for r in &p.runs {
            r.log
                .write_csv(&logs.join(format!("{}_sampleset_{}.csv", r.method, r.sample_set)))?;
        }
    }
    Ok(())
}
