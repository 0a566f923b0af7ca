//! Metric tables collated from finished runs.
//!
//! Rows follow the order of the runs given and, within a run, a fixed order
//! per command, so unchanged inputs give byte-identical tables.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use taxel_pipeline::{AblationSummary, Error, EvalReport, History, RegressionReport, Result};
use taxel_twostream::Modality;

use crate::commands::{dataset_metrics, CalibrationSummary, PressSummary};
use crate::run::ResolvedRun;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub run: String,
    pub command: String,
    pub metric: String,
    pub value: f64,
}

/// One training curve point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub run: String,
    pub series: String,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_metric: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Tables {
    pub metrics: Vec<Metric>,
    pub curves: Vec<CurvePoint>,
}

impl Tables {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("run,command,metric,value\n");
        for m in &self.metrics {
            out.push_str(&format!("{},{},{},{}\n", csv_field(&m.run), m.command, csv_field(&m.metric), m.value));
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from("run,series,epoch,train_loss,val_loss,train_metric,val_metric\n");
        for c in &self.curves {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&c.run),
                c.series,
                c.epoch,
                c.train_loss,
                c.val_loss,
                c.train_metric,
                c.val_metric
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

struct Collector<'a> {
    tables: &'a mut Tables,
    run: String,
    command: String,
}

impl Collector<'_> {
    fn push(&mut self, metric: impl Into<String>, value: f64) {
        self.tables.metrics.push(Metric {
            run: self.run.clone(),
            command: self.command.clone(),
            metric: metric.into(),
            value,
        });
    }

    fn eval(&mut self, prefix: &str, r: &EvalReport) {
        let kind = r.label_kind.name();
        self.push(format!("{prefix}{kind}_accuracy"), r.accuracy);
        self.push(format!("{prefix}{kind}_correct"), r.correct as f64);
        self.push(format!("{prefix}{kind}_total"), r.total as f64);
        for (label, acc) in r.class_labels.iter().zip(&r.per_class_accuracy) {
            if let Some(a) = acc {
                self.push(format!("{prefix}{kind}_accuracy/{label}"), *a);
            }
        }
    }

    fn history(&mut self, series: &str, h: &History) {
        if let Some(best) = h.best() {
            self.push(format!("{series}/best_epoch"), h.best_epoch as f64);
            self.push(format!("{series}/best_val_{}", h.metric), best.val_metric);
        }
        for e in &h.epochs {
            self.tables.curves.push(CurvePoint {
                run: self.run.clone(),
                series: series.to_string(),
                epoch: e.epoch,
                train_loss: e.train_loss,
                val_loss: e.val_loss,
                train_metric: e.train_metric,
                val_metric: e.val_metric,
            });
        }
    }
}

/// Metrics and curves of every run directory, in the order given.
pub fn collate(runs: &[impl AsRef<Path>]) -> Result<Tables> {
    let mut tables = Tables::default();
    for dir in runs {
        let dir = dir.as_ref();
        let resolved = ResolvedRun::read(dir).map_err(|e| match e {
            Error::Io { .. } => {
                Error::config(format!("{} is not a finished run (no config.resolved.json)", dir.display()))
            }
            other => other,
        })?;
        let mut c =
            Collector { tables: &mut tables, run: dir.display().to_string(), command: resolved.command.clone() };
        match resolved.command.as_str() {
            "gen-data" => {
                for (name, value) in dataset_metrics(dir)? {
                    c.push(name, value);
                }
            }
            "calibrate" => {
                let s: CalibrationSummary = read(&dir.join("calibration.json"))?;
                c.push("lut_fill_fraction", s.fill_fraction);
                c.push("area_mae", s.area_mae);
                for p in &s.sweep {
                    c.push(format!("measured_area@{}", p.depth), p.measured_area);
                    c.push(format!("theoretical_area@{}", p.depth), p.theoretical_area);
                }
            }
            "press" => {
                let s: PressSummary = read(&dir.join("press.json"))?;
                c.push("total_stiffness", s.total_stiffness);
                c.push("final_imprint", s.final_imprint);
                c.push("peak_force", s.peak_force);
            }
            "train" if resolved.inputs.get("task").map(String::as_str) == Some("regressor") => {
                let r: RegressionReport = read(&dir.join("regression_report.json"))?;
                c.push("force_mae", r.mae);
                c.push("force_max_abs_error", r.max_abs_error);
                c.push("worst_monotonicity_violation", r.worst_monotonicity_violation);
                c.push("mean_slope_error", r.mean_slope_error());
                c.push("worst_slope_error", r.worst_slope_error());
                c.history("regressor", &read(&dir.join("history.json"))?);
            }
            "train" => c.history("classifier", &read(&dir.join("history.json"))?),
            "eval" => c.eval("", &read(&dir.join("report.json"))?),
            "baseline" => {
                c.eval("", &read(&dir.join("report.json"))?);
                c.history("baseline", &read(&dir.join("history.json"))?);
            }
            "ablate" => {
                let s: AblationSummary = read(&dir.join("summary.json"))?;
                c.push("fused_accuracy", s.fused_accuracy);
                c.push("geometry_only_accuracy", s.geometry_only_accuracy);
                c.push("force_only_accuracy", s.force_only_accuracy);
                c.push("margin_pp", s.margin_pp);
                c.push("fused_dominates", if s.fused_dominates { 1.0 } else { 0.0 });
                for m in Modality::ALL {
                    let name = m.name();
                    c.eval(&format!("{name}/"), &read(&dir.join(format!("report_{name}.json")))?);
                    c.history(name, &read(&dir.join(format!("history_{name}.json")))?);
                }
            }
            // a reconstruction carries no metrics of its own
            "reconstruct" | "report" => {}
            other => return Err(Error::config(format!("{}: unknown command `{other}`", dir.display()))),
        }
    }
    Ok(tables)
}
