//! Parameter sweeps: instantiate the single ranged key, run instances on a
//! small worker pool, collate one row per instance.

use crate::config::Config;
use crate::csvout::CsvTable;
use crate::experiments::{self, RunError};
use std::path::Path;
use std::sync::Mutex;

pub fn run_sweep(cfg: &Config, kind: &str, out_dir: &Path, jobs: usize) -> Result<String, RunError> {
    let ranged = cfg.ranged_keys();
    if ranged.len() != 1 {
        return Err(RunError::Config(format!(
            "sweep needs exactly one ranged {{a, b, ...}} parameter, found {}",
            ranged.len()
        )));
    }
    let (section, key, values) = ranged.into_iter().next().unwrap();
    struct Row {
        index: usize,
        value: String,
        status: Result<experiments::RunSummary, String>,
    }
    let rows: Mutex<Vec<Row>> = Mutex::new(Vec::new());
    let next: Mutex<usize> = Mutex::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(values.len()) {
            scope.spawn(|| loop {
                let index = {
                    let mut n = next.lock().unwrap();
                    if *n >= values.len() {
                        return;
                    }
                    let i = *n;
                    *n += 1;
                    i
                };
                let value = values[index].clone();
                let instance = cfg.with_value(&section, &key, &value);
                let sub = out_dir.join(format!("{key}_{}", sanitize(&value)));
                let status = match instance.validate() {
                    Err(e) => Err(e.to_string()),
                    Ok(k) => experiments::dispatch(&instance, &k, &sub).map_err(|e| match e {
                        RunError::Config(m) | RunError::Compute(m) => m,
                        RunError::AcceptanceFailed(m) => m,
                    }),
                };
                rows.lock().unwrap().push(Row {
                    index,
                    value,
                    status,
                });
            });
        }
    });
    let mut rows = rows.into_inner().unwrap();
    rows.sort_by_key(|r| r.index);

    // Collate: union of metric names across instances.
    let mut metric_names: Vec<String> = Vec::new();
    for r in &rows {
        if let Ok(s) = &r.status {
            for (name, _) in &s.metrics {
                if !metric_names.contains(name) {
                    metric_names.push(name.clone());
                }
            }
        }
    }
    let mut header: Vec<&str> = vec![&key, "status"];
    let names: Vec<String> = metric_names.clone();
    for n in &names {
        header.push(n);
    }
    let mut table = CsvTable::new(&header);
    let mut failures = 0usize;
    for r in &rows {
        let mut row = vec![r.value.clone()];
        match &r.status {
            Ok(s) => {
                row.push("ok".into());
                for n in &names {
                    let v = s
                        .metrics
                        .iter()
                        .find(|(m, _)| m == n)
                        .map(|(_, v)| *v)
                        .unwrap_or(f64::NAN);
                    row.push(crate::csvout::fmt_f64(v));
                }
            }
            Err(msg) => {
                failures += 1;
                row.push(format!("\"failed: {}\"", msg.replace('"', "'")));
                for _ in &names {
                    row.push("nan".into());
                }
            }
        }
        table.push_raw(&row);
    }
    table.provenance(cfg.hash, kind, &format!("sweep {section}.{key}"));
    table.write(&out_dir.join("sweep.csv"))?;
    if failures > 0 {
        Err(RunError::Compute(format!(
            "sweep finished with {failures}/{} failed instances",
            rows.len()
        )))
    } else {
        Ok(format!(
            "sweep: {} instances over {section}.{key}, collated to sweep.csv",
            rows.len()
        ))
    }
}

fn sanitize(v: &str) -> String {
    v.chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}
