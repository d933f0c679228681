//! The six experiment commands. Every command writes a JSON report that
//! embeds the resolved config for provenance; tabular outputs additionally
//! land in CSV files ready for external plotting.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use celab_core::dynamic::{make_appended_table, run_dynamic, DynamicConfig, UpdateSpec};
use celab_core::estimator::{derive_seed, group_by_predicate_count, qerrors_for, summarize};
use celab_core::query::Query;
use celab_core::registry::{default_suite, EstimatorSpec};
use celab_core::report::{
    dynamic_sweep_csv, error_rows_csv, rules_matrix_csv, rules_matrix_text, DynamicSweepRow,
    ErrorReportRow,
};
use celab_core::rules::check_all;
use celab_core::table::{write_schema, Table};
use celab_core::workload::{
    gen_workload, label, read_workload, write_labeled, write_queries, LabeledQuery,
};

use crate::config::RunConfig;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn estimator_list(cfg: &RunConfig) -> Vec<EstimatorSpec> {
    if cfg.estimators.is_empty() {
        default_suite()
    } else {
        cfg.estimators.clone()
    }
}

pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<()> {
    let synth = cfg
        .dataset
        .synth
        .as_ref()
        .context("gen-data needs a [dataset.synth] block")?;
    let resolved = synth.resolve(cfg.master_seed());
    let table = celab_core::synth::gen_synth(&resolved)?;
    table.write_csv(out.join("data.csv"))?;
    write_schema(out.join("data.schema.json"), table.schema())?;
    write_json(
        &out.join("provenance.json"),
        &json!({
            "provenance": cfg.provenance(),
            "synth": resolved,
            "rows": table.row_count(),
        }),
    )?;
    println!(
        "wrote {} rows to {}",
        table.row_count(),
        out.join("data.csv").display()
    );
    Ok(())
}

pub fn gen_workload_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let table = cfg.load_table()?;
    let wl = cfg.workload.resolve(cfg.master_seed());
    let queries = gen_workload(&table, &wl)?;
    write_queries(out.join("workload.jsonl"), &queries)?;
    write_json(
        &out.join("provenance.json"),
        &json!({ "provenance": cfg.provenance(), "workload": wl, "queries": queries.len() }),
    )?;
    println!(
        "wrote {} queries to {}",
        queries.len(),
        out.join("workload.jsonl").display()
    );
    Ok(())
}

pub fn label_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let table = cfg.load_table()?;
    let file = cfg
        .workload
        .file
        .as_ref()
        .context("label needs workload.file pointing at a JSON-lines workload")?;
    let entries = read_workload(file)?;
    let queries: Vec<Query> = entries.into_iter().map(|(q, _)| q).collect();
    for q in &queries {
        q.validate(table.n_cols())?;
    }
    let labeled = label(&table, &queries);
    write_labeled(out.join("workload.labeled.jsonl"), &labeled)?;
    write_json(
        &out.join("provenance.json"),
        &json!({ "provenance": cfg.provenance(), "queries": labeled.len() }),
    )?;
    println!(
        "labeled {} queries into {}",
        labeled.len(),
        out.join("workload.labeled.jsonl").display()
    );
    Ok(())
}

fn labeled_workload(cfg: &RunConfig, table: &Table) -> Result<Vec<LabeledQuery>> {
    if let Some(file) = &cfg.workload.file {
        let entries = read_workload(file)?;
        let mut labeled = Vec::with_capacity(entries.len());
        let mut unlabeled = Vec::new();
        for (q, l) in entries {
            q.validate(table.n_cols())?;
            match l {
                Some(lq) => labeled.push(lq),
                None => unlabeled.push(q),
            }
        }
        if unlabeled.is_empty() {
            return Ok(labeled);
        }
        // mixed or unlabeled file: relabel everything against this table
        let all: Vec<Query> = labeled
            .into_iter()
            .map(|lq| lq.query)
            .chain(unlabeled)
            .collect();
        return Ok(label(table, &all));
    }
    let wl = cfg.workload.resolve(cfg.master_seed());
    let queries = gen_workload(table, &wl)?;
    Ok(label(table, &queries))
}

#[derive(Serialize)]
struct TimingRow {
    estimator: String,
    build_seconds: f64,
    avg_estimate_micros: f64,
    size_bytes: usize,
}

pub fn evaluate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let table = cfg.load_table()?;
    let labeled = labeled_workload(cfg, &table)?;
    let dataset = cfg.dataset_name();
    let master = cfg.master_seed();

    let mut rows: Vec<ErrorReportRow> = Vec::new();
    let mut timings: Vec<TimingRow> = Vec::new();
    let mut failures: Vec<serde_json::Value> = Vec::new();

    for spec in estimator_list(cfg) {
        let build_start = Instant::now();
        let est = match spec.build(&table, master) {
            Ok(e) => e,
            Err(e) => {
                failures.push(json!({ "estimator": spec.name(), "error": e.to_string() }));
                continue;
            }
        };
        let build_seconds = build_start.elapsed().as_secs_f64();

        let inference_start = Instant::now();
        let errors = qerrors_for(est.as_ref(), &labeled, master);
        let avg_estimate_micros =
            inference_start.elapsed().as_secs_f64() * 1e6 / labeled.len().max(1) as f64;

        let overall = summarize(&errors)?;
        rows.push(ErrorReportRow::new(
            est.name(),
            &dataset,
            "overall",
            &overall,
        ));
        for (d, summary) in group_by_predicate_count(&labeled, &errors)? {
            rows.push(ErrorReportRow::new(
                est.name(),
                &dataset,
                &format!("d={d}"),
                &summary,
            ));
        }
        timings.push(TimingRow {
            estimator: est.name().to_owned(),
            build_seconds,
            avg_estimate_micros,
            size_bytes: est.size_bytes(),
        });
    }

    write_json(
        &out.join("static_report.json"),
        &json!({
            "provenance": cfg.provenance(),
            "rows": rows,
            "timings": timings,
            "failures": failures,
        }),
    )?;
    write_text(&out.join("static_report.csv"), &error_rows_csv(&rows))?;
    println!("{}", error_rows_csv(&rows));
    if !failures.is_empty() {
        println!("failures: {}", serde_json::to_string(&failures)?);
    }
    Ok(())
}

pub fn dynamic(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dyn_spec = cfg
        .dynamic
        .as_ref()
        .context("dynamic needs a [dynamic] block with t_values")?;
    let master = cfg.master_seed();
    let old_table = cfg.load_table()?;
    let update = UpdateSpec {
        append_fraction: dyn_spec.append_fraction,
        seed: derive_seed(master, 0xA11E),
    };
    let new_table = make_appended_table(&old_table, &update)?;

    let mut wl = cfg.workload.resolve(master);
    if let Some(n) = dyn_spec.n_queries {
        wl.n_queries = n;
    }
    let queries = gen_workload(&new_table, &wl)?;
    let labeled = label(&new_table, &queries);

    let mut reports = Vec::new();
    let mut sweep_rows = Vec::new();
    let mut failures: Vec<serde_json::Value> = Vec::new();
    for spec in estimator_list(cfg) {
        for (ti, &t_total) in dyn_spec.t_values.iter().enumerate() {
            // fresh build per cell: update mutates the estimator
            let mut est = match spec.build(&old_table, master) {
                Ok(e) => e,
                Err(e) => {
                    failures.push(json!({ "estimator": spec.name(), "error": e.to_string() }));
                    continue;
                }
            };
            let dcfg = DynamicConfig {
                t_total,
                seed: derive_seed(master, 0xD1 ^ ti as u64),
                t_u_override: dyn_spec.t_u_override,
            };
            let report = run_dynamic(est.as_mut(), &new_table, &labeled, &dcfg)?;
            sweep_rows.push(DynamicSweepRow {
                estimator: report.estimator.clone(),
                t_total,
                t_u: report.t_u,
                finished: report.finished,
                p99: report.headline_p99,
            });
            reports.push(report);
        }
    }

    write_json(
        &out.join("dynamic_report.json"),
        &json!({
            "provenance": cfg.provenance(),
            "update": update,
            "reports": reports,
            "failures": failures,
        }),
    )?;
    write_text(
        &out.join("dynamic_sweep.csv"),
        &dynamic_sweep_csv(&sweep_rows),
    )?;
    println!("{}", dynamic_sweep_csv(&sweep_rows));
    Ok(())
}

pub fn rules(cfg: &RunConfig, out: &Path) -> Result<()> {
    let table = cfg.load_table()?;
    let master = cfg.master_seed();
    let rcfg = cfg
        .rules
        .clone()
        .unwrap_or(crate::config::RulesSpec {
            probes: 10_000,
            stability_repeats: 2_000,
            seed_mode: celab_core::rules::SeedMode::Paired,
        })
        .resolve(master);

    let mut reports = Vec::new();
    let mut failures: Vec<serde_json::Value> = Vec::new();
    for spec in estimator_list(cfg) {
        match spec.build(&table, master) {
            Ok(est) => reports.push(check_all(est.as_ref(), &table, &rcfg)?),
            Err(e) => failures.push(json!({ "estimator": spec.name(), "error": e.to_string() })),
        }
    }

    write_json(
        &out.join("rules_report.json"),
        &json!({
            "provenance": cfg.provenance(),
            "rule_config": rcfg,
            "reports": reports,
            "failures": failures,
        }),
    )?;
    write_text(&out.join("rules_matrix.csv"), &rules_matrix_csv(&reports))?;
    let text = rules_matrix_text(&reports);
    write_text(&out.join("rules_matrix.txt"), &text)?;
    println!("{text}");
    Ok(())
}
