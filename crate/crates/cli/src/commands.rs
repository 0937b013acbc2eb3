use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use taxnext_core::evaluation::{evaluate_log, EvalError, EvalOptions, EvalReport};
use taxnext_core::eventlog::{
    build_logs, read_diagnoses_csv, read_procedures_csv, stats as log_stats, BuildOptions, EventLog,
    UnknownCodePolicy, END,
};
use taxnext_core::predictor::{PredictError, PredictOptions, Predictor, Query};
use taxnext_core::similarity::{Taxonomies, Variant};
use taxnext_core::synth::{generate, SynthConfig};
use taxnext_core::taxonomy::Taxonomy;
use taxnext_service::{read_sources, AppState, ServiceConfig};

use crate::input::{self, parse_diagnoses, parse_events, read_log, Kind};
use crate::{CliError, EvaluateArgs, IngestArgs, OnUnknown, PredictArgs, ServeArgs, StatsArgs, SynthArgs};

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Left-aligned columns; the last column is not padded.
fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let last = cells.len() - 1;
        let mut out = String::new();
        for (i, c) in cells.into_iter().enumerate() {
            if i == last {
                out.push_str(c);
            } else {
                out.push_str(&format!("{c:<w$}  ", w = widths[i]));
            }
        }
        println!("{}", out.trim_end());
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}

pub fn ingest(a: IngestArgs) -> Result<(), CliError> {
    if a.max_diagnoses == 0 {
        return Err(CliError::Usage("--max-diagnoses must be at least 1".into()));
    }
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| CliError::Data(format!("{}: {e}", p.display())));
    let dx = read_diagnoses_csv(open(&a.diagnoses)?).map_err(|e| CliError::Data(format!("{}: {e}", a.diagnoses.display())))?;
    let px = read_procedures_csv(open(&a.procedures)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.procedures.display())))?;
    let dx_tax = a
        .tax
        .tax_cm
        .as_deref()
        .map(|p| input::read_taxonomy("icd10cm", p, Kind::Diagnoses, a.tax.cm_groups.as_deref()))
        .transpose()?;
    let px_tax = a
        .tax
        .tax_pcs
        .as_deref()
        .map(|p| input::read_taxonomy("icd10pcs", p, Kind::Procedures, None))
        .transpose()?;
    let opts = BuildOptions {
        min_cases: a.min_cases,
        max_diagnoses: a.max_diagnoses,
        diagnosis_taxonomy: dx_tax.as_ref(),
        procedure_taxonomy: px_tax.as_ref(),
        on_unknown: match a.on_unknown {
            OnUnknown::Drop => UnknownCodePolicy::Drop,
            OnUnknown::Fail => UnknownCodePolicy::Fail,
        },
        ..BuildOptions::default()
    };
    let out = build_logs(&dx, &px, &opts).map_err(data)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
    for (cat, log) in &out.logs {
        write_file(&a.out.join(format!("{cat}.json")), &log.to_json().map_err(data)?)?;
    }
    let summary = serde_json::to_string_pretty(&out.summary).map_err(data)?;
    write_file(&a.out.join("ingest_summary.json"), &summary)?;

    let s = &out.summary;
    for c in &s.categories {
        println!("{}\t{} cases\t{}", c.category, c.cases, if c.kept { "kept" } else { "dropped (below --min-cases)" });
    }
    println!(
        "input cases {}, dropped: no procedures {}, no primary diagnosis {}, unknown code {}; logs written {}",
        s.input_cases,
        s.dropped_no_procedures,
        s.dropped_missing_primary,
        s.dropped_unknown_code,
        out.logs.len()
    );
    if out.logs.is_empty() {
        eprintln!("warning: no category has at least {} cases, no logs written", a.min_cases);
    }
    Ok(())
}

pub fn stats(a: StatsArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut json = Vec::new();
    for path in &a.logs {
        let log = read_log(path)?;
        let s = log_stats(&log).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        rows.push(vec![
            log.id.clone(),
            s.n_traces.to_string(),
            s.n_trace_variants.to_string(),
            s.n_unique_events.to_string(),
            s.n_unique_diagnoses.to_string(),
            format!("{:.4}", s.mean_trace_length),
            format!("{:.4}", s.std_trace_length),
        ]);
        let mut v = serde_json::to_value(&s).map_err(data)?;
        v["log_id"] = log.id.clone().into();
        json.push(v);
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&json).map_err(data)?);
    } else {
        print_table(
            &["log_id", "n_traces", "n_variants", "n_unique_events", "n_unique_diagnoses", "mean_len", "std_len"],
            &rows,
        );
    }
    Ok(())
}

fn check_counts(n: usize, neighbors: Option<usize>) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("-n must be at least 1".into()));
    }
    if neighbors == Some(0) {
        return Err(CliError::Usage("--neighbors must be at least 1".into()));
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    check_counts(a.n, a.neighbors)?;
    let query = Query {
        diagnoses: parse_diagnoses(&a.diagnoses)?,
        events: parse_events(&a.events)?,
    };
    if a.tax.tax_cm.is_none() || a.tax.tax_pcs.is_none() {
        return Err(CliError::Usage("--tax-cm and --tax-pcs are required".into()));
    }
    let log = read_log(&a.log)?;
    let (dx, px) = input::taxonomies(&a.tax, &log.diagnosis_taxonomy, &log.procedure_taxonomy)?;
    let p = Predictor::new(&log, Taxonomies::new(&dx, &px), a.variant.config()).map_err(data)?;
    let opts = PredictOptions {
        n: a.n,
        mode: a.mode,
        neighbors: a.neighbors,
    };
    let result = p.predict(&query, &opts, None).map_err(|e| match e {
        PredictError::InvalidN | PredictError::EmptyQuery | PredictError::EmptyDiagnoses => CliError::Usage(e.to_string()),
        other => data(other),
    })?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&result).map_err(data)?);
        return Ok(());
    }
    let rows: Vec<Vec<String>> = result
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let description = if c.activity == END {
                "end of stay".to_string()
            } else {
                px.node(&c.activity)
                    .ok()
                    .and_then(|n| px.description(n))
                    .unwrap_or("")
                    .to_string()
            };
            let ids: Vec<&str> = c.supporting_cases.iter().take(3).map(|s| s.case_id.as_str()).collect();
            vec![
                (i + 1).to_string(),
                c.activity.clone(),
                format!("{:.6}", c.score),
                ids.join(","),
                description,
            ]
        })
        .collect();
    print_table(&["rank", "code", "score", "supporters", "description"], &rows);
    Ok(())
}

/// `report.csv` -> (`report_prefix.csv`, `report.json`).
fn sibling_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    (out.with_file_name(format!("{stem}_prefix.csv")), out.with_file_name(format!("{stem}.json")))
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    check_counts(a.n, a.neighbors)?;
    if a.synthetic && a.cases < 2 {
        return Err(CliError::Usage("--cases must be at least 2".into()));
    }
    let opts = EvalOptions {
        n: a.n,
        mode: a.mode,
        neighbors: a.neighbors,
        variants: match a.variant_only {
            Some(v) => vec![v],
            None => vec![Variant::Taxonomic, Variant::Boolean],
        },
        per_trace: a.per_trace,
        welch: a.welch,
    };
    let (logs, dx, px): (Vec<EventLog>, Taxonomy, Taxonomy) = if a.synthetic {
        let d = generate(&SynthConfig {
            seed: a.seed,
            cases: a.cases,
            ..SynthConfig::default()
        })
        .map_err(data)?;
        (vec![d.log], d.diagnoses, d.procedures)
    } else {
        if a.tax.tax_cm.is_none() || a.tax.tax_pcs.is_none() {
            return Err(CliError::Usage("--tax-cm and --tax-pcs are required".into()));
        }
        let logs = a.logs.iter().map(|p| read_log(p)).collect::<Result<Vec<_>, _>>()?;
        let (dx, px) = input::taxonomies(&a.tax, &logs[0].diagnosis_taxonomy, &logs[0].procedure_taxonomy)?;
        (logs, dx, px)
    };
    let tax = Taxonomies::new(&dx, &px);
    let mut report = EvalReport::new(opts.n, opts.variants.clone());
    for log in &logs {
        log::info!("evaluating {} ({} cases)", log.id, log.cases.len());
        let fail = |e: EvalError| CliError::Data(format!("log {}: {e}", log.id));
        let records = evaluate_log(log, tax, &opts).map_err(fail)?;
        report.add(log, &records, &opts).map_err(fail)?;
    }

    if let Some(out) = &a.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        }
        let (prefix_path, json_path) = sibling_paths(out);
        let mut w = create(out)?;
        report.write_csv(&mut w).map_err(data)?;
        w.flush().map_err(data)?;
        let mut w = create(&prefix_path)?;
        report.write_prefix_csv(&mut w).map_err(data)?;
        w.flush().map_err(data)?;
        write_file(&json_path, &report.to_json().map_err(data)?)?;
    }

    let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    let rows: Vec<Vec<String>> = report
        .logs
        .iter()
        .map(|r| {
            vec![
                r.log_id.clone(),
                r.n_traces.to_string(),
                fmt(r.avg_sim_t),
                fmt(r.avg_sim_b),
                r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.3e}")),
            ]
        })
        .collect();
    print_table(&["log_id", "n_traces", "avg_sim_T", "avg_sim_B", "p_value"], &rows);
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(path) => ServiceConfig::load(path).map_err(data)?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(bind) = a.bind {
        cfg.bind = bind;
    }
    let (mut taxonomies, mut logs) = read_sources(&cfg).map_err(data)?;
    if let Some(seed) = a.synthetic {
        let d = generate(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .map_err(data)?;
        taxonomies.extend([d.diagnoses, d.procedures]);
        logs.push(d.log);
    }
    let state = AppState::new(taxonomies, logs, cfg.defaults).map_err(data)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(data)?;
    eprintln!("serving on http://{}/v1", cfg.bind);
    rt.block_on(taxnext_service::serve(state, &cfg)).map_err(data)
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    if a.cases == 0 {
        return Err(CliError::Usage("--cases must be at least 1".into()));
    }
    let d = generate(&SynthConfig {
        seed: a.seed,
        cases: a.cases,
        ..SynthConfig::default()
    })
    .map_err(data)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
    let tsv = |edges: &[(String, String)]| edges.iter().map(|(c, p)| format!("{c}\t{p}\n")).collect::<String>();
    let log_path = a.out.join(format!("{}.json", d.log.id));
    let dx_path = a.out.join(format!("{}.tsv", d.diagnoses.id()));
    let px_path = a.out.join(format!("{}.tsv", d.procedures.id()));
    write_file(&log_path, &d.log.to_json().map_err(data)?)?;
    write_file(&dx_path, &tsv(&d.diagnosis_edges))?;
    write_file(&px_path, &tsv(&d.procedure_edges))?;
    for p in [&log_path, &dx_path, &px_path] {
        println!("{}", p.display());
    }
    Ok(())
}
