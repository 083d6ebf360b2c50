//! The five subcommands, each taking a fully resolved configuration.

use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sl1_core::analysis::{run_grid, summarize, trace_proof, trials_csv};
use sl1_core::bundle::{read_bundle, write_bundle, BundleMeta};
use sl1_core::conditions::{
    estimate_conditions, lemma_probability_bound, lemma_sample_bound, nu_gaussian, theorem_condition_holds,
};
use sl1_core::generators::make_instance;
use sl1_core::io::{load_matrix, write_atomic};
use sl1_core::rng::RngSpec;
use sl1_core::solver::solve;

use crate::config::{
    check_revision, required, CliResult, ConditionsConfig, Failure, GenConfig, GridConfig, SolveConfig, TraceConfig,
    EXIT_NONCONVERGED,
};

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| sl1_core::Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    Ok(write_atomic(path, text.as_bytes())?)
}

pub fn gen(cfg: &mut GenConfig) -> CliResult<()> {
    check_revision(&cfg.revision)?;
    let out = required(&cfg.out, "output directory (--out)")?;
    let base = RngSpec::new(cfg.seed, cfg.stream);
    let inst = make_instance::<f64>(cfg.n, cfg.m, cfg.k, &cfg.noise, &cfg.signal, &base)?;
    let resolved = serde_json::to_value(&*cfg).expect("config serializes");
    let meta = BundleMeta::new(&inst, cfg.signal, cfg.noise, base, resolved);
    write_bundle(&out, &inst, &meta)?;
    Ok(())
}

pub fn solve_cmd(cfg: &mut SolveConfig) -> CliResult<()> {
    check_revision(&cfg.revision)?;
    cfg.solver.validate()?;
    let bundle = required(&cfg.bundle, "bundle directory (--bundle)")?;
    let out = cfg.out.get_or_insert_with(|| bundle.join("result.json")).clone();
    let (inst, _) = read_bundle(&bundle).map_err(|e| Failure::input("bundle", e))?;
    let result = solve(&inst.phi, &inst.y, inst.epsilon, &cfg.solver)?;
    write_json(&out, &json!({ "config": cfg, "result": result }))?;
    if !result.status.is_feasible() {
        return Err(Failure {
            code: EXIT_NONCONVERGED,
            message: format!(
                "solver stopped with status {:?} after {} iterations",
                result.status, result.iters
            ),
        });
    }
    Ok(())
}

pub fn conditions(cfg: &mut ConditionsConfig) -> CliResult<()> {
    check_revision(&cfg.revision)?;
    let matrix = required(&cfg.matrix, "matrix file (--matrix)")?;
    let out = cfg.out.get_or_insert_with(|| "conditions.json".into()).clone();
    let nu = *cfg.nu.get_or_insert_with(nu_gaussian);
    let phi = load_matrix(&matrix).map_err(|e| Failure::input("matrix", e))?;
    let est = estimate_conditions(&phi, cfg.k, nu, &cfg.budget, &RngSpec::new(cfg.seed, cfg.stream))?;
    let lemma = match &cfg.lemma {
        Some(inputs) => Some(json!({
            "required_M": lemma_sample_bound(inputs)?,
            "M": phi.rows(),
            "probability_bound": lemma_probability_bound(inputs.c_small, inputs.delta, phi.rows()),
        })),
        None => None,
    };
    let report = json!({
        "config": cfg,
        "verdict": theorem_condition_holds(&est),
        "estimate": est,
        "lemma": lemma,
    });
    write_json(&out, &report)
}

pub fn trace(cfg: &mut TraceConfig) -> CliResult<()> {
    check_revision(&cfg.revision)?;
    cfg.solver.validate()?;
    let bundle = required(&cfg.bundle, "bundle directory (--bundle)")?;
    let out = cfg.out.get_or_insert_with(|| bundle.join("trace.json")).clone();
    let (inst, _) = read_bundle(&bundle).map_err(|e| Failure::input("bundle", e))?;
    let result = solve(&inst.phi, &inst.y, inst.epsilon, &cfg.solver)?;
    if !result.status.is_feasible() {
        return Err(Failure {
            code: EXIT_NONCONVERGED,
            message: format!("no feasible solution to trace (status {:?})", result.status),
        });
    }
    let est = match &cfg.estimate {
        Some(e) => Some(estimate_conditions(
            &inst.phi,
            inst.k,
            nu_gaussian(),
            &e.budget,
            &RngSpec::new(e.seed, e.stream),
        )?),
        None => None,
    };
    let trace = trace_proof(&inst, &result, est.as_ref(), cfg.solver.feasibility_tol)?;
    let report = json!({
        "config": cfg,
        "status": result.status,
        "unconditional_hold": trace.unconditional_hold(),
        "trace": trace,
    });
    write_json(&out, &report)
}

pub fn grid(cfg: &mut GridConfig) -> CliResult<()> {
    check_revision(&cfg.revision)?;
    let dir = cfg.out_dir.get_or_insert_with(|| "grid".into()).clone();
    let records = run_grid(&cfg.grid)?;
    std::fs::create_dir_all(&dir).map_err(|e| sl1_core::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    write_atomic(&dir.join("trials.csv"), trials_csv(&records).as_bytes())?;
    let summary = json!({
        "config": cfg,
        "bound_check": "observational: the recovery condition is not certified for these matrices",
        "cells": summarize(&records),
    });
    write_json(&dir.join("summary.json"), &summary)
}
