//! kg-build, train, recommend, eval, and combos subcommands.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use lfsim_core::ckat::{
    build_ckg, build_source_kgs, evaluate, evaluate_combination, inject_noise,
    run_combination_study, Checkpoint, Source, StudyRow,
};

use crate::cmd_workload::load_inputs;
use crate::config::ScenarioConfig;
use crate::manifest::{ensure_out_dir, write_args_manifest, write_file, write_manifest};

pub fn kg_build(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, _) = load_inputs(cfg)?;
    let mut kgs = build_source_kgs(&catalog, &trace);
    let mut selection = cfg.aux_sources()?;
    selection.insert(Source::Interactions);
    if cfg.noise_triples > 0 {
        kgs.push(inject_noise(&kgs, cfg.noise_triples, cfg.seed));
        selection.insert(Source::Noise);
    }
    let mut summary = String::from("source,triples,selected\n");
    for kg in &kgs {
        writeln!(
            summary,
            "{},{},{}",
            kg.source.as_str(),
            kg.triples.len(),
            selection.contains(&kg.source)
        )
        .unwrap();
    }
    let ckg = build_ckg(&kgs, &selection)?;
    write_file(out, "sources.csv", &summary)?;
    write_file(out, "ckg.json", &serde_json::to_string(&ckg)?)?;
    write_manifest(out, "kg-build", &[cfg.seed], cfg)?;
    println!(
        "ckg: {} entities, {} relations, {} triples -> {}",
        ckg.n_entities(),
        ckg.n_relations(),
        ckg.triples.len(),
        out.display()
    );
    Ok(())
}

pub fn train_cmd(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, _) = load_inputs(cfg)?;
    let aux = cfg.aux_sources()?;
    let (result, ckg, trained, split) = evaluate_combination(
        &catalog,
        &trace,
        &aux,
        cfg.noise_triples,
        &cfg.train,
        cfg.ckat_k,
        cfg.holdout_frac,
    )?;

    let mut losses = String::from("epoch,kg_loss,cf_loss\n");
    for (i, (kg, cf)) in trained.kg_losses.iter().zip(&trained.cf_losses).enumerate() {
        writeln!(losses, "{i},{kg},{cf}").unwrap();
    }
    write_file(out, "losses.csv", &losses)?;

    let checkpoint = Checkpoint::new(
        ckg,
        trained.params,
        trained.attention_enabled,
        trained.aggregator,
        split,
    );
    checkpoint.save(&out.join("model.json"))?;
    write_manifest(out, "train", &[cfg.train.seed], cfg)?;
    println!(
        "trained {} epochs; holdout recall@{} {:.4}, ndcg {:.4} -> {}",
        trained.kg_losses.len(),
        cfg.ckat_k,
        result.recall,
        result.ndcg,
        out.display()
    );
    Ok(())
}

pub fn recommend(model: &Path, users: &[String], k: usize, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let cp = Checkpoint::load(model)?;
    let repr = cp.representations();
    let selected: Vec<String> = if users.is_empty() {
        cp.ckg
            .users
            .iter()
            .map(|&u| cp.ckg.entities[u as usize].clone())
            .collect()
    } else {
        users
            .iter()
            .map(|u| if u.starts_with("user:") { u.clone() } else { format!("user:{u}") })
            .collect()
    };
    let mut csv = String::from("user_id,rank,item_id,score\n");
    for user in &selected {
        let top = lfsim_core::ckat::recommend_topk(&cp.ckg, &repr, user, k, true)?;
        for (rank, (item, score)) in top.iter().enumerate() {
            writeln!(csv, "{user},{},{item},{score}", rank + 1).unwrap();
        }
    }
    write_file(out, "rec.csv", &csv)?;
    write_args_manifest(
        out,
        "recommend",
        &serde_json::json!({ "model": model.display().to_string(), "users": users, "k": k }),
    )?;
    println!("recommended top-{k} for {} users -> {}", selected.len(), out.display());
    Ok(())
}

pub fn eval_cmd(model: &Path, k: usize, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let cp = Checkpoint::load(model)?;
    if cp.split.test.is_empty() {
        anyhow::bail!("checkpoint holds no held-out interactions");
    }
    let repr = cp.representations();
    let result = evaluate(&cp.ckg, &repr, &cp.split.test, k)?;
    let csv = format!(
        "k,recall,ndcg,evaluated_users\n{k},{},{},{}\n",
        result.recall, result.ndcg, result.evaluated_users
    );
    write_file(out, "eval.csv", &csv)?;
    write_args_manifest(
        out,
        "eval",
        &serde_json::json!({ "model": model.display().to_string(), "k": k }),
    )?;
    println!(
        "recall@{k} {:.4}, ndcg@{k} {:.4} over {} users -> {}",
        result.recall,
        result.ndcg,
        result.evaluated_users,
        out.display()
    );
    Ok(())
}

pub fn combos(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, _) = load_inputs(cfg)?;
    let rows = run_combination_study(
        &catalog,
        &trace,
        None,
        cfg.noise_triples,
        &cfg.train,
        cfg.ckat_k,
        cfg.holdout_frac,
    )?;
    let mut csv = String::from(StudyRow::HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_csv_line());
        csv.push('\n');
    }
    write_file(out, "combos.csv", &csv)?;
    write_manifest(out, "combos", &[cfg.train.seed], cfg)?;
    println!("{} study rows -> {}", rows.len(), out.display());
    Ok(())
}

pub fn model_path(model: &Option<std::path::PathBuf>, out: &Path) -> Result<std::path::PathBuf> {
    match model {
        Some(p) => Ok(p.clone()),
        None => {
            let p = out.join("model.json");
            if p.exists() {
                Ok(p)
            } else {
                Err(anyhow::anyhow!("no --model given and {} not found", p.display()))
                    .context("recommend/eval need a trained checkpoint")
            }
        }
    }
}
