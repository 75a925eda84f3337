//! simulate and sweep subcommands.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use lfsim_core::cachenet::{build_placement, PlacementConfig};
use lfsim_core::delivery::{run_scenario, DeliveryConfig, Metrics, MetricsRow, Mode};
use lfsim_core::netsim::{Engine, Topology};
use lfsim_core::workload::{Catalog, Request};

use crate::cmd_workload::load_inputs;
use crate::config::ScenarioConfig;
use crate::manifest::{ensure_out_dir, write_file, write_manifest};

fn run_one(
    trace: &[Request],
    catalog: &Catalog,
    topology: &Topology,
    cfg: &ScenarioConfig,
    mode: Mode,
    seed: u64,
) -> Result<Metrics> {
    let delivery = DeliveryConfig {
        mode,
        seed,
        ..cfg.delivery.clone()
    };
    Ok(run_scenario(trace, catalog, topology, &delivery)?)
}

pub fn simulate(cfg: &ScenarioConfig, mode: Mode, seed: u64, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, topology) = load_inputs(cfg)?;
    let metrics = run_one(&trace, &catalog, &topology, cfg, mode, seed)?;

    let mut csv = String::from(MetricsRow::HEADER);
    csv.push('\n');
    csv.push_str(&metrics.row().to_csv_line());
    csv.push('\n');
    write_file(out, "metrics.csv", &csv)?;

    let mut lat = String::from("req_id,latency_s\n");
    for (r, l) in trace.iter().zip(&metrics.latencies) {
        writeln!(lat, "{},{}", r.req_id, l).unwrap();
    }
    write_file(out, "latencies.csv", &lat)?;

    // group placement dump for the modes that compute one
    if matches!(mode, Mode::VirtualGroups | Mode::SmartCache) && !catalog.users.is_empty() {
        let engine = Engine::new(topology.clone())?;
        let k = cfg
            .delivery
            .k_groups
            .unwrap_or_else(|| topology.dtns().filter(|&n| topology.node(n).storage_bytes > 0).count())
            .max(1);
        let placement = build_placement(
            &catalog,
            &trace,
            engine.topology(),
            engine.routes(),
            &PlacementConfig {
                k,
                seed,
                max_iter: cfg.delivery.kmeans_max_iter,
                alpha: cfg.delivery.feature_alpha,
                beta: cfg.delivery.feature_beta,
                reference_size_bytes: cfg.delivery.reference_size_bytes,
            },
        )?;
        write_file(out, "placement.json", &placement.to_json())?;
    }

    let mut effective = cfg.clone();
    effective.delivery.mode = mode;
    effective.delivery.seed = seed;
    effective.seed = seed;
    write_manifest(out, "simulate", &[seed], &effective)?;
    println!(
        "{} seed {seed}: {} requests, local {:.3}, mean latency {:.3}s -> {}",
        mode.as_str(),
        metrics.requests,
        metrics.local_fraction(),
        metrics.mean_latency(),
        out.display()
    );
    Ok(())
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, topology) = load_inputs(cfg)?;

    let mut cells: Vec<(Mode, u64)> = Vec::new();
    for &mode in &cfg.modes {
        for &seed in &cfg.seeds {
            cells.push((mode, seed));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()?;
    let results: Vec<Result<Metrics>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(mode, seed)| run_one(&trace, &catalog, &topology, cfg, mode, seed))
            .collect()
    });

    let mut csv = String::from(MetricsRow::HEADER);
    csv.push('\n');
    for r in results {
        let metrics = r?;
        csv.push_str(&metrics.row().to_csv_line());
        csv.push('\n');
    }
    write_file(out, "metrics.csv", &csv)?;
    write_manifest(out, "sweep", &cfg.seeds, cfg)?;
    println!(
        "swept {} modes x {} seeds -> {}",
        cfg.modes.len(),
        cfg.seeds.len(),
        out.display()
    );
    Ok(())
}
