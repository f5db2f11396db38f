use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use sparse_splat::densify::{build_proximity_graph, unpool_edges};
use sparse_splat::ingest::import_ply;

#[derive(Args)]
pub struct InspectArgs {
    /// Gaussian checkpoint to analyse.
    #[arg(long)]
    ply: PathBuf,
    /// Proximity-score threshold for unpooling (`inf` allowed).
    #[arg(long, default_value_t = 10.0)]
    t_prox: f64,
    /// Neighbors per Gaussian in the proximity graph.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Graph CSV: index, neighbor indices, distances, score.
    #[arg(long)]
    out: PathBuf,
    /// Number of score histogram bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

pub fn run(args: InspectArgs) -> Result<()> {
    let set = import_ply(&args.ply)?;
    let k = args.k;
    let mut header = vec!["index".to_string()];
    header.extend((1..=k).map(|j| format!("neighbor_{j}")));
    header.extend((1..=k).map(|j| format!("distance_{j}")));
    header.push("score".into());

    let mut w = csv::Writer::from_path(&args.out).with_context(|| args.out.display().to_string())?;
    w.write_record(&header)?;
    if set.is_empty() {
        w.flush()?;
        println!("unpool-eligible Gaussians: 0");
        println!("new Gaussians from unpooling: 0");
        return Ok(());
    }
    let graph = build_proximity_graph(&set, k).with_context(|| args.ply.display().to_string())?;
    for i in 0..graph.len() {
        let mut row = vec![i.to_string()];
        row.extend(graph.neighbors(i).iter().map(|n| n.to_string()));
        row.extend(graph.distances(i).iter().map(|d| d.to_string()));
        row.push(graph.scores()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let scores: Vec<f64> = graph.scores().iter().map(|&s| f64::from(s)).collect();
    let t = args.t_prox;
    let eligible = scores.iter().filter(|&&s| s > t).count();
    let new = unpool_edges(&graph, t as f32).len();

    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = args.bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &scores {
        let b = if width > 0.0 { (((s - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[b] += 1;
    }
    let mut out = csv::Writer::from_writer(std::io::stdout());
    out.write_record(["bin_low", "bin_high", "count"])?;
    for (b, c) in counts.iter().enumerate() {
        let a = lo + width * b as f64;
        let z = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
        out.write_record([a.to_string(), z.to_string(), c.to_string()])?;
    }
    out.flush()?;
    println!("unpool-eligible Gaussians: {eligible}");
    println!("new Gaussians from unpooling: {new}");
    Ok(())
}
