//! Command line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use facetmap_core::analytics::{all_facet_stats, rank_facets};
use facetmap_core::{BoundingBox, GeoItem, NavigationQualityParams, RankingConfig};

use crate::ingestion::{build_snapshot_with_summary, parse_overpass, CategoryMappingConfig};
use crate::report::{analysis_table, comparison_table, OutputFormat};
use crate::service::{serve, MapService};
use crate::snapshot::{load_snapshot, save_snapshot};

#[derive(Debug, Parser)]
#[command(
    name = "facetmap",
    version,
    about = "Faceted projection of crowdsourced geodata"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn an Overpass JSON export into a snapshot file.
    Ingest(IngestArgs),
    /// Rank the facets of one category and print their statistics.
    Analyze(AnalyzeArgs),
    /// Compare exploration cost with the navigation-quality baseline for
    /// every candidate facet (no truncation).
    CompareMetrics(CompareArgs),
    /// Run the HTTP map service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Category mapping config (JSON array).
    #[arg(long)]
    pub config: PathBuf,
    /// Bounding box as south,west,north,east.
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    pub bbox: BoundingBox,
    #[arg(long)]
    pub out: PathBuf,
    /// Snapshot id; defaults to the output file stem.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub category: String,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_facets: u32,
    #[arg(long, default_value_t = 0.03, value_parser = parse_fraction)]
    pub min_coverage: f64,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub category: String,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 4.9, value_parser = parse_positive)]
    pub sigma: f64,
    /// Do not count the missing-value bucket as an extra value.
    #[arg(long)]
    pub no_missing_bucket: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "FACET_DATA_DIR")]
    pub data_dir: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

fn parse_bbox(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [south, west, north, east] = parts[..] else {
        return Err("expected south,west,north,east".into());
    };
    BoundingBox::new(south, west, north, east).map_err(|e| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {s}"))
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest(&args, out),
        Command::Analyze(args) => analyze(&args, out),
        Command::CompareMetrics(args) => compare_metrics(&args, out),
        Command::Serve(args) => run_server(&args),
    }
}

pub fn ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let bytes =
        std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let config = CategoryMappingConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let parsed =
        parse_overpass(&bytes).with_context(|| format!("parsing {}", args.input.display()))?;
    let id = match &args.id {
        Some(id) => id.clone(),
        None => args
            .out
            .file_stem()
            .and_then(|s| s.to_str())
            .context("cannot derive a snapshot id from --out; pass --id")?
            .to_string(),
    };
    let (snapshot, summary) =
        build_snapshot_with_summary(&id, &parsed.elements, &config, args.bbox);
    save_snapshot(&snapshot, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let per_category: Vec<String> = summary
        .kept
        .iter()
        .map(|(c, n)| format!("{c}: {n}"))
        .collect();
    if per_category.is_empty() {
        writeln!(out, "{} items", summary.total_kept())?;
    } else {
        writeln!(
            out,
            "{} items ({})",
            summary.total_kept(),
            per_category.join(", ")
        )?;
    }
    writeln!(
        out,
        "dropped: {} without coordinates, {} uncategorized, {} outside bbox, {} duplicates",
        parsed.dropped, summary.uncategorized, summary.outside_bbox, summary.duplicates
    )?;
    Ok(())
}

fn category_items(snapshot: &Path, category: &str) -> Result<Vec<GeoItem>> {
    let snapshot =
        load_snapshot(snapshot).with_context(|| format!("reading {}", snapshot.display()))?;
    let items: Vec<GeoItem> = snapshot.items_in_category(category).cloned().collect();
    if items.is_empty() {
        bail!(
            "category {category:?} has no items in snapshot {}",
            snapshot.id
        );
    }
    Ok(items)
}

pub fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let items = category_items(&args.snapshot, &args.category)?;
    let cfg = RankingConfig {
        min_coverage: args.min_coverage,
        max_facets: args.max_facets as usize,
        ..Default::default()
    };
    let ranked = rank_facets(&items, &cfg);
    out.write_all(analysis_table(&ranked, args.format).as_bytes())?;
    Ok(())
}

pub fn compare_metrics(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let mut params = NavigationQualityParams::new(args.mu, args.sigma)?;
    params.count_not_specified_as_value = !args.no_missing_bucket;
    let items = category_items(&args.snapshot, &args.category)?;
    let cfg = RankingConfig::default();
    let stats: Vec<_> = all_facet_stats(&items, &params)
        .into_iter()
        .filter(|s| s.coverage >= cfg.min_coverage && s.exploration_cost > 0.0)
        .collect();
    out.write_all(comparison_table(&stats, args.format).as_bytes())?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    tracing::info!("shutting down");
}

pub fn run_server(args: &ServeArgs) -> Result<()> {
    let service = MapService::open(&args.data_dir)
        .with_context(|| format!("opening data dir {}", args.data_dir.display()))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on {}", listener.local_addr()?);
        serve(Arc::new(service), listener, shutdown_signal()).await
    })
}
