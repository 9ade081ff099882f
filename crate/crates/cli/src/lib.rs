//! Command-line driver for the value-mapping pipeline.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

use std::io::Write;

use clap::{Parser, Subcommand};

use crate::config::{GlobalArgs, Settings};
use crate::error::Result;
use crate::stages::Context;

#[derive(Debug, Parser)]
#[command(name = "valuemap", version, about = "Simulated-respondent cultural value mapping")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check catalog counts, items and loadings.
    Validate,
    /// Query the backend for every (entity, item) prompt.
    Simulate,
    /// Turn raw answers into bounded item scores.
    Encode,
    /// Aggregate item scores into the two dimension indices.
    Index,
    /// Compare the map with a benchmark, region by region.
    Compare,
    /// Write SVG figures with plot-data sidecars.
    Render,
    /// Run every stage in order.
    RunAll,
}

/// Runs one parsed command, writing a human summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let settings = Settings::from_args(&cli.global)?;
    let line = |out: &mut dyn Write, s: String| {
        let _ = writeln!(out, "{s}");
    };
    if cli.command == Command::Validate {
        let report = stages::cmd_validate(&settings)?;
        line(
            out,
            format!(
                "entities {} (polities {}), items {}",
                report.total, report.polities, report.items
            ),
        );
        for c in &report.region_counts {
            line(out, format!("  {:<20} {}", c.region.name(), c.count));
        }
        if !report.is_valid() {
            return Err(error::CliError::Violations(report.violations));
        }
        line(out, "catalog ok".into());
        return Ok(());
    }
    let ctx = Context::new(settings)?;
    let dir = ctx.out_dir().display().to_string();
    match cli.command {
        Command::Validate => unreachable!(),
        Command::Simulate => {
            let s = stages::cmd_simulate(&ctx)?;
            line(
                out,
                format!(
                    "simulate: {} responses ({} live calls, {} cached) -> {dir}",
                    s.responses, s.backend_calls, s.cache_hits
                ),
            );
        }
        Command::Encode => {
            let n = stages::cmd_encode(&ctx)?;
            line(out, format!("encode: {n} responses -> {dir}"));
        }
        Command::Index => {
            let n = stages::cmd_index(&ctx)?;
            line(out, format!("index: {n} entities -> {dir}"));
        }
        Command::Compare => print_compare(&stages::cmd_compare(&ctx)?, out),
        Command::Render => {
            let files = stages::cmd_render(&ctx)?;
            line(out, format!("render: {} files -> {dir}", files.len()));
        }
        Command::RunAll => {
            let manifest = stages::cmd_run_all(&ctx)?;
            for stage in stages::STAGES {
                let Some(record) = manifest.stages.get(stage) else {
                    continue;
                };
                line(out, format!("{stage:<9} {} records", record.records));
                for note in &record.notes {
                    line(out, format!("          {note}"));
                }
            }
            line(out, format!("run {} -> {dir}", manifest.run_id));
        }
    }
    Ok(())
}

fn print_compare(s: &stages::CompareSummary, out: &mut dyn Write) {
    let _ = writeln!(out, "compare: {} entities joined", s.joined);
    for (dim, t) in &s.thresholds {
        let _ = writeln!(out, "  threshold {dim}: {t:.4}");
    }
    for f in &s.flagged {
        let _ = writeln!(out, "  above threshold: {f}");
    }
}
