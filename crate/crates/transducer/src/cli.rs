//! Command-line surface. Every command is a function over parsed
//! arguments so it can be driven from tests without a subprocess.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;
use transducer_core::calibrate::DiagnosticsReport;
use transducer_core::decide::{choose, sample_utility_space, TieRule};
use transducer_core::evaluate::{
    accumulate_confusion, achievable_bounds, algorithm_expected_utility, prob_superior, raw_argmax_decision,
    rescaled_yield, utility_sweep, utility_yield, variability_band, ConfusionMatrix, CurveKind, OutputGrid, SweepInput,
};
use transducer_core::math;
use transducer_core::model::ConditionalMode;
use transducer_core::oracle::{synth_generate, synth_generate_with_prevalence, GeneratorSpec};
use transducer_core::{
    CalibrationSet, ClassProbabilityVector, MixtureComponent, PrevalenceVector, SamplerConfig, TransducerModel,
    UtilityMatrix,
};

use crate::error::{CliError, Result};
use crate::io::{self, fmt, Table};
use crate::model_file::{data_digest, load_model, save_model};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(
    name = "transducer",
    version,
    about = "Calibrate classifier outputs into class probabilities and make utility-optimal decisions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic calibration set from a known mixture.
    Synth(SynthArgs),
    /// Fit a transducer to a calibration CSV.
    Fit(FitArgs),
    /// Probability curves with variability bands over a grid of outputs.
    Curve(CurveArgs),
    /// Class probabilities and maximum-expected-utility decisions for new outputs.
    Decide(DecideArgs),
    /// Confusion matrix, utility yield and rescaled yield.
    Evaluate(EvaluateArgs),
    /// Expected utility of the transducer-augmented algorithm and its long-run distribution.
    Algeval(AlgevalArgs),
    /// Probability that one algorithm's long-run utility exceeds another's.
    Compare(CompareArgs),
    /// Rescaled yields over utility matrices drawn uniformly from their space.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator: {"components": [{"weight", "class_probs", "means", "sds"}, ...]}
    #[arg(long)]
    pub generator: PathBuf,
    /// Number of records.
    #[arg(short = 'n', long)]
    pub records: usize,
    #[arg(long)]
    pub seed: u64,
    /// Class prevalences of the drawn set, keeping each class's output distribution.
    #[arg(long, value_delimiter = ',')]
    pub prevalence: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 64)]
    pub components: usize,
    /// Retained posterior samples, over all chains.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub chains: usize,
    #[arg(long, default_value_t = 2000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long)]
    pub seed: u64,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            components: self.components,
            samples: self.samples,
            chains: self.chains,
            burn_in: self.burn_in,
            thinning: self.thin,
            ..SamplerConfig::with_seed(self.seed)
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Calibration CSV with header `class,y1[,y2,...]`.
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Write convergence diagnostics as CSV.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ModeArgs {
    /// Average the per-sample conditionals instead of the pooled one.
    #[arg(long, conflicts_with = "generative")]
    pub nonexchangeable: bool,
    /// Use p(y|c) with the --prevalence base rates.
    #[arg(long)]
    pub generative: bool,
    /// Class prevalences of the population being scored.
    #[arg(long, value_delimiter = ',')]
    pub prevalence: Option<Vec<f64>>,
}

impl ModeArgs {
    fn resolve(&self, n_classes: usize) -> Result<(ConditionalMode, Option<PrevalenceVector>)> {
        if self.generative && self.prevalence.is_none() {
            return Err(CliError::Usage("--generative needs --prevalence".into()));
        }
        let prevalence = match &self.prevalence {
            Some(r) => {
                if r.len() != n_classes {
                    return Err(CliError::Dimension(format!(
                        "--prevalence has {} entries, model has {n_classes} classes",
                        r.len()
                    )));
                }
                Some(PrevalenceVector::new(r.clone())?)
            }
            None => None,
        };
        let mode = if self.nonexchangeable {
            ConditionalMode::NonExchangeable
        } else {
            ConditionalMode::Exchangeable
        };
        Ok((mode, prevalence))
    }
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    pub model: PathBuf,
    /// Grid cells per output dimension (default 512 for one dimension, fewer above).
    #[arg(long)]
    pub grid_cells: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.125, 0.875])]
    pub quantiles: Vec<f64>,
    /// Output densities p(y|c) instead of class probabilities.
    #[arg(long, conflicts_with = "nonexchangeable")]
    pub generative: bool,
    /// Center curve from the averaged per-sample conditionals.
    #[arg(long)]
    pub nonexchangeable: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    pub model: PathBuf,
    /// CSV with columns `y1..yd`; optional `u_<i>_<c>` columns give a
    /// per-row utility matrix. Other columns are copied through.
    pub outputs: PathBuf,
    /// Utility matrix: one row per decision, one column per class.
    #[arg(long)]
    pub utility: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Break ties at random from this seed instead of reporting them.
    #[arg(long)]
    pub tie_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub utility: PathBuf,
    /// Confusion matrix file (decision rows, class columns).
    #[arg(long, conflicts_with_all = ["decisions", "model"])]
    pub confusion: Option<PathBuf>,
    /// Decisions CSV with `class`, `decision` and `tie` columns.
    #[arg(long, conflicts_with = "model")]
    pub decisions: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    /// Labelled CSV scored with --model.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlgevalArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub utility: PathBuf,
    #[arg(long)]
    pub grid_cells: Option<usize>,
    /// Long-run utility per posterior sample, CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Long-run utility CSV of algorithm a.
    pub a: PathBuf,
    /// Long-run utility CSV of algorithm b.
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Fitted models; each adds an `augmented_<j>` column.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Labelled CSV with header `class,y1[,y2,...]`.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of utility matrices.
    #[arg(short = 'n', long, default_value_t = 10_000)]
    pub matrices: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where a command's main output goes.
fn sink<'a>(out: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match out {
        Some(p) => Box::new(io::create(p)?),
        None => Box::new(stdout),
    })
}

fn finish(mut w: Box<dyn Write + '_>, out: &Option<PathBuf>) -> Result<()> {
    w.flush()
        .map_err(|e| CliError::io(out.clone().unwrap_or_else(|| "<stdout>".into()), e))
}

fn write_json(w: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    writeln!(w, "{}", serde_json::to_string_pretty(value).expect("serializable"))
        .map_err(|e| CliError::io("<stdout>", e))
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, stdout),
        Command::Fit(a) => cmd_fit(&a, stderr),
        Command::Curve(a) => cmd_curve(&a, stdout, stderr),
        Command::Decide(a) => cmd_decide(&a, stdout),
        Command::Evaluate(a) => cmd_evaluate(&a, stdout),
        Command::Algeval(a) => cmd_algeval(&a, stdout),
        Command::Compare(a) => cmd_compare(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    components: Vec<GeneratorComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorComponent {
    weight: f64,
    class_probs: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

pub fn read_generator(path: &Path, seed: u64) -> Result<GeneratorSpec> {
    let file: GeneratorFile =
        serde_json::from_reader(io::open(path)?).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))?;
    let components = file
        .components
        .into_iter()
        .map(|c| MixtureComponent::new(c.weight, c.class_probs, c.means, c.sds))
        .collect();
    Ok(GeneratorSpec::new(components, seed)?)
}

pub fn cmd_synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = read_generator(&a.generator, a.seed)?;
    let data = match &a.prevalence {
        Some(r) => synth_generate_with_prevalence(&spec, &PrevalenceVector::new(r.clone())?, a.records)?,
        None => synth_generate(&spec, a.records)?,
    };
    let mut w = sink(&a.out, stdout)?;
    io::write_calibration(&mut w, &data)?;
    finish(w, &a.out)
}

pub fn cmd_fit(a: &FitArgs, stderr: &mut dyn Write) -> Result<()> {
    let data = io::read_calibration_file(&a.data, None)?;
    let result = parallel::fit_parallel(&data, &a.sampler.config())?;
    save_model(&a.out, &result.model, Some(data_digest(&data)))?;
    let diag = if result.traces.len() >= 2 {
        Some(result.diagnostics()?)
    } else {
        None
    };
    let log = |stderr: &mut dyn Write, msg: String| {
        let _ = writeln!(stderr, "{msg}");
    };
    log(
        stderr,
        format!(
            "fitted {} samples x {} components on {} records",
            result.model.n_samples(),
            result.model.n_components(),
            data.len()
        ),
    );
    if let Some(d) = &diag {
        log(stderr, format!("max split R-hat {:.4}", d.max_rhat()));
        for s in d.statistics.iter().filter(|s| s.flagged) {
            log(
                stderr,
                format!(
                    "warning: `{}` has R-hat {:.4}; chains may not have converged",
                    s.name, s.rhat
                ),
            );
        }
        if let Some(path) = &a.diagnostics {
            write_diagnostics(path, d)?;
        }
    } else {
        log(stderr, "single chain: convergence diagnostics unavailable".into());
    }
    Ok(())
}

fn write_diagnostics(path: &Path, d: &DiagnosticsReport) -> Result<()> {
    let headers: Vec<String> = ["statistic", "rhat", "ess", "flagged"].map(String::from).to_vec();
    let rows = d
        .statistics
        .iter()
        .map(|s| vec![s.name.clone(), fmt(s.rhat), fmt(s.ess), s.flagged.to_string()]);
    let mut w = io::create(path)?;
    io::write_rows(&mut w, &headers, rows)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn default_cells(y_dim: usize) -> usize {
    match y_dim {
        1 => 512,
        2 => 128,
        _ => 24,
    }
}

pub fn cmd_curve(a: &CurveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let cells = a.grid_cells.unwrap_or_else(|| default_cells(model.y_dim()));
    let points = OutputGrid::for_model(&model, cells)?.centers();
    let (lo, hi) = (a.quantiles[0], a.quantiles[1]);
    let d = model.y_dim();
    let mut headers: Vec<String> = (1..=d).map(|j| format!("y{j}")).collect();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let prefix = if a.generative { "f" } else { "p" };
    for c in 0..model.n_classes() {
        let kind = if a.generative {
            CurveKind::Generative { class: c }
        } else {
            CurveKind::ClassConditional { class: c }
        };
        let band = variability_band(&model, &points, lo, hi, kind)?;
        if c == 0 && !band.reliable {
            let _ = writeln!(
                stderr,
                "warning: only {} posterior samples; band quantiles are unreliable",
                model.n_samples()
            );
        }
        let center = if a.nonexchangeable {
            points
                .iter()
                .map(|y| Ok(model.conditional_class_given_output_nonexchangeable(y)?[c]))
                .collect::<Result<Vec<f64>>>()?
        } else {
            band.curve
        };
        headers.extend([
            format!("{prefix}_{c}"),
            format!("{prefix}_{c}_lo"),
            format!("{prefix}_{c}_hi"),
        ]);
        columns.extend([center, band.lower, band.upper]);
    }
    let rows = points.iter().enumerate().map(|(i, y)| {
        let mut row: Vec<String> = y.iter().map(|&v| fmt(v)).collect();
        row.extend(columns.iter().map(|col| fmt(col[i])));
        row
    });
    let mut w = sink(&a.out, stdout)?;
    io::write_rows(&mut w, &headers, rows)?;
    finish(w, &a.out)
}

/// `u_<i>_<c>` columns of a table as (decision, class, column).
fn utility_columns(table: &Table) -> Vec<(usize, usize, usize)> {
    table
        .headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            let mut parts = h.strip_prefix("u_")?.split('_');
            let i = parts.next()?.parse().ok()?;
            let c = parts.next()?.parse().ok()?;
            parts.next().is_none().then_some((i, c, col))
        })
        .collect()
}

/// Per-row utility matrices from `u_<i>_<c>` columns, if any.
fn row_utilities(table: &Table, n_classes: usize) -> Result<Option<Vec<UtilityMatrix>>> {
    let cols = utility_columns(table);
    if cols.is_empty() {
        return Ok(None);
    }
    let n_dec = cols.iter().map(|&(i, _, _)| i).max().unwrap_or(0) + 1;
    let n_cls = cols.iter().map(|&(_, c, _)| c).max().unwrap_or(0) + 1;
    if n_cls != n_classes {
        return Err(CliError::Dimension(format!(
            "utility columns cover {n_cls} classes, model has {n_classes}"
        )));
    }
    if cols.len() != n_dec * n_cls {
        return Err(CliError::parse(
            &table.source,
            1,
            format!("utility columns must form a full {n_dec}x{n_cls} matrix"),
        ));
    }
    let mut grid = vec![0usize; n_dec * n_cls];
    for &(i, c, col) in &cols {
        grid[i * n_cls + c] = col;
    }
    (0..table.rows.len())
        .map(|r| {
            let entries = grid
                .iter()
                .map(|&col| table.float(r, col))
                .collect::<Result<Vec<f64>>>()?;
            Ok(UtilityMatrix::from_row_major(n_dec, n_cls, entries)?)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn check_utility_shape(u: &UtilityMatrix, n_classes: usize) -> Result<()> {
    if u.n_classes() != n_classes {
        return Err(CliError::Dimension(format!(
            "utility matrix has {} class columns, model has {n_classes} classes",
            u.n_classes()
        )));
    }
    Ok(())
}

fn table_outputs(table: &Table, model: &TransducerModel) -> Result<Vec<Vec<f64>>> {
    let cols = table.output_columns();
    if cols.len() != model.y_dim() {
        return Err(CliError::Dimension(format!(
            "{} has {} output columns, model expects {}",
            table.source.display(),
            cols.len(),
            model.y_dim()
        )));
    }
    (0..table.rows.len()).map(|i| table.outputs(i, &cols)).collect()
}

/// Decision outcomes for every output row.
pub struct Decisions {
    pub probabilities: Vec<ClassProbabilityVector>,
    pub chosen: Vec<Vec<usize>>,
    pub tied: Vec<Vec<usize>>,
}

pub fn decide_rows(
    model: &TransducerModel,
    outputs: &[Vec<f64>],
    utilities: &dyn Fn(usize) -> UtilityMatrix,
    mode: ConditionalMode,
    prevalence: Option<&PrevalenceVector>,
    tie_seed: Option<u64>,
) -> Result<Decisions> {
    let probabilities = parallel::probabilities_parallel(model, outputs, mode, prevalence)?;
    let mut chosen = Vec::with_capacity(outputs.len());
    let mut tied = Vec::with_capacity(outputs.len());
    for (i, p) in probabilities.iter().enumerate() {
        let rule = match tie_seed {
            // one stream per row keeps rows independent of each other
            Some(s) => TieRule::SeededUniform(s ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            None => TieRule::ReportTie,
        };
        let outcome = choose(&utilities(i), p, rule)?;
        chosen.push(outcome.chosen);
        tied.push(outcome.tied);
    }
    Ok(Decisions {
        probabilities,
        chosen,
        tied,
    })
}

fn join(v: &[usize]) -> String {
    v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";")
}

pub fn cmd_decide(a: &DecideArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = Table::read_file(&a.outputs)?;
    let outputs = table_outputs(&table, &model)?;
    let (mode, prevalence) = a.mode.resolve(model.n_classes())?;
    let shared = match &a.utility {
        Some(p) => {
            let u = io::read_utility_file(p)?;
            check_utility_shape(&u, model.n_classes())?;
            Some(u)
        }
        None => None,
    };
    let per_row = row_utilities(&table, model.n_classes())?;
    let pick_u = |i: usize| -> UtilityMatrix {
        match (&per_row, &shared) {
            (Some(rows), _) => rows[i].clone(),
            (None, Some(u)) => u.clone(),
            (None, None) => unreachable!("checked below"),
        }
    };
    if per_row.is_none() && shared.is_none() {
        return Err(CliError::Usage("decide needs --utility or u_<i>_<c> columns".into()));
    }
    let d = decide_rows(&model, &outputs, &pick_u, mode, prevalence.as_ref(), a.tie_seed)?;
    let mut headers = table.headers.clone();
    headers.extend((0..model.n_classes()).map(|c| format!("p_{c}")));
    headers.extend(["decision".to_owned(), "tie".to_owned()]);
    let rows = table.rows.iter().enumerate().map(|(i, row)| {
        let mut out = row.clone();
        out.extend(d.probabilities[i].as_slice().iter().map(|&p| fmt(p)));
        out.push(d.chosen[i][0].to_string());
        out.push(if d.tied[i].len() > 1 {
            join(&d.tied[i])
        } else {
            String::new()
        });
        out
    });
    let mut w = sink(&a.out, stdout)?;
    io::write_rows(&mut w, &headers, rows)?;
    finish(w, &a.out)
}

/// Decision sets from a decisions CSV: the tied set when `tie` is
/// non-empty, else the single `decision`.
pub fn read_decision_sets(table: &Table) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let class_col = table.require_column("class")?;
    let dec_col = table.require_column("decision")?;
    let tie_col = table.require_column("tie")?;
    let mut sets = Vec::with_capacity(table.rows.len());
    let mut truths = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        truths.push(table.index(i, class_col)?);
        let tie = &table.rows[i][tie_col];
        if tie.is_empty() {
            sets.push(vec![table.index(i, dec_col)?]);
        } else {
            let set = tie
                .split(';')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| CliError::parse(&table.source, table.lines[i], format!("bad tie set `{tie}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            sets.push(set);
        }
    }
    Ok((sets, truths))
}

fn evaluation_json(u: &UtilityMatrix, cm: &ConfusionMatrix) -> Result<serde_json::Value> {
    let y = utility_yield(u, cm)?;
    let bounds = achievable_bounds(u, &cm.class_totals())?;
    let rescaled = rescaled_yield(y, bounds).ok();
    Ok(json!({
        "confusion": cm.rows(),
        "yield": y,
        "rescaled_yield": rescaled,
        "bounds": {"min": bounds.min, "max": bounds.max},
    }))
}

pub fn cmd_evaluate(a: &EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let u = io::read_utility_file(&a.utility)?;
    let cm = if let Some(path) = &a.confusion {
        ConfusionMatrix::from_rows(&io::read_matrix(io::open(path)?, path)?)?
    } else if let Some(path) = &a.decisions {
        let table = Table::read_file(path)?;
        let (sets, truths) = read_decision_sets(&table)?;
        accumulate_confusion(&sets, &truths, u.n_decisions(), u.n_classes())?
    } else if let (Some(mpath), Some(dpath)) = (&a.model, &a.data) {
        let model = load_model(mpath)?;
        check_utility_shape(&u, model.n_classes())?;
        let data = io::read_calibration_file(dpath, Some(model.n_classes()))?;
        let outputs: Vec<Vec<f64>> = data.records().iter().map(|r| r.output.clone()).collect();
        let truths: Vec<usize> = data.records().iter().map(|r| r.class_label).collect();
        let (mode, prevalence) = a.mode.resolve(model.n_classes())?;
        let d = decide_rows(&model, &outputs, &|_| u.clone(), mode, prevalence.as_ref(), None)?;
        accumulate_confusion(&d.tied, &truths, u.n_decisions(), u.n_classes())?
    } else {
        return Err(CliError::Usage(
            "evaluate needs --confusion, --decisions, or --model with --data".into(),
        ));
    };
    if cm.n_decisions() != u.n_decisions() || cm.n_classes() != u.n_classes() {
        return Err(CliError::Dimension(format!(
            "confusion matrix is {}x{}, utility matrix is {}x{}",
            cm.n_decisions(),
            cm.n_classes(),
            u.n_decisions(),
            u.n_classes()
        )));
    }
    let mut w = sink(&a.out, stdout)?;
    write_json(&mut w, &evaluation_json(&u, &cm)?)?;
    finish(w, &a.out)
}

pub fn cmd_algeval(a: &AlgevalArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let u = io::read_utility_file(&a.utility)?;
    check_utility_shape(&u, model.n_classes())?;
    let cells = a.grid_cells.unwrap_or_else(|| default_cells(model.y_dim()));
    let grid = OutputGrid::for_model(&model, cells)?;
    let expected = algorithm_expected_utility(&model, &u, &grid)?;
    let long_run = parallel::long_run_parallel(&model, &u, &grid)?;
    if let Some(path) = &a.out {
        let mut w = io::create(path)?;
        io::write_long_run(&mut w, &long_run)?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &a.histogram {
        let mut w = io::create(path)?;
        io::write_histogram(&mut w, &long_run, a.bins)?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    let mut sorted = long_run.clone();
    sorted.sort_by(f64::total_cmp);
    write_json(
        stdout,
        &json!({
            "expected_utility": expected,
            "long_run_mean": math::mean(&long_run),
            "long_run_quantiles": {
                "0.125": math::quantile_sorted(&sorted, 0.125),
                "0.5": math::quantile_sorted(&sorted, 0.5),
                "0.875": math::quantile_sorted(&sorted, 0.875),
            },
            "grid_cells": cells,
        }),
    )
}

pub fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write) -> Result<()> {
    let ua = io::read_long_run_file(&a.a)?;
    let ub = io::read_long_run_file(&a.b)?;
    write_json(stdout, &json!({ "prob_superior": prob_superior(&ua, &ub)? }))
}

/// Inputs of a sweep over labelled data: argmax-on-raw-output baseline and
/// one probability set per model.
pub fn sweep_input(
    models: &[TransducerModel],
    data: &CalibrationSet,
    mode: ConditionalMode,
    prevalence: Option<&PrevalenceVector>,
) -> Result<SweepInput> {
    let outputs: Vec<Vec<f64>> = data.records().iter().map(|r| r.output.clone()).collect();
    let baseline = outputs
        .iter()
        .map(|y| Ok(raw_argmax_decision(y, data.n_classes())?))
        .collect::<Result<Vec<_>>>()?;
    let probabilities = models
        .iter()
        .map(|m| parallel::probabilities_parallel(m, &outputs, mode, prevalence).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepInput {
        truths: data.records().iter().map(|r| r.class_label).collect(),
        baseline,
        probabilities,
        n_classes: data.n_classes(),
    })
}

pub fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let models = a.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let n_classes = models[0].n_classes();
    if models
        .iter()
        .any(|m| m.n_classes() != n_classes || m.y_dim() != models[0].y_dim())
    {
        return Err(CliError::Dimension(
            "sweep models disagree in classes or output dimension".into(),
        ));
    }
    if n_classes != 2 {
        return Err(CliError::Dimension(format!(
            "utility-space sweeps are defined for 2 classes, model has {n_classes}"
        )));
    }
    let data = io::read_calibration_file(&a.data, Some(n_classes))?;
    let (mode, prevalence) = a.mode.resolve(n_classes)?;
    let input = sweep_input(&models, &data, mode, prevalence.as_ref())?;
    let rows = utility_sweep(&input, &sample_utility_space(a.matrices, a.seed))?;
    let mut headers: Vec<String> = ["u00", "u01", "u10", "u11", "baseline"].map(String::from).to_vec();
    headers.extend((0..models.len()).map(|j| format!("augmented_{j}")));
    let out_rows = rows.iter().map(|r| {
        let mut row: Vec<String> = r.utility.entries().iter().map(|&v| fmt(v)).collect();
        row.push(fmt(r.baseline));
        row.extend(r.augmented.iter().map(|&v| fmt(v)));
        row
    });
    let mut w = sink(&a.out, stdout)?;
    io::write_rows(&mut w, &headers, out_rows)?;
    finish(w, &a.out)
}
