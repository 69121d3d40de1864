//! Command-line front end: `analyze` scores one or more NER systems across
//! attribute buckets, `compare` adds a head-to-head section for two of
//! them, and `buckets` prints the fitted bucket layouts.

use clap::{Args, Parser, Subcommand};
use nerdiag::attributes::AttributeId;
use nerdiag::bucketing::BucketConfig;
use nerdiag::pipeline::{run_analyze, run_buckets, run_compare, PredictionSource, RunConfig};
use nerdiag::report::{emit_chart_data, emit_json, emit_markdown, ChartKind, ReportBundle};
use nerdiag::Scheme;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "nerdiag",
    version,
    about = "Bucketed diagnostic evaluation for named-entity recognizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score systems per attribute bucket and write the full report.
    Analyze(RunArgs),
    /// Like analyze, plus a head-to-head comparison of two systems.
    Compare {
        /// System whose wins count positive.
        system_a: String,
        /// System whose wins count negative.
        system_b: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print the fitted bucket layout of each attribute.
    Buckets(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// Training corpus: whitespace-separated columns, token first, gold tag
    /// second.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test corpus in the same layout; extra columns may hold predictions.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Prediction source as NAME=col:IDX (test-file column, 0-based) or
    /// NAME=PATH (aligned file, last column read as the tag). Repeatable.
    #[arg(long = "pred")]
    pred: Vec<String>,
    /// Tagging scheme: bio or bioes.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated attributes to analyze (default: all eight:
    /// eLen,sLen,eDen,oDen,eCon,tCon,eFre,tFre).
    #[arg(long)]
    attributes: Option<String>,
    /// Bucket count as N (all attributes) or ATTR=N; repeatable.
    #[arg(long = "buckets")]
    buckets: Vec<String>,
    /// Significance level for every reported test.
    #[arg(long)]
    alpha: Option<f64>,
    /// Directory for the report files (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, repeatable or comma-separated: json (report.json),
    /// md (report.md), csv (chart data: radar.json, diagnosis_bars.csv,
    /// heatmap.csv). Default: all.
    #[arg(long)]
    format: Vec<String>,
    /// Training-statistics artifact: loaded when the file exists, written
    /// otherwise.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Bucket-plan artifact: loaded when the file exists, written otherwise.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Performance-tensor artifact: loaded when the file exists, written
    /// otherwise.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Lowercase surfaces before frequency/consistency lookups.
    #[arg(long)]
    lowercase: bool,
    /// Flat key=value option file ('#' comments); command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Md,
    Csv,
}

fn main() {
    let cli = Cli::parse();
    if let Err(message) = run(cli) {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Analyze(args) => {
            let settings = Settings::resolve(args)?;
            let output = run_analyze(&settings.config).map_err(|e| e.to_string())?;
            report_warnings(&output.warnings);
            write_outputs(&output.bundle, &settings)
        }
        Command::Compare {
            system_a,
            system_b,
            args,
        } => {
            let settings = Settings::resolve(args)?;
            let output =
                run_compare(&settings.config, &system_a, &system_b).map_err(|e| e.to_string())?;
            report_warnings(&output.warnings);
            write_outputs(&output.bundle, &settings)
        }
        Command::Buckets(args) => {
            let settings = Settings::resolve(args)?;
            let text = run_buckets(&settings.config).map_err(|e| e.to_string())?;
            print!("{text}");
            Ok(())
        }
    }
}

fn report_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

struct Settings {
    config: RunConfig,
    out_dir: PathBuf,
    formats: Vec<Format>,
}

impl Settings {
    /// Merges command-line flags over the option file over the defaults.
    fn resolve(args: RunArgs) -> Result<Settings, String> {
        let file = match &args.config {
            Some(path) => parse_option_file(path)?,
            None => BTreeMap::new(),
        };
        for key in file.keys() {
            const KNOWN: &[&str] = &[
                "train", "test", "pred", "scheme", "attributes", "buckets", "alpha", "out",
                "format", "stats", "plan", "tensor", "lowercase",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(format!("unknown option '{key}' in the option file"));
            }
        }
        let pick = |cli: Option<String>, key: &str| -> Option<String> {
            cli.or_else(|| file.get(key).cloned())
        };

        let train = args
            .train
            .or_else(|| file.get("train").map(PathBuf::from))
            .ok_or("--train is required (or 'train=' in the option file)")?;
        let test = args
            .test
            .or_else(|| file.get("test").map(PathBuf::from))
            .ok_or("--test is required (or 'test=' in the option file)")?;
        let mut config = RunConfig::new(train, test);

        let pred_specs: Vec<String> = if args.pred.is_empty() {
            file.get("pred")
                .map(|v| split_list(v))
                .unwrap_or_default()
        } else {
            args.pred
        };
        for spec in &pred_specs {
            config.predictions.push(parse_pred(spec)?);
        }

        if let Some(text) = pick(args.scheme, "scheme") {
            config.scheme = Scheme::parse(&text)
                .ok_or_else(|| format!("unknown scheme '{text}' (expected bio or bioes)"))?;
        }
        if let Some(text) = pick(args.attributes, "attributes") {
            config.attributes = split_list(&text)
                .iter()
                .map(|name| {
                    AttributeId::parse(name).ok_or_else(|| {
                        format!(
                            "unknown attribute '{name}' (expected one of {})",
                            AttributeId::ALL
                                .iter()
                                .map(|a| a.as_str())
                                .collect::<Vec<_>>()
                                .join(", ")
                        )
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        let bucket_specs: Vec<String> = if args.buckets.is_empty() {
            file.get("buckets")
                .map(|v| split_list(v))
                .unwrap_or_default()
        } else {
            args.buckets
        };
        config.buckets = parse_buckets(&bucket_specs)?;
        if let Some(text) = pick(args.alpha.map(|a| a.to_string()), "alpha") {
            config.alpha = text
                .parse()
                .map_err(|_| format!("alpha must be a number, got '{text}'"))?;
        }
        config.stats_path = args.stats.or_else(|| file.get("stats").map(PathBuf::from));
        config.plan_path = args.plan.or_else(|| file.get("plan").map(PathBuf::from));
        config.tensor_path = args
            .tensor
            .or_else(|| file.get("tensor").map(PathBuf::from));
        config.lowercase = args.lowercase
            || file
                .get("lowercase")
                .map(|v| parse_bool(v))
                .transpose()?
                .unwrap_or(false);

        let out_dir = args
            .out
            .or_else(|| file.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let format_specs: Vec<String> = if args.format.is_empty() {
            file.get("format")
                .map(|v| split_list(v))
                .unwrap_or_default()
        } else {
            args.format
        };
        let mut formats = Vec::new();
        for spec in format_specs.iter().flat_map(|s| split_list(s)) {
            let format = match spec.as_str() {
                "json" => Format::Json,
                "md" => Format::Md,
                "csv" => Format::Csv,
                other => return Err(format!("unknown format '{other}' (expected json, md, csv)")),
            };
            if !formats.contains(&format) {
                formats.push(format);
            }
        }
        if formats.is_empty() {
            formats = vec![Format::Json, Format::Md, Format::Csv];
        }

        Ok(Settings {
            config,
            out_dir,
            formats,
        })
    }
}

/// `NAME=col:IDX` or `NAME=PATH`.
fn parse_pred(spec: &str) -> Result<(String, PredictionSource), String> {
    let (name, source) = spec
        .split_once('=')
        .ok_or_else(|| format!("prediction '{spec}' must look like NAME=col:IDX or NAME=PATH"))?;
    if name.is_empty() {
        return Err(format!("prediction '{spec}' has an empty system name"));
    }
    let source = match source.strip_prefix("col:") {
        Some(index) => PredictionSource::Column(
            index
                .parse()
                .map_err(|_| format!("prediction '{spec}': '{index}' is not a column index"))?,
        ),
        None => PredictionSource::File(PathBuf::from(source)),
    };
    Ok((name.to_owned(), source))
}

/// `N` (default for all attributes) or `ATTR=N`.
fn parse_buckets(specs: &[String]) -> Result<BucketConfig, String> {
    let mut config = BucketConfig::default();
    let parse_count = |text: &str| -> Result<usize, String> {
        let count: usize = text
            .parse()
            .map_err(|_| format!("bucket count '{text}' is not a number"))?;
        if count < 2 {
            return Err(format!("bucket count must be at least 2, got {count}"));
        }
        Ok(count)
    };
    for spec in specs {
        match spec.split_once('=') {
            Some((attr, count)) => {
                let attr = AttributeId::parse(attr.trim())
                    .ok_or_else(|| format!("unknown attribute '{}' in --buckets", attr.trim()))?;
                config.per_attribute.insert(attr, parse_count(count.trim())?);
            }
            None => config.default_m = parse_count(spec.trim())?,
        }
    }
    Ok(config)
}

fn parse_bool(text: &str) -> Result<bool, String> {
    match text {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got '{other}'")),
    }
}

/// Splits on commas and whitespace, dropping empties.
fn split_list(text: &str) -> Vec<String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Flat `key = value` lines; `#` starts a comment.
fn parse_option_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("failed to read {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            format!(
                "{} line {}: expected key=value, got '{line}'",
                path.display(),
                line_no + 1
            )
        })?;
        map.insert(key.trim().to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

fn write_outputs(bundle: &ReportBundle, settings: &Settings) -> Result<(), String> {
    std::fs::create_dir_all(&settings.out_dir)
        .map_err(|e| format!("failed to create {}: {e}", settings.out_dir.display()))?;
    let write = |name: &str, contents: String| -> Result<(), String> {
        let path = settings.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| format!("failed to write {}: {e}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    };
    for format in &settings.formats {
        match format {
            Format::Json => {
                write("report.json", emit_json(bundle).map_err(|e| e.to_string())?)?;
            }
            Format::Md => {
                write("report.md", emit_markdown(bundle))?;
            }
            Format::Csv => {
                write(
                    "radar.json",
                    emit_chart_data(bundle, ChartKind::Radar).map_err(|e| e.to_string())?,
                )?;
                write(
                    "diagnosis_bars.csv",
                    emit_chart_data(bundle, ChartKind::DiagnosisBars)
                        .map_err(|e| e.to_string())?,
                )?;
                if bundle.comparative.is_some() {
                    write(
                        "heatmap.csv",
                        emit_chart_data(bundle, ChartKind::Heatmap).map_err(|e| e.to_string())?,
                    )?;
                }
            }
        }
    }
    Ok(())
}
