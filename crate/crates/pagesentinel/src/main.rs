//! Command-line front end.
//!
//! `scan` runs the full two-step pipeline; `extract` and `prune` expose the
//! intermediate steps for debugging; `inject` and `generate` build the
//! evaluation corpus; `eval` scores scan reports against a manifest.
//!
//! Reports go to standard output, diagnostics to standard error. Exit
//! codes: 0 benign, 3 malicious, 1 error, 2 usage.

use anyhow::{anyhow, bail, Result};
use clap::builder::PossibleValuesParser;
use clap::{Parser, Subcommand};
use pagesentinel::analyze::{analyze_page, AnalyzeOptions};
use pagesentinel::backend::{
    Backend, BackendConfig, CassetteRecorder, CassetteReplayer, HttpBackend, MockBackend,
    MockRules,
};
use pagesentinel::config::{BackendChoice, CliConfig, Templates};
use pagesentinel::corpus::inject::{inject, Attack, InjectionSpec};
use pagesentinel::corpus::{build_default_corpus, CorpusManifest, DEFAULT_SEED};
use pagesentinel::extract::{extract_all, ExtractorCall};
use pagesentinel::html::{estimate_tokens, Dom};
use pagesentinel::metrics::{emit_report, score, PageReport, ReportFormat};
use pagesentinel::prune::prune_untargeted_with_stats;
use pagesentinel::segment::SegmentRecord;
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_MALICIOUS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pagesentinel",
    version,
    about = "Detects and localizes prompt-injection content in webpages"
)]
struct Cli {
    /// JSON config file; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Use the deterministic offline backend (no network, no keys)
    #[arg(long, global = true, conflicts_with_all = ["endpoint", "model"])]
    mock: bool,

    /// Chat-completion endpoint URL (selects the HTTP backend)
    #[arg(long, global = true, value_name = "URL")]
    endpoint: Option<String>,

    /// Model name to request from the endpoint
    #[arg(long, global = true, value_name = "NAME")]
    model: Option<String>,

    /// Worker threads for scanning multiple pages
    #[arg(long, global = true, value_name = "N",
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    jobs: Option<usize>,

    /// Verbose diagnostics on standard error
    #[arg(long, global = true)]
    trace: bool,

    /// Record backend traffic to a cassette file
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "replay")]
    record: Option<PathBuf>,

    /// Serve backend requests from a recorded cassette
    #[arg(long, global = true, value_name = "PATH")]
    replay: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run extraction plus analysis over pages; exit 3 if any is malicious
    Scan {
        /// HTML files to scan
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,

        /// Write the JSON report array here instead of standard output
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Extraction only: print the segments of one page as a JSON array
    Extract {
        /// HTML file to segment
        #[arg(value_name = "FILE")]
        file: PathBuf,
    },

    /// Print boilerplate-pruned markup; statistics go to standard error
    Prune {
        /// HTML file to prune
        #[arg(value_name = "FILE")]
        file: PathBuf,

        /// Write the statistics JSON here instead of standard error
        #[arg(long, value_name = "PATH")]
        stats: Option<PathBuf>,
    },

    /// Write a contaminated copy of a page plus its ground truth
    Inject {
        /// Attack family to apply
        #[arg(value_parser = attack_names())]
        attack: String,

        /// Clean page to contaminate
        #[arg(value_name = "FILE")]
        file: PathBuf,

        /// Payload variant selector
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Where to write the contaminated page
        #[arg(short, long, value_name = "PATH")]
        out: PathBuf,

        /// Where to write the injected-segment ground truth as JSON
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },

    /// Synthesize the evaluation corpus into a directory
    Generate {
        /// Directory to populate (created if missing)
        #[arg(long, value_name = "DIR")]
        out: PathBuf,

        /// Generation seed
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },

    /// Score scan reports against a corpus manifest
    Eval {
        /// Path to the corpus manifest.json
        #[arg(value_name = "MANIFEST")]
        manifest: PathBuf,

        /// A scan report file, or a directory of report files
        #[arg(long, value_name = "PATH")]
        verdicts: PathBuf,

        /// Output format
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: ReportFormat,
    },
}

fn attack_names() -> PossibleValuesParser {
    PossibleValuesParser::new(Attack::ALL.map(|a| a.as_str()))
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    init_logging(cli.trace || config.trace);

    match &cli.command {
        Command::Scan { files, out } => cmd_scan(&cli, &config, files, out.as_deref()),
        Command::Extract { file } => cmd_extract(&cli, &config, file),
        Command::Prune { file, stats } => cmd_prune(&config, file, stats.as_deref()),
        Command::Inject {
            attack,
            file,
            seed,
            out,
            truth,
        } => cmd_inject(attack, file, *seed, out, truth.as_deref()),
        Command::Generate { out, seed } => cmd_generate(out, *seed),
        Command::Eval {
            manifest,
            verdicts,
            format,
        } => cmd_eval(manifest, verdicts, *format),
    }
}

fn init_logging(trace: bool) {
    let default_level = if trace { "debug" } else { "warn" };
    let env = env_logger::Env::default().default_filter_or(default_level);
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Applies the flag-over-file precedence to the backend selection.
fn resolve_backend_choice(cli: &Cli, config: &CliConfig) -> BackendChoice {
    if cli.mock {
        return match &config.backend {
            BackendChoice::Mock(rules) => BackendChoice::Mock(rules.clone()),
            BackendChoice::Http(_) => BackendChoice::Mock(MockRules::default()),
        };
    }
    if cli.endpoint.is_some() || cli.model.is_some() {
        let mut http = match &config.backend {
            BackendChoice::Http(http) => http.clone(),
            BackendChoice::Mock(_) => BackendConfig::default(),
        };
        if let Some(endpoint) = &cli.endpoint {
            http.endpoint = endpoint.clone();
        }
        if let Some(model) = &cli.model {
            http.model_name = model.clone();
        }
        return BackendChoice::Http(http);
    }
    config.backend.clone()
}

fn build_backend(cli: &Cli, config: &CliConfig) -> Result<Box<dyn Backend>> {
    if let Some(path) = &cli.replay {
        let replayer = CassetteReplayer::open(path)
            .map_err(|e| anyhow!("cannot open cassette {}: {e}", path.display()))?;
        return Ok(Box::new(replayer));
    }
    let base: Box<dyn Backend> = match resolve_backend_choice(cli, config) {
        BackendChoice::Mock(rules) => Box::new(MockBackend::new(rules)),
        BackendChoice::Http(http) => Box::new(HttpBackend::new(http)?),
    };
    match &cli.record {
        Some(path) => {
            let recorder = CassetteRecorder::create(path, base)
                .map_err(|e| anyhow!("cannot create cassette {}: {e}", path.display()))?;
            Ok(Box::new(recorder))
        }
        None => Ok(base),
    }
}

fn read_page(path: &Path) -> Result<Dom> {
    let markup = fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(Dom::parse(&markup))
}

fn cmd_scan(cli: &Cli, config: &CliConfig, files: &[PathBuf], out: Option<&Path>) -> Result<ExitCode> {
    let templates = config.templates()?;
    let backend = build_backend(cli, config)?;
    let reports = scan_pages(files, backend.as_ref(), config, &templates, cli.jobs)?;

    let malicious = reports.iter().any(|r| r.verdict.malicious);
    let mut text = serde_json::to_string_pretty(&reports)?;
    text.push('\n');
    match out {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| anyhow!("cannot write {}: {e}", path.display()))?;
            eprintln!("wrote {} page report(s) to {}", reports.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(if malicious {
        ExitCode::from(EXIT_MALICIOUS)
    } else {
        ExitCode::SUCCESS
    })
}

/// Scans pages in parallel; the report order follows the argument order
/// regardless of completion order.
fn scan_pages(
    files: &[PathBuf],
    backend: &dyn Backend,
    config: &CliConfig,
    templates: &Templates,
    jobs: Option<usize>,
) -> Result<Vec<PageReport>> {
    let scan_one = |path: &PathBuf| -> Result<PageReport> {
        let dom = read_page(path)?;
        let extraction = extract_all(
            &dom,
            &config.pattern_registry,
            Some(ExtractorCall {
                backend,
                template: &templates.extractor,
            }),
        );
        for failure in &extraction.failures {
            log::warn!("{}: {failure}", path.display());
        }
        let verdict = analyze_page(
            &dom,
            &extraction.segments,
            backend,
            &AnalyzeOptions {
                registry: &config.pattern_registry,
                thresholds: &config.prune_thresholds,
                template: &templates.analyzer,
            },
        );
        log::info!(
            "{}: {} segment(s), {}",
            path.display(),
            extraction.segments.len(),
            if verdict.malicious { "malicious" } else { "benign" },
        );
        Ok(PageReport {
            path: path.display().to_string(),
            verdict,
        })
    };

    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| anyhow!("cannot build the scan thread pool: {e}"))?
            .install(|| files.par_iter().map(scan_one).collect()),
        None => files.par_iter().map(scan_one).collect(),
    }
}

fn cmd_extract(cli: &Cli, config: &CliConfig, file: &Path) -> Result<ExitCode> {
    let templates = config.templates()?;
    let backend = build_backend(cli, config)?;
    let dom = read_page(file)?;
    let extraction = extract_all(
        &dom,
        &config.pattern_registry,
        Some(ExtractorCall {
            backend: backend.as_ref(),
            template: &templates.extractor,
        }),
    );
    for failure in &extraction.failures {
        log::warn!("{}: {failure}", file.display());
    }
    let records: Vec<SegmentRecord> = extraction.segments.iter().map(|s| s.to_record()).collect();
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_prune(config: &CliConfig, file: &Path, stats: Option<&Path>) -> Result<ExitCode> {
    let dom = read_page(file)?;
    let (pruned, removed_counts) =
        prune_untargeted_with_stats(&dom, &config.pattern_registry, &config.prune_thresholds);
    let markup = pruned.to_html();
    let report = serde_json::json!({
        "tokens_before": estimate_tokens(&dom.to_html()),
        "tokens_after": estimate_tokens(&markup),
        "removed_counts": removed_counts,
    });
    let mut stats_text = serde_json::to_string_pretty(&report)?;
    stats_text.push('\n');
    match stats {
        Some(path) => {
            fs::write(path, stats_text)
                .map_err(|e| anyhow!("cannot write {}: {e}", path.display()))?;
        }
        None => eprint!("{stats_text}"),
    }
    println!("{markup}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_inject(
    attack: &str,
    file: &Path,
    seed: u64,
    out: &Path,
    truth: Option<&Path>,
) -> Result<ExitCode> {
    let attack = Attack::parse(attack).ok_or_else(|| anyhow!("unknown attack {attack:?}"))?;
    let base = read_page(file)?;
    let spec = InjectionSpec {
        attack,
        target: None,
        payload_seed: seed,
    };
    let (contaminated, injected) = inject(&base, &spec)?;
    fs::write(out, contaminated.to_html())
        .map_err(|e| anyhow!("cannot write {}: {e}", out.display()))?;
    if let Some(path) = truth {
        let mut text = serde_json::to_string_pretty(&injected)?;
        text.push('\n');
        fs::write(path, text)
            .map_err(|e| anyhow!("cannot write {}: {e}", path.display()))?;
    }
    eprintln!(
        "injected {} segment(s) into {}",
        injected.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(out: &Path, seed: u64) -> Result<ExitCode> {
    let manifest = build_default_corpus(out, seed)?;
    eprintln!(
        "wrote {} pages and manifest.json to {}",
        manifest.entries.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(manifest: &Path, verdicts: &Path, format: ReportFormat) -> Result<ExitCode> {
    let manifest = CorpusManifest::load(manifest)?;
    let reports = load_reports(verdicts)?;
    let metrics = score(&manifest, &reports)?;
    print!("{}", emit_report(&metrics, format));
    Ok(ExitCode::SUCCESS)
}

/// Loads scan reports from a single file or from every `.json` file in a
/// directory. Each file may hold one report object or an array of them.
fn load_reports(path: &Path) -> Result<Vec<PageReport>> {
    let mut reports = Vec::new();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|entry| entry.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            bail!("no .json report files in {}", path.display());
        }
        for file in files {
            reports.extend(parse_report_file(&file)?);
        }
    } else {
        reports.extend(parse_report_file(path)?);
    }
    for report in &mut reports {
        if let Some(stripped) = report.path.strip_prefix("./") {
            report.path = stripped.to_string();
        }
    }
    Ok(reports)
}

fn parse_report_file(path: &Path) -> Result<Vec<PageReport>> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| anyhow!("{} is not valid JSON: {e}", path.display()))?;
    let parsed = if value.is_array() {
        serde_json::from_value::<Vec<PageReport>>(value)
    } else {
        serde_json::from_value::<PageReport>(value).map(|report| vec![report])
    };
    parsed.map_err(|e| anyhow!("{} is not a scan report: {e}", path.display()))
}
