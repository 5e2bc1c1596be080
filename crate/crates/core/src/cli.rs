//! Command-line front end.
//!
//! Settings are layered: built-in defaults, then the config file (global
//! keys, then the `[check]` section), then `FIBDIRAC_*` environment
//! variables, then flags.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ini::Ini;

use crate::error::{Error, Result};
use crate::geometry::{compute_tensors, model_geometry, tensor_table, ModelName};
use crate::report::{summary_table, VerificationReport};
use crate::verify::{run_check, suite_config, validate, CheckConfig, CheckName};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fibdirac", version, about = "Lattice checks for Dirac operators on Riemannian submersions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more checks (`all` for the full suite).
    Verify(VerifyArgs),
    /// Export S, k and Ω at every grid point.
    Tensors(TensorArgs),
    /// Built-in geometries.
    Models {
        #[command(subcommand)]
        action: ListOnly,
    },
    /// Available checks.
    Checks {
        #[command(subcommand)]
        action: ChecksAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ListOnly {
    List,
}

#[derive(Debug, Subcommand)]
pub enum ChecksAction {
    List,
    Describe { check: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Check names, or `all`.
    #[arg(required = true)]
    pub checks: Vec<String>,
    #[arg(long, env = "FIBDIRAC_GEOMETRY")]
    pub geometry: Option<String>,
    /// A single grid resolution per axis.
    #[arg(long, env = "FIBDIRAC_RESOLUTION", conflicts_with = "resolutions")]
    pub resolution: Option<usize>,
    /// Comma-separated resolution ladder.
    #[arg(long, env = "FIBDIRAC_RESOLUTIONS", value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    #[arg(long, env = "FIBDIRAC_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "FIBDIRAC_TOLERANCE")]
    pub tolerance: Option<f64>,
    /// Scan the curvature coefficient; the optional value is the reference coefficient.
    #[arg(long, env = "FIBDIRAC_SCAN_COEFFICIENT", num_args = 0..=1, default_missing_value = "0.125")]
    pub scan_coefficient: Option<f64>,
    #[arg(long, env = "FIBDIRAC_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// Directory for one report per check plus `summary.txt`.
    #[arg(long, env = "FIBDIRAC_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "FIBDIRAC_DENSE_THRESHOLD")]
    pub dense_threshold: Option<usize>,
    /// Random sections per resolution.
    #[arg(long, env = "FIBDIRAC_SAMPLES")]
    pub samples: Option<usize>,
    /// Worker threads.
    #[arg(long, env = "FIBDIRAC_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long, env = "FIBDIRAC_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TensorArgs {
    #[arg(long, env = "FIBDIRAC_GEOMETRY")]
    pub geometry: String,
    #[arg(long, env = "FIBDIRAC_RESOLUTION", default_value_t = 8)]
    pub resolution: usize,
    #[arg(long, env = "FIBDIRAC_FORMAT", value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run-level settings shared by every check.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Resolved configuration of a `verify` invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub checks: Vec<CheckName>,
    pub suite: bool,
    pub settings: RunSettings,
    configs: Vec<CheckConfig>,
    fallbacks: Vec<bool>,
}

impl RunConfig {
    pub fn config_for(&self, check: CheckName) -> &CheckConfig {
        &self.configs[self.index(check)]
    }

    /// Whether a suite run dropped overrides the check cannot honour.
    pub fn fell_back(&self, check: CheckName) -> bool {
        self.fallbacks[self.index(check)]
    }

    fn index(&self, check: CheckName) -> usize {
        self.checks.iter().position(|&c| c == check).expect("check is part of the run")
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn parse_format(value: &str) -> Result<Format> {
    Format::from_str(value.trim(), true).map_err(|_| Error::Config(format!("unknown format `{value}`")))
}

fn apply_key(cfg: &mut CheckConfig, settings: &mut RunSettings, key: &str, value: &str) -> Result<()> {
    match key.replace('-', "_").as_str() {
        "geometry" => cfg.geometry = Some(value.trim().parse()?),
        "resolution" => cfg.resolutions = vec![parse(key, value)?],
        "resolutions" => cfg.resolutions = parse_list(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "tolerance" => cfg.tolerance = Some(parse(key, value)?),
        "scan_coefficient" => {
            cfg.scan = true;
            if !value.trim().is_empty() {
                cfg.coefficient = parse(key, value)?;
            }
        }
        "dense_threshold" => cfg.dense_threshold = parse(key, value)?,
        "samples" => cfg.samples = parse(key, value)?,
        "format" => settings.format = parse_format(value)?,
        "out" => settings.out = Some(PathBuf::from(value.trim())),
        "jobs" => settings.jobs = Some(parse(key, value)?),
        other => return Err(Error::Config(format!("unknown config key `{other}`"))),
    }
    Ok(())
}

fn apply_flags(cfg: &mut CheckConfig, args: &VerifyArgs) -> Result<()> {
    if let Some(g) = &args.geometry {
        cfg.geometry = Some(g.parse()?);
    }
    if let Some(n) = args.resolution {
        cfg.resolutions = vec![n];
    }
    if let Some(v) = &args.resolutions {
        cfg.resolutions = v.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.tolerance {
        cfg.tolerance = Some(t);
    }
    if let Some(c) = args.scan_coefficient {
        cfg.scan = true;
        cfg.coefficient = c;
    }
    if let Some(d) = args.dense_threshold {
        cfg.dense_threshold = d;
    }
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    Ok(())
}

fn parse_checks(names: &[String]) -> Result<(Vec<CheckName>, bool)> {
    if names.iter().any(|n| n == "all") {
        if names.len() > 1 {
            return Err(Error::Config("`all` cannot be combined with other checks".into()));
        }
        return Ok((CheckName::ALL.to_vec(), true));
    }
    let mut out = Vec::new();
    for n in names.iter().flat_map(|n| n.split(',')) {
        let c: CheckName = n.trim().parse()?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok((out, false))
}

/// Resolves flags, environment and config file into per-check
/// configurations. Nothing is computed here.
pub fn resolve(args: &VerifyArgs) -> Result<RunConfig> {
    let (checks, suite) = parse_checks(&args.checks)?;
    let ini = match &args.config {
        Some(path) => Some(
            Ini::load_from_file(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut settings = RunSettings { format: Format::Json, out: None, jobs: None };
    let mut base = CheckConfig::default();
    if let Some(ini) = &ini {
        for (section, _) in ini.iter() {
            if let Some(name) = section {
                name.parse::<CheckName>()?;
            }
        }
        for (k, v) in ini.general_section().iter() {
            apply_key(&mut base, &mut settings, k, v)?;
        }
    }
    let mut configs = Vec::with_capacity(checks.len());
    let mut fallbacks = Vec::with_capacity(checks.len());
    for &check in &checks {
        let mut cfg = base.clone();
        if let Some(props) = ini.as_ref().and_then(|i| i.section(Some(check.as_str()))) {
            let mut local = settings.clone();
            for (k, v) in props.iter() {
                apply_key(&mut cfg, &mut local, k, v)?;
            }
            if local != settings {
                return Err(Error::Config(format!("[{check}] may not set format, out or jobs")));
            }
        }
        apply_flags(&mut cfg, args)?;
        let mut fell_back = false;
        if suite {
            (cfg, fell_back) = suite_config(check, &cfg);
        }
        validate(check, &cfg)?;
        configs.push(cfg);
        fallbacks.push(fell_back);
    }
    if let Some(f) = args.format {
        settings.format = f;
    }
    if let Some(o) = &args.out {
        settings.out = Some(o.clone());
    }
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        settings.jobs = Some(j);
    }
    Ok(RunConfig { checks, suite, settings, configs, fallbacks })
}

fn render(rep: &VerificationReport, format: Format) -> String {
    match format {
        Format::Json => rep.to_json() + "\n",
        Format::Csv => rep.to_csv(),
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body)?;
    Ok(())
}

/// Executes every check of a resolved run and writes its reports. Returns
/// the exit code.
pub fn execute(run: &RunConfig) -> Result<i32> {
    let settings = &run.settings;
    if let Some(dir) = &settings.out {
        fs::create_dir_all(dir)?;
    }
    let work = || -> Result<(Vec<VerificationReport>, Vec<String>, bool)> {
        let mut reports = Vec::new();
        let mut notes = Vec::new();
        let mut all_pass = true;
        let stdout = std::io::stdout();
        for &check in &run.checks {
            let cfg = run.config_for(check);
            let started = Instant::now();
            let res = run_check(check, cfg);
            let secs = started.elapsed().as_secs_f64();
            match res {
                Ok(mut rep) => {
                    if run.fell_back(check) {
                        rep.detail("suite_fallback", true);
                    }
                    all_pass &= rep.verdict.passed();
                    let body = render(&rep, settings.format);
                    match &settings.out {
                        Some(dir) => {
                            let ext = if settings.format == Format::Json { "json" } else { "csv" };
                            write_file(&dir.join(format!("{check}.{ext}")), &body)?;
                        }
                        None => stdout.lock().write_all(body.as_bytes())?,
                    }
                    notes.push(format!("{check}: {secs:.2} s"));
                    reports.push(rep);
                }
                Err(e) => {
                    all_pass = false;
                    notes.push(format!("{check}: error: {e}"));
                }
            }
        }
        Ok((reports, notes, all_pass))
    };
    let (reports, notes, all_pass) = match settings.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut summary = summary_table(&reports);
    summary.push('\n');
    for n in &notes {
        summary.push_str(n);
        summary.push('\n');
    }
    match &settings.out {
        Some(dir) => {
            write_file(&dir.join("summary.txt"), &summary)?;
            print!("{summary}");
        }
        None => eprint!("{summary}"),
    }
    Ok(if all_pass { EXIT_PASS } else { EXIT_FAIL })
}

fn tensors(args: &TensorArgs) -> Result<()> {
    let model: ModelName = args.geometry.parse()?;
    let g = model_geometry(model, &[args.resolution])?;
    let table = tensor_table(&g, &compute_tensors(&g));
    let body = match args.format {
        Format::Csv => table.to_csv(),
        Format::Json => serde_json::to_string(&table)? + "\n",
    };
    match &args.out {
        Some(path) => write_file(path, &body),
        None => Ok(std::io::stdout().lock().write_all(body.as_bytes())?),
    }
}

fn models_list() -> Result<String> {
    let mut out = String::new();
    for m in ModelName::ALL {
        let g = model_geometry(m, &[8])?;
        let t = compute_tensors(&g);
        out.push_str(&format!(
            "{:<18} dim {} (fiber {}, base {})  Ω≠0: {:<3}  {}\n",
            m.as_str(),
            g.dim_fiber + g.dim_base,
            g.dim_fiber,
            g.dim_base,
            if t.has_curvature() { "yes" } else { "no" },
            m.summary()
        ));
    }
    Ok(out)
}

fn checks_list() -> String {
    CheckName::ALL
        .iter()
        .map(|c| format!("{:<18} {}\n", c.as_str(), c.anchor()))
        .collect()
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownCheck(_) | Error::UnknownGeometry(_) | Error::InvalidResolution(_) => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let res = match &cli.command {
        Command::Verify(v) => resolve(v).and_then(|run| execute(&run)),
        Command::Tensors(t) => tensors(t).map(|_| EXIT_PASS),
        Command::Models { action: ListOnly::List } => models_list().map(|s| {
            print!("{s}");
            EXIT_PASS
        }),
        Command::Checks { action: ChecksAction::List } => {
            print!("{}", checks_list());
            Ok(EXIT_PASS)
        }
        Command::Checks { action: ChecksAction::Describe { check } } => check.parse::<CheckName>().map(|c| {
            print!("{}", c.describe());
            EXIT_PASS
        }),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> VerifyArgs {
        let mut v = vec!["fibdirac", "verify"];
        v.extend_from_slice(extra);
        match Cli::try_parse_from(v).unwrap().command {
            Command::Verify(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ini");
        fs::write(&path, "seed = 7\nresolutions = 8,16\n\n[symmetry]\nseed = 9\n").unwrap();
        let p = path.to_str().unwrap();
        let run = resolve(&args(&["symmetry", "consistency", "--config", p])).unwrap();
        assert_eq!(run.config_for(CheckName::Symmetry).seed, 9);
        assert_eq!(run.config_for(CheckName::Consistency).seed, 7);
        assert_eq!(run.config_for(CheckName::Consistency).resolutions, vec![8, 16]);
        let run = resolve(&args(&["symmetry", "--config", p, "--seed", "3", "--resolution", "4"])).unwrap();
        assert_eq!(run.config_for(CheckName::Symmetry).seed, 3);
        assert_eq!(run.config_for(CheckName::Symmetry).resolutions, vec![4]);
    }

    #[test]
    fn bad_names_are_config_errors() {
        let e = resolve(&args(&["nope"])).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let e = resolve(&args(&["symmetry", "--geometry", "klein"])).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let e = resolve(&args(&["closure", "--geometry", "torus4"])).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        let run = resolve(&args(&["all", "--geometry", "torus4", "--resolution", "8"])).unwrap();
        assert_eq!(run.checks.len(), CheckName::ALL.len());
        assert_eq!(run.config_for(CheckName::Closure).geometry, None);
        assert_eq!(run.config_for(CheckName::Positivity).resolutions, Vec::<usize>::new());
    }

    #[test]
    fn scan_flag_without_value() {
        let run = resolve(&args(&["factorization", "--scan-coefficient"])).unwrap();
        let cfg = run.config_for(CheckName::Factorization);
        assert!(cfg.scan);
        assert_eq!(cfg.coefficient, 0.125);
    }
}
