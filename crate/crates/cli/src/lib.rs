//! Command-line front end for `binrisk`.
//!
//! Scalar results are written to stdout as one JSON object; curves default to
//! CSV. Failures print a one-line JSON object with an `error` field to stderr
//! and exit with a code from [`exit_code`].

use std::io::Write;
use std::path::PathBuf;

use binrisk::asymptotic::{
    ed_i_for, ed_p_for, ed_p_star, ed_p_star_upper, KernelKind, RiskExpansion,
};
use binrisk::discretize::{cell_probabilities, m_statistic, parse_real_list, FixedPartition, QuantileDesign};
use binrisk::distributions::Mother;
use binrisk::divergence::{DivergenceKernel, KernelSpec, ProbabilityVector};
use binrisk::montecarlo::{curve_to_csv, estimate_many, expansion_for, risk_curve, RiskEstimate, Scheme};
use binrisk::oracle::{composition_count, exact_fixed_risk, uniform_orderstat_moment, MomentSpec};
use binrisk::presets::{figure_to_csv, ExperimentPreset, PresetSummary, NAMES};
use binrisk::{Error, ExtReal};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the RNG seed.
pub const SEED_ENV: &str = "BINRISK_SEED";

#[derive(Debug, Parser)]
#[command(name = "binrisk", version, about = "Divergence risk of fixed- and moving-interval discretization")]
pub struct Cli {
    /// Output format; curves default to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// RNG seed (64-bit); BINRISK_SEED overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Flat JSON file of default option values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Second-order risk expansions.
    #[command(subcommand)]
    Risk(RiskCommand),
    /// Fixed-interval sample size matching a preset's moving-interval risk.
    EquivN {
        #[arg(long, visible_alias = "experiment")]
        preset: Option<String>,
    },
    /// Exact reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Monte Carlo risk estimates.
    #[command(subcommand)]
    Mc(McCommand),
    /// Risk against n: Monte Carlo plus expansion, or both expansions with --figure.
    Curve(CurveArgs),
    /// The built-in experiments.
    #[command(subcommand)]
    Presets(PresetsCommand),
}

#[derive(Debug, Args, Default)]
struct KernelArgs {
    /// α of the kernel.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Use the symmetrized kernel ½(D_α + D_{−α}).
    #[arg(long)]
    sym: bool,
    /// f'''(1) of a general kernel (with --f4, instead of --alpha).
    #[arg(long, allow_hyphen_values = true)]
    f3: Option<f64>,
    /// f''''(1) of a general kernel.
    #[arg(long, allow_hyphen_values = true)]
    f4: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum RiskCommand {
    /// Fixed-interval (multinomial MLE) expansion.
    Fixed {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        p: Option<usize>,
        /// M = Σ 1/mᵢ.
        #[arg(long = "M", visible_alias = "m-stat")]
        m_stat: Option<f64>,
        /// Cell probabilities, e.g. [0.2,0.3,0.5].
        #[arg(long, allow_hyphen_values = true)]
        m_vector: Option<String>,
        /// Mother distribution id (with --partition) to compute the cells.
        #[arg(long)]
        mother: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        partition: Option<String>,
        #[arg(long)]
        n: Option<f64>,
    },
    /// Moving-interval expansion at given ranks.
    Moving {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Levels: deciles(k) or a list.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        ranks: Option<String>,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Moving-interval expansion under randomized ranks.
    MovingStar {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        n: Option<u64>,
        /// Report the r̄-free upper bound instead.
        #[arg(long)]
        upper: bool,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// E[∏ U₍ₙᵢ₎^aᵢ] for uniform order statistics.
    Moments {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        ranks: Option<String>,
        #[arg(long)]
        powers: Option<String>,
    },
    /// Exact fixed-interval risk by enumeration.
    ExactRisk {
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long)]
        m: Option<String>,
        #[arg(long)]
        n: Option<u32>,
    },
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    mother: Option<String>,
    /// Kernel: alpha:<v> or sym-alpha:<v>.
    #[arg(long, allow_hyphen_values = true)]
    kernel: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum McCommand {
    Fixed {
        #[command(flatten)]
        common: McArgs,
        #[arg(long, allow_hyphen_values = true)]
        partition: Option<String>,
    },
    Moving {
        #[command(flatten)]
        common: McArgs,
        #[arg(long)]
        levels: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeName {
    Fixed,
    Moving,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Take mother, partition, levels and kernel from a preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    #[arg(long)]
    mother: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    partition: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kernel: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    n_grid: Option<String>,
    /// Expansions of both schemes only (no simulation); needs --preset.
    #[arg(long)]
    figure: bool,
}

#[derive(Debug, Subcommand)]
enum PresetsCommand {
    List,
    Show { name: String },
}

/// Defaults read from `--config`. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub format: Option<String>,
    pub alpha: Option<f64>,
    pub sym: Option<bool>,
    pub f3: Option<f64>,
    pub f4: Option<f64>,
    pub p: Option<usize>,
    #[serde(rename = "M")]
    pub m_stat: Option<f64>,
    pub m_vector: Option<Vec<f64>>,
    pub n: Option<u64>,
    pub mother: Option<String>,
    pub partition: Option<Vec<f64>>,
    pub levels: Option<String>,
    pub ranks: Option<Vec<u64>>,
    pub powers: Option<Vec<u32>>,
    pub kernel: Option<String>,
    pub preset: Option<String>,
    pub n_grid: Option<Vec<u64>>,
}

/// Why a command failed, mapped onto distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

/// 1 usage, 2 domain, 3 enumeration budget, 4 unknown preset, 5 malformed
/// config, 6 infeasible design.
pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => 1,
        CliError::Config(_) => 5,
        CliError::Lib(e) => match e {
            Error::Parse(_) => 1,
            Error::UnknownPreset(_) => 4,
            Error::Domain(_) | Error::Shape(..) => 2,
            Error::Budget { .. } => 3,
            Error::Design(_) => 6,
        },
    }
}

fn error_kind(e: &CliError) -> &'static str {
    match e {
        CliError::Usage(_) => "usage",
        CliError::Config(_) => "config",
        CliError::Lib(e) => match e {
            Error::Parse(_) => "parse",
            Error::UnknownPreset(_) => "unknown-preset",
            Error::Domain(_) | Error::Shape(..) => "domain",
            Error::Budget { .. } => "budget",
            Error::Design(_) => "design",
        },
    }
}

fn message(e: &CliError) -> String {
    match e {
        CliError::Usage(m) | CliError::Config(m) => m.clone(),
        CliError::Lib(e) => e.to_string(),
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Ctx {
    cfg: Config,
    seed: Option<u64>,
    reps: Option<u64>,
}

impl Ctx {
    fn seed(&self) -> CliResult<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            return v.trim().parse().map_err(|_| usage(format!("{SEED_ENV} is not a 64-bit integer: {v:?}")));
        }
        Ok(self.cfg.seed.unwrap_or(0))
    }

    fn reps(&self) -> u64 {
        self.reps.or(self.cfg.reps).unwrap_or(10_000)
    }
}

fn need<T>(v: Option<T>, name: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("missing --{name}")))
}

fn pick<T>(cli: Option<T>, cfg: Option<T>) -> Option<T> {
    cli.or(cfg)
}

fn kernel_kind(k: &KernelArgs, cfg: &Config) -> CliResult<KernelKind> {
    let alpha = pick(k.alpha, cfg.alpha);
    let sym = k.sym || cfg.sym.unwrap_or(false);
    let (f3, f4) = (pick(k.f3, cfg.f3), pick(k.f4, cfg.f4));
    match (alpha, f3, f4) {
        (Some(a), None, None) => Ok(if sym { KernelKind::alpha_sym(a) } else { KernelKind::alpha(a) }),
        (None, Some(f3), Some(f4)) if !sym => Ok(KernelKind::General { f3, f4 }),
        (None, Some(_), Some(_)) => Err(usage("--sym applies to --alpha kernels only")),
        (None, None, None) => Err(usage("missing --alpha (or --f3 and --f4)")),
        _ => Err(usage("give either --alpha or both --f3 and --f4")),
    }
}

fn parse_mother(s: &str) -> CliResult<Mother> {
    Ok(s.parse::<Mother>()?)
}

fn parse_levels(cli: Option<&String>, cfg: Option<&String>) -> CliResult<QuantileDesign> {
    let s = need(cli.or(cfg), "levels")?;
    Ok(s.parse::<QuantileDesign>()?)
}

fn parse_partition(cli: Option<&String>, cfg: Option<&Vec<f64>>) -> CliResult<FixedPartition> {
    match (cli, cfg) {
        (Some(s), _) => Ok(s.parse::<FixedPartition>()?),
        (None, Some(v)) => Ok(FixedPartition::new(v.clone())?),
        (None, None) => Err(usage("missing --partition")),
    }
}

fn parse_u64_list(s: &str) -> CliResult<Vec<u64>> {
    parse_real_list(s)?
        .into_iter()
        .map(|x| {
            if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
                Ok(x as u64)
            } else {
                Err(usage(format!("not a nonnegative integer: {x}")))
            }
        })
        .collect()
}

fn parse_kernel_spec(cli: Option<&String>, cfg: Option<&String>) -> CliResult<KernelSpec> {
    let s = need(cli.or(cfg), "kernel")?;
    Ok(s.parse::<KernelSpec>()?)
}

fn rational_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Output of the `risk` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskOutput {
    #[serde(flatten)]
    pub expansion: RiskExpansion,
    pub n: Option<f64>,
    pub value: Option<ExtReal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentOutput {
    pub n: u64,
    pub ranks: Vec<u64>,
    pub powers: Vec<u32>,
    /// Exact value as "num/den".
    pub value: String,
    pub approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRiskOutput {
    pub alpha: f64,
    pub m: Vec<f64>,
    pub n: u32,
    pub outcomes: u128,
    pub risk: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutput {
    pub scheme: String,
    pub mother: String,
    pub kernel: KernelSpec,
    pub n: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub estimate: RiskEstimate,
    pub expansion: ExtReal,
}

fn load_config(path: &PathBuf) -> CliResult<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

enum Output {
    Json(serde_json::Value),
    Csv(String),
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("outputs serialize")
}

fn csv_cell(v: &serde_json::Value) -> String {
    let s = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// Flat CSV of an object or an array of objects.
fn json_to_csv(v: &serde_json::Value) -> String {
    let rows: Vec<&serde_json::Map<String, serde_json::Value>> = match v {
        serde_json::Value::Array(a) => a.iter().filter_map(|x| x.as_object()).collect(),
        serde_json::Value::Object(o) => vec![o],
        _ => return format!("{}\n", csv_cell(v)),
    };
    let Some(first) = rows.first() else { return String::new() };
    let keys: Vec<&String> = first.keys().collect();
    let mut out = keys.iter().map(|k| csv_cell(&serde_json::Value::String((*k).clone()))).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = keys.iter().map(|k| r.get(*k).map(csv_cell).unwrap_or_default()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn risk_output(exp: RiskExpansion, n: Option<f64>) -> Output {
    let value = n.map(|n| exp.value(n));
    Output::Json(to_value(&RiskOutput { expansion: exp, n, value }))
}

fn run_risk(cmd: &RiskCommand, ctx: &Ctx) -> CliResult<Output> {
    let cfg = &ctx.cfg;
    match cmd {
        RiskCommand::Fixed { kernel, p, m_stat, m_vector, mother, partition, n } => {
            let kind = kernel_kind(kernel, cfg)?;
            let n = n.or(cfg.n.map(|v| v as f64));
            let mother = mother.clone().or(cfg.mother.clone());
            let (p, m_val) = if let Some(mv) = m_vector.as_ref().map(|s| parse_real_list(s)).transpose()?.or(cfg.m_vector.clone()) {
                let m = ProbabilityVector::model_or_degenerate(mv)?;
                (m.p(), m_statistic(&m).to_f64())
            } else if let Some(mother) = mother {
                let part = parse_partition(partition.as_ref(), cfg.partition.as_ref())?;
                let m = cell_probabilities(&parse_mother(&mother)?, &part)?;
                (m.p(), m_statistic(&m).to_f64())
            } else {
                let m_val = need(pick(*m_stat, cfg.m_stat), "M")?;
                (need(pick(*p, cfg.p), "p")?, m_val)
            };
            Ok(risk_output(ed_i_for(&kind, p, m_val)?, n))
        }
        RiskCommand::Moving { kernel, levels, ranks, n } => {
            let kind = kernel_kind(kernel, cfg)?;
            let design = parse_levels(levels.as_ref(), cfg.levels.as_ref())?;
            let n = need(pick(*n, cfg.n), "n")?;
            let ranks = match ranks {
                Some(s) => parse_u64_list(s)?,
                None => need(cfg.ranks.clone(), "ranks")?,
            };
            if ranks.len() != design.p() {
                return Err(Error::Shape(ranks.len(), design.p()).into());
            }
            if ranks.iter().any(|&r| r < 1 || r > n) || ranks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Design(format!("ranks {ranks:?} invalid for n = {n}")).into());
            }
            let r = design.gaps(n, &ranks)?;
            Ok(risk_output(ed_p_for(&kind, &design.target(), &r)?, Some(n as f64)))
        }
        RiskCommand::MovingStar { kernel, levels, n, upper } => {
            let kind = kernel_kind(kernel, cfg)?;
            let design = parse_levels(levels.as_ref(), cfg.levels.as_ref())?;
            let n = pick(*n, cfg.n);
            if *upper {
                return Ok(risk_output(ed_p_star_upper(&kind, &design.target())?, n.map(|v| v as f64)));
            }
            let n = need(n, "n")?;
            design.rank_choices(n)?;
            let exp = ed_p_star(&kind, &design.target(), &design.fractional_parts(n))?;
            Ok(risk_output(exp, Some(n as f64)))
        }
    }
}

fn run_oracle(cmd: &OracleCommand, ctx: &Ctx) -> CliResult<Output> {
    let cfg = &ctx.cfg;
    match cmd {
        OracleCommand::Moments { n, ranks, powers } => {
            let n = need(pick(*n, cfg.n), "n")?;
            let ranks = match ranks {
                Some(s) => parse_u64_list(s)?,
                None => need(cfg.ranks.clone(), "ranks")?,
            };
            let powers: Vec<u32> = match powers {
                Some(s) => parse_u64_list(s)?
                    .into_iter()
                    .map(|x| u32::try_from(x).map_err(|_| usage(format!("power {x} too large"))))
                    .collect::<CliResult<_>>()?,
                None => need(cfg.powers.clone(), "powers")?,
            };
            let spec = MomentSpec::new(n, ranks.clone(), powers.clone())?;
            let v = uniform_orderstat_moment(&spec)?;
            let approx = binrisk::asymptotic::rational_to_f64(&v);
            Ok(Output::Json(to_value(&MomentOutput { n, ranks, powers, value: rational_string(&v), approx })))
        }
        OracleCommand::ExactRisk { alpha, m, n } => {
            let alpha = need(pick(*alpha, cfg.alpha), "alpha")?;
            let m = match m {
                Some(s) => parse_real_list(s)?,
                None => need(cfg.m_vector.clone(), "m")?,
            };
            let n = need(n.or(cfg.n.map(|v| v as u32)), "n")?;
            let pv = ProbabilityVector::new(m.clone())?;
            let risk = exact_fixed_risk(&DivergenceKernel::alpha(alpha), &pv, n)?;
            let outcomes = composition_count(n as u64, pv.len());
            Ok(Output::Json(to_value(&ExactRiskOutput { alpha, m, n, outcomes, risk })))
        }
    }
}

fn run_mc(cmd: &McCommand, ctx: &Ctx) -> CliResult<Output> {
    let cfg = &ctx.cfg;
    let (common, scheme, name) = match cmd {
        McCommand::Fixed { common, partition } => {
            let mother = parse_mother(need(common.mother.as_ref().or(cfg.mother.as_ref()), "mother")?)?;
            let partition = parse_partition(partition.as_ref(), cfg.partition.as_ref())?;
            (common, Scheme::Fixed { partition, mother }, "fixed")
        }
        McCommand::Moving { common, levels } => {
            let mother = parse_mother(need(common.mother.as_ref().or(cfg.mother.as_ref()), "mother")?)?;
            let design = parse_levels(levels.as_ref(), cfg.levels.as_ref())?;
            (common, Scheme::Moving { design, mother }, "moving")
        }
    };
    let kernel = parse_kernel_spec(common.kernel.as_ref(), cfg.kernel.as_ref())?;
    let n = need(common.n.or(cfg.n.map(|v| v as usize)), "n")?;
    let seed = ctx.seed()?;
    let estimate = estimate_many(&scheme, &[kernel], n, ctx.reps(), seed)?.remove(0);
    let expansion = expansion_for(&scheme, kernel, n as u64)?.value(n as f64);
    Ok(Output::Json(to_value(&McOutput {
        scheme: name.to_string(),
        mother: scheme.mother().to_string(),
        kernel,
        n,
        seed,
        estimate,
        expansion,
    })))
}

fn preset(name: Option<&String>, cfg: &Config) -> CliResult<ExperimentPreset> {
    let name = need(name.or(cfg.preset.as_ref()), "preset")?;
    Ok(ExperimentPreset::by_name(name)?)
}

fn run_curve(args: &CurveArgs, ctx: &Ctx) -> CliResult<Output> {
    let cfg = &ctx.cfg;
    let grid = match &args.n_grid {
        Some(s) => parse_u64_list(s)?,
        None => need(cfg.n_grid.clone(), "n-grid")?,
    };
    if args.figure {
        let p = preset(args.preset.as_ref(), cfg)?;
        let rows = p.figure_curve(&grid)?;
        return Ok(Output::Csv(figure_to_csv(&rows)));
    }
    let scheme_name = need(args.scheme, "scheme")?;
    let (scheme, kernel) = if args.preset.is_some() || (cfg.preset.is_some() && args.mother.is_none()) {
        let p = preset(args.preset.as_ref(), cfg)?;
        let scheme = match scheme_name {
            SchemeName::Fixed => p.fixed_scheme(),
            SchemeName::Moving => p.moving_scheme(),
        };
        (scheme, p.kernel())
    } else {
        let mother = parse_mother(need(args.mother.as_ref().or(cfg.mother.as_ref()), "mother")?)?;
        let scheme = match scheme_name {
            SchemeName::Fixed => Scheme::Fixed {
                partition: parse_partition(args.partition.as_ref(), cfg.partition.as_ref())?,
                mother,
            },
            SchemeName::Moving => Scheme::Moving { design: parse_levels(args.levels.as_ref(), cfg.levels.as_ref())?, mother },
        };
        (scheme, parse_kernel_spec(args.kernel.as_ref(), cfg.kernel.as_ref())?)
    };
    let rows = risk_curve(&scheme, kernel, &grid, ctx.reps(), ctx.seed()?)?;
    Ok(Output::Csv(curve_to_csv(&rows)))
}

fn run_presets(cmd: &PresetsCommand) -> CliResult<Output> {
    match cmd {
        PresetsCommand::List => {
            let all: Vec<PresetSummary> = ExperimentPreset::all().iter().map(|p| p.summary()).collect::<Result<_, _>>()?;
            Ok(Output::Json(to_value(&all)))
        }
        PresetsCommand::Show { name } => Ok(Output::Json(to_value(&ExperimentPreset::by_name(name)?.summary()?))),
    }
}

fn execute(cli: &Cli) -> CliResult<(Output, Option<Format>)> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };
    let cfg_format = match cfg.format.as_deref() {
        None => None,
        Some("json") => Some(Format::Json),
        Some("csv") => Some(Format::Csv),
        Some(other) => return Err(CliError::Config(format!("unknown format {other:?}"))),
    };
    let format = cli.format.or(cfg_format);
    let ctx = Ctx { cfg, seed: cli.seed, reps: cli.reps };
    let out = match &cli.command {
        Command::Risk(c) => run_risk(c, &ctx)?,
        Command::EquivN { preset: name } => Output::Json(to_value(&preset(name.as_ref(), &ctx.cfg)?.equivalent_n()?)),
        Command::Oracle(c) => run_oracle(c, &ctx)?,
        Command::Mc(c) => run_mc(c, &ctx)?,
        Command::Curve(a) => run_curve(a, &ctx)?,
        Command::Presets(c) => run_presets(c)?,
    };
    Ok((out, format))
}

fn write_error(err: &mut dyn Write, e: &CliError) -> i32 {
    let code = exit_code(e);
    let line = serde_json::json!({ "error": message(e), "kind": error_kind(e), "exit_code": code });
    let _ = writeln!(err, "{line}");
    code
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return write_error(err, &usage(first));
        }
    };
    match execute(&cli) {
        Ok((Output::Json(v), Some(Format::Csv))) => {
            let _ = write!(out, "{}", json_to_csv(&v));
            0
        }
        Ok((Output::Json(v), _)) => {
            let _ = writeln!(out, "{v}");
            0
        }
        Ok((Output::Csv(s), Some(Format::Json))) => {
            let _ = writeln!(out, "{}", csv_as_json(&s));
            0
        }
        Ok((Output::Csv(s), _)) => {
            let _ = write!(out, "{s}");
            0
        }
        Err(e) => write_error(err, &e),
    }
}

// Curves in JSON: an array of objects keyed by the CSV header.
fn csv_as_json(csv: &str) -> serde_json::Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows = lines
        .map(|l| {
            let obj: serde_json::Map<String, serde_json::Value> = header
                .iter()
                .zip(l.split(','))
                .map(|(k, v)| {
                    let val = match v.parse::<f64>() {
                        Ok(x) if x.is_finite() => serde_json::json!(x),
                        _ if v == "NaN" => serde_json::Value::Null,
                        _ => serde_json::Value::String(v.to_string()),
                    };
                    (k.to_string(), val)
                })
                .collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(rows)
}

/// Names accepted by `--preset`.
pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}
