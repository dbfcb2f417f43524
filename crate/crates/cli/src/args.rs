use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lpdev", version, about = "Deviations of projected l_p-ball norms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw samples, one per line.
    Sample(SampleArgs),
    /// Tabulate a rate function as CSV.
    Rate(RateArgs),
    /// Estimate a tail probability and append the run to the store.
    Mc(McArgs),
    /// Run the cross-module verification suites.
    Verify(VerifyArgs),
    /// Check the KLS-disproof conditions for a rate function.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampler {
    Direct,
    Repr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleStat {
    /// `𝒵_{n,p}`.
    Znorm,
    /// `t⁻¹ 𝒳_{n,p}`.
    Xstat,
    /// `ξ_{p,2}, ξ_{p,p}, ζ₁, ζ₂, ζ₃`.
    Sums,
    /// The ball point itself.
    Point,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Mixing law: uniform, cone or gamma:ALPHA.
    #[arg(long, default_value = "uniform")]
    pub w: String,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Sampler::Repr)]
    pub sampler: Sampler,
    #[arg(long, value_enum, default_value_t = SampleStat::Znorm)]
    pub stat: SampleStat,
    /// Scale for xstat and sums.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeName {
    #[value(name = "critA")]
    CritA,
    #[value(name = "critB1")]
    CritB1,
    #[value(name = "critB1-literal")]
    CritB1Literal,
    #[value(name = "critB2")]
    CritB2,
    #[value(name = "critB3")]
    CritB3,
    #[value(name = "subcrit")]
    Subcrit,
    #[value(name = "crosspoly")]
    Crosspoly,
}

impl RegimeName {
    pub fn regime(self) -> lpdev::Regime {
        use lpdev::Regime;
        match self {
            RegimeName::CritA => Regime::CriticalA,
            RegimeName::CritB1 => Regime::CriticalB1 { literal: false },
            RegimeName::CritB1Literal => Regime::CriticalB1 { literal: true },
            RegimeName::CritB2 => Regime::CriticalB2,
            RegimeName::CritB3 => Regime::CriticalB3,
            RegimeName::Subcrit => Regime::SubcriticalMdp,
            RegimeName::Crosspoly => Regime::CrosspolytopeLdp,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeName::CritA => "critA",
            RegimeName::CritB1 => "critB1",
            RegimeName::CritB1Literal => "critB1-literal",
            RegimeName::CritB2 => "critB2",
            RegimeName::CritB3 => "critB3",
            RegimeName::Subcrit => "subcrit",
            RegimeName::Crosspoly => "crosspoly",
        }
    }

    /// Exponent used when `--p` is omitted.
    pub fn default_p(self) -> f64 {
        match self {
            RegimeName::CritA | RegimeName::Subcrit => 2.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long, value_enum)]
    pub regime: RegimeName,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Grid `min:max:steps`, endpoints included.
    #[arg(long, default_value = "0:3:31")]
    pub x_grid: String,
    /// Argument tolerance of the critB2 infimum.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatName {
    /// `k^{-1/2} 𝒵_{n,p}`.
    Znorm,
    /// `t⁻¹ 𝒳_{n,p}`.
    Xstat,
    /// `k⁻¹ Σ g²`.
    ChiMean,
    /// `(M_p(2) k⁻¹ Σ g²)^{1/2}`.
    ChiRoot,
    /// `n⁻¹ Σ |Z|^p`.
    PowerMean,
}

impl StatName {
    pub fn statistic(self) -> lpdev::Statistic {
        use lpdev::Statistic;
        match self {
            StatName::Znorm => Statistic::ZOverSqrtK,
            StatName::Xstat => Statistic::XOverT,
            StatName::ChiMean => Statistic::ChiMean,
            StatName::ChiRoot => Statistic::ChiRoot,
            StatName::PowerMean => Statistic::PowerMean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionName {
    Upper,
    Lower,
    TwoSided,
}

impl DirectionName {
    pub fn direction(self) -> lpdev::Direction {
        match self {
            DirectionName::Upper => lpdev::Direction::Upper,
            DirectionName::Lower => lpdev::Direction::Lower,
            DirectionName::TwoSided => lpdev::Direction::TwoSidedAbs,
        }
    }
}

/// Flags of `mc`; every field may also come from the `--config` file, and
/// flags win.
#[derive(Debug, Args, Default)]
pub struct McArgs {
    /// TOML file with `[projection]` and `[query]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "LPDEV_STORE", default_value = "./runs.ndjson")]
    pub store: PathBuf,
    #[arg(long, value_enum)]
    pub stat: Option<StatName>,
    #[arg(long)]
    pub x: Option<f64>,
    /// Several thresholds, `min:max:steps`.
    #[arg(long, conflicts_with = "x")]
    pub x_grid: Option<String>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionName>,
    /// Centre of two-sided events.
    #[arg(long)]
    pub center: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// A number, or one of k, n-pow-half-p, t2, sqrt-n.
    #[arg(long)]
    pub speed: Option<String>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub batch: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tilt of the statistic's main component.
    #[arg(long)]
    pub tilt: Option<f64>,
    /// Tilt of the remaining chi-square sum of the projected norm.
    #[arg(long)]
    pub tilt_tail: Option<f64>,
    /// Tilt of the power sum.
    #[arg(long)]
    pub tilt_power: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Mixing law: uniform, cone or gamma:ALPHA.
    #[arg(long)]
    pub w: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Moments,
    Samplers,
    Alpha,
    B2,
    Legendre,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reduced sample sizes with loosened thresholds.
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionName {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeedClassName {
    SubSqrtK,
    SqrtK,
    SuperSqrtK,
}

impl SpeedClassName {
    pub fn class(self) -> lpdev::SpeedClass {
        match self {
            SpeedClassName::SubSqrtK => lpdev::SpeedClass::SubSqrtK,
            SpeedClassName::SqrtK => lpdev::SpeedClass::SqrtK,
            SpeedClassName::SuperSqrtK => lpdev::SpeedClass::SuperSqrtK,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    pub condition: ConditionName,
    #[arg(long, value_enum, conflicts_with = "rate_from_run")]
    pub rate: Option<RegimeName>,
    /// Use the empirical rates of a stored `mc` run.
    #[arg(long)]
    pub rate_from_run: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long, default_value_t = 1e8)]
    pub tmax: f64,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    /// Defaults to 1e-6 for condition a and 1e-3 for condition b.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Declared growth of the speed relative to sqrt(k).
    #[arg(long, value_enum, default_value_t = SpeedClassName::SubSqrtK)]
    pub speed_class: SpeedClassName,
    /// Argument grid for condition a, `min:max:steps`.
    #[arg(long, default_value = "-3:6:91")]
    pub x_grid: String,
    #[arg(long, env = "LPDEV_STORE", default_value = "./runs.ndjson")]
    pub store: PathBuf,
    /// Also append the verdict to the store.
    #[arg(long)]
    pub save: bool,
}

/// Parses `min:max:steps` into `steps` equispaced points, endpoints included.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("grid must be min:max:steps, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !lo.is_finite() || !hi.is_finite() || (steps > 1 && !(hi >= lo)) {
        return Err(bad());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            }
        })
        .collect())
}
