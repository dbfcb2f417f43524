//! `mc` configuration: an optional TOML file merged under the flags.
//!
//! ```toml
//! [projection]
//! p = 2.0
//! n = 1000
//! k = 100
//! w = "uniform"
//!
//! [query]
//! stat = "znorm"
//! x = 1.3
//! speed = "k"
//! budget = 1000000
//! seed = 7
//! ```

use std::path::Path;

use lpdev::{Estimator, ProjectionConfig, TailQuery, Tilt, WLaw};
use serde::{Deserialize, Serialize};

use crate::args::{parse_grid, DirectionName, McArgs, StatName};
use crate::{CliError, CliResult};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    projection: FileProjection,
    #[serde(default)]
    query: FileQuery,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileProjection {
    p: Option<f64>,
    n: Option<usize>,
    k: Option<usize>,
    w: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileQuery {
    stat: Option<StatName>,
    x: Option<f64>,
    x_grid: Option<String>,
    direction: Option<DirectionName>,
    center: Option<f64>,
    t: Option<f64>,
    speed: Option<SpeedValue>,
    budget: Option<u64>,
    batch: Option<u64>,
    workers: Option<usize>,
    seed: Option<u64>,
    tilt: Option<f64>,
    tilt_tail: Option<f64>,
    tilt_power: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SpeedValue {
    Number(f64),
    Name(String),
}

impl SpeedValue {
    fn into_string(self) -> String {
        match self {
            SpeedValue::Number(v) => format!("{v:?}"),
            SpeedValue::Name(s) => s,
        }
    }
}

/// Fully resolved `mc` run, as embedded in the record. The worker count is
/// left out: it does not affect results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub projection: ProjectionConfig,
    pub stat: StatName,
    pub xs: Vec<f64>,
    pub direction: DirectionName,
    pub center: f64,
    pub t: f64,
    /// Speed as given (number or keyword).
    pub speed_spec: String,
    pub speed: f64,
    pub budget: u64,
    pub batch: u64,
    pub seed: u64,
    pub tilt: Option<Tilt>,
}

impl McConfig {
    /// Query for threshold `xs[i]`.
    pub fn query(&self, i: usize) -> TailQuery {
        let mut q = TailQuery::new(self.projection, self.stat.statistic(), self.xs[i], self.speed, self.budget);
        q.direction = self.direction.direction();
        q.center = self.center;
        q.t = self.t;
        q.batch = self.batch;
        if let Some(t) = self.tilt {
            q.estimator = Estimator::Tilted(t);
        }
        q
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

/// Resolves a speed keyword or number.
pub fn resolve_speed(spec: &str, cfg: &ProjectionConfig, t: f64) -> CliResult<f64> {
    let v = match spec {
        "k" => cfg.k as f64,
        "n" => cfg.n as f64,
        "n-pow-half-p" => (cfg.n as f64).powf(cfg.p / 2.0),
        "t2" => t * t,
        "sqrt-n" => (cfg.n as f64).sqrt(),
        s => s
            .parse::<f64>()
            .map_err(|_| usage(format!("speed must be a number or one of k, n, n-pow-half-p, t2, sqrt-n; got {s:?}")))?,
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(usage(format!("speed must be positive and finite, got {v}")));
    }
    Ok(v)
}

fn default_speed(stat: StatName) -> &'static str {
    match stat {
        StatName::Znorm | StatName::ChiMean | StatName::ChiRoot => "k",
        StatName::Xstat => "t2",
        StatName::PowerMean => "n",
    }
}

/// Merges flags over the optional file and validates the result. Returns the
/// configuration and the worker count.
pub fn resolve(a: &McArgs) -> CliResult<(McConfig, usize)> {
    let file = match &a.config {
        Some(p) => load(p)?,
        None => FileConfig::default(),
    };
    let fp = file.projection;
    let fq = file.query;

    let p = a.p.or(fp.p).unwrap_or(2.0);
    let n = a.n.or(fp.n).ok_or_else(|| usage("--n is required (flag or [projection] n)"))?;
    let k = a.k.or(fp.k).ok_or_else(|| usage("--k is required (flag or [projection] k)"))?;
    let w: WLaw = a.w.clone().or(fp.w).as_deref().unwrap_or("uniform").parse()?;
    let projection = ProjectionConfig::new(n, k, p, w)?;

    let stat = a.stat.or(fq.stat).unwrap_or(StatName::Znorm);
    let xs = if a.x.is_some() {
        vec![a.x.unwrap_or_default()]
    } else if let Some(g) = &a.x_grid {
        parse_grid(g)?
    } else if let Some(x) = fq.x {
        vec![x]
    } else if let Some(g) = &fq.x_grid {
        parse_grid(g)?
    } else {
        return Err(usage("a threshold is required: --x or --x-grid"));
    };
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(usage("thresholds must be finite"));
    }
    let direction = a.direction.or(fq.direction).unwrap_or(DirectionName::Upper);
    let center = a.center.or(fq.center).unwrap_or(0.0);
    if !center.is_finite() {
        return Err(usage("--center must be finite"));
    }
    if direction != DirectionName::TwoSided && (a.center.is_some() || fq.center.is_some()) {
        return Err(usage("--center only applies to --direction two-sided"));
    }
    if direction == DirectionName::TwoSided && a.center.or(fq.center).is_none() {
        return Err(usage("--direction two-sided needs --center"));
    }
    let t = a.t.or(fq.t).unwrap_or(1.0);
    if !(t > 0.0 && t.is_finite()) {
        return Err(usage(format!("--t must be positive, got {t}")));
    }
    let speed_spec = a
        .speed
        .clone()
        .or(fq.speed.map(SpeedValue::into_string))
        .unwrap_or_else(|| default_speed(stat).to_string());
    let speed = resolve_speed(&speed_spec, &projection, t)?;
    let budget = a.budget.or(fq.budget).unwrap_or(DEFAULT_BUDGET);
    if budget == 0 {
        return Err(usage("--budget must be at least 1"));
    }
    let batch = a.batch.or(fq.batch).unwrap_or(lpdev::mc::DEFAULT_BATCH);
    if batch == 0 {
        return Err(usage("--batch must be at least 1"));
    }
    let workers = a.workers.or(fq.workers).unwrap_or(0);
    let seed = a.seed.or(fq.seed).unwrap_or(0);

    let main = a.tilt.or(fq.tilt).unwrap_or(0.0);
    let mut tilt = Tilt {
        tail: a.tilt_tail.or(fq.tilt_tail).unwrap_or(0.0),
        power: a.tilt_power.or(fq.tilt_power).unwrap_or(0.0),
        ..Default::default()
    };
    if main != 0.0 {
        match stat {
            StatName::PowerMean if tilt.power != 0.0 => {
                return Err(usage("--tilt and --tilt-power both set the power-sum tilt"));
            }
            StatName::PowerMean => tilt.power = main,
            _ => tilt.head = main,
        }
    }
    if [tilt.head, tilt.tail, tilt.power].iter().any(|v| !v.is_finite()) {
        return Err(usage("tilts must be finite"));
    }
    let tilt = (tilt != Tilt::default()).then_some(tilt);

    let cfg = McConfig {
        projection,
        stat,
        xs,
        direction,
        center,
        t,
        speed_spec,
        speed,
        budget,
        batch,
        seed,
        tilt,
    };
    for i in 0..cfg.xs.len() {
        cfg.query(i).validate()?;
    }
    Ok((cfg, workers))
}
