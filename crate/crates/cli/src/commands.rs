use std::io::Write;
use std::time::Instant;

use lpdev::mc::estimate_tail;
use lpdev::probe::{check_condition_a, check_condition_b, ConditionB, SampledRate};
use lpdev::sampling::{
    project_norm_direct, project_norm_repr, sample_ball_point, sample_standardized_sums,
    x_statistic_from_z,
};
use lpdev::serde_ext::format_f64;
use lpdev::specfun::centring_prefactor;
use lpdev::{KlsVerdict, ProjectionConfig, Rate, RateFunction, RegimeSpec, RngStream, WLaw};
use serde_json::json;

use crate::args::{
    parse_grid, ConditionName, McArgs, ProbeArgs, RateArgs, RegimeName, SampleArgs, SampleStat, Sampler,
    VerifyArgs,
};
use crate::store::{self, Payload, RateSource, RunRecord};
use crate::{config, io_err, verify, CliError, CliResult};

fn f(v: f64) -> String {
    format_f64(v)
}

/// Six significant digits; `inf`/`nan` tokens for non-finite values.
fn sig6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.5e}")
    } else {
        format_f64(v)
    }
}

pub fn sample(a: &SampleArgs, out: &mut dyn Write) -> CliResult<()> {
    let w: WLaw = a.w.parse()?;
    let cfg = ProjectionConfig::new(a.n, a.k, a.p, w)?;
    if !(a.t > 0.0 && a.t.is_finite()) {
        return Err(CliError::Usage(format!("--t must be positive, got {}", a.t)));
    }
    if a.sampler == Sampler::Direct && matches!(a.stat, SampleStat::Sums | SampleStat::Point) {
        return Err(CliError::Usage("--sampler only applies to --stat znorm and xstat".into()));
    }
    if a.sampler == Sampler::Direct && cfg.n > lpdev::sampling::DIRECT_MAX_N {
        return Err(CliError::Usage(format!(
            "direct sampler is capped at n <= {}, got n={}",
            lpdev::sampling::DIRECT_MAX_N,
            cfg.n
        )));
    }
    let prefactor = centring_prefactor(cfg.p)?;
    let mut rng = RngStream::new(a.seed, 0);
    for _ in 0..a.count {
        let line = match a.stat {
            SampleStat::Znorm | SampleStat::Xstat => {
                let z = match a.sampler {
                    Sampler::Direct => project_norm_direct(&cfg, &mut rng)?,
                    Sampler::Repr => project_norm_repr(&cfg, &mut rng),
                };
                if a.stat == SampleStat::Znorm {
                    f(z)
                } else {
                    f(x_statistic_from_z(z, prefactor, cfg.k, a.t))
                }
            }
            SampleStat::Sums => {
                let s = sample_standardized_sums(cfg.n, cfg.k, cfg.p, a.t, &mut rng)?;
                [s.xi_2, s.xi_p, s.zeta_1, s.zeta_2.unwrap_or(f64::NAN), s.zeta_3]
                    .map(f)
                    .join(",")
            }
            SampleStat::Point => sample_ball_point(&cfg, &mut rng).into_iter().map(f).collect::<Vec<_>>().join(","),
        };
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

/// Rate function of a regime name, with `p` defaulted per regime.
fn rate_function(regime: RegimeName, p: Option<f64>, lambda: f64, tol: f64) -> CliResult<(RateFunction, f64)> {
    let p = p.unwrap_or(regime.default_p());
    let spec = RegimeSpec::new(p, regime.regime(), lambda)?;
    Ok((RateFunction::with_tol(spec, tol)?, p))
}

pub fn rate(a: &RateArgs, out: &mut dyn Write) -> CliResult<()> {
    let xs = parse_grid(&a.x_grid)?;
    let (r, p) = rate_function(a.regime, a.p, a.lambda, a.tol)?;
    let mut buf = String::from("x,rate,regime,p,lambda\n");
    for x in xs {
        buf.push_str(&format!("{},{},{},{},{}\n", f(x), f(r.eval(x)), a.regime.name(), f(p), f(a.lambda)));
    }
    out.write_all(buf.as_bytes()).map_err(io_err)
}

pub fn mc(a: &McArgs, out: &mut dyn Write) -> CliResult<()> {
    let (cfg, workers) = config::resolve(a)?;
    let started = Instant::now();
    let mut estimates = Vec::with_capacity(cfg.xs.len());
    for i in 0..cfg.xs.len() {
        estimates.push(estimate_tail(&cfg.query(i), cfg.seed.wrapping_add(i as u64), workers)?);
    }
    let wall = started.elapsed().as_millis() as u64;
    let payload = Payload::TailEstimates {
        config: cfg.clone(),
        seed: cfg.seed,
        estimates,
    };
    let rec = RunRecord::new(&cfg, payload, wall, Some(workers))?;
    store::append(&a.store, &rec)?;
    let Payload::TailEstimates { estimates, .. } = &rec.payload else {
        unreachable!()
    };
    for e in estimates {
        let mut line = format!(
            "id={} x={} p_hat={} stderr={} rate={}",
            rec.id,
            f(e.query.x),
            sig6(e.p_hat),
            sig6(e.stderr),
            sig6(e.rate)
        );
        if e.budget_limited {
            line.push_str(&format!(" budget_limited rate_lower_bound={}", sig6(e.rate_lower_bound)));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

pub fn verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let checks = verify::run(a.suite, a.seed, a.quick)?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut buf = String::new();
    for c in &checks {
        buf.push_str(&format!(
            "{:<4} {:<9} {:<width$} {:>12} <= {:e}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            sig6(c.value),
            c.threshold,
        ));
    }
    let failures: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let summary = json!({
        "kind": "verify_summary",
        "suite": format!("{:?}", a.suite).to_lowercase(),
        "seed": a.seed,
        "quick": a.quick,
        "checks": checks.len(),
        "failed": failures.len(),
        "failures": failures,
        "results": checks,
    });
    buf.push_str(&summary.to_string());
    buf.push('\n');
    out.write_all(buf.as_bytes()).map_err(io_err)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("{} check(s) failed: {}", failures.len(), failures.join("; "))))
    }
}

/// Empirical rate of a stored `mc` run: rates by threshold, zero at the
/// threshold with the smallest rate.
fn sampled_rate(rec: &RunRecord) -> CliResult<SampledRate> {
    let Payload::TailEstimates { estimates, .. } = &rec.payload else {
        return Err(CliError::Usage(format!("record {} holds no tail estimates", rec.id)));
    };
    let mut pts: Vec<(f64, f64)> = estimates.iter().map(|e| (e.query.x, e.rate)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 2 {
        return Err(CliError::Usage(format!(
            "record {} has {} threshold(s); a sampled rate needs an --x-grid run with at least 2",
            rec.id,
            pts.len()
        )));
    }
    let lln = pts.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0).unwrap_or(f64::NAN);
    Ok(SampledRate {
        xs: pts.iter().map(|p| p.0).collect(),
        values: pts.iter().map(|p| p.1).collect(),
        lln,
    })
}

pub fn probe(a: &ProbeArgs, out: &mut dyn Write) -> CliResult<()> {
    let cond_b = match a.condition {
        ConditionName::B => {
            let t0 = a.t0.ok_or_else(|| CliError::Usage("--condition b needs --t0".into()))?;
            let mut c = ConditionB::new(t0);
            c.tmax = a.tmax;
            c.points = a.points;
            c.tol = a.tol.unwrap_or(c.tol);
            c.validate()?;
            Some(c)
        }
        ConditionName::A => None,
    };
    let (rate, source): (Box<dyn Rate>, RateSource) = match (a.rate, &a.rate_from_run) {
        (Some(regime), None) => {
            let (r, p) = rate_function(regime, a.p, a.lambda, 1e-10)?;
            let src = RateSource::Regime {
                regime: regime.name().into(),
                p,
                lambda: a.lambda,
            };
            (Box::new(r), src)
        }
        (None, Some(id)) => {
            let rec = store::find(&a.store, id)?;
            let src = RateSource::Run { id: rec.id.clone() };
            (Box::new(sampled_rate(&rec)?), src)
        }
        _ => return Err(CliError::Usage("give exactly one of --rate and --rate-from-run".into())),
    };
    let mut v: KlsVerdict = match cond_b {
        Some(c) => check_condition_b(rate.as_ref(), &c)?,
        None => {
            let grid = parse_grid(&a.x_grid)?;
            check_condition_a(rate.as_ref(), a.speed_class.class(), &grid, a.tol.unwrap_or(1e-6))?
        }
    };
    if a.condition == ConditionName::A && a.rate == Some(RegimeName::Subcrit) {
        v.notes.push(
            "hypothetical: the speed class is taken as declared; the subcritical statistic's true MDP speed is t^2, not sub-sqrt(k)"
                .into(),
        );
    }

    let mut buf = String::new();
    buf.push_str(&format!("verdict {}\n", v.verdict));
    buf.push_str(&format!("condition {}\n", serde_json::to_value(v.condition).unwrap_or_default().as_str().unwrap_or("?")));
    if let Some(t0) = v.t0 {
        buf.push_str(&format!("t0 {}\n", f(t0)));
    }
    if v.infimum.is_finite() || a.condition == ConditionName::B {
        buf.push_str(&format!("infimum {}\n", f(v.infimum)));
    }
    buf.push_str(&format!("closed_form {}\n", v.closed_form));
    for n in &v.notes {
        buf.push_str(&format!("note {n}\n"));
    }
    buf.push_str(if a.condition == ConditionName::B { "t,g\n" } else { "x,rate\n" });
    for (x, y) in v.grid.iter().zip(&v.values) {
        buf.push_str(&format!("{},{}\n", f(*x), f(*y)));
    }
    if a.save {
        let config = json!({ "condition": v.condition, "source": &source, "t0": v.t0, "speed_class": v.speed_class });
        let rec = RunRecord::new(&config, Payload::KlsVerdict { source, verdict: v }, 0, None)?;
        store::append(&a.store, &rec)?;
        buf.push_str(&format!("saved id={}\n", rec.id));
    }
    out.write_all(buf.as_bytes()).map_err(io_err)
}
