//! Subcommand implementations.

use std::fs;
use std::path::Path;

use ecomp::dispersion;
use ecomp::ecom::{DistSpec, EComPoisson};
use ecomp::extended::{ExtendedDist, ExtendedSpec};
use ecomp::gamma::{BernsteinGammaEvaluator, GammaMode};
use ecomp::phi::catalog;
use ecomp::queue::{self, QueueScenario, SimResult};
use ecomp::{Error, PhiFunction};
use serde_json::{json, Value};

use crate::args::{Command, DistArgs, ScenarioArgs};
use crate::render::{Cell, Rendered};

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub code: i32,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse(_) => 2,
            _ => 1,
        };
        CliError {
            kind: e.kind().to_string(),
            message: e.to_string(),
            code,
        }
    }
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage".into(),
            message: message.into(),
            code: 2,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError {
        kind: "io".into(),
        message: format!("cannot read {}: {e}", path.display()),
        code: 2,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("value serializes")
}

enum Dist {
    Ecom(EComPoisson),
    Extended(ExtendedDist),
}

impl Dist {
    fn spec_value(&self) -> Value {
        match self {
            Dist::Ecom(d) => to_value(&d.spec()),
            Dist::Extended(d) => to_value(&d.spec()),
        }
    }
}

fn parse_phi(id: &str) -> CliResult<PhiFunction> {
    Ok(id.parse::<PhiFunction>()?)
}

fn resolve_dist(a: &DistArgs) -> CliResult<Dist> {
    if let Some(path) = &a.spec {
        let text = read_file(path)?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let generalized = ["alpha", "beta", "gamma"]
            .iter()
            .any(|k| value.get(k).is_some());
        return Ok(if generalized {
            Dist::Extended(ExtendedDist::from_spec(&ExtendedSpec::from_json(&text)?)?)
        } else {
            Dist::Ecom(EComPoisson::from_spec(&DistSpec::from_json(&text)?)?)
        });
    }
    let phi = parse_phi(
        a.phi
            .as_deref()
            .ok_or_else(|| CliError::usage("missing --phi (or --spec)"))?,
    )?;
    let rho = a
        .rho
        .ok_or_else(|| CliError::usage("missing --rho (or --spec)"))?;
    let tol = a.tol.unwrap_or_else(ecomp::ecom::default_tol);
    if a.alpha.is_some() || a.beta.is_some() || a.gamma.is_some() {
        if a.lambda_cap.is_some() {
            return Err(CliError::usage(
                "--lambda-cap does not apply to the generalized family",
            ));
        }
        let spec = ExtendedSpec {
            phi,
            rho,
            alpha: a.alpha.unwrap_or(1.0),
            beta: a.beta.unwrap_or(1.0),
            gamma: a.gamma.unwrap_or(1.0),
            tol,
        };
        return Ok(Dist::Extended(ExtendedDist::from_spec(&spec)?));
    }
    let spec = DistSpec {
        phi,
        rho,
        lambda_cap: a.lambda_cap.unwrap_or(f64::INFINITY),
        tol,
    };
    Ok(Dist::Ecom(EComPoisson::from_spec(&spec)?))
}

fn resolve_scenario(a: &ScenarioArgs) -> CliResult<QueueScenario> {
    let sc = if let Some(path) = &a.spec {
        QueueScenario::from_json(&read_file(path)?)?
    } else {
        let phi = parse_phi(
            a.phi
                .as_deref()
                .ok_or_else(|| CliError::usage("missing --phi (or --spec)"))?,
        )?;
        let lambda = a
            .lambda
            .ok_or_else(|| CliError::usage("missing --lambda (or --spec)"))?;
        let horizon = a
            .horizon
            .ok_or_else(|| CliError::usage("missing --horizon (or --spec)"))?;
        QueueScenario {
            phi,
            lambda,
            mu: a.mu.unwrap_or(1.0),
            lambda_cap: a.lambda_cap.unwrap_or(f64::INFINITY),
            horizon,
            burn_in: a.burn_in,
            seed: a.seed.unwrap_or(0),
        }
    };
    sc.validate()?;
    Ok(sc)
}

pub fn run(cmd: &Command) -> CliResult<Rendered> {
    match cmd {
        Command::Pmf { dist, n } => pmf(&resolve_dist(dist)?, n.clone()),
        Command::Moments { dist, orders } => moments(&resolve_dist(dist)?, orders),
        Command::Dispersion { dist, n_max } => dispersion_cmd(&resolve_dist(dist)?, *n_max),
        Command::Gamma { phi, x, integer } => gamma(&parse_phi(phi)?, x, *integer),
        Command::Sample { dist, count, seed } => match resolve_dist(dist)? {
            Dist::Ecom(d) => sample(&d, *count, *seed),
            Dist::Extended(_) => Err(CliError::usage(
                "sampling is available for the eCOM-Poisson law only",
            )),
        },
        Command::Simulate {
            scenario,
            replicates,
        } => simulate(&resolve_scenario(scenario)?, *replicates),
        Command::Catalog => Ok(catalog_listing()),
    }
}

fn pmf(d: &Dist, range: std::ops::RangeInclusive<usize>) -> CliResult<Rendered> {
    let mut doc_rows = Vec::new();
    let mut rows = Vec::new();
    let mut running = 0.0;
    let start = *range.start();
    if let Dist::Extended(e) = d {
        for k in 0..start {
            running += e.pmf(k)?;
        }
    }
    for n in range {
        let (p, c) = match d {
            Dist::Ecom(e) => (e.pmf(n)?, e.cdf(n)?),
            Dist::Extended(e) => {
                let p = e.pmf(n)?;
                running += p;
                (p, running)
            }
        };
        doc_rows.push(json!({ "n": n, "pmf": p, "cdf": c }));
        rows.push(vec![Cell::from(n), p.into(), c.into()]);
    }
    Ok(Rendered {
        doc: json!({ "spec": d.spec_value(), "rows": doc_rows }),
        headers: vec!["n", "pmf", "cdf"],
        rows,
    })
}

fn moments(d: &Dist, orders: &[usize]) -> CliResult<Rendered> {
    let mut doc_rows = Vec::new();
    let mut rows = Vec::new();
    for &s in orders {
        let (m, f) = match d {
            Dist::Ecom(e) => (e.moment(s)?, e.factorial_moment(s)?),
            Dist::Extended(e) => (e.moment(s)?, e.factorial_moment(s)?),
        };
        doc_rows.push(json!({ "order": s, "moment": m, "factorial_moment": f }));
        rows.push(vec![Cell::from(s), m.into(), f.into()]);
    }
    Ok(Rendered {
        doc: json!({ "spec": d.spec_value(), "rows": doc_rows }),
        headers: vec!["order", "moment", "factorial_moment"],
        rows,
    })
}

fn dispersion_cmd(d: &Dist, n_max: usize) -> CliResult<Rendered> {
    let kv = |k: &str, v: Cell| vec![Cell::from(k), v];
    match d {
        Dist::Ecom(e) => {
            let r = dispersion::report(e, n_max)?;
            let rows = vec![
                kv("classification", r.classification.to_string().into()),
                kv(
                    "method",
                    to_value(&r.method).as_str().unwrap_or_default().into(),
                ),
                kv("numeric_index", r.numeric_index.into()),
                kv("by_d", r.by_d.classification.to_string().into()),
                kv("by_flags", r.by_flags.classification.to_string().into()),
                kv(
                    "by_derivative",
                    r.by_derivative
                        .as_ref()
                        .map_or("n/a".to_string(), |x| x.classification.to_string())
                        .into(),
                ),
            ];
            let mut doc = to_value(&r);
            doc["spec"] = d.spec_value();
            Ok(Rendered {
                doc,
                headers: vec!["key", "value"],
                rows,
            })
        }
        Dist::Extended(x) => {
            let m = x.moment_dispersion_test()?;
            let p = x.psi_dispersion_test()?;
            let t = x.turan_check()?;
            let mean = x.moment(1)?;
            let index = (x.moment(2)? - mean * mean) / mean;
            let rows = vec![
                kv("classification", m.classification.to_string().into()),
                kv("numeric_index", index.into()),
                kv("relative_difference", m.relative_difference.into()),
                kv("psi_test", p.classification.to_string().into()),
                kv(
                    "psi_test_alpha_squared",
                    p.classification_alpha_squared.to_string().into(),
                ),
                kv("turan_printed", t.printed.into()),
                kv("turan_alternative", t.alternative.into()),
            ];
            Ok(Rendered {
                doc: json!({
                    "spec": d.spec_value(),
                    "classification": m.classification,
                    "numeric_index": index,
                    "moment_test": m,
                    "psi_test": p,
                    "turan": t,
                }),
                headers: vec!["key", "value"],
                rows,
            })
        }
    }
}

fn gamma(phi: &PhiFunction, xs: &[f64], integer: bool) -> CliResult<Rendered> {
    let mut doc_rows = Vec::new();
    let mut rows = Vec::new();
    if integer {
        let ev = BernsteinGammaEvaluator::integer(phi.clone());
        for &x in xs {
            if !(x >= 1.0 && x.fract() == 0.0) {
                return Err(
                    Error::Domain(format!("--integer needs positive integers, got {x}")).into(),
                );
            }
            let ln_w = ev.ln_w_integer(x as u64)?;
            doc_rows.push(json!({ "x": x, "w": ln_w.exp(), "ln_w": ln_w }));
            rows.push(vec![Cell::from(x), ln_w.exp().into(), ln_w.into()]);
        }
        return Ok(Rendered {
            doc: json!({ "phi": phi.id(), "mode": GammaMode::IntegerProduct, "rows": doc_rows }),
            headers: vec!["x", "w", "ln_w"],
            rows,
        });
    }
    let ev = BernsteinGammaEvaluator::new(phi.clone())?;
    for &x in xs {
        let ln_w = ev.ln_w_real(x)?;
        let psi = ev.psi(x)?;
        doc_rows.push(json!({ "x": x, "w": ln_w.exp(), "ln_w": ln_w, "psi": psi }));
        rows.push(vec![
            Cell::from(x),
            ln_w.exp().into(),
            ln_w.into(),
            psi.into(),
        ]);
    }
    Ok(Rendered {
        doc: json!({ "phi": phi.id(), "mode": GammaMode::RealLimit, "rows": doc_rows }),
        headers: vec!["x", "w", "ln_w", "psi"],
        rows,
    })
}

fn sample(d: &EComPoisson, count: usize, seed: u64) -> CliResult<Rendered> {
    let mut rng = queue::replicate_rng(seed, 0);
    let xs = d.sample(&mut rng, count)?;
    Ok(Rendered {
        doc: json!({ "spec": to_value(&d.spec()), "seed": seed, "count": count, "samples": xs }),
        headers: vec!["sample"],
        rows: xs.iter().map(|&x| vec![Cell::from(x)]).collect(),
    })
}

fn simulate(sc: &QueueScenario, replicates: usize) -> CliResult<Rendered> {
    if replicates == 0 {
        return Err(CliError::usage("--replicates must be at least 1"));
    }
    let runs = queue::simulate_replicates(sc, replicates)?;
    let merged = SimResult::merge(&runs)?;
    let d = sc.distribution()?;
    let cmp = queue::compare_to_theory(&merged, &d)?;
    let residual = queue::detailed_balance_residual(sc, &d, 50)?;
    let mut rows = Vec::new();
    for (n, &f) in merged.histogram.iter().enumerate() {
        rows.push(vec![Cell::from(n), f.into(), d.pmf(n)?.into()]);
    }
    Ok(Rendered {
        doc: json!({
            "scenario": to_value(sc),
            "replicates": replicates,
            "result": to_value(&merged),
            "comparison": to_value(&cmp),
            "detailed_balance_residual": residual,
        }),
        headers: vec!["state", "fraction", "pmf"],
        rows,
    })
}

fn catalog_listing() -> Rendered {
    let list = catalog::listing();
    let rows = list
        .iter()
        .map(|e| {
            vec![
                Cell::from(e.id.clone()),
                Cell::from(e.kind),
                Cell::from(e.flags.join("|")),
                Cell::from(e.domain_sup.clone()),
                Cell::from(e.limit.clone()),
                Cell::from(e.default_rho),
            ]
        })
        .collect();
    Rendered {
        doc: to_value(&list),
        headers: vec!["id", "kind", "flags", "domain_sup", "limit", "default_rho"],
        rows,
    }
}
