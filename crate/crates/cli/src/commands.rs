//! Command implementations. Each writes its artifact once, at the end.

use std::fs;
use std::path::Path;

use matchwelfare::analysis::{run_suite, BoundCheck};
use matchwelfare::io::ProfileFile;
use matchwelfare::mechanism::{by_name, evaluate, EvalMode};
use matchwelfare::model::RatioReport;
use matchwelfare::n3lab::{ratio_surface, study, write_surface_csv};
use matchwelfare::{optimal_welfare, Error};
use serde_json::{json, Value};

use crate::config::{BoundsArgs, EvalArgs, ExperimentConfig, GenerateArgs, Mode, N3Args};
use crate::error::CliError;

pub const FORMAT_VERSION: &str = "matchwelfare/1";

const CSV_HEADER: &str = "name,n,lhs,rhs,holds";

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    match config {
        ExperimentConfig::Generate(a) => generate(a, config),
        ExperimentConfig::Eval(a) => eval(a, config),
        ExperimentConfig::Bounds(a) => bounds(a, config),
        ExperimentConfig::N3(a) => n3(a, config),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `payload` with the format version and config added as top-level keys.
fn json_artifact(config: &ExperimentConfig, payload: Value) -> String {
    let mut obj = match payload {
        Value::Object(m) => m,
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    obj.insert("format".into(), json!(FORMAT_VERSION));
    obj.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("artifact serializes");
    s.push('\n');
    s
}

fn csv_preamble(config: &ExperimentConfig) -> String {
    format!("# format: {FORMAT_VERSION}\n# config: {}\n", config.to_json())
}

/// Reads the config embedded in a JSON or CSV artifact.
pub fn embedded_config(text: &str) -> Result<ExperimentConfig, CliError> {
    if text.trim_start().starts_with('{') {
        let v: Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("artifact is not valid JSON: {e}")))?;
        let c = v.get("config").ok_or_else(|| CliError::Usage("artifact has no embedded config".into()))?;
        return serde_json::from_value(c.clone()).map_err(|e| CliError::Usage(format!("malformed embedded config: {e}")));
    }
    let line = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config: "))
        .ok_or_else(|| CliError::Usage("artifact has no embedded config".into()))?;
    ExperimentConfig::from_json(line)
}

fn generate(a: &GenerateArgs, config: &ExperimentConfig) -> Result<(), CliError> {
    let p = a.spec()?.generate()?;
    let violations = p.validate();
    let payload = serde_json::to_value(ProfileFile::from(&p)).expect("profile serializes");
    emit(a.out.as_deref(), &json_artifact(config, payload))?;
    eprintln!(
        "{}x{} {} profile: {}",
        p.n(),
        p.n(),
        p.normalization().as_str(),
        if violations.is_empty() { "valid".to_string() } else { format!("{} violations", violations.len()) }
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("generated profile fails validation: {:?}", violations[0])))
    }
}

fn eval(a: &EvalArgs, config: &ExperimentConfig) -> Result<(), CliError> {
    let p = matchwelfare::io::read_profile(&a.profile)?;
    p.require_valid()?;
    let mech = by_name(&a.mech)?;
    let mode = match a.mode {
        Mode::Exact => EvalMode::Exact,
        Mode::Mc => EvalMode::MonteCarlo {
            samples: a.samples,
            seed: a.seed,
        },
    };
    let result = evaluate(&mech, &p, mode)?;
    let opt = optimal_welfare(&p);
    if opt <= 0.0 {
        return Err(Error::ZeroOptimum.into());
    }
    let ratio = RatioReport {
        mech_welfare: result.expected_welfare,
        opt_welfare: opt,
        ratio: result.expected_welfare / opt,
        provenance: result.method.clone(),
    };
    eprintln!("{}: welfare {:.6}, ratio {:.6}", mech.name(), ratio.mech_welfare, ratio.ratio);
    emit(a.out.as_deref(), &json_artifact(config, json!({ "result": result, "ratio": ratio })))
}

pub fn bounds_csv_body(checks: &[BoundCheck]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for c in checks {
        s.push_str(&format!("{},{},{:.16e},{:.16e},{}\n", c.name, c.n, c.lhs, c.rhs, c.holds));
    }
    s
}

fn bounds(a: &BoundsArgs, config: &ExperimentConfig) -> Result<(), CliError> {
    let checks = run_suite(a.suite, &a.sizes.0, a.seed, a.samples)?;
    let held = checks.iter().filter(|c| c.holds).count();
    eprintln!("{}: {held}/{} checks hold", a.suite.as_str(), checks.len());
    emit(a.out.as_deref(), &(csv_preamble(config) + &bounds_csv_body(&checks)))
}

fn n3(a: &N3Args, config: &ExperimentConfig) -> Result<(), CliError> {
    let mech = by_name(a.mech.name())?;
    let result = study(&mech, a.grid, a.refine)?;
    let g = result.global();
    eprintln!("{}: global minimum {:.6} on class {} at {:?}", result.mechanism, result.global_min, g.class, g.alpha);
    let summary = json_artifact(config, json!({ "study": result }));
    match &a.out_dir {
        None => emit(None, &summary),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            for c in &result.classes {
                let rows = ratio_surface(&c.class, &mech, a.surface_grid)?;
                let mut buf = csv_preamble(config).into_bytes();
                write_surface_csv(&mut buf, &rows).expect("writing to memory");
                let path = dir.join(format!("surface-{}-{}.csv", a.mech.name(), c.class.label().replace(',', "-")));
                fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
            }
            emit(Some(&dir.join("summary.json")), &summary)?;
            emit(None, &summary)
        }
    }
}
