//! Experiment dispatch and result persistence.

use std::fs;
use std::path::{Path, PathBuf};

use abstraction_core::abstractability::abstractability_score;
use abstraction_core::bridge::{
    hardest_query_check, info_decomposition_check, infomax_bruteforce_check, mutual_information_between,
};
use abstraction_core::dynamics::{dynamical_loss, learn_abstract_dynamics, ExpectationEncoder};
use abstraction_core::eval::LOSS_CSV_HEADER;
use abstraction_core::learn::{learn_targets, trace_csv};
use abstraction_core::{queryset_loss, solve_maxent};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, Kind, Plan, Prepared};
use crate::error::{exit, CliError, CliResult};
use crate::manifest::{FileDigest, RunManifest};
use crate::verify::{verify_suite, Fault, Profile};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ABSTRACTION_OUT";
pub const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub kind: Kind,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Verify only; overrides the config's profile.
    pub profile: Option<String>,
    pub fault: Option<Fault>,
    /// Root used when neither `--out` nor the config names a directory.
    pub out_root: Option<PathBuf>,
    /// Echo per-check verify lines to stdout.
    pub echo: bool,
}

impl RunRequest {
    pub fn new(kind: Kind) -> Self {
        RunRequest {
            kind,
            config: None,
            out: None,
            seed: None,
            profile: None,
            fault: None,
            out_root: None,
            echo: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub out_dir: PathBuf,
    /// File names written into `out_dir`.
    pub files: Vec<String>,
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

/// Results of a dispatched run, before they touch the disk.
struct Artifacts {
    report: Value,
    csv: Vec<(&'static str, String)>,
    passed: bool,
    summary: String,
}

struct Writer {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl Writer {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(FileDigest {
            path: name.into(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }
}

fn resolve_out(req: &RunRequest, from_config: Option<&Path>, hash: &str) -> PathBuf {
    if let Some(o) = &req.out {
        return o.clone();
    }
    if let Some(o) = from_config {
        return o.to_path_buf();
    }
    let root = req
        .out_root
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
    root.join(format!("{}-{}", req.kind, &hash[..12]))
}

fn write_error_only(dir: &Path, err: &CliError) -> Vec<String> {
    let mut w = match Writer::new(dir) {
        Ok(w) => w,
        Err(_) => return Vec::new(),
    };
    match w.write("error.json", &to_json(&err.report())) {
        Ok(()) => vec!["error.json".into()],
        Err(_) => Vec::new(),
    }
}

/// Parses, validates, dispatches and persists one experiment.
///
/// A config that fails validation leaves only `error.json` behind. Module
/// errors produce `error.json` plus a manifest.
pub fn run_experiment(req: &RunRequest) -> RunOutcome {
    let (bytes, base) = match &req.config {
        Some(p) => match fs::read(p) {
            Ok(b) => (b, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            Err(e) => {
                let err = CliError::io(p, e);
                let dir = resolve_out(req, None, &sha256_hex(b""));
                let files = write_error_only(&dir, &err);
                return RunOutcome {
                    exit_code: err.exit_code(),
                    out_dir: dir,
                    files,
                    error: Some(err.to_string()),
                };
            }
        },
        None if req.kind == Kind::Verify => (format!("{{\"kind\":\"{}\"}}", req.kind).into_bytes(), PathBuf::new()),
        None => {
            let err = CliError::config(format!("--config is required for `{}`", req.kind));
            let dir = resolve_out(req, None, &sha256_hex(b""));
            let files = write_error_only(&dir, &err);
            return RunOutcome {
                exit_code: err.exit_code(),
                out_dir: dir,
                files,
                error: Some(err.to_string()),
            };
        }
    };
    let hash = sha256_hex(&bytes);
    let parsed = parse_config(&bytes);
    let out_dir = resolve_out(req, parsed.as_ref().ok().and_then(|c| c.out.as_deref()), &hash);
    let prepared = parsed.and_then(|c| c.prepare(req.kind, req.seed, &base));
    let prepared = match prepared {
        Ok(p) => p,
        Err(err) => {
            let files = write_error_only(&out_dir, &err);
            return RunOutcome {
                exit_code: err.exit_code(),
                out_dir,
                files,
                error: Some(err.to_string()),
            };
        }
    };

    let mut inputs = Vec::new();
    if let Some(p) = &req.config {
        inputs.push(FileDigest {
            path: p.display().to_string(),
            sha256: hash.clone(),
        });
    }
    for p in &prepared.extra_inputs {
        if let Ok(b) = fs::read(p) {
            inputs.push(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&b),
            });
        }
    }

    let outcome = execute(&prepared, req);
    let persisted = persist(&out_dir, &prepared, &hash, inputs, outcome);
    match persisted {
        Ok((code, files, error)) => RunOutcome {
            exit_code: code,
            out_dir,
            files,
            error,
        },
        Err(err) => RunOutcome {
            exit_code: err.exit_code(),
            out_dir,
            files: Vec::new(),
            error: Some(err.to_string()),
        },
    }
}

fn persist(
    dir: &Path,
    prepared: &Prepared,
    hash: &str,
    inputs: Vec<FileDigest>,
    outcome: CliResult<Artifacts>,
) -> CliResult<(u8, Vec<String>, Option<String>)> {
    let mut w = Writer::new(dir)?;
    let (code, passed, summary, error) = match outcome {
        Ok(a) => {
            let report = json!({
                "kind": prepared.kind,
                "seed": prepared.seed,
                "config_sha256": hash,
                "passed": a.passed,
                "result": a.report,
            });
            w.write("report.json", &to_json(&report))?;
            for (name, body) in &a.csv {
                w.write(name, body)?;
            }
            let code = if a.passed { exit::OK } else { exit::VERIFY_FAILED };
            (code, a.passed, a.summary, None)
        }
        Err(err) => {
            w.write("error.json", &to_json(&err.report()))?;
            (err.exit_code(), false, err.to_string(), Some(err.to_string()))
        }
    };
    let manifest = RunManifest::new(prepared, hash, inputs, w.written.clone(), passed, summary, code);
    w.write(RunManifest::FILE, &to_json(&manifest))?;
    Ok((code, w.written.iter().map(|f| f.path.clone()).collect(), error))
}

fn execute(p: &Prepared, req: &RunRequest) -> CliResult<Artifacts> {
    let opts = &p.solver;
    let div = p.divergence;
    let done = |report: Value, csv: Vec<(&'static str, String)>, summary: String| {
        Ok(Artifacts {
            report,
            csv,
            passed: true,
            summary,
        })
    };
    match &p.plan {
        Plan::Solve { space, constraints } => {
            let sol = solve_maxent(space, constraints, opts)?;
            let mut csv = String::from("state,probability\n");
            for (s, w) in space.states().iter().zip(sol.distribution.weights()) {
                csv.push_str(&format!("{s},{w:.16e}\n"));
            }
            let summary = format!("max residual {:e}", sol.max_residual());
            done(
                json!({ "states": space.states(), "solution": sol }),
                vec![("distribution.csv", csv)],
                summary,
            )
        }
        Plan::Eval {
            system,
            model,
            queryset,
            ..
        } => {
            let rep = queryset_loss(system, model, queryset, div, opts)?;
            let mut csv = format!("{LOSS_CSV_HEADER}\n");
            for row in rep.csv_rows("system", "abstraction") {
                csv.push_str(&row);
                csv.push('\n');
            }
            let summary = format!("total loss {:e}", rep.total);
            done(
                json!({ "model": model, "loss": rep }),
                vec![("losses.csv", csv)],
                summary,
            )
        }
        Plan::Learn {
            system,
            features,
            queryset,
            ..
        } => {
            let fit = learn_targets(system, features, queryset, div, &p.learner, opts)?;
            let summary = format!("loss {:e} after {} iterations", fit.loss, fit.trace.len().saturating_sub(1));
            done(json!({ "fit": fit }), vec![("trace.csv", trace_csv(&fit.trace))], summary)
        }
        Plan::Dynamics {
            system,
            horizon,
            features,
            queryset,
        } => {
            let enc = ExpectationEncoder {
                features: features.clone(),
            };
            let fit = learn_abstract_dynamics(system, *horizon, &enc, features, queryset, div, &p.learner, opts)?;
            let rollout = fit.dynamics.rollout(*horizon);
            let path = dynamical_loss(&fit.trajectory, &rollout, features, queryset, div, opts)?;
            let mut abs_csv = String::from("t,feature,value\n");
            for (t, a) in rollout.iter().enumerate() {
                for (f, v) in features.iter().zip(a) {
                    abs_csv.push_str(&format!("{t},{},{v:.16e}\n", f.name));
                }
            }
            let summary = format!("contrastive loss {:e}, path loss {:e}", fit.loss, path.total);
            done(
                json!({ "fit": fit, "abstract_rollout": rollout, "path_loss": path }),
                vec![
                    ("system_trajectory.csv", fit.trajectory.to_csv(&system.space)),
                    ("abstract_trajectory.csv", abs_csv),
                    ("path_loss.csv", path.to_csv()),
                    ("trace.csv", trace_csv(&fit.trace)),
                ],
                summary,
            )
        }
        Plan::Abstractability {
            target,
            max_components,
            eps,
        } => {
            let rep = abstractability_score(target, *max_components, *eps, &p.learner)?;
            let fitted = rep.mixture.grid_masses(target.coordinates());
            let mut csv = String::from("x,target,mixture\n");
            for ((x, t), m) in target.coordinates().iter().zip(target.weights.weights()).zip(&fitted) {
                csv.push_str(&format!("{x:.16e},{t:.16e},{m:.16e}\n"));
            }
            let summary = format!("abstractability {:.6} nats (bound {:.6})", rep.score, rep.entropy_bound);
            done(json!({ "report": rep }), vec![("density.csv", csv)], summary)
        }
        Plan::Mi {
            joint,
            system,
            infomax_alphabet,
            hardest,
        } => {
            let mut report = serde_json::Map::new();
            let mut csv = Vec::new();
            let mut passed = true;
            let mut parts = Vec::new();
            if let Some((j, a, b)) = joint {
                let mi = mutual_information_between(j, a, b)?;
                report.insert("mutual_information".into(), json!({ "a_axes": a, "b_axes": b, "value": mi }));
                parts.push(format!("I = {mi:.6}"));
                if j.shape().len() == 3 {
                    let d = info_decomposition_check(j)?;
                    passed &= d.holds();
                    report.insert("decomposition".into(), json!({ "holds": d.holds(), "terms": d }));
                }
            }
            if let (Some(sys), Some(k)) = (system, infomax_alphabet) {
                let r = infomax_bruteforce_check(sys, *k)?;
                passed &= r.equal;
                let mut rows = String::from("encoder,loss,information\n");
                for e in &r.encoders {
                    let code: Vec<String> = e.encoder.iter().map(usize::to_string).collect();
                    rows.push_str(&format!("{},{:.16e},{:.16e}\n", code.join(" "), e.loss, e.information));
                }
                csv.push(("encoders.csv", rows));
                parts.push(format!("infomax sets equal: {}", r.equal));
                report.insert("infomax".into(), serde_json::to_value(&r).expect("serializable"));
            }
            if let (Some(sys), Some(qs)) = (system, hardest) {
                let r = hardest_query_check(sys, qs)?;
                passed &= r.all_hold;
                parts.push(format!("hardest-query inequality holds: {}", r.all_hold));
                report.insert("hardest_query".into(), serde_json::to_value(&r).expect("serializable"));
            }
            Ok(Artifacts {
                report: Value::Object(report),
                csv,
                passed,
                summary: parts.join("; "),
            })
        }
        Plan::Verify { profile } => {
            let name = req.profile.as_deref().unwrap_or(profile);
            let profile = Profile::parse(name)?;
            let echo = req.echo;
            let rep = verify_suite(profile, req.fault, |c| {
                if echo {
                    println!("{}", c.summary_line());
                }
            });
            let summary = format!("{} of {} checks passed", rep.passed, rep.total);
            if echo {
                println!("verify: {summary}");
            }
            Ok(Artifacts {
                report: serde_json::to_value(&rep).expect("serializable"),
                csv: vec![("verify.csv", rep.to_csv())],
                passed: rep.all_passed,
                summary,
            })
        }
    }
}
