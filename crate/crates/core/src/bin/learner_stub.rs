//! Reference trainer for the line-delimited learner protocol.
//!
//! Modes:
//!   synthetic K [ETA] [INIT_P]   gated synthetic learner over K tasks
//!   fixed BEFORE AFTER           constant losses
//! Fault injection (after the mode): --omit FIELD, --hang-on CMD,
//! --exit-on CMD, --garbage-on CMD, --version N

use std::io::{self, BufRead, Write};

use curriculum::learner::{Learner, SyntheticLearner, SyntheticLearnerConfig};
use serde_json::{json, Value};

enum Model {
    Synthetic(SyntheticLearner),
    Fixed(f64, f64),
}

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn flag<'a>(args: &'a [String], name: &str) -> Option<&'a str> {
    args.iter().position(|a| a == name).and_then(|i| args.get(i + 1)).map(String::as_str)
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut model = match args.first().map(String::as_str) {
        Some("fixed") => Model::Fixed(arg(&args, 1, 1.0), arg(&args, 2, 0.5)),
        _ => {
            let cfg = SyntheticLearnerConfig {
                eta: arg(&args, 2, 0.2),
                init_p: arg(&args, 3, 0.05),
                ..Default::default()
            };
            Model::Synthetic(SyntheticLearner::new(arg(&args, 1, 5), &cfg).expect("valid learner"))
        }
    };
    let omit = flag(&args, "--omit");
    let hang_on = flag(&args, "--hang-on");
    let exit_on = flag(&args, "--exit-on");
    let garbage_on = flag(&args, "--garbage-on");
    let version: u64 = flag(&args, "--version").and_then(|v| v.parse().ok()).unwrap_or(1);

    let stdin = io::stdin();
    let mut stdout = io::stdout();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let req: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                let _ = writeln!(stdout, "{}", json!({ "error": e.to_string() }));
                continue;
            }
        };
        let cmd = req["cmd"].as_str().unwrap_or_default().to_owned();
        if hang_on == Some(cmd.as_str()) {
            std::thread::sleep(std::time::Duration::from_secs(3600));
        }
        if exit_on == Some(cmd.as_str()) {
            std::process::exit(7);
        }
        if garbage_on == Some(cmd.as_str()) {
            let _ = writeln!(stdout, "not json");
            let _ = stdout.flush();
            continue;
        }
        let task = req["task"].as_u64().unwrap_or(0) as usize;
        let mut resp = match (cmd.as_str(), &mut model) {
            ("hello", _) => json!({ "version": version }),
            ("shutdown", _) => std::process::exit(0),
            ("train", Model::Fixed(b, a)) => json!({ "loss_before": *b, "loss_after": *a }),
            ("eval" | "validate", Model::Fixed(_, a)) => json!({ "loss": *a }),
            ("train", Model::Synthetic(l)) => match l.train(task, &[]) {
                Ok(r) => json!({ "loss_before": r.loss_before, "loss_after": r.loss_after }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            ("eval", Model::Synthetic(l)) => match l.eval(task, &[]) {
                Ok(loss) => json!({ "loss": loss }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            ("validate", Model::Synthetic(l)) => json!({ "loss": l.validation_loss().unwrap_or(f64::NAN) }),
            _ => json!({ "error": format!("unknown command `{cmd}`") }),
        };
        if let (Some(field), Some(obj)) = (omit, resp.as_object_mut()) {
            obj.remove(field);
        }
        let _ = writeln!(stdout, "{resp}");
        let _ = stdout.flush();
    }
}
