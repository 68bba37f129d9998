//! Batch front-end: parses experiment configs, dispatches solver and
//! diagnostic presets, and emits reports, CSV series and field dumps.
//!
//! Verbs: simulate, contraction, holder, energy-audit, sobolev, validate.
//! Flags: --config PATH (repeatable), --out DIR, --jobs K.
//! KELSIM_MAX_MEM (bytes, with optional K/M/G suffix) overrides the
//! snapshot memory guard.
//!
//! Exit codes: 0 completed; 2 config or usage error; 3 blow-up termination
//! (partial outputs kept); 4 boundary contact (partial outputs kept);
//! 1 validation failure.

mod commands;
mod config;

use commands::{EXIT_CONFIG, EXIT_OK};
use config::ExperimentConfig;
use std::path::{Path, PathBuf};

struct Args {
    verb: String,
    configs: Vec<PathBuf>,
    out: PathBuf,
    jobs: usize,
}

fn usage() -> String {
    "usage: kelsim <simulate|contraction|holder|energy-audit|sobolev|validate> \
     [--config PATH]... [--out DIR] [--jobs K]"
        .to_string()
}

fn parse_args(argv: &[String]) -> Result<Args, String> {
    if argv.is_empty() {
        return Err(usage());
    }
    let verb = argv[0].clone();
    let known = [
        "simulate",
        "contraction",
        "holder",
        "energy-audit",
        "sobolev",
        "validate",
    ];
    if !known.contains(&verb.as_str()) {
        return Err(format!("unknown verb '{verb}'\n{}", usage()));
    }
    let mut configs = Vec::new();
    let mut out = PathBuf::from("kelsim-out");
    let mut jobs = 1usize;
    let mut i = 1;
    while i < argv.len() {
        match argv[i].as_str() {
            "--config" => {
                i += 1;
                let path = argv.get(i).ok_or("--config needs a path")?;
                configs.push(PathBuf::from(path));
            }
            "--out" => {
                i += 1;
                out = PathBuf::from(argv.get(i).ok_or("--out needs a directory")?);
            }
            "--jobs" => {
                i += 1;
                jobs = argv
                    .get(i)
                    .ok_or("--jobs needs a count")?
                    .parse()
                    .map_err(|_| "--jobs needs a positive integer".to_string())?;
                if jobs == 0 {
                    return Err("--jobs needs a positive integer".into());
                }
            }
            other => return Err(format!("unknown flag '{other}'\n{}", usage())),
        }
        i += 1;
    }
    if verb != "validate" && configs.is_empty() {
        return Err(format!("verb '{verb}' needs at least one --config\n{}", usage()));
    }
    Ok(Args {
        verb,
        configs,
        out,
        jobs,
    })
}

/// KELSIM_MAX_MEM: integer bytes, optionally suffixed K, M or G.
fn memory_budget_from_env() -> Result<Option<u64>, String> {
    let Ok(raw) = std::env::var("KELSIM_MAX_MEM") else {
        return Ok(None);
    };
    let raw = raw.trim();
    let (digits, mult) = match raw.chars().last() {
        Some('K') | Some('k') => (&raw[..raw.len() - 1], 1u64 << 10),
        Some('M') | Some('m') => (&raw[..raw.len() - 1], 1u64 << 20),
        Some('G') | Some('g') => (&raw[..raw.len() - 1], 1u64 << 30),
        _ => (raw, 1),
    };
    digits
        .parse::<u64>()
        .map(|v| Some(v * mult))
        .map_err(|_| format!("KELSIM_MAX_MEM is not a byte count: '{raw}'"))
}

fn dispatch(verb: &str, cfg_path: &Path, out_dir: &Path, budget: Option<u64>) -> i32 {
    let cfg = match ExperimentConfig::load(cfg_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("kelsim: {}: {e}", cfg_path.display());
            return EXIT_CONFIG;
        }
    };
    let result = match verb {
        "simulate" => commands::cmd_simulate(&cfg, out_dir, budget),
        "contraction" => commands::cmd_contraction(&cfg, out_dir),
        "holder" => commands::cmd_holder(&cfg, out_dir),
        "energy-audit" => commands::cmd_energy_audit(&cfg, out_dir),
        "sobolev" => commands::cmd_sobolev(&cfg, out_dir),
        _ => unreachable!(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("kelsim: {}: {e}", cfg_path.display());
            EXIT_CONFIG
        }
    }
}

/// Combine experiment exit codes: config errors dominate, then blow-up,
/// then boundary contact.
fn combine(codes: &[i32]) -> i32 {
    for &priority in &[EXIT_CONFIG, commands::EXIT_BLOWUP, commands::EXIT_BOUNDARY] {
        if codes.contains(&priority) {
            return priority;
        }
    }
    EXIT_OK
}

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match parse_args(&argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("kelsim: {msg}");
            std::process::exit(EXIT_CONFIG);
        }
    };
    let budget = match memory_budget_from_env() {
        Ok(b) => b,
        Err(msg) => {
            eprintln!("kelsim: {msg}");
            std::process::exit(EXIT_CONFIG);
        }
    };

    if args.verb == "validate" {
        let code = match commands::cmd_validate(&args.out) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("kelsim: validate: {e}");
                EXIT_CONFIG
            }
        };
        std::process::exit(code);
    }

    // one isolated output directory per experiment; a single config writes
    // directly into --out
    let jobs: Vec<(PathBuf, PathBuf)> = args
        .configs
        .iter()
        .map(|cfg| {
            let sub = if args.configs.len() == 1 {
                args.out.clone()
            } else {
                let stem = cfg
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "experiment".into());
                args.out.join(stem)
            };
            (cfg.clone(), sub)
        })
        .collect();

    let codes: Vec<i32> = if args.jobs <= 1 || jobs.len() <= 1 {
        jobs.iter()
            .map(|(cfg, out)| dispatch(&args.verb, cfg, out, budget))
            .collect()
    } else {
        let verb = args.verb.clone();
        let mut results = vec![EXIT_OK; jobs.len()];
        let chunk = jobs.len().div_ceil(args.jobs);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (batch_idx, batch) in jobs.chunks(chunk).enumerate() {
                let verb = verb.clone();
                handles.push((
                    batch_idx,
                    scope.spawn(move || {
                        batch
                            .iter()
                            .map(|(cfg, out)| dispatch(&verb, cfg, out, budget))
                            .collect::<Vec<i32>>()
                    }),
                ));
            }
            for (batch_idx, handle) in handles {
                let batch_codes = handle.join().expect("experiment thread panicked");
                for (i, code) in batch_codes.into_iter().enumerate() {
                    results[batch_idx * chunk + i] = code;
                }
            }
        });
        results
    };
    std::process::exit(combine(&codes));
}
