//! Stub external evaluator speaking the line protocol on stdin/stdout.
//!
//! Serves either a built-in target (`--target gaussian --param sigma2=0.1`)
//! or a simple named form (`--fn sqnorm`). Useful for wiring tests and as a
//! template for real evaluator processes.

use annr_core::testbed::{builtin, protocol};
use std::collections::BTreeMap;
use std::io::{stdin, stdout, BufReader};
use std::process::ExitCode;

type EvalFn = Box<dyn FnMut(&[f64]) -> Result<f64, String>>;

fn usage() -> ! {
    eprintln!(
        "usage: annr-eval-stub [--fn sqnorm|nan|fail] [--close-after N] \
         [--target NAME [--param KEY=VALUE]...]"
    );
    std::process::exit(1);
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut simple: Option<String> = None;
    let mut target_name: Option<String> = None;
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    let mut close_after: Option<usize> = None;

    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--fn" => {
                i += 1;
                simple = Some(args.get(i).cloned().unwrap_or_else(|| usage()));
            }
            "--target" => {
                i += 1;
                target_name = Some(args.get(i).cloned().unwrap_or_else(|| usage()));
            }
            "--param" => {
                i += 1;
                let kv = args.get(i).cloned().unwrap_or_else(|| usage());
                let Some((k, v)) = kv.split_once('=') else {
                    usage()
                };
                let Ok(v) = v.parse() else { usage() };
                params.insert(k.to_string(), v);
            }
            "--close-after" => {
                i += 1;
                close_after = args.get(i).and_then(|s| s.parse().ok());
            }
            _ => usage(),
        }
        i += 1;
    }

    let mut served = 0usize;
    let f: EvalFn = match (simple, target_name) {
        (Some(name), None) => match name.as_str() {
            "sqnorm" => Box::new(|x: &[f64]| Ok(x.iter().map(|v| v * v).sum())),
            "nan" => Box::new(|_x: &[f64]| Ok(f64::NAN)),
            "fail" => Box::new(|_x: &[f64]| Err("stub always fails".to_string())),
            _ => usage(),
        },
        (None, Some(name)) => {
            let target = match builtin(&name, &params) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            Box::new(move |x: &[f64]| Ok(target.eval(x)))
        }
        (None, None) => Box::new(|x: &[f64]| Ok(x.iter().map(|v| v * v).sum())),
        _ => usage(),
    };

    let mut f = f;
    let wrapped = move |x: &[f64]| -> Result<f64, String> {
        if let Some(limit) = close_after {
            if served >= limit {
                // Simulate an evaluator dying mid-run.
                std::process::exit(0);
            }
        }
        served += 1;
        f(x)
    };

    match protocol::serve(
        BufReader::new(stdin().lock()),
        stdout().lock(),
        None,
        wrapped,
    ) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("protocol error: {e}");
            ExitCode::from(2)
        }
    }
}
