mod args;
mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::RunRecord;
use manifest::{hash_inputs, hash_outputs, read_manifest, write_manifest, Manifest};
use mpa_core::{Error, Result};

/// Exit status for each failure class.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Csv { .. } | Error::EmptyDataset => 2,
        Error::ShapeMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::LabelOutOfRange { .. }
        | Error::InvalidArchitecture(_)
        | Error::UnsupportedArchitecture(_) => 3,
        Error::TrainingDiverged { .. } => 4,
        Error::GammaOutOfRange { .. } => 5,
        Error::DegenerateInput(_) => 6,
        _ => 1,
    }
}

fn run_command(cmd: &Command) -> Result<RunRecord> {
    match cmd {
        Command::Score {
            labels,
            dummy,
            model,
            inputs,
            num_source,
            num_target,
            out_dir,
        } => {
            let dummy = if *dummy {
                Some((model.as_deref().unwrap(), inputs.as_deref().unwrap()))
            } else {
                None
            };
            commands::score(labels, dummy, *num_source, *num_target, out_dir)
        }
        Command::Transfer {
            config,
            seed,
            epochs,
            gamma_grid,
            out_dir,
        } => commands::transfer(config, *seed, *epochs, gamma_grid.as_deref(), out_dir),
        Command::Bounds {
            run_dir,
            gamma,
            delta,
            ref_zero,
            out_dir,
        } => commands::bounds(run_dir, *gamma, *delta, *ref_zero, out_dir),
        Command::Correlate {
            suite,
            seed,
            epochs,
            emit_tasks,
            out_dir,
        } => commands::correlate(suite, *seed, *epochs, *emit_tasks, out_dir),
        Command::Replay { .. } => unreachable!("replay is dispatched separately"),
    }
}

/// Runs `cmd` and records a manifest next to its outputs.
fn execute(cmd: &Command) -> Result<Manifest> {
    let cmd = cmd.absolutized()?;
    let record = run_command(&cmd)?;
    let out_dir = cmd.out_dir().expect("non-replay command");
    let manifest = Manifest {
        tool: "mpa".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.clone(),
        resolved: record.resolved,
        inputs: hash_inputs(&record.inputs)?,
        outputs: hash_outputs(out_dir, &record.outputs)?,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}

fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<()> {
    let recorded = read_manifest(manifest_path)?;
    for (path, hash) in &recorded.inputs {
        let now = manifest::sha256_file(Path::new(path))?;
        if &now != hash {
            return Err(Error::InvalidParameter(format!(
                "input {path} changed since the recorded run"
            )));
        }
    }
    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => manifest_path.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let rerun = execute(&recorded.command.with_out_dir(std::path::absolute(&dir)?))?;
    let mut mismatched = Vec::new();
    for (name, hash) in &recorded.outputs {
        if rerun.outputs.get(name) != Some(hash) {
            mismatched.push(name.as_str());
        }
    }
    if !mismatched.is_empty() || rerun.outputs.len() != recorded.outputs.len() {
        return Err(Error::InvalidParameter(format!(
            "replay outputs differ from the manifest: {}",
            mismatched.join(", ")
        )));
    }
    println!(
        "replay of `{}` reproduced {} outputs bit-for-bit in {}",
        recorded.command.name(),
        recorded.outputs.len(),
        dir.display()
    );
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MPA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("MPA_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Replay { manifest, out_dir } => replay(manifest, out_dir.as_deref()),
        cmd => execute(cmd).map(|m| {
            println!(
                "{}: wrote {} files to {}",
                cmd.name(),
                m.outputs.len() + 1,
                m.command.out_dir().unwrap().display()
            );
        }),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
