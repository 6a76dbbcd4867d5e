//! Library side of the `pauli-est` command-line tool: spec files, the
//! command implementations and output rendering.

pub mod commands;
pub mod output;
pub mod spec;

use std::fs;
use std::path::Path;

use pauli_channel_est::{Error, Result};

pub use commands::{execute, run_info, Command};
pub use output::{render, Format};
pub use spec::SpecFile;

/// Runs a command and renders its files without touching the disk.
pub fn run(cmd: Command, spec: &SpecFile, format: Format) -> Result<Vec<(String, String)>> {
    let out = execute(cmd, spec)?;
    Ok(render(&out, &run_info(spec), format))
}

/// Writes every file under `dir`, or none of them: contents go to
/// temporary names first and are renamed once all writes succeeded.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, contents) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(Error::Io(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest)?;
    }
    Ok(())
}

/// Process exit code for an error kind.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Spec(_) => 3,
        Error::DimensionMismatch { .. }
        | Error::InvalidState(_)
        | Error::InvalidEffect(_)
        | Error::NotHermitian { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidModel(_) => 4,
        Error::SingularInformation(_) | Error::UnboundedVariance { .. } => 5,
        Error::Unidentifiable(_) | Error::SingularMatrix(_) => 6,
        Error::Structure(_) => 7,
        Error::ResourceLimit { .. } => 8,
        Error::TooManyFailures { .. } => 9,
        Error::Io(_) => 10,
    }
}
