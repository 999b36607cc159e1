use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::CliError;

/// Writes through a temporary file in the destination directory and renames
/// it into place only once `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> prosody_core::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |source: io::Error| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Writes to `path` atomically, or to stdout when no path is given.
pub fn write_to<F>(path: Option<&Path>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> prosody_core::Result<()>,
{
    match path {
        Some(p) => write_atomic(p, body),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush().map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

pub fn open(path: &Path) -> Result<io::BufReader<File>, CliError> {
    File::open(path)
        .map(io::BufReader::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}
