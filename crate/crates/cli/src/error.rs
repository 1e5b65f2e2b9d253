use std::path::Path;

/// Failures of a CLI command, each mapped to a distinct exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing or unreadable inputs, schema mismatches, bad sidecars.
    #[error("{0}")]
    Input(String),
    /// The server answered with a non-200 status.
    #[error("server rejected the request with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    /// Connection failure or timeout.
    #[error("network error: {0}")]
    Network(String),
    /// A bundle or diagnosis document that does not decode.
    #[error("malformed artifact: {0}")]
    Malformed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Rejected { .. } => 3,
            CliError::Network(_) => 4,
            CliError::Malformed(_) => 5,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("cannot read {}: {err}", path.display()))
    }
}

/// Replace `path` in one step so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    let fail = |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
