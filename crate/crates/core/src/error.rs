use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants map onto the CLI exit codes: `Domain` and `Data` are data
/// errors, `Config` is a table-coverage or configuration problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("table format error: {0}")]
    Format(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Checks that `x` lies in the open unit interval.
pub(crate) fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, 1), got {x}"))
    }
}
