use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters or incompatible shapes.
    #[error("configuration error: {0}")]
    Config(String),

    /// A lightcone was requested at a point without a full cone.
    #[error("point (r={r}, t={t}) lies in the margin: {reason}")]
    Margin { r: usize, t: usize, reason: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed binary container.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    #[allow(dead_code)]
    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
