use std::process::ExitCode;

use tofhair_core::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration.
    Config(String),
    /// Missing, malformed or unusable input data.
    Data(Error),
    /// An instance exceeds a configured size cap.
    SizeCap { pixels: usize, cap: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::SizeCap { .. } => 4,
        }
    }

    pub fn to_exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(e) => write!(f, "data error: {e}"),
            CliError::SizeCap { pixels, cap } => {
                write!(
                    f,
                    "size cap: instance of {pixels} pixels exceeds the cap of {cap}"
                )
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SizeCap { pixels, cap } => CliError::SizeCap { pixels, cap },
            Error::Config(m) => CliError::Config(m),
            other => CliError::Data(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).exit_code(), 2);
        assert_eq!(
            CliError::from(Error::EmptyRegion("hair".into())).exit_code(),
            3
        );
        assert_eq!(
            CliError::from(Error::SizeCap { pixels: 9, cap: 4 }).exit_code(),
            4
        );
    }
}
