use std::path::{Path, PathBuf};

use detcost_core::Error as CoreError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),

    /// Malformed input with the path of the offending field, if known.
    #[error("{}{message}", field.as_ref().map(|f| format!("`{f}`: ")).unwrap_or_default())]
    Invalid { field: Option<String>, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<AppError>,
    },
}

impl AppError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Invalid {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn message(message: impl Into<String>) -> Self {
        AppError::Invalid {
            field: None,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        match self {
            e @ AppError::Io { .. } => e,
            e => AppError::InFile {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    pub fn from_json_path(e: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = e.path().to_string();
        let inner = e.into_inner();
        AppError::Invalid {
            field: (path != ".").then_some(path),
            message: inner.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } => EXIT_IO,
            AppError::InFile { source, .. } => source.exit_code(),
            _ => EXIT_VALIDATION,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.code(),
            AppError::Invalid { .. } => "invalid_request",
            AppError::Io { .. } => "io",
            AppError::InFile { source, .. } => source.code(),
        }
    }

    pub fn field(&self) -> Option<String> {
        match self {
            AppError::Core(e) => e.field().map(str::to_string),
            AppError::Invalid { field, .. } => field.clone(),
            AppError::Io { .. } => None,
            AppError::InFile { source, .. } => source.field(),
        }
    }
}

/// Parses JSON, reporting the path of the first field that fails.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, AppError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(AppError::from_json_path)
}
