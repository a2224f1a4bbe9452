use alloc::string::String;

use crate::metrics::Stratum;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },

    #[error("profile `{profile}` is priced {actual}, expected {expected}")]
    PricingMode {
        profile: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("no finite break-even: per-image margin {margin} is not positive")]
    NoFiniteBreakEven { margin: f64 },

    #[error("no CCD crossover: accuracy-adjusted margin {margin} is not positive")]
    NoCrossover { margin: f64 },

    #[error("cost per correct detection is undefined at zero accuracy")]
    UndefinedCcd,

    #[error("effect size is undefined for zero-variance differences")]
    UndefinedEffect,

    #[error("Fleiss' kappa is undefined when expected agreement is 1")]
    UndefinedKappa,

    #[error("stratum {stratum} holds {available} images, {requested} requested (short by {})", requested - available)]
    InsufficientStratum {
        stratum: Stratum,
        available: usize,
        requested: usize,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field,
            reason: reason.into(),
        }
    }

    /// Field name for validation failures, used by the HTTP envelope.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::InvalidField { field, .. } => Some(field),
            _ => None,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidField { .. } => "invalid_field",
            Error::PricingMode { .. } => "pricing_mode",
            Error::NoFiniteBreakEven { .. } => "no_finite_break_even",
            Error::NoCrossover { .. } => "no_crossover",
            Error::UndefinedCcd => "undefined_ccd",
            Error::UndefinedEffect => "undefined_effect",
            Error::UndefinedKappa => "undefined_kappa",
            Error::InsufficientStratum { .. } => "insufficient_stratum",
            Error::Empty(_) => "empty_input",
        }
    }
}

pub(crate) fn ensure_finite_nonneg(field: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(field, alloc::format!("{v} is not a finite value >= 0")));
    }
    Ok(())
}

pub(crate) fn ensure_unit(field: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(field, alloc::format!("{v} is outside [0, 1]")));
    }
    Ok(())
}
