use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A volume or tensor would exceed the addressable size.
    #[error("sizing error: {0}")]
    Sizing(String),
    /// Shapes, indices or configuration values that violate a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A sampling request that cannot be satisfied by the available budget.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    /// A normalizing reference vector has zero norm.
    #[error("degenerate reference: {0}")]
    DegenerateReference(String),
    /// Non-finite values entered or appeared in a computation.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Training or an iterative solver diverged.
    #[error("divergence: {0}")]
    Divergence(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
