//! Flexibility envelopes, real-time dispatch, SoC drift correction and
//! regulation-market scoring for hybrid PV + battery + controllable-load
//! plants.

// `!(x >= 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod config;
pub mod data_io;
pub mod dispatch;
pub mod experiments;
pub mod flexibility;
pub mod market;
pub mod oracle;
pub mod soc_guard;

use thiserror::Error;

/// Broad class of a failure, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Data(#[from] data_io::DataError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Asset(#[from] assets::AssetError),
    #[error(transparent)]
    Flex(#[from] flexibility::FlexError),
    #[error(transparent)]
    Dispatch(#[from] dispatch::DispatchError),
    #[error(transparent)]
    Guard(#[from] soc_guard::GuardError),
    #[error(transparent)]
    Market(#[from] market::MarketError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::InsufficientData(_) => ErrorKind::Data,
            Error::Market(market::MarketError::UndefinedScore(_) | market::MarketError::ZeroSignal) => ErrorKind::Data,
            _ => ErrorKind::Runtime,
        }
    }
}
