use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Pipeline stage a recovery error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    RecoverM1M2,
    FactorGram,
    ResolveSign,
    ResolveUnitary,
    FrequencyMarch,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::RecoverM1M2 => "recover_m1_m2",
            Stage::FactorGram => "factor_gram",
            Stage::ResolveSign => "resolve_sign",
            Stage::ResolveUnitary => "resolve_unitary",
            Stage::FrequencyMarch => "frequency_march",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("weight {weight:?} is not dominant: {rule}")]
    NotDominant { weight: Vec<i64>, rule: String },

    #[error("weight {weight:?} is not admissible: {rule}")]
    Inadmissible { weight: Vec<i64>, rule: String },

    #[error("weight has band {band}, marching needs band > 1")]
    BandTooSmall { band: u64 },

    #[error("unrecoverable input: {0}")]
    Unrecoverable(String),

    #[error("coefficient for l = {ell} is singular (condition number {condition:e})")]
    Singular { ell: usize, condition: f64 },

    #[error("genericity violated{}: {detail}", ell.map(|l| alloc::format!(" at l = {l}")).unwrap_or_default())]
    Genericity { ell: Option<usize>, detail: String },

    #[error("inconsistent input: {detail} (residual {residual:e})")]
    Inconsistent { detail: String, residual: f64 },

    #[error("sign undetermined: (1,1,1) block norm {norm:e} below threshold {threshold:e}")]
    SignUndetermined { norm: f64, threshold: f64 },

    #[error("frequency marching broke at index {index}: zero coefficient")]
    MarchingBreak { index: i64 },

    #[error("alignment unavailable: l = 1 block has rank {rank}")]
    AlignmentUnavailable { rank: usize },

    #[error("{stage}: {source}")]
    Pipeline { stage: Stage, source: Box<Error> },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Self {
        Error::Pipeline {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through pipeline stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pipeline { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Pipeline { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// True for rank, conditioning, and other "generic input" hypothesis failures.
    pub fn is_genericity(&self) -> bool {
        matches!(
            self.root(),
            Error::Genericity { .. }
                | Error::Singular { .. }
                | Error::SignUndetermined { .. }
                | Error::AlignmentUnavailable { .. }
                | Error::Unrecoverable(_)
                | Error::MarchingBreak { .. }
        )
    }

    pub fn is_inconsistency(&self) -> bool {
        matches!(self.root(), Error::Inconsistent { .. })
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
