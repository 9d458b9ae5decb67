use std::fmt;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// A failure carrying the exit code it maps to.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub message: String,
}

impl Fail {
    pub fn invalid(message: impl fmt::Display) -> Self {
        Fail {
            code: EXIT_VALIDATION,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        Fail {
            code: EXIT_INTERNAL,
            message: message.to_string(),
        }
    }

    pub fn missing_input(message: impl fmt::Display) -> Self {
        Fail::invalid(format!("missing input error: {message}"))
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, Fail>;

impl From<scv_core::trace::TraceError> for Fail {
    fn from(e: scv_core::trace::TraceError) -> Self {
        Fail::invalid(e)
    }
}

impl From<scv_core::consistency::ConsistencyError> for Fail {
    fn from(e: scv_core::consistency::ConsistencyError) -> Self {
        use scv_core::consistency::ConsistencyError as E;
        match e {
            E::Domain { .. } | E::DegenerateSample { .. } => Fail::invalid(format!("domain error: {e}")),
            E::Provider(_) | E::Iso(_) => Fail::internal(e),
        }
    }
}

impl From<scv_core::simlab::SimError> for Fail {
    fn from(e: scv_core::simlab::SimError) -> Self {
        use scv_core::simlab::SimError as E;
        match e {
            E::Domain { .. } | E::Dag(_) => Fail::invalid(format!("domain error: {e}")),
            E::BoundInvalid { .. } | E::Degenerate { .. } => Fail::invalid(e),
        }
    }
}

impl From<scv_core::sampler::SamplerError> for Fail {
    fn from(e: scv_core::sampler::SamplerError) -> Self {
        use scv_core::sampler::SamplerError as E;
        match e {
            E::Config(_) => Fail::invalid(e),
            E::Scoring(s) => s.into(),
            E::Backend { .. } => Fail::internal(e),
        }
    }
}

impl From<scv_core::repair::RepairError> for Fail {
    fn from(e: scv_core::repair::RepairError) -> Self {
        use scv_core::repair::RepairError as E;
        match e {
            E::Scoring(s) => s.into(),
            E::Invalid(_) => Fail::internal(e),
            E::UnknownTarget(_) | E::Threshold(_) | E::Irreparable(_) => Fail::invalid(e),
        }
    }
}
