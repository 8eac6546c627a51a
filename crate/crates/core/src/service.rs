//! The nine ancillary services and their fixed column order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One ancillary service, in matrix column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ServiceKind {
    SyncInertia,
    SynthInertia,
    Ffr,
    Fcr,
    Afrr,
    Mfrr,
    Rr,
    VoltVar,
    BlackStart,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 9] = [
        ServiceKind::SyncInertia,
        ServiceKind::SynthInertia,
        ServiceKind::Ffr,
        ServiceKind::Fcr,
        ServiceKind::Afrr,
        ServiceKind::Mfrr,
        ServiceKind::Rr,
        ServiceKind::VoltVar,
        ServiceKind::BlackStart,
    ];

    /// Stable identifier used in file names, CLI flags and reports.
    pub fn id(self) -> &'static str {
        match self {
            ServiceKind::SyncInertia => "sync-inertia",
            ServiceKind::SynthInertia => "synth-inertia",
            ServiceKind::Ffr => "ffr",
            ServiceKind::Fcr => "fcr",
            ServiceKind::Afrr => "afrr",
            ServiceKind::Mfrr => "mfrr",
            ServiceKind::Rr => "rr",
            ServiceKind::VoltVar => "volt-var",
            ServiceKind::BlackStart => "black-start",
        }
    }

    /// Column heading in the rendered matrix.
    pub fn column_title(self) -> &'static str {
        match self {
            ServiceKind::SyncInertia => "SYNCHRONOUS INERTIA",
            ServiceKind::SynthInertia => "SYNTHETIC INERTIA",
            ServiceKind::Ffr => "FAST FREQUENCY RESPONSE (FFR)",
            ServiceKind::Fcr => "FREQUENCY CONTAINMENT RESERVE (FCR)",
            ServiceKind::Afrr => "AUTOMATIC FREQUENCY RESTORATION RESERVE (aFRR)",
            ServiceKind::Mfrr => "MANUAL FREQUENCY RESTORATION RESERVE (mFRR)",
            ServiceKind::Rr => "REPLACEMENT RESERVE (RR)",
            ServiceKind::VoltVar => "VOLTAGE/VAR CONTROL",
            ServiceKind::BlackStart => "BLACK START",
        }
    }

    /// Activation timescale printed under the column heading.
    pub fn timescale(self) -> &'static str {
        match self {
            ServiceKind::SyncInertia => "0 s",
            ServiceKind::SynthInertia => "< 500 ms",
            ServiceKind::Ffr => "0.5-2 s",
            ServiceKind::Fcr => "< 30 s",
            ServiceKind::Afrr => "30 s - 5 min",
            ServiceKind::Mfrr => "< 15 min",
            ServiceKind::Rr => "> 15 min",
            ServiceKind::VoltVar => "< 1 s",
            ServiceKind::BlackStart => "N/A",
        }
    }

    /// Black start has no pump sub-column; everything else has both.
    pub fn has_pump_column(self) -> bool {
        self != ServiceKind::BlackStart
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownService(pub String);

impl fmt::Display for UnknownService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown service `{}` (expected one of {})",
            self.0,
            ServiceKind::ALL.map(|s| s.id()).join(", ")
        )
    }
}

impl std::error::Error for UnknownService {}

impl FromStr for ServiceKind {
    type Err = UnknownService;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        ServiceKind::ALL
            .into_iter()
            .find(|k| k.id() == norm)
            .ok_or_else(|| UnknownService(s.to_string()))
    }
}

impl TryFrom<String> for ServiceKind {
    type Error = UnknownService;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ServiceKind> for String {
    fn from(k: ServiceKind) -> String {
        k.id().to_string()
    }
}
