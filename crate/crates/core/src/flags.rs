use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Conditions worth recording next to an evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Point from the initial Sobol design.
    InitialDesign,
    /// Every acquisition restart left the box; a clipped point was used.
    AcquisitionDegraded,
    /// DPP sampler could not find a nonsingular starting set.
    DppInitFallback,
    /// Relevant-region sampling had to enlarge lambda beyond its start.
    LambdaGrown,
    /// Pseudo-inverse reconstruction was clipped to the box.
    PinvClipped,
    /// Randomized reconstruction exhausted its budget and used the pseudo-inverse.
    ReconstructionFallback,
    /// Fitted embedding was rank-deficient and got perturbed.
    EmbeddingPerturbed,
    /// The round failed; queries were drawn uniformly at random.
    RandomFallback,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::InitialDesign => "initial-design",
            Flag::AcquisitionDegraded => "acquisition-degraded",
            Flag::DppInitFallback => "dpp-init-fallback",
            Flag::LambdaGrown => "lambda-grown",
            Flag::PinvClipped => "pinv-clipped",
            Flag::ReconstructionFallback => "reconstruction-fallback",
            Flag::EmbeddingPerturbed => "embedding-perturbed",
            Flag::RandomFallback => "random-fallback",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Flags = BTreeSet<Flag>;

/// `a|b|c`, empty string for no flags.
pub fn join(flags: &Flags) -> String {
    flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
}
