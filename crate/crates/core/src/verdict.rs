use serde::Serialize;

/// Outcome of a conditional certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The face has too few vertices for the bound to say anything.
    NotApplicable,
    /// The theorem's premise does not hold, so no claim is made.
    HypothesisFailed,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
            Verdict::HypothesisFailed => "hypothesis-failed",
        }
    }
}
