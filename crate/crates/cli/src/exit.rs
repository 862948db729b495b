//! Stable process exit codes.

use headpose::Error;

pub const OK: i32 = 0;
/// Any failure without a more specific code.
pub const FAILURE: i32 = 1;
/// Bad command line; clap uses the same code.
pub const USAGE: i32 = 2;
/// Unreadable or malformed input files and invalid configuration.
pub const INPUT: i32 = 3;
pub const NO_EDGE_POINTS: i32 = 10;
pub const NO_VALID_PEAK: i32 = 11;
pub const ALL_CONSTELLATIONS_REJECTED: i32 = 12;
pub const POSE_DEGENERATE: i32 = 13;
pub const NO_POSITIVE_DEPTH: i32 = 14;

pub fn for_error(err: &Error) -> i32 {
    match err {
        Error::NoEdgePoints => NO_EDGE_POINTS,
        Error::NoValidPeak(_) | Error::NoCandidates(_) | Error::NoValidEntries => NO_VALID_PEAK,
        Error::AllConstellationsRejected | Error::CoincidentConstellation => ALL_CONSTELLATIONS_REJECTED,
        Error::PoseDegenerate(_) => POSE_DEGENERATE,
        Error::NoPositiveDepth => NO_POSITIVE_DEPTH,
        Error::Read { .. }
        | Error::Write { .. }
        | Error::Json { .. }
        | Error::Config(_)
        | Error::UnsupportedFormat(_)
        | Error::UnsupportedMaxValue(_)
        | Error::MalformedHeader(_)
        | Error::TruncatedPayload { .. }
        | Error::InvalidImage(_)
        | Error::DimensionMismatch(_)
        | Error::EmptySilhouette
        | Error::EmptyStencil
        | Error::NotPositiveDefinite
        | Error::NoSamples
        | Error::MaskOutsideFrame { .. } => INPUT,
        _ => FAILURE,
    }
}

/// Code for the first library error in the chain, if any.
pub fn for_anyhow(err: &anyhow::Error) -> i32 {
    err.chain().find_map(|e| e.downcast_ref::<Error>()).map_or(FAILURE, for_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_are_distinct() {
        let mut codes = [
            OK,
            FAILURE,
            USAGE,
            INPUT,
            NO_EDGE_POINTS,
            NO_VALID_PEAK,
            ALL_CONSTELLATIONS_REJECTED,
            POSE_DEGENERATE,
            NO_POSITIVE_DEPTH,
        ];
        codes.sort();
        assert!(codes.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn context_is_transparent() {
        let err = Err::<(), _>(Error::PoseDegenerate("x".into())).context("while solving").unwrap_err();
        assert_eq!(for_anyhow(&err), POSE_DEGENERATE);
        assert_eq!(for_anyhow(&anyhow::anyhow!("plain")), FAILURE);
    }
}
