//! Machine-readable error records and exit-code mapping.

use phlqg::Error;

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::NotPsd { .. } => "NotPSD",
        Error::NotSymmetric { .. } => "NotSymmetric",
        Error::SchurFailure { .. } => "SchurFailure",
        Error::SingularPencil { .. } => "SingularPencil",
        Error::StructureViolation(_) => "StructureViolation",
        Error::SingularTransformation(_) => "SingularTransformation",
        Error::NoStabilizingSolution(_) => "NoStabilizingSolution",
        Error::SingularV21 { .. } => "SingularV21",
        Error::IllConditionedQ { .. } => "IllConditionedQ",
        Error::ResidualTooLarge { .. } => "ResidualTooLarge",
        Error::InconsistentCertificates(_) => "InconsistentCertificates",
        Error::CertificateFailure { .. } => "CertificateFailure",
        Error::NoMaximalSolution(_) => "NoMaximalSolution",
        Error::IllConditioned { .. } => "IllConditioned",
        Error::SingularReducedPencil { .. } => "SingularReducedPencil",
        Error::GapTooSmall { .. } => "GapTooSmall",
        Error::NegativeEigenvalue { .. } => "NegativeEigenvalue",
        Error::NotImpulseFree { .. } => "NotImpulseFree",
        Error::IllConditionedTrailingBlock { .. } => "IllConditionedTrailingBlock",
        Error::NotStabilizing(_) => "NotStabilizing",
        Error::SingularA22 { .. } => "SingularA22",
        Error::UnstableSystem { .. } => "UnstableSystem",
        Error::SingularIPlusPfPc { .. } => "SingularIPlusPfPc",
        Error::RankDeficientN { .. } => "RankDeficientN",
        Error::DimensionMismatch(_) => "DimensionMismatch",
        Error::InvalidArgument(_) => "InvalidArgument",
        Error::FileFormat(_) => "FileFormat",
        Error::Io(_) => "Io",
        _ => "Error",
    }
}

/// Usage and input problems exit with 1; failed certificates and solver
/// infeasibilities with 2.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DimensionMismatch(_)
        | Error::InvalidArgument(_)
        | Error::FileFormat(_)
        | Error::Io(_) => 1,
        _ => 2,
    }
}

/// Writes a single-line JSON error record to standard error.
pub fn emit_error_record(e: &Error) {
    eprintln!(
        "{{\"error\":\"{}\",\"message\":\"{}\"}}",
        kind(e),
        json_escape(&e.to_string())
    );
}
