//! Flat key=value configuration files for solver parameters.

use std::path::Path;

use phlqg::Error;

#[derive(Debug, Clone)]
pub struct Config {
    /// Regularization of the KYP artificial feedthrough.
    pub kyp_eps: f64,
    /// Relative accuracy of the H-infinity bisection.
    pub hinf_tol: f64,
    /// Rank tolerance for minimal realizations.
    pub rank_tol: f64,
    /// Number of probe frequencies for normalization certificates.
    pub probe_frequencies: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kyp_eps: phlqg::tol::KYP_EPS,
            hinf_tol: phlqg::tol::HINF,
            rank_tol: phlqg::tol::RANK,
            probe_frequencies: 100,
        }
    }
}

/// Loads a config file (`key = value` or `key=value`, `#` comments) over
/// the defaults. A missing path argument yields the defaults.
pub fn load(path: Option<&Path>) -> Result<Config, Error> {
    let mut cfg = Config::default();
    let Some(path) = path else {
        return Ok(cfg);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidArgument(format!(
                "{}:{}: expected key=value, found `{line}`",
                path.display(),
                no + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| {
            Error::InvalidArgument(format!(
                "{}:{}: invalid {what} `{value}`",
                path.display(),
                no + 1
            ))
        };
        match key {
            "kyp_eps" => cfg.kyp_eps = value.parse().map_err(|_| bad("kyp_eps"))?,
            "hinf_tol" => cfg.hinf_tol = value.parse().map_err(|_| bad("hinf_tol"))?,
            "rank_tol" => cfg.rank_tol = value.parse().map_err(|_| bad("rank_tol"))?,
            "probe_frequencies" => {
                cfg.probe_frequencies = value.parse().map_err(|_| bad("probe_frequencies"))?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{}:{}: unknown configuration key `{other}`",
                    path.display(),
                    no + 1
                )))
            }
        }
    }
    Ok(cfg)
}
