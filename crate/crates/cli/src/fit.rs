//! Method names and dispatch to the reconstruction backends.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use qst_reconstruct::{cholesky_fit, imle, qst_cgan_fit, FitReport, Loss, ReconstructionProblem};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// `imle`, `cholesky:<loss>` or `cgan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Imle,
    Cholesky(Loss),
    Cgan,
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "imle" => Ok(Method::Imle),
            "cgan" | "qst-cgan" => Ok(Method::Cgan),
            "cholesky" => Ok(Method::Cholesky(Loss::L2)),
            other => match other.strip_prefix("cholesky:") {
                Some(loss) => loss.parse().map(Method::Cholesky).map_err(|e| CliError::config(e.to_string())),
                None => Err(CliError::config(format!(
                    "unknown method {s:?}; expected imle, cholesky:<l1|l2|ce|kl> or cgan"
                ))),
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Imle => f.write_str("imle"),
            Method::Cholesky(loss) => write!(f, "cholesky:{}", loss.name()),
            Method::Cgan => f.write_str("cgan"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-run adjustments on top of the configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOverrides {
    pub max_iters: Option<usize>,
    pub lambda_l1: Option<f64>,
    /// Disables the windowed stopping rule.
    pub full_budget: bool,
}

pub fn run_fit(method: Method, problem: &ReconstructionProblem, cfg: &RunConfig, o: FitOverrides) -> Result<FitReport> {
    let report = match method {
        Method::Imle => {
            let mut c = cfg.imle();
            if let Some(n) = o.max_iters {
                c.max_iters = n;
            }
            if o.full_budget {
                c.monitor = None;
            }
            imle(problem, &c)?
        }
        Method::Cholesky(loss) => {
            let mut c = cfg.cholesky(loss);
            if let Some(n) = o.max_iters {
                c.max_iters = n;
            }
            if o.full_budget {
                c.monitor = None;
            }
            cholesky_fit(problem, &c)?
        }
        Method::Cgan => {
            let mut c = cfg.cgan();
            if let Some(n) = o.max_iters {
                c.max_iters = n;
            }
            if let Some(l) = o.lambda_l1 {
                c.lambda_l1 = l;
            }
            if o.full_budget {
                c.monitor = None;
            }
            qst_cgan_fit(problem, &c)?
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Imle, Method::Cgan, Method::Cholesky(Loss::L1), Method::Cholesky(Loss::CrossEntropy)] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
        }
        assert_eq!("cholesky:L2".parse::<Method>().unwrap(), Method::Cholesky(Loss::L2));
        assert!("cholesky:l5".parse::<Method>().is_err());
        assert!("svd".parse::<Method>().is_err());
    }
}
