//! JSON profile files: `{"kind": ..., "m": ..., "params": {...}}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::deform::DeformationSource;
use super::{builtins, Deformation, FlatEquatorParams, ProfileFunction, ProfileKind};
use crate::error::{Result, RevspecError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub kind: String,
    pub m: f64,
    #[serde(default)]
    pub params: Value,
}

fn bad(msg: impl Into<String>) -> RevspecError {
    RevspecError::Config(msg.into())
}

fn f64_list(v: &Value, key: &str) -> Result<Vec<f64>> {
    let arr = v.get(key).and_then(Value::as_array).ok_or_else(|| bad(format!("params.{key} must be an array")))?;
    arr.iter().map(|x| x.as_f64().ok_or_else(|| bad(format!("params.{key} must hold numbers")))).collect()
}

impl ProfileConfig {
    pub fn build(&self) -> Result<ProfileFunction> {
        if !(self.m > 0.0) {
            return Err(bad("m must be positive"));
        }
        let p = &self.params;
        match self.kind.as_str() {
            "round" => Ok(ProfileFunction::round(self.m / std::f64::consts::PI)),
            "symmetric_base" => ProfileFunction::symmetric_base(self.m, &f64_list(p, "coeffs")?),
            "cord_deformed" => {
                let base_cfg: ProfileConfig = serde_json::from_value(p.get("base").cloned().ok_or_else(|| bad("params.base missing"))?)
                    .map_err(|e| bad(e.to_string()))?;
                let base = base_cfg.build()?;
                if (base.m() - self.m).abs() > 1e-12 * self.m {
                    return Err(bad("base m differs from m"));
                }
                if p.get("f_coeffs").is_some() {
                    crate::rearrange::cor_d_family(&base, &f64_list(p, "f_coeffs")?)
                } else {
                    let d = Deformation::from_sine_series(self.m, &f64_list(p, "psi_sine")?)?;
                    Ok(ProfileFunction::deformed(base, d))
                }
            }
            "flat_equator" => {
                let params: FlatEquatorParams = if p.is_null() {
                    FlatEquatorParams::default()
                } else {
                    serde_json::from_value(p.clone()).map_err(|e| bad(e.to_string()))?
                };
                Ok(ProfileFunction::flat_equator(self.m, params))
            }
            "tabulated" => {
                let p = ProfileFunction::tabulated(&f64_list(p, "sigma")?, &f64_list(p, "r")?)?;
                if (p.m() - self.m).abs() > 1e-12 * self.m {
                    return Err(bad("last sigma sample must equal m"));
                }
                Ok(p)
            }
            "rearranged" => {
                let src: ProfileConfig = serde_json::from_value(p.get("source").cloned().ok_or_else(|| bad("params.source missing"))?)
                    .map_err(|e| bad(e.to_string()))?;
                Ok(crate::rearrange::symmetric_rearrangement(&src.build()?))
            }
            "builtin" => {
                let name = p.get("name").and_then(Value::as_str).ok_or_else(|| bad("params.name missing"))?;
                builtins::by_name(name).ok_or_else(|| bad(format!("unknown builtin {name}")))
            }
            other => Err(bad(format!("unknown profile kind {other}"))),
        }
    }

    pub fn from_profile(p: &ProfileFunction) -> Self {
        let params = match p.kind() {
            ProfileKind::Round => json!({}),
            ProfileKind::SymmetricBase { coeffs } => json!({ "coeffs": coeffs }),
            ProfileKind::CorDDeformed { base, deformation } => {
                let base = serde_json::to_value(Self::from_profile(base)).expect("serializable");
                match deformation.source() {
                    DeformationSource::Polynomial(c) => json!({ "base": base, "f_coeffs": c }),
                    DeformationSource::SineSeries(b) => json!({ "base": base, "psi_sine": b }),
                }
            }
            ProfileKind::FlatEquator(shape) => serde_json::to_value(&shape.params).expect("serializable"),
            ProfileKind::Tabulated { sigma, r, .. } => json!({ "sigma": sigma, "r": r }),
            ProfileKind::Rearranged { source } => {
                json!({ "source": serde_json::to_value(Self::from_profile(source)).expect("serializable") })
            }
        };
        Self { kind: p.kind_name().to_string(), m: p.m(), params }
    }
}

/// Parses a profile from JSON text.
pub fn from_json(text: &str) -> Result<ProfileFunction> {
    let cfg: ProfileConfig = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    cfg.build()
}

/// Serializes a profile to a JSON value in the config format.
pub fn to_json(p: &ProfileFunction) -> Value {
    serde_json::to_value(ProfileConfig::from_profile(p)).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for name in builtins::NAMES {
            let p = builtins::by_name(name).unwrap();
            let text = to_json(&p).to_string();
            let q = from_json(&text).unwrap();
            assert_eq!(p.kind_name(), q.kind_name());
            for i in 1..10 {
                let s = p.m() * i as f64 / 10.0;
                assert_eq!(p.eval(s).r, q.eval(s).r, "{name}");
            }
        }
    }

    #[test]
    fn malformed_configs_are_rejected() {
        assert!(from_json(r#"{"kind":"round","m":-1}"#).is_err());
        assert!(from_json(r#"{"kind":"teapot","m":1}"#).is_err());
        assert!(from_json(r#"{"kind":"symmetric_base","m":3,"params":{}}"#).is_err());
        let e = from_json(r#"{"kind":"cord_deformed","m":3.141592653589793,"params":{"base":{"kind":"round","m":3.141592653589793},"f_coeffs":[0,1]}}"#)
            .unwrap_err();
        assert_eq!(e.name(), "ConstraintViolation");
    }
}
