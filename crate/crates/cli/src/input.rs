use std::fmt;
use std::fs;
use std::path::Path;

use revspec::profile::config;
use revspec::{builtins, ProfileFunction, RevspecError};

pub const SCHEMA_HELP: &str = "\
A profile is a JSON file {\"kind\": ..., \"m\": ..., \"params\": {...}}:
  round           params {}                                  r = (m/pi) sin(pi s/m)
  symmetric_base  params {\"coeffs\": [c0, c1, ...]}           r = sum c_i sin((2i+1) pi s/m)
  cord_deformed   params {\"base\": <profile>, \"f_coeffs\": [a0, a1, ...]}  (odd f in powers of u)
                  or     {\"base\": <profile>, \"psi_sine\": [b1, b2, ...]} (psi as a sine series)
  flat_equator    params {\"f_amplitude\", \"length_scale\", \"h_amplitude\", \"h_rate\",
                          \"h_power\", \"j_max\", \"blend_start\", \"blend_end\"} (all optional)
  tabulated       params {\"sigma\": [...], \"r\": [...]}           last sigma must equal m
  rearranged      params {\"source\": <profile>}
  builtin         params {\"name\": one of round, round_half, two_harmonic, quartic_flat,
                          zoll, two_harmonic_deformed, flat_equator}
A bare builtin name may be given instead of a file path.";

/// Bad arguments or unreadable input: exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub enum Loaded {
    Profile(Box<ProfileFunction>),
    /// The file parsed but the profile could not be built.
    Failed(RevspecError),
}

pub fn load_profile(arg: &str) -> Result<Loaded, UsageError> {
    let path = Path::new(arg);
    if !path.exists() {
        return match builtins::by_name(arg) {
            Some(p) => Ok(Loaded::Profile(Box::new(p))),
            None => Err(UsageError(format!("{arg}: no such file, and not a builtin profile name\n\n{SCHEMA_HELP}"))),
        };
    }
    let text = fs::read_to_string(path).map_err(|e| UsageError(format!("{arg}: {e}")))?;
    match config::from_json(&text) {
        Ok(p) => Ok(Loaded::Profile(Box::new(p))),
        Err(RevspecError::Config(msg)) => Err(UsageError(format!("{arg}: {msg}\n\n{SCHEMA_HELP}"))),
        Err(e) => Ok(Loaded::Failed(e)),
    }
}
