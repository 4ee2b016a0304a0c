use clap::{Args, Parser, Subcommand};

use crate::input::SCHEMA_HELP;

#[derive(Debug, Parser)]
#[command(
    name = "revspec",
    version,
    about = "Geodesic return data, length spectra and isospectral families of spheres of revolution",
    long_about = "Geodesic return data, length spectra and isospectral families of spheres of revolution.\n\n\
A metric ds^2 + r(s)^2 dtheta^2 on the sphere is given by a unimodal profile r on [0, m]. \
Geodesics leaving the widest parallel northward cross it again after a return time tau and an \
angle shift Theta; these determine a generating function whose critical values are the lengths \
of closed geodesics of each rotation type (p, q). Every quantity is computed twice, by \
integrating the geodesic equations and by closed-form Abel integrals.",
    after_help = SCHEMA_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output: a file path (format from the extension) or `json` / `csv` for stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// Output format, overriding the one implied by --out.
    #[arg(long, value_parser = ["json", "csv"])]
    pub format: Option<String>,
    /// Integrator tolerance, or the pass/fail tolerance of the check a subcommand runs.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Cap on the time spent following one geodesic.
    #[arg(long, allow_negative_numbers = true)]
    pub tau_cap: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a profile defines a smooth sphere: r vanishes at both ends with unit
    /// slope, stays positive, and rises to a single maximum.
    Validate {
        profile: String,
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the geodesic flow from the widest parallel and record the first return
    /// time and angle shift for a grid of launch angles beta in (0, pi).
    ReturnMap {
        profile: String,
        /// Number of launch angles, beta_i = pi (i + 1/2) / N.
        #[arg(long, default_value_t = 64)]
        beta_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the generating function and list the lengths of closed geodesics of every
    /// coprime type (p, q) with p, q <= pq-max, together with the equator and meridian lengths.
    Spectrum {
        profile: String,
        #[arg(long, default_value_t = 8)]
        pq_max: u32,
        /// Number of Chebyshev nodes of the generating-function grid.
        #[arg(long)]
        grid: Option<usize>,
        /// Keep the meridian family in the (1, 1) entry.
        #[arg(long)]
        include_meridians: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Decide whether two profiles have the same length spectrum by comparing the lengths
    /// of their superlevel sets {r >= rho}; return times and angle shifts are compared as a
    /// second opinion.
    Isospectral {
        a: String,
        b: String,
        #[command(flatten)]
        common: Common,
    },
    /// Emit the symmetric rearrangement of a profile: the reflection-symmetric profile with
    /// the same superlevel-set lengths. CSV output samples the rearrangement map instead.
    Rearrange {
        profile: String,
        /// Number of sample intervals for CSV output.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Deform a symmetric base profile along its isospectral family. The reparametrization
    /// is tau + psi(tau) with psi' = f(cos(pi tau / m)) for an odd f with f(1) = 0 and |f| < 1.
    Family {
        base: String,
        /// f as an expression in u; other names must be bound with --eps.
        #[arg(long)]
        f: String,
        /// Value of the parameter `eps` in the expression.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eps: f64,
        /// Degree of the Chebyshev expansion of f.
        #[arg(long, default_value_t = 15)]
        degree: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compare closed-form return times and angle shifts with the integrated flow over a
    /// grid of launch angles, and check the Abel transform against known pairs.
    AbelCheck {
        profile: String,
        #[arg(long, default_value_t = 32)]
        beta_grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Recover a convex function from its tangent lines: sample tangents on a grid (or at
    /// slopes 2 pi p/q), fit the Legendre dual and transform back.
    TangentDemo {
        /// One of square, half_square, exp, cosh, quartic_plus, neg_log, softplus.
        #[arg(long, default_value = "square")]
        function: String,
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Use only tangents whose slope is 2 pi p/q with q up to this bound.
        #[arg(long)]
        rational_q: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// On a sphere whose equator is flat to infinite order, follow geodesics turning ever
    /// closer to the equator and report how far each drifts from a rigid rotation over one
    /// return; contrast with a sphere of positive equator curvature, where the drift dies out.
    UnstableDemo {
        /// Profile with a flat equator.
        #[arg(long, default_value = "flat_equator")]
        profile: String,
        /// Profile used for the contrast sweep.
        #[arg(long, default_value = "two_harmonic")]
        contrast: String,
        #[arg(long, default_value_t = 5)]
        k_max: u32,
        /// Skip integrating the first geodesic of the sequence.
        #[arg(long)]
        no_ode_check: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check that the map identifying the two sections, continued along the flows,
    /// conjugates the geodesic flows of two isospectral profiles at random points and times.
    ConjugacyTest {
        a: String,
        b: String,
        #[arg(long, default_value_t = 20240607)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Validate { .. } => "validate",
            Self::ReturnMap { .. } => "return-map",
            Self::Spectrum { .. } => "spectrum",
            Self::Isospectral { .. } => "isospectral",
            Self::Rearrange { .. } => "rearrange",
            Self::Family { .. } => "family",
            Self::AbelCheck { .. } => "abel-check",
            Self::TangentDemo { .. } => "tangent-demo",
            Self::UnstableDemo { .. } => "unstable-demo",
            Self::ConjugacyTest { .. } => "conjugacy-test",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_spectrum_flags() {
        let cli = Cli::try_parse_from(["revspec", "spectrum", "round", "--pq-max", "3", "--out", "json", "--tol", "1e-9"]).unwrap();
        match cli.command {
            Command::Spectrum { pq_max, common, .. } => {
                assert_eq!(pq_max, 3);
                assert_eq!(common.tol, Some(1e-9));
                assert_eq!(common.out.as_deref(), Some("json"));
            }
            other => panic!("parsed as {}", other.name()),
        }
    }
}
