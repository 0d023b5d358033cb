//! Built-in scenarios, embedded from `presets/*.toml`.

use crate::config::{parse_str, ConfigError, ScenarioConfig};

/// `(name, description, TOML source)`.
pub const PRESETS: &[(&str, &str, &str)] = &[
    ("mink-stationary", "S_τ₀ with ℋ = n/τ₀ stays put", include_str!("../presets/mink-stationary.toml")),
    ("mink-self-similar", "ℋ = 0 expanding hyperboloids against the exact solution", include_str!("../presets/mink-self-similar.toml")),
    ("mink-perturbed-cmc", "bumped S_1 relaxing to the CMC hyperboloid", include_str!("../presets/mink-perturbed-cmc.toml")),
    ("mink-s-inverse", "ℋ = 0 with H − ℋ ≥ 0: the s⁻¹ bound", include_str!("../presets/mink-s-inverse.toml")),
    ("mink-pinched", "data between S_0.8 and S_1.25 with n/τ₂ ≤ ℋ ≤ n/τ₁", include_str!("../presets/mink-pinched.toml")),
    ("mink-example-H", "the explicit field ℋ = 2 − e^{−4t+sqrt(r²+1)} from S_1/2", include_str!("../presets/mink-example-H.toml")),
    ("mink-past-orientation", "past-oriented flow with ℋ = −n/τ₀", include_str!("../presets/mink-past-orientation.toml")),
    ("desitter-flat", "flat de Sitter slice with ℋ = nH, periodic box", include_str!("../presets/desitter-flat.toml")),
    ("newton-bump", "Newton solve for the CMC hyperboloid from a bump", include_str!("../presets/newton-bump.toml")),
    ("foliation-hyperboloid", "Gaussian foliation of S_2 in Minkowski", include_str!("../presets/foliation-hyperboloid.toml")),
    ("foliation-tanh", "Riccati flow with R̄ = g and A₀ = 0", include_str!("../presets/foliation-tanh.toml")),
    ("schw-expansion", "mean curvature of the level sets near null infinity", include_str!("../presets/schw-expansion.toml")),
    ("verify-all", "the full invariant suite", include_str!("../presets/verify-all.toml")),
];

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.2)
}

pub fn load(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let src = source(name).ok_or_else(|| ConfigError::Validation(format!("no preset named {name}")))?;
    parse_str(src)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_under_its_name() {
        for (name, _, _) in PRESETS {
            let c = load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&c.name, name);
        }
    }
}
