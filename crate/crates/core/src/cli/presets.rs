//! Scenarios shipped with the binary.

use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};

/// `(name, TOML source)`, in listing order.
pub const PRESETS: &[(&str, &str)] = &[
    ("identity", include_str!("../../presets/identity.toml")),
    (
        "von-neumann-momentum-pointer",
        include_str!("../../presets/von-neumann-momentum-pointer.toml"),
    ),
    (
        "frame-entanglement",
        include_str!("../../presets/frame-entanglement.toml"),
    ),
    (
        "apparatus-frame",
        include_str!("../../presets/apparatus-frame.toml"),
    ),
    (
        "wrong-projector",
        include_str!("../../presets/wrong-projector.toml"),
    ),
    (
        "relative-momentum-phase",
        include_str!("../../presets/relative-momentum-phase.toml"),
    ),
    (
        "random-invariant",
        include_str!("../../presets/random-invariant.toml"),
    ),
    (
        "small-l2-n3",
        include_str!("../../presets/small-l2-n3.toml"),
    ),
    (
        "small-l2-n4",
        include_str!("../../presets/small-l2-n4.toml"),
    ),
    (
        "small-l3-n3",
        include_str!("../../presets/small-l3-n3.toml"),
    ),
    (
        "small-l3-n4",
        include_str!("../../presets/small-l3-n4.toml"),
    ),
];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, src) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Lookup(format!("preset:{name}")))?;
    ScenarioConfig::from_toml(src)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_validates_and_is_named_after_itself() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            assert_eq!(&cfg.name, name);
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
