//! Experiment presets shipped with the binary.

use crate::error::{ExpError, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1-two-flow", include_str!("../presets/fig1-two-flow.conf")),
    ("fig1c-staggered", include_str!("../presets/fig1c-staggered.conf")),
    ("fig2a-pacing", include_str!("../presets/fig2a-pacing.conf")),
    ("fig2b-slowstart", include_str!("../presets/fig2b-slowstart.conf")),
    ("fig2c-randomdrop", include_str!("../presets/fig2c-randomdrop.conf")),
    ("fig2d-multdecrease", include_str!("../presets/fig2d-multdecrease.conf")),
    ("fig3-psweep", include_str!("../presets/fig3-psweep.conf")),
    ("fig4-p-nflows", include_str!("../presets/fig4-p-nflows.conf")),
    ("fig5-beta-nflows", include_str!("../presets/fig5-beta-nflows.conf")),
    ("fig6-betasweep", include_str!("../presets/fig6-betasweep.conf")),
    ("fluid-two-flow", include_str!("../presets/fluid-two-flow.conf")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| ExpError::UnknownPreset(name.to_string(), names().join(", ")))
}
