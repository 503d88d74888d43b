//! Scenarios compiled into the binary.

pub struct Builtin {
    pub name: &'static str,
    pub text: &'static str,
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "step-response",
        text: include_str!("../scenarios/step-response.toml"),
    },
    Builtin {
        name: "slew-calibration",
        text: include_str!("../scenarios/slew-calibration.toml"),
    },
    Builtin {
        name: "averaging",
        text: include_str!("../scenarios/averaging.toml"),
    },
    Builtin {
        name: "offset-allan",
        text: include_str!("../scenarios/offset-allan.toml"),
    },
    Builtin {
        name: "intensity-gate",
        text: include_str!("../scenarios/intensity-gate.toml"),
    },
    Builtin {
        name: "pid-pipeline",
        text: include_str!("../scenarios/pid-pipeline.toml"),
    },
    Builtin {
        name: "dac-spectra",
        text: include_str!("../scenarios/dac-spectra.toml"),
    },
    Builtin {
        name: "coherence",
        text: include_str!("../scenarios/coherence.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}
