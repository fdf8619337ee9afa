#![no_main]

use fatoulab_cli::{RunConfig, Subcommand};
use libfuzzer_sys::fuzz_target;

const SUBCOMMANDS: [Subcommand; 7] = [
    Subcommand::Render,
    Subcommand::Periodic,
    Subcommand::Access,
    Subcommand::Audit,
    Subcommand::Measure,
    Subcommand::Inner,
    Subcommand::Scan,
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_json(text) else {
        return;
    };
    for sub in SUBCOMMANDS {
        if let Ok(resolved) = cfg.clone().resolve(sub) {
            // Resolution is idempotent and survives a round trip.
            let again = RunConfig::from_json(&resolved.to_json()).unwrap();
            assert_eq!(again.resolve(sub).unwrap(), resolved);
        }
    }
});
