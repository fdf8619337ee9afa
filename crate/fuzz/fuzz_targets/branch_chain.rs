#![no_main]

use fatoulab_core::branches::{apply_chain, BranchChain};
use fatoulab_core::Complex64;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(chain) = BranchChain::from_json(text) {
        assert_eq!(BranchChain::from_json(&chain.to_json()).unwrap(), chain);
        if chain.len() <= 64 {
            let _ = apply_chain(&chain, chain.origin() + Complex64::new(1e-3, 0.0));
        }
    }
});
