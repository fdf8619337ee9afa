#![no_main]

use fatoulab_core::EntireMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(map) = EntireMap::from_json(text) {
        let back = serde_json::to_string(&map).unwrap();
        assert_eq!(EntireMap::from_json(&back).unwrap(), map);
        let _ = map.eval(fatoulab_core::Complex64::new(0.5, 0.5));
    }
});
