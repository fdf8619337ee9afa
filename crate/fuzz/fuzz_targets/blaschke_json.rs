#![no_main]

use fatoulab_core::inner::BlaschkeProduct;
use fatoulab_core::Complex64;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(b) = BlaschkeProduct::from_json(text) {
        assert_eq!(BlaschkeProduct::from_json(&b.to_json()).unwrap(), b);
        // Inner functions keep the closed disk.
        let w = b.eval(Complex64::new(0.3, -0.2));
        assert!(w.norm() <= 1.0 + 1e-9);
    }
});
