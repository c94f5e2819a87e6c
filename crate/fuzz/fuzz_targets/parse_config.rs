#![no_main]
use libfuzzer_sys::fuzz_target;

use butler_mimo::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(cfg) = parse_config_str(&text) {
        let _ = cfg.scenarios();
    }
});
