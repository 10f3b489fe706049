#![no_main]

use libfuzzer_sys::Corpus;
use libfuzzer_sys::fuzz_target;
use psforge_cli::RunConfig;

fuzz_target!(|data: &[u8]| -> Corpus {
    let Ok(text) = std::str::from_utf8(data) else {
        return Corpus::Reject;
    };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let _ = cfg.validate();
        let again = RunConfig::from_toml(&cfg.to_toml()).expect("serialized config failed to parse");
        assert_eq!(again.hash(), cfg.hash());
    }
    Corpus::Keep
});
