#![no_main]

use libfuzzer_sys::Corpus;
use libfuzzer_sys::fuzz_target;
use psforge::sampler::PairList;

fuzz_target!(|data: &[u8]| -> Corpus {
    let Ok(text) = std::str::from_utf8(data) else {
        return Corpus::Reject;
    };
    if let Ok(list) = PairList::parse_tsv(text) {
        let again = PairList::parse_tsv(&list.to_tsv()).unwrap();
        assert_eq!(again.len(), list.len());
    }
    Corpus::Keep
});
