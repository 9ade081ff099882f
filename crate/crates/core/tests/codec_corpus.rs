use std::collections::BTreeMap;

use valuemap::catalog::shipped_catalog;
use valuemap::codec::{encode_text, parse_corpus, CorpusLabel, EncodingMethod};

const CORPUS: &str = include_str!("../data/codec_corpus.jsonl");

#[test]
fn corpus_agreement_is_total() {
    let catalog = shipped_catalog();
    let records = parse_corpus(CORPUS).expect("corpus parses");
    let mut per_kind: BTreeMap<&str, usize> = BTreeMap::new();
    let mut mismatches = Vec::new();

    for r in &records {
        let item = catalog.item(&r.item_code).expect("corpus item exists");
        *per_kind.entry(item.response.kind_name()).or_default() += 1;
        let encoded = encode_text("Corpus", &r.raw_text, item);
        let (lo, hi) = item.bounds();
        assert!(
            encoded.value >= lo && encoded.value <= hi,
            "{:?} out of bounds: {}",
            r.raw_text,
            encoded.value
        );
        let ok = match r.expected {
            CorpusLabel::Value(v) => {
                encoded.method != EncodingMethod::ImputedMidrange && encoded.value == v
            }
            CorpusLabel::Ambiguous(_) => {
                encoded.method == EncodingMethod::ImputedMidrange
                    && encoded.value == item.midrange()
            }
        };
        if !ok {
            mismatches.push(format!(
                "{} {:?}: expected {:?}, got {} via {:?}",
                r.item_code, r.raw_text, r.expected, encoded.value, encoded.method
            ));
        }
    }

    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
    for kind in ["likert", "multi-select", "pick-two"] {
        assert!(per_kind.get(kind).copied().unwrap_or(0) >= 50, "{kind}: {per_kind:?}");
    }
}
