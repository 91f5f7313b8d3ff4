use mixnoise::derive_stream;
use serde_json::Value;

#[test]
fn streams_match_reference_draws() {
    let fixture: Value =
        serde_json::from_str(include_str!("fixtures/stream_reference.json")).unwrap();
    let cases = fixture["cases"].as_array().unwrap();
    assert!(!cases.is_empty());
    for case in cases {
        let seed = case["seed"].as_u64().unwrap();
        let ordinal = case["ordinal"].as_u64().unwrap();
        let mut rng = derive_stream(seed, ordinal);
        for want in case["draws"].as_array().unwrap() {
            let want: u64 = want.as_str().unwrap().parse().unwrap();
            assert_eq!(rng.next_u64(), want, "seed {seed} ordinal {ordinal}");
        }
    }
}
