//! Replays the checked-in fuzz corpus and cheap byte mutations of it through
//! both parsers on stable, so parser panics show up without cargo-fuzz.

use std::fs;
use std::path::PathBuf;

use butler_mimo::config::parse_config_str;
use butler_mimo::experiment::parse_trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read(e.unwrap().path()).unwrap())
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty());
    seeds
}

fn mutations(seed: &[u8], rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    const BYTES: &[u8] = b"0123456789,.-+eE\n\r\" {}[]:nNaIf";
    (0..200)
        .map(|_| {
            let mut m = seed.to_vec();
            for _ in 0..rng.random_range(1..4) {
                let pos = if m.is_empty() { 0 } else { rng.random_range(0..m.len()) };
                match rng.random_range(0..3) {
                    0 if !m.is_empty() => m[pos] = BYTES[rng.random_range(0..BYTES.len())],
                    1 if !m.is_empty() => {
                        m.remove(pos);
                    }
                    _ => m.insert(pos, BYTES[rng.random_range(0..BYTES.len())]),
                }
            }
            m
        })
        .collect()
}

#[test]
fn trace_parser_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut accepted = 0;
    for seed in corpus("parse_trace") {
        for input in std::iter::once(seed.clone()).chain(mutations(&seed, &mut rng)) {
            if let Ok(trace) = parse_trace(input.as_slice()) {
                let mut buf = Vec::new();
                trace.write_csv(&mut buf).unwrap();
                assert_eq!(parse_trace(buf.as_slice()).unwrap(), trace);
                accepted += 1;
            }
        }
    }
    assert!(accepted > 0);
}

#[test]
fn config_parser_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in corpus("parse_config") {
        for input in std::iter::once(seed.clone()).chain(mutations(&seed, &mut rng)) {
            if let Ok(cfg) = parse_config_str(&String::from_utf8_lossy(&input)) {
                let _ = cfg.scenarios();
            }
        }
    }
}
