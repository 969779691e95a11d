use std::hint::black_box;

use composerx::abc::{extract_abc_blocks, parse_tune, serialize_tune};
use composerx::analysis::{extract_chord_progression, validate, RangeTable};
use composerx::prompts::bundled_prompts;
use criterion::{criterion_group, criterion_main, Criterion};

const CHANSON: &str = include_str!("../../../fixtures/chanson.abc");

fn reply() -> String {
    format!("Here is the arrangement.\n```abc\n{CHANSON}```\nLet me know what to change.")
}

fn abc(c: &mut Criterion) {
    let tune = parse_tune(CHANSON).unwrap();
    let attrs = bundled_prompts().into_iter().find(|p| p.id == "vintage-french-chanson").unwrap().attributes;
    let ranges = RangeTable::default_table();
    let text = reply();

    c.bench_function("parse_chanson", |b| b.iter(|| parse_tune(black_box(CHANSON)).unwrap()));
    c.bench_function("serialize_chanson", |b| b.iter(|| serialize_tune(black_box(&tune))));
    c.bench_function("validate_chanson", |b| b.iter(|| validate(black_box(&tune), Some(&attrs), &ranges)));
    c.bench_function("extract_blocks", |b| b.iter(|| extract_abc_blocks(black_box(&text))));
    c.bench_function("chord_progression", |b| b.iter(|| extract_chord_progression(black_box(&tune))));
}

criterion_group!(benches, abc);
criterion_main!(benches);
