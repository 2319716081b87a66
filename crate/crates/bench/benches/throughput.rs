use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use synpg::parsekit::{cky_parse, linearize, pcfg_sample, toy_grammar, ParseTree};
use synpg::synpg::{paraphrase, train, SynPGModel, TrainingConfig};
use synpg::tokenizer::build_vocab_from_trees;
use synpg::transformer::Strategy;

fn corpus(n: usize) -> Vec<ParseTree> {
    let g = toy_grammar();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    (0..n).map(|_| pcfg_sample(&g, &mut rng, 12).unwrap().1).collect()
}

fn training(c: &mut Criterion) {
    let trees = corpus(8);
    let vocab = build_vocab_from_trees(&trees, 1, 1000).unwrap();
    let model = SynPGModel::new(vocab, true, 0).unwrap();
    let cfg = TrainingConfig {
        epochs: 1,
        ..Default::default()
    };
    c.bench_function("train_epoch_8_sentences", |b| {
        b.iter(|| {
            let mut m = model.clone();
            train(&mut m, black_box(&trees), &cfg).unwrap()
        })
    });
    let (words, _) = model.encode_pair(&trees[0]);
    let target = linearize(&trees[1]);
    c.bench_function("paraphrase_greedy", |b| {
        b.iter(|| paraphrase(&model, black_box(&words), &target, Strategy::Greedy))
    });
}

fn parsing(c: &mut Criterion) {
    let g = toy_grammar();
    let trees = corpus(32);
    let sentences: Vec<Vec<&str>> = trees.iter().map(|t| t.words()).collect();
    c.bench_function("cky_32_sentences", |b| {
        b.iter(|| {
            for s in &sentences {
                black_box(cky_parse(&g, s));
            }
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = training, parsing
}
criterion_main!(benches);
