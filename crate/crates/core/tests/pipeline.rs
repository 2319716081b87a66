use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use synpg::parsegen::ParseGeneratorModel;
use synpg::parsekit::{pcfg_sample, toy_grammar, ParseTree, Template};
use synpg::pipeline::{
    ngram_overlap, paraphrase_from_template, postprocess_filter, run_batch, similarity_proxy,
    FilterThresholds, PipelineError,
};
use synpg::synpg::SynPGModel;
use synpg::tokenizer::{build_vocab_from_trees, encode, TokenClass, TokenSequence};

fn corpus(n: usize, seed: u64) -> Vec<ParseTree> {
    let g = toy_grammar();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n).map(|_| pcfg_sample(&g, &mut rng, 12).unwrap().1).collect()
}

fn setup() -> (Vec<ParseTree>, SynPGModel) {
    let trees = corpus(60, 4);
    let vocab = build_vocab_from_trees(&trees, 1, 10_000).unwrap();
    let model = SynPGModel::new(vocab, true, 1).unwrap();
    (trees, model)
}

fn words(model: &SynPGModel, tree: &ParseTree) -> TokenSequence {
    encode(&tree.words(), &model.vocab, TokenClass::Word)
}

#[test]
fn similarity_is_reflexive_symmetric_and_order_free() {
    let (trees, model) = setup();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    for pair in trees.chunks(2).take(20) {
        let (a, b) = (words(&model, &pair[0]), words(&model, &pair[1]));
        assert!((similarity_proxy(&model, &a, &a).unwrap() - 1.0).abs() < 1e-9);
        let ab = similarity_proxy(&model, &a, &b).unwrap();
        let ba = similarity_proxy(&model, &b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
        let mut shuffled = a.clone();
        shuffled.ids.shuffle(&mut rng);
        assert!((similarity_proxy(&model, &a, &shuffled).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn identical_candidate_passes_default_filter() {
    let (trees, model) = setup();
    for t in trees.iter().take(10) {
        let s = words(&model, t);
        assert_eq!(postprocess_filter(&s, &s, &model, &FilterThresholds::default()), Ok(()));
    }
}

#[test]
fn disabled_thresholds_pass_everything() {
    let (trees, model) = setup();
    let empty = TokenSequence {
        ids: vec![],
        class: TokenClass::Word,
    };
    for pair in trees.chunks(2).take(15) {
        let (a, b) = (words(&model, &pair[0]), words(&model, &pair[1]));
        assert_eq!(postprocess_filter(&a, &b, &model, &FilterThresholds::disabled()), Ok(()));
        assert_eq!(postprocess_filter(&a, &empty, &model, &FilterThresholds::disabled()), Ok(()));
    }
    let strict = FilterThresholds {
        min_ngram_overlap: 1.0,
        min_similarity: 1.0,
    };
    let (a, b) = (words(&model, &trees[0]), words(&model, &trees[1]));
    if ngram_overlap(&a.ids, &b.ids).unwrap() < 1.0 {
        assert!(postprocess_filter(&a, &b, &model, &strict).is_err());
    }
}

#[test]
fn incompatible_template_is_a_structured_rejection() {
    let (trees, model) = setup();
    let parsegen = ParseGeneratorModel::new(model.vocab.clone(), 2).unwrap();
    let alien: Template = "(FRAG(QQ)(ZZ))".parse().unwrap();
    for t in trees.iter().take(5) {
        let s = words(&model, t);
        let r = paraphrase_from_template(&model, &parsegen, &s, t, &alien, &FilterThresholds::default());
        if let Err(reason) = r {
            assert!(!reason.to_string().is_empty());
        }
    }
}

#[test]
fn batch_reports_rejections_and_bad_lines() {
    let (trees, model) = setup();
    let parsegen = ParseGeneratorModel::new(model.vocab.clone(), 2).unwrap();
    let line = |t: &ParseTree| format!("{}\t{t}\t(S(NP)(VP)(.))", t.words().join(" "));
    let input = format!("{}\n\n{}\n", line(&trees[0]), line(&trees[1]));
    let out = run_batch(&model, &parsegen, &input, &FilterThresholds::default()).unwrap();
    assert_eq!(out.lines().count(), 2);
    for l in out.lines() {
        let status = l.rsplit('\t').next().unwrap();
        assert!(
            ["ok", "parse-failure", "generation-failure", "overlap-too-low", "similarity-too-low"]
                .contains(&status),
            "{l}"
        );
    }
    let bad = format!("{}\nonly one field\n", line(&trees[0]));
    match run_batch(&model, &parsegen, &bad, &FilterThresholds::default()) {
        Err(PipelineError::BatchLine { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a line error, got {other:?}"),
    }
}
