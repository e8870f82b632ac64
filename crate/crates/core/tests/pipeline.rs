use std::fs;

use spatialqa_core::error::Error;
use spatialqa_core::model::{Span, Vocabulary};
use spatialqa_core::parser::solve;
use spatialqa_core::pipeline::{
    build_record, corpus_stats, generate_corpus, generate_split, read_jsonl, verify_corpus,
    verify_records, PipelineConfig, Resources,
};
use spatialqa_core::sampler::{export_scene, import_scene, sample_scene, SamplerConfig};

fn small(train: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.splits.train = train;
    cfg.splits.dev = 0;
    cfg.splits.test_seen = 0;
    cfg.splits.test_unseen = 0;
    cfg
}

#[test]
fn same_config_gives_identical_files() {
    let mut cfg = small(30);
    cfg.splits.test_unseen = 10;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = generate_corpus(&cfg, a.path()).unwrap();
    let mb = generate_corpus(&cfg, b.path()).unwrap();
    assert_eq!(ma, mb);
    for f in ["train.jsonl", "test_unseen.jsonl", "manifest.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    cfg.seed += 1;
    let c = tempfile::tempdir().unwrap();
    generate_corpus(&cfg, c.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("train.jsonl")).unwrap(),
        fs::read(c.path().join("train.jsonl")).unwrap()
    );
}

#[test]
fn records_do_not_depend_on_split_size() {
    let cfg = small(0);
    let res = Resources::load(&cfg).unwrap();
    let few = generate_split(&cfg, &res, "dev", 5).unwrap();
    let more = generate_split(&cfg, &res, "dev", 9).unwrap();
    assert_eq!(few[..], more[..5]);
    let other = generate_split(&cfg, &res, "test_seen", 5).unwrap();
    assert_ne!(few[0].scene, other[0].scene);
}

#[test]
fn zero_counts_give_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(&small(0), dir.path()).unwrap();
    assert!(m.splits.is_empty());
    assert!(dir.path().join("manifest.json").exists());
    let report = verify_corpus(dir.path(), &small(0)).unwrap();
    assert!(report.ok());
    let stats = corpus_stats(&[]);
    assert_eq!(stats.records, 0);
}

#[test]
fn fresh_corpus_verifies() {
    let mut cfg = small(40);
    cfg.splits.test_unseen = 20;
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(&cfg, dir.path()).unwrap();
    assert_eq!(m.splits["train"].total_questions, 40 * 8);
    let report = verify_corpus(dir.path(), &cfg).unwrap();
    for c in &report.checks {
        assert!(c.ok(), "{c:?}");
        assert!(c.passed > 0, "{} never ran", c.name);
    }
    let unseen = read_jsonl(&dir.path().join("test_unseen.jsonl")).unwrap();
    assert!(unseen
        .iter()
        .all(|r| r.provenance.vocabulary == Vocabulary::Unseen));
}

#[test]
fn corrupted_gold_is_reported() {
    let cfg = small(0);
    let res = Resources::load(&cfg).unwrap();
    let mut records = generate_split(&cfg, &res, "train", 3).unwrap();
    let gold = records[1].questions[6].gold.as_mut().unwrap();
    gold.labels = vec![if gold.labels[0] == "Yes" { "No" } else { "Yes" }.to_string()];
    let report = verify_records(&records, &cfg, &res);
    let solve = report
        .checks
        .iter()
        .find(|c| c.name == "solver matches gold")
        .unwrap();
    assert_eq!(solve.failed, 1);
    assert!(
        solve.examples[0].starts_with("train #1"),
        "{:?}",
        solve.examples
    );
}

#[test]
fn shuffled_spans_are_reported() {
    let cfg = small(0);
    let res = Resources::load(&cfg).unwrap();
    let mut records = generate_split(&cfg, &res, "train", 2).unwrap();
    let ann = &mut records[0].annotations.sprl;
    let i = ann.iter().position(|a| !a.triplets.is_empty()).unwrap();
    let t = &mut ann[i].triplets[0];
    t.indicator = Span::new(t.indicator.start + 1, t.indicator.end + 1);
    let report = verify_records(&records, &cfg, &res);
    let sprl = report
        .checks
        .iter()
        .find(|c| c.name == "spatial role spans are aligned")
        .unwrap();
    assert_eq!(sprl.failed, 1);
}

#[test]
fn schema_errors_carry_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(2);
    generate_corpus(&cfg, dir.path()).unwrap();
    let path = dir.path().join("train.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"scene\": 3}\n");
    fs::write(&path, text).unwrap();
    match read_jsonl(&path) {
        Err(Error::Schema { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("scene"), "{message}");
        }
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn imported_scene_builds_the_same_record() {
    let cfg = small(0);
    let res = Resources::load(&cfg).unwrap();
    let scene = sample_scene(&SamplerConfig {
        seed: 7,
        ..cfg.sampler.clone()
    })
    .unwrap();
    let back = import_scene(export_scene(&scene).as_bytes()).unwrap();
    assert_eq!(back, scene);
    let (a, _) = build_record(&scene, &cfg, &res, 11).unwrap();
    let (b, _) = build_record(&back, &cfg, &res, 11).unwrap();
    assert_eq!(a, b);
    let story = a.story.text();
    for q in &a.questions {
        assert_eq!(
            solve(&story, &q.text, &res.grammar, None).unwrap().labels,
            q.gold_labels()
        );
    }
}

#[test]
fn config_overrides_and_unknown_keys() {
    let cfg =
        PipelineConfig::from_toml("seed = 5\n[sampler]\nblock_count = { min = 2, max = 2 }\n")
            .unwrap();
    assert_eq!(cfg.seed, 5);
    assert_eq!(cfg.sampler.block_count.max, 2);
    let err = PipelineConfig::from_toml("[sampler]\nblocks = 2\n").unwrap_err();
    assert!(err.to_string().contains("blocks"), "{err}");
    let o = cfg
        .with_overrides(&["questions.per_type=3".into(), "output_dir=out".into()])
        .unwrap();
    assert_eq!(o.questions.per_type, 3);
    assert_eq!(o.output_dir.to_str(), Some("out"));
    assert!(cfg.with_overrides(&["questions.nope=1".into()]).is_err());
    assert_ne!(cfg.hash(), o.hash());
}

#[test]
fn documented_config_is_the_default() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    assert_eq!(PipelineConfig::load(&path).unwrap(), PipelineConfig::default());
}
