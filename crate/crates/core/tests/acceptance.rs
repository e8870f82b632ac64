//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use spatialqa_core::answers::candidates;
use spatialqa_core::grammar::Grammar;
use spatialqa_core::model::{labels, DatasetRecord, QType};
use spatialqa_core::parser::{normalized_facts, parse_story, solve};
use spatialqa_core::pipeline::{
    corpus_stats, generate_corpus, generate_split, PipelineConfig, Resources,
};
use spatialqa_core::variants::{converse_labels, make_unseen};

use common::*;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn within(value: f64, target: f64, tolerance: f64) -> bool {
    (value - target).abs() <= target * tolerance
}

fn in_time(o: Outcome, took: Duration, limit: Duration) -> Outcome {
    let ok = o.ok && took <= limit;
    let mut detail = o.detail;
    if took > limit {
        detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
    }
    outcome(ok, detail)
}

fn closure_soundness() -> Outcome {
    let mut checked = 0;
    for seed in 0..1000 {
        let (scene, facts) = scene_and_facts(&small_scenes(seed));
        if scene.objects.len() > 6 {
            return outcome(
                false,
                format!("seed {seed}: {} objects", scene.objects.len()),
            );
        }
        let c = closed(&facts);
        if let Some(f) = geometry_violation(&scene, &c) {
            return outcome(false, format!("seed {seed}: {f} contradicts the scene"));
        }
        let (expected, excluded) = oracle(&facts, true);
        if closure_relations(&c) != expected {
            return outcome(
                false,
                format!("seed {seed}: closure differs from the path oracle"),
            );
        }
        if excluded.iter().any(|&(x, b)| !c.is_excluded(x, b)) {
            return outcome(false, format!("seed {seed}: missing exclusion"));
        }
        checked += c.len();
    }
    outcome(true, format!("1000 scenes, {checked} entailed facts"))
}

fn unknown_regression(g: &Grammar) -> Outcome {
    let story = "A blue circle is above a big triangle. To the left of the big triangle, there is a square.";
    let ask = |q: &str| {
        solve(story, q, g, None)
            .map(|a| a.labels)
            .unwrap_or_else(|e| vec![e.to_string()])
    };
    let yn = ask("Is the square to the left of the blue circle?");
    let fr = ask("What is the relation between the square and the blue circle?");
    let back = ask("What is the relation between the blue circle and the square?");
    let ok = yn == ["DK"] && fr == ["DK"] && back == ["DK"];
    outcome(ok, format!("YN {yn:?}, FR {fr:?}, converse FR {back:?}"))
}

fn story_statistics(records: &[DatasetRecord]) -> Outcome {
    let s = corpus_stats(records);
    let bounded = records.iter().all(|r| {
        (3..=22).contains(&r.story.sentences.len()) && (66..=274).contains(&r.story.token_count)
    });
    let ok = bounded
        && within(s.sentences.mean, 9.0, 0.25)
        && within(s.story_tokens.mean, 118.0, 0.25)
        && within(s.question_tokens.mean, 23.0, 0.25);
    outcome(
        ok,
        format!(
            "{} stories, sentences {:.2} [{}, {}], tokens {:.2} [{}, {}], question tokens {:.2}",
            s.records,
            s.sentences.mean,
            s.sentences.min,
            s.sentences.max,
            s.story_tokens.mean,
            s.story_tokens.min,
            s.story_tokens.max,
            s.question_tokens.mean
        ),
    )
}

fn train_scale(records: &[DatasetRecord]) -> Outcome {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for q in records.iter().flat_map(|r| &r.questions) {
        *counts.entry(q.qtype.name()).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let per_type = QType::ALL.iter().all(|t| {
        within(
            counts.get(t.name()).copied().unwrap_or(0) as f64,
            93_673.0 / 4.0,
            0.10,
        )
    });
    outcome(
        per_type && within(total as f64, 93_673.0, 0.10),
        format!("{total} questions {counts:?}"),
    )
}

fn label_coverage(records: &[DatasetRecord]) -> Outcome {
    let mut seen: BTreeMap<QType, BTreeSet<String>> = BTreeMap::new();
    let mut possible: BTreeMap<QType, BTreeSet<String>> = BTreeMap::new();
    let (mut yn, mut dk) = (0usize, 0usize);
    for r in records {
        for q in &r.questions {
            seen.entry(q.qtype)
                .or_default()
                .extend(q.gold_labels().iter().cloned());
            possible
                .entry(q.qtype)
                .or_default()
                .extend(candidates(q.qtype, &r.story.entities));
            if q.qtype == QType::YN {
                yn += 1;
                dk += usize::from(q.gold_labels() == [labels::DK]);
            }
        }
    }
    let missing: Vec<String> = possible
        .iter()
        .flat_map(|(t, all)| {
            let s = seen.get(t);
            all.iter()
                .filter(move |l| !s.is_some_and(|s| s.contains(*l)))
                .map(move |l| format!("{}:{l}", t.name()))
        })
        .collect();
    let fraction = dk as f64 / yn.max(1) as f64;
    let questions: usize = records.iter().map(|r| r.questions.len()).sum();
    outcome(
        missing.is_empty() && (0.05..=0.50).contains(&fraction),
        format!("{questions} questions, missing labels {missing:?}, YN DK fraction {fraction:.3}"),
    )
}

fn round_trip(records: &[DatasetRecord], g: &Grammar) -> Outcome {
    let mut failed = Vec::new();
    for r in records {
        let same = parse_story(&r.story.text(), g, None).is_ok_and(|p| {
            normalized_facts(&p.facts, &p.entities)
                == normalized_facts(&r.story.facts, &r.story.entities)
        });
        if !same {
            failed.push(r.provenance.index);
        }
    }
    outcome(
        failed.is_empty(),
        format!(
            "{} stories, failures {:?}",
            records.len(),
            &failed[..failed.len().min(5)]
        ),
    )
}

fn solver_agreement(records: &[DatasetRecord], g: &Grammar) -> Outcome {
    let mut n = 0;
    let mut failed = Vec::new();
    for r in records {
        let story = r.story.text();
        for q in &r.questions {
            n += 1;
            let ok = solve(&story, &q.text, g, None).is_ok_and(|a| a.labels == q.gold_labels());
            if !ok {
                failed.push(format!("#{} {}", r.provenance.index, q.text));
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!(
            "{n} questions, {} disagreements {:?}",
            failed.len(),
            failed.first()
        ),
    )
}

fn variant_guarantees(records: &[DatasetRecord], res: &Resources) -> Outcome {
    let (mut contrast, mut contrast_bad) = (0, 0);
    let (mut consistency, mut consistency_bad) = (0, 0);
    for r in records {
        let Some(v) = &r.variants else { continue };
        let blocks: Vec<String> = r
            .story
            .entities
            .blocks_by_name()
            .into_iter()
            .map(|b| b.name.clone())
            .collect();
        for item in &v.contrast {
            contrast += 1;
            contrast_bad +=
                usize::from(r.questions[item.pivot].gold_labels() == item.question.gold_labels());
        }
        for item in &v.consistency {
            consistency += 1;
            let pivot = &r.questions[item.pivot];
            let expected = converse_labels(pivot.qtype, pivot.gold_labels(), &blocks);
            consistency_bad += usize::from(item.question.gold_labels() != expected);
        }
    }
    // unseen vocabulary: stored and re-solved answers stay the same
    let (mut unseen, mut unseen_bad) = (0, 0);
    for r in records {
        if unseen >= 1000 {
            break;
        }
        let Ok(u) = make_unseen(r, &res.unseen) else {
            unseen_bad += r.questions.len();
            continue;
        };
        let story = u.story.text();
        for (q, mapped) in r.questions.iter().zip(&u.questions) {
            unseen += 1;
            let solved = solve(&story, &mapped.text, &res.grammar, Some(&res.unseen));
            let same = mapped.gold_labels() == q.gold_labels()
                && solved.is_ok_and(|a| a.labels == q.gold_labels())
                && mapped.text != q.text;
            unseen_bad += usize::from(!same);
        }
    }
    let ok = contrast > 0 && consistency > 0 && contrast_bad + consistency_bad + unseen_bad == 0;
    outcome(
        ok,
        format!(
            "contrast {contrast} ({contrast_bad} unchanged), consistency {consistency} ({consistency_bad} wrong), unseen {unseen} ({unseen_bad} changed)"
        ),
    )
}

fn determinism() -> Outcome {
    let mut cfg = PipelineConfig::default();
    cfg.splits.train = 150;
    cfg.splits.dev = 30;
    cfg.splits.test_seen = 30;
    cfg.splits.test_unseen = 30;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = generate_corpus(&cfg, a.path()).and_then(|_| generate_corpus(&cfg, b.path())) {
        return outcome(false, e.to_string());
    }
    let mut files = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        files += 1;
        if std::fs::read(a.path().join(&name)).ok() != std::fs::read(b.path().join(&name)).ok() {
            return outcome(false, format!("{} differs", name.to_string_lossy()));
        }
    }
    outcome(
        files == 5,
        format!("{files} files identical across two runs"),
    )
}

fn main() {
    let cfg = PipelineConfig::default();
    let res = Resources::load(&cfg).expect("default resources load");
    let g = &res.grammar;
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    let t = Instant::now();
    let o = closure_soundness();
    results.push((
        1,
        "closure soundness",
        in_time(o, t.elapsed(), Duration::from_secs(30)),
    ));

    results.push((2, "unknown-answer regression", unknown_regression(g)));

    let t = Instant::now();
    let o = match generate_split(&cfg, &res, "train", 500) {
        Ok(records) => story_statistics(&records),
        Err(e) => outcome(false, e.to_string()),
    };
    results.push((
        3,
        "corpus statistics",
        in_time(o, t.elapsed(), Duration::from_secs(120)),
    ));

    let t = Instant::now();
    let train = generate_split(&cfg, &res, "train", cfg.splits.train);
    let took = t.elapsed();
    let train = match train {
        Ok(records) => {
            results.push((
                4,
                "train split scale",
                in_time(train_scale(&records), took, Duration::from_secs(900)),
            ));
            records
        }
        Err(e) => {
            results.push((4, "train split scale", outcome(false, e.to_string())));
            Vec::new()
        }
    };

    // 1250 stories at eight questions each
    let sample = &train[..train.len().min(1250)];
    results.push((5, "label coverage", label_coverage(sample)));
    results.push((
        6,
        "round trip",
        round_trip(&train[..train.len().min(1000)], g),
    ));
    results.push((7, "solver agreement", solver_agreement(sample, g)));
    results.push((8, "variant guarantees", variant_guarantees(sample, &res)));
    results.push((9, "determinism", determinism()));

    let mut all = true;
    for (n, name, o) in &results {
        all &= o.ok;
        println!(
            "{} criterion {n} {name}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if !all {
        std::process::exit(1);
    }
}
