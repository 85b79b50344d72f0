//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line and enforcing its runtime budget.
//!
//! Run with `cargo test -p factlens-core --test acceptance -- --nocapture`.

mod common;

use std::collections::BTreeMap;
use std::panic::UnwindSafe;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use factlens_core::corpus::{Article, OutletId};
use factlens_core::distinct::{self, SpanCounts};
use factlens_core::matcher::{
    self, cosine, match_day, partition, HashEmbedder, SimilarityTier, TierBounds,
};
use factlens_core::matcher::Embedder;
use factlens_core::metrics::{
    compare, funnel_report, probability, two_proportion_z, AppealBasis, CompareOptions,
    FeatureCounts, MetricKey, TierScope,
};
use factlens_core::parser::{
    parse_recover, parse_strict, serialize, untag, AnnotatedSentence, Naming, QuoteMode,
    SentenceId, SourceType, Span, TagKind,
};
use factlens_core::pipeline::{self, RunConfig};
use factlens_core::topics::{fit_term_docs, TopicModelConfig, Vocabulary};

fn criterion<F: FnOnce() + UnwindSafe>(n: u32, name: &str, budget: Duration, body: F) {
    let start = Instant::now();
    let result = std::panic::catch_unwind(body);
    let elapsed = start.elapsed();
    match &result {
        Ok(()) => println!("acceptance criterion {n} ({name}): PASS in {elapsed:.2?}"),
        Err(_) => println!("acceptance criterion {n} ({name}): FAIL in {elapsed:.2?}"),
    }
    if let Err(panic) = result {
        std::panic::resume_unwind(panic);
    }
    assert!(
        elapsed <= budget,
        "criterion {n} exceeded its runtime budget {budget:?} (took {elapsed:?})"
    );
}

// -----------------------------------------------------------------------
// 1. Parser fixtures
// -----------------------------------------------------------------------

#[derive(serde::Deserialize)]
struct AppendixCounts {
    fox: ArticleTally,
    cnn: ArticleTally,
}

#[derive(serde::Deserialize)]
struct ArticleTally {
    sentences: u64,
    factual_sentences: u64,
    fact_appeal_spans: u64,
    fact_no_appeal_spans: u64,
    sources_total: u64,
    sources_named: u64,
    sources_by_type: BTreeMap<String, u64>,
    quotes: QuoteTally,
    recipient_sentences: u64,
    source_attribute_sentences: u64,
    expert_keys: BTreeMap<String, u64>,
}

#[derive(serde::Deserialize)]
struct QuoteTally {
    direct: u64,
    indirect: u64,
}

fn check_appendix_article(name: &str, want: &ArticleTally) {
    let tagged = read_lines(&fixtures_dir().join("tagged").join(format!("{name}.txt")));
    let plain = read_lines(&fixtures_dir().join("tagged").join(format!("{name}_plain.txt")));
    assert_eq!(tagged.len(), plain.len());

    let mut sentences = Vec::new();
    for (i, line) in tagged.iter().enumerate() {
        let parsed = parse_strict(SentenceId::new(name, i), line)
            .unwrap_or_else(|errs| panic!("{name} line {i} strict errors: {errs:?}"));
        assert_eq!(untag(line), plain[i], "{name} line {i} untag mismatch");
        assert_eq!(parsed.text, plain[i]);
        sentences.push(parsed);
    }

    let mut got_sources_by_type: BTreeMap<String, u64> = BTreeMap::new();
    let mut got = ArticleTally {
        sentences: sentences.len() as u64,
        factual_sentences: 0,
        fact_appeal_spans: 0,
        fact_no_appeal_spans: 0,
        sources_total: 0,
        sources_named: 0,
        sources_by_type: BTreeMap::new(),
        quotes: QuoteTally { direct: 0, indirect: 0 },
        recipient_sentences: 0,
        source_attribute_sentences: 0,
        expert_keys: BTreeMap::new(),
    };
    for s in &sentences {
        let f = s.to_counts();
        got.factual_sentences += f.is_factual as u64;
        got.fact_appeal_spans += f.n_fact_appeal as u64;
        got.fact_no_appeal_spans += f.n_fact_no_appeal as u64;
        for ((naming, source_type), n) in &f.sources {
            got.sources_total += *n as u64;
            if *naming == Some(Naming::Named) {
                got.sources_named += *n as u64;
            }
            if let Some(st) = source_type {
                *got_sources_by_type.entry(st.label().to_string()).or_insert(0) += *n as u64;
            }
        }
        got.quotes.direct += f.quotes.get(&QuoteMode::Direct).copied().unwrap_or(0) as u64;
        got.quotes.indirect += f.quotes.get(&QuoteMode::Indirect).copied().unwrap_or(0) as u64;
        got.recipient_sentences += f.has_recipient as u64;
        got.source_attribute_sentences += f.has_source_attribute as u64;
        for text in &f.expert_span_texts {
            if let Some(key) = distinct::normalize_key(text) {
                *got.expert_keys.entry(key).or_insert(0) += 1;
            }
        }
    }

    assert_eq!(got.sentences, want.sentences, "{name} sentences");
    assert_eq!(got.factual_sentences, want.factual_sentences, "{name} factual");
    assert_eq!(got.fact_appeal_spans, want.fact_appeal_spans, "{name} appeals");
    assert_eq!(got.fact_no_appeal_spans, want.fact_no_appeal_spans, "{name} brute facts");
    assert_eq!(got.sources_total, want.sources_total, "{name} sources");
    assert_eq!(got.sources_named, want.sources_named, "{name} named sources");
    assert_eq!(got_sources_by_type, want.sources_by_type, "{name} source types");
    assert_eq!(got.quotes.direct, want.quotes.direct, "{name} direct quotes");
    assert_eq!(got.quotes.indirect, want.quotes.indirect, "{name} indirect quotes");
    assert_eq!(got.recipient_sentences, want.recipient_sentences, "{name} recipients");
    assert_eq!(
        got.source_attribute_sentences, want.source_attribute_sentences,
        "{name} source attributes"
    );
    assert_eq!(got.expert_keys, want.expert_keys, "{name} expert keys");
}

#[test]
fn criterion_1_parser_fixtures() {
    criterion(1, "parser fixtures", Duration::from_secs(1), || {
        let counts: AppendixCounts = serde_json::from_str(
            &std::fs::read_to_string(fixtures_dir().join("tagged").join("appendix_counts.json"))
                .unwrap(),
        )
        .unwrap();
        check_appendix_article("appendix_fox", &counts.fox);
        check_appendix_article("appendix_cnn", &counts.cnn);

        // The running example: exactly four spans with these kinds and
        // attributes.
        let example = &read_lines(&fixtures_dir().join("tagged").join("example1.txt"))[0];
        let parsed = parse_strict(SentenceId::new("example1", 0), example).expect("strict");
        assert_eq!(parsed.spans.len(), 4);
        assert_eq!(parsed.spans[0].kind, TagKind::Source);
        assert_eq!(parsed.spans[0].naming, Some(Naming::Named));
        assert_eq!(parsed.spans[0].source_type, Some(SourceType::Official));
        assert!(parsed.span_text(&parsed.spans[0]).starts_with("Doug Ericksen"));
        assert_eq!(parsed.spans[1].kind, TagKind::SourceAttribute);
        assert_eq!(parsed.spans[2].kind, TagKind::Recipient);
        assert_eq!(parsed.span_text(&parsed.spans[2]), "National Public Radio");
        assert_eq!(parsed.spans[3].kind, TagKind::FactAppeal);
        assert_eq!(parsed.spans[3].quote, Some(QuoteMode::Direct));
        assert!(parsed.text.starts_with("Doug Ericksen, the EPA's communications director"));
    });
}

// -----------------------------------------------------------------------
// 2. Parser round-trip property
// -----------------------------------------------------------------------

const TEXT_ALPHABET: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'w', 'x', 'y', 'z', 'A', 'B', 'Q', '0', '7', ' ', ' ', ' ', '.',
    ',', ';', '\'', '"', '-', '\u{e9}', '\u{2014}', '\u{201c}', '>', ')',
];

const MUTATION_ALPHABET: &[char] = &[
    '<', '>', '/', 'a', 'Z', '_', ' ', '"', 'S', 'F', '.', '\u{e9}',
];

fn random_text(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| TEXT_ALPHABET[rng.gen_range(0..TEXT_ALPHABET.len())]).collect()
}

fn random_kind(rng: &mut ChaCha8Rng) -> TagKind {
    const KINDS: [TagKind; 7] = [
        TagKind::FactNoAppeal,
        TagKind::FactAppeal,
        TagKind::Source,
        TagKind::SourceAttribute,
        TagKind::Recipient,
        TagKind::Time,
        TagKind::Location,
    ];
    KINDS[rng.gen_range(0..KINDS.len())]
}

fn make_span(rng: &mut ChaCha8Rng, start: usize, end: usize, parent: Option<usize>) -> Span {
    let kind = random_kind(rng);
    let naming = match kind {
        TagKind::Source if rng.gen_bool(0.8) => {
            Some(if rng.gen_bool(0.5) { Naming::Named } else { Naming::Unnamed })
        }
        _ => None,
    };
    let source_type = match kind {
        TagKind::Source if rng.gen_bool(0.8) => {
            Some(SourceType::ALL[rng.gen_range(0..SourceType::ALL.len())])
        }
        _ => None,
    };
    let quote = match kind {
        TagKind::FactAppeal if rng.gen_bool(0.8) => {
            Some(if rng.gen_bool(0.5) { QuoteMode::Direct } else { QuoteMode::Indirect })
        }
        _ => None,
    };
    Span { kind, naming, source_type, quote, start, end, parent }
}

/// Random nested, non-overlapping spans over [lo, hi), document order.
fn gen_spans(
    rng: &mut ChaCha8Rng,
    lo: usize,
    hi: usize,
    parent: Option<usize>,
    depth: usize,
    out: &mut Vec<Span>,
) {
    if depth == 0 || hi - lo < 2 || out.len() > 12 {
        return;
    }
    let mut cursor = lo;
    for _ in 0..rng.gen_range(0..=2) {
        if hi - cursor < 2 {
            break;
        }
        let start = rng.gen_range(cursor..hi - 1);
        let end = rng.gen_range(start + 1..=hi);
        let idx = out.len();
        out.push(make_span(rng, start, end, parent));
        gen_spans(rng, start, end, Some(idx), depth - 1, out);
        cursor = end;
    }
}

fn random_sentence(rng: &mut ChaCha8Rng, index: usize) -> AnnotatedSentence {
    let len = rng.gen_range(8..80);
    let text = random_text(rng, len);
    let mut spans = Vec::new();
    gen_spans(rng, 0, len, None, 3, &mut spans);
    AnnotatedSentence { sentence_id: SentenceId::new("gen", index), text, spans }
}

#[test]
fn criterion_2_parser_round_trip() {
    criterion(2, "parser round-trip and recovery", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
        let tag_pattern = regex::Regex::new(
            r"</?[A-Za-z_][A-Za-z0-9_]*(?: +[A-Za-z_][A-Za-z0-9_]*)* *>",
        )
        .unwrap();

        let mut serialized = Vec::with_capacity(10_000);
        for i in 0..10_000 {
            let sentence = random_sentence(&mut rng, i);
            let wire = serialize(&sentence);
            let reparsed = parse_strict(SentenceId::new("gen", i), &wire)
                .unwrap_or_else(|e| panic!("reparse failed for {wire:?}: {e:?}"));
            assert_eq!(reparsed, sentence, "parse(serialize(t)) != t for {wire:?}");
            assert_eq!(serialize(&reparsed), wire, "serialize not a fixed point");
            serialized.push(wire);
        }

        for (i, wire) in serialized.iter().enumerate() {
            // Corrupt with random edits; recovery must never panic and must
            // keep every non-tag character (checked against an independent
            // regex-stripping oracle).
            let mut chars: Vec<char> = wire.chars().collect();
            for _ in 0..rng.gen_range(1..=5) {
                let op = rng.gen_range(0..3);
                match op {
                    0 if !chars.is_empty() => {
                        let at = rng.gen_range(0..chars.len());
                        chars.remove(at);
                    }
                    1 => {
                        let at = rng.gen_range(0..=chars.len());
                        let c = MUTATION_ALPHABET[rng.gen_range(0..MUTATION_ALPHABET.len())];
                        chars.insert(at, c);
                    }
                    _ if !chars.is_empty() => {
                        let at = rng.gen_range(0..chars.len());
                        chars[at] = MUTATION_ALPHABET[rng.gen_range(0..MUTATION_ALPHABET.len())];
                    }
                    _ => {}
                }
            }
            let corrupted: String = chars.into_iter().collect();
            let (sentence, _errors) = parse_recover(SentenceId::new("mut", i), &corrupted);
            let oracle = tag_pattern.replace_all(&corrupted, "");
            assert_eq!(
                sentence.text, oracle,
                "recovery altered non-tag characters of {corrupted:?}"
            );
            for span in &sentence.spans {
                assert!(span.start < span.end);
                assert!(span.end <= sentence.text.chars().count());
            }
        }
    });
}

// -----------------------------------------------------------------------
// 3. Matching oracle
// -----------------------------------------------------------------------

fn random_title(rng: &mut ChaCha8Rng) -> String {
    const VOCAB: [&str; 24] = [
        "court", "virus", "cases", "election", "storm", "market", "season", "vaccine",
        "budget", "police", "school", "senate", "ruling", "outbreak", "playoff", "trade",
        "mayor", "strike", "flood", "hearing", "tax", "border", "coach", "launch",
    ];
    let n = rng.gen_range(3..=8);
    (0..n).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

#[test]
fn criterion_3_matching_oracle() {
    criterion(3, "matching oracle", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
        let embedder = HashEmbedder::default();
        let bounds = TierBounds::default();
        let cnn = OutletId::new("cnn").unwrap();
        let fox = OutletId::new("fox").unwrap();

        for day_no in 0..50u32 {
            let day = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
                + chrono::Days::new(day_no as u64 % 28);
            let make_side = |rng: &mut ChaCha8Rng, outlet: &OutletId, prefix: &str| {
                let n = rng.gen_range(0..=20);
                (0..n)
                    .map(|i| Article {
                        id: format!("{prefix}{i:02}"),
                        outlet: outlet.clone(),
                        day,
                        title: random_title(rng),
                        body: String::new(),
                        url: None,
                    })
                    .collect::<Vec<_>>()
            };
            let side_a = make_side(&mut rng, &cnn, "a");
            let side_b = make_side(&mut rng, &fox, "b");

            let mut embeddings = BTreeMap::new();
            for article in side_a.iter().chain(&side_b) {
                let vector = embedder.embed_batch(&[article.title.clone()]).unwrap().remove(0);
                embeddings.insert(article.id.clone(), vector);
            }

            let records = match_day(day, &side_a, &side_b, &embeddings, &bounds).unwrap();
            assert_eq!(records.len(), side_a.len() + side_b.len(), "coverage");

            // Exhaustive pairwise brute force, exact equality.
            for record in &records {
                let (own, opposing): (&[Article], &[Article]) = if record.outlet == cnn {
                    (&side_a, &side_b)
                } else {
                    (&side_b, &side_a)
                };
                let me = own.iter().find(|a| a.id == record.article_id).unwrap();
                let mut best: Option<(f64, &str)> = None;
                for other in opposing {
                    let sim = cosine(&embeddings[&me.id], &embeddings[&other.id]).unwrap();
                    let better = match best {
                        None => true,
                        Some((bs, bid)) => sim > bs || (sim == bs && other.id.as_str() < bid),
                    };
                    if better {
                        best = Some((sim, &other.id));
                    }
                }
                match best {
                    None => {
                        assert_eq!(record.tier, SimilarityTier::Unmatched);
                        assert!(record.sim.is_none());
                    }
                    Some((sim, id)) => {
                        assert_eq!(record.sim, Some(sim), "sim for {}", record.article_id);
                        assert_eq!(record.best_counterpart_id.as_deref(), Some(id));
                        assert_eq!(record.tier, bounds.tier_for(sim));
                    }
                }
            }

            // Tier partition is total and disjoint.
            let counts = partition(&records);
            assert_eq!(counts.total(), records.len() as u64);
        }

        // Boundary rules and the published ten-sim tier mapping.
        let bounds = TierBounds::default();
        assert_eq!(bounds.tier_for(0.30), SimilarityTier::Low);
        assert_eq!(bounds.tier_for(0.60), SimilarityTier::High);
        let published = [0.92, 0.81, 0.73, 0.68, 0.52, 0.49, 0.36, 0.30, 0.20, 0.10];
        let records: Vec<matcher::MatchRecord> = published
            .iter()
            .enumerate()
            .map(|(i, &sim)| matcher::MatchRecord {
                article_id: format!("t{i}"),
                outlet: OutletId::new("cnn").unwrap(),
                day: chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(),
                best_counterpart_id: Some("x".into()),
                sim: Some(sim),
                tier: bounds.tier_for(sim),
            })
            .collect();
        let counts = partition(&records);
        assert_eq!((counts.high, counts.mid, counts.low, counts.unmatched), (4, 3, 3, 0));
    });
}

// -----------------------------------------------------------------------
// 4. Metrics exactness
// -----------------------------------------------------------------------

#[test]
fn criterion_4_metrics_exactness() {
    criterion(4, "metrics exactness", Duration::from_secs(5), || {
        let expected = fixture_counts();
        let mut per_outlet_articles: BTreeMap<String, Vec<FeatureCounts>> = BTreeMap::new();

        for outlet in ["cnn", "fox"] {
            for article in fixture_articles(outlet) {
                let sentences = stub_parse_article(&article);
                let counts = article_counts(&article, &sentences);
                // Per-article tallies match the authored expectations.
                let want = &expected.articles[&article.id];
                assert_eq!(counts.sentences, want.sentences, "{} sentences", article.id);
                assert_eq!(counts.factual_sentences, want.factual, "{} factual", article.id);
                per_outlet_articles.entry(outlet.to_string()).or_default().push(counts);
            }
        }

        // The designated 4-sentence sub-fixture: P(fact|sentence) = 0.75.
        let sub = per_outlet_articles["cnn"]
            .iter()
            .find(|c| c.sentences == 4 && c.factual_sentences == 3)
            .expect("sub-fixture present");
        let (p, n) = probability(MetricKey::FactGivenSentence, sub, AppealBasis::SpanLevel).unwrap();
        assert_eq!(n, 4);
        assert!((p - 0.75).abs() < 1e-12);

        for outlet in ["cnn", "fox"] {
            let want = &expected.outlets[outlet];
            let total = FeatureCounts::combine(
                per_outlet_articles[outlet].iter(),
                per_outlet_articles[outlet][0].stratum.clone(),
            );
            // Outlet-level probabilities equal hand-derived fractions.
            let (p, n) =
                probability(MetricKey::FactGivenSentence, &total, AppealBasis::SpanLevel).unwrap();
            assert_eq!(n, want.sentences);
            assert!((p - want.factual as f64 / want.sentences as f64).abs() < 1e-12, "{outlet}");

            let (direct, _) = probability(
                MetricKey::QuoteModeShare(QuoteMode::Direct),
                &total,
                AppealBasis::SpanLevel,
            )
            .unwrap();
            let appeals = (want.direct + want.indirect) as f64;
            assert!((direct - want.direct as f64 / appeals).abs() < 1e-12);

            let (official, _) = probability(
                MetricKey::TypeGivenSource(SourceType::Official),
                &total,
                AppealBasis::SpanLevel,
            )
            .unwrap();
            let sources = (want.official + want.news_report) as f64;
            assert!((official - want.official as f64 / sources).abs() < 1e-12);

            // Source-type shares partition to one.
            let share_sum: f64 = SourceType::ALL
                .iter()
                .filter_map(|t| {
                    probability(MetricKey::TypeGivenSource(*t), &total, AppealBasis::SpanLevel)
                        .ok()
                        .map(|(p, _)| p)
                })
                .sum();
            assert!((share_sum - 1.0).abs() < 1e-12, "{outlet} share sum {share_sum}");
        }

        // Outlet swap negates every diff and z exactly.
        let opts = CompareOptions::default();
        let a = &per_outlet_articles["cnn"];
        let b = &per_outlet_articles["fox"];
        for metric in MetricKey::funnel() {
            let ab = compare(metric, TierScope::All, None, "fixture", a, b, &opts);
            let ba = compare(metric, TierScope::All, None, "fixture", b, a, &opts);
            match (ab.diff, ba.diff) {
                (Some(x), Some(y)) => {
                    assert_eq!(x, -y, "{}", ab.metric);
                    assert_eq!(ab.z.unwrap(), -ba.z.unwrap(), "{}", ab.metric);
                }
                (None, None) => {}
                _ => panic!("swap changed computability for {}", ab.metric),
            }
        }

        // Two-proportion z closed form.
        let z = two_proportion_z(0.6, 100, 0.5, 100);
        assert!((z - 1.423).abs() < 0.01, "z = {z}");

        // Funnel table for the sub-fixture equals the committed golden.
        let golden = read_lines(&fixtures_dir().join("goldens").join("funnel_cnn001.csv"));
        let rows = funnel_report(sub, AppealBasis::SpanLevel);
        assert_eq!(rows.len(), golden.len() - 1);
        for (row, line) in rows.iter().zip(golden.iter().skip(1)) {
            let parts: Vec<&str> = line.split(',').collect();
            assert_eq!(row.metric, parts[0]);
            let want_p: f64 = parts[1].parse().unwrap();
            assert_eq!(row.p.unwrap(), want_p, "{} p", row.metric);
            assert_eq!(row.n.to_string(), parts[2], "{} n", row.metric);
        }
    });
}

// -----------------------------------------------------------------------
// 5. Weighted log-odds
// -----------------------------------------------------------------------

#[test]
fn criterion_5_weighted_log_odds() {
    criterion(5, "weighted log-odds", Duration::from_secs(1), || {
        let make = |outlet: &str, entries: &[(&str, u64)]| {
            let mut counts = SpanCounts::new(OutletId::new(outlet).unwrap());
            for (key, n) in entries {
                counts.add(key.to_string(), *n);
            }
            counts
        };

        // Symmetric counts: z = 0 for every key.
        let a = make("cnn", &[("alpha", 4), ("beta", 6), ("gamma", 1)]);
        let b = make("fox", &[("alpha", 4), ("beta", 6), ("gamma", 1)]);
        for row in distinct::weighted_log_odds(&a, &b, 1.0) {
            assert_eq!(row.delta, 0.0);
            assert_eq!(row.z, 0.0);
        }

        // Antisymmetry under swap, exact.
        let a = make("cnn", &[("alpha", 9), ("beta", 1), ("gamma", 5)]);
        let b = make("fox", &[("alpha", 2), ("beta", 8), ("delta", 4)]);
        let ij: BTreeMap<String, (f64, f64)> = distinct::weighted_log_odds(&a, &b, 1.0)
            .into_iter()
            .map(|r| (r.key, (r.delta, r.z)))
            .collect();
        let ji: BTreeMap<String, (f64, f64)> = distinct::weighted_log_odds(&b, &a, 1.0)
            .into_iter()
            .map(|r| (r.key, (r.delta, r.z)))
            .collect();
        for (key, (delta, z)) in &ij {
            assert_eq!(*delta, -ji[key].0, "{key}");
            assert_eq!(*z, -ji[key].1, "{key}");
        }

        // Two-key fixture vs a direct evaluation of the formula, coded here
        // with plain scalar arithmetic.
        let a = make("cnn", &[("a", 9), ("b", 1)]);
        let b = make("fox", &[("a", 1), ("b", 9)]);
        let got = distinct::weighted_log_odds(&a, &b, 1.0);
        let (y_i, y_j) = ([9.0f64, 1.0], [1.0f64, 9.0]);
        let (n_i, n_j) = (10.0f64, 10.0f64);
        let alpha: Vec<f64> = (0..2).map(|w| 1.0 * (y_i[w] + y_j[w]) / (n_i + n_j)).collect();
        let cap_a: f64 = alpha.iter().sum();
        for w in 0..2 {
            let delta = ((y_i[w] + alpha[w]) / (n_i + cap_a - y_i[w] - alpha[w])).ln()
                - ((y_j[w] + alpha[w]) / (n_j + cap_a - y_j[w] - alpha[w])).ln();
            let variance = 1.0 / (y_i[w] + alpha[w]) + 1.0 / (y_j[w] + alpha[w]);
            let z = delta / variance.sqrt();
            let key = if w == 0 { "a" } else { "b" };
            let row = got.iter().find(|r| r.key == key).unwrap();
            assert!((row.delta - delta).abs() < 1e-9, "{key} delta");
            assert!((row.variance - variance).abs() < 1e-9, "{key} variance");
            assert!((row.z - z).abs() < 1e-9, "{key} z");
        }

        // Scaling all counts x10 strictly increases |z| for unequal keys.
        let a10 = make("cnn", &[("a", 90), ("b", 10)]);
        let b10 = make("fox", &[("a", 10), ("b", 90)]);
        let scaled = distinct::weighted_log_odds(&a10, &b10, 1.0);
        for (orig, big) in got.iter().zip(&scaled) {
            assert_eq!(orig.key, big.key);
            assert!(big.z.abs() > orig.z.abs(), "{}", orig.key);
        }
    });
}

// -----------------------------------------------------------------------
// 6. LDA
// -----------------------------------------------------------------------

#[test]
fn criterion_6_lda() {
    criterion(6, "lda determinism and recovery", Duration::from_secs(120), || {
        // 3 disjoint 20-term vocabularies, 1000 documents x 50 tokens.
        let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
        let mut docs = Vec::with_capacity(1000);
        let mut labels = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let topic = rng.gen_range(0..3usize);
            labels.push(topic);
            docs.push(
                (0..50).map(|_| topic * 20 + rng.gen_range(0..20usize)).collect::<Vec<_>>(),
            );
        }
        let ids: Vec<String> = (0..docs.len()).map(|i| format!("d{i}")).collect();
        let vocab = || Vocabulary::from_terms((0..60).map(|i| format!("w{i}")).collect());
        let config = TopicModelConfig {
            k: 3,
            alpha: 50.0 / 3.0,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            seed: 7,
            min_doc_freq: 1,
            max_doc_ratio: 1.0,
        };

        let first = fit_term_docs(&docs, vocab(), ids.clone(), &config).unwrap();
        let second = fit_term_docs(&docs, vocab(), ids.clone(), &config).unwrap();
        assert_eq!(first.doc_topic, second.doc_topic, "seeded runs must be bit-identical");
        assert_eq!(first.topic_word, second.topic_word);

        for row in first.doc_topic.iter().chain(&first.topic_word) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row sums to {sum}");
        }

        // Dominant-topic recovery >= 90% after best alignment.
        let assignments = first.assign_fitted();
        let perms: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms
            .iter()
            .map(|perm| {
                assignments
                    .iter()
                    .zip(&labels)
                    .filter(|(a, &want)| perm[a.topic as usize] == want)
                    .count()
            })
            .max()
            .unwrap();
        let accuracy = best as f64 / labels.len() as f64;
        assert!(accuracy >= 0.9, "recovery accuracy {accuracy}");

        // K = 1 degenerate case: smoothed corpus unigram distribution.
        let k1 = TopicModelConfig { k: 1, alpha: 50.0, iterations: 5, burn_in: 2, ..config };
        let degenerate = fit_term_docs(&docs, vocab(), ids, &k1).unwrap();
        assert!(degenerate.doc_topic.iter().all(|row| row == &vec![1.0]));
        let mut counts = vec![0u64; 60];
        let mut total = 0u64;
        for doc in &docs {
            for &w in doc {
                counts[w] += 1;
                total += 1;
            }
        }
        for (w, &c) in counts.iter().enumerate() {
            let want = (c as f64 + 0.01) / (total as f64 + 60.0 * 0.01);
            assert!(
                (degenerate.topic_word[0][w] - want).abs() < 1e-9,
                "unigram mismatch at {w}"
            );
        }
    });
}

// -----------------------------------------------------------------------
// 7. End-to-end reproducibility
// -----------------------------------------------------------------------

const OUT_FILES: [&str; 7] = [
    "assignments.csv",
    "comparisons.csv",
    "corpus_stats.csv",
    "expert_spans.csv",
    "matches.csv",
    "similarity_histogram.csv",
    "topics.csv",
];

const REPORT_FILES: [&str; 8] = [
    "appeal_characteristics.csv",
    "by_topic.csv",
    "expert_spans_distinctive.csv",
    "expert_spans_frequent.csv",
    "index.json",
    "key_probabilities.csv",
    "similarity_histogram.csv",
    "source_types.csv",
];

#[test]
fn criterion_7_end_to_end_reproducibility() {
    criterion(7, "end-to-end reproducibility", Duration::from_secs(60), || {
        let run_once = || {
            let tmp = tempfile::tempdir().unwrap();
            let mut config = RunConfig::load(&repo_root().join("run.toml")).unwrap();
            config.data_dir = tmp.path().to_path_buf();
            let outcome = pipeline::run(&config, &[], true).unwrap();
            assert_eq!(outcome.executed.len(), 9, "all stages execute on a fresh dir");
            (tmp, config)
        };
        let (dir_a, _) = run_once();
        let (dir_b, _) = run_once();

        for name in OUT_FILES {
            let a = std::fs::read(dir_a.path().join("out").join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join("out").join(name)).unwrap();
            assert_eq!(a, b, "out/{name} differs between consecutive runs");
            let golden = std::fs::read(fixtures_dir().join("goldens").join("out").join(name))
                .unwrap_or_else(|e| panic!("golden out/{name}: {e}"));
            assert_eq!(a, golden, "out/{name} differs from the committed golden");
        }
        for name in REPORT_FILES {
            let a = std::fs::read(dir_a.path().join("report").join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join("report").join(name)).unwrap();
            assert_eq!(a, b, "report/{name} differs between consecutive runs");
            let golden = std::fs::read(fixtures_dir().join("goldens").join("report").join(name))
                .unwrap_or_else(|e| panic!("golden report/{name}: {e}"));
            assert_eq!(a, golden, "report/{name} differs from the committed golden");
        }
    });
}

// -----------------------------------------------------------------------
// 8. Throughput budget
// -----------------------------------------------------------------------

#[test]
fn criterion_8_parse_throughput() {
    criterion(8, "parse throughput", Duration::from_secs(60), || {
        use factlens_core::annotate::stub_annotate;

        let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
        let agencies = ["Health Department", "City Council", "Election Board", "State Lab"];
        let outlets_news = ["NBC News", "ABC News", "The Daily Times"];
        let n = 50_000usize;
        let tagged: Vec<String> = (0..n)
            .map(|i| {
                let text = match i % 4 {
                    0 => format!(
                        "Case counts shifted again in district {i}, according to the {}.",
                        agencies[rng.gen_range(0..agencies.len())]
                    ),
                    1 => format!(
                        "Filings rose for a {i}th straight week, according to {}.",
                        outlets_news[rng.gen_range(0..outlets_news.len())]
                    ),
                    2 => format!("\"Reading number {i} surprised us,\" said Dr. Vance."),
                    _ => format!("Routine item number {i} drew little attention."),
                };
                stub_annotate(&text)
            })
            .collect();

        let start = Instant::now();
        let mut factual = 0u64;
        for (i, line) in tagged.iter().enumerate() {
            let (sentence, _) = parse_recover(SentenceId::new("bench", i), line);
            let features = sentence.to_counts();
            factual += features.is_factual as u64;
        }
        let elapsed = start.elapsed();
        let rate = n as f64 / elapsed.as_secs_f64();
        assert_eq!(factual, (n as u64 / 4) * 3, "sanity: three of four templates are factual");
        println!("  parse+count: {rate:.0} sentences/second/core");
        assert!(
            rate >= 20_000.0,
            "throughput {rate:.0} sentences/s below the 20k/s budget"
        );
    });
}
