//! Acceptance checks, one PASS/FAIL line per criterion. Run with
//! `cargo test -p framing-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Parser;
use framing::corpus::{split_paragraph, CorpusConfig, Instance};
use framing::groundtruth::{normalize_survey, SurveyTable};
use framing::measurement::{agglomerative_cluster, cosine_distance, kendall_tau, tau_b, DistanceMatrix};
use framing::promptgen::{
    expand_manual_templates, extract_shared_ngrams, generate_bigram_outer, generate_ngram_inner,
    MaskedPrompt, MinSources, NgramSet, TemplateSet, QA_CANDIDATES,
};
use framing::representation::{align, FramingMatrix, FramingScores, WeightedToken};
use framing::scorer::MASK;
use framing_cli::stages::{EvalDoc, MeasureDoc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 ------------------------------------------------------------------------

fn survey_values() -> Check {
    let csv = "\
outlet,All U.S. adults,Democrat/Lean Dem,Republican/Lean Rep,Conservative Rep
CNN,47%,67%,30%,22%
ABC News,33%,37%,30%,26%
Breitbart,4%,0%,8%,11%
";
    let table = SurveyTable::from_reader(csv.as_bytes(), None, "inline").map_err(|e| e.to_string())?;
    let profiles = normalize_survey(&table).map_err(|e| e.to_string())?;
    let get = |outlet: &str, cat: &str| {
        let p = profiles.iter().find(|p| p.outlet == outlet).unwrap();
        let i = p.categories.iter().position(|c| c == cat).unwrap();
        p.values[i]
    };
    let cases = [
        ("CNN", "Democrat/Lean Dem", 1.43),
        ("ABC News", "Democrat/Lean Dem", 1.12),
        ("Breitbart", "Republican/Lean Rep", 2.00),
        ("Breitbart", "Conservative Rep", 2.75),
        ("Breitbart", "Democrat/Lean Dem", 0.00),
    ];
    for (o, c, want) in cases {
        let got = get(o, c);
        ensure((got - want).abs() <= 0.005, || format!("{o} {c}: {got} vs {want}"))?;
    }
    Ok(format!("{} worked values within 0.005", cases.len()))
}

// 2 ------------------------------------------------------------------------

/// Pair-counting tau-b over score vectors; None when a side is all ties.
fn brute_tau(x: &[usize], y: &[usize]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[i] as i64 - x[j] as i64).signum();
            let dy = (y[i] as i64 - y[j] as i64).signum();
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if dx == dy => c += 1,
                _ => d += 1,
            }
        }
    }
    let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
    (denom > 0.0).then(|| (c - d) as f64 / denom)
}

fn groups(scores: &[usize]) -> Vec<Vec<String>> {
    let mut by: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, &s) in scores.iter().enumerate() {
        by.entry(s).or_default().push(format!("i{i}"));
    }
    by.into_values().collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    heap(n, &mut p, &mut out);
    out
}

fn compare_tau(x: &[usize], y: &[usize]) -> Result<(), String> {
    let want = brute_tau(x, y);
    let by_groups = kendall_tau(&groups(x), &groups(y)).ok();
    let by_ranks = tau_b(x, y).ok();
    for got in [by_groups, by_ranks] {
        match (got, want) {
            (Some(g), Some(w)) if (g - w).abs() <= 1e-12 => {}
            (None, None) => {}
            _ => return Err(format!("x={x:?} y={y:?}: got {got:?}, want {want:?}")),
        }
    }
    Ok(())
}

fn kendall_oracle() -> Check {
    let mut cases = 0;
    for n in 2..=7 {
        let ident: Vec<usize> = (0..n).collect();
        let perms = permutations(n);
        ensure(perms.len() == (1..=n).product::<usize>(), || "bad permutation count".into())?;
        for p in perms {
            compare_tau(&ident, &p)?;
            cases += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.random_range(2..=6);
        let levels = rng.random_range(1..=n);
        let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..levels)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..levels)).collect();
        compare_tau(&x, &y)?;
        cases += 1;
    }
    Ok(format!("{cases} cases exact to 1e-12"))
}

// 3 ------------------------------------------------------------------------

fn cosine_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 1e-9;
    let mut checked = 0;
    while checked < 10_000 {
        let dim = rng.random_range(1..=16);
        let nonneg = rng.random_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..dim)
                .map(|_| if nonneg { rng.random_range(0.0..10.0) } else { rng.random_range(-10.0..10.0) })
                .collect()
        };
        let u = draw(&mut rng);
        let v = draw(&mut rng);
        let (Ok(uv), Ok(vu), Ok(uu)) = (
            cosine_distance(&u, &v),
            cosine_distance(&v, &u),
            cosine_distance(&u, &u),
        ) else {
            continue;
        };
        let c = rng.random_range(0.01..100.0);
        let cu: Vec<f64> = u.iter().map(|x| x * c).collect();
        let cuv = cosine_distance(&cu, &v).map_err(|e| e.to_string())?;
        ensure(uu.abs() <= tol, || format!("d(u,u) = {uu}"))?;
        ensure((uv - vu).abs() <= tol, || format!("asymmetric: {uv} vs {vu}"))?;
        ensure((cuv - uv).abs() <= tol, || format!("scale: {cuv} vs {uv} (c={c})"))?;
        ensure((0.0..=2.0).contains(&uv), || format!("out of range: {uv}"))?;
        if nonneg {
            ensure(uv <= 1.0 + tol, || format!("nonnegative vectors gave {uv}"))?;
        }
        checked += 1;
    }
    Ok(format!("{checked} vector pairs within 1e-9"))
}

// 4, 5, 10 -----------------------------------------------------------------

fn run_pipeline(out: &Path) -> Result<(), String> {
    let config = fixture_dir().join("run.toml");
    let cli = framing_cli::Cli::try_parse_from([
        "framing".as_ref(),
        "--config".as_ref(),
        config.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
        "all".as_ref(),
    ])
    .map_err(|e| e.to_string())?;
    framing_cli::run(&cli).map_err(|e| format!("{e:#}"))
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn golden(out: &Path) -> Check {
    run_pipeline(out)?;
    let exp: Value = read(&fixture_dir().join("expected.json"))?;
    let sources: Vec<String> = serde_json::from_value(exp["sources"].clone()).unwrap();
    let mut taus = 0;
    let mut modes = BTreeSet::new();
    let mut methods = BTreeSet::new();
    for cell in exp["cells"].as_array().unwrap() {
        let (t, m, n) = (
            cell["topic"].as_str().unwrap(),
            cell["method"].as_str().unwrap(),
            cell["normalization"].as_str().unwrap(),
        );
        modes.insert(n.to_string());
        methods.insert(m.to_string());
        let tag = format!("{t}/{m}/{n}");
        let md: MeasureDoc = read(&out.join(format!("measure/{t}/toy/{m}/{n}.json")))?;
        ensure(md.distances.sources == sources, || format!("{tag}: source order"))?;
        for (i, row) in cell["distances"].as_array().unwrap().iter().enumerate() {
            for (j, want) in row.as_array().unwrap().iter().enumerate() {
                let (got, want) = (md.distances.values[i][j], want.as_f64().unwrap());
                ensure(close(got, want), || format!("{tag}: d[{i}][{j}] {got} vs {want}"))?;
            }
        }
        let excl = serde_json::to_value(&md.exclusions).unwrap();
        ensure(excl == cell["exclusions"], || format!("{tag}: exclusions {excl}"))?;
        for (gt, want) in cell["ground_truth"].as_object().unwrap() {
            let ev: EvalDoc = read(&out.join(format!("eval/{t}/toy/{m}/{n}/{gt}.json")))?;
            let a = ev.agreement.ok_or_else(|| format!("{tag}/{gt}: no agreement"))?;
            let w = want["mean_tau"].as_f64().unwrap();
            ensure(close(a.mean_tau, w), || format!("{tag}/{gt}: mean tau {} vs {w}", a.mean_tau))?;
            let per = want["per_source_tau"].as_object().unwrap();
            ensure(per.len() == a.per_source_tau.len(), || format!("{tag}/{gt}: anchors"))?;
            for (s, w) in per {
                let got = a.per_source_tau.get(s).copied().unwrap_or(f64::NAN);
                ensure(close(got, w.as_f64().unwrap()), || format!("{tag}/{gt}: tau[{s}] {got} vs {w}"))?;
            }
            let inst = want["instances"].as_object().unwrap();
            ensure(inst.len() == ev.instances.records.len(), || format!("{tag}/{gt}: instance count"))?;
            for r in &ev.instances.records {
                let w = inst.get(&r.prompt_id).and_then(Value::as_f64).unwrap_or(f64::NAN);
                ensure(close(r.mean_tau, w), || format!("{tag}/{gt}: {} {} vs {w}", r.prompt_id, r.mean_tau))?;
            }
            let skipped = serde_json::to_value(&ev.instances.skipped).unwrap();
            ensure(skipped == want["skipped"], || format!("{tag}/{gt}: skipped {skipped}"))?;
            taus += 1;
        }
    }
    ensure(modes.len() == 3 && methods.len() == 2, || "fixture coverage".into())?;
    Ok(format!("{taus} cell/ground-truth pairs within 1e-9 ({} modes, {} prompt families)", modes.len(), methods.len()))
}

fn none_general_invariance(out: &Path) -> Check {
    let mut compared = 0;
    for t in ["energy", "health"] {
        for m in ["bigram_outer", "manual"] {
            let none: MeasureDoc = read(&out.join(format!("measure/{t}/toy/{m}/none.json")))?;
            let general: MeasureDoc = read(&out.join(format!("measure/{t}/toy/{m}/general.json")))?;
            for (a, b) in none.rankings.iter().zip(&general.rankings) {
                ensure(
                    a.anchor == b.anchor && a.tie_groups() == b.tie_groups(),
                    || format!("{t}/{m}: {} ranks {:?} vs {:?}", a.anchor, a.ranked, b.ranked),
                )?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} anchor rankings identical"))
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism(first: &Path, second: &Path) -> Check {
    run_pipeline(second)?;
    let (a, b) = (files(first), files(second));
    ensure(a.keys().eq(b.keys()), || "different file sets".into())?;
    for (k, v) in &a {
        ensure(b[k] == *v, || format!("{} differs", k.display()))?;
    }
    Ok(format!("{} files byte-identical", a.len()))
}

// 6 ------------------------------------------------------------------------

fn alignment_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pool: Vec<String> = (0..10).map(|i| format!("tok{i}")).collect();
    for case in 0..500 {
        let n_src = rng.random_range(1..=5);
        let mut dists = BTreeMap::new();
        let mut expected_entries: Vec<(String, BTreeMap<String, f64>)> = Vec::new();
        for s in 0..n_src {
            let mut toks = pool.clone();
            toks.shuffle(&mut rng);
            toks.truncate(rng.random_range(1..=pool.len()));
            let entries: Vec<WeightedToken> = toks
                .iter()
                .map(|t| WeightedToken { token: t.clone(), value: rng.random_range(0.0..1.0), floored: false })
                .collect();
            expected_entries.push((
                format!("s{s}"),
                entries.iter().map(|e| (e.token.clone(), e.value)).collect(),
            ));
            dists.insert(format!("s{s}"), FramingScores { prompt_id: "p".into(), entries });
        }
        // brute force: sorted union, then look every token up per source
        let mut union: Vec<String> = Vec::new();
        for (_, m) in &expected_entries {
            for t in m.keys() {
                if !union.contains(t) {
                    union.push(t.clone());
                }
            }
        }
        union.sort();
        let want = FramingMatrix {
            prompt_id: "p".into(),
            vocabulary: union.clone(),
            rows: expected_entries
                .iter()
                .map(|(s, m)| (s.clone(), union.iter().map(|t| m.get(t).copied().unwrap_or(0.0)).collect()))
                .collect(),
            floored: BTreeMap::new(),
        };
        let got = align(&dists, "p").map_err(|e| e.to_string())?;
        let (g, w) = (serde_json::to_vec(&got).unwrap(), serde_json::to_vec(&want).unwrap());
        ensure(g == w, || format!("case {case}: {} vs {}", String::from_utf8_lossy(&g), String::from_utf8_lossy(&w)))?;
    }
    Ok("500 cases byte-identical".into())
}

// 7 ------------------------------------------------------------------------

/// Recomputes every inter-cluster distance from the original matrix at each
/// step instead of updating a working matrix.
fn brute_complete_linkage(names: &[String], d: &[Vec<f64>]) -> Vec<(Vec<String>, Vec<String>, f64)> {
    let idx = |s: &String| names.iter().position(|n| n == s).unwrap();
    let mut clusters: Vec<Vec<String>> = names.iter().map(|n| vec![n.clone()]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut cands = Vec::new();
        for i in 0..clusters.len() {
            for j in 0..clusters.len() {
                if i == j || clusters[i] > clusters[j] {
                    continue;
                }
                let mut link = f64::NEG_INFINITY;
                for a in &clusters[i] {
                    for b in &clusters[j] {
                        link = link.max(d[idx(a)][idx(b)]);
                    }
                }
                cands.push((link, clusters[i].clone(), clusters[j].clone()));
            }
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| (&x.1, &x.2).cmp(&(&y.1, &y.2))));
        let (link, l, r) = cands.swap_remove(0);
        clusters.retain(|c| *c != l && *c != r);
        let mut m = [l.clone(), r.clone()].concat();
        m.sort();
        clusters.push(m);
        merges.push((l, r, link));
    }
    merges
}

fn clustering_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = if case % 2 == 0 { 4 } else { 5 };
        let mut names: Vec<String> = ["e", "b", "d", "a", "c"][..n].iter().map(|s| s.to_string()).collect();
        names.shuffle(&mut rng);
        let mut v = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let x = rng.random_range(1..=4) as f64;
                v[i][j] = x;
                v[j][i] = x;
            }
        }
        let dm = DistanceMatrix::new(names.clone(), v.clone()).map_err(|e| e.to_string())?;
        let got: Vec<_> = agglomerative_cluster(&dm)
            .map_err(|e| e.to_string())?
            .merges
            .into_iter()
            .map(|m| (m.left, m.right, m.distance))
            .collect();
        let want = brute_complete_linkage(&names, &v);
        ensure(got == want, || format!("case {case}: {got:?} vs {want:?}"))?;
    }
    Ok("100 matrices with identical merge sequences".into())
}

// 8 ------------------------------------------------------------------------

/// Lowercase single-space texts, so tokens are just the words.
fn synthetic_corpus(rng: &mut ChaCha8Rng) -> Vec<Instance> {
    let vocab = ["the", "tax", "plan", "will", "cut", "costs", "for", "many", "people", "now"];
    (0..50)
        .map(|i| {
            let len = rng.random_range(6..20);
            let mut text: Vec<&str> = (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect();
            if i % 3 == 0 {
                let at = rng.random_range(0..=text.len());
                text.splice(at..at, ["the", "tax", "plan"]);
            }
            let source = format!("src{}", i % 5);
            Instance::new(format!("aca/{source}/{i}"), text.join(" "), source, "aca").unwrap()
        })
        .collect()
}

/// Position of the masked word and the restored text.
fn unmask(p: &MaskedPrompt) -> (usize, Vec<String>) {
    let before = p.text_with_mask.split(MASK).next().unwrap();
    let pos = before.split_whitespace().count();
    let restored = p.text_with_mask.replace(MASK, p.gold_token.as_deref().unwrap());
    (pos, restored.split(' ').map(String::from).collect())
}

fn occurrences(words: &[String], shared: &NgramSet, n: usize) -> Vec<usize> {
    (0..words.len().saturating_sub(n - 1))
        .filter(|&i| shared.contains(&words[i..i + n].to_vec()))
        .collect()
}

fn prompt_contracts() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = synthetic_corpus(&mut rng);
    let mut by_source: BTreeMap<String, Vec<Instance>> = BTreeMap::new();
    for i in &corpus {
        by_source.entry(i.source.clone()).or_default().push(i.clone());
    }
    let mut counts = [0usize; 3];
    for (slot, n) in [(0usize, 2usize), (1, 2), (2, 3)] {
        let shared: NgramSet = extract_shared_ngrams(&by_source, n, MinSources::All)
            .map_err(|e| e.to_string())?
            .into_iter()
            .collect();
        // every shared n-gram really occurs in every source
        for g in &shared {
            for (s, insts) in &by_source {
                let found = insts.iter().any(|i| {
                    let w: Vec<String> = i.text.split(' ').map(String::from).collect();
                    w.windows(n).any(|x| x == g.as_slice())
                });
                ensure(found, || format!("{g:?} missing from {s}"))?;
            }
        }
        for inst in &corpus {
            let words: Vec<String> = inst.text.split(' ').map(String::from).collect();
            let occ = occurrences(&words, &shared, n);
            let prompts = if slot == 0 {
                generate_bigram_outer(inst, &shared)
            } else {
                generate_ngram_inner(inst, &shared, n)
            };
            // expected (mask position, anchor) sequence, occurrence by occurrence
            let mut want: Vec<(usize, String)> = Vec::new();
            for &i in &occ {
                let anchor = words[i..i + n].join(" ");
                let positions: Vec<usize> = if slot == 0 {
                    let mut v = Vec::new();
                    if i > 0 {
                        v.push(i - 1);
                    }
                    if i + 2 < words.len() {
                        v.push(i + 2);
                    }
                    v
                } else {
                    (i..i + n).collect()
                };
                ensure(positions.len() <= if slot == 0 { 2 } else { n }, || "oracle".into())?;
                want.extend(positions.into_iter().map(|p| (p, anchor.clone())));
            }
            let mut got = Vec::new();
            for p in &prompts {
                let (pos, restored) = unmask(p);
                ensure(restored == words, || format!("{}: unmasking changes the text", p.id))?;
                let gold = p.gold_token.clone().unwrap();
                ensure(gold == words[pos], || format!("{}: gold {gold} is not word {pos}", p.id))?;
                got.push((pos, p.anchor.clone()));
            }
            ensure(got == want, || format!("{}: prompts {got:?}, want {want:?}", inst.id))?;
            for (pos, anchor) in &got {
                let start = occ
                    .iter()
                    .copied()
                    .find(|&i| words[i..i + n].join(" ") == *anchor && (if slot == 0 { i + 2 == *pos || *pos + 1 == i } else { i <= *pos && *pos < i + n }))
                    .ok_or_else(|| format!("{}: no occurrence of {anchor:?} explains word {pos}", inst.id))?;
                let inside = start <= *pos && *pos < start + n;
                ensure(inside == (slot != 0), || format!("{}: word {pos} on the wrong side of {anchor:?}", inst.id))?;
            }
            counts[slot] += prompts.len();
        }
    }
    ensure(counts.iter().all(|&c| c > 0), || format!("corpus produced no prompts for a method: {counts:?}"))?;

    let templates = TemplateSet::default_for("aca", &["the tax plan"]).templates("aca");
    let manual = expand_manual_templates(&templates).map_err(|e| e.to_string())?;
    let qa: Vec<&MaskedPrompt> = manual.iter().filter(|p| p.id.contains("/qa/")).collect();
    ensure(!qa.is_empty(), || "no qa prompts".into())?;
    let want: Vec<String> = ["Yes", "True", "Maybe", "No", "False"].map(String::from).to_vec();
    ensure(QA_CANDIDATES.iter().map(|s| s.to_string()).collect::<Vec<_>>() == want, || "QA constant".into())?;
    for p in &qa {
        ensure(p.candidates.as_ref() == Some(&want), || format!("{}: candidates {:?}", p.id, p.candidates))?;
    }
    Ok(format!(
        "BO {} / BI {} / TI {} prompts, {} qa prompts over 50 instances",
        counts[0],
        counts[1],
        counts[2],
        qa.len()
    ))
}

// 9 ------------------------------------------------------------------------

fn splitter() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = CorpusConfig::default();
    let max = cfg.max_words;
    ensure(max == 256, || format!("default max_words is {max}"))?;
    let mut chunks_seen = 0;
    for case in 0..1000 {
        let n_sent = rng.random_range(1..40);
        let sentences: Vec<String> = (0..n_sent)
            .map(|_| {
                let len = if rng.random_bool(0.02) { rng.random_range(257..400) } else { rng.random_range(1..60) };
                let mut w: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..50))).collect();
                w[0] = format!("Word{}", rng.random_range(0..9));
                let last = w.len() - 1;
                w[last].push('.');
                w.join(" ")
            })
            .collect();
        let para = sentences.join(" ");
        let lens: Vec<usize> = sentences.iter().map(|s| s.split(' ').count()).collect();
        let total: usize = lens.iter().sum();

        // greedy reference packing
        let mut want: Vec<(String, usize)> = Vec::new();
        if total <= max {
            want.push((para.clone(), total));
        } else {
            let mut cur: Vec<&str> = Vec::new();
            let mut cur_wc = 0;
            for (s, &l) in sentences.iter().zip(&lens) {
                if !cur.is_empty() && cur_wc + l > max {
                    want.push((cur.join(" "), cur_wc));
                    cur.clear();
                    cur_wc = 0;
                }
                cur.push(s);
                cur_wc += l;
            }
            want.push((cur.join(" "), cur_wc));
        }

        let got = split_paragraph(&para, &cfg).map_err(|e| e.to_string())?;
        let got_pairs: Vec<(String, usize)> = got.iter().map(|c| (c.text.clone(), c.word_count)).collect();
        ensure(got_pairs == want, || format!("case {case}: chunking differs from greedy packing"))?;
        ensure(got.iter().map(|c| c.word_count).sum::<usize>() == total, || format!("case {case}: words not conserved"))?;
        for (i, c) in got.iter().enumerate() {
            let single = !c.text.trim_end_matches('.').contains(". ");
            ensure(c.word_count <= max || (single && c.overlength), || format!("case {case}: chunk of {} words", c.word_count))?;
            ensure(c.overlength == (c.word_count > max), || format!("case {case}: overlength flag"))?;
            if let Some(next) = got.get(i + 1) {
                let first_next = next.text.split(". ").next().unwrap().split(' ').count();
                ensure(c.word_count + first_next > max, || format!("case {case}: chunk {i} could take the next sentence"))?;
            }
        }
        chunks_seen += got.len();
    }
    Ok(format!("1000 paragraphs, {chunks_seen} chunks"))
}

// --------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
}

fn main() {
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    let out1 = first.path().join("out");
    let out2 = second.path().join("out");

    let checks: Vec<(Criterion, Box<dyn Fn() -> Check + '_>)> = vec![
        (Criterion { id: 1, name: "survey normalization worked values", limit: Some(Duration::from_secs(1)) }, Box::new(survey_values)),
        (Criterion { id: 2, name: "tau-b against pair counting", limit: Some(Duration::from_secs(10)) }, Box::new(kendall_oracle)),
        (Criterion { id: 3, name: "cosine distance properties", limit: None }, Box::new(cosine_properties)),
        (Criterion { id: 4, name: "golden fixture end to end", limit: Some(Duration::from_secs(5)) }, Box::new(|| golden(&out1))),
        (Criterion { id: 5, name: "rankings under none and general agree", limit: None }, Box::new(|| none_general_invariance(&out1))),
        (Criterion { id: 6, name: "alignment against union and zero-fill", limit: None }, Box::new(alignment_oracle)),
        (Criterion { id: 7, name: "complete linkage against exhaustive agglomeration", limit: None }, Box::new(clustering_oracle)),
        (Criterion { id: 8, name: "prompt generation contracts", limit: None }, Box::new(prompt_contracts)),
        (Criterion { id: 9, name: "greedy sentence splitter", limit: None }, Box::new(splitter)),
        (Criterion { id: 10, name: "repeat runs are byte-identical", limit: None }, Box::new(|| determinism(&out1, &out2))),
    ];

    let mut failed = 0;
    for (c, f) in &checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS {:>2} {}: {detail} [{elapsed:.2?}]", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {}: {why} [{elapsed:.2?}]", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
