use ndarray::Array2;
use proptest::prelude::*;
use swag::engine::{alpha_quantile, quantile_rank, EvaluatedLearner, LearnerSpec, StepResult};
use swag::postprocess::{self, build_network, diversity_summary, jaccard, FinalLibrary};
use swag::{seed, Dataset, SwagConfig, SwagLibrary};

fn labelled(codes: Vec<usize>, classes: usize, p: usize) -> Dataset {
    let n = codes.len();
    let x = Array2::from_shape_fn((n, p), |(i, j)| (i * 7 + j) as f64 * 0.25 - 3.0);
    Dataset::from_codes(
        x,
        codes,
        (0..classes).map(|c| format!("c{c}")).collect(),
        (0..p).map(|j| format!("f{j}")).collect(),
    )
    .unwrap()
}

/// Labels where every class in `0..classes` occurs at least once.
fn label_vector() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (2usize..5).prop_flat_map(|c| {
        prop::collection::vec(0..c, 0..60).prop_map(move |mut v| {
            v.extend(0..c);
            (v, c)
        })
    })
}

fn spec_strategy(p: usize, max_len: usize) -> impl Strategy<Value = LearnerSpec> {
    prop::collection::btree_set(0..p, 1..=max_len)
        .prop_map(|s| LearnerSpec::new(s.into_iter().collect()).unwrap())
}

fn final_library(specs: Vec<LearnerSpec>, signed: bool) -> FinalLibrary {
    FinalLibrary {
        delta: 0.01,
        chosen_dimension: 1,
        threshold: 0.0,
        learners: specs
            .into_iter()
            .enumerate()
            .map(|(i, s)| EvaluatedLearner {
                signs: signed.then(|| (0..s.len()).map(|j| [1i8, -1, 0][(i + j) % 3]).collect()),
                attributes: s,
                error: 0.0,
            })
            .collect(),
    }
}

fn library(steps: Vec<Vec<f64>>) -> SwagLibrary {
    let steps = steps
        .into_iter()
        .enumerate()
        .map(|(d, errs)| {
            let dimension = d + 1;
            let candidates: Vec<EvaluatedLearner> = errs
                .into_iter()
                .enumerate()
                .map(|(i, error)| EvaluatedLearner {
                    attributes: LearnerSpec::new((i..i + dimension).collect()).unwrap(),
                    error,
                    signs: None,
                })
                .collect();
            StepResult {
                dimension,
                exhaustive: false,
                failed: 0,
                q_alpha: 1.0,
                selected: candidates.clone(),
                candidates,
            }
        })
        .collect();
    SwagLibrary {
        format_version: swag::engine::LIBRARY_FORMAT_VERSION,
        config: SwagConfig::new(3, 50, 0.1),
        attribute_names: vec![],
        class_labels: vec![],
        s_star: vec![],
        learners_trained: 0,
        steps,
    }
}

proptest! {
    #[test]
    fn folds_partition_and_stratify((codes, classes) in label_vector(), k in 2usize..6, s in any::<u64>()) {
        let data = labelled(codes, classes, 1);
        prop_assume!(k <= data.n());
        let folds = data.stratified_folds(k, &mut seed::rng(s)).unwrap();
        let mut seen = vec![0usize; data.n()];
        for f in 0..k {
            for i in folds.held_out(f) {
                seen[i] += 1;
            }
            let mut all = folds.held_out(f);
            all.extend(folds.training(f));
            all.sort_unstable();
            prop_assert_eq!(all, (0..data.n()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for (c, &count) in data.class_counts().iter().enumerate() {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| folds.held_out(f).iter().filter(|&&i| data.labels()[i] == c).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {} of size {} spread {:?}", c, count, per_fold);
        }
        let sizes = folds.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= classes);
    }

    #[test]
    fn csv_round_trips(rows in prop::collection::vec(
        (prop::collection::vec(-1e6f64..1e6, 3), prop::sample::select(vec!["yes", "no", "maybe"])), 2..30)) {
        let mut labels: Vec<&str> = rows.iter().map(|r| r.1).collect();
        labels[0] = "yes";
        labels[1] = "no";
        let x = Array2::from_shape_fn((rows.len(), 3), |(i, j)| rows[i].0[j]);
        let names = vec!["a".to_string(), "b c".into(), "d,e".into()];
        let data = Dataset::new(x, &labels, names).unwrap();
        let text = data.to_csv_string("outcome");
        prop_assert_eq!(Dataset::from_csv_str(&text, "outcome").unwrap(), data);
    }

    #[test]
    fn quantile_selection_keeps_rank(errors in prop::collection::vec(0u8..20, 1..300), alpha in 0.001f64..0.999) {
        let errors: Vec<f64> = errors.into_iter().map(|e| f64::from(e) / 20.0).collect();
        let q = alpha_quantile(&errors, alpha).unwrap();
        let kept = errors.iter().filter(|&&e| e <= q).count();
        prop_assert!(kept >= quantile_rank(errors.len(), alpha));
        prop_assert!(kept as f64 >= (alpha * errors.len() as f64).ceil() - 1e-9);
        prop_assert!(errors.contains(&q));
        let below = errors.iter().filter(|&&e| e < q).count();
        prop_assert!((below as f64) < (alpha * errors.len() as f64).max(1.0));
    }

    #[test]
    fn jaccard_is_symmetric_and_reflexive(a in spec_strategy(20, 6), b in spec_strategy(20, 6)) {
        prop_assert_eq!(jaccard(&a, &b), jaccard(&b, &a));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
    }

    #[test]
    fn network_conserves_memberships(specs in prop::collection::vec(spec_strategy(15, 5), 1..25), signed in any::<bool>()) {
        let fin = final_library(specs, signed);
        let names: Vec<String> = (0..15).map(|i| format!("g{i}")).collect();
        let net = build_network(&fin, &names);
        let total: usize = fin.learners.iter().map(|l| l.attributes.len()).sum();
        prop_assert_eq!(net.nodes.iter().map(|n| n.frequency).sum::<usize>(), total);
        let freq = |i: usize| net.nodes.iter().find(|n| n.index == i).map(|n| n.frequency).unwrap();
        for e in &net.edges {
            prop_assert!(e.source < e.target);
            prop_assert!(e.weight >= 1 && e.weight <= freq(e.source).min(freq(e.target)));
            if let Some(s) = e.mean_sign {
                prop_assert!((-1.0..=1.0).contains(&s));
            }
        }
        prop_assert_eq!(swag::AttributeNetwork::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn diversity_ordering(specs in prop::collection::vec(spec_strategy(12, 4), 1..20)) {
        let s = diversity_summary(&final_library(specs.clone(), false));
        prop_assert_eq!(s.learners, specs.len());
        if let (Some(m), Some((lo, hi))) = (s.median_jaccard, s.jaccard_range) {
            prop_assert!(lo <= m && m <= hi && lo >= 0.0 && hi <= 1.0);
        } else {
            prop_assert_eq!(specs.len(), 1);
        }
    }

    #[test]
    fn median_rule_is_monotone_in_delta(steps in prop::collection::vec(
        prop::collection::vec(0u8..40, 1..60), 1..4)) {
        let lib = library(steps.into_iter().map(|s| s.into_iter().map(|e| f64::from(e) / 40.0).collect()).collect());
        let mut previous: Option<FinalLibrary> = None;
        for delta in [0.01, 0.05, 0.10, 0.5] {
            let fin = postprocess::median_rule(&lib, delta).unwrap();
            prop_assert!(fin.learners.iter().all(|l| l.error <= fin.threshold));
            if let Some(prev) = &previous {
                prop_assert!(prev.threshold <= fin.threshold);
                prop_assert_eq!(prev.chosen_dimension, fin.chosen_dimension);
                prop_assert!(prev.learners.iter().all(|l| fin.learners.contains(l)));
            }
            previous = Some(fin);
        }
    }
}
