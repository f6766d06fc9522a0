use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use proptest::prelude::*;

use shiftbench::manifest::{
    label_distribution, manifest_to_jsonl, parse_manifest, ClassLabel, DatasetManifest,
    LabelDistribution, Sample, Source, Split,
};
use shiftbench::metrics::{average_precision, DetectionRecord, GroundTruth};
use shiftbench::manifest::BBox;
use shiftbench::rng::Pcg32;
use shiftbench::shift::{base_id, resample, shift_divergence, ResamplePlan};
use shiftbench::simmap::{cosine_similarity, EmbeddingStore, EmbeddingVector};
use shiftbench::trainmap::{oracle, OracleConfig};

const CLASSES: [&str; 4] = ["dust", "fog", "rain", "snow"];

fn label(i: usize) -> ClassLabel {
    ClassLabel::new(CLASSES[i]).unwrap()
}

fn arb_sample(i: usize) -> impl Strategy<Value = Sample> {
    (
        0..CLASSES.len(),
        any::<bool>(),
        any::<bool>(),
        prop::option::of(prop::collection::vec("[a-z]{1,6}", 1..4)),
    )
        .prop_map(move |(c, train, synthetic, kw)| {
            let split = if train { Split::Train } else { Split::Test };
            let source = if synthetic { Source::Synthetic } else { Source::Real };
            let mut s = Sample::new(format!("img-{i}"), label(c), split, source);
            if let Some(kw) = kw {
                s = s.with_keywords(kw);
            } else if synthetic {
                s = s.with_embedding_ref(format!("e{i}"));
            }
            s
        })
}

fn arb_manifest(max: usize) -> impl Strategy<Value = DatasetManifest> {
    (1..max)
        .prop_flat_map(|n| (0..n).map(arb_sample).collect::<Vec<_>>())
        .prop_map(|samples| DatasetManifest::new("prop", samples).unwrap())
}

fn arb_vector(dims: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dims)
        .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #[test]
    fn manifest_jsonl_round_trip(m in arb_manifest(40)) {
        let text = manifest_to_jsonl(&m);
        let back = parse_manifest(&text, "prop", Path::new("prop.jsonl")).unwrap();
        prop_assert_eq!(back.samples(), m.samples());
        prop_assert_eq!(manifest_to_jsonl(&back), text);
    }

    #[test]
    fn distribution_totals_match_split_sizes(m in arb_manifest(60)) {
        let train = label_distribution(&m, Split::Train);
        let test = label_distribution(&m, Split::Test);
        prop_assert_eq!(train.total() + test.total(), m.len() as u64);
        prop_assert_eq!(test.total() as usize, m.split(Split::Test).count());
        prop_assert!(train.classes().eq(m.classes().iter()));
    }

    #[test]
    fn resample_hits_target_exactly(
        m in arb_manifest(60),
        counts in prop::collection::vec(0u64..30, CLASSES.len()),
        seed in any::<u64>(),
    ) {
        let base = label_distribution(&m, Split::Test);
        let target = LabelDistribution::new(
            base.classes().cloned().zip(counts.iter().copied()).collect(),
        );
        // classes with no test samples can only be drawn zero times
        let feasible = base.iter().all(|(c, n)| n > 0 || target.get(c) == Some(0));
        let plan = ResamplePlan { target: target.clone(), with_replacement: true, seed };
        match resample(&m, &plan, Split::Test) {
            Ok(out) => {
                prop_assert!(feasible);
                prop_assert_eq!(nonzero(&label_distribution(&out, Split::Test)), nonzero(&target));
                prop_assert_eq!(nonzero(&label_distribution(&out, Split::Train)), nonzero(&label_distribution(&m, Split::Train)));
                let originals: BTreeSet<&str> = m.samples().iter().map(|s| s.id.as_str()).collect();
                for s in out.samples() {
                    prop_assert!(originals.contains(base_id(&s.id)));
                }
                prop_assert_eq!(out, resample(&m, &plan, Split::Test).unwrap());
            }
            Err(_) => prop_assert!(!feasible),
        }
    }

    #[test]
    fn resample_without_replacement_never_duplicates(m in arb_manifest(60), seed in any::<u64>()) {
        let base = label_distribution(&m, Split::Test);
        let target = LabelDistribution::new(base.iter().map(|(c, n)| (c.clone(), n / 2)).collect());
        let plan = ResamplePlan { target: target.clone(), with_replacement: false, seed };
        let out = resample(&m, &plan, Split::Test).unwrap();
        prop_assert_eq!(nonzero(&label_distribution(&out, Split::Test)), nonzero(&target));
        prop_assert!(out.samples().iter().all(|s| base_id(&s.id) == s.id));
    }

    #[test]
    fn divergence_is_a_bounded_symmetric_distance(
        p in prop::collection::vec(0u64..50, CLASSES.len()),
        q in prop::collection::vec(0u64..50, CLASSES.len()),
        k in 1u64..5,
    ) {
        prop_assume!(p.iter().sum::<u64>() > 0 && q.iter().sum::<u64>() > 0);
        let dist = |v: &[u64]| LabelDistribution::new((0..CLASSES.len()).map(|i| (label(i), v[i])).collect());
        let (dp, dq) = (dist(&p), dist(&q));
        let d = shift_divergence(&dp, &dq).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, shift_divergence(&dq, &dp).unwrap());
        prop_assert_eq!(shift_divergence(&dp, &dp).unwrap(), 0.0);
        let scaled: Vec<u64> = p.iter().map(|x| x * k).collect();
        prop_assert!(shift_divergence(&dp, &dist(&scaled)).unwrap() < 1e-12);
    }

    #[test]
    fn cosine_is_symmetric_bounded_and_scale_free(
        (x, y) in (2usize..32).prop_flat_map(|d| (arb_vector(d), arb_vector(d))),
        k in 0.01f64..100.0,
    ) {
        let vx = EmbeddingVector::new(x.clone()).unwrap();
        let vy = EmbeddingVector::new(y).unwrap();
        let c = cosine_similarity(&vx, &vy).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert_eq!(c, cosine_similarity(&vy, &vx).unwrap());
        let scaled = vx.scaled(k).unwrap();
        prop_assert!((cosine_similarity(&scaled, &vy).unwrap() - c).abs() < 1e-12);
        prop_assert!((cosine_similarity(&vx, &vx).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_grows_as_a_prefix_in_beta(seed in any::<u64>(), n in 5usize..60, beta in 1usize..10) {
        let syn = synthetic(n, seed);
        let store = EmbeddingStore::new(32).unwrap();
        let eta = n.min(40).max(beta + 1);
        let small = oracle(&label(2), &syn, &store, &OracleConfig::new(eta, beta, 32, seed).unwrap()).unwrap();
        let large = oracle(&label(2), &syn, &store, &OracleConfig::new(eta, beta + 1, 32, seed).unwrap()).unwrap();
        prop_assert!(small.members.len() <= beta);
        prop_assert_eq!(&large.members[..small.members.len()], &small.members[..]);
        for w in large.members.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn ap_ignores_input_order(dets in detections(), seed in any::<u64>()) {
        let (records, gts) = dets;
        let car = ClassLabel::new("car").unwrap();
        let base = average_precision(&records, &gts, &car, 0.5).unwrap();
        let mut shuffled = records.clone();
        let mut rng = Pcg32::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.index(i + 1));
        }
        let again = average_precision(&shuffled, &gts, &car, 0.5).unwrap();
        prop_assert_eq!(base.ap, again.ap);
        prop_assert_eq!(base.tp, again.tp);
    }
}

fn nonzero(d: &LabelDistribution) -> BTreeMap<ClassLabel, u64> {
    d.iter().filter(|(_, n)| *n > 0).map(|(c, n)| (c.clone(), n)).collect()
}

fn synthetic(n: usize, seed: u64) -> DatasetManifest {
    let mut rng = Pcg32::seed_from_u64(seed);
    let words = ["rain", "fog", "wet", "mist", "road"];
    let samples = (0..n)
        .map(|i| {
            let kw: Vec<&str> = (0..1 + rng.index(3)).map(|_| words[rng.index(words.len())]).collect();
            Sample::new(format!("s{i:03}"), label(rng.index(CLASSES.len())), Split::Train, Source::Synthetic)
                .with_keywords(kw)
        })
        .collect();
    DatasetManifest::new("syn", samples).unwrap()
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (0u8..8, 0u8..8, 1u8..6, 1u8..6).prop_map(|(x, y, w, h)| {
        let (x, y) = (f64::from(x), f64::from(y));
        BBox::new(x, y, x + f64::from(w), y + f64::from(h)).unwrap()
    })
}

fn detections() -> impl Strategy<Value = (Vec<DetectionRecord>, Vec<GroundTruth>)> {
    let car = ClassLabel::new("car").unwrap();
    let car2 = car.clone();
    (
        prop::collection::vec((0u8..3, arb_box(), 0u8..=20), 0..25),
        prop::collection::vec((0u8..3, arb_box()), 1..10),
    )
        .prop_map(move |(d, g)| {
            let records = d
                .into_iter()
                .map(|(img, b, c)| {
                    DetectionRecord::new(format!("i{img}"), car.clone(), b, f64::from(c) / 20.0).unwrap()
                })
                .collect();
            let gts = g
                .into_iter()
                .map(|(img, b)| GroundTruth { image_id: format!("i{img}"), class: car2.clone(), bbox: b })
                .collect();
            (records, gts)
        })
}

/// Every index is equally likely to be picked by the without-replacement sampler.
#[test]
fn sampler_weights_indices_uniformly() {
    let (n, k, trials) = (20usize, 5usize, 1000u64);
    let mut hits = vec![0u64; n];
    for seed in 0..trials {
        let picks = Pcg32::seed_from_u64(seed).sample_without_replacement(n, k);
        assert_eq!(picks.iter().collect::<BTreeSet<_>>().len(), k);
        for i in picks {
            hits[i] += 1;
        }
    }
    let expected = trials as f64 * k as f64 / n as f64;
    let sd = (expected * (1.0 - k as f64 / n as f64)).sqrt();
    for (i, &h) in hits.iter().enumerate() {
        assert!((h as f64 - expected).abs() < 5.0 * sd, "index {i}: {h} vs {expected}");
    }
}

/// With-replacement draws weight every sample of a class equally.
#[test]
fn resample_weights_members_uniformly() {
    let samples: Vec<Sample> = (0..8)
        .map(|i| Sample::new(format!("r{i}"), label(2), Split::Test, Source::Real))
        .collect();
    let m = DatasetManifest::new("u", samples).unwrap();
    let mut hits: BTreeMap<String, u64> = BTreeMap::new();
    for seed in 0..1000 {
        let plan = ResamplePlan {
            target: LabelDistribution::from_pairs([("rain", 4)]).unwrap(),
            with_replacement: true,
            seed,
        };
        for s in resample(&m, &plan, Split::Test).unwrap().samples() {
            *hits.entry(base_id(&s.id).to_owned()).or_default() += 1;
        }
    }
    assert_eq!(hits.len(), 8);
    // 4000 draws over 8 members: mean 500, sd ~ 20.9
    for (id, h) in hits {
        assert!((h as f64 - 500.0).abs() < 105.0, "{id}: {h}");
    }
}
