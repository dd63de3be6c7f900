use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::embed::SyntheticProvider;
use crate::field::{Activation, FieldHeads, LossConfig};
use crate::geometry::Aabb;
use crate::hashgrid::{HashGrid, HashGridConfig};
use crate::testutil::{constant_field, split_bounds, split_field, unit};

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> EmbeddingVector {
    unit(
        &(0..n)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect::<Vec<_>>(),
    )
}

fn bank_of(rng: &mut ChaCha8Rng, n: usize, dv: usize, ds: usize) -> LabelBank {
    let labels = (0..n).map(|i| format!("label{i}")).collect();
    let e_v = (0..n).map(|_| random_unit(rng, dv)).collect();
    let e_s = (0..n).map(|_| random_unit(rng, ds)).collect();
    LabelBank::new(labels, e_v, e_s).unwrap()
}

fn line_samples(n: usize) -> Vec<Point3> {
    (0..n)
        .map(|i| [-0.95 + 1.9 * i as f64 / (n - 1) as f64, 0.1, 1.0])
        .collect()
}

#[test]
fn output_equal_to_a_row_scores_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bank = bank_of(&mut rng, 5, 8, 6);
    let f = constant_field(&bank.e_v[3], &bank.e_s[3]);
    let (label, scores) = infer_attribute(&f, [0.2, 0.1, 0.5], &bank, 0.5).unwrap();
    assert_eq!(label, "label3");
    assert!((scores[3] - 1.0).abs() < 1e-5, "{scores:?}");
}

#[test]
fn single_label_bank_always_wins() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bank = bank_of(&mut rng, 1, 8, 6);
    let f = constant_field(&random_unit(&mut rng, 8), &random_unit(&mut rng, 6));
    for p in line_samples(7) {
        assert_eq!(infer_attribute(&f, p, &bank, 0.5).unwrap().0, "label0");
    }
}

#[test]
fn ties_go_to_the_lowest_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_unit(&mut rng, 8);
    let s = random_unit(&mut rng, 6);
    let other = random_unit(&mut rng, 8);
    let bank = LabelBank::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![other.clone(), v.clone(), v.clone()],
        vec![random_unit(&mut rng, 6), s.clone(), s.clone()],
    )
    .unwrap();
    let f = constant_field(&v, &s);
    assert_eq!(
        infer_attribute(&f, [0.0, 0.0, 1.0], &bank, 0.5).unwrap().0,
        "b"
    );
    assert_eq!(argmax(&[0.5, 0.7, 0.7]), Some(1));
    assert_eq!(argmax(&[]), None);
}

#[test]
fn branch_weight_selects_the_branch() {
    // Vision favors label 0, semantics favors label 1.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bank = bank_of(&mut rng, 2, 8, 6);
    let f = constant_field(&bank.e_v[0], &bank.e_s[1]);
    assert_eq!(
        infer_attribute(&f, [0.0, 0.0, 1.0], &bank, 1.0).unwrap().0,
        "label0"
    );
    assert_eq!(
        infer_attribute(&f, [0.0, 0.0, 1.0], &bank, 0.0).unwrap().0,
        "label1"
    );
    let (_, s) = infer_attribute(&f, [0.0, 0.0, 1.0], &bank, 0.3).unwrap();
    let want = 0.3 * bank.e_v[0].cosine(&bank.e_v[1]) + 0.7;
    assert!((s[1] as f64 - want).abs() < 1e-5);
    assert!(matches!(
        infer_attribute(&f, [0.0; 3], &bank, 1.5),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn zero_output_is_undefined() {
    let cfg = HashGridConfig {
        levels: 2,
        features_per_level: 2,
        log2_table_size: 8,
        base_resolution: 2,
        finest_resolution: 4,
        bounds: split_bounds(),
    };
    let grid = HashGrid::<f32>::new(cfg, 0).unwrap();
    let heads = FieldHeads::with_zero_heads(4, 8, 8, 6, Activation::Softplus, 0);
    let f = LopField::new(grid, heads, LossConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bank = bank_of(&mut rng, 2, 8, 6);
    assert!(matches!(
        infer_attribute(&f, [0.0, 0.0, 1.0], &bank, 0.5),
        Err(Error::UndefinedEmbedding)
    ));
}

#[test]
fn bank_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let v = random_unit(&mut rng, 8);
    let s = random_unit(&mut rng, 6);
    assert!(LabelBank::new(vec![], vec![], vec![]).is_err());
    let dup = LabelBank::new(
        vec!["a".into(), "a".into()],
        vec![v.clone(), v.clone()],
        vec![s.clone(), s.clone()],
    );
    assert!(matches!(dup, Err(Error::InvalidLabel(_))));
    let zero = LabelBank::new(
        vec!["a".into()],
        vec![EmbeddingVector::zeros(8)],
        vec![s.clone()],
    );
    assert!(matches!(zero, Err(Error::UndefinedEmbedding)));
    let ragged = LabelBank::new(
        vec!["a".into(), "b".into()],
        vec![v.clone(), random_unit(&mut rng, 7)],
        vec![s.clone(), s.clone()],
    );
    assert!(matches!(ragged, Err(Error::DimMismatch(_))));

    let scaled = LabelBank::new(
        vec!["a".into()],
        vec![EmbeddingVector(v.0.iter().map(|x| x * 3.0).collect())],
        vec![s],
    )
    .unwrap();
    assert!((scaled.e_v[0].norm() - 1.0).abs() < 1e-6);

    let f = constant_field(&v, &random_unit(&mut rng, 6));
    let wrong = bank_of(&mut rng, 2, 8, 5);
    assert!(matches!(
        infer_attribute(&f, [0.0; 3], &wrong, 0.5),
        Err(Error::DimMismatch(_))
    ));
}

#[test]
fn provider_bank_rows_are_unit() {
    let p = SyntheticProvider::new(9, 16, 12).unwrap();
    let bank = LabelBank::from_provider(&["kitchen", "bedroom", "living room"], &p).unwrap();
    assert_eq!(bank.dims(), (16, 12));
    for r in bank.e_v.iter().chain(&bank.e_s) {
        assert!((r.norm() - 1.0).abs() < 1e-5);
    }
    assert_eq!(bank.index_of("bedroom"), Some(1));
}

#[test]
fn split_field_labels_each_side() {
    let p = SyntheticProvider::new(9, 16, 12).unwrap();
    let bank = LabelBank::from_provider(&["kitchen", "bedroom"], &p).unwrap();
    let f = split_field((&bank.e_v[0], &bank.e_s[0]), (&bank.e_v[1], &bank.e_s[1]));
    let inf = infer_batch(&f, &line_samples(21), &bank, 0.5).unwrap();
    for (p, i) in line_samples(21).iter().zip(&inf) {
        if p[0].abs() > 0.2 {
            assert_eq!(i.index, usize::from(p[0] > 0.0), "at {p:?}");
        }
    }
}

#[test]
fn text_query_peaks_on_its_side() {
    let p = SyntheticProvider::new(9, 16, 12).unwrap();
    let k = p.embed_text("kitchen").unwrap();
    let b = p.embed_text("bedroom").unwrap();
    let f = split_field((&k.vision, &k.semantic), (&b.vision, &b.semantic));
    let samples = line_samples(41);
    let map = localize_text(&f, "kitchen", &p, &samples, 0.5).unwrap();
    assert_eq!(map.best, 0);
    assert!(map.predicted_position(5)[0] < -0.8);
    let again = localize_text(&f, "kitchen", &p, &samples, 0.5).unwrap();
    assert_eq!(map, again);
    assert!(matches!(
        localize_text(&f, "kitchen", &p, &[], 0.5),
        Err(Error::NoSamples)
    ));
}

#[test]
fn image_query_uses_vision_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = (random_unit(&mut rng, 8), random_unit(&mut rng, 8));
    let s = random_unit(&mut rng, 6);
    let f = split_field((&a, &s), (&b, &s));
    let map = localize_image(&f, &b, &line_samples(11)).unwrap();
    assert_eq!(map.best, 10);
    let at_edge = localize_image(&f, &b, &[[1.0, 0.0, 1.0]]).unwrap();
    assert!((at_edge.scores[0] - 1.0).abs() < 1e-5);
    assert!(matches!(
        localize_image(&f, &random_unit(&mut rng, 9), &line_samples(3)),
        Err(Error::DimMismatch(_))
    ));
}

#[test]
fn orthogonal_query_scores_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (a, b) = (random_unit(&mut rng, 8), random_unit(&mut rng, 8));
    let s = random_unit(&mut rng, 6);
    let f = split_field((&a, &s), (&b, &s));
    // Gram-Schmidt a random vector against the span of both outputs.
    let mut q: Vec<f64> = random_unit(&mut rng, 8)
        .0
        .iter()
        .map(|&x| x as f64)
        .collect();
    let a64: Vec<f64> = a.0.iter().map(|&x| x as f64).collect();
    let mut b64: Vec<f64> = b.0.iter().map(|&x| x as f64).collect();
    let ab: f64 = a64.iter().zip(&b64).map(|(x, y)| x * y).sum();
    b64.iter_mut().zip(&a64).for_each(|(y, x)| *y -= ab * x);
    let nb = b64.iter().map(|x| x * x).sum::<f64>().sqrt();
    b64.iter_mut().for_each(|y| *y /= nb);
    for basis in [&a64, &b64] {
        let d: f64 = q.iter().zip(basis).map(|(x, y)| x * y).sum();
        q.iter_mut().zip(basis).for_each(|(x, y)| *x -= d * y);
    }
    let q = unit(&q.iter().map(|&x| x as f32).collect::<Vec<_>>());
    let map = localize_image(&f, &q, &line_samples(50)).unwrap();
    let (lo, hi) = map
        .scores
        .iter()
        .fold((f32::MAX, f32::MIN), |(l, h), &s| (l.min(s), h.max(s)));
    assert!(hi - lo < 0.2, "spread {}", hi - lo);
}

#[test]
fn top_k_and_centroid() {
    let pts = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [3.0, 0.0, 0.0],
    ];
    let map = Heatmap::new(pts, vec![0.1, 0.9, 0.9, 0.3]).unwrap();
    assert_eq!(map.best, 1);
    assert_eq!(map.top_k(3), vec![1, 2, 3]);
    // weights 0.9, 0.9, 0.3 -> x = (0.9 + 1.8 + 0.9) / 2.1
    let c = map.predicted_position(3);
    assert!((c[0] - 3.6 / 2.1).abs() < 1e-6, "{c:?}");
    assert_eq!(map.top_k(0), vec![1]);
    assert!(Heatmap::new(vec![[0.0; 3]], vec![f32::NAN]).is_err());
    assert!(matches!(
        Heatmap::new(vec![], vec![]),
        Err(Error::NoSamples)
    ));
}

#[test]
fn negative_scores_still_give_positive_weights() {
    let map = Heatmap::new(vec![[0.0; 3], [2.0, 0.0, 0.0]], vec![-0.5, -0.1]).unwrap();
    let c = map.predicted_position(2);
    assert!(c[0] > 1.0 && c[0] < 2.0, "{c:?}");
}

#[test]
fn weighted_distance_matches_hand_oracle() {
    let map = Heatmap::new(
        vec![[0.0; 3], [0.0, 3.0, 0.0], [9.0, 9.0, 9.0]],
        vec![0.5, 0.25, 0.0],
    )
    .unwrap();
    let refs = [[1.0, 0.0, 0.0], [0.0, 5.0, 0.0]];
    // top-2: distances 1 and 2, weights 0.5 and 0.25
    let d = weighted_distance(&map, 2, &refs).unwrap();
    assert!((d - (0.5 * 1.0 + 0.25 * 2.0) / 0.75).abs() < 1e-9);
    assert!(matches!(
        weighted_distance(&map, 2, &[]),
        Err(Error::NoSamples)
    ));
}

#[test]
fn csv_layouts() {
    let map = Heatmap::new(
        vec![[0.1, 0.1, 1.0], [0.2, 0.15, 1.0], [0.8, 0.1, 1.0]],
        vec![0.5, 0.75, 0.25],
    )
    .unwrap();
    let mut buf = Vec::new();
    map.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,z,score"));
    assert_eq!(text.lines().nth(2), Some("0.2,0.15,1,0.75"));
    let mut buf = Vec::new();
    map.write_grid_csv(0.5, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(
        rows,
        [
            "ix,iy,x,y,score",
            "0,0,0.25,0.25,0.75",
            "1,0,0.75,0.25,0.25"
        ]
    );
}

#[test]
fn grid_sampler_covers_bounds() {
    let b = Aabb::new([0.0, 0.0, 0.0], [1.0, 0.5, 0.5]);
    let pts = grid_samples(&b, 0.25, None).unwrap();
    assert_eq!(pts.len(), 4 * 2 * 2);
    assert!(pts.iter().all(|p| b.contains(*p)));
    let layer = grid_samples(&b, 0.25, Some(0.1)).unwrap();
    assert_eq!(layer.len(), 8);
    assert!(layer.iter().all(|p| p[2] == 0.1));
    assert!(matches!(
        grid_samples(&Aabb::new([0.0; 3], [0.0, 1.0, 1.0]), 0.25, None),
        Err(Error::InvalidBounds(_))
    ));
}

proptest! {
    #[test]
    fn common_rescaling_keeps_argmax(seed in 0u64..500, scale in 0.01f32..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = bank_of(&mut rng, 4, 8, 6);
        let scaled = LabelBank::new(
            bank.labels.clone(),
            bank.e_v.iter().map(|r| EmbeddingVector(r.0.iter().map(|x| x * scale).collect())).collect(),
            bank.e_s.iter().map(|r| EmbeddingVector(r.0.iter().map(|x| x * scale).collect())).collect(),
        ).unwrap();
        let f = constant_field(&random_unit(&mut rng, 8), &random_unit(&mut rng, 6));
        let pts = line_samples(5);
        let a: Vec<usize> = infer_batch(&f, &pts, &bank, 0.5).unwrap().iter().map(|i| i.index).collect();
        let b: Vec<usize> = infer_batch(&f, &pts, &scaled, 0.5).unwrap().iter().map(|i| i.index).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn better_label_never_lowers_the_score(seed in 0u64..500, mix in 0.0f32..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = bank_of(&mut rng, 3, 8, 6);
        let (fv, fs) = (random_unit(&mut rng, 8), random_unit(&mut rng, 6));
        let f = constant_field(&fv, &fs);
        let (_, before) = infer_attribute(&f, [0.0, 0.0, 1.0], &bank, 0.5).unwrap();
        let best_before = before.iter().cloned().fold(f32::MIN, f32::max);
        // A candidate between the field output and a random direction.
        let nv = unit(&fv.0.iter().zip(&random_unit(&mut rng, 8).0).map(|(a, b)| a + mix * b).collect::<Vec<_>>());
        let mut labels = bank.labels.clone();
        labels.push("extra".into());
        let mut e_v = bank.e_v.clone();
        e_v.push(nv);
        let mut e_s = bank.e_s.clone();
        e_s.push(fs.clone());
        let grown = LabelBank::new(labels, e_v, e_s).unwrap();
        let (_, after) = infer_attribute(&f, [0.0, 0.0, 1.0], &grown, 0.5).unwrap();
        let best_after = after.iter().cloned().fold(f32::MIN, f32::max);
        prop_assert!(best_after >= best_before);
    }
}
