use leafage::data::{generate_artificial, Dataset, Standardizer};
use leafage::explainer::{
    closest_enemy, dissimilarity, retrieve_examples, sample_local_training_set, Flag, LeafageConfig, Leafage,
    LocalSurrogate,
};
use leafage::lime::{default_sigma, kernel_weight, lime_fit, LimeConfig};
use leafage::models::{fit, BlackBoxModel, ClassifierKind, Hyperparams, ModelError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Labels 1 where `w.x + b > 0`.
struct Halfspace {
    w: Vec<f64>,
    b: f64,
}

impl Halfspace {
    fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }
}

impl BlackBoxModel for Halfspace {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        Ok(rows.iter().map(|r| usize::from(self.score(r) > 0.0)).collect())
    }

    fn descriptor(&self) -> String {
        "halfspace".into()
    }
}

fn uniform_cloud(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let labels = (0..n).map(|i| i % 2).collect();
    Dataset::new(features, labels, (0..d).map(|j| format!("x{j}")).collect(), vec!["0".into(), "1".into()]).unwrap()
}

fn standardized(ds: &Dataset) -> (Standardizer, Dataset) {
    let scaler = Standardizer::fit(ds);
    let std = scaler.transform(ds).unwrap();
    (scaler, std)
}

#[test]
fn axis_boundary_makes_first_feature_dominant() {
    let (scaler, train) = standardized(&uniform_cloud(400, 2, 1));
    let model = Halfspace { w: vec![1.0, 0.0], b: 0.0 };
    let explainer = Leafage::new(&model, &train, &scaler).unwrap();
    let z = [1.0, 0.3];
    let e = explainer.explain(&z, &LeafageConfig::default()).unwrap();
    assert_eq!(e.predicted_class, 1);
    assert!(e.importances[0] > 10.0 * e.importances[1], "{:?}", e.importances);
    for a in &e.allies {
        assert!(scaler.transform_row(&a.features)[0] > 0.0);
    }
    for en in &e.enemies {
        assert!(scaler.transform_row(&en.features)[0] <= 0.0);
    }
}

#[test]
fn explanations_are_deterministic() {
    let ad = generate_artificial(150, 2).unwrap();
    let (scaler, train) = standardized(&ad);
    let model = fit(ClassifierKind::Rf, &train, &Hyperparams::new(), 3).unwrap();
    let explainer = Leafage::new(&model, &train, &scaler).unwrap();
    let z = train.row(17).to_vec();
    let cfg = LeafageConfig { seed: 9, ..LeafageConfig::default() };
    assert_eq!(explainer.explain(&z, &cfg).unwrap(), explainer.explain(&z, &cfg).unwrap());
}

#[test]
fn no_enemy_in_training_is_an_error() {
    let (scaler, train) = standardized(&uniform_cloud(30, 2, 3));
    let model = Halfspace { w: vec![0.0, 0.0], b: 1.0 };
    assert!(Leafage::new(&model, &train, &scaler).unwrap().explain(&[0.0, 0.0], &LeafageConfig::default()).is_err());
}

/// Monotone-chain convex hull, counter-clockwise.
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

fn inside_closed_hull(hull: &[[f64; 2]], x: [f64; 2]) -> bool {
    (0..hull.len()).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= -1e-12
    })
}

#[test]
fn local_set_covers_both_classes_and_encloses_the_closest_enemy() {
    let ad = generate_artificial(250, 5).unwrap();
    let (scaler, train) = standardized(&ad);
    for kind in ClassifierKind::ALL {
        let model = fit(kind, &train, &Hyperparams::new(), 0).unwrap();
        let explainer = Leafage::new(&model, &train, &scaler).unwrap();
        for i in (0..train.n_rows()).step_by(25) {
            let z = train.row(i);
            let c_z = explainer.predicted()[i];
            let (s, local) = explainer.surrogate(z, c_z, &LeafageConfig::default()).unwrap();
            assert!(local.by_class.iter().all(|c| !c.is_empty()), "{kind}");
            let pts: Vec<[f64; 2]> = local.indices().iter().map(|&j| [train.row(j)[0], train.row(j)[1]]).collect();
            let b = train.row(s.x_border.unwrap());
            assert!(inside_closed_hull(&convex_hull(&pts), [b[0], b[1]]), "{kind} row {i}");
        }
    }
}

#[test]
fn surrogate_of_linear_black_box_agrees_on_its_neighbourhood() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..20 {
        let (scaler, train) = standardized(&uniform_cloud(300, 3, trial));
        let w: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let model = Halfspace { w, b: rng.random_range(-0.5..0.5) };
        let explainer = Leafage::new(&model, &train, &scaler).unwrap();
        let z = train.row(0).to_vec();
        let (s, local) = explainer.surrogate(&z, explainer.predicted()[0], &LeafageConfig::default()).unwrap();
        let idx = local.indices();
        let agree = idx
            .iter()
            .filter(|&&j| usize::from(s.score(train.row(j)) > 0.0) == explainer.predicted()[j])
            .count();
        assert!(agree as f64 >= 0.99 * idx.len() as f64, "trial {trial}: {agree}/{}", idx.len());
    }
}

#[test]
fn lime_agrees_with_linear_black_box_inside_two_sigma() {
    let model = Halfspace { w: vec![0.8, -0.6], b: 0.2 };
    let z = [0.3, 0.1];
    let cfg = LimeConfig { seed: 3, ..LimeConfig::default() };
    let s = lime_fit(&model, &z, &cfg).unwrap();
    let sigma = default_sigma(2);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut inside, mut agree) = (0, 0);
    while inside < 2000 {
        let x = [z[0] + rng.random_range(-2.0..2.0) * sigma, z[1] + rng.random_range(-2.0..2.0) * sigma];
        if ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2)).sqrt() > 2.0 * sigma {
            continue;
        }
        inside += 1;
        agree += usize::from((s.score(&x) > 0.0) == (model.score(&x) > 0.0));
    }
    assert!(agree as f64 >= 0.99 * inside as f64, "{agree}/{inside}");
    assert_eq!(s, lime_fit(&model, &z, &cfg).unwrap());
}

fn arb_rows() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..4, 6usize..60, any::<u64>()).prop_map(|(d, n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Coarse grid values so that distance ties occur.
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-4i32..=4) as f64 / 2.0).collect()).collect();
        let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        (rows, labels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn retrieval_matches_exhaustive_sort((rows, labels) in arb_rows(), w in prop::collection::vec(-2.0f64..2.0, 3), zi in 0usize..6, k in 1usize..8) {
        let d = rows[0].len();
        let s = LocalSurrogate { weights: w[..d].to_vec(), intercept: 0.0, x_border: None, local_indices: vec![], degenerate: w[..d].iter().all(|v| *v == 0.0) };
        let z = rows[zi % rows.len()].clone();
        let c_z = labels[zi % rows.len()];
        let got = retrieve_examples(&rows, &labels, &s, &z, c_z, k).unwrap();
        let mut scored: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, t)| (dissimilarity(&s, &z, t).unwrap(), i)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let allies: Vec<usize> = scored.iter().filter(|(_, i)| labels[*i] == c_z && rows[*i] != z).map(|p| p.1).take(k).collect();
        let enemies: Vec<usize> = scored.iter().filter(|(_, i)| labels[*i] != c_z).map(|p| p.1).take(k).collect();
        prop_assert_eq!(got.allies.iter().map(|n| n.index).collect::<Vec<_>>(), allies);
        prop_assert_eq!(got.enemies.iter().map(|n| n.index).collect::<Vec<_>>(), enemies);
        prop_assert!(got.allies.windows(2).all(|p| p[0].dissimilarity <= p[1].dissimilarity));
    }

    #[test]
    fn closest_enemy_is_nearest_opposite_row((rows, labels) in arb_rows(), zi in 0usize..6) {
        let z = &rows[zi % rows.len()];
        let c_z = labels[zi % rows.len()];
        let got = closest_enemy(&rows, &labels, z, c_z).unwrap();
        let dist = |r: &Vec<f64>| r.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let oracle = (0..rows.len()).filter(|&i| labels[i] != c_z).min_by(|&a, &b| dist(&rows[a]).total_cmp(&dist(&rows[b])).then(a.cmp(&b))).unwrap();
        prop_assert_eq!(got, oracle);
    }

    #[test]
    fn local_set_has_both_classes((rows, labels) in arb_rows(), i_small in 2usize..6) {
        let cfg = LeafageConfig { i_small, ..LeafageConfig::default() };
        let border = 1;
        let set = sample_local_training_set(&rows, &labels, border, &cfg).unwrap();
        prop_assert!(set.by_class.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn kernel_weight_decreases_with_distance(a in 0.0f64..5.0, b in 0.0f64..5.0, sigma in 0.1f64..3.0) {
        let z = [0.0, 0.0];
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let wn = kernel_weight(&z, &[near, 0.0], sigma);
        let wf = kernel_weight(&z, &[0.0, far], sigma);
        // Far weights may underflow to zero.
        prop_assert!(wn >= wf && wf >= 0.0 && wn <= 1.0);
    }
}

#[test]
fn explanation_invariants_on_artificial_data() {
    let ad = generate_artificial(200, 6).unwrap();
    let (scaler, train) = standardized(&ad);
    for kind in ClassifierKind::ALL {
        let model = fit(kind, &train, &Hyperparams::new(), 1).unwrap();
        let explainer = Leafage::new(&model, &train, &scaler).unwrap();
        for i in (0..train.n_rows()).step_by(40) {
            let z = train.row(i).to_vec();
            let e = explainer.explain(&z, &LeafageConfig::default()).unwrap();
            if !e.flags.contains(&Flag::AllyShortfall) {
                assert_eq!(e.allies.len(), 5);
            }
            assert!(e.importances.iter().all(|v| *v >= 0.0));
            for a in &e.allies {
                assert_eq!(explainer.predicted()[a.index], e.predicted_class);
            }
            for en in &e.enemies {
                assert_ne!(explainer.predicted()[en.index], e.predicted_class);
            }
            assert!(e.allies.windows(2).all(|p| p[0].dissimilarity <= p[1].dissimilarity));
            assert!(e.enemies.windows(2).all(|p| p[0].dissimilarity <= p[1].dissimilarity));
            for (a, b) in e.test_instance.iter().zip(scaler.inverse_row(&z)) {
                assert_eq!(*a, b);
            }
        }
    }
}
