use gcl::gcl::{compute_cloud_sizes, gcl_loss, CloudStrategy, GclConfig};
use gcl::model::{Head, HeadKind, Layer, LinearClassifier, MlpBackbone, Model};
use gcl::numerics::{finite_diff_grad, relative_error, RngStream, Tensor1, Tensor2};

fn t2(rows: &[&[f64]]) -> Tensor2 {
    Tensor2::from_rows(rows).unwrap()
}

#[test]
fn zero_upstream_gives_exactly_zero_gradients() {
    let mut rng = RngStream::new(9);
    for kind in [HeadKind::Cosine, HeadKind::Linear] {
        let m = Model::new(&[5, 7, 6, 4], 3, kind, &mut rng).unwrap();
        let x = Tensor2::from_vec(4, 5, (0..20).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let (z, tape) = m.forward(&x).unwrap();
        let g = m.backward(&tape, &Tensor2::zeros(z.rows(), z.cols())).unwrap();
        for s in g.slices() {
            assert!(s.iter().all(|&v| v == 0.0));
        }
        assert!(g.input.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn single_linear_layer_and_dot_product_head_by_hand() {
    // f = x W + b with W = I, b = 0; z = f V + c.
    let backbone = MlpBackbone::from_layers(vec![Layer {
        weight: Tensor2::identity(2),
        bias: Tensor1::zeros(2),
    }])
    .unwrap();
    let head = LinearClassifier::from_parts(t2(&[&[1.0, 2.0], &[3.0, 4.0]]), Tensor1::zeros(2)).unwrap();
    let m = Model {
        backbone,
        head: Head::Linear(head),
    };
    let x = t2(&[&[1.0, 2.0]]);
    let (z, tape) = m.forward(&x).unwrap();
    assert_eq!(z.data(), &[7.0, 10.0]);
    let g = m.backward(&tape, &t2(&[&[1.0, -1.0]])).unwrap();
    // dV = f^T g, dc = g, df = g V^T, dW = x^T df, db = df, dx = df W^T.
    assert_eq!(g.head.weight.data(), &[1.0, -1.0, 2.0, -2.0]);
    assert_eq!(g.head.bias.as_ref().unwrap().data(), &[1.0, -1.0]);
    assert_eq!(g.layers[0].weight.data(), &[-1.0, -1.0, -2.0, -2.0]);
    assert_eq!(g.layers[0].bias.data(), &[-1.0, -1.0]);
    assert_eq!(g.input.data(), &[-1.0, -1.0]);
}

#[test]
fn cosine_head_on_three_classes_matches_finite_differences() {
    let mut rng = RngStream::new(21);
    let m = Model::new(&[4, 6, 5], 3, HeadKind::Cosine, &mut rng).unwrap();
    let x = t2(&[&[0.3, -1.2, 0.8, 0.5], &[1.1, 0.4, -0.7, 0.9], &[-0.2, 0.6, 1.5, -1.0]]);
    let labels = [0, 2, 1];
    let cfg = GclConfig::default();
    let table = compute_cloud_sizes(&[300, 40, 7], CloudStrategy::LogDiff).unwrap();
    let eps = [0.2, 0.05, 0.4];

    let (f, _) = m.forward_features(&x).unwrap();
    let (z, tape) = m.head.forward(&f).unwrap();
    let dz = gcl_loss(&z, &labels, &table, &eps, &cfg).unwrap().grad;
    let (grad, df) = m.head.backward(&tape, &dz).unwrap();

    let loss_at = |w: &Tensor2, f: &Tensor2| {
        let head = Head::Cosine(gcl::model::CosineClassifier::from_weight(w.clone()).unwrap());
        let z = head.forward(f).unwrap().0;
        gcl_loss(&z, &labels, &table, &eps, &cfg).unwrap().loss
    };
    let w = m.head.weight().clone();
    let num_w = finite_diff_grad(
        |v| loss_at(&Tensor2::from_vec(w.rows(), w.cols(), v.to_vec()).unwrap(), &f),
        &Tensor1::from_vec(w.data().to_vec()).unwrap(),
        1e-6,
    )
    .unwrap();
    let num_f = finite_diff_grad(
        |v| loss_at(&w, &Tensor2::from_vec(f.rows(), f.cols(), v.to_vec()).unwrap()),
        &Tensor1::from_vec(f.data().to_vec()).unwrap(),
        1e-6,
    )
    .unwrap();
    assert!(relative_error(grad.weight.data(), num_w.data()) <= 1e-5);
    assert!(relative_error(df.data(), num_f.data()) <= 1e-5);
}
