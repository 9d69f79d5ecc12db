use super::*;
use crate::hin::NodeKind;
use crate::ingest::{random_hin, synth_features};
use crate::numkit::grad_check;
use proptest::prelude::*;

fn cfg(d_in: usize, hidden: usize, layers: usize) -> ModelConfig {
    ModelConfig {
        d_in,
        hidden,
        layers,
        activation: Activation::default(),
        variant: Variant::Gated,
    }
}

fn all_relations() -> Vec<RelationKind> {
    RelationKind::ALL.to_vec()
}

fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn init_is_deterministic_with_zero_biases() {
    let a = ModelParams::init(cfg(6, 4, 2), 3).unwrap();
    assert_eq!(a, ModelParams::init(cfg(6, 4, 2), 3).unwrap());
    assert_ne!(a, ModelParams::init(cfg(6, 4, 2), 4).unwrap());
    for (name, m) in a.named_tensors() {
        if name.ends_with(".bias") {
            assert!(m.as_slice().iter().all(|&v| v == 0.0), "{name}");
        }
    }
    let limit = (6.0f64 / (6 + 4) as f64).sqrt();
    assert!(a.input.weight.as_slice().iter().all(|w| w.abs() <= limit));
    assert!(ModelParams::init(cfg(0, 4, 2), 0).is_err());
}

#[test]
fn parameter_count_matches_layer_shapes() {
    let p = ModelParams::init(cfg(768, 512, 2), 0).unwrap();
    let d = 512;
    let per_layer = 6 * (d * d + d) + (2 * d * d + d);
    let expected = (768 * d + d) + 2 * per_layer + 2 * (d * 5 + 5);
    assert_eq!(p.parameter_count(), expected);
    assert_eq!(expected, 4_600_330);
}

// The reported size of the original encoder is about 2.0M. The per-layer
// shapes above (five relation transforms, a self transform and a 2d x d gate
// per layer) cannot reach that at d = 512; see the project notes.
#[test]
#[ignore = "layer shapes at d=512 give 4.6M parameters, outside 2.0M +/- 10%"]
fn parameter_count_near_reported_size() {
    let p = ModelParams::init(cfg(768, 512, 2), 0).unwrap();
    let n = p.parameter_count() as f64;
    assert!((n - 2.0e6).abs() <= 0.2e6, "{n}");
}

#[test]
fn variants_have_expected_tensors() {
    let plain = ModelParams::init(
        ModelConfig {
            variant: Variant::Plain,
            ..cfg(3, 4, 2)
        },
        0,
    )
    .unwrap();
    assert!(plain
        .layers
        .iter()
        .all(|l| l.gate.is_none() && l.relations.len() == 5));
    let homo = ModelParams::init(
        ModelConfig {
            variant: Variant::Homogeneous,
            ..cfg(3, 4, 2)
        },
        0,
    )
    .unwrap();
    assert!(homo
        .layers
        .iter()
        .all(|l| l.gate.is_none() && l.relations.len() == 1));
    assert_eq!(
        "homogeneous".parse::<Variant>().unwrap(),
        Variant::Homogeneous
    );
    assert!("attention".parse::<Variant>().is_err());
    assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
    assert_eq!(
        "leaky_relu:0.2".parse::<Activation>().unwrap(),
        Activation::LeakyRelu(0.2)
    );
    assert_eq!(
        Activation::LeakyRelu(0.2)
            .to_string()
            .parse::<Activation>()
            .unwrap(),
        Activation::LeakyRelu(0.2)
    );
}

#[test]
fn input_transform_examples() {
    let mut p = ModelParams::init(cfg(3, 3, 0), 1).unwrap();
    let v = Matrix::from_rows(&[vec![0.5, 1.0, 2.0], vec![3.0, 0.1, 0.2]]).unwrap();
    p.input = Linear::zeros(3, 3);
    assert_eq!(input_transform(&v, &p).unwrap(), Matrix::zeros(2, 3));
    p.input.weight = Matrix::identity(3);
    assert_eq!(input_transform(&v, &p).unwrap(), v);

    let mut q = ModelParams::init(cfg(1, 1, 0), 1).unwrap();
    q.input.weight = Matrix::scalar(1.0);
    let out = input_transform(&Matrix::scalar(-1.0), &q).unwrap();
    assert!((out.item().unwrap() + 0.01).abs() < 1e-15);
    assert!(matches!(
        input_transform(&Matrix::zeros(1, 2), &q),
        Err(ModelError::FeatureWidth {
            expected: 1,
            got: 2
        })
    ));
}

fn pair_graph() -> Hin {
    let mut h = Hin::new();
    let leg = h.add_node(NodeKind::Legislator, "a").unwrap();
    let party = h.add_node(NodeKind::Party, "p").unwrap();
    h.add_edge(leg, party, RelationKind::PartyAffiliation)
        .unwrap();
    h
}

#[test]
fn gate_limits() {
    let graph = GraphStructure::new(&pair_graph());
    let p = ModelParams::init(cfg(3, 3, 1), 2).unwrap();
    let x = Matrix::from_rows(&[vec![0.3, -0.7, 1.5], vec![-2.0, 0.4, 0.1]]).unwrap();

    let mut closed = p.layers[0].clone();
    let gate = closed.gate.as_mut().unwrap();
    gate.weight.fill(0.0);
    gate.bias.fill(-1e3);
    let (next, g) = layer_forward(&x, &graph, &closed, &p.config).unwrap();
    assert_close(&next, &x, 1e-12);
    assert!(g.unwrap().as_slice().iter().all(|&v| v < 1e-12));

    let mut open = p.layers[0].clone();
    let gate = open.gate.as_mut().unwrap();
    gate.weight.fill(0.0);
    gate.bias.fill(1e3);
    let (next, _) = layer_forward(&x, &graph, &open, &p.config).unwrap();
    // with g = 1 the update is tanh(u); u is recovered from the plain variant
    // with an identity-free check: plain applies phi, so compute u directly.
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let ws = tape.constant(open.self_loop.weight.clone());
    let bs = tape.constant(open.self_loop.bias.clone());
    let xs = tape.matmul(xv, ws).unwrap();
    let mut u = tape.add_bias(xs, bs).unwrap();
    let r1 = &open.relations[0];
    let w1 = tape.constant(r1.weight.clone());
    let b1 = tape.constant(r1.bias.clone());
    let f1 = tape.matmul(xv, w1).unwrap();
    let f1 = tape.add_bias(f1, b1).unwrap();
    let sets: Arc<[Vec<usize>]> = Arc::from(vec![vec![1], vec![0]]);
    let agg = tape.segment_mean(f1, sets).unwrap();
    u = tape.add(u, agg).unwrap();
    let expected = tape.value(u).map(f64::tanh);
    assert_close(&next, &expected, 1e-12);
}

#[test]
fn single_neighbor_without_self_term() {
    let graph = GraphStructure::new(&pair_graph());
    let p = ModelParams::init(
        ModelConfig {
            variant: Variant::Plain,
            ..cfg(2, 2, 1)
        },
        5,
    )
    .unwrap();
    let mut layer = p.layers[0].clone();
    layer.self_loop = Linear::zeros(2, 2);
    layer.relations[0] = Linear {
        weight: Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
        bias: Matrix::row_vector(&[0.5, -0.5]),
    };
    let x = Matrix::from_rows(&[vec![9.0, 9.0], vec![1.0, 1.0]]).unwrap();
    let (next, gate) = layer_forward(&x, &graph, &layer, &p.config).unwrap();
    assert!(gate.is_none());
    // node 0's only neighbor is node 1: u_0 = [1, 1] W + b = [4.5, 5.5]
    assert_eq!(next.row(0), &[4.5, 5.5]);
}

#[test]
fn zero_layers_is_input_transform() {
    let h = random_hin(10, &all_relations(), 4, 1);
    let p = ModelParams::init(cfg(4, 3, 0), 1).unwrap();
    let out = encode(&h, &p).unwrap();
    assert_eq!(out.x_final, input_transform(h.features(), &p).unwrap());
    assert!(out.gates.is_empty());
    assert_eq!(out.actor_rows, h.actor_ids());
}

#[test]
fn stance_heads_are_distributions() {
    let h = random_hin(8, &all_relations(), 4, 2);
    let mut p = ModelParams::init(cfg(4, 3, 2), 2).unwrap();
    let x = encode(&h, &p).unwrap().x_final;
    let (l, c) = stance_heads(&x, &p).unwrap();
    for m in [&l, &c] {
        for r in 0..m.rows() {
            assert!((m.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    let shifted = {
        let mut q = p.clone();
        q.liberal_head.bias = q.liberal_head.bias.map(|b| b + 7.0);
        stance_heads(&x, &q).unwrap().0
    };
    assert_close(&shifted, &l, 1e-12);

    p.liberal_head = Linear::zeros(3, 5);
    p.conservative_head = Linear::zeros(3, 5);
    let (l, c) = stance_heads(&x, &p).unwrap();
    assert!(l
        .as_slice()
        .iter()
        .chain(c.as_slice())
        .all(|&v| (v - 0.2).abs() < 1e-15));
}

fn permuted(h: &Hin, perm: &[usize]) -> Hin {
    // perm[new] = old
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut out = Hin::new();
    for &old in perm {
        let n = h.node(old).unwrap();
        out.add_node(n.kind, &n.name).unwrap();
    }
    for rel in RelationKind::ALL {
        for &(s, d) in h.edges(rel) {
            out.add_edge(inv[s], inv[d], rel).unwrap();
        }
    }
    out.set_features(h.features().select_rows(perm)).unwrap();
    out
}

#[test]
fn disconnected_components_are_independent() {
    let a = random_hin(8, &all_relations(), 3, 4);
    let b = random_hin(8, &all_relations(), 3, 5);
    let join = |b_feats: &Matrix| {
        let mut h = Hin::new();
        for (tag, g) in [("a", &a), ("b", &b)] {
            let base = h.node_count();
            for n in g.nodes() {
                h.add_node(n.kind, &format!("{tag}-{}", n.name)).unwrap();
            }
            for rel in RelationKind::ALL {
                for &(s, d) in g.edges(rel) {
                    h.add_edge(base + s, base + d, rel).unwrap();
                }
            }
        }
        let mut f = Matrix::zeros(16, 3);
        for r in 0..8 {
            f.row_mut(r).copy_from_slice(a.features().row(r));
            f.row_mut(8 + r).copy_from_slice(b_feats.row(r));
        }
        h.set_features(f).unwrap();
        h
    };
    let p = ModelParams::init(cfg(3, 4, 2), 9).unwrap();
    let x1 = encode(&join(b.features()), &p).unwrap().x_final;
    let x2 = encode(&join(&synth_features(8, 3, 77)), &p)
        .unwrap()
        .x_final;
    for r in 0..8 {
        assert_eq!(x1.row(r), x2.row(r));
    }
    assert_ne!(x1.row(8), x2.row(8));
}

#[test]
fn relation_locality() {
    let h = random_hin(10, &all_relations(), 3, 6);
    for rel in RelationKind::ALL {
        let mut p = ModelParams::init(cfg(3, 4, 2), 6).unwrap();
        for layer in &mut p.layers {
            layer.relations[rel.index()] = Linear::zeros(4, 4);
        }
        let mut removed = Hin::new();
        for n in h.nodes() {
            removed.add_node(n.kind, &n.name).unwrap();
        }
        for r in RelationKind::ALL.into_iter().filter(|&r| r != rel) {
            for &(s, d) in h.edges(r) {
                removed.add_edge(s, d, r).unwrap();
            }
        }
        removed.set_features(h.features().clone()).unwrap();
        let a = encode(&h, &p).unwrap().x_final;
        let b = encode(&removed, &p).unwrap().x_final;
        assert_close(&a, &b, 1e-12);
    }
}

#[test]
fn full_model_gradient_check() {
    let h = random_hin(10, &all_relations(), 3, 8);
    for variant in [Variant::Gated, Variant::Plain, Variant::Homogeneous] {
        let p = ModelParams::init(
            ModelConfig {
                variant,
                ..cfg(3, 4, 2)
            },
            8,
        )
        .unwrap();
        let graph = GraphStructure::new(&h);
        let weights = synth_features(10, 5, 99);
        let tensors: Vec<Matrix> = p
            .named_tensors()
            .into_iter()
            .map(|(_, m)| m.clone())
            .collect();
        let loss = |tape: &mut Tape, vars: &[Var]| -> Result<Var, NumError> {
            let bound = p.bind_to(vars);
            let f = tape.constant(h.features().clone());
            let enc = encode_var(tape, &bound, &graph, f)?;
            let (ll, cl) = head_logits_var(tape, &bound, enc.x_final)?;
            let ls = tape.log_softmax(ll)?;
            let cs = tape.log_softmax(cl)?;
            let w = tape.constant(weights.clone());
            let a = tape.hadamard(ls, w)?;
            let b = tape.hadamard(cs, w)?;
            let s = tape.add(a, b)?;
            tape.sum(s)
        };
        let report = grad_check(loss, &tensors, 1e-5).unwrap();
        assert!(report.max_rel_error < 1e-4, "{variant}: {report:?}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for variant in [Variant::Gated, Variant::Homogeneous] {
        let p = ModelParams::init(
            ModelConfig {
                variant,
                activation: Activation::Relu,
                ..cfg(5, 4, 2)
            },
            12,
        )
        .unwrap();
        let path = dir.path().join(variant.to_string());
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        for ((_, a), (_, b)) in p.named_tensors().iter().zip(q.named_tensors()) {
            assert!(a
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
    let bad = dir.path().join("gated").join("layer0.gate.bias.bin");
    std::fs::write(&bad, [0u8; 3]).unwrap();
    let e = load_checkpoint(&dir.path().join("gated"))
        .unwrap_err()
        .to_string();
    assert!(e.contains("layer0.gate.bias.bin"), "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gates_in_open_interval_and_drift_bounded(seed in any::<u64>(), scale in 0.1f64..5.0) {
        let h = random_hin(10, &all_relations(), 3, seed);
        let p = ModelParams::init(cfg(3, 4, 1), seed).unwrap();
        let graph = GraphStructure::new(&h);
        let x = synth_features(10, 4, seed ^ 1).map(|v| v * scale);
        let (next, g) = layer_forward(&x, &graph, &p.layers[0], &p.config).unwrap();
        let g = g.unwrap();
        prop_assert!(g.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        for (a, b) in next.as_slice().iter().zip(x.as_slice()) {
            prop_assert!(a.abs() <= b.abs().max(1.0) + 1e-12);
        }
    }

    #[test]
    fn encoder_is_permutation_equivariant(seed in any::<u64>()) {
        let h = random_hin(10, &all_relations(), 3, seed);
        let mut perm: Vec<usize> = (0..10).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng::seeded(seed));
        let hp = permuted(&h, &perm);
        let p = ModelParams::init(cfg(3, 4, 2), seed).unwrap();
        let a = encode(&h, &p).unwrap().x_final;
        let b = encode(&hp, &p).unwrap().x_final;
        assert_close(&b, &a.select_rows(&perm), 1e-12);
    }
}
