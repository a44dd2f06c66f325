use liveview_core::net::{
    layer_specs, param_count, HeadMode, NetworkConfig, Network, PlaneContext, STRIDE_MULTIPLE,
};
use liveview_tensor::gradcheck::{check, tape_gradients, tape_value, Entries};
use liveview_tensor::{BnMode, Tape, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(seed: u64, n: usize, c: usize, h: usize, w: usize) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec(vec![n, c, h, w], (0..n * c * h * w).map(|_| rng.gen::<f32>()).collect()).unwrap()
}

fn v5() -> NetworkConfig {
    NetworkConfig::new(5).unwrap()
}

#[test]
fn head_shapes_and_contracts() {
    let net = Network::<f32>::init(v5(), 1).unwrap();
    let out = net.forward(&random_input(2, 1, 15, 96, 96)).unwrap();
    assert_eq!(out.alpha.shape(), &[1, 1, 96, 96]);
    assert_eq!(out.weights.shape(), &[1, 5, 96, 96]);
    assert!(out.alpha.data().iter().all(|&a| a > 0.0 && a < 1.0));
    let hw = 96 * 96;
    for i in 0..hw {
        let s: f32 = (0..5).map(|v| out.weights.data()[v * hw + i]).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}

#[test]
fn paper_head_gives_the_last_view_zero_weight() {
    let net = Network::<f32>::init(v5().with_head(HeadMode::PaperVminus1), 1).unwrap();
    let out = net.forward(&random_input(3, 1, 15, 16, 16)).unwrap();
    assert_eq!(out.weights.shape(), &[1, 5, 16, 16]);
    assert!(out.weights.data()[4 * 256..].iter().all(|&w| w == 0.0));
}

#[test]
fn odd_sizes_are_padded_and_cropped() {
    let net = Network::<f32>::init(v5(), 1).unwrap();
    let out = net.forward(&random_input(4, 1, 15, 50, 50)).unwrap();
    assert_eq!(out.alpha.shape(), &[1, 1, 50, 50]);
    let trace = net.trace_shapes(50, 50).unwrap();
    assert_eq!(trace[0].1, vec![1, 16, 56, 56]);
    assert_eq!(trace.last().unwrap().1, vec![1, 6, 56, 56]);
}

#[test]
fn architecture_audit() {
    for (h, w) in [(16, 24), (48, 96), (96, 96)] {
        for ctx in [PlaneContext::Dynamic, PlaneContext::Static] {
            let cfg = v5().with_context(ctx);
            let net = Network::<f32>::init(cfg, 0).unwrap();
            let trace = net.trace_shapes(h, w).unwrap();
            let specs = layer_specs(&cfg);
            assert_eq!(trace.len(), specs.len());
            for ((name, shape), spec) in trace.iter().zip(&specs) {
                assert_eq!(*name, spec.name);
                assert_eq!(shape, &vec![1, spec.out_channels, h / spec.out_scale, w / spec.out_scale]);
                assert_eq!(spec.in_scale * spec.stride, spec.out_scale);
            }
        }
    }
    assert_eq!(STRIDE_MULTIPLE, 8);
}

#[test]
fn batched_planes_match_separate_evaluation() {
    let mut net = Network::<f32>::init(v5(), 5).unwrap();
    // give the running statistics non-trivial values
    let mut tape = Tape::new();
    let p = net.register(&mut tape);
    let x = tape.constant(random_input(6, 3, 15, 24, 24));
    net.forward_tape(&mut tape, &p, x, BnMode::Train).unwrap();
    let batch = random_input(7, 2, 15, 24, 24);
    let both = net.forward(&batch).unwrap();
    let par = net.forward_par(&batch).unwrap();
    assert_eq!(both, par);
    for i in 0..2 {
        let one = net.forward(&batch.narrow(0, i, 1).unwrap()).unwrap();
        assert_eq!(one.alpha, both.alpha.narrow(0, i, 1).unwrap());
        assert_eq!(one.weights, both.weights.narrow(0, i, 1).unwrap());
    }
    // perturbing one plane leaves the other untouched
    let mut other = batch.clone();
    other.data_mut()[15 * 24 * 24 + 3] += 0.5;
    let perturbed = net.forward(&other).unwrap();
    assert_eq!(perturbed.alpha.narrow(0, 0, 1).unwrap(), both.alpha.narrow(0, 0, 1).unwrap());
    assert_ne!(perturbed.alpha.narrow(0, 1, 1).unwrap(), both.alpha.narrow(0, 1, 1).unwrap());
}

#[test]
fn tape_forward_in_eval_mode_matches_inference() {
    let mut net = Network::<f64>::init(v5(), 8).unwrap();
    let input = random_input(9, 2, 15, 16, 16).cast::<f64>();
    let direct = net.forward(&input).unwrap();
    let mut tape = Tape::new();
    let p = net.register(&mut tape);
    let x = tape.constant(input);
    let (a, w) = net.forward_tape(&mut tape, &p, x, BnMode::Eval).unwrap();
    assert!(tape.value(a).max_abs_diff(&direct.alpha).unwrap() < 1e-12);
    assert!(tape.value(w).max_abs_diff(&direct.weights).unwrap() < 1e-12);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.lvw");
    let mut net = Network::<f32>::init(v5().with_context(PlaneContext::Static), 11).unwrap();
    net.set_trained_planes(16);
    net.save(&path).unwrap();
    let back = Network::<f32>::load(&path).unwrap();
    assert_eq!(back.config(), net.config());
    assert_eq!(back.trained_planes(), 16);
    assert_eq!(back.params(), net.params());
    assert_eq!(back.batchnorm_stats(), net.batchnorm_stats());
    assert_eq!(back.param_count(), param_count(net.config()));
}

#[test]
fn mismatched_input_channels_are_rejected() {
    let net = Network::<f32>::init(v5(), 1).unwrap();
    assert!(net.forward(&random_input(1, 1, 12, 16, 16)).is_err());
}

/// Every parameter tensor of the full network against central differences,
/// on 16×16 inputs with batch statistics.
#[test]
fn end_to_end_network_gradients() {
    let cfg = v5();
    let net = Network::<f64>::init(cfg, 21).unwrap();
    let input = random_input(22, 2, 15, 16, 16).cast::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pa = Tensor::from_vec(vec![2, 1, 16, 16], (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let pw = Tensor::from_vec(vec![2, 5, 16, 16], (0..2560).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let params: Vec<Tensor<f64>> = net.params().into_iter().cloned().collect();
    let mut build = |tape: &mut Tape<f64>, vars: &[liveview_tensor::Var]| -> liveview_tensor::Result<liveview_tensor::Var> {
        let mut local = net.clone();
        let p = liveview_core::net::ParamVars {
            weights: vars[..9].to_vec(),
            biases: vars[9..18].to_vec(),
            gammas: vars[18..26].to_vec(),
            betas: vars[26..].to_vec(),
        };
        let x = tape.constant(input.clone());
        let (a, w) = local
            .forward_tape(tape, &p, x, BnMode::Train)
            .map_err(|e| TensorError::Contract(e.to_string()))?;
        let ca = tape.constant(pa.clone());
        let cw = tape.constant(pw.clone());
        let la = tape.mul(a, ca)?;
        let lw = tape.mul(w, cw)?;
        let sa = tape.sum(la);
        let sw = tape.sum(lw);
        tape.add(sa, sw)
    };
    let (_, analytic) = tape_gradients(&params, &mut build).unwrap();
    let report = check(
        &params,
        &analytic,
        |p| tape_value(p, &mut build),
        1e-5,
        Entries::Sample { count: 24, seed: 5 },
        1e-4,
    );
    assert_eq!(analytic.len(), 9 + 9 + 8 + 8);
    assert!(report.max_rel_err < 1e-3, "{report:?}");
}
