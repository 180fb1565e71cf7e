use lfsr_core::nn::{Binder, Conv, ParamBag};
use lfsr_core::train::{sample_training_item, Stage1Trainer, TrainConfig};
use lfsr_core::{autograd::Graph, LightField, Real, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // A) raw conv forward throughput, 64->64 on 32x32.
    let conv = Conv::<f32>::init(&mut rng, 64, 64, true);
    let x = Tensor::<f32>::from_fn(&[1, 64, 32, 32], |i| (i % 97) as f32 * 0.01);
    let reps = 400;
    let t0 = Instant::now();
    let mut sink = 0.0f32;
    for _ in 0..reps {
        let mut g = Graph::<f32>::new();
        let mut b = Binder::new(&mut g, false);
        let xid = b.constant(x.clone());
        let y = conv.apply(&mut b, xid);
        sink += g.value(y).data()[0];
    }
    let dt = t0.elapsed().as_secs_f64();
    let macs = 64.0 * 64.0 * 9.0 * 1024.0 * reps as f64;
    println!(
        "conv fwd: {:.3} ms/call, {:.1} GMAC/s (sink {sink})",
        dt * 1000.0 / reps as f64,
        macs / dt / 1e9
    );

    // B) conv forward+backward throughput.
    let t0 = Instant::now();
    for _ in 0..reps {
        let mut g = Graph::<f32>::new();
        let mut b = Binder::new(&mut g, true);
        let xid = b.constant(x.clone());
        let y = conv.apply(&mut b, xid);
        let target = b.constant(Tensor::zeros(&[1, 64, 32, 32]));
        let loss = g.l1_loss(y, target);
        g.backward(loss);
    }
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "conv fwd+bwd: {:.3} ms/call, {:.1} GMAC/s equiv",
        dt * 1000.0 / reps as f64,
        3.0 * macs / dt / 1e9
    );

    // C) one full default stage-1 iteration, phase by phase.
    let cfg = TrainConfig::default();
    let mut trainer = Stage1Trainer::new(cfg).unwrap();
    let scene = synth_scene(129, 0.8);
    let mut draw = ChaCha8Rng::seed_from_u64(9);
    let (lr_patch, gt_lf, u_ref) = sample_training_item(&scene, &cfg, &mut draw).unwrap();
    let gt = gt_lf.view(u_ref.0, u_ref.1).unwrap();

    for round in 0..3 {
        let t0 = Instant::now();
        let (loss, grads, ids_len) = forward_backward(&trainer, &lr_patch, &gt, u_ref);
        let dt = t0.elapsed().as_secs_f64();
        println!(
            "iter {round}: fwd+bwd {:.2} s ({} grads, loss {loss:.3})",
            dt,
            grads
        );
        let _ = ids_len;
    }

    let t0 = Instant::now();
    let n = 5;
    for _ in 0..n {
        trainer.train_epoch(std::slice::from_ref(&scene), &mut Vec::new()).unwrap();
    }
    println!(
        "full train_epoch: {:.2} s/iter",
        t0.elapsed().as_secs_f64() / n as f64
    );
}

fn synth_scene(texture: usize, d: f64) -> LightField<f32> {
    let tex = Tensor::<f32>::from_fn(&[texture, texture, 1], |i| {
        let (y, x) = ((i / texture) as f64, (i % texture) as f64);
        (0.5 + 0.3 * (0.37 * x + 0.11 * y).sin() + 0.2 * (0.07 * x - 0.21 * y).cos()) as f32
    })
    .reshaped(&[texture, texture]);
    let spec = lfsr_core::SynthSpec {
        texture: tex,
        disparity: lfsr_core::Disparity::Constant(d),
        angular_res: (7, 7),
    };
    lfsr_core::lightfield::synth_lightfield(&spec).unwrap()
}

fn forward_backward(
    trainer: &Stage1Trainer,
    lr_patch: &LightField<f32>,
    gt: &Tensor<f32>,
    u_ref: (usize, usize),
) -> (f64, usize, usize) {
    let p = gt.shape()[0];
    let skip = lfsr_core::resample::bicubic_upsample(&lr_patch.view(u_ref.0, u_ref.1).unwrap(), trainer.cfg.alpha).unwrap();
    let mut g = Graph::<f32>::new();
    let mut b = Binder::new(&mut g, true);
    let (m, n) = lr_patch.angular_res();
    let (h, w) = lr_patch.spatial_res();
    let views = b.constant(Tensor::from_vec(
        &[m * n, 1, h, w],
        lr_patch.data().data().to_vec(),
    ));
    let skip_id = b.constant(skip.reshaped(&[1, 1, p, p]));
    let reference = u_ref.0 * trainer.cfg.angular_res.1 + u_ref.1;
    let pred = trainer
        .model
        .graph_forward(&mut b, views, reference, skip_id);
    let gt_id = b.constant(gt.clone().reshaped(&[1, 1, p, p]));
    let ids = b.into_param_ids();
    let loss = g.l1_loss(pred, gt_id);
    let t_fwd = Instant::now();
    g.backward(loss);
    let bwd = t_fwd.elapsed().as_secs_f64();
    println!("  (bwd alone {bwd:.2} s)");
    let count = ids.iter().filter(|id| g.grad(**id).is_some()).count();
    (g.value(loss).data()[0].as_f64(), count, ids.len())
}
