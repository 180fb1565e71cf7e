//! Temporary calibration probe (not part of the shipped artifact).

use lfsr_core::ato::forward_all_views;
use lfsr_core::checkpoint::load_ato_model;
use lfsr_core::io::load_scene;
use lfsr_core::loss::loss_epi_gradient;
use lfsr_core::metrics::{parallax_pr_curve, psnr};
use lfsr_core::regnet::regularize;
use lfsr_core::resample::bicubic_upsample;
use lfsr_core::train::{downsample_scene, Stage2Trainer, TrainConfig};
use lfsr_core::LightField;
use std::path::Path;
use std::time::Instant;

fn mean_psnr(pred: &LightField<f32>, gt: &LightField<f32>) -> f64 {
    let (m, n) = gt.angular_res();
    let mut acc = 0.0;
    for mi in 0..m {
        for ni in 0..n {
            acc += psnr(&pred.view(mi, ni).unwrap(), &gt.view(mi, ni).unwrap(), 1.0).unwrap();
        }
    }
    acc / (m * n) as f64
}

fn main() {
    let hr = load_scene(Path::new("/tmp/smoke/ovf/hr/scene")).unwrap().lf;
    let lr = downsample_scene(&hr, 2).unwrap();
    let (m, n) = hr.angular_res();

    let mut bic = LightField::zeros(m, n, hr.spatial_res().0, hr.spatial_res().1);
    for mi in 0..m {
        for ni in 0..n {
            bic.set_view(mi, ni, &bicubic_upsample(&lr.view(mi, ni).unwrap(), 2).unwrap())
                .unwrap();
        }
    }
    let psnr_bic = mean_psnr(&bic, &hr);
    println!("bicubic mean psnr: {psnr_bic:.3} dB");

    let (ato, _) = load_ato_model(Path::new("/tmp/ovf800/ato.ckpt")).unwrap();
    let t0 = Instant::now();
    let inter = forward_all_views(&lr, &ato).unwrap();
    println!("forward_all_views: {:.1}s", t0.elapsed().as_secs_f64());
    let psnr_inter = mean_psnr(&inter, &hr);
    let le_inter = loss_epi_gradient(&inter, &hr).unwrap().value;
    println!(
        "intermediate mean psnr: {psnr_inter:.3} dB (gain {:.3});  l_e = {le_inter:.6}",
        psnr_inter - psnr_bic
    );

    // PR dominance probe at iteration 0 baseline.
    let thresholds = lfsr_core::eval::DEFAULT_PR_THRESHOLDS;
    let pr_bic = parallax_pr_curve(&bic, &hr, &thresholds).unwrap();
    let pr_inter = parallax_pr_curve(&inter, &hr, &thresholds).unwrap();
    println!("pr bicubic:      {:?}", pr_bic.iter().map(|p| (p.recall, p.precision)).collect::<Vec<_>>());
    println!("pr intermediate: {:?}", pr_inter.iter().map(|p| (p.recall, p.precision)).collect::<Vec<_>>());

    let cfg = TrainConfig {
        stage: 2,
        seed: 0,
        angular_res: (m, n),
        epochs: 200,
        ..TrainConfig::default()
    };
    let mut trainer = Stage2Trainer::new(cfg).unwrap();
    let pairs = vec![(inter.clone(), hr.clone())];
    let mut trace = Vec::new();
    let t1 = Instant::now();
    for e in 0..200usize {
        trainer.train_epoch(&pairs, &mut trace).unwrap();
        if (e + 1) % 20 == 0 {
            let reg_field = regularize(&inter, &trainer.model).unwrap();
            let p = mean_psnr(&reg_field, &hr);
            let le = loss_epi_gradient(&reg_field, &hr).unwrap().value;
            let last = trace.last().unwrap();
            println!(
                "iter {:3}  t={:6.1}s  train_total={:.5}  psnr_reg={:.3} (vs inter {:+.4})  l_e={:.6} ({})",
                e + 1,
                t1.elapsed().as_secs_f64(),
                last.loss.value,
                p,
                p - psnr_inter,
                le,
                if le < le_inter { "better" } else { "worse" }
            );
            if p >= psnr_inter - 0.005 && le < le_inter * 0.995 {
                println!("criterion-5 conditions reached at iter {}", e + 1);
                let pr_reg = parallax_pr_curve(&reg_field, &hr, &thresholds).unwrap();
                println!("pr regularized: {:?}", pr_reg.iter().map(|p| (p.recall, p.precision)).collect::<Vec<_>>());
                break;
            }
        }
    }
    println!("stage-2 probe done in {:.1}s", t1.elapsed().as_secs_f64());
}
