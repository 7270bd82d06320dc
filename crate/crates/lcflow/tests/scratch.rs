use lcflow::field::Grid2D;
use lcflow::norms::lp_norm;
use lcflow::scenarios::{divergence_free_velocity, smooth_random_director};
use lcflow::spectral::{divergence, gradient, leray_project};

#[test]
fn probe_leray() {
    let grid = Grid2D::new(64, 20.0 * std::f64::consts::PI).unwrap();
    let d = smooth_random_director(0, 6, 1.3, grid).unwrap();
    let u = divergence_free_velocity(100, 4, 1.0, grid).unwrap();
    let mut v = u.clone();
    let g = gradient(d.comp(1));
    for c in 0..2 {
        let dst = v.comp_mut(c).data_mut();
        for (o, x) in dst.iter_mut().zip(g.comp(c).data()) {
            *o += x;
        }
    }
    let pv = leray_project(&v);
    let ppv = leray_project(&pv);
    let mut idem = 0.0f64;
    for c in 0..2 {
        for (a, b) in ppv.comp(c).data().iter().zip(pv.comp(c).data()) {
            idem = idem.max((a - b).abs());
        }
    }
    let div_pv = lp_norm(&divergence(&pv), 2.0).unwrap();
    let div_v = lp_norm(&divergence(&v), 2.0).unwrap();
    println!("idem drift {idem:.3e}  div(pv) {div_pv:.3e}  div(v) {div_v:.3e}");
    println!("vmax {:.3e} gmax {:.3e}", v.max_magnitude(), g.max_magnitude());

    // idempotence with a plain velocity, no grafted gradient
    let pu = leray_project(&u);
    let ppu = leray_project(&pu);
    let mut idem_u = 0.0f64;
    for c in 0..2 {
        for (a, b) in ppu.comp(c).data().iter().zip(pu.comp(c).data()) {
            idem_u = idem_u.max((a - b).abs());
        }
    }
    println!("idem drift (u only) {idem_u:.3e}");
}

use lcflow::director::{coercivity_ratio, grad_lp_norm, harmonic_energy, sphere_identity_residual};

#[test]
fn probe_sphere_defect() {
    for (mm, amp) in [(2i64, 0.8), (3, 0.8), (3, 1.2), (4, 1.0), (5, 1.1), (6, 1.3)] {
        for n in [64usize, 128] {
            let grid = Grid2D::new(n, 20.0 * std::f64::consts::PI).unwrap();
            let mut worst = 0.0f64;
            let mut worst_res = 0.0f64;
            for seed in 0..10u64 {
                let d = smooth_random_director(seed, mm, amp, grid).unwrap();
                let num = grad_lp_norm(&d, 4.0).unwrap().powi(4);
                let ratio = coercivity_ratio(&d).unwrap();
                let den = num / ratio;
                let t2 = harmonic_energy(&d);
                let defect = (t2 - (den - num)).abs() / den;
                let res = sphere_identity_residual(&d) / den.sqrt();
                worst = worst.max(defect);
                worst_res = worst_res.max(res);
            }
            println!("mm={mm} amp={amp} n={n}: defect {worst:.3e} residual {worst_res:.3e}");
        }
    }
}

#[test]
fn probe_sphere_corpus() {
    for amp in [0.4, 0.5, 0.6, 0.7, 0.8] {
        let mut w64 = 0.0f64;
        let mut w128 = 0.0f64;
        let mut seed64 = 0u64;
        for n in [64usize, 128] {
            let grid = Grid2D::new(n, 20.0 * std::f64::consts::PI).unwrap();
            for seed in 0..50u64 {
                let d = smooth_random_director(seed, 2, amp, grid).unwrap();
                let num = grad_lp_norm(&d, 4.0).unwrap().powi(4);
                let ratio = coercivity_ratio(&d).unwrap();
                let den = num / ratio;
                let t2 = harmonic_energy(&d);
                let defect = (t2 - (den - num)).abs() / den;
                if n == 64 && defect > w64 {
                    w64 = defect;
                    seed64 = seed;
                }
                if n == 128 {
                    w128 = w128.max(defect);
                }
            }
        }
        println!("amp={amp}: worst64 {w64:.3e} (seed {seed64}) worst128 {w128:.3e}");
    }
}
