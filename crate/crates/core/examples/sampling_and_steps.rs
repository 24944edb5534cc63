//! Adaptive sample-size test and Lipschitz-based step lengths on synthetic
//! gradient samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rso::control::{estimate_lipschitz, sampling_test, step_length};

fn main() -> rso::Result<()> {
    let (nu_it, nu_ot) = (0.6, 5.8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mean = vec![1.0; 10];
    let normal = Normal::new(0.0, 1.0).unwrap();
    // Samples scatter mostly in magnitude along the mean direction, which is
    // what the inner-product statistic measures.
    println!("noise  |S|  rho_IT     rho_OT     pass   next |S|");
    for noise in [0.2, 1.0, 3.0, 10.0] {
        let mut size = 2;
        loop {
            let g: Vec<Vec<f64>> = (0..size)
                .map(|_| {
                    let scale = 1.0 + noise * normal.sample(&mut rng);
                    mean.iter()
                        .map(|m| scale * m + 0.1 * noise * normal.sample(&mut rng))
                        .collect()
                })
                .collect();
            let d = sampling_test(&g, nu_it, nu_ot, 64)?;
            println!(
                "{noise:>5}  {size:>3}  {:.3e}  {:.3e}  {:<5}  {}",
                d.rho_it, d.rho_ot, d.pass, d.next_size
            );
            if d.pass || d.next_size == size {
                break;
            }
            size = d.next_size;
        }
    }

    let prev = vec![vec![1.0, 2.0], vec![0.5, 1.5]];
    let now = vec![vec![1.1, 2.2], vec![0.4, 1.7]];
    let l = estimate_lipschitz(&now, &prev, 3.0, 0.01, 0.5, None)?.expect("positive distance");
    println!("\nLipschitz estimate {l:.4}");
    for l in [0.0, 1.0, l, 100.0, 1e6] {
        println!("L = {l:<10.4} alpha = {:.4e}", step_length(l, nu_it, nu_ot, 1e-4, 0.01)?);
    }
    Ok(())
}
