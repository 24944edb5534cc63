//! Karhunen–Loève spectrum of the separable exponential kernel and the load
//! angles it induces.

use rso::driver::{Benchmark, Config};
use rso::random_field::eigen_1d_exponential;

fn main() -> rso::Result<()> {
    println!(" n   lambda on [0,1]   lambda on [0,2]");
    let x = eigen_1d_exponential(1.0, 1.0, 8)?;
    let y = eigen_1d_exponential(1.0, 2.0, 8)?;
    for (n, (a, b)) in x.iter().zip(&y).enumerate() {
        println!("{:>2}   {:.10}      {:.10}", n + 1, a.value, b.value);
    }

    let cfg = Config::default();
    let bench = Benchmark::new(&cfg)?;
    let field = bench.angle_field();
    let t = field.truncation();
    println!(
        "\n{} tensor modes capture {:.2}% of the trace (target {:.0}%)",
        field.n_modes(),
        100.0 * t.energy_ratio,
        100.0 * cfg.energy_target
    );
    print!("{}", field.eigen_table_csv().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!("\n...");

    let angles: Vec<f64> = (0..1000).map(|i| bench.angle_deg(i)).collect::<rso::Result<_>>()?;
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let sd = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (angles.len() - 1) as f64).sqrt();
    let expected = (field.variance(cfg.load_point)).sqrt();
    println!(
        "load angle over 1000 samples: mean {mean:.3} deg, sd {sd:.3} deg (truncated-field sd {expected:.3})"
    );
    for i in 0..4 {
        let g = bench.load(i)?;
        println!("sample {i}: angle {:7.3} deg, g = ({:+.4}, {:+.4})", bench.angle_deg(i)?, g[0], g[1]);
    }
    Ok(())
}
