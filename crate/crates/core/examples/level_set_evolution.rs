//! Hamilton–Jacobi transport of a circle under a uniform normal speed, with
//! reinitialization.

use rso::level_set::{LevelSet, VelocityGrid};

fn radius(psi: &LevelSet) -> f64 {
    // Zero crossing along the row y = 0.5, right of the center.
    let (nx, _) = psi.dims();
    let j = psi.dims().1 / 2;
    for i in nx / 2..nx {
        let (a, b) = (psi.value(i, j), psi.value(i + 1, j));
        if a <= 0.0 && b > 0.0 {
            return psi.point(i, j)[0] + psi.dx() * a / (a - b) - 0.5;
        }
    }
    f64::NAN
}

fn main() -> rso::Result<()> {
    let n = 100;
    let r0 = 0.2;
    let mut psi = LevelSet::init(n, n, [1.0, 1.0], |p| (p[0] - 0.5).hypot(p[1] - 0.5) - r0)?;
    // Outward unit normal of the circle: a uniform normal speed of one.
    let v: Vec<[f64; 2]> = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| (i, j)))
        .map(|(i, j)| {
            let p = psi.point(i, j);
            let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
            let r = dx.hypot(dy).max(1e-12);
            [dx / r, dy / r]
        })
        .collect();
    let theta = VelocityGrid::new(n, n, v)?;
    let mut time = 0.0;
    println!("step  time      radius    expected  volume");
    for k in 1..=5 {
        let adv = psi.advance(&theta, 0.5, 10)?;
        time += adv.time;
        psi = adv.level_set;
        if k % 2 == 0 {
            psi = psi.reinitialize().0;
        }
        println!(
            "{:>4}  {time:.5}  {:.5}   {:.5}   {:.5}",
            10 * k,
            radius(&psi),
            r0 + time,
            psi.volume_fraction()
        );
    }
    Ok(())
}
