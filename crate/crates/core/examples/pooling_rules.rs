//! The three pooling rules on one segment, and what a shift of every frame
//! by a constant does to each.

use phonecal::pooling::{pool_logdur_mean, pool_mean, pool_sum};
use phonecal::{LogLikVector, PoolingMethod};

fn main() -> phonecal::Result<()> {
    let frames: Vec<LogLikVector> = [
        [0.5, -1.0, 0.2],
        [1.5, -0.5, 0.0],
        [0.4, -2.0, 0.1],
        [1.0, 0.0, -0.3],
    ]
    .iter()
    .map(|r| LogLikVector::new(r.to_vec()))
    .collect::<Result<_, _>>()?;

    println!("sum     {:?}", pool_sum(&frames)?.as_slice());
    println!("mean    {:?}", pool_mean(&frames)?.as_slice());
    println!("logdur  {:?}", pool_logdur_mean(&frames)?.as_slice());

    let shift = 2.0;
    let shifted: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| f.as_slice().iter().map(|x| x + shift).collect())
        .collect();
    for method in PoolingMethod::ALL {
        let a = method.pool(&frames)?;
        let b = method.pool(&shifted)?;
        let gain = (b.as_slice()[0] - a.as_slice()[0]) / shift;
        println!(
            "{method:>6}: per-frame shift comes out x{gain:.4} (expected {:.4})",
            method.shift_gain(frames.len())
        );
    }
    Ok(())
}
