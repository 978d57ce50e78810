//! Class-balanced cross entropy on hand-made trials.
//!
//! An all-zero likelihood vector scores ln N per trial. A confident correct
//! trial scores near zero, and class balancing keeps a frequent class from
//! drowning out a rare one.

use phonecal::{h_mc, LogLikVector, PhoneTrial, PriorVector};

fn trial(phone: usize, llk: &[f64]) -> PhoneTrial {
    PhoneTrial {
        true_phone: phone,
        llk: LogLikVector::new(llk.to_vec()).unwrap(),
        duration: 1,
        stress: None,
    }
}

fn main() -> phonecal::Result<()> {
    let n = 42;
    let flat = PriorVector::flat(n);
    let uninformative: Vec<_> = (0..n).map(|f| trial(f, &vec![0.0; n])).collect();
    let r = h_mc(&uninformative, &flat, None)?;
    println!(
        "all-zero llk, N = {n}: H = {:.6} nats, ln N = {:.6}",
        r.h_mc,
        (n as f64).ln()
    );

    // 9 easy trials of class 0, one hard trial of class 1
    let mut trials: Vec<_> = (0..9).map(|_| trial(0, &[4.0, 0.0])).collect();
    trials.push(trial(1, &[2.0, 0.0]));
    let r = h_mc(&trials, &PriorVector::flat(2), None)?;
    println!("per-class penalties {:?}", r.per_class_penalty);
    println!("balanced H = {:.4}", r.h_mc);
    Ok(())
}
