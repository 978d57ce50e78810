//! Pdf-id posteriors to phone frame log-likelihoods and back.
//!
//! Three pdf-ids share two phones. The reduced posteriors divided by the
//! reduced priors give the frame log-likelihoods, and folding the priors
//! back in with a softmax recovers the phone posteriors.

use phonecal::likelihood::{
    frame_log_likelihoods, posterior_from_loglik, reduce_pdf_posteriors, reduce_pdf_priors,
    FramePosteriorMatrix, DEFAULT_FLOOR,
};
use phonecal::{PdfMap, PhoneSet, PriorVector};

fn main() -> phonecal::Result<()> {
    let phones = PhoneSet::new(["aa", "iy"])?;
    let map = PdfMap::new(vec![0, 0, 1], &phones)?;
    let pdf_priors = PriorVector::new(vec![0.2, 0.3, 0.5])?;
    let frames = FramePosteriorMatrix::new("utt1", 2, 3, vec![0.1, 0.2, 0.7, 0.6, 0.3, 0.1])?;

    let phone_priors = reduce_pdf_priors(&pdf_priors, &map, &phones)?;
    let reduced = reduce_pdf_posteriors(&frames, &map, &phones)?;
    println!("phone priors {:?}", phone_priors.as_slice());

    for (t, row) in reduced.rows().enumerate() {
        let llk = frame_log_likelihoods(row, &phone_priors, DEFAULT_FLOOR)?;
        let back = posterior_from_loglik(&llk, &phone_priors)?;
        println!(
            "frame {t}: posterior {row:?} -> llk {:?} -> posterior {back:?}",
            llk.as_slice()
        );
    }
    Ok(())
}
