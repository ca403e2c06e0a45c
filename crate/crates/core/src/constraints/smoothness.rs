use crate::constraints::trajectory::TranslationTerm;
use crate::error::{Error, Result};
use crate::numeric::{vec3, CompensatedSum, Vec3};

/// Third finite difference of the root translation over four consecutive
/// frames.
pub fn jerk(window: &[[f64; 3]]) -> Vec3 {
    vec3(window[3]) - vec3(window[2]) * 3.0 + vec3(window[1]) * 3.0 - vec3(window[0])
}

/// Sum of squared finite-difference jerk over every 4-frame window. The frame
/// interval is left out and absorbed into the loss weight.
pub fn smoothness_loss(translations: &[[f64; 3]]) -> Result<TranslationTerm> {
    let n = translations.len();
    if n < 4 {
        return Err(Error::TooFewFrames { need: 4, got: n });
    }
    const COEF: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];
    let mut loss = CompensatedSum::new();
    let mut grad = vec![Vec3::zeros(); n];
    for (i, w) in translations.windows(4).enumerate() {
        let j = jerk(w);
        loss.add(j.norm_squared());
        for (k, c) in COEF.iter().enumerate() {
            grad[i + k] += j * (2.0 * c);
        }
    }
    Ok(TranslationTerm {
        loss: loss.value(),
        grad,
    })
}
