use crate::error::{Error, Result};
use crate::numeric::{vec3, CompensatedSum, Vec3};

/// A scalar loss and its gradient with respect to every frame's root
/// translation.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTerm {
    pub loss: f64,
    pub grad: Vec<Vec3>,
}

/// Squared distance of each root translation to the planned one, weighted by
/// `middle` for interior frames and `end` for the first and last frames.
pub fn trajectory_loss(translations: &[[f64; 3]], plan: &[[f64; 3]], middle: f64, end: f64) -> Result<TranslationTerm> {
    if translations.len() != plan.len() {
        return Err(Error::LengthMismatch {
            expected: translations.len(),
            got: plan.len(),
        });
    }
    let n = translations.len();
    let mut loss = CompensatedSum::new();
    let grad = translations
        .iter()
        .zip(plan)
        .enumerate()
        .map(|(i, (r, target))| {
            let lambda = if i == 0 || i + 1 == n { end } else { middle };
            let d = vec3(*r) - vec3(*target);
            loss.add(lambda * d.norm_squared());
            d * (2.0 * lambda)
        })
        .collect();
    Ok(TranslationTerm {
        loss: loss.value(),
        grad,
    })
}
