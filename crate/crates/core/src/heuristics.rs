//! Starting points for `T` and `S`.

use crate::error::{Error, Result};
use crate::model::Mode;
use crate::presets::PRESETS;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperSuggestion {
    pub t: u32,
    /// The optimum typically lies within a factor of two of `t`.
    pub t_range: (f64, f64),
    pub s_hint: Option<f64>,
    pub notes: Vec<String>,
}

/// `T ~ sqrt(clauses * LF)` for binary and `sqrt(clauses / 2 * LF)` for
/// multiclass models, rounded half-up and floored at 1.
pub fn suggest_t(clauses_per_class: u32, lf: u32, mode: Mode) -> Result<HyperSuggestion> {
    if clauses_per_class == 0 || lf == 0 {
        return Err(Error::InvalidArgument(format!(
            "clauses per class and LF must be positive, got {clauses_per_class} and {lf}"
        )));
    }
    let product = f64::from(clauses_per_class) * f64::from(lf);
    let x = match mode {
        Mode::Binary => product,
        Mode::Multiclass => product / 2.0,
    };
    let t = ((x.sqrt() + 0.5).floor() as u32).max(1);
    let t_range = (f64::from(t) / 2.0, f64::from(t) * 2.0);

    let mut notes = Vec::new();
    for p in PRESETS {
        let h = &p.hyper;
        if p.mode == mode && h.clauses_per_class == clauses_per_class && h.lf == lf {
            let inside = f64::from(h.t) >= t_range.0 && f64::from(h.t) <= t_range.1;
            notes.push(format!(
                "preset `{}` uses T={} ({} the suggested range)",
                p.name,
                h.t,
                if inside { "inside" } else { "outside" }
            ));
        }
    }
    Ok(HyperSuggestion {
        t,
        t_range,
        s_hint: None,
        notes,
    })
}

/// Fuzzy clauses want roughly the square of a standard Tsetlin Machine's `S`.
pub fn suggest_s(s_standard_tm: f64) -> Result<f64> {
    if s_standard_tm.is_nan() || s_standard_tm <= 1.0 || s_standard_tm.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "standard-TM S must be a finite value > 1, got {s_standard_tm}"
        )));
    }
    Ok(s_standard_tm * s_standard_tm)
}
