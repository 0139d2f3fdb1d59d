use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::serde_util;

/// Exogenous input of one leader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeaderSignal {
    Zero,
    Constant {
        #[serde(with = "serde_util::vector")]
        value: DVector<f64>,
    },
    /// `amplitude · sin(omega t + phase)`.
    Sinusoid {
        #[serde(with = "serde_util::vector")]
        amplitude: DVector<f64>,
        omega: f64,
        phase: f64,
    },
    /// `values[k]` on `[times[k], times[k+1])`, the last value forever after,
    /// zero before `times[0]`.
    PiecewiseConstant {
        times: Vec<f64>,
        #[serde(with = "serde_util::vectors")]
        values: Vec<DVector<f64>>,
    },
}

impl LeaderSignal {
    pub fn value(&self, t: f64, m: usize) -> DVector<f64> {
        match self {
            LeaderSignal::Zero => DVector::zeros(m),
            LeaderSignal::Constant { value } => value.clone(),
            LeaderSignal::Sinusoid { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
            LeaderSignal::PiecewiseConstant { times, values } => {
                match times.iter().rposition(|&tk| tk <= t) {
                    Some(k) => values[k].clone(),
                    None => DVector::zeros(m),
                }
            }
        }
    }

    /// Discontinuities strictly inside `(0, horizon)`.
    pub fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        match self {
            LeaderSignal::PiecewiseConstant { times, .. } => {
                times.iter().copied().filter(|&t| t > 0.0 && t < horizon).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, LeaderSignal::PiecewiseConstant { .. })
    }

    /// `sup_{τ ∈ [0, t]} ‖u(τ)‖`, in closed form.
    pub fn sup_norm(&self, t: f64) -> f64 {
        match self {
            LeaderSignal::Zero => 0.0,
            LeaderSignal::Constant { value } => value.norm(),
            LeaderSignal::Sinusoid { amplitude, omega, phase } => {
                amplitude.norm() * sup_abs_sin(*omega, *phase, t)
            }
            LeaderSignal::PiecewiseConstant { times, values } => times
                .iter()
                .zip(values)
                .filter(|(&tk, _)| tk <= t)
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max),
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        match self {
            LeaderSignal::Zero => None,
            LeaderSignal::Constant { value } => Some(value.len()),
            LeaderSignal::Sinusoid { amplitude, .. } => Some(amplitude.len()),
            LeaderSignal::PiecewiseConstant { values, .. } => values.first().map(|v| v.len()),
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), String> {
        match self {
            LeaderSignal::Zero => Ok(()),
            LeaderSignal::Constant { value } => check_len(value, m),
            LeaderSignal::Sinusoid { amplitude, omega, phase } => {
                if !omega.is_finite() || !phase.is_finite() {
                    return Err("sinusoid frequency and phase must be finite".into());
                }
                check_len(amplitude, m)
            }
            LeaderSignal::PiecewiseConstant { times, values } => {
                if times.len() != values.len() {
                    return Err("piecewise signal needs one value per breakpoint".into());
                }
                if times.windows(2).any(|w| w[0] >= w[1]) || times.iter().any(|t| !t.is_finite()) {
                    return Err("piecewise breakpoints must be finite and strictly increasing".into());
                }
                values.iter().try_for_each(|v| check_len(v, m))
            }
        }
    }
}

fn check_len(v: &DVector<f64>, m: usize) -> Result<(), String> {
    if v.len() != m {
        return Err(format!("signal has length {}, expected m = {m}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("signal values must be finite".into());
    }
    Ok(())
}

/// `max_{τ ∈ [0, t]} |sin(ω τ + φ)|`.
fn sup_abs_sin(omega: f64, phase: f64, t: f64) -> f64 {
    let a = phase;
    let b = omega * t + phase;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    // A peak of |sin| sits at π/2 + kπ; take the first one at or after `lo`.
    let k = ((lo - FRAC_PI_2) / PI).ceil();
    if FRAC_PI_2 + k * PI <= hi {
        1.0
    } else {
        a.sin().abs().max(b.sin().abs())
    }
}

/// Command-line form: `zero`, `const:c1,c2`, `sin:a1,a2:omega[:phase]`,
/// `pwc:t0=v1,v2;t1=v1,v2`.
impl FromStr for LeaderSignal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vector = |text: &str| -> Result<DVector<f64>, String> {
            let vals: Result<Vec<f64>, _> = text.split(',').map(|x| x.trim().parse::<f64>()).collect();
            vals.map(DVector::from_vec).map_err(|e| format!("bad number in `{text}`: {e}"))
        };
        let scalar = |text: &str| text.trim().parse::<f64>().map_err(|e| format!("bad number `{text}`: {e}"));
        if s == "zero" {
            return Ok(LeaderSignal::Zero);
        }
        if let Some(rest) = s.strip_prefix("const:") {
            return Ok(LeaderSignal::Constant { value: vector(rest)? });
        }
        if let Some(rest) = s.strip_prefix("sin:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if !(2..=3).contains(&parts.len()) {
                return Err("expected sin:AMPLITUDE:OMEGA[:PHASE]".into());
            }
            return Ok(LeaderSignal::Sinusoid {
                amplitude: vector(parts[0])?,
                omega: scalar(parts[1])?,
                phase: parts.get(2).map_or(Ok(0.0), |p| scalar(p))?,
            });
        }
        if let Some(rest) = s.strip_prefix("pwc:") {
            let mut times = Vec::new();
            let mut values = Vec::new();
            for piece in rest.split(';') {
                let (t, v) = piece.split_once('=').ok_or("expected pwc:T=V1,V2;T=...")?;
                times.push(scalar(t)?);
                values.push(vector(v)?);
            }
            return Ok(LeaderSignal::PiecewiseConstant { times, values });
        }
        Err(format!("unknown signal `{s}`; use zero, const:…, sin:… or pwc:…"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_sup_matches_dense_sampling() {
        let sig = LeaderSignal::Sinusoid {
            amplitude: DVector::from_column_slice(&[3.0, 4.0]),
            omega: 1.3,
            phase: 0.4,
        };
        for t in [0.0, 0.3, 0.9, 1.2, 2.0, 7.5] {
            let sampled = (0..=20000)
                .map(|k| sig.value(t * k as f64 / 20000.0, 2).norm())
                .fold(0.0, f64::max);
            let exact = sig.sup_norm(t);
            assert!(exact >= sampled - 1e-12 && exact - sampled < 1e-6, "t={t}: {exact} vs {sampled}");
        }
    }

    #[test]
    fn negative_frequency_sup() {
        let sig = LeaderSignal::Sinusoid {
            amplitude: DVector::from_column_slice(&[1.0]),
            omega: -2.0,
            phase: 0.0,
        };
        assert!((sig.sup_norm(0.5) - 1f64.sin()).abs() < 1e-15);
        assert_eq!(sig.sup_norm(1.0), 1.0);
    }

    #[test]
    fn piecewise_values_and_sup() {
        let sig: LeaderSignal = "pwc:1=2;3=-5;4=1".parse().unwrap();
        assert_eq!(sig.value(0.5, 1)[0], 0.0);
        assert_eq!(sig.value(1.0, 1)[0], 2.0);
        assert_eq!(sig.value(3.5, 1)[0], -5.0);
        assert_eq!(sig.value(10.0, 1)[0], 1.0);
        assert_eq!(sig.sup_norm(0.9), 0.0);
        assert_eq!(sig.sup_norm(2.0), 2.0);
        assert_eq!(sig.sup_norm(9.0), 5.0);
        assert_eq!(sig.breakpoints(3.5), vec![1.0, 3.0]);
    }

    #[test]
    fn parse_forms() {
        assert_eq!("zero".parse::<LeaderSignal>().unwrap(), LeaderSignal::Zero);
        assert_eq!(
            "const:1,2".parse::<LeaderSignal>().unwrap(),
            LeaderSignal::Constant {
                value: DVector::from_column_slice(&[1.0, 2.0])
            }
        );
        let s: LeaderSignal = "sin:0.5:2".parse().unwrap();
        assert_eq!(s.sup_norm(10.0), 0.5);
        assert!("sin:1".parse::<LeaderSignal>().is_err());
        assert!("ramp:1".parse::<LeaderSignal>().is_err());
        assert!("pwc:2=1;1=1".parse::<LeaderSignal>().unwrap().validate(1).is_err());
    }

    #[test]
    fn json_tagging() {
        let s = LeaderSignal::Sinusoid {
            amplitude: DVector::from_column_slice(&[1.0]),
            omega: 2.0,
            phase: 0.0,
        };
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"kind\":\"sinusoid\""));
        assert_eq!(serde_json::from_str::<LeaderSignal>(&text).unwrap(), s);
    }
}
