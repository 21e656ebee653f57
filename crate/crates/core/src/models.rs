//! Built-in example models and random model draws.
//!
//! Every builtin carries the phase factor on channel 1, so the estimated
//! parameter `g` is the phase imprinted on each emission.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{OperatorFamily, QModel};
use crate::linalg::CMatrix;
use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `d = 1`, `L = √μ`.
    Poisson { mu: f64 },
    /// `L = √γ |0⟩⟨1|`.
    Damping { gamma: f64 },
    /// `L = diag(√μ_A, √μ_I)`, no Hamiltonian: two decoupled blocks.
    BlockCat { mu_a: f64, mu_i: f64 },
    /// Levels `g = 0, e = 1, s = 2`; strong drive `Ω` on g↔e, weak drive `Ω_s`
    /// on g↔s, emission `√κ |g⟩⟨e|`.
    ThreeLevel { omega: f64, omega_s: f64, kappa: f64 },
    /// `H = Ω σ_x`, `L = √κ |0⟩⟨1|`.
    Rabi { omega: f64, kappa: f64 },
}

pub const BUILTIN_NAMES: [&str; 5] = ["poisson", "damping", "blockcat", "threelevel", "rabi"];

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Poisson { .. } => "poisson",
            Builtin::Damping { .. } => "damping",
            Builtin::BlockCat { .. } => "blockcat",
            Builtin::ThreeLevel { .. } => "threelevel",
            Builtin::Rabi { .. } => "rabi",
        }
    }

    /// Builtin with its pinned default parameters.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "poisson" => Builtin::Poisson { mu: 1.0 },
            "damping" => Builtin::Damping { gamma: 1.0 },
            "blockcat" => Builtin::BlockCat { mu_a: 1.0, mu_i: 0.1 },
            "threelevel" => Builtin::ThreeLevel { omega: 1.0, omega_s: 0.01, kappa: 4.0 },
            "rabi" => Builtin::Rabi { omega: 1.0, kappa: 1.0 },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown builtin model {other:?}; expected one of {BUILTIN_NAMES:?}"
                )))
            }
        })
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            Builtin::Poisson { mu } => vec![("mu", mu)],
            Builtin::Damping { gamma } => vec![("gamma", gamma)],
            Builtin::BlockCat { mu_a, mu_i } => vec![("mu_a", mu_a), ("mu_i", mu_i)],
            Builtin::ThreeLevel { omega, omega_s, kappa } => {
                vec![("omega", omega), ("omega_s", omega_s), ("kappa", kappa)]
            }
            Builtin::Rabi { omega, kappa } => vec![("omega", omega), ("kappa", kappa)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("{}: {msg}", self.name())));
        for (k, v) in self.parameters() {
            if !v.is_finite() {
                return bad(&format!("parameter {k} is not finite"));
            }
        }
        match *self {
            Builtin::Poisson { mu } if !(mu > 0.0) => bad("requires mu > 0"),
            Builtin::Damping { gamma } if !(gamma > 0.0) => bad("requires gamma > 0"),
            Builtin::BlockCat { mu_a, mu_i } if !(mu_a >= mu_i && mu_i >= 0.0) => {
                bad("requires mu_a >= mu_i >= 0")
            }
            Builtin::ThreeLevel { omega, omega_s, kappa } if !(omega > 0.0 && omega_s > 0.0 && kappa > 0.0) => {
                bad("requires omega, omega_s, kappa > 0")
            }
            Builtin::Rabi { omega, kappa } if !(omega > 0.0 && kappa > 0.0) => bad("requires omega, kappa > 0"),
            _ => Ok(()),
        }
    }

    /// Initial state used when a run does not specify one.
    pub fn default_chi(&self) -> Vec<C64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        match self {
            Builtin::Poisson { .. } => vec![C64::new(1.0, 0.0)],
            Builtin::Damping { .. } | Builtin::BlockCat { .. } => vec![C64::new(h, 0.0), C64::new(h, 0.0)],
            Builtin::ThreeLevel { .. } => vec![C64::new(h, 0.0), z, C64::new(h, 0.0)],
            Builtin::Rabi { .. } => vec![C64::new(1.0, 0.0), z],
        }
    }
}

/// Named builtin with a (possibly partial) parameter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinSpec {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

impl BuiltinSpec {
    /// Resolve against defaults; unknown parameter names are rejected.
    pub fn resolve(&self) -> Result<Builtin> {
        let base = Builtin::default_for(&self.name)?;
        let mut params = base.parameters();
        for (k, v) in &self.parameters {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "{}: unknown parameter {k:?} (known: {:?})",
                        self.name,
                        base.parameters().keys().collect::<Vec<_>>()
                    )))
                }
            }
        }
        let p = |k: &str| params[k];
        let b = match base {
            Builtin::Poisson { .. } => Builtin::Poisson { mu: p("mu") },
            Builtin::Damping { .. } => Builtin::Damping { gamma: p("gamma") },
            Builtin::BlockCat { .. } => Builtin::BlockCat { mu_a: p("mu_a"), mu_i: p("mu_i") },
            Builtin::ThreeLevel { .. } => Builtin::ThreeLevel {
                omega: p("omega"),
                omega_s: p("omega_s"),
                kappa: p("kappa"),
            },
            Builtin::Rabi { .. } => Builtin::Rabi { omega: p("omega"), kappa: p("kappa") },
        };
        b.validate()?;
        Ok(b)
    }
}

pub fn instantiate(spec: &BuiltinSpec) -> Result<QModel> {
    builtin(spec.resolve()?)
}

fn real(rows: &[&[f64]]) -> CMat {
    CMatrix::from_fn(rows.len(), rows[0].len(), |i, j| C64::new(rows[i][j], 0.0))
}

pub fn builtin(b: Builtin) -> Result<QModel> {
    b.validate()?;
    let (h, l) = match b {
        Builtin::Poisson { mu } => (real(&[&[0.0]]), real(&[&[mu.sqrt()]])),
        Builtin::Damping { gamma } => (
            real(&[&[0.0, 0.0], &[0.0, 0.0]]),
            real(&[&[0.0, gamma.sqrt()], &[0.0, 0.0]]),
        ),
        Builtin::BlockCat { mu_a, mu_i } => (
            real(&[&[0.0, 0.0], &[0.0, 0.0]]),
            real(&[&[mu_a.sqrt(), 0.0], &[0.0, mu_i.sqrt()]]),
        ),
        Builtin::ThreeLevel { omega, omega_s, kappa } => (
            real(&[&[0.0, omega, omega_s], &[omega, 0.0, 0.0], &[omega_s, 0.0, 0.0]]),
            real(&[&[0.0, kappa.sqrt(), 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
        ),
        Builtin::Rabi { omega, kappa } => (
            real(&[&[0.0, omega], &[omega, 0.0]]),
            real(&[&[0.0, kappa.sqrt()], &[0.0, 0.0]]),
        ),
    };
    QModel::new(OperatorFamily::constant(h)?, vec![OperatorFamily::constant(l)?], Some(1))
}

/// Random model with Hermitian `H(g) = H₀ + g H₁`, jumps `L_j(g) = A_j + g B_j`
/// and the phase factor on channel 1.
pub fn random_model<R: Rng>(rng: &mut R, d: usize, k: usize) -> Result<QModel> {
    let mut draw = |scale: f64| -> CMat {
        CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        })
    };
    let h0 = draw(1.0).hermitian_part();
    let h1 = draw(0.3).hermitian_part();
    let mut jumps = Vec::with_capacity(k);
    for _ in 0..k {
        let a = draw(0.8);
        let b = draw(0.2);
        jumps.push(OperatorFamily::new(vec![a, b])?);
    }
    QModel::new(OperatorFamily::new(vec![h0, h1])?, jumps, Some(1))
}

/// Random normalized pure state.
pub fn random_state<R: Rng>(rng: &mut R, d: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = crate::linalg::norm2(&v);
    v.into_iter().map(|z| z / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_liouvillian, stationary_state};
    use crate::spectral::timescales;

    #[test]
    fn spec_resolution_and_defaults() {
        let spec = BuiltinSpec { name: "blockcat".into(), parameters: BTreeMap::from([("mu_i".to_string(), 0.0)]) };
        assert_eq!(spec.resolve().unwrap(), Builtin::BlockCat { mu_a: 1.0, mu_i: 0.0 });
        let bad = BuiltinSpec { name: "blockcat".into(), parameters: BTreeMap::from([("mu_i".to_string(), 2.0)]) };
        assert!(bad.resolve().is_err());
        let unknown = BuiltinSpec { name: "rabi".into(), parameters: BTreeMap::from([("gamma".to_string(), 2.0)]) };
        assert!(unknown.resolve().is_err());
        assert!(Builtin::default_for("nope").is_err());
    }

    #[test]
    fn threelevel_defaults_are_near_a_transition() {
        let m = builtin(Builtin::default_for("threelevel").unwrap()).unwrap();
        let d = build_liouvillian(&m, 0.0).unwrap().spectrum().unwrap();
        let ts = timescales(&d).unwrap();
        assert!(ts.gap_ratio >= 1e3, "gap ratio {}", ts.gap_ratio);
    }

    #[test]
    fn rabi_has_unique_stationary_state() {
        let m = builtin(Builtin::default_for("rabi").unwrap()).unwrap();
        let l = build_liouvillian(&m, 0.0).unwrap();
        let rho = stationary_state(&l).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let ts = timescales(&l.spectrum().unwrap()).unwrap();
        assert!(ts.gap_ratio < 10.0);
    }

    #[test]
    fn default_states_are_normalized() {
        for name in BUILTIN_NAMES {
            let b = Builtin::default_for(name).unwrap();
            let m = builtin(b).unwrap();
            let chi = b.default_chi();
            assert_eq!(chi.len(), m.dim());
            assert!((crate::linalg::norm2(&chi) - 1.0).abs() < 1e-15);
        }
    }
}
