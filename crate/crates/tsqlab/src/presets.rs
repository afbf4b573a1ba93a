//! Named Hamiltonians and initial states.

use num_complex::Complex64;
use tsqlab_core::husimi::FockState;
use tsqlab_core::symbol::{ComplexPolynomial, MultiIndex};

use crate::config::{HamiltonianCfg, StateCfg};
use crate::error::{HarnessError, Result};

pub const PRESETS: [&str; 5] = ["harmonic", "paramp", "coupled", "quartic", "squeezed-rotor"];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn add(h: &mut ComplexPolynomial, a: &[u32], a_star: &[u32], v: Complex64) -> Result<()> {
    h.add_term(MultiIndex::new(a.to_vec(), a_star.to_vec())?, v)?;
    Ok(())
}

/// Parameter defaults of a preset: `(omega, kappa, quartic)`.
pub fn preset_defaults(name: &str) -> Result<(f64, f64, f64)> {
    Ok(match name {
        "harmonic" => (1.0, 0.0, 0.0),
        "paramp" => (0.0, 0.5, 0.0),
        "coupled" => (0.3, 0.5, 0.0),
        "quartic" => (1.0, 0.0, 0.1),
        "squeezed-rotor" => (0.3, 0.5, 0.0),
        other => return Err(HarnessError::Config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
    })
}

/// Symbol of a preset with explicit parameters.
pub fn preset(name: &str, omega: f64, kappa: f64, quartic: f64) -> Result<ComplexPolynomial> {
    let mut h;
    match name {
        // ω(αα* − 1)
        "harmonic" => {
            h = ComplexPolynomial::zero(1);
            add(&mut h, &[1], &[1], c(omega, 0.0))?;
            add(&mut h, &[0], &[0], c(-omega, 0.0))?;
        }
        // (iκ/2)(α*² − α²)
        "paramp" => {
            h = ComplexPolynomial::zero(1);
            add(&mut h, &[0], &[2], c(0.0, kappa / 2.0))?;
            add(&mut h, &[2], &[0], c(0.0, -kappa / 2.0))?;
        }
        // iκ(α1*α2* − α1α2) + ω(α1α2* + α1*α2)
        "coupled" => {
            h = ComplexPolynomial::zero(2);
            add(&mut h, &[0, 0], &[1, 1], c(0.0, kappa))?;
            add(&mut h, &[1, 1], &[0, 0], c(0.0, -kappa))?;
            add(&mut h, &[1, 0], &[0, 1], c(omega, 0.0))?;
            add(&mut h, &[0, 1], &[1, 0], c(omega, 0.0))?;
        }
        // ω(αα* − 1) + λ x⁴, x = (α + α*)/√2
        "quartic" => {
            h = preset("harmonic", omega, 0.0, 0.0)?;
            for k in 0..=4u32 {
                let binom = [1.0, 4.0, 6.0, 4.0, 1.0][k as usize];
                add(&mut h, &[k], &[4 - k], c(quartic * binom / 4.0, 0.0))?;
            }
        }
        // harmonic plus paramp: squeezing that rotates
        "squeezed-rotor" => {
            h = preset("harmonic", omega, 0.0, 0.0)?;
            add(&mut h, &[0], &[2], c(0.0, kappa / 2.0))?;
            add(&mut h, &[2], &[0], c(0.0, -kappa / 2.0))?;
        }
        other => return Err(HarnessError::Config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
    }
    Ok(h)
}

pub fn hamiltonian(cfg: &HamiltonianCfg, base: &std::path::Path) -> Result<ComplexPolynomial> {
    match (&cfg.preset, &cfg.symbol, &cfg.symbol_file) {
        (Some(p), None, None) => preset(p, cfg.omega.unwrap_or(0.0), cfg.kappa.unwrap_or(0.0), cfg.quartic.unwrap_or(0.0)),
        (None, Some(text), None) => Ok(ComplexPolynomial::from_text(text)?),
        (None, None, Some(file)) => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            Ok(ComplexPolynomial::from_text(&text)?)
        }
        _ => Err(HarnessError::Config("hamiltonian needs exactly one of preset, symbol, symbol_file".into())),
    }
}

pub fn state(cfg: &StateCfg, num_modes: usize, cutoff: usize) -> Result<FockState> {
    let beta = c(cfg.re, cfg.im);
    Ok(match cfg.kind.as_str() {
        "vacuum" => FockState::vacuum(num_modes, cutoff),
        "coherent" => FockState::coherent(&vec![beta; num_modes], cutoff)?,
        "cat" if num_modes == 1 => FockState::cat(beta, cfg.even, cutoff)?,
        "number" => FockState::number(&vec![cfg.n; num_modes], cutoff)?,
        other => return Err(HarnessError::Config(format!("state kind {other:?} is not available for {num_modes} mode(s)"))),
    })
}
