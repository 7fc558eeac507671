//! Inverse-spectral recovery of the bundle class k from the eigenvalue
//! sequence ell -> lambda_1(2*pi/ell dx). Zeros of the sequence occur
//! exactly at the divisors of k, so the largest zero pins k down once
//! the scan reaches past 2k.

use crate::eigen::SolveOptions;
use crate::nil::{nil_lambda1_closed, nil_lambda1_sector, NilError};
use crate::rumin::OneForm;
use crate::torus::lattice_distance_sq;
use std::fmt;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug)]
pub enum ChernError {
    BadLMax { l_max: u32 },
    /// The scan found a candidate whose doubling was never probed, so a
    /// larger class with the same divisor prefix cannot be excluded.
    LMaxTooSmall { k_hat: u32, l_max: u32 },
    TableTooShort { have: usize, need: u32 },
    /// Acceptance failed; each entry names the probe and the condition
    /// it violated.
    Ambiguous { diagnostics: Vec<String> },
    SingularPair { det: f64 },
    Solver(NilError),
}

impl fmt::Display for ChernError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChernError::BadLMax { l_max } => {
                write!(f, "probe range l_max = {l_max} too small; need at least 2")
            }
            ChernError::LMaxTooSmall { k_hat, l_max } => write!(
                f,
                "candidate k = {k_hat} needs probes up to {} but the scan stopped at {l_max}",
                2 * k_hat
            ),
            ChernError::TableTooShort { have, need } => {
                write!(f, "table holds {have} probes, scan wants {need}")
            }
            ChernError::Ambiguous { diagnostics } => {
                write!(f, "recovery is ambiguous: {}", diagnostics.join("; "))
            }
            ChernError::SingularPair { det } => write!(
                f,
                "potential pair is linearly dependent (det {det:.2e}); no normalization exists"
            ),
            ChernError::Solver(e) => write!(f, "oracle solve failed: {e}"),
        }
    }
}

impl From<NilError> for ChernError {
    fn from(e: NilError) -> Self {
        ChernError::Solver(e)
    }
}

/// Source of the eigenvalue sequence. Closed form and numeric oracles
/// know their Landau cap; a bare table does not, and validation falls
/// back to the observed plateau.
#[derive(Clone, Debug)]
pub enum SpectralOracle {
    ClosedForm {
        k_true: u32,
        lambda_cap: f64,
    },
    Numeric {
        k_true: u32,
        m_max: u32,
        nx: u32,
        ny: u32,
        lambda_cap: f64,
        opts: SolveOptions,
    },
    /// values[i] is the probe at ell = i + 1.
    Table { values: Vec<f64> },
}

impl SpectralOracle {
    fn probe(&self, l: u32) -> Result<f64, ChernError> {
        let a = TWO_PI / l as f64;
        match self {
            SpectralOracle::ClosedForm { k_true, lambda_cap } => {
                Ok(nil_lambda1_closed(*k_true, a, 0.0, *lambda_cap))
            }
            SpectralOracle::Numeric {
                k_true,
                m_max,
                nx,
                ny,
                opts,
                ..
            } => {
                let scan =
                    nil_lambda1_sector(*k_true, &OneForm::constant(a, 0.0), *m_max, *nx, *ny, opts)?;
                Ok(scan.lambda1)
            }
            SpectralOracle::Table { values } => Ok(values[(l - 1) as usize]),
        }
    }

    fn declared_cap(&self) -> Option<f64> {
        match self {
            SpectralOracle::ClosedForm { lambda_cap, .. }
            | SpectralOracle::Numeric { lambda_cap, .. } => Some(*lambda_cap),
            SpectralOracle::Table { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub k_hat: u32,
    pub zero_set: Vec<u32>,
    /// Worst relative deviation of a nonzero probe from the closed form
    /// rebuilt with k_hat.
    pub consistency_score: f64,
    pub l_used: u32,
    /// Probe values by ell, 1-based shifted down by one.
    pub probes: Vec<f64>,
    /// Landau cap consumed during validation; None when every probe sat
    /// on the distance branch and no cap was needed.
    pub lambda_used: Option<f64>,
}

fn divisors(k: u32) -> Vec<u32> {
    (1..=k).filter(|l| k % l == 0).collect()
}

/// Cap estimate for a table oracle: the smallest observed value among
/// probes that fall well short of their distance prediction. Those are
/// the probes the Landau branch truncated. A table whose cap sits just
/// under every distance prediction (within the 1.5 factor) yields no
/// estimate and such probes then fail validation; calibrated oracles
/// should declare their cap instead.
fn plateau_cap(probes: &[f64], k_hat: u32, zero_tol: f64) -> Option<f64> {
    let mut cap: Option<f64> = None;
    for (i, &v) in probes.iter().enumerate() {
        if v < zero_tol {
            continue;
        }
        let d2 = lattice_distance_sq(TWO_PI / (i + 1) as f64, 0.0, k_hat);
        if d2 > 1.5 * v {
            cap = Some(cap.map_or(v, |c: f64| c.min(v)));
        }
    }
    cap
}

/// Scan ell = 1..l_max, read k off the largest zero, then cross-validate
/// every nonzero probe against the closed form with that k. Acceptance
/// needs the zero set to be the full divisor set, every nonzero probe to
/// match within accept_tol, and the scan to have reached 2k.
pub fn recover_chern(
    oracle: &SpectralOracle,
    l_max: u32,
    zero_tol: f64,
    accept_tol: f64,
) -> Result<RecoveryResult, ChernError> {
    if l_max < 2 {
        return Err(ChernError::BadLMax { l_max });
    }
    assert!(zero_tol > 0.0 && accept_tol > 0.0, "tolerances must be positive");
    if let SpectralOracle::Table { values } = oracle {
        if (values.len() as u32) < l_max {
            return Err(ChernError::TableTooShort {
                have: values.len(),
                need: l_max,
            });
        }
    }

    let mut probes = Vec::with_capacity(l_max as usize);
    for l in 1..=l_max {
        probes.push(oracle.probe(l)?);
    }

    let mut diagnostics: Vec<String> = Vec::new();
    for (i, &v) in probes.iter().enumerate() {
        if v < -zero_tol {
            diagnostics.push(format!(
                "probe l={} is negative ({v:.3e}); eigenvalues cannot be",
                i + 1
            ));
        }
    }
    if !diagnostics.is_empty() {
        return Err(ChernError::Ambiguous { diagnostics });
    }

    let zero_set: Vec<u32> = (1..=l_max)
        .filter(|&l| probes[(l - 1) as usize] < zero_tol)
        .collect();
    let Some(&k_hat) = zero_set.last() else {
        return Err(ChernError::Ambiguous {
            diagnostics: vec![format!(
                "no probe fell below the zero threshold {zero_tol:.1e}; the sequence matches no class"
            )],
        });
    };
    if 2 * k_hat > l_max {
        return Err(ChernError::LMaxTooSmall { k_hat, l_max });
    }

    let divs = divisors(k_hat);
    if zero_set != divs {
        diagnostics.push(format!(
            "zero set {zero_set:?} is not the divisor set {divs:?} of {k_hat}"
        ));
    }

    let cap = match oracle.declared_cap() {
        Some(c) => Some(c),
        None => plateau_cap(&probes, k_hat, zero_tol),
    };
    let mut score = 0.0f64;
    for (i, &obs) in probes.iter().enumerate() {
        let l = (i + 1) as u32;
        if zero_set.contains(&l) {
            continue;
        }
        let d2 = lattice_distance_sq(TWO_PI / l as f64, 0.0, k_hat);
        let pred = cap.map_or(d2, |c| d2.min(c));
        let rel = (obs - pred).abs() / pred.max(zero_tol);
        score = score.max(rel);
        if rel > accept_tol {
            diagnostics.push(format!(
                "probe l={l}: observed {obs:.6} vs predicted {pred:.6} (relative {rel:.2e})"
            ));
        }
    }

    if !diagnostics.is_empty() {
        return Err(ChernError::Ambiguous { diagnostics });
    }
    Ok(RecoveryResult {
        k_hat,
        zero_set,
        consistency_score: score,
        l_used: l_max,
        probes,
        lambda_used: cap,
    })
}

/// Solve gamma_1 xi1 + gamma_2 xi2 = (2*pi, 0). Reduces any independent
/// pair of harmonic potentials to the canonical probe direction, so the
/// recovery above applies to arbitrary bases.
pub fn normalize_potentials(
    xi1: (f64, f64),
    xi2: (f64, f64),
) -> Result<(f64, f64), ChernError> {
    let det = xi1.0 * xi2.1 - xi2.0 * xi1.1;
    let scale = xi1
        .0
        .abs()
        .max(xi1.1.abs())
        .max(xi2.0.abs())
        .max(xi2.1.abs());
    if det.abs() <= 1e-12 * scale * scale {
        return Err(ChernError::SingularPair { det });
    }
    Ok((TWO_PI * xi2.1 / det, -TWO_PI * xi1.1 / det))
}
