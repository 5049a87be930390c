use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ModelKind;
use crate::error::Result;
use crate::model::{HeteroModel, HeteroSettings, HomoModel, HomoSettings, Model, VariantKind};
use crate::nn::{finite_diff_check, ReconMode};
use crate::optim::{ParamSet, RandomStream};
use crate::synthetic::{toy_hetero, toy_homo};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// One toy model to check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub model: ModelKind,
    /// Ignored for the homogeneous model.
    pub variant: VariantKind,
    pub decoder_layers: usize,
    pub recon_mode: ReconMode,
}

impl GradcheckCase {
    pub fn label(&self) -> String {
        match self.model {
            ModelKind::Homo => format!("homo, {}-layer decoder", self.decoder_layers),
            ModelKind::Hetero => format!(
                "hetero {}, {}-layer decoder",
                self.variant, self.decoder_layers
            ),
        }
    }
}

/// Both homogeneous decoder depths and every heterogeneous variant.
pub fn default_cases() -> Vec<GradcheckCase> {
    let base = GradcheckCase {
        model: ModelKind::Homo,
        variant: VariantKind::AegX,
        decoder_layers: 1,
        recon_mode: ReconMode::OneSided,
    };
    let mut cases = vec![
        base,
        GradcheckCase {
            decoder_layers: 2,
            ..base
        },
    ];
    cases.extend(VariantKind::ALL.iter().map(|&variant| GradcheckCase {
        model: ModelKind::Hetero,
        variant,
        ..base
    }));
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// An all-zero analytic gradient would make the comparison vacuous, so
    /// it counts as a failure.
    pub nonzero: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: GradcheckCase,
    pub params: Vec<ParamCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub cases: Vec<CaseReport>,
    pub passed: bool,
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            writeln!(f, "{}", c.case.label())?;
            for p in &c.params {
                let verdict = match (p.passed, p.nonzero) {
                    (true, _) => "ok",
                    (false, false) => "FAIL (zero gradient)",
                    (false, true) => "FAIL",
                };
                writeln!(f, "  {:<18} {:>10.3e}  {verdict}", p.name, p.max_rel_error)?;
            }
        }
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })
    }
}

fn check_model<M: Model>(model: &M, seed: u64, corrupt: Option<&str>) -> Result<Vec<ParamCheck>> {
    let params = model.init_params(&mut RandomStream::new(seed))?;
    let stream = RandomStream::new(seed).derive(2);
    let fwd = model.forward(&params, true, &mut stream.clone())?;
    let mut grads = model.backward(&params, &fwd)?;
    let names = params.names();
    if let Some(target) = corrupt {
        for (name, g) in names.iter().zip(grads.tensors_mut()) {
            if name == target {
                g.scale(1.01);
            }
        }
    }
    let grad_tensors = grads.tensors();
    let mut out = Vec::new();
    for (t, name) in names.iter().enumerate() {
        let base = params.tensors()[t].clone();
        let err = finite_diff_check(
            |x| {
                let mut probe = params.clone();
                *probe.tensors_mut()[t] = x.clone();
                model
                    .forward(&probe, true, &mut stream.clone())
                    .map(|r| r.total_loss)
                    .unwrap_or(f64::NAN)
            },
            &base,
            grad_tensors[t],
            GRADCHECK_STEP,
        );
        let nonzero = grad_tensors[t].values().iter().any(|&v| v != 0.0);
        out.push(ParamCheck {
            name: name.clone(),
            max_rel_error: err,
            nonzero,
            passed: nonzero && err <= GRADCHECK_TOLERANCE,
        });
    }
    Ok(out)
}

/// Number of toy instances per case, seeded `seed, seed + 1, ...`.
pub const GRADCHECK_INSTANCES: u64 = 3;

fn merge_checks(acc: &mut Vec<ParamCheck>, next: Vec<ParamCheck>) {
    if acc.is_empty() {
        *acc = next;
        return;
    }
    for (a, b) in acc.iter_mut().zip(next) {
        a.max_rel_error = a.max_rel_error.max(b.max_rel_error);
        a.nonzero &= b.nonzero;
        a.passed &= b.passed;
    }
}

/// Finite-difference check of every parameter on toy instances of each
/// case; per parameter the worst instance is reported. `corrupt` names a
/// parameter whose analytic gradient is scaled by 1.01 before comparison,
/// to confirm the check can fail.
pub fn gradcheck(
    cases: &[GradcheckCase],
    seed: u64,
    corrupt: Option<&str>,
) -> Result<GradcheckReport> {
    let mut reports = Vec::new();
    for &case in cases {
        let mut params = Vec::new();
        for s in seed..seed + GRADCHECK_INSTANCES {
            merge_checks(&mut params, check_case(case, s, corrupt)?);
        }
        let passed = params.iter().all(|p| p.passed);
        reports.push(CaseReport {
            case,
            params,
            passed,
        });
    }
    let passed = reports.iter().all(|r| r.passed);
    Ok(GradcheckReport {
        cases: reports,
        passed,
    })
}

fn check_case(case: GradcheckCase, seed: u64, corrupt: Option<&str>) -> Result<Vec<ParamCheck>> {
    Ok(match case.model {
        ModelKind::Homo => {
            let graph = Arc::new(toy_homo(6, 5, 3, seed));
            let settings = HomoSettings {
                d1: 6,
                gamma: 1.5,
                dropout: 0.5,
                decoder_layers: case.decoder_layers,
                recon_mode: case.recon_mode,
                ..HomoSettings::default()
            };
            check_model(&HomoModel::new(graph, settings)?, seed, corrupt)?
        }
        ModelKind::Hetero => {
            let graph = Arc::new(toy_hetero(8, 2, 6, 3, seed));
            let settings = HeteroSettings {
                d0: 8,
                d1: 6,
                channels: 2,
                variant: case.variant,
                gamma: 1.5,
                decoder_layers: case.decoder_layers,
                recon_mode: case.recon_mode,
                ..HeteroSettings::default()
            };
            check_model(&HeteroModel::new(graph, settings)?, seed, corrupt)?
        }
    })
}
