//! Method-variant codes in the style of the result tables, for example
//! `BFGS (i,o,32,r)`.
//!
//! Grammar: `Name (tokens)` where the tokens, in canonical order, are
//!
//! * `d` | `i`: direct or inverse update (default `i`)
//! * `1`: single secant (`q = 1`)
//! * `v` | `s` | `p` | `o`: vanilla, symmetric, PSD projection, certified
//!   shift (default `v`)
//! * `m`: μ-scaled step length
//! * an integer `ν ≥ 2`: shift-correction period
//! * `r`: secant rejection
//! * `an` | `cu`: anchored or curve secants (default `cu`)
//!
//! `Newton's` and `Grad. Desc.` take no tokens. A `*` after the name is read
//! as `d`.

use std::fmt;
use std::str::FromStr;

use amsqn_core::optimizer::{Perturbation, SolverConfig, SolverMethod};
use amsqn_core::secant::SecantMode;
use amsqn_core::updates::UpdateMode;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

const VALID_TOKENS: &str = "d, i, 1, v, s, p, o, m, r, an, cu, or an integer period >= 2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variant {
    pub method: SolverMethod,
    pub mode: UpdateMode,
    pub single: bool,
    pub perturbation: Perturbation,
    pub mu_scaling: bool,
    pub nu: usize,
    pub rejection: bool,
    pub anchored: bool,
}

impl Variant {
    pub fn new(method: SolverMethod) -> Self {
        Variant {
            method,
            mode: UpdateMode::Inverse,
            single: false,
            perturbation: Perturbation::None,
            mu_scaling: false,
            nu: 0,
            rejection: false,
            anchored: false,
        }
    }

    /// `base` with this variant's method and flags. `q` is taken from `base`
    /// unless the variant is single-secant.
    pub fn configure(&self, base: &SolverConfig) -> SolverConfig {
        let mut cfg = base.clone();
        cfg.method = self.method;
        if self.method.quasi_newton().is_none() {
            return cfg;
        }
        cfg.update_mode = self.mode;
        if self.single {
            cfg.q = 1;
        }
        cfg.perturbation = self.perturbation;
        cfg.mu_scaling = self.mu_scaling;
        cfg.nu = self.nu;
        cfg.rejection = self.rejection;
        cfg.secant_mode = if self.anchored {
            SecantMode::Anchored
        } else {
            SecantMode::Curve
        };
        cfg
    }
}

fn method_name(m: SolverMethod) -> &'static str {
    match m {
        SolverMethod::Broyden => "Br.",
        SolverMethod::Psb => "Pow.",
        SolverMethod::Dfp => "DFP",
        SolverMethod::Bfgs => "BFGS",
        SolverMethod::Newton => "Newton's",
        SolverMethod::Gd => "Grad. Desc.",
    }
}

fn method_from_name(s: &str) -> Option<SolverMethod> {
    Some(match s {
        "Br." => SolverMethod::Broyden,
        "Pow." => SolverMethod::Psb,
        "DFP" => SolverMethod::Dfp,
        "BFGS" => SolverMethod::Bfgs,
        "Newton's" => SolverMethod::Newton,
        "Grad. Desc." => SolverMethod::Gd,
        _ => return None,
    })
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = method_name(self.method);
        if self.method.quasi_newton().is_none() {
            return f.write_str(name);
        }
        let mut tokens: Vec<String> = vec![match self.mode {
            UpdateMode::Direct => "d".into(),
            UpdateMode::Inverse => "i".into(),
        }];
        if self.single {
            tokens.push("1".into());
        }
        tokens.push(
            match self.perturbation {
                Perturbation::None => "v",
                Perturbation::SymmetricOnly => "s",
                Perturbation::PsdProjection => "p",
                Perturbation::Ours => "o",
            }
            .into(),
        );
        if self.mu_scaling {
            tokens.push("m".into());
        }
        if self.nu > 0 {
            tokens.push(self.nu.to_string());
        }
        if self.rejection {
            tokens.push("r".into());
        }
        if self.anchored {
            tokens.push("an".into());
        }
        write!(f, "{name} ({})", tokens.join(","))
    }
}

impl FromStr for Variant {
    type Err = BenchError;

    fn from_str(code: &str) -> Result<Self> {
        let fail = |reason: String| BenchError::Label {
            label: code.to_string(),
            reason,
        };
        let code_t = code.trim();
        let (head, body) = match code_t.find('(') {
            Some(open) => {
                let body = code_t[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| fail("missing closing parenthesis".into()))?;
                (code_t[..open].trim(), Some(body))
            }
            None => (code_t, None),
        };
        let (name, starred) = match head.strip_suffix('*') {
            Some(n) => (n.trim_end(), true),
            None => (head, false),
        };
        let method = method_from_name(name).ok_or_else(|| {
            fail(format!(
                "unknown method name {name:?} (expected Br., Pow., DFP, BFGS, Newton's or Grad. Desc.)"
            ))
        })?;
        let mut v = Variant::new(method);
        if method.quasi_newton().is_none() {
            if body.is_some() || starred {
                return Err(fail(format!("{name} takes no flags")));
            }
            return Ok(v);
        }

        let mut seen_mode = starred;
        if starred {
            v.mode = UpdateMode::Direct;
        }
        let mut seen_pert = false;
        let mut seen_secant = false;
        let mut seen = std::collections::HashSet::new();
        for tok in body.unwrap_or("").split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if !seen.insert(tok) {
                return Err(fail(format!("token {tok:?} repeated")));
            }
            let once = |flag: &mut bool, what: &str| -> Result<()> {
                if std::mem::replace(flag, true) {
                    return Err(fail(format!("more than one {what} token")));
                }
                Ok(())
            };
            match tok {
                "d" | "i" => {
                    once(&mut seen_mode, "update mode")?;
                    v.mode = if tok == "d" {
                        UpdateMode::Direct
                    } else {
                        UpdateMode::Inverse
                    };
                }
                "1" => v.single = true,
                "v" | "s" | "p" | "o" => {
                    once(&mut seen_pert, "perturbation")?;
                    v.perturbation = match tok {
                        "v" => Perturbation::None,
                        "s" => Perturbation::SymmetricOnly,
                        "p" => Perturbation::PsdProjection,
                        _ => Perturbation::Ours,
                    };
                }
                "m" => v.mu_scaling = true,
                "r" => v.rejection = true,
                "an" | "cu" => {
                    once(&mut seen_secant, "secant mode")?;
                    v.anchored = tok == "an";
                }
                other => match other.parse::<usize>() {
                    Ok(nu) if nu >= 2 => {
                        if v.nu != 0 {
                            return Err(fail("more than one correction period".into()));
                        }
                        v.nu = nu;
                    }
                    _ => return Err(fail(format!("unknown token {other:?}; valid tokens: {VALID_TOKENS}"))),
                },
            }
        }
        Ok(v)
    }
}

impl TryFrom<String> for Variant {
    type Error = BenchError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}
