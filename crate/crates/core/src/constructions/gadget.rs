//! The SAT reduction gadget: `f′ = (Y ∧ f) ∨ (¬Y ∧ X1 ∧ … ∧ Xn)` and the
//! uniform distribution over its models. `Y` is variable `n + 1`.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use super::cnf::Cnf;
use crate::assignment::Assignment;
use crate::circuit::Circuit;
use crate::distribution::DenseDistribution;
use crate::divergence::tvd;
use crate::error::{Error, Result};

/// Largest base formula the gadget enumerates.
pub const GADGET_MAX_VARS: usize = 20;

#[derive(Debug, Clone)]
pub struct GadgetInstance {
    pub base: Cnf,
    /// Uniform over the models of `f′`, over `n + 1` variables.
    pub p: DenseDistribution,
    pub mc_f: BigUint,
    /// `P(Y = 1) = MC(f) / (MC(f) + 1)`, exactly.
    pub p_y1: BigRational,
}

impl GadgetInstance {
    pub fn y_var(&self) -> usize {
        self.base.num_vars() + 1
    }

    /// `f′` at a dense index over `n + 1` variables.
    pub fn lifted_eval(&self, index: u64) -> bool {
        lifted(&self.base, index)
    }

    pub fn lifted_models(&self) -> Vec<u64> {
        self.p.support().collect()
    }

    /// Decision-tree circuit representing `P` exactly (smooth, decomposable,
    /// deterministic).
    pub fn compile(&self) -> Result<Circuit> {
        super::compile_decision_tree(&self.p)
    }
}

fn lifted(f: &Cnf, index: u64) -> bool {
    let n = f.num_vars();
    let y = index >> n & 1 == 1;
    let low = index & ((1u64 << n) - 1);
    if y {
        f.eval(low)
    } else {
        low == (1u64 << n) - 1
    }
}

pub fn build_sat_gadget(f: &Cnf) -> Result<GadgetInstance> {
    let n = f.num_vars();
    if n > GADGET_MAX_VARS {
        return Err(Error::Budget { what: "SAT gadget", needed: n, limit: GADGET_MAX_VARS });
    }
    let models: Vec<u64> = (0..1u64 << (n + 1)).filter(|&i| lifted(f, i)).collect();
    let p = DenseDistribution::uniform_over(n + 1, &models)?;
    let mc_f = BigUint::from(models.len() - 1);
    let p_y1 = BigRational::new(mc_f.clone().into(), (mc_f.clone() + BigUint::one()).into());
    Ok(GadgetInstance { base: f.clone(), p, mc_f, p_y1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SatVerdict {
    Satisfiable,
    Unsatisfiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatDecision {
    pub verdict: SatVerdict,
    pub q_y1: f64,
    pub tvd: f64,
}

/// Decides satisfiability of the gadget's base formula from an approximation
/// `Q` of its distribution: satisfiable iff `Q(Y = 1) ≥ 1/4`. Requires
/// `tvd(P, Q) < 1/4`.
pub fn sat_decision(gadget: &GadgetInstance, q: &DenseDistribution) -> Result<SatDecision> {
    let t = tvd(&gadget.p, q)?;
    if t >= 0.25 {
        return Err(Error::Premise(format!("tvd(P, Q) = {t} is not below 1/4")));
    }
    let y = Assignment::empty(q.num_vars()).with(gadget.y_var(), true);
    let q_y1 = q.marginal(&y);
    let verdict = if q_y1 >= 0.25 { SatVerdict::Satisfiable } else { SatVerdict::Unsatisfiable };
    Ok(SatDecision { verdict, q_y1, tvd: t })
}
