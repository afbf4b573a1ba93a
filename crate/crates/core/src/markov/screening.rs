//! Screening-off, Bernstein and interior-shielding tests expressed as
//! conditional-independence queries on a [`MultiTimeJoint`].

use crate::error::{Error, Result};
use crate::markov::ci::{ci_test, CITestResult, PermutationOptions};
use crate::markov::joint::MultiTimeJoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    X(usize),
    Y(usize),
    Phi(usize),
}

fn indices(joint: &MultiTimeJoint, blocks: &[Block]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for b in blocks {
        out.extend(match *b {
            Block::X(k) => joint.x(k)?,
            Block::Y(k) => joint.y(k)?,
            Block::Phi(k) => joint.phi(k)?,
        });
    }
    Ok(out)
}

/// `A ⫫ B | C` over blocks of the joint.
pub fn ci_blocks(joint: &MultiTimeJoint, a: &[Block], b: &[Block], c: &[Block], opts: &PermutationOptions) -> Result<CITestResult> {
    ci_test(joint, &indices(joint, a)?, &indices(joint, b)?, &indices(joint, c)?, opts)
}

/// `x1 ⫫ y3 | (x2, y2)` on a joint over exactly three steps.
pub fn markov_screening_test(joint: &MultiTimeJoint, opts: &PermutationOptions) -> Result<CITestResult> {
    let s = joint.steps();
    if s.len() != 3 {
        return Err(Error::Arity { needed: 3, got: s.len() });
    }
    ci_blocks(joint, &[Block::X(s[0])], &[Block::Y(s[2])], &[Block::Phi(s[1])], opts)
}

/// Endpoint data held fixed alongside the middle configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndpointData {
    /// `x` at the start and `y` at the end.
    Mixed,
    /// Full configurations at both ends.
    Full,
}

impl EndpointData {
    fn blocks(self, s: usize, u: usize) -> Vec<Block> {
        match self {
            EndpointData::Mixed => vec![Block::X(s), Block::Y(u)],
            EndpointData::Full => vec![Block::Phi(s), Block::Phi(u)],
        }
    }
}

/// Five ordered steps `s < t1 < t2 < t3 < u` of a joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FiveSteps {
    pub s: usize,
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub u: usize,
}

impl FiveSteps {
    pub fn new(s: usize, t1: usize, t2: usize, t3: usize, u: usize) -> Result<Self> {
        if !(s < t1 && t1 < t2 && t2 < t3 && t3 < u) {
            return Err(Error::InvalidGrid(format!("steps must increase strictly, got {s} {t1} {t2} {t3} {u}")));
        }
        Ok(Self { s, t1, t2, t3, u })
    }
}

/// `φ_t1 ⫫ φ_t3 | (φ_t2, endpoint data)`.
pub fn bernstein_test(joint: &MultiTimeJoint, st: FiveSteps, ends: EndpointData, opts: &PermutationOptions) -> Result<CITestResult> {
    let mut c = vec![Block::Phi(st.t2)];
    c.extend(ends.blocks(st.s, st.u));
    ci_blocks(joint, &[Block::Phi(st.t1)], &[Block::Phi(st.t3)], &c, opts)
}

/// `φ_t2 ⫫ (φ_s, φ_u) | (φ_t1, φ_t3)`.
pub fn interior_shielding_test(joint: &MultiTimeJoint, st: FiveSteps, opts: &PermutationOptions) -> Result<CITestResult> {
    ci_blocks(
        joint,
        &[Block::Phi(st.t2)],
        &[Block::Phi(st.s), Block::Phi(st.u)],
        &[Block::Phi(st.t1), Block::Phi(st.t3)],
        opts,
    )
}
