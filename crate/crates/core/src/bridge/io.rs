//! Plain-text persistence of bridge ensembles.
//!
//! ```text
//! tsqlab-ensemble 1
//! t0 <t0>
//! tf <tf>
//! steps <K>
//! x0 <v..>
//! yf <v..>
//! seed <seed>
//! paths <count>
//! path 0
//! <φ at t0>
//! ...
//! ```

use std::fmt::Write as _;

use crate::bridge::path::{BridgeBoundary, DiscretePath};
use crate::bridge::sampler::BridgeEnsemble;
use crate::error::{Error, Result};

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_ensemble(ens: &BridgeEnsemble) -> String {
    let b = &ens.boundary;
    let mut s = String::new();
    let _ = writeln!(s, "tsqlab-ensemble 1");
    let _ = writeln!(s, "t0 {}", b.t0);
    let _ = writeln!(s, "tf {}", b.tf);
    let _ = writeln!(s, "steps {}", ens.steps);
    let _ = writeln!(s, "x0 {}", join(&b.x0));
    let _ = writeln!(s, "yf {}", join(&b.yf));
    let _ = writeln!(s, "seed {}", ens.rng_seed);
    let _ = writeln!(s, "paths {}", ens.paths.len());
    for (i, p) in ens.paths.iter().enumerate() {
        let _ = writeln!(s, "path {i}");
        for k in 0..=p.steps() {
            let _ = writeln!(s, "{}", join(p.at(k)));
        }
    }
    s
}

/// Boundary, step count, seed and paths of a stored ensemble.
pub struct StoredEnsemble {
    pub boundary: BridgeBoundary,
    pub steps: usize,
    pub seed: u64,
    pub paths: Vec<DiscretePath>,
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn raw(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = *self
            .lines
            .get(self.pos)
            .ok_or(Error::Parse { line: self.lines.last().map_or(0, |l| l.0 + 1), msg: "unexpected end of ensemble".into() })?;
        self.pos += 1;
        Ok((n + 1, line.split_whitespace().collect()))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, mut parts) = self.raw()?;
        if parts.first() != Some(&key) {
            return Err(Error::Parse { line: n, msg: format!("expected {key:?}") });
        }
        parts.remove(0);
        Ok((n, parts))
    }

    fn numbers(&mut self, key: &str) -> Result<Vec<f64>> {
        let (n, parts) = self.keyed(key)?;
        parts.iter().map(|s| num(n, s)).collect()
    }

    fn scalar(&mut self, key: &str) -> Result<f64> {
        let (n, parts) = self.keyed(key)?;
        match parts.as_slice() {
            [s] => num(n, s),
            _ => Err(Error::Parse { line: n, msg: format!("{key} takes one value") }),
        }
    }
}

fn num(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse { line, msg: e.to_string() })
}

pub fn read_ensemble(text: &str) -> Result<StoredEnsemble> {
    let mut c = Cursor { lines: text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect(), pos: 0 };
    let (n, v) = c.keyed("tsqlab-ensemble")?;
    if v != ["1"] {
        return Err(Error::Parse { line: n, msg: "unsupported ensemble version".into() });
    }
    let t0 = c.scalar("t0")?;
    let tf = c.scalar("tf")?;
    let steps = c.scalar("steps")? as usize;
    let x0 = c.numbers("x0")?;
    let yf = c.numbers("yf")?;
    let (n, v) = c.keyed("seed")?;
    let seed = v.first().ok_or(Error::Parse { line: n, msg: "missing seed".into() })?
        .parse::<u64>()
        .map_err(|e| Error::Parse { line: n, msg: e.to_string() })?;
    let count = c.scalar("paths")? as usize;
    let boundary = BridgeBoundary::new(t0, tf, x0, yf)?;
    let dim = 2 * boundary.half();
    let dt = boundary.dt(steps);
    let mut paths = Vec::with_capacity(count);
    for _ in 0..count {
        c.keyed("path")?;
        let mut values = Vec::with_capacity((steps + 1) * dim);
        for _ in 0..=steps {
            let (n, row) = c.raw()?;
            if row.len() != dim {
                return Err(Error::Parse { line: n, msg: format!("expected {dim} values, got {}", row.len()) });
            }
            for s in row {
                values.push(num(n, s)?);
            }
        }
        paths.push(DiscretePath::new(t0, dt, dim, values)?);
    }
    Ok(StoredEnsemble { boundary, steps, seed, paths })
}

/// `key,value` summary followed by nothing else; per-coordinate ESS lives in
/// [`ess_csv`].
pub fn diagnostics_csv(ens: &BridgeEnsemble) -> String {
    let mut s = String::from("key,value\n");
    let _ = writeln!(s, "n_paths,{}", ens.paths.len());
    let _ = writeln!(s, "steps,{}", ens.steps);
    let _ = writeln!(s, "seed,{}", ens.rng_seed);
    let _ = writeln!(s, "acceptance_rate,{}", ens.acceptance_rate);
    let _ = writeln!(s, "min_ess,{}", ens.min_ess());
    for (i, (a, r)) in ens.chain_acceptance.iter().zip(&ens.final_rho).enumerate() {
        let _ = writeln!(s, "chain{i}_acceptance,{a}");
        let _ = writeln!(s, "chain{i}_rho,{r}");
    }
    s
}

/// `step,component,ess` for every free coordinate.
pub fn ess_csv(ens: &BridgeEnsemble) -> String {
    let layout = ens.layout();
    let mut s = String::from("step,component,ess\n");
    for k in 0..=ens.steps {
        for c in 0..layout.dim() {
            if let Some(e) = ens.ess_of(k, c) {
                let _ = writeln!(s, "{k},{c},{e}");
            }
        }
    }
    s
}
