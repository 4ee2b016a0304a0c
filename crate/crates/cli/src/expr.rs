//! Odd generating functions f(u) given as text, e.g. `eps*u*(u^2-1)`.

use std::collections::BTreeMap;

use anyhow::{anyhow, Result};
use fasteval::{Compiler, Evaler, Instruction, Slab};

pub struct Expr {
    slab: Slab,
    instr: Instruction,
    vars: BTreeMap<String, f64>,
}

impl Expr {
    /// Parses `text` in the variable `u`; the other names in `vars` are
    /// bound once here.
    pub fn parse(text: &str, vars: &[(&str, f64)]) -> Result<Self> {
        let mut slab = Slab::new();
        let instr = fasteval::Parser::new()
            .parse(text, &mut slab.ps)
            .map_err(|e| anyhow!("cannot parse f = {text:?}: {e}"))?
            .from(&slab.ps)
            .compile(&slab.ps, &mut slab.cs);
        let mut vars: BTreeMap<String, f64> = vars.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        vars.insert("u".into(), 0.0);
        let e = Self { slab, instr, vars };
        e.try_eval(0.5)?;
        Ok(e)
    }

    fn try_eval(&self, u: f64) -> Result<f64> {
        let mut vars = self.vars.clone();
        vars.insert("u".into(), u);
        self.instr.eval(&self.slab, &mut vars).map_err(|e| anyhow!("evaluating f at u = {u}: {e}"))
    }

    /// f(u); evaluation errors (unknown names were ruled out at parse time)
    /// surface as NaN.
    pub fn eval(&self, u: f64) -> f64 {
        self.try_eval(u).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_with_bound_parameters() {
        let f = Expr::parse("eps*u*(u^2-1)", &[("eps", 0.5)]).unwrap();
        assert!((f.eval(0.5) - 0.5 * 0.5 * (0.25 - 1.0)).abs() < 1e-15);
        assert_eq!(f.eval(1.0), 0.0);
        let g = Expr::parse("1/2*u", &[]).unwrap();
        assert_eq!(g.eval(1.0), 0.5);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(Expr::parse("a*u", &[]).is_err());
        assert!(Expr::parse("u*(", &[]).is_err());
    }
}
