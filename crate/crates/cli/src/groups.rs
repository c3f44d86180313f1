//! Group and representation specs such as `cyclic:8` and `regular+irrep:1`.

use std::sync::Arc;

use equiproj::group::{
    change_of_basis, cyclic_irrep, dihedral_natural, dihedral_sign, direct_sum, make_cyclic, make_dihedral,
    regular_representation, trivial_representation, FiniteGroup, Representation,
};
use equiproj::random::{random_unitary, SeededRng};
use rand::Rng;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Cyclic(usize),
    Dihedral(usize),
}

#[derive(Clone, Debug)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub group: Arc<FiniteGroup>,
}

impl GroupSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || CliError::input(format!("unknown group '{s}' (expected cyclic:n, dihedral:n or trivial)"));
        let kind = if s == "trivial" {
            GroupKind::Cyclic(1)
        } else {
            let (name, n) = s.split_once(':').ok_or_else(bad)?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            match name.trim() {
                "cyclic" | "c" => GroupKind::Cyclic(n),
                "dihedral" | "d" => GroupKind::Dihedral(n),
                _ => return Err(bad()),
            }
        };
        let group = match kind {
            GroupKind::Cyclic(n) => make_cyclic(n)?,
            GroupKind::Dihedral(n) => make_dihedral(n)?,
        };
        Ok(Self {
            kind,
            group: Arc::new(group),
        })
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self.kind, GroupKind::Cyclic(_))
    }

    /// Parses `term(+term)*` with terms `regular`, `trivial[:d]`,
    /// `irrep:k` (cyclic) and `natural` / `sign` (dihedral).
    pub fn representation(&self, s: &str) -> CliResult<Representation> {
        let mut out: Option<Representation> = None;
        for term in s.split('+') {
            let term = term.trim().to_ascii_lowercase();
            let (name, arg) = match term.split_once(':') {
                Some((a, b)) => (a.trim().to_string(), Some(b.trim().to_string())),
                None => (term.clone(), None),
            };
            let num = |default: usize| -> CliResult<usize> {
                match &arg {
                    None => Ok(default),
                    Some(a) => a.parse().map_err(|_| CliError::input(format!("bad representation term '{term}'"))),
                }
            };
            let g = self.group.clone();
            let rep = match (name.as_str(), self.kind) {
                ("regular", _) => regular_representation(g)?,
                ("trivial", _) => trivial_representation(g, num(1)?)?,
                ("irrep", GroupKind::Cyclic(_)) => cyclic_irrep(g, num(0)?)?,
                ("natural", GroupKind::Dihedral(_)) => dihedral_natural(g)?,
                ("sign", GroupKind::Dihedral(_)) => dihedral_sign(g)?,
                _ => return Err(CliError::input(format!("representation term '{term}' does not apply to this group"))),
            };
            out = Some(match out {
                None => rep,
                Some(acc) => direct_sum(&acc, &rep)?,
            });
        }
        out.ok_or_else(|| CliError::input("empty representation spec"))
    }

    /// A random representation of small dimension, sometimes in a scrambled basis.
    pub fn random_representation(&self, r: &mut SeededRng) -> CliResult<Representation> {
        let g = self.group.clone();
        let rep = match r.gen_range(0..3) {
            0 => regular_representation(g)?,
            1 => trivial_representation(g, r.gen_range(1..=2))?,
            _ => {
                let mut acc = self.random_irrep(r)?;
                for _ in 1..r.gen_range(1..=3) {
                    acc = direct_sum(&acc, &self.random_irrep(r)?)?;
                }
                acc
            }
        };
        if r.gen_bool(0.5) {
            let u = random_unitary(rep.dim(), r);
            Ok(change_of_basis(&rep, &u)?)
        } else {
            Ok(rep)
        }
    }

    fn random_irrep(&self, r: &mut SeededRng) -> CliResult<Representation> {
        let g = self.group.clone();
        Ok(match self.kind {
            GroupKind::Cyclic(n) => cyclic_irrep(g, r.gen_range(0..n))?,
            GroupKind::Dihedral(_) => match r.gen_range(0..3) {
                0 => dihedral_natural(g)?,
                1 => dihedral_sign(g)?,
                _ => trivial_representation(g, 1)?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_groups() {
        assert_eq!(GroupSpec::parse("cyclic:8").unwrap().order(), 8);
        assert_eq!(GroupSpec::parse("dihedral:3").unwrap().order(), 6);
        assert_eq!(GroupSpec::parse("trivial").unwrap().order(), 1);
        assert!(GroupSpec::parse("cyclic").is_err());
        assert!(GroupSpec::parse("klein:4").is_err());
    }

    #[test]
    fn parses_representation_sums() {
        let c4 = GroupSpec::parse("cyclic:4").unwrap();
        assert_eq!(c4.representation("regular+irrep:1+trivial:2").unwrap().dim(), 7);
        assert!(c4.representation("natural").is_err());
        let d4 = GroupSpec::parse("dihedral:4").unwrap();
        assert_eq!(d4.representation("natural+sign").unwrap().dim(), 3);
        assert!(d4.representation("irrep:1").is_err());
    }
}
